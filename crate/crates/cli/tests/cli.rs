use std::path::Path;
use std::process::{Command, Output};

fn roomescape(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roomescape"))
        .args(args)
        .env_remove("ROOMESCAPE_AGENT_URL")
        .env_remove("ROOMESCAPE_JUDGE_URL")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path, ext: &str) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn generate_eleven_note_key_scenes_that_validate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = roomescape(&["generate", "--difficulty", "d3-note-key", "--style", "kitchen", "--seeds", "0..10", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scenes = files(dir.path(), "toml");
    assert_eq!(scenes.len(), 11);

    let mut args = vec!["validate"];
    args.extend(scenes.iter().map(String::as_str));
    let o = roomescape(&args);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("ok")).count(), 11);
}

#[test]
fn oracle_run_reports_full_escape_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("logs");
    let out_s = out.to_str().unwrap();
    let o = roomescape(&["run", "--difficulty", "d1", "--style", "all", "--seeds", "0..2", "--agent", "oracle", "--out", out_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&out, "jsonl").len(), 12);

    let report = roomescape(&["report", out_s]);
    assert!(report.status.success());
    let text = stdout(&report);
    let row = text.lines().find(|l| l.starts_with("oracle")).unwrap();
    assert!(row.contains("100.00"), "{text}");

    let json = roomescape(&["report", "--json", "--stages", "--correlation", out_s]);
    assert!(json.status.success());
    assert!(stdout(&json).contains("movement correlation"));

    let o = roomescape(&["replay", out_s]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("ok")).count(), 12);
}

#[test]
fn inert_agent_fails_and_replay_flags_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = roomescape(&["run", "--difficulty", "d1", "--agent", "inert", "--out", out]);
    assert!(o.status.success());
    let table = stdout(&o);
    assert!(table.contains("0.00") && table.contains("50.00"), "{table}");

    let log = &files(dir.path(), "jsonl")[0];
    let text = std::fs::read_to_string(log).unwrap();
    let tampered = text.replacen("You did not interact with any objects", "You did interact with some objects", 1);
    std::fs::write(log, tampered).unwrap();
    let o = roomescape(&["replay", log]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("feedback"));
}

#[test]
fn judge_and_debrief_with_stub() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("logs");
    let out_s = out.to_str().unwrap();
    let o = roomescape(&["run", "--difficulty", "d2-key", "--seeds", "1", "--out", out_s]);
    assert!(o.status.success());

    let o = roomescape(&["judge", "--judge", "stub", out_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("C_IO"));

    let answers = dir.path().join("answers.json");
    std::fs::write(&answers, r#"["", "", ""]"#).unwrap();
    let o = roomescape(&["debrief", "--judge", "stub", "--answers", answers.to_str().unwrap(), out_s]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains(": 0.0"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!roomescape(&[]).status.success());
    assert!(!roomescape(&["generate", "--difficulty", "d9", "--out", "/tmp/none"]).status.success());
    assert!(!roomescape(&["run", "--agent", "oracle", "--out", "/tmp/none"]).status.success());
    let o = roomescape(&["judge", "/nonexistent.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    let o = roomescape(&["run", "--difficulty", "d1", "--agent", "remote", "--out", "/tmp/none"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ROOMESCAPE_AGENT_URL"));
}
