//! Prompt texts against hand-transcribed golden copies in `tests/golden/`.

use std::path::PathBuf;

use roomescape::judge::{build_consistency_prompt, build_rubric_prompt, debrief_prompts};
use roomescape::oracle::validate_solvable;
use roomescape::protocol::{feedback, step_prompt, system_prompt};
use roomescape::scene_file;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn golden(name: &str) -> String {
    let text = std::fs::read_to_string(golden_path(name)).unwrap();
    text.lines().map(str::trim_end).collect::<Vec<_>>().join("\n")
}

fn filled(name: &str, slots: &[(&str, &str)]) -> String {
    let mut text = golden(name);
    for (k, v) in slots {
        text = text.replace(&format!("{{{k}}}"), v);
    }
    text
}

/// Lines must agree one for one; the message names the first difference.
fn assert_lines(name: &str, expected: &str, actual: &str) {
    let exp: Vec<&str> = expected.lines().map(str::trim_end).collect();
    let act: Vec<&str> = actual.trim_end().lines().map(str::trim_end).collect();
    for (i, (e, a)) in exp.iter().zip(&act).enumerate() {
        assert_eq!(e, a, "{name}: line {} differs", i + 1);
    }
    assert_eq!(exp.len(), act.len(), "{name}: line counts differ");
}

#[test]
fn system_prompt_matches_golden() {
    assert_lines("system_prompt.txt", &golden("system_prompt.txt"), &system_prompt());
}

#[test]
fn step_prompt_matches_golden() {
    let cases = [
        (feedback::NO_INTERACTION, feedback::EMPTY_BAG),
        ("You picked up key_1.", "key_1: a small brass key"),
        (feedback::ESCAPED, "key_1: a small brass key\nnote_1: a folded note"),
    ];
    for (result, bag) in cases {
        let expected = filled("step_prompt.txt", &[("interaction_result", result), ("bag_desc", bag)]);
        assert_lines("step_prompt.txt", &expected, &step_prompt(result, bag));
    }
}

#[test]
fn consistency_prompt_matches_golden() {
    let rationale = "The box on the desk looks locked; I will try the code from the note.";
    let response = "You used the correct password to unlock the box_1.";
    let expected = filled("consistency_prompt.txt", &[("rationale", rationale), ("response", response)]);
    assert_lines("consistency_prompt.txt", &expected, &build_consistency_prompt(rationale, response));
}

#[test]
fn debrief_prompts_match_golden() {
    let prompts = debrief_prompts();
    for (i, prompt) in prompts.iter().enumerate() {
        let name = format!("debrief_{}.txt", i + 1);
        assert_lines(&name, &golden(&name), prompt);
    }
}

#[test]
fn rubric_prompt_matches_golden() {
    let slots = [("groundtruth", "A clockmaker hid a key."), ("recovered", "Someone hid a key.")];
    let expected = filled("rubric.txt", &slots);
    assert_lines("rubric.txt", &expected, &build_rubric_prompt(slots[0].1, slots[1].1));
}

#[test]
fn feedback_strings_are_exact() {
    assert_eq!(feedback::ESCAPED, "Escaped successfully!");
    assert_eq!(feedback::NO_INTERACTION, "You did not interact with any objects in the last step.");
}

#[test]
fn note_key_chain_scene_is_solvable() {
    let scene = scene_file::load(&golden_path("note_key_chain.toml")).unwrap();
    assert_eq!(scene.difficulty(), "d3-note-key");
    assert_eq!(scene.required_interaction_count().unwrap(), 3);
    let report = validate_solvable(&scene);
    assert!(report.ok, "{report:?}");
    assert!(report.oracle_steps.unwrap() <= scene.step_limit);
}
