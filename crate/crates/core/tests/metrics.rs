mod support;

use num::rational::Ratio;
use proptest::prelude::*;

use roomescape::catalog::Style;
use roomescape::log::Outcome;
use roomescape::metrics::{aggregate_benchmark, episode_metrics, pearson, stage_analysis, MetricsError};
use roomescape::propchain::PropKind;
use roomescape::scenegen::generate;

use support::{node_of, synth_log, Synth};

fn idle(n: usize) -> Vec<Synth> {
    (0..n).map(|_| Synth::idle()).collect()
}

/// Half-up rendering of `num/den` at `places` decimals, integer arithmetic only.
fn render(num: u64, den: u64, places: u32) -> String {
    let scale = 10u64.pow(places);
    let scaled = (2 * num * scale + den) / (2 * den);
    if places == 0 {
        return scaled.to_string();
    }
    format!("{}.{:0w$}", scaled / scale, scaled % scale, w = places as usize)
}

#[test]
fn difficulty2_reference_pattern() {
    let scene = generate("d2-key", Style::Kitchen, 0).unwrap();
    let key = node_of(&scene, PropKind::Key);
    let mut steps = idle(23);
    steps[4] = Synth::gets(&key);
    steps[10] = Synth::grab(false);
    steps[22] = Synth::escape();
    let log = synth_log(&scene, "human", steps, 75);
    log.check().unwrap();

    let m = episode_metrics(&log);
    assert_eq!((m.grab_attempts, m.grab_successes, m.required, m.steps), (3, 2, 2, 23));
    assert_eq!(m.gsr, Ratio::new(2, 3));
    assert_eq!(m.prop_gain, Ratio::new(1, 1));
    assert!(!m.prop_gain_surplus);
    assert_eq!(m.grab_ratio, Ratio::new(3, 23));

    let report = aggregate_benchmark(&[log]).unwrap();
    let g = &report.rows[0].groups["difficulty-2"];
    assert_eq!(g.gsr.display, "66.67");
    assert_eq!(g.prop_gain.as_ref().unwrap().display, "100.00");
    assert_eq!(g.grab_ratio.display, "0.130");
    assert_eq!(g.mean_steps.display, "23.00");
    assert_eq!(g.gsr.exact, "2/3");
}

#[test]
fn zero_grabs_are_flagged_not_dropped() {
    let scene = generate("d1", Style::Bedroom, 0).unwrap();
    let log = synth_log(&scene, "idle", idle(50), 50);
    log.check().unwrap();
    let m = episode_metrics(&log);
    assert_eq!(m.outcome, Outcome::Failed);
    assert_eq!(m.grab_ratio, Ratio::new(0, 1));
    assert!(!m.gsr_defined);
    let g = &aggregate_benchmark(&[log]).unwrap().rows[0].groups["difficulty-1"];
    assert_eq!((g.gsr.display.as_str(), g.gsr_undefined), ("0.00", 1));
    assert!(g.prop_gain.is_none());
}

#[test]
fn every_step_a_successful_grab() {
    let scene = generate("d2-key", Style::Bathroom, 3).unwrap();
    let steps = (0..5).map(|_| Synth::grab(true)).collect();
    let m = episode_metrics(&synth_log(&scene, "eager", steps, 75));
    assert_eq!(m.gsr, Ratio::new(1, 1));
    assert_eq!(m.grab_ratio, Ratio::new(1, 1));
    assert_eq!(m.prop_gain, Ratio::new(1, 1));
    assert!(m.prop_gain_surplus);

    let one = (0..1).map(|_| Synth::grab(true)).collect();
    let m = episode_metrics(&synth_log(&scene, "eager", one, 75));
    assert_eq!(m.prop_gain, Ratio::new(1, 2));
    assert!(!m.prop_gain_surplus);
}

#[test]
fn all_failed_d1_batch() {
    let logs: Vec<_> = (0..11)
        .map(|s| synth_log(&generate("d1", Style::ALL[s % 4], s as u64).unwrap(), "phi", idle(50), 50))
        .collect();
    let report = aggregate_benchmark(&logs).unwrap();
    let g = &report.rows[0].groups["difficulty-1"];
    assert_eq!((g.episodes, g.escaped), (11, 0));
    assert_eq!(g.escape_rate.display, "0.00");
    assert_eq!(g.mean_steps.display, "50.00");
    assert_eq!(report.rows[0].avg_escape_rate.display, "0.00");
    assert!(report.to_table().contains("50.00"));
}

#[test]
fn all_escaped_and_singleton_batches() {
    let logs: Vec<_> = (0..11)
        .map(|s| {
            let scene = generate("d1", Style::Kitchen, s).unwrap();
            let mut steps = idle(s as usize % 7);
            steps.push(Synth::escape());
            synth_log(&scene, "gpt", steps, 50)
        })
        .collect();
    let g = &aggregate_benchmark(&logs).unwrap().rows[0].groups["difficulty-1"];
    assert_eq!(g.escape_rate.display, "100.00");
    let total: u64 = logs.iter().map(|l| l.total_steps as u64).sum();
    assert_eq!(g.mean_steps.display, render(total, 11, 2));

    let scene = generate("d1", Style::Kitchen, 40).unwrap();
    let mut steps = idle(4);
    steps.push(Synth::escape());
    let log = synth_log(&scene, "solo", steps, 50);
    let m = episode_metrics(&log);
    let g = aggregate_benchmark(std::slice::from_ref(&log)).unwrap().rows[0].groups["difficulty-1"].clone();
    assert_eq!(g.escape_rate.display, "100.00");
    assert_eq!(g.mean_steps.display, "5.00");
    assert_eq!(g.gsr.exact, format!("{}/{}", m.gsr.numer(), m.gsr.denom()));
    assert_eq!(g.grab_ratio.exact, format!("{}/{}", m.grab_ratio.numer(), m.grab_ratio.denom()));
}

#[test]
fn aborted_episodes_are_excluded() {
    let scene = generate("d1", Style::Kitchen, 1).unwrap();
    let mut aborted = synth_log(&scene, "a", idle(3), 50);
    aborted.outcome = Outcome::Aborted;
    let mut steps = idle(1);
    steps.push(Synth::escape());
    let ok = synth_log(&scene, "a", steps, 50);
    let g = &aggregate_benchmark(&[aborted.clone(), ok]).unwrap().rows[0].groups["difficulty-1"];
    assert_eq!((g.episodes, g.aborted, g.escape_rate.display.as_str()), (1, 1, "100.00"));
    assert!(matches!(aggregate_benchmark(&[aborted]), Err(MetricsError::EmptyGroup(_))));
    assert!(matches!(aggregate_benchmark(&[]), Err(MetricsError::NoLogs)));
}

#[test]
fn d2_key_stages() {
    let scene = generate("d2-key", Style::Kitchen, 5).unwrap();
    let mut steps = idle(14);
    steps[5] = Synth::gets(&node_of(&scene, PropKind::Key));
    steps[13] = Synth::escape();
    let stages = stage_analysis(&synth_log(&scene, "x", steps, 75)).unwrap();
    let got: Vec<_> = stages.iter().map(|s| (s.stage.as_str(), s.steps, s.cost)).collect();
    assert_eq!(
        got,
        vec![("#Key", Some(6), Some(Ratio::new(6, 14))), ("#Exit", Some(8), Some(Ratio::new(8, 14)))]
    );
}

#[test]
fn d3_note_key_stages() {
    let scene = generate("d3-note-key", Style::Kitchen, 5).unwrap();
    let mut steps = idle(50);
    steps[10] = Synth::gets(&node_of(&scene, PropKind::Password));
    steps[16] = Synth::gets(&node_of(&scene, PropKind::Key));
    steps[49] = Synth::escape();
    let stages = stage_analysis(&synth_log(&scene, "x", steps.clone(), 100)).unwrap();
    let got: Vec<_> = stages.iter().map(|s| (s.stage.as_str(), s.steps)).collect();
    assert_eq!(got, vec![("#PW", Some(11)), ("#Key", Some(6)), ("#Exit", Some(33))]);
    assert_eq!(stages[2].cost, Some(Ratio::new(33, 50)));

    steps.truncate(30);
    let partial = stage_analysis(&synth_log(&scene, "x", steps, 100)).unwrap();
    let got: Vec<_> = partial.iter().map(|s| (s.stage.as_str(), s.steps)).collect();
    assert_eq!(got, vec![("#PW", Some(11)), ("#Key", Some(6)), ("#Exit", None)]);
}

#[test]
fn stage_marks_must_match_grants() {
    let scene = generate("d2-key", Style::Kitchen, 5).unwrap();
    let mut log = synth_log(&scene, "x", vec![Synth::escape()], 75);
    log.marks.key_step = Some(1);
    assert_eq!(stage_analysis(&log), Err(MetricsError::MarksInconsistent));
}

#[test]
fn constant_series_is_degenerate() {
    let c = pearson(&[4.0; 6], &[1.0, 2.0, 3.0, 5.0, 8.0, 13.0]).unwrap();
    assert!(c.degenerate);
    assert_eq!(c.r, 0.0);
}

proptest! {
    #[test]
    fn pearson_matches_textbook(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..60)) {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let c = pearson(&xs, &ys).unwrap();
        prop_assume!(!c.degenerate);
        let r = support::pearson(&xs, &ys);
        prop_assert!((c.r - r).abs() < 1e-9, "{} vs {}", c.r, r);
    }

    #[test]
    fn rates_are_consistent(flags in prop::collection::vec((any::<bool>(), any::<bool>()), 0..75), label in 0usize..3) {
        let level = ["d1", "d2-key", "d3-key-note"][label];
        let scene = generate(level, Style::Kitchen, 9).unwrap();
        let steps = flags.iter().map(|&(g, ok)| if g { Synth::grab(ok) } else { Synth::idle() }).collect();
        let log = synth_log(&scene, "p", steps, 100);
        log.check().unwrap();
        let m = episode_metrics(&log);
        let (a, s, n, req) = (m.grab_attempts as u64, m.grab_successes as u64, m.steps as u64, m.required as u64);
        prop_assert_eq!(a, flags.iter().filter(|f| f.0).count() as u64);
        prop_assert_eq!(s, flags.iter().filter(|f| f.0 && f.1).count() as u64);
        prop_assert_eq!(m.gsr * Ratio::from_integer(a), Ratio::from_integer(if a == 0 { 0 } else { s }));
        prop_assert_eq!(m.grab_ratio * Ratio::from_integer(n), Ratio::from_integer(if n == 0 { 0 } else { a }));
        prop_assert_eq!(m.prop_gain * Ratio::from_integer(req), Ratio::from_integer(s.min(req)));
        prop_assert!(m.gsr <= Ratio::from_integer(1) && m.grab_ratio <= Ratio::from_integer(1));

        let g = &aggregate_benchmark(std::slice::from_ref(&log)).unwrap().rows[0].groups[&scene.group()];
        if a > 0 {
            prop_assert_eq!(&g.gsr.display, &render(100 * s, a, 2));
        }
        if n > 0 {
            prop_assert_eq!(&g.grab_ratio.display, &render(a, n, 3));
        }
        prop_assert_eq!(&g.mean_steps.display, &render(n, 1, 2));
    }
}
