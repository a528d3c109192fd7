//! Generates one game per standard difficulty, lets the oracle and a random
//! agent play it, and prints the results table.
//!
//! ```text
//! cargo run -p roomescape-core --example play_oracle
//! ```

use roomescape::agent::{AgentEndpoint, OracleAgent, RandomAgent};
use roomescape::catalog::Style;
use roomescape::episode::{replay, run_episode, EpisodeOptions};
use roomescape::metrics::aggregate_benchmark;
use roomescape::propchain::DifficultyLabel;
use roomescape::scenegen::generate_scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut logs = Vec::new();
    for (i, label) in DifficultyLabel::STANDARD.into_iter().enumerate() {
        let scene = generate_scene(label, Style::ALL[i % Style::ALL.len()], 7)?;
        let agents: [Box<dyn AgentEndpoint>; 2] = [Box::new(OracleAgent::new()), Box::new(RandomAgent::new(7, 0.3))];
        for mut agent in agents {
            let log = run_episode(&scene, agent.as_mut(), &EpisodeOptions::default())?;
            assert!(replay(&log).is_empty());
            println!("{:<26} {:<10} {:?} in {} steps", scene.scene_id, log.header.agent, log.outcome, log.total_steps);
            logs.push(log);
        }
    }
    println!("\n{}", aggregate_benchmark(&logs)?.to_table());
    Ok(())
}
