//! Scenario files, trajectory CSV, JSON reports and the `dcop` command-line
//! driver on top of `dcop-core`.

pub mod output;
pub mod scenario;
pub mod state;

use std::time::{Duration, Instant};

use dcop_core::{Mode, SimError, Trajectory};

pub use scenario::{parse_scenario, parse_scenario_str, Scenario, ScenarioError};

/// Runs a scenario and measures wall-clock time.
pub fn run_scenario(s: &Scenario, mode: Mode, checked: bool) -> Result<(Trajectory, Duration), SimError> {
    let start = Instant::now();
    let run = if checked { dcop_core::run } else { dcop_core::run_unchecked };
    let t = run(&s.problem, &s.graph, &s.gains, &s.sim, mode, Some(&s.init))?;
    Ok((t, start.elapsed()))
}
