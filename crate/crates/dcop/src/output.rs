//! Trajectory CSV and JSON reports.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use dcop_core::{KktReport, Mode, RunSummary, SaddlePoint, StateLayout, SweepRow, Trajectory, ValidationReport};
use serde_json::{json, Value};

/// Header names and the flat-state index behind each state column.
fn state_columns(layout: &StateLayout, mode: Mode) -> Vec<(String, usize)> {
    let (n, l) = (layout.n(), layout.l());
    let mut cols: Vec<(String, usize)> = layout.x().map(|k| (format!("x[{}]", k + 1), k)).collect();
    let nl_block = |name: &str, start: usize, cols: &mut Vec<(String, usize)>| {
        for e in 0..l {
            for i in 0..n {
                cols.push((format!("{name}[{}][{}]", i + 1, e + 1), start + i * l + e));
            }
        }
    };
    nl_block("mu", layout.mu().start, &mut cols);
    for i in 0..n {
        for (j, k) in layout.lambda_agent(i).enumerate() {
            cols.push((format!("lambda[{}][{}]", i + 1, j + 1), k));
        }
    }
    if mode == Mode::Full {
        nl_block("xi_h", layout.xi_h().start, &mut cols);
        nl_block("zeta_h", layout.zeta_h().start, &mut cols);
        nl_block("xi_mu", layout.xi_mu().start, &mut cols);
        nl_block("zeta_mu", layout.zeta_mu().start, &mut cols);
    }
    cols
}

pub fn csv_header(t: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(state_columns(&t.layout, t.mode).into_iter().map(|(name, _)| name));
    if t.lyapunov.is_some() {
        h.push("V".into());
    }
    h.push("kkt_max".into());
    h
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory<W: Write>(t: &Trajectory, w: &mut W) -> io::Result<()> {
    let cols = state_columns(&t.layout, t.mode);
    writeln!(w, "{}", csv_header(t).join(","))?;
    for (k, time) in t.times.iter().enumerate() {
        let mut row = Vec::with_capacity(cols.len() + 3);
        row.push(num(*time));
        row.extend(cols.iter().map(|&(_, idx)| num(t.states[k][idx])));
        if let Some(v) = &t.lyapunov {
            row.push(num(v[k]));
        }
        row.push(num(t.kkt_max[k]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_trajectory_file(t: &Trajectory, path: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trajectory(t, &mut w)?;
    w.flush()
}

pub fn kkt_json(r: &KktReport) -> Value {
    json!({
        "stationarity": r.stationarity,
        "primal_equality": r.primal_equality,
        "dual_nonneg_violation": r.dual_nonneg_violation,
        "primal_inequality_violation": r.primal_inequality_violation,
        "complementarity": r.complementarity,
        "max_residual": r.max_residual,
    })
}

pub fn saddle_json(s: &SaddlePoint) -> Value {
    json!({
        "x": s.x_star,
        "mu": s.mu_star,
        "lambda": s.lambda_star,
        "active_set": s.active_set.iter().map(|c| [c.agent + 1, c.index + 1]).collect::<Vec<_>>(),
        "degenerate": s.degenerate,
    })
}

pub fn validation_json(r: &ValidationReport) -> Value {
    let checks: serde_json::Map<String, Value> = r
        .checks()
        .iter()
        .map(|(name, c)| (name.to_string(), json!({ "passed": c.passed, "detail": c.detail })))
        .collect();
    json!({
        "passed": r.all_passed(),
        "checks": checks,
        "slater_margin": r.slater_margin,
        "saddle": r.saddle.as_ref().map(saddle_json),
    })
}

pub fn summary_json(s: &RunSummary, wall_clock: Duration) -> Value {
    json!({
        "final_time": s.final_time,
        "steps": s.steps,
        "stopped_early": s.stopped_early,
        "final_kkt": kkt_json(&s.final_kkt),
        "final_lyapunov": s.final_lyapunov.filter(|v| v.is_finite()),
        "floor_triggers": s.floor_triggers,
        "lambda_clamps": s.lambda_clamps,
        "min_lambda": if s.min_lambda.is_finite() { Some(s.min_lambda) } else { None },
        "wall_clock_seconds": wall_clock.as_secs_f64(),
    })
}

pub fn sweep_json(rows: &[SweepRow]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| match &r.outcome {
                Ok(o) => json!({
                    "epsilon": r.epsilon,
                    "ok": true,
                    "final_kkt_max": o.final_kkt_max,
                    "slow_time": o.slow_time,
                    "steps": o.summary.steps,
                }),
                Err(e) => json!({ "epsilon": r.epsilon, "ok": false, "error": e.to_string() }),
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use dcop_core::{run, GainConfig, NetworkGraph, Objective, ProblemSpec, SimConfig};

    fn tiny(steps: usize, stride: usize) -> Trajectory {
        let p = ProblemSpec::new(vec![Objective::quadratic(1.0, -2.0, 0.0)], vec![], vec![vec![]]).unwrap();
        let g = NetworkGraph::new(1, &[]).unwrap();
        let k = GainConfig::uniform(&p, 1.0, 0.05);
        let cfg = SimConfig {
            dt: 0.01,
            t_final: steps as f64 * 0.01,
            stride,
            stop_tolerance: 0.0,
            ..SimConfig::default()
        };
        run(&p, &g, &k, &cfg, Mode::Reduced, None).unwrap()
    }

    #[test]
    fn minimal_header_and_rows() {
        let mut t = tiny(1, 1);
        t.lyapunov = None;
        let mut out = Vec::new();
        write_trajectory(&t, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x[1],kkt_max");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn decimated_row_count() {
        let t = tiny(95, 10);
        assert_eq!(t.len(), 95 / 10 + 1);
        let mut out = Vec::new();
        write_trajectory(&t, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), t.len() + 1);
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
    }
}
