use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dcop::output::{kkt_json, saddle_json, summary_json, sweep_json, validation_json, write_trajectory_file};
use dcop::scenario::{parse_scenario, Scenario, ScenarioError};
use dcop::state::load_point;
use dcop_core::{
    boundary_layer_matrix, kkt_residual, solve_centralized, sweep_epsilon, validate_assumptions,
    AnalysisError, Mode, SimError,
};
use serde_json::{json, Value};

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

/// Hurwitz margin used when reporting the boundary-layer spectrum.
const HURWITZ_MARGIN: f64 = -1e-6;

#[derive(Parser)]
#[command(name = "dcop", version, about = "Distributed constrained optimization simulator")]
struct Cli {
    /// Print reports as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Reduced,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions.
    Validate { scenario: PathBuf },
    /// Centralized saddle point.
    Oracle { scenario: PathBuf },
    /// Simulate and optionally write the trajectory CSV.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run even if an assumption check fails.
        #[arg(long)]
        unchecked: bool,
    },
    /// KKT residual of a point given as JSON or as a trajectory CSV (last row).
    Kkt {
        scenario: PathBuf,
        #[arg(long)]
        state: PathBuf,
    },
    /// Spectrum of the boundary-layer matrix.
    Hurwitz { scenario: PathBuf },
    /// Full-mode runs to a common slow time for several epsilons.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 40.0)]
        tau_final: f64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Invalid { .. } => EXIT_VALIDATION,
            ScenarioError::Io { .. } | ScenarioError::Parse(_) => EXIT_IO,
        };
        Self::new(code, e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let code = match e {
            SimError::Divergence { .. } | SimError::StepFailure { .. } => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        };
        Self::new(code, e)
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        let code = match e {
            AnalysisError::Infeasible | AnalysisError::NotStrictlyConvex(_) => EXIT_VALIDATION,
            _ => EXIT_NUMERICAL,
        };
        Self::new(code, e)
    }
}

/// A report plus the process outcome it implies.
struct Report {
    value: Value,
    text: String,
    code: u8,
}

fn ok(value: Value, text: String) -> Result<Report, Failure> {
    Ok(Report { value, text, code: 0 })
}

fn fmt_vec(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", items.join(", "))
}

fn validate(s: &Scenario) -> Result<Report, Failure> {
    let r = validate_assumptions(&s.problem, &s.graph).map_err(|e| Failure::new(EXIT_VALIDATION, e))?;
    let mut text = String::new();
    for (name, c) in r.checks() {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        text += &format!("{mark} {name}: {}\n", c.detail);
    }
    let code = if r.all_passed() { 0 } else { EXIT_VALIDATION };
    Ok(Report {
        value: validation_json(&r),
        text,
        code,
    })
}

fn oracle(s: &Scenario) -> Result<Report, Failure> {
    let sp = solve_centralized(&s.problem)?;
    let kkt = kkt_residual(&s.problem, &sp.x_star, &sp.mu_star, &sp.lambda_star);
    let mut text = format!("x*      {}\nmu*     {}\n", fmt_vec(&sp.x_star), fmt_vec(&sp.mu_star));
    for (i, lam) in sp.lambda_star.iter().enumerate().filter(|(_, l)| !l.is_empty()) {
        text += &format!("lambda*[{}] {}\n", i + 1, fmt_vec(lam));
    }
    let active: Vec<String> = sp
        .active_set
        .iter()
        .map(|c| format!("({},{})", c.agent + 1, c.index + 1))
        .collect();
    text += &format!("active  {}\n", active.join(" "));
    if sp.degenerate {
        text += "warning: degenerate active set\n";
    }
    text += &format!("kkt     {:.3e}\n", kkt.max_residual);
    let mut value = saddle_json(&sp);
    value["kkt"] = kkt_json(&kkt);
    ok(value, text)
}

#[allow(clippy::too_many_arguments)]
fn run(
    mut s: Scenario,
    mode: ModeArg,
    epsilon: Option<f64>,
    dt: Option<f64>,
    t_final: Option<f64>,
    stride: Option<usize>,
    out: Option<PathBuf>,
    unchecked: bool,
) -> Result<Report, Failure> {
    if let Some(e) = epsilon {
        s.gains.epsilon = e;
    }
    if let Some(dt) = dt {
        s.sim.dt = dt;
    }
    if let Some(t) = t_final {
        s.sim.t_final = t;
    }
    if let Some(k) = stride {
        s.sim.stride = k;
    }
    s.revalidate_sim()?;
    let mode = match mode {
        ModeArg::Full => Mode::Full,
        ModeArg::Reduced => Mode::Reduced,
    };
    let (traj, elapsed) = dcop::run_scenario(&s, mode, !unchecked)?;
    if let Some(path) = &out {
        write_trajectory_file(&traj, path)
            .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))?;
    }
    let sum = &traj.summary;
    let fin = traj.final_reduced();
    let mut text = format!(
        "t = {} ({} steps{}), {:.2}s\nx   {}\nkkt {:.3e}\n",
        sum.final_time,
        sum.steps,
        if sum.stopped_early { ", stopped early" } else { "" },
        elapsed.as_secs_f64(),
        fmt_vec(&fin.x),
        sum.final_kkt.max_residual
    );
    if let Some(v) = sum.final_lyapunov {
        text += &format!("V   {v:.3e}\n");
    }
    if sum.floor_triggers > 0 {
        text += &format!("warning: lambda floor triggered in {} steps\n", sum.floor_triggers);
    }
    let mut value = summary_json(sum, elapsed);
    value["x"] = json!(fin.x);
    value["mu_mean"] = json!(fin.mu_mean());
    value["lambda"] = json!(fin.lambda);
    ok(value, text)
}

fn kkt(s: &Scenario, state: &std::path::Path) -> Result<Report, Failure> {
    let pt = load_point(state, &s.problem)?;
    let r = kkt_residual(&s.problem, &pt.x, &pt.mu, &pt.lambda);
    let text = format!(
        "stationarity  {:.3e}\nequality      {:.3e}\ndual          {:.3e}\ninequality    {:.3e}\ncomplementary {:.3e}\nmax           {:.3e}\n",
        r.stationarity.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        r.primal_equality.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        r.dual_nonneg_violation,
        r.primal_inequality_violation,
        r.complementarity,
        r.max_residual
    );
    ok(kkt_json(&r), text)
}

fn hurwitz(s: &Scenario) -> Result<Report, Failure> {
    let a = boundary_layer_matrix(&s.graph, s.problem.l()).map_err(|e| Failure::new(EXIT_VALIDATION, e))?;
    let abscissa = a
        .spectral_abscissa()
        .ok_or_else(|| Failure::new(EXIT_NUMERICAL, "eigenvalue iteration did not converge"))?;
    let hurwitz = abscissa < HURWITZ_MARGIN;
    let text = format!(
        "dimension {}\nmax real part {abscissa:.6e}\n{}\n",
        a.rows(),
        if hurwitz { "Hurwitz" } else { "NOT Hurwitz" }
    );
    Ok(Report {
        value: json!({ "dimension": a.rows(), "spectral_abscissa": abscissa, "hurwitz": hurwitz }),
        text,
        code: if hurwitz { 0 } else { EXIT_VALIDATION },
    })
}

fn sweep(s: &Scenario, epsilons: &[f64], tau_final: f64) -> Result<Report, Failure> {
    let rows = sweep_epsilon(&s.problem, &s.graph, &s.gains, &s.sim, epsilons, tau_final, Some(&s.init))?;
    let mut text = String::from("epsilon      kkt_max      slow_time\n");
    let mut failed = false;
    for r in &rows {
        match &r.outcome {
            Ok(o) => text += &format!("{:<12} {:<12.4e} {}\n", r.epsilon, o.final_kkt_max, o.slow_time),
            Err(e) => {
                failed = true;
                text += &format!("{:<12} failed: {e}\n", r.epsilon);
            }
        }
    }
    Ok(Report {
        value: sweep_json(&rows),
        text,
        code: if failed { EXIT_NUMERICAL } else { 0 },
    })
}

fn dispatch(cmd: Command) -> Result<Report, Failure> {
    match cmd {
        Command::Validate { scenario } => validate(&parse_scenario(scenario)?),
        Command::Oracle { scenario } => oracle(&parse_scenario(scenario)?),
        Command::Run {
            scenario,
            mode,
            epsilon,
            dt,
            t_final,
            stride,
            out,
            unchecked,
        } => run(parse_scenario(scenario)?, mode, epsilon, dt, t_final, stride, out, unchecked),
        Command::Kkt { scenario, state } => kkt(&parse_scenario(scenario)?, &state),
        Command::Hurwitz { scenario } => hurwitz(&parse_scenario(scenario)?),
        Command::Sweep {
            scenario,
            epsilons,
            tau_final,
        } => sweep(&parse_scenario(scenario)?, &epsilons, tau_final),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(r) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&r.value).expect("report serializes"));
            } else {
                print!("{}", r.text);
            }
            ExitCode::from(r.code)
        }
        Err(f) => {
            if cli.json {
                println!("{}", json!({ "error": f.message, "exit_code": f.code }));
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
