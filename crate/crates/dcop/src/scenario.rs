//! JSON scenario files.

use std::fs;
use std::path::{Path, PathBuf};

use dcop_core::{
    EqualityConstraint, GainConfig, InequalityConstraint, InitialState, Matrix, NetworkGraph,
    Objective, ProblemSpec, SimConfig,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CASE1: &str = include_str!("../scenarios/case1.json");
pub const CASE2: &str = include_str!("../scenarios/case2.json");

/// Names accepted in place of a scenario path.
pub const BUNDLED: [(&str, &str); 2] = [("case1", CASE1), ("case2", CASE2)];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario ({assumption}): {detail}")]
    Invalid {
        assumption: &'static str,
        detail: String,
    },
}

fn invalid(assumption: &'static str, detail: impl ToString) -> ScenarioError {
    ScenarioError::Invalid {
        assumption,
        detail: detail.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveEntry {
    Quadratic {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualityEntry {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityEntry {
    pub a: f64,
    pub b: f64,
}

/// A gain given as one scalar for every slot, a flat list or a nested list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainValue {
    Scalar(f64),
    List(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

impl GainValue {
    fn nested(&self, shape: &[usize], name: &'static str) -> Result<Vec<Vec<f64>>, ScenarioError> {
        let bad = || invalid("gain shape", format!("{name} does not match the problem dimensions"));
        match self {
            GainValue::Scalar(k) => Ok(shape.iter().map(|&m| vec![*k; m]).collect()),
            GainValue::List(v) => {
                // a flat list is one value per agent, broadcast over that agent's slots
                if v.len() != shape.len() {
                    return Err(bad());
                }
                Ok(shape.iter().zip(v).map(|(&m, &k)| vec![k; m]).collect())
            }
            GainValue::Nested(rows) => {
                if rows.iter().map(Vec::len).ne(shape.iter().copied()) {
                    return Err(bad());
                }
                Ok(rows.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kx: Option<GainValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmu: Option<GainValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub klambda: Option<GainValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    /// `n x l`, or a length-`l` list copied to every agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<GainValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tolerance: Option<f64>,
}

/// On-disk layout, one-to-one with the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub objectives: Vec<ObjectiveEntry>,
    pub equality: Vec<EqualityEntry>,
    pub inequality: Vec<Vec<InequalityEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GainsEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimEntry>,
}

/// A parsed and checked run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub problem: ProblemSpec,
    pub graph: NetworkGraph,
    pub gains: GainConfig,
    pub sim: SimConfig,
    pub init: InitialState,
}

pub const DEFAULT_GAIN: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.05;

impl Scenario {
    pub fn from_file(file: &ScenarioFile) -> Result<Self, ScenarioError> {
        if file.n == 0 {
            return Err(invalid("dimensions", "n must be positive"));
        }
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|&[i, j]| (i, j)).collect();
        let graph = NetworkGraph::new(file.n, &edges).map_err(|e| invalid("graph", e))?;
        let objectives: Vec<Objective> = file
            .objectives
            .iter()
            .map(|o| match *o {
                ObjectiveEntry::Quadratic { a, b, c } => Objective::quadratic(a, b, c),
            })
            .collect();
        let equalities = file
            .equality
            .iter()
            .map(|e| EqualityConstraint::new(e.a.clone(), e.b.clone()))
            .collect();
        let inequalities = file
            .inequality
            .iter()
            .map(|row| row.iter().map(|g| InequalityConstraint::new(g.a, g.b)).collect())
            .collect();
        let problem =
            ProblemSpec::new(objectives, equalities, inequalities).map_err(|e| invalid("dimensions", e))?;
        if problem.n() != file.n {
            return Err(invalid(
                "dimensions",
                format!("n = {} but {} objectives", file.n, problem.n()),
            ));
        }
        if let Some(i) = problem.objectives().iter().position(|f| !f.is_strictly_convex()) {
            return Err(invalid(
                "strict convexity",
                format!("objective of agent {} is not strictly convex (a must be > 0)", i + 1),
            ));
        }

        let gains = build_gains(&problem, file.gains.as_ref().unwrap_or(&GainsEntry::default()))?;
        gains
            .validate(&problem)
            .map_err(|e| invalid("positive gains", e))?;

        let sim = build_sim(file.sim.as_ref().unwrap_or(&SimEntry::default()));
        sim.validate(&graph).map_err(|e| invalid("sim config", e))?;

        let init = build_init(&problem, file.init.as_ref())?;
        init.resolve(&problem)
            .map_err(|e| invalid("positive multiplier initialization", e))?;

        Ok(Self {
            problem,
            graph,
            gains,
            sim,
            init,
        })
    }

    /// Fully expanded file form; parsing it back reproduces `self`.
    pub fn to_file(&self) -> ScenarioFile {
        let p = &self.problem;
        let objectives = p
            .objectives()
            .iter()
            .map(|f| {
                let q = f.as_quadratic().expect("only quadratic objectives exist");
                ObjectiveEntry::Quadratic { a: q.a, b: q.b, c: q.c }
            })
            .collect();
        let kmu = (0..p.n()).map(|i| self.gains.kmu.row(i).to_vec()).collect();
        let init = InitEntry {
            x: self.init.x.clone(),
            mu: self
                .init
                .mu
                .as_ref()
                .map(|m| GainValue::Nested((0..m.rows()).map(|i| m.row(i).to_vec()).collect())),
            lambda: self.init.lambda.clone(),
        };
        ScenarioFile {
            n: p.n(),
            edges: self.graph.edges().iter().map(|&(i, j)| [i, j]).collect(),
            objectives,
            equality: p
                .equalities()
                .iter()
                .map(|e| EqualityEntry { a: e.a.clone(), b: e.b.clone() })
                .collect(),
            inequality: p
                .inequalities()
                .iter()
                .map(|row| row.iter().map(|g| InequalityEntry { a: g.a, b: g.b }).collect())
                .collect(),
            gains: Some(GainsEntry {
                kx: Some(GainValue::List(self.gains.kx.clone())),
                kmu: Some(GainValue::Nested(kmu)),
                klambda: Some(GainValue::Nested(self.gains.klambda.clone())),
                epsilon: Some(self.gains.epsilon),
            }),
            init: (init != InitEntry::default()).then_some(init),
            sim: Some(SimEntry {
                dt: Some(self.sim.dt),
                t_final: Some(self.sim.t_final),
                stride: Some(self.sim.stride),
                lambda_floor: Some(self.sim.lambda_floor),
                stop_tolerance: Some(self.sim.stop_tolerance),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    /// Re-checks the sim config after command-line overrides.
    pub fn revalidate_sim(&self) -> Result<(), ScenarioError> {
        self.sim.validate(&self.graph).map_err(|e| invalid("sim config", e))
    }
}

fn build_gains(p: &ProblemSpec, g: &GainsEntry) -> Result<GainConfig, ScenarioError> {
    let agents = vec![1; p.n()];
    let kx = match &g.kx {
        None => vec![DEFAULT_GAIN; p.n()],
        Some(v) => v.nested(&agents, "kx")?.into_iter().flatten().collect(),
    };
    let kmu_rows = match &g.kmu {
        None => vec![vec![DEFAULT_GAIN; p.l()]; p.n()],
        Some(v) => v.nested(&vec![p.l(); p.n()], "kmu")?,
    };
    let klambda = match &g.klambda {
        None => p.inequality_counts().into_iter().map(|m| vec![DEFAULT_GAIN; m]).collect(),
        Some(v) => v.nested(&p.inequality_counts(), "klambda")?,
    };
    Ok(GainConfig {
        kx,
        kmu: matrix(&kmu_rows, p.l()),
        klambda,
        epsilon: g.epsilon.unwrap_or(DEFAULT_EPSILON),
    })
}

fn matrix(rows: &[Vec<f64>], cols: usize) -> Matrix {
    if rows.is_empty() || cols == 0 {
        Matrix::zeros(rows.len(), cols)
    } else {
        Matrix::from_rows(rows)
    }
}

fn build_sim(s: &SimEntry) -> SimConfig {
    let d = SimConfig::default();
    SimConfig {
        dt: s.dt.unwrap_or(d.dt),
        t_final: s.t_final.unwrap_or(d.t_final),
        stride: s.stride.unwrap_or(d.stride),
        lambda_floor: s.lambda_floor.unwrap_or(d.lambda_floor),
        stop_tolerance: s.stop_tolerance.unwrap_or(d.stop_tolerance),
    }
}

fn build_init(p: &ProblemSpec, init: Option<&InitEntry>) -> Result<InitialState, ScenarioError> {
    let Some(init) = init else {
        return Ok(InitialState::default());
    };
    let mu = match &init.mu {
        None => None,
        Some(GainValue::List(v)) if v.len() == p.l() => Some(matrix(&vec![v.clone(); p.n()], p.l())),
        Some(GainValue::Nested(rows)) if rows.len() == p.n() && rows.iter().all(|r| r.len() == p.l()) => {
            Some(matrix(rows, p.l()))
        }
        Some(_) => return Err(invalid("dimensions", format!("init.mu must be {} x {}", p.n(), p.l()))),
    };
    Ok(InitialState {
        x: init.x.clone(),
        mu,
        lambda: init.lambda.clone(),
    })
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    Scenario::from_file(&file)
}

/// Loads a scenario from a path, or one of the bundled names in [`BUNDLED`].
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    if let Some((_, text)) = BUNDLED.iter().find(|(name, _)| Path::new(name) == path) {
        if !path.exists() {
            return parse_scenario_str(text);
        }
    }
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text)
}
