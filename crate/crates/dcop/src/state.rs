//! Reading a point `(x, mu, lambda)` back in for KKT checks.
//!
//! Accepts either a JSON object `{"x": [...], "mu": [...], "lambda": [[...]]}`
//! (`mu` of length `l`, or `n x l` which is averaged over agents) or a
//! trajectory CSV, in which case the last row is used.

use std::fs;
use std::path::Path;

use dcop_core::ProblemSpec;
use serde::Deserialize;

use crate::scenario::{GainValue, ScenarioError};

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFile {
    x: Vec<f64>,
    #[serde(default)]
    mu: Option<GainValue>,
    #[serde(default)]
    lambda: Option<Vec<Vec<f64>>>,
}

fn shape_error(detail: String) -> ScenarioError {
    ScenarioError::Invalid {
        assumption: "dimensions",
        detail,
    }
}

fn column_means(rows: &[Vec<f64>], l: usize) -> Vec<f64> {
    (0..l)
        .map(|e| rows.iter().map(|r| r[e]).sum::<f64>() / rows.len() as f64)
        .collect()
}

fn from_json(text: &str, p: &ProblemSpec) -> Result<Point, ScenarioError> {
    let f: PointFile = serde_json::from_str(text)?;
    let (n, l) = (p.n(), p.l());
    let mu = match f.mu {
        None if l == 0 => Vec::new(),
        Some(GainValue::List(v)) if v.len() == l => v,
        Some(GainValue::Scalar(v)) if l == 1 => vec![v],
        Some(GainValue::Nested(rows)) if rows.len() == n && rows.iter().all(|r| r.len() == l) => {
            column_means(&rows, l)
        }
        _ => return Err(shape_error(format!("mu must have {l} entries or be {n} x {l}"))),
    };
    let lambda = match f.lambda {
        Some(lam) => lam,
        None => vec![Vec::new(); n],
    };
    if f.x.len() != n || lambda.iter().map(Vec::len).ne(p.inequality_counts()) {
        return Err(shape_error("x or lambda does not match the scenario".into()));
    }
    Ok(Point { x: f.x, mu, lambda })
}

fn from_csv(text: &str, p: &ProblemSpec) -> Result<Point, ScenarioError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let last = lines
        .next_back()
        .ok_or_else(|| shape_error("trajectory has no data rows".into()))?;
    let values = last
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| shape_error(format!("bad number in last row: {e}")))?;
    if values.len() != header.len() {
        return Err(shape_error("last row width differs from the header".into()));
    }
    let get = |name: String| {
        header
            .iter()
            .position(|h| *h == name)
            .map(|k| values[k])
            .ok_or_else(|| shape_error(format!("column {name} missing")))
    };
    let (n, l) = (p.n(), p.l());
    let x = (1..=n).map(|i| get(format!("x[{i}]"))).collect::<Result<Vec<_>, _>>()?;
    let mut mu_rows = Vec::with_capacity(n);
    for i in 1..=n {
        mu_rows.push((1..=l).map(|e| get(format!("mu[{i}][{e}]"))).collect::<Result<Vec<_>, _>>()?);
    }
    let lambda = p
        .inequality_counts()
        .iter()
        .enumerate()
        .map(|(i, &m)| (1..=m).map(|j| get(format!("lambda[{}][{j}]", i + 1))).collect())
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    Ok(Point {
        x,
        mu: column_means(&mu_rows, l),
        lambda,
    })
}

pub fn load_point(path: &Path, p: &ProblemSpec) -> Result<Point, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if text.trim_start().starts_with('{') {
        from_json(&text, p)
    } else {
        from_csv(&text, p)
    }
}
