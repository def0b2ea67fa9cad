//! Vector fields of the two-time-scale algorithm.
//!
//! Fast part: per equality `e`, two dynamic average consensus estimators
//! run on every agent. `(xi_h, zeta_h)` track the average constraint value
//! `h_e(x)/n`; `(xi_mu, zeta_mu)` track the average multiplier copy. Slow
//! part (scaled by `epsilon`): a primal-dual flow on `x`, the local
//! multiplier copies `mu`, and the inequality multipliers `lambda`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use thiserror::Error;

use crate::graph::{orthonormal_complement, GraphError, NetworkGraph};
use crate::linalg::{solve_partial_pivot, Matrix};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("boundary layer needs at least one equality constraint")]
    NoEqualities,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("gain {which} at position {index} must be positive and finite, got {value}")]
    NonPositiveGain {
        which: &'static str,
        index: usize,
        value: f64,
    },
    #[error("gain {which} has the wrong shape")]
    GainShape { which: &'static str },
}

/// Positions of each block inside a flat state vector.
///
/// Full layout: `x | mu | lambda | xi_h | zeta_h | xi_mu | zeta_mu`; the
/// reduced layout is the first three blocks. `n x l` blocks are agent-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLayout {
    n: usize,
    l: usize,
    lambda_offsets: Vec<usize>,
    total_lambda: usize,
}

impl StateLayout {
    pub fn new(p: &ProblemSpec) -> Self {
        let mut lambda_offsets = Vec::with_capacity(p.n());
        let mut total = 0;
        for m in p.inequality_counts() {
            lambda_offsets.push(total);
            total += m;
        }
        Self {
            n: p.n(),
            l: p.l(),
            lambda_offsets,
            total_lambda: total,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn total_lambda(&self) -> usize {
        self.total_lambda
    }

    pub fn lambda_count(&self, agent: usize) -> usize {
        let end = self
            .lambda_offsets
            .get(agent + 1)
            .copied()
            .unwrap_or(self.total_lambda);
        end - self.lambda_offsets[agent]
    }

    pub fn x(&self) -> Range<usize> {
        0..self.n
    }

    pub fn mu(&self) -> Range<usize> {
        let s = self.n;
        s..s + self.n * self.l
    }

    pub fn lambda(&self) -> Range<usize> {
        let s = self.mu().end;
        s..s + self.total_lambda
    }

    pub fn lambda_agent(&self, agent: usize) -> Range<usize> {
        let s = self.lambda().start + self.lambda_offsets[agent];
        s..s + self.lambda_count(agent)
    }

    fn estimator(&self, k: usize) -> Range<usize> {
        let s = self.lambda().end + k * self.n * self.l;
        s..s + self.n * self.l
    }

    pub fn xi_h(&self) -> Range<usize> {
        self.estimator(0)
    }

    pub fn zeta_h(&self) -> Range<usize> {
        self.estimator(1)
    }

    pub fn xi_mu(&self) -> Range<usize> {
        self.estimator(2)
    }

    pub fn zeta_mu(&self) -> Range<usize> {
        self.estimator(3)
    }

    pub fn reduced_len(&self) -> usize {
        self.lambda().end
    }

    pub fn full_len(&self) -> usize {
        self.zeta_mu().end
    }

    /// 1-based name of flat component `k`, e.g. `mu[3][1]`.
    pub fn component_name(&self, k: usize) -> String {
        let nl = |r: Range<usize>, name: &str| {
            let off = k - r.start;
            format!("{name}[{}][{}]", off / self.l + 1, off % self.l + 1)
        };
        if self.x().contains(&k) {
            format!("x[{}]", k + 1)
        } else if self.mu().contains(&k) {
            nl(self.mu(), "mu")
        } else if self.lambda().contains(&k) {
            let agent = (0..self.n)
                .rev()
                .find(|&i| self.lambda_agent(i).start <= k && self.lambda_count(i) > 0)
                .unwrap_or(0);
            format!("lambda[{}][{}]", agent + 1, k - self.lambda_agent(agent).start + 1)
        } else if self.xi_h().contains(&k) {
            nl(self.xi_h(), "xi_h")
        } else if self.zeta_h().contains(&k) {
            nl(self.zeta_h(), "zeta_h")
        } else if self.xi_mu().contains(&k) {
            nl(self.xi_mu(), "xi_mu")
        } else {
            nl(self.zeta_mu(), "zeta_mu")
        }
    }
}

fn matrix_from_block(rows: usize, cols: usize, block: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = block[r * cols + c];
        }
    }
    m
}

/// Slow variables only.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub x: Vec<f64>,
    /// `n x l`, row `i` holds agent `i`'s copies of the equality multipliers.
    pub mu: Matrix,
    pub lambda: Vec<Vec<f64>>,
}

impl ReducedState {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.x.clone();
        out.extend_from_slice(self.mu.as_slice());
        for l in &self.lambda {
            out.extend_from_slice(l);
        }
        out
    }

    pub fn from_flat(layout: &StateLayout, y: &[f64]) -> Self {
        Self {
            x: y[layout.x()].to_vec(),
            mu: matrix_from_block(layout.n, layout.l, &y[layout.mu()]),
            lambda: (0..layout.n)
                .map(|i| y[layout.lambda_agent(i)].to_vec())
                .collect(),
        }
    }

    /// Column averages of `mu`.
    pub fn mu_mean(&self) -> Vec<f64> {
        column_means(&self.mu)
    }
}

pub(crate) fn column_means(m: &Matrix) -> Vec<f64> {
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|c| (0..m.rows()).map(|r| m[(r, c)]).sum::<f64>() / n)
        .collect()
}

/// Slow variables plus the consensus estimator states.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub x: Vec<f64>,
    pub mu: Matrix,
    pub lambda: Vec<Vec<f64>>,
    pub xi_h: Matrix,
    pub zeta_h: Matrix,
    pub xi_mu: Matrix,
    pub zeta_mu: Matrix,
}

impl SystemState {
    /// Given slow variables with all estimator states at zero.
    pub fn from_reduced(r: ReducedState) -> Self {
        let (n, l) = (r.mu.rows(), r.mu.cols());
        Self {
            x: r.x,
            mu: r.mu,
            lambda: r.lambda,
            xi_h: Matrix::zeros(n, l),
            zeta_h: Matrix::zeros(n, l),
            xi_mu: Matrix::zeros(n, l),
            zeta_mu: Matrix::zeros(n, l),
        }
    }

    pub fn reduced(&self) -> ReducedState {
        ReducedState {
            x: self.x.clone(),
            mu: self.mu.clone(),
            lambda: self.lambda.clone(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.reduced().to_flat();
        for m in [&self.xi_h, &self.zeta_h, &self.xi_mu, &self.zeta_mu] {
            out.extend_from_slice(m.as_slice());
        }
        out
    }

    pub fn from_flat(layout: &StateLayout, y: &[f64]) -> Self {
        let r = ReducedState::from_flat(layout, y);
        let (n, l) = (layout.n, layout.l);
        Self {
            x: r.x,
            mu: r.mu,
            lambda: r.lambda,
            xi_h: matrix_from_block(n, l, &y[layout.xi_h()]),
            zeta_h: matrix_from_block(n, l, &y[layout.zeta_h()]),
            xi_mu: matrix_from_block(n, l, &y[layout.xi_mu()]),
            zeta_mu: matrix_from_block(n, l, &y[layout.zeta_mu()]),
        }
    }

    /// Estimators placed at the equilibrium they would reach with the slow
    /// variables frozen: `xi_h = h(x)/n`, `xi_mu = mean(mu)`, and `zeta`
    /// solving `L zeta = u - mean(u)` with zero mean.
    ///
    /// Returns `None` on a disconnected graph, where no such `zeta` exists
    /// in general.
    pub fn quasi_steady(r: ReducedState, p: &ProblemSpec, g: &NetworkGraph) -> Option<Self> {
        let n = p.n();
        let mut s = Self::from_reduced(r);
        let mu_mean = column_means(&s.mu);
        // L + 11^T/n is nonsingular exactly when the graph is connected
        let shifted = g
            .laplacian()
            .add(&Matrix::from_rows(&vec![vec![1.0 / n as f64; n]; n]));
        for (e, eq) in p.equalities().iter().enumerate() {
            let u_h: Vec<f64> = (0..n).map(|i| eq.a[i] * s.x[i] + eq.b[i]).collect();
            let u_mu: Vec<f64> = (0..n).map(|i| s.mu[(i, e)]).collect();
            let h_mean = u_h.iter().sum::<f64>() / n as f64;
            let rhs_h: Vec<f64> = u_h.iter().map(|u| u - h_mean).collect();
            let rhs_mu: Vec<f64> = u_mu.iter().map(|u| u - mu_mean[e]).collect();
            let zh = solve_partial_pivot(&shifted, &rhs_h, 1e-12)?;
            let zm = solve_partial_pivot(&shifted, &rhs_mu, 1e-12)?;
            if !g.is_connected() {
                return None;
            }
            for i in 0..n {
                s.xi_h[(i, e)] = h_mean;
                s.xi_mu[(i, e)] = mu_mean[e];
                s.zeta_h[(i, e)] = zh[i];
                s.zeta_mu[(i, e)] = zm[i];
            }
        }
        Some(s)
    }
}

/// Positive gains `k^x`, `k^mu`, `k^lambda` and the time-scale parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GainConfig {
    pub kx: Vec<f64>,
    /// `n x l`.
    pub kmu: Matrix,
    pub klambda: Vec<Vec<f64>>,
    pub epsilon: f64,
}

impl GainConfig {
    pub fn uniform(p: &ProblemSpec, k: f64, epsilon: f64) -> Self {
        Self {
            kx: vec![k; p.n()],
            kmu: Matrix::zeros(p.n(), p.l()).map(|_| k),
            klambda: p.inequality_counts().into_iter().map(|m| vec![k; m]).collect(),
            epsilon,
        }
    }

    /// Same shape, every gain multiplied by `factor`; `epsilon` untouched.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kx: self.kx.iter().map(|k| k * factor).collect(),
            kmu: self.kmu.scaled(factor),
            klambda: self
                .klambda
                .iter()
                .map(|l| l.iter().map(|k| k * factor).collect())
                .collect(),
            epsilon: self.epsilon,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn validate(&self, p: &ProblemSpec) -> Result<(), DynamicsError> {
        let check = |which: &'static str, index: usize, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(DynamicsError::NonPositiveGain {
                    which,
                    index,
                    value,
                })
            }
        };
        if self.kx.len() != p.n() {
            return Err(DynamicsError::GainShape { which: "kx" });
        }
        if self.kmu.rows() != p.n() || self.kmu.cols() != p.l() {
            return Err(DynamicsError::GainShape { which: "kmu" });
        }
        if self.klambda.iter().map(Vec::len).ne(p.inequality_counts()) {
            return Err(DynamicsError::GainShape { which: "klambda" });
        }
        for (i, &k) in self.kx.iter().enumerate() {
            check("kx", i, k)?;
        }
        for (i, &k) in self.kmu.as_slice().iter().enumerate() {
            check("kmu", i, k)?;
        }
        for (i, &k) in self.klambda.iter().flatten().enumerate() {
            check("klambda", i, k)?;
        }
        check("epsilon", 0, self.epsilon)
    }
}

/// Dynamic average consensus: `dxi = -xi - L xi - L zeta + u`,
/// `dzeta = L xi`.
pub fn consensus_rhs(xi: &[f64], zeta: &[f64], u: &[f64], g: &NetworkGraph) -> (Vec<f64>, Vec<f64>) {
    let n = g.n();
    assert!(xi.len() == n && zeta.len() == n && u.len() == n);
    let lxi = g.apply_laplacian(xi);
    let lzeta = g.apply_laplacian(zeta);
    let dxi = (0..n).map(|i| -xi[i] - lxi[i] - lzeta[i] + u[i]).collect();
    (dxi, lxi)
}

/// Everything a flat right-hand side needs.
pub(crate) struct Model<'a> {
    pub p: &'a ProblemSpec,
    pub g: &'a NetworkGraph,
    pub k: &'a GainConfig,
    pub layout: StateLayout,
}

impl<'a> Model<'a> {
    pub fn new(p: &'a ProblemSpec, g: &'a NetworkGraph, k: &'a GainConfig) -> Self {
        assert_eq!(p.n(), g.n(), "problem and graph sizes differ");
        Self {
            p,
            g,
            k,
            layout: StateLayout::new(p),
        }
    }

    #[inline]
    fn lambda_terms(&self, y: &[f64], dy: &mut [f64], i: usize, scale: f64) -> f64 {
        let range = self.layout.lambda_agent(i);
        let xi = y[i];
        let mut sum = 0.0;
        for (j, (g, k)) in self.p.inequalities()[i]
            .iter()
            .zip(&self.k.klambda[i])
            .enumerate()
        {
            let lam = y[range.start + j];
            sum += lam * g.a;
            dy[range.start + j] = scale * k * lam * g.evaluate(xi);
        }
        sum
    }

    /// Full system in `t`.
    pub fn full(&self, y: &[f64], dy: &mut [f64]) {
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let eps = self.k.epsilon;
        let (mu0, xh0, zh0, xm0, zm0) = (
            lay.mu().start,
            lay.xi_h().start,
            lay.zeta_h().start,
            lay.xi_mu().start,
            lay.zeta_mu().start,
        );
        for i in 0..n {
            let xi = y[i];
            let mut coupling = 0.0;
            for e in 0..l {
                let eq = &self.p.equalities()[e];
                let idx = i * l + e;
                let mu = &y[mu0..mu0 + n * l];
                let xh = &y[xh0..xh0 + n * l];
                let zh = &y[zh0..zh0 + n * l];
                let xm = &y[xm0..xm0 + n * l];
                let zm = &y[zm0..zm0 + n * l];

                let l_xh = self.g.laplacian_entry(i, xh, l, e);
                let l_xm = self.g.laplacian_entry(i, xm, l, e);
                dy[xh0 + idx] = -xh[idx] - l_xh - self.g.laplacian_entry(i, zh, l, e)
                    + (eq.a[i] * xi + eq.b[i]);
                dy[zh0 + idx] = l_xh;
                dy[xm0 + idx] = -xm[idx] - l_xm - self.g.laplacian_entry(i, zm, l, e) + mu[idx];
                dy[zm0 + idx] = l_xm;

                dy[mu0 + idx] =
                    eps * self.k.kmu[(i, e)] * (xh[idx] - self.g.laplacian_entry(i, mu, l, e));
                coupling += xm[idx] * eq.a[i];
            }
            let ineq = self.lambda_terms(y, dy, i, eps);
            dy[i] = -eps
                * self.k.kx[i]
                * (self.p.objectives()[i].derivative(xi) + coupling + ineq);
        }
    }

    /// Reduced model: `scale = 1` gives the `tau` derivative, `scale =
    /// epsilon` the `t` derivative.
    pub fn reduced(&self, y: &[f64], dy: &mut [f64], scale: f64) {
        let lay = &self.layout;
        let (n, l) = (lay.n, lay.l);
        let mu0 = lay.mu().start;
        let mu = &y[mu0..mu0 + n * l];
        let mut mu_mean = vec![0.0; l];
        let mut h_mean = vec![0.0; l];
        for e in 0..l {
            let eq = &self.p.equalities()[e];
            mu_mean[e] = (0..n).map(|i| mu[i * l + e]).sum::<f64>() / n as f64;
            h_mean[e] = eq.evaluate(&y[..n]) / n as f64;
        }
        for i in 0..n {
            let mut coupling = 0.0;
            for e in 0..l {
                let idx = i * l + e;
                coupling += mu_mean[e] * self.p.equalities()[e].a[i];
                dy[mu0 + idx] = scale
                    * self.k.kmu[(i, e)]
                    * (h_mean[e] - self.g.laplacian_entry(i, mu, l, e));
            }
            let ineq = self.lambda_terms(y, dy, i, scale);
            dy[i] = -scale
                * self.k.kx[i]
                * (self.p.objectives()[i].derivative(y[i]) + coupling + ineq);
        }
    }
}

/// Time derivative (in `t`) of the full coupled system.
pub fn full_rhs(
    s: &SystemState,
    p: &ProblemSpec,
    g: &NetworkGraph,
    k: &GainConfig,
) -> SystemState {
    let model = Model::new(p, g, k);
    let y = s.to_flat();
    let mut dy = vec![0.0; y.len()];
    model.full(&y, &mut dy);
    SystemState::from_flat(&model.layout, &dy)
}

/// Derivative of the reduced model in the slow time `tau = epsilon t`.
pub fn reduced_rhs(
    r: &ReducedState,
    p: &ProblemSpec,
    g: &NetworkGraph,
    k: &GainConfig,
) -> ReducedState {
    let model = Model::new(p, g, k);
    let y = r.to_flat();
    let mut dy = vec![0.0; y.len()];
    model.reduced(&y, &mut dy, 1.0);
    ReducedState::from_flat(&model.layout, &dy)
}

/// Linear part of the boundary layer in deviation coordinates, with the
/// conserved `1^T zeta` directions removed through `U1`:
///
/// ```text
/// A = [ -I_2l ⊗ (I + L)   -I_2l ⊗ (L U1) ]
///     [  I_2l ⊗ (U1^T L)   0             ]
/// ```
pub fn boundary_layer_matrix(g: &NetworkGraph, l: usize) -> Result<Matrix, DynamicsError> {
    if l == 0 {
        return Err(DynamicsError::NoEqualities);
    }
    let n = g.n();
    let u1 = orthonormal_complement(n)?;
    let lap = g.laplacian();
    let top_left = Matrix::identity(n).add(lap).scaled(-1.0).repeat_diagonal(2 * l);
    let top_right = lap.mul(&u1).scaled(-1.0).repeat_diagonal(2 * l);
    let bottom_left = u1.transpose().mul(lap).repeat_diagonal(2 * l);
    let (fast, reduced) = (2 * l * n, 2 * l * (n - 1));
    let mut a = Matrix::zeros(fast + reduced, fast + reduced);
    a.set_block(0, 0, &top_left);
    a.set_block(0, fast, &top_right);
    a.set_block(fast, 0, &bottom_left);
    Ok(a)
}
