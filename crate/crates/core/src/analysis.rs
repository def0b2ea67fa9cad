//! Ground truth and certificates: the centralized active-set oracle, KKT
//! residuals, the Lagrangian, and the reduced-model Lyapunov function.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dynamics::{GainConfig, ReducedState};
use crate::linalg::{max_abs_slice, solve_partial_pivot, Matrix};
use crate::problem::{evaluate_constraints, ConstraintId, ProblemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("no active set yields a consistent KKT system: problem is infeasible")]
    Infeasible,
    #[error("active-set enumeration limited to {limit} inequalities, problem has {found}")]
    TooManyInequalities { limit: usize, found: usize },
    #[error("objective of agent {0} is not strictly convex")]
    NotStrictlyConvex(usize),
    #[error("multiplier of inequality {index} at agent {agent} is outside the Lyapunov domain")]
    LyapunovDomain { agent: usize, index: usize },
    #[error("{what}: expected {expected} entries, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
}

/// Largest inequality count the oracle will enumerate.
pub const MAX_ENUMERATED_INEQUALITIES: usize = 20;
/// Relative pivot threshold of the per-subset KKT solve.
pub const KKT_PIVOT_TOL: f64 = 1e-12;
/// Sign tolerance when accepting a candidate active set.
pub const ACCEPT_TOL: f64 = 1e-10;
/// Multipliers (or slacks) at or below this are treated as zero.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// `min sum_k (q_k/2 z_k^2 + c_k z_k)` subject to `E z + e = 0` and
/// `G z + g <= 0`, with every `q_k > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalQp {
    pub hessian: Vec<f64>,
    pub linear: Vec<f64>,
    /// `(row, offset)` pairs meaning `row . z + offset = 0`.
    pub equalities: Vec<(Vec<f64>, f64)>,
    /// `(row, offset)` pairs meaning `row . z + offset <= 0`.
    pub inequalities: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    pub equality_multipliers: Vec<f64>,
    /// One entry per inequality, zero when inactive.
    pub inequality_multipliers: Vec<f64>,
    /// Indices of the accepted working set.
    pub working_set: Vec<usize>,
    /// A multiplier in the working set is ~0 or an excluded constraint is
    /// tight: more than one working set certifies the optimum.
    pub degenerate: bool,
}

/// Lexicographic k-subsets of `0..m`.
struct Combinations {
    m: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(m: usize, k: usize) -> Self {
        Self {
            m,
            current: (0..k).collect(),
            done: k > m,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.m - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Solves the KKT system of one working set; `None` if singular.
fn solve_working_set(qp: &DiagonalQp, set: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let dim = qp.hessian.len();
    let rows: Vec<&(Vec<f64>, f64)> = qp
        .equalities
        .iter()
        .chain(set.iter().map(|&k| &qp.inequalities[k]))
        .collect();
    let size = dim + rows.len();
    let mut m = Matrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    for k in 0..dim {
        m[(k, k)] = qp.hessian[k];
        rhs[k] = -qp.linear[k];
    }
    for (r, (row, offset)) in rows.iter().enumerate() {
        for k in 0..dim {
            m[(dim + r, k)] = row[k];
            m[(k, dim + r)] = row[k];
        }
        rhs[dim + r] = -offset;
    }
    let sol = solve_partial_pivot(&m, &rhs, KKT_PIVOT_TOL)?;
    let (z, multipliers) = sol.split_at(dim);
    Some((z.to_vec(), multipliers.to_vec()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Enumerates working sets by increasing size, lexicographic within a size,
/// and returns the first whose KKT solution has nonnegative inequality
/// multipliers and satisfies every excluded inequality.
pub fn solve_qp(qp: &DiagonalQp) -> Result<QpSolution, AnalysisError> {
    let m = qp.inequalities.len();
    if m > MAX_ENUMERATED_INEQUALITIES {
        return Err(AnalysisError::TooManyInequalities {
            limit: MAX_ENUMERATED_INEQUALITIES,
            found: m,
        });
    }
    let l = qp.equalities.len();
    for size in 0..=m {
        for set in Combinations::new(m, size) {
            let Some((z, multipliers)) = solve_working_set(qp, &set) else {
                continue;
            };
            let active = &multipliers[l..];
            if active.iter().any(|&v| v < -ACCEPT_TOL) {
                continue;
            }
            let slack_ok = (0..m)
                .filter(|k| !set.contains(k))
                .all(|k| dot(&qp.inequalities[k].0, &z) + qp.inequalities[k].1 <= ACCEPT_TOL);
            if !slack_ok {
                continue;
            }

            let mut inequality_multipliers = vec![0.0; m];
            for (&k, &v) in set.iter().zip(active) {
                inequality_multipliers[k] = v.max(0.0);
            }
            let weak_multiplier = active.iter().any(|&v| v <= DEGENERACY_TOL);
            let tight_excluded = (0..m).filter(|k| !set.contains(k)).any(|k| {
                (dot(&qp.inequalities[k].0, &z) + qp.inequalities[k].1).abs() <= DEGENERACY_TOL
            });
            return Ok(QpSolution {
                z,
                equality_multipliers: multipliers[..l].to_vec(),
                inequality_multipliers,
                working_set: set,
                degenerate: weak_multiplier || tight_excluded,
            });
        }
    }
    Err(AnalysisError::Infeasible)
}

/// Optimal primal-dual triple of the network problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub x_star: Vec<f64>,
    pub mu_star: Vec<f64>,
    pub lambda_star: Vec<Vec<f64>>,
    /// Inequalities with a positive multiplier or a tight value at `x_star`.
    pub active_set: Vec<ConstraintId>,
    /// More than one working set certifies this point; the multipliers of
    /// weakly active constraints are not pinned down.
    pub degenerate: bool,
}

impl SaddlePoint {
    pub fn lambda(&self, id: ConstraintId) -> f64 {
        self.lambda_star[id.agent][id.index]
    }

    /// Constraints with `lambda* > DEGENERACY_TOL` (the log-barrier terms of
    /// the Lyapunov function).
    pub fn strictly_active(&self) -> impl Iterator<Item = ConstraintId> + '_ {
        self.lambda_star.iter().enumerate().flat_map(|(agent, list)| {
            list.iter()
                .enumerate()
                .filter(|(_, &v)| v > DEGENERACY_TOL)
                .map(move |(index, _)| ConstraintId { agent, index })
        })
    }
}

/// Centralized oracle for quadratic objectives.
pub fn solve_centralized(p: &ProblemSpec) -> Result<SaddlePoint, AnalysisError> {
    let n = p.n();
    let mut hessian = Vec::with_capacity(n);
    let mut linear = Vec::with_capacity(n);
    for (i, f) in p.objectives().iter().enumerate() {
        let q = f.as_quadratic().ok_or(AnalysisError::NotStrictlyConvex(i + 1))?;
        if !(q.a > 0.0) {
            return Err(AnalysisError::NotStrictlyConvex(i + 1));
        }
        hessian.push(2.0 * q.a);
        linear.push(q.b);
    }
    let ids = p.inequality_ids();
    let qp = DiagonalQp {
        hessian,
        linear,
        equalities: p
            .equalities()
            .iter()
            .map(|eq| (eq.a.clone(), eq.offset()))
            .collect(),
        inequalities: ids
            .iter()
            .map(|&id| {
                let g = p.inequality(id);
                let mut row = vec![0.0; n];
                row[id.agent] = g.a;
                (row, g.b)
            })
            .collect(),
    };
    let sol = solve_qp(&qp)?;

    let mut lambda_star: Vec<Vec<f64>> = p
        .inequalities()
        .iter()
        .map(|list| vec![0.0; list.len()])
        .collect();
    let mut active_set = Vec::new();
    for (k, id) in ids.iter().enumerate() {
        let lam = sol.inequality_multipliers[k];
        lambda_star[id.agent][id.index] = lam;
        let g = p.inequality(*id).evaluate(sol.z[id.agent]);
        if lam > DEGENERACY_TOL || g.abs() <= DEGENERACY_TOL {
            active_set.push(*id);
        }
    }
    Ok(SaddlePoint {
        x_star: sol.z,
        mu_star: sol.equality_multipliers,
        lambda_star,
        active_set,
        degenerate: sol.degenerate,
    })
}

/// Residual breakdown of the first-order optimality conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `f_i'(x_i) + sum_e mu_e a_ie + sum_j lambda_ij a_ij`, per agent.
    pub stationarity: Vec<f64>,
    /// `h_e(x)`, per equality.
    pub primal_equality: Vec<f64>,
    /// `max(0, -min lambda)`.
    pub dual_nonneg_violation: f64,
    /// `max(0, max g)`.
    pub primal_inequality_violation: f64,
    /// `max |lambda g|`.
    pub complementarity: f64,
    pub max_residual: f64,
}

pub fn kkt_residual(
    p: &ProblemSpec,
    x: &[f64],
    mu: &[f64],
    lambda: &[Vec<f64>],
) -> KktReport {
    assert_eq!(x.len(), p.n());
    assert_eq!(mu.len(), p.l());
    assert_eq!(lambda.len(), p.n());
    let values = evaluate_constraints(p, x);

    let stationarity: Vec<f64> = (0..p.n())
        .map(|i| {
            let eq: f64 = p
                .equalities()
                .iter()
                .zip(mu)
                .map(|(c, m)| m * c.a[i])
                .sum();
            let ineq: f64 = p.inequalities()[i]
                .iter()
                .zip(&lambda[i])
                .map(|(g, lam)| lam * g.a)
                .sum();
            p.objectives()[i].derivative(x[i]) + eq + ineq
        })
        .collect();

    let dual_nonneg_violation = lambda.iter().flatten().fold(0.0, |m, &v| f64::max(m, -v));
    let primal_inequality_violation = values.max_inequality_violation();
    let complementarity = values
        .g
        .iter()
        .zip(lambda)
        .flat_map(|(g, lam)| g.iter().zip(lam).map(|(g, l)| (g * l).abs()))
        .fold(0.0, f64::max);

    let max_residual = max_abs_slice(&stationarity)
        .max(max_abs_slice(&values.h))
        .max(dual_nonneg_violation)
        .max(primal_inequality_violation)
        .max(complementarity);

    KktReport {
        stationarity,
        primal_equality: values.h,
        dual_nonneg_violation,
        primal_inequality_violation,
        complementarity,
        max_residual,
    }
}

pub fn lagrangian_value(p: &ProblemSpec, x: &[f64], mu: &[f64], lambda: &[Vec<f64>]) -> f64 {
    let values = evaluate_constraints(p, x);
    let cost = p.total_cost(x);
    let eq: f64 = mu.iter().zip(&values.h).map(|(m, h)| m * h).sum();
    let ineq: f64 = lambda
        .iter()
        .zip(&values.g)
        .flat_map(|(lam, g)| lam.iter().zip(g).map(|(l, g)| l * g))
        .sum();
    cost + eq + ineq
}

/// Lyapunov function of the reduced model, centred on `saddle`.
///
/// Quadratic in the `x` and `mu` deviations; linear in `lambda` for
/// constraints with `lambda* = 0`; `(l - l*) - l* ln(l / l*)` otherwise.
pub fn lyapunov_value(
    r: &ReducedState,
    saddle: &SaddlePoint,
    gains: &GainConfig,
) -> Result<f64, AnalysisError> {
    let n = r.x.len();
    if saddle.x_star.len() != n {
        return Err(AnalysisError::DimensionMismatch {
            what: "saddle x",
            expected: n,
            found: saddle.x_star.len(),
        });
    }
    let l = saddle.mu_star.len();
    let mut v = 0.0;
    for i in 0..n {
        let dx = r.x[i] - saddle.x_star[i];
        v += dx * dx / (2.0 * gains.kx[i]);
        for e in 0..l {
            let dm = r.mu[(i, e)] - saddle.mu_star[e];
            v += dm * dm / (2.0 * gains.kmu[(i, e)]);
        }
        for (j, &lam) in r.lambda[i].iter().enumerate() {
            let star = saddle.lambda_star[i][j];
            let k = gains.klambda[i][j];
            if star > DEGENERACY_TOL {
                if !(lam > 0.0) {
                    return Err(AnalysisError::LyapunovDomain { agent: i, index: j });
                }
                v += ((lam - star) - star * libm::log(lam / star)) / k;
            } else {
                if !(lam >= 0.0) {
                    return Err(AnalysisError::LyapunovDomain { agent: i, index: j });
                }
                v += lam / k;
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::fixtures::{self, case1, case2, random_instance};
    use crate::problem::{EqualityConstraint, InequalityConstraint, Objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    /// Closed form for quadratic costs under one shared balance per cluster:
    /// `x_i = -(b_i + mu) / (2 a_i)` with `mu` fixed by the balance.
    fn cluster_balance_oracle(members: &[usize]) -> (Vec<f64>, f64) {
        let (a, b, d) = (fixtures::COSTS_A, fixtures::COSTS_B, fixtures::DEMAND);
        let demand: f64 = members.iter().map(|&i| d[i]).sum();
        let inv: f64 = members.iter().map(|&i| 1.0 / (2.0 * a[i])).sum();
        let base: f64 = members.iter().map(|&i| -b[i] / (2.0 * a[i])).sum();
        let mu = (base - demand) / inv;
        (members.iter().map(|&i| -(b[i] + mu) / (2.0 * a[i])).collect(), mu)
    }

    /// Bisection on the balance multiplier with responses clipped to boxes.
    fn water_filling_oracle() -> (Vec<f64>, f64) {
        let (a, b, d) = (fixtures::COSTS_A, fixtures::COSTS_B, fixtures::DEMAND);
        let (lo, hi) = (fixtures::LOWER, fixtures::UPPER);
        let demand: f64 = d.iter().sum();
        let response = |mu: f64| -> Vec<f64> {
            (0..8)
                .map(|i| (-(b[i] + mu) / (2.0 * a[i])).clamp(lo[i], hi[i]))
                .collect()
        };
        let (mut left, mut right) = (-100.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (left + right);
            if response(mid).iter().sum::<f64>() > demand {
                left = mid;
            } else {
                right = mid;
            }
        }
        let mu = 0.5 * (left + right);
        (response(mu), mu)
    }

    #[test]
    fn case1_matches_closed_form() {
        let sp = solve_centralized(&case1()).unwrap();
        let (x1, mu1) = cluster_balance_oracle(&[0, 1, 2]);
        let (x2, mu2) = cluster_balance_oracle(&[3, 4, 5, 6, 7]);
        let expected: Vec<f64> = x1.into_iter().chain(x2).collect();
        for (got, want) in sp.x_star.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((sp.mu_star[0] - mu1).abs() < 1e-12);
        assert!((sp.mu_star[1] - mu2).abs() < 1e-12);
        // frozen values from the closed form
        assert!((mu1 - 6.52).abs() < 1e-12);
        assert!((mu2 - 3.088888888888889).abs() < 1e-12);
        let frozen = [-0.76, 0.58, 1.74, 0.9555555555555556, -0.5444444444444444, 0.4777777777777778, 0.9555555555555556, 0.9555555555555556];
        for (got, want) in sp.x_star.iter().zip(frozen) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(!sp.degenerate);
    }

    #[test]
    fn case2_matches_water_filling() {
        let sp = solve_centralized(&case2()).unwrap();
        let (x, mu) = water_filling_oracle();
        for (got, want) in sp.x_star.iter().zip(&x) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!((sp.mu_star[0] - mu).abs() < 1e-9);
        assert!((mu - 3.994285714285714).abs() < 1e-9);
        let active: Vec<(usize, usize)> = sp.active_set.iter().map(|c| (c.agent, c.index)).collect();
        assert_eq!(active, vec![(0, 0), (1, 1), (2, 1), (4, 0)]);
        assert!(!sp.degenerate);
        let report = kkt_residual(&case2(), &sp.x_star, &sp.mu_star, &sp.lambda_star);
        assert!(report.max_residual < 1e-9);
    }

    #[test]
    fn symmetric_two_agent_balance() {
        let p = ProblemSpec::new(
            vec![Objective::quadratic(1.0, 0.0, 0.0); 2],
            vec![EqualityConstraint::new(vec![1.0, 1.0], vec![-1.0, -1.0])],
            vec![vec![], vec![]],
        )
        .unwrap();
        let sp = solve_centralized(&p).unwrap();
        assert!((sp.x_star[0] - 1.0).abs() < 1e-14 && (sp.x_star[1] - 1.0).abs() < 1e-14);
        assert!((sp.mu_star[0] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        let p = ProblemSpec::new(
            vec![Objective::quadratic(1.0, 0.0, 0.0)],
            vec![EqualityConstraint::new(vec![1.0], vec![-2.0])],
            vec![vec![InequalityConstraint::upper_bound(1.0)]],
        )
        .unwrap();
        assert_eq!(solve_centralized(&p), Err(AnalysisError::Infeasible));
    }

    #[test]
    fn weakly_active_bound_is_flagged_degenerate() {
        // unconstrained optimum sits exactly on the bound
        let p = ProblemSpec::new(
            vec![Objective::quadratic(1.0, -2.0, 0.0)],
            vec![],
            vec![vec![InequalityConstraint::upper_bound(1.0)]],
        )
        .unwrap();
        let sp = solve_centralized(&p).unwrap();
        assert!(sp.degenerate);
        assert_eq!(sp.active_set, vec![ConstraintId { agent: 0, index: 0 }]);
    }

    #[test]
    fn kkt_multiplier_shift_shows_in_stationarity() {
        let p = case2();
        let sp = solve_centralized(&p).unwrap();
        let base = kkt_residual(&p, &sp.x_star, &sp.mu_star, &sp.lambda_star);
        let shifted = kkt_residual(&p, &sp.x_star, &[sp.mu_star[0] + 1.0], &sp.lambda_star);
        for (s, b) in shifted.stationarity.iter().zip(&base.stationarity) {
            assert!((s - b - 1.0).abs() < 1e-12);
        }
        assert_eq!(shifted.primal_equality, base.primal_equality);
        assert_eq!(shifted.complementarity, base.complementarity);
    }

    #[test]
    fn negative_multiplier_is_reported() {
        let p = case2();
        let mut lambda = vec![vec![0.0, 0.0]; 8];
        lambda[3][1] = -0.5;
        let r = kkt_residual(&p, &[0.5; 8], &[0.0], &lambda);
        assert_eq!(r.dual_nonneg_violation, 0.5);
    }

    #[test]
    fn lagrangian_examples() {
        let single = ProblemSpec::new(
            vec![Objective::quadratic(1.0, 0.0, 0.0)],
            vec![],
            vec![vec![InequalityConstraint::new(1.0, -1.0)]],
        )
        .unwrap();
        assert_eq!(lagrangian_value(&single, &[0.0], &[], &[vec![0.0]]), 0.0);
        let sp = solve_centralized(&single).unwrap();
        assert_eq!(sp.x_star, vec![0.0]);
        assert_eq!(sp.lambda_star, vec![vec![0.0]]);

        assert_eq!(lagrangian_value(&case1(), &[0.0; 8], &[0.0, 0.0], &vec![vec![]; 8]), 0.0);

        let p = case2();
        let sp = solve_centralized(&p).unwrap();
        let at_saddle = lagrangian_value(&p, &sp.x_star, &sp.mu_star, &sp.lambda_star);
        assert!((at_saddle - p.total_cost(&sp.x_star)).abs() < 1e-12);
    }

    /// Random quadratic instance with boxes around a common balance.
    #[test]
    fn saddle_inequality_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_instance(&mut rng);
            let sp = solve_centralized(&p).unwrap();
            let report = kkt_residual(&p, &sp.x_star, &sp.mu_star, &sp.lambda_star);
            assert!(report.max_residual < 1e-9, "{report:?}");
            let centre = lagrangian_value(&p, &sp.x_star, &sp.mu_star, &sp.lambda_star);
            for _ in 0..100 {
                let mu: Vec<f64> = sp.mu_star.iter().map(|m| m + rng.gen_range(-2.0..2.0)).collect();
                let lambda: Vec<Vec<f64>> = sp
                    .lambda_star
                    .iter()
                    .map(|l| l.iter().map(|v| (v + rng.gen_range(-2.0..2.0)).max(0.0)).collect())
                    .collect();
                let x: Vec<f64> = sp.x_star.iter().map(|x| x + rng.gen_range(-2.0..2.0)).collect();
                assert!(lagrangian_value(&p, &sp.x_star, &mu, &lambda) <= centre + 1e-12);
                assert!(centre <= lagrangian_value(&p, &x, &sp.mu_star, &sp.lambda_star) + 1e-12);
            }
        }
    }

    #[test]
    fn too_many_inequalities_is_refused() {
        let ineq = vec![vec![InequalityConstraint::upper_bound(1.0); 21]];
        let p = ProblemSpec::new(vec![Objective::quadratic(1.0, 0.0, 0.0)], vec![], ineq).unwrap();
        assert!(matches!(solve_centralized(&p), Err(AnalysisError::TooManyInequalities { .. })));
    }

    fn saddle_state(p: &ProblemSpec, sp: &SaddlePoint) -> ReducedState {
        ReducedState {
            x: sp.x_star.clone(),
            mu: Matrix::from_rows(&vec![sp.mu_star.clone(); p.n()]),
            lambda: sp.lambda_star.clone(),
        }
    }

    #[test]
    fn lyapunov_is_zero_at_saddle_and_positive_elsewhere() {
        let p = case2();
        let sp = solve_centralized(&p).unwrap();
        let gains = GainConfig::uniform(&p, 1.0, 0.05);
        let r = saddle_state(&p, &sp);
        assert!(lyapunov_value(&r, &sp, &gains).unwrap().abs() < 1e-15);

        let mut moved = r.clone();
        moved.x[5] += 0.1;
        assert!(lyapunov_value(&moved, &sp, &gains).unwrap() > 0.0);
        let mut moved = r.clone();
        moved.lambda[0][0] *= 1.5;
        assert!(lyapunov_value(&moved, &sp, &gains).unwrap() > 0.0);
        let mut moved = r.clone();
        moved.lambda[3][0] = 0.2;
        assert!(lyapunov_value(&moved, &sp, &gains).unwrap() > 0.0);
    }

    #[test]
    fn lyapunov_blows_up_at_log_boundary() {
        let p = case2();
        let sp = solve_centralized(&p).unwrap();
        let gains = GainConfig::uniform(&p, 1.0, 0.05);
        let mut r = saddle_state(&p, &sp);
        let mut last = 0.0;
        for k in 1..12 {
            r.lambda[0][0] = libm::pow(10.0, -(k as f64));
            let v = lyapunov_value(&r, &sp, &gains).unwrap();
            assert!(v > last);
            last = v;
        }
        let ls = sp.lambda_star[0][0];
        let lam = 1e-11;
        let expected = (lam - ls) - ls * libm::log(lam / ls);
        assert!(ls > 1e-9);
        assert!((last - expected).abs() < 1e-12 * expected);
        r.lambda[0][0] = 0.0;
        assert_eq!(
            lyapunov_value(&r, &sp, &gains),
            Err(AnalysisError::LyapunovDomain { agent: 0, index: 0 })
        );
        r.lambda[0][0] = 1.0;
        r.lambda[3][0] = -0.1;
        assert!(lyapunov_value(&r, &sp, &gains).is_err());
    }
}
