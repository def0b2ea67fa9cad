//! Problem data: separable objective, shared affine equalities, and local
//! affine inequalities, plus checks for the standing assumptions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::analysis::{solve_qp, AnalysisError, DiagonalQp, SaddlePoint};
use crate::graph::NetworkGraph;
use crate::linalg::{numerical_rank, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("equality constraint {0} has an all-zero coefficient row")]
    ZeroEqualityRow(usize),
    #[error("inequality {index} of agent {agent} has a zero coefficient")]
    ZeroInequalityCoefficient { agent: usize, index: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("problem has {problem} agents but graph has {graph}")]
    GraphMismatch { problem: usize, graph: usize },
}

/// `a x^2 + b x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }
}

/// Private cost of one agent. The engine only uses [`Objective::value`] and
/// [`Objective::derivative`]; the oracle additionally needs the quadratic
/// coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Quadratic(Quadratic),
}

impl Objective {
    pub fn quadratic(a: f64, b: f64, c: f64) -> Self {
        Objective::Quadratic(Quadratic::new(a, b, c))
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Objective::Quadratic(q) => (q.a * x + q.b) * x + q.c,
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Objective::Quadratic(q) => 2.0 * q.a * x + q.b,
        }
    }

    pub fn is_strictly_convex(&self) -> bool {
        match self {
            Objective::Quadratic(q) => q.a > 0.0,
        }
    }

    pub fn as_quadratic(&self) -> Option<&Quadratic> {
        match self {
            Objective::Quadratic(q) => Some(q),
        }
    }
}

/// `h(x) = sum_i (a_i x_i + b_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConstraint {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl EqualityConstraint {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        Self { a, b }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .zip(x)
            .map(|((a, b), x)| a * x + b)
            .sum()
    }

    pub fn offset(&self) -> f64 {
        self.b.iter().sum()
    }
}

/// `g(x_i) = a x_i + b <= 0`, owned by a single agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityConstraint {
    pub a: f64,
    pub b: f64,
}

impl InequalityConstraint {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// `x >= bound`, i.e. `-x + bound <= 0`.
    pub fn lower_bound(bound: f64) -> Self {
        Self::new(-1.0, bound)
    }

    /// `x <= bound`, i.e. `x - bound <= 0`.
    pub fn upper_bound(bound: f64) -> Self {
        Self::new(1.0, -bound)
    }

    #[inline]
    pub fn evaluate(&self, x: f64) -> f64 {
        self.a * x + self.b
    }
}

/// 0-based handle of inequality `index` owned by agent `agent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId {
    pub agent: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    objectives: Vec<Objective>,
    equalities: Vec<EqualityConstraint>,
    inequalities: Vec<Vec<InequalityConstraint>>,
}

impl ProblemSpec {
    /// Checks shapes and degenerate rows. Convexity is left to
    /// [`validate_assumptions`] so non-convex input can still be diagnosed.
    pub fn new(
        objectives: Vec<Objective>,
        equalities: Vec<EqualityConstraint>,
        inequalities: Vec<Vec<InequalityConstraint>>,
    ) -> Result<Self, ProblemError> {
        let n = objectives.len();
        if n == 0 {
            return Err(ProblemError::DimensionMismatch {
                what: "objectives",
                expected: 1,
                found: 0,
            });
        }
        if inequalities.len() != n {
            return Err(ProblemError::DimensionMismatch {
                what: "inequality lists",
                expected: n,
                found: inequalities.len(),
            });
        }
        for obj in &objectives {
            let Objective::Quadratic(q) = obj;
            if !(q.a.is_finite() && q.b.is_finite() && q.c.is_finite()) {
                return Err(ProblemError::NonFinite("objective"));
            }
        }
        for (e, eq) in equalities.iter().enumerate() {
            for (what, v) in [("equality a", &eq.a), ("equality b", &eq.b)] {
                if v.len() != n {
                    return Err(ProblemError::DimensionMismatch {
                        what,
                        expected: n,
                        found: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(ProblemError::NonFinite(what));
                }
            }
            if eq.a.iter().all(|&a| a == 0.0) {
                return Err(ProblemError::ZeroEqualityRow(e));
            }
        }
        for (agent, list) in inequalities.iter().enumerate() {
            for (index, g) in list.iter().enumerate() {
                if !(g.a.is_finite() && g.b.is_finite()) {
                    return Err(ProblemError::NonFinite("inequality"));
                }
                if g.a == 0.0 {
                    return Err(ProblemError::ZeroInequalityCoefficient { agent, index });
                }
            }
        }
        Ok(Self {
            objectives,
            equalities,
            inequalities,
        })
    }

    pub fn n(&self) -> usize {
        self.objectives.len()
    }

    /// Number of equality constraints.
    pub fn l(&self) -> usize {
        self.equalities.len()
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn equalities(&self) -> &[EqualityConstraint] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Vec<InequalityConstraint>] {
        &self.inequalities
    }

    pub fn inequality(&self, id: ConstraintId) -> &InequalityConstraint {
        &self.inequalities[id.agent][id.index]
    }

    /// Per-agent inequality counts `m_i`.
    pub fn inequality_counts(&self) -> Vec<usize> {
        self.inequalities.iter().map(Vec::len).collect()
    }

    pub fn total_inequalities(&self) -> usize {
        self.inequalities.iter().map(Vec::len).sum()
    }

    /// All inequality ids, agent-major.
    pub fn inequality_ids(&self) -> Vec<ConstraintId> {
        self.inequalities
            .iter()
            .enumerate()
            .flat_map(|(agent, list)| (0..list.len()).map(move |index| ConstraintId { agent, index }))
            .collect()
    }

    pub fn total_cost(&self, x: &[f64]) -> f64 {
        self.objectives.iter().zip(x).map(|(f, x)| f.value(*x)).sum()
    }
}

/// Constraint values at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintValues {
    pub h: Vec<f64>,
    pub g: Vec<Vec<f64>>,
}

impl ConstraintValues {
    pub fn max_equality_violation(&self) -> f64 {
        crate::linalg::max_abs_slice(&self.h)
    }

    /// Worst positive inequality value (0 when all hold).
    pub fn max_inequality_violation(&self) -> f64 {
        self.g.iter().flatten().fold(0.0, |m, &v| f64::max(m, v))
    }
}

pub fn evaluate_constraints(p: &ProblemSpec, x: &[f64]) -> ConstraintValues {
    assert_eq!(x.len(), p.n());
    ConstraintValues {
        h: p.equalities.iter().map(|eq| eq.evaluate(x)).collect(),
        g: p.inequalities
            .iter()
            .zip(x)
            .map(|(list, &xi)| list.iter().map(|g| g.evaluate(xi)).collect())
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiMatrix {
    pub matrix: Matrix,
    pub rank: usize,
}

impl PsiMatrix {
    pub fn has_full_column_rank(&self) -> bool {
        self.rank == self.matrix.cols()
    }
}

/// Relative pivot tolerance for the rank of the constraint-gradient matrix.
pub const PSI_RANK_TOL: f64 = 1e-10;

/// Gradients of the equalities followed by those of the given active
/// inequalities, one column each.
pub fn psi_matrix(p: &ProblemSpec, active: &[ConstraintId]) -> PsiMatrix {
    let n = p.n();
    let mut matrix = Matrix::zeros(n, p.l() + active.len());
    for (e, eq) in p.equalities.iter().enumerate() {
        for i in 0..n {
            matrix[(i, e)] = eq.a[i];
        }
    }
    for (k, id) in active.iter().enumerate() {
        matrix[(id.agent, p.l() + k)] = p.inequality(*id).a;
    }
    let rank = numerical_rank(&matrix, PSI_RANK_TOL);
    PsiMatrix { matrix, rank }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub passed: bool,
    pub detail: String,
}

impl AssumptionCheck {
    fn pass(detail: String) -> Self {
        Self { passed: true, detail }
    }

    fn fail(detail: String) -> Self {
        Self {
            passed: false,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Every objective strictly convex.
    pub strict_convexity: AssumptionCheck,
    /// Feasible set nonempty with a strictly feasible point.
    pub slater: AssumptionCheck,
    /// Constraint gradients at the optimum's active set are independent.
    pub constraint_qualification: AssumptionCheck,
    pub connectivity: AssumptionCheck,
    /// Optimal value of `min s s.t. h = 0, g <= s` (regularized).
    pub slater_margin: Option<f64>,
    /// Oracle solution, when one could be computed.
    pub saddle: Option<SaddlePoint>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed)
    }

    pub fn checks(&self) -> [(&'static str, &AssumptionCheck); 4] {
        [
            ("strict_convexity", &self.strict_convexity),
            ("slater", &self.slater),
            ("constraint_qualification", &self.constraint_qualification),
            ("connectivity", &self.connectivity),
        ]
    }
}

/// Weight of the quadratic regularizer in the Slater auxiliary problem.
const SLATER_REGULARIZATION: f64 = 1e-6;
/// Strict feasibility threshold on the auxiliary optimum.
pub const SLATER_MARGIN_TOL: f64 = -1e-9;

/// Solves `min s + (d/2)(s^2 + |x|^2)` subject to `h(x) = 0` and
/// `g_ij(x_i) <= s` with the same active-set oracle used for the saddle
/// point. The regularizer only raises the optimum, so a negative result
/// certifies a strictly feasible point.
fn slater_margin(p: &ProblemSpec) -> Result<f64, AnalysisError> {
    let n = p.n();
    let dim = n + 1;
    let d = SLATER_REGULARIZATION;
    let mut hessian = vec![d; dim];
    hessian[n] = d;
    let mut linear = vec![0.0; dim];
    linear[n] = 1.0;
    let equalities = p
        .equalities
        .iter()
        .map(|eq| {
            let mut row = eq.a.clone();
            row.push(0.0);
            (row, eq.offset())
        })
        .collect();
    let inequalities = p
        .inequality_ids()
        .into_iter()
        .map(|id| {
            let g = p.inequality(id);
            let mut row = vec![0.0; dim];
            row[id.agent] = g.a;
            row[n] = -1.0;
            (row, g.b)
        })
        .collect();
    let qp = DiagonalQp {
        hessian,
        linear,
        equalities,
        inequalities,
    };
    let sol = solve_qp(&qp)?;
    Ok(sol.z[n])
}

/// Machine checks for strict convexity, Slater, independence of active
/// constraint gradients at the optimum, and connectivity.
pub fn validate_assumptions(
    p: &ProblemSpec,
    g: &NetworkGraph,
) -> Result<ValidationReport, ProblemError> {
    if p.n() != g.n() {
        return Err(ProblemError::GraphMismatch {
            problem: p.n(),
            graph: g.n(),
        });
    }

    let non_convex: Vec<usize> = p
        .objectives
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.is_strictly_convex())
        .map(|(i, _)| i + 1)
        .collect();
    let strict_convexity = if non_convex.is_empty() {
        AssumptionCheck::pass(String::from("all objectives strictly convex"))
    } else {
        AssumptionCheck::fail(format!(
            "objective of agent(s) {non_convex:?} not strictly convex (quadratic coefficient a <= 0)"
        ))
    };

    let (slater, slater_margin_value) = match slater_margin(p) {
        Ok(s) if s < SLATER_MARGIN_TOL => (
            AssumptionCheck::pass(format!("strictly feasible point exists (margin {s:.6e})")),
            Some(s),
        ),
        Ok(s) => (
            AssumptionCheck::fail(format!(
                "no strictly feasible point: min over feasible x of max inequality value is {s:.6e}"
            )),
            Some(s),
        ),
        Err(e) => (
            AssumptionCheck::fail(format!("feasible set is empty: auxiliary problem failed ({e})")),
            None,
        ),
    };

    let (constraint_qualification, saddle) = if !strict_convexity.passed {
        (
            AssumptionCheck::fail(String::from("not evaluated: objective not strictly convex")),
            None,
        )
    } else {
        match crate::analysis::solve_centralized(p) {
            Ok(sp) => {
                let psi = psi_matrix(p, &sp.active_set);
                let check = if psi.has_full_column_rank() {
                    AssumptionCheck::pass(format!(
                        "constraint-gradient matrix {}x{} has full column rank {}",
                        psi.matrix.rows(),
                        psi.matrix.cols(),
                        psi.rank
                    ))
                } else {
                    AssumptionCheck::fail(format!(
                        "constraint-gradient matrix {}x{} has rank {} < {}",
                        psi.matrix.rows(),
                        psi.matrix.cols(),
                        psi.rank,
                        psi.matrix.cols()
                    ))
                };
                (check, Some(sp))
            }
            Err(e) => (AssumptionCheck::fail(format!("no saddle point: {e}")), None),
        }
    };

    let connectivity = if g.is_connected() {
        AssumptionCheck::pass(String::from("communication graph connected"))
    } else {
        AssumptionCheck::fail(String::from("communication graph is not connected"))
    };

    Ok(ValidationReport {
        strict_convexity,
        slater,
        constraint_qualification,
        connectivity,
        slater_margin: slater_margin_value,
        saddle,
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    pub const COSTS_A: [f64; 8] = [1.0, 3.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0];
    pub const COSTS_B: [f64; 8] = [-5.0, -10.0, -10.0, -5.0, -2.0, -5.0, -5.0, -5.0];
    pub const DEMAND: [f64; 8] = [0.51, 0.52, 0.53, 0.54, 0.55, 0.56, 0.57, 0.58];
    pub const LOWER: [f64; 8] = [0.7, 0.3, 0.4, 0.1, 0.1, 0.1, 0.1, 0.1];
    pub const UPPER: [f64; 8] = [0.9, 0.9, 0.9, 1.0, 1.0, 1.0, 0.9, 0.7];

    fn objectives() -> Vec<Objective> {
        (0..8)
            .map(|i| Objective::quadratic(COSTS_A[i], COSTS_B[i], 0.0))
            .collect()
    }

    pub fn case1() -> ProblemSpec {
        let mut rows = Vec::new();
        for cluster in [0..3, 3..8] {
            let mut a = vec![0.0; 8];
            let mut b = vec![0.0; 8];
            for i in cluster {
                a[i] = 1.0;
                b[i] = -DEMAND[i];
            }
            rows.push(EqualityConstraint::new(a, b));
        }
        ProblemSpec::new(objectives(), rows, vec![Vec::new(); 8]).unwrap()
    }

    pub fn case2() -> ProblemSpec {
        let eq = EqualityConstraint::new(vec![1.0; 8], DEMAND.iter().map(|d| -d).collect());
        let ineq = (0..8)
            .map(|i| {
                vec![
                    InequalityConstraint::lower_bound(LOWER[i]),
                    InequalityConstraint::upper_bound(UPPER[i]),
                ]
            })
            .collect();
        ProblemSpec::new(objectives(), vec![eq], ineq).unwrap()
    }

    /// Random dispatch-like instance: one balance row, a box per agent, and a
    /// demand strictly inside the box range.
    pub fn random_instance(rng: &mut ChaCha8Rng) -> ProblemSpec {
        let n = rng.gen_range(2..=6);
        let objectives = (0..n)
            .map(|_| Objective::quadratic(rng.gen_range(0.2..3.0), rng.gen_range(-10.0..2.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut inner = Vec::new();
        for _ in 0..n {
            let lo: f64 = rng.gen_range(-1.0..1.0);
            let hi = lo + rng.gen_range(0.2..2.0);
            lower.push(lo);
            upper.push(hi);
            inner.push(rng.gen_range(lo + 0.05 * (hi - lo)..hi - 0.05 * (hi - lo)));
        }
        let demand: f64 = inner.iter().sum();
        let eq = EqualityConstraint::new(vec![1.0; n], vec![-demand / n as f64; n]);
        let ineq = (0..n)
            .map(|i| vec![InequalityConstraint::lower_bound(lower[i]), InequalityConstraint::upper_bound(upper[i])])
            .collect();
        ProblemSpec::new(objectives, vec![eq], ineq).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::graph::eight_generator_topology;
    use proptest::prelude::*;

    #[test]
    fn quadratic_derivative_is_exact() {
        let f = Objective::quadratic(3.0, -2.0, 1.0);
        assert_eq!(f.derivative(1.5), 2.0 * 3.0 * 1.5 - 2.0);
        assert_eq!(f.value(2.0), 12.0 - 4.0 + 1.0);
    }

    #[test]
    fn balance_at_demand_point() {
        let v = evaluate_constraints(&case2(), &DEMAND);
        assert!(v.h[0].abs() < 1e-15);
    }

    #[test]
    fn balance_at_half() {
        let v = evaluate_constraints(&case2(), &[0.5; 8]);
        assert!((v.h[0] - (-0.36)).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_active_at_limit() {
        let mut x = [0.5; 8];
        x[0] = 0.7;
        let v = evaluate_constraints(&case2(), &x);
        assert_eq!(v.g[0][0], 0.0);
    }

    #[test]
    fn psi_rank_examples() {
        assert_eq!(psi_matrix(&case1(), &[]).rank, 2);
        let p = case2();
        assert_eq!(psi_matrix(&p, &[]).rank, 1);
        let psi = psi_matrix(&p, &[ConstraintId { agent: 0, index: 0 }]);
        assert_eq!(psi.rank, 2);
        assert!(psi.has_full_column_rank());
    }

    #[test]
    fn psi_duplicate_column_does_not_raise_rank() {
        let p = case2();
        let id = ConstraintId { agent: 0, index: 0 };
        let twin = ConstraintId { agent: 0, index: 1 };
        let psi = psi_matrix(&p, &[id, twin]);
        assert_eq!(psi.rank, 2);
        assert!(!psi.has_full_column_rank());
    }

    #[test]
    fn rejects_degenerate_rows() {
        let zero_row = EqualityConstraint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let objs = vec![Objective::quadratic(1.0, 0.0, 0.0); 2];
        assert_eq!(
            ProblemSpec::new(objs.clone(), vec![zero_row], vec![vec![], vec![]]),
            Err(ProblemError::ZeroEqualityRow(0))
        );
        assert_eq!(
            ProblemSpec::new(
                objs.clone(),
                vec![],
                vec![vec![], vec![InequalityConstraint::new(0.0, 1.0)]]
            ),
            Err(ProblemError::ZeroInequalityCoefficient { agent: 1, index: 0 })
        );
        assert!(matches!(
            ProblemSpec::new(objs, vec![EqualityConstraint::new(vec![1.0], vec![0.0])], vec![vec![], vec![]]),
            Err(ProblemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bundled_scenarios_pass_all_assumptions() {
        let g = eight_generator_topology();
        for p in [case1(), case2()] {
            let report = validate_assumptions(&p, &g).unwrap();
            assert!(report.all_passed(), "{report:?}");
        }
    }

    #[test]
    fn case2_slater_margin_is_box_half_width() {
        // agent 1 has the narrowest box [0.7, 0.9]; the balance 4.36 sits
        // well inside [1.9, 7.3] so the margin is set by that box.
        let report = validate_assumptions(&case2(), &eight_generator_topology()).unwrap();
        let margin = report.slater_margin.unwrap();
        assert!((margin + 0.1).abs() < 1e-4, "{margin}");
    }

    #[test]
    fn zero_curvature_fails_convexity() {
        let mut objs: Vec<_> = case2().objectives().to_vec();
        objs[1] = Objective::quadratic(0.0, -10.0, 0.0);
        let p = ProblemSpec::new(objs, case2().equalities().to_vec(), case2().inequalities().to_vec())
            .unwrap();
        let report = validate_assumptions(&p, &eight_generator_topology()).unwrap();
        assert!(!report.strict_convexity.passed);
        assert!(report.strict_convexity.detail.contains('2'));
    }

    #[test]
    fn cut_edge_fails_connectivity() {
        let g = NetworkGraph::new(8, &[(1, 2), (2, 3), (4, 5), (5, 6), (5, 7), (6, 8), (7, 8)])
            .unwrap();
        let report = validate_assumptions(&case2(), &g).unwrap();
        assert!(!report.connectivity.passed);
        assert!(report.strict_convexity.passed && report.slater.passed);
    }

    #[test]
    fn infeasible_boxes_fail_slater() {
        let p = case2();
        // total demand 4.36 but every generator capped at 0.2
        let ineq = (0..8)
            .map(|_| vec![InequalityConstraint::lower_bound(0.0), InequalityConstraint::upper_bound(0.2)])
            .collect();
        let q = ProblemSpec::new(p.objectives().to_vec(), p.equalities().to_vec(), ineq).unwrap();
        let report = validate_assumptions(&q, &eight_generator_topology()).unwrap();
        assert!(!report.slater.passed);
    }

    #[test]
    fn touching_bounds_fail_slater() {
        let p = case2();
        let mut ineq = p.inequalities().to_vec();
        ineq[0] = vec![InequalityConstraint::lower_bound(0.7), InequalityConstraint::upper_bound(0.7)];
        let q = ProblemSpec::new(p.objectives().to_vec(), p.equalities().to_vec(), ineq).unwrap();
        let report = validate_assumptions(&q, &eight_generator_topology()).unwrap();
        assert!(!report.slater.passed, "{:?}", report.slater);
    }

    proptest! {
        #[test]
        fn constraints_are_affine(
            x in proptest::collection::vec(-5.0f64..5.0, 8),
            y in proptest::collection::vec(-5.0f64..5.0, 8),
            alpha in 0.0f64..1.0,
        ) {
            let p = case2();
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
            let (hx, hy, hz) = (evaluate_constraints(&p, &x), evaluate_constraints(&p, &y), evaluate_constraints(&p, &z));
            prop_assert!((hz.h[0] - (alpha * hx.h[0] + (1.0 - alpha) * hy.h[0])).abs() < 1e-12);
            for i in 0..8 {
                for j in 0..2 {
                    let mix = alpha * hx.g[i][j] + (1.0 - alpha) * hy.g[i][j];
                    prop_assert!((hz.g[i][j] - mix).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn psi_rank_bounded(active in proptest::collection::vec((0usize..8, 0usize..2), 0..10)) {
            let p = case2();
            let ids: Vec<_> = active.into_iter().map(|(agent, index)| ConstraintId { agent, index }).collect();
            let psi = psi_matrix(&p, &ids);
            prop_assert!(psi.rank <= psi.matrix.cols().min(8));
            if let Some(first) = ids.first() {
                let mut dup = ids.clone();
                dup.push(*first);
                prop_assert!(psi_matrix(&p, &dup).rank <= psi.rank);
            }
        }
    }
}
