//! Solving [`ConicProgram`]s and reporting certified results.

use alloc::string::String;
use alloc::vec::Vec;

use super::compile::compile;
use super::dual::dualize;
use super::ipm::{solve_standard, IpmSettings, Status};
use super::model::{ConicProgram, Value};
use crate::error::Result;

/// A solved program.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: Status,
    /// Objective of the program as stated.
    pub primal: f64,
    /// Objective of the dual, from the same run or from a separate solve
    /// of the dualized program.
    pub dual: f64,
    pub gap: f64,
    /// Values of the program's variables, by name.
    pub values: Vec<(String, Value)>,
    /// Multipliers of equalities then cone constraints, by constraint name.
    /// They are feasible points of [`dualize`]'s program.
    pub multipliers: Vec<(String, Value)>,
    /// Largest constraint violation of `values`.
    pub violation: f64,
    pub iterations: usize,
    pub settings: IpmSettings,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, name: &str) -> Option<&Value> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn multiplier(&self, name: &str) -> Option<&Value> {
        self.multipliers.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

/// Solves a program with the given settings.
pub fn solve_with(p: &ConicProgram, settings: &IpmSettings) -> Result<SolveReport> {
    let compiled = compile(p)?;
    let raw = solve_standard(&compiled.sf, settings);
    let values = compiled.values(p, &raw.x);
    let mults = compiled.multipliers(p, &raw.y);
    let primal = p.objective_value(&values);
    let dual = compiled.original_objective(raw.dobj);
    let violation = p.max_violation(&values)?;
    let names = p.equalities.iter().chain(&p.cones).map(|c| c.name.clone());
    Ok(SolveReport {
        status: raw.status,
        primal,
        dual,
        gap: (primal - dual).abs(),
        values: p.vars.iter().map(|v| v.name.clone()).zip(values).collect(),
        multipliers: names.zip(mults).collect(),
        violation,
        iterations: raw.iterations,
        settings: *settings,
    })
}

/// Solves a program with default settings.
pub fn solve(p: &ConicProgram) -> Result<SolveReport> {
    solve_with(p, &IpmSettings::default())
}

/// Solves `p` and, separately, its mechanical dual. The returned primal
/// report carries the dual solve's objective in `dual` and `gap`.
pub fn solve_pair(p: &ConicProgram, settings: &IpmSettings) -> Result<(SolveReport, SolveReport)> {
    let mut primal = solve_with(p, settings)?;
    let dual = solve_with(&dualize(p)?, settings)?;
    primal.dual = dual.primal;
    primal.gap = (primal.primal - dual.primal).abs();
    if primal.status == Status::Optimal && dual.status != Status::Optimal {
        primal.status = dual.status;
    }
    Ok((primal, dual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::model::*;
    use crate::linalg::*;
    use alloc::sync::Arc;
    use alloc::vec;
    use rand::SeedableRng;

    fn trace_of(n: usize) -> LinMap {
        LinMap::of(Atom::TraceWith(Arc::new(eye(n))))
    }

    #[test]
    fn maximal_singlet_overlap() {
        let mut p = ConicProgram::new(Sense::Maximize);
        let x = p.add_var("X", Space::Herm(4), Domain::Cone);
        p.add_objective(x, Value::Herm(phi_plus(2) * c(0.5)));
        p.add_equality("norm", Expr::new(Space::Real(1)).term(x, trace_of(4)).plus_const(Value::scalar(-1.0)));
        let r = solve(&p).unwrap();
        assert!(r.is_optimal());
        assert!((r.primal - 1.0).abs() < 1e-7, "{}", r.primal);
        assert!(r.gap < 1e-6);
        assert!(r.violation < 1e-7);
    }

    #[test]
    fn largest_eigenvalue_complex() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let h = herm_part(&ginibre(5, 5, &mut rng));
        let mut p = ConicProgram::new(Sense::Minimize);
        let lam = p.add_var("lam", Space::Real(1), Domain::Free);
        p.add_objective(lam, Value::scalar(1.0));
        p.add_cone(
            "gap",
            Expr::new(Space::Herm(5))
                .term(lam, LinMap::of(Atom::TimesMatrix(Arc::new(eye(5)))))
                .plus_const(Value::Herm(-h.clone())),
        );
        let (r, d) = solve_pair(&p, &IpmSettings::default()).unwrap();
        assert!(r.is_optimal() && d.is_optimal());
        assert!((r.primal - max_eig(&h)).abs() < 1e-7);
        assert!(r.gap < 1e-6);
        // The multiplier is a density operator on the top eigenvector.
        let z = r.multiplier("gap").unwrap().as_herm().unwrap();
        assert!((trace(z).re - 1.0).abs() < 1e-6);
        assert!((inner(z, &h) - max_eig(&h)).abs() < 1e-6);
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = ConicProgram::new(Sense::Minimize);
        let x = p.add_var("X", Space::Herm(3), Domain::Cone);
        p.add_objective(x, Value::Herm(eye(3)));
        p.add_equality("norm", Expr::new(Space::Real(1)).term(x, trace_of(3)).plus_const(Value::scalar(1.0)));
        let r = solve(&p).unwrap();
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn unbounded_ray_is_reported() {
        // min −a  s.t. a − b = 0, a, b ≥ 0
        let mut q = ConicProgram::new(Sense::Minimize);
        let a = q.add_var("a", Space::Real(1), Domain::Cone);
        let b = q.add_var("b", Space::Real(1), Domain::Cone);
        q.add_objective(a, Value::scalar(-1.0));
        q.add_equality(
            "tie",
            Expr::new(Space::Real(1)).term(a, LinMap::identity()).term(b, LinMap::of(Atom::Scale(-1.0))),
        );
        let r = solve(&q).unwrap();
        assert_eq!(r.status, Status::Unbounded);
    }

    #[test]
    fn lp_with_free_variables_matches_dual() {
        // min x + 2y + s  s.t. x + y − s = 1, y + s = 2 with x, y ≥ 0, s free
        let mut p = ConicProgram::new(Sense::Minimize);
        let xy = p.add_var("xy", Space::Real(2), Domain::Cone);
        let s = p.add_var("s", Space::Real(1), Domain::Free);
        p.add_objective(xy, Value::Real(vec![1.0, 2.0]));
        p.add_objective(s, Value::scalar(1.0));
        // Real vectors are handled via the scalar subspace: build row by row.
        let pick = |w: Vec<f64>| {
            LinMap::of(Atom::Combination(Arc::new(Functionals {
                n: 1,
                rows: w.iter().map(|&v| SparseHerm { entries: vec![(0, 0, c(v))] }).collect(),
                conjugation_closed: true,
            })))
            .then(Atom::TraceWith(Arc::new(eye(1))))
        };
        p.add_equality(
            "first",
            Expr::new(Space::Real(1))
                .term(xy, pick(vec![1.0, 1.0]))
                .term(s, LinMap::of(Atom::Scale(-1.0)))
                .plus_const(Value::scalar(-1.0)),
        );
        p.add_equality(
            "second",
            Expr::new(Space::Real(1))
                .term(xy, pick(vec![0.0, 1.0]))
                .term(s, LinMap::identity())
                .plus_const(Value::scalar(-2.0)),
        );
        let (r, d) = solve_pair(&p, &IpmSettings::default()).unwrap();
        assert!(r.is_optimal(), "{:?}", r.status);
        assert!(d.is_optimal(), "{:?}", d.status);
        // optimum: y = 0, s = 2, x = 3 → 5; or y = 1.5, s = 0.5, x = 0 → 3.5
        assert!((r.primal - 3.5).abs() < 1e-7, "{}", r.primal);
        assert!(r.gap < 1e-6);
    }
}
