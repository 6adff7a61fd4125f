//! The conic programs of the theory: diamond distance, the monotones
//! `f_P`, `g` and `G_P`, the conversion distance and its witnesses.
//!
//! Superchannel variables use the layout `[A₀, A₁, B₀, B₁]`, so that
//! `Θ[N] = tr_A[J ((J^N)ᵀ ⊗ I_B)]` and
//! `⟨P, Θ[N]⟩ = tr[J ((J^N)ᵀ ⊗ J^P)]`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;

use crate::choi::*;
use crate::conic::{self, Atom, ConicProgram, Domain, Expr, IpmSettings, LinMap, Sense, SolveReport, Space, Value};
use crate::error::{Error, Result};
use crate::linalg::*;
use crate::tensor;
use crate::theory::{DualConeWitness, FreeCone, Side, TheorySpec};

/// Distances at or below this are reported as zero within tolerance.
pub const ZERO_TOL: f64 = 1e-6;

/// Which program(s) to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Primal,
    Dual,
    Both,
}

impl Form {
    fn primal(self) -> bool {
        self != Form::Dual
    }
    fn dual(self) -> bool {
        self != Form::Primal
    }
}

/// Optimal value of a problem with the reports of the programs solved.
#[derive(Debug, Clone)]
pub struct Bound {
    /// Primal optimum when the primal was solved, the dual optimum otherwise.
    pub value: f64,
    pub primal: Option<SolveReport>,
    pub dual: Option<SolveReport>,
}

impl Bound {
    /// `|primal − dual|` when both were solved.
    pub fn gap(&self) -> Option<f64> {
        match (&self.primal, &self.dual) {
            (Some(p), Some(d)) => Some((p.primal - d.primal).abs()),
            _ => None,
        }
    }

    pub fn zero_within_tolerance(&self) -> bool {
        self.value <= ZERO_TOL
    }

    fn from_reports(primal: Option<SolveReport>, dual: Option<SolveReport>) -> Self {
        let value = match (&primal, &dual) {
            (Some(p), _) => p.primal,
            (None, Some(d)) => d.primal,
            (None, None) => f64::NAN,
        };
        Self { value, primal, dual }
    }
}

fn optimal(p: &ConicProgram, settings: &IpmSettings, what: &str) -> Result<SolveReport> {
    let r = conic::solve_with(p, settings)?;
    if !r.is_optimal() {
        return Err(Error::Solver(format!("{what} ended with {:?}", r.status)));
    }
    Ok(r)
}

fn herm(r: &SolveReport, name: &str) -> Mat {
    r.value(name).and_then(Value::as_herm).cloned().expect("variable declared by the program")
}

fn scalar(r: &SolveReport, name: &str) -> f64 {
    r.value(name).and_then(Value::as_real).map(|v| v[0]).expect("variable declared by the program")
}

fn times_identity(n: usize) -> Atom {
    Atom::TimesMatrix(Arc::new(eye(n)))
}

fn same_system(a: &ChannelChoi, b: &ChannelChoi) -> Result<()> {
    if a.sys != b.sys {
        return Err(Error::Dimension(format!("channels on {:?} and {:?}", a.sys, b.sys)));
    }
    Ok(())
}

/// `½‖E − F‖_⋄` from its two semidefinite forms.
#[derive(Debug, Clone)]
pub struct DiamondReport {
    /// `min ‖tr_{B₁} ω‖_∞` over `ω ⪰ 0, ω ⪰ J^{E−F}`.
    pub value: f64,
    /// `min λ` over `λQ ⪰ E − F` with `Q` a channel.
    pub channel_form: f64,
    pub reports: [SolveReport; 2],
}

impl DiamondReport {
    pub fn disagreement(&self) -> f64 {
        (self.value - self.channel_form).abs()
    }
}

/// Half the diamond norm of `E − F`, computed in both forms.
pub fn diamond_distance(e: &ChannelChoi, f: &ChannelChoi, settings: &IpmSettings) -> Result<DiamondReport> {
    same_system(e, f)?;
    let (d0, d1) = (e.sys.in_dim, e.sys.out_dim);
    let n = d0 * d1;
    let diff = herm_part(&(e.matrix() - f.matrix()));
    let tr_out = || Atom::PartialTrace { dims: vec![d0, d1], keep: vec![0] };

    let mut p = ConicProgram::new(Sense::Minimize);
    let mu = p.add_var("mu", Space::Real(1), Domain::Cone);
    let omega = p.add_var("omega", Space::Herm(n), Domain::Cone);
    p.add_objective(mu, Value::scalar(1.0));
    p.add_cone(
        "bound",
        Expr::new(Space::Herm(d0))
            .term(mu, LinMap::of(times_identity(d0)))
            .term(omega, LinMap::of(tr_out()).then(Atom::Scale(-1.0))),
    );
    p.add_cone("excess", Expr::new(Space::Herm(n)).var(omega).plus_const(Value::Herm(-diff.clone())));
    let r1 = optimal(&p, settings, "diamond distance")?;

    let mut q = ConicProgram::new(Sense::Minimize);
    let lam = q.add_var("lambda", Space::Real(1), Domain::Cone);
    let y = q.add_var("Y", Space::Herm(n), Domain::Cone);
    q.add_objective(lam, Value::scalar(1.0));
    q.add_cone("excess", Expr::new(Space::Herm(n)).var(y).plus_const(Value::Herm(-diff)));
    q.add_equality(
        "channel",
        Expr::new(Space::Herm(d0))
            .term(y, LinMap::of(tr_out()))
            .term(lam, LinMap::of(times_identity(d0)).then(Atom::Scale(-1.0))),
    );
    let r2 = optimal(&q, settings, "diamond distance (channel form)")?;

    Ok(DiamondReport { value: r1.primal, channel_form: r2.primal, reports: [r1, r2] })
}

/// Superchannel cone for channels `n` (on A) and `target` (on B).
fn superchannel_cone(theory: &TheorySpec, n: &ChannelChoi, target_sys: SystemPair) -> Result<FreeCone> {
    FreeCone::superchannel(theory, n.sys, target_sys)
}

/// `Σ_k v_k F_k + PT(Q)` subtracted from `expr`, turning `expr ⪰ 0` into
/// `expr ∈ 𝔎*`. Returns the extended expression.
fn dual_cone_terms(p: &mut ConicProgram, cone: &FreeCone, mut expr: Expr) -> Expr {
    let n = cone.size();
    if !cone.functionals.rows.is_empty() {
        let v = p.add_var("v", Space::Real(cone.functionals.rows.len()), Domain::Free);
        expr = expr.term(v, LinMap::of(Atom::Combination(cone.functionals.clone())).then(Atom::Scale(-1.0)));
    }
    if let Some(atom) = cone.pt_atom() {
        let q = p.add_var("q", Space::Herm(n), Domain::Cone);
        expr = expr.term(q, LinMap::of(atom).then(Atom::Scale(-1.0)));
    }
    expr
}

/// `f_P(N) = max_{J ∈ 𝔍} tr[J ((J^N)ᵀ ⊗ J^P)]`.
///
/// The dual is `|A₁B₀| · min{x ≥ 0 : xI − (J^N)ᵀ ⊗ J^P ∈ 𝔎*}`; its
/// optimal `x` is checked to be strictly positive.
pub fn monotone_f(
    n: &ChannelChoi,
    p: &ChannelChoi,
    theory: &TheorySpec,
    form: Form,
    settings: &IpmSettings,
) -> Result<Bound> {
    check_channel(p, "P")?;
    let cone = superchannel_cone(theory, n, p.sys)?;
    let k = kron(&n.matrix().transpose(), p.matrix());
    let primal = if form.primal() { Some(optimal(&f_primal(&cone, &k), settings, "f_P primal")?) } else { None };
    let dual = if form.dual() {
        let r = optimal(&f_dual(&cone, &k), settings, "f_P dual")?;
        let x = scalar(&r, "x");
        if x <= 0.0 {
            return Err(Error::Solver(format!("f_P dual returned x = {x:.3e}, expected x > 0")));
        }
        Some(r)
    } else {
        None
    };
    Ok(Bound::from_reports(primal, dual))
}

fn check_channel(p: &ChannelChoi, what: &str) -> Result<()> {
    let v = validate_channel(p);
    if !v.valid {
        return Err(Error::InvalidChannel(format!("{what}: {}", v.notes.join("; "))));
    }
    Ok(())
}

fn f_primal(cone: &FreeCone, k: &Mat) -> ConicProgram {
    let mut p = ConicProgram::new(Sense::Maximize);
    let j = p.add_var("J", Space::Herm(cone.size()), Domain::Cone);
    p.add_objective(j, Value::Herm(k.clone()));
    cone.constrain(&mut p, j, "", true);
    p
}

fn f_dual(cone: &FreeCone, k: &Mat) -> ConicProgram {
    let n = cone.size();
    let mut p = ConicProgram::new(Sense::Minimize);
    let x = p.add_var("x", Space::Real(1), Domain::Cone);
    p.add_objective(x, Value::scalar(cone.normalization));
    let expr = Expr::new(Space::Herm(n)).term(x, LinMap::of(times_identity(n))).plus_const(Value::Herm(-k.clone()));
    let expr = dual_cone_terms(&mut p, cone, expr);
    p.add_cone("witness", expr);
    p
}

/// `g(P) = max ⟨P, M⟩` over the free channels `M` on `P`'s system.
pub fn g_value(p: &ChannelChoi, theory: &TheorySpec, settings: &IpmSettings) -> Result<Bound> {
    check_channel(p, "P")?;
    let cone = FreeCone::channel(theory, Side::B, p.sys)?;
    let mut prog = ConicProgram::new(Sense::Maximize);
    let m = prog.add_var("M", Space::Herm(cone.size()), Domain::Cone);
    prog.add_objective(m, Value::Herm(p.matrix().clone()));
    cone.constrain(&mut prog, m, "", true);
    Ok(Bound::from_reports(Some(optimal(&prog, settings, "g")?), None))
}

/// `G_P(N) = f_P(N) − g(P)` with both parts.
#[derive(Debug, Clone)]
pub struct ShiftedMonotone {
    pub value: f64,
    pub f: Bound,
    pub g: Bound,
}

pub fn shifted_monotone(
    n: &ChannelChoi,
    p: &ChannelChoi,
    theory: &TheorySpec,
    form: Form,
    settings: &IpmSettings,
) -> Result<ShiftedMonotone> {
    let f = monotone_f(n, p, theory, form, settings)?;
    let g = g_value(p, theory, settings)?;
    Ok(ShiftedMonotone { value: f.value - g.value, f, g })
}

/// Conversion distance `d(N → M)`.
///
/// Primal: `min λ` over `ω ⪰ Θ[N] − J^M`, `λI ⪰ tr_{B₁} ω`, `ω ⪰ 0` and
/// `J_Θ ∈ 𝔍`. Dual: `max t|A₁B₀| − tr[ζ J^M]` over `0 ⪯ ζ ⪯ η ⊗ I`,
/// `tr η = 1` and `(J^N)ᵀ ⊗ ζ − tI ∈ 𝔎*`.
pub fn conversion_distance(
    n: &ChannelChoi,
    m: &ChannelChoi,
    theory: &TheorySpec,
    form: Form,
    settings: &IpmSettings,
) -> Result<Bound> {
    let cone = superchannel_cone(theory, n, m.sys)?;
    let nt = Arc::new(n.matrix().transpose());
    conversion_with(&cone, LinMap::of(Atom::LinkTrace(nt)), m, form, settings)
}

/// Conversion distance where the free variable lives in `cone` and is
/// mapped to a channel on `m`'s system by `contract`.
pub(crate) fn conversion_with(
    cone: &FreeCone,
    contract: LinMap,
    m: &ChannelChoi,
    form: Form,
    settings: &IpmSettings,
) -> Result<Bound> {
    let primal = if form.primal() {
        Some(optimal(&conversion_primal(cone, &contract, m), settings, "conversion distance primal")?)
    } else {
        None
    };
    let dual = if form.dual() {
        Some(optimal(&conversion_dual(cone, &contract, m), settings, "conversion distance dual")?)
    } else {
        None
    };
    Ok(Bound::from_reports(primal, dual))
}

fn conversion_primal(cone: &FreeCone, contract: &LinMap, m: &ChannelChoi) -> ConicProgram {
    let (b0, b1) = (m.sys.in_dim, m.sys.out_dim);
    let nb = b0 * b1;
    let mut p = ConicProgram::new(Sense::Minimize);
    let lam = p.add_var("lambda", Space::Real(1), Domain::Cone);
    let omega = p.add_var("omega", Space::Herm(nb), Domain::Cone);
    let alpha = p.add_var("alpha", Space::Herm(cone.size()), Domain::Cone);
    p.add_objective(lam, Value::scalar(1.0));
    cone.constrain(&mut p, alpha, "", true);
    p.add_cone(
        "eta",
        Expr::new(Space::Herm(b0))
            .term(lam, LinMap::of(times_identity(b0)))
            .term(omega, LinMap::of(Atom::PartialTrace { dims: vec![b0, b1], keep: vec![0] }).then(Atom::Scale(-1.0))),
    );
    p.add_cone(
        "zeta",
        Expr::new(Space::Herm(nb))
            .var(omega)
            .term(alpha, contract.clone().then(Atom::Scale(-1.0)))
            .plus_const(Value::Herm(m.matrix().clone())),
    );
    p
}

fn conversion_dual(cone: &FreeCone, contract: &LinMap, m: &ChannelChoi) -> ConicProgram {
    let (b0, b1) = (m.sys.in_dim, m.sys.out_dim);
    let nb = b0 * b1;
    let n = cone.size();
    let mut p = ConicProgram::new(Sense::Maximize);
    let t = p.add_var("t", Space::Real(1), Domain::Free);
    let zeta = p.add_var("zeta", Space::Herm(nb), Domain::Cone);
    let eta = p.add_var("eta", Space::Herm(b0), Domain::Cone);
    p.add_objective(t, Value::scalar(cone.normalization));
    p.add_objective(zeta, Value::Herm(-m.matrix().clone()));
    p.add_cone(
        "bound",
        Expr::new(Space::Herm(nb))
            .term(eta, LinMap::of(Atom::Embed { dims: vec![b0, b1], keep: vec![0] }))
            .term(zeta, LinMap::of(Atom::Scale(-1.0))),
    );
    p.add_equality(
        "eta_trace",
        Expr::new(Space::Real(1))
            .term(eta, LinMap::of(Atom::TraceWith(Arc::new(eye(b0)))))
            .plus_const(Value::scalar(-1.0)),
    );
    let expr = Expr::new(Space::Herm(n))
        .term(zeta, contract.adjoint())
        .term(t, LinMap::of(times_identity(n)).then(Atom::Scale(-1.0)));
    let expr = dual_cone_terms(&mut p, cone, expr);
    p.add_cone("witness", expr);
    p
}

/// Dual variables of a conversion-distance solve and the dual-cone element
/// they define.
#[derive(Debug, Clone)]
pub struct ConversionWitness {
    pub zeta: Mat,
    pub eta: Mat,
    pub t: f64,
    /// `t|A₁B₀| − tr[ζ J^M]` re-evaluated from the variables.
    pub objective: f64,
    /// `W = (J^N)ᵀ ⊗ ζ − tI` with its certificate of membership in `𝔎*`.
    pub cone: DualConeWitness,
}

/// Reads the witness off a dual conversion solve with positive value.
pub fn extract_witness(
    n: &ChannelChoi,
    m: &ChannelChoi,
    theory: &TheorySpec,
    bound: &Bound,
) -> Result<ConversionWitness> {
    let r = bound.dual.as_ref().ok_or_else(|| Error::Argument("no dual solve to read a witness from".into()))?;
    if r.primal <= ZERO_TOL {
        return Err(Error::Argument(format!(
            "distance {:.3e} is zero within tolerance; there is nothing to witness",
            r.primal
        )));
    }
    let cone = superchannel_cone(theory, n, m.sys)?;
    let zeta = herm(r, "zeta");
    let eta = herm(r, "eta");
    let t = scalar(r, "t");
    let objective = t * cone.normalization - inner(&zeta, m.matrix());
    let w = kron(&n.matrix().transpose(), &zeta) - eye(cone.size()) * c(t);
    let cert = cone.dual_membership(&w)?;
    Ok(ConversionWitness { zeta, eta, t, objective, cone: cert })
}

/// A channel `P̃` on the target system with `f_P̃(N) < f_P̃(M)`.
///
/// The witness gives `⟨ζ, Θ[N]⟩ ≥ t|A₁B₀| > ⟨ζ, M⟩` for every free `Θ`, so
/// `−ζ` separates. It is moved into the channel set by
/// `P̃ = I ⊗ u + ε(−ζ + ζ_{B₀} ⊗ u)` with `u = I/|B₁|`, which changes
/// `⟨·, M⟩` on channels only by a constant and a positive factor.
pub fn witness_channel(w: &ConversionWitness, target: SystemPair) -> Result<ChannelChoi> {
    let (b0, b1) = (target.in_dim, target.out_dim);
    let pp = -&w.zeta;
    let marginal = tensor::partial_trace(&pp, &[b0, b1], &[0])?;
    let dev = &pp - kron(&marginal, &(eye(b1) / c(b1 as f64)));
    let spread = min_eig(&dev).abs();
    let eps = if spread > 0.0 { 0.5 / (b1 as f64 * spread) } else { 1.0 };
    let m = eye(b0 * b1) / c(b1 as f64) + dev * c(eps);
    ChannelChoi::new(target, herm_part(&m))
}

/// Values of the conversion primal variable, for callers that want the
/// optimal free superchannel.
pub fn optimal_superchannel(bound: &Bound) -> Option<Mat> {
    bound.primal.as_ref().map(|r| herm(r, "alpha"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supermap::apply_superchannel;
    use crate::theory::{sample_free_superchannel, Factorization, Parties};
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn settings() -> IpmSettings {
        IpmSettings::default()
    }

    /// A: a qubit wire from α to β. B: a two-qubit state shared by α|β.
    fn wire_to_state() -> TheorySpec {
        TheorySpec::ppt(Parties {
            a0: Factorization::alpha(2),
            a1: Factorization::beta(2),
            b0: Factorization::alpha(1),
            b1: Factorization::split(2, 2),
        })
        .unwrap()
    }

    /// Qubit wires from α to β on both sides.
    fn wires() -> TheorySpec {
        TheorySpec::ppt(Parties {
            a0: Factorization::alpha(2),
            a1: Factorization::beta(2),
            b0: Factorization::alpha(2),
            b1: Factorization::beta(2),
        })
        .unwrap()
    }

    fn bell() -> ChannelChoi {
        ChannelChoi::preparation(&(phi_plus(2) / c(2.0))).unwrap()
    }

    /// Smallest trace distance from the Bell state to a PPT state on the
    /// Werner line `p Φ + (1 − p)(I − Φ)/3`. Twirling maps every state onto
    /// this line without increasing the distance to `Φ`.
    fn werner_oracle() -> f64 {
        let phi = phi_plus(2) / c(2.0);
        let rest = (eye(4) - &phi) / c(3.0);
        let mut best = f64::INFINITY;
        for k in 0..=1000 {
            let p = k as f64 / 1000.0;
            let rho = &phi * c(p) + &rest * c(1.0 - p);
            let ppt = min_eig(&tensor::partial_transpose(&rho, &[2, 2], &[1]).unwrap()) >= -1e-12;
            if ppt {
                best = best.min(0.5 * trace_norm(&(&rho - &phi)));
            }
        }
        best
    }

    #[test]
    fn werner_line_oracle_value() {
        assert!((werner_oracle() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_to_bell_under_ppt() {
        let t = wire_to_state();
        let dep = ChannelChoi::depolarizing(2, 2);
        let b = conversion_distance(&dep, &bell(), &t, Form::Both, &settings()).unwrap();
        assert!((b.value - 0.5).abs() < 1e-6, "{}", b.value);
        assert!(b.gap().unwrap() < 1e-6, "{:?}", b.gap());

        let w = extract_witness(&dep, &bell(), &t, &b).unwrap();
        let reported = b.dual.as_ref().unwrap().primal;
        assert!((w.objective - reported).abs() < 1e-7);
        assert!((w.objective - 0.5).abs() < 1e-6);
        assert!(w.cone.is_member(1e-7), "margin {}", w.cone.margin);

        // W is nonnegative on free superchannels
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let theta = sample_free_superchannel(&t, dep.sys, bell().sys, &mut rng).unwrap();
            assert!(inner(&w.cone.w, theta.matrix()) >= -1e-7);
        }

        // and the derived channel separates N from M
        let p = witness_channel(&w, bell().sys).unwrap();
        assert!(validate_channel(&p).valid);
        let fn_ = monotone_f(&dep, &p, &t, Form::Primal, &settings()).unwrap().value;
        let fm = monotone_f(&bell(), &p, &t, Form::Primal, &settings()).unwrap_err();
        // M lives on B, so f_P(M) needs a B → B cone
        assert!(matches!(fm, Error::Dimension(_)));
        let t_bb = TheorySpec::ppt(Parties {
            a0: Factorization::alpha(1),
            a1: Factorization::split(2, 2),
            b0: Factorization::alpha(1),
            b1: Factorization::split(2, 2),
        })
        .unwrap();
        let t_ab = wire_to_state();
        let fn_ab = monotone_f(&dep, &p, &t_ab, Form::Primal, &settings()).unwrap().value;
        let fm_bb = monotone_f(&bell(), &p, &t_bb, Form::Primal, &settings()).unwrap().value;
        assert_eq!(fn_, fn_ab);
        assert!(fn_ab < fm_bb - 1e-4, "{fn_ab} vs {fm_bb}");
    }

    #[test]
    fn witness_needs_positive_distance() {
        let t = wires();
        let n = ChannelChoi::identity(2);
        let b = conversion_distance(&n, &n, &t, Form::Both, &settings()).unwrap();
        assert!(b.zero_within_tolerance(), "{}", b.value);
        assert!(matches!(extract_witness(&n, &n, &t, &b), Err(Error::Argument(_))));
    }

    #[test]
    fn everything_converts_in_the_all_theory() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sys = SystemPair::new(2, 2);
        let n = random_channel(sys, 1, &mut rng).unwrap();
        let m = random_channel(sys, 2, &mut rng).unwrap();
        let b = conversion_distance(&n, &m, &TheorySpec::all(), Form::Both, &settings()).unwrap();
        assert!(b.value.abs() < 1e-7 && b.gap().unwrap() < 1e-6);
    }

    /// `½‖U·U† − V·V†‖_⋄ = √(1 − r²)` with `r` the distance from the origin
    /// to the numerical range of `U†V`, here a segment between two phases.
    fn unitary_pair_oracle(theta: f64) -> f64 {
        let (a, b) = (C64::from_polar(1.0, -theta / 2.0), C64::from_polar(1.0, theta / 2.0));
        let r = (0..=100_000)
            .map(|k| {
                let s = k as f64 / 100_000.0;
                (a * s + b * (1.0 - s)).norm()
            })
            .fold(f64::INFINITY, f64::min);
        libm::sqrt(1.0 - r * r)
    }

    #[test]
    fn diamond_identity_vs_rotation() {
        // frozen from the numerical-range oracle
        #[allow(clippy::approx_constant)]
        let frozen = [(PI / 2.0, 0.707106781), (PI, 1.0)];
        for (theta, v) in frozen {
            assert!((unitary_pair_oracle(theta) - v).abs() < 1e-8);
            let rz = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![
                C64::from_polar(1.0, -theta / 2.0),
                C64::from_polar(1.0, theta / 2.0),
            ]));
            let d =
                diamond_distance(&ChannelChoi::identity(2), &ChannelChoi::unitary(&rz).unwrap(), &settings()).unwrap();
            assert!((d.value - v).abs() < 1e-6, "{} vs {v}", d.value);
            assert!(d.disagreement() < 1e-6);
        }
    }

    #[test]
    fn diamond_of_preparations_is_trace_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r1 = random_density(3, 2, &mut rng);
        let r2 = random_density(3, 3, &mut rng);
        let e = ChannelChoi::preparation(&r1).unwrap();
        let f = ChannelChoi::preparation(&r2).unwrap();
        let d = diamond_distance(&e, &f, &settings()).unwrap();
        let td = 0.5 * trace_norm(&(&r1 - &r2));
        assert!((d.value - td).abs() < 1e-8, "{} vs {td}", d.value);
        assert!(diamond_distance(&e, &e, &settings()).unwrap().value.abs() < 1e-8);
        let back = diamond_distance(&f, &e, &settings()).unwrap();
        assert!((back.value - d.value).abs() < 1e-7);
    }

    #[test]
    fn replacement_functional_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = SystemPair::new(2, 2);
        let n = random_channel(sys, 2, &mut rng).unwrap();
        let p = ChannelChoi::depolarizing(2, 2);
        for t in [TheorySpec::all(), wires()] {
            let b = monotone_f(&n, &p, &t, Form::Both, &settings()).unwrap();
            assert!((b.value - 1.0).abs() < 1e-7, "{}", b.value);
            assert!(b.gap().unwrap() < 1e-6);
        }
    }

    #[test]
    fn identity_pair_under_ppt() {
        let t = wires();
        let id = ChannelChoi::identity(2);
        let b = monotone_f(&id, &id, &t, Form::Both, &settings()).unwrap();
        // the identity superchannel is free and tr[φ⁺φ⁺] = 4 is the maximum
        assert!((b.value - 4.0).abs() < 1e-6, "{}", b.value);
        assert!(b.gap().unwrap() < 1e-6);
        // independent route: mechanical dual of the primal program
        let cone = FreeCone::superchannel(&t, id.sys, id.sys).unwrap();
        let k = kron(&id.matrix().transpose(), id.matrix());
        let (pr, du) = conic::solve_pair(&f_primal(&cone, &k), &settings()).unwrap();
        assert!((du.primal - 4.0).abs() < 1e-6 && (pr.primal - 4.0).abs() < 1e-6);

        // PPT channels from α to β reach singlet fraction 1/2
        let g = g_value(&id, &t, &settings()).unwrap();
        assert!((g.value - 2.0).abs() < 1e-6, "{}", g.value);
        let s = shifted_monotone(&id, &id, &t, Form::Primal, &settings()).unwrap();
        assert!((s.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn all_theory_monotone_is_the_channel_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = SystemPair::new(2, 2);
        let p = random_channel(sys, 2, &mut rng).unwrap();
        let g = g_value(&p, &TheorySpec::all(), &settings()).unwrap().value;
        for _ in 0..2 {
            let n = random_channel(sys, 2, &mut rng).unwrap();
            let f = monotone_f(&n, &p, &TheorySpec::all(), Form::Both, &settings()).unwrap();
            assert!((f.value - g).abs() < 1e-6 && f.gap().unwrap() < 1e-6);
        }
    }

    #[test]
    fn free_superchannels_do_not_increase_f() {
        let t = wires();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sys = SystemPair::new(2, 2);
        let n = random_channel(sys, 2, &mut rng).unwrap();
        let p = random_channel(sys, 2, &mut rng).unwrap();
        let fnv = monotone_f(&n, &p, &t, Form::Primal, &settings()).unwrap().value;
        for _ in 0..5 {
            let theta = sample_free_superchannel(&t, sys, sys, &mut rng).unwrap();
            let m = apply_superchannel(&theta, &n).unwrap();
            let fm = monotone_f(&m, &p, &t, Form::Primal, &settings()).unwrap().value;
            assert!(fm <= fnv + 1e-6);
            let d = conversion_distance(&n, &m, &t, Form::Primal, &settings()).unwrap();
            assert!(d.zero_within_tolerance(), "{}", d.value);
        }
    }
}
