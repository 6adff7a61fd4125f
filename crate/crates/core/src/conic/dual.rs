//! Mechanical Lagrangian dual of a [`ConicProgram`].
//!
//! For `min Σ⟨C_j, v_j⟩ + c₀` with `v_j ∈ D_j`, equalities
//! `Σ_j 𝒜_ij v_j + e_i = 0` and cone constraints `Σ_j ℬ_lj v_j + f_l ∈ K_l`
//! the dual is
//!
//! `max c₀ − Σ⟨y_i, e_i⟩ − Σ⟨z_l, f_l⟩` over free `y_i` and `z_l ∈ K_l`
//! subject to `C_j − Σ 𝒜_ij* y_i − Σ ℬ_lj* z_l ∈ D_j*`.
//!
//! Maximization primals are handled by flipping signs, which yields
//! `min c₀ + Σ⟨y_i, e_i⟩ + Σ⟨z_l, f_l⟩` subject to
//! `−C_j − Σ 𝒜_ij* y_i − Σ ℬ_lj* z_l ∈ D_j*`.
//! Dual variables carry the names of the primal constraints they price,
//! and dual constraints carry the names of the primal variables.

use alloc::vec::Vec;

use super::model::*;
use crate::error::Result;

/// Builds the dual program.
pub fn dualize(p: &ConicProgram) -> Result<ConicProgram> {
    p.check()?;
    let (sense, sign) = match p.sense {
        Sense::Minimize => (Sense::Maximize, 1.0),
        Sense::Maximize => (Sense::Minimize, -1.0),
    };
    let mut d = ConicProgram::new(sense);
    d.objective_constant = p.objective_constant;
    let mut eq_vars = Vec::new();
    for con in &p.equalities {
        let v = d.add_var(&con.name, con.expr.space, Domain::Free);
        d.add_objective(v, con.expr.constant.scaled(-sign));
        eq_vars.push(v);
    }
    let mut cone_vars = Vec::new();
    for con in &p.cones {
        let v = d.add_var(&con.name, con.expr.space, Domain::Cone);
        d.add_objective(v, con.expr.constant.scaled(-sign));
        cone_vars.push(v);
    }
    for (j, var) in p.vars.iter().enumerate() {
        let mut expr = Expr::new(var.space);
        for (v, coeff) in &p.objective {
            if *v == j {
                expr.constant.add_assign(&coeff.scaled(sign));
            }
        }
        let groups = p.equalities.iter().zip(&eq_vars).chain(p.cones.iter().zip(&cone_vars));
        for (con, &dv) in groups {
            for (v, map) in &con.expr.terms {
                if *v == j {
                    expr.terms.push((dv, map.adjoint().then(Atom::Scale(-1.0))));
                }
            }
        }
        match var.domain {
            Domain::Free => d.add_equality(&var.name, expr),
            Domain::Cone => d.add_cone(&var.name, expr),
        }
    }
    Ok(d)
}
