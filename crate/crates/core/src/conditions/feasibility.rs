use super::{check_band, hormander_check, ConditionReport, PhaseField, ReportBuilder, Rule};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::poly::Poly;

#[derive(Debug, Clone, Copy)]
pub struct FeasibilityOptions {
    /// Points per axis of the ξ-grid.
    pub grid: usize,
    /// The grid covers `[−half, half]²`.
    pub half: f64,
    /// Fit residuals below this are feasible.
    pub tol: f64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions { grid: 21, half: 0.3, tol: 1e-6 }
    }
}

// symmetric index pairs of a 3×3 Christoffel block
const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn quad(xd: &[f64; 3], k: usize) -> f64 {
    let (a, b) = PAIRS[k];
    if a == b {
        xd[a] * xd[a]
    } else {
        2.0 * xd[a] * xd[b]
    }
}

/// Whether the curves `∇_ξφ(x, t; ξ) = const` through `p` can all be geodesics of a
/// single metric, written as graphs over `t`. Tangent `u(ξ)` and acceleration `a(ξ)`
/// come from implicit differentiation; `a` must equal
/// `−Γ^μ(ẋ, ẋ) + u^μ Γ³(ẋ, ẋ)` with `ẋ = (u, 1)` for one set of Christoffel symbols at `p`.
pub fn phase_to_metric_feasibility(phi: &PhaseField, p: &[f64], opts: &FeasibilityOptions) -> Result<ConditionReport> {
    if phi.dim() != 3 {
        return Err(Error::Invalid("the feasibility test is stated for n = 3".into()));
    }
    let poly = phi
        .polynomial_form()
        .ok_or_else(|| Error::Invalid("the feasibility test needs a closed-form (polynomial) phase".into()))?;
    if p.len() != 3 {
        return Err(Error::Invalid("base point needs (x₁, x₂, t)".into()));
    }
    if opts.grid < 4 || !(opts.half > 0.0) {
        return Err(Error::Invalid("need a grid of at least 4 points per axis on a positive window".into()));
    }
    check_band(opts.tol, opts.tol)?;
    if !hormander_check(phi, p, &[0.0, 0.0])?.holds() {
        return Err(Error::Invalid("nondegeneracy conditions fail at the base point".into()));
    }
    // F_i = ∂_{ξ_i}φ; variables are (x₁, x₂, t, ξ₁, ξ₂)
    let f: Vec<Poly> = (0..2).map(|i| poly.derivative(3 + i)).collect();
    let d1: Vec<Vec<Poly>> = f.iter().map(|fi| (0..3).map(|k| fi.derivative(k)).collect()).collect();
    let d2: Vec<Vec<Vec<Poly>>> =
        d1.iter().map(|row| row.iter().map(|g| (0..3).map(|l| g.derivative(l)).collect()).collect()).collect();

    let n = opts.grid;
    let mut rows: Vec<[f64; 18]> = Vec::with_capacity(2 * n * n);
    let mut rhs: Vec<f64> = Vec::with_capacity(2 * n * n);
    let mut worst_cond = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let xi = [
                -opts.half + 2.0 * opts.half * a as f64 / (n - 1) as f64,
                -opts.half + 2.0 * opts.half * b as f64 / (n - 1) as f64,
            ];
            let z = [p[0], p[1], p[2], xi[0], xi[1]];
            let fx = Mat::from_fn(2, 2, |i, k| d1[i][k].eval(&z));
            let ft = Vector::from_fn(2, |i, _| d1[i][2].eval(&z));
            let lu = fx.clone().lu();
            let u = -lu.solve(&ft).ok_or_else(|| Error::Singular(format!("mixed Hessian at ξ = {xi:?}")))?;
            worst_cond = worst_cond.max(crate::linalg::condition_number(&fx));
            let xd = [u[0], u[1], 1.0];
            // second t-derivative of F along the curve, without the acceleration term
            let second = Vector::from_fn(2, |i, _| {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += d2[i][k][l].eval(&z) * xd[k] * xd[l];
                    }
                }
                s
            });
            let acc = -lu.solve(&second).ok_or_else(|| Error::Singular(format!("mixed Hessian at ξ = {xi:?}")))?;
            for mu in 0..2 {
                let mut row = [0.0; 18];
                for k in 0..6 {
                    row[6 * mu + k] = -quad(&xd, k);
                    row[12 + k] = u[mu] * quad(&xd, k);
                }
                rows.push(row);
                rhs.push(acc[mu]);
            }
        }
    }
    let design = Mat::from_fn(rows.len(), 18, |i, j| rows[i][j]);
    let b = Vector::from_vec(rhs);
    let bnorm = b.norm();
    let (residual, gamma) = if bnorm == 0.0 {
        (0.0, Vector::zeros(18))
    } else {
        // projective changes of Γ leave every graph unchanged; take the minimum-norm fit
        let svd = design.clone().svd(true, true);
        let cut = 1e-10 * svd.singular_values.max();
        let gamma = svd.solve(&b, cut).map_err(|e| Error::Singular(e.to_string()))?;
        ((&design * &gamma - &b).norm() / bnorm, gamma)
    };
    ReportBuilder::new("phase_to_metric_feasibility")
        .point(p.to_vec())
        .residual("fit_residual", residual)
        .band(opts.tol, opts.tol)
        .diag("christoffel_fit", gamma.as_slice().to_vec())
        .diag("acceleration_norm", bnorm)
        .diag("grid", n as f64)
        .diag("max_mixed_condition", worst_cond)
        .diag("phase", phi.label())
        .build(Rule::Band { residual: "fit_residual".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::Verdict;

    fn run(name: &str) -> ConditionReport {
        phase_to_metric_feasibility(&PhaseField::named(name).unwrap(), &[0.0; 3], &Default::default()).unwrap()
    }

    #[test]
    fn library_phases() {
        let b = run("bourgain");
        assert!(b.residuals["fit_residual"] < 1e-9, "{:?}", b.residuals);
        assert_eq!(b.verdict, Verdict::Holds);
        let x = run("xi5");
        assert!(x.residuals["fit_residual"] > 1e-2, "{:?}", x.residuals);
        assert_eq!(x.verdict, Verdict::Fails);
        let p = run("paraboloid");
        assert_eq!(p.residuals["fit_residual"], 0.0);
        assert_eq!(p.verdict, Verdict::Holds);
    }
}
