use super::{hormander_check, ConditionReport, Diagnostic, PhaseField, ReportBuilder, Rule};
use crate::error::{Error, Result};
use crate::jacobi::det2_series;
use crate::linalg::{singular_values, Mat, Vector};
use crate::numerics::least_squares;

#[derive(Debug, Clone, Copy)]
pub struct ContactOptions {
    pub kmax: usize,
    /// Rank-4 threshold on `σ₄/σ₁` after per-row normalization.
    pub rank_tol: f64,
}

impl Default for ContactOptions {
    fn default() -> Self {
        ContactOptions { kmax: 6, rank_tol: 1e-6 }
    }
}

const FIT_HALF_WINDOW: f64 = 0.1;

/// Rows `𝔇, D₁₁, D₁₂, D₂₂` of the derivative orders `1..=kmax`, where
/// `𝔇 = det(D(t) − D(0))`, from the derivatives `D^{(k)}`, `k = 0..=kmax`.
pub fn contact_matrix(derivs: &[Mat]) -> Mat {
    let kmax = derivs.len() - 1;
    let mut fact = vec![1.0];
    for k in 1..=kmax {
        fact.push(fact[k - 1] * k as f64);
    }
    let mut coeffs: Vec<Mat> = derivs.iter().enumerate().map(|(k, d)| d / fact[k]).collect();
    coeffs[0] = Mat::zeros(2, 2);
    let det = det2_series(&coeffs);
    Mat::from_fn(4, kmax, |r, c| {
        let k = c + 1;
        match r {
            0 => det[k] * fact[k],
            1 => derivs[k][(0, 0)],
            2 => derivs[k][(0, 1)],
            _ => derivs[k][(1, 1)],
        }
    })
}

/// `σ₄/σ₁` of the first `k` columns after scaling each row to unit max-norm.
pub fn rank4_ratio(full: &Mat, k: usize) -> f64 {
    if k < 4 {
        return 0.0;
    }
    let mut a = full.columns(0, k).into_owned();
    for r in 0..4 {
        let s = a.row(r).amax();
        if s > 0.0 {
            a.row_mut(r).scale_mut(1.0 / s);
        }
    }
    let sv = singular_values(&a);
    if sv[0] == 0.0 {
        0.0
    } else {
        sv[3] / sv[0]
    }
}

// D^{(k)}(0), k = 0..=order, by least-squares polynomial fits to Newton samples of D(t).
fn fitted_derivatives(phi: &PhaseField, x: &[f64], y: &[f64], order: usize) -> Result<Vec<Mat>> {
    let deg = order + 2;
    let npts = 2 * (deg + 4) + 1;
    let half = (npts / 2) as i64;
    let ts: Vec<f64> = (-half..=half).map(|j| FIT_HALF_WINDOW * j as f64 / half as f64).collect();
    let mut samples = vec![Mat::zeros(2, 2); ts.len()];
    let base: Vec<f64> = x[..2].to_vec();
    for dir in [1i64, -1] {
        let mut guess = base.clone();
        let range: Vec<usize> =
            if dir > 0 { (half as usize..ts.len()).collect() } else { (0..=half as usize).rev().collect() };
        for j in range {
            let (pt, h) = phi.core_point(x, y, ts[j], &guess)?;
            guess = pt[..2].to_vec();
            samples[j] = h;
        }
    }
    let design = Mat::from_fn(ts.len(), deg + 1, |i, j| (ts[i] / FIT_HALF_WINDOW).powi(j as i32));
    let mut out = vec![Mat::zeros(2, 2); order + 1];
    for (a, b) in [(0, 0), (0, 1), (1, 1)] {
        let rhs = Vector::from_iterator(ts.len(), samples.iter().map(|h| h[(a, b)]));
        let (beta, _) = least_squares(&design, &rhs, 1e8)?;
        let mut fact = 1.0;
        for k in 0..=order {
            if k > 0 {
                fact *= k as f64;
            }
            let v = beta[k] * fact / FIT_HALF_WINDOW.powi(k as i32);
            out[k][(a, b)] = v;
            out[k][(b, a)] = v;
        }
    }
    Ok(out)
}

/// Contact order of `φ` at `(x; y)`: the least `k ≤ kmax` at which the
/// derivative matrix of `𝔇, D₁₁, D₁₂, D₂₂` along the core curve reaches rank 4.
pub fn contact_order(phi: &PhaseField, x: &[f64], y: &[f64], opts: &ContactOptions) -> Result<ConditionReport> {
    if phi.dim() != 3 {
        return Err(Error::Invalid("contact orders are defined for n = 3".into()));
    }
    if opts.kmax < 4 || opts.kmax > crate::jets::MAX_ORDER {
        return Err(Error::Invalid(format!("kmax must lie in 4..={}", crate::jets::MAX_ORDER)));
    }
    if !(opts.rank_tol > 0.0) {
        return Err(Error::Invalid("rank tolerance must be positive".into()));
    }
    let h = hormander_check(phi, x, y)?;
    if !h.holds() {
        return Err(Error::Invalid("nondegeneracy conditions fail at the base point".into()));
    }
    let (derivs, source, fit_gap) = match phi.distance_source() {
        None => {
            let jets = phi.core_hessian_derivatives(x, y, opts.kmax)?;
            let fit = fitted_derivatives(phi, x, y, 4.min(opts.kmax))?;
            let mut gap = 0.0f64;
            for k in 1..fit.len() {
                let scale = jets[k].amax().max(1.0);
                gap = gap.max((&fit[k] - &jets[k]).amax() / scale);
            }
            (jets, "core-curve jets", Some(gap))
        }
        Some(_) => {
            // along the connecting geodesic, parametrized by arclength
            let d = phi.distance_data(x, y, opts.kmax)?;
            let p = d.end_contraction.rows(0, 2).into_owned();
            let mut fact = 1.0;
            let derivs: Vec<Mat> = d
                .system
                .series
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    &p * f * p.transpose() * fact
                })
                .collect();
            (derivs, "Jacobi series along the connecting geodesic", None)
        }
    };
    let full = contact_matrix(&derivs);
    let mut b = ReportBuilder::new("contact_order").point([x, y].concat());
    let mut keys = Vec::new();
    let mut order = None;
    for k in 1..=opts.kmax {
        let ratio = rank4_ratio(&full, k);
        if k >= 3 {
            let key = format!("sigma4_ratio_k{k}");
            b = b.residual(&key, ratio).threshold(&key, opts.rank_tol);
            keys.push(key);
        }
        if order.is_none() && k >= 4 && ratio > opts.rank_tol {
            order = Some(k);
        }
    }
    b = b
        .diag("order", order.map(|k| Diagnostic::Number(k as f64)).unwrap_or_else(|| Diagnostic::from("none")))
        .diag("derivative_rows", &full)
        .diag("derivative_source", source)
        .diag("phase", phi.label());
    if let Some(g) = fit_gap {
        b = b.diag("fit_discrepancy", g);
    }
    b.build(Rule::AnyAbove { residuals: keys })
}

/// Order recorded in a contact report, `None` when the rank never reaches 4.
pub fn reported_order(r: &ConditionReport) -> Option<usize> {
    match r.diagnostics.get("order") {
        Some(super::Diagnostic::Number(k)) => Some(*k as usize),
        _ => None,
    }
}
