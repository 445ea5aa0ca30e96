use rayon::prelude::*;
use serde::Serialize;

use super::{JacobiOptions, JacobiSystem};
use crate::error::Result;
use crate::linalg::Mat;
use crate::numerics::least_squares;
use crate::riemann::{fermi_derivative_table, FermiTable, MetricField};

/// ε grid of the fifth-order fit (geometric, ratio √2).
pub const EPS5_GRID: [f64; 5] = [0.05, 0.05 * std::f64::consts::SQRT_2, 0.1, 0.1 * std::f64::consts::SQRT_2, 0.2];

/// `ε²·∂_s∂_{s′}A(0,ε) − I − R₀ε²/3 − R₀′ε³/6` in Frobenius norm.
pub fn expansion_remainder(sys: &JacobiSystem) -> f64 {
    let eps = sys.eps();
    let k = sys.codim();
    let r = &sys.curvature_taylor;
    let r1 = r.get(1).cloned().unwrap_or_else(|| Mat::zeros(k, k));
    let d = &sys.series[1] * (eps * eps) - Mat::identity(k, k) - &r[0] * (eps * eps / 3.0) - r1 * (eps.powi(3) / 6.0);
    d.norm()
}

/// Closed-form ε⁵ coefficient of the contact determinant from the Fermi table.
pub fn eps5_formula(t: &FermiTable) -> f64 {
    let [g11, g12, g22] = t.second;
    let [g113, g123, g223] = t.third;
    ((g11 - g22) * g123 - (g113 - g223) * g12) / 144.0
}

#[derive(Debug, Clone, Serialize)]
pub struct Eps5 {
    pub formula: f64,
    pub numerical: f64,
    pub fit_condition: f64,
    /// `(ε, det)` samples behind the fit.
    pub samples: Vec<(f64, f64)>,
}

/// 4×4 contact determinant at one ε: rows `W₁₁, W₁₂, W₂₂, det W` of the
/// `s¹…s⁴` coefficients of `ε·W(εs, ε)` along the axis of a Fermi chart.
pub fn contact_determinant(m: &MetricField, eps: f64) -> Result<f64> {
    let frame = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
    let opts = JacobiOptions { order: 4, ..Default::default() };
    let sys = JacobiSystem::along(m, &[0.0; 3], &[0.0, 0.0, 1.0], Some(&frame), eps, &opts)?;
    let p = sys.scaled_w_coefficients();
    let det = sys.det_expansion()?;
    let mut a = Mat::zeros(4, 4);
    for k in 1..=4 {
        a[(0, k - 1)] = p[k][(0, 0)];
        a[(1, k - 1)] = p[k][(0, 1)];
        a[(2, k - 1)] = p[k][(1, 1)];
        a[(3, k - 1)] = det[k];
    }
    Ok(a.determinant())
}

/// Formula value and least-squares ε⁵ coefficient of the contact determinant
/// (fit `c₅ε⁵ + c₆ε⁶ + c₇ε⁷` over [`EPS5_GRID`]). The metric must be in Fermi form
/// along the third coordinate axis.
pub fn eps5_coefficient(m: &MetricField) -> Result<Eps5> {
    let table = fermi_derivative_table(m, 0.0)?;
    let formula = eps5_formula(&table);
    let dets: Vec<Result<f64>> = EPS5_GRID.par_iter().map(|e| contact_determinant(m, *e)).collect();
    let mut samples = Vec::with_capacity(EPS5_GRID.len());
    for (e, d) in EPS5_GRID.iter().zip(dets) {
        samples.push((*e, d?));
    }
    let emax = EPS5_GRID[EPS5_GRID.len() - 1];
    let x = Mat::from_fn(samples.len(), 3, |i, j| (samples[i].0 / emax).powi(5 + j as i32));
    let y = crate::linalg::Vector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let (beta, cond) = least_squares(&x, &y, 1e8)?;
    Ok(Eps5 { formula, numerical: beta[0] / emax.powi(5), fit_condition: cond, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_on_library() {
        let t = fermi_derivative_table(&MetricField::perturbed_standard(), 0.0).unwrap();
        assert!((eps5_formula(&t) - 1.0 / 36.0).abs() < 1e-15);
        let t = fermi_derivative_table(&MetricField::euclidean(3).unwrap(), 0.0).unwrap();
        assert_eq!(eps5_formula(&t), 0.0);
    }

    #[test]
    fn flat_determinant_vanishes() {
        let m = MetricField::euclidean(3).unwrap();
        assert!(contact_determinant(&m, 0.1).unwrap().abs() < 1e-12);
    }
}
