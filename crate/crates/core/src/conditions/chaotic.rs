use rayon::prelude::*;

use super::{ConditionReport, ReportBuilder, Rule};
use crate::error::{Error, Result};
use crate::geodesics::default_frame;
use crate::jacobi::{curvature_matrix_at, frame_taylor};
use crate::linalg::{Mat, Vector};
use crate::riemann::{curvature, MetricField};

#[derive(Debug, Clone, Copy)]
pub struct ChaoticOptions {
    pub directions: usize,
    /// Threshold on `min_c |q₁(c)| + |q₂(c)|` over the unit circle.
    pub tau_c: f64,
    pub circle_points: usize,
    /// Stencil spacing for derivatives along the geodesic.
    pub step: f64,
}

impl Default for ChaoticOptions {
    fn default() -> Self {
        ChaoticOptions { directions: 64, tau_c: 1e-6, circle_points: 720, step: 0.02 }
    }
}

/// `n` near-uniform unit vectors on S².
pub fn fibonacci_directions(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Binary quadratics `q(c) = a c₁² + b c₁c₂ + d c₂²`, stored `[a, b, d]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPair {
    pub q1: [f64; 3],
    pub q2: [f64; 3],
}

fn eval_q(q: &[f64; 3], c1: f64, c2: f64) -> f64 {
    q[0] * c1 * c1 + q[1] * c1 * c2 + q[2] * c2 * c2
}

/// The pair built from transverse second derivatives `h = (h₁₁, h₁₂, h₂₂)` of `g₃₃`
/// and their derivatives `h′` along the axis:
/// `q₁ = (c₂² − c₁²)h₁₂ + c₁c₂(h₁₁ − h₂₂)`, `q₂` likewise from `h′`.
pub fn quadratic_pair(h: [f64; 3], dh: [f64; 3]) -> QuadraticPair {
    let f = |v: [f64; 3]| [-v[1], v[0] - v[2], v[1]];
    QuadraticPair { q1: f(h), q2: f(dh) }
}

impl QuadraticPair {
    pub fn circle_min(&self, points: usize) -> f64 {
        (0..points)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / points as f64;
                let (s, c) = th.sin_cos();
                eval_q(&self.q1, c, s).abs() + eval_q(&self.q2, c, s).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn resultant(&self) -> f64 {
        let [a1, b1, d1] = self.q1;
        let [a2, b2, d2] = self.q2;
        (a1 * d2 - a2 * d1).powi(2) - (a1 * b2 - a2 * b1) * (b1 * d2 - b2 * d1)
    }

    /// Whether the two forms share a real root direction (resultant test).
    pub fn share_real_root(&self, rel_tol: f64) -> bool {
        let n1 = self.q1.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n2 = self.q2.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = n1.max(n2);
        if scale == 0.0 || n1 <= rel_tol * scale || n2 <= rel_tol * scale {
            // one form vanishes: every root of the other is shared
            let q = if n1 >= n2 { self.q1 } else { self.q2 };
            return scale == 0.0 || q[1] * q[1] - 4.0 * q[0] * q[2] >= 0.0;
        }
        if self.resultant().abs() > rel_tol * (n1 * n2).powi(2) {
            return false;
        }
        // proportional forms share both roots, real iff the discriminant allows
        let cross = [
            self.q1[0] * self.q2[1] - self.q1[1] * self.q2[0],
            self.q1[0] * self.q2[2] - self.q1[2] * self.q2[0],
            self.q1[1] * self.q2[2] - self.q1[2] * self.q2[1],
        ];
        if cross.iter().all(|c| c.abs() <= rel_tol * n1 * n2) {
            return self.q1[1] * self.q1[1] - 4.0 * self.q1[0] * self.q1[2] >= 0.0;
        }
        true
    }
}

fn triple(a: &Mat) -> [f64; 3] {
    [a[(0, 0)], a[(0, 1)], a[(1, 1)]]
}

struct DirectionOutcome {
    fermi_min: f64,
    ricci_min: f64,
    resultant_fails: bool,
}

fn examine(m: &MetricField, p: &[f64], dir: &[f64; 3], opts: &ChaoticOptions) -> Result<DirectionOutcome> {
    let g = m.eval(p)?;
    let d = Vector::from_column_slice(dir);
    let norm = (d.transpose() * &g * &d)[0].sqrt();
    let v: Vec<f64> = dir.iter().map(|x| x / norm).collect();
    let frame = default_frame(&g, &v)?;
    // transverse g₃₃ derivatives of the Fermi chart are −2R and −2R′
    let r = frame_taylor(m, p, &v, &frame, opts.step, 1, |x, vv, fr| curvature_matrix_at(m, x, vv, fr))?;
    let h = triple(&(&r[0] * -2.0));
    let dh = triple(&(&r[1] * -2.0));
    let fermi = quadratic_pair(h, dh);
    let ric = frame_taylor(m, p, &v, &frame, opts.step, 1, |x, _, fr| {
        let cd = curvature(m, x)?;
        Ok(Mat::from_fn(2, 2, |i, j| {
            let ei = Vector::from_column_slice(&fr[i]);
            let ej = Vector::from_column_slice(&fr[j]);
            (ei.transpose() * &cd.ricci * ej)[0]
        }))
    })?;
    let hr = triple(&(&ric[0] * -2.0));
    let dhr = triple(&(&ric[1] * -2.0));
    let ricci = quadratic_pair(hr, dhr);
    Ok(DirectionOutcome {
        fermi_min: fermi.circle_min(opts.circle_points),
        ricci_min: ricci.circle_min(opts.circle_points),
        resultant_fails: fermi.share_real_root(1e-9),
    })
}

/// Chaotic-curvature criterion at `p` over sampled geodesic directions.
pub fn chaotic_check(m: &MetricField, p: &[f64], opts: &ChaoticOptions) -> Result<ConditionReport> {
    if m.dim() != 3 {
        return Err(Error::Invalid("the chaotic-curvature criterion is stated for n = 3".into()));
    }
    if opts.directions == 0 || opts.circle_points < 8 || !(opts.tau_c > 0.0) {
        return Err(Error::Invalid("need directions ≥ 1, circle points ≥ 8 and τ_c > 0".into()));
    }
    let dirs = fibonacci_directions(opts.directions);
    let outs: Vec<Result<DirectionOutcome>> = dirs.par_iter().map(|d| examine(m, p, d, opts)).collect();
    let outs: Vec<DirectionOutcome> = outs.into_iter().collect::<Result<_>>()?;
    let fermi: Vec<f64> = outs.iter().map(|o| o.fermi_min).collect();
    let ricci: Vec<f64> = outs.iter().map(|o| o.ricci_min).collect();
    let disagree_ricci = outs.iter().filter(|o| (o.fermi_min > opts.tau_c) != (o.ricci_min > opts.tau_c)).count();
    let disagree_res = outs.iter().filter(|o| (o.fermi_min > opts.tau_c) == o.resultant_fails).count();
    let worst = fermi.iter().copied().fold(f64::INFINITY, f64::min);
    ReportBuilder::new("chaotic_check")
        .point(p.to_vec())
        .residual("min_over_directions", worst)
        .threshold("min_over_directions", opts.tau_c)
        .diag("directions", opts.directions as f64)
        .diag("circle_points", opts.circle_points as f64)
        .diag("fermi_minima", fermi)
        .diag("ricci_minima", ricci)
        .diag("ricci_disagreements", disagree_ricci as f64)
        .diag("resultant_disagreements", disagree_res as f64)
        .diag("metric", m.label())
        .build(Rule::AllAbove { residuals: vec!["min_over_directions".into()] })
}
