//! Invariant measurements shared by the property suites and the acceptance run.
//! Each function returns the worst violation it sees; callers pick the tolerance.

#![allow(dead_code)]

use oscgeo::geodesics::{distance_gradient_at_end, geodesic_bvp, geodesic_ivp, geodesic_with_frame, ShootingOptions};
use oscgeo::jacobi::{distance_jets, JacobiOptions, JacobiSystem};
use oscgeo::jets::{fd_partial, Jet};
use oscgeo::linalg::{Mat, Vector};
use oscgeo::riemann::{christoffel, curvature};
use oscgeo::{MetricField, Result};

/// Three-dimensional library metrics with their names.
pub fn library_metrics() -> Vec<(&'static str, MetricField)> {
    vec![
        ("euclidean", MetricField::euclidean(3).unwrap()),
        ("sphere", MetricField::constant_curvature(3, 1.0).unwrap()),
        ("hyperbolic", MetricField::constant_curvature(3, -1.0).unwrap()),
        ("appendix_bourgain", MetricField::appendix_bourgain()),
        ("perturbed", MetricField::perturbed_standard()),
    ]
}

/// Library metrics written in Fermi coordinates along the `t` axis.
pub fn fermi_metrics() -> Vec<(&'static str, MetricField)> {
    vec![("euclidean", MetricField::euclidean(3).unwrap()), ("perturbed", MetricField::perturbed_standard())]
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

// ---------------------------------------------------------------- jets

pub fn random_jet(nvars: usize, order: usize, coeffs: &[f64]) -> Jet {
    let z = Jet::zero(nvars, order).unwrap();
    let terms: Vec<(Vec<u8>, f64)> = z.multi_indices().iter().cloned().zip(coeffs.iter().copied()).collect();
    Jet::from_terms(nvars, order, &terms).unwrap()
}

/// Worst coefficient gap of associativity and distributivity.
pub fn ring_law_error(a: &Jet, b: &Jet, c: &Jet) -> f64 {
    let ab_c = a.try_mul(b).unwrap().try_mul(c).unwrap();
    let a_bc = a.try_mul(&b.try_mul(c).unwrap()).unwrap();
    let lhs = a.try_mul(&b.try_add(c).unwrap()).unwrap();
    let rhs = a.try_mul(b).unwrap().try_add(&a.try_mul(c).unwrap()).unwrap();
    ab_c.max_abs_diff(&a_bc).max(lhs.max_abs_diff(&rhs))
}

/// `sin² + cos² − 1` over all coefficients.
pub fn pythagoras_error(a: &Jet) -> f64 {
    let s = a.sin();
    let c = a.cos();
    let one = s.try_mul(&s).unwrap().try_add(&c.try_mul(&c).unwrap()).unwrap();
    let want = Jet::constant(1.0, a.nvars(), a.order()).unwrap();
    one.max_abs_diff(&want)
}

/// Smooth test functions as `(name, on jets, on numbers)` over three variables.
pub type JetFn = fn(&[Jet]) -> Jet;
pub type NumFn = fn(&[f64]) -> f64;

pub fn smooth_functions() -> Vec<(&'static str, JetFn, NumFn)> {
    fn exp_j(v: &[Jet]) -> Jet {
        v[0].try_add(&v[1].scale(2.0)).unwrap().scale(0.7).exp().try_mul(&v[2].add_scalar(1.5)).unwrap()
    }
    fn exp_n(x: &[f64]) -> f64 {
        (0.7 * (x[0] + 2.0 * x[1])).exp() * (x[2] + 1.5)
    }
    fn sin_j(v: &[Jet]) -> Jet {
        v[0].try_mul(&v[1]).unwrap().try_add(&v[2]).unwrap().sin()
    }
    fn sin_n(x: &[f64]) -> f64 {
        (x[0] * x[1] + x[2]).sin()
    }
    fn rat_j(v: &[Jet]) -> Jet {
        let d = v[0].try_mul(&v[0]).unwrap().try_add(&v[1].try_mul(&v[1]).unwrap()).unwrap().add_scalar(9.0);
        v[2].add_scalar(2.0).try_div(&d).unwrap()
    }
    fn rat_n(x: &[f64]) -> f64 {
        (x[2] + 2.0) / (9.0 + x[0] * x[0] + x[1] * x[1])
    }
    vec![("exp", exp_j, exp_n), ("sin", sin_j, sin_n), ("rational", rat_j, rat_n)]
}

/// Largest `|partial − fd| / max(1e−5, 1e−3·|partial|)` over all multi-indices up to `order`.
pub fn jet_fd_ratio(fj: JetFn, fnum: NumFn, p: &[f64], order: usize) -> f64 {
    let vars = Jet::variables(p, order).unwrap();
    let j = fj(&vars);
    let mut worst = 0.0f64;
    for alpha in j.multi_indices() {
        let exact = j.partial(alpha).unwrap();
        let fd = fd_partial(fnum, p, alpha, None).unwrap();
        worst = worst.max((exact - fd).abs() / (1e-3 * exact.abs()).max(1e-5));
    }
    worst
}

// ---------------------------------------------------------------- curvature

/// Antisymmetries, pair symmetry and first Bianchi of `R_abcd`, relative to its scale.
pub fn curvature_identity_error(m: &MetricField, p: &[f64]) -> Result<f64> {
    let c = curvature(m, p)?;
    let n = c.dim();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    let r = c.r(a, b, cc, d);
                    worst = worst.max(max_abs([
                        r + c.r(b, a, cc, d),
                        r + c.r(a, b, d, cc),
                        r - c.r(cc, d, a, b),
                        r + c.r(a, cc, d, b) + c.r(a, d, b, cc),
                    ]));
                }
            }
        }
    }
    Ok(worst / c.scale().max(1.0))
}

/// Christoffel symbols from jets against central differences of the metric.
pub fn christoffel_fd_error(m: &MetricField, p: &[f64]) -> Result<f64> {
    let n = m.dim();
    let c = christoffel(m, p)?;
    let g = m.eval(p)?;
    let ginv = g.try_inverse().expect("metric invertible");
    // dg[k][(i, j)] = ∂_k g_ij
    let mut dg = vec![Mat::zeros(n, n); n];
    for k in 0..n {
        let mut alpha = vec![0u8; n];
        alpha[k] = 1;
        for i in 0..n {
            for j in 0..n {
                dg[k][(i, j)] = fd_partial(|x: &[f64]| m.eval(x).unwrap()[(i, j)], p, &alpha, Some(1e-3))?;
            }
        }
    }
    let mut worst = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += 0.5 * ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                }
                worst = worst.max((s - c.get(k, i, j)).abs());
            }
        }
    }
    Ok(worst)
}

/// `(|g − I|, |∂g|)` at the axis point `(0, 0, s)` of a Fermi chart.
pub fn fermi_axis_error(m: &MetricField, s: f64) -> Result<(f64, f64)> {
    let gj = m.jet_eval(&[0.0, 0.0, s], 1)?;
    let (mut value, mut first) = (0.0f64, 0.0f64);
    for i in 0..3 {
        for j in 0..3 {
            let e = gj.get(i, j);
            value = value.max((e.value() - if i == j { 1.0 } else { 0.0 }).abs());
            for a in 0..3 {
                let mut alpha = [0u8; 3];
                alpha[a] = 1;
                first = first.max(e.partial(&alpha)?.abs());
            }
        }
    }
    Ok((value, first))
}

/// On the axis of a Fermi chart, `R(∂_i, ∂_t, ∂_t, ∂_j) = −½ ∂_i∂_j g_tt` for `i, j ∈ {1, 2}`.
pub fn axis_curvature_identity_error(m: &MetricField, s: f64) -> Result<f64> {
    let p = [0.0, 0.0, s];
    let c = curvature(m, &p)?;
    let gj = m.jet_eval(&p, 2)?;
    let g33 = gj.get(2, 2);
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let mut alpha = [0u8; 3];
            alpha[i] += 1;
            alpha[j] += 1;
            worst = worst.max((c.r(i, 2, 2, j) + 0.5 * g33.partial(&alpha)?).abs());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------- distance

pub fn shoot() -> ShootingOptions {
    ShootingOptions::default()
}

/// `(|d(p,q) − d(q,p)|, triangle excess through r, |exp_p(v·L) − q|)`.
pub fn distance_checks(m: &MetricField, p: &[f64], q: &[f64], r: &[f64]) -> Result<(f64, f64, f64)> {
    let o = shoot();
    let pq = geodesic_bvp(m, p, q, &o)?;
    let qp = geodesic_bvp(m, q, p, &o)?;
    let pr = geodesic_bvp(m, p, r, &o)?.distance;
    let rq = geodesic_bvp(m, r, q, &o)?.distance;
    let back = geodesic_ivp(m, p, &pq.velocity, pq.distance, pq.geodesic.steps())?;
    let miss = back.end().pos.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(((pq.distance - qp.distance).abs(), (pq.distance - pr - rq).max(0.0), miss))
}

/// Variation of `∇_q dist(·, q)` as the start slides along the geodesic toward `q`.
pub fn gradient_variation(m: &MetricField, p: &[f64], q: &[f64], samples: usize) -> Result<f64> {
    let o = shoot();
    let conn = geodesic_bvp(m, p, q, &o)?;
    let g0 = distance_gradient_at_end(m, &conn)?;
    let n_nodes = conn.geodesic.samples.len();
    let mut worst = 0.0f64;
    for k in 1..samples {
        // stay clear of q itself
        let idx = k * (n_nodes - 1) * 8 / (10 * samples);
        let start = conn.geodesic.samples[idx].pos.clone();
        let c = geodesic_bvp(m, &start, q, &o)?;
        let g = distance_gradient_at_end(m, &c)?;
        worst = worst.max(max_abs(g.iter().zip(&g0).map(|(a, b)| a - b)));
    }
    Ok(worst)
}

/// `(‖H − Hᵀ‖/‖H‖, |Hess(γ̇, ·)|/‖H‖)` for the Hessian of `dist(p, ·)` at `q`;
/// the covariant Hessian is `∂²d − Γ^k ∂_k d`.
pub fn hessian_checks(m: &MetricField, p: &[f64], q: &[f64]) -> Result<(f64, f64)> {
    let d = distance_jets(m, p, q, &shoot(), &JacobiOptions { order: 1, ..Default::default() })?;
    let h = &d.hess_end;
    let scale = h.norm();
    let asym = (h - h.transpose()).norm() / scale;
    let c = christoffel(m, q)?;
    let n = m.dim();
    let cov = Mat::from_fn(n, n, |a, b| h[(a, b)] - (0..n).map(|k| c.get(k, a, b) * d.grad_end[k]).sum::<f64>());
    let v = Vector::from_column_slice(&d.connection.geodesic.end().vel);
    Ok((asym, (cov * v).norm() / scale))
}

/// `max |g(E_k, γ̇)|` and `max |g(E_j, E_k) − δ_jk|` for the transported normal frame.
pub fn frame_orthogonality(m: &MetricField, p: &[f64], v: &[f64], length: f64) -> Result<(f64, f64)> {
    let sol = geodesic_with_frame(m, p, v, length, 128, None)?;
    let frames = sol.frame.as_ref().expect("framed");
    let (mut orth, mut norm) = (0.0f64, 0.0f64);
    for (s, f) in sol.samples.iter().zip(frames) {
        let g = m.eval(&s.pos)?;
        let u = Vector::from_column_slice(&s.vel);
        for (j, e) in f.iter().enumerate() {
            let ev = Vector::from_column_slice(e);
            orth = orth.max(ev.dot(&(&g * &u)).abs());
            for (k, e2) in f.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                norm = norm.max((ev.dot(&(&g * Vector::from_column_slice(e2))) - want).abs());
            }
        }
    }
    Ok((orth, norm))
}

/// `|s⁰|, |s¹|` coefficients of `det(ε·W(εs, ε))`.
pub fn det_low_order(m: &MetricField, p: &[f64], v: &[f64], eps: f64) -> Result<f64> {
    let sys = JacobiSystem::along(m, p, v, None, eps, &JacobiOptions::default())?;
    let d = sys.det_expansion()?;
    Ok(d[0].abs().max(d[1].abs()))
}
