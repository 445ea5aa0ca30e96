use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::linalg::{spd_inverse, Mat, Vector};
use crate::riemann::metric::{MetricField, MetricJet};

/// Christoffel symbols `Γ^k_ij`, stored at `k·n² + i·n + j`.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub dim: usize,
    pub gamma: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.dim + i) * self.dim + j]
    }

    /// `Γ^k(u, v) = Σ Γ^k_ij u^i v^j`.
    pub fn contract(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    if u[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        s += self.gamma[(k * n + i) * n + j] * u[i] * v[j];
                    }
                }
                s
            })
            .collect()
    }
}

fn jet_matmul(a: &[Jet], b: &[Jet], n: usize) -> Vec<Jet> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut s = &a[i * n] * &b[j];
            for k in 1..n {
                s += &(&a[i * n + k] * &b[k * n + j]);
            }
            out.push(s);
        }
    }
    out
}

/// Inverse of a jet-valued SPD matrix via the Neumann series around its value.
pub fn jet_matrix_inverse(g: &[Jet], n: usize) -> Result<Vec<Jet>> {
    let g0 = Mat::from_fn(n, n, |i, j| g[i * n + j].value());
    let inv0 = spd_inverse(&g0)?;
    let zero = g[0].scale(0.0);
    let c = |m: &Mat| -> Vec<Jet> { (0..n * n).map(|k| zero.add_scalar(m[(k / n, k % n)])).collect() };
    let inv0j = c(&inv0);
    // N = -G0⁻¹ H, nilpotent past the jet order
    let h: Vec<Jet> = g.iter().map(|x| x.add_scalar(-x.value())).collect();
    let nmat: Vec<Jet> = jet_matmul(&inv0j, &h, n).into_iter().map(|x| -x).collect();
    let mut term = inv0j.clone();
    let mut acc = inv0j;
    for _ in 0..g[0].order() {
        term = jet_matmul(&nmat, &term, n);
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    Ok(acc)
}

/// Christoffel symbols as jets of order `order` (metric jets of order `order + 1`).
pub fn christoffel_jets(m: &MetricField, p: &[f64], order: usize) -> Result<Vec<Jet>> {
    let gj = m.jet_eval(p, order + 1)?;
    christoffel_from_metric_jet(&gj, order)
}

fn christoffel_from_metric_jet(gj: &MetricJet, order: usize) -> Result<Vec<Jet>> {
    let n = gj.dim;
    // dg[(m·n + k)·n + l] = ∂_l g_mk
    let mut dg = Vec::with_capacity(n * n * n);
    for mm in 0..n {
        for k in 0..n {
            for l in 0..n {
                dg.push(gj.get(mm, k).derivative(l)?);
            }
        }
    }
    let g_low: Vec<Jet> = gj.entries.iter().map(|x| x.truncate(order)).collect::<Result<_>>()?;
    let ginv = jet_matrix_inverse(&g_low, n)?;
    let d = |mm: usize, k: usize, l: usize| &dg[(mm * n + k) * n + l];
    let mut out: Vec<Jet> = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                if l < k {
                    let sym: Jet = out[(i * n + l) * n + k].clone();
                    out.push(sym);
                    continue;
                }
                let mut s = g_low[0].scale(0.0);
                for mm in 0..n {
                    let bracket = &(d(mm, k, l) + d(mm, l, k)) - d(k, l, mm);
                    s += &(&ginv[i * n + mm] * &bracket);
                }
                out.push(s.scale(0.5));
            }
        }
    }
    Ok(out)
}

pub fn christoffel(m: &MetricField, p: &[f64]) -> Result<Christoffel> {
    let n = m.dim();
    let gj = m.jet_eval(p, 1)?;
    let g0 = gj.value();
    let ginv = spd_inverse(&g0)?;
    let d = |mm: usize, k: usize, l: usize| -> f64 {
        let mut alpha = vec![0u8; n];
        alpha[l] = 1;
        gj.get(mm, k).coeff(&alpha).expect("order one")
    };
    let mut gamma = vec![0.0; n * n * n];
    for i in 0..n {
        for k in 0..n {
            for l in k..n {
                let mut s = 0.0;
                for mm in 0..n {
                    s += ginv[(i, mm)] * (d(mm, k, l) + d(mm, l, k) - d(k, l, mm));
                }
                gamma[(i * n + k) * n + l] = 0.5 * s;
                gamma[(i * n + l) * n + k] = 0.5 * s;
            }
        }
    }
    Ok(Christoffel { dim: n, gamma })
}

/// Connection and curvature at one point.
///
/// Convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` and
/// `R(X,Y,Z,W) = g(R(X,Y)Z, W)`, so sectional curvature is
/// `R(u,v,v,u)/(|u|²|v|² − g(u,v)²)` and the round sphere has `+1`.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub point: Vec<f64>,
    pub metric: Mat,
    pub christoffel: Christoffel,
    /// `R_abcd`, stored at `((a·n + b)·n + c)·n + d`.
    pub riemann: Vec<f64>,
    pub ricci: Mat,
}

impl CurvatureData {
    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    pub fn r(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim();
        self.riemann[((a * n + b) * n + c) * n + d]
    }

    /// `R(X, Y, Z, W)` for chart-component vectors.
    pub fn rm(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for a in 0..n {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if y[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    if z[c] == 0.0 {
                        continue;
                    }
                    let xyz = x[a] * y[b] * z[c];
                    for d in 0..n {
                        s += xyz * self.r(a, b, c, d) * w[d];
                    }
                }
            }
        }
        s
    }

    pub fn sectional(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let (uu, vv) = (Vector::from_column_slice(u), Vector::from_column_slice(v));
        let g = &self.metric;
        let guu = crate::linalg::gdot(g, &uu, &uu);
        let gvv = crate::linalg::gdot(g, &vv, &vv);
        let guv = crate::linalg::gdot(g, &uu, &vv);
        let area = guu * gvv - guv * guv;
        if !(area > 1e-14 * guu * gvv) {
            return Err(Error::Invalid("sectional curvature needs independent vectors".into()));
        }
        Ok(self.rm(u, v, v, u) / area)
    }

    /// Largest absolute component, the natural scale for symmetry checks.
    pub fn scale(&self) -> f64 {
        self.riemann.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }
}

pub fn curvature(m: &MetricField, p: &[f64]) -> Result<CurvatureData> {
    let n = m.dim();
    let gj = m.jet_eval(p, 2)?;
    let gam = christoffel_from_metric_jet(&gj, 1)?;
    let metric = gj.value();
    let g = |k: usize, i: usize, j: usize| gam[(k * n + i) * n + j].value();
    let dg = |k: usize, i: usize, j: usize, a: usize| {
        let mut alpha = vec![0u8; n];
        alpha[a] = 1;
        gam[(k * n + i) * n + j].coeff(&alpha).expect("order one")
    };
    let christoffel = Christoffel { dim: n, gamma: gam.iter().map(|x| x.value()).collect() };
    // up[((a·n + b)·n + c)·n + d] = dx^d(R(∂_a, ∂_b)∂_c)
    let mut up = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = dg(d, b, c, a) - dg(d, a, c, b);
                    for e in 0..n {
                        s += g(e, b, c) * g(d, a, e) - g(e, a, c) * g(d, b, e);
                    }
                    up[((a * n + b) * n + c) * n + d] = s;
                }
            }
        }
    }
    let mut riemann = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut s = 0.0;
                    for e in 0..n {
                        s += up[((a * n + b) * n + c) * n + e] * metric[(e, d)];
                    }
                    riemann[((a * n + b) * n + c) * n + d] = s;
                }
            }
        }
    }
    let ricci = Mat::from_fn(n, n, |y, z| (0..n).map(|a| up[((a * n + y) * n + z) * n + a]).sum());
    Ok(CurvatureData { point: p.to_vec(), metric, christoffel, riemann, ricci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::fd_partial;

    #[test]
    fn flat_connection_vanishes() {
        let m = MetricField::euclidean(3).unwrap();
        let c = curvature(&m, &[0.1, 0.2, 0.3]).unwrap();
        assert!(c.christoffel.gamma.iter().all(|g| *g == 0.0));
        assert!(c.riemann.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn appendix_christoffel_at_origin() {
        let m = MetricField::appendix_bourgain();
        let c = christoffel(&m, &[0.0, 0.0, 0.0]).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let want = if k == 0 && ((i, j) == (1, 2) || (i, j) == (2, 1)) { -1.0 } else { 0.0 };
                    assert!((c.get(k, i, j) - want).abs() < 1e-14, "Γ^{k}_{i}{j}");
                }
            }
        }
    }

    #[test]
    fn sphere_connection_at_origin_and_fd() {
        let m = MetricField::constant_curvature(3, 1.0).unwrap();
        let c = christoffel(&m, &[0.0; 3]).unwrap();
        assert!(c.gamma.iter().all(|g| g.abs() < 1e-15));
        // Γ^0_00 = -∂_0 log(1 + |x|²/4) for the conformal metric
        let p = [0.3, -0.2, 0.1];
        let c = christoffel(&m, &p).unwrap();
        let logc = |x: &[f64]| -(1.0 + (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).ln();
        let want = fd_partial(logc, &p, &[1, 0, 0], None).unwrap();
        assert!((c.get(0, 0, 0) - want).abs() < 1e-9);
    }

    #[test]
    fn constant_curvature_sectional() {
        for kappa in [1.0, -1.0, 0.5] {
            let m = MetricField::constant_curvature(3, kappa).unwrap();
            let c = curvature(&m, &[0.2, -0.3, 0.25]).unwrap();
            let k = c.sectional(&[1.0, 0.2, 0.0], &[0.0, 1.0, -0.7]).unwrap();
            assert!((k - kappa).abs() < 1e-10, "{kappa}: {k}");
            // Ric = (n - 1) κ g
            assert!((&c.ricci - &c.metric * (2.0 * kappa)).abs().max() < 1e-10);
        }
    }

    #[test]
    fn sectional_needs_independent_vectors() {
        let m = MetricField::euclidean(2).unwrap();
        let c = curvature(&m, &[0.0, 0.0]).unwrap();
        assert!(c.sectional(&[1.0, 0.0], &[2.0, 0.0]).is_err());
    }
}
