use super::{JacobiOptions, JacobiSystem};
use crate::error::{Error, Result};
use crate::geodesics::{geodesic_bvp, Connection, ShootingOptions};
use crate::linalg::{Mat, Vector};
use crate::riemann::{christoffel, MetricField};

/// Covariant Hessian of `dist(p, ·)` at `q`.
#[derive(Debug, Clone)]
pub struct DistanceHessian {
    /// Entries `Hess(f_a, f_b)` in the basis `frame`.
    pub matrix: Mat,
    /// The basis at `q` (default: transported frame then the radial direction last).
    pub frame: Vec<Vec<f64>>,
    pub distance: f64,
}

fn frame_matrix(sys: &JacobiSystem) -> Mat {
    // columns E₁(L) … E_m(L), γ̇(L)
    let end = sys.geodesic.end();
    let frame = sys.geodesic.frame.as_ref().expect("framed").last().expect("non-empty");
    let n = end.vel.len();
    let mut e = Mat::zeros(n, n);
    for (k, f) in frame.iter().enumerate() {
        e.set_column(k, &Vector::from_column_slice(f));
    }
    e.set_column(n - 1, &Vector::from_column_slice(&end.vel));
    e
}

fn padded(block: &Mat, n: usize) -> Mat {
    let mut h = Mat::zeros(n, n);
    h.view_mut((0, 0), (n - 1, n - 1)).copy_from(block);
    h
}

/// Hessian of `y ↦ dist(p, y)` at `q` from the Jacobi system along the connecting
/// geodesic. With `frame_q` the result is expressed in that g-orthonormal basis.
pub fn hessian_distance(
    m: &MetricField,
    p: &[f64],
    q: &[f64],
    frame_q: Option<&[Vec<f64>]>,
    opts: &ShootingOptions,
) -> Result<DistanceHessian> {
    let n = m.dim();
    let conn = geodesic_bvp(m, p, q, opts)?;
    let sys = JacobiSystem::along(
        m,
        p,
        &conn.velocity,
        None,
        conn.distance,
        &JacobiOptions { order: 1, ..Default::default() },
    )?;
    let hb = padded(&sys.end_hessian()?, n);
    let e = frame_matrix(&sys);
    match frame_q {
        None => {
            let frame = (0..n).map(|k| e.column(k).iter().copied().collect()).collect();
            Ok(DistanceHessian { matrix: hb, frame, distance: conn.distance })
        }
        Some(f) => {
            if f.len() != n || f.iter().any(|v| v.len() != n) {
                return Err(Error::Invalid(format!("frame at q needs {n} vectors of length {n}")));
            }
            let g = m.eval(q)?;
            let mut fm = Mat::zeros(n, n);
            for (k, v) in f.iter().enumerate() {
                fm.set_column(k, &Vector::from_column_slice(v));
            }
            if (fm.transpose() * &g * &fm - Mat::identity(n, n)).amax() > 1e-8 {
                return Err(Error::Invalid("frame at q must be g-orthonormal".into()));
            }
            // components of f_a in the basis E: c = Eᵀ g f
            let c = e.transpose() * &g * &fm;
            let matrix = c.transpose() * hb * c;
            Ok(DistanceHessian { matrix, frame: f.to_vec(), distance: conn.distance })
        }
    }
}

/// Value and coordinate derivatives of `Φ(p, q) = dist(p, q)` up to second order,
/// together with the Jacobi system along the connecting geodesic (its series in
/// `s` describes moving `p` along the geodesic toward `q`).
#[derive(Debug, Clone)]
pub struct DistanceJets {
    pub value: f64,
    pub grad_start: Vec<f64>,
    pub grad_end: Vec<f64>,
    /// `∂_{q_a}∂_{q_b}Φ` in chart coordinates.
    pub hess_end: Mat,
    /// `∂_{p_k}∂_{q_a}Φ` (row `k`, column `a`).
    pub mixed: Mat,
    /// `g(q)_{ab} ⟨∂_{q_a}, E_k(L)⟩`: chart-to-frame contraction at `q` (n × (n−1)).
    pub end_contraction: Mat,
    pub system: JacobiSystem,
    pub connection: Connection,
}

pub fn distance_jets(
    m: &MetricField,
    p: &[f64],
    q: &[f64],
    shoot: &ShootingOptions,
    jopts: &JacobiOptions,
) -> Result<DistanceJets> {
    let n = m.dim();
    let conn = geodesic_bvp(m, p, q, shoot)?;
    let sys = JacobiSystem::along(m, p, &conn.velocity, None, conn.distance, jopts)?;
    let st = sys.geodesic.start();
    let end = sys.geodesic.end();
    let gp = m.eval(p)?;
    let gq = m.eval(q)?;
    let grad_start: Vec<f64> = (&gp * Vector::from_column_slice(&st.vel)).iter().map(|x| -x).collect();
    let grad_end: Vec<f64> = (&gq * Vector::from_column_slice(&end.vel)).iter().copied().collect();

    let e = frame_matrix(&sys);
    let c = &gq * &e;
    let hcov = &c * padded(&sys.end_hessian()?, n) * c.transpose();
    let gam = christoffel(m, q)?;
    let mut hess_end = hcov;
    for a in 0..n {
        for b in 0..n {
            hess_end[(a, b)] += (0..n).map(|k| gam.get(k, a, b) * grad_end[k]).sum::<f64>();
        }
    }

    let frames = sys.geodesic.frame.as_ref().expect("framed");
    let mut e0 = Mat::zeros(n, n - 1);
    for (k, f) in frames[0].iter().enumerate() {
        e0.set_column(k, &Vector::from_column_slice(f));
    }
    let cp = &gp * e0;
    let cq = c.columns(0, n - 1).into_owned();
    let b2inv_t = sys
        .end()
        .b2
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("B₂(L) (conjugate point?)".into()))?
        .transpose();
    let mixed = -(&cp * b2inv_t * cq.transpose());
    Ok(DistanceJets {
        value: conn.distance,
        grad_start,
        grad_end,
        hess_end,
        mixed,
        end_contraction: cq,
        system: sys,
        connection: conn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::distance;

    #[test]
    fn euclidean_hessian() {
        let m = MetricField::euclidean(3).unwrap();
        let q = [0.0, 0.0, 0.4];
        let f = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let h = hessian_distance(&m, &[0.0; 3], &q, Some(&f), &Default::default()).unwrap();
        let want = Mat::from_diagonal(&Vector::from_vec(vec![2.5, 2.5, 0.0]));
        assert!((h.matrix - want).amax() < 1e-9);
    }

    #[test]
    fn sphere_hessian() {
        let m = MetricField::constant_curvature(3, 1.0).unwrap();
        let h = hessian_distance(&m, &[0.0; 3], &[0.1, 0.2, 0.15], None, &Default::default()).unwrap();
        let c = 1.0 / h.distance.tan();
        assert!(
            (h.matrix[(0, 0)] - c).abs() < 1e-6 && (h.matrix[(1, 1)] - c).abs() < 1e-6 && h.matrix[(0, 1)].abs() < 1e-6
        );
        assert!(h.matrix.row(2).amax() < 1e-12);
    }

    // second differences of the distance itself
    fn fd_second(m: &MetricField, p: &[f64], q: &[f64], a: (bool, usize), b: (bool, usize)) -> f64 {
        let h = 1e-3;
        let opts = ShootingOptions { steps: Some(128), ..Default::default() };
        let mut acc = 0.0;
        for (sa, sb, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
            let (mut pp, mut qq) = (p.to_vec(), q.to_vec());
            for (side, idx, sgn) in [(a.0, a.1, sa), (b.0, b.1, sb)] {
                if side {
                    qq[idx] += sgn * h;
                } else {
                    pp[idx] += sgn * h;
                }
            }
            acc += w * distance(m, &pp, &qq, &opts).unwrap();
        }
        acc / (4.0 * h * h)
    }

    #[test]
    fn coordinate_derivatives_match_differences() {
        let m = MetricField::perturbed_standard();
        let p = [0.05, -0.1, -0.1];
        let q = [0.1, 0.02, 0.15];
        let jets = distance_jets(&m, &p, &q, &Default::default(), &Default::default()).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let hh = fd_second(&m, &p, &q, (true, a), (true, b));
                assert!((jets.hess_end[(a, b)] - hh).abs() < 1e-4, "end {a}{b}: {} vs {hh}", jets.hess_end[(a, b)]);
                let hm = fd_second(&m, &p, &q, (false, a), (true, b));
                assert!((jets.mixed[(a, b)] - hm).abs() < 1e-4, "mixed {a}{b}: {} vs {hm}", jets.mixed[(a, b)]);
            }
        }
    }
}
