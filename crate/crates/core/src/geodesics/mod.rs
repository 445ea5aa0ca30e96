//! Geodesic initial- and boundary-value problems, parallel transport,
//! Fermi charts and the graph form of the geodesic equation.

mod fermi_chart;
mod graph;

pub use fermi_chart::FermiChart;
pub use graph::{graph_geodesic_residual, CoreCurve, GraphCurve, GraphResidual};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, g_orthonormalize, gdot, Mat, Vector};
use crate::riemann::{christoffel, MetricField};

/// Step count used for a geodesic of the given arclength.
pub fn default_steps(length: f64) -> usize {
    64usize.max((length / 0.005).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSample {
    pub s: f64,
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
}

/// A unit-speed geodesic sampled at uniform arclength, optionally carrying a
/// parallel orthonormal frame of the normal bundle (`n − 1` vectors per sample).
#[derive(Debug, Clone)]
pub struct GeodesicSolution {
    pub samples: Vec<GeodesicSample>,
    pub frame: Option<Vec<Vec<Vec<f64>>>>,
}

impl GeodesicSolution {
    pub fn length(&self) -> f64 {
        self.samples.last().map(|s| s.s).unwrap_or(0.0)
    }

    pub fn start(&self) -> &GeodesicSample {
        &self.samples[0]
    }

    pub fn end(&self) -> &GeodesicSample {
        self.samples.last().expect("non-empty")
    }

    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }
}

pub(crate) fn rk4<F>(f: &mut F, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, x: &[f64]| -> Vec<f64> { y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect() };
    let k1 = f(y)?;
    let k2 = f(&axpy(0.5 * h, &k1))?;
    let k3 = f(&axpy(0.5 * h, &k2))?;
    let k4 = f(&axpy(h, &k3))?;
    Ok((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Right-hand side of `(x, v, W₁…W_k)` with `x' = v`, `v' = −Γ(v,v)`, `W' = −Γ(v,W)`.
pub(crate) fn transport_rhs(m: &MetricField, y: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    let c = christoffel(m, &y[..n])?;
    let v = &y[n..2 * n];
    let mut out = Vec::with_capacity(y.len());
    out.extend_from_slice(v);
    out.extend(c.contract(v, v).into_iter().map(|a| -a));
    for w in y[2 * n..].chunks(n) {
        out.extend(c.contract(v, w).into_iter().map(|a| -a));
    }
    Ok(out)
}

pub(crate) fn unit_velocity(m: &MetricField, p: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != m.dim() {
        return Err(Error::Invalid(format!("velocity has {} components, expected {}", v.len(), m.dim())));
    }
    let g = m.eval(p)?;
    let vv = Vector::from_column_slice(v);
    let norm2 = gdot(&g, &vv, &vv);
    if !(norm2 > 0.0) || !norm2.is_finite() {
        return Err(Error::Invalid("initial velocity must have positive length".into()));
    }
    Ok(v.iter().map(|x| x / norm2.sqrt()).collect())
}

/// Integrates the joint geodesic/transport system from `y0` over `steps`
/// uniform steps of size `h`, returning every node.
pub(crate) fn integrate_nodes(m: &MetricField, y0: Vec<f64>, h: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut f = |y: &[f64]| transport_rhs(m, y);
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(y0);
    for _ in 0..steps {
        let next = rk4(&mut f, nodes.last().expect("non-empty"), h)?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::DomainExit(next[..m.dim()].to_vec()));
        }
        nodes.push(next);
    }
    Ok(nodes)
}

/// Fixed-step RK4 geodesic of the given arclength from `p` in direction `v`
/// (normalized to unit speed).
pub fn geodesic_ivp(m: &MetricField, p: &[f64], v: &[f64], length: f64, steps: usize) -> Result<GeodesicSolution> {
    solve(m, p, v, length, steps, None)
}

/// As [`geodesic_ivp`], also transporting an orthonormal frame of `γ̇^⊥`.
/// Without `frame0` the frame is Gram–Schmidt of the coordinate axes against `v`.
pub fn geodesic_with_frame(
    m: &MetricField,
    p: &[f64],
    v: &[f64],
    length: f64,
    steps: usize,
    frame0: Option<&[Vec<f64>]>,
) -> Result<GeodesicSolution> {
    let n = m.dim();
    let u = unit_velocity(m, p, v)?;
    let g = m.eval(p)?;
    let frame = match frame0 {
        Some(f) => {
            if f.len() != n - 1 || f.iter().any(|e| e.len() != n) {
                return Err(Error::Invalid(format!("frame needs {} vectors of length {n}", n - 1)));
            }
            let uv = Vector::from_column_slice(&u);
            for (i, e) in f.iter().enumerate() {
                let ev = Vector::from_column_slice(e);
                if (gdot(&g, &ev, &uv)).abs() > 1e-8 {
                    return Err(Error::Invalid("frame vectors must be orthogonal to the velocity".into()));
                }
                for (j, e2) in f.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    if (gdot(&g, &ev, &Vector::from_column_slice(e2)) - want).abs() > 1e-8 {
                        return Err(Error::Invalid("frame is not orthonormal".into()));
                    }
                }
            }
            f.to_vec()
        }
        None => default_frame(&g, &u)?,
    };
    solve(m, p, &u, length, steps, Some(frame))
}

/// Completes the unit vector `u` to a `g`-orthonormal basis; returns the complement.
pub fn default_frame(g: &Mat, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = u.len();
    let mut cands = vec![Vector::from_column_slice(u)];
    // coordinate axes, least aligned with u first
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|a, b| u[*a].abs().partial_cmp(&u[*b].abs()).unwrap_or(std::cmp::Ordering::Equal));
    axes.truncate(n - 1);
    axes.sort();
    for a in axes {
        let mut e = Vector::zeros(n);
        e[a] = 1.0;
        cands.push(e);
    }
    let ortho = g_orthonormalize(g, &cands)?;
    Ok(ortho[1..].iter().map(|e| e.as_slice().to_vec()).collect())
}

fn solve(
    m: &MetricField,
    p: &[f64],
    v: &[f64],
    length: f64,
    steps: usize,
    frame: Option<Vec<Vec<f64>>>,
) -> Result<GeodesicSolution> {
    let n = m.dim();
    if steps < 8 {
        return Err(Error::Invalid(format!("geodesic needs at least 8 steps, got {steps}")));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Invalid(format!("geodesic length must be positive, got {length}")));
    }
    let u = unit_velocity(m, p, v)?;
    let mut y0 = [p, &u[..]].concat();
    if let Some(f) = &frame {
        for e in f {
            y0.extend_from_slice(e);
        }
    }
    let h = length / steps as f64;
    let nodes = integrate_nodes(m, y0, h, steps)?;
    let samples = nodes
        .iter()
        .enumerate()
        .map(|(i, y)| GeodesicSample { s: i as f64 * h, pos: y[..n].to_vec(), vel: y[n..2 * n].to_vec() })
        .collect();
    let frame = frame.map(|f| {
        nodes.iter().map(|y| (0..f.len()).map(|k| y[2 * n + k * n..2 * n + (k + 1) * n].to_vec()).collect()).collect()
    });
    Ok(GeodesicSolution { samples, frame })
}

/// Parallel transport of `x0` along `path`, one vector per sample.
pub fn parallel_transport(m: &MetricField, path: &GeodesicSolution, x0: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    if x0.len() != n || x0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("transported vector must be finite with one component per dimension".into()));
    }
    let st = path.start();
    let y0 = [&st.pos[..], &st.vel[..], x0].concat();
    let h = path.samples[1].s - path.samples[0].s;
    let nodes = integrate_nodes(m, y0, h, path.steps())?;
    Ok(nodes.iter().map(|y| y[2 * n..3 * n].to_vec()).collect())
}

/// Result of the shooting method: unit initial velocity, arclength solution, distance.
#[derive(Debug, Clone)]
pub struct Connection {
    pub velocity: Vec<f64>,
    pub geodesic: GeodesicSolution,
    pub distance: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    /// Largest chart distance `|p − q|` accepted without conjugate-point analysis.
    pub radius: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Fixed RK4 step count; keeps finite-difference stencils over nearby
    /// endpoints on one discretization. `None` adapts to the distance.
    pub steps: Option<usize>,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions { radius: 0.5, max_iter: 50, tol: 1e-13, steps: None }
    }
}

// Endpoint of the unit-parameter geodesic with initial velocity w.
fn shoot(m: &MetricField, p: &[f64], w: &[f64], steps: usize) -> Result<Vec<f64>> {
    let n = m.dim();
    let nodes = integrate_nodes(m, [p, w].concat(), 1.0 / steps as f64, steps)?;
    Ok(nodes.last().expect("non-empty")[..n].to_vec())
}

fn newton_shoot(
    m: &MetricField,
    p: &[f64],
    q: &[f64],
    mut w: Vec<f64>,
    steps: usize,
    opts: &ShootingOptions,
    iters: &mut usize,
) -> Result<Vec<f64>> {
    let n = m.dim();
    let resid = |end: &[f64]| -> Vector { Vector::from_iterator(n, end.iter().zip(q).map(|(a, b)| a - b)) };
    let mut f = resid(&shoot(m, p, &w, steps)?);
    loop {
        if f.norm() < opts.tol {
            return Ok(w);
        }
        if *iters >= opts.max_iter {
            return Err(Error::NoConvergence { what: "geodesic shooting".into(), iters: *iters, residual: f.norm() });
        }
        *iters += 1;
        let scale = w.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-3);
        let dw = 1e-6 * scale;
        let mut jac = Mat::zeros(n, n);
        for j in 0..n {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += dw;
            wm[j] -= dw;
            let col = (resid(&shoot(m, p, &wp, steps)?) - resid(&shoot(m, p, &wm, steps)?)) / (2.0 * dw);
            jac.set_column(j, &col);
        }
        let cond = condition_number(&jac);
        if cond > 1e8 {
            return Err(Error::IllConditioned { what: "shooting Jacobian".into(), cond });
        }
        let step = jac.lu().solve(&(-&f)).ok_or_else(|| Error::Singular("shooting Jacobian".into()))?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a + lambda * b).collect();
            let ft = shoot(m, p, &trial, steps).map(|e| resid(&e));
            match ft {
                Ok(ft) if ft.norm() < f.norm() || lambda < 1e-6 => {
                    w = trial;
                    f = ft;
                    break;
                }
                Err(e) if lambda < 1e-6 => return Err(e),
                _ => lambda *= 0.5,
            }
        }
    }
}

/// Connects `p` to `q` by a geodesic (shooting with a damped Newton iteration).
pub fn geodesic_bvp(m: &MetricField, p: &[f64], q: &[f64], opts: &ShootingOptions) -> Result<Connection> {
    let n = m.dim();
    if p.len() != n || q.len() != n {
        return Err(Error::Invalid("endpoints must match the metric dimension".into()));
    }
    let chord: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if chord == 0.0 {
        return Err(Error::Invalid("geodesic endpoints coincide".into()));
    }
    if chord > opts.radius {
        return Err(Error::Invalid(format!(
            "endpoints {chord} apart exceed the injectivity-safe radius {}",
            opts.radius
        )));
    }
    m.eval(q)?;
    let g = m.eval(p)?;
    let w0: Vec<f64> = p.iter().zip(q).map(|(a, b)| b - a).collect();
    let len0 = gdot(&g, &Vector::from_column_slice(&w0), &Vector::from_column_slice(&w0)).sqrt();
    let mut iters = 0;
    let mut steps = opts.steps.unwrap_or_else(|| default_steps(len0));
    let mut w = newton_shoot(m, p, q, w0, steps, opts, &mut iters)?;
    let mut len;
    loop {
        len = gdot(&g, &Vector::from_column_slice(&w), &Vector::from_column_slice(&w)).sqrt();
        let want = opts.steps.unwrap_or_else(|| default_steps(len));
        if want == steps {
            break;
        }
        steps = want;
        w = newton_shoot(m, p, q, w, steps, opts, &mut iters)?;
    }
    let velocity: Vec<f64> = w.iter().map(|x| x / len).collect();
    let geodesic = geodesic_ivp(m, p, &velocity, len, steps)?;
    Ok(Connection { velocity, geodesic, distance: len, iterations: iters })
}

pub fn distance(m: &MetricField, p: &[f64], q: &[f64], opts: &ShootingOptions) -> Result<f64> {
    geodesic_bvp(m, p, q, opts).map(|c| c.distance)
}

/// `∇_q dist(p, ·)` in chart components: the covector `g(γ̇(L), ·)` at `q`.
pub fn distance_gradient_at_end(m: &MetricField, c: &Connection) -> Result<Vec<f64>> {
    let end = c.geodesic.end();
    let g = m.eval(&end.pos)?;
    Ok((g * Vector::from_column_slice(&end.vel)).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_segment() {
        let m = MetricField::euclidean(3).unwrap();
        let sol = geodesic_ivp(&m, &[0.0; 3], &[0.0, 0.0, 2.0], 1.0, 64).unwrap();
        for s in &sol.samples {
            assert!((s.pos[2] - s.s).abs() < 1e-14 && s.pos[0] == 0.0 && s.pos[1] == 0.0);
        }
        assert!(geodesic_ivp(&m, &[0.0; 3], &[0.0, 0.0, 1.0], 1.0, 7).is_err());
        assert!(geodesic_ivp(&m, &[0.0; 3], &[0.0, 0.0, 0.0], 1.0, 64).is_err());
    }

    #[test]
    fn leaving_the_box_is_an_error() {
        let m = MetricField::euclidean(2).unwrap();
        assert!(matches!(geodesic_ivp(&m, &[0.0, 0.0], &[1.0, 0.0], 1.5, 64), Err(Error::DomainExit(_))));
    }

    #[test]
    fn shooting_in_flat_space() {
        let m = MetricField::euclidean(3).unwrap();
        let c = geodesic_bvp(&m, &[0.0; 3], &[0.0, 0.0, 0.5], &ShootingOptions::default()).unwrap();
        assert!((c.distance - 0.5).abs() < 1e-13);
        assert!((c.velocity[2] - 1.0).abs() < 1e-13);
        assert!(geodesic_bvp(&m, &[0.1; 3], &[0.1; 3], &ShootingOptions::default()).is_err());
        assert!(geodesic_bvp(&m, &[0.0; 3], &[0.9, 0.0, 0.0], &ShootingOptions::default()).is_err());
    }

    #[test]
    fn flat_transport_is_constant() {
        let m = MetricField::euclidean(3).unwrap();
        let path = geodesic_ivp(&m, &[0.0; 3], &[1.0, 1.0, 0.0], 0.5, 64).unwrap();
        let x = parallel_transport(&m, &path, &[0.3, -0.2, 0.7]).unwrap();
        assert!(x.iter().all(|v| v == &vec![0.3, -0.2, 0.7]));
    }
}
