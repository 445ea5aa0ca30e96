//! Jacobi-field matrix systems along a unit-speed geodesic.
//!
//! With a parallel orthonormal frame `E₁ … E_m` of `γ̇^⊥` (`m = n − 1`), a normal
//! Jacobi field is a row vector of frame components `b(s′)` with
//! `b″ + b·R(s′) = 0`, `R(s′)_ij = R(E_i, γ̇, γ̇, E_j)`. `B₁`, `B₂` are the
//! fundamental solutions (rows are solutions) and
//! `A(s, s′) = C₁(s)B₁(s′) + C₂(s)B₂(s′)` is fixed by `A(s,s) = 0`, `A(s,ε) = I`.
//!
//! `∂_{s′}A(s, ε)` is the transverse Hessian at `γ(ε)` of `dist(γ(s), ·)`; its
//! Taylor coefficients in `s` come from the power series of `B₁`, `B₂` at
//! `s = 0` (curvature coefficients by finite differences along the geodesic).

mod distance;
mod expansion;

pub use distance::{distance_jets, hessian_distance, DistanceHessian, DistanceJets};
pub use expansion::{contact_determinant, eps5_coefficient, eps5_formula, expansion_remainder, Eps5, EPS5_GRID};

use crate::error::{Error, Result};
use crate::geodesics::{default_frame, default_steps, rk4, transport_rhs, unit_velocity, GeodesicSolution};
use crate::linalg::{Mat, Vector};
use crate::numerics::central_weights;
use crate::riemann::{curvature, MetricField};

/// Curvature matrix `R(E_i, v, v, E_j)` at `x`.
pub fn curvature_matrix_at(m: &MetricField, x: &[f64], v: &[f64], frame: &[Vec<f64>]) -> Result<Mat> {
    let cd = curvature(m, x)?;
    let k = frame.len();
    let mut r = Mat::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let val = cd.rm(&frame[i], v, v, &frame[j]);
            r[(i, j)] = val;
            r[(j, i)] = val;
        }
    }
    Ok(r)
}

/// `R(s′)` at every sample of a framed geodesic.
pub fn curvature_matrix(m: &MetricField, geod: &GeodesicSolution) -> Result<Vec<Mat>> {
    let frames = geod.frame.as_ref().ok_or_else(|| Error::Invalid("geodesic carries no parallel frame".into()))?;
    check_frame(m, &geod.start().pos, &geod.start().vel, &frames[0])?;
    geod.samples.iter().zip(frames).map(|(s, f)| curvature_matrix_at(m, &s.pos, &s.vel, f)).collect()
}

fn check_frame(m: &MetricField, p: &[f64], v: &[f64], frame: &[Vec<f64>]) -> Result<()> {
    let n = m.dim();
    if frame.len() != n - 1 || frame.iter().any(|e| e.len() != n) {
        return Err(Error::Invalid(format!("frame needs {} vectors of length {n}", n - 1)));
    }
    let g = m.eval(p)?;
    let mut all = vec![Vector::from_column_slice(v)];
    all.extend(frame.iter().map(|e| Vector::from_column_slice(e)));
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            if ((all[i].transpose() * &g * &all[j])[0] - want).abs() > 1e-8 {
                return Err(Error::Invalid("velocity and frame must be g-orthonormal".into()));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    /// RK4 steps over `[0, ε]`; default `max(256, default_steps(ε))`.
    pub steps: Option<usize>,
    /// Highest `s`-order of the Taylor expansion of `∂_{s′}A(s, ε)`.
    pub order: usize,
    /// Spacing of the 9-point curvature stencil along the geodesic.
    pub curvature_step: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions { steps: None, order: 4, curvature_step: 0.02 }
    }
}

/// Largest Taylor order supported (the 9-point curvature stencil gives `R` up to its 6th derivative).
pub const MAX_TAYLOR_ORDER: usize = 8;

/// Matrix state `(B₁, B₁′, B₂, B₂′)` at one arclength.
#[derive(Debug, Clone)]
pub struct JacobiState {
    pub b1: Mat,
    pub db1: Mat,
    pub b2: Mat,
    pub db2: Mat,
}

impl JacobiState {
    fn initial(k: usize) -> JacobiState {
        JacobiState { b1: Mat::identity(k, k), db1: Mat::zeros(k, k), b2: Mat::zeros(k, k), db2: Mat::identity(k, k) }
    }

    /// `B₁B₂′ᵀ − B₁′B₂ᵀ`, identically `I` (the Wronskian for row solutions).
    pub fn wronskian(&self) -> Mat {
        &self.b1 * self.db2.transpose() - &self.db1 * self.b2.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct JacobiSystem {
    metric: MetricField,
    eps: f64,
    /// Framed geodesic on `[0, ε]` at the integration nodes.
    pub geodesic: GeodesicSolution,
    /// `R(s′)` at the nodes.
    pub curvature: Vec<Mat>,
    pub states: Vec<JacobiState>,
    /// `R(s′) = Σ_k r_k s′^k` near `s′ = 0`.
    pub curvature_taylor: Vec<Mat>,
    /// `∂_{s′}A(s, ε) = Σ_k F_k s^k`, `k = 0..=order`.
    pub series: Vec<Mat>,
}

// Layout of the joint state: x, v, frame, then B₁, B₁′, B₂, B₂′ row-major.
fn base_len(n: usize) -> usize {
    2 * n + (n - 1) * n
}

fn read_mat(y: &[f64], off: usize, k: usize) -> Mat {
    Mat::from_row_slice(k, k, &y[off..off + k * k])
}

fn push_mat(out: &mut Vec<f64>, a: &Mat) {
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
}

fn frame_of(y: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n - 1).map(|k| y[2 * n + k * n..2 * n + (k + 1) * n].to_vec()).collect()
}

fn jacobi_rhs(m: &MetricField, y: &[f64]) -> Result<(Vec<f64>, Mat)> {
    let n = m.dim();
    let k = n - 1;
    let b = base_len(n);
    let mut out = transport_rhs(m, &y[..b])?;
    let r = curvature_matrix_at(m, &y[..n], &y[n..2 * n], &frame_of(y, n))?;
    let kk = k * k;
    push_mat(&mut out, &read_mat(y, b + kk, k));
    push_mat(&mut out, &(-read_mat(y, b, k) * &r));
    push_mat(&mut out, &read_mat(y, b + 3 * kk, k));
    push_mat(&mut out, &(-read_mat(y, b + 2 * kk, k) * &r));
    Ok((out, r))
}

fn state_of(y: &[f64], n: usize) -> JacobiState {
    let k = n - 1;
    let b = base_len(n);
    let kk = k * k;
    JacobiState {
        b1: read_mat(y, b, k),
        db1: read_mat(y, b + kk, k),
        b2: read_mat(y, b + 2 * kk, k),
        db2: read_mat(y, b + 3 * kk, k),
    }
}

fn initial_vector(p: &[f64], v: &[f64], frame: &[Vec<f64>]) -> Vec<f64> {
    let k = frame.len();
    let mut y = [p, v].concat();
    for e in frame {
        y.extend_from_slice(e);
    }
    let st = JacobiState::initial(k);
    for a in [&st.b1, &st.db1, &st.b2, &st.db2] {
        push_mat(&mut y, a);
    }
    y
}

// Integrates the joint system; returns the node states and R at each node.
fn sweep(m: &MetricField, y0: Vec<f64>, h: f64, steps: usize) -> Result<(Vec<Vec<f64>>, Vec<Mat>)> {
    let n = m.dim();
    let mut f = |y: &[f64]| jacobi_rhs(m, y).map(|(d, _)| d);
    let mut nodes = vec![y0];
    let mut rs = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let y = nodes.last().expect("non-empty");
        rs.push(curvature_matrix_at(m, &y[..n], &y[n..2 * n], &frame_of(y, n))?);
        let next = rk4(&mut f, y, h)?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::DomainExit(next[..n].to_vec()));
        }
        nodes.push(next);
    }
    let y = nodes.last().expect("non-empty");
    rs.push(curvature_matrix_at(m, &y[..n], &y[n..2 * n], &frame_of(y, n))?);
    Ok((nodes, rs))
}

/// Taylor coefficients at `s′ = 0` of a frame-valued matrix function along the
/// geodesic with initial data `(x, v, frame)`, from a 9-point stencil of spacing `hr`.
pub fn frame_taylor<F>(
    m: &MetricField,
    p: &[f64],
    v: &[f64],
    frame: &[Vec<f64>],
    hr: f64,
    order: usize,
    f: F,
) -> Result<Vec<Mat>>
where
    F: Fn(&[f64], &[f64], &[Vec<f64>]) -> Result<Mat>,
{
    let mut y0 = [p, v].concat();
    for e in frame {
        y0.extend_from_slice(e);
    }
    stencil_taylor(m, &y0, hr, order, f)
}

fn stencil_taylor<F>(m: &MetricField, y0: &[f64], hr: f64, order: usize, f: F) -> Result<Vec<Mat>>
where
    F: Fn(&[f64], &[f64], &[Vec<f64>]) -> Result<Mat>,
{
    if order > 8 {
        return Err(Error::Order { got: order, max: 8 });
    }
    let n = m.dim();
    let b = base_len(n);
    let sub = 8;
    let mut samples: Vec<Option<Mat>> = vec![None; 9];
    let at = |y: &[f64]| f(&y[..n], &y[n..2 * n], &frame_of(y, n));
    samples[4] = Some(at(y0)?);
    for dir in [-1.0, 1.0] {
        let mut y = y0[..b].to_vec();
        let mut rhs = |z: &[f64]| transport_rhs(m, z);
        for j in 1..=4 {
            for _ in 0..sub {
                y = rk4(&mut rhs, &y, dir * hr / sub as f64)?;
                if y.iter().any(|x| !x.is_finite()) {
                    return Err(Error::DomainExit(y[..n].to_vec()));
                }
            }
            let idx = (4 + dir as i64 * j as i64) as usize;
            samples[idx] = Some(at(&y)?);
        }
    }
    let w = central_weights(4, hr, order);
    let mut fact = 1.0;
    let mut out = Vec::with_capacity(order + 1);
    for d in 0..=order {
        if d > 0 {
            fact *= d as f64;
        }
        let first = samples[0].as_ref().expect("filled");
        let mut acc = Mat::zeros(first.nrows(), first.ncols());
        for (j, s) in samples.iter().enumerate() {
            acc += s.as_ref().expect("filled") * w[d][j];
        }
        out.push(acc / fact);
    }
    Ok(out)
}

fn curvature_taylor(m: &MetricField, y0: &[f64], hr: f64, order: usize) -> Result<Vec<Mat>> {
    stencil_taylor(m, y0, hr, order, |x, v, fr| curvature_matrix_at(m, x, v, fr))
}

/// Power-series coefficients of `B₁`, `B₂` at `0` up to `s^kmax`.
pub fn fundamental_series(r: &[Mat], kmax: usize) -> (Vec<Mat>, Vec<Mat>) {
    let k = r[0].nrows();
    let mut c1 = vec![Mat::identity(k, k), Mat::zeros(k, k)];
    let mut c2 = vec![Mat::zeros(k, k), Mat::identity(k, k)];
    for deg in 2..=kmax {
        let mut a1 = Mat::zeros(k, k);
        let mut a2 = Mat::zeros(k, k);
        for j in 0..=deg - 2 {
            if let Some(rj) = r.get(j) {
                a1 += &c1[deg - 2 - j] * rj;
                a2 += &c2[deg - 2 - j] * rj;
            }
        }
        let den = -((deg * (deg - 1)) as f64);
        c1.push(a1 / den);
        c2.push(a2 / den);
    }
    c1.truncate(kmax + 1);
    c2.truncate(kmax + 1);
    (c1, c2)
}

fn block(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let k = a.nrows();
    let mut out = Mat::zeros(2 * k, 2 * k);
    out.view_mut((0, 0), (k, k)).copy_from(a);
    out.view_mut((0, k), (k, k)).copy_from(b);
    out.view_mut((k, 0), (k, k)).copy_from(c);
    out.view_mut((k, k), (k, k)).copy_from(d);
    out
}

fn solve_boundary(start: &JacobiState, end: &JacobiState) -> Result<(Mat, Mat)> {
    let k = start.b1.nrows();
    let mmat = block(&start.b1, &end.b1, &start.b2, &end.b2);
    let inv = mmat
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Jacobi boundary matrix (conjugate point?)".into()))?;
    Ok((inv.view((k, 0), (k, k)).into_owned(), inv.view((k, k), (k, k)).into_owned()))
}

impl JacobiSystem {
    /// Builds the system along the geodesic from `p` in direction `dir`.
    pub fn along(
        m: &MetricField,
        p: &[f64],
        dir: &[f64],
        frame0: Option<&[Vec<f64>]>,
        eps: f64,
        opts: &JacobiOptions,
    ) -> Result<JacobiSystem> {
        let v = unit_velocity(m, p, dir)?;
        let frame = match frame0 {
            Some(f) => f.to_vec(),
            None => default_frame(&m.eval(p)?, &v)?,
        };
        check_frame(m, p, &v, &frame)?;
        Self::build(m, p, &v, &frame, eps, opts)
    }

    fn build(
        m: &MetricField,
        p: &[f64],
        v: &[f64],
        frame: &[Vec<f64>],
        eps: f64,
        opts: &JacobiOptions,
    ) -> Result<JacobiSystem> {
        let n = m.dim();
        if n < 2 {
            return Err(Error::Invalid("Jacobi systems need dimension at least 2".into()));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Invalid(format!("ε must be positive, got {eps}")));
        }
        if opts.order < 1 || opts.order > MAX_TAYLOR_ORDER {
            return Err(Error::Order { got: opts.order, max: MAX_TAYLOR_ORDER });
        }
        let steps = opts.steps.unwrap_or_else(|| 256usize.max(default_steps(eps)));
        if steps < 8 {
            return Err(Error::Invalid(format!("Jacobi sweep needs at least 8 steps, got {steps}")));
        }
        let y0 = initial_vector(p, v, frame);
        let h = eps / steps as f64;
        let (nodes, rs) = sweep(m, y0.clone(), h, steps)?;
        let states: Vec<JacobiState> = nodes.iter().map(|y| state_of(y, n)).collect();
        let samples = nodes
            .iter()
            .enumerate()
            .map(|(i, y)| crate::geodesics::GeodesicSample {
                s: i as f64 * h,
                pos: y[..n].to_vec(),
                vel: y[n..2 * n].to_vec(),
            })
            .collect();
        let frames = nodes.iter().map(|y| frame_of(y, n)).collect();
        let geodesic = GeodesicSolution { samples, frame: Some(frames) };

        let rdeg = opts.order.saturating_sub(2).min(MAX_TAYLOR_ORDER - 2);
        let r_taylor = curvature_taylor(m, &y0, opts.curvature_step, rdeg)?;
        let end = states.last().expect("non-empty").clone();
        let series = Self::taylor_series(&r_taylor, &end, opts.order)?;
        Ok(JacobiSystem { metric: m.clone(), eps, geodesic, curvature: rs, states, curvature_taylor: r_taylor, series })
    }

    fn taylor_series(r: &[Mat], end: &JacobiState, order: usize) -> Result<Vec<Mat>> {
        let k = end.b1.nrows();
        let (c1, c2) = fundamental_series(r, order);
        let zero = Mat::zeros(k, k);
        let m0 = block(&c1[0], &end.b1, &c2[0], &end.b2);
        let n0 = m0.try_inverse().ok_or_else(|| Error::Singular("Jacobi boundary matrix (conjugate point?)".into()))?;
        let mk: Vec<Mat> = (0..=order).map(|j| block(&c1[j], &zero, &c2[j], &zero)).collect();
        let mut ns = vec![n0.clone()];
        for deg in 1..=order {
            let mut acc = Mat::zeros(2 * k, 2 * k);
            for j in 1..=deg {
                acc += &mk[j] * &ns[deg - j];
            }
            ns.push(-&n0 * acc);
        }
        Ok(ns.iter().map(|nk| nk.view((k, 0), (k, k)) * &end.db1 + nk.view((k, k), (k, k)) * &end.db2).collect())
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn codim(&self) -> usize {
        self.states[0].b1.nrows()
    }

    pub fn end(&self) -> &JacobiState {
        self.states.last().expect("non-empty")
    }

    /// `(B₁, B₁′, B₂, B₂′)` at arclength `s` (re-integrated from `0`, negative `s` allowed).
    pub fn state_at(&self, s: f64) -> Result<JacobiState> {
        let n = self.metric.dim();
        if s == 0.0 {
            return Ok(self.states[0].clone());
        }
        let h0 = self.eps / (self.states.len() - 1) as f64;
        let steps = 16usize.max((s.abs() / h0).ceil() as usize);
        let st = self.geodesic.start();
        let y0 = initial_vector(&st.pos, &st.vel, &self.geodesic.frame.as_ref().expect("framed")[0]);
        let (nodes, _) = sweep(&self.metric, y0, s / steps as f64, steps)?;
        Ok(state_of(nodes.last().expect("non-empty"), n))
    }

    /// `(C₁(s), C₂(s))` with `A(s, s′) = C₁(s)B₁(s′) + C₂(s)B₂(s′)`.
    pub fn coefficients(&self, s: f64) -> Result<(Mat, Mat)> {
        solve_boundary(&self.state_at(s)?, self.end())
    }

    pub fn a(&self, s: f64, sp: f64) -> Result<Mat> {
        let (c1, c2) = self.coefficients(s)?;
        let st = self.state_at(sp)?;
        Ok(c1 * st.b1 + c2 * st.b2)
    }

    /// `∂_{s′}A(s, ε)` by direct solution of the boundary system.
    pub fn d_sprime_a(&self, s: f64) -> Result<Mat> {
        let (c1, c2) = self.coefficients(s)?;
        let end = self.end();
        Ok(c1 * &end.db1 + c2 * &end.db2)
    }

    /// `W(s, ε) = ∂_{s′}A(s, ε) − ∂_{s′}A(0, ε)`.
    pub fn w(&self, s: f64) -> Result<Mat> {
        Ok(self.d_sprime_a(s)? - &self.series[0])
    }

    /// `∂_{s′}A(s, ε)` summed from the Taylor series.
    pub fn d_sprime_a_series(&self, s: f64) -> Mat {
        let mut acc = Mat::zeros(self.codim(), self.codim());
        for f in self.series.iter().rev() {
            acc = acc * s + f;
        }
        acc
    }

    /// `∂^m_s ∂_{s′}A(0, ε)` for `m = 1..=order`.
    pub fn taylor(&self) -> Vec<Mat> {
        let mut fact = 1.0;
        self.series
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, f)| {
                fact *= k as f64;
                f * fact
            })
            .collect()
    }

    /// `B₂(ε)⁻¹B₂′(ε)`: transverse Hessian at `γ(ε)` of `dist(γ(0), ·)` in the frame `E(ε)`.
    pub fn end_hessian(&self) -> Result<Mat> {
        let end = self.end();
        let inv = end.b2.clone().try_inverse().ok_or_else(|| Error::Singular("B₂(ε) (conjugate point?)".into()))?;
        Ok(inv * &end.db2)
    }

    /// Coefficients `P_k` of `ε·W(εs, ε) = Σ_{k≥1} P_k s^k`.
    pub fn scaled_w_coefficients(&self) -> Vec<Mat> {
        let k = self.codim();
        let mut out = vec![Mat::zeros(k, k)];
        let mut scale = self.eps;
        for f in self.series.iter().skip(1) {
            scale *= self.eps;
            out.push(f * scale);
        }
        out
    }

    /// Coefficients of `det(ε·W(εs, ε))` in `s` (codimension 2 only).
    pub fn det_expansion(&self) -> Result<Vec<f64>> {
        if self.codim() != 2 {
            return Err(Error::Invalid("the determinant expansion is defined for three-dimensional metrics".into()));
        }
        Ok(det2_series(&self.scaled_w_coefficients()))
    }
}

/// Coefficients of `det(Σ P_k s^k)` for 2×2 matrix coefficients.
pub fn det2_series(p: &[Mat]) -> Vec<f64> {
    let deg = p.len() - 1;
    (0..=deg)
        .map(|d| {
            (0..=d)
                .map(|i| {
                    let (a, b) = (&p[i], &p[d - i]);
                    a[(0, 0)] * b[(1, 1)] - a[(0, 1)] * b[(1, 0)]
                })
                .sum()
        })
        .collect()
}

/// Jacobi system on `[0, ε]` for a framed geodesic (only its initial data are used).
pub fn solve_jacobi(m: &MetricField, geod: &GeodesicSolution, eps: f64, opts: &JacobiOptions) -> Result<JacobiSystem> {
    let frames = geod.frame.as_ref().ok_or_else(|| Error::Invalid("geodesic carries no parallel frame".into()))?;
    if eps > geod.length() * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!("ε = {eps} exceeds the geodesic length {}", geod.length())));
    }
    let st = geod.start();
    check_frame(m, &st.pos, &st.vel, &frames[0])?;
    JacobiSystem::build(m, &st.pos, &st.vel, &frames[0], eps, opts)
}

/// `∂^m_s ∂_{s′}A(0, ε)` for `m = 1..=4` and the `s², s³, s⁴` coefficients of
/// `det(ε·W(εs, ε))` (the latter only for three-dimensional metrics).
#[derive(Debug, Clone)]
pub struct WTaylor {
    pub derivatives: Vec<Mat>,
    pub det: Option<[f64; 3]>,
}

pub fn w_taylor(sys: &JacobiSystem) -> WTaylor {
    let derivatives = sys.taylor().into_iter().take(4).collect();
    let det = sys.det_expansion().ok().filter(|d| d.len() > 4).map(|d| [d[2], d[3], d[4]]);
    WTaylor { derivatives, det }
}

/// `√κ·cot(√κ r)` continued through `κ = 0` (`1/r`) and `κ < 0` (`√−κ·coth`).
pub fn model_cot(kappa: f64, r: f64) -> f64 {
    if kappa > 0.0 {
        let k = kappa.sqrt();
        k / (k * r).tan()
    } else if kappa < 0.0 {
        let k = (-kappa).sqrt();
        k / (k * r).tanh()
    } else {
        1.0 / r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::geodesic_with_frame;

    fn axis_system(m: &MetricField, eps: f64, order: usize) -> JacobiSystem {
        let opts = JacobiOptions { order, ..Default::default() };
        JacobiSystem::along(m, &[0.0; 3], &[0.0, 0.0, 1.0], None, eps, &opts).unwrap()
    }

    #[test]
    fn constant_curvature_closed_forms() {
        for kappa in [-1.0, 0.0, 1.0] {
            let m = MetricField::constant_curvature(3, kappa).unwrap();
            for eps in [0.2, 0.3] {
                let sys = axis_system(&m, eps, 4);
                for s in [0.0, 0.1] {
                    let want = model_cot(kappa, eps - s);
                    let got = sys.d_sprime_a(s).unwrap();
                    let err = (got - Mat::identity(2, 2) * want).amax();
                    assert!(err < 1e-9, "κ={kappa} ε={eps} s={s}: {err}");
                    let ser = (sys.d_sprime_a_series(s) - Mat::identity(2, 2) * want).amax();
                    if s == 0.0 {
                        assert!(ser < 1e-9, "{ser}");
                    }
                }
            }
        }
    }

    #[test]
    fn flat_second_derivative() {
        let m = MetricField::euclidean(3).unwrap();
        let t = w_taylor(&axis_system(&m, 0.1, 4));
        assert!((&t.derivatives[0] - Mat::identity(2, 2) * 100.0).amax() < 1e-6);
        assert!((&t.derivatives[3] - Mat::identity(2, 2) * 24.0 / 0.1f64.powi(5)).amax() < 1e-3);
    }

    #[test]
    fn sphere_second_derivative() {
        let m = MetricField::constant_curvature(3, 1.0).unwrap();
        let sys = axis_system(&m, 0.1, 4);
        let want = 1.0 / 0.1f64.sin().powi(2);
        assert!((sys.taylor()[0][(0, 0)] - want).abs() < 1e-6 * want);
        assert!(expansion_remainder(&sys) < 1e-5);
    }

    #[test]
    fn curvature_matrix_models() {
        for kappa in [-1.0, 0.0, 1.0] {
            let m = MetricField::constant_curvature(3, kappa).unwrap();
            let g = geodesic_with_frame(&m, &[0.1, 0.0, -0.1], &[1.0, 2.0, 0.5], 0.3, 64, None).unwrap();
            for r in curvature_matrix(&m, &g).unwrap() {
                assert!((r - Mat::identity(2, 2) * kappa).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_data_and_wronskian() {
        let m = MetricField::perturbed_standard();
        let sys =
            JacobiSystem::along(&m, &[0.05, -0.1, -0.1], &[0.2, 0.1, 1.0], None, 0.25, &Default::default()).unwrap();
        for s in [0.0, 0.07, 0.15] {
            assert!(sys.a(s, s).unwrap().amax() < 1e-8);
            assert!((sys.a(s, sys.eps()).unwrap() - Mat::identity(2, 2)).amax() < 1e-8);
        }
        for st in &sys.states {
            assert!((st.wronskian() - Mat::identity(2, 2)).amax() < 1e-8);
        }
        let h = sys.end_hessian().unwrap();
        assert!((&h - h.transpose()).amax() < 1e-8 * h.amax());
    }

    #[test]
    fn series_matches_direct_solution() {
        let m = MetricField::perturbed_standard();
        let sys = JacobiSystem::along(
            &m,
            &[0.05, -0.1, -0.1],
            &[0.2, 0.1, 1.0],
            None,
            0.2,
            &JacobiOptions { order: 6, ..Default::default() },
        )
        .unwrap();
        for s in [-0.01, 0.005, 0.01] {
            let d = (sys.d_sprime_a(s).unwrap() - sys.d_sprime_a_series(s)).amax();
            assert!(d < 1e-6 * sys.series[0].amax(), "s={s}: {d}");
        }
    }

    #[test]
    fn determinant_starts_at_second_order() {
        let m = MetricField::perturbed_standard();
        let sys = axis_system(&m, 0.1, 4);
        let d = sys.det_expansion().unwrap();
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-12);
        // the same from direct solutions of the boundary system
        let xs: Vec<f64> = (-3..=3).map(|j| j as f64 * 0.02).collect();
        let eps = sys.eps();
        let ys: Vec<f64> = xs.iter().map(|s| (sys.w(eps * s).unwrap() * eps).determinant()).collect();
        let w = crate::numerics::fornberg(0.0, &xs, 2);
        let c0: f64 = w[0].iter().zip(&ys).map(|(a, b)| a * b).sum();
        let c1: f64 = w[1].iter().zip(&ys).map(|(a, b)| a * b).sum();
        let c2: f64 = w[2].iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / 2.0;
        assert!(c0.abs() < 1e-6 && c1.abs() < 1e-6, "{c0} {c1} {c2} {:?}", d);
        assert!((c2 - d[2]).abs() < 1e-4 * d[2].abs().max(1e-3), "{c2} vs {}", d[2]);
    }
}
