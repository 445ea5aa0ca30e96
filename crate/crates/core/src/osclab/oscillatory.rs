use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::PhaseField;
use crate::error::{Error, Result};
use crate::numerics::{fit_line, LineFit};
use crate::poly::Poly;

/// Largest frequency accepted by the desk-scale evaluator.
pub const MAX_FREQUENCY: f64 = 1024.0;
/// Guard on the number of `y` quadrature nodes.
pub const MAX_Y_POINTS: usize = 1 << 24;

/// `y`-radius of [`Amplitude::for_decay`].
pub const DECAY_Y_RADIUS: f64 = 1.25;

/// `(1 − r²)⁴` for `r < 1`, else 0.
pub fn quartic_bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - r * r).powi(4)
    }
}

/// Separable amplitude `b(|x − x_c|/ρ_x) b(|t − t_c|/ρ_t) b(|y − y_c|/ρ_y)` with the quartic bump `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitude {
    pub x_center: Vec<f64>,
    pub t_center: f64,
    pub y_center: Vec<f64>,
    pub rho_x: f64,
    pub rho_t: f64,
    pub rho_y: f64,
}

impl Amplitude {
    pub fn centered(n: usize, rho: f64) -> Amplitude {
        Amplitude {
            x_center: vec![0.0; n - 1],
            t_center: 0.0,
            y_center: vec![0.0; n - 1],
            rho_x: rho,
            rho_t: rho,
            rho_y: rho,
        }
    }

    /// Default for decay experiments: `ρ_x = ρ_t = 0.5` and a wider `ρ_y` so the
    /// stationary point dominates from `N ≈ 16` at `t = 0.3`.
    pub fn for_decay(n: usize) -> Amplitude {
        Amplitude { rho_y: DECAY_Y_RADIUS, ..Amplitude::centered(n, 0.5) }
    }

    pub fn dim(&self) -> usize {
        self.x_center.len() + 1
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.x_center.len() != n - 1 || self.y_center.len() != n - 1 {
            return Err(Error::Invalid(format!("amplitude centers need {} components", n - 1)));
        }
        if ![self.rho_x, self.rho_t, self.rho_y].iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(Error::Invalid("amplitude radii must be positive".into()));
        }
        Ok(())
    }

    /// The `(x, t)` factor.
    pub fn x_factor(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let r = dist(&x[..n - 1], &self.x_center) / self.rho_x;
        quartic_bump(r) * quartic_bump((x[n - 1] - self.t_center).abs() / self.rho_t)
    }

    pub fn y_factor(&self, y: &[f64]) -> f64 {
        quartic_bump(dist(y, &self.y_center) / self.rho_y)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Densities on `y`-space.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Constant(Complex64),
    /// Quartic bump of the given radius.
    Bump {
        center: Vec<f64>,
        radius: f64,
    },
    /// `base(y) · e^{i·freq·c(y)}` for a polynomial `c` in `y`.
    Modulated {
        base: Box<Density>,
        phase: Poly,
        freq: f64,
    },
}

impl Density {
    pub fn one() -> Density {
        Density::Constant(Complex64::new(1.0, 0.0))
    }

    pub fn zero() -> Density {
        Density::Constant(Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, y: &[f64]) -> Complex64 {
        match self {
            Density::Constant(c) => *c,
            Density::Bump { center, radius } => Complex64::new(quartic_bump(dist(y, center) / radius), 0.0),
            Density::Modulated { base, phase, freq } => base.eval(y) * Complex64::from_polar(1.0, freq * phase.eval(y)),
        }
    }
}

/// Cell-midpoint grid over a box in `(x, t)`; a count of 1 on an axis with
/// `lo = hi` pins that coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

impl XGrid {
    pub fn point(p: &[f64]) -> XGrid {
        XGrid { lo: p.to_vec(), hi: p.to_vec(), counts: vec![1; p.len()] }
    }

    pub fn cube(n: usize, half: f64, per_axis: usize) -> XGrid {
        XGrid { lo: vec![-half; n], hi: vec![half; n], counts: vec![per_axis; n] }
    }

    pub fn shifted(&self, by: &[f64]) -> XGrid {
        let add = |v: &[f64]| v.iter().zip(by).map(|(a, b)| a + b).collect();
        XGrid { lo: add(&self.lo), hi: add(&self.hi), counts: self.counts.clone() }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.lo.len() != n || self.hi.len() != n || self.counts.len() != n {
            return Err(Error::Invalid(format!("x-grid needs {n} axes")));
        }
        if self.counts.iter().any(|c| *c == 0) || self.lo.iter().zip(&self.hi).any(|(a, b)| !(b >= a)) {
            return Err(Error::Invalid("x-grid needs positive counts and lo ≤ hi".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).zip(&self.counts).map(|((a, b), c)| (b - a) / *c as f64).product()
    }

    /// Midpoints in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.lo.len();
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; n];
        loop {
            out.push(
                (0..n)
                    .map(|k| self.lo[k] + (self.hi[k] - self.lo[k]) * (idx[k] as f64 + 0.5) / self.counts[k] as f64)
                    .collect(),
            );
            let mut k = n;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OscOptions {
    /// Bound on `|∇_yφ|` over the support; estimated by sampling when absent.
    pub lip: Option<f64>,
    pub points_per_oscillation: f64,
    /// Divides the `y` spacing (2 halves it).
    pub refine: usize,
}

impl Default for OscOptions {
    fn default() -> Self {
        OscOptions { lip: None, points_per_oscillation: 8.0, refine: 1 }
    }
}

/// Samples of `T_N f(x) = ∫ e^{iNφ(x; y)} a(x; y) f(y) dy` on an `(x, t)` grid.
#[derive(Debug, Clone)]
pub struct OscField {
    pub phase: String,
    pub frequency: f64,
    pub grid: XGrid,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<Complex64>,
    /// `∫|a f| dy` at each point by the same quadrature.
    pub bounds: Vec<f64>,
    pub y_spacing: f64,
    pub y_per_axis: usize,
    pub lip: f64,
}

impl OscField {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Midpoint-sum `L^p` norm over the grid.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let vol = self.grid.cell_volume();
        (self.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    }

    /// CSV with columns `x₁ … x_{n−1}, t, re, im`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.grid.lo.len();
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..n).map(|i| format!("x{i}")).collect();
        header.extend(["t".to_string(), "re".to_string(), "im".to_string()]);
        out.write_record(&header).map_err(csv_err)?;
        for (p, v) in self.points.iter().zip(&self.values) {
            let mut row: Vec<String> = p.iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{:e}", v.re));
            row.push(format!("{:e}", v.im));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::Invalid(e.to_string()))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv output: {e}"))
}

fn lattice(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let counts: Vec<usize> = lo.iter().zip(hi).map(|(a, b)| if b > a { per_axis } else { 1 }).collect();
    let n = lo.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(
            (0..n)
                .map(|k| {
                    if counts[k] == 1 {
                        lo[k]
                    } else {
                        lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (counts[k] - 1) as f64
                    }
                })
                .collect(),
        );
        let mut k = n;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn estimate_lip(phi: &PhaseField, amp: &Amplitude, grid: &XGrid) -> Result<f64> {
    let ylo: Vec<f64> = amp.y_center.iter().map(|c| c - amp.rho_y).collect();
    let yhi: Vec<f64> = amp.y_center.iter().map(|c| c + amp.rho_y).collect();
    let ys: Vec<Vec<f64>> =
        lattice(&ylo, &yhi, 9).into_iter().filter(|y| dist(y, &amp.y_center) <= amp.rho_y).collect();
    let xs = if grid.len() <= 729 { grid.points() } else { lattice(&grid.lo, &grid.hi, 9) };
    let mut lip = 0.0f64;
    for x in &xs {
        for y in &ys {
            let g = phi.grad_y(x, y)?;
            lip = lip.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    Ok((1.25 * lip).max(1e-3))
}

/// Trapezoid quadrature of `T_N f` at every grid point. The `y` spacing resolves
/// each oscillation with `points_per_oscillation` nodes.
pub fn osc_evaluate(
    phi: &PhaseField,
    amp: &Amplitude,
    f: &Density,
    freq: f64,
    grid: &XGrid,
    opts: &OscOptions,
) -> Result<OscField> {
    let n = phi.dim();
    amp.validate(n)?;
    grid.validate(n)?;
    if !(0.0..=MAX_FREQUENCY).contains(&freq) {
        return Err(Error::Invalid(format!("frequency must lie in [0, {MAX_FREQUENCY}]")));
    }
    if !(opts.points_per_oscillation >= 2.0) || opts.refine == 0 {
        return Err(Error::Invalid("need at least 2 points per oscillation and refine ≥ 1".into()));
    }
    let lip = match opts.lip {
        Some(l) if l > 0.0 => l,
        Some(_) => return Err(Error::Invalid("Lipschitz bound must be positive".into())),
        None => estimate_lip(phi, amp, grid)?,
    };
    let mut h = amp.rho_y / 16.0;
    if freq > 0.0 {
        h = h.min(2.0 * std::f64::consts::PI / (opts.points_per_oscillation * freq * lip));
    }
    h /= opts.refine as f64;
    let per_axis = (2.0 * amp.rho_y / h).ceil() as usize + 1;
    let total = (per_axis as f64).powi(n as i32 - 1);
    if total > MAX_Y_POINTS as f64 {
        return Err(Error::Resolution(format!("{total:.0} y-points needed, limit {MAX_Y_POINTS}")));
    }
    let h = 2.0 * amp.rho_y / (per_axis - 1) as f64;
    let ylo: Vec<f64> = amp.y_center.iter().map(|c| c - amp.rho_y).collect();
    let yhi: Vec<f64> = amp.y_center.iter().map(|c| c + amp.rho_y).collect();
    let wbase = h.powi(n as i32 - 1);
    // the bump vanishes on the boundary, so end weights never matter
    let nodes: Vec<(Vec<f64>, Complex64)> = lattice(&ylo, &yhi, per_axis)
        .into_par_iter()
        .filter_map(|y| {
            let a = amp.y_factor(&y);
            if a == 0.0 {
                return None;
            }
            let c = f.eval(&y) * (a * wbase);
            if c == Complex64::new(0.0, 0.0) {
                None
            } else {
                Some((y, c))
            }
        })
        .collect();
    let points = grid.points();
    let evaluated: Vec<Result<(Complex64, f64)>> = points
        .par_iter()
        .map(|x| {
            let ax = amp.x_factor(x);
            if ax == 0.0 {
                return Ok((Complex64::new(0.0, 0.0), 0.0));
            }
            let mut sum = Complex64::new(0.0, 0.0);
            let mut bound = 0.0;
            for (y, c) in &nodes {
                let ph = phi.value(x, y)?;
                sum += c * Complex64::from_polar(1.0, freq * ph);
                bound += c.norm();
            }
            Ok((sum * ax, bound * ax))
        })
        .collect();
    let mut values = Vec::with_capacity(points.len());
    let mut bounds = Vec::with_capacity(points.len());
    for r in evaluated {
        let (v, b) = r?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Invalid("non-finite quadrature value".into()));
        }
        values.push(v);
        bounds.push(b);
    }
    Ok(OscField {
        phase: phi.label().to_string(),
        frequency: freq,
        grid: grid.clone(),
        points,
        values,
        bounds,
        y_spacing: h,
        y_per_axis: per_axis,
        lip,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayMode {
    /// `|T_N f(x)|` at a single point.
    Pointwise,
    /// `‖T_N f‖_{L^p}` over the grid.
    Lp { p: f64 },
}

#[derive(Debug, Clone)]
pub struct DecayOptions {
    /// Pointwise evaluation point; defaults to `(0, …, 0, 0.3)`.
    pub point: Option<Vec<f64>>,
    /// Grid for `L^p` mode; defaults to `48ⁿ` cells over `[−0.5, 0.5]ⁿ`.
    pub grid: Option<XGrid>,
    pub osc: OscOptions,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions { point: None, grid: None, osc: OscOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub mode: DecayMode,
    pub ns: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: LineFit,
    /// `det ∇²_yφ` at the evaluation point and the amplitude's `y` center (pointwise mode).
    pub hessian_det: Option<f64>,
}

impl DecayFit {
    /// CSV with columns `N, norm`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["N", "norm"]).map_err(csv_err)?;
        for (n, v) in self.ns.iter().zip(&self.norms) {
            out.write_record([format!("{n}"), format!("{v:e}")]).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::Invalid(e.to_string()))
    }
}

fn check_geometric(ns: &[f64]) -> Result<()> {
    if ns.len() < 5 {
        return Err(Error::Invalid("a decay fit needs at least 5 frequencies".into()));
    }
    if ns.iter().any(|n| !(*n > 0.0)) {
        return Err(Error::Invalid("frequencies must be positive".into()));
    }
    let ratio = ns[1] / ns[0];
    if !(ratio > 1.0) || ns.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
        return Err(Error::Invalid("frequencies must form an increasing geometric sequence".into()));
    }
    Ok(())
}

/// Least-squares slope of `log ‖T_N f‖` against `log N`.
pub fn decay_fit(
    phi: &PhaseField,
    amp: &Amplitude,
    f: &Density,
    mode: DecayMode,
    ns: &[f64],
    opts: &DecayOptions,
) -> Result<DecayFit> {
    check_geometric(ns)?;
    let n = phi.dim();
    let (grid, hessian_det) = match mode {
        DecayMode::Pointwise => {
            let p = opts.point.clone().unwrap_or_else(|| {
                let mut p = vec![0.0; n];
                p[n - 1] = 0.3;
                p
            });
            let det = phi.hess_y(&p, &amp.y_center)?.determinant();
            (XGrid::point(&p), Some(det))
        }
        DecayMode::Lp { p } => {
            if !(p >= 1.0) {
                return Err(Error::Invalid("L^p mode needs p ≥ 1".into()));
            }
            (opts.grid.clone().unwrap_or_else(|| XGrid::cube(n, 0.5, 48)), None)
        }
    };
    let norms: Vec<Result<f64>> = ns
        .par_iter()
        .map(|&freq| {
            let field = osc_evaluate(phi, amp, f, freq, &grid, &opts.osc)?;
            Ok(match mode {
                DecayMode::Pointwise => field.values[0].norm(),
                DecayMode::Lp { p } => field.lp_norm(p),
            })
        })
        .collect();
    let norms: Vec<f64> = norms.into_iter().collect::<Result<_>>()?;
    if norms.iter().any(|v| !(*v > 1e-14)) {
        return Err(Error::Invalid("degenerate decay fit: some norm is below 1e-14".into()));
    }
    let lx: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let fit = fit_line(&lx, &ly)?;
    Ok(DecayFit { mode, ns: ns.to_vec(), norms, fit, hessian_det })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paraboloid() -> PhaseField {
        PhaseField::named("paraboloid").unwrap()
    }

    #[test]
    fn zero_frequency_is_plain_quadrature() {
        let amp = Amplitude::centered(3, 0.5);
        let x = [0.1, -0.05, 0.2];
        let field =
            osc_evaluate(&paraboloid(), &amp, &Density::one(), 0.0, &XGrid::point(&x), &Default::default()).unwrap();
        let (m, h) = (field.y_per_axis, field.y_spacing);
        let mut direct = 0.0;
        for i in 0..m {
            for j in 0..m {
                let y = [-0.5 + h * i as f64, -0.5 + h * j as f64];
                direct += amp.y_factor(&y) * h * h;
            }
        }
        direct *= amp.x_factor(&x);
        assert!((field.values[0].re - direct).abs() < 1e-10);
        assert!(field.values[0].im.abs() < 1e-15);
        // ∫(1 − |y|²/ρ²)⁴ over the disc = πρ²/5
        let exact = amp.x_factor(&x) * std::f64::consts::PI * 0.25 / 5.0;
        assert!((direct - exact).abs() < 1e-6 * exact, "{direct} vs {exact}");
    }

    #[test]
    fn zero_density() {
        let f = osc_evaluate(
            &paraboloid(),
            &Amplitude::centered(3, 0.5),
            &Density::zero(),
            16.0,
            &XGrid::cube(3, 0.4, 3),
            &Default::default(),
        )
        .unwrap();
        assert!(f.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn refinement_agrees() {
        let amp = Amplitude::centered(3, 0.5);
        let f = Density::Bump { center: vec![0.0, 0.0], radius: 0.4 };
        let g = XGrid::point(&[0.0, 0.0, 0.3]);
        let a = osc_evaluate(&paraboloid(), &amp, &f, 64.0, &g, &Default::default()).unwrap();
        let b =
            osc_evaluate(&paraboloid(), &amp, &f, 64.0, &g, &OscOptions { refine: 4, ..Default::default() }).unwrap();
        let (va, vb) = (a.values[0].norm(), b.values[0].norm());
        assert!((va - vb).abs() < 1e-4 * vb, "{va} {vb}");
        assert!(va <= a.bounds[0]);
    }

    #[test]
    fn guard_rejects_huge_grids() {
        let o = OscOptions { lip: Some(1e3), ..Default::default() };
        let r = osc_evaluate(
            &paraboloid(),
            &Amplitude::centered(3, 0.5),
            &Density::one(),
            1024.0,
            &XGrid::point(&[0.0, 0.0, 0.3]),
            &o,
        );
        assert!(matches!(r, Err(Error::Resolution(_))));
    }

    #[test]
    fn fit_input_checks() {
        let amp = Amplitude::centered(3, 0.5);
        let bad = decay_fit(
            &paraboloid(),
            &amp,
            &Density::one(),
            DecayMode::Pointwise,
            &[16.0, 32.0, 64.0],
            &Default::default(),
        );
        assert!(bad.is_err());
        let bad = decay_fit(
            &paraboloid(),
            &amp,
            &Density::one(),
            DecayMode::Pointwise,
            &[16.0, 32.0, 64.0, 100.0, 256.0],
            &Default::default(),
        );
        assert!(bad.is_err());
        let zero = decay_fit(
            &paraboloid(),
            &amp,
            &Density::zero(),
            DecayMode::Pointwise,
            &[16.0, 32.0, 64.0, 128.0, 256.0],
            &Default::default(),
        );
        assert!(zero.is_err());
    }
}
