use rayon::prelude::*;

use super::{ConditionReport, PhaseField, ReportBuilder, Rule};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Copy)]
pub struct WolffOptions {
    /// Half-window `T` of the `t` integral.
    pub half: f64,
    /// Relative change between trapezoid refinements that ends integration.
    pub rel_tol: f64,
    pub max_level: usize,
    pub starts: usize,
    pub iterations: usize,
    /// Reported lower bound the infimum must clear.
    pub lower: f64,
}

impl Default for WolffOptions {
    fn default() -> Self {
        WolffOptions { half: 1.0, rel_tol: 1e-4, max_level: 14, starts: 9, iterations: 400, lower: 0.3 }
    }
}

const FIRST_LEVEL: usize = 4;

/// The curve `t ↦ Φ(v, t; ξ)` solving `∇_ξφ(Φ, t; ξ) = v`, with `∇²_ξφ` cached on
/// dyadic grids of `[−T, T]` as integration refines.
pub struct WolffCurve<'a> {
    phi: &'a PhaseField,
    v: Vec<f64>,
    xi: Vec<f64>,
    half: f64,
    level: usize,
    points: Vec<Vec<f64>>,
    hess: Vec<Mat>,
}

impl<'a> WolffCurve<'a> {
    pub fn new(phi: &'a PhaseField, v: &[f64], xi: &[f64], half: f64) -> Result<WolffCurve<'a>> {
        let n = phi.dim();
        if v.len() != n - 1 || xi.len() != n - 1 {
            return Err(Error::Invalid(format!("v and ξ need {} components", n - 1)));
        }
        if !(half > 0.0) || !half.is_finite() {
            return Err(Error::Invalid("half-window must be positive".into()));
        }
        let count = (1 << FIRST_LEVEL) + 1;
        let mid = count / 2;
        let h = 2.0 * half / (count - 1) as f64;
        let mut points = vec![Vec::new(); count];
        let mut hess = vec![Mat::zeros(n - 1, n - 1); count];
        let (p0, h0) = solve_point(phi, v, xi, 0.0, v)?;
        points[mid] = p0.clone();
        hess[mid] = h0;
        for dir in [1i64, -1] {
            let mut guess = p0.clone();
            for k in 1..=mid as i64 {
                let j = (mid as i64 + dir * k) as usize;
                let t = -half + h * j as f64;
                let (p, hh) = solve_point(phi, v, xi, t, &guess)?;
                guess = p.clone();
                points[j] = p;
                hess[j] = hh;
            }
        }
        Ok(WolffCurve { phi, v: v.to_vec(), xi: xi.to_vec(), half, level: FIRST_LEVEL, points, hess })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    fn refine(&mut self) -> Result<()> {
        let old = self.points.len();
        let count = 2 * (old - 1) + 1;
        let h = 2.0 * self.half / (count - 1) as f64;
        let fresh: Vec<Result<(Vec<f64>, Mat)>> = (0..old - 1)
            .into_par_iter()
            .map(|i| {
                let guess: Vec<f64> =
                    self.points[i].iter().zip(&self.points[i + 1]).map(|(a, b)| 0.5 * (a + b)).collect();
                let t = -self.half + h * (2 * i + 1) as f64;
                solve_point(self.phi, &self.v, &self.xi, t, &guess)
            })
            .collect();
        let mut points = Vec::with_capacity(count);
        let mut hess = Vec::with_capacity(count);
        for (i, f) in fresh.into_iter().enumerate() {
            let (p, hh) = f?;
            points.push(self.points[i].clone());
            hess.push(self.hess[i].clone());
            points.push(p);
            hess.push(hh);
        }
        points.push(self.points[old - 1].clone());
        hess.push(self.hess[old - 1].clone());
        self.points = points;
        self.hess = hess;
        self.level += 1;
        Ok(())
    }

    fn trapezoid(&self, m: &Mat, level: usize) -> f64 {
        let stride = 1 << (self.level - level);
        let last = self.hess.len() - 1;
        let h = 2.0 * self.half / (1 << level) as f64;
        let mut sum = 0.0;
        for j in (0..=last).step_by(stride) {
            let w = if j == 0 || j == last { 0.5 } else { 1.0 };
            sum += w * (m + &self.hess[j]).determinant().abs();
        }
        sum * h
    }

    /// `∫_{|t|≤T} |det(M + ∇²_ξφ(Φ(v, t; ξ), t; ξ))| dt`; the flag is false when
    /// `max_level` was reached before the relative change fell below `rel_tol`.
    pub fn integrate(&mut self, m: &Mat, rel_tol: f64, max_level: usize) -> Result<(f64, bool)> {
        let mut level = FIRST_LEVEL;
        let mut prev = self.trapezoid(m, level);
        loop {
            if level == max_level {
                return Ok((prev, false));
            }
            level += 1;
            if self.level < level {
                self.refine()?;
            }
            let cur = self.trapezoid(m, level);
            if (cur - prev).abs() <= rel_tol * cur.abs().max(1e-8) {
                return Ok((cur, true));
            }
            prev = cur;
        }
    }
}

fn solve_point(phi: &PhaseField, v: &[f64], xi: &[f64], t: f64, guess: &[f64]) -> Result<(Vec<f64>, Mat)> {
    let n = phi.dim();
    let mut cur = guess[..n - 1].to_vec();
    cur.push(t);
    let scale = 1.0 + v.iter().map(|a| a.abs()).fold(0.0, f64::max);
    for _ in 0..60 {
        let f: Vec<f64> = phi.grad_y(&cur, xi)?.iter().zip(v).map(|(a, b)| a - b).collect();
        let norm = f.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-13 * scale {
            let h = phi.hess_y(&cur, xi)?;
            cur.truncate(n - 1);
            return Ok((cur, h));
        }
        let jac = phi.mixed(&cur, xi)?.rows(0, n - 1).transpose();
        let step = jac
            .lu()
            .solve(&Vector::from_vec(f))
            .ok_or_else(|| Error::Singular("mixed Hessian along the curve".into()))?;
        for k in 0..n - 1 {
            cur[k] -= step[k];
        }
    }
    Err(Error::NoConvergence { what: format!("curve point at t = {t}"), iters: 60, residual: f64::NAN })
}

/// The Wolff functional for a single matrix `M`.
pub fn wolff_functional(phi: &PhaseField, v: &[f64], xi: &[f64], m: &Mat, opts: &WolffOptions) -> Result<f64> {
    let mut curve = WolffCurve::new(phi, v, xi, opts.half)?;
    Ok(curve.integrate(m, opts.rel_tol, opts.max_level)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Downhill simplex from `x0` with initial edge `scale`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], scale: f64, iterations: usize) -> SimplexResult {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += scale;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let combo = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    for it in 0..iterations {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[d] - vals[0];
        let size = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= 1e-12 * (1.0 + vals[0].abs()) && size <= 1e-8 * (1.0 + scale) {
            return SimplexResult { x: simplex[0].clone(), value: vals[0], iterations: it, converged: true };
        }
        let mut centroid = vec![0.0; d];
        for p in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / d as f64;
            }
        }
        let refl = combo(&centroid, &simplex[d], -1.0);
        let fr = f(&refl);
        if fr < vals[0] {
            let exp = combo(&centroid, &simplex[d], -2.0);
            let fe = f(&exp);
            if fe < fr {
                simplex[d] = exp;
                vals[d] = fe;
            } else {
                simplex[d] = refl;
                vals[d] = fr;
            }
        } else if fr < vals[d - 1] {
            simplex[d] = refl;
            vals[d] = fr;
        } else {
            let (target, ft) = if fr < vals[d] { (refl.clone(), fr) } else { (simplex[d].clone(), vals[d]) };
            let con = combo(&centroid, &target, 0.5);
            let fc = f(&con);
            if fc < ft {
                simplex[d] = con;
                vals[d] = fc;
            } else {
                for i in 1..=d {
                    simplex[i] = combo(&simplex[0], &simplex[i], 0.5);
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=d).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    SimplexResult { x: simplex[best].clone(), value: vals[best], iterations, converged: false }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WolffInfimum {
    pub value: f64,
    pub argmin: Mat,
    /// Every start reached the simplex tolerance.
    pub converged: bool,
    /// Some integral stopped at the level cap.
    pub integration_capped: bool,
}

/// Smallest functional value over `2×2` matrices `M`, by multi-start simplex.
pub fn wolff_infimum(phi: &PhaseField, v: &[f64], xi: &[f64], opts: &WolffOptions) -> Result<WolffInfimum> {
    if phi.dim() != 3 {
        return Err(Error::Invalid("the Wolff functional is defined for n = 3".into()));
    }
    let mut curve = WolffCurve::new(phi, v, xi, opts.half)?;
    let grid = [-1.0, 0.0, 1.0];
    let starts: Vec<[f64; 4]> =
        grid.iter().flat_map(|&a| grid.iter().map(move |&b| [a, 0.0, 0.0, b])).take(opts.starts.max(1)).collect();
    let mut best: Option<WolffInfimum> = None;
    let mut all_converged = true;
    let mut capped = false;
    let mut failure: Option<Error> = None;
    for s in &starts {
        let res = nelder_mead(
            |x| {
                let m = Mat::from_row_slice(2, 2, x);
                match curve.integrate(&m, opts.rel_tol, opts.max_level) {
                    Ok((val, ok)) => {
                        capped |= !ok;
                        val
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            },
            s,
            0.5,
            opts.iterations,
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
        all_converged &= res.converged;
        if best.as_ref().map_or(true, |b| res.value < b.value) {
            best = Some(WolffInfimum {
                value: res.value,
                argmin: Mat::from_row_slice(2, 2, &res.x),
                converged: false,
                integration_capped: false,
            });
        }
    }
    let mut out = best.ok_or_else(|| Error::Invalid("no starting matrices".into()))?;
    out.converged = all_converged;
    out.integration_capped = capped;
    Ok(out)
}

/// Report whether the infimum clears the lower bound `opts.lower`.
pub fn wolff_report(phi: &PhaseField, v: &[f64], xi: &[f64], opts: &WolffOptions) -> Result<ConditionReport> {
    let inf = wolff_infimum(phi, v, xi, opts)?;
    let at_zero = wolff_functional(phi, v, xi, &Mat::zeros(2, 2), opts)?;
    let mut b = ReportBuilder::new("wolff")
        .point([v, xi].concat())
        .residual("wolff_infimum", inf.value)
        .threshold("wolff_infimum", opts.lower)
        .diag("argmin", &inf.argmin)
        .diag("value_at_zero", at_zero)
        .diag("half_window", opts.half)
        .diag("phase", phi.label());
    if !inf.converged {
        b = b.diag("flag", "simplex did not converge from every start; best value reported");
    }
    if inf.integration_capped {
        b = b.diag("integration", "refinement cap reached for some matrices");
    }
    b.build(Rule::AllAbove { residuals: vec!["wolff_infimum".into()] })
}
