use crate::error::{Error, Result};
use crate::geodesics::ShootingOptions;
use crate::jacobi::{distance_jets, DistanceJets, JacobiOptions};
use crate::jets::Jet;
use crate::linalg::Mat;
use crate::numerics::central_weights;
use crate::poly::Poly;
use crate::riemann::MetricField;

/// Finite-difference step for distance-derived phases.
pub const DISTANCE_FD_STEP: f64 = 2e-3;
/// Shooting step count used for every distance-phase evaluation, so nearby
/// evaluations share one discretization.
pub const DISTANCE_SHOOTING_STEPS: usize = 128;

#[derive(Debug, Clone)]
struct PolyPhase {
    poly: Poly,
    grad_y: Vec<Poly>,
    hess_y: Vec<Vec<Poly>>,
    /// `∂_{x_k}∂_{y_i}φ` at `[k][i]`
    mixed: Vec<Vec<Poly>>,
}

#[derive(Debug, Clone)]
enum Kind {
    Polynomial(Box<PolyPhase>),
    Distance { metric: MetricField, eps: f64 },
}

/// A phase `φ(x, t; y)` with `(x, t) ∈ Rⁿ` and `y ∈ Rⁿ⁻¹`. Points on the
/// `(x, t)` side are passed as one slice with `t` last.
#[derive(Debug, Clone)]
pub struct PhaseField {
    n: usize,
    kind: Kind,
    label: String,
}

/// Library phases (n = 3), polynomial in `(x₁, x₂, t, y₁, y₂)`.
pub const PHASE_NAMES: [&str; 5] = ["paraboloid", "bourgain", "test4", "xi5", "degenerate"];

impl PhaseField {
    /// Polynomial phase in `(x₁ … x_{n−1}, t, y₁ … y_{n−1})`.
    pub fn polynomial(n: usize, poly: Poly, label: &str) -> Result<PhaseField> {
        if n < 2 {
            return Err(Error::Invalid("phases need n ≥ 2".into()));
        }
        if poly.nvars() != 2 * n - 1 {
            return Err(Error::Invalid(format!(
                "phase polynomial needs {} variables, got {}",
                2 * n - 1,
                poly.nvars()
            )));
        }
        let yv = |i: usize| n + i;
        let grad_y: Vec<Poly> = (0..n - 1).map(|i| poly.derivative(yv(i))).collect();
        let hess_y = (0..n - 1).map(|i| (0..n - 1).map(|j| grad_y[i].derivative(yv(j))).collect()).collect();
        let mixed = (0..n).map(|k| (0..n - 1).map(|i| grad_y[i].derivative(k)).collect()).collect();
        Ok(PhaseField {
            n,
            kind: Kind::Polynomial(Box::new(PolyPhase { poly, grad_y, hess_y, mixed })),
            label: label.to_string(),
        })
    }

    /// `φ(x, t; y) = dist((x, t), (y, ε))`.
    pub fn distance(metric: MetricField, eps: f64) -> Result<PhaseField> {
        if !(eps.is_finite()) {
            return Err(Error::Invalid("ε must be finite".into()));
        }
        let n = metric.dim();
        let label = format!("distance[{}; ε={eps}]", metric.label());
        Ok(PhaseField { n, kind: Kind::Distance { metric, eps }, label })
    }

    pub fn named(name: &str) -> Result<PhaseField> {
        let p = |pairs: &[(f64, &[u32])]| Poly::from_pairs(5, pairs);
        let xy: [(f64, &[u32]); 2] = [(1.0, &[1, 0, 0, 1, 0]), (1.0, &[0, 1, 0, 0, 1])];
        let with = |extra: &[(f64, &[u32])]| -> Result<Poly> {
            let mut all = xy.to_vec();
            all.extend_from_slice(extra);
            p(&all)
        };
        let poly = match name {
            "paraboloid" => with(&[(1.0, &[0, 0, 1, 2, 0]), (1.0, &[0, 0, 1, 0, 2])])?,
            "bourgain" => with(&[(1.0, &[0, 0, 1, 1, 1]), (0.5, &[0, 0, 2, 2, 0])])?,
            "test4" => with(&[
                (0.5, &[0, 0, 1, 2, 0]),
                (0.5, &[0, 0, 1, 0, 2]),
                (0.5, &[0, 0, 2, 1, 1]),
                (0.5, &[0, 0, 3, 2, 0]),
            ])?,
            "xi5" => with(&[(1.0, &[0, 0, 1, 1, 1]), (1.0, &[0, 0, 2, 5, 0])])?,
            "degenerate" => with(&[])?,
            other => {
                return Err(Error::Invalid(format!("unknown phase `{other}` (known: {})", PHASE_NAMES.join(", "))))
            }
        };
        PhaseField::polynomial(3, poly, name)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn polynomial_form(&self) -> Option<&Poly> {
        match &self.kind {
            Kind::Polynomial(p) => Some(&p.poly),
            Kind::Distance { .. } => None,
        }
    }

    pub fn distance_source(&self) -> Option<(&MetricField, f64)> {
        match &self.kind {
            Kind::Distance { metric, eps } => Some((metric, *eps)),
            Kind::Polynomial(_) => None,
        }
    }

    fn check(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.n || y.len() != self.n - 1 {
            return Err(Error::Invalid(format!("phase point needs {} (x, t) and {} y components", self.n, self.n - 1)));
        }
        Ok(())
    }

    fn args(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        [x, y].concat()
    }

    /// Two-point data of a distance phase at `(x; y)`.
    pub fn distance_data(&self, x: &[f64], y: &[f64], order: usize) -> Result<DistanceJets> {
        self.check(x, y)?;
        match &self.kind {
            Kind::Distance { metric, eps } => {
                let q: Vec<f64> = y.iter().copied().chain(std::iter::once(*eps)).collect();
                let shoot = ShootingOptions { steps: Some(DISTANCE_SHOOTING_STEPS), ..Default::default() };
                distance_jets(metric, x, &q, &shoot, &JacobiOptions { order: order.max(1), ..Default::default() })
            }
            Kind::Polynomial(_) => Err(Error::Invalid("not a distance phase".into())),
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x, y)?;
        match &self.kind {
            Kind::Polynomial(p) => Ok(p.poly.eval(&self.args(x, y))),
            Kind::Distance { .. } => Ok(self.distance_data(x, y, 1)?.value),
        }
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check(x, y)?;
        match &self.kind {
            Kind::Polynomial(p) => {
                let a = self.args(x, y);
                Ok(p.grad_y.iter().map(|q| q.eval(&a)).collect())
            }
            Kind::Distance { .. } => Ok(self.distance_data(x, y, 1)?.grad_end[..self.n - 1].to_vec()),
        }
    }

    /// `∇²_y φ`.
    pub fn hess_y(&self, x: &[f64], y: &[f64]) -> Result<Mat> {
        Ok(self.hess_y_line(x, &vec![0.0; self.n], y, 0)?.remove(0))
    }

    /// `∂_{x_k}∂_{y_i}φ` (n × (n−1)).
    pub fn mixed(&self, x: &[f64], y: &[f64]) -> Result<Mat> {
        Ok(self.mixed_line(x, &vec![0.0; self.n], y, 0)?.remove(0))
    }

    /// `d^k/dh^k ∇²_yφ(x + h v; y)` at `h = 0` for `k = 0..=order`.
    pub fn hess_y_line(&self, x: &[f64], v: &[f64], y: &[f64], order: usize) -> Result<Vec<Mat>> {
        self.check(x, y)?;
        let m = self.n - 1;
        match &self.kind {
            Kind::Polynomial(p) => {
                let inputs = line_inputs(x, v, y, order)?;
                let jets: Vec<Vec<Jet>> =
                    p.hess_y.iter().map(|row| row.iter().map(|q| q.eval_jet(&inputs)).collect()).collect();
                (0..=order).map(|k| jet_matrix(&jets, m, m, k)).collect()
            }
            Kind::Distance { .. } => self.fd_line(x, v, order, |xx| {
                let d = self.distance_data(xx, y, 1)?;
                Ok(d.hess_end.view((0, 0), (m, m)).into_owned())
            }),
        }
    }

    /// `d^k/dh^k` of the mixed matrix along `x + h v`.
    pub fn mixed_line(&self, x: &[f64], v: &[f64], y: &[f64], order: usize) -> Result<Vec<Mat>> {
        self.check(x, y)?;
        let (n, m) = (self.n, self.n - 1);
        match &self.kind {
            Kind::Polynomial(p) => {
                let inputs = line_inputs(x, v, y, order)?;
                let jets: Vec<Vec<Jet>> =
                    p.mixed.iter().map(|row| row.iter().map(|q| q.eval_jet(&inputs)).collect()).collect();
                (0..=order).map(|k| jet_matrix(&jets, n, m, k)).collect()
            }
            Kind::Distance { .. } => self.fd_line(x, v, order, |xx| {
                let d = self.distance_data(xx, y, 1)?;
                Ok(d.mixed.columns(0, m).into_owned())
            }),
        }
    }

    fn fd_line<F>(&self, x: &[f64], v: &[f64], order: usize, f: F) -> Result<Vec<Mat>>
    where
        F: Fn(&[f64]) -> Result<Mat>,
    {
        let center = f(x)?;
        if order == 0 || v.iter().all(|c| *c == 0.0) {
            let mut out = vec![center.clone()];
            out.extend((0..order).map(|_| center.clone() * 0.0));
            return Ok(out);
        }
        let r = if order <= 2 { 2 } else { order.div_ceil(2) + 1 };
        let h = DISTANCE_FD_STEP;
        let w = central_weights(r, h, order);
        let mut samples = Vec::with_capacity(2 * r + 1);
        for j in 0..=2 * r {
            if j == r {
                samples.push(center.clone());
                continue;
            }
            let s = (j as f64 - r as f64) * h;
            let xx: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + s * b).collect();
            samples.push(f(&xx)?);
        }
        let mut out = vec![center];
        for k in 1..=order {
            let mut acc = samples[0].clone() * 0.0;
            for (j, s) in samples.iter().enumerate() {
                acc += s * w[k][j];
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// `d^k/dt^k ∇²_yφ(X(t), t; y)`, `k = 0..=order`, along the curve through `x`
    /// on which `∇_yφ(·; y)` stays constant (polynomial phases, exact jets).
    pub fn core_hessian_derivatives(&self, x: &[f64], y: &[f64], order: usize) -> Result<Vec<Mat>> {
        self.check(x, y)?;
        let Kind::Polynomial(p) = &self.kind else {
            return Err(Error::Invalid("core-curve jets need a polynomial phase".into()));
        };
        let (n, m) = (self.n, self.n - 1);
        let a = self.args(x, y);
        let target: Vec<f64> = p.grad_y.iter().map(|q| q.eval(&a)).collect();
        let jac = Mat::from_fn(m, m, |i, k| p.mixed[k][i].eval(&a));
        let jinv = jac.try_inverse().ok_or_else(|| Error::Singular("mixed Hessian on the core curve".into()))?;
        let t = Jet::variable(0, 0.0, 1, order)?;
        let mut xs: Vec<Jet> = (0..m).map(|k| Jet::constant(x[k], 1, order)).collect::<Result<_>>()?;
        let tail: Vec<Jet> = std::iter::once(Ok(t.add_scalar(x[n - 1])))
            .chain(y.iter().map(|b| Jet::constant(*b, 1, order)))
            .collect::<Result<_>>()?;
        for _ in 0..order + 2 {
            let inputs: Vec<Jet> = xs.iter().cloned().chain(tail.iter().cloned()).collect();
            let f: Vec<Jet> = p.grad_y.iter().zip(&target).map(|(q, c)| q.eval_jet(&inputs).add_scalar(-c)).collect();
            for k in 0..m {
                for i in 0..m {
                    xs[k] = &xs[k] - &f[i].scale(jinv[(k, i)]);
                }
            }
        }
        let inputs: Vec<Jet> = xs.into_iter().chain(tail).collect();
        let jets: Vec<Vec<Jet>> =
            p.hess_y.iter().map(|row| row.iter().map(|q| q.eval_jet(&inputs)).collect()).collect();
        (0..=order).map(|k| jet_matrix(&jets, m, m, k)).collect()
    }

    /// Point `X(t₀ + dt)` of the same curve by Newton from `guess`, with `∇²_yφ` there.
    pub fn core_point(&self, x: &[f64], y: &[f64], dt: f64, guess: &[f64]) -> Result<(Vec<f64>, Mat)> {
        self.check(x, y)?;
        let n = self.n;
        let target = self.grad_y(x, y)?;
        let mut cur: Vec<f64> = guess.to_vec();
        cur.push(x[n - 1] + dt);
        for it in 0..60 {
            let f: Vec<f64> = self.grad_y(&cur, y)?.iter().zip(&target).map(|(a, b)| a - b).collect();
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-14 * (1.0 + target.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                let h = self.hess_y(&cur, y)?;
                return Ok((cur, h));
            }
            if it == 59 {
                return Err(Error::NoConvergence { what: "core curve".into(), iters: 60, residual: norm });
            }
            let mixed = self.mixed(&cur, y)?;
            let jac = mixed.rows(0, n - 1).transpose();
            let step = jac
                .lu()
                .solve(&crate::linalg::Vector::from_vec(f))
                .ok_or_else(|| Error::Singular("mixed Hessian on the core curve".into()))?;
            for k in 0..n - 1 {
                cur[k] -= step[k];
            }
        }
        unreachable!()
    }

    /// Polynomial phase rescaled by `c`.
    pub fn scaled(&self, c: f64) -> Result<PhaseField> {
        match &self.kind {
            Kind::Polynomial(p) => PhaseField::polynomial(self.n, p.poly.scale(c), &format!("{}·{c}", self.label)),
            Kind::Distance { .. } => Err(Error::Invalid("only polynomial phases can be rescaled".into())),
        }
    }
}

// univariate jets in h for (x + h v, y)
fn line_inputs(x: &[f64], v: &[f64], y: &[f64], order: usize) -> Result<Vec<Jet>> {
    let h = Jet::variable(0, 0.0, 1, order)?;
    let mut out: Vec<Jet> = x.iter().zip(v).map(|(a, b)| h.scale(*b).add_scalar(*a)).collect();
    for b in y {
        out.push(Jet::constant(*b, 1, order)?);
    }
    Ok(out)
}

fn jet_matrix(jets: &[Vec<Jet>], rows: usize, cols: usize, k: usize) -> Result<Mat> {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = jets[i][j].partial(&[k as u8])?;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bourgain_hessian() {
        let p = PhaseField::named("bourgain").unwrap();
        let h = p.hess_y_line(&[0.0; 3], &[0.0, 0.0, 1.0], &[0.0; 2], 2).unwrap();
        assert_eq!(h[0], Mat::zeros(2, 2));
        assert_eq!(h[1], Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(h[2], Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let mx = p.mixed(&[0.1, 0.2, 0.3], &[0.4, 0.5]).unwrap();
        // ∂ξ₁∇φ = (1, 0, ξ₂ + 2tξ₁), ∂ξ₂∇φ = (0, 1, ξ₁)
        assert!((mx[(2, 0)] - (0.5 + 2.0 * 0.3 * 0.4)).abs() < 1e-15 && (mx[(2, 1)] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn flat_distance_phase() {
        let p = PhaseField::distance(MetricField::euclidean(3).unwrap(), 0.3).unwrap();
        let x = [0.1, -0.1, 0.0];
        let y = [0.05, 0.02];
        let d = ((0.05f64 - 0.1).powi(2) + (0.02f64 + 0.1).powi(2) + 0.09).sqrt();
        assert!((p.value(&x, &y).unwrap() - d).abs() < 1e-12);
        let g = p.grad_y(&x, &y).unwrap();
        assert!((g[0] - (0.05 - 0.1) / d).abs() < 1e-10);
        let h = p.hess_y(&x, &y).unwrap();
        let u = [(0.05 - 0.1) / d, (0.02 + 0.1) / d];
        for i in 0..2 {
            for j in 0..2 {
                let want = ((i == j) as u8 as f64 - u[i] * u[j]) / d;
                assert!((h[(i, j)] - want).abs() < 1e-9);
            }
        }
    }
}
