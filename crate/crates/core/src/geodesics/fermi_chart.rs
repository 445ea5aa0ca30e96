use crate::error::{Error, Result};
use crate::geodesics::{default_frame, integrate_nodes, unit_velocity};
use crate::linalg::{condition_number, Mat, Vector};
use crate::riemann::MetricField;

const AXIS_STEPS: usize = 64;
const EXP_STEPS: usize = 64;

/// Fermi coordinates `(x₁, …, x_{n−1}, t) ↦ exp_{γ(t)}(Σ x_i E_i(t))` along the
/// unit-speed geodesic `γ` through `base` with parallel frame `E`.
#[derive(Debug, Clone)]
pub struct FermiChart {
    base: Vec<f64>,
    velocity: Vec<f64>,
    frame0: Vec<Vec<f64>>,
}

impl FermiChart {
    pub fn new(m: &MetricField, base: &[f64], direction: &[f64], frame0: Option<&[Vec<f64>]>) -> Result<FermiChart> {
        let velocity = unit_velocity(m, base, direction)?;
        let frame0 = match frame0 {
            Some(f) => f.to_vec(),
            None => default_frame(&m.eval(base)?, &velocity)?,
        };
        Ok(FermiChart { base: base.to_vec(), velocity, frame0 })
    }

    /// Axis point, velocity and frame at arclength `t` (fixed step count, so the
    /// result is smooth in `t`).
    pub fn axis(&self, m: &MetricField, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let n = m.dim();
        let mut y0 = [&self.base[..], &self.velocity[..]].concat();
        for e in &self.frame0 {
            y0.extend_from_slice(e);
        }
        let y = if t == 0.0 {
            y0
        } else {
            integrate_nodes(m, y0, t / AXIS_STEPS as f64, AXIS_STEPS)?.pop().expect("non-empty")
        };
        let frame = (0..n - 1).map(|k| y[2 * n + k * n..2 * n + (k + 1) * n].to_vec()).collect();
        Ok((y[..n].to_vec(), y[n..2 * n].to_vec(), frame))
    }

    pub fn map(&self, m: &MetricField, x: &[f64]) -> Result<Vec<f64>> {
        let n = m.dim();
        if x.len() != n {
            return Err(Error::Invalid("Fermi coordinates need one entry per dimension".into()));
        }
        let (p, _, frame) = self.axis(m, x[n - 1])?;
        let mut w = vec![0.0; n];
        for (k, e) in frame.iter().enumerate() {
            for i in 0..n {
                w[i] += x[k] * e[i];
            }
        }
        if w.iter().all(|c| *c == 0.0) {
            return Ok(p);
        }
        let nodes = integrate_nodes(m, [&p[..], &w[..]].concat(), 1.0 / EXP_STEPS as f64, EXP_STEPS)?;
        Ok(nodes.last().expect("non-empty")[..n].to_vec())
    }

    /// Differential of the chart map by Richardson-extrapolated central differences.
    pub fn differential(&self, m: &MetricField, x: &[f64]) -> Result<Mat> {
        let n = m.dim();
        let h = 1e-4;
        let mut jac = Mat::zeros(n, n);
        for j in 0..n {
            let diff = |step: f64| -> Result<Vec<f64>> {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += step;
                xm[j] -= step;
                let (a, b) = (self.map(m, &xp)?, self.map(m, &xm)?);
                Ok(a.iter().zip(&b).map(|(u, v)| (u - v) / (2.0 * step)).collect())
            };
            let fine = diff(h)?;
            let coarse = diff(2.0 * h)?;
            for i in 0..n {
                jac[(i, j)] = (4.0 * fine[i] - coarse[i]) / 3.0;
            }
        }
        Ok(jac)
    }

    /// Metric in Fermi coordinates, `dΨᵀ g(Ψ) dΨ`.
    pub fn pullback_metric(&self, m: &MetricField, x: &[f64]) -> Result<Mat> {
        let jac = self.differential(m, x)?;
        let g = m.eval(&self.map(m, x)?)?;
        Ok(jac.transpose() * g * jac)
    }

    /// Fermi coordinates of a chart point near the axis (Newton on the chart map).
    pub fn inverse(&self, m: &MetricField, q: &[f64]) -> Result<Vec<f64>> {
        let n = m.dim();
        let mut x = vec![0.0; n];
        for it in 0..50 {
            let r = Vector::from_iterator(n, self.map(m, &x)?.iter().zip(q).map(|(a, b)| a - b));
            if r.norm() < 1e-12 {
                return Ok(x);
            }
            let jac = self.differential(m, &x)?;
            let cond = condition_number(&jac);
            if cond > 1e8 {
                return Err(Error::IllConditioned { what: "Fermi chart differential".into(), cond });
            }
            let dx = jac.lu().solve(&(-r)).ok_or_else(|| Error::Singular("Fermi chart differential".into()))?;
            for i in 0..n {
                x[i] += dx[i];
            }
            if it == 49 {
                break;
            }
        }
        Err(Error::NoConvergence { what: "Fermi chart inverse".into(), iters: 50, residual: f64::NAN })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_chart_is_identity() {
        let m = MetricField::euclidean(3).unwrap();
        let f = FermiChart::new(&m, &[0.0; 3], &[0.0, 0.0, 1.0], None).unwrap();
        let x = [0.1, -0.2, 0.3];
        let p = f.map(&m, &x).unwrap();
        for i in 0..3 {
            assert!((p[i] - x[i]).abs() < 1e-14);
        }
        let back = f.inverse(&m, &p).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}
