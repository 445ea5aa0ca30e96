//! Finite-difference weights and small least-squares fits.

use crate::error::{Error, Result};
use crate::linalg::{condition_number, Mat, Vector};

/// Fornberg's finite-difference weights: `w[k][j]` approximates the `k`-th
/// derivative at `x0` as `Σ_j w[k][j] f(xs[j])`, for `k = 0..=max_deriv`.
pub fn fornberg(x0: f64, xs: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Weights of the symmetric `2r + 1`-point stencil with spacing `h`.
pub fn central_weights(r: usize, h: f64, max_deriv: usize) -> Vec<Vec<f64>> {
    let xs: Vec<f64> = (0..=2 * r).map(|j| (j as f64 - r as f64) * h).collect();
    fornberg(0.0, &xs, max_deriv)
}

/// Ordinary least squares `y ≈ X β`; fails when `cond(X) > max_cond`.
pub fn least_squares(x: &Mat, y: &Vector, max_cond: f64) -> Result<(Vector, f64)> {
    let cond = condition_number(x);
    if !(cond <= max_cond) {
        return Err(Error::IllConditioned { what: "least-squares design".into(), cond });
    }
    let svd = x.clone().svd(true, true);
    let beta = svd.solve(y, 1e-14).map_err(|e| Error::Singular(e.to_string()))?;
    Ok((beta, cond))
}

/// Straight-line fit `y = slope·x + intercept` with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Invalid("line fit needs at least two paired samples".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("line fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LineFit { slope, intercept: my - slope * mx, r2 })
}

/// `n` points geometrically spaced from `start` with ratio `ratio`.
pub fn geometric(start: f64, ratio: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start * ratio.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_point_weights() {
        let w = central_weights(2, 1.0, 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn weights_differentiate_polynomials() {
        let w = central_weights(4, 0.1, 4);
        let xs: Vec<f64> = (0..9).map(|j| (j as f64 - 4.0) * 0.1).collect();
        let f = |x: f64| 1.0 + 2.0 * x + 3.0 * x.powi(3) + x.powi(4);
        let d: Vec<f64> = (0..=4).map(|k| w[k].iter().zip(&xs).map(|(a, x)| a * f(*x)).sum()).collect();
        let want = [1.0, 2.0, 0.0, 18.0, 24.0];
        for k in 0..=4 {
            assert!((d[k] - want[k]).abs() < 1e-8, "{k}: {}", d[k]);
        }
    }

    #[test]
    fn line_fit() {
        let xs = [0.0, 1.0, 2.0];
        let f = fit_line(&xs, &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14 && (f.r2 - 1.0).abs() < 1e-14);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
