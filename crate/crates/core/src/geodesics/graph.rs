use crate::error::{Error, Result};
use crate::riemann::{christoffel, MetricField};

/// A curve `t ↦ (X₁(t), X₂(t), t)` with closed-form derivatives.
pub trait GraphCurve {
    /// `(X(t), X'(t), X''(t))` for the two graph components.
    fn jet(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]);
}

impl<F> GraphCurve for F
where
    F: Fn(f64) -> ([f64; 2], [f64; 2], [f64; 2]),
{
    fn jet(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        self(t)
    }
}

/// Core curves of Bourgain's phase:
/// `X₁ = z₁ + τξ₂ + τ²ξ₁ − tξ₂ − t²ξ₁`, `X₂ = z₂ + τξ₁ − tξ₁`.
#[derive(Debug, Clone, Copy)]
pub struct CoreCurve {
    pub z: [f64; 2],
    pub tau: f64,
    pub xi: [f64; 2],
}

impl GraphCurve for CoreCurve {
    fn jet(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let [z1, z2] = self.z;
        let [a, b] = self.xi;
        let tau = self.tau;
        (
            [z1 + tau * b + tau * tau * a - t * b - t * t * a, z2 + tau * a - t * a],
            [-b - 2.0 * t * a, -a],
            [-2.0 * a, 0.0],
        )
    }
}

#[derive(Debug, Clone)]
pub struct GraphResidual {
    pub max: f64,
    /// `(t, [r₁, r₂, r₃])` per sample
    pub profile: Vec<(f64, [f64; 3])>,
}

/// Residual of the geodesic equation written for graphs over the third coordinate:
/// `ẍ^μ + Γ^μ(ẋ,ẋ) − Γ³(ẋ,ẋ) ẋ^μ` with `ẋ = (X', 1)`, `ẍ = (X'', 0)`.
pub fn graph_geodesic_residual(m: &MetricField, curve: &dyn GraphCurve, ts: &[f64]) -> Result<GraphResidual> {
    if m.dim() != 3 {
        return Err(Error::Invalid("graph geodesics are defined over three-dimensional charts".into()));
    }
    let mut profile = Vec::with_capacity(ts.len());
    let mut max = 0.0f64;
    for &t in ts {
        let (x, dx, ddx) = curve.jet(t);
        let p = [x[0], x[1], t];
        let c = christoffel(m, &p)?;
        let v = [dx[0], dx[1], 1.0];
        let a = [ddx[0], ddx[1], 0.0];
        let gv = c.contract(&v, &v);
        let r: [f64; 3] = std::array::from_fn(|mu| a[mu] + gv[mu] - gv[2] * v[mu]);
        max = r.iter().fold(max, |acc, x| acc.max(x.abs()));
        profile.push((t, r));
    }
    Ok(GraphResidual { max, profile })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn flat_examples() {
        let m = MetricField::euclidean(3).unwrap();
        let ts = grid(11, -0.5, 0.5);
        let line = |t: f64| ([0.1 + 0.3 * t, -0.2 + 0.5 * t], [0.3, 0.5], [0.0, 0.0]);
        assert_eq!(graph_geodesic_residual(&m, &line, &ts).unwrap().max, 0.0);
        let para = |t: f64| ([t * t, 0.0], [2.0 * t, 0.0], [2.0, 0.0]);
        let r = graph_geodesic_residual(&m, &para, &ts).unwrap();
        assert!(r.profile.iter().all(|(_, r)| r[0] == 2.0 && r[1] == 0.0 && r[2] == 0.0));
    }

    #[test]
    fn appendix_core_curves_are_geodesics() {
        let m = MetricField::appendix_bourgain();
        let c = CoreCurve { z: [0.1, -0.2], tau: 0.3, xi: [0.4, -0.25] };
        let r = graph_geodesic_residual(&m, &c, &grid(21, -0.5, 0.5)).unwrap();
        assert!(r.max < 1e-12, "{}", r.max);
    }
}
