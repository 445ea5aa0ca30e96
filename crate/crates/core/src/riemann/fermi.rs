use serde::Serialize;

use crate::error::{Error, Result};
use crate::riemann::metric::MetricField;

/// Transverse derivatives of `g₃₃` on the axis `x₁ = x₂ = 0` of a Fermi chart,
/// each triple ordered `(11, 12, 22)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FermiTable {
    /// `∂_i∂_j g₃₃`
    pub second: [f64; 3],
    /// `∂_i∂_j∂_t g₃₃`
    pub third: [f64; 3],
}

impl FermiTable {
    pub fn second_matrix(&self) -> [[f64; 2]; 2] {
        [[self.second[0], self.second[1]], [self.second[1], self.second[2]]]
    }

    pub fn third_matrix(&self) -> [[f64; 2]; 2] {
        [[self.third[0], self.third[1]], [self.third[1], self.third[2]]]
    }
}

/// Checks that `g = I` and `∂g = 0` at the axis point `(0, 0, s)`.
pub fn validate_fermi(m: &MetricField, s: f64, tol: f64) -> Result<()> {
    if m.dim() != 3 {
        return Err(Error::Invalid("Fermi tables are defined for three-dimensional metrics".into()));
    }
    let p = [0.0, 0.0, s];
    let gj = m.jet_eval(&p, 1)?;
    for i in 0..3 {
        for j in 0..3 {
            let e = gj.get(i, j);
            let want = if i == j { 1.0 } else { 0.0 };
            if (e.value() - want).abs() > tol {
                return Err(Error::Invalid(format!("not a Fermi chart: g_{i}{j}(0,0,{s}) = {}", e.value())));
            }
            for a in 0..3 {
                let mut alpha = [0u8; 3];
                alpha[a] = 1;
                let d = e.partial(&alpha)?;
                if d.abs() > tol {
                    return Err(Error::Invalid(format!("not a Fermi chart: ∂_{a} g_{i}{j} = {d:e} on the axis")));
                }
            }
        }
    }
    Ok(())
}

pub fn fermi_derivative_table(m: &MetricField, s: f64) -> Result<FermiTable> {
    validate_fermi(m, s, 1e-6)?;
    let gj = m.jet_eval(&[0.0, 0.0, s], 3)?;
    let g33 = gj.get(2, 2);
    let pairs = [[2u8, 0, 0], [1, 1, 0], [0, 2, 0]];
    let mut second = [0.0; 3];
    let mut third = [0.0; 3];
    for (k, alpha) in pairs.iter().enumerate() {
        second[k] = g33.partial(alpha)?;
        let mut a3 = *alpha;
        a3[2] = 1;
        third[k] = g33.partial(&a3)?;
    }
    Ok(FermiTable { second, third })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbed_table() {
        let m = MetricField::perturbed_standard();
        let t = fermi_derivative_table(&m, 0.0).unwrap();
        assert_eq!(t.second, [2.0, 0.0, 0.0]);
        assert_eq!(t.third, [0.0, 2.0, 0.0]);
        let e = MetricField::euclidean(3).unwrap();
        let t = fermi_derivative_table(&e, 0.3).unwrap();
        assert_eq!(t.second, [0.0; 3]);
        assert_eq!(t.third, [0.0; 3]);
    }

    #[test]
    fn rejects_non_fermi_charts() {
        let m = MetricField::appendix_bourgain();
        assert!(fermi_derivative_table(&m, 0.5).is_err());
    }
}
