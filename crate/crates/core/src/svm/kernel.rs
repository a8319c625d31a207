use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Linear,
    /// `(gamma a.b + coef0)^degree`
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    /// `exp(-gamma |a - b|^2)`
    Rbf { gamma: f64 },
    /// `tanh(gamma a.b + coef0)`
    Sigmoid { gamma: f64, coef0: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, gamma, coef0 } => {
                if degree == 0 {
                    return Err(Error::Config("polynomial degree must be at least 1".into()));
                }
                if !(gamma.is_finite() && gamma > 0.0 && coef0.is_finite()) {
                    return Err(Error::Config("polynomial gamma must be positive".into()));
                }
                Ok(())
            }
            KernelSpec::Rbf { gamma } | KernelSpec::Sigmoid { gamma, .. } => {
                if gamma.is_finite() && gamma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("kernel gamma must be positive, got {gamma}")))
                }
            }
        }
    }

    /// Kernel value without an arity check.
    #[inline]
    pub(crate) fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot = || a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        match *self {
            KernelSpec::Linear => dot(),
            KernelSpec::Polynomial { degree, gamma, coef0 } => (gamma * dot() + coef0).powi(degree as i32),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Sigmoid { gamma, coef0 } => (gamma * dot() + coef0).tanh(),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ArityMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(spec.apply(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use nalgebra::DMatrix;
    use rand::Rng;

    #[test]
    fn closed_form_values() {
        let rbf = KernelSpec::Rbf { gamma: 1.0 };
        assert_eq!(kernel_eval(&rbf, &[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let v = kernel_eval(&rbf, &[0.0], &[2f64.ln().sqrt()]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!(kernel_eval(&rbf, &[0.0], &[0.0, 1.0]).is_err());
        let poly = KernelSpec::Polynomial { degree: 2, gamma: 1.0, coef0: 1.0 };
        assert_eq!(kernel_eval(&poly, &[1.0, 1.0], &[1.0, 2.0]).unwrap(), 16.0);
    }

    #[test]
    fn gram_matrices_are_symmetric_psd() {
        let mut rng = seed::rng(31);
        for spec in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 0.4 }] {
            let pts: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
                .collect();
            let k = DMatrix::from_fn(20, 20, |i, j| kernel_eval(&spec, &pts[i], &pts[j]).unwrap());
            for i in 0..20 {
                for j in 0..20 {
                    assert_eq!(k[(i, j)], k[(j, i)]);
                }
            }
            let min = k.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8, "{spec:?}: smallest eigenvalue {min}");
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(KernelSpec::Rbf { gamma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Polynomial { degree: 0, gamma: 1.0, coef0: 0.0 }.validate().is_err());
        assert!(KernelSpec::Sigmoid { gamma: 0.5, coef0: -1.0 }.validate().is_ok());
    }
}
