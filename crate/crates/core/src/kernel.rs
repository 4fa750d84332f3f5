//! Symmetric interaction weights `psi(r)` with certified bounds.
//!
//! Two families are provided. The constant kernel makes the flow linear, so
//! every agent relaxes toward the population mean at rate `c`. The rational
//! kernel `psi(r) = a + b / (1 + r^2)` is genuinely nonlinear with
//! `psi_star = a < a + b = psi_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum of `|d/dr 1/(1+r^2)|` on `[0, inf)`, attained at `r = 1/sqrt(3)`.
pub const RATIONAL_SLOPE_MAX: f64 = 0.649_519_052_838_329; // 3*sqrt(3)/8

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelForm {
    Constant {
        c: f64,
    },
    #[serde(rename = "rational")]
    RationalDecay {
        a: f64,
        b: f64,
    },
}

/// A validated interaction kernel together with its certified constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    form: KernelForm,
    psi_star: f64,
    psi_max: f64,
    lipschitz: f64,
}

impl Kernel {
    pub fn new(form: KernelForm) -> Result<Self> {
        match form {
            KernelForm::Constant { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::invalid(
                        "c",
                        format!("must be positive and finite, got {c}"),
                    ));
                }
                Ok(Self {
                    form,
                    psi_star: c,
                    psi_max: c,
                    lipschitz: 0.0,
                })
            }
            KernelForm::RationalDecay { a, b } => {
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::invalid(
                        "a",
                        format!("must be positive and finite, got {a}"),
                    ));
                }
                if !(b.is_finite() && b >= 0.0) {
                    return Err(Error::invalid(
                        "b",
                        format!("must be nonnegative and finite, got {b}"),
                    ));
                }
                Ok(Self {
                    form,
                    psi_star: a,
                    psi_max: a + b,
                    // rounded up by one part in 1e12 so the stored constant dominates the exact one
                    lipschitz: b * RATIONAL_SLOPE_MAX * (1.0 + 1e-12),
                })
            }
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(KernelForm::Constant { c })
    }

    pub fn rational(a: f64, b: f64) -> Result<Self> {
        Self::new(KernelForm::RationalDecay { a, b })
    }

    pub fn form(&self) -> KernelForm {
        self.form
    }

    pub fn psi_star(&self) -> f64 {
        self.psi_star
    }

    pub fn psi_max(&self) -> f64 {
        self.psi_max
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// The certified pair `(psi_star, psi_max)`.
    pub fn bounds(&self) -> (f64, f64) {
        (self.psi_star, self.psi_max)
    }

    /// `psi(r)` for a distance `r >= 0`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(Error::Domain(format!(
                "kernel distance must be >= 0, got {r}"
            )));
        }
        Ok(self.weight_sq(r * r))
    }

    /// `psi` as a function of the squared distance. Both families depend on
    /// `r` only through `r^2`, which keeps the pairwise loop free of `sqrt`.
    #[inline]
    pub fn weight_sq(&self, r2: f64) -> f64 {
        match self.form {
            KernelForm::Constant { c } => c,
            KernelForm::RationalDecay { a, b } => a + b / (1.0 + r2),
        }
    }

    /// `Some(c)` when the kernel is constant.
    #[inline]
    pub fn as_constant(&self) -> Option<f64> {
        match self.form {
            KernelForm::Constant { c } => Some(c),
            KernelForm::RationalDecay { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(Kernel::constant(1.0).unwrap().eval(7.3).unwrap(), 1.0);
        let k = Kernel::rational(0.5, 0.5).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 1.0);
        assert_eq!(k.eval(1.0).unwrap(), 0.75);
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(Kernel::constant(2.0).unwrap().bounds(), (2.0, 2.0));
        assert_eq!(Kernel::rational(0.5, 0.5).unwrap().bounds(), (0.5, 1.0));
        assert_eq!(Kernel::rational(1.0, 0.0).unwrap().bounds(), (1.0, 1.0));
        assert_eq!(Kernel::constant(2.0).unwrap().lipschitz(), 0.0);
    }

    #[test]
    fn slope_constant_is_three_sqrt_three_over_eight() {
        assert!((RATIONAL_SLOPE_MAX - 3.0 * 3f64.sqrt() / 8.0).abs() < 1e-15);
        // brute-force maximum of |2r/(1+r^2)^2|
        let brute = (0..200_000)
            .map(|i| {
                let r = i as f64 * 1e-5;
                2.0 * r / (1.0 + r * r).powi(2)
            })
            .fold(0.0, f64::max);
        assert!((brute - RATIONAL_SLOPE_MAX).abs() < 1e-9);
    }

    #[test]
    fn rejects_invalid_forms_and_distances() {
        assert!(Kernel::constant(0.0).is_err());
        assert!(Kernel::constant(f64::NAN).is_err());
        assert!(Kernel::rational(0.0, 1.0).is_err());
        assert!(Kernel::rational(1.0, -0.1).is_err());
        let err = Kernel::rational(-1.0, 1.0).unwrap_err().within("kernel");
        assert!(err.to_string().contains("kernel.a"));
        assert!(matches!(
            Kernel::constant(1.0).unwrap().eval(-1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn config_json_forms() {
        let c: KernelForm = serde_json::from_str(r#"{"type":"constant","c":1.0}"#).unwrap();
        assert_eq!(c, KernelForm::Constant { c: 1.0 });
        let r: KernelForm = serde_json::from_str(r#"{"type":"rational","a":0.5,"b":0.5}"#).unwrap();
        assert_eq!(r, KernelForm::RationalDecay { a: 0.5, b: 0.5 });
    }

    fn any_kernel() -> impl Strategy<Value = Kernel> {
        prop_oneof![
            (0.01f64..10.0).prop_map(|c| Kernel::constant(c).unwrap()),
            (0.01f64..10.0, 0.0f64..10.0).prop_map(|(a, b)| Kernel::rational(a, b).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn values_stay_within_certified_bounds(k in any_kernel(), r in 0.0f64..1e3) {
            let v = k.eval(r).unwrap();
            prop_assert!(k.psi_star() <= v && v <= k.psi_max());
        }

        #[test]
        fn lipschitz_constant_is_valid(k in any_kernel(), r1 in 0.0f64..1e3, r2 in 0.0f64..1e3) {
            let lhs = (k.eval(r1).unwrap() - k.eval(r2).unwrap()).abs();
            prop_assert!(lhs <= k.lipschitz() * (r1 - r2).abs() + 1e-12);
        }

        #[test]
        fn induced_force_is_antisymmetric(k in any_kernel(), x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let fwd = k.eval((y - x).abs()).unwrap() * (y - x);
            let back = k.eval((x - y).abs()).unwrap() * (x - y);
            prop_assert_eq!(fwd, -back);
        }
    }
}
