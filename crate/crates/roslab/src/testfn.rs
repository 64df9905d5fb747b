//! Registered test functions: zero, the indicator of (0, ∞), and `c·xⁿ·e^{−rx}`.
//!
//! The family is closed under products and under the rescaling `x ↦ x/m`, so
//! squares, cross products and fluid-scaled evaluations never leave it and every
//! pairing against a registered distribution has a closed form.

use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero,
    Indicator,
    PolyExp { coef: f64, power: u32, rate: f64 },
}

impl TestFunction {
    pub fn exp(rate: f64) -> Self {
        TestFunction::PolyExp { coef: 1.0, power: 0, rate }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_at(x)
    }

    pub fn eval_at<T: Real>(&self, x: T) -> T {
        match *self {
            TestFunction::Zero => T::zero(),
            TestFunction::Indicator => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            TestFunction::PolyExp { coef, power, rate } => {
                T::lit(coef) * x.powi(power as i32) * (-T::lit(rate) * x).exp()
            }
        }
    }

    /// Value of the derivative; the indicator is treated as constant on (0, ∞).
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Zero | TestFunction::Indicator => 0.0,
            TestFunction::PolyExp { coef, power, rate } => {
                let n = power as i32;
                let poly = if n == 0 { 0.0 } else { n as f64 * x.powi(n - 1) };
                coef * (poly - rate * x.powi(n)) * (-rate * x).exp()
            }
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Zero | TestFunction::Indicator => 0.0,
            TestFunction::PolyExp { coef, power, rate } => {
                let n = power as i32;
                let nf = n as f64;
                let a = if n >= 2 { nf * (nf - 1.0) * x.powi(n - 2) } else { 0.0 };
                let b = if n >= 1 { 2.0 * rate * nf * x.powi(n - 1) } else { 0.0 };
                coef * (a - b + rate * rate * x.powi(n)) * (-rate * x).exp()
            }
        }
    }

    /// Right limit at 0.
    pub fn at_zero(&self) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::Indicator => 1.0,
            TestFunction::PolyExp { coef, power, .. } => {
                if power == 0 {
                    coef
                } else {
                    0.0
                }
            }
        }
    }

    pub fn product(&self, other: &TestFunction) -> TestFunction {
        use TestFunction::*;
        match (*self, *other) {
            (Zero, _) | (_, Zero) => Zero,
            (Indicator, g) | (g, Indicator) => g,
            (
                PolyExp { coef: c1, power: n1, rate: r1 },
                PolyExp { coef: c2, power: n2, rate: r2 },
            ) => PolyExp { coef: c1 * c2, power: n1 + n2, rate: r1 + r2 },
        }
    }

    pub fn square(&self) -> TestFunction {
        self.product(self)
    }

    /// The function `x ↦ f(x / m)`.
    pub fn rescaled(&self, m: f64) -> TestFunction {
        match *self {
            TestFunction::PolyExp { coef, power, rate } => TestFunction::PolyExp {
                coef: coef / m.powi(power as i32),
                power,
                rate: rate / m,
            },
            other => other,
        }
    }

    /// Exponential rate when `f = e^{−rx}`.
    pub fn exp_rate(&self) -> Option<f64> {
        match *self {
            TestFunction::PolyExp { coef, power: 0, rate } if coef == 1.0 => Some(rate),
            _ => None,
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            TestFunction::Zero => "zero".into(),
            TestFunction::Indicator => "indicator".into(),
            TestFunction::PolyExp { coef, power, rate } => {
                if coef == 1.0 && power == 0 {
                    format!("exp({rate})")
                } else {
                    format!("polyexp({coef},{power},{rate})")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_stay_in_family() {
        let f = TestFunction::exp(1.0);
        assert_eq!(f.square(), TestFunction::exp(2.0));
        assert_eq!(f.product(&TestFunction::Indicator), f);
        assert_eq!(f.product(&TestFunction::Zero), TestFunction::Zero);
        let g = TestFunction::PolyExp { coef: 2.0, power: 1, rate: 0.5 };
        let x = 1.7;
        assert!((g.square().eval(x) - g.eval(x).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn rescaling_matches_pointwise() {
        let g = TestFunction::PolyExp { coef: 1.5, power: 2, rate: 0.3 };
        let m = 7.0;
        for &x in &[0.1, 1.0, 13.0] {
            assert!((g.rescaled(m).eval(x) - g.eval(x / m)).abs() < 1e-14);
        }
        assert_eq!(TestFunction::Indicator.rescaled(m), TestFunction::Indicator);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let g = TestFunction::PolyExp { coef: 1.0, power: 2, rate: 1.2 };
        let (x, h) = (0.8, 1e-6);
        let fd = (g.eval(x + h) - g.eval(x - h)) / (2.0 * h);
        assert!((fd - g.derivative(x)).abs() < 1e-8);
        let fd2 = (g.derivative(x + h) - g.derivative(x - h)) / (2.0 * h);
        assert!((fd2 - g.second_derivative(x)).abs() < 1e-8);
    }

    #[test]
    fn indicator_and_boundary_values() {
        assert_eq!(TestFunction::Indicator.eval(0.0), 0.0);
        assert_eq!(TestFunction::Indicator.eval(1e-300), 1.0);
        assert_eq!(TestFunction::exp(3.0).at_zero(), 1.0);
        assert_eq!(TestFunction::Indicator.at_zero(), 1.0);
    }
}
