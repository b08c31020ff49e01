//! Non-local linear functionals `C_i` acting on function values.

use crate::error::{Error, Result};
use crate::ode::Coefficient;
use crate::quadrature::Quadrature;
use crate::twopoint::TwoPointGreen;

/// A bounded linear functional on `C([a, b])`.
#[derive(Debug, Clone)]
pub enum LinearFunctional {
    /// `∫_lo^hi v(t) u(t) dt`.
    WeightedIntegral { weight: Coefficient, lo: f64, hi: f64 },
    /// `Σ_k ε_k u(ν_k)`.
    MultiPoint { points: Vec<f64>, weights: Vec<f64> },
    /// Sum of the terms.
    Sum(Vec<LinearFunctional>),
}

/// Samples used to check a non-constant weight for non-negativity.
const WEIGHT_SAMPLES: usize = 1000;

impl LinearFunctional {
    /// Plain integral over `[lo, hi]`.
    pub fn integral(lo: f64, hi: f64) -> Self {
        LinearFunctional::WeightedIntegral {
            weight: Coefficient::Constant(1.0),
            lo,
            hi,
        }
    }

    pub fn weighted_integral(weight: Coefficient, lo: f64, hi: f64) -> Self {
        LinearFunctional::WeightedIntegral { weight, lo, hi }
    }

    /// Evaluation at one point.
    pub fn point(c: f64) -> Self {
        LinearFunctional::MultiPoint {
            points: vec![c],
            weights: vec![1.0],
        }
    }

    pub fn multipoint(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::InvalidProblem(
                "multi-point functional needs matching, non-empty points and weights".into(),
            ));
        }
        Ok(LinearFunctional::MultiPoint { points, weights })
    }

    /// Support lies inside `[a, b]`.
    pub fn validate(&self, interval: (f64, f64)) -> Result<()> {
        let (a, b) = interval;
        match self {
            LinearFunctional::WeightedIntegral { lo, hi, .. } => {
                if !(lo < hi) || *lo < a || *hi > b {
                    return Err(Error::InvalidProblem(format!(
                        "integration interval [{lo}, {hi}] is not a subinterval of [{a}, {b}]"
                    )));
                }
            }
            LinearFunctional::MultiPoint { points, weights } => {
                if points.len() != weights.len() {
                    return Err(Error::InvalidProblem("points and weights differ in length".into()));
                }
                if let Some(p) = points.iter().find(|&&p| p < a || p > b) {
                    return Err(Error::InvalidProblem(format!(
                        "evaluation point {p} lies outside [{a}, {b}]"
                    )));
                }
            }
            LinearFunctional::Sum(terms) => {
                if terms.is_empty() {
                    return Err(Error::InvalidProblem("empty functional sum".into()));
                }
                for t in terms {
                    t.validate(interval)?;
                }
            }
        }
        Ok(())
    }

    /// `C(u)`.
    pub fn eval(&self, u: &dyn Fn(f64) -> f64, quad: &Quadrature) -> Result<f64> {
        self.eval_with_breaks(u, &[], quad)
    }

    /// `C(u)` for a `u` that is only piecewise smooth; integrals are split at `breaks`.
    pub fn eval_with_breaks(&self, u: &dyn Fn(f64) -> f64, breaks: &[f64], quad: &Quadrature) -> Result<f64> {
        match self {
            LinearFunctional::WeightedIntegral { weight, lo, hi } => match weight {
                Coefficient::Constant(c) => Ok(c * quad.integrate_with_breaks(u, *lo, *hi, breaks)?),
                w => quad.integrate_with_breaks(|t| w.eval(t) * u(t), *lo, *hi, breaks),
            },
            LinearFunctional::MultiPoint { points, weights } => {
                Ok(points.iter().zip(weights).map(|(&p, w)| w * u(p)).sum())
            }
            LinearFunctional::Sum(terms) => terms
                .iter()
                .map(|c| c.eval_with_breaks(u, breaks, quad))
                .sum(),
        }
    }

    /// Whether `u >= 0` implies `C(u) >= 0`: non-negative weights throughout.
    /// Non-constant integral weights are checked on a sample mesh.
    pub fn is_positive(&self) -> bool {
        match self {
            LinearFunctional::WeightedIntegral { weight, lo, hi } => match weight.as_constant() {
                Some(c) => c >= 0.0,
                None => (0..=WEIGHT_SAMPLES).all(|i| {
                    let t = lo + (hi - lo) * i as f64 / WEIGHT_SAMPLES as f64;
                    weight.eval(t) >= 0.0
                }),
            },
            LinearFunctional::MultiPoint { weights, .. } => weights.iter().all(|&w| w >= 0.0),
            LinearFunctional::Sum(terms) => terms.iter().all(LinearFunctional::is_positive),
        }
    }

    /// Whether this is `∫_lo^hi u` with unit weight.
    pub fn is_plain_integral(&self, lo: f64, hi: f64) -> bool {
        matches!(self, LinearFunctional::WeightedIntegral { weight: Coefficient::Constant(w), lo: l, hi: h }
            if *w == 1.0 && *l == lo && *h == hi)
    }
}

/// Free-function form of [`LinearFunctional::eval`].
pub fn eval_functional(c: &LinearFunctional, u: &dyn Fn(f64) -> f64, quad: &Quadrature) -> Result<f64> {
    c.eval(u, quad)
}

/// `C(g(·, s))`, splitting integrals at the kink `t = s`.
pub fn functional_of_green_slice(
    c: &LinearFunctional,
    g: &TwoPointGreen,
    s: f64,
    quad: &Quadrature,
) -> Result<f64> {
    let slice = g.slice(s)?;
    let fsys = g.fundamental_system();
    let n = g.order();
    let branch = g.branch();
    let u = |t: f64| {
        let coeffs = slice.select(t, s, branch);
        (0..n).map(|k| coeffs[k] * fsys.basis_value(k, t)).sum()
    };
    c.eval_with_breaks(&u, &[s], quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate_fundamental_system, LinearODEProblem, DEFAULT_TOL};
    use crate::twopoint::{BoundaryOperatorSet, DEFAULT_RESONANCE_TOL};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn periodic_green(m: f64) -> TwoPointGreen {
        let p = LinearODEProblem::constant(1, (0.0, 1.0), m).unwrap();
        let fs = Arc::new(integrate_fundamental_system(&p, DEFAULT_TOL).unwrap());
        TwoPointGreen::build(BoundaryOperatorSet::periodic(1), fs, DEFAULT_RESONANCE_TOL).unwrap()
    }

    #[test]
    fn basic_values() {
        let q = Quadrature::default();
        let c = LinearFunctional::integral(0.0, 1.0);
        assert_relative_eq!(c.eval(&|t| (-t).exp(), &q).unwrap(), 0.6321205588285577, epsilon = 1e-12);
        assert_eq!(c.eval(&|_| 0.0, &q).unwrap(), 0.0);
        let p = LinearFunctional::point(0.37);
        assert_eq!(p.eval(&|t| t * t, &q).unwrap(), 0.37 * 0.37);
        let w = LinearFunctional::weighted_integral(Coefficient::parse("2*t").unwrap(), 0.0, 1.0);
        assert_relative_eq!(w.eval(&|t| t, &q).unwrap(), 2.0 / 3.0, epsilon = 1e-13);
        let sum = LinearFunctional::Sum(vec![c.clone(), p.clone()]);
        assert_relative_eq!(sum.eval(&|_| 1.0, &q).unwrap(), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn validation() {
        let iv = (0.0, 1.0);
        assert!(LinearFunctional::integral(0.0, 1.0).validate(iv).is_ok());
        assert!(LinearFunctional::integral(-0.1, 1.0).validate(iv).is_err());
        assert!(LinearFunctional::integral(0.5, 0.5).validate(iv).is_err());
        assert!(LinearFunctional::point(1.2).validate(iv).is_err());
        assert!(LinearFunctional::multipoint(vec![0.1], vec![]).is_err());
        assert!(LinearFunctional::Sum(vec![]).validate(iv).is_err());
    }

    #[test]
    fn positivity_class() {
        assert!(LinearFunctional::integral(0.0, 1.0).is_positive());
        assert!(!LinearFunctional::multipoint(vec![0.1, 0.2], vec![1.0, -0.5]).unwrap().is_positive());
        let w = LinearFunctional::weighted_integral(Coefficient::parse("t - 0.5").unwrap(), 0.0, 1.0);
        assert!(!w.is_positive());
        let w = LinearFunctional::weighted_integral(Coefficient::parse("t^2").unwrap(), 0.0, 1.0);
        assert!(w.is_positive());
    }

    #[test]
    fn green_slices() {
        let q = Quadrature::default();
        let g = periodic_green(2.0);
        let c = LinearFunctional::integral(0.0, 1.0);
        for s in [0.0, 0.1, 0.5, 0.93, 1.0] {
            let v = functional_of_green_slice(&c, &g, s, &q).unwrap();
            assert_relative_eq!(v, 0.5, epsilon = 1e-9);
        }
        let g1 = periodic_green(1.0);
        let v = functional_of_green_slice(&LinearFunctional::point(0.0), &g1, 0.5, &q).unwrap();
        // g(0, 0.5) = e^{-1/2} / (1 - e^{-1})
        assert_relative_eq!(v, (-0.5f64).exp() / (1.0 - (-1.0f64).exp()), epsilon = 1e-9);
    }

    #[test]
    fn kink_split_matches_refined_reference() {
        let g = periodic_green(3.0);
        let c = LinearFunctional::integral(0.0, 1.0);
        let coarse = Quadrature::default();
        let fine = Quadrature {
            abs_tol: 1e-13,
            rel_tol: 1e-14,
            max_intervals: 20_000,
        };
        for s in [0.17, 0.5, 0.81] {
            let split = functional_of_green_slice(&c, &g, s, &coarse).unwrap();
            let reference = fine
                .integrate(|t| g.eval(t, s).unwrap(), 0.0, 1.0)
                .unwrap();
            assert!((split - reference).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn linearity(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, p in 0.0f64..4.0, w in 0.1f64..5.0) {
            let q = Quadrature::default();
            let u = move |t: f64| (p * t).sin() + t;
            let v = move |t: f64| (-w * t).exp();
            for c in [
                LinearFunctional::integral(0.2, 0.9),
                LinearFunctional::multipoint(vec![0.1, 0.6], vec![2.0, -1.0]).unwrap(),
                LinearFunctional::weighted_integral(Coefficient::parse("cos(t)").unwrap(), 0.0, 1.0),
            ] {
                let lhs = c.eval(&|t| alpha * u(t) + beta * v(t), &q).unwrap();
                let rhs = alpha * c.eval(&u, &q).unwrap() + beta * c.eval(&v, &q).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-10);
            }
        }

        #[test]
        fn positive_functionals_map_nonnegative_to_nonnegative(
            a in 0.0f64..2.0, b in 0.0f64..3.0, c in 0.0f64..10.0
        ) {
            let q = Quadrature::default();
            let u = move |t: f64| a + b * (c * t).sin().powi(2);
            for f in [
                LinearFunctional::integral(0.0, 1.0),
                LinearFunctional::multipoint(vec![0.0, 0.4, 1.0], vec![1.0, 0.5, 2.0]).unwrap(),
                LinearFunctional::weighted_integral(Coefficient::parse("exp(-t)").unwrap(), 0.1, 0.8),
            ] {
                prop_assert!(f.is_positive());
                prop_assert!(f.eval(&u, &q).unwrap() >= 0.0);
            }
        }
    }
}
