//! Closed forms for `u' + M u = σ` on `[0, 1]` with `u(0) - u(1) = δ ∫_0^1 u`.
//!
//! For `M != 0`:
//!
//! ```text
//! g_M(t, s) = e^{-M(t-s)} / (1 - e^{-M})        s <= t
//!           = e^{-M(t-s+1)} / (1 - e^{-M})      t < s
//! ω_1(t)    = e^{-Mt} / (1 - e^{-M})
//! G         = g_M + δ / (M - δ) · ω_1(t)
//! ```
//!
//! For `M = 0` the two-point problem is resonant but `G` still exists for `δ != 0`:
//! `G = s - 1/δ` for `s <= t` and `s - 1/δ - 1` for `t < s`.

use crate::error::{Error, Result};
use crate::functional::LinearFunctional;
use crate::nonlocal::{FunctionalSet, NonlocalSpec};
use crate::ode::LinearODEProblem;
use crate::twopoint::{BoundaryOperatorSet, Branch};

/// Distance to the spectrum line `δ = M` below which the oracle refuses.
pub const SPECTRUM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicParams {
    pub m: f64,
    pub delta: f64,
}

impl PeriodicParams {
    pub fn new(m: f64, delta: f64) -> Self {
        PeriodicParams { m, delta }
    }

    /// `(-M, -δ)`.
    pub fn mirrored(self) -> Self {
        PeriodicParams::new(-self.m, -self.delta)
    }

    /// On the spectrum `{(M, M)}` up to [`SPECTRUM_GUARD`].
    pub fn on_spectrum(self) -> bool {
        (self.delta - self.m).abs() < SPECTRUM_GUARD
    }

    /// The same problem for the numeric pipeline.
    pub fn spec(self) -> Result<NonlocalSpec> {
        NonlocalSpec::new(
            LinearODEProblem::constant(1, (0.0, 1.0), self.m)?,
            BoundaryOperatorSet::periodic(1),
            vec![self.delta],
            FunctionalSet::Shared(LinearFunctional::integral(0.0, 1.0)),
        )
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            value: x,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

fn check_m(m: f64) -> Result<()> {
    if m == 0.0 {
        Err(Error::ResonantProblem {
            det: 0.0,
            threshold: 0.0,
        })
    } else {
        Ok(())
    }
}

/// `1 / (1 - e^{-M})` without cancellation for small `M`.
#[inline]
fn inv_one_minus_exp_neg(m: f64) -> f64 {
    -1.0 / (-m).exp_m1()
}

pub fn oracle_g(t: f64, s: f64, m: f64) -> Result<f64> {
    oracle_g_branch(t, s, m, Branch::Right)
}

pub fn oracle_g_branch(t: f64, s: f64, m: f64, branch: Branch) -> Result<f64> {
    check_m(m)?;
    check_unit(t)?;
    check_unit(s)?;
    let k = inv_one_minus_exp_neg(m);
    Ok(if branch.takes_right(t, s) {
        (m * (s - t)).exp() * k
    } else {
        (m * (s - t - 1.0)).exp() * k
    })
}

pub fn oracle_omega1(t: f64, m: f64) -> Result<f64> {
    check_m(m)?;
    check_unit(t)?;
    Ok((-m * t).exp() * inv_one_minus_exp_neg(m))
}

#[allow(non_snake_case)]
pub fn oracle_G(t: f64, s: f64, params: PeriodicParams) -> Result<f64> {
    oracle_G_branch(t, s, params, Branch::Right)
}

#[allow(non_snake_case)]
pub fn oracle_G_branch(t: f64, s: f64, params: PeriodicParams, branch: Branch) -> Result<f64> {
    let PeriodicParams { m, delta } = params;
    check_unit(t)?;
    check_unit(s)?;
    if m == 0.0 {
        if delta.abs() < SPECTRUM_GUARD {
            return Err(Error::SpectralObstruction {
                det: delta,
                threshold: SPECTRUM_GUARD,
            });
        }
        let base = s - 1.0 / delta;
        return Ok(if branch.takes_right(t, s) { base } else { base - 1.0 });
    }
    if params.on_spectrum() {
        return Err(Error::SpectralObstruction {
            det: delta - m,
            threshold: SPECTRUM_GUARD,
        });
    }
    let g = oracle_g_branch(t, s, m, branch)?;
    Ok(g + delta / (m - delta) * oracle_omega1(t, m)?)
}

/// Edges of the constant-sign regions in `δ` for a given `M`: `G > 0` on
/// the square iff `δ ∈ (delta_min, delta_max_pos)`, `G < 0` iff
/// `δ ∈ (delta_max_pos, delta_max_neg)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignBoundaries {
    pub delta_min: f64,
    pub delta_max_pos: f64,
    pub delta_max_neg: f64,
}

impl SignBoundaries {
    /// Sign the kernel takes at `δ` (`Some(1.0)` or `Some(-1.0)`), or `None` when it changes sign
    /// or `δ` lies on an edge.
    pub fn predicted_sign(&self, delta: f64) -> Option<f64> {
        if delta > self.delta_min && delta < self.delta_max_pos {
            Some(1.0)
        } else if delta > self.delta_max_pos && delta < self.delta_max_neg {
            Some(-1.0)
        } else {
            None
        }
    }

    pub fn edges(&self) -> [f64; 3] {
        [self.delta_min, self.delta_max_pos, self.delta_max_neg]
    }
}

/// `M / (1 - e^M)`, `M` and `M e^M / (e^M - 1)`; the `M -> 0` limits are `-1, 0, 1`.
pub fn sign_boundaries(m: f64) -> SignBoundaries {
    if m == 0.0 {
        return SignBoundaries {
            delta_min: -1.0,
            delta_max_pos: 0.0,
            delta_max_neg: 1.0,
        };
    }
    SignBoundaries {
        delta_min: -m / m.exp_m1(),
        delta_max_pos: m,
        delta_max_neg: -m / (-m).exp_m1(),
    }
}

/// `G(t, s, δ, M) + G(1-t, 1-s, -δ, -M)`, with the branch mirrored for the
/// second term. Zero up to roundoff.
pub fn symmetry_residual(t: f64, s: f64, params: PeriodicParams) -> Result<f64> {
    symmetry_residual_branches(t, s, params, Branch::Right, Branch::Left)
}

/// [`symmetry_residual`] with explicit branch choices for both terms.
pub fn symmetry_residual_branches(
    t: f64,
    s: f64,
    params: PeriodicParams,
    first: Branch,
    second: Branch,
) -> Result<f64> {
    let lhs = oracle_G_branch(t, s, params, first)?;
    let rhs = oracle_G_branch(1.0 - t, 1.0 - s, params.mirrored(), second)?;
    Ok(lhs + rhs)
}

/// `∫_0^1 G(t, s) dt` from the exponential slices.
pub fn oracle_integral_in_t(s: f64, params: PeriodicParams) -> Result<f64> {
    let PeriodicParams { m, delta } = params;
    check_unit(s)?;
    if m == 0.0 {
        // (s - 1/δ)(1 - s) + (s - 1/δ - 1) s
        oracle_G(0.0, s, params)?;
        return Ok(s - 1.0 / delta - s);
    }
    if params.on_spectrum() {
        return Err(Error::SpectralObstruction {
            det: delta - m,
            threshold: SPECTRUM_GUARD,
        });
    }
    // ∫ g_M(·, s) = ∫ ω_1 = 1/M
    Ok(1.0 / m + delta / (m - delta) / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn g_values() {
        let k = 1.0 / (1.0 - 1.0 / E);
        assert_relative_eq!(oracle_g(0.5, 0.25, 1.0).unwrap(), (-0.25f64).exp() * k, epsilon = 1e-15);
        assert_relative_eq!(oracle_g(0.25, 0.5, 1.0).unwrap(), (-0.75f64).exp() * k, epsilon = 1e-15);
        assert!(oracle_g(0.5, 0.5, 0.0).is_err());
        assert!(oracle_g(1.5, 0.5, 1.0).is_err());
        for s in [0.1, 0.5, 0.9] {
            let jump = oracle_g_branch(s, s, 1.7, Branch::Right).unwrap()
                - oracle_g_branch(s, s, 1.7, Branch::Left).unwrap();
            assert_relative_eq!(jump, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn omega_values() {
        assert_relative_eq!(oracle_omega1(0.0, 1.0).unwrap(), E / (E - 1.0), epsilon = 1e-15);
        for m in [-2.0, -0.3, 0.7, 4.0] {
            let d = oracle_omega1(0.0, m).unwrap() - oracle_omega1(1.0, m).unwrap();
            assert_relative_eq!(d, 1.0, epsilon = 1e-13);
        }
        assert!(oracle_omega1(0.5, 0.0).is_err());
    }

    #[test]
    fn big_g_values() {
        let k = 1.0 / (1.0 - 1.0 / E);
        let v = oracle_G(0.5, 0.25, PeriodicParams::new(1.0, 0.5)).unwrap();
        assert_relative_eq!(v, (-0.5f64).exp() * k + (-0.25f64).exp() * k, epsilon = 1e-14);
        let z = oracle_G(0.7, 0.4, PeriodicParams::new(0.0, 0.5)).unwrap();
        assert_relative_eq!(z, -1.6, epsilon = 1e-15);
        let g = oracle_g(0.5, 0.25, 1.0).unwrap();
        assert_eq!(oracle_G(0.5, 0.25, PeriodicParams::new(1.0, 0.0)).unwrap(), g);
        // h(s) at δ = -0.3
        let (m, d) = (1.0, -0.3);
        let h = (d * E + (m - d) * 0.5f64.exp()) / ((E - 1.0) * (m - d));
        assert_relative_eq!(oracle_G(0.0, 0.5, PeriodicParams::new(m, d)).unwrap(), h, epsilon = 1e-14);
    }

    #[test]
    fn spectrum_is_refused() {
        assert!(matches!(
            oracle_G(0.2, 0.3, PeriodicParams::new(1.0, 1.0)),
            Err(Error::SpectralObstruction { .. })
        ));
        assert!(oracle_G(0.2, 0.3, PeriodicParams::new(1.0, 1.0 + 1e-13)).is_err());
        assert!(oracle_G(0.2, 0.3, PeriodicParams::new(0.0, 0.0)).is_err());
        assert!(oracle_G(0.2, 0.3, PeriodicParams::new(0.0, 1e-13)).is_err());
        assert!(oracle_G(0.2, 0.3, PeriodicParams::new(1.0, 1.0 + 1e-9)).is_ok());
    }

    #[test]
    fn boundaries() {
        let b = sign_boundaries(1.0);
        assert_relative_eq!(b.delta_min, 1.0 / (1.0 - E), epsilon = 1e-15);
        assert_eq!(b.delta_max_pos, 1.0);
        assert_relative_eq!(b.delta_max_neg, E / (E - 1.0), epsilon = 1e-15);
        assert_eq!(sign_boundaries(0.0).edges(), [-1.0, 0.0, 1.0]);
        let n = sign_boundaries(-1.0);
        assert_relative_eq!(n.delta_min, -1.0 / (1.0 - 1.0 / E), epsilon = 1e-15);
        assert_eq!(n.delta_max_pos, -1.0);
        // continuity at M = 0
        let small = sign_boundaries(1e-9);
        assert!((small.delta_min + 1.0).abs() < 1e-8 && (small.delta_max_neg - 1.0).abs() < 1e-8);
        assert_eq!(b.predicted_sign(0.0), Some(1.0));
        assert_eq!(b.predicted_sign(1.3), Some(-1.0));
        assert_eq!(b.predicted_sign(-1.0), None);
        assert_eq!(b.predicted_sign(1.0), None);
    }

    #[test]
    fn symmetry_cases() {
        let p = PeriodicParams::new(1.0, 0.5);
        assert!(symmetry_residual(0.3, 0.7, p).unwrap().abs() < 1e-12);
        let same = symmetry_residual_branches(0.4, 0.4, p, Branch::Right, Branch::Right).unwrap();
        assert_relative_eq!(same.abs(), 1.0, epsilon = 1e-12);
        assert!(symmetry_residual(0.4, 0.4, p).unwrap().abs() < 1e-12);
        let z = PeriodicParams::new(0.0, 0.5);
        assert!(symmetry_residual(0.3, 0.8, z).unwrap().abs() < 1e-12);
        assert!(symmetry_residual(0.8, 0.3, z).unwrap().abs() < 1e-12);
    }

    #[test]
    fn degenerate_touching() {
        // at the edges the kernel vanishes only in a corner limit:
        // (0, 0) from t < s at delta_min, (1, 1) from t >= s at delta_max_neg
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for m in [0.5, 1.0, 2.0, -1.5] {
            let b = sign_boundaries(m);
            let lower = PeriodicParams::new(m, b.delta_min);
            let upper = PeriodicParams::new(m, b.delta_max_neg);
            let corner = oracle_G_branch(0.0, 0.0, lower, Branch::Left).unwrap();
            assert!(corner.abs() < 1e-12);
            assert!(oracle_G(1.0, 1.0, upper).unwrap().abs() < 1e-12);
            for &t in &grid {
                for &s in &grid {
                    if t != 0.0 || s != 0.0 {
                        assert!(oracle_G_branch(t, s, lower, Branch::Left).unwrap() > 0.0);
                    }
                    assert!(oracle_G(t, s, lower).unwrap() > 0.0);
                    if t != 1.0 || s != 1.0 {
                        assert!(oracle_G(t, s, upper).unwrap() < 0.0);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn exponential_slices(m in -4.0f64..4.0, delta in -4.0f64..4.0, s in 0.05f64..0.95) {
            prop_assume!(m.abs() > 1e-3 && (delta - m).abs() > 1e-3);
            let p = PeriodicParams::new(m, delta);
            let scaled = |t: f64| oracle_G(t, s, p).unwrap() * (m * t).exp();
            let left0 = scaled(0.0);
            let right0 = scaled(s);
            for i in 0..10 {
                let tl = s * i as f64 / 10.0;
                let tr = (s + (1.0 - s) * i as f64 / 9.0).min(1.0);
                prop_assert!((scaled(tl) - left0).abs() <= 1e-10 * left0.abs().max(1.0));
                prop_assert!((scaled(tr) - right0).abs() <= 1e-10 * right0.abs().max(1.0));
            }
        }

        #[test]
        fn boundary_identity(m in -4.0f64..4.0, delta in -4.0f64..4.0, s in 0.0f64..1.0) {
            prop_assume!((delta - m).abs() > 1e-3 && (m != 0.0 || delta.abs() > 1e-3));
            let p = PeriodicParams::new(m, delta);
            let lhs = oracle_G(0.0, s, p).unwrap() - oracle_G(1.0, s, p).unwrap();
            let rhs = delta * oracle_integral_in_t(s, p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }

        #[test]
        fn ode_property(m in -4.0f64..4.0, delta in -4.0f64..4.0, t in 0.01f64..0.99, s in 0.0f64..1.0) {
            prop_assume!((delta - m).abs() > 1e-2 && (m != 0.0 || delta.abs() > 1e-2));
            prop_assume!((t - s).abs() > 2e-5);
            let p = PeriodicParams::new(m, delta);
            let h = 1e-6;
            let d = (oracle_G(t + h, s, p).unwrap() - oracle_G(t - h, s, p).unwrap()) / (2.0 * h);
            let g = oracle_G(t, s, p).unwrap();
            prop_assert!((d + m * g).abs() <= 1e-6 * g.abs().max(1.0));
        }

        #[test]
        fn slice_functional_is_inverse_m(m in -5.0f64..5.0, s in 0.0f64..1.0) {
            prop_assume!(m.abs() > 1e-6);
            // ∫_0^s and ∫_s^1 of the two exponential branches
            let k = 1.0 / (1.0 - (-m).exp());
            let left = k * (m * (s - 1.0)).exp() * (1.0 - (-m * s).exp()) / m;
            let right = k * (1.0 - (m * (s - 1.0)).exp()) / m;
            prop_assert!((left + right - 1.0 / m).abs() <= 1e-10 * (1.0 / m).abs());
            let p = PeriodicParams::new(m, 0.0);
            prop_assert!((oracle_integral_in_t(s, p).unwrap() - 1.0 / m).abs() <= 1e-12 * (1.0 / m).abs());
        }

        #[test]
        fn small_m_limit(delta in prop::sample::select(vec![-1.5, -0.5, 0.3, 0.9, 2.0]), t in 0.0f64..1.0, s in 0.0f64..1.0) {
            prop_assume!((t - s).abs() > 1e-9);
            let zero = oracle_G(t, s, PeriodicParams::new(0.0, delta)).unwrap();
            for m in [1e-6, -1e-6, 1e-7] {
                let near = oracle_G(t, s, PeriodicParams::new(m, delta)).unwrap();
                prop_assert!((near - zero).abs() < 1e-4);
            }
        }
    }
}
