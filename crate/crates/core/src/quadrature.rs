//! Adaptive Gauss–Kronrod (7/15) quadrature with caller-supplied breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae, descending; odd indices are the Gauss points.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Kronrod and Gauss estimates on `[lo, hi]`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, gauss * half)
}

/// The 15-point Kronrod rule as a fixed rule: `(node, weight)` pairs on `[lo, hi]`.
pub fn kronrod_nodes(lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..15).map(move |i| {
        if i < 7 {
            (center - half * XGK[i], half * WGK[i])
        } else if i == 7 {
            (center, half * WGK[7])
        } else {
            (center + half * XGK[14 - i], half * WGK[14 - i])
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

impl Quadrature {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            ..Quadrature::default()
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<f64> {
        self.integrate_with_breaks(f, lo, hi, &[])
    }

    /// Integrates over `[lo, hi]`, forcing subinterval edges at every
    /// breakpoint strictly inside the interval.
    pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        lo: f64,
        hi: f64,
        breaks: &[f64],
    ) -> Result<f64> {
        if lo == hi {
            return Ok(0.0);
        }
        if lo > hi {
            return self.integrate_with_breaks(f, hi, lo, breaks).map(|v| -v);
        }
        let mut edges = vec![lo];
        let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        edges.extend(inner);
        edges.push(hi);

        let mut heap = BinaryHeap::new();
        let (mut total, mut total_err) = (0.0, 0.0);
        for w in edges.windows(2) {
            let (k, g) = gk15(&mut f, w[0], w[1]);
            let error = (k - g).abs();
            total += k;
            total_err += error;
            heap.push(Piece {
                lo: w[0],
                hi: w[1],
                value: k,
                error,
            });
        }
        loop {
            let target = self.abs_tol.max(self.rel_tol * total.abs());
            if total_err <= target {
                return Ok(total);
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::Quadrature {
                    lo,
                    hi,
                    estimate: total_err,
                    tolerance: target,
                });
            }
            let worst = heap.pop().expect("non-empty heap");
            let mid = 0.5 * (worst.lo + worst.hi);
            if mid <= worst.lo || mid >= worst.hi {
                // interval too small to split further
                return Err(Error::Quadrature {
                    lo,
                    hi,
                    estimate: total_err,
                    tolerance: target,
                });
            }
            total -= worst.value;
            total_err -= worst.error;
            for (a, b) in [(worst.lo, mid), (mid, worst.hi)] {
                let (k, g) = gk15(&mut f, a, b);
                let error = (k - g).abs();
                total += k;
                total_err += error;
                heap.push(Piece {
                    lo: a,
                    hi: b,
                    value: k,
                    error,
                });
            }
            // keep the running error sum from drifting below zero by roundoff
            if total_err < 0.0 {
                total_err = heap.iter().map(|p| p.error).sum();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_and_exponentials() {
        let q = Quadrature::default();
        assert_relative_eq!(q.integrate(|x| x * x, 0.0, 3.0).unwrap(), 9.0, epsilon = 1e-13);
        let v = q.integrate(|t| (-t).exp(), 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 1.0 - (-1.0f64).exp(), epsilon = 1e-13);
        assert_eq!(q.integrate(|_| 0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(q.integrate(|x| x, 1.0, 0.0).unwrap(), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn kinks_converge_with_breaks() {
        let q = Quadrature::default();
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.5 * (0.3 * 0.3 + 0.7 * 0.7);
        let with = q.integrate_with_breaks(f, 0.0, 1.0, &[0.3]).unwrap();
        assert_relative_eq!(with, exact, epsilon = 1e-14);
        let without = q.integrate(f, 0.0, 1.0).unwrap();
        assert_relative_eq!(without, exact, epsilon = 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let q = Quadrature {
            max_intervals: 8,
            ..Quadrature::default()
        };
        let err = q.integrate(|x| (1.0 / x).sin(), 1e-6, 1.0).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn fixed_nodes_match_rule() {
        let s: f64 = kronrod_nodes(0.0, 2.0).map(|(x, w)| w * x.powi(6)).sum();
        assert_relative_eq!(s, 128.0 / 7.0, epsilon = 1e-12);
        let nodes: Vec<f64> = kronrod_nodes(0.0, 1.0).map(|(x, _)| x).collect();
        assert!(nodes.windows(2).all(|w| w[0] < w[1]));
    }
}
