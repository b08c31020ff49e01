//! Linear operator `T_n[M] u = u^(n) + a_1 u^(n-1) + ... + a_n u + M u`,
//! its fundamental system and Cauchy function.
//!
//! Trajectories come from an adaptive Dormand–Prince 5(4) integrator with
//! the standard 4th-order continuous extension. Everything downstream reads
//! the dense output; nothing re-integrates after construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Matrix;

/// Default absolute and relative integrator tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A coefficient function `a_k(t)` (also used for weights and forcing terms).
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Expr(Expr),
    Func(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn func(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Func(Arc::new(f))
    }

    /// Parses an expression, collapsing `t`-free expressions to constants.
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Coefficient::from(Expr::parse(src)?))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Expr(e) => e.eval(t),
            Coefficient::Func(f) => f(t),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            _ => None,
        }
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

impl From<Expr> for Coefficient {
    fn from(e: Expr) -> Self {
        match e.as_constant() {
            Some(c) => Coefficient::Constant(c),
            None => Coefficient::Expr(e),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Expr(e) => write!(f, "Expr({e})"),
            Coefficient::Func(_) => write!(f, "Func(..)"),
        }
    }
}

/// `T_n[M] u = 0` data on `[a, b]`.
#[derive(Debug, Clone)]
pub struct LinearODEProblem {
    order: usize,
    a: f64,
    b: f64,
    coefficients: Vec<Coefficient>,
    shift: f64,
}

impl LinearODEProblem {
    pub fn new(
        order: usize,
        interval: (f64, f64),
        coefficients: Vec<Coefficient>,
        shift: f64,
    ) -> Result<Self> {
        let (a, b) = interval;
        if order == 0 {
            return Err(Error::InvalidProblem("order must be positive".into()));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidProblem(format!(
                "interval [{a}, {b}] must satisfy a < b"
            )));
        }
        if coefficients.len() != order {
            return Err(Error::InvalidProblem(format!(
                "expected {order} coefficients, got {}",
                coefficients.len()
            )));
        }
        if !shift.is_finite() {
            return Err(Error::InvalidProblem("shift M must be finite".into()));
        }
        // evaluability on a sample mesh
        for (k, c) in coefficients.iter().enumerate() {
            for i in 0..=32 {
                let t = a + (b - a) * i as f64 / 32.0;
                if !c.eval(t).is_finite() {
                    return Err(Error::InvalidProblem(format!(
                        "coefficient a_{} is not finite at t = {t}",
                        k + 1
                    )));
                }
            }
        }
        Ok(LinearODEProblem {
            order,
            a,
            b,
            coefficients,
            shift,
        })
    }

    /// `u^(n) + M u` with all `a_k = 0`.
    pub fn constant(order: usize, interval: (f64, f64), shift: f64) -> Result<Self> {
        Self::new(order, interval, vec![Coefficient::Constant(0.0); order], shift)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn coefficients(&self) -> &[Coefficient] {
        &self.coefficients
    }

    pub fn with_shift(&self, shift: f64) -> Self {
        LinearODEProblem {
            shift,
            ..self.clone()
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.a && t <= self.b
    }

    pub(crate) fn check_domain(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                value: t,
                lo: self.a,
                hi: self.b,
            })
        }
    }

    /// `-(a_1 u^(n-1) + ... + a_n u + M u)`, the homogeneous `u^(n)`.
    #[inline]
    pub fn highest_derivative(&self, t: f64, derivs: &[f64]) -> f64 {
        let n = self.order;
        let mut acc = self.shift * derivs[0];
        for (k, c) in self.coefficients.iter().enumerate() {
            acc += c.eval(t) * derivs[n - 1 - k];
        }
        -acc
    }

    /// `T_n[M] u(t)` from `u, u', ..., u^(n)`.
    pub fn apply(&self, t: f64, derivs: &[f64]) -> f64 {
        let n = self.order;
        assert_eq!(derivs.len(), n + 1);
        derivs[n] - self.highest_derivative(t, &derivs[..n])
    }
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step, as a fraction of the interval length.
    pub max_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions::with_tol(DEFAULT_TOL)
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        IntegratorOptions {
            rtol: tol,
            atol: tol,
            max_step_fraction: 1.0 / 128.0,
            max_steps: 200_000,
        }
    }
}

/// Dense samples of a state vector with a piecewise-polynomial interpolant.
///
/// On step `[t_i, t_i + h]`, with `θ = (t - t_i) / h`, each component is
/// `r1 + θ (r2 + (1-θ) (r3 + θ (r4 + (1-θ) r5)))`. Dormand–Prince output
/// fills all five; cubic Hermite data leaves `r5 = 0`.
#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    dim: usize,
    nodes: Vec<f64>,
    /// `5 * dim` coefficients per step.
    rcont: Vec<f64>,
    start: Vec<f64>,
}

impl SolutionTrajectory {
    /// Trajectory defined at one point only.
    fn point(t: f64, state: Vec<f64>) -> Self {
        SolutionTrajectory {
            dim: state.len(),
            nodes: vec![t],
            rcont: Vec::new(),
            start: state,
        }
    }

    /// Piecewise cubic Hermite interpolant of node states and their derivatives.
    pub fn from_hermite(nodes: Vec<f64>, states: &[Vec<f64>], slopes: &[Vec<f64>]) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != states.len() || nodes.len() != slopes.len() {
            return Err(Error::InvalidProblem("hermite data length mismatch".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProblem("hermite nodes must increase".into()));
        }
        let dim = states[0].len();
        let mut rcont = Vec::with_capacity(5 * dim * (nodes.len() - 1));
        for i in 0..nodes.len() - 1 {
            let h = nodes[i + 1] - nodes[i];
            let base = rcont.len();
            rcont.resize(base + 5 * dim, 0.0);
            let r = &mut rcont[base..];
            for c in 0..dim {
                let y0 = states[i][c];
                let diff = states[i + 1][c] - y0;
                let r3 = h * slopes[i][c] - diff;
                r[c] = y0;
                r[dim + c] = diff;
                r[2 * dim + c] = r3;
                r[3 * dim + c] = diff - h * slopes[i + 1][c] - r3;
            }
        }
        Ok(SolutionTrajectory {
            dim,
            nodes,
            rcont,
            start: states[0].clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.domain();
        t >= lo && t <= hi
    }

    /// Segment index and local coordinate; `t` is clamped to the domain.
    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let steps = self.steps();
        debug_assert!(steps > 0);
        let i = self.nodes.partition_point(|&x| x <= t).saturating_sub(1).min(steps - 1);
        let h = self.nodes[i + 1] - self.nodes[i];
        let theta = ((t - self.nodes[i]) / h).clamp(0.0, 1.0);
        (i, theta)
    }

    #[inline]
    fn coeffs(&self, seg: usize, c: usize) -> [f64; 5] {
        let base = seg * 5 * self.dim;
        let d = self.dim;
        [
            self.rcont[base + c],
            self.rcont[base + d + c],
            self.rcont[base + 2 * d + c],
            self.rcont[base + 3 * d + c],
            self.rcont[base + 4 * d + c],
        ]
    }

    /// Interpolated channel `c` at `t` (clamped to the domain).
    #[inline]
    pub fn value(&self, t: f64, c: usize) -> f64 {
        if self.steps() == 0 {
            return self.start[c];
        }
        let (seg, th) = self.locate(t);
        let r = self.coeffs(seg, c);
        let th1 = 1.0 - th;
        r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))
    }

    /// `d/dt` of the interpolant of channel `c` (clamped to the domain).
    pub fn derivative(&self, t: f64, c: usize) -> f64 {
        if self.steps() == 0 {
            return 0.0;
        }
        let (seg, th) = self.locate(t);
        let h = self.nodes[seg + 1] - self.nodes[seg];
        let r = self.coeffs(seg, c);
        let th1 = 1.0 - th;
        let s = r[3] + th1 * r[4];
        let ds = -r[4];
        let rr = r[2] + th * s;
        let drr = s + th * ds;
        let q = r[1] + th1 * rr;
        let dq = -rr + th1 * drr;
        (q + th * dq) / h
    }

    /// Writes all channels at `t` into `out` (clamped to the domain).
    #[inline]
    pub fn state_into(&self, t: f64, out: &mut [f64]) {
        if self.steps() == 0 {
            out.copy_from_slice(&self.start);
            return;
        }
        let (seg, th) = self.locate(t);
        let th1 = 1.0 - th;
        let base = seg * 5 * self.dim;
        let d = self.dim;
        let r = &self.rcont[base..base + 5 * d];
        for (c, o) in out.iter_mut().enumerate().take(d) {
            *o = r[c] + th * (r[d + c] + th1 * (r[2 * d + c] + th * (r[3 * d + c] + th1 * r[4 * d + c])));
        }
    }

    /// All channels at `t`; errors outside the domain.
    pub fn state(&self, t: f64) -> Result<Vec<f64>> {
        if !self.contains(t) {
            let (lo, hi) = self.domain();
            return Err(Error::OutOfDomain { value: t, lo, hi });
        }
        let mut out = vec![0.0; self.dim];
        self.state_into(t, &mut out);
        Ok(out)
    }

    /// Linear combination `sum_k w_k * block_k` of `blocks` equal-width
    /// channel blocks. The interpolant is linear in its coefficients, so the
    /// result is the exact interpolant of the combined solution.
    pub fn combine_blocks(&self, width: usize, weights: &[f64]) -> SolutionTrajectory {
        assert_eq!(self.dim, width * weights.len());
        let mix = |src: &[f64]| -> Vec<f64> {
            (0..width)
                .map(|c| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(k, w)| w * src[k * width + c])
                        .sum()
                })
                .collect()
        };
        let mut rcont = Vec::with_capacity(self.rcont.len() / weights.len());
        for chunk in self.rcont.chunks(self.dim) {
            rcont.extend(mix(chunk));
        }
        SolutionTrajectory {
            dim: width,
            nodes: self.nodes.clone(),
            rcont,
            start: mix(&self.start),
        }
    }
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `x' = f(t, x)` from `t0` to `t1 > t0` and returns the dense output.
pub fn dopri5<F>(mut f: F, t0: f64, t1: f64, x0: &[f64], opts: &IntegratorOptions) -> Result<SolutionTrajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = x0.len();
    if t1 == t0 {
        return Ok(SolutionTrajectory::point(t0, x0.to_vec()));
    }
    assert!(t1 > t0, "integration runs forward only");
    let span = t1 - t0;
    let h_max = span * opts.max_step_fraction;

    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut x = x0.to_vec();
    let mut x_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut r = vec![0.0; 5 * dim];
    let mut mid = vec![0.0; dim];
    let mut fmid = vec![0.0; dim];

    let mut nodes = vec![t0];
    let mut rcont = Vec::new();

    let scale = |a: f64, b: f64| opts.atol + opts.rtol * a.abs().max(b.abs());

    f(t0, &x, &mut k[0]);
    // initial step from the first-derivative size
    let d0 = rms(x.iter().map(|&v| v / scale(v, v)));
    let d1 = rms(x.iter().zip(&k[0]).map(|(&v, &dv)| dv / scale(v, v)));
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    h = h.min(h_max).max(1e-12 * span);

    let mut t = t0;
    let mut steps = 0usize;
    let mut last_rejected = false;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::Integrator {
                t,
                reason: format!("step limit {} reached", opts.max_steps),
            });
        }
        steps += 1;
        let last = t + h >= t1 || t1 - (t + h) < 1e-12 * span;
        if last {
            h = t1 - t;
        }
        if h < 1e-14 * span.max(t.abs()) {
            return Err(Error::Integrator {
                t,
                reason: "step size underflow".into(),
            });
        }

        let stage = |k: &Vec<Vec<f64>>, tmp: &mut Vec<f64>, coeffs: &[(usize, f64)]| {
            for i in 0..dim {
                let mut acc = x[i];
                for &(j, a) in coeffs {
                    acc += h * a * k[j][i];
                }
                tmp[i] = acc;
            }
        };
        stage(&k, &mut tmp, &[(0, A21)]);
        f(t + C2 * h, &tmp, &mut k[1]);
        stage(&k, &mut tmp, &[(0, A31), (1, A32)]);
        f(t + C3 * h, &tmp, &mut k[2]);
        stage(&k, &mut tmp, &[(0, A41), (1, A42), (2, A43)]);
        f(t + C4 * h, &tmp, &mut k[3]);
        stage(&k, &mut tmp, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        f(t + C5 * h, &tmp, &mut k[4]);
        stage(&k, &mut tmp, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        f(t + h, &tmp, &mut k[5]);
        stage(&k, &mut x_new, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)]);
        f(t + h, &x_new, &mut k[6]);

        for i in 0..dim {
            err[i] = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        }
        for i in 0..dim {
            let diff = x_new[i] - x[i];
            let bspl = h * k[0][i] - diff;
            r[i] = x[i];
            r[dim + i] = diff;
            r[2 * dim + i] = bspl;
            r[3 * dim + i] = diff - h * k[6][i] - bspl;
            r[4 * dim + i] =
                h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
        // defect of the dense output at the midpoint, weighted since the midpoint
        // undershoots the worst point of the step
        for i in 0..dim {
            mid[i] = r[i] + 0.5 * (r[dim + i] + 0.5 * (r[2 * dim + i] + 0.5 * (r[3 * dim + i] + 0.5 * r[4 * dim + i])));
        }
        f(t + 0.5 * h, &mid, &mut fmid);
        let defect = rms((0..dim).map(|i| {
            let slope = (r[dim + i] + 0.25 * r[3 * dim + i]) / h;
            2.0 * (slope - fmid[i]) / scale(fmid[i], fmid[i])
        }));
        let enorm = rms((0..dim).map(|i| err[i] / scale(x[i], x_new[i]))).max(defect);
        if !enorm.is_finite() {
            return Err(Error::Integrator {
                t,
                reason: "non-finite state".into(),
            });
        }

        if enorm <= 1.0 {
            rcont.extend_from_slice(&r);
            t = if last { t1 } else { t + h };
            nodes.push(t);
            std::mem::swap(&mut x, &mut x_new);
            let (first, rest) = k.split_at_mut(6);
            first[0].copy_from_slice(&rest[0]);

            let mut fac = 0.9 * enorm.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            let fac = (0.9 * enorm.powf(-0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
    }

    Ok(SolutionTrajectory {
        dim,
        nodes,
        rcont,
        start: x0.to_vec(),
    })
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Integrates `columns` copies of the companion system side by side.
/// The state is laid out column-major: `x[c * n + j] = y_c^(j)`.
fn integrate_companion(
    problem: &LinearODEProblem,
    t0: f64,
    x0: &[f64],
    forcing: Option<&dyn Fn(f64) -> f64>,
    opts: &IntegratorOptions,
) -> Result<SolutionTrajectory> {
    let n = problem.order;
    let columns = x0.len() / n;
    let (_, b) = problem.interval();
    let mut coeffs = vec![0.0; n];
    let rhs = |t: f64, x: &[f64], dx: &mut [f64]| {
        for (v, c) in coeffs.iter_mut().zip(&problem.coefficients) {
            *v = c.eval(t);
        }
        let sigma = forcing.map_or(0.0, |f| f(t));
        for col in 0..columns {
            let y = &x[col * n..(col + 1) * n];
            let dy = &mut dx[col * n..(col + 1) * n];
            dy[..n - 1].copy_from_slice(&y[1..]);
            let mut acc = problem.shift * y[0];
            for (k, a) in coeffs.iter().enumerate() {
                acc += a * y[n - 1 - k];
            }
            dy[n - 1] = sigma - acc;
        }
    };
    dopri5(rhs, t0, b, x0, opts)
}

/// `n` solutions of `T_n[M] y = 0` with identity initial data at `a`,
/// stored as one `n * n` channel trajectory sharing a mesh.
#[derive(Debug, Clone)]
pub struct FundamentalSystem {
    problem: LinearODEProblem,
    traj: SolutionTrajectory,
    tol: f64,
}

impl FundamentalSystem {
    pub fn order(&self) -> usize {
        self.problem.order
    }

    pub fn problem(&self) -> &LinearODEProblem {
        &self.problem
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn steps(&self) -> usize {
        self.traj.steps()
    }

    /// Trajectory of basis function `y_k` (channels are `y_k, ..., y_k^(n-1)`).
    pub fn trajectory(&self, k: usize) -> SolutionTrajectory {
        let n = self.order();
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        self.traj.combine_blocks(n, &w)
    }

    /// Trajectory of `sum_k c_k y_k`.
    pub fn combination(&self, coeffs: &[f64]) -> SolutionTrajectory {
        self.traj.combine_blocks(self.order(), coeffs)
    }

    /// `W(t)` with `W[j][k] = y_k^(j)(t)`, `j < n`.
    pub fn wronskian_matrix(&self, t: f64) -> Matrix {
        let n = self.order();
        let mut state = vec![0.0; n * n];
        self.traj.state_into(t, &mut state);
        Matrix::from_fn(n, n, |j, k| state[k * n + j])
    }

    /// Writes `y_k^(order)(t)` for every `k`. `order == n` uses the equation.
    pub fn basis_into(&self, t: f64, order: usize, out: &mut [f64]) {
        let n = self.order();
        assert!(order <= n);
        if order < n {
            if n == 1 {
                out[0] = self.traj.value(t, 0);
                return;
            }
            for (k, o) in out.iter_mut().enumerate().take(n) {
                *o = self.traj.value(t, k * n + order);
            }
        } else {
            let mut state = vec![0.0; n * n];
            self.traj.state_into(t, &mut state);
            for (k, o) in out.iter_mut().enumerate().take(n) {
                *o = self.problem.highest_derivative(t, &state[k * n..(k + 1) * n]);
            }
        }
    }

    /// Value of `y_k` at `t`.
    pub fn basis_value(&self, k: usize, t: f64) -> f64 {
        self.traj.value(t, k * self.order())
    }
}

/// Builds the fundamental system with canonical initial data at `a`.
pub fn integrate_fundamental_system(problem: &LinearODEProblem, tol: f64) -> Result<FundamentalSystem> {
    if !(tol > 0.0) {
        return Err(Error::InvalidProblem("tolerance must be positive".into()));
    }
    let n = problem.order;
    let mut x0 = vec![0.0; n * n];
    for k in 0..n {
        x0[k * n + k] = 1.0;
    }
    let (a, _) = problem.interval();
    let traj = integrate_companion(problem, a, &x0, None, &IntegratorOptions::with_tol(tol))?;
    Ok(FundamentalSystem {
        problem: problem.clone(),
        traj,
        tol,
    })
}

/// Impulse response seeded at `s`: zero lower derivatives and unit
/// `(n-1)`-th derivative at `s`, integrated directly on `[s, b]`.
pub fn cauchy_function(problem: &LinearODEProblem, s: f64, tol: f64) -> Result<SolutionTrajectory> {
    problem.check_domain(s)?;
    let n = problem.order;
    let mut x0 = vec![0.0; n];
    x0[n - 1] = 1.0;
    integrate_companion(problem, s, &x0, None, &IntegratorOptions::with_tol(tol))
}

/// Solves `T_n[M] u = sigma` forward from the initial state at `a`.
pub fn integrate_forced(
    problem: &LinearODEProblem,
    initial: &[f64],
    sigma: &dyn Fn(f64) -> f64,
    tol: f64,
) -> Result<SolutionTrajectory> {
    if initial.len() != problem.order {
        return Err(Error::InvalidProblem("initial state length must equal the order".into()));
    }
    let (a, _) = problem.interval();
    integrate_companion(problem, a, initial, Some(sigma), &IntegratorOptions::with_tol(tol))
}

/// `T_n[M] u(t) - sigma(t)`, differentiating the interpolant of `u^(n-1)`.
pub fn residual(
    problem: &LinearODEProblem,
    traj: &SolutionTrajectory,
    t: f64,
    sigma: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let n = problem.order;
    if traj.dim() != n {
        return Err(Error::InvalidProblem(format!(
            "trajectory has {} channels, problem order is {n}",
            traj.dim()
        )));
    }
    let mut derivs = traj.state(t)?;
    derivs.push(traj.derivative(t, n - 1));
    Ok(problem.apply(t, &derivs) - sigma(t))
}

/// Homogeneous residual `T_n[M] u(t)`.
pub fn homogeneous_residual(problem: &LinearODEProblem, traj: &SolutionTrajectory, t: f64) -> Result<f64> {
    residual(problem, traj, t, &|_| 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn first_order(m: f64) -> LinearODEProblem {
        LinearODEProblem::constant(1, (0.0, 1.0), m).unwrap()
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(LinearODEProblem::constant(0, (0.0, 1.0), 0.0).is_err());
        assert!(LinearODEProblem::constant(1, (1.0, 0.0), 0.0).is_err());
        assert!(LinearODEProblem::new(2, (0.0, 1.0), vec![0.0.into()], 0.0).is_err());
        let bad = Coefficient::parse("1/(t - 0.5)").unwrap();
        assert!(LinearODEProblem::new(1, (0.0, 1.0), vec![bad], 0.0).is_err());
    }

    #[test]
    fn exponential_decay() {
        let fs = integrate_fundamental_system(&first_order(1.0), DEFAULT_TOL).unwrap();
        assert_relative_eq!(fs.basis_value(0, 1.0), 0.36787944117144233, epsilon = 1e-9);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert_relative_eq!(fs.basis_value(0, t), (-t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn double_integrator_is_polynomial() {
        let p = LinearODEProblem::constant(2, (0.0, 1.0), 0.0).unwrap();
        let fs = integrate_fundamental_system(&p, DEFAULT_TOL).unwrap();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert_relative_eq!(fs.basis_value(0, t), 1.0, epsilon = 1e-13);
            assert_relative_eq!(fs.basis_value(1, t), t, epsilon = 1e-13);
        }
        assert!(fs.wronskian_matrix(0.0).sub(&Matrix::identity(2)).max_abs() == 0.0);
    }

    #[test]
    fn zero_shift_first_order_is_constant() {
        let fs = integrate_fundamental_system(&first_order(0.0), DEFAULT_TOL).unwrap();
        assert_eq!(fs.basis_value(0, 0.7), 1.0);
    }

    #[test]
    fn cauchy_function_cases() {
        let c = cauchy_function(&first_order(1.0), 0.25, DEFAULT_TOL).unwrap();
        assert_eq!(c.domain(), (0.25, 1.0));
        for t in [0.25, 0.5, 0.9, 1.0] {
            assert_relative_eq!(c.value(t, 0), (-(t - 0.25f64)).exp(), epsilon = 1e-9);
        }
        let p2 = LinearODEProblem::constant(2, (0.0, 1.0), 0.0).unwrap();
        let c2 = cauchy_function(&p2, 0.0, DEFAULT_TOL).unwrap();
        assert_relative_eq!(c2.value(0.6, 0), 0.6, epsilon = 1e-13);
        assert_eq!(c2.value(0.0, 1), 1.0);
        let c0 = cauchy_function(&first_order(0.0), 0.5, DEFAULT_TOL).unwrap();
        assert_eq!(c0.value(0.8, 0), 1.0);
        let end = cauchy_function(&first_order(1.0), 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(end.value(1.0, 0), 1.0);
        assert!(cauchy_function(&first_order(1.0), 1.5, DEFAULT_TOL).is_err());
    }

    #[test]
    fn residuals_are_small() {
        let p = first_order(1.0);
        let fs = integrate_fundamental_system(&p, DEFAULT_TOL).unwrap();
        let y = fs.trajectory(0);
        for i in 0..100 {
            let t = (i as f64 + 0.5) / 100.0;
            let r = homogeneous_residual(&p, &y, t).unwrap();
            assert!(r.abs() <= 10.0 * DEFAULT_TOL, "t = {t}: {r:e}");
        }
        assert!(homogeneous_residual(&p, &y, 1.5).is_err());

        let p2 = LinearODEProblem::constant(2, (0.0, 1.0), 0.0).unwrap();
        let lin = integrate_fundamental_system(&p2, DEFAULT_TOL).unwrap().trajectory(1);
        assert!(homogeneous_residual(&p2, &lin, 0.3).unwrap().abs() < 1e-13);
    }

    #[test]
    fn variable_coefficients() {
        // u'' + (1/(1+t)) u' = 0 has solutions 1 and ln(1+t)
        let p = LinearODEProblem::new(
            2,
            (0.0, 1.0),
            vec![Coefficient::parse("1/(1+t)").unwrap(), 0.0.into()],
            0.0,
        )
        .unwrap();
        let fs = integrate_fundamental_system(&p, DEFAULT_TOL).unwrap();
        for t in [0.2, 0.5, 1.0] {
            assert_relative_eq!(fs.basis_value(1, t), (1.0f64 + t).ln(), epsilon = 1e-9);
        }
        let y = fs.trajectory(1);
        for i in 0..100 {
            let t = (i as f64 + 0.5) / 100.0;
            assert!(homogeneous_residual(&p, &y, t).unwrap().abs() <= 10.0 * DEFAULT_TOL);
        }
    }

    #[test]
    fn forced_problem() {
        // u' + u = 1, u(0) = 0 -> 1 - e^{-t}
        let p = first_order(1.0);
        let u = integrate_forced(&p, &[0.0], &|_| 1.0, DEFAULT_TOL).unwrap();
        assert_relative_eq!(u.value(1.0, 0), 1.0 - (-1.0f64).exp(), epsilon = 1e-9);
        assert!(residual(&p, &u, 0.4, &|_| 1.0).unwrap().abs() < 1e-8);
    }

    #[test]
    fn hermite_interpolates_cubics_exactly() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let df = |t: f64| 3.0 * t * t - 2.0;
        let nodes = vec![0.0, 0.3, 1.0];
        let states: Vec<Vec<f64>> = nodes.iter().map(|&t| vec![f(t)]).collect();
        let slopes: Vec<Vec<f64>> = nodes.iter().map(|&t| vec![df(t)]).collect();
        let tr = SolutionTrajectory::from_hermite(nodes, &states, &slopes).unwrap();
        for t in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert_relative_eq!(tr.value(t, 0), f(t), epsilon = 1e-14);
            assert_relative_eq!(tr.derivative(t, 0), df(t), epsilon = 1e-13);
        }
    }
}
