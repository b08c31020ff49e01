//! Two-point Green's function `g_M` and the auxiliary solutions `ω_i`.
//!
//! With `W(s)` the Wronskian matrix of the fundamental system, the Cauchy
//! function is `c(t, s) = Σ_k y_k(t) z_k(s)` with `W(s) z = e_n`, and
//!
//! ```text
//! g(t, s) = H(t - s) c(t, s) + Σ_k d_k(s) y_k(t),   U d = -(β W(b)) z
//! ```
//!
//! where `U_ij = B_i(y_j)`. So every slice `g(·, s)` is a combination of the
//! basis with one coefficient vector for `t > s` and one for `t < s`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::ode::{FundamentalSystem, LinearODEProblem, SolutionTrajectory};

/// Which one-sided limit `g(s, s)` takes on the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Branch {
    /// `g(s, s) = g(s⁺, s)`, the `t >= s` branch.
    #[default]
    Right,
    /// `g(s, s) = g(s⁻, s)`, the `t < s` branch.
    Left,
}

impl Branch {
    pub fn mirror(self) -> Branch {
        match self {
            Branch::Right => Branch::Left,
            Branch::Left => Branch::Right,
        }
    }

    /// Whether `(t, s)` is evaluated on the `t >= s` piece.
    #[inline]
    pub fn takes_right(self, t: f64, s: f64) -> bool {
        t > s || (t == s && self == Branch::Right)
    }
}

/// Coefficients `α_j^i`, `β_j^i` of `B_i(u) = Σ_j α_j^i u^(j)(a) + β_j^i u^(j)(b)`.
/// Row `i` is condition `i`, column `j` the derivative order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperatorSet {
    alpha: Matrix,
    beta: Matrix,
}

/// Relative pivot tolerance for the rank precheck.
pub const RANK_TOL: f64 = 1e-12;

impl BoundaryOperatorSet {
    pub fn new(alpha: Matrix, beta: Matrix) -> Result<Self> {
        if !alpha.is_square() || alpha.rows() != beta.rows() || alpha.cols() != beta.cols() {
            return Err(Error::InvalidProblem(
                "alpha and beta must both be n x n".into(),
            ));
        }
        if alpha.rows() == 0 {
            return Err(Error::InvalidProblem("empty boundary operator set".into()));
        }
        Ok(BoundaryOperatorSet { alpha, beta })
    }

    pub fn from_rows(alpha: &[Vec<f64>], beta: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(alpha)?, Matrix::from_rows(beta)?)
    }

    /// `u^(j)(a) - u^(j)(b) = 0`, `j = 0..n-1`.
    pub fn periodic(n: usize) -> Self {
        let id = Matrix::identity(n);
        let neg = Matrix::from_fn(n, n, |i, j| if i == j { -1.0 } else { 0.0 });
        BoundaryOperatorSet { alpha: id, beta: neg }
    }

    /// `u(a) = u(b) = 0` for second order problems.
    pub fn dirichlet2() -> Self {
        BoundaryOperatorSet {
            alpha: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap(),
            beta: Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap(),
        }
    }

    pub fn order(&self) -> usize {
        self.alpha.rows()
    }

    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn beta(&self) -> &Matrix {
        &self.beta
    }

    /// `B_i` from derivatives `u^(j)(a)` and `u^(j)(b)`, `j < n`.
    pub fn apply_values(&self, i: usize, at_a: &[f64], at_b: &[f64]) -> f64 {
        let n = self.order();
        (0..n)
            .map(|j| self.alpha[(i, j)] * at_a[j] + self.beta[(i, j)] * at_b[j])
            .sum()
    }

    /// `B_i(u)` for a trajectory covering `[a, b]`.
    pub fn apply(&self, i: usize, traj: &SolutionTrajectory, interval: (f64, f64)) -> Result<f64> {
        if traj.dim() != self.order() {
            return Err(Error::InvalidProblem(format!(
                "trajectory has {} channels, boundary operators need {}",
                traj.dim(),
                self.order()
            )));
        }
        if i >= self.order() {
            return Err(Error::InvalidProblem(format!("no boundary condition {i}")));
        }
        let (a, b) = interval;
        Ok(self.apply_values(i, &traj.state(a)?, &traj.state(b)?))
    }

    /// Rank of `[alpha | beta]` equals `n`.
    pub fn rank_precheck(&self) -> bool {
        let n = self.order();
        let block = Matrix::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self.alpha[(i, j)]
            } else {
                self.beta[(i, j - n)]
            }
        });
        block.rank(RANK_TOL) == n
    }
}

/// Free-function form of [`BoundaryOperatorSet::apply`].
pub fn boundary_apply(
    boundary: &BoundaryOperatorSet,
    i: usize,
    traj: &SolutionTrajectory,
    interval: (f64, f64),
) -> Result<f64> {
    boundary.apply(i, traj, interval)
}

/// Free-function form of [`BoundaryOperatorSet::rank_precheck`].
pub fn rank_precheck(boundary: &BoundaryOperatorSet) -> bool {
    boundary.rank_precheck()
}

/// Matrix `U_ij = B_i(y_j)` and the cancellation-free scale of its determinant.
fn uniqueness_matrix(boundary: &BoundaryOperatorSet, fsys: &FundamentalSystem) -> (Matrix, f64) {
    let n = fsys.order();
    let (a, b) = fsys.problem().interval();
    let wa = fsys.wronskian_matrix(a);
    let wb = fsys.wronskian_matrix(b);
    let u = boundary.alpha.mul(&wa).add(&boundary.beta.mul(&wb));
    let mut scale = 1.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            for k in 0..n {
                row += (boundary.alpha[(i, k)] * wa[(k, j)]).abs()
                    + (boundary.beta[(i, k)] * wb[(k, j)]).abs();
            }
        }
        scale *= row;
    }
    (u, scale)
}

/// `det [B_i(y_j)]`; non-zero certifies unique solvability of the two-point problem.
pub fn uniqueness_determinant(boundary: &BoundaryOperatorSet, fsys: &FundamentalSystem) -> f64 {
    Lu::new(&uniqueness_matrix(boundary, fsys).0).det()
}

/// Outcome of the two-point uniqueness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniquenessCheck {
    pub det: f64,
    pub threshold: f64,
    pub unique: bool,
}

pub fn uniqueness_check(
    boundary: &BoundaryOperatorSet,
    fsys: &FundamentalSystem,
    resonance_tol: f64,
) -> UniquenessCheck {
    let (u, scale) = uniqueness_matrix(boundary, fsys);
    let det = Lu::new(&u).det();
    let threshold = resonance_tol * scale;
    UniquenessCheck {
        det,
        threshold,
        unique: det.abs() > threshold && scale > 0.0,
    }
}

/// Coefficients of `g(·, s)` in the fundamental basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCoefficients {
    /// For `t < s`.
    pub left: Vec<f64>,
    /// For `t > s`.
    pub right: Vec<f64>,
}

impl SliceCoefficients {
    #[inline]
    pub fn select(&self, t: f64, s: f64, branch: Branch) -> &[f64] {
        if branch.takes_right(t, s) {
            &self.right
        } else {
            &self.left
        }
    }
}

/// Default relative threshold on `|det U|` below which `M` is treated as resonant.
pub const DEFAULT_RESONANCE_TOL: f64 = 1e-9;

/// The Green's function of `T_n[M] u = σ`, `B_i(u) = 0`.
#[derive(Debug)]
pub struct TwoPointGreen {
    boundary: BoundaryOperatorSet,
    fsys: Arc<FundamentalSystem>,
    branch: Branch,
    u_lu: Lu,
    beta_wb: Matrix,
    det: f64,
    memo: RwLock<HashMap<u64, Arc<SliceCoefficients>>>,
}

impl TwoPointGreen {
    /// Assembles `g_M`; fails with [`Error::ResonantProblem`] when `M` is an eigenvalue.
    pub fn build(
        boundary: BoundaryOperatorSet,
        fsys: Arc<FundamentalSystem>,
        resonance_tol: f64,
    ) -> Result<Self> {
        let n = fsys.order();
        if boundary.order() != n {
            return Err(Error::InvalidProblem(format!(
                "boundary operators have order {}, problem has order {n}",
                boundary.order()
            )));
        }
        let check = uniqueness_check(&boundary, &fsys, resonance_tol);
        if !check.unique {
            return Err(Error::ResonantProblem {
                det: check.det,
                threshold: check.threshold,
            });
        }
        let (u, _) = uniqueness_matrix(&boundary, &fsys);
        let (_, b) = fsys.problem().interval();
        let beta_wb = boundary.beta.mul(&fsys.wronskian_matrix(b));
        Ok(TwoPointGreen {
            boundary,
            u_lu: Lu::new(&u),
            beta_wb,
            det: check.det,
            fsys,
            branch: Branch::Right,
            memo: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn order(&self) -> usize {
        self.fsys.order()
    }

    pub fn problem(&self) -> &LinearODEProblem {
        self.fsys.problem()
    }

    pub fn boundary(&self) -> &BoundaryOperatorSet {
        &self.boundary
    }

    pub fn fundamental_system(&self) -> &Arc<FundamentalSystem> {
        &self.fsys
    }

    pub fn interval(&self) -> (f64, f64) {
        self.problem().interval()
    }

    /// `det [B_i(y_j)]`.
    pub fn uniqueness_determinant(&self) -> f64 {
        self.det
    }

    fn compute_slice(&self, s: f64) -> Result<SliceCoefficients> {
        let n = self.order();
        let mut e = vec![0.0; n];
        e[n - 1] = 1.0;
        let z = Lu::new(&self.fsys.wronskian_matrix(s)).solve(&e)?;
        let rhs: Vec<f64> = self.beta_wb.mul_vec(&z).into_iter().map(|v| -v).collect();
        let d = self.u_lu.solve(&rhs)?;
        let right = z.iter().zip(&d).map(|(a, b)| a + b).collect();
        Ok(SliceCoefficients { left: d, right })
    }

    /// Basis coefficients of `g(·, s)`, memoized on the bit pattern of `s`.
    pub fn slice(&self, s: f64) -> Result<Arc<SliceCoefficients>> {
        self.problem().check_domain(s)?;
        let key = s.to_bits();
        if let Some(hit) = self.memo.read().expect("memo lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let slice = Arc::new(self.compute_slice(s)?);
        self.memo
            .write()
            .expect("memo lock")
            .insert(key, Arc::clone(&slice));
        Ok(slice)
    }

    /// `g(t, s)` under this function's branch convention.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        self.eval_branch(t, s, self.branch)
    }

    pub fn eval_branch(&self, t: f64, s: f64, branch: Branch) -> Result<f64> {
        self.derivative(t, s, 0, branch)
    }

    /// `∂^k g / ∂t^k (t, s)`, `k <= n`.
    pub fn derivative(&self, t: f64, s: f64, order: usize, branch: Branch) -> Result<f64> {
        self.problem().check_domain(t)?;
        let slice = self.slice(s)?;
        let coeffs = slice.select(t, s, branch);
        let mut basis = vec![0.0; self.order()];
        self.fsys.basis_into(t, order, &mut basis);
        Ok(dot(&basis, coeffs))
    }

    /// `ω_i`: `T_n[M] ω = 0`, `B_j(ω) = δ_ij`.
    pub fn omega(&self, i: usize) -> Result<OmegaSolution> {
        let n = self.order();
        if i >= n {
            return Err(Error::InvalidProblem(format!("no omega with index {i}")));
        }
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let coeffs = self.u_lu.solve(&e)?;
        Ok(OmegaSolution {
            index: i,
            trajectory: self.fsys.combination(&coeffs),
            coeffs,
        })
    }

    pub fn omegas(&self) -> Result<Vec<OmegaSolution>> {
        (0..self.order()).map(|i| self.omega(i)).collect()
    }
}

/// Free-function form of [`TwoPointGreen::eval`].
pub fn eval_green(g: &TwoPointGreen, t: f64, s: f64) -> Result<f64> {
    g.eval(t, s)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solution of the homogeneous equation with `B_j(ω_i) = δ_ij`.
#[derive(Debug, Clone)]
pub struct OmegaSolution {
    pub index: usize,
    /// `ω_i = Σ_k coeffs[k] y_k`.
    pub coeffs: Vec<f64>,
    pub trajectory: SolutionTrajectory,
}

impl OmegaSolution {
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.trajectory.value(t, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate_fundamental_system, DEFAULT_TOL};
    use approx::assert_relative_eq;

    fn periodic_green(m: f64) -> Result<TwoPointGreen> {
        let p = LinearODEProblem::constant(1, (0.0, 1.0), m).unwrap();
        let fs = Arc::new(integrate_fundamental_system(&p, DEFAULT_TOL).unwrap());
        TwoPointGreen::build(BoundaryOperatorSet::periodic(1), fs, DEFAULT_RESONANCE_TOL)
    }

    #[test]
    fn boundary_apply_cases() {
        let p = LinearODEProblem::constant(1, (0.0, 1.0), 1.0).unwrap();
        let fs = integrate_fundamental_system(&p, DEFAULT_TOL).unwrap();
        let per = BoundaryOperatorSet::periodic(1);
        let v = per.apply(0, &fs.trajectory(0), (0.0, 1.0)).unwrap();
        assert_relative_eq!(v, 1.0 - (-1.0f64).exp(), epsilon = 1e-9);
        let zero = fs.combination(&[0.0]);
        assert_eq!(per.apply(0, &zero, (0.0, 1.0)).unwrap(), 0.0);

        let p2 = LinearODEProblem::constant(2, (0.0, 1.0), 0.0).unwrap();
        let fs2 = integrate_fundamental_system(&p2, DEFAULT_TOL).unwrap();
        let dir = BoundaryOperatorSet::dirichlet2();
        assert_eq!(dir.apply(0, &fs2.trajectory(1), (0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn rank_precheck_cases() {
        assert!(BoundaryOperatorSet::periodic(1).rank_precheck());
        let zero = BoundaryOperatorSet::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2)).unwrap();
        assert!(!zero.rank_precheck());
        let dup = BoundaryOperatorSet::from_rows(
            &[vec![1.0, 0.0], vec![1.0, 0.0]],
            &[vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap();
        assert!(!dup.rank_precheck());
        assert!(BoundaryOperatorSet::dirichlet2().rank_precheck());
    }

    #[test]
    fn determinants() {
        let p = LinearODEProblem::constant(1, (0.0, 1.0), 1.0).unwrap();
        let fs = integrate_fundamental_system(&p, DEFAULT_TOL).unwrap();
        let d = uniqueness_determinant(&BoundaryOperatorSet::periodic(1), &fs);
        assert_relative_eq!(d, 0.6321205588285577, epsilon = 1e-9);

        let p0 = p.with_shift(0.0);
        let fs0 = integrate_fundamental_system(&p0, DEFAULT_TOL).unwrap();
        assert_eq!(uniqueness_determinant(&BoundaryOperatorSet::periodic(1), &fs0), 0.0);

        let p2 = LinearODEProblem::constant(2, (0.0, 1.0), 0.0).unwrap();
        let fs2 = integrate_fundamental_system(&p2, DEFAULT_TOL).unwrap();
        assert_relative_eq!(
            uniqueness_determinant(&BoundaryOperatorSet::dirichlet2(), &fs2),
            1.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn resonant_shift_is_refused() {
        assert!(matches!(periodic_green(0.0), Err(Error::ResonantProblem { .. })));
        assert!(matches!(periodic_green(1e-12), Err(Error::ResonantProblem { .. })));
        assert!(periodic_green(1e-3).is_ok());
    }

    #[test]
    fn periodic_values_and_branches() {
        let g = periodic_green(1.0).unwrap();
        let k = 1.0 / (1.0 - (-1.0f64).exp());
        assert_relative_eq!(g.eval(0.5, 0.25).unwrap(), (-0.25f64).exp() * k, epsilon = 1e-9);
        assert_relative_eq!(g.eval(0.25, 0.5).unwrap(), (-0.75f64).exp() * k, epsilon = 1e-9);
        assert_relative_eq!(g.eval(0.5, 0.5).unwrap(), k, epsilon = 1e-9);
        let left = g.eval_branch(0.5, 0.5, Branch::Left).unwrap();
        assert_relative_eq!(left, (-1.0f64).exp() * k, epsilon = 1e-9);
        assert_relative_eq!(g.eval(0.5, 0.5).unwrap() - left, 1.0, epsilon = 1e-12);
        assert!(g.eval(1.5, 0.5).is_err());
        assert!(g.eval(0.5, -0.1).is_err());
    }

    #[test]
    fn omega_periodic() {
        let g = periodic_green(1.0).unwrap();
        let w = g.omega(0).unwrap();
        assert_relative_eq!(w.value(0.0), 1.5819767068693265, epsilon = 1e-9);
        assert_relative_eq!(w.value(1.0), 0.5819767068693265, epsilon = 1e-9);
        let b = g.boundary().apply(0, &w.trajectory, (0.0, 1.0)).unwrap();
        assert_relative_eq!(b, 1.0, epsilon = 1e-12);
        assert!(g.omega(1).is_err());
    }

    #[test]
    fn dirichlet_kernel() {
        let p2 = LinearODEProblem::constant(2, (0.0, 1.0), 0.0).unwrap();
        let fs2 = Arc::new(integrate_fundamental_system(&p2, DEFAULT_TOL).unwrap());
        let g = TwoPointGreen::build(BoundaryOperatorSet::dirichlet2(), fs2, DEFAULT_RESONANCE_TOL).unwrap();
        assert_relative_eq!(g.eval(0.5, 0.5).unwrap(), -0.25, epsilon = 1e-12);
        assert_relative_eq!(g.eval(0.8, 0.3).unwrap(), 0.3 * (0.8 - 1.0), epsilon = 1e-12);
        assert_relative_eq!(g.eval(0.3, 0.8).unwrap(), 0.3 * (0.8 - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn memo_is_reused() {
        let g = periodic_green(2.0).unwrap();
        let a = g.slice(0.3).unwrap();
        let b = g.slice(0.3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
