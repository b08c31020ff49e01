//! Green's function of `T_n[M] u = σ`, `B_i(u) = δ_i C_i(u)`.
//!
//! With `g` the two-point Green's function, `ω_i` the solutions with
//! `B_j(ω_i) = δ_ij`, `A_ij = δ_j C_i(ω_j)` and `B = (I - A)^{-1}`:
//!
//! ```text
//! G(t, s) = g(t, s) + Σ_i Σ_j δ_i b_ij ω_i(t) C_j(g(·, s))
//! ```
//!
//! When every `C_i` is the same functional `C`, the resolvent is scalar:
//!
//! ```text
//! G(t, s) = g(t, s) + (Σ_i δ_i ω_i(t)) / (1 - Σ_j δ_j C(ω_j)) · C(g(·, s))
//! ```

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::functional::LinearFunctional;
use crate::linalg::{Lu, Matrix};
use crate::ode::{integrate_fundamental_system, LinearODEProblem, SolutionTrajectory, DEFAULT_TOL};
use crate::quadrature::{kronrod_nodes, Quadrature};
use crate::twopoint::{
    dot, BoundaryOperatorSet, Branch, OmegaSolution, SliceCoefficients, TwoPointGreen,
    DEFAULT_RESONANCE_TOL,
};

/// The functionals `C_1..C_n`, either one shared functional or one per condition.
#[derive(Debug, Clone)]
pub enum FunctionalSet {
    Shared(LinearFunctional),
    PerCondition(Vec<LinearFunctional>),
}

impl FunctionalSet {
    /// `C_i`.
    pub fn get(&self, i: usize) -> &LinearFunctional {
        match self {
            FunctionalSet::Shared(c) => c,
            FunctionalSet::PerCondition(cs) => &cs[i],
        }
    }

    /// Distinct functionals that need evaluating.
    fn distinct(&self) -> &[LinearFunctional] {
        match self {
            FunctionalSet::Shared(c) => std::slice::from_ref(c),
            FunctionalSet::PerCondition(cs) => cs,
        }
    }

    /// Index of `C_i` in [`Self::distinct`].
    #[inline]
    fn slot(&self, i: usize) -> usize {
        match self {
            FunctionalSet::Shared(_) => 0,
            FunctionalSet::PerCondition(_) => i,
        }
    }

    pub fn is_shared(&self) -> bool {
        matches!(self, FunctionalSet::Shared(_))
    }
}

/// Problem data for the non-local boundary value problem.
#[derive(Debug, Clone)]
pub struct NonlocalSpec {
    pub problem: LinearODEProblem,
    pub boundary: BoundaryOperatorSet,
    pub deltas: Vec<f64>,
    pub functionals: FunctionalSet,
}

impl NonlocalSpec {
    pub fn new(
        problem: LinearODEProblem,
        boundary: BoundaryOperatorSet,
        deltas: Vec<f64>,
        functionals: FunctionalSet,
    ) -> Result<Self> {
        let n = problem.order();
        if boundary.order() != n {
            return Err(Error::InvalidProblem(format!(
                "boundary operators have order {}, problem has order {n}",
                boundary.order()
            )));
        }
        if deltas.len() != n {
            return Err(Error::InvalidProblem(format!(
                "expected {n} deltas, got {}",
                deltas.len()
            )));
        }
        if let FunctionalSet::PerCondition(cs) = &functionals {
            if cs.len() != n {
                return Err(Error::InvalidProblem(format!(
                    "expected {n} functionals, got {}",
                    cs.len()
                )));
            }
        }
        for c in functionals.distinct() {
            c.validate(problem.interval())?;
        }
        Ok(NonlocalSpec {
            problem,
            boundary,
            deltas,
            functionals,
        })
    }

    pub fn order(&self) -> usize {
        self.problem.order()
    }
}

/// Numerical knobs for building `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlocalOptions {
    /// Integrator tolerance.
    pub tol: f64,
    pub resonance_tol: f64,
    pub spectral_tol: f64,
    pub quadrature: Quadrature,
    pub branch: Branch,
}

impl Default for NonlocalOptions {
    fn default() -> Self {
        NonlocalOptions {
            tol: DEFAULT_TOL,
            resonance_tol: DEFAULT_RESONANCE_TOL,
            spectral_tol: 1e-9,
            quadrature: Quadrature::default(),
            branch: Branch::Right,
        }
    }
}

/// `A` with `a_ij = δ_j C_i(ω_j)` from `c_omega[(i, j)] = C_i(ω_j)`.
pub fn build_a_matrix(deltas: &[f64], c_omega: &Matrix) -> Matrix {
    Matrix::from_fn(c_omega.rows(), c_omega.cols(), |i, j| deltas[j] * c_omega[(i, j)])
}

/// `C_i(ω_j)` for all `i, j`.
pub fn functionals_of_omegas(
    functionals: &FunctionalSet,
    omegas: &[OmegaSolution],
    quad: &Quadrature,
) -> Result<Matrix> {
    let n = omegas.len();
    let distinct: Vec<Vec<f64>> = functionals
        .distinct()
        .iter()
        .map(|c| {
            omegas
                .iter()
                .map(|w| c.eval(&|t| w.value(t), quad))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_fn(n, n, |i, j| distinct[functionals.slot(i)][j]))
}

/// Outcome of the `det(I - A) != 0` test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumCheck {
    pub det: f64,
    pub threshold: f64,
    pub ok: bool,
}

/// `det(I - A)` against `tol` times the product of the row sums of `|I| + |A|`.
pub fn spectrum_check(a: &Matrix, tol: f64) -> SpectrumCheck {
    let n = a.rows();
    let ia = Matrix::identity(n).sub(a);
    let det = Lu::new(&ia).det();
    let scale: f64 = (0..n)
        .map(|i| 1.0 + a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .product();
    let threshold = tol * scale;
    SpectrumCheck {
        det,
        threshold,
        ok: det.abs() > threshold,
    }
}

/// Everything that does not depend on `δ`: `g`, the `ω_i`, `C_i(ω_j)` and
/// the cache of `C_j(g(·, s))`.
#[derive(Debug)]
pub struct NonlocalBase {
    green: Arc<TwoPointGreen>,
    omegas: Vec<OmegaSolution>,
    functionals: FunctionalSet,
    c_omega: Matrix,
    options: NonlocalOptions,
    slice_cache: RwLock<HashMap<u64, Arc<[f64]>>>,
}

impl NonlocalBase {
    pub fn build(
        problem: &LinearODEProblem,
        boundary: &BoundaryOperatorSet,
        functionals: &FunctionalSet,
        options: NonlocalOptions,
    ) -> Result<Arc<Self>> {
        let fsys = Arc::new(integrate_fundamental_system(problem, options.tol)?);
        let green = TwoPointGreen::build(boundary.clone(), fsys, options.resonance_tol)?
            .with_branch(options.branch);
        let omegas = green.omegas()?;
        let c_omega = functionals_of_omegas(functionals, &omegas, &options.quadrature)?;
        Ok(Arc::new(NonlocalBase {
            green: Arc::new(green),
            omegas,
            functionals: functionals.clone(),
            c_omega,
            options,
            slice_cache: RwLock::new(HashMap::new()),
        }))
    }

    pub fn green(&self) -> &TwoPointGreen {
        &self.green
    }

    pub fn omegas(&self) -> &[OmegaSolution] {
        &self.omegas
    }

    pub fn functionals(&self) -> &FunctionalSet {
        &self.functionals
    }

    /// `C_i(ω_j)`.
    pub fn c_omega(&self) -> &Matrix {
        &self.c_omega
    }

    pub fn options(&self) -> &NonlocalOptions {
        &self.options
    }

    pub fn order(&self) -> usize {
        self.green.order()
    }

    /// `C(g(·, s))` for each distinct functional, cached on the bits of `s`.
    pub fn slice_functionals(&self, s: f64) -> Result<Arc<[f64]>> {
        let key = s.to_bits();
        if let Some(hit) = self.slice_cache.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let quad = &self.options.quadrature;
        let values: Arc<[f64]> = self
            .functionals
            .distinct()
            .iter()
            .map(|c| crate::functional::functional_of_green_slice(c, &self.green, s, quad))
            .collect::<Result<Vec<f64>>>()?
            .into();
        self.slice_cache
            .write()
            .expect("cache lock")
            .insert(key, Arc::clone(&values));
        Ok(values)
    }

    /// General assembly through the full resolvent.
    pub fn assemble(self: &Arc<Self>, deltas: &[f64]) -> Result<NonlocalGreen> {
        self.assemble_with(deltas, false)
    }

    /// Scalar-resolvent assembly; requires a shared functional.
    pub fn assemble_shared(self: &Arc<Self>, deltas: &[f64]) -> Result<NonlocalGreen> {
        self.assemble_with(deltas, true)
    }

    fn assemble_with(self: &Arc<Self>, deltas: &[f64], scalar: bool) -> Result<NonlocalGreen> {
        let n = self.order();
        if deltas.len() != n {
            return Err(Error::InvalidProblem(format!(
                "expected {n} deltas, got {}",
                deltas.len()
            )));
        }
        let a = build_a_matrix(deltas, &self.c_omega);
        let assembly = if scalar {
            if !self.functionals.is_shared() {
                return Err(Error::InvalidProblem(
                    "scalar resolvent needs a single shared functional".into(),
                ));
            }
            // row 0 of A holds δ_j C(ω_j)
            let sum: f64 = a.row(0).iter().sum();
            let denom = 1.0 - sum;
            let threshold = self.options.spectral_tol * (1.0 + a.row(0).iter().map(|x| x.abs()).sum::<f64>());
            if denom.abs() <= threshold {
                return Err(Error::SpectralObstruction {
                    det: denom,
                    threshold,
                });
            }
            Assembly::Scalar { denom }
        } else {
            Assembly::General
        };
        let check = spectrum_check(&a, self.options.spectral_tol);
        if !check.ok {
            return Err(Error::SpectralObstruction {
                det: check.det,
                threshold: check.threshold,
            });
        }
        let resolvent = Lu::new(&Matrix::identity(n).sub(&a)).inverse()?;
        let omega_coeffs = Matrix::from_fn(n, n, |k, i| self.omegas[i].coeffs[k]);
        Ok(NonlocalGreen {
            base: Arc::clone(self),
            deltas: deltas.to_vec(),
            a,
            resolvent,
            det_ia: check.det,
            assembly,
            omega_coeffs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Assembly {
    General,
    Scalar { denom: f64 },
}

/// Basis coefficients of `G(·, s)` on each side of `t = s`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSlice {
    pub s: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl KernelSlice {
    #[inline]
    pub fn select(&self, t: f64, branch: Branch) -> &[f64] {
        if branch.takes_right(t, self.s) {
            &self.right
        } else {
            &self.left
        }
    }
}

/// Mesh settings for [`NonlocalGreen::solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Number of mesh intervals; each is also one fixed 15-point quadrature panel.
    pub intervals: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { intervals: 256 }
    }
}

/// Assembled Green's function `G` of the non-local problem.
#[derive(Debug, Clone)]
pub struct NonlocalGreen {
    base: Arc<NonlocalBase>,
    deltas: Vec<f64>,
    a: Matrix,
    resolvent: Matrix,
    det_ia: f64,
    assembly: Assembly,
    /// Column `i` holds the basis coefficients of `ω_i`.
    omega_coeffs: Matrix,
}

impl NonlocalGreen {
    /// General path.
    pub fn build(spec: &NonlocalSpec, options: NonlocalOptions) -> Result<Self> {
        NonlocalBase::build(&spec.problem, &spec.boundary, &spec.functionals, options)?.assemble(&spec.deltas)
    }

    /// Scalar-resolvent path for a shared functional.
    pub fn build_single(spec: &NonlocalSpec, options: NonlocalOptions) -> Result<Self> {
        NonlocalBase::build(&spec.problem, &spec.boundary, &spec.functionals, options)?
            .assemble_shared(&spec.deltas)
    }

    /// Same `g`, `ω_i` and caches with different `δ`.
    pub fn with_deltas(&self, deltas: &[f64]) -> Result<Self> {
        match self.assembly {
            Assembly::General => self.base.assemble(deltas),
            Assembly::Scalar { .. } => self.base.assemble_shared(deltas),
        }
    }

    pub fn base(&self) -> &Arc<NonlocalBase> {
        &self.base
    }

    pub fn green(&self) -> &TwoPointGreen {
        &self.base.green
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn a_matrix(&self) -> &Matrix {
        &self.a
    }

    /// `B = (I - A)^{-1}`.
    pub fn resolvent(&self) -> &Matrix {
        &self.resolvent
    }

    /// `det(I - A)`.
    pub fn det_i_minus_a(&self) -> f64 {
        self.det_ia
    }

    pub fn is_scalar_assembly(&self) -> bool {
        matches!(self.assembly, Assembly::Scalar { .. })
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    pub fn interval(&self) -> (f64, f64) {
        self.base.green.interval()
    }

    pub fn omega(&self, i: usize) -> &OmegaSolution {
        &self.base.omegas[i]
    }

    /// `w_i(s)` such that `G(t, s) = g(t, s) + Σ_i w_i(s) ω_i(t)`.
    fn perturbation_weights(&self, s: f64) -> Result<Vec<f64>> {
        let n = self.order();
        let cg = self.base.slice_functionals(s)?;
        let fs = &self.base.functionals;
        Ok(match self.assembly {
            Assembly::General => (0..n)
                .map(|i| {
                    let acc: f64 = (0..n).map(|j| self.resolvent[(i, j)] * cg[fs.slot(j)]).sum();
                    self.deltas[i] * acc
                })
                .collect(),
            Assembly::Scalar { denom } => {
                let factor = cg[0] / denom;
                self.deltas.iter().map(|d| d * factor).collect()
            }
        })
    }

    /// `G(t, s)` under the branch convention of the options.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        self.eval_branch(t, s, self.base.green.branch())
    }

    pub fn eval_branch(&self, t: f64, s: f64, branch: Branch) -> Result<f64> {
        let g = self.base.green.eval_branch(t, s, branch)?;
        let w = self.perturbation_weights(s)?;
        Ok(g + self
            .base
            .omegas
            .iter()
            .zip(&w)
            .map(|(om, wi)| wi * om.value(t))
            .sum::<f64>())
    }

    /// `G(·, s)` as basis coefficients.
    pub fn slice(&self, s: f64) -> Result<KernelSlice> {
        let g: Arc<SliceCoefficients> = self.base.green.slice(s)?;
        let w = self.perturbation_weights(s)?;
        let shift = self.omega_coeffs.mul_vec(&w);
        let add = |v: &[f64]| v.iter().zip(&shift).map(|(a, b)| a + b).collect();
        Ok(KernelSlice {
            s,
            left: add(&g.left),
            right: add(&g.right),
        })
    }

    /// `∂^k G / ∂t^k (t, s)`, `k <= n`.
    pub fn derivative(&self, t: f64, s: f64, order: usize, branch: Branch) -> Result<f64> {
        self.base.green.problem().check_domain(t)?;
        let slice = self.slice(s)?;
        let mut basis = vec![0.0; self.order()];
        self.base.green.fundamental_system().basis_into(t, order, &mut basis);
        Ok(dot(&basis, slice.select(t, branch)))
    }

    /// Values of `G` on a tensor grid through precomputed basis values.
    /// `values[i][j] = G(ts[i], ss[j])`; on exact diagonal hits both one-sided
    /// limits are returned in `diagonal`.
    pub fn sample_grid(&self, ts: &[f64], ss: &[f64]) -> Result<GridSamples> {
        let n = self.order();
        let fsys = self.base.green.fundamental_system();
        for &t in ts {
            self.base.green.problem().check_domain(t)?;
        }
        let basis: Vec<Vec<f64>> = ts
            .iter()
            .map(|&t| {
                let mut b = vec![0.0; n];
                fsys.basis_into(t, 0, &mut b);
                b
            })
            .collect();
        let mut values = vec![vec![0.0; ss.len()]; ts.len()];
        let mut diagonal = Vec::new();
        for (j, &s) in ss.iter().enumerate() {
            let slice = self.slice(s)?;
            for (i, &t) in ts.iter().enumerate() {
                if t == s {
                    let right = dot(&basis[i], &slice.right);
                    let left = dot(&basis[i], &slice.left);
                    values[i][j] = if self.base.green.branch() == Branch::Right { right } else { left };
                    diagonal.push(DiagonalSample { i, j, left, right });
                } else {
                    values[i][j] = dot(&basis[i], slice.select(t, Branch::Right));
                }
            }
        }
        Ok(GridSamples { values, diagonal })
    }

    /// Closed-form `∂G/∂δ_k (t, s)` for a shared functional.
    pub fn d_delta(&self, k: usize, t: f64, s: f64) -> Result<f64> {
        let fs = &self.base.functionals;
        if !fs.is_shared() {
            return Err(Error::InvalidProblem(
                "the delta derivative needs a single shared functional".into(),
            ));
        }
        let n = self.order();
        if k >= n {
            return Err(Error::InvalidProblem(format!("no delta with index {k}")));
        }
        self.base.green.problem().check_domain(t)?;
        let c_omega: Vec<f64> = self.base.c_omega.row(0).to_vec();
        let denom = 1.0 - (0..n).map(|j| self.deltas[j] * c_omega[j]).sum::<f64>();
        let threshold = self.base.options.spectral_tol
            * (1.0 + (0..n).map(|j| (self.deltas[j] * c_omega[j]).abs()).sum::<f64>());
        if denom.abs() <= threshold {
            return Err(Error::SpectralObstruction {
                det: denom,
                threshold,
            });
        }
        let omega_t: Vec<f64> = self.base.omegas.iter().map(|w| w.value(t)).collect();
        let weighted: f64 = (0..n).map(|j| self.deltas[j] * omega_t[j]).sum();
        let cg = self.base.slice_functionals(s)?[0];
        Ok((omega_t[k] * denom + c_omega[k] * weighted) / (denom * denom) * cg)
    }

    /// `u(t) = ∫ G(t, s) σ(s) ds` on a uniform mesh, returned as a Hermite
    /// trajectory of `u, ..., u^(n-1)`. Mesh nodes coincide with the panel
    /// edges, so no panel straddles the kink `s = t`.
    pub fn solve(&self, sigma: &dyn Fn(f64) -> f64, opts: SolveOptions) -> Result<SolutionTrajectory> {
        let n = self.order();
        let m = opts.intervals.max(1);
        let (a, b) = self.interval();
        let edges: Vec<f64> = (0..=m).map(|i| a + (b - a) * i as f64 / m as f64).collect();

        // per-panel integrals of the left/right kernel coefficients times σ
        let mut right = vec![vec![0.0; n]; m];
        let mut left = vec![vec![0.0; n]; m];
        for p in 0..m {
            for (s, w) in kronrod_nodes(edges[p], edges[p + 1]) {
                let slice = self.slice(s)?;
                let ws = w * sigma(s);
                for k in 0..n {
                    right[p][k] += ws * slice.right[k];
                    left[p][k] += ws * slice.left[k];
                }
            }
        }
        // at node t_q: panels p < q have s < t, panels p >= q have s > t
        let mut prefix = vec![vec![0.0; n]; m + 1];
        for p in 0..m {
            for k in 0..n {
                prefix[p + 1][k] = prefix[p][k] + right[p][k];
            }
        }
        let mut suffix = vec![vec![0.0; n]; m + 1];
        for p in (0..m).rev() {
            for k in 0..n {
                suffix[p][k] = suffix[p + 1][k] + left[p][k];
            }
        }

        let fsys = self.base.green.fundamental_system();
        let problem = self.base.green.problem();
        let mut states = Vec::with_capacity(m + 1);
        let mut slopes = Vec::with_capacity(m + 1);
        let mut basis = vec![0.0; n];
        for (q, &t) in edges.iter().enumerate() {
            let coeffs: Vec<f64> = (0..n).map(|k| prefix[q][k] + suffix[q][k]).collect();
            let mut state = Vec::with_capacity(n);
            for j in 0..n {
                fsys.basis_into(t, j, &mut basis);
                state.push(dot(&basis, &coeffs));
            }
            let top = sigma(t) + problem.highest_derivative(t, &state);
            let mut slope: Vec<f64> = state[1..].to_vec();
            slope.push(top);
            states.push(state);
            slopes.push(slope);
        }
        SolutionTrajectory::from_hermite(edges, &states, &slopes)
    }
}

/// Diagonal grid point with both one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalSample {
    pub i: usize,
    pub j: usize,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSamples {
    pub values: Vec<Vec<f64>>,
    pub diagonal: Vec<DiagonalSample>,
}

/// Free-function form of [`NonlocalGreen::build`].
pub fn build_nonlocal_green(spec: &NonlocalSpec) -> Result<NonlocalGreen> {
    NonlocalGreen::build(spec, NonlocalOptions::default())
}

/// Free-function form of [`NonlocalGreen::build_single`].
pub fn single_functional_green(spec: &NonlocalSpec) -> Result<NonlocalGreen> {
    NonlocalGreen::build_single(spec, NonlocalOptions::default())
}
