//! Sign classification of Green's functions on `(t, s)` grids, the
//! comparison check for a shared positive functional, and scans over the
//! `(M, δ)` parameter plane.

use std::fmt;
use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::functional::LinearFunctional;
use crate::nonlocal::{
    DiagonalSample, FunctionalSet, GridSamples, NonlocalBase, NonlocalGreen, NonlocalOptions,
};
use crate::ode::LinearODEProblem;
use crate::periodic::{oracle_G_branch, PeriodicParams, SPECTRUM_GUARD};
use crate::twopoint::{BoundaryOperatorSet, Branch, TwoPointGreen};

/// Default `(t, s)` grid size per axis.
pub const DEFAULT_SIGN_GRID: usize = 41;
pub const DEFAULT_SIGN_TOL: f64 = 1e-10;

/// `n` equispaced points from `lo` to `hi`, both included.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Anything that can be evaluated as `K(t, s)` with a branch choice at `t = s`.
pub trait Kernel {
    fn eval_branch(&self, t: f64, s: f64, branch: Branch) -> Result<f64>;

    /// Tensor-grid samples; exact diagonal hits carry both one-sided limits.
    fn sample(&self, ts: &[f64], ss: &[f64]) -> Result<GridSamples> {
        let mut values = vec![vec![0.0; ss.len()]; ts.len()];
        let mut diagonal = Vec::new();
        for (i, &t) in ts.iter().enumerate() {
            for (j, &s) in ss.iter().enumerate() {
                let right = self.eval_branch(t, s, Branch::Right)?;
                values[i][j] = right;
                if t == s {
                    let left = self.eval_branch(t, s, Branch::Left)?;
                    diagonal.push(DiagonalSample { i, j, left, right });
                }
            }
        }
        Ok(GridSamples { values, diagonal })
    }
}

impl Kernel for NonlocalGreen {
    fn eval_branch(&self, t: f64, s: f64, branch: Branch) -> Result<f64> {
        NonlocalGreen::eval_branch(self, t, s, branch)
    }

    fn sample(&self, ts: &[f64], ss: &[f64]) -> Result<GridSamples> {
        self.sample_grid(ts, ss)
    }
}

impl Kernel for TwoPointGreen {
    fn eval_branch(&self, t: f64, s: f64, branch: Branch) -> Result<f64> {
        TwoPointGreen::eval_branch(self, t, s, branch)
    }
}

/// Closed-form periodic kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleKernel(pub PeriodicParams);

impl Kernel for OracleKernel {
    fn eval_branch(&self, t: f64, s: f64, branch: Branch) -> Result<f64> {
        oracle_G_branch(t, s, self.0, branch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignLabel {
    Positive,
    Negative,
    Mixed,
    Resonant,
    SpectralObstruction,
}

impl SignLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SignLabel::Positive => "positive",
            SignLabel::Negative => "negative",
            SignLabel::Mixed => "mixed",
            SignLabel::Resonant => "resonant",
            SignLabel::SpectralObstruction => "spectral-obstruction",
        }
    }

    /// Positive and negative swapped.
    pub fn flipped(self) -> SignLabel {
        match self {
            SignLabel::Positive => SignLabel::Negative,
            SignLabel::Negative => SignLabel::Positive,
            other => other,
        }
    }

    pub fn is_signed(self) -> bool {
        matches!(self, SignLabel::Positive | SignLabel::Negative)
    }
}

impl fmt::Display for SignLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of classifying one kernel on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignClassification {
    pub label: SignLabel,
    /// Signed kernel whose extreme value on the grid is within `tol` of zero.
    pub touches_zero: bool,
    pub min: f64,
    pub max: f64,
    pub argmin: (f64, f64),
    pub argmax: (f64, f64),
}

impl SignClassification {
    /// Label for a cell where no kernel exists.
    fn failed(label: SignLabel) -> Self {
        SignClassification {
            label,
            touches_zero: false,
            min: f64::NAN,
            max: f64::NAN,
            argmin: (f64::NAN, f64::NAN),
            argmax: (f64::NAN, f64::NAN),
        }
    }

    /// Signed without touching zero.
    pub fn is_strict(&self) -> bool {
        self.label.is_signed() && !self.touches_zero
    }
}

/// Classifies grid samples: positive when `min > tol`, negative when
/// `max < -tol`, mixed otherwise. A kernel whose values stay on one side
/// but reach `[-tol, tol]` keeps the sign of its nonzero part and is flagged.
pub fn classify_samples(samples: &GridSamples, ts: &[f64], ss: &[f64], tol: f64) -> SignClassification {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut argmin = (f64::NAN, f64::NAN);
    let mut argmax = (f64::NAN, f64::NAN);
    let mut visit = |v: f64, i: usize, j: usize| {
        if v < min {
            min = v;
            argmin = (ts[i], ss[j]);
        }
        if v > max {
            max = v;
            argmax = (ts[i], ss[j]);
        }
    };
    for (i, row) in samples.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            visit(v, i, j);
        }
    }
    for d in &samples.diagonal {
        visit(d.left, d.i, d.j);
        visit(d.right, d.i, d.j);
    }
    let (label, touches_zero) = if min > tol {
        (SignLabel::Positive, false)
    } else if max < -tol {
        (SignLabel::Negative, false)
    } else if min >= -tol && max > tol {
        (SignLabel::Positive, true)
    } else if max <= tol && min < -tol {
        (SignLabel::Negative, true)
    } else {
        (SignLabel::Mixed, false)
    };
    SignClassification {
        label,
        touches_zero,
        min,
        max,
        argmin,
        argmax,
    }
}

/// Grid proxy for "constant sign on the square". Both one-sided limits are
/// checked where a grid point lies on the diagonal.
pub fn constant_sign_on_grid(kernel: &dyn Kernel, ts: &[f64], ss: &[f64], tol: f64) -> Result<SignClassification> {
    if ts.is_empty() || ss.is_empty() {
        return Err(Error::InvalidProblem("empty sign grid".into()));
    }
    let samples = kernel.sample(ts, ss)?;
    Ok(classify_samples(&samples, ts, ss, tol))
}

/// Which comparison conclusion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conclusion {
    /// `G >= g >= 0`.
    AboveNonnegative,
    /// `G <= g <= 0`.
    BelowNonpositive,
    NotApplicable,
}

/// A point where a hypothesis or the conclusion fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub s: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `Σ δ_j C(ω_j) < 1`.
    pub hypothesis_a: bool,
    /// `δ_i ω_i(t) >= 0` on the grid for every `i`.
    pub hypothesis_b: bool,
    /// `C` maps non-negative functions to non-negative numbers.
    pub hypothesis_c: bool,
    pub g_sign: SignClassification,
    pub conclusion: Conclusion,
    /// The conclusion was checked pointwise and held.
    pub verified: bool,
    pub witness: Option<Witness>,
}

/// Checks the comparison hypotheses for a shared functional and, when they
/// hold and `g` keeps one sign, the ordering between `G` and `g` on the grid.
pub fn comparison_check(green: &NonlocalGreen, ts: &[f64], ss: &[f64], tol: f64) -> Result<ComparisonReport> {
    let functional = match green.base().functionals() {
        FunctionalSet::Shared(c) => c,
        FunctionalSet::PerCondition(_) => {
            return Err(Error::InvalidProblem(
                "comparison check needs a single shared functional".into(),
            ))
        }
    };
    let n = green.order();
    let hypothesis_a = green.a_matrix().row(0).iter().sum::<f64>() < 1.0;

    let mut witness = None;
    let mut hypothesis_b = true;
    'outer: for i in 0..n {
        let d = green.deltas()[i];
        for &t in ts {
            let v = d * green.omega(i).value(t);
            if v < -tol {
                hypothesis_b = false;
                witness = Some(Witness { t, s: None, value: v });
                break 'outer;
            }
        }
    }
    let hypothesis_c = functional.is_positive();

    let g_samples = green.green().sample(ts, ss)?;
    let g_sign = classify_samples(&g_samples, ts, ss, tol);
    let conclusion = if !(hypothesis_a && hypothesis_b && hypothesis_c) {
        Conclusion::NotApplicable
    } else if g_sign.min >= -tol {
        Conclusion::AboveNonnegative
    } else if g_sign.max <= tol {
        Conclusion::BelowNonpositive
    } else {
        Conclusion::NotApplicable
    };

    let mut verified = false;
    if conclusion != Conclusion::NotApplicable {
        let big = green.sample_grid(ts, ss)?;
        let above = conclusion == Conclusion::AboveNonnegative;
        let holds = |gv: f64, bv: f64| {
            if above {
                bv >= gv - tol && gv >= -tol
            } else {
                bv <= gv + tol && gv <= tol
            }
        };
        verified = true;
        'grid: for (i, row) in big.values.iter().enumerate() {
            for (j, &bv) in row.iter().enumerate() {
                if !holds(g_samples.values[i][j], bv) {
                    verified = false;
                    witness = Some(Witness {
                        t: ts[i],
                        s: Some(ss[j]),
                        value: bv - g_samples.values[i][j],
                    });
                    break 'grid;
                }
            }
        }
        for (dg, db) in g_samples.diagonal.iter().zip(&big.diagonal) {
            for (gv, bv) in [(dg.left, db.left), (dg.right, db.right)] {
                if verified && !holds(gv, bv) {
                    verified = false;
                    witness = Some(Witness {
                        t: ts[dg.i],
                        s: Some(ss[dg.j]),
                        value: bv - gv,
                    });
                }
            }
        }
    }
    Ok(ComparisonReport {
        hypothesis_a,
        hypothesis_b,
        hypothesis_c,
        g_sign,
        conclusion,
        verified,
        witness,
    })
}

/// Kernels for a fixed `M`, one per `δ`.
pub trait FamilyColumn {
    fn kernel(&self, delta: f64) -> Result<Box<dyn Kernel + '_>>;
    /// `(t, s)` square the kernels live on.
    fn interval(&self) -> (f64, f64);
}

/// A problem family indexed by `(M, δ)`.
pub trait ParameterFamily: Sync {
    fn column(&self, m: f64) -> Result<Box<dyn FamilyColumn + '_>>;
}

struct NumericColumn {
    base: Arc<NonlocalBase>,
    direction: Vec<f64>,
    shared: bool,
}

impl FamilyColumn for NumericColumn {
    fn kernel(&self, delta: f64) -> Result<Box<dyn Kernel + '_>> {
        let deltas: Vec<f64> = self.direction.iter().map(|d| d * delta).collect();
        let g = if self.shared {
            self.base.assemble_shared(&deltas)?
        } else {
            self.base.assemble(&deltas)?
        };
        Ok(Box::new(g))
    }

    fn interval(&self) -> (f64, f64) {
        self.base.green().interval()
    }
}

struct OracleColumn {
    m: f64,
}

impl FamilyColumn for OracleColumn {
    fn kernel(&self, delta: f64) -> Result<Box<dyn Kernel + '_>> {
        let p = PeriodicParams::new(self.m, delta);
        let gap = if self.m == 0.0 { delta } else { delta - self.m };
        if gap.abs() < SPECTRUM_GUARD {
            return Err(Error::SpectralObstruction {
                det: gap,
                threshold: SPECTRUM_GUARD,
            });
        }
        Ok(Box::new(OracleKernel(p)))
    }

    fn interval(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// `u' + M u = σ`, `u(0) - u(1) = δ ∫_0^1 u`, built numerically. Columns with
/// `|M|` below `oracle_below` use the closed form, since the two-point
/// problem is resonant at `M = 0`.
#[derive(Debug, Clone, Copy)]
pub struct PeriodicFamily {
    pub options: NonlocalOptions,
    pub oracle_below: f64,
}

impl Default for PeriodicFamily {
    fn default() -> Self {
        PeriodicFamily {
            options: NonlocalOptions::default(),
            oracle_below: 1e-8,
        }
    }
}

impl ParameterFamily for PeriodicFamily {
    fn column(&self, m: f64) -> Result<Box<dyn FamilyColumn + '_>> {
        if m.abs() < self.oracle_below {
            return Ok(Box::new(OracleColumn { m }));
        }
        let problem = LinearODEProblem::constant(1, (0.0, 1.0), m)?;
        let functionals = FunctionalSet::Shared(LinearFunctional::integral(0.0, 1.0));
        let base = NonlocalBase::build(&problem, &BoundaryOperatorSet::periodic(1), &functionals, self.options)?;
        Ok(Box::new(NumericColumn {
            base,
            direction: vec![1.0],
            shared: true,
        }))
    }
}

/// A user problem whose shift is replaced by `M` and whose deltas are
/// `δ · direction`.
#[derive(Debug, Clone)]
pub struct SpecFamily {
    pub problem: LinearODEProblem,
    pub boundary: BoundaryOperatorSet,
    pub functionals: FunctionalSet,
    pub direction: Vec<f64>,
    pub options: NonlocalOptions,
}

impl ParameterFamily for SpecFamily {
    fn column(&self, m: f64) -> Result<Box<dyn FamilyColumn + '_>> {
        if self.direction.len() != self.problem.order() {
            return Err(Error::InvalidProblem(format!(
                "delta direction has {} entries, order is {}",
                self.direction.len(),
                self.problem.order()
            )));
        }
        let problem = self.problem.with_shift(m);
        let base = NonlocalBase::build(&problem, &self.boundary, &self.functionals, self.options)?;
        Ok(Box::new(NumericColumn {
            base,
            direction: self.direction.clone(),
            shared: self.functionals.is_shared(),
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Points per axis of the `(t, s)` grid.
    pub grid: usize,
    pub tol: f64,
    pub bisection_tol: f64,
    pub workers: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid: DEFAULT_SIGN_GRID,
            tol: DEFAULT_SIGN_TOL,
            bisection_tol: 1e-6,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanCell {
    pub m: f64,
    pub delta: f64,
    pub sign: SignClassification,
}

/// Refined `δ` where the label changes from `below` to `above` inside one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEstimate {
    pub m_index: usize,
    pub m: f64,
    pub delta: f64,
    pub below: SignLabel,
    pub above: SignLabel,
    /// Final bracket.
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignRegionReport {
    pub m_axis: Vec<f64>,
    pub delta_axis: Vec<f64>,
    /// `M`-major: cell `(i, j)` is at `i * delta_axis.len() + j`.
    pub cells: Vec<ScanCell>,
    pub boundaries: Vec<BoundaryEstimate>,
    pub options: ScanOptions,
}

impl SignRegionReport {
    pub fn cell(&self, i: usize, j: usize) -> &ScanCell {
        &self.cells[i * self.delta_axis.len() + j]
    }

    pub fn column(&self, i: usize) -> &[ScanCell] {
        let nd = self.delta_axis.len();
        &self.cells[i * nd..(i + 1) * nd]
    }

    pub fn boundaries_at(&self, m_index: usize) -> impl Iterator<Item = &BoundaryEstimate> {
        self.boundaries.iter().filter(move |b| b.m_index == m_index)
    }

    /// Label counts in the order positive, negative, mixed, resonant, spectral.
    pub fn counts(&self) -> [usize; 5] {
        let mut c = [0; 5];
        for cell in &self.cells {
            c[cell.sign.label as usize] += 1;
        }
        c
    }

    /// One row per cell, `M`-major. Floats carry 17 significant digits.
    pub fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "M,delta,label,min,max,argmin_t,argmin_s,touches_zero")?;
        for c in &self.cells {
            writeln!(
                w,
                "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.m,
                c.delta,
                c.sign.label,
                c.sign.min,
                c.sign.max,
                c.sign.argmin.0,
                c.sign.argmin.1,
                c.sign.touches_zero
            )?;
        }
        Ok(())
    }

    pub fn write_boundaries_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "M,delta,below,above,bracket_lo,bracket_hi")?;
        for b in &self.boundaries {
            writeln!(
                w,
                "{:.16e},{:.16e},{},{},{:.16e},{:.16e}",
                b.m, b.delta, b.below, b.above, b.bracket.0, b.bracket.1
            )?;
        }
        Ok(())
    }
}

struct ColumnScan {
    cells: Vec<ScanCell>,
    boundaries: Vec<BoundaryEstimate>,
}

fn classify_delta(
    column: &dyn FamilyColumn,
    delta: f64,
    ts: &[f64],
    opts: &ScanOptions,
) -> Result<SignClassification> {
    match column.kernel(delta) {
        Ok(k) => constant_sign_on_grid(k.as_ref(), ts, ts, opts.tol),
        Err(Error::SpectralObstruction { .. }) => Ok(SignClassification::failed(SignLabel::SpectralObstruction)),
        Err(Error::ResonantProblem { .. }) => Ok(SignClassification::failed(SignLabel::Resonant)),
        Err(e) => Err(e),
    }
}

fn scan_column(
    family: &dyn ParameterFamily,
    m_index: usize,
    m: f64,
    deltas: &[f64],
    opts: &ScanOptions,
) -> Result<ColumnScan> {
    let column = match family.column(m) {
        Ok(c) => c,
        Err(Error::ResonantProblem { .. }) => {
            let cells = deltas
                .iter()
                .map(|&delta| ScanCell {
                    m,
                    delta,
                    sign: SignClassification::failed(SignLabel::Resonant),
                })
                .collect();
            return Ok(ColumnScan {
                cells,
                boundaries: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let (a, b) = column.interval();
    let ts = uniform_grid(a, b, opts.grid);
    let mut cells = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let sign = classify_delta(column.as_ref(), delta, &ts, opts)?;
        cells.push(ScanCell { m, delta, sign });
    }

    // refine every signed/mixed transition between neighbouring cells
    let mut boundaries = Vec::new();
    for w in cells.windows(2) {
        let (lo, hi) = (w[0].sign.label, w[1].sign.label);
        let signed = if lo.is_signed() && hi == SignLabel::Mixed {
            lo
        } else if hi.is_signed() && lo == SignLabel::Mixed {
            hi
        } else {
            continue;
        };
        let mut inside = if lo == signed { w[0].delta } else { w[1].delta };
        let mut outside = if lo == signed { w[1].delta } else { w[0].delta };
        while (inside - outside).abs() > opts.bisection_tol {
            let mid = 0.5 * (inside + outside);
            let label = classify_delta(column.as_ref(), mid, &ts, opts)?.label;
            if label == signed {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        boundaries.push(BoundaryEstimate {
            m_index,
            m,
            delta: 0.5 * (inside + outside),
            below: lo,
            above: hi,
            bracket: (inside.min(outside), inside.max(outside)),
        });
    }
    Ok(ColumnScan { cells, boundaries })
}

/// Classifies every `(M, δ)` cell of the rectangle and refines the
/// sign-change `δ` in each column by bisection. Columns are distributed
/// over `opts.workers` threads; output order is by index.
pub fn sign_region_scan(
    family: &dyn ParameterFamily,
    m_range: (f64, f64),
    delta_range: (f64, f64),
    resolution: (usize, usize),
    opts: ScanOptions,
) -> Result<SignRegionReport> {
    let (nm, nd) = resolution;
    if nm < 2 || nd < 2 || opts.grid < 2 {
        return Err(Error::InvalidProblem("scan grids need at least two points per axis".into()));
    }
    if !(m_range.0 < m_range.1) || !(delta_range.0 < delta_range.1) {
        return Err(Error::InvalidProblem("scan ranges must be increasing".into()));
    }
    if !(opts.tol >= 0.0) || !(opts.bisection_tol > 0.0) {
        return Err(Error::InvalidProblem("scan tolerances must be positive".into()));
    }
    let m_axis = uniform_grid(m_range.0, m_range.1, nm);
    let delta_axis = uniform_grid(delta_range.0, delta_range.1, nd);

    let workers = opts.workers.clamp(1, nm);
    let slots: Mutex<Vec<Option<Result<ColumnScan>>>> = Mutex::new((0..nm).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= nm {
                    break;
                }
                let out = scan_column(family, i, m_axis[i], &delta_axis, &opts);
                slots.lock().expect("scan slots")[i] = Some(out);
            });
        }
    });

    let mut cells = Vec::with_capacity(nm * nd);
    let mut boundaries = Vec::new();
    for slot in slots.into_inner().expect("scan slots") {
        let col = slot.expect("every column scanned")?;
        cells.extend(col.cells);
        boundaries.extend(col.boundaries);
    }
    Ok(SignRegionReport {
        m_axis,
        delta_axis,
        cells,
        boundaries,
        options: opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlocal::build_nonlocal_green;

    fn periodic(m: f64, delta: f64) -> NonlocalGreen {
        build_nonlocal_green(&PeriodicParams::new(m, delta).spec().unwrap()).unwrap()
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(-4.0, 4.0, 81);
        assert_eq!(g[0], -4.0);
        assert_eq!(g[80], 4.0);
        assert_eq!(g[40], 0.0);
        assert_eq!(uniform_grid(0.0, 1.0, 1), vec![0.0]);
    }

    #[test]
    fn sign_examples() {
        let ts = uniform_grid(0.0, 1.0, 41);
        let pos = constant_sign_on_grid(&periodic(1.0, 0.0), &ts, &ts, 1e-10).unwrap();
        assert_eq!(pos.label, SignLabel::Positive);
        assert!(!pos.touches_zero);
        let neg = constant_sign_on_grid(&periodic(1.0, 1.3), &ts, &ts, 1e-10).unwrap();
        assert_eq!(neg.label, SignLabel::Negative);
        let mixed = constant_sign_on_grid(&periodic(1.0, -1.0), &ts, &ts, 1e-10).unwrap();
        assert_eq!(mixed.label, SignLabel::Mixed);
        assert!(mixed.min < 0.0 && mixed.max > 0.0);
    }

    #[test]
    fn oracle_touching_is_flagged() {
        let ts = uniform_grid(0.0, 1.0, 41);
        let c = constant_sign_on_grid(&OracleKernel(PeriodicParams::new(0.0, -1.0)), &ts, &ts, 1e-10).unwrap();
        assert_eq!(c.label, SignLabel::Positive);
        assert!(c.touches_zero);
        assert_eq!(c.argmin, (0.0, 0.0));
    }

    #[test]
    fn comparison_examples() {
        let ts = uniform_grid(0.0, 1.0, 21);
        let r = comparison_check(&periodic(1.0, 0.5), &ts, &ts, 1e-10).unwrap();
        assert!(r.hypothesis_a && r.hypothesis_b && r.hypothesis_c);
        assert_eq!(r.conclusion, Conclusion::AboveNonnegative);
        assert!(r.verified);

        let r = comparison_check(&periodic(1.0, -0.3), &ts, &ts, 1e-10).unwrap();
        assert!(!r.hypothesis_b);
        assert_eq!(r.conclusion, Conclusion::NotApplicable);
        assert!(r.witness.is_some());

        let r = comparison_check(&periodic(-1.0, -0.5), &ts, &ts, 1e-10).unwrap();
        assert!(r.hypothesis_b);
        assert_eq!(r.conclusion, Conclusion::BelowNonpositive);
        assert!(r.verified);
    }

    #[test]
    fn small_scan_is_deterministic_across_workers() {
        let fam = PeriodicFamily::default();
        let opts = ScanOptions {
            grid: 11,
            ..ScanOptions::default()
        };
        let one = sign_region_scan(&fam, (-2.0, 2.0), (-3.0, 3.0), (5, 13), opts).unwrap();
        let four = sign_region_scan(&fam, (-2.0, 2.0), (-3.0, 3.0), (5, 13), ScanOptions { workers: 4, ..opts }).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        one.write_csv(&mut a).unwrap();
        four.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        // M = 0 column goes through the closed form
        assert_eq!(one.cell(2, 6).sign.label, SignLabel::SpectralObstruction);
        assert_eq!(one.cell(2, 5).sign.label, SignLabel::Positive);
    }

    #[test]
    fn bad_scan_arguments() {
        let fam = PeriodicFamily::default();
        let o = ScanOptions::default();
        assert!(sign_region_scan(&fam, (1.0, 0.0), (0.0, 1.0), (3, 3), o).is_err());
        assert!(sign_region_scan(&fam, (0.0, 1.0), (0.0, 1.0), (1, 3), o).is_err());
    }
}
