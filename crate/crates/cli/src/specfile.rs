//! TOML problem files.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nlgreen::{
    BoundaryOperatorSet, Branch, Coefficient, Error as CoreError, FunctionalSet, LinearFunctional, LinearODEProblem,
    Matrix, NonlocalOptions, NonlocalSpec, PeriodicParams, Quadrature, SolveOptions,
};
use serde::Deserialize;
use toml::Spanned;

/// A diagnostic pointing into the spec file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path.display(), self.line, self.column, self.message)
    }
}

impl std::error::Error for SpecError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NumOrExpr {
    Num(f64),
    Expr(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    order: Spanned<usize>,
    interval: Spanned<Vec<f64>>,
    #[serde(default)]
    coefficients: Option<Spanned<Vec<Spanned<NumOrExpr>>>>,
    #[serde(rename = "M")]
    m: Spanned<f64>,
    deltas: Spanned<Vec<f64>>,
    #[serde(default)]
    forcing: Option<Spanned<NumOrExpr>>,
    boundary: Spanned<RawBoundary>,
    #[serde(rename = "functional")]
    functionals: Spanned<Vec<Spanned<RawFunctional>>>,
    #[serde(default)]
    options: RawOptions,
    #[serde(default)]
    eval: RawEval,
    #[serde(default)]
    solve: RawSolve,
    #[serde(default)]
    scan: RawScan,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    preset: Option<Spanned<String>>,
    alpha: Option<Spanned<Vec<Vec<f64>>>>,
    beta: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunctional {
    kind: Spanned<String>,
    weight: Option<Spanned<NumOrExpr>>,
    interval: Option<Spanned<Vec<f64>>>,
    points: Option<Spanned<Vec<f64>>>,
    weights: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    tol: Option<Spanned<f64>>,
    resonance_tol: Option<Spanned<f64>>,
    spectral_tol: Option<Spanned<f64>>,
    quad_abs_tol: Option<Spanned<f64>>,
    quad_rel_tol: Option<Spanned<f64>>,
    branch: Option<Spanned<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    grid: Option<Spanned<Vec<usize>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolve {
    intervals: Option<Spanned<usize>>,
    samples: Option<Spanned<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    family: Option<Spanned<String>>,
    m: Option<Spanned<Vec<f64>>>,
    delta: Option<Spanned<Vec<f64>>>,
    grid: Option<Spanned<Vec<usize>>>,
    sign_grid: Option<Spanned<usize>>,
    tol: Option<Spanned<f64>>,
    bisection_tol: Option<Spanned<f64>>,
    direction: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanFamily {
    /// The file's own problem with `M` and `δ` varied.
    Spec,
    /// The first-order periodic problem with `C = ∫_0^1`.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub family: ScanFamily,
    pub m_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub resolution: (usize, usize),
    pub sign_grid: usize,
    pub tol: f64,
    pub bisection_tol: f64,
    pub direction: Vec<f64>,
}

/// A parsed and validated problem file.
#[derive(Debug, Clone)]
pub struct SpecFile {
    pub spec: NonlocalSpec,
    pub options: NonlocalOptions,
    pub forcing: Option<Coefficient>,
    pub forcing_src: Option<String>,
    pub eval_grid: (usize, usize),
    pub solve: SolveOptions,
    pub samples: usize,
    pub scan: ScanConfig,
}

impl SpecFile {
    /// `(M, δ)` when the file describes `u' + M u`, `u(0) - u(1) = δ ∫_0^1 u`.
    pub fn periodic_params(&self) -> Option<PeriodicParams> {
        let s = &self.spec;
        let p = &s.problem;
        let zero_coeffs = p.coefficients().iter().all(|c| c.as_constant() == Some(0.0));
        let periodic_bc = s.boundary == BoundaryOperatorSet::periodic(1);
        let plain = (0..s.order()).all(|i| s.functionals.get(i).is_plain_integral(0.0, 1.0));
        (p.order() == 1 && p.interval() == (0.0, 1.0) && zero_coeffs && periodic_bc && plain)
            .then(|| PeriodicParams::new(p.shift(), s.deltas[0]))
    }
}

pub fn load(path: &Path) -> Result<SpecFile, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path).map_err(LoadError::Spec)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Spec(SpecError),
}

struct Ctx<'a> {
    text: &'a str,
    path: &'a Path,
}

impl Ctx<'_> {
    fn at(&self, offset: usize, message: impl Into<String>) -> SpecError {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        SpecError {
            path: self.path.to_path_buf(),
            line,
            column,
            message: message.into(),
        }
    }

    fn err(&self, span: Range<usize>, message: impl Into<String>) -> SpecError {
        self.at(span.start, message)
    }

    /// Parses an expression, pointing errors at the offending character
    /// inside the quoted string.
    fn expr(&self, v: &Spanned<NumOrExpr>) -> Result<Coefficient, SpecError> {
        match v.get_ref() {
            NumOrExpr::Num(x) => Ok(Coefficient::Constant(*x)),
            NumOrExpr::Expr(src) => Coefficient::parse(src).map_err(|e| match e {
                CoreError::Expression { column, message } => {
                    self.at(v.span().start + column, format!("in expression \"{src}\": {message}"))
                }
                other => self.err(v.span(), other.to_string()),
            }),
        }
    }

    fn pair(&self, v: &Spanned<Vec<f64>>, what: &str) -> Result<(f64, f64), SpecError> {
        match v.get_ref().as_slice() {
            [lo, hi] if lo.is_finite() && hi.is_finite() && lo < hi => Ok((*lo, *hi)),
            [_, _] => Err(self.err(v.span(), format!("{what} must be increasing"))),
            other => Err(self.err(v.span(), format!("{what} needs 2 entries, got {}", other.len()))),
        }
    }

    fn grid(&self, v: &Spanned<Vec<usize>>, what: &str) -> Result<(usize, usize), SpecError> {
        match v.get_ref().as_slice() {
            [a, b] if *a >= 2 && *b >= 2 => Ok((*a, *b)),
            [_, _] => Err(self.err(v.span(), format!("{what} needs at least 2 points per axis"))),
            other => Err(self.err(v.span(), format!("{what} needs 2 entries, got {}", other.len()))),
        }
    }

    fn positive(&self, v: &Option<Spanned<f64>>, default: f64, what: &str) -> Result<f64, SpecError> {
        match v {
            None => Ok(default),
            Some(x) if *x.get_ref() > 0.0 && x.get_ref().is_finite() => Ok(*x.get_ref()),
            Some(x) => Err(self.err(x.span(), format!("{what} must be positive"))),
        }
    }

    fn square(&self, v: &Spanned<Vec<Vec<f64>>>, n: usize, what: &str) -> Result<Matrix, SpecError> {
        let rows = v.get_ref();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            let shape: Vec<String> = rows.iter().map(|r| r.len().to_string()).collect();
            return Err(self.err(
                v.span(),
                format!("{what} must be {n}x{n} for order {n}, got {} rows of lengths [{}]", rows.len(), shape.join(", ")),
            ));
        }
        Matrix::from_rows(rows).map_err(|e| self.err(v.span(), e.to_string()))
    }
}

/// Parses `text` as a spec file; `path` is only used in diagnostics.
pub fn parse(text: &str, path: &Path) -> Result<SpecFile, SpecError> {
    let ctx = Ctx { text, path };
    let raw: RawSpec = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        ctx.at(offset, e.message().trim().to_string())
    })?;

    let n = *raw.order.get_ref();
    if n == 0 {
        return Err(ctx.err(raw.order.span(), "order must be positive"));
    }
    let interval = ctx.pair(&raw.interval, "interval")?;

    let coefficients = match &raw.coefficients {
        None => vec![Coefficient::Constant(0.0); n],
        Some(list) => {
            if list.get_ref().len() != n {
                return Err(ctx.err(
                    list.span(),
                    format!("expected {n} coefficients a_1..a_{n}, got {}", list.get_ref().len()),
                ));
            }
            list.get_ref().iter().map(|c| ctx.expr(c)).collect::<Result<_, _>>()?
        }
    };
    let problem = LinearODEProblem::new(n, interval, coefficients, *raw.m.get_ref()).map_err(|e| {
        let span = raw.coefficients.as_ref().map_or(raw.m.span(), |c| c.span());
        ctx.err(span, e.to_string())
    })?;

    if raw.deltas.get_ref().len() != n {
        return Err(ctx.err(
            raw.deltas.span(),
            format!("expected {n} deltas for order {n}, got {}", raw.deltas.get_ref().len()),
        ));
    }
    if raw.deltas.get_ref().iter().any(|d| !d.is_finite()) {
        return Err(ctx.err(raw.deltas.span(), "deltas must be finite"));
    }

    let boundary = parse_boundary(&ctx, &raw.boundary, n)?;
    let functionals = parse_functionals(&ctx, &raw.functionals, n, interval)?;
    let spec = NonlocalSpec::new(problem, boundary, raw.deltas.get_ref().clone(), functionals)
        .map_err(|e| ctx.at(0, e.to_string()))?;

    let (forcing, forcing_src) = match &raw.forcing {
        None => (None, None),
        Some(f) => {
            let src = match f.get_ref() {
                NumOrExpr::Num(x) => x.to_string(),
                NumOrExpr::Expr(s) => s.clone(),
            };
            (Some(ctx.expr(f)?), Some(src))
        }
    };

    let o = &raw.options;
    let defaults = NonlocalOptions::default();
    let branch = match &o.branch {
        None => defaults.branch,
        Some(b) => match b.get_ref().as_str() {
            "right" => Branch::Right,
            "left" => Branch::Left,
            other => return Err(ctx.err(b.span(), format!("branch must be \"right\" or \"left\", got \"{other}\""))),
        },
    };
    let options = NonlocalOptions {
        tol: ctx.positive(&o.tol, defaults.tol, "tol")?,
        resonance_tol: ctx.positive(&o.resonance_tol, defaults.resonance_tol, "resonance_tol")?,
        spectral_tol: ctx.positive(&o.spectral_tol, defaults.spectral_tol, "spectral_tol")?,
        quadrature: Quadrature {
            abs_tol: ctx.positive(&o.quad_abs_tol, defaults.quadrature.abs_tol, "quad_abs_tol")?,
            rel_tol: ctx.positive(&o.quad_rel_tol, defaults.quadrature.rel_tol, "quad_rel_tol")?,
            ..defaults.quadrature
        },
        branch,
    };

    let eval_grid = match &raw.eval.grid {
        None => (21, 21),
        Some(g) => ctx.grid(g, "eval grid")?,
    };
    let solve = SolveOptions {
        intervals: match &raw.solve.intervals {
            None => SolveOptions::default().intervals,
            Some(v) if *v.get_ref() >= 1 => *v.get_ref(),
            Some(v) => return Err(ctx.err(v.span(), "intervals must be at least 1")),
        },
    };
    let samples = match &raw.solve.samples {
        None => 101,
        Some(v) if *v.get_ref() >= 2 => *v.get_ref(),
        Some(v) => return Err(ctx.err(v.span(), "samples must be at least 2")),
    };

    let s = &raw.scan;
    let family = match &s.family {
        None => ScanFamily::Spec,
        Some(f) => match f.get_ref().as_str() {
            "spec" => ScanFamily::Spec,
            "periodic" => ScanFamily::Periodic,
            other => return Err(ctx.err(f.span(), format!("family must be \"spec\" or \"periodic\", got \"{other}\""))),
        },
    };
    let direction = match &s.direction {
        None => vec![1.0; n],
        Some(d) if d.get_ref().len() == n => d.get_ref().clone(),
        Some(d) => {
            return Err(ctx.err(d.span(), format!("direction needs {n} entries, got {}", d.get_ref().len())));
        }
    };
    if family == ScanFamily::Periodic && n != 1 {
        return Err(ctx.err(s.family.as_ref().unwrap().span(), "the periodic family is first order"));
    }
    let scan = ScanConfig {
        family,
        m_range: s.m.as_ref().map_or(Ok((-3.0, 3.0)), |v| ctx.pair(v, "scan m range"))?,
        delta_range: s.delta.as_ref().map_or(Ok((-4.0, 4.0)), |v| ctx.pair(v, "scan delta range"))?,
        resolution: s.grid.as_ref().map_or(Ok((61, 81)), |v| ctx.grid(v, "scan grid"))?,
        sign_grid: match &s.sign_grid {
            None => 41,
            Some(v) if *v.get_ref() >= 2 => *v.get_ref(),
            Some(v) => return Err(ctx.err(v.span(), "sign_grid must be at least 2")),
        },
        tol: match &s.tol {
            None => 1e-10,
            Some(v) if *v.get_ref() >= 0.0 => *v.get_ref(),
            Some(v) => return Err(ctx.err(v.span(), "scan tol must be non-negative")),
        },
        bisection_tol: ctx.positive(&s.bisection_tol, 1e-6, "bisection_tol")?,
        direction,
    };

    Ok(SpecFile {
        spec,
        options,
        forcing,
        forcing_src,
        eval_grid,
        solve,
        samples,
        scan,
    })
}

fn parse_boundary(ctx: &Ctx, raw: &Spanned<RawBoundary>, n: usize) -> Result<BoundaryOperatorSet, SpecError> {
    let b = raw.get_ref();
    match (&b.preset, &b.alpha, &b.beta) {
        (Some(p), None, None) => match p.get_ref().as_str() {
            "periodic" => Ok(BoundaryOperatorSet::periodic(n)),
            "dirichlet" if n == 2 => Ok(BoundaryOperatorSet::dirichlet2()),
            "dirichlet" => Err(ctx.err(p.span(), format!("the dirichlet preset needs order 2, order is {n}"))),
            other => Err(ctx.err(p.span(), format!("unknown boundary preset \"{other}\""))),
        },
        (None, Some(alpha), Some(beta)) => {
            let alpha = ctx.square(alpha, n, "alpha")?;
            let beta = ctx.square(beta, n, "beta")?;
            BoundaryOperatorSet::new(alpha, beta).map_err(|e| ctx.err(raw.span(), e.to_string()))
        }
        _ => Err(ctx.err(raw.span(), "boundary needs either `preset` or both `alpha` and `beta`")),
    }
}

fn parse_functionals(
    ctx: &Ctx,
    raw: &Spanned<Vec<Spanned<RawFunctional>>>,
    n: usize,
    interval: (f64, f64),
) -> Result<FunctionalSet, SpecError> {
    let list = raw.get_ref();
    if list.len() != 1 && list.len() != n {
        return Err(ctx.err(
            raw.span(),
            format!("give one shared functional or {n} (one per condition), got {}", list.len()),
        ));
    }
    let mut out = Vec::with_capacity(list.len());
    for f in list {
        let c = parse_functional(ctx, f)?;
        let r = f.get_ref();
        let span = r
            .interval
            .as_ref()
            .or(r.points.as_ref())
            .map_or(f.span(), |v| v.span());
        c.validate(interval).map_err(|e| ctx.err(span, e.to_string()))?;
        out.push(c);
    }
    Ok(if out.len() == 1 {
        FunctionalSet::Shared(out.remove(0))
    } else {
        FunctionalSet::PerCondition(out)
    })
}

fn parse_functional(ctx: &Ctx, raw: &Spanned<RawFunctional>) -> Result<LinearFunctional, SpecError> {
    let f = raw.get_ref();
    let stray = |name: &str, present: bool| -> Result<(), SpecError> {
        if present {
            Err(ctx.err(raw.span(), format!("`{name}` does not apply to a {} functional", f.kind.get_ref())))
        } else {
            Ok(())
        }
    };
    match f.kind.get_ref().as_str() {
        "integral" => {
            stray("points", f.points.is_some())?;
            stray("weights", f.weights.is_some())?;
            let weight = match &f.weight {
                None => Coefficient::Constant(1.0),
                Some(w) => ctx.expr(w)?,
            };
            let (lo, hi) = match &f.interval {
                Some(j) => ctx.pair(j, "functional interval")?,
                None => return Err(ctx.err(raw.span(), "an integral functional needs `interval`")),
            };
            Ok(LinearFunctional::weighted_integral(weight, lo, hi))
        }
        "multipoint" => {
            stray("weight", f.weight.is_some())?;
            stray("interval", f.interval.is_some())?;
            let (Some(points), Some(weights)) = (&f.points, &f.weights) else {
                return Err(ctx.err(raw.span(), "a multipoint functional needs `points` and `weights`"));
            };
            if points.get_ref().len() != weights.get_ref().len() {
                return Err(ctx.err(
                    weights.span(),
                    format!(
                        "{} weights for {} points",
                        weights.get_ref().len(),
                        points.get_ref().len()
                    ),
                ));
            }
            LinearFunctional::multipoint(points.get_ref().clone(), weights.get_ref().clone())
                .map_err(|e| ctx.err(points.span(), e.to_string()))
        }
        other => Err(ctx.err(
            f.kind.span(),
            format!("functional kind must be \"integral\" or \"multipoint\", got \"{other}\""),
        )),
    }
}
