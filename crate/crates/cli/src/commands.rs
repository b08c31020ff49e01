use std::io::{self, Write};
use std::path::{Path, PathBuf};

use nlgreen::analysis::uniform_grid;
use nlgreen::nonlocal::{build_a_matrix, spectrum_check, NonlocalBase};
use nlgreen::ode::{integrate_fundamental_system, residual};
use nlgreen::periodic::{oracle_G_branch, PeriodicParams};
use nlgreen::twopoint::uniqueness_check;
use nlgreen::{
    sign_region_scan, Branch, Error as CoreError, Kernel, NonlocalGreen, NonlocalOptions, ParameterFamily,
    PeriodicFamily, ScanOptions, SpecFamily,
};
use serde_json::{json, Value};

use crate::output::{float, json_float, json_matrix, write_file, write_grid_csv, write_json};
use crate::specfile::{self, LoadError, ScanFamily, SpecFile};
use crate::{Cli, Command, OUT_ENV};

pub const EXIT_IO: i32 = 1;
pub const EXIT_RESONANT: i32 = 2;
pub const EXIT_SPECTRAL: i32 = 3;
pub const EXIT_SPEC: i32 = 4;
pub const EXIT_TOLERANCE: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;
pub const EXIT_USAGE: i32 = 64;

/// Default `(M, δ)` cases for `verify-oracle`.
pub const ORACLE_CASES: [(f64, f64); 5] = [(1.0, 0.5), (1.0, -0.3), (2.0, 3.0), (-1.0, -0.5), (0.5, -0.3)];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Semantic(String),
    #[error("tolerance not met: {0}")]
    Tolerance(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Load(LoadError::Io { .. }) | CliError::Write { .. } => EXIT_IO,
            CliError::Load(LoadError::Spec(_)) | CliError::Semantic(_) => EXIT_SPEC,
            CliError::Core(e) => match e {
                CoreError::ResonantProblem { .. } => EXIT_RESONANT,
                CoreError::SpectralObstruction { .. } => EXIT_SPECTRAL,
                CoreError::InvalidProblem(_) | CoreError::OutOfDomain { .. } | CoreError::Expression { .. } => {
                    EXIT_SPEC
                }
                CoreError::Integrator { .. } | CoreError::Quadrature { .. } | CoreError::SingularMatrix => {
                    EXIT_NUMERICAL
                }
            },
            CliError::Tolerance(_) => EXIT_TOLERANCE,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Ctx<'a> {
    cli: &'a Cli,
    out: PathBuf,
}

impl Ctx<'_> {
    fn spec(&self) -> Result<SpecFile> {
        let path = self
            .cli
            .spec
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --spec PATH".into()))?;
        let mut file = specfile::load(path)?;
        if let Some(tol) = self.tol()? {
            if self.cli.command != Command::Scan {
                file.options.tol = tol;
            }
        }
        Ok(file)
    }

    fn tol(&self) -> Result<Option<f64>> {
        match self.cli.tol {
            Some(t) if !(t.is_finite() && t >= 0.0) => Err(CliError::Usage(format!("--tol must be non-negative, got {t}"))),
            Some(t) if t == 0.0 && self.cli.command != Command::Scan => {
                Err(CliError::Usage("--tol must be positive".into()))
            }
            other => Ok(other),
        }
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<PathBuf> {
        write_file(&self.out, name, body).map_err(|source| CliError::Write {
            path: self.out.join(name),
            source,
        })
    }

    fn json(&self, name: &str, value: &Value) -> Result<PathBuf> {
        write_json(&self.out, name, value).map_err(|source| CliError::Write {
            path: self.out.join(name),
            source,
        })
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn execute(cli: &Cli) -> Result<()> {
    if cli.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let ctx = Ctx { cli, out: out_dir(cli) };
    match cli.command {
        Command::Check => check(&ctx),
        Command::Build => build(&ctx),
        Command::Eval => eval(&ctx),
        Command::Solve => solve(&ctx),
        Command::Scan => scan(&ctx),
        Command::VerifyOracle => verify_oracle(&ctx),
    }
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Right => "right",
        Branch::Left => "left",
    }
}

fn check(ctx: &Ctx) -> Result<()> {
    let file = ctx.spec()?;
    let spec = &file.spec;
    let opts = file.options;
    let rank = spec.boundary.rank_precheck();
    println!("rank precheck: {}", if rank { "pass" } else { "fail" });

    let fsys = integrate_fundamental_system(&spec.problem, opts.tol)?;
    let u = uniqueness_check(&spec.boundary, &fsys, opts.resonance_tol);
    println!("uniqueness determinant: {} (threshold {})", float(u.det), float(u.threshold));
    if !u.unique {
        return Err(CoreError::ResonantProblem {
            det: u.det,
            threshold: u.threshold,
        }
        .into());
    }

    let base = NonlocalBase::build(&spec.problem, &spec.boundary, &spec.functionals, opts)?;
    let sc = spectrum_check(&build_a_matrix(&spec.deltas, base.c_omega()), opts.spectral_tol);
    println!("det(I - A): {} (threshold {})", float(sc.det), float(sc.threshold));
    if !sc.ok {
        return Err(CoreError::SpectralObstruction {
            det: sc.det,
            threshold: sc.threshold,
        }
        .into());
    }
    println!("status: ok");
    Ok(())
}

fn build_green(file: &SpecFile) -> Result<NonlocalGreen> {
    Ok(NonlocalGreen::build(&file.spec, file.options)?)
}

fn build(ctx: &Ctx) -> Result<()> {
    let file = ctx.spec()?;
    let green = build_green(&file)?;
    let spec = &file.spec;
    let (a, b) = spec.problem.interval();
    let report = json!({
        "order": spec.order(),
        "interval": [a, b],
        "M": json_float(spec.problem.shift()),
        "deltas": spec.deltas.iter().copied().map(json_float).collect::<Vec<_>>(),
        "branch": branch_name(file.options.branch),
        "rank_precheck": spec.boundary.rank_precheck(),
        "uniqueness_determinant": json_float(green.green().uniqueness_determinant()),
        "det_i_minus_a": json_float(green.det_i_minus_a()),
        "c_omega": json_matrix(green.base().c_omega().to_rows()),
        "a_matrix": json_matrix(green.a_matrix().to_rows()),
        "resolvent": json_matrix(green.resolvent().to_rows()),
        "omega_coefficients": (0..spec.order())
            .map(|i| green.omega(i).coeffs.iter().copied().map(json_float).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    });
    let path = ctx.json("build.json", &report)?;
    println!("uniqueness determinant: {}", float(green.green().uniqueness_determinant()));
    println!("det(I - A): {}", float(green.det_i_minus_a()));
    println!("wrote {}", path.display());
    Ok(())
}

fn eval(ctx: &Ctx) -> Result<()> {
    let file = ctx.spec()?;
    let green = build_green(&file)?;
    let (nt, ns) = ctx.cli.grid.map_or(file.eval_grid, |g| (g.0, g.1));
    let (a, b) = green.interval();
    let ts = uniform_grid(a, b, nt);
    let ss = uniform_grid(a, b, ns);
    let branch = file.options.branch;
    let sample = |k: &dyn Kernel| -> Result<Vec<Vec<f64>>> {
        ts.iter()
            .map(|&t| ss.iter().map(|&s| k.eval_branch(t, s, branch)).collect::<nlgreen::Result<Vec<f64>>>())
            .collect::<nlgreen::Result<_>>()
            .map_err(CliError::from)
    };
    let big = sample(&green)?;
    let small = sample(green.green())?;
    let p1 = ctx.write("G.csv", |w| write_grid_csv(w, &ts, &ss, &big))?;
    let p2 = ctx.write("g.csv", |w| write_grid_csv(w, &ts, &ss, &small))?;
    println!("grid: {nt}x{ns}, diagonal branch: {}", branch_name(branch));
    println!("wrote {}", p1.display());
    println!("wrote {}", p2.display());
    Ok(())
}

fn solve(ctx: &Ctx) -> Result<()> {
    let file = ctx.spec()?;
    let forcing = file
        .forcing
        .clone()
        .ok_or_else(|| CliError::Semantic("solve needs a `forcing` expression in the spec file".into()))?;
    let sigma = |t: f64| forcing.eval(t);
    let green = build_green(&file)?;
    let u = green.solve(&sigma, file.solve)?;
    let spec = &file.spec;
    let n = spec.order();
    let interval = spec.problem.interval();
    let ts = uniform_grid(interval.0, interval.1, file.samples);

    let mut rows = Vec::with_capacity(ts.len());
    let mut max_residual: f64 = 0.0;
    for &t in &ts {
        let state = u.state(t)?;
        let r = residual(&spec.problem, &u, t, &sigma)?;
        max_residual = max_residual.max(r.abs());
        rows.push((t, state, r));
    }
    let mut boundary = Vec::with_capacity(n);
    for i in 0..n {
        let b = spec.boundary.apply(i, &u, interval)?;
        let c = spec.functionals.get(i).eval(&|t| u.value(t, 0), &file.options.quadrature)?;
        boundary.push(b - spec.deltas[i] * c);
    }
    let max_boundary = boundary.iter().fold(0.0_f64, |m, r| m.max(r.abs()));

    let path = ctx.write("solution.csv", |w| {
        let mut header = vec!["t".to_string(), "u".to_string()];
        header.extend((1..n).map(|k| format!("u_d{k}")));
        header.push("residual".into());
        writeln!(w, "{}", header.join(","))?;
        for (t, state, r) in &rows {
            let mut line = vec![float(*t)];
            line.extend(state.iter().map(|&v| float(v)));
            line.push(float(*r));
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })?;
    let report = json!({
        "forcing": file.forcing_src,
        "intervals": file.solve.intervals,
        "samples": file.samples,
        "max_ode_residual": json_float(max_residual),
        "boundary_residuals": boundary.iter().copied().map(json_float).collect::<Vec<_>>(),
    });
    let rpath = ctx.json("solve.json", &report)?;
    println!("max |T u - sigma| on samples: {}", float(max_residual));
    println!("max |B_i(u) - delta_i C_i(u)|: {}", float(max_boundary));
    println!("wrote {}", path.display());
    println!("wrote {}", rpath.display());
    Ok(())
}

fn scan(ctx: &Ctx) -> Result<()> {
    let file = ctx.spec()?;
    let cfg = &file.scan;
    let opts = ScanOptions {
        grid: cfg.sign_grid,
        tol: ctx.tol()?.unwrap_or(cfg.tol),
        bisection_tol: cfg.bisection_tol,
        workers: ctx.cli.workers.unwrap_or(1),
    };
    let resolution = ctx.cli.grid.map_or(cfg.resolution, |g| (g.0, g.1));
    let periodic;
    let spec_family;
    let family: &dyn ParameterFamily = match cfg.family {
        ScanFamily::Periodic => {
            if file.periodic_params().is_none() {
                return Err(CliError::Semantic(
                    "family = \"periodic\" needs u' + M u on [0, 1] with periodic boundary and C = integral over [0, 1]".into(),
                ));
            }
            periodic = PeriodicFamily {
                options: file.options,
                ..PeriodicFamily::default()
            };
            &periodic
        }
        ScanFamily::Spec => {
            spec_family = SpecFamily {
                problem: file.spec.problem.clone(),
                boundary: file.spec.boundary.clone(),
                functionals: file.spec.functionals.clone(),
                direction: cfg.direction.clone(),
                options: file.options,
            };
            &spec_family
        }
    };
    let report = sign_region_scan(family, cfg.m_range, cfg.delta_range, resolution, opts)?;

    let p1 = ctx.write("scan.csv", |w| report.write_csv(w))?;
    let p2 = ctx.write("scan_boundaries.csv", |w| report.write_boundaries_csv(w))?;
    let counts = report.counts();
    let labels: Vec<Vec<&str>> = (0..report.m_axis.len())
        .map(|i| report.column(i).iter().map(|c| c.sign.label.as_str()).collect())
        .collect();
    let summary = json!({
        "family": match cfg.family { ScanFamily::Periodic => "periodic", ScanFamily::Spec => "spec" },
        "M": report.m_axis.iter().copied().map(json_float).collect::<Vec<_>>(),
        "delta": report.delta_axis.iter().copied().map(json_float).collect::<Vec<_>>(),
        "sign_grid": opts.grid,
        "tol": json_float(opts.tol),
        "bisection_tol": json_float(opts.bisection_tol),
        "counts": {
            "positive": counts[0],
            "negative": counts[1],
            "mixed": counts[2],
            "resonant": counts[3],
            "spectral-obstruction": counts[4],
        },
        "labels": labels,
        "boundaries": report.boundaries.iter().map(|b| json!({
            "M": json_float(b.m),
            "delta": json_float(b.delta),
            "below": b.below.as_str(),
            "above": b.above.as_str(),
            "bracket": [json_float(b.bracket.0), json_float(b.bracket.1)],
        })).collect::<Vec<_>>(),
    });
    let p3 = ctx.json("scan.json", &summary)?;
    println!(
        "cells: {} positive, {} negative, {} mixed, {} resonant, {} spectral; {} boundary estimates",
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        counts[4],
        report.boundaries.len()
    );
    for p in [p1, p2, p3] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

struct OracleRow {
    params: PeriodicParams,
    max_error: f64,
    max_symmetry: f64,
}

fn compare_with_oracle(params: PeriodicParams, options: NonlocalOptions, grid: (usize, usize)) -> Result<OracleRow> {
    let green = NonlocalGreen::build(&params.spec()?, options)?;
    let mirror = NonlocalGreen::build(&params.mirrored().spec()?, options)?;
    let ts = uniform_grid(0.0, 1.0, grid.0);
    let ss = uniform_grid(0.0, 1.0, grid.1);
    let mut max_error: f64 = 0.0;
    let mut max_symmetry: f64 = 0.0;
    for &t in &ts {
        for &s in &ss {
            let branches: &[Branch] = if t == s { &[Branch::Right, Branch::Left] } else { &[Branch::Right] };
            for &br in branches {
                let numeric = green.eval_branch(t, s, br)?;
                max_error = max_error.max((numeric - oracle_G_branch(t, s, params, br)?).abs());
            }
            if t != s {
                let sym = green.eval(t, s)? + mirror.eval(1.0 - t, 1.0 - s)?;
                max_symmetry = max_symmetry.max(sym.abs());
            }
        }
    }
    Ok(OracleRow {
        params,
        max_error,
        max_symmetry,
    })
}

fn verify_oracle(ctx: &Ctx) -> Result<()> {
    let tol = ctx.tol()?.unwrap_or(1e-6);
    let mut cases: Vec<PeriodicParams> = ORACLE_CASES.iter().map(|&(m, d)| PeriodicParams::new(m, d)).collect();
    let mut options = NonlocalOptions::default();
    if ctx.cli.spec.is_some() {
        let path = ctx.cli.spec.as_deref().unwrap_or(Path::new(""));
        let file = specfile::load(path)?;
        let params = file.periodic_params().ok_or_else(|| {
            CliError::Semantic(format!(
                "{} is not the first-order periodic problem with C = integral over [0, 1]",
                path.display()
            ))
        })?;
        options = file.options;
        if !cases.contains(&params) {
            cases.push(params);
        }
    }
    let grid = ctx.cli.grid.map_or((21, 21), |g| (g.0, g.1));
    let rows = cases
        .iter()
        .map(|&p| compare_with_oracle(p, options, grid))
        .collect::<Result<Vec<_>>>()?;

    let path = ctx.write("verify.csv", |w| {
        writeln!(w, "M,delta,max_error,max_symmetry")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{}",
                float(r.params.m),
                float(r.params.delta),
                float(r.max_error),
                float(r.max_symmetry)
            )?;
        }
        Ok(())
    })?;
    let mut worst: f64 = 0.0;
    for r in &rows {
        println!(
            "M = {:>5}, delta = {:>5}: max |G - oracle| = {:.3e}, max symmetry residual = {:.3e}",
            r.params.m, r.params.delta, r.max_error, r.max_symmetry
        );
        worst = worst.max(r.max_error).max(r.max_symmetry);
    }
    println!("grid {}x{}, tolerance {:.1e}, worst {:.3e}", grid.0, grid.1, tol, worst);
    println!("wrote {}", path.display());
    if worst > tol {
        return Err(CliError::Tolerance(format!("worst error {worst:.3e} exceeds {tol:.1e}")));
    }
    Ok(())
}
