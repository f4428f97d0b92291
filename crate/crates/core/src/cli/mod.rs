//! Command-line front end: `verify`, `register` and `quadrature`.

mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::amrdriver::{level_stats_csv, run_amr, warp_image, AmrConfig, AmrResult};
use crate::error::{AmrError, SolverError, VerifyError};
use crate::estimator::{compute_indicators, marking_csv, EstimatorOptions};
use crate::fespace::{build_space, FeFunction, LKind, MaterialParams};
use crate::geometry::Rect;
use crate::image::{brain_phantom, build_field, load_raster, quadrature_study, ImageField, ImagePair, RasterImage};
use crate::mesh::{write_vtk, QuadForest};
use crate::regsolver::{assemble_for, solve_stationary, IterationLog, SolverConfig, StopMode};
use crate::verify::{
    check_bands, convergence_csv, run_convergence_with, ConvergenceSetup, ManufacturedCase, RefinementMode,
};

pub use config::{DefaultValue, KeySpec, Settings, QUADRATURE_KEYS, REGISTER_KEYS, VERIFY_KEYS};

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const ACCEPTANCE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DIVERGENCE: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => exit::USAGE,
            CliError::Divergence(_) => exit::DIVERGENCE,
            CliError::Run(_) => exit::ACCEPTANCE,
        }
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "amreg", version, about = "Adaptive finite-element deformable image registration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set solver.dt=1e-6`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// Print the known keys with their defaults and exit.
    #[arg(long)]
    pub list_keys: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convergence study against a manufactured solution.
    Verify {
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(short = 'k', long = "degree")]
        degree: Option<usize>,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        theta_refine: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Register a template image onto a reference image.
    Register {
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Solve once on a uniform mesh instead of running the adaptive loop.
        #[arg(long)]
        fixed: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Image-quadrature error study.
    Quadrature {
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        sigmas: Option<String>,
        #[arg(long)]
        ppe: Option<String>,
        #[arg(long)]
        orders: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

/// Parse arguments, run, report, and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Verify { case, mode, degree, levels, theta_refine, common } => {
            let mut flags = Vec::new();
            push(&mut flags, "verify.case", case.map(quote));
            push(&mut flags, "verify.mode", mode.map(quote));
            push(&mut flags, "verify.degree", degree);
            push(&mut flags, "verify.levels", levels);
            push(&mut flags, "verify.theta_refine", theta_refine);
            let Some(s) = resolve(VERIFY_KEYS, &common, &flags)? else { return Ok(exit::SUCCESS) };
            cmd_verify(&s, &common.out)
        }
        Command::Register { reference, target, fixed, common } => {
            let mut flags = Vec::new();
            push(&mut flags, "image.reference", reference.map(|p| quote(p.display().to_string())));
            push(&mut flags, "image.target", target.map(|p| quote(p.display().to_string())));
            if fixed {
                flags.push("amr.enabled=false".into());
            }
            let Some(s) = resolve(REGISTER_KEYS, &common, &flags)? else { return Ok(exit::SUCCESS) };
            cmd_register(&s, &common.out)
        }
        Command::Quadrature { reference, target, sigmas, ppe, orders, common } => {
            let mut flags = Vec::new();
            push(&mut flags, "image.reference", reference.map(|p| quote(p.display().to_string())));
            push(&mut flags, "image.target", target.map(|p| quote(p.display().to_string())));
            push(&mut flags, "quadrature.sigmas", sigmas.map(quote));
            push(&mut flags, "quadrature.ppe", ppe.map(quote));
            push(&mut flags, "quadrature.orders", orders.map(quote));
            let Some(s) = resolve(QUADRATURE_KEYS, &common, &flags)? else { return Ok(exit::SUCCESS) };
            cmd_quadrature(&s, &common.out)
        }
    }
}

fn quote(s: String) -> String {
    format!("{s:?}")
}

fn push<T: std::fmt::Display>(out: &mut Vec<String>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        out.push(format!("{key}={v}"));
    }
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn resolve(keys: &[KeySpec], common: &Common, flags: &[String]) -> Result<Option<Settings>, CliError> {
    if common.list_keys {
        for k in keys {
            let d = match k.default {
                DefaultValue::Float(v) => v.to_string(),
                DefaultValue::Int(v) => v.to_string(),
                DefaultValue::Bool(v) => v.to_string(),
                DefaultValue::Str(v) => format!("{v:?}"),
            };
            println!("{:<28} {:<12} {}", k.key, d, k.help);
        }
        return Ok(None);
    }
    let mut s = Settings::defaults(keys);
    if let Some(p) = &common.config {
        s.merge_file(p)?;
    }
    for o in common.overrides.iter().chain(flags) {
        s.set(o)?;
    }
    Ok(Some(s))
}

fn prepare_out(out: &Path, settings: &Settings, command: &str) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io(out))?;
    let p = out.join("manifest.toml");
    fs::write(&p, settings.manifest(command)).map_err(io(&p))
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(&path, text).map_err(io(&path))
}

pub fn cmd_verify(s: &Settings, out: &Path) -> Result<i32, CliError> {
    let mut case = match s.str("verify.case") {
        "smooth" => ManufacturedCase::smooth(),
        "singular" => ManufacturedCase::singular(),
        other => return Err(CliError::Config(format!("unknown case `{other}` (smooth | singular)"))),
    };
    let mode = match s.str("verify.mode") {
        "uniform" => RefinementMode::Uniform,
        "adaptive" => RefinementMode::Adaptive,
        other => return Err(CliError::Config(format!("unknown mode `{other}` (uniform | adaptive)"))),
    };
    let degree = s.usize("verify.degree")?;
    if !matches!(degree, 1 | 2) {
        return Err(CliError::Config(format!("degree must be 1 or 2, got {degree}")));
    }
    let levels = s.usize("verify.levels")?;
    if levels < 2 {
        return Err(CliError::Usage(format!("--levels must be at least 2 to compute rates, got {levels}")));
    }
    let theta = s.f64("verify.theta_refine");
    if !(0.0..=1.0).contains(&theta) {
        return Err(CliError::Config(format!("theta_refine must lie in [0, 1], got {theta}")));
    }
    let amplitude = s.f64("verify.amplitude");
    if amplitude != 0.0 {
        case.amplitude = amplitude;
    }
    let mut setup = ConvergenceSetup::new(mode, degree, levels, theta);
    setup.solver.tol = s.f64("solver.tol");
    setup.solver.max_iter = s.usize("solver.max_iter")?;
    setup.solver.aa_depth = s.usize("solver.aa_depth")?;
    setup.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
    prepare_out(out, s, "verify")?;

    let start = Instant::now();
    let rows = run_convergence_with(&case, &setup).map_err(|e| match e {
        VerifyError::Levels(_) => CliError::Usage(e.to_string()),
        VerifyError::NotConverged { .. } | VerifyError::Solver { source: SolverError::NonFinite { .. }, .. } => {
            CliError::Divergence(e.to_string())
        }
        other => CliError::Run(other.to_string()),
    })?;
    let csv = convergence_csv(&rows);
    write(out.join(format!("convergence_{}_{}_k{}.csv", case.name(), mode.name(), degree)), &csv)?;
    print!("{csv}");
    println!("# {:.2} s", start.elapsed().as_secs_f64());
    let failures = check_bands(case.kind, mode, degree, &rows);
    for f in &failures {
        println!("FAIL {f}");
    }
    Ok(if failures.is_empty() { exit::SUCCESS } else { exit::ACCEPTANCE })
}

struct Inputs {
    template: ImageField,
    reference: ImageField,
    width: usize,
    height: usize,
}

fn load_pair(s: &Settings, sigma: f64) -> Result<Inputs, CliError> {
    let (r_path, t_path) = (s.str("image.reference"), s.str("image.target"));
    let (r, t): (RasterImage, RasterImage) = if !r_path.is_empty() || !t_path.is_empty() {
        if r_path.is_empty() || t_path.is_empty() {
            return Err(CliError::Config("both image.reference and image.target are required".into()));
        }
        let load = |p: &str| load_raster(Path::new(p)).map_err(|e| CliError::Io(e.to_string()));
        (load(r_path)?, load(t_path)?)
    } else {
        let n = s.usize("phantom.size")?;
        if n < 2 {
            return Err(CliError::Config(
                "no images given: set image.reference and image.target, or phantom.size".into(),
            ));
        }
        (brain_phantom(n, 0.0), brain_phantom(n, s.f64("phantom.warp")))
    };
    if (r.width(), r.height()) != (t.width(), t.height()) {
        return Err(CliError::Config(format!(
            "image sizes differ: reference {}x{}, target {}x{}",
            r.width(),
            r.height(),
            t.width(),
            t.height()
        )));
    }
    let domain = Rect::for_raster(r.width(), r.height());
    let field = |img: &RasterImage| build_field(img, domain, sigma).map_err(|e| CliError::Config(e.to_string()));
    Ok(Inputs { template: field(&t)?, reference: field(&r)?, width: r.width(), height: r.height() })
}

fn solver_config(s: &Settings) -> Result<SolverConfig, CliError> {
    let stop_mode = match s.str("solver.stop_mode") {
        "residual" => StopMode::RelativeResidual,
        "velocity" => StopMode::Velocity,
        other => return Err(CliError::Config(format!("unknown stop mode `{other}` (residual | velocity)"))),
    };
    let l_kind = match s.str("solver.proximal") {
        "identity" => LKind::Identity,
        "h1" => LKind::H1,
        other => return Err(CliError::Config(format!("unknown proximal operator `{other}` (identity | h1)"))),
    };
    let c = SolverConfig {
        dt: s.f64("solver.dt"),
        tol: s.f64("solver.tol"),
        max_iter: s.usize("solver.max_iter")?,
        stop_mode,
        aa_depth: s.usize("solver.aa_depth")?,
        l_kind,
        q_img: s.usize("solver.q_img")?,
        cond_limit: s.f64("solver.cond_limit"),
    };
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(c)
}

fn log_path(out: &Path, level: Option<usize>) -> PathBuf {
    match level {
        Some(l) => out.join(format!("iterations_level{l}.csv")),
        None => out.join("iterations.csv"),
    }
}

fn divergence(out: &Path, level: Option<usize>, e: SolverError) -> CliError {
    match e {
        SolverError::NonFinite { iteration, log } => {
            let p = log_path(out, level);
            let _ = fs::write(&p, log.to_csv());
            CliError::Divergence(format!("solver diverged at iteration {iteration}; log written to {}", p.display()))
        }
        other => CliError::Run(other.to_string()),
    }
}

fn uniform_solve(
    forest: &QuadForest,
    degree: usize,
    params: &MaterialParams,
    rm: bool,
    solver: &SolverConfig,
    pair: &ImagePair<'_>,
) -> Result<(FeFunction, IterationLog), SolverError> {
    let space = build_space(forest, degree, params, rm)?;
    let sys = assemble_for(&space, params, solver)?;
    solve_stationary(&sys, pair, solver, FeFunction::zeros(&space), None)
}

pub fn cmd_register(s: &Settings, out: &Path) -> Result<i32, CliError> {
    let start = Instant::now();
    let params = MaterialParams::new(
        s.f64("material.young"),
        s.f64("material.poisson"),
        s.f64("material.kappa"),
        s.f64("material.alpha"),
        s.f64("solver.dt"),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let solver = solver_config(s)?;
    let degree = s.usize("mesh.degree")?;
    let rm = params.kappa == 0.0;
    let mut amr = AmrConfig {
        degree,
        n0_ref: u32::try_from(s.usize("amr.n0_ref")?).map_err(|_| CliError::Config("amr.n0_ref too large".into()))?,
        n_ref: s.usize("amr.n_ref")?,
        theta_refine: s.f64("amr.theta_refine"),
        theta_coarsen: s.f64("amr.theta_coarsen"),
        estimator_order: s.usize("amr.estimator_order")?,
        ..AmrConfig::new(params, solver)
    };
    let tols = s.f64_list("amr.level_tol")?;
    if !tols.is_empty() {
        amr.solvers = tols.iter().map(|&tol| SolverConfig { tol, ..solver }).collect();
    }
    let adaptive = s.bool("amr.enabled");
    let ppe = s.usize("mesh.pixels_per_element")?;
    if ppe == 0 {
        return Err(CliError::Config("mesh.pixels_per_element must be positive".into()));
    }
    let inputs = load_pair(s, s.f64("image.sigma"))?;
    amr.domain = Rect::for_raster(inputs.width, inputs.height);
    if adaptive {
        amr.validate().map_err(|e| CliError::Config(e.to_string()))?;
    } else if !matches!(degree, 1 | 2) {
        return Err(CliError::Config(format!("degree must be 1 or 2, got {degree}")));
    }
    prepare_out(out, s, "register")?;
    let pair = ImagePair::new(&inputs.template, &inputs.reference);
    let vtk = s.bool("output.vtk");

    let (solution, iterations, converged) = if adaptive {
        let res = run_amr(&amr, &pair).map_err(|e| match e {
            AmrError::Solver { level, source } => divergence(out, Some(level), source),
            AmrError::Config(m) => CliError::Config(m),
            other => CliError::Run(other.to_string()),
        })?;
        write_amr_outputs(out, &res, vtk)?;
        for l in res.levels.iter().filter(|l| !l.similarity_ok()) {
            println!(
                "warning: level {} similarity rose from {:.6e} to {:.6e}",
                l.level, l.initial_similarity, l.similarity
            );
        }
        if s.bool("amr.compare_fixed") {
            compare_fixed(out, &res, &amr, &pair)?;
        }
        let total = res.levels.iter().map(|l| l.iterations).sum();
        let converged = res.levels.last().is_some_and(|l| l.converged);
        (res.solution, total, converged)
    } else {
        let cells = (inputs.width.max(inputs.height) as f64 / ppe as f64).max(1.0);
        let refinements = cells.log2().ceil() as u32;
        let forest = QuadForest::new(amr.domain).uniform_refine(refinements);
        let (u, log) =
            uniform_solve(&forest, degree, &params, rm, &solver, &pair).map_err(|e| divergence(out, None, e))?;
        write(log_path(out, None), &log.to_csv())?;
        if vtk {
            let ind = compute_indicators(&u, &pair, &params, &EstimatorOptions::new(amr.estimator_order))
                .map_err(|e| CliError::Run(e.to_string()))?;
            let theta: Vec<f64> = ind.totals().iter().map(|v| v.sqrt()).collect();
            let p = out.join("mesh.vtk");
            write_vtk(&p, &forest, &[("theta", &theta)]).map_err(io(&p))?;
        }
        let (n, ok) = (log.iterations(), log.converged());
        (u, n, ok)
    };

    let warped = warp_image(&inputs.template, &solution, inputs.width, inputs.height, amr.domain)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let p = out.join("warped.png");
    warped.save_png(&p).map_err(|e| CliError::Io(e.to_string()))?;

    let sim = crate::image::similarity(&pair, &solution, solver.q_img);
    let summary =
        format!("{},{:.8e},{},{:.3}", solution.space().n_dofs(), sim, iterations, start.elapsed().as_secs_f64());
    write(out.join("summary.csv"), &format!("dofs,similarity,iterations,seconds\n{summary}\n"))?;
    println!("dofs,similarity,iterations,seconds");
    println!("{summary}");
    if !converged {
        return Err(CliError::Divergence(format!(
            "solver did not reach tol {} within {} iterations",
            solver.tol, solver.max_iter
        )));
    }
    Ok(exit::SUCCESS)
}

fn write_amr_outputs(out: &Path, res: &AmrResult, vtk: bool) -> Result<(), CliError> {
    for (l, log) in res.logs.iter().enumerate() {
        write(log_path(out, Some(l)), &log.to_csv())?;
    }
    write(out.join("levels.csv"), &level_stats_csv(&res.levels))?;
    write(out.join("marking.csv"), &marking_csv(&res.marks))?;
    if vtk {
        for (l, (forest, theta)) in res.meshes.iter().enumerate() {
            let p = out.join(format!("mesh_level{l}.vtk"));
            write_vtk(&p, forest, &[("theta", theta)]).map_err(io(&p))?;
        }
    }
    Ok(())
}

/// Solve on the coarsest uniform mesh with at least the adaptive dof count and flag a worse adaptive similarity.
fn compare_fixed(out: &Path, res: &AmrResult, amr: &AmrConfig, pair: &ImagePair<'_>) -> Result<(), CliError> {
    let last = res.levels.last().expect("at least one level");
    let mut r = 0u32;
    let forest = loop {
        let f = QuadForest::new(amr.domain).uniform_refine(r);
        let space = build_space(&f, amr.degree, &amr.params, amr.rm_mode).map_err(|e| CliError::Run(e.to_string()))?;
        if space.n_dofs() >= last.dofs {
            break f;
        }
        r += 1;
    };
    let solver = amr.solver(res.levels.len() - 1);
    let (u, log) = uniform_solve(&forest, amr.degree, &amr.params, amr.rm_mode, solver, pair)
        .map_err(|e| divergence(out, None, e))?;
    let fixed_sim = log.final_similarity();
    let dofs = u.space().n_dofs();
    let flagged = last.similarity > fixed_sim;
    let mut text = String::from("mesh,dofs,similarity,iterations\n");
    let _ = writeln!(text, "adaptive,{},{:.8e},{}", last.dofs, last.similarity, last.iterations);
    let _ = writeln!(text, "uniform,{},{:.8e},{}", dofs, fixed_sim, log.iterations());
    write(out.join("comparison.csv"), &text)?;
    if flagged {
        println!(
            "flag: adaptive similarity {:.6e} at {} dofs exceeds uniform {:.6e} at {} dofs",
            last.similarity, last.dofs, fixed_sim, dofs
        );
    }
    Ok(())
}

pub fn cmd_quadrature(s: &Settings, out: &Path) -> Result<i32, CliError> {
    let sigmas = s.f64_list("quadrature.sigmas")?;
    let ppe = s.usize_list("quadrature.ppe")?;
    let orders = s.usize_list("quadrature.orders")?;
    let q_truth = s.usize("quadrature.q_truth")?;
    if sigmas.is_empty() || ppe.is_empty() || orders.is_empty() {
        return Err(CliError::Config("sigmas, ppe and orders must be non-empty".into()));
    }
    if let Some(sg) = sigmas.iter().find(|v| !(**v >= 0.0)) {
        return Err(CliError::Config(format!("sigma must be non-negative, got {sg}")));
    }
    if ppe.contains(&0) || orders.contains(&0) {
        return Err(CliError::Config("pixels per element and orders must be positive".into()));
    }
    prepare_out(out, s, "quadrature")?;
    println!("sigma,pixels_per_element,median_error");
    for &sigma in &sigmas {
        let inputs = load_pair(s, sigma)?;
        let study = quadrature_study(&inputs.template, &inputs.reference, &ppe, &orders, q_truth)
            .map_err(|e| CliError::Config(e.to_string()))?;
        write(out.join(format!("quadrature_sigma{sigma}.csv")), &study.to_csv())?;
        for &p in &ppe {
            let errs: Vec<f64> = study.block(p).filter(|r| r.order != q_truth).map(|r| r.e_q).collect();
            println!("{sigma},{p},{:.6e}", median(&errs));
        }
    }
    Ok(exit::SUCCESS)
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
