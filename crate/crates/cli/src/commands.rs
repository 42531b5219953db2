use std::path::{Path, PathBuf};

use jostlab::jost::verify_jump;
use jostlab::oracle::GridSpec;
use jostlab::propagator::{decay_scan, evolve, log_log_fit, EvolutionRequest, Method, OutputGrid};
use jostlab::resolvent::{born_sum_capped, ResolventKernel, Sign, MAX_BORN_TERMS};
use jostlab::scattering::{resonance_check, scattering_coefficients, zero_energy_record};
use jostlab::spectrum::bound_state_search;
use jostlab::transfer::ZERO_ENERGY_THRESHOLD;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::grid::{parse_grid, parse_list};
use crate::output::{emit, json, Cell, Csv};
use crate::{Args, MethodArg, SignArg};

const DEFAULT_RESONANCE_TOL: f64 = 1e-9;
const DEFAULT_BORN_TOL: f64 = 1e-12;

fn tolerance(args: &Args, default: f64) -> CliResult<f64> {
    match args.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(CliError::Config(format!("--tol must be positive, got {t}"))),
        Some(t) => Ok(t),
        None => Ok(default),
    }
}

fn grid_or(spec: &Option<String>, default: &str, allow_log: bool) -> CliResult<Vec<f64>> {
    parse_grid(spec.as_deref().unwrap_or(default), allow_log)
}

fn ys(args: &Args) -> CliResult<Vec<f64>> {
    parse_list(args.y.as_deref().unwrap_or("0"))
}

fn grid_spec(args: &Args, h: f64, half_width: f64) -> CliResult<GridSpec> {
    GridSpec::new(args.grid_l.unwrap_or(half_width), args.grid_h.unwrap_or(h)).map_err(|e| CliError::Config(e.to_string()))
}

fn method(args: &Args, default: Method) -> Method {
    match args.method {
        Some(MethodArg::Stone) => Method::Stone,
        Some(MethodArg::Oracle) => Method::Oracle,
        None => default,
    }
}

/// `a:b:n` as uniform output nodes.
fn output_grid(spec: &Option<String>) -> CliResult<Option<OutputGrid>> {
    let Some(text) = spec else { return Ok(None) };
    let xs = parse_grid(text, false)?;
    let step = if xs.len() > 1 { (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64 } else { 1.0 };
    Ok(Some(OutputGrid { start: xs[0], step, count: xs.len() }))
}

pub fn scatter(cfg: &Config, args: &Args) -> CliResult<()> {
    let lambdas = grid_or(&args.lambda_grid, "0.1:10:100", false)?;
    let tol = tolerance(args, DEFAULT_RESONANCE_TOL)?;
    let records = lambdas
        .par_iter()
        .map(|&l| if l.abs() < ZERO_ENERGY_THRESHOLD { zero_energy_record(&cfg.seq, tol) } else { scattering_coefficients(&cfg.seq, l) })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&["lambda", "re_W", "im_W", "re_b", "im_b", "re_a_minus", "im_a_minus", "unitarity_residual"]);
    for (l, r) in lambdas.iter().zip(&records) {
        csv.row(&[
            Cell::Num(*l),
            Cell::Num(r.wronskian.re),
            Cell::Num(r.wronskian.im),
            Cell::Num(r.b.re),
            Cell::Num(r.b.im),
            Cell::Num(r.a_minus.re),
            Cell::Num(r.a_minus.im),
            Cell::Num(r.unitarity_residual),
        ]);
    }
    emit(args.out.as_deref(), &csv.into_string())
}

#[derive(Serialize)]
struct SpectrumEntry {
    kappa: f64,
    energy: f64,
    norm_const: f64,
}

pub fn spectrum(cfg: &Config, args: &Args) -> CliResult<()> {
    let search = bound_state_search(&cfg.seq)?;
    for w in &search.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    let entries: Vec<SpectrumEntry> =
        search.states.iter().map(|s| SpectrumEntry { kappa: s.kappa, energy: s.energy, norm_const: s.norm_const }).collect();
    emit(args.out.as_deref(), &json(&entries))
}

const KERNEL_HEADER: [&str; 7] = ["lambda", "x", "y", "re", "im", "method", "residual"];

fn points(args: &Args) -> CliResult<(Vec<f64>, Vec<(f64, f64)>)> {
    let lambdas = grid_or(&args.lambda_grid, "1:1:1", false)?;
    let xs = grid_or(&args.x_grid, "-5:5:11", false)?;
    let ys = ys(args)?;
    let pairs = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    Ok((lambdas, pairs))
}

fn sign(args: &Args) -> Sign {
    match args.sign {
        SignArg::Plus => Sign::Plus,
        SignArg::Minus => Sign::Minus,
    }
}

/// Kernel evaluator at one `λ`, with the larger jump-condition residual of its two Jost solutions.
fn kernel_at(cfg: &Config, lambda: f64, sign: Sign) -> CliResult<(ResolventKernel, f64)> {
    let k = ResolventKernel::new(&cfg.seq, lambda, sign)?;
    let residual = verify_jump(&cfg.seq, k.plus()).max(verify_jump(&cfg.seq, k.minus()));
    Ok((k, residual))
}

pub fn kernel(cfg: &Config, args: &Args) -> CliResult<()> {
    let (lambdas, pairs) = points(args)?;
    let sign = sign(args);
    let kernels = lambdas.par_iter().map(|&l| kernel_at(cfg, l, sign)).collect::<CliResult<Vec<_>>>()?;
    let mut csv = Csv::new(&KERNEL_HEADER);
    for (l, (k, residual)) in lambdas.iter().zip(&kernels) {
        for &(x, y) in &pairs {
            let g = k.eval(x, y);
            csv.row(&[Cell::Num(*l), Cell::Num(x), Cell::Num(y), Cell::Num(g.re), Cell::Num(g.im), Cell::Text("jost"), Cell::Num(*residual)]);
        }
    }
    emit(args.out.as_deref(), &csv.into_string())
}

pub fn born_check(cfg: &Config, args: &Args) -> CliResult<()> {
    let (lambdas, pairs) = points(args)?;
    let tol = tolerance(args, DEFAULT_BORN_TOL)?;
    let terms = args.terms.unwrap_or(MAX_BORN_TERMS);
    if terms == 0 {
        return Err(CliError::Config("--terms must be at least 1".into()));
    }
    let jobs: Vec<(f64, f64, f64)> = lambdas.iter().flat_map(|&l| pairs.iter().map(move |&(x, y)| (l, x, y))).collect();
    let kernels = lambdas.par_iter().map(|&l| kernel_at(cfg, l, Sign::Plus)).collect::<CliResult<Vec<_>>>()?;
    let born = jobs
        .par_iter()
        .map(|&(l, x, y)| born_sum_capped(&cfg.seq, l, x, y, tol, terms))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&KERNEL_HEADER);
    for ((&(l, x, y), b), (k, residual)) in jobs.iter().zip(&born).zip(kernels.iter().flat_map(|k| std::iter::repeat(k).take(pairs.len()))) {
        let g = k.eval(x, y);
        let rel = (b.value - g).norm() / g.norm();
        csv.row(&[Cell::Num(l), Cell::Num(x), Cell::Num(y), Cell::Num(g.re), Cell::Num(g.im), Cell::Text("jost"), Cell::Num(*residual)]);
        csv.row(&[Cell::Num(l), Cell::Num(x), Cell::Num(y), Cell::Num(b.value.re), Cell::Num(b.value.im), Cell::Text("born"), Cell::Num(rel)]);
    }
    emit(args.out.as_deref(), &csv.into_string())
}

fn summary_path(args: &Args) -> Option<PathBuf> {
    args.summary.clone().or_else(|| {
        args.out.as_ref().map(|p| {
            let mut name = p.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".summary.json");
            p.with_file_name(name)
        })
    })
}

/// The summary goes next to the CSV, or to standard error when the CSV goes to standard output.
fn emit_summary(args: &Args, text: &str) -> CliResult<()> {
    match summary_path(args) {
        Some(p) => emit(Some(Path::new(&p)), text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn request(cfg: &Config, args: &Args, default_method: Method, h: f64, half_width: f64) -> CliResult<EvolutionRequest> {
    let mut req = EvolutionRequest::new(cfg.seq.clone(), cfg.initial.clone(), 1.0, method(args, default_method), grid_spec(args, h, half_width)?);
    req.quad = cfg.quad;
    req.output = output_grid(&args.x_grid)?;
    req.project = !args.no_project;
    Ok(req)
}

#[derive(Serialize)]
struct EvolveSummary {
    exponent: Option<f64>,
    constant: Option<f64>,
    residual: Option<f64>,
    method: Method,
    times: Vec<f64>,
    sup_norms: Vec<f64>,
    warnings: Vec<String>,
}

pub fn evolve_cmd(cfg: &Config, args: &Args) -> CliResult<()> {
    let times = grid_or(&args.t_grid, "1:1:1", true)?;
    let base = request(cfg, args, Method::Stone, 1.0 / 64.0, 40.0)?;
    let mut csv = Csv::new(&["t", "x", "re_u", "im_u", "abs_u"]);
    let mut sup_norms = Vec::with_capacity(times.len());
    let mut warnings = Vec::new();
    for &t in &times {
        let u = evolve(&EvolutionRequest { t, ..base.clone() })?;
        for (x, v) in u.xs.iter().zip(&u.values) {
            csv.row(&[Cell::Num(t), Cell::Num(*x), Cell::Num(v.re), Cell::Num(v.im), Cell::Num(v.norm())]);
        }
        sup_norms.push(u.sup_norm());
        warnings.extend(u.warnings);
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let fittable = times.len() >= 2 && times.iter().all(|&t| t > 0.0) && sup_norms.iter().all(|&s| s > 0.0);
    let fit = fittable.then(|| log_log_fit(&times, &sup_norms));
    let summary = EvolveSummary {
        exponent: fit.map(|f| f.0),
        constant: fit.map(|f| f.1),
        residual: fit.map(|f| f.2),
        method: base.method,
        times,
        sup_norms,
        warnings,
    };
    emit(args.out.as_deref(), &csv.into_string())?;
    emit_summary(args, &json(&summary))
}

#[derive(Serialize)]
struct DecaySummary<'a> {
    method: Method,
    projected: bool,
    #[serde(flatten)]
    scan: &'a jostlab::propagator::DecayScanResult,
}

pub fn decay_scan_cmd(cfg: &Config, args: &Args) -> CliResult<()> {
    let times = grid_or(&args.t_grid, "1:50:24:log", true)?;
    let req = request(cfg, args, Method::Oracle, 1.0 / 8.0, 640.0)?;
    let scan = decay_scan(&req, &times)?;
    for w in &scan.warnings {
        eprintln!("warning: {w}");
    }
    let mut csv = Csv::new(&["t", "x", "re_u", "im_u", "abs_u"]);
    for ((t, x), v) in scan.times.iter().zip(&scan.peak_positions).zip(&scan.peak_values) {
        csv.row(&[Cell::Num(*t), Cell::Num(*x), Cell::Num(v.re), Cell::Num(v.im), Cell::Num(v.norm())]);
    }
    emit(args.out.as_deref(), &csv.into_string())?;
    emit_summary(args, &json(&DecaySummary { method: req.method, projected: req.project, scan: &scan }))
}

#[derive(Serialize)]
struct ResonanceReport {
    #[serde(rename = "W0")]
    w0: [f64; 2],
    resonant: bool,
}

pub fn resonance(cfg: &Config, args: &Args) -> CliResult<()> {
    let tol = tolerance(args, DEFAULT_RESONANCE_TOL)?;
    let (w0, resonant): (Complex64, bool) = resonance_check(&cfg.seq, tol)?;
    emit(args.out.as_deref(), &json(&ResonanceReport { w0: [w0.re, w0.im], resonant }))
}
