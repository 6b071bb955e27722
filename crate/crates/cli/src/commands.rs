//! `mc`, `exact`, `meanfield`, `phase-scan`, `domainwall` and `analyze`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nhssb_core::analysis::{
    betac_from_scaling, correlations, domain_wall_scan, histogram_v_records, locate_peak, winding_series, CvCurve,
    DwMode, ObservableSeries, Peak,
};
use nhssb_core::exact::{brute_force, exact_observables, BRUTE_FORCE_MAX_L};
use nhssb_core::mc::stats::OBSERVABLES;
use nhssb_core::mc::{dump, run_chain, Estimate, RunResult, Start};
use nhssb_core::meanfield::{default_seeds, select, solve_selfconsistent, trace_boundary};
use nhssb_core::{Boundary, ExactObservables, Manifest, Params};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{resolve, JobConfig, Resolved};
use crate::error::CliError;
use crate::output::{f, header, opt, param_fields, JobManifest, OutputDir};

pub struct Ctx {
    pub out: PathBuf,
    pub dry_run: bool,
}

fn numerical(what: &str, index: usize, p: &Params, e: impl std::fmt::Display) -> CliError {
    CliError::numerical(
        format!("{what} failed at point {index}: {e}"),
        json!({ "command": what, "point": index, "params": p, "error": e.to_string() }),
    )
}

fn print_plan(plan: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
}

/// Writes the manifest, or prints the plan and stops on a dry run.
fn start_job(
    ctx: &Ctx,
    command: &str,
    config: JobConfig,
    points: Vec<Params>,
    plan: serde_json::Value,
) -> Result<Option<OutputDir>, CliError> {
    if ctx.dry_run {
        let mut plan = plan;
        plan["command"] = json!(command);
        plan["points"] = json!(points.len());
        plan["output_dir"] = json!(ctx.out);
        print_plan(plan);
        return Ok(None);
    }
    let out = OutputDir::create(&ctx.out)?;
    out.write_manifest(&JobManifest::new(command, config, points))?;
    Ok(Some(out))
}

// ---------------------------------------------------------------- mc

pub const DEFAULT_HIST_BINS: usize = 41;

struct McSettings {
    seed: u64,
    n_therm: usize,
    n_sweeps: usize,
    n_chains: usize,
    measure_every: usize,
    start: Start,
}

fn mc_settings(cfg: &JobConfig) -> McSettings {
    McSettings {
        seed: cfg.seed.unwrap_or(0),
        n_therm: cfg.n_therm.unwrap_or(10_000),
        n_sweeps: cfg.n_sweeps.unwrap_or(100_000),
        n_chains: cfg.n_chains.unwrap_or(8),
        measure_every: cfg.measure_every.unwrap_or(10),
        start: cfg.start.unwrap_or_default(),
    }
}

/// Point `i` is seeded with `seed + i`.
fn mc_manifests(r: &Resolved) -> Result<Vec<Manifest>, CliError> {
    let s = mc_settings(&r.config);
    r.points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let fast = r.config.fast_path.unwrap_or(p.gauge_reducible());
            let m = Manifest::new(p.clone(), s.seed.wrapping_add(i as u64))
                .with_schedule(s.n_therm, s.n_sweeps, s.n_chains, s.measure_every)
                .with_fast_path(fast)
                .with_start(s.start);
            m.validate().map_err(|e| CliError::Config(format!("point {i}: {e}")))?;
            Ok(m)
        })
        .collect()
}

fn mc_effective(cfg: JobConfig) -> JobConfig {
    let s = mc_settings(&cfg);
    JobConfig {
        seed: Some(s.seed),
        n_therm: Some(s.n_therm),
        n_sweeps: Some(s.n_sweeps),
        n_chains: Some(s.n_chains),
        measure_every: Some(s.measure_every),
        start: Some(s.start),
        ..cfg
    }
}

/// Rough operation count: one unit per fast-path flip, `L³` per
/// eigensolve on the slow path.
fn mc_cost(ms: &[Manifest]) -> f64 {
    ms.iter()
        .map(|m| {
            let l = m.params.l as f64;
            let flips = l * (m.n_therm + m.n_sweeps) as f64 * m.n_chains as f64;
            let meas = m.n_measurements() as f64 * m.n_chains as f64;
            if m.fast_path {
                flips + meas * l
            } else {
                (flips + meas) * l * l * l
            }
        })
        .sum()
}

fn mc_plan(ms: &[Manifest]) -> serde_json::Value {
    let first = ms.first();
    json!({
        "chains_per_point": first.map(|m| m.n_chains),
        "therm_sweeps": first.map(|m| m.n_therm),
        "sweeps": first.map(|m| m.n_sweeps),
        "measure_every": first.map(|m| m.measure_every),
        "fast_path_points": ms.iter().filter(|m| m.fast_path).count(),
        "total_chains": ms.iter().map(|m| m.n_chains).sum::<usize>(),
        "total_sweeps": ms.iter().map(|m| (m.n_therm + m.n_sweeps) * m.n_chains).sum::<usize>(),
        "estimated_ops": mc_cost(ms),
    })
}

fn run_points(ms: &[Manifest]) -> Result<Vec<RunResult<f64>>, CliError> {
    ms.par_iter()
        .enumerate()
        .map(|(i, m)| run_chain(m).map_err(|e| numerical("mc", i, &m.params, e)))
        .collect()
}

/// Missing observables are reported as NaN.
fn est(s: &nhssb_core::mc::PointStats, name: &str) -> Estimate {
    s.get(name).copied().unwrap_or(Estimate { mean: f64::NAN, err: f64::NAN, tau_int: f64::NAN, n_bins: 0, bin_size: 0 })
}

pub fn summary_columns() -> Vec<String> {
    let mut cols = Vec::new();
    for name in OBSERVABLES.iter().copied().chain(["specific_heat"]) {
        cols.push(name.to_string());
        cols.push(format!("{name}_err"));
        cols.push(format!("{name}_tau"));
    }
    cols.extend(["acceptance", "n_samples", "n_warnings"].map(String::from));
    cols
}

#[derive(Serialize)]
struct Sidecar<'a> {
    params: &'a Params,
    seed: u64,
    fast_path: bool,
    acceptance: f64,
    aborted_proposals: u64,
    failed_measurements: u64,
    drift_events: u64,
    n_samples: usize,
    tau_int: BTreeMap<&'a str, f64>,
    chains: Vec<serde_json::Value>,
    warnings: &'a [String],
}

fn write_mc_point(out: &OutputDir, i: usize, run: &RunResult<f64>, bins: usize, raw: bool) -> Result<(), CliError> {
    let m = &run.manifest;
    let p = &m.params;
    let stem = format!("points/p{i:04}");
    let mut w = out.csv(&format!("{stem}.csv"), &["observable", "mean", "err", "tau_int", "n_bins", "bin_size"])?;
    for (name, e) in &run.stats.observables {
        w.row(&[name.clone(), f(e.mean), f(e.err), f(e.tau_int), e.n_bins.to_string(), e.bin_size.to_string()])?;
    }
    w.finish()?;
    let sidecar = Sidecar {
        params: p,
        seed: m.seed,
        fast_path: m.fast_path,
        acceptance: run.stats.acceptance,
        aborted_proposals: run.stats.aborted_proposals,
        failed_measurements: run.stats.failed_measurements,
        drift_events: run.stats.drift_events,
        n_samples: run.stats.n_samples,
        tau_int: run.stats.observables.iter().map(|(k, e)| (k.as_str(), e.tau_int)).collect(),
        chains: run
            .chains
            .iter()
            .map(|c| {
                json!({
                    "chain": c.chain,
                    "acceptance": c.acceptance,
                    "drift_events": c.drift_events,
                    "max_drift": c.max_drift,
                    "n_samples": c.records.len(),
                })
            })
            .collect(),
        warnings: &run.stats.warnings,
    };
    out.write_json(&format!("{stem}.json"), &sidecar)?;

    let chains: Vec<&[nhssb_core::Record]> = run.chains.iter().map(|c| c.records.as_slice()).collect();
    let corr = correlations(&chains, p);
    let mut w = out.csv(&format!("{stem}_corr.csv"), &["r", "c_x", "c_x_err", "c_v_full", "c_v_full_err", "c_v"])?;
    for (k, &r) in corr.r.iter().enumerate() {
        w.row(&[
            r.to_string(),
            f(corr.c_x[k].mean),
            f(corr.c_x[k].err),
            f(corr.c_v_full[k].mean),
            f(corr.c_v_full[k].err),
            f(corr.c_v[k]),
        ])?;
    }
    w.finish()?;

    let recs: Vec<&nhssb_core::Record> = run.records().collect();
    let h = histogram_v_records(&recs, bins);
    write_histogram(out, &format!("{stem}_hist.csv"), &h)?;

    if raw {
        out.subdir("raw")?;
        for c in &run.chains {
            let rel = format!("raw/p{i:04}_c{:02}.bin", c.chain);
            dump::write_raw(out.raw_file(&rel)?, p.l, p.beta, &c.records)
                .map_err(|e| crate::error::io_error(&out.path(&rel), e))?;
        }
    }
    Ok(())
}

pub fn write_histogram(out: &OutputDir, rel: &str, h: &nhssb_core::analysis::Histogram2D) -> Result<(), CliError> {
    let mut w = out.csv(rel, &["i_re", "i_im", "re", "im", "density"])?;
    let n = h.bins as f64;
    for i in 0..h.bins {
        for j in 0..h.bins {
            let re = -h.re_half_width + (2.0 * i as f64 + 1.0) * h.re_half_width / n;
            let im = -h.im_half_width + (2.0 * j as f64 + 1.0) * h.im_half_width / n;
            w.row(&[i.to_string(), j.to_string(), f(re), f(im), f(h.at(i, j))])?;
        }
    }
    w.finish()
}

pub fn mc(cfg: JobConfig, ctx: &Ctx) -> Result<(), CliError> {
    let cfg = mc_effective(cfg);
    let r = resolve(cfg)?;
    let ms = mc_manifests(&r)?;
    let bins = r.config.hist_bins.unwrap_or(DEFAULT_HIST_BINS);
    let raw = r.config.raw_dump.unwrap_or(false);
    let Some(out) = start_job(ctx, "mc", r.config.clone(), r.points.clone(), mc_plan(&ms))? else {
        return Ok(());
    };
    out.subdir("points")?;
    let runs = run_points(&ms)?;
    let cols = summary_columns();
    let rest: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut w = out.csv("summary.csv", &header(&["index"], &rest))?;
    for (i, run) in runs.iter().enumerate() {
        write_mc_point(&out, i, run, bins, raw)?;
        let mut row = vec![i.to_string()];
        row.extend(param_fields(&run.manifest.params));
        for name in OBSERVABLES.iter().copied().chain(["specific_heat"]) {
            let e = est(&run.stats, name);
            row.extend([f(e.mean), f(e.err), f(e.tau_int)]);
        }
        row.extend([f(run.stats.acceptance), run.stats.n_samples.to_string(), run.stats.warnings.len().to_string()]);
        w.row(&row)?;
        for warn in &run.stats.warnings {
            eprintln!("warning: point {i}: {warn}");
        }
    }
    w.finish()
}

// ---------------------------------------------------------------- exact

pub const EXACT_COLUMNS: &[&str] =
    &["method", "log_z", "abs_m", "m2", "m_sector", "energy", "specific_heat", "w_sector", "w"];

fn exact_point(p: &Params) -> Result<(&'static str, ExactObservables), nhssb_core::Error> {
    if p.gauge_reducible() && p.bc == Boundary::Pbc {
        Ok(("class_sum", exact_observables(p)?))
    } else {
        Ok(("enumeration", brute_force(p)?))
    }
}

fn exact_supported(p: &Params) -> bool {
    (p.gauge_reducible() && p.bc == Boundary::Pbc) || p.l <= BRUTE_FORCE_MAX_L
}

pub fn exact(cfg: JobConfig, ctx: &Ctx) -> Result<(), CliError> {
    let r = resolve(cfg)?;
    if let Some(p) = r.points.iter().find(|p| !exact_supported(p)) {
        return Err(CliError::Config(format!(
            "exact needs t' = 0, real |U| < t and PBC, or L ≤ {BRUTE_FORCE_MAX_L} (got L = {}, t' = {}, bc = {})",
            p.l, p.t_prime, p.bc
        )));
    }
    let enumerated = r.points.iter().filter(|p| !(p.gauge_reducible() && p.bc == Boundary::Pbc)).count();
    let plan = json!({ "class_sum_points": r.points.len() - enumerated, "enumeration_points": enumerated });
    let Some(out) = start_job(ctx, "exact", r.config.clone(), r.points.clone(), plan)? else {
        return Ok(());
    };
    let results: Vec<(&str, ExactObservables)> = r
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| exact_point(p).map_err(|e| numerical("exact", i, p, e)))
        .collect::<Result<_, _>>()?;
    let mut w = out.csv("exact.csv", &header(&["index"], EXACT_COLUMNS))?;
    for (i, (p, (method, o))) in r.points.iter().zip(&results).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(param_fields(p));
        row.push(method.to_string());
        row.extend(
            [o.log_z, o.mean_abs_m, o.mean_m2, o.mean_m_sector, o.mean_energy, o.specific_heat, o.mean_w_sector, o.mean_w]
                .map(f),
        );
        w.row(&row)?;
    }
    w.finish()
}

// ---------------------------------------------------------------- mean field

pub const DEFAULT_MF_L: usize = 256;

fn with_mf_l(mut r: Resolved) -> Resolved {
    if let Some(l) = r.config.mf_l {
        r.base.l = l;
        for p in &mut r.points {
            p.l = l;
        }
    }
    r
}

pub fn meanfield(cfg: JobConfig, ctx: &Ctx) -> Result<(), CliError> {
    let r = with_mf_l(resolve(cfg)?);
    let plan = json!({ "seeds_per_point": default_seeds::<f64>().len() });
    let Some(out) = start_job(ctx, "meanfield", r.config.clone(), r.points.clone(), plan)? else {
        return Ok(());
    };
    let sols: Vec<_> = r
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| solve_selfconsistent(p, &default_seeds()).map_err(|e| numerical("meanfield", i, p, e)))
        .collect::<Result<_, _>>()?;
    let mut w = out.csv("meanfield.csv", &header(&["index"], &["m_selected", "free_energy", "n_converged"]))?;
    let mut s = out.csv("solutions.csv", &["index", "m", "free_energy", "converged", "iterations", "residual"])?;
    for (i, (p, list)) in r.points.iter().zip(&sols).enumerate() {
        let sel = select(list);
        let mut row = vec![i.to_string()];
        row.extend(param_fields(p));
        row.extend([
            opt(sel.map(|x| x.m)),
            opt(sel.map(|x| x.free_energy)),
            list.iter().filter(|x| x.converged).count().to_string(),
        ]);
        w.row(&row)?;
        for x in list {
            s.row(&[
                i.to_string(),
                f(x.m),
                f(x.free_energy),
                x.converged.to_string(),
                x.iterations.to_string(),
                f(x.residual),
            ])?;
        }
    }
    w.finish()?;
    s.finish()
}

// ---------------------------------------------------------------- phase scan

fn axis_values(r: &Resolved, name: &str) -> Option<Vec<f64>> {
    r.axes.iter().find(|a| a.name == name).map(|a| a.values.clone())
}

pub fn phase_scan(cfg: JobConfig, ctx: &Ctx) -> Result<(), CliError> {
    let cfg = mc_effective(cfg);
    let r = resolve(cfg)?;
    let us = axis_values(&r, "U").ok_or_else(|| CliError::Config("phase-scan needs a U grid axis".into()))?;
    let mut temps = match (axis_values(&r, "T"), axis_values(&r, "beta")) {
        (Some(t), _) => t,
        (None, Some(b)) => b.iter().map(|b| 1.0 / b).collect(),
        _ => return Err(CliError::Config("phase-scan needs a T or beta grid axis".into())),
    };
    temps.sort_by(f64::total_cmp);
    if r.axes.len() != 2 {
        return Err(CliError::Config("phase-scan takes exactly two grid axes (U and T or beta)".into()));
    }
    let exact_ok = r.points.iter().all(exact_supported);
    let mf_l = r.config.mf_l.unwrap_or(DEFAULT_MF_L);
    let ms = if exact_ok { Vec::new() } else { mc_manifests(&r)? };
    let mut plan = if exact_ok { json!({ "order_map": "exact" }) } else { mc_plan(&ms) };
    plan["mean_field_L"] = json!(mf_l);
    plan["mean_field_U_values"] = json!(us.len());
    let Some(out) = start_job(ctx, "phase-scan", r.config.clone(), r.points.clone(), plan)? else {
        return Ok(());
    };
    let rows: Vec<[f64; 6]> = if exact_ok {
        r.points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let (_, o) = exact_point(p).map_err(|e| numerical("phase-scan", i, p, e))?;
                Ok([o.mean_abs_m, 0.0, o.specific_heat, 0.0, o.mean_w_sector, 0.0])
            })
            .collect::<Result<_, CliError>>()?
    } else {
        run_points(&ms)?
            .iter()
            .map(|run| {
                let g = |n: &str| est(&run.stats, n);
                let (a, c, w) = (g("abs_m"), g("specific_heat"), g("w_sector"));
                [a.mean, a.err, c.mean, c.err, w.mean, w.err]
            })
            .collect()
    };
    let source = if exact_ok { "exact" } else { "mc" };
    let cols = ["abs_m", "abs_m_err", "specific_heat", "specific_heat_err", "w_sector", "w_sector_err", "source"];
    let mut w = out.csv("phase.csv", &header(&["index"], &cols))?;
    for (i, (p, v)) in r.points.iter().zip(&rows).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(param_fields(p));
        row.extend(v.iter().map(|x| f(*x)));
        row.push(source.into());
        w.row(&row)?;
    }
    w.finish()?;
    let base = r.base.clone().with_l(mf_l);
    let boundary = trace_boundary(&base, &us, &temps).map_err(|e| numerical("phase-scan", 0, &base, e))?;
    let mut w = out.csv("boundary.csv", &["U", "T_c", "saturated", "mf_L", "J"])?;
    for b in &boundary {
        w.row(&[f(b.u), opt(b.t_c), b.saturated.to_string(), mf_l.to_string(), f(base.j)])?;
    }
    w.finish()
}

// ---------------------------------------------------------------- domain walls

pub const DEFAULT_DW_L: usize = 400;
pub const DEFAULT_DW_LS: &[usize] = &[100, 200, 400, 800, 1600];

fn dw_mode(cfg: &JobConfig) -> Result<DwMode, CliError> {
    let mode = cfg.mode.as_deref().unwrap_or("fixed_L");
    let ls = || cfg.ls.clone().unwrap_or_else(|| DEFAULT_DW_LS.to_vec());
    Ok(match mode {
        "fixed_L" | "fixed_L_vary_r" => {
            let l = cfg.l.unwrap_or(DEFAULT_DW_L);
            DwMode::FixedL { l, r_min: cfg.r_min.unwrap_or(l / 8), r_max: cfg.r_max.unwrap_or(l / 2) }
        }
        "fixed_r" | "fixed_r_vary_L" => DwMode::FixedR { r: cfg.r.unwrap_or(4), ls: ls() },
        "fixed_alpha" | "fixed_alpha_vary_L" => DwMode::FixedAlpha { alpha: cfg.alpha.unwrap_or(0.25), ls: ls() },
        other => return Err(CliError::Config(format!("unknown domain-wall mode `{other}`"))),
    })
}

pub fn domainwall(cfg: JobConfig, ctx: &Ctx) -> Result<(), CliError> {
    if cfg.grid.is_some() {
        return Err(CliError::Config("domainwall takes no grid; use --mode and --ls".into()));
    }
    let mode = dw_mode(&cfg)?;
    let cfg = JobConfig { l: cfg.l.or(Some(DEFAULT_DW_L)), ..cfg };
    let r = resolve(cfg)?;
    let sizes: Vec<usize> = match &mode {
        DwMode::FixedL { l, .. } => vec![*l],
        DwMode::FixedR { ls, .. } | DwMode::FixedAlpha { ls, .. } => ls.clone(),
    };
    if let DwMode::FixedR { r: sep, ls } = &mode {
        if ls.iter().any(|l| sep >= l) {
            return Err(CliError::Config(format!("r = {sep} must be below every L")));
        }
    }
    let plan = json!({ "mode": format!("{mode:?}"), "sizes": sizes });
    let Some(out) = start_job(ctx, "domainwall", r.config.clone(), vec![r.base.clone()], plan)? else {
        return Ok(());
    };
    let scan = domain_wall_scan(&r.base, &mode).map_err(|e| numerical("domainwall", 0, &r.base, e))?;
    let x = if matches!(mode, DwMode::FixedL { .. }) { "r" } else { "L" };
    let mut w = out.csv("domainwall.csv", &[x, "dE"])?;
    for (a, b) in &scan.points {
        w.row(&[f(*a), f(*b)])?;
    }
    w.finish()?;
    out.write_json("domainwall.json", &json!({ "params": r.base, "scan": {
        "mode": scan.mode, "fit": scan.fit, "saturation": scan.saturation, "symmetry_defect": scan.symmetry_defect,
    }}))
}

// ---------------------------------------------------------------- analyze

/// One row of an `mc` `summary.csv` or `exact` `exact.csv`.
#[derive(Clone, Debug)]
pub struct Row {
    pub l: usize,
    pub beta: f64,
    pub values: BTreeMap<String, f64>,
}

impl Row {
    pub fn get(&self, k: &str) -> f64 {
        self.values.get(k).copied().unwrap_or(f64::NAN)
    }

    pub fn err(&self, k: &str) -> f64 {
        self.values.get(&format!("{k}_err")).copied().unwrap_or(0.0)
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, CliError> {
    let bad = |e: &dyn std::fmt::Display| crate::error::io_error(path, e);
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(&e))?;
    let headers = rd.headers().map_err(|e| bad(&e))?.clone();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(&e))?;
        let mut values = BTreeMap::new();
        for (h, v) in headers.iter().zip(rec.iter()) {
            if let Ok(x) = v.parse::<f64>() {
                values.insert(h.to_string(), x);
            }
        }
        let l = values.get("L").copied().ok_or_else(|| bad(&"missing L column"))? as usize;
        let beta = values.get("beta").copied().ok_or_else(|| bad(&"missing beta column"))?;
        rows.push(Row { l, beta, values });
    }
    Ok(rows)
}

/// `summary.csv` (mc) or `exact.csv` in a job directory.
pub fn find_table(dir: &Path) -> Option<PathBuf> {
    ["summary.csv", "exact.csv"].iter().map(|n| dir.join(n)).find(|p| p.exists())
}

#[derive(Serialize)]
struct SizeAnalysis {
    l: usize,
    plateaus: Vec<nhssb_core::analysis::Plateau>,
    transitions_t: Vec<f64>,
    cv_peak: Option<Peak>,
}

pub fn analyze(cfg: JobConfig, ctx: &Ctx) -> Result<(), CliError> {
    let inputs = cfg.input.clone().unwrap_or_default();
    if inputs.is_empty() {
        return Err(CliError::Config("analyze needs at least one --input directory".into()));
    }
    let tables: Vec<PathBuf> = inputs
        .iter()
        .map(|d| find_table(d).ok_or_else(|| CliError::Config(format!("{}: no summary.csv or exact.csv", d.display()))))
        .collect::<Result<_, _>>()?;
    let plan = json!({ "inputs": tables });
    let Some(out) = start_job(ctx, "analyze", cfg, Vec::new(), plan)? else {
        return Ok(());
    };
    let mut by_l: BTreeMap<usize, Vec<Row>> = BTreeMap::new();
    for t in &tables {
        for row in read_rows(t)? {
            by_l.entry(row.l).or_default().push(row);
        }
    }
    let mut sizes = Vec::new();
    let mut curves = Vec::new();
    let mut w = out.csv("winding.csv", &["L", "T", "w_sector", "w_sector_err", "nearest", "residual"])?;
    let mut pl = out.csv("plateaus.csv", &["L", "value", "T_start", "T_end", "max_residual"])?;
    for (l, rows) in &mut by_l {
        rows.sort_by(|a, b| b.beta.total_cmp(&a.beta));
        let t: Vec<f64> = rows.iter().map(|r| 1.0 / r.beta).collect();
        let series = ObservableSeries::new(
            "w_sector",
            "T",
            *l,
            t.clone(),
            rows.iter().map(|r| r.get("w_sector")).collect(),
            rows.iter().map(|r| r.err("w_sector")).collect(),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let a = winding_series(series);
        for k in 0..t.len() {
            w.row(&[
                l.to_string(),
                f(t[k]),
                f(a.series.mean[k]),
                f(a.series.err[k]),
                a.nearest[k].to_string(),
                f(a.residual[k]),
            ])?;
        }
        for p in &a.plateaus {
            pl.row(&[l.to_string(), p.value.to_string(), f(p.axis_start), f(p.axis_end), f(p.max_residual)])?;
        }
        let mut by_beta: Vec<&Row> = rows.iter().collect();
        by_beta.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        let curve = CvCurve {
            l: *l,
            beta: by_beta.iter().map(|r| r.beta).collect(),
            cv: by_beta.iter().map(|r| r.get("specific_heat")).collect(),
        };
        sizes.push(SizeAnalysis {
            l: *l,
            plateaus: a.plateaus.clone(),
            transitions_t: a.transitions.clone(),
            cv_peak: locate_peak(&curve),
        });
        curves.push(curve);
    }
    w.finish()?;
    pl.finish()?;
    let betac = betac_from_scaling(&curves);
    out.write_json("analysis.json", &json!({ "sizes": sizes, "beta_c": betac }))
}
