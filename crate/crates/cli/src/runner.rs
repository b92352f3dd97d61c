//! Executes the (method × K × seed) grid and writes result tables.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use diffamc_core::diffusion::{reverse_ode_simulate, reverse_sde_simulate};
use diffamc_core::metrics::{evaluate, MetricsReport};
use diffamc_core::rng::{role, stream};
use diffamc_core::samplers::{
    ais_run, re_run, smc_run, LevelDiagnostics, SwapDiagnostics, WeightedSamples,
};
use diffamc_core::{GaussianMixture, PointSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{MethodEntry, RunConfig, SamplerKind};

/// One grid cell: a method at one K for one seed.
#[derive(Clone, Debug)]
pub struct Cell {
    pub method: MethodEntry,
    pub k: usize,
    pub seed: u64,
}

/// A row of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub target: String,
    pub sampler: String,
    pub path: String,
    pub transition: String,
    pub k: usize,
    pub seed: u64,
    pub n_samples: usize,
    pub sw2: f64,
    pub mode_weight_abs_err: f64,
    pub weight_hist_tv: f64,
    pub ess_fraction: f64,
    pub n_projections: usize,
    pub log_normalizer: f64,
    pub swap_rate: f64,
    pub mala_acceptance: f64,
    pub n_resampled: usize,
    pub ddpm_violations: usize,
    pub fp_nonconverged: usize,
    pub nonfinite_weights: usize,
    pub status: String,
}

/// A row of `summary.csv`: medians over the successful seeds of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub target: String,
    pub sampler: String,
    pub path: String,
    pub transition: String,
    pub k: usize,
    pub n_ok: usize,
    pub sw2: f64,
    pub mode_weight_abs_err: f64,
    pub weight_hist_tv: f64,
    pub ess_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
struct TimingRow<'a> {
    sampler: &'a str,
    path: &'a str,
    transition: &'a str,
    k: usize,
    seed: u64,
    wall_seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CellDiagnostics {
    pub sampler: String,
    pub path: String,
    pub transition: String,
    pub k: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<LevelDiagnostics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub swaps: Vec<SwapDiagnostics>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub re_mala_acceptance: Vec<f64>,
}

pub struct CellOutcome {
    pub row: ResultRow,
    pub diagnostics: CellDiagnostics,
    pub wall_seconds: f64,
}

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

pub fn cells(cfg: &RunConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for m in &cfg.methods {
        for k in cfg.method_ks(m) {
            for seed in cfg.seeds() {
                out.push(Cell { method: m.clone(), k, seed });
            }
        }
    }
    out
}

fn path_label(m: &MethodEntry) -> &'static str {
    if m.sampler.uses_path() {
        m.path.label()
    } else {
        "none"
    }
}

struct Draw {
    samples: WeightedSamples,
    log_normalizer: f64,
    swap_rate: f64,
    mala_acceptance: f64,
    n_resampled: usize,
    diag: CellDiagnostics,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn draw(cfg: &RunConfig, target: &GaussianMixture, cell: &Cell) -> Result<Draw> {
    let m = &cell.method;
    let mut diag = CellDiagnostics::default();
    let nan = f64::NAN;
    if m.sampler == SamplerKind::Exact {
        let pts = target.sample_exact(cfg.sampler.n_particles, &mut stream(cell.seed, &[role::EXACT]));
        return Ok(Draw {
            samples: WeightedSamples::uniform(pts),
            log_normalizer: nan,
            swap_rate: nan,
            mala_acceptance: nan,
            n_resampled: 0,
            diag,
        });
    }
    let path = cfg.build_path(target, m.path, cell.k)?;
    let spec = m.transition;
    Ok(match m.sampler {
        SamplerKind::Ais | SamplerKind::Smc => {
            let out = if m.sampler == SamplerKind::Ais {
                ais_run(&path, spec, &cfg.sampler, cell.seed)?
            } else {
                smc_run(&path, spec, &cfg.sampler, cell.seed)?
            };
            let acc = mean(out.levels.iter().filter(|l| l.mean_step > 0.0).map(|l| l.mala_acceptance));
            diag.levels = out.levels;
            Draw {
                samples: out.samples,
                log_normalizer: out.log_normalizer,
                swap_rate: nan,
                mala_acceptance: acc,
                n_resampled: out.n_resampled,
                diag,
            }
        }
        SamplerKind::Re => {
            let out = re_run(&path, spec, &cfg.sampler, cell.seed)?;
            let rate = out.swap_rate();
            let acc = mean(out.mala_acceptance.iter().copied());
            diag.swaps = out.swaps;
            diag.re_mala_acceptance = out.mala_acceptance;
            Draw {
                samples: WeightedSamples::uniform(out.samples),
                log_normalizer: nan,
                swap_rate: rate,
                mala_acceptance: acc,
                n_resampled: 0,
                diag,
            }
        }
        SamplerKind::ReverseSde | SamplerKind::ReverseOde => {
            let (sched, grid) = path.schedule().context("reverse-time samplers need the diffusion path")?;
            let mut rng = stream(cell.seed, &[role::PARTICLE]);
            let n = cfg.sampler.n_particles;
            let pts: PointSet = if m.sampler == SamplerKind::ReverseSde {
                reverse_sde_simulate(sched, grid, path.levels(), n, &mut rng)?
            } else {
                reverse_ode_simulate(sched, grid, path.levels(), n, &mut rng)?
            };
            Draw {
                samples: WeightedSamples::uniform(pts),
                log_normalizer: nan,
                swap_rate: nan,
                mala_acceptance: nan,
                n_resampled: 0,
                diag,
            }
        }
        SamplerKind::Exact => unreachable!(),
    })
}

pub fn run_cell(cfg: &RunConfig, target: &GaussianMixture, reference: &PointSet, cell: &Cell) -> CellOutcome {
    let m = &cell.method;
    let start = Instant::now();
    let mut row = ResultRow {
        target: cfg.target_label(),
        sampler: m.sampler.label().into(),
        path: path_label(m).into(),
        transition: m.transition.label().into(),
        k: cell.k,
        seed: cell.seed,
        n_samples: 0,
        sw2: f64::NAN,
        mode_weight_abs_err: f64::NAN,
        weight_hist_tv: f64::NAN,
        ess_fraction: f64::NAN,
        n_projections: cfg.metrics.n_projections,
        log_normalizer: f64::NAN,
        swap_rate: f64::NAN,
        mala_acceptance: f64::NAN,
        n_resampled: 0,
        ddpm_violations: 0,
        fp_nonconverged: 0,
        nonfinite_weights: 0,
        status: "ok".into(),
    };
    let mut diagnostics = CellDiagnostics::default();
    let result = draw(cfg, target, cell).and_then(|d| {
        row.n_samples = d.samples.len();
        row.log_normalizer = d.log_normalizer;
        row.swap_rate = d.swap_rate;
        row.mala_acceptance = d.mala_acceptance;
        row.n_resampled = d.n_resampled;
        row.ddpm_violations = d.diag.levels.iter().map(|l| l.ddpm_violations).sum::<usize>()
            + d.diag.swaps.iter().map(|s| s.ddpm_violations).sum::<usize>();
        row.fp_nonconverged = d.diag.levels.iter().map(|l| l.fp_nonconverged).sum::<usize>()
            + d.diag.swaps.iter().map(|s| s.fp_nonconverged).sum::<usize>();
        row.nonfinite_weights = d.diag.levels.iter().map(|l| l.nonfinite_weights).sum::<usize>()
            + d.diag.swaps.iter().map(|s| s.nonfinite).sum::<usize>();
        diagnostics = d.diag;
        let report: MetricsReport =
            evaluate(&d.samples, reference, target, cfg.metrics.n_projections, cfg.metrics.metric_seed)?;
        Ok(report)
    });
    match result {
        Ok(r) => {
            row.sw2 = r.sw2;
            row.mode_weight_abs_err = r.mode_weight_abs_err;
            row.weight_hist_tv = r.weight_hist_tv;
            row.ess_fraction = r.ess_fraction;
        }
        Err(e) => row.status = format!("error: {e:#}"),
    }
    diagnostics.sampler = row.sampler.clone();
    diagnostics.path = row.path.clone();
    diagnostics.transition = row.transition.clone();
    diagnostics.k = row.k;
    diagnostics.seed = row.seed;
    CellOutcome { row, diagnostics, wall_seconds: start.elapsed().as_secs_f64() }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, String, String, usize)> = Vec::new();
    for r in rows {
        let key = (r.target.clone(), r.sampler.clone(), r.path.clone(), r.transition.clone(), r.k);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(target, sampler, path, transition, k)| {
            let ok: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| {
                    r.status == "ok"
                        && r.target == target
                        && r.sampler == sampler
                        && r.path == path
                        && r.transition == transition
                        && r.k == k
                })
                .collect();
            let med = |f: fn(&ResultRow) -> f64| median(ok.iter().map(|r| f(r)).collect());
            SummaryRow {
                n_ok: ok.len(),
                sw2: med(|r| r.sw2),
                mode_weight_abs_err: med(|r| r.mode_weight_abs_err),
                weight_hist_tv: med(|r| r.weight_hist_tv),
                ess_fraction: med(|r| r.ess_fraction),
                target,
                sampler,
                path,
                transition,
                k,
            }
        })
        .collect()
}

/// Runs every cell without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<(Vec<CellOutcome>, Vec<SummaryRow>)> {
    cfg.validate()?;
    let target = cfg.target()?;
    let reference =
        target.sample_exact(cfg.metrics.reference_size, &mut stream(cfg.metrics.reference_seed, &[role::REFERENCE]));
    let cells = cells(cfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let outcomes: Vec<CellOutcome> =
        pool.install(|| cells.par_iter().map(|c| run_cell(cfg, &target, &reference, c)).collect());
    let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let summary = summarize(&rows);
    Ok((outcomes, summary))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const RESULT_COLUMNS: &[&str] = &[
    "target",
    "sampler",
    "path",
    "transition",
    "k",
    "seed",
    "n_samples",
    "sw2",
    "mode_weight_abs_err",
    "weight_hist_tv",
    "ess_fraction",
    "n_projections",
    "log_normalizer",
    "swap_rate",
    "mala_acceptance",
    "n_resampled",
    "ddpm_violations",
    "fp_nonconverged",
    "nonfinite_weights",
    "status",
];

pub const SUMMARY_COLUMNS: &[&str] =
    &["target", "sampler", "path", "transition", "k", "n_ok", "sw2", "mode_weight_abs_err", "weight_hist_tv", "ess_fraction"];

/// Runs the grid and writes results, summary, timing, diagnostics, plots and the resolved config under `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let (outcomes, summary) = execute(cfg)?;
    let out = &cfg.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved(out)?;
    let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    write_csv(&out.join("results.csv"), &rows, RESULT_COLUMNS)?;
    write_csv(&out.join("summary.csv"), &summary, SUMMARY_COLUMNS)?;
    let timing: Vec<TimingRow> = outcomes
        .iter()
        .map(|o| TimingRow {
            sampler: &o.row.sampler,
            path: &o.row.path,
            transition: &o.row.transition,
            k: o.row.k,
            seed: o.row.seed,
            wall_seconds: o.wall_seconds,
        })
        .collect();
    write_csv(&out.join("timing.csv"), &timing, &["sampler", "path", "transition", "k", "seed", "wall_seconds"])?;
    let mut jl = BufWriter::new(File::create(out.join("diagnostics.jsonl"))?);
    for o in &outcomes {
        serde_json::to_writer(&mut jl, &o.diagnostics)?;
        jl.write_all(b"\n")?;
    }
    jl.flush()?;
    let plots = out.join("plots");
    fs::create_dir_all(&plots)?;
    for metric in ["sw2", "mode_weight_abs_err", "weight_hist_tv"] {
        crate::plot::plot_csv_to(&out.join("summary.csv"), &plots.join(format!("{metric}.svg")), metric)?;
    }
    Ok(RunOutput { rows, summary })
}
