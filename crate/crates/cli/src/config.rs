//! Experiment configuration: TOML files, embedded presets and `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use diffamc_core::diffusion::{make_time_grid, NoiseSchedule, DEFAULT_SIGMA_MIN_GRID};
use diffamc_core::paths::{diffusion_path, tempering_path, DensityPath};
use diffamc_core::samplers::{validate_transition, SamplerConfig, TransitionSpec};
use diffamc_core::{GaussianMixture, TargetFamily, TargetSpec};
use serde::{Deserialize, Serialize};

pub const PRESETS: &[(&str, &str)] = &[
    ("smoke", include_str!("../presets/smoke.toml")),
    ("desk-paths", include_str!("../presets/desk-paths.toml")),
    ("desk-transitions", include_str!("../presets/desk-transitions.toml")),
    ("desk-path-viz", include_str!("../presets/desk-path-viz.toml")),
    ("full-paths", include_str!("../presets/full-paths.toml")),
    ("full-transitions", include_str!("../presets/full-transitions.toml")),
];

pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        anyhow!("unknown preset `{name}` (available: {})", names.join(", "))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Ais,
    Smc,
    Re,
    ReverseSde,
    ReverseOde,
    Exact,
}

impl SamplerKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Ais => "ais",
            Self::Smc => "smc",
            Self::Re => "re",
            Self::ReverseSde => "reverse_sde",
            Self::ReverseOde => "reverse_ode",
            Self::Exact => "exact",
        }
    }

    pub fn uses_path(self) -> bool {
        !matches!(self, Self::Exact)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    Tempering,
    #[default]
    Diffusion,
}

impl PathChoice {
    pub fn label(self) -> &'static str {
        match self {
            Self::Tempering => "tempering",
            Self::Diffusion => "diffusion",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub sampler: SamplerKind,
    #[serde(default)]
    pub path: PathChoice,
    #[serde(default = "no_kernel")]
    pub transition: TransitionSpec,
    /// Overrides the run-level K list for this method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
}

fn no_kernel() -> TransitionSpec {
    TransitionSpec::NoKernel
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub sigma_min: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { sigma_min: DEFAULT_SIGMA_MIN_GRID }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemperingConfig {
    pub epsilon: f64,
}

impl Default for TemperingConfig {
    fn default() -> Self {
        Self { epsilon: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub n_projections: usize,
    pub metric_seed: u64,
    pub reference_size: usize,
    pub reference_seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { n_projections: 128, metric_seed: 0, reference_size: 8192, reference_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathVizConfig {
    pub k: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    #[serde(default = "both_paths")]
    pub paths: Vec<PathChoice>,
}

fn both_paths() -> Vec<PathChoice> {
    vec![PathChoice::Diffusion, PathChoice::Tempering]
}

impl PathVizConfig {
    pub fn x_grid(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n).map(|i| self.x_min + (self.x_max - self.x_min) * i as f64 / (n - 1) as f64).collect()
    }
}

fn default_n_runs() -> usize {
    8
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_ks() -> Vec<usize> {
    vec![16, 32, 64, 128, 256]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// First run seed; run r uses `seed + r`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads for the cell pool; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    pub target: TargetSpec,
    #[serde(default)]
    pub schedule: NoiseSchedule,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tempering: TemperingConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub methods: Vec<MethodEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_viz: Option<PathVizConfig>,
}

/// Where a configuration comes from, plus command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct ConfigSource {
    pub file: Option<PathBuf>,
    pub preset: Option<String>,
    pub overrides: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ConfigSource {
    pub fn preset(name: &str) -> Self {
        Self { preset: Some(name.into()), ..Self::default() }
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let text = match (&self.file, &self.preset) {
            (Some(_), Some(_)) => bail!("give either a config path or --preset, not both"),
            (Some(path), None) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            (None, Some(name)) => preset_source(name)?.to_string(),
            (None, None) => bail!("no configuration: pass a config path or --preset"),
        };
        let mut table: toml::Table = toml::from_str(&text).context("parsing configuration")?;
        for kv in &self.overrides {
            apply_override(&mut table, kv)?;
        }
        if let Some(seed) = self.seed {
            table.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
        if let Some(out) = &self.out {
            table.insert("out".into(), toml::Value::String(out.display().to_string()));
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        Ok(cfg)
    }
}

/// Sets a dotted key (`sampler.n_particles=512`) in a TOML table.
///
/// The value is parsed as TOML when possible and kept as a string otherwise.
pub fn apply_override(table: &mut toml::Table, kv: &str) -> Result<()> {
    let (key, raw) = kv.split_once('=').ok_or_else(|| anyhow!("override `{kv}` is not key=value"))?;
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` is malformed");
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| anyhow!("override `{key}`: `{part}` is not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_runs as u64).map(|r| self.seed + r).collect()
    }

    pub fn target(&self) -> Result<GaussianMixture> {
        Ok(self.target.build()?)
    }

    pub fn target_label(&self) -> String {
        let fam = match &self.target.family {
            TargetFamily::TwoModes { a } => format!("two_modes(a={a})"),
            TargetFamily::ManyModes { n_modes, mode_seed } => format!("many_modes(L={n_modes},seed={mode_seed})"),
            TargetFamily::Gaussian => "gaussian".to_string(),
            TargetFamily::Explicit { weights, .. } => format!("explicit(L={})", weights.len()),
        };
        format!("{fam},d={}", self.target.dim)
    }

    pub fn method_ks(&self, m: &MethodEntry) -> Vec<usize> {
        if !m.sampler.uses_path() {
            return vec![0];
        }
        m.ks.clone().unwrap_or_else(|| self.ks.clone())
    }

    pub fn build_path(&self, target: &GaussianMixture, choice: PathChoice, k: usize) -> Result<DensityPath> {
        Ok(match choice {
            PathChoice::Tempering => tempering_path(target, k, self.tempering.epsilon)?,
            PathChoice::Diffusion => {
                let sched = &self.schedule;
                let grid = make_time_grid(sched, k, self.grid.sigma_min, sched.sigma(sched.horizon()))?;
                diffusion_path(target, sched, &grid)?
            }
        })
    }

    /// Checks every knob and every (method, K) combination before anything runs.
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            bail!("n_runs must be at least 1");
        }
        self.schedule.validate().context("schedule")?;
        self.sampler.validate().context("sampler")?;
        if self.metrics.n_projections == 0 || self.metrics.reference_size == 0 {
            bail!("metrics.n_projections and metrics.reference_size must be positive");
        }
        if !(self.tempering.epsilon > 0.0 && self.tempering.epsilon < 1.0) {
            bail!("tempering.epsilon must lie in (0, 1)");
        }
        let target = self.target().context("target")?;
        for (i, m) in self.methods.iter().enumerate() {
            let ks = self.method_ks(m);
            let ctx = || format!("methods[{i}] ({} / {} / {})", m.sampler.label(), m.path.label(), m.transition.label());
            if m.sampler.uses_path() && ks.is_empty() {
                bail!("{}: empty K list", ctx());
            }
            match m.sampler {
                SamplerKind::ReverseSde | SamplerKind::ReverseOde => {
                    if m.path != PathChoice::Diffusion {
                        bail!("{}: reverse-time samplers need the diffusion path", ctx());
                    }
                    if m.transition != TransitionSpec::NoKernel {
                        bail!("{}: reverse-time samplers take no transition", ctx());
                    }
                }
                SamplerKind::Exact => {
                    if m.transition != TransitionSpec::NoKernel {
                        bail!("{}: the exact sampler takes no transition", ctx());
                    }
                }
                _ => {}
            }
            if m.sampler.uses_path() {
                for &k in &ks {
                    let path = self.build_path(&target, m.path, k).with_context(|| format!("{}: K={k}", ctx()))?;
                    validate_transition(&path, &m.transition).with_context(|| format!("{}: K={k}", ctx()))?;
                }
            }
        }
        if let Some(v) = &self.path_viz {
            if self.target.dim != 1 {
                bail!("path_viz needs a 1-D target (dim = {})", self.target.dim);
            }
            if v.k == 0 || v.n_points < 3 || !(v.x_min < v.x_max) {
                bail!("path_viz needs k ≥ 1, n_points ≥ 3 and x_min < x_max");
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("resolved_config.toml"), self.to_toml()?)?;
        Ok(())
    }
}
