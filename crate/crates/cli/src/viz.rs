//! Per-level densities and strongest-mode mass of 1-D density paths.

use std::fs;

use anyhow::{bail, Context, Result};
use diffamc_core::paths::{path_mode_mass_profile_1d, DensityPath, Level};
use diffamc_core::Density;
use serde::Serialize;

use crate::config::RunConfig;
use crate::runner::write_csv;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityRow {
    pub path: &'static str,
    pub level: usize,
    pub param: f64,
    pub x: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassRow {
    pub path: &'static str,
    pub level: usize,
    pub param: f64,
    pub strong_mass: f64,
}

pub struct PathViz {
    pub densities: Vec<DensityRow>,
    pub mass: Vec<MassRow>,
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Densities of every level on `xs`; tempering levels are normalized by quadrature.
pub fn level_densities(path: &DensityPath, xs: &[f64]) -> Vec<Vec<f64>> {
    path.levels()
        .iter()
        .map(|level| match level {
            Level::Mixture(g) => xs.iter().map(|&x| g.log_density(&[x]).exp()).collect(),
            Level::Tempered(t) => {
                let logs: Vec<f64> = xs.iter().map(|&x| t.log_density(&[x])).collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let un: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
                let z = trapezoid(xs, &un);
                un.into_iter().map(|v| v / z).collect()
            }
        })
        .collect()
}

pub fn compute(cfg: &RunConfig) -> Result<PathViz> {
    let Some(v) = &cfg.path_viz else { bail!("the configuration has no [path_viz] table") };
    if cfg.target.dim != 1 {
        bail!("path-viz needs a 1-D target (dim = {})", cfg.target.dim);
    }
    let target = cfg.target()?;
    let xs = v.x_grid();
    let mut densities = Vec::new();
    let mut mass = Vec::new();
    for &choice in &v.paths {
        let path = cfg.build_path(&target, choice, v.k).with_context(|| format!("{} path", choice.label()))?;
        let name = choice.label();
        for (level, dens) in level_densities(&path, &xs).into_iter().enumerate() {
            let param = path.level_param(level);
            densities.extend(xs.iter().zip(dens).map(|(&x, density)| DensityRow { path: name, level, param, x, density }));
        }
        for (level, strong_mass) in path_mode_mass_profile_1d(&path, &xs)?.into_iter().enumerate() {
            mass.push(MassRow { path: name, level, param: path.level_param(level), strong_mass });
        }
    }
    Ok(PathViz { densities, mass })
}

/// Writes `path_viz_densities.csv`, `path_viz_mass.csv`, their plots and the resolved config.
pub fn path_viz(cfg: &RunConfig) -> Result<PathViz> {
    cfg.validate()?;
    let viz = compute(cfg)?;
    let out = &cfg.out;
    fs::create_dir_all(out.join("plots"))?;
    cfg.write_resolved(out)?;
    let dens = out.join("path_viz_densities.csv");
    let mass = out.join("path_viz_mass.csv");
    write_csv(&dens, &viz.densities, &["path", "level", "param", "x", "density"])?;
    write_csv(&mass, &viz.mass, &["path", "level", "param", "strong_mass"])?;
    crate::plot::plot_csv_to(&dens, &out.join("plots/path_viz_densities.svg"), "density")?;
    crate::plot::plot_csv_to(&mass, &out.join("plots/path_viz_mass.svg"), "strong_mass")?;
    Ok(viz)
}
