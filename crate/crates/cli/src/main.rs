use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use diffamc::config::{ConfigSource, RunConfig, PRESETS};
use diffamc::{plot, runner, viz};

#[derive(Parser)]
#[command(name = "diffamc", version, about = "Annealed Monte Carlo on diffusion and tempering density paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler grid and write metrics, diagnostics and plots.
    Run(ConfigArgs),
    /// Write per-level densities and strongest-mode mass for a 1-D target.
    PathViz(ConfigArgs),
    /// Render SVG charts from a results, summary or path-viz CSV.
    Plot {
        csv: PathBuf,
        /// Output directory (defaults to the CSV's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve and check a configuration, then print it.
    Validate(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    config: Option<PathBuf>,
    /// Embedded preset instead of a file.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS.iter().map(|p| p.0)))]
    preset: Option<String>,
    /// First run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set sampler.n_particles=512`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<RunConfig> {
        let cfg = ConfigSource {
            file: self.config,
            preset: self.preset,
            overrides: self.overrides,
            seed: self.seed,
            out: self.out,
        }
        .resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let n = runner::cells(&cfg).len();
            eprintln!("running {n} cells into {}", cfg.out.display());
            let out = runner::run(&cfg)?;
            let failed = out.rows.iter().filter(|r| r.status != "ok").count();
            for s in &out.summary {
                println!(
                    "{:<8} {:<10} {:<15} K={:<4} sw2={:.4} mode_err={:.4} ({} ok)",
                    s.sampler, s.path, s.transition, s.k, s.sw2, s.mode_weight_abs_err, s.n_ok
                );
            }
            if failed > 0 {
                eprintln!("{failed} cells failed; see the status column of results.csv");
            }
        }
        Command::PathViz(args) => {
            let cfg = args.resolve()?;
            let v = viz::path_viz(&cfg)?;
            for m in &v.mass {
                if m.level == 0 || m.level + 1 == v.mass.iter().filter(|r| r.path == m.path).count() {
                    println!("{:<10} level {:<4} strong_mass={:.4}", m.path, m.level, m.strong_mass);
                }
            }
            eprintln!("wrote {}", cfg.out.display());
        }
        Command::Plot { csv, out } => {
            let dir = out.unwrap_or_else(|| csv.parent().map(PathBuf::from).unwrap_or_default());
            for p in plot::plot_csv(&csv, &dir)? {
                println!("{}", p.display());
            }
        }
        Command::Validate(args) => {
            let cfg = args.resolve()?;
            print!("{}", cfg.to_toml()?);
            eprintln!("ok: {} cells", runner::cells(&cfg).len());
        }
    }
    Ok(())
}
