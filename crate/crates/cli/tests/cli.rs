use std::fs;
use std::path::Path;
use std::process::Command;

use diffamc::config::{ConfigSource, RunConfig};
use diffamc::{plot, runner, viz};

fn smoke_with(overrides: &[&str]) -> RunConfig {
    ConfigSource {
        preset: Some("smoke".into()),
        overrides: overrides.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    }
    .resolve()
    .unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffamc"))
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn one_cell_grid_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke_with(&[r#"methods=[{sampler="ais", transition={kind="stoch2"}}]"#, "ks=[8]", "n_runs=1"]);
    cfg.out = dir.path().to_path_buf();
    let out = runner::run(&cfg).unwrap();
    assert_eq!(out.rows.len(), 1);
    assert_eq!(csv_rows(&dir.path().join("results.csv")).len(), 1);
    assert_eq!(csv_rows(&dir.path().join("summary.csv")).len(), 1);
    assert_eq!(fs::read_to_string(dir.path().join("diagnostics.jsonl")).unwrap().lines().count(), 1);
    for f in ["resolved_config.toml", "timing.csv", "plots/sw2.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let resolved: RunConfig = toml::from_str(&fs::read_to_string(dir.path().join("resolved_config.toml")).unwrap()).unwrap();
    assert_eq!(resolved, cfg);
}

#[test]
fn exact_rows_are_the_noise_floor() {
    let mut cfg = smoke_with(&[r#"methods=[{sampler="exact"}]"#, "n_runs=3"]);
    cfg.sampler.n_particles = 4096;
    let (outcomes, _) = runner::execute(&cfg).unwrap();
    assert_eq!(outcomes.len(), 3);
    for o in &outcomes {
        let r = &o.row;
        assert_eq!((r.sampler.as_str(), r.path.as_str(), r.k), ("exact", "none", 0));
        assert_eq!(r.ess_fraction, 1.0);
        assert!(r.mode_weight_abs_err < 0.03 && r.sw2 < 0.3, "{r:?}");
    }
}

#[test]
fn path_viz_with_one_step_has_target_and_base_rows() {
    let mut cfg = ConfigSource::preset("desk-path-viz").resolve().unwrap();
    cfg.path_viz.as_mut().unwrap().k = 1;
    let v = viz::compute(&cfg).unwrap();
    let n_points = cfg.path_viz.as_ref().unwrap().n_points;
    for p in ["diffusion", "tempering"] {
        let levels: Vec<usize> = v.mass.iter().filter(|m| m.path == p).map(|m| m.level).collect();
        assert_eq!(levels, [0, 1]);
        assert_eq!(v.densities.iter().filter(|d| d.path == p).count(), 2 * n_points);
    }
    let mass = |p: &str, l: usize| v.mass.iter().find(|m| m.path == p && m.level == l).unwrap().strong_mass;
    assert!((mass("tempering", 0) - mass("diffusion", 0)).abs() < 1e-3);
}

#[test]
fn path_viz_densities_integrate_to_one() {
    let cfg = ConfigSource::preset("desk-path-viz").resolve().unwrap();
    let v = viz::compute(&cfg).unwrap();
    let h = {
        let pv = cfg.path_viz.as_ref().unwrap();
        (pv.x_max - pv.x_min) / (pv.n_points - 1) as f64
    };
    for p in ["diffusion", "tempering"] {
        for level in [0, 64, 128] {
            let d: Vec<f64> =
                v.densities.iter().filter(|r| r.path == p && r.level == level).map(|r| r.density).collect();
            let z = h * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[d.len() - 1]));
            assert!((z - 1.0).abs() < 1e-6, "{p} {level} {z}");
        }
    }
}

#[test]
fn path_viz_rejects_higher_dimensions() {
    let cfg = smoke_with(&["path_viz={k=4, x_min=-1.0, x_max=1.0, n_points=11}"]);
    assert!(cfg.validate().unwrap_err().to_string().contains("1-D"));
    assert!(viz::compute(&cfg).is_err());
}

#[test]
fn validate_names_the_violated_constraint() {
    let out = bin()
        .args(["validate", "--preset", "smoke", "--set"])
        .arg(r#"methods=[{sampler="smc", path="tempering", transition={kind="stoch1"}}]"#)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stoch1") && err.contains("diffusion path"), "{err}");

    let out = bin().args(["validate", "--preset", "smoke", "--set", "methods=[{sampler=\"reverse_ode\", path=\"tempering\"}]"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("reverse-time samplers need the diffusion path"));

    let out = bin().args(["validate", "--preset", "desk-transitions", "--seed", "9"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("seed = 9"));
}

#[test]
fn config_file_and_flags_drive_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    fs::write(
        &cfg_path,
        r#"
name = "tiny"
n_runs = 1
ks = [4]

[target]
dim = 2
family = { kind = "two_modes", a = 2.0 }

[sampler]
n_particles = 64
mcmc_steps = 4
mcmc_warmup = 2
keep_last = 2

[metrics]
n_projections = 8
reference_size = 256

[[methods]]
sampler = "smc"
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = bin().arg("run").arg(&cfg_path).arg("--out").arg(&out_dir).args(["--seed", "5"]).output().unwrap().status;
    assert!(status.success());
    let rows = csv_rows(&out_dir.join("results.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][5], "5");

    let plots = dir.path().join("plots");
    let out = bin().arg("plot").arg(out_dir.join("results.csv")).arg("--out").arg(&plots).output().unwrap();
    assert!(out.status.success());
    let svg = fs::read_to_string(plots.join("results_sw2.svg")).unwrap();
    assert_eq!(svg.matches("class=\"bar\"").count(), 1);
}

#[test]
fn plot_rejects_tables_without_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "a,b\n1,2\n").unwrap();
    assert!(plot::plot_csv(&p, dir.path()).unwrap_err().to_string().contains("missing columns"));
    let p = dir.path().join("partial.csv");
    fs::write(&p, "target,sw2\nx,1.0\n").unwrap();
    let e = plot::plot_csv(&p, dir.path()).unwrap_err().to_string();
    assert!(e.contains("sampler") && e.contains("transition"), "{e}");
}

#[test]
fn empty_results_plot_axes_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke_with(&["methods=[]"]);
    cfg.out = dir.path().to_path_buf();
    runner::run(&cfg).unwrap();
    let svg = fs::read_to_string(dir.path().join("plots/sw2.svg")).unwrap();
    assert!(svg.contains("class=\"axes\""));
    assert!(!svg.contains("class=\"bar\""));
}

#[test]
fn summary_bars_are_grouped_by_transition() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ConfigSource::preset("desk-transitions").resolve().unwrap();
    cfg.n_runs = 1;
    cfg.sampler.n_particles = 64;
    cfg.metrics.reference_size = 256;
    cfg.ks = vec![8, 16];
    cfg.out = dir.path().to_path_buf();
    runner::run(&cfg).unwrap();
    let svg = fs::read_to_string(dir.path().join("plots/sw2.svg")).unwrap();
    assert_eq!(svg.matches("class=\"panel\"").count(), 1);
    for label in ["ais/diffusion/none", "ais/diffusion/stoch1", "ais/diffusion/stoch2", "ais/diffusion/det_hessian", "ais/diffusion/det_hutchinson"] {
        assert!(svg.contains(label), "{label}");
    }
    assert_eq!(svg.matches("class=\"bar\"").count(), 1 + 5 * 2);
}
