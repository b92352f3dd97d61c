use diffamc_core::diffusion::{NoiseSchedule, TimeGrid};
use diffamc_core::math::std_normal_log_pdf;
use diffamc_core::paths::*;
use diffamc_core::rng::stream;
use diffamc_core::{Density, GaussianMixture, TargetFamily, TargetSpec};
use proptest::prelude::*;

fn skewed_target() -> GaussianMixture {
    TargetSpec {
        family: TargetFamily::Explicit {
            weights: vec![0.75, 0.25],
            means: vec![vec![-4.0], vec![4.0]],
            variances: vec![vec![0.25], vec![1.0]],
        },
        dim: 1,
        standardized: false,
    }
    .build()
    .unwrap()
}

fn x_grid() -> Vec<f64> {
    (0..=4000).map(|i| -12.0 + 24.0 * i as f64 / 4000.0).collect()
}

/// Φ by Simpson's rule from −12.
fn normal_cdf(x: f64) -> f64 {
    let n = 20_000;
    let lo = -12.0;
    let h = (x - lo) / n as f64;
    let f = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + h * i as f64)).sum();
    h / 3.0 * (f(lo) + inner + f(x))
}

/// Grid point of minimal target density between the modes.
fn split_point(target: &GaussianMixture) -> f64 {
    x_grid()
        .into_iter()
        .filter(|x| *x > -4.0 && *x < 4.0)
        .min_by(|a, b| target.log_density(&[*a]).total_cmp(&target.log_density(&[*b])))
        .unwrap()
}

#[test]
fn tempering_betas_endpoints_and_monotonicity() {
    let b = tempering_betas(16, 1e-3);
    assert_eq!(b.len(), 17);
    assert_eq!(b[0], 1.0);
    assert_eq!(b[16], 0.0);
    assert!(b.windows(2).all(|w| w[0] > w[1]));
    assert!((b[8] - (1.0 - 1e-3f64.powf(0.5))).abs() < 1e-15);
}

#[test]
fn tempering_ends_at_the_standard_normal() {
    let target = TargetSpec::two_modes(5.0, 3).build().unwrap();
    let path = tempering_path(&target, 8, 1e-4).unwrap();
    let mut rng = stream(1, &[]);
    let xs = target.sample_exact(1000, &mut rng);
    let base = path.level(8);
    let off = base.log_density(xs.row(0)) - std_normal_log_pdf(xs.row(0));
    for x in xs.rows() {
        assert!((base.log_density(x) - std_normal_log_pdf(x) - off).abs() < 1e-10);
        assert!((path.level(0).log_density(x) - target.log_density(x)).abs() < 1e-12);
    }
}

#[test]
fn diffusion_path_ends_near_the_standard_normal() {
    let target = TargetSpec::two_modes(5.0, 4).build().unwrap();
    let sched = NoiseSchedule::default();
    let path = diffusion_path(&target, &sched, &TimeGrid::log_snr(&sched, 16).unwrap()).unwrap();
    let mut rng = stream(2, &[]);
    let xs = target.sample_exact(1000, &mut rng);
    let residual = (-sched.alpha(1.0)).exp();
    for x in xs.rows() {
        let dev = path.level(16).log_density(x) - std_normal_log_pdf(x);
        assert!(dev.abs() < 50.0 * residual, "{dev}");
    }
    assert!(path.is_diffusion());
    assert_eq!(path.level_param(16), 1.0);
}

#[test]
fn mode_mass_is_constant_on_diffusion_paths() {
    let target = skewed_target();
    let sched = NoiseSchedule::default();
    let path = diffusion_path(&target, &sched, &TimeGrid::log_snr(&sched, 32).unwrap()).unwrap();
    let prof = path_mode_mass_profile_1d(&path, &x_grid()).unwrap();
    for m in prof {
        assert!((m - 0.75).abs() < 1e-6, "{m}");
    }
}

#[test]
fn mode_mass_switches_on_tempering_paths() {
    let target = skewed_target();
    let path = tempering_path(&target, 64, 1e-3).unwrap();
    let prof = path_mode_mass_profile_1d(&path, &x_grid()).unwrap();
    let s = split_point(&target);
    let at_target = 0.75 * normal_cdf((s + 4.0) / 0.5) + 0.25 * normal_cdf(s - 4.0);
    assert!((prof[0] - at_target).abs() < 1e-6, "{} {at_target}", prof[0]);
    let dev = prof.iter().map(|m| (m - 0.75).abs()).fold(0.0, f64::max);
    assert!(dev > 0.15, "{dev}");
}

#[test]
fn base_level_mass_is_the_normal_cdf_at_the_split() {
    let target = skewed_target();
    let path = tempering_path(&target, 4, 1e-3).unwrap();
    let prof = path_mode_mass_profile_1d(&path, &x_grid()).unwrap();
    let s = split_point(&target);
    assert!((prof[4] - normal_cdf(s)).abs() < 1e-6, "{} {}", prof[4], normal_cdf(s));
}

#[test]
fn profile_rejects_higher_dimensions() {
    let target = TargetSpec::two_modes(5.0, 2).build().unwrap();
    let path = tempering_path(&target, 4, 1e-3).unwrap();
    assert!(path_mode_mass_profile_1d(&path, &x_grid()).is_err());
}

#[test]
fn invalid_parameters_are_rejected() {
    let target = TargetSpec::two_modes(5.0, 2).build().unwrap();
    assert!(tempering_path(&target, 0, 1e-3).is_err());
    assert!(tempering_path(&target, 4, 1.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tempered_oracles_match_finite_differences(beta in 0.0f64..1.0, seed in any::<u64>()) {
        let target = TargetSpec::two_modes(4.0, 3).build().unwrap();
        let lvl = Level::Tempered(Tempered { beta, target: target.clone().into() });
        let x = target.sample_exact(1, &mut stream(seed, &[])).as_flat().to_vec();
        let mut sc = vec![0.0; 3];
        let mut hd = vec![0.0; 3];
        lvl.score(&x, &mut sc);
        lvl.hessian_diag(&x, &mut hd).unwrap();
        let h = 1e-5;
        for j in 0..3 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let fd = (lvl.log_density(&xp) - lvl.log_density(&xm)) / (2.0 * h);
            prop_assert!((sc[j] - fd).abs() < 1e-5 * (1.0 + fd.abs()));
            let (mut sp, mut sm) = (vec![0.0; 3], vec![0.0; 3]);
            lvl.score(&xp, &mut sp);
            lvl.score(&xm, &mut sm);
            let fdh = (sp[j] - sm[j]) / (2.0 * h);
            prop_assert!((hd[j] - fdh).abs() < 1e-5 * (1.0 + fdh.abs()));
        }
    }
}
