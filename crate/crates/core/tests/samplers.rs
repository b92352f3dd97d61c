use diffamc_core::diffusion::{NoiseSchedule, TimeGrid, TraceMode};
use diffamc_core::math::{iso_normal_log_pdf, PointSet};
use diffamc_core::metrics::{ess_fraction, mode_weights};
use diffamc_core::paths::{diffusion_path, tempering_path, DensityPath};
use diffamc_core::rng::stream;
use diffamc_core::samplers::*;
use diffamc_core::{Error, GaussianMixture, TargetSpec};
use rand_distr::{Distribution, Normal};

fn std_dev(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn vp_path(target: &GaussianMixture, k: usize) -> DensityPath {
    let sched = NoiseSchedule::default();
    diffusion_path(target, &sched, &TimeGrid::log_snr(&sched, k).unwrap()).unwrap()
}

fn small_cfg(n: usize) -> SamplerConfig {
    SamplerConfig {
        n_particles: n,
        mcmc_steps: 8,
        mcmc_warmup: 4,
        keep_last: 4,
        re_total_steps: 2000,
        re_warmup: 500,
        re_chains: 2,
        ..SamplerConfig::default()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn stoch2_ais_is_exact_on_a_gaussian() {
    let path = vp_path(&TargetSpec::gaussian(4).build().unwrap(), 32);
    let out = ais_run(&path, TransitionSpec::Stoch2, &small_cfg(512), 1).unwrap();
    assert!(std_dev(&out.ensemble.log_weights) < 1e-8);
}

#[test]
fn stoch2_ais_is_near_exact_on_a_non_standard_gaussian() {
    let g = GaussianMixture::new(vec![1.0], vec![vec![0.5, -1.0]], vec![vec![0.3, 2.0]]).unwrap();
    let path = vp_path(&g, 32);
    let out = ais_run(&path, TransitionSpec::Stoch2, &small_cfg(1024), 2).unwrap();
    assert!(out.ensemble.ess_fraction().unwrap() > 0.999);
    assert!(out.log_normalizer.abs() < 1e-3, "{}", out.log_normalizer);
    let s1 = ais_run(&path, TransitionSpec::Stoch1, &small_cfg(1024), 2).unwrap();
    assert!(s1.ensemble.ess_fraction().unwrap() < out.ensemble.ess_fraction().unwrap());
}

#[test]
fn stoch2_re_accepts_every_swap_on_a_gaussian() {
    let path = vp_path(&TargetSpec::gaussian(3).build().unwrap(), 16);
    let out = re_run(&path, TransitionSpec::Stoch2, &small_cfg(1), 3).unwrap();
    assert!(out.swap_rate() >= 0.999, "{}", out.swap_rate());
}

#[test]
fn constant_path_reduces_to_identity() {
    // Under the unit VP schedule every level of a standard-normal path is N(0, I).
    let path = vp_path(&TargetSpec::gaussian(2).build().unwrap(), 8);
    let cfg = small_cfg(64);
    let a = ais_run(&path, TransitionSpec::NoKernel, &cfg, 4).unwrap();
    assert!(a.ensemble.log_weights.iter().all(|w| w.abs() < 1e-12));
    let det = TransitionSpec::det_im(TraceMode::ExactDiag);
    let out = ais_run(&path, det, &cfg, 4).unwrap();
    assert!(std_dev(&out.ensemble.log_weights) < 1e-12);
    assert_eq!(re_run(&path, det, &cfg, 4).unwrap().swap_rate(), 1.0);
    let r = re_run(&path, TransitionSpec::NoKernel, &cfg, 4).unwrap();
    assert_eq!(r.swap_rate(), 1.0);
}

#[test]
fn strongest_mode_weight_in_1d() {
    let target = TargetSpec::two_modes(5.0, 1).build().unwrap();
    let path = vp_path(&target, 64);
    let strong = target.strongest();
    let cfg = small_cfg(8192);
    for spec in [
        TransitionSpec::NoKernel,
        TransitionSpec::Stoch1,
        TransitionSpec::Stoch2,
        TransitionSpec::det_im(TraceMode::ExactDiag),
        TransitionSpec::det_im(TraceMode::Hutchinson { n_probes: 4 }),
    ] {
        let w: Vec<f64> = (0..8)
            .map(|seed| {
                let out = ais_run(&path, spec, &cfg, seed).unwrap();
                let nw = out.samples.normalized_weights();
                mode_weights(&out.samples.points, Some(&nw), &target).unwrap()[strong]
            })
            .collect();
        let m = median(w);
        assert!((m - 2.0 / 3.0).abs() < 0.05, "{} {m}", spec.label());
    }
}

#[test]
fn smc_resamples_and_tracks_ancestry() {
    let target = TargetSpec::two_modes(4.0, 2).build().unwrap();
    let path = tempering_path(&target, 16, 1e-3).unwrap();
    let out = smc_run(&path, TransitionSpec::NoKernel, &small_cfg(256), 5).unwrap();
    assert!(out.n_resampled > 0);
    assert_eq!(out.ancestry.len(), 256);
    assert!(out.ancestry.iter().all(|a| *a < 256));
    assert_eq!(out.levels.len(), 16);
    assert_eq!(out.levels.iter().filter(|l| l.resampled).count(), out.n_resampled);
    assert_eq!(out.samples.len(), 256 * 4);
}

#[test]
fn runs_are_reproducible() {
    let target = TargetSpec::two_modes(4.0, 2).build().unwrap();
    let path = vp_path(&target, 8);
    let cfg = small_cfg(64);
    for spec in [TransitionSpec::Stoch1, TransitionSpec::det_im(TraceMode::Hutchinson { n_probes: 2 })] {
        assert_eq!(smc_run(&path, spec, &cfg, 9).unwrap(), smc_run(&path, spec, &cfg, 9).unwrap());
        assert_ne!(smc_run(&path, spec, &cfg, 9).unwrap(), smc_run(&path, spec, &cfg, 10).unwrap());
        assert_eq!(re_run(&path, spec, &cfg, 9).unwrap(), re_run(&path, spec, &cfg, 9).unwrap());
    }
}

#[test]
fn re_rounds_alternate_parity() {
    let target = TargetSpec::two_modes(4.0, 2).build().unwrap();
    let path = vp_path(&target, 6);
    let cfg = small_cfg(1);
    let out = re_run(&path, TransitionSpec::Stoch1, &cfg, 1).unwrap();
    let rounds = cfg.re_total_steps / cfg.swap_period;
    assert_eq!(out.round_parity.len(), rounds);
    for (r, p) in out.round_parity.iter().enumerate() {
        assert_eq!(*p as usize, r % 2);
    }
    let post = (0..rounds).filter(|r| (r + 1) * cfg.swap_period > cfg.re_warmup).count();
    assert_eq!(out.samples.len(), cfg.re_chains * post);
    for s in &out.swaps {
        let parity = s.pair % 2;
        let expect = (0..rounds).filter(|r| r % 2 == parity).count() * cfg.re_chains;
        assert_eq!(s.attempts, expect, "{}", s.pair);
    }
}

#[test]
fn re_init_falls_back_to_base_on_tempering() {
    let target = TargetSpec::two_modes(4.0, 2).build().unwrap();
    let t = re_run(&tempering_path(&target, 4, 1e-3).unwrap(), TransitionSpec::NoKernel, &small_cfg(1), 1).unwrap();
    assert_eq!(t.init, ReInit::Base);
    let d = re_run(&vp_path(&target, 4), TransitionSpec::NoKernel, &small_cfg(1), 1).unwrap();
    assert_eq!(d.init, ReInit::ScoreInformed);
}

#[test]
fn kernels_need_diffusion_paths() {
    let target = TargetSpec::two_modes(4.0, 2).build().unwrap();
    let path = tempering_path(&target, 4, 1e-3).unwrap();
    for spec in [TransitionSpec::Stoch1, TransitionSpec::Stoch2, TransitionSpec::det_im(TraceMode::ExactDiag)] {
        let err = ais_run(&path, spec, &small_cfg(8), 1).unwrap_err();
        assert!(matches!(&err, Error::InvalidCombination(m) if m.contains(spec.label())), "{err}");
    }
    assert!(validate_transition(&path, &TransitionSpec::NoKernel).is_ok());
}

#[test]
fn invalid_configs_are_rejected() {
    let path = vp_path(&TargetSpec::gaussian(1).build().unwrap(), 4);
    let cfg = SamplerConfig { keep_last: 100, ..small_cfg(8) };
    assert!(ais_run(&path, TransitionSpec::NoKernel, &cfg, 0).is_err());
    let cfg = SamplerConfig { ess_threshold: 1.5, ..small_cfg(8) };
    assert!(smc_run(&path, TransitionSpec::NoKernel, &cfg, 0).is_err());
}

fn weighted_mean(points: &PointSet, w: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    points.rows().zip(w).map(|(x, w)| w * f(x)).sum()
}

#[test]
fn systematic_resampling_preserves_expectations() {
    let n = 10_000;
    let mut rng = stream(7, &[]);
    let normal = Normal::new(0.0, 1.5).unwrap();
    let xs: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let lw: Vec<f64> = xs.iter().map(|x| -0.5 * x * x + 0.5 * x * x / 2.25).collect();
    let ws = WeightedSamples { points: PointSet::from_flat(1, xs.clone()), log_weights: lw };
    let w = ws.normalized_weights();
    let idx = systematic_resample(&w, n, &mut rng);
    assert_eq!(idx.len(), n);
    let fs: [fn(&[f64]) -> f64; 3] = [|x| x[0].tanh(), |x| (x[0] > 0.5) as u8 as f64, |x| x[0].cos()];
    for f in fs {
        let a = weighted_mean(&ws.points, &w, f);
        let vals: Vec<f64> = idx.iter().map(|&i| f(&[xs[i]])).collect();
        let b = vals.iter().sum::<f64>() / n as f64;
        let se = std_dev(&vals) / (n as f64 * ess_fraction(&ws.log_weights).unwrap()).sqrt();
        assert!((a - b).abs() < 3.0 * se, "{a} {b} {se}");
    }
}

#[test]
fn systematic_resampling_counts_are_floor_or_ceil() {
    let w = [0.1, 0.25, 0.05, 0.6];
    let mut rng = stream(1, &[]);
    let idx = systematic_resample(&w, 20, &mut rng);
    for (i, wi) in w.iter().enumerate() {
        let c = idx.iter().filter(|&&j| j == i).count() as f64;
        assert!((c - 20.0 * wi).abs() < 1.0 + 1e-12);
    }
    assert!(idx.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn importance_sampling_with_the_target_as_proposal_is_uniform() {
    let mut rng = stream(3, &[]);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let lp = |x: &[f64]| iso_normal_log_pdf(x, &[0.0], 1.0);
    let out = importance_sampling(|r| vec![n01.sample(r)], lp, lp, 1000, &mut rng).unwrap();
    assert!(out.samples.log_weights.iter().all(|w| *w == 0.0));
    assert!(out.log_normalizer.abs() < 1e-15);
}

#[test]
fn importance_sampling_wide_proposal() {
    let mut rng = stream(4, &[]);
    let q = Normal::new(0.0, 2.0).unwrap();
    let n = 100_000;
    let out = importance_sampling(
        |r| vec![q.sample(r)],
        |x| iso_normal_log_pdf(x, &[0.0], 4.0),
        |x| iso_normal_log_pdf(x, &[0.0], 1.0),
        n,
        &mut rng,
    )
    .unwrap();
    let w = out.samples.normalized_weights();
    let mean = weighted_mean(&out.samples.points, &w, |x| x[0]);
    let ess = out.samples.ess_fraction().unwrap();
    assert!(mean.abs() < 3.0 / (n as f64 * ess).sqrt(), "{mean}");
    // E_q[w²] = 4/√7 for N(0, 1) against N(0, 4).
    assert!((ess - 7f64.sqrt() / 4.0).abs() < 0.01, "{ess}");
    assert!(out.log_normalizer.abs() < 0.01);
}

#[test]
fn importance_sampling_rejects_all_zero_weights() {
    let mut rng = stream(5, &[]);
    let r = importance_sampling(|_| vec![0.0], |_| 0.0, |_| f64::NEG_INFINITY, 10, &mut rng);
    assert!(r.is_err());
}

#[test]
fn mala_samples_a_gaussian_and_adapts() {
    let g = GaussianMixture::new(vec![1.0], vec![vec![1.0, -1.0]], vec![vec![0.5, 2.0]]).unwrap();
    let mut rng = stream(6, &[]);
    let mala = Mala { target_accept: 0.7, adapt: true };
    let out = mala_chain(&g, &[0.0, 0.0], 40_000, 0.01, 30_000, mala, &mut rng).unwrap();
    assert!(out.acceptance_rate > 0.5 && out.acceptance_rate < 0.9, "{}", out.acceptance_rate);
    assert!(out.step > 0.1, "{}", out.step);
    for (j, (m, v)) in [(1.0, 0.5), (-1.0, 2.0)].into_iter().enumerate() {
        let xs: Vec<f64> = out.tail.rows().map(|r| r[j]).collect();
        let em = xs.iter().sum::<f64>() / xs.len() as f64;
        let ev = std_dev(&xs).powi(2);
        assert!((em - m).abs() < 0.1, "{j} {em}");
        assert!((ev / v - 1.0).abs() < 0.15, "{j} {ev}");
    }
}
