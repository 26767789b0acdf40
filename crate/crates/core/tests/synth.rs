use pdpclust::synth::{
    generate_on_grid, generate_realization, realization_to_ctf, synthetic_pdp, SvParams, SvRealization, Tap,
};
use pdpclust::transform::{ctf_to_cir, FrequencyGrid, WindowKind};
use num_complex::Complex;

fn grid_params() -> SvParams<f64> {
    SvParams {
        horizon: 60.0,
        noise_power: 0.0,
        cluster_horizon: None,
        ..SvParams::default()
    }
}

/// Empirical mean of |β|² per (cluster, ray) slot over fixed arrival grids.
fn empirical_mean_power(params: &SvParams<f64>, onsets: &[f64], spacing: f64, runs: u64) -> Vec<(f64, f64, f64)> {
    let first = generate_on_grid(params, onsets, spacing, 0).unwrap();
    let mut acc = vec![0.0; first.taps.len()];
    for seed in 0..runs {
        let r = generate_on_grid(params, onsets, spacing, seed).unwrap();
        assert_eq!(r.taps.len(), acc.len());
        for (a, t) in acc.iter_mut().zip(&r.taps) {
            *a += t.gain.norm_sqr();
        }
    }
    first
        .taps
        .iter()
        .zip(&first.ray_labels)
        .zip(&acc)
        .map(|((t, &l), &sum)| {
            let t_l = first.cluster_onsets[l];
            (t_l, t.delay_ns - t_l, sum / runs as f64)
        })
        .collect()
}

#[test]
fn monte_carlo_mean_power_follows_double_exponential() {
    let params = grid_params();
    let onsets = [0.0, 17.0, 41.0];
    let slots = empirical_mean_power(&params, &onsets, 1.0, 10_000);
    let mut worst = 0.0f64;
    for &(t_l, tau, mean) in &slots {
        let law = params.mean_tap_power(t_l, tau);
        worst = worst.max((mean - law).abs() / law);
    }
    assert!(worst < 0.05, "max relative error {worst}");
}

#[test]
fn mean_power_decreases_in_both_delays() {
    let params = grid_params();
    let slots = empirical_mean_power(&params, &[0.0, 20.0], 2.0, 4000);
    // Within a cluster, over a few γ.
    let c0: Vec<f64> = slots.iter().filter(|s| s.0 == 0.0 && s.1 <= 12.0).map(|s| s.2).collect();
    for w in c0.windows(2) {
        assert!(w[1] < w[0] * 1.05);
    }
    // Across clusters, at matching ray delay.
    let head = |t: f64| slots.iter().find(|s| s.0 == t && s.1 == 0.0).unwrap().2;
    assert!(head(20.0) < head(0.0) * 1.05);
}

#[test]
fn law_at_one_time_constant_each() {
    let p = SvParams::<f64>::default();
    let v = p.mean_tap_power(20.0, 5.0);
    assert!((v - p.power_00 * (-2.0f64).exp()).abs() < 1e-15);
}

#[test]
fn realizations_respect_invariants_and_are_deterministic() {
    let params = SvParams::<f64>::default();
    for seed in 0..20 {
        let r = generate_realization(&params, seed).unwrap();
        assert_eq!(r.cluster_onsets[0], 0.0);
        assert!(r.cluster_onsets.windows(2).all(|w| w[1] > w[0]));
        assert!(!r.taps.is_empty());
        for (t, &l) in r.taps.iter().zip(&r.ray_labels) {
            assert!(t.delay_ns >= r.cluster_onsets[l]);
            assert!(t.delay_ns <= params.horizon);
        }
        assert_eq!(r, generate_realization(&params, seed).unwrap());
    }
}

fn single_tap(delay_ns: f64) -> SvRealization<f64> {
    SvRealization {
        taps: vec![Tap { delay_ns, gain: Complex::new(1.0, 0.0) }],
        cluster_onsets: vec![delay_ns],
        ray_labels: vec![0],
        params: SvParams { noise_power: 0.0, ..SvParams::default() },
        arrivals: pdpclust::synth::RayArrivals::Poisson,
    }
}

#[test]
fn round_trip_recovers_tap_delay() {
    let grid = FrequencyGrid::<f64>::default();
    let step_ns = grid.delay_step() * 1e9;
    for delay in [0.0, 3.3, 12.34, 57.05] {
        let ctf = realization_to_ctf(&single_tap(delay), &grid, 1).unwrap();
        let cir = ctf_to_cir(&ctf, WindowKind::Blackman).unwrap();
        let peak = cir
            .taps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert!((peak as f64 - delay / step_ns).abs() <= 1.0, "delay {delay}: bin {peak}");
    }
}

#[test]
fn on_grid_taps_keep_their_power_within_leakage() {
    let grid = FrequencyGrid::<f64>::default();
    let step_ns = grid.delay_step() * 1e9;
    let onsets = [0.0, 35.0 * step_ns];
    let params = SvParams { horizon: 40.0 * step_ns, ..grid_params() };
    let real = generate_on_grid(&params, &onsets, 10.0 * step_ns, 3).unwrap();
    let ctf = realization_to_ctf(&real, &grid, 0).unwrap();
    let cir = ctf_to_cir(&ctf, WindowKind::Blackman).unwrap();
    let n = grid.len as f64;
    // Neighbours sit at least five bins apart, outside the main lobe, so each tap
    // picks up at most the sidelobe share of the total amplitude.
    let total: f64 = real.taps.iter().map(|t| t.gain.norm()).sum();
    let leak = total * 10f64.powf(-WindowKind::Blackman.sidelobe_range_db() / 20.0);
    for t in &real.taps {
        let bin = (t.delay_ns / step_ns).round() as usize;
        let got = cir.taps[bin].norm() / n;
        assert!((got - t.gain.norm()).abs() <= leak + 1e-9, "tap at {bin}: {got} vs {}", t.gain.norm());
    }
}

#[test]
fn noise_free_ensemble_size_does_not_matter() {
    let grid = FrequencyGrid::<f64>::new(55e9, 10e6, 201).unwrap();
    let params = SvParams { noise_power: 0.0, horizon: 15.0, cluster_horizon: Some(10.0), ..SvParams::default() };
    let real = generate_realization(&params, 5).unwrap();
    let one = synthetic_pdp(&real, &grid, WindowKind::Blackman, 1, 9).unwrap();
    let many = synthetic_pdp(&real, &grid, WindowKind::Blackman, 100, 9).unwrap();
    for (a, b) in one.power.iter().zip(&many.power) {
        assert!((a - b).abs() <= 1e-12 * a.max(1e-30));
    }
}

#[test]
fn tail_variance_shrinks_with_ensemble() {
    let grid = FrequencyGrid::<f64>::new(55e9, 10e6, 201).unwrap();
    let params = SvParams { noise_power: 1.0, horizon: 2.0, cluster_horizon: Some(0.0), ..SvParams::default() };
    let real = generate_realization(&params, 1).unwrap();
    let tail_var = |m: usize| {
        let pdp = synthetic_pdp(&real, &grid, WindowKind::Blackman, m, 17).unwrap();
        // Stay clear of the main lobe wrapping around from the first taps.
        let tail = &pdp.power[80..180];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        tail.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / tail.len() as f64 / (mean * mean)
    };
    let (v4, v64) = (tail_var(4), tail_var(64));
    let ratio = v4 / v64;
    assert!(ratio > 8.0 && ratio < 32.0, "variance ratio {ratio}");
}

#[test]
fn truth_onsets_are_quantized_onsets() {
    let grid = FrequencyGrid::<f64>::default();
    let step_ns = grid.delay_step() * 1e9;
    let params = SvParams::<f64>::default();
    let real = generate_realization(&params, 4).unwrap();
    let pdp = synthetic_pdp(&real, &grid, WindowKind::Blackman, 2, 0).unwrap();
    let truth = pdp.truth_onsets.unwrap();
    assert_eq!(truth.len(), real.cluster_onsets.len());
    for (&b, &t) in truth.iter().zip(&real.cluster_onsets) {
        assert!((b as f64 - t / step_ns).abs() <= 1.0);
    }
}
