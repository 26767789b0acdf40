use num_complex::Complex;
use pdpclust::transform::{
    average_pdp, ctf_to_cir, estimate_noise_floor, truncate_above_noise, ChannelImpulseResponse,
    ChannelTransferFunction, FrequencyGrid, PowerDelayProfile, WindowKind,
};
use pdpclust_testkit::dft;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn ctf(samples: Vec<Complex<f64>>) -> ChannelTransferFunction<f64> {
    let grid = FrequencyGrid::new(55e9, 10e6, samples.len()).unwrap();
    ChannelTransferFunction::new(samples, grid, "test").unwrap()
}

fn random_sweep(n: usize, seed: u64) -> Vec<Complex<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

fn energy(v: &[Complex<f64>]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

#[test]
fn parseval_constant_is_n() {
    for (n, seed) in [(7, 1), (64, 2), (1001, 3)] {
        let h = random_sweep(n, seed);
        let cir = ctf_to_cir(&ctf(h.clone()), WindowKind::Rectangular).unwrap();
        let lhs = energy(&cir.taps);
        let rhs = n as f64 * energy(&h);
        assert!((lhs - rhs).abs() <= 1e-10 * rhs, "n={n}: {lhs} vs {rhs}");
    }
}

#[test]
fn matches_direct_inverse_dft() {
    let h = random_sweep(101, 4);
    let cir = ctf_to_cir(&ctf(h.clone()), WindowKind::Rectangular).unwrap();
    let direct = dft::inverse_dft(&h);
    for (a, b) in cir.taps.iter().zip(&direct) {
        assert!((a - b).norm() < 1e-9);
    }
    let w = dft::blackman(101);
    let mean = w.iter().sum::<f64>() / 101.0;
    let windowed: Vec<Complex<f64>> = h.iter().zip(&w).map(|(x, &wk)| x * (wk / mean)).collect();
    let cir = ctf_to_cir(&ctf(h), WindowKind::Blackman).unwrap();
    for (a, b) in cir.taps.iter().zip(&dft::inverse_dft(&windowed)) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn shift_theorem_places_impulse() {
    let n = 1001;
    for n0 in [0usize, 1, 37, 500, 1000] {
        let h: Vec<Complex<f64>> = (0..n)
            .map(|k| Complex::from_polar(1.0, -std::f64::consts::TAU * (k * n0 % n) as f64 / n as f64))
            .collect();
        let cir = ctf_to_cir(&ctf(h), WindowKind::Rectangular).unwrap();
        let peak = cir
            .taps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, n0);
        assert!((cir.taps[n0].norm() - n as f64).abs() < 1e-8);
        let rest: f64 = cir.taps.iter().enumerate().filter(|(i, _)| *i != n0).map(|(_, c)| c.norm()).fold(0.0, f64::max);
        assert!(rest < 1e-8, "leak {rest}");
    }
}

#[test]
fn blackman_sidelobes_match_window_dtft() {
    // A flat sweep zero-padded eightfold samples the window's DTFT finely.
    let n = 128;
    let pad = 8;
    let w = dft::blackman(n);
    let mut samples = vec![Complex::new(0.0, 0.0); n * pad];
    let coeffs = WindowKind::Blackman.coefficients::<f64>(n);
    for (s, c) in samples.iter_mut().zip(&coeffs) {
        *s = Complex::new(*c, 0.0);
    }
    // Coefficients were applied by hand, so transform with the rectangular window.
    let cir = ctf_to_cir(&ctf(samples), WindowKind::Rectangular).unwrap();
    let mean = w.iter().sum::<f64>() / n as f64;
    let peak = cir.taps[0].norm();
    assert!((peak - n as f64).abs() < 1e-9);
    for (i, t) in cir.taps.iter().enumerate().take(n * pad / 2) {
        let oracle = dft::window_response(&w, i as f64 / (n * pad) as f64) / mean;
        assert!((t.norm() - oracle).abs() < 1e-9 * n as f64, "bin {i}");
    }
    // Main lobe ends three DFT bins out; the highest sidelobe sits near −58 dB.
    let first_null = (1..n * pad / 2)
        .find(|&i| cir.taps[i].norm() < cir.taps[i + 1].norm())
        .unwrap();
    assert!((first_null as f64 / pad as f64 - 3.0).abs() < 0.2, "null at {first_null}");
    let sidelobe = cir.taps[first_null..n * pad / 2].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let level = 20.0 * (sidelobe / peak).log10();
    assert!((level + 58.1).abs() < 1.0, "sidelobe {level} dB");
    assert!((WindowKind::Blackman.sidelobe_range_db() + level).abs() < 1.0);
}

#[test]
fn blackman_energy_is_bounded_by_rectangular() {
    let h = random_sweep(256, 6);
    let rect = energy(&ctf_to_cir(&ctf(h.clone()), WindowKind::Rectangular).unwrap().taps);
    let black = energy(&ctf_to_cir(&ctf(h), WindowKind::Blackman).unwrap().taps);
    let gain = WindowKind::Blackman.coefficients::<f64>(256).into_iter().fold(0.0, f64::max);
    assert!(black <= rect * gain * gain);
}

proptest! {
    #[test]
    fn transform_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, blackman in any::<bool>()) {
        let window = if blackman { WindowKind::Blackman } else { WindowKind::Rectangular };
        let h1 = random_sweep(50, seed);
        let h2 = random_sweep(50, seed + 10_000);
        let mix: Vec<Complex<f64>> = h1.iter().zip(&h2).map(|(x, y)| x * a + y * b).collect();
        let t1 = ctf_to_cir(&ctf(h1), window).unwrap().taps;
        let t2 = ctf_to_cir(&ctf(h2), window).unwrap().taps;
        let tm = ctf_to_cir(&ctf(mix), window).unwrap().taps;
        for i in 0..50 {
            let expect = t1[i] * a + t2[i] * b;
            prop_assert!((tm[i] - expect).norm() <= 1e-12 * (1.0 + expect.norm()) * 50.0);
        }
    }

    #[test]
    fn average_is_order_independent(seed in 0u64..1000, m in 1usize..12) {
        let cirs: Vec<ChannelImpulseResponse<f64>> = (0..m)
            .map(|i| ctf_to_cir(&ctf(random_sweep(40, seed * 31 + i as u64)), WindowKind::Blackman).unwrap())
            .collect();
        let forward = average_pdp(&cirs).unwrap();
        let mut reversed = cirs.clone();
        reversed.reverse();
        let backward = average_pdp(&reversed).unwrap();
        for (a, b) in forward.power.iter().zip(&backward.power) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
        prop_assert_eq!(forward.ensemble_size, m);
    }
}

#[test]
fn sign_flip_leaves_pdp_unchanged() {
    let cir = ctf_to_cir(&ctf(random_sweep(30, 8)), WindowKind::Rectangular).unwrap();
    let mut neg = cir.clone();
    for t in &mut neg.taps {
        *t = -*t;
    }
    let single = average_pdp(std::slice::from_ref(&cir)).unwrap();
    let pair = average_pdp(&[cir.clone(), neg]).unwrap();
    for (a, b) in single.power.iter().zip(&pair.power) {
        assert!((a - b).abs() <= 1e-12 * a);
    }
    for (p, t) in single.power.iter().zip(&cir.taps) {
        assert_eq!(*p, t.norm_sqr());
    }
}

#[test]
fn white_noise_pdp_mean_is_noise_power() {
    let (m, n, var) = (1000, 64, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma = (var / 2.0f64).sqrt();
    let cirs: Vec<ChannelImpulseResponse<f64>> = (0..m)
        .map(|_| ChannelImpulseResponse {
            taps: (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex::new(sigma * re, sigma * im)
                })
                .collect(),
            delay_step: 1e-10,
            window: WindowKind::Rectangular,
        })
        .collect();
    let pdp = average_pdp(&cirs).unwrap();
    // Each bin averages m exponential draws: relative spread 1/√m.
    let per_bin = 5.0 / (m as f64).sqrt();
    for p in &pdp.power {
        assert!((p - var).abs() < per_bin * var, "{p}");
    }
    let pooled = pdp.power.iter().sum::<f64>() / n as f64;
    assert!((pooled - var).abs() < 5.0 / ((m * n) as f64).sqrt() * var, "{pooled}");
}

#[test]
fn floor_of_exponential_decay_into_flat_tail() {
    let db: Vec<f64> = (0..1000).map(|i| (-0.2 * i as f64).max(-90.0)).collect();
    let mut pdp = PowerDelayProfile::from_db(&db, 1e-10).unwrap();
    let floor = estimate_noise_floor(&mut pdp, 0.2).unwrap();
    assert!((floor + 90.0).abs() <= 0.5);
}

#[test]
fn truncation_at_known_crossing() {
    // Floor −90 dB; floor + 6 dB is crossed right after bin 400.
    let db: Vec<f64> = (0..1001)
        .map(|i| if i <= 400 { -84.0 + 0.1 * (400 - i) as f64 + 0.01 } else { -90.0 })
        .collect();
    let mut pdp = PowerDelayProfile::from_db(&db, 1e-10).unwrap();
    estimate_noise_floor(&mut pdp, 0.1).unwrap();
    assert_eq!(truncate_above_noise(&pdp, 6.0, f64::INFINITY).unwrap().len(), 401);
}

#[test]
fn default_grid_and_window() {
    let grid = FrequencyGrid::<f64>::default();
    assert_eq!(grid.f_start, 55e9);
    assert_eq!(grid.f_step, 10e6);
    assert_eq!(grid.len, 1001);
    assert!((grid.frequency(1000) - 65e9).abs() < 1.0);
    assert!(grid.is_default_measurement_grid());
    assert_eq!(WindowKind::default(), WindowKind::Blackman);
}
