//! Saleh-Valenzuela channel realizations with cluster ground truth.
//!
//! Delays are in nanoseconds throughout this module. Cluster arrivals form a
//! Poisson process of rate Λ starting at `T_0 = 0`; rays inside a cluster
//! arrive at rate λ starting at the cluster onset. The mean power of ray `k`
//! in cluster `l` is `P00·exp(−T_l/Γ)·exp(−τ_kl/γ)`, amplitudes are Rayleigh
//! about that mean and phases are uniform.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transform::{
    average_pdp, ctf_to_cir, ChannelTransferFunction, FrequencyGrid, PowerDelayProfile, WindowKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SvParams<T> {
    /// Cluster power-delay time constant Γ, ns.
    pub gamma_cluster: T,
    /// Ray power-delay time constant γ, ns.
    pub gamma_ray: T,
    /// Cluster arrival rate Λ, 1/ns.
    pub lambda_cluster: T,
    /// Ray arrival rate λ, 1/ns.
    pub lambda_ray: T,
    /// Mean power of the first ray of the first cluster (linear).
    pub power_00: T,
    pub num_clusters_max: usize,
    /// Latest ray delay, ns.
    pub horizon: T,
    /// Linear complex noise variance per frequency point.
    pub noise_power: T,
    /// Latest cluster onset, ns. Defaults to `horizon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_horizon: Option<T>,
}

impl<T: Real> SvParams<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_cluster", self.gamma_cluster),
            ("gamma_ray", self.gamma_ray),
            ("lambda_cluster", self.lambda_cluster),
            ("lambda_ray", self.lambda_ray),
            ("power_00", self.power_00),
            ("horizon", self.horizon),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.noise_power >= T::zero()) || !self.noise_power.is_finite() {
            return Err(Error::param("noise_power", "must be non-negative"));
        }
        if let Some(ch) = self.cluster_horizon {
            if !(ch >= T::zero()) || ch > self.horizon {
                return Err(Error::param("cluster_horizon", "must lie in [0, horizon]"));
            }
        }
        Ok(())
    }

    pub fn cluster_horizon(&self) -> T {
        self.cluster_horizon.unwrap_or(self.horizon)
    }

    /// Mean ray power `P00·exp(−T/Γ)·exp(−τ/γ)`.
    pub fn mean_tap_power(&self, cluster_delay: T, ray_delay: T) -> T {
        self.power_00 * (-cluster_delay / self.gamma_cluster).exp() * (-ray_delay / self.gamma_ray).exp()
    }
}

impl<T: Real> Default for SvParams<T> {
    /// Cabin-scale defaults: Γ = 20 ns, γ = 5 ns, Λ = 0.05/ns, dense rays
    /// (λ = 5/ns, about one per two 100 ps delay bins), clusters within the
    /// first 50 ns and rays out to 90 ns.
    fn default() -> Self {
        Self {
            gamma_cluster: T::of(20.0),
            gamma_ray: T::of(5.0),
            lambda_cluster: T::of(0.05),
            lambda_ray: T::of(5.0),
            power_00: T::one(),
            num_clusters_max: 6,
            horizon: T::of(90.0),
            noise_power: T::of(0.3),
            cluster_horizon: Some(T::of(50.0)),
        }
    }
}

/// How ray delays inside a cluster are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RayArrivals<T> {
    /// Poisson process of rate λ.
    Poisson,
    /// Rays every `spacing` ns from the onset.
    Grid { spacing: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tap<T> {
    pub delay_ns: T,
    pub gain: Complex<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SvRealization<T> {
    pub taps: Vec<Tap<T>>,
    /// Cluster onsets `T_l`, ns, strictly increasing.
    pub cluster_onsets: Vec<T>,
    /// Cluster index of each tap.
    pub ray_labels: Vec<usize>,
    pub params: SvParams<T>,
    pub arrivals: RayArrivals<T>,
}

impl<T: Real> SvRealization<T> {
    /// Shifts every delay by `offset_ns` (for a non-zero line-of-sight delay).
    pub fn delayed(&self, offset_ns: T) -> Self {
        let mut out = self.clone();
        for t in &mut out.taps {
            t.delay_ns += offset_ns;
        }
        for o in &mut out.cluster_onsets {
            *o += offset_ns;
        }
        out
    }

    /// Onsets rounded to delay-bin indices of `grid`, dropping any past the end.
    pub fn onset_bins(&self, grid: &FrequencyGrid<T>) -> Vec<usize> {
        let step_ns = grid.delay_step() * T::of(1e9);
        let mut bins: Vec<usize> = self
            .cluster_onsets
            .iter()
            .filter_map(|&t| (t / step_ns).round().to_usize())
            .filter(|&b| b < grid.len)
            .collect();
        bins.dedup();
        bins
    }

    /// Per-bin cluster label for every bin of `grid` (`bin_index, cluster_id`).
    pub fn bin_labels(&self, grid: &FrequencyGrid<T>) -> Vec<usize> {
        let onsets = self.onset_bins(grid);
        let mut labels = Vec::with_capacity(grid.len);
        let mut current = 0;
        for b in 0..grid.len {
            while current + 1 < onsets.len() && onsets[current + 1] <= b {
                current += 1;
            }
            labels.push(current);
        }
        labels
    }

    /// Mean-power profile of the ground truth evaluated at the onset of each
    /// cluster: returns the rise in dB over the tails of earlier clusters.
    pub fn onset_jumps_db(&self) -> Vec<T> {
        let p = &self.params;
        let base = self.cluster_onsets.first().copied().unwrap_or_else(T::zero);
        let rel: Vec<T> = self.cluster_onsets.iter().map(|&t| t - base).collect();
        (1..rel.len())
            .map(|l| {
                let fresh = p.mean_tap_power(rel[l], T::zero());
                let tails: T = (0..l).map(|j| p.mean_tap_power(rel[j], rel[l] - rel[j])).sum();
                ((fresh + tails) / tails).to_db()
            })
            .collect()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn exp_sample<T: Real>(rng: &mut ChaCha8Rng, rate: T) -> T {
    // Rates are validated positive and finite.
    let d = Exp::new(rate.as_f64()).expect("positive rate");
    T::of(d.sample(rng))
}

fn draw_gain<T: Real>(rng: &mut ChaCha8Rng, mean_power: T) -> Complex<T> {
    let power: f64 = Exp1.sample(rng);
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    Complex::from_polar(T::of((power * mean_power.as_f64()).sqrt()), T::of(phase))
}

fn ray_delays<T: Real>(
    params: &SvParams<T>,
    onsets: &[T],
    arrivals: RayArrivals<T>,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, T, T)> {
    let mut rays = Vec::new();
    for (l, &t_l) in onsets.iter().enumerate() {
        let mut tau = T::zero();
        let mut k = 0usize;
        while t_l + tau <= params.horizon {
            rays.push((l, t_l, tau));
            k += 1;
            tau = match arrivals {
                RayArrivals::Poisson => tau + exp_sample(rng, params.lambda_ray),
                RayArrivals::Grid { spacing } => T::of_usize(k) * spacing,
            };
        }
    }
    rays
}

fn assemble<T: Real>(
    params: &SvParams<T>,
    onsets: Vec<T>,
    arrivals: RayArrivals<T>,
    rng: &mut ChaCha8Rng,
) -> Result<SvRealization<T>> {
    let rays = ray_delays(params, &onsets, arrivals, rng);
    if rays.is_empty() {
        return Err(Error::EmptyRealization);
    }
    let mut taps = Vec::with_capacity(rays.len());
    let mut labels = Vec::with_capacity(rays.len());
    for (l, t_l, tau) in rays {
        taps.push(Tap {
            delay_ns: t_l + tau,
            gain: draw_gain(rng, params.mean_tap_power(t_l, tau)),
        });
        labels.push(l);
    }
    Ok(SvRealization {
        taps,
        cluster_onsets: onsets,
        ray_labels: labels,
        params: *params,
        arrivals,
    })
}

/// Draws a realization with Poisson cluster and ray arrivals.
pub fn generate_realization<T: Real>(params: &SvParams<T>, seed: u64) -> Result<SvRealization<T>> {
    params.validate()?;
    let mut rng = rng_for(seed, 0);
    let mut onsets = Vec::new();
    let mut t = T::zero();
    while onsets.len() < params.num_clusters_max && t <= params.cluster_horizon() {
        onsets.push(t);
        t += exp_sample(&mut rng, params.lambda_cluster);
    }
    assemble(params, onsets, RayArrivals::Poisson, &mut rng)
}

/// Draws gains for fixed cluster onsets and rays every `ray_spacing` ns.
pub fn generate_on_grid<T: Real>(
    params: &SvParams<T>,
    onsets: &[T],
    ray_spacing: T,
    seed: u64,
) -> Result<SvRealization<T>> {
    params.validate()?;
    if !(ray_spacing > T::zero()) {
        return Err(Error::param("ray_spacing", "must be positive"));
    }
    if onsets.first().is_some_and(|&t| t < T::zero()) || onsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("onsets", "must be non-negative and strictly increasing"));
    }
    let onsets: Vec<T> = onsets
        .iter()
        .copied()
        .filter(|&t| t <= params.horizon)
        .take(params.num_clusters_max)
        .collect();
    let mut rng = rng_for(seed, 0);
    assemble(params, onsets, RayArrivals::Grid { spacing: ray_spacing }, &mut rng)
}

/// Redraws rays and gains inside the realization's fixed clusters.
pub fn redraw_rays<T: Real>(real: &SvRealization<T>, seed: u64) -> Result<SvRealization<T>> {
    let mut rng = rng_for(seed, 1);
    let base = real.cluster_onsets.first().copied().unwrap_or_else(T::zero);
    let rel: Vec<T> = real.cluster_onsets.iter().map(|&t| t - base).collect();
    let mut out = assemble(&real.params, rel, real.arrivals, &mut rng)?;
    if base != T::zero() {
        out = out.delayed(base);
    }
    Ok(out)
}

fn clean_response<T: Real>(real: &SvRealization<T>, grid: &FrequencyGrid<T>) -> Vec<Complex<f64>> {
    const REANCHOR: usize = 64;
    let f0 = grid.f_start.as_f64();
    let df = grid.f_step.as_f64();
    let mut h = vec![Complex::new(0.0, 0.0); grid.len];
    for tap in &real.taps {
        let tau = tap.delay_ns.as_f64() * 1e-9;
        let g = Complex::new(tap.gain.re.as_f64(), tap.gain.im.as_f64());
        let step = Complex::from_polar(1.0, -std::f64::consts::TAU * df * tau);
        for (c, chunk) in h.chunks_mut(REANCHOR).enumerate() {
            let turns = ((f0 + (c * REANCHOR) as f64 * df) * tau).fract();
            let mut phasor = g * Complex::from_polar(1.0, -std::f64::consts::TAU * turns);
            for hk in chunk {
                *hk += phasor;
                phasor *= step;
            }
        }
    }
    h
}

fn add_noise<T: Real>(clean: &[Complex<f64>], noise_power: f64, rng: &mut ChaCha8Rng) -> Vec<Complex<T>> {
    let sigma = (noise_power / 2.0).sqrt();
    clean
        .iter()
        .map(|h| {
            let (nr, ni): (f64, f64) = if sigma > 0.0 {
                (StandardNormal.sample(rng), StandardNormal.sample(rng))
            } else {
                (0.0, 0.0)
            };
            Complex::new(T::of(h.re + sigma * nr), T::of(h.im + sigma * ni))
        })
        .collect()
}

/// Forward model `H(k) = Σ β·exp(−j2π f_k τ)` plus complex Gaussian noise of
/// variance `noise_power` per point.
pub fn realization_to_ctf<T: Real>(
    real: &SvRealization<T>,
    grid: &FrequencyGrid<T>,
    seed: u64,
) -> Result<ChannelTransferFunction<T>> {
    let grid = FrequencyGrid::new(grid.f_start, grid.f_step, grid.len)?;
    let clean = clean_response(real, &grid);
    let mut rng = rng_for(seed, 2);
    let samples = add_noise(&clean, real.params.noise_power.as_f64(), &mut rng);
    ChannelTransferFunction::new(samples, grid, format!("synthetic-{seed}"))
}

fn member_seed(seed: u64, m: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(m as u64 + 1)
}

fn finish_pdp<T: Real>(
    real: &SvRealization<T>,
    grid: &FrequencyGrid<T>,
    ctfs: Vec<ChannelTransferFunction<T>>,
    window: WindowKind,
) -> Result<PowerDelayProfile<T>> {
    let cirs = ctfs
        .iter()
        .map(|c| ctf_to_cir(c, window))
        .collect::<Result<Vec<_>>>()?;
    let mut pdp = average_pdp(&cirs)?;
    pdp.truth_onsets = Some(real.onset_bins(grid));
    Ok(pdp)
}

/// Sweeps of a fixed channel under `ensemble` independent noise draws.
pub fn noisy_sweeps<T: Real>(
    real: &SvRealization<T>,
    grid: &FrequencyGrid<T>,
    ensemble: usize,
    seed: u64,
) -> Result<Vec<ChannelTransferFunction<T>>> {
    if ensemble == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let grid = FrequencyGrid::new(grid.f_start, grid.f_step, grid.len)?;
    let clean = clean_response(real, &grid);
    (0..ensemble)
        .map(|m| {
            let mut rng = rng_for(member_seed(seed, m), 2);
            let samples = add_noise(&clean, real.params.noise_power.as_f64(), &mut rng);
            ChannelTransferFunction::new(samples, grid, format!("synthetic-{seed}-{m}"))
        })
        .collect()
}

/// Sweeps whose rays and gains are redrawn per member inside the fixed
/// cluster structure (small-scale fading), each with fresh noise.
pub fn faded_sweeps<T: Real>(
    real: &SvRealization<T>,
    grid: &FrequencyGrid<T>,
    ensemble: usize,
    seed: u64,
) -> Result<Vec<ChannelTransferFunction<T>>> {
    if ensemble == 0 {
        return Err(Error::EmptyEnsemble);
    }
    (0..ensemble)
        .map(|m| {
            let s = member_seed(seed, m);
            let member = redraw_rays(real, s)?;
            let mut ctf = realization_to_ctf(&member, grid, s)?;
            ctf.sweep_id = format!("faded-{seed}-{m}");
            Ok(ctf)
        })
        .collect()
}

/// Ensemble PDP of a fixed channel over independent noise draws, with the
/// ground-truth onsets attached as bin indices.
pub fn synthetic_pdp<T: Real>(
    real: &SvRealization<T>,
    grid: &FrequencyGrid<T>,
    window: WindowKind,
    ensemble: usize,
    seed: u64,
) -> Result<PowerDelayProfile<T>> {
    let ctfs = noisy_sweeps(real, grid, ensemble, seed)?;
    finish_pdp(real, grid, ctfs, window)
}

/// Ensemble PDP over small-scale fading draws (see [`faded_sweeps`]).
pub fn faded_pdp<T: Real>(
    real: &SvRealization<T>,
    grid: &FrequencyGrid<T>,
    window: WindowKind,
    ensemble: usize,
    seed: u64,
) -> Result<PowerDelayProfile<T>> {
    let ctfs = faded_sweeps(real, grid, ensemble, seed)?;
    finish_pdp(real, grid, ctfs, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_ray_params() -> SvParams<f64> {
        SvParams {
            num_clusters_max: 1,
            horizon: 1e-6,
            lambda_ray: 1e-3,
            noise_power: 0.0,
            cluster_horizon: None,
            ..SvParams::default()
        }
    }

    #[test]
    fn single_ray_at_origin() {
        let r = generate_realization(&single_ray_params(), 3).unwrap();
        assert_eq!(r.taps.len(), 1);
        assert_eq!(r.taps[0].delay_ns, 0.0);
        assert_eq!(r.cluster_onsets, vec![0.0]);
        assert_relative_eq!(single_ray_params().mean_tap_power(0.0, 0.0), 1.0);
    }

    #[test]
    fn law_at_one_time_constant_each() {
        let p = SvParams::<f64>::default();
        assert_relative_eq!(p.mean_tap_power(20.0, 5.0), (-2.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = SvParams::<f64>::default();
        p.gamma_ray = 0.0;
        assert!(generate_realization(&p, 0).is_err());
        let mut p = SvParams::<f64>::default();
        p.noise_power = -1.0;
        assert!(generate_realization(&p, 0).is_err());
        let mut p = SvParams::<f64>::default();
        p.num_clusters_max = 0;
        assert_eq!(generate_realization(&p, 0), Err(Error::EmptyRealization));
    }

    #[test]
    fn realization_invariants() {
        for seed in 0..20 {
            let r = generate_realization(&SvParams::<f64>::default(), seed).unwrap();
            assert!(r.cluster_onsets[0] == 0.0);
            assert!(r.cluster_onsets.windows(2).all(|w| w[1] > w[0]));
            for (tap, &l) in r.taps.iter().zip(&r.ray_labels) {
                assert!(tap.delay_ns >= r.cluster_onsets[l]);
                assert!(tap.delay_ns <= r.params.horizon);
            }
        }
    }

    #[test]
    fn same_seed_same_realization() {
        let p = SvParams::<f64>::default();
        assert_eq!(generate_realization(&p, 42), generate_realization(&p, 42));
        assert_ne!(generate_realization(&p, 42), generate_realization(&p, 43));
    }

    #[test]
    fn zero_delay_tap_is_flat() {
        let r = generate_on_grid(&single_ray_params(), &[0.0], 1.0, 0).unwrap();
        let mut r = r;
        r.taps[0].gain = Complex::new(1.0, 0.0);
        let ctf = realization_to_ctf(&r, &FrequencyGrid::default(), 0).unwrap();
        for h in &ctf.samples {
            assert_relative_eq!(h.re, 1.0, epsilon = 1e-12);
            assert!(h.im.abs() < 1e-12);
        }
    }

    #[test]
    fn two_path_ripple_period() {
        let tau0 = 2.0; // ns: ripple period 500 MHz = 50 grid steps
        let mut r = generate_on_grid(&single_ray_params(), &[0.0], 1.0, 0).unwrap();
        r.taps = vec![
            Tap { delay_ns: 0.0, gain: Complex::new(1.0, 0.0) },
            Tap { delay_ns: tau0, gain: Complex::new(1.0, 0.0) },
        ];
        r.ray_labels = vec![0, 0];
        let grid = FrequencyGrid::new(0.0, 10e6, 201).unwrap();
        let ctf = realization_to_ctf(&r, &grid, 0).unwrap();
        for k in 0..150 {
            assert_relative_eq!(ctf.samples[k].norm(), ctf.samples[k + 50].norm(), epsilon = 1e-9);
        }
        // Nulls half a period away from the peaks.
        assert!(ctf.samples[25].norm() < 1e-9);
        assert_relative_eq!(ctf.samples[0].norm(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_free_ensemble_is_deterministic() {
        let p = SvParams { noise_power: 0.0, ..SvParams::<f64>::default() };
        let r = generate_realization(&p, 5).unwrap();
        let grid = FrequencyGrid::new(55e9, 10e6, 256).unwrap();
        let a = synthetic_pdp(&r, &grid, WindowKind::Blackman, 1, 1).unwrap();
        let b = synthetic_pdp(&r, &grid, WindowKind::Blackman, 100, 1).unwrap();
        for (x, y) in a.power.iter().zip(&b.power) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
        assert_eq!(b.ensemble_size, 100);
    }

    #[test]
    fn delayed_shifts_onsets_and_labels() {
        let r = generate_on_grid(&SvParams::<f64>::default(), &[0.0, 20.0], 1.0, 0).unwrap();
        let d = r.delayed(1.0);
        assert_eq!(d.cluster_onsets, vec![1.0, 21.0]);
        let grid = FrequencyGrid::<f64>::default();
        assert_eq!(d.onset_bins(&grid), vec![10, 210]);
        let labels = d.bin_labels(&grid);
        assert_eq!(labels[209], 0);
        assert_eq!(labels[210], 1);
    }

    #[test]
    fn onset_jump_for_well_spaced_clusters() {
        let p = SvParams::<f64>::default();
        let r = generate_on_grid(&p, &[0.0, 20.0], 1.0, 0).unwrap();
        let jump = r.onset_jumps_db()[0];
        // 10·log10(1 + e^{20(1/γ − 1/Γ)}) with Γ = 20, γ = 5.
        assert_relative_eq!(jump, 10.0 * (1.0 + 3.0f64.exp()).log10(), max_relative = 1e-12);
    }
}
