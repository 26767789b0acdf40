//! Synthetic test scenarios: SV parameters plus everything needed to turn a
//! realization into sweeps and a labelled power delay profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::synth::{faded_sweeps, generate_on_grid, generate_realization, noisy_sweeps, SvParams, SvRealization};
use crate::transform::{average_pdp, ctf_to_cir, ChannelTransferFunction, FrequencyGrid, PowerDelayProfile, WindowKind};

/// A scenario file is an [`SvParams`] document; the remaining keys are
/// optional and default to [`Scenario::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct Scenario<T> {
    #[serde(flatten)]
    pub params: SvParams<T>,
    #[serde(default = "FrequencyGrid::default")]
    pub grid: FrequencyGrid<T>,
    /// Delay added to every tap so the first arrival is not at bin 0.
    #[serde(default = "default_los")]
    pub los_delay_ns: T,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    /// Redraw rays and gains per ensemble member; otherwise only the noise.
    #[serde(default = "default_true")]
    pub fading: bool,
    #[serde(default)]
    pub window: WindowKind,
    /// Realizations are redrawn until they have at least this many clusters...
    #[serde(default = "default_min_clusters")]
    pub min_clusters: usize,
    /// ...at most this many...
    #[serde(default = "default_max_clusters")]
    pub max_clusters: usize,
    /// ...and every onset rises at least this far above the earlier tails.
    #[serde(default = "default_min_jump")]
    pub min_onset_jump_db: T,
}

fn default_los<T: Real>() -> T {
    T::one()
}
fn default_ensemble() -> usize {
    96
}
fn default_true() -> bool {
    true
}
fn default_min_clusters() -> usize {
    3
}
fn default_max_clusters() -> usize {
    6
}
fn default_min_jump<T: Real>() -> T {
    T::of(6.0)
}

const MAX_ATTEMPTS: u64 = 10_000;

impl<T: Real> Default for Scenario<T> {
    fn default() -> Self {
        Self {
            params: SvParams::default(),
            grid: FrequencyGrid::default(),
            los_delay_ns: default_los(),
            ensemble: default_ensemble(),
            fading: true,
            window: WindowKind::Blackman,
            min_clusters: default_min_clusters(),
            max_clusters: default_max_clusters(),
            min_onset_jump_db: default_min_jump(),
        }
    }
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        FrequencyGrid::new(self.grid.f_start, self.grid.f_step, self.grid.len)?;
        if self.ensemble == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if self.min_clusters > self.max_clusters {
            return Err(Error::param("min_clusters", "exceeds max_clusters"));
        }
        if !(self.los_delay_ns >= T::zero()) {
            return Err(Error::param("los_delay_ns", "must be non-negative"));
        }
        let window_ns = self.grid.delay_step() * T::of_usize(self.grid.len) * T::of(1e9);
        if self.params.horizon + self.los_delay_ns >= window_ns {
            return Err(Error::param(
                "horizon",
                format!("rays beyond the {window_ns} ns unambiguous delay range would alias"),
            ));
        }
        Ok(())
    }

    fn accepts(&self, real: &SvRealization<T>) -> bool {
        let n = real.cluster_onsets.len();
        n >= self.min_clusters
            && n <= self.max_clusters
            && real.onset_jumps_db().iter().all(|&j| j >= self.min_onset_jump_db)
    }

    /// First realization, in a deterministic sequence of seeds derived from
    /// `seed`, that meets the cluster-count and onset-jump conditions. The
    /// line-of-sight delay is already applied.
    pub fn realize(&self, seed: u64) -> Result<SvRealization<T>> {
        self.validate()?;
        for attempt in 0..MAX_ATTEMPTS {
            let s = seed.wrapping_mul(MAX_ATTEMPTS).wrapping_add(attempt);
            let real = generate_realization(&self.params, s)?;
            if self.accepts(&real) {
                return Ok(real.delayed(self.los_delay_ns));
            }
        }
        Err(Error::param(
            "scenario",
            "no realization met the cluster conditions; relax min/max clusters or min_onset_jump_db",
        ))
    }

    /// Like [`Scenario::realize`], with cluster onsets snapped to the delay
    /// grid and one ray per delay bin, so every tap sits on a bin centre.
    pub fn realize_on_grid(&self, seed: u64) -> Result<SvRealization<T>> {
        let real = self.realize(seed)?;
        let step_ns = self.grid.delay_step() * T::of(1e9);
        let mut onsets: Vec<T> = real
            .cluster_onsets
            .iter()
            .map(|&t| (t / step_ns).round() * step_ns)
            .collect();
        onsets.dedup();
        generate_on_grid(&self.params, &onsets, step_ns, seed)
    }

    pub fn sweeps(&self, real: &SvRealization<T>, seed: u64) -> Result<Vec<ChannelTransferFunction<T>>> {
        if self.fading {
            faded_sweeps(real, &self.grid, self.ensemble, seed)
        } else {
            noisy_sweeps(real, &self.grid, self.ensemble, seed)
        }
    }

    /// Ensemble PDP with ground-truth onset bins attached.
    pub fn pdp(&self, real: &SvRealization<T>, seed: u64) -> Result<PowerDelayProfile<T>> {
        let cirs = self
            .sweeps(real, seed)?
            .iter()
            .map(|c| ctf_to_cir(c, self.window))
            .collect::<Result<Vec<_>>>()?;
        let mut pdp = average_pdp(&cirs)?;
        pdp.truth_onsets = Some(real.onset_bins(&self.grid));
        Ok(pdp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_meets_its_conditions() {
        let sc = Scenario::<f64>::default();
        for seed in 0..10 {
            let r = sc.realize(seed).unwrap();
            assert!((3..=6).contains(&r.cluster_onsets.len()));
            assert!(r.onset_jumps_db().iter().all(|&j| j >= 6.0));
            assert_eq!(r.cluster_onsets[0], 1.0);
        }
    }

    #[test]
    fn plain_params_document_parses_as_scenario() {
        let json = r#"{"gamma_cluster":20.0,"gamma_ray":5.0,"lambda_cluster":0.05,
            "lambda_ray":10.0,"power_00":1.0,"num_clusters_max":6,"horizon":90.0,"noise_power":0.0}"#;
        let sc: Scenario<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(sc.params.horizon, 90.0);
        assert_eq!(sc.ensemble, 96);
        assert_eq!(sc.window, WindowKind::Blackman);
    }

    #[test]
    fn aliasing_horizon_rejected() {
        let mut sc = Scenario::<f64>::default();
        sc.params.horizon = 100.0;
        assert!(sc.validate().is_err());
    }
}
