//! Recovers Saleh-Valenzuela decay constants from a segmented profile.
//!
//! Within a cluster the mean power decays as `exp(−τ/γ)`, a straight line of
//! slope `−10·log10(e)/γ` dB/ns. Cluster onset powers decay the same way in
//! onset delay with constant Γ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::ClusterPartition;
use crate::scalar::Real;
use crate::transform::PowerDelayProfile;

/// Smallest segment, in bins, that is fitted.
pub const MIN_FIT_BINS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Ok,
    Unfittable,
    NonDecaying,
}

/// Which bin of a segment stands for the cluster's onset power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeakMode {
    #[default]
    FirstBin,
    MaxBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit<T> {
    pub slope: T,
    /// Value of the line at the first x.
    pub intercept: T,
    /// `1 − SS_res/SS_tot`, clamped to [0, 1]; 1 for a perfect fit of constant data.
    pub r2: T,
    pub rss: T,
}

/// Ordinary least squares `y ≈ a + b·(x − x_0)`.
pub fn ols<T: Real>(x: &[T], y: &[T]) -> LineFit<T> {
    let n = T::of_usize(x.len());
    let x0 = x[0];
    let mx = x.iter().map(|&v| v - x0).sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - x0 - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    let intercept = my - slope * mx;
    let rss: T = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = yi - intercept - slope * (xi - x0);
            e * e
        })
        .sum();
    let tiny = T::epsilon() * (T::one() + syy);
    let r2 = if syy > tiny {
        (T::one() - rss / syy).max(T::zero()).min(T::one())
    } else if rss <= tiny {
        T::one()
    } else {
        T::zero()
    };
    LineFit {
        slope,
        intercept,
        r2,
        rss,
    }
}

/// `−10·log10(e)/slope`: the time constant of a decay with the given dB/ns slope.
pub fn time_constant_from_slope<T: Real>(slope_db_per_ns: T) -> T {
    -T::of(10.0) * T::LOG10_E() / slope_db_per_ns
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayFit<T> {
    pub segment: usize,
    pub bins: usize,
    pub onset_delay_ns: T,
    pub slope_db_per_ns: T,
    /// Fitted power at the segment onset, dB.
    pub intercept_db: T,
    pub r2: T,
    /// γ̂ in ns when `status` is `Ok`.
    pub gamma_ray_ns: Option<T>,
    pub status: FitStatus,
    pub rss: T,
}

fn check_lengths<T: Real>(pdp: &PowerDelayProfile<T>, partition: &ClusterPartition) -> Result<()> {
    if partition.len() != pdp.len() {
        return Err(Error::LengthMismatch {
            expected: pdp.len(),
            found: partition.len(),
        });
    }
    Ok(())
}

/// Per-segment OLS of dB power against delay.
pub fn fit_ray_decay<T: Real>(pdp: &PowerDelayProfile<T>, partition: &ClusterPartition) -> Result<Vec<RayFit<T>>> {
    check_lengths(pdp, partition)?;
    let db = pdp.power_db();
    let fits = partition
        .segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let onset = pdp.delay_ns(seg.start);
            if seg.len() < MIN_FIT_BINS {
                return RayFit {
                    segment: i,
                    bins: seg.len(),
                    onset_delay_ns: onset,
                    slope_db_per_ns: T::nan(),
                    intercept_db: T::nan(),
                    r2: T::zero(),
                    gamma_ray_ns: None,
                    status: FitStatus::Unfittable,
                    rss: T::nan(),
                };
            }
            let x: Vec<T> = (seg.start..seg.end).map(|b| pdp.delay_ns(b)).collect();
            let line = ols(&x, &db[seg.start..seg.end]);
            let decaying = line.slope < T::zero() && line.slope.is_finite();
            RayFit {
                segment: i,
                bins: seg.len(),
                onset_delay_ns: onset,
                slope_db_per_ns: line.slope,
                intercept_db: line.intercept,
                r2: line.r2,
                gamma_ray_ns: decaying.then(|| time_constant_from_slope(line.slope)),
                status: if decaying { FitStatus::Ok } else { FitStatus::NonDecaying },
                rss: line.rss,
            }
        })
        .collect();
    Ok(fits)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterDecayFit<T> {
    /// Γ̂ in ns; `+inf` when onset powers do not decay.
    pub gamma_cluster_ns: T,
    /// Fitted onset power at zero delay, dB.
    pub power_00_db: T,
    pub r2: T,
    pub clusters_used: usize,
    pub decaying: bool,
}

/// OLS of per-cluster onset power (dB) against onset delay. Segments shorter
/// than [`MIN_FIT_BINS`] are skipped.
pub fn fit_cluster_decay<T: Real>(
    pdp: &PowerDelayProfile<T>,
    partition: &ClusterPartition,
    peak: PeakMode,
) -> Result<ClusterDecayFit<T>> {
    check_lengths(pdp, partition)?;
    let db = pdp.power_db();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for seg in partition.segments.iter().filter(|s| s.len() >= MIN_FIT_BINS) {
        let bin = match peak {
            PeakMode::FirstBin => seg.start,
            PeakMode::MaxBin => (seg.start..seg.end)
                .fold(seg.start, |best, b| if db[b] > db[best] { b } else { best }),
        };
        x.push(pdp.delay_ns(seg.start));
        y.push(db[bin]);
    }
    if x.len() < 2 {
        return Err(Error::InsufficientClusters { found: x.len() });
    }
    let line = ols(&x, &y);
    let decaying = line.slope < T::zero();
    Ok(ClusterDecayFit {
        gamma_cluster_ns: if decaying {
            time_constant_from_slope(line.slope)
        } else {
            T::infinity()
        },
        power_00_db: line.intercept - line.slope * x[0],
        r2: line.r2,
        clusters_used: x.len(),
        decaying,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub peak: PeakMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            peak: PeakMode::FirstBin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvFit<T> {
    pub gamma_cluster_hat: Option<T>,
    pub power_00_hat_db: Option<T>,
    pub cluster_decay_r2: Option<T>,
    /// Per-segment γ̂ (None where unfittable or non-decaying).
    pub gamma_ray_per_cluster: Vec<Option<T>>,
    /// Segment-length weighted mean of the valid per-cluster γ̂.
    pub gamma_ray_hat: Option<T>,
    pub onset_delays_ns: Vec<T>,
    pub per_cluster_r2: Vec<T>,
    pub statuses: Vec<FitStatus>,
    /// RMS of within-cluster residuals over all fitted segments, dB.
    pub residual_db: T,
    /// Why the inter-cluster fit is missing, if it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_fit_note: Option<String>,
}

pub fn fit_sv<T: Real>(pdp: &PowerDelayProfile<T>, partition: &ClusterPartition, cfg: &FitConfig) -> Result<SvFit<T>> {
    let rays = fit_ray_decay(pdp, partition)?;
    let mut weight = T::zero();
    let mut acc = T::zero();
    let mut rss = T::zero();
    let mut bins = 0usize;
    for r in &rays {
        if let Some(g) = r.gamma_ray_ns {
            let w = T::of_usize(r.bins);
            acc += w * g;
            weight += w;
        }
        if r.status != FitStatus::Unfittable {
            rss += r.rss;
            bins += r.bins;
        }
    }
    let (gamma_cluster_hat, power_00_hat_db, cluster_decay_r2, note) =
        match fit_cluster_decay(pdp, partition, cfg.peak) {
            Ok(f) if f.decaying => (Some(f.gamma_cluster_ns), Some(f.power_00_db), Some(f.r2), None),
            Ok(f) => (
                Some(f.gamma_cluster_ns),
                Some(f.power_00_db),
                Some(f.r2),
                Some("no inter-cluster decay".to_string()),
            ),
            Err(Error::InsufficientClusters { found }) => {
                (None, None, None, Some(format!("insufficient clusters ({found})")))
            }
            Err(e) => return Err(e),
        };
    Ok(SvFit {
        gamma_cluster_hat,
        power_00_hat_db,
        cluster_decay_r2,
        gamma_ray_per_cluster: rays.iter().map(|r| r.gamma_ray_ns).collect(),
        gamma_ray_hat: (weight > T::zero()).then(|| acc / weight),
        onset_delays_ns: rays.iter().map(|r| r.onset_delay_ns).collect(),
        per_cluster_r2: rays.iter().map(|r| r.r2).collect(),
        statuses: rays.iter().map(|r| r.status).collect(),
        residual_db: if bins > 0 { (rss / T::of_usize(bins)).sqrt() } else { T::nan() },
        cluster_fit_note: note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Method;
    use approx::assert_relative_eq;

    const STEP: f64 = 0.1e-9;

    fn profile(db: &[f64]) -> PowerDelayProfile<f64> {
        PowerDelayProfile::from_db(db, STEP).unwrap()
    }

    #[test]
    fn exact_exponential_cluster() {
        let gamma = 5.0;
        let db: Vec<f64> = (0..200).map(|i| -10.0 * std::f64::consts::LOG10_E * (i as f64 * 0.1) / gamma).collect();
        let part = ClusterPartition::from_onsets(vec![0], 200, Method::Sparse).unwrap();
        let fits = fit_ray_decay(&profile(&db), &part).unwrap();
        assert_relative_eq!(fits[0].gamma_ray_ns.unwrap(), gamma, max_relative = 1e-9);
        assert_relative_eq!(fits[0].r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_segment_is_non_decaying() {
        let part = ClusterPartition::from_onsets(vec![0], 10, Method::Sparse).unwrap();
        let fits = fit_ray_decay(&profile(&[-20.0; 10]), &part).unwrap();
        assert_eq!(fits[0].status, FitStatus::NonDecaying);
        assert_eq!(fits[0].gamma_ray_ns, None);
    }

    #[test]
    fn short_segment_is_unfittable() {
        let part = ClusterPartition::from_onsets(vec![0, 8], 10, Method::Sparse).unwrap();
        let db: Vec<f64> = (0..10).map(|i| -(i as f64)).collect();
        let fits = fit_ray_decay(&profile(&db), &part).unwrap();
        assert_eq!(fits[1].status, FitStatus::Unfittable);
        assert_eq!(fits[0].status, FitStatus::Ok);
    }

    #[test]
    fn single_cluster_is_insufficient() {
        let part = ClusterPartition::from_onsets(vec![0], 10, Method::Sparse).unwrap();
        assert_eq!(
            fit_cluster_decay(&profile(&[-1.0; 10]), &part, PeakMode::FirstBin),
            Err(Error::InsufficientClusters { found: 1 })
        );
    }

    #[test]
    fn equal_power_clusters_have_no_decay() {
        let db: Vec<f64> = (0..30).map(|i| -((i % 10) as f64)).collect();
        let part = ClusterPartition::from_onsets(vec![0, 10, 20], 30, Method::Sparse).unwrap();
        let f = fit_cluster_decay(&profile(&db), &part, PeakMode::FirstBin).unwrap();
        assert!(f.gamma_cluster_ns.is_infinite());
        assert!(!f.decaying);
    }

    #[test]
    fn partition_length_must_match() {
        let part = ClusterPartition::from_onsets(vec![0], 9, Method::Sparse).unwrap();
        assert!(fit_ray_decay(&profile(&[-1.0; 10]), &part).is_err());
    }
}
