//! Frequency sweep to delay domain: windowed inverse DFT, ensemble power
//! delay profiles and noise-floor handling.
//!
//! The inverse transform uses the unnormalised kernel
//! `h(n) = Σ_k w(k)·H(k)·exp(+j2πkn/N)` with no `1/N` prefactor. The window
//! is divided by its mean so a flat sweep of unit magnitude yields an impulse
//! of height `N`. Clustering works on dB values, where this constant is an
//! additive offset.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{median, pairwise_sum, Real};

/// Default sweep start, 55 GHz.
pub const DEFAULT_F_START_HZ: f64 = 55.0e9;
/// Default sweep step, 10 MHz.
pub const DEFAULT_F_STEP_HZ: f64 = 10.0e6;
/// 55–65 GHz inclusive at 10 MHz.
pub const DEFAULT_SWEEP_POINTS: usize = 1001;

/// Relative tolerance on spacing when validating a frequency list.
pub const GRID_SPACING_RTOL: f64 = 1e-6;

/// A uniform frequency grid `f_k = f_start + k·f_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid<T> {
    pub f_start: T,
    pub f_step: T,
    pub len: usize,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(f_start: T, f_step: T, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::param("len", "a sweep needs at least 2 points"));
        }
        if !(f_step > T::zero()) || !f_step.is_finite() {
            return Err(Error::param("f_step", "must be positive and finite"));
        }
        if !f_start.is_finite() {
            return Err(Error::param("f_start", "must be finite"));
        }
        Ok(Self {
            f_start,
            f_step,
            len,
        })
    }

    /// Validates that `freqs` is strictly increasing with uniform spacing.
    pub fn from_frequencies(freqs: &[T]) -> Result<Self> {
        if freqs.len() < 2 {
            return Err(Error::param("len", "a sweep needs at least 2 points"));
        }
        let step = freqs[1] - freqs[0];
        if !(step > T::zero()) {
            return Err(Error::NonUniformGrid { index: 1 });
        }
        let tol = T::of(GRID_SPACING_RTOL) * step;
        for (i, w) in freqs.windows(2).enumerate().skip(1) {
            if ((w[1] - w[0]) - step).abs() > tol {
                return Err(Error::NonUniformGrid { index: i + 1 });
            }
        }
        // Average step over the whole span is more accurate than the first gap.
        let span = freqs[freqs.len() - 1] - freqs[0];
        Self::new(freqs[0], span / T::of_usize(freqs.len() - 1), freqs.len())
    }

    pub fn frequency(&self, k: usize) -> T {
        self.f_start + T::of_usize(k) * self.f_step
    }

    /// Delay resolution `1/(N·Δf)` in seconds.
    pub fn delay_step(&self) -> T {
        T::one() / (T::of_usize(self.len) * self.f_step)
    }

    /// True when this grid is the 55–65 GHz, 10 MHz, 1001-point default.
    pub fn is_default_measurement_grid(&self) -> bool {
        let d = Self::default();
        self.len == d.len
            && ((self.f_start - d.f_start) / d.f_step).abs() < T::of(1e-3)
            && ((self.f_step - d.f_step) / d.f_step).abs() < T::of(GRID_SPACING_RTOL)
    }
}

impl<T: Real> Default for FrequencyGrid<T> {
    fn default() -> Self {
        Self {
            f_start: T::of(DEFAULT_F_START_HZ),
            f_step: T::of(DEFAULT_F_STEP_HZ),
            len: DEFAULT_SWEEP_POINTS,
        }
    }
}

/// Complex forward-transmission sweep `H(k) = s21(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTransferFunction<T> {
    pub samples: Vec<Complex<T>>,
    pub f_start: T,
    pub f_step: T,
    pub sweep_id: String,
}

impl<T: Real> ChannelTransferFunction<T> {
    pub fn new(
        samples: Vec<Complex<T>>,
        grid: FrequencyGrid<T>,
        sweep_id: impl Into<String>,
    ) -> Result<Self> {
        if samples.len() != grid.len {
            return Err(Error::LengthMismatch {
                expected: grid.len,
                found: samples.len(),
            });
        }
        Ok(Self {
            samples,
            f_start: grid.f_start,
            f_step: grid.f_step,
            sweep_id: sweep_id.into(),
        })
    }

    pub fn grid(&self) -> FrequencyGrid<T> {
        FrequencyGrid {
            f_start: self.f_start,
            f_step: self.f_step,
            len: self.samples.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        FrequencyGrid::new(self.f_start, self.f_step, self.samples.len()).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Blackman,
    Rectangular,
}

impl WindowKind {
    /// Level of the highest sidelobe below the main lobe, dB. Bins further
    /// than this below a profile's peak may hold leakage rather than signal.
    pub fn sidelobe_range_db(self) -> f64 {
        match self {
            WindowKind::Rectangular => 13.26,
            WindowKind::Blackman => 58.11,
        }
    }

    /// Window coefficients of length `n`, divided by their mean.
    ///
    /// Blackman is the symmetric three-term form (0.42, 0.5, 0.08).
    pub fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        let raw: Vec<T> = match self {
            WindowKind::Rectangular => vec![T::one(); n],
            WindowKind::Blackman => {
                if n == 1 {
                    vec![T::one()]
                } else {
                    let denom = T::of_usize(n - 1);
                    let two_pi = T::TAU();
                    (0..n)
                        .map(|k| {
                            let x = two_pi * T::of_usize(k) / denom;
                            T::of(0.42) - T::of(0.5) * x.cos() + T::of(0.08) * (x + x).cos()
                        })
                        .collect()
                }
            }
        };
        let mean = pairwise_sum(&raw) / T::of_usize(n);
        raw.into_iter().map(|w| w / mean).collect()
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowKind::Blackman => "blackman",
            WindowKind::Rectangular => "rectangular",
        })
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blackman" => Ok(WindowKind::Blackman),
            "rectangular" | "rect" | "none" => Ok(WindowKind::Rectangular),
            other => Err(Error::param(
                "window",
                format!("unknown window `{other}` (expected blackman | rectangular)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse<T> {
    pub taps: Vec<Complex<T>>,
    /// Seconds per delay bin, `1/(N·f_step)`.
    pub delay_step: T,
    pub window: WindowKind,
}

/// Windowed inverse DFT of a sweep.
pub fn ctf_to_cir<T: Real>(
    ctf: &ChannelTransferFunction<T>,
    window: WindowKind,
) -> Result<ChannelImpulseResponse<T>> {
    ctf.validate()?;
    let n = ctf.samples.len();
    let w = window.coefficients::<T>(n);
    let mut buf: Vec<Complex<T>> = ctf
        .samples
        .iter()
        .zip(&w)
        .map(|(h, &wk)| h * wk)
        .collect();
    // rustfft's inverse is exactly the unnormalised positive-exponent kernel.
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(ChannelImpulseResponse {
        taps: buf,
        delay_step: ctf.grid().delay_step(),
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDelayProfile<T> {
    /// Linear power per delay bin.
    pub power: Vec<T>,
    /// Seconds per bin.
    pub delay_step: T,
    pub ensemble_size: usize,
    pub noise_floor_db: Option<T>,
    /// Ground-truth cluster onsets, as indices into `power`.
    pub truth_onsets: Option<Vec<usize>>,
    /// Index of `power[0]` on the original delay grid.
    pub first_bin: usize,
}

impl<T: Real> PowerDelayProfile<T> {
    pub fn new(power: Vec<T>, delay_step: T) -> Result<Self> {
        if let Some(i) = power.iter().position(|p| !(*p >= T::zero()) || !p.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        if !(delay_step > T::zero()) {
            return Err(Error::param("delay_step", "must be positive"));
        }
        Ok(Self {
            power,
            delay_step,
            ensemble_size: 1,
            noise_floor_db: None,
            truth_onsets: None,
            first_bin: 0,
        })
    }

    /// Builds a profile from dB samples.
    pub fn from_db(power_db: &[T], delay_step: T) -> Result<Self> {
        Self::new(power_db.iter().map(|&d| T::from_db(d)).collect(), delay_step)
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// `10·log10(P(n))`; `-inf` where the power is zero.
    pub fn power_db(&self) -> Vec<T> {
        self.power.iter().map(|p| p.to_db()).collect()
    }

    /// Delay of local bin `i` in nanoseconds.
    pub fn delay_ns(&self, i: usize) -> T {
        T::of_usize(self.first_bin + i) * self.delay_step * T::of(1e9)
    }

    pub fn delay_step_ns(&self) -> T {
        self.delay_step * T::of(1e9)
    }

    /// Drops every bin before `start`, shifting truth onsets accordingly.
    /// The first truth onset, if any survive, is pinned to bin 0.
    pub fn trim_front(&self, start: usize) -> Self {
        let start = start.min(self.len());
        let truth = self.truth_onsets.as_ref().map(|t| {
            let mut shifted: Vec<usize> = t
                .iter()
                .filter(|&&b| b >= start)
                .map(|&b| b - start)
                .collect();
            // The cluster in progress at `start` begins the trimmed profile.
            if t.iter().any(|&b| b <= start) && shifted.first() != Some(&0) {
                shifted.insert(0, 0);
            }
            shifted
        });
        Self {
            power: self.power[start..].to_vec(),
            delay_step: self.delay_step,
            ensemble_size: self.ensemble_size,
            noise_floor_db: self.noise_floor_db,
            truth_onsets: truth,
            first_bin: self.first_bin + start,
        }
    }

    /// Keeps bins `0..len`, discarding truth onsets beyond the cut.
    pub fn truncate_to(&self, len: usize) -> Self {
        let len = len.min(self.len());
        let mut out = self.clone();
        out.power.truncate(len);
        if let Some(t) = out.truth_onsets.as_mut() {
            t.retain(|&b| b < len);
        }
        out
    }
}

/// Ensemble average `P(n) = (1/M)·Σ_m |h_m(n)|²`.
///
/// Each bin is summed over the ensemble in index-ascending pairwise order, so
/// the result is bitwise reproducible for a given input order.
pub fn average_pdp<T: Real>(cirs: &[ChannelImpulseResponse<T>]) -> Result<PowerDelayProfile<T>> {
    let first = cirs.first().ok_or(Error::EmptyEnsemble)?;
    let n = first.taps.len();
    for c in cirs {
        if c.taps.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: c.taps.len(),
            });
        }
        if c.delay_step != first.delay_step {
            return Err(Error::param("delay_step", "ensemble members differ in delay step"));
        }
    }
    let m = T::of_usize(cirs.len());
    let mut column = vec![T::zero(); cirs.len()];
    let power = (0..n)
        .map(|i| {
            for (slot, c) in column.iter_mut().zip(cirs) {
                *slot = c.taps[i].norm_sqr();
            }
            pairwise_sum(&column) / m
        })
        .collect();
    let mut pdp = PowerDelayProfile::new(power, first.delay_step)?;
    pdp.ensemble_size = cirs.len();
    Ok(pdp)
}

/// Median dB level over the last `tail_fraction` of bins; stored on the profile.
pub fn estimate_noise_floor<T: Real>(pdp: &mut PowerDelayProfile<T>, tail_fraction: T) -> Result<T> {
    if !(tail_fraction > T::zero() && tail_fraction <= T::of(0.5)) {
        return Err(Error::param("tail_fraction", "must lie in (0, 0.5]"));
    }
    if pdp.is_empty() {
        return Err(Error::TooShort { len: 0, min: 1 });
    }
    if pdp.power.iter().all(|&p| p == T::zero()) {
        return Err(Error::SilentProfile);
    }
    let n = pdp.len();
    let count = (tail_fraction * T::of_usize(n))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .clamp(1, n);
    let tail_db: Vec<T> = pdp.power[n - count..].iter().map(|p| p.to_db()).collect();
    let floor = median(&tail_db);
    pdp.noise_floor_db = Some(floor);
    Ok(floor)
}

/// Fall between neighbouring bins, dB, beyond which a trailing bin is taken
/// as the window's main-lobe skirt rather than channel decay.
pub const SKIRT_DROP_DB: f64 = 3.0;

/// Prefix ending at the last bin strictly above the larger of
/// `noise_floor + margin_db` and `peak − dynamic_range_db`. The second level
/// keeps window leakage out of a profile whose floor lies below the window's
/// sidelobes; pass infinity to disable it. Trailing bins that each fall more
/// than [`SKIRT_DROP_DB`] below their predecessor are then dropped, so an
/// abrupt end of the response does not leave a steep skirt behind.
pub fn truncate_above_noise<T: Real>(
    pdp: &PowerDelayProfile<T>,
    margin_db: T,
    dynamic_range_db: T,
) -> Result<PowerDelayProfile<T>> {
    let floor = pdp.noise_floor_db.ok_or(Error::NoiseFloorMissing)?;
    let db: Vec<T> = pdp.power_db();
    let peak = db.iter().copied().fold(T::neg_infinity(), T::max);
    let threshold = (floor + margin_db).max(peak - dynamic_range_db);
    let mut last = db.iter().rposition(|&v| v > threshold).ok_or(Error::BelowNoiseFloor {
        threshold_db: threshold.as_f64(),
    })?;
    while last > 0 && db[last - 1] - db[last] > T::of(SKIRT_DROP_DB) {
        last -= 1;
    }
    Ok(pdp.truncate_to(last + 1))
}

/// Starts the profile at its strongest bin (the line-of-sight arrival).
pub fn align_to_peak<T: Real>(pdp: &PowerDelayProfile<T>) -> PowerDelayProfile<T> {
    let peak = pdp
        .power
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bp), (i, &p)| if p > bp { (i, p) } else { (bi, bp) })
        .0;
    pdp.trim_front(peak)
}

/// Share of trailing bins that estimate the noise floor.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;
/// Margin above the noise floor kept by truncation, dB.
pub const DEFAULT_TRUNCATE_MARGIN_DB: f64 = 6.0;

/// Noise floor from the trailing bins, start at the peak, truncate at
/// `margin_db` above the floor and within the window's sidelobe range of
/// the peak.
pub fn prepare_profile<T: Real>(
    pdp: &PowerDelayProfile<T>,
    window: WindowKind,
    tail_fraction: T,
    margin_db: T,
) -> Result<PowerDelayProfile<T>> {
    let mut pdp = pdp.clone();
    estimate_noise_floor(&mut pdp, tail_fraction)?;
    let aligned = align_to_peak(&pdp);
    truncate_above_noise(&aligned, margin_db, T::of(window.sidelobe_range_db()))
}
