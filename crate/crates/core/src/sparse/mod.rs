//! Sparsity-based clustering by iteratively reweighted ℓ1 minimisation.
//!
//! The dB-domain profile is approximated by a piecewise-linear `P̂` whose
//! weighted curvature `‖W·Ω₂·Ω₁·P̂‖₁` is bounded by `l_max`. Weights start at
//! one and are refreshed from the previous solution each outer iteration,
//! which drives the curvature vector `Φ = Ω₂·Ω₁·P̂` towards a few large
//! spikes. Cluster onsets are read off where `Φ` crosses a decision level.

mod interior;
mod operators;
mod projection;
mod solver;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use operators::{curvature, difference_operators, FirstDifference};
pub use projection::project_weighted_l1_ball;
pub use solver::{
    solve_weighted_l1, solve_weighted_l1_warm, InnerDiagnostics, SolverConfig, SolverMethod, WarmStart,
    WeightedL1Solution,
};

use crate::error::{Error, Result};
use crate::partition::{ClusterPartition, Method};
use crate::scalar::Real;
use crate::transform::PowerDelayProfile;

/// Default ε in the weight update.
pub const DEFAULT_EPSILON: f64 = 1e-9;
/// Default decision level on Φ.
pub const DEFAULT_THRESHOLD: f64 = -0.35;
pub const DEFAULT_MIN_SEPARATION: usize = 2;

/// Which quantity the weight update inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `w_n = 1/(|Φ_n| + ε)`, one weight per curvature entry.
    #[default]
    Curvature,
    /// `w_n = 1/(|P̂(n+1)| + ε)`: the profile sample at the centre of each
    /// curvature stencil.
    Profile,
}

/// How Φ is compared against the decision level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Onset where `Φ(n) ≤ threshold`.
    #[default]
    Signed,
    /// Onset where `|Φ(n)| ≥ |threshold|`.
    Abs,
}

macro_rules! named_enum {
    ($ty:ty, $($name:literal => $v:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    other => Err(Error::param(stringify!($ty), format!("unknown value `{other}`"))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $v { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

named_enum!(WeightMode, "curvature" => WeightMode::Curvature, "profile" => WeightMode::Profile);
named_enum!(ThresholdMode, "signed" => ThresholdMode::Signed, "abs" => ThresholdMode::Abs);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SparseConfig<T> {
    /// Budget on the weighted curvature.
    pub l_max: T,
    pub epsilon: T,
    pub max_outer_iters: usize,
    /// Stop when the largest relative weight change,
    /// `max |w⁽ᵐ⁺¹⁾ − w⁽ᵐ⁾| / max(w⁽ᵐ⁺¹⁾, w⁽ᵐ⁾)`, falls below this.
    pub weight_tol: T,
    /// Decision level on Φ, dB per bin².
    pub threshold: T,
    pub threshold_mode: ThresholdMode,
    pub min_separation: usize,
    pub weight_mode: WeightMode,
    pub solver: SolverConfig<T>,
}

impl<T: Real> Default for SparseConfig<T> {
    fn default() -> Self {
        Self {
            l_max: T::of(12.0),
            epsilon: T::of(DEFAULT_EPSILON),
            max_outer_iters: 10,
            weight_tol: T::of(1e-3),
            threshold: T::of(DEFAULT_THRESHOLD),
            threshold_mode: ThresholdMode::Signed,
            min_separation: DEFAULT_MIN_SEPARATION,
            weight_mode: WeightMode::Curvature,
            solver: SolverConfig::default(),
        }
    }
}

impl<T: Real> SparseConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        if !(self.l_max > T::zero()) || !self.l_max.is_finite() {
            return Err(Error::param("l_max", "must be positive and finite"));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::param("max_outer_iters", "must be at least 1"));
        }
        if !(self.weight_tol >= T::zero()) {
            return Err(Error::param("weight_tol", "must be non-negative"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::param("threshold", "must be finite"));
        }
        self.solver.validate()
    }
}

/// One outer (reweighting) iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterRecord<T> {
    pub iteration: usize,
    pub inner: InnerDiagnostics<T>,
    /// Largest relative weight change after this solve.
    pub weight_change: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<T>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionResult<T> {
    /// Piecewise-linear fit in dB.
    pub p_hat: Vec<T>,
    /// `Ω₂·Ω₁·p_hat`, length `N − 2`.
    pub phi: Vec<T>,
    /// Weights used in the final solve.
    pub weights_final: Vec<T>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub inner_diagnostics: Vec<OuterRecord<T>>,
    /// `‖P − P̂‖₂` of the final iterate.
    pub objective: T,
    /// True when the final objective exceeds the first iterate's by more than 1e-6.
    pub non_monotone: bool,
}

impl<T: Real> ReconstructionResult<T> {
    pub fn objective_trace(&self) -> Vec<T> {
        self.inner_diagnostics.iter().map(|r| r.inner.objective).collect()
    }
}

/// Options that only affect diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceOptions {
    pub keep_weights: bool,
}

/// Reweighted reconstruction of the profile's dB values.
pub fn reconstruct<T: Real>(
    pdp: &PowerDelayProfile<T>,
    cfg: &SparseConfig<T>,
) -> Result<ReconstructionResult<T>> {
    reconstruct_db(&pdp.power_db(), cfg, TraceOptions::default())
}

pub fn reconstruct_db<T: Real>(
    p: &[T],
    cfg: &SparseConfig<T>,
    trace: TraceOptions,
) -> Result<ReconstructionResult<T>> {
    cfg.validate()?;
    let n = p.len();
    if n < 3 {
        return Err(Error::TooShort { len: n, min: 3 });
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let mut weights = vec![T::one(); n - 2];
    let mut warm = None;
    let mut records = Vec::new();
    let mut last: Option<WeightedL1Solution<T>> = None;
    let mut converged = false;

    for m in 0..cfg.max_outer_iters {
        let (sol, state) = solve_weighted_l1_warm(p, &weights, cfg.l_max, &cfg.solver, warm.take())?;
        warm = Some(state);
        let next = update_weights(cfg, &sol);
        let change = weights
            .iter()
            .zip(&next)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs() / a.max(b)));
        records.push(OuterRecord {
            iteration: m,
            inner: sol.diagnostics,
            weight_change: change,
            weights: trace.keep_weights.then(|| weights.clone()),
        });
        // An affine fit is a fixed point of the reweighting.
        let flat = sol.curvature.iter().all(|c| c.abs() <= cfg.epsilon);
        last = Some(sol);
        if flat || change < cfg.weight_tol {
            converged = true;
            break;
        }
        weights = next;
    }

    let sol = last.expect("max_outer_iters >= 1");
    let first_objective = records[0].inner.objective;
    Ok(ReconstructionResult {
        phi: curvature(&sol.p_hat),
        p_hat: sol.p_hat,
        weights_final: weights,
        outer_iterations: records.len(),
        converged,
        non_monotone: sol.objective > first_objective + T::of(1e-6),
        inner_diagnostics: records,
        objective: sol.objective,
    })
}

fn update_weights<T: Real>(cfg: &SparseConfig<T>, sol: &WeightedL1Solution<T>) -> Vec<T> {
    match cfg.weight_mode {
        WeightMode::Curvature => sol
            .curvature
            .iter()
            .map(|c| T::one() / (c.abs() + cfg.epsilon))
            .collect(),
        WeightMode::Profile => sol.p_hat[1..sol.p_hat.len() - 1]
            .iter()
            .map(|v| T::one() / (v.abs() + cfg.epsilon))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig<T> {
    pub threshold: T,
    pub mode: ThresholdMode,
    pub min_separation: usize,
}

impl<T: Real> From<&SparseConfig<T>> for ExtractConfig<T> {
    fn from(cfg: &SparseConfig<T>) -> Self {
        Self {
            threshold: cfg.threshold,
            mode: cfg.threshold_mode,
            min_separation: cfg.min_separation,
        }
    }
}

/// Onsets at `n + 1` for every Φ(n) crossing the decision level, with bin 0
/// prepended. A crossing closer than `min_separation` bins to the previous
/// crossing joins that crossing's group, and each group keeps its first bin.
pub fn onsets_from_phi<T: Real>(phi: &[T], cfg: &ExtractConfig<T>) -> Vec<usize> {
    let crosses = |v: T| match cfg.mode {
        ThresholdMode::Signed => v <= cfg.threshold,
        ThresholdMode::Abs => v.abs() >= cfg.threshold.abs(),
    };
    let mut onsets = vec![0usize];
    let mut previous = 0usize;
    for (n, &v) in phi.iter().enumerate() {
        if !crosses(v) {
            continue;
        }
        let candidate = n + 1;
        if candidate - previous >= cfg.min_separation.max(1) {
            onsets.push(candidate);
        }
        previous = candidate;
    }
    onsets
}

pub fn extract_clusters<T: Real>(res: &ReconstructionResult<T>, cfg: &ExtractConfig<T>) -> ClusterPartition {
    let onsets = onsets_from_phi(&res.phi, cfg);
    ClusterPartition::from_onsets(onsets, res.p_hat.len(), Method::Sparse)
        .expect("onsets from Φ are increasing and inside the profile")
}
