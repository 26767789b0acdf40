//! Weighted curvature-constrained least squares,
//! `min ‖p − x‖₂  s.t.  Σ w_i·|(Ω₂Ω₁x)_i| ≤ L`.
//!
//! Two methods share this entry point. The default is the interior-point
//! route in [`super::interior`]. The alternative is ADMM with the splitting
//! below; it is simple and cheap per iteration but needs many thousands of
//! iterations once reweighting has pushed most weights to `1/ε`.
//!
//! ADMM splitting: `z = Ω₂Ω₁x`, with `z` constrained to the weighted ℓ1 ball. The
//! weights live in the projection, so the x-update matrix `I + ρ·DᵀD` is
//! independent of them and well conditioned even when a weight is `1/ε`.
//! On exit `x` is rebuilt from the feasible `z` plus the best affine term,
//! which makes the returned curvature satisfy the constraint exactly.

use serde::{Deserialize, Serialize};

use super::operators::{curvature_adjoint_into, curvature_into, integrate_curvature, BandedNormal};
use super::interior::solve_constrained;
use super::projection::project_weighted_l1_ball;
use crate::error::{Error, Result};
use crate::scalar::{norm2, Real};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    #[default]
    InteriorPoint,
    Admm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SolverConfig<T> {
    pub method: SolverMethod,
    /// Initial ADMM penalty; adapted by residual balancing. Unused by the
    /// interior-point method.
    pub rho: T,
    /// ADMM iterations, or Newton steps summed over the multiplier search.
    pub max_inner_iters: usize,
    /// ADMM: relative primal residual tolerance. Interior point: certified
    /// relative objective gap that ends the multiplier search.
    pub primal_tol: T,
    /// ADMM: relative dual residual tolerance. Interior point: relative
    /// duality gap of each penalised solve.
    pub dual_tol: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            method: SolverMethod::InteriorPoint,
            rho: T::one(),
            max_inner_iters: 50_000,
            primal_tol: T::of(1e-8),
            dual_tol: T::of(1e-10),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) {
            return Err(Error::param("rho", "must be positive"));
        }
        if !(self.primal_tol >= T::zero()) || !(self.dual_tol >= T::zero()) {
            return Err(Error::param("tolerance", "must be non-negative"));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::param("max_inner_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerDiagnostics<T> {
    pub iterations: usize,
    pub primal_residual: T,
    pub dual_residual: T,
    pub rho: T,
    /// Lagrange multiplier of the budget constraint (interior point only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<T>,
    /// `Σ w_i·|φ_i|` of the returned solution.
    pub constraint_value: T,
    pub l_max: T,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedL1Solution<T> {
    pub p_hat: Vec<T>,
    /// `Ω₂·Ω₁·p_hat`, feasible for the weighted constraint.
    pub curvature: Vec<T>,
    pub objective: T,
    pub diagnostics: InnerDiagnostics<T>,
}

/// State carried between solves with different weights: ADMM iterates, or
/// the last budget multiplier as a first guess for the interior-point search.
#[derive(Debug, Clone)]
pub struct WarmStart<T> {
    x: Vec<T>,
    z: Vec<T>,
    u: Vec<T>,
    rho: T,
    multiplier: Option<T>,
}

const RELAXATION: f64 = 1.6;
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_EVERY: usize = 25;

/// Solves one weighted problem from a cold start.
pub fn solve_weighted_l1<T: Real>(
    p: &[T],
    weights: &[T],
    l_max: T,
    cfg: &SolverConfig<T>,
) -> Result<WeightedL1Solution<T>> {
    solve_weighted_l1_warm(p, weights, l_max, cfg, None).map(|(s, _)| s)
}

pub fn solve_weighted_l1_warm<T: Real>(
    p: &[T],
    weights: &[T],
    l_max: T,
    cfg: &SolverConfig<T>,
    warm: Option<WarmStart<T>>,
) -> Result<(WeightedL1Solution<T>, WarmStart<T>)> {
    cfg.validate()?;
    let n = p.len();
    if n < 3 {
        return Err(Error::TooShort { len: n, min: 3 });
    }
    let m = n - 2;
    if weights.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !(*w > T::zero()) || !w.is_finite()) {
        return Err(Error::param("weights", format!("weight {i} is not positive and finite")));
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    if !(l_max >= T::zero()) {
        return Err(Error::param("l_max", "must be non-negative"));
    }

    match cfg.method {
        SolverMethod::InteriorPoint => interior_point(p, weights, l_max, cfg, warm),
        SolverMethod::Admm => admm(p, weights, l_max, cfg, warm),
    }
}

fn interior_point<T: Real>(
    p: &[T],
    weights: &[T],
    l_max: T,
    cfg: &SolverConfig<T>,
    warm: Option<WarmStart<T>>,
) -> Result<(WeightedL1Solution<T>, WarmStart<T>)> {
    let hint = warm.and_then(|w| w.multiplier);
    let sol = solve_constrained(p, weights, l_max, cfg.primal_tol, cfg.dual_tol, cfg.max_inner_iters, hint)?;
    let multiplier = (sol.multiplier > T::zero() && sol.multiplier.is_finite()).then_some(sol.multiplier);
    let solution = finish(p, weights, l_max, sol.z, sol.iterations, sol.slack, sol.gap, T::zero(), multiplier);
    let state = WarmStart {
        x: Vec::new(),
        z: Vec::new(),
        u: Vec::new(),
        rho: cfg.rho,
        multiplier,
    };
    Ok((solution, state))
}

fn admm<T: Real>(
    p: &[T],
    weights: &[T],
    l_max: T,
    cfg: &SolverConfig<T>,
    warm: Option<WarmStart<T>>,
) -> Result<(WeightedL1Solution<T>, WarmStart<T>)> {
    let n = p.len();
    let m = n - 2;
    let alpha = T::of(RELAXATION);
    let (mut x, mut z, mut u, mut rho) = match warm {
        Some(w) if w.x.len() == n => (w.x, w.z, w.u, w.rho),
        _ => (p.to_vec(), vec![T::zero(); m], vec![T::zero(); m], cfg.rho),
    };
    let mut factor = BandedNormal::new(n, rho);
    let mut dx = vec![T::zero(); m];
    let mut v = vec![T::zero(); m];
    let mut z_old = vec![T::zero(); m];
    let mut dz = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); n];
    let mut scratch_n = vec![T::zero(); n];
    let sqrt_m = T::of_usize(m).sqrt();
    let sqrt_n = T::of_usize(n).sqrt();

    let mut primal = T::infinity();
    let mut dual = T::infinity();
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=cfg.max_inner_iters {
        iterations = it;
        // x ← (I + ρDᵀD)⁻¹ (p + ρDᵀ(z − u))
        for ((vi, &zi), &ui) in v.iter_mut().zip(&z).zip(&u) {
            *vi = zi - ui;
        }
        curvature_adjoint_into(&v, &mut scratch_n);
        for ((r, &pi), &ai) in rhs.iter_mut().zip(p).zip(&scratch_n) {
            *r = pi + rho * ai;
        }
        factor.solve_in_place(&mut rhs);
        x.copy_from_slice(&rhs);
        curvature_into(&x, &mut dx);

        // z ← Π(αDx + (1−α)z + u)
        z_old.copy_from_slice(&z);
        for (((vi, &di), &zi), &ui) in v.iter_mut().zip(&dx).zip(&z_old).zip(&u) {
            *vi = alpha * di + (T::one() - alpha) * zi + ui;
        }
        project_weighted_l1_ball(&v, weights, l_max, &mut z);
        for (((ui, &di), &zi), &zo) in u.iter_mut().zip(&dx).zip(&z).zip(&z_old) {
            *ui += alpha * di + (T::one() - alpha) * zo - zi;
        }

        for ((r, &di), &zi) in v.iter_mut().zip(&dx).zip(&z) {
            *r = di - zi;
        }
        primal = norm2(&v);
        for ((d, &zi), &zo) in dz.iter_mut().zip(&z).zip(&z_old) {
            *d = zi - zo;
        }
        curvature_adjoint_into(&dz, &mut scratch_n);
        dual = rho * norm2(&scratch_n);

        let eps_pri = cfg.primal_tol * (sqrt_m + norm2(&dx).max(norm2(&z)));
        curvature_adjoint_into(&u, &mut scratch_n);
        let eps_dual = cfg.dual_tol * (sqrt_n + rho * norm2(&scratch_n));
        if primal <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }

        if it % BALANCE_EVERY == 0 {
            let ratio = T::of(BALANCE_RATIO);
            let new_rho = if primal > ratio * dual {
                rho * T::of(2.0)
            } else if dual > ratio * primal {
                rho / T::of(2.0)
            } else {
                rho
            };
            if new_rho != rho {
                let scale = rho / new_rho;
                u.iter_mut().for_each(|ui| *ui *= scale);
                rho = new_rho;
                factor = BandedNormal::new(n, rho);
            }
        }
    }

    if !converged {
        return Err(Error::SolverStalled {
            iterations,
            primal_residual: primal.as_f64(),
            dual_residual: dual.as_f64(),
        });
    }

    let solution = finish(p, weights, l_max, z.clone(), iterations, primal, dual, rho, None);
    let state = WarmStart {
        x,
        z,
        u,
        rho,
        multiplier: None,
    };
    Ok((solution, state))
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    p: &[T],
    weights: &[T],
    l_max: T,
    z: Vec<T>,
    iterations: usize,
    primal_residual: T,
    dual_residual: T,
    rho: T,
    multiplier: Option<T>,
) -> WeightedL1Solution<T> {
    let p_hat = polish(p, &z);
    let objective = p.iter().zip(&p_hat).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
    let constraint_value = z.iter().zip(weights).map(|(&a, &b)| a.abs() * b).sum();
    WeightedL1Solution {
        p_hat,
        curvature: z,
        objective,
        diagnostics: InnerDiagnostics {
            iterations,
            primal_residual,
            dual_residual,
            rho,
            multiplier,
            constraint_value,
            l_max,
            objective,
        },
    }
}

/// Closest profile to `p` whose curvature is exactly `z`.
fn polish<T: Real>(p: &[T], z: &[T]) -> Vec<T> {
    let s = integrate_curvature(z);
    let n = p.len();
    let nf = T::of_usize(n);
    let center = T::of_usize(n - 1) / T::of(2.0);
    let mut mean_r = T::zero();
    for (&pi, &si) in p.iter().zip(&s) {
        mean_r += pi - si;
    }
    mean_r /= nf;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (i, (&pi, &si)) in p.iter().zip(&s).enumerate() {
        let t = T::of_usize(i) - center;
        sxy += t * (pi - si - mean_r);
        sxx += t * t;
    }
    let slope = sxy / sxx;
    s.iter()
        .enumerate()
        .map(|(i, &si)| si + mean_r + slope * (T::of_usize(i) - center))
        .collect()
}
