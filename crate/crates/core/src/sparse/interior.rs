//! Interior-point route to the weighted curvature problem.
//!
//! For a multiplier `λ ≥ 0` the penalised problem
//! `min ½‖p − x‖² + λ·Σ w_i·|(Dx)_i|` has the box-constrained dual
//! `min ½·νᵀDDᵀν − (Dp)ᵀν  s.t. |ν_i| ≤ λ·w_i`, with `x = p − Dᵀν`. A
//! primal-dual interior-point method solves the dual with one pentadiagonal
//! factorisation per Newton step. Large weights only loosen the box, so the
//! method is indifferent to `1/ε`-sized weights.
//!
//! The budget `g(λ) = Σ w_i·|(Dx(λ))_i|` is non-increasing, and the
//! constrained optimum is the penalised optimum at the `λ` with `g(λ) = L`.
//! That root lies below the smallest `λ` giving an affine `x`; it is
//! bracketed by geometric steps and then narrowed by false position in
//! `log λ` with the Illinois safeguard. The budget can jump steeply in `λ`
//! when weights are large, so the search ends on a certified objective gap
//! rather than on hitting the budget exactly.

use super::operators::{curvature_adjoint_into, curvature_into, Pentadiagonal};
use crate::error::{Error, Result};
use crate::scalar::{norm2, Real};

const BACKTRACK_SHRINK: f64 = 0.5;
const SUFFICIENT_DECREASE: f64 = 0.01;
const MAX_BACKTRACKS: usize = 40;
const BARRIER_GROWTH: f64 = 2.0;
const MAX_SEARCH_STEPS: usize = 200;
/// Factor for geometric bracketing steps in the multiplier search.
const SEARCH_STEP: f64 = 8.0;

#[derive(Debug, Clone)]
pub(crate) struct Penalized<T> {
    /// Multiplier difference `μ₁ − μ₂`, which equals `D·x` at the optimum
    /// and is exactly tiny where the box is inactive.
    pub z: Vec<T>,
    pub iterations: usize,
    /// `½‖p − x‖²` at the returned iterate.
    pub fit: T,
    /// Dual objective, a lower bound on the penalised optimum.
    pub dual: T,
}

struct Workspace<T> {
    dt: Vec<T>,
    q: Vec<T>,
}

impl<T: Real> Workspace<T> {
    fn new(m: usize) -> Self {
        Self {
            dt: vec![T::zero(); m + 2],
            q: vec![T::zero(); m],
        }
    }

    /// `q ← D·Dᵀ·v`.
    fn gram(&mut self, v: &[T]) {
        curvature_adjoint_into(v, &mut self.dt);
        curvature_into(&self.dt, &mut self.q);
    }
}

/// Residual norm of the perturbed KKT system at `(ν, μ₁, μ₂)`.
fn kkt_residual<T: Real>(ws: &mut Workspace<T>, b: &[T], c: &[T], nu: &[T], mu1: &[T], mu2: &[T], inv_t: T) -> T {
    ws.gram(nu);
    let mut acc = T::zero();
    for i in 0..nu.len() {
        let rd = ws.q[i] - b[i] + mu1[i] - mu2[i];
        let f1 = nu[i] - c[i];
        let f2 = -nu[i] - c[i];
        let r1 = -mu1[i] * f1 - inv_t;
        let r2 = -mu2[i] * f2 - inv_t;
        acc += rd * rd + r1 * r1 + r2 * r2;
    }
    acc.sqrt()
}

/// Solves the penalised problem with per-entry penalties `c = λ·w` given
/// `b = D·p`. Stops when the surrogate duality gap is below
/// `gap_tol·(1 + |dual objective|)` and the dual residual below
/// `gap_tol·(1 + ‖b‖)`.
pub(crate) fn solve_penalized<T: Real>(b: &[T], c: &[T], gap_tol: T, max_iters: usize) -> Result<Penalized<T>> {
    let m = b.len();
    let mut ws = Workspace::new(m);
    let mut nu = vec![T::zero(); m];
    let mut mu1 = vec![T::one(); m];
    let mut mu2 = vec![T::one(); m];
    let mut t = T::of(1e-10);
    let mut step = T::infinity();
    let two_m = T::of_usize(2 * m);
    let b_norm = norm2(b);

    let mut diag = vec![T::zero(); m];
    let mut rhs = vec![T::zero(); m];
    let mut dmu1 = vec![T::zero(); m];
    let mut dmu2 = vec![T::zero(); m];
    let mut nu_new = vec![T::zero(); m];
    let mut mu1_new = vec![T::zero(); m];
    let mut mu2_new = vec![T::zero(); m];

    let mut gap = T::infinity();
    let mut residual = T::infinity();
    for it in 0..max_iters {
        ws.gram(&nu);
        gap = T::zero();
        let mut rd2 = T::zero();
        let mut dual_obj = T::zero();
        let mut fit = T::zero();
        for i in 0..m {
            let f1 = nu[i] - c[i];
            let f2 = -nu[i] - c[i];
            gap -= f1 * mu1[i] + f2 * mu2[i];
            let rd = ws.q[i] - b[i] + mu1[i] - mu2[i];
            rd2 += rd * rd;
            dual_obj += b[i] * nu[i] - T::of(0.5) * nu[i] * ws.q[i];
            fit += T::of(0.5) * nu[i] * ws.q[i];
        }
        residual = rd2.sqrt();
        if gap <= gap_tol * (T::one() + dual_obj.abs()) && residual <= gap_tol * (T::one() + b_norm) {
            let z = mu1.iter().zip(&mu2).map(|(&a, &b)| a - b).collect();
            return Ok(Penalized {
                z,
                iterations: it,
                fit,
                dual: dual_obj,
            });
        }
        if step >= T::of(0.2) {
            t = (two_m * T::of(BARRIER_GROWTH) / gap).max(T::of(1.2) * t);
        }
        let inv_t = T::one() / t;

        for i in 0..m {
            let f1 = nu[i] - c[i];
            let f2 = -nu[i] - c[i];
            diag[i] = -(mu1[i] / f1 + mu2[i] / f2);
            rhs[i] = -ws.q[i] + b[i] + inv_t / f1 - inv_t / f2;
        }
        let factor = Pentadiagonal::gram_plus_diagonal(&diag);
        factor.solve_in_place(&mut rhs);
        let dnu = &rhs;

        step = T::one();
        let safety = T::of(0.99);
        for i in 0..m {
            let f1 = nu[i] - c[i];
            let f2 = -nu[i] - c[i];
            dmu1[i] = -(mu1[i] + (inv_t + dnu[i] * mu1[i]) / f1);
            dmu2[i] = -(mu2[i] + (inv_t - dnu[i] * mu2[i]) / f2);
            if dmu1[i] < T::zero() {
                step = step.min(-safety * mu1[i] / dmu1[i]);
            }
            if dmu2[i] < T::zero() {
                step = step.min(-safety * mu2[i] / dmu2[i]);
            }
            if dnu[i] > T::zero() {
                step = step.min(-safety * f1 / dnu[i]);
            } else if dnu[i] < T::zero() {
                step = step.min(safety * f2 / dnu[i]);
            }
        }

        let current = kkt_residual(&mut ws, b, c, &nu, &mu1, &mu2, inv_t);
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..m {
                nu_new[i] = nu[i] + step * dnu[i];
                mu1_new[i] = mu1[i] + step * dmu1[i];
                mu2_new[i] = mu2[i] + step * dmu2[i];
            }
            let trial = kkt_residual(&mut ws, b, c, &nu_new, &mu1_new, &mu2_new, inv_t);
            if trial <= (T::one() - T::of(SUFFICIENT_DECREASE) * step) * current {
                break;
            }
            step *= T::of(BACKTRACK_SHRINK);
        }
        std::mem::swap(&mut nu, &mut nu_new);
        std::mem::swap(&mut mu1, &mut mu1_new);
        std::mem::swap(&mut mu2, &mut mu2_new);
    }
    Err(Error::SolverStalled {
        iterations: max_iters,
        primal_residual: residual.as_f64(),
        dual_residual: gap.as_f64(),
    })
}

#[derive(Debug, Clone)]
pub(crate) struct Constrained<T> {
    /// Curvature of the solution, `Σ w_i·|z_i| ≤ L`.
    pub z: Vec<T>,
    /// Newton steps over all penalised solves.
    pub iterations: usize,
    pub multiplier: T,
    /// Certified relative objective gap.
    pub gap: T,
    /// Relative unused budget `(L − g)/L`.
    pub slack: T,
}

fn budget<T: Real>(z: &[T], w: &[T]) -> T {
    z.iter().zip(w).map(|(&a, &b)| a.abs() * b).sum()
}

fn inner_slop<T: Real>(gap_tol: T, lower: T) -> T {
    T::of(4.0) * gap_tol * (T::one() + lower.abs())
}

/// One end of the multiplier bracket.
struct End<T> {
    lambda: T,
    /// Budget used minus `L`.
    excess: T,
    z: Vec<T>,
    fit: T,
}

/// Curvature of the solution of `min ½‖p − x‖² s.t. Σ w_i·|(Dx)_i| ≤ L`.
///
/// The penalised solutions at the two ends of the bracket are blended so the
/// budget is met exactly; the blend is feasible and, by convexity, its
/// objective is at most the blend of the two objectives. Every penalised
/// dual value minus `λ·L` bounds the optimum from below, and the search stops
/// once the two bounds are within `obj_tol` (relative).
pub(crate) fn solve_constrained<T: Real>(
    p: &[T],
    w: &[T],
    l_max: T,
    obj_tol: T,
    gap_tol: T,
    max_iters: usize,
    hint: Option<T>,
) -> Result<Constrained<T>> {
    let m = w.len();
    let mut b = vec![T::zero(); m];
    curvature_into(p, &mut b);
    let full = budget(&b, w);
    if full <= l_max {
        return Ok(Constrained {
            z: b,
            iterations: 0,
            multiplier: T::zero(),
            gap: T::zero(),
            slack: (l_max - full) / l_max.max(T::min_positive_value()),
        });
    }
    if l_max <= T::zero() {
        return Ok(Constrained {
            z: vec![T::zero(); m],
            iterations: 0,
            multiplier: T::infinity(),
            gap: T::zero(),
            slack: T::zero(),
        });
    }

    // Beyond λ_max every box contains the unconstrained dual solution, so x
    // is the affine fit and the budget is zero.
    let mut nu_star = b.clone();
    Pentadiagonal::gram_plus_diagonal(&vec![T::zero(); m]).solve_in_place(&mut nu_star);
    let lambda_max = nu_star
        .iter()
        .zip(w)
        .fold(T::zero(), |acc, (&v, &wi)| acc.max(v.abs() / wi));
    let affine_fit = T::of(0.5) * b.iter().zip(&nu_star).map(|(&a, &v)| a * v).sum::<T>();

    let mut lo = End {
        lambda: T::zero(),
        excess: full - l_max,
        z: b.clone(),
        fit: T::zero(),
    };
    let mut hi = End {
        lambda: lambda_max,
        excess: -l_max,
        z: vec![T::zero(); m],
        fit: affine_fit,
    };
    let mut lower = T::zero();
    let mut iterations = 0usize;
    let mut c = vec![T::zero(); m];
    // Illinois false position in log λ once both ends are positive; until
    // then, geometric steps toward the missing end.
    let mut side = 0i8;
    let (mut lo_scale, mut hi_scale) = (T::one(), T::one());
    let mut hi_probed = false;
    let mut first = hint.filter(|&h| h > T::zero() && h < lambda_max);
    let step = T::of(SEARCH_STEP);
    let mut certified = false;
    for _ in 0..MAX_SEARCH_STEPS {
        let theta = hi.excess / (hi.excess - lo.excess);
        let upper = theta * lo.fit + (T::one() - theta) * hi.fit;
        // Inner solves are accurate to gap_tol·(1 + |dual|) absolute, which
        // bounds how tight the certificate can be on small objectives.
        if upper - lower <= obj_tol * upper + inner_slop(gap_tol, lower) {
            certified = true;
            break;
        }
        if hi.lambda - lo.lambda <= T::epsilon() * T::of(4.0) * hi.lambda || iterations >= max_iters {
            break;
        }
        let lambda = match first.take() {
            Some(h) => h,
            None if lo.lambda <= T::zero() => hi.lambda / step,
            None if !hi_probed && lo.lambda * step < hi.lambda => lo.lambda * step,
            None => {
                let (a, bb) = (lo.lambda.ln(), hi.lambda.ln());
                let (ga, gb) = (lo.excess * lo_scale, hi.excess * hi_scale);
                let secant = (bb - gb * (bb - a) / (gb - ga)).exp();
                if secant > lo.lambda && secant < hi.lambda && secant.is_finite() {
                    secant
                } else {
                    (lo.lambda * hi.lambda).sqrt()
                }
            }
        };
        for (ci, &wi) in c.iter_mut().zip(w) {
            *ci = lambda * wi;
        }
        let sol = solve_penalized(&b, &c, gap_tol, max_iters.saturating_sub(iterations).max(1))?;
        iterations += sol.iterations;
        let excess = budget(&sol.z, w) - l_max;
        lower = lower.max(sol.dual - lambda * l_max);
        let end = End {
            lambda,
            excess,
            z: sol.z,
            fit: sol.fit,
        };
        if excess > T::zero() {
            lo = end;
            lo_scale = T::one();
            if side == -1 {
                hi_scale = hi_scale * T::of(0.5);
            }
            side = -1;
        } else {
            hi = end;
            hi_scale = T::one();
            hi_probed = true;
            if side == 1 {
                lo_scale = lo_scale * T::of(0.5);
            }
            side = 1;
        }
    }
    let theta = hi.excess / (hi.excess - lo.excess);
    let upper = theta * lo.fit + (T::one() - theta) * hi.fit;
    let gap = (upper - lower) / upper;
    if !certified && upper - lower > obj_tol * upper + inner_slop(gap_tol, lower) {
        return Err(Error::SolverStalled {
            iterations,
            primal_residual: gap.as_f64(),
            dual_residual: (hi.lambda - lo.lambda).as_f64(),
        });
    }
    // Shade the blend toward the feasible end to absorb rounding.
    let theta = theta * (T::one() - T::epsilon() * T::of(8.0));
    let z: Vec<T> = lo
        .z
        .iter()
        .zip(&hi.z)
        .map(|(&a, &bz)| theta * a + (T::one() - theta) * bz)
        .collect();
    let used = budget(&z, w);
    Ok(Constrained {
        z,
        iterations,
        multiplier: if theta > T::of(0.5) { lo.lambda } else { hi.lambda },
        gap,
        slack: (l_max - used) / l_max,
    })
}
