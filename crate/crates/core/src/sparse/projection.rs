use crate::scalar::Real;

/// Euclidean projection onto `{z : Σ w_i·|z_i| ≤ radius}` with `w_i > 0`.
///
/// Exact: the solution is `sign(y_i)·max(|y_i| − θ·w_i, 0)` where θ is the
/// root of the piecewise-linear `f(θ) = Σ w_i·max(|y_i| − θ·w_i, 0) − radius`.
/// Newton steps from θ = 0 approach the root from below and land on it once
/// the active set stops changing; a sort over the breakpoints finishes the
/// rare cases that need many steps.
pub fn project_weighted_l1_ball<T: Real>(y: &[T], w: &[T], radius: T, out: &mut [T]) {
    debug_assert_eq!(y.len(), w.len());
    debug_assert_eq!(y.len(), out.len());
    let norm: T = y.iter().zip(w).map(|(&a, &b)| a.abs() * b).sum();
    if norm <= radius {
        out.copy_from_slice(y);
        return;
    }
    if radius <= T::zero() {
        out.iter_mut().for_each(|o| *o = T::zero());
        return;
    }
    let theta = newton_threshold(y, w, radius).unwrap_or_else(|| sorted_threshold(y, w, radius));
    for ((o, &yi), &wi) in out.iter_mut().zip(y).zip(w) {
        let mag = (yi.abs() - theta * wi).max(T::zero());
        *o = if yi < T::zero() { -mag } else { mag };
    }
}

const NEWTON_STEPS: usize = 50;

fn newton_threshold<T: Real>(y: &[T], w: &[T], radius: T) -> Option<T> {
    let mut theta = T::zero();
    for _ in 0..NEWTON_STEPS {
        let mut s1 = T::zero();
        let mut s2 = T::zero();
        for (&yi, &wi) in y.iter().zip(w) {
            if yi.abs() > theta * wi {
                s1 += wi * yi.abs();
                s2 += wi * wi;
            }
        }
        // On the active set f is linear with root (s1 − radius)/s2.
        let next = (s1 - radius) / s2;
        if !(next > theta) {
            return Some(theta.max(next));
        }
        theta = next;
    }
    None
}

fn sorted_threshold<T: Real>(y: &[T], w: &[T], radius: T) -> T {
    let mut order: Vec<usize> = (0..y.len()).collect();
    let brk = |i: usize| y[i].abs() / w[i];
    order.sort_unstable_by(|&a, &b| brk(b).partial_cmp(&brk(a)).unwrap_or(std::cmp::Ordering::Equal));
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    let mut theta = T::zero();
    for (j, &i) in order.iter().enumerate() {
        s1 += w[i] * y[i].abs();
        s2 += w[i] * w[i];
        theta = (s1 - radius) / s2;
        let next = order.get(j + 1).map_or(T::zero(), |&k| brk(k));
        if theta >= next {
            break;
        }
    }
    theta.max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn weighted_norm(z: &[f64], w: &[f64]) -> f64 {
        z.iter().zip(w).map(|(a, b)| a.abs() * b).sum()
    }

    #[test]
    fn inside_point_unchanged() {
        let y = [0.1, -0.2];
        let mut out = [0.0; 2];
        project_weighted_l1_ball(&y, &[1.0, 1.0], 1.0, &mut out);
        assert_eq!(out, y);
    }

    #[test]
    fn unit_weights_simplex_case() {
        let mut out = [0.0; 3];
        project_weighted_l1_ball(&[3.0, -1.0, 0.5], &[1.0; 3], 2.0, &mut out);
        // θ = 1: (2, 0, 0)
        assert_relative_eq!(out[0], 2.0, epsilon = 1e-12);
        assert_eq!(out[1], 0.0);
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn zero_radius() {
        let mut out = [1.0; 2];
        project_weighted_l1_ball(&[3.0, -1.0], &[1.0, 2.0], 0.0, &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_optimal(
            y in prop::collection::vec(-10.0f64..10.0, 1..12),
            wseed in prop::collection::vec(0.05f64..20.0, 12),
            radius in 0.01f64..10.0,
        ) {
            let w = &wseed[..y.len()];
            let mut z = vec![0.0; y.len()];
            project_weighted_l1_ball(&y, w, radius, &mut z);
            prop_assert!(weighted_norm(&z, w) <= radius * (1.0 + 1e-9) + 1e-12);
            // Variational inequality: <y − z, v − z> ≤ 0 for feasible v.
            // Check against the vertices ±(radius/w_i)·e_i of the ball.
            for i in 0..y.len() {
                for s in [-1.0, 1.0] {
                    let mut v = vec![0.0; y.len()];
                    v[i] = s * radius / w[i];
                    let ip: f64 = y.iter().zip(&z).zip(&v).map(|((a, b), c)| (a - b) * (c - b)).sum();
                    prop_assert!(ip <= 1e-8 * (1.0 + radius));
                }
            }
        }
    
        #[test]
        fn newton_and_sorted_thresholds_agree(
            y in prop::collection::vec(-10.0f64..10.0, 1..40),
            wseed in prop::collection::vec(0.05f64..20.0, 40),
            radius in 0.01f64..5.0,
        ) {
            let w = &wseed[..y.len()];
            prop_assume!(weighted_norm(&y, w) > radius);
            let a = newton_threshold(&y, w, radius).unwrap();
            let b = sorted_threshold(&y, w, radius);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b));
        }
    }
}
