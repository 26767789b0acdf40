//! `min ½‖x − p‖²  s.t.  Σ w_i·|(D₂x)_i| ≤ L` as a dense inequality QP in
//! `(x, s)`: `D₂x − s ≤ 0`, `−D₂x − s ≤ 0`, `wᵀs ≤ L`, solved with a
//! log-barrier method and full Newton steps on the dense KKT Hessian.

use nalgebra::{DMatrix, DVector};

use crate::lsq::line_fit;

pub struct QpSolution {
    pub x: Vec<f64>,
    /// `‖x − p‖₂`.
    pub objective: f64,
}

fn second_difference_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n - 2, n);
    for i in 0..n - 2 {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    d
}

pub fn weighted_curvature_ls(p: &[f64], w: &[f64], l_max: f64) -> QpSolution {
    let n = p.len();
    let m = n - 2;
    assert_eq!(w.len(), m);
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let (a, b) = line_fit(&xs, p);
    let affine: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
    let d = second_difference_matrix(n);
    let pv = DVector::from_column_slice(p);
    let budget = (&d * &pv).iter().zip(w).map(|(v, wi)| v.abs() * wi).sum::<f64>();
    if budget <= l_max {
        return QpSolution { x: p.to_vec(), objective: 0.0 };
    }
    if l_max <= 0.0 {
        return finish(p, affine);
    }

    // Constraint rows A·y ≤ b over y = (x, s).
    let dim = n + m;
    let rows = 2 * m + 1;
    let mut amat = DMatrix::zeros(rows, dim);
    let mut bvec = DVector::zeros(rows);
    for i in 0..m {
        for j in 0..n {
            amat[(i, j)] = d[(i, j)];
            amat[(m + i, j)] = -d[(i, j)];
        }
        amat[(i, n + i)] = -1.0;
        amat[(m + i, n + i)] = -1.0;
        amat[(2 * m, n + i)] = w[i];
    }
    bvec[2 * m] = l_max;

    let wsum: f64 = w.iter().sum();
    let mut y = DVector::zeros(dim);
    for (i, v) in affine.iter().enumerate() {
        y[i] = *v;
    }
    for i in 0..m {
        y[n + i] = 0.5 * l_max / wsum;
    }

    let f0 = |y: &DVector<f64>| -> f64 { (0..n).map(|i| 0.5 * (y[i] - p[i]).powi(2)).sum() };
    let slack = |y: &DVector<f64>| -> DVector<f64> { &bvec - &amat * y };
    let barrier = |y: &DVector<f64>, t: f64| -> f64 {
        let g = slack(y);
        if g.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        t * f0(y) - g.iter().map(|v| v.ln()).sum::<f64>()
    };

    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let g = slack(&y);
            let inv: DVector<f64> = g.map(|v| 1.0 / v);
            let mut grad = amat.transpose() * &inv;
            let scaled = DMatrix::from_fn(rows, dim, |r, c| amat[(r, c)] * inv[r]);
            let mut hess = scaled.transpose() * &scaled;
            for i in 0..n {
                grad[i] += t * (y[i] - p[i]);
                hess[(i, i)] += t;
            }
            let step = hess.clone().lu().solve(&(-&grad)).expect("barrier Hessian is nonsingular");
            let decrement = -grad.dot(&step);
            if decrement / 2.0 < 1e-14 {
                break;
            }
            let current = barrier(&y, t);
            let mut alpha = 1.0;
            loop {
                let trial = &y + alpha * &step;
                if barrier(&trial, t) <= current - 0.25 * alpha * decrement {
                    y = trial;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break;
                }
            }
            if alpha < 1e-16 {
                break;
            }
        }
        if rows as f64 / t < 1e-12 * (1.0 + f0(&y)) {
            break;
        }
        t *= 20.0;
    }
    finish(p, y.rows(0, n).iter().copied().collect())
}

fn finish(p: &[f64], x: Vec<f64>) -> QpSolution {
    let objective = p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    QpSolution { x, objective }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inactive_constraint_returns_input() {
        let p = [0.0, 1.0, 0.0, 1.0];
        let s = weighted_curvature_ls(&p, &[1.0, 1.0], 100.0);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn single_kink_closed_form() {
        // p = (0, 0, 1): one curvature entry of 1. With budget L the
        // minimiser moves p along D₂ᵀ by (1 − L)/‖D₂ᵀ‖², ‖D₂ᵀ‖² = 6.
        let p = [0.0, 0.0, 1.0];
        let s = weighted_curvature_ls(&p, &[1.0], 0.4);
        let expect = 0.6 / 6f64.sqrt();
        assert!((s.objective - expect).abs() < 1e-7, "{} vs {expect}", s.objective);
    }
}
