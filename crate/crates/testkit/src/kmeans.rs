/// Smallest within-cluster sum of squares over every assignment of `points`
/// to at most `k` clusters. Exponential; meant for a dozen points.
pub fn optimal_wcss(points: &[[f64; 2]], k: usize) -> f64 {
    let n = points.len();
    assert!(k >= 1 && n <= 14, "brute force is limited to small inputs");
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        best = best.min(wcss_of(points, &labels, k));
        // Restricted-growth enumeration: each label is at most one more than
        // the largest label before it, so every partition is visited once.
        let mut i = n;
        loop {
            if i == 1 {
                return best;
            }
            i -= 1;
            let cap = labels[..i].iter().copied().max().unwrap_or(0) + 1;
            if labels[i] + 1 < k && labels[i] < cap {
                labels[i] += 1;
                for l in &mut labels[i + 1..] {
                    *l = 0;
                }
                break;
            }
        }
    }
}

fn wcss_of(points: &[[f64; 2]], labels: &[usize], k: usize) -> f64 {
    let mut sum = vec![[0.0f64; 2]; k];
    let mut count = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        sum[l][0] += p[0];
        sum[l][1] += p[1];
        count[l] += 1;
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            let c = count[l] as f64;
            let dx = p[0] - sum[l][0] / c;
            let dy = p[1] - sum[l][1] / c;
            dx * dx + dy * dy
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_counted_once() {
        // Bell-like count check: 4 points, k = 2 → 8 partitions; the
        // two-cluster optimum of two well separated pairs is their spread.
        let pts = [[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        assert!((optimal_wcss(&pts, 2) - 1.0).abs() < 1e-12);
        assert!((optimal_wcss(&pts, 4)).abs() < 1e-12);
        assert!((optimal_wcss(&pts, 1) - 101.0).abs() < 1e-12);
    }
}
