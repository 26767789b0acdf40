//! Lloyd's k-means on (delay, power) points of a power delay profile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{ClusterPartition, Method};
use crate::scalar::Real;
use crate::transform::PowerDelayProfile;

pub type Point<T> = [T; 2];

/// One dB of power weighs as much as 100 bins of delay, so the clustering is
/// driven by power level, as in the classical baseline.
pub const DEFAULT_DELAY_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig<T> {
    /// Multiplier on the bin index.
    pub delay_scale: T,
    /// Multiplier on power in dB.
    pub power_scale: T,
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: T,
}

impl<T: Real> FeatureConfig<T> {
    pub fn with_k(k: usize) -> Self {
        Self {
            delay_scale: T::of(DEFAULT_DELAY_SCALE),
            power_scale: T::one(),
            k,
            restarts: 10,
            max_iters: 300,
            tol: T::of(1e-9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::param("restarts/max_iters", "must be at least 1"));
        }
        if !(self.tol >= T::zero()) {
            return Err(Error::param("tol", "must be non-negative"));
        }
        if !(self.delay_scale > T::zero()) || !(self.power_scale > T::zero()) {
            return Err(Error::param("scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansResult<T> {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Point<T>>,
    pub wcss: T,
    pub iterations: usize,
    pub converged: bool,
    /// WCSS after each Lloyd iteration of the winning restart.
    pub wcss_history: Vec<T>,
}

fn dist2<T: Real>(a: &Point<T>, b: &Point<T>) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Nearest centroid, ties to the lowest index.
fn nearest<T: Real>(p: &Point<T>, centroids: &[Point<T>]) -> (usize, T) {
    let mut best = (0, dist2(p, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn wcss<T: Real>(points: &[Point<T>], assignment: &[usize], centroids: &[Point<T>]) -> T {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum()
}

fn plus_plus<T: Real>(points: &[Point<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point<T>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0]).as_f64()).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // Every point already coincides with a centroid.
            Err(_) => rng.random_range(0..points.len()),
        };
        let c = points[next];
        centroids.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c).as_f64());
        }
    }
    centroids
}

fn lloyd<T: Real>(points: &[Point<T>], mut centroids: Vec<Point<T>>, cfg: &FeatureConfig<T>) -> KmeansResult<T> {
    let k = centroids.len();
    let mut assignment = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let tol2 = cfg.tol * cfg.tol;
    for it in 1..=cfg.max_iters {
        iterations = it;
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest(p, &centroids).0;
        }
        let mut sums = vec![[T::zero(); 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        let mut moved = T::zero();
        for j in 0..k {
            // An empty cluster keeps its previous centroid.
            if counts[j] > 0 {
                let c = T::of_usize(counts[j]);
                let new = [sums[j][0] / c, sums[j][1] / c];
                moved = moved.max(dist2(&new, &centroids[j]));
                centroids[j] = new;
            }
        }
        history.push(wcss(points, &assignment, &centroids));
        if moved <= tol2 {
            converged = true;
            break;
        }
    }
    // Final assignment against the final centroids.
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = nearest(p, &centroids).0;
    }
    let total = wcss(points, &assignment, &centroids);
    KmeansResult {
        assignment,
        centroids,
        wcss: total,
        iterations,
        converged,
        wcss_history: history,
    }
}

/// k-means++ seeded Lloyd iterations, best of `cfg.restarts` by
/// (wcss, restart index).
pub fn cluster_points<T: Real>(points: &[Point<T>], cfg: &FeatureConfig<T>, seed: u64) -> Result<KmeansResult<T>> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::TooShort { len: 0, min: 1 });
    }
    if cfg.k > points.len() {
        return Err(Error::TooManyClusters {
            k: cfg.k,
            n: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KmeansResult<T>> = None;
    for _ in 0..cfg.restarts {
        let init = plus_plus(points, cfg.k, &mut rng);
        let res = lloyd(points, init, cfg);
        if best.as_ref().is_none_or(|b| res.wcss < b.wcss) {
            best = Some(res);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Feature points `(delay_scale·bin, power_scale·power_db)`.
pub fn pdp_features<T: Real>(pdp: &PowerDelayProfile<T>, cfg: &FeatureConfig<T>) -> Vec<Point<T>> {
    pdp.power_db()
        .into_iter()
        .enumerate()
        .map(|(i, db)| [cfg.delay_scale * T::of_usize(i), cfg.power_scale * db])
        .collect()
}

pub fn cluster_kmeans<T: Real>(
    pdp: &PowerDelayProfile<T>,
    cfg: &FeatureConfig<T>,
    seed: u64,
) -> Result<KmeansResult<T>> {
    if let Some(i) = pdp.power.iter().position(|&p| p <= T::zero()) {
        return Err(Error::NonFinite { index: i });
    }
    cluster_points(&pdp_features(pdp, cfg), cfg, seed)
}

/// Run-length segments of the assignment along the delay axis; each segment
/// keeps its k-means label.
pub fn kmeans_to_partition<T: Real>(res: &KmeansResult<T>) -> ClusterPartition {
    assignment_to_partition(&res.assignment)
}

pub fn assignment_to_partition(assignment: &[usize]) -> ClusterPartition {
    let mut onsets = Vec::new();
    let mut labels = Vec::new();
    for (i, &a) in assignment.iter().enumerate() {
        if i == 0 || assignment[i - 1] != a {
            onsets.push(i);
            labels.push(a);
        }
    }
    ClusterPartition::from_labeled_onsets(onsets, labels, assignment.len(), Method::Kmeans)
        .expect("run starts are increasing and inside the assignment")
}
