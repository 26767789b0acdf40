//! Delay-axis cluster partitions and their evaluation against ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Kmeans,
    Sparse,
}

/// Half-open bin range `[start, end)` with the label it was assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Contiguous segments tiling `[0, len)`; `onsets[i] == segments[i].start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub onsets: Vec<usize>,
    pub segments: Vec<Segment>,
    pub method: Method,
    pub truth_onsets: Option<Vec<usize>>,
}

impl ClusterPartition {
    /// Builds segments from strictly increasing onsets starting at 0.
    /// Segment labels are the segment indices.
    pub fn from_onsets(onsets: Vec<usize>, len: usize, method: Method) -> Result<Self> {
        let labels = (0..onsets.len()).collect::<Vec<_>>();
        Self::from_labeled_onsets(onsets, labels, len, method)
    }

    pub fn from_labeled_onsets(
        onsets: Vec<usize>,
        labels: Vec<usize>,
        len: usize,
        method: Method,
    ) -> Result<Self> {
        if len == 0 {
            return Err(Error::TooShort { len, min: 1 });
        }
        if onsets.first() != Some(&0) {
            return Err(Error::param("onsets", "first onset must be bin 0"));
        }
        if onsets.windows(2).any(|w| w[1] <= w[0]) || onsets.last().is_some_and(|&o| o >= len) {
            return Err(Error::param("onsets", "must be strictly increasing and inside the profile"));
        }
        if labels.len() != onsets.len() {
            return Err(Error::LengthMismatch {
                expected: onsets.len(),
                found: labels.len(),
            });
        }
        let segments = onsets
            .iter()
            .zip(&labels)
            .enumerate()
            .map(|(i, (&start, &label))| Segment {
                start,
                end: onsets.get(i + 1).copied().unwrap_or(len),
                label,
            })
            .collect();
        Ok(Self {
            onsets,
            segments,
            method,
            truth_onsets: None,
        })
    }

    /// Total number of bins covered.
    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Segment label of every bin.
    pub fn bin_labels(&self) -> Vec<usize> {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.label, s.len()))
            .collect()
    }

    /// True when segments cover `[0, len)` with no gaps, overlaps or empties.
    pub fn tiles(&self, len: usize) -> bool {
        let mut cursor = 0;
        for (seg, &onset) in self.segments.iter().zip(&self.onsets) {
            if seg.start != cursor || seg.end <= seg.start || onset != seg.start {
                return false;
            }
            cursor = seg.end;
        }
        cursor == len && self.onsets.len() == self.segments.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub precision: f64,
    pub recall: f64,
    /// Mean absolute bin offset over matched pairs (0 when nothing matched).
    pub mean_offset: f64,
    pub matched: usize,
    pub found: usize,
    pub truth: usize,
}

/// One-to-one matching of found onsets to truth onsets within `±slack` bins.
///
/// Candidate pairs are accepted greedily in order of increasing distance
/// (ties: lower found onset, then lower truth onset). An empty side yields
/// precision (or recall) 1 only when the other side is empty too.
pub fn evaluate_partition(found: &ClusterPartition, truth: &[usize], slack: usize) -> PartitionMetrics {
    evaluate_onsets(&found.onsets, truth, slack)
}

pub fn evaluate_onsets(found: &[usize], truth: &[usize], slack: usize) -> PartitionMetrics {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (fi, &f) in found.iter().enumerate() {
        for (ti, &t) in truth.iter().enumerate() {
            let d = f.abs_diff(t);
            if d <= slack {
                pairs.push((d, fi, ti));
            }
        }
    }
    pairs.sort_unstable();
    let mut used_f = vec![false; found.len()];
    let mut used_t = vec![false; truth.len()];
    let mut matched = 0usize;
    let mut offset_sum = 0usize;
    for (d, fi, ti) in pairs {
        if !used_f[fi] && !used_t[ti] {
            used_f[fi] = true;
            used_t[ti] = true;
            matched += 1;
            offset_sum += d;
        }
    }
    let ratio = |num: usize, den: usize, other: usize| {
        if den == 0 {
            if other == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    PartitionMetrics {
        precision: ratio(matched, found.len(), truth.len()),
        recall: ratio(matched, truth.len(), found.len()),
        mean_offset: if matched == 0 { 0.0 } else { offset_sum as f64 / matched as f64 },
        matched,
        found: found.len(),
        truth: truth.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_tile() {
        let p = ClusterPartition::from_onsets(vec![0, 3, 7], 10, Method::Sparse).unwrap();
        assert!(p.tiles(10));
        assert_eq!(p.segments[2], Segment { start: 7, end: 10, label: 2 });
        assert_eq!(p.bin_labels(), vec![0, 0, 0, 1, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn bad_onsets_rejected() {
        assert!(ClusterPartition::from_onsets(vec![1, 3], 10, Method::Sparse).is_err());
        assert!(ClusterPartition::from_onsets(vec![0, 3, 3], 10, Method::Sparse).is_err());
        assert!(ClusterPartition::from_onsets(vec![0, 10], 10, Method::Sparse).is_err());
    }

    #[test]
    fn perfect_match() {
        let m = evaluate_onsets(&[0, 40, 90], &[0, 40, 90], 2);
        assert_eq!((m.precision, m.recall, m.mean_offset), (1.0, 1.0, 0.0));
    }

    #[test]
    fn shifted_by_one() {
        let m = evaluate_onsets(&[1, 41, 91], &[0, 40, 90], 2);
        assert_eq!((m.precision, m.recall, m.mean_offset), (1.0, 1.0, 1.0));
    }

    #[test]
    fn one_spurious() {
        let m = evaluate_onsets(&[0, 25, 40, 90], &[0, 40, 90], 2);
        assert_eq!(m.precision, 3.0 / 4.0);
        assert_eq!(m.recall, 1.0);
    }

    #[test]
    fn matching_is_one_to_one() {
        let m = evaluate_onsets(&[10, 11], &[10], 2);
        assert_eq!(m.matched, 1);
        assert_eq!(m.precision, 0.5);
    }
}
