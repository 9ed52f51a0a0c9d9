//! k-nearest-neighbor classification over a finite labeled set.

use crate::error::Error;
use crate::geometry::{distance_unchecked, Point};
use crate::{Label, Result};

/// A k-NN rule over stored labeled points (k = 1 for the active learner's
/// output, k = k_n for the passive baseline).
///
/// Prediction is deterministic: neighbors are ordered by ascending distance
/// with ties broken toward the lower storage index, and an even-k vote tie
/// resolves to label 1 (majority by "mean >= 1/2").
///
/// A degenerate classifier stores no points and predicts a fixed fallback
/// label; it arises when the active learner retains nothing and is flagged
/// so reports never pass through it silently.
#[derive(Debug, Clone)]
pub struct NNClassifier {
    points: Vec<(Point, Label)>,
    k: usize,
    fallback: Option<Label>,
}

impl NNClassifier {
    pub fn new(points: Vec<(Point, Label)>, k: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("classifier needs at least one labeled point"));
        }
        if k == 0 || k > points.len() {
            return Err(Error::invalid(format!(
                "k = {} out of range for {} stored points",
                k,
                points.len()
            )));
        }
        let dim = points[0].0.dim();
        if points.iter().any(|(p, _)| p.dim() != dim) {
            return Err(Error::invalid("stored points must share one dimension"));
        }
        Ok(NNClassifier { points, k, fallback: None })
    }

    /// Degenerate constant classifier predicting `label` everywhere.
    pub fn degenerate(label: Label) -> Self {
        NNClassifier { points: Vec::new(), k: 1, fallback: Some(label) }
    }

    pub fn is_degenerate(&self) -> bool {
        self.fallback.is_some()
    }

    /// Number of stored labeled points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> &[(Point, Label)] {
        &self.points
    }

    /// Majority label of the k nearest stored points.
    pub fn predict(&self, x: &Point) -> Label {
        if let Some(label) = self.fallback {
            return label;
        }
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (distance_unchecked(x, p), i))
            .collect();
        if self.k < order.len() {
            order.select_nth_unstable_by(self.k - 1, |a, b| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
            });
        }
        let ones: usize = order[..self.k]
            .iter()
            .filter(|&&(_, i)| self.points[i].1 == 1)
            .count();
        Label::from(2 * ones >= self.k)
    }
}
