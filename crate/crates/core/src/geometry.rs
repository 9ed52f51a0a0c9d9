//! Metric-space primitives: points, pools, and deterministic
//! nearest-neighbor queries under the Euclidean metric.
//!
//! All queries are brute-force scans over the pool; at the scales this crate
//! targets a spatial index does not pay for itself, and the flat scan keeps
//! the tie-break order (ascending distance, then ascending pool index) exact.

use crate::error::Error;
use crate::Result;

/// A point of the instance space, a vector of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    /// Build a point, rejecting empty or non-finite coordinate vectors.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Point { coords })
    }

    /// Internal constructor for coordinates that are finite by construction.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.iter().all(|c| c.is_finite()));
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn distance(a: &Point, b: &Point) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(distance_unchecked(a, b))
}

/// Distance without the dimension check; callers guarantee equal dims.
#[inline]
pub(crate) fn distance_unchecked(a: &Point, b: &Point) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// An immutable, ordered collection of points sharing one dimension.
///
/// The construction order is the identity of each point: all queries report
/// pool indices, and ties in distance are broken toward the lower index.
#[derive(Debug, Clone)]
pub struct Pool {
    points: Vec<Point>,
    dim: usize,
}

impl Pool {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.dim(),
            None => return Err(Error::invalid("pool must contain at least one point")),
        };
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::invalid("all pool points must share one dimension"));
        }
        Ok(Pool { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, index: usize) -> &Point {
        &self.points[index]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    fn check_query(&self, x: &Point) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::invalid(format!(
                "query dimension {} does not match pool dimension {}",
                x.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Distances from `x` to every pool point, sorted ascending with ties
    /// broken by ascending pool index. One scan serves repeated neighbor and
    /// ball-counting queries around the same center.
    pub fn scan(&self, x: &Point) -> Result<DistanceScan> {
        self.check_query(x)?;
        let mut pairs: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (distance_unchecked(x, p), i))
            .collect();
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(DistanceScan { pairs })
    }
}

/// Indices of the `k` pool points nearest to `x`, ascending by distance,
/// ties broken by ascending pool index.
pub fn k_nearest(pool: &Pool, x: &Point, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > pool.len() {
        return Err(Error::invalid(format!(
            "k = {} out of range for pool of size {}",
            k,
            pool.len()
        )));
    }
    let scan = pool.scan(x)?;
    Ok(scan.nearest(k).iter().map(|&(_, i)| i).collect())
}

/// Number of pool points within the closed ball of radius `r` around `x`.
pub fn count_within(pool: &Pool, x: &Point, r: f64) -> Result<usize> {
    pool.check_query(x)?;
    Ok(pool
        .points
        .iter()
        .filter(|p| distance_unchecked(x, p) <= r)
        .count())
}

/// Smallest radius whose closed ball around `x` holds empirical mass >= `p`:
/// the k-th smallest distance from `x` to the pool, k = ceil(p * w).
pub fn empirical_r_p(pool: &Pool, x: &Point, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("p = {p} outside (0, 1]")));
    }
    let scan = pool.scan(x)?;
    Ok(scan.kth_distance(rank_for_mass(p, pool.len())))
}

/// Smallest k with k/w >= p, computed so that the comparison agrees with
/// plain f64 division (the rounding of `p * w` alone can land one off).
fn rank_for_mass(p: f64, w: usize) -> usize {
    let wf = w as f64;
    let mut k = ((p * wf).ceil() as usize).clamp(1, w);
    while k > 1 && ((k - 1) as f64 / wf) >= p {
        k -= 1;
    }
    while k < w && ((k as f64 / wf) < p) {
        k += 1;
    }
    k
}

/// Result of one distance scan around a fixed center.
#[derive(Debug, Clone)]
pub struct DistanceScan {
    /// (distance, pool index), sorted ascending, ties by index.
    pairs: Vec<(f64, usize)>,
}

impl DistanceScan {
    /// The `k` nearest (distance, index) pairs.
    pub fn nearest(&self, k: usize) -> &[(f64, usize)] {
        &self.pairs[..k.min(self.pairs.len())]
    }

    /// Pool index of the k-th nearest point (1-based k).
    pub fn neighbor_index(&self, k: usize) -> Option<usize> {
        self.pairs.get(k - 1).map(|&(_, i)| i)
    }

    /// Distance of the k-th nearest point (1-based k); `k` must not exceed
    /// the pool size.
    pub fn kth_distance(&self, k: usize) -> f64 {
        self.pairs[k - 1].0
    }

    /// Number of points at distance <= `r` (closed ball).
    pub fn count_within(&self, r: f64) -> usize {
        self.pairs.partition_point(|&(d, _)| d <= r)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
