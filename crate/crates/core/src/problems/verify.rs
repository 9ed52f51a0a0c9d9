//! Monte Carlo verifiers for the assumptions a problem family declares.
//!
//! The population statements are exact inequalities; the verifiers can only
//! test them statistically, so every bound is widened by a sampling band of
//! `slack_sigma` standard errors (plus a 1/m floor so an all-zero count does
//! not collapse the band to nothing). A report passes when the worst
//! observed/allowed ratio stays at or below one; enlarging the band can
//! therefore never flip a pass into a fail.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geometry::{distance_unchecked, Point};
use crate::par;
use crate::problems::ProblemSpec;
use crate::seed;
use crate::Result;

/// Number of standard errors of widening applied by default.
pub const DEFAULT_SLACK_SIGMA: f64 = 3.0;

/// Tolerance on the pass threshold, absorbing float rounding when a family
/// meets its bound with exact equality.
const RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionId {
    /// Hölder continuity of eta in the metric.
    H1,
    /// Margin (Tsybakov) noise: mass near the boundary is polynomially small.
    H3,
    /// Smoothness of eta in ball mass rather than distance.
    H4,
    /// The Hölder + density-floor route implies the ball-mass smoothness.
    T1,
}

impl std::fmt::Display for AssumptionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AssumptionId::H1 => "H1",
            AssumptionId::H3 => "H3",
            AssumptionId::H4 => "H4",
            AssumptionId::T1 => "T1",
        };
        f.write_str(s)
    }
}

/// One tested inequality instance.
#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub label: String,
    /// Left-hand side as observed/estimated.
    pub observed: f64,
    /// Right-hand side including the sampling band.
    pub allowed: f64,
}

impl CheckRecord {
    pub fn ratio(&self) -> f64 {
        if self.observed == 0.0 {
            0.0
        } else {
            self.observed / self.allowed
        }
    }
}

/// Outcome of one verifier run.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub assumption: AssumptionId,
    pub tested_points: usize,
    pub worst_ratio: f64,
    pub passed: bool,
    pub details: Vec<CheckRecord>,
}

impl AssumptionReport {
    fn from_records(assumption: AssumptionId, tested_points: usize, details: Vec<CheckRecord>) -> Self {
        let worst_ratio = details.iter().map(CheckRecord::ratio).fold(0.0, f64::max);
        AssumptionReport {
            assumption,
            tested_points,
            worst_ratio,
            passed: worst_ratio <= 1.0 + RATIO_TOL,
            details,
        }
    }
}

/// Sampling band around a Bernoulli proportion estimated from `m` draws.
fn mc_band(p_hat: f64, m: usize, slack_sigma: f64) -> f64 {
    let m = m as f64;
    slack_sigma * (p_hat * (1.0 - p_hat) / m).sqrt() + slack_sigma / m
}

/// Estimate the boundary-mass bound: for each `eps`, the marginal mass of
/// {|eta - 1/2| < eps} must stay below `margin_c * eps^beta` up to the band.
pub fn verify_margin_noise(
    spec: &ProblemSpec,
    sample_size: usize,
    eps_grid: &[f64],
    seed: u64,
    slack_sigma: f64,
) -> Result<AssumptionReport> {
    if eps_grid.is_empty() {
        return Err(Error::invalid("eps grid must be nonempty"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::invalid("eps values must lie in (0, 1]"));
    }
    if sample_size == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..sample_size).map(|_| spec.sample_x(&mut rng)).collect();
    let margins = par::map_slice(&points, |x| (spec.eta(x) - 0.5).abs());

    let details = eps_grid
        .iter()
        .map(|&eps| {
            let hits = margins.iter().filter(|&&g| g < eps).count();
            let p_hat = hits as f64 / sample_size as f64;
            CheckRecord {
                label: format!("eps={eps}"),
                observed: p_hat,
                allowed: spec.margin_c * eps.powf(spec.beta) + mc_band(p_hat, sample_size, slack_sigma),
            }
        })
        .collect();

    Ok(AssumptionReport::from_records(AssumptionId::H3, sample_size, details))
}

/// Shared machinery for the ball-mass smoothness checks: over random support
/// pairs (x, z), |eta(x) - eta(z)| must stay below
/// `big_l * (mass(open ball at x of radius dist(x,z)) + band)^{exponent/d}`.
fn check_ball_smoothness(
    spec: &ProblemSpec,
    assumption: AssumptionId,
    big_l: f64,
    exponent: f64,
    pair_count: usize,
    mass_sample: usize,
    seed: u64,
    slack_sigma: f64,
) -> Result<AssumptionReport> {
    if pair_count == 0 {
        return Err(Error::invalid("pair count must be at least 1"));
    }
    if mass_sample == 0 {
        return Err(Error::invalid("mass sample must be at least 1"));
    }

    let mut mass_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[1]));
    let mass_points: Vec<Point> = (0..mass_sample).map(|_| spec.sample_x(&mut mass_rng)).collect();

    let mut pair_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[2]));
    let pairs: Vec<(Point, Point)> = (0..pair_count)
        .map(|_| (spec.sample_x(&mut pair_rng), spec.sample_x(&mut pair_rng)))
        .collect();

    let ratio_exp = exponent / spec.dim() as f64;
    let details = par::map_slice(&pairs, |(x, z)| {
        let r = distance_unchecked(x, z);
        // Open ball: strict inequality on the distance.
        let hits = mass_points.iter().filter(|p| distance_unchecked(x, p) < r).count();
        let p_hat = hits as f64 / mass_sample as f64;
        CheckRecord {
            label: format!("dist={r:.6}"),
            observed: (spec.eta(x) - spec.eta(z)).abs(),
            allowed: big_l * (p_hat + mc_band(p_hat, mass_sample, slack_sigma)).powf(ratio_exp),
        }
    });

    Ok(AssumptionReport::from_records(assumption, pair_count, details))
}

/// Test the declared ball-mass smoothness `(alpha, smooth_l)` of a family.
pub fn verify_smoothness(
    spec: &ProblemSpec,
    pair_count: usize,
    mass_sample: usize,
    seed: u64,
    slack_sigma: f64,
) -> Result<AssumptionReport> {
    check_ball_smoothness(
        spec,
        AssumptionId::H4,
        spec.smooth_l,
        spec.alpha,
        pair_count,
        mass_sample,
        seed,
        slack_sigma,
    )
}

/// Test the declared Hölder continuity of eta. Exact quantities on both
/// sides, so no sampling band is applied.
pub fn verify_holder(spec: &ProblemSpec, pair_count: usize, seed: u64) -> Result<AssumptionReport> {
    let holder = spec
        .holder
        .ok_or_else(|| Error::invalid(format!("family '{}' declares no Hölder metadata", spec.name())))?;
    if pair_count == 0 {
        return Err(Error::invalid("pair count must be at least 1"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[3]));
    let details = (0..pair_count)
        .map(|i| {
            let x = spec.sample_x(&mut rng);
            let z = spec.sample_x(&mut rng);
            let r = distance_unchecked(&x, &z);
            CheckRecord {
                label: format!("pair={i}"),
                observed: (spec.eta(&x) - spec.eta(&z)).abs(),
                allowed: holder.l * r.powf(holder.alpha_h),
            }
        })
        .collect();

    Ok(AssumptionReport::from_records(AssumptionId::H1, pair_count, details))
}

/// The constant under which a Hölder family with a density floor satisfies
/// the ball-mass smoothness: with density >= p_min on a support of diameter
/// at most sqrt(d) that contains, around any support point, a sub-cube of
/// side min(r,1)/sqrt(d) inside the ball of radius r, one gets
/// mass >= p_min (min(r,1)/sqrt(d))^d and hence
/// |eta(x)-eta(z)| <= l_h d^{alpha_h} p_min^{-alpha_h/d} mass^{alpha_h/d}.
pub fn theorem1_constant(spec: &ProblemSpec) -> Result<f64> {
    let holder = spec
        .holder
        .ok_or_else(|| Error::invalid(format!("family '{}' declares no Hölder metadata", spec.name())))?;
    let p_min = spec
        .density_floor
        .ok_or_else(|| Error::invalid(format!("family '{}' has no density lower bound", spec.name())))?;
    let d = spec.dim() as f64;
    Ok((holder.l * d.powf(holder.alpha_h) / p_min.powf(holder.alpha_h / d)).max(1.0))
}

/// Check the implication "Hölder + density floor => ball-mass smoothness"
/// with the derived constant of [`theorem1_constant`].
pub fn verify_theorem1(
    spec: &ProblemSpec,
    pair_count: usize,
    mass_sample: usize,
    seed: u64,
    slack_sigma: f64,
) -> Result<AssumptionReport> {
    let big_l = theorem1_constant(spec)?;
    let holder = spec.holder.expect("checked by theorem1_constant");
    check_ball_smoothness(
        spec,
        AssumptionId::T1,
        big_l,
        holder.alpha_h,
        pair_count,
        mass_sample,
        seed,
        slack_sigma,
    )
}
