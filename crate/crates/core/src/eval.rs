//! Risk estimation against the known Bayes rule, log-log rate fitting, and
//! executable checkers for two supporting inequalities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::NNClassifier;
use crate::error::Error;
use crate::geometry::Point;
use crate::par;
use crate::problems::ProblemSpec;
use crate::Result;

/// Monte Carlo estimate of the excess risk of a classifier.
#[derive(Debug, Clone, Copy)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub m: usize,
    pub seed: u64,
    /// Set when the classifier was degenerate; the estimate is still valid
    /// but downstream reports must not treat the run as a normal success.
    pub degenerate: bool,
}

/// Excess risk over the Bayes rule, estimated over `m` fresh marginal draws:
/// the mean of |2 eta(X) - 1| on the disagreement set.
pub fn excess_risk(
    classifier: &NNClassifier,
    spec: &ProblemSpec,
    m: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if m == 0 {
        return Err(Error::invalid("test sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..m).map(|_| spec.sample_x(&mut rng)).collect();
    let values = par::map_slice(&points, |x| {
        if classifier.predict(x) != spec.bayes_label(x) {
            (2.0 * spec.eta(x) - 1.0).abs()
        } else {
            0.0
        }
    });

    let mean = values.iter().sum::<f64>() / m as f64;
    let std_error = if m >= 2 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    } else {
        0.0
    };
    Ok(RiskEstimate { mean, std_error, m, seed, degenerate: classifier.is_degenerate() })
}

/// Fraction of test draws beyond the margin (|eta - 1/2| > delta_hat) where
/// the classifier agrees with the Bayes rule. Draws inside the margin are
/// excluded; if all `m` draws land inside, the fraction is undefined.
pub fn margin_agreement(
    classifier: &NNClassifier,
    spec: &ProblemSpec,
    delta_hat: f64,
    m: usize,
    seed: u64,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("test sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..m).map(|_| spec.sample_x(&mut rng)).collect();
    let verdicts = par::map_slice(&points, |x| {
        if (spec.eta(x) - 0.5).abs() > delta_hat {
            Some(classifier.predict(x) == spec.bayes_label(x))
        } else {
            None
        }
    });

    let counted = verdicts.iter().flatten().count();
    if counted == 0 {
        return Err(Error::NoMarginSamples { attempts: m });
    }
    let agreed = verdicts.iter().flatten().filter(|&&a| a).count();
    Ok(agreed as f64 / counted as f64)
}

/// Least-squares fit of ln(risk) against ln(n).
#[derive(Debug, Clone)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The (n, risk) points that entered the fit.
    pub points: Vec<(usize, f64)>,
    /// Points dropped for nonpositive risk.
    pub dropped: usize,
}

/// Fit an empirical convergence exponent. Points with risk <= 0 are dropped
/// (their logarithm is undefined); at least two surviving points with
/// distinct `n` are required.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateFit> {
    let survivors: Vec<(usize, f64)> = points.iter().copied().filter(|&(_, r)| r > 0.0).collect();
    let dropped = points.len() - survivors.len();
    if dropped > 0 {
        log::warn!("fit_rate dropped {dropped} nonpositive-risk point(s)");
    }
    if survivors.len() < 2 {
        return Err(Error::invalid("rate fit needs at least 2 points with positive risk"));
    }

    let xs: Vec<f64> = survivors.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = survivors.iter().map(|&(_, r)| r.ln()).collect();
    let n = xs.len() as f64;
    let x_bar = xs.iter().sum::<f64>() / n;
    let y_bar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit needs at least 2 distinct n values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_bar) * (y - y_bar)).sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;

    let ss_tot: f64 = ys.iter().map(|y| (y - y_bar) * (y - y_bar)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };

    Ok(RateFit { slope, intercept, r_squared, points: survivors, dropped })
}

/// Outcome of the u >= 2c + 2a ln(ab) => u > c + a ln(bu) check.
#[derive(Debug, Clone)]
pub enum Lemma2Outcome {
    /// The hypothesis a b e^{c/a} > 4 log2(e) fails; nothing to check.
    SkippedHypothesis { product: f64, threshold: f64 },
    /// The implication was tested on every grid point satisfying the
    /// antecedent; counterexamples list the violating u values.
    Checked { tested: usize, counterexamples: Vec<f64> },
}

impl Lemma2Outcome {
    pub fn passed(&self) -> bool {
        match self {
            Lemma2Outcome::SkippedHypothesis { .. } => true,
            Lemma2Outcome::Checked { counterexamples, .. } => counterexamples.is_empty(),
        }
    }
}

/// Check the logarithmic self-bounding implication on a grid of u >= 1.
pub fn check_lemma2(a: f64, b: f64, c: f64, u_grid: &[f64]) -> Result<Lemma2Outcome> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::invalid("a, b, c must be positive"));
    }
    if u_grid.iter().any(|&u| u < 1.0) {
        return Err(Error::invalid("grid values must be >= 1"));
    }
    let product = a * b * (c / a).exp();
    let threshold = 4.0 * std::f64::consts::LOG2_E;
    if product <= threshold {
        return Ok(Lemma2Outcome::SkippedHypothesis { product, threshold });
    }

    let antecedent = 2.0 * c + 2.0 * a * (a * b).ln();
    let mut tested = 0usize;
    let mut counterexamples = Vec::new();
    for &u in u_grid {
        if u >= antecedent {
            tested += 1;
            if !(u > c + a * (b * u).ln()) {
                counterexamples.push(u);
            }
        }
    }
    Ok(Lemma2Outcome::Checked { tested, counterexamples })
}

/// Budget sufficient (up to the hidden constant, fixed here to 1, and a
/// single log factor) to reach excess risk `epsilon` at confidence
/// `1 - delta`: `ceil((1/eps)^{(2a+d-ab)/(a(b+1))} ln(1/(eps delta)))`.
/// A planning helper for sizing experiments, not a proof artifact.
pub fn label_complexity_gate(
    epsilon: f64,
    delta: f64,
    alpha: f64,
    beta: f64,
    dim: usize,
) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon must lie in (0, 1)"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1)"));
    }
    if !(alpha > 0.0 && alpha <= 1.0 && beta >= 0.0) {
        return Err(Error::invalid("alpha must lie in (0, 1] and beta be >= 0"));
    }
    if alpha * beta > dim as f64 {
        return Err(Error::invalid("requires alpha * beta <= d"));
    }
    let d = dim as f64;
    let exponent = (2.0 * alpha + d - alpha * beta) / (alpha * (beta + 1.0));
    let n = (1.0 / epsilon).powf(exponent) * (1.0 / (epsilon * delta)).ln();
    Ok(n.ceil() as usize)
}
