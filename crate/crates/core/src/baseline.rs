//! Passive k-NN baseline: label the first `n` pool points and vote.

use crate::classifier::NNClassifier;
use crate::error::Error;
use crate::geometry::Pool;
use crate::oracle::BudgetedOracle;
use crate::Result;

/// Parameters of the passive arm. `alpha` and `dim` drive the neighbor
/// schedule; `beta` is carried along for reporting symmetry with the active
/// arm but does not enter the schedule.
#[derive(Debug, Clone, Copy)]
pub struct PassiveParams {
    pub alpha: f64,
    pub beta: f64,
    pub dim: usize,
    /// Explicit k, bypassing the schedule.
    pub k_override: Option<usize>,
}

/// Neighbor count for sample size `n`: `ceil(n^{2 alpha / (2 alpha + d)})`
/// clamped into [1, n-1], unless overridden.
pub fn choose_k_n(n: usize, params: &PassiveParams) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid("passive schedule needs n >= 2"));
    }
    if let Some(k) = params.k_override {
        return Ok(k);
    }
    let exponent = 2.0 * params.alpha / (2.0 * params.alpha + params.dim as f64);
    let k = (n as f64).powf(exponent).ceil() as usize;
    Ok(k.clamp(1, n - 1))
}

/// Label the first `n` pool points (i.i.d. by construction) and return the
/// k_n-NN classifier over them. Charges exactly `n` labels.
pub fn train_passive(
    pool: &Pool,
    oracle: &mut BudgetedOracle,
    n: usize,
    params: &PassiveParams,
) -> Result<NNClassifier> {
    if n == 0 {
        return Err(Error::invalid("passive training needs n >= 1"));
    }
    if n > pool.len() {
        return Err(Error::invalid(format!(
            "n = {} exceeds pool size {}",
            n,
            pool.len()
        )));
    }
    if n > oracle.remaining() {
        return Err(Error::invalid(format!(
            "n = {} exceeds remaining budget {}",
            n,
            oracle.remaining()
        )));
    }
    let k = if n == 1 { 1 } else { choose_k_n(n, params)? };
    let mut labeled = Vec::with_capacity(n);
    for i in 0..n {
        let label = oracle.query(i)?;
        labeled.push((pool.point(i).clone(), label));
    }
    NNClassifier::new(labeled, k)
}
