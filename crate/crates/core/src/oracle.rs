//! Simulated labeling oracle over a pool.
//!
//! Labels are drawn lazily from Bernoulli(eta(X_i)) at the first request and
//! memoized, so a pool point has one label for the lifetime of the oracle.
//! Each charged request decrements the budget; by default a repeated request
//! for an already-labeled index is free, with `recharge_duplicates` making
//! every request charge the way a per-request counter would.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geometry::Pool;
use crate::problems::ProblemSpec;
use crate::{Label, Result};

/// One answered query, in request order.
#[derive(Debug, Clone, Copy)]
pub struct QueryRecord {
    pub order: usize,
    pub pool_index: usize,
    pub label: Label,
    pub charged_total: usize,
}

/// Stateful budgeted label source for one learner run.
pub struct BudgetedOracle<'a> {
    pool: &'a Pool,
    spec: &'a ProblemSpec,
    budget: usize,
    charged: usize,
    cache: HashMap<usize, Label>,
    rng: ChaCha8Rng,
    recharge_duplicates: bool,
    log: Vec<QueryRecord>,
}

impl<'a> BudgetedOracle<'a> {
    pub fn new(
        pool: &'a Pool,
        spec: &'a ProblemSpec,
        budget: usize,
        seed: u64,
        recharge_duplicates: bool,
    ) -> Self {
        BudgetedOracle {
            pool,
            spec,
            budget,
            charged: 0,
            cache: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            recharge_duplicates,
            log: Vec::new(),
        }
    }

    /// Request the label of pool point `i`.
    ///
    /// The first request draws Y ~ Bernoulli(eta(X_i)), caches it, and
    /// charges one unit. A repeated request returns the cached label and
    /// charges only when `recharge_duplicates` is set. A request that would
    /// charge past the budget returns [`Error::BudgetExhausted`] instead.
    pub fn query(&mut self, i: usize) -> Result<Label> {
        if i >= self.pool.len() {
            return Err(Error::invalid(format!(
                "pool index {i} out of range ({} points)",
                self.pool.len()
            )));
        }
        let cached = self.cache.get(&i).copied();
        let charges = cached.is_none() || self.recharge_duplicates;
        if charges && self.charged >= self.budget {
            return Err(Error::BudgetExhausted);
        }
        let label = match cached {
            Some(l) => l,
            None => {
                let eta = self.spec.eta(self.pool.point(i));
                let label = Label::from(self.rng.random::<f64>() < eta);
                self.cache.insert(i, label);
                label
            }
        };
        if charges {
            self.charged += 1;
        }
        self.log.push(QueryRecord {
            order: self.log.len() + 1,
            pool_index: i,
            label,
            charged_total: self.charged,
        });
        Ok(label)
    }

    /// Remaining budget.
    pub fn remaining(&self) -> usize {
        self.budget - self.charged
    }

    pub fn charged(&self) -> usize {
        self.charged
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Number of distinct pool points labeled so far.
    pub fn distinct_labeled(&self) -> usize {
        self.cache.len()
    }

    pub fn query_log(&self) -> &[QueryRecord] {
        &self.log
    }

    /// Write the query log as CSV: order, pool_index, label, charged_total.
    pub fn write_query_log_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "order,pool_index,label,charged_total")?;
        for rec in &self.log {
            writeln!(
                out,
                "{},{},{},{}",
                rec.order, rec.pool_index, rec.label, rec.charged_total
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn setup(eta: f64, w: usize) -> (Pool, ProblemSpec) {
        let spec = ProblemSpec::constant(eta, 1).unwrap();
        let pool = Pool::new(
            (0..w)
                .map(|i| Point::new(vec![i as f64 / w.max(2) as f64]).unwrap())
                .collect(),
        )
        .unwrap();
        (pool, spec)
    }

    #[test]
    fn degenerate_bernoulli_labels() {
        let (pool, spec) = setup(1.0, 4);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 10, 1, false);
        assert_eq!(oracle.query(0).unwrap(), 1);
        assert_eq!(oracle.charged(), 1);

        let (pool, spec) = setup(0.0, 4);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 10, 1, false);
        assert_eq!(oracle.query(0).unwrap(), 0);
    }

    #[test]
    fn memoization_contract() {
        let (pool, spec) = setup(0.5, 4);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 10, 9, false);
        let first = oracle.query(2).unwrap();
        let charged = oracle.charged();
        for _ in 0..5 {
            assert_eq!(oracle.query(2).unwrap(), first);
        }
        assert_eq!(oracle.charged(), charged);
        assert_eq!(oracle.distinct_labeled(), 1);
    }

    #[test]
    fn recharge_duplicates_charges_every_request() {
        let (pool, spec) = setup(0.5, 4);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 3, 9, true);
        oracle.query(1).unwrap();
        oracle.query(1).unwrap();
        oracle.query(1).unwrap();
        assert_eq!(oracle.charged(), 3);
        assert!(matches!(oracle.query(1), Err(Error::BudgetExhausted)));
    }

    #[test]
    fn budget_exhaustion_signals() {
        let (pool, spec) = setup(1.0, 4);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 2, 5, false);
        assert_eq!(oracle.remaining(), 2);
        oracle.query(0).unwrap();
        oracle.query(1).unwrap();
        assert_eq!(oracle.remaining(), 0);
        assert!(matches!(oracle.query(2), Err(Error::BudgetExhausted)));
        // Cached labels stay readable for free.
        assert!(oracle.query(0).is_ok());
    }

    #[test]
    fn remaining_counts_down() {
        let (pool, spec) = setup(0.5, 10);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 100, 2, false);
        assert_eq!(oracle.remaining(), 100);
        for i in 0..3 {
            oracle.query(i).unwrap();
        }
        assert_eq!(oracle.remaining(), 97);
    }

    #[test]
    fn charged_equals_distinct_queries_without_recharge() {
        let (pool, spec) = setup(0.5, 10);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 100, 3, false);
        for i in [0usize, 3, 3, 7, 0, 7, 9] {
            oracle.query(i).unwrap();
        }
        assert_eq!(oracle.charged(), oracle.distinct_labeled());
        assert_eq!(oracle.charged(), 4);
    }

    #[test]
    fn label_frequency_matches_eta() {
        // Binomial test at 3 sigma over fresh oracles: the first-query label
        // of a fixed point is Bernoulli(eta).
        let (pool, spec) = setup(0.3, 4);
        let m = 10_000;
        let ones: usize = (0..m)
            .filter(|&s| {
                let mut oracle = BudgetedOracle::new(&pool, &spec, 1, s as u64, false);
                oracle.query(1).unwrap() == 1
            })
            .count();
        let freq = ones as f64 / m as f64;
        let band = 3.0 * (0.3f64 * 0.7 / m as f64).sqrt();
        assert!((freq - 0.3).abs() < band, "freq = {freq}, band = {band}");
    }

    #[test]
    fn query_log_csv_shape() {
        let (pool, spec) = setup(1.0, 4);
        let mut oracle = BudgetedOracle::new(&pool, &spec, 10, 1, false);
        oracle.query(0).unwrap();
        oracle.query(3).unwrap();
        let mut buf = Vec::new();
        oracle.write_query_log_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "order,pool_index,label,charged_total");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "1,0,1,1");
        assert_eq!(lines[2], "2,3,1,2");
    }
}
