//! Seeded replication sweeps over budgets with CSV/JSON emission.
//!
//! A sweep crosses budgets x replications x modes. Each replication draws a
//! fresh pool; the active and passive arms share it but consume independent
//! oracles. Per-run seeds are derived from the base seed and the (budget
//! index, replication) pair, so any subset of a sweep is reproducible in
//! isolation and parallel execution cannot change a single byte of output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baseline::{train_passive, PassiveParams};
use crate::error::Error;
use crate::eval::{excess_risk, margin_agreement};
use crate::kalls::{delta_hat, run_kalls, KallsParams};
use crate::oracle::BudgetedOracle;
use crate::par;
use crate::problems::ProblemSpec;
use crate::seed;
use crate::Result;

/// Learner selection for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Kalls,
    Passive,
    Both,
}

impl Mode {
    fn arms(self) -> &'static [Arm] {
        match self {
            Mode::Kalls => &[Arm::Kalls],
            Mode::Passive => &[Arm::Passive],
            Mode::Both => &[Arm::Kalls, Arm::Passive],
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kalls" => Ok(Mode::Kalls),
            "passive" => Ok(Mode::Passive),
            "both" => Ok(Mode::Both),
            other => Err(Error::invalid(format!(
                "unknown mode '{other}' (expected kalls, passive, or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arm {
    Kalls,
    Passive,
}

impl Arm {
    fn name(self) -> &'static str {
        match self {
            Arm::Kalls => "kalls",
            Arm::Passive => "passive",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Arm::Kalls => 1,
            Arm::Passive => 2,
        }
    }
}

/// Full description of one sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub spec: ProblemSpec,
    pub mode: Mode,
    pub pool_size: usize,
    pub budgets: Vec<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub recharge_duplicates: bool,
    /// Monte Carlo test size for the excess-risk estimate.
    pub risk_m: usize,
    /// Monte Carlo test size for the margin-agreement estimate.
    pub agreement_m: usize,
    /// Also return per-run trace and query-log CSV text.
    pub collect_artifacts: bool,
}

impl SweepConfig {
    pub fn new(spec: ProblemSpec, mode: Mode, pool_size: usize, budgets: Vec<usize>) -> Self {
        SweepConfig {
            spec,
            mode,
            pool_size,
            budgets,
            epsilon: 0.2,
            delta: 0.1,
            replications: 1,
            base_seed: 0,
            recharge_duplicates: false,
            risk_m: 10_000,
            agreement_m: 10_000,
            collect_artifacts: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() {
            return Err(Error::invalid("at least one budget is required"));
        }
        if self.budgets.iter().any(|&n| n > self.pool_size) {
            return Err(Error::invalid("budgets must not exceed the pool size"));
        }
        if self.budgets.iter().any(|&n| n == 0) {
            return Err(Error::invalid("budgets must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.risk_m == 0 || self.agreement_m == 0 {
            return Err(Error::invalid("Monte Carlo test sizes must be at least 1"));
        }
        Ok(())
    }
}

/// One experiment CSV row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub family: String,
    pub mode: String,
    pub n: usize,
    pub seed: u64,
    pub excess_risk: f64,
    pub std_error: f64,
    /// Empty when no test draw cleared the margin.
    pub margin_agreement: Option<f64>,
    pub active_set_size: usize,
    pub retained_size: usize,
    pub degenerate_flag: bool,
}

/// Row plus optional per-run artifacts.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub row: ExperimentRow,
    /// Position of the row's budget in the configured budget list.
    pub budget_index: usize,
    /// Replication index the row came from.
    pub replication: usize,
    pub trace_csv: Option<String>,
    pub query_log_csv: Option<String>,
}

/// Run the whole sweep; outcomes are ordered by (budget, replication, mode).
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepOutcome>> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..config.budgets.len())
        .flat_map(|bi| (0..config.replications).map(move |rep| (bi, rep)))
        .collect();

    let results = par::map_slice(&tasks, |&(bi, rep)| run_replication(config, bi, rep));

    let mut outcomes = Vec::with_capacity(results.len() * config.mode.arms().len());
    for result in results {
        outcomes.extend(result?);
    }
    Ok(outcomes)
}

fn run_replication(config: &SweepConfig, bi: usize, rep: usize) -> Result<Vec<SweepOutcome>> {
    let budget = config.budgets[bi];
    let run_seed = seed::derive(config.base_seed, &[bi as u64, rep as u64]);
    let pool = config.spec.sample_pool(config.pool_size, seed::derive(run_seed, &[0]))?;
    let dh = delta_hat(config.epsilon, config.spec.margin_c, config.spec.beta)?;

    let mut outcomes = Vec::new();
    for &arm in config.mode.arms() {
        let oracle_seed = seed::derive(run_seed, &[arm.salt()]);
        let risk_seed = seed::derive(run_seed, &[10 + arm.salt()]);
        let agreement_seed = seed::derive(run_seed, &[20 + arm.salt()]);
        let mut oracle = BudgetedOracle::new(
            &pool,
            &config.spec,
            budget,
            oracle_seed,
            config.recharge_duplicates,
        );

        let (classifier, active_set_size, retained_size, trace_csv) = match arm {
            Arm::Kalls => {
                let params =
                    KallsParams::from_spec(&config.spec, config.epsilon, config.delta, budget);
                let run = run_kalls(&pool, &mut oracle, &params)?;
                let trace = if config.collect_artifacts {
                    let mut buf = Vec::new();
                    run.trace.write_csv(&mut buf)?;
                    Some(String::from_utf8(buf).expect("trace CSV is UTF-8"))
                } else {
                    None
                };
                let retained = run.active_set.retained(config.delta).len();
                (run.classifier, run.active_set.len(), retained, trace)
            }
            Arm::Passive => {
                let params = PassiveParams {
                    alpha: config.spec.alpha,
                    beta: config.spec.beta,
                    dim: config.spec.dim(),
                    k_override: None,
                };
                let classifier = train_passive(&pool, &mut oracle, budget, &params)?;
                let n = classifier.len();
                (classifier, n, n, None)
            }
        };

        let risk = excess_risk(&classifier, &config.spec, config.risk_m, risk_seed)?;
        let agreement =
            match margin_agreement(&classifier, &config.spec, dh, config.agreement_m, agreement_seed)
            {
                Ok(a) => Some(a),
                Err(Error::NoMarginSamples { .. }) => None,
                Err(e) => return Err(e),
            };

        let query_log_csv = if config.collect_artifacts {
            let mut buf = Vec::new();
            oracle.write_query_log_csv(&mut buf)?;
            Some(String::from_utf8(buf).expect("query log CSV is UTF-8"))
        } else {
            None
        };

        outcomes.push(SweepOutcome {
            row: ExperimentRow {
                family: config.spec.name().to_string(),
                mode: arm.name().to_string(),
                n: budget,
                seed: run_seed,
                excess_risk: risk.mean,
                std_error: risk.std_error,
                margin_agreement: agreement,
                active_set_size,
                retained_size,
                degenerate_flag: risk.degenerate,
            },
            budget_index: bi,
            replication: rep,
            trace_csv,
            query_log_csv,
        });
    }
    Ok(outcomes)
}

/// Write rows in the experiment CSV schema.
pub fn write_rows_csv<W: Write>(rows: &[ExperimentRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read rows back, naming the first malformed row on failure.
pub fn read_rows_csv<R: std::io::Read>(reader: R) -> Result<Vec<ExperimentRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in rdr.deserialize::<ExperimentRow>().enumerate() {
        // Line 1 is the header.
        let row = record.map_err(|e| Error::invalid(format!("bad CSV row at line {}: {e}", i + 2)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Per-(family, mode) aggregation: mean risk per budget and the fitted
/// log-log convergence exponent.
#[derive(Debug, Clone)]
pub struct RateSummary {
    pub family: String,
    pub mode: String,
    /// (budget, mean excess risk, runs averaged).
    pub per_budget: Vec<(usize, f64, usize)>,
    pub degenerate_runs: usize,
    /// None when fewer than two budgets carry positive mean risk.
    pub fit: Option<crate::eval::RateFit>,
}

/// Group rows by (family, mode), average risk per budget, and fit the rate.
/// Output order is lexicographic in (family, mode).
pub fn summarize_rates(rows: &[ExperimentRow]) -> Vec<RateSummary> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, String), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut degenerate: BTreeMap<(String, String), usize> = BTreeMap::new();
    for row in rows {
        let key = (row.family.clone(), row.mode.clone());
        groups.entry(key.clone()).or_default().entry(row.n).or_default().push(row.excess_risk);
        if row.degenerate_flag {
            *degenerate.entry(key).or_default() += 1;
        }
    }
    groups
        .into_iter()
        .map(|((family, mode), budgets)| {
            let per_budget: Vec<(usize, f64, usize)> = budgets
                .into_iter()
                .map(|(n, risks)| (n, risks.iter().sum::<f64>() / risks.len() as f64, risks.len()))
                .collect();
            let points: Vec<(usize, f64)> = per_budget.iter().map(|&(n, r, _)| (n, r)).collect();
            let fit = crate::eval::fit_rate(&points).ok();
            RateSummary {
                degenerate_runs: degenerate.get(&(family.clone(), mode.clone())).copied().unwrap_or(0),
                family,
                mode,
                per_budget,
                fit,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SweepConfig {
        let mut config = SweepConfig::new(
            ProblemSpec::linear_1d(),
            Mode::Both,
            300,
            vec![50, 100],
        );
        config.replications = 2;
        config.base_seed = 42;
        config.risk_m = 2_000;
        config.agreement_m = 2_000;
        config
    }

    #[test]
    fn sweep_row_count_and_order() {
        let outcomes = run_sweep(&small_config()).unwrap();
        // 2 budgets x 2 replications x 2 modes, in canonical order.
        assert_eq!(outcomes.len(), 8);
        let key: Vec<(usize, usize, &str)> = outcomes
            .iter()
            .map(|o| (o.row.n, o.replication, o.row.mode.as_str()))
            .collect();
        let mut expected = Vec::new();
        for n in [50, 100] {
            for rep in 0..2 {
                for mode in ["kalls", "passive"] {
                    expected.push((n, rep, mode));
                }
            }
        }
        assert_eq!(key, expected);
    }

    #[test]
    fn sweep_is_byte_deterministic() {
        let config = small_config();
        let rows1: Vec<ExperimentRow> =
            run_sweep(&config).unwrap().into_iter().map(|o| o.row).collect();
        let rows2: Vec<ExperimentRow> =
            run_sweep(&config).unwrap().into_iter().map(|o| o.row).collect();
        let mut csv1 = Vec::new();
        write_rows_csv(&rows1, &mut csv1).unwrap();
        let mut csv2 = Vec::new();
        write_rows_csv(&rows2, &mut csv2).unwrap();
        assert_eq!(csv1, csv2);
    }

    #[test]
    fn csv_round_trip() {
        let config = small_config();
        let rows: Vec<ExperimentRow> =
            run_sweep(&config).unwrap().into_iter().map(|o| o.row).collect();
        let mut buf = Vec::new();
        write_rows_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "family,mode,n,seed,excess_risk,std_error,margin_agreement,active_set_size,retained_size,degenerate_flag"
        ));
        let back = read_rows_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.n, b.n);
            assert_eq!(a.excess_risk, b.excess_risk);
            assert_eq!(a.mode, b.mode);
        }
    }

    #[test]
    fn malformed_csv_names_the_row() {
        let text = "family,mode,n,seed,excess_risk,std_error,margin_agreement,active_set_size,retained_size,degenerate_flag\nlinear-1d,kalls,10,1,0.5,0.1,,3,2,false\nlinear-1d,kalls,not-a-number,1,0.5,0.1,,3,2,false\n";
        let err = read_rows_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut config = small_config();
        config.budgets = vec![500];
        assert!(run_sweep(&config).is_err(), "budget above pool size");
        config.budgets = vec![];
        assert!(run_sweep(&config).is_err());
        config.budgets = vec![0];
        assert!(run_sweep(&config).is_err());
    }

    #[test]
    fn summaries_group_and_fit() {
        let rows: Vec<ExperimentRow> = [(10usize, 0.1f64), (100, 0.01), (1000, 0.001)]
            .iter()
            .flat_map(|&(n, risk)| {
                ["kalls", "passive"].into_iter().map(move |mode| ExperimentRow {
                    family: "linear-1d".into(),
                    mode: mode.into(),
                    n,
                    seed: 1,
                    excess_risk: if mode == "kalls" { risk } else { risk * 2.0 },
                    std_error: 0.0,
                    margin_agreement: None,
                    active_set_size: 1,
                    retained_size: 1,
                    degenerate_flag: false,
                })
            })
            .collect();
        let summaries = summarize_rates(&rows);
        assert_eq!(summaries.len(), 2);
        assert_eq!(summaries[0].mode, "kalls");
        assert_eq!(summaries[1].mode, "passive");
        for s in &summaries {
            let fit = s.fit.as_ref().unwrap();
            assert!((fit.slope + 1.0).abs() < 1e-12);
            assert_eq!(s.per_budget.len(), 3);
            assert_eq!(s.per_budget[0].2, 1);
        }
    }

    #[test]
    fn artifacts_are_collected_on_request() {
        let mut config = small_config();
        config.budgets = vec![30];
        config.replications = 1;
        config.collect_artifacts = true;
        let outcomes = run_sweep(&config).unwrap();
        let kalls = outcomes.iter().find(|o| o.row.mode == "kalls").unwrap();
        assert!(kalls.trace_csv.as_ref().unwrap().starts_with("s,decision"));
        assert!(kalls.query_log_csv.as_ref().unwrap().starts_with("order,pool_index"));
        let passive = outcomes.iter().find(|o| o.row.mode == "passive").unwrap();
        assert!(passive.trace_csv.is_none());
        assert!(passive.query_log_csv.as_ref().unwrap().lines().count() > 1);
    }
}
