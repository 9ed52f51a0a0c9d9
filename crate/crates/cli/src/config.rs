//! Flat key-value experiment configuration with command-line overrides.
//!
//! The file format is one `key = value` pair per line; `#` starts a comment.
//! Every key can also be set (and overrides the file) on the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kalls_core::sweep::{Mode, SweepConfig};
use kalls_core::ProblemSpec;

/// A usage or configuration error; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

/// All run settings, before resolution into a [`SweepConfig`].
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    pub family: Option<String>,
    pub mode: Option<String>,
    pub pool_size: Option<usize>,
    pub budgets: Option<Vec<usize>>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
    pub recharge_duplicates: Option<bool>,
    pub risk_m: Option<usize>,
    pub agreement_m: Option<usize>,
}

impl RawConfig {
    /// Parse the flat key-value file format.
    pub fn from_file(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut pairs = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!(
                    "{}:{}: expected 'key = value', got '{line}'",
                    path.display(),
                    lineno + 1
                ));
            };
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        RawConfig::from_pairs(pairs)
    }

    fn from_pairs(mut pairs: BTreeMap<String, String>) -> Result<RawConfig> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| ConfigError(format!("config key '{key}': cannot parse '{value}'")))
        }

        let mut config = RawConfig::default();
        if let Some(v) = pairs.remove("family") {
            config.family = Some(v);
        }
        if let Some(v) = pairs.remove("mode") {
            config.mode = Some(v);
        }
        if let Some(v) = pairs.remove("pool_size") {
            config.pool_size = Some(parse("pool_size", &v)?);
        }
        if let Some(v) = pairs.remove("budgets") {
            let budgets = v
                .split(',')
                .map(|b| parse::<usize>("budgets", b.trim()))
                .collect::<Result<Vec<_>>>()?;
            config.budgets = Some(budgets);
        }
        if let Some(v) = pairs.remove("epsilon") {
            config.epsilon = Some(parse("epsilon", &v)?);
        }
        if let Some(v) = pairs.remove("delta") {
            config.delta = Some(parse("delta", &v)?);
        }
        if let Some(v) = pairs.remove("reps") {
            config.reps = Some(parse("reps", &v)?);
        }
        if let Some(v) = pairs.remove("seed") {
            config.seed = Some(parse("seed", &v)?);
        }
        if let Some(v) = pairs.remove("out_csv") {
            config.out_csv = Some(PathBuf::from(v));
        }
        if let Some(v) = pairs.remove("out_json") {
            config.out_json = Some(PathBuf::from(v));
        }
        if let Some(v) = pairs.remove("trace_dir") {
            config.trace_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = pairs.remove("recharge_duplicates") {
            config.recharge_duplicates = Some(parse("recharge_duplicates", &v)?);
        }
        if let Some(v) = pairs.remove("risk_m") {
            config.risk_m = Some(parse("risk_m", &v)?);
        }
        if let Some(v) = pairs.remove("agreement_m") {
            config.agreement_m = Some(parse("agreement_m", &v)?);
        }
        if let Some(key) = pairs.keys().next() {
            return err(format!("unknown config key '{key}'"));
        }
        Ok(config)
    }

    /// Overlay `other` (command-line values) on top of `self`.
    pub fn overlay(mut self, other: RawConfig) -> RawConfig {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            family, mode, pool_size, budgets, epsilon, delta, reps, seed, out_csv, out_json,
            trace_dir, recharge_duplicates, risk_m, agreement_m
        );
        self
    }

    /// Resolve into a sweep plus output paths.
    pub fn resolve(self) -> Result<ResolvedConfig> {
        let family = match self.family {
            Some(f) => f,
            None => return err("missing 'family' (config key or --family)"),
        };
        let spec = ProblemSpec::parse(&family).map_err(|e| ConfigError(e.to_string()))?;
        let mode: Mode = self
            .mode
            .as_deref()
            .unwrap_or("kalls")
            .parse()
            .map_err(|e: kalls_core::Error| ConfigError(e.to_string()))?;
        let pool_size = match self.pool_size {
            Some(w) => w,
            None => return err("missing 'pool_size' (config key or --pool-size)"),
        };
        let budgets = match self.budgets {
            Some(b) if !b.is_empty() => b,
            _ => return err("missing 'budgets' (config key or --budgets)"),
        };

        let mut sweep = SweepConfig::new(spec, mode, pool_size, budgets);
        sweep.epsilon = self.epsilon.unwrap_or(0.2);
        sweep.delta = self.delta.unwrap_or(0.1);
        sweep.replications = self.reps.unwrap_or(1);
        sweep.base_seed = self.seed.unwrap_or(0);
        sweep.recharge_duplicates = self.recharge_duplicates.unwrap_or(false);
        sweep.risk_m = self.risk_m.unwrap_or(10_000);
        sweep.agreement_m = self.agreement_m.unwrap_or(10_000);
        sweep.collect_artifacts = self.trace_dir.is_some();

        let out_csv = self.out_csv.unwrap_or_else(|| PathBuf::from("results.csv"));
        let out_json = self
            .out_json
            .unwrap_or_else(|| out_csv.with_extension("json"));
        Ok(ResolvedConfig { sweep, out_csv, out_json, trace_dir: self.trace_dir })
    }
}

#[derive(Debug)]
pub struct ResolvedConfig {
    pub sweep: SweepConfig,
    pub out_csv: PathBuf,
    pub out_json: PathBuf,
    pub trace_dir: Option<PathBuf>,
}
