//! Experiment runner: seeded budget sweeps, assumption verification, and
//! log-log rate reports.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RawConfig;

const CSV_SCHEMA: &str =
    "family,mode,n,seed,excess_risk,std_error,margin_agreement,active_set_size,retained_size,degenerate_flag";

#[derive(Parser)]
#[command(
    name = "kalls",
    about = "Budgeted pool-based active learning experiments",
    long_about = None,
    after_help = format!(
        "Exit codes: 0 success, 1 usage/config error, 2 verification failure.\n\
         Experiment CSV schema: {CSV_SCHEMA}\n\
         Config file: flat `key = value` lines (# comments); keys match the run flags\n\
         plus out_csv/out_json/trace_dir/risk_m/agreement_m."
    )
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded sweep over budgets and replications, writing CSV + JSON.
    Run(RunArgs),
    /// Check a family's declared assumptions by Monte Carlo.
    Verify(VerifyArgs),
    /// Fit convergence rates from an experiment CSV and print the slopes.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key-value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem family, e.g. linear-1d, power-margin:kappa=2, gaussian-1d.
    #[arg(long)]
    family: Option<String>,
    /// kalls, passive, or both.
    #[arg(long)]
    mode: Option<String>,
    /// Pool size w.
    #[arg(long)]
    pool_size: Option<usize>,
    /// Comma-separated label budgets.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    /// Target excess risk.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Confidence parameter.
    #[arg(long)]
    delta: Option<f64>,
    /// Replications per budget.
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; every run seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (JSON summary lands next to it unless --out-json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output JSON summary path.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Directory for per-run trace and query-log CSVs.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Charge the budget for repeated labels of the same pool point.
    #[arg(long)]
    recharge_duplicates: bool,
    /// Monte Carlo test size for excess risk.
    #[arg(long)]
    risk_m: Option<usize>,
    /// Monte Carlo test size for margin agreement.
    #[arg(long)]
    agreement_m: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem family name.
    #[arg(long)]
    family: String,
    /// Seed for the verification samples.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Experiment CSV produced by `run`.
    csv: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, String> {
    let file = match &args.config {
        Some(path) => RawConfig::from_file(path).map_err(|e| e.to_string())?,
        None => RawConfig::default(),
    };
    let cli_overrides = RawConfig {
        family: args.family,
        mode: args.mode,
        pool_size: args.pool_size,
        budgets: args.budgets,
        epsilon: args.epsilon,
        delta: args.delta,
        reps: args.reps,
        seed: args.seed,
        out_csv: args.out,
        out_json: args.out_json,
        trace_dir: args.trace_dir,
        recharge_duplicates: if args.recharge_duplicates { Some(true) } else { None },
        risk_m: args.risk_m,
        agreement_m: args.agreement_m,
    };
    let resolved = file.overlay(cli_overrides).resolve().map_err(|e| e.to_string())?;

    let outcomes = kalls_core::sweep::run_sweep(&resolved.sweep).map_err(|e| e.to_string())?;
    let rows: Vec<kalls_core::sweep::ExperimentRow> =
        outcomes.iter().map(|o| o.row.clone()).collect();

    let mut csv_bytes = Vec::new();
    kalls_core::sweep::write_rows_csv(&rows, &mut csv_bytes).map_err(|e| e.to_string())?;
    std::fs::write(&resolved.out_csv, &csv_bytes)
        .map_err(|e| format!("cannot write {}: {e}", resolved.out_csv.display()))?;

    let sweep = &resolved.sweep;
    let summary = serde_json::json!({
        "config": {
            "family": sweep.spec.name(),
            "mode": format!("{:?}", sweep.mode).to_lowercase(),
            "pool_size": sweep.pool_size,
            "budgets": sweep.budgets,
            "epsilon": sweep.epsilon,
            "delta": sweep.delta,
            "replications": sweep.replications,
            "base_seed": sweep.base_seed,
            "recharge_duplicates": sweep.recharge_duplicates,
            "risk_m": sweep.risk_m,
            "agreement_m": sweep.agreement_m,
        },
        "runs": rows,
    });
    let json_text = format!("{:#}\n", summary);
    std::fs::write(&resolved.out_json, json_text)
        .map_err(|e| format!("cannot write {}: {e}", resolved.out_json.display()))?;

    if let Some(dir) = &resolved.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        for outcome in &outcomes {
            let stem = format!(
                "b{}_n{}_rep{}_{}",
                outcome.budget_index, outcome.row.n, outcome.replication, outcome.row.mode
            );
            if let Some(trace) = &outcome.trace_csv {
                std::fs::write(dir.join(format!("trace_{stem}.csv")), trace)
                    .map_err(|e| e.to_string())?;
            }
            if let Some(log) = &outcome.query_log_csv {
                std::fs::write(dir.join(format!("queries_{stem}.csv")), log)
                    .map_err(|e| e.to_string())?;
            }
        }
    }

    println!(
        "wrote {} rows to {} (summary: {})",
        rows.len(),
        resolved.out_csv.display(),
        resolved.out_json.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, String> {
    use kalls_core::problems::{
        theorem1_constant, verify_holder, verify_margin_noise, verify_smoothness, verify_theorem1,
        AssumptionReport, DEFAULT_SLACK_SIGMA,
    };

    let spec = kalls_core::ProblemSpec::parse(&args.family).map_err(|e| e.to_string())?;
    println!(
        "family {} (d={}, alpha={}, L={}, beta={}, C={})",
        spec.name(),
        spec.dim(),
        spec.alpha,
        spec.smooth_l,
        spec.beta,
        spec.margin_c
    );

    const MARGIN_SAMPLE: usize = 100_000;
    const PAIRS: usize = 200;
    const MASS_SAMPLE: usize = 100_000;
    const EPS_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.5];

    let mut all_passed = true;
    let mut print = |name: &str, label: &str, report: &AssumptionReport| {
        println!(
            "{name} ({label}): {} worst_ratio={:.4} tested={}",
            if report.passed { "PASS" } else { "FAIL" },
            report.worst_ratio,
            report.tested_points
        );
        all_passed &= report.passed;
    };

    match verify_holder(&spec, PAIRS, args.seed) {
        Ok(report) => print("H1", "Hölder continuity of eta", &report),
        Err(e) => println!("H1 (Hölder continuity of eta): SKIPPED ({e})"),
    }

    let h3 = verify_margin_noise(&spec, MARGIN_SAMPLE, &EPS_GRID, args.seed, DEFAULT_SLACK_SIGMA)
        .map_err(|e| e.to_string())?;
    print("H3", "margin noise", &h3);

    let h4 = verify_smoothness(&spec, PAIRS, MASS_SAMPLE, args.seed, DEFAULT_SLACK_SIGMA)
        .map_err(|e| e.to_string())?;
    print("H4", "ball-mass smoothness", &h4);

    match verify_theorem1(&spec, PAIRS, MASS_SAMPLE, args.seed, DEFAULT_SLACK_SIGMA) {
        Ok(report) => {
            let l = theorem1_constant(&spec).expect("metadata checked");
            print("T1", &format!("Hölder + density floor, derived L={l:.3}"), &report);
        }
        Err(e) => println!("T1 (Hölder + density floor): SKIPPED ({e})"),
    }

    match spec.density_floor {
        Some(p_min) => println!("H2 (strong density): declared floor p_min={p_min} [diagnostic only; unused by the learner]"),
        None => println!("H2 (strong density): no density floor declared [diagnostic only; unused by the learner]"),
    }

    if all_passed {
        println!("verification: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verification: FAIL");
        Ok(ExitCode::from(2))
    }
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, String> {
    let file = std::fs::File::open(&args.csv)
        .map_err(|e| format!("cannot open {}: {e}", args.csv.display()))?;
    let rows = kalls_core::sweep::read_rows_csv(file).map_err(|e| e.to_string())?;
    if rows.is_empty() {
        return Err("CSV contains no data rows".into());
    }

    let summaries = kalls_core::sweep::summarize_rates(&rows);
    println!("{:<24} {:<8} {:>8} {:>9} {:>10} {:>7} {:>6}", "family", "mode", "budgets", "slope", "intercept", "r2", "degen");
    for s in &summaries {
        match &s.fit {
            Some(fit) => println!(
                "{:<24} {:<8} {:>8} {:>9.3} {:>10.3} {:>7.3} {:>6}",
                s.family,
                s.mode,
                s.per_budget.len(),
                fit.slope,
                fit.intercept,
                fit.r_squared,
                s.degenerate_runs
            ),
            None => println!(
                "{:<24} {:<8} {:>8} {:>9} {:>10} {:>7} {:>6}",
                s.family,
                s.mode,
                s.per_budget.len(),
                "-",
                "-",
                "-",
                s.degenerate_runs
            ),
        }
        for &(n, risk, runs) in &s.per_budget {
            println!("    n={n:<8} mean_risk={risk:<12.6} runs={runs}");
        }
    }

    // Active-minus-passive slope gap per family.
    use std::collections::BTreeMap;
    let mut by_family: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for s in &summaries {
        let slot = by_family.entry(s.family.as_str()).or_default();
        let slope = s.fit.as_ref().map(|f| f.slope);
        match s.mode.as_str() {
            "kalls" => slot.0 = slope,
            "passive" => slot.1 = slope,
            _ => {}
        }
    }
    for (family, (kalls, passive)) in by_family {
        if let (Some(k), Some(p)) = (kalls, passive) {
            println!("{family}: slope gap (kalls - passive) = {:.3}", k - p);
        }
    }
    Ok(ExitCode::SUCCESS)
}
