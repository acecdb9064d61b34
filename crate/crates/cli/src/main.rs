// SPDX-License-Identifier: Apache-2.0

//! `dp-select`: experiments, audits and bound tables for private selection.
//!
//! Exit codes: 0 success, 1 a check failed, 2 configuration or IO error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dp_select_core::analysis::{
    dp_audit, rnm_error_bound, snm_error_bound, AuditReport, AuditTarget,
};
use dp_select_core::experiment::{ExperimentResult, Mode, ResultRow};
use dp_select_core::mechanisms::{Mechanism, Selector};
use dp_select_core::noise::PrivacyBudget;
use dp_select_core::percentile::{
    load_percentile_csv, run_percentile_experiment, synthetic_percentile_data, PercentileConfig,
    PercentileInstance, PercentileModel, SmoothRule,
};
use dp_select_core::rng::seeded;
use dp_select_core::sensitivity::{CountingUtility, Database, UtilityModel};
use dp_select_core::trees::{
    reproduce_smooth_em_counterexample, run_forest_experiment, run_tree_experiment,
    synthetic_tabular, ForestExperimentConfig, LeafModel, Schema, SplitMechanism, TabularDataset,
    TreeExperimentConfig,
};

const UNSAFE_NAME: &str = "UNSAFE-EM-Smooth";

#[derive(Parser, Debug)]
#[command(name = "dp-select", version, about = "Private selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Absolute expected error of private percentile selection.
    Percentile(PercentileArgs),
    /// Cross-validated accuracy of private ID3.
    Tree(TreeArgs),
    /// Train/test accuracy of private random forests.
    Forest(ForestArgs),
    /// Empirical privacy audit on a pair of neighbouring databases.
    Audit(AuditArgs),
    /// Expected-error bounds of SNM and report-noisy-max.
    Bounds(BoundsArgs),
    /// The smooth-sensitivity exponential mechanism counterexample.
    Counterexample(OutArgs),
}

#[derive(Args, Debug, Serialize)]
struct OutArgs {
    /// Output stem; `.csv` and `.json` are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock times in the CSV (breaks byte-stability).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug, Serialize)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Student's t degrees of freedom.
    #[arg(long, default_value_t = 3)]
    dof: u32,
    /// Laplace log-normal sigma.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct PercentileArgs {
    /// One value per line; defaults to the bundled synthetic instance.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    p: u32,
    #[arg(long, default_value_t = 100.0)]
    lambda: f64,
    /// Repetition radius of the synthetic instance.
    #[arg(long, default_value_t = 5)]
    synthetic_j: usize,
    /// Size of the synthetic instance.
    #[arg(long, default_value_t = 101)]
    synthetic_n: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "SNM-Lap,SNM-T,SNM-LLN,EM,PF,RNM-Lap,RNM-Exp,RNM-Gum"
    )]
    mechanisms: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
    epsilons: Vec<f64>,
    #[arg(long, default_value = "oracle")]
    mode: String,
    /// Draws per cell in Monte Carlo mode.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// `published` or `exact`.
    #[arg(long, default_value = "published")]
    smooth_rule: String,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct TableArgs {
    /// CSV with a header row.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSON schema sidecar, required with `--dataset`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Rows of bundled synthetic data when no dataset is given.
    #[arg(long, default_value_t = 4000)]
    synthetic_n: usize,
    /// Label noise of the synthetic data.
    #[arg(long, default_value_t = 0.05)]
    synthetic_flip: f64,
}

#[derive(Args, Debug, Serialize)]
struct TreeArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "EM-InfoGain,PF-InfoGain,SNM-MaxOp-Lap"
    )]
    mechanisms: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    depth: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 5)]
    runs: usize,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct ForestArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, value_delimiter = ',', default_value = "EM,PF,SNM-Lap")]
    mechanisms: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.5,1")]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    trees: usize,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value = "published")]
    smooth_rule: String,
    #[command(flatten)]
    noise: NoiseArgs,
    #[command(flatten)]
    output: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct AuditArgs {
    /// Mechanisms to audit; `UNSAFE-EM-Smooth` is the non-private
    /// smooth-sensitivity exponential mechanism.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "EM,PF,RNM-Lap,RNM-Exp,RNM-Gum,SNM-Lap,SNM-T,SNM-LLN"
    )]
    mechanisms: Vec<String>,
    /// `leaf`, `counting` or `percentile`.
    #[arg(long, default_value = "leaf")]
    utility: String,
    /// Counts of the first database.
    #[arg(long, value_delimiter = ',', default_value = "22,8,17,4,0")]
    x: Vec<u32>,
    /// Counts of its neighbour.
    #[arg(long, value_delimiter = ',', default_value = "22,8,18,4,0")]
    y: Vec<u32>,
    #[arg(long, default_value_t = 50)]
    p: u32,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value = "published")]
    smooth_rule: String,
    /// Required to run the non-private mechanism.
    #[arg(long)]
    acknowledge_unsafe: bool,
    #[command(flatten)]
    noise: NoiseArgs,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BoundsArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
    epsilons: Vec<f64>,
    /// Smooth sensitivity used by SNM.
    #[arg(long, default_value_t = 0.5)]
    smooth: f64,
    /// Global sensitivity used by report-noisy-max.
    #[arg(long, default_value_t = 1.0)]
    delta_u: f64,
    /// Number of outcomes.
    #[arg(long, default_value_t = 10)]
    outcomes: usize,
    #[command(flatten)]
    output: OutArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|_| run(cli.command));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("DP_SELECT_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("DP_SELECT_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("DP_SELECT_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

/// `Ok(false)` when a check fails.
fn run(command: Command) -> anyhow::Result<bool> {
    match command {
        Command::Percentile(a) => cmd_percentile(&a).map(|_| true),
        Command::Tree(a) => cmd_tree(&a).map(|_| true),
        Command::Forest(a) => cmd_forest(&a).map(|_| true),
        Command::Audit(a) => cmd_audit(&a),
        Command::Bounds(a) => cmd_bounds(&a).map(|_| true),
        Command::Counterexample(a) => cmd_counterexample(&a),
    }
}

fn check_epsilons(eps: &[f64]) -> anyhow::Result<()> {
    if eps.is_empty() {
        bail!("--epsilons is empty");
    }
    for &e in eps {
        PrivacyBudget::pure(e)?;
    }
    Ok(())
}

fn parse_mechanisms(names: &[String], dof: u32, sigma: f64) -> anyhow::Result<Vec<Mechanism>> {
    names
        .iter()
        .map(|n| Mechanism::parse_with(n, dof, sigma).with_context(|| format!("mechanism `{n}`")))
        .collect()
}

fn emit<C: Serialize>(config: C, rows: Vec<ResultRow>, out: &OutArgs) -> anyhow::Result<()> {
    let mut result = ExperimentResult::new(config);
    for r in rows {
        result.push(r);
    }
    match &out.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            result
                .write_files(path, out.timing)
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!(
                "wrote {} and {}",
                path.with_extension("csv").display(),
                path.with_extension("json").display()
            );
        }
        None => result.write_csv(std::io::stdout().lock(), out.timing)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct Recorded<'a, A: Serialize, C: Serialize> {
    command: &'a str,
    args: &'a A,
    resolved: C,
}

fn cmd_percentile(a: &PercentileArgs) -> anyhow::Result<()> {
    check_epsilons(&a.epsilons)?;
    let data = match &a.dataset {
        Some(path) => load_percentile_csv(path)?,
        None => synthetic_percentile_data(a.synthetic_n, a.lambda, a.p, a.synthetic_j)?,
    };
    let inst = PercentileInstance::new(data, a.lambda, a.p)?;
    let cfg = PercentileConfig {
        mechanisms: parse_mechanisms(&a.mechanisms, a.noise.dof, a.noise.sigma)?,
        epsilons: a.epsilons.clone(),
        delta: a.noise.delta,
        mode: a.mode.parse::<Mode>()?,
        trials: a.trials,
        seed: a.noise.seed,
        rule: a.smooth_rule.parse::<SmoothRule>()?,
    };
    let rows = run_percentile_experiment(&inst, &cfg)?;
    emit(
        Recorded {
            command: "percentile",
            args: a,
            resolved: &cfg,
        },
        rows,
        &a.output,
    )
}

fn load_table(t: &TableArgs, seed: u64) -> anyhow::Result<TabularDataset> {
    match (&t.dataset, &t.schema) {
        (Some(data), Some(schema)) => Ok(TabularDataset::load_csv(data, Schema::load(schema)?)?),
        (Some(_), None) => bail!("--schema is required with --dataset"),
        (None, _) => Ok(synthetic_tabular(
            t.synthetic_n,
            t.synthetic_flip,
            &mut seeded(seed),
        )),
    }
}

fn cmd_tree(a: &TreeArgs) -> anyhow::Result<()> {
    check_epsilons(&a.epsilons)?;
    let data = load_table(&a.table, a.noise.seed)?;
    let splits = a
        .mechanisms
        .iter()
        .map(|n| {
            SplitMechanism::parse_with(n, a.noise.dof, a.noise.sigma)
                .with_context(|| format!("split `{n}`"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let cfg = TreeExperimentConfig {
        splits,
        epsilons: a.epsilons.clone(),
        delta: a.noise.delta,
        depth: a.depth,
        folds: a.folds,
        runs: a.runs,
        seed: a.noise.seed,
    };
    let rows = run_tree_experiment(&data, &cfg)?;
    emit(
        Recorded {
            command: "tree",
            args: a,
            resolved: &cfg,
        },
        rows,
        &a.output,
    )
}

fn cmd_forest(a: &ForestArgs) -> anyhow::Result<()> {
    check_epsilons(&a.epsilons)?;
    let data = load_table(&a.table, a.noise.seed)?;
    let cfg = ForestExperimentConfig {
        mechanisms: parse_mechanisms(&a.mechanisms, a.noise.dof, a.noise.sigma)?,
        rule: a.smooth_rule.parse()?,
        epsilons: a.epsilons.clone(),
        delta: a.noise.delta,
        trees: a.trees,
        depth: a.depth,
        runs: a.runs,
        train_fraction: 0.8,
        seed: a.noise.seed,
    };
    let rows = run_forest_experiment(&data, &cfg)?;
    emit(
        Recorded {
            command: "forest",
            args: a,
            resolved: &cfg,
        },
        rows,
        &a.output,
    )
}

fn audit_utility(a: &AuditArgs) -> anyhow::Result<Box<dyn UtilityModel>> {
    if a.x.len() != a.y.len() || a.x.is_empty() {
        bail!("--x and --y need the same non-zero number of counts");
    }
    let n = a.x.len();
    let rule: SmoothRule = a.smooth_rule.parse()?;
    Ok(match a.utility.as_str() {
        "leaf" => Box::new(LeafModel {
            labels: n,
            rule: Some(rule),
        }),
        "counting" => Box::new(CountingUtility { universe_size: n }),
        "percentile" => Box::new(PercentileModel::new(
            (0..n).map(|i| i as f64).collect(),
            a.p,
            rule,
        )),
        other => bail!("unknown utility `{other}` (leaf, counting, percentile)"),
    })
}

#[derive(Serialize)]
struct AuditFile<'a> {
    config: &'a AuditArgs,
    reports: &'a [AuditReport],
}

fn cmd_audit(a: &AuditArgs) -> anyhow::Result<bool> {
    let u = audit_utility(a)?;
    let x = Database::from_counts(a.x.clone());
    let y = Database::from_counts(a.y.clone());
    let budget = PrivacyBudget::new(a.epsilon, a.noise.delta)?;
    let mut reports = Vec::new();
    for name in &a.mechanisms {
        let target = if name.eq_ignore_ascii_case(UNSAFE_NAME) {
            if !a.acknowledge_unsafe {
                bail!("{UNSAFE_NAME} is not differentially private; pass --acknowledge-unsafe to audit it");
            }
            AuditTarget::UnsafeSmoothEm {
                epsilon: a.epsilon,
                beta: a.epsilon,
            }
        } else {
            let m = Mechanism::parse_with(name, a.noise.dof, a.noise.sigma)?;
            AuditTarget::Private {
                selector: Selector::new(m, budget).with_context(|| format!("calibrating {m}"))?,
            }
        };
        let rep = dp_audit(&target, u.as_ref(), &x, &y, budget, a.trials, a.noise.seed)?;
        let flagged: Vec<String> = rep
            .flagged_outcomes()
            .iter()
            .map(|r| format!("C{}", r + 1))
            .collect();
        println!(
            "{:<18} {}",
            rep.mechanism,
            if flagged.is_empty() {
                "ok".to_string()
            } else {
                format!("FLAGGED {}", flagged.join(","))
            }
        );
        reports.push(rep);
    }
    if let Some(path) = &a.out {
        write_json(
            path,
            &AuditFile {
                config: a,
                reports: &reports,
            },
        )?;
    }
    Ok(reports.iter().all(|r| !r.flagged))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_bounds(a: &BoundsArgs) -> anyhow::Result<()> {
    check_epsilons(&a.epsilons)?;
    if a.smooth.is_nan()
        || a.smooth <= 0.0
        || a.delta_u.is_nan()
        || a.delta_u <= 0.0
        || a.outcomes == 0
    {
        bail!("--smooth and --delta-u must be positive and --outcomes non-zero");
    }
    let mut rows = Vec::new();
    for &eps in &a.epsilons {
        for (mechanism, value) in [
            ("SNM-Lap", snm_error_bound(a.smooth, eps, a.outcomes)),
            ("RNM-Exp", rnm_error_bound(a.delta_u, eps, a.outcomes)),
        ] {
            rows.push(ResultRow {
                application: "bounds".into(),
                mechanism: mechanism.into(),
                epsilon: eps,
                delta: 0.0,
                metric: "expected_error_bound".into(),
                value,
                bound: Some(value),
                seed: 0,
                runtime_ms: 0.0,
            });
        }
    }
    emit(a, rows, &a.output)
}

fn cmd_counterexample(a: &OutArgs) -> anyhow::Result<bool> {
    let r = reproduce_smooth_em_counterexample()?;
    println!(
        "Pr_x[C3] = {:.4}  Pr_y[C3] = {:.4}  e^{}*Pr_x[C3] = {:.4}  {}",
        r.prob_x,
        r.prob_y,
        r.epsilon,
        r.envelope,
        if r.violated {
            "violated"
        } else {
            "not violated"
        }
    );
    if let Some(path) = &a.out {
        write_json(&path.with_extension("json"), &r)?;
    }
    Ok(r.violated)
}
