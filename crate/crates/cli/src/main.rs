use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairrec::dataset::{kfold_split, load_dataset, Dataset, DatasetPaths, GroupDesignation};
use fairrec::harness::{run_sweep, Band, SweepConfig, SweepOptions, DEFAULT_FOLDS, DEFAULT_SEED};
use fairrec::metrics::CategoryRanking;
use fairrec::models::Algorithm;
use fairrec::params::HyperParams;
use fairrec::report::{build_report, verify, write_report, ReportOptions};
use fairrec::{Error, Result};

/// Recommender bias audits: dataset inspection, cross-validated sweeps,
/// and bias-disparity reports.
#[derive(Parser)]
#[command(name = "fairrec", version)]
struct Cli {
    /// Seed for fold assignment and model initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of cross-validation folds [default: 5].
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Recommendation list size [default: 10].
    #[arg(long, global = true)]
    list_size: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and print its statistics.
    Inspect {
        #[command(flatten)]
        data: DataArgs,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Write the per-fold train/test files.
    Split {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run a hyperparameter sweep into the output directory.
    Sweep {
        /// Sweep configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run these algorithms with default parameters (repeatable).
        #[arg(long = "algorithm")]
        algorithms: Vec<String>,
        #[command(flatten)]
        data: DataArgs,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Execute at most this many runs, leaving the rest for a rerun.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Build tables and charts from a sweep directory.
    Report {
        /// Sweep output directory.
        #[arg(long)]
        ledger: PathBuf,
        /// Override a band, e.g. `model_based=0.023:0.001`.
        #[arg(long = "band")]
        bands: Vec<String>,
        /// Categories per group in the bias tables.
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Rank categories by training preference ratio or bias.
        #[arg(long, value_enum, default_value_t = RankBy::Pr)]
        rank_by: RankBy,
    },
    /// Recompute a report from its ledger and compare.
    Verify {
        #[arg(long)]
        ledger: PathBuf,
        /// Report directory [default: --out].
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RankBy {
    Pr,
    Bias,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Directory holding ratings.txt, trust.txt, groups.txt, categories.txt.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    ratings: Option<PathBuf>,
    #[arg(long)]
    trust: Option<PathBuf>,
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Protected group label [default: female].
    #[arg(long)]
    protected: Option<String>,
    /// Unprotected group label [default: male].
    #[arg(long)]
    unprotected: Option<String>,
}

impl DataArgs {
    fn given(&self) -> bool {
        self.data.is_some() || self.ratings.is_some() || self.trust.is_some() || self.groups.is_some() || self.categories.is_some()
    }

    /// Paths from flags layered over `base`.
    fn paths(&self, base: Option<DatasetPaths>) -> Result<DatasetPaths> {
        let mut paths = match (&self.data, base) {
            (Some(dir), _) => DatasetPaths::in_dir(dir),
            (None, Some(p)) => p,
            (None, None) => {
                let missing: Vec<&str> = [
                    ("--ratings", &self.ratings),
                    ("--trust", &self.trust),
                    ("--groups", &self.groups),
                    ("--categories", &self.categories),
                ]
                .into_iter()
                .filter(|(_, v)| v.is_none())
                .map(|(n, _)| n)
                .collect();
                if !missing.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "no dataset: pass --data DIR or {}",
                        missing.join(", ")
                    )));
                }
                DatasetPaths::in_dir(".")
            }
        };
        for (flag, slot) in [
            (&self.ratings, &mut paths.ratings),
            (&self.trust, &mut paths.trust),
            (&self.groups, &mut paths.groups),
            (&self.categories, &mut paths.categories),
        ] {
            if let Some(p) = flag {
                *slot = p.clone();
            }
        }
        Ok(paths)
    }

    fn designation(&self, base: GroupDesignation) -> GroupDesignation {
        GroupDesignation {
            protected: self.protected.clone().unwrap_or(base.protected),
            unprotected: self.unprotected.clone().unwrap_or(base.unprotected),
        }
    }

    fn load(&self) -> Result<Dataset> {
        let paths = self.paths(None)?;
        load_with_warnings(&paths, &self.designation(GroupDesignation::default()))
    }
}

fn load_with_warnings(paths: &DatasetPaths, designation: &GroupDesignation) -> Result<Dataset> {
    let data = load_dataset(paths, designation)?;
    let r = &data.report;
    if data.categories.is_empty() {
        log::warn!("{}: no categories; bias measures will be empty", paths.categories.display());
    }
    for (n, what) in [
        (r.trust_self_loops, "trust self-loops dropped"),
        (r.trust_duplicates, "duplicate trust edges dropped"),
        (r.quarantined_trust_edges, "trust edges touching users without ratings (kept apart)"),
        (r.groups_unknown_users, "group rows for unknown users skipped"),
        (r.categories_unknown_items, "category rows for unknown items skipped"),
        (r.ungrouped_users, "users without a group"),
        (r.uncategorized_items, "items without a category"),
    ] {
        if n > 0 {
            log::warn!("{n} {what}");
        }
    }
    Ok(data)
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--out is required for this command".into()))
}

fn parse_band(spec: &str) -> Result<(String, Band)> {
    let bad = || Error::InvalidArgument(format!("band {spec:?}: expected FAMILY=CENTER:HALFWIDTH"));
    let (family, rest) = spec.split_once('=').ok_or_else(bad)?;
    let (c, h) = rest.split_once(':').ok_or_else(bad)?;
    let band = Band {
        center: c.trim().parse().map_err(|_| bad())?,
        halfwidth: h.trim().parse().map_err(|_| bad())?,
    };
    Ok((family.trim().to_ascii_lowercase(), band))
}

fn inspect(data: &DataArgs, json: bool) -> Result<()> {
    let d = data.load()?;
    let s = d.summary();
    if json {
        println!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(());
    }
    println!("users               {}", s.users);
    println!("items               {}", s.items);
    println!("ratings             {}", s.ratings);
    println!("rating density      {:.3}%", s.rating_density);
    println!("trust edges         {}", s.trust_edges);
    println!("trustors            {}", s.trustors);
    println!("trustees            {}", s.trustees);
    println!("trust density       {:.3}% (trustors x trustees)", s.trust_density);
    println!("trust density       {:.3}% (users x users)", s.trust_density_all_users);
    if s.quarantined_trust_ids > 0 {
        println!(
            "trust-only ids      {} ({} edges)",
            s.quarantined_trust_ids, s.quarantined_trust_edges
        );
    }
    for (label, n) in &s.groups {
        let role = if *label == s.protected_group {
            " (protected)"
        } else if *label == s.unprotected_group {
            " (unprotected)"
        } else {
            ""
        };
        println!("group {label:<14}{n}{role}");
    }
    println!("ungrouped users     {}", s.ungrouped_users);
    println!("categories          {}", s.categories);
    println!("uncategorized items {}", s.uncategorized_items);
    Ok(())
}

fn split(cli: &Cli, data: &DataArgs) -> Result<()> {
    let out = out_dir(cli)?;
    let d = data.load()?;
    let k = cli.folds.unwrap_or(DEFAULT_FOLDS);
    let all = d.ratings.interactions();
    let split = kfold_split(all, k, cli.seed.unwrap_or(DEFAULT_SEED))?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let (users, items) = (&d.ratings.users, &d.ratings.items);
    for f in 0..k {
        for (name, entries) in [("train", split.train_entries(f)), ("test", split.test_entries(f))] {
            let mut text = String::new();
            for e in &entries {
                let r = all.entries()[*e];
                text.push_str(&format!("{}\t{}\t{}\n", users.id(r.user), items.id(r.item), r.value));
            }
            let path = out.join(format!("fold{f}_{name}.txt"));
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        }
        println!(
            "fold {f}: {} train, {} test",
            split.train_entries(f).len(),
            split.test_entries(f).len()
        );
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source: e,
    }
}

fn sweep(cli: &Cli, config: Option<&Path>, algorithms: &[String], data: &DataArgs, workers: usize, limit: Option<usize>) -> Result<bool> {
    let out = out_dir(cli)?;
    let mut cfg = match config {
        Some(path) => SweepConfig::from_file(path)?,
        None => SweepConfig::default(),
    };
    for name in algorithms {
        cfg.add(name.parse::<Algorithm>()?, vec![HyperParams::new()]);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.folds {
        cfg.folds = k;
    }
    if let Some(n) = cli.list_size {
        cfg.list_size = n;
    }
    if data.given() {
        cfg.dataset = Some(data.paths(cfg.dataset.clone())?);
    }
    cfg.groups = data.designation(cfg.groups.clone());
    cfg.validate()?;
    let paths = cfg
        .dataset
        .clone()
        .ok_or_else(|| Error::InvalidArgument("no dataset: set [dataset] in the config or pass --data".into()))?;
    let d = load_with_warnings(&paths, &cfg.groups)?;
    let outcome = run_sweep(&cfg, &d, out, &SweepOptions { workers, task_limit: limit })?;
    eprintln!(
        "executed {}, skipped (cached) {}, failed {}, pending {}",
        outcome.executed, outcome.cached, outcome.failed, outcome.pending
    );
    let completed = outcome.ledger.completed_aggregates().count();
    eprintln!("{completed} grid points complete; ledger in {}", out.display());
    Ok(completed > 0 || outcome.pending > 0)
}

fn report(cli: &Cli, ledger: &Path, bands: &[String], top: usize, rank_by: RankBy) -> Result<()> {
    let out = out_dir(cli)?;
    let mut opts = ReportOptions::for_ledger(ledger)?;
    opts.top_categories = top;
    opts.ranking = match rank_by {
        RankBy::Pr => CategoryRanking::PreferenceRatio,
        RankBy::Bias => CategoryRanking::Bias,
    };
    for spec in bands {
        let (family, band) = parse_band(spec)?;
        match family.as_str() {
            "model_based" | "model-based" => opts.bands.model_based = band,
            "neighborhood" => opts.bands.neighborhood = band,
            other => return Err(Error::InvalidArgument(format!("unknown band family {other:?}"))),
        }
    }
    let bundle = build_report(ledger, &opts)?;
    let files = write_report(&bundle, out)?;
    for s in &bundle.selections {
        match s.selected() {
            Some(p) => eprintln!("{:<12} selected  nDCG {:.4}  {}", s.algorithm.name(), p.ndcg, p.params),
            None => eprintln!(
                "{:<12} excluded  no point within {}±{}",
                s.algorithm.name(),
                s.band.center,
                s.band.halfwidth
            ),
        }
    }
    eprintln!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Inspect { data, json } => inspect(data, *json).map(|_| true),
        Command::Split { data } => split(cli, data).map(|_| true),
        Command::Sweep { config, algorithms, data, workers, limit } => {
            if config.is_none() && algorithms.is_empty() {
                return Err(Error::InvalidArgument("sweep needs --config or --algorithm".into()));
            }
            sweep(cli, config.as_deref(), algorithms, data, *workers, *limit)
        }
        Command::Report { ledger, bands, top, rank_by } => report(cli, ledger, bands, *top, *rank_by).map(|_| true),
        Command::Verify { ledger, report } => {
            let dir = match report {
                Some(r) => r.as_path(),
                None => out_dir(cli)?,
            };
            let outcome = verify(ledger, dir)?;
            for m in &outcome.mismatches {
                eprintln!("mismatch: {m}");
            }
            eprintln!(
                "{} files, {} disparity cells checked, {} mismatches",
                outcome.files_checked,
                outcome.cells_checked,
                outcome.mismatches.len()
            );
            Ok(outcome.ok())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
