//! Command-line interface for the bi-level knowledge graph embedding
//! pipeline: dataset statistics, walk-based augmentation, training,
//! evaluation, and embedding export.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use bilevel_kge::config::{self, ConfigPatch, RunConfig};
use bilevel_kge::eval::{eval_base_lp, eval_conditional_lp, eval_triplet_prediction, RankReport};
use bilevel_kge::kg::{BaseTriplet, BiLevelKG, DatasetPaths, EntityId, RelationId, Split};
use bilevel_kge::model::{load_checkpoint, save_checkpoint, ModelParams};
use bilevel_kge::train::train;
use bilevel_kge::walk::{augment_report, confidence_table, confidence_table_tsv, mine_augmented, run_walks};

#[derive(Parser)]
#[command(name = "bikg", version, about = "Bi-level knowledge graph embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print dataset statistics as JSON.
    Stats {
        /// Dataset directory with the six split TSV files.
        #[arg(long)]
        data: PathBuf,
    },
    /// Mine the augmented triple set via random walks.
    Augment {
        #[arg(long)]
        data: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Train embeddings and save the best checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Augmented triples TSV produced by `augment` (optional).
        #[arg(long)]
        augmented: Option<PathBuf>,
        /// Validation task driving checkpoint selection.
        #[arg(long, value_enum, default_value_t = Task::Blp)]
        valid_task: Task,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Evaluate a checkpoint on a task and split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Per-higher-relation breakdown in the output.
        #[arg(long)]
        per_relation: bool,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Export checkpoint embeddings as labeled CSV files.
    Export {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the named hyperparameter presets.
    Presets,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    /// Triplet prediction.
    Tp,
    /// Conditional link prediction.
    Clp,
    /// Base-level link prediction.
    Blp,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

/// Configuration layering: preset, then config file, then individual flags.
#[derive(Args)]
struct CommonOverrides {
    /// Named hyperparameter preset (see `bikg presets`).
    #[arg(long)]
    preset: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d_hat: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    neg_ratio: Option<usize>,
    #[arg(long)]
    valid_every: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_walk_length: Option<usize>,
    #[arg(long)]
    walk_attempts: Option<u64>,
    /// Disable the higher-level loss stream.
    #[arg(long)]
    no_high: bool,
    /// Disable the augmented-triple loss stream.
    #[arg(long)]
    no_aug: bool,
}

impl CommonOverrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.preset {
            Some(name) => config::preset(name)?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.config {
            cfg.apply(&config::load_patch(path)?);
        }
        let patch = ConfigPatch {
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            d: self.d,
            d_hat: self.d_hat,
            epochs: self.epochs,
            batch_size: self.batch_size,
            neg_ratio: self.neg_ratio,
            valid_every: self.valid_every,
            tau: self.tau,
            max_walk_length: self.max_walk_length,
            walk_attempts: self.walk_attempts,
            use_high: self.no_high.then_some(false),
            use_aug: self.no_aug.then_some(false),
            ..ConfigPatch::default()
        };
        cfg.apply(&patch);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let msg = serde_json::json!({ "error": format!("{e:#}") });
        eprintln!("{msg}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { data } => cmd_stats(&data),
        Command::Augment { data, out, overrides } => cmd_augment(&data, &out, &overrides),
        Command::Train {
            data,
            out,
            augmented,
            valid_task,
            overrides,
        } => cmd_train(&data, &out, augmented.as_deref(), valid_task, &overrides),
        Command::Eval {
            data,
            checkpoint,
            task,
            split,
            per_relation,
            overrides,
        } => cmd_eval(&data, &checkpoint, task, split.into(), per_relation, &overrides),
        Command::Export { data, checkpoint, out } => cmd_export(&data, &checkpoint, &out),
        Command::Presets => {
            for name in config::preset_names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn load_kg(data: &Path) -> Result<BiLevelKG> {
    let paths = DatasetPaths::from_dir(data);
    let kg = bilevel_kge::kg::load_dataset(&paths)
        .with_context(|| format!("loading dataset from {}", data.display()))?;
    for w in &kg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(kg)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path)
        .with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Manifest capturing everything needed to reproduce a run.
fn write_manifest(out: &Path, data: &Path, cfg: &RunConfig, extra: serde_json::Value) -> Result<()> {
    let paths = DatasetPaths::from_dir(data);
    let mut hashes = BTreeMap::new();
    for (name, path) in paths.all() {
        hashes.insert(name.to_owned(), sha256_file(path)?);
    }
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": std::env::args().collect::<Vec<_>>(),
        "config": cfg,
        "dataset_sha256": hashes,
        "outputs": extra,
    });
    write_atomic(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())
}

fn cmd_stats(data: &Path) -> Result<()> {
    let kg = load_kg(data)?;
    println!("{}", serde_json::to_string_pretty(&kg.stats())?);
    Ok(())
}

fn cmd_augment(data: &Path, out: &Path, overrides: &CommonOverrides) -> Result<()> {
    let cfg = overrides.resolve()?;
    let kg = load_kg(data)?;
    let view = kg.reverse_closure();
    let walks = run_walks(&view, cfg.max_walk_length, cfg.walk_attempts, cfg.seed);
    let table = confidence_table(&walks, &kg);
    let aug = mine_augmented(&table, &walks, &kg, cfg.tau);
    let report = augment_report(&table, &aug, &kg, cfg.tau);

    write_atomic(&out.join("confidence.tsv"), confidence_table_tsv(&table, &kg).as_bytes())?;
    let mut aug_tsv = String::new();
    for t in &aug {
        aug_tsv.push_str(&format!(
            "{}\t{}\t{}\n",
            kg.entities.label(t.h.0),
            kg.relations.label(t.r.0),
            kg.entities.label(t.t.0)
        ));
    }
    write_atomic(&out.join("augmented.tsv"), aug_tsv.as_bytes())?;
    write_atomic(
        &out.join("augment_report.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    write_manifest(
        out,
        data,
        &cfg,
        serde_json::json!({
            "walks": walks.len(),
            "augmented_triplets": aug.len(),
        }),
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Loads an augmented-triples TSV back against the dataset's interners.
fn load_augmented(path: &Path, kg: &BiLevelKG) -> Result<Vec<BaseTriplet>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            bail!("{}:{}: expected 3 tab-separated fields", path.display(), no + 1);
        }
        let resolve_e = |l: &str| {
            kg.entities
                .get(l)
                .ok_or_else(|| anyhow::anyhow!("{}:{}: unknown entity {l:?}", path.display(), no + 1))
        };
        let r = kg
            .relations
            .get(fields[1])
            .ok_or_else(|| anyhow::anyhow!("{}:{}: unknown relation {:?}", path.display(), no + 1, fields[1]))?;
        out.push(BaseTriplet {
            h: EntityId(resolve_e(fields[0])?),
            r: RelationId(r),
            t: EntityId(resolve_e(fields[2])?),
        });
    }
    Ok(out)
}

fn run_task(
    params: &ModelParams,
    kg: &BiLevelKG,
    task: Task,
    split: Split,
    lambda1: f64,
) -> Result<RankReport> {
    Ok(match task {
        Task::Tp => eval_triplet_prediction(params, kg, split)?,
        Task::Clp => eval_conditional_lp(params, kg, split, lambda1)?,
        Task::Blp => eval_base_lp(params, kg, split)?,
    })
}

fn cmd_train(
    data: &Path,
    out: &Path,
    augmented: Option<&Path>,
    valid_task: Task,
    overrides: &CommonOverrides,
) -> Result<()> {
    let cfg = overrides.resolve()?;
    let kg = load_kg(data)?;
    let aug = match augmented {
        Some(path) => load_augmented(path, &kg)?,
        None => Vec::new(),
    };
    let tc = cfg.to_train_config();
    let lambda1 = cfg.lambda1;
    let mut validate = |p: &ModelParams| -> f64 {
        run_task(p, &kg, valid_task, Split::Valid, lambda1)
            .ok()
            .and_then(|r| r.aggregates().ok())
            .map(|a| a.mrr)
            .unwrap_or(0.0)
    };
    let outcome = train(&kg, &aug, &tc, Some(&mut validate))?;
    std::fs::create_dir_all(out)?;
    save_checkpoint(&outcome.params, &out.join("model.ckpt"))?;
    write_atomic(
        &out.join("train_log.json"),
        serde_json::to_string_pretty(&outcome.log)?.as_bytes(),
    )?;
    write_manifest(
        out,
        data,
        &cfg,
        serde_json::json!({
            "best_epoch": outcome.best_epoch,
            "best_valid_mrr": outcome.best_metric,
            "augmented_triplets": aug.len(),
        }),
    )?;
    println!(
        "{}",
        serde_json::json!({
            "best_epoch": outcome.best_epoch,
            "best_valid_mrr": outcome.best_metric,
        })
    );
    Ok(())
}

fn cmd_eval(
    data: &Path,
    checkpoint: &Path,
    task: Task,
    split: Split,
    per_relation: bool,
    overrides: &CommonOverrides,
) -> Result<()> {
    let cfg = overrides.resolve()?;
    let kg = load_kg(data)?;
    let params = load_checkpoint(checkpoint)?;
    if params.dims.n_entities != kg.entities.len() || params.dims.n_relations != kg.relations.len() {
        bail!(
            "checkpoint shape ({} entities, {} relations) does not match dataset ({}, {})",
            params.dims.n_entities,
            params.dims.n_relations,
            kg.entities.len(),
            kg.relations.len()
        );
    }
    let report = run_task(&params, &kg, task, split, cfg.lambda1)?;
    let agg = report.aggregates()?;
    let mut output = serde_json::json!({
        "queries": report.ranks.len(),
        "skipped": report.skipped,
        "MR": agg.mr,
        "MRR": agg.mrr,
        "Hit@10": agg.hits10,
    });
    if per_relation {
        let rows: Vec<serde_json::Value> = report
            .per_relation()
            .into_iter()
            .map(|(r, n, a)| {
                serde_json::json!({
                    "relation": kg.higher_relations.label(r.0),
                    "queries": n,
                    "MR": a.mr,
                    "MRR": a.mrr,
                    "Hit@10": a.hits10,
                })
            })
            .collect();
        output["per_relation"] = serde_json::Value::Array(rows);
    }
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}

fn cmd_export(data: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let kg = load_kg(data)?;
    let params = load_checkpoint(checkpoint)?;
    let csv_of = |labels: &[String], table: &[f64], row: usize| -> String {
        let mut s = String::from("label");
        for i in 0..row {
            s.push_str(&format!(",v{i}"));
        }
        s.push('\n');
        for (i, label) in labels.iter().enumerate() {
            s.push_str(&label.replace(',', "_"));
            for v in &table[i * row..(i + 1) * row] {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    };
    let row = params.dims.entity_row();
    let hrow = params.dims.higher_row();
    write_atomic(
        &out.join("entities.csv"),
        csv_of(kg.entities.labels(), &params.entities, row).as_bytes(),
    )?;
    write_atomic(
        &out.join("relations.csv"),
        csv_of(kg.relations.labels(), &params.relations, row).as_bytes(),
    )?;
    write_atomic(
        &out.join("higher_relations.csv"),
        csv_of(kg.higher_relations.labels(), &params.higher_relations, hrow).as_bytes(),
    )?;
    let mut w = String::new();
    for j in 0..params.dims.d_hat {
        let row = &params.w[j * 3 * params.dims.d..(j + 1) * 3 * params.dims.d];
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        w.push_str(&cells.join(","));
        w.push('\n');
    }
    write_atomic(&out.join("projection.csv"), w.as_bytes())?;
    Ok(())
}
