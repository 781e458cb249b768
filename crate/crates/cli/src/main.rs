//! `atag`: end-to-end aspect-term-extraction pipeline. Subcommands cover
//! corpus preparation (SemEval XML → CoNLL), training with run repetition,
//! checkpoint evaluation, embedding-coverage reports, and Friedman/Nemenyi
//! comparison of result grids.
//!
//! Exit codes: 0 success, 2 usage or input validation, 3 runtime failure.

mod config;
mod manifest;

use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use atag_core::checkpoint::{load_checkpoint, save_checkpoint};
use atag_core::corpus::{self, decode_chunks};
use atag_core::embeddings::{coverage, load_text_vectors};
use atag_core::stats::{friedman_ranks, grid_from_csv, nemenyi_cd, significance_groups};
use atag_core::train::{evaluate, train_many};

use config::TrainConfig;
use manifest::manifest;

const EMBEDDINGS_DIR_ENV: &str = "ATAG_EMBEDDINGS_DIR";

#[derive(Parser)]
#[command(name = "atag", version, about = "Aspect term extraction with (Bi)LSTM taggers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert SemEval-2014 ABSA XML into two-column CoNLL with IOB tags.
    Prepare {
        #[arg(long)]
        xml: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Alignment/validation report (default: <out>.report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train one variant for N seeded runs; write aggregate JSON and one
    /// checkpoint per run.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Word-vector text file (`word v1 ... vD` per line).
        #[arg(long)]
        embeddings: PathBuf,
        /// Training sentences (CoNLL).
        #[arg(long)]
        train: PathBuf,
        /// Test sentences (CoNLL).
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's run count.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a checkpoint (or a prediction CoNLL file) against gold CoNLL.
    Eval {
        #[arg(long, conflicts_with = "pred")]
        checkpoint: Option<PathBuf>,
        /// Prediction CoNLL file to score directly.
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        /// Word vectors; defaults to $ATAG_EMBEDDINGS_DIR/<embedding_name>.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Friedman mean ranks and the Nemenyi critical distance over a results
    /// grid (CSV header = treatments, one row per block).
    Compare {
        #[arg(long)]
        grid: PathBuf,
        /// Treat CSV rows as treatments and columns as blocks.
        #[arg(long)]
        transpose: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Plot-data file: `treatment<TAB>mean_rank` per line.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Vocabulary coverage of an embedding table over dataset XML files.
    Coverage {
        /// SemEval XML; repeat to pool train+test vocabularies.
        #[arg(long, required = true)]
        vocab_from: Vec<PathBuf>,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value = "dataset")]
        dataset: String,
        #[arg(long, default_value_t = 300)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Prepare { xml, out, report } => cmd_prepare(&xml, &out, report.as_deref()),
        Command::Train { config, embeddings, train, test, out, runs, seed } => {
            cmd_train(&config, &embeddings, &train, &test, &out, runs, seed)
        }
        Command::Eval { checkpoint, pred, test, embeddings, out } => {
            cmd_eval(checkpoint.as_deref(), pred.as_deref(), &test, embeddings.as_deref(), out.as_deref())
        }
        Command::Compare { grid, transpose, out, plot_data } => {
            cmd_compare(&grid, transpose, out.as_deref(), plot_data.as_deref())
        }
        Command::Coverage { vocab_from, embeddings, dataset, dim, out } => {
            cmd_coverage(&vocab_from, &embeddings, &dataset, dim, out.as_deref())
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn read_conll_file(path: &Path) -> Result<Vec<atag_core::TaggedSentence>, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;
    corpus::read_conll(BufReader::new(file)).map_err(validation)
}

fn cmd_prepare(xml: &Path, out: &Path, report_path: Option<&Path>) -> Result<(), CliError> {
    let text = read_to_string(xml)?;
    let (records, ingest) = corpus::parse_semeval(&text).map_err(validation)?;
    if records.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no <sentence> records found",
            xml.display()
        )));
    }
    let (sentences, align_warnings) = corpus::to_tagged_sentences(&records);
    let aspects: usize = sentences.iter().map(|s| s.chunks().len()).sum();

    let mut buf = Vec::new();
    corpus::write_conll(&mut buf, &sentences).map_err(runtime)?;
    std::fs::write(out, buf)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", out.display())))?;

    for w in ingest.warnings.iter().chain(&align_warnings) {
        eprintln!("warning: {w}");
    }
    for e in &ingest.errors {
        eprintln!("error: {e}");
    }

    let report = json!({
        "manifest": manifest("prepare", json!({"xml": xml, "out": out}), vec![], &[xml])
            .map_err(runtime)?,
        "sentences": sentences.len(),
        "aspects": aspects,
        "alignment_warnings": align_warnings,
        "parse_warnings": ingest.warnings,
        "errors": ingest.errors,
    });
    let report_path = report_path
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| out.with_extension("report.json"));
    write_json(&report_path, &report)?;

    println!(
        "prepared {} sentences, {} aspect chunks -> {}",
        sentences.len(),
        aspects,
        out.display()
    );
    if !ingest.errors.is_empty() {
        return Err(CliError::Validation(format!(
            "{} sentence(s) skipped by validation; see {}",
            ingest.errors.len(),
            report_path.display()
        )));
    }
    Ok(())
}

fn cmd_train(
    config_path: &Path,
    embeddings: &Path,
    train_path: &Path,
    test_path: &Path,
    out_dir: &Path,
    runs_override: Option<usize>,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let config_text = read_to_string(config_path)?;
    let mut cfg: TrainConfig = serde_json::from_str(&config_text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", config_path.display())))?;
    if let Some(r) = runs_override {
        cfg.runs = r;
    }
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    let model_config = cfg.to_model_config().map_err(CliError::Validation)?;
    let spec = cfg.to_train_spec().map_err(CliError::Validation)?;

    let (table, load_report) =
        load_text_vectors(embeddings, cfg.embedding_dim, cfg.seed).map_err(validation)?;
    log::info!(
        "embeddings: {} vectors loaded ({} malformed, {} duplicate lines skipped)",
        load_report.loaded,
        load_report.malformed,
        load_report.duplicates
    );
    let train_set = read_conll_file(train_path)?;
    let test_set = read_conll_file(test_path)?;
    if train_set.is_empty() {
        return Err(CliError::Validation(format!("{}: no sentences", train_path.display())));
    }
    if test_set.is_empty() {
        return Err(CliError::Validation(format!("{}: no sentences", test_path.display())));
    }

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let (aggregate, models) =
        train_many(&model_config, &spec, &table, &train_set, &test_set, cfg.seed)
            .map_err(runtime)?;

    let mut checkpoints = Vec::new();
    for model in &models {
        let name = format!("run_{:03}.ckpt", model.record.run_id);
        let path = out_dir.join(&name);
        let mut ckpt_config = model_config.clone();
        ckpt_config.seed = model.record.seed;
        save_checkpoint(&path, &model.params, &ckpt_config, model.char_vocab.as_ref(), cfg.seed)
            .map_err(runtime)?;
        checkpoints.push(name);
    }

    let seeds: Vec<u64> = aggregate.runs.iter().map(|r| r.seed).collect();
    let output = json!({
        "manifest": manifest(
            "train",
            serde_json::to_value(&cfg).map_err(runtime)?,
            seeds,
            &[config_path, embeddings, train_path, test_path],
        )
        .map_err(runtime)?,
        "embedding_load": load_report,
        "aggregate": aggregate,
        "checkpoints": checkpoints,
    });
    let agg_path = out_dir.join("aggregate.json");
    write_json(&agg_path, &output)?;

    println!(
        "{}: test F1 {:.2} +/- {:.2} over {} runs ({} failed) -> {}",
        model_config.variant,
        aggregate.mean_f1,
        aggregate.std_f1,
        aggregate.completed_runs,
        aggregate.failed_runs,
        agg_path.display()
    );
    Ok(())
}

fn resolve_embeddings(
    flag: Option<&Path>,
    embedding_name: &str,
) -> Result<PathBuf, CliError> {
    if let Some(p) = flag {
        return Ok(p.to_path_buf());
    }
    if let Ok(dir) = std::env::var(EMBEDDINGS_DIR_ENV) {
        let candidate = Path::new(&dir).join(embedding_name);
        if candidate.is_file() {
            return Ok(candidate);
        }
        return Err(CliError::Validation(format!(
            "no embeddings file {} under ${EMBEDDINGS_DIR_ENV}",
            candidate.display()
        )));
    }
    Err(CliError::Validation(
        format!("pass --embeddings or set ${EMBEDDINGS_DIR_ENV}"),
    ))
}

fn cmd_eval(
    checkpoint: Option<&Path>,
    pred: Option<&Path>,
    test: &Path,
    embeddings: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let gold = read_conll_file(test)?;

    let (report, mode, mut inputs): (_, _, Vec<&Path>) = match (checkpoint, pred) {
        (Some(ckpt_path), None) => {
            let ckpt = load_checkpoint(ckpt_path).map_err(validation)?;
            let emb_path =
                resolve_embeddings(embeddings, &ckpt.header.config.embedding_name)?;
            let (table, _) = load_text_vectors(
                &emb_path,
                ckpt.header.word_dim,
                ckpt.header.embedding_unk_seed,
            )
            .map_err(validation)?;
            let report = evaluate(
                &ckpt.params,
                &ckpt.header.config,
                &table,
                ckpt.char_vocab.as_ref(),
                &gold,
            )
            .map_err(runtime)?;
            (report, "checkpoint", vec![ckpt_path, test])
        }
        (None, Some(pred_path)) => {
            let predicted = read_conll_file(pred_path)?;
            if predicted.len() != gold.len() {
                return Err(CliError::Validation(format!(
                    "prediction file has {} sentences, gold has {}",
                    predicted.len(),
                    gold.len()
                )));
            }
            let gold_chunks: Vec<_> = gold.iter().map(|s| s.chunks()).collect();
            let pred_chunks: Vec<_> =
                predicted.iter().map(|s| decode_chunks(&s.tags)).collect();
            let report =
                atag_core::eval::exact_f1(&gold_chunks, &pred_chunks).map_err(validation)?;
            (report, "predictions", vec![pred_path, test])
        }
        _ => {
            return Err(CliError::Validation(
                "pass exactly one of --checkpoint or --pred".into(),
            ))
        }
    };
    inputs.dedup();

    let output = json!({
        "manifest": manifest("eval", json!({"mode": mode}), vec![], &inputs).map_err(runtime)?,
        "mode": mode,
        "report": report,
    });
    match out {
        Some(p) => write_json(p, &output)?,
        None => println!("{}", serde_json::to_string_pretty(&output).map_err(runtime)?),
    }
    if out.is_some() {
        println!(
            "P {:.4} R {:.4} F1 {:.4} (tp {}, fp {}, fn {})",
            report.precision, report.recall, report.f1, report.tp, report.fp, report.fn_
        );
    }
    Ok(())
}

fn cmd_compare(
    grid_path: &Path,
    transpose: bool,
    out: Option<&Path>,
    plot_data: Option<&Path>,
) -> Result<(), CliError> {
    let file = std::fs::File::open(grid_path)
        .map_err(|e| CliError::Validation(format!("cannot open {}: {e}", grid_path.display())))?;
    let mut grid = grid_from_csv(BufReader::new(file)).map_err(validation)?;
    if transpose {
        grid = grid.transpose().map_err(validation)?;
    }
    let friedman = friedman_ranks(&grid);
    let cd = nemenyi_cd(grid.k(), grid.blocks()).map_err(validation)?;
    let pairs = significance_groups(&friedman.mean_ranks, cd);
    let named_pairs: Vec<(String, String)> = pairs
        .iter()
        .map(|&(i, j)| (grid.treatments[i].clone(), grid.treatments[j].clone()))
        .collect();

    let output = json!({
        "manifest": manifest(
            "compare",
            json!({"grid": grid_path, "transpose": transpose}),
            vec![],
            &[grid_path],
        )
        .map_err(runtime)?,
        "treatments": grid.treatments,
        "blocks": grid.blocks(),
        "mean_ranks": friedman.mean_ranks,
        "statistic": friedman.statistic,
        "alpha": 0.05,
        "cd": cd,
        "groups": named_pairs,
    });
    match out {
        Some(p) => write_json(p, &output)?,
        None => println!("{}", serde_json::to_string_pretty(&output).map_err(runtime)?),
    }

    if let Some(p) = plot_data {
        let mut text = String::new();
        for (name, rank) in output["treatments"]
            .as_array()
            .unwrap()
            .iter()
            .zip(output["mean_ranks"].as_array().unwrap())
        {
            text.push_str(&format!("{}\t{}\n", name.as_str().unwrap(), rank));
        }
        std::fs::write(p, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn cmd_coverage(
    vocab_from: &[PathBuf],
    embeddings: &Path,
    dataset: &str,
    dim: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut vocab_ci = std::collections::BTreeSet::new();
    let mut vocab_cs = std::collections::BTreeSet::new();
    for path in vocab_from {
        let text = read_to_string(path)?;
        let (records, _) = corpus::parse_semeval(&text).map_err(validation)?;
        for r in &records {
            for tok in corpus::tokenize(&r.text) {
                vocab_ci.insert(tok.text.to_lowercase());
                vocab_cs.insert(tok.text);
            }
        }
    }
    let (table, _) = load_text_vectors(embeddings, dim, 0).map_err(validation)?;
    let name = embeddings
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| embeddings.display().to_string());

    let ci = coverage(dataset, &name, vocab_ci.iter().map(|s| s.as_str()), &table)
        .map_err(validation)?;
    let cs_covered = vocab_cs.iter().filter(|w| table.contains(w.as_str())).count();
    let cs = atag_core::CoverageReport {
        dataset: dataset.to_string(),
        embedding: name.clone(),
        covered: cs_covered,
        total: vocab_cs.len(),
        ratio: if vocab_cs.is_empty() { 0.0 } else { cs_covered as f64 / vocab_cs.len() as f64 },
    };

    let input_refs: Vec<&Path> = vocab_from
        .iter()
        .map(|p| p.as_path())
        .chain(std::iter::once(embeddings))
        .collect();
    let output = json!({
        "manifest": manifest(
            "coverage",
            json!({"dataset": dataset, "dim": dim}),
            vec![],
            &input_refs,
        )
        .map_err(runtime)?,
        "case_insensitive": ci,
        "case_sensitive": cs,
    });
    match out {
        Some(p) => write_json(p, &output)?,
        None => println!("{}", serde_json::to_string_pretty(&output).map_err(runtime)?),
    }
    Ok(())
}
