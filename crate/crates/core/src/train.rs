//! Mini-batch training with per-epoch shuffling, F1-monitored early
//! stopping, best-checkpoint restoration, and repeated-run aggregation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TaggedSentence;
use crate::embeddings::{CharVocab, EmbeddingTable};
use crate::eval::{exact_f1, EvalReport};
use crate::model::{
    batch_loss, build, derive_seed, predict, ModelConfig, ModelError, ModelParams, SequenceBatch,
};
use crate::net::{adam_update, clip_global_norm, param_count, AdamHyper, AdamState, Mode};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("all {0} runs failed")]
    AllRunsFailed(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which sentences drive early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MonitorSplit {
    /// A seeded held-out fraction of the training set.
    Heldout { fraction: f64 },
    /// Monitor the test set directly.
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without a strictly better
    /// monitor F1.
    pub patience: usize,
    pub runs: usize,
    pub monitor: MonitorSplit,
    pub clip_norm: f64,
    pub adam: AdamHyper,
}

impl Default for TrainSpec {
    fn default() -> TrainSpec {
        TrainSpec {
            batch_size: 10,
            max_epochs: 25,
            patience: 2,
            runs: 6,
            monitor: MonitorSplit::Heldout { fraction: 0.1 },
            clip_norm: 5.0,
            adam: AdamHyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub monitor_f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub param_count: usize,
    pub epochs_executed: usize,
    pub best_epoch: usize,
    pub epochs: Vec<EpochLog>,
    pub monitor: MonitorSplit,
    /// Present unless the run failed.
    pub test_report: Option<EvalReport>,
    pub failure: Option<String>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainAggregate {
    /// Mean exact-match test F1 over completed runs, in percent.
    pub mean_f1: f64,
    /// Population standard deviation, in percent.
    pub std_f1: f64,
    pub completed_runs: usize,
    pub failed_runs: usize,
    pub runs: Vec<RunRecord>,
}

/// Exact-match F1 of model predictions over a sentence set.
pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    table: &EmbeddingTable,
    char_vocab: Option<&CharVocab>,
    sentences: &[TaggedSentence],
) -> Result<EvalReport, ModelError> {
    let mut gold = Vec::with_capacity(sentences.len());
    let mut pred = Vec::with_capacity(sentences.len());
    for sent in sentences {
        let words: Vec<String> = sent.tokens.iter().map(|t| t.text.clone()).collect();
        let tags = predict(params, config, table, char_vocab, &words)?;
        gold.push(sent.chunks());
        pred.push(crate::corpus::decode_chunks(&tags));
    }
    Ok(exact_f1(&gold, &pred).expect("equal sentence counts"))
}

/// The trained model a run settles on, with its provenance.
pub struct TrainedModel {
    pub params: ModelParams,
    pub char_vocab: Option<CharVocab>,
    pub record: RunRecord,
}

/// One training run: shuffle each epoch, stop early on stalled monitor F1,
/// restore the best-monitor checkpoint, evaluate on the test split.
///
/// Numeric divergence marks the run failed instead of aborting the caller;
/// failed runs carry diagnostics and no test report.
#[allow(clippy::too_many_arguments)]
pub fn train_once(
    config: &ModelConfig,
    spec: &TrainSpec,
    table: &EmbeddingTable,
    train: &[TaggedSentence],
    monitor: &[TaggedSentence],
    test: &[TaggedSentence],
    seed: u64,
    run_id: usize,
) -> Result<TrainedModel, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if monitor.is_empty() {
        return Err(TrainError::EmptySplit("monitor"));
    }
    if test.is_empty() {
        return Err(TrainError::EmptySplit("test"));
    }
    let started = Instant::now();

    let mut config = config.clone();
    config.seed = seed;

    // char vocabulary comes from the training split only
    let char_vocab = config.variant.use_char().then(|| {
        CharVocab::from_words(
            train.iter().flat_map(|s| s.tokens.iter()).map(|t| t.text.as_str()),
        )
    });
    let vocab_ref = char_vocab.as_ref();

    let mut params = build(&config, table, vocab_ref)?;
    let n_params = param_count(&params);
    log::info!("run {run_id}: {} with {n_params} parameters, seed {seed}", config.variant);
    let mut adam = AdamState::new(&params, spec.adam);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xA));

    let mut best_params = params.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut stall = 0usize;
    let mut epochs = Vec::new();
    let mut failure: Option<String> = None;

    let mut order: Vec<usize> = (0..train.len()).collect();
    'epochs: for epoch in 1..=spec.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (batch_idx, chunk) in order.chunks(spec.batch_size).enumerate() {
            let sentences: Vec<&TaggedSentence> = chunk.iter().map(|&i| &train[i]).collect();
            let batch = SequenceBatch::from_sentences(&sentences, config.max_len);
            let noise = derive_seed(derive_seed(seed, epoch as u64), batch_idx as u64);
            let (loss, mut grads) =
                batch_loss(&params, &config, table, vocab_ref, &batch, Mode::Train, noise)?;
            if !loss.is_finite() {
                failure = Some(format!("non-finite loss at epoch {epoch}, batch {batch_idx}"));
                break 'epochs;
            }
            clip_global_norm(&mut grads, spec.clip_norm);
            if let Err(e) = adam_update(&mut params, &grads, &mut adam) {
                failure = Some(format!("epoch {epoch}, batch {batch_idx}: {e}"));
                break 'epochs;
            }
            epoch_loss += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let epoch_loss = epoch_loss / seen as f64;

        let monitor_f1 = evaluate(&params, &config, table, vocab_ref, monitor)?.f1;
        log::info!("run {run_id} epoch {epoch}: loss {epoch_loss:.4}, monitor F1 {monitor_f1:.4}");
        epochs.push(EpochLog { epoch, loss: epoch_loss, monitor_f1 });

        if monitor_f1 > best_f1 {
            best_f1 = monitor_f1;
            best_epoch = epoch;
            best_params = params.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= spec.patience {
                break;
            }
        }
    }

    let test_report = if failure.is_none() {
        Some(evaluate(&best_params, &config, table, vocab_ref, test)?)
    } else {
        None
    };

    let record = RunRecord {
        run_id,
        seed,
        param_count: n_params,
        epochs_executed: epochs.len(),
        best_epoch,
        epochs,
        monitor: spec.monitor,
        test_report,
        failure,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainedModel { params: best_params, char_vocab, record })
}

/// Split off the monitor set according to the spec. The held-out split is
/// seeded by the master seed, so every run of a repetition sees the same
/// partition.
pub fn split_monitor<'a>(
    spec: &TrainSpec,
    train: &'a [TaggedSentence],
    test: &'a [TaggedSentence],
    master_seed: u64,
) -> (Vec<TaggedSentence>, Vec<TaggedSentence>) {
    match spec.monitor {
        MonitorSplit::Test => (train.to_vec(), test.to_vec()),
        MonitorSplit::Heldout { fraction } => {
            let mut order: Vec<usize> = (0..train.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, 0x5));
            order.shuffle(&mut rng);
            let n_mon = ((train.len() as f64 * fraction).round() as usize)
                .clamp(1, train.len().saturating_sub(1).max(1));
            let monitor: Vec<TaggedSentence> =
                order[..n_mon].iter().map(|&i| train[i].clone()).collect();
            let remain: Vec<TaggedSentence> =
                order[n_mon..].iter().map(|&i| train[i].clone()).collect();
            (remain, monitor)
        }
    }
}

/// Repeat training `spec.runs` times with seeds `master_seed + run_index`,
/// then aggregate test F1 (percent) over the runs that completed. Trained
/// models are returned alongside their records.
pub fn train_many(
    config: &ModelConfig,
    spec: &TrainSpec,
    table: &EmbeddingTable,
    train: &[TaggedSentence],
    test: &[TaggedSentence],
    master_seed: u64,
) -> Result<(TrainAggregate, Vec<TrainedModel>), TrainError> {
    let (train_split, monitor_split) = split_monitor(spec, train, test, master_seed);
    let mut models = Vec::with_capacity(spec.runs);
    for run_id in 0..spec.runs {
        let seed = master_seed.wrapping_add(run_id as u64);
        let model = train_once(
            config,
            spec,
            table,
            &train_split,
            &monitor_split,
            test,
            seed,
            run_id,
        )?;
        if let Some(f) = &model.record.failure {
            log::warn!("run {run_id} failed: {f}");
        }
        models.push(model);
    }

    let scores: Vec<f64> = models
        .iter()
        .filter_map(|m| m.record.test_report.as_ref())
        .map(|r| r.f1 * 100.0)
        .collect();
    if scores.is_empty() {
        return Err(TrainError::AllRunsFailed(spec.runs));
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64;
    let aggregate = TrainAggregate {
        mean_f1: mean,
        std_f1: var.sqrt(),
        completed_runs: scores.len(),
        failed_runs: spec.runs - scores.len(),
        runs: models.iter().map(|m| m.record.clone()).collect(),
    };
    Ok((aggregate, models))
}
