//! Mini-batch training with Adam or RMSProp and best-validation selection.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::embeddings::EmbeddingTable;
use super::model::{Architecture, NeuralParams, NeuralTagger, WORD_EMBEDDING_BLOCK};
use crate::corpus::{Dataset, Sentence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::RmsProp => "rmsprop",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "adam" => Some(OptimizerKind::Adam),
            "rmsprop" => Some(OptimizerKind::RmsProp),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuralTrainConfig {
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub epochs: usize,
    /// Trailing share of the shuffled training set held out for validation.
    pub validation_fraction: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub freeze_word_embeddings: bool,
    /// Rescale the whole gradient when its L2 norm exceeds this.
    pub clip_norm: Option<f64>,
}

impl NeuralTrainConfig {
    /// Word-embedding tagger: Adam, batches of 32, 25 epochs.
    pub fn word() -> Self {
        NeuralTrainConfig {
            optimizer: OptimizerKind::Adam,
            batch_size: 32,
            epochs: 25,
            validation_fraction: 0.1,
            learning_rate: 1e-3,
            seed: 0,
            freeze_word_embeddings: false,
            clip_norm: None,
        }
    }

    /// Character+word tagger: RMSProp, batches of 64, 25 epochs.
    pub fn char_word() -> Self {
        NeuralTrainConfig {
            optimizer: OptimizerKind::RmsProp,
            batch_size: 64,
            ..Self::word()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Argument(format!(
                "validation_fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Argument(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Argument(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Per-epoch training record. Validation fields are NaN without a
/// validation set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// `epoch<TAB>train_loss<TAB>val_loss<TAB>val_acc` lines with a header.
pub fn format_history(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch\ttrain_loss\tval_loss\tval_acc\n");
    for r in history {
        let _ = writeln!(out, "{}\t{:.6}\t{:.6}\t{:.6}", r.epoch, r.train_loss, r.val_loss, r.val_acc);
    }
    out
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    first: NeuralParams,
    second: NeuralParams,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const RHO: f64 = 0.9;
const EPSILON: f64 = 1e-8;

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, params: &NeuralParams) -> Self {
        Optimizer {
            kind,
            lr,
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }

    /// Applies one update. Word-embedding rows are only touched when listed
    /// in `word_rows`.
    fn apply(&mut self, params: &mut NeuralParams, grad: &NeuralParams, word_rows: &[usize]) {
        self.step += 1;
        let (kind, lr, step) = (self.kind, self.lr, self.step);
        let bias1 = 1.0 - BETA1.powi(step);
        let bias2 = 1.0 - BETA2.powi(step);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| match kind {
            OptimizerKind::Adam => {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= lr * (*m / bias1) / ((*v / bias2).sqrt() + EPSILON);
            }
            OptimizerKind::RmsProp => {
                *v = RHO * *v + (1.0 - RHO) * g * g;
                *p -= lr * g / (v.sqrt() + EPSILON);
            }
        };
        let grads = grad.blocks();
        let firsts = self.first.blocks_mut();
        let seconds = self.second.blocks_mut();
        for (((p, g), m), v) in params.blocks_mut().into_iter().zip(grads).zip(firsts).zip(seconds) {
            if p.name == WORD_EMBEDDING_BLOCK {
                let d = p.shape.1;
                for &r in word_rows {
                    for j in r * d..(r + 1) * d {
                        update(&mut p.data[j], g.data[j], &mut m.data[j], &mut v.data[j]);
                    }
                }
            } else {
                for j in 0..p.data.len() {
                    update(&mut p.data[j], g.data[j], &mut m.data[j], &mut v.data[j]);
                }
            }
        }
    }
}

fn grad_norm(grad: &NeuralParams) -> f64 {
    grad.blocks()
        .iter()
        .flat_map(|b| b.data.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

fn scale_grad(grad: &mut NeuralParams, factor: f64) {
    for b in grad.blocks_mut() {
        b.data.iter_mut().for_each(|g| *g *= factor);
    }
}

/// Mean cross-entropy and token accuracy of `tagger` on `sentences`.
pub fn evaluate_loss(tagger: &NeuralTagger, sentences: &[Sentence]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut n = 0usize;
    for s in sentences {
        let gold = encode_gold(tagger, s)?;
        let fwd = tagger.forward_sentence(&s.forms())?;
        for (t, &g) in gold.iter().enumerate() {
            loss -= fwd.probs[[t, g]].ln();
            let row = fwd.probs.row(t);
            let best = (1..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b });
            correct += usize::from(best == g);
        }
        n += gold.len();
    }
    if n == 0 {
        return Ok((f64::NAN, f64::NAN));
    }
    Ok((loss / n as f64, correct as f64 / n as f64))
}

fn encode_gold(tagger: &NeuralTagger, sentence: &Sentence) -> Result<Vec<usize>> {
    sentence
        .tokens
        .iter()
        .map(|t| {
            let tag = t
                .gold_tag
                .as_deref()
                .ok_or_else(|| Error::Argument(format!("token `{}` has no gold tag", t.form)))?;
            tagger
                .tagset
                .index_of(tag)
                .ok_or_else(|| Error::Argument(format!("tag `{tag}` is not in the tag set")))
        })
        .collect()
}

/// Splits off the trailing `fraction` of a seeded shuffle.
fn shuffle_split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<Sentence>, Vec<Sentence>)> {
    let mut sentences = dataset.sentences.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sentences.shuffle(&mut rng);
    let n = sentences.len();
    let n_train = (n as f64 * (1.0 - fraction)).floor() as usize;
    if n_train == 0 {
        return Err(Error::Argument(format!(
            "validation_fraction {fraction} leaves no training sentences out of {n}"
        )));
    }
    let val = sentences.split_off(n_train);
    Ok((sentences, val))
}

/// Trains a neural tagger and returns the parameters of the epoch with the
/// lowest validation loss (the last epoch when there is no validation set),
/// together with the per-epoch history.
pub fn train_neural(
    train: &Dataset,
    config: &NeuralTrainConfig,
    arch: Architecture,
    pretrained: Option<&EmbeddingTable>,
) -> Result<(NeuralTagger, Vec<EpochRecord>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if !train.is_fully_tagged() {
        return Err(Error::Argument("training set has untagged tokens".into()));
    }
    if let Some(s) = train.sentences.iter().position(|s| s.is_empty()) {
        return Err(Error::Argument(format!("training sentence {s} is empty")));
    }
    let (train_part, val_part) = shuffle_split(train, config.validation_fraction, config.seed)?;
    let train_set = Dataset::with_tagset(train_part, train.tagset.clone())?;
    let mut tagger = NeuralTagger::initialize(
        arch,
        train.tagset.clone(),
        &train_set,
        pretrained,
        config.seed,
        config.freeze_word_embeddings,
    )?;
    let gold: Vec<Vec<usize>> = train_set
        .sentences
        .iter()
        .map(|s| encode_gold(&tagger, s))
        .collect::<Result<_>>()?;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &tagger.params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, NeuralParams)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for batch in order.chunks(config.batch_size) {
            let n_tokens: usize = batch.iter().map(|&i| gold[i].len()).sum();
            let scale = 1.0 / n_tokens as f64;
            let mut grad = tagger.params.zeros_like();
            let mut rows = BTreeSet::new();
            for &i in batch {
                let forms = train_set.sentences[i].forms();
                let fwd = tagger.forward_sentence(&forms)?;
                epoch_loss += tagger.backward_sentence(&fwd, &gold[i], scale, &mut grad);
                if !tagger.freeze_word_embeddings {
                    rows.extend(forms.iter().filter_map(|f| tagger.word_row(f)));
                }
            }
            epoch_tokens += n_tokens;
            if let Some(block) = grad.first_non_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in parameter block `{block}` during epoch {epoch}"
                )));
            }
            if let Some(limit) = config.clip_norm {
                let norm = grad_norm(&grad);
                if norm > limit {
                    scale_grad(&mut grad, limit / norm);
                }
            }
            let rows: Vec<usize> = rows.into_iter().collect();
            optimizer.apply(&mut tagger.params, &grad, &rows);
        }
        let train_loss = epoch_loss / epoch_tokens as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numeric(format!("training loss became non-finite in epoch {epoch}")));
        }
        let (val_loss, val_acc) = evaluate_loss(&tagger, &val_part)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
        });
        if !val_part.is_empty() && best.as_ref().map_or(true, |(l, _)| val_loss < *l) {
            best = Some((val_loss, tagger.params.clone()));
        }
    }
    if let Some((_, params)) = best {
        tagger.params = params;
    }
    Ok((tagger, history))
}
