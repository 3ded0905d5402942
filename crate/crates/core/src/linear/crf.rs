//! Conditional log-likelihood training for the linear-chain CRF.

use std::collections::HashMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::chain::{marginals, path_score};
use super::{check_training_set, encode_dataset, ChainKind, EncodedSentence, LinearChainModel, TrainConfig};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::features::{build_dictionary, FeatureTemplateConfig};

/// Gradient with the same shapes as the model's weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfGradient {
    pub emission: Array2<f64>,
    pub transition: Array2<f64>,
}

/// Emission gradient rows for the features a batch touched.
struct SparseRows {
    n_tags: usize,
    slot: HashMap<u32, usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRows {
    fn new(n_tags: usize) -> Self {
        SparseRows {
            n_tags,
            slot: HashMap::new(),
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    fn add(&mut self, feature: u32, tag: usize, value: f64) {
        let n = self.n_tags;
        let slot = *self.slot.entry(feature).or_insert_with(|| {
            self.rows.push(feature);
            self.values.extend(std::iter::repeat_n(0.0, n));
            self.rows.len() - 1
        });
        self.values[slot * n + tag] += value;
    }

    fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.rows
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.n_tags))
    }
}

/// Adds one sentence's data term (`log Z - gold score`) and its gradient.
fn accumulate(
    model: &LinearChainModel,
    sentence: &EncodedSentence,
    emission_grad: &mut SparseRows,
    transition_grad: &mut Array2<f64>,
) -> Result<f64> {
    let k = model.n_tags();
    let stop = k;
    if sentence.gold.len() != sentence.features.len() {
        return Err(Error::Contract("gold tags and features differ in length".into()));
    }
    if let Some(&bad) = sentence.gold.iter().find(|&&y| y >= k) {
        return Err(Error::Contract(format!("gold tag {bad} outside tag set of size {k}")));
    }
    let scores = model.emission_scores(&sentence.features);
    let m = marginals(scores.view(), model.transition_weights.view())?;
    let gold_score = path_score(scores.view(), model.transition_weights.view(), &sentence.gold);

    for (t, fv) in sentence.features.iter().enumerate() {
        let gold = sentence.gold[t];
        for &f in fv.ids() {
            for y in 0..k {
                let observed = if y == gold { 1.0 } else { 0.0 };
                emission_grad.add(f, y, m.nodes[[t, y]] - observed);
            }
        }
    }
    *transition_grad += &m.transitions;
    let mut prev = stop;
    for &y in &sentence.gold {
        transition_grad[[prev, y]] -= 1.0;
        prev = y;
    }
    transition_grad[[prev, stop]] -= 1.0;
    Ok(m.log_z - gold_score)
}

fn check_dims(model: &LinearChainModel, batch: &[EncodedSentence]) -> Result<()> {
    model.validate()?;
    let n_features = model.dict.len() as u32;
    for (i, s) in batch.iter().enumerate() {
        if s.features.iter().flat_map(|v| v.ids()).any(|&f| f >= n_features) {
            return Err(Error::Contract(format!(
                "sentence {i} has feature ids beyond the dictionary size {n_features}"
            )));
        }
    }
    Ok(())
}

/// Negative conditional log-likelihood of `batch` plus `(l2/2)·‖w‖²`, and
/// its gradient (expected minus observed counts plus `l2·w`).
pub fn crf_loss_and_gradient(
    model: &LinearChainModel,
    batch: &[EncodedSentence],
    l2: f64,
) -> Result<(f64, CrfGradient)> {
    check_dims(model, batch)?;
    let k = model.n_tags();
    let mut sparse = SparseRows::new(k);
    let mut transition = Array2::zeros((k + 1, k + 1));
    let mut loss = 0.0;
    for sentence in batch {
        loss += accumulate(model, sentence, &mut sparse, &mut transition)?;
    }
    let mut emission = Array2::zeros(model.emission_weights.dim());
    for (f, row) in sparse.iter() {
        for (g, v) in emission.row_mut(f as usize).iter_mut().zip(row) {
            *g += v;
        }
    }
    if l2 > 0.0 {
        emission.scaled_add(l2, &model.emission_weights);
        transition.scaled_add(l2, &model.transition_weights);
        loss += 0.5 * l2 * squared_norm(model);
    }
    Ok((loss, CrfGradient { emission, transition }))
}

fn squared_norm(model: &LinearChainModel) -> f64 {
    model
        .emission_weights
        .iter()
        .chain(model.transition_weights.iter())
        .map(|w| w * w)
        .sum()
}

const ADAGRAD_EPS: f64 = 1e-8;

fn adagrad_step(weight: &mut f64, accum: &mut f64, grad: f64, rate: f64) {
    *accum += grad * grad;
    if *accum > 0.0 {
        *weight -= rate * grad / (accum.sqrt() + ADAGRAD_EPS);
    }
}

pub fn train_crf(train: &Dataset, config: &FeatureTemplateConfig, tc: &TrainConfig) -> Result<LinearChainModel> {
    Ok(train_crf_with_history(train, config, tc)?.0)
}

/// Trains a CRF by mini-batch Adagrad and returns it with the objective
/// recorded at the start of every epoch.
///
/// The L2 term is applied to the emission rows a batch touches and to the
/// whole transition matrix. With `batch_size == 0` every step sees the full
/// training set and the recorded values are exact objective values.
pub fn train_crf_with_history(
    train: &Dataset,
    config: &FeatureTemplateConfig,
    tc: &TrainConfig,
) -> Result<(LinearChainModel, Vec<f64>)> {
    check_training_set(train)?;
    tc.validate()?;
    config.validate()?;
    let dict = build_dictionary(train, config)?;
    let tagset = train.tagset.clone();
    let data = encode_dataset(train, config, &dict, &tagset)?;
    let mut model = LinearChainModel::zeros(ChainKind::Crf, tagset, dict, *config);
    let k = model.n_tags();

    let mut emission_accum = Array2::<f64>::zeros(model.emission_weights.dim());
    let mut transition_accum = Array2::<f64>::zeros(model.transition_weights.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batch_size = if tc.batch_size == 0 { data.len() } else { tc.batch_size };
    let mut history = Vec::with_capacity(tc.epochs);

    for _ in 0..tc.epochs {
        if tc.shuffle && batch_size < data.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.5 * tc.l2 * squared_norm(&model);
        for chunk in order.chunks(batch_size) {
            let mut sparse = SparseRows::new(k);
            let mut transition_grad = Array2::zeros((k + 1, k + 1));
            for &i in chunk {
                epoch_loss += accumulate(&model, &data[i], &mut sparse, &mut transition_grad)?;
            }
            for (f, row) in sparse.iter() {
                let f = f as usize;
                for (y, &g) in row.iter().enumerate() {
                    let w = &mut model.emission_weights[[f, y]];
                    let g = g + tc.l2 * *w;
                    adagrad_step(w, &mut emission_accum[[f, y]], g, tc.learning_rate);
                }
            }
            for ((w, a), &g) in model
                .transition_weights
                .iter_mut()
                .zip(transition_accum.iter_mut())
                .zip(transition_grad.iter())
            {
                let g = g + tc.l2 * *w;
                adagrad_step(w, a, g, tc.learning_rate);
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Numeric(format!("CRF objective became {epoch_loss}")));
        }
        history.push(epoch_loss);
    }
    model.validate()?;
    Ok((model, history))
}
