//! One-vs-rest linear SVM tagger with predicted-tag history.
//!
//! Each tag owns a weight vector over the static token features (radius-2
//! window) plus `prev1=<tag>` / `prev2=<tag>` history indicators and a bias.
//! Training minimizes the L2-regularized hinge loss by stochastic
//! subgradient descent with gold history; decoding runs greedily left to
//! right and feeds its own predictions back as history.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_set, TrainConfig};
use crate::corpus::{Dataset, TagSet};
use crate::error::{Error, Result};
use crate::features::{build_dictionary, vectorize_forms, FeatureDictionary, FeatureTemplateConfig, BOS};

pub const HISTORY_WINDOW: usize = 2;
const BIAS: &str = "bias";

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryClassifierModel {
    /// `n_features × n_tags`; column `k` is tag `k`'s weight vector.
    pub weights: Array2<f64>,
    pub tagset: TagSet,
    pub dict: FeatureDictionary,
    pub config: FeatureTemplateConfig,
}

fn history_feature(order: usize, tag: &str) -> String {
    format!("prev{order}={tag}")
}

/// Hinge loss `max(0, 1 − y·w·x) + (l2/2)‖w‖²` of one binary example over
/// binary features `x`, with a subgradient. At margin exactly 1 the hinge
/// part of the subgradient is zero.
pub fn hinge_loss_and_subgradient(weights: &[f64], features: &[u32], label: f64, l2: f64) -> (f64, Vec<f64>) {
    let score: f64 = features.iter().map(|&f| weights[f as usize]).sum();
    let margin = label * score;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let reg = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    if margin < 1.0 {
        for &f in features {
            grad[f as usize] -= label;
        }
        (1.0 - margin + reg, grad)
    } else {
        (reg, grad)
    }
}

impl HistoryClassifierModel {
    pub fn n_tags(&self) -> usize {
        self.tagset.len()
    }

    fn history_ids(&self, prev1: Option<usize>, prev2: Option<usize>) -> [Option<u32>; 2] {
        let name = |p: Option<usize>| p.map_or(BOS, |i| self.tagset.label(i));
        [
            self.dict.get(&history_feature(1, name(prev1))),
            self.dict.get(&history_feature(2, name(prev2))),
        ]
    }

    fn scores(&self, ids: impl Iterator<Item = u32>) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_tags()];
        for f in ids {
            for (s, w) in scores.iter_mut().zip(self.weights.row(f as usize)) {
                *s += w;
            }
        }
        scores
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.dim() != (self.dict.len(), self.n_tags()) {
            return Err(Error::Contract(format!(
                "weights are {:?}, expected {:?}",
                self.weights.dim(),
                (self.dict.len(), self.n_tags())
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite model weight".into()));
        }
        Ok(())
    }

    /// Greedy left-to-right decoding; ties go to the lowest tag index.
    pub fn decode_forms(&self, forms: &[&str]) -> Result<Vec<usize>> {
        if forms.is_empty() {
            return Err(Error::Argument("cannot tag an empty sentence".into()));
        }
        let statics = vectorize_forms(forms, &self.config, &self.dict)?;
        let bias = self.dict.get(BIAS);
        let mut out: Vec<usize> = Vec::with_capacity(forms.len());
        for fv in &statics {
            let prev1 = out.last().copied();
            let prev2 = out.len().checked_sub(2).map(|i| out[i]);
            let history = self.history_ids(prev1, prev2);
            let ids = fv.ids().iter().copied().chain(history.into_iter().flatten()).chain(bias);
            out.push(argmax(&self.scores(ids)));
        }
        Ok(out)
    }

    pub fn tag_forms(&self, forms: &[&str]) -> Result<Vec<String>> {
        Ok(self.tagset.decode(&self.decode_forms(forms)?))
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Trains one binary hinge-loss classifier per tag.
///
/// Step size at update `t` is `lr / (1 + lr·l2·t)`; the L2 shrinkage is
/// applied through a shared scale factor so each update stays sparse.
pub fn train_history_classifier(
    train: &Dataset,
    config: &FeatureTemplateConfig,
    tc: &TrainConfig,
) -> Result<HistoryClassifierModel> {
    check_training_set(train)?;
    tc.validate()?;
    let config = config.with_window(HISTORY_WINDOW);
    let static_dict = build_dictionary(train, &config)?;
    let tagset = train.tagset.clone();
    let mut dict = FeatureDictionary::new();
    for id in 0..static_dict.len() as u32 {
        dict.intern(static_dict.name(id));
    }
    for order in [1, 2] {
        dict.intern(&history_feature(order, BOS));
        for label in tagset.labels() {
            dict.intern(&history_feature(order, label));
        }
    }
    dict.intern(BIAS);
    dict.freeze();

    let k = tagset.len();
    let mut examples: Vec<(Vec<u32>, usize)> = Vec::new();
    for (si, sentence) in train.sentences.iter().enumerate() {
        let forms = sentence.forms();
        let gold = tagset
            .encode(&sentence.gold_tags().expect("checked"))
            .ok_or_else(|| Error::Argument(format!("sentence {si} has a tag outside the tag set")))?;
        let statics = vectorize_forms(&forms, &config, &dict)?;
        for (t, fv) in statics.into_iter().enumerate() {
            let p1 = if t >= 1 { tagset.label(gold[t - 1]) } else { BOS };
            let p2 = if t >= 2 { tagset.label(gold[t - 2]) } else { BOS };
            let mut ids = fv.0;
            ids.push(dict.get(&history_feature(1, p1)).expect("interned"));
            ids.push(dict.get(&history_feature(2, p2)).expect("interned"));
            ids.push(dict.get(BIAS).expect("interned"));
            examples.push((ids, gold[t]));
        }
    }

    // true weights = scale · raw
    let mut raw = Array2::<f64>::zeros((dict.len(), k));
    let mut scale = 1.0f64;
    let mut step = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut scores = vec![0.0; k];

    for _ in 0..tc.epochs {
        if tc.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            let (ids, gold) = &examples[i];
            let eta = tc.learning_rate / (1.0 + tc.learning_rate * tc.l2 * step as f64);
            step += 1;
            scores.iter_mut().for_each(|s| *s = 0.0);
            for &f in ids {
                for (s, w) in scores.iter_mut().zip(raw.row(f as usize)) {
                    *s += w;
                }
            }
            let margin_scale = scale;
            scale *= 1.0 - eta * tc.l2;
            for (c, &s) in scores.iter().enumerate() {
                let y = if c == *gold { 1.0 } else { -1.0 };
                if y * s * margin_scale < 1.0 {
                    let delta = eta * y / scale;
                    for &f in ids {
                        raw[[f as usize, c]] += delta;
                    }
                }
            }
            if scale < 1e-9 {
                raw.mapv_inplace(|w| w * scale);
                scale = 1.0;
            }
        }
    }
    raw.mapv_inplace(|w| w * scale);
    let model = HistoryClassifierModel {
        weights: raw,
        tagset,
        dict,
        config,
    };
    model.validate()?;
    Ok(model)
}
