//! Feature-based taggers: linear-chain CRF, averaged structured perceptron
//! and a one-vs-rest hinge-loss classifier that conditions on the two
//! previously predicted tags.

pub mod chain;
pub mod crf;
pub mod history;
pub mod io;
pub mod perceptron;

use ndarray::Array2;

use crate::corpus::{Dataset, Sentence, TagSet};
use crate::error::{Error, Result};
use crate::features::{vectorize_forms, FeatureDictionary, FeatureTemplateConfig, SparseFeatureVector};

pub use chain::{forward_log_partition, marginals, path_score, viterbi, Marginals};
pub use crf::{crf_loss_and_gradient, train_crf, train_crf_with_history, CrfGradient};
pub use history::{hinge_loss_and_subgradient, train_history_classifier, HistoryClassifierModel, HISTORY_WINDOW};
pub use perceptron::{perceptron_update, train_structured_perceptron};

/// Which trainer produced a [`LinearChainModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainKind {
    Crf,
    Perceptron,
}

impl ChainKind {
    pub fn name(self) -> &'static str {
        match self {
            ChainKind::Crf => "crf",
            ChainKind::Perceptron => "perceptron",
        }
    }
}

/// Optimization settings shared by the linear trainers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Sentences per update; `0` means full batch. Only the CRF uses it.
    pub batch_size: usize,
}

impl TrainConfig {
    /// Adagrad at rate 0.1, L2 1e-5, batches of 8, 20 epochs.
    pub fn crf() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.1,
            l2: 1e-5,
            seed: 0,
            shuffle: true,
            batch_size: 8,
        }
    }

    pub fn perceptron() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 1.0,
            l2: 0.0,
            seed: 0,
            shuffle: true,
            batch_size: 1,
        }
    }

    pub fn history() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-5,
            seed: 0,
            shuffle: true,
            batch_size: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Argument(format!("l2 must be non-negative, got {}", self.l2)));
        }
        Ok(())
    }
}

/// A sentence reduced to feature ids and gold tag indices.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSentence {
    pub features: Vec<SparseFeatureVector>,
    pub gold: Vec<usize>,
}

pub(crate) fn check_training_set(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if !train.is_fully_tagged() {
        return Err(Error::Argument("training set has tokens without gold tags".into()));
    }
    Ok(())
}

fn gold_indices(sentence: &Sentence, tagset: &TagSet, index: usize) -> Result<Vec<usize>> {
    let tags = sentence
        .gold_tags()
        .ok_or_else(|| Error::Argument(format!("sentence {index} has tokens without gold tags")))?;
    tagset
        .encode(&tags)
        .ok_or_else(|| Error::Argument(format!("sentence {index} has a tag outside the tag set")))
}

/// Vectorizes every sentence of a gold-tagged dataset.
pub fn encode_dataset(
    dataset: &Dataset,
    config: &FeatureTemplateConfig,
    dict: &FeatureDictionary,
    tagset: &TagSet,
) -> Result<Vec<EncodedSentence>> {
    dataset
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(EncodedSentence {
                features: vectorize_forms(&s.forms(), config, dict)?,
                gold: gold_indices(s, tagset, i)?,
            })
        })
        .collect()
}

/// Emission weights over (feature, tag) plus a transition matrix with
/// start row and stop column. Used by both the CRF and the perceptron.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearChainModel {
    pub kind: ChainKind,
    /// `n_features × n_tags`
    pub emission_weights: Array2<f64>,
    /// `(n_tags + 1) × (n_tags + 1)`
    pub transition_weights: Array2<f64>,
    pub tagset: TagSet,
    pub dict: FeatureDictionary,
    pub config: FeatureTemplateConfig,
}

impl LinearChainModel {
    pub fn zeros(kind: ChainKind, tagset: TagSet, dict: FeatureDictionary, config: FeatureTemplateConfig) -> Self {
        let k = tagset.len();
        LinearChainModel {
            kind,
            emission_weights: Array2::zeros((dict.len(), k)),
            transition_weights: Array2::zeros((k + 1, k + 1)),
            tagset,
            dict,
            config,
        }
    }

    pub fn n_tags(&self) -> usize {
        self.tagset.len()
    }

    pub fn n_params(&self) -> usize {
        self.emission_weights.len() + self.transition_weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_tags();
        if self.emission_weights.dim() != (self.dict.len(), k) {
            return Err(Error::Contract(format!(
                "emission weights are {:?}, expected {:?}",
                self.emission_weights.dim(),
                (self.dict.len(), k)
            )));
        }
        if self.transition_weights.dim() != (k + 1, k + 1) {
            return Err(Error::Contract(format!(
                "transition weights are {:?}, expected {:?}",
                self.transition_weights.dim(),
                (k + 1, k + 1)
            )));
        }
        if self
            .emission_weights
            .iter()
            .chain(self.transition_weights.iter())
            .any(|w| !w.is_finite())
        {
            return Err(Error::Numeric("non-finite model weight".into()));
        }
        Ok(())
    }

    /// `T × K` emission scores for a vectorized sentence.
    pub fn emission_scores(&self, features: &[SparseFeatureVector]) -> Array2<f64> {
        let mut scores = Array2::zeros((features.len(), self.n_tags()));
        for (t, fv) in features.iter().enumerate() {
            let mut row = scores.row_mut(t);
            for &f in fv.ids() {
                row += &self.emission_weights.row(f as usize);
            }
        }
        scores
    }

    pub fn decode(&self, features: &[SparseFeatureVector]) -> Result<Vec<usize>> {
        viterbi(self.emission_scores(features).view(), self.transition_weights.view())
    }

    pub fn vectorize(&self, forms: &[&str]) -> Result<Vec<SparseFeatureVector>> {
        vectorize_forms(forms, &self.config, &self.dict)
    }

    /// Viterbi-decodes a sentence given as word forms.
    pub fn tag_forms(&self, forms: &[&str]) -> Result<Vec<String>> {
        if forms.is_empty() {
            return Err(Error::Argument("cannot tag an empty sentence".into()));
        }
        let path = self.decode(&self.vectorize(forms)?)?;
        Ok(self.tagset.decode(&path))
    }

    /// Posterior tag marginals for a sentence (meaningful for CRF weights).
    pub fn tag_marginals(&self, forms: &[&str]) -> Result<Array2<f64>> {
        let features = self.vectorize(forms)?;
        Ok(marginals(self.emission_scores(&features).view(), self.transition_weights.view())?.nodes)
    }
}

/// Anything that maps a sentence of word forms to tag labels.
pub trait Tagger {
    fn tag_forms(&self, forms: &[&str]) -> Result<Vec<String>>;

    fn tag_sentence(&self, sentence: &Sentence) -> Result<Vec<String>> {
        self.tag_forms(&sentence.forms())
    }

    /// Copies `dataset` with every token's `pred_tag` filled in.
    fn tag_dataset(&self, dataset: &Dataset) -> Result<Dataset> {
        let mut out = dataset.clone();
        for sentence in &mut out.sentences {
            let tags = self.tag_sentence(sentence)?;
            for (token, tag) in sentence.tokens.iter_mut().zip(tags) {
                token.pred_tag = Some(tag);
            }
        }
        Ok(out)
    }
}

impl Tagger for LinearChainModel {
    fn tag_forms(&self, forms: &[&str]) -> Result<Vec<String>> {
        LinearChainModel::tag_forms(self, forms)
    }
}

impl Tagger for HistoryClassifierModel {
    fn tag_forms(&self, forms: &[&str]) -> Result<Vec<String>> {
        HistoryClassifierModel::tag_forms(self, forms)
    }
}

/// Fraction of tokens whose decoded tag equals the gold tag.
pub fn token_accuracy<T: Tagger + ?Sized>(model: &T, dataset: &Dataset) -> Result<f64> {
    let (mut correct, mut total) = (0usize, 0usize);
    for sentence in &dataset.sentences {
        let pred = model.tag_sentence(sentence)?;
        for (token, p) in sentence.tokens.iter().zip(&pred) {
            total += 1;
            if token.gold_tag.as_deref() == Some(p.as_str()) {
                correct += 1;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_dictionary;

    #[test]
    fn zero_model_tags_lowest_index() {
        let train = Dataset::new(vec![Sentence::from_pairs(&[("a", "X"), ("b", "Y")])]);
        let config = FeatureTemplateConfig::default();
        let dict = build_dictionary(&train, &config).unwrap();
        let model = LinearChainModel::zeros(ChainKind::Crf, train.tagset.clone(), dict, config);
        assert_eq!(model.tag_forms(&["b", "a", "zz"]).unwrap(), ["X", "X", "X"]);
        assert!(model.tag_forms(&[]).is_err());
    }

    #[test]
    fn single_token_is_argmax() {
        let train = Dataset::new(vec![Sentence::from_pairs(&[("a", "X"), ("b", "Y")])]);
        let config = FeatureTemplateConfig::default().with_window(0);
        let dict = build_dictionary(&train, &config).unwrap();
        let mut model = LinearChainModel::zeros(ChainKind::Perceptron, train.tagset.clone(), dict, config);
        let f = model.dict.get("w=b").unwrap() as usize;
        model.emission_weights[[f, 1]] = 0.3;
        assert_eq!(model.tag_forms(&["b"]).unwrap(), ["Y"]);
        model.emission_weights[[f, 0]] = 0.5;
        assert_eq!(model.tag_forms(&["b"]).unwrap(), ["X"]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::crf().validate().is_ok());
        let bad = TrainConfig { epochs: 0, ..TrainConfig::crf() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { learning_rate: 0.0, ..TrainConfig::crf() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { l2: -1.0, ..TrainConfig::crf() };
        assert!(bad.validate().is_err());
    }
}
