//! Averaged structured perceptron over the same features and chain as the CRF.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_set, encode_dataset, ChainKind, LinearChainModel, TrainConfig};
use crate::corpus::Dataset;
use crate::error::Result;
use crate::features::{build_dictionary, FeatureTemplateConfig, SparseFeatureVector};

/// Adds `scale · (Φ(gold) − Φ(pred))` to the model weights, emissions and
/// transitions alike. Positions where both paths agree cancel out.
pub fn perceptron_update(
    model: &mut LinearChainModel,
    features: &[SparseFeatureVector],
    gold: &[usize],
    pred: &[usize],
    scale: f64,
) {
    apply_update(
        &mut model.emission_weights,
        &mut model.transition_weights,
        features,
        gold,
        pred,
        scale,
    );
}

fn apply_update(
    emission: &mut Array2<f64>,
    transition: &mut Array2<f64>,
    features: &[SparseFeatureVector],
    gold: &[usize],
    pred: &[usize],
    scale: f64,
) {
    let stop = transition.nrows() - 1;
    let (mut prev_gold, mut prev_pred) = (stop, stop);
    for (t, fv) in features.iter().enumerate() {
        let (g, p) = (gold[t], pred[t]);
        if g != p {
            for &f in fv.ids() {
                emission[[f as usize, g]] += scale;
                emission[[f as usize, p]] -= scale;
            }
        }
        if (prev_gold, g) != (prev_pred, p) {
            transition[[prev_gold, g]] += scale;
            transition[[prev_pred, p]] -= scale;
        }
        prev_gold = g;
        prev_pred = p;
    }
    if prev_gold != prev_pred {
        transition[[prev_gold, stop]] += scale;
        transition[[prev_pred, stop]] -= scale;
    }
}

/// Collins-style training with weight averaging.
///
/// The returned weights are the mean of the weight vector over every
/// sentence visit. Training stops early after an epoch without mistakes.
pub fn train_structured_perceptron(
    train: &Dataset,
    config: &FeatureTemplateConfig,
    tc: &TrainConfig,
) -> Result<LinearChainModel> {
    Ok(train_perceptron_with_history(train, config, tc)?.0)
}

/// Like [`train_structured_perceptron`], also returning mistakes per epoch.
pub fn train_perceptron_with_history(
    train: &Dataset,
    config: &FeatureTemplateConfig,
    tc: &TrainConfig,
) -> Result<(LinearChainModel, Vec<usize>)> {
    check_training_set(train)?;
    tc.validate()?;
    config.validate()?;
    let dict = build_dictionary(train, config)?;
    let tagset = train.tagset.clone();
    let data = encode_dataset(train, config, &dict, &tagset)?;
    let mut model = LinearChainModel::zeros(ChainKind::Perceptron, tagset, dict, *config);

    // Running sums of `step · Δw`; the average is `w - sum / step`.
    let mut emission_sum = Array2::zeros(model.emission_weights.dim());
    let mut transition_sum = Array2::zeros(model.transition_weights.dim());
    let mut step = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();

    for _ in 0..tc.epochs {
        if tc.shuffle {
            order.shuffle(&mut rng);
        }
        let mut mistakes = 0;
        for &i in &order {
            let sentence = &data[i];
            let pred = model.decode(&sentence.features)?;
            if pred != sentence.gold {
                mistakes += 1;
                perceptron_update(&mut model, &sentence.features, &sentence.gold, &pred, 1.0);
                apply_update(
                    &mut emission_sum,
                    &mut transition_sum,
                    &sentence.features,
                    &sentence.gold,
                    &pred,
                    step,
                );
            }
            step += 1.0;
        }
        history.push(mistakes);
        if mistakes == 0 {
            break;
        }
    }
    model.emission_weights.scaled_add(-1.0 / step, &emission_sum);
    model.transition_weights.scaled_add(-1.0 / step, &transition_sum);
    model.validate()?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;
    use crate::linear::token_accuracy;

    fn model_for(train: &Dataset, config: FeatureTemplateConfig) -> LinearChainModel {
        let dict = build_dictionary(train, &config).unwrap();
        LinearChainModel::zeros(ChainKind::Perceptron, train.tagset.clone(), dict, config)
    }

    #[test]
    fn correct_prediction_changes_nothing() {
        let train = Dataset::new(vec![Sentence::from_pairs(&[("a", "A"), ("b", "B")])]);
        let mut model = model_for(&train, FeatureTemplateConfig::default());
        let before = model.clone();
        let features = model.vectorize(&["a", "b"]).unwrap();
        perceptron_update(&mut model, &features, &[0, 1], &[0, 1], 1.0);
        assert_eq!(model, before);
    }

    #[test]
    fn single_token_update() {
        let train = Dataset::new(vec![Sentence::from_pairs(&[("ab", "A"), ("cd", "B")])]);
        let config = FeatureTemplateConfig::default().with_window(0);
        let mut model = model_for(&train, config);
        let features = model.vectorize(&["cd"]).unwrap();
        // zero weights decode to tag 0 (A); gold is B (1)
        let pred = model.decode(&features).unwrap();
        assert_eq!(pred, [0]);
        perceptron_update(&mut model, &features, &[1], &pred, 1.0);

        let mut expected_emission = Array2::zeros(model.emission_weights.dim());
        for name in ["w=cd", "p1=c", "p2=cd", "s1=d", "s2=cd", "len=LESS"] {
            let f = model.dict.get(name).unwrap() as usize;
            expected_emission[[f, 1]] = 1.0;
            expected_emission[[f, 0]] = -1.0;
        }
        assert_eq!(model.emission_weights, expected_emission);
        let mut expected_transition = Array2::zeros((3, 3));
        expected_transition[[2, 1]] = 1.0;
        expected_transition[[1, 2]] = 1.0;
        expected_transition[[2, 0]] = -1.0;
        expected_transition[[0, 2]] = -1.0;
        assert_eq!(model.transition_weights, expected_transition);
    }

    #[test]
    fn learns_separable_language_and_is_reproducible() {
        let stems = ["ba", "ko", "ri", "su", "te", "ya"];
        let endings = [("nu", "N"), ("du", "V"), ("ge", "P"), ("ali", "L")];
        let sentences: Vec<_> = (0..40)
            .map(|i| {
                let pairs: Vec<_> = (0..5)
                    .map(|j| {
                        let (end, tag) = endings[(i * 3 + j * 5) % 4];
                        (format!("{}{}{end}", stems[(i + j) % 6], i % 7), tag)
                    })
                    .collect();
                Sentence::from_pairs(&pairs)
            })
            .collect();
        let train = Dataset::new(sentences);
        let config = FeatureTemplateConfig::default();
        let a = train_structured_perceptron(&train, &config, &TrainConfig::perceptron()).unwrap();
        assert_eq!(token_accuracy(&a, &train).unwrap(), 1.0);
        let b = train_structured_perceptron(&train, &config, &TrainConfig::perceptron()).unwrap();
        assert_eq!(a, b);
    }
}
