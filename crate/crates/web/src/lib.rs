//! WebAssembly bindings behind `www/index.html`.
//!
//! Every operation has a plain Rust form returning JSON text (used by the
//! native tests) and a `#[wasm_bindgen]` wrapper that turns errors into JS
//! exceptions.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use seqtag::corpus::{parse_column_corpus, parse_prediction_corpus};
use seqtag::eval::{confusion_matrix, top_confusions};
use seqtag::features::{extract_features_from_forms, FeatureTemplateConfig};
use seqtag::linear::{train_crf, train_structured_perceptron, LinearChainModel, TrainConfig};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn forms_of(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Features of every token of a whitespace-separated sentence.
pub fn explore(sentence: &str, config_text: &str) -> Result<String, String> {
    let config = FeatureTemplateConfig::from_kv_str(config_text).map_err(err)?;
    let forms = forms_of(sentence);
    let tokens = (0..forms.len())
        .map(|i| {
            let features = extract_features_from_forms(&forms, i, &config).map_err(err)?;
            Ok(json!({ "form": forms[i], "features": features }))
        })
        .collect::<Result<Vec<Value>, String>>()?;
    Ok(json!({ "config": config.to_kv_string(), "tokens": tokens }).to_string())
}

/// A linear-chain model trained in the page.
#[wasm_bindgen]
pub struct DemoTagger {
    model: LinearChainModel,
}

impl DemoTagger {
    /// `kind` is `crf` or `perceptron`.
    pub fn train(corpus: &str, kind: &str, window: usize, epochs: usize, seed: u64) -> Result<DemoTagger, String> {
        let data = parse_column_corpus(corpus, true).map_err(err)?;
        let config = FeatureTemplateConfig::default().with_window(window);
        let model = match kind {
            "crf" => train_crf(&data, &config, &TrainConfig { epochs, seed, ..TrainConfig::crf() }),
            "perceptron" => {
                train_structured_perceptron(&data, &config, &TrainConfig { epochs, seed, ..TrainConfig::perceptron() })
            }
            other => return Err(format!("unknown model `{other}`; use crf or perceptron")),
        }
        .map_err(err)?;
        Ok(DemoTagger { model })
    }

    /// Viterbi tags plus per-token marginals for every line of `text`.
    pub fn tag(&self, text: &str) -> Result<String, String> {
        let labels = self.model.tagset.labels();
        let sentences = text
            .lines()
            .map(forms_of)
            .filter(|f| !f.is_empty())
            .map(|forms| {
                let tags = self.model.tag_forms(&forms).map_err(err)?;
                let m = self.model.tag_marginals(&forms).map_err(err)?;
                let tokens: Vec<Value> = forms
                    .iter()
                    .zip(&tags)
                    .zip(m.rows())
                    .map(|((f, t), row)| json!({ "form": f, "tag": t, "marginals": row.to_vec() }))
                    .collect();
                Ok(json!(tokens))
            })
            .collect::<Result<Vec<Value>, String>>()?;
        Ok(json!({ "labels": labels, "sentences": sentences }).to_string())
    }
}

#[wasm_bindgen]
impl DemoTagger {
    #[wasm_bindgen(constructor)]
    pub fn new(corpus: &str, kind: &str, window: usize, epochs: usize, seed: u32) -> Result<DemoTagger, JsError> {
        DemoTagger::train(corpus, kind, window, epochs, u64::from(seed)).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = tag)]
    pub fn tag_js(&self, text: &str) -> Result<String, JsError> {
        self.tag(text).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        format!(
            "{} model, {} tags, {} features",
            self.model.kind.name(),
            self.model.n_tags(),
            self.model.dict.len()
        )
    }
}

/// Scores, top confusions and the full matrix for a gold and a prediction
/// corpus.
pub fn score(gold: &str, pred: &str, top: usize) -> Result<String, String> {
    let gold = parse_column_corpus(gold, true).map_err(err)?;
    let pred = parse_prediction_corpus(pred).map_err(err)?;
    let m = confusion_matrix(&gold, &pred).map_err(err)?;
    let r = m.to_report();
    let per_tag: Vec<Value> = r
        .per_tag
        .iter()
        .map(|(tag, s)| {
            json!({ "tag": tag, "precision": s.precision, "recall": s.recall, "f": s.f1, "support": s.gold_support })
        })
        .collect();
    let confusions: Vec<Value> = top_confusions(&m, top)
        .into_iter()
        .map(|(g, p, n)| json!({ "gold": g, "pred": p, "count": n }))
        .collect();
    Ok(json!({
        "per_tag": per_tag,
        "macro_p": r.macro_p,
        "macro_r": r.macro_r,
        "macro_f": r.macro_f,
        "accuracy": r.overall_accuracy,
        "labels": m.labels,
        "matrix": m.counts,
        "confusions": confusions,
    })
    .to_string())
}

#[wasm_bindgen(js_name = explore)]
pub fn explore_js(sentence: &str, config_text: &str) -> Result<String, JsError> {
    explore(sentence, config_text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = score)]
pub fn score_js(gold: &str, pred: &str, top: usize) -> Result<String, JsError> {
    score(gold, pred, top).map_err(|e| JsError::new(&e))
}
