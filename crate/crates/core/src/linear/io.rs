//! Text model files for the linear taggers.
//!
//! ```text
//! #version 1
//! model<TAB>crf|perceptron|svm
//! config<TAB>prefix_max_len = 3        (one line per template key)
//! tags<TAB>K
//! tag<TAB>id<TAB>label                  (K lines)
//! features<TAB>N
//! feature<TAB>id<TAB>string             (N lines)
//! feature_id<TAB>tag_id<TAB>weight      (non-zero emission weights)
//! trans<TAB>from_id<TAB>to_id<TAB>weight (non-zero transitions; id K = start/stop)
//! ```
//!
//! Weights are written with 17 significant digits so they read back exactly.

use std::fmt::Write as _;

use ndarray::Array2;

use super::{ChainKind, HistoryClassifierModel, LinearChainModel};
use crate::corpus::TagSet;
use crate::error::{Error, Result};
use crate::features::{FeatureDictionary, FeatureTemplateConfig};

pub(crate) fn fmt_weight(w: f64) -> String {
    format!("{w:.16e}")
}

pub(crate) struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate().peekable(),
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::format(0, "unexpected end of model file"))
    }

    pub(crate) fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|(_, l)| *l)
    }

    /// Next line split on TABs, checking its first field.
    pub(crate) fn record(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (no, line) = self.next_line()?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] != key {
            return Err(Error::format(no, format!("expected `{key}` record, found `{}`", fields[0])));
        }
        Ok((no, fields))
    }

    pub(crate) fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, fields) = self.record(key)?;
        parse_field(no, fields.get(1).copied().unwrap_or(""))
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(line: usize, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::format(line, format!("cannot parse `{field}`")))
}

pub(crate) fn write_header(out: &mut String, kind: &str) {
    out.push_str("#version 1\n");
    let _ = writeln!(out, "model\t{kind}");
}

/// Reads the header and returns the model kind.
pub(crate) fn read_header<'a>(lines: &mut Lines<'a>) -> Result<&'a str> {
    let (no, first) = lines.next_line()?;
    if first != "#version 1" {
        return Err(Error::format(no, "expected `#version 1` header"));
    }
    let (no, fields) = lines.record("model")?;
    fields
        .get(1)
        .copied()
        .ok_or_else(|| Error::format(no, "missing model kind"))
}

pub(crate) fn write_config(out: &mut String, config: &FeatureTemplateConfig) {
    for line in config.to_kv_string().lines() {
        let _ = writeln!(out, "config\t{line}");
    }
}

fn read_config(lines: &mut Lines) -> Result<FeatureTemplateConfig> {
    let mut text = String::new();
    while lines.peek().is_some_and(|l| l.starts_with("config\t")) {
        let (_, fields) = lines.record("config")?;
        text.push_str(fields[1]);
        text.push('\n');
    }
    FeatureTemplateConfig::from_kv_str(&text)
}

pub(crate) fn write_tagset(out: &mut String, tagset: &TagSet) {
    let _ = writeln!(out, "tags\t{}", tagset.len());
    for (i, label) in tagset.labels().iter().enumerate() {
        let _ = writeln!(out, "tag\t{i}\t{label}");
    }
}

pub(crate) fn read_tagset(lines: &mut Lines) -> Result<TagSet> {
    let n: usize = lines.value("tags")?;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (no, fields) = lines.record("tag")?;
        if fields.len() != 3 || parse_field::<usize>(no, fields[1])? != i {
            return Err(Error::format(no, format!("expected `tag<TAB>{i}<TAB>label`")));
        }
        labels.push(fields[2].to_string());
    }
    Ok(TagSet::from_labels(labels)?)
}

fn write_dict(out: &mut String, dict: &FeatureDictionary) {
    let _ = writeln!(out, "features\t{}", dict.len());
    for id in 0..dict.len() as u32 {
        let _ = writeln!(out, "feature\t{id}\t{}", dict.name(id));
    }
}

fn read_dict(lines: &mut Lines) -> Result<FeatureDictionary> {
    let n: usize = lines.value("features")?;
    let mut dict = FeatureDictionary::new();
    for i in 0..n {
        let (no, line) = lines.next_line()?;
        let mut parts = line.splitn(3, '\t');
        let ok = parts.next() == Some("feature") && parts.next().and_then(|s| s.parse::<usize>().ok()) == Some(i);
        let name = parts.next().filter(|_| ok).ok_or_else(|| Error::format(no, "bad feature record"))?;
        if dict.intern(name) != Some(i as u32) {
            return Err(Error::format(no, format!("duplicate feature `{name}`")));
        }
    }
    dict.freeze();
    Ok(dict)
}

fn write_matrix_entries(out: &mut String, weights: &Array2<f64>) {
    for ((f, y), &w) in weights.indexed_iter() {
        if w != 0.0 {
            let _ = writeln!(out, "{f}\t{y}\t{}", fmt_weight(w));
        }
    }
}

fn read_weight_lines(lines: &mut Lines, emission: &mut Array2<f64>, transition: Option<&mut Array2<f64>>) -> Result<()> {
    let mut transition = transition;
    while let Ok((no, line)) = lines.next_line() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let (target, idx) = match (fields[0], fields.len()) {
            ("trans", 4) => match transition.as_deref_mut() {
                Some(t) => (t, 1),
                None => return Err(Error::format(no, "transition weights in a model without transitions")),
            },
            (_, 3) => (&mut *emission, 0),
            _ => return Err(Error::format(no, "expected a weight record")),
        };
        let row: usize = parse_field(no, fields[idx])?;
        let col: usize = parse_field(no, fields[idx + 1])?;
        let w: f64 = parse_field(no, fields[idx + 2])?;
        if !w.is_finite() {
            return Err(Error::format(no, "non-finite weight"));
        }
        *target
            .get_mut((row, col))
            .ok_or_else(|| Error::format(no, format!("index ({row}, {col}) out of range")))? = w;
    }
    Ok(())
}

pub fn write_linear_model(model: &LinearChainModel) -> String {
    let mut out = String::new();
    write_header(&mut out, model.kind.name());
    write_config(&mut out, &model.config);
    write_tagset(&mut out, &model.tagset);
    write_dict(&mut out, &model.dict);
    write_matrix_entries(&mut out, &model.emission_weights);
    for ((from, to), &w) in model.transition_weights.indexed_iter() {
        if w != 0.0 {
            let _ = writeln!(out, "trans\t{from}\t{to}\t{}", fmt_weight(w));
        }
    }
    out
}

pub fn write_history_model(model: &HistoryClassifierModel) -> String {
    let mut out = String::new();
    write_header(&mut out, "svm");
    write_config(&mut out, &model.config);
    write_tagset(&mut out, &model.tagset);
    write_dict(&mut out, &model.dict);
    write_matrix_entries(&mut out, &model.weights);
    out
}

/// A loaded feature-based model.
#[derive(Clone, Debug, PartialEq)]
pub enum LinearModel {
    Chain(LinearChainModel),
    History(HistoryClassifierModel),
}

impl LinearModel {
    pub fn config(&self) -> &FeatureTemplateConfig {
        match self {
            LinearModel::Chain(m) => &m.config,
            LinearModel::History(m) => &m.config,
        }
    }
}

/// Parses any linear model file, dispatching on the `model` line.
pub fn read_linear_model(text: &str) -> Result<LinearModel> {
    let mut lines = Lines::new(text);
    let kind = read_header(&mut lines)?;
    let chain_kind = match kind {
        "crf" => Some(ChainKind::Crf),
        "perceptron" => Some(ChainKind::Perceptron),
        "svm" => None,
        other => return Err(Error::format(2, format!("not a linear model kind: `{other}`"))),
    };
    let config = read_config(&mut lines)?;
    let tagset = read_tagset(&mut lines)?;
    let dict = read_dict(&mut lines)?;
    let k = tagset.len();
    let mut emission = Array2::zeros((dict.len(), k));
    match chain_kind {
        Some(kind) => {
            let mut transition = Array2::zeros((k + 1, k + 1));
            read_weight_lines(&mut lines, &mut emission, Some(&mut transition))?;
            let model = LinearChainModel {
                kind,
                emission_weights: emission,
                transition_weights: transition,
                tagset,
                dict,
                config,
            };
            model.validate()?;
            Ok(LinearModel::Chain(model))
        }
        None => {
            read_weight_lines(&mut lines, &mut emission, None)?;
            let model = HistoryClassifierModel {
                weights: emission,
                tagset,
                dict,
                config,
            };
            model.validate()?;
            Ok(LinearModel::History(model))
        }
    }
}
