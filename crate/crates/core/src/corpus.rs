//! Column-format corpora: reading, writing, splitting and profiling.
//!
//! The on-disk format is one token per line, `form<TAB>tag`, with a blank
//! line after each sentence. Lines starting with `#` before the first token
//! are comments. The tag column may be absent for text that is only going to
//! be tagged.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CorpusError;

/// A single token with its optional gold and predicted tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub gold_tag: Option<String>,
    pub pred_tag: Option<String>,
}

impl Token {
    pub fn new(form: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            gold_tag: None,
            pred_tag: None,
        }
    }

    pub fn tagged(form: impl Into<String>, tag: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            gold_tag: Some(tag.into()),
            pred_tag: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    /// Builds a gold-tagged sentence from `(form, tag)` pairs.
    pub fn from_pairs<S: AsRef<str>, T: AsRef<str>>(pairs: &[(S, T)]) -> Self {
        Sentence {
            tokens: pairs
                .iter()
                .map(|(f, t)| Token::tagged(f.as_ref(), t.as_ref()))
                .collect(),
        }
    }

    /// Builds an untagged sentence from word forms.
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Self {
        Sentence {
            tokens: forms.iter().map(|f| Token::new(f.as_ref())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    /// Gold tags, or `None` if any token lacks one.
    pub fn gold_tags(&self) -> Option<Vec<&str>> {
        self.tokens.iter().map(|t| t.gold_tag.as_deref()).collect()
    }
}

/// Ordered, duplicate-free inventory of tag labels.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TagSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    /// Creates a tag set keeping the given order. Fails on duplicates.
    pub fn from_labels<I, S>(labels: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = TagSet::default();
        for label in labels {
            let label = label.into();
            if set.index.contains_key(&label) {
                return Err(CorpusError::Argument(format!("duplicate tag `{label}`")));
            }
            set.index.insert(label.clone(), set.labels.len());
            set.labels.push(label);
        }
        Ok(set)
    }

    /// Collects every gold tag in `sentences`, sorted lexicographically.
    pub fn derive(sentences: &[Sentence]) -> Self {
        let mut seen: Vec<&str> = sentences
            .iter()
            .flat_map(|s| s.tokens.iter())
            .filter_map(|t| t.gold_tag.as_deref())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        seen.sort_unstable();
        TagSet::from_labels(seen).expect("deduplicated")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Maps a sequence of labels to indices; `None` if any label is unknown.
    pub fn encode<S: AsRef<str>>(&self, labels: &[S]) -> Option<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l.as_ref())).collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.labels[i].clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Dataset {
    pub sentences: Vec<Sentence>,
    pub tagset: TagSet,
}

impl Dataset {
    /// Wraps sentences with a tag set derived from their gold tags.
    pub fn new(sentences: Vec<Sentence>) -> Self {
        let tagset = TagSet::derive(&sentences);
        Dataset { sentences, tagset }
    }

    /// Wraps sentences with a supplied closed tag set, rejecting unknown gold tags.
    pub fn with_tagset(sentences: Vec<Sentence>, tagset: TagSet) -> Result<Self, CorpusError> {
        for (si, s) in sentences.iter().enumerate() {
            for (ti, t) in s.tokens.iter().enumerate() {
                if let Some(tag) = &t.gold_tag {
                    if tagset.index_of(tag).is_none() {
                        return Err(CorpusError::UnknownTag {
                            sentence: si,
                            token: ti,
                            tag: tag.clone(),
                        });
                    }
                }
            }
        }
        Ok(Dataset { sentences, tagset })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// True when every token carries a gold tag.
    pub fn is_fully_tagged(&self) -> bool {
        self.sentences
            .iter()
            .all(|s| s.tokens.iter().all(|t| t.gold_tag.is_some()))
    }

    /// Distinct word forms.
    pub fn vocabulary(&self) -> HashSet<&str> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.form.as_str()))
            .collect()
    }
}

fn is_valid_tag(tag: &str) -> bool {
    !tag.is_empty() && tag.bytes().all(|b| b.is_ascii_uppercase() || b == b'_')
}

/// Parses column-format text.
///
/// With `strict`, every tag must match `[A-Z_]+`.
pub fn parse_column_corpus(text: &str, strict: bool) -> Result<Dataset, CorpusError> {
    let sentences = parse_lines(text, strict, 2)?
        .into_iter()
        .map(|rows| {
            Sentence::new(
                rows.into_iter()
                    .map(|(form, mut cols)| Token {
                        form,
                        gold_tag: cols.pop().flatten(),
                        pred_tag: None,
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(Dataset::new(sentences))
}

/// Parses text against a closed tag set; unknown tags are validation errors.
pub fn parse_column_corpus_with_tagset(
    text: &str,
    strict: bool,
    tagset: TagSet,
) -> Result<Dataset, CorpusError> {
    let parsed = parse_column_corpus(text, strict)?;
    Dataset::with_tagset(parsed.sentences, tagset)
}

/// Parses tagger output: `form<TAB>pred` or `form<TAB>gold<TAB>pred`.
///
/// The last column always lands in `pred_tag`; a middle column, when
/// present, in `gold_tag`.
pub fn parse_prediction_corpus(text: &str) -> Result<Dataset, CorpusError> {
    let sentences = parse_lines(text, false, 3)?
        .into_iter()
        .map(|rows| {
            Sentence::new(
                rows.into_iter()
                    .map(|(form, cols)| {
                        let (gold_tag, pred_tag) = match cols.len() {
                            0 => (None, None),
                            1 => (None, cols[0].clone()),
                            _ => (cols[0].clone(), cols[1].clone()),
                        };
                        Token {
                            form,
                            gold_tag,
                            pred_tag,
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(Dataset::new(sentences))
}

type Row = (String, Vec<Option<String>>);

fn parse_lines(text: &str, strict: bool, max_fields: usize) -> Result<Vec<Vec<Row>>, CorpusError> {
    let mut sentences = Vec::new();
    let mut current: Vec<Row> = Vec::new();
    let mut in_header = true;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if in_header && line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        in_header = false;

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() > max_fields {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!(
                    "expected at most {max_fields} tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        let form = fields[0].trim_matches(' ');
        if form.is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "empty word form".into(),
            });
        }
        if form.chars().any(char::is_whitespace) {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("word form `{form}` contains whitespace"),
            });
        }
        let mut cols = Vec::with_capacity(fields.len() - 1);
        for field in &fields[1..] {
            let tag = field.trim_matches(' ');
            if tag.is_empty() {
                cols.push(None);
                continue;
            }
            if strict && !is_valid_tag(tag) {
                return Err(CorpusError::InvalidTag {
                    line: line_no,
                    tag: tag.to_string(),
                });
            }
            cols.push(Some(tag.to_string()));
        }
        current.push((form.to_string(), cols));
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

/// Which tag column to write.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Gold,
    Pred,
}

/// Writes `form<TAB>tag` lines with a blank line after every sentence.
pub fn serialize_column_corpus(dataset: &Dataset, column: Column) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (si, sentence) in dataset.sentences.iter().enumerate() {
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let tag = match column {
                Column::Gold => token.gold_tag.as_deref(),
                Column::Pred => token.pred_tag.as_deref(),
            };
            let tag = tag.ok_or(CorpusError::MissingTag {
                sentence: si,
                token: ti,
            })?;
            let _ = writeln!(out, "{}\t{}", token.form, tag);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `form<TAB>gold<TAB>pred` lines. Every token needs both tags.
pub fn serialize_gold_and_pred(dataset: &Dataset) -> Result<String, CorpusError> {
    let mut out = String::new();
    for (si, sentence) in dataset.sentences.iter().enumerate() {
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let missing = CorpusError::MissingTag {
                sentence: si,
                token: ti,
            };
            let gold = token.gold_tag.as_deref().ok_or(missing.clone())?;
            let pred = token.pred_tag.as_deref().ok_or(missing)?;
            let _ = writeln!(out, "{}\t{}\t{}", token.form, gold, pred);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Sentence-level random split into `(train, test)`.
///
/// The test part holds `round(test_fraction * n)` sentences (halves round
/// away from zero). Both parts keep the original sentence order and the
/// parent's tag set.
pub fn split_dataset(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), CorpusError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::Argument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if dataset.is_empty() {
        return Err(CorpusError::Argument("cannot split an empty dataset".into()));
    }
    let n = dataset.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (sentence, &t) in dataset.sentences.iter().zip(&is_test) {
        if t {
            test.push(sentence.clone());
        } else {
            train.push(sentence.clone());
        }
    }
    Ok((
        Dataset {
            sentences: train,
            tagset: dataset.tagset.clone(),
        },
        Dataset {
            sentences: test,
            tagset: dataset.tagset.clone(),
        },
    ))
}

/// Size, tag distribution and OOV profile of a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StatsReport {
    pub n_sentences: usize,
    pub n_tokens: usize,
    pub tag_histogram: BTreeMap<String, usize>,
    pub vocab_size: usize,
    pub oov_tokens: usize,
    pub oov_types: usize,
}

impl StatsReport {
    /// One `key<TAB>value` per line; tag counts as `tag:<TAG>`.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n_sentences\t{}", self.n_sentences);
        let _ = writeln!(out, "n_tokens\t{}", self.n_tokens);
        let _ = writeln!(out, "vocab_size\t{}", self.vocab_size);
        let _ = writeln!(out, "oov_tokens\t{}", self.oov_tokens);
        let _ = writeln!(out, "oov_types\t{}", self.oov_types);
        let _ = writeln!(out, "n_tags\t{}", self.tag_histogram.len());
        for (tag, count) in &self.tag_histogram {
            let _ = writeln!(out, "tag:{tag}\t{count}");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let rows = [
            ("sentences", self.n_sentences),
            ("tokens", self.n_tokens),
            ("vocabulary", self.vocab_size),
            ("oov tokens", self.oov_tokens),
            ("oov types", self.oov_types),
            ("tags", self.tag_histogram.len()),
        ];
        let tag_width = self
            .tag_histogram
            .keys()
            .map(|k| k.chars().count())
            .chain(rows.iter().map(|(k, _)| k.len()))
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for (key, value) in rows {
            let _ = writeln!(out, "{key:<tag_width$}  {value:>10}");
        }
        if !self.tag_histogram.is_empty() {
            out.push('\n');
            let _ = writeln!(out, "{:<tag_width$}  {:>10}  {:>7}", "tag", "count", "share");
            let total: usize = self.tag_histogram.values().sum();
            for (tag, &count) in &self.tag_histogram {
                let share = 100.0 * count as f64 / total.max(1) as f64;
                let pad = tag_width - tag.chars().count() + tag.len();
                let _ = writeln!(out, "{tag:<pad$}  {count:>10}  {share:>6.2}%");
            }
        }
        out
    }
}

/// Counts sentences, tokens and tags; OOV figures are measured against
/// `reference_vocab` and stay zero when it is `None`.
pub fn corpus_stats(dataset: &Dataset, reference_vocab: Option<&HashSet<String>>) -> StatsReport {
    let mut report = StatsReport {
        n_sentences: dataset.len(),
        ..Default::default()
    };
    let mut types: HashSet<&str> = HashSet::new();
    let mut oov_types: HashSet<&str> = HashSet::new();
    for token in dataset.sentences.iter().flat_map(|s| s.tokens.iter()) {
        report.n_tokens += 1;
        types.insert(&token.form);
        if let Some(tag) = &token.gold_tag {
            *report.tag_histogram.entry(tag.clone()).or_default() += 1;
        }
        if let Some(vocab) = reference_vocab {
            if !vocab.contains(&token.form) {
                report.oov_tokens += 1;
                oov_types.insert(&token.form);
            }
        }
    }
    report.vocab_size = types.len();
    report.oov_types = oov_types.len();
    report
}

/// Forms whose gold tags disagree across the corpus, with per-tag counts.
pub fn inconsistency_report(dataset: &Dataset) -> BTreeMap<String, BTreeMap<String, usize>> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for token in dataset.sentences.iter().flat_map(|s| s.tokens.iter()) {
        if let Some(tag) = &token.gold_tag {
            *counts
                .entry(token.form.clone())
                .or_default()
                .entry(tag.clone())
                .or_default() += 1;
        }
    }
    counts.retain(|_, tags| tags.len() >= 2);
    counts
}

/// Renders an inconsistency report as `form<TAB>tag:count,...` lines.
///
/// Forms are ordered by total frequency (descending, then form); tags within
/// a line by count (descending, then tag).
pub fn format_inconsistencies(report: &BTreeMap<String, BTreeMap<String, usize>>) -> String {
    let mut forms: Vec<(&String, &BTreeMap<String, usize>, usize)> = report
        .iter()
        .map(|(form, tags)| (form, tags, tags.values().sum()))
        .collect();
    forms.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)));
    let mut out = String::new();
    for (form, tags, _) in forms {
        let mut tags: Vec<(&String, &usize)> = tags.iter().collect();
        tags.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        let joined: Vec<String> = tags.iter().map(|(t, c)| format!("{t}:{c}")).collect();
        let _ = writeln!(out, "{form}\t{}", joined.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_token_sentence() {
        let d = parse_column_corpus("ಅವನು\tPR_PRP\n ಬಂದ\tV_VM_VF\n\n", true).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.n_tokens(), 2);
        assert_eq!(d.sentences[0].tokens[1].form, "ಬಂದ");
        assert_eq!(d.tagset.labels(), ["PR_PRP", "V_VM_VF"]);
    }

    #[test]
    fn empty_input() {
        let d = parse_column_corpus("", true).unwrap();
        assert_eq!(d.len(), 0);
        assert_eq!(d.n_tokens(), 0);
    }

    #[test]
    fn mixed_fixture_counts() {
        // 3 sentences: 2 + 1 + 3 tokens, with extra blank lines and a
        // missing trailing separator.
        let text = "# comment\n# another\na\tN\nb\tV\n\n\n\nc\tN\n   \nd\tN\ne\nf\tRD_PUNC";
        let d = parse_column_corpus(text, false).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(
            d.sentences.iter().map(Sentence::len).collect::<Vec<_>>(),
            [2, 1, 3]
        );
        assert_eq!(d.sentences[2].tokens[1].gold_tag, None);
        assert_eq!(d.tagset.labels(), ["N", "RD_PUNC", "V"]);
    }

    #[test]
    fn comment_only_at_start() {
        let d = parse_column_corpus("a\tN\n\n#\tSYM\n", false).unwrap();
        assert_eq!(d.sentences[1].tokens[0].form, "#");
    }

    #[test]
    fn too_many_fields_reports_line() {
        let err = parse_column_corpus("a\tN\nb\tN\tX\n", false).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_form_rejected() {
        let err = parse_column_corpus("a\tN\n\tN\n", false).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
    }

    #[test]
    fn strict_tag_pattern() {
        assert!(parse_column_corpus("a\tn\n", false).is_ok());
        let err = parse_column_corpus("a\tN\nb\tn1\n", true).unwrap_err();
        assert!(matches!(err, CorpusError::InvalidTag { line: 2, .. }));
    }

    #[test]
    fn closed_tagset_rejects_unknown() {
        let tags = TagSet::from_labels(["N", "V"]).unwrap();
        let err = parse_column_corpus_with_tagset("a\tN\nb\tJJ\n", true, tags).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownTag { token: 1, .. }));
    }

    #[test]
    fn minimal_serialization() {
        let d = Dataset::new(vec![Sentence::from_pairs(&[("a", "N")])]);
        assert_eq!(serialize_column_corpus(&d, Column::Gold).unwrap(), "a\tN\n\n");
    }

    #[test]
    fn serialize_missing_column_names_position() {
        let d = Dataset::new(vec![Sentence::from_pairs(&[("a", "N"), ("b", "V")])]);
        let err = serialize_column_corpus(&d, Column::Pred).unwrap_err();
        assert_eq!(err, CorpusError::MissingTag { sentence: 0, token: 0 });
    }

    #[test]
    fn prediction_files() {
        let d = parse_prediction_corpus("a\tN\tV\nb\tN\n\n").unwrap();
        let t = &d.sentences[0].tokens;
        assert_eq!(t[0].gold_tag.as_deref(), Some("N"));
        assert_eq!(t[0].pred_tag.as_deref(), Some("V"));
        assert_eq!(t[1].gold_tag, None);
        assert_eq!(t[1].pred_tag.as_deref(), Some("N"));
    }

    fn numbered(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| Sentence::from_pairs(&[(format!("w{i}"), "N")]))
                .collect(),
        )
    }

    #[test]
    fn split_ten_sentences() {
        let d = numbered(10);
        let (train, test) = split_dataset(&d, 0.2, 7).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let train_forms: HashSet<_> = train.vocabulary();
        assert!(test.vocabulary().is_disjoint(&train_forms));
        assert_eq!(split_dataset(&d, 0.2, 7).unwrap(), (train, test));
    }

    #[test]
    fn split_rounds_half_up() {
        let (train, test) = split_dataset(&numbered(7), 0.5, 1).unwrap();
        assert_eq!((train.len(), test.len()), (3, 4));
    }

    #[test]
    fn split_at_reported_ratio() {
        // 10.5K train / 1.6K test sentences.
        let (train, test) = split_dataset(&numbered(12_100), 1.6 / 12.1, 3).unwrap();
        assert_eq!(test.len(), 1_600);
        assert_eq!(train.len(), 10_500);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = numbered(3);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(split_dataset(&d, f, 0).is_err());
        }
        assert!(split_dataset(&Dataset::default(), 0.5, 0).is_err());
    }

    #[test]
    fn oov_counts() {
        let d = Dataset::new(vec![Sentence::from_pairs(&[
            ("a", "N"),
            ("b", "N"),
            ("c", "V"),
            ("d", "N"),
            ("a", "N"),
        ])]);
        let vocab: HashSet<String> = ["a", "b", "x"].iter().map(|s| s.to_string()).collect();
        let r = corpus_stats(&d, Some(&vocab));
        assert_eq!(r.n_tokens, 5);
        assert_eq!(r.oov_tokens, 2);
        assert_eq!(r.oov_types, 2);
        assert_eq!(r.vocab_size, 4);
        assert_eq!(r.tag_histogram["N"], 4);

        let r = corpus_stats(&d, Some(&HashSet::new()));
        assert_eq!(r.oov_tokens, r.n_tokens);
        let r = corpus_stats(&d, None);
        assert_eq!(r.oov_tokens, 0);
    }

    #[test]
    fn stats_rendering() {
        let d = parse_column_corpus("a\tN\nb\tV\n\nc\tN\n\n", false).unwrap();
        let kv = corpus_stats(&d, None).to_key_values();
        assert!(kv.contains("n_sentences\t2\n"));
        assert!(kv.contains("tag:N\t2\n"));
        let table = corpus_stats(&d, None).to_table();
        assert!(table.contains("tokens"));
    }

    #[test]
    fn inconsistent_forms() {
        let d = Dataset::new(vec![Sentence::from_pairs(&[
            ("x", "N"),
            ("y", "N"),
            ("x", "V"),
            ("x", "V"),
            ("y", "N"),
        ])]);
        let r = inconsistency_report(&d);
        assert_eq!(r.len(), 1);
        assert_eq!(r["x"]["V"], 2);
        assert_eq!(r["x"]["N"], 1);
        assert_eq!(format_inconsistencies(&r), "x\tV:2,N:1\n");
    }

    #[test]
    fn consistent_corpus_has_no_report() {
        let d = Dataset::new(vec![Sentence::from_pairs(&[("a", "N"), ("b", "V"), ("a", "N")])]);
        assert!(inconsistency_report(&d).is_empty());
    }
}
