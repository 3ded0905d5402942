//! Feature templates for the linear taggers.
//!
//! Every token yields a bag of binary string features: the word itself,
//! code-point prefixes and suffixes, a coarse length flag, the same atomic
//! features for neighbours inside the context window, and optional word
//! bigrams/trigrams over the window. Strings are mapped to dense ids by a
//! [`FeatureDictionary`] that is frozen once built from training data.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::{Dataset, Sentence};
use crate::error::{Error, Result};

pub const BOS: &str = "<BOS>";
pub const EOS: &str = "<EOS>";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureTemplateConfig {
    pub prefix_max_len: usize,
    pub suffix_max_len: usize,
    /// Words longer than this (in code points) get `len=MORE`.
    pub length_threshold: usize,
    /// Context radius: 0, 1 or 2.
    pub window: usize,
    pub use_bigrams: bool,
    pub use_trigrams: bool,
}

impl Default for FeatureTemplateConfig {
    fn default() -> Self {
        FeatureTemplateConfig {
            prefix_max_len: 3,
            suffix_max_len: 4,
            length_threshold: 3,
            window: 1,
            use_bigrams: false,
            use_trigrams: false,
        }
    }
}

impl FeatureTemplateConfig {
    pub const KEYS: [&'static str; 6] = [
        "prefix_max_len",
        "suffix_max_len",
        "length_threshold",
        "window",
        "use_bigrams",
        "use_trigrams",
    ];

    pub fn with_window(self, window: usize) -> Self {
        FeatureTemplateConfig { window, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window > 2 {
            return Err(Error::Argument(format!(
                "window must be 0, 1 or 2, got {}",
                self.window
            )));
        }
        Ok(())
    }

    /// Sets one field from its `key = value` textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num(key: &str, v: &str) -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Argument(format!("`{key}` expects a non-negative integer, got `{v}`")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "on" | "1" | "yes" => Ok(true),
                "false" | "off" | "0" | "no" => Ok(false),
                _ => Err(Error::Argument(format!("`{key}` expects a boolean, got `{v}`"))),
            }
        }
        match key {
            "prefix_max_len" => self.prefix_max_len = num(key, value)?,
            "suffix_max_len" => self.suffix_max_len = num(key, value)?,
            "length_threshold" => self.length_threshold = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "use_bigrams" => self.use_bigrams = flag(key, value)?,
            "use_trigrams" => self.use_trigrams = flag(key, value)?,
            _ => return Err(Error::Argument(format!("unknown feature key `{key}`"))),
        }
        Ok(())
    }

    /// `key = value` lines, one per field, in [`Self::KEYS`] order.
    pub fn to_kv_string(&self) -> String {
        format!(
            "prefix_max_len = {}\nsuffix_max_len = {}\nlength_threshold = {}\nwindow = {}\nuse_bigrams = {}\nuse_trigrams = {}\n",
            self.prefix_max_len,
            self.suffix_max_len,
            self.length_threshold,
            self.window,
            self.use_bigrams,
            self.use_trigrams
        )
    }

    /// Parses `key = value` lines; `#` starts a comment. Missing keys keep
    /// their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut config = FeatureTemplateConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(idx + 1, format!("expected `key = value`, got `{line}`")))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::format(idx + 1, e.to_string()))?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Word identity, affixes and length flag for a single form.
pub fn token_atomic_features(form: &str, config: &FeatureTemplateConfig) -> Result<Vec<String>> {
    if form.is_empty() {
        return Err(Error::Argument("empty word form".into()));
    }
    let chars: Vec<char> = form.chars().collect();
    let mut out = Vec::with_capacity(2 + config.prefix_max_len + config.suffix_max_len);
    out.push(format!("w={form}"));
    for k in 1..=config.prefix_max_len.min(chars.len()) {
        let prefix: String = chars[..k].iter().collect();
        out.push(format!("p{k}={prefix}"));
    }
    for k in 1..=config.suffix_max_len.min(chars.len()) {
        let suffix: String = chars[chars.len() - k..].iter().collect();
        out.push(format!("s{k}={suffix}"));
    }
    let len = if chars.len() > config.length_threshold {
        "MORE"
    } else {
        "LESS"
    };
    out.push(format!("len={len}"));
    Ok(out)
}

fn offset_tag(offset: isize) -> String {
    if offset > 0 {
        format!("[+{offset}]")
    } else {
        format!("[{offset}]")
    }
}

fn form_at<'a>(forms: &[&'a str], pos: isize) -> &'a str {
    if pos < 0 {
        BOS
    } else if pos as usize >= forms.len() {
        EOS
    } else {
        forms[pos as usize]
    }
}

/// Features of token `i` in a sentence given as word forms.
pub fn extract_features_from_forms(
    forms: &[&str],
    i: usize,
    config: &FeatureTemplateConfig,
) -> Result<Vec<String>> {
    if i >= forms.len() {
        return Err(Error::Argument(format!(
            "position {i} out of range for sentence of length {}",
            forms.len()
        )));
    }
    let mut out = token_atomic_features(forms[i], config)?;
    let w = config.window as isize;
    let center = i as isize;
    for offset in (-w..=w).filter(|&o| o != 0) {
        let pos = center + offset;
        let tag = offset_tag(offset);
        if pos < 0 || pos as usize >= forms.len() {
            out.push(format!("{tag}w={}", form_at(forms, pos)));
        } else {
            for feature in token_atomic_features(forms[pos as usize], config)? {
                out.push(format!("{tag}{feature}"));
            }
        }
    }
    if config.use_bigrams {
        for offset in -w..w {
            let pos = center + offset;
            out.push(format!(
                "bg{}={}_{}",
                offset_tag(offset),
                form_at(forms, pos),
                form_at(forms, pos + 1)
            ));
        }
    }
    if config.use_trigrams {
        for offset in -w..w - 1 {
            let pos = center + offset;
            out.push(format!(
                "tg{}={}_{}_{}",
                offset_tag(offset),
                form_at(forms, pos),
                form_at(forms, pos + 1),
                form_at(forms, pos + 2)
            ));
        }
    }
    Ok(out)
}

pub fn extract_token_features(
    sentence: &Sentence,
    i: usize,
    config: &FeatureTemplateConfig,
) -> Result<Vec<String>> {
    extract_features_from_forms(&sentence.forms(), i, config)
}

/// Dense string → id map, grown during training and frozen afterwards.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureDictionary {
    ids: HashMap<String, u32>,
    names: Vec<String>,
    frozen: bool,
}

impl FeatureDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn get(&self, feature: &str) -> Option<u32> {
        self.ids.get(feature).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    /// Returns the id of `feature`, assigning the next free one if the
    /// dictionary is still open.
    pub fn intern(&mut self, feature: &str) -> Option<u32> {
        if let Some(&id) = self.ids.get(feature) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.names.len() as u32;
        self.ids.insert(feature.to_string(), id);
        self.names.push(feature.to_string());
        Some(id)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("#version 1\n");
        for (id, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "{name}\t{id}");
        }
        out
    }

    /// Reads the `#version 1` format; the result is frozen.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "#version 1")) => {}
            _ => return Err(Error::format(1, "expected `#version 1` header")),
        }
        let mut dict = FeatureDictionary::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (name, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::format(idx + 1, "expected `feature<TAB>id`"))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::format(idx + 1, format!("bad feature id `{id}`")))?;
            if id != dict.len() {
                return Err(Error::format(idx + 1, format!("feature ids must be dense, expected {}", dict.len())));
            }
            if dict.intern(name) != Some(id as u32) {
                return Err(Error::format(idx + 1, format!("duplicate feature `{name}`")));
            }
        }
        dict.freeze();
        Ok(dict)
    }
}

/// Sorted, duplicate-free feature ids of one token.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseFeatureVector(pub Vec<u32>);

impl SparseFeatureVector {
    pub fn from_ids(mut ids: Vec<u32>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        SparseFeatureVector(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Builds the frozen dictionary of every feature seen in `dataset`, ids in
/// first-seen order.
pub fn build_dictionary(dataset: &Dataset, config: &FeatureTemplateConfig) -> Result<FeatureDictionary> {
    let mut dict = FeatureDictionary::new();
    for sentence in &dataset.sentences {
        let forms = sentence.forms();
        for i in 0..forms.len() {
            for feature in extract_features_from_forms(&forms, i, config)? {
                dict.intern(&feature);
            }
        }
    }
    dict.freeze();
    Ok(dict)
}

/// Maps each token to its known feature ids; unknown strings are dropped.
pub fn vectorize_forms(
    forms: &[&str],
    config: &FeatureTemplateConfig,
    dict: &FeatureDictionary,
) -> Result<Vec<SparseFeatureVector>> {
    (0..forms.len())
        .map(|i| {
            let ids = extract_features_from_forms(forms, i, config)?
                .iter()
                .filter_map(|f| dict.get(f))
                .collect();
            Ok(SparseFeatureVector::from_ids(ids))
        })
        .collect()
}

pub fn vectorize(
    sentence: &Sentence,
    config: &FeatureTemplateConfig,
    dict: &FeatureDictionary,
) -> Result<Vec<SparseFeatureVector>> {
    vectorize_forms(&sentence.forms(), config, dict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(v: Vec<String>) -> BTreeSet<String> {
        v.into_iter().collect()
    }

    #[test]
    fn kannada_word_affixes() {
        let f = token_atomic_features("ಅಷ್ಟೇ", &FeatureTemplateConfig::default()).unwrap();
        assert_eq!(
            f,
            [
                "w=ಅಷ್ಟೇ",
                "p1=ಅ",
                "p2=ಅಷ",
                "p3=ಅಷ್",
                "s1=ೇ",
                "s2=ಟೇ",
                "s3=್ಟೇ",
                "s4=ಷ್ಟೇ",
                "len=MORE"
            ]
        );
    }

    #[test]
    fn affixes_capped_at_length() {
        let f = token_atomic_features("ಅ", &FeatureTemplateConfig::default()).unwrap();
        assert_eq!(f, ["w=ಅ", "p1=ಅ", "s1=ಅ", "len=LESS"]);
    }

    #[test]
    fn length_threshold_boundary() {
        let c = FeatureTemplateConfig::default();
        assert!(token_atomic_features("abc", &c).unwrap().contains(&"len=LESS".to_string()));
        assert!(token_atomic_features("abcd", &c).unwrap().contains(&"len=MORE".to_string()));
    }

    #[test]
    fn empty_form_rejected() {
        assert!(token_atomic_features("", &FeatureTemplateConfig::default()).is_err());
    }

    #[test]
    fn window_one_middle_token() {
        let c = FeatureTemplateConfig {
            prefix_max_len: 1,
            suffix_max_len: 1,
            length_threshold: 3,
            window: 1,
            use_bigrams: false,
            use_trigrams: false,
        };
        let f = extract_features_from_forms(&["ab", "cde", "f"], 1, &c).unwrap();
        let expected = [
            "w=cde", "p1=c", "s1=e", "len=LESS", "[-1]w=ab", "[-1]p1=a", "[-1]s1=b", "[-1]len=LESS",
            "[+1]w=f", "[+1]p1=f", "[+1]s1=f", "[+1]len=LESS",
        ];
        assert_eq!(f, expected);
    }

    #[test]
    fn window_zero_is_atomic() {
        let c = FeatureTemplateConfig::default().with_window(0);
        let forms = ["ab", "cde", "f"];
        for i in 0..3 {
            assert_eq!(
                extract_features_from_forms(&forms, i, &c).unwrap(),
                token_atomic_features(forms[i], &c).unwrap()
            );
        }
    }

    #[test]
    fn boundary_tokens() {
        let c = FeatureTemplateConfig::default().with_window(2);
        let f = extract_features_from_forms(&["a", "b"], 0, &c).unwrap();
        assert!(f.contains(&"[-1]w=<BOS>".to_string()));
        assert!(f.contains(&"[-2]w=<BOS>".to_string()));
        assert!(f.contains(&"[+2]w=<EOS>".to_string()));
        assert!(!f.iter().any(|x| x.starts_with("[-1]p") || x.starts_with("[+2]s")));
    }

    #[test]
    fn ngrams_confined_to_window() {
        let c = FeatureTemplateConfig {
            use_bigrams: true,
            use_trigrams: true,
            ..FeatureTemplateConfig::default()
        };
        let f = extract_features_from_forms(&["a", "b", "c", "d"], 1, &c).unwrap();
        let ngrams: Vec<_> = f.iter().filter(|x| x.starts_with("bg") || x.starts_with("tg")).collect();
        assert_eq!(ngrams, ["bg[-1]=a_b", "bg[0]=b_c", "tg[-1]=a_b_c"]);
    }

    #[test]
    fn out_of_range_position() {
        assert!(extract_features_from_forms(&["a"], 1, &FeatureTemplateConfig::default()).is_err());
    }

    #[test]
    fn dictionary_of_one_sentence() {
        let c = FeatureTemplateConfig {
            prefix_max_len: 1,
            suffix_max_len: 1,
            length_threshold: 1,
            window: 1,
            use_bigrams: false,
            use_trigrams: false,
        };
        // Hand count for "ab ab c":
        //   atomic: w=ab p1=a s1=b len=MORE w=c p1=c s1=c len=LESS           -> 8
        //   [-1]: <BOS>, ab's four                                           -> 5
        //   [+1]: ab's four, c's four, <EOS>                                  -> 9
        let d = Dataset::new(vec![Sentence::from_pairs(&[("ab", "N"), ("ab", "N"), ("c", "V")])]);
        let dict = build_dictionary(&d, &c).unwrap();
        assert_eq!(dict.len(), 22);
        assert!(dict.is_frozen());

        let twice = Dataset::new(vec![d.sentences[0].clone(), d.sentences[0].clone()]);
        assert_eq!(build_dictionary(&twice, &c).unwrap(), dict);
    }

    #[test]
    fn gated_templates() {
        let c = FeatureTemplateConfig {
            prefix_max_len: 0,
            suffix_max_len: 0,
            window: 0,
            ..FeatureTemplateConfig::default()
        };
        let d = Dataset::new(vec![Sentence::from_pairs(&[("abcd", "N"), ("x", "V")])]);
        let dict = build_dictionary(&d, &c).unwrap();
        assert!((0..dict.len() as u32).all(|i| {
            let n = dict.name(i);
            n.starts_with("w=") || n.starts_with("len=")
        }));
        assert_eq!(dict.len(), 4);
    }

    #[test]
    fn vectorize_drops_unknown() {
        let c = FeatureTemplateConfig::default();
        let train = Dataset::new(vec![Sentence::from_pairs(&[("ಮನೆ", "N"), ("ಬಂದ", "V")])]);
        let dict = build_dictionary(&train, &c).unwrap();

        let seen = vectorize(&train.sentences[0], &c, &dict).unwrap();
        for (i, v) in seen.iter().enumerate() {
            let expected = extract_token_features(&train.sentences[0], i, &c).unwrap();
            assert_eq!(v.len(), set(expected).len());
        }

        let novel = Sentence::from_forms(&["ಮರ", "ಹೋದ"]);
        let vectors = vectorize(&novel, &c, &dict).unwrap();
        for (i, v) in vectors.iter().enumerate() {
            let expected: BTreeSet<u32> = extract_token_features(&novel, i, &c)
                .unwrap()
                .iter()
                .filter_map(|f| dict.get(f))
                .collect();
            assert_eq!(v.ids(), expected.into_iter().collect::<Vec<_>>().as_slice());
        }
        // shared prefix ಮ, suffix ದ and sentence boundaries survive
        assert!(vectors[0].ids().contains(&dict.get("p1=ಮ").unwrap()));
        assert!(vectors[1].ids().contains(&dict.get("s1=ದ").unwrap()));
        assert!(vectors[0].ids().contains(&dict.get("[-1]w=<BOS>").unwrap()));

        let empty = {
            let mut d = FeatureDictionary::new();
            d.freeze();
            d
        };
        assert!(vectorize(&novel, &c, &empty).unwrap().iter().all(|v| v.is_empty()));
    }

    #[test]
    fn frozen_dictionary_does_not_grow() {
        let mut d = FeatureDictionary::new();
        assert_eq!(d.intern("a"), Some(0));
        d.freeze();
        assert_eq!(d.intern("b"), None);
        assert_eq!(d.intern("a"), Some(0));
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn dictionary_text_round_trip() {
        let mut d = FeatureDictionary::new();
        for f in ["w=a b", "p1=a", "[-1]w=<BOS>"] {
            d.intern(f);
        }
        d.freeze();
        let text = d.to_text();
        assert!(text.starts_with("#version 1\n"));
        assert_eq!(FeatureDictionary::from_text(&text).unwrap(), d);
        assert!(FeatureDictionary::from_text("a\t0\n").is_err());
    }

    #[test]
    fn config_kv_round_trip() {
        let c = FeatureTemplateConfig {
            prefix_max_len: 2,
            suffix_max_len: 5,
            length_threshold: 4,
            window: 2,
            use_bigrams: true,
            use_trigrams: false,
        };
        assert_eq!(FeatureTemplateConfig::from_kv_str(&c.to_kv_string()).unwrap(), c);
        assert!(FeatureTemplateConfig::from_kv_str("window = 3").is_err());
        assert!(FeatureTemplateConfig::from_kv_str("colour = red").is_err());
        let partial = FeatureTemplateConfig::from_kv_str("# comment\nwindow = 0  # none\n").unwrap();
        assert_eq!(partial, FeatureTemplateConfig::default().with_window(0));
    }
}
