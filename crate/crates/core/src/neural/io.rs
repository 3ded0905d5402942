//! Text model files for the neural taggers.
//!
//! ```text
//! #version 1
//! model<TAB>neural
//! arch<TAB>key<TAB>value                (encoder, use_word, use_char, dims)
//! option<TAB>key<TAB>value              (oov_seed, freeze_word_embeddings)
//! tags<TAB>K / tag<TAB>id<TAB>label
//! words<TAB>V / word<TAB>id<TAB>form
//! chars<TAB>C / char<TAB>id<TAB>c       (id 0 is the unknown slot and is not listed)
//! fallback<TAB>N<TAB>d / vector<TAB>form<TAB>v1 … vd
//! block<TAB>name<TAB>rows<TAB>cols      followed by `rows` lines of values
//! ```

use std::fmt::Write as _;

use ndarray::Array2;

use super::embeddings::{EmbeddingTable, Vocab};
use super::model::{Architecture, CharVocab, EncoderKind, NeuralParams, NeuralTagger};
use crate::error::{Error, Result};
use crate::linear::io::{fmt_weight, parse_field, read_header, read_tagset, write_header, write_tagset, Lines};

pub const NEURAL_MODEL_KIND: &str = "neural";

fn arch_entries(arch: &Architecture) -> Vec<(&'static str, String)> {
    vec![
        ("encoder", arch.encoder.name().to_string()),
        ("use_word", arch.use_word.to_string()),
        ("use_char", arch.use_char.to_string()),
        ("word_dim", arch.word_dim.to_string()),
        ("char_dim", arch.char_dim.to_string()),
        ("char_hidden", arch.char_hidden.to_string()),
        ("char_out", arch.char_out.to_string()),
        ("hidden", arch.hidden.to_string()),
    ]
}

fn push_values(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&fmt_weight(*v));
    }
    out.push('\n');
}

pub fn write_neural_model(tagger: &NeuralTagger) -> String {
    let mut out = String::new();
    write_header(&mut out, NEURAL_MODEL_KIND);
    for (key, value) in arch_entries(&tagger.arch) {
        let _ = writeln!(out, "arch\t{key}\t{value}");
    }
    let _ = writeln!(out, "option\toov_seed\t{}", tagger.oov_seed);
    let _ = writeln!(out, "option\tfreeze_word_embeddings\t{}", tagger.freeze_word_embeddings);
    write_tagset(&mut out, &tagger.tagset);
    let _ = writeln!(out, "words\t{}", tagger.word_vocab.len());
    for (i, w) in tagger.word_vocab.words().iter().enumerate() {
        let _ = writeln!(out, "word\t{i}\t{w}");
    }
    let _ = writeln!(out, "chars\t{}", tagger.char_vocab.chars().len());
    for (i, c) in tagger.char_vocab.chars().iter().enumerate() {
        let _ = writeln!(out, "char\t{}\t{c}", i + 1);
    }
    match &tagger.fallback {
        Some(table) => {
            let _ = writeln!(out, "fallback\t{}\t{}", table.len(), table.dim());
            for (w, row) in table.vocab.words().iter().zip(table.vectors.rows()) {
                let _ = write!(out, "vector\t{w}\t");
                push_values(&mut out, row.as_slice().expect("standard layout"));
            }
        }
        None => out.push_str("fallback\t0\t0\n"),
    }
    for block in tagger.params.blocks() {
        let (rows, cols) = block.shape;
        let _ = writeln!(out, "block\t{}\t{rows}\t{cols}", block.name);
        for r in 0..rows {
            push_values(&mut out, &block.data[r * cols..(r + 1) * cols]);
        }
    }
    out
}

fn keyed<'a>(lines: &mut Lines<'a>, record: &str, key: &str) -> Result<(usize, &'a str)> {
    let (no, fields) = lines.record(record)?;
    if fields.len() != 3 || fields[1] != key {
        return Err(Error::format(no, format!("expected `{record}<TAB>{key}<TAB>value`")));
    }
    Ok((no, fields[2]))
}

fn read_arch(lines: &mut Lines) -> Result<Architecture> {
    let mut arch = Architecture::default();
    let (no, enc) = keyed(lines, "arch", "encoder")?;
    arch.encoder = EncoderKind::parse(enc).ok_or_else(|| Error::format(no, format!("unknown encoder `{enc}`")))?;
    let (no, v) = keyed(lines, "arch", "use_word")?;
    arch.use_word = parse_field(no, v)?;
    let (no, v) = keyed(lines, "arch", "use_char")?;
    arch.use_char = parse_field(no, v)?;
    for (key, slot) in [
        ("word_dim", &mut arch.word_dim),
        ("char_dim", &mut arch.char_dim),
        ("char_hidden", &mut arch.char_hidden),
        ("char_out", &mut arch.char_out),
        ("hidden", &mut arch.hidden),
    ] {
        let (no, v) = keyed(lines, "arch", key)?;
        *slot = parse_field(no, v)?;
    }
    arch.validate()?;
    Ok(arch)
}

fn parse_values(no: usize, line: &str, expected: usize, into: &mut Vec<f64>) -> Result<()> {
    let before = into.len();
    for f in line.split(' ') {
        let v: f64 = parse_field(no, f)?;
        if !v.is_finite() {
            return Err(Error::format(no, "non-finite value"));
        }
        into.push(v);
    }
    if into.len() - before != expected {
        return Err(Error::format(
            no,
            format!("expected {expected} values, found {}", into.len() - before),
        ));
    }
    Ok(())
}

pub fn read_neural_model(text: &str) -> Result<NeuralTagger> {
    let mut lines = Lines::new(text);
    let kind = read_header(&mut lines)?;
    if kind != NEURAL_MODEL_KIND {
        return Err(Error::format(2, format!("not a neural model: `{kind}`")));
    }
    let arch = read_arch(&mut lines)?;
    let (no, v) = keyed(&mut lines, "option", "oov_seed")?;
    let oov_seed: u64 = parse_field(no, v)?;
    let (no, v) = keyed(&mut lines, "option", "freeze_word_embeddings")?;
    let freeze_word_embeddings: bool = parse_field(no, v)?;
    let tagset = read_tagset(&mut lines)?;

    let n_words: usize = lines.value("words")?;
    let mut word_vocab = Vocab::new();
    for i in 0..n_words {
        let (no, fields) = lines.record("word")?;
        if fields.len() != 3 || parse_field::<usize>(no, fields[1])? != i || word_vocab.insert(fields[2]) != i {
            return Err(Error::format(no, format!("bad or duplicate word record {i}")));
        }
    }
    let n_chars: usize = lines.value("chars")?;
    let mut chars = Vec::with_capacity(n_chars);
    for i in 1..=n_chars {
        let (no, fields) = lines.record("char")?;
        let mut it = fields.get(2).map(|s| s.chars()).into_iter().flatten();
        let c = match (fields.len(), it.next(), it.next()) {
            (3, Some(c), None) if parse_field::<usize>(no, fields[1])? == i => c,
            _ => return Err(Error::format(no, format!("bad char record {i}"))),
        };
        chars.push(c);
    }
    let char_vocab = CharVocab::from_chars(chars.iter().copied());
    if char_vocab.chars() != chars.as_slice() {
        return Err(Error::format(0, "character list is not sorted and unique"));
    }

    let (no, fields) = lines.record("fallback")?;
    if fields.len() != 3 {
        return Err(Error::format(no, "expected `fallback<TAB>N<TAB>d`"));
    }
    let n_fallback: usize = parse_field(no, fields[1])?;
    let fallback_dim: usize = parse_field(no, fields[2])?;
    let fallback = if n_fallback == 0 && fallback_dim == 0 {
        None
    } else {
        let mut vocab = Vocab::new();
        let mut values = Vec::with_capacity(n_fallback * fallback_dim);
        for i in 0..n_fallback {
            let (no, fields) = lines.record("vector")?;
            if fields.len() != 3 || vocab.insert(fields[1]) != i {
                return Err(Error::format(no, "bad or duplicate vector record"));
            }
            parse_values(no, fields[2], fallback_dim, &mut values)?;
        }
        Some(EmbeddingTable {
            vocab,
            vectors: Array2::from_shape_vec((n_fallback, fallback_dim), values).expect("counted"),
        })
    };

    let mut params = NeuralParams::zeros(&arch, n_words, char_vocab.len(), tagset.len());
    for block in params.blocks_mut() {
        let (no, fields) = lines.record("block")?;
        let (rows, cols) = block.shape;
        if fields.len() != 4
            || fields[1] != block.name
            || parse_field::<usize>(no, fields[2])? != rows
            || parse_field::<usize>(no, fields[3])? != cols
        {
            return Err(Error::format(
                no,
                format!("expected `block<TAB>{}<TAB>{rows}<TAB>{cols}`", block.name),
            ));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (no, line) = lines.next_line()?;
            parse_values(no, line, cols, &mut values)?;
        }
        block.data.copy_from_slice(&values);
    }
    if let Some((no, line)) = lines.next_line().ok().filter(|(_, l)| !l.is_empty()) {
        return Err(Error::format(no, format!("unexpected trailing record `{line}`")));
    }
    Ok(NeuralTagger {
        arch,
        tagset,
        word_vocab,
        fallback,
        char_vocab,
        oov_seed,
        freeze_word_embeddings,
        params,
    })
}
