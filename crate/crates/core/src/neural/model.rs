//! Recurrent taggers over word and/or character-composed word vectors.
//!
//! A token's input vector is the concatenation of its word embedding and a
//! vector composed from its characters: a forward and a backward LSTM run
//! over the character embeddings, their final states are concatenated and
//! linearly projected. A sentence-level SimpleRNN, LSTM or BiLSTM reads the
//! token vectors and a softmax layer scores every tag at every position.

use std::collections::BTreeSet;

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cells::{glorot, reversed, LstmCache, LstmParams, RnnParams};
use super::embeddings::{oov_vector, EmbeddingTable, Vocab, OOV_INIT_BOUND};
use crate::corpus::{Dataset, TagSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    SimpleRnn,
    Lstm,
    BiLstm,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::SimpleRnn => "rnn",
            EncoderKind::Lstm => "lstm",
            EncoderKind::BiLstm => "bilstm",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "rnn" | "simplernn" => Some(EncoderKind::SimpleRnn),
            "lstm" => Some(EncoderKind::Lstm),
            "bilstm" => Some(EncoderKind::BiLstm),
            _ => None,
        }
    }
}

/// Layer sizes and which inputs are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub encoder: EncoderKind,
    pub use_word: bool,
    pub use_char: bool,
    pub word_dim: usize,
    pub char_dim: usize,
    /// Units per direction of the character LSTMs.
    pub char_hidden: usize,
    /// Width of the composed character vector.
    pub char_out: usize,
    /// Units per direction of the sentence layer.
    pub hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            encoder: EncoderKind::BiLstm,
            use_word: true,
            use_char: true,
            word_dim: 300,
            char_dim: 32,
            char_hidden: 64,
            char_out: 128,
            hidden: 128,
        }
    }
}

impl Architecture {
    pub fn input_dim(&self) -> usize {
        let word = if self.use_word { self.word_dim } else { 0 };
        let char = if self.use_char { self.char_out } else { 0 };
        word + char
    }

    pub fn output_dim(&self) -> usize {
        match self.encoder {
            EncoderKind::BiLstm => 2 * self.hidden,
            _ => self.hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_word && !self.use_char {
            return Err(Error::Argument("enable word embeddings, character embeddings or both".into()));
        }
        let mut dims = vec![("hidden", self.hidden)];
        if self.use_word {
            dims.push(("word_dim", self.word_dim));
        }
        if self.use_char {
            dims.extend([
                ("char_dim", self.char_dim),
                ("char_hidden", self.char_hidden),
                ("char_out", self.char_out),
            ]);
        }
        for (name, d) in dims {
            if d == 0 {
                return Err(Error::Argument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Character vocabulary; index 0 is reserved for unseen characters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
}

impl CharVocab {
    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let set: BTreeSet<char> = chars.into_iter().collect();
        CharVocab {
            chars: set.into_iter().collect(),
        }
    }

    /// Table rows including the unknown slot.
    pub fn len(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index(&self, c: char) -> usize {
        self.chars.binary_search(&c).map_or(0, |i| i + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharParams {
    /// `C × d_c`, row 0 is the unknown character.
    pub embeddings: Array2<f64>,
    pub forward: LstmParams,
    pub backward: LstmParams,
    /// `2·h_c × d_cw`, forward state rows first.
    pub proj_w: Array2<f64>,
    pub proj_b: Array1<f64>,
}

impl CharParams {
    fn init<R: Rng>(rng: &mut R, n_chars: usize, arch: &Architecture) -> Self {
        CharParams {
            embeddings: Array2::from_shape_simple_fn((n_chars, arch.char_dim), || {
                rng.gen_range(-OOV_INIT_BOUND..=OOV_INIT_BOUND)
            }),
            forward: LstmParams::init(rng, arch.char_dim, arch.char_hidden),
            backward: LstmParams::init(rng, arch.char_dim, arch.char_hidden),
            proj_w: glorot(rng, 2 * arch.char_hidden, arch.char_out),
            proj_b: Array1::zeros(arch.char_out),
        }
    }

    fn zeros_like(&self) -> Self {
        CharParams {
            embeddings: Array2::zeros(self.embeddings.dim()),
            forward: LstmParams::zeros(self.forward.input_dim(), self.forward.units()),
            backward: LstmParams::zeros(self.backward.input_dim(), self.backward.units()),
            proj_w: Array2::zeros(self.proj_w.dim()),
            proj_b: Array1::zeros(self.proj_b.len()),
        }
    }

    /// Composes a word vector from character ids.
    pub fn compose(&self, ids: &[usize]) -> Array1<f64> {
        self.compose_cached(ids).output
    }

    fn compose_cached(&self, ids: &[usize]) -> CharForward {
        let x = self.embeddings.select(Axis(0), ids);
        let x_rev = reversed(x.view());
        let fwd = self.forward.forward(x.view());
        let bwd = self.backward.forward(x_rev.view());
        let last = ids.len() - 1;
        let h = self.forward.units();
        let mut concat = Array1::zeros(2 * h);
        concat.slice_mut(s![..h]).assign(&fwd.hidden.row(last));
        concat.slice_mut(s![h..]).assign(&bwd.hidden.row(last));
        let output = concat.dot(&self.proj_w) + &self.proj_b;
        CharForward {
            ids: ids.to_vec(),
            x,
            x_rev,
            fwd,
            bwd,
            concat,
            output,
        }
    }

    fn backward_pass(&self, cache: &CharForward, d_out: ndarray::ArrayView1<f64>, grad: &mut CharParams) {
        let h = self.forward.units();
        let len = cache.ids.len();
        grad.proj_w += &outer(cache.concat.view(), d_out);
        grad.proj_b += &d_out;
        let d_concat = self.proj_w.dot(&d_out);
        let mut dh = Array2::zeros((len, h));
        dh.row_mut(len - 1).assign(&d_concat.slice(s![..h]));
        let dx = self.forward.backward(cache.x.view(), &cache.fwd, dh.view(), &mut grad.forward);
        dh.row_mut(len - 1).assign(&d_concat.slice(s![h..]));
        let dx_rev = self
            .backward
            .backward(cache.x_rev.view(), &cache.bwd, dh.view(), &mut grad.backward);
        for (t, &c) in cache.ids.iter().enumerate() {
            let mut row = grad.embeddings.row_mut(c);
            row += &dx.row(t);
            row += &dx_rev.row(len - 1 - t);
        }
    }
}

fn outer(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

struct CharForward {
    ids: Vec<usize>,
    x: Array2<f64>,
    x_rev: Array2<f64>,
    fwd: LstmCache,
    bwd: LstmCache,
    concat: Array1<f64>,
    output: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EncoderParams {
    SimpleRnn(RnnParams),
    Lstm(LstmParams),
    BiLstm { forward: LstmParams, backward: LstmParams },
}

impl EncoderParams {
    fn init<R: Rng>(rng: &mut R, arch: &Architecture) -> Self {
        let d = arch.input_dim();
        match arch.encoder {
            EncoderKind::SimpleRnn => EncoderParams::SimpleRnn(RnnParams::init(rng, d, arch.hidden)),
            EncoderKind::Lstm => EncoderParams::Lstm(LstmParams::init(rng, d, arch.hidden)),
            EncoderKind::BiLstm => EncoderParams::BiLstm {
                forward: LstmParams::init(rng, d, arch.hidden),
                backward: LstmParams::init(rng, d, arch.hidden),
            },
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            EncoderParams::SimpleRnn(p) => EncoderParams::SimpleRnn(RnnParams::zeros(p.input_dim(), p.units())),
            EncoderParams::Lstm(p) => EncoderParams::Lstm(LstmParams::zeros(p.input_dim(), p.units())),
            EncoderParams::BiLstm { forward, backward } => EncoderParams::BiLstm {
                forward: LstmParams::zeros(forward.input_dim(), forward.units()),
                backward: LstmParams::zeros(backward.input_dim(), backward.units()),
            },
        }
    }

    fn forward(&self, inputs: ArrayView2<f64>) -> EncoderForward {
        match self {
            EncoderParams::SimpleRnn(p) => {
                let hidden = p.forward(inputs);
                EncoderForward {
                    output: hidden.clone(),
                    state: EncoderState::Rnn(hidden),
                }
            }
            EncoderParams::Lstm(p) => {
                let cache = p.forward(inputs);
                EncoderForward {
                    output: cache.hidden.clone(),
                    state: EncoderState::Lstm(cache),
                }
            }
            EncoderParams::BiLstm { forward, backward } => {
                let fwd = forward.forward(inputs);
                let rev_inputs = reversed(inputs);
                let bwd = backward.forward(rev_inputs.view());
                let h = forward.units();
                let mut output = Array2::zeros((inputs.nrows(), 2 * h));
                output.slice_mut(s![.., ..h]).assign(&fwd.hidden);
                output.slice_mut(s![.., h..]).assign(&reversed(bwd.hidden.view()));
                EncoderForward {
                    output,
                    state: EncoderState::BiLstm { fwd, bwd, rev_inputs },
                }
            }
        }
    }

    fn backward(
        &self,
        inputs: ArrayView2<f64>,
        state: &EncoderState,
        d_output: ArrayView2<f64>,
        grad: &mut EncoderParams,
    ) -> Array2<f64> {
        match (self, state, grad) {
            (EncoderParams::SimpleRnn(p), EncoderState::Rnn(hidden), EncoderParams::SimpleRnn(g)) => {
                p.backward(inputs, hidden.view(), d_output, g)
            }
            (EncoderParams::Lstm(p), EncoderState::Lstm(cache), EncoderParams::Lstm(g)) => {
                p.backward(inputs, cache, d_output, g)
            }
            (
                EncoderParams::BiLstm { forward, backward },
                EncoderState::BiLstm { fwd, bwd, rev_inputs },
                EncoderParams::BiLstm {
                    forward: gf,
                    backward: gb,
                },
            ) => {
                let h = forward.units();
                let dx = forward.backward(inputs, fwd, d_output.slice(s![.., ..h]), gf);
                let d_rev = reversed(d_output.slice(s![.., h..]));
                let dx_rev = backward.backward(rev_inputs.view(), bwd, d_rev.view(), gb);
                dx + reversed(dx_rev.view())
            }
            _ => unreachable!("gradient layout mirrors parameter layout"),
        }
    }
}

enum EncoderState {
    Rnn(Array2<f64>),
    Lstm(LstmCache),
    BiLstm {
        fwd: LstmCache,
        bwd: LstmCache,
        rev_inputs: Array2<f64>,
    },
}

struct EncoderForward {
    output: Array2<f64>,
    state: EncoderState,
}

/// All trainable weights. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralParams {
    /// `V × d_w` rows for the training vocabulary.
    pub word_embeddings: Option<Array2<f64>>,
    pub char: Option<CharParams>,
    pub encoder: EncoderParams,
    /// `H × K`
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

/// A named, row-major view of one parameter array.
pub struct Block<'a> {
    pub name: String,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

pub struct BlockMut<'a> {
    pub name: String,
    pub shape: (usize, usize),
    pub data: &'a mut [f64],
}

fn lstm_arrays<'a>(prefix: &str, p: &'a LstmParams, out: &mut Vec<Block<'a>>) {
    push2(out, format!("{prefix}.w_input"), &p.w_input);
    push2(out, format!("{prefix}.w_hidden"), &p.w_hidden);
    push1(out, format!("{prefix}.bias"), &p.bias);
}

fn lstm_arrays_mut<'a>(prefix: &str, p: &'a mut LstmParams, out: &mut Vec<BlockMut<'a>>) {
    push2_mut(out, format!("{prefix}.w_input"), &mut p.w_input);
    push2_mut(out, format!("{prefix}.w_hidden"), &mut p.w_hidden);
    push1_mut(out, format!("{prefix}.bias"), &mut p.bias);
}

fn push2<'a>(out: &mut Vec<Block<'a>>, name: String, a: &'a Array2<f64>) {
    out.push(Block {
        name,
        shape: a.dim(),
        data: a.as_slice().expect("standard layout"),
    });
}

fn push1<'a>(out: &mut Vec<Block<'a>>, name: String, a: &'a Array1<f64>) {
    out.push(Block {
        name,
        shape: (1, a.len()),
        data: a.as_slice().expect("standard layout"),
    });
}

fn push2_mut<'a>(out: &mut Vec<BlockMut<'a>>, name: String, a: &'a mut Array2<f64>) {
    let shape = a.dim();
    out.push(BlockMut {
        name,
        shape,
        data: a.as_slice_mut().expect("standard layout"),
    });
}

fn push1_mut<'a>(out: &mut Vec<BlockMut<'a>>, name: String, a: &'a mut Array1<f64>) {
    let shape = (1, a.len());
    out.push(BlockMut {
        name,
        shape,
        data: a.as_slice_mut().expect("standard layout"),
    });
}

pub const WORD_EMBEDDING_BLOCK: &str = "word.embeddings";

impl NeuralParams {
    /// All-zero parameters for the given sizes.
    pub fn zeros(arch: &Architecture, n_words: usize, n_chars: usize, n_tags: usize) -> Self {
        let d = arch.input_dim();
        let h = arch.hidden;
        NeuralParams {
            word_embeddings: arch.use_word.then(|| Array2::zeros((n_words, arch.word_dim))),
            char: arch.use_char.then(|| CharParams {
                embeddings: Array2::zeros((n_chars, arch.char_dim)),
                forward: LstmParams::zeros(arch.char_dim, arch.char_hidden),
                backward: LstmParams::zeros(arch.char_dim, arch.char_hidden),
                proj_w: Array2::zeros((2 * arch.char_hidden, arch.char_out)),
                proj_b: Array1::zeros(arch.char_out),
            }),
            encoder: match arch.encoder {
                EncoderKind::SimpleRnn => EncoderParams::SimpleRnn(RnnParams::zeros(d, h)),
                EncoderKind::Lstm => EncoderParams::Lstm(LstmParams::zeros(d, h)),
                EncoderKind::BiLstm => EncoderParams::BiLstm {
                    forward: LstmParams::zeros(d, h),
                    backward: LstmParams::zeros(d, h),
                },
            },
            out_w: Array2::zeros((arch.output_dim(), n_tags)),
            out_b: Array1::zeros(n_tags),
        }
    }

    pub fn zeros_like(&self) -> Self {
        NeuralParams {
            word_embeddings: self.word_embeddings.as_ref().map(|w| Array2::zeros(w.dim())),
            char: self.char.as_ref().map(CharParams::zeros_like),
            encoder: self.encoder.zeros_like(),
            out_w: Array2::zeros(self.out_w.dim()),
            out_b: Array1::zeros(self.out_b.len()),
        }
    }

    /// Every parameter array in a fixed order.
    pub fn blocks(&self) -> Vec<Block<'_>> {
        let mut out = Vec::new();
        if let Some(w) = &self.word_embeddings {
            push2(&mut out, WORD_EMBEDDING_BLOCK.into(), w);
        }
        if let Some(c) = &self.char {
            push2(&mut out, "char.embeddings".into(), &c.embeddings);
            lstm_arrays("char.fwd", &c.forward, &mut out);
            lstm_arrays("char.bwd", &c.backward, &mut out);
            push2(&mut out, "char.proj.w".into(), &c.proj_w);
            push1(&mut out, "char.proj.b".into(), &c.proj_b);
        }
        match &self.encoder {
            EncoderParams::SimpleRnn(p) => {
                push2(&mut out, "enc.w_input".into(), &p.w_input);
                push2(&mut out, "enc.w_hidden".into(), &p.w_hidden);
                push1(&mut out, "enc.bias".into(), &p.bias);
            }
            EncoderParams::Lstm(p) => lstm_arrays("enc", p, &mut out),
            EncoderParams::BiLstm { forward, backward } => {
                lstm_arrays("enc.fwd", forward, &mut out);
                lstm_arrays("enc.bwd", backward, &mut out);
            }
        }
        push2(&mut out, "out.w".into(), &self.out_w);
        push1(&mut out, "out.b".into(), &self.out_b);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        let mut out = Vec::new();
        if let Some(w) = &mut self.word_embeddings {
            push2_mut(&mut out, WORD_EMBEDDING_BLOCK.into(), w);
        }
        if let Some(c) = &mut self.char {
            push2_mut(&mut out, "char.embeddings".into(), &mut c.embeddings);
            lstm_arrays_mut("char.fwd", &mut c.forward, &mut out);
            lstm_arrays_mut("char.bwd", &mut c.backward, &mut out);
            push2_mut(&mut out, "char.proj.w".into(), &mut c.proj_w);
            push1_mut(&mut out, "char.proj.b".into(), &mut c.proj_b);
        }
        match &mut self.encoder {
            EncoderParams::SimpleRnn(p) => {
                push2_mut(&mut out, "enc.w_input".into(), &mut p.w_input);
                push2_mut(&mut out, "enc.w_hidden".into(), &mut p.w_hidden);
                push1_mut(&mut out, "enc.bias".into(), &mut p.bias);
            }
            EncoderParams::Lstm(p) => lstm_arrays_mut("enc", p, &mut out),
            EncoderParams::BiLstm { forward, backward } => {
                lstm_arrays_mut("enc.fwd", forward, &mut out);
                lstm_arrays_mut("enc.bwd", backward, &mut out);
            }
        }
        push2_mut(&mut out, "out.w".into(), &mut self.out_w);
        push1_mut(&mut out, "out.b".into(), &mut self.out_b);
        out
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.data.len()).sum()
    }

    /// Name of the first block holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.blocks()
            .into_iter()
            .find(|b| b.data.iter().any(|v| !v.is_finite()))
            .map(|b| b.name)
    }
}

/// A complete tagger: architecture, vocabularies, weights.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralTagger {
    pub arch: Architecture,
    pub tagset: TagSet,
    /// Rows of `params.word_embeddings`.
    pub word_vocab: Vocab,
    /// Frozen vectors consulted for words outside `word_vocab`.
    pub fallback: Option<EmbeddingTable>,
    pub char_vocab: CharVocab,
    /// Seed of the vectors given to words found in neither table.
    pub oov_seed: u64,
    pub freeze_word_embeddings: bool,
    pub params: NeuralParams,
}

enum WordInput {
    Row(usize),
    Fixed(Array1<f64>),
}

/// Forward activations of one sentence.
pub struct SentenceForward {
    words: Vec<WordInput>,
    chars: Vec<CharForward>,
    inputs: Array2<f64>,
    encoder: EncoderForward,
    /// `T × K` tag distributions.
    pub probs: Array2<f64>,
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    logits
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

impl NeuralTagger {
    /// Builds a randomly initialized tagger whose vocabularies come from
    /// `train`. Word rows take the pretrained vector when there is one and a
    /// seeded random vector otherwise.
    pub fn initialize(
        arch: Architecture,
        tagset: TagSet,
        train: &Dataset,
        pretrained: Option<&EmbeddingTable>,
        seed: u64,
        freeze_word_embeddings: bool,
    ) -> Result<Self> {
        arch.validate()?;
        if tagset.is_empty() {
            return Err(Error::Argument("tag set is empty".into()));
        }
        if let Some(p) = pretrained {
            if arch.use_word && p.dim() != arch.word_dim {
                return Err(Error::Contract(format!(
                    "pretrained vectors have dimension {}, architecture expects {}",
                    p.dim(),
                    arch.word_dim
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut word_vocab = Vocab::new();
        let mut fallback = None;
        let word_embeddings = if arch.use_word {
            for token in train.sentences.iter().flat_map(|s| s.tokens.iter()) {
                word_vocab.insert(&token.form);
            }
            let mut table = Array2::zeros((word_vocab.len(), arch.word_dim));
            for (i, word) in word_vocab.words().iter().enumerate() {
                match pretrained.and_then(|p| p.get(word)) {
                    Some(v) => table.row_mut(i).assign(&v),
                    None => table.row_mut(i).assign(&oov_vector(seed, word, arch.word_dim)),
                }
            }
            fallback = pretrained.map(|p| {
                let mut vocab = Vocab::new();
                let mut rows = Vec::new();
                for (i, word) in p.vocab.words().iter().enumerate() {
                    if word_vocab.get(word).is_none() {
                        vocab.insert(word);
                        rows.extend(p.vectors.row(i).iter().copied());
                    }
                }
                EmbeddingTable {
                    vectors: Array2::from_shape_vec((vocab.len(), p.dim()), rows).expect("row lengths"),
                    vocab,
                }
            });
            Some(table)
        } else {
            None
        };
        let char_vocab = if arch.use_char {
            CharVocab::from_chars(
                train
                    .sentences
                    .iter()
                    .flat_map(|s| s.tokens.iter())
                    .flat_map(|t| t.form.chars()),
            )
        } else {
            CharVocab::default()
        };
        let char = arch
            .use_char
            .then(|| CharParams::init(&mut rng, char_vocab.len(), &arch));
        let encoder = EncoderParams::init(&mut rng, &arch);
        let out_w = glorot(&mut rng, arch.output_dim(), tagset.len());
        let out_b = Array1::zeros(tagset.len());
        Ok(NeuralTagger {
            arch,
            tagset,
            word_vocab,
            fallback,
            char_vocab,
            oov_seed: seed,
            freeze_word_embeddings,
            params: NeuralParams {
                word_embeddings,
                char,
                encoder,
                out_w,
                out_b,
            },
        })
    }

    pub fn n_tags(&self) -> usize {
        self.tagset.len()
    }

    /// Table row of a word, if it has one.
    pub fn word_row(&self, form: &str) -> Option<usize> {
        self.word_vocab.get(form)
    }

    fn word_input(&self, form: &str) -> WordInput {
        if let Some(i) = self.word_vocab.get(form) {
            return WordInput::Row(i);
        }
        if let Some(v) = self.fallback.as_ref().and_then(|f| f.get(form)) {
            return WordInput::Fixed(v.to_owned());
        }
        WordInput::Fixed(oov_vector(self.oov_seed, form, self.arch.word_dim))
    }

    /// Current vector of a word, including words outside the vocabulary.
    pub fn word_vector(&self, form: &str) -> Option<Array1<f64>> {
        let table = self.params.word_embeddings.as_ref()?;
        Some(match self.word_input(form) {
            WordInput::Row(i) => table.row(i).to_owned(),
            WordInput::Fixed(v) => v,
        })
    }

    pub fn char_ids(&self, form: &str) -> Vec<usize> {
        form.chars().map(|c| self.char_vocab.index(c)).collect()
    }

    /// Character-composed vector of `form`.
    pub fn compose_word_vector(&self, form: &str) -> Result<Array1<f64>> {
        if form.is_empty() {
            return Err(Error::Argument("empty word form".into()));
        }
        let char = self
            .params
            .char
            .as_ref()
            .ok_or_else(|| Error::Argument("model has no character composition".into()))?;
        Ok(char.compose(&self.char_ids(form)))
    }

    fn check_finite(&self) -> Result<()> {
        match self.params.first_non_finite() {
            Some(block) => Err(Error::Numeric(format!("non-finite values in parameter block `{block}`"))),
            None => Ok(()),
        }
    }

    /// Runs one unpadded sentence.
    pub fn forward_sentence(&self, forms: &[&str]) -> Result<SentenceForward> {
        if forms.is_empty() {
            return Err(Error::Argument("cannot tag an empty sentence".into()));
        }
        if forms.iter().any(|f| f.is_empty()) {
            return Err(Error::Argument("empty word form".into()));
        }
        let arch = &self.arch;
        let mut inputs = Array2::zeros((forms.len(), arch.input_dim()));
        let mut words = Vec::new();
        let mut chars = Vec::new();
        for (t, form) in forms.iter().enumerate() {
            let mut col = 0;
            if let Some(table) = &self.params.word_embeddings {
                let input = self.word_input(form);
                let v = match &input {
                    WordInput::Row(i) => table.row(*i),
                    WordInput::Fixed(v) => v.view(),
                };
                inputs.slice_mut(s![t, ..arch.word_dim]).assign(&v);
                col = arch.word_dim;
                words.push(input);
            }
            if let Some(cp) = &self.params.char {
                let cache = cp.compose_cached(&self.char_ids(form));
                inputs.slice_mut(s![t, col..]).assign(&cache.output);
                chars.push(cache);
            }
        }
        let encoder = self.params.encoder.forward(inputs.view());
        let logits = encoder.output.dot(&self.params.out_w) + &self.params.out_b;
        let probs = softmax_rows(logits);
        if probs.iter().any(|p| !p.is_finite()) {
            self.check_finite()?;
            return Err(Error::Numeric("non-finite activations in forward pass".into()));
        }
        Ok(SentenceForward {
            words,
            chars,
            inputs,
            encoder,
            probs,
        })
    }

    /// Backpropagates `scale · Σ_t −log p_t(gold_t)` into `grad`; returns the
    /// unscaled sum.
    pub fn backward_sentence(&self, fwd: &SentenceForward, gold: &[usize], scale: f64, grad: &mut NeuralParams) -> f64 {
        let len = gold.len();
        let mut d_logits = fwd.probs.clone();
        let mut loss = 0.0;
        for (t, &g) in gold.iter().enumerate() {
            loss -= fwd.probs[[t, g]].ln();
            d_logits[[t, g]] -= 1.0;
        }
        d_logits *= scale;
        grad.out_w += &fwd.encoder.output.t().dot(&d_logits);
        grad.out_b += &d_logits.sum_axis(Axis(0));
        let d_enc = d_logits.dot(&self.params.out_w.t());
        let d_inputs = self.params.encoder.backward(
            fwd.inputs.view(),
            &fwd.encoder.state,
            d_enc.view(),
            &mut grad.encoder,
        );
        let mut col = 0;
        if let Some(g) = &mut grad.word_embeddings {
            if !self.freeze_word_embeddings {
                for (t, input) in fwd.words.iter().enumerate() {
                    if let WordInput::Row(i) = input {
                        let mut row = g.row_mut(*i);
                        row += &d_inputs.slice(s![t, ..self.arch.word_dim]);
                    }
                }
            }
            col = self.arch.word_dim;
        }
        if let (Some(cp), Some(cg)) = (&self.params.char, &mut grad.char) {
            for t in 0..len {
                cp.backward_pass(&fwd.chars[t], d_inputs.slice(s![t, col..]), cg);
            }
        }
        loss
    }

    /// Per-token argmax; ties go to the lowest tag index.
    pub fn tag_forms(&self, forms: &[&str]) -> Result<Vec<String>> {
        let fwd = self.forward_sentence(forms)?;
        let idx: Vec<usize> = fwd.probs.rows().into_iter().map(argmax).collect();
        Ok(self.tagset.decode(&idx))
    }
}

/// Sentences padded to a common length, with a mask over real tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedBatch {
    /// `B` rows of `L` forms; padding positions hold empty strings.
    pub forms: Vec<Vec<String>>,
    /// `B × L`, true on real tokens.
    pub mask: Array2<bool>,
}

impl PaddedBatch {
    pub fn from_sentences<S: AsRef<str>>(sentences: &[Vec<S>]) -> Self {
        let len = sentences.iter().map(Vec::len).max().unwrap_or(0);
        let mut mask = Array2::from_elem((sentences.len(), len), false);
        let forms = sentences
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let mut row: Vec<String> = s.iter().map(|f| f.as_ref().to_string()).collect();
                for t in 0..s.len() {
                    mask[[b, t]] = true;
                }
                row.resize(len, String::new());
                row
            })
            .collect();
        PaddedBatch { forms, mask }
    }

    pub fn batch_size(&self) -> usize {
        self.forms.len()
    }

    pub fn max_len(&self) -> usize {
        self.mask.ncols()
    }

    /// Real forms of sentence `b`. The mask must mark a prefix.
    pub fn sentence(&self, b: usize) -> Result<Vec<&str>> {
        let row = self.mask.row(b);
        let len = row.iter().take_while(|&&m| m).count();
        if row.iter().skip(len).any(|&m| m) {
            return Err(Error::Contract(format!("mask of sentence {b} is not a prefix")));
        }
        if self.forms[b].len() != self.max_len() {
            return Err(Error::Contract(format!("sentence {b} is not padded to the batch length")));
        }
        Ok(self.forms[b][..len].iter().map(String::as_str).collect())
    }

    pub fn n_tokens(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// `B × L × K` tag distributions; padding positions are all zero.
pub fn forward_tagger(tagger: &NeuralTagger, batch: &PaddedBatch) -> Result<Array3<f64>> {
    tagger.check_finite()?;
    let mut out = Array3::zeros((batch.batch_size(), batch.max_len(), tagger.n_tags()));
    for b in 0..batch.batch_size() {
        let forms = batch.sentence(b)?;
        if forms.is_empty() {
            continue;
        }
        let fwd = tagger.forward_sentence(&forms)?;
        out.slice_mut(s![b, ..forms.len(), ..]).assign(&fwd.probs);
    }
    Ok(out)
}

/// Mean cross-entropy over the batch's real tokens and its gradient.
///
/// `gold` is `B × L`; entries at padding positions are ignored.
pub fn loss_and_gradients(
    tagger: &NeuralTagger,
    batch: &PaddedBatch,
    gold: ArrayView2<usize>,
) -> Result<(f64, NeuralParams)> {
    tagger.check_finite()?;
    if gold.dim() != batch.mask.dim() {
        return Err(Error::Contract(format!(
            "gold tags are {:?}, batch is {:?}",
            gold.dim(),
            batch.mask.dim()
        )));
    }
    let n = batch.n_tokens();
    let mut grad = tagger.params.zeros_like();
    if n == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / n as f64;
    let mut total = 0.0;
    for b in 0..batch.batch_size() {
        let forms = batch.sentence(b)?;
        if forms.is_empty() {
            continue;
        }
        let tags: Vec<usize> = gold.row(b).iter().take(forms.len()).copied().collect();
        if let Some(&bad) = tags.iter().find(|&&y| y >= tagger.n_tags()) {
            return Err(Error::Contract(format!("gold tag {bad} outside tag set of size {}", tagger.n_tags())));
        }
        let fwd = tagger.forward_sentence(&forms)?;
        total += tagger.backward_sentence(&fwd, &tags, scale, &mut grad);
    }
    if let Some(block) = grad.first_non_finite() {
        return Err(Error::Numeric(format!("non-finite gradient in parameter block `{block}`")));
    }
    Ok((total * scale, grad))
}

/// Argmax tags for one sentence.
pub fn tag_sentence_neural(tagger: &NeuralTagger, forms: &[&str]) -> Result<Vec<String>> {
    tagger.tag_forms(forms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn corpus() -> Dataset {
        Dataset::new(vec![
            Sentence::from_pairs(&[("ab", "N"), ("ba", "V")]),
            Sentence::from_pairs(&[("ab", "N"), ("c", "V"), ("ab", "N")]),
        ])
    }

    fn tiny(encoder: EncoderKind) -> Architecture {
        Architecture {
            encoder,
            use_word: true,
            use_char: true,
            word_dim: 2,
            char_dim: 2,
            char_hidden: 1,
            char_out: 2,
            hidden: 2,
        }
    }

    fn tagger(arch: Architecture, seed: u64) -> NeuralTagger {
        let data = corpus();
        NeuralTagger::initialize(arch, data.tagset.clone(), &data, None, seed, false).unwrap()
    }

    fn batch() -> (PaddedBatch, Array2<usize>) {
        let b = PaddedBatch::from_sentences(&[vec!["ab", "ba", "zz"], vec!["c"]]);
        let gold = ndarray::array![[0, 1, 0], [1, 0, 0]];
        (b, gold)
    }

    #[test]
    fn distributions_sum_to_one_and_padding_is_zero() {
        for enc in [EncoderKind::SimpleRnn, EncoderKind::Lstm, EncoderKind::BiLstm] {
            let t = tagger(tiny(enc), 3);
            let (b, _) = batch();
            let p = forward_tagger(&t, &b).unwrap();
            assert_eq!(p.dim(), (2, 3, 2));
            for bi in 0..2 {
                for ti in 0..3 {
                    let sum: f64 = p.slice(s![bi, ti, ..]).sum();
                    let expected = if b.mask[[bi, ti]] { 1.0 } else { 0.0 };
                    assert!((sum - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for enc in [EncoderKind::SimpleRnn, EncoderKind::Lstm, EncoderKind::BiLstm] {
            let mut t = tagger(tiny(enc), 11);
            let (b, gold) = batch();
            let (_, grad) = loss_and_gradients(&t, &b, gold.view()).unwrap();
            let analytic: Vec<(String, Vec<f64>)> =
                grad.blocks().into_iter().map(|b| (b.name, b.data.to_vec())).collect();
            let eps = 1e-5;
            let mut worst: f64 = 0.0;
            for (bi, (name, values)) in analytic.iter().enumerate() {
                for j in 0..values.len() {
                    let bump = |t: &mut NeuralTagger, delta: f64| {
                        t.params.blocks_mut()[bi].data[j] += delta;
                    };
                    bump(&mut t, eps);
                    let plus = loss_and_gradients(&t, &b, gold.view()).unwrap().0;
                    bump(&mut t, -2.0 * eps);
                    let minus = loss_and_gradients(&t, &b, gold.view()).unwrap().0;
                    bump(&mut t, eps);
                    let numeric = (plus - minus) / (2.0 * eps);
                    let a = values[j];
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                    assert!(rel < 1e-4, "{enc:?} {name}[{j}]: analytic {a}, numeric {numeric}");
                    worst = worst.max(rel);
                }
            }
            assert!(worst < 1e-4);
        }
    }

    #[test]
    fn zero_parameters_give_uniform_loss_and_first_tag() {
        let mut t = tagger(tiny(EncoderKind::BiLstm), 1);
        t.params = t.params.zeros_like();
        let (b, gold) = batch();
        let (loss, _) = loss_and_gradients(&t, &b, gold.view()).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
        assert_eq!(t.tag_forms(&["ab", "q"]).unwrap(), ["N", "N"]);
    }

    fn perturbed_outputs(arch: Architecture, position: usize) -> Vec<bool> {
        let t = tagger(arch, 5);
        let forms = ["ab", "ba", "c", "ab", "ba"];
        let base = t.forward_sentence(&forms).unwrap().probs;
        let mut changed = forms;
        changed[position] = "ba";
        let other = t.forward_sentence(&changed).unwrap().probs;
        (0..forms.len())
            .map(|i| (&base.row(i) - &other.row(i)).iter().any(|d| d.abs() > 1e-12))
            .collect()
    }

    #[test]
    fn unidirectional_encoders_are_causal() {
        for enc in [EncoderKind::SimpleRnn, EncoderKind::Lstm] {
            assert_eq!(perturbed_outputs(tiny(enc), 2), [false, false, true, true, true]);
        }
    }

    #[test]
    fn bidirectional_encoder_sees_both_sides() {
        assert_eq!(perturbed_outputs(tiny(EncoderKind::BiLstm), 2), [true; 5]);
    }

    #[test]
    fn composition_uses_character_order() {
        let t = tagger(tiny(EncoderKind::Lstm), 2);
        let ab = t.compose_word_vector("ab").unwrap();
        let ba = t.compose_word_vector("ba").unwrap();
        assert_ne!(ab, ba);
        // Swapping the two directional LSTMs and the halves of the projection
        // maps the composition of a word onto that of its reversal.
        let mut swapped = t.clone();
        let cp = swapped.params.char.as_mut().unwrap();
        std::mem::swap(&mut cp.forward, &mut cp.backward);
        let h = cp.forward.units();
        let top = cp.proj_w.slice(s![..h, ..]).to_owned();
        let bottom = cp.proj_w.slice(s![h.., ..]).to_owned();
        cp.proj_w.slice_mut(s![..h, ..]).assign(&bottom);
        cp.proj_w.slice_mut(s![h.., ..]).assign(&top);
        let rev = swapped.compose_word_vector("ba").unwrap();
        assert!((&rev - &ab).iter().all(|d| d.abs() < 1e-12));
        assert!(t.compose_word_vector("").is_err());
    }

    #[test]
    fn batching_and_padding_do_not_change_results() {
        let t = tagger(tiny(EncoderKind::BiLstm), 9);
        let single = forward_tagger(&t, &PaddedBatch::from_sentences(&[vec!["c"]])).unwrap();
        let (b, _) = batch();
        let joint = forward_tagger(&t, &b).unwrap();
        assert_eq!(single.slice(s![0, 0, ..]), joint.slice(s![1, 0, ..]));
        let alone = forward_tagger(&t, &PaddedBatch::from_sentences(&[vec!["ab", "ba", "zz"]])).unwrap();
        assert_eq!(alone.slice(s![0, .., ..]), joint.slice(s![0, .., ..]));
    }

    #[test]
    fn mask_must_be_a_prefix() {
        let t = tagger(tiny(EncoderKind::Lstm), 1);
        let (mut b, _) = batch();
        b.mask[[1, 0]] = false;
        b.mask[[1, 1]] = true;
        assert!(matches!(forward_tagger(&t, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_parameters_are_reported_by_block() {
        let mut t = tagger(tiny(EncoderKind::BiLstm), 1);
        t.params.out_b[0] = f64::NAN;
        let (b, gold) = batch();
        match loss_and_gradients(&t, &b, gold.view()) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("out.b")),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn frozen_embeddings_get_no_gradient() {
        let mut t = tagger(tiny(EncoderKind::Lstm), 4);
        t.freeze_word_embeddings = true;
        let (b, gold) = batch();
        let (_, grad) = loss_and_gradients(&t, &b, gold.view()).unwrap();
        assert!(grad.word_embeddings.unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn unknown_words_use_seeded_vectors() {
        let t = tagger(tiny(EncoderKind::Lstm), 4);
        assert_eq!(t.word_vector("zz").unwrap(), oov_vector(4, "zz", 2));
        assert_eq!(t.word_vector("ab").unwrap(), oov_vector(4, "ab", 2));
        assert_eq!(t.char_ids("aq"), [1, 0]);
    }

    #[test]
    fn pretrained_vectors_fill_rows_and_fallback() {
        let table = crate::neural::load_embeddings("ab 1 2\nfar 3 4\n", None).unwrap().table;
        let data = corpus();
        let t = NeuralTagger::initialize(tiny(EncoderKind::Lstm), data.tagset.clone(), &data, Some(&table), 0, false)
            .unwrap();
        assert_eq!(t.word_vector("ab").unwrap().to_vec(), [1.0, 2.0]);
        assert_eq!(t.word_vector("far").unwrap().to_vec(), [3.0, 4.0]);
        assert_eq!(t.fallback.as_ref().unwrap().len(), 1);
        let wrong = crate::neural::load_embeddings("ab 1 2 3\n", None).unwrap().table;
        assert!(NeuralTagger::initialize(tiny(EncoderKind::Lstm), data.tagset.clone(), &data, Some(&wrong), 0, false)
            .is_err());
    }
}
