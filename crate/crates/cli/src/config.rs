//! Training configuration: presets, `key = value` files and flag overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use seqtag::features::FeatureTemplateConfig;
use seqtag::linear::TrainConfig;
use seqtag::neural::{Architecture, EncoderKind, NeuralTrainConfig, OptimizerKind};

use crate::error::CliError;

/// Environment variable consulted for the seed when neither the config
/// file nor a flag sets one.
pub const SEED_ENV: &str = "SEQTAG_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Crf,
    Perceptron,
    Svm,
    Rnn,
    Lstm,
    BiLstm,
}

impl ModelKind {
    pub const NAMES: [&'static str; 6] = ["crf", "perceptron", "svm", "rnn", "lstm", "bilstm"];

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "crf" => ModelKind::Crf,
            "perceptron" => ModelKind::Perceptron,
            "svm" => ModelKind::Svm,
            "rnn" => ModelKind::Rnn,
            "lstm" => ModelKind::Lstm,
            "bilstm" => ModelKind::BiLstm,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Rnn | ModelKind::Lstm | ModelKind::BiLstm)
    }

    fn encoder(self) -> EncoderKind {
        match self {
            ModelKind::Rnn => EncoderKind::SimpleRnn,
            ModelKind::Lstm => EncoderKind::Lstm,
            _ => EncoderKind::BiLstm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// CRF, window 1, prefixes up to 3, suffixes up to 4, length threshold 3.
    CrfDefaults,
    /// Word embeddings only; Adam, batch 32, 25 epochs.
    NeuralWord,
    /// Character and word embeddings; RMSProp, batch 64, 25 epochs.
    NeuralCharword,
}

impl Preset {
    pub const NAMES: [&'static str; 3] = ["paper-crf", "paper-neural-word", "paper-neural-charword"];

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "paper-crf" => Preset::CrfDefaults,
            "paper-neural-word" => Preset::NeuralWord,
            "paper-neural-charword" => Preset::NeuralCharword,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

/// Where a setting came from, for error messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    File { path: PathBuf, line: usize },
    Flag,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::File { path, line } => write!(f, "{}:{line}", path.display()),
            Source::Flag => f.write_str("command line"),
        }
    }
}

/// Raw `key → value` settings; later insertions override earlier ones.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    entries: BTreeMap<String, (String, Source)>,
}

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Into<String>, source: Source) {
        self.entries.insert(key.to_string(), (value.into(), source));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn from_file_text(text: &str, path: PathBuf) -> Result<Self, CliError> {
        let mut settings = Settings::default();
        let mut errors = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let source = Source::File {
                path: path.clone(),
                line: idx + 1,
            };
            match line.split_once('=') {
                Some((k, v)) if !k.trim().is_empty() => {
                    let key = k.trim().replace('-', "_");
                    if settings.entries.contains_key(&key) {
                        errors.push(format!("{source}: `{key}` set twice"));
                    }
                    settings.set(&key, v.trim(), source);
                }
                _ => errors.push(format!("{source}: expected `key = value`, got `{line}`")),
            }
        }
        if errors.is_empty() {
            Ok(settings)
        } else {
            Err(CliError::Usage(errors.join("\n")))
        }
    }

    /// Overlays `other`, whose entries win.
    pub fn merge(&mut self, other: Settings) {
        self.entries.extend(other.entries);
    }
}

/// Everything `train` needs, after presets, file and flags are merged.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub preset: Preset,
    pub seed: u64,
    pub features: FeatureTemplateConfig,
    pub linear: TrainConfig,
    pub neural: NeuralTrainConfig,
    pub arch: Architecture,
    /// Set when `word_dim` was given explicitly.
    pub word_dim_explicit: bool,
    pub embeddings: Option<PathBuf>,
    pub history: Option<PathBuf>,
}

const COMMON_KEYS: [&str; 4] = ["preset", "seed", "epochs", "learning_rate"];
const FEATURE_KEYS: [&str; 6] = FeatureTemplateConfig::KEYS;
const LINEAR_KEYS: [&str; 2] = ["l2", "shuffle"];
const NEURAL_KEYS: [&str; 13] = [
    "optimizer",
    "validation_fraction",
    "freeze_embeddings",
    "embeddings",
    "char_embeddings",
    "word_embeddings",
    "word_dim",
    "char_dim",
    "char_hidden",
    "char_out",
    "hidden",
    "clip_norm",
    "history",
];

fn parse_flag(v: &str) -> Option<bool> {
    match v {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

struct Collector<'a> {
    settings: &'a Settings,
    errors: Vec<String>,
}

impl Collector<'_> {
    fn fail(&mut self, key: &str, message: String) {
        let source = &self.settings.entries[key].1;
        self.errors.push(format!("{source}: {message}"));
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let raw = self.settings.get(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                let raw = raw.to_string();
                self.fail(key, format!("`{key}` expects {what}, got `{raw}`"));
                None
            }
        }
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        let raw = self.settings.get(key)?;
        let parsed = parse_flag(raw);
        if parsed.is_none() {
            let raw = raw.to_string();
            self.fail(key, format!("`{key}` expects on/off, got `{raw}`"));
        }
        parsed
    }
}

impl RunConfig {
    /// Resolves a configuration; every problem found is reported in one
    /// aggregated usage error.
    pub fn resolve(model: ModelKind, settings: &Settings, env_seed: Option<&str>) -> Result<Self, CliError> {
        let mut c = Collector {
            settings,
            errors: Vec::new(),
        };
        for key in settings.entries.keys() {
            let known = COMMON_KEYS.contains(&key.as_str())
                || FEATURE_KEYS.contains(&key.as_str())
                || LINEAR_KEYS.contains(&key.as_str())
                || NEURAL_KEYS.contains(&key.as_str())
                || key == "batch_size";
            if !known {
                c.fail(key, format!("unknown setting `{key}`"));
            } else if model.is_neural() && (FEATURE_KEYS.contains(&key.as_str()) || LINEAR_KEYS.contains(&key.as_str())) {
                c.fail(key, format!("`{key}` does not apply to the neural model `{}`", model.name()));
            } else if !model.is_neural() && NEURAL_KEYS.contains(&key.as_str()) {
                c.fail(key, format!("`{key}` applies only to neural models, not `{}`", model.name()));
            } else if key == "batch_size" && matches!(model, ModelKind::Perceptron | ModelKind::Svm) {
                c.fail(key, format!("`batch_size` does not apply to `{}`", model.name()));
            }
        }

        let char_flag = c.flag("char_embeddings");
        let preset = match settings.get("preset") {
            Some(name) => match Preset::parse(name) {
                Some(p) => {
                    let fits = match p {
                        Preset::CrfDefaults => model == ModelKind::Crf,
                        _ => model.is_neural(),
                    };
                    if !fits {
                        c.fail("preset", format!("preset `{name}` does not apply to `{}`", model.name()));
                    }
                    if p == Preset::NeuralWord && char_flag == Some(true) {
                        c.fail("char_embeddings", "`paper-neural-word` excludes character embeddings".into());
                    }
                    p
                }
                None => {
                    c.fail("preset", format!("unknown preset `{name}`; valid: {}", Preset::NAMES.join(", ")));
                    Preset::CrfDefaults
                }
            },
            None if model.is_neural() && char_flag == Some(true) => Preset::NeuralCharword,
            None if model.is_neural() => Preset::NeuralWord,
            None => Preset::CrfDefaults,
        };

        let mut features = FeatureTemplateConfig::default();
        let mut linear = match model {
            ModelKind::Crf => TrainConfig::crf(),
            ModelKind::Perceptron => TrainConfig::perceptron(),
            _ => TrainConfig::history(),
        };
        let mut neural = match preset {
            Preset::NeuralCharword => NeuralTrainConfig::char_word(),
            _ => NeuralTrainConfig::word(),
        };
        let mut arch = Architecture {
            encoder: model.encoder(),
            use_char: preset == Preset::NeuralCharword,
            ..Architecture::default()
        };

        let seed = match settings.get("seed") {
            Some(_) => c.value("seed", "a non-negative integer").unwrap_or(0),
            None => match env_seed {
                Some(raw) => match raw.parse() {
                    Ok(s) => s,
                    Err(_) => {
                        c.errors
                            .push(format!("environment: {SEED_ENV} must be a non-negative integer, got `{raw}`"));
                        0
                    }
                },
                None => 0,
            },
        };
        linear.seed = seed;
        neural.seed = seed;

        if let Some(e) = c.value("epochs", "a positive integer") {
            linear.epochs = e;
            neural.epochs = e;
        }
        if let Some(lr) = c.value("learning_rate", "a number") {
            linear.learning_rate = lr;
            neural.learning_rate = lr;
        }
        if let Some(b) = c.value("batch_size", "a non-negative integer") {
            linear.batch_size = b;
            neural.batch_size = b;
        }
        if let Some(l2) = c.value("l2", "a number") {
            linear.l2 = l2;
        }
        if let Some(s) = c.flag("shuffle") {
            linear.shuffle = s;
        }

        for key in FEATURE_KEYS {
            if let Some(v) = settings.get(key) {
                let v = v.to_string();
                if let Err(e) = features.set(key, &v) {
                    c.fail(key, e.to_string());
                }
            }
        }
        if model == ModelKind::Svm {
            if settings.get("window").is_some() && features.window != seqtag::linear::HISTORY_WINDOW {
                c.fail(
                    "window",
                    format!("`svm` always uses window {}", seqtag::linear::HISTORY_WINDOW),
                );
            }
            features.window = seqtag::linear::HISTORY_WINDOW;
        }

        if let Some(o) = settings.get("optimizer") {
            match OptimizerKind::parse(o) {
                Some(o) => neural.optimizer = o,
                None => {
                    let o = o.to_string();
                    c.fail("optimizer", format!("unknown optimizer `{o}`; valid: adam, rmsprop"));
                }
            }
        }
        if let Some(f) = c.value("validation_fraction", "a number") {
            neural.validation_fraction = f;
        }
        if let Some(f) = c.flag("freeze_embeddings") {
            neural.freeze_word_embeddings = f;
        }
        if let Some(n) = c.value("clip_norm", "a number") {
            neural.clip_norm = Some(n);
        }
        if let Some(u) = char_flag {
            arch.use_char = u;
        }
        if let Some(u) = c.flag("word_embeddings") {
            arch.use_word = u;
        }
        for (key, slot) in [
            ("word_dim", &mut arch.word_dim),
            ("char_dim", &mut arch.char_dim),
            ("char_hidden", &mut arch.char_hidden),
            ("char_out", &mut arch.char_out),
            ("hidden", &mut arch.hidden),
        ] {
            if let Some(v) = c.value(key, "a positive integer") {
                *slot = v;
            }
        }
        let embeddings = settings.get("embeddings").map(PathBuf::from);
        let history = settings.get("history").map(PathBuf::from);
        if embeddings.is_some() && !arch.use_word {
            c.fail("embeddings", "pretrained embeddings need `word_embeddings = on`".into());
        }

        if model.is_neural() {
            if let Err(e) = neural.validate() {
                c.errors.push(e.to_string());
            }
            if let Err(e) = arch.validate() {
                c.errors.push(e.to_string());
            }
        } else {
            if let Err(e) = linear.validate() {
                c.errors.push(e.to_string());
            }
            if let Err(e) = features.validate() {
                c.errors.push(e.to_string());
            }
        }

        if !c.errors.is_empty() {
            return Err(CliError::Usage(format!("invalid configuration:\n  {}", c.errors.join("\n  "))));
        }
        Ok(RunConfig {
            model,
            preset,
            seed,
            features,
            linear,
            neural,
            arch,
            word_dim_explicit: settings.get("word_dim").is_some(),
            embeddings,
            history,
        })
    }
}
