use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::{Settings, Source};
use error::CliError;

/// Part-of-speech tagging toolkit: corpus tools, linear and neural taggers,
/// evaluation.
#[derive(Parser, Debug)]
#[command(name = "seqtag", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print sentence, token, tag and OOV counts of a corpus.
    Stats(StatsArgs),
    /// Split a corpus into train and test parts at the sentence level.
    Split(SplitArgs),
    /// Train a model and write it to a file.
    Train(TrainArgs),
    /// Tag a corpus with a trained model.
    Tag(TagArgs),
    /// Score predictions against gold tags.
    Eval(EvalArgs),
    /// List word forms that carry more than one gold tag.
    Inconsistencies(InconsistenciesArgs),
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Column-format corpus.
    pub corpus: PathBuf,
    /// Reference vocabulary for OOV counts: a word list or an embedding file
    /// (the first field of each line is the word).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Print `key<TAB>value` lines instead of a table.
    #[arg(long)]
    pub machine_readable: bool,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Column-format corpus.
    pub corpus: PathBuf,
    /// Share of sentences that go to the test part.
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    /// Shuffle seed [default: $SEQTAG_SEED, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Model family: crf, perceptron, svm, rnn, lstm or bilstm.
    pub model: String,
    /// Gold-tagged column-format corpus.
    pub corpus: PathBuf,
    /// Output model file.
    #[arg(short, long)]
    pub output: PathBuf,
    /// `key = value` file; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// paper-crf | paper-neural-word | paper-neural-charword
    /// [default: paper-crf for crf, paper-neural-charword for neural models
    /// with character embeddings, paper-neural-word otherwise].
    #[arg(long)]
    pub preset: Option<String>,
    /// Random seed [default: $SEQTAG_SEED, else 0].
    #[arg(long)]
    pub seed: Option<String>,
    /// Passes over the data [default: crf 20, perceptron 10, svm 10, neural 25].
    #[arg(long)]
    pub epochs: Option<String>,
    /// Step size [default: crf 0.1 (Adagrad), perceptron 1, svm 0.1, neural 0.001].
    #[arg(long)]
    pub learning_rate: Option<String>,
    /// Sentences per update; 0 is full batch for crf
    /// [default: crf 8, paper-neural-word 32, paper-neural-charword 64].
    #[arg(long)]
    pub batch_size: Option<String>,
    /// L2 penalty of crf and svm [default: 1e-5].
    #[arg(long)]
    pub l2: Option<String>,
    /// Shuffle sentences every epoch (on/off) [default: on].
    #[arg(long)]
    pub shuffle: Option<String>,
    /// Context window radius 0, 1 or 2 [default: 1; svm always 2].
    #[arg(long)]
    pub window: Option<String>,
    /// Longest prefix feature in code points [default: 3].
    #[arg(long)]
    pub prefix_max_len: Option<String>,
    /// Longest suffix feature in code points [default: 4].
    #[arg(long)]
    pub suffix_max_len: Option<String>,
    /// Words longer than this get `len=MORE` [default: 3].
    #[arg(long)]
    pub length_threshold: Option<String>,
    /// Word bigram features inside the window (on/off) [default: off].
    #[arg(long)]
    pub use_bigrams: Option<String>,
    /// Word trigram features inside the window (on/off) [default: off].
    #[arg(long)]
    pub use_trigrams: Option<String>,
    /// adam | rmsprop [default: adam for paper-neural-word, rmsprop for paper-neural-charword].
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Trailing share of the shuffled corpus used for validation [default: 0.1].
    #[arg(long)]
    pub validation_fraction: Option<String>,
    /// Pretrained word vectors (`word v1 … vd`, optional `V d` header).
    #[arg(long)]
    pub embeddings: Option<String>,
    /// Keep word vectors fixed during training (on/off) [default: off].
    #[arg(long)]
    pub freeze_embeddings: Option<String>,
    /// Character-composed word vectors (on/off) [default: off; selects paper-neural-charword].
    #[arg(long)]
    pub char_embeddings: Option<String>,
    /// Word embedding table (on/off) [default: on].
    #[arg(long)]
    pub word_embeddings: Option<String>,
    /// Word vector size [default: 300, or the dimension of --embeddings].
    #[arg(long)]
    pub word_dim: Option<String>,
    /// Character embedding size [default: 32].
    #[arg(long)]
    pub char_dim: Option<String>,
    /// Character LSTM units per direction [default: 64].
    #[arg(long)]
    pub char_hidden: Option<String>,
    /// Composed character vector size [default: 128].
    #[arg(long)]
    pub char_out: Option<String>,
    /// Sentence encoder units per direction [default: 128].
    #[arg(long)]
    pub hidden: Option<String>,
    /// Rescale gradients whose L2 norm exceeds this [default: no clipping].
    #[arg(long)]
    pub clip_norm: Option<String>,
    /// Write per-epoch `epoch<TAB>train_loss<TAB>val_loss<TAB>val_acc` lines here.
    #[arg(long)]
    pub history: Option<String>,
    /// Worker threads; training runs single-threaded so results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

impl TrainArgs {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        let pairs = [
            ("preset", &self.preset),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("learning_rate", &self.learning_rate),
            ("batch_size", &self.batch_size),
            ("l2", &self.l2),
            ("shuffle", &self.shuffle),
            ("window", &self.window),
            ("prefix_max_len", &self.prefix_max_len),
            ("suffix_max_len", &self.suffix_max_len),
            ("length_threshold", &self.length_threshold),
            ("use_bigrams", &self.use_bigrams),
            ("use_trigrams", &self.use_trigrams),
            ("optimizer", &self.optimizer),
            ("validation_fraction", &self.validation_fraction),
            ("embeddings", &self.embeddings),
            ("freeze_embeddings", &self.freeze_embeddings),
            ("char_embeddings", &self.char_embeddings),
            ("word_embeddings", &self.word_embeddings),
            ("word_dim", &self.word_dim),
            ("char_dim", &self.char_dim),
            ("char_hidden", &self.char_hidden),
            ("char_out", &self.char_out),
            ("hidden", &self.hidden),
            ("clip_norm", &self.clip_norm),
            ("history", &self.history),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set(key, v.as_str(), Source::Flag);
            }
        }
        s
    }
}

#[derive(Args, Debug)]
pub struct TagArgs {
    /// Model file written by `train`.
    pub model: PathBuf,
    /// Column-format input; a gold column, if present, is kept.
    pub input: PathBuf,
    /// Output file: `form<TAB>pred`, or `form<TAB>gold<TAB>pred` when the
    /// input has gold tags.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Expected feature settings as `key=value`; tagging stops if the model
    /// disagrees.
    #[arg(long = "expect", value_name = "KEY=VALUE")]
    pub expect: Vec<String>,
    /// Sentences are tagged in this many parallel chunks.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Gold column-format corpus.
    pub gold: PathBuf,
    /// Predictions: `form<TAB>pred` or `form<TAB>gold<TAB>pred`.
    pub pred: PathBuf,
    /// Also list the k most frequent confusions.
    #[arg(long, value_name = "K")]
    pub confusions: Option<usize>,
    /// Write the full confusion matrix as TSV to this file.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Print `key<TAB>value` lines instead of a table.
    #[arg(long)]
    pub machine_readable: bool,
}

#[derive(Args, Debug)]
pub struct InconsistenciesArgs {
    /// Gold-tagged column-format corpus.
    pub corpus: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Stats(a) => commands::stats(&a),
        Command::Split(a) => commands::split(&a),
        Command::Train(a) => commands::train(&a),
        Command::Tag(a) => commands::tag(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Inconsistencies(a) => commands::inconsistencies(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
