use std::collections::{BTreeMap, HashSet};
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use seqtag::corpus::{
    corpus_stats, format_inconsistencies, inconsistency_report, parse_column_corpus, parse_prediction_corpus,
    serialize_column_corpus, serialize_gold_and_pred, split_dataset, Column, Dataset,
};
use seqtag::eval::{confusion_matrix, evaluate, top_confusions};
use seqtag::linear::io::{read_linear_model, write_history_model, write_linear_model, LinearModel};
use seqtag::linear::perceptron::train_perceptron_with_history;
use seqtag::linear::{token_accuracy, train_crf_with_history, train_history_classifier};
use seqtag::neural::{load_embeddings, read_neural_model, train_neural, write_neural_model, format_history};
use seqtag::Tagger;

use crate::config::{ModelKind, RunConfig, Settings, SEED_ENV};
use crate::error::{runtime, CliError};
use crate::{EvalArgs, InconsistenciesArgs, SplitArgs, StatsArgs, TagArgs, TrainArgs};

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_corpus(path: &Path) -> Result<Dataset, CliError> {
    parse_column_corpus(&read_text(path)?, false).map_err(|e| CliError::in_file(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

/// First field of every line; a leading `V d` header line is skipped.
fn read_vocab(path: &Path) -> Result<HashSet<String>, CliError> {
    let text = read_text(path)?;
    let mut words = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let header = i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok());
        if !header {
            words.insert(fields[0].to_string());
        }
    }
    Ok(words)
}

pub fn stats(args: &StatsArgs) -> Result<(), CliError> {
    let dataset = read_corpus(&args.corpus)?;
    let vocab = args.vocab.as_deref().map(read_vocab).transpose()?;
    let report = corpus_stats(&dataset, vocab.as_ref());
    if args.machine_readable {
        print!("{}", report.to_key_values());
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

pub fn split(args: &SplitArgs) -> Result<(), CliError> {
    let seed = match args.seed {
        Some(s) => s,
        None => match env_seed() {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be a non-negative integer, got `{raw}`")))?,
            None => 0,
        },
    };
    let dataset = read_corpus(&args.corpus)?;
    let (train, test) = split_dataset(&dataset, args.test_fraction, seed).map_err(|e| match e {
        seqtag::CorpusError::Argument(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    })?;
    let serialize = |d: &Dataset| serialize_column_corpus(d, Column::Gold).map_err(|e| CliError::Data(e.to_string()));
    write_atomic(&args.train_out, &serialize(&train)?)?;
    write_atomic(&args.test_out, &serialize(&test)?)?;
    println!("train\t{}\t{}", train.len(), train.n_tokens());
    println!("test\t{}\t{}", test.len(), test.n_tokens());
    Ok(())
}

fn resolve_config(args: &TrainArgs) -> Result<RunConfig, CliError> {
    let model = ModelKind::parse(&args.model).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown model `{}`; valid models: {}",
            args.model,
            ModelKind::NAMES.join(", ")
        ))
    })?;
    let mut settings = match &args.config {
        Some(path) => Settings::from_file_text(&read_text(path)?, path.clone())?,
        None => Settings::default(),
    };
    settings.merge(args.settings());
    RunConfig::resolve(model, &settings, env_seed().as_deref())
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = resolve_config(args)?;
    if args.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let corpus = read_corpus(&args.corpus)?;
    if !corpus.is_fully_tagged() {
        return Err(CliError::Data(format!("{}: training corpus has untagged tokens", args.corpus.display())));
    }
    let embeddings = match &config.embeddings {
        Some(path) => {
            let expected = config.word_dim_explicit.then_some(config.arch.word_dim);
            let loaded = load_embeddings(&read_text(path)?, expected).map_err(|e| CliError::in_file(path, e))?;
            if loaded.duplicates > 0 {
                warn!("{}: skipped {} repeated words", path.display(), loaded.duplicates);
            }
            info!("loaded {} vectors of dimension {}", loaded.table.len(), loaded.table.dim());
            config.arch.word_dim = loaded.table.dim();
            Some(loaded.table)
        }
        None => None,
    };
    info!(
        "training {} ({}) on {} sentences, seed {}",
        config.model.name(),
        config.preset.name(),
        corpus.len(),
        config.seed
    );
    let start = Instant::now();
    let mut summary: Vec<(&str, String)> = vec![
        ("model", config.model.name().into()),
        ("preset", config.preset.name().into()),
        ("sentences", corpus.len().to_string()),
        ("tokens", corpus.n_tokens().to_string()),
    ];
    let text = match config.model {
        ModelKind::Crf => {
            let (model, losses) = train_crf_with_history(&corpus, &config.features, &config.linear).map_err(runtime)?;
            summary.push(("epochs", losses.len().to_string()));
            summary.push(("final_loss", format!("{:.6}", losses.last().copied().unwrap_or(f64::NAN))));
            summary.push(("train_accuracy", format!("{:.4}", token_accuracy(&model, &corpus).map_err(runtime)?)));
            write_linear_model(&model)
        }
        ModelKind::Perceptron => {
            let (model, mistakes) =
                train_perceptron_with_history(&corpus, &config.features, &config.linear).map_err(runtime)?;
            summary.push(("epochs", mistakes.len().to_string()));
            summary.push(("final_mistakes", mistakes.last().copied().unwrap_or(0).to_string()));
            summary.push(("train_accuracy", format!("{:.4}", token_accuracy(&model, &corpus).map_err(runtime)?)));
            write_linear_model(&model)
        }
        ModelKind::Svm => {
            let model = train_history_classifier(&corpus, &config.features, &config.linear).map_err(runtime)?;
            summary.push(("epochs", config.linear.epochs.to_string()));
            summary.push(("train_accuracy", format!("{:.4}", token_accuracy(&model, &corpus).map_err(runtime)?)));
            write_history_model(&model)
        }
        ModelKind::Rnn | ModelKind::Lstm | ModelKind::BiLstm => {
            let (tagger, history) =
                train_neural(&corpus, &config.neural, config.arch, embeddings.as_ref()).map_err(runtime)?;
            for r in &history {
                info!(
                    "epoch {}: train_loss {:.4} val_loss {:.4} val_acc {:.4}",
                    r.epoch, r.train_loss, r.val_loss, r.val_acc
                );
            }
            if let Some(path) = &config.history {
                write_atomic(path, &format_history(&history))?;
            }
            let last = history.last().expect("at least one epoch");
            summary.push(("epochs", history.len().to_string()));
            summary.push(("final_loss", format!("{:.6}", last.train_loss)));
            let best = history
                .iter()
                .filter(|r| r.val_loss.is_finite())
                .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss));
            if let Some(best) = best {
                summary.push(("best_epoch", best.epoch.to_string()));
                summary.push(("val_loss", format!("{:.6}", best.val_loss)));
                summary.push(("val_accuracy", format!("{:.4}", best.val_acc)));
            }
            summary.push(("parameters", tagger.params.n_params().to_string()));
            write_neural_model(&tagger)
        }
    };
    write_atomic(&args.output, &text)?;
    summary.push(("wall_time_s", format!("{:.2}", start.elapsed().as_secs_f64())));
    for (k, v) in summary {
        println!("{k}\t{v}");
    }
    Ok(())
}

enum LoadedModel {
    Linear(LinearModel),
    Neural(Box<seqtag::neural::NeuralTagger>),
}

impl LoadedModel {
    fn tagger(&self) -> &(dyn Tagger + Sync) {
        match self {
            LoadedModel::Linear(LinearModel::Chain(m)) => m,
            LoadedModel::Linear(LinearModel::History(m)) => m,
            LoadedModel::Neural(m) => m.as_ref(),
        }
    }
}

/// Settings recorded in a model file, from `config` and `arch` records.
fn recorded_settings(text: &str) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for line in text.lines().take_while(|l| !l.starts_with("tags\t")) {
        if let Some(rest) = line.strip_prefix("config\t") {
            if let Some((k, v)) = rest.split_once('=') {
                out.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if let Some(rest) = line.strip_prefix("arch\t") {
            if let Some((k, v)) = rest.split_once('\t') {
                out.insert(k.to_string(), v.to_string());
            }
        }
    }
    out
}

fn check_expectations(text: &str, expect: &[String]) -> Result<(), CliError> {
    let recorded = recorded_settings(text);
    for item in expect {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--expect takes KEY=VALUE, got `{item}`")))?;
        let (key, value) = (key.trim().replace('-', "_"), value.trim());
        let actual = recorded
            .get(&key)
            .ok_or_else(|| CliError::Usage(format!("the model records no setting `{key}`")))?;
        let same = actual == value
            || matches!(
                (actual.as_str(), value),
                ("true", "on" | "yes" | "1") | ("false", "off" | "no" | "0")
            );
        if !same {
            return Err(CliError::Data(format!(
                "model/feature-config mismatch in `{key}`: model has {actual}, expected {value}"
            )));
        }
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<(LoadedModel, String), CliError> {
    let text = read_text(path)?;
    let is_neural = text.lines().nth(1) == Some("model\tneural");
    let model = if is_neural {
        LoadedModel::Neural(Box::new(read_neural_model(&text).map_err(|e| CliError::in_file(path, e))?))
    } else {
        LoadedModel::Linear(read_linear_model(&text).map_err(|e| CliError::in_file(path, e))?)
    };
    Ok((model, text))
}

pub fn tag(args: &TagArgs) -> Result<(), CliError> {
    if args.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let (model, text) = load_model(&args.model)?;
    check_expectations(&text, &args.expect)?;
    let input = read_corpus(&args.input)?;
    let tagger = model.tagger();
    let chunk = input.len().div_ceil(args.threads).max(1);
    let tagged: Vec<Result<Vec<Vec<String>>, seqtag::Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = input
            .sentences
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| tagger.tag_sentence(s)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("tagging thread panicked")).collect()
    });
    let mut output = input.clone();
    let all_tags = tagged.into_iter().collect::<Result<Vec<_>, _>>().map_err(runtime)?;
    for (sentence, tags) in output.sentences.iter_mut().zip(all_tags.into_iter().flatten()) {
        for (token, tag) in sentence.tokens.iter_mut().zip(tags) {
            token.pred_tag = Some(tag);
        }
    }
    let has_gold = output.sentences.iter().flat_map(|s| &s.tokens).any(|t| t.gold_tag.is_some());
    let text = if has_gold {
        serialize_gold_and_pred(&output)
    } else {
        serialize_column_corpus(&output, Column::Pred)
    }
    .map_err(|e| CliError::in_file(&args.input, e))?;
    write_atomic(&args.output, &text)?;
    info!("tagged {} sentences, {} tokens", output.len(), output.n_tokens());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    if args.confusions == Some(0) {
        return Err(CliError::Usage("--confusions must be at least 1".into()));
    }
    let gold = read_corpus(&args.gold)?;
    let pred = parse_prediction_corpus(&read_text(&args.pred)?).map_err(|e| CliError::in_file(&args.pred, e))?;
    let report = evaluate(&gold, &pred).map_err(runtime)?;
    if args.machine_readable {
        print!("{}", report.to_key_values());
    } else {
        print!("{}", report.to_table());
    }
    if args.confusions.is_some() || args.matrix.is_some() {
        let matrix = confusion_matrix(&gold, &pred).map_err(runtime)?;
        if let Some(k) = args.confusions {
            if !args.machine_readable {
                println!("\ngold\tpred\tcount");
            }
            for (g, p, n) in top_confusions(&matrix, k) {
                if args.machine_readable {
                    println!("confusion\t{g}\t{p}\t{n}");
                } else {
                    println!("{g}\t{p}\t{n}");
                }
            }
        }
        if let Some(path) = &args.matrix {
            write_atomic(path, &matrix.to_tsv())?;
        }
    }
    Ok(())
}

pub fn inconsistencies(args: &InconsistenciesArgs) -> Result<(), CliError> {
    let dataset = read_corpus(&args.corpus)?;
    print!("{}", format_inconsistencies(&inconsistency_report(&dataset)));
    Ok(())
}
