use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqtag::corpus::{parse_column_corpus, parse_prediction_corpus};
use seqtag::eval::{confusion_matrix, top_confusions};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn seqtag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqtag"))
        .args(args)
        .env_remove("SEQTAG_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY_NEURAL: [&str; 10] = [
    "--word-dim", "4", "--char-dim", "3", "--char-hidden", "3", "--char-out", "4", "--hidden", "4",
];

#[test]
fn stats_on_fixture() {
    let out = seqtag(&["stats", s(&fixture("small.txt")), "--machine-readable"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for line in [
        "n_sentences\t2",
        "n_tokens\t9",
        "vocab_size\t8",
        "oov_tokens\t0",
        "tag:JJ\t1",
        "tag:N_NN\t2",
        "tag:RD_PUNC\t2",
    ] {
        assert!(text.lines().any(|l| l == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn stats_with_vocab_matches_set_difference() {
    let out = seqtag(&[
        "stats",
        s(&fixture("small.txt")),
        "--vocab",
        s(&fixture("vecs.txt")),
        "--machine-readable",
    ]);
    assert!(out.status.success());
    let corpus = parse_column_corpus(&std::fs::read_to_string(fixture("small.txt")).unwrap(), false).unwrap();
    let vocab: HashSet<String> = std::fs::read_to_string(fixture("vecs.txt"))
        .unwrap()
        .lines()
        .map(|l| l.split(' ').next().unwrap().to_string())
        .collect();
    let forms: Vec<&str> = corpus.sentences.iter().flat_map(|s| s.forms()).collect();
    let oov_tokens = forms.iter().filter(|f| !vocab.contains(**f)).count();
    let oov_types = forms.iter().filter(|f| !vocab.contains(**f)).collect::<HashSet<_>>().len();
    let text = stdout(&out);
    assert!(text.contains(&format!("oov_tokens\t{oov_tokens}\n")), "{text}");
    assert!(text.contains(&format!("oov_types\t{oov_types}\n")), "{text}");
    assert_eq!((oov_tokens, oov_types), (7, 6));
}

#[test]
fn stats_on_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let out = seqtag(&["stats", s(&empty), "--machine-readable"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("n_sentences\t0\nn_tokens\t0\n"));
}

#[test]
fn malformed_corpus_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "a\tN\nb\tN\textra\n").unwrap();
    let out = seqtag(&["stats", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn split_is_reproducible_and_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = String::new();
    for i in 0..10 {
        corpus.push_str(&format!("w{i}\tN\n\n"));
    }
    let path = dir.path().join("c.txt");
    std::fs::write(&path, &corpus).unwrap();
    let run = |tag: &str| {
        let (tr, te) = (dir.path().join(format!("tr{tag}")), dir.path().join(format!("te{tag}")));
        let out = seqtag(&[
            "split", s(&path), "--test-fraction", "0.2", "--seed", "3", "--train-out", s(&tr), "--test-out", s(&te),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        (std::fs::read_to_string(tr).unwrap(), std::fs::read_to_string(te).unwrap())
    };
    let (train, test) = run("a");
    assert_eq!(run("b"), (train.clone(), test.clone()));
    let count = |t: &str| t.lines().filter(|l| !l.is_empty()).count();
    assert_eq!((count(&train), count(&test)), (8, 2));
    let mut all: Vec<&str> = train.lines().chain(test.lines()).filter(|l| !l.is_empty()).collect();
    all.sort();
    let mut expected: Vec<&str> = corpus.lines().filter(|l| !l.is_empty()).collect();
    expected.sort();
    assert_eq!(all, expected);
}

#[test]
fn crf_train_tag_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.crf");
    let out = seqtag(&["train", "crf", s(&fixture("small.txt")), "-o", s(&model), "--preset", "paper-crf"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("train_accuracy\t1.0000"));

    let tagged = dir.path().join("tagged.txt");
    let out = seqtag(&["tag", s(&model), s(&fixture("small.txt")), "-o", s(&tagged), "--threads", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&tagged).unwrap();
    assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 9);
    assert!(text.lines().filter(|l| !l.is_empty()).all(|l| l.split('\t').count() == 3));

    let out = seqtag(&["eval", s(&fixture("small.txt")), s(&tagged), "--machine-readable"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("macro_f\t1.0000\n"));
}

#[test]
fn tag_untagged_and_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m");
    assert!(seqtag(&["train", "perceptron", s(&fixture("small.txt")), "-o", s(&model)]).status.success());
    let raw = dir.path().join("raw.txt");
    std::fs::write(&raw, "ನಾನು\nಮನೆಗೆ\n\nಅವನು\n\n").unwrap();
    let out_path = dir.path().join("o.txt");
    assert!(seqtag(&["tag", s(&model), s(&raw), "-o", s(&out_path)]).status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 3);
    assert!(text.starts_with("ನಾನು\tPR_PRP\n"));

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    let out = seqtag(&["tag", s(&model), s(&empty), "-o", s(&out_path)]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), "");
}

#[test]
fn tag_rejects_mismatched_feature_config() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m");
    assert!(seqtag(&["train", "crf", s(&fixture("small.txt")), "-o", s(&model), "--window", "1"]).status.success());
    let o = dir.path().join("o");
    let out = seqtag(&["tag", s(&model), s(&fixture("small.txt")), "-o", s(&o), "--expect", "window=2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("window"));
    assert!(!o.exists());
    let out = seqtag(&["tag", s(&model), s(&fixture("small.txt")), "-o", s(&o), "--expect", "window=1"]);
    assert!(out.status.success());
}

#[test]
fn linear_models_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["crf", "perceptron", "svm"] {
        let a = dir.path().join(format!("{model}.a"));
        let b = dir.path().join(format!("{model}.b"));
        for p in [&a, &b] {
            let out = seqtag(&["train", model, s(&fixture("small.txt")), "-o", s(p), "--seed", "9"]);
            assert!(out.status.success(), "{}", stderr(&out));
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{model}");
    }
}

#[test]
fn neural_models_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let corpus = fixture("small.txt");
    for p in [&a, &b] {
        let mut args = vec!["train", "bilstm", s(&corpus), "-o", s(p), "--epochs", "3"];
        args.extend(TINY_NEURAL);
        args.extend(["--char-embeddings", "on"]);
        let out = Command::new(env!("CARGO_BIN_EXE_seqtag"))
            .args(&args)
            .env("SEQTAG_SEED", "17")
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(std::fs::read_to_string(&a).unwrap().contains("option\toov_seed\t17\n"));
}

#[test]
fn char_embeddings_select_rmsprop_preset() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m");
    let history = dir.path().join("h.tsv");
    let (corpus, vecs) = (fixture("small.txt"), fixture("vecs.txt"));
    let mut args = vec![
        "train",
        "bilstm",
        s(&corpus),
        "-o",
        s(&model),
        "--epochs",
        "2",
        "--char-embeddings",
        "on",
        "--embeddings",
        s(&vecs),
        "--history",
        s(&history),
    ];
    args.extend(&TINY_NEURAL[2..]);
    let out = seqtag(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("preset\tpaper-neural-charword\n"));
    let h = std::fs::read_to_string(&history).unwrap();
    assert_eq!(h.lines().count(), 3);
    assert!(h.starts_with("epoch\ttrain_loss\tval_loss\tval_acc\n"));
    let text = std::fs::read_to_string(&model).unwrap();
    assert!(text.contains("arch\tword_dim\t3\n"));

    let tagged = dir.path().join("t");
    assert!(seqtag(&["tag", s(&model), s(&fixture("small.txt")), "-o", s(&tagged)]).status.success());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("m");
    let out = seqtag(&["train", "hmm", s(&fixture("small.txt")), "-o", s(&o)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("crf, perceptron, svm, rnn, lstm, bilstm"));

    let out = seqtag(&[
        "train", "crf", s(&fixture("small.txt")), "-o", s(&o), "--char-embeddings", "on", "--window", "7",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("char_embeddings") && err.contains("window"), "{err}");
    assert!(!o.exists());

    assert_eq!(seqtag(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(seqtag(&["eval", "only-one-arg"]).status.code(), Some(1));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# crf settings\nepochs = 2\nwindow = 0   # no context\n").unwrap();
    let o = dir.path().join("m");
    let out = seqtag(&[
        "train", "crf", s(&fixture("small.txt")), "-o", s(&o), "--config", s(&cfg), "--epochs", "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("epochs\t3\n"));
    assert!(std::fs::read_to_string(&o).unwrap().contains("config\twindow = 0\n"));

    std::fs::write(&cfg, "epochs = 2\nbogus = 1\nnot a setting\n").unwrap();
    let out = seqtag(&["train", "crf", s(&fixture("small.txt")), "-o", s(&o), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("run.cfg:3"));
}

#[test]
fn eval_hand_case() {
    let out = seqtag(&["eval", s(&fixture("gold4.txt")), s(&fixture("pred4.txt")), "--machine-readable"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("macro_f\t0.7333\n"), "{text}");
    assert!(text.contains("accuracy\t0.7500\n"));

    let out = seqtag(&["eval", s(&fixture("gold4.txt")), s(&fixture("gold4.txt"))]);
    assert!(stdout(&out).contains("1.0000"));
}

#[test]
fn eval_confusions_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("g");
    let pred = dir.path().join("p");
    let pairs = [("A", "B"), ("A", "B"), ("B", "C"), ("C", "A"), ("C", "A"), ("A", "A"), ("B", "B")];
    let g: String = pairs.iter().enumerate().map(|(i, (g, _))| format!("w{i}\t{g}\n")).collect();
    let p: String = pairs.iter().enumerate().map(|(i, (_, p))| format!("w{i}\t{p}\n")).collect();
    std::fs::write(&gold, g + "\n").unwrap();
    std::fs::write(&pred, p + "\n").unwrap();
    let out = seqtag(&["eval", s(&gold), s(&pred), "--confusions", "5", "--machine-readable"]);
    assert!(out.status.success());
    let printed: Vec<String> = stdout(&out)
        .lines()
        .filter_map(|l| l.strip_prefix("confusion\t").map(str::to_string))
        .collect();
    let gd = parse_column_corpus(&std::fs::read_to_string(&gold).unwrap(), false).unwrap();
    let pd = parse_prediction_corpus(&std::fs::read_to_string(&pred).unwrap()).unwrap();
    let oracle: Vec<String> = top_confusions(&confusion_matrix(&gd, &pd).unwrap(), 5)
        .into_iter()
        .map(|(g, p, n)| format!("{g}\t{p}\t{n}"))
        .collect();
    assert_eq!(printed, oracle);
    assert_eq!(printed, ["A\tB\t2", "C\tA\t2", "B\tC\t1"]);
}

#[test]
fn eval_misaligned_names_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p");
    std::fs::write(&pred, "a\tA\nb\tA\n\n").unwrap();
    let out = seqtag(&["eval", s(&fixture("gold4.txt")), s(&pred)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sentence 0"), "{}", stderr(&out));
}

#[test]
fn inconsistency_report() {
    let out = seqtag(&["inconsistencies", s(&fixture("small.txt"))]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let mut corpus = String::new();
    for i in 0..3621 {
        corpus.push_str(&format!("x{}\tN_NN\n,\tRD_PUNC\n\n", i % 3));
    }
    for _ in 0..68 {
        corpus.push_str(",\tRD_SYM\n\n");
    }
    corpus.push_str("ಮನೆ\tN_NN\n\nಮನೆ\tJJ\n\nಮನೆ\tN_NN\n\n");
    std::fs::write(&path, corpus).unwrap();
    let out = seqtag(&["inconsistencies", s(&path)]);
    assert_eq!(stdout(&out), ",\tRD_PUNC:3621,RD_SYM:68\nಮನೆ\tN_NN:2,JJ:1\n");
}

#[test]
fn help_lists_defaults() {
    let out = seqtag(&["train", "--help"]);
    assert!(out.status.success());
    let help = stdout(&out);
    for needle in ["--preset", "paper-crf", "--window", "[default: 1", "--threads", "--batch-size", "rmsprop"] {
        assert!(help.contains(needle), "missing {needle}");
    }
}
