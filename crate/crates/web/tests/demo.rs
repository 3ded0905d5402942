use serde_json::Value;
use seqtag_web::{explore, score, DemoTagger};

const CORPUS: &str = "ನಾನು\tPR_PRP\nಮನೆಗೆ\tN_NN\nಹೋದೆ\tV_VM_VF\n.\tRD_PUNC\n\nಅವನು\tPR_PRP\nಮನೆಗೆ\tN_NN\nಬಂದ\tV_VM_VF\n.\tRD_PUNC\n";

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn explorer_lists_features_per_token() {
    let out = parse(&explore("ನಾನು ಮನೆಗೆ", "window = 1").unwrap());
    let tokens = out["tokens"].as_array().unwrap();
    assert_eq!(tokens.len(), 2);
    let first: Vec<&str> = tokens[0]["features"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(first.contains(&"w=ನಾನು"));
    assert!(first.contains(&"[+1]w=ಮನೆಗೆ"));
}

#[test]
fn explorer_reports_bad_config() {
    assert!(explore("a", "window = 7").is_err());
    assert!(explore("a", "colour = red").is_err());
}

#[test]
fn trained_tagger_recovers_training_tags_with_normalized_marginals() {
    for kind in ["crf", "perceptron"] {
        let tagger = DemoTagger::train(CORPUS, kind, 1, 20, 0).unwrap();
        let out = parse(&tagger.tag("ನಾನು ಮನೆಗೆ ಹೋದೆ .").unwrap());
        let tags: Vec<&str> =
            out["sentences"][0].as_array().unwrap().iter().map(|t| t["tag"].as_str().unwrap()).collect();
        assert_eq!(tags, ["PR_PRP", "N_NN", "V_VM_VF", "RD_PUNC"], "{kind}");
        if kind == "crf" {
            for t in out["sentences"][0].as_array().unwrap() {
                let sum: f64 = t["marginals"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }
    assert!(DemoTagger::train(CORPUS, "hmm", 1, 5, 0).is_err());
}

#[test]
fn score_matches_hand_computed_case() {
    let out = parse(&score("a\tA\nb\tA\nc\tB\nd\tB\n", "a\tA\nb\tB\nc\tB\nd\tB\n", 3).unwrap());
    assert_eq!(out["accuracy"].as_f64().unwrap(), 0.75);
    assert!((out["macro_f"].as_f64().unwrap() - 0.7333).abs() < 1e-4);
    assert_eq!(out["confusions"][0]["gold"], "A");
    assert_eq!(out["confusions"][0]["pred"], "B");
    assert_eq!(out["matrix"], serde_json::json!([[1, 1], [0, 2]]));
}
