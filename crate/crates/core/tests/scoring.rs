mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};

use approx::assert_abs_diff_eq;
use priming_ife::backend::Mode;
use priming_ife::corpus::{write_jsonl, CorpusConfig, PronounCondition};
use priming_ife::oracle::{sigmoid, OracleKind};
use priming_ife::runner::{ledger_path, read_scores, run_scoring, Role, RunOptions, ScoreRecord};
use priming_ife::sentence::Structure;
use serde_json::json;

fn p_pd_config(extra: serde_json::Value) -> serde_json::Value {
    let mut c = json!({"p_pd": {"give": 0.7, "send": 0.8, "buy": 0.3}});
    for (k, v) in extra.as_object().unwrap() {
        c[k] = v.clone();
    }
    c
}

#[test]
fn static_total_is_log_p_plus_content() {
    let lex = common::tiny_lexicon();
    let gw = common::oracle_gateway(OracleKind::Static, &lex, p_pd_config(json!({"word_cost": -1.0})), Mode::Baseline);
    let s = gw.score_sentence("The girl gave the book to the boy").unwrap();
    // Seven words once the preposition is dropped.
    assert_abs_diff_eq!(s.total, 0.7f64.ln() - 7.0, epsilon = 1e-12);
    let prod: f64 = s.tokens.iter().map(|t| t.lp.exp()).product();
    assert!((s.total.exp() - prod).abs() <= 1e-9 * prod);
    assert!(s.conditioning.is_none());
}

#[test]
fn transient_same_structure_prime_raises_target() {
    let lex = common::tiny_lexicon();
    let gw = common::oracle_gateway(OracleKind::Transient, &lex, p_pd_config(json!({})), Mode::Concat);
    let target = "The chef bought the cake for the nurse";
    let base = gw.score_sentence(target).unwrap().total;
    let primed = gw
        .score_conditional("A girl gave a book to a boy", target)
        .unwrap();
    assert!(primed.total > base);
    assert_eq!(primed.conditioning.as_deref(), Some("A girl gave a book to a boy"));
    // The scored region includes the separator space.
    assert_eq!(primed.text, format!(" {target}."));
}

#[test]
fn zero_learning_rate_leaves_target_unchanged() {
    let lex = common::tiny_lexicon();
    let target = "The chef bought the cake for the nurse";
    let concat = common::oracle_gateway(OracleKind::ErrorDriven, &lex, p_pd_config(json!({"eta": 0.0})), Mode::Concat);
    let base = concat.score_sentence(target).unwrap().total;
    assert_eq!(concat.score_conditional(target, target).unwrap().total, base);
    let ft = common::oracle_gateway(OracleKind::ErrorDriven, &lex, p_pd_config(json!({"eta": 0.0})), Mode::Finetune);
    assert_eq!(ft.score_finetuned("A girl gave a boy a book", target).unwrap().total, base);
}

#[test]
fn finetuned_closed_forms() {
    let lex = common::tiny_lexicon();
    let config = p_pd_config(json!({"eta": 1.0, "target_theta": 0.0, "word_cost": 0.0}));
    let gw = common::oracle_gateway(OracleKind::ErrorDriven, &lex, config, Mode::Finetune);
    // send has p_PD = 0.8.
    let t_pd = "The chef bought the cake for the nurse";
    let after_pd = gw.score_finetuned("A girl sent a book to a boy", t_pd).unwrap();
    assert_abs_diff_eq!(after_pd.total.exp(), sigmoid(0.2), epsilon = 1e-12);
    assert_abs_diff_eq!(after_pd.total.exp(), 0.549833997312478, epsilon = 1e-12);
    let after_do = gw.score_finetuned("A girl sent a boy a book", t_pd).unwrap();
    assert_abs_diff_eq!(after_do.total.exp(), 0.3100255188723872, epsilon = 1e-12);
    assert_eq!(after_do.conditioning.as_deref(), Some("A girl sent a boy a book"));
}

#[test]
fn same_structure_priming_holds_for_every_pair() {
    let lex = common::lexicon();
    let corpus = common::corpus_records(&lex, &CorpusConfig::new(1, 10, PronounCondition::WithPronoun, 3));
    for kind in [OracleKind::Transient, OracleKind::ErrorDriven] {
        let gw = common::oracle_gateway(kind, &lex, json!({}), Mode::Concat);
        let records = common::score_all(&gw, &corpus, Mode::Concat);
        let mut primed: HashMap<(&str, Structure, Structure), f64> = HashMap::new();
        for r in records.iter().filter(|r| r.role == Role::Primed) {
            primed.insert((&r.pair_id, r.prime_structure.unwrap(), r.target_structure), r.total_lp);
        }
        for c in &corpus {
            for t in Structure::BOTH {
                let same = primed[&(c.pair_id.as_str(), t, t)];
                let other = primed[&(c.pair_id.as_str(), t.opposite(), t)];
                assert!(same > other, "{kind}: {} target {t}", c.pair_id);
            }
        }
    }
}

fn write_corpus(dir: &std::path::Path, config: &CorpusConfig) -> std::path::PathBuf {
    let path = dir.join("corpus.jsonl");
    let n = write_jsonl(&common::tiny_lexicon(), config, BufWriter::new(File::create(&path).unwrap())).unwrap();
    assert_eq!(n, config.pair_count(3));
    path
}

fn by_key(records: &[ScoreRecord]) -> BTreeMap<String, f64> {
    records.iter().map(|r| (r.key(), r.total_lp)).collect()
}

#[test]
fn run_emits_six_records_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let config = CorpusConfig::new(2, 2, PronounCondition::NoPronoun, 1);
    let corpus = write_corpus(dir.path(), &config);
    let out = dir.path().join("scores.jsonl");
    let gw = common::oracle_gateway(OracleKind::ErrorDriven, &common::tiny_lexicon(), json!({}), Mode::Concat);
    let opts = RunOptions {
        concurrency: 3,
        chunk_size: 5,
        ..RunOptions::default()
    };
    let summary = run_scoring(&gw, &corpus, &out, &opts).unwrap();
    assert!(summary.is_clean());
    assert_eq!(summary.written, 6 * 12);
    let records = read_scores(&out).unwrap();
    assert_eq!(records.len(), 72);
    assert_eq!(by_key(&records).len(), 72);
    assert_eq!(records.iter().filter(|r| r.role == Role::Baseline).count(), 24);
    assert!(!ledger_path(&out).exists());
}

#[test]
fn baseline_mode_emits_two_records_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), &CorpusConfig::new(1, 2, PronounCondition::NoPronoun, 1));
    let out = dir.path().join("scores.jsonl");
    let gw = common::oracle_gateway(OracleKind::Static, &common::tiny_lexicon(), json!({}), Mode::Baseline);
    let opts = RunOptions {
        mode: Mode::Baseline,
        ..RunOptions::default()
    };
    let summary = run_scoring(&gw, &corpus, &out, &opts).unwrap();
    assert_eq!(summary.written, 12);
    assert!(read_scores(&out).unwrap().iter().all(|r| r.role == Role::Baseline && r.mode == Mode::Baseline));
}

#[test]
fn malformed_item_goes_to_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), &CorpusConfig::new(2, 2, PronounCondition::NoPronoun, 1));
    let text = std::fs::read_to_string(&corpus).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[4] = "{\"pair_id\": \"broken\"";
    std::fs::write(&corpus, lines.join("\n") + "\n").unwrap();

    let out = dir.path().join("scores.jsonl");
    let gw = common::oracle_gateway(OracleKind::ErrorDriven, &common::tiny_lexicon(), json!({}), Mode::Concat);
    let summary = run_scoring(&gw, &corpus, &out, &RunOptions::default()).unwrap();
    assert_eq!(summary.written, 6 * 11);
    assert_eq!(summary.ledger.len(), 1);
    assert_eq!(summary.ledger[0].item, "line 5");
    let ledger = std::fs::read_to_string(ledger_path(&out)).unwrap();
    assert_eq!(ledger.lines().count(), 1);
}

#[test]
fn resume_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), &CorpusConfig::new(2, 2, PronounCondition::WithPronoun, 9));
    let gw = common::oracle_gateway(OracleKind::Transient, &common::tiny_lexicon(), json!({}), Mode::Concat);

    let full = dir.path().join("full.jsonl");
    run_scoring(&gw, &corpus, &full, &RunOptions::default()).unwrap();
    let reference = by_key(&read_scores(&full).unwrap());

    // Half the records plus a torn final line, as after a crash.
    let text = std::fs::read_to_string(&full).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let half = dir.path().join("half.jsonl");
    let mut f = File::create(&half).unwrap();
    for l in &lines[..36] {
        writeln!(f, "{l}").unwrap();
    }
    write!(f, "{}", &lines[36][..20]).unwrap();
    drop(f);

    let summary = run_scoring(&gw, &corpus, &half, &RunOptions::default()).unwrap();
    assert_eq!(summary.skipped, 36);
    assert_eq!(summary.written, 36);
    let resumed = read_scores(&half).unwrap();
    assert_eq!(resumed.len(), 72);
    assert_eq!(by_key(&resumed), reference);

    let again = run_scoring(&gw, &corpus, &half, &RunOptions::default()).unwrap();
    assert_eq!((again.written, again.skipped), (0, 72));
    assert_eq!(read_scores(&half).unwrap().len(), 72);
}

#[test]
fn finetune_mode_matches_concat_for_errordriven_oracle() {
    let lex = common::lexicon();
    let corpus = common::corpus_records(&lex, &CorpusConfig::new(1, 3, PronounCondition::NoPronoun, 4));
    let concat = common::oracle_gateway(OracleKind::ErrorDriven, &lex, json!({}), Mode::Concat);
    let ft = common::oracle_gateway(OracleKind::ErrorDriven, &lex, json!({}), Mode::Finetune);
    let a = common::score_all(&concat, &corpus, Mode::Concat);
    let b = common::score_all(&ft, &corpus, Mode::Finetune);
    let (a, b) = (by_key(&a), by_key(&b));
    assert_eq!(a.len(), b.len());
    for (k, v) in &a {
        assert_abs_diff_eq!(*v, b[k], epsilon = 1e-12);
    }
}
