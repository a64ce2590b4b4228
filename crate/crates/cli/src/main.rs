use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use priming_ife::analysis::{self, AnalysisOptions};
use priming_ife::backend::{BackendDescriptor, BackendKind, HttpTransport, InProcess, Mode, Transport};
use priming_ife::corpus::{self, CorpusConfig, CorpusRecord, PronounCondition, PronounScope};
use priming_ife::gateway::Gateway;
use priming_ife::lexicon::{load_lexicon, Lexicon};
use priming_ife::metrics;
use priming_ife::miner::{self, Detector, LabelMap};
use priming_ife::oracle::{OracleConfig, OracleKind, OracleLm};
use priming_ife::regression::DEFAULT_R2_THRESHOLD;
use priming_ife::report::{self, RunManifest};
use priming_ife::runner::{self, RunOptions, ScoreRecord};
use priming_ife::server;

#[derive(Parser)]
#[command(name = "priming-ife", version, about = "Structural priming and inverse frequency effect harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    /// Pronominalize prime and target recipients.
    Both,
    /// Pronominalize prime recipients only.
    Primes,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a prime/target corpus as JSONL.
    GenCorpus {
        #[arg(long, default_value = "data/lexicon.toml")]
        lexicon: PathBuf,
        #[arg(long, default_value_t = 50)]
        targets_per_prime: usize,
        #[arg(long, default_value_t = 21)]
        primes_per_verb: usize,
        #[arg(long, value_enum)]
        pronouns: OnOff,
        #[arg(long, value_enum, default_value = "both")]
        pronoun_scope: Scope,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Score a corpus with a backend; resumes an existing output file.
    Score {
        /// oracle:NAME, http:URL or worker:URL
        #[arg(long)]
        backend: BackendKind,
        #[arg(long, default_value = "concat")]
        mode: Mode,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        concurrency: usize,
        /// Lexicon used by oracle backends.
        #[arg(long, default_value = "data/lexicon.toml")]
        lexicon: PathBuf,
        /// JSON config block sent with every request (oracle parameters for oracle backends).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-request timeout for http and worker backends, in seconds.
        #[arg(long, default_value_t = 120)]
        timeout: u64,
    },
    /// Per-verb PD bias from baseline scores.
    VerbBias {
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit IFE lines and write the report bundle.
    Ife {
        #[arg(long, required = true, num_args = 1..)]
        scores: Vec<PathBuf>,
        /// Bias table; computed from the scores' baselines when omitted.
        #[arg(long)]
        biases: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_R2_THRESHOLD)]
        threshold: f64,
        /// Weight points by item count.
        #[arg(long)]
        weighted: bool,
        /// Corpus files, hashed into the manifest.
        #[arg(long, num_args = 1..)]
        corpus: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Count pronoun indirect objects in a CoNLL-U file.
    MinePronouns {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "data/lexicon.toml")]
        lexicon: PathBuf,
        /// TOML relation-name mapping for non-UD label sets.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Per-verb DO/PD counts in a CoNLL-U file.
    MineVerbBias {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "data/lexicon.toml")]
        lexicon: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Serve an oracle over the HTTP wire protocol.
    ServeOracle {
        /// static, transient or errordriven
        #[arg(long)]
        name: OracleKind,
        #[arg(long, default_value = "data/lexicon.toml")]
        lexicon: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8077)]
        port: u16,
    },
}

fn read_json(path: &Option<PathBuf>) -> Result<serde_json::Value> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(serde_json::json!({})),
    }
}

fn lexicon(path: &Path) -> Result<Lexicon> {
    load_lexicon(path).with_context(|| format!("loading lexicon {}", path.display()))
}

fn oracle(name: OracleKind, lexicon_path: &Path, config: &serde_json::Value) -> Result<OracleLm> {
    let lex = lexicon(lexicon_path)?;
    let cfg = OracleConfig::from_json(config)?;
    Ok(OracleLm::from_config(name, &cfg, &lex)?)
}

fn detector(lexicon_path: &Path, labels: &Option<PathBuf>) -> Result<Detector> {
    let labels = match labels {
        Some(p) => toml::from_str::<LabelMap>(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing label map {}", p.display()))?,
        None => LabelMap::default(),
    };
    Ok(Detector::from_lexicon(&lexicon(lexicon_path)?, labels))
}

fn read_all_scores(paths: &[PathBuf]) -> Result<(Vec<ScoreRecord>, Vec<u8>)> {
    let mut records = Vec::new();
    let mut bytes = Vec::new();
    for p in paths {
        bytes.extend(std::fs::read(p).with_context(|| format!("reading {}", p.display()))?);
        records.extend(runner::read_scores(p)?);
    }
    Ok((records, bytes))
}

fn report_issues(issues: &miner::MiningIssues) {
    for e in &issues.decode {
        eprintln!("warning: {e}");
    }
    for e in &issues.malformed {
        eprintln!("warning: {e}");
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenCorpus {
            lexicon: lex_path,
            targets_per_prime,
            primes_per_verb,
            pronouns,
            pronoun_scope,
            seed,
            out,
        } => {
            let lex = lexicon(&lex_path)?;
            let condition = match pronouns {
                OnOff::On => PronounCondition::WithPronoun,
                OnOff::Off => PronounCondition::NoPronoun,
            };
            let mut config = CorpusConfig::new(primes_per_verb, targets_per_prime, condition, seed);
            config.pronoun_scope = match pronoun_scope {
                Scope::Both => PronounScope::PrimesAndTargets,
                Scope::Primes => PronounScope::PrimesOnly,
            };
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let n = corpus::write_jsonl(&lex, &config, BufWriter::new(file))?;
            eprintln!("wrote {n} pairs ({} scoring items) to {}", 4 * n, out.display());
        }
        Command::Score {
            backend,
            mode,
            input,
            out,
            concurrency,
            lexicon: lex_path,
            config,
            timeout,
        } => {
            let config = read_json(&config)?;
            let transport: Arc<dyn Transport> = match &backend {
                BackendKind::Oracle { name } => {
                    let kind: OracleKind = name.parse().map_err(anyhow::Error::msg)?;
                    Arc::new(InProcess::new(Arc::new(oracle(kind, &lex_path, &config)?)))
                }
                BackendKind::Http { endpoint } | BackendKind::Worker { endpoint } => {
                    Arc::new(HttpTransport::new(endpoint.clone(), Duration::from_secs(timeout)))
                }
            };
            let label = backend.to_string();
            let descriptor = BackendDescriptor::new(backend, mode, label).map_err(anyhow::Error::msg)?;
            let gateway = Gateway::new(descriptor, transport, config);
            let options = RunOptions {
                mode,
                concurrency,
                ..RunOptions::default()
            };
            let summary = runner::run_scoring(&gateway, &input, &out, &options)?;
            eprintln!(
                "wrote {} records, skipped {} already scored",
                summary.written, summary.skipped
            );
            if !summary.is_clean() {
                eprintln!(
                    "{} items failed; see {}",
                    summary.ledger.len(),
                    runner::ledger_path(&out).display()
                );
                return Ok(ExitCode::from(3));
            }
        }
        Command::VerbBias { input, out } => {
            let (records, _) = read_all_scores(&input)?;
            let tables = metrics::split_runs(&records)
                .into_values()
                .map(|run| metrics::verb_bias(&run))
                .collect::<Result<Vec<_>, _>>()?;
            std::fs::write(&out, analysis::write_bias_csv(&tables))?;
        }
        Command::Ife {
            scores,
            biases,
            threshold,
            weighted,
            corpus,
            out,
        } => {
            let (records, score_bytes) = read_all_scores(&scores)?;
            let (tables, biases_sha256) = match &biases {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    (Some(analysis::read_bias_csv(&text)?), Some(report::sha256_hex(text.as_bytes())))
                }
                None => (None, None),
            };
            let options = AnalysisOptions { threshold, weighted };
            let reports = analysis::analyze_all(&records, tables.as_deref(), options)?;
            let backends: std::collections::BTreeSet<&str> = reports.iter().map(|r| r.model.as_str()).collect();
            if backends.len() != 1 {
                bail!("scores mix backends {backends:?}; report one backend at a time");
            }
            let backend = reports[0].model.clone();

            let mut corpus_bytes = Vec::new();
            let mut seed = None;
            for p in &corpus {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                if seed.is_none() {
                    if let Some(first) = text.lines().find(|l| !l.trim().is_empty()) {
                        seed = serde_json::from_str::<CorpusRecord>(first).ok().map(|r| r.seed);
                    }
                }
                corpus_bytes.extend(text.into_bytes());
            }
            let manifest = RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                backend,
                seed,
                corpus_sha256: (!corpus.is_empty()).then(|| report::sha256_hex(&corpus_bytes)),
                scores_sha256: report::sha256_hex(&score_bytes),
                biases_sha256,
                threshold,
                weighted,
                config: serde_json::json!({
                    "scores": scores,
                    "biases": biases,
                    "corpus": corpus,
                }),
            };
            let bundle = report::render_report(&reports, &manifest)?;
            bundle.write_to(&out)?;
            let points: Vec<_> = reports
                .iter()
                .flat_map(|r| r.pdpd_points.iter().chain(&r.dopd_points).cloned())
                .collect();
            std::fs::write(out.join("points.csv"), analysis::write_points_csv(&points))?;
            for r in &reports {
                let v = r.verdict.map_or_else(
                    || "degenerate fit".to_string(),
                    |v| format!("both_negative={} robust={} standard_priming={}", v.both_negative, v.robust, v.standard_priming),
                );
                eprintln!(
                    "{} {}: PDPD slope {:.3}, DOPD slope {:.3}; {v}",
                    r.model, r.condition, r.pdpd.slope, r.dopd.slope
                );
            }
        }
        Command::MinePronouns {
            input,
            lexicon,
            labels,
            out,
        } => {
            let det = detector(&lexicon, &labels)?;
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let counts = miner::count_io_pronouns(BufReader::new(file), &det);
            report_issues(&counts.issues);
            std::fs::write(&out, miner::pronouns_csv(&counts))?;
            eprintln!(
                "{} DO sentences: {} pronoun and {} other indirect objects",
                counts.do_detections, counts.pronouns.total, counts.other
            );
        }
        Command::MineVerbBias {
            input,
            lexicon,
            labels,
            out,
        } => {
            let det = detector(&lexicon, &labels)?;
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let counts = miner::verb_structure_ratio(BufReader::new(file), &det);
            report_issues(&counts.issues);
            std::fs::write(&out, miner::verb_ratio_csv(&counts))?;
        }
        Command::ServeOracle {
            name,
            lexicon,
            config,
            host,
            port,
        } => {
            let lm = oracle(name, &lexicon, &read_json(&config)?)?;
            let listener = std::net::TcpListener::bind((host.as_str(), port))?;
            eprintln!("serving oracle:{name} on http://{}", listener.local_addr()?);
            let stop = std::sync::atomic::AtomicBool::new(false);
            server::serve(listener, Arc::new(lm), &stop);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
