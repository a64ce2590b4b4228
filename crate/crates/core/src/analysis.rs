//! From score records to fitted IFE lines: bias tables, points, fits, verdicts.

use std::fmt::Write as _;

use crate::corpus::PronounCondition;
use crate::metrics::{self, MetricsError, PrimeBiasPoint, VerbBias, VerbBiasTable};
use crate::regression::{self, IfeFit, RegressionError};
use crate::report::ConditionReport;
use crate::runner::ScoreRecord;
use crate::sentence::Structure;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("bias table line {line}: {msg}")]
    BiasCsv { line: usize, msg: String },
}

pub const BIAS_HEADER: &str = "verb,pd_bias,n,backend,condition";
pub const POINTS_HEADER: &str = "verb,x,y,prime_structure,target_structure,n";

pub fn write_bias_csv(tables: &[VerbBiasTable]) -> String {
    let mut s = String::from(BIAS_HEADER);
    s.push('\n');
    for t in tables {
        for (verb, b) in &t.entries {
            let _ = writeln!(s, "{verb},{:?},{},{},{}", b.pd_bias, b.n, t.backend, t.condition);
        }
    }
    s
}

/// Parses a bias CSV into one table per (backend, condition).
pub fn read_bias_csv(text: &str) -> Result<Vec<VerbBiasTable>, AnalysisError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == BIAS_HEADER => {}
        _ => {
            return Err(AnalysisError::BiasCsv {
                line: 1,
                msg: format!("expected header `{BIAS_HEADER}`"),
            })
        }
    }
    let mut tables: Vec<VerbBiasTable> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| AnalysisError::BiasCsv { line: i + 1, msg };
        let cols: Vec<&str> = line.split(',').collect();
        let [verb, pd, n, backend, condition] = cols[..] else {
            return Err(err(format!("expected 5 columns, got {}", cols.len())));
        };
        let pd_bias: f64 = pd.parse().map_err(|e| err(format!("pd_bias: {e}")))?;
        let n: usize = n.parse().map_err(|e| err(format!("n: {e}")))?;
        let condition: PronounCondition = condition.parse().map_err(|e| err(format!("condition: {e}")))?;
        if !(0.0..=1.0).contains(&pd_bias) {
            return Err(err(format!("pd_bias {pd_bias} outside [0, 1]")));
        }
        let idx = match tables.iter().position(|t| t.backend == backend && t.condition == condition) {
            Some(idx) => idx,
            None => {
                tables.push(VerbBiasTable {
                    entries: Default::default(),
                    backend: backend.to_string(),
                    condition,
                });
                tables.len() - 1
            }
        };
        tables[idx].entries.insert(verb.to_string(), VerbBias { pd_bias, n });
    }
    Ok(tables)
}

pub fn write_points_csv(points: &[PrimeBiasPoint]) -> String {
    let mut s = String::from(POINTS_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{:?},{:?},{},{},{}",
            p.verb, p.x, p.y, p.prime_structure, p.target_structure, p.n
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub threshold: f64,
    /// Weight each point by its item count instead of equally.
    pub weighted: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            threshold: regression::DEFAULT_R2_THRESHOLD,
            weighted: false,
        }
    }
}

fn fit(points: &[PrimeBiasPoint], weighted: bool) -> Result<IfeFit, RegressionError> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    if weighted {
        let w: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
        regression::weighted_ols_fit(&xy, &w)
    } else {
        regression::ols_fit(&xy)
    }
}

/// Fits PDPD and DOPD lines for one run. Degenerate fits are reported with
/// no verdict rather than failing.
pub fn analyze_run(
    records: &[ScoreRecord],
    biases: &VerbBiasTable,
    options: AnalysisOptions,
) -> Result<ConditionReport, AnalysisError> {
    let (backend, condition) = metrics::run_identity(records)?;
    if backend != biases.backend {
        return Err(MetricsError::BackendMismatch {
            table: biases.backend.clone(),
            scores: backend,
        }
        .into());
    }
    if condition != biases.condition {
        return Err(MetricsError::MixedRuns(format!("{condition} scores with {} biases", biases.condition)).into());
    }
    let pdpd_points = metrics::prime_bias_points(records, biases, Structure::Prepositional)?;
    let dopd_points = metrics::prime_bias_points(records, biases, Structure::DoubleObject)?;
    let pdpd = fit(&pdpd_points, options.weighted)?;
    let dopd = fit(&dopd_points, options.weighted)?;
    let verdict = regression::verdict(&pdpd, &dopd, options.threshold).ok();
    Ok(ConditionReport {
        model: backend,
        condition,
        biases: biases.clone(),
        pdpd_points,
        dopd_points,
        pdpd,
        dopd,
        verdict,
    })
}

/// Splits mixed records into runs and analyzes each with its bias table
/// (from `biases` when given, otherwise computed from the run's baselines).
pub fn analyze_all(
    records: &[ScoreRecord],
    biases: Option<&[VerbBiasTable]>,
    options: AnalysisOptions,
) -> Result<Vec<ConditionReport>, AnalysisError> {
    let mut out = Vec::new();
    for ((backend, condition), run) in metrics::split_runs(records) {
        let table = match biases {
            Some(tables) => tables
                .iter()
                .find(|t| t.backend == backend && t.condition == condition)
                .cloned()
                .ok_or_else(|| MetricsError::BackendMismatch {
                    table: tables.first().map_or_else(String::new, |t| format!("{}/{}", t.backend, t.condition)),
                    scores: format!("{backend}/{condition}"),
                })?,
            None => metrics::verb_bias(&run)?,
        };
        out.push(analyze_run(&run, &table, options)?);
    }
    Ok(out)
}
