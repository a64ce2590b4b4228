//! Report rendering: results table, scatter plots, verdict and manifest.
//!
//! Rendering is deterministic: identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::corpus::PronounCondition;
use crate::metrics::{PrimeBiasPoint, VerbBiasTable};
use crate::regression::{IfeFit, IfeVerdict};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no PrimeBias points to report")]
    Empty,
    #[error("inputs come from different runs: {0}")]
    MixedInputs(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const TABLE1_HEADER: &str =
    "model,with_pronoun,pdpd_slope,pdpd_intercept,pdpd_r2,pdpd_rmse,dopd_slope,dopd_intercept,dopd_r2,dopd_rmse";

/// One results-table row: PD-target fits under PD and DO primes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub model: String,
    pub condition: PronounCondition,
    pub pdpd: IfeFit,
    pub dopd: IfeFit,
}

fn fixed3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn fit_cells(f: &IfeFit) -> String {
    let r2 = f.r2.map_or_else(|| "NA".to_string(), fixed3);
    format!("{},{},{},{}", fixed3(f.slope), fixed3(f.intercept), r2, fixed3(f.rmse))
}

/// CSV with the results-table column order, values to three decimals.
pub fn render_table1(rows: &[Table1Row]) -> String {
    let mut out = String::new();
    out.push_str(TABLE1_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.model,
            r.condition.with_pronoun_label(),
            fit_cells(&r.pdpd),
            fit_cells(&r.dopd)
        );
    }
    out
}

/// Everything reported for one backend under one pronoun condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub model: String,
    pub condition: PronounCondition,
    pub biases: VerbBiasTable,
    pub pdpd_points: Vec<PrimeBiasPoint>,
    pub dopd_points: Vec<PrimeBiasPoint>,
    pub pdpd: IfeFit,
    pub dopd: IfeFit,
    pub verdict: Option<IfeVerdict>,
}

impl ConditionReport {
    pub fn table_row(&self) -> Table1Row {
        Table1Row {
            model: self.model.clone(),
            condition: self.condition,
            pdpd: self.pdpd,
            dopd: self.dopd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub backend: String,
    pub seed: Option<u64>,
    pub corpus_sha256: Option<String>,
    pub scores_sha256: String,
    pub biases_sha256: Option<String>,
    pub threshold: f64,
    pub weighted: bool,
    pub config: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub table_csv: String,
    pub svg: String,
    pub verdict_json: String,
    pub manifest_json: String,
}

impl ReportBundle {
    pub const TABLE: &'static str = "table1.csv";
    pub const PLOT: &'static str = "ife_pd.svg";
    pub const VERDICT: &'static str = "verdict.json";
    pub const MANIFEST: &'static str = "manifest.json";

    pub fn write_to(&self, dir: &Path) -> Result<(), ReportError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| ReportError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, body) in [
            (Self::TABLE, &self.table_csv),
            (Self::PLOT, &self.svg),
            (Self::VERDICT, &self.verdict_json),
            (Self::MANIFEST, &self.manifest_json),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(io(&p))?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct VerdictEntry<'a> {
    model: &'a str,
    condition: PronounCondition,
    pdpd: &'a IfeFit,
    dopd: &'a IfeFit,
    verdict: Option<&'a IfeVerdict>,
}

/// Renders the full bundle for the reports of one backend.
pub fn render_report(reports: &[ConditionReport], manifest: &RunManifest) -> Result<ReportBundle, ReportError> {
    if reports.is_empty() || reports.iter().any(|r| r.pdpd_points.is_empty() || r.dopd_points.is_empty()) {
        return Err(ReportError::Empty);
    }
    for r in reports {
        if r.model != manifest.backend || r.biases.backend != manifest.backend {
            return Err(ReportError::MixedInputs(format!(
                "report `{}` with biases from `{}` under manifest backend `{}`",
                r.model, r.biases.backend, manifest.backend
            )));
        }
        if r.biases.condition != r.condition {
            return Err(ReportError::MixedInputs(format!(
                "{} report uses {} biases",
                r.condition, r.biases.condition
            )));
        }
    }
    let rows: Vec<Table1Row> = reports.iter().map(ConditionReport::table_row).collect();
    let verdicts: Vec<VerdictEntry> = reports
        .iter()
        .map(|r| VerdictEntry {
            model: &r.model,
            condition: r.condition,
            pdpd: &r.pdpd,
            dopd: &r.dopd,
            verdict: r.verdict.as_ref(),
        })
        .collect();
    Ok(ReportBundle {
        table_csv: render_table1(&rows),
        svg: render_svg(reports),
        verdict_json: serde_json::to_string_pretty(&verdicts).expect("verdict serializes") + "\n",
        manifest_json: serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n",
    })
}

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PDPD_COLOR: &str = "#1f77b4";
const DOPD_COLOR: &str = "#d62728";

/// One panel per condition; x = prime-verb PD bias on [0, 1], y = PrimeBias
/// toward PD on [min − 0.05, max + 0.05].
pub fn render_svg(reports: &[ConditionReport]) -> String {
    let width = PANEL_W * reports.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width:.0}" height="{PANEL_H:.0}" fill="white"/>"#);
    for (i, r) in reports.iter().enumerate() {
        render_panel(&mut s, r, PANEL_W * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

fn render_panel(s: &mut String, r: &ConditionReport, x0: f64) {
    let ys = r.pdpd_points.iter().chain(&r.dopd_points).map(|p| p.y);
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    let (y_lo, y_hi) = (lo - 0.05, hi + 0.05);
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| x0 + MARGIN_L + x * plot_w;
    let py = |y: f64| MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let _ = writeln!(s, r#"<g class="panel" data-condition="{}">"#, r.condition);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{} ({})</text>"#,
        x0 + PANEL_W / 2.0,
        xml_escape(&r.model),
        r.condition
    );
    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{MARGIN_T:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#,
        px(0.0)
    );
    for k in 0..=5 {
        let x = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x:.1}</text>"#,
            px(x),
            MARGIN_T + plot_h + 15.0
        );
        let y = y_lo + (y_hi - y_lo) * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{y:.3}</text>"#,
            px(0.0) - 5.0,
            py(y) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">prime verb PD bias</text>"#,
        px(0.5),
        PANEL_H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">PrimeBias(PD)</text>"#,
        x0 + 15.0,
        MARGIN_T + plot_h / 2.0,
        x0 + 15.0,
        MARGIN_T + plot_h / 2.0
    );

    for (name, points, fit, color) in [
        ("PDPD", &r.pdpd_points, &r.pdpd, PDPD_COLOR),
        ("DOPD", &r.dopd_points, &r.dopd, DOPD_COLOR),
    ] {
        let _ = writeln!(s, r#"<g class="series" data-series="{name}">"#);
        for p in points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"><title>{} {:.4}</title></circle>"#,
                px(p.x),
                py(p.y),
                xml_escape(&p.verb),
                p.y
            );
        }
        let _ = writeln!(
            s,
            r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5" data-slope="{:.6}" data-intercept="{:.6}"/>"#,
            px(0.0),
            py(fit.predict(0.0)),
            px(1.0),
            py(fit.predict(1.0)),
            fit.slope,
            fit.intercept
        );
        s.push_str("</g>\n");
    }
    for (k, (name, color)) in [("PDPD", PDPD_COLOR), ("DOPD", DOPD_COLOR)].iter().enumerate() {
        let ly = MARGIN_T + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            px(0.75),
            ly - 4.0,
            px(0.75) + 8.0,
            ly
        );
    }
    s.push_str("</g>\n");
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
