//! Machine-readable (JSON) and human-readable renderings of an
//! [`EstimateReport`].

use std::fmt::Write as _;

use clicktree_core::estimator::{Classification, Estimate, EstimateReport, UncertaintyMethod, Weighting};
use clicktree_core::ingest::IngestDiagnostics;
use clicktree_core::Error as ModelError;
use serde::Serialize;

use crate::manifest::RunManifest;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ValueJson {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(untagged)]
pub enum OutcomeJson {
    Value(ValueJson),
    Undefined { error: String },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CombinationJson {
    pub channels: Vec<usize>,
    pub theta: OutcomeJson,
    pub g: OutcomeJson,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OrderJson {
    pub order: usize,
    pub informative: bool,
    pub theta_mean: Option<ValueJson>,
    pub g_mean: Option<ValueJson>,
    pub theta_verdict: &'static str,
    pub g_verdict: &'static str,
    pub combinations: Vec<CombinationJson>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum UncertaintyJson {
    Propagation,
    Bootstrap { replicates: usize, seed: u64 },
    Precomputed,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DiagnosticsJson {
    pub events: u64,
    pub out_of_window: u64,
    pub repeated_in_window: u64,
    pub beyond_acquisition: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub classification: &'static str,
    pub single_emitter_candidate: bool,
    pub k_sigma: f64,
    pub uncertainty: UncertaintyJson,
    pub weighting: &'static str,
    pub n_trials: Option<u64>,
    pub orders: Vec<OrderJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ingest_diagnostics: Option<DiagnosticsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

pub fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Classical => "classical",
        Classification::Nonclassical => "nonclassical",
        Classification::Inconclusive => "inconclusive",
    }
}

pub fn weighting_name(w: Weighting) -> &'static str {
    match w {
        Weighting::Unweighted => "unweighted",
        Weighting::InverseVariance => "inverse-variance",
    }
}

fn value(e: &Estimate) -> ValueJson {
    ValueJson { value: e.value, std_error: e.std_error }
}

fn outcome(r: &Result<Estimate, ModelError>) -> OutcomeJson {
    match r {
        Ok(e) => OutcomeJson::Value(value(e)),
        Err(e) => OutcomeJson::Undefined { error: e.to_string() },
    }
}

impl ReportJson {
    pub fn new(report: &EstimateReport, diagnostics: Option<IngestDiagnostics>, manifest: Option<RunManifest>) -> Self {
        let orders = report
            .orders
            .iter()
            .map(|o| OrderJson {
                order: o.order,
                informative: o.informative,
                theta_mean: o.theta_mean.as_ref().map(value),
                g_mean: o.g_mean.as_ref().map(value),
                theta_verdict: classification_name(o.theta_verdict),
                g_verdict: classification_name(o.g_verdict),
                combinations: o
                    .combinations
                    .iter()
                    .map(|c| CombinationJson {
                        channels: c.channels.channels().collect(),
                        theta: outcome(&c.theta),
                        g: outcome(&c.g),
                    })
                    .collect(),
            })
            .collect();
        ReportJson {
            classification: classification_name(report.classification),
            single_emitter_candidate: report.single_emitter_candidate,
            k_sigma: report.k_sigma,
            uncertainty: match report.method {
                Some(UncertaintyMethod::Propagation) => UncertaintyJson::Propagation,
                Some(UncertaintyMethod::Bootstrap { replicates, seed }) => {
                    UncertaintyJson::Bootstrap { replicates, seed }
                }
                None => UncertaintyJson::Precomputed,
            },
            weighting: weighting_name(report.weighting),
            n_trials: report.n_trials,
            orders,
            ingest_diagnostics: diagnostics.map(|d| DiagnosticsJson {
                events: d.events,
                out_of_window: d.out_of_window,
                repeated_in_window: d.repeated_in_window,
                beyond_acquisition: d.beyond_acquisition,
            }),
            manifest,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// One-line verdict, e.g. `nonclassical, single-emitter candidate`.
pub fn verdict_line(report: &EstimateReport) -> String {
    let mut line = classification_name(report.classification).to_string();
    if report.single_emitter_candidate {
        line.push_str(", single-emitter candidate");
    }
    line
}

fn cell(r: &Result<Estimate, ModelError>) -> String {
    match r {
        Ok(e) => format!("{:.6} ± {:.6}", e.value, e.std_error),
        Err(ModelError::UndefinedEstimator { reason }) => format!("undefined ({reason})"),
        Err(e) => format!("error ({e})"),
    }
}

fn mean_cell(e: Option<Estimate>) -> String {
    e.map_or_else(|| "undefined".to_string(), |e| format!("{:.6} ± {:.6}", e.value, e.std_error))
}

pub fn render_text(report: &EstimateReport, diagnostics: Option<&IngestDiagnostics>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "classification: {}", verdict_line(report));
    let method = match report.method {
        Some(UncertaintyMethod::Propagation) => "propagation".to_string(),
        Some(UncertaintyMethod::Bootstrap { replicates, seed }) => {
            format!("bootstrap ({replicates} replicates, seed {seed})")
        }
        None => "precomputed".to_string(),
    };
    let _ = write!(
        out,
        "k_sigma: {}  uncertainty: {method}  weighting: {}",
        report.k_sigma,
        weighting_name(report.weighting)
    );
    if let Some(n) = report.n_trials {
        let _ = write!(out, "  trials: {n}");
    }
    out.push('\n');
    if let Some(d) = diagnostics {
        let _ = writeln!(
            out,
            "events: {}  out of window: {}  repeated in window: {}  beyond acquisition: {}",
            d.events, d.out_of_window, d.repeated_in_window, d.beyond_acquisition
        );
    }
    for o in &report.orders {
        let _ = writeln!(out, "\norder {}", o.order);
        let _ = writeln!(out, "  {:<10} {:<30} {:<30}", "channels", "theta", "g");
        for c in &o.combinations {
            let _ = writeln!(out, "  {:<10} {:<30} {:<30}", c.channels.to_string(), cell(&c.theta), cell(&c.g));
        }
        let _ = writeln!(out, "  {:<10} {:<30} {:<30}", "mean", mean_cell(o.theta_mean), mean_cell(o.g_mean));
        let _ = writeln!(
            out,
            "  verdict    theta: {}  g: {}",
            classification_name(o.theta_verdict),
            classification_name(o.g_verdict)
        );
    }
    out
}
