//! Rendering of command results as JSON, CSV or plain text.

use std::fmt::Write as _;

use gnn_certify::bounds::{BoundReport, ShallowBounds};
use gnn_certify::simulate::EmpiricalEstimate;
use gnn_certify::{LocalizationReport, ValidationReport};
use serde::{Deserialize, Serialize};

use crate::args::Format;

#[derive(Debug, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub variance: Option<f64>,
    pub ks: Option<EmpiricalEstimate>,
    pub w1: Option<EmpiricalEstimate>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputSummary {
    pub m: usize,
    pub n_out: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub nu_sq: f64,
    pub coordinates: Vec<CoordinateSummary>,
    pub out: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CollectiveSummary {
    pub layer: usize,
    pub m: usize,
    pub seed: u64,
    /// Limiting value `O⁽ℓ⁾`.
    pub target: f64,
    pub mean: f64,
    pub rms: Option<EmpiricalEstimate>,
    pub collective_bound: Option<f64>,
    pub out: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub activation: String,
    pub n1: usize,
    pub growth_envelope: Option<ShallowBounds>,
    pub variance: ShallowBounds,
    /// Why the growth-envelope bounds are missing, if they are.
    pub note: Option<String>,
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

const REPORT_CSV_HEADER: &str = "metric,provenance,value,effective\n";

fn report_csv_row(out: &mut String, r: &BoundReport) {
    let provenance = serde_json::to_value(r.provenance).expect("enum serializes");
    let _ = writeln!(
        out,
        "{},{},{},{}",
        r.metric,
        provenance.as_str().unwrap_or_default(),
        r.value,
        r.effective
    );
}

fn report_text(out: &mut String, r: &BoundReport) {
    let _ = writeln!(out, "{}: {:.6} (effective {:.6})", r.metric, r.value, r.effective);
    for (k, v) in &r.constants {
        let _ = writeln!(out, "  {k} = {v}");
    }
}

pub fn render_report(r: &BoundReport, fmt: Format) -> String {
    match fmt {
        Format::Json => json(r),
        Format::Csv => {
            let mut out = REPORT_CSV_HEADER.to_string();
            report_csv_row(&mut out, r);
            out
        }
        Format::Text => {
            let mut out = String::new();
            report_text(&mut out, r);
            out
        }
    }
}

pub fn render_reports(reports: &[BoundReport], fmt: Format) -> String {
    match fmt {
        Format::Json => json(&reports),
        Format::Csv => {
            let mut out = REPORT_CSV_HEADER.to_string();
            for r in reports {
                report_csv_row(&mut out, r);
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            for r in reports {
                report_text(&mut out, r);
            }
            out
        }
    }
}

pub fn render_localization(r: &LocalizationReport, fmt: Format) -> String {
    let mode = serde_json::to_value(r.mode).expect("enum serializes");
    let mode = mode.as_str().unwrap_or_default();
    match fmt {
        Format::Json => json(r),
        Format::Csv => format!(
            "rect,mode,p_limit,c_bound,lower,upper\n\"{}\",{},{},{},{},{}\n",
            r.rect, mode, r.p_limit, r.c_bound, r.interval.0, r.interval.1
        ),
        Format::Text => format!(
            "P(output in {}) in [{:.6}, {:.6}]\n  limit {:.6}, bound {:.6} ({mode})\n",
            r.rect, r.interval.0, r.interval.1, r.p_limit, r.c_bound
        ),
    }
}

pub fn render_output_summary(s: &OutputSummary, fmt: Format) -> String {
    match fmt {
        Format::Json => json(s),
        Format::Csv => {
            let mut out = String::from("coordinate,variance,nu_sq,ks,ks_halfwidth,w1,w1_halfwidth\n");
            for (j, c) in s.coordinates.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    j + 1,
                    opt(c.variance),
                    s.nu_sq,
                    opt(c.ks.as_ref().map(|e| e.value)),
                    opt(c.ks.as_ref().map(|e| e.mc_halfwidth)),
                    opt(c.w1.as_ref().map(|e| e.value)),
                    opt(c.w1.as_ref().map(|e| e.mc_halfwidth)),
                );
            }
            out
        }
        Format::Text => {
            let mut out = format!(
                "{} draws of a {}-dimensional output (seed {}, fingerprint {}), limit variance {:.6}\n",
                s.m, s.n_out, s.seed, s.fingerprint, s.nu_sq
            );
            for (j, c) in s.coordinates.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  z{}: variance {} ks {} w1 {}",
                    j + 1,
                    opt(c.variance),
                    opt(c.ks.as_ref().map(|e| e.value)),
                    opt(c.w1.as_ref().map(|e| e.value)),
                );
            }
            if let Some(p) = &s.out {
                let _ = writeln!(out, "  written to {p}");
            }
            out
        }
    }
}

pub fn render_collective_summary(s: &CollectiveSummary, fmt: Format) -> String {
    match fmt {
        Format::Json => json(s),
        Format::Csv => format!(
            "layer,m,target,mean,rms,rms_halfwidth,collective_bound\n{},{},{},{},{},{},{}\n",
            s.layer,
            s.m,
            s.target,
            s.mean,
            opt(s.rms.as_ref().map(|e| e.value)),
            opt(s.rms.as_ref().map(|e| e.mc_halfwidth)),
            opt(s.collective_bound),
        ),
        Format::Text => format!(
            "layer {}: {} draws, mean {:.6} (limit {:.6}), rms error {} (bound {})\n",
            s.layer,
            s.m,
            s.mean,
            s.target,
            opt(s.rms.as_ref().map(|e| e.value)),
            opt(s.collective_bound),
        ),
    }
}

pub fn render_validation(r: &ValidationReport, fmt: Format) -> String {
    match fmt {
        Format::Json => json(r),
        Format::Csv => {
            let mut out = String::from("check,empirical,mc_halfwidth,threshold,margin,passed\n");
            for c in &r.checks {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.name, c.empirical, c.mc_halfwidth, c.threshold, c.margin, c.passed
                );
            }
            out
        }
        Format::Text => {
            let mut out = format!(
                "preset {} (seed {}, {} samples): {}\n",
                r.preset.name(),
                r.seed,
                r.samples,
                if r.passed { "PASS" } else { "FAIL" }
            );
            for c in &r.checks {
                let _ = writeln!(
                    out,
                    "  [{}] {}: {:.6} vs {:.6} (+{:.6})",
                    if c.passed { "ok" } else { "FAIL" },
                    c.name,
                    c.empirical,
                    c.threshold,
                    c.margin
                );
            }
            out
        }
    }
}

pub fn render_compare(r: &CompareReport, fmt: Format) -> String {
    let families = [("growth_envelope", r.growth_envelope.as_ref()), ("variance", Some(&r.variance))];
    match fmt {
        Format::Json => json(r),
        Format::Csv => {
            let mut out = String::from("family,total_variation,kolmogorov,wasserstein1\n");
            for (name, b) in families.iter().filter_map(|(n, b)| b.map(|b| (n, b))) {
                let _ = writeln!(
                    out,
                    "{name},{},{},{}",
                    b.total_variation.value, b.kolmogorov.value, b.wasserstein1.value
                );
            }
            out
        }
        Format::Text => {
            let mut out = format!("{}, n1 = {}\n{:>16} {:>12} {:>12} {:>12}\n", r.activation, r.n1, "", "d_TV", "d_K", "d_W1");
            for (name, b) in families.iter().filter_map(|(n, b)| b.map(|b| (n, b))) {
                let _ = writeln!(
                    out,
                    "{name:>16} {:>12.4} {:>12.4} {:>12.4}",
                    b.total_variation.value, b.kolmogorov.value, b.wasserstein1.value
                );
            }
            if let Some(note) = &r.note {
                let _ = writeln!(out, "  growth envelope: {note}");
            }
            out
        }
    }
}
