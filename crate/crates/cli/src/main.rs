mod args;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use gnn_certify::bounds::{
    bff_bounds, convex_from_w1_report, deep_convex_bound, deep_w1_bound, shallow_bounds, BoundReport, Metric,
};
use gnn_certify::localize::certified_interval;
use gnn_certify::recursion::{collective_bound, LayerStats};
use gnn_certify::report::{reproduce_table, run_validation};
use gnn_certify::simulate::{
    collective_rms_error, empirical_ks, empirical_w1, sample_collective, sample_outputs, SampleBatch,
};
use gnn_certify::{Error, LocalizationMode, Preset, Rect, Result, TableSpec};

use args::{BoundKind, Cli, Command, ConfigFile, Format};
use output::{CompareReport, CoordinateSummary, CollectiveSummary, OutputSummary};

const DEFAULT_SAMPLES: usize = 10_000;

/// Exit status for a validation run whose checks did not all pass.
const EXIT_VALIDATION_FAILED: u8 = 1;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse(_) => 2,
        Error::ResourceGuard(_) => 4,
        _ => 3,
    }
}

fn select(reports: Vec<BoundReport>, metric: Option<Metric>) -> Result<Vec<BoundReport>> {
    match metric {
        None => Ok(reports),
        Some(m) => {
            let picked: Vec<_> = reports.into_iter().filter(|r| r.metric == m).collect();
            if picked.is_empty() {
                return Err(Error::InvalidParameter(format!("metric {m} is not available here")));
            }
            Ok(picked)
        }
    }
}

fn bound(kind: BoundKind, net: &gnn_certify::Network, metric: Option<Metric>) -> Result<Vec<BoundReport>> {
    match kind {
        BoundKind::Shallow => select(shallow_bounds(net)?.into_vec(), metric),
        BoundKind::Deep => match metric {
            Some(Metric::Convex) => Ok(vec![deep_convex_bound(net)?]),
            Some(Metric::Wasserstein1) => Ok(vec![deep_w1_bound(net)?]),
            Some(m) => Err(Error::InvalidParameter(format!(
                "deep bounds cover convex and wasserstein1, not {m}"
            ))),
            None => {
                let w1 = deep_w1_bound(net)?;
                let converted = convex_from_w1_report(&w1, net.arch.n_out)?;
                Ok(vec![deep_convex_bound(net)?, w1, converted])
            }
        },
    }
}

fn write_batch(batch: &SampleBatch, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        batch.write_csv(file)
    } else {
        batch.write_binary(file)
    }
}

fn run(cli: Cli) -> Result<(String, u8)> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let format = cli.format.or(file.format);
    let quad_nodes = cli.quad_nodes.or(file.quad_nodes);
    let fmt = format.unwrap_or(Format::Json);

    let text = match cli.command {
        Command::Bound { kind, net, metric } => {
            let net = net.or(file.network()).network(quad_nodes)?;
            let metric = metric.or(file.metric).map(|m| m.parse::<Metric>()).transpose()?;
            let reports = bound(kind, &net, metric)?;
            if metric.is_some() {
                output::render_report(&reports[0], fmt)
            } else {
                output::render_reports(&reports, fmt)
            }
        }
        Command::Localize { net, rect, mode } => {
            let net = net.or(file.network()).network(quad_nodes)?;
            let rect: Rect = rect
                .or(file.rect)
                .ok_or_else(|| Error::Parse("--rect is required".into()))?
                .parse()?;
            let mode = match mode.or(file.mode) {
                Some(m) => m.parse()?,
                None => LocalizationMode::for_network(&net),
            };
            output::render_localization(&certified_interval(&net, &rect, mode)?, fmt)
        }
        Command::Simulate { net, sim, layer, out } => {
            let net = net.or(file.network()).network(quad_nodes)?;
            let settings = sim.or(file.simulation()).settings(DEFAULT_SAMPLES)?;
            let stats = LayerStats::compute(&net)?;
            let out = out.or(file.out);
            match layer.or(file.layer) {
                None => {
                    let batch = sample_outputs(&net, &settings)?;
                    if let Some(path) = &out {
                        write_batch(&batch, path)?;
                    }
                    let coordinates = (0..batch.n_out)
                        .map(|j| {
                            let col = batch.column(j);
                            let (ks, w1) = if batch.m >= 2 {
                                (Some(empirical_ks(&col, stats.nu_sq)?), Some(empirical_w1(&col, stats.nu_sq)?))
                            } else {
                                (None, None)
                            };
                            Ok(CoordinateSummary {
                                variance: if batch.m >= 2 { Some(batch.column_variance(j)) } else { None },
                                ks,
                                w1,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let summary = OutputSummary {
                        m: batch.m,
                        n_out: batch.n_out,
                        seed: settings.seed,
                        fingerprint: format!("{:016x}", batch.fingerprint.unwrap_or_default()),
                        nu_sq: stats.nu_sq,
                        coordinates,
                        out: out.map(|p| p.display().to_string()),
                    };
                    output::render_output_summary(&summary, fmt)
                }
                Some(layer) => {
                    let draws = sample_collective(&net, layer, &settings)?;
                    if let Some(path) = &out {
                        write_batch(&SampleBatch::from_values(draws.len(), 1, draws.clone())?, path)?;
                    }
                    let target = stats.o_seq[layer - 1];
                    let rms = if draws.len() >= 2 {
                        Some(collective_rms_error(&draws, target)?)
                    } else {
                        None
                    };
                    let bound = match collective_bound(&net, layer) {
                        Ok(b) => Some(b),
                        Err(Error::DeepBoundsUnavailable(_)) => None,
                        Err(e) => return Err(e),
                    };
                    let summary = CollectiveSummary {
                        layer,
                        m: draws.len(),
                        seed: settings.seed,
                        target,
                        mean: gnn_certify::numeric::pairwise_mean(&draws),
                        rms,
                        collective_bound: bound,
                        out: out.map(|p| p.display().to_string()),
                    };
                    output::render_collective_summary(&summary, fmt)
                }
            }
        }
        Command::Validate { preset, sim } => {
            let preset: Preset = preset
                .or(file.preset.clone())
                .ok_or_else(|| Error::Parse("--preset is required".into()))?
                .parse()?;
            let settings = sim.or(file.simulation()).settings(preset.default_samples())?;
            let report = run_validation(preset, &settings)?;
            let code = if report.passed { 0 } else { EXIT_VALIDATION_FAILED };
            return Ok((output::render_validation(&report, fmt), code));
        }
        Command::Table { id, table2_normalized } => {
            let id = id.or(file.id).ok_or_else(|| Error::Parse("--id is required".into()))?;
            let spec = TableSpec::new(id, table2_normalized || file.table2_normalized.unwrap_or(false))?;
            let table = reproduce_table(spec)?;
            match format.unwrap_or(Format::Csv) {
                Format::Csv => table.to_csv(),
                Format::Text => table.to_text(),
                Format::Json => output::json(&table),
            }
        }
        Command::Compare { net } => {
            let net = net.or(file.network()).network(quad_nodes)?;
            let variance = shallow_bounds(&net)?;
            let (growth_envelope, note) = match bff_bounds(&net) {
                Ok(b) => (Some(b), None),
                Err(Error::InvalidParameter(msg)) => (None, Some(msg)),
                Err(e) => return Err(e),
            };
            let report = CompareReport {
                activation: net.activation.name(),
                n1: net.arch.hidden[0],
                growth_envelope,
                variance,
                note,
            };
            output::render_compare(&report, fmt)
        }
    };
    Ok((text, 0))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(3);
            }
            ExitCode::from(code)
        }
        Err(err) => {
            let code = exit_code(&err);
            let record = serde_json::json!({
                "error": err.kind(),
                "message": err.to_string(),
                "exit_code": code,
            });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
