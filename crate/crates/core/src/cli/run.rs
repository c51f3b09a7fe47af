//! Command dispatch, result serialization and atomic output.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{Command, Format, RunConfig};
use crate::error::{Error, Result};
use crate::estimators::{conditional_expectation, RunOptions};
use crate::experiments::{bias_study, efficiency_sweep, oracle_compare, BiasSettings, SweepSpec, Timed};
use crate::rng::SeedSequence;

/// Serialized result document and the one-line summary for the terminal.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub document: Vec<u8>,
    pub summary: String,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| Error::Internal(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

fn encode<D: Serialize, R: Serialize>(format: Format, document: &D, rows: &[R]) -> Result<Vec<u8>> {
    match format {
        Format::Json => to_json(document),
        Format::Csv => to_csv(rows),
    }
}

/// Runs the configured command. With `timing` off every wall-clock field is
/// null, so reruns give byte-identical documents.
pub fn execute(config: &RunConfig, timing: bool) -> Result<Artifact> {
    let start = Instant::now();
    let options = RunOptions::default();
    let seeds = SeedSequence::new(config.seed);
    let (document, mut summary) = match config.command {
        Command::Estimate => {
            let b = config.b.expect("validated");
            let mut result = config.method()?.estimate(&config.model, b, config.n, &seeds, &options)?;
            if !timing {
                result.clear_timing();
            }
            let summary = format!(
                "{} estimate {:.6e} ± {:.3e} (n={}, M={}",
                result.algorithm.name(),
                result.estimate,
                result.std_error,
                result.n,
                result.m
            );
            (encode(config.format, &result, std::slice::from_ref(&result))?, summary)
        }
        Command::CondExpect => {
            let b = config.b.expect("validated");
            let mut result = conditional_expectation(&config.model, &config.method()?, &config.functional()?, b, config.n, &seeds, &options)?;
            if !timing {
                result.wall_time_s = None;
            }
            let summary = format!(
                "{} ratio {:.6e} ± {:.3e} (n={}, M={}",
                result.functional, result.estimate, result.std_error, result.n, result.m
            );
            (encode(config.format, &result, std::slice::from_ref(&result))?, summary)
        }
        Command::Sweep => {
            let spec = SweepSpec {
                model: config.model.clone(),
                method: config.method()?,
                levels: config.levels.clone(),
                n: config.n,
                seed: config.seed,
                batches: config.batches,
                n_naive: config.n_naive,
                options,
            };
            let mut record = efficiency_sweep(&spec)?;
            if !timing {
                record.clear_timing();
            }
            let summary = format!("sweep over {} levels (n={}", record.rows.len(), config.n);
            (encode(config.format, &record, &record.rows)?, summary)
        }
        Command::Compare => {
            let levels = if config.levels.is_empty() {
                vec![config.b.expect("validated")]
            } else {
                config.levels.clone()
            };
            let n_naive = config.n_naive.expect("validated");
            let record = oracle_compare(&config.model, &config.method()?, &levels, config.n, n_naive, config.seed, &options)?;
            let worst = record.rows.iter().filter_map(|r| r.z).fold(0.0f64, |m, z| m.max(z.abs()));
            let summary = format!("compare over {} levels, max |z| {:.2} (n={}, n_naive={}", record.rows.len(), worst, config.n, n_naive);
            (encode(config.format, &record, &record.rows)?, summary)
        }
        Command::BiasStudy => {
            let settings = BiasSettings {
                n_is: config.n_is.unwrap_or(0),
                under_resolved: config.under_resolved,
            };
            let b = config.b.expect("validated");
            let study = bias_study(&config.model, b, &config.epsilons, config.n, config.seed, &settings, &options)?;
            let summary = format!(
                "bias study at b={} over {} grids, reference M={} (n={}",
                b,
                study.rows.len(),
                study.rows.first().map_or(0, |r| r.reference_m),
                config.n
            );
            (encode(config.format, &study, &study.rows)?, summary)
        }
    };
    summary.push_str(&format!(", {:.2} s)", start.elapsed().as_secs_f64()));
    Ok(Artifact { document, summary })
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`, so readers never see a partial document.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
