//! Output artifacts: the sweep CSV and JSON run records.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::harness::SweepRow;
use crate::noise::NOISE_SCHEMA_VERSION;

pub const CSV_COLUMNS: [&str; 11] =
    ["algorithm", "M", "K", "R", "eta", "round", "mean_subopt", "stderr", "reps", "argmin_flag", "seed"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `# schema:` and `# config:` comment lines, the header, then rows.
pub fn write_sweep_csv<W: Write + ?Sized, C: Serialize>(out: &mut W, config: &C, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "# schema: noise_v{NOISE_SCHEMA_VERSION} {}", CSV_COLUMNS.join(","))?;
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.m,
            r.k,
            r.r,
            fmt_f64(r.eta),
            r.round,
            fmt_f64(r.mean_subopt),
            fmt_f64(r.stderr),
            r.reps,
            u8::from(r.argmin_flag),
            r.seed
        )?;
    }
    Ok(())
}

/// Parses the data lines of a sweep CSV back into rows.
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let bad = |l: &str| crate::Error::Format(format!("bad CSV line `{l}`"));
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != CSV_COLUMNS.join(",") {
                return Err(bad(line));
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_COLUMNS.len() {
            return Err(bad(line));
        }
        let u = |s: &str| s.parse::<usize>().map_err(|_| bad(line));
        let x = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        rows.push(SweepRow {
            algorithm: f[0].to_string(),
            m: u(f[1])?,
            k: u(f[2])?,
            r: u(f[3])?,
            eta: x(f[4])?,
            round: u(f[5])?,
            mean_subopt: x(f[6])?,
            stderr: x(f[7])?,
            reps: u(f[8])?,
            argmin_flag: f[9] == "1",
            seed: f[10].parse().map_err(|_| bad(line))?,
        });
    }
    Ok(rows)
}

/// JSON record of one run with the resolved configuration.
#[derive(Debug, Serialize)]
pub struct RunRecord<'a, C: Serialize, T: Serialize> {
    pub noise_schema_version: u32,
    pub config: &'a C,
    pub result: &'a T,
    /// Seconds; `null` unless requested, so records stay reproducible.
    pub wall_time_s: Option<f64>,
}

impl<'a, C: Serialize, T: Serialize> RunRecord<'a, C, T> {
    pub fn new(config: &'a C, result: &'a T) -> Self {
        Self { noise_schema_version: NOISE_SCHEMA_VERSION, config, result, wall_time_s: None }
    }

    pub fn with_wall_time(mut self, secs: f64) -> Self {
        self.wall_time_s = Some(secs);
        self
    }
}
