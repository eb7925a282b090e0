use std::fs;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::{CliError, Common, Format};

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    config: &'a C,
    result: &'a R,
    wall_time_s: f64,
}

pub struct Reporter {
    command: &'static str,
    start: Instant,
}

impl Reporter {
    pub fn start(command: &'static str) -> Self {
        Reporter { command, start: Instant::now() }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Writes the JSON envelope, or a CSV table headed by a metadata comment.
    pub fn emit<C: Serialize, R: Serialize>(&self, common: &Common, config: &C, result: &R, csv_rows: Option<(Vec<&str>, Vec<Vec<String>>)>) -> Result<(), CliError> {
        let wall_time_s = self.elapsed();
        let text = match common.format {
            Format::Json => {
                let env = Envelope { tool: "gqf", version: env!("CARGO_PKG_VERSION"), command: self.command, seed: common.seed, config, result, wall_time_s };
                let mut s = serde_json::to_string_pretty(&env)?;
                s.push('\n');
                s
            }
            Format::Csv => {
                let (header, rows) = csv_rows.ok_or_else(|| CliError::Input(format!("--format csv is not available for {}", self.command)))?;
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&header)?;
                for r in rows {
                    w.write_record(&r)?;
                }
                let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Input(e.to_string()))?).expect("csv output is utf-8");
                format!(
                    "# gqf {} command={} seed={} wall_time_s={wall_time_s:.3} config={}\n{body}",
                    env!("CARGO_PKG_VERSION"),
                    self.command,
                    common.seed,
                    serde_json::to_string(config)?
                )
            }
        };
        write_out(common.out.as_deref(), &text)
    }
}

pub fn write_out(out: Option<&str>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io { path: path.into(), source: e }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io { path: "<stdout>".into(), source: e }),
    }
}

pub fn write_json<T: Serialize>(out: Option<&str>, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_out(out, &s)
}
