use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use sigchange::curves::CurveError;
use sigchange::dsl::DslError;
use sigchange::gap::GapError;
use sigchange::geometry::GeometryError;
use sigchange::io::sorted_json;
use sigchange::loops::LoopError;

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.into() }
    }
}

impl From<sigchange::Error> for Failure {
    fn from(e: sigchange::Error) -> Self {
        let code = match &e {
            sigchange::Error::Loop(LoopError::ValidationFailed(_)) => EXIT_VALIDATION,
            _ => match e.kind() {
                sigchange::ErrorKind::Input => EXIT_INPUT,
                sigchange::ErrorKind::Numerical => EXIT_NUMERICAL,
            },
        };
        Failure { code, message: e.to_string() }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                sigchange::Error::from(e).into()
            }
        }
    )*};
}

from_core!(DslError, GeometryError, CurveError, GapError, LoopError);

#[derive(Serialize)]
struct RunReport<'a> {
    command: &'a str,
    argv: &'a [String],
    inputs_digest: String,
    outputs: &'a [String],
    seed: u64,
    wall_time_s: f64,
    exit_code: u8,
    error: Option<&'a str>,
}

/// Collects inputs and written files for one invocation.
pub struct Run {
    out: PathBuf,
    argv: Vec<String>,
    seed: u64,
    hasher: Sha256,
    outputs: Vec<String>,
    started: Instant,
}

impl Run {
    pub fn new(out: &Path, argv: Vec<String>, seed: u64) -> Self {
        let mut hasher = Sha256::new();
        for a in &argv {
            hasher.update(a.as_bytes());
            hasher.update([0]);
        }
        Run { out: out.to_path_buf(), argv, seed, hasher, outputs: Vec::new(), started: Instant::now() }
    }

    pub fn read_input(&mut self, path: &Path) -> Result<String, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        self.hasher.update(text.as_bytes());
        Ok(text)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.out).map_err(|e| Failure::input(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        self.write(name, &sorted_json(value))
    }

    /// Writes `run_report.json`; errors here are reported but not fatal.
    pub fn finish(self, command: &str, result: &Result<(), Failure>) {
        let report = RunReport {
            command,
            argv: &self.argv,
            inputs_digest: hex::encode(self.hasher.finalize()),
            outputs: &self.outputs,
            seed: self.seed,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            exit_code: result.as_ref().map_or_else(|f| f.code, |()| 0),
            error: result.as_ref().err().map(|f| f.message.as_str()),
        };
        let path = self.out.join("run_report.json");
        if let Err(e) = fs::create_dir_all(&self.out).and_then(|()| fs::write(&path, sorted_json(&report))) {
            eprintln!("warning: could not write {}: {e}", path.display());
        }
    }
}
