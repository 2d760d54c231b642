use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use crate::Common;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    NotBinding(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::NotBinding(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => f.write_str(m),
            CliError::NotBinding(m) => write!(f, "budget not binding: {m}"),
        }
    }
}

impl From<rpf_core::Error> for CliError {
    fn from(e: rpf_core::Error) -> Self {
        match e {
            rpf_core::Error::BudgetNotBinding { mass, k } => {
                CliError::NotBinding(format!("total mass {mass} does not exceed k = {k}"))
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// What a command produced.
pub struct Outcome {
    pub json: Value,
    /// 0, or 1 when an audit found a violation.
    pub exit: u8,
    /// Human-readable text for stderr.
    pub report: Option<String>,
    /// Files for the output directory.
    pub files: Vec<(String, Vec<u8>)>,
    /// Input files the command read.
    pub inputs: Vec<PathBuf>,
}

impl Outcome {
    pub fn json<T: Serialize>(value: &T) -> CliResult<Self> {
        let json = serde_json::to_value(value).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(Outcome {
            json,
            exit: 0,
            report: None,
            files: Vec::new(),
            inputs: Vec::new(),
        })
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    out: String,
    outputs: Vec<&'a str>,
}

/// Rounds every float to 15 significant digits.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let r: f64 = format!("{x:.14e}").parse().expect("round trip");
            if let Some(m) = serde_json::Number::from_f64(r) {
                *n = m;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_floats),
        Value::Object(o) => o.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn to_text(v: &Value) -> String {
    let mut v = v.clone();
    round_floats(&mut v);
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

/// Writes files and manifest (refusing to overwrite without `--force`),
/// then stdout and stderr. Returns the exit code.
pub fn emit(command: &str, common: &Common, outcome: Outcome) -> CliResult<u8> {
    if let Some(dir) = &common.out {
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            inputs: outcome
                .inputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            seed: common.seed,
            tol: common.tol,
            out: dir.display().to_string(),
            outputs: outcome.files.iter().map(|(n, _)| n.as_str()).collect(),
        };
        let manifest = to_text(&serde_json::to_value(&manifest).expect("serializable"));
        let mut files: Vec<(&str, &[u8])> = outcome
            .files
            .iter()
            .map(|(n, b)| (n.as_str(), b.as_slice()))
            .collect();
        files.push(("manifest.json", manifest.as_bytes()));
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        if !common.force {
            if let Some((name, _)) = files.iter().find(|(n, _)| dir.join(n).exists()) {
                return Err(CliError::Input(format!(
                    "{} exists; pass --force to overwrite",
                    dir.join(name).display()
                )));
            }
        }
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    if let Some(r) = &outcome.report {
        eprint!("{r}");
    }
    let mut out = std::io::stdout().lock();
    out.write_all(to_text(&outcome.json).as_bytes())
        .map_err(|e| CliError::Input(format!("cannot write stdout: {e}")))?;
    Ok(outcome.exit)
}
