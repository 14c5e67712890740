//! Output files with embedded provenance, and loading of their inputs.

use crate::CliError;
use anyhow::Context;
use qpopf_core::grid::{builtin_case, linearize, GridCase, ParametricLp};
use qpopf_core::provenance::{sha256_bytes, sha256_json};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// SHA-256 of one input, keyed by its role rather than its path so that runs
/// in different directories produce identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub role: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Hash of the resolved settings (output locations excluded).
    pub config_sha256: String,
    pub inputs: Vec<InputHash>,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, config: &C, inputs: Vec<InputHash>) -> Self {
        Self {
            tool: "qpopf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_json(config),
            inputs,
        }
    }

    /// One-line form used as the leading comment of CSV outputs.
    pub fn comment(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|i| format!("{}={}", i.role, i.sha256)).collect();
        format!(
            "# {} {} {} config_sha256={} inputs=[{}]",
            self.tool,
            self.version,
            self.command,
            self.config_sha256,
            inputs.join(",")
        )
    }
}

/// A JSON output: provenance, the settings that produced it, and the payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact<C, T> {
    pub provenance: Provenance,
    pub config: C,
    pub data: T,
}

/// A loaded artifact together with the hash of the file it came from.
pub struct Loaded<T> {
    pub data: T,
    pub sha256: String,
}

pub fn write_json<C: Serialize, T: Serialize>(path: &Path, artifact: &Artifact<C, T>) -> anyhow::Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(artifact)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Writes `# provenance` followed by the CSV body.
pub fn write_csv(path: &Path, provenance: &Provenance, body: &[u8]) -> anyhow::Result<()> {
    ensure_parent(path)?;
    let mut out = provenance.comment().into_bytes();
    out.push(b'\n');
    out.extend_from_slice(body);
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Reads an artifact's payload; a missing file is a usage error.
pub fn load_data<T: DeserializeOwned>(path: &Path, what: &str) -> Result<Loaded<T>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    #[derive(Deserialize)]
    struct Payload<T> {
        data: T,
    }
    let parsed: Payload<T> = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is not a valid {what} file", path.display()))
        .map_err(CliError::Runtime)?;
    Ok(Loaded {
        data: parsed.data,
        sha256: sha256_bytes(&bytes),
    })
}

/// A case from a file path, or by shipped name when no such file exists.
pub struct CaseInput {
    pub case: GridCase,
    pub plp: ParametricLp,
    pub sha256: String,
}

pub fn load_case(spec: &str) -> Result<CaseInput, CliError> {
    let path = Path::new(spec);
    let (case, sha256) = if path.exists() {
        let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read case {spec}: {e}")))?;
        let case = qpopf_core::grid::load_case(path).map_err(|e| CliError::Runtime(e.into()))?;
        (case, sha256_bytes(&bytes))
    } else if let Some(parsed) = builtin_case(spec) {
        let text = qpopf_core::grid::BUILTIN_CASES
            .iter()
            .find(|(n, _)| *n == spec)
            .map(|(_, t)| *t)
            .unwrap_or_default();
        (parsed.map_err(|e| CliError::Runtime(e.into()))?, sha256_bytes(text.as_bytes()))
    } else {
        return Err(CliError::Usage(format!(
            "case {spec} is neither a readable file nor a shipped case (case69, toy2)"
        )));
    };
    let plp = linearize(&case).map_err(|e| CliError::Runtime(e.into()))?;
    Ok(CaseInput { case, plp, sha256 })
}
