//! Run manifests and output files that reference them.

use fracid::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

pub const DETERMINISM_NOTE: &str =
    "no random numbers are drawn; rerunning these arguments reproduces every output byte for byte";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub name: String,
    /// Set when the scenario came from a JSON file.
    pub path: Option<String>,
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub scenario: Option<ScenarioRef>,
    pub parameters: Map<String, Value>,
    pub determinism: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Collects a command's outputs. Files are written by [`Run::finish`] together
/// with `<first output>.manifest.json`; without `--out` results go to stdout.
pub struct Run {
    manifest: RunManifest,
    manifest_path: Option<PathBuf>,
    pending: Vec<(PathBuf, String)>,
}

impl Run {
    pub fn new(command: &str, args: &[String]) -> Self {
        Self {
            manifest: RunManifest {
                tool: "fracid".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                args: args.to_vec(),
                scenario: None,
                parameters: Map::new(),
                determinism: DETERMINISM_NOTE.into(),
                outputs: Vec::new(),
            },
            manifest_path: None,
            pending: Vec::new(),
        }
    }

    pub fn scenario(&mut self, r: ScenarioRef) {
        self.manifest.scenario = Some(r);
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.manifest.parameters.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn determinism(&mut self, note: String) {
        self.manifest.determinism = note;
    }

    fn manifest_name(&mut self, out: &Path) -> String {
        let path = self.manifest_path.get_or_insert_with(|| {
            let mut p = out.as_os_str().to_owned();
            p.push(".manifest.json");
            PathBuf::from(p)
        });
        path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }

    pub fn json(&mut self, out: Option<&Path>, value: &impl Serialize) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        let Some(out) = out else {
            println!("{}", serde_json::to_string_pretty(&v)?);
            return Ok(());
        };
        let name = Value::String(self.manifest_name(out));
        v = match v {
            Value::Object(mut m) => {
                m.insert("manifest".into(), name);
                Value::Object(m)
            }
            other => {
                let mut m = Map::new();
                m.insert("manifest".into(), name);
                m.insert("data".into(), other);
                Value::Object(m)
            }
        };
        self.push(out, serde_json::to_string_pretty(&v)? + "\n");
        Ok(())
    }

    pub fn csv(&mut self, out: Option<&Path>, body: &str) -> Result<()> {
        let Some(out) = out else {
            print!("{body}");
            return Ok(());
        };
        let text = format!("# manifest={}\n{body}", self.manifest_name(out));
        self.push(out, text);
        Ok(())
    }

    fn push(&mut self, out: &Path, text: String) {
        self.manifest.outputs.push(out.to_string_lossy().into_owned());
        self.pending.push((out.to_path_buf(), text));
    }

    pub fn finish(self) -> Result<()> {
        let Some(mpath) = self.manifest_path else { return Ok(()) };
        for (path, text) in &self.pending {
            write_file(path, text)?;
        }
        write_file(&mpath, &(serde_json::to_string_pretty(&self.manifest)? + "\n"))
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
