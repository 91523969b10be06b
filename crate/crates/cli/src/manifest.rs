//! Run manifests and JSON output.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Pretty JSON with every float printed to 17 significant digits.
struct SigDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SigDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as indented JSON. Non-finite floats become `null`.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, to_json_string(value)).map_err(|e| CliError::io(path, e))
}

pub fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("plain data serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

/// One file written by a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    /// `"rows cols"`, or `null` for files that are not matrices.
    pub shape: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Every resolved option, defaults included.
    pub config: Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub versions: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
    pub selection: Option<Value>,
    pub results: Value,
    pub outputs: Vec<OutputFile>,
    pub error: Option<ErrorInfo>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Collects what a command did and writes the manifest at the end.
pub struct Recorder {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, argv: Vec<String>, out_dir: PathBuf, threads: usize) -> Self {
        let versions = BTreeMap::from([
            ("arsvd-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("arsvd-core".to_string(), arsvd_core::VERSION.to_string()),
        ]);
        Self {
            out_dir,
            manifest: RunManifest {
                command: command.to_string(),
                argv,
                config: Value::Null,
                seed: None,
                threads,
                versions,
                stages: Vec::new(),
                selection: None,
                results: Value::Null,
                outputs: Vec::new(),
                error: None,
            },
        }
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let out = f();
        self.manifest.stages.push(StageTiming { name: name.to_string(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn output(&mut self, name: &str, shape: Option<(usize, usize)>) {
        self.manifest.outputs.push(OutputFile { path: name.to_string(), shape: shape.map(|(r, c)| format!("{r} {c}")) });
    }

    pub fn write_matrix(
        &mut self,
        name: &str,
        m: &arsvd_core::DenseMatrix,
        header: Option<&[String]>,
    ) -> CliResult<()> {
        crate::io::write_matrix(&self.path(name), m, header)?;
        self.output(name, Some(m.shape()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        write_json(&self.path(name), value)?;
        self.output(name, None);
        Ok(())
    }

    pub fn fail(&mut self, err: &CliError) {
        self.manifest.error =
            Some(ErrorInfo { kind: err.kind().to_string(), exit_code: err.exit_code(), message: err.to_string() });
    }

    pub fn finish(&self) -> CliResult<PathBuf> {
        let path = self.path(MANIFEST_NAME);
        write_json(&path, &self.manifest)?;
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
