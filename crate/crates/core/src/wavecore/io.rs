//! Plain-text grid files:
//!
//! ```text
//! LAGFWI <kind> ndim nx nz nt dx dz dt
//! v v v ...        (one line per time level, nodes x-fastest)
//! ```
//!
//! Models carry a single line of node values; trace files carry one line of
//! receiver samples per time level.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::field::SpaceTimeField;
use super::geometry::TraceData;
use super::grid::{GridSpec, ModelGrid};

const MAGIC: &str = "LAGFWI";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Model,
    Wavefield,
    Source,
    Traces,
}

impl FileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FileKind::Model => "model",
            FileKind::Wavefield => "wavefield",
            FileKind::Source => "source",
            FileKind::Traces => "traces",
        }
    }
}

impl FromStr for FileKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "model" => Ok(FileKind::Model),
            "wavefield" => Ok(FileKind::Wavefield),
            "source" => Ok(FileKind::Source),
            "traces" => Ok(FileKind::Traces),
            other => Err(format!("unknown file kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFile<T> {
    pub kind: FileKind,
    pub spec: GridSpec<T>,
    pub values: Vec<T>,
}

fn header<T: Scalar>(kind: FileKind, spec: &GridSpec<T>) -> String {
    format!(
        "{MAGIC} {} {} {} {} {} {} {} {}",
        kind.as_str(),
        spec.ndim,
        spec.nx,
        spec.nz,
        spec.nt,
        spec.dx.to_f64_lossy(),
        spec.dz.to_f64_lossy(),
        spec.dt.to_f64_lossy()
    )
}

/// Serializes values with `per_line` entries per row.
pub fn encode<T: Scalar>(kind: FileKind, spec: &GridSpec<T>, values: &[T], per_line: usize) -> String {
    let mut out = header(kind, spec);
    out.push('\n');
    let per_line = per_line.max(1);
    for chunk in values.chunks(per_line) {
        for (i, v) in chunk.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            // f64 Display is the shortest string that round-trips exactly.
            let _ = write!(out, "{}", v.to_f64_lossy());
        }
        out.push('\n');
    }
    out
}

pub fn decode<T: Scalar>(text: &str, origin: &Path) -> Result<GridFile<T>> {
    let perr = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| perr("empty file".into()))?;
    let fields: Vec<&str> = head.split_whitespace().collect();
    if fields.len() != 9 || fields[0] != MAGIC {
        return Err(perr(format!("bad header `{head}`")));
    }
    let kind: FileKind = fields[1].parse().map_err(perr)?;
    let int = |i: usize| -> Result<usize> {
        fields[i]
            .parse::<usize>()
            .map_err(|e| perr(format!("header field {i}: {e}")))
    };
    let real = |i: usize| -> Result<T> {
        let v = fields[i]
            .parse::<f64>()
            .map_err(|e| perr(format!("header field {i}: {e}")))?;
        T::from_f64(v).ok_or_else(|| perr(format!("header field {i} not representable")))
    };
    let spec = GridSpec {
        ndim: int(2)?,
        nx: int(3)?,
        nz: int(4)?,
        nt: int(5)?,
        dx: real(6)?,
        dz: real(7)?,
        dt: real(8)?,
    };
    spec.validate()?;
    let mut values = Vec::new();
    for tok in lines.flat_map(str::split_whitespace) {
        let v = tok
            .parse::<f64>()
            .map_err(|e| perr(format!("value `{tok}`: {e}")))?;
        values.push(T::from_f64(v).ok_or_else(|| perr(format!("value `{tok}` out of range")))?);
    }
    let expected = match kind {
        FileKind::Model => Some(spec.nodes()),
        FileKind::Wavefield | FileKind::Source => Some(spec.len()),
        FileKind::Traces => None,
    };
    if let Some(n) = expected {
        if values.len() != n {
            return Err(perr(format!("expected {n} values, found {}", values.len())));
        }
    } else if values.len() % spec.nt != 0 {
        return Err(perr(format!(
            "{} trace samples is not a multiple of nt = {}",
            values.len(),
            spec.nt
        )));
    }
    Ok(GridFile { kind, spec, values })
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |p: PathBuf| move |source| Error::Io { path: p, source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent.to_path_buf()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(tmp.clone()))?;
    fs::rename(&tmp, path).map_err(io_err(path.to_path_buf()))
}

pub fn read_file<T: Scalar>(path: &Path) -> Result<GridFile<T>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&text, path)
}

fn expect_kind<T>(f: &GridFile<T>, kind: FileKind, path: &Path) -> Result<()> {
    if f.kind != kind {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("expected a {} file, found {}", kind.as_str(), f.kind.as_str()),
        });
    }
    Ok(())
}

pub fn write_model<T: Scalar>(path: &Path, m: &ModelGrid<T>) -> Result<()> {
    let spec = m.spec();
    write_atomic(path, &encode(FileKind::Model, spec, m.values(), spec.nodes()))
}

pub fn read_model<T: Scalar>(path: &Path) -> Result<ModelGrid<T>> {
    let f = read_file(path)?;
    expect_kind(&f, FileKind::Model, path)?;
    ModelGrid::new(f.spec, f.values)
}

pub fn write_field<T: Scalar>(path: &Path, kind: FileKind, f: &SpaceTimeField<T>) -> Result<()> {
    let spec = f.spec();
    write_atomic(path, &encode(kind, spec, f.values(), spec.nodes()))
}

pub fn read_field<T: Scalar>(path: &Path) -> Result<(FileKind, SpaceTimeField<T>)> {
    let f = read_file(path)?;
    match f.kind {
        FileKind::Wavefield | FileKind::Source => {
            Ok((f.kind, SpaceTimeField::from_values(f.spec, f.values)?))
        }
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("{} file is not a space-time field", f.kind.as_str()),
        }),
    }
}

pub fn write_traces<T: Scalar>(path: &Path, spec: &GridSpec<T>, d: &TraceData<T>) -> Result<()> {
    write_atomic(
        path,
        &encode(FileKind::Traces, spec, d.values(), d.n_receivers()),
    )
}

pub fn read_traces<T: Scalar>(path: &Path) -> Result<(GridSpec<T>, TraceData<T>)> {
    let f = read_file(path)?;
    expect_kind(&f, FileKind::Traces, path)?;
    let nr = f.values.len() / f.spec.nt;
    let spec = f.spec;
    Ok((spec, TraceData::from_values(nr, spec.nt, f.values)?))
}
