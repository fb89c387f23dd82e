//! CSV convergence log: `#`-prefixed metadata lines, a header, one row per
//! iteration. `model_error` is empty when no true model is known.

use std::path::Path;

use crate::error::{Error, Result};
use crate::iterations::Diagnostics;
use crate::wavecore::io::write_atomic;

pub const HEADER: [&str; 7] = ["iter", "misfit", "constraint", "model_error", "v_norm", "w_norm", "seconds"];

pub fn format_log(metadata: &[(&str, String)], history: &[Diagnostics]) -> Result<String> {
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("log encoding: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    for d in history {
        w.write_record([
            d.iter.to_string(),
            d.misfit.to_string(),
            d.constraint.to_string(),
            d.model_error.map_or_else(String::new, |e| e.to_string()),
            d.v_norm.to_string(),
            d.w_norm.to_string(),
            d.seconds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("log encoding: {e}")))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is ASCII"));
    Ok(out)
}

pub fn write_log(path: &Path, metadata: &[(&str, String)], history: &[Diagnostics]) -> Result<()> {
    write_atomic(path, &format_log(metadata, history)?)
}

pub fn parse_log(text: &str, origin: &Path) -> Result<Vec<Diagnostics>> {
    let err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| err(e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(err(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| err(format!("line {line}: `{}` in column {} is not a number", &rec[i], HEADER[i])))
        };
        rows.push(Diagnostics {
            iter: rec[0]
                .parse()
                .map_err(|_| err(format!("line {line}: bad iteration `{}`", &rec[0])))?,
            misfit: f(1)?,
            constraint: f(2)?,
            model_error: if rec[3].is_empty() { None } else { Some(f(3)?) },
            v_norm: f(4)?,
            w_norm: f(5)?,
            seconds: f(6)?,
        });
    }
    Ok(rows)
}

pub fn read_log(path: &Path) -> Result<Vec<Diagnostics>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_log(&text, path)
}

/// Metadata lines of a log, `# key=value`.
pub fn parse_metadata(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
