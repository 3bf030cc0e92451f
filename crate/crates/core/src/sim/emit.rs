//! Trace, coverage and event writers.
//!
//! Delimited output starts with a header naming the columns; JSON output is
//! one object per line with the same keys. Formatting is fixed, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::beammgmt::{Candidate, Event};
use crate::error::{Error, Result};

use super::coverage::CoverageMap;
use super::run::TraceRow;

pub const TRACE_COLUMNS: [&str; 14] = [
    "t", "x", "y", "z", "gnb", "txbeam", "subarr", "rxbeam", "snr_db", "fsnr_db", "mcs", "dl_mbps", "ul_mbps",
    "event",
];

pub const COVERAGE_COLUMNS: [&str; 4] = ["x", "y", "se_bpshz", "best_gnb"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::validation("format", format!("expected csv or json, got `{other}`"))),
        }
    }
}

/// Fixed-precision number; infinities print as `inf`/`-inf`.
fn num(x: f64, digits: usize) -> String {
    if x.is_finite() {
        format!("{x:.digits$}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn json_num(x: f64, digits: usize) -> Value {
    if x.is_finite() {
        // round-trip through the fixed-precision text for stable bytes
        num(x, digits).parse::<f64>().map_or(Value::Null, |v| json!(v))
    } else {
        Value::Null
    }
}

fn idx(v: Option<usize>) -> i64 {
    v.map_or(-1, |i| i as i64)
}

fn trace_fields(r: &TraceRow) -> [String; 14] {
    let c = r.serving;
    let events: Vec<&str> = r.events.iter().map(|e| e.name()).collect();
    [
        num(r.t_s, 3),
        num(r.position.x, 3),
        num(r.position.y, 3),
        num(r.position.z, 3),
        idx(c.map(|c| c.gnb)).to_string(),
        idx(c.map(|c| c.tx_beam)).to_string(),
        idx(c.map(|c| c.subarray)).to_string(),
        idx(c.map(|c| c.rx_beam)).to_string(),
        num(r.snr_db, 3),
        num(r.filtered_snr_db, 3),
        idx(r.mcs).to_string(),
        num(r.dl_mbps, 3),
        num(r.ul_mbps, 3),
        events.join(";"),
    ]
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes trace rows. Unserved rows carry `-1` ids and a `-inf` SNR.
pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow], format: Format) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(w, "{}", TRACE_COLUMNS.join(","))?;
            for r in rows {
                writeln!(w, "{}", trace_fields(r).join(","))?;
            }
        }
        Format::Json => {
            for r in rows {
                let c = r.serving;
                let v = json!({
                    "t": json_num(r.t_s, 3),
                    "x": json_num(r.position.x, 3),
                    "y": json_num(r.position.y, 3),
                    "z": json_num(r.position.z, 3),
                    "gnb": idx(c.map(|c| c.gnb)),
                    "txbeam": idx(c.map(|c| c.tx_beam)),
                    "subarr": idx(c.map(|c| c.subarray)),
                    "rxbeam": idx(c.map(|c| c.rx_beam)),
                    "snr_db": json_num(r.snr_db, 3),
                    "fsnr_db": json_num(r.filtered_snr_db, 3),
                    "mcs": idx(r.mcs),
                    "dl_mbps": json_num(r.dl_mbps, 3),
                    "ul_mbps": json_num(r.ul_mbps, 3),
                    "event": r.events.iter().map(|e| e.name()).collect::<Vec<_>>(),
                });
                writeln!(w, "{v}")?;
            }
        }
    }
    w.flush()
}

pub fn write_coverage<W: Write>(mut w: W, map: &CoverageMap, format: Format) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(w, "{}", COVERAGE_COLUMNS.join(","))?;
            for p in &map.points {
                writeln!(
                    w,
                    "{},{},{},{}",
                    num(p.x, 3),
                    num(p.y, 3),
                    num(p.se_bpshz, 4),
                    idx(p.best_gnb)
                )?;
            }
        }
        Format::Json => {
            for p in &map.points {
                let v = json!({
                    "x": json_num(p.x, 3),
                    "y": json_num(p.y, 3),
                    "se_bpshz": json_num(p.se_bpshz, 4),
                    "best_gnb": idx(p.best_gnb),
                });
                writeln!(w, "{v}")?;
            }
        }
    }
    w.flush()
}

fn tuple_text(c: Option<Candidate>) -> String {
    match c {
        Some(c) => format!("{}/{}/{}/{}", c.gnb, c.tx_beam, c.subarray, c.rx_beam),
        None => "-".into(),
    }
}

fn tuple_json(c: Option<Candidate>) -> Value {
    match c {
        Some(c) => json!({"gnb": c.gnb, "tx_beam": c.tx_beam, "subarray": c.subarray, "rx_beam": c.rx_beam}),
        None => Value::Null,
    }
}

/// One line per event. Text lines read
/// `t=<s> <kind> from=<gnb/tx/sub/rx> to=<...> from_snr_db=<dB> to_snr_db=<dB>`.
pub fn write_events<W: Write>(mut w: W, events: &[Event], format: Format) -> std::io::Result<()> {
    for e in events {
        match format {
            Format::Csv => {
                let mut line = String::new();
                let _ = write!(
                    line,
                    "t={} {} from={} to={} from_snr_db={} to_snr_db={}",
                    num(e.t_ms / 1000.0, 3),
                    e.kind.name(),
                    tuple_text(e.from),
                    tuple_text(e.to),
                    num(e.from_snr_db, 3),
                    num(e.to_snr_db, 3)
                );
                writeln!(w, "{line}")?;
            }
            Format::Json => {
                let v = json!({
                    "t": json_num(e.t_ms / 1000.0, 3),
                    "event": e.kind.name(),
                    "from": tuple_json(e.from),
                    "to": tuple_json(e.to),
                    "from_snr_db": json_num(e.from_snr_db, 3),
                    "to_snr_db": json_num(e.to_snr_db, 3),
                });
                writeln!(w, "{v}")?;
            }
        }
    }
    w.flush()
}

/// Creates `path` and hands a buffered writer to `f`, attaching the path to
/// any I/O error.
pub fn to_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).map_err(io_err(path))
}
