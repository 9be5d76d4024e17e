use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use riskdiff_core::ci::{ConfidenceSet, Interval};
use riskdiff_core::Convention;
use serde_json::{json, Map, Value};

use crate::args::Format;
use crate::error::CliError;

pub const SCHEMA: &str = "riskdiff/1";

/// One command result in all three renderings.
pub struct Report {
    pub json: Map<String, Value>,
    pub text: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(kind: &str, convention: Convention) -> Self {
        let mut json = Map::new();
        json.insert("schema".into(), SCHEMA.into());
        json.insert("command".into(), kind.into());
        json.insert("convention".into(), convention_name(convention).into());
        Self {
            json,
            text: String::new(),
            header: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.json.insert(key.into(), value);
    }

    pub fn line(&mut self, key: &str, value: impl AsRef<str>) {
        let _ = writeln!(self.text, "{key:<18}{}", value.as_ref());
    }

    pub fn raw(&mut self, text: impl AsRef<str>) {
        let _ = writeln!(self.text, "{}", text.as_ref());
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&Value::Object(self.json.clone()))
                    .map_err(|e| CliError::Io(e.to_string()))?;
                s.push('\n');
                Ok(s.into_bytes())
            }
            Format::Text => Ok(self.text.clone().into_bytes()),
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                w.write_record(&self.header)
                    .map_err(|e| CliError::Io(e.to_string()))?;
                for row in &self.rows {
                    w.write_record(row)
                        .map_err(|e| CliError::Io(e.to_string()))?;
                }
                w.into_inner().map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }
}

pub fn emit(report: &Report, format: Format, output: Option<&Path>) -> Result<(), CliError> {
    let bytes = report.render(format)?;
    match output {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

pub fn convention_name(c: Convention) -> &'static str {
    match c {
        Convention::Delta => "delta",
        Convention::Cap => "cap",
    }
}

/// JSON number, or a string for values JSON cannot represent.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::String(nonfinite(x).into())
    }
}

fn nonfinite(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

/// Full-precision CSV cell.
pub fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        nonfinite(x).into()
    }
}

pub fn opt_cell(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

/// Six significant digits, `%g` style.
pub fn g6(x: f64) -> String {
    if !x.is_finite() {
        return nonfinite(x).into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        trim_zeros(&format!("{x:.*}", (5 - exp).max(0) as usize))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn interval(iv: Interval, c: Convention) -> (f64, f64) {
    c.interval_from_cap((iv.lo, iv.hi))
}

pub fn interval_json(iv: Interval, c: Convention) -> Value {
    let (lo, hi) = interval(iv, c);
    json!({ "lo": num(lo), "hi": num(hi) })
}

/// Intervals on the reporting scale in ascending order.
pub fn intervals_json(ivs: &[Interval], c: Convention) -> Value {
    let mut out: Vec<Value> = ivs.iter().map(|iv| interval_json(*iv, c)).collect();
    if c == Convention::Delta {
        out.reverse();
    }
    Value::Array(out)
}

pub fn interval_text(iv: Interval, c: Convention) -> String {
    let (lo, hi) = interval(iv, c);
    format!("[{}, {}]", g6(lo), g6(hi))
}

pub fn intervals_text(ivs: &[Interval], c: Convention) -> String {
    let mut parts: Vec<String> = ivs.iter().map(|iv| interval_text(*iv, c)).collect();
    if c == Convention::Delta {
        parts.reverse();
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(" ")
    }
}

pub fn set_json(set: &ConfidenceSet, c: Convention) -> Value {
    let mut m = Map::new();
    m.insert("method".into(), set.method.name().into());
    m.insert("alpha".into(), num(set.alpha));
    m.insert("hull".into(), interval_json(set.hull, c));
    m.insert("components".into(), intervals_json(&set.components, c));
    m.insert("gaps".into(), intervals_json(&set.gaps, c));
    m.insert("connected".into(), set.is_connected().into());
    m.insert("margin".into(), opt_num(set.margin_delta0));
    let check = set.boundary_check.map(|b| {
        json!({
            "boundary": num(c.from_cap(b.boundary)),
            "in_set": b.in_set,
            "p_exact": num(b.p_exact),
            "consistent": b.consistent,
            "excluded_noninferiority_side": b.excluded_below,
        })
    });
    m.insert("boundary_check".into(), check.unwrap_or(Value::Null));
    Value::Object(m)
}

/// CSV rows `part,lo,hi` for the hull, components and gaps of a set.
pub fn set_rows(set: &ConfidenceSet, c: Convention) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut push = |part: &str, ivs: &[Interval]| {
        let mut part_rows: Vec<Vec<String>> = ivs
            .iter()
            .map(|iv| {
                let (lo, hi) = interval(*iv, c);
                vec![
                    set.method.name().to_string(),
                    part.to_string(),
                    cell(lo),
                    cell(hi),
                ]
            })
            .collect();
        if c == Convention::Delta {
            part_rows.reverse();
        }
        rows.extend(part_rows);
    };
    push("hull", &[set.hull]);
    push("component", &set.components);
    push("gap", &set.gaps);
    rows
}
