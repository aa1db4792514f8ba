//! File formats: bar codes and reports as JSON, signals as JSON or as CSV
//! with an `x,value` header and an optional `# provenance {…}` comment.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::barcode::BarCode;
use crate::convolve::{GridSamples, GridSpec, Provenance, Signal};
use crate::error::{Error, Result};

const PROVENANCE_TAG: &str = "# provenance ";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Parse(format!("unknown format '{other}' (json or csv)"))),
        }
    }
}

/// JSON if the first non-blank character opens an object.
pub fn sniff(text: &str) -> Format {
    if text.trim_start().starts_with('{') {
        Format::Json
    } else {
        Format::Csv
    }
}

pub fn read_all(mut r: impl Read) -> Result<String> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    Ok(s)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_code(text: &str) -> Result<BarCode> {
    from_json(text)
}

/// Grid signals are written node by node; piecewise signals are sampled at
/// spacing `h` over their support.
pub fn write_signal_csv(mut w: impl Write, s: &Signal, h: f64) -> Result<()> {
    let g = s.to_grid(h)?;
    writeln!(w, "{PROVENANCE_TAG}{}", serde_json::to_string(&s.provenance)?)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "value"])?;
    for (i, v) in g.values.iter().enumerate() {
        out.write_record([format!("{:.17e}", g.x(i)), format!("{v:.17e}")])?;
    }
    out.flush()?;
    Ok(())
}

pub fn signal_to_string(s: &Signal, format: Format, h: f64) -> Result<String> {
    match format {
        Format::Json => to_json_pretty(s),
        Format::Csv => {
            let mut buf = Vec::new();
            write_signal_csv(&mut buf, s, h)?;
            String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
        }
    }
}

/// CSV rows must be uniformly spaced in `x`.
pub fn parse_signal_csv(text: &str) -> Result<Signal> {
    let mut provenance = Provenance::default();
    for line in text.lines() {
        if let Some(rest) = line.trim_start().strip_prefix(PROVENANCE_TAG) {
            provenance = serde_json::from_str(rest)?;
        }
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "x" || &headers[1] != "value" {
        return Err(Error::Parse(format!("expected header 'x,value', found '{}'", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut xs = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", rec.position().map_or(0, |p| p.line()))))
        };
        xs.push(num(0)?);
        values.push(num(1)?);
    }
    if xs.len() < 2 {
        return Err(Error::Parse("a signal needs at least two samples".into()));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    for (i, &x) in xs.iter().enumerate() {
        if (x - (xs[0] + i as f64 * h)).abs() > 1e-6 * h {
            return Err(Error::Parse(format!("samples are not uniformly spaced (row {})", i + 1)));
        }
    }
    let spec = GridSpec::new(xs[0], h, xs.len())?;
    Ok(Signal::grid(GridSamples::new(spec, values)?).with_provenance(provenance))
}

pub fn parse_signal(text: &str, format: Option<Format>) -> Result<Signal> {
    match format.unwrap_or_else(|| sniff(text)) {
        Format::Json => from_json(text),
        Format::Csv => parse_signal_csv(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolve::hat_convolve;
    use crate::kernel::Kernel;

    #[test]
    fn csv_roundtrip_keeps_values_and_provenance() {
        let spec = GridSpec::new(-0.125, 0.0625, 20).unwrap();
        let g = GridSamples::from_fn(spec, |x| (3.0 * x).sin());
        let prov = Provenance { kernel: Some(Kernel::hat(0.02).unwrap()), seed: Some(7), ..Default::default() };
        let s = Signal::grid(g.clone()).with_provenance(prov.clone());
        let text = signal_to_string(&s, Format::Csv, 0.0).unwrap();
        let back = parse_signal(&text, None).unwrap();
        assert_eq!(back.provenance, prov);
        let bg = back.as_grid().unwrap();
        assert_eq!(bg.values, g.values);
        assert!((bg.h - g.h).abs() < 1e-15 && (bg.x0 - g.x0).abs() < 1e-15);
    }

    #[test]
    fn json_signal_roundtrip() {
        let z = BarCode::new(vec![0.2, 0.45]).unwrap();
        let s = hat_convolve(&z, 0.05).unwrap();
        let text = signal_to_string(&s, Format::Json, 0.01).unwrap();
        assert_eq!(sniff(&text), Format::Json);
        assert_eq!(parse_signal(&text, None).unwrap(), s);
    }

    #[test]
    fn rejects_bad_csv() {
        assert!(parse_signal_csv("a,b\n1,2\n2,3\n").unwrap_err().is_io());
        assert!(parse_signal_csv("x,value\n0,1\n1,1\n3,1\n").unwrap_err().is_io());
        assert!(parse_signal_csv("x,value\n0,1\n1,zz\n").unwrap_err().is_io());
    }
}
