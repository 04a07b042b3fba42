//! Row serialization shared by all commands.
//!
//! CSV and JSON carry the same rows with the same values. Non-finite
//! numbers are written as the strings `inf`, `-inf` and `nan` in both.

use std::io::{self, Write};

use clap::ValueEnum;
use serde::{Serialize, Serializer};

/// Version of the JSON envelope.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

/// A float that survives both formats, infinities included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    rows: &'a [T],
}

/// Writes `rows` as CSV (with `header`, even when there are no rows) or as a
/// versioned JSON document.
pub fn write_rows<T: Serialize>(
    format: Format,
    command: &str,
    header: &[&str],
    rows: &[T],
    out: &mut dyn Write,
) -> io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(header)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()
        }
        Format::Json => {
            let env = Envelope {
                schema: SCHEMA,
                command,
                rows,
            };
            serde_json::to_writer_pretty(&mut *out, &env)?;
            writeln!(out)
        }
    }
}

/// Writes a single JSON object wrapped with the schema version.
pub fn write_json_object<T: Serialize>(command: &str, key: &str, value: &T, out: &mut dyn Write) -> io::Result<()> {
    let mut obj = serde_json::Map::new();
    obj.insert("schema".into(), SCHEMA.into());
    obj.insert("command".into(), command.into());
    obj.insert(key.into(), serde_json::to_value(value)?);
    serde_json::to_writer_pretty(&mut *out, &obj)?;
    writeln!(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        name: &'static str,
        x: Num,
        y: Option<Num>,
    }

    fn render(format: Format, rows: &[Row]) -> String {
        let mut buf = Vec::new();
        write_rows(format, "test", &["name", "x", "y"], rows, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_header_always_present() {
        assert_eq!(render(Format::Csv, &[]), "name,x,y\n");
    }

    #[test]
    fn infinities_are_strings_in_both_formats() {
        let rows = [Row {
            name: "a",
            x: Num(f64::INFINITY),
            y: None,
        }];
        assert_eq!(render(Format::Csv, &rows), "name,x,y\na,inf,\n");
        let json: serde_json::Value = serde_json::from_str(&render(Format::Json, &rows)).unwrap();
        assert_eq!(json["schema"], 1);
        assert_eq!(json["rows"][0]["x"], "inf");
        assert!(json["rows"][0]["y"].is_null());
    }

    #[test]
    fn finite_values_agree_across_formats() {
        let rows = [Row {
            name: "b",
            x: Num(0.1 + 0.2),
            y: Some(Num(-1.0)),
        }];
        let csv = render(Format::Csv, &rows);
        let json: serde_json::Value = serde_json::from_str(&render(Format::Json, &rows)).unwrap();
        let csv_x: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(csv_x, json["rows"][0]["x"].as_f64().unwrap());
    }
}
