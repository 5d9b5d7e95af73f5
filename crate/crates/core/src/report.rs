//! JSON reports with a fixed float format and an embedded run manifest.

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Pretty JSON formatter writing every float with 17 significant digits.
struct FixedFloats<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serializes `value` as pretty JSON with floats as `d.dddddddddddddddde±x`.
/// Non-finite floats become `null`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedFloats {
            inner: PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Everything needed to rerun a command. Field names ending in `_unix_ms`
/// are the only run-dependent content of a report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved arguments for `command`.
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub version: String,
    /// SHA-256 of the input data file, or of the canonical experiment config.
    pub input_sha256: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, master_seed: u64, input_sha256: String) -> Self {
        RunManifest {
            command: command.to_string(),
            config,
            master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_sha256,
            started_unix_ms: unix_millis(),
            finished_unix_ms: 0,
        }
    }

    pub fn finish(mut self) -> Self {
        self.finished_unix_ms = unix_millis();
        self
    }
}

/// Drops timestamp lines so two reports can be compared byte for byte.
pub fn strip_timestamps(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.contains("_unix_ms\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(serde::Serialize)]
    struct Sample {
        x: f64,
        v: Vec<f64>,
        bad: f64,
        k: u32,
    }

    #[test]
    fn floats_have_seventeen_digits_and_round_trip() {
        let s = to_json_string(&Sample {
            x: 0.1,
            v: vec![-1.5e-300, 2.0],
            bad: f64::NAN,
            k: 3,
        })
        .unwrap();
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"bad\": null"));
        assert!(s.contains("\"k\": 3"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
        assert_eq!(back["v"][0].as_f64(), Some(-1.5e-300));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn timestamps_are_stripped() {
        let a = "{\n  \"started_unix_ms\": 5,\n  \"x\": 1\n}";
        let b = "{\n  \"started_unix_ms\": 9,\n  \"x\": 1\n}";
        assert_eq!(strip_timestamps(a), strip_timestamps(b));
    }
}
