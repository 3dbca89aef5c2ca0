//! Result records as JSON lines with 17-significant-digit floats, plus the
//! CSV projection of α-sweeps.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// JSON formatter writing every float as `{:.16e}`.
#[derive(Debug, Default, Clone, Copy)]
pub struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// One JSON line per experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub kind: String,
    pub inputs_digest: String,
    pub pass: bool,
    pub metadata: Value,
    pub payload: Value,
    pub wall_clock_ms: u128,
}

impl ResultRecord {
    /// The record without its timing, i.e. the reproducible part.
    pub fn numeric_payload(&self) -> String {
        to_json_line(&(&self.kind, &self.inputs_digest, self.pass, &self.metadata, &self.payload))
    }
}

pub fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FullPrecision);
    value.serialize(&mut ser).expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// SHA-256 over the given byte chunks, hex encoded.
pub fn digest(chunks: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for c in chunks {
        h.update((c.len() as u64).to_le_bytes());
        h.update(c);
    }
    hex::encode(h.finalize())
}

/// Row of the α-sweep projection.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub state: usize,
    pub alpha: String,
    pub empirical_mean: String,
    pub dr_lower: String,
    pub dr_upper: String,
    pub reg_value: String,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}
