//! File formats: the `RPCS` sequence container, PGM frames, run configs,
//! checkpoints and CSV tables.

mod checkpoint;
mod config;
mod pgm;
mod seq;

use std::io::{Read, Write};

pub use checkpoint::{parse_manifest, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{RunConfig, RunMode, RUN_CONFIG_KEYS};
pub use pgm::{
    encode_pgm, ingest_pgm_dir, list_pgm_files, parse_pgm, read_pgm, write_pgm, GrayImage,
    IngestSummary,
};
pub use seq::{
    read_sequence, write_sequence, SequenceHeader, SequenceReader, SequenceWriter, SEQ_HEADER_LEN,
    SEQ_MAGIC, SEQ_VERSION,
};

use crate::error::{Error, Result};
use crate::sparse::SupportSet;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!(),
            }
        } else {
            Error::Format(format!("csv: {e}"))
        }
    }
}

pub const SUPPORTS_HEADER: [&str; 3] = ["t", "size", "indices"];

/// Streaming writer for `t,size,indices` rows, indices space separated.
pub struct SupportCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SupportCsvWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(SUPPORTS_HEADER)?;
        Ok(SupportCsvWriter { inner })
    }

    pub fn write(&mut self, t: usize, support: &SupportSet) -> Result<()> {
        let indices: Vec<String> = support.iter().map(|i| i.to_string()).collect();
        self.inner
            .write_record([t.to_string(), support.len().to_string(), indices.join(" ")])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Read `t,size,indices` rows back. `n` bounds the indices.
pub fn read_supports_csv<R: Read>(r: R, n: usize) -> Result<Vec<(usize, SupportSet)>> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let bad = |what: &str| Error::Format(format!("supports csv: bad {what} in {record:?}"));
        let t: usize = record.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("t"))?;
        let size: usize = record.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("size"))?;
        let indices = record
            .get(2)
            .unwrap_or("")
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad("index")))
            .collect::<Result<Vec<usize>>>()?;
        if indices.len() != size {
            return Err(bad("size"));
        }
        let set = SupportSet::new(indices, n).map_err(|e| Error::Format(format!("supports csv: {e}")))?;
        out.push((t, set));
    }
    Ok(out)
}
