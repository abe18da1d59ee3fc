use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::frames::FrameSequence;

pub const SEQ_MAGIC: [u8; 4] = *b"RPCS";
pub const SEQ_VERSION: u32 = 1;
/// Magic, version, `n` and `T`.
pub const SEQ_HEADER_LEN: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceHeader {
    pub n: u64,
    pub frames: u64,
}

impl SequenceHeader {
    pub fn payload_len(&self) -> Option<u64> {
        self.n.checked_mul(self.frames)?.checked_mul(8)
    }

    fn encode(&self) -> [u8; SEQ_HEADER_LEN as usize] {
        let mut buf = [0u8; SEQ_HEADER_LEN as usize];
        buf[..4].copy_from_slice(&SEQ_MAGIC);
        buf[4..8].copy_from_slice(&SEQ_VERSION.to_le_bytes());
        buf[8..16].copy_from_slice(&self.n.to_le_bytes());
        buf[16..24].copy_from_slice(&self.frames.to_le_bytes());
        buf
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut buf = [0u8; SEQ_HEADER_LEN as usize];
        r.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format("truncated header".into()),
            _ => Error::Io(e),
        })?;
        if buf[..4] != SEQ_MAGIC {
            return Err(Error::Format("bad magic, not a sequence file".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != SEQ_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(buf[8..16].try_into().unwrap());
        let frames = u64::from_le_bytes(buf[16..24].try_into().unwrap());
        Ok(SequenceHeader { n, frames })
    }
}

fn length_mismatch(expected: Option<u64>, got: u64) -> Error {
    match expected {
        Some(e) => Error::Format(format!(
            "payload length mismatch: header implies {e} bytes, found {got}"
        )),
        None => Error::Format("payload length mismatch: header size overflows".into()),
    }
}

/// Frame-at-a-time reader.
pub struct SequenceReader<R> {
    inner: R,
    header: SequenceHeader,
    read: u64,
    buf: Vec<u8>,
}

impl SequenceReader<BufReader<File>> {
    /// Open a file and check that its size matches the header.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        let size = file.metadata()?.len();
        let mut reader = SequenceReader::new(BufReader::new(file))?;
        let payload = size.saturating_sub(SEQ_HEADER_LEN);
        let expected = reader.header.payload_len();
        if expected != Some(payload) {
            return Err(length_mismatch(expected, payload));
        }
        reader.buf.reserve(reader.n() * 8);
        Ok(reader)
    }
}

impl<R: Read> SequenceReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let header = SequenceHeader::read_from(&mut inner)?;
        if header.payload_len().is_none() || usize::try_from(header.n).is_err() {
            return Err(length_mismatch(None, 0));
        }
        Ok(SequenceReader {
            inner,
            header,
            read: 0,
            buf: Vec::new(),
        })
    }

    pub fn header(&self) -> SequenceHeader {
        self.header
    }

    pub fn n(&self) -> usize {
        self.header.n as usize
    }

    pub fn len(&self) -> usize {
        self.header.frames as usize
    }

    pub fn is_empty(&self) -> bool {
        self.header.frames == 0
    }

    /// Next frame, or `None` after the last one.
    pub fn next_frame(&mut self) -> Result<Option<Array1<f64>>> {
        if self.read == self.header.frames {
            return Ok(None);
        }
        let n = self.n();
        self.buf.resize(n * 8, 0);
        if let Err(e) = self.inner.read_exact(&mut self.buf) {
            return Err(match e.kind() {
                std::io::ErrorKind::UnexpectedEof => {
                    length_mismatch(self.header.payload_len(), self.read * n as u64 * 8)
                }
                _ => Error::Io(e),
            });
        }
        self.read += 1;
        let frame = self
            .buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Some(frame))
    }

    /// Read every remaining frame.
    pub fn read_all(mut self) -> Result<FrameSequence> {
        let n = self.n();
        let remaining = (self.header.frames - self.read) as usize;
        let mut data = Array2::zeros((n, remaining));
        let mut c = 0;
        while let Some(f) = self.next_frame()? {
            data.column_mut(c).assign(&f);
            c += 1;
        }
        let mut probe = [0u8; 1];
        if self.inner.read(&mut probe)? != 0 {
            return Err(Error::Format(
                "payload length mismatch: trailing bytes after last frame".into(),
            ));
        }
        Ok(FrameSequence::new(data))
    }
}

/// Appending writer. The frame count in the header is patched on
/// [`SequenceWriter::finish`].
pub struct SequenceWriter<W: Write + Seek> {
    inner: W,
    n: usize,
    frames: u64,
    buf: Vec<u8>,
}

impl SequenceWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, n: usize) -> Result<Self> {
        SequenceWriter::new(BufWriter::new(File::create(path.as_ref())?), n)
    }
}

impl<W: Write + Seek> SequenceWriter<W> {
    pub fn new(mut inner: W, n: usize) -> Result<Self> {
        let header = SequenceHeader {
            n: n as u64,
            frames: 0,
        };
        inner.write_all(&header.encode())?;
        Ok(SequenceWriter {
            inner,
            n,
            frames: 0,
            buf: Vec::with_capacity(n * 8),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frames_written(&self) -> usize {
        self.frames as usize
    }

    pub fn push(&mut self, frame: ArrayView1<'_, f64>) -> Result<()> {
        if frame.len() != self.n {
            return Err(Error::dims(self.n, frame.len()));
        }
        self.buf.clear();
        for x in frame.iter() {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
        self.inner.write_all(&self.buf)?;
        self.frames += 1;
        Ok(())
    }

    /// Write the final frame count and flush. Returns the inner writer.
    pub fn finish(mut self) -> Result<W> {
        let header = SequenceHeader {
            n: self.n as u64,
            frames: self.frames,
        };
        let end = self.inner.stream_position()?;
        self.inner.seek(SeekFrom::Start(0))?;
        self.inner.write_all(&header.encode())?;
        self.inner.seek(SeekFrom::Start(end))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<FrameSequence> {
    SequenceReader::open(path)?.read_all()
}

pub fn write_sequence(path: impl AsRef<Path>, seq: &FrameSequence) -> Result<()> {
    let mut w = SequenceWriter::create(path, seq.n())?;
    for f in seq.frames() {
        w.push(f)?;
    }
    w.finish()?;
    Ok(())
}
