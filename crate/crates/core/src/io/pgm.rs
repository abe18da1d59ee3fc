use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;

use super::seq::SequenceWriter;
use crate::error::{Error, Result};

/// A greyscale image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Row-major raster order as `f64` in `[0, 255]`.
    pub fn to_vector(&self) -> Array1<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PGM: bad {what}")))
    }
}

/// Parse a binary (P5) PGM with maxval 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::Format("PGM: expected P5 magic".into()));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    let cols = cur.number("width")?;
    let rows = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("PGM: maxval {maxval}, only 255 is supported")));
    }
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("PGM: missing whitespace after header".into()));
    }
    let start = cur.pos + 1;
    let len = rows * cols;
    if rows == 0 || cols == 0 {
        return Err(Error::Format("PGM: empty image".into()));
    }
    if bytes.len() < start + len {
        return Err(Error::Format(format!(
            "PGM: expected {len} pixel bytes, found {}",
            bytes.len() - start
        )));
    }
    Ok(GrayImage {
        rows,
        cols,
        pixels: bytes[start..start + len].to_vec(),
    })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    parse_pgm(&fs::read(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols, img.rows).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

/// `*.pgm` files of `dir` in lexicographic order.
pub fn list_pgm_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir.as_ref())? {
        let path = entry?.path();
        let is_pgm = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Summary of an ingest run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestSummary {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
}

/// Convert a directory of equally sized P5 frames into a sequence file, one
/// row-major raster column per frame. Frames are streamed.
pub fn ingest_pgm_dir(dir: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<IngestSummary> {
    let dir = dir.as_ref();
    let files = list_pgm_files(dir)?;
    let Some(first) = files.first() else {
        return Err(Error::Usage(format!("no .pgm files in {}", dir.display())));
    };
    let img = read_pgm(first)?;
    let (rows, cols) = (img.rows, img.cols);
    let mut writer = SequenceWriter::create(out, rows * cols)?;
    writer.push(img.to_vector().view())?;
    for path in &files[1..] {
        let img = read_pgm(path)?;
        if (img.rows, img.cols) != (rows, cols) {
            return Err(Error::Format(format!(
                "{}: {}x{} frame, expected {rows}x{cols}",
                path.display(),
                img.rows,
                img.cols
            )));
        }
        writer.push(img.to_vector().view())?;
    }
    writer.finish()?;
    Ok(IngestSummary {
        rows,
        cols,
        frames: files.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::read_sequence;
    use ndarray::array;

    fn img(rows: usize, cols: usize, pixels: Vec<u8>) -> GrayImage {
        GrayImage { rows, cols, pixels }
    }

    #[test]
    fn two_by_two_raster_order() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path().join("a.pgm"), &img(2, 2, vec![0, 255, 0, 255])).unwrap();
        let out = dir.path().join("o.seq");
        let s = ingest_pgm_dir(dir.path(), &out).unwrap();
        assert_eq!((s.rows, s.cols, s.frames), (2, 2, 1));
        let seq = read_sequence(&out).unwrap();
        assert_eq!(seq.frame(0), array![0.0, 255.0, 0.0, 255.0]);
    }

    #[test]
    fn identical_frames() {
        let dir = tempfile::tempdir().unwrap();
        let frame = img(3, 2, vec![1, 2, 3, 4, 5, 6]);
        for name in ["f2.pgm", "f0.pgm", "f1.pgm"] {
            write_pgm(dir.path().join(name), &frame).unwrap();
        }
        let out = dir.path().join("o.seq");
        ingest_pgm_dir(dir.path(), &out).unwrap();
        let seq = read_sequence(&out).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.frame(0), seq.frame(2));
    }

    #[test]
    fn lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path().join("b.pgm"), &img(1, 1, vec![2])).unwrap();
        write_pgm(dir.path().join("a.pgm"), &img(1, 1, vec![1])).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let out = dir.path().join("o.seq");
        ingest_pgm_dir(dir.path(), &out).unwrap();
        assert_eq!(read_sequence(&out).unwrap().matrix(), array![[1.0, 2.0]]);
    }

    #[test]
    fn empty_dir_and_mixed_dims() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o.seq");
        assert_eq!(ingest_pgm_dir(dir.path(), &out).unwrap_err().exit_code(), 2);
        write_pgm(dir.path().join("a.pgm"), &img(1, 2, vec![1, 2])).unwrap();
        write_pgm(dir.path().join("b.pgm"), &img(2, 1, vec![1, 2])).unwrap();
        assert_eq!(ingest_pgm_dir(dir.path(), &out).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn header_comments_and_errors() {
        let bytes = b"P5 # c\n2 # w\n1\n255\n\x07\x08";
        assert_eq!(parse_pgm(bytes).unwrap().pixels, vec![7, 8]);
        assert!(parse_pgm(b"P2\n1 1\n255\n1").is_err());
        assert!(parse_pgm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\0").is_err());
    }
}
