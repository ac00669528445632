//! Varint-length-delimited record streams and export file handles.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::bufread::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::codec::{encode_varint_to, MAX_VARINT_LEN};

/// Default per-record length cap (1 GiB).
pub const DEFAULT_MAX_RECORD_BYTES: u64 = 1 << 30;

/// Environment variable overriding [`DEFAULT_MAX_RECORD_BYTES`].
pub const MAX_RECORD_BYTES_ENV: &str = "CIFF_MAX_RECORD_BYTES";

const GZIP_MAGIC: [u8; 2] = [0x1F, 0x8B];

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("stream truncated inside a record")]
    TruncatedStream,
    #[error("record length {len} exceeds cap of {cap} bytes")]
    LengthOverflow { len: u64, cap: u64 },
    #[error("record length prefix is not a valid varint")]
    BadLengthPrefix,
    #[error("corrupt gzip stream: {0}")]
    CorruptGzip(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl StreamError {
    fn from_read(err: io::Error) -> Self {
        if let Some(inner) = err.get_ref().and_then(|e| e.downcast_ref::<GzipFault>()) {
            return StreamError::CorruptGzip(inner.0.clone());
        }
        match err.kind() {
            io::ErrorKind::UnexpectedEof => StreamError::TruncatedStream,
            _ => StreamError::Io(err),
        }
    }
}

/// Reads the cap from `CIFF_MAX_RECORD_BYTES`, falling back to the default
/// when unset or unparsable.
pub fn max_record_bytes_from_env() -> u64 {
    std::env::var(MAX_RECORD_BYTES_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_RECORD_BYTES)
}

/// Writes `record` preceded by its varint length.
pub fn write_delimited<W: Write + ?Sized>(record: &[u8], sink: &mut W) -> io::Result<()> {
    let mut prefix = Vec::with_capacity(MAX_VARINT_LEN);
    encode_varint_to(record.len() as u64, &mut prefix);
    sink.write_all(&prefix)?;
    sink.write_all(record)
}

/// Pulls length-delimited records off a byte stream.
pub struct DelimitedReader<R> {
    inner: R,
    max_len: u64,
    offset: u64,
}

impl<R: Read> DelimitedReader<R> {
    pub fn new(inner: R) -> Self {
        Self::with_max_len(inner, DEFAULT_MAX_RECORD_BYTES)
    }

    pub fn with_max_len(inner: R, max_len: u64) -> Self {
        Self { inner, max_len, offset: 0 }
    }

    /// Bytes consumed so far (of the decompressed stream).
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn next_byte(&mut self) -> Result<Option<u8>, StreamError> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(None),
                Ok(_) => {
                    self.offset += 1;
                    return Ok(Some(b[0]));
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(StreamError::from_read(e)),
            }
        }
    }

    /// Next record payload, or `None` on a clean end of stream at a record
    /// boundary.
    pub fn read_delimited(&mut self) -> Result<Option<Vec<u8>>, StreamError> {
        let mut len = 0u64;
        let mut i = 0;
        loop {
            let Some(byte) = self.next_byte()? else {
                return if i == 0 { Ok(None) } else { Err(StreamError::TruncatedStream) };
            };
            if i == MAX_VARINT_LEN || (i == MAX_VARINT_LEN - 1 && byte > 1) {
                return Err(StreamError::BadLengthPrefix);
            }
            len |= u64::from(byte & 0x7F) << (7 * i);
            i += 1;
            if byte & 0x80 == 0 {
                break;
            }
        }
        if len > self.max_len {
            return Err(StreamError::LengthOverflow { len, cap: self.max_len });
        }
        // read_to_end through `take` so a corrupt length never preallocates
        let mut payload = Vec::new();
        let got = (&mut self.inner).take(len).read_to_end(&mut payload).map_err(StreamError::from_read)?;
        self.offset += got as u64;
        if (got as u64) < len {
            return Err(StreamError::TruncatedStream);
        }
        Ok(Some(payload))
    }

    /// True when no further bytes remain.
    pub fn at_end(&mut self) -> Result<bool, StreamError> {
        let mut b = [0u8; 1];
        loop {
            match self.inner.read(&mut b) {
                Ok(0) => return Ok(true),
                Ok(_) => {
                    self.offset += 1;
                    return Ok(false);
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(StreamError::from_read(e)),
            }
        }
    }

    pub fn into_inner(self) -> R {
        self.inner
    }
}

#[derive(Debug)]
struct GzipFault(String);

impl fmt::Display for GzipFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for GzipFault {}

/// Decompressing reader that tags every failure as a gzip fault and treats
/// a stream ending before the gzip trailer as corrupt.
struct GzipSource<R: BufRead> {
    decoder: MultiGzDecoder<R>,
}

impl<R: BufRead> Read for GzipSource<R> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.decoder
            .read(buf)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, GzipFault(e.to_string())))
    }
}

/// Detects gzip by content: a stream that starts with `1F 8B` is
/// decompressed, anything else is passed through untouched.
pub fn sniff_gzip<R: Read + Send + 'static>(mut source: R) -> io::Result<Box<dyn Read + Send>> {
    let mut probe = [0u8; 2];
    let mut n = 0;
    while n < probe.len() {
        match source.read(&mut probe[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    let rejoined = BufReader::with_capacity(1 << 16, io::Cursor::new(probe[..n].to_vec()).chain(source));
    if n == 2 && probe == GZIP_MAGIC {
        Ok(Box::new(GzipSource { decoder: MultiGzDecoder::new(rejoined) }))
    } else {
        Ok(Box::new(rejoined))
    }
}

/// Opens an export file for reading, decompressing transparently when the
/// content is gzip.
pub fn open_export(path: &Path) -> Result<Box<dyn Read + Send>, StreamError> {
    let file = File::open(path)?;
    Ok(sniff_gzip(file)?)
}

/// Output sink for an export file; gzip-compressed when the path ends in
/// `.gz`. Call [`ExportSink::finish`] to flush the compressor trailer.
pub enum ExportSink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl ExportSink {
    pub fn create(path: &Path) -> io::Result<Self> {
        let file = BufWriter::new(File::create(path)?);
        let gz = path.extension().is_some_and(|e| e == "gz");
        Ok(if gz {
            ExportSink::Gzip(GzEncoder::new(file, Compression::default()))
        } else {
            ExportSink::Plain(file)
        })
    }

    pub fn finish(self) -> io::Result<()> {
        let mut inner = match self {
            ExportSink::Plain(w) => w,
            ExportSink::Gzip(gz) => gz.finish()?,
        };
        inner.flush()
    }
}

impl Write for ExportSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            ExportSink::Plain(w) => w.write(buf),
            ExportSink::Gzip(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            ExportSink::Plain(w) => w.flush(),
            ExportSink::Gzip(w) => w.flush(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn delimited(records: &[&[u8]]) -> Vec<u8> {
        let mut out = Vec::new();
        for r in records {
            write_delimited(r, &mut out).unwrap();
        }
        out
    }

    #[test]
    fn write_delimited_prefixes() {
        assert_eq!(delimited(&[&[1, 2, 3, 4]]), vec![4, 1, 2, 3, 4]);
        assert_eq!(delimited(&[&[]]), vec![0]);
        let big = vec![7u8; 300];
        let out = delimited(&[&big]);
        assert_eq!(&out[..2], &[0xAC, 0x02]);
        assert_eq!(out.len(), 302);
    }

    #[test]
    fn read_sequence_then_end() {
        let bytes = delimited(&[b"ab", b"", b"xyz"]);
        let mut r = DelimitedReader::new(Cursor::new(bytes));
        assert_eq!(r.read_delimited().unwrap().unwrap(), b"ab");
        assert_eq!(r.read_delimited().unwrap().unwrap(), b"");
        assert_eq!(r.read_delimited().unwrap().unwrap(), b"xyz");
        assert!(r.read_delimited().unwrap().is_none());
        assert!(r.read_delimited().unwrap().is_none());
    }

    #[test]
    fn truncation_is_distinct_from_end() {
        let mut r = DelimitedReader::new(Cursor::new(vec![5u8]));
        assert!(matches!(r.read_delimited(), Err(StreamError::TruncatedStream)));
        let mut r = DelimitedReader::new(Cursor::new(vec![5u8, 1, 2]));
        assert!(matches!(r.read_delimited(), Err(StreamError::TruncatedStream)));
        let mut r = DelimitedReader::new(Cursor::new(vec![0x80u8]));
        assert!(matches!(r.read_delimited(), Err(StreamError::TruncatedStream)));
    }

    #[test]
    fn length_cap() {
        let bytes = delimited(&[&[0u8; 10]]);
        let mut r = DelimitedReader::with_max_len(Cursor::new(bytes.clone()), 9);
        assert!(matches!(r.read_delimited(), Err(StreamError::LengthOverflow { len: 10, cap: 9 })));
        let mut r = DelimitedReader::with_max_len(Cursor::new(bytes), 10);
        assert_eq!(r.read_delimited().unwrap().unwrap().len(), 10);
        // a huge declared length in a tiny file
        let mut r = DelimitedReader::new(Cursor::new(vec![0xFF, 0xFF, 0xFF, 0xFF, 0x0F]));
        assert!(matches!(r.read_delimited(), Err(StreamError::LengthOverflow { .. })));
    }

    #[test]
    fn gzip_is_sniffed_by_content() {
        let payload = delimited(&[b"hello", b"world"]);
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(&payload).unwrap();
        let compressed = gz.finish().unwrap();

        let mut out = Vec::new();
        sniff_gzip(Cursor::new(compressed.clone())).unwrap().read_to_end(&mut out).unwrap();
        assert_eq!(out, payload);

        let mut plain = Vec::new();
        sniff_gzip(Cursor::new(payload.clone())).unwrap().read_to_end(&mut plain).unwrap();
        assert_eq!(plain, payload);

        let truncated = compressed[..compressed.len() - 6].to_vec();
        let mut r = DelimitedReader::new(sniff_gzip(Cursor::new(truncated)).unwrap());
        let err = loop {
            match r.read_delimited() {
                Ok(Some(_)) => continue,
                Ok(None) => panic!("truncated gzip read cleanly"),
                Err(e) => break e,
            }
        };
        assert!(matches!(err, StreamError::CorruptGzip(_)), "{err:?}");
    }

    #[test]
    fn tiny_inputs_sniff() {
        for bytes in [vec![], vec![0x1F], vec![0x00]] {
            let mut out = Vec::new();
            sniff_gzip(Cursor::new(bytes.clone())).unwrap().read_to_end(&mut out).unwrap();
            assert_eq!(out, bytes);
        }
        let mut out = Vec::new();
        assert!(sniff_gzip(Cursor::new(vec![0x1F, 0x8B])).unwrap().read_to_end(&mut out).is_err());
    }
}
