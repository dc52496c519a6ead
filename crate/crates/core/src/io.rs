//! Little-endian binary container helpers shared by the dataset, model and
//! trace file formats.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub(crate) struct LeWriter<W: Write> {
    inner: W,
}

impl<W: Write> LeWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b)?;
        Ok(())
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64_slice(&mut self, vs: &[f64]) -> Result<()> {
        let mut buf = Vec::with_capacity(vs.len().min(1 << 16) * 8);
        for chunk in vs.chunks(1 << 16) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            self.inner.write_all(&buf)?;
        }
        Ok(())
    }

    /// Length-prefixed (u32) list of f64.
    pub fn f64_list(&mut self, vs: &[f64]) -> Result<()> {
        self.u32(len_u32(vs.len())?)?;
        self.f64_slice(vs)
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub(crate) struct LeReader<R: Read> {
    inner: R,
    path: PathBuf,
}

impl<R: Read> LeReader<R> {
    pub fn new(inner: R, path: &Path) -> Self {
        Self {
            inner,
            path: path.to_path_buf(),
        }
    }

    pub fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Truncated {
                    path: self.path.clone(),
                }
            } else {
                Error::Io(e)
            }
        })
    }

    pub fn magic(&mut self, expected: &'static str) -> Result<()> {
        let mut buf = [0u8; 8];
        self.exact(&mut buf)?;
        if buf != expected.as_bytes() {
            return Err(Error::BadMagic {
                path: self.path.clone(),
                expected,
            });
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        Ok(b[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    pub fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut buf = vec![0u8; n.min(1 << 16) * 8];
        let mut left = n;
        while left > 0 {
            let take = left.min(1 << 16);
            let bytes = &mut buf[..take * 8];
            self.exact(bytes)?;
            out.extend(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap())),
            );
            left -= take;
        }
        Ok(out)
    }

    pub fn f64_list(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()? as usize;
        self.f64_vec(n)
    }

    /// Errors with `Dimension` if any bytes remain.
    pub fn expect_eof(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(Error::Dimension {
                path: self.path.clone(),
                detail: "trailing bytes after payload".into(),
            }),
        }
    }

    pub fn dimension(&self, detail: impl Into<String>) -> Error {
        Error::Dimension {
            path: self.path.clone(),
            detail: detail.into(),
        }
    }
}

pub(crate) fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::domain(format!("length {n} does not fit in u32")))
}

/// Hex SHA-256 of a byte stream.
pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a file's contents.
pub(crate) fn file_sha256(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}
