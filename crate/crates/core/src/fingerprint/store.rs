//! Binary fingerprint database: a 32-byte little-endian header followed by
//! packed rows of 64-bit words.
//!
//! ```text
//! magic   [u8; 4]  "TSFP"
//! version u32
//! width   u32
//! radius  u32
//! seed    u64
//! count   u64
//! rows    count * ceil(width / 64) * u64
//! ```

use std::io::{Read, Write};

use super::{Fingerprint, FingerprintConfig, FingerprintError};

pub const FP_MAGIC: [u8; 4] = *b"TSFP";
pub const FP_VERSION: u32 = 1;

pub fn write_fingerprints<W: Write>(
    mut out: W,
    config: &FingerprintConfig,
    fps: &[Fingerprint],
) -> Result<(), FingerprintError> {
    if let Some(bad) = fps.iter().find(|fp| fp.width() != config.width) {
        return Err(FingerprintError::WidthMismatch(config.width, bad.width()));
    }
    let width = u32::try_from(config.width).map_err(|_| FingerprintError::Format("width overflows u32".into()))?;
    out.write_all(&FP_MAGIC)?;
    out.write_all(&FP_VERSION.to_le_bytes())?;
    out.write_all(&width.to_le_bytes())?;
    out.write_all(&config.radius.to_le_bytes())?;
    out.write_all(&config.seed.to_le_bytes())?;
    out.write_all(&(fps.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(config.width.div_ceil(64) * 8);
    for fp in fps {
        buf.clear();
        for w in fp.words() {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(input: &mut R) -> Result<[u8; N], FingerprintError> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => FingerprintError::Format("truncated file".into()),
        _ => FingerprintError::Io(e),
    })?;
    Ok(buf)
}

pub fn read_fingerprints<R: Read>(mut input: R) -> Result<(FingerprintConfig, Vec<Fingerprint>), FingerprintError> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if magic != FP_MAGIC {
        return Err(FingerprintError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != FP_VERSION {
        return Err(FingerprintError::Format(format!("unsupported version {version}")));
    }
    let width = u32::from_le_bytes(read_array(&mut input)?) as usize;
    if width == 0 {
        return Err(FingerprintError::ZeroWidth);
    }
    let radius = u32::from_le_bytes(read_array(&mut input)?);
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let count = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let words = width.div_ceil(64);
    let mut fps = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let mut row = Vec::with_capacity(words);
        for _ in 0..words {
            row.push(u64::from_le_bytes(read_array(&mut input)?));
        }
        fps.push(Fingerprint::from_words(width, row));
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(FingerprintError::Format("trailing bytes after last row".into()));
    }
    Ok((FingerprintConfig { width, radius, seed }, fps))
}
