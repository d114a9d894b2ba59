//! Binary checkpoints.
//!
//! Layout (little-endian): magic `EMHD`, `u32` version, `u64` n, `u64` K,
//! `f64` α μ r s t, `u64` seed, `u64` path_id, `u64` payload length, then
//! the payload: the field's coefficients on the half lattice (zero mode and
//! `k > 0` lexicographically, three `(re, im)` pairs per mode), followed by
//! the noise basis (`f64` γ, `f64` s, and per element a `u8` flag,
//! `i32 × 3` wavevector, `f64` amplitude and its coefficients).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseBasis, NoiseElement};
use crate::spectral::{c64, Mode, SpectralField};

pub const MAGIC: &[u8; 4] = b"EMHD";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 * 2 + 8 * 5 + 8 * 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub n: u64,
    pub k: u64,
    pub alpha: f64,
    pub mu: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub seed: u64,
    pub path_id: u64,
    pub payload_len: u64,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub b: SpectralField,
    pub basis: NoiseBasis,
}

/// Run parameters stored alongside a state.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CheckpointMeta {
    pub alpha: f64,
    pub mu: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub seed: u64,
    pub path_id: u64,
}

fn half_modes(n: usize) -> Vec<Mode> {
    let n = n as i32;
    let mut out = Vec::new();
    for a in -n..=n {
        for b in -n..=n {
            for c in -n..=n {
                let k = Mode([a, b, c]);
                if k.norm2() <= (n * n) as i64 && (k == Mode::ZERO || k.is_positive_half()) {
                    out.push(k);
                }
            }
        }
    }
    out
}

fn put_field(out: &mut Vec<u8>, f: &SpectralField) {
    for k in half_modes(f.n()) {
        for z in f.get(k) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
}

fn field_bytes(n: usize) -> usize {
    half_modes(n).len() * 48
}

pub fn encode(meta: &CheckpointMeta, b: &SpectralField, basis: &NoiseBasis) -> Vec<u8> {
    let n = b.n();
    let mut payload = Vec::new();
    put_field(&mut payload, b);
    payload.extend_from_slice(&basis.gamma.to_le_bytes());
    payload.extend_from_slice(&basis.s.to_le_bytes());
    for e in basis.elements() {
        let field = if e.field().n() == n { e.field().clone() } else { e.field().resized(n) };
        payload.push(e.wavevector.is_some() as u8);
        for c in e.wavevector.unwrap_or(Mode::ZERO).0 {
            payload.extend_from_slice(&c.to_le_bytes());
        }
        payload.extend_from_slice(&e.amplitude.to_le_bytes());
        put_field(&mut payload, &field);
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(basis.len() as u64).to_le_bytes());
    for x in [meta.alpha, meta.mu, meta.r, meta.s, meta.t] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&meta.seed.to_le_bytes());
    out.extend_from_slice(&meta.path_id.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        if self.pos + len > self.buf.len() {
            return Err(format!("unexpected end of data at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> std::result::Result<i32, String> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn field(&mut self, n: usize) -> std::result::Result<SpectralField, String> {
        let mut f = SpectralField::zeros(n);
        for k in half_modes(n) {
            let mut v = [Complex64::new(0.0, 0.0); 3];
            for z in v.iter_mut() {
                let re = self.f64()?;
                let im = self.f64()?;
                *z = c64(re, im);
            }
            if k == Mode::ZERO && v.iter().any(|z| z.im != 0.0) {
                return Err("zero mode has a nonzero imaginary part".into());
            }
            f.set_real_mode(k, v);
        }
        Ok(f)
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let corrupt = |reason: String| Error::CorruptCheckpoint { path: path.to_path_buf(), reason };
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.take(4).map_err(corrupt)?;
    if magic != MAGIC {
        return Err(corrupt(format!("bad magic {magic:?}")));
    }
    let version = r.u32().map_err(corrupt)?;
    if version != VERSION {
        return Err(Error::CheckpointVersion { found: version, expected: VERSION });
    }
    let mut h = || -> std::result::Result<CheckpointHeader, String> {
        Ok(CheckpointHeader {
            version,
            n: r.u64()?,
            k: r.u64()?,
            alpha: r.f64()?,
            mu: r.f64()?,
            r: r.f64()?,
            s: r.f64()?,
            t: r.f64()?,
            seed: r.u64()?,
            path_id: r.u64()?,
            payload_len: r.u64()?,
        })
    };
    let header = h().map_err(corrupt)?;
    if header.n == 0 || header.n > 1024 {
        return Err(corrupt(format!("implausible truncation radius {}", header.n)));
    }
    let n = header.n as usize;
    let expected = field_bytes(n) as u64 * (1 + header.k) + 16 + header.k * 21;
    if header.payload_len != expected {
        return Err(corrupt(format!("payload length {} does not match the expected {expected}", header.payload_len)));
    }
    if (bytes.len() - HEADER_LEN) as u64 != header.payload_len {
        return Err(corrupt(format!(
            "file holds {} payload bytes, header declares {}",
            bytes.len() - HEADER_LEN,
            header.payload_len
        )));
    }
    let mut body = || -> std::result::Result<(SpectralField, NoiseBasis), String> {
        let b = r.field(n)?;
        let gamma = r.f64()?;
        let s = r.f64()?;
        let mut elements = Vec::with_capacity(header.k as usize);
        for _ in 0..header.k {
            let flag = r.u8()?;
            let wv = Mode([r.i32()?, r.i32()?, r.i32()?]);
            let amplitude = r.f64()?;
            let mut e = NoiseElement::from_field(r.field(n)?);
            e.wavevector = (flag != 0).then_some(wv);
            e.amplitude = amplitude;
            elements.push(e);
        }
        Ok((b, NoiseBasis::from_elements(elements, gamma, s)))
    };
    let (b, basis) = body().map_err(corrupt)?;
    Ok(Checkpoint { header, b, basis })
}

pub fn write_checkpoint(path: &Path, meta: &CheckpointMeta, b: &SpectralField, basis: &NoiseBasis) -> Result<()> {
    std::fs::write(path, encode(meta, b, basis))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode(&std::fs::read(path)?, path)
}

/// Read and re-embed at radius `n`: zero-padding when `n` is larger,
/// sharp truncation when smaller.
pub fn read_checkpoint_resized(path: &Path, n: usize) -> Result<Checkpoint> {
    let mut c = read_checkpoint(path)?;
    c.b = c.b.resized(n);
    c.basis = c.basis.resized(n);
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::build_noise_basis;
    use crate::random::random_field;
    use crate::spectral::sobolev_norm;

    fn sample() -> (CheckpointMeta, SpectralField, NoiseBasis) {
        let meta = CheckpointMeta { alpha: 1.5, mu: 1.0, r: 0.7, s: 3.1, t: 0.25, seed: 9, path_id: 3 };
        let b = random_field(4, 2, 1.0, true);
        let basis = build_noise_basis(3, 6.0, 3.0, 4, 0).unwrap().scaled(0.5);
        (meta, b, basis)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.emhd");
        let (meta, b, basis) = sample();
        write_checkpoint(&path, &meta, &b, &basis).unwrap();
        let c = read_checkpoint(&path).unwrap();
        assert_eq!(c.b, b);
        assert_eq!(c.header.t, 0.25);
        assert_eq!((c.header.seed, c.header.path_id, c.header.k), (9, 3, 3));
        for (a, e) in c.basis.elements().iter().zip(basis.elements()) {
            assert_eq!(a.field(), e.field());
            assert_eq!(a.wavevector, e.wavevector);
            assert_eq!(a.amplitude, e.amplitude);
        }
        assert_eq!(encode(&meta, &c.b, &c.basis), std::fs::read(&path).unwrap());
    }

    #[test]
    fn damaged_files_are_rejected() {
        let (meta, b, basis) = sample();
        let bytes = encode(&meta, &b, &basis);
        let p = Path::new("x");
        assert!(matches!(decode(&bytes[..bytes.len() - 5], p), Err(Error::CorruptCheckpoint { .. })));
        assert!(matches!(decode(&bytes[..10], p), Err(Error::CorruptCheckpoint { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, p), Err(Error::CorruptCheckpoint { .. })));
        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        let err = decode(&v2, p).unwrap_err();
        assert!(matches!(err, Error::CheckpointVersion { found: 2, expected: 1 }));
        assert!(err.to_string().contains("version 2"));
    }

    #[test]
    fn cross_resolution_read_embeds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("small.emhd");
        let (meta, b, basis) = sample();
        write_checkpoint(&path, &meta, &b, &basis).unwrap();
        let c = read_checkpoint_resized(&path, 8).unwrap();
        assert_eq!(c.b.n(), 8);
        for &(idx, k) in c.b.ball_modes().iter() {
            let expect = if k.norm2() <= 16 { b.get(k) } else { [c64(0.0, 0.0); 3] };
            assert_eq!(c.b.at(idx), expect);
        }
        for s in [0.0, 1.0, 3.1] {
            let (x, y) = (sobolev_norm(&c.b, s, false), sobolev_norm(&b, s, false));
            assert!((x - y).abs() <= 1e-14 * y);
        }
        assert_eq!(c.basis.elements()[0].field().n(), 8);
    }
}
