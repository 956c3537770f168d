//! Binary model bundle.
//!
//! ```text
//! "SLUT"  version:u16=1  flags:u16  T:u16  M:u16  N:u16  reserved:u16
//! T·M·N³·3 × f32        cells, scenario-major, each LUT red-major
//! arch:u16  count:u64  count × f32   predictor parameters
//! crc32:u32             IEEE CRC of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use crate::error::{invalid_arg, Error, Result};
use crate::lut::{Lut3d, LutBank};
use crate::model::Model;
use crate::predictor::Predictor;

pub const BUNDLE_MAGIC: &[u8; 4] = b"SLUT";
pub const BUNDLE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 * 6;

fn dim_u16(name: &str, v: usize) -> Result<u16> {
    u16::try_from(v).map_err(|_| invalid_arg!("{name}={v} does not fit the bundle header"))
}

pub fn encode_bundle(model: &Model<f32>) -> Result<Vec<u8>> {
    let bank = &model.bank;
    let params = model.predictor.params();
    if let Predictor::Conv(p) = &model.predictor {
        if !p.arch().is_standard() {
            return Err(invalid_arg!("only the standard conv predictor can be stored in a bundle"));
        }
    }
    let cells = bank.luts().len() * bank.lut_len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * cells + 10 + 4 * params.len() + 4);
    out.extend_from_slice(BUNDLE_MAGIC);
    for v in [
        BUNDLE_VERSION,
        0,
        dim_u16("T", bank.scenarios())?,
        dim_u16("M", bank.categories())?,
        dim_u16("N", bank.n_bins())?,
        0,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for lut in bank.luts() {
        for v in lut.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&model.predictor.arch_id().to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("bundle payload is truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| Error::Format("length overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_bundle(bytes: &[u8]) -> Result<Model<f32>> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Format(format!("bundle is only {} bytes", bytes.len())));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut cur = Cursor { bytes: body, pos: 0 };
    if cur.take(4)? != BUNDLE_MAGIC {
        return Err(Error::Format("not a LUT bundle (bad magic)".into()));
    }
    let version = cur.u16()?;
    if version != BUNDLE_VERSION {
        return Err(Error::Format(format!("unsupported bundle version {version}")));
    }
    let _flags = cur.u16()?;
    let t = cur.u16()? as usize;
    let m = cur.u16()? as usize;
    let n = cur.u16()? as usize;
    let _reserved = cur.u16()?;
    if t == 0 || m == 0 || n < 2 {
        return Err(Error::Format(format!("invalid bundle dimensions T={t} M={m} N={n}")));
    }
    let lut_len = n * n * n * 3;
    let mut luts = Vec::with_capacity(t * m);
    for _ in 0..t * m {
        luts.push(Lut3d::from_values(n, cur.f32s(lut_len)?)?);
    }
    let bank = LutBank::from_luts(t, m, luts)?;
    let arch = cur.u16()?;
    let count = usize::try_from(cur.u64()?).map_err(|_| Error::Format("parameter count overflow".into()))?;
    let params = cur.f32s(count)?;
    if cur.pos != body.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the predictor section",
            body.len() - cur.pos
        )));
    }
    let predictor =
        Predictor::from_parts(arch, t, m, params).map_err(|e| Error::Format(e.to_string()))?;
    Model::new(bank, predictor)
}

pub fn save_bundle(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_bundle(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let path = path.as_ref();
    decode_bundle(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
