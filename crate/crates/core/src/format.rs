//! Model file format, version 1. All multi-byte fields are little-endian.
//!
//! | field            | type      | notes                                              |
//! |------------------|-----------|----------------------------------------------------|
//! | magic            | 4 bytes   | `IELM`                                             |
//! | version          | u16       | 1                                                  |
//! | weight kind      | u8        | 0 continuous, 1 ternary, 2 integer                 |
//! | preprocessing    | u8        | bit 0 zero-mean, bit 1 ℓ₂ normalize                |
//! | n, L, m          | 3 × u32   | inputs, hidden units, classes                      |
//! | γ                | f64       |                                                    |
//! | seed             | u64       | seed the input weights were drawn from             |
//! | target encoding  | u8        | 0 = one-hot {0, 1}                                 |
//! | PRNG id length   | u8        | k                                                  |
//! | PRNG id          | k bytes   | ASCII                                              |
//! | *integer only*   |           | τ (f64), ladder step (u32), input lo, hi (2 × i32) |
//! | W                | n·L       | f64 (continuous) or i8 (ternary, integer)          |
//! | β                | L·m       | f64 (continuous, ternary) or i32 (integer)         |
//!
//! Kinds 0 and 1 hold a [`FloatModel`]; kind 2 holds a [`QuantizedModel`].
//! Anything after β is an error.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::Preprocessing;
use crate::elm::{FloatModel, ModelMeta, TernaryWeights, WeightMatrix};
use crate::error::{Error, Result};
use crate::int_infer::QuantizedModel;
use crate::linalg::DenseMatrix;
use crate::quantize::IntegerBeta;

pub const MAGIC: &[u8; 4] = b"IELM";
pub const VERSION: u16 = 1;

const KIND_CONTINUOUS: u8 = 0;
const KIND_TERNARY: u8 = 1;
const KIND_INTEGER: u8 = 2;

const TARGET_ONEHOT_01: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Float(FloatModel),
    Quantized(QuantizedModel),
}

impl ModelFile {
    pub fn inputs(&self) -> usize {
        match self {
            ModelFile::Float(m) => m.inputs(),
            ModelFile::Quantized(m) => m.inputs(),
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            ModelFile::Float(m) => m.hidden(),
            ModelFile::Quantized(m) => m.hidden(),
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            ModelFile::Float(m) => m.classes(),
            ModelFile::Quantized(m) => m.classes(),
        }
    }

    pub fn meta(&self) -> &ModelMeta {
        match self {
            ModelFile::Float(m) => &m.meta,
            ModelFile::Quantized(m) => &m.meta,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelFile::Float(m) => match m.weights() {
                WeightMatrix::Continuous(_) => "continuous",
                WeightMatrix::Ternary(_) => "ternary",
            },
            ModelFile::Quantized(_) => "integer",
        }
    }
}

fn prep_bits(p: Preprocessing) -> u8 {
    u8::from(p.zero_mean) | (u8::from(p.l2_normalize) << 1)
}

#[allow(clippy::too_many_arguments)]
fn write_header(
    out: &mut Vec<u8>,
    kind: u8,
    n: usize,
    l: usize,
    m: usize,
    gamma: f64,
    meta: &ModelMeta,
) -> Result<()> {
    let id = meta.prng_id.as_bytes();
    if id.len() > 255 || !meta.prng_id.is_ascii() {
        return Err(Error::InvalidArgument(format!("PRNG id {:?} must be ASCII, at most 255 bytes", meta.prng_id)));
    }
    for (what, v) in [("n", n), ("L", l), ("m", m)] {
        if v > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("{what} = {v} does not fit in u32")));
        }
    }
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.push(prep_bits(meta.preprocessing));
    for v in [n, l, m] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&gamma.to_le_bytes());
    out.extend_from_slice(&meta.seed.to_le_bytes());
    out.push(TARGET_ONEHOT_01);
    out.push(id.len() as u8);
    out.extend_from_slice(id);
    Ok(())
}

pub fn encode_float(model: &FloatModel) -> Result<Vec<u8>> {
    let kind = match model.weights() {
        WeightMatrix::Continuous(_) => KIND_CONTINUOUS,
        WeightMatrix::Ternary(_) => KIND_TERNARY,
    };
    let mut out = Vec::new();
    write_header(
        &mut out,
        kind,
        model.inputs(),
        model.hidden(),
        model.classes(),
        model.gamma(),
        &model.meta,
    )?;
    match model.weights() {
        WeightMatrix::Continuous(w) => {
            for v in w.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        WeightMatrix::Ternary(t) => out.extend(t.as_slice().iter().map(|&v| v as u8)),
    }
    for v in model.beta().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode_quantized(model: &QuantizedModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_header(
        &mut out,
        KIND_INTEGER,
        model.inputs(),
        model.hidden(),
        model.classes(),
        model.gamma(),
        &model.meta,
    )?;
    let beta = model.beta();
    out.extend_from_slice(&beta.tau().to_le_bytes());
    out.extend_from_slice(&beta.ladder_step().to_le_bytes());
    let (lo, hi) = model.input_range();
    out.extend_from_slice(&lo.to_le_bytes());
    out.extend_from_slice(&hi.to_le_bytes());
    out.extend(model.weights().as_slice().iter().map(|&v| v as u8));
    for &v in beta.values() {
        // QuantizedModel guarantees 32-bit magnitudes.
        out.extend_from_slice(&(v as i32).to_le_bytes());
    }
    Ok(out)
}

pub fn encode(model: &ModelFile) -> Result<Vec<u8>> {
    match model {
        ModelFile::Float(m) => encode_float(m),
        ModelFile::Quantized(m) => encode_quantized(m),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(self.path, self.bytes.len() as u64, format!("truncated while reading {what}"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(count.saturating_mul(8), what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn err(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::format(self.path, offset as u64, msg)
    }
}

/// Parses a model file image. `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<ModelFile> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4, "magic")? != MAGIC {
        return Err(r.err(0, "bad magic, expected IELM"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(r.err(4, format!("unsupported format version {version}")));
    }
    let kind = r.u8("weight kind")?;
    let prep = r.u8("preprocessing flags")?;
    if prep & !0b11 != 0 {
        return Err(r.err(7, format!("unknown preprocessing flags {prep:#04x}")));
    }
    let preprocessing = Preprocessing {
        zero_mean: prep & 1 != 0,
        l2_normalize: prep & 2 != 0,
    };
    let n = r.u32("n")? as usize;
    let l = r.u32("L")? as usize;
    let m = r.u32("m")? as usize;
    let gamma = r.f64("gamma")?;
    let seed = r.u64("seed")?;
    let enc_at = r.pos;
    let encoding = r.u8("target encoding")?;
    if encoding != TARGET_ONEHOT_01 {
        return Err(r.err(enc_at, format!("unknown target encoding {encoding}")));
    }
    let id_len = r.u8("PRNG id length")? as usize;
    let id_at = r.pos;
    let prng_id = std::str::from_utf8(r.take(id_len, "PRNG id")?)
        .ok()
        .filter(|s| s.is_ascii())
        .ok_or_else(|| r.err(id_at, "PRNG id is not ASCII"))?
        .to_string();
    let meta = ModelMeta {
        seed,
        preprocessing,
        prng_id,
    };
    let wrap = |e: Error| e.context(format!("{}", path.display()));

    let model = match kind {
        KIND_CONTINUOUS | KIND_TERNARY => {
            let weights = if kind == KIND_CONTINUOUS {
                WeightMatrix::Continuous(DenseMatrix::from_vec(n, l, r.f64s(n * l, "weights")?).map_err(wrap)?)
            } else {
                let raw = r.take(n * l, "weights")?;
                WeightMatrix::Ternary(
                    TernaryWeights::from_vec(n, l, raw.iter().map(|&b| b as i8).collect()).map_err(wrap)?,
                )
            };
            let beta = DenseMatrix::from_vec(l, m, r.f64s(l * m, "beta")?).map_err(wrap)?;
            ModelFile::Float(FloatModel::new(weights, beta, gamma, meta).map_err(wrap)?)
        }
        KIND_INTEGER => {
            let tau = r.f64("tau")?;
            let step = r.u32("ladder step")?;
            let lo = r.i32("input lo")?;
            let hi = r.i32("input hi")?;
            let raw = r.take(n * l, "weights")?;
            let weights = TernaryWeights::from_vec(n, l, raw.iter().map(|&b| b as i8).collect()).map_err(wrap)?;
            let values = r
                .take(l * m * 4, "beta")?
                .chunks_exact(4)
                .map(|c| i64::from(i32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            let beta = IntegerBeta::new(l, m, values, tau, step).map_err(wrap)?;
            ModelFile::Quantized(QuantizedModel::new(weights, beta, (lo, hi), gamma, meta).map_err(wrap)?)
        }
        other => return Err(r.err(6, format!("unknown weight kind {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(r.err(r.pos, "trailing bytes after output weights"));
    }
    Ok(model)
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Writes the model. Refuses to replace an existing file unless `force`.
pub fn write_model(path: &Path, model: &ModelFile, force: bool) -> Result<()> {
    let bytes = encode(model)?;
    write_bytes(path, &bytes, force)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    let mut opts = fs::OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut f = opts.open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elm::{gen_weights, WeightDistribution};

    fn float_model(dist: WeightDistribution) -> FloatModel {
        let w = gen_weights(dist, 4, 3, 11).unwrap();
        let beta = DenseMatrix::from_vec(3, 2, vec![0.5, -0.25, 1.5, 2.0, -3.0, 0.125]).unwrap();
        let meta = ModelMeta {
            seed: 11,
            preprocessing: Preprocessing::ZERO_MEAN_L2,
            ..ModelMeta::default()
        };
        FloatModel::new(w, beta, 1.0, meta).unwrap()
    }

    #[test]
    fn float_models_round_trip() {
        for dist in [WeightDistribution::UniformOpen01, WeightDistribution::Ternary] {
            let m = ModelFile::Float(float_model(dist));
            let bytes = encode(&m).unwrap();
            let back = decode(&bytes, Path::new("m")).unwrap();
            assert_eq!(back, m);
            assert_eq!(encode(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn quantized_round_trip() {
        let fm = float_model(WeightDistribution::Ternary);
        let q = ModelFile::Quantized(QuantizedModel::from_float(&fm, (0, 255)).unwrap());
        let bytes = encode(&q).unwrap();
        assert_eq!(&bytes[..4], b"IELM");
        assert_eq!(bytes[6], 2);
        assert_eq!(decode(&bytes, Path::new("q")).unwrap(), q);
    }

    #[test]
    fn header_layout() {
        let bytes = encode_float(&float_model(WeightDistribution::Ternary)).unwrap();
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(bytes[6], 1);
        assert_eq!(bytes[7], 0b11);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 1.0);
        assert_eq!(u64::from_le_bytes(bytes[28..36].try_into().unwrap()), 11);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = encode_float(&float_model(WeightDistribution::Ternary)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, Path::new("m")), Err(Error::Format { offset: 0, .. })));
        assert!(decode(&bytes[..bytes.len() - 1], Path::new("m")).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode(&long, Path::new("m")).is_err());
        let mut kind = bytes;
        kind[6] = 9;
        assert!(decode(&kind, Path::new("m")).is_err());
    }
}
