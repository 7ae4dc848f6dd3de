//! Model file format.
//!
//! ```text
//! "ELM1"                        4 bytes magic
//! header_len                    u64 little-endian
//! header                        header_len bytes of UTF-8 JSON (ModelHeader)
//! W                             f64 LE, the entries of W at mask positions,
//!                               row-major (ℓ·n values when fully connected,
//!                               ℓ·k when each unit reads k inputs)
//! B                             ℓ × f64 LE
//! mask                          ⌈ℓ·n / 8⌉ bytes, row-major bits, LSB first
//! β                             ℓ·m × f64 LE, row-major
//! RBF centers, widths           ℓ·n + ℓ × f64 LE, only when header.has_rbf
//! ```
//!
//! Values are widened to f64 on write, so an `f32` model round-trips exactly.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::config::ElmConfig;
use super::hidden::{HiddenLayer, InputWeights};
use super::model::ElmModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MODEL_MAGIC: &[u8; 4] = b"ELM1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub scalar: String,
    pub config: ElmConfig,
    pub class_names: Vec<String>,
    pub input_dim: usize,
    pub hidden_units: usize,
    pub classes: usize,
    pub fan_in: usize,
    pub has_rbf: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ModelHeader {
    fn payload_len(&self) -> usize {
        let (l, n, m) = (self.hidden_units, self.input_dim, self.classes);
        let mut floats = l * self.fan_in + l + l * m;
        if self.has_rbf {
            floats += l * n + l;
        }
        floats * 8 + (l * n).div_ceil(8)
    }
}

/// Byte-slice reader that reports truncation instead of panicking.
pub(crate) struct SliceReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> SliceReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        if end > self.buf.len() {
            return Err(Error::Truncated(what));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn floats<T: Real>(&mut self, count: usize, what: &'static str) -> Result<Vec<T>> {
        let bytes = self.take(count.checked_mul(8).ok_or(Error::Truncated(what))?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn put_floats<T: Real>(out: &mut Vec<u8>, values: impl IntoIterator<Item = T>) {
    for v in values {
        out.extend_from_slice(&v.to_f64_exact().to_le_bytes());
    }
}

impl<T: Real> ElmModel<T> {
    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            format_version: FORMAT_VERSION,
            scalar: T::NAME.to_string(),
            config: self.config.clone(),
            class_names: self.class_names.clone(),
            input_dim: self.hidden.input_dim(),
            hidden_units: self.hidden.units(),
            classes: self.class_names.len(),
            fan_in: self.hidden.fan_in(),
            has_rbf: self.hidden.rbf().is_some(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = self.header();
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(12 + json.len() + header.payload_len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);

        match self.hidden.weights() {
            InputWeights::Dense(w) => put_floats(&mut out, w.iter().copied()),
            InputWeights::Sparse { weights, .. } => put_floats(&mut out, weights.iter().copied()),
        }
        put_floats(&mut out, self.hidden.bias().iter().copied());

        let mask = self.hidden.mask();
        let mut packed = vec![0u8; mask.len().div_ceil(8)];
        for (i, &bit) in mask.iter().enumerate() {
            if bit != 0 {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&packed);

        put_floats(&mut out, self.beta.iter().copied());
        if let Some(rbf) = self.hidden.rbf() {
            put_floats(&mut out, rbf.centers.iter().copied());
            put_floats(&mut out, rbf.widths.iter().copied());
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = SliceReader::new(bytes);
        let model = Self::read_one(&mut r)?;
        if r.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes after model", r.remaining())));
        }
        Ok(model)
    }

    pub(crate) fn read_one(r: &mut SliceReader<'_>) -> Result<Self> {
        let header = read_header(r)?;
        if header.scalar != T::NAME {
            return Err(Error::Format(format!(
                "scalar type mismatch: file holds {}, requested {}",
                header.scalar,
                T::NAME
            )));
        }
        let (l, n, m, k) = (header.hidden_units, header.input_dim, header.classes, header.fan_in);
        if l == 0 || n == 0 || m == 0 || k == 0 || k > n {
            return Err(Error::Format("header dimensions out of range".into()));
        }
        if header.class_names.len() != m || header.config.hidden_neurons != l {
            return Err(Error::Format("header fields disagree with each other".into()));
        }

        let w_vals = r.floats::<T>(l * k, "input weights")?;
        let bias = Array1::from(r.floats::<T>(l, "biases")?);
        let mask_bytes = r.take((l * n).div_ceil(8), "connectivity mask")?;
        let bit = |i: usize| mask_bytes[i / 8] >> (i % 8) & 1 == 1;

        let hidden = if k == n {
            if !(0..l * n).all(bit) {
                return Err(Error::Format("dense layer with incomplete mask".into()));
            }
            let w = Array2::from_shape_vec((l, n), w_vals).expect("shape checked");
            HiddenLayer::from_dense(w, bias)?
        } else {
            let mut indices = Array2::zeros((l, k));
            for u in 0..l {
                let picked: Vec<usize> = (0..n).filter(|&i| bit(u * n + i)).collect();
                if picked.len() != k {
                    return Err(Error::Format(format!(
                        "mask row {u} has {} connections, header says {k}",
                        picked.len()
                    )));
                }
                for (j, idx) in picked.into_iter().enumerate() {
                    indices[[u, j]] = idx;
                }
            }
            let w = Array2::from_shape_vec((l, k), w_vals).expect("shape checked");
            HiddenLayer::from_sparse(n, indices, w, bias)?
        };

        let beta = Array2::from_shape_vec((l, m), r.floats::<T>(l * m, "output weights")?)
            .expect("shape checked");
        let hidden = if header.has_rbf {
            let centers = Array2::from_shape_vec((l, n), r.floats::<T>(l * n, "rbf centers")?)
                .expect("shape checked");
            let widths = Array1::from(r.floats::<T>(l, "rbf widths")?);
            hidden.with_rbf(centers, widths)?
        } else {
            hidden
        };

        let mut model = ElmModel::from_parts(header.config, hidden, beta, header.class_names)?;
        model.metadata = header.metadata;
        Ok(model)
    }
}

/// Reads magic and JSON header, leaving `r` at the payload.
pub(crate) fn read_header(r: &mut SliceReader<'_>) -> Result<ModelHeader> {
    let magic = r.take(4, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            std::str::from_utf8(MODEL_MAGIC).unwrap()
        )));
    }
    let len = r.u64("header length")? as usize;
    let json = r.take(len, "header")?;
    let header: ModelHeader = serde_json::from_slice(json)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {} (this build reads {})",
            header.format_version, FORMAT_VERSION
        )));
    }
    Ok(header)
}

/// Parses only the header of a model file.
pub fn read_model_header(bytes: &[u8]) -> Result<ModelHeader> {
    read_header(&mut SliceReader::new(bytes))
}
