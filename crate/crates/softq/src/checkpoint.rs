//! Versioned binary parameter checkpoints.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic "SQCK" | u32 version | u32 state_dim | u32 action_dim | u32 n_sections
//! per section: u32 name_len | name utf-8 | u8 output_activation
//!              u32 n_layers | per layer: u32 in | u32 out
//!              in·out f64 weights (row-major) | out f64 biases
//! ```
//!
//! `f64` payloads are written bit-exactly, so save → load round-trips are
//! exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SoftqError};
use crate::nn::{Activation, Layer, MlpParams};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"SQCK";
const VERSION: u32 = 1;

/// Named parameter bundles plus the environment dims they were trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state_dim: usize,
    pub action_dim: usize,
    pub sections: Vec<(String, MlpParams)>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&MlpParams> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, VERSION);
        put_u32(&mut buf, self.state_dim as u32);
        put_u32(&mut buf, self.action_dim as u32);
        put_u32(&mut buf, self.sections.len() as u32);
        for (name, params) in &self.sections {
            put_u32(&mut buf, name.len() as u32);
            buf.extend_from_slice(name.as_bytes());
            buf.push(match params.output_activation {
                Activation::Identity => 0,
                Activation::Tanh => 1,
            });
            put_u32(&mut buf, params.layers.len() as u32);
            for layer in &params.layers {
                put_u32(&mut buf, layer.weight.rows() as u32);
                put_u32(&mut buf, layer.weight.cols() as u32);
                for &x in layer.weight.data() {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
                for &x in &layer.bias {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut r = Reader { bytes: &bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(SoftqError::Parse("not a checkpoint file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(SoftqError::Parse(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let state_dim = r.u32()? as usize;
        let action_dim = r.u32()? as usize;
        let n_sections = r.u32()? as usize;
        let mut sections = Vec::with_capacity(n_sections);
        for _ in 0..n_sections {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| SoftqError::Parse("bad section name".into()))?;
            let output_activation = match r.u8()? {
                0 => Activation::Identity,
                1 => Activation::Tanh,
                other => {
                    return Err(SoftqError::Parse(format!("bad activation tag {other}")));
                }
            };
            let n_layers = r.u32()? as usize;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                let mut wdata = Vec::with_capacity(rows * cols);
                for _ in 0..rows * cols {
                    wdata.push(r.f64()?);
                }
                let mut bias = Vec::with_capacity(cols);
                for _ in 0..cols {
                    bias.push(r.f64()?);
                }
                layers.push(Layer {
                    weight: Tensor::from_vec(&[rows, cols], wdata)
                        .map_err(|e| SoftqError::Parse(e.to_string()))?,
                    bias,
                });
            }
            sections.push((
                name,
                MlpParams {
                    layers,
                    output_activation,
                },
            ));
        }
        if r.pos != bytes.len() {
            return Err(SoftqError::Parse("trailing bytes in checkpoint".into()));
        }
        Ok(Checkpoint {
            state_dim,
            action_dim,
            sections,
        })
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(SoftqError::Parse("truncated checkpoint".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
