//! Binary model checkpoints.
//!
//! Layout (all integers and reals little-endian):
//!
//! | offset | size | field                                        |
//! |--------|------|----------------------------------------------|
//! | 0      | 8    | magic `FPANCKPT`                             |
//! | 8      | 4    | format version, `u32` (currently 1)          |
//! | 12     | 8    | init seed, `u64`                             |
//! | 20     | 1    | PAN mode, `u8` (0 off, 1 additive, 2 mult.)  |
//! | 21     | 8    | amplitude `A`, `f64`                         |
//! | 29     | 8    | period `T`, `f64`                            |
//! | 37     | 4    | number of layer sizes `n = L + 1`, `u32`     |
//! | 41     | 4n   | sizes `J_0..J_L`, `u32` each                 |
//!
//! Then for each layer `l = 1..L`: one activation byte (0 ReLU,
//! 1 identity), `J_l × J_{l-1}` weights in row-major order, and `J_l`
//! biases, all `f64`. Nothing follows the last layer.

use std::io::{Read, Write};
use std::path::Path;

use super::encoding::{PanConfig, PanMode};
use super::model::{Activation, Layer, MlpModel};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

pub const MAGIC: &[u8; 8] = b"FPANCKPT";
pub const VERSION: u32 = 1;

pub fn encode(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + model.num_params() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&model.seed().to_le_bytes());
    let pan = model.pan();
    out.push(pan.mode.code());
    out.extend_from_slice(&pan.amplitude.to_le_bytes());
    out.extend_from_slice(&pan.period.to_le_bytes());
    out.extend_from_slice(&(model.sizes().len() as u32).to_le_bytes());
    for &s in model.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for (layer, act) in model.layers().iter().zip(model.activations()) {
        out.push(match act {
            Activation::Relu => 0,
            Activation::Identity => 1,
        });
        for v in layer.weight.data().iter().chain(layer.bias.as_slice()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let start = self.pos;
        let raw = self.take(n.saturating_mul(8), what)?;
        let vals: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                (start + 8 * i) as u64,
                format!("non-finite value in {what}"),
            ));
        }
        Ok(vals)
    }
}

pub fn decode(bytes: &[u8]) -> Result<MlpModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, not a checkpoint"));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::format(8, format!("unsupported version {version}")));
    }
    let seed = cur.u64("seed")?;
    let mode_pos = cur.pos;
    let mode = PanMode::from_code(cur.u8("PAN mode")?)
        .ok_or_else(|| Error::format(mode_pos as u64, "unknown PAN mode"))?;
    let amplitude = cur.f64("amplitude")?;
    let period = cur.f64("period")?;
    let count_pos = cur.pos;
    let n_sizes = cur.u32("size count")? as usize;
    if !(2..=1024).contains(&n_sizes) {
        return Err(Error::format(
            count_pos as u64,
            format!("implausible layer count {n_sizes}"),
        ));
    }
    let mut sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        sizes.push(cur.u32("layer size")? as usize);
    }
    let mut layers = Vec::with_capacity(n_sizes - 1);
    let mut acts = Vec::with_capacity(n_sizes - 1);
    for w in sizes.windows(2) {
        let act_pos = cur.pos;
        acts.push(match cur.u8("activation")? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            _ => return Err(Error::format(act_pos as u64, "unknown activation")),
        });
        let weight = cur.f64s(w[0] * w[1], "weights")?;
        let bias = cur.f64s(w[1], "biases")?;
        layers.push(Layer {
            weight: Matrix::from_vec(w[1], w[0], weight)?,
            bias: Vector::new(bias),
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(cur.pos as u64, "trailing bytes"));
    }
    let pan = PanConfig {
        mode,
        amplitude,
        period,
    };
    let mut model = MlpModel::from_layers(layers, pan, seed)
        .map_err(|e| Error::format(0, format!("inconsistent checkpoint: {e}")))?;
    if acts[..acts.len() - 1]
        .iter()
        .all(|&a| a == Activation::Identity)
        && acts.len() > 1
    {
        model = model.with_hidden_activation(Activation::Identity);
    }
    if model.activations() != acts.as_slice() {
        return Err(Error::format(0, "unsupported activation layout"));
    }
    Ok(model)
}

pub fn save(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<MlpModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            seed in any::<u64>(),
            sizes in proptest::collection::vec(1usize..6, 2..5),
            mode in 0u8..3,
            amp in 0.0f64..1.0,
            period in 0.1f64..10.0,
        ) {
            let pan = PanConfig { mode: PanMode::from_code(mode).unwrap(), amplitude: amp, period };
            let model = MlpModel::new(&sizes, pan, seed).unwrap();
            let bytes = encode(&model);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(encode(&back), bytes);
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn corrupt_inputs_report_offsets() {
        let model = MlpModel::new(&[2, 3, 2], PanConfig::multiplicative(0.1, 1.0), 5).unwrap();
        let bytes = encode(&model);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 0, .. })));

        let truncated = &bytes[..bytes.len() - 3];
        match decode(truncated) {
            Err(Error::Format { offset, .. }) => assert!(offset > 41),
            other => panic!("expected format error, got {other:?}"),
        }

        let mut mode = bytes.clone();
        mode[20] = 9;
        assert!(matches!(
            decode(&mode),
            Err(Error::Format { offset: 20, .. })
        ));

        let mut trailing = bytes;
        trailing.push(0);
        assert!(decode(&trailing).is_err());
    }

    #[test]
    fn identity_hidden_activation_survives() {
        let model = MlpModel::new(&[2, 2, 1], PanConfig::off(), 0)
            .unwrap()
            .with_hidden_activation(Activation::Identity);
        assert_eq!(decode(&encode(&model)).unwrap(), model);
    }
}
