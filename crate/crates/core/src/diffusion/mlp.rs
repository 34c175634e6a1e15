//! Small fully connected score network and its `CSSM` weight file.
//!
//! File layout, little-endian:
//!
//! ```text
//! "CSSM" | u32 version | u32 D | u32 embed_dim | u32 layer_count
//! per layer: u32 rows | u32 cols | rows*cols f32 (row-major) | rows f32 bias
//! u32 CRC32 of every preceding byte
//! ```
//!
//! Version 1 stores a network that outputs the score directly. Version 2
//! stores an epsilon predictor; its output is turned into a score as
//! `-eps / sqrt(1 - abar_t)` using the schedule attached to the model.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::masks::ByteReader;

use super::{NoiseSchedule, ScoreModel};

const MAGIC: &[u8; 4] = b"CSSM";

/// What the final layer predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Score,
    Epsilon,
}

impl Prediction {
    fn version(self) -> u32 {
        match self {
            Prediction::Score => 1,
            Prediction::Epsilon => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl DenseLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let acc: f64 = row.iter().zip(input).map(|(w, x)| *w as f64 * x).sum();
            out.push(acc + self.bias[r] as f64);
        }
    }
}

/// MLP over `[flattened image, time embedding]` with SiLU between layers.
#[derive(Debug, Clone)]
pub struct MlpScore {
    side: usize,
    embed_dim: usize,
    layers: Vec<DenseLayer>,
    prediction: Prediction,
    schedule: NoiseSchedule,
}

impl MlpScore {
    pub fn new(
        side: usize,
        embed_dim: usize,
        layers: Vec<DenseLayer>,
        prediction: Prediction,
    ) -> Result<Self> {
        if side == 0 {
            return Err(Error::Load("image side must be positive".into()));
        }
        if embed_dim == 0 || embed_dim % 2 != 0 {
            return Err(Error::Load(format!("embedding dimension must be even, got {embed_dim}")));
        }
        if layers.is_empty() {
            return Err(Error::Load("network has no layers".into()));
        }
        let n = side * side;
        let mut width = n + embed_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.cols != width {
                return Err(Error::Load(format!(
                    "layer {i} expects {} inputs but receives {width}",
                    layer.cols
                )));
            }
            if layer.weights.len() != layer.rows * layer.cols || layer.bias.len() != layer.rows {
                return Err(Error::Load(format!("layer {i} has inconsistent buffers")));
            }
            width = layer.rows;
        }
        if width != n {
            return Err(Error::Load(format!("network outputs {width} values, image has {n}")));
        }
        Ok(Self {
            side,
            embed_dim,
            layers,
            prediction,
            schedule: NoiseSchedule::default(),
        })
    }

    /// Schedule used to convert epsilon predictions to scores.
    pub fn with_schedule(mut self, schedule: NoiseSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn prediction(&self) -> Prediction {
        self.prediction
    }

    /// `[sin(t w_k), cos(t w_k)]` with `w_k` geometric from 1 down to `1e-4`.
    pub fn time_embedding(&self, t: usize) -> Vec<f64> {
        time_embedding(t as f64, self.embed_dim)
    }

    /// Raw network output before any epsilon conversion.
    pub fn network_output(&self, x: &Image, t: usize) -> Result<Vec<f64>> {
        if x.side() != self.side {
            return Err(Error::dim(format!(
                "network expects side {}, got {}",
                self.side,
                x.side()
            )));
        }
        let mut input: Vec<f64> = x.data().to_vec();
        input.extend(self.time_embedding(t));
        let mut out = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&input, &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = silu(*v));
            }
            std::mem::swap(&mut input, &mut out);
        }
        Ok(input)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.prediction.version().to_le_bytes());
        out.extend_from_slice(&(self.side as u32).to_le_bytes());
        out.extend_from_slice(&(self.embed_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.rows as u32).to_le_bytes());
            out.extend_from_slice(&(layer.cols as u32).to_le_bytes());
            for w in layer.weights.iter().chain(&layer.bias) {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Load("weight file shorter than its checksum".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if !body.starts_with(MAGIC) {
            return Err(Error::Load("missing CSSM magic".into()));
        }
        if stored != actual {
            return Err(Error::Load(format!(
                "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
            )));
        }
        decode_body(body).map_err(|e| match e {
            Error::Parse { offset, message } => {
                Error::Load(format!("malformed weight file at byte {offset}: {message}"))
            }
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn decode_body(body: &[u8]) -> Result<MlpScore> {
    let mut r = ByteReader::new(body);
    r.take(4)?;
    let prediction = match r.u32()? {
        1 => Prediction::Score,
        2 => Prediction::Epsilon,
        v => return Err(Error::Load(format!("unsupported weight file version {v}"))),
    };
    let side = r.u32()? as usize;
    let embed_dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut layers = Vec::new();
    for _ in 0..count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let len = rows
            .checked_mul(cols)
            .filter(|&l| l.checked_add(rows).map_or(false, |t| t * 4 <= body.len()))
            .ok_or_else(|| Error::parse(r.pos as u64, format!("layer {rows}x{cols} exceeds file")))?;
        let weights = (0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let bias = (0..rows).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        layers.push(DenseLayer {
            rows,
            cols,
            weights,
            bias,
        });
    }
    r.finish()?;
    MlpScore::new(side, embed_dim, layers, prediction)
}

/// Reads and validates a `CSSM` weight file.
pub fn load_score_weights(path: impl AsRef<Path>) -> Result<MlpScore> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| Error::Load(format!("cannot read {}: {e}", path.display())))?;
    MlpScore::from_bytes(&bytes)
}

fn silu(v: f64) -> f64 {
    v / (1.0 + (-v).exp())
}

fn time_embedding(t: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let freq = |k: usize| {
        if half == 1 {
            1.0
        } else {
            10f64.powf(-4.0 * k as f64 / (half - 1) as f64)
        }
    };
    let mut out: Vec<f64> = (0..half).map(|k| (t * freq(k)).sin()).collect();
    out.extend((0..half).map(|k| (t * freq(k)).cos()));
    out
}

impl ScoreModel for MlpScore {
    fn side(&self) -> usize {
        self.side
    }

    fn evaluate(&self, x: &Image, t: usize) -> Result<Image> {
        let out = self.network_output(x, t)?;
        let out = match self.prediction {
            Prediction::Score => out,
            Prediction::Epsilon => {
                self.schedule.check_step(t)?;
                let scale = -1.0 / (1.0 - self.schedule.alpha_bar(t)).sqrt();
                out.into_iter().map(|v| v * scale).collect()
            }
        };
        Image::new(self.side, out)
    }
}
