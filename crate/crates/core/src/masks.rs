//! Sampling patterns for pixel-space and Fourier-space acquisition.
//!
//! Pixel plans use `b` independent Bernoulli(0.5) masks followed by `K x K`
//! sum pooling, so each mask contributes `n / K^2` measurements and the
//! compression factor is `K^2 / b`.
//!
//! Fourier masks live on the fftshifted frequency grid (DC at `(D/2, D/2)`):
//!
//! - `Uniform` keeps `round(n / C)` coefficients drawn without replacement.
//! - `Annular` splits the disc of radius `D/2` into 100 equal-area rings and
//!   draws `k = round(100 / C)` of them without replacement, each draw
//!   proportional to `exp(-r / (2 nu^2))` over the rings still available,
//!   where `r` is the ring mid-radius and `nu = D / 8`. Corner frequencies
//!   outside the disc are only kept when every ring is selected.
//! - `Radial` splits the plane into 100 equal-angle spokes and keeps
//!   `k = round(100 / C)` of them uniformly without replacement.
//!
//! Kept coefficients are not forced to be conjugate-symmetric.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of rings or spokes used by the structured Fourier masks.
pub const PARTITION_COUNT: usize = 100;

const MASK_MAGIC: &[u8; 4] = b"CSMK";
const MASK_VERSION: u8 = 1;

/// `b` Bernoulli(0.5) pixel masks with `K x K` sum pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMaskSet {
    side: usize,
    kernel: usize,
    seed: u64,
    masks: Vec<Vec<bool>>,
}

impl PixelMaskSet {
    pub fn generate(side: usize, count: usize, kernel: usize, seed: u64) -> Result<Self> {
        if side == 0 || kernel == 0 || side % kernel != 0 {
            return Err(Error::dim(format!(
                "kernel {kernel} must divide image side {side}"
            )));
        }
        if count == 0 {
            return Err(Error::param("pixel plans need at least one mask"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = side * side;
        let masks = (0..count)
            .map(|_| (0..n).map(|_| rng.gen::<bool>()).collect())
            .collect();
        Ok(Self {
            side,
            kernel,
            seed,
            masks,
        })
    }

    /// Builds a set from explicit masks, e.g. all-ones masks in tests.
    pub fn from_masks(side: usize, kernel: usize, seed: u64, masks: Vec<Vec<bool>>) -> Result<Self> {
        if side == 0 || kernel == 0 || side % kernel != 0 {
            return Err(Error::dim(format!(
                "kernel {kernel} must divide image side {side}"
            )));
        }
        if masks.is_empty() {
            return Err(Error::param("pixel plans need at least one mask"));
        }
        if masks.iter().any(|m| m.len() != side * side) {
            return Err(Error::dim("mask length must equal side^2"));
        }
        Ok(Self {
            side,
            kernel,
            seed,
            masks,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn count(&self) -> usize {
        self.masks.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    /// Pooled side length `D / K`.
    pub fn pooled_side(&self) -> usize {
        self.side / self.kernel
    }

    /// Total number of measurements `b * n / K^2`.
    pub fn output_len(&self) -> usize {
        self.count() * self.pooled_side() * self.pooled_side()
    }

    /// `K^2 / b`.
    pub fn compression(&self) -> f64 {
        (self.kernel * self.kernel) as f64 / self.count() as f64
    }

    pub fn density(&self) -> f64 {
        let kept: usize = self
            .masks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .sum();
        kept as f64 / (self.masks.len() * self.side * self.side) as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let bits: Vec<bool> = self.masks.iter().flatten().copied().collect();
        let mut out = header_bytes(STRATEGY_PIXEL, self.side, self.output_len(), self.seed);
        out.extend_from_slice(&(self.kernel as u32).to_le_bytes());
        out.extend_from_slice(&(self.count() as u32).to_le_bytes());
        out.extend_from_slice(&pack_bits(&bits));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FourierStrategy {
    Uniform,
    Annular,
    Radial,
}

impl FourierStrategy {
    fn code(self) -> u8 {
        match self {
            FourierStrategy::Uniform => 0,
            FourierStrategy::Annular => 1,
            FourierStrategy::Radial => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FourierStrategy::Uniform),
            1 => Some(FourierStrategy::Annular),
            2 => Some(FourierStrategy::Radial),
            _ => None,
        }
    }
}

impl fmt::Display for FourierStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FourierStrategy::Uniform => "uniform",
            FourierStrategy::Annular => "annular",
            FourierStrategy::Radial => "radial",
        })
    }
}

impl FromStr for FourierStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(FourierStrategy::Uniform),
            "annular" => Ok(FourierStrategy::Annular),
            "radial" => Ok(FourierStrategy::Radial),
            other => Err(Error::param(format!("unknown Fourier strategy {other:?}"))),
        }
    }
}

const STRATEGY_PIXEL: u8 = 3;

/// Binary keep-mask over the fftshifted frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMask {
    side: usize,
    strategy: FourierStrategy,
    seed: u64,
    keep: Vec<bool>,
    kept: Vec<usize>,
}

impl FourierMask {
    pub fn generate(side: usize, strategy: FourierStrategy, compression: f64, seed: u64) -> Result<Self> {
        if side == 0 {
            return Err(Error::dim("mask side must be positive"));
        }
        if !(compression >= 1.0) || !compression.is_finite() {
            return Err(Error::param(format!(
                "compression factor must be >= 1, got {compression}"
            )));
        }
        let n = side * side;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = vec![false; n];
        match strategy {
            FourierStrategy::Uniform => {
                let m = ((n as f64 / compression).round() as usize).clamp(1, n);
                for i in index::sample(&mut rng, n, m) {
                    keep[i] = true;
                }
            }
            FourierStrategy::Annular => {
                let k = partition_picks(compression);
                if k == PARTITION_COUNT {
                    keep.iter_mut().for_each(|b| *b = true);
                } else {
                    let weights = RingWeighting::new(side);
                    let rings = weighted_sample_without_replacement(&mut rng, &weights.weights, k);
                    let mut selected = [false; PARTITION_COUNT];
                    for r in rings {
                        selected[r] = true;
                    }
                    for (i, slot) in keep.iter_mut().enumerate() {
                        if let Some(ring) = weights.ring(i / side, i % side) {
                            *slot = selected[ring];
                        }
                    }
                }
            }
            FourierStrategy::Radial => {
                let k = partition_picks(compression);
                let mut selected = [false; PARTITION_COUNT];
                for s in index::sample(&mut rng, PARTITION_COUNT, k) {
                    selected[s] = true;
                }
                for (i, slot) in keep.iter_mut().enumerate() {
                    *slot = selected[spoke_index(side, i / side, i % side)];
                }
            }
        }
        Ok(Self::from_keep(side, strategy, seed, keep))
    }

    pub fn from_keep(side: usize, strategy: FourierStrategy, seed: u64, keep: Vec<bool>) -> Self {
        assert_eq!(keep.len(), side * side);
        let kept = keep
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect();
        Self {
            side,
            strategy,
            seed,
            keep,
            kept,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn strategy(&self) -> FourierStrategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Keep flags over the shifted grid, row-major.
    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    /// Shifted-grid indices of kept coefficients, in row-major scan order.
    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    pub fn kept_count(&self) -> usize {
        self.kept.len()
    }

    /// `n / m`.
    pub fn compression(&self) -> f64 {
        (self.side * self.side) as f64 / self.kept_count() as f64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header_bytes(self.strategy.code(), self.side, self.kept_count(), self.seed);
        out.extend_from_slice(&pack_bits(&self.keep));
        out
    }
}

/// Either kind of mask, as read back from a blob.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskBlob {
    Pixel(PixelMaskSet),
    Fourier(FourierMask),
}

impl MaskBlob {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            MaskBlob::Pixel(p) => p.to_bytes(),
            MaskBlob::Fourier(f) => f.to_bytes(),
        }
    }

    /// Parses a `CSMK` blob:
    ///
    /// ```text
    /// 0   "CSMK"
    /// 4   u8  version (1)
    /// 5   u8  strategy (0 uniform, 1 annular, 2 radial, 3 pixel)
    /// 6   u32 side D
    /// 10  u32 m (kept coefficients, or total pooled measurements for pixel masks)
    /// 14  u64 seed
    /// 22  pixel only: u32 K, u32 b
    /// ..  bitset, LSB first, D*D bits (b*D*D for pixel masks)
    /// ```
    ///
    /// All integers are little-endian.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = ByteReader::new(bytes);
        if rd.take(4)? != MASK_MAGIC {
            return Err(Error::parse(0, "bad magic, expected CSMK"));
        }
        let version = rd.u8()?;
        if version != MASK_VERSION {
            return Err(Error::parse(4, format!("unsupported mask version {version}")));
        }
        let strategy = rd.u8()?;
        let side = rd.u32()? as usize;
        let m = rd.u32()? as usize;
        let seed = rd.u64()?;
        if side == 0 || side > 1 << 15 {
            return Err(Error::parse(6, format!("implausible side {side}")));
        }
        let n = side * side;
        if strategy == STRATEGY_PIXEL {
            let kernel = rd.u32()? as usize;
            let count = rd.u32()? as usize;
            let total = count
                .checked_mul(n)
                .ok_or_else(|| Error::parse(26, "mask count overflows"))?;
            let offset = rd.pos as u64;
            let bits = unpack_bits(rd.take(total.div_ceil(8))?, total);
            rd.finish()?;
            let masks = bits.chunks(n).map(|c| c.to_vec()).collect();
            let set = PixelMaskSet::from_masks(side, kernel, seed, masks)
                .map_err(|e| Error::parse(22, e.to_string()))?;
            if set.output_len() != m {
                return Err(Error::parse(offset, "measurement count does not match K and b"));
            }
            Ok(MaskBlob::Pixel(set))
        } else {
            let strategy = FourierStrategy::from_code(strategy)
                .ok_or_else(|| Error::parse(5, format!("unknown strategy code {strategy}")))?;
            let offset = rd.pos as u64;
            let keep = unpack_bits(rd.take(n.div_ceil(8))?, n);
            rd.finish()?;
            let mask = FourierMask::from_keep(side, strategy, seed, keep);
            if mask.kept_count() != m {
                return Err(Error::parse(
                    offset,
                    format!("bitset has {} kept entries, header says {m}", mask.kept_count()),
                ));
            }
            Ok(MaskBlob::Fourier(mask))
        }
    }
}

/// Per-ring weights for the annular strategy.
///
/// Pixels inside the disc of radius `D/2` are ranked by radius (then angle)
/// and cut into 100 runs of equal pixel count, so every ring covers the same
/// area on the discrete grid. Ring `j` spans radii close to
/// `(D/2) sqrt(j/100)..(D/2) sqrt((j+1)/100)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingWeighting {
    pub ring_count: usize,
    /// Mid-radius of each ring in pixels.
    pub mid_radii: Vec<f64>,
    pub weights: Vec<f64>,
    /// Gaussian width in pixels, `D / 8`.
    pub nu: f64,
    side: usize,
    ring_of: Vec<Option<u8>>,
}

impl RingWeighting {
    pub fn new(side: usize) -> Self {
        let outer = side as f64 / 2.0;
        let nu = side as f64 / 8.0;
        let count = PARTITION_COUNT as f64;
        let mid_radii: Vec<f64> = (0..PARTITION_COUNT)
            .map(|j| {
                let inner = outer * (j as f64 / count).sqrt();
                let outer_edge = outer * ((j + 1) as f64 / count).sqrt();
                0.5 * (inner + outer_edge)
            })
            .collect();
        let weights = mid_radii
            .iter()
            .map(|r| (-r / (2.0 * nu * nu)).exp())
            .collect();
        Self {
            ring_count: PARTITION_COUNT,
            mid_radii,
            weights,
            nu,
            side,
            ring_of: ring_map(side),
        }
    }

    /// Ring containing the shifted-grid pixel, `None` outside the disc.
    pub fn ring(&self, row: usize, col: usize) -> Option<usize> {
        self.ring_of[row * self.side + col].map(usize::from)
    }
}

fn ring_map(side: usize) -> Vec<Option<u8>> {
    let center = (side / 2) as f64;
    let outer = side as f64 / 2.0;
    let mut inside: Vec<(f64, f64, usize)> = Vec::new();
    for row in 0..side {
        for col in 0..side {
            let dy = row as f64 - center;
            let dx = col as f64 - center;
            let r2 = dy * dy + dx * dx;
            if r2 < outer * outer {
                let mut angle = dy.atan2(dx);
                if angle < 0.0 {
                    angle += 2.0 * PI;
                }
                inside.push((r2, angle, row * side + col));
            }
        }
    }
    inside.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let total = inside.len();
    let mut map = vec![None; side * side];
    for (rank, &(_, _, i)) in inside.iter().enumerate() {
        map[i] = Some((rank * PARTITION_COUNT / total) as u8);
    }
    map
}

fn partition_picks(compression: f64) -> usize {
    ((PARTITION_COUNT as f64 / compression).round() as usize).clamp(1, PARTITION_COUNT)
}

/// Equal-angle spoke containing the shifted-grid pixel. DC falls in spoke 0.
pub fn spoke_index(side: usize, row: usize, col: usize) -> usize {
    let center = (side / 2) as f64;
    let dy = row as f64 - center;
    let dx = col as f64 - center;
    let mut angle = dy.atan2(dx);
    if angle < 0.0 {
        angle += 2.0 * PI;
    }
    let spoke = (angle / (2.0 * PI / PARTITION_COUNT as f64)).floor() as usize;
    spoke.min(PARTITION_COUNT - 1)
}

fn weighted_sample_without_replacement(rng: &mut impl Rng, weights: &[f64], k: usize) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k.min(weights.len()) {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = remaining.len() - 1;
        for (pos, &i) in remaining.iter().enumerate() {
            if u < weights[i] {
                chosen = pos;
                break;
            }
            u -= weights[i];
        }
        picked.push(remaining.remove(chosen));
    }
    picked
}

fn header_bytes(strategy: u8, side: usize, m: usize, seed: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(32);
    out.extend_from_slice(MASK_MAGIC);
    out.push(MASK_VERSION);
    out.push(strategy);
    out.extend_from_slice(&(side as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    out
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

fn unpack_bits(bytes: &[u8], count: usize) -> Vec<bool> {
    (0..count).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

/// Little-endian cursor that reports the failing byte offset.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::parse(
                self.pos as u64,
                format!("truncated: need {len} more bytes, have {}", self.bytes.len() - self.pos),
            )),
        }
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::parse(
                self.pos as u64,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}
