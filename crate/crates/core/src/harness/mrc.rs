//! MRC2014 stacks of square float32 images.
//!
//! Only the header words this crate needs are interpreted; everything is
//! little-endian. Slices are read on demand with a seek, so large stacks are
//! never loaded whole.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::image::Image;

pub const HEADER_LEN: u64 = 1024;
const MODE_FLOAT32: i32 = 2;

fn word_i32(header: &[u8], offset: usize) -> i32 {
    i32::from_le_bytes(header[offset..offset + 4].try_into().unwrap())
}

fn word_f32(header: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(header[offset..offset + 4].try_into().unwrap())
}

/// Open handle on a mode-2 stack of `count` images of `side x side` pixels.
#[derive(Debug)]
pub struct MrcStack {
    path: PathBuf,
    file: Mutex<File>,
    count: usize,
    side: usize,
    /// Angstrom per pixel, `cella.x / mx`.
    pixel_size: f64,
    mode: i32,
    data_offset: u64,
}

impl MrcStack {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path)?;
        let file_len = file.metadata()?.len();
        let mut header = [0u8; HEADER_LEN as usize];
        if file_len < HEADER_LEN {
            return Err(Error::parse(
                file_len,
                format!("file is {file_len} bytes, shorter than the 1024-byte header"),
            ));
        }
        file.read_exact(&mut header)?;

        let dims = [0usize, 4, 8].map(|o| (o, word_i32(&header, o)));
        for &(offset, v) in &dims {
            if v <= 0 {
                return Err(Error::parse(offset as u64, format!("non-positive dimension {v}")));
            }
        }
        let (nx, ny, nz) = (dims[0].1 as usize, dims[1].1 as usize, dims[2].1 as usize);
        let mode = word_i32(&header, 12);
        if mode != MODE_FLOAT32 {
            return Err(Error::parse(
                12,
                format!("unsupported data mode {mode}, only mode 2 (float32) is read"),
            ));
        }
        if nx != ny {
            return Err(Error::dim(format!("images must be square, got {nx} x {ny}")));
        }
        let mx = word_i32(&header, 28);
        let cella_x = word_f32(&header, 40) as f64;
        let pixel_size = if mx > 0 && cella_x > 0.0 {
            cella_x / mx as f64
        } else {
            1.0
        };
        let nsymbt = word_i32(&header, 92);
        if nsymbt < 0 {
            return Err(Error::parse(92, format!("negative extended header size {nsymbt}")));
        }
        let data_offset = HEADER_LEN + nsymbt as u64;
        let needed = (nx as u64)
            .checked_mul(ny as u64)
            .and_then(|v| v.checked_mul(nz as u64))
            .and_then(|v| v.checked_mul(4))
            .and_then(|v| v.checked_add(data_offset))
            .ok_or_else(|| Error::parse(0, "stack dimensions overflow"))?;
        if file_len < needed {
            return Err(Error::parse(
                file_len,
                format!("truncated data: header implies {needed} bytes, file has {file_len}"),
            ));
        }
        Ok(Self {
            path,
            file: Mutex::new(file),
            count: nz,
            side: nx,
            pixel_size,
            mode,
            data_offset,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn mode(&self) -> i32 {
        self.mode
    }

    pub fn read_slice(&self, index: usize) -> Result<Image> {
        if index >= self.count {
            return Err(Error::param(format!(
                "slice {index} out of range, stack holds {}",
                self.count
            )));
        }
        let n = self.side * self.side;
        let offset = self.data_offset + (index * n * 4) as u64;
        let mut buf = vec![0u8; n * 4];
        {
            let mut file = self.file.lock().expect("mrc file lock poisoned");
            file.seek(SeekFrom::Start(offset))?;
            file.read_exact(&mut buf).map_err(|e| {
                Error::parse(offset, format!("failed to read slice {index}: {e}"))
            })?;
        }
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Image::new(self.side, data)
    }

    pub fn read_all(&self) -> Result<Vec<Image>> {
        (0..self.count).map(|i| self.read_slice(i)).collect()
    }
}

pub fn read_mrc(path: impl AsRef<Path>) -> Result<MrcStack> {
    MrcStack::open(path)
}

/// Encodes equally sized images as a mode-2 stack. Values are stored as f32.
pub fn encode_mrc(images: &[Image], pixel_size: f64) -> Result<Vec<u8>> {
    let first = images
        .first()
        .ok_or_else(|| Error::param("cannot write an empty stack"))?;
    let side = first.side();
    if images.iter().any(|im| im.side() != side) {
        return Err(Error::dim("all slices must have the same side"));
    }
    let mut header = [0u8; HEADER_LEN as usize];
    let put_i32 = |h: &mut [u8], o: usize, v: i32| h[o..o + 4].copy_from_slice(&v.to_le_bytes());
    let n = side as i32;
    put_i32(&mut header, 0, n);
    put_i32(&mut header, 4, n);
    put_i32(&mut header, 8, images.len() as i32);
    put_i32(&mut header, 12, MODE_FLOAT32);
    put_i32(&mut header, 28, n);
    put_i32(&mut header, 32, n);
    put_i32(&mut header, 36, images.len() as i32);
    let put_f32 = |h: &mut [u8], o: usize, v: f32| h[o..o + 4].copy_from_slice(&v.to_le_bytes());
    let cell = (side as f64 * pixel_size) as f32;
    put_f32(&mut header, 40, cell);
    put_f32(&mut header, 44, cell);
    put_f32(&mut header, 48, (images.len() as f64 * pixel_size) as f32);
    for o in [52, 56, 60] {
        put_f32(&mut header, o, 90.0);
    }
    put_i32(&mut header, 64, 1);
    put_i32(&mut header, 68, 2);
    put_i32(&mut header, 72, 3);

    let values: Vec<f32> = images
        .iter()
        .flat_map(|im| im.data().iter().map(|&v| v as f32))
        .collect();
    let count = values.len() as f64;
    let (mut lo, mut hi, mut sum) = (f32::INFINITY, f32::NEG_INFINITY, 0.0f64);
    for &v in &values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v as f64;
    }
    let mean = sum / count;
    let rms = (values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / count).sqrt();
    put_f32(&mut header, 76, lo);
    put_f32(&mut header, 80, hi);
    put_f32(&mut header, 84, mean as f32);
    put_i32(&mut header, 88, if images.len() > 1 { 0 } else { 1 });
    put_i32(&mut header, 108, 20140);
    header[208..212].copy_from_slice(b"MAP ");
    header[212..216].copy_from_slice(&[0x44, 0x44, 0x00, 0x00]);
    put_f32(&mut header, 216, rms as f32);

    let mut out = Vec::with_capacity(HEADER_LEN as usize + values.len() * 4);
    out.extend_from_slice(&header);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_mrc(path: impl AsRef<Path>, images: &[Image], pixel_size: f64) -> Result<()> {
    let bytes = encode_mrc(images, pixel_size)?;
    let mut file = File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}
