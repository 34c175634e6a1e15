//! Mask generation for both acquisition variants and the CSMK blob format.

use csrecon::masks::{FourierMask, FourierStrategy, MaskBlob, PixelMaskSet};

fn show(mask: &FourierMask) {
    let side = mask.side();
    for r in (0..side).step_by(2) {
        let line: String = (0..side)
            .map(|c| if mask.keep()[r * side + c] { '#' } else { '.' })
            .collect();
        println!("    {line}");
    }
}

fn main() -> csrecon::Result<()> {
    for strategy in [FourierStrategy::Uniform, FourierStrategy::Annular, FourierStrategy::Radial] {
        let mask = FourierMask::generate(32, strategy, 4.0, 11)?;
        println!(
            "{strategy:?}: kept {} of 1024, actual compression {:.2}",
            mask.kept_count(),
            mask.compression()
        );
        show(&mask);
    }

    // 8 Bernoulli masks pooled over 4x4 blocks on a 32x32 image
    let pixel = PixelMaskSet::generate(32, 8, 4, 5)?;
    println!(
        "pixel: {} masks, pooled side {}, {} measurements, compression {:.2}, density {:.3}",
        pixel.count(),
        pixel.pooled_side(),
        pixel.output_len(),
        pixel.compression(),
        pixel.density()
    );

    let blob = MaskBlob::Pixel(pixel).to_bytes();
    let back = MaskBlob::from_bytes(&blob)?;
    println!("CSMK blob {} bytes, round trip equal: {}", blob.len(), back.to_bytes() == blob);
    Ok(())
}
