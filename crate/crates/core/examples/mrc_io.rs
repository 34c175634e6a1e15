//! Writing a phantom stack to MRC and reading slices back lazily.

use csrecon::harness::{read_mrc, synth_particles, write_mrc};

fn main() -> csrecon::Result<()> {
    let dir = std::env::temp_dir().join("csrecon-mrc-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("phantoms.mrc");

    let images = synth_particles(5, 48, 2)?;
    write_mrc(&path, &images, 1.34)?;

    let stack = read_mrc(&path)?;
    println!(
        "{}: {} slices of {}x{}, mode {}, {:.2} A/px",
        stack.path().display(),
        stack.count(),
        stack.side(),
        stack.side(),
        stack.mode(),
        stack.pixel_size()
    );
    let third = stack.read_slice(2)?;
    // stored as float32
    println!("slice 2 max difference {:.2e}", third.max_abs_diff(&images[2]));
    Ok(())
}
