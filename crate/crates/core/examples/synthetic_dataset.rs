//! Writes a synthetic dataset: `synthetic_dataset <dir> [count] [width] [height] [seed]`.

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(dir) = args.first().map(PathBuf::from) else {
        eprintln!("usage: synthetic_dataset <dir> [count] [width] [height] [seed]");
        std::process::exit(64);
    };
    let num = |i: usize, default: u64| args.get(i).map_or(Ok(default), |s| s.parse());
    let count = num(1, 20)? as usize;
    let width = num(2, 565)? as usize;
    let height = num(3, 584)? as usize;
    let seed = num(4, 1)?;
    let samples = vessel_aug::synthetic::write_synthetic_dataset(&dir, count, width, height, seed)?;
    println!("{} samples written to {}", samples.len(), dir.display());
    Ok(())
}
