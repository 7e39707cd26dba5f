//! Round trip through the IDX image/label format: write a tiny dataset,
//! load it back with pixel columns centred, and find the inputs no image
//! ever excites.

use support_lab::datagen::{load_idx, write_idx_images, write_idx_labels};
use support_lab::runner::run::irrelevant_columns;

fn main() -> support_lab::Result<()> {
    let dir = std::env::temp_dir().join("suplab-idx-example");
    std::fs::create_dir_all(&dir).map_err(|e| support_lab::Error::io(&dir, e))?;
    // 3x3 images whose border pixels are always zero.
    let images: Vec<Vec<u8>> = (0..20u8).map(|k| (0..9).map(|p| if p == 4 { 10 * k } else { 0 }).collect()).collect();
    let labels: Vec<u8> = (0..20).map(|k| k % 10).collect();
    let (img, lab) = (dir.join("images.idx"), dir.join("labels.idx"));
    write_idx_images(&img, 3, 3, &images)?;
    write_idx_labels(&lab, &labels)?;
    let ds = load_idx(&img, &lab, true)?;
    println!("{} rows, {} inputs, {} outputs", ds.n(), ds.d(), ds.k());
    println!("unexcited inputs: {:?}", irrelevant_columns(&ds));
    Ok(())
}
