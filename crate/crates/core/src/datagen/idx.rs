//! IDX (MNIST distribution) reader and writer.
//!
//! Layout: big-endian `u32` magic (`0x00000803` images, `0x00000801`
//! labels), one big-endian `u32` per dimension, then unsigned bytes.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Mat;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
const CLASSES: usize = 10;

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Format { path: self.path.to_path_buf(), offset: offset as u64, msg: msg.into() }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.fail(self.bytes.len(), format!("truncated while reading {what}")))?;
        self.pos = end;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn magic(&mut self, want: u32) -> Result<()> {
        let got = self.u32("magic number")?;
        if got != want {
            return Err(self.fail(0, format!("bad magic number {got:#010x}, expected {want:#010x}")));
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(self.fail(self.bytes.len(), format!("truncated payload: expected {len} bytes from offset {}", self.pos)));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an image/label IDX pair as a dataset with inputs scaled to `[0,1]`
/// and one-hot labels. With `center_unspanned`, every input column is
/// shifted to zero mean (all-zero columns stay zero).
pub fn load_idx(images_path: &Path, labels_path: &Path, center_unspanned: bool) -> Result<Dataset> {
    let img_bytes = read(images_path)?;
    let lbl_bytes = read(labels_path)?;

    let mut img = Reader { path: images_path, bytes: &img_bytes, pos: 0 };
    img.magic(IMAGES_MAGIC)?;
    let count = img.u32("image count")? as usize;
    let rows = img.u32("row count")? as usize;
    let cols = img.u32("column count")? as usize;
    let pixels = img.payload(count * rows * cols)?;

    let mut lbl = Reader { path: labels_path, bytes: &lbl_bytes, pos: 0 };
    lbl.magic(LABELS_MAGIC)?;
    let label_count_offset = lbl.pos;
    let label_count = lbl.u32("label count")? as usize;
    if label_count != count {
        return Err(lbl.fail(
            label_count_offset,
            format!("{label_count} labels for {count} images in {}", images_path.display()),
        ));
    }
    let label_start = lbl.pos;
    let labels = lbl.payload(count)?;
    if let Some(pos) = labels.iter().position(|&l| l as usize >= CLASSES) {
        return Err(lbl.fail(label_start + pos, format!("label {} outside 0..{CLASSES}", labels[pos])));
    }

    let d = rows * cols;
    let mut x = Mat::new(count, d, pixels.iter().map(|&p| p as f64 / 255.0).collect())?;
    if center_unspanned {
        for c in 0..d {
            let mean = (0..count).map(|r| x[(r, c)]).sum::<f64>() / count as f64;
            for r in 0..count {
                x[(r, c)] -= mean;
            }
        }
    }
    let y = Mat::from_fn(count, CLASSES, |r, c| if labels[r] as usize == c { 1.0 } else { 0.0 });
    let name = images_path.file_name().map_or_else(|| "idx".to_string(), |n| n.to_string_lossy().into_owned());
    Dataset::new(x, y, None, name)
}

/// Writes `images` (each `rows·cols` bytes) as an IDX image file.
pub fn write_idx_images(path: &Path, rows: u32, cols: u32, images: &[Vec<u8>]) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.len() * (rows * cols) as usize);
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    for img in images {
        if img.len() != (rows * cols) as usize {
            return Err(Error::Shape(format!("image has {} bytes, expected {}", img.len(), rows * cols)));
        }
        out.extend_from_slice(img);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::compute_relevance;

    fn fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        // 4 images of 3×3; pixel 0 (a corner) is dark in every image.
        let images: Vec<Vec<u8>> = (0..4u8)
            .map(|k| (0..9u8).map(|p| if p == 0 { 0 } else { (k * 37 + p * 11) % 251 }).collect())
            .collect();
        let ip = dir.join("images.idx");
        let lp = dir.join("labels.idx");
        write_idx_images(&ip, 3, 3, &images).unwrap();
        write_idx_labels(&lp, &[3, 1, 4, 1]).unwrap();
        (ip, lp)
    }

    #[test]
    fn round_trip_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let ds = load_idx(&ip, &lp, false).unwrap();
        assert_eq!(ds.x.shape(), (4, 9));
        assert_eq!(ds.y.shape(), (4, 10));
        assert_eq!(ds.x[(1, 2)], ((37 + 22) % 251) as f64 / 255.0);
        assert_eq!(ds.y.row(2)[4], 1.0);
        assert_eq!(ds.y.row(2).iter().sum::<f64>(), 1.0);
        assert!(ds.x.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dark_corner_is_unspanned() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let ds = load_idx(&ip, &lp, true).unwrap();
        let dec = compute_relevance(&ds, 1e-6).unwrap();
        assert!(dec.u >= 1);
        // The corner coordinate lies entirely in the unspanned block.
        let corner_weight: f64 = dec.unspanned().map(|c| dec.basis[(0, c)].powi(2)).sum();
        assert!((corner_weight - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let err = load_idx(&lp, &ip, false).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn truncated_payload_reports_file_length() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let mut bytes = fs::read(&ip).unwrap();
        bytes.truncate(20);
        fs::write(&ip, &bytes).unwrap();
        match load_idx(&ip, &lp, false).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 20),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_idx(Path::new("/nonexistent/images.idx"), Path::new("/nonexistent/labels.idx"), false).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/images.idx"));
    }
}
