use std::path::Path;

use image::RgbImage;

use super::AssistError;

pub const FALLBACK_DIM: usize = 128;

const BINS: usize = 4;
const GRID: usize = 8;

/// Deterministic 128-dim image descriptor for runs without a learned model.
///
/// A 4×4×4 RGB histogram normalized by pixel count, followed by an 8×8 grid
/// of mean luma in `[0, 1]`, then L2-normalized. A raw all-zero vector stays zero.
pub fn fallback_embed(img: &RgbImage) -> Result<Vec<f64>, AssistError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(AssistError::EmptyImage);
    }
    let mut out = vec![0.0; FALLBACK_DIM];

    let mut counts = [0u64; BINS * BINS * BINS];
    for px in img.pixels() {
        let [r, g, b] = px.0;
        let bin = |v: u8| v as usize * BINS / 256;
        counts[bin(r) * BINS * BINS + bin(g) * BINS + bin(b)] += 1;
    }
    let total = (w * h) as f64;
    for (o, c) in out.iter_mut().zip(counts) {
        *o = c as f64 / total;
    }

    // Cell bounds partition the image when it is at least 8 pixels wide/high;
    // smaller images map each cell to at least one pixel.
    let span = |i: usize, len: usize| {
        let lo = (i * len / GRID).min(len - 1);
        let hi = ((i + 1) * len / GRID).max(lo + 1).min(len);
        lo..hi
    };
    for gy in 0..GRID {
        for gx in 0..GRID {
            let (mut sum, mut n) = (0.0, 0usize);
            for y in span(gy, h) {
                for x in span(gx, w) {
                    let [r, g, b] = img.get_pixel(x as u32, y as u32).0;
                    sum += (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0;
                    n += 1;
                }
            }
            out[BINS * BINS * BINS + gy * GRID + gx] = sum / n as f64;
        }
    }

    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(out)
}

/// Decodes an image file and embeds it with [`fallback_embed`].
pub fn embed_file(path: &Path) -> Result<Vec<f64>, AssistError> {
    let img = image::open(path).map_err(|e| AssistError::Decode(format!("{}: {e}", path.display())))?;
    fallback_embed(&img.to_rgb8())
}
