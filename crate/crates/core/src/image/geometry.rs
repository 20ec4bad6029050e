//! Exact pixel rearrangements.

use super::ImageBuffer;
use crate::error::{Error, Result};

/// Copies the `w × h` window whose top-left corner is `(x, y)`.
pub fn crop(img: &ImageBuffer, x: usize, y: usize, w: usize, h: usize) -> Result<ImageBuffer> {
    if w == 0 || h == 0 || x + w > img.width() || y + h > img.height() {
        return Err(Error::Range(format!(
            "crop {w}x{h} at ({x},{y}) outside {}x{} image",
            img.width(),
            img.height()
        )));
    }
    ImageBuffer::from_fn(h, w, |r, c, ch| img.get(y + r, x + c, ch))
}

/// Mirror left-right.
pub fn flip_h(img: &ImageBuffer) -> ImageBuffer {
    let w = img.width();
    ImageBuffer::from_fn(img.height(), w, |y, x, c| img.get(y, w - 1 - x, c)).expect("same extents")
}

/// Mirror top-bottom.
pub fn flip_v(img: &ImageBuffer) -> ImageBuffer {
    let h = img.height();
    ImageBuffer::from_fn(h, img.width(), |y, x, c| img.get(h - 1 - y, x, c)).expect("same extents")
}

/// Rotates counter-clockwise by `k · 90°` (`k` taken mod 4).
pub fn rot90(img: &ImageBuffer, k: i32) -> ImageBuffer {
    let (h, w) = img.dims();
    match k.rem_euclid(4) {
        0 => Ok(img.clone()),
        1 => ImageBuffer::from_fn(w, h, |y, x, c| img.get(x, w - 1 - y, c)),
        2 => ImageBuffer::from_fn(h, w, |y, x, c| img.get(h - 1 - y, w - 1 - x, c)),
        _ => ImageBuffer::from_fn(w, h, |y, x, c| img.get(h - 1 - x, y, c)),
    }
    .expect("valid extents")
}

/// Reflect-pads (without repeating the edge sample) on the bottom and right.
pub fn pad_reflect(img: &ImageBuffer, bottom: usize, right: usize) -> ImageBuffer {
    let (h, w) = img.dims();
    ImageBuffer::from_fn(h + bottom, w + right, |y, x, c| img.get(reflect(y, h), reflect(x, w), c))
        .expect("valid extents")
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}
