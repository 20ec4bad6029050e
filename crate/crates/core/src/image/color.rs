//! BT.601 full-range YCbCr and hexcone HSV.
//!
//! YCbCr planes are stored with chroma offset by 0.5 so they fit in `[0, 1]`.
//! HSV hue is a fraction of a full turn in `[0, 1)`.

use super::ImageBuffer;

const KR: f64 = 0.299;
const KB: f64 = 0.114;
const KG: f64 = 1.0 - KR - KB;

pub fn rgb_to_ycbcr_px([r, g, b]: [f32; 3]) -> [f32; 3] {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let y = KR * r + KG * g + KB * b;
    let cb = 0.5 + (b - y) / (2.0 * (1.0 - KB));
    let cr = 0.5 + (r - y) / (2.0 * (1.0 - KR));
    [y as f32, cb as f32, cr as f32]
}

/// Inverse of [`rgb_to_ycbcr_px`]; the result is not clipped.
pub fn ycbcr_to_rgb_px([y, cb, cr]: [f32; 3]) -> [f32; 3] {
    let y = f64::from(y);
    let cb = f64::from(cb) - 0.5;
    let cr = f64::from(cr) - 0.5;
    let r = y + 2.0 * (1.0 - KR) * cr;
    let b = y + 2.0 * (1.0 - KB) * cb;
    let g = (y - KR * r - KB * b) / KG;
    [r as f32, g as f32, b as f32]
}

pub fn rgb_to_ycbcr(img: &ImageBuffer) -> ImageBuffer {
    img.map_pixels(rgb_to_ycbcr_px)
}

pub fn ycbcr_to_rgb(img: &ImageBuffer) -> ImageBuffer {
    img.map_pixels(ycbcr_to_rgb_px)
}

pub fn rgb_to_hsv_px([r, g, b]: [f32; 3]) -> [f32; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return [0.0, s, v];
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let h = (sector / 6.0).rem_euclid(1.0);
    [if h >= 1.0 { 0.0 } else { h }, s, v]
}

pub fn hsv_to_rgb_px([h, s, v]: [f32; 3]) -> [f32; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as i32).rem_euclid(6);
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

pub fn rgb_to_hsv(img: &ImageBuffer) -> ImageBuffer {
    img.map_pixels(rgb_to_hsv_px)
}

pub fn hsv_to_rgb(img: &ImageBuffer) -> ImageBuffer {
    img.map_pixels(hsv_to_rgb_px)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_and_white() {
        for v in [0.0f32, 0.2, 0.7, 1.0] {
            let [y, cb, cr] = rgb_to_ycbcr_px([v, v, v]);
            assert!((y - v).abs() < 1e-6);
            assert!((cb - 0.5).abs() < 1e-6 && (cr - 0.5).abs() < 1e-6);
            let [_, s, val] = rgb_to_hsv_px([v, v, v]);
            assert_eq!(s, 0.0);
            assert_eq!(val, v);
        }
    }

    #[test]
    fn primaries_in_hsv() {
        assert_eq!(rgb_to_hsv_px([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        let [h, s, v] = rgb_to_hsv_px([0.0, 1.0, 0.0]);
        assert!((h - 1.0 / 3.0).abs() < 1e-6 && s == 1.0 && v == 1.0);
        let [h, ..] = rgb_to_hsv_px([0.0, 0.0, 1.0]);
        assert!((h - 2.0 / 3.0).abs() < 1e-6);
    }
}
