//! Grayscale raster helpers.
//!
//! Continuous image coordinates put pixel `(i, j)` on the square
//! `[i, i+1) x [j, j+1)` with its sample at the center `(i + 0.5, j + 0.5)`.

use image::GrayImage;

/// Background value for samples that fall outside the source image. Slap
/// scanners produce dark ridges on a light background.
pub const WHITE: u8 = 255;

/// Bilinear sample at continuous coordinates `(x, y)`. Neighbours outside the
/// image contribute `fill`.
pub fn sample_bilinear(img: &GrayImage, x: f64, y: f64, fill: u8) -> f64 {
    let fx = x - 0.5;
    let fy = y - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let px = |i: i64, j: i64| -> f64 {
        if i < 0 || j < 0 || i >= w || j >= h {
            fill as f64
        } else {
            img.get_pixel(i as u32, j as u32).0[0] as f64
        }
    };
    let (i0, j0) = (x0 as i64, y0 as i64);
    let top = px(i0, j0) * (1.0 - tx) + px(i0 + 1, j0) * tx;
    let bottom = px(i0, j0 + 1) * (1.0 - tx) + px(i0 + 1, j0 + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

pub fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Mean absolute per-pixel difference, in gray levels. Panics on size
/// mismatch.
pub fn mean_abs_diff(a: &GrayImage, b: &GrayImage) -> f64 {
    assert_eq!(a.dimensions(), b.dimensions(), "raster size mismatch");
    let total: u64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&p, &q)| (p as i32 - q as i32).unsigned_abs() as u64)
        .sum();
    total as f64 / a.as_raw().len().max(1) as f64
}
