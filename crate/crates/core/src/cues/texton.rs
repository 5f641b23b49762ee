use std::f64::consts::FRAC_PI_4;

use super::lab_image;
use crate::raster::RasterImage;

const SCALES: [f64; 2] = [1.0, 2.0];
const ORIENTATIONS: usize = 4;

/// Responses per pixel: 4 orientations for each of 2 scales.
pub const FILTER_COUNT: usize = ORIENTATIONS * SCALES.len();

/// Symmetric reflection of an index into `0..n` (`-1 -> 0`, `n -> n-1`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * src[y * w + reflect(x as isize + i as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * tmp[reflect(y as isize + i as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn bilinear(src: &[f64], w: usize, h: usize, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |xi: isize, yi: isize| src[reflect(yi, h) * w + reflect(xi, w)];
    (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x0 + 1, y0))
        + fy * ((1.0 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1))
}

/// Oriented difference-of-offset-Gaussian responses on Lab lightness.
///
/// For scale `s` and direction `u = (cos t, sin t)` with
/// `t in {0, 45, 90, 135}` degrees, the response at `p` is
/// `G_s(p + s*u) - G_s(p - s*u)` where `G_s` is the lightness blurred by a
/// Gaussian of standard deviation `s`. Borders are reflected. The output is
/// pixel-major, [`FILTER_COUNT`] values per pixel, scale-major within a pixel.
pub fn filter_responses(img: &RasterImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let lightness: Vec<f64> = lab_image(img).iter().map(|c| c[0]).collect();
    let mut out = vec![0.0; w * h * FILTER_COUNT];
    for (si, &s) in SCALES.iter().enumerate() {
        let blurred = blur(&lightness, w, h, s);
        for o in 0..ORIENTATIONS {
            let t = o as f64 * FRAC_PI_4;
            let (dx, dy) = (s * t.cos(), s * t.sin());
            let channel = si * ORIENTATIONS + o;
            for y in 0..h {
                for x in 0..w {
                    let (xf, yf) = (x as f64, y as f64);
                    let fwd = bilinear(&blurred, w, h, xf + dx, yf + dy);
                    let back = bilinear(&blurred, w, h, xf - dx, yf - dy);
                    out[(y * w + x) * FILTER_COUNT + channel] = fwd - back;
                }
            }
        }
    }
    out
}
