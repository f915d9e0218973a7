//! Elastic deformation of small grayscale images.
//!
//! A deformation draws two uniform random displacement fields, smooths them
//! with a truncated Gaussian kernel and scales them by `alpha`. Each output
//! pixel then samples the source image at its own coordinate, rotated and
//! scaled about the image center, plus the smoothed displacement. Sampling is
//! bilinear with zero outside the image; results are clamped to [0, 1].

use serde::{Deserialize, Serialize};

use super::pattern::{DigitPattern, PATTERN_SIDE};
use crate::error::{Error, Result};
use crate::rng::RngState;

pub const IMAGE_SIDE: usize = PATTERN_SIDE + 2;

/// Square grayscale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    side: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 || pixels.len() != side * side {
            return Err(Error::dim(format!(
                "{} pixels do not form a {side}x{side} image",
                pixels.len()
            )));
        }
        Ok(Image { side, pixels })
    }

    pub fn zeros(side: usize) -> Self {
        Image {
            side,
            pixels: vec![0.0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.side + c]
    }

    fn at_or_zero(&self, r: isize, c: isize) -> f64 {
        let n = self.side as isize;
        if r < 0 || c < 0 || r >= n || c >= n {
            0.0
        } else {
            self.pixels[r as usize * self.side + c as usize]
        }
    }

    /// Bilinear sample at fractional `(row, col)`; reads outside are zero.
    pub fn sample(&self, r: f64, c: f64) -> f64 {
        let (r0, c0) = (r.floor(), c.floor());
        let (fr, fc) = (r - r0, c - c0);
        let (r0, c0) = (r0 as isize, c0 as isize);
        let top = (1.0 - fc) * self.at_or_zero(r0, c0) + fc * self.at_or_zero(r0, c0 + 1);
        let bottom = (1.0 - fc) * self.at_or_zero(r0 + 1, c0) + fc * self.at_or_zero(r0 + 1, c0 + 1);
        (1.0 - fr) * top + fr * bottom
    }

    /// Row-major pixel values.
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }
}

/// Centers the 8x8 grid inside a 10x10 image with a one-pixel zero border.
pub fn pad_pattern(p: &DigitPattern) -> Image {
    let mut img = Image::zeros(IMAGE_SIDE);
    for (r, row) in p.grid.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            img.pixels[(r + 1) * IMAGE_SIDE + c + 1] = v;
        }
    }
    img
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformParams {
    /// Displacement scale in pixels.
    pub alpha: f64,
    /// Standard deviation of the smoothing kernel in pixels.
    pub sigma: f64,
    /// Maximum rotation in radians.
    pub beta: f64,
    /// Scaling half-range in percent.
    pub gamma: f64,
}

impl Default for DeformParams {
    fn default() -> Self {
        DeformParams {
            alpha: 3.0,
            sigma: 7.0,
            beta: std::f64::consts::PI / 12.0,
            gamma: 15.0,
        }
    }
}

impl DeformParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha >= 0.0
            && self.sigma > 0.0
            && self.beta >= 0.0
            && (0.0..100.0).contains(&self.gamma)
            && [self.alpha, self.sigma, self.beta, self.gamma].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid deformation parameters {self:?}")))
        }
    }
}

/// Normalized 1-D Gaussian weights for offsets `-radius..=radius`,
/// `radius = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Separable 2-D convolution with zero padding.
fn smooth(field: &[f64], side: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let n = side as isize;
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for (i, w) in kernel.iter().enumerate() {
                    let k = i as isize - radius;
                    let (rr, cc) = if horizontal { (r, c + k) } else { (r + k, c) };
                    if (0..n).contains(&rr) && (0..n).contains(&cc) {
                        acc += w * src[(rr * n + cc) as usize];
                    }
                }
                out[(r * n + c) as usize] = acc;
            }
        }
        out
    };
    let h = pass(field, true);
    pass(&h, false)
}

/// One smoothed displacement field: U[-1, 1] entries, Gaussian smoothed,
/// scaled by `alpha`. Row-major, `side * side` values.
pub fn displacement_field(rng: &mut RngState, side: usize, alpha: f64, sigma: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..side * side).map(|_| rng.uniform_symmetric(1.0)).collect();
    smooth(&raw, side, &gaussian_kernel(sigma))
        .into_iter()
        .map(|d| alpha * d)
        .collect()
}

pub fn elastic_deform(rng: &mut RngState, img: &Image, params: &DeformParams) -> Result<Image> {
    params.validate()?;
    let side = img.side;
    let dx = displacement_field(rng, side, params.alpha, params.sigma);
    let dy = displacement_field(rng, side, params.alpha, params.sigma);
    let angle = rng.uniform_symmetric(params.beta);
    let g = params.gamma / 100.0;
    let sx = rng.uniform_range(1.0 - g, 1.0 + g);
    let sy = rng.uniform_range(1.0 - g, 1.0 + g);
    let (sin, cos) = angle.sin_cos();
    let center = (side as f64 - 1.0) / 2.0;

    let mut out = Image::zeros(side);
    for r in 0..side {
        for c in 0..side {
            let x = (c as f64 - center) / sx;
            let y = (r as f64 - center) / sy;
            let i = r * side + c;
            let src_c = cos * x - sin * y + center + dx[i];
            let src_r = sin * x + cos * y + center + dy[i];
            out.pixels[i] = img.sample(src_r, src_c).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::pattern::builtin_patterns;

    #[test]
    fn padding_layout() {
        let p = DigitPattern {
            digit: 0,
            grid: [[1.0; 8]; 8],
        };
        let img = pad_pattern(&p);
        assert_eq!(img.side(), 10);
        let ones = img.pixels().iter().filter(|&&v| v == 1.0).count();
        let zeros = img.pixels().iter().filter(|&&v| v == 0.0).count();
        assert_eq!((ones, zeros), (64, 36));
        for k in 0..10 {
            assert_eq!(img.get(0, k), 0.0);
            assert_eq!(img.get(9, k), 0.0);
            assert_eq!(img.get(k, 0), 0.0);
            assert_eq!(img.get(k, 9), 0.0);
        }
        let q = &builtin_patterns()[7];
        let padded = pad_pattern(q);
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(padded.get(r + 1, c + 1), q.grid[r][c]);
            }
        }
    }

    #[test]
    fn kernel_is_normalized() {
        for sigma in [0.5, 1.0, 7.0] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_when_undeformed() {
        let img = pad_pattern(&builtin_patterns()[4]);
        let params = DeformParams {
            alpha: 0.0,
            sigma: 7.0,
            beta: 0.0,
            gamma: 0.0,
        };
        let mut rng = RngState::new(1, 2);
        let out = elastic_deform(&mut rng, &img, &params).unwrap();
        for (a, b) in out.pixels().iter().zip(img.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn blank_stays_blank() {
        let mut rng = RngState::new(1, 3);
        let out = elastic_deform(&mut rng, &Image::zeros(10), &DeformParams::default()).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outputs_in_unit_range() {
        let mut rng = RngState::new(2, 3);
        let params = DeformParams {
            alpha: 8.0,
            sigma: 1.0,
            beta: 0.5,
            gamma: 30.0,
        };
        for p in builtin_patterns() {
            let out = elastic_deform(&mut rng, &pad_pattern(&p), &params).unwrap();
            assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn bilinear_sampling() {
        let img = Image::new(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(img.sample(0.5, 0.5), 1.5);
        assert_eq!(img.sample(0.0, 1.0), 1.0);
        assert_eq!(img.sample(-1.0, 0.0), 0.0);
        assert_eq!(img.sample(1.0, 1.5), 1.5);
    }

    #[test]
    fn rejects_bad_params() {
        let mut rng = RngState::new(0, 0);
        let img = Image::zeros(10);
        for bad in [
            DeformParams { sigma: 0.0, ..Default::default() },
            DeformParams { alpha: -1.0, ..Default::default() },
            DeformParams { gamma: 100.0, ..Default::default() },
        ] {
            assert!(elastic_deform(&mut rng, &img, &bad).is_err());
        }
    }
}
