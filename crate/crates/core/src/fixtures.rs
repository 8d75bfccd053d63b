//! Deterministic synthetic images used by the tests, benches and docs.
//!
//! Each generator is seeded and uses ChaCha, so a given seed reproduces the
//! same pixels on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::raster::{round_level, GrayImage, RgbImage};

/// A generated image together with the population each pixel was drawn from.
#[derive(Debug, Clone)]
pub struct LabeledFixture {
    pub image: RgbImage,
    /// Population index per pixel, row-major.
    pub labels: Vec<u8>,
}

impl LabeledFixture {
    pub fn gray(&self) -> GrayImage {
        let values = self.image.pixels().iter().map(|p| p[0]).collect();
        GrayImage::new(self.image.width(), self.image.height(), values).expect("fixture dimensions")
    }
}

fn gray_rgb(width: usize, height: usize, values: Vec<u8>) -> RgbImage {
    RgbImage::new(width, height, values.into_iter().map(|v| [v, v, v]).collect()).expect("fixture dimensions")
}

/// Gray image split vertically: left half `left`, right half `right`.
pub fn two_halves(width: usize, height: usize, left: u8, right: u8) -> RgbImage {
    let values = (0..width * height)
        .map(|p| if p % width < width / 2 { left } else { right })
        .collect();
    gray_rgb(width, height, values)
}

/// 40x50 image with exactly 1000 pixels at level 50 and 1000 at level 200.
pub fn two_spike() -> RgbImage {
    two_halves(40, 50, 50, 200)
}

/// Fills each pixel from the normal population chosen by `region`.
fn gaussian_regions(
    width: usize,
    height: usize,
    populations: &[(f64, f64)],
    seed: u64,
    region: impl Fn(usize, usize) -> u8,
) -> LabeledFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Normal<f64>> = populations
        .iter()
        .map(|&(mean, sd)| Normal::new(mean, sd).expect("finite parameters"))
        .collect();
    let mut labels = Vec::with_capacity(width * height);
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let label = region(x, y);
            labels.push(label);
            values.push(round_level(dists[label as usize].sample(&mut rng)));
        }
    }
    LabeledFixture {
        image: gray_rgb(width, height, values),
        labels,
    }
}

/// Square image with a centred bright disk (mean 180) on a dark background
/// (mean 60), both with standard deviation 12. The disk covers roughly half
/// the pixels. Label 1 marks the disk.
pub fn two_gaussians(size: usize, seed: u64) -> LabeledFixture {
    let c = size as f64 / 2.0;
    let r2 = size as f64 * size as f64 / (2.0 * std::f64::consts::PI);
    gaussian_regions(size, size, &[(60.0, 12.0), (180.0, 12.0)], seed, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
        u8::from(dx * dx + dy * dy <= r2)
    })
}

/// Population means and standard deviations of [`four_gaussians`].
pub const FOUR_GAUSSIAN_POPULATIONS: [(f64, f64); 4] = [(30.0, 4.0), (80.0, 4.0), (150.0, 4.0), (210.0, 4.0)];

/// 256x256 image of four 64-pixel-wide vertical bands, one per population
/// of [`FOUR_GAUSSIAN_POPULATIONS`].
pub fn four_gaussians(seed: u64) -> LabeledFixture {
    gaussian_regions(256, 256, &FOUR_GAUSSIAN_POPULATIONS, seed, |x, _| (x / 64) as u8)
}

/// Colored rectangles and a disk on a textured background. Exercises real
/// chroma in the YIQ round trip.
pub fn color_objects(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter: Vec<[i16; 3]> = (0..width * height)
        .map(|_| {
            [
                rng.random_range(-6..=6),
                rng.random_range(-6..=6),
                rng.random_range(-6..=6),
            ]
        })
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64 / width as f64, y as f64 / height as f64);
        let base: [i16; 3] = if (fx - 0.7).powi(2) + (fy - 0.6).powi(2) < 0.04 {
            [220, 40, 30]
        } else if (0.1..0.4).contains(&fx) && (0.2..0.7).contains(&fy) {
            [30, 90, 200]
        } else if fy > 0.85 {
            [250, 240, 60]
        } else {
            [20, 110 + (fx * 60.0) as i16, 40]
        };
        let j = jitter[y * width + x];
        [0, 1, 2].map(|c| (base[c] + j[c]).clamp(0, 255) as u8)
    })
    .expect("fixture dimensions")
}

/// Every fixture image by name.
pub fn all() -> Vec<(&'static str, RgbImage)> {
    vec![
        ("two_spike", two_spike()),
        ("two_halves", two_halves(100, 100, 60, 180)),
        ("two_gaussians", two_gaussians(256, 1).image),
        ("four_gaussians", four_gaussians(2).image),
        ("color_objects", color_objects(96, 64, 3)),
    ]
}
