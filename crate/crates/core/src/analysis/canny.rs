use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::BinaryMask;
use crate::parallel;
use crate::raster::GrayImage;

/// Canny settings. `low` and `high` are fractions of the strongest gradient
/// magnitude in the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CannyParams {
    pub sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 0.1,
            high: 0.3,
        }
    }
}

impl CannyParams {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.low >= 0.0 && self.low < self.high) {
            return Err(Error::domain(format!(
                "hysteresis thresholds need 0 <= low < high, got {} and {}",
                self.low, self.high
            )));
        }
        Ok(())
    }
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

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Separable blur with edge replication.
fn blur(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let rows: Vec<Vec<f64>> = parallel::map_range(h, |y| {
        (0..w)
            .map(|x| {
                k.iter()
                    .enumerate()
                    .map(|(j, &kv)| kv * img.get(clamp_index(x as isize + j as isize - r, w), y) as f64)
                    .sum()
            })
            .collect()
    });
    let cols: Vec<Vec<f64>> = parallel::map_range(h, |y| {
        (0..w)
            .map(|x| {
                k.iter()
                    .enumerate()
                    .map(|(j, &kv)| kv * rows[clamp_index(y as isize + j as isize - r, h)][x])
                    .sum()
            })
            .collect()
    });
    cols.into_iter().flatten().collect()
}

/// Binary edge map: blur, Sobel gradients, non-maximum suppression and
/// hysteresis with 8-connectivity.
pub fn canny_edges(img: &GrayImage, params: &CannyParams) -> Result<BinaryMask> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let smooth = blur(img, params.sigma);
    let at = |x: isize, y: isize| smooth[clamp_index(y, h) * w + clamp_index(x, w)];

    // magnitude and quantized direction: 0 = horizontal gradient, 1 = 45deg,
    // 2 = vertical, 3 = 135deg
    let grads: Vec<(f64, u8)> = parallel::map_range(w * h, |p| {
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
            - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
        let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
            - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        let mag = gx.hypot(gy);
        let mut angle = gy.atan2(gx).to_degrees();
        if angle < 0.0 {
            angle += 180.0;
        }
        let dir = match angle {
            a if !(22.5..157.5).contains(&a) => 0,
            a if a < 67.5 => 1,
            a if a < 112.5 => 2,
            _ => 3,
        };
        (mag, dir)
    });
    let max_mag = grads.iter().map(|g| g.0).fold(0.0, f64::max);
    // blurred constant regions carry float noise well below one gray level
    if max_mag < 1e-6 {
        return BinaryMask::new(w, h, vec![0; w * h]);
    }
    let mag_at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            grads[y as usize * w + x as usize].0
        }
    };

    let low = params.low * max_mag;
    let high = params.high * max_mag;
    // 0 = none, 1 = weak, 2 = strong
    let class: Vec<u8> = parallel::map_range(w * h, |p| {
        let (mag, dir) = grads[p];
        if mag < low || mag < 1e-6 {
            return 0;
        }
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        let (dx, dy) = match dir {
            0 => (1, 0),
            1 => (1, 1),
            2 => (0, 1),
            _ => (-1, 1),
        };
        // ties on a plateau go to the pixel on the positive side
        let before = mag_at(x - dx, y - dy);
        let after = mag_at(x + dx, y + dy);
        if mag >= before && mag > after {
            if mag >= high {
                2
            } else {
                1
            }
        } else {
            0
        }
    });

    let mut bits = vec![0u8; w * h];
    let mut stack: Vec<usize> = (0..w * h).filter(|&p| class[p] == 2).collect();
    for &p in &stack {
        bits[p] = 1;
    }
    while let Some(p) = stack.pop() {
        let (x, y) = ((p % w) as isize, (p / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if bits[q] == 0 && class[q] >= 1 {
                    bits[q] = 1;
                    stack.push(q);
                }
            }
        }
    }
    BinaryMask::new(w, h, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_no_edges() {
        let img = GrayImage::filled(20, 20, 137).unwrap();
        let e = canny_edges(&img, &CannyParams::default()).unwrap();
        assert_eq!(e.count_ones(), 0);
    }

    #[test]
    fn vertical_step_gives_one_column() {
        let img = GrayImage::from_fn(16, 16, |x, _| if x < 8 { 0 } else { 255 }).unwrap();
        let e = canny_edges(&img, &CannyParams::default()).unwrap();
        for y in 0..16 {
            let cols: Vec<usize> = (0..16).filter(|&x| e.bits()[y * 16 + x] == 1).collect();
            assert_eq!(cols.len(), 1, "row {y}: {cols:?}");
            assert!((7..=9).contains(&cols[0]), "row {y}: {cols:?}");
        }
    }

    #[test]
    fn invalid_parameters() {
        let img = GrayImage::filled(4, 4, 0).unwrap();
        let p = CannyParams {
            low: 0.5,
            high: 0.2,
            ..CannyParams::default()
        };
        assert!(canny_edges(&img, &p).is_err());
        let p = CannyParams {
            sigma: 0.0,
            ..CannyParams::default()
        };
        assert!(canny_edges(&img, &p).is_err());
    }

    #[test]
    fn kernel_is_normalized() {
        let k = gaussian_kernel(1.4);
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
