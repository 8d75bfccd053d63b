use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Side of the square, non-overlapping window.
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

impl SsimParams {
    fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::domain(format!(
                "SSIM window must be at least 2, got {}",
                self.window
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(Error::domain("SSIM constants must be positive"));
        }
        Ok(())
    }

    /// `(C1, C2) = ((k1 L)^2, (k2 L)^2)`.
    pub fn stabilizers(&self) -> (f64, f64) {
        let c1 = self.k1 * self.dynamic_range;
        let c2 = self.k2 * self.dynamic_range;
        (c1 * c1, c2 * c2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MssimReport {
    /// Row-major over the window grid.
    pub per_window: Vec<f64>,
    pub mssim: f64,
    pub window_count: usize,
}

/// Mean SSIM over non-overlapping `window x window` tiles. Tiles that would
/// run past the right or bottom edge are dropped.
pub fn mssim(reference: &GrayImage, test: &GrayImage, params: &SsimParams) -> Result<MssimReport> {
    params.validate()?;
    let (w, h) = (reference.width(), reference.height());
    if (w, h) != (test.width(), test.height()) {
        return Err(Error::domain(format!(
            "images differ in size: {w}x{h} vs {}x{}",
            test.width(),
            test.height()
        )));
    }
    let s = params.window;
    if w < s || h < s {
        return Err(Error::domain(format!(
            "{w}x{h} image is smaller than the {s}x{s} window"
        )));
    }
    let (cols, rows) = (w / s, h / s);
    let (c1, c2) = params.stabilizers();
    let per_window = parallel::map_range(cols * rows, |k| {
        window_ssim(reference, test, (k % cols) * s, (k / cols) * s, s, c1, c2)
    });
    let window_count = per_window.len();
    let mssim = per_window.iter().sum::<f64>() / window_count as f64;
    Ok(MssimReport {
        per_window,
        mssim,
        window_count,
    })
}

fn window_ssim(p: &GrayImage, q: &GrayImage, x0: usize, y0: usize, s: usize, c1: f64, c2: f64) -> f64 {
    let count = (s * s) as f64;
    let (mut sum_p, mut sum_q) = (0u64, 0u64);
    for y in y0..y0 + s {
        for x in x0..x0 + s {
            sum_p += p.get(x, y) as u64;
            sum_q += q.get(x, y) as u64;
        }
    }
    let mu_p = sum_p as f64 / count;
    let mu_q = sum_q as f64 / count;
    let (mut var_p, mut var_q, mut cov) = (0.0, 0.0, 0.0);
    for y in y0..y0 + s {
        for x in x0..x0 + s {
            let dp = p.get(x, y) as f64 - mu_p;
            let dq = q.get(x, y) as f64 - mu_q;
            var_p += dp * dp;
            var_q += dq * dq;
            cov += dp * dq;
        }
    }
    var_p /= count;
    var_q /= count;
    cov /= count;
    let luminance = (2.0 * (mu_p * mu_q) + c1) / (mu_p * mu_p + mu_q * mu_q + c1);
    let structure = (2.0 * cov + c2) / (var_p + var_q + c2);
    luminance * structure
}
