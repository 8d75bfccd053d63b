use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::ssim::{mssim, SsimParams};
use crate::error::{Error, Result};
use crate::histogram::build_histogram;
use crate::parallel;
use crate::raster::{luminance_gray, rgb_to_yiq, GrayImage, RgbImage};
use crate::threshold::{apply_segmentation, compute_thresholds, Methodology, SegmentParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Methodology,
    pub n: usize,
    pub mssim: f64,
}

/// MSSIM of the Y plane against its segmentation for every `n` and every
/// method, rows ordered by `n` and then M1, M2, Otsu.
pub fn compare_methods(img: &RgbImage, n_list: &[usize], kappa1: f64, kappa2: f64) -> Result<Vec<CompareRow>> {
    compare_methods_gray(&luminance_gray(&rgb_to_yiq(img)), n_list, kappa1, kappa2)
}

pub fn compare_methods_gray(gray: &GrayImage, n_list: &[usize], kappa1: f64, kappa2: f64) -> Result<Vec<CompareRow>> {
    if n_list.is_empty() {
        return Err(Error::domain("at least one N is required"));
    }
    let jobs: Vec<SegmentParams> = n_list
        .iter()
        .flat_map(|&n| Methodology::ALL.map(|m| SegmentParams::new(m, n, kappa1, kappa2)))
        .collect();
    for job in &jobs {
        job.validate()?;
    }
    let hist = build_histogram(gray);
    let ssim = SsimParams::default();
    parallel::map_slice(&jobs, |job| {
        let ts = compute_thresholds(&hist, job)?;
        let seg = apply_segmentation(gray, &ts);
        let report = mssim(gray, seg.mapped(), &ssim)?;
        Ok(CompareRow {
            method: job.method,
            n: job.n,
            mssim: report.mssim,
        })
    })
    .into_iter()
    .collect()
}

/// `image,method,n,mssim` CSV with a header line.
pub fn comparison_csv(image: &str, rows: &[CompareRow]) -> String {
    let mut out = String::from("image,method,n,mssim\n");
    for r in rows {
        let _ = writeln!(out, "{image},{},{},{:.9}", r.method, r.n, r.mssim);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn single_threshold_rows_match() {
        let img = fixtures::two_gaussians(64, 3).image;
        let rows = compare_methods(&img, &[1], 1.0, 1.0).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].method, Methodology::M1);
        assert_eq!(rows[0].mssim, rows[1].mssim);
    }

    #[test]
    fn fine_enough_segmentation_is_identity() {
        let img = GrayImage::from_fn(32, 32, |x, y| [30u8, 90, 170, 220][(x / 8 + y / 8) % 4]).unwrap();
        let hist = build_histogram(&img);
        let levels = hist.populated_levels();
        for n in [3, 5, 7, 9] {
            for m in Methodology::ALL {
                let params = SegmentParams::new(m, n, 1.0, 1.0);
                if m == Methodology::Otsu && n >= levels.len() {
                    assert!(compute_thresholds(&hist, &params).is_err());
                    continue;
                }
                let ts = compute_thresholds(&hist, &params).unwrap();
                let mut owners: Vec<usize> = levels.iter().map(|&v| ts.segment_of(v)).collect();
                owners.dedup();
                let isolated = owners.len() == levels.len();
                let score = mssim(&img, apply_segmentation(&img, &ts).mapped(), &SsimParams::default())
                    .unwrap()
                    .mssim;
                if isolated {
                    assert_eq!(score, 1.0, "{m} n={n}");
                } else {
                    assert!(score < 1.0);
                }
                if n == 9 || m == Methodology::Otsu {
                    assert!(isolated, "{m} n={n}: {:?}", ts.thresholds());
                }
            }
        }
    }

    #[test]
    fn empty_list_and_even_n() {
        let img = GrayImage::filled(8, 8, 1).unwrap();
        assert!(compare_methods_gray(&img, &[], 1.0, 1.0).is_err());
        assert!(compare_methods_gray(&img, &[2], 1.0, 1.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = vec![CompareRow {
            method: Methodology::M2,
            n: 3,
            mssim: 0.5,
        }];
        assert_eq!(
            comparison_csv("a.png", &rows),
            "image,method,n,mssim\na.png,m2,3,0.500000000\n"
        );
    }
}
