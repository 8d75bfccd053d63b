//! 256-bin gray-level histograms and their sub-range statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::{round_level, GrayImage};

/// Largest accepted skewness factor.
pub const KAPPA_MAX: f64 = 8.0;

/// Frequency table of gray levels, indexed by level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    #[serde(with = "counts_serde")]
    counts: [u64; 256],
}

mod counts_serde {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(counts: &[u64; 256], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(counts.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u64; 256], D::Error> {
        let v = Vec::<u64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<u64>| D::Error::custom(format!("expected 256 bins, got {}", v.len())))
    }
}

impl Histogram {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Self { counts }
    }

    /// Histogram with the given `(level, count)` pairs and zeros elsewhere.
    pub fn from_pairs(pairs: &[(u8, u64)]) -> Self {
        let mut counts = [0u64; 256];
        for &(level, count) in pairs {
            counts[level as usize] += count;
        }
        Self { counts }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn count(&self, level: u8) -> u64 {
        self.counts[level as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Number of bins with at least one pixel.
    pub fn populated_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Levels of the populated bins, ascending.
    pub fn populated_levels(&self) -> Vec<u8> {
        (0..=255u8).filter(|&v| self.counts[v as usize] > 0).collect()
    }

    /// Weighted mean and standard deviation of the levels in `[a, b]`.
    pub fn range_stats(&self, a: u8, b: u8) -> Result<RangeStats> {
        if a > b {
            return Err(Error::domain(format!("empty range [{a}, {b}]")));
        }
        let bins = &self.counts[a as usize..=b as usize];
        let mass: u64 = bins.iter().sum();
        if mass == 0 {
            return Ok(RangeStats {
                a,
                b,
                mass: 0,
                mean: (a as f64 + b as f64) / 2.0,
                std: 0.0,
            });
        }
        let first = a as u64;
        let weighted: u64 = bins.iter().enumerate().map(|(k, &c)| c * (first + k as u64)).sum();
        let mean = weighted as f64 / mass as f64;
        let ss: f64 = bins
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| {
                let d = (first + k as u64) as f64 - mean;
                c as f64 * d * d
            })
            .sum();
        Ok(RangeStats {
            a,
            b,
            mass,
            mean,
            std: (ss / mass as f64).sqrt(),
        })
    }

    /// Statistics over the full gray range.
    pub fn global_stats(&self) -> RangeStats {
        self.range_stats(0, 255).expect("full range is valid")
    }

    /// `value,count` CSV with a header line and one row per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(256 * 8);
        out.push_str("value,count\n");
        for (v, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{v},{c}");
        }
        out
    }
}

pub fn build_histogram(img: &GrayImage) -> Histogram {
    Histogram {
        counts: parallel::bin_counts(img.values(), 1 << 16, |&v| v),
    }
}

/// Weighted statistics of one inclusive histogram sub-range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeStats {
    pub a: u8,
    pub b: u8,
    /// Pixel count in `[a, b]`.
    pub mass: u64,
    /// Midpoint of the range when `mass == 0`.
    pub mean: f64,
    pub std: f64,
}

pub(crate) fn validate_kappa(name: &str, kappa: f64) -> Result<()> {
    if !(0.0..=KAPPA_MAX).contains(&kappa) {
        return Err(Error::domain(format!(
            "{name} must lie in [0, {KAPPA_MAX}], got {kappa}"
        )));
    }
    Ok(())
}

/// `(round(mean - kappa1 * std), round(mean + kappa2 * std))`, each clamped
/// into the range the statistics were taken over.
pub fn kappa_thresholds(stats: &RangeStats, kappa1: f64, kappa2: f64) -> Result<(u8, u8)> {
    validate_kappa("kappa1", kappa1)?;
    validate_kappa("kappa2", kappa2)?;
    if stats.mass == 0 {
        return Err(Error::domain(format!(
            "no pixels in [{}, {}] to place thresholds",
            stats.a, stats.b
        )));
    }
    let clamp = |t: f64| round_level(t).clamp(stats.a, stats.b);
    let low = clamp(stats.mean - kappa1 * stats.std);
    let high = clamp(stats.mean + kappa2 * stats.std);
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_bins() -> Histogram {
        Histogram::from_pairs(&[(10, 5), (20, 5)])
    }

    fn uniform() -> Histogram {
        Histogram::from_counts([1; 256])
    }

    #[test]
    fn builds_counts() {
        let img = GrayImage::filled(2, 2, 7).unwrap();
        let h = build_histogram(&img);
        assert_eq!(h.count(7), 4);
        assert_eq!(h.total(), 4);
        let img = GrayImage::new(4, 1, vec![0, 0, 255, 10]).unwrap();
        let h = build_histogram(&img);
        assert_eq!((h.count(0), h.count(10), h.count(255)), (2, 1, 1));
        assert_eq!(h.populated_bins(), 3);
    }

    #[test]
    fn two_bin_stats() {
        let s = two_bins().range_stats(0, 255).unwrap();
        assert_eq!(s.mass, 10);
        assert_abs_diff_eq!(s.mean, 15.0);
        assert_abs_diff_eq!(s.std, 5.0);
        let s = two_bins().range_stats(15, 255).unwrap();
        assert_abs_diff_eq!(s.mean, 20.0);
        assert_eq!(s.std, 0.0);
    }

    #[test]
    fn uniform_stats_match_closed_form() {
        let s = uniform().global_stats();
        assert_abs_diff_eq!(s.mean, 127.5);
        let closed = ((256.0f64 * 256.0 - 1.0) / 12.0).sqrt();
        assert_abs_diff_eq!(s.std, closed, epsilon = 1e-9);
        assert_abs_diff_eq!(s.std, 73.90, epsilon = 5e-3);
    }

    #[test]
    fn empty_range_falls_back_to_midpoint() {
        let s = two_bins().range_stats(100, 201).unwrap();
        assert_eq!(s.mass, 0);
        assert_eq!(s.mean, 150.5);
        assert_eq!(s.std, 0.0);
        assert!(two_bins().range_stats(5, 4).is_err());
    }

    #[test]
    fn kappa_threshold_examples() {
        let s = uniform().global_stats();
        assert_eq!(kappa_thresholds(&s, 1.0, 1.0).unwrap(), (54, 201));
        assert_eq!(kappa_thresholds(&s, 0.0, 0.0).unwrap(), (128, 128));
        let s = RangeStats {
            a: 0,
            b: 255,
            mass: 10,
            mean: 20.0,
            std: 30.0,
        };
        assert_eq!(kappa_thresholds(&s, 1.0, 1.0).unwrap().0, 0);
    }

    #[test]
    fn kappa_validation() {
        let s = uniform().global_stats();
        assert!(kappa_thresholds(&s, -0.1, 1.0).is_err());
        assert!(kappa_thresholds(&s, 1.0, 8.5).is_err());
        assert!(kappa_thresholds(&s, f64::NAN, 1.0).is_err());
        let empty = two_bins().range_stats(100, 200).unwrap();
        assert!(kappa_thresholds(&empty, 1.0, 1.0).is_err());
    }

    #[test]
    fn csv_has_all_bins() {
        let csv = two_bins().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 257);
        assert_eq!(lines[0], "value,count");
        assert_eq!(lines[11], "10,5");
        assert_eq!(lines[256], "255,0");
    }

    #[test]
    fn serde_round_trip_keeps_bins() {
        let h = two_bins();
        let json = serde_json::to_string(&h).unwrap();
        let back: Histogram = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<Histogram>(r#"{"counts":[1,2]}"#).is_err());
    }
}
