//! Multilevel thresholding.
//!
//! Two recursive weighted-mean methodologies and a multilevel Otsu baseline.
//! All of them produce a [`ThresholdSet`]: `N` strictly increasing gray
//! levels that cut `[0, 255]` into `N + 1` segments. Segment `i` owns the
//! half-open range `[T_i, T_{i+1})` with `T_0 = 0`; the final segment is
//! closed at 255. Every pixel in a segment is mapped to the segment's
//! weighted mean.
//!
//! * Methodology I nests: each level takes `mu - kappa1*sigma` and
//!   `mu + kappa2*sigma` of the current range and recurses into the range
//!   between them, so segments get narrower toward the weighted mean.
//! * Methodology II chains outward: starting from the global weighted mean,
//!   the left chain recurses on `[0, T]` and the right chain on `[T, 255]`,
//!   so segments get narrower toward black and white.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{kappa_thresholds, validate_kappa, Histogram};
use crate::parallel;
use crate::raster::{round_level, GrayImage};

/// Largest `N` accepted by the weighted-mean methodologies.
pub const MAX_THRESHOLDS: usize = 253;
/// Largest `N` accepted by the Otsu baseline.
pub const MAX_OTSU_THRESHOLDS: usize = 254;
/// Otsu thresholds up to this count are found by exhaustive search.
pub const OTSU_EXHAUSTIVE_MAX: usize = 3;
const OTSU_MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Methodology {
    M1,
    M2,
    Otsu,
}

impl Methodology {
    pub const ALL: [Methodology; 3] = [Methodology::M1, Methodology::M2, Methodology::Otsu];

    pub fn as_str(self) -> &'static str {
        match self {
            Methodology::M1 => "m1",
            Methodology::M2 => "m2",
            Methodology::Otsu => "otsu",
        }
    }
}

impl fmt::Display for Methodology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Methodology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "i" => Ok(Methodology::M1),
            "m2" | "ii" => Ok(Methodology::M2),
            "otsu" => Ok(Methodology::Otsu),
            other => Err(Error::domain(format!("unknown method {other:?}"))),
        }
    }
}

/// The output of a thresholding run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThresholdSetWire")]
pub struct ThresholdSet {
    method: Methodology,
    n: usize,
    kappa1: f64,
    kappa2: f64,
    thresholds: Vec<u8>,
    segment_means: Vec<u8>,
    /// Set when the recursion collapsed and thresholds had to be
    /// synthesized or dropped.
    #[serde(default, skip_serializing_if = "is_false")]
    degenerate: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Deserialize)]
struct ThresholdSetWire {
    method: Methodology,
    n: usize,
    kappa1: f64,
    kappa2: f64,
    thresholds: Vec<u8>,
    segment_means: Vec<u8>,
    #[serde(default)]
    degenerate: bool,
}

impl TryFrom<ThresholdSetWire> for ThresholdSet {
    type Error = Error;

    fn try_from(w: ThresholdSetWire) -> Result<Self> {
        let ts = ThresholdSet {
            method: w.method,
            n: w.n,
            kappa1: w.kappa1,
            kappa2: w.kappa2,
            thresholds: w.thresholds,
            segment_means: w.segment_means,
            degenerate: w.degenerate,
        };
        ts.check()?;
        Ok(ts)
    }
}

impl ThresholdSet {
    /// Builds a set from already-valid thresholds, computing segment means
    /// from `hist`.
    pub fn from_thresholds(
        hist: &Histogram,
        method: Methodology,
        kappa1: f64,
        kappa2: f64,
        thresholds: Vec<u8>,
    ) -> Result<Self> {
        let mut ts = ThresholdSet {
            method,
            n: thresholds.len(),
            kappa1,
            kappa2,
            thresholds,
            segment_means: Vec::new(),
            degenerate: false,
        };
        ts.segment_means = segment_means(hist, &ts.thresholds);
        ts.check()?;
        Ok(ts)
    }

    fn check(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::domain("a threshold set needs at least one threshold"));
        }
        if self.thresholds[0] == 0 || self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("thresholds must be strictly increasing and positive"));
        }
        if self.segment_means.len() != self.thresholds.len() + 1 {
            return Err(Error::domain("need exactly one segment mean per segment"));
        }
        for (i, &m) in self.segment_means.iter().enumerate() {
            let (lo, hi) = self.segment_range(i);
            if m < lo || m > hi {
                return Err(Error::domain(format!("segment mean {m} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn method(&self) -> Methodology {
        self.method
    }

    /// Requested number of thresholds.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn thresholds(&self) -> &[u8] {
        &self.thresholds
    }

    pub fn segment_means(&self) -> &[u8] {
        &self.segment_means
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn segment_count(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// `[0, T_1, ..., T_N, 255]`.
    pub fn segment_bounds(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.thresholds.len() + 2);
        b.push(0);
        b.extend_from_slice(&self.thresholds);
        b.push(255);
        b
    }

    /// Inclusive gray range owned by segment `i`.
    pub fn segment_range(&self, i: usize) -> (u8, u8) {
        segment_range(&self.thresholds, i)
    }

    /// Index of the segment owning `level`.
    pub fn segment_of(&self, level: u8) -> usize {
        self.thresholds.partition_point(|&t| t <= level)
    }

    /// Same cut points and segment values, ignoring the method tag.
    pub fn same_partition(&self, other: &ThresholdSet) -> bool {
        self.n == other.n
            && self.kappa1 == other.kappa1
            && self.kappa2 == other.kappa2
            && self.thresholds == other.thresholds
            && self.segment_means == other.segment_means
            && self.degenerate == other.degenerate
    }

    fn label_table(&self) -> [u8; 256] {
        let mut table = [0u8; 256];
        let mut seg = 0usize;
        for (level, slot) in table.iter_mut().enumerate() {
            while seg < self.thresholds.len() && self.thresholds[seg] as usize <= level {
                seg += 1;
            }
            *slot = seg as u8;
        }
        table
    }
}

fn segment_range(thresholds: &[u8], i: usize) -> (u8, u8) {
    let lo = if i == 0 { 0 } else { thresholds[i - 1] };
    let hi = if i < thresholds.len() { thresholds[i] - 1 } else { 255 };
    (lo, hi)
}

fn segment_means(hist: &Histogram, thresholds: &[u8]) -> Vec<u8> {
    (0..=thresholds.len())
        .map(|i| {
            let (lo, hi) = segment_range(thresholds, i);
            let stats = hist.range_stats(lo, hi).expect("segment ranges are ordered");
            round_level(stats.mean)
        })
        .collect()
}

fn midpoint(lo: u8, hi: u8) -> u8 {
    round_level((lo as f64 + hi as f64) / 2.0)
}

/// Method selector plus its knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub method: Methodology,
    pub n: usize,
    #[serde(default = "default_kappa")]
    pub kappa1: f64,
    #[serde(default = "default_kappa")]
    pub kappa2: f64,
}

fn default_kappa() -> f64 {
    1.0
}

impl SegmentParams {
    pub fn new(method: Methodology, n: usize, kappa1: f64, kappa2: f64) -> Self {
        Self {
            method,
            n,
            kappa1,
            kappa2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Methodology::M1 | Methodology::M2 => validate_odd(self.n)?,
            Methodology::Otsu => {
                if self.n == 0 || self.n > MAX_OTSU_THRESHOLDS {
                    return Err(Error::domain(format!(
                        "N must lie in [1, {MAX_OTSU_THRESHOLDS}], got {}",
                        self.n
                    )));
                }
            }
        }
        validate_kappa("kappa1", self.kappa1)?;
        validate_kappa("kappa2", self.kappa2)
    }
}

fn validate_odd(n: usize) -> Result<()> {
    if n.is_multiple_of(2) {
        return Err(Error::domain(format!("N must be odd, got {n}")));
    }
    if n > MAX_THRESHOLDS {
        return Err(Error::domain(format!("N must be at most {MAX_THRESHOLDS}, got {n}")));
    }
    Ok(())
}

fn require_pixels(hist: &Histogram) -> Result<()> {
    if hist.is_empty() {
        return Err(Error::domain("histogram is empty"));
    }
    Ok(())
}

/// Dispatches to the selected methodology.
pub fn compute_thresholds(hist: &Histogram, params: &SegmentParams) -> Result<ThresholdSet> {
    params.validate()?;
    match params.method {
        Methodology::M1 => thresholds_m1(hist, params.n, params.kappa1, params.kappa2),
        Methodology::M2 => thresholds_m2(hist, params.n, params.kappa1, params.kappa2),
        Methodology::Otsu => thresholds_otsu(hist, params.n),
    }
}

/// Raw recursion state of methodology I before rounding collisions are
/// resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedTrace {
    /// `R_0 = [0, 255]` followed by every range the recursion entered.
    pub ranges: Vec<(u8, u8)>,
    /// `mu - kappa1*sigma` per level, outermost first.
    pub lows: Vec<u8>,
    /// `mu + kappa2*sigma` per level, outermost first.
    pub highs: Vec<u8>,
    pub mid: u8,
    pub collapsed: bool,
}

pub fn nested_trace(hist: &Histogram, n: usize, kappa1: f64, kappa2: f64) -> Result<NestedTrace> {
    validate_odd(n)?;
    validate_kappa("kappa1", kappa1)?;
    validate_kappa("kappa2", kappa2)?;
    require_pixels(hist)?;

    let levels = (n - 1) / 2;
    let (mut lo, mut hi) = (0u8, 255u8);
    let mut trace = NestedTrace {
        ranges: vec![(lo, hi)],
        lows: Vec::with_capacity(levels),
        highs: Vec::with_capacity(levels),
        mid: 0,
        collapsed: false,
    };
    for _ in 0..levels {
        let stats = hist.range_stats(lo, hi)?;
        if stats.mass == 0 || hi - lo < 2 {
            trace.collapsed = true;
            break;
        }
        let (low, high) = kappa_thresholds(&stats, kappa1, kappa2)?;
        if low >= high {
            trace.collapsed = true;
            break;
        }
        trace.lows.push(low);
        trace.highs.push(high);
        (lo, hi) = (low, high);
        trace.ranges.push((lo, hi));
    }
    trace.mid = if trace.collapsed {
        midpoint(lo, hi)
    } else {
        round_level(hist.range_stats(lo, hi)?.mean)
    };
    Ok(trace)
}

/// Methodology I: nested ranges converging on the weighted mean.
pub fn thresholds_m1(hist: &Histogram, n: usize, kappa1: f64, kappa2: f64) -> Result<ThresholdSet> {
    let trace = nested_trace(hist, n, kappa1, kappa2)?;
    let mut raw = trace.lows.clone();
    raw.push(trace.mid);
    raw.extend(trace.highs.iter().rev());
    Ok(finalize(hist, Methodology::M1, n, kappa1, kappa2, raw, trace.collapsed))
}

/// Raw recursion state of methodology II.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub mid: u8,
    /// Left chain in generation order, moving toward 0.
    pub left: Vec<u8>,
    /// Right chain in generation order, moving toward 255.
    pub right: Vec<u8>,
    pub collapsed: bool,
}

pub fn chain_trace(hist: &Histogram, n: usize, kappa1: f64, kappa2: f64) -> Result<ChainTrace> {
    validate_odd(n)?;
    validate_kappa("kappa1", kappa1)?;
    validate_kappa("kappa2", kappa2)?;
    require_pixels(hist)?;

    let levels = (n - 1) / 2;
    let mid = round_level(hist.global_stats().mean);
    let mut collapsed = false;

    let mut left = Vec::with_capacity(levels);
    let mut prev = mid;
    for _ in 0..levels {
        let stats = hist.range_stats(0, prev)?;
        let next = if stats.mass == 0 || prev < 2 {
            None
        } else {
            Some(kappa_thresholds(&stats, kappa1, kappa2)?.0).filter(|&t| t < prev)
        };
        match next {
            Some(t) => {
                left.push(t);
                prev = t;
            }
            None => {
                left.push(midpoint(0, prev));
                collapsed = true;
                break;
            }
        }
    }

    let mut right = Vec::with_capacity(levels);
    let mut prev = mid;
    for _ in 0..levels {
        let stats = hist.range_stats(prev, 255)?;
        let next = if stats.mass == 0 || prev > 253 {
            None
        } else {
            Some(kappa_thresholds(&stats, kappa1, kappa2)?.1).filter(|&t| t > prev)
        };
        match next {
            Some(t) => {
                right.push(t);
                prev = t;
            }
            None => {
                right.push(midpoint(prev, 255));
                collapsed = true;
                break;
            }
        }
    }

    Ok(ChainTrace {
        mid,
        left,
        right,
        collapsed,
    })
}

/// Methodology II: chains diverging from the weighted mean toward both ends.
pub fn thresholds_m2(hist: &Histogram, n: usize, kappa1: f64, kappa2: f64) -> Result<ThresholdSet> {
    let trace = chain_trace(hist, n, kappa1, kappa2)?;
    let mut raw: Vec<u8> = trace.left.iter().rev().copied().collect();
    raw.push(trace.mid);
    raw.extend_from_slice(&trace.right);
    Ok(finalize(hist, Methodology::M2, n, kappa1, kappa2, raw, trace.collapsed))
}

/// Turns raw recursion output into a well-formed set of `n` thresholds in
/// `[1, 254]`: clamp, shift rounding collisions up by one level, drop what
/// cannot be shifted, then pad by splitting the widest segment at its mean.
fn finalize(
    hist: &Histogram,
    method: Methodology,
    n: usize,
    kappa1: f64,
    kappa2: f64,
    mut raw: Vec<u8>,
    mut degenerate: bool,
) -> ThresholdSet {
    const LOWEST: u8 = 1;
    const HIGHEST: u8 = 254;

    raw.sort_unstable();
    let mut cuts: Vec<u8> = Vec::with_capacity(n);
    for t in raw {
        let t = t.clamp(LOWEST, HIGHEST);
        let t = match cuts.last() {
            Some(&p) if t <= p => p + 1,
            _ => t,
        };
        if t > HIGHEST {
            degenerate = true;
        } else {
            cuts.push(t);
        }
    }
    while cuts.len() < n {
        degenerate = true;
        let Some(t) = split_widest(hist, &cuts, LOWEST, HIGHEST) else {
            break;
        };
        let at = cuts.partition_point(|&c| c < t);
        cuts.insert(at, t);
    }
    let segment_means = segment_means(hist, &cuts);
    ThresholdSet {
        method,
        n,
        kappa1,
        kappa2,
        thresholds: cuts,
        segment_means,
        degenerate,
    }
}

fn split_widest(hist: &Histogram, cuts: &[u8], lowest: u8, highest: u8) -> Option<u8> {
    let mut best: Option<(usize, u8, u8, u8, u8)> = None;
    for i in 0..=cuts.len() {
        let (lo, hi) = segment_range(cuts, i);
        let first = lo.saturating_add(1).max(lowest);
        let last = hi.min(highest);
        if lo == 255 || first > last {
            continue;
        }
        let width = (hi - lo) as usize + 1;
        if best.is_none_or(|b| width > b.0) {
            best = Some((width, lo, hi, first, last));
        }
    }
    let (_, lo, hi, first, last) = best?;
    let mean = hist.range_stats(lo, hi).ok()?.mean;
    Some(round_level(mean).clamp(first, last))
}

/// Cumulative tables for O(1) class sums.
struct Prefix {
    mass: [u64; 257],
    moment: [u64; 257],
}

impl Prefix {
    fn new(hist: &Histogram) -> Self {
        let mut mass = [0u64; 257];
        let mut moment = [0u64; 257];
        for (v, &c) in hist.counts().iter().enumerate() {
            mass[v + 1] = mass[v] + c;
            moment[v + 1] = moment[v] + c * v as u64;
        }
        Self { mass, moment }
    }

    /// `(mass, first moment)` of the inclusive level range `[lo, hi]`.
    fn class(&self, lo: usize, hi: usize) -> (u64, u64) {
        (self.mass[hi + 1] - self.mass[lo], self.moment[hi + 1] - self.moment[lo])
    }

    fn total(&self) -> (u64, u64) {
        (self.mass[256], self.moment[256])
    }

    /// Classes `[0, c_0], (c_0, c_1], ..., (c_last, 255]`.
    fn classes<'a>(&'a self, cuts: &'a [u8]) -> impl Iterator<Item = (u64, u64)> + 'a {
        (0..=cuts.len()).map(move |i| {
            let lo = if i == 0 { 0 } else { cuts[i - 1] as usize + 1 };
            let hi = if i < cuts.len() { cuts[i] as usize } else { 255 };
            self.class(lo, hi)
        })
    }

    fn between_class_variance(&self, cuts: &[u8]) -> f64 {
        let (total_mass, total_moment) = self.total();
        let tw = total_mass as f64;
        let global_mean = total_moment as f64 / tw;
        let mut acc = 0.0;
        for (w, s) in self.classes(cuts) {
            if w == 0 {
                continue;
            }
            let weight = w as f64 / tw;
            let d = s as f64 / w as f64 - global_mean;
            acc += weight * d * d;
        }
        acc
    }
}

/// Between-class variance `sum_c w_c (mu_c - mu)^2` of the Otsu partition
/// `[0, c_0], (c_0, c_1], ..., (c_last, 255]`.
pub fn between_class_variance(hist: &Histogram, cuts: &[u8]) -> f64 {
    Prefix::new(hist).between_class_variance(cuts)
}

/// Otsu cut levels in the classic convention: each cut is the last level of
/// its lower class. Exhaustive for up to [`OTSU_EXHAUSTIVE_MAX`] cuts with
/// lexicographically smallest tie-break; iterated class means beyond that.
pub fn otsu_cuts(hist: &Histogram, n: usize) -> Result<Vec<u8>> {
    if n == 0 || n > MAX_OTSU_THRESHOLDS {
        return Err(Error::domain(format!(
            "N must lie in [1, {MAX_OTSU_THRESHOLDS}], got {n}"
        )));
    }
    let populated = hist.populated_bins();
    if populated < n + 1 {
        return Err(Error::domain(format!(
            "{} classes need at least {} populated bins, histogram has {populated}",
            n + 1,
            n + 1
        )));
    }
    let prefix = Prefix::new(hist);
    Ok(if n <= OTSU_EXHAUSTIVE_MAX {
        otsu_exhaustive(&prefix, n)
    } else {
        otsu_iterated(&prefix, n)
    })
}

fn otsu_exhaustive(prefix: &Prefix, n: usize) -> Vec<u8> {
    fn search(prefix: &Prefix, n: usize, cuts: &mut Vec<u8>, best: &mut (f64, Vec<u8>)) {
        if cuts.len() == n {
            let v = prefix.between_class_variance(cuts);
            if v > best.0 {
                *best = (v, cuts.clone());
            }
            return;
        }
        let first = cuts.last().map_or(0, |&c| c + 1);
        let last = 254 - (n - 1 - cuts.len()) as u8;
        for c in first..=last {
            cuts.push(c);
            search(prefix, n, cuts, best);
            cuts.pop();
        }
    }

    let outer = 255 - (n - 1);
    let per_first = parallel::map_range(outer, |c0| {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut cuts = vec![c0 as u8];
        search(prefix, n, &mut cuts, &mut best);
        best
    });
    // ascending first cut, strict improvement only: keeps the lexicographic minimum
    per_first
        .into_iter()
        .fold(
            (f64::NEG_INFINITY, Vec::new()),
            |acc, cand| if cand.0 > acc.0 { cand } else { acc },
        )
        .1
}

fn otsu_iterated(prefix: &Prefix, n: usize) -> Vec<u8> {
    let (total, _) = prefix.total();
    let mut cuts: Vec<u8> = (1..=n)
        .map(|j| {
            let target = (j as u128 * total as u128).div_ceil(n as u128 + 1) as u64;
            let level = prefix.mass[1..].partition_point(|&m| m < target);
            level.min(254) as u8
        })
        .collect();
    make_strict(&mut cuts);

    for _ in 0..OTSU_MAX_SWEEPS {
        let means: Vec<f64> = (0..=n)
            .map(|i| {
                let lo = if i == 0 { 0 } else { cuts[i - 1] as usize + 1 };
                let hi = if i < n { cuts[i] as usize } else { 255 };
                let (w, s) = prefix.class(lo, hi);
                if w == 0 {
                    (lo + hi) as f64 / 2.0
                } else {
                    s as f64 / w as f64
                }
            })
            .collect();
        let mut next: Vec<u8> = means
            .windows(2)
            .map(|m| ((m[0] + m[1]) / 2.0).floor().clamp(0.0, 254.0) as u8)
            .collect();
        make_strict(&mut next);
        if next == cuts {
            break;
        }
        cuts = next;
    }
    cuts
}

/// Forces `cuts` strictly increasing inside `[0, 254]`.
fn make_strict(cuts: &mut [u8]) {
    let n = cuts.len();
    for j in 0..n {
        let lowest = j as u8;
        let highest = 254 - (n - 1 - j) as u8;
        let mut c = cuts[j].clamp(lowest, highest);
        if j > 0 && c <= cuts[j - 1] {
            c = cuts[j - 1] + 1;
        }
        cuts[j] = c;
    }
}

/// Multilevel Otsu baseline. The returned thresholds follow the shared
/// segment convention, so each one is the classic Otsu cut plus one.
pub fn thresholds_otsu(hist: &Histogram, n: usize) -> Result<ThresholdSet> {
    let cuts = otsu_cuts(hist, n)?;
    let thresholds = cuts.iter().map(|&c| c + 1).collect();
    ThresholdSet::from_thresholds(hist, Methodology::Otsu, 0.0, 0.0, thresholds)
}

/// A gray image after every pixel has been replaced by its segment mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedImage {
    labels: Vec<u8>,
    mapped: GrayImage,
    thresholds: ThresholdSet,
}

impl SegmentedImage {
    pub fn width(&self) -> usize {
        self.mapped.width()
    }

    pub fn height(&self) -> usize {
        self.mapped.height()
    }

    /// Per-pixel segment index in `[0, N]`.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn mapped(&self) -> &GrayImage {
        &self.mapped
    }

    pub fn thresholds(&self) -> &ThresholdSet {
        &self.thresholds
    }
}

pub fn apply_segmentation(img: &GrayImage, ts: &ThresholdSet) -> SegmentedImage {
    let table = ts.label_table();
    let labels = parallel::map_slice(img.values(), |&v| table[v as usize]);
    let values = parallel::map_slice(&labels, |&l| ts.segment_means[l as usize]);
    SegmentedImage {
        mapped: GrayImage::new(img.width(), img.height(), values).expect("same dimensions"),
        labels,
        thresholds: ts.clone(),
    }
}
