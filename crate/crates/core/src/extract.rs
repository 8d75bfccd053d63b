//! Object separation: binarize on the selected segments, gate the YIQ planes
//! with the mask, fill the background and go back to RGB.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::{build_histogram, Histogram};
use crate::raster::{self, GrayImage, RgbImage, YiqImage};
use crate::threshold::{apply_segmentation, compute_thresholds, SegmentParams, SegmentedImage, ThresholdSet};

/// Background value written where the mask is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fill {
    Black,
    White,
}

impl Fill {
    pub fn level(self) -> u8 {
        match self {
            Fill::Black => 0,
            Fill::White => 255,
        }
    }
}

impl fmt::Display for Fill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fill::Black => "black",
            Fill::White => "white",
        })
    }
}

impl FromStr for Fill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "black" | "0" => Ok(Fill::Black),
            "white" | "255" => Ok(Fill::White),
            other => Err(Error::domain(format!("unknown fill {other:?}"))),
        }
    }
}

/// The segments that make up the object, and how to fill the rest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSelection {
    selected: BTreeSet<usize>,
    fill: Fill,
}

impl SegmentSelection {
    pub fn new(selected: impl IntoIterator<Item = usize>, fill: Fill) -> Result<Self> {
        let selected: BTreeSet<usize> = selected.into_iter().collect();
        if selected.is_empty() {
            return Err(Error::domain("segment selection must not be empty"));
        }
        Ok(Self { selected, fill })
    }

    /// Every segment of `ts`.
    pub fn all(ts: &ThresholdSet, fill: Fill) -> Self {
        Self {
            selected: (0..ts.segment_count()).collect(),
            fill,
        }
    }

    pub fn selected(&self) -> &BTreeSet<usize> {
        &self.selected
    }

    pub fn fill(&self) -> Fill {
        self.fill
    }

    /// Segments of `ts` not in this selection, if any remain.
    pub fn complement(&self, ts: &ThresholdSet) -> Option<Self> {
        let rest: BTreeSet<usize> = (0..ts.segment_count()).filter(|i| !self.selected.contains(i)).collect();
        (!rest.is_empty()).then_some(Self {
            selected: rest,
            fill: self.fill,
        })
    }

    fn check(&self, segments: usize) -> Result<()> {
        if let Some(&bad) = self.selected.iter().find(|&&i| i >= segments) {
            return Err(Error::domain(format!(
                "segment index {bad} out of range, valid indices are 0..={}",
                segments - 1
            )));
        }
        Ok(())
    }
}

/// Per-pixel 0/1 mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != bits.len() {
            return Err(Error::domain("mask dimensions do not match its data"));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::domain("mask values must be 0 or 1"));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// The mask as a gray image with 0 and 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::new(self.width, self.height, self.bits.iter().map(|&b| b * 255).collect())
            .expect("mask dimensions are valid")
    }
}

pub fn binarize(seg: &SegmentedImage, sel: &SegmentSelection) -> Result<BinaryMask> {
    sel.check(seg.thresholds().segment_count())?;
    let mut member = [0u8; 256];
    for &i in &sel.selected {
        member[i] = 1;
    }
    let bits = seg.labels().iter().map(|&l| member[l as usize]).collect();
    BinaryMask::new(seg.width(), seg.height(), bits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub mask: BinaryMask,
    pub extracted_rgb: RgbImage,
    pub extracted_y: GrayImage,
}

pub fn extract_object(yiq: &YiqImage, mask: &BinaryMask, fill: Fill) -> Result<ExtractionResult> {
    if yiq.width() != mask.width || yiq.height() != mask.height {
        return Err(Error::domain(format!(
            "mask is {}x{} but image is {}x{}",
            mask.width,
            mask.height,
            yiq.width(),
            yiq.height()
        )));
    }
    let background = fill.level() as f64;
    let gate = |plane: &[f64], off: f64| -> Vec<f64> {
        plane
            .iter()
            .zip(&mask.bits)
            .map(|(&v, &b)| if b == 1 { v } else { off })
            .collect()
    };
    let gated = YiqImage::new(
        yiq.width(),
        yiq.height(),
        gate(yiq.y_plane(), background),
        gate(yiq.i_plane(), 0.0),
        gate(yiq.q_plane(), 0.0),
    )?;
    Ok(ExtractionResult {
        mask: mask.clone(),
        extracted_rgb: raster::yiq_to_rgb(&gated),
        extracted_y: raster::luminance_gray(&gated),
    })
}

/// Every intermediate artifact of one pass through the pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub yiq: YiqImage,
    pub gray: GrayImage,
    pub histogram: Histogram,
    pub thresholds: ThresholdSet,
    pub segmented: SegmentedImage,
    pub extraction: ExtractionResult,
}

/// Thresholds the Y plane of `img` per `params`, segments it, and extracts
/// the segments picked by `sel`.
pub fn run_pipeline(img: &RgbImage, params: &SegmentParams, sel: &SegmentSelection) -> Result<PipelineOutput> {
    params.validate()?;
    let yiq = raster::rgb_to_yiq(img);
    let gray = raster::luminance_gray(&yiq);
    let histogram = build_histogram(&gray);
    let thresholds = compute_thresholds(&histogram, params)?;
    let segmented = apply_segmentation(&gray, &thresholds);
    let mask = binarize(&segmented, sel)?;
    let extraction = extract_object(&yiq, &mask, sel.fill)?;
    Ok(PipelineOutput {
        yiq,
        gray,
        histogram,
        thresholds,
        segmented,
        extraction,
    })
}
