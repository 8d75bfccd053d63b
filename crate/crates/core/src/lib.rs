//! Statistical multilevel thresholding and object separation.
//!
//! The pipeline converts an RGB image to YIQ, thresholds the 8-bit
//! luminance histogram with one of two recursive weighted-mean
//! methodologies (or the multilevel Otsu baseline), maps every pixel to its
//! segment mean, and then separates an object by gating all three YIQ
//! planes with a mask built from a chosen set of segments.
//!
//! ```
//! use histoseg::{fixtures, run_pipeline, Fill, Methodology, SegmentParams, SegmentSelection};
//!
//! let img = fixtures::two_halves(64, 64, 60, 180);
//! let params = SegmentParams::new(Methodology::M1, 1, 1.0, 1.0);
//! let bright = SegmentSelection::new([1], Fill::Black).unwrap();
//! let out = run_pipeline(&img, &params, &bright).unwrap();
//! assert_eq!(out.thresholds.thresholds(), &[120]);
//! ```

pub mod analysis;
pub mod artifacts;
mod error;
pub mod extract;
pub mod fixtures;
pub mod histogram;
pub mod parallel;
pub mod raster;
pub mod threshold;

pub use error::{Error, Result};
pub use extract::{
    binarize, extract_object, run_pipeline, BinaryMask, ExtractionResult, Fill, PipelineOutput, SegmentSelection,
};
pub use histogram::{build_histogram, kappa_thresholds, Histogram, RangeStats};
pub use raster::{decode_image, luminance_gray, rgb_to_yiq, yiq_to_rgb, GrayImage, RgbImage, YiqImage};
pub use threshold::{
    apply_segmentation, compute_thresholds, thresholds_m1, thresholds_m2, thresholds_otsu, Methodology, SegmentParams,
    SegmentedImage, ThresholdSet,
};
