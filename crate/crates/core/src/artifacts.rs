//! PNG renderings shared by the CLI and the service, so both emit the same
//! bytes for the same parameters.

use crate::analysis::{canny_edges, CannyParams};
use crate::error::Result;
use crate::extract::ExtractionResult;
use crate::raster::{encode_png_gray, encode_png_rgb};
use crate::threshold::SegmentedImage;

pub const SEGMENTED: &str = "segmented.png";
pub const MASK: &str = "mask.png";
pub const EXTRACTED: &str = "extracted.png";
pub const EDGES: &str = "edges.png";

/// Encoded extraction outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionPngs {
    pub mask: Vec<u8>,
    pub extracted: Vec<u8>,
    pub edges: Vec<u8>,
}

impl ExtractionPngs {
    /// `(file name, bytes)` pairs.
    pub fn named(&self) -> [(&'static str, &[u8]); 3] {
        [(MASK, &self.mask), (EXTRACTED, &self.extracted), (EDGES, &self.edges)]
    }
}

/// Mask as 0/255 gray, extracted RGB, and Canny edges of the extracted Y.
pub fn render_extraction(result: &ExtractionResult, canny: &CannyParams) -> Result<ExtractionPngs> {
    let edges = canny_edges(&result.extracted_y, canny)?;
    Ok(ExtractionPngs {
        mask: encode_png_gray(&result.mask.to_gray())?,
        extracted: encode_png_rgb(&result.extracted_rgb)?,
        edges: encode_png_gray(&edges.to_gray())?,
    })
}

pub fn render_segmented(seg: &SegmentedImage) -> Result<Vec<u8>> {
    encode_png_gray(seg.mapped())
}
