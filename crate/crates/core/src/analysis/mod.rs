//! Segmentation quality (MSSIM), edge maps for visual checks, and the
//! side-by-side method comparison.

mod canny;
mod compare;
mod ssim;

pub use canny::{canny_edges, CannyParams};
pub use compare::{compare_methods, compare_methods_gray, comparison_csv, CompareRow};
pub use ssim::{mssim, MssimReport, SsimParams};
