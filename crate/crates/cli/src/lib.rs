//! Batch front end: segment an image, extract an object from it, or compare
//! methods by MSSIM, writing every artifact under one output directory.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use histoseg::analysis::{compare_methods, comparison_csv, mssim, CannyParams, SsimParams};
use histoseg::artifacts::{self, render_extraction, render_segmented};
use histoseg::{
    apply_segmentation, build_histogram, compute_thresholds, decode_image, luminance_gray, rgb_to_yiq, run_pipeline,
    Fill, GrayImage, Histogram, Methodology, PipelineOutput, RgbImage, SegmentParams, SegmentSelection, SegmentedImage,
    ThresholdSet,
};
use thiserror::Error;

pub const THRESHOLDS_JSON: &str = "thresholds.json";
pub const HISTOGRAM_ORIGINAL: &str = "histogram_original.csv";
pub const HISTOGRAM_SEGMENTED: &str = "histogram_segmented.csv";
pub const MSSIM_CSV: &str = "mssim.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Validation(_) => "validation",
            CliError::Internal(_) => "internal",
        }
    }
}

impl From<histoseg::Error> for CliError {
    fn from(e: histoseg::Error) -> Self {
        match e {
            histoseg::Error::Domain(m) => CliError::Validation(m),
            e @ histoseg::Error::Decode { .. } => CliError::Io(e.to_string()),
            e => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "histoseg", version, about = "Histogram thresholding and object separation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Threshold the luminance histogram and write the segmented image.
    Segment(SegmentArgs),
    /// Segment, then extract the chosen segments from the color image.
    Extract(ExtractArgs),
    /// MSSIM of every method at every N, as CSV.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    M1,
    M2,
    Otsu,
}

impl From<MethodArg> for Methodology {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::M1 => Methodology::M1,
            MethodArg::M2 => Methodology::M2,
            MethodArg::Otsu => Methodology::Otsu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FillArg {
    Black,
    White,
}

impl From<FillArg> for Fill {
    fn from(f: FillArg) -> Self {
        match f {
            FillArg::Black => Fill::Black,
            FillArg::White => Fill::White,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Emit {
    Histogram,
    Thresholds,
    Segmented,
    Mask,
    Extracted,
    Edges,
    Mssim,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Input image (PNG, JPEG, BMP or binary PPM).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub kappa1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa2: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "m1")]
    pub method: MethodArg,
    /// Number of thresholds; odd for m1 and m2.
    #[arg(short = 'n', default_value_t = 1)]
    pub n: usize,
    /// Artifacts to write.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["histogram", "thresholds", "segmented"])]
    pub emit: Vec<Emit>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub segment: SegmentArgsNoEmit,
    /// Segment indices making up the object, e.g. `1,3`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub segments: Vec<usize>,
    #[arg(long, value_enum, default_value = "black")]
    pub fill: FillArg,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["mask", "extracted", "edges"])]
    pub emit: Vec<Emit>,
    /// Gaussian sigma of the edge detector.
    #[arg(long, default_value_t = 1.4)]
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the strongest gradient.
    #[arg(long, default_value_t = 0.1)]
    pub canny_low: f64,
    #[arg(long, default_value_t = 0.3)]
    pub canny_high: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SegmentArgsNoEmit {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "m1")]
    pub method: MethodArg,
    #[arg(short = 'n', default_value_t = 1)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Odd threshold counts, e.g. `1,3,5,7`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
}

/// Everything one job needs, validated before any pixel work.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub params: SegmentParams,
    pub segments: Vec<usize>,
    pub fill: Fill,
    pub canny: CannyParams,
    pub emit: BTreeSet<Emit>,
    pub n_list: Vec<usize>,
}

impl JobConfig {
    pub fn segment(input: impl Into<PathBuf>, out: impl Into<PathBuf>, params: SegmentParams) -> Self {
        Self {
            input: input.into(),
            out: out.into(),
            params,
            segments: Vec::new(),
            fill: Fill::Black,
            canny: CannyParams::default(),
            emit: [Emit::Histogram, Emit::Thresholds, Emit::Segmented].into(),
            n_list: Vec::new(),
        }
    }

    pub fn extract(
        input: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
        params: SegmentParams,
        segments: Vec<usize>,
        fill: Fill,
    ) -> Self {
        Self {
            segments,
            fill,
            emit: [Emit::Mask, Emit::Extracted, Emit::Edges].into(),
            ..Self::segment(input, out, params)
        }
    }

    pub fn compare(
        input: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
        n_list: Vec<usize>,
        kappa1: f64,
        kappa2: f64,
    ) -> Self {
        Self {
            emit: [Emit::Mssim].into(),
            n_list,
            ..Self::segment(input, out, SegmentParams::new(Methodology::M1, 1, kappa1, kappa2))
        }
    }
}

fn read_input(path: &Path) -> Result<RgbImage, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(decode_image(&bytes)?)
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

fn warn_degenerate(ts: &ThresholdSet) {
    if ts.is_degenerate() {
        eprintln!("histoseg: warning: threshold recursion collapsed; missing thresholds were synthesized");
    }
}

/// The part of the pipeline output the segmentation artifacts need.
struct Segmentation<'a> {
    gray: &'a GrayImage,
    histogram: &'a Histogram,
    segmented: &'a SegmentedImage,
}

impl<'a> From<&'a PipelineOutput> for Segmentation<'a> {
    fn from(out: &'a PipelineOutput) -> Self {
        Self {
            gray: &out.gray,
            histogram: &out.histogram,
            segmented: &out.segmented,
        }
    }
}

fn emit_segmentation(cfg: &JobConfig, out: Segmentation<'_>, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let dir = &cfg.out;
    if cfg.emit.contains(&Emit::Thresholds) {
        let json =
            serde_json::to_string_pretty(out.segmented.thresholds()).map_err(|e| CliError::Internal(e.to_string()))?;
        write_artifact(dir, THRESHOLDS_JSON, format!("{json}\n").as_bytes(), written)?;
    }
    if cfg.emit.contains(&Emit::Segmented) {
        write_artifact(dir, artifacts::SEGMENTED, &render_segmented(out.segmented)?, written)?;
    }
    if cfg.emit.contains(&Emit::Histogram) {
        write_artifact(dir, HISTOGRAM_ORIGINAL, out.histogram.to_csv().as_bytes(), written)?;
        let seg_hist = build_histogram(out.segmented.mapped());
        write_artifact(dir, HISTOGRAM_SEGMENTED, seg_hist.to_csv().as_bytes(), written)?;
    }
    if cfg.emit.contains(&Emit::Mssim) {
        let report = mssim(out.gray, out.segmented.mapped(), &SsimParams::default())?;
        let rows = [histoseg::analysis::CompareRow {
            method: cfg.params.method,
            n: cfg.params.n,
            mssim: report.mssim,
        }];
        write_artifact(
            dir,
            MSSIM_CSV,
            comparison_csv(&image_label(&cfg.input), &rows).as_bytes(),
            written,
        )?;
    }
    Ok(())
}

fn image_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn validate_emit(emit: &BTreeSet<Emit>, allowed: &[Emit], command: &str) -> Result<(), CliError> {
    match emit.iter().find(|e| !allowed.contains(e)) {
        Some(e) => Err(CliError::Validation(
            format!("{command} cannot emit {e:?}").to_lowercase(),
        )),
        None => Ok(()),
    }
}

/// Thresholds the image and writes the segmentation artifacts.
pub fn cmd_segment(cfg: &JobConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.params.validate()?;
    validate_emit(
        &cfg.emit,
        &[Emit::Histogram, Emit::Thresholds, Emit::Segmented, Emit::Mssim],
        "segment",
    )?;
    let img = read_input(&cfg.input)?;
    let gray = luminance_gray(&rgb_to_yiq(&img));
    let histogram = build_histogram(&gray);
    let thresholds = compute_thresholds(&histogram, &cfg.params)?;
    warn_degenerate(&thresholds);
    let segmented = apply_segmentation(&gray, &thresholds);
    let mut written = Vec::new();
    let parts = Segmentation {
        gray: &gray,
        histogram: &histogram,
        segmented: &segmented,
    };
    emit_segmentation(cfg, parts, &mut written)?;
    Ok(written)
}

/// Runs the full pipeline and writes mask, extracted image and edge map,
/// plus any requested segmentation artifacts.
pub fn cmd_extract(cfg: &JobConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.params.validate()?;
    let selection = SegmentSelection::new(cfg.segments.iter().copied(), cfg.fill)?;
    let img = read_input(&cfg.input)?;
    let out = run_pipeline(&img, &cfg.params, &selection)?;
    warn_degenerate(&out.thresholds);
    let mut written = Vec::new();
    emit_segmentation(cfg, (&out).into(), &mut written)?;
    let wanted: Vec<Emit> = [Emit::Mask, Emit::Extracted, Emit::Edges]
        .into_iter()
        .filter(|e| cfg.emit.contains(e))
        .collect();
    if !wanted.is_empty() {
        let pngs = render_extraction(&out.extraction, &cfg.canny)?;
        for (emit, (name, bytes)) in [Emit::Mask, Emit::Extracted, Emit::Edges].into_iter().zip(pngs.named()) {
            if wanted.contains(&emit) {
                write_artifact(&cfg.out, name, bytes, &mut written)?;
            }
        }
    }
    Ok(written)
}

/// Writes the method comparison table as CSV.
pub fn cmd_compare(cfg: &JobConfig) -> Result<Vec<PathBuf>, CliError> {
    if cfg.n_list.is_empty() {
        return Err(CliError::Validation("n-list must not be empty".into()));
    }
    validate_emit(&cfg.emit, &[Emit::Mssim], "compare")?;
    for &n in &cfg.n_list {
        SegmentParams::new(Methodology::M1, n, cfg.params.kappa1, cfg.params.kappa2).validate()?;
    }
    let img = read_input(&cfg.input)?;
    let rows = compare_methods(&img, &cfg.n_list, cfg.params.kappa1, cfg.params.kappa2)?;
    let mut written = Vec::new();
    write_artifact(
        &cfg.out,
        MSSIM_CSV,
        comparison_csv(&image_label(&cfg.input), &rows).as_bytes(),
        &mut written,
    )?;
    Ok(written)
}

type Job = fn(&JobConfig) -> Result<Vec<PathBuf>, CliError>;

impl Command {
    /// The job description and the function that runs it.
    pub fn into_job(self) -> (JobConfig, Job) {
        match self {
            Command::Segment(a) => {
                let params = SegmentParams::new(a.method.into(), a.n, a.common.kappa1, a.common.kappa2);
                let mut cfg = JobConfig::segment(a.common.input, a.common.out, params);
                cfg.emit = a.emit.into_iter().collect();
                (cfg, cmd_segment)
            }
            Command::Extract(a) => {
                let s = a.segment;
                let params = SegmentParams::new(s.method.into(), s.n, s.common.kappa1, s.common.kappa2);
                let mut cfg = JobConfig::extract(s.common.input, s.common.out, params, a.segments, a.fill.into());
                cfg.emit = a.emit.into_iter().collect();
                cfg.canny = CannyParams {
                    sigma: a.sigma,
                    low: a.canny_low,
                    high: a.canny_high,
                };
                (cfg, cmd_extract)
            }
            Command::Compare(a) => (
                JobConfig::compare(a.common.input, a.common.out, a.n_list, a.common.kappa1, a.common.kappa2),
                cmd_compare,
            ),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HISTOSEG_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Validation(format!("HISTOSEG_THREADS must be a positive integer, got {raw:?}")))?;
    histoseg::parallel::set_global_threads(threads).map_err(CliError::Internal)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|()| {
        let (cfg, job) = cli.command.into_job();
        job(&cfg)
    });
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("histoseg: {} error: {e}", e.kind());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_segment_flags() {
        let cli = Cli::try_parse_from([
            "histoseg", "segment", "-i", "coin.png", "--method", "m2", "-n", "5", "--kappa1", "1.5", "--kappa2", "1",
        ])
        .unwrap();
        let Command::Segment(a) = cli.command else { panic!() };
        assert_eq!(a.method, MethodArg::M2);
        assert_eq!(a.n, 5);
        assert_eq!(a.common.kappa1, 1.5);
        assert_eq!(a.emit, vec![Emit::Histogram, Emit::Thresholds, Emit::Segmented]);
    }

    #[test]
    fn parses_extract_lists() {
        let cli = Cli::try_parse_from([
            "histoseg",
            "extract",
            "-i",
            "a.png",
            "--segments",
            "0,2,3",
            "--fill",
            "white",
            "--emit",
            "mask,thresholds",
        ])
        .unwrap();
        let Command::Extract(a) = cli.command else { panic!() };
        assert_eq!(a.segments, vec![0, 2, 3]);
        assert_eq!(a.fill, FillArg::White);
        assert_eq!(a.emit, vec![Emit::Mask, Emit::Thresholds]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Io(String::new()).exit_code(), 1);
        assert_eq!(CliError::Validation(String::new()).exit_code(), 2);
        assert_eq!(CliError::Internal(String::new()).exit_code(), 3);
        let e: CliError = histoseg::Error::Domain("x".into()).into();
        assert_eq!(e.exit_code(), 2);
    }
}
