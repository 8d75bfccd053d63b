//! Per-session state and the store that owns it.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use histoseg::analysis::{mssim, CannyParams, SsimParams};
use histoseg::artifacts::{self, render_extraction, render_segmented};
use histoseg::raster::{downscale_gray, downscale_rgb, encode_png_gray, encode_png_rgb};
use histoseg::{
    apply_segmentation, binarize, build_histogram, compute_thresholds, decode_image, extract_object, luminance_gray,
    rgb_to_yiq, GrayImage, Histogram, Methodology, SegmentParams, SegmentSelection, SegmentedImage, ThresholdSet,
    YiqImage,
};
use serde::Serialize;
use uuid::Uuid;

use crate::error::ApiError;

pub const THRESHOLDS_JSON: &str = "thresholds.json";
pub const HISTOGRAM_ORIGINAL: &str = "histogram_original.csv";
pub const HISTOGRAM_SEGMENTED: &str = "histogram_segmented.csv";

/// One completed segmentation request.
#[derive(Debug, Clone, Serialize)]
pub struct HistoryStep {
    pub timestamp_ms: u64,
    pub params: SegmentParams,
    pub mssim: f64,
}

/// A stored full-resolution artifact.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub content_type: &'static str,
    pub bytes: Vec<u8>,
}

#[derive(Debug)]
pub struct Session {
    width: usize,
    height: usize,
    yiq: YiqImage,
    gray: GrayImage,
    histogram: Histogram,
    latest_by_method: BTreeMap<Methodology, ThresholdSet>,
    segmented: Option<SegmentedImage>,
    history: Vec<HistoryStep>,
    artifacts: BTreeMap<&'static str, Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentResponse {
    pub thresholds: ThresholdSet,
    /// Base64 PNG of the segmented luminance, downscaled for transport.
    pub preview_png: String,
    pub mssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractResponse {
    pub mask_png: String,
    pub extracted_png: String,
    pub edges_png: String,
    pub object_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramsResponse {
    pub original: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segmented: Option<Vec<u64>>,
}

fn b64(bytes: &[u8]) -> String {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn png_artifact(bytes: Vec<u8>) -> Artifact {
    Artifact {
        content_type: "image/png",
        bytes,
    }
}

fn csv_artifact(text: String) -> Artifact {
    Artifact {
        content_type: "text/csv",
        bytes: text.into_bytes(),
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    /// Decodes `bytes` and caches the YIQ planes and the luminance histogram.
    pub fn create(bytes: &[u8]) -> Result<Self, ApiError> {
        let img = decode_image(bytes)?;
        let yiq = rgb_to_yiq(&img);
        let gray = luminance_gray(&yiq);
        let histogram = build_histogram(&gray);
        let mut artifacts = BTreeMap::new();
        artifacts.insert(HISTOGRAM_ORIGINAL, csv_artifact(histogram.to_csv()));
        Ok(Self {
            width: img.width(),
            height: img.height(),
            yiq,
            gray,
            histogram,
            latest_by_method: BTreeMap::new(),
            segmented: None,
            history: Vec::new(),
            artifacts,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn history(&self) -> &[HistoryStep] {
        &self.history
    }

    pub fn latest(&self, method: Methodology) -> Option<&ThresholdSet> {
        self.latest_by_method.get(&method)
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.get(name)
    }

    pub fn segment(&mut self, params: &SegmentParams, preview_max_edge: usize) -> Result<SegmentResponse, ApiError> {
        params.validate()?;
        let ts = compute_thresholds(&self.histogram, params)?;
        let seg = apply_segmentation(&self.gray, &ts);
        let score = mssim(&self.gray, seg.mapped(), &SsimParams::default())?.mssim;
        let preview = encode_png_gray(&downscale_gray(seg.mapped(), preview_max_edge))?;

        let mut json = serde_json::to_vec_pretty(&ts).map_err(|e| ApiError::internal(e.to_string()))?;
        json.push(b'\n');
        // extraction artifacts belong to the previous segmentation
        for name in [artifacts::MASK, artifacts::EXTRACTED, artifacts::EDGES] {
            self.artifacts.remove(name);
        }
        self.artifacts
            .insert(artifacts::SEGMENTED, png_artifact(render_segmented(&seg)?));
        self.artifacts.insert(
            THRESHOLDS_JSON,
            Artifact {
                content_type: "application/json",
                bytes: json,
            },
        );
        self.artifacts.insert(
            HISTOGRAM_SEGMENTED,
            csv_artifact(build_histogram(seg.mapped()).to_csv()),
        );

        self.history.push(HistoryStep {
            timestamp_ms: now_ms(),
            params: *params,
            mssim: score,
        });
        self.latest_by_method.insert(params.method, ts.clone());
        self.segmented = Some(seg);
        Ok(SegmentResponse {
            thresholds: ts,
            preview_png: b64(&preview),
            mssim: score,
        })
    }

    /// Extracts from the most recent segmentation.
    pub fn extract(
        &mut self,
        selection: &SegmentSelection,
        canny: &CannyParams,
        preview_max_edge: usize,
    ) -> Result<ExtractResponse, ApiError> {
        let seg = self.segmented.as_ref().ok_or_else(|| {
            ApiError::new(
                axum::http::StatusCode::CONFLICT,
                "no segmentation yet; POST /segment first",
            )
        })?;
        let mask = binarize(seg, selection)?;
        let result = extract_object(&self.yiq, &mask, selection.fill())?;
        let full = render_extraction(&result, canny)?;
        let previews = if self.width.max(self.height) <= preview_max_edge {
            [full.mask.clone(), full.extracted.clone(), full.edges.clone()]
        } else {
            let edges = histoseg::analysis::canny_edges(&result.extracted_y, canny)?;
            [
                encode_png_gray(&downscale_gray(&result.mask.to_gray(), preview_max_edge))?,
                encode_png_rgb(&downscale_rgb(&result.extracted_rgb, preview_max_edge))?,
                encode_png_gray(&downscale_gray(&edges.to_gray(), preview_max_edge))?,
            ]
        };
        let object_pixels = result.mask.count_ones();
        for (name, bytes) in full.named() {
            self.artifacts.insert(name, png_artifact(bytes.to_vec()));
        }
        let [mask_png, extracted_png, edges_png] = previews.map(|p| b64(&p));
        Ok(ExtractResponse {
            mask_png,
            extracted_png,
            edges_png,
            object_pixels,
        })
    }

    pub fn histograms(&self) -> HistogramsResponse {
        HistogramsResponse {
            original: self.histogram.counts().to_vec(),
            segmented: self
                .segmented
                .as_ref()
                .map(|s| build_histogram(s.mapped()).counts().to_vec()),
        }
    }
}

type Shared = Arc<Mutex<Session>>;
/// Last-use time, kept outside the session lock so the sweeper never waits
/// behind a running request.
type Stamp = Arc<Mutex<Instant>>;

/// All live sessions. Each session has its own lock, so requests against
/// different sessions run concurrently while requests against one session
/// are serialized.
#[derive(Debug, Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, (Shared, Stamp)>>,
}

impl SessionStore {
    pub fn insert(&self, session: Session) -> String {
        let id = Uuid::new_v4().simple().to_string();
        let stamp = Arc::new(Mutex::new(Instant::now()));
        self.sessions
            .write()
            .expect("session map poisoned")
            .insert(id.clone(), (Arc::new(Mutex::new(session)), stamp));
        id
    }

    /// The session with `id`, marking it used.
    pub fn get(&self, id: &str) -> Option<Shared> {
        let map = self.sessions.read().expect("session map poisoned");
        let (session, stamp) = map.get(id)?;
        *stamp.lock().expect("stamp poisoned") = Instant::now();
        Some(Arc::clone(session))
    }

    pub fn remove(&self, id: &str) -> bool {
        self.sessions
            .write()
            .expect("session map poisoned")
            .remove(id)
            .is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than `ttl` as of `now`; returns how many.
    pub fn sweep(&self, now: Instant, ttl: Duration) -> usize {
        let mut map = self.sessions.write().expect("session map poisoned");
        let before = map.len();
        map.retain(|_, (_, stamp)| now.saturating_duration_since(*stamp.lock().expect("stamp poisoned")) <= ttl);
        before - map.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use histoseg::{fixtures, Fill};

    fn session() -> Session {
        Session::create(&encode_png_rgb(&fixtures::two_spike()).unwrap()).unwrap()
    }

    #[test]
    fn extraction_needs_segmentation() {
        let mut s = session();
        let sel = SegmentSelection::new([0], Fill::Black).unwrap();
        let err = s.extract(&sel, &CannyParams::default(), 1024).unwrap_err();
        assert_eq!(err.status, axum::http::StatusCode::CONFLICT);
    }

    #[test]
    fn resegmenting_drops_stale_extraction() {
        let mut s = session();
        let p = SegmentParams::new(Methodology::M1, 1, 1.0, 1.0);
        s.segment(&p, 1024).unwrap();
        let sel = SegmentSelection::new([1], Fill::Black).unwrap();
        s.extract(&sel, &CannyParams::default(), 1024).unwrap();
        assert!(s.artifact(artifacts::MASK).is_some());
        s.segment(&p, 1024).unwrap();
        assert!(s.artifact(artifacts::MASK).is_none());
        assert_eq!(s.history().len(), 2);
        assert!(s.latest(Methodology::M1).is_some());
        assert!(s.latest(Methodology::M2).is_none());
    }

    #[test]
    fn sweep_drops_idle_sessions() {
        let store = SessionStore::default();
        let id = store.insert(session());
        assert_eq!(store.sweep(Instant::now(), Duration::from_secs(60)), 0);
        assert!(store.get(&id).is_some());
        let later = Instant::now() + Duration::from_secs(120);
        assert_eq!(store.sweep(later, Duration::from_secs(60)), 1);
        assert!(store.get(&id).is_none());
    }
}
