//! Raster types, codecs and the RGB/YIQ transform.
//!
//! Forward transform (NTSC):
//!
//! ```text
//! Y = 0.299    R + 0.587    G + 0.114    B
//! I = 0.595716 R - 0.274453 G - 0.321263 B
//! Q = 0.211456 R - 0.522591 G + 0.311135 B
//! ```
//!
//! The inverse is the exact matrix inverse of the above, computed once.

use std::io::Cursor;
use std::sync::LazyLock;

use image::{ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::parallel;

const RGB_TO_YIQ: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.595716, -0.274453, -0.321263],
    [0.211456, -0.522591, 0.311135],
];

static YIQ_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&RGB_TO_YIQ));

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let c = [
        [cof(1, 2, 1, 2), -cof(1, 2, 0, 2), cof(1, 2, 0, 1)],
        [-cof(0, 2, 1, 2), cof(0, 2, 0, 2), -cof(0, 2, 0, 1)],
        [cof(0, 1, 1, 2), -cof(0, 1, 0, 2), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * c[0][0] + m[0][1] * c[0][1] + m[0][2] * c[0][2];
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (col, v) in row.iter_mut().enumerate() {
            // adjugate is the transposed cofactor matrix
            *v = c[col][r] / det;
        }
    }
    inv
}

/// Rounds half away from zero and clamps into the 8-bit range.
pub fn round_level(x: f64) -> u8 {
    if x.is_nan() {
        return 0;
    }
    x.round().clamp(0.0, 255.0) as u8
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::domain(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::domain(format!(
            "{width}x{height} image needs {} pixels, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Result<Self> {
        let pixels = (0..width * height).map(|p| f(p % width, p / width)).collect();
        Self::new(width, height, pixels)
    }

    /// Gray image replicated on all three channels.
    pub fn from_gray(gray: &GrayImage) -> Self {
        Self {
            width: gray.width,
            height: gray.height,
            pixels: gray.values.iter().map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

/// Real-valued Y, I and Q planes of the same raster.
#[derive(Debug, Clone, PartialEq)]
pub struct YiqImage {
    width: usize,
    height: usize,
    y: Vec<f64>,
    i: Vec<f64>,
    q: Vec<f64>,
}

impl YiqImage {
    pub fn new(width: usize, height: usize, y: Vec<f64>, i: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        check_dims(width, height, y.len())?;
        if i.len() != y.len() || q.len() != y.len() {
            return Err(Error::domain("Y, I and Q planes must have equal length"));
        }
        Ok(Self { width, height, y, i, q })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn y_plane(&self) -> &[f64] {
        &self.y
    }

    pub fn i_plane(&self) -> &[f64] {
        &self.i
    }

    pub fn q_plane(&self) -> &[f64] {
        &self.q
    }

    pub fn pixel(&self, idx: usize) -> [f64; 3] {
        [self.y[idx], self.i[idx], self.q[idx]]
    }
}

/// Row-major 8-bit gray raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let values = (0..width * height).map(|p| f(p % width, p / width)).collect();
        Self::new(width, height, values)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }
}

/// Decodes PNG, JPEG, BMP or binary PPM bytes into RGB. Alpha is dropped.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    let format = image::guess_format(bytes).map_err(|e| Error::Decode {
        stage: "format detection".into(),
        message: e.to_string(),
    })?;
    let supported = matches!(
        format,
        ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Bmp | ImageFormat::Pnm
    );
    let name = format!("{format:?}").to_lowercase();
    if !supported {
        return Err(Error::Decode {
            stage: "format detection".into(),
            message: format!("unsupported format {name}"),
        });
    }
    let dynamic = image::load_from_memory_with_format(bytes, format).map_err(|e| Error::Decode {
        stage: format!("{name} decoding"),
        message: e.to_string(),
    })?;
    let rgb = dynamic.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RgbImage::new(w, h, pixels)
}

fn encode_png(width: usize, height: usize, data: &[u8], color: image::ExtendedColorType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(Cursor::new(&mut out))
        .write_image(data, width as u32, height as u32, color)
        .map_err(|e| Error::Encode(e.to_string()))?;
    Ok(out)
}

/// Encodes an RGB raster as an 8-bit PNG.
pub fn encode_png_rgb(img: &RgbImage) -> Result<Vec<u8>> {
    let flat: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    encode_png(img.width, img.height, &flat, image::ExtendedColorType::Rgb8)
}

/// Encodes a gray raster as an 8-bit grayscale PNG.
pub fn encode_png_gray(img: &GrayImage) -> Result<Vec<u8>> {
    encode_png(img.width, img.height, &img.values, image::ExtendedColorType::L8)
}

/// Nearest-neighbour downscale so that neither edge exceeds `max_edge`.
/// Images already within bounds are returned unchanged.
pub fn downscale_gray(img: &GrayImage, max_edge: usize) -> GrayImage {
    let (w, h, scale) = fit(img.width, img.height, max_edge);
    if scale >= 1.0 {
        return img.clone();
    }
    let values = (0..w * h)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let sx = ((x as f64 + 0.5) / scale).floor() as usize;
            let sy = ((y as f64 + 0.5) / scale).floor() as usize;
            img.get(sx.min(img.width - 1), sy.min(img.height - 1))
        })
        .collect();
    GrayImage {
        width: w,
        height: h,
        values,
    }
}

/// RGB counterpart of [`downscale_gray`].
pub fn downscale_rgb(img: &RgbImage, max_edge: usize) -> RgbImage {
    let (w, h, scale) = fit(img.width, img.height, max_edge);
    if scale >= 1.0 {
        return img.clone();
    }
    let pixels = (0..w * h)
        .map(|p| {
            let (x, y) = (p % w, p / w);
            let sx = ((x as f64 + 0.5) / scale).floor() as usize;
            let sy = ((y as f64 + 0.5) / scale).floor() as usize;
            img.get(sx.min(img.width - 1), sy.min(img.height - 1))
        })
        .collect();
    RgbImage {
        width: w,
        height: h,
        pixels,
    }
}

fn fit(width: usize, height: usize, max_edge: usize) -> (usize, usize, f64) {
    let longest = width.max(height);
    if max_edge == 0 || longest <= max_edge {
        return (width, height, 1.0);
    }
    let scale = max_edge as f64 / longest as f64;
    let w = ((width as f64 * scale).round() as usize).max(1);
    let h = ((height as f64 * scale).round() as usize).max(1);
    (w, h, scale)
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Single-pixel forward transform.
pub fn rgb_pixel_to_yiq(rgb: [u8; 3]) -> [f64; 3] {
    mat_mul(&RGB_TO_YIQ, [rgb[0] as f64, rgb[1] as f64, rgb[2] as f64])
}

/// Single-pixel inverse transform with clamping and rounding.
pub fn yiq_pixel_to_rgb(yiq: [f64; 3]) -> [u8; 3] {
    let rgb = mat_mul(&YIQ_TO_RGB, yiq);
    [round_level(rgb[0]), round_level(rgb[1]), round_level(rgb[2])]
}

const ROW_CHUNK: usize = 4096;

pub fn rgb_to_yiq(img: &RgbImage) -> YiqImage {
    let planes = parallel::map_slice(&img.pixels, |&p| rgb_pixel_to_yiq(p));
    let mut y = Vec::with_capacity(planes.len());
    let mut i = Vec::with_capacity(planes.len());
    let mut q = Vec::with_capacity(planes.len());
    for [a, b, c] in planes {
        y.push(a);
        i.push(b);
        q.push(c);
    }
    YiqImage {
        width: img.width,
        height: img.height,
        y,
        i,
        q,
    }
}

pub fn yiq_to_rgb(img: &YiqImage) -> RgbImage {
    let mut pixels = vec![[0u8; 3]; img.y.len()];
    parallel::for_each_chunk_mut(&mut pixels, ROW_CHUNK, |c, chunk| {
        let base = c * ROW_CHUNK;
        for (k, px) in chunk.iter_mut().enumerate() {
            *px = yiq_pixel_to_rgb(img.pixel(base + k));
        }
    });
    RgbImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Quantizes the Y plane to 8-bit gray levels.
pub fn luminance_gray(img: &YiqImage) -> GrayImage {
    let values = parallel::map_slice(&img.y, |&v| round_level(v));
    GrayImage {
        width: img.width,
        height: img.height,
        values,
    }
}
