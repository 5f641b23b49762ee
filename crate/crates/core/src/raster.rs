//! Raster containers and their on-disk codecs.
//!
//! Images are binary PPM (P6, maxval 255). Label maps are binary PGM (P5,
//! maxval 65535, big-endian samples). Dense float rasters use two small
//! little-endian containers:
//!
//! * `SEMMAP01`: magic, `u32` width, `u32` height, `u32` category count, then
//!   `f32` probabilities in pixel-major order. Category names live in a JSON
//!   sidecar next to the payload.
//! * `CONMAP01`: magic, `u32` width, `u32` height, then `f32` values in
//!   row-major order.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp applied to every loaded semantic probability.
pub const PROB_FLOOR: f32 = 1e-6;

/// Name of the category that marks "none of the modelled objects".
pub const BACKGROUND: &str = "background";

const SEMMAP_MAGIC: &[u8; 8] = b"SEMMAP01";
const CONMAP_MAGIC: &[u8; 8] = b"CONMAP01";
const RANGE_SLACK: f32 = 1e-6;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("file not found: {0}")]
    FileMissing(PathBuf),
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("malformed map: {0}")]
    MalformedMap(String),
    #[error("sidecar lists {sidecar} categories but the payload has {header}")]
    CategoryMismatch { header: usize, sidecar: usize },
    #[error("category list must contain exactly one \"background\" entry")]
    NoBackgroundCategory,
    #[error("value {value} at index {index} lies outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f32 },
    #[error("label map uses id {0}, more than a 16-bit sample can hold")]
    TooManyRegions(u32),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("i/o failure: {0}")]
    IoFailure(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, RasterError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RasterError::MalformedImage(format!(
                "empty raster {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(RasterError::MalformedImage(format!(
                "{} pixels for a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Self {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels).expect("from_fn requires a nonempty raster")
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

/// Per-pixel category probabilities, stored pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    categories: Vec<String>,
    background: usize,
    probs: Vec<f32>,
}

impl SemanticMap {
    /// Builds a map from raw probabilities, clamping each one to
    /// `[PROB_FLOOR, 1]`. Values are not renormalized.
    pub fn new(
        width: usize,
        height: usize,
        categories: Vec<String>,
        mut probs: Vec<f32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(RasterError::MalformedMap(format!(
                "empty raster {width}x{height}"
            )));
        }
        let n = categories.len();
        if n < 2 {
            return Err(RasterError::MalformedMap(format!(
                "need at least two categories, got {n}"
            )));
        }
        for (i, name) in categories.iter().enumerate() {
            if categories[..i].contains(name) {
                return Err(RasterError::MalformedMap(format!(
                    "duplicate category name {name:?}"
                )));
            }
        }
        let mut bkg = categories
            .iter()
            .enumerate()
            .filter(|(_, c)| *c == BACKGROUND);
        let background = match (bkg.next(), bkg.next()) {
            (Some((i, _)), None) => i,
            _ => return Err(RasterError::NoBackgroundCategory),
        };
        if probs.len() != width * height * n {
            return Err(RasterError::MalformedMap(format!(
                "{} probabilities for {width}x{height}x{n}",
                probs.len()
            )));
        }
        for p in &mut probs {
            if p.is_nan() {
                return Err(RasterError::MalformedMap("NaN probability".into()));
            }
            *p = p.clamp(PROB_FLOOR, 1.0);
        }
        Ok(Self {
            width,
            height,
            categories,
            background,
            probs,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    /// Index of the background category.
    pub fn background(&self) -> usize {
        self.background
    }

    /// Probability vector of pixel `index` (row-major pixel index).
    pub fn pixel(&self, index: usize) -> &[f32] {
        let n = self.categories.len();
        &self.probs[index * n..(index + 1) * n]
    }

    pub fn probs(&self) -> &[f32] {
        &self.probs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourMap {
    width: usize,
    height: usize,
    strength: Vec<f32>,
}

impl ContourMap {
    pub fn new(width: usize, height: usize, strength: Vec<f32>) -> Result<Self> {
        if strength.len() != width * height {
            return Err(RasterError::MalformedMap(format!(
                "{} values for a {width}x{height} raster",
                strength.len()
            )));
        }
        for (index, &value) in strength.iter().enumerate() {
            if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&value) {
                return Err(RasterError::ValueOutOfRange { index, value });
            }
        }
        let strength = strength.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self {
            width,
            height,
            strength,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            strength: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn strength(&self) -> &[f32] {
        &self.strength
    }

    pub fn get(&self, index: usize) -> f32 {
        self.strength[index]
    }
}

/// A partition of the pixel grid, one id per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(RasterError::MalformedMap(format!(
                "{} labels for a {width}x{height} raster",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn constant(width: usize, height: usize, label: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Number of distinct ids.
    pub fn region_count(&self) -> usize {
        let mut ids = self.labels.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Relabels 4-connected components to `0..k` in raster order of their
    /// first pixel. Two disconnected areas sharing an id get distinct ids.
    pub fn connected_components(&self) -> LabelMap {
        let (w, h) = (self.width, self.height);
        let mut out = vec![u32::MAX; w * h];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..w * h {
            if out[start] != u32::MAX {
                continue;
            }
            let id = self.labels[start];
            out[start] = next;
            stack.push(start);
            while let Some(p) = stack.pop() {
                let (x, y) = (p % w, p / w);
                let mut visit = |q: usize| {
                    if out[q] == u32::MAX && self.labels[q] == id {
                        out[q] = next;
                        stack.push(q);
                    }
                };
                if x > 0 {
                    visit(p - 1);
                }
                if x + 1 < w {
                    visit(p + 1);
                }
                if y > 0 {
                    visit(p - w);
                }
                if y + 1 < h {
                    visit(p + w);
                }
            }
            next += 1;
        }
        LabelMap {
            width: w,
            height: h,
            labels: out,
        }
    }

    pub fn same_dims(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Float raster on the doubled boundary grid (or any float raster written
/// as `CONMAP01` without range checks).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatRaster {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => RasterError::FileMissing(path.to_path_buf()),
        _ => RasterError::IoFailure(e),
    })
}

/// Minimal netpbm header reader: magic, then whitespace separated decimal
/// fields with `#` comments, then exactly one whitespace byte.
struct PnmHeader {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> std::result::Result<PnmHeader, String> {
    if bytes.len() < 2 {
        return Err("file too short for a netpbm header".into());
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("expected a decimal header field".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or("header field does not fit")?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err("missing whitespace after maxval".into()),
    }
    Ok(PnmHeader {
        magic,
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_offset: pos,
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RasterImage> {
    let hdr = parse_pnm_header(bytes).map_err(RasterError::MalformedImage)?;
    if &hdr.magic != b"P6" {
        return Err(RasterError::MalformedImage(format!(
            "expected magic P6, found {:?}",
            String::from_utf8_lossy(&hdr.magic)
        )));
    }
    if hdr.maxval != 255 {
        return Err(RasterError::MalformedImage(format!(
            "unsupported maxval {}",
            hdr.maxval
        )));
    }
    let n = hdr.width * hdr.height;
    let payload = &bytes[hdr.data_offset..];
    if payload.len() < n * 3 {
        return Err(RasterError::MalformedImage(format!(
            "payload holds {} bytes, header needs {}",
            payload.len(),
            n * 3
        )));
    }
    let pixels = payload[..n * 3]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    RasterImage::new(hdr.width, hdr.height, pixels)
}

pub fn encode_ppm(img: &RasterImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().flatten());
    out
}

/// Decodes a P5 graymap into raw samples plus its maxval.
fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, usize, Vec<u16>), String> {
    let hdr = parse_pnm_header(bytes)?;
    if &hdr.magic != b"P5" {
        return Err(format!(
            "expected magic P5, found {:?}",
            String::from_utf8_lossy(&hdr.magic)
        ));
    }
    if hdr.maxval == 0 || hdr.maxval > 65535 {
        return Err(format!("unsupported maxval {}", hdr.maxval));
    }
    let n = hdr.width * hdr.height;
    let payload = &bytes[hdr.data_offset..];
    let samples = if hdr.maxval < 256 {
        if payload.len() < n {
            return Err("truncated payload".into());
        }
        payload[..n].iter().map(|&b| b as u16).collect()
    } else {
        if payload.len() < 2 * n {
            return Err("truncated payload".into());
        }
        payload[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok((hdr.width, hdr.height, hdr.maxval, samples))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    decode_ppm(&read_file(path.as_ref())?)
}

pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_ppm(img))
}

/// Sidecar path for a `SEMMAP01` payload: the payload path with its
/// extension replaced by `.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    categories: Vec<String>,
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn read_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

/// Decodes a `SEMMAP01` payload given its category list.
pub fn decode_semmap(bytes: &[u8], categories: Vec<String>) -> Result<SemanticMap> {
    if bytes.len() < 20 || &bytes[..8] != SEMMAP_MAGIC {
        return Err(RasterError::MalformedMap("missing SEMMAP01 magic".into()));
    }
    let width = read_u32(bytes, 8) as usize;
    let height = read_u32(bytes, 12) as usize;
    let n = read_u32(bytes, 16) as usize;
    if categories.len() != n {
        return Err(RasterError::CategoryMismatch {
            header: n,
            sidecar: categories.len(),
        });
    }
    let expected = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| RasterError::MalformedMap("header dimensions overflow".into()))?;
    let payload = &bytes[20..];
    if payload.len() != expected {
        return Err(RasterError::MalformedMap(format!(
            "payload holds {} bytes, header needs {expected}",
            payload.len()
        )));
    }
    SemanticMap::new(width, height, categories, read_f32s(payload))
}

pub fn encode_semmap(map: &SemanticMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + map.probs.len() * 4);
    out.extend_from_slice(SEMMAP_MAGIC);
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    out.extend_from_slice(&(map.categories.len() as u32).to_le_bytes());
    for p in &map.probs {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn load_semantic_map(path: impl AsRef<Path>) -> Result<SemanticMap> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let side_path = sidecar_path(path);
    let side = read_file(&side_path)?;
    let sidecar: Sidecar = serde_json::from_slice(&side)
        .map_err(|e| RasterError::MalformedMap(format!("{}: {e}", side_path.display())))?;
    decode_semmap(&bytes, sidecar.categories)
}

/// Writes the payload and its JSON sidecar.
pub fn save_semantic_map(map: &SemanticMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, &encode_semmap(map))?;
    let sidecar = Sidecar {
        categories: map.categories.clone(),
    };
    let json = serde_json::to_vec(&sidecar).expect("sidecar serializes");
    write_atomic(&sidecar_path(path), &json)
}

pub fn encode_conmap(raster: &FloatRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + raster.values.len() * 4);
    out.extend_from_slice(CONMAP_MAGIC);
    out.extend_from_slice(&(raster.width as u32).to_le_bytes());
    out.extend_from_slice(&(raster.height as u32).to_le_bytes());
    for v in &raster.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_conmap(bytes: &[u8]) -> Result<FloatRaster> {
    if bytes.len() < 16 || &bytes[..8] != CONMAP_MAGIC {
        return Err(RasterError::MalformedMap("missing CONMAP01 magic".into()));
    }
    let width = read_u32(bytes, 8) as usize;
    let height = read_u32(bytes, 12) as usize;
    let payload = &bytes[16..];
    if Some(payload.len()) != width.checked_mul(height).and_then(|n| n.checked_mul(4)) {
        return Err(RasterError::MalformedMap(format!(
            "payload holds {} bytes for a {width}x{height} raster",
            payload.len()
        )));
    }
    Ok(FloatRaster {
        width,
        height,
        values: read_f32s(payload),
    })
}

/// Loads a contour map from `CONMAP01` (values must lie in `[0, 1]`) or
/// from a P5 graymap rescaled by its maxval. The format is sniffed from the
/// leading bytes.
pub fn load_contour_map(path: impl AsRef<Path>) -> Result<ContourMap> {
    let bytes = read_file(path.as_ref())?;
    if bytes.starts_with(CONMAP_MAGIC) {
        let raster = decode_conmap(&bytes)?;
        ContourMap::new(raster.width, raster.height, raster.values)
    } else {
        let (w, h, maxval, samples) = decode_pgm(&bytes).map_err(RasterError::MalformedMap)?;
        let scale = maxval as f32;
        ContourMap::new(w, h, samples.iter().map(|&s| s as f32 / scale).collect())
    }
}

pub fn save_contour_map(map: &ContourMap, path: impl AsRef<Path>) -> Result<()> {
    let raster = FloatRaster {
        width: map.width,
        height: map.height,
        values: map.strength.clone(),
    };
    write_atomic(path.as_ref(), &encode_conmap(&raster))
}

pub fn encode_label_map(seg: &LabelMap) -> Result<Vec<u8>> {
    if let Some(&max) = seg.labels.iter().max() {
        if max > u16::MAX as u32 {
            return Err(RasterError::TooManyRegions(max));
        }
    }
    let mut out = format!("P5\n{} {}\n65535\n", seg.width, seg.height).into_bytes();
    for &l in &seg.labels {
        out.extend_from_slice(&(l as u16).to_be_bytes());
    }
    Ok(out)
}

pub fn decode_label_map(bytes: &[u8]) -> Result<LabelMap> {
    let (w, h, _, samples) = decode_pgm(bytes).map_err(RasterError::MalformedMap)?;
    LabelMap::new(w, h, samples.into_iter().map(u32::from).collect())
}

/// Writes a partition with its 4-connected regions relabelled `0..k` in
/// raster order, so every written id is one connected region.
pub fn write_label_map(seg: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(
        path.as_ref(),
        &encode_label_map(&seg.connected_components())?,
    )
}

/// Writes per-pixel category ids (or any ids) unchanged.
pub fn write_category_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_label_map(map)?)
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    decode_label_map(&read_file(path.as_ref())?)
}

pub fn write_ucm(ucm: &FloatRaster, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_conmap(ucm))
}

/// Reads a `CONMAP01` raster without the `[0, 1]` range check.
pub fn load_ucm(path: impl AsRef<Path>) -> Result<FloatRaster> {
    decode_conmap(&read_file(path.as_ref())?)
}

/// Color used for region boundaries in overlays.
pub const OVERLAY_COLOR: [u8; 3] = [255, 0, 0];

/// Paints every pixel with a 4-neighbor in a different region.
pub fn overlay(img: &RasterImage, seg: &LabelMap) -> Result<RasterImage> {
    if img.width != seg.width || img.height != seg.height {
        return Err(RasterError::DimensionMismatch {
            expected: (img.width, img.height),
            found: (seg.width, seg.height),
        });
    }
    let (w, h) = (img.width, img.height);
    let l = &seg.labels;
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let edge = (x > 0 && l[p - 1] != l[p])
                || (x + 1 < w && l[p + 1] != l[p])
                || (y > 0 && l[p - w] != l[p])
                || (y + 1 < h && l[p + w] != l[p]);
            if edge {
                out.pixels[p] = OVERLAY_COLOR;
            }
        }
    }
    Ok(out)
}

pub fn write_overlay(img: &RasterImage, seg: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    save_image(&overlay(img, seg)?, path)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}
