//! Versioned grid files and magnitude export.
//!
//! A grid file is a UTF-8 header of `key=value` lines followed by a binary
//! payload:
//!
//! ```text
//! SARGRID
//! version=1
//! kind=image
//! rows=512
//! cols=512
//! stage=keystoned
//! axis0_start=...
//! ...
//! end_header
//! <rows * cols interleaved little-endian f32 (re, im) pairs, row-major>
//! ```
//!
//! Optional values are written as `none`. Floating-point header values use
//! the shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::axis::UniformAxis;
use crate::echo_sim::{PhaseHistory, Stage};
use crate::error::{Error, Result};
use crate::error_model::{ApeProfile, PhaseErrorSurface};
use crate::pfa::{ComplexImage, Provenance, SpatialFrequencyGrid};

pub const GRID_MAGIC: &str = "SARGRID";
pub const GRID_VERSION: u32 = 1;
const END_HEADER: &str = "end_header";
const MAX_HEADER_LINES: usize = 256;

#[derive(Debug, Error)]
pub enum GridFileError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("unsupported grid file version {0} (this build reads version {GRID_VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("grid file holds a {found}, expected a {expected}")]
    KindMismatch { expected: GridKind, found: GridKind },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    PhaseHistory,
    Image,
    Surface,
    Profile,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::PhaseHistory => "phase_history",
            GridKind::Image => "image",
            GridKind::Surface => "surface",
            GridKind::Profile => "profile",
        }
    }

    fn parse(s: &str) -> std::result::Result<Self, GridFileError> {
        Ok(match s {
            "phase_history" => GridKind::PhaseHistory,
            "image" => GridKind::Image,
            "surface" => GridKind::Surface,
            "profile" => GridKind::Profile,
            other => return Err(GridFileError::CorruptHeader(format!("unknown kind `{other}`"))),
        })
    }
}

impl std::fmt::Display for GridKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every field of the v1 header.
#[derive(Clone, Debug, PartialEq)]
pub struct GridHeader {
    pub version: u32,
    pub kind: GridKind,
    pub rows: usize,
    pub cols: usize,
    pub stage: Option<Stage>,
    pub axis0: UniformAxis,
    pub axis1: UniformAxis,
    pub carrier_frequency: Option<f64>,
    pub y0: Option<f64>,
    pub phi_ref: Option<f64>,
    pub warp_slope: Option<f64>,
    pub origin_row: usize,
    pub origin_col: usize,
    pub parent_rows: usize,
    pub parent_cols: usize,
    pub empty_scene: bool,
    pub invalid_fraction: f64,
    pub provenance: Vec<String>,
}

impl GridHeader {
    fn blank(kind: GridKind, rows: usize, cols: usize, axis0: UniformAxis, axis1: UniformAxis) -> Self {
        Self {
            version: GRID_VERSION,
            kind,
            rows,
            cols,
            stage: None,
            axis0,
            axis1,
            carrier_frequency: None,
            y0: None,
            phi_ref: None,
            warp_slope: None,
            origin_row: 0,
            origin_col: 0,
            parent_rows: rows,
            parent_cols: cols,
            empty_scene: false,
            invalid_fraction: 0.0,
            provenance: Vec::new(),
        }
    }

    pub fn payload_bytes(&self) -> usize {
        self.rows * self.cols * 8
    }

    pub fn to_text(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "none".to_string(), |x| x.to_string())
        }
        let mut s = String::new();
        let _ = writeln!(s, "{GRID_MAGIC}");
        let _ = writeln!(s, "version={}", self.version);
        let _ = writeln!(s, "kind={}", self.kind);
        let _ = writeln!(s, "rows={}", self.rows);
        let _ = writeln!(s, "cols={}", self.cols);
        let _ = writeln!(s, "stage={}", self.stage.map_or("none", Stage::as_str));
        let _ = writeln!(s, "axis0_start={}", self.axis0.start);
        let _ = writeln!(s, "axis0_step={}", self.axis0.step);
        let _ = writeln!(s, "axis1_start={}", self.axis1.start);
        let _ = writeln!(s, "axis1_step={}", self.axis1.step);
        let _ = writeln!(s, "carrier_frequency={}", opt(self.carrier_frequency));
        let _ = writeln!(s, "y0={}", opt(self.y0));
        let _ = writeln!(s, "phi_ref={}", opt(self.phi_ref));
        let _ = writeln!(s, "warp_slope={}", opt(self.warp_slope));
        let _ = writeln!(s, "origin_row={}", self.origin_row);
        let _ = writeln!(s, "origin_col={}", self.origin_col);
        let _ = writeln!(s, "parent_rows={}", self.parent_rows);
        let _ = writeln!(s, "parent_cols={}", self.parent_cols);
        let _ = writeln!(s, "empty_scene={}", self.empty_scene);
        let _ = writeln!(s, "invalid_fraction={}", self.invalid_fraction);
        let _ = writeln!(s, "provenance={}", self.provenance.join(";"));
        let _ = writeln!(s, "{END_HEADER}");
        s
    }

    /// Parse a header, leaving the reader positioned at the payload.
    pub fn read_from<R: BufRead>(reader: &mut R) -> std::result::Result<Self, GridFileError> {
        let corrupt = |m: String| GridFileError::CorruptHeader(m);
        let mut line = String::new();
        let mut next_line = |reader: &mut R| -> std::result::Result<Option<String>, GridFileError> {
            line.clear();
            let n = reader.read_line(&mut line).map_err(|e| match e.kind() {
                std::io::ErrorKind::InvalidData => GridFileError::CorruptHeader("header is not UTF-8".into()),
                _ => GridFileError::Io(e),
            })?;
            if n == 0 {
                return Ok(None);
            }
            Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
        };
        match next_line(reader)? {
            Some(m) if m == GRID_MAGIC => {}
            _ => return Err(corrupt("missing SARGRID magic".into())),
        }
        let mut fields = std::collections::BTreeMap::new();
        let mut terminated = false;
        for _ in 0..MAX_HEADER_LINES {
            let Some(l) = next_line(reader)? else { break };
            if l == END_HEADER {
                terminated = true;
                break;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| corrupt(format!("malformed line `{l}`")))?;
            if fields.insert(k.to_string(), v.to_string()).is_some() {
                return Err(corrupt(format!("duplicate key `{k}`")));
            }
        }
        if !terminated {
            return Err(corrupt("header not terminated".into()));
        }
        let get = |k: &str| fields.get(k).map(String::as_str).ok_or_else(|| corrupt(format!("missing key `{k}`")));
        let version: u32 = get("version")?.parse().map_err(|_| corrupt("bad version".into()))?;
        if version != GRID_VERSION {
            return Err(GridFileError::UnsupportedVersion(version));
        }
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> std::result::Result<T, GridFileError> {
            v.parse().map_err(|_| GridFileError::CorruptHeader(format!("bad value for `{k}`: `{v}`")))
        }
        let f = |k: &str| -> std::result::Result<f64, GridFileError> {
            let v: f64 = num(k, get(k)?)?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(corrupt(format!("non-finite `{k}`")))
            }
        };
        let of = |k: &str| -> std::result::Result<Option<f64>, GridFileError> {
            match get(k)? {
                "none" => Ok(None),
                _ => f(k).map(Some),
            }
        };
        let u = |k: &str| -> std::result::Result<usize, GridFileError> { num(k, get(k)?) };
        let rows = u("rows")?;
        let cols = u("cols")?;
        if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).is_none() {
            return Err(corrupt("dimensions overflow".into()));
        }
        let stage = match get("stage")? {
            "none" => None,
            s => Some(s.parse::<Stage>().map_err(|_| corrupt(format!("unknown stage `{s}`")))?),
        };
        let provenance = match get("provenance")? {
            "" => Vec::new(),
            p => p.split(';').map(str::to_string).collect(),
        };
        Ok(Self {
            version,
            kind: GridKind::parse(get("kind")?)?,
            rows,
            cols,
            stage,
            axis0: UniformAxis::new(f("axis0_start")?, f("axis0_step")?, rows),
            axis1: UniformAxis::new(f("axis1_start")?, f("axis1_step")?, cols),
            carrier_frequency: of("carrier_frequency")?,
            y0: of("y0")?,
            phi_ref: of("phi_ref")?,
            warp_slope: of("warp_slope")?,
            origin_row: u("origin_row")?,
            origin_col: u("origin_col")?,
            parent_rows: u("parent_rows")?,
            parent_cols: u("parent_cols")?,
            empty_scene: num("empty_scene", get("empty_scene")?)?,
            invalid_fraction: f("invalid_fraction")?,
            provenance,
        })
    }

    fn spatial_grid(&self) -> std::result::Result<SpatialFrequencyGrid, GridFileError> {
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| GridFileError::CorruptHeader(format!("`{k}` required for {}", self.kind)));
        Ok(SpatialFrequencyGrid {
            x_axis: self.axis0,
            y_axis: self.axis1,
            y0: need(self.y0, "y0")?,
            warp_slope: need(self.warp_slope, "warp_slope")?,
        })
    }
}

/// Header plus complex payload.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFile {
    pub header: GridHeader,
    pub data: Array2<Complex64>,
}

fn real_grid(values: &Array2<f64>) -> Array2<Complex64> {
    values.mapv(|v| Complex64::new(v, 0.0))
}

fn with_spatial(mut h: GridHeader, grid: &SpatialFrequencyGrid) -> GridHeader {
    h.y0 = Some(grid.y0);
    h.warp_slope = Some(grid.warp_slope);
    h
}

impl GridFile {
    pub fn from_phase_history(ph: &PhaseHistory) -> Self {
        let (rows, cols) = ph.data.dim();
        let mut h = GridHeader::blank(GridKind::PhaseHistory, rows, cols, ph.t_axis, ph.fr_axis);
        h.stage = Some(ph.stage);
        h.carrier_frequency = Some(ph.carrier_frequency);
        h.empty_scene = ph.empty_scene;
        h.invalid_fraction = ph.invalid_fraction;
        Self { header: h, data: ph.data.clone() }
    }

    pub fn from_image(image: &ComplexImage) -> Self {
        let (rows, cols) = image.data.dim();
        let g = &image.grid;
        let mut h = with_spatial(GridHeader::blank(GridKind::Image, rows, cols, g.x_axis, g.y_axis), g);
        let p = &image.provenance;
        h.stage = Some(Stage::Keystoned);
        h.origin_row = p.origin_row;
        h.origin_col = p.origin_col;
        h.parent_rows = p.parent_rows;
        h.parent_cols = p.parent_cols;
        h.provenance = p.chain.clone();
        Self { header: h, data: image.data.clone() }
    }

    pub fn from_surface(surface: &PhaseErrorSurface) -> Self {
        let (rows, cols) = surface.values.dim();
        let g = &surface.grid;
        let h = with_spatial(GridHeader::blank(GridKind::Surface, rows, cols, g.x_axis, g.y_axis), g);
        Self { header: h, data: real_grid(&surface.values) }
    }

    /// A profile is stored as a single-column grid over `X`.
    pub fn from_profile(profile: &ApeProfile, y0: f64) -> Self {
        let n = profile.phi0.len();
        let mut h = GridHeader::blank(GridKind::Profile, n, 1, profile.x_axis, UniformAxis::new(y0, 1.0, 1));
        h.y0 = Some(y0);
        let data = Array2::from_shape_fn((n, 1), |(i, _)| Complex64::new(profile.phi0[i], 0.0));
        Self { header: h, data }
    }

    /// Attach the scene geometry constants that are not implied by the grid.
    pub fn with_constants(mut self, carrier_frequency: Option<f64>, phi_ref: Option<f64>) -> Self {
        if carrier_frequency.is_some() {
            self.header.carrier_frequency = carrier_frequency;
        }
        if phi_ref.is_some() {
            self.header.phi_ref = phi_ref;
        }
        self
    }

    fn expect_kind(&self, kind: GridKind) -> std::result::Result<(), GridFileError> {
        if self.header.kind != kind {
            return Err(GridFileError::KindMismatch { expected: kind, found: self.header.kind });
        }
        Ok(())
    }

    pub fn into_phase_history(self) -> Result<PhaseHistory> {
        self.expect_kind(GridKind::PhaseHistory)?;
        let h = self.header;
        let stage = h.stage.ok_or_else(|| GridFileError::CorruptHeader("phase history without stage".into()))?;
        let fc = h
            .carrier_frequency
            .ok_or_else(|| GridFileError::CorruptHeader("phase history without carrier_frequency".into()))?;
        Ok(PhaseHistory {
            data: self.data,
            t_axis: h.axis0,
            fr_axis: h.axis1,
            carrier_frequency: fc,
            stage,
            empty_scene: h.empty_scene,
            invalid_fraction: h.invalid_fraction,
        })
    }

    pub fn into_image(self) -> Result<ComplexImage> {
        self.expect_kind(GridKind::Image)?;
        let grid = self.header.spatial_grid()?;
        let h = self.header;
        Ok(ComplexImage {
            data: self.data,
            grid,
            provenance: Provenance {
                chain: h.provenance,
                origin_row: h.origin_row,
                origin_col: h.origin_col,
                parent_rows: h.parent_rows,
                parent_cols: h.parent_cols,
            },
        })
    }

    pub fn into_surface(self) -> Result<PhaseErrorSurface> {
        self.expect_kind(GridKind::Surface)?;
        let grid = self.header.spatial_grid()?;
        Ok(PhaseErrorSurface { values: self.data.mapv(|v| v.re), grid })
    }

    pub fn into_profile(self) -> Result<ApeProfile> {
        self.expect_kind(GridKind::Profile)?;
        ApeProfile::from_samples(self.header.axis0, self.data.iter().map(|v| v.re).collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let text = self.header.to_text();
        let mut out = Vec::with_capacity(text.len() + self.header.payload_bytes());
        out.extend_from_slice(text.as_bytes());
        for v in self.data.iter() {
            out.extend_from_slice(&(v.re as f32).to_le_bytes());
            out.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        out
    }

    pub fn from_reader<R: Read>(reader: R) -> std::result::Result<Self, GridFileError> {
        let mut reader = BufReader::new(reader);
        let header = GridHeader::read_from(&mut reader)?;
        let expected = header.payload_bytes();
        let mut payload = Vec::with_capacity(expected);
        reader.take(expected as u64 + 1).read_to_end(&mut payload)?;
        if payload.len() < expected {
            return Err(GridFileError::Truncated { expected, found: payload.len() });
        }
        if payload.len() > expected {
            return Err(GridFileError::CorruptHeader("payload longer than rows x cols".into()));
        }
        let values: Vec<Complex64> = payload
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        let data = Array2::from_shape_vec((header.rows, header.cols), values)
            .map_err(|e| GridFileError::CorruptHeader(e.to_string()))?;
        Ok(Self { header, data })
    }

    pub fn write(&self, path: &Path) -> std::result::Result<(), GridFileError> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> std::result::Result<Self, GridFileError> {
        Self::from_reader(fs::File::open(path)?)
    }
}

/// Read only the header of a grid file.
pub fn read_header(path: &Path) -> std::result::Result<GridHeader, GridFileError> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    GridHeader::read_from(&mut reader)
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::result::Result<(), GridFileError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| GridFileError::Io(e.error))?;
    Ok(())
}

pub fn write_phase_history(ph: &PhaseHistory, path: &Path) -> Result<()> {
    Ok(GridFile::from_phase_history(ph).write(path)?)
}

pub fn read_phase_history(path: &Path) -> Result<PhaseHistory> {
    GridFile::read(path)?.into_phase_history()
}

pub fn write_image(image: &ComplexImage, path: &Path) -> Result<()> {
    Ok(GridFile::from_image(image).write(path)?)
}

pub fn read_image(path: &Path) -> Result<ComplexImage> {
    GridFile::read(path)?.into_image()
}

/// 8-bit dB-scaled magnitude, clipped `dynamic_range_db` below the peak.
/// Rows of the image become rows of the picture.
pub fn magnitude_to_gray(data: &Array2<Complex64>, dynamic_range_db: f64) -> Result<image::GrayImage> {
    if !(dynamic_range_db > 0.0) {
        return Err(Error::InvalidInput("dynamic range must be positive".into()));
    }
    let peak = data.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    let (rows, cols) = data.dim();
    let (w, h) = (u32::try_from(cols), u32::try_from(rows));
    let (Ok(w), Ok(h)) = (w, h) else {
        return Err(Error::Export("image too large".into()));
    };
    Ok(image::GrayImage::from_fn(w, h, |x, y| {
        let m = data[[y as usize, x as usize]].norm();
        let db = if m > 0.0 { 20.0 * (m / peak).log10() } else { -f64::INFINITY };
        let level = ((db + dynamic_range_db) / dynamic_range_db).clamp(0.0, 1.0);
        image::Luma([(255.0 * level).round() as u8])
    }))
}

/// Export a PNG of the dB magnitude.
pub fn export_magnitude(data: &Array2<Complex64>, path: &Path, dynamic_range_db: f64) -> Result<()> {
    let gray = magnitude_to_gray(data, dynamic_range_db)?;
    let mut bytes = std::io::Cursor::new(Vec::new());
    gray.write_to(&mut bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Export(e.to_string()))?;
    write_atomic(path, bytes.get_ref())?;
    Ok(())
}
