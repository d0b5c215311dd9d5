//! Plane-wave delay-and-sum beamforming.
//!
//! A zero-angle plane wave reaches depth z after time z/c; the echo returns
//! to element at `ex` along the hypotenuse. Alignment resamples every channel
//! onto a depth grid per image line, after which summation is a weighted
//! column sum. The optional prediction-filter stage runs on the aligned
//! channels, between alignment and summation, using the apodization weights
//! to decide which channels take part at each depth.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::ChannelFrame;
use crate::fxpf::{fxpf_filter_frame, FxpfConfig};
use crate::geometry::TransducerGeometry;
use crate::spectrum::{fft_forward, fft_inverse};

// --- image grid ---

/// Rectangular image grid: lateral beamlines by axial depth samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamGrid {
    pub num_lines: usize,
    /// Beamline spacing in meters, lines centered on the array midpoint.
    pub lateral_spacing: f64,
    /// Depth of the first axial sample in meters.
    pub depth_start: f64,
    /// Axial sample spacing in meters.
    pub axial_spacing: f64,
    pub num_depth_samples: usize,
}

impl BeamGrid {
    /// One beamline per element and axial samples at the native two-way RF
    /// rate, c / (2 fs).
    pub fn from_geometry(geometry: &TransducerGeometry, depth_start: f64, depth_end: f64) -> Result<Self> {
        geometry.validate()?;
        if !(depth_start.is_finite() && depth_start >= 0.0) {
            return Err(Error::Validation(format!(
                "depth_start must be finite and non-negative, got {depth_start}"
            )));
        }
        if !(depth_end.is_finite() && depth_end > depth_start) {
            return Err(Error::Validation(format!(
                "depth_end {depth_end} must exceed depth_start {depth_start}"
            )));
        }
        let axial_spacing = geometry.sound_speed / (2.0 * geometry.sampling_frequency);
        let num_depth_samples = (((depth_end - depth_start) / axial_spacing).ceil() as usize).max(2);
        let grid = BeamGrid {
            num_lines: geometry.num_elements,
            lateral_spacing: geometry.pitch,
            depth_start,
            axial_spacing,
            num_depth_samples,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_lines == 0 {
            return Err(Error::Validation("grid needs at least one beamline".into()));
        }
        if self.num_depth_samples < 2 {
            return Err(Error::Validation("grid needs at least two depth samples".into()));
        }
        for (name, v) in [
            ("lateral_spacing", self.lateral_spacing),
            ("axial_spacing", self.axial_spacing),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !(self.depth_start.is_finite() && self.depth_start >= 0.0) {
            return Err(Error::Validation(format!(
                "depth_start must be finite and non-negative, got {}",
                self.depth_start
            )));
        }
        Ok(())
    }

    pub fn lateral_position(&self, line: usize) -> f64 {
        (line as f64 - (self.num_lines as f64 - 1.0) / 2.0) * self.lateral_spacing
    }

    pub fn lateral_positions(&self) -> Vec<f64> {
        (0..self.num_lines).map(|j| self.lateral_position(j)).collect()
    }

    pub fn depth(&self, sample: usize) -> f64 {
        self.depth_start + sample as f64 * self.axial_spacing
    }

    pub fn depths(&self) -> Vec<f64> {
        (0..self.num_depth_samples).map(|k| self.depth(k)).collect()
    }

    /// Sampling frequency of the depth axis read as two-way travel time.
    pub fn axial_sampling_frequency(&self, sound_speed: f64) -> f64 {
        sound_speed / (2.0 * self.axial_spacing)
    }

    /// Two-way travel time to the first depth sample.
    pub fn start_time(&self, sound_speed: f64) -> f64 {
        2.0 * self.depth_start / sound_speed
    }
}

// --- alignment ---

/// Two-way travel time for a zero-angle plane wave: down to the pixel depth,
/// back along the straight path to the element.
pub fn receive_delay(element_x: f64, pixel: (f64, f64), sound_speed: f64) -> f64 {
    let (x, z) = pixel;
    let dx = x - element_x;
    (z + (dx * dx + z * z).sqrt()) / sound_speed
}

/// Resample every channel onto the depth grid of one beamline.
///
/// Reads use linear interpolation; requests outside the recorded window
/// produce zeros and are counted in the second return value. The aligned
/// frame reuses the array geometry with the sampling frequency reinterpreted
/// for the depth axis, and starts at the two-way time of the first depth.
pub fn align_channels(
    raw: &ChannelFrame,
    beamline_x: f64,
    grid: &BeamGrid,
) -> Result<(ChannelFrame, u64)> {
    grid.validate()?;
    if !beamline_x.is_finite() {
        return Err(Error::Validation(format!("beamline_x must be finite, got {beamline_x}")));
    }
    let t_len = raw.num_samples();
    if t_len < 2 {
        return Err(Error::Validation("alignment needs at least 2 recorded samples".into()));
    }

    let geometry = raw.geometry();
    let fs = geometry.sampling_frequency;
    let c = geometry.sound_speed;
    let positions = geometry.element_positions();
    let samples = raw.samples();

    let mut out = Array2::zeros((geometry.num_elements, grid.num_depth_samples));
    let mut out_of_range = 0u64;
    for (ch, &ex) in positions.iter().enumerate() {
        let trace = samples.row(ch);
        for k in 0..grid.num_depth_samples {
            let t = receive_delay(ex, (beamline_x, grid.depth(k)), c);
            let pos = (t - raw.start_time()) * fs;
            if pos >= 0.0 && pos <= (t_len - 1) as f64 {
                let i0 = (pos.floor() as usize).min(t_len - 2);
                let frac = pos - i0 as f64;
                out[[ch, k]] = trace[i0] * (1.0 - frac) + trace[i0 + 1] * frac;
            } else {
                out_of_range += 1;
            }
        }
    }

    let aligned_geometry = TransducerGeometry {
        sampling_frequency: grid.axial_sampling_frequency(c),
        ..geometry.clone()
    };
    let frame = ChannelFrame::new(aligned_geometry, out, grid.start_time(c))?;
    Ok((frame, out_of_range))
}

// --- apodization ---

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    RaisedCosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApodizationProfile {
    /// One weight per element, zero outside the accepted aperture.
    pub weights: Vec<f64>,
    pub window: WindowKind,
}

/// Receive aperture for one pixel: elements within `depth / (2 f#)` of the
/// beamline, tapered by the window. When the aperture closes entirely (depth
/// near zero between two elements) the nearest element carries weight 1 so
/// every pixel stays defined.
pub fn apodization(
    beamline_x: f64,
    depth: f64,
    geometry: &TransducerGeometry,
    f_number: f64,
    window: WindowKind,
) -> Result<ApodizationProfile> {
    if !(f_number.is_finite() && f_number > 0.0) {
        return Err(Error::Validation(format!(
            "f_number must be finite and positive, got {f_number}"
        )));
    }
    if !(depth.is_finite() && depth >= 0.0) {
        return Err(Error::Validation(format!(
            "depth must be finite and non-negative, got {depth}"
        )));
    }
    if !beamline_x.is_finite() {
        return Err(Error::Validation(format!("beamline_x must be finite, got {beamline_x}")));
    }

    let half_aperture = depth / (2.0 * f_number);
    let positions = geometry.element_positions();
    let mut weights = vec![0.0; positions.len()];
    let mut any_positive = false;
    if half_aperture > 0.0 {
        for (w, &x) in weights.iter_mut().zip(positions.iter()) {
            let u = x - beamline_x;
            if u.abs() <= half_aperture {
                *w = match window {
                    WindowKind::Rectangular => 1.0,
                    WindowKind::RaisedCosine => 0.5 * (1.0 + (PI * u / half_aperture).cos()),
                };
                any_positive |= *w > 0.0;
            }
        }
    }
    if !any_positive {
        let nearest = positions
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - beamline_x).abs().total_cmp(&(*b - beamline_x).abs()))
            .map(|(i, _)| i)
            .expect("geometry has at least one element");
        weights = vec![0.0; positions.len()];
        weights[nearest] = 1.0;
    }
    Ok(ApodizationProfile { weights, window })
}

/// Apodization for every depth of one beamline; shape [elements, depths].
pub fn apodization_matrix(
    beamline_x: f64,
    grid: &BeamGrid,
    geometry: &TransducerGeometry,
    f_number: f64,
    window: WindowKind,
) -> Result<Array2<f64>> {
    grid.validate()?;
    let mut out = Array2::zeros((geometry.num_elements, grid.num_depth_samples));
    for k in 0..grid.num_depth_samples {
        let profile = apodization(beamline_x, grid.depth(k), geometry, f_number, window)?;
        for (ch, w) in profile.weights.iter().enumerate() {
            out[[ch, k]] = *w;
        }
    }
    Ok(out)
}

// --- summation and detection ---

/// Weighted sum across channels, element order fixed so results are
/// reproducible bit for bit.
pub fn das_sum(aligned: &ChannelFrame, apodization: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let (n, t) = (aligned.num_elements(), aligned.num_samples());
    if apodization.dim() != (n, t) {
        return Err(Error::Validation(format!(
            "apodization shape {:?} does not match frame shape ({n}, {t})",
            apodization.dim()
        )));
    }
    let samples = aligned.samples();
    let mut out = vec![0.0; t];
    for ch in 0..n {
        for (k, o) in out.iter_mut().enumerate() {
            *o += apodization[[ch, k]] * samples[[ch, k]];
        }
    }
    Ok(out)
}

/// Envelope by analytic signal: zero the negative frequencies, double the
/// positive ones, take the modulus.
pub fn envelope(line: &[f64]) -> Vec<f64> {
    let t = line.len();
    if t == 0 {
        return Vec::new();
    }
    if t == 1 {
        return vec![line[0].abs()];
    }
    let mut buf: Vec<Complex64> = line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    let half = t / 2;
    for (k, b) in buf.iter_mut().enumerate() {
        if k == 0 || (t % 2 == 0 && k == half) {
            // DC and Nyquist stay as they are.
        } else if k < (t + 1) / 2 {
            *b *= 2.0;
        } else {
            *b = Complex64::ZERO;
        }
    }
    fft_inverse(&mut buf);
    let scale = 1.0 / t as f64;
    buf.iter().map(|b| (b * scale).norm()).collect()
}

// --- display mapping ---

/// Envelope image on its grid; magnitudes are non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeImage {
    /// Shape [num_depth_samples, num_lines]; row 0 is the shallowest depth.
    magnitude: Array2<f64>,
    grid: BeamGrid,
    sound_speed: f64,
    center_frequency: f64,
}

impl EnvelopeImage {
    pub fn new(
        magnitude: Array2<f64>,
        grid: BeamGrid,
        sound_speed: f64,
        center_frequency: f64,
    ) -> Result<Self> {
        grid.validate()?;
        if magnitude.dim() != (grid.num_depth_samples, grid.num_lines) {
            return Err(Error::Validation(format!(
                "image shape {:?} does not match grid ({}, {})",
                magnitude.dim(),
                grid.num_depth_samples,
                grid.num_lines
            )));
        }
        if !magnitude.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::Validation("envelope must be finite and non-negative".into()));
        }
        for (name, v) in [("sound_speed", sound_speed), ("center_frequency", center_frequency)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(EnvelopeImage {
            magnitude,
            grid,
            sound_speed,
            center_frequency,
        })
    }

    pub fn magnitude(&self) -> &Array2<f64> {
        &self.magnitude
    }

    pub fn grid(&self) -> &BeamGrid {
        &self.grid
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }
}

/// 8-bit grayscale image, row-major, row 0 at the top (shallowest depth).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayImage {
    pub pixels: Vec<u8>,
    pub width: usize,
    pub height: usize,
}

/// Map an envelope to 8-bit via dB relative to the image maximum:
/// 0 dB -> 255, -dynamic_range dB and below -> 0, linear in between.
pub fn log_compress(image: &EnvelopeImage, dynamic_range_db: f64) -> Result<DisplayImage> {
    if !(dynamic_range_db.is_finite() && dynamic_range_db > 0.0) {
        return Err(Error::Validation(format!(
            "dynamic range must be finite and positive, got {dynamic_range_db}"
        )));
    }
    let mag = &image.magnitude;
    let peak = mag.iter().fold(0.0_f64, |a, &b| a.max(b));
    let (height, width) = mag.dim();
    let mut pixels = vec![0u8; height * width];
    if peak > 0.0 {
        for (p, &v) in pixels.iter_mut().zip(mag.iter()) {
            if v > 0.0 {
                let db = 20.0 * (v / peak).log10();
                let clamped = db.clamp(-dynamic_range_db, 0.0);
                *p = (255.0 * (1.0 + clamped / dynamic_range_db)).round() as u8;
            }
        }
    }
    Ok(DisplayImage {
        pixels,
        width,
        height,
    })
}

// --- whole-image pipeline ---

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformOptions {
    pub f_number: f64,
    pub window: WindowKind,
    /// Prediction filtering applied to the aligned channels of every line;
    /// `None` beamforms the raw alignment.
    pub fxpf: Option<FxpfConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformOutput {
    pub envelope: EnvelopeImage,
    /// Total alignment reads that fell outside the recorded window.
    pub out_of_range_reads: u64,
}

/// Beamform a full image, one beamline per grid column.
///
/// Lines are independent, so they run in parallel; results are collected in
/// line order and each line is computed sequentially, which keeps the output
/// identical for any worker count.
pub fn beamform_image(
    raw: &ChannelFrame,
    grid: &BeamGrid,
    options: &BeamformOptions,
) -> Result<BeamformOutput> {
    grid.validate()?;
    if let Some(cfg) = &options.fxpf {
        cfg.validate()?;
    }
    if !(options.f_number.is_finite() && options.f_number > 0.0) {
        return Err(Error::Validation(format!(
            "f_number must be finite and positive, got {}",
            options.f_number
        )));
    }

    let lines: Vec<(Vec<f64>, u64)> = (0..grid.num_lines)
        .into_par_iter()
        .map(|j| beamform_line(raw, grid, options, j))
        .collect::<Result<Vec<_>>>()?;

    let mut magnitude = Array2::zeros((grid.num_depth_samples, grid.num_lines));
    let mut out_of_range_reads = 0u64;
    for (j, (line, oob)) in lines.into_iter().enumerate() {
        out_of_range_reads += oob;
        for (k, v) in line.into_iter().enumerate() {
            magnitude[[k, j]] = v;
        }
    }
    let geometry = raw.geometry();
    let envelope_image = EnvelopeImage::new(
        magnitude,
        grid.clone(),
        geometry.sound_speed,
        geometry.center_frequency,
    )?;
    Ok(BeamformOutput {
        envelope: envelope_image,
        out_of_range_reads,
    })
}

fn beamform_line(
    raw: &ChannelFrame,
    grid: &BeamGrid,
    options: &BeamformOptions,
    line: usize,
) -> Result<(Vec<f64>, u64)> {
    let beamline_x = grid.lateral_position(line);
    let (aligned, out_of_range) = align_channels(raw, beamline_x, grid)?;
    let apod = apodization_matrix(beamline_x, grid, raw.geometry(), options.f_number, options.window)?;
    let working = match &options.fxpf {
        Some(cfg) => fxpf_filter_frame(&aligned, apod.view(), cfg)?,
        None => aligned,
    };
    let summed = das_sum(&working, apod.view())?;
    Ok((envelope(&summed), out_of_range))
}
