//! Binary file formats for channel frames, envelope images, and PGM display.
//!
//! Both binary formats share one layout: 4-byte magic, u32 version, two u32
//! dimensions, five f64 header values, then the payload as little-endian f32
//! in row-major order. Channel files (`FXPF`) store element rows of time
//! samples; envelope files (`FENV`) store depth rows of beamline columns.
//! Headers round-trip bit-exactly; payloads are quantized to f32 once at
//! write time and re-encode to identical bytes thereafter.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::beamform::{BeamGrid, DisplayImage, EnvelopeImage};
use crate::error::{Error, Result};
use crate::frame::ChannelFrame;
use crate::geometry::TransducerGeometry;

pub const CHANNEL_MAGIC: [u8; 4] = *b"FXPF";
pub const ENVELOPE_MAGIC: [u8; 4] = *b"FENV";
pub const FORMAT_VERSION: u32 = 1;

// --- little-endian primitives ---

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, offset: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.offset.checked_add(n).ok_or_else(|| Error::Format("length overflow".into()))?;
        if end > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated file: wanted {} bytes at offset {}, have {}",
                n,
                self.offset,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after the payload",
                self.bytes.len() - self.offset
            )));
        }
        Ok(())
    }
}

fn check_header(reader: &mut Reader<'_>, magic: [u8; 4], kind: &str) -> Result<(usize, usize)> {
    let got = reader.take(4)?;
    if got != magic {
        return Err(Error::Format(format!(
            "bad magic for a {kind} file: expected {:?}, got {:?}",
            magic, got
        )));
    }
    let version = reader.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported {kind} version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let rows = reader.u32()? as usize;
    let cols = reader.u32()? as usize;
    Ok((rows, cols))
}

fn payload(reader: &mut Reader<'_>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("payload size overflow".into()))?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(reader.f32()? as f64);
    }
    reader.finish()?;
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::Format(format!("payload shape: {e}")))
}

// --- channel frames ---

pub fn encode_channel_frame(frame: &ChannelFrame) -> Vec<u8> {
    let g = frame.geometry();
    let mut out = Vec::with_capacity(56 + frame.samples().len() * 4);
    out.extend_from_slice(&CHANNEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.num_elements as u32).to_le_bytes());
    out.extend_from_slice(&(frame.num_samples() as u32).to_le_bytes());
    out.extend_from_slice(&g.sampling_frequency.to_le_bytes());
    out.extend_from_slice(&g.center_frequency.to_le_bytes());
    out.extend_from_slice(&g.sound_speed.to_le_bytes());
    out.extend_from_slice(&g.pitch.to_le_bytes());
    out.extend_from_slice(&frame.start_time().to_le_bytes());
    for v in frame.samples().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_channel_frame(bytes: &[u8]) -> Result<ChannelFrame> {
    let mut r = Reader::new(bytes);
    let (rows, cols) = check_header(&mut r, CHANNEL_MAGIC, "channel")?;
    let sampling_frequency = r.f64()?;
    let center_frequency = r.f64()?;
    let sound_speed = r.f64()?;
    let pitch = r.f64()?;
    let start_time = r.f64()?;
    let samples = payload(&mut r, rows, cols)?;
    let geometry = TransducerGeometry::new(rows, pitch, center_frequency, sampling_frequency, sound_speed)
        .map_err(|e| Error::Format(format!("channel header: {e}")))?;
    ChannelFrame::new(geometry, samples, start_time)
        .map_err(|e| Error::Format(format!("channel payload: {e}")))
}

pub fn write_channel_frame(path: &Path, frame: &ChannelFrame) -> Result<()> {
    fs::write(path, encode_channel_frame(frame))?;
    Ok(())
}

pub fn read_channel_frame(path: &Path) -> Result<ChannelFrame> {
    decode_channel_frame(&fs::read(path)?)
}

// --- envelope images ---

pub fn encode_envelope_image(image: &EnvelopeImage) -> Vec<u8> {
    let grid = image.grid();
    let mut out = Vec::with_capacity(56 + image.magnitude().len() * 4);
    out.extend_from_slice(&ENVELOPE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.num_depth_samples as u32).to_le_bytes());
    out.extend_from_slice(&(grid.num_lines as u32).to_le_bytes());
    out.extend_from_slice(&grid.axial_spacing.to_le_bytes());
    out.extend_from_slice(&grid.lateral_spacing.to_le_bytes());
    out.extend_from_slice(&grid.depth_start.to_le_bytes());
    out.extend_from_slice(&image.sound_speed().to_le_bytes());
    out.extend_from_slice(&image.center_frequency().to_le_bytes());
    for v in image.magnitude().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_envelope_image(bytes: &[u8]) -> Result<EnvelopeImage> {
    let mut r = Reader::new(bytes);
    let (rows, cols) = check_header(&mut r, ENVELOPE_MAGIC, "envelope")?;
    let axial_spacing = r.f64()?;
    let lateral_spacing = r.f64()?;
    let depth_start = r.f64()?;
    let sound_speed = r.f64()?;
    let center_frequency = r.f64()?;
    let magnitude = payload(&mut r, rows, cols)?;
    let grid = BeamGrid {
        num_lines: cols,
        lateral_spacing,
        depth_start,
        axial_spacing,
        num_depth_samples: rows,
    };
    EnvelopeImage::new(magnitude, grid, sound_speed, center_frequency)
        .map_err(|e| Error::Format(format!("envelope payload: {e}")))
}

pub fn write_envelope_image(path: &Path, image: &EnvelopeImage) -> Result<()> {
    fs::write(path, encode_envelope_image(image))?;
    Ok(())
}

pub fn read_envelope_image(path: &Path) -> Result<EnvelopeImage> {
    decode_envelope_image(&fs::read(path)?)
}

// --- display images ---

pub fn encode_pgm(image: &DisplayImage) -> Result<Vec<u8>> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::Validation("display image has a zero dimension".into()));
    }
    if image.pixels.len() != image.width * image.height {
        return Err(Error::Validation(format!(
            "display image has {} pixels for {} x {}",
            image.pixels.len(),
            image.width,
            image.height
        )));
    }
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    Ok(out)
}

pub fn write_pgm(path: &Path, image: &DisplayImage) -> Result<()> {
    fs::write(path, encode_pgm(image)?)?;
    Ok(())
}
