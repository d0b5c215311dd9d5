//! Subcommand implementations. Each command is a plain function from config
//! to artifacts plus a summary struct, so tests and the binary share one code
//! path. Stage wall times go to the log; nothing nondeterministic is written
//! into any artifact.

use std::path::Path;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use fxpf_core::{
    beamform_image, evaluate_regions, generate_aberration, generate_phantom, log_compress,
    read_channel_frame, read_envelope_image, simulate_rx, write_channel_frame,
    write_envelope_image, write_pgm, BeamGrid, ChannelFrame, Error, MetricsReport, Result,
};

use crate::config::{FxpfMode, PipelineConfig};

/// The four variants `compare` runs, in output order.
pub const COMPARE_VARIANTS: [FxpfMode; 4] = [
    FxpfMode::Off,
    FxpfMode::Fixed(1),
    FxpfMode::Fixed(4),
    FxpfMode::Adaptive,
];

// --- simulate ---

/// Facts about a simulated frame worth printing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub num_scatterers: usize,
    pub num_elements: usize,
    pub num_samples: usize,
    pub duration_seconds: f64,
    pub rms_amplitude: f64,
}

fn frame_rms(frame: &ChannelFrame) -> f64 {
    let s = frame.samples();
    (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt()
}

fn simulate_frame(config: &PipelineConfig) -> Result<(ChannelFrame, usize)> {
    let start = Instant::now();
    let scatterers = generate_phantom(&config.phantom)?;
    let screen = generate_aberration(
        config.geometry.num_elements,
        config.aberration.rms_seconds,
        config.aberration.correlation_length,
        config.geometry.pitch,
        config.aberration.seed,
    )?;
    let frame = simulate_rx(
        &scatterers,
        &config.geometry,
        &config.pulse,
        &screen,
        config.simulation_duration(),
    )?;
    info!(
        "simulate: {} scatterers -> {}x{} frame in {:.2?}",
        scatterers.len(),
        frame.num_elements(),
        frame.samples().ncols(),
        start.elapsed()
    );
    Ok((frame, scatterers.len()))
}

/// Simulate the configured phantom behind the configured screen and write the
/// channel-data file.
pub fn cmd_simulate(config: &PipelineConfig, out: &Path) -> Result<SimulateSummary> {
    config.validate()?;
    let (frame, num_scatterers) = simulate_frame(config)?;
    write_channel_frame(out, &frame)?;
    Ok(SimulateSummary {
        num_scatterers,
        num_elements: frame.num_elements(),
        num_samples: frame.samples().ncols(),
        duration_seconds: frame.samples().ncols() as f64 / frame.geometry().sampling_frequency,
        rms_amplitude: frame_rms(&frame),
    })
}

// --- beamform ---

/// Beamform one frame under one variant; grid and filter follow the frame's
/// own geometry.
fn beamform_variant(
    frame: &ChannelFrame,
    config: &PipelineConfig,
    mode: FxpfMode,
) -> Result<fxpf_core::EnvelopeImage> {
    let start = Instant::now();
    let grid = BeamGrid::from_geometry(frame.geometry(), config.grid.depth_start, config.grid.depth_end)?;
    let options = config.beamform_options(mode, frame.geometry())?;
    let output = beamform_image(frame, &grid, &options)?;
    info!("beamform[{mode}]: {} lines in {:.2?}", grid.num_lines, start.elapsed());
    Ok(output.envelope)
}

/// Write the envelope and its display image into `out_dir`.
fn write_variant_artifacts(
    image: &fxpf_core::EnvelopeImage,
    dynamic_range_db: f64,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_envelope_image(&out_dir.join("envelope.fenv"), image)?;
    let display = log_compress(image, dynamic_range_db)?;
    write_pgm(&out_dir.join("image.pgm"), &display)?;
    Ok(())
}

/// Read a channel-data file, beamform it under `mode`, and write
/// `envelope.fenv` plus `image.pgm` into `out_dir`.
pub fn cmd_beamform(
    input: &Path,
    config: &PipelineConfig,
    mode: FxpfMode,
    out_dir: &Path,
) -> Result<()> {
    config.validate()?;
    let frame = read_channel_frame(input)?;
    let image = beamform_variant(&frame, config, mode)?;
    write_variant_artifacts(&image, config.beamform.dynamic_range_db, out_dir)
}

// --- evaluate ---

/// Score an envelope file against the configured regions.
pub fn cmd_evaluate(envelope: &Path, config: &PipelineConfig) -> Result<MetricsReport> {
    config.validate()?;
    let start = Instant::now();
    let image = read_envelope_image(envelope)?;
    let report = evaluate_regions(&image, &config.regions, config.histogram_bins)?;
    info!("evaluate: {} regions in {:.2?}", report.regions.len(), start.elapsed());
    Ok(report)
}

// --- compare ---

/// One region's scores inside a variant row. Non-finite contrast (an empty
/// target over a live background) serializes as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub name: String,
    pub contrast_db: Option<f64>,
    pub gcnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    pub mean_contrast_db: Option<f64>,
    pub mean_gcnr: f64,
    pub regions: Vec<RegionRow>,
}

/// The whole comparison: four variants of one frame, per-region and mean
/// scores, and the frame checksum proving no variant mutated the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub seed: u64,
    pub frame_checksum: String,
    pub variants: Vec<VariantRow>,
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn variant_row(variant: FxpfMode, report: &MetricsReport) -> VariantRow {
    VariantRow {
        variant: variant.to_string(),
        mean_contrast_db: finite_or_none(report.mean_contrast_db),
        mean_gcnr: report.mean_gcnr,
        regions: report
            .regions
            .iter()
            .map(|r| RegionRow {
                name: r.name.clone(),
                contrast_db: finite_or_none(r.contrast_db),
                gcnr: r.gcnr,
            })
            .collect(),
    }
}

/// FNV-1a over the frame's exact bit content: geometry, start time, then
/// every sample in row-major order.
fn frame_checksum(frame: &ChannelFrame) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    let mut eat = |word: u64| {
        for byte in word.to_le_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(PRIME);
        }
    };
    let g = frame.geometry();
    eat(g.num_elements as u64);
    eat(g.pitch.to_bits());
    eat(g.center_frequency.to_bits());
    eat(g.sampling_frequency.to_bits());
    eat(g.sound_speed.to_bits());
    eat(frame.start_time().to_bits());
    for &v in frame.samples().iter() {
        eat(v.to_bits());
    }
    hash
}

impl CompareReport {
    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("compare report serializes");
        text.push('\n');
        text
    }

    /// Fixed-width text table, one line per variant.
    pub fn to_table(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            match v {
                Some(v) => format!("{v:8.2}"),
                None => format!("{:>8}", "inf"),
            }
        }
        let mut out = String::new();
        let names: Vec<&str> = self
            .variants
            .first()
            .map(|row| row.regions.iter().map(|r| r.name.as_str()).collect())
            .unwrap_or_default();
        out.push_str(&format!("{:<10} {:>8} {:>8}", "variant", "contrast", "gcnr"));
        for name in &names {
            out.push_str(&format!(" {:>20}", name));
        }
        out.push('\n');
        for row in &self.variants {
            out.push_str(&format!(
                "{:<10} {} {:8.3}",
                row.variant,
                cell(row.mean_contrast_db),
                row.mean_gcnr
            ));
            for region in &row.regions {
                out.push_str(&format!(
                    "   {} /{:6.3}",
                    cell(region.contrast_db),
                    region.gcnr
                ));
            }
            out.push('\n');
        }
        out
    }
}

/// Simulate one aberrated frame, beamform it under all four variants, score
/// each from its own written envelope, and summarize.
///
/// Layout under `out_dir`: `<variant>/{envelope.fenv, image.pgm,
/// metrics.json}` and `compare.json`. Metrics are computed from the decoded
/// artifact, not the in-memory image, so the report describes exactly what
/// is on disk.
pub fn cmd_compare(config: &PipelineConfig, out_dir: &Path) -> Result<CompareReport> {
    config.validate()?;
    let (frame, _) = simulate_frame(config)?;
    let checksum = frame_checksum(&frame);

    let mut variants = Vec::with_capacity(COMPARE_VARIANTS.len());
    for mode in COMPARE_VARIANTS {
        let image = beamform_variant(&frame, config, mode)?;
        let variant_dir = out_dir.join(mode.dir_name());
        write_variant_artifacts(&image, config.beamform.dynamic_range_db, &variant_dir)?;
        let written = read_envelope_image(&variant_dir.join("envelope.fenv"))?;
        let report = evaluate_regions(&written, &config.regions, config.histogram_bins)?;
        std::fs::write(variant_dir.join("metrics.json"), report.to_json_pretty())?;
        if frame_checksum(&frame) != checksum {
            return Err(Error::Validation(format!(
                "variant {mode} mutated the shared input frame"
            )));
        }
        variants.push(variant_row(mode, &report));
    }

    let report = CompareReport {
        seed: config.seed,
        frame_checksum: format!("{checksum:016x}"),
        variants,
    };
    std::fs::write(out_dir.join("compare.json"), report.to_json_pretty())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fxpf_core::TransducerGeometry;
    use ndarray::Array2;

    fn tiny_frame(fill: impl Fn(usize, usize) -> f64) -> ChannelFrame {
        let geometry = TransducerGeometry::new(4, 0.3e-3, 5e6, 20e6, 1540.0).unwrap();
        let samples = Array2::from_shape_fn((4, 6), |(i, j)| fill(i, j));
        ChannelFrame::new(geometry, samples, 0.0).unwrap()
    }

    #[test]
    fn checksum_tracks_content_not_identity() {
        let a = tiny_frame(|i, j| (i * 7 + j) as f64);
        let b = tiny_frame(|i, j| (i * 7 + j) as f64);
        assert_eq!(frame_checksum(&a), frame_checksum(&b));
        let c = tiny_frame(|i, j| (i * 7 + j) as f64 + if i == 3 && j == 5 { 1e-12 } else { 0.0 });
        assert_ne!(frame_checksum(&a), frame_checksum(&c));
    }

    #[test]
    fn variant_rows_map_infinities_to_null() {
        let report = MetricsReport {
            regions: vec![fxpf_core::RegionReport {
                name: "cyst".into(),
                contrast_db: f64::INFINITY,
                gcnr: 1.0,
                target_pixels: 5,
                background_pixels: 9,
                flags: vec![],
            }],
            mean_contrast_db: f64::INFINITY,
            mean_gcnr: 1.0,
            histogram_bins: 256,
        };
        let row = variant_row(FxpfMode::Off, &report);
        assert_eq!(row.mean_contrast_db, None);
        assert_eq!(row.regions[0].contrast_db, None);
        let text = serde_json::to_string(&row).unwrap();
        assert!(text.contains("\"mean_contrast_db\":null"));
        let back: VariantRow = serde_json::from_str(&text).unwrap();
        assert_eq!(back, row);
    }

    #[test]
    fn table_lists_every_variant() {
        let report = CompareReport {
            seed: 1,
            frame_checksum: "00".into(),
            variants: COMPARE_VARIANTS
                .iter()
                .map(|m| VariantRow {
                    variant: m.to_string(),
                    mean_contrast_db: Some(1.0),
                    mean_gcnr: 0.5,
                    regions: vec![],
                })
                .collect(),
        };
        let table = report.to_table();
        for mode in COMPARE_VARIANTS {
            assert!(table.contains(&mode.to_string()));
        }
    }
}
