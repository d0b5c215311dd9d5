//! Pipeline configuration: one JSON document that describes the array, the
//! phantom, the aberrating screen, the imaging grid, the filter, and the
//! regions to score. Defaults reproduce the reference experiment out of the
//! box, so `fxpf compare` needs no arguments.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use fxpf_core::{
    AdaptiveOrderPolicy, BeamGrid, BeamformOptions, Error, FxpfConfig, NamedRegion, OrderMode,
    PhantomSpec, PulseModel, RegionSpec, Result, TransducerGeometry, WindowKind,
    DEFAULT_HISTOGRAM_BINS,
};

/// Offset mixed into the global seed to decorrelate the aberration draw from
/// the phantom draw while keeping both reproducible from one number.
const ABERRATION_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Which prediction-filter variant a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "order", rename_all = "snake_case")]
pub enum FxpfMode {
    Off,
    Fixed(usize),
    Adaptive,
}

impl FxpfMode {
    /// Stable directory name for per-variant artifacts.
    pub fn dir_name(&self) -> String {
        match self {
            FxpfMode::Off => "off".into(),
            FxpfMode::Fixed(p) => format!("fixed{p}"),
            FxpfMode::Adaptive => "adaptive".into(),
        }
    }
}

impl fmt::Display for FxpfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FxpfMode::Off => write!(f, "off"),
            FxpfMode::Fixed(p) => write!(f, "fixed:{p}"),
            FxpfMode::Adaptive => write!(f, "adaptive"),
        }
    }
}

impl FromStr for FxpfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(FxpfMode::Off),
            "adaptive" => Ok(FxpfMode::Adaptive),
            _ => {
                let order = s
                    .strip_prefix("fixed:")
                    .and_then(|p| p.parse::<usize>().ok())
                    .filter(|p| *p >= 1)
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "bad filter mode {s:?}: expected off, fixed:<p>, or adaptive"
                        ))
                    })?;
                Ok(FxpfMode::Fixed(order))
            }
        }
    }
}

/// Aberrating screen description; the profile itself is drawn from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AberrationSettings {
    pub rms_seconds: f64,
    pub correlation_length: f64,
    pub seed: u64,
}

/// Imaging grid depth span; lateral layout always follows the array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub depth_start: f64,
    pub depth_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformSettings {
    pub f_number: f64,
    pub window: WindowKind,
    pub dynamic_range_db: f64,
}

/// Filter parameters shared by every variant; `mode` picks the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxpfSettings {
    pub mode: FxpfMode,
    pub regularization: f64,
    pub kernel_length: usize,
    pub iterations: usize,
    pub max_order: usize,
    pub depth_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub geometry: TransducerGeometry,
    pub pulse: PulseModel,
    pub phantom: PhantomSpec,
    pub aberration: AberrationSettings,
    pub grid: GridSettings,
    pub beamform: BeamformSettings,
    pub fxpf: FxpfSettings,
    pub regions: Vec<NamedRegion>,
    pub histogram_bins: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seed = 42;
        let geometry = TransducerGeometry::new(128, 0.3e-3, 5.208e6, 20.832e6, 1540.0)
            .expect("default geometry is valid");
        let kernel_length =
            (2.0 * geometry.sampling_frequency / geometry.center_frequency).round() as usize;
        let cyst_radius = 3e-3;
        let region = |name: &str, z: f64| NamedRegion {
            name: name.into(),
            region: RegionSpec {
                center_x: 0.0,
                center_z: z,
                target_radius: 0.8 * cyst_radius,
                background_inner_radius: 1.1 * cyst_radius,
                background_outer_radius: 1.5 * cyst_radius,
            },
        };
        PipelineConfig {
            seed,
            pulse: PulseModel {
                center_frequency: geometry.center_frequency,
                fractional_bandwidth: 0.7,
                amplitude: 1.0,
            },
            phantom: PhantomSpec {
                lateral_extent: [-9e-3, 9e-3],
                depth_extent: [1e-3, 48e-3],
                density_per_mm2: 8.0,
                inclusions: vec![
                    fxpf_core::Inclusion {
                        center_x: 0.0,
                        center_z: 6e-3,
                        radius: cyst_radius,
                        echogenicity_db: None,
                    },
                    fxpf_core::Inclusion {
                        center_x: 0.0,
                        center_z: 40e-3,
                        radius: cyst_radius,
                        echogenicity_db: None,
                    },
                ],
                seed,
            },
            aberration: AberrationSettings {
                rms_seconds: 30e-9,
                correlation_length: 0.8e-3,
                seed: seed.wrapping_add(ABERRATION_SEED_OFFSET),
            },
            grid: GridSettings { depth_start: 1e-3, depth_end: 47e-3 },
            beamform: BeamformSettings {
                f_number: 1.75,
                window: WindowKind::RaisedCosine,
                dynamic_range_db: 60.0,
            },
            fxpf: FxpfSettings {
                mode: FxpfMode::Adaptive,
                regularization: 0.01,
                kernel_length,
                iterations: 2,
                max_order: 4,
                depth_exponent: 1.0 / 3.0,
            },
            regions: vec![region("shallow_cyst", 6e-3), region("deep_cyst", 40e-3)],
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            geometry,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    /// Apply a global seed: the phantom draws from it directly and the
    /// aberration from a fixed offset, so one number moves the whole
    /// experiment to a fresh realization.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.phantom.seed = seed;
        self.aberration.seed = seed.wrapping_add(ABERRATION_SEED_OFFSET);
        self
    }

    pub fn with_mode(mut self, mode: FxpfMode) -> Self {
        self.fxpf.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.pulse.validate()?;
        self.phantom.validate()?;
        if !(self.aberration.rms_seconds.is_finite() && self.aberration.rms_seconds >= 0.0) {
            return Err(Error::Validation(format!(
                "aberration rms must be finite and non-negative, got {}",
                self.aberration.rms_seconds
            )));
        }
        if !(self.aberration.correlation_length.is_finite()
            && self.aberration.correlation_length >= 0.0)
        {
            return Err(Error::Validation(format!(
                "aberration correlation length must be finite and non-negative, got {}",
                self.aberration.correlation_length
            )));
        }
        self.beam_grid()?;
        if !(self.beamform.dynamic_range_db.is_finite() && self.beamform.dynamic_range_db > 0.0) {
            return Err(Error::Validation(format!(
                "dynamic range must be finite and positive, got {} dB",
                self.beamform.dynamic_range_db
            )));
        }
        // Validating the filter config also covers f-number and the
        // kernel-vs-order invariant for the largest order in use.
        self.fxpf_config(FxpfMode::Adaptive, &self.geometry)?;
        if self.regions.is_empty() {
            return Err(Error::Validation("config lists no metric regions".into()));
        }
        for named in &self.regions {
            named.region.validate()?;
        }
        if self.histogram_bins < 2 {
            return Err(Error::Validation(format!(
                "histogram bins must be at least 2, got {}",
                self.histogram_bins
            )));
        }
        Ok(())
    }

    pub fn beam_grid(&self) -> Result<BeamGrid> {
        BeamGrid::from_geometry(&self.geometry, self.grid.depth_start, self.grid.depth_end)
    }

    /// Simulation length: cover the farthest two-way path either the phantom
    /// can produce or the grid can ask for, plus pulse support and screen
    /// slack.
    pub fn simulation_duration(&self) -> f64 {
        let c = self.geometry.sound_speed;
        let half_aperture = self.geometry.aperture_length() / 2.0;
        let z_scatter = self.phantom.depth_extent[1];
        let x_scatter = self.phantom.lateral_extent[0]
            .abs()
            .max(self.phantom.lateral_extent[1].abs());
        let scatter_path = (z_scatter + (x_scatter + half_aperture).hypot(z_scatter)) / c;
        let z_grid = self.grid.depth_end;
        let grid_path = (z_grid + (2.0 * half_aperture).hypot(z_grid)) / c;
        scatter_path.max(grid_path)
            + self.pulse.support_half_width()
            + 8.0 * self.aberration.rms_seconds
            + 2.0 / self.geometry.sampling_frequency
    }

    /// Library-level filter config for one variant. The aperture length comes
    /// from `geometry` so a frame read from disk filters consistently with
    /// the array that recorded it.
    fn fxpf_config(&self, mode: FxpfMode, geometry: &TransducerGeometry) -> Result<FxpfConfig> {
        let (order_mode, max_order) = match mode {
            FxpfMode::Off => unreachable!("off variant carries no filter config"),
            FxpfMode::Fixed(p) => (OrderMode::Fixed(p), p),
            FxpfMode::Adaptive => (OrderMode::Adaptive, self.fxpf.max_order),
        };
        let config = FxpfConfig {
            regularization: self.fxpf.regularization,
            kernel_length: self.fxpf.kernel_length,
            iterations: self.fxpf.iterations,
            policy: AdaptiveOrderPolicy {
                max_order,
                depth_exponent: self.fxpf.depth_exponent,
                f_number: self.beamform.f_number,
                aperture_length: geometry.aperture_length(),
                mode: order_mode,
            },
        };
        config.validate()?;
        Ok(config)
    }

    /// Beamformer options for one variant, against the array that recorded
    /// the frame being processed.
    pub fn beamform_options(
        &self,
        mode: FxpfMode,
        geometry: &TransducerGeometry,
    ) -> Result<BeamformOptions> {
        let fxpf = match mode {
            FxpfMode::Off => None,
            _ => Some(self.fxpf_config(mode, geometry)?),
        };
        Ok(BeamformOptions {
            f_number: self.beamform.f_number,
            window: self.beamform.window,
            fxpf,
        })
    }
}
