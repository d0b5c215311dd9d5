//! Synthetic phantom and receive-data generation.
//!
//! Scattering is quasi-physical: point scatterers with Gaussian amplitudes,
//! spherical spreading on receive, and a Gaussian-modulated cosine pulse. A
//! zero-angle plane wave arrives at depth z after z/c; each echo lands on
//! element m after the return path plus that element's aberration delay.
//! Aberration is a near-field phase screen: one delay per element, correlated
//! along the array, applied on transmit through the element nearest the
//! scatterer and again on receive.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frame::ChannelFrame;
use crate::geometry::TransducerGeometry;

// --- phantom ---

/// Circular region that rescales or removes the scatterers inside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub center_x: f64,
    pub center_z: f64,
    pub radius: f64,
    /// Amplitude scale in dB relative to the background; `None` removes the
    /// scatterers entirely (anechoic).
    pub echogenicity_db: Option<f64>,
}

impl Inclusion {
    fn contains(&self, x: f64, z: f64) -> bool {
        let dx = x - self.center_x;
        let dz = z - self.center_z;
        dx * dx + dz * dz <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    /// Lateral extent [min, max] in meters.
    pub lateral_extent: [f64; 2],
    /// Depth extent [min, max] in meters.
    pub depth_extent: [f64; 2],
    /// Expected scatterer count per square millimeter.
    pub density_per_mm2: f64,
    pub inclusions: Vec<Inclusion>,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let [x0, x1] = self.lateral_extent;
        let [z0, z1] = self.depth_extent;
        if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
            return Err(Error::Validation(format!("bad lateral extent [{x0}, {x1}]")));
        }
        if !(z0.is_finite() && z1.is_finite() && 0.0 <= z0 && z0 < z1) {
            return Err(Error::Validation(format!("bad depth extent [{z0}, {z1}]")));
        }
        if !(self.density_per_mm2.is_finite() && self.density_per_mm2 >= 0.0) {
            return Err(Error::Validation(format!(
                "density must be finite and non-negative, got {}",
                self.density_per_mm2
            )));
        }
        for (i, inc) in self.inclusions.iter().enumerate() {
            if !(inc.radius.is_finite() && inc.radius > 0.0) {
                return Err(Error::Validation(format!(
                    "inclusion {i} radius must be finite and positive, got {}",
                    inc.radius
                )));
            }
            if let Some(db) = inc.echogenicity_db {
                if !db.is_finite() {
                    return Err(Error::Validation(format!("inclusion {i} echogenicity is not finite")));
                }
            }
            let inside = inc.center_x - inc.radius >= x0
                && inc.center_x + inc.radius <= x1
                && inc.center_z - inc.radius >= z0
                && inc.center_z + inc.radius <= z1;
            if !inside {
                return Err(Error::Validation(format!(
                    "inclusion {i} extends outside the phantom extent"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

/// Draw the scatterer field for a phantom description.
///
/// The scatterer count is Poisson in the phantom area, positions are uniform
/// and amplitudes standard normal, all from one seeded stream. Inclusions are
/// applied after the stream is drawn, so the same seed yields the same
/// background field no matter which inclusions are cut into it.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Vec<Scatterer>> {
    spec.validate()?;
    let [x0, x1] = spec.lateral_extent;
    let [z0, z1] = spec.depth_extent;
    let area_mm2 = (x1 - x0) * 1e3 * ((z1 - z0) * 1e3);
    let expected = spec.density_per_mm2 * area_mm2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let count = if expected > 0.0 {
        Poisson::new(expected)
            .map_err(|e| Error::Validation(format!("bad scatterer count distribution: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };

    let mut raw = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.random_range(x0..x1);
        let z = rng.random_range(z0..z1);
        let amplitude: f64 = StandardNormal.sample(&mut rng);
        raw.push(Scatterer { x, z, amplitude });
    }

    let mut out = Vec::with_capacity(raw.len());
    'next: for mut s in raw {
        for inc in &spec.inclusions {
            if inc.contains(s.x, s.z) {
                match inc.echogenicity_db {
                    None => continue 'next,
                    Some(db) => s.amplitude *= 10f64.powf(db / 20.0),
                }
            }
        }
        out.push(s);
    }
    Ok(out)
}

// --- aberration ---

/// Per-element delay screen.
#[derive(Debug, Clone, PartialEq)]
pub struct AberrationProfile {
    delays: Vec<f64>,
    /// Sample RMS of the delays in seconds.
    pub rms: f64,
    /// Correlation length along the array in meters.
    pub correlation_length: f64,
    pub seed: u64,
}

impl AberrationProfile {
    /// All-zero screen (no aberration).
    pub fn none(num_elements: usize) -> Self {
        AberrationProfile {
            delays: vec![0.0; num_elements],
            rms: 0.0,
            correlation_length: 0.0,
            seed: 0,
        }
    }

    /// Wrap explicit delays; the stored RMS is computed from them.
    pub fn from_delays(delays: Vec<f64>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::Validation("aberration profile needs at least one delay".into()));
        }
        if !delays.iter().all(|d| d.is_finite()) {
            return Err(Error::Validation("aberration delays must be finite".into()));
        }
        let rms = (delays.iter().map(|d| d * d).sum::<f64>() / delays.len() as f64).sqrt();
        Ok(AberrationProfile {
            delays,
            rms,
            correlation_length: 0.0,
            seed: 0,
        })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn delay(&self, element: usize) -> f64 {
        self.delays[element]
    }

    pub fn num_elements(&self) -> usize {
        self.delays.len()
    }
}

/// Correlated Gaussian delay screen with an exact sample RMS.
///
/// White Gaussian noise is smoothed by a Gaussian kernel whose width is the
/// correlation length expressed in elements, the mean is removed, and the
/// result is rescaled so the sample RMS equals `rms_seconds` exactly.
pub fn generate_aberration(
    num_elements: usize,
    rms_seconds: f64,
    correlation_length: f64,
    pitch: f64,
    seed: u64,
) -> Result<AberrationProfile> {
    if num_elements < 2 {
        return Err(Error::Validation(format!(
            "aberration needs at least 2 elements, got {num_elements}"
        )));
    }
    if !(rms_seconds.is_finite() && rms_seconds >= 0.0) {
        return Err(Error::Validation(format!(
            "rms must be finite and non-negative, got {rms_seconds}"
        )));
    }
    if !(correlation_length.is_finite() && correlation_length >= 0.0) {
        return Err(Error::Validation(format!(
            "correlation length must be finite and non-negative, got {correlation_length}"
        )));
    }
    if !(pitch.is_finite() && pitch > 0.0) {
        return Err(Error::Validation(format!("pitch must be finite and positive, got {pitch}")));
    }
    if rms_seconds == 0.0 {
        return Ok(AberrationProfile {
            delays: vec![0.0; num_elements],
            rms: 0.0,
            correlation_length,
            seed,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..num_elements).map(|_| StandardNormal.sample(&mut rng)).collect();

    let sigma = correlation_length / pitch;
    let mut delays = if sigma > 0.0 {
        let radius = (4.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        (0..num_elements as isize)
            .map(|m| {
                let mut acc = 0.0;
                let mut norm = 0.0;
                for (ki, w) in kernel.iter().enumerate() {
                    let j = m + ki as isize - radius;
                    if j >= 0 && (j as usize) < num_elements {
                        acc += w * white[j as usize];
                        norm += w;
                    }
                }
                acc / norm
            })
            .collect()
    } else {
        white
    };

    let mean = delays.iter().sum::<f64>() / num_elements as f64;
    for d in delays.iter_mut() {
        *d -= mean;
    }
    let current = (delays.iter().map(|d| d * d).sum::<f64>() / num_elements as f64).sqrt();
    if current == 0.0 {
        return Err(Error::Validation("degenerate aberration draw: zero variance after smoothing".into()));
    }
    let scale = rms_seconds / current;
    for d in delays.iter_mut() {
        *d *= scale;
    }
    Ok(AberrationProfile {
        delays,
        rms: rms_seconds,
        correlation_length,
        seed,
    })
}

// --- pulse ---

/// Gaussian-modulated cosine pulse centered at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseModel {
    pub center_frequency: f64,
    /// Full width of the amplitude spectrum at half maximum, as a fraction
    /// of the center frequency.
    pub fractional_bandwidth: f64,
    pub amplitude: f64,
}

impl PulseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_frequency.is_finite() && self.center_frequency > 0.0) {
            return Err(Error::Validation(format!(
                "pulse center frequency must be finite and positive, got {}",
                self.center_frequency
            )));
        }
        if !(self.fractional_bandwidth.is_finite()
            && self.fractional_bandwidth > 0.0
            && self.fractional_bandwidth < 2.0)
        {
            return Err(Error::Validation(format!(
                "fractional bandwidth must be in (0, 2), got {}",
                self.fractional_bandwidth
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::Validation(format!(
                "pulse amplitude must be finite and positive, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Standard deviation of the time envelope. A spectral FWHM of
    /// `bw * fc` means sigma_f = bw * fc / (2 sqrt(2 ln 2)), and the
    /// envelope width is its reciprocal over 2 pi.
    pub fn time_sigma(&self) -> f64 {
        (2.0 * std::f64::consts::LN_2).sqrt()
            / (PI * self.fractional_bandwidth * self.center_frequency)
    }

    /// Support half-width used by the simulator: +/- 4 sigma.
    pub fn support_half_width(&self) -> f64 {
        4.0 * self.time_sigma()
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let sigma = self.time_sigma();
        self.amplitude * (-(t * t) / (2.0 * sigma * sigma)).exp() * (2.0 * PI * self.center_frequency * t).cos()
    }
}

// --- receive simulation ---

/// Index of the element laterally nearest to x (ties go to the lower index).
pub fn nearest_element(positions: &[f64], x: f64) -> usize {
    positions
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - x).abs().total_cmp(&(*b - x).abs()))
        .map(|(i, _)| i)
        .expect("geometry has at least one element")
}

/// Simulate the receive frame for one zero-angle plane-wave transmission.
///
/// Each scatterer contributes to element m at
/// `t = z/c + tau_tx + r/c + tau_m`, where `tau_tx` is the aberration delay
/// of the element nearest the scatterer (the transmit path crosses the screen
/// once) and `r` is the scatterer-to-element distance; amplitude falls as
/// 1/sqrt(r), clamped at one wavelength. Channels are independent, so they
/// fill in parallel with one deterministic row per element.
pub fn simulate_rx(
    scatterers: &[Scatterer],
    geometry: &TransducerGeometry,
    pulse: &PulseModel,
    aberration: &AberrationProfile,
    duration: f64,
) -> Result<ChannelFrame> {
    geometry.validate()?;
    pulse.validate()?;
    if aberration.num_elements() != geometry.num_elements {
        return Err(Error::Validation(format!(
            "aberration profile has {} delays for {} elements",
            aberration.num_elements(),
            geometry.num_elements
        )));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Validation(format!(
            "duration must be finite and positive, got {duration}"
        )));
    }
    for (i, s) in scatterers.iter().enumerate() {
        if !(s.x.is_finite() && s.z.is_finite() && s.amplitude.is_finite() && s.z >= 0.0) {
            return Err(Error::Validation(format!("scatterer {i} has invalid fields")));
        }
    }

    let fs = geometry.sampling_frequency;
    let c = geometry.sound_speed;
    let num_samples = ((duration * fs).ceil() as usize).max(2);
    let positions = geometry.element_positions();
    let r_min = geometry.wavelength();
    let half_width = pulse.support_half_width();

    let tx_delays: Vec<f64> = scatterers
        .iter()
        .map(|s| aberration.delay(nearest_element(&positions, s.x)))
        .collect();

    let rows: Vec<Vec<f64>> = (0..geometry.num_elements)
        .into_par_iter()
        .map(|m| {
            let ex = positions[m];
            let rx_delay = aberration.delay(m);
            let mut row = vec![0.0; num_samples];
            for (s, &tx_delay) in scatterers.iter().zip(tx_delays.iter()) {
                let dx = s.x - ex;
                let r = (dx * dx + s.z * s.z).sqrt();
                let arrival = s.z / c + tx_delay + r / c + rx_delay;
                let gain = s.amplitude / r.max(r_min).sqrt();
                let lo = ((arrival - half_width) * fs).ceil().max(0.0) as usize;
                let hi = ((arrival + half_width) * fs).floor();
                if hi < 0.0 || lo >= num_samples {
                    continue;
                }
                let hi = (hi as usize).min(num_samples - 1);
                for (k, v) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    *v += gain * pulse.evaluate(k as f64 / fs - arrival);
                }
            }
            row
        })
        .collect();

    let mut samples = Array2::zeros((geometry.num_elements, num_samples));
    for (m, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            samples[[m, k]] = v;
        }
    }
    ChannelFrame::new(geometry.clone(), samples, 0.0)
}
