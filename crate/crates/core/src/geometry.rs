//! Linear-array transducer description.
//!
//! All quantities are SI: meters, seconds, hertz. Element positions are
//! lateral coordinates on the array axis, centered on the array midpoint, so
//! a symmetric aperture brackets x = 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransducerGeometry {
    /// Number of elements in the receive aperture.
    pub num_elements: usize,
    /// Center-to-center element spacing in meters (element width plus kerf).
    pub pitch: f64,
    /// Pulse center frequency in Hz.
    pub center_frequency: f64,
    /// RF sampling frequency in Hz.
    pub sampling_frequency: f64,
    /// Speed of sound in the medium, m/s.
    pub sound_speed: f64,
}

impl TransducerGeometry {
    pub fn new(
        num_elements: usize,
        pitch: f64,
        center_frequency: f64,
        sampling_frequency: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        let g = TransducerGeometry {
            num_elements,
            pitch,
            center_frequency,
            sampling_frequency,
            sound_speed,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements < 2 {
            return Err(Error::Validation(format!(
                "num_elements must be at least 2, got {}",
                self.num_elements
            )));
        }
        for (name, v) in [
            ("pitch", self.pitch),
            ("center_frequency", self.center_frequency),
            ("sampling_frequency", self.sampling_frequency),
            ("sound_speed", self.sound_speed),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.center_frequency >= self.sampling_frequency / 2.0 {
            return Err(Error::Validation(format!(
                "center frequency {} Hz is not below the Nyquist limit {} Hz",
                self.center_frequency,
                self.sampling_frequency / 2.0
            )));
        }
        Ok(())
    }

    /// Full aperture extent in meters: element count times pitch.
    pub fn aperture_length(&self) -> f64 {
        self.num_elements as f64 * self.pitch
    }

    /// Acoustic wavelength at the center frequency.
    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.center_frequency
    }

    /// Lateral position of one element, centered so the array midpoint is 0.
    pub fn element_position(&self, index: usize) -> f64 {
        (index as f64 - (self.num_elements as f64 - 1.0) / 2.0) * self.pitch
    }

    /// All element positions in ascending order.
    pub fn element_positions(&self) -> Vec<f64> {
        (0..self.num_elements)
            .map(|i| self.element_position(i))
            .collect()
    }
}
