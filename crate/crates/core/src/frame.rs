//! Multichannel RF data container.
//!
//! A frame holds one receive event: `num_elements` rows of time samples with
//! a shared time origin. Construction validates shape and finiteness so that
//! downstream stages never see NaN or infinity; every operation that builds a
//! new frame goes back through [`ChannelFrame::new`].

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::TransducerGeometry;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrame {
    geometry: TransducerGeometry,
    /// Row n is the RF trace of element n; shape [num_elements, num_samples].
    samples: Array2<f64>,
    /// Time of the first sample in seconds.
    start_time: f64,
}

impl ChannelFrame {
    pub fn new(geometry: TransducerGeometry, samples: Array2<f64>, start_time: f64) -> Result<Self> {
        geometry.validate()?;
        if samples.nrows() != geometry.num_elements {
            return Err(Error::Validation(format!(
                "frame has {} rows but the geometry names {} elements",
                samples.nrows(),
                geometry.num_elements
            )));
        }
        if samples.ncols() == 0 {
            return Err(Error::Validation("frame has zero time samples".into()));
        }
        if !start_time.is_finite() {
            return Err(Error::Validation(format!("start_time must be finite, got {start_time}")));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation("frame contains non-finite samples".into()));
        }
        Ok(ChannelFrame {
            geometry,
            samples,
            start_time,
        })
    }

    pub fn geometry(&self) -> &TransducerGeometry {
        &self.geometry
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn num_elements(&self) -> usize {
        self.samples.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.samples.ncols()
    }

    /// Time of sample index k.
    pub fn sample_time(&self, k: usize) -> f64 {
        self.start_time + k as f64 / self.geometry.sampling_frequency
    }

    /// Root-mean-square over all channels and samples.
    pub fn rms(&self) -> f64 {
        let n = self.samples.len() as f64;
        (self.samples.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
    }

    pub fn into_parts(self) -> (TransducerGeometry, Array2<f64>, f64) {
        (self.geometry, self.samples, self.start_time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize) -> TransducerGeometry {
        TransducerGeometry::new(n, 0.3e-3, 5.208e6, 20.832e6, 1540.0).unwrap()
    }

    #[test]
    fn accepts_matching_shape() {
        let f = ChannelFrame::new(geom(4), Array2::zeros((4, 16)), 0.0).unwrap();
        assert_eq!(f.num_elements(), 4);
        assert_eq!(f.num_samples(), 16);
        assert_eq!(f.rms(), 0.0);
    }

    #[test]
    fn rejects_row_mismatch() {
        assert!(ChannelFrame::new(geom(4), Array2::zeros((3, 16)), 0.0).is_err());
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(ChannelFrame::new(geom(4), Array2::zeros((4, 0)), 0.0).is_err());
        let mut s = Array2::zeros((4, 8));
        s[[2, 5]] = f64::NAN;
        assert!(ChannelFrame::new(geom(4), s, 0.0).is_err());
        let mut s = Array2::zeros((4, 8));
        s[[0, 0]] = f64::INFINITY;
        assert!(ChannelFrame::new(geom(4), s, 0.0).is_err());
        assert!(ChannelFrame::new(geom(4), Array2::zeros((4, 8)), f64::NAN).is_err());
    }

    #[test]
    fn sample_time_uses_sampling_frequency() {
        let f = ChannelFrame::new(geom(2), Array2::zeros((2, 8)), 1.0e-6).unwrap();
        let dt = 1.0 / 20.832e6;
        assert!((f.sample_time(3) - (1.0e-6 + 3.0 * dt)).abs() < 1e-18);
    }

    #[test]
    fn rms_of_known_frame() {
        let mut s = Array2::zeros((2, 2));
        s[[0, 0]] = 1.0;
        s[[0, 1]] = -1.0;
        s[[1, 0]] = 1.0;
        s[[1, 1]] = -1.0;
        let f = ChannelFrame::new(geom(2), s, 0.0).unwrap();
        assert!((f.rms() - 1.0).abs() < 1e-15);
    }
}
