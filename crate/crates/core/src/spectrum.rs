//! Temporal-frequency transform of an axial kernel of RF data.
//!
//! Real input makes the spectrum conjugate-symmetric, so only the
//! non-negative half (bins 0..=K/2) is stored. The inverse transform
//! reconstructs the mirrored bins and zeroes any stray imaginary part on the
//! DC and Nyquist bins before returning real samples.

use std::cell::RefCell;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In-place inverse FFT, unnormalized: caller divides by the length.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

/// Half-spectrum of one axial kernel across all channels.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    /// Shape [num_channels, num_bins] with num_bins = kernel_length / 2 + 1.
    bins: Array2<Complex64>,
    /// Frequency of each stored bin in Hz: k * fs / kernel_length.
    bin_frequencies: Vec<f64>,
    /// First time-sample index of the kernel inside its parent frame.
    kernel_start_sample: usize,
    /// Kernel length in time samples.
    kernel_length: usize,
}

impl SpectralKernel {
    pub fn bins(&self) -> &Array2<Complex64> {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.bins
    }

    pub fn bin_frequencies(&self) -> &[f64] {
        &self.bin_frequencies
    }

    pub fn kernel_start_sample(&self) -> usize {
        self.kernel_start_sample
    }

    pub fn kernel_length(&self) -> usize {
        self.kernel_length
    }

    pub fn num_channels(&self) -> usize {
        self.bins.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.bins.ncols()
    }

    /// Index of the Nyquist bin when the kernel length is even.
    pub fn nyquist_bin(&self) -> Option<usize> {
        (self.kernel_length % 2 == 0).then_some(self.kernel_length / 2)
    }
}

/// Transform each channel row of a real kernel block into its half-spectrum.
pub fn forward_spectrum(
    samples: ArrayView2<'_, f64>,
    kernel_start_sample: usize,
    sampling_frequency: f64,
) -> Result<SpectralKernel> {
    let k = samples.ncols();
    if samples.nrows() == 0 {
        return Err(Error::Validation("spectrum input has zero channels".into()));
    }
    if k < 2 {
        return Err(Error::Validation(format!(
            "kernel must span at least 2 samples, got {k}"
        )));
    }
    if !(sampling_frequency.is_finite() && sampling_frequency > 0.0) {
        return Err(Error::Validation(format!(
            "sampling frequency must be finite and positive, got {sampling_frequency}"
        )));
    }
    if !samples.iter().all(|v| v.is_finite()) {
        return Err(Error::Validation("spectrum input contains non-finite samples".into()));
    }

    let num_bins = k / 2 + 1;
    let mut bins = Array2::from_elem((samples.nrows(), num_bins), Complex64::ZERO);
    let mut buf = vec![Complex64::ZERO; k];
    for (row, mut out) in samples.rows().into_iter().zip(bins.rows_mut()) {
        for (b, &v) in buf.iter_mut().zip(row.iter()) {
            *b = Complex64::new(v, 0.0);
        }
        fft_forward(&mut buf);
        for (o, &b) in out.iter_mut().zip(buf.iter().take(num_bins)) {
            *o = b;
        }
    }

    let bin_frequencies = (0..num_bins)
        .map(|i| i as f64 * sampling_frequency / k as f64)
        .collect();
    Ok(SpectralKernel {
        bins,
        bin_frequencies,
        kernel_start_sample,
        kernel_length: k,
    })
}

/// Rebuild real time samples from a half-spectrum.
///
/// Conjugate symmetry is enforced, not assumed: mirrored bins come from the
/// stored half, and imaginary parts on DC and Nyquist are dropped.
pub fn inverse_spectrum(spectrum: &SpectralKernel) -> Result<Array2<f64>> {
    let k = spectrum.kernel_length;
    let num_bins = spectrum.num_bins();
    if num_bins != k / 2 + 1 {
        return Err(Error::Validation(format!(
            "half-spectrum of a length-{k} kernel needs {} bins, got {num_bins}",
            k / 2 + 1
        )));
    }
    if !spectrum.bins.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::Validation("spectrum contains non-finite bins".into()));
    }

    let nyquist = spectrum.nyquist_bin();
    let mut out = Array2::zeros((spectrum.num_channels(), k));
    let mut buf = vec![Complex64::ZERO; k];
    for (row, mut time_row) in spectrum.bins.rows().into_iter().zip(out.rows_mut()) {
        for (i, b) in buf.iter_mut().enumerate().take(num_bins) {
            *b = row[i];
        }
        buf[0] = Complex64::new(row[0].re, 0.0);
        if let Some(nq) = nyquist {
            buf[nq] = Complex64::new(row[nq].re, 0.0);
        }
        for i in num_bins..k {
            buf[i] = buf[k - i].conj();
        }
        fft_inverse(&mut buf);
        let scale = 1.0 / k as f64;
        for (t, b) in time_row.iter_mut().zip(buf.iter()) {
            *t = b.re * scale;
        }
    }
    Ok(out)
}
