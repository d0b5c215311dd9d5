//! Prediction filtering of channel data in the temporal-frequency domain.
//!
//! For one frequency bin, the complex samples across the array are modeled as
//! an autoregressive process of order p along the channel axis: each channel
//! is a linear combination of its p neighbors. The coefficients minimize
//! `||M a - d||^2 + mu ||a||^2` over the full convolution span, transient
//! rows included, and the prediction `M a` replaces the data. Coherent
//! wavefronts survive this projection; channel-incoherent noise and
//! aberration-induced decorrelation do not.
//!
//! Filtering runs in both channel directions and the two estimates are
//! averaged, so neither array edge is systematically favored. The filter
//! order can grow with depth: shallow kernels see a short coherent aperture
//! and want a short filter, deep kernels the opposite.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::ChannelFrame;
use crate::geometry::TransducerGeometry;
use crate::spectrum::{forward_spectrum, inverse_spectrum};

// --- filter estimation for a single frequency bin ---

/// AR(p) prediction filter for one temporal-frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFilter {
    /// One complex coefficient per lag, lag 1 first.
    pub coefficients: Vec<Complex64>,
    /// Bin index this filter was estimated for (bookkeeping only).
    pub frequency_bin: usize,
}

impl PredictionFilter {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }
}

/// Least-squares system `M a = d` relating a channel spectrum to its
/// one-step-ahead shifts.
///
/// With n channels `s[0..n]` and order p, `M` has n + p - 1 rows and p
/// columns with `M[i][j] = s[i - j]` where defined and 0 elsewhere, and
/// `d[i] = s[i + 1]` for i + 1 < n, then zeros. The zero padding keeps the
/// full convolution span in the fit, which biases the solution toward
/// smaller coefficients at the array edges.
#[derive(Debug, Clone)]
pub struct ConvolutionSystem {
    matrix: Array2<Complex64>,
    rhs: Vec<Complex64>,
    channels: Vec<Complex64>,
}

impl ConvolutionSystem {
    pub fn matrix(&self) -> ArrayView2<'_, Complex64> {
        self.matrix.view()
    }

    pub fn rhs(&self) -> &[Complex64] {
        &self.rhs
    }

    pub fn order(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[Complex64] {
        &self.channels
    }
}

pub fn build_system(channels: &[Complex64], order: usize) -> Result<ConvolutionSystem> {
    let n = channels.len();
    if order == 0 {
        return Err(Error::Validation("prediction order must be at least 1".into()));
    }
    if n < order + 1 {
        return Err(Error::Validation(format!(
            "order {order} needs at least {} channels, got {n}",
            order + 1
        )));
    }
    if !channels.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::Validation("channel spectrum contains non-finite values".into()));
    }

    let rows = n + order - 1;
    let mut matrix = Array2::from_elem((rows, order), Complex64::ZERO);
    for i in 0..rows {
        for j in 0..order {
            if i >= j && i - j < n {
                matrix[[i, j]] = channels[i - j];
            }
        }
    }
    let mut rhs = vec![Complex64::ZERO; rows];
    for (i, r) in rhs.iter_mut().enumerate() {
        if i + 1 < n {
            *r = channels[i + 1];
        }
    }
    Ok(ConvolutionSystem {
        matrix,
        rhs,
        channels: channels.to_vec(),
    })
}

/// Solve the regularized normal equations `(M^H M + mu I) a = M^H d`.
pub fn estimate_filter(system: &ConvolutionSystem, mu: f64) -> Result<PredictionFilter> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::Validation(format!(
            "regularization must be finite and non-negative, got {mu}"
        )));
    }
    let p = system.order();
    let m = &system.matrix;
    let rows = m.nrows();

    let mut normal = Array2::from_elem((p, p), Complex64::ZERO);
    let mut rhs = vec![Complex64::ZERO; p];
    for r in 0..rows {
        for i in 0..p {
            let mi = m[[r, i]].conj();
            rhs[i] += mi * system.rhs[r];
            for j in 0..p {
                normal[[i, j]] += mi * m[[r, j]];
            }
        }
    }
    for i in 0..p {
        normal[[i, i]] += mu;
    }

    solve_in_place(&mut normal, &mut rhs)?;
    Ok(PredictionFilter {
        coefficients: rhs,
        frequency_bin: 0,
    })
}

/// Partial-pivot Gaussian elimination on a small complex system.
fn solve_in_place(a: &mut Array2<Complex64>, b: &mut [Complex64]) -> Result<()> {
    let n = b.len();
    let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Singular("normal matrix is identically zero".into()));
    }
    let tol = scale * n as f64 * f64::EPSILON;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[[r1, col]].norm().total_cmp(&a[[r2, col]].norm()))
            .unwrap();
        if a[[pivot_row, col]].norm() <= tol {
            return Err(Error::Singular(format!(
                "pivot below tolerance at column {col}"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = a[[col, j]];
                a[[col, j]] = a[[pivot_row, j]];
                a[[pivot_row, j]] = tmp;
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[[col, col]];
        for r in col + 1..n {
            let f = a[[r, col]] / pivot;
            a[[r, col]] = Complex64::ZERO;
            for j in col + 1..n {
                let sub = f * a[[col, j]];
                a[[r, j]] -= sub;
            }
            let sub = f * b[col];
            b[r] -= sub;
        }
    }
    for r in (0..n).rev() {
        let mut acc = b[r];
        for j in r + 1..n {
            acc -= a[[r, j]] * b[j];
        }
        b[r] = acc / a[[r, r]];
    }
    Ok(())
}

/// Replace each channel with its prediction `M a`, keeping channel 0 as is
/// (it has no predecessor in the forward direction).
pub fn apply_filter(system: &ConvolutionSystem, filter: &PredictionFilter) -> Result<Vec<Complex64>> {
    let p = system.order();
    if filter.order() != p {
        return Err(Error::Validation(format!(
            "filter order {} does not match system order {p}",
            filter.order()
        )));
    }
    let n = system.num_channels();
    let mut out = vec![Complex64::ZERO; n];
    out[0] = system.channels[0];
    // Row i of M predicts d[i] = s[i + 1]; only rows 0..n-2 target real data.
    for i in 0..n - 1 {
        let mut acc = Complex64::ZERO;
        for j in 0..p {
            acc += system.matrix[[i, j]] * filter.coefficients[j];
        }
        out[i + 1] = acc;
    }
    Ok(out)
}

/// One-direction prediction filtering of a single frequency bin.
pub fn filter_bin(channels: &[Complex64], order: usize, mu: f64) -> Result<Vec<Complex64>> {
    let system = build_system(channels, order)?;
    let filter = estimate_filter(&system, mu)?;
    apply_filter(&system, &filter)
}

/// Forward and reversed-channel filtering averaged, so interior channels get
/// two independent estimates and each edge channel gets the one direction
/// that actually predicts it.
fn filter_bin_bidirectional(channels: &[Complex64], order: usize, mu: f64) -> Result<Vec<Complex64>> {
    let n = channels.len();
    let forward = filter_bin(channels, order, mu)?;
    let reversed: Vec<Complex64> = channels.iter().rev().copied().collect();
    let backward = filter_bin(&reversed, order, mu)?;
    let mut out = vec![Complex64::ZERO; n];
    out[0] = backward[n - 1];
    out[n - 1] = forward[n - 1];
    for i in 1..n - 1 {
        out[i] = 0.5 * (forward[i] + backward[n - 1 - i]);
    }
    Ok(out)
}

// --- depth-adaptive order ---

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderMode {
    /// One order everywhere.
    Fixed(usize),
    /// Order grows with depth up to `max_order`.
    Adaptive,
}

/// Rule mapping kernel depth to prediction order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOrderPolicy {
    pub max_order: usize,
    /// Exponent of the normalized depth in the growth law.
    pub depth_exponent: f64,
    /// Receive f-number; together with the aperture it sets the depth at
    /// which the order saturates.
    pub f_number: f64,
    /// Full aperture extent in meters.
    pub aperture_length: f64,
    pub mode: OrderMode,
}

impl AdaptiveOrderPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::Validation("max_order must be at least 1".into()));
        }
        for (name, v) in [
            ("depth_exponent", self.depth_exponent),
            ("f_number", self.f_number),
            ("aperture_length", self.aperture_length),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if let OrderMode::Fixed(order) = self.mode {
            if order == 0 {
                return Err(Error::Validation("fixed order must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Depth beyond which the adaptive order stays at `max_order`.
    pub fn saturation_depth(&self) -> f64 {
        self.f_number * self.aperture_length
    }

    /// Largest order this policy can emit.
    pub fn max_effective_order(&self) -> usize {
        match self.mode {
            OrderMode::Fixed(order) => order,
            OrderMode::Adaptive => self.max_order,
        }
    }
}

/// Absorbs float noise in `powf` so exact integer stops of the growth law do
/// not round up to the next order.
const CEIL_SLACK: f64 = 1e-9;

/// Prediction order for a kernel centered at `depth` meters.
pub fn adaptive_order(depth: f64, policy: &AdaptiveOrderPolicy) -> Result<usize> {
    policy.validate()?;
    if !(depth.is_finite() && depth > 0.0) {
        return Err(Error::Validation(format!(
            "depth must be finite and positive, got {depth}"
        )));
    }
    match policy.mode {
        OrderMode::Fixed(order) => Ok(order),
        OrderMode::Adaptive => {
            let normalized = depth / policy.saturation_depth();
            let raw = policy.max_order as f64 * normalized.powf(policy.depth_exponent);
            let order = (raw - CEIL_SLACK).ceil().max(1.0) as usize;
            Ok(order.min(policy.max_order))
        }
    }
}

// --- whole-frame filtering ---

/// Settings for filtering one aligned frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FxpfConfig {
    /// Diagonal load mu on the normal equations.
    pub regularization: f64,
    /// Axial kernel length in samples.
    pub kernel_length: usize,
    /// Number of filter-and-replace passes over the frame.
    pub iterations: usize,
    pub policy: AdaptiveOrderPolicy,
}

impl FxpfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.regularization.is_finite() && self.regularization >= 0.0) {
            return Err(Error::Validation(format!(
                "regularization must be finite and non-negative, got {}",
                self.regularization
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Validation("iterations must be at least 1".into()));
        }
        self.policy.validate()?;
        let floor = 2 * self.policy.max_effective_order();
        if self.kernel_length < floor.max(2) {
            return Err(Error::Validation(format!(
                "kernel length {} is shorter than {} samples required by order {}",
                self.kernel_length,
                floor.max(2),
                self.policy.max_effective_order()
            )));
        }
        Ok(())
    }
}

/// Axial samples per pulse-echo wavelength; the default kernel length.
pub fn two_way_wavelength_samples(geometry: &TransducerGeometry) -> usize {
    (2.0 * geometry.sampling_frequency / geometry.center_frequency).round() as usize
}

/// Filter an aligned frame kernel by kernel.
///
/// The frame is split into non-overlapping axial kernels. Each kernel is
/// transformed to temporal frequency, every bin except DC and Nyquist is
/// prediction-filtered across the channels that are active at the kernel
/// center (weight > 0), and the kernel is transformed back in place. A kernel
/// passes through untouched when too few channels are active for its order
/// or when a truncated final kernel is shorter than 2 (p + 1) samples.
///
/// `active_weights` has the frame's shape; only the sign of each weight is
/// used here, the taper itself is applied at summation time.
pub fn fxpf_filter_frame(
    frame: &ChannelFrame,
    active_weights: ArrayView2<'_, f64>,
    config: &FxpfConfig,
) -> Result<ChannelFrame> {
    config.validate()?;
    let n = frame.num_elements();
    let t = frame.num_samples();
    if active_weights.dim() != (n, t) {
        return Err(Error::Validation(format!(
            "weights shape {:?} does not match frame shape ({n}, {t})",
            active_weights.dim()
        )));
    }
    if !active_weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
        return Err(Error::Validation("weights must be finite and non-negative".into()));
    }

    let geometry = frame.geometry().clone();
    let mut samples = frame.samples().clone();
    for _ in 0..config.iterations {
        let mut start = 0;
        while start < t {
            let len = config.kernel_length.min(t - start);
            filter_kernel(&mut samples, &active_weights, start, len, frame.start_time(), &geometry, config)?;
            start += len;
        }
    }
    ChannelFrame::new(geometry, samples, frame.start_time())
}

fn filter_kernel(
    samples: &mut Array2<f64>,
    weights: &ArrayView2<'_, f64>,
    start: usize,
    len: usize,
    start_time: f64,
    geometry: &TransducerGeometry,
    config: &FxpfConfig,
) -> Result<()> {
    // Kernel midpoint in two-way travel time gives the depth it images.
    let fs = geometry.sampling_frequency;
    let center_time = start_time + (start as f64 + (len as f64 - 1.0) / 2.0) / fs;
    let depth = geometry.sound_speed * center_time / 2.0;
    let order = match config.policy.mode {
        OrderMode::Fixed(order) => order,
        OrderMode::Adaptive => {
            if depth <= 0.0 {
                return Ok(());
            }
            adaptive_order(depth, &config.policy)?
        }
    };
    let truncated = len < config.kernel_length;
    if len < 2 || (truncated && len < 2 * (order + 1)) {
        return Ok(());
    }

    let center_col = start + len / 2;
    let active: Vec<usize> = (0..samples.nrows())
        .filter(|&ch| weights[[ch, center_col]] > 0.0)
        .collect();
    if active.len() <= order + 1 {
        return Ok(());
    }

    let mut block = Array2::zeros((active.len(), len));
    for (bi, &ch) in active.iter().enumerate() {
        block.row_mut(bi).assign(&samples.slice(s![ch, start..start + len]));
    }

    let mut spectrum = forward_spectrum(block.view(), start, fs)?;
    let nyquist = spectrum.nyquist_bin();
    let mut column = vec![Complex64::ZERO; active.len()];
    for bin in 1..spectrum.num_bins() {
        if Some(bin) == nyquist {
            continue;
        }
        for (ch, v) in column.iter_mut().enumerate() {
            *v = spectrum.bins()[[ch, bin]];
        }
        let filtered = filter_bin_bidirectional(&column, order, config.regularization)?;
        for (ch, v) in filtered.into_iter().enumerate() {
            spectrum.bins_mut()[[ch, bin]] = v;
        }
    }

    let rebuilt = inverse_spectrum(&spectrum)?;
    for (bi, &ch) in active.iter().enumerate() {
        samples
            .slice_mut(s![ch, start..start + len])
            .assign(&rebuilt.row(bi));
    }
    Ok(())
}
