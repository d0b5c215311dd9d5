//! Plane-wave ultrasound beamforming with frequency-space prediction
//! filtering (FXPF) for phase-aberration suppression.
//!
//! The pipeline: simulate raw element data from a scatterer phantom behind a
//! near-field delay screen ([`sim`]), delay-align the channels per beamline,
//! optionally regress each temporal-frequency bin across the aperture with a
//! depth-adaptive autoregressive filter ([`fxpf`]), then apodize, sum,
//! envelope-detect ([`beamform`]) and score lesion visibility ([`metrics`]).
//! [`io`] holds the binary frame/envelope formats and the PGM writer.
//!
//! Everything is deterministic: seeded generators, ordered reductions, and
//! parallelism only across independent units collected in index order, so a
//! given configuration reproduces bit-identical outputs across runs and
//! thread counts.

pub mod beamform;
pub mod error;
pub mod frame;
pub mod fxpf;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod sim;
pub mod spectrum;

pub use beamform::{
    align_channels, apodization, apodization_matrix, beamform_image, das_sum, envelope,
    log_compress, receive_delay, ApodizationProfile, BeamGrid, BeamformOptions, BeamformOutput,
    DisplayImage, EnvelopeImage, WindowKind,
};
pub use error::{Error, Result};
pub use frame::ChannelFrame;
pub use fxpf::{
    adaptive_order, apply_filter, build_system, estimate_filter, filter_bin, fxpf_filter_frame,
    two_way_wavelength_samples, AdaptiveOrderPolicy, ConvolutionSystem, FxpfConfig, OrderMode,
    PredictionFilter,
};
pub use geometry::TransducerGeometry;
pub use io::{
    decode_channel_frame, decode_envelope_image, encode_channel_frame, encode_envelope_image,
    encode_pgm, read_channel_frame, read_envelope_image, write_channel_frame,
    write_envelope_image, write_pgm,
};
pub use metrics::{
    contrast, evaluate_regions, gcnr, region_mask, GcnrEstimate, MetricsReport, NamedRegion,
    RegionReport, RegionSpec, DEFAULT_HISTOGRAM_BINS,
};
pub use sim::{
    generate_aberration, generate_phantom, nearest_element, simulate_rx, AberrationProfile,
    Inclusion, PhantomSpec, PulseModel, Scatterer,
};
pub use spectrum::{forward_spectrum, inverse_spectrum, SpectralKernel};
