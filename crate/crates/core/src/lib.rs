#![no_std]
//! Dynamic network models, immersion by node elimination, Box-Jenkins
//! prediction-error identification and asymptotic variance analysis of
//! local module estimates.

extern crate alloc;

pub mod error;
pub mod fft;
pub mod grid;
pub mod identify;
pub mod immersion;
pub mod linalg;
pub mod network;
pub mod poly;
pub mod transfer;
pub mod variance;

pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use identify::{
    fit_pem, gradient, module_response_covariance, param_covariance, predict, BJStructure, FitOptions, FitResult,
    InputOrders, MisoData, ParamVector,
};
pub use immersion::{
    check_consistency_conditions, enumerate_valid_predictor_sets, immerse, immersed_noise_spectrum, ImmersedNetwork,
    PredictorSet,
};
pub use network::{
    analytic_cross_spectrum, closed_loop_response, simulate, Excitation, NetworkModel, SignalRecord, SignalTag,
    SimulationOptions, SourceSpectra,
};
pub use poly::Polynomial;
pub use transfer::{InitialState, NoiseShape, RationalTransfer, Stability, StabilityVerdict};
pub use variance::{
    asymptotic_cov_full, asymptotic_cov_immersed, build_spectral_block, d_optimality_compare, e_optimality_compare,
    sample_covariance, theorem1_condition, welch_cross_spectrum, CovarianceCurve, CurveLabel, SpectralBlock,
    SpectralSource,
};
