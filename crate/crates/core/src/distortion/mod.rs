//! Probability and measure distortions, their duals and integrability
//! constants, and the δ-indexed scaling families used on lattices.

mod measure;
mod probability;
mod scaling;

pub use measure::{
    kd_measure, Capped, DriftShift, Excess, Growth, JumpRateDistortion, MassDistortion,
    MeasureDistortion, MeasureFamily, PowerLaw, Side,
};
pub use probability::{check_shape, kd_probability, Distortion, ProbabilityDistortion};
pub use scaling::{
    estimate_gamma, estimate_xi, extrapolate_limit, GammaSide, GeneralExample, Scaled,
    ScalingFamily,
};

/// Tolerance for probabilities that stray outside `[0, 1]` through rounding.
pub const DOMAIN_TOL: f64 = 1e-12;

pub(crate) fn clamp_probability(p: f64) -> crate::Result<f64> {
    if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&p) || p.is_nan() {
        return Err(crate::Error::Domain(p));
    }
    Ok(p.clamp(0.0, 1.0))
}
