//! Readout-error calibration/inversion and zero-noise extrapolation.

mod readout;
mod zne;

pub use readout::{calibrate, CalibrationMode, ConfusionMatrix, NegativeHandling};
pub use zne::{
    fit, fit_exponential, fit_exponential_with, fit_polynomial, run_zne, ExtrapolationFit, FitKind, ZnePoint, ZneSeries,
};
