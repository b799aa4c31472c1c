//! End-to-end channel estimation: fits the `RT`, `AC` and `CC` blocks of `S^K` and the
//! two load reflections from `(b, h)` pairs, without any knowledge of the environment
//! or the static load circuit.
//!
//! The fit minimizes the normalized error on differences between successive channels,
//! in which the constant `k_rt` cancels; `k_rt` is recovered afterwards by least
//! squares. Fitted parameters are generally not the physical ones: many parameter sets
//! give identical predictions.

mod dataset;
mod fit;
mod params;

pub use dataset::{generate_dataset, Dataset};
pub use fit::{fit, FitConfig, FitReport, GradientMode, Optimizer, RestartSummary, StopReason};
pub use params::{param_count, ModelParams};

use crate::circuits::BinaryConfig;
use crate::error::Result;
use crate::linalg::CMatrix;

/// Channel predicted by `p` for configuration `b`.
pub fn predict(p: &ModelParams, b: &BinaryConfig) -> Result<CMatrix> {
    p.predict(b)
}

/// Normalized difference loss
/// `Σ_m ‖ΔH_m − Δh_m‖² / Σ_m ‖Δh_m‖²` over consecutive pairs.
pub fn loss(p: &ModelParams, d: &Dataset) -> Result<f64> {
    fit::Problem::new(d)?.loss(p)
}

/// Gradient of [`loss`] with respect to the real parameter vector ([`ModelParams::to_vec`]).
pub fn gradient(p: &ModelParams, d: &Dataset, mode: GradientMode) -> Result<Vec<f64>> {
    let mut prob = fit::Problem::new(d)?;
    let mut g = vec![0.0; p.dof()];
    match mode {
        GradientMode::Analytic => prob.loss_grad(p, &mut g)?,
        GradientMode::FiniteDifference => prob.loss_grad_fd(p, &mut g)?,
    };
    Ok(g)
}

/// Prediction NMSE in dB over a dataset: `10 log10(Σ‖H(b) − h‖² / Σ‖h‖²)`.
pub fn nmse_db(p: &ModelParams, d: &Dataset) -> Result<f64> {
    let (mut err, mut sig) = (0.0, 0.0);
    for (b, h) in d.samples() {
        err += (p.predict(b)? - h).norm_squared();
        sig += h.norm_squared();
    }
    Ok(10.0 * (err / sig).log10())
}
