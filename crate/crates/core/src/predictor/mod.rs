//! Two-term n-step predictor of received power.
//!
//! `r̂(t+τ) = mean + ρ_r (r(t) - mean) + ρ_r' r'(t)`
//!
//! Coefficients come from one of three fitting paths:
//!
//! * [`fit_normal_equations`]: closed-form solution of the 2x2 normal
//!   equations. Kept as the reference the other paths are checked against.
//! * [`fit_orthonormal`]: Gram-Schmidt transform of `(r, r')` into unit-power,
//!   mutually uncorrelated `(p1, p2)`, then one projection per basis vector.
//!   No linear system is solved. This is the default path.
//! * [`fit_simplified`]: the small-lag limit `ρ_r = 1`, `ρ_r' = τ`, which needs
//!   no statistics at all.

mod refit;

pub use refit::{ModelSnapshot, RefitConfig, Refitter};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::MomentSet;

/// Relative tolerance on the moment-matrix determinant (and on the
/// Gram-Schmidt radicand) below which a fit is refused.
pub const DETERMINANT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NormalEq,
    Orthonormal,
    Simplified,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::NormalEq => "normal_eq",
            Method::Orthonormal => "orthonormal",
            Method::Simplified => "simplified",
        }
    }

    /// True when the coefficients are estimated from moments and therefore
    /// bound to the lag they were fitted at.
    pub fn is_statistical(self) -> bool {
        !matches!(self, Method::Simplified)
    }

    pub fn fit(self, m: &MomentSet) -> Result<PredictorModel> {
        match self {
            Method::NormalEq => fit_normal_equations(m),
            Method::Orthonormal => fit_orthonormal(m),
            Method::Simplified => Ok(fit_simplified_with_moments(m)),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal_eq" | "normal-eq" | "normal" => Ok(Method::NormalEq),
            "orthonormal" | "gram_schmidt" | "gram-schmidt" => Ok(Method::Orthonormal),
            "simplified" | "linear" => Ok(Method::Simplified),
            other => Err(Error::param(format!("unknown method `{other}`"))),
        }
    }
}

/// Gram-Schmidt coefficients.
///
/// `p1 = rho11 r`, `p2 = rho21 r + rho22 r'` with `E[p1²] = E[p2²] = 1` and
/// `E[p1 p2] = 0`; `pi1`, `pi2` are the projections of `r(t+τ)` on `p1`, `p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    pub rho11: f64,
    pub rho21: f64,
    pub rho22: f64,
    pub pi1: f64,
    pub pi2: f64,
}

impl OrthonormalBasis {
    /// `(E[p1²], E[p2²], E[p1 p2])` under the moments `m`.
    pub fn gram(&self, m: &MomentSet) -> (f64, f64, f64) {
        let p1p1 = self.rho11 * self.rho11 * m.rr0;
        let p2p2 = self.rho21 * self.rho21 * m.rr0
            + 2.0 * self.rho21 * self.rho22 * m.rpr0
            + self.rho22 * self.rho22 * m.rprp0;
        let p1p2 = self.rho11 * (self.rho21 * m.rr0 + self.rho22 * m.rpr0);
        (p1p1, p2p2, p1p2)
    }

    /// Maps the p-basis predictor back onto `(ρ_r, ρ_r')`.
    pub fn coefficients(&self) -> (f64, f64) {
        (
            self.pi1 * self.rho11 + self.pi2 * self.rho21,
            self.pi2 * self.rho22,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub method: Method,
    /// Lag the model was fitted at, seconds.
    pub tau: f64,
    pub rho_r: f64,
    /// Seconds.
    pub rho_rp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<OrthonormalBasis>,
    /// Mean of the fitting anchors, added back at prediction time. dBm.
    pub mean_r: f64,
    /// Expected squared prediction error, dB². Absent for a simplified model
    /// built without statistics.
    pub analytic_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_moments: Option<MomentSet>,
}

/// The present sample a prediction starts from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub t: f64,
    /// dBm.
    pub rssi: f64,
    /// Backward-difference slope, dB/s.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub t_target: f64,
    /// dBm.
    pub value: f64,
    pub mse: Option<f64>,
    pub steps_ahead: u32,
    pub basis_sample: Anchor,
}

fn check_moments(m: &MomentSet) -> Result<()> {
    m.validate()?;
    if !(m.tau.is_finite() && m.tau >= 0.0) {
        return Err(Error::param(format!("bad lag {}", m.tau)));
    }
    Ok(())
}

/// Solves the 2x2 normal equations
///
/// ```text
/// [rr_tau ]   [rr0   rpr0 ] [ρ_r ]
/// [rrp_tau] = [rpr0  rprp0] [ρ_r']
/// ```
///
/// by Cramer's rule.
pub fn fit_normal_equations(m: &MomentSet) -> Result<PredictorModel> {
    check_moments(m)?;
    let det = m.rr0 * m.rprp0 - m.rpr0 * m.rpr0;
    let tol = DETERMINANT_TOLERANCE * m.rr0 * m.rprp0;
    if det.is_nan() || det <= tol || m.rprp0 <= 0.0 {
        return Err(Error::DegenerateMoments { det, tol });
    }
    let rho_r = (m.rr_tau * m.rprp0 - m.rpr0 * m.rrp_tau) / det;
    let rho_rp = (m.rr0 * m.rrp_tau - m.rpr0 * m.rr_tau) / det;
    Ok(statistical_model(Method::NormalEq, m, rho_r, rho_rp, None))
}

/// Gram-Schmidt path: build the orthonormal pair `(p1, p2)` from `(r, r')`,
/// project the target on each, and map the projections back.
pub fn fit_orthonormal(m: &MomentSet) -> Result<PredictorModel> {
    check_moments(m)?;
    let rho11 = 1.0 / m.rr0.sqrt();

    // Power of r' left after removing its component along r.
    let radicand = (m.rr0 * m.rprp0 - m.rpr0 * m.rpr0) / m.rr0;
    if !radicand.is_finite() || radicand <= DETERMINANT_TOLERANCE * m.rprp0 {
        return Err(Error::NonPositiveDefinite { radicand });
    }
    // Unit power for p2 needs the reciprocal root of the residual power.
    let rho22 = 1.0 / radicand.sqrt();
    // E[r p2] = 0.
    let rho21 = -rho22 * m.rpr0 / m.rr0;

    let pi1 = rho11 * m.rr_tau;
    let p2_power = rho21 * rho21 * m.rr0 + 2.0 * rho21 * rho22 * m.rpr0 + rho22 * rho22 * m.rprp0;
    let pi2 = (rho21 * m.rr_tau + rho22 * m.rrp_tau) / p2_power;

    let basis = OrthonormalBasis {
        rho11,
        rho21,
        rho22,
        pi1,
        pi2,
    };
    let (rho_r, rho_rp) = basis.coefficients();
    Ok(statistical_model(
        Method::Orthonormal,
        m,
        rho_r,
        rho_rp,
        Some(basis),
    ))
}

fn statistical_model(
    method: Method,
    m: &MomentSet,
    rho_r: f64,
    rho_rp: f64,
    basis: Option<OrthonormalBasis>,
) -> PredictorModel {
    let mut model = PredictorModel {
        method,
        tau: m.tau,
        rho_r,
        rho_rp,
        basis,
        mean_r: m.mean_r,
        analytic_mse: None,
        source_moments: Some(*m),
    };
    // A finite sample can push the optimum a hair below zero when the
    // target's power exceeds rr0; the error itself cannot be negative.
    model.analytic_mse = Some(analytic_mse(&model, m).max(0.0));
    model
}

/// Small-lag limit: `ρ_r = 1`, `ρ_r' = τ`.
pub fn fit_simplified(tau: f64) -> PredictorModel {
    PredictorModel {
        method: Method::Simplified,
        tau,
        rho_r: 1.0,
        rho_rp: tau,
        basis: None,
        mean_r: 0.0,
        analytic_mse: None,
        source_moments: None,
    }
}

/// Simplified model whose expected error is evaluated under `m`.
///
/// The coefficients are not the MMSE optimum for `m`, so the error is the
/// full quadratic form rather than [`analytic_mse`].
pub fn fit_simplified_with_moments(m: &MomentSet) -> PredictorModel {
    let mut model = fit_simplified(m.tau);
    model.mean_r = m.mean_r;
    model.analytic_mse = Some(expected_mse(model.rho_r, model.rho_rp, m).max(0.0));
    model.source_moments = Some(*m);
    model
}

/// MSE of the MMSE-fitted predictor: `rr0 - ρ_r rr_tau - ρ_r' rrp_tau`.
///
/// Relies on the error being orthogonal to both data terms, so it is only
/// the expected error for coefficients that solve the normal equations.
pub fn analytic_mse(model: &PredictorModel, m: &MomentSet) -> f64 {
    m.rr0 - model.rho_r * m.rr_tau - model.rho_rp * m.rrp_tau
}

/// Expected squared error of arbitrary coefficients, with `rr0` standing in
/// for the target power (stationarity).
pub fn expected_mse(rho_r: f64, rho_rp: f64, m: &MomentSet) -> f64 {
    m.rr0 - 2.0 * (rho_r * m.rr_tau + rho_rp * m.rrp_tau)
        + rho_r * rho_r * m.rr0
        + 2.0 * rho_r * rho_rp * m.rpr0
        + rho_rp * rho_rp * m.rprp0
}

impl PredictorModel {
    /// Coefficients to use for a lag of `tau` seconds.
    pub fn coefficients_at(&self, tau: f64) -> Result<(f64, f64)> {
        if self.method.is_statistical() {
            if (tau - self.tau).abs() > 1e-9 * self.tau.abs().max(1.0) {
                return Err(Error::LagMismatch {
                    model_tau: self.tau,
                    requested_tau: tau,
                });
            }
            Ok((self.rho_r, self.rho_rp))
        } else {
            Ok((1.0, tau))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `n_steps` ahead of `anchor`, one step being `interval` seconds.
///
/// Statistical models only serve the lag they were fitted at; a simplified
/// model substitutes `τ = n_steps * interval` into its slope coefficient.
pub fn predict(
    model: &PredictorModel,
    anchor: Anchor,
    n_steps: u32,
    interval: f64,
) -> Result<Prediction> {
    if n_steps < 1 {
        return Err(Error::param("n_steps must be at least 1"));
    }
    if !(interval.is_finite() && interval > 0.0) {
        return Err(Error::param(format!("bad interval {interval}")));
    }
    if !(anchor.rssi.is_finite() && anchor.slope.is_finite()) {
        return Err(Error::param("anchor must be finite"));
    }
    let tau = n_steps as f64 * interval;
    let (rho_r, rho_rp) = model.coefficients_at(tau)?;
    let value = model.mean_r + rho_r * (anchor.rssi - model.mean_r) + rho_rp * anchor.slope;
    Ok(Prediction {
        t_target: anchor.t + tau,
        value,
        // The stored MSE only describes the lag the model was fitted at.
        mse: model
            .analytic_mse
            .filter(|_| (tau - model.tau).abs() <= 1e-9 * model.tau.abs().max(1.0)),
        steps_ahead: n_steps,
        basis_sample: anchor,
    })
}
