//! Walk-forward prediction error per lag.
//!
//! The trace is replayed in order through a sliding-window [`Refitter`].
//! Every received sample with a slope becomes an anchor, and for each lag `k`
//! whose target `seq + k` was received, the model available *at the anchor*
//! predicts it. Scoring starts after the first refit, for every method, so
//! the rows of different methods cover the same anchors.
//!
//! NRMSE is the RMSE divided by the trace's dynamic range `r_max - r_min`,
//! in percent; accuracy is `100 - nrmse`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{predict, Anchor, Method, RefitConfig, Refitter};
use crate::stats::partner;
use crate::trace::{derivative_series, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub lag_steps: u32,
    pub lag_s: f64,
    pub method: Method,
    pub n_predictions: usize,
    pub rmse_db: f64,
    pub nrmse_pct: f64,
    pub accuracy_pct: f64,
    /// Mean analytic MSE of the models that made the predictions, dB².
    pub analytic_mse_db2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub r_max_dbm: f64,
    pub r_min_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub samples: usize,
    pub loss_ratio: f64,
    pub nominal_interval_s: f64,
    pub window: usize,
    pub refit_every: usize,
    pub normalization: Normalization,
    /// States how nrmse and accuracy are defined.
    pub nrmse_definition: String,
    pub meta: BTreeMap<String, String>,
}

const NRMSE_DEFINITION: &str =
    "nrmse_pct = 100 * rmse_db / (r_max_dbm - r_min_dbm); accuracy_pct = 100 - nrmse_pct";

impl EvalReport {
    pub fn row(&self, method: Method, lag_steps: u32) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.lag_steps == lag_steps)
    }

    /// `lag_steps,lag_s,method,n_predictions,rmse_db,nrmse_pct,accuracy_pct,analytic_mse_db2`
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "lag_steps,lag_s,method,n_predictions,rmse_db,nrmse_pct,accuracy_pct,analytic_mse_db2"
        )?;
        for r in &self.rows {
            let mse = r
                .analytic_mse_db2
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{:.6},{},{},{:.6},{:.6},{:.6},{}",
                r.lag_steps,
                r.lag_s,
                r.method,
                r.n_predictions,
                r.rmse_db,
                r.nrmse_pct,
                r.accuracy_pct,
                mse
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Default, Clone, Copy)]
struct Acc {
    sq: f64,
    n: usize,
    mse_sum: f64,
    mse_n: usize,
}

pub fn evaluate(
    trace: &Trace,
    method: Method,
    lags: &[u32],
    refit: RefitConfig,
) -> Result<EvalReport> {
    evaluate_methods(trace, &[method], lags, refit)
}

/// Rows for every `(lag, method)` pair, sorted by lag then method.
pub fn evaluate_methods(
    trace: &Trace,
    methods: &[Method],
    lags: &[u32],
    refit: RefitConfig,
) -> Result<EvalReport> {
    if lags.is_empty() || lags.contains(&0) {
        return Err(Error::param("lags must be non-empty and at least 1"));
    }
    if methods.is_empty() {
        return Err(Error::param("no method given"));
    }
    let mut lags = lags.to_vec();
    lags.sort_unstable();
    lags.dedup();
    let mut methods = methods.to_vec();
    methods.sort_unstable();
    methods.dedup();

    let deriv = derivative_series(trace)?;
    let (r_min, r_max) = trace
        .rssi_values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let range = r_max - r_min;
    let dt = trace.nominal_interval();

    let mut rows = Vec::new();
    let mut per_method = Vec::new();
    for &method in &methods {
        per_method.push((method, replay(trace, &deriv, method, &lags, refit)?));
    }
    for (li, &k) in lags.iter().enumerate() {
        for (method, accs) in &per_method {
            let acc = accs[li];
            if acc.n == 0 {
                return Err(Error::NoPredictions { lag: k as usize });
            }
            let rmse = (acc.sq / acc.n as f64).sqrt();
            let nrmse = if range > 0.0 {
                round6(100.0 * rmse / range)
            } else {
                0.0
            };
            rows.push(EvalRow {
                lag_steps: k,
                lag_s: k as f64 * dt,
                method: *method,
                n_predictions: acc.n,
                rmse_db: rmse,
                nrmse_pct: nrmse,
                accuracy_pct: 100.0 - nrmse,
                analytic_mse_db2: (acc.mse_n > 0).then(|| acc.mse_sum / acc.mse_n as f64),
            });
        }
    }

    Ok(EvalReport {
        rows,
        samples: trace.len(),
        loss_ratio: trace.loss_ratio(),
        nominal_interval_s: dt,
        window: refit.window,
        refit_every: refit.refit_every,
        normalization: Normalization {
            r_max_dbm: r_max,
            r_min_dbm: r_min,
        },
        nrmse_definition: NRMSE_DEFINITION.into(),
        meta: trace.meta().clone(),
    })
}

fn replay(
    trace: &Trace,
    deriv: &crate::trace::DerivativeSeries,
    method: Method,
    lags: &[u32],
    refit: RefitConfig,
) -> Result<Vec<Acc>> {
    let samples = trace.samples();
    let dt = trace.nominal_interval();
    let mut refitter = Refitter::new(method, lags, dt, refit)?;
    let mut accs = vec![Acc::default(); lags.len()];
    let mut warmed = false;
    for (i, s) in samples.iter().enumerate() {
        warmed |= refitter.push(*s)?;
        if !warmed {
            continue;
        }
        let Some(d) = deriv.at_sample(i) else {
            continue;
        };
        let anchor = Anchor {
            t: s.t,
            rssi: s.rssi,
            slope: d.rate,
        };
        let snapshot = refitter.snapshot();
        for (li, &k) in lags.iter().enumerate() {
            let Some(j) = partner(samples, i, k as usize) else {
                continue;
            };
            let Some(model) = snapshot.model(k) else {
                continue;
            };
            let p = predict(model, anchor, k, dt)?;
            let err = p.value - samples[j].rssi;
            let acc = &mut accs[li];
            acc.sq += err * err;
            acc.n += 1;
            if let Some(m) = p.mse {
                acc.mse_sum += m;
                acc.mse_n += 1;
            }
        }
    }
    Ok(accs)
}

/// [`evaluate`] over lags `1..=max_lag`.
pub fn lag_sweep(
    trace: &Trace,
    method: Method,
    max_lag: u32,
    refit: RefitConfig,
) -> Result<EvalReport> {
    if max_lag < 1 {
        return Err(Error::param("max_lag must be at least 1"));
    }
    let lags: Vec<u32> = (1..=max_lag).collect();
    evaluate(trace, method, &lags, refit)
}
