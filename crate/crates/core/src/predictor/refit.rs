use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::predictor::{fit_simplified, Method, PredictorModel};
use crate::stats::{moment_set_at_lag, DEFAULT_MIN_PAIRS};
use crate::trace::{derivative_series, RssiSample, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefitConfig {
    /// Samples kept in the sliding window.
    pub window: usize,
    /// Received samples between refits.
    pub refit_every: usize,
    pub min_pairs: usize,
}

impl Default for RefitConfig {
    fn default() -> Self {
        Self {
            window: 512,
            refit_every: 64,
            min_pairs: DEFAULT_MIN_PAIRS,
        }
    }
}

impl RefitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || self.refit_every < 1 {
            return Err(Error::param(format!(
                "refit window {} / cadence {} out of range",
                self.window, self.refit_every
            )));
        }
        Ok(())
    }
}

/// Models fitted from one window, keyed by lag in steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelSnapshot {
    /// Last sequence number in the window the models were fitted from.
    pub fitted_through: Option<u64>,
    pub models: BTreeMap<u32, PredictorModel>,
}

impl ModelSnapshot {
    pub fn model(&self, lag_steps: u32) -> Option<&PredictorModel> {
        self.models.get(&lag_steps)
    }
}

/// Sliding-window refitter. One owner pushes samples; readers take cheap
/// [`Arc`] snapshots that stay valid across later refits.
#[derive(Debug, Clone)]
pub struct Refitter {
    method: Method,
    lags: Vec<u32>,
    interval: f64,
    config: RefitConfig,
    window: VecDeque<RssiSample>,
    since_refit: usize,
    snapshot: Arc<ModelSnapshot>,
}

impl Refitter {
    pub fn new(method: Method, lags: &[u32], interval: f64, config: RefitConfig) -> Result<Self> {
        config.validate()?;
        if lags.contains(&0) {
            return Err(Error::param("lags must be at least one step"));
        }
        if !(interval.is_finite() && interval > 0.0) {
            return Err(Error::param(format!("bad interval {interval}")));
        }
        let mut lags = lags.to_vec();
        lags.sort_unstable();
        lags.dedup();
        Ok(Self {
            method,
            lags,
            interval,
            config,
            window: VecDeque::with_capacity(config.window),
            since_refit: 0,
            snapshot: Arc::default(),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn snapshot(&self) -> Arc<ModelSnapshot> {
        Arc::clone(&self.snapshot)
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Adds a received sample and refits when the cadence is due. Returns
    /// whether a refit happened.
    pub fn push(&mut self, sample: RssiSample) -> Result<bool> {
        if let Some(last) = self.window.back() {
            if sample.seq <= last.seq || sample.t <= last.t {
                return Err(Error::InvalidTrace(format!(
                    "sample seq {} does not follow seq {}",
                    sample.seq, last.seq
                )));
            }
        }
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back(sample);
        self.since_refit += 1;
        if self.since_refit >= self.config.refit_every {
            self.refit_now();
            return Ok(true);
        }
        Ok(false)
    }

    /// Refits every lag from the current window. Lags whose statistics are
    /// degenerate are left without a model.
    pub fn refit_now(&mut self) {
        self.since_refit = 0;
        let fitted_through = self.window.back().map(|s| s.seq);
        let mut models = BTreeMap::new();
        let trace = Trace::new(self.window.iter().copied().collect(), self.interval).ok();
        let deriv = trace.as_ref().and_then(|t| derivative_series(t).ok());
        for &k in &self.lags {
            let fitted = match (&trace, &deriv) {
                (Some(t), Some(d)) => moment_set_at_lag(t, d, k as usize, self.config.min_pairs)
                    .and_then(|m| self.method.fit(&m)),
                _ => Err(Error::Empty),
            };
            let model = match fitted {
                Ok(m) => Some(m),
                Err(_) if self.method == Method::Simplified => {
                    Some(fit_simplified(k as f64 * self.interval))
                }
                Err(_) => None,
            };
            if let Some(m) = model {
                models.insert(k, m);
            }
        }
        self.snapshot = Arc::new(ModelSnapshot {
            fitted_through,
            models,
        });
    }

    /// Drops the window and all models.
    pub fn reset(&mut self) {
        self.window.clear();
        self.since_refit = 0;
        self.snapshot = Arc::default();
    }
}
