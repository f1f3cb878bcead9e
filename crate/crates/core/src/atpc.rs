//! Closed-loop adaptive transmission power control.
//!
//! Each ACK reports the received power of the packet it acknowledges. With a
//! symmetric channel, `ack_rssi - tx` is the path gain, and the next packet is
//! sent just strong enough to land `margin_db` above the threshold. When ACKs
//! go missing the controller predicts the path gain `n` steps past the last
//! ACK; after `max_missed_acks` consecutive misses it falls back to full power.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linksim::{ChannelModel, ChannelProcess, LossModel, LossProcess, RadioProfile};
use crate::predictor::{fit_simplified, predict, Anchor, Method, RefitConfig, Refitter};
use crate::trace::RssiSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtpcConfig {
    pub threshold_dbm: f64,
    pub margin_db: f64,
    pub max_missed_acks: u32,
    pub radio: RadioProfile,
    pub predictor_method: Method,
    pub window: usize,
    pub refit_every: usize,
}

impl AtpcConfig {
    pub fn new(radio: RadioProfile, threshold_dbm: f64) -> Self {
        Self {
            threshold_dbm,
            margin_db: 3.0,
            max_missed_acks: 5,
            radio,
            predictor_method: Method::Orthonormal,
            window: 512,
            refit_every: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        if self.threshold_dbm.is_nan() || self.threshold_dbm < self.radio.sensitivity_dbm {
            return Err(Error::param(format!(
                "threshold {} dBm below {} sensitivity {} dBm",
                self.threshold_dbm, self.radio.name, self.radio.sensitivity_dbm
            )));
        }
        if !(self.margin_db >= 0.0 && self.margin_db.is_finite()) {
            return Err(Error::param("margin_db must be non-negative"));
        }
        if self.max_missed_acks < 1 {
            return Err(Error::param("max_missed_acks must be at least 1"));
        }
        Ok(())
    }

    fn target_dbm(&self) -> f64 {
        self.threshold_dbm + self.margin_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Tracking,
    Fallback,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Tracking => "tracking",
            Mode::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtpcState {
    pub last_tx_dbm: f64,
    pub consecutive_missed: u32,
    /// dB; `None` until the first observation.
    pub path_gain_estimate_db: Option<f64>,
    pub mode: Mode,
    /// The last decision wanted more than the radio's maximum power.
    pub insufficient_headroom: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub next_tx_dbm: f64,
    /// Predicted received power of the packet whose ACK was missed, dBm.
    pub predicted_rssi_dbm: Option<f64>,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy)]
struct Observation {
    t: f64,
    gain: f64,
}

/// Single-owner controller state machine.
#[derive(Debug, Clone)]
pub struct AtpcController {
    config: AtpcConfig,
    state: AtpcState,
    refitter: Refitter,
    last_obs: Option<Observation>,
    anchor: Option<(Observation, f64)>,
    next_seq: u64,
}

impl AtpcController {
    /// Starts at full power with no channel knowledge.
    pub fn new(config: AtpcConfig) -> Result<Self> {
        config.validate()?;
        let lags: Vec<u32> = (1..=config.max_missed_acks).collect();
        let refitter = Refitter::new(
            config.predictor_method,
            &lags,
            config.radio.lag_unit_s,
            RefitConfig {
                window: config.window,
                refit_every: config.refit_every,
                ..RefitConfig::default()
            },
        )?;
        let state = AtpcState {
            last_tx_dbm: config.radio.max_tx_dbm,
            consecutive_missed: 0,
            path_gain_estimate_db: None,
            mode: Mode::Tracking,
            insufficient_headroom: false,
        };
        Ok(Self {
            config,
            state,
            refitter,
            last_obs: None,
            anchor: None,
            next_seq: 0,
        })
    }

    pub fn config(&self) -> &AtpcConfig {
        &self.config
    }

    pub fn state(&self) -> AtpcState {
        self.state
    }

    /// Power for the next packet.
    pub fn current_tx(&self) -> f64 {
        self.state.last_tx_dbm
    }

    fn decide(&mut self, gain: f64) -> f64 {
        let wanted = self.config.target_dbm() - gain;
        self.state.insufficient_headroom = wanted > self.config.radio.max_tx_dbm;
        self.state.path_gain_estimate_db = Some(gain);
        let tx = self.config.radio.clamp_tx(wanted);
        self.state.last_tx_dbm = tx;
        tx
    }

    /// ACK received for the packet sent at `current_tx()`.
    pub fn on_ack(&mut self, ack_rssi_dbm: f64) -> Result<Decision> {
        if !ack_rssi_dbm.is_finite() {
            return Err(Error::param("ack rssi must be finite"));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let t = seq as f64 * self.config.radio.lag_unit_s;
        let gain = ack_rssi_dbm - self.state.last_tx_dbm;
        let obs = Observation { t, gain };

        let slope = self.last_obs.map(|p| (gain - p.gain) / (t - p.t));
        self.anchor = slope.map(|s| (obs, s));
        self.last_obs = Some(obs);
        self.refitter.push(RssiSample::new(seq, t, gain))?;

        self.state.consecutive_missed = 0;
        self.state.mode = Mode::Tracking;
        let tx = self.decide(gain);
        Ok(Decision {
            next_tx_dbm: tx,
            predicted_rssi_dbm: None,
            mode: Mode::Tracking,
        })
    }

    /// No ACK for the packet sent at `current_tx()`.
    pub fn on_missed_ack(&mut self) -> Decision {
        self.next_seq += 1;
        let lost_tx = self.state.last_tx_dbm;
        let n = self.state.consecutive_missed.saturating_add(1);
        self.state.consecutive_missed = n;

        if n >= self.config.max_missed_acks || self.state.mode == Mode::Fallback {
            return self.fall_back();
        }
        match self.predicted_gain(n) {
            Some(gain) => {
                let tx = self.decide(gain);
                Decision {
                    next_tx_dbm: tx,
                    predicted_rssi_dbm: Some(gain + lost_tx),
                    mode: Mode::Tracking,
                }
            }
            None => self.fall_back(),
        }
    }

    fn fall_back(&mut self) -> Decision {
        self.state.mode = Mode::Fallback;
        self.state.insufficient_headroom = false;
        self.state.last_tx_dbm = self.config.radio.max_tx_dbm;
        Decision {
            next_tx_dbm: self.config.radio.max_tx_dbm,
            predicted_rssi_dbm: None,
            mode: Mode::Fallback,
        }
    }

    /// Path gain `n` steps past the last ACK.
    fn predicted_gain(&self, n: u32) -> Option<f64> {
        let (obs, slope) = self.anchor?;
        let anchor = Anchor {
            t: obs.t,
            rssi: obs.gain,
            slope,
        };
        let dt = self.config.radio.lag_unit_s;
        let model = match self.config.predictor_method {
            Method::Simplified => fit_simplified(n as f64 * dt),
            _ => self.refitter.snapshot().model(n)?.clone(),
        };
        let p = predict(&model, anchor, n, dt).ok()?;
        p.value.is_finite().then_some(p.value)
    }
}

/// Transmit power policy for the closed-loop simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Adaptive,
    AlwaysMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub seq: u64,
    pub tx_dbm: f64,
    /// True received power, whether or not the packet got through.
    pub rssi_dbm: f64,
    pub delivered: bool,
    pub predicted: Option<f64>,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub packets: usize,
    pub delivered: usize,
    /// Share of delivered packets received at or above the threshold.
    pub above_threshold_frac: f64,
    pub mean_tx_dbm: f64,
    pub fallback_packets: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopRun {
    pub records: Vec<PacketRecord>,
    pub summary: LoopSummary,
}

impl LoopRun {
    /// Per-packet CSV: `seq,tx_dbm,rssi_dbm,delivered,predicted,mode`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "seq,tx_dbm,rssi_dbm,delivered,predicted,mode")?;
        for r in &self.records {
            let predicted = r.predicted.map(|p| format!("{p:.2}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.2},{:.2},{},{},{}",
                r.seq,
                r.tx_dbm,
                r.rssi_dbm,
                u8::from(r.delivered),
                predicted,
                r.mode.as_str()
            )?;
        }
        Ok(())
    }
}

/// Runs `packets` exchanges over `channel`. A packet is delivered when it
/// clears the radio's sensitivity and the loss process spares it; an
/// undelivered packet produces no ACK.
pub fn run_closed_loop(
    config: &AtpcConfig,
    channel: &ChannelModel,
    loss: &LossModel,
    packets: usize,
    policy: Policy,
) -> Result<LoopRun> {
    let mut ctl = AtpcController::new(config.clone())?;
    let mut process = ChannelProcess::new(channel, config.radio.rate_pps)?;
    let mut losses = LossProcess::new(loss)?;
    let radio = &config.radio;

    let mut records = Vec::with_capacity(packets);
    let mut mode = Mode::Tracking;
    let mut predicted = None;
    for seq in 0..packets as u64 {
        let tx = match policy {
            Policy::Adaptive => ctl.current_tx(),
            Policy::AlwaysMax => radio.max_tx_dbm,
        };
        let rssi = tx + process.next_gain();
        let dropped = losses.lost();
        let delivered = rssi >= radio.sensitivity_dbm && !dropped;
        records.push(PacketRecord {
            seq,
            tx_dbm: tx,
            rssi_dbm: rssi,
            delivered,
            predicted,
            mode,
        });
        if policy == Policy::Adaptive {
            let d = if delivered {
                ctl.on_ack(rssi)?
            } else {
                ctl.on_missed_ack()
            };
            mode = d.mode;
            predicted = d.predicted_rssi_dbm;
        }
    }
    let summary = summarize(&records, config.threshold_dbm);
    Ok(LoopRun { records, summary })
}

fn summarize(records: &[PacketRecord], threshold_dbm: f64) -> LoopSummary {
    let delivered: Vec<_> = records.iter().filter(|r| r.delivered).collect();
    let above = delivered
        .iter()
        .filter(|r| r.rssi_dbm >= threshold_dbm)
        .count();
    LoopSummary {
        packets: records.len(),
        delivered: delivered.len(),
        above_threshold_frac: if delivered.is_empty() {
            0.0
        } else {
            above as f64 / delivered.len() as f64
        },
        mean_tx_dbm: records.iter().map(|r| r.tx_dbm).sum::<f64>() / records.len().max(1) as f64,
        fallback_packets: records.iter().filter(|r| r.mode == Mode::Fallback).count(),
    }
}
