//! Seeded synthetic links: radio profiles, received-power fluctuation
//! processes and packet-loss processes.
//!
//! Every generator is a pure function of its parameters and seed. The
//! channel presets are loosely inspired by floating deployments on water
//! (slow swell, short chop, fountain ripples); they are calibrations for
//! exercising the predictor, not reproductions of measured spectra.

use std::f64::consts::TAU;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{RssiSample, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioProfile {
    pub name: String,
    pub rate_pps: f64,
    pub lag_unit_s: f64,
    pub sensitivity_dbm: f64,
    pub max_tx_dbm: f64,
    /// Register floor. Not a datasheet maximum; adjustable.
    pub min_tx_dbm: f64,
    pub packet_bytes: u32,
}

impl RadioProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_pps > 0.0 && self.rate_pps.is_finite()) {
            return Err(Error::param("rate_pps must be positive"));
        }
        if self.min_tx_dbm >= self.max_tx_dbm {
            return Err(Error::param("min_tx_dbm must be below max_tx_dbm"));
        }
        if self.packet_bytes == 0 {
            return Err(Error::param("packet_bytes must be positive"));
        }
        Ok(())
    }

    pub fn clamp_tx(&self, tx_dbm: f64) -> f64 {
        tx_dbm.clamp(self.min_tx_dbm, self.max_tx_dbm)
    }

    /// Looks up a built-in profile by case-insensitive name.
    pub fn builtin(name: &str) -> Result<RadioProfile> {
        builtin_profiles()
            .into_iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::param(format!("unknown radio `{name}`")))
    }
}

/// CC2538 (2.4 GHz, 250 kbps) and CC1200 (869.5 MHz, 50 kbps mode) as
/// deployed with 128-byte packets.
pub fn builtin_profiles() -> Vec<RadioProfile> {
    vec![
        RadioProfile {
            name: "CC2538".into(),
            rate_pps: 10.0,
            lag_unit_s: 0.1,
            sensitivity_dbm: -97.0,
            max_tx_dbm: 7.0,
            min_tx_dbm: -24.0,
            packet_bytes: 128,
        },
        RadioProfile {
            name: "CC1200".into(),
            rate_pps: 2.0,
            lag_unit_s: 0.5,
            sensitivity_dbm: -109.0,
            max_tx_dbm: 16.0,
            min_tx_dbm: -16.0,
            packet_bytes: 128,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub freq_hz: f64,
    pub amp_db: f64,
    pub phase_rad: f64,
}

impl Sinusoid {
    fn at(&self, t: f64) -> f64 {
        self.amp_db * (TAU * self.freq_hz * t + self.phase_rad).sin()
    }
}

/// Zero-mean fluctuation of the path gain around `-base_path_loss_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fluctuation {
    /// Per-sample AR(2): `x_k = a1 x_{k-1} + a2 x_{k-2} + w_k`.
    Ar2 { a1: f64, a2: f64, noise_std_db: f64 },
    /// Sum of waves plus a continuous-time first-order (Ornstein-Uhlenbeck)
    /// noise of correlation time `noise_corr_s`, plus white measurement noise.
    /// The OU term is discretized exactly, so the process is the same in
    /// physical time at any packet rate.
    Swell {
        waves: Vec<Sinusoid>,
        noise_std_db: f64,
        noise_corr_s: f64,
        white_std_db: f64,
    },
    /// One fast, small oscillation plus white noise.
    Ripple { wave: Sinusoid, noise_std_db: f64 },
}

impl Fluctuation {
    pub fn kind(&self) -> &'static str {
        match self {
            Fluctuation::Ar2 { .. } => "ar2",
            Fluctuation::Swell { .. } => "swell",
            Fluctuation::Ripple { .. } => "ripple",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{what} must be non-negative, got {v}"
                )))
            }
        };
        match self {
            Fluctuation::Ar2 {
                a1,
                a2,
                noise_std_db,
            } => {
                nonneg(*noise_std_db, "noise_std_db")?;
                // Stability triangle of z^2 - a1 z - a2.
                if !(a2.abs() < 1.0 && a1 + a2 < 1.0 && a2 - a1 < 1.0) {
                    return Err(Error::param(format!(
                        "unstable AR(2) coefficients a1={a1}, a2={a2}"
                    )));
                }
            }
            Fluctuation::Swell {
                waves,
                noise_std_db,
                noise_corr_s,
                white_std_db,
            } => {
                nonneg(*noise_std_db, "noise_std_db")?;
                nonneg(*white_std_db, "white_std_db")?;
                if !(noise_corr_s.is_finite() && *noise_corr_s > 0.0) {
                    return Err(Error::param("noise_corr_s must be positive"));
                }
                for w in waves {
                    check_wave(w)?;
                }
            }
            Fluctuation::Ripple { wave, noise_std_db } => {
                nonneg(*noise_std_db, "noise_std_db")?;
                check_wave(wave)?;
            }
        }
        Ok(())
    }
}

fn check_wave(w: &Sinusoid) -> Result<()> {
    if [w.freq_hz, w.amp_db, w.phase_rad]
        .iter()
        .all(|v| v.is_finite())
        && w.freq_hz >= 0.0
    {
        Ok(())
    } else {
        Err(Error::param(format!("bad wave {w:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub fluctuation: Fluctuation,
    pub base_path_loss_db: f64,
    pub seed: u64,
}

/// Names accepted by [`ChannelModel::preset`].
pub const CHANNEL_PRESETS: [&str; 5] = ["swell", "chop", "ripple", "calm", "ar2"];

impl ChannelModel {
    /// Built-in fluctuation presets; wave phases are drawn from `seed`.
    ///
    /// * `swell`: long, large waves (periods of 4-9 s, several dB).
    /// * `chop`: short, rapid waves around 0.5-0.8 Hz.
    /// * `ripple`: a small fast oscillation as from fountains on a lake.
    /// * `calm`: a slow swell with little noise.
    /// * `ar2`: resonant AR(2) with poles at `0.9 e^{±j0.476}`.
    pub fn preset(name: &str, seed: u64) -> Result<ChannelModel> {
        let mut phases = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_E11A_u64);
        let mut wave = |freq_hz: f64, amp_db: f64| Sinusoid {
            freq_hz,
            amp_db,
            phase_rad: phases.random::<f64>() * TAU,
        };
        let fluctuation = match name.to_ascii_lowercase().as_str() {
            "swell" => Fluctuation::Swell {
                waves: vec![wave(0.11, 5.0), wave(0.17, 3.0), wave(0.26, 1.5)],
                noise_std_db: 0.8,
                noise_corr_s: 3.0,
                white_std_db: 0.25,
            },
            "chop" => Fluctuation::Swell {
                waves: vec![wave(0.45, 3.0), wave(0.7, 1.5)],
                noise_std_db: 1.0,
                noise_corr_s: 1.0,
                white_std_db: 0.4,
            },
            "ripple" => Fluctuation::Ripple {
                wave: wave(1.2, 1.0),
                noise_std_db: 0.5,
            },
            "calm" => Fluctuation::Swell {
                waves: vec![wave(0.08, 4.0), wave(0.13, 2.0)],
                noise_std_db: 0.3,
                noise_corr_s: 5.0,
                white_std_db: 0.05,
            },
            "ar2" => Fluctuation::Ar2 {
                a1: 1.6,
                a2: -0.81,
                noise_std_db: 0.5,
            },
            other => return Err(Error::param(format!("unknown channel preset `{other}`"))),
        };
        Ok(ChannelModel {
            fluctuation,
            base_path_loss_db: 80.0,
            seed,
        })
    }

    pub fn with_path_loss(mut self, db: f64) -> Self {
        self.base_path_loss_db = db;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.base_path_loss_db.is_finite() {
            return Err(Error::param("base_path_loss_db must be finite"));
        }
        self.fluctuation.validate()
    }
}

/// Packet-by-packet path gain generator.
#[derive(Debug, Clone)]
pub struct ChannelProcess {
    model: ChannelModel,
    dt: f64,
    k: u64,
    rng: ChaCha8Rng,
    state: [f64; 2],
}

/// AR(2) samples discarded before the first output.
const AR2_BURN_IN: usize = 1000;

impl ChannelProcess {
    pub fn new(model: &ChannelModel, rate_pps: f64) -> Result<Self> {
        model.validate()?;
        if !(rate_pps.is_finite() && rate_pps > 0.0) {
            return Err(Error::param("rate_pps must be positive"));
        }
        let mut p = Self {
            model: model.clone(),
            dt: 1.0 / rate_pps,
            k: 0,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            state: [0.0; 2],
        };
        match &model.fluctuation {
            Fluctuation::Ar2 { .. } => {
                for _ in 0..AR2_BURN_IN {
                    p.step_ar2();
                }
            }
            Fluctuation::Swell { noise_std_db, .. } => {
                p.state[0] = noise_std_db * p.normal();
            }
            Fluctuation::Ripple { .. } => {}
        }
        Ok(p)
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn step_ar2(&mut self) -> f64 {
        let Fluctuation::Ar2 {
            a1,
            a2,
            noise_std_db,
        } = self.model.fluctuation
        else {
            unreachable!()
        };
        let x = a1 * self.state[0] + a2 * self.state[1] + noise_std_db * self.normal();
        self.state = [x, self.state[0]];
        x
    }

    /// Next zero-mean fluctuation sample, dB.
    pub fn next_fluctuation(&mut self) -> f64 {
        let t = self.k as f64 * self.dt;
        self.k += 1;
        match self.model.fluctuation.clone() {
            Fluctuation::Ar2 { .. } => self.step_ar2(),
            Fluctuation::Swell {
                waves,
                noise_std_db,
                noise_corr_s,
                white_std_db,
            } => {
                let out = waves.iter().map(|w| w.at(t)).sum::<f64>()
                    + self.state[0]
                    + white_std_db * self.normal();
                let phi = (-self.dt / noise_corr_s).exp();
                self.state[0] =
                    phi * self.state[0] + noise_std_db * (1.0 - phi * phi).sqrt() * self.normal();
                out
            }
            Fluctuation::Ripple { wave, noise_std_db } => wave.at(t) + noise_std_db * self.normal(),
        }
    }

    /// Next path gain (received minus transmitted power), dB.
    pub fn next_gain(&mut self) -> f64 {
        -self.model.base_path_loss_db + self.next_fluctuation()
    }
}

/// Received power of `n_packets` sent at `tx_power_dbm`.
///
/// Packets arriving below the radio's sensitivity are not received and leave
/// gaps in the sequence.
pub fn generate_trace(
    channel: &ChannelModel,
    radio: &RadioProfile,
    tx_power_dbm: f64,
    n_packets: usize,
) -> Result<Trace> {
    radio.validate()?;
    if n_packets < 1 {
        return Err(Error::param("n_packets must be at least 1"));
    }
    if !(radio.min_tx_dbm..=radio.max_tx_dbm).contains(&tx_power_dbm) {
        return Err(Error::param(format!(
            "tx power {tx_power_dbm} dBm outside [{}, {}] for {}",
            radio.min_tx_dbm, radio.max_tx_dbm, radio.name
        )));
    }
    let mut process = ChannelProcess::new(channel, radio.rate_pps)?;
    let dt = 1.0 / radio.rate_pps;
    let samples = (0..n_packets as u64)
        .filter_map(|k| {
            let rssi = tx_power_dbm + process.next_gain();
            (rssi >= radio.sensitivity_dbm).then_some(RssiSample {
                seq: k,
                t: k as f64 * dt,
                rssi,
                tx_power: Some(tx_power_dbm),
            })
        })
        .collect();
    Ok(Trace::new(samples, dt)?
        .with_meta("channel", channel.fluctuation.kind())
        .with_meta("radio", radio.name.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Bernoulli {
        p: f64,
    },
    /// Two-state chain; `p_gb` is the good-to-bad transition probability.
    GilbertElliott {
        p_gb: f64,
        p_bg: f64,
        loss_good: f64,
        loss_bad: f64,
    },
}

impl LossKind {
    pub fn none() -> Self {
        LossKind::Bernoulli { p: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let probs: &[f64] = match self {
            LossKind::Bernoulli { p } => &[*p],
            LossKind::GilbertElliott {
                p_gb,
                p_bg,
                loss_good,
                loss_bad,
            } => &[*p_gb, *p_bg, *loss_good, *loss_bad],
        };
        if probs.iter().all(|p| (0.0..=1.0).contains(p)) {
            Ok(())
        } else {
            Err(Error::param(format!(
                "loss probabilities outside [0, 1]: {self:?}"
            )))
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    /// `none`, `bernoulli:P`, or `ge:P_GB,P_BG,LOSS_GOOD,LOSS_BAD`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(LossKind::none());
        }
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| Error::param(format!("bad loss model `{s}`")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::param(format!("bad loss parameters `{args}`")))?;
        let kind = match (name.to_ascii_lowercase().as_str(), nums.as_slice()) {
            ("bernoulli", [p]) => LossKind::Bernoulli { p: *p },
            ("ge" | "gilbert_elliott" | "gilbert-elliott", [a, b, c, d]) => {
                LossKind::GilbertElliott {
                    p_gb: *a,
                    p_bg: *b,
                    loss_good: *c,
                    loss_bad: *d,
                }
            }
            _ => return Err(Error::param(format!("bad loss model `{s}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub kind: LossKind,
    pub seed: u64,
}

/// Stateful loss draw, one call per packet.
#[derive(Debug, Clone)]
pub struct LossProcess {
    kind: LossKind,
    rng: ChaCha8Rng,
    bad: bool,
}

impl LossProcess {
    pub fn new(model: &LossModel) -> Result<Self> {
        model.kind.validate()?;
        Ok(Self {
            kind: model.kind,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            bad: false,
        })
    }

    pub fn lost(&mut self) -> bool {
        match self.kind {
            LossKind::Bernoulli { p } => self.rng.random::<f64>() < p,
            LossKind::GilbertElliott {
                p_gb,
                p_bg,
                loss_good,
                loss_bad,
            } => {
                let flip = if self.bad { p_bg } else { p_gb };
                if self.rng.random::<f64>() < flip {
                    self.bad = !self.bad;
                }
                let p = if self.bad { loss_bad } else { loss_good };
                self.rng.random::<f64>() < p
            }
        }
    }
}

/// Drops packets according to `loss`. Survivors keep their seq, t and rssi.
pub fn apply_loss(trace: &Trace, loss: &LossModel) -> Result<Trace> {
    let mut process = LossProcess::new(loss)?;
    Ok(trace.filtered(|_| !process.lost()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::sample_acf;

    fn cc2538() -> RadioProfile {
        RadioProfile::builtin("cc2538").unwrap()
    }

    #[test]
    fn builtin_profiles_are_exact() {
        let p = builtin_profiles();
        assert_eq!(p.len(), 2);
        let a = &p[0];
        assert_eq!(a.name, "CC2538");
        assert_eq!(
            (
                a.rate_pps,
                a.lag_unit_s,
                a.sensitivity_dbm,
                a.max_tx_dbm,
                a.packet_bytes
            ),
            (10.0, 0.1, -97.0, 7.0, 128)
        );
        let b = &p[1];
        assert_eq!(b.name, "CC1200");
        assert_eq!(
            (
                b.rate_pps,
                b.lag_unit_s,
                b.sensitivity_dbm,
                b.max_tx_dbm,
                b.packet_bytes
            ),
            (2.0, 0.5, -109.0, 16.0, 128)
        );
        for r in &p {
            assert_eq!(r.lag_unit_s * r.rate_pps, 1.0);
            r.validate().unwrap();
        }
    }

    #[test]
    fn noiseless_ripple_stays_in_envelope() {
        let ch = ChannelModel {
            fluctuation: Fluctuation::Ripple {
                wave: Sinusoid {
                    freq_hz: 0.5,
                    amp_db: 3.0,
                    phase_rad: 0.0,
                },
                noise_std_db: 0.0,
            },
            base_path_loss_db: 60.0,
            seed: 1,
        };
        let tr = generate_trace(&ch, &cc2538(), 7.0, 400).unwrap();
        assert_eq!(tr.len(), 400);
        let (lo, hi) = tr
            .rssi_values()
            .fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
        assert!(lo >= -56.0 - 1e-12 && hi <= -50.0 + 1e-12);
        // At 10 Hz a 0.5 Hz wave hits both crests exactly.
        assert!((lo + 56.0).abs() < 1e-9 && (hi + 50.0).abs() < 1e-9);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        for name in CHANNEL_PRESETS {
            let ch = ChannelModel::preset(name, 42).unwrap();
            let a = generate_trace(&ch, &cc2538(), 0.0, 500).unwrap();
            let b = generate_trace(&ch, &cc2538(), 0.0, 500).unwrap();
            assert_eq!(a, b, "{name}");
            let other = ChannelModel::preset(name, 43).unwrap();
            assert_ne!(a, generate_trace(&other, &cc2538(), 0.0, 500).unwrap());
        }
    }

    /// Yule-Walker: rho(1) = a1 / (1 - a2) for a stationary AR(2).
    #[test]
    fn ar2_lag_one_matches_yule_walker() {
        let (r, theta) = (0.9f64, 0.3f64);
        let a1 = 2.0 * r * theta.cos();
        let a2 = -r * r;
        let ch = ChannelModel {
            fluctuation: Fluctuation::Ar2 {
                a1,
                a2,
                noise_std_db: 0.5,
            },
            base_path_loss_db: 70.0,
            seed: 7,
        };
        let tr = generate_trace(&ch, &cc2538(), 0.0, 5000).unwrap();
        let acf = sample_acf(&tr, 1).unwrap();
        let expected = a1 / (1.0 - a2);
        assert!((acf.normalized[1] - expected).abs() < 0.05);
    }

    #[test]
    fn unstable_ar2_rejected() {
        let ch = ChannelModel {
            fluctuation: Fluctuation::Ar2 {
                a1: 1.5,
                a2: 0.6,
                noise_std_db: 1.0,
            },
            base_path_loss_db: 70.0,
            seed: 0,
        };
        assert!(generate_trace(&ch, &cc2538(), 0.0, 10).is_err());
    }

    #[test]
    fn tx_outside_radio_limits_rejected() {
        let ch = ChannelModel::preset("swell", 1).unwrap();
        assert!(generate_trace(&ch, &cc2538(), 8.0, 10).is_err());
        assert!(generate_trace(&ch, &cc2538(), -30.0, 10).is_err());
        assert!(generate_trace(&ch, &cc2538(), 0.0, 0).is_err());
    }

    #[test]
    fn sensitivity_gate_drops_weak_packets() {
        let ch = ChannelModel::preset("swell", 1)
            .unwrap()
            .with_path_loss(100.0);
        let tr = generate_trace(&ch, &cc2538(), 0.0, 2000).unwrap();
        assert!(tr.len() < 2000 && !tr.is_empty());
        assert!(tr.rssi_values().all(|v| v >= -97.0));
    }

    #[test]
    fn generated_process_is_stationary() {
        for name in ["swell", "chop", "ripple", "ar2"] {
            let ch = ChannelModel::preset(name, 3).unwrap().with_path_loss(60.0);
            let tr = generate_trace(&ch, &cc2538(), 0.0, 10_000).unwrap();
            let first = tr.filtered(|s| s.seq < 5000);
            let second = tr.filtered(|s| s.seq >= 5000);
            let v1 = sample_acf(&first, 1).unwrap().values[0];
            let v2 = sample_acf(&second, 1).unwrap().values[0];
            assert!((v1 - v2).abs() / v1.max(v2) < 0.10, "{name}: {v1} vs {v2}");
        }
    }

    #[test]
    fn loss_boundaries() {
        let tr = generate_trace(
            &ChannelModel::preset("ar2", 1).unwrap(),
            &cc2538(),
            0.0,
            300,
        )
        .unwrap();
        let none = apply_loss(
            &tr,
            &LossModel {
                kind: LossKind::none(),
                seed: 9,
            },
        )
        .unwrap();
        assert_eq!(none, tr);
        let all = apply_loss(
            &tr,
            &LossModel {
                kind: LossKind::Bernoulli { p: 1.0 },
                seed: 9,
            },
        )
        .unwrap();
        assert!(all.is_empty());
    }

    #[test]
    fn bernoulli_rate_within_three_sigma() {
        let tr = Trace::from_values(&vec![-70.0; 10_000], 0.1).unwrap();
        let lossy = apply_loss(
            &tr,
            &LossModel {
                kind: LossKind::Bernoulli { p: 0.3 },
                seed: 2024,
            },
        )
        .unwrap();
        let realized = 1.0 - lossy.len() as f64 / 10_000.0;
        assert!((realized - 0.3).abs() < 0.015, "{realized}");
    }

    #[test]
    fn gilbert_elliott_is_bursty() {
        let tr = Trace::from_values(&vec![-70.0; 20_000], 0.1).unwrap();
        let ge = LossModel {
            kind: "ge:0.05,0.25,0.0,1.0".parse().unwrap(),
            seed: 5,
        };
        let lossy = apply_loss(&tr, &ge).unwrap();
        // Stationary bad-state share: p_gb / (p_gb + p_bg) = 1/6.
        let realized = lossy.loss_ratio();
        assert!((realized - 1.0 / 6.0).abs() < 0.03, "{realized}");
        let bursts = lossy
            .samples()
            .windows(2)
            .filter(|w| w[1].seq - w[0].seq > 1)
            .count();
        let lost = 20_000 - lossy.len();
        // Mean burst length 1 / p_bg = 4.
        let mean_burst = lost as f64 / bursts as f64;
        assert!(mean_burst > 3.0 && mean_burst < 5.0, "{mean_burst}");
    }

    #[test]
    fn loss_spec_parsing() {
        assert_eq!(
            "bernoulli:0.3".parse::<LossKind>().unwrap(),
            LossKind::Bernoulli { p: 0.3 }
        );
        assert!("bernoulli:1.3".parse::<LossKind>().is_err());
        assert!("bernoulli".parse::<LossKind>().is_err());
        assert!("ge:0.1,0.2".parse::<LossKind>().is_err());
    }

    #[test]
    fn apply_loss_preserves_survivors() {
        let tr = generate_trace(
            &ChannelModel::preset("chop", 4).unwrap(),
            &cc2538(),
            0.0,
            1000,
        )
        .unwrap();
        let lossy = apply_loss(
            &tr,
            &LossModel {
                kind: LossKind::Bernoulli { p: 0.4 },
                seed: 1,
            },
        )
        .unwrap();
        for s in lossy.samples() {
            let orig = &tr.samples()[tr.index_of_seq(s.seq).unwrap()];
            assert_eq!(s, orig);
        }
    }
}
