//! Second-order statistics of the received-power process.
//!
//! All moments here are central: the sample mean is removed before any
//! product is formed. Raw dBm values sit far from zero and would swamp the
//! fluctuation structure the predictor relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{DerivativeSeries, RssiSample, Trace};

/// Minimum number of contributing pairs per lag or moment.
pub const DEFAULT_MIN_PAIRS: usize = 8;

/// Slack allowed on `|normalized[k]| <= 1`.
pub const NORMALIZED_SLACK: f64 = 1e-9;

/// Normalized lag-1 autocorrelation below which the derivative identities are
/// reported as low confidence.
const SMOOTHNESS_FLOOR: f64 = 0.5;

/// Converts a lag in seconds to a whole number of sampling steps.
pub fn lag_steps(tau: f64, interval: f64) -> Result<usize> {
    let steps = (tau / interval).round();
    let on_grid = (steps * interval - tau).abs() <= 1e-9 * tau.abs().max(1.0);
    if !(tau.is_finite() && tau > 0.0 && steps >= 1.0 && on_grid) {
        return Err(Error::OffGrid { tau, interval });
    }
    Ok(steps as usize)
}

/// Index of the sample exactly `k` sequence numbers after sample `i`.
pub(crate) fn partner(samples: &[RssiSample], i: usize, k: usize) -> Option<usize> {
    let want = samples[i].seq + k as u64;
    let hi = (i + k + 1).min(samples.len());
    samples[i..hi]
        .binary_search_by_key(&want, |s| s.seq)
        .ok()
        .map(|off| i + off)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfEstimate {
    /// Lag indices `0..=max_lag`.
    pub lags: Vec<usize>,
    /// Seconds per lag step.
    pub lag_unit: f64,
    /// Biased autocovariance per lag, dB^2.
    pub values: Vec<f64>,
    pub normalized: Vec<f64>,
    pub n_pairs: Vec<usize>,
    /// First derivative of the autocovariance over lag, dB^2/s.
    pub d1: Vec<f64>,
    /// Second derivative at lag 0, dB^2/s^2.
    pub d2_at_0: f64,
}

impl AcfEstimate {
    pub fn lag_seconds(&self, k: usize) -> f64 {
        k as f64 * self.lag_unit
    }

    /// Plot-ready CSV: `lag_s,acov,acf_norm,n_pairs,d1`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lag_s,acov,acf_norm,n_pairs,d1")?;
        for &k in &self.lags {
            writeln!(
                out,
                "{:.6},{:.9},{:.9},{},{:.9}",
                self.lag_seconds(k),
                self.values[k],
                self.normalized[k],
                self.n_pairs[k],
                self.d1[k]
            )?;
        }
        Ok(())
    }
}

pub fn sample_acf(trace: &Trace, max_lag: usize) -> Result<AcfEstimate> {
    sample_acf_with(trace, max_lag, DEFAULT_MIN_PAIRS)
}

/// Mean-removed biased autocovariance over lags `0..=max_lag`.
///
/// Only pairs whose sequence numbers differ by exactly `k` contribute to lag
/// `k`; the divisor is always the total sample count.
pub fn sample_acf_with(trace: &Trace, max_lag: usize, min_pairs: usize) -> Result<AcfEstimate> {
    if max_lag < 1 {
        return Err(Error::param("max_lag must be at least 1"));
    }
    let samples = trace.samples();
    let n = samples.len();
    if n < max_lag + 2 {
        return Err(Error::TooFewSamples {
            needed: max_lag + 2,
            got: n,
        });
    }
    let mean = samples.iter().map(|s| s.rssi).sum::<f64>() / n as f64;
    let centered: Vec<f64> = samples.iter().map(|s| s.rssi - mean).collect();

    let mut values = Vec::with_capacity(max_lag + 1);
    let mut n_pairs = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            if let Some(j) = partner(samples, i, k) {
                acc += centered[i] * centered[j];
                count += 1;
            }
        }
        if count < min_pairs {
            return Err(Error::InsufficientPairs {
                lag: k,
                pairs: count,
                min: min_pairs,
            });
        }
        values.push(acc / n as f64);
        n_pairs.push(count);
    }
    if values[0] <= 0.0 {
        return Err(Error::DegenerateProcess);
    }

    let v0 = values[0];
    let mut normalized: Vec<f64> = values.iter().map(|v| v / v0).collect();
    normalized[0] = 1.0;

    let dt = trace.nominal_interval();
    let mut d1 = vec![0.0; max_lag + 1];
    for k in 1..max_lag {
        d1[k] = (values[k + 1] - values[k - 1]) / (2.0 * dt);
    }
    // One-sided at the top of the grid.
    d1[max_lag] = (values[max_lag] - values[max_lag - 1]) / dt;

    // values[-1] == values[1] by symmetry.
    let d2_at_0 = 2.0 * (values[1] - values[0]) / (dt * dt);

    Ok(AcfEstimate {
        lags: (0..=max_lag).collect(),
        lag_unit: dt,
        values,
        normalized,
        n_pairs,
        d1,
        d2_at_0,
    })
}

/// The second-order moments behind the 2x2 normal equations, all taken over
/// one index set and mean-removed.
///
/// `r` is the anchor power, `r'` its one-step backward slope and `r(t+tau)`
/// the target power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// E{r r}, dB^2.
    pub rr0: f64,
    /// E{r r'}, dB^2/s.
    pub rpr0: f64,
    /// E{r' r'}, dB^2/s^2.
    pub rprp0: f64,
    /// E{r(t+tau) r(t)}, dB^2.
    pub rr_tau: f64,
    /// E{r(t+tau) r'(t)}, dB^2/s.
    pub rrp_tau: f64,
    /// E{r(t+tau) r(t+tau)}, dB^2.
    pub target_power: f64,
    /// Lag in seconds.
    pub tau: f64,
    pub n: usize,
    pub mean_removed: bool,
    /// Removed means: anchor power (dBm), slope (dB/s), target power (dBm).
    pub mean_r: f64,
    pub mean_rp: f64,
    pub mean_target: f64,
}

impl MomentSet {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.rr0,
            self.rpr0,
            self.rprp0,
            self.rr_tau,
            self.rrp_tau,
            self.tau,
            self.mean_r,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("moment set contains non-finite values"));
        }
        if self.rr0 <= 0.0 {
            return Err(Error::DegenerateProcess);
        }
        if self.rprp0 < 0.0 {
            return Err(Error::param("negative slope power"));
        }
        Ok(())
    }
}

/// One fitting observation: centered-before-use anchor, slope and target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitTriple {
    pub r: f64,
    pub rp: f64,
    pub target: f64,
}

/// Anchors whose one-step slope and `k`-step-ahead target were both received.
///
/// Slopes taken across a gap are excluded: they average over a longer span
/// and do not share the statistics of the one-step slope.
pub fn fitting_triples(trace: &Trace, deriv: &DerivativeSeries, k: usize) -> Vec<FitTriple> {
    let samples = trace.samples();
    (1..samples.len())
        .filter_map(|i| {
            let d = deriv.at_sample(i)?;
            if d.span != 1 {
                return None;
            }
            let j = partner(samples, i, k)?;
            Some(FitTriple {
                r: samples[i].rssi,
                rp: d.rate,
                target: samples[j].rssi,
            })
        })
        .collect()
}

pub fn moment_set(trace: &Trace, deriv: &DerivativeSeries, tau: f64) -> Result<MomentSet> {
    let k = lag_steps(tau, trace.nominal_interval())?;
    moment_set_at_lag(trace, deriv, k, DEFAULT_MIN_PAIRS)
}

pub fn moment_set_at_lag(
    trace: &Trace,
    deriv: &DerivativeSeries,
    k: usize,
    min_pairs: usize,
) -> Result<MomentSet> {
    if k < 1 {
        return Err(Error::param("lag must be at least one step"));
    }
    let triples = fitting_triples(trace, deriv, k);
    let mut m = moments_from_triples(&triples, k as f64 * trace.nominal_interval())?;
    if m.n < min_pairs {
        return Err(Error::InsufficientPairs {
            lag: k,
            pairs: m.n,
            min: min_pairs,
        });
    }
    m.mean_removed = true;
    Ok(m)
}

/// Central moments of a set of fitting triples.
pub fn moments_from_triples(triples: &[FitTriple], tau: f64) -> Result<MomentSet> {
    let n = triples.len();
    if n == 0 {
        return Err(Error::InsufficientPairs {
            lag: 0,
            pairs: 0,
            min: 1,
        });
    }
    let nf = n as f64;
    let mean_r = triples.iter().map(|t| t.r).sum::<f64>() / nf;
    let mean_rp = triples.iter().map(|t| t.rp).sum::<f64>() / nf;
    let mean_target = triples.iter().map(|t| t.target).sum::<f64>() / nf;

    let mut acc = [0.0f64; 6];
    for t in triples {
        let x = t.r - mean_r;
        let d = t.rp - mean_rp;
        let y = t.target - mean_target;
        acc[0] += x * x;
        acc[1] += x * d;
        acc[2] += d * d;
        acc[3] += y * x;
        acc[4] += y * d;
        acc[5] += y * y;
    }
    let [rr0, rpr0, rprp0, rr_tau, rrp_tau, target_power] = acc.map(|a| a / nf);
    if rr0 <= 0.0 {
        return Err(Error::DegenerateProcess);
    }
    Ok(MomentSet {
        rr0,
        rpr0,
        rprp0,
        rr_tau,
        rrp_tau,
        target_power,
        tau,
        n,
        mean_removed: true,
        mean_r,
        mean_rp,
        mean_target,
    })
}

/// How far the directly estimated moments sit from the values implied by
/// differentiating the autocovariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// Sign `s` in `E{r(t+tau) r'(t)} = s * dR/dtau` that fits the data best.
    pub sign: f64,
    /// `|rrp_tau - s * d1(tau)| / R(0)`.
    pub cross_deviation: f64,
    /// `|rprp0 + R''(0)| / R(0)`.
    pub slope_power_deviation: f64,
    /// Set when the process decorrelates within one step, so the finite
    /// differences over lag say little about the true derivatives.
    pub low_confidence: bool,
}

/// Diagnostic only; fitting never depends on it.
pub fn check_derivative_identities(acf: &AcfEstimate, m: &MomentSet) -> Result<IdentityReport> {
    let k = lag_steps(m.tau, acf.lag_unit)?;
    if k >= acf.d1.len() {
        return Err(Error::param(format!(
            "lag {k} outside the ACF grid (max {})",
            acf.d1.len() - 1
        )));
    }
    let scale = acf.values[0];
    let plus = (m.rrp_tau - acf.d1[k]).abs() / scale;
    let minus = (m.rrp_tau + acf.d1[k]).abs() / scale;
    let (sign, cross_deviation) = if plus <= minus {
        (1.0, plus)
    } else {
        (-1.0, minus)
    };
    Ok(IdentityReport {
        sign,
        cross_deviation,
        slope_power_deviation: (m.rprp0 + acf.d2_at_0).abs() / scale,
        low_confidence: acf.normalized[1] < SMOOTHNESS_FLOOR,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::derivative_series;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                -80.0 + {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                } * 2.0
            })
            .collect::<Vec<f64>>()
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let w: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + w;
                -75.0 + x
            })
            .collect()
    }

    fn sinusoid(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 0.2 * i as f64 * 0.1).sin())
            .collect()
    }

    #[test]
    fn lag_grid() {
        assert_eq!(lag_steps(0.3, 0.1).unwrap(), 3);
        assert_eq!(lag_steps(1.5, 0.5).unwrap(), 3);
        assert!(matches!(lag_steps(0.15, 0.1), Err(Error::OffGrid { .. })));
        assert!(lag_steps(0.0, 0.1).is_err());
    }

    /// Closed form: the biased ACF of a sampled sinusoid tends to cos(w k dt).
    #[test]
    fn sinusoid_acf_matches_cosine() {
        let tr = Trace::from_values(&sinusoid(2000), 0.1).unwrap();
        let acf = sample_acf(&tr, 25).unwrap();
        for k in 0..=25 {
            let expected = (2.0 * std::f64::consts::PI * 0.2 * k as f64 * 0.1).cos();
            assert!(
                (acf.normalized[k] - expected).abs() < 0.02,
                "lag {k}: {} vs {expected}",
                acf.normalized[k]
            );
        }
        assert!((acf.normalized[12] - 0.0628).abs() < 0.02);
        assert_eq!(acf.normalized[0], 1.0);
        assert_eq!(acf.d1[0], 0.0);
    }

    /// Direct double-loop summation against the pair-finding implementation.
    #[test]
    fn acf_matches_direct_summation() {
        let v = ar1(300, 0.8, 3);
        let tr = Trace::from_values(&v, 0.1).unwrap();
        let acf = sample_acf(&tr, 10).unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for k in 0..=10 {
            let mut acc = 0.0;
            for i in 0..v.len() - k {
                acc += (v[i] - mean) * (v[i + k] - mean);
            }
            let direct = acc / v.len() as f64;
            assert!((acf.values[k] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn white_noise_decorrelates() {
        let tr = Trace::from_values(&white(2000, 11), 0.1).unwrap();
        let acf = sample_acf(&tr, 20).unwrap();
        let bound = 3.0 / (2000f64).sqrt();
        for k in 1..=20 {
            assert!(
                acf.normalized[k].abs() < bound,
                "lag {k}: {}",
                acf.normalized[k]
            );
        }
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let tr = Trace::from_values(&[-70.0; 50], 0.1).unwrap();
        assert!(matches!(sample_acf(&tr, 3), Err(Error::DegenerateProcess)));
    }

    #[test]
    fn sparse_lag_reports_lag() {
        // Even seqs only: odd lags have no pairs.
        let samples = (0..40)
            .map(|i| RssiSample::new(2 * i, 0.2 * i as f64, (i as f64).sin()))
            .collect();
        let tr = Trace::new(samples, 0.1).unwrap();
        match sample_acf(&tr, 2) {
            Err(Error::InsufficientPairs {
                lag: 1, pairs: 0, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ar1_moment_ratio() {
        let tr = Trace::from_values(&ar1(5000, 0.9, 5), 0.1).unwrap();
        let d = derivative_series(&tr).unwrap();
        let m = moment_set(&tr, &d, 0.1).unwrap();
        assert!(
            (m.rr_tau / m.rr0 - 0.9).abs() < 0.05,
            "{}",
            m.rr_tau / m.rr0
        );
    }

    #[test]
    fn affine_trace_has_no_slope_power() {
        let v: Vec<f64> = (0..100).map(|i| -70.0 + i as f64 * 0.1).collect();
        let tr = Trace::from_values(&v, 0.1).unwrap();
        let d = derivative_series(&tr).unwrap();
        let m = moment_set(&tr, &d, 0.1).unwrap();
        assert!(m.rprp0.abs() < 1e-20);
        assert!(m.rrp_tau.abs() < 1e-10);
        assert!((m.mean_rp - 1.0).abs() < 1e-9);
    }

    #[test]
    fn white_noise_cross_moment_small() {
        let tr = Trace::from_values(&white(4000, 2), 0.1).unwrap();
        let d = derivative_series(&tr).unwrap();
        let m = moment_set(&tr, &d, 0.1).unwrap();
        // sd of the product of two independent N(0, 4) is 4
        let bound = 3.0 * 4.0 / (m.n as f64).sqrt();
        assert!(m.rr_tau.abs() < bound);
    }

    #[test]
    fn moment_set_rejects_off_grid_and_thin_support() {
        let tr = Trace::from_values(&white(100, 1), 0.1).unwrap();
        let d = derivative_series(&tr).unwrap();
        assert!(matches!(
            moment_set(&tr, &d, 0.25),
            Err(Error::OffGrid { .. })
        ));
        let short = Trace::from_values(&white(8, 1), 0.1).unwrap();
        let d = derivative_series(&short).unwrap();
        assert!(matches!(
            moment_set(&short, &d, 0.1),
            Err(Error::InsufficientPairs { .. })
        ));
    }

    #[test]
    fn moment_set_agrees_with_acf_on_identical_index_set() {
        // With the same centered values and pair set, rr0 and rr_tau are the
        // lag-0 and lag-k biased autocovariances of the anchor sequence.
        let v = ar1(400, 0.7, 9);
        let tr = Trace::from_values(&v, 0.1).unwrap();
        let d = derivative_series(&tr).unwrap();
        let m = moment_set(&tr, &d, 0.2).unwrap();
        let anchors = &v[1..v.len() - 2];
        let targets = &v[3..];
        let n = anchors.len() as f64;
        let ma = anchors.iter().sum::<f64>() / n;
        let mt = targets.iter().sum::<f64>() / n;
        let r0 = anchors.iter().map(|a| (a - ma) * (a - ma)).sum::<f64>() / n;
        let rk = anchors
            .iter()
            .zip(targets)
            .map(|(a, t)| (a - ma) * (t - mt))
            .sum::<f64>()
            / n;
        assert!((m.rr0 - r0).abs() <= 1e-9 * r0);
        assert!((m.rr_tau - rk).abs() <= 1e-9 * r0);
    }

    #[test]
    fn gap_spanning_slopes_are_excluded() {
        let tr = Trace::from_values(&ar1(200, 0.9, 4), 0.1).unwrap();
        let lossy = tr.filtered(|s| s.seq % 7 != 3);
        let d = derivative_series(&lossy).unwrap();
        let triples = fitting_triples(&lossy, &d, 1);
        // Every anchor needs seq-1 and seq+1 present.
        let expected = (1..199u64)
            .filter(|s| ![s - 1, *s, s + 1].iter().any(|q| q % 7 == 3))
            .count();
        assert_eq!(triples.len(), expected);
    }

    #[test]
    fn identities_on_sinusoid() {
        let tr = Trace::from_values(&sinusoid(2000), 0.1).unwrap();
        let acf = sample_acf(&tr, 10).unwrap();
        let d = derivative_series(&tr).unwrap();
        for k in 1..=3 {
            let m = moment_set_at_lag(&tr, &d, k, 8).unwrap();
            let rep = check_derivative_identities(&acf, &m).unwrap();
            assert!(rep.cross_deviation < 0.15, "{rep:?}");
            assert!(rep.slope_power_deviation < 0.15, "{rep:?}");
            assert!(!rep.low_confidence);
        }
    }

    #[test]
    fn identities_flag_white_noise() {
        let tr = Trace::from_values(&white(2000, 8), 0.1).unwrap();
        let acf = sample_acf(&tr, 5).unwrap();
        let d = derivative_series(&tr).unwrap();
        let m = moment_set(&tr, &d, 0.1).unwrap();
        assert!(
            check_derivative_identities(&acf, &m)
                .unwrap()
                .low_confidence
        );
    }

    #[test]
    fn identities_on_constant_slope() {
        let v: Vec<f64> = (0..20_000).map(|i| -70.0 + 0.5 * i as f64 * 0.1).collect();
        let tr = Trace::from_values(&v, 0.1).unwrap();
        let acf = sample_acf(&tr, 5).unwrap();
        let d = derivative_series(&tr).unwrap();
        let m = moment_set(&tr, &d, 0.1).unwrap();
        assert!(m.rprp0.abs() < 1e-18);
        let rep = check_derivative_identities(&acf, &m).unwrap();
        // Only the biased estimator's edge term remains, ~6 / (N dt^2) of R(0).
        assert!(rep.slope_power_deviation < 0.05, "{rep:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalized_acf_bounded(
                values in prop::collection::vec(-100.0f64..-40.0, 40..120),
                drop in prop::collection::vec(any::<bool>(), 120),
            ) {
                let tr = Trace::from_values(&values, 0.1).unwrap();
                let lossy = tr.filtered(|s| s.seq == 0 || !drop[s.seq as usize] || s.seq % 3 == 0);
                if let Ok(acf) = sample_acf_with(&lossy, 4, 1) {
                    prop_assert_eq!(acf.normalized[0], 1.0);
                    prop_assert_eq!(acf.d1[0], 0.0);
                    for v in &acf.normalized {
                        prop_assert!(v.abs() <= 1.0 + NORMALIZED_SLACK);
                    }
                    let again = sample_acf_with(&lossy, 4, 1).unwrap();
                    prop_assert_eq!(acf, again);
                }
            }
        }
    }
}
