//! RSSI observation streams.
//!
//! A [`Trace`] is an ordered, gap-aware record of per-packet received power.
//! Sequence numbers that are missing from a trace are lost packets; nothing
//! is ever interpolated into the gaps.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest received power accepted at ingestion, dBm.
pub const RSSI_MIN_DBM: f64 = -130.0;
/// Highest received power accepted at ingestion, dBm.
pub const RSSI_MAX_DBM: f64 = 20.0;

/// Explicit timestamps closer than this to `seq * nominal_interval` are
/// snapped onto the nominal grid. Matches the 6-decimal export precision.
const TIME_SNAP_S: f64 = 5e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub seq: u64,
    /// Seconds.
    pub t: f64,
    /// dBm.
    pub rssi: f64,
    /// dBm the packet was sent at, when known.
    pub tx_power: Option<f64>,
}

impl RssiSample {
    pub fn new(seq: u64, t: f64, rssi: f64) -> Self {
        Self {
            seq,
            t,
            rssi,
            tx_power: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    samples: Vec<RssiSample>,
    nominal_interval: f64,
    meta: BTreeMap<String, String>,
}

impl Trace {
    /// Builds a trace from samples already sorted by `seq`.
    pub fn new(samples: Vec<RssiSample>, nominal_interval: f64) -> Result<Self> {
        if !(nominal_interval.is_finite() && nominal_interval > 0.0) {
            return Err(Error::param(format!(
                "nominal interval must be positive, got {nominal_interval}"
            )));
        }
        for s in &samples {
            if !s.rssi.is_finite() {
                return Err(Error::InvalidTrace(format!(
                    "non-finite rssi at seq {}",
                    s.seq
                )));
            }
            if !(s.t.is_finite() && s.t >= 0.0) {
                return Err(Error::InvalidTrace(format!(
                    "bad timestamp at seq {}",
                    s.seq
                )));
            }
        }
        for w in samples.windows(2) {
            if w[1].seq <= w[0].seq {
                return Err(Error::InvalidTrace(format!(
                    "sequence numbers not strictly increasing at seq {}",
                    w[1].seq
                )));
            }
            if w[1].t <= w[0].t {
                return Err(Error::InvalidTrace(format!(
                    "time not strictly increasing at seq {}",
                    w[1].seq
                )));
            }
        }
        Ok(Self {
            samples,
            nominal_interval,
            meta: BTreeMap::new(),
        })
    }

    /// Gapless trace with `seq = i` and `t = i * nominal_interval`.
    pub fn from_values(values: &[f64], nominal_interval: f64) -> Result<Self> {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &rssi)| RssiSample::new(i as u64, i as f64 * nominal_interval, rssi))
            .collect();
        Self::new(samples, nominal_interval)
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn samples(&self) -> &[RssiSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nominal_interval(&self) -> f64 {
        self.nominal_interval
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn rssi_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.rssi)
    }

    /// Position of the sample carrying `seq`, if it was received.
    pub fn index_of_seq(&self, seq: u64) -> Option<usize> {
        self.samples.binary_search_by_key(&seq, |s| s.seq).ok()
    }

    /// `1 - received / (max_seq - min_seq + 1)`. An empty trace has no span
    /// and reports 0.
    pub fn loss_ratio(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(first), Some(last)) => {
                let span = (last.seq - first.seq + 1) as f64;
                1.0 - self.samples.len() as f64 / span
            }
            _ => 0.0,
        }
    }

    /// Elapsed time between the first and last sample.
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(first), Some(last)) => last.t - first.t,
            _ => 0.0,
        }
    }

    /// Keeps the samples for which `keep` returns true. Surviving samples are
    /// copied untouched.
    pub fn filtered(&self, mut keep: impl FnMut(&RssiSample) -> bool) -> Trace {
        Trace {
            samples: self.samples.iter().copied().filter(|s| keep(s)).collect(),
            nominal_interval: self.nominal_interval,
            meta: self.meta.clone(),
        }
    }

    /// Returns a copy with `offset_db` added to every rssi value.
    pub fn offset(&self, offset_db: f64) -> Trace {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.rssi += offset_db;
        }
        out
    }

    /// Writes the trace in the canonical CSV schema.
    ///
    /// `t_s` is always written with 6 decimals and dBm fields with 2.
    /// `tx_power_dbm` is written only when at least one sample carries it.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let with_tx = self.samples.iter().any(|s| s.tx_power.is_some());
        if with_tx {
            writeln!(out, "seq,t_s,rssi_dbm,tx_power_dbm")?;
        } else {
            writeln!(out, "seq,t_s,rssi_dbm")?;
        }
        for s in &self.samples {
            write!(out, "{},{:.6},{:.2}", s.seq, s.t, s.rssi)?;
            if with_tx {
                match s.tx_power {
                    Some(p) => write!(out, ",{p:.2}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Result of CSV ingestion: the trace plus counts of what was dropped.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub trace: Trace,
    /// Rows whose rssi fell outside `[RSSI_MIN_DBM, RSSI_MAX_DBM]`.
    pub rejected: usize,
    /// Rows overwritten by a later row with the same `seq`.
    pub duplicates: usize,
}

pub fn ingest_csv(path: impl AsRef<Path>, nominal_interval: f64) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, nominal_interval).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses the trace CSV schema `seq,t_s,rssi_dbm,tx_power_dbm` from any reader.
/// Only `seq` and `rssi_dbm` are required; column order is free.
pub fn read_csv<R: Read>(reader: R, nominal_interval: f64) -> Result<Ingested> {
    if !(nominal_interval.is_finite() && nominal_interval > 0.0) {
        return Err(Error::param(format!(
            "nominal interval must be positive, got {nominal_interval}"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);

    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e, 1)),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Empty);
    }
    let col = |name: &str| headers.iter().position(|h| h == name);
    let seq_col = col("seq").ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: "header lacks `seq` column".into(),
    })?;
    let rssi_col = col("rssi_dbm").ok_or_else(|| Error::MalformedRow {
        line: 1,
        reason: "header lacks `rssi_dbm` column".into(),
    })?;
    let t_col = col("t_s");
    let tx_col = col("tx_power_dbm");

    let mut rows = Vec::new();
    let mut rejected = 0usize;
    let mut seen_rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        seen_rows += 1;

        let field = |idx: usize| record.get(idx).unwrap_or("");
        let seq: u64 = field(seq_col).parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("bad seq `{}`", field(seq_col)),
        })?;
        let rssi = parse_f64(field(rssi_col), line, "rssi_dbm")?;
        let t = match t_col.map(field) {
            Some(s) if !s.is_empty() => {
                let t = parse_f64(s, line, "t_s")?;
                let nominal = seq as f64 * nominal_interval;
                if (t - nominal).abs() <= TIME_SNAP_S {
                    nominal
                } else {
                    t
                }
            }
            _ => seq as f64 * nominal_interval,
        };
        let tx_power = match tx_col.map(field) {
            Some(s) if !s.is_empty() => Some(parse_f64(s, line, "tx_power_dbm")?),
            _ => None,
        };

        if !(RSSI_MIN_DBM..=RSSI_MAX_DBM).contains(&rssi) {
            rejected += 1;
            continue;
        }
        rows.push(RssiSample {
            seq,
            t,
            rssi,
            tx_power,
        });
    }
    if seen_rows == 0 || rows.is_empty() {
        return Err(Error::Empty);
    }

    // Stable sort keeps file order within equal seq, so the last row wins.
    rows.sort_by_key(|s| s.seq);
    let before = rows.len();
    let mut deduped: Vec<RssiSample> = Vec::with_capacity(before);
    for s in rows {
        match deduped.last_mut() {
            Some(prev) if prev.seq == s.seq => *prev = s,
            _ => deduped.push(s),
        }
    }
    let duplicates = before - deduped.len();

    Ok(Ingested {
        trace: Trace::new(deduped, nominal_interval)?,
        rejected,
        duplicates,
    })
}

fn parse_f64(s: &str, line: u64, what: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::MalformedRow {
            line,
            reason: format!("bad {what} `{s}`"),
        }),
    }
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: Default::default(),
            source: io,
        },
        other => Error::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

/// One backward-difference slope estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativePoint {
    pub seq: u64,
    pub t: f64,
    /// dB/s.
    pub rate: f64,
    /// Sequence distance to the predecessor the slope was taken over; 1 when
    /// no packet was lost in between.
    pub span: u64,
}

/// Backward-difference slope of a trace. Entry `k` belongs to sample `k + 1`;
/// the first sample has no predecessor and thus no slope.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSeries {
    points: Vec<DerivativePoint>,
}

impl DerivativeSeries {
    pub fn points(&self) -> &[DerivativePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Slope at trace sample `sample_index`, if that sample has a predecessor.
    pub fn at_sample(&self, sample_index: usize) -> Option<&DerivativePoint> {
        sample_index.checked_sub(1).and_then(|k| self.points.get(k))
    }
}

/// `r'(t_k) = (r_k - r_{k-1}) / (t_k - t_{k-1})`, using the real elapsed time
/// when packets were lost in between.
pub fn derivative_series(trace: &Trace) -> Result<DerivativeSeries> {
    let s = trace.samples();
    if s.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: s.len(),
        });
    }
    let points = s
        .windows(2)
        .map(|w| DerivativePoint {
            seq: w[1].seq,
            t: w[1].t,
            rate: (w[1].rssi - w[0].rssi) / (w[1].t - w[0].t),
            span: w[1].seq - w[0].seq,
        })
        .collect();
    Ok(DerivativeSeries { points })
}
