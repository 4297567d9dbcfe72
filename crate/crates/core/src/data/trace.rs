use std::path::Path;

use chrono::{DateTime, NaiveDateTime, NaiveTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Timebase;
use crate::{Error, Result};

/// Per-step series covering a whole number of days.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    values: Vec<f64>,
    steps_per_day: usize,
}

impl Trace {
    pub fn new(values: Vec<f64>, steps_per_day: usize) -> Result<Self> {
        if steps_per_day == 0 || values.is_empty() || !values.len().is_multiple_of(steps_per_day) {
            return Err(Error::Config(format!(
                "trace length {} is not a positive multiple of {steps_per_day}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("trace value at step {i} is not finite")));
        }
        Ok(Trace { values, steps_per_day })
    }

    pub fn constant(value: f64, tb: &Timebase, days: usize) -> Result<Self> {
        Trace::new(vec![value; tb.steps_per_day * days.max(1)], tb.steps_per_day)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_days(&self) -> usize {
        self.values.len() / self.steps_per_day
    }

    pub fn steps_per_day(&self) -> usize {
        self.steps_per_day
    }

    pub fn day(&self, day: usize) -> &[f64] {
        let t = self.steps_per_day;
        &self.values[day * t..(day + 1) * t]
    }

    /// Value at step `t` of `day`, wrapping modulo the day length so that
    /// history windows before midnight read the end of the same day.
    pub fn at(&self, day: usize, t: isize) -> f64 {
        let steps = self.steps_per_day as isize;
        self.values[day * self.steps_per_day + t.rem_euclid(steps) as usize]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceTrace(pub Trace);

#[derive(Debug, Clone, PartialEq)]
pub struct PvTrace(pub Trace);

impl PvTrace {
    pub fn new(trace: Trace) -> Result<Self> {
        if let Some(i) = trace.values().iter().position(|v| *v < 0.0) {
            return Err(Error::Domain(format!("negative PV power at step {i}")));
        }
        Ok(PvTrace(trace))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceKind {
    Price,
    Pv,
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_local());
    }
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

/// Reads a `timestamp,value` CSV and resamples it onto the step grid by
/// piecewise-constant hold.
///
/// Rows must be evenly spaced at hourly or finer resolution, start at
/// midnight and cover whole days.
pub fn load_trace(path: impl AsRef<Path>, kind: TraceKind, tb: &Timebase) -> Result<Trace> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);

    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(parse_err(1, "expected header `timestamp,value`".into()));
    }

    let mut rows: Vec<(NaiveDateTime, f64, usize)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 fields, got {}", record.len())));
        }
        let ts =
            parse_timestamp(&record[0]).ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &record[0])))?;
        let value: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad value `{}`", &record[1])))?;
        if !value.is_finite() {
            return Err(parse_err(line, "value is not finite".into()));
        }
        if kind == TraceKind::Pv && value < 0.0 {
            return Err(Error::Domain(format!(
                "{}:{line}: negative PV power {value}",
                path.display()
            )));
        }
        rows.push((ts, value, line));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }

    let missing = |line: usize, msg: String| Error::MissingInterval {
        path: path.to_path_buf(),
        line,
        msg,
    };

    if rows[0].0.time() != NaiveTime::MIN {
        return Err(missing(rows[0].2, "first row must be at 00:00".into()));
    }
    // Resolution is the spacing of the first two rows; single-row files
    // cannot cover a day.
    if rows.len() < 2 {
        return Err(missing(rows[0].2, "a single row cannot cover a whole day".into()));
    }
    let res_secs = (rows[1].0 - rows[0].0).num_seconds();
    if res_secs <= 0 {
        return Err(parse_err(rows[1].2, "timestamps must be strictly increasing".into()));
    }
    if res_secs > 3600 {
        return Err(missing(
            rows[0].2,
            format!("spacing {res_secs}s is coarser than hourly"),
        ));
    }
    for w in rows.windows(2) {
        let gap = (w[1].0 - w[0].0).num_seconds();
        if gap <= 0 {
            return Err(parse_err(w[1].2, "timestamps must be strictly increasing".into()));
        }
        if gap != res_secs {
            return Err(missing(w[0].2, format!("gap of {gap}s, expected {res_secs}s")));
        }
    }
    let span = rows.len() as i64 * res_secs;
    let day_secs = 86_400_i64;
    if span % day_secs != 0 {
        let last = rows.last().unwrap();
        return Err(missing(
            last.2,
            format!(
                "rows cover {:.3} days, not a whole number (last row at {:02}:{:02})",
                span as f64 / day_secs as f64,
                last.0.hour(),
                last.0.minute()
            ),
        ));
    }
    let days = (span / day_secs) as usize;
    let step_secs = tb.step_minutes as i64 * 60;
    let mut values = Vec::with_capacity(days * tb.steps_per_day);
    for d in 0..days {
        for s in 0..tb.steps_per_day {
            let offset = d as i64 * day_secs + s as i64 * step_secs;
            values.push(rows[(offset / res_secs) as usize].1);
        }
    }
    Trace::new(values, tb.steps_per_day)
}

/// A typical-day hourly price profile ($/kWh) with the evening peak of
/// 0.03921 between 17:00 and 18:00 and a smaller morning shoulder.
pub const TYPICAL_HOURLY_PRICE: [f64; 24] = [
    0.0192, 0.0185, 0.0180, 0.0178, 0.0181, 0.0195, 0.0228, 0.0262, 0.0271, 0.0249, 0.0231, 0.0222, 0.0216, 0.0213,
    0.0218, 0.0236, 0.0289, 0.03921, 0.0355, 0.0301, 0.0262, 0.0236, 0.0214, 0.0199,
];

/// Seeded generator for multi-day price traces around the typical profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPrice {
    pub days: usize,
    /// Multiplier on the typical profile.
    pub scale: f64,
    /// Relative standard deviation of the per-day level and per-hour jitter.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticPrice {
    fn default() -> Self {
        SyntheticPrice {
            days: 1,
            scale: 1.0,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Seeded generator for PV traces: a half-sine between sunrise and sunset
/// peaking mid-way, with day-level cloud cover and hourly jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPv {
    pub days: usize,
    pub peak_kw: f64,
    pub sunrise_h: f64,
    pub sunset_h: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticPv {
    fn default() -> Self {
        SyntheticPv {
            days: 1,
            peak_kw: 42.92,
            sunrise_h: 8.0,
            sunset_h: 18.0,
            noise: 0.0,
            seed: 0,
        }
    }
}

fn hold_hourly(hourly: &[f64], tb: &Timebase) -> Vec<f64> {
    let days = hourly.len() / 24;
    let mut out = Vec::with_capacity(days * tb.steps_per_day);
    for d in 0..days {
        for s in 0..tb.steps_per_day {
            let hour = s * tb.step_minutes / 60;
            out.push(hourly[d * 24 + hour]);
        }
    }
    out
}

pub fn synthetic_price(params: &SyntheticPrice, tb: &Timebase) -> Result<PriceTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0f64, 1.0).expect("unit normal");
    let mut hourly = Vec::with_capacity(params.days.max(1) * 24);
    for _ in 0..params.days.max(1) {
        let level = 1.0 + params.noise * normal.sample(&mut rng);
        for base in TYPICAL_HOURLY_PRICE {
            let jitter = 1.0 + 0.5 * params.noise * normal.sample(&mut rng);
            hourly.push(params.scale * base * level * jitter);
        }
    }
    Ok(PriceTrace(Trace::new(hold_hourly(&hourly, tb), tb.steps_per_day)?))
}

pub fn synthetic_pv(params: &SyntheticPv, tb: &Timebase) -> Result<PvTrace> {
    if params.sunset_h <= params.sunrise_h || params.peak_kw < 0.0 {
        return Err(Error::Config(
            "synthetic PV needs sunrise < sunset and peak >= 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0f64, 1.0).expect("unit normal");
    let mut hourly = Vec::with_capacity(params.days.max(1) * 24);
    for _ in 0..params.days.max(1) {
        let cloud = (1.0 - params.noise * normal.sample(&mut rng).abs()).clamp(0.0, 1.0);
        for h in 0..24 {
            let x = (h as f64 - params.sunrise_h) / (params.sunset_h - params.sunrise_h);
            let shape = if (0.0..=1.0).contains(&x) {
                (std::f64::consts::PI * x).sin().max(0.0)
            } else {
                0.0
            };
            let jitter = (1.0 + 0.5 * params.noise * normal.sample(&mut rng)).max(0.0);
            let v = params.peak_kw * shape * cloud * jitter;
            // sin(pi) is ~1e-16, not zero
            hourly.push(if v < 1e-9 { 0.0 } else { v });
        }
    }
    PvTrace::new(Trace::new(hold_hourly(&hourly, tb), tb.steps_per_day)?)
}
