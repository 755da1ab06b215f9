//! Discrete-time hazard: daily rates, yearly bins, rolling trend and
//! departure peaks.
//!
//! Day `d` counts from 1 (a spell of `duration_days = d` ends on day `d`).
//! Year `k` covers days `365(k-1)+1 ..= 365k`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::OwnershipSpell;
use crate::scalar::Real;

pub const DAYS_PER_BIN: u32 = 365;
/// Years past this are reported as low-confidence.
pub const LOW_CONFIDENCE_AFTER_YEAR: u32 = 26;
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_MIN_EXCESS: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Daily,
    Yearly,
}

/// How daily hazards are pooled into a year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Events in the bin over the risk set entering it.
    #[default]
    Ratio,
    /// `1 − Π (1 − h_d)` over the bin's days.
    Product,
}

/// Hazard per bin. Bin `index[i]` is 1-based and contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HazardSeries<T> {
    pub granularity: Granularity,
    pub index: Vec<u32>,
    pub events: Vec<usize>,
    pub at_risk: Vec<usize>,
    pub rate: Vec<T>,
    /// The last bin ends before its nominal width.
    pub partial_tail: bool,
    pub low_confidence: Vec<bool>,
}

impl<T: Real> HazardSeries<T> {
    pub fn len(&self) -> usize {
        self.rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rate.is_empty()
    }

    /// Rate in bin `bin` (1-based), zero outside the series.
    pub fn rate_at(&self, bin: u32) -> T {
        bin.checked_sub(1)
            .and_then(|i| self.rate.get(i as usize))
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Same series with every rate multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        HazardSeries {
            rate: self.rate.iter().map(|&r| r * c).collect(),
            ..self.clone()
        }
    }
}

/// Daily hazard from `(duration_days, event)` pairs.
pub fn daily_hazard_durations<T: Real>(durations: &[(u32, bool)]) -> Result<HazardSeries<T>> {
    if !durations.iter().any(|&(_, e)| e) {
        return Err(Error::Precondition("hazard needs at least one event".into()));
    }
    if durations.iter().any(|&(d, _)| d == 0) {
        return Err(Error::InvalidInput("durations must be at least one day".into()));
    }
    let horizon = durations.iter().map(|&(d, _)| d).max().unwrap_or(0) as usize;
    let mut events = vec![0usize; horizon];
    let mut leaving = vec![0usize; horizon];
    for &(d, e) in durations {
        leaving[d as usize - 1] += 1;
        if e {
            events[d as usize - 1] += 1;
        }
    }
    let mut at_risk = Vec::with_capacity(horizon);
    let mut n = durations.len();
    for day in 0..horizon {
        at_risk.push(n);
        n -= leaving[day];
    }
    let rate = events
        .iter()
        .zip(&at_risk)
        .map(|(&e, &n)| T::from_usize_lossy(e) / T::from_usize_lossy(n))
        .collect();
    Ok(HazardSeries {
        granularity: Granularity::Daily,
        index: (1..=horizon as u32).collect(),
        events,
        at_risk,
        rate,
        partial_tail: false,
        low_confidence: vec![false; horizon],
    })
}

/// Daily hazard over genuine spells.
pub fn daily_hazard<T: Real>(spells: &[OwnershipSpell]) -> Result<HazardSeries<T>> {
    let durations: Vec<(u32, bool)> = spells
        .iter()
        .filter(|s| s.genuine)
        .map(|s| (s.duration_days, s.is_event()))
        .collect();
    daily_hazard_durations(&durations)
}

/// Pools a daily series into 365-day years.
pub fn annualize_hazard<T: Real>(daily: &HazardSeries<T>, how: Aggregation) -> Result<HazardSeries<T>> {
    if daily.granularity != Granularity::Daily {
        return Err(Error::InvalidInput("annualize_hazard expects a daily series".into()));
    }
    let width = DAYS_PER_BIN as usize;
    let days = daily.len();
    let years = days.div_ceil(width);
    let mut out = HazardSeries {
        granularity: Granularity::Yearly,
        index: (1..=years as u32).collect(),
        events: Vec::with_capacity(years),
        at_risk: Vec::with_capacity(years),
        rate: Vec::with_capacity(years),
        partial_tail: !days.is_multiple_of(width),
        low_confidence: (1..=years as u32).map(|y| y > LOW_CONFIDENCE_AFTER_YEAR).collect(),
    };
    for y in 0..years {
        let span = y * width..((y + 1) * width).min(days);
        let events: usize = daily.events[span.clone()].iter().sum();
        let entering = daily.at_risk[span.start];
        let rate = match how {
            Aggregation::Ratio => T::from_usize_lossy(events) / T::from_usize_lossy(entering),
            Aggregation::Product => T::one() - daily.rate[span].iter().fold(T::one(), |acc, &h| acc * (T::one() - h)),
        };
        out.events.push(events);
        out.at_risk.push(entering);
        out.rate.push(rate);
    }
    Ok(out)
}

/// Centered moving average; near the edges the window shrinks to the
/// available bins.
pub fn rolling_trend<T: Real>(series: &HazardSeries<T>, window: usize) -> Result<Vec<T>> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "window must be odd and >= 3, got {window}"
        )));
    }
    let n = series.len();
    if window > n {
        return Err(Error::Precondition(format!(
            "window {window} exceeds series length {n}"
        )));
    }
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            series.rate[lo..hi].iter().copied().sum::<T>() / T::from_usize_lossy(hi - lo)
        })
        .collect())
}

/// Interior local maxima that exceed the trend by `min_excess` (relative).
///
/// A bin is a local maximum when it is strictly above its left neighbour and
/// not below its right one, so a two-bin plateau reports its first bin.
pub fn detect_peaks<T: Real>(series: &HazardSeries<T>, trend: &[T], min_excess: T) -> Result<Vec<u32>> {
    if trend.len() != series.len() {
        return Err(Error::InvalidInput(format!(
            "trend has {} bins, series has {}",
            trend.len(),
            series.len()
        )));
    }
    let r = &series.rate;
    let mut peaks = Vec::new();
    for i in 1..r.len().saturating_sub(1) {
        let local_max = r[i] > r[i - 1] && r[i] >= r[i + 1];
        if local_max && r[i] >= trend[i] * (T::one() + min_excess) {
            peaks.push(series.index[i]);
        }
    }
    Ok(peaks)
}

/// Yearly series, trend and peaks in one bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HazardProfile<T> {
    pub yearly: HazardSeries<T>,
    pub trend: Vec<T>,
    pub peaks: Vec<u32>,
    pub window: usize,
    pub min_excess: T,
    pub aggregation: Aggregation,
}

impl<T: Real> HazardProfile<T> {
    pub fn from_daily(daily: &HazardSeries<T>, how: Aggregation, window: usize, min_excess: T) -> Result<Self> {
        let yearly = annualize_hazard(daily, how)?;
        let trend = rolling_trend(&yearly, window)?;
        let peaks = detect_peaks(&yearly, &trend, min_excess)?;
        Ok(HazardProfile {
            yearly,
            trend,
            peaks,
            window,
            min_excess,
            aggregation: how,
        })
    }

    /// `year,events,at_risk,rate,trend,peak,partial,low_confidence`
    pub fn write_table<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "year",
            "events",
            "at_risk",
            "rate",
            "trend",
            "peak",
            "partial",
            "low_confidence",
        ])?;
        let last = self.yearly.len().saturating_sub(1);
        for i in 0..self.yearly.len() {
            let year = self.yearly.index[i];
            w.write_record([
                year.to_string(),
                self.yearly.events[i].to_string(),
                self.yearly.at_risk[i].to_string(),
                format!("{:.8}", self.yearly.rate[i]),
                format!("{:.8}", self.trend[i]),
                self.peaks.contains(&year).to_string(),
                (i == last && self.yearly.partial_tail).to_string(),
                self.yearly.low_confidence[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("hazard table", e))?;
        Ok(())
    }
}
