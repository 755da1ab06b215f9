//! Product-limit survival estimation, median tenure, bootstrap intervals,
//! Nelson-Aalen cumulative hazard and the k-group log-rank test.
//!
//! Estimators work on a [`SurvivalSample`] of `(time, event)` pairs in any
//! unit. Samples built from spells are in days, and [`MedianTenure::years`]
//! converts with 365.25 days per year.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::OwnershipSpell;
use crate::linalg;
use crate::scalar::{days_to_years, total_cmp, Real};
use crate::seed::stream_rng;
use crate::stats::{dist, Method, TestFlag, TestResult};

use rand::Rng;

/// Right-censored durations: `events[i]` is false for a censored observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SurvivalSample<T> {
    pub times: Vec<T>,
    pub events: Vec<bool>,
}

impl<T: Real> SurvivalSample<T> {
    pub fn new(times: Vec<T>, events: Vec<bool>) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::InvalidInput(format!(
                "{} times but {} event flags",
                times.len(),
                events.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite() || *t < T::zero()) {
            return Err(Error::InvalidInput(format!("time {i} is negative or not finite")));
        }
        Ok(SurvivalSample { times, events })
    }

    /// Genuine spells only, durations in days.
    pub fn from_spells(spells: &[OwnershipSpell]) -> Self {
        let (times, events) = spells
            .iter()
            .filter(|s| s.genuine)
            .map(|s| (T::from_u32(s.duration_days).expect("day count"), s.is_event()))
            .unzip();
        SurvivalSample { times, events }
    }

    /// Same sample with every duration multiplied by `factor`.
    pub fn rescaled(&self, factor: T) -> Self {
        SurvivalSample {
            times: self.times.iter().map(|&t| t * factor).collect(),
            events: self.events.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }
}

/// Distinct times with event and censoring counts, ascending.
#[derive(Debug, Clone)]
struct Tabulation<T> {
    times: Vec<T>,
    deaths: Vec<usize>,
    censored: Vec<usize>,
    /// Slot of each input observation in `times`.
    slot: Vec<usize>,
}

fn tabulate<T: Real>(sample: &SurvivalSample<T>) -> Tabulation<T> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| total_cmp(&sample.times[a], &sample.times[b]));
    let mut tab = Tabulation {
        times: Vec::new(),
        deaths: Vec::new(),
        censored: Vec::new(),
        slot: vec![0; sample.len()],
    };
    for i in order {
        let t = sample.times[i];
        if tab.times.last() != Some(&t) {
            tab.times.push(t);
            tab.deaths.push(0);
            tab.censored.push(0);
        }
        let k = tab.times.len() - 1;
        if sample.events[i] {
            tab.deaths[k] += 1;
        } else {
            tab.censored[k] += 1;
        }
        tab.slot[i] = k;
    }
    tab
}

/// Kaplan-Meier step function with Greenwood log-log bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SurvivalCurve<T> {
    /// Distinct event times, ascending. `S(t) = 1` before the first one.
    pub event_times: Vec<T>,
    pub survival: Vec<T>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    pub ci_lower: Vec<T>,
    pub ci_upper: Vec<T>,
    pub n: usize,
}

impl<T: Real> SurvivalCurve<T> {
    /// `S(t)`, right-continuous.
    pub fn at(&self, t: T) -> T {
        let k = self.event_times.partition_point(|&e| e <= t);
        if k == 0 {
            T::one()
        } else {
            self.survival[k - 1]
        }
    }

    pub fn is_flat(&self) -> bool {
        self.event_times.is_empty()
    }

    /// Writes `time_years,survival,at_risk,events,ci_lo,ci_hi` with an
    /// initial row at time zero. `to_years` converts curve time units.
    pub fn write_table<W: Write>(&self, writer: W, to_years: impl Fn(T) -> T) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time_years", "survival", "at_risk", "events", "ci_lo", "ci_hi"])?;
        w.write_record(["0", "1", &self.n.to_string(), "0", "1", "1"])?;
        for i in 0..self.event_times.len() {
            w.write_record([
                format!("{:.6}", to_years(self.event_times[i])),
                format!("{:.6}", self.survival[i]),
                self.at_risk[i].to_string(),
                self.events[i].to_string(),
                format!("{:.6}", self.ci_lower[i]),
                format!("{:.6}", self.ci_upper[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<survival table>", e))?;
        Ok(())
    }
}

/// Two-sided standard-normal quantile for a 95% band.
const Z_95: f64 = 1.959963984540054;

/// Product-limit estimator. Events at a tied time are processed before
/// censorings at that time.
pub fn kaplan_meier_sample<T: Real>(sample: &SurvivalSample<T>) -> Result<SurvivalCurve<T>> {
    if sample.is_empty() {
        return Err(Error::Precondition(
            "Kaplan-Meier needs at least one observation".into(),
        ));
    }
    let tab = tabulate(sample);
    let z = T::lit(Z_95);
    let mut curve = SurvivalCurve {
        event_times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        ci_lower: Vec::new(),
        ci_upper: Vec::new(),
        n: sample.len(),
    };
    let mut n_risk = sample.len();
    let mut s = T::one();
    let mut greenwood = T::zero();
    for k in 0..tab.times.len() {
        let d = tab.deaths[k];
        if d > 0 {
            let (nf, df) = (T::from_usize_lossy(n_risk), T::from_usize_lossy(d));
            s *= T::one() - df / nf;
            if n_risk > d {
                greenwood += df / (nf * (nf - df));
            }
            let (lo, hi) = log_log_band(s, greenwood, z);
            curve.event_times.push(tab.times[k]);
            curve.survival.push(s);
            curve.at_risk.push(n_risk);
            curve.events.push(d);
            curve.ci_lower.push(lo);
            curve.ci_upper.push(hi);
        }
        n_risk -= d + tab.censored[k];
    }
    Ok(curve)
}

fn log_log_band<T: Real>(s: T, greenwood: T, z: T) -> (T, T) {
    if s <= T::zero() || s >= T::one() {
        return (s, s);
    }
    let log_s = s.ln();
    let se = greenwood.sqrt() / log_s.abs();
    (s.powf((z * se).exp()), s.powf((-z * se).exp()))
}

/// Kaplan-Meier over the genuine spells, time in days.
pub fn kaplan_meier<T: Real>(spells: &[OwnershipSpell]) -> Result<SurvivalCurve<T>> {
    kaplan_meier_sample(&SurvivalSample::from_spells(spells))
}

/// Median of a survival curve plus an optional interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MedianTenure<T> {
    /// Smallest event time with `S(t) <= 0.5`; `None` when not reached.
    pub value: Option<T>,
    pub ci_lower: Option<T>,
    pub ci_upper: Option<T>,
    /// More than 10% of bootstrap resamples never reached 0.5.
    pub unstable: bool,
    pub not_reached_fraction: Option<f64>,
}

impl<T: Real> MedianTenure<T> {
    pub fn is_reached(&self) -> bool {
        self.value.is_some()
    }

    /// Converts a day-based median to years.
    pub fn years(&self) -> MedianTenure<T> {
        MedianTenure {
            value: self.value.map(days_to_years),
            ci_lower: self.ci_lower.map(days_to_years),
            ci_upper: self.ci_upper.map(days_to_years),
            ..self.clone()
        }
    }
}

fn half_reached<T: Real>(s: T) -> bool {
    s <= T::lit(0.5) + T::epsilon() * T::lit(8.0)
}

pub fn median_tenure<T: Real>(curve: &SurvivalCurve<T>) -> MedianTenure<T> {
    let value = curve
        .survival
        .iter()
        .position(|&s| half_reached(s))
        .map(|i| curve.event_times[i]);
    MedianTenure {
        value,
        ci_lower: None,
        ci_upper: None,
        unstable: false,
        not_reached_fraction: None,
    }
}

/// Precomputed layout for fast resampling: resampled KM is a walk over the
/// original distinct times with multiplicities.
pub(crate) struct Resampler<T> {
    tab: Tabulation<T>,
    events: Vec<bool>,
}

impl<T: Real> Resampler<T> {
    pub(crate) fn new(sample: &SurvivalSample<T>) -> Self {
        Resampler {
            tab: tabulate(sample),
            events: sample.events.clone(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.events.len()
    }

    /// Median of one with-replacement resample, `None` when not reached.
    pub(crate) fn resampled_median<R: Rng>(&self, rng: &mut R, scratch: &mut (Vec<usize>, Vec<usize>)) -> Option<T> {
        let n = self.len();
        let slots = self.tab.times.len();
        let (deaths, cens) = scratch;
        deaths.clear();
        deaths.resize(slots, 0);
        cens.clear();
        cens.resize(slots, 0);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let k = self.tab.slot[i];
            if self.events[i] {
                deaths[k] += 1;
            } else {
                cens[k] += 1;
            }
        }
        let mut n_risk = n;
        let mut s = T::one();
        for k in 0..slots {
            if deaths[k] > 0 {
                s *= T::one() - T::from_usize_lossy(deaths[k]) / T::from_usize_lossy(n_risk);
                if half_reached(s) {
                    return Some(self.tab.times[k]);
                }
            }
            n_risk -= deaths[k] + cens[k];
        }
        None
    }
}

/// Percentile bootstrap interval for the median.
///
/// Replicate `b` draws from `stream_rng(seed, b)`, so the result is
/// identical for any rayon pool size.
pub fn bootstrap_median_ci<T: Real>(
    sample: &SurvivalSample<T>,
    replicates: usize,
    seed: u64,
    level: f64,
) -> Result<MedianTenure<T>> {
    if replicates < 200 {
        return Err(Error::Precondition(format!(
            "bootstrap needs at least 200 replicates, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("level {level} outside (0, 1)")));
    }
    let point = median_tenure(&kaplan_meier_sample(sample)?);
    let resampler = Resampler::new(sample);

    let medians: Vec<Option<T>> = (0..replicates as u64)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |scratch, b| {
                let mut rng = stream_rng(seed, b);
                resampler.resampled_median(&mut rng, scratch)
            },
        )
        .collect();

    let not_reached = medians.iter().filter(|m| m.is_none()).count();
    let mut sorted: Vec<T> = medians.iter().map(|m| m.unwrap_or(T::infinity())).collect();
    sorted.sort_by(total_cmp);
    let finite = |v: T| if v.is_finite() { Some(v) } else { None };
    let alpha = (1.0 - level) / 2.0;
    let frac = not_reached as f64 / replicates as f64;
    Ok(MedianTenure {
        value: point.value,
        ci_lower: finite(percentile_sorted(&sorted, alpha)),
        ci_upper: finite(percentile_sorted(&sorted, 1.0 - alpha)),
        unstable: frac > 0.10,
        not_reached_fraction: Some(frac),
    })
}

/// Bootstrap median interval over genuine spells, days.
pub fn bootstrap_median_ci_spells<T: Real>(
    spells: &[OwnershipSpell],
    replicates: usize,
    seed: u64,
    level: f64,
) -> Result<MedianTenure<T>> {
    bootstrap_median_ci(&SurvivalSample::from_spells(spells), replicates, seed, level)
}

/// Inverse-ECDF percentile of sorted data.
pub(crate) fn percentile_sorted<T: Copy>(sorted: &[T], p: f64) -> T {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Nelson-Aalen `H(t) = Σ d_i / n_i` over event times `<= t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CumulativeHazard<T> {
    pub event_times: Vec<T>,
    pub hazard: Vec<T>,
}

impl<T: Real> CumulativeHazard<T> {
    pub fn at(&self, t: T) -> T {
        let k = self.event_times.partition_point(|&e| e <= t);
        if k == 0 {
            T::zero()
        } else {
            self.hazard[k - 1]
        }
    }
}

pub fn nelson_aalen_sample<T: Real>(sample: &SurvivalSample<T>) -> CumulativeHazard<T> {
    let tab = tabulate(sample);
    let mut out = CumulativeHazard {
        event_times: Vec::new(),
        hazard: Vec::new(),
    };
    let mut n_risk = sample.len();
    let mut h = T::zero();
    for k in 0..tab.times.len() {
        if tab.deaths[k] > 0 {
            h += T::from_usize_lossy(tab.deaths[k]) / T::from_usize_lossy(n_risk);
            out.event_times.push(tab.times[k]);
            out.hazard.push(h);
        }
        n_risk -= tab.deaths[k] + tab.censored[k];
    }
    out
}

pub fn nelson_aalen<T: Real>(spells: &[OwnershipSpell]) -> CumulativeHazard<T> {
    nelson_aalen_sample(&SurvivalSample::from_spells(spells))
}

/// Log-rank observed/expected bookkeeping, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LogRankDetail<T> {
    pub observed: Vec<T>,
    pub expected: Vec<T>,
    pub variance: Vec<Vec<T>>,
}

/// k-group log-rank test, chi-square with `k - 1` degrees of freedom.
///
/// A group without events still enters every risk set; it is flagged with
/// [`TestFlag::ZeroEventGroup`].
pub fn log_rank_test<T: Real>(groups: &[SurvivalSample<T>]) -> Result<(TestResult<T>, LogRankDetail<T>)> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::Precondition("log-rank needs at least two groups".into()));
    }
    let mut pooled: Vec<(T, bool, usize)> = Vec::new();
    for (g, sample) in groups.iter().enumerate() {
        if sample.is_empty() {
            return Err(Error::Precondition(format!("log-rank group {g} is empty")));
        }
        pooled.extend(sample.times.iter().zip(&sample.events).map(|(&t, &e)| (t, e, g)));
    }
    if pooled.iter().all(|p| !p.1) {
        return Err(Error::Precondition("log-rank needs at least one event".into()));
    }
    pooled.sort_by(|a, b| total_cmp(&a.0, &b.0));

    let mut at_risk: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let mut observed = vec![T::zero(); k];
    let mut expected = vec![T::zero(); k];
    let mut var = linalg::zeros::<T>(k, k);
    let mut deaths = vec![0usize; k];
    let mut leaving = vec![0usize; k];

    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i].0;
        deaths.iter_mut().for_each(|d| *d = 0);
        leaving.iter_mut().for_each(|d| *d = 0);
        while i < pooled.len() && pooled[i].0 == t {
            let (_, event, g) = pooled[i];
            if event {
                deaths[g] += 1;
            }
            leaving[g] += 1;
            i += 1;
        }
        let d_tot: usize = deaths.iter().sum();
        let n_tot: usize = at_risk.iter().sum();
        if d_tot > 0 {
            let (d, n) = (T::from_usize_lossy(d_tot), T::from_usize_lossy(n_tot));
            let spread = if n_tot > 1 {
                d * (n - d) / (n - T::one())
            } else {
                T::zero()
            };
            for a in 0..k {
                let na = T::from_usize_lossy(at_risk[a]) / n;
                observed[a] += T::from_usize_lossy(deaths[a]);
                expected[a] += d * na;
                for b in 0..k {
                    let nb = T::from_usize_lossy(at_risk[b]) / n;
                    let delta = if a == b { T::one() } else { T::zero() };
                    var[a][b] += spread * na * (delta - nb);
                }
            }
        }
        for g in 0..k {
            at_risk[g] -= leaving[g];
        }
    }

    let diff: Vec<T> = observed[..k - 1]
        .iter()
        .zip(&expected[..k - 1])
        .map(|(&o, &e)| o - e)
        .collect();
    let reduced: linalg::Matrix<T> = var[..k - 1].iter().map(|r| r[..k - 1].to_vec()).collect();
    let df = (k - 1) as f64;
    let mut result = match linalg::invert(&reduced, T::lit(1e-12)) {
        Ok(inv) => {
            let stat = linalg::quad_form(&inv, &diff).max(T::zero());
            TestResult::new(Method::LogRank, stat, dist::chi2_sf(stat.as_f64(), df), Some(df))
        }
        Err(_) => TestResult::degenerate(Method::LogRank, T::zero(), 1.0, Some(df)),
    };
    for (g, sample) in groups.iter().enumerate() {
        if sample.n_events() == 0 {
            result.flags.push(TestFlag::ZeroEventGroup(g));
        }
    }
    Ok((
        result,
        LogRankDetail {
            observed,
            expected,
            variance: var,
        },
    ))
}

/// Log-rank over genuine spell sets, time in days.
pub fn log_rank_spells<T: Real>(groups: &[&[OwnershipSpell]]) -> Result<TestResult<T>> {
    let samples: Vec<SurvivalSample<T>> = groups.iter().map(|g| SurvivalSample::from_spells(g)).collect();
    log_rank_test(&samples).map(|(r, _)| r)
}
