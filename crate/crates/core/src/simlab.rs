//! Synthetic data with known ground truth.
//!
//! Spell generators draw durations by inverse transform from a
//! [`MixtureModel`], place entries on the calendar and censor at a fixed
//! date. Survey generators plant a satisfaction dip over a tenure window.
//! Output uses the same types (and, through [`spells_to_transactions`] and
//! [`crate::survey::write_responses`], the same tables) as real data.
//!
//! Work is split into fixed chunks of [`CHUNK`] draws; chunk `c` uses
//! sub-stream `c` of the generator's seed, so results do not depend on how
//! chunks are scheduled.

use chrono::{Days, NaiveDate};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazardfit::{Kernel, MixtureModel, SUPPORT_MAX_YEARS};
use crate::ingest::{DeedKind, Neighborhood, OwnershipSpell, TransactionRecord, EARLIEST_SALE};
use crate::scalar::DAYS_PER_YEAR;
use crate::seed::{derive_seed, stream_rng, streams, StreamRng};
use crate::stats::dist::{normal_cdf, normal_quantile};
use crate::survey::{Generation, SurveyResponse};

pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EntryProcess {
    /// Entries uniform over the entry window.
    Uniform,
    /// A share of entries falls in a short wave; the rest are uniform over
    /// the remainder of the window.
    BoomWave {
        wave_start: NaiveDate,
        wave_years: f64,
        share: f64,
    },
}

impl EntryProcess {
    /// 30% of entries in 2005-2006.
    pub fn boom_wave() -> Self {
        EntryProcess::BoomWave {
            wave_start: NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date"),
            wave_years: 2.0,
            share: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub mixture: MixtureModel<f64>,
    pub n: usize,
    pub entry_process: EntryProcess,
    pub entry_start: NaiveDate,
    /// Last possible entry date (inclusive).
    pub entry_end: NaiveDate,
    /// `None` leaves every spell closed.
    pub censor_date: Option<NaiveDate>,
    pub seed: u64,
}

impl SimSpec {
    /// Uniform entries from 1984 through the day before `censor_date`.
    pub fn new(mixture: MixtureModel<f64>, n: usize, censor_date: NaiveDate, seed: u64) -> Self {
        SimSpec {
            mixture,
            n,
            entry_process: EntryProcess::Uniform,
            entry_start: EARLIEST_SALE,
            entry_end: censor_date.pred_opt().expect("date after the minimum"),
            censor_date: Some(censor_date),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("simulation needs n >= 1".into()));
        }
        if self.entry_end < self.entry_start {
            return Err(Error::Config("entry window ends before it starts".into()));
        }
        if let Some(c) = self.censor_date {
            if self.entry_end >= c {
                return Err(Error::Config(format!(
                    "last entry {} must precede censor date {c}",
                    self.entry_end
                )));
            }
        }
        if let EntryProcess::BoomWave { wave_years, share, .. } = self.entry_process {
            if !(0.0..=1.0).contains(&share) || !(wave_years > 0.0) {
                return Err(Error::Config(
                    "boom wave needs share in [0, 1] and a positive length".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One draw from a single kernel, years.
fn draw_kernel(kernel: &Kernel<f64>, rng: &mut StreamRng) -> f64 {
    let u: f64 = rng.random();
    match *kernel {
        Kernel::Weibull(w) => w.quantile(u * w.cdf(SUPPORT_MAX_YEARS)),
        Kernel::Exponential { lambda } => -lambda * (-u * (-(-SUPPORT_MAX_YEARS / lambda).exp_m1())).ln_1p(),
        Kernel::Gaussian { mu, sigma } => truncated_gaussian_quantile(u, mu, sigma),
        Kernel::Lorentzian { x0, gamma } => truncated_cauchy_quantile(u, x0, gamma),
        Kernel::PseudoVoigt { center, fwhm, eta } => {
            let v: f64 = rng.random();
            if v < eta {
                truncated_cauchy_quantile(u, center, fwhm / 2.0)
            } else {
                truncated_gaussian_quantile(u, center, fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt()))
            }
        }
    }
}

fn truncated_gaussian_quantile(u: f64, mu: f64, sigma: f64) -> f64 {
    let a = normal_cdf(-mu / sigma);
    let b = normal_cdf((SUPPORT_MAX_YEARS - mu) / sigma);
    (mu + sigma * normal_quantile(a + u * (b - a))).clamp(0.0, SUPPORT_MAX_YEARS)
}

fn truncated_cauchy_quantile(u: f64, x0: f64, gamma: f64) -> f64 {
    let a = (-x0 / gamma).atan();
    let b = ((SUPPORT_MAX_YEARS - x0) / gamma).atan();
    (x0 + gamma * (a + u * (b - a)).tan()).clamp(0.0, SUPPORT_MAX_YEARS)
}

fn draw_mixture(model: &MixtureModel<f64>, rng: &mut StreamRng) -> f64 {
    let pick: f64 = rng.random();
    let mut acc = 0.0;
    let last = model.components.len() - 1;
    for (i, c) in model.components.iter().enumerate() {
        acc += c.weight;
        if pick < acc || i == last {
            return draw_kernel(&c.kernel, rng);
        }
    }
    unreachable!("mixture has at least one component")
}

fn chunked<T: Send>(n: usize, seed: u64, stream: u64, f: impl Fn(&mut StreamRng, usize) -> T + Sync) -> Vec<T> {
    let base = derive_seed(seed, stream);
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(base, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|j| f(&mut rng, c * CHUNK + j)).collect::<Vec<_>>()
        })
        .collect()
}

/// `n` uncensored durations in years.
pub fn sample_durations(model: &MixtureModel<f64>, n: usize, seed: u64) -> Vec<f64> {
    chunked(n, seed, streams::SIM_SPELLS, |rng, _| draw_mixture(model, rng))
}

fn days_between(a: NaiveDate, b: NaiveDate) -> u64 {
    (b - a).num_days().max(0) as u64
}

fn draw_entry(spec: &SimSpec, rng: &mut StreamRng) -> NaiveDate {
    let span = days_between(spec.entry_start, spec.entry_end) + 1;
    let uniform_in = |rng: &mut StreamRng, start: u64, len: u64| start + rng.random_range(0..len.max(1));
    let offset = match spec.entry_process {
        EntryProcess::Uniform => uniform_in(rng, 0, span),
        EntryProcess::BoomWave {
            wave_start,
            wave_years,
            share,
        } => {
            let ws = days_between(spec.entry_start, wave_start).min(span);
            let wl = ((wave_years * DAYS_PER_YEAR).round() as u64).min(span - ws);
            if rng.random::<f64>() < share {
                uniform_in(rng, ws, wl)
            } else {
                // uniform over the window with the wave cut out
                let k = uniform_in(rng, 0, span - wl);
                if k >= ws {
                    k + wl
                } else {
                    k
                }
            }
        }
    };
    spec.entry_start + Days::new(offset.min(span - 1))
}

fn sim_spell(
    parcel_id: String,
    neighborhood: Neighborhood,
    entry: NaiveDate,
    years: f64,
    censor_date: Option<NaiveDate>,
) -> OwnershipSpell {
    let days = ((years * DAYS_PER_YEAR).round() as u64).clamp(1, u32::MAX as u64 / 2);
    let exit = entry + Days::new(days);
    let censored = censor_date.is_some_and(|c| exit > c);
    let (exit_date, duration) = match censor_date {
        Some(c) if censored => (None, days_between(entry, c)),
        _ => (Some(exit), days),
    };
    OwnershipSpell {
        parcel_id,
        neighborhood,
        entry_date: entry,
        exit_date,
        duration_days: duration as u32,
        censored,
        genuine: true,
        duplicate: false,
        exit_price: exit_date.map(|_| 250_000.0),
        exit_deed_kind: exit_date.map(|_| DeedKind::Warranty),
        exit_seller_is_builder: exit_date.map(|_| false),
        appraisal: None,
    }
}

/// Spells with mixture durations, censored at `spec.censor_date`.
///
/// One independent spell per parcel; nothing follows an exit.
pub fn gen_mixture_spells(spec: &SimSpec) -> Result<Vec<OwnershipSpell>> {
    spec.validate()?;
    Ok(chunked(spec.n, spec.seed, streams::SIM_SPELLS, |rng, i| {
        let years = draw_mixture(&spec.mixture, rng);
        let entry = draw_entry(spec, rng);
        let neighborhood = Neighborhood::ALL[rng.random_range(0..Neighborhood::ALL.len())];
        sim_spell(format!("SIM{i:07}"), neighborhood, entry, years, spec.censor_date)
    }))
}

/// Owner chains on `spec.n` parcels.
///
/// The first owner enters per the entry process; each later owner enters on
/// the previous exit. Every tenure is a fresh mixture draw, and the chain
/// stops at the first spell still open at the censor date, which is
/// required.
pub fn gen_parcel_histories(spec: &SimSpec) -> Result<Vec<OwnershipSpell>> {
    spec.validate()?;
    let Some(censor) = spec.censor_date else {
        return Err(Error::Config("parcel histories need a censor date".into()));
    };
    let chains = chunked(spec.n, spec.seed, streams::SIM_SPELLS, |rng, i| {
        let neighborhood = Neighborhood::ALL[rng.random_range(0..Neighborhood::ALL.len())];
        let parcel = format!("SIM{i:07}");
        let mut entry = draw_entry(spec, rng);
        let mut chain = Vec::new();
        loop {
            let years = draw_mixture(&spec.mixture, rng);
            let s = sim_spell(parcel.clone(), neighborhood, entry, years, Some(censor));
            let next = s.exit_date;
            chain.push(s);
            match next {
                Some(exit) if exit < censor => entry = exit,
                _ => break,
            }
        }
        chain
    });
    Ok(chains.into_iter().flatten().collect())
}

/// Sales that reproduce `spells` through ingestion: one sale at each entry
/// and one at each exit, unless another spell of the parcel enters that day.
/// A closed spell with no successor also yields, on ingestion, a next
/// owner's spell open from the exit date.
pub fn spells_to_transactions(spells: &[OwnershipSpell]) -> Vec<TransactionRecord> {
    let entries: std::collections::HashSet<(&str, NaiveDate)> =
        spells.iter().map(|s| (s.parcel_id.as_str(), s.entry_date)).collect();
    let mut out = Vec::with_capacity(spells.len() * 2);
    for s in spells {
        out.push(TransactionRecord {
            parcel_id: s.parcel_id.clone(),
            neighborhood: s.neighborhood,
            sale_date: s.entry_date,
            price: 250_000.0,
            deed_kind: DeedKind::Warranty,
            seller_is_builder: false,
            appraisal: s.appraisal,
            sqft: None,
        });
        if let Some(exit) = s.exit_date.filter(|&d| !entries.contains(&(s.parcel_id.as_str(), d))) {
            out.push(TransactionRecord {
                parcel_id: s.parcel_id.clone(),
                neighborhood: s.neighborhood,
                sale_date: exit,
                price: s.exit_price.unwrap_or(250_000.0),
                deed_kind: s.exit_deed_kind.unwrap_or(DeedKind::Warranty),
                seller_is_builder: s.exit_seller_is_builder.unwrap_or(false),
                appraisal: s.appraisal,
                sqft: None,
            });
        }
    }
    out
}

/// Durations (days, event flag) from a piecewise-constant yearly hazard.
///
/// In year `y` a survivor departs with probability `yearly[y-1]`, on a day
/// uniform within the 365-day bin. Survivors of the last year are censored
/// at its end.
pub fn gen_discrete_hazard(yearly: &[f64], n: usize, seed: u64) -> Result<Vec<(u32, bool)>> {
    if yearly.is_empty() || yearly.iter().any(|h| !(0.0..=1.0).contains(h)) {
        return Err(Error::InvalidInput("yearly hazards must be in [0, 1]".into()));
    }
    let horizon = 365 * yearly.len() as u32;
    Ok(chunked(n, seed, streams::SIM_SPELLS, |rng, _| {
        for (y, &h) in yearly.iter().enumerate() {
            if rng.random::<f64>() < h {
                let day = 365 * y as u32 + 1 + rng.random_range(0..365);
                return (day, true);
            }
        }
        (horizon, false)
    }))
}

/// A satisfaction dip of `depth` Likert points for tenures in `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UShape {
    pub dip_start: f64,
    pub dip_end: f64,
    pub dip_depth: f64,
}

pub const SURVEY_BASE_SATISFACTION: f64 = 4.3;
pub const SURVEY_MAX_TENURE: f64 = 30.0;
pub const SURVEY_NOISE_PROB: f64 = 0.3;

/// Survey responses with tenure uniform on `[0, 30]` years.
///
/// The satisfaction level (4.3, less the dip inside the window) is rounded
/// stochastically to a neighbouring integer so its mean is exact, then moved
/// by ±1 with probability 0.3 and clamped to 1..=5.
pub fn gen_survey_synthetic(n: usize, shape: UShape, seed: u64) -> Result<Vec<SurveyResponse>> {
    if !(0.0 < shape.dip_start && shape.dip_start < shape.dip_end) {
        return Err(Error::InvalidInput("dip needs 0 < start < end".into()));
    }
    if !(0.0..2.0).contains(&shape.dip_depth) {
        return Err(Error::InvalidInput(format!(
            "dip depth {} outside [0, 2)",
            shape.dip_depth
        )));
    }
    Ok(chunked(n, seed, streams::SIM_SURVEY, |rng, i| {
        let tenure = rng.random::<f64>() * SURVEY_MAX_TENURE;
        let in_dip = (shape.dip_start..=shape.dip_end).contains(&tenure);
        let level = SURVEY_BASE_SATISFACTION - if in_dip { shape.dip_depth } else { 0.0 };
        let mut sat = level.floor() + f64::from(u8::from(rng.random::<f64>() < level.fract()));
        if rng.random::<f64>() < SURVEY_NOISE_PROB {
            sat += if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        let satisfaction = sat.clamp(1.0, 5.0) as u8;
        let recommit = rng.random::<f64>() < 0.55 + 0.1 * (f64::from(satisfaction) - 3.0);
        SurveyResponse {
            respondent_id: format!("S{i:06}"),
            neighborhood: Neighborhood::ALL[rng.random_range(0..Neighborhood::ALL.len())],
            tenure_years: Some(tenure),
            generation: Generation::ALL[rng.random_range(0..4)],
            satisfaction,
            recommit: Some(recommit),
            minimize_fee_support: rng.random_range(1..=5),
            increase_fee_support: rng.random_range(1..=5),
            amenity_usage: Default::default(),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazardfit::WeibullParams;

    fn weibull(k: f64, lambda: f64) -> MixtureModel<f64> {
        MixtureModel::single(Kernel::Weibull(WeibullParams::new(k, lambda).unwrap())).unwrap()
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn single_spell() {
        let spells = gen_mixture_spells(&SimSpec::new(weibull(2.0, 12.0), 1, date(2025, 1, 31), 3)).unwrap();
        assert_eq!(spells.len(), 1);
        let s = &spells[0];
        assert_eq!(s.censored, s.exit_date.is_none());
        assert!(s.duration_days >= 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SimSpec::new(weibull(1.3, 9.0), 10_000, date(2025, 1, 31), 17);
        let a = gen_mixture_spells(&spec).unwrap();
        assert_eq!(a, gen_mixture_spells(&spec).unwrap());
        let other = SimSpec { seed: 18, ..spec };
        assert_ne!(a, gen_mixture_spells(&other).unwrap());
    }

    #[test]
    fn censoring_respects_date() {
        let c = date(2025, 1, 31);
        let spells = gen_mixture_spells(&SimSpec::new(weibull(1.0, 15.0), 5000, c, 5)).unwrap();
        for s in &spells {
            let end = s.exit_date.unwrap_or(c);
            assert!(end <= c);
            assert_eq!((end - s.entry_date).num_days() as u32, s.duration_days);
        }
        assert!(spells.iter().any(|s| s.censored) && spells.iter().any(|s| !s.censored));
    }

    #[test]
    fn boom_wave_share() {
        let spec = SimSpec {
            entry_process: EntryProcess::boom_wave(),
            ..SimSpec::new(weibull(1.0, 10.0), 40_000, date(2025, 1, 31), 8)
        };
        let spells = gen_mixture_spells(&spec).unwrap();
        let in_wave = spells
            .iter()
            .filter(|s| s.entry_date >= date(2005, 1, 1) && s.entry_date < date(2007, 1, 1))
            .count() as f64
            / spells.len() as f64;
        assert!((in_wave - 0.3).abs() < 0.01, "{in_wave}");
    }

    #[test]
    fn transactions_rebuild_spells() {
        let c = date(2025, 1, 31);
        let spells = gen_mixture_spells(&SimSpec::new(weibull(1.5, 8.0), 300, c, 2)).unwrap();
        let rebuilt = crate::ingest::build_spells(&spells_to_transactions(&spells), c);
        let closed = spells.iter().filter(|s| !s.censored).count();
        assert_eq!(rebuilt.len(), spells.len() + closed);
        for s in &spells {
            let r = rebuilt
                .iter()
                .find(|r| r.parcel_id == s.parcel_id && r.entry_date == s.entry_date)
                .unwrap();
            assert_eq!(r.duration_days, s.duration_days);
            assert_eq!(r.censored, s.censored);
        }
    }

    #[test]
    fn survey_generator_bounds() {
        let shape = UShape {
            dip_start: 2.5,
            dip_end: 12.0,
            dip_depth: 0.5,
        };
        let rs = gen_survey_synthetic(500, shape, 4).unwrap();
        assert_eq!(rs, gen_survey_synthetic(500, shape, 4).unwrap());
        assert!(rs.iter().all(|r| (1..=5).contains(&r.satisfaction)));
        assert!(rs.iter().all(|r| (0.0..=30.0).contains(&r.tenure_years.unwrap())));
        let bad = UShape {
            dip_start: 5.0,
            ..shape
        };
        assert!(gen_survey_synthetic(10, UShape { dip_end: 4.0, ..bad }, 1).is_err());
    }

    #[test]
    fn discrete_hazard_all_leave_in_year_one() {
        let d = gen_discrete_hazard(&[1.0, 0.5], 1000, 1).unwrap();
        assert!(d.iter().all(|&(day, e)| e && (1..=365).contains(&day)));
    }
}
