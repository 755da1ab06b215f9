//! Pre/post-cutoff impact index.
//!
//! The index is the relative drop in Kaplan-Meier median tenure, weighted by
//! the bootstrap probability that the post-cutoff median is the smaller one:
//!
//! ```text
//! CII = (MT_pre - MT_post) / MT_pre * Pr(MT_post < MT_pre)
//! ```

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Neighborhood, OwnershipSpell, PeriodSplit};
use crate::scalar::{Real, DAYS_PER_YEAR};
use crate::seed::{derive_seed, stream_rng, streams};
use crate::stats::TestFlag;
use crate::survival::{kaplan_meier_sample, log_rank_test, median_tenure, Resampler, SurvivalSample};

pub const MIN_REPLICATES: usize = 1000;
/// Attempts allowed per requested replicate before giving up on redraws.
pub const ATTEMPT_FACTOR: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiiFlag {
    /// Pre-cutoff median not reached; the index is undefined.
    PreMedianNotReached,
    PostMedianNotReached,
    /// Fewer valid replicates than requested within the attempt cap.
    PartialBootstrap {
        valid: usize,
    },
    PValueClamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorWeight {
    pub weight: f64,
    pub valid: usize,
    pub attempts: usize,
}

/// Bootstrap probability that the post-cutoff median is below the pre one.
///
/// Each attempt resamples both sets independently. Attempts where either
/// median is not reached are discarded and redrawn, up to
/// `3 * replicates` attempts in total. Equal medians count one half.
///
/// Attempt `a` uses its own sub-stream, and the first `replicates` valid
/// attempts in index order are kept, so the weight does not depend on the
/// thread count.
pub fn posterior_weight_sample<T: Real>(
    pre: &SurvivalSample<T>,
    post: &SurvivalSample<T>,
    replicates: usize,
    seed: u64,
) -> Result<PosteriorWeight> {
    if pre.is_empty() || post.is_empty() {
        return Err(Error::Precondition("both periods need at least one spell".into()));
    }
    if replicates < MIN_REPLICATES {
        return Err(Error::Precondition(format!(
            "posterior weight needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    let base = derive_seed(seed, streams::POSTERIOR_WEIGHT);
    let (rs_pre, rs_post) = (Resampler::new(pre), Resampler::new(post));
    let cap = ATTEMPT_FACTOR * replicates;

    let mut score = 0.0;
    let mut valid = 0;
    let mut attempts = 0;
    while valid < replicates && attempts < cap {
        let batch = (replicates - valid).min(cap - attempts);
        let outcomes: Vec<Option<f64>> = (attempts..attempts + batch)
            .into_par_iter()
            .map_init(
                || (Vec::new(), Vec::new()),
                |scratch, a| {
                    let mut rng = stream_rng(base, a as u64);
                    let m_pre = rs_pre.resampled_median(&mut rng, scratch)?;
                    let m_post = rs_post.resampled_median(&mut rng, scratch)?;
                    Some(if m_post < m_pre {
                        1.0
                    } else if m_post == m_pre {
                        0.5
                    } else {
                        0.0
                    })
                },
            )
            .collect();
        attempts += batch;
        for o in outcomes.into_iter().flatten() {
            score += o;
            valid += 1;
        }
    }
    if valid == 0 {
        return Err(Error::Domain(format!(
            "no resample reached both medians in {attempts} attempts"
        )));
    }
    Ok(PosteriorWeight {
        weight: score / valid as f64,
        valid,
        attempts,
    })
}

/// [`posterior_weight_sample`] over genuine spells.
pub fn posterior_weight(pre: &[OwnershipSpell], post: &[OwnershipSpell], replicates: usize, seed: u64) -> Result<f64> {
    let (a, b) = (
        SurvivalSample::<f64>::from_spells(pre),
        SurvivalSample::from_spells(post),
    );
    Ok(posterior_weight_sample(&a, &b, replicates, seed)?.weight)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiiResult<T> {
    /// Medians in the samples' time unit (years for spell input).
    pub pre_mt_years: Option<T>,
    pub post_mt_years: Option<T>,
    pub relative_change: Option<T>,
    /// Not computed when either median is missing.
    pub posterior_weight: Option<f64>,
    pub cii: Option<T>,
    /// Index rounded to one decimal.
    pub cii_rounded: Option<f64>,
    pub p_value_logrank: f64,
    pub neg_log2_p: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<CiiFlag>,
}

impl<T: Real> CiiResult<T> {
    /// Assembles the index from its ingredients.
    pub fn from_parts(pre: Option<T>, post: Option<T>, weight: Option<f64>, p_value: f64) -> Self {
        let relative_change = match (pre, post) {
            (Some(a), Some(b)) if a > T::zero() => Some((a - b) / a),
            _ => None,
        };
        // adding zero turns a -0 product into +0
        let cii = relative_change.zip(weight).map(|(r, w)| r * T::lit(w) + T::zero());
        let mut flags = Vec::new();
        if pre.is_none() {
            flags.push(CiiFlag::PreMedianNotReached);
        }
        if post.is_none() {
            flags.push(CiiFlag::PostMedianNotReached);
        }
        CiiResult {
            pre_mt_years: pre,
            post_mt_years: post,
            relative_change,
            posterior_weight: weight,
            cii,
            cii_rounded: cii.map(|c| round1(c.to_f64().expect("finite index"))),
            p_value_logrank: p_value,
            neg_log2_p: -p_value.log2(),
            flags,
        }
    }

    pub fn is_defined(&self) -> bool {
        self.cii.is_some()
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0 + 0.0
}

/// Impact index for two survival samples.
pub fn covid_impact_index_sample<T: Real>(
    pre: &SurvivalSample<T>,
    post: &SurvivalSample<T>,
    replicates: usize,
    seed: u64,
) -> Result<CiiResult<T>> {
    let m_pre = median_tenure(&kaplan_meier_sample(pre)?).value;
    let m_post = median_tenure(&kaplan_meier_sample(post)?).value;
    let (test, _) = log_rank_test(&[pre.clone(), post.clone()])?;
    // without both medians the index is undefined and the weight moot
    let w = match (m_pre, m_post) {
        (Some(_), Some(_)) => Some(posterior_weight_sample(pre, post, replicates, seed)?),
        _ => None,
    };
    let mut out = CiiResult::from_parts(m_pre, m_post, w.map(|w| w.weight), test.p_value);
    if let Some(w) = w.filter(|w| w.valid < replicates) {
        out.flags.push(CiiFlag::PartialBootstrap { valid: w.valid });
    }
    if test.has_flag(TestFlag::PValueClamped) {
        out.flags.push(CiiFlag::PValueClamped);
    }
    Ok(out)
}

/// Impact index over genuine spells, medians in years.
pub fn covid_impact_index(
    pre: &[OwnershipSpell],
    post: &[OwnershipSpell],
    replicates: usize,
    seed: u64,
) -> Result<CiiResult<f64>> {
    let to_years = |s: &[OwnershipSpell]| SurvivalSample::<f64>::from_spells(s).rescaled(1.0 / DAYS_PER_YEAR);
    covid_impact_index_sample(&to_years(pre), &to_years(post), replicates, seed)
}

/// One row of the per-neighborhood table; `group` is a letter or `ALL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiiRow {
    pub group: String,
    #[serde(flatten)]
    pub result: CiiResult<f64>,
}

/// Index for every neighborhood followed by the pooled row.
///
/// Every row uses the same seed. A neighborhood with no spells in either
/// period is skipped.
pub fn cii_by_neighborhood(split: &PeriodSplit, replicates: usize, seed: u64) -> Result<Vec<CiiRow>> {
    let mut rows = Vec::with_capacity(Neighborhood::ALL.len() + 1);
    for nb in Neighborhood::ALL {
        let pick = |v: &[OwnershipSpell]| v.iter().filter(|s| s.neighborhood == nb).cloned().collect::<Vec<_>>();
        let (pre, post) = (pick(&split.pre), pick(&split.post));
        if pre.iter().all(|s| !s.genuine) || post.iter().all(|s| !s.genuine) {
            continue;
        }
        rows.push(CiiRow {
            group: nb.label().to_string(),
            result: covid_impact_index(&pre, &post, replicates, seed)?,
        });
    }
    rows.push(CiiRow {
        group: "ALL".into(),
        result: covid_impact_index(&split.pre, &split.post, replicates, seed)?,
    });
    Ok(rows)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.prec$}"))
}

/// Delimited table: group, pre, post, relative change, p-value, index.
pub fn write_cii_table<W: Write>(mut w: W, rows: &[CiiRow]) -> Result<()> {
    let io = |e| Error::io("cii table", e);
    writeln!(
        w,
        "group,pre_mt_years,post_mt_years,relative_change,p_value,neg_log2_p,posterior_weight,cii,cii_rounded"
    )
    .map_err(io)?;
    for row in rows {
        let r = &row.result;
        writeln!(
            w,
            "{},{},{},{},{:.6e},{:.4},{},{},{}",
            row.group,
            opt(r.pre_mt_years, 4),
            opt(r.post_mt_years, 4),
            opt(r.relative_change, 6),
            r.p_value_logrank,
            r.neg_log2_p,
            opt(r.posterior_weight, 6),
            opt(r.cii, 6),
            opt(r.cii_rounded, 1),
        )
        .map_err(io)?;
    }
    Ok(())
}
