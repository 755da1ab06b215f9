use serde::{Deserialize, Serialize};

use super::dist::{f_sf, t_two_sided};
use super::ptukey::ptukey_sf;
use super::{mean, variance, Method, SampleVector, TestResult};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Welch two-sample t-test, two-sided, Welch-Satterthwaite df.
/// `effect` is the mean difference `x̄ − ȳ`.
pub fn welch_t<T: Real>(x: &SampleVector<T>, y: &SampleVector<T>) -> Result<TestResult<T>> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Precondition("Welch t-test needs n >= 2 in each sample".into()));
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mx, my) = (x.mean().as_f64(), y.mean().as_f64());
    let (vx, vy) = (x.variance().as_f64(), y.variance().as_f64());
    let r = welch_from_moments((nx, mx, vx), (ny, my, vy));
    let result = if r.degenerate {
        TestResult::degenerate(Method::WelchT, T::lit(r.t), r.p, None)
    } else {
        TestResult::new(Method::WelchT, T::lit(r.t), r.p, Some(r.df))
    };
    Ok(result.with_effect(T::lit(mx - my)))
}

pub(crate) struct WelchMoments {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub degenerate: bool,
}

/// Welch test from `(n, mean, sample variance)` of each side.
pub(crate) fn welch_from_moments(x: (f64, f64, f64), y: (f64, f64, f64)) -> WelchMoments {
    let ((nx, mx, vx), (ny, my, vy)) = (x, y);
    let diff = mx - my;
    if vx <= 0.0 && vy <= 0.0 {
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return WelchMoments {
            t,
            df: f64::NAN,
            p,
            degenerate: true,
        };
    }
    let (sx, sy) = (vx.max(0.0) / nx, vy.max(0.0) / ny);
    let t = diff / (sx + sy).sqrt();
    let df = (sx + sy).powi(2) / (sx * sx / (nx - 1.0) + sy * sy / (ny - 1.0));
    WelchMoments {
        t,
        df,
        p: t_two_sided(t, df),
        degenerate: false,
    }
}

/// Tukey-Kramer comparison of groups `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TukeyPair<T> {
    pub i: usize,
    pub j: usize,
    pub mean_diff: T,
    pub q: T,
    pub p_adj: f64,
}

/// One-way ANOVA followed by Tukey HSD (Tukey-Kramer for unequal sizes).
/// `effect` on the ANOVA result is η².
pub fn anova_tukey<T: Real>(groups: &[SampleVector<T>]) -> Result<(TestResult<T>, Vec<TukeyPair<T>>)> {
    let k = groups.len();
    if k < 3 {
        return Err(Error::Precondition(format!(
            "ANOVA with Tukey HSD needs >= 3 groups, got {k}"
        )));
    }
    if let Some(g) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::Precondition(format!("group {g} has fewer than 2 observations")));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let means: Vec<f64> = groups.iter().map(|g| mean(g.values()).as_f64()).collect();
    let grand = groups
        .iter()
        .flat_map(|g| g.values().iter().map(|v| v.as_f64()))
        .sum::<f64>()
        / n as f64;
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand).powi(2))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| variance(g.values()).as_f64() * (g.len() - 1) as f64)
        .sum();
    let (df1, df2) = ((k - 1) as f64, (n - k) as f64);
    let msw = ss_within / df2;
    let eta2 = ss_between / (ss_between + ss_within);

    if msw == 0.0 {
        let p = if ss_between == 0.0 { 1.0 } else { 0.0 };
        let f = if ss_between == 0.0 { 0.0 } else { f64::INFINITY };
        let anova = TestResult::degenerate(Method::Anova, T::lit(f), p, Some(df1));
        let pairs = pairs(
            groups,
            &means,
            |_, _, d| if d == 0.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) },
        );
        return Ok((anova, pairs));
    }

    let f = (ss_between / df1) / msw;
    let anova = TestResult::new(Method::Anova, T::lit(f), f_sf(f, df1, df2), Some(df1)).with_effect(T::lit(eta2));
    let pairs = pairs(groups, &means, |ni, nj, d| {
        let se = (msw / 2.0 * (1.0 / ni + 1.0 / nj)).sqrt();
        let q = d.abs() / se;
        (q, ptukey_sf(q, k, df2))
    });
    Ok((anova, pairs))
}

fn pairs<T: Real>(
    groups: &[SampleVector<T>],
    means: &[f64],
    score: impl Fn(f64, f64, f64) -> (f64, f64),
) -> Vec<TukeyPair<T>> {
    let mut out = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let d = means[i] - means[j];
            let (q, p) = score(groups[i].len() as f64, groups[j].len() as f64, d);
            out.push(TukeyPair {
                i,
                j,
                mean_diff: T::lit(d),
                q: T::lit(q),
                p_adj: p.clamp(0.0, 1.0),
            });
        }
    }
    out
}
