//! Hypothesis-test battery and regression kit.

pub mod dist;
mod nonparametric;
mod parametric;
pub mod ptukey;
mod regression;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use nonparametric::{
    kruskal_wallis, mann_whitney_u, mann_whitney_u_with, midranks, shapiro_wilk, shapiro_wilk_seeded, MannWhitneyMode,
    SHAPIRO_MAX_N,
};
pub(crate) use parametric::welch_from_moments;
pub use parametric::{anova_tukey, welch_t, TukeyPair};
pub use regression::{ols_standardized, simple_linear_r2, RegressionFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LogRank,
    ShapiroWilk,
    MannWhitneyExact,
    MannWhitneyNormal,
    KruskalWallis,
    WelchT,
    Anova,
    TukeyHsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFlag {
    /// True p-value fell below [`dist::P_FLOOR`].
    PValueClamped,
    /// Input carries no information for this test (constant sample, zero variance).
    Degenerate,
    /// A log-rank group had no events and only contributed to risk sets.
    ZeroEventGroup(usize),
    /// Sample was reduced to this many points before testing.
    Subsampled(usize),
}

/// Outcome of any hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TestResult<T> {
    pub method: Method,
    pub statistic: T,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub df: Option<f64>,
    pub effect: Option<T>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<TestFlag>,
}

impl<T: Real> TestResult<T> {
    pub(crate) fn new(method: Method, statistic: T, p: f64, df: Option<f64>) -> Self {
        let (p_value, clamped) = dist::clamp_p(p);
        TestResult {
            method,
            statistic,
            p_value,
            df,
            effect: None,
            flags: if clamped { vec![TestFlag::PValueClamped] } else { vec![] },
        }
    }

    pub(crate) fn degenerate(method: Method, statistic: T, p: f64, df: Option<f64>) -> Self {
        let mut r = Self::new(method, statistic, p, df);
        r.flags.push(TestFlag::Degenerate);
        r
    }

    pub fn with_effect(mut self, effect: T) -> Self {
        self.effect = Some(effect);
        self
    }

    /// Surprisal `-log2(p)` in bits.
    pub fn neg_log2_p(&self) -> f64 {
        -self.p_value.log2()
    }

    pub fn has_flag(&self, flag: TestFlag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn is_degenerate(&self) -> bool {
        self.has_flag(TestFlag::Degenerate)
    }
}

/// Non-empty sample of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SampleVector<T> {
    values: Vec<T>,
    pub group_label: Option<String>,
}

impl<T: Real> SampleVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sample is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample value {i} is not finite")));
        }
        Ok(SampleVector {
            values,
            group_label: None,
        })
    }

    pub fn labeled(values: Vec<T>, label: impl Into<String>) -> Result<Self> {
        let mut s = Self::new(values)?;
        s.group_label = Some(label.into());
        Ok(s)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> T {
        mean(&self.values)
    }

    /// Unbiased sample variance; zero for a single value.
    pub fn variance(&self) -> T {
        variance(&self.values)
    }
}

pub(crate) fn mean<T: Real>(xs: &[T]) -> T {
    xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
}

pub(crate) fn variance<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_lossy(xs.len() - 1)
}
