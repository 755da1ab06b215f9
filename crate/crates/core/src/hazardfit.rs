//! Parametric tenure densities and mixture fitting.
//!
//! A [`MixtureModel`] holds one or two components of a single family. Fits
//! minimise the squared error between the mixture density and a
//! density-normalised histogram of durations (years), or optionally the
//! negative log-likelihood, with [`nelder_mead`] run from a set of
//! quasi-random starts.
//!
//! Parameters are searched in an unconstrained space and mapped into their
//! boxes by a logistic transform (on the log scale for shapes and scales).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Real};
use crate::seed::{stream_rng, streams};
use crate::stats::dist::normal_cdf;

use rand::Rng;

/// Every kernel is truncated to `[0, SUPPORT_MAX_YEARS]` and renormalised.
pub const SUPPORT_MAX_YEARS: f64 = 200.0;
pub const DEFAULT_RESTARTS: usize = 16;
pub const MIN_DURATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Weibull,
    Gaussian,
    Lorentzian,
    Exponential,
    PseudoVoigt,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Weibull,
        Family::Gaussian,
        Family::Lorentzian,
        Family::Exponential,
        Family::PseudoVoigt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Weibull => "weibull",
            Family::Gaussian => "gaussian",
            Family::Lorentzian => "lorentzian",
            Family::Exponential => "exponential",
            Family::PseudoVoigt => "pseudo_voigt",
        }
    }

    fn bounds(self) -> &'static [Bound] {
        const W: &[Bound] = &[Bound::log("k", 0.05, 20.0), Bound::log("lambda", 0.1, 60.0)];
        const G: &[Bound] = &[Bound::lin("mu", -10.0, 60.0), Bound::log("sigma", 0.1, 60.0)];
        const L: &[Bound] = &[Bound::lin("x0", -10.0, 60.0), Bound::log("gamma", 0.1, 60.0)];
        const E: &[Bound] = &[Bound::log("lambda", 0.1, 60.0)];
        const V: &[Bound] = &[
            Bound::lin("center", -10.0, 60.0),
            Bound::log("fwhm", 0.1, 60.0),
            Bound::lin("eta", 0.0, 1.0),
        ];
        match self {
            Family::Weibull => W,
            Family::Gaussian => G,
            Family::Lorentzian => L,
            Family::Exponential => E,
            Family::PseudoVoigt => V,
        }
    }

    fn kernel<T: Real>(self, p: &[T]) -> Kernel<T> {
        match self {
            Family::Weibull => Kernel::Weibull(WeibullParams { k: p[0], lambda: p[1] }),
            Family::Gaussian => Kernel::Gaussian { mu: p[0], sigma: p[1] },
            Family::Lorentzian => Kernel::Lorentzian { x0: p[0], gamma: p[1] },
            Family::Exponential => Kernel::Exponential { lambda: p[0] },
            Family::PseudoVoigt => Kernel::PseudoVoigt {
                center: p[0],
                fwhm: p[1],
                eta: p[2],
            },
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidInput(format!("unknown family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
struct Bound {
    name: &'static str,
    lo: f64,
    hi: f64,
    log: bool,
}

impl Bound {
    const fn lin(name: &'static str, lo: f64, hi: f64) -> Self {
        Bound {
            name,
            lo,
            hi,
            log: false,
        }
    }

    const fn log(name: &'static str, lo: f64, hi: f64) -> Self {
        Bound {
            name,
            lo,
            hi,
            log: true,
        }
    }

    fn map<T: Real>(&self, z: T) -> T {
        let s = T::one() / (T::one() + (-z).exp());
        if self.log {
            let (lo, hi) = (T::lit(self.lo.ln()), T::lit(self.hi.ln()));
            (lo + (hi - lo) * s).exp()
        } else {
            T::lit(self.lo) + T::lit(self.hi - self.lo) * s
        }
    }

    fn unit_to_z(u: f64) -> f64 {
        let u = u.clamp(0.02, 0.98);
        (u / (1.0 - u)).ln()
    }
}

const WEIGHT: Bound = Bound::lin("w", 0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WeibullParams<T> {
    pub k: T,
    pub lambda: T,
}

impl<T: Real> WeibullParams<T> {
    pub fn new(k: T, lambda: T) -> Result<Self> {
        if !(k > T::zero() && lambda > T::zero()) || !k.is_finite() || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "Weibull needs k, lambda > 0 (got {k}, {lambda})"
            )));
        }
        Ok(WeibullParams { k, lambda })
    }

    /// `(k/λ)(t/λ)^(k−1) exp(−(t/λ)^k)`
    pub fn density(&self, t: T) -> T {
        let z = t / self.lambda;
        (self.k / self.lambda) * z.powf(self.k - T::one()) * (-z.powf(self.k)).exp()
    }

    pub fn cdf(&self, t: T) -> T {
        if t <= T::zero() {
            return T::zero();
        }
        T::one() - (-(t / self.lambda).powf(self.k)).exp()
    }

    pub fn quantile(&self, u: T) -> T {
        self.lambda * (-(T::one() - u).ln()).powf(T::one() / self.k)
    }

    pub fn mean(&self) -> T {
        self.lambda * T::lit(crate::stats::dist::ln_gamma(1.0 + 1.0 / self.k.as_f64()).exp())
    }

    pub fn median(&self) -> T {
        self.lambda * T::lit(2f64.ln()).powf(T::one() / self.k)
    }
}

/// One component's shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "kind", rename_all = "snake_case")]
pub enum Kernel<T> {
    Weibull(WeibullParams<T>),
    Gaussian {
        mu: T,
        sigma: T,
    },
    Lorentzian {
        x0: T,
        gamma: T,
    },
    Exponential {
        lambda: T,
    },
    /// `η·Lorentzian + (1−η)·Gaussian` sharing a center and full width at half maximum.
    PseudoVoigt {
        center: T,
        fwhm: T,
        eta: T,
    },
}

impl<T: Real> Kernel<T> {
    pub fn family(&self) -> Family {
        match self {
            Kernel::Weibull(_) => Family::Weibull,
            Kernel::Gaussian { .. } => Family::Gaussian,
            Kernel::Lorentzian { .. } => Family::Lorentzian,
            Kernel::Exponential { .. } => Family::Exponential,
            Kernel::PseudoVoigt { .. } => Family::PseudoVoigt,
        }
    }

    pub fn params(&self) -> Vec<T> {
        match *self {
            Kernel::Weibull(w) => vec![w.k, w.lambda],
            Kernel::Gaussian { mu, sigma } => vec![mu, sigma],
            Kernel::Lorentzian { x0, gamma } => vec![x0, gamma],
            Kernel::Exponential { lambda } => vec![lambda],
            Kernel::PseudoVoigt { center, fwhm, eta } => vec![center, fwhm, eta],
        }
    }

    /// Location or scale used to order components.
    fn scale(&self) -> T {
        match *self {
            Kernel::Weibull(w) => w.lambda,
            Kernel::Gaussian { mu, .. } => mu,
            Kernel::Lorentzian { x0, .. } => x0,
            Kernel::Exponential { lambda } => lambda,
            Kernel::PseudoVoigt { center, .. } => center,
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.params();
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite parameters {p:?}")));
        }
        let ok = match *self {
            Kernel::Weibull(w) => w.k > T::zero() && w.lambda > T::zero(),
            Kernel::Gaussian { sigma, .. } => sigma > T::zero(),
            Kernel::Lorentzian { gamma, .. } => gamma > T::zero(),
            Kernel::Exponential { lambda } => lambda > T::zero(),
            Kernel::PseudoVoigt { fwhm, eta, .. } => fwhm > T::zero() && eta >= T::zero() && eta <= T::one(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid {} parameters {p:?}",
                self.family().name()
            )))
        }
    }

    fn density(&self, t: T) -> T {
        match *self {
            Kernel::Weibull(w) => truncated_weibull(t, w),
            Kernel::Exponential { lambda } => truncated_weibull(t, WeibullParams { k: T::one(), lambda }),
            Kernel::Gaussian { mu, sigma } => truncated_gaussian(t, mu, sigma),
            Kernel::Lorentzian { x0, gamma } => truncated_lorentzian(t, x0, gamma),
            Kernel::PseudoVoigt { center, fwhm, eta } => {
                let sigma = fwhm / T::lit(2.0 * (2.0 * 2f64.ln()).sqrt());
                let gamma = fwhm / T::lit(2.0);
                eta * truncated_lorentzian(t, center, gamma) + (T::one() - eta) * truncated_gaussian(t, center, sigma)
            }
        }
    }
}

fn truncated_weibull<T: Real>(t: T, w: WeibullParams<T>) -> T {
    if t > T::lit(SUPPORT_MAX_YEARS) {
        return T::zero();
    }
    let mass = -(-(SUPPORT_MAX_YEARS / w.lambda.as_f64()).powf(w.k.as_f64())).exp_m1();
    w.density(t) / T::lit(mass.max(f64::MIN_POSITIVE))
}

fn truncated_gaussian<T: Real>(t: T, mu: T, sigma: T) -> T {
    if t > T::lit(SUPPORT_MAX_YEARS) {
        return T::zero();
    }
    let (m, s) = (mu.as_f64(), sigma.as_f64());
    let mass = normal_cdf((SUPPORT_MAX_YEARS - m) / s) - normal_cdf(-m / s);
    let z = (t - mu) / sigma;
    let pdf = (-z * z / T::lit(2.0)).exp() / (sigma * T::lit((2.0 * std::f64::consts::PI).sqrt()));
    pdf / T::lit(mass.max(f64::MIN_POSITIVE))
}

fn truncated_lorentzian<T: Real>(t: T, x0: T, gamma: T) -> T {
    if t > T::lit(SUPPORT_MAX_YEARS) {
        return T::zero();
    }
    let (c, g) = (x0.as_f64(), gamma.as_f64());
    let mass = (((SUPPORT_MAX_YEARS - c) / g).atan() + (c / g).atan()) / std::f64::consts::PI;
    let z = (t - x0) / gamma;
    let pdf = T::one() / (T::lit(std::f64::consts::PI) * gamma * (T::one() + z * z));
    pdf / T::lit(mass.max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Component<T> {
    pub weight: T,
    pub kernel: Kernel<T>,
}

/// One- or two-component mixture of a single family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MixtureModel<T> {
    pub family: Family,
    pub components: Vec<Component<T>>,
}

impl<T: Real> MixtureModel<T> {
    pub fn new(components: Vec<Component<T>>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        };
        if components.len() > 2 {
            return Err(Error::InvalidInput("at most two components are supported".into()));
        }
        let family = first.kernel.family();
        for c in &components {
            if c.kernel.family() != family {
                return Err(Error::InvalidInput("components must share one family".into()));
            }
            if !(c.weight >= T::zero() && c.weight <= T::one()) {
                return Err(Error::InvalidInput(format!("weight {} outside [0, 1]", c.weight)));
            }
            c.kernel.validate()?;
        }
        let total: T = components.iter().map(|c| c.weight).sum();
        if (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        Ok(MixtureModel { family, components })
    }

    pub fn single(kernel: Kernel<T>) -> Result<Self> {
        Self::new(vec![Component {
            weight: T::one(),
            kernel,
        }])
    }

    pub fn weibull_pair(w: T, first: WeibullParams<T>, second: WeibullParams<T>) -> Result<Self> {
        Self::new(vec![
            Component {
                weight: w,
                kernel: Kernel::Weibull(first),
            },
            Component {
                weight: T::one() - w,
                kernel: Kernel::Weibull(second),
            },
        ])
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Free parameters: kernel parameters plus one weight per extra component.
    pub fn n_params(&self) -> usize {
        self.components.len() * self.family.bounds().len() + self.components.len() - 1
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let two = self.components.len() == 2;
        for (i, _) in self.components.iter().enumerate() {
            if two && i == 0 {
                names.push("w".to_string());
            }
            for b in self.family.bounds() {
                names.push(if two {
                    format!("{}{}", b.name, i + 1)
                } else {
                    b.name.to_string()
                });
            }
        }
        names
    }

    pub fn parameters(&self) -> Vec<T> {
        let mut out = Vec::new();
        let two = self.components.len() == 2;
        for (i, c) in self.components.iter().enumerate() {
            if two && i == 0 {
                out.push(c.weight);
            }
            out.extend(c.kernel.params());
        }
        out
    }

    /// Density without the domain check.
    fn density(&self, t: T) -> T {
        self.components
            .iter()
            .filter(|c| c.weight > T::zero())
            .map(|c| c.weight * c.kernel.density(t))
            .sum()
    }
}

/// Mixture density at `t` years.
pub fn eval_density<T: Real>(model: &MixtureModel<T>, t: T) -> Result<T> {
    if t < T::zero() || t.is_nan() {
        return Err(Error::Domain(format!("density evaluated at t = {t} < 0")));
    }
    Ok(model.density(t))
}

/// Weibull hazard at `t`; `diverges` marks the `k < 1, t = 0` pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HazardValue<T> {
    pub value: T,
    pub diverges: bool,
}

/// `(k/λ)(t/λ)^(k−1)`
pub fn weibull_hazard<T: Real>(params: &WeibullParams<T>, t: T) -> Result<HazardValue<T>> {
    if t < T::zero() || t.is_nan() {
        return Err(Error::Domain(format!("hazard evaluated at t = {t} < 0")));
    }
    if t == T::zero() && params.k < T::one() {
        return Ok(HazardValue {
            value: T::infinity(),
            diverges: true,
        });
    }
    let value = (params.k / params.lambda) * (t / params.lambda).powf(params.k - T::one());
    Ok(HazardValue {
        value,
        diverges: !value.is_finite(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NelderMeadOptions<T> {
    /// Stop when every vertex lies within this distance of the best one.
    pub tolerance: T,
    pub max_iter: usize,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        NelderMeadOptions {
            tolerance: T::epsilon().sqrt(),
            max_iter: 5000,
            initial_step: T::lit(0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Minimum<T> {
    pub argmin: Vec<T>,
    pub value: T,
    pub converged: bool,
    pub iterations: usize,
}

/// Downhill simplex with reflection 1, expansion 2, contraction ½ and
/// shrink ½.
pub fn nelder_mead<T: Real>(
    mut objective: impl FnMut(&[T]) -> T,
    start: &[T],
    opts: &NelderMeadOptions<T>,
) -> Result<Minimum<T>> {
    let n = start.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty start vector".into()));
    }
    let mut eval = |x: &[T], iteration: usize| -> Result<T> {
        let v = objective(x);
        if v.is_nan() {
            Err(Error::NanObjective { iteration })
        } else {
            Ok(v)
        }
    };
    let f0 = eval(start, 0)?;
    if !f0.is_finite() {
        return Err(Error::Domain("objective is not finite at the start point".into()));
    }

    let mut simplex: Vec<Vec<T>> = vec![start.to_vec()];
    let mut values = vec![f0];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += opts.initial_step;
        values.push(eval(&v, 0)?);
        simplex.push(v);
    }

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        order.sort_by(|&a, &b| total_cmp(&values[a], &values[b]).then(a.cmp(&b)));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(&a, &b)| (a - b).abs())
                    .fold(T::zero(), T::max)
            })
            .fold(T::zero(), T::max);
        if diameter < opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for &i in &order[..n] {
            for (c, &x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        let nt = T::from_usize_lossy(n);
        centroid.iter_mut().for_each(|c| *c /= nt);
        let along = |t: T, simplex: &[Vec<T>]| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(T::one(), &simplex);
        let fr = eval(&reflected, iterations)?;
        if fr < values[best] {
            let expanded = along(two, &simplex);
            let fe = eval(&expanded, iterations)?;
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        let (candidate, fc) = if fr < values[worst] {
            let outside = along(half, &simplex);
            let f = eval(&outside, iterations)?;
            (outside, f)
        } else {
            let inside = along(-half, &simplex);
            let f = eval(&inside, iterations)?;
            (inside, f)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = candidate;
            values[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            for (x, &a) in simplex[i].iter_mut().zip(&anchor) {
                *x = a + half * (*x - a);
            }
            values[i] = eval(&simplex[i], iterations)?;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| total_cmp(&values[a], &values[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    Ok(Minimum {
        argmin: simplex[best].clone(),
        value: values[best],
        converged,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Squared error against the density-normalised histogram.
    #[default]
    HistogramSse,
    /// Negative log-likelihood of the raw durations.
    MaxLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub family: Family,
    pub n_components: usize,
    pub bin_years: f64,
    pub restarts: usize,
    pub seed: u64,
    pub objective: Objective,
    pub max_iter: usize,
}

impl FitOptions {
    pub fn new(family: Family, n_components: usize, seed: u64) -> Self {
        FitOptions {
            family,
            n_components,
            bin_years: 1.0,
            restarts: DEFAULT_RESTARTS,
            seed,
            objective: Objective::HistogramSse,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HistogramBin<T> {
    pub lo: T,
    pub hi: T,
    pub count: usize,
    /// `count / (n · width)`
    pub density: T,
    pub fitted: T,
}

/// Density-normalised histogram with bins `[jh, (j+1)h)` from zero.
pub fn histogram<T: Real>(durations: &[T], bin_years: T) -> Result<Vec<HistogramBin<T>>> {
    if !(bin_years > T::zero()) {
        return Err(Error::Precondition(format!("bin width {bin_years} must be positive")));
    }
    if durations.is_empty() {
        return Err(Error::Precondition("histogram of no durations".into()));
    }
    if let Some(bad) = durations.iter().find(|t| !t.is_finite() || **t < T::zero()) {
        return Err(Error::InvalidInput(format!("duration {bad} is negative or not finite")));
    }
    let max = durations.iter().copied().fold(T::zero(), T::max);
    let nbins = (max / bin_years).floor().to_usize().unwrap_or(0) + 1;
    let mut counts = vec![0usize; nbins];
    for &t in durations {
        let j = (t / bin_years).floor().to_usize().unwrap_or(0).min(nbins - 1);
        counts[j] += 1;
    }
    let scale = T::from_usize_lossy(durations.len()) * bin_years;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(j, count)| {
            let lo = T::from_usize_lossy(j) * bin_years;
            HistogramBin {
                lo,
                hi: lo + bin_years,
                count,
                density: T::from_usize_lossy(count) / scale,
                fitted: T::zero(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FitResult<T> {
    pub model: MixtureModel<T>,
    pub parameter_names: Vec<String>,
    pub parameters: Vec<T>,
    pub objective: Objective,
    /// Histogram squared error of the selected model, whatever the objective.
    pub sse: T,
    /// `sqrt(sse / bins)`
    pub rmse: T,
    /// `2p + bins · ln(sse / bins)`
    pub aic: T,
    pub n_restarts_used: usize,
    pub n_restarts_converged: usize,
    pub converged: bool,
    /// Fewer than three occupied histogram bins.
    pub degenerate: bool,
    /// Best objective value after each restart, in restart order.
    pub best_so_far: Vec<T>,
    pub bins: Vec<HistogramBin<T>>,
    pub residuals: Vec<T>,
}

/// Radical inverse of `i` in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Halton points with a seeded Cranley-Patterson rotation.
fn scrambled_halton(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, streams::MIXTURE_RESTARTS);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|i| {
            (0..dim)
                .map(|d| (radical_inverse(i as u64 + 1, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect()
}

struct Layout {
    family: Family,
    n_components: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        self.n_components * self.family.bounds().len() + self.n_components - 1
    }

    fn decode<T: Real>(&self, z: &[T]) -> MixtureModel<T> {
        let bounds = self.family.bounds();
        let (w, rest) = if self.n_components == 2 {
            (WEIGHT.map(z[0]), &z[1..])
        } else {
            (T::one(), z)
        };
        let components = rest
            .chunks(bounds.len())
            .enumerate()
            .map(|(i, chunk)| {
                let p: Vec<T> = chunk.iter().zip(bounds).map(|(&zi, b)| b.map(zi)).collect();
                Component {
                    weight: if i == 0 { w } else { T::one() - w },
                    kernel: self.family.kernel(&p),
                }
            })
            .collect();
        MixtureModel {
            family: self.family,
            components,
        }
    }
}

fn sse<T: Real>(model: &MixtureModel<T>, bins: &[HistogramBin<T>]) -> T {
    let half = T::lit(0.5);
    bins.iter()
        .map(|b| {
            let r = model.density(half * (b.lo + b.hi)) - b.density;
            r * r
        })
        .sum()
}

fn neg_log_likelihood<T: Real>(model: &MixtureModel<T>, durations: &[T]) -> T {
    durations
        .iter()
        .map(|&t| {
            let f = model.density(t);
            if f > T::zero() {
                -f.ln()
            } else {
                T::infinity()
            }
        })
        .sum()
}

/// Sorts components by location/scale so the labelling is canonical.
fn canonical<T: Real>(mut model: MixtureModel<T>) -> MixtureModel<T> {
    model
        .components
        .sort_by(|a, b| total_cmp(&a.kernel.scale(), &b.kernel.scale()));
    model
}

/// Fits a mixture to durations in years.
///
/// Restart `r` starts from the `r`-th point of a scrambled Halton sequence
/// over the parameter box and is polished by re-running the simplex from its
/// own minimum. The lowest objective wins; ties go to the lower restart.
pub fn fit_mixture<T: Real>(durations: &[T], opts: &FitOptions) -> Result<FitResult<T>> {
    if durations.len() < MIN_DURATIONS {
        return Err(Error::Precondition(format!(
            "mixture fit needs at least {MIN_DURATIONS} durations, got {}",
            durations.len()
        )));
    }
    if !(1..=2).contains(&opts.n_components) {
        return Err(Error::InvalidInput(format!(
            "{} components requested; 1 or 2 supported",
            opts.n_components
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("at least one restart is required".into()));
    }
    let mut bins = histogram(durations, T::lit(opts.bin_years))?;
    let degenerate = bins.iter().filter(|b| b.count > 0).count() < 3;
    let layout = Layout {
        family: opts.family,
        n_components: opts.n_components,
    };
    let starts = scrambled_halton(opts.restarts, layout.dim(), opts.seed);
    let nm = NelderMeadOptions {
        max_iter: opts.max_iter,
        ..NelderMeadOptions::default()
    };

    let objective = |z: &[T]| -> T {
        let model = layout.decode(z);
        match opts.objective {
            Objective::HistogramSse => sse(&model, &bins),
            Objective::MaxLikelihood => neg_log_likelihood(&model, durations),
        }
    };

    let runs: Vec<Result<Minimum<T>>> = starts
        .par_iter()
        .map(|u| {
            let z0: Vec<T> = u.iter().map(|&ui| T::lit(Bound::unit_to_z(ui))).collect();
            let mut run = nelder_mead(objective, &z0, &nm)?;
            for _ in 0..3 {
                if !run.converged {
                    break;
                }
                let again = nelder_mead(objective, &run.argmin, &nm)?;
                let improved = again.value < run.value;
                let gain = run.value - again.value;
                let iterations = run.iterations + again.iterations;
                if improved {
                    run = Minimum { iterations, ..again };
                } else {
                    run.iterations = iterations;
                }
                if !improved || gain <= run.value.abs() * T::lit(1e-10) {
                    break;
                }
            }
            Ok(run)
        })
        .collect();

    let mut best: Option<(usize, Minimum<T>)> = None;
    let mut best_so_far = Vec::with_capacity(runs.len());
    let mut n_converged = 0;
    let mut last_error = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(m) => {
                n_converged += usize::from(m.converged);
                let better = match &best {
                    None => m.value.is_finite(),
                    Some((_, b)) => m.value < b.value,
                };
                if better {
                    best = Some((i, m));
                }
            }
            Err(e) => last_error = Some(e),
        }
        best_so_far.push(best.as_ref().map_or(T::infinity(), |(_, b)| b.value));
    }
    let Some((_, best)) = best else {
        return Err(last_error.unwrap_or_else(|| Error::Domain("every restart diverged".into())));
    };

    let model = canonical(layout.decode(&best.argmin));
    let half = T::lit(0.5);
    let mut residuals = Vec::with_capacity(bins.len());
    for b in &mut bins {
        b.fitted = model.density(half * (b.lo + b.hi));
        residuals.push(b.density - b.fitted);
    }
    let sse_value = sse(&model, &bins);
    let nb = T::from_usize_lossy(bins.len());
    let p = T::from_usize_lossy(model.n_params());
    let floor = T::min_positive_value();
    Ok(FitResult {
        parameter_names: model.parameter_names(),
        parameters: model.parameters(),
        model,
        objective: opts.objective,
        sse: sse_value,
        rmse: (sse_value / nb).sqrt(),
        aic: T::lit(2.0) * p + nb * (sse_value.max(floor) / nb).ln(),
        n_restarts_used: opts.restarts,
        n_restarts_converged: n_converged,
        converged: best.converged && !degenerate,
        degenerate,
        best_so_far,
        bins,
        residuals,
    })
}

/// Fits ranked by RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FamilyRanking<T> {
    pub fits: Vec<FitResult<T>>,
    /// Top two RMSEs differ by less than 5%.
    pub unstable: bool,
}

/// Fits with RMSE within this fraction of the best one are not separated by
/// RMSE; among them the lower AIC ranks first.
pub const RMSE_BAND: f64 = 0.05;

/// Fits one- and two-component mixtures of every family and ranks them.
///
/// Fits outside the leading RMSE band follow in RMSE order. Inside it,
/// nested families (pseudo-Voigt contains Gaussian, two components contain
/// one) would otherwise win on fitting noise, so AIC decides there.
pub fn compare_families<T: Real>(
    durations: &[T],
    bin_years: f64,
    seed: u64,
    restarts: usize,
) -> Result<FamilyRanking<T>> {
    compare_families_with(durations, &Family::ALL, bin_years, seed, restarts)
}

/// [`compare_families`] over a chosen set of families.
pub fn compare_families_with<T: Real>(
    durations: &[T],
    families: &[Family],
    bin_years: f64,
    seed: u64,
    restarts: usize,
) -> Result<FamilyRanking<T>> {
    if families.is_empty() {
        return Err(Error::Config("no families to compare".into()));
    }
    let mut fits = Vec::new();
    for &family in families {
        for n_components in [2, 1] {
            let opts = FitOptions {
                bin_years,
                restarts,
                ..FitOptions::new(family, n_components, seed)
            };
            fits.push(fit_mixture(durations, &opts)?);
        }
    }
    let tiebreak = |a: &FitResult<T>, b: &FitResult<T>| {
        a.model
            .n_params()
            .cmp(&b.model.n_params())
            .then(a.model.family.cmp(&b.model.family))
    };
    fits.sort_by(|a, b| a.rmse.as_f64().total_cmp(&b.rmse.as_f64()).then(tiebreak(a, b)));
    let best = fits.first().map_or(0.0, |f| f.rmse.as_f64());
    let band = fits
        .iter()
        .take_while(|f| f.rmse.as_f64() <= best * (1.0 + RMSE_BAND))
        .count();
    fits[..band].sort_by(|a, b| a.aic.as_f64().total_cmp(&b.aic.as_f64()).then(tiebreak(a, b)));
    Ok(FamilyRanking {
        fits,
        unstable: band >= 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn weibull(k: f64, lambda: f64) -> MixtureModel<f64> {
        MixtureModel::single(Kernel::Weibull(WeibullParams::new(k, lambda).unwrap())).unwrap()
    }

    #[test]
    fn weibull_density_values() {
        assert_relative_eq!(
            eval_density(&weibull(1.0, 1.0), 1.0).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        // 0.2·e^(−1)
        assert_relative_eq!(
            eval_density(&weibull(2.0, 10.0), 10.0).unwrap(),
            0.07357588823428847,
            max_relative = 1e-14
        );
        assert!(matches!(eval_density(&weibull(2.0, 10.0), -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn identical_halves_equal_one_component() {
        let p = WeibullParams::new(1.7, 9.0).unwrap();
        let mix = MixtureModel::weibull_pair(0.5, p, p).unwrap();
        let one = weibull(1.7, 9.0);
        for t in [0.1, 1.0, 5.0, 20.0] {
            assert_relative_eq!(mix.density(t), one.density(t), max_relative = 1e-14);
        }
    }

    #[test]
    fn weibull_hazard_cases() {
        let exp = WeibullParams::new(1.0, 4.0).unwrap();
        for t in [0.0, 0.5, 7.0] {
            assert_relative_eq!(weibull_hazard(&exp, t).unwrap().value, 0.25, epsilon = 1e-15);
        }
        let h = weibull_hazard(&WeibullParams::new(2.0, 10.0).unwrap(), 5.0).unwrap();
        assert_relative_eq!(h.value, 0.1, epsilon = 1e-15);
        let pole = weibull_hazard(&WeibullParams::<f64>::new(0.5, 10.0).unwrap(), 0.0).unwrap();
        assert!(pole.diverges && pole.value.is_infinite());
    }

    #[test]
    fn nelder_mead_quadratic() {
        let m = nelder_mead(|x: &[f64]| (x[0] - 3.0).powi(2), &[0.0], &NelderMeadOptions::default()).unwrap();
        assert!(m.converged);
        assert!((m.argmin[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            tolerance: 1e-10,
            ..NelderMeadOptions::default()
        };
        let m = nelder_mead(f, &[0.0, 0.0], &opts).unwrap();
        assert!(m.converged);
        assert!(
            (m.argmin[0] - 1.0).abs() < 1e-3 && (m.argmin[1] - 1.0).abs() < 1e-3,
            "{:?}",
            m.argmin
        );
    }

    #[test]
    fn nelder_mead_iteration_cap() {
        let opts = NelderMeadOptions {
            max_iter: 1,
            ..NelderMeadOptions::default()
        };
        let m = nelder_mead(|x: &[f64]| (x[0] - 3.0).powi(2), &[0.0], &opts).unwrap();
        assert!(!m.converged);
    }

    #[test]
    fn nelder_mead_nan_aborts() {
        let f = |x: &[f64]| if x[0] > 0.2 { f64::NAN } else { x[0] * x[0] };
        assert!(matches!(
            nelder_mead(f, &[0.0], &NelderMeadOptions::default()),
            Err(Error::NanObjective { .. })
        ));
    }

    #[test]
    fn location_families_are_normalised() {
        let kernels = [
            Kernel::Gaussian { mu: 3.0, sigma: 4.0 },
            Kernel::Lorentzian { x0: 2.0, gamma: 1.5 },
            Kernel::PseudoVoigt {
                center: 5.0,
                fwhm: 3.0,
                eta: 0.4,
            },
        ];
        for k in kernels {
            let m = MixtureModel::single(k).unwrap();
            let mut f = |t: f64| m.density(t);
            let total: f64 = (0..200)
                .map(|i| crate::quadrature::integrate_adaptive(i as f64, i as f64 + 1.0, 1e-13, &mut f))
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let p = WeibullParams::new(1.0, 1.0).unwrap();
        assert!(MixtureModel::weibull_pair(1.5, p, p).is_err());
        let bad = Component {
            weight: 0.7,
            kernel: Kernel::Weibull(p),
        };
        assert!(MixtureModel::new(vec![bad]).is_err());
    }

    #[test]
    fn halton_is_deterministic_and_in_unit_cube() {
        let a = scrambled_halton(16, 5, 9);
        assert_eq!(a, scrambled_halton(16, 5, 9));
        assert_ne!(a, scrambled_halton(16, 5, 10));
        assert!(a.iter().flatten().all(|&u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn too_few_durations() {
        let d = vec![1.0; 50];
        assert!(fit_mixture(&d, &FitOptions::new(Family::Weibull, 2, 1)).is_err());
    }

    #[test]
    fn equal_durations_are_flagged() {
        let d = vec![5.3f64; 200];
        let r = fit_mixture(&d, &FitOptions::new(Family::Weibull, 1, 1)).unwrap();
        assert!(r.degenerate && !r.converged);
    }

    #[test]
    fn parameter_vector_layout() {
        let m = MixtureModel::weibull_pair(
            0.4,
            WeibullParams::new(1.2, 4.0).unwrap(),
            WeibullParams::new(3.0, 18.0).unwrap(),
        )
        .unwrap();
        assert_eq!(m.parameter_names(), ["w", "k1", "lambda1", "k2", "lambda2"]);
        assert_eq!(m.parameters(), vec![0.4, 1.2, 4.0, 3.0, 18.0]);
        assert_eq!(m.n_params(), 5);
    }
}
