use serde::{Deserialize, Serialize};

use super::{mean, variance};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;

/// Ordinary least squares on z-scored variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RegressionFit<T> {
    pub names: Vec<String>,
    /// Standardized coefficients, one per predictor.
    pub coefficients: Vec<T>,
    pub intercept: T,
    pub r_squared: T,
    /// HC3 heteroscedasticity-consistent standard errors of `coefficients`.
    pub hc3_std_errors: Vec<T>,
    pub vif: Vec<T>,
    pub n: usize,
}

fn zscore<T: Real>(xs: &[T]) -> Option<Vec<T>> {
    let m = mean(xs);
    let sd = variance(xs).sqrt();
    if !(sd > T::zero()) {
        return None;
    }
    Some(xs.iter().map(|&x| (x - m) / sd).collect())
}

struct LeastSquares<T> {
    beta: Vec<T>,
    xtx_inv: Matrix<T>,
    residuals: Vec<T>,
    r_squared: T,
}

/// OLS with an intercept column prepended to `columns`.
fn least_squares<T: Real>(y: &[T], columns: &[&[T]]) -> std::result::Result<LeastSquares<T>, usize> {
    let n = y.len();
    let p = columns.len() + 1;
    let row = |i: usize| -> Vec<T> { std::iter::once(T::one()).chain(columns.iter().map(|c| c[i])).collect() };
    let mut xtx = linalg::zeros::<T>(p, p);
    let mut xty = vec![T::zero(); p];
    for i in 0..n {
        let r = row(i);
        for a in 0..p {
            xty[a] += r[a] * y[i];
            for b in 0..p {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    let xtx_inv = linalg::invert(&xtx, T::lit(1e-10)).map_err(|col| col.saturating_sub(1))?;
    let beta = linalg::mat_vec(&xtx_inv, &xty);
    let residuals: Vec<T> = (0..n)
        .map(|i| y[i] - row(i).iter().zip(&beta).map(|(&a, &b)| a * b).sum::<T>())
        .collect();
    let ym = mean(y);
    let sst: T = y.iter().map(|&v| (v - ym) * (v - ym)).sum();
    let sse: T = residuals.iter().map(|&e| e * e).sum();
    let r_squared = if sst > T::zero() {
        (T::one() - sse / sst).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    Ok(LeastSquares {
        beta,
        xtx_inv,
        residuals,
        r_squared,
    })
}

/// Columns whose z-scores are linearly dependent on earlier ones, each
/// reported with the earlier columns it depends on.
fn collinear_columns<T: Real>(names: &[&str], z: &[Vec<T>]) -> Vec<String> {
    let mut kept: Vec<usize> = Vec::new();
    let mut report = Vec::new();
    for j in 0..z.len() {
        if kept.is_empty() {
            kept.push(j);
            continue;
        }
        let cols: Vec<&[T]> = kept.iter().map(|&k| z[k].as_slice()).collect();
        match least_squares(&z[j], &cols) {
            Ok(fit) if fit.r_squared < T::one() - T::lit(1e-9) => kept.push(j),
            Ok(fit) => {
                let partners: Vec<&str> = kept
                    .iter()
                    .zip(&fit.beta[1..])
                    .filter(|(_, b)| b.abs() > T::lit(1e-8))
                    .map(|(&k, _)| names[k])
                    .collect();
                report.push(format!("{} ~ {}", names[j], partners.join(" + ")));
            }
            Err(_) => report.push(names[j].to_string()),
        }
    }
    report
}

/// Standardized OLS with HC3 standard errors and per-predictor VIF.
///
/// `predictors` are `(name, values)` pairs, each the same length as `y`.
pub fn ols_standardized<T: Real>(y: &[T], predictors: &[(&str, &[T])]) -> Result<RegressionFit<T>> {
    let n = y.len();
    let p = predictors.len();
    if p == 0 {
        return Err(Error::Precondition("regression needs at least one predictor".into()));
    }
    if n <= p + 1 {
        return Err(Error::Precondition(format!(
            "regression needs n > predictors + 1 (n = {n}, predictors = {p})"
        )));
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(Error::InvalidInput(format!(
                "predictor {name} has {} values, response has {n}",
                col.len()
            )));
        }
    }
    let zy = zscore(y).ok_or_else(|| Error::Precondition("response is constant".into()))?;
    let names: Vec<&str> = predictors.iter().map(|(name, _)| *name).collect();
    let mut zx = Vec::with_capacity(p);
    for (name, col) in predictors {
        zx.push(zscore(col).ok_or_else(|| Error::Precondition(format!("predictor {name} is constant")))?);
    }

    let cols: Vec<&[T]> = zx.iter().map(Vec::as_slice).collect();
    let fit = match least_squares(&zy, &cols) {
        Ok(f) => f,
        Err(_) => {
            return Err(Error::RankDeficient {
                columns: collinear_columns(&names, &zx),
            })
        }
    };
    let collinear = collinear_columns(&names, &zx);
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }

    // HC3 sandwich: (X'X)⁻¹ [Σ xᵢxᵢ' eᵢ²/(1−hᵢ)²] (X'X)⁻¹
    let q = p + 1;
    let mut meat = linalg::zeros::<T>(q, q);
    for i in 0..n {
        let row: Vec<T> = std::iter::once(T::one()).chain(zx.iter().map(|c| c[i])).collect();
        let bread_row = linalg::mat_vec(&fit.xtx_inv, &row);
        let h: T = bread_row.iter().zip(&row).map(|(&a, &b)| a * b).sum();
        let scale = fit.residuals[i] * fit.residuals[i] / ((T::one() - h) * (T::one() - h));
        for a in 0..q {
            for b in 0..q {
                meat[a][b] += row[a] * row[b] * scale;
            }
        }
    }
    let bread = &fit.xtx_inv;
    let mut cov = linalg::zeros::<T>(q, q);
    for a in 0..q {
        for b in 0..q {
            let mut acc = T::zero();
            for c in 0..q {
                for d in 0..q {
                    acc += bread[a][c] * meat[c][d] * bread[d][b];
                }
            }
            cov[a][b] = acc;
        }
    }

    let vif = (0..p)
        .map(|j| {
            if p == 1 {
                return T::one();
            }
            let others: Vec<&[T]> = (0..p).filter(|&k| k != j).map(|k| zx[k].as_slice()).collect();
            let r2 = least_squares(&zx[j], &others).map(|f| f.r_squared).unwrap_or(T::one());
            (T::one() / (T::one() - r2)).max(T::one())
        })
        .collect();

    Ok(RegressionFit {
        names: names.iter().map(|s| s.to_string()).collect(),
        coefficients: fit.beta[1..].to_vec(),
        intercept: fit.beta[0],
        r_squared: fit.r_squared,
        hc3_std_errors: (1..q).map(|a| cov[a][a].max(T::zero()).sqrt()).collect(),
        vif,
        n,
    })
}

/// Squared Pearson correlation of `x` and `y`.
pub fn simple_linear_r2<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} x values vs {} y values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Precondition("R² needs at least 3 points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(Error::Domain("R² undefined for a zero-variance variable".into()));
    }
    Ok((sxy * sxy / (sxx * syy)).min(T::one()))
}
