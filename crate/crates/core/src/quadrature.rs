//! Gauss-Legendre rules and an adaptive integrator built on them.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = (p1, p0);
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

pub(crate) fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

pub(crate) fn gl64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

/// Fixed rule over `[a, b]`.
pub fn integrate_rule(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let (half, mid) = ((b - a) / 2.0, (a + b) / 2.0);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive bisection with a 16-point rule per panel. `rel_tol` is taken
/// relative to a coarse estimate of the whole integral.
pub fn integrate_adaptive(a: f64, b: f64, rel_tol: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let rule = gl16();
    let panels = 8;
    let width = (b - a) / panels as f64;
    let coarse: Vec<(f64, f64, f64)> = (0..panels)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = lo + width;
            (lo, hi, integrate_rule(rule, lo, hi, f))
        })
        .collect();
    let total: f64 = coarse.iter().map(|c| c.2).sum();
    let abs_tol = (rel_tol * total.abs()).max(f64::MIN_POSITIVE);
    coarse
        .into_iter()
        .map(|(lo, hi, whole)| refine(rule, lo, hi, whole, abs_tol / panels as f64, 40, f))
        .sum()
}

fn refine(
    rule: &(Vec<f64>, Vec<f64>),
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    f: &mut impl FnMut(f64) -> f64,
) -> f64 {
    let mid = (a + b) / 2.0;
    let left = integrate_rule(rule, a, mid, f);
    let right = integrate_rule(rule, mid, b, f);
    if depth == 0 || (left + right - whole).abs() <= tol {
        left + right
    } else {
        refine(rule, a, mid, left, tol / 2.0, depth - 1, f) + refine(rule, mid, b, right, tol / 2.0, depth - 1, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let got: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(deg as i32 - 1)).sum();
            let want = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((got - want).abs() < 1e-12, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let got = integrate_adaptive(-20.0, 20.0, 1e-12, &mut |x| (-x * x / 0.18).exp());
        let want = (std::f64::consts::PI * 0.18).sqrt();
        assert!(((got - want) / want).abs() < 1e-10);
    }
}
