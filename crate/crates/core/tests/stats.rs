use approx::assert_relative_eq;
use proptest::prelude::*;
use tenure_core::stats::{
    anova_tukey, kruskal_wallis, mann_whitney_u, ols_standardized, shapiro_wilk, simple_linear_r2, welch_t, Method,
    SampleVector,
};

fn v(x: &[f64]) -> SampleVector<f64> {
    SampleVector::new(x.to_vec()).unwrap()
}

// Reference values below come from scipy.stats and statsmodels.

#[test]
fn welch_matches_scipy() {
    let r = welch_t(
        &v(&[5.1, 4.9, 6.2, 5.8, 6.0, 5.5, 5.3]),
        &v(&[4.1, 4.6, 4.3, 5.0, 4.8, 4.4, 3.9, 4.7, 4.2]),
    )
    .unwrap();
    assert_relative_eq!(r.statistic, 5.0673198743933066, max_relative = 1e-10);
    assert_relative_eq!(r.df.unwrap(), 10.80195034903482, max_relative = 1e-10);
    assert_relative_eq!(r.p_value, 0.000383115033729073, max_relative = 1e-7);
}

#[test]
fn mann_whitney_exact_matches_scipy() {
    let r = mann_whitney_u(
        &v(&[1.1, 2.3, 3.5, 4.0, 5.2, 6.1]),
        &v(&[2.0, 3.1, 4.4, 5.0, 5.5, 6.6, 9.9]),
    )
    .unwrap();
    assert_eq!(r.method, Method::MannWhitneyExact);
    assert_eq!(r.statistic, 14.0);
    assert_relative_eq!(r.p_value, 0.36596736596736595, max_relative = 1e-12);
}

#[test]
fn mann_whitney_normal_with_ties_matches_scipy() {
    let a = [
        0.0, 0.4, 0.7, 1.1, 1.5, 1.8, 2.2, 2.6, 3.0, 3.3, 3.7, 4.1, 4.4, 4.8, 0.2, 0.5, 0.9, 1.3, 1.7, 2.0, 2.4, 2.8,
        3.1, 3.5, 3.9,
    ];
    let b = [
        0.0, 0.5, 1.1, 1.6, 2.1, 2.7, 3.2, 3.7, 4.2, 4.8, 5.3, 5.8, 0.4, 0.9, 1.4, 2.0, 2.5, 3.0, 3.5, 4.1, 4.6, 5.1,
        5.7, 0.2, 0.7, 1.2, 1.8, 2.3, 2.8, 3.4,
    ];
    let r = mann_whitney_u(&v(&a), &v(&b)).unwrap();
    assert_eq!(r.method, Method::MannWhitneyNormal);
    assert_eq!(r.statistic, 322.5);
    assert_relative_eq!(r.p_value, 0.3792937468201484, max_relative = 1e-9);
}

#[test]
fn kruskal_wallis_matches_scipy() {
    let r = kruskal_wallis(&[
        v(&[2.9, 3.0, 2.5, 2.6, 3.2]),
        v(&[3.8, 2.7, 4.0, 2.4]),
        v(&[2.8, 3.4, 3.7, 2.2, 2.0]),
    ])
    .unwrap();
    assert_relative_eq!(r.statistic, 0.7714285714285722, max_relative = 1e-10);
    assert_relative_eq!(r.p_value, 0.6799647735788936, max_relative = 1e-10);
}

#[test]
fn anova_and_tukey_match_scipy() {
    let (f, pairs) = anova_tukey(&[
        v(&[24.5, 23.5, 26.4, 27.1, 29.9]),
        v(&[28.4, 34.2, 29.5, 32.2, 30.1, 31.0]),
        v(&[26.1, 28.3, 24.3, 26.2, 27.8]),
    ])
    .unwrap();
    assert_relative_eq!(f.statistic, 8.772727778767369, max_relative = 1e-10);
    assert_relative_eq!(f.p_value, 0.0038768486520608437, max_relative = 1e-8);
    let expect = [
        (0, 1, -4.62, 0.007393060558033904),
        (0, 2, -0.26, 0.9786921883873827),
        (1, 2, 4.36, 0.010875155454623586),
    ];
    assert_eq!(pairs.len(), 3);
    for (p, &(i, j, diff, padj)) in pairs.iter().zip(&expect) {
        assert_eq!((p.i, p.j), (i, j));
        assert_relative_eq!(p.mean_diff, diff, max_relative = 1e-10);
        assert_relative_eq!(p.p_adj, padj, max_relative = 1e-5);
    }
}

#[test]
fn shapiro_matches_scipy() {
    let r = shapiro_wilk(&v(&[
        2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 3.9, 4.1, 2.2, 3.0, 6.8, 1.5, 2.7, 3.6,
    ]))
    .unwrap();
    assert_relative_eq!(r.statistic, 0.9351436379110932, max_relative = 1e-6);
    assert_relative_eq!(r.p_value, 0.32520519177376006, max_relative = 1e-4);
}

const Y: [f64; 8] = [3.1, 4.0, 2.2, 5.9, 4.8, 6.3, 3.7, 5.1];
const X1: [f64; 8] = [1.0, 2.0, 0.5, 4.0, 3.0, 5.0, 2.5, 3.5];
const X2: [f64; 8] = [0.3, 0.1, 0.9, 0.4, 0.8, 0.2, 0.7, 0.5];

#[test]
fn standardized_ols_matches_statsmodels_hc3() {
    let fit = ols_standardized(&Y, &[("x1", &X1), ("x2", &X2)]).unwrap();
    assert_eq!(fit.names, ["x1", "x2"]);
    assert_relative_eq!(fit.coefficients[0], 0.9429700515112145, max_relative = 1e-10);
    assert_relative_eq!(fit.coefficients[1], -0.10599466943214246, max_relative = 1e-10);
    assert_relative_eq!(fit.hc3_std_errors[0], 0.09018573856878875, max_relative = 1e-9);
    assert_relative_eq!(fit.hc3_std_errors[1], 0.08256160631198134, max_relative = 1e-9);
    assert_relative_eq!(fit.r_squared, 0.9676592223739453, max_relative = 1e-10);
    for vif in &fit.vif {
        assert_relative_eq!(*vif, 1.127543849786373, max_relative = 1e-10);
    }
}

// Appreciation rate against post-cutoff median tenure, eight neighborhoods.
#[test]
fn table_columns_r_squared() {
    let app = [0.40, 0.43, 0.45, 0.53, 0.54, 0.71, 0.57, 0.73];
    let post = [7.89, 8.99, 10.04, 11.84, 11.84, 12.61, 12.9, 15.19];
    let r2: f64 = simple_linear_r2(&app, &post).unwrap();
    assert_relative_eq!(r2, 0.8383574966851834, max_relative = 1e-10);
    assert!((r2 - 0.84).abs() <= 0.02);
}

proptest! {
    #[test]
    fn standardized_coefficients_ignore_affine_rescaling(
        a in 0.1f64..50.0, b in -100.0f64..100.0, c in 0.1f64..50.0, d in -100.0f64..100.0,
    ) {
        let base = ols_standardized(&Y, &[("x1", &X1), ("x2", &X2)]).unwrap();
        let y2: Vec<f64> = Y.iter().map(|y| a * y + b).collect();
        let x2: Vec<f64> = X1.iter().map(|x| c * x + d).collect();
        let moved = ols_standardized(&y2, &[("x1", &x2), ("x2", &X2)]).unwrap();
        for j in 0..2 {
            prop_assert!((base.coefficients[j] - moved.coefficients[j]).abs() < 1e-8);
            prop_assert!((base.hc3_std_errors[j] - moved.hc3_std_errors[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn mann_whitney_swaps_to_complement(
        x in prop::collection::vec(0u8..20, 1..12), y in prop::collection::vec(0u8..20, 1..12),
    ) {
        let f = |s: &[u8]| v(&s.iter().map(|&u| f64::from(u)).collect::<Vec<_>>());
        let (a, b) = (mann_whitney_u(&f(&x), &f(&y)).unwrap(), mann_whitney_u(&f(&y), &f(&x)).unwrap());
        prop_assert_eq!(a.statistic + b.statistic, (x.len() * y.len()) as f64);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }

    #[test]
    fn welch_is_shift_invariant(xs in prop::collection::vec(-10.0f64..10.0, 3..20), shift in -1e3f64..1e3) {
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.5 + i as f64 * 0.1).collect();
        let r0 = welch_t(&v(&xs), &v(&ys)).unwrap();
        let moved = |s: &[f64]| v(&s.iter().map(|z| z + shift).collect::<Vec<_>>());
        let r1 = welch_t(&moved(&xs), &moved(&ys)).unwrap();
        prop_assert!((r0.statistic - r1.statistic).abs() < 1e-6 * r0.statistic.abs().max(1.0));
    }
}

// HC3 from the sandwich (X'X)^-1 [sum x_i x_i' e_i^2 / (1 - h_ii)^2] (X'X)^-1,
// evaluated directly with numpy.
#[test]
fn hc3_matches_sandwich_at_n6() {
    let y = [2.0, 3.5, 1.0, 4.2, 5.1, 2.8];
    let x1 = [1.0, 2.0, 0.0, 3.0, 4.0, 2.5];
    let x2 = [3.0, 1.0, 2.0, 2.0, 0.5, 1.5];
    let fit = ols_standardized(&y, &[("x1", &x1), ("x2", &x2)]).unwrap();
    assert_relative_eq!(fit.coefficients[0], 0.9201470486916046, max_relative = 1e-10);
    assert_relative_eq!(fit.coefficients[1], -0.06683989215119115, max_relative = 1e-10);
    assert_relative_eq!(fit.hc3_std_errors[0], 0.15240053435741732, max_relative = 1e-9);
    assert_relative_eq!(fit.hc3_std_errors[1], 0.1690132105998033, max_relative = 1e-9);
}

#[test]
fn shapiro_calibration_on_normal_draws() {
    use rand_distr::{Distribution, StandardNormal};
    let accepted = (0..100u64)
        .filter(|&s| {
            let mut rng = tenure_core::seed::stream_rng(2024, s);
            let x: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
            shapiro_wilk(&v(&x)).unwrap().p_value > 0.05
        })
        .count();
    assert!(accepted >= 90, "{accepted}");
}

#[test]
fn likert_responses_are_not_normal() {
    let rs = tenure_core::simlab::gen_survey_synthetic(
        1000,
        tenure_core::simlab::UShape {
            dip_start: 2.5,
            dip_end: 12.0,
            dip_depth: 0.5,
        },
        1,
    )
    .unwrap();
    let sat: Vec<f64> = rs.iter().map(|r| f64::from(r.satisfaction)).collect();
    assert!(shapiro_wilk(&v(&sat)).unwrap().p_value < 0.01);
}

#[test]
fn tukey_isolates_a_shifted_group() {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = tenure_core::seed::stream_rng(7, 0);
    let mut draw = |shift: f64| {
        v(&(0..20)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                shift + z
            })
            .collect::<Vec<f64>>())
    };
    let groups = [draw(0.0), draw(0.0), draw(10.0)];
    let (f, pairs) = anova_tukey(&groups).unwrap();
    assert!(f.p_value < 1e-6);
    for p in &pairs {
        if p.j == 2 {
            assert!(p.p_adj < 1e-6, "{p:?}");
        } else {
            assert!(p.p_adj > 0.5, "{p:?}");
        }
    }
}

#[test]
fn kruskal_two_groups_agrees_with_mann_whitney() {
    for seed in 0..100u64 {
        let depth = (seed % 5) as f64 * 0.05;
        let shape = tenure_core::simlab::UShape {
            dip_start: 2.5,
            dip_end: 12.0,
            dip_depth: depth,
        };
        let rs = tenure_core::simlab::gen_survey_synthetic(600, shape, seed).unwrap();
        let (inside, outside): (Vec<_>, Vec<_>) =
            rs.iter().partition(|r| (2.5..=12.0).contains(&r.tenure_years.unwrap()));
        let sat = |g: &[&tenure_core::survey::SurveyResponse]| {
            v(&g.iter().map(|r| f64::from(r.satisfaction)).collect::<Vec<_>>())
        };
        let (a, b) = (sat(&inside), sat(&outside));
        let kw = kruskal_wallis(&[a.clone(), b.clone()]).unwrap();
        let mw = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(
            kw.p_value < 0.01,
            mw.p_value < 0.01,
            "seed {seed}: {} vs {}",
            kw.p_value,
            mw.p_value
        );
        // same direction: the group with the larger mean rank has U above its midpoint
        let half = (a.len() * b.len()) as f64 / 2.0;
        let mean = |s: &SampleVector<f64>| s.values().iter().sum::<f64>() / s.len() as f64;
        if mw.statistic != half && (mean(&a) - mean(&b)).abs() > 0.05 {
            assert_eq!(mw.statistic > half, mean(&a) > mean(&b), "seed {seed}");
        }
    }
}
