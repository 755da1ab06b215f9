use tenure_core::hazard::{annualize_hazard, daily_hazard_durations, Aggregation};
use tenure_core::hazardfit::{eval_density, Kernel, MixtureModel, WeibullParams};
use tenure_core::survival::{kaplan_meier_sample, log_rank_test, median_tenure, SurvivalSample};
use tenure_core::{MixtureModel32, SurvivalCurve32};

fn pair<T: tenure_core::Real>() -> [SurvivalSample<T>; 2] {
    let t = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
    [
        SurvivalSample::new(
            t(&[2., 3., 3., 7., 9., 12., 15.]),
            vec![true, true, false, true, true, false, true],
        )
        .unwrap(),
        SurvivalSample::new(t(&[1., 4., 5., 5., 6., 8.]), vec![true, true, true, false, true, true]).unwrap(),
    ]
}

#[test]
fn single_precision_tracks_double() {
    let (a32, a64) = (pair::<f32>(), pair::<f64>());
    let k32: SurvivalCurve32 = kaplan_meier_sample(&a32[0]).unwrap();
    let k64 = kaplan_meier_sample(&a64[0]).unwrap();
    for (x, y) in k32.survival.iter().zip(&k64.survival) {
        assert!((f64::from(*x) - y).abs() < 1e-6);
    }
    assert_eq!(median_tenure(&k32).value, Some(9.0f32));
    let (r32, _) = log_rank_test(&a32).unwrap();
    let (r64, _) = log_rank_test(&a64).unwrap();
    assert!((f64::from(r32.statistic) - r64.statistic).abs() < 1e-4);

    let m32: MixtureModel32 = MixtureModel::weibull_pair(
        0.4,
        WeibullParams::new(1.2, 4.0).unwrap(),
        WeibullParams::new(3.0, 18.0).unwrap(),
    )
    .unwrap();
    let m64 = MixtureModel::single(Kernel::Weibull(WeibullParams::new(1.2f64, 4.0).unwrap())).unwrap();
    assert!(eval_density(&m32, 5.0f32).unwrap() > 0.0);
    assert!(eval_density(&m64, 5.0).unwrap() > 0.0);

    let d = [(10u32, true), (400, true), (800, false), (900, true)];
    let h32 = annualize_hazard(&daily_hazard_durations::<f32>(&d).unwrap(), Aggregation::Ratio).unwrap();
    let h64 = annualize_hazard(&daily_hazard_durations::<f64>(&d).unwrap(), Aggregation::Ratio).unwrap();
    for (x, y) in h32.rate.iter().zip(&h64.rate) {
        assert!((f64::from(*x) - y).abs() < 1e-6);
    }
}
