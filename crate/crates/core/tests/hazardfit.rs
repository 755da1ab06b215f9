use tenure_core::hazardfit::{
    compare_families, eval_density, fit_mixture, Family, FitOptions, Kernel, MixtureModel, WeibullParams,
    SUPPORT_MAX_YEARS,
};
use tenure_core::simlab::sample_durations;

fn truth() -> MixtureModel<f64> {
    MixtureModel::weibull_pair(
        0.4,
        WeibullParams::new(1.2, 4.0).unwrap(),
        WeibullParams::new(3.0, 18.0).unwrap(),
    )
    .unwrap()
}

const TRUE_PARAMS: [f64; 5] = [0.4, 1.2, 4.0, 3.0, 18.0];

// Trapezoid rule in u with t = 200 u^4, which flattens the t^(k-1) cusp at
// the origin of a Weibull density with k near 1.
fn trapezoid(model: &MixtureModel<f64>, steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    let f = |i: usize| {
        let u = i as f64 * h;
        let t = SUPPORT_MAX_YEARS * u.powi(4);
        if t == 0.0 {
            return 0.0;
        }
        eval_density(model, t).unwrap() * 4.0 * SUPPORT_MAX_YEARS * u.powi(3)
    };
    h * ((1..steps).map(f).sum::<f64>() + 0.5 * (f(0) + f(steps)))
}

#[test]
fn two_weibull_mixture_is_recovered() {
    let data = sample_durations(&truth(), 20_000, 1);
    let fit = fit_mixture(&data, &FitOptions::new(Family::Weibull, 2, 7)).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.parameter_names, ["w", "k1", "lambda1", "k2", "lambda2"]);
    for (name, (got, want)) in fit.parameter_names.iter().zip(fit.parameters.iter().zip(TRUE_PARAMS)) {
        assert!((got - want).abs() <= 0.10 * want, "{name}: {got} vs {want}");
    }
    assert!(fit.best_so_far.windows(2).all(|w| w[1] <= w[0]));
    assert!((trapezoid(&fit.model, 400_000) - 1.0).abs() <= 1e-6);

    let again = fit_mixture(&data, &FitOptions::new(Family::Weibull, 2, 8)).unwrap();
    for (a, b) in fit.parameters.iter().zip(&again.parameters) {
        assert!((a - b).abs() <= 0.02 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn exponential_scale_is_recovered() {
    let model = MixtureModel::single(Kernel::Exponential { lambda: 8.0 }).unwrap();
    let data = sample_durations(&model, 10_000, 2);
    let fit = fit_mixture(&data, &FitOptions::new(Family::Exponential, 1, 1)).unwrap();
    let lambda = fit.parameters[0];
    assert!((7.6..=8.4).contains(&lambda), "{lambda}");
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    assert!((lambda - mean).abs() < 0.4);
}

#[test]
fn every_family_fit_is_a_density() {
    let data = sample_durations(&truth(), 5_000, 4);
    for family in Family::ALL {
        let fit = fit_mixture(&data, &FitOptions::new(family, 2, 3)).unwrap();
        let mass = trapezoid(&fit.model, 400_000);
        assert!((mass - 1.0).abs() <= 1e-6, "{}: {mass}", family.name());
        assert!(fit.best_so_far.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn gaussian_sample_ranks_gaussian_first() {
    let model = MixtureModel::new(vec![
        tenure_core::hazardfit::Component {
            weight: 0.5,
            kernel: Kernel::Gaussian { mu: 8.0, sigma: 2.0 },
        },
        tenure_core::hazardfit::Component {
            weight: 0.5,
            kernel: Kernel::Gaussian { mu: 25.0, sigma: 4.0 },
        },
    ])
    .unwrap();
    let data = sample_durations(&model, 20_000, 6);
    let ranking = compare_families(&data, 1.0, 2, 8).unwrap();
    let top = &ranking.fits[0];
    assert_eq!(
        top.model.family,
        Family::Gaussian,
        "ranked {:?}",
        ranking
            .fits
            .iter()
            .map(|f| (f.model.family, f.model.n_components(), f.rmse))
            .collect::<Vec<_>>()
    );
    assert_eq!(top.model.n_components(), 2);
}

#[test]
fn small_noisy_sample_flags_unstable_ranking() {
    let model = MixtureModel::single(Kernel::Weibull(WeibullParams::new(1.0, 10.0).unwrap())).unwrap();
    let data = sample_durations(&model, 100, 9);
    let ranking = compare_families(&data, 1.0, 1, 4).unwrap();
    assert_eq!(ranking.fits.len(), 10);
    let best = ranking.fits.iter().map(|f| f.rmse).fold(f64::INFINITY, f64::min);
    let band = ranking.fits.iter().take_while(|f| f.rmse <= best * 1.05).count();
    assert!(band >= 2 && ranking.unstable);
    assert!(ranking.fits[..band].windows(2).all(|w| w[0].aic <= w[1].aic));
    assert!(ranking.fits[band..].windows(2).all(|w| w[0].rmse <= w[1].rmse));
}
