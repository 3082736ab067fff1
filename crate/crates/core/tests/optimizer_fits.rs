use nalgebra::DMatrix;
use vecfish::geometry::plan_for;
use vecfish::optimizer::scoring::Objective;
use vecfish::optimizer::{
    default_start, ols_residual_variance, profiled_loglik, Convergence, ParamSpec, VecchiaObjective,
};
use vecfish::simulate::{simulate, SimConfig};
use vecfish::vecchia::evaluate;
use vecfish::{two_stage_fit, CovarianceModel, Family, FitOptions, Optimizer};

mod common;
use common::*;

fn grid_data(side: usize, family: Family, params: Vec<f64>, seed: u64) -> vecfish::ObservationSet {
    let cfg = SimConfig {
        n: side * side,
        family,
        params,
        ..SimConfig::grid_exponential(seed)
    };
    simulate(&cfg).unwrap()
}

#[test]
fn profiled_variance_matches_grid_search() {
    let data = random_planar(150, 2, 17);
    let plan = plan_for(&data, 10).unwrap();
    let unit = CovarianceModel::new(Family::MaternIsotropic, &[1.0, 0.2, 1.2, 0.3]).unwrap();
    let (best, sigma2) = profiled_loglik(&data, &plan, &unit, 1).unwrap();

    let mut top = (f64::NEG_INFINITY, 0.0);
    for k in 0..=4000 {
        let s = (sigma2.ln() - 1.0 + 2.0 * k as f64 / 4000.0).exp();
        let m = unit.with_params(&[s, 0.2, 1.2, 0.3]).unwrap();
        let ll = evaluate(&data, &plan, &m).unwrap().loglik;
        if ll > top.0 {
            top = (ll, s);
        }
    }
    let step = (2.0f64 / 4000.0).exp_m1();
    assert!(
        (top.1 - sigma2).abs() / sigma2 <= step,
        "{} vs {sigma2}",
        top.1
    );
    assert!(top.0 <= best + 1e-9);
    assert!(best - top.0 < 1e-6, "{best} vs {}", top.0);
}

#[test]
fn working_scale_gradient_is_chain_ruled() {
    let data = random_planar(120, 2, 5);
    let plan = plan_for(&data, 8).unwrap();
    let family = Family::MaternIsotropic;
    let theta = [0.8, 0.15, 0.9, 0.05];
    let spec = ParamSpec::for_family(family);
    let mut obj = VecchiaObjective {
        data: &data,
        plan: &plan,
        model: CovarianceModel::new(family, &theta).unwrap(),
        spec: spec.clone(),
        penalty_scale: Some(ols_residual_variance(&data).unwrap()),
        threads: 1,
    };
    let w = spec.to_working(&theta);
    let at = obj.evaluate(&w).unwrap();
    for j in 0..w.len() {
        let mut f = |x: &[f64]| obj.evaluate(x).unwrap().value;
        let fd = central_diff(&mut f, &w, j, 1e-4);
        assert!(
            rel_err_floor(at.grad[j], fd, 1e-2) < 1e-6,
            "param {j}: {} vs {fd}",
            at.grad[j]
        );
    }
    let info = DMatrix::from_fn(4, 4, |a, b| at.info[(a, b)]);
    assert!((&info - info.transpose()).amax() < 1e-10);
}

#[test]
fn warm_start_reaches_the_cold_start_optimum() {
    let data = grid_data(25, Family::Exponential, vec![2.0, 0.3, 0.1], 8);
    let family = Family::MaternIsotropic;
    let two = two_stage_fit(&data, family, &FitOptions::default()).unwrap();
    let cold = FitOptions {
        neighbors: vec![30],
        start: Some(default_start(family, &data).unwrap()),
        ..FitOptions::default()
    };
    let cold = two_stage_fit(&data, family, &cold).unwrap();
    assert_eq!(two.convergence, Convergence::Converged);
    assert_eq!(cold.convergence, Convergence::Converged);
    assert!(
        (two.loglik - cold.loglik).abs() < 1e-3,
        "{} vs {}",
        two.loglik,
        cold.loglik
    );
    // The warm stage has less to do.
    assert!(two.stages[1].iterations <= cold.iterations);
}

#[test]
fn scoring_matches_simplex_on_a_30_by_30_grid() {
    let data = grid_data(30, Family::Exponential, vec![2.0, 0.3, 0.1], 30);
    for family in [Family::Exponential, Family::MaternIsotropic] {
        let fs = two_stage_fit(&data, family, &FitOptions::default()).unwrap();
        let nm = two_stage_fit(
            &data,
            family,
            &FitOptions::with_optimizer(Optimizer::NelderMead),
        )
        .unwrap();
        assert_eq!(fs.convergence, Convergence::Converged);
        assert!(fs.step_dot_grad.unwrap() < 1e-4);
        assert!(
            fs.loglik >= nm.loglik - 1e-3,
            "{family}: {} vs {}",
            fs.loglik,
            nm.loglik
        );
        assert!(fs.evaluations < nm.evaluations);
        // Standard errors exist for every parameter at an interior optimum.
        assert!(fs.std_errors.iter().all(|s| s.is_some_and(|v| v > 0.0)));
    }
}

#[test]
fn fit_recovers_exponential_truth() {
    let data = grid_data(40, Family::Exponential, vec![2.0, 0.3, 0.1], 3);
    let fit = two_stage_fit(&data, Family::Exponential, &FitOptions::default()).unwrap();
    let (tau2, tau2_se) = fit.nugget_variance();
    let truth = [2.0, 0.3];
    for (j, t) in truth.iter().enumerate() {
        let se = fit.std_errors[j].unwrap();
        assert!((fit.theta[j] - t).abs() < 4.0 * se, "param {j}");
    }
    assert!((tau2 - 0.2).abs() < 4.0 * tau2_se.unwrap());
    assert_eq!(fit.neighbors, vec![10, 30]);
    assert_eq!(fit.beta.len(), 1);
}
