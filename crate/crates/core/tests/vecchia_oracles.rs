use vecfish::geometry::plan_for;
use vecfish::vecchia::{evaluate, evaluate_with, single_pass, EvalOptions};
use vecfish::{CovarianceModel, Family};

mod common;
use common::*;

#[test]
fn full_conditioning_reproduces_dense_likelihood() {
    let mut r = rng(31);
    for family in Family::ALL {
        let data = dataset_for(family, 120, 4);
        let theta = random_params(family, &mut r);
        let model = CovarianceModel::for_data(family, &theta, &data).unwrap();
        let plan = plan_for(&data, data.len() - 1).unwrap();
        let v = evaluate(&data, &plan, &model).unwrap();
        let d = dense(&data, &model);
        assert!(rel_err(v.loglik, d.loglik) < 1e-8, "{family} loglik");
        for (a, b) in v.betahat.iter().zip(d.beta.iter()) {
            assert!(rel_err_floor(*a, *b, 1e-6) < 1e-8, "{family} beta");
        }
        let gscale = d.grad.amax().max(1.0);
        for (a, b) in v.grad.iter().zip(d.grad.iter()) {
            assert!((a - b).abs() / gscale < 1e-6, "{family} grad {a} vs {b}");
        }
        let fscale = d.fisher.amax();
        assert!(
            (&v.fisher - &d.fisher).amax() / fscale < 1e-6,
            "{family} fisher"
        );
    }
}

#[test]
fn gradient_matches_finite_differences_for_every_family() {
    let mut r = rng(44);
    for family in Family::ALL {
        let data = dataset_for(family, 150, 12);
        let plan = plan_for(&data, 10).unwrap();
        let theta = random_params(family, &mut r);
        let model = CovarianceModel::for_data(family, &theta, &data).unwrap();
        let report = evaluate(&data, &plan, &model).unwrap();
        let mut f = |th: &[f64]| {
            let m = model.with_params(th).unwrap();
            evaluate_with(
                &data,
                &plan,
                &m,
                EvalOptions {
                    derivs: false,
                    threads: 1,
                },
            )
            .unwrap()
            .loglik
        };
        for j in 0..theta.len() {
            let fd = central_diff(&mut f, &theta, j, step_for(theta[j], 1e-5));
            let err = rel_err_floor(report.grad[j], fd, 1e-2);
            assert!(err < 1e-5, "{family} param {j}: {} vs {fd}", report.grad[j]);
        }
    }
}

#[test]
fn accumulator_derivatives_match_finite_differences() {
    let data = random_planar(60, 2, 2);
    let plan = plan_for(&data, 5).unwrap();
    let theta = [1.3, 0.2, 0.9, 0.15];
    let model = CovarianceModel::new(Family::MaternIsotropic, &theta).unwrap();
    let opts = EvalOptions::default();
    let state = single_pass(&data, &plan, &model, opts).unwrap();
    let report = evaluate(&data, &plan, &model).unwrap();
    for j in 0..theta.len() {
        let h = step_for(theta[j], 1e-5);
        let mut logdet = |th: &[f64]| {
            let m = model.with_params(th).unwrap();
            single_pass(&data, &plan, &m, opts).unwrap().logdet
        };
        let fd = central_diff(&mut logdet, &theta, j, h);
        assert!(
            rel_err_floor(state.dlogdet[j], fd, 1e-2) < 1e-6,
            "dlogdet {j}"
        );
        let mut ysy = |th: &[f64]| {
            let m = model.with_params(th).unwrap();
            single_pass(&data, &plan, &m, opts).unwrap().ysy
        };
        let fd = central_diff(&mut ysy, &theta, j, h);
        assert!(rel_err_floor(state.dysy[j], fd, 1e-2) < 1e-6, "dysy {j}");
        let mut xsx = |th: &[f64]| {
            let m = model.with_params(th).unwrap();
            single_pass(&data, &plan, &m, opts).unwrap().xsx[(0, 0)]
        };
        let fd = central_diff(&mut xsx, &theta, j, h);
        assert!(
            rel_err_floor(state.dxsx[j][(0, 0)], fd, 1e-2) < 1e-6,
            "dxsx {j}"
        );
        let mut xsy = |th: &[f64]| {
            let m = model.with_params(th).unwrap();
            single_pass(&data, &plan, &m, opts).unwrap().xsy[0]
        };
        let fd = central_diff(&mut xsy, &theta, j, h);
        assert!(
            rel_err_floor(state.dxsy[(0, j)], fd, 1e-2) < 1e-6,
            "dxsy {j}"
        );
        let mut beta = |th: &[f64]| {
            let m = model.with_params(th).unwrap();
            evaluate(&data, &plan, &m).unwrap().betahat[0]
        };
        let fd = central_diff(&mut beta, &theta, j, h);
        assert!(
            rel_err_floor(report.dbeta[(0, j)], fd, 1e-2) < 1e-6,
            "dbeta {j}"
        );
    }
}

#[test]
fn chunked_passes_agree_with_sequential() {
    let data = random_planar(400, 2, 6);
    let plan = plan_for(&data, 10).unwrap();
    let model = CovarianceModel::new(Family::MaternIsotropic, &[1.0, 0.15, 1.1, 0.1]).unwrap();
    let base = evaluate_with(
        &data,
        &plan,
        &model,
        EvalOptions {
            derivs: true,
            threads: 1,
        },
    )
    .unwrap();
    for threads in [2, 3, 7] {
        let other = evaluate_with(
            &data,
            &plan,
            &model,
            EvalOptions {
                derivs: true,
                threads,
            },
        )
        .unwrap();
        assert!((base.loglik - other.loglik).abs() < 1e-10);
        assert!((&base.grad - &other.grad).amax() < 1e-10);
        assert!((&base.fisher - &other.fisher).amax() < 1e-9);
    }
}

#[test]
fn fisher_is_symmetric_positive_semidefinite() {
    let mut r = rng(77);
    for family in Family::ALL {
        let data = dataset_for(family, 100, 8);
        let plan = plan_for(&data, 8).unwrap();
        let theta = random_params(family, &mut r);
        let model = CovarianceModel::for_data(family, &theta, &data).unwrap();
        let rep = evaluate(&data, &plan, &model).unwrap();
        assert!((&rep.fisher - rep.fisher.transpose()).amax() < 1e-10);
        let eig = rep.fisher.clone().symmetric_eigenvalues();
        assert!(eig.min() > -1e-8 * eig.max(), "{family}");
    }
}

#[test]
fn derivative_pass_does_not_change_loglik() {
    let data = random_sphere(80, true, 3);
    let plan = plan_for(&data, 6).unwrap();
    let theta = random_params(Family::MaternSpacetimeWarp, &mut rng(1));
    let model = CovarianceModel::for_data(Family::MaternSpacetimeWarp, &theta, &data).unwrap();
    let with = evaluate(&data, &plan, &model).unwrap();
    let without = evaluate_with(
        &data,
        &plan,
        &model,
        EvalOptions {
            derivs: false,
            threads: 1,
        },
    )
    .unwrap();
    assert_eq!(with.loglik, without.loglik);
}
