mod common;

use std::sync::Arc;

use relaxgrad::control::ControlVariate;
use relaxgrad::dist::{logit, ConditionalLogits, DenseConditional};
use relaxgrad::estimators::{Aux, EstimatorConfig};
use relaxgrad::objective::{Curvature, Quadratic, ToyBinary};
use relaxgrad::oracle::bias_variance_report;
use relaxgrad::{Distribution, Estimator, HierarchicalBernoulli, Mode, Objective, RelaxationKind, RngStream};

const K: usize = 20_000;
const TOL_SE: f64 = 4.5;

fn assert_unbiased(est: &Estimator, dist: &Distribution, f: &dyn Objective, oracle: &[f64], aux: &Aux<'_>) {
    let rep = bias_variance_report(est, dist, f, K, 7, aux).unwrap();
    for (c, o) in rep.coords.iter().zip(oracle) {
        let gap = (c.mean - o).abs();
        assert!(
            gap <= TOL_SE * c.stderr + 1e-12,
            "{est} coord {}: mean {} oracle {o} se {}",
            c.coord,
            c.mean,
            c.stderr
        );
    }
}

fn binary_case(seed: u64) -> (Vec<f64>, Quadratic, Vec<f64>) {
    let mut rng = RngStream::new(seed, 0);
    let f = Quadratic::random(4, &mut rng).unwrap();
    let l: Vec<f64> = (0..4).map(|_| 1.5 * rng.normal()).collect();
    let oracle = common::fd_gradient(&l, 1e-5, |x| common::bernoulli_expectation(x, &f));
    (l, f, oracle)
}

fn by_name(name: &str, kind: RelaxationKind) -> Estimator {
    let cfg = EstimatorConfig {
        relaxation: kind,
        ..Default::default()
    };
    Estimator::from_name(name, &cfg).unwrap()
}

#[test]
fn factorial_estimators_are_unbiased() {
    for seed in 0..3 {
        let (l, f, oracle) = binary_case(seed);
        let dist = Distribution::bernoulli(l).unwrap();
        for est in [
            by_name("ram", RelaxationKind::Pwl),
            by_name("sampled-ram", RelaxationKind::Pwl),
            by_name("arm", RelaxationKind::Pwl),
            by_name("rebar", RelaxationKind::Gsm),
            by_name("rebar", RelaxationKind::Pwl),
            by_name("reinforce", RelaxationKind::Pwl),
        ] {
            assert_unbiased(&est, &dist, &f, &oracle, &Aux::default());
        }
    }
}

#[test]
fn relax_plus_is_unbiased_for_any_control() {
    let (l, f, oracle) = binary_case(5);
    let dist = Distribution::bernoulli(l).unwrap();
    let mut rng = RngStream::new(5, 1);
    let mut cv = ControlVariate::new(4, 8, &mut rng).unwrap();
    for p in cv.params_mut() {
        *p = 0.5 * rng.normal();
    }
    let aux = Aux {
        baseline: 0.0,
        control: Some(&cv),
    };
    for kind in [RelaxationKind::Pwl, RelaxationKind::Gsm] {
        let est = Estimator::RelaxPlus {
            kind,
            beta: 2.0,
            gamma: 1.0,
        };
        assert_unbiased(&est, &dist, &f, &oracle, &aux);
    }
    // a down-weighted score term trades bias for variance
    let damped = Estimator::RelaxPlus {
        kind: RelaxationKind::Pwl,
        beta: 2.0,
        gamma: 0.5,
    };
    let rep = bias_variance_report(&damped, &dist, &f, K, 7, &aux).unwrap();
    assert!(rep.any_significant());
}

#[test]
fn reinforce_is_unbiased_with_a_baseline() {
    let (l, f, oracle) = binary_case(6);
    let dist = Distribution::bernoulli(l).unwrap();
    let aux = Aux {
        baseline: 1.7,
        control: None,
    };
    assert_unbiased(&Estimator::Reinforce, &dist, &f, &oracle, &aux);
}

#[test]
fn categorical_estimators_are_unbiased() {
    let mut rng = RngStream::new(21, 0);
    let f = Quadratic::random(6, &mut rng).unwrap();
    let l: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
    let oracle = common::fd_gradient(&l, 1e-5, |x| common::categorical_expectation(2, 3, x, &f));
    let dist = Distribution::categorical(2, 3, l).unwrap();
    for name in ["ram", "sampled-ram", "reinforce"] {
        assert_unbiased(&by_name(name, RelaxationKind::Pwl), &dist, &f, &oracle, &Aux::default());
    }
}

#[test]
fn hierarchical_estimators_are_unbiased() {
    let sizes = vec![2, 2];
    let cond = DenseConditional::new(sizes.clone()).unwrap();
    let mut rng = RngStream::new(31, 0);
    let f = Quadratic::random(4, &mut rng).unwrap();
    let params: Vec<f64> = (0..cond.num_params()).map(|_| rng.normal()).collect();
    let oracle = common::fd_gradient(&params, 1e-5, |x| {
        common::hierarchical_expectation(&cond, &sizes, x, &f)
    });
    let h = HierarchicalBernoulli::new(Arc::new(cond), params).unwrap();
    let dist = Distribution::Hierarchical(h);
    for est in [Estimator::Ram, Estimator::Reinforce] {
        assert_unbiased(&est, &dist, &f, &oracle, &Aux::default());
    }
}

#[test]
fn improved_relaxations_are_unbiased_for_one_variable() {
    let f = Quadratic::new(vec![0.7], vec![-1.1]).unwrap();
    for q in [0.1, 0.5, 0.85] {
        let l = vec![logit(q)];
        let oracle = common::fd_gradient(&l, 1e-5, |x| common::bernoulli_expectation(x, &f));
        let dist = Distribution::bernoulli(l).unwrap();
        for kind in [RelaxationKind::Pwl, RelaxationKind::Gsm] {
            let est = Estimator::Relaxed {
                kind,
                mode: Mode::Icr,
                beta: 2.0,
            };
            assert_unbiased(&est, &dist, &f, &oracle, &Aux::default());
        }
    }
}

#[test]
fn categorical_pwl_is_unbiased_for_one_row() {
    let mut rng = RngStream::new(41, 0);
    let f = Quadratic::random(4, &mut rng).unwrap();
    let l = vec![0.3, -0.8, 1.1, 0.0];
    let oracle = common::fd_gradient(&l, 1e-5, |x| common::categorical_expectation(1, 4, x, &f));
    let dist = Distribution::categorical(1, 4, l).unwrap();
    assert_unbiased(
        &by_name("pwl", RelaxationKind::Pwl),
        &dist,
        &f,
        &oracle,
        &Aux::default(),
    );
}

#[test]
fn plain_gumbel_softmax_is_detectably_biased() {
    let f = ToyBinary::new(Curvature::Convex);
    let l = vec![logit(0.2)];
    let oracle = common::fd_gradient(&l, 1e-5, |x| common::bernoulli_expectation(x, &f));
    let dist = Distribution::bernoulli(l).unwrap();
    let est = by_name("gsm", RelaxationKind::Gsm);
    let rep = bias_variance_report(&est, &dist, &f, K, 7, &Aux::default()).unwrap();
    assert!(rep.coords[0].significant());
    assert!(rep.coords[0].mean.signum() != oracle[0].signum());
}
