use hpe::fejer::{p1_monitor, FejerMonitor, FejerVerdict};
use hpe::hpe::{hpe_solve, make_error_schedule, HpeConfig, LambdaSchedule, StepMonitor, Termination};
use hpe::operators::Vector;
use hpe::problems::{make_quadratic_l1, make_rotation_vi, Method, ProblemSpec};
use hpe::splittings::SplitMethod;

#[test]
fn exact_prox_on_quadratic_l1() {
    let problem = make_quadratic_l1(Vector::new(vec![3.0]).unwrap(), 1.0).unwrap();
    let oracle = problem.exact_oracle().unwrap();
    let cfg = HpeConfig::new(0.0, LambdaSchedule::Constant(10.0), 200, 1e-12).unwrap();
    let trace = hpe_solve(oracle.as_ref(), &Vector::zeros(1), &cfg, &mut []).unwrap();
    assert!((trace.records[0].x_next[0] - 20.0 / 11.0).abs() < 1e-14);
    assert_eq!(trace.termination, Termination::Converged);
    assert!((trace.x_final()[0] - 2.0).abs() < 1e-10);
    assert!(trace.final_residual().unwrap() <= 1e-12);
}

#[test]
fn exact_runs_are_fejer() {
    let problems = [
        make_quadratic_l1(Vector::new(vec![3.0, -0.2, 5.0]).unwrap(), 1.0).unwrap(),
        make_rotation_vi(),
        ProblemSpec::AffineBoxVi {
            m: vec![vec![1.0, 2.0], vec![-2.0, 1.0]],
            q: vec![1.0, -4.0],
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        }
        .build()
        .unwrap(),
    ];
    for problem in &problems {
        let x_star = problem.reference().unwrap();
        for method in problem.applicable_methods() {
            let lambda = problem.recommended_lambda(method);
            let x0 = Vector::from_elem(problem.dim(), 2.0);
            let trace = match method.split() {
                Some(m) => {
                    let sp = problem.split_problem(m, lambda, lambda).unwrap();
                    let cfg = HpeConfig::new(sp.sigma(m).unwrap(), LambdaSchedule::Constant(lambda), 3000, 1e-9).unwrap();
                    hpe_solve(&sp.oracle(m).unwrap(), &x0, &cfg, &mut []).unwrap()
                }
                None => {
                    let cfg = HpeConfig::new(0.0, LambdaSchedule::Constant(lambda), 3000, 1e-9).unwrap();
                    hpe_solve(problem.exact_oracle().unwrap().as_ref(), &x0, &cfg, &mut []).unwrap()
                }
            };
            assert_eq!(trace.termination, Termination::Converged, "{} {}", problem.name(), method.name());
            let report = p1_monitor(&trace, x_star).unwrap();
            assert_eq!(report.verdict, FejerVerdict::Fejer, "{} {}", problem.name(), method.name());
        }
    }
}

#[test]
fn summable_errors_are_quasi_fejer() {
    let problem = make_rotation_vi();
    let sp = problem.split_problem(SplitMethod::Korpelevich, 0.8, 0.8).unwrap();
    let sigma = sp.sigma(SplitMethod::Korpelevich).unwrap();
    let cfg = HpeConfig::new(sigma, LambdaSchedule::Constant(0.8), 2000, 1e-10)
        .unwrap()
        .with_errors(make_error_schedule(0.2, 2.0, 3).unwrap())
        .unwrap();
    let mut monitor = FejerMonitor::new(Vector::zeros(2));
    let trace = {
        let mut monitors: [&mut dyn StepMonitor; 1] = [&mut monitor];
        hpe_solve(&sp.oracle(SplitMethod::Korpelevich).unwrap(), &Vector::from_elem(2, 1.0), &cfg, &mut monitors).unwrap()
    };
    let online = monitor.report();
    let offline = p1_monitor(&trace, &Vector::zeros(2)).unwrap();
    assert_eq!(online, offline);
    assert_eq!(online.verdict, FejerVerdict::QuasiFejer);
    assert!(trace.warnings.is_empty());
}

#[test]
fn mismatched_methods_refused() {
    let rotation = make_rotation_vi();
    assert!(rotation.supports(Method::Fb).is_err());
    assert!(rotation.supports(Method::HpeExact).is_err());
    assert!(rotation.supports(Method::Korpelevich).is_ok());
    let ql1 = make_quadratic_l1(Vector::new(vec![1.0]).unwrap(), 1.0).unwrap();
    assert!(ql1.supports(Method::Korpelevich).is_err());
}

#[test]
fn shipped_references_have_small_residual() {
    for problem in [
        make_quadratic_l1(Vector::new(vec![3.0, -0.2, 5.0, 0.5]).unwrap(), 1.0).unwrap(),
        make_rotation_vi(),
    ] {
        assert!(problem.reference_residual().unwrap().unwrap() <= 1e-8);
    }
}
