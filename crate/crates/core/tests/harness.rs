use flattop::sim::{run_scenario, run_scenario_with_workers, EstimatorKind, HarnessConfig, MseReport};
use flattop::Scenario;

fn config() -> HarnessConfig {
    HarnessConfig::new(1e-6).unwrap()
}

#[test]
fn worker_count_does_not_change_the_report() {
    let cfg = config();
    let scenario = Scenario::weibull_censored(vec![15, 20], 40, 9);
    let one = run_scenario_with_workers(&scenario, &EstimatorKind::ALL, &cfg, 1).unwrap();
    let four = run_scenario_with_workers(&scenario, &EstimatorKind::ALL, &cfg, 4).unwrap();
    assert_eq!(one.to_csv(), four.to_csv());
    assert_eq!(one, four);
}

#[test]
fn cells_decompose_into_bias_and_variance() {
    let report = run_scenario(&Scenario::normal_iid(vec![15], 60, 2), &EstimatorKind::ALL, &config()).unwrap();
    assert_eq!(report.cells.len(), 6 * 3);
    for c in &report.cells {
        assert!((c.mse - (c.bias * c.bias + c.var)).abs() <= 1e-12 * c.mse, "{c:?}");
        assert_eq!(c.reps, 60);
        assert!(c.se.unwrap() > 0.0);
    }
}

#[test]
fn report_round_trips_through_json() {
    let report = run_scenario(&Scenario::normal_iid(vec![10], 5, 1), &[EstimatorKind::Trapezoid], &config()).unwrap();
    let back: MseReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.schema, 1);
    let header = report.to_csv().lines().next().unwrap().to_string();
    assert_eq!(header, "estimator,t,n,mse,bias,var,se,reps");
}

#[test]
fn seeds_change_the_draws() {
    let cfg = config();
    let a = run_scenario(&Scenario::normal_iid(vec![15], 20, 1), &[EstimatorKind::Empirical], &cfg).unwrap();
    let b = run_scenario(&Scenario::normal_iid(vec![15], 20, 2), &[EstimatorKind::Empirical], &cfg).unwrap();
    assert_ne!(a.cells[1].mse, b.cells[1].mse);
}

#[test]
fn single_replication_has_no_standard_error() {
    let r = run_scenario(&Scenario::normal_iid(vec![15], 1, 1), &[EstimatorKind::Empirical], &config()).unwrap();
    assert!(r.cells.iter().all(|c| c.se.is_none()));
    assert!(r.to_csv().contains("NaN"));
}
