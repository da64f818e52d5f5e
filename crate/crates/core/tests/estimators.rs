use flattop::bandwidth::{cv_bandwidth_gaussian, default_frequency_grid, ecf, log_grid, select_bandwidth};
use flattop::cdf::{edf, evaluate_on_grid};
use flattop::sim::{replication_rng, Distribution};
use flattop::special::normal_cdf;
use flattop::survival::{evaluate_survival_on_grid, kaplan_meier, km_survival_at};
use flattop::{BandwidthRule, CensoredSample, EstimatorConfig, FlatTopSpec, KernelTable, SmoothingKernel};

fn normal_sample(n: usize, seed: u64) -> CensoredSample {
    let mut rng = replication_rng(seed, n, 0, 0, 1);
    let xs = Distribution::Normal { mean: 0.0, sd: 1.0 }.sample(&mut rng, n).unwrap();
    CensoredSample::uncensored(xs).unwrap()
}

fn auto_bandwidth(sample: &CensoredSample, rule: &BandwidthRule) -> f64 {
    let freqs = default_frequency_grid(sample.times()).unwrap();
    select_bandwidth(&ecf(sample, &freqs).unwrap(), rule).unwrap()
}

#[test]
fn plug_in_estimate_is_consistent() {
    let n = 10_000;
    let table = KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), 1e-8).unwrap();
    let sample = normal_sample(n, 17);
    let h = auto_bandwidth(&sample, &BandwidthRule::plateau(n, 0.75));
    let grid: Vec<f64> = (0..61).map(|i| -3.0 + 0.1 * i as f64).collect();
    let cfg = EstimatorConfig::new(SmoothingKernel::FlatTop(&table), h);
    let est = evaluate_on_grid(&sample, &cfg, &grid).unwrap();
    let sup = grid
        .iter()
        .zip(&est)
        .map(|(&t, &f)| (f - normal_cdf(t)).abs())
        .fold(0.0, f64::max);
    // Dvoretzky–Kiefer–Wolfowitz radius at level 1e-3 is about 0.0186.
    assert!(sup < 0.0186, "sup error {sup} at h={h}");
}

#[test]
fn threshold_rule_tracks_population_crossing() {
    let n = 10_000;
    let mut rule = BandwidthRule::threshold(n, 0.75);
    rule.c_const = 2.0;
    let level: f64 = 2.0 * (4.0f64 / n as f64).sqrt();
    let analytic = 0.75 / (-2.0 * level.ln()).sqrt();
    let mut hs: Vec<f64> = (0..21).map(|s| auto_bandwidth(&normal_sample(n, s), &rule)).collect();
    hs.sort_by(f64::total_cmp);
    let med = hs[10];
    assert!((med / analytic - 1.0).abs() < 0.2, "{med} vs {analytic}");
}

#[test]
fn bandwidth_is_scale_equivariant() {
    let n = 500;
    let sample = normal_sample(n, 3);
    for rule in [BandwidthRule::threshold(n, 0.75), BandwidthRule::plateau(n, 0.75)] {
        let h = auto_bandwidth(&sample, &rule);
        for k in [-3, 2, 5] {
            let lambda = 2f64.powi(k);
            // frequencies scale by 1/λ, and so must the window
            let matched = BandwidthRule { epsilon: rule.epsilon / lambda, ..rule };
            let hs = auto_bandwidth(&sample.scaled(lambda).unwrap(), &matched);
            assert_eq!(hs, lambda * h, "{:?} λ={lambda}", rule.mode);
        }
    }
}

#[test]
fn cv_picks_an_interior_bandwidth() {
    let sample = normal_sample(200, 11);
    let grid = log_grid(0.02, 5.0, 40);
    let h = cv_bandwidth_gaussian(&sample, &grid).unwrap();
    assert!(h > grid[0] && h < grid[grid.len() - 1], "h={h}");
}

#[test]
fn km_without_censoring_is_complement_of_edf() {
    let sample = normal_sample(137, 8);
    let km = kaplan_meier(&sample).unwrap();
    let e = edf(&sample).unwrap();
    for &x in e.jump_locations() {
        assert_eq!(km_survival_at(&km, x).to_bits(), (1.0 - e.cumulative(x)).to_bits());
    }
}

#[test]
fn boundary_corrected_survival_is_one_minus_zero_at_origin() {
    let table = KernelTable::build(FlatTopSpec::smooth_trapezoid(1.0, 0.05).unwrap(), 1e-7).unwrap();
    let w = Distribution::Weibull { shape: 3.0, scale: 1.5 };
    let mut rng = replication_rng(1, 40, 0, 0, 1);
    let times = w.sample(&mut rng, 40).unwrap();
    let sample = CensoredSample::uncensored(times).unwrap();
    let cfg = EstimatorConfig::new(SmoothingKernel::FlatTop(&table), 0.3)
        .with_boundary(0.0)
        .standardized(true);
    let s = evaluate_survival_on_grid(&sample, &cfg, &[0.0, 0.5, 1.0, 2.0]).unwrap();
    assert_eq!(s[0], 1.0);
    assert!(s.windows(2).all(|p| p[0] >= p[1]));
}
