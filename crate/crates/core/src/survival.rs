//! Kaplan–Meier estimation and its kernel smoothing.

use crate::cdf::{check_grid, standardize_survival_path, CensoredSample, EstimatorConfig, StepEstimate};
use crate::error::{Error, Result};

/// Product-limit estimator, returned as its jump measure.
///
/// Computed by redistributing the mass of each censored observation equally
/// to the observations on its right. Censorings tied with events leave the
/// risk set after those events. Without censoring every jump is exactly
/// `count / n`, matching [`crate::cdf::edf`] bit for bit.
pub fn kaplan_meier(sample: &CensoredSample) -> Result<StepEstimate> {
    if sample.event_count() == 0 {
        return Err(Error::sample("Kaplan-Meier estimation needs at least one event"));
    }
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&i, &j| sample.times()[i].total_cmp(&sample.times()[j]));
    let n = sample.len() as f64;
    let mut at_risk = sample.len();
    // per-subject mass is `factor / n`
    let mut factor = 1.0;
    let mut locations = Vec::new();
    let mut heights = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = sample.times()[order[i]];
        let mut j = i;
        let mut deaths = 0usize;
        while j < order.len() && sample.times()[order[j]] == t {
            if sample.events()[order[j]] {
                deaths += 1;
            }
            j += 1;
        }
        let censored = (j - i) - deaths;
        if deaths > 0 {
            locations.push(t);
            heights.push(deaths as f64 * factor / n);
        }
        let remaining = at_risk - deaths;
        if censored > 0 && remaining > censored {
            factor *= remaining as f64 / (remaining - censored) as f64;
        }
        at_risk = remaining - censored;
        i = j;
    }
    Ok(StepEstimate::from_parts_unchecked(locations, heights))
}

/// Kaplan–Meier survival probability `1 - Σ_{X_j <= t} s_j`.
pub fn km_survival_at(km: &StepEstimate, t: f64) -> f64 {
    1.0 - km.cumulative(t)
}

/// Smoothed survival function `Σ s_j (1 - K̄((t - X_j)/h))` of a jump
/// measure, so that it falls from the total mass to zero. With a boundary
/// `a` the smoothed cumulative part is reflected, and the estimate equals
/// the total mass left of `a`.
pub fn smoothed_survival_steps(km: &StepEstimate, cfg: &EstimatorConfig<'_>, grid: &[f64]) -> Result<Vec<f64>> {
    cfg.validate(km.jump_locations())?;
    check_grid(grid)?;
    let mass = km.total_mass();
    let raw: Vec<f64> = grid.iter().map(|&t| mass - cfg.smoothed_mass(km, t)).collect();
    Ok(if cfg.standardize {
        standardize_survival_path(&raw)
    } else {
        raw
    })
}

/// Smoothed Kaplan–Meier survival estimate at a single point. With
/// standardization on, the value is clamped to [0, 1]; use
/// [`evaluate_survival_on_grid`] for the running infimum.
pub fn smoothed_survival(sample: &CensoredSample, cfg: &EstimatorConfig<'_>, t: f64) -> Result<f64> {
    let km = kaplan_meier(sample)?;
    Ok(smoothed_survival_steps(&km, cfg, &[t])?[0])
}

pub fn evaluate_survival_on_grid(sample: &CensoredSample, cfg: &EstimatorConfig<'_>, grid: &[f64]) -> Result<Vec<f64>> {
    smoothed_survival_steps(&kaplan_meier(sample)?, cfg, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::{edf, smoothed_cdf_steps};
    use crate::kernel::{FlatTopSpec, KernelTable, SmoothingKernel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Textbook product-limit survival curve evaluated at `t`.
    fn km_oracle(times: &[f64], events: &[bool], t: f64) -> f64 {
        let mut distinct: Vec<f64> = times
            .iter()
            .zip(events)
            .filter(|(_, &e)| e)
            .map(|(&x, _)| x)
            .collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut s = 1.0;
        for &u in distinct.iter().filter(|&&u| u <= t) {
            let d = times.iter().zip(events).filter(|(&x, &e)| x == u && e).count() as f64;
            let r = times.iter().filter(|&&x| x >= u).count() as f64;
            s *= 1.0 - d / r;
        }
        s
    }

    #[test]
    fn hand_worked_example() {
        let s = CensoredSample::new(vec![1.0, 2.0, 3.0], vec![true, false, true]).unwrap();
        let km = kaplan_meier(&s).unwrap();
        assert_eq!(km.jump_locations(), &[1.0, 3.0]);
        assert_abs_diff_eq!(km.jump_heights()[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(km.jump_heights()[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(km_survival_at(&km, 2.5), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(km_survival_at(&km, 3.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn censored_maximum_leaves_mass() {
        let s = CensoredSample::new(vec![1.0, 2.0, 3.0], vec![true, true, false]).unwrap();
        let km = kaplan_meier(&s).unwrap();
        assert!(km.total_mass() < 1.0);
        assert!(kaplan_meier(&CensoredSample::new(vec![1.0], vec![false]).unwrap()).is_err());
    }

    #[test]
    fn tied_censoring_leaves_after_events() {
        let times = vec![1.0, 2.0, 2.0, 2.0, 4.0, 5.0];
        let events = vec![true, true, false, true, false, true];
        let km = kaplan_meier(&CensoredSample::new(times.clone(), events.clone()).unwrap()).unwrap();
        for &t in &[0.0, 1.0, 2.0, 3.0, 4.5, 5.0] {
            assert_abs_diff_eq!(km_survival_at(&km, t), km_oracle(&times, &events, t), epsilon = 1e-14);
        }
    }

    #[test]
    fn smoothed_single_event_at_zero() {
        let s = CensoredSample::new(vec![0.0, 1.0], vec![true, false]).unwrap();
        let km = kaplan_meier(&s).unwrap();
        let cfg = EstimatorConfig::new(SmoothingKernel::Gaussian, 1.0);
        let v = smoothed_survival_steps(&km, &cfg, &[-1e6, 0.0, 1e6]).unwrap();
        assert_abs_diff_eq!(v[1], km.jump_heights()[0] / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0], km.total_mass(), epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn boundary_survival_equals_mass_left_of_a() {
        let table = KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), 1e-8).unwrap();
        let s = CensoredSample::new(vec![0.2, 0.5, 1.0, 1.4], vec![true, false, true, true]).unwrap();
        let km = kaplan_meier(&s).unwrap();
        let cfg = EstimatorConfig::new(SmoothingKernel::FlatTop(&table), 0.3).with_boundary(0.0);
        let v = smoothed_survival_steps(&km, &cfg, &[-1.0, 0.0]).unwrap();
        assert_eq!(v, vec![km.total_mass(), km.total_mass()]);
    }

    proptest! {
        #[test]
        fn no_censoring_is_edf_bitwise(xs in proptest::collection::vec(-5.0f64..5.0, 1..50), dup in 0usize..5) {
            let mut xs = xs;
            for k in 0..dup.min(xs.len() - 1) {
                xs[k + 1] = xs[k];
            }
            let s = CensoredSample::uncensored(xs).unwrap();
            let km = kaplan_meier(&s).unwrap();
            let e = edf(&s).unwrap();
            prop_assert_eq!(km.jump_locations(), e.jump_locations());
            prop_assert_eq!(km.jump_heights(), e.jump_heights());
        }

        #[test]
        fn matches_textbook_product_limit(
            data in proptest::collection::vec((0u8..12, proptest::bool::ANY), 1..40),
            t in -1.0f64..13.0,
        ) {
            let times: Vec<f64> = data.iter().map(|&(x, _)| x as f64).collect();
            let mut events: Vec<bool> = data.iter().map(|&(_, e)| e).collect();
            events[0] = true;
            let km = kaplan_meier(&CensoredSample::new(times.clone(), events.clone()).unwrap()).unwrap();
            prop_assert!((km_survival_at(&km, t) - km_oracle(&times, &events, t)).abs() < 1e-12);
        }

        #[test]
        fn survival_and_cdf_complement(
            data in proptest::collection::vec((0.0f64..4.0, proptest::bool::ANY), 1..25),
            t in -2.0f64..6.0,
            h in 0.05f64..1.5,
        ) {
            let times: Vec<f64> = data.iter().map(|&(x, _)| x).collect();
            let mut events: Vec<bool> = data.iter().map(|&(_, e)| e).collect();
            events[0] = true;
            let km = kaplan_meier(&CensoredSample::new(times, events).unwrap()).unwrap();
            let cfg = EstimatorConfig::new(SmoothingKernel::Gaussian, h);
            let s = smoothed_survival_steps(&km, &cfg, &[t]).unwrap()[0];
            let f = smoothed_cdf_steps(&km, &cfg, &[t]).unwrap()[0];
            prop_assert!((s + f - km.total_mass()).abs() < 1e-12);
        }
    }
}
