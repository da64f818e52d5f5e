//! Fixtures shared by the benchmarks.

use flattop::sim::{replication_rng, Distribution};
use flattop::CensoredSample;

/// `n` standard normal draws from a fixed stream.
pub fn normal_sample(n: usize, seed: u64) -> CensoredSample {
    let mut rng = replication_rng(seed, n, 0, 0, 1);
    let xs = Distribution::Normal { mean: 0.0, sd: 1.0 }
        .sample(&mut rng, n)
        .expect("valid distribution");
    CensoredSample::uncensored(xs).expect("finite draws")
}

/// `n` Weibull(3, 1.5) lifetimes censored by Weibull(4, 3).
pub fn censored_weibull_sample(n: usize, seed: u64) -> CensoredSample {
    let life = Distribution::Weibull { shape: 3.0, scale: 1.5 }
        .sample(&mut replication_rng(seed, n, 0, 0, 1), n)
        .expect("valid distribution");
    let cens = Distribution::Weibull { shape: 4.0, scale: 3.0 }
        .sample(&mut replication_rng(seed, n, 0, 0, 2), n)
        .expect("valid distribution");
    let times = life.iter().zip(&cens).map(|(&x, &c)| x.min(c)).collect();
    let events = life.iter().zip(&cens).map(|(&x, &c)| x <= c).collect();
    CensoredSample::new(times, events).expect("finite draws")
}
