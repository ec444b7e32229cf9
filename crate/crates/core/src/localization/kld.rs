//! Systematic resampling with a KLD-sampling sample size.

use std::collections::HashSet;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{LocError, Particle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KldConfig {
    /// Bound on the KL divergence between sample and posterior.
    pub epsilon: f64,
    /// The bound holds with probability `1 - delta`.
    pub delta: f64,
    pub bin_xy: f64,
    pub bin_theta: f64,
    pub min_particles: usize,
    pub max_particles: usize,
}

impl Default for KldConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            delta: 0.01,
            bin_xy: 0.5,
            bin_theta: TAU / 24.0,
            min_particles: 100,
            max_particles: 5000,
        }
    }
}

impl KldConfig {
    pub fn validate(&self) -> Result<(), LocError> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(LocError::BadKld("epsilon must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(LocError::BadKld("delta must lie in (0, 1)"));
        }
        if !(self.bin_xy > 0.0 && self.bin_theta > 0.0) {
            return Err(LocError::BadKld("bin sizes must be positive"));
        }
        if self.min_particles == 0 || self.min_particles > self.max_particles {
            return Err(LocError::BadKld("need 1 <= min particles <= max particles"));
        }
        Ok(())
    }

    fn bin(&self, p: &Particle) -> (i64, i64, i64) {
        (
            (p.pose.x / self.bin_xy).floor() as i64,
            (p.pose.y / self.bin_xy).floor() as i64,
            (p.pose.theta / self.bin_theta).floor() as i64,
        )
    }
}

/// Standard normal quantile by Acklam's rational approximation (relative
/// error below 1.2e-9 on (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;
    if p.is_nan() || p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Sample size that keeps the KL divergence below `epsilon` with
/// probability `1 - delta` when the posterior occupies `k` bins. Zero for
/// `k <= 1`.
pub fn kld_bound(k: usize, epsilon: f64, delta: f64) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let km1 = (k - 1) as f64;
    let z = normal_quantile(1.0 - delta);
    let a = 2.0 / (9.0 * km1);
    km1 / (2.0 * epsilon) * (1.0 - a + a.sqrt() * z).powi(3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    pub particles: Vec<Particle>,
    /// Occupied histogram bins seen while sizing the sample.
    pub bins: usize,
    /// Only one particle carried weight.
    pub low_diversity: bool,
}

/// Indices picked by a systematic comb of `n` teeth over the cumulative
/// weights.
fn systematic(weights: &[f64], n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    let mut acc = weights[0];
    for _ in 0..n {
        while u >= acc && i + 1 < weights.len() {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}

/// Low-variance resampling. The output size grows with the number of
/// histogram bins the drawn particles occupy until it reaches the KLD
/// bound, clamped to `[min_particles, max_particles]`; weights come out
/// uniform.
pub fn resample(particles: &[Particle], kld: &KldConfig, rng: &mut impl Rng) -> Result<Resampled, LocError> {
    kld.validate()?;
    if particles.is_empty() {
        return Err(LocError::Empty);
    }
    let weights: Vec<f64> = particles.iter().map(|p| p.weight.max(0.0)).collect();
    let live: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    let uniform = |n: usize, pick: &dyn Fn(usize) -> Particle| -> Vec<Particle> {
        let w = 1.0 / n as f64;
        (0..n)
            .map(|i| Particle {
                weight: w,
                ..pick(i)
            })
            .collect()
    };
    match live.as_slice() {
        [] => return Err(LocError::Empty),
        [only] => {
            let p = particles[*only];
            return Ok(Resampled {
                particles: uniform(kld.min_particles, &|_| p),
                bins: 1,
                low_diversity: true,
            });
        }
        _ => {}
    }

    // size the sample by drawing from a maximal comb in random order
    let mut draws = systematic(&weights, kld.max_particles, rng);
    draws.shuffle(rng);
    let mut bins = HashSet::new();
    let mut count = kld.max_particles;
    for (j, &i) in draws.iter().enumerate() {
        bins.insert(kld.bin(&particles[i]));
        let n = j + 1;
        if n >= kld.min_particles && n as f64 >= kld_bound(bins.len(), kld.epsilon, kld.delta) {
            count = n;
            break;
        }
    }
    let picks = systematic(&weights, count, rng);
    Ok(Resampled {
        particles: uniform(count, &|j| particles[picks[j]]),
        bins: bins.len(),
        low_diversity: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localization::Pose;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn oracle_quantile(p: f64) -> f64 {
        Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
    }

    fn oracle_bound(k: usize, eps: f64, delta: f64) -> f64 {
        let km1 = (k - 1) as f64;
        let z = oracle_quantile(1.0 - delta);
        let t = 1.0 - 2.0 / (9.0 * km1) + (2.0 / (9.0 * km1)).sqrt() * z;
        km1 / (2.0 * eps) * t * t * t
    }

    fn p(x: f64, y: f64, theta: f64, weight: f64) -> Particle {
        Particle {
            pose: Pose::new(x, y, theta),
            weight,
        }
    }

    #[test]
    fn quantile_against_independent_inverse_cdf() {
        for i in 1..1000 {
            let q = i as f64 / 1000.0;
            let (a, b) = (normal_quantile(q), oracle_quantile(q));
            assert!((a - b).abs() < 1e-6, "{q}: {a} vs {b}");
        }
        for q in [1e-8, 1e-4, 0.01, 0.99, 1.0 - 1e-6] {
            assert!((normal_quantile(q) - oracle_quantile(q)).abs() < 1e-6 * oracle_quantile(q).abs().max(1.0));
        }
        assert!((normal_quantile(0.99) - 2.3263478740408408).abs() < 1e-8);
    }

    #[test]
    fn bound_values() {
        for k in [2, 3, 10, 50, 500] {
            let (a, b) = (kld_bound(k, 0.05, 0.01), oracle_bound(k, 0.05, 0.01));
            assert!((a - b).abs() < 1e-6 * b, "{k}: {a} vs {b}");
        }
        // reference evaluations of the closed form
        assert!((kld_bound(2, 0.05, 0.01) - 65.85773096926759).abs() < 1e-6);
        assert!((kld_bound(3, 0.05, 0.01) - 92.20505345319924).abs() < 1e-6);
        assert!((kld_bound(10, 0.05, 0.01) - 216.96605313273434).abs() < 1e-6);
        assert!((kld_bound(50, 0.05, 0.01) - 749.3758749425826).abs() < 1e-6);
        assert_eq!(kld_bound(1, 0.05, 0.01), 0.0);
    }

    #[test]
    fn one_bin_clamps_to_the_floor() {
        let ps: Vec<_> = (0..300).map(|i| p(1.1 + i as f64 * 1e-4, 1.1, 0.1, 1.0 / 300.0)).collect();
        let kld = KldConfig::default();
        let out = resample(&ps, &kld, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(out.particles.len(), kld.min_particles);
        assert_eq!(out.bins, 1);
        assert!(!out.low_diversity);
    }

    #[test]
    fn degenerate_weights() {
        let mut ps: Vec<_> = (0..50).map(|i| p(i as f64, 0.5, 0.0, 0.0)).collect();
        ps[17].weight = 1.0;
        let kld = KldConfig::default();
        let out = resample(&ps, &kld, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(out.low_diversity);
        assert_eq!(out.particles.len(), kld.min_particles);
        assert!(out.particles.iter().all(|q| q.pose == ps[17].pose));
    }

    #[test]
    fn spread_cloud_grows_the_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ps: Vec<_> = (0..2000)
            .map(|_| p(rng.random::<f64>() * 20.0, rng.random::<f64>() * 20.0, rng.random::<f64>() * TAU, 1.0 / 2000.0))
            .collect();
        let kld = KldConfig::default();
        let out = resample(&ps, &kld, &mut rng).unwrap();
        let n = out.particles.len();
        assert!(n as f64 >= kld_bound(out.bins, kld.epsilon, kld.delta) || n == kld.max_particles);
        assert!(n > 1000, "{n}");
        let w: f64 = out.particles.iter().map(|q| q.weight).sum();
        assert!((w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn systematic_respects_weights() {
        let w = [0.5, 0.0, 0.25, 0.25];
        let idx = systematic(&w, 8, &mut ChaCha8Rng::seed_from_u64(3));
        let count = |i| idx.iter().filter(|&&j| j == i).count();
        assert_eq!((count(0), count(1), count(2), count(3)), (4, 0, 2, 2));
    }

    #[test]
    fn resampling_keeps_the_mean_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ps: Vec<_> = (0..400)
            .map(|_| p(rng.random::<f64>() * 6.0, rng.random::<f64>() * 6.0, 0.0, rng.random::<f64>()))
            .collect();
        let total: f64 = ps.iter().map(|q| q.weight).sum();
        let ps: Vec<_> = ps.into_iter().map(|q| Particle { weight: q.weight / total, ..q }).collect();
        let mean = ps.iter().map(|q| q.weight * q.pose.x).sum::<f64>();
        let kld = KldConfig::default();
        let shifts: Vec<f64> = (0..100)
            .map(|_| {
                let out = resample(&ps, &kld, &mut rng).unwrap().particles;
                out.iter().map(|q| q.weight * q.pose.x).sum::<f64>() - mean
            })
            .collect();
        let m = shifts.iter().sum::<f64>() / 100.0;
        let sd = (shifts.iter().map(|s| (s - m).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!(m.abs() < 3.0 * sd / 10.0 + 1e-12, "shift {m}, sd {sd}");
    }

    proptest! {
        #[test]
        fn bound_is_monotone_in_bins(k in 1usize..5000, eps in 0.01f64..0.5, delta in 0.001f64..0.5) {
            prop_assert!(kld_bound(k + 1, eps, delta) >= kld_bound(k, eps, delta));
        }

        #[test]
        fn quantile_is_an_inverse(q in 1e-9f64..(1.0 - 1e-9)) {
            let z = normal_quantile(q);
            let back = Normal::new(0.0, 1.0).unwrap().cdf(z);
            prop_assert!((back - q).abs() < 1e-8 * q.min(1.0 - q).max(1e-3));
        }
    }
}
