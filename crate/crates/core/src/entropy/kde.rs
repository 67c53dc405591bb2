//! Gaussian kernel density estimation and the plug-in entropy estimators
//! built on it.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{ActionSampleSet, DimensionMode, EntropyMode};
use crate::error::{Error, Result};

/// Lower bound on any bandwidth; keeps `log p` finite on constant pools.
pub const MIN_BANDWIDTH: f64 = 1e-6;

/// Pools larger than this evaluate their densities in parallel.
const PAR_THRESHOLD: usize = 1024;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Silverman's rule of thumb, `0.9 · min(std, IQR/1.34) · n^(-1/5)`, floored
/// at [`MIN_BANDWIDTH`].
///
/// `std` is the sample (n-1) standard deviation and the quartiles use linear
/// interpolation. When the IQR collapses to zero while the spread does not
/// (heavily tied pools), the standard deviation alone is used.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InvalidData("bandwidth of an empty sample".into()));
    }
    if n == 1 {
        return Ok(MIN_BANDWIDTH);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);

    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    Ok(if h.is_finite() { h.max(MIN_BANDWIDTH) } else { MIN_BANDWIDTH })
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// One-dimensional Gaussian KDE evaluated at `x`, normalized by the actual
/// pool size.
pub fn kde_density(samples: &[f64], x: f64, h: f64) -> f64 {
    debug_assert!(!samples.is_empty() && h > 0.0);
    let inv_two_h2 = 1.0 / (2.0 * h * h);
    let sum: f64 = samples.iter().map(|s| (-(x - s).powi(2) * inv_two_h2).exp()).sum();
    sum * INV_SQRT_2PI / (samples.len() as f64 * h)
}

/// Product-kernel KDE over row-major `M × dim` samples, evaluated at `x`.
fn product_kde_density(samples: &[f64], dim: usize, x: &[f64], h: &[f64]) -> f64 {
    let m = samples.len() / dim;
    let inv_two_h2: Vec<f64> = h.iter().map(|h| 1.0 / (2.0 * h * h)).collect();
    let sum: f64 = samples
        .chunks_exact(dim)
        .map(|s| {
            let q: f64 = s
                .iter()
                .zip(x)
                .zip(&inv_two_h2)
                .map(|((s, x), k)| (x - s).powi(2) * k)
                .sum();
            (-q).exp()
        })
        .sum();
    let norm: f64 = h.iter().map(|h| h * (2.0 * PI).sqrt()).product();
    sum / (m as f64 * norm)
}

fn densities_at_samples<F>(m: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if m >= PAR_THRESHOLD {
        (0..m).into_par_iter().map(f).collect()
    } else {
        (0..m).map(f).collect()
    }
}

/// Reduces the densities evaluated at the pooled samples to an entropy.
fn entropy_from_densities(densities: &[f64], mode: EntropyMode) -> f64 {
    match mode {
        EntropyMode::Paper => -densities.iter().map(|p| p * p.ln()).sum::<f64>(),
        EntropyMode::Resubstitution => {
            -densities.iter().map(|p| p.ln()).sum::<f64>() / densities.len() as f64
        }
    }
}

/// Entropy of a single 1-D pool at bandwidth `h`.
pub fn pool_entropy_1d(values: &[f64], h: f64, mode: EntropyMode) -> f64 {
    let densities = densities_at_samples(values.len(), |m| kde_density(values, values[m], h));
    entropy_from_densities(&densities, mode)
}

/// Entropy estimate for one frame's pooled samples.
pub fn frame_entropy(set: &ActionSampleSet, mode: EntropyMode, dims: DimensionMode) -> f64 {
    match dims {
        DimensionMode::SumPerDim => (0..set.dim())
            .map(|d| pool_entropy_1d(&set.column(d), set.bandwidth()[d], mode))
            .sum(),
        DimensionMode::JointProduct => {
            let dim = set.dim();
            let samples = set.samples();
            let h = set.bandwidth();
            let densities = densities_at_samples(set.pool_size(), |m| {
                product_kde_density(samples, dim, &samples[m * dim..(m + 1) * dim], h)
            });
            entropy_from_densities(&densities, mode)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_draws(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect()
    }

    #[test]
    fn silverman_degenerate_and_empty() {
        assert_eq!(silverman_bandwidth(&[3.0; 17]).unwrap(), MIN_BANDWIDTH);
        assert_eq!(silverman_bandwidth(&[3.0]).unwrap(), MIN_BANDWIDTH);
        assert!(silverman_bandwidth(&[]).is_err());
    }

    #[test]
    fn silverman_two_points_uses_iqr() {
        // std = sqrt(2), IQR = 1 (quartiles -0.5, 0.5), so IQR/1.34 wins.
        let h = silverman_bandwidth(&[-1.0, 1.0]).unwrap();
        assert!((h - 0.584_698_139_527_247_5).abs() < 1e-12, "{h}");
    }

    #[test]
    fn silverman_unit_normal_large_sample() {
        let h = silverman_bandwidth(&normal_draws(100_000, 1.0, 7)).unwrap();
        let reference = 0.9 * 1e5f64.powf(-0.2);
        assert!((h / reference - 1.0).abs() < 0.05, "{h} vs {reference}");
    }

    #[test]
    fn kde_point_values() {
        assert!((kde_density(&[0.0], 0.0, 1.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert!((kde_density(&[-1.0, 1.0], 0.0, 1.0) - 0.241_970_724_519_143_37).abs() < 1e-12);
        assert_eq!(kde_density(&[-1.0, 1.0], 1e6, 1.0), 0.0);
        assert_eq!(kde_density(&[-1.0, 1.0], -1e6, 1.0), 0.0);
    }

    #[test]
    fn identical_pool_entropies() {
        let pool = [0.25; 4];
        let paper = pool_entropy_1d(&pool, 1.0, EntropyMode::Paper);
        let resub = pool_entropy_1d(&pool, 1.0, EntropyMode::Resubstitution);
        assert!((paper - 1.466_413_735_941_679_1).abs() < 1e-12, "{paper}");
        assert!((resub - 0.918_938_533_204_672_7).abs() < 1e-12, "{resub}");
    }

    #[test]
    fn wider_pool_has_higher_entropy() {
        for mode in [EntropyMode::Paper, EntropyMode::Resubstitution] {
            let narrow = normal_draws(200, 0.01, 3);
            let wide = normal_draws(200, 0.1, 4);
            let hn = pool_entropy_1d(&narrow, silverman_bandwidth(&narrow).unwrap(), mode);
            let hw = pool_entropy_1d(&wide, silverman_bandwidth(&wide).unwrap(), mode);
            assert!(hw > hn, "{mode:?}: {hw} <= {hn}");
        }
    }

    #[test]
    fn product_kernel_matches_1d_for_single_dim() {
        let xs = normal_draws(50, 1.0, 9);
        let h = [0.3];
        for x in [-1.0, 0.0, 0.7] {
            let a = kde_density(&xs, x, h[0]);
            let b = product_kde_density(&xs, 1, &[x], &h);
            assert!((a - b).abs() < 1e-14);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn density_integrates_to_one(
                pool in prop::collection::vec(-50.0f64..50.0, 1..200),
                h in 0.01f64..5.0,
            ) {
                let lo = pool.iter().copied().fold(f64::INFINITY, f64::min) - 6.0 * h;
                let hi = pool.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 6.0 * h;
                let step = h / 20.0;
                let n = ((hi - lo) / step).ceil() as usize;
                let mut integral = 0.0;
                let mut prev = kde_density(&pool, lo, h);
                for i in 1..=n {
                    let x = (lo + i as f64 * step).min(hi);
                    let cur = kde_density(&pool, x, h);
                    let dx = x - (lo + (i - 1) as f64 * step);
                    integral += 0.5 * (prev + cur) * dx;
                    prev = cur;
                }
                prop_assert!((integral - 1.0).abs() < 1e-3, "integral {}", integral);
            }

            #[test]
            fn density_is_positive_and_finite(
                pool in prop::collection::vec(-10.0f64..10.0, 1..50),
                offset in -3.0f64..3.0,
                h in 0.05f64..3.0,
            ) {
                // Within a few bandwidths of the data; far tails underflow to 0.
                let p = kde_density(&pool, pool[0] + offset * h, h);
                prop_assert!(p.is_finite() && p > 0.0);
            }
        }
    }
}
