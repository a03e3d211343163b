//! Addressable random parameters and the two Monte Carlo rules.
//!
//! Every draw is a pure function of `(seed, experiment, ℓ, ν, sample,
//! coordinate)`: the first four select a ChaCha8 key, the sample index is
//! the ChaCha stream and the coordinate is the word position. Results do not
//! depend on thread count or evaluation order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::coefficient::ParamVector;
use crate::error::{Error, Result};

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Everything but the sample index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub experiment: u64,
    pub ell: u64,
    pub nu: u64,
}

impl StreamKey {
    pub fn new(seed: u64, experiment: u64, ell: usize, nu: usize) -> Self {
        Self {
            seed,
            experiment,
            ell: ell as u64,
            nu: nu as u64,
        }
    }

    pub fn stream(self, sample: u64) -> RngStream {
        RngStream { key: self, sample }
    }

    fn chacha_seed(&self) -> [u8; 32] {
        let mut h = mix64(self.seed);
        let mut out = [0u8; 32];
        for (i, part) in [self.experiment, self.ell, self.nu, 0x6d69_6d63]
            .into_iter()
            .enumerate()
        {
            h = mix64(h ^ part.wrapping_add(i as u64));
            out[8 * i..8 * i + 8].copy_from_slice(&h.to_le_bytes());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub key: StreamKey,
    pub sample: u64,
}

impl RngStream {
    pub fn path(&self) -> String {
        format!(
            "experiment={} ell={} nu={} sample={}",
            self.key.experiment, self.key.ell, self.key.nu, self.sample
        )
    }

    fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key.chacha_seed());
        rng.set_stream(self.sample);
        rng
    }

    /// Coordinate `i` alone, equal to `draw_omega(self, n)[i]` for any `n > i`.
    pub fn coordinate(&self, i: usize) -> f64 {
        let mut rng = self.generator();
        rng.set_word_pos(2 * i as u128);
        to_centered_uniform(rng.next_u64())
    }
}

fn to_centered_uniform(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5
}

/// `dim` independent uniforms on `[−1/2, 1/2)`.
pub fn draw_omega(stream: &RngStream, dim: usize) -> ParamVector {
    let mut rng = stream.generator();
    let values = (0..dim)
        .map(|_| to_centered_uniform(rng.next_u64()))
        .collect();
    ParamVector::new(values).expect("centered uniforms lie in [-1/2, 1/2)")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Unbiased; zero for a single sample.
    pub sample_variance: f64,
    pub n: usize,
}

impl McEstimate {
    /// Mean and variance of `values`, summed in index order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 1, "at least one sample");
        let mean = values.iter().sum::<f64>() / n as f64;
        let sample_variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            sample_variance,
            n,
        }
    }

    /// Variance of the mean.
    pub fn estimator_variance(&self) -> f64 {
        self.sample_variance / self.n as f64
    }
}

fn evaluate_all<F>(m: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if m == 0 {
        return Err(Error::Config(
            "Monte Carlo rule needs at least one sample".into(),
        ));
    }
    (0..m as u64).into_par_iter().map(&f).collect()
}

fn wrap<F>(stream: RngStream, f: F) -> Result<f64>
where
    F: FnOnce() -> Result<f64>,
{
    f().map_err(|e| Error::Sample {
        path: stream.path(),
        source: Box::new(e),
    })
}

/// Plain Monte Carlo over samples `0..m` of `key`.
pub fn mc_plain<F>(evaluator: F, m: usize, dim: usize, key: StreamKey) -> Result<McEstimate>
where
    F: Fn(&ParamVector) -> Result<f64> + Sync,
{
    let values = evaluate_all(m, |i| {
        let stream = key.stream(i);
        wrap(stream, || evaluator(&draw_omega(&stream, dim)))
    })?;
    Ok(McEstimate::from_values(&values))
}

/// Antithetic rule: each sample is averaged with its copy whose coordinates
/// `dim_keep..dim_total` have flipped signs. The variance is that of the `m`
/// pair averages.
pub fn mc_symmetrized<F>(
    evaluator: F,
    m: usize,
    dim_total: usize,
    dim_keep: usize,
    key: StreamKey,
) -> Result<McEstimate>
where
    F: Fn(&ParamVector) -> Result<f64> + Sync,
{
    if dim_keep > dim_total {
        return Err(Error::Dimension(format!(
            "kept dimension {dim_keep} exceeds total {dim_total}"
        )));
    }
    let values = evaluate_all(m, |i| {
        let stream = key.stream(i);
        wrap(stream, || {
            let omega = draw_omega(&stream, dim_total);
            let a = evaluator(&omega)?;
            let b = evaluator(&omega.flipped(dim_keep, dim_total))?;
            Ok(0.5 * (a + b))
        })
    })?;
    Ok(McEstimate::from_values(&values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> StreamKey {
        StreamKey::new(42, 7, 1, 2)
    }

    #[test]
    fn draws_are_addressable() {
        let s = key().stream(3);
        assert!(draw_omega(&s, 0).is_empty());
        let a = draw_omega(&s, 10);
        assert_eq!(a, draw_omega(&s, 10));
        assert_eq!(a.as_slice()[..4], draw_omega(&s, 4).as_slice()[..]);
        for i in 0..10 {
            assert_eq!(s.coordinate(i), a[i]);
        }
        assert_ne!(a, draw_omega(&key().stream(4), 10));
        assert_ne!(a, draw_omega(&StreamKey::new(42, 7, 2, 1).stream(3), 10));
        assert_ne!(a, draw_omega(&StreamKey::new(43, 7, 1, 2).stream(3), 10));
    }

    #[test]
    fn first_coordinate_is_centered() {
        let n = 1_000_000u64;
        let k = StreamKey::new(1, 0, 0, 0);
        let mean: f64 = (0..n).map(|i| k.stream(i).coordinate(0)).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 0.002, "mean {mean}");
    }

    #[test]
    fn constant_evaluator() {
        let est = mc_plain(|_| Ok(2.5), 16, 3, key()).unwrap();
        assert_eq!((est.mean, est.sample_variance, est.n), (2.5, 0.0, 16));
        let est = mc_symmetrized(|_| Ok(2.5), 16, 3, 1, key()).unwrap();
        assert_eq!((est.mean, est.sample_variance), (2.5, 0.0));
    }

    #[test]
    fn symmetrized_cancels_odd_tail() {
        let g0 = |w: &ParamVector| Ok((1.0 + w[0] * w[0]).ln() * w[2] + w[0].exp() * w[3]);
        let est = mc_symmetrized(g0, 64, 4, 2, key()).unwrap();
        assert_eq!(est.mean, 0.0);
        let plain = mc_plain(g0, 64, 4, key()).unwrap();
        assert!(plain.mean != 0.0);
    }

    #[test]
    fn symmetrized_equals_plain_on_even_functions() {
        let even = |w: &ParamVector| Ok(w[0] + w[2] * w[2] + w[3].abs());
        let p = mc_plain(even, 32, 4, key()).unwrap();
        let s = mc_symmetrized(even, 32, 4, 2, key()).unwrap();
        assert_eq!(p, s);
    }

    #[test]
    fn failures_carry_the_path() {
        let err = mc_plain(
            |w: &ParamVector| {
                if w[0] > 0.4 {
                    Err(Error::Config("boom".into()))
                } else {
                    Ok(0.0)
                }
            },
            64,
            1,
            key(),
        )
        .unwrap_err();
        match err {
            Error::Sample { path, .. } => assert!(path.contains("ell=1 nu=2 sample=")),
            e => panic!("unexpected {e:?}"),
        }
        assert!(mc_plain(|_| Ok(0.0), 0, 1, key()).is_err());
        assert!(mc_symmetrized(|_| Ok(0.0), 1, 1, 2, key()).is_err());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let f = |w: &ParamVector| Ok(w[0].sin() + w[1] * 1e-3);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_plain(f, 1000, 2, key()).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
