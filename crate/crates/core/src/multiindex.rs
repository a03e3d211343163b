//! Level schedules, the model cost, and the multi-index combination
//!
//! ```text
//! G_N = Σ_{ℓ+ν ≤ N} Q_{2^{m_{N−ℓ−ν}}}( G(D_ℓ^ν) )
//! ```
//!
//! with independent sample streams per `(ℓ, ν)`, plus the single-truncation
//! multilevel baseline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{double_difference, level_difference, ProblemSet};
use crate::sampler::{mc_plain, mc_symmetrized, McEstimate, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Symmetrized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Square,
    Lshape,
}

impl Experiment {
    pub fn id(self) -> u64 {
        match self {
            Experiment::Square => 1,
            Experiment::Lshape => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Square => "square",
            Experiment::Lshape => "lshape",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Experiment::Square),
            "lshape" => Ok(Experiment::Lshape),
            _ => Err(Error::Config(format!("unknown experiment `{s}`"))),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "symmetrized" => Ok(Variant::Symmetrized),
            _ => Err(Error::Config(format!("unknown variant `{s}`"))),
        }
    }
}

/// Sample exponents `m_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MRule {
    /// `3j`
    Linear3,
    /// `⌈8j/3⌉`
    EightThirds,
    /// `4j`
    Linear4,
}

/// Truncation dimensions `s_ν = ⌈2^{ν·a}⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SRule {
    /// `a = 1/(r−1)`
    SquarePlain,
    /// `a = 1/(2(r−1))`
    SquareSymmetrized,
    /// `a = 2/(3r−3)`
    Lshape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub variant: Variant,
    pub experiment: Experiment,
    pub m_rule: MRule,
    pub s_rule: SRule,
    pub r: f64,
}

impl ScheduleParams {
    pub fn preset(experiment: Experiment, variant: Variant) -> Self {
        let (m_rule, s_rule) = match (experiment, variant) {
            (Experiment::Square, Variant::Plain) => (MRule::Linear3, SRule::SquarePlain),
            (Experiment::Square, Variant::Symmetrized) => {
                (MRule::Linear3, SRule::SquareSymmetrized)
            }
            (Experiment::Lshape, _) => (MRule::EightThirds, SRule::Lshape),
        };
        Self {
            variant,
            experiment,
            m_rule,
            s_rule,
            r: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 1.0) || !self.r.is_finite() {
            return Err(Error::Config(format!(
                "decay exponent r must exceed 1, got {}",
                self.r
            )));
        }
        Ok(())
    }

    pub fn schedule_m(&self, j: usize) -> u32 {
        let j = j as u32;
        match self.m_rule {
            MRule::Linear3 => 3 * j,
            MRule::EightThirds => (8 * j).div_ceil(3),
            MRule::Linear4 => 4 * j,
        }
    }

    pub fn schedule_s(&self, nu: usize) -> usize {
        let a = match self.s_rule {
            SRule::SquarePlain => 1.0 / (self.r - 1.0),
            SRule::SquareSymmetrized => 1.0 / (2.0 * (self.r - 1.0)),
            SRule::Lshape => 2.0 / (3.0 * self.r - 3.0),
        };
        let x = (nu as f64 * a).exp2();
        // exact powers must not be bumped by rounding in exp2
        let nearest = x.round();
        if (x - nearest).abs() <= 1e-9 * nearest {
            nearest as usize
        } else {
            x.ceil() as usize
        }
    }

    /// Samples at simplex index `j`.
    pub fn samples(&self, j: usize) -> Result<u64> {
        let m = self.schedule_m(j);
        if m >= 63 {
            return Err(Error::Resource(format!("2^{m} samples requested")));
        }
        Ok(1u64 << m)
    }
}

/// `Σ_{j+ℓ+ν ≤ N} 2^{m_j} · 4^ℓ · s_ν`, exact.
pub fn model_cost(params: &ScheduleParams, n: usize) -> u128 {
    let mut total = 0u128;
    for j in 0..=n {
        for ell in 0..=n - j {
            for nu in 0..=n - j - ell {
                total += (1u128 << params.schedule_m(j))
                    * (1u128 << (2 * ell))
                    * params.schedule_s(nu) as u128;
            }
        }
    }
    total
}

/// `Σ_{j+ℓ ≤ N} 2^{m_j} · 4^ℓ · s_{ν*}`.
pub fn mlmc_model_cost(params: &ScheduleParams, n: usize, nu_star: usize) -> u128 {
    let s = params.schedule_s(nu_star) as u128;
    let mut total = 0u128;
    for j in 0..=n {
        for ell in 0..=n - j {
            total += (1u128 << params.schedule_m(j)) * (1u128 << (2 * ell)) * s;
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEstimate {
    pub ell: usize,
    pub nu: usize,
    pub samples: u64,
    pub mean: f64,
    pub sample_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MIResult {
    pub n: usize,
    pub value: f64,
    pub cost_model: f64,
    pub cost_model_exact: u128,
    pub walltime: f64,
    pub per_index: Vec<IndexEstimate>,
}

/// The multi-index estimate `G_N`. Sample streams are keyed by
/// `(seed, tag, ℓ, ν)`.
pub fn combine_estimate(set: &ProblemSet, n: usize, seed: u64, tag: u64) -> Result<MIResult> {
    let params = set.schedule;
    let start = Instant::now();
    let mut per_index = Vec::new();
    for ell in 0..=n {
        for nu in 0..=n - ell {
            let m = params.samples(n - ell - nu)?;
            let key = StreamKey::new(seed, tag, ell, nu);
            let s_prev = if nu == 0 {
                0
            } else {
                params.schedule_s(nu - 1)
            };
            let s = params.schedule_s(nu);
            let est = if set.term_vanishes(ell, nu) {
                McEstimate {
                    mean: 0.0,
                    sample_variance: 0.0,
                    n: m as usize,
                }
            } else {
                let eval = |w: &_| double_difference(set, ell, nu, w).map(|d| d.value);
                match params.variant {
                    Variant::Plain => mc_plain(eval, m as usize, s, key)?,
                    Variant::Symmetrized => mc_symmetrized(eval, m as usize, s, s_prev, key)?,
                }
            };
            per_index.push(IndexEstimate {
                ell,
                nu,
                samples: m,
                mean: est.mean,
                sample_variance: est.sample_variance,
            });
        }
    }
    let cost = model_cost(&params, n);
    Ok(MIResult {
        n,
        value: per_index.iter().map(|e| e.mean).sum(),
        cost_model: cost as f64,
        cost_model_exact: cost,
        walltime: start.elapsed().as_secs_f64(),
        per_index,
    })
}

/// Multilevel baseline over mesh levels only, every level truncated at
/// `s_{ν*}`. Plain Monte Carlo with `2^{m_{N−ℓ}}` samples on level `ℓ`.
pub fn mlmc_baseline(
    set: &ProblemSet,
    n: usize,
    nu_star: usize,
    seed: u64,
    tag: u64,
) -> Result<MIResult> {
    let params = set.schedule;
    let start = Instant::now();
    let s = params.schedule_s(nu_star);
    let mut per_index = Vec::new();
    for ell in 0..=n {
        let m = params.samples(n - ell)?;
        let key = StreamKey::new(seed, tag, ell, usize::MAX);
        let est = if set.level_is_trivial(ell) {
            McEstimate {
                mean: 0.0,
                sample_variance: 0.0,
                n: m as usize,
            }
        } else {
            mc_plain(|w| level_difference(set, ell, s, w), m as usize, s, key)?
        };
        per_index.push(IndexEstimate {
            ell,
            nu: nu_star,
            samples: m,
            mean: est.mean,
            sample_variance: est.sample_variance,
        });
    }
    let cost = mlmc_model_cost(&params, n, nu_star);
    Ok(MIResult {
        n,
        value: per_index.iter().map(|e| e.mean).sum(),
        cost_model: cost as f64,
        cost_model_exact: cost,
        walltime: start.elapsed().as_secs_f64(),
        per_index,
    })
}
