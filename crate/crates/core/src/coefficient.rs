//! The affine sine-series diffusion coefficient
//!
//! ```text
//! A(x, ω) = φ₀ + Σ_j ω_j μ_j⁻¹ sin(k1_j π x) sin(k2_j π y),   μ_j = (k1_j² + k2_j²)²
//! ```
//!
//! with `ω_j` uniform on `[−1/2, 1/2]`. Modes are ordered by `μ` and ties are
//! broken lexicographically in `(k1, k2)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::multiindex::ScheduleParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeIndex {
    /// 1-based position in the global ordering.
    pub j: usize,
    pub k1: u32,
    pub k2: u32,
    pub mu: f64,
}

impl ModeIndex {
    /// Upper bound for the `W^{1,∞}` norm of the weighted mode
    /// `μ⁻¹ sin(k1 π x) sin(k2 π y)`.
    pub fn w1inf_bound(&self) -> f64 {
        (1.0 + PI * self.k1.max(self.k2) as f64) / self.mu
    }
}

fn pairs_within(radius_sq: u64) -> Vec<(u64, u32, u32)> {
    let kmax = (radius_sq as f64).sqrt().floor() as u64 + 1;
    let mut pairs = Vec::new();
    for k1 in 1..=kmax {
        for k2 in 1..=kmax {
            let n = k1 * k1 + k2 * k2;
            if n <= radius_sq {
                pairs.push((n, k1 as u32, k2 as u32));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// The first `count` frequency pairs ordered by `μ`, ties by `(k1, k2)`.
pub fn enumerate_modes(count: usize) -> Vec<ModeIndex> {
    if count == 0 {
        return Vec::new();
    }
    // every pair with k1² + k2² ≤ R² is enumerated, so the prefix is exact
    // once at least `count` pairs are inside the disc
    let mut radius_sq = 16u64;
    let pairs = loop {
        let pairs = pairs_within(radius_sq);
        if pairs.len() >= count {
            break pairs;
        }
        radius_sq *= 4;
    };
    pairs
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(i, (n, k1, k2))| ModeIndex {
            j: i + 1,
            k1,
            k2,
            mu: (n * n) as f64,
        })
        .collect()
}

/// Upper bound for `Σ_{j > count} μ_j⁻¹`: exact partial sum over the disc
/// `k1² + k2² ≤ R²` plus the integral bound `π / (4 (R − √2)²)` for the rest.
pub fn tail_bound_after(count: usize) -> f64 {
    let mut radius = 256.0f64;
    let mut pairs = pairs_within((radius * radius) as u64);
    while pairs.len() < count + 1 {
        radius *= 2.0;
        pairs = pairs_within((radius * radius) as u64);
    }
    let inside: f64 = pairs
        .iter()
        .skip(count)
        .map(|&(n, _, _)| 1.0 / (n * n) as f64)
        .sum();
    inside + PI / (4.0 * (radius - 2f64.sqrt()).powi(2))
}

/// One realization `ω`, every entry in `[−1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 0.5)) {
            return Err(Error::Dimension(format!(
                "parameter {v} outside [-1/2, 1/2]"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Copy with the signs of coordinates `keep..total` (0-based) flipped.
    pub fn flipped(&self, keep: usize, total: usize) -> Self {
        let mut v = self.0.clone();
        for x in &mut v[keep..total] {
            *x = -*x;
        }
        Self(v)
    }

    /// Copy with every coordinate past `len` set to zero.
    pub fn truncated(&self, len: usize) -> Self {
        let mut v = self.0.clone();
        for x in v.iter_mut().skip(len) {
            *x = 0.0;
        }
        Self(v)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientExpansion {
    pub phi0: f64,
    pub modes: Vec<ModeIndex>,
    /// Decay exponent of `‖φ_j‖_{W^{1,∞}}`; `r = 2` for this series.
    pub r: f64,
    /// Multiplies every mode weight; `0` freezes the coefficient at `φ₀`.
    pub amplitude: f64,
    /// Whether the stored modes truncate an infinite series (certificates then
    /// include the tail beyond the stored modes).
    pub infinite: bool,
    weight_prefix: Vec<f64>,
    tail_beyond_stored: f64,
}

impl CoefficientExpansion {
    /// The infinite series, storing its first `max_modes` terms.
    pub fn new(phi0: f64, max_modes: usize) -> Self {
        Self::build(phi0, enumerate_modes(max_modes), 1.0, true)
    }

    /// A finite expansion consisting exactly of `modes`.
    pub fn finite(phi0: f64, modes: Vec<ModeIndex>) -> Self {
        Self::build(phi0, modes, 1.0, false)
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        let infinite = self.infinite;
        self = Self::build(
            self.phi0,
            std::mem::take(&mut self.modes),
            amplitude,
            infinite,
        );
        self
    }

    fn build(phi0: f64, modes: Vec<ModeIndex>, amplitude: f64, infinite: bool) -> Self {
        let mut weight_prefix = Vec::with_capacity(modes.len() + 1);
        weight_prefix.push(0.0);
        let mut acc = 0.0;
        for m in &modes {
            acc += amplitude.abs() / m.mu;
            weight_prefix.push(acc);
        }
        let tail_beyond_stored = if infinite {
            amplitude.abs() * tail_bound_after(modes.len())
        } else {
            0.0
        };
        Self {
            phi0,
            modes,
            r: 2.0,
            amplitude,
            infinite,
            weight_prefix,
            tail_beyond_stored,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Weight `amplitude / μ_j` of the 0-based mode `i`.
    pub fn weight(&self, i: usize) -> f64 {
        self.amplitude / self.modes[i].mu
    }

    /// Value of mode `i` (0-based, weight included) at `p`.
    pub fn mode_value(&self, i: usize, p: Point2) -> f64 {
        let m = &self.modes[i];
        self.weight(i) * (m.k1 as f64 * PI * p.x).sin() * (m.k2 as f64 * PI * p.y).sin()
    }

    /// `A^s(x, ω)`: the series truncated to its first `s` modes.
    pub fn evaluate(&self, omega: &ParamVector, s: usize, p: Point2) -> Result<f64> {
        if s > omega.len() || s > self.n_modes() {
            return Err(Error::Dimension(format!(
                "truncation {s} exceeds parameter length {} or stored modes {}",
                omega.len(),
                self.n_modes()
            )));
        }
        let mut a = self.phi0;
        for i in 0..s {
            a += omega[i] * self.mode_value(i, p);
        }
        Ok(a)
    }

    /// `(Σ_{j ≤ s} |w_j|, bound on Σ_{j > s} |w_j|)`.
    pub fn weight_sums(&self, s: usize) -> Result<(f64, f64)> {
        if s > self.n_modes() {
            return Err(Error::Dimension(format!(
                "truncation {s} exceeds stored modes {}",
                self.n_modes()
            )));
        }
        let head = self.weight_prefix[s];
        let stored_tail = self.weight_prefix[self.n_modes()] - head;
        Ok((head, stored_tail + self.tail_beyond_stored))
    }

    /// Uniform bounds `a_min ≤ A^ν(x, ω) ≤ a_max`, valid for every truncation
    /// and every `ω ∈ [−1/2, 1/2]^ℕ`.
    pub fn certify_bounds(&self, s: usize) -> Result<(f64, f64)> {
        let (head, tail) = self.weight_sums(s)?;
        let spread = 0.5 * (head + tail);
        let (a_min, a_max) = (self.phi0 - spread, self.phi0 + spread);
        if !(a_min > 0.0) {
            return Err(Error::CoefficientValidity { a_min });
        }
        Ok((a_min, a_max))
    }
}

/// Truncation dimension `s_ν` of the configured schedule.
pub fn truncation_dimension(schedule: &ScheduleParams, nu: usize) -> usize {
    schedule.schedule_s(nu)
}
