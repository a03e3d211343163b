//! Fast invariant suite behind the `selftest` subcommand.

use std::f64::consts::PI;
use std::time::Instant;

use crate::assembly::{assemble_stiffness, error_norms, load_function_nodal, DofMap};
use crate::coefficient::ParamVector;
use crate::error::Result;
use crate::estimator::{double_difference, functional_of_solution, ProblemOptions, ProblemSet};
use crate::mesh::{
    check_conformity, check_grading, graded_lshape_hierarchy, uniform_square_mesh, GradingParams,
};
use crate::multiindex::{model_cost, Experiment, ScheduleParams, Variant};
use crate::quadrature::TriangleRule;
use crate::sampler::{draw_omega, mc_symmetrized, StreamKey};
use crate::solver::solve;

use super::convergence::fit_slope;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelftestOptions {
    /// Negative control: evaluate the annihilation check with the mode
    /// order reversed, so the flipped coordinates no longer form the tail.
    pub corrupt_mode_order: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<14} {}  {} ({:.2}s)",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail,
            self.seconds
        )
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckResult {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Largest deviation of `Σ_{ℓ≤L, ν≤V} G(D_ℓ^ν)` from the direct `G(u_L^V)`
/// over `samples` random parameters on the square.
pub fn telescoping_defect(
    levels: usize,
    truncations: usize,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    let schedule = ScheduleParams::preset(Experiment::Square, Variant::Plain);
    let s = schedule.schedule_s(truncations);
    let set = ProblemSet::with_modes(schedule, &vec![s; levels + 1], &ProblemOptions::default())?;
    let mut worst = 0.0f64;
    for i in 0..samples {
        let omega = draw_omega(&StreamKey::new(seed, 0x7465_6c65, 0, 0).stream(i), s);
        let mut sum = 0.0;
        for ell in 0..=levels {
            for nu in 0..=truncations {
                sum += double_difference(&set, ell, nu, &omega)?.value;
            }
        }
        let direct = functional_of_solution(&set, levels, truncations, &omega)?;
        worst = worst.max((sum - direct).abs());
    }
    Ok(worst)
}

/// Largest `|mean|` of the symmetrized rule over `count` random members
/// `α(ω_1..ω_keep) · Σ_{i>keep} c_i ω_i` of the annihilated space, each
/// relative to the mean absolute value of its integrand.
pub fn annihilation_defect(
    keep: usize,
    total: usize,
    count: u64,
    seed: u64,
    corrupt_mode_order: bool,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for f in 0..count {
        let coeffs = draw_omega(
            &StreamKey::new(seed, 0x616e_6e69, keep, total).stream(f),
            total + 3,
        );
        let c = coeffs.as_slice().to_vec();
        // coordinate i of the rule feeds mode position order[i]
        let order: Vec<usize> = if corrupt_mode_order {
            (0..total).rev().collect()
        } else {
            (0..total).collect()
        };
        let g = |w: &ParamVector| {
            let mode = |i: usize| w[order[i]];
            let alpha = (c[0] + (0..keep).map(|i| c[i % 3 + 1] * mode(i)).sum::<f64>()).exp();
            // offset keeps tail coefficients away from zero
            let tail: f64 = (keep..total).map(|i| (c[3 + i] + 0.75) * mode(i)).sum();
            Ok(alpha * tail)
        };
        let key = StreamKey::new(seed, 0x616e_6e69, f as usize, 1);
        let est = mc_symmetrized(g, 64, total, keep, key)?;
        let scale = crate::sampler::mc_plain(|w| g(w).map(f64::abs), 64, total, key)?.mean;
        if scale > 0.0 {
            worst = worst.max(est.mean.abs() / scale);
        }
    }
    Ok(worst)
}

/// `(h, ‖u − u_h‖_{L²}, |u − u_h|_{H¹})` on uniform square meshes for
/// `−Δu = 2π² sin(πx) sin(πy)`.
pub fn manufactured_errors(
    levels: std::ops::RangeInclusive<usize>,
) -> Result<Vec<(f64, f64, f64)>> {
    let u = |p: crate::mesh::Point2| (PI * p.x).sin() * (PI * p.y).sin();
    let grad = |p: crate::mesh::Point2| {
        [
            PI * (PI * p.x).cos() * (PI * p.y).sin(),
            PI * (PI * p.x).sin() * (PI * p.y).cos(),
        ]
    };
    let rule = TriangleRule::collapsed_gauss(6);
    levels
        .map(|level| {
            let mesh = uniform_square_mesh(level)?;
            let dofs = DofMap::new(&mesh);
            let a = assemble_stiffness(&mesh, |_| 1.0, &rule)?;
            let b = dofs.restrict(&load_function_nodal(&mesh, |p| 2.0 * PI * PI * u(p), &rule));
            let x = solve(&a, &b, 1e-13, 100_000)?.x;
            let (l2, h1) = error_norms(&mesh, &dofs.extend(&x), u, grad, &rule);
            Ok((mesh.stats().h_max, l2, h1))
        })
        .collect()
}

/// `Σ_{j+ℓ+ν≤N} 2^{m_j} 4^ℓ s_ν` from the closed-form schedules, written
/// independently of [`ScheduleParams`].
pub fn enumerated_cost(experiment: Experiment, variant: Variant, n: usize) -> u128 {
    let m = |j: usize| -> u32 {
        match experiment {
            Experiment::Square => 3 * j as u32,
            Experiment::Lshape => (8.0 * j as f64 / 3.0 - 1e-9).ceil() as u32,
        }
    };
    let s = |nu: usize| -> u128 {
        let e = match (experiment, variant) {
            (Experiment::Square, Variant::Plain) => nu as f64,
            (Experiment::Square, Variant::Symmetrized) => nu as f64 / 2.0,
            (Experiment::Lshape, _) => 2.0 * nu as f64 / 3.0,
        };
        (2f64.powf(e) - 1e-9).ceil() as u128
    };
    let mut total = 0u128;
    for j in 0..=n {
        for ell in 0..=n {
            for nu in 0..=n {
                if j + ell + nu <= n {
                    total += 2u128.pow(m(j)) * 4u128.pow(ell as u32) * s(nu);
                }
            }
        }
    }
    total
}

pub fn run_selftest(options: SelftestOptions) -> Vec<CheckResult> {
    vec![
        timed("telescoping", || {
            let d = telescoping_defect(3, 3, 5, 11)?;
            Ok((
                d <= 1e-8,
                format!("max |sum - direct| = {d:.2e} (limit 1e-8)"),
            ))
        }),
        timed("annihilation", || {
            let mut worst = 0.0f64;
            for (keep, total) in [(1, 2), (2, 4), (4, 8)] {
                worst = worst.max(annihilation_defect(
                    keep,
                    total,
                    20,
                    5,
                    options.corrupt_mode_order,
                )?);
            }
            Ok((
                worst <= 1e-14,
                format!("max |mean|/scale = {worst:.2e} (limit 1e-14)"),
            ))
        }),
        timed("manufactured", || {
            let errs = manufactured_errors(2..=5)?;
            let lh: Vec<f64> = errs.iter().map(|e| e.0.log2()).collect();
            let l2: Vec<f64> = errs.iter().map(|e| e.1.log2()).collect();
            let h1: Vec<f64> = errs.iter().map(|e| e.2.log2()).collect();
            // h halves per level, so error ∝ h^p has slope −p per level
            let sl2 = -fit_slope(&lh, &l2).unwrap_or(f64::NAN);
            let sh1 = -fit_slope(&lh, &h1).unwrap_or(f64::NAN);
            Ok((
                (sl2 + 2.0).abs() <= 0.15 && (sh1 + 1.0).abs() <= 0.1,
                format!("L2 slope {sl2:.3}, H1 slope {sh1:.3} per level"),
            ))
        }),
        timed("conformity", || {
            let params = GradingParams::default();
            let meshes = graded_lshape_hierarchy(6, &params)?;
            let mut bad = Vec::new();
            for (level, m) in meshes.iter().enumerate() {
                if !check_conformity(m).is_conforming() || check_grading(m, &params, level) > 0 {
                    bad.push(level);
                }
            }
            Ok((
                bad.is_empty(),
                format!("graded L-shape levels 0..=6, failing levels {bad:?}"),
            ))
        }),
        timed("cost", || {
            let mut mismatches = 0;
            for e in [Experiment::Square, Experiment::Lshape] {
                for v in [Variant::Plain, Variant::Symmetrized] {
                    for n in 0..=8 {
                        if model_cost(&ScheduleParams::preset(e, v), n) != enumerated_cost(e, v, n)
                        {
                            mismatches += 1;
                        }
                    }
                }
            }
            Ok((
                mismatches == 0,
                format!("{mismatches} mismatches over N <= 8"),
            ))
        }),
    ]
}
