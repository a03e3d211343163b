//! Realization-wise functionals `G(u_ℓ^ν(ω))` and double differences.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{load_constant_nodal, load_diagonal_nodal, qoi_box_nodal, AssembledProblem};
use crate::coefficient::{CoefficientExpansion, ParamVector};
use crate::error::{Error, Result};
use crate::mesh::{
    graded_lshape_hierarchy, uniform_square_mesh, BoxRegion, GradingParams, TriMesh,
};
use crate::multiindex::{Experiment, ScheduleParams};
use crate::quadrature::TriangleRule;
use crate::solver::{solve_with_guess, Solution, SolverSettings};

/// Mean value of `φ₀` in the experiments.
pub const PHI0: f64 = 0.5;

/// Right-hand side of the model problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    /// Weighted line load on the anti-diagonal of the unit square.
    Diagonal,
    /// `f = 1`.
    Constant,
}

/// Knobs for building a [`ProblemSet`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOptions {
    /// Overrides the preset load.
    pub load: Option<LoadKind>,
    /// Multiplies every coefficient mode; zero freezes `A = φ₀`.
    pub amplitude: f64,
    /// Extra Gauss points per direction beyond the resolution estimate.
    pub quadrature_extra: usize,
    pub grading: GradingParams,
    pub solver: SolverSettings,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self {
            load: None,
            amplitude: 1.0,
            quadrature_extra: 0,
            grading: GradingParams::default(),
            solver: SolverSettings::default(),
        }
    }
}

impl Experiment {
    pub fn default_load(self) -> LoadKind {
        match self {
            Experiment::Square => LoadKind::Diagonal,
            Experiment::Lshape => LoadKind::Constant,
        }
    }

    /// Box whose average defines the quantity of interest.
    pub fn qoi_region(self) -> BoxRegion {
        match self {
            Experiment::Square => BoxRegion::new(0.5, 1.0, 0.5, 1.0),
            Experiment::Lshape => BoxRegion::new(0.0, 0.5, 0.0, 0.5),
        }
    }

    /// Meshes for levels `0..=max_level`.
    pub fn meshes(self, max_level: usize, grading: &GradingParams) -> Result<Vec<TriMesh>> {
        match self {
            Experiment::Square => (0..=max_level).map(uniform_square_mesh).collect(),
            Experiment::Lshape => graded_lshape_hierarchy(max_level, grading),
        }
    }
}

/// Collapsed Gauss rule resolving `sin(kπx)` across a triangle of diameter
/// `h`: roughly one point per half-wavelength plus a fixed margin.
pub fn mode_quadrature(k_max: u32, h: f64, extra: usize) -> TriangleRule {
    let waves = (k_max as f64 * std::f64::consts::PI * h).ceil() as usize;
    TriangleRule::collapsed_gauss(4 + waves + extra)
}

/// Assembled problems for a range of mesh levels, with the schedule that
/// maps truncation indices to mode counts.
#[derive(Debug, Clone)]
pub struct ProblemSet {
    pub schedule: ScheduleParams,
    pub solver: SolverSettings,
    pub load: LoadKind,
    pub expansion: CoefficientExpansion,
    problems: Vec<AssembledProblem>,
}

impl ProblemSet {
    /// Levels `0..modes.len()`, level `ℓ` carrying `modes[ℓ]` coefficient modes.
    pub fn with_modes(
        schedule: ScheduleParams,
        modes: &[usize],
        options: &ProblemOptions,
    ) -> Result<Self> {
        schedule.validate()?;
        options.grading.validate()?;
        if modes.is_empty() {
            return Err(Error::Config("at least one mesh level is required".into()));
        }
        let experiment = schedule.experiment;
        let max_modes = modes.iter().copied().max().unwrap_or(0);
        let expansion =
            CoefficientExpansion::new(PHI0, max_modes).with_amplitude(options.amplitude);
        expansion.certify_bounds(max_modes)?;
        let load = options.load.unwrap_or(experiment.default_load());
        let region = experiment.qoi_region();
        let meshes = experiment.meshes(modes.len() - 1, &options.grading)?;
        let problems = meshes
            .into_par_iter()
            .zip(modes.par_iter())
            .map(|(mesh, &s)| {
                let load_nodal = match load {
                    LoadKind::Diagonal => load_diagonal_nodal(&mesh)?,
                    LoadKind::Constant => load_constant_nodal(&mesh),
                };
                let qoi = qoi_box_nodal(&mesh, &region);
                let scale = 1.0 / region.area();
                let qoi: Vec<f64> = qoi.iter().map(|q| q * scale).collect();
                let k_max = expansion.modes[..s]
                    .iter()
                    .map(|m| m.k1.max(m.k2))
                    .max()
                    .unwrap_or(0);
                let rule = mode_quadrature(k_max, mesh.stats().h_max, options.quadrature_extra);
                AssembledProblem::new(mesh, &expansion, s, &load_nodal, &qoi, &rule)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            schedule,
            solver: options.solver,
            load,
            expansion,
            problems,
        })
    }

    /// Everything the simplex `ℓ + ν ≤ n` touches: level `ℓ` gets `s_{n−ℓ}` modes.
    pub fn for_simplex(
        schedule: ScheduleParams,
        n: usize,
        options: &ProblemOptions,
    ) -> Result<Self> {
        let modes: Vec<usize> = (0..=n).map(|ell| schedule.schedule_s(n - ell)).collect();
        Self::with_modes(schedule, &modes, options)
    }

    pub fn n_levels(&self) -> usize {
        self.problems.len()
    }

    pub fn level(&self, ell: usize) -> Result<&AssembledProblem> {
        self.problems.get(ell).ok_or_else(|| {
            Error::Dimension(format!(
                "level {ell} not assembled ({} levels)",
                self.problems.len()
            ))
        })
    }

    pub fn truncation(&self, nu: usize) -> usize {
        self.schedule.schedule_s(nu)
    }

    /// No interior unknowns: every functional on this level is zero.
    pub fn level_is_trivial(&self, ell: usize) -> bool {
        self.problems.get(ell).is_some_and(|p| p.n_dofs() == 0)
    }

    /// `D_ℓ^ν ≡ 0`, either because the mesh has no unknowns or because the
    /// truncation does not grow from `ν − 1` to `ν`.
    pub fn term_vanishes(&self, ell: usize, nu: usize) -> bool {
        self.level_is_trivial(ell) || (nu > 0 && self.truncation(nu) == self.truncation(nu - 1))
    }

    /// Galerkin solve on level `ℓ` with `s` modes.
    pub fn solve(
        &self,
        ell: usize,
        s: usize,
        omega: &ParamVector,
        guess: Option<&[f64]>,
    ) -> Result<Solution> {
        let p = self.level(ell)?;
        let a = p.combine(omega, s)?;
        solve_with_guess(
            &a,
            &p.load,
            guess,
            self.solver.tolerance(ell),
            self.solver.max_iter,
        )
    }

    fn functional(
        &self,
        ell: usize,
        s: usize,
        omega: &ParamVector,
        guess: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let sol = self.solve(ell, s, omega, guess)?;
        Ok((self.problems[ell].functional(&sol.x), sol.x))
    }

    /// `(G(u_ℓ^{s}), G(u_ℓ^{s_prev}))`, the second solve warm-started from the first.
    fn truncation_pair(
        &self,
        ell: usize,
        s: usize,
        s_prev: Option<usize>,
        omega: &ParamVector,
    ) -> Result<(f64, f64)> {
        let (g, x) = self.functional(ell, s, omega, None)?;
        let g_prev = match s_prev {
            Some(sp) => self.functional(ell, sp, omega, Some(&x))?.0,
            None => 0.0,
        };
        Ok((g, g_prev))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelPair {
    pub ell: usize,
    pub nu: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDiffSample {
    pub value: f64,
    /// `4^ℓ · s_ν`
    pub cost_model: f64,
    pub walltime: f64,
}

/// `G(u_ℓ^ν(ω))` solved at the level tolerance.
pub fn functional_of_solution(
    set: &ProblemSet,
    ell: usize,
    nu: usize,
    omega: &ParamVector,
) -> Result<f64> {
    Ok(set.functional(ell, set.truncation(nu), omega, None)?.0)
}

/// `[G(u_ℓ^ν) − G(u_{ℓ−1}^ν)] − [G(u_ℓ^{ν−1}) − G(u_{ℓ−1}^{ν−1})]` for one
/// `ω`, terms with index `−1` being zero.
pub fn double_difference(
    set: &ProblemSet,
    ell: usize,
    nu: usize,
    omega: &ParamVector,
) -> Result<DoubleDiffSample> {
    let start = Instant::now();
    let s = set.truncation(nu);
    let cost_model = 4f64.powi(ell as i32) * s as f64;
    let value = if set.term_vanishes(ell, nu) {
        0.0
    } else {
        let s_prev = (nu > 0).then(|| set.truncation(nu - 1));
        let (fine, fine_prev) = set.truncation_pair(ell, s, s_prev, omega)?;
        let (coarse, coarse_prev) = if ell > 0 {
            set.truncation_pair(ell - 1, s, s_prev, omega)?
        } else {
            (0.0, 0.0)
        };
        (fine - coarse) - (fine_prev - coarse_prev)
    };
    Ok(DoubleDiffSample {
        value,
        cost_model,
        walltime: start.elapsed().as_secs_f64(),
    })
}

/// `G(u_ℓ^s) − G(u_{ℓ−1}^s)` at a fixed number of modes.
pub fn level_difference(
    set: &ProblemSet,
    ell: usize,
    s: usize,
    omega: &ParamVector,
) -> Result<f64> {
    let fine = set.functional(ell, s, omega, None)?.0;
    let coarse = if ell > 0 {
        set.functional(ell - 1, s, omega, None)?.0
    } else {
        0.0
    };
    Ok(fine - coarse)
}
