//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{LoadKind, ProblemOptions};
use crate::mesh::GradingParams;
use crate::multiindex::{Experiment, ScheduleParams, Variant};
use crate::solver::SolverSettings;

/// `workers = 4` or `workers = "auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    #[default]
    Auto,
    Fixed(usize),
}

impl Serialize for Workers {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Workers::Auto => s.serialize_str("auto"),
            Workers::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Workers {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("workers must be at least 1")),
            Raw::Count(n) => Ok(Workers::Fixed(n)),
            Raw::Name(s) if s == "auto" => Ok(Workers::Auto),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "workers: expected a count or \"auto\", got `{s}`"
            ))),
        }
    }
}

impl Workers {
    pub fn pool(self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Workers::Fixed(n) = self {
            b = b.num_threads(n);
        }
        b.build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    MultiIndex,
    /// Mesh levels only, truncation fixed at `s_{ν*}`.
    Multilevel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Defaults to `n_max + 2` (square) or `n_max + 1` (L-shape).
    pub n_ref: Option<usize>,
    /// Seed of the reference estimate; defaults to the run seed.
    pub seed: Option<u64>,
    /// JSON cache; recomputed when its fingerprint does not match.
    pub cache: Option<PathBuf>,
    /// Fixed reference value, bypassing estimation.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub variant: Variant,
    pub n_max: usize,
    pub runs: usize,
    pub seed: u64,
    pub workers: Workers,
    pub method: Method,
    /// Truncation index of the multilevel baseline; defaults to `N`.
    pub nu_star: Option<usize>,
    /// First `N` entering the fitted slopes.
    pub fit_from: usize,
    /// Multiplies every coefficient mode.
    pub amplitude: f64,
    pub load: Option<LoadKind>,
    pub quadrature_extra: usize,
    pub solver: SolverSettings,
    pub grading: GradingParams,
    pub reference: ReferenceConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Square,
            variant: Variant::Plain,
            n_max: 4,
            runs: 1,
            seed: 0,
            workers: Workers::Auto,
            method: Method::MultiIndex,
            nu_star: None,
            fit_from: 3,
            amplitude: 1.0,
            load: None,
            quadrature_extra: 0,
            solver: SolverSettings::default(),
            grading: GradingParams::default(),
            reference: ReferenceConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(
        experiment: Experiment,
        variant: Variant,
        n_max: usize,
        runs: usize,
        seed: u64,
    ) -> Self {
        Self {
            experiment,
            variant,
            n_max,
            runs,
            seed,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative output and cache paths are resolved against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.output.csv,
            &mut cfg.output.json,
            &mut cfg.reference.cache,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.n_max > 24 {
            return Err(Error::Config(format!(
                "n_max = {} is beyond any feasible budget",
                self.n_max
            )));
        }
        if let Some(n_ref) = self.reference.n_ref {
            if n_ref <= self.n_max {
                return Err(Error::Config(format!(
                    "reference level {n_ref} must exceed n_max = {}",
                    self.n_max
                )));
            }
        }
        if !(self.solver.tol_base > 0.0)
            || !(self.solver.tol_floor > 0.0)
            || self.solver.max_iter == 0
        {
            return Err(Error::Config(
                "solver tolerances and max_iter must be positive".into(),
            ));
        }
        self.grading.validate()?;
        self.schedule().validate()
    }

    pub fn schedule(&self) -> ScheduleParams {
        ScheduleParams::preset(self.experiment, self.variant)
    }

    pub fn problem_options(&self) -> ProblemOptions {
        ProblemOptions {
            load: self.load,
            amplitude: self.amplitude,
            quadrature_extra: self.quadrature_extra,
            grading: self.grading,
            solver: self.solver,
        }
    }

    pub fn n_ref(&self) -> usize {
        self.reference.n_ref.unwrap_or(match self.experiment {
            Experiment::Square => self.n_max + 2,
            Experiment::Lshape => self.n_max + 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            experiment = "lshape"
            variant = "symmetrized"
            n_max = 3
            runs = 4
            seed = 18446744073709551615
            workers = "auto"
            [solver]
            tol_base = 1e-9
            max_iter = 500
            [grading]
            c_grade = 0.5
            [reference]
            n_ref = 5
            [output]
            csv = "out.csv"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Lshape);
        assert_eq!(cfg.seed, u64::MAX);
        assert_eq!(cfg.solver.max_iter, 500);
        assert_eq!(cfg.solver.tol_floor, 1e-14);
        assert_eq!(cfg.grading.exponent, 1.0 / 3.0);
        assert_eq!(cfg.n_ref(), 5);
        assert_eq!(cfg.workers, Workers::Auto);
    }

    #[test]
    fn defaults_and_rejections() {
        let cfg = ExperimentConfig::from_toml_str("workers = 3").unwrap();
        assert_eq!((cfg.workers, cfg.n_ref()), (Workers::Fixed(3), 6));
        assert!(ExperimentConfig::from_toml_str("runs = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("workers = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("workers = \"many\"").is_err());
        assert!(ExperimentConfig::from_toml_str("n_max = 4\n[reference]\nn_ref = 4").is_err());
        assert!(ExperimentConfig::from_toml_str("experiment = \"cube\"").is_err());
        assert!(ExperimentConfig::from_toml_str("typo_key = 1").is_err());
    }
}
