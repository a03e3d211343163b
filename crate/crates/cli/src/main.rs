use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimcfem::harness::{
    experiment_mesh, mesh_report, run_convergence, run_selftest, write_size_scatter,
    ConvergenceReport, ExperimentConfig, Method, SelftestOptions, Workers,
};
use mimcfem::mesh::{write_mesh, GradingParams};
use mimcfem::multiindex::{Experiment, Variant};

#[derive(Parser)]
#[command(
    name = "mimcfem",
    version,
    about = "Multi-index Monte Carlo finite elements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Convergence study against a self-reference.
    Convergence {
        #[arg(long, value_parser = parse_experiment)]
        experiment: Experiment,
        #[arg(long, value_parser = parse_variant, default_value = "plain")]
        variant: Variant,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output.
        #[arg(long)]
        out: PathBuf,
        /// JSON summary; defaults to the CSV path with a `.json` extension.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Reference level; defaults to n_max + 2 (square) or n_max + 1 (L-shape).
        #[arg(long)]
        n_ref: Option<usize>,
        #[arg(long)]
        reference_cache: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Mesh levels only, with the truncation of index N on every level.
        #[arg(long)]
        multilevel: bool,
    },
    /// Size, conformity and grading of one mesh level.
    MeshStats {
        #[arg(long, value_parser = parse_experiment)]
        experiment: Experiment,
        #[arg(long)]
        level: usize,
        /// Writes the mesh in the plain-text dump format.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Writes `distance,diameter` per triangle.
        #[arg(long)]
        scatter: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Fast invariant suite, one verdict per line.
    Selftest {
        /// Negative control: reverse the mode order in the annihilation check.
        #[arg(long, hide = true)]
        corrupt_mode_order: bool,
    },
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|e: mimcfem::Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: mimcfem::Error| e.to_string())
}

fn print_report(report: &ConvergenceReport) {
    let s = &report.summary;
    if let Some(r) = &s.reference {
        println!(
            "reference N={} value={:.10e}{}",
            r.n_ref,
            r.value,
            if r.from_cache { " (cached)" } else { "" }
        );
    }
    println!(
        "{:>3} {:>14} {:>14} {:>14} {:>14}",
        "N", "mean_rel_err", "ci90_low", "ci90_high", "cost_model"
    );
    for l in &s.per_n {
        println!(
            "{:>3} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            l.n, l.mean_rel_error, l.ci90_low, l.ci90_high, l.mean_cost_model
        );
    }
    if let Some(sl) = &s.slopes {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!(
            "slopes from N={}: log2 error vs N {}, vs log2 cost {}",
            sl.fit_from,
            fmt(sl.rel_error_vs_n),
            fmt(sl.rel_error_vs_cost)
        );
    }
}

fn execute(cli: Cli) -> mimcfem::Result<bool> {
    match cli.command {
        Command::Run { config, workers } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(w) = workers {
                cfg.workers = Workers::Fixed(w.max(1));
            }
            print_report(&run_convergence(&cfg)?);
            Ok(true)
        }
        Command::Convergence {
            experiment,
            variant,
            n_max,
            runs,
            seed,
            out,
            json,
            n_ref,
            reference_cache,
            workers,
            multilevel,
        } => {
            let mut cfg = ExperimentConfig::new(experiment, variant, n_max, runs, seed);
            cfg.output.json = Some(json.unwrap_or_else(|| out.with_extension("json")));
            cfg.output.csv = Some(out);
            cfg.reference.n_ref = n_ref;
            cfg.reference.cache = reference_cache;
            if let Some(w) = workers {
                cfg.workers = Workers::Fixed(w.max(1));
            }
            if multilevel {
                cfg.method = Method::Multilevel;
            }
            print_report(&run_convergence(&cfg)?);
            Ok(true)
        }
        Command::MeshStats {
            experiment,
            level,
            dump,
            scatter,
            json,
        } => {
            let grading = GradingParams::default();
            let mesh = experiment_mesh(experiment, level, &grading)?;
            let report = mesh_report(experiment, &mesh, &grading);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!(
                    "{} level {}: {} triangles, {} vertices, h_max {:.6e}, h_min {:.6e}, conforming {}, grading violations {}",
                    experiment.name(),
                    level,
                    report.n_triangles,
                    report.n_vertices,
                    report.h_max,
                    report.h_min,
                    report.conforming,
                    report.grading_violations
                );
            }
            let create = |p: &PathBuf| {
                std::fs::File::create(p)
                    .map(std::io::BufWriter::new)
                    .map_err(|e| mimcfem::Error::Io {
                        path: p.clone(),
                        source: e,
                    })
            };
            if let Some(p) = &dump {
                write_mesh(&mesh, create(p)?).map_err(|e| mimcfem::Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
            }
            if let Some(p) = &scatter {
                write_size_scatter(&mesh, create(p)?).map_err(|e| mimcfem::Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
            }
            Ok(report.conforming && report.grading_violations == 0)
        }
        Command::Selftest { corrupt_mode_order } => {
            let mut ok = true;
            for check in run_selftest(SelftestOptions { corrupt_mode_order }) {
                println!("{check}");
                ok &= check.passed;
            }
            println!("selftest {}", if ok { "PASSED" } else { "FAILED" });
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprint!(": {s}");
                source = s.source();
            }
            eprintln!();
            ExitCode::from(2)
        }
    }
}
