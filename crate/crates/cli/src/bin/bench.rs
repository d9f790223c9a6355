use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hsdmpg_cli::spec::ReferenceSettings;
use hsdmpg_cli::{
    cached_reference, compute_reference, parse_overrides, run_experiment, scaling_study, Error,
    ExperimentSpec, ScalingOptions,
};
use hsdmpg_core::{load_libsvm, ErmProblem, LossModel};

#[derive(Parser)]
#[command(name = "bench", version, about = "HSDMPG benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (solver, seed) cell of a spec file.
    Run {
        spec: PathBuf,
        /// `key=value`, applied after the experiment file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// IFO-to-target scaling over synthetic dataset sizes.
    Scale {
        spec: PathBuf,
        /// Dataset sizes (at least four).
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        sizes: Vec<usize>,
        /// Hard IFO cap per run, in epochs.
        #[arg(long, default_value_t = 50.0)]
        cap_epochs: f64,
        /// Fixed number of distinct rows; duplication grows with n.
        #[arg(long)]
        base_rows: Option<usize>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compute (or look up) the optimal objective of a LibSVM dataset.
    Ref {
        dataset: PathBuf,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value = "quadratic", value_parser = ["quadratic", "logistic", "softmax"])]
        loss: String,
        /// Softmax class count; inferred from the labels by default.
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        /// Scale rows to unit norm radius.
        #[arg(long)]
        normalize: bool,
        /// Cache directory; without it nothing is cached.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn run(cli: Cli) -> hsdmpg_cli::Result<()> {
    match cli.command {
        Command::Run { spec, overrides } => {
            let spec = ExperimentSpec::load(&spec, &parse_overrides(&overrides)?)?;
            let report = run_experiment(&spec)?;
            if let Some(e) = &report.reference_error {
                eprintln!("warning: no reference optimum ({e}); suboptimality columns are empty");
            }
            println!("solver,seed,final_subopt,ifo_to_target,converged");
            for (row, cell) in report.summary.iter().zip(&report.cells) {
                println!(
                    "{},{},{},{},{}",
                    row.solver,
                    row.seed,
                    row.final_subopt.map_or("-".into(), |s| format!("{s:.3e}")),
                    row.ifo_to_target.map_or("-".into(), |x| x.to_string()),
                    cell.converged
                );
            }
            println!("wrote {}", report.summary_path.display());
        }
        Command::Scale {
            spec,
            sizes,
            cap_epochs,
            base_rows,
            overrides,
        } => {
            let spec = ExperimentSpec::load(&spec, &parse_overrides(&overrides)?)?;
            let opts = ScalingOptions {
                sizes,
                cap_epochs,
                base_rows,
            };
            let report = scaling_study(&spec, &opts)?;
            for fit in &report.fits {
                println!(
                    "{}: slope {} (r² {}, {} sizes{})",
                    fit.solver,
                    fit.slope.map_or("-".into(), |s| format!("{s:.3}")),
                    fit.r2.map_or("-".into(), |s| format!("{s:.3}")),
                    fit.sizes_used,
                    if fit.flagged() {
                        format!(", {} censored runs excluded", fit.censored_runs)
                    } else {
                        String::new()
                    }
                );
            }
            println!("wrote {} and {}", report.table_path.display(), report.fit_path.display());
        }
        Command::Ref {
            dataset,
            mu,
            loss,
            classes,
            dim,
            normalize,
            cache,
            tol,
        } => {
            let mut data = load_libsvm(&dataset, dim)?;
            if normalize {
                data = data.scaled_to_unit_radius();
            }
            let model = match loss.as_str() {
                "quadratic" => LossModel::quadratic(),
                "logistic" => LossModel::logistic(),
                _ => LossModel::softmax(match classes {
                    Some(k) => k,
                    None => data.num_classes()?,
                })?,
            };
            let problem = ErmProblem::new(data, model, mu)?;
            let settings = ReferenceSettings {
                tol,
                ..ReferenceSettings::default()
            };
            let r = match cache {
                Some(dir) => cached_reference(&problem, &settings, &dir)?,
                None => compute_reference(&problem, &settings)?,
            };
            println!(
                "{:.17e}\t{}\tgrad_norm={:.3e}{}",
                r.value,
                r.method.name(),
                r.grad_norm,
                if r.cached { "\tcached" } else { "" }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.category() as u8;
            eprintln!("error: {e}");
            if let Error::Core(inner) = &e {
                log::debug!("{inner:?}");
            }
            ExitCode::from(code)
        }
    }
}
