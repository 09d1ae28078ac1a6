//! Command-line front end: exact counts, exponential sums, singular series,
//! singular integrals, and the full convergence sweep, all emitting JSON.

use clap::{Args, Parser, Subcommand, ValueEnum};

use quadrep::counting::{self, WeightKind};
use quadrep::error::{Error, Result};
use quadrep::expsum::{self, ExpSumOptions, ExpSumQuery};
use quadrep::harness::{self, OutputFormat};
use quadrep::oscillatory::{self, QuadOptions};
use quadrep::quadform::{diagonalize, SmoothingParams};
use quadrep::singseries;

use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "quadrep", version, about = "Representation counts of quadratic forms in expanding boxes")]
struct Cli {
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format for row-oriented results.
    #[arg(long, global = true, default_value = "jsonl")]
    format: FormatArg,

    /// Seed for any randomized oracle.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for the convergence sweep.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Char,
    Gauss,
    Wplus,
    Wminus,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegralKind {
    Gaussian,
    Char,
    Oracle,
}

#[derive(Args)]
struct FormBoxArgs {
    /// JSON file with the form matrix.
    #[arg(long)]
    form: PathBuf,
    /// JSON file with the rotated-frame box.
    #[arg(long = "box")]
    box_file: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full convergence experiment from a JSON config.
    Converge {
        #[arg(long)]
        config: PathBuf,
    },
    /// Weighted or exact lattice count for one (N, P).
    Count {
        #[arg(long = "N")]
        n_target: i64,
        #[arg(long = "P")]
        p: f64,
        #[arg(long = "A", default_value_t = 1.0)]
        a: f64,
        #[arg(long, value_enum)]
        weight: WeightArg,
        #[command(flatten)]
        geometry: FormBoxArgs,
        /// Gaussian weight centre (comma-separated); default is the box centre.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Neglected-mass tolerance for the smooth weights.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Truncated singular series (and optional Euler-product cross-check).
    Series {
        #[arg(long = "N")]
        n_target: i64,
        #[arg(long = "Qmax", default_value_t = 400)]
        qmax: i64,
        /// `pMax kMax`: also compute the Euler product over p <= pMax with
        /// densities at level p^kMax.
        #[arg(long, num_args = 2)]
        euler: Option<Vec<i64>>,
        #[arg(long)]
        form: PathBuf,
    },
    /// Singular integral: closed form, quadrature, or Monte Carlo oracle.
    Integral {
        #[arg(long, value_enum)]
        kind: IntegralKind,
        #[arg(long = "N")]
        n_target: i64,
        #[arg(long = "P")]
        p: f64,
        #[arg(long = "A", default_value_t = 1.0)]
        a: f64,
        #[command(flatten)]
        geometry: FormBoxArgs,
        /// Half-width of the |F(x) - N/P^2| window for the Monte Carlo oracle.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 2_000_000)]
        samples: u64,
    },
    /// Complete exponential sum S_u(q, b, N).
    Expsum {
        #[arg(long)]
        q: i64,
        #[arg(long, default_value_t = 1)]
        u: i64,
        /// Comma-separated integer vector b.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<i64>,
        #[arg(long = "N")]
        n_target: i64,
        #[arg(long)]
        form: PathBuf,
    },
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|source| Error::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(Box::new(std::io::BufWriter::new(file)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn emit_json<T: serde::Serialize>(value: &T, out: &mut dyn Write) -> Result<()> {
    let line = serde_json::to_string(value)?;
    writeln!(out, "{line}").map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}

/// Returns the process exit code.
fn run(cli: Cli) -> Result<i32> {
    let mut out = open_output(&cli.output)?;
    match cli.command {
        Command::Converge { config } => {
            let cfg = harness::load_config(&config)?;
            let rows = harness::run_convergence(&cfg, cli.threads)?;
            let format = match cli.format {
                FormatArg::Jsonl => OutputFormat::JsonLines,
                FormatArg::Csv => OutputFormat::Csv,
            };
            harness::emit(&rows, format, &mut out)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows flagged an error", rows.len());
                return Ok(1);
            }
        }
        Command::Count {
            n_target,
            p,
            a,
            weight,
            geometry,
            x0,
            tol,
        } => {
            let form = harness::load_form(&geometry.form)?;
            let box_spec = harness::load_box(&geometry.box_file)?;
            let diag = diagonalize(&form)?;
            let x0 = x0.unwrap_or_else(|| diag.rotate_from_star(&box_spec.c_star));
            let norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
            let params = SmoothingParams::with_x0_bound(p, a, x0, norm + 4.0)?;
            let kind = match weight {
                WeightArg::Char => WeightKind::Characteristic {
                    box_spec: box_spec.clone(),
                    dilation: 1.0,
                },
                WeightArg::Gauss => WeightKind::Gaussian,
                WeightArg::Wplus => WeightKind::SandwichPlus {
                    box_spec: box_spec.clone(),
                },
                WeightArg::Wminus => WeightKind::SandwichMinus {
                    box_spec: box_spec.clone(),
                },
            };
            let result = counting::count(n_target, &kind, &form, &diag, &params, tol)?;
            emit_json(&result, &mut out)?;
        }
        Command::Series {
            n_target,
            qmax,
            euler,
            form,
        } => {
            let form = harness::load_form(&form)?;
            let opts = ExpSumOptions::default();
            let mut estimate = singseries::singular_series(n_target, qmax, &form, &opts)?;
            if let Some(pair) = euler {
                let (p_max, k_max) = (pair[0], pair[1]);
                if k_max < 1 || k_max > u32::MAX as i64 {
                    return Err(Error::OutOfRange(format!("kMax = {k_max}")));
                }
                estimate.euler_value = Some(singseries::singular_series_euler(
                    n_target, p_max, k_max as u32, &form, &opts,
                )?);
            }
            emit_json(&estimate, &mut out)?;
        }
        Command::Integral {
            kind,
            n_target,
            p,
            a,
            geometry,
            epsilon,
            samples,
        } => {
            let form = harness::load_form(&geometry.form)?;
            let box_spec = harness::load_box(&geometry.box_file)?;
            let diag = diagonalize(&form)?;
            let opts = QuadOptions::default();
            let estimate = match kind {
                IntegralKind::Gaussian => {
                    let x0 = diag.rotate_from_star(&box_spec.c_star);
                    let norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let params = SmoothingParams::with_x0_bound(p, a, x0, norm + 4.0)?;
                    oscillatory::singular_integral_gaussian(n_target, &params, &diag, &opts)?
                }
                IntegralKind::Char => oscillatory::singular_integral_char(
                    n_target,
                    p,
                    &vec![(1.0, 1.0)],
                    &box_spec,
                    &diag,
                    &opts,
                )?,
                IntegralKind::Oracle => oscillatory::volume_density_oracle(
                    n_target, p, &box_spec, &diag, epsilon, samples, cli.seed,
                )?,
            };
            emit_json(&estimate, &mut out)?;
        }
        Command::Expsum {
            q,
            u,
            b,
            n_target,
            form,
        } => {
            let form = harness::load_form(&form)?;
            let query = ExpSumQuery { q, u, b, n_target };
            let value = expsum::expsum(&query, &form, &ExpSumOptions::default())?;
            emit_json(&value, &mut out)?;
        }
    }
    out.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })?;
    Ok(0)
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
