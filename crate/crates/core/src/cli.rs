//! Command-line frontend. Exit codes: 0 success, 2 usage error, 3 data error.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{PointPattern, Window};
use crate::gof::{self, Calibration, StatisticId, StatisticSpec, DEFAULT_CURVE_POINTS, DEFAULT_SURFACE_POINTS};
use crate::io as csv;
use crate::mbound::{persistence_diagram, PersistenceDiagram};
use crate::oracle::{gilbert_components, grid_betti, GridSpec};
use crate::simulate::{Model, ModelSpec, SeedSpec, DEFAULT_BURNIN, DEFAULT_CHAIN};
use crate::summaries::{
    apf0, apf1, betti_life_surface, death_count_curve, ripley_l, t_cluster, t_loop, uniform_grid,
    CurveKind, SummaryCurve,
};

const DEFAULT_WINDOW: &str = "0,0,10,10";

type ScalarSummary = fn(&PersistenceDiagram, f64) -> f64;

#[derive(Parser, Debug)]
#[command(name = "tdagof", version, about = "M-bounded persistent Betti numbers and goodness-of-fit tests for planar point patterns")]
struct Cli {
    /// Worker threads for replicated simulations (output does not depend on it).
    #[arg(long, global = true, env = "TDAGOF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one pattern from a model.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Persistence diagram of a pattern.
    Pd {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = DEFAULT_WINDOW)]
        window: Window,
        /// Size bound M; defaults to the window diagonal.
        #[arg(long = "M")]
        m: Option<f64>,
        #[arg(long, default_value_t = 1.5)]
        rf: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summary curve, scalar or surface of a diagram.
    Summary {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        stat: SummaryStat,
        /// Evaluate a scalar statistic at this radius instead of along a grid.
        #[arg(long)]
        r: Option<f64>,
        /// Grid points per axis [default: 64, 32 for surfaces].
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, default_value_t = 1.5)]
        rf: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Translation-corrected Ripley L-function of a pattern.
    Ripley {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = DEFAULT_WINDOW)]
        window: Window,
        #[arg(long, default_value_t = DEFAULT_CURVE_POINTS)]
        grid: usize,
        /// Largest radius; defaults to min(1.5, shorter side / 4).
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null mean and variance of a scalar statistic.
    Calibrate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        stat: StatArgs,
        #[arg(long, default_value_t = 2000)]
        n_sims: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Store every simulated value in the calibration file.
        #[arg(long)]
        keep_values: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian deviation test against a calibration file.
    TestDeviation {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Global extreme-rank-length envelope test.
    TestEnvelope {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        stat: StatArgs,
        #[arg(long, default_value_t = 999)]
        n_sims: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Envelope CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Raster and Gilbert-graph reference counts at one radius.
    #[command(hide = true)]
    Oracle {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = DEFAULT_WINDOW)]
        window: Window,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.002)]
        h: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SummaryStat {
    DeathCurve,
    TCluster,
    TLoop,
    Apf0,
    Apf1,
    BettiSurface,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// poisson, matern, strauss, inline JSON, or a path to a JSON model file.
    #[arg(long, default_value = "poisson")]
    model: String,
    #[arg(long, default_value = DEFAULT_WINDOW)]
    window: Window,
    #[arg(long, default_value_t = 2.0)]
    intensity: f64,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CHAIN)]
    chain: u64,
    #[arg(long, default_value_t = DEFAULT_BURNIN)]
    burnin: u64,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("--{name} is required for --model {}", self.model)))
        };
        let model = match self.model.as_str() {
            "poisson" => Model::Poisson { intensity: self.intensity },
            "matern" => Model::MaternCluster {
                kappa: need(self.kappa, "kappa")?,
                radius: need(self.radius, "radius")?,
                mu: need(self.mu, "mu")?,
            },
            "strauss" => Model::Strauss {
                beta: need(self.beta, "beta")?,
                gamma: need(self.gamma, "gamma")?,
                radius: need(self.radius, "radius")?,
                chain: self.chain,
                burnin: self.burnin,
            },
            text if text.trim_start().starts_with('{') => return Ok(serde_json::from_str(text)?),
            path => return Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?),
        };
        ModelSpec::new(model, self.window)
    }
}

#[derive(Args, Debug)]
struct StatArgs {
    #[arg(long)]
    stat: StatisticId,
    /// Radius of a scalar statistic; defaults to 0.1 for t-cluster and 0.5 for t-loop.
    #[arg(long)]
    r: Option<f64>,
    /// Size bound M; defaults to the window diagonal.
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long, default_value_t = 1.5)]
    rf: f64,
    /// Grid points per axis for functional statistics [default: 64, 32 for surfaces].
    #[arg(long)]
    grid: Option<usize>,
}

impl StatArgs {
    fn spec(&self, window: &Window) -> Result<StatisticSpec> {
        let m = self.m.unwrap_or_else(|| window.diameter());
        if self.stat.is_scalar() {
            let r = match (self.r, self.stat) {
                (Some(r), _) => r,
                (None, StatisticId::TCluster) => 0.1,
                (None, StatisticId::TLoop) => 0.5,
                (None, id) => return Err(Error::InvalidArgument(format!("--r is required for {id}"))),
            };
            StatisticSpec::scalar(self.stat, r, m, self.rf)
        } else {
            let side = window.width().min(window.height());
            let n = self.grid.unwrap_or(default_points(self.stat == StatisticId::BettiSurface));
            StatisticSpec::functional(self.stat, m, self.rf, n, side)
        }
    }
}

fn default_points(surface: bool) -> usize {
    if surface {
        DEFAULT_SURFACE_POINTS
    } else {
        DEFAULT_CURVE_POINTS
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_pattern(path: &Path, window: Window) -> Result<PointPattern> {
    csv::read_pattern(BufReader::new(File::open(path)?), window)
}

fn exec(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    match cli.command {
        Command::Simulate { model, seed, stream, out } => {
            let pattern = model.spec()?.sample(SeedSpec::new(seed, stream))?;
            let mut w = output(out.as_deref())?;
            csv::write_pattern(&mut w, &pattern)?;
            w.flush()?;
        }
        Command::Pd { input, window, m, rf, out } => {
            let pattern = read_pattern(&input, window)?;
            let diagram = persistence_diagram(&pattern, m.unwrap_or_else(|| window.diameter()), rf)?;
            let mut w = output(out.as_deref())?;
            csv::write_diagram(&mut w, &diagram)?;
            w.flush()?;
        }
        Command::Summary { diagram, stat, r, grid, rf, out } => {
            let d = csv::read_diagram(
                BufReader::new(File::open(&diagram)?),
                f64::INFINITY,
                rf,
                0,
                Window::square(1.0)?,
            )?;
            let grid = grid.unwrap_or(default_points(stat == SummaryStat::BettiSurface));
            if grid < 2 {
                return Err(Error::InvalidArgument("--grid needs at least 2 points".into()));
            }
            let args = uniform_grid(0.0, rf, grid);
            let mut w = output(out.as_deref())?;
            let scalar: Option<(ScalarSummary, CurveKind)> = match stat {
                SummaryStat::TCluster => Some((t_cluster, CurveKind::TCluster)),
                SummaryStat::TLoop => Some((t_loop, CurveKind::Apf1)),
                SummaryStat::Apf0 => Some((apf0, CurveKind::Apf0)),
                SummaryStat::Apf1 => Some((apf1, CurveKind::Apf1)),
                _ => None,
            };
            match (stat, scalar) {
                (_, Some((f, kind))) => {
                    let args = r.map_or(args, |r| vec![r]);
                    let values = args.iter().map(|&a| f(&d, a)).collect();
                    csv::write_curve(&mut w, &SummaryCurve::new(args, values, kind)?)?;
                }
                (SummaryStat::BettiSurface, _) => {
                    csv::write_surface(&mut w, &betti_life_surface(&d, &args, &args)?)?;
                }
                _ => csv::write_curve(&mut w, &death_count_curve(&d, 0, &args)?)?,
            }
            w.flush()?;
        }
        Command::Ripley { input, window, grid, rmax, out } => {
            let pattern = read_pattern(&input, window)?;
            let top = rmax.unwrap_or_else(|| 1.5f64.min(window.width().min(window.height()) / 4.0));
            if !(top > 0.0) || grid < 1 {
                return Err(Error::InvalidArgument("--rmax must be positive and --grid at least 1".into()));
            }
            let curve = ripley_l(&pattern, &uniform_grid(top / grid as f64, top, grid))?;
            let mut w = output(out.as_deref())?;
            csv::write_curve(&mut w, &curve)?;
            w.flush()?;
        }
        Command::Calibrate { model, stat, n_sims, seed, keep_values, out } => {
            let model = model.spec()?;
            let stat = stat.spec(model.window())?;
            let calib = gof::with_threads(threads, || gof::calibrate(&model, &stat, n_sims, seed, keep_values))??;
            if calib.degenerate {
                eprintln!("warning: zero-variance null; deviation tests against this calibration will fail");
            }
            write_json(out.as_deref(), &calib)?;
        }
        Command::TestDeviation { input, calib, alpha, out } => {
            let calib: Calibration = serde_json::from_reader(BufReader::new(File::open(&calib)?))?;
            let pattern = read_pattern(&input, *calib.model.window())?;
            write_json(out.as_deref(), &gof::deviation_test(&pattern, &calib, alpha)?)?;
        }
        Command::TestEnvelope { input, model, stat, n_sims, alpha, seed, out, report } => {
            let model = model.spec()?;
            let stat = stat.spec(model.window())?;
            let pattern = read_pattern(&input, *model.window())?;
            let rep = gof::with_threads(threads, || {
                gof::envelope_test(&pattern, &model, &stat, n_sims, alpha, seed)
            })??;
            let mut w = output(out.as_deref())?;
            csv::write_envelope(&mut w, &rep.args, &rep.observed, &rep.lower, &rep.upper)?;
            w.flush()?;
            drop(w);
            if let Some(path) = report {
                write_json(Some(&path), &rep)?;
            }
        }
        Command::Oracle { input, window, r, h } => {
            let pattern = read_pattern(&input, window)?;
            let (b0, b1) = grid_betti(&pattern, r, GridSpec::for_radius(h, r))?;
            println!("beta0,beta1,gilbert");
            println!("{b0},{b1},{}", gilbert_components(&pattern, r));
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::InvalidModel(_) | Error::InvalidStatistic(_) => 2,
        _ => 3,
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match exec(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
