//! `seriesfed` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input or I/O failure, 2 optimizer
//! non-convergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use seriesfed::farfield::{pattern_cut, total_pattern, SphericalGrid, DEFAULT_GRID_STEP};
use seriesfed::io::{
    analyze, design_report, load_geometry, write_cut_csv, write_pattern_csv, write_sweep_csv,
    write_touchstone, Geometry, ReportOptions,
};
use seriesfed::network::{
    analyze_sweep, element_excitations, extract_bandwidth, NetworkOptions, SlotSusceptance,
    DEFAULT_BAND_THRESHOLD_DB,
};
use seriesfed::optimize::{
    design_vector, objective_eval, optimize_layout, tune_for_resonance, LayoutParam,
    NelderMeadOptions, Objective, OptResult,
};
use seriesfed::Error;

#[derive(Parser)]
#[command(
    name = "seriesfed",
    version,
    about = "Series-fed microstrip patch array modeling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Susceptance {
    /// Edge susceptance from the patch fringe extension.
    Fringe,
    /// Narrow-slot closed form.
    ClosedForm,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Geometry file (TOML).
    #[arg(long)]
    geom: PathBuf,
    /// Slot susceptance model.
    #[arg(long, value_enum, default_value = "fringe")]
    susceptance: Susceptance,
}

impl ModelArgs {
    fn network(&self) -> NetworkOptions {
        NetworkOptions {
            slot_susceptance: match self.susceptance {
                Susceptance::Fringe => SlotSusceptance::FringeExtension,
                Susceptance::ClosedForm => SlotSusceptance::ClosedForm,
            },
            ..NetworkOptions::default()
        }
    }

    fn load(&self) -> anyhow::Result<Geometry> {
        Ok(load_geometry(&self.geom)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Weighted match / directivity / sidelobe objective at the target.
    Composite,
    /// Patch length only, moving the sweep's |S11| minimum onto the target.
    Resonance,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the patch for f0 and report line impedances.
    Design {
        /// Design frequency in GHz.
        #[arg(long)]
        f0: f64,
        /// Geometry file (TOML) supplying the substrate and line widths.
        #[arg(long)]
        geom: PathBuf,
    },
    /// Frequency sweep of the input match.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        /// Touchstone output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of frequency, |S11| dB and VSWR.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Far-field pattern export.
    Pattern {
        #[command(flatten)]
        model: ModelArgs,
        /// Frequency in GHz.
        #[arg(long)]
        freq: f64,
        /// Export the great-circle cut at this phi (degrees) instead of the grid.
        #[arg(long)]
        cut: Option<f64>,
        /// Angular grid step in degrees.
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid: f64,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Full metrics report as JSON.
    Metrics {
        #[command(flatten)]
        model: ModelArgs,
        /// Pattern frequency in GHz; defaults to the sweep resonance.
        #[arg(long)]
        freq: Option<f64>,
        /// Angular grid step in degrees.
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid: f64,
    },
    /// Tune layout parameters.
    Optimize {
        #[command(flatten)]
        model: ModelArgs,
        /// Target frequency in GHz.
        #[arg(long)]
        target_f0: f64,
        /// Comma-separated free parameters among L, W, gap, iw.
        #[arg(long, default_value = "L")]
        free: String,
        /// Evaluation budget.
        #[arg(long, default_value_t = 500)]
        max_evals: usize,
        /// Objective to minimize.
        #[arg(long, value_enum, default_value = "composite")]
        mode: Mode,
        /// Weight of the match term.
        #[arg(long, default_value_t = 1.0)]
        w_match: f64,
        /// Weight of the directivity term.
        #[arg(long, default_value_t = 0.0)]
        w_dir: f64,
        /// Weight of the sidelobe term.
        #[arg(long, default_value_t = 0.0)]
        w_sll: f64,
        /// Where to write the tuned geometry file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn ghz(v: f64, field: &str) -> anyhow::Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        bail!(Error::InvalidInput {
            field: field.into(),
            reason: format!("must be a positive frequency in GHz, got {v}"),
        });
    }
    Ok(v * 1e9)
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct AnalyzeSummary {
    points: usize,
    resonance_ghz: Option<f64>,
    s11_min_db: Option<f64>,
    vswr_min: Option<f64>,
    band_ghz: Option<[f64; 2]>,
}

#[derive(Serialize)]
struct OptimizeOutput {
    result: OptResult,
    target_f0_ghz: f64,
    initial_value: f64,
    improvement: f64,
    geometry: String,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn write_geometry(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Design { f0, geom } => {
            let f0 = ghz(f0, "f0")?;
            let g = load_geometry(&geom)?;
            print_json(&design_report(f0, &g.layout)?)?;
        }
        Command::Analyze { model, out, csv } => {
            let g = model.load()?;
            let net = analyze_sweep(&g.layout, &g.sweep, &model.network())?;
            if let Some(path) = &out {
                write_touchstone(&net, path)?;
            }
            if let Some(path) = &csv {
                write_sweep_csv(&net, path)?;
            }
            let resonance = net.resonance();
            let band = match resonance {
                Some(f) => Some(extract_bandwidth(&net, DEFAULT_BAND_THRESHOLD_DB, f)?),
                None => None,
            };
            print_json(&AnalyzeSummary {
                points: net.freqs.len(),
                resonance_ghz: resonance.map(|f| f * 1e-9),
                s11_min_db: net.min_index().and_then(|i| finite(net.s11_db()[i])),
                vswr_min: net.vswr_min().and_then(finite),
                band_ghz: band
                    .filter(|b| !b.empty)
                    .map(|b| [b.f_low * 1e-9, b.f_high * 1e-9]),
            })?;
        }
        Command::Pattern {
            model,
            freq,
            cut,
            grid,
            out,
        } => {
            let freq = ghz(freq, "freq")?;
            let g = model.load()?;
            let exc = element_excitations(&g.layout, freq, &model.network())?;
            let pattern = total_pattern(&g.layout, &exc, SphericalGrid::uniform(grid)?)?;
            match cut {
                Some(phi) => write_cut_csv(&pattern_cut(&pattern, phi)?, &out)?,
                None => write_pattern_csv(&pattern, &out)?,
            }
        }
        Command::Metrics { model, freq, grid } => {
            let g = model.load()?;
            let options = ReportOptions {
                freq: freq.map(|f| ghz(f, "freq")).transpose()?,
                grid: SphericalGrid::uniform(grid)?,
                network: model.network(),
                ..ReportOptions::default()
            };
            print_json(&analyze(&g.layout, &g.sweep, &options)?.report)?;
        }
        Command::Optimize {
            model,
            target_f0,
            free,
            max_evals,
            mode,
            w_match,
            w_dir,
            w_sll,
            out,
        } => {
            let f0 = ghz(target_f0, "target_f0")?;
            let g = model.load()?;
            let free = free
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::parse::<LayoutParam>)
                .collect::<Result<Vec<_>, _>>()?;
            let network = model.network();
            let objective = Objective {
                network,
                ..Objective::new(f0, w_match, w_dir, w_sll)?
            };

            let (layout, result, initial) = if free.is_empty() {
                // nothing to tune: report the objective and re-emit the input
                let mut x = design_vector(&g.layout, &[LayoutParam::PatchLength])?;
                x.params.iter_mut().for_each(|p| p.fixed = true);
                let value = match mode {
                    Mode::Composite => objective_eval(&x, &g.layout, &objective),
                    Mode::Resonance => 0.0,
                };
                let result = OptResult {
                    best: x,
                    best_value: value,
                    evaluations: 1,
                    converged: true,
                    trace: vec![value],
                };
                (g.layout.clone(), result, value)
            } else {
                match mode {
                    Mode::Composite => {
                        let x0 = design_vector(&g.layout, &free)?;
                        let initial = objective_eval(&x0, &g.layout, &objective);
                        let options = NelderMeadOptions {
                            max_evals,
                            ..NelderMeadOptions::default()
                        };
                        let (layout, result) =
                            optimize_layout(&g.layout, &free, &objective, &options)?;
                        (layout, result, initial)
                    }
                    Mode::Resonance => {
                        if free != [LayoutParam::PatchLength] {
                            bail!(Error::InvalidInput {
                                field: "free".into(),
                                reason: "resonance mode tunes L only".into(),
                            });
                        }
                        let tuned = tune_for_resonance(&g.layout, f0, &g.sweep, &network)?;
                        let initial = tuned.result.trace.first().copied().unwrap_or(0.0);
                        (tuned.layout, tuned.result, initial)
                    }
                }
            };

            let geometry = g.file.with_tuned(&g.layout, &layout).to_toml_string()?;
            if let Some(path) = &out {
                write_geometry(path, &geometry)?;
            }
            let converged = result.converged;
            print_json(&OptimizeOutput {
                target_f0_ghz: target_f0,
                initial_value: initial,
                improvement: initial - result.best_value,
                result,
                geometry,
            })?;
            if !converged {
                eprintln!("error: optimizer stopped before converging");
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NotConverged { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
