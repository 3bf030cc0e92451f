//! `mmwsim`: run scenarios, coverage maps, path loss fits and codebook exports.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use mmwsim_core::array::codebook::{build_codebook, Sector};
use mmwsim_core::array::steering::ArrayGeometry;
use mmwsim_core::beammgmt::EventKind;
use mmwsim_core::channel::pathloss::{LinkType, PathLossParams, UseCase};
use mmwsim_core::measurements::fit::{fit_path_loss, read_samples, synthetic_samples, write_fit_csv};
use mmwsim_core::rng::{stream, Purpose};
use mmwsim_core::sim::emit::to_file;
use mmwsim_core::sim::{coverage_map, load_scenario, run, write_coverage, write_events, write_trace, Format, Scenario};
use mmwsim_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mmwsim", version, about = "Millimeter-wave link and mobility simulator")]
struct Cli {
    /// Overrides the scenario seed (or seeds synthetic fit data).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Overrides the scenario timestep, ms.
    #[arg(long, global = true)]
    timestep: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs a scenario and writes the trace and event log.
    Simulate {
        /// Scenario file, or `bundled:<name>`.
        scenario: String,
    },
    /// Writes the best-server spectral efficiency map of a scenario.
    Coverage {
        scenario: String,
        /// Grid step, m; defaults to the scenario's.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Fits the close-in path loss model to measured or synthetic samples.
    Fit {
        /// CSV with `distance_m,pl_db` columns.
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        input: Option<PathBuf>,
        /// Number of samples to draw from the built-in model instead.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, value_enum, default_value_t = UseCaseArg::IndoorOffice)]
        use_case: UseCaseArg,
        #[arg(long, value_enum, default_value_t = LinkArg::Los)]
        link: LinkArg,
        /// Carrier, GHz.
        #[arg(long, default_value_t = 29.0)]
        carrier: f64,
        #[arg(long, default_value_t = 1.0)]
        d_min: f64,
        #[arg(long, default_value_t = 200.0)]
        d_max: f64,
    },
    /// Exports beam codebooks as text tables.
    Codebook {
        /// Export every gNB codebook of this scenario instead of the default.
        scenario: Option<String>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 4)]
        bits: u8,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UseCaseArg {
    IndoorOffice,
    IndoorMall,
    UmiStreetCanyon,
    OutdoorOpen,
}

impl From<UseCaseArg> for UseCase {
    fn from(u: UseCaseArg) -> UseCase {
        match u {
            UseCaseArg::IndoorOffice => UseCase::IndoorOffice,
            UseCaseArg::IndoorMall => UseCase::IndoorMall,
            UseCaseArg::UmiStreetCanyon => UseCase::UMiStreetCanyon,
            UseCaseArg::OutdoorOpen => UseCase::OutdoorOpen,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LinkArg {
    Los,
    Nlos,
}

fn invalid(field: &str, rule: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        rule: rule.into(),
    }
}

fn scenario(cli: &Cli, spec: &str) -> Result<Scenario> {
    let mut s = load_scenario(spec)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(ms) = cli.timestep {
        s.timestep_ms = ms;
        s.validate()?;
    }
    Ok(s)
}

fn out_path(cli: &Cli, stem: &str, ext: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cli.out).map_err(|source| Error::Io {
        path: cli.out.clone(),
        source,
    })?;
    Ok(cli.out.join(format!("{stem}.{ext}")))
}

fn simulate(cli: &Cli, spec: &str) -> Result<()> {
    let s = scenario(cli, spec)?;
    let format: Format = cli.format.into();
    let out = run(&s)?;
    let trace = out_path(cli, "trace", format.extension())?;
    to_file(&trace, |w| write_trace(w, &out.trace, format))?;
    let events = out_path(cli, "events", if format == Format::Csv { "log" } else { "jsonl" })?;
    to_file(&events, |w| write_events(w, &out.events, format))?;
    let count = |k: EventKind| out.events.iter().filter(|e| e.kind == k).count();
    println!(
        "{}: {} rows, {} handovers, {} link drops, {:.1} Mbit delivered",
        s.name,
        out.trace.len(),
        count(EventKind::Handover),
        count(EventKind::LinkDrop),
        out.delivered_dl_mbit(s.timestep_ms / 1000.0)
    );
    println!("wrote {} and {}", trace.display(), events.display());
    Ok(())
}

fn coverage(cli: &Cli, spec: &str, step: Option<f64>) -> Result<()> {
    let s = scenario(cli, spec)?;
    let step = step.unwrap_or_else(|| s.coverage.as_ref().map_or(1.0, |c| c.step_m));
    let format: Format = cli.format.into();
    let map = coverage_map(&s, step)?;
    let path = out_path(cli, "coverage", format.extension())?;
    to_file(&path, |w| write_coverage(w, &map, format))?;
    let covered = map.points.iter().filter(|p| p.se_bpshz >= 1.0).count();
    println!(
        "{}: {}x{} grid, {covered} of {} points at >= 1 bps/Hz",
        s.name,
        map.nx,
        map.ny,
        map.points.len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    cli: &Cli,
    input: Option<&Path>,
    synthetic: Option<usize>,
    use_case: UseCase,
    link: LinkType,
    carrier: f64,
    d_min: f64,
    d_max: f64,
) -> Result<()> {
    if !(carrier > 0.0) {
        return Err(invalid("carrier", "must be > 0"));
    }
    let samples = match (input, synthetic) {
        (Some(path), _) => {
            let file = File::open(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            read_samples(file, path, use_case, link, carrier)?
        }
        (None, Some(n)) => {
            let params = PathLossParams::for_carrier(use_case, link, carrier);
            let mut rng = stream(cli.seed.unwrap_or(1), Purpose::Synthetic, 0);
            synthetic_samples(&params, n, d_min, d_max, &mut rng).map_err(|e| invalid("d_min/d_max", e.to_string()))?
        }
        (None, None) => return Err(invalid("fit", "one of --input or --synthetic is required")),
    };
    let f = fit_path_loss(&samples)?;
    let format: Format = cli.format.into();
    let path = out_path(cli, "fit", format.extension())?;
    to_file(&path, |w| match format {
        Format::Csv => write_fit_csv(w, &samples, &f).map_err(std::io::Error::other),
        Format::Json => {
            let v = json!({"alpha": f.alpha, "sigma_db": f.sigma_db, "n": samples.len()});
            writeln!(w, "{v}")
        }
    })?;
    println!("alpha = {:.4}, sigma = {:.3} dB over {} samples", f.alpha, f.sigma_db, samples.len());
    println!("wrote {}", path.display());
    Ok(())
}

fn codebook(cli: &Cli, spec: Option<&str>, levels: usize, bits: u8) -> Result<()> {
    let books = match spec {
        Some(spec) => {
            let s = scenario(cli, spec)?;
            s.gnb
                .iter()
                .map(|g| Ok((g.id.clone(), build_codebook(&g.array, &g.codebook.sector, g.codebook.levels, g.codebook.bits)?)))
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            if levels == 0 {
                return Err(invalid("levels", "must be >= 1"));
            }
            if !(1..=8).contains(&bits) {
                return Err(invalid("bits", "must be in 1..=8"));
            }
            vec![(
                "default".to_string(),
                build_codebook(&ArrayGeometry::gnb_default(), &Sector::default(), levels, bits)?,
            )]
        }
    };
    for (id, cb) in &books {
        let path = out_path(cli, &format!("codebook_{id}"), "txt")?;
        to_file(&path, |w| cb.write_table(w))?;
        println!("{id}: {} beams in {} levels, wrote {}", cb.len(), cb.levels.len(), path.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { scenario } => simulate(cli, scenario),
        Command::Coverage { scenario, step } => coverage(cli, scenario, *step),
        Command::Fit {
            input,
            synthetic,
            use_case,
            link,
            carrier,
            d_min,
            d_max,
        } => {
            let link = match link {
                LinkArg::Los => LinkType::Los,
                LinkArg::Nlos => LinkType::Nlos,
            };
            fit(cli, input.as_deref(), *synthetic, (*use_case).into(), link, *carrier, *d_min, *d_max)
        }
        Command::Codebook { scenario, levels, bits } => codebook(cli, scenario.as_deref(), *levels, *bits),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let user_error = e.is_validation() || matches!(e, Error::Lookup { .. });
            ExitCode::from(if user_error { 1 } else { 2 })
        }
    }
}
