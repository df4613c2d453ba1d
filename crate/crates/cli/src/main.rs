//! `magep` command-line driver.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use magep::config::{Scenario, SimulationConfig};
use magep::diagnostics::{
    fit_growth_rate, l1_error_vortex, reference_growth_simulation_time, ModeSampler, REFERENCE_TIME_SCALE,
};
use magep::output::{self, ConvergenceRow};
use magep::splitting::{run_simulation, RestartMode, StepRecord};
use magep::Simulation64;

#[derive(Parser)]
#[command(name = "magep", version, about = "Magnetic Euler-Poisson solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write a time series and VTK snapshots.
    Run(RunArgs),
    /// Vortex L1 errors over a range of refinements.
    Convergence(ConvergenceArgs),
    /// Diocotron run with a fitted growth rate of one Fourier mode.
    DiocotronGrowth(GrowthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Vortex,
    Diocotron,
}

#[derive(Clone, Copy, ValueEnum)]
enum RestartArg {
    None,
    Full,
    Relaxation,
}

impl From<RestartArg> for RestartMode {
    fn from(r: RestartArg) -> Self {
        match r {
            RestartArg::None => RestartMode::None,
            RestartArg::Full => RestartMode::Full,
            RestartArg::Relaxation => RestartMode::Relaxation,
        }
    }
}

/// Flags shared by every subcommand; they override the configuration file.
#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    refinement: Option<usize>,
    #[arg(long)]
    restart: Option<RestartArg>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    t_final: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Scenario preset, used when no configuration file is given.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    /// Diocotron perturbation mode.
    #[arg(long)]
    mode: Option<u32>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// Number of refinement levels, starting at `--refinement`.
    #[arg(long, default_value_t = 4)]
    levels: usize,
}

#[derive(Args)]
struct GrowthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 3)]
    mode: u32,
    /// Fit window start and end in simulation time; defaults to the tabulated
    /// window for the mode, converted to simulation time.
    #[arg(long, num_args = 2)]
    window: Option<Vec<f64>>,
    /// Sampling points on the circle.
    #[arg(long, default_value_t = 256)]
    samples: usize,
}

fn load(common: &Common, fallback: SimulationConfig) -> Result<SimulationConfig> {
    let mut cfg = match &common.config {
        Some(p) => SimulationConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => fallback,
    };
    if let Some(r) = common.refinement {
        cfg.refinement = r;
    }
    if let Some(r) = common.restart {
        cfg.restart = r.into();
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(d) = &common.output_dir {
        cfg.output.directory = d.clone();
    }
    if let Some(t) = common.t_final {
        cfg.t_final = t;
    }
    Ok(cfg)
}

fn init_threads(n: usize) -> Result<()> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

/// Runs to `cfg.t_final`, writing VTK snapshots and returning the records.
/// `probe` adds a value per record (the initial state included).
fn drive(cfg: &SimulationConfig, mut probe: impl FnMut(&Simulation64) -> f64) -> Result<(Vec<StepRecord>, Vec<f64>)> {
    let mut sim = cfg.build()?;
    let dir = &cfg.output.directory;
    info!(
        "{} cells, {} dG nodes, {} CG nodes",
        sim.disc.mesh.cells.len(),
        sim.disc.n_dg(),
        sim.disc.n_cg()
    );
    let mut snapshot = 0usize;
    let mut next_vtk = 0.0;
    let write_vtk = |sim: &Simulation64, snapshot: &mut usize| -> magep::Result<()> {
        let path = dir.join(format!("state_{:05}.vtk", *snapshot));
        *snapshot += 1;
        output::write_vtk(&path, &sim.disc, &sim.state, &sim.phi, sim.t)
    };
    if cfg.output.vtk {
        write_vtk(&sim, &mut snapshot)?;
        next_vtk = cfg.output.vtk_interval;
    }
    let mut records = vec![sim.initial_record()?];
    let mut extra = vec![probe(&sim)];
    let start = Instant::now();
    let t_final = cfg.t_final;
    let interval = cfg.output.vtk_interval;
    records.extend(run_simulation(&mut sim, t_final, |s, _| {
        extra.push(probe(s));
        let last = t_final - s.t <= 1e-12 * t_final.max(1.0);
        if cfg.output.vtk && ((interval > 0.0 && s.t >= next_vtk) || last) {
            write_vtk(s, &mut snapshot)?;
            while interval > 0.0 && next_vtk <= s.t {
                next_vtk += interval;
            }
        }
        Ok(())
    })?);
    info!("{} steps in {:.1?}", sim.steps, start.elapsed());
    Ok((records, extra))
}

fn run(args: RunArgs) -> Result<()> {
    let fallback = match args.scenario {
        Some(ScenarioArg::Vortex) => SimulationConfig::vortex_preset(),
        Some(ScenarioArg::Diocotron) => SimulationConfig::diocotron_preset(args.mode.unwrap_or(3)),
        None if args.common.config.is_none() => bail!("give --config or --scenario"),
        None => SimulationConfig::default(),
    };
    let mut cfg = load(&args.common, fallback)?;
    if let Some(m) = args.mode {
        cfg.diocotron.mode = m;
    }
    init_threads(cfg.threads)?;
    let series = cfg.output.directory.join("series.csv");
    match cfg.scenario {
        Some(Scenario::Diocotron) => {
            let sampler = mode_sampler(&cfg, 256)?;
            let mode = cfg.diocotron.mode;
            let (records, amps) = drive(&cfg, |s| sampler.amplitude(&s.phi, mode))?;
            let normalized = normalize(&amps);
            output::write_series(&series, &records, &[("mode_amplitude", &normalized)])?;
        }
        _ => {
            let p = cfg.vortex;
            let (records, err) = drive(&cfg, |s| l1_error_vortex(&s.disc, &s.state, s.t, &p))?;
            output::write_series(&series, &records, &[("l1_error", &err)])?;
            println!("L1 error at t = {}: {:.6e}", cfg.t_final, err.last().copied().unwrap_or(0.0));
        }
    }
    println!("wrote {}", series.display());
    Ok(())
}

fn mode_sampler(cfg: &SimulationConfig, samples: usize) -> Result<ModeSampler<f64>> {
    let mesh = magep::mesh::MeshHierarchy::disk(cfg.diocotron.radius, cfg.refinement)?;
    Ok(ModeSampler::new(mesh.finest(), cfg.diocotron.r0, samples, 0.0)?)
}

fn normalize(a: &[f64]) -> Vec<f64> {
    match a.first() {
        Some(&a0) if a0 > 0.0 => a.iter().map(|x| x / a0).collect(),
        _ => a.to_vec(),
    }
}

fn convergence(args: ConvergenceArgs) -> Result<()> {
    let mut base = load(&args.common, SimulationConfig::vortex_preset())?;
    if base.scenario != Some(Scenario::Vortex) {
        bail!("convergence studies need the vortex scenario");
    }
    init_threads(base.threads)?;
    base.output.vtk = false;
    let first = args.common.refinement.unwrap_or(5);
    let mut rows = Vec::new();
    for r in first..first + args.levels {
        let mut cfg = base.clone();
        cfg.refinement = r;
        let start = Instant::now();
        let mut sim = cfg.build()?;
        run_simulation(&mut sim, cfg.t_final, |_, _| Ok(()))?;
        let error = l1_error_vortex(&sim.disc, &sim.state, sim.t, &cfg.vortex);
        info!(
            "refinement {r}: {} steps in {:.1?}, L1 error {error:.6e}",
            sim.steps,
            start.elapsed()
        );
        rows.push(ConvergenceRow {
            cells: sim.disc.mesh.cells.len(),
            dofs: sim.disc.n_dg(),
            error,
        });
    }
    print!("{}", output::format_convergence_table(&rows));
    let path = base.output.directory.join("convergence.csv");
    output::write_atomic(&path, output::convergence_csv(&rows)?.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn growth(args: GrowthArgs) -> Result<()> {
    let mut cfg = load(&args.common, SimulationConfig::diocotron_preset(args.mode))?;
    if cfg.scenario != Some(Scenario::Diocotron) {
        bail!("growth runs need the diocotron scenario");
    }
    cfg.diocotron.mode = args.mode;
    let reference = reference_growth_simulation_time(args.mode);
    let window = match (&args.window, reference) {
        (Some(w), _) => [w[0], w[1]],
        (None, Some((_, w))) => w,
        (None, None) => bail!("no tabulated fit window for mode {}; pass --window", args.mode),
    };
    if args.common.t_final.is_none() {
        cfg.t_final = cfg.t_final.max(window[1]);
    }
    init_threads(cfg.threads)?;
    let ts = cfg.diocotron.timescales();
    println!(
        "omega_c = {:.3e}, omega_p = {:.3e}, omega_d = {:.3e}",
        ts.omega_c, ts.omega_p, ts.omega_d
    );
    let sampler = mode_sampler(&cfg, args.samples)?;
    let (records, amps) = drive(&cfg, |s| sampler.amplitude(&s.phi, args.mode))?;
    let normalized = normalize(&amps);
    let series: Vec<(f64, f64)> = records.iter().map(|r| r.t).zip(normalized.iter().copied()).collect();
    let path = cfg.output.directory.join(format!("growth_mode{}.csv", args.mode));
    output::write_series(&path, &records, &[("mode_amplitude", &normalized)])?;
    let mean_tau = records[1..].iter().map(|r| r.tau).sum::<f64>() / (records.len() - 1).max(1) as f64;
    println!(
        "mean step {:.3e}, {:.1e} cyclotron periods per step",
        mean_tau,
        mean_tau * ts.omega_c
    );
    let gamma = fit_growth_rate(&series, window)?;
    let s = REFERENCE_TIME_SCALE;
    print!("mode {}: fitted growth rate {:.4} on [{:.4}, {:.4}]", args.mode, gamma, window[0], window[1]);
    match reference {
        Some((g, _)) => println!(
            ", linear theory {:.4}; in the tabulated time unit {:.4} vs {:.3}, deviation {:.4}",
            g,
            gamma * s,
            g * s,
            ((gamma - g) * s).abs()
        ),
        None => println!(),
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => run(a),
        Command::Convergence(a) => convergence(a),
        Command::DiocotronGrowth(a) => growth(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_presets() {
        let cli = Cli::parse_from([
            "magep",
            "run",
            "--scenario",
            "diocotron",
            "--refinement",
            "2",
            "--restart",
            "relaxation",
            "--output-dir",
            "out/x",
        ]);
        let Command::Run(a) = cli.command else { panic!() };
        let cfg = load(&a.common, SimulationConfig::diocotron_preset(3)).unwrap();
        assert_eq!(cfg.refinement, 2);
        assert_eq!(cfg.restart, RestartMode::Relaxation);
        assert_eq!(cfg.output.directory, std::path::Path::new("out/x"));
    }

    #[test]
    fn normalization_starts_at_one() {
        assert_eq!(normalize(&[2.0, 4.0, 1.0]), vec![1.0, 2.0, 0.5]);
        assert_eq!(normalize(&[]), Vec::<f64>::new());
    }
}
