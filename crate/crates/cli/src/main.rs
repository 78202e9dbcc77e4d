//! `gk`: heatmaps, traces, raw simulations and the invariant suite.

mod svg;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use graph_kalman::experiment::{run_heatmap, run_trace, simulate_trace_point, ExperimentConfig};
use graph_kalman::{cycle_graph, run_verify};

#[derive(Parser)]
#[command(name = "gk", version, about = "Graph Kalman filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kalman and inverse-filtering error over the (sigma, sigma_tilde) grid.
    Heatmap {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also render heatmap_kalman.svg and heatmap_inverse.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Energy profiles and one vertex trajectory at the configured trace point.
    Trace {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Raw trajectory at the trace point, plus the graph.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant checks; exits non-zero if any fails.
    Verify {
        /// Restrict to one module.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("GK_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().with_context(|| format!("GK_THREADS={value:?} is not a count"))?;
    if threads == 0 {
        bail!("GK_THREADS must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn heatmap(config: &ExperimentConfig, out: &Path, svg: bool) -> Result<()> {
    let result = run_heatmap(config)?;
    result.write_csv(create(out, "heatmap_kalman.csv")?, true)?;
    result.write_csv(create(out, "heatmap_inverse.csv")?, false)?;
    if svg {
        let lo = result
            .cells
            .iter()
            .flat_map(|c| [c.kalman.value, c.inverse.value])
            .filter(|v| v.is_finite())
            .fold(config.clip, f64::min);
        let lo = if lo < config.clip { lo } else { config.clip - 1.0 };
        fs::write(out.join("heatmap_kalman.svg"), svg::heatmap_svg(&result, true, "Kalman filter", lo, config.clip))?;
        fs::write(
            out.join("heatmap_inverse.svg"),
            svg::heatmap_svg(&result, false, "Inverse filtering", lo, config.clip),
        )?;
    }
    let flagged = result.cells.iter().filter(|c| c.flagged).count();
    println!(
        "{} x {} cells, {} trials each, {flagged} flagged -> {}",
        result.sigmas.len(),
        result.sigma_tildes.len(),
        config.trials,
        out.display()
    );
    Ok(())
}

fn trace(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let result = run_trace(config)?;
    result.write_energy_csv(create(out, "energy.csv")?)?;
    result.write_vertex_csv(create(out, "vertex.csv")?)?;
    let (k, i) = result.vertex_msd();
    println!("vertex {} mean squared deviation: kalman {k:.6}, inverse {i:.6}", result.vertex);
    Ok(())
}

fn simulate(config: &ExperimentConfig, out: &Path) -> Result<()> {
    let (_, traj) = simulate_trace_point(config, config.seed)?;
    traj.write_csv(create(out, "trajectory.csv")?)?;
    serde_json::to_writer(create(out, "graph.json")?, &cycle_graph(config.n)?)?;
    println!("{} steps on C_{} -> {}", traj.horizon(), config.n, out.display());
    Ok(())
}

fn verify(config: &ExperimentConfig, filter: Option<&str>) -> Result<bool> {
    let results = run_verify(filter, config)?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(failed == 0)
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Heatmap { config, out, svg } => {
            let config = load_config(config.as_deref())?;
            fs::create_dir_all(&out)?;
            heatmap(&config, &out, svg)?;
        }
        Command::Trace { config, out } => {
            let config = load_config(config.as_deref())?;
            fs::create_dir_all(&out)?;
            trace(&config, &out)?;
        }
        Command::Simulate { config, out } => {
            let config = load_config(config.as_deref())?;
            fs::create_dir_all(&out)?;
            simulate(&config, &out)?;
        }
        Command::Verify { filter, config } => {
            let config = load_config(config.as_deref())?;
            return verify(&config, filter.as_deref());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
