//! Single entry point wiring dataset generation, detector training and
//! evaluation, posture reconstruction, and the attention/grasp simulators.
//! Every command is deterministic in (inputs, config, seed).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use neurohand::config::Config;
use neurohand::error::{Error, Result};
use neurohand::hand::{generate_dataset, load_dataset, sample_pose, save_dataset, FINGER_COUNT};
use neurohand::hierarchy::{detect, evaluate_hierarchy, train_hierarchy, HierarchyModel};
use neurohand::imaging::{read_pgm, write_pgm, write_ppm};
use neurohand::psom::{fit_all, load_manifolds, reconstruct_posture, save_manifolds, PSOMManifold};
use neurohand::{attention, grasp};

#[derive(Parser)]
#[command(name = "neurohand", version, about = "Synthetic hand perception and control toolkit")]
struct Cli {
    /// TOML config file; omitted sections fall back to defaults. Flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a labelled synthetic dataset into a directory.
    GenData {
        /// Number of images (must be positive).
        #[arg(long)]
        n: usize,
        /// RNG seed; overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the two-level fingertip detector on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report per-finger detection error of a trained model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Fit the five posture manifolds and write them to one file.
    FitPsom {
        #[arg(long)]
        out: PathBuf,
    },
    /// Detect fingertips in one image and invert the manifolds to a posture.
    Reconstruct {
        /// Trained detector model file.
        #[arg(long)]
        model: PathBuf,
        /// Fitted manifold file.
        #[arg(long)]
        psom: PathBuf,
        /// Input PGM image.
        #[arg(long)]
        image: PathBuf,
    },
    /// Run a scripted attention episode; write the fixation trace as CSV.
    RunAttention {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-step frame PPMs and attention-map PGMs.
        #[arg(long)]
        snapshots: Option<PathBuf>,
    },
    /// Simulate the scripted grasp episode; write the sensor trace as CSV.
    RunGrasp {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the fully resolved configuration.
    DumpConfig,
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_gen_data(cfg: &Config, n: usize, seed: Option<u64>, out: &Path) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("--n must be positive"));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let spec = cfg.dataset.to_spec();
    let records = generate_dataset(n, &spec, seed, sample_pose)?;
    save_dataset(out, &records, seed)?;
    println!("wrote {} images to {}", records.len(), out.display());
    Ok(())
}

fn cmd_train(cfg: &Config, data: &Path, out: &Path) -> Result<()> {
    let (records, _seed) = load_dataset(data)?;
    let hcfg = cfg.hierarchy.to_hierarchy_config(&cfg.dataset, cfg.seed);
    let model = train_hierarchy(&records, &hcfg)?;
    model.save(out)?;
    println!("trained on {} images, model written to {}", records.len(), out.display());
    Ok(())
}

fn cmd_eval(model: &Path, data: &Path) -> Result<()> {
    let model = HierarchyModel::load(model)?;
    let (records, _seed) = load_dataset(data)?;
    let report = evaluate_hierarchy(&model, &records)?;
    print!("{}", report.render());
    Ok(())
}

fn cmd_fit_psom(cfg: &Config, out: &Path) -> Result<()> {
    let spec = cfg.dataset.to_spec();
    let manifolds = fit_all(&spec.geometry, &spec.limits, &spec.camera)?;
    save_manifolds(out, &manifolds)?;
    println!("wrote {} manifolds to {}", manifolds.len(), out.display());
    Ok(())
}

fn cmd_reconstruct(cfg: &Config, model: &Path, psom: &Path, image: &Path) -> Result<()> {
    let model = HierarchyModel::load(model)?;
    let manifolds: [PSOMManifold; FINGER_COUNT] = load_manifolds(psom)?
        .try_into()
        .map_err(|v: Vec<_>| Error::invalid(format!("expected {} manifolds, got {}", FINGER_COUNT, v.len())))?;
    let img = read_pgm(image)?;
    let det = detect(&model, &img)?;
    let spec = cfg.dataset.to_spec();
    let result = reconstruct_posture(&manifolds, &det.refined, &spec.limits, &cfg.psom.to_invert_config())?;
    let params = result.pose.params();
    println!(
        "pose: {}",
        params.iter().map(|p| format!("{:+.4}", p)).collect::<Vec<_>>().join(" ")
    );
    println!("finger  abduction  flexion    depth  residual  ok");
    for f in 0..FINGER_COUNT {
        println!(
            "{:6}  {:+9.4}  {:7.4}  {:7.3}  {:8.2e}  {}",
            f,
            params[2 * f],
            params[2 * f + 1],
            result.depths[f],
            result.residuals[f],
            if result.finger_ok[f] { "yes" } else { "no" },
        );
    }
    Ok(())
}

fn cmd_run_attention(cfg: &Config, scenario: &Path, out: &Path, snapshots: &Option<PathBuf>) -> Result<()> {
    let scenario = attention::load_scenario(scenario)?;
    let result = attention::run_episode(&scenario, &cfg.attention.to_attention_config())?;
    write_text(out, &attention::trace_csv(&result))?;
    if let Some(dir) = snapshots {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (step, map) in result.attention_maps.iter().enumerate() {
            let frame = attention::render_scenario_frame(&scenario, step);
            write_ppm(&dir.join(format!("frame_{:04}.ppm", step)), &frame.r, &frame.g, &frame.b)?;
            write_pgm(&dir.join(format!("attention_{:04}.pgm", step)), map)?;
        }
    }
    let fixated = result.trace.iter().filter(|s| s.fixation.is_some()).count();
    println!("{} steps, {} fixations, trace written to {}", result.trace.len(), fixated, out.display());
    Ok(())
}

fn cmd_run_grasp(cfg: &Config, out: &Path) -> Result<()> {
    let trace = grasp::simulate(&cfg.grasp.to_plant(), &cfg.grasp.to_grasp_config())?;
    write_text(out, &trace.to_csv())?;
    for line in &trace.log {
        println!("{}", line);
    }
    let final_phase = trace.final_phase().map(|p| p.name()).unwrap_or("none");
    println!("{} steps, final state {}, trace written to {}", trace.rows.len(), final_phase, out.display());
    Ok(())
}

/// Module label used to prefix errors, so failures name the stage.
fn module_label(cmd: &Command) -> &'static str {
    match cmd {
        Command::GenData { .. } => "gen-data",
        Command::Train { .. } | Command::Eval { .. } => "hierarchy",
        Command::FitPsom { .. } | Command::Reconstruct { .. } => "psom",
        Command::RunAttention { .. } => "attention",
        Command::RunGrasp { .. } => "grasp",
        Command::DumpConfig => "config",
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?;
    match &cli.command {
        Command::GenData { n, seed, out } => cmd_gen_data(&cfg, *n, *seed, out),
        Command::Train { data, out } => cmd_train(&cfg, data, out),
        Command::Eval { model, data } => cmd_eval(model, data),
        Command::FitPsom { out } => cmd_fit_psom(&cfg, out),
        Command::Reconstruct { model, psom, image } => cmd_reconstruct(&cfg, model, psom, image),
        Command::RunAttention { scenario, out, snapshots } => {
            cmd_run_attention(&cfg, scenario, out, snapshots)
        }
        Command::RunGrasp { out } => cmd_run_grasp(&cfg, out),
        Command::DumpConfig => {
            print!("{}", cfg.dump());
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("neurohand: {}: {}", module_label(&cli.command), err);
        std::process::exit(err.exit_code());
    }
}
