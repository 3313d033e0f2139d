use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amodal_core::assoc::associate;
use amodal_pipeline::bench::{run_bench, summarize, write_bench_csv};
use amodal_pipeline::frame::load_frame;
use amodal_pipeline::prepare::prepare_targets;
use amodal_pipeline::report::bank_report;
use amodal_pipeline::synth::{synth_scenes, SynthSpec};
use amodal_pipeline::{read_bank, run_annotate, PipelineConfig, PipelineError, Result};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "amodal", version, about = "Amodal 3D box annotation from image proposals and LiDAR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annotate every frame under the configured input directory.
    Annotate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit one proposal of one frame and print the cost breakdown.
    FitBox {
        /// Frame manifest (`*.frame.json`).
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        proposal: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare swarm search against the grid baseline on synthetic instances.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate synthetic frames with ground truth.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a bank file.
    Report {
        #[arg(long)]
        bank: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
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
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Annotate { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let report = run_annotate(&cfg)?;
            print!("{}", report.render());
            println!("bank: {}", cfg.output.bank.display());
        }
        Command::FitBox { scene, proposal, config } => {
            let cfg = match config {
                Some(p) => PipelineConfig::load(p)?,
                None => PipelineConfig::default(),
            };
            fit_box(&cfg, &scene, proposal)?;
        }
        Command::Bench { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let rows = run_bench(&cfg)?;
            write_bench_csv(&cfg.bench.csv, &rows)?;
            println!("{:<9} {:>8} {:>9} {:>12} {:>10}", "method", "budget", "instances", "median_cost", "median_iou");
            for s in summarize(&rows) {
                println!(
                    "{:<9} {:>8} {:>9} {:>12.4} {:>10.4}",
                    s.method.to_string(),
                    s.budget,
                    s.instances,
                    s.median_cost,
                    s.median_iou
                );
            }
            println!("csv: {}", cfg.bench.csv.display());
        }
        Command::Synth { spec, out } => {
            let spec = SynthSpec::load(&spec)?;
            let manifests = synth_scenes(&spec, &out)?;
            println!("wrote {} frames to {}", manifests.len(), out.display());
        }
        Command::Report { bank, json } => {
            let report = bank_report(&read_bank(&bank)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                print!("{}", report.render());
            }
        }
    }
    Ok(())
}

fn fit_box(cfg: &PipelineConfig, manifest: &Path, index: usize) -> Result<()> {
    use amodal_core::sceneprep::{cluster_objects, remove_ground};

    let frame = load_frame(manifest)?;
    amodal_pipeline::annotate::check_frame(&frame, cfg)?;
    let Some(prop) = frame.proposals.get(index) else {
        return Err(PipelineError::Config(format!(
            "proposal {index} out of range ({} proposals)",
            frame.proposals.len()
        )));
    };
    let scene = &frame.scene;
    let split = match &frame.ground {
        Some(g) => g.clone(),
        None => remove_ground(&scene.cloud, &cfg.ground)?,
    };
    let clusters = match &frame.clusters {
        Some(c) => c.clone(),
        None => cluster_objects(&scene.cloud, &split.non_ground, cfg.clustering.eps, cfg.clustering.min_pts),
    };
    let clusters: Vec<_> = clusters.into_iter().filter(|c| c.len() >= cfg.clustering.min_cluster_size).collect();
    let (mut pairs, _) = associate(scene, std::slice::from_ref(prop), &clusters, &cfg.association);
    if pairs.is_empty() {
        return Err(PipelineError::Config(format!("proposal {index} matches no cluster")));
    }
    for p in &mut pairs {
        p.proposal_index = index;
    }
    let (targets, stats) = prepare_targets(scene, &pairs, cfg);
    let Some(t) = targets.first() else {
        return Err(PipelineError::Config(format!("search failed for all {} pairs", stats.pairs)));
    };
    let out = serde_json::json!({
        "frame": t.frame,
        "proposal_index": index,
        "pairs": stats.pairs,
        "box": t.bbox,
        "cost": t.cost,
        "verdict": t.verdict,
        "fit_for_alignment": t.fit_for_alignment,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}
