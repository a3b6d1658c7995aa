use std::path::PathBuf;
use std::process::ExitCode;

use basecamp_core::cloudio::ScanConfig;
use basecamp_core::geom::{Quat, Vec3};
use basecamp_core::optimizer::{Adjustment, OptimizeConfig, Seeds};
use basecamp_workbench::bundle::Bundle;
use basecamp_workbench::commands::{
    cmd_adjust, cmd_annotate, cmd_demo, cmd_optimize, cmd_report, cmd_scan, threads_from_env, OptimizeArgs,
    ScanArgs,
};
use basecamp_workbench::report::HEATMAP_PITCH;
use basecamp_workbench::{WorkbenchError, EXIT_BELOW_THRESHOLD, EXIT_OK};
use clap::{Parser, Subcommand};

/// Robot base placement workbench.
#[derive(Parser)]
#[command(name = "basecamp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic demo cell as a bundle (scene, trajectory, strokes, search space, robots).
    Demo {
        dir: PathBuf,
        /// Also run scan, annotate and optimize with default settings.
        #[arg(long)]
        run: bool,
    },
    /// Simulate a handheld scan of a mesh scene into cloud.ply.
    Scan {
        bundle: PathBuf,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Image-plane grid pitch at 1 m, metres.
        #[arg(long)]
        grid_size: Option<f64>,
        #[arg(long)]
        points_per_frame: Option<usize>,
        /// Range noise standard deviation, metres.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed_scan: u64,
    },
    /// Derive interaction zones and avoidance hulls from the spray strokes.
    Annotate {
        bundle: PathBuf,
        /// Strokes file to use instead of the bundle's annotations.json.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Search the plane for the base position; exit 3 when below threshold.
    Optimize {
        bundle: PathBuf,
        #[command(flatten)]
        opts: OptimizeFlags,
    },
    /// Print the placement and write reach_heatmap.csv, targets.csv and report.txt.
    Report {
        bundle: PathBuf,
        #[arg(long, default_value_t = HEATMAP_PITCH)]
        pitch: f64,
    },
    /// Move, scale or rotate the search space (plane-local), then rerun optimize.
    Adjust {
        bundle: PathBuf,
        /// Offset `x,y,z` in metres.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["scale", "rotate_deg"])]
        translate: Option<Vec<f64>>,
        /// Factors `fx,fy` on the half extents.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "rotate_deg")]
        scale: Option<Vec<f64>>,
        /// Rotation about the plane normal, degrees.
        #[arg(long, allow_negative_numbers = true)]
        rotate_deg: Option<f64>,
    },
}

#[derive(clap::Args)]
struct OptimizeFlags {
    /// Built-in robot name or robot JSON path (default: the bundle's robot.json).
    #[arg(long)]
    robot: Option<String>,
    #[arg(long, default_value_t = Seeds::default().targets)]
    seed_targets: u64,
    #[arg(long, default_value_t = Seeds::default().optimizer)]
    seed_opt: u64,
    /// Percent of targets that must be reached.
    #[arg(long, default_value_t = 90.0)]
    threshold: f64,
    #[arg(long, default_value_t = 100)]
    per_zone: usize,
    #[arg(long, default_value = "mlsl")]
    global: String,
    #[arg(long, default_value = "nelder-mead")]
    local: String,
}

fn run(cli: Cli) -> Result<u8, WorkbenchError> {
    match cli.command {
        Command::Demo { dir, run } => {
            let bundle = cmd_demo(&dir)?;
            println!("demo bundle written to {}", dir.display());
            if !run {
                println!("next: basecamp scan {0} && basecamp annotate {0} && basecamp optimize {0}", dir.display());
                return Ok(EXIT_OK as u8);
            }
            let scan = cmd_scan(&bundle, &ScanArgs::default())?;
            println!("scan: {} points in {} frames", scan.points, scan.frames);
            let doc = cmd_annotate(&bundle, None)?;
            println!("annotate: {} zones, {} regions", doc.zones.len(), doc.regions.len());
            optimize(&bundle, OptimizeArgs::default())
        }
        Command::Scan {
            bundle,
            scene,
            trajectory,
            grid_size,
            points_per_frame,
            noise,
            seed_scan,
        } => {
            let bundle = Bundle::open(bundle)?;
            let mut config = ScanConfig::default();
            if let Some(g) = grid_size {
                config.grid_size = g;
            }
            if let Some(p) = points_per_frame {
                config.points_per_frame_cap = p;
            }
            if let Some(n) = noise {
                config.noise_sigma = n;
            }
            let args = ScanArgs {
                scene,
                trajectory,
                config,
                seed: seed_scan,
            };
            let out = cmd_scan(&bundle, &args)?;
            println!(
                "scanned {} points in {} frames (grid {} m, {} points per frame)",
                out.points, out.frames, out.config.grid_size, out.config.points_per_frame_cap
            );
            Ok(EXIT_OK as u8)
        }
        Command::Annotate { bundle, annotations } => {
            let bundle = Bundle::open(bundle)?;
            let doc = cmd_annotate(&bundle, annotations.as_deref())?;
            for z in &doc.zones {
                println!("zone {}: center {:?}, half extents {:?}", z.zone_id, z.center.as_slice(), z.half_extents.as_slice());
            }
            for r in &doc.regions {
                println!("region {}: {} hull vertices", r.region_id, r.hull.vertices.len());
            }
            Ok(EXIT_OK as u8)
        }
        Command::Optimize { bundle, opts } => {
            let bundle = Bundle::open(bundle)?;
            let config = OptimizeConfig {
                per_zone: opts.per_zone,
                threshold: opts.threshold,
                seeds: Seeds {
                    targets: opts.seed_targets,
                    optimizer: opts.seed_opt,
                },
                global: opts.global,
                local: opts.local,
                ..OptimizeConfig::default()
            };
            optimize(&bundle, OptimizeArgs { robot: opts.robot, config })
        }
        Command::Report { bundle, pitch } => {
            let bundle = Bundle::open(bundle)?;
            let out = cmd_report(&bundle, pitch)?;
            print!("{}", out.text);
            Ok(EXIT_OK as u8)
        }
        Command::Adjust {
            bundle,
            translate,
            scale,
            rotate_deg,
        } => {
            let bundle = Bundle::open(bundle)?;
            let op = match (translate, scale, rotate_deg) {
                (Some(t), None, None) if t.len() == 3 => Adjustment::Translate {
                    offset: Vec3::new(t[0], t[1], t[2]),
                },
                (None, Some(s), None) if s.len() == 2 => Adjustment::Scale { fx: s[0], fy: s[1] },
                (None, None, Some(d)) => Adjustment::Rotate {
                    rotation: Quat::from_axis_angle(&Vec3::z_axis(), d.to_radians()),
                },
                _ => return Err(WorkbenchError::Usage("give exactly one of --translate x,y,z, --scale fx,fy or --rotate-deg d".into())),
            };
            let s = cmd_adjust(&bundle, &op)?;
            println!(
                "search space: center {:?}, half extents {} x {} m",
                s.center.as_slice(),
                s.half_extent_x,
                s.half_extent_y
            );
            Ok(EXIT_OK as u8)
        }
    }
}

fn optimize(bundle: &Bundle, mut args: OptimizeArgs) -> Result<u8, WorkbenchError> {
    args.config.threads = threads_from_env()?;
    let r = cmd_optimize(bundle, &args)?;
    let b = &r.best;
    println!("best (workcell frame): x = {:.4} m, y = {:.4} m", b.candidate.x, b.candidate.y);
    println!(
        "reach: {:.1}% (N = {} of {}), miss sum D = {:.4} m, objective {:.4}",
        r.reach_percentage,
        b.n_reached,
        r.targets.len(),
        b.miss_sum,
        b.objective
    );
    println!("{} evaluations, {} local runs", r.evaluations, r.local_runs);
    if r.meets_threshold {
        Ok(EXIT_OK as u8)
    } else {
        if let Some(h) = &r.hint {
            eprintln!("{h}");
        }
        Ok(EXIT_BELOW_THRESHOLD as u8)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
