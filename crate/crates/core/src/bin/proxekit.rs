use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use proxekit::denoise::Background;
use proxekit::dsl::{apply_script, parse_script};
use proxekit::error::{Error, Result, StageExt, EXIT_INPUT};
use proxekit::fit::decompose;
use proxekit::io;
use proxekit::metrics::{chamfer_accelerated, grid_iou, l_gd};
use proxekit::pipeline::{self, edit_region, format_sig6, PipelineConfig};
use proxekit::proxy::{diff_proxies, Proxy, DEFAULT_DIFF_TOLERANCE};
use proxekit::voxel::{extract_mesh, voxelize_mesh, voxelize_proxy, DEFAULT_RESOLUTION};
use proxekit::warp::DEFAULT_DELTA;

#[derive(Parser)]
#[command(name = "proxekit", version, about = "Superquadric proxy editing over voxel shapes")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackgroundArg {
    Composite,
    Proxy,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a point cloud (XYZ text or OBJ vertices) into superquadrics.
    Fit {
        points: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Apply an edit script to a proxy.
    Edit {
        proxy: PathBuf,
        script: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the full edit pipeline and write every stage into a directory.
    Pipeline {
        mesh: PathBuf,
        proxy: PathBuf,
        script: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long, default_value_t = 25)]
        steps: usize,
        #[arg(long, default_value_t = 12)]
        init_offset: usize,
        #[arg(long, default_value_t = 16)]
        warp_offset: usize,
        #[arg(long, default_value_t = 20)]
        uc_offset: usize,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_DIFF_TOLERANCE)]
        diff_tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        fill_iters: usize,
        #[arg(long, default_value_t = 0)]
        dilate: usize,
        #[arg(long, value_enum, default_value_t = BackgroundArg::Composite)]
        background: BackgroundArg,
        #[arg(long)]
        save_latents: bool,
    },
    /// Compare two shapes.
    Metrics {
        #[command(subcommand)]
        which: MetricsCmd,
    },
    /// Voxelize a proxy (.json) or mesh (.obj) into a PXVG grid.
    Voxelize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
    },
    /// Extract a closed OBJ surface from a PXVG grid.
    Mesh {
        grid: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Symmetric Chamfer distance between two point sets.
    Chamfer { a: PathBuf, b: PathBuf },
    /// Chamfer distance outside the region touched by an edit.
    Lgd {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        orig: PathBuf,
        #[arg(long)]
        edited: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
    /// Intersection over union of two PXVG grids.
    Iou { a: PathBuf, b: PathBuf },
}

fn load_proxy(path: &Path) -> Result<Proxy> {
    Proxy::from_bytes(&io::read_file(path)?).map_err(|e| Error::input(path, e))
}

fn load_text(path: &Path) -> Result<String> {
    String::from_utf8(io::read_file(path)?).map_err(|_| Error::input(path, "not UTF-8 text"))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Fit { points, k, seed, output } => {
            let pts = io::load_points(&points).stage("load")?;
            let proxy = decompose(&pts, k as usize, seed).stage("fit")?;
            io::write_file(&output, proxy.to_json().as_bytes())?;
            eprintln!("fitted {} primitives to {} points", proxy.len(), pts.len());
        }
        Command::Edit { proxy, script, output } => {
            let p = load_proxy(&proxy)?;
            let s = parse_script(&load_text(&script)?).map_err(|e| Error::input(&script, e))?;
            let edited = apply_script(&s, &p).map_err(|e| Error::input(&script, e))?;
            io::write_file(&output, edited.to_json().as_bytes())?;
            let d = diff_proxies(&p, &edited, DEFAULT_DIFF_TOLERANCE);
            eprintln!(
                "{} unchanged, {} edited, {} added, {} deleted",
                d.unchanged.len(),
                d.edited.len(),
                d.added.len(),
                d.deleted.len()
            );
        }
        Command::Pipeline {
            mesh,
            proxy,
            script,
            output,
            resolution,
            steps,
            init_offset,
            warp_offset,
            uc_offset,
            delta,
            diff_tol,
            seed,
            fill_iters,
            dilate,
            background,
            save_latents,
        } => {
            let cfg = PipelineConfig {
                resolution,
                total_steps: steps,
                init_offset,
                warp_offset,
                uc_offset,
                delta,
                diff_tolerance: diff_tol,
                seed,
                fill_iters,
                dilation: dilate,
                background: match background {
                    BackgroundArg::Composite => Background::Composite,
                    BackgroundArg::Proxy => Background::Proxy,
                },
                save_latents,
            };
            let out = pipeline::run_files(&mesh, &proxy, &script, &output, &cfg)?;
            print!("{}", out.report.to_text());
        }
        Command::Metrics { which } => match which {
            MetricsCmd::Chamfer { a, b } => {
                let v = chamfer_accelerated(&io::load_points(&a)?, &io::load_points(&b)?)?;
                println!("chamfer {}", format_sig6(v));
            }
            MetricsCmd::Lgd { a, b, orig, edited, delta } => {
                let diff = diff_proxies(&load_proxy(&orig)?, &load_proxy(&edited)?, DEFAULT_DIFF_TOLERANCE);
                let v = l_gd(&io::load_points(&a)?, &io::load_points(&b)?, &edit_region(&diff, delta))?;
                println!("l_gd {}", format_sig6(v));
            }
            MetricsCmd::Iou { a, b } => {
                let v = grid_iou(&io::read_pxvg(&a)?, &io::read_pxvg(&b)?)?;
                println!("iou {}", format_sig6(v));
            }
        },
        Command::Voxelize { input, output, resolution } => {
            let grid = if is_json(&input) {
                voxelize_proxy(&load_proxy(&input)?, None, resolution)?
            } else {
                voxelize_mesh(&io::load_obj(&input)?, resolution)?
            };
            io::write_pxvg(&output, &grid)?;
            eprintln!("{} of {} cells occupied", grid.count(), grid.len());
        }
        Command::Mesh { grid, output } => {
            let mesh = extract_mesh(&io::read_pxvg(&grid)?);
            io::save_obj(&output, &mesh)?;
            eprintln!("{} vertices, {} faces", mesh.vertices.len(), mesh.faces.len());
        }
    }
    Ok(())
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("PROXEKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PROXEKIT_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_INPUT as u8);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
