//! `frontmesh` command-line driver.
//!
//! Exit status: 0 on success, 2 for configuration problems (bad flags,
//! config file, scene or input mesh), 3 when a run fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use frontmesh::config::{matched_resolution, parse_bbox, Command, RunConfig};
use frontmesh::field::{CountingField, Sdf};
use frontmesh::io::{read_mesh, write_mesh};
use frontmesh::marching_cubes::{extract, GridSpec};
use frontmesh::mesher::{self, RunReport};
use frontmesh::metrics::{self, project_samples, sample_surface, EvalReport, SurfaceSamples};
use frontmesh::predictor::PredictorChoice;
use frontmesh::scene::load_field;
use frontmesh::TriMesh;

#[derive(Parser)]
#[command(name = "frontmesh", version, about = "Advancing-front meshing of signed distance fields")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mesh a field with the advancing front.
    Mesh(Common),
    /// Extract the zero level set with marching cubes.
    Mc(Common),
    /// Evaluate a mesh file against a field.
    Eval(Common),
    /// Statistics of a mesh file.
    Stats(Common),
    /// Run both meshers at matched detail and compare them.
    Compare(Common),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct Common {
    /// Configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scene description, or network weights (`.json`).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output mesh (`.obj` or `.ply`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mesh to evaluate (eval, stats).
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Prefix for the angle and area histogram CSV files.
    #[arg(long)]
    histograms: Option<PathBuf>,
    /// Bounding box as "xmin ymin zmin xmax ymax zmax".
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<String>,
    /// Default circumradius.
    #[arg(long)]
    rd: Option<f64>,
    /// Number of seed triangles.
    #[arg(long)]
    seeds: Option<usize>,
    /// Marching-cubes cells per axis.
    #[arg(long)]
    resolution: Option<usize>,
    /// Surface samples used by the metrics.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// analytic | mlp:PATH | constant:R_LS,R_ER
    #[arg(long)]
    predictor: Option<String>,
    #[arg(long)]
    max_steps: Option<usize>,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), Failure> {
    let (command, args) = match cmd {
        Cmd::Mesh(a) => (Command::Mesh, a),
        Cmd::Mc(a) => (Command::Mc, a),
        Cmd::Eval(a) => (Command::Eval, a),
        Cmd::Stats(a) => (Command::Stats, a),
        Cmd::Compare(a) => (Command::Compare, a),
    };
    let cfg = build_config(command, &args).config()?;
    let threads = cfg.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().runtime()?;
    pool.install(|| match command {
        Command::Mesh => cmd_mesh(&cfg),
        Command::Mc => cmd_mc(&cfg),
        Command::Eval => cmd_eval(&cfg),
        Command::Stats => cmd_stats(&cfg),
        Command::Compare => cmd_compare(&cfg),
    })
}

fn build_config(command: Command, a: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != command {
            return Err(anyhow!("config file is for the {c:?} command"));
        }
    }
    if let Some(rd) = a.rd {
        cfg.meshing = cfg.meshing.with_r_d(rd);
    }
    if let Some(s) = &a.bbox {
        cfg.bbox = parse_bbox(s).map_err(|e| anyhow!("--bbox: {e}"))?;
    }
    if let Some(p) = &a.predictor {
        cfg.meshing.predictor = p.parse::<PredictorChoice>().map_err(|e| anyhow!("--predictor: {e}"))?;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
        cfg.meshing.rng_seed = seed;
    } else {
        cfg.meshing.rng_seed = cfg.seed;
    }
    macro_rules! take {
        ($flag:expr => $target:expr) => {
            if let Some(v) = $flag.clone() {
                $target = v;
            }
        };
    }
    take!(a.seeds => cfg.meshing.seeds);
    take!(a.max_steps => cfg.meshing.max_steps);
    take!(a.samples => cfg.samples);
    if a.resolution.is_some() {
        cfg.resolution = a.resolution;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    for (flag, target) in [(&a.scene, &mut cfg.scene), (&a.out, &mut cfg.out), (&a.input, &mut cfg.input), (&a.report, &mut cfg.report), (&a.histograms, &mut cfg.histograms)] {
        if flag.is_some() {
            *target = flag.clone();
        }
    }
    cfg.validate()?;
    let needs_scene = matches!(command, Command::Mesh | Command::Mc | Command::Eval | Command::Compare);
    if needs_scene && cfg.scene.is_none() {
        return Err(anyhow!("--scene is required"));
    }
    if matches!(command, Command::Eval | Command::Stats) && cfg.input.is_none() {
        return Err(anyhow!("--input is required"));
    }
    if let PredictorChoice::Mlp(p) = &cfg.meshing.predictor {
        if !p.exists() {
            return Err(anyhow!("predictor weights {} not found", p.display()));
        }
    }
    Ok(cfg)
}

fn scene(cfg: &RunConfig) -> Result<Sdf, Failure> {
    let path = cfg.scene.as_ref().expect("checked while building the config");
    load_field(path).with_context(|| format!("loading scene {}", path.display())).config()
}

fn emit_report(cfg: &RunConfig, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).runtime()?;
    match &cfg.report {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())).runtime(),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn save_mesh(mesh: &TriMesh, path: &Path) -> Result<(), Failure> {
    write_mesh(mesh, path).with_context(|| format!("writing {}", path.display())).runtime()
}

fn write_histograms(cfg: &RunConfig, stats: &metrics::MeshStats, suffix: &str) -> Result<(), Failure> {
    let Some(prefix) = &cfg.histograms else { return Ok(()) };
    for (name, hist) in [("angles", &stats.angles), ("areas", &stats.areas)] {
        let mut path = prefix.clone().into_os_string();
        path.push(format!("{suffix}_{name}.csv"));
        std::fs::write(&path, hist.to_csv()).with_context(|| format!("writing {}", PathBuf::from(&path).display())).runtime()?;
    }
    Ok(())
}

fn run_mesher(cfg: &RunConfig, field: &Sdf) -> Result<(TriMesh, RunReport), Failure> {
    let (mesh, report) = mesher::run(field, &cfg.bbox, &cfg.meshing).runtime()?;
    Ok((TriMesh::from(&mesh), report))
}

fn run_mc(field: &Sdf, grid: &GridSpec) -> (TriMesh, serde_json::Value) {
    let counted = CountingField::new(field);
    let start = Instant::now();
    let mesh = extract(&counted, grid);
    let report = json!({
        "resolution": grid.resolution,
        "faces": mesh.num_faces(),
        "vertices": mesh.num_vertices(),
        "queries": counted.counts(),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    (mesh, report)
}

/// Dense samples of the true surface: a fine marching-cubes mesh sampled
/// and projected onto the zero level set.
fn reference_samples(cfg: &RunConfig, field: &Sdf) -> Result<SurfaceSamples, Failure> {
    let grid = GridSpec::new(cfg.bbox, cfg.reference_resolution).config()?;
    let dense = extract(field, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let raw = sample_surface(&dense, cfg.samples, &mut rng).context("reference surface").runtime()?;
    Ok(project_samples(field, &raw))
}

fn evaluate(cfg: &RunConfig, mesh: &TriMesh, field: &Sdf, reference: &SurfaceSamples) -> Result<EvalReport, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    metrics::evaluate(mesh, field, reference, cfg.samples, &mut rng).runtime()
}

fn cmd_mesh(cfg: &RunConfig) -> Result<(), Failure> {
    let field = scene(cfg)?;
    let (mesh, report) = run_mesher(cfg, &field)?;
    if let Some(out) = &cfg.out {
        save_mesh(&mesh, out)?;
    }
    eprintln!(
        "{} faces, {} vertices, {} boundary edges, {} queries in {:.2}s",
        mesh.num_faces(),
        mesh.num_vertices(),
        report.remaining_boundary_edges,
        report.queries.total(),
        report.wall_time_s
    );
    emit_report(cfg, &serde_json::to_value(&report).runtime()?)
}

fn cmd_mc(cfg: &RunConfig) -> Result<(), Failure> {
    let field = scene(cfg)?;
    let grid = cfg.grid().config()?;
    let (mesh, report) = run_mc(&field, &grid);
    if let Some(out) = &cfg.out {
        save_mesh(&mesh, out)?;
    }
    emit_report(cfg, &report)
}

fn cmd_eval(cfg: &RunConfig) -> Result<(), Failure> {
    let field = scene(cfg)?;
    let input = cfg.input.as_ref().expect("checked while building the config");
    let mesh = read_mesh(input).with_context(|| format!("reading {}", input.display())).config()?;
    let reference = reference_samples(cfg, &field)?;
    let report = evaluate(cfg, &mesh, &field, &reference)?;
    write_histograms(cfg, &report.stats, "")?;
    emit_report(cfg, &serde_json::to_value(&report).runtime()?)
}

fn cmd_stats(cfg: &RunConfig) -> Result<(), Failure> {
    let input = cfg.input.as_ref().expect("checked while building the config");
    let mesh = read_mesh(input).with_context(|| format!("reading {}", input.display())).config()?;
    let stats = metrics::mesh_stats(&mesh);
    let holes = mesh.to_halfedge().map(|m| metrics::hole_metrics(&m)).context("hole statistics").runtime()?;
    write_histograms(cfg, &stats, "")?;
    emit_report(cfg, &json!({ "stats": stats, "holes": holes, "euler_characteristic": mesh.euler_characteristic() }))
}

fn cmd_compare(cfg: &RunConfig) -> Result<(), Failure> {
    let field = scene(cfg)?;
    let resolution = cfg.resolution.unwrap_or_else(|| matched_resolution(&cfg.bbox, cfg.meshing.r_d));
    let grid = GridSpec::new(cfg.bbox, resolution).config()?;

    let (front, front_run) = run_mesher(cfg, &field)?;
    let (mc, mc_run) = run_mc(&field, &grid);
    if let Some(out) = &cfg.out {
        for (mesh, tag) in [(&front, "front"), (&mc, "mc")] {
            save_mesh(mesh, &tagged(out, tag))?;
        }
    }
    let reference = reference_samples(cfg, &field)?;
    let mut front_eval = evaluate(cfg, &front, &field, &reference)?;
    front_eval.queries = Some(front_run.queries);
    let mut mc_eval = evaluate(cfg, &mc, &field, &reference)?;
    mc_eval.queries = serde_json::from_value(mc_run["queries"].clone()).ok();
    write_histograms(cfg, &front_eval.stats, "front")?;
    write_histograms(cfg, &mc_eval.stats, "mc")?;

    eprintln!("{}", comparison_table(cfg.meshing.r_d, resolution, &front_eval, &mc_eval, front_run.wall_time_s, mc_run["wall_time_s"].as_f64().unwrap_or(0.0)));
    emit_report(
        cfg,
        &json!({
            "r_d": cfg.meshing.r_d,
            "resolution": resolution,
            "front": { "eval": front_eval, "run": front_run },
            "mc": { "eval": mc_eval, "run": mc_run },
        }),
    )
}

fn tagged(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "obj".into());
    path.with_file_name(format!("{stem}_{tag}.{ext}"))
}

fn comparison_table(r_d: f64, res: usize, a: &EvalReport, b: &EvalReport, ta: f64, tb: f64) -> String {
    let mut rows: Vec<(String, String, String)> = vec![
        ("#F".into(), a.stats.faces.to_string(), b.stats.faces.to_string()),
        ("#V".into(), a.stats.vertices.to_string(), b.stats.vertices.to_string()),
        ("avg area".into(), format!("{:.3e}", a.stats.average_area), format!("{:.3e}", b.stats.average_area)),
        ("chamfer mesh->ref".into(), format!("{:.3e}", a.chamfer.pred_to_ref), format!("{:.3e}", b.chamfer.pred_to_ref)),
        ("chamfer ref->mesh".into(), format!("{:.3e}", a.chamfer.ref_to_pred), format!("{:.3e}", b.chamfer.ref_to_pred)),
        ("chamfer bidirectional".into(), format!("{:.3e}", a.chamfer.bidirectional), format!("{:.3e}", b.chamfer.bidirectional)),
    ];
    for (fa, fb) in a.f_scores.iter().zip(&b.f_scores) {
        rows.push((format!("F1 @ {}", fa.threshold), format!("{:.4}", fa.f1), format!("{:.4}", fb.f1)));
    }
    rows.extend([
        ("normal consistency".into(), format!("{:.4}", a.normal_consistency), format!("{:.4}", b.normal_consistency)),
        ("mean |sdf|".into(), format!("{:.3e}", a.sdf.mean_abs), format!("{:.3e}", b.sdf.mean_abs)),
        ("boundary edge ratio".into(), format!("{:.4}", a.holes.boundary_edge_ratio), format!("{:.4}", b.holes.boundary_edge_ratio)),
        ("holes".into(), a.holes.holes.to_string(), b.holes.holes.to_string()),
        ("sdf queries".into(), a.queries.map_or("-".into(), |q| q.total().to_string()), b.queries.map_or("-".into(), |q| q.total().to_string())),
        ("time [s]".into(), format!("{ta:.2}"), format!("{tb:.2}")),
    ]);
    let mut out = format!("{:<24}{:>16}{:>16}\n", "", format!("front r_d={r_d}"), format!("mc res={res}"));
    for (name, x, y) in rows {
        out.push_str(&format!("{name:<24}{x:>16}{y:>16}\n"));
    }
    out
}
