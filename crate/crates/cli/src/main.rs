use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use viewpush::bench::{
    aggregates_csv, rows_csv, run_pipeline, sweep, BenchReport, PipelineParams, PlannerConfig, PlannerKind, PushSelection,
};
use viewpush::episode::{Episode, EpisodeConfig};
use viewpush::export;
use viewpush::mapping::MapParams;
use viewpush::par;
use viewpush::push::{make_push_map, sample_candidates, score_push, PushConfig, RolloutView};
use viewpush::sensor::{depth_to_pointcloud, render_depth, CameraPose};

#[derive(Parser)]
#[command(name = "viewpush", version, about = "Viewpoint planning and push simulation on a 2.5D shelf height map")]
struct Cli {
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scene and print its trace
    Run {
        #[command(flatten)]
        pipeline: PipelineArgs,

        #[arg(long, default_value_t = PlannerKind::Greedy)]
        planner: PlannerKind,

        #[arg(long, default_value = "0.05")]
        push_length: f64,

        #[arg(long, default_value = "scored")]
        push_selection: PushSelection,

        /// Directory for trace.jsonl, pushes.json, row.json and map snapshots
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch of scenes per configuration and write the report
    Sweep {
        #[command(flatten)]
        pipeline: PipelineArgs,

        /// Comma-separated planners
        #[arg(long, value_delimiter = ',', default_value = "greedy")]
        planner: Vec<PlannerKind>,

        /// Comma-separated push lengths in meters
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        push_length: Vec<f64>,

        /// Comma-separated push selections
        #[arg(long, value_delimiter = ',', default_value = "scored")]
        push_selection: Vec<PushSelection>,

        #[arg(long, default_value_t = 100)]
        scenes: usize,

        /// Leave the timing columns out of rows.csv
        #[arg(long)]
        no_timing: bool,

        #[arg(long, default_value = "out/sweep")]
        out: PathBuf,
    },
    /// Write push maps with simulated labels for every candidate
    ExportPushmaps {
        #[command(flatten)]
        pipeline: PipelineArgs,

        #[arg(long, default_value_t = 1)]
        scenes: usize,

        #[arg(long, default_value = "0.05")]
        push_length: f64,

        #[arg(long, default_value = "out/pushmaps")]
        out: PathBuf,
    },
    /// Write scene, depth, point cloud and map snapshots after the bootstrap
    Render {
        #[command(flatten)]
        pipeline: PipelineArgs,

        /// Extra view as x,y,z,pitch,yaw (meters, radians)
        #[arg(long, allow_hyphen_values = true)]
        pose: Option<String>,

        #[arg(long, default_value = "out/render")]
        out: PathBuf,
    },
}

/// Scene, map and pipeline settings shared by every subcommand.
#[derive(Args, Clone)]
struct PipelineArgs {
    /// First scene seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Viewpoint planning only
    #[arg(long)]
    no_push: bool,

    #[arg(long, default_value_t = 0.01)]
    tau_push: f64,

    #[arg(long, default_value_t = 8)]
    max_iterations: usize,

    /// Planner steps per planning phase
    #[arg(long, default_value_t = 10)]
    max_vpp_steps: usize,

    /// Sampled poses per greedy step, pool size for the global planner
    #[arg(long, default_value_t = 64)]
    candidates: usize,

    /// Displacement penalty per meter in the push score
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,

    #[arg(long, default_value_t = 1.0)]
    drop_penalty: f64,

    #[arg(long, default_value_t = 25)]
    rays_per_origin: usize,

    #[arg(long, default_value_t = 8)]
    min_objects: usize,

    #[arg(long, default_value_t = 10)]
    max_objects: usize,

    #[arg(long, default_value_t = 0.01)]
    cell_size: f64,

    #[arg(long, default_value_t = 0.2)]
    tau_unknown: f64,

    #[arg(long, default_value_t = 0.85)]
    hit: f64,

    #[arg(long, default_value_t = -0.4, allow_hyphen_values = true)]
    miss: f64,

    #[arg(long, default_value_t = 3.5)]
    clamp: f64,

    #[arg(long, default_value_t = 0.015)]
    occupied_height: f64,
}

impl PipelineArgs {
    fn params(&self, planner: PlannerKind, length: f64, selection: PushSelection) -> Result<PipelineParams> {
        let mut p = PipelineParams::default();
        p.tau_push = self.tau_push;
        p.max_iterations = self.max_iterations;
        p.max_vpp_steps = self.max_vpp_steps;
        p.push_selection = (!self.no_push).then_some(selection);
        p.push = self.push_config(length);
        p.planner = PlannerConfig { n_candidates: self.candidates, ..PlannerConfig::new(planner) };
        p.map = self.map_params();
        p.objects = (self.min_objects, self.max_objects);
        p.validate()?;
        Ok(p)
    }

    fn push_config(&self, length: f64) -> PushConfig {
        PushConfig {
            length,
            lambda: self.lambda,
            drop_penalty: self.drop_penalty,
            rays_per_origin: self.rays_per_origin,
            ..PushConfig::default()
        }
    }

    fn map_params(&self) -> MapParams {
        MapParams {
            cell_size: self.cell_size,
            tau_unknown: self.tau_unknown,
            hit: self.hit,
            miss: self.miss,
            clamp: self.clamp,
            occupied_height: self.occupied_height,
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    export::write(path, bytes.as_ref()).with_context(|| format!("writing {}", path.display()))
}

fn bootstrapped(p: &PipelineParams, seed: u64) -> Result<Episode> {
    let scene = p.scene(seed)?;
    let mut cfg = EpisodeConfig::for_scene(&scene);
    cfg.map = p.map.clone();
    Ok(Episode::new(scene, cfg)?)
}

fn cmd_run(args: &PipelineArgs, planner: PlannerKind, length: f64, selection: PushSelection, out: Option<&Path>) -> Result<()> {
    let p = args.params(planner, length, selection)?;
    let res = run_pipeline(args.seed, &p)?;
    let t = &res.trace;
    println!("seed {} | {} objects | bootstrap unknown {}", args.seed, res.row.n_objects, t.unknown_bootstrap);
    for s in &t.steps {
        println!(
            "step {:>2} phase {} pose ({:+.3}, {:+.3}, {:+.3}, {:+.2}, {:+.2}) ig {:.4} cost {:.3} reward {:+.3} h {:.4}{}",
            s.step,
            s.phase,
            s.pose.x,
            s.pose.y,
            s.pose.z,
            s.pose.pitch,
            s.pose.yaw,
            s.information_gain,
            s.motion_cost,
            s.reward,
            s.entropy_after,
            if s.collision { " collision" } else { "" }
        );
    }
    for r in &res.pushes {
        println!(
            "push {} dir {} at ({:.3}, {:.3}) object {} moved {:.2} cm drops {:?} h {:.4} -> {:.4}",
            r.iteration,
            r.candidate.direction,
            r.candidate.start.x,
            r.candidate.start.y,
            r.contacted,
            r.displacement * 100.0,
            r.dropped,
            r.entropy_before,
            r.entropy_after
        );
    }
    let row = &res.row;
    println!(
        "entropy {:.4} -> {:.4} (VPP) -> {:.4} (final): {:.1}% overall, {:.1}% from pushes, {} pushes",
        row.entropy_bootstrap, row.entropy_post_vpp, row.entropy_final, row.vpp_reduction_pct, row.push_reduction_pct, row.iterations
    );
    if let Some(dir) = out {
        write(&dir.join("trace.jsonl"), t.to_jsonl()?)?;
        write(&dir.join("pushes.json"), serde_json::to_string_pretty(&res.pushes)?)?;
        write(&dir.join("row.json"), serde_json::to_string_pretty(row)?)?;
        write(&dir.join("final_scene.json"), res.final_scene.to_json()?)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_sweep(
    args: &PipelineArgs,
    planners: &[PlannerKind],
    lengths: &[f64],
    selections: &[PushSelection],
    scenes: usize,
    timing: bool,
    out: &Path,
) -> Result<()> {
    let mut configs = Vec::new();
    for &planner in planners {
        if args.no_push {
            configs.push(args.params(planner, lengths[0], selections[0])?);
            continue;
        }
        for &sel in selections {
            for &l in lengths {
                configs.push(args.params(planner, l, sel)?);
            }
        }
    }
    let rows = sweep(&configs, args.seed, scenes);
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    let csv = rows_csv(&rows, timing);
    let report = BenchReport::from_rows(rows);
    write(&out.join("rows.csv"), csv)?;
    write(&out.join("aggregates.csv"), aggregates_csv(&report))?;
    write(&out.join("report.json"), report.to_json()?)?;

    let mut s = String::new();
    for a in &report.aggregates {
        let _ = writeln!(
            s,
            "{:<28} reduction {:>5.1}% ± {:.1} | push {:>5.1}% ± {:.1} | iterations {:.2} | displacement {:.2} cm | drops {} | {:.1} ms/step",
            a.method,
            a.vpp_reduction_pct,
            a.vpp_reduction_se,
            a.push_reduction_pct,
            a.push_reduction_se,
            a.iterations,
            a.displacement_mean_cm,
            a.drops,
            a.plan_ms_per_step
        );
    }
    for c in &report.comparisons {
        let _ = writeln!(s, "{} vs {} [{}]: diff {:+.4}, p = {:.3e}", c.a, c.b, c.metric, c.test.mean_difference, c.test.p_value);
    }
    print!("{s}");
    if failed > 0 {
        eprintln!("{failed} scene(s) failed; see the error column");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_export(args: &PipelineArgs, scenes: usize, length: f64, out: &Path) -> Result<()> {
    let p = args.params(PlannerKind::Fixed3P, length, PushSelection::Scored)?;
    let mut labels =
        String::from("seed,index,file,row,col,x,y,z,direction,length,delta_entropy,displacement,dropped,wall_collision\n");
    let mut written = 0;
    for seed in args.seed..args.seed + scenes as u64 {
        let ep = match bootstrapped(&p, seed) {
            Ok(ep) => ep,
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                continue;
            }
        };
        let view = RolloutView { pose: ep.bootstrap_poses()[0], intrinsics: ep.config().intrinsics.clone() };
        let cands = sample_candidates(ep.map(), &p.push);
        let results = par::map(&cands, |c| {
            let pm = make_push_map(ep.map(), c).ok()?;
            let sc = score_push(ep.scene(), ep.map(), c, &p.push, &view).ok()?;
            Some((pm, sc))
        });
        for (i, (c, r)) in cands.iter().zip(results).enumerate() {
            let Some((pm, sc)) = r else { continue };
            let file = format!("seed{seed:04}/cand{i:04}.pgm");
            write(&out.join(&file), pm.probability_pgm())?;
            let o = &sc.outcome;
            let _ = writeln!(
                labels,
                "{seed},{i},{file},{},{},{:.4},{:.4},{:.4},{},{:.3},{:.6},{:.6},{},{}",
                c.row,
                c.col,
                c.start.x,
                c.start.y,
                c.start.z,
                c.direction,
                c.length,
                o.entropy_delta.unwrap_or(0.0),
                o.total_displacement(),
                !o.dropped.is_empty(),
                o.wall_collision
            );
            written += 1;
        }
    }
    write(&out.join("labels.csv"), labels)?;
    println!("wrote {written} push maps to {}", out.display());
    Ok(())
}

fn cmd_render(args: &PipelineArgs, pose: Option<&str>, out: &Path) -> Result<()> {
    let p = args.params(PlannerKind::Fixed3P, 0.05, PushSelection::Scored)?;
    let mut ep = bootstrapped(&p, args.seed)?;
    let intr = ep.config().intrinsics.clone();
    let (_, _, scene_img) = export::scene_ppm(ep.scene(), p.map.cell_size);
    write(&out.join("scene.ppm"), scene_img)?;
    write(&out.join("scene.json"), ep.scene().to_json()?)?;
    for (k, v) in ep.bootstrap_poses().iter().enumerate() {
        let img = render_depth(ep.scene(), v, &intr, &ep.config().workspace)?;
        write(&out.join(format!("depth{k}.pgm")), export::depth_pgm(&img))?;
        write(&out.join(format!("cloud{k}.xyz")), export::xyz(&depth_to_pointcloud(&img, v, &intr)))?;
    }
    if let Some(text) = pose {
        let v: Vec<f64> = text.split(',').map(|t| t.trim().parse()).collect::<Result<_, _>>().context("--pose")?;
        let [x, y, z, pitch, yaw] = v[..] else { bail!("--pose takes five comma-separated values") };
        let extra = CameraPose::new(x, y, z, pitch, yaw);
        let img = render_depth(ep.scene(), &extra, &intr, &ep.config().workspace)?;
        write(&out.join("depth_pose.pgm"), export::depth_pgm(&img))?;
        ep.step(extra)?;
    }
    let m = ep.map();
    write(&out.join("occupancy.pgm"), export::occupancy_pgm(m))?;
    write(&out.join("height.pgm"), export::height_pgm(m))?;
    write(&out.join("occupancy.csv"), export::occupancy_csv(m))?;
    write(&out.join("height.csv"), export::height_csv(m))?;
    println!("seed {} entropy {:.4}; wrote {}", args.seed, m.entropy(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }
    match &cli.command {
        Command::Run { pipeline, planner, push_length, push_selection, out } => {
            cmd_run(pipeline, *planner, *push_length, *push_selection, out.as_deref())
        }
        Command::Sweep { pipeline, planner, push_length, push_selection, scenes, no_timing, out } => {
            cmd_sweep(pipeline, planner, push_length, push_selection, *scenes, !no_timing, out)
        }
        Command::ExportPushmaps { pipeline, scenes, push_length, out } => cmd_export(pipeline, *scenes, *push_length, out),
        Command::Render { pipeline, pose, out } => cmd_render(pipeline, pose.as_deref(), out),
    }
}
