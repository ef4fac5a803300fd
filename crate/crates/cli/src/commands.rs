//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};

use ddasr_core::btas::{btas_peak_activation_estimate, make_schedule, coverage_map, run_btas, ModelLvn};
use ddasr_core::lf::io::{read_macpi, read_scene, read_scene_y, write_macpi, write_scene, write_scene_rgb};
use ddasr_core::lf::{
    evenly_spaced_indices, generate_constant_disparity_lf, macpi_from_sai, sai_from_macpi,
    LightField, SyntheticSceneSpec, Texture,
};
use ddasr_core::metrics::pfm::read_pfm;
use ddasr_core::metrics::{
    badpix, evaluate_scene, mse100, rgb_to_cbcr, ycbcr_to_rgb, AsrTask, DisparityMap, MetricReport,
};
use ddasr_core::net::checkpoint::{load_checkpoint, save_checkpoint};
use ddasr_core::net::{ddasr_forward, param_count, ModelState, NetworkConfig};
use ddasr_core::train::{train as run_training, PatchSet, Task, TrainConfig};
use ddasr_core::visuals::emit_visuals;

#[derive(Args)]
pub struct ConvertArgs {
    #[command(subcommand)]
    direction: ConvertDirection,
}

#[derive(Subcommand)]
enum ConvertDirection {
    /// Scene directory → single macro-pixel PNG (+ `.meta`).
    ToMacpi {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Macro-pixel PNG (+ `.meta`) → scene directory.
    ToSai {
        #[arg(long)]
        macpi: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn convert(args: ConvertArgs) -> Result<()> {
    match args.direction {
        ConvertDirection::ToMacpi { scene, out } => {
            let lf = read_scene_y(&scene)?;
            let m = macpi_from_sai(&lf)?;
            write_macpi(&out, &m)?;
            println!(
                "wrote {} ({}x{} macro-pixel image, A={})",
                out.display(),
                m.pixels().nrows(),
                m.pixels().ncols(),
                m.angular_size()
            );
        }
        ConvertDirection::ToSai { macpi, out } => {
            let m = read_macpi(&macpi)?;
            let lf = sai_from_macpi(&m);
            write_scene(&out, &lf, None)?;
            println!(
                "wrote {} ({}x{} views of {}x{})",
                out.display(),
                lf.num_u(),
                lf.num_v(),
                lf.height(),
                lf.width()
            );
        }
    }
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum TextureKind {
    Smooth,
    Checker,
    Step,
    Uniform,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Angular size A (square grid).
    #[arg(long)]
    views: usize,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    /// Disparity in pixels per view step (may be fractional).
    #[arg(long)]
    disparity: f64,
    #[arg(long, value_enum, default_value = "smooth")]
    texture: TextureKind,
    #[arg(long, default_value = "1")]
    seed: u64,
    /// Texture detail: harmonics (smooth), cell size (checker), edge column (step).
    #[arg(long)]
    texture_param: Option<usize>,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let texture = match args.texture {
        TextureKind::Smooth => Texture::SmoothNoise {
            seed: args.seed,
            harmonics: args.texture_param.unwrap_or(6),
        },
        TextureKind::Checker => Texture::Checker { period: args.texture_param.unwrap_or(4) },
        TextureKind::Step => Texture::HStep { col: args.texture_param.unwrap_or(args.width / 2) },
        TextureKind::Uniform => Texture::SeededUniform { seed: args.seed },
    };
    let spec = SyntheticSceneSpec {
        texture,
        disparity: args.disparity,
        a: args.views,
        h: args.height,
        w: args.width,
    };
    let lf = generate_constant_disparity_lf(&spec)?;
    write_scene(&args.out, &lf, Some((args.disparity, args.disparity)))?;
    println!(
        "wrote {} ({}x{} views of {}x{}, d={})",
        args.out.display(),
        args.views,
        args.views,
        args.height,
        args.width,
        args.disparity
    );
    Ok(())
}

#[derive(Args)]
pub struct InferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in", value_name = "IN")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Emit full-color output: network luminance plus chroma copied from the
    /// angularly nearest input view. Requires RGB input views.
    #[arg(long)]
    color: bool,
}

pub fn infer(args: InferArgs) -> Result<()> {
    let model = load_checkpoint(&args.ckpt)?;
    let scene = read_scene(&args.input)?;
    let dense_y = ddasr_forward(&scene.y, &model)?;
    if !args.color {
        write_scene(&args.out, &dense_y, scene.disparity_range)?;
    } else {
        let Some(rgb) = &scene.rgb else {
            bail!("--color needs RGB input views, but {} is grayscale", args.input.display());
        };
        let a_out = model.config.a_out;
        let a_in = model.config.a_in;
        let inputs = evenly_spaced_indices(a_out, a_in)?;
        let nearest = |x: usize| -> usize {
            *inputs
                .iter()
                .min_by_key(|&&i| (i as i64 - x as i64).unsigned_abs())
                .unwrap()
        };
        let (h, w) = (dense_y.height(), dense_y.width());
        let mut planes = [
            ndarray::Array4::<f32>::zeros((a_out, a_out, h, w)),
            ndarray::Array4::<f32>::zeros((a_out, a_out, h, w)),
            ndarray::Array4::<f32>::zeros((a_out, a_out, h, w)),
        ];
        for u in 0..a_out {
            for v in 0..a_out {
                // angular nearest input view in output coordinates, mapped
                // back to the sparse grid index
                let (nu, nv) = (nearest(u), nearest(v));
                let iu = inputs.iter().position(|&i| i == nu).unwrap();
                let iv = inputs.iter().position(|&i| i == nv).unwrap();
                for hh in 0..h {
                    for ww in 0..w {
                        let (r, g, b) = (
                            rgb[0].views()[[iu, iv, hh, ww]],
                            rgb[1].views()[[iu, iv, hh, ww]],
                            rgb[2].views()[[iu, iv, hh, ww]],
                        );
                        let (cb, cr) = rgb_to_cbcr(r, g, b);
                        let y = dense_y.views()[[u, v, hh, ww]];
                        let (r, g, b) = ycbcr_to_rgb(y, cb, cr);
                        planes[0][[u, v, hh, ww]] = r;
                        planes[1][[u, v, hh, ww]] = g;
                        planes[2][[u, v, hh, ww]] = b;
                    }
                }
            }
        }
        let fields = [
            LightField::new(planes[0].clone())?,
            LightField::new(planes[1].clone())?,
            LightField::new(planes[2].clone())?,
        ];
        write_scene_rgb(&args.out, &fields)?;
    }
    println!(
        "wrote {} ({}x{} views of {}x{})",
        args.out.display(),
        dense_y.num_u(),
        dense_y.num_v(),
        dense_y.height(),
        dense_y.width()
    );
    Ok(())
}

fn parse_grid(s: &str) -> Result<usize> {
    let (a, b) = s
        .split_once('x')
        .with_context(|| format!("grid {s:?} is not of the form NxN"))?;
    let a: usize = a.parse().with_context(|| format!("bad grid {s:?}"))?;
    let b: usize = b.parse().with_context(|| format!("bad grid {s:?}"))?;
    if a != b {
        bail!("only square grids are supported, got {s}");
    }
    Ok(a)
}

#[derive(Args)]
pub struct BtasArgs {
    #[arg(long = "in", value_name = "IN")]
    input: PathBuf,
    /// Checkpoint of the 2x2 -> 3x3 local view network.
    #[arg(long)]
    ckpt: PathBuf,
    /// Input view grid, e.g. 5x5.
    #[arg(long)]
    grid: String,
    /// Output view grid, e.g. 9x9.
    #[arg(long)]
    target: String,
    #[arg(long)]
    out: PathBuf,
}

pub fn btas(args: BtasArgs) -> Result<()> {
    let m = parse_grid(&args.grid)?;
    let t = parse_grid(&args.target)?;
    let model = load_checkpoint(&args.ckpt)?;
    let lvn = ModelLvn::new(&model)?;
    let sched = make_schedule(m, 2, 3, t)?;
    let lf_in = read_scene_y(&args.input)?;
    let out = run_btas(&lf_in, &lvn, &sched)?;
    write_scene(&args.out, &out, None)?;

    let cov = coverage_map(&sched);
    let mut text = String::new();
    for row in cov.outer_iter() {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    fs::write(args.out.join("coverage.txt"), text)?;

    let peak = btas_peak_activation_estimate(&model.config, lf_in.height(), lf_in.width())?;
    println!(
        "wrote {} ({t}x{t} views; {} blocks, per-block activation estimate {:.1} MiB)",
        args.out.display(),
        sched.blocks.len(),
        peak as f64 / (1024.0 * 1024.0)
    );
    Ok(())
}

fn parse_task(s: &str) -> Result<AsrTask> {
    // "2x2-7x7"
    let (i, o) = s
        .split_once('-')
        .with_context(|| format!("task {s:?} is not of the form 2x2-7x7"))?;
    Ok(AsrTask::new(parse_grid(i)?, parse_grid(o)?))
}

fn scene_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    if root.join("scene.meta").exists() {
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into());
        return Ok(vec![(name, root.to_path_buf())]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(root).with_context(|| format!("reading {}", root.display()))? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() && path.join("scene.meta").exists() {
            out.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("{} contains no scene directories", root.display());
    }
    Ok(out)
}

#[derive(Args)]
pub struct EvalArgs {
    /// Reconstructed scene directory, or a directory of them.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth scene directory, or a directory of matching names.
    #[arg(long)]
    gt: PathBuf,
    /// Task descriptor, e.g. 2x2-7x7 (input views are excluded from metrics).
    #[arg(long)]
    task: String,
    /// Also write the report to a file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "unnamed")]
    model_id: String,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let task = parse_task(&args.task)?;
    let preds = scene_dirs(&args.pred)?;
    let single = preds.len() == 1 && preds[0].1 == args.pred;
    let mut scenes = Vec::new();
    for (name, pred_dir) in &preds {
        let gt_dir = if single { args.gt.clone() } else { args.gt.join(name) };
        let pred = read_scene_y(pred_dir)?;
        let gt = read_scene_y(&gt_dir)
            .with_context(|| format!("ground truth for scene {name}"))?;
        scenes.push(evaluate_scene(&pred, &gt, task, name)?);
    }
    let report = MetricReport { task, model_id: args.model_id, scenes };
    let text = report.render_text();
    print!("{text}");
    if let Some(path) = args.out {
        fs::write(&path, text)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct DepthEvalArgs {
    /// Estimated disparity map (grayscale PFM).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth disparity map (grayscale PFM).
    #[arg(long)]
    gt: PathBuf,
    /// Validity mask PNG (nonzero = valid).
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value = "0.1")]
    bp1_tau: f64,
    #[arg(long, default_value = "0.07")]
    bp7_tau: f64,
}

pub fn depth_eval(args: DepthEvalArgs) -> Result<()> {
    let pred_vals = read_pfm(&args.pred)?;
    let gt_vals = read_pfm(&args.gt)?;
    let mask = match &args.mask {
        Some(path) => {
            let img = image::open(path)
                .with_context(|| format!("reading mask {}", path.display()))?
                .to_luma8();
            ndarray::Array2::from_shape_fn(
                (img.height() as usize, img.width() as usize),
                |(r, c)| img.get_pixel(c as u32, r as u32).0[0] != 0,
            )
        }
        None => ndarray::Array2::from_elem(pred_vals.dim(), true),
    };
    let pred = DisparityMap::with_mask(pred_vals, mask.clone())?;
    let gt = DisparityMap::with_mask(gt_vals, mask)?;
    let bp1 = badpix(&pred, &gt, args.bp1_tau)?;
    let bp7 = badpix(&pred, &gt, args.bp7_tau)?;
    let mse = mse100(&pred, &gt)?;
    println!("bp1={bp1:.4} bp7={bp7:.4} mse100={mse:.4}");
    Ok(())
}

#[derive(Args)]
pub struct VisualsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Spatial row/column of the EPI strips (default: center).
    #[arg(long)]
    scanline: Option<usize>,
}

pub fn visuals(args: VisualsArgs) -> Result<()> {
    let pred = read_scene_y(&args.pred)?;
    let gt = read_scene_y(&args.gt)?;
    let files = emit_visuals(&pred, &gt, &args.out, args.scanline)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Gvn,
    Lvn,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Directory of training scene directories.
    #[arg(long)]
    data: PathBuf,
    /// key=value config file (optimizer, schedule, patching, network width).
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn network_from_overrides(
    task: Task,
    overrides: &mut std::collections::BTreeMap<String, String>,
) -> Result<NetworkConfig> {
    let mut net = match task {
        Task::Gvn => NetworkConfig::ddasr(),
        Task::Lvn => NetworkConfig::ddasr_s(),
    };
    if let Some(c) = overrides.remove("channels") {
        net.channels = c.parse().context("bad channels")?;
    }
    if let Some(s) = overrides.remove("stages") {
        net.stage_counts = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().context("bad stages entry"))
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(r) = overrides.remove("attention_reduction") {
        net.attention_reduction = r.parse().context("bad attention_reduction")?;
    }
    if !overrides.is_empty() {
        let keys: Vec<&String> = overrides.keys().collect();
        bail!("unknown config keys: {keys:?}");
    }
    net.validate()?;
    Ok(net)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let (mut cfg, mut overrides) = TrainConfig::from_text(&text)?;
    cfg.task = match args.task {
        TaskArg::Gvn => Task::Gvn,
        TaskArg::Lvn => Task::Lvn,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let net = network_from_overrides(cfg.task, &mut overrides)?;

    let mut scenes = Vec::new();
    for (name, dir) in scene_dirs(&args.data)? {
        scenes.push((name, read_scene_y(&dir)?));
    }
    println!(
        "training {:?}: {} scenes, {} parameters, {} epochs",
        cfg.task,
        scenes.len(),
        param_count(&net)?,
        cfg.epochs
    );
    let set = PatchSet::build(scenes, cfg.task, cfg.patch, cfg.patch_stride)?;
    println!("enumerated {} samples", set.len());

    fs::create_dir_all(&args.out)?;
    let mut model = ModelState::<f32>::init(&net, cfg.seed)?;
    let log = run_training(&mut model, &set, &cfg, Some(&args.out))?;
    save_checkpoint(&model, &args.out.join("latest.ckpt"))?;
    fs::write(args.out.join("train.log"), log.render_lines())?;
    if let Some(last) = log.steps.last() {
        println!(
            "finished at step {} (epoch {}, lr {:e}): loss {:.6}",
            last.step, last.epoch, last.lr, last.loss
        );
    }
    Ok(())
}
