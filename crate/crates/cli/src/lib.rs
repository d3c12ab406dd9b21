//! Command-line front end: track, evaluate, synthesize, estimate flow and
//! render overlays.
//!
//! Frame files are numbered from `000001`. The flow file numbered `t`
//! describes motion from frame `t` to frame `t + 1`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};
use image::{Rgb, RgbImage};
use instflow::flowops::{block_match_flow_with, BlockMatchParams, GrayImage};
use instflow::io::{self, LabelMap};
use instflow::metrics::{evaluate, BoxF, ClearMotReport, EvalOptions, MotEntry};
use instflow::synth::{self, SceneSpec};
use instflow::{bbox_of, Error, Execution, FlowField, FrameInput, Result, TrackerConfig, TrackerState};
use log::info;
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "instflow", version, about = "Instance-flow multi-object tracking")]
pub struct Cli {
    /// Only report warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Track instances through a directory of label maps.
    Track(TrackArgs),
    /// Score a MOT result file against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Estimate block-matching flow between consecutive images.
    Flow(FlowArgs),
    /// Draw tracks over the frames.
    Render(RenderArgs),
}

/// Flags of `track`. Every flag can also be given in a TOML config file;
/// flags on the command line win.
#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrackArgs {
    /// Directory of per-frame label maps (PNG or PGM).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Directory of `.flo` files; file `t` maps frame `t` to `t + 1`.
    #[arg(long)]
    pub flow: Option<PathBuf>,
    /// Directory of frames to estimate flow from by block matching.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Predict every track in place (ablation).
    #[arg(long)]
    pub zero_flow: bool,
    /// Consecutive missed detections a track survives [default: 1].
    #[arg(long)]
    pub md: Option<u32>,
    /// Radius of the square closing element [default: 1].
    #[arg(long)]
    pub closing_radius: Option<usize>,
    /// Report coasting tracks [default: true].
    #[arg(long, action = ArgAction::Set)]
    pub emit_coasted: Option<bool>,
    /// Drop detections with fewer pixels [default: 1].
    #[arg(long)]
    pub min_mask_area: Option<usize>,
    /// Block side for flow estimation [default: 5].
    #[arg(long)]
    pub block: Option<usize>,
    /// Search radius for flow estimation [default: 8].
    #[arg(long)]
    pub search: Option<usize>,
    /// Minimum block variance for a valid vector [default: 1e-4].
    #[arg(long)]
    pub min_texture: Option<f64>,
    /// Output MOT file.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// TOML file with any of the flags above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Run every stage on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Ground-truth MOT file.
    pub gt: PathBuf,
    /// Result MOT file.
    pub result: PathBuf,
    /// Minimum box IoU for a match.
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// Frame rate used for the reported duration.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// TOML scene description; the driving-platform proxy scene when absent.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Disable the proxy scene's camera shake.
    #[arg(long, conflicts_with = "spec")]
    pub no_shake: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    /// Directory of numbered frames.
    pub images: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub block: usize,
    #[arg(long, default_value_t = 8)]
    pub search: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub min_texture: f64,
    /// Output directory for `.flo` files.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug, Clone)]
pub struct RenderArgs {
    /// Directory of per-frame label maps.
    #[arg(long)]
    pub masks: PathBuf,
    /// MOT result file.
    #[arg(long)]
    pub result: PathBuf,
    /// Directory of frames used as background.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output directory for PNG overlays.
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Where the tracker gets motion from.
#[derive(Clone, Debug, PartialEq)]
pub enum Motion {
    Flow(PathBuf),
    Images(PathBuf),
    Zero,
}

/// Fully resolved `track` settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mask_dir: PathBuf,
    pub motion: Motion,
    pub output: PathBuf,
    pub tracker: TrackerConfig,
    pub block: BlockMatchParams,
}

impl RunConfig {
    /// Merge command-line flags over the optional config file and defaults.
    pub fn resolve(args: &TrackArgs) -> Result<RunConfig> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
                let mut parsed: TrackArgs = toml::from_str(&text)
                    .map_err(|e| Error::InvalidParam(format!("{}: {e}", path.display())))?;
                // paths in a config file are relative to the file
                let base = path.parent().unwrap_or(Path::new(""));
                for p in [&mut parsed.masks, &mut parsed.flow, &mut parsed.images, &mut parsed.output]
                    .into_iter()
                    .flatten()
                {
                    *p = base.join(&*p);
                }
                parsed
            }
            None => TrackArgs::default(),
        };
        let pick = |a: &Option<PathBuf>, b: &Option<PathBuf>| a.clone().or_else(|| b.clone());
        let mask_dir = pick(&args.masks, &file.masks)
            .ok_or_else(|| Error::InvalidParam("--masks is required".into()))?;
        let output = pick(&args.output, &file.output)
            .ok_or_else(|| Error::InvalidParam("--output is required".into()))?;
        let flow = pick(&args.flow, &file.flow);
        let images = pick(&args.images, &file.images);
        let zero = args.zero_flow || file.zero_flow;
        let motion = match (flow, images, zero) {
            (Some(f), None, false) => Motion::Flow(f),
            (None, Some(i), false) => Motion::Images(i),
            (None, None, true) => Motion::Zero,
            _ => {
                return Err(Error::InvalidParam(
                    "give exactly one of --flow, --images or --zero-flow".into(),
                ))
            }
        };
        let defaults = TrackerConfig::default();
        let execution = if args.sequential || file.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        let tracker = TrackerConfig {
            md: args.md.or(file.md).unwrap_or(defaults.md),
            closing_radius: args.closing_radius.or(file.closing_radius).unwrap_or(defaults.closing_radius),
            zero_flow: zero,
            emit_coasted: args.emit_coasted.or(file.emit_coasted).unwrap_or(defaults.emit_coasted),
            min_mask_area: args.min_mask_area.or(file.min_mask_area).unwrap_or(defaults.min_mask_area),
            execution,
        };
        let bm = BlockMatchParams::default();
        let block = BlockMatchParams {
            block: args.block.or(file.block).unwrap_or(bm.block),
            search: args.search.or(file.search).unwrap_or(bm.search),
            min_texture: args.min_texture.or(file.min_texture).unwrap_or(bm.min_texture),
        };
        Ok(RunConfig {
            mask_dir,
            motion,
            output,
            tracker,
            block,
        })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track(args) => cmd_track(&RunConfig::resolve(&args)?),
        Command::Eval(args) => {
            let report = cmd_eval(&args.gt, &args.result, args.iou, args.fps)?;
            println!("{report}\n");
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
        Command::Synth(args) => {
            let spec = match &args.spec {
                Some(path) => load_scene_spec(path)?,
                None => synth::kitti13_proxy_with(args.seed, !args.no_shake),
            };
            cmd_synth(&spec, args.seed, &args.out)
        }
        Command::Flow(args) => {
            let params = BlockMatchParams {
                block: args.block,
                search: args.search,
                min_texture: args.min_texture,
            };
            let exec = if args.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            cmd_flow(&args.images, params, exec, &args.out)
        }
        Command::Render(args) => cmd_render(&args.masks, &args.result, args.images.as_deref(), &args.out),
    }
}

/// Label-map files of a directory; PNG preferred over PGM.
fn mask_files(dir: &Path) -> Result<Vec<(u32, PathBuf)>> {
    let mut files = io::list_frame_files(dir, "png")?;
    if files.is_empty() {
        files = io::list_frame_files(dir, "pgm")?;
    }
    if files.is_empty() {
        return Err(Error::InvalidParam(format!("no label maps in {}", dir.display())));
    }
    for pair in files.windows(2) {
        if pair[1].0 != pair[0].0 + 1 {
            return Err(Error::FrameOrderViolation {
                expected: pair[0].0 + 1,
                got: pair[1].0,
            });
        }
    }
    Ok(files)
}

fn image_path(dir: &Path, number: u32) -> Result<PathBuf> {
    for ext in ["png", "pgm", "ppm", "jpg"] {
        let p = dir.join(io::frame_file_name(number, ext));
        if p.exists() {
            return Ok(p);
        }
    }
    let missing = dir.join(io::frame_file_name(number, "png"));
    Err(Error::from(std::io::Error::new(std::io::ErrorKind::NotFound, "image not found")).at(missing))
}

/// Run the tracker over a label-map directory and write the MOT file.
pub fn cmd_track(config: &RunConfig) -> Result<()> {
    let files = mask_files(&config.mask_dir)?;
    let first_number = files[0].0;
    let load = |(number, path): &(u32, PathBuf)| -> Result<Vec<instflow::InstanceMask>> {
        let map = io::read_label_map(path)?;
        Ok(io::extract_instances(&map, number - first_number, 1))
    };
    let mut previous_image: Option<GrayImage> = None;
    if let Motion::Images(dir) = &config.motion {
        previous_image = Some(io::read_gray_image(image_path(dir, first_number)?)?);
    }

    let (mut state, first) = TrackerState::init(0, load(&files[0])?, config.tracker.clone());
    info!("frame {first_number}: {} tracks", state.tracks().len());
    let mut outputs = vec![first];
    for entry in &files[1..] {
        let (number, _) = entry;
        let flow: Option<FlowField> = match &config.motion {
            Motion::Zero => None,
            Motion::Flow(dir) => Some(io::read_flo(dir.join(io::frame_file_name(number - 1, "flo")))?),
            Motion::Images(dir) => {
                let next = io::read_gray_image(image_path(dir, *number)?)?;
                let prev = previous_image.replace(next.clone()).expect("loaded before the loop");
                Some(block_match_flow_with(&prev, &next, config.block, config.tracker.execution)?)
            }
        };
        let out = state.step(FrameInput {
            frame: number - first_number,
            detections: load(entry)?,
            flow,
        })?;
        info!(
            "frame {number}: {} tracks, {} reported",
            state.tracks().len(),
            out.records.len()
        );
        outputs.push(out);
    }
    if let Some(parent) = config.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::from(e).at(parent))?;
    }
    // frame numbers in the file follow the mask file numbering
    let offset = first_number - 1;
    let mut entries = io::output_entries(&outputs);
    for e in &mut entries {
        e.frame += offset;
    }
    io::write_mot_entries(&entries, &config.output)
}

pub fn cmd_eval(gt: &Path, result: &Path, iou: f64, fps: f64) -> Result<ClearMotReport> {
    let gt = io::read_mot(gt)?;
    let hyp = io::read_mot(result)?;
    evaluate(&gt, &hyp, EvalOptions { iou_threshold: iou, fps })
}

pub fn load_scene_spec(path: &Path) -> Result<SceneSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
    toml::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
}

pub fn cmd_synth(spec: &SceneSpec, seed: u64, out: &Path) -> Result<()> {
    let scene = synth::generate(spec, seed)?;
    scene.write_dataset(out)?;
    info!(
        "wrote {} frames and {} ground-truth rows to {}",
        scene.label_maps.len(),
        scene.ground_truth.len(),
        out.display()
    );
    Ok(())
}

/// Write one `.flo` per consecutive pair, numbered by the earlier frame.
pub fn cmd_flow(images: &Path, params: BlockMatchParams, exec: Execution, out: &Path) -> Result<()> {
    let mut files = Vec::new();
    for ext in ["png", "pgm", "ppm", "jpg"] {
        files.extend(io::list_frame_files(images, ext)?);
    }
    files.sort();
    if files.len() < 2 {
        return Err(Error::InvalidParam(format!("{} needs at least two frames", images.display())));
    }
    fs::create_dir_all(out).map_err(|e| Error::from(e).at(out))?;
    let mut prev = io::read_gray_image(&files[0].1)?;
    for pair in files.windows(2) {
        let next = io::read_gray_image(&pair[1].1)?;
        let flow = block_match_flow_with(&prev, &next, params, exec)?;
        info!("frame {}: {} valid vectors", pair[0].0, flow.valid_count());
        io::write_flo(&flow, out.join(io::frame_file_name(pair[0].0, "flo")))?;
        prev = next;
    }
    Ok(())
}

/// Deterministic, well-separated colour for a track id.
pub fn track_color(id: u64) -> [u8; 3] {
    let hue = (id as f64 * 0.618_033_988_749_895).fract();
    let h = hue * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

fn draw_outline(img: &mut RgbImage, b: &BoxF, color: [u8; 3]) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let (x0, y0) = (b.left as i64 - 1, b.top as i64 - 1);
    let (x1, y1) = (x0 + b.width as i64 - 1, y0 + b.height as i64 - 1);
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            img.put_pixel(x as u32, y as u32, Rgb(color));
        }
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

/// Colour each detected instance by the result track whose box overlaps it
/// best and outline coasted boxes; one PNG per frame.
pub fn cmd_render(masks: &Path, result: &Path, images: Option<&Path>, out: &Path) -> Result<()> {
    let files = mask_files(masks)?;
    let entries = io::read_mot(result)?;
    fs::create_dir_all(out).map_err(|e| Error::from(e).at(out))?;
    for (number, path) in &files {
        let map: LabelMap = io::read_label_map(path)?;
        let dims = map.dims();
        let background = match images {
            Some(dir) => Some(io::read_gray_image(image_path(dir, *number)?)?),
            None => None,
        };
        let mut img = RgbImage::from_fn(dims.width() as u32, dims.height() as u32, |x, y| {
            let v = background
                .as_ref()
                .map_or(0, |g| (g.at(x as usize, y as usize).clamp(0.0, 1.0) * 255.0).round() as u8);
            Rgb([v, v, v])
        });
        let rows: Vec<&MotEntry> = entries.iter().filter(|e| e.frame == *number).collect();
        for mask in io::extract_instances(&map, *number - 1, 1) {
            let b = BoxF::from(bbox_of(&mask));
            let b = BoxF {
                left: b.left + 1.0,
                top: b.top + 1.0,
                ..b
            };
            let best = rows
                .iter()
                .map(|e| (e.bbox.iou(&b), e.id))
                .filter(|(iou, _)| *iou > 0.0)
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
            let Some((_, id)) = best else { continue };
            let c = track_color(id);
            for p in mask.pixels().iter() {
                let px = img.get_pixel_mut(p.x, p.y);
                for (channel, tint) in px.0.iter_mut().zip(c) {
                    *channel = ((*channel as u16 + tint as u16) / 2) as u8;
                }
            }
        }
        for e in rows.iter().filter(|e| e.conf < 1.0) {
            draw_outline(&mut img, &e.bbox, track_color(e.id));
        }
        let target = out.join(io::frame_file_name(*number, "png"));
        img.save(&target).map_err(|e| Error::from(e).at(&target))?;
    }
    Ok(())
}
