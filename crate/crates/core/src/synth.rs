//! Synthetic scenes with exact label maps, flow, intensity images and
//! ground truth.
//!
//! Objects translate by whole pixels. Later objects occlude earlier ones in
//! the label maps while ground truth keeps every object's full extent.
//! Objects listed in `hidden` frames still appear in the images and the
//! ground truth but are missing from the label map, which simulates a
//! detector dropout.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowops::GrayImage;
use crate::io::{self, LabelMap};
use crate::metrics::{BoxF, MotEntry};
use crate::par::{self, Execution};
use crate::tracker::FrameInput;
use crate::types::{FlowField, GridDims, InstanceMask, PixelPos};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rect { width: u32, height: u32 },
    Disk { radius: u32 },
}

impl Shape {
    fn extent(&self) -> (u32, u32) {
        match *self {
            Shape::Rect { width, height } => (width, height),
            Shape::Disk { radius } => (2 * radius + 1, 2 * radius + 1),
        }
    }

    fn covers(&self, lx: u32, ly: u32) -> bool {
        match *self {
            Shape::Rect { .. } => true,
            Shape::Disk { radius } => {
                let (dx, dy) = (lx as i64 - radius as i64, ly as i64 - radius as i64);
                dx * dx + dy * dy <= (radius as i64).pow(2)
            }
        }
    }

    /// Largest side of the bounding box.
    pub fn size(&self) -> u32 {
        let (w, h) = self.extent();
        w.max(h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// Top-left corner of the shape's box at frame 0, before camera motion.
    #[serde(default)]
    pub start: [i32; 2],
    /// Per-frame displacement.
    #[serde(default)]
    pub velocity: [i32; 2],
    /// Explicit per-frame corners; overrides `start` and `velocity`.
    #[serde(default)]
    pub waypoints: Option<Vec<[i32; 2]>>,
    #[serde(default)]
    pub appear: u32,
    /// First frame the object is gone; alive until the end when absent.
    #[serde(default)]
    pub disappear: Option<u32>,
    /// Frames whose label map omits the object.
    #[serde(default)]
    pub hidden: Vec<u32>,
    #[serde(default)]
    pub texture_seed: u64,
}

impl ObjectSpec {
    pub fn rect(width: u32, height: u32, start: [i32; 2], velocity: [i32; 2]) -> Self {
        ObjectSpec {
            shape: Shape::Rect { width, height },
            start,
            velocity,
            waypoints: None,
            appear: 0,
            disappear: None,
            hidden: Vec::new(),
            texture_seed: 0,
        }
    }

    fn alive(&self, t: u32) -> bool {
        t >= self.appear && self.disappear.is_none_or(|d| t < d)
    }

    fn own_position(&self, t: u32) -> [i64; 2] {
        match &self.waypoints {
            Some(w) => {
                let p = w[(t as usize).min(w.len() - 1)];
                [p[0] as i64, p[1] as i64]
            }
            None => [
                self.start[0] as i64 + self.velocity[0] as i64 * t as i64,
                self.start[1] as i64 + self.velocity[1] as i64 * t as i64,
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub dims: GridDims,
    pub frames: u32,
    pub objects: Vec<ObjectSpec>,
    /// `camera[t]` is the global image displacement from frame `t` to `t + 1`.
    #[serde(default)]
    pub camera: Vec<[i32; 2]>,
    /// Standard deviation of the Gaussian flow noise, in pixels.
    #[serde(default)]
    pub noise: f64,
    /// Fraction of each object's pixels given valid flow.
    #[serde(default = "full_validity")]
    pub flow_validity: f64,
}

fn full_validity() -> f64 {
    1.0
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::Spec("a scene needs at least one frame".into()));
        }
        if !(self.flow_validity > 0.0 && self.flow_validity <= 1.0) {
            return Err(Error::Spec(format!(
                "flow_validity must lie in (0, 1], got {}",
                self.flow_validity
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Spec(format!("noise must be finite and nonnegative, got {}", self.noise)));
        }
        if self.objects.len() >= u16::MAX as usize {
            return Err(Error::Spec("too many objects for 16-bit labels".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            let (w, h) = o.shape.extent();
            if w == 0 || h == 0 {
                return Err(Error::Spec(format!("object {i} has an empty shape")));
            }
            if o.waypoints.as_ref().is_some_and(|w| w.is_empty()) {
                return Err(Error::Spec(format!("object {i} has an empty waypoint list")));
            }
            if o.disappear.is_some_and(|d| d <= o.appear) {
                return Err(Error::Spec(format!("object {i} disappears before it appears")));
            }
        }
        Ok(())
    }

    fn camera_offset(&self, t: u32) -> [i64; 2] {
        self.camera
            .iter()
            .take(t as usize)
            .fold([0, 0], |acc, s| [acc[0] + s[0] as i64, acc[1] + s[1] as i64])
    }

    /// Top-left corner of object `i` in frame `t`, camera motion included.
    pub fn position(&self, i: usize, t: u32) -> [i64; 2] {
        let own = self.objects[i].own_position(t);
        let cam = self.camera_offset(t);
        [own[0] + cam[0], own[1] + cam[1]]
    }

    /// Largest camera displacement magnitude (Chebyshev) from frame `t` to `t + 1`.
    pub fn camera_shift(&self, t: u32) -> u32 {
        self.camera
            .get(t as usize)
            .map_or(0, |s| s[0].unsigned_abs().max(s[1].unsigned_abs()))
    }
}

/// Everything generated for one scene. Ground truth uses MOT file
/// conventions: one-based frames and corners.
#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub dims: GridDims,
    pub label_maps: Vec<LabelMap>,
    /// `flows[t]` maps frame `t` to `t + 1`.
    pub flows: Vec<FlowField>,
    pub images: Vec<GrayImage>,
    pub ground_truth: Vec<MotEntry>,
}

impl SyntheticScene {
    pub fn detections(&self, t: u32) -> Vec<InstanceMask> {
        io::extract_instances(&self.label_maps[t as usize], t, 1)
    }

    /// First-frame detections and the per-frame tracker inputs after it.
    pub fn tracker_inputs(&self) -> (Vec<InstanceMask>, Vec<FrameInput>) {
        let inputs = (1..self.label_maps.len() as u32)
            .map(|t| FrameInput {
                frame: t,
                detections: self.detections(t),
                flow: Some(self.flows[t as usize - 1].clone()),
            })
            .collect();
        (self.detections(0), inputs)
    }

    /// Lay the scene out as `masks/`, `flow/`, `images/` and `gt/gt.txt`.
    pub fn write_dataset(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let sub = |name: &str| -> Result<std::path::PathBuf> {
            let p = dir.join(name);
            std::fs::create_dir_all(&p).map_err(|e| Error::from(e).at(&p))?;
            Ok(p)
        };
        let (masks, flow, images, gt) = (sub("masks")?, sub("flow")?, sub("images")?, sub("gt")?);
        for (t, map) in self.label_maps.iter().enumerate() {
            io::write_label_map(map, masks.join(io::frame_file_name(t as u32 + 1, "png")))?;
        }
        for (t, f) in self.flows.iter().enumerate() {
            io::write_flo(f, flow.join(io::frame_file_name(t as u32 + 1, "flo")))?;
        }
        for (t, img) in self.images.iter().enumerate() {
            io::write_gray_image(img, images.join(io::frame_file_name(t as u32 + 1, "png")))?;
        }
        io::write_mot_entries(&self.ground_truth, gt.join("gt.txt"))
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn texture(seed: u64, x: i64, y: i64) -> f32 {
    let h = mix(seed ^ mix(x as u64 ^ mix(y as u64)));
    (h & 0xff) as f32 / 255.0
}

fn truncated_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= 3.0 * sigma {
            return v;
        }
    }
}

/// Render every frame of `spec`.
pub fn generate(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let dims = spec.dims;
    let background_seed = mix(seed ^ 0x5eed);
    let n = spec.objects.len();

    // visible[t][pixel] = topmost object in the image; labelled excludes hidden ones
    let mut visible: Vec<Vec<Option<usize>>> = Vec::with_capacity(spec.frames as usize);
    let mut label_maps = Vec::with_capacity(spec.frames as usize);
    let mut images = Vec::with_capacity(spec.frames as usize);
    let mut ground_truth = Vec::new();

    for t in 0..spec.frames {
        let mut owner = vec![None; dims.area()];
        let mut labels = vec![0u16; dims.area()];
        let mut img: Vec<f32> = (0..dims.area())
            .map(|i| {
                let p = dims.pos_of(i);
                texture(background_seed, p.x as i64, p.y as i64)
            })
            .collect();
        for (i, obj) in spec.objects.iter().enumerate() {
            if !obj.alive(t) {
                continue;
            }
            let [px, py] = spec.position(i, t);
            let (w, h) = obj.shape.extent();
            let hidden = obj.hidden.contains(&t);
            let obj_seed = mix(obj.texture_seed ^ mix(seed) ^ i as u64);
            let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
            for ly in 0..h {
                for lx in 0..w {
                    if !obj.shape.covers(lx, ly) {
                        continue;
                    }
                    let (gx, gy) = (px + lx as i64, py + ly as i64);
                    if !dims.contains(gx, gy) {
                        continue;
                    }
                    let k = dims.index(PixelPos::new(gx as u32, gy as u32));
                    owner[k] = Some(i);
                    img[k] = texture(obj_seed, lx as i64, ly as i64);
                    if !hidden {
                        labels[k] = i as u16 + 1;
                    }
                    x0 = x0.min(gx);
                    y0 = y0.min(gy);
                    x1 = x1.max(gx);
                    y1 = y1.max(gy);
                }
            }
            if x0 <= x1 {
                ground_truth.push(MotEntry {
                    frame: t + 1,
                    id: i as u64 + 1,
                    bbox: BoxF {
                        left: (x0 + 1) as f64,
                        top: (y0 + 1) as f64,
                        width: (x1 - x0 + 1) as f64,
                        height: (y1 - y0 + 1) as f64,
                    },
                    conf: 1.0,
                });
            }
        }
        // a label can be shadowed by a hidden object drawn on top of it
        for (k, o) in owner.iter().enumerate() {
            if let Some(i) = o {
                if spec.objects[*i].hidden.contains(&t) {
                    labels[k] = 0;
                }
            }
        }
        visible.push(owner);
        label_maps.push(LabelMap::new(dims, labels)?);
        images.push(GrayImage::new(dims, img)?);
    }

    // every frame draws from its own stream, so frames are independent
    let flows = par::map_range(Execution::default(), spec.frames.saturating_sub(1) as usize, |t| {
        let t = t as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64 + 1);
        let motion: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let (a, b) = (spec.position(i, t), spec.position(i, t + 1));
                [(b[0] - a[0]) as f64, (b[1] - a[1]) as f64]
            })
            .collect();
        let mut vectors = vec![[0.0f32; 2]; dims.area()];
        let mut valid = vec![true; dims.area()];
        let mut per_object: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, o) in visible[t as usize].iter().enumerate() {
            if let Some(i) = *o {
                per_object[i].push(k);
            }
        }
        for (i, pixels) in per_object.iter().enumerate() {
            let mut any_valid = false;
            for &k in pixels {
                let v = [
                    motion[i][0] + truncated_normal(&mut rng, spec.noise),
                    motion[i][1] + truncated_normal(&mut rng, spec.noise),
                ];
                vectors[k] = [v[0] as f32, v[1] as f32];
                let keep = spec.flow_validity >= 1.0 || rng.random_bool(spec.flow_validity);
                valid[k] = keep;
                any_valid |= keep;
            }
            if !any_valid && !pixels.is_empty() {
                valid[pixels[rng.random_range(0..pixels.len())]] = true;
            }
        }
        FlowField::new(dims, vectors, valid)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticScene {
        dims,
        label_maps,
        flows,
        images,
        ground_truth,
    })
}

/// Driving-platform stand-in: a handful of small pedestrians seen from a
/// shaking camera with two horizontal pans and two vertical jolts of +8
/// pixels, each at least as large as any object.
pub fn kitti13_proxy(seed: u64) -> SceneSpec {
    kitti13_proxy_with(seed, true)
}

/// Frames (as `t`, moving to `t + 1`) at which the proxy camera jolts.
pub const KITTI13_JOLT_FRAMES: [u32; 2] = [6, 14];
/// Frames at which the proxy camera pans horizontally.
pub const KITTI13_PAN_FRAMES: [u32; 2] = [3, 10];

/// The proxy scene, optionally without any camera motion.
pub fn kitti13_proxy_with(seed: u64, shake: bool) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = || [rng.random_range(-3..=3), rng.random_range(-3..=3)];
    let frames = 20u32;
    let mut object = |shape: Shape, start: [i32; 2], velocity: [i32; 2], tex: u64| {
        let j = jitter();
        ObjectSpec {
            shape,
            start: [start[0] + j[0], start[1] + j[1]],
            velocity,
            waypoints: None,
            appear: 0,
            disappear: None,
            hidden: Vec::new(),
            texture_seed: seed ^ tex,
        }
    };
    let objects = vec![
        object(Shape::Rect { width: 5, height: 7 }, [40, 20], [1, 0], 1),
        object(Shape::Rect { width: 6, height: 7 }, [125, 34], [-1, 0], 2),
        object(Shape::Disk { radius: 3 }, [70, 48], [2, 0], 3),
        object(Shape::Rect { width: 4, height: 6 }, [100, 60], [-1, 0], 4),
    ];
    let mut camera = vec![[0, 0]; frames as usize - 1];
    if shake {
        for t in KITTI13_PAN_FRAMES {
            camera[t as usize] = [-10, 0];
        }
        for t in KITTI13_JOLT_FRAMES {
            camera[t as usize] = [0, 8];
        }
    }
    SceneSpec {
        dims: GridDims::new(160, 100).expect("nonzero"),
        frames,
        objects,
        camera,
        noise: 0.2,
        flow_validity: 0.6,
    }
}
