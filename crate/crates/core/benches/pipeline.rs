use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use instflow::association::affinity_with;
use instflow::flowops::{block_match_flow_with, BlockMatchParams, GrayImage, PredictedMask};
use instflow::synth::{generate, ObjectSpec, SceneSpec};
use instflow::{Execution, GridDims, PixelPos, TrackerConfig, TrackerState};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn textured(dims: GridDims, shift: (i64, i64)) -> GrayImage {
    GrayImage::from_fn(dims, |p: PixelPos| {
        let (x, y) = (p.x as i64 - shift.0, p.y as i64 - shift.1);
        (((x * 7919) ^ (y * 104_729)).rem_euclid(251)) as f32 / 250.0
    })
}

fn crowd(objects: i32, frames: u32) -> SceneSpec {
    SceneSpec {
        dims: GridDims::new(320, 240).unwrap(),
        frames,
        objects: (0..objects)
            .map(|i| ObjectSpec::rect(12, 20, [10 + (i % 10) * 30, 10 + (i / 10) * 45], [2, 1]))
            .collect(),
        camera: vec![],
        noise: 0.3,
        flow_validity: 0.5,
    }
}

fn block_matching(c: &mut Criterion) {
    let dims = GridDims::new(320, 240).unwrap();
    let (prev, next) = (textured(dims, (0, 0)), textured(dims, (3, -2)));
    let params = BlockMatchParams::default();
    let mut group = c.benchmark_group("block_match_320x240");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| block_match_flow_with(black_box(&prev), black_box(&next), params, exec).unwrap())
        });
    }
    group.finish();
}

fn affinity(c: &mut Criterion) {
    let scene = generate(&crowd(40, 2), 1).unwrap();
    let dets = scene.detections(1);
    let preds: Vec<PredictedMask> = scene
        .detections(0)
        .into_iter()
        .map(|m| PredictedMask {
            source_track: m.instance as u64,
            frame: 1,
            pixels: m.into_pixels(),
        })
        .collect();
    let mut group = c.benchmark_group("affinity_40x40");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| affinity_with(black_box(&preds), black_box(&dets), exec).unwrap()));
    }
    group.finish();
}

fn tracking(c: &mut Criterion) {
    let mut group = c.benchmark_group("tracker_10_frames");
    group.sample_size(20);
    for objects in [10, 40] {
        let scene = generate(&crowd(objects, 10), 2).unwrap();
        let (first, inputs) = scene.tracker_inputs();
        for (name, exec) in MODES {
            let config = TrackerConfig {
                execution: exec,
                ..TrackerConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(name, objects), &objects, |b, _| {
                b.iter(|| {
                    let (mut state, _) = TrackerState::init(0, first.clone(), config.clone());
                    for input in inputs.iter().cloned() {
                        black_box(state.step(input).unwrap());
                    }
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, block_matching, affinity, tracking);
criterion_main!(benches);
