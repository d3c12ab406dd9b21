//! Online tracking loop: predict every live track into the next frame,
//! associate by overlap, propagate identities, spawn new tracks and let
//! unmatched ones coast on their dense prediction until the missed-detection
//! budget runs out.

use serde::{Deserialize, Serialize};

use crate::association::{overlap_matrix, solve_assignment};
use crate::error::{Error, Result};
use crate::flowops::{dense_predict, PredictedMask};
use crate::par::{self, Execution};
use crate::types::{FlowField, InstanceMask, PixelSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Consecutive unmatched frames a track survives.
    pub md: u32,
    /// Radius of the square closing element applied to predictions.
    pub closing_radius: usize,
    /// Predict every track with the identity instead of flow.
    pub zero_flow: bool,
    /// Report coasting tracks in the per-frame output.
    pub emit_coasted: bool,
    /// Detections with fewer pixels are ignored.
    pub min_mask_area: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            md: 1,
            closing_radius: 1,
            zero_flow: false,
            emit_coasted: true,
            min_mask_area: 1,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Track {
    pub id: u64,
    pub mask: PixelSet,
    /// Consecutive frames without a matched detection.
    pub missed: u32,
    pub born: u32,
    pub last_matched: u32,
}

/// Detections of frame `frame` together with the flow from the previous frame.
#[derive(Clone, Debug)]
pub struct FrameInput {
    pub frame: u32,
    pub detections: Vec<InstanceMask>,
    /// Required unless the tracker runs in zero-flow mode.
    pub flow: Option<FlowField>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrackRecord {
    pub id: u64,
    pub mask: PixelSet,
    pub coasted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackEvent {
    Born(u64),
    Died(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameOutput {
    pub frame: u32,
    /// Sorted by track id.
    pub records: Vec<TrackRecord>,
    pub events: Vec<TrackEvent>,
}

#[derive(Clone, Debug)]
pub struct TrackerState {
    tracks: Vec<Track>,
    next_id: u64,
    frame: u32,
    config: TrackerConfig,
}

impl TrackerState {
    /// One track per (large enough) detection of the first frame, ids from 1.
    pub fn init(frame: u32, detections: Vec<InstanceMask>, config: TrackerConfig) -> (Self, FrameOutput) {
        let mut state = TrackerState {
            tracks: Vec::new(),
            next_id: 1,
            frame,
            config,
        };
        let mut out = FrameOutput {
            frame,
            records: Vec::new(),
            events: Vec::new(),
        };
        for det in state.filter(detections) {
            let id = state.spawn(det.into_pixels());
            out.events.push(TrackEvent::Born(id));
        }
        out.records = state
            .tracks
            .iter()
            .map(|t| TrackRecord {
                id: t.id,
                mask: t.mask.clone(),
                coasted: false,
            })
            .collect();
        (state, out)
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    fn filter(&self, detections: Vec<InstanceMask>) -> Vec<InstanceMask> {
        let min = self.config.min_mask_area;
        detections.into_iter().filter(|d| d.area() >= min).collect()
    }

    fn spawn(&mut self, mask: PixelSet) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.tracks.push(Track {
            id,
            mask,
            missed: 0,
            born: self.frame,
            last_matched: self.frame,
        });
        id
    }

    /// Predict each live track into the next frame. `None` marks a track
    /// without any valid flow sample.
    pub fn predict(&self, frame: u32, flow: Option<&FlowField>) -> Result<Vec<Option<PredictedMask>>> {
        let cfg = &self.config;
        let flow = match (cfg.zero_flow, flow) {
            (true, _) => None,
            (false, Some(f)) => Some(f),
            (false, None) => {
                return Err(Error::InvalidParam(format!(
                    "frame {frame}: flow is required unless zero_flow is set"
                )))
            }
        };
        if let Some(f) = flow {
            for t in &self.tracks {
                t.mask.dims().ensure_same(&f.dims())?;
            }
        }
        let predicted = par::map_slice(cfg.execution, &self.tracks, |t| {
            let pixels = match flow {
                None => Ok(t.mask.clone()),
                Some(f) => dense_predict(&t.mask, f, cfg.closing_radius),
            };
            match pixels {
                Ok(pixels) => Ok(Some(PredictedMask {
                    source_track: t.id,
                    frame,
                    pixels,
                })),
                Err(Error::NoSamples) => Ok(None),
                Err(e) => Err(e),
            }
        });
        predicted.into_iter().collect()
    }

    /// Advance by one frame.
    pub fn step(&mut self, input: FrameInput) -> Result<FrameOutput> {
        let expected = self.frame + 1;
        if input.frame != expected {
            return Err(Error::FrameOrderViolation {
                expected,
                got: input.frame,
            });
        }
        let detections = self.filter(input.detections);
        if let Some(first) = detections.first() {
            let dims = first.dims();
            for d in &detections {
                dims.ensure_same(&d.dims())?;
            }
            if let Some(t) = self.tracks.first() {
                dims.ensure_same(&t.mask.dims())?;
            }
        }
        let predictions = self.predict(input.frame, input.flow.as_ref())?;

        let empty = self.tracks.first().map(|t| PixelSet::new(t.mask.dims()));
        let rows: Vec<&PixelSet> = predictions
            .iter()
            .map(|p| match p {
                Some(p) => &p.pixels,
                None => empty.as_ref().expect("predictions exist only for live tracks"),
            })
            .collect();
        let cols: Vec<&PixelSet> = detections.iter().map(|d| d.pixels()).collect();
        let affinity = overlap_matrix(&rows, &cols, self.config.execution)?;
        let matching = solve_assignment(&affinity);

        self.frame = input.frame;
        let mut events = Vec::new();
        let mut records = Vec::new();
        let mut det_slots: Vec<Option<InstanceMask>> = detections.into_iter().map(Some).collect();
        let mut match_of = vec![None; self.tracks.len()];
        for &(r, c) in &matching.pairs {
            match_of[r] = Some(c);
        }

        let md = self.config.md;
        let emit_coasted = self.config.emit_coasted;
        let old = std::mem::take(&mut self.tracks);
        for ((mut track, prediction), matched) in old.into_iter().zip(predictions).zip(match_of) {
            if let Some(c) = matched {
                let det = det_slots[c].take().expect("each detection matches once");
                track.mask = det.into_pixels();
                track.missed = 0;
                track.last_matched = input.frame;
                records.push(TrackRecord {
                    id: track.id,
                    mask: track.mask.clone(),
                    coasted: false,
                });
                self.tracks.push(track);
                continue;
            }
            track.missed += 1;
            if track.missed > md {
                events.push(TrackEvent::Died(track.id));
                continue;
            }
            match prediction {
                // Nothing of the prediction is left inside the frame.
                Some(p) if p.pixels.is_empty() => {
                    events.push(TrackEvent::Died(track.id));
                    continue;
                }
                Some(p) => track.mask = p.pixels,
                None => {}
            }
            if emit_coasted {
                records.push(TrackRecord {
                    id: track.id,
                    mask: track.mask.clone(),
                    coasted: true,
                });
            }
            self.tracks.push(track);
        }

        for det in det_slots.into_iter().flatten() {
            let id = self.spawn(det.into_pixels());
            events.push(TrackEvent::Born(id));
            records.push(TrackRecord {
                id,
                mask: self.tracks.last().expect("just spawned").mask.clone(),
                coasted: false,
            });
        }
        records.sort_by_key(|r| r.id);

        Ok(FrameOutput {
            frame: input.frame,
            records,
            events,
        })
    }
}

/// Initialise on the first frame and step through the rest.
pub fn run<I>(first_frame: u32, first_detections: Vec<InstanceMask>, sequence: I, config: TrackerConfig) -> Result<Vec<FrameOutput>>
where
    I: IntoIterator<Item = FrameInput>,
{
    let (mut state, first) = TrackerState::init(first_frame, first_detections, config);
    let mut outputs = vec![first];
    for input in sequence {
        outputs.push(state.step(input)?);
    }
    Ok(outputs)
}
