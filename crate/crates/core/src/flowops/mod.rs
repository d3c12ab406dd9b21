//! From a raw flow field to a dense predicted mask.
//!
//! The canonical path used by the tracker is [`dense_predict`]: select the
//! instance's valid flow samples, interpolate them over the whole mask, move
//! every pixel by its displacement and close the holes left behind.

mod blockmatch;
mod interp;
mod morph;

pub use blockmatch::{block_match_flow, block_match_flow_with, BlockMatchParams, GrayImage};
pub use interp::{interpolate_instance_flow, DenseFlow};
pub use morph::close_mask;

use crate::error::{Error, Result};
use crate::types::{FlowField, GridDims, PixelPos, PixelSet};

/// A track's mask moved into the target frame. May be empty when every
/// pixel left the grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictedMask {
    pub source_track: u64,
    pub frame: u32,
    pub pixels: PixelSet,
}

/// One valid flow vector inside an instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparseFlowSample {
    pub pos: PixelPos,
    pub vec: [f64; 2],
}

/// Flow samples at the pixels of `mask` where `flow` is valid.
///
/// Non-finite vectors are skipped; they cannot be interpolated.
pub fn valid_instance_flow(mask: &PixelSet, flow: &FlowField) -> Result<Vec<SparseFlowSample>> {
    mask.dims().ensure_same(&flow.dims())?;
    Ok(mask
        .iter()
        .filter_map(|pos| {
            let [dx, dy] = flow.get(pos)?;
            (dx.is_finite() && dy.is_finite()).then_some(SparseFlowSample {
                pos,
                vec: [dx as f64, dy as f64],
            })
        })
        .collect())
}

/// Move every pixel of the dense map by its displacement.
///
/// Targets are rounded half away from zero per component; targets off the
/// grid are dropped and coinciding targets collapse.
pub fn predict_mask(dense: &DenseFlow, dims: GridDims) -> PixelSet {
    let mut out = PixelSet::new(dims);
    for (pos, [dx, dy]) in dense.iter() {
        let x = (pos.x as f64 + dx).round();
        let y = (pos.y as f64 + dy).round();
        if x.is_finite() && y.is_finite() {
            out.insert_clipped(x as i64, y as i64);
        }
    }
    out
}

/// Valid samples, interpolation, displacement and closing in one call.
///
/// Fails with [`Error::NoSamples`] when the mask holds no valid flow.
pub fn dense_predict(mask: &PixelSet, flow: &FlowField, radius: usize) -> Result<PixelSet> {
    let samples = valid_instance_flow(mask, flow)?;
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let dense = interpolate_instance_flow(mask, &samples)?;
    let moved = predict_mask(&dense, flow.dims());
    Ok(close_mask(&moved, radius))
}
