//! Exhaustive block-matching flow on a sparse stride grid.
//!
//! A stand-in for external flow engines. Only the centre pixel of each block
//! receives a vector, which leaves most of the field invalid and exercises
//! the sparse-sample interpolation path.

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::types::{FlowField, GridDims, PixelPos};

/// Single-channel image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    dims: GridDims,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(dims: GridDims, data: Vec<f32>) -> Result<Self> {
        if data.len() != dims.area() {
            return Err(Error::DimsMismatch(format!(
                "{} intensities for a {}x{} grid",
                data.len(),
                dims.width(),
                dims.height()
            )));
        }
        Ok(GrayImage { dims, data })
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(PixelPos) -> f32) -> Self {
        let data = (0..dims.area()).map(|i| f(dims.pos_of(i))).collect();
        GrayImage { dims, data }
    }

    /// Mean of the colour channels of interleaved 8-bit pixels.
    pub fn from_interleaved_u8(dims: GridDims, channels: usize, bytes: &[u8]) -> Result<Self> {
        if channels == 0 || bytes.len() != dims.area() * channels {
            return Err(Error::DimsMismatch(format!(
                "{} bytes for {} channels on a {}x{} grid",
                bytes.len(),
                channels,
                dims.width(),
                dims.height()
            )));
        }
        let data = bytes
            .chunks_exact(channels)
            .map(|px| px.iter().map(|&v| v as f32).sum::<f32>() / (channels as f32 * 255.0))
            .collect();
        Ok(GrayImage { dims, data })
    }

    /// Quantize back to 8 bits.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.dims.width() + x]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockMatchParams {
    /// Odd block side; also the stride between estimated pixels.
    pub block: usize,
    /// Largest displacement searched along each axis.
    pub search: usize,
    /// Minimum intensity variance of a block for its vector to count as valid.
    pub min_texture: f64,
}

impl Default for BlockMatchParams {
    fn default() -> Self {
        BlockMatchParams {
            block: 5,
            search: 8,
            min_texture: 1e-4,
        }
    }
}

impl BlockMatchParams {
    fn validate(&self) -> Result<()> {
        if self.block == 0 || self.block.is_multiple_of(2) {
            return Err(Error::InvalidParam(format!(
                "block size must be odd and positive, got {}",
                self.block
            )));
        }
        if self.min_texture.is_nan() || self.min_texture < 0.0 {
            return Err(Error::InvalidParam(format!(
                "min_texture must be nonnegative, got {}",
                self.min_texture
            )));
        }
        Ok(())
    }
}

pub fn block_match_flow(prev: &GrayImage, next: &GrayImage, params: BlockMatchParams) -> Result<FlowField> {
    block_match_flow_with(prev, next, params, Execution::default())
}

/// Estimate flow from `prev` to `next` at block centres.
///
/// A centre is estimated only if every candidate block within the search
/// range lies inside the image and the source block has positive variance of
/// at least `min_texture`. Among equal costs the shorter displacement wins,
/// then scan order.
pub fn block_match_flow_with(
    prev: &GrayImage,
    next: &GrayImage,
    params: BlockMatchParams,
    exec: Execution,
) -> Result<FlowField> {
    prev.dims.ensure_same(&next.dims)?;
    params.validate()?;
    let dims = prev.dims;
    let half = params.block / 2;
    let reach = half + params.search;
    let (w, h) = (dims.width(), dims.height());

    let centres = |len: usize| -> Vec<usize> {
        (half..len)
            .step_by(params.block)
            .filter(|&c| c >= reach && c + reach < len)
            .collect()
    };
    let xs = centres(w);
    let ys = centres(h);

    let rows = par::map_slice(exec, &ys, |&cy| {
        xs.iter()
            .filter_map(|&cx| match_block(prev, next, cx, cy, half, params))
            .map(|(cx, v)| (PixelPos::new(cx as u32, cy as u32), v))
            .collect::<Vec<_>>()
    });

    let mut flow = FlowField::new(dims, vec![[0.0; 2]; w * h], vec![false; w * h])?;
    for (pos, v) in rows.into_iter().flatten() {
        flow.set(pos, v, true);
    }
    Ok(flow)
}

fn match_block(
    prev: &GrayImage,
    next: &GrayImage,
    cx: usize,
    cy: usize,
    half: usize,
    params: BlockMatchParams,
) -> Option<(usize, [f32; 2])> {
    let n = (params.block * params.block) as f64;
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for y in cy - half..=cy + half {
        for x in cx - half..=cx + half {
            let v = prev.at(x, y) as f64;
            sum += v;
            sum_sq += v * v;
        }
    }
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    if variance <= 0.0 || variance < params.min_texture {
        return None;
    }

    let s = params.search as i64;
    let mut best: Option<(f64, i64, [i64; 2])> = None;
    for dy in -s..=s {
        for dx in -s..=s {
            let mut ssd = 0.0f64;
            for y in cy - half..=cy + half {
                let ty = (y as i64 + dy) as usize;
                for x in cx - half..=cx + half {
                    let tx = (x as i64 + dx) as usize;
                    let d = prev.at(x, y) as f64 - next.at(tx, ty) as f64;
                    ssd += d * d;
                }
            }
            let len = dx.abs() + dy.abs();
            let better = match best {
                None => true,
                Some((b, blen, _)) => ssd < b || (ssd == b && len < blen),
            };
            if better {
                best = Some((ssd, len, [dx, dy]));
            }
        }
    }
    best.map(|(_, _, [dx, dy])| (cx, [dx as f32, dy as f32]))
}
