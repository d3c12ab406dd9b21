//! Binary closing with a square structuring element.
//!
//! Windows are clipped to the grid: dilation never writes outside it and
//! erosion only inspects in-grid neighbours. With that convention dilation
//! and erosion form an adjunction, so the closing is extensive and
//! idempotent right up to the image border.

use crate::types::{PixelPos, PixelSet};

#[derive(Clone, Copy)]
enum Sweep {
    /// Any cell in the window is set.
    Max,
    /// Every in-range cell in the window is set.
    Min,
}

/// One-dimensional running filter over `len` cells spaced `step` apart.
fn sweep_line(cells: &mut [bool], start: usize, step: usize, len: usize, radius: usize, mode: Sweep, scratch: &mut Vec<u32>) {
    scratch.clear();
    scratch.push(0);
    let mut acc = 0u32;
    for i in 0..len {
        acc += cells[start + i * step] as u32;
        scratch.push(acc);
    }
    for i in 0..len {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(len - 1);
        let set = scratch[hi + 1] - scratch[lo];
        cells[start + i * step] = match mode {
            Sweep::Max => set > 0,
            Sweep::Min => set as usize == hi - lo + 1,
        };
    }
}

fn filter(cells: &mut [bool], w: usize, h: usize, radius: usize, mode: Sweep) {
    let mut scratch = Vec::with_capacity(w.max(h) + 1);
    for y in 0..h {
        sweep_line(cells, y * w, 1, w, radius, mode, &mut scratch);
    }
    for x in 0..w {
        sweep_line(cells, x, w, h, radius, mode, &mut scratch);
    }
}

/// Dilate then erode with a `(2 * radius + 1)` square. Radius 0 is the identity.
pub fn close_mask(pixels: &PixelSet, radius: usize) -> PixelSet {
    let Some(bb) = pixels.bbox() else {
        return pixels.clone();
    };
    if radius == 0 {
        return pixels.clone();
    }
    let dims = pixels.dims();
    // Everything the erosion can look at lies within 2r of the input.
    let margin = 2 * radius;
    let x0 = (bb.left as usize).saturating_sub(margin);
    let y0 = (bb.top as usize).saturating_sub(margin);
    let x1 = (bb.right() as usize - 1 + margin).min(dims.width() - 1);
    let y1 = (bb.bottom() as usize - 1 + margin).min(dims.height() - 1);
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);

    let mut cells = vec![false; w * h];
    for p in pixels.iter() {
        cells[(p.y as usize - y0) * w + (p.x as usize - x0)] = true;
    }
    filter(&mut cells, w, h, radius, Sweep::Max);
    filter(&mut cells, w, h, radius, Sweep::Min);

    let mut out = PixelSet::new(dims);
    for (i, _) in cells.iter().enumerate().filter(|(_, c)| **c) {
        out.insert(PixelPos::new((x0 + i % w) as u32, (y0 + i / w) as u32));
    }
    out
}
