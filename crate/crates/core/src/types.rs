//! Pixel grids, bitmap pixel sets, instance masks and flow fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width and height of an image grid in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct GridDims {
    width: usize,
    height: usize,
}

#[derive(Deserialize)]
struct RawDims {
    width: usize,
    height: usize,
}

impl TryFrom<RawDims> for GridDims {
    type Error = Error;

    fn try_from(raw: RawDims) -> Result<Self> {
        GridDims::new(raw.width, raw.height)
    }
}

impl GridDims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDims { width, height });
        }
        Ok(GridDims { width, height })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of cells, `width * height`.
    #[inline]
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as u64) < self.width as u64 && (y as u64) < self.height as u64
    }

    /// Row-major index of an in-bounds position.
    #[inline]
    pub fn index(&self, pos: PixelPos) -> usize {
        pos.y as usize * self.width + pos.x as usize
    }

    #[inline]
    pub fn pos_of(&self, index: usize) -> PixelPos {
        PixelPos::new((index % self.width) as u32, (index / self.width) as u32)
    }

    pub(crate) fn ensure_same(&self, other: &GridDims) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimsMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }
}

/// Zero-based pixel position: `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelPos {
    pub x: u32,
    pub y: u32,
}

impl PixelPos {
    #[inline]
    pub const fn new(x: u32, y: u32) -> Self {
        PixelPos { x, y }
    }
}

impl From<(u32, u32)> for PixelPos {
    fn from((x, y): (u32, u32)) -> Self {
        PixelPos { x, y }
    }
}

/// Axis-aligned integer box, zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub left: u32,
    pub top: u32,
    pub width: u32,
    pub height: u32,
}

impl BBox {
    pub fn right(&self) -> u32 {
        self.left + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.top + self.height
    }

    pub fn contains(&self, pos: PixelPos) -> bool {
        pos.x >= self.left && pos.x < self.right() && pos.y >= self.top && pos.y < self.bottom()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Extent {
    min_x: u32,
    max_x: u32,
    min_y: u32,
    max_y: u32,
}

/// A set of pixel positions on a fixed grid, stored as one bit per cell.
///
/// Membership is O(1); intersection counting walks only the words covered by
/// the rows both sets touch.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PixelSet {
    dims: GridDims,
    words: Vec<u64>,
    count: usize,
    extent: Option<Extent>,
}

impl PixelSet {
    pub fn new(dims: GridDims) -> Self {
        PixelSet {
            dims,
            words: vec![0; dims.area().div_ceil(64)],
            count: 0,
            extent: None,
        }
    }

    /// Build from a row-major occupancy slice of exactly `dims.area()` cells.
    pub fn from_bools(dims: GridDims, cells: &[bool]) -> Result<Self> {
        if cells.len() != dims.area() {
            return Err(Error::DimsMismatch(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                dims.width(),
                dims.height()
            )));
        }
        let mut set = PixelSet::new(dims);
        for (i, _) in cells.iter().enumerate().filter(|(_, &c)| c) {
            set.insert(dims.pos_of(i));
        }
        Ok(set)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.dims.area()).map(|i| self.bit(i)).collect()
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    fn bit(&self, index: usize) -> bool {
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    /// Insert an in-bounds position. Returns true if it was not present.
    ///
    /// Panics if the position lies outside the grid.
    pub fn insert(&mut self, pos: PixelPos) -> bool {
        assert!(
            self.dims.contains(pos.x as i64, pos.y as i64),
            "pixel {pos:?} outside grid"
        );
        let index = self.dims.index(pos);
        let word = &mut self.words[index / 64];
        let mask = 1u64 << (index % 64);
        if *word & mask != 0 {
            return false;
        }
        *word |= mask;
        self.count += 1;
        self.extent = Some(match self.extent {
            None => Extent {
                min_x: pos.x,
                max_x: pos.x,
                min_y: pos.y,
                max_y: pos.y,
            },
            Some(e) => Extent {
                min_x: e.min_x.min(pos.x),
                max_x: e.max_x.max(pos.x),
                min_y: e.min_y.min(pos.y),
                max_y: e.max_y.max(pos.y),
            },
        });
        true
    }

    /// Insert signed coordinates, silently dropping anything off the grid.
    pub fn insert_clipped(&mut self, x: i64, y: i64) -> bool {
        if self.dims.contains(x, y) {
            self.insert(PixelPos::new(x as u32, y as u32))
        } else {
            false
        }
    }

    #[inline]
    pub fn contains(&self, pos: PixelPos) -> bool {
        self.dims.contains(pos.x as i64, pos.y as i64) && self.bit(self.dims.index(pos))
    }

    /// Tightest box around the set, `None` when empty.
    pub fn bbox(&self) -> Option<BBox> {
        self.extent.map(|e| BBox {
            left: e.min_x,
            top: e.min_y,
            width: e.max_x - e.min_x + 1,
            height: e.max_y - e.min_y + 1,
        })
    }

    fn word_range(&self) -> Option<(usize, usize)> {
        self.extent.map(|e| {
            let w = self.dims.width();
            let first = e.min_y as usize * w / 64;
            let last = ((e.max_y as usize + 1) * w - 1) / 64;
            (first, last)
        })
    }

    /// Number of positions present in both sets.
    pub fn intersection_count(&self, other: &PixelSet) -> Result<usize> {
        self.dims.ensure_same(&other.dims)?;
        let (Some((a0, a1)), Some((b0, b1))) = (self.word_range(), other.word_range()) else {
            return Ok(0);
        };
        let (lo, hi) = (a0.max(b0), a1.min(b1));
        if lo > hi {
            return Ok(0);
        }
        Ok(self.words[lo..=hi]
            .iter()
            .zip(&other.words[lo..=hi])
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn is_subset(&self, other: &PixelSet) -> bool {
        self.dims == other.dims && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Positions in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = PixelPos> + '_ {
        let dims = self.dims;
        let (lo, hi) = self.word_range().unwrap_or((1, 0));
        self.words
            .iter()
            .enumerate()
            .skip(lo)
            .take((hi + 1).saturating_sub(lo))
            .flat_map(move |(wi, &word)| {
                let mut bits = word;
                std::iter::from_fn(move || {
                    if bits == 0 {
                        return None;
                    }
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(dims.pos_of(wi * 64 + b))
                })
            })
    }
}

/// The pixels of one segmented instance in one frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceMask {
    pub frame: u32,
    pub instance: u32,
    pub category: u32,
    pixels: PixelSet,
}

impl InstanceMask {
    /// Wrap a non-empty pixel set.
    pub fn new(frame: u32, instance: u32, category: u32, pixels: PixelSet) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(InstanceMask {
            frame,
            instance,
            category,
            pixels,
        })
    }

    pub fn pixels(&self) -> &PixelSet {
        &self.pixels
    }

    pub fn into_pixels(self) -> PixelSet {
        self.pixels
    }

    pub fn dims(&self) -> GridDims {
        self.pixels.dims()
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// Build a mask from a list of positions; duplicates collapse.
pub fn mask_from_positions(
    positions: &[PixelPos],
    dims: GridDims,
    frame: u32,
    instance: u32,
    category: u32,
) -> Result<InstanceMask> {
    if positions.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut pixels = PixelSet::new(dims);
    for p in positions {
        if !dims.contains(p.x as i64, p.y as i64) {
            return Err(Error::OutOfBounds {
                x: p.x as i64,
                y: p.y as i64,
                width: dims.width(),
                height: dims.height(),
            });
        }
        pixels.insert(*p);
    }
    InstanceMask::new(frame, instance, category, pixels)
}

/// Tightest axis-aligned box around a mask.
pub fn bbox_of(mask: &InstanceMask) -> BBox {
    mask.pixels
        .bbox()
        .expect("instance masks are never empty")
}

/// Per-pixel displacement field with a validity flag per pixel.
///
/// Vectors are kept at the precision of the `.flo` format so that files
/// round-trip bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    dims: GridDims,
    vectors: Vec<[f32; 2]>,
    valid: Vec<bool>,
}

impl FlowField {
    pub fn new(dims: GridDims, vectors: Vec<[f32; 2]>, valid: Vec<bool>) -> Result<Self> {
        if vectors.len() != dims.area() || valid.len() != dims.area() {
            return Err(Error::DimsMismatch(format!(
                "flow has {} vectors and {} flags for a {}x{} grid",
                vectors.len(),
                valid.len(),
                dims.width(),
                dims.height()
            )));
        }
        Ok(FlowField {
            dims,
            vectors,
            valid,
        })
    }

    /// All-zero field, valid everywhere.
    pub fn zeros(dims: GridDims) -> Self {
        FlowField {
            dims,
            vectors: vec![[0.0; 2]; dims.area()],
            valid: vec![true; dims.area()],
        }
    }

    /// Constant displacement, valid everywhere.
    pub fn uniform(dims: GridDims, dx: f32, dy: f32) -> Self {
        FlowField {
            dims,
            vectors: vec![[dx, dy]; dims.area()],
            valid: vec![true; dims.area()],
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// Displacement at `pos`, only where the flow is valid.
    pub fn get(&self, pos: PixelPos) -> Option<[f32; 2]> {
        let i = self.dims.index(pos);
        self.valid[i].then(|| self.vectors[i])
    }

    pub fn set(&mut self, pos: PixelPos, vector: [f32; 2], valid: bool) {
        let i = self.dims.index(pos);
        self.vectors[i] = vector;
        self.valid[i] = valid;
    }

    pub fn is_valid(&self, pos: PixelPos) -> bool {
        self.valid[self.dims.index(pos)]
    }

    /// Raw stored vectors, including those at invalid pixels.
    pub fn raw_vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn valid_flags(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(w: usize, h: usize) -> GridDims {
        GridDims::new(w, h).unwrap()
    }

    fn p(x: u32, y: u32) -> PixelPos {
        PixelPos::new(x, y)
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(GridDims::new(0, 3), Err(Error::InvalidDims { .. })));
        assert!(GridDims::new(1, 1).is_ok());
    }

    #[test]
    fn mask_from_positions_dedups() {
        let m = mask_from_positions(&[p(0, 0), p(0, 0), p(1, 0)], dims(2, 2), 0, 1, 1).unwrap();
        assert_eq!(m.area(), 2);
    }

    #[test]
    fn mask_from_positions_errors() {
        assert!(matches!(
            mask_from_positions(&[], dims(2, 2), 0, 1, 1),
            Err(Error::EmptyMask)
        ));
        assert!(matches!(
            mask_from_positions(&[p(5, 0)], dims(2, 2), 0, 1, 1),
            Err(Error::OutOfBounds { x: 5, y: 0, .. })
        ));
    }

    #[test]
    fn bbox_examples() {
        let d = dims(8, 8);
        let m = mask_from_positions(&[p(1, 1), p(3, 2)], d, 0, 1, 1).unwrap();
        assert_eq!(
            bbox_of(&m),
            BBox {
                left: 1,
                top: 1,
                width: 3,
                height: 2
            }
        );
        let m = mask_from_positions(&[p(0, 0)], d, 0, 1, 1).unwrap();
        assert_eq!(
            bbox_of(&m),
            BBox {
                left: 0,
                top: 0,
                width: 1,
                height: 1
            }
        );
        let m = mask_from_positions(&[p(2, 5), p(2, 5)], d, 0, 1, 1).unwrap();
        assert_eq!(
            bbox_of(&m),
            BBox {
                left: 2,
                top: 5,
                width: 1,
                height: 1
            }
        );
    }

    #[test]
    fn intersection_across_word_boundaries() {
        let d = dims(70, 3);
        let mut a = PixelSet::new(d);
        let mut b = PixelSet::new(d);
        for x in 60..70 {
            a.insert(p(x, 0));
            a.insert(p(x, 2));
        }
        for x in 65..70 {
            b.insert(p(x, 0));
        }
        b.insert(p(0, 1));
        assert_eq!(a.intersection_count(&b).unwrap(), 5);
        assert_eq!(b.intersection_count(&a).unwrap(), 5);
        let other = PixelSet::new(dims(3, 3));
        assert!(a.intersection_count(&other).is_err());
    }

    #[test]
    fn flow_field_reads_only_valid() {
        let d = dims(2, 1);
        let f = FlowField::new(d, vec![[1.0, 2.0], [3.0, 4.0]], vec![false, true]).unwrap();
        assert_eq!(f.get(p(0, 0)), None);
        assert_eq!(f.get(p(1, 0)), Some([3.0, 4.0]));
        assert!(FlowField::new(d, vec![[0.0; 2]], vec![true]).is_err());
    }

    proptest! {
        #[test]
        fn bitmap_round_trip_and_bbox(
            w in 1usize..40, h in 1usize..40,
            raw in proptest::collection::vec((0u32..40, 0u32..40), 1..60),
        ) {
            let d = dims(w, h);
            let pts: Vec<PixelPos> = raw
                .into_iter()
                .map(|(x, y)| p(x % w as u32, y % h as u32))
                .collect();
            let m = mask_from_positions(&pts, d, 0, 1, 1).unwrap();
            let mut unique = pts.clone();
            unique.sort_by_key(|q| (q.y, q.x));
            unique.dedup();
            prop_assert_eq!(m.area(), unique.len());
            let listed: Vec<PixelPos> = m.pixels().iter().collect();
            prop_assert_eq!(&listed, &unique);
            let bools = m.pixels().to_bools();
            prop_assert_eq!(bools.iter().filter(|b| **b).count(), m.area());
            prop_assert_eq!(&PixelSet::from_bools(d, &bools).unwrap(), m.pixels());
            let bb = bbox_of(&m);
            prop_assert!(unique.iter().all(|q| bb.contains(*q)));
            let self_overlap = m.pixels().intersection_count(m.pixels()).unwrap();
            prop_assert_eq!(self_overlap, m.area());
        }
    }
}
