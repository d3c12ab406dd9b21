//! Overlap affinities between predicted tracks and detections, and the
//! maximum-affinity one-to-one assignment over them.

use crate::error::Result;
use crate::flowops::PredictedMask;
use crate::par::{self, Execution};
use crate::types::{InstanceMask, PixelSet};

/// Pixel-overlap counts, one row per prediction and one column per detection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffinityMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
}

impl AffinityMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AffinityMatrix {
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    /// Build from row-major entries; panics if the length is not `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<u64>) -> Self {
        assert_eq!(entries.len(), rows * cols, "affinity entries do not fill {rows}x{cols}");
        AffinityMatrix { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.cols + col]
    }

    pub fn max_entry(&self) -> u64 {
        self.entries.iter().copied().max().unwrap_or(0)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                entries.push(self.get(r, c));
            }
        }
        AffinityMatrix {
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }
}

/// Result of an assignment: matched pairs plus whatever was left over.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Matching {
    /// Sum of the affinities of the matched pairs.
    pub fn total(&self, a: &AffinityMatrix) -> u64 {
        self.pairs.iter().map(|&(r, c)| a.get(r, c)).sum()
    }
}

pub fn affinity(predictions: &[PredictedMask], detections: &[InstanceMask]) -> Result<AffinityMatrix> {
    affinity_with(predictions, detections, Execution::default())
}

/// Entry `(i, j)` is the number of pixels shared by prediction `i` and detection `j`.
pub fn affinity_with(
    predictions: &[PredictedMask],
    detections: &[InstanceMask],
    exec: Execution,
) -> Result<AffinityMatrix> {
    let rows: Vec<&PixelSet> = predictions.iter().map(|p| &p.pixels).collect();
    let cols: Vec<&PixelSet> = detections.iter().map(|d| d.pixels()).collect();
    overlap_matrix(&rows, &cols, exec)
}

pub(crate) fn overlap_matrix(rows: &[&PixelSet], cols: &[&PixelSet], exec: Execution) -> Result<AffinityMatrix> {
    let per_row = par::map_slice(exec, rows, |r| {
        cols.iter()
            .map(|c| r.intersection_count(c).map(|n| n as u64))
            .collect::<Result<Vec<u64>>>()
    });
    let mut entries = Vec::with_capacity(rows.len() * cols.len());
    for row in per_row {
        entries.extend(row?);
    }
    Ok(AffinityMatrix::from_rows(rows.len(), cols.len(), entries))
}

/// Numeric type usable as an assignment cost.
pub trait AssignCost: Copy + PartialOrd + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {
    const ZERO: Self;
    const INFINITY: Self;
}

impl AssignCost for i64 {
    const ZERO: Self = 0;
    const INFINITY: Self = i64::MAX / 4;
}

impl AssignCost for f64 {
    const ZERO: Self = 0.0;
    const INFINITY: Self = f64::INFINITY;
}

/// Minimum-cost assignment of every row to a distinct column (Hungarian
/// method with potentials, O(rows² · cols)). Requires `rows <= cols`.
///
/// Returns the column chosen for each row. Rows are inserted in index order
/// and columns scanned in index order, so equal inputs give equal outputs.
pub fn min_cost_assignment<C: AssignCost>(cost: &[C], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "min_cost_assignment needs rows <= cols");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    let at = |r: usize, c: usize| cost[(r - 1) * cols + (c - 1)];
    // 1-based with a virtual column 0, as in the classic formulation.
    let mut u = vec![C::ZERO; rows + 1];
    let mut v = vec![C::ZERO; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for r in 1..=rows {
        owner[0] = r;
        let mut c0 = 0usize;
        let mut minv = vec![C::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[c0] = true;
            let r0 = owner[c0];
            let mut delta = C::INFINITY;
            let mut c1 = 0usize;
            for c in 1..=cols {
                if used[c] {
                    continue;
                }
                let cur = at(r0, c) - u[r0] - v[c];
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = c0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    c1 = c;
                }
            }
            for c in 0..=cols {
                if used[c] {
                    u[owner[c]] = u[owner[c]] + delta;
                    v[c] = v[c] - delta;
                } else {
                    minv[c] = minv[c] - delta;
                }
            }
            c0 = c1;
            if owner[c0] == 0 {
                break;
            }
        }
        loop {
            let c1 = way[c0];
            owner[c0] = owner[c1];
            c0 = c1;
            if c0 == 0 {
                break;
            }
        }
    }
    let mut assigned = vec![0usize; rows];
    for c in 1..=cols {
        if owner[c] != 0 {
            assigned[owner[c] - 1] = c - 1;
        }
    }
    assigned
}

/// Maximum-total-affinity matching; pairs with zero affinity are dropped.
pub fn solve_assignment(a: &AffinityMatrix) -> Matching {
    let (rows, cols) = (a.rows(), a.cols());
    let mut pairs = Vec::new();
    if rows > 0 && cols > 0 {
        let top = a.max_entry() as i64;
        if rows <= cols {
            let cost: Vec<i64> = a.entries.iter().map(|&e| top - e as i64).collect();
            for (r, c) in min_cost_assignment(&cost, rows, cols).into_iter().enumerate() {
                pairs.push((r, c));
            }
        } else {
            let t = a.transpose();
            let cost: Vec<i64> = t.entries.iter().map(|&e| top - e as i64).collect();
            for (c, r) in min_cost_assignment(&cost, cols, rows).into_iter().enumerate() {
                pairs.push((r, c));
            }
        }
    }
    pairs.retain(|&(r, c)| a.get(r, c) > 0);
    pairs.sort_unstable();
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for &(r, c) in &pairs {
        row_used[r] = true;
        col_used[c] = true;
    }
    Matching {
        pairs,
        unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
    }
}
