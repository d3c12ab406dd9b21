//! Per-instance scattered-data interpolation of flow vectors.
//!
//! Pixels inside the convex hull of the sample positions get the
//! piecewise-linear interpolant over a Delaunay triangulation; pixels outside
//! it, or every pixel when the samples are collinear, take the vector of the
//! nearest sample.

use spade::handles::FixedVertexHandle;
use spade::{DelaunayTriangulation, Point2, PositionInTriangulation, Triangulation};

use super::SparseFlowSample;
use crate::error::{Error, Result};
use crate::types::{PixelPos, PixelSet};

/// Displacement for every pixel of one mask, in row-major pixel order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseFlow {
    pixels: Vec<PixelPos>,
    vectors: Vec<[f64; 2]>,
}

impl DenseFlow {
    /// Same displacement at every pixel of `mask`.
    pub fn constant(mask: &PixelSet, vec: [f64; 2]) -> Self {
        let pixels: Vec<PixelPos> = mask.iter().collect();
        let vectors = vec![vec; pixels.len()];
        DenseFlow { pixels, vectors }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, pos: PixelPos) -> Option<[f64; 2]> {
        self.pixels
            .binary_search_by_key(&(pos.y, pos.x), |p| (p.y, p.x))
            .ok()
            .map(|i| self.vectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (PixelPos, [f64; 2])> + '_ {
        self.pixels.iter().copied().zip(self.vectors.iter().copied())
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn coords(p: PixelPos) -> (i64, i64) {
    (p.x as i64, p.y as i64)
}

fn dist2(a: PixelPos, b: PixelPos) -> i64 {
    let (dx, dy) = (a.x as i64 - b.x as i64, a.y as i64 - b.y as i64);
    dx * dx + dy * dy
}

/// Index of the closest sample; ties go to the lowest index.
fn nearest_brute(samples: &[SparseFlowSample], pos: PixelPos) -> usize {
    let mut best = 0;
    let mut best_d = i64::MAX;
    for (i, s) in samples.iter().enumerate() {
        let d = dist2(s.pos, pos);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn all_collinear(samples: &[SparseFlowSample]) -> bool {
    let o = coords(samples[0].pos);
    let Some(a) = samples.iter().map(|s| coords(s.pos)).find(|&p| p != o) else {
        return true;
    };
    samples.iter().all(|s| cross(o, a, coords(s.pos)) == 0)
}

/// Interpolate sample vectors over every pixel of `mask`.
///
/// Duplicate sample positions keep their first occurrence.
pub fn interpolate_instance_flow(
    mask: &PixelSet,
    samples: &[SparseFlowSample],
) -> Result<DenseFlow> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut seen = std::collections::HashSet::with_capacity(samples.len());
    let unique: Vec<SparseFlowSample> = samples
        .iter()
        .filter(|s| seen.insert(s.pos))
        .copied()
        .collect();

    let pixels: Vec<PixelPos> = mask.iter().collect();
    let vectors = if unique.len() < 3 || all_collinear(&unique) {
        pixels
            .iter()
            .map(|&p| unique[nearest_brute(&unique, p)].vec)
            .collect()
    } else {
        Triangulated::new(&unique)?.interpolate_all(&pixels)
    };
    Ok(DenseFlow { pixels, vectors })
}

struct Triangulated<'a> {
    samples: &'a [SparseFlowSample],
    tri: DelaunayTriangulation<Point2<f64>>,
}

impl<'a> Triangulated<'a> {
    fn new(samples: &'a [SparseFlowSample]) -> Result<Self> {
        let points = samples
            .iter()
            .map(|s| Point2::new(s.pos.x as f64, s.pos.y as f64))
            .collect();
        let tri = DelaunayTriangulation::bulk_load_stable(points)
            .map_err(|e| Error::InvalidParam(format!("triangulation failed: {e:?}")))?;
        debug_assert_eq!(tri.num_vertices(), samples.len());
        Ok(Triangulated { samples, tri })
    }

    fn interpolate_all(&self, pixels: &[PixelPos]) -> Vec<[f64; 2]> {
        let mut hint = FixedVertexHandle::from_index(0);
        pixels
            .iter()
            .map(|&p| {
                let (v, next_hint) = self.at(p, hint);
                hint = next_hint;
                v
            })
            .collect()
    }

    fn at(&self, p: PixelPos, hint: FixedVertexHandle) -> ([f64; 2], FixedVertexHandle) {
        let q = Point2::new(p.x as f64, p.y as f64);
        match self.tri.locate_with_hint(q, hint) {
            PositionInTriangulation::OnVertex(v) => (self.samples[v.index()].vec, v),
            PositionInTriangulation::OnFace(f) => {
                let verts = self.tri.face(f).vertices().map(|v| v.fix());
                (self.barycentric(p, verts), verts[0])
            }
            PositionInTriangulation::OnEdge(e) => {
                let edge = self.tri.directed_edge(e);
                // Both adjacent triangles agree on an edge; pick the lower index.
                let face = [edge.face(), edge.rev().face()]
                    .into_iter()
                    .filter_map(|f| f.as_inner())
                    .min_by_key(|f| f.fix().index())
                    .expect("edge of a non-degenerate triangulation has an inner face");
                let verts = face.vertices().map(|v| v.fix());
                (self.barycentric(p, verts), verts[0])
            }
            PositionInTriangulation::OutsideOfConvexHull(_) | PositionInTriangulation::NoTriangulation => {
                let v = self
                    .tri
                    .nearest_neighbor(q)
                    .map(|v| v.fix())
                    .unwrap_or(hint);
                (self.samples[v.index()].vec, v)
            }
        }
    }

    fn barycentric(&self, p: PixelPos, verts: [FixedVertexHandle; 3]) -> [f64; 2] {
        let [a, b, c] = verts.map(|v| &self.samples[v.index()]);
        let (pa, pb, pc, pp) = (coords(a.pos), coords(b.pos), coords(c.pos), coords(p));
        // Integer cross products are exact, so the weights are nonnegative
        // for every point the triangulation places in this triangle.
        let det = cross(pa, pb, pc) as f64;
        let wa = cross(pp, pb, pc) as f64 / det;
        let wb = cross(pa, pp, pc) as f64 / det;
        let wc = cross(pa, pb, pp) as f64 / det;
        [
            wa * a.vec[0] + wb * b.vec[0] + wc * c.vec[0],
            wa * a.vec[1] + wb * b.vec[1] + wc * c.vec[1],
        ]
    }
}
