//! CLEAR-MOT evaluation of a tracking result against ground truth.
//!
//! Frames are processed in order. Correspondences from the previous frame
//! that still clear the IoU threshold are kept; the rest are matched with
//! the Hungarian method, maximising the number of matches and then the
//! summed IoU.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::association::min_cost_assignment;
use crate::error::{Error, Result};
use crate::types::{BBox, PixelSet};

/// Real-valued box in MOT file coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxF {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoxF {
    pub fn iou(&self, other: &BoxF) -> f64 {
        let ix = (self.left + self.width).min(other.left + other.width) - self.left.max(other.left);
        let iy = (self.top + self.height).min(other.top + other.height) - self.top.max(other.top);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let union = self.width * self.height + other.width * other.height - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

impl From<BBox> for BoxF {
    fn from(b: BBox) -> Self {
        BoxF {
            left: b.left as f64,
            top: b.top as f64,
            width: b.width as f64,
            height: b.height as f64,
        }
    }
}

/// One row of a MOT-Challenge ground-truth or result file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MotEntry {
    pub frame: u32,
    pub id: u64,
    pub bbox: BoxF,
    pub conf: f64,
}

pub type GtEntry = MotEntry;
pub type HypEntry = MotEntry;

/// A per-frame object given by its pixel mask instead of a box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskEntry {
    pub frame: u32,
    pub id: u64,
    pub pixels: PixelSet,
}

fn mask_iou(a: &PixelSet, b: &PixelSet) -> f64 {
    let inter = a.intersection_count(b).unwrap_or(0);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    pub fps: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_threshold: 0.5,
            fps: 30.0,
        }
    }
}

/// A ground-truth/hypothesis correspondence in one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameMatch {
    pub frame: u32,
    pub gt_id: u64,
    pub hyp_id: u64,
    pub iou: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TrajectoryStats {
    pub mt: usize,
    pub pt: usize,
    pub ml: usize,
    pub fm: usize,
}

/// Metrics in percent where the name suggests a ratio, counts otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClearMotReport {
    pub rcll: f64,
    pub prcn: f64,
    pub far: f64,
    pub gt: usize,
    pub mt: usize,
    pub pt: usize,
    pub ml: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ids: usize,
    pub fm: usize,
    pub mota: f64,
    pub motp: f64,
    pub motal: f64,
    pub tp: usize,
    pub gt_boxes: usize,
    pub frames: usize,
    /// Sequence length in seconds at the configured frame rate.
    pub duration_s: f64,
}

impl ClearMotReport {
    /// Column names in report order.
    pub const COLUMNS: [&'static str; 14] = [
        "Rcll", "Prcn", "FAR", "GT", "MT", "PT", "ML", "FP", "FN", "IDs", "FM", "MOTA", "MOTP", "MOTAL",
    ];

    fn cells(&self) -> [String; 14] {
        [
            format!("{:.1}", self.rcll),
            format!("{:.1}", self.prcn),
            format!("{:.2}", self.far),
            self.gt.to_string(),
            self.mt.to_string(),
            self.pt.to_string(),
            self.ml.to_string(),
            self.fp.to_string(),
            self.fn_.to_string(),
            self.ids.to_string(),
            self.fm.to_string(),
            format!("{:.1}", self.mota),
            format!("{:.1}", self.motp),
            format!("{:.1}", self.motal),
        ]
    }
}

impl fmt::Display for ClearMotReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = self.cells();
        let widths: Vec<usize> = Self::COLUMNS
            .iter()
            .zip(&cells)
            .map(|(h, c)| h.len().max(c.len()))
            .collect();
        let line = |items: &mut dyn Iterator<Item = &str>| -> String {
            items
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(f, "{}", line(&mut Self::COLUMNS.iter().copied()))?;
        write!(f, "{}", line(&mut cells.iter().map(String::as_str)))
    }
}

/// Evaluate box results against box ground truth.
pub fn evaluate(gt: &[GtEntry], hyp: &[HypEntry], opts: EvalOptions) -> Result<ClearMotReport> {
    let g: Vec<(u32, u64, &BoxF)> = gt.iter().map(|e| (e.frame, e.id, &e.bbox)).collect();
    let h: Vec<(u32, u64, &BoxF)> = hyp.iter().map(|e| (e.frame, e.id, &e.bbox)).collect();
    evaluate_generic(&g, &h, opts, |a, b| a.iou(b)).map(|(r, _)| r)
}

/// Evaluate with mask IoU instead of box IoU.
pub fn evaluate_masks(gt: &[MaskEntry], hyp: &[MaskEntry], opts: EvalOptions) -> Result<ClearMotReport> {
    let g: Vec<(u32, u64, &PixelSet)> = gt.iter().map(|e| (e.frame, e.id, &e.pixels)).collect();
    let h: Vec<(u32, u64, &PixelSet)> = hyp.iter().map(|e| (e.frame, e.id, &e.pixels)).collect();
    evaluate_generic(&g, &h, opts, mask_iou).map(|(r, _)| r)
}

/// Box evaluation that also returns every per-frame correspondence.
pub fn evaluate_with_matches(
    gt: &[GtEntry],
    hyp: &[HypEntry],
    opts: EvalOptions,
) -> Result<(ClearMotReport, Vec<FrameMatch>)> {
    let g: Vec<(u32, u64, &BoxF)> = gt.iter().map(|e| (e.frame, e.id, &e.bbox)).collect();
    let h: Vec<(u32, u64, &BoxF)> = hyp.iter().map(|e| (e.frame, e.id, &e.bbox)).collect();
    evaluate_generic(&g, &h, opts, |a, b| a.iou(b))
}

fn evaluate_generic<T>(
    gt: &[(u32, u64, &T)],
    hyp: &[(u32, u64, &T)],
    opts: EvalOptions,
    iou: impl Fn(&T, &T) -> f64,
) -> Result<(ClearMotReport, Vec<FrameMatch>)> {
    if !(opts.iou_threshold > 0.0 && opts.iou_threshold <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "IoU threshold must lie in (0, 1], got {}",
            opts.iou_threshold
        )));
    }
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let thr = opts.iou_threshold;
    let mut gt_by_frame: BTreeMap<u32, Vec<(u64, &T)>> = BTreeMap::new();
    let mut hyp_by_frame: BTreeMap<u32, Vec<(u64, &T)>> = BTreeMap::new();
    for &(f, id, r) in gt {
        gt_by_frame.entry(f).or_default().push((id, r));
    }
    for &(f, id, r) in hyp {
        hyp_by_frame.entry(f).or_default().push((id, r));
    }
    let first = gt_by_frame.keys().chain(hyp_by_frame.keys()).min().copied().unwrap_or(0);
    let last = gt_by_frame.keys().chain(hyp_by_frame.keys()).max().copied().unwrap_or(0);

    let mut prev: HashMap<u64, u64> = HashMap::new();
    let mut last_hyp: HashMap<u64, u64> = HashMap::new();
    let mut matches = Vec::new();
    let (mut fp, mut fn_, mut ids) = (0usize, 0usize, 0usize);

    for frame in first..=last {
        let gts = gt_by_frame.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        let hyps = hyp_by_frame.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        let mut gt_used = vec![false; gts.len()];
        let mut hyp_used = vec![false; hyps.len()];
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

        for (gi, (gid, g)) in gts.iter().enumerate() {
            let Some(&hid) = prev.get(gid) else { continue };
            let candidate = hyps
                .iter()
                .enumerate()
                .find(|(hi, (id, _))| *id == hid && !hyp_used[*hi]);
            if let Some((hi, (_, h))) = candidate {
                let v = iou(g, h);
                if v >= thr {
                    gt_used[gi] = true;
                    hyp_used[hi] = true;
                    pairs.push((gi, hi, v));
                }
            }
        }

        let free_g: Vec<usize> = (0..gts.len()).filter(|&i| !gt_used[i]).collect();
        let free_h: Vec<usize> = (0..hyps.len()).filter(|&i| !hyp_used[i]).collect();
        if !free_g.is_empty() && !free_h.is_empty() {
            let ious: Vec<f64> = free_g
                .iter()
                .flat_map(|&gi| free_h.iter().map(move |&hi| (gi, hi)))
                .map(|(gi, hi)| iou(gts[gi].1, hyps[hi].1))
                .collect();
            let (n, m) = (free_g.len(), free_h.len());
            let big = n.min(m) as f64 + 1.0;
            let cost_of = |v: f64| if v >= thr { 1.0 - v } else { big };
            let chosen: Vec<(usize, usize)> = if n <= m {
                let cost: Vec<f64> = ious.iter().map(|&v| cost_of(v)).collect();
                min_cost_assignment(&cost, n, m).into_iter().enumerate().collect()
            } else {
                let cost: Vec<f64> = (0..m)
                    .flat_map(|j| (0..n).map(move |i| (i, j)))
                    .map(|(i, j)| cost_of(ious[i * m + j]))
                    .collect();
                min_cost_assignment(&cost, m, n)
                    .into_iter()
                    .enumerate()
                    .map(|(j, i)| (i, j))
                    .collect()
            };
            for (i, j) in chosen {
                let v = ious[i * m + j];
                if v >= thr {
                    pairs.push((free_g[i], free_h[j], v));
                    gt_used[free_g[i]] = true;
                    hyp_used[free_h[j]] = true;
                }
            }
        }

        prev.clear();
        pairs.sort_by_key(|&(gi, _, _)| gts[gi].0);
        for (gi, hi, v) in pairs {
            let (gid, hid) = (gts[gi].0, hyps[hi].0);
            if let Some(&before) = last_hyp.get(&gid) {
                if before != hid {
                    ids += 1;
                }
            }
            last_hyp.insert(gid, hid);
            prev.insert(gid, hid);
            matches.push(FrameMatch {
                frame,
                gt_id: gid,
                hyp_id: hid,
                iou: v,
            });
        }
        fn_ += gt_used.iter().filter(|u| !**u).count();
        fp += hyp_used.iter().filter(|u| !**u).count();
    }

    let stats = trajectory_stats(gt, &matches);
    let tp = matches.len();
    let gt_boxes = gt.len();
    let frames = (last - first + 1) as usize;
    let pct = |num: f64, den: f64| if den > 0.0 { 100.0 * num / den } else { 0.0 };
    let motp = if tp > 0 {
        100.0 * matches.iter().map(|m| m.iou).sum::<f64>() / tp as f64
    } else {
        0.0
    };
    let total = gt_boxes as f64;
    let report = ClearMotReport {
        rcll: pct(tp as f64, (tp + fn_) as f64),
        prcn: pct(tp as f64, (tp + fp) as f64),
        far: fp as f64 / frames as f64,
        gt: stats.mt + stats.pt + stats.ml,
        mt: stats.mt,
        pt: stats.pt,
        ml: stats.ml,
        fp,
        fn_,
        ids,
        fm: stats.fm,
        mota: 100.0 * (1.0 - (fn_ + fp + ids) as f64 / total),
        motp,
        motal: 100.0 * (1.0 - (fn_ as f64 + fp as f64 + (ids as f64 + 1.0).log10()) / total),
        tp,
        gt_boxes,
        frames,
        duration_s: if opts.fps > 0.0 { frames as f64 / opts.fps } else { 0.0 },
    };
    Ok((report, matches))
}

/// Mostly tracked / partially tracked / mostly lost and fragmentations.
///
/// A trajectory is MT when matched in at least 80% of the frames it is
/// present in and ML at 20% or less. A fragmentation is a matched frame
/// followed by an unmatched one within the trajectory's presence.
pub fn trajectory_stats<T>(gt: &[(u32, u64, T)], matches: &[FrameMatch]) -> TrajectoryStats {
    let mut present: BTreeMap<u64, BTreeSet<u32>> = BTreeMap::new();
    for (f, id, _) in gt {
        present.entry(*id).or_default().insert(*f);
    }
    let matched: BTreeSet<(u64, u32)> = matches.iter().map(|m| (m.gt_id, m.frame)).collect();
    let mut stats = TrajectoryStats::default();
    for (id, frames) in &present {
        let hits: Vec<bool> = frames.iter().map(|f| matched.contains(&(*id, *f))).collect();
        let ratio = hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64;
        if ratio >= 0.8 {
            stats.mt += 1;
        } else if ratio <= 0.2 {
            stats.ml += 1;
        } else {
            stats.pt += 1;
        }
        stats.fm += hits.windows(2).filter(|w| w[0] && !w[1]).count();
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(frame: u32, id: u64, x: f64) -> MotEntry {
        MotEntry {
            frame,
            id,
            bbox: BoxF {
                left: x,
                top: 10.0,
                width: 10.0,
                height: 20.0,
            },
            conf: 1.0,
        }
    }

    fn opts() -> EvalOptions {
        EvalOptions::default()
    }

    #[test]
    fn perfect_hypothesis() {
        let gt: Vec<_> = (1..=5).flat_map(|f| [e(f, 1, 0.0), e(f, 2, 50.0)]).collect();
        let r = evaluate(&gt, &gt, opts()).unwrap();
        assert_eq!(r.mota, 100.0);
        assert_eq!(r.motp, 100.0);
        assert_eq!((r.fp, r.fn_, r.ids, r.fm), (0, 0, 0, 0));
        assert_eq!(r.mt, r.gt);
        assert_eq!(r.gt, 2);
    }

    #[test]
    fn one_missed_frame() {
        // hand count: 3 GT boxes, 2 matched, 1 FN -> MOTA = 1 - 1/3
        let gt = vec![e(1, 1, 0.0), e(2, 1, 0.0), e(3, 1, 0.0)];
        let hyp = vec![e(1, 7, 0.0), e(2, 7, 0.0)];
        let r = evaluate(&gt, &hyp, opts()).unwrap();
        assert_eq!(r.fn_, 1);
        assert_eq!(r.fm, 1);
        assert_eq!(r.ids, 0);
        assert!((r.mota - 66.666_666).abs() < 1e-3);
    }

    #[test]
    fn id_switch() {
        // hand count: FN 1 + IDs 1 over 3 GT boxes -> MOTA = 1 - 2/3
        let gt = vec![e(1, 1, 0.0), e(2, 1, 0.0), e(3, 1, 0.0)];
        let hyp = vec![e(1, 7, 0.0), e(2, 8, 0.0)];
        let r = evaluate(&gt, &hyp, opts()).unwrap();
        assert_eq!(r.ids, 1);
        assert_eq!(r.fn_, 1);
        assert!((r.mota - 33.333_333).abs() < 1e-3);
        // log10(2) replaces the single switch
        let motal = 100.0 * (1.0 - (1.0 + 2f64.log10()) / 3.0);
        assert!((r.motal - motal).abs() < 1e-9);
    }

    #[test]
    fn empty_ground_truth() {
        assert!(matches!(evaluate(&[], &[e(1, 1, 0.0)], opts()), Err(Error::EmptyGroundTruth)));
    }

    #[test]
    fn bad_threshold() {
        let gt = vec![e(1, 1, 0.0)];
        let bad = EvalOptions {
            iou_threshold: 0.0,
            ..opts()
        };
        assert!(evaluate(&gt, &gt, bad).is_err());
    }

    #[test]
    fn pure_false_positive_costs_one_box() {
        let gt: Vec<_> = (1..=4).map(|f| e(f, 1, 0.0)).collect();
        let base = evaluate(&gt, &gt, opts()).unwrap();
        let mut hyp = gt.clone();
        hyp.push(e(2, 9, 200.0));
        let r = evaluate(&gt, &hyp, opts()).unwrap();
        assert!((base.mota - r.mota - 100.0 / 4.0).abs() < 1e-9);
        assert_eq!(r.fp, 1);
        assert!((r.far - 0.25).abs() < 1e-12);
    }

    #[test]
    fn carry_over_beats_better_candidate() {
        // frame 2 hyp 8 fits better, but hyp 7 still clears the threshold
        let gt = vec![e(1, 1, 0.0), e(2, 1, 0.0)];
        let hyp = vec![e(1, 7, 0.0), e(2, 7, 2.0), e(2, 8, 0.0)];
        let (r, m) = evaluate_with_matches(&gt, &hyp, opts()).unwrap();
        assert_eq!(r.ids, 0);
        assert_eq!(m[1].hyp_id, 7);
        assert_eq!(r.fp, 1);
    }

    #[test]
    fn trajectory_classes() {
        let gt: Vec<(u32, u64, ())> = (1..=10).map(|f| (f, 1, ())).collect();
        let mk = |frames: &[u32]| -> Vec<FrameMatch> {
            frames
                .iter()
                .map(|&f| FrameMatch {
                    frame: f,
                    gt_id: 1,
                    hyp_id: 1,
                    iou: 1.0,
                })
                .collect()
        };
        assert_eq!(trajectory_stats(&gt, &mk(&[1, 2, 3, 4, 5, 6, 7, 8, 9])).mt, 1);
        assert_eq!(trajectory_stats(&gt, &mk(&[1])).ml, 1);
        assert_eq!(trajectory_stats(&gt, &mk(&[1, 2, 3, 4, 5])).pt, 1);
        let six: Vec<(u32, u64, ())> = (1..=6).map(|f| (f, 1, ())).collect();
        assert_eq!(trajectory_stats(&six, &mk(&[1, 2, 5, 6])).fm, 1);
    }

    #[test]
    fn report_columns_in_order() {
        let gt = vec![e(1, 1, 0.0)];
        let text = evaluate(&gt, &gt, opts()).unwrap().to_string();
        let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(header, ClearMotReport::COLUMNS);
    }

    #[test]
    fn mask_iou_matching() {
        use crate::types::{GridDims, PixelPos};
        let d = GridDims::new(4, 4).unwrap();
        let mut a = PixelSet::new(d);
        a.insert(PixelPos::new(0, 0));
        a.insert(PixelPos::new(1, 0));
        let gt = vec![MaskEntry {
            frame: 1,
            id: 1,
            pixels: a.clone(),
        }];
        let r = evaluate_masks(&gt, &gt, opts()).unwrap();
        assert_eq!(r.mota, 100.0);
    }
}
