//! Trajectory-based identification of physical parameters.
//!
//! The trajectory is split into gaits — maximal intervals where every
//! cable's control direction is constant. The key-frame loss (KFL) pairs
//! the ground-truth and predicted gaits in order, aligns each pair at its
//! start, and pays a squared end-cap position defect at the end of the
//! overlap (the key frame). Gaits whose duration mismatch opposes the
//! overall timing mismatch are masked out, so all surviving gradients
//! agree on whether the engine should speed up or slow down. The carried
//! simulator state is detached between gaits.
//!
//! Baselines: All Step / Last Step over k equal windows (no detach, no
//! mask), multiple shooting (windows re-anchored to the observations), and
//! a naive per-frame loss.

pub mod identify;

pub use identify::{identify, IdentifyReport, IterationRow, LossKind, ParamSpec, SysIdProblem};

use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use crate::robot::{Dir, Frame};

/// One maximal constant-direction interval of a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct GaitSegment {
    /// Inclusive frame range.
    pub start: usize,
    pub end: usize,
    pub dirs: [Dir; 6],
    pub start_time: f64,
    pub end_time: f64,
}

impl GaitSegment {
    /// The key frame is the last frame of the gait.
    pub fn key_frame(&self) -> usize {
        self.end
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }
}

/// Splits frames into maximal constant-direction segments.
pub fn segment_gaits_frames<S: Scalar>(frames: &[Frame<S>]) -> Result<Vec<GaitSegment>> {
    if frames.is_empty() {
        return Err(Error::MissingDirections);
    }
    let mut out: Vec<GaitSegment> = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        match out.last_mut() {
            Some(seg) if seg.dirs == f.dirs => {
                seg.end = i;
                seg.end_time = f.t;
            }
            _ => out.push(GaitSegment {
                start: i,
                end: i,
                dirs: f.dirs,
                start_time: f.t,
                end_time: f.t,
            }),
        }
    }
    Ok(out)
}

/// A matched key-frame pair.
#[derive(Clone, Copy, Debug)]
pub struct KfPair {
    pub gait: usize,
    pub gt_frame: usize,
    pub pred_frame: usize,
    pub gt_duration: f64,
    pub pred_duration: f64,
}

/// Nearest frame to `t` within the inclusive index range.
fn nearest_frame<S: Scalar>(frames: &[Frame<S>], lo: usize, hi: usize, t: f64) -> usize {
    let mut best = (f64::INFINITY, lo);
    for (i, f) in frames.iter().enumerate().take(hi + 1).skip(lo) {
        let d = (f.t - t).abs();
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Pairs ground-truth and predicted gaits in order: both aligned at their
/// start frames, key frame at the end of the overlap (the shorter of the
/// two durations). Frame lookup is nearest-timestamp.
pub fn align_key_frames<S: Scalar>(
    gt_frames: &[Frame<f64>],
    gt_segs: &[GaitSegment],
    pred_frames: &[Frame<S>],
    pred_segs: &[GaitSegment],
) -> Result<Vec<KfPair>> {
    if gt_segs.len() != pred_segs.len() {
        return Err(Error::GaitCountMismatch {
            gt: gt_segs.len(),
            predicted: pred_segs.len(),
            at: gt_segs.len().min(pred_segs.len()),
        });
    }
    let mut pairs = Vec::with_capacity(gt_segs.len());
    for (i, (g, p)) in gt_segs.iter().zip(pred_segs).enumerate() {
        let overlap = g.duration().min(p.duration());
        let gt_frame = nearest_frame(gt_frames, g.start, g.end, g.start_time + overlap);
        let pred_frame = nearest_frame(pred_frames, p.start, p.end, p.start_time + overlap);
        pairs.push(KfPair {
            gait: i,
            gt_frame,
            pred_frame,
            gt_duration: g.duration(),
            pred_duration: p.duration(),
        });
    }
    Ok(pairs)
}

/// Which pairs the duration-sign mask keeps, and the overall sign
/// (+1 prediction slower, -1 faster, 0 equal).
pub fn mask_filter(pairs: &[KfPair]) -> (Vec<usize>, i64) {
    let total_gt: f64 = pairs.iter().map(|p| p.gt_duration).sum();
    let total_pred: f64 = pairs.iter().map(|p| p.pred_duration).sum();
    let overall = sign_of(total_pred - total_gt);
    let mut kept: Vec<usize> = pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| overall == 0 || sign_of(p.pred_duration - p.gt_duration) == overall)
        .map(|(i, _)| i)
        .collect();
    if kept.is_empty() {
        // Everything masked: fall back to all gaits rather than stalling.
        kept = (0..pairs.len()).collect();
    }
    (kept, overall)
}

fn sign_of(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Sum over the six end caps of the squared position defect between a
/// predicted and an observed frame.
pub fn frame_defect<S: Scalar>(pred: &Frame<S>, gt: &Frame<f64>) -> S {
    let mut sum = S::zero();
    for (p, g) in pred.caps.iter().zip(&gt.caps) {
        let d = *p - crate::math::Vec3::from_f64(*g);
        sum += d.norm_sq();
    }
    sum
}

/// Key-frame loss over matched pairs: mean per-gait defect over the gaits
/// the mask keeps.
pub fn key_frame_loss<S: Scalar>(
    gt_frames: &[Frame<f64>],
    pred_frames: &[Frame<S>],
    pairs: &[KfPair],
) -> S {
    let (kept, _) = mask_filter(pairs);
    let mut loss = S::zero();
    for &i in &kept {
        let p = &pairs[i];
        loss += frame_defect(&pred_frames[p.pred_frame], &gt_frames[p.gt_frame]);
    }
    loss * (1.0 / kept.len() as f64)
}

/// Equal-duration window spans over a frame sequence, as inclusive frame
/// ranges with their start times.
pub fn window_spans<S: Scalar>(frames: &[Frame<S>], windows: usize) -> Result<Vec<GaitSegment>> {
    if frames.is_empty() || windows == 0 || windows > frames.len() {
        return Err(Error::InvalidDescription(format!(
            "window count {windows} invalid for {} frames",
            frames.len()
        )));
    }
    let t0 = frames[0].t;
    let total = frames.last().unwrap().t - t0;
    let mut out = Vec::with_capacity(windows);
    let mut lo = 0usize;
    for j in 0..windows {
        let t_end = t0 + total * (j + 1) as f64 / windows as f64;
        let mut hi = lo;
        while hi + 1 < frames.len() && frames[hi + 1].t <= t_end + 1e-12 {
            hi += 1;
        }
        out.push(GaitSegment {
            start: lo,
            end: hi,
            dirs: frames[lo].dirs,
            start_time: frames[lo].t,
            end_time: frames[hi].t,
        });
        lo = hi;
    }
    Ok(out)
}

/// Last Step baseline: key-frame-style pairing over k equal windows, no
/// mask, gradients flowing across windows.
pub fn last_step_loss<S: Scalar>(
    gt_frames: &[Frame<f64>],
    pred_frames: &[Frame<S>],
    windows: usize,
) -> Result<S> {
    let gt_w = window_spans(gt_frames, windows)?;
    let pred_w = window_spans(pred_frames, windows)?;
    let pairs = align_key_frames(gt_frames, &gt_w, pred_frames, &pred_w)?;
    let mut loss = S::zero();
    for p in &pairs {
        loss += frame_defect(&pred_frames[p.pred_frame], &gt_frames[p.gt_frame]);
    }
    Ok(loss * (1.0 / pairs.len() as f64))
}

/// All Step baseline: averages the defects of every ground-truth frame in
/// each window's overlap, windows aligned at their starts.
pub fn all_step_loss<S: Scalar>(
    gt_frames: &[Frame<f64>],
    pred_frames: &[Frame<S>],
    windows: usize,
) -> Result<S> {
    let gt_w = window_spans(gt_frames, windows)?;
    let pred_w = window_spans(pred_frames, windows)?;
    let mut loss = S::zero();
    let mut count = 0usize;
    for (g, p) in gt_w.iter().zip(&pred_w) {
        let overlap = g.duration().min(p.duration());
        for i in g.start..=g.end {
            let offset = gt_frames[i].t - g.start_time;
            if offset > overlap + 1e-12 {
                break;
            }
            let pred_i = nearest_frame(pred_frames, p.start, p.end, p.start_time + offset);
            loss += frame_defect(&pred_frames[pred_i], &gt_frames[i]);
            count += 1;
        }
    }
    Ok(loss * (1.0 / count.max(1) as f64))
}

/// Naive baseline: per-frame squared defect over the whole trajectory at
/// matching absolute times.
pub fn naive_loss<S: Scalar>(gt_frames: &[Frame<f64>], pred_frames: &[Frame<S>]) -> S {
    let mut loss = S::zero();
    for g in gt_frames {
        let pred_i = nearest_frame(pred_frames, 0, pred_frames.len() - 1, g.t);
        loss += frame_defect(&pred_frames[pred_i], g);
    }
    loss * (1.0 / gt_frames.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Vec3, V3};

    fn frame(t: f64, dirs: [Dir; 6], x: f64) -> Frame<f64> {
        Frame {
            t,
            caps: [Vec3::from_f64(V3::v(x, 0.0, 0.0)); 6],
            lengths: [0.2; 9],
            step: 0,
            dirs,
        }
    }

    const R: Dir = Dir::Retract;
    const H: Dir = Dir::Hold;
    const E: Dir = Dir::Extend;

    #[test]
    fn three_step_policy_gives_three_segments() {
        let mut frames = Vec::new();
        for i in 0..30 {
            let dirs = match i / 10 {
                0 => [R; 6],
                1 => [H; 6],
                _ => [E; 6],
            };
            frames.push(frame(i as f64 * 0.1, dirs, 0.0));
        }
        let segs = segment_gaits_frames(&frames).unwrap();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0].key_frame(), 9);
        assert_eq!(segs[1].start, 10);
        assert_eq!(segs[2].end, 29);
    }

    #[test]
    fn constant_policy_is_one_segment() {
        let frames: Vec<_> = (0..20).map(|i| frame(i as f64 * 0.1, [R, H, E, H, H, E], 0.0)).collect();
        let segs = segment_gaits_frames(&frames).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].key_frame(), 19);
    }

    #[test]
    fn mismatched_gait_counts_error_names_divergence() {
        let gt: Vec<_> = (0..10)
            .map(|i| frame(i as f64 * 0.1, if i < 5 { [R; 6] } else { [E; 6] }, 0.0))
            .collect();
        let pred: Vec<_> = (0..10).map(|i| frame(i as f64 * 0.1, [R; 6], 0.0)).collect();
        let gt_segs = segment_gaits_frames(&gt).unwrap();
        let pred_segs = segment_gaits_frames(&pred).unwrap();
        let err = align_key_frames(&gt, &gt_segs, &pred, &pred_segs).unwrap_err();
        match err {
            Error::GaitCountMismatch { gt: 2, predicted: 1, at: 1 } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identical_trajectories_pair_identically_with_zero_loss() {
        let mut frames = Vec::new();
        for i in 0..40 {
            let dirs = if i < 20 { [R; 6] } else { [E; 6] };
            frames.push(frame(i as f64 * 0.05, dirs, i as f64 * 0.01));
        }
        let segs = segment_gaits_frames(&frames).unwrap();
        let pairs = align_key_frames(&frames, &segs, &frames, &segs).unwrap();
        assert_eq!(pairs.len(), 2);
        for p in &pairs {
            assert_eq!(p.gt_frame, p.pred_frame);
        }
        let loss: f64 = key_frame_loss(&frames, &frames, &pairs);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn shorter_predicted_gait_sets_key_frame_at_its_end() {
        // Predicted gait 20% shorter: KF at the predicted gait end, ground
        // truth sampled at the same offset from its own gait start.
        let gt: Vec<_> = (0..50).map(|i| frame(i as f64 * 0.1, [R; 6], 0.0)).collect();
        let pred: Vec<_> = (0..40).map(|i| frame(i as f64 * 0.1, [R; 6], 0.0)).collect();
        let gt_segs = segment_gaits_frames(&gt).unwrap();
        let pred_segs = segment_gaits_frames(&pred).unwrap();
        let pairs = align_key_frames(&gt, &gt_segs, &pred, &pred_segs).unwrap();
        assert_eq!(pairs[0].pred_frame, 39);
        assert_eq!(pairs[0].gt_frame, 39);
    }

    #[test]
    fn mixed_rate_pairing_uses_nearest_timestamps() {
        // Ground truth at 10 Hz, prediction at 100 Hz: the pair lands within
        // half a coarse sample.
        let gt: Vec<_> = (0..20).map(|i| frame(i as f64 * 0.1, [R; 6], 0.0)).collect();
        let pred: Vec<_> = (0..191).map(|i| frame(i as f64 * 0.01, [R; 6], 0.0)).collect();
        let gt_segs = segment_gaits_frames(&gt).unwrap();
        let pred_segs = segment_gaits_frames(&pred).unwrap();
        let pairs = align_key_frames(&gt, &gt_segs, &pred, &pred_segs).unwrap();
        let gt_t = gt[pairs[0].gt_frame].t;
        let pred_t = pred[pairs[0].pred_frame].t;
        assert!((gt_t - pred_t).abs() <= 0.05 + 1e-9);
    }

    fn pair(gt_duration: f64, pred_duration: f64) -> KfPair {
        KfPair { gait: 0, gt_frame: 0, pred_frame: 0, gt_duration, pred_duration }
    }

    #[test]
    fn mask_keeps_gaits_matching_overall_sign() {
        // Prediction faster in gaits 0 and 2, slower in 1, faster overall:
        // keep 0 and 2, mask 1.
        let pairs = vec![pair(1.0, 0.7), pair(1.0, 1.2), pair(1.0, 0.6)];
        let (kept, overall) = mask_filter(&pairs);
        assert_eq!(overall, -1);
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn mask_keeps_all_when_signs_agree() {
        let pairs = vec![pair(1.0, 1.3), pair(1.0, 1.1)];
        let (kept, _) = mask_filter(&pairs);
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn mask_falls_back_to_all_when_everything_masked() {
        // Overall slower but every gait individually faster cannot happen;
        // emulate with zero-sign gaits against a nonzero overall.
        let pairs = vec![pair(1.0, 1.0), pair(1.0, 1.0), pair(0.5, 1.6)];
        let (kept, overall) = mask_filter(&pairs);
        assert_eq!(overall, 1);
        assert_eq!(kept, vec![2]);
        let pairs = vec![pair(1.0, 1.0), pair(2.0, 2.0)];
        let (kept, overall) = mask_filter(&pairs);
        assert_eq!(overall, 0);
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn zero_defect_gives_zero_gradient() {
        let tape = crate::autodiff::Tape::new();
        let v = tape.var(0.3).unwrap();
        let gt = frame(0.0, [R; 6], 0.5);
        let mut pred: Frame<crate::Var> = Frame {
            t: 0.0,
            caps: [Vec3::new(v * 0.0 + 0.5, crate::Var::constant(0.0), crate::Var::constant(0.0)); 6],
            lengths: [crate::Var::constant(0.2); 9],
            step: 0,
            dirs: [R; 6],
        };
        // Make the prediction depend on v but match the target exactly.
        for c in &mut pred.caps {
            c.x = v - 0.3 + 0.5;
        }
        let defect = frame_defect(&pred, &gt);
        assert!(defect.value().abs() < 1e-25);
        let g = defect.backward();
        assert!(g.wrt(v).abs() < 1e-12);
    }

    #[test]
    fn last_step_with_one_window_is_final_frame_loss() {
        let gt: Vec<_> = (0..30).map(|i| frame(i as f64 * 0.1, [R; 6], 0.01 * i as f64)).collect();
        let pred: Vec<_> = (0..30).map(|i| frame(i as f64 * 0.1, [R; 6], 0.013 * i as f64)).collect();
        let loss: f64 = last_step_loss(&gt, &pred, 1).unwrap();
        let direct: f64 = frame_defect(&pred[29], &gt[29]);
        assert!((loss - direct).abs() < 1e-15);
    }

    #[test]
    fn window_count_larger_than_frames_rejected() {
        let gt: Vec<_> = (0..5).map(|i| frame(i as f64 * 0.1, [R; 6], 0.0)).collect();
        assert!(window_spans(&gt, 10).is_err());
        assert!(last_step_loss::<f64>(&gt, &gt, 10).is_err());
    }
}
