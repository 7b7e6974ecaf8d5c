//! Segmentation metrics restricted to a field of view.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ImagePlane, ProbabilityMap};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_size(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: what.to_string(),
            got_w: got.0,
            got_h: got.1,
            want_w: want.0,
            want_h: want.1,
        })
    }
}

fn check_masks(truth: &BinaryMask, others: &[(&str, (usize, usize))]) -> Result<()> {
    let want = (truth.width(), truth.height());
    for (what, got) in others {
        check_size(what, *got, want)?;
    }
    Ok(())
}

/// Counts over fov pixels after binarizing `pred` at `threshold` (`>=` is positive).
pub fn confusion(
    pred: &ProbabilityMap,
    truth: &BinaryMask,
    fov: &BinaryMask,
    threshold: f32,
) -> Result<ConfusionCounts> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::param(format!("threshold {threshold} outside [0, 1]")));
    }
    check_masks(
        truth,
        &[
            ("prediction", (pred.width(), pred.height())),
            ("fov", (fov.width(), fov.height())),
        ],
    )?;
    let mut c = ConfusionCounts::default();
    for ((&p, &t), &f) in pred.data().iter().zip(truth.data()).zip(fov.data()) {
        if f == 0 {
            continue;
        }
        match (p >= threshold, t == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    match c.total() {
        0 => Err(Error::EmptyFov),
        n => Ok((c.tp + c.tn) as f64 / n as f64),
    }
}

/// Dice from counts; 1.0 when prediction and truth are both empty.
pub fn dice_from_counts(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        (2 * c.tp) as f64 / denom as f64
    }
}

pub fn dice(pred: &BinaryMask, truth: &BinaryMask, fov: &BinaryMask) -> Result<f64> {
    check_masks(
        truth,
        &[
            ("prediction", (pred.width(), pred.height())),
            ("fov", (fov.width(), fov.height())),
        ],
    )?;
    let (mut inter, mut p, mut t) = (0u64, 0u64, 0u64);
    for ((&a, &b), &f) in pred.data().iter().zip(truth.data()).zip(fov.data()) {
        if f == 1 {
            inter += u64::from(a & b);
            p += u64::from(a);
            t += u64::from(b);
        }
    }
    Ok(dice_from_counts(&ConfusionCounts {
        tp: inter,
        fp: p - inter,
        fn_: t - inter,
        tn: 0,
    }))
}

/// Mann-Whitney AUC of `scores` against `labels`, ties counting one half.
///
/// Sorts once and walks tie groups; the pair count is accumulated as an
/// integer (doubled, so half-ties stay exact).
pub fn roc_auc_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidRaster(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidRaster("NaN score".into()));
    }
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let positives = pairs.iter().filter(|p| p.1).count() as u128;
    let negatives = pairs.len() as u128 - positives;
    if positives == 0 {
        return Err(Error::DegenerateTruth("negative"));
    }
    if negatives == 0 {
        return Err(Error::DegenerateTruth("positive"));
    }

    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        // -0.0 and 0.0 compare equal as scores even though total_cmp splits them.
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        twice_u += p * (2 * neg_below + n);
        neg_below += n;
        i = j;
    }
    Ok(twice_u as f64 / (2 * positives * negatives) as f64)
}

/// AUC over fov pixels.
pub fn roc_auc(pred: &ProbabilityMap, truth: &BinaryMask, fov: &BinaryMask) -> Result<f64> {
    check_masks(
        truth,
        &[
            ("prediction", (pred.width(), pred.height())),
            ("fov", (fov.width(), fov.height())),
        ],
    )?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for ((&p, &t), &f) in pred.data().iter().zip(truth.data()).zip(fov.data()) {
        if f == 1 {
            scores.push(f64::from(p));
            labels.push(t == 1);
        }
    }
    if scores.is_empty() {
        return Err(Error::EmptyFov);
    }
    roc_auc_scores(&scores, &labels)
}

pub const OVERLAY_RED: [f32; 3] = [1.0, 0.0, 0.0];
pub const OVERLAY_WHITE: [f32; 3] = [1.0, 1.0, 1.0];

/// Black background, truth in white, prediction in red drawn on top.
pub fn render_overlay(pred: &BinaryMask, truth: &BinaryMask) -> Result<ImagePlane> {
    check_masks(truth, &[("prediction", (pred.width(), pred.height()))])?;
    let mut data = Vec::with_capacity(truth.data().len() * 3);
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        let px = if p == 1 {
            OVERLAY_RED
        } else if t == 1 {
            OVERLAY_WHITE
        } else {
            [0.0; 3]
        };
        data.extend_from_slice(&px);
    }
    ImagePlane::new(truth.width(), truth.height(), 3, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut s = 0.0;
        let mut pairs = 0.0;
        for (i, &a) in scores.iter().enumerate() {
            for (j, &b) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    s += if a > b {
                        1.0
                    } else if a == b {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        s / pairs
    }

    fn row(vals: &[f32]) -> ProbabilityMap {
        ProbabilityMap::new(vals.len(), 1, vals.to_vec()).unwrap()
    }

    fn mask(bits: &[u8]) -> BinaryMask {
        BinaryMask::new(bits.len(), 1, bits.to_vec()).unwrap()
    }

    #[test]
    fn three_pixel_confusion() {
        let c = confusion(&row(&[0.9, 0.4, 0.6]), &mask(&[1, 0, 1]), &mask(&[1, 1, 1]), 0.5).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, tn: 1, fp: 0, fn_: 0 });
        let empty = confusion(&row(&[0.9, 0.4, 0.6]), &mask(&[1, 0, 1]), &mask(&[0, 0, 0]), 0.5).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(matches!(accuracy(&empty), Err(Error::EmptyFov)));
    }

    #[test]
    fn threshold_is_inclusive() {
        let c = confusion(&row(&[0.5]), &mask(&[1]), &mask(&[1]), 0.5).unwrap();
        assert_eq!(c.tp, 1);
        assert!(confusion(&row(&[0.5]), &mask(&[1]), &mask(&[1]), 1.5).is_err());
    }

    #[test]
    fn accuracy_examples() {
        let c = ConfusionCounts { tp: 2, tn: 1, fp: 0, fn_: 1 };
        assert_eq!(accuracy(&c).unwrap(), 0.75);
        assert_eq!(accuracy(&ConfusionCounts { tp: 0, tn: 0, fp: 3, fn_: 1 }).unwrap(), 0.0);
        assert_eq!(accuracy(&ConfusionCounts { tp: 5, tn: 7, fp: 0, fn_: 0 }).unwrap(), 1.0);
    }

    #[test]
    fn dice_examples() {
        let fov = mask(&[1; 6]);
        let p = mask(&[1, 1, 1, 1, 0, 0]);
        let t = mask(&[0, 0, 1, 1, 0, 0]);
        assert!((dice(&p, &t, &fov).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(dice(&p, &p, &fov).unwrap(), 1.0);
        assert_eq!(dice(&mask(&[1, 0, 0, 0, 0, 0]), &mask(&[0, 1, 0, 0, 0, 0]), &fov).unwrap(), 0.0);
        assert_eq!(dice(&mask(&[0; 6]), &mask(&[0; 6]), &fov).unwrap(), 1.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc_scores(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert_eq!(roc_auc_scores(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert_eq!(roc_auc_scores(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert!(matches!(
            roc_auc_scores(&[0.1, 0.2], &[true, true]),
            Err(Error::DegenerateTruth(_))
        ));
        assert!(matches!(
            roc_auc(&row(&[0.1, 0.2]), &mask(&[1, 0]), &mask(&[0, 0])),
            Err(Error::EmptyFov)
        ));
    }

    #[test]
    fn overlay_colors() {
        let p = mask(&[1, 1, 0, 0]);
        let t = mask(&[1, 0, 1, 0]);
        let o = render_overlay(&p, &t).unwrap();
        let px = |x| [o.get(x, 0, 0), o.get(x, 0, 1), o.get(x, 0, 2)];
        assert_eq!(px(0), OVERLAY_RED);
        assert_eq!(px(1), OVERLAY_RED);
        assert_eq!(px(2), OVERLAY_WHITE);
        assert_eq!(px(3), [0.0; 3]);
        assert!(render_overlay(&mask(&[1]), &t).is_err());
    }

    #[test]
    fn size_mismatch_is_reported() {
        let e = confusion(&row(&[0.1, 0.2]), &mask(&[1, 0, 1]), &mask(&[1, 1, 1]), 0.5).unwrap_err();
        assert!(matches!(e, Error::DimensionMismatch { .. }));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..120).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![(0u8..10).prop_map(|k| k as f64 / 10.0), 0.0f64..1.0], n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pair_count((scores, labels) in instance()) {
            let p = labels.iter().filter(|&&l| l).count();
            prop_assume!(p > 0 && p < labels.len());
            let fast = roc_auc_scores(&scores, &labels).unwrap();
            prop_assert!((fast - brute_auc(&scores, &labels)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&fast));
        }

        #[test]
        fn auc_rank_invariant((scores, labels) in instance()) {
            let p = labels.iter().filter(|&&l| l).count();
            prop_assume!(p > 0 && p < labels.len());
            let cubed: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
            let a = roc_auc_scores(&scores, &labels).unwrap();
            let b = roc_auc_scores(&cubed, &labels).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn dice_symmetric_and_exact(
            bits in prop::collection::vec((0u8..2, 0u8..2, 0u8..2), 1..200)
        ) {
            let p = mask(&bits.iter().map(|b| b.0).collect::<Vec<_>>());
            let t = mask(&bits.iter().map(|b| b.1).collect::<Vec<_>>());
            let f = mask(&bits.iter().map(|b| b.2).collect::<Vec<_>>());
            let d = dice(&p, &t, &f).unwrap();
            prop_assert_eq!(d, dice(&t, &p, &f).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
            let same = bits.iter().all(|b| b.2 == 0 || b.0 == b.1);
            prop_assert_eq!(d == 1.0, same);
        }

        #[test]
        fn non_fov_pixels_do_not_count(
            bits in prop::collection::vec((0.0f32..1.0, 0u8..2, 0u8..2, 0.0f32..1.0, 0u8..2), 1..200)
        ) {
            let fov = mask(&bits.iter().map(|b| b.2).collect::<Vec<_>>());
            let t = mask(&bits.iter().map(|b| b.1).collect::<Vec<_>>());
            let p = row(&bits.iter().map(|b| b.0).collect::<Vec<_>>());
            let p2 = row(&bits.iter().map(|b| if b.2 == 1 { b.0 } else { b.3 }).collect::<Vec<_>>());
            let t2 = mask(&bits.iter().map(|b| if b.2 == 1 { b.1 } else { b.4 }).collect::<Vec<_>>());
            prop_assert_eq!(confusion(&p, &t, &fov, 0.5).unwrap(), confusion(&p2, &t2, &fov, 0.5).unwrap());
            let c = confusion(&p, &t, &fov, 0.5).unwrap();
            prop_assert_eq!(c.total() as usize, fov.count_ones());
        }
    }
}
