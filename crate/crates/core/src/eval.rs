//! Dataset-level evaluation of probability maps against vessel masks.
//!
//! Predictions are read as images (first channel, 8 or 16 bit) and treated as
//! per-pixel vessel scores. Stems present in both the prediction and truth
//! directories (and the fov directory, when one is given) are evaluated;
//! anything else is listed as unmatched.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::png_stems;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, confusion, dice_from_counts, roc_auc, ConfusionCounts};
use crate::png_io::{load_image, load_mask, write_atomic};
use crate::raster::{BinaryMask, ProbabilityMap};

pub const DEFAULT_THRESHOLD: f32 = 0.5;
pub const REPORT_JSONL: &str = "report.jsonl";
pub const REPORT_TABLE: &str = "report.txt";
/// Thresholds searched for the best mean accuracy are `k / THRESHOLD_STEPS`.
pub const THRESHOLD_STEPS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FovPolicy {
    /// Metrics restricted to the masks found in `dir`.
    Masks { dir: PathBuf },
    /// No fov given: every pixel counts.
    AllPixels,
}

impl std::fmt::Display for FovPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FovPolicy::Masks { dir } => write!(f, "restricted to fov masks in {}", dir.display()),
            FovPolicy::AllPixels => write!(f, "all pixels (no fov masks given)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageEval {
    pub stem: String,
    pub counts: ConfusionCounts,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    pub dice: Option<f64>,
    /// Set when the image is left out of the means.
    pub skipped: Option<String>,
    #[serde(skip)]
    sorted: Option<SortedScores>,
}

/// Fov scores split by label and sorted, for the threshold sweep.
#[derive(Debug, Clone, PartialEq)]
struct SortedScores {
    pos: Vec<f32>,
    neg: Vec<f32>,
}

impl SortedScores {
    fn accuracy_at(&self, t: f32) -> f64 {
        let fn_ = self.pos.partition_point(|&s| s < t);
        let tp = self.pos.len() - fn_;
        let tn = self.neg.partition_point(|&s| s < t);
        (tp + tn) as f64 / (self.pos.len() + self.neg.len()) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestThreshold {
    pub threshold: f32,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub threshold: f32,
    pub fov_policy: FovPolicy,
    pub images: Vec<ImageEval>,
    pub evaluated: usize,
    pub mean_accuracy: Option<f64>,
    pub mean_auc: Option<f64>,
    pub mean_dice: Option<f64>,
    /// Threshold on the `k/1000` grid maximizing mean accuracy. Informational;
    /// the headline numbers always use `threshold`.
    pub best_threshold: Option<BestThreshold>,
    pub unmatched: Vec<String>,
}

/// Scores one image. Degenerate truth or an empty fov yields a skipped record.
pub fn evaluate_image(
    stem: &str,
    pred: &ProbabilityMap,
    truth: &BinaryMask,
    fov: &BinaryMask,
    threshold: f32,
) -> Result<ImageEval> {
    let counts = confusion(pred, truth, fov, threshold)?;
    let skipped = |reason: String| {
        log::warn!("{stem}: skipped, {reason}");
        Ok(ImageEval {
            stem: stem.to_string(),
            counts,
            accuracy: None,
            auc: None,
            dice: None,
            skipped: Some(reason),
            sorted: None,
        })
    };
    let auc = match roc_auc(pred, truth, fov) {
        Ok(a) => a,
        Err(e @ (Error::DegenerateTruth(_) | Error::EmptyFov)) => return skipped(e.to_string()),
        Err(e) => return Err(e),
    };
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for ((&p, &t), &f) in pred.data().iter().zip(truth.data()).zip(fov.data()) {
        if f == 1 {
            (if t == 1 { &mut pos } else { &mut neg }).push(p);
        }
    }
    pos.sort_unstable_by(f32::total_cmp);
    neg.sort_unstable_by(f32::total_cmp);
    Ok(ImageEval {
        stem: stem.to_string(),
        counts,
        accuracy: Some(accuracy(&counts)?),
        auc: Some(auc),
        dice: Some(dice_from_counts(&counts)),
        skipped: None,
        sorted: Some(SortedScores { pos, neg }),
    })
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Folds per-image records, in the given order, into a report.
pub fn aggregate(images: Vec<ImageEval>, threshold: f32, fov_policy: FovPolicy, unmatched: Vec<String>) -> EvalReport {
    let scored: Vec<&SortedScores> = images.iter().filter_map(|i| i.sorted.as_ref()).collect();
    let best_threshold = (!scored.is_empty())
        .then(|| {
            (0..=THRESHOLD_STEPS)
                .map(|k| {
                    let t = k as f32 / THRESHOLD_STEPS as f32;
                    let m = scored.iter().map(|s| s.accuracy_at(t)).sum::<f64>() / scored.len() as f64;
                    BestThreshold {
                        threshold: t,
                        mean_accuracy: m,
                    }
                })
                .fold(None, |best: Option<BestThreshold>, c| match best {
                    Some(b) if b.mean_accuracy >= c.mean_accuracy => Some(b),
                    _ => Some(c),
                })
        })
        .flatten();
    EvalReport {
        threshold,
        fov_policy,
        evaluated: scored.len(),
        mean_accuracy: mean(images.iter().map(|i| i.accuracy)),
        mean_auc: mean(images.iter().map(|i| i.auc)),
        mean_dice: mean(images.iter().map(|i| i.dice)),
        best_threshold,
        images,
        unmatched,
    }
}

/// Evaluates every stem shared by `pred_dir` and `truth_dir` (and `fov_dir`).
pub fn evaluate_dataset(
    pred_dir: &Path,
    truth_dir: &Path,
    fov_dir: Option<&Path>,
    threshold: f32,
) -> Result<EvalReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::param(format!("threshold {threshold} outside [0, 1]")));
    }
    let preds = png_stems(pred_dir)?;
    let truths = png_stems(truth_dir)?;
    let fovs = fov_dir.map(png_stems).transpose()?;

    let mut stems = Vec::new();
    let mut unmatched = Vec::new();
    for stem in preds.keys().chain(truths.keys()) {
        let matched = preds.contains_key(stem)
            && truths.contains_key(stem)
            && fovs.as_ref().is_none_or(|f| f.contains_key(stem));
        let list = if matched { &mut stems } else { &mut unmatched };
        if !list.contains(stem) {
            list.push(stem.clone());
        }
    }
    stems.sort();
    unmatched.sort();
    if stems.is_empty() {
        return Err(Error::NoMatchingStems(pred_dir.to_path_buf(), truth_dir.to_path_buf()));
    }
    for u in &unmatched {
        log::warn!("{u}: no matching prediction/truth/fov, not evaluated");
    }

    let images = stems
        .par_iter()
        .map(|stem| {
            let run = || -> Result<ImageEval> {
                let pred = ProbabilityMap::from_plane(&load_image(&preds[stem])?);
                let truth = load_mask(&truths[stem])?.mask;
                let fov = match &fovs {
                    Some(f) => load_mask(&f[stem])?.mask,
                    None => BinaryMask::ones(truth.width(), truth.height())?,
                };
                evaluate_image(stem, &pred, &truth, &fov, threshold)
            };
            run().map_err(|e| e.in_sample(stem))
        })
        .collect::<Result<Vec<_>>>()?;

    let policy = match fov_dir {
        Some(d) => FovPolicy::Masks { dir: d.to_path_buf() },
        None => FovPolicy::AllPixels,
    };
    Ok(aggregate(images, threshold, policy, unmatched))
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

impl EvalReport {
    pub fn summary_line(&self) -> String {
        format!(
            "mean_auc={} mean_acc={} mean_dice={}",
            fmt_metric(self.mean_auc),
            fmt_metric(self.mean_accuracy),
            fmt_metric(self.mean_dice)
        )
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({
            "kind": "header",
            "threshold": self.threshold,
            "fov_policy": self.fov_policy,
            "images": self.images.len(),
            "evaluated": self.evaluated,
            "unmatched": self.unmatched,
        });
        out.push_str(&header.to_string());
        out.push('\n');
        for img in &self.images {
            let mut v = serde_json::to_value(img).expect("image record serializes");
            v["kind"] = "image".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let summary = serde_json::json!({
            "kind": "summary",
            "mean_accuracy": self.mean_accuracy,
            "mean_auc": self.mean_auc,
            "mean_dice": self.mean_dice,
            "best_threshold": self.best_threshold,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# evaluate --threshold {}", self.threshold);
        let _ = writeln!(s, "# fov: {}", self.fov_policy);
        let w = self.images.iter().map(|i| i.stem.len()).max().unwrap_or(0).max(5);
        let _ = writeln!(
            s,
            "{:<w$}  {:>8}  {:>8}  {:>8}  {:>10}  {:>10}  {:>10}  {:>10}  note",
            "stem", "auc", "acc", "dice", "tp", "fp", "tn", "fn"
        );
        for i in &self.images {
            let c = i.counts;
            let _ = writeln!(
                s,
                "{:<w$}  {:>8}  {:>8}  {:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {}",
                i.stem,
                fmt_metric(i.auc),
                fmt_metric(i.accuracy),
                fmt_metric(i.dice),
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                i.skipped.as_deref().map_or(String::new(), |r| format!("skipped: {r}"))
            );
        }
        let _ = writeln!(
            s,
            "{:<w$}  {:>8}  {:>8}  {:>8}  ({} of {} images)",
            "mean",
            fmt_metric(self.mean_auc),
            fmt_metric(self.mean_accuracy),
            fmt_metric(self.mean_dice),
            self.evaluated,
            self.images.len()
        );
        if let Some(b) = self.best_threshold {
            let _ = writeln!(
                s,
                "# best threshold by mean accuracy (reported separately): {} mean_acc={:.6}",
                b.threshold, b.mean_accuracy
            );
        }
        for u in &self.unmatched {
            let _ = writeln!(s, "# unmatched: {u}");
        }
        s
    }

    /// Writes `report.jsonl` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join(REPORT_JSONL), self.to_jsonl().as_bytes())?;
        write_atomic(&dir.join(REPORT_TABLE), self.to_table().as_bytes())
    }
}
