//! Classification-side uncertainty scoring and threshold-free evaluation:
//! mean-softmax and sample-spread scores, ROC and precision-recall curves
//! with correctly classified records as positives, the Youden operating
//! point, and rejection fractions at a threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for probability vectors.
pub const ROW_SUM_TOL: f64 = 1e-6;

/// Ground-truth class plus a K x C stack of softmax probability rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub gt_class: usize,
    pub probs: Vec<Vec<f64>>,
}

impl ClassificationRecord {
    /// Validates entries in the unit interval and row sums within 1e-6 of
    /// one; rows inside the tolerance are renormalized to sum exactly to one.
    pub fn new(gt_class: usize, mut probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidRecord("record has no sample rows".into()));
        }
        let c = probs[0].len();
        if c < 2 {
            return Err(Error::InvalidRecord(format!(
                "need at least 2 classes, got {c}"
            )));
        }
        if gt_class >= c {
            return Err(Error::InvalidRecord(format!(
                "gt class {gt_class} out of range for {c} classes"
            )));
        }
        for row in probs.iter_mut() {
            if row.len() != c {
                return Err(Error::InvalidRecord(format!(
                    "ragged probability rows: {} vs {c}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for &p in row.iter() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidRecord(format!(
                        "probability {p} outside [0,1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidRecord(format!(
                    "row sum {sum} outside tolerance"
                )));
            }
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
        Ok(Self { gt_class, probs })
    }

    pub fn n_samples(&self) -> usize {
        self.probs.len()
    }

    pub fn n_classes(&self) -> usize {
        self.probs[0].len()
    }
}

/// Arithmetic mean of the K softmax rows.
pub fn mean_softmax(r: &ClassificationRecord) -> Vec<f64> {
    let k = r.probs.len() as f64;
    let c = r.n_classes();
    let mut mean = vec![0.0; c];
    for row in &r.probs {
        for (m, p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    for m in mean.iter_mut() {
        *m /= k;
    }
    mean
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

fn entropy_nats(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// Uncertainty score families. All are oriented so that higher means more
/// uncertain; entropies are in nats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// 1 - max of the mean softmax.
    MaxProb,
    /// Entropy of the mean softmax.
    Entropy,
    /// Unbiased variance across samples of the probability assigned to the
    /// winning class of the mean softmax.
    WinVar,
    /// Mutual information: H(mean softmax) - mean per-sample entropy.
    Mi,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 4] = [
        ScoreKind::MaxProb,
        ScoreKind::Entropy,
        ScoreKind::WinVar,
        ScoreKind::Mi,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScoreKind::MaxProb => "max_prob",
            ScoreKind::Entropy => "entropy",
            ScoreKind::WinVar => "win_var",
            ScoreKind::Mi => "mi",
        }
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Computes one uncertainty score for a record. `WinVar` and `Mi` need at
/// least two samples.
pub fn score(r: &ClassificationRecord, kind: ScoreKind) -> Result<f64> {
    let mean = mean_softmax(r);
    match kind {
        ScoreKind::MaxProb => Ok(1.0 - mean[argmax(&mean)]),
        ScoreKind::Entropy => Ok(entropy_nats(&mean)),
        ScoreKind::WinVar => {
            let k = r.n_samples();
            if k < 2 {
                return Err(Error::NeedsSamples {
                    score: kind.name().into(),
                    affected: 1,
                });
            }
            let w = argmax(&mean);
            let vals: Vec<f64> = r.probs.iter().map(|row| row[w]).collect();
            let m = vals.iter().sum::<f64>() / k as f64;
            let ss: f64 = vals.iter().map(|v| (v - m) * (v - m)).sum();
            Ok(ss / (k - 1) as f64)
        }
        ScoreKind::Mi => {
            let k = r.n_samples();
            if k < 2 {
                return Err(Error::NeedsSamples {
                    score: kind.name().into(),
                    affected: 1,
                });
            }
            let h_mean = entropy_nats(&mean);
            let h_avg: f64 = r.probs.iter().map(|row| entropy_nats(row)).sum::<f64>() / k as f64;
            let mi = h_mean - h_avg;
            debug_assert!(mi > -1e-9, "mutual information below tolerance: {mi}");
            Ok(mi.max(0.0))
        }
    }
}

/// Variant of the winning-class variance where each sample votes with its
/// own argmax instead of the mean softmax's: the unbiased variance across
/// samples of the probability each row assigns to its own winner.
pub fn win_var_per_sample(r: &ClassificationRecord) -> Result<f64> {
    let k = r.n_samples();
    if k < 2 {
        return Err(Error::NeedsSamples {
            score: "win_var_per_sample".into(),
            affected: 1,
        });
    }
    let vals: Vec<f64> = r.probs.iter().map(|row| row[argmax(row)]).collect();
    let m = vals.iter().sum::<f64>() / k as f64;
    let ss: f64 = vals.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(ss / (k - 1) as f64)
}

/// A record reduced to the two things curve building needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    /// Whether the argmax of the mean softmax equals the ground truth.
    pub correct: bool,
    /// Chosen uncertainty score, higher = more uncertain.
    pub uncertainty: f64,
}

/// Scores a whole dataset with one score kind. Counts every record that
/// cannot be scored (single-sample records with `WinVar`/`Mi`) and reports
/// them in the error.
pub fn score_records(
    records: &[ClassificationRecord],
    kind: ScoreKind,
) -> Result<Vec<ScoredRecord>> {
    if matches!(kind, ScoreKind::WinVar | ScoreKind::Mi) {
        let affected = records.iter().filter(|r| r.n_samples() < 2).count();
        if affected > 0 {
            return Err(Error::NeedsSamples {
                score: kind.name().into(),
                affected,
            });
        }
    }
    records
        .iter()
        .map(|r| {
            let mean = mean_softmax(r);
            Ok(ScoredRecord {
                correct: argmax(&mean) == r.gt_class,
                uncertainty: score(r, kind)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Roc,
    Pr,
}

/// One curve point: the confidence threshold (classify as positive when
/// confidence >= threshold, confidence being the negated uncertainty) and
/// the (x, y) coordinates (FPR/TPR for ROC, recall/precision for PR).
///
/// The curve origin carries an infinite threshold, which JSON cannot hold as
/// a number; it round-trips through the string sentinel "inf".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(with = "serde_threshold")]
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

mod serde_threshold {
    use serde::de::{self, Deserializer, Unexpected, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or an \"inf\"/\"-inf\" sentinel")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    other => Err(E::invalid_value(Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Groups records into descending-confidence tie blocks:
/// (confidence, positives in block, negatives in block).
fn tie_blocks(scored: &[ScoredRecord]) -> Result<Vec<(f64, usize, usize)>> {
    if scored.iter().any(|s| !s.uncertainty.is_finite()) {
        return Err(Error::InvalidInput(
            "record uncertainties must be finite".into(),
        ));
    }
    let mut conf: Vec<(f64, bool)> = scored.iter().map(|s| (-s.uncertainty, s.correct)).collect();
    conf.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut blocks: Vec<(f64, usize, usize)> = Vec::new();
    for (c, correct) in conf {
        match blocks.last_mut() {
            Some((bc, tp, fp)) if *bc == c => {
                if correct {
                    *tp += 1;
                } else {
                    *fp += 1;
                }
            }
            _ => blocks.push((c, correct as usize, (!correct) as usize)),
        }
    }
    Ok(blocks)
}

/// ROC curve with correct records as positives. Ranking is by confidence
/// (negated uncertainty) descending; ties advance as one block so the curve
/// is order-independent; the area uses trapezoidal integration, which gives
/// ties half credit.
pub fn roc_curve(scored: &[ScoredRecord]) -> Result<CurveReport> {
    let positives = scored.iter().filter(|s| s.correct).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::OneClassOnly);
    }
    let p = positives as f64;
    let n = negatives as f64;
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut prev = (0.0f64, 0.0f64); // (fpr, tpr)
    for (c, btp, bfp) in tie_blocks(scored)? {
        tp += btp;
        fp += bfp;
        let cur = (fp as f64 / n, tp as f64 / p);
        auc += (cur.0 - prev.0) * (cur.1 + prev.1) / 2.0;
        points.push(CurvePoint {
            threshold: c,
            x: cur.0,
            y: cur.1,
        });
        prev = cur;
    }
    Ok(CurveReport {
        kind: CurveKind::Roc,
        points,
        auc,
        positives,
        negatives,
    })
}

/// Precision-recall curve, step-wise (average-precision) area. Ties advance
/// as one block; recall reaches 1 by construction.
pub fn pr_curve(scored: &[ScoredRecord]) -> Result<CurveReport> {
    let positives = scored.iter().filter(|s| s.correct).count();
    let negatives = scored.len() - positives;
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let p = positives as f64;
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 1.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let mut prev_recall = 0.0;
    for (c, btp, bfp) in tie_blocks(scored)? {
        tp += btp;
        fp += bfp;
        let recall = tp as f64 / p;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - prev_recall) * precision;
        points.push(CurvePoint {
            threshold: c,
            x: recall,
            y: precision,
        });
        prev_recall = recall;
    }
    Ok(CurveReport {
        kind: CurveKind::Pr,
        points,
        auc,
        positives,
        negatives,
    })
}

/// Operating threshold maximizing Youden's J = TPR - FPR over the ROC
/// points. Ties resolve toward the point rejecting fewest records, i.e. the
/// latest qualifying cut (the synthetic origin loses ties to real points).
pub fn youden_threshold(roc: &CurveReport) -> Result<f64> {
    if roc.points.len() < 2 {
        return Err(Error::DegenerateCurve);
    }
    let mut best = roc.points[0];
    let mut best_j = best.y - best.x;
    for pt in &roc.points[1..] {
        let j = pt.y - pt.x;
        if j >= best_j - 1e-15 {
            // >= keeps the latest maximizer: fewest rejections
            if j > best_j {
                best_j = j;
            }
            best = *pt;
        }
    }
    Ok(best.threshold)
}

/// Fractions rejected at a confidence threshold: records with confidence
/// strictly below it. Returns (fraction of incorrect records caught,
/// fraction of correct records collaterally rejected).
pub fn rejection_report(scored: &[ScoredRecord], threshold: f64) -> (f64, f64) {
    let mut caught = 0usize;
    let mut collateral = 0usize;
    let mut incorrect = 0usize;
    let mut correct = 0usize;
    for s in scored {
        let conf = -s.uncertainty;
        if s.correct {
            correct += 1;
            if conf < threshold {
                collateral += 1;
            }
        } else {
            incorrect += 1;
            if conf < threshold {
                caught += 1;
            }
        }
    }
    let frac = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    (frac(caught, incorrect), frac(collateral, correct))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(gt: usize, probs: Vec<Vec<f64>>) -> ClassificationRecord {
        ClassificationRecord::new(gt, probs).unwrap()
    }

    fn scored_from_conf(conf: &[(f64, bool)]) -> Vec<ScoredRecord> {
        conf.iter()
            .map(|&(c, correct)| ScoredRecord {
                correct,
                uncertainty: -c,
            })
            .collect()
    }

    /// The spec's running 4-record example: confidences 0.9 (correct),
    /// 0.8 (incorrect), 0.7 (correct), 0.6 (incorrect).
    fn four_records() -> Vec<ScoredRecord> {
        scored_from_conf(&[(0.9, true), (0.8, false), (0.7, true), (0.6, false)])
    }

    #[test]
    fn mean_softmax_single_row() {
        let r = rec(0, vec![vec![0.25, 0.75]]);
        assert_eq!(mean_softmax(&r), vec![0.25, 0.75]);
    }

    #[test]
    fn mean_softmax_symmetry_and_hand_mean() {
        let r = rec(0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(mean_softmax(&r), vec![0.5, 0.5]);
        let r = rec(0, vec![vec![0.6, 0.4], vec![0.8, 0.2], vec![0.7, 0.3]]);
        let m = mean_softmax(&r);
        assert!((m[0] - 0.7).abs() < 1e-12);
        assert!((m[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn scores_zero_for_identical_one_hot() {
        let r = rec(1, vec![vec![0.0, 1.0, 0.0]; 5]);
        for kind in ScoreKind::ALL {
            assert_eq!(score(&r, kind).unwrap(), 0.0, "{kind}");
        }
    }

    #[test]
    fn entropy_uniform_19_classes() {
        let c = 19;
        let r = rec(0, vec![vec![1.0 / c as f64; c]]);
        let h = score(&r, ScoreKind::Entropy).unwrap();
        assert!((h - (c as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn two_sample_hand_scores() {
        let r = rec(0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((score(&r, ScoreKind::MaxProb).unwrap() - 0.5).abs() < 1e-15);
        assert!((score(&r, ScoreKind::Entropy).unwrap() - 2.0f64.ln()).abs() < 1e-12);
        assert!((score(&r, ScoreKind::WinVar).unwrap() - 0.5).abs() < 1e-15);
        assert!((score(&r, ScoreKind::Mi).unwrap() - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn win_var_per_sample_uses_row_winners() {
        // rows (0.6, 0.4) and (0.3, 0.7): row winners carry 0.6 and 0.7,
        // unbiased variance 0.005; the mean-winner variant sees 0.4 and 0.7
        let r = rec(0, vec![vec![0.6, 0.4], vec![0.3, 0.7]]);
        let per_sample = win_var_per_sample(&r).unwrap();
        assert!((per_sample - 0.005).abs() < 1e-15);
        let mean_winner = score(&r, ScoreKind::WinVar).unwrap();
        assert!((mean_winner - 0.045).abs() < 1e-15);
    }

    #[test]
    fn sample_scores_need_two_samples() {
        let r = rec(0, vec![vec![0.6, 0.4]]);
        assert!(matches!(
            score(&r, ScoreKind::WinVar),
            Err(Error::NeedsSamples { .. })
        ));
        assert!(matches!(
            score(&r, ScoreKind::Mi),
            Err(Error::NeedsSamples { .. })
        ));
        assert!(score(&r, ScoreKind::MaxProb).is_ok());
    }

    #[test]
    fn record_validation() {
        assert!(ClassificationRecord::new(0, vec![vec![0.9, 0.0]]).is_err());
        assert!(ClassificationRecord::new(2, vec![vec![0.5, 0.5]]).is_err());
        // inside tolerance: renormalized
        let r = ClassificationRecord::new(0, vec![vec![0.5000002, 0.5000002]]).unwrap();
        let sum: f64 = r.probs[0].iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn roc_perfect_separation() {
        let scored = scored_from_conf(&[(0.9, true), (0.8, true), (0.3, false), (0.1, false)]);
        let roc = roc_curve(&scored).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points[0].threshold, f64::INFINITY);
        assert_eq!((roc.points[0].x, roc.points[0].y), (0.0, 0.0));
    }

    #[test]
    fn roc_four_record_example() {
        let roc = roc_curve(&four_records()).unwrap();
        // 3 of 4 correct-incorrect pairs correctly ordered
        assert!((roc.auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn roc_all_tied_is_diagonal() {
        let scored = scored_from_conf(&[(0.5, true), (0.5, false), (0.5, true), (0.5, false)]);
        let roc = roc_curve(&scored).unwrap();
        assert!((roc.auc - 0.5).abs() < 1e-15);
        assert_eq!(roc.points.len(), 2);
    }

    #[test]
    fn roc_one_class_only() {
        let scored = scored_from_conf(&[(0.9, true), (0.7, true)]);
        assert!(matches!(roc_curve(&scored), Err(Error::OneClassOnly)));
    }

    #[test]
    fn pr_all_positive() {
        let scored = scored_from_conf(&[(0.9, true), (0.7, true)]);
        let pr = pr_curve(&scored).unwrap();
        assert_eq!(pr.auc, 1.0);
    }

    #[test]
    fn pr_four_record_example_matches_exhaustive_sweep() {
        let scored = four_records();
        let pr = pr_curve(&scored).unwrap();
        // oracle: enumerate every distinct confidence cut by hand
        let mut confs: Vec<f64> = scored.iter().map(|s| -s.uncertainty).collect();
        confs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        confs.dedup();
        let p = scored.iter().filter(|s| s.correct).count() as f64;
        let mut expect = 0.0;
        let mut prev_recall = 0.0;
        for t in confs {
            let tp = scored
                .iter()
                .filter(|s| s.correct && -s.uncertainty >= t)
                .count() as f64;
            let fp = scored
                .iter()
                .filter(|s| !s.correct && -s.uncertainty >= t)
                .count() as f64;
            let recall = tp / p;
            let precision = tp / (tp + fp);
            expect += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        assert!((pr.auc - expect).abs() < 1e-15);
        assert!((pr.auc - 5.0 / 6.0).abs() < 1e-12);
        // recall endpoint
        assert_eq!(pr.points.last().unwrap().x, 1.0);
    }

    #[test]
    fn youden_perfect_separation_picks_last_positive() {
        let scored = scored_from_conf(&[(0.9, true), (0.8, true), (0.3, false), (0.1, false)]);
        let roc = roc_curve(&scored).unwrap();
        assert_eq!(youden_threshold(&roc).unwrap(), 0.8);
    }

    #[test]
    fn youden_diagonal_returns_single_real_point() {
        let scored = scored_from_conf(&[(0.5, true), (0.5, false)]);
        let roc = roc_curve(&scored).unwrap();
        // J = 0 everywhere; the tie rule prefers the cut with fewer rejections
        assert_eq!(youden_threshold(&roc).unwrap(), 0.5);
    }

    #[test]
    fn youden_four_record_example() {
        // J is maximal at the cuts after 0.9 and after 0.7; fewer rejections
        // selects the 0.7 cut.
        let roc = roc_curve(&four_records()).unwrap();
        let t = youden_threshold(&roc).unwrap();
        assert!((t - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejection_fractions() {
        // perfect separation at its Youden threshold: all incorrect caught,
        // no correct rejected
        let scored = scored_from_conf(&[(0.9, true), (0.8, true), (0.3, false), (0.1, false)]);
        let roc = roc_curve(&scored).unwrap();
        let t = youden_threshold(&roc).unwrap();
        assert_eq!(rejection_report(&scored, t), (1.0, 0.0));

        // everything above threshold
        assert_eq!(rejection_report(&scored, -1.0), (0.0, 0.0));

        // 4-record example at its Youden threshold
        let scored = four_records();
        let roc = roc_curve(&scored).unwrap();
        let t = youden_threshold(&roc).unwrap();
        assert_eq!(rejection_report(&scored, t), (0.5, 0.0));
    }
}
