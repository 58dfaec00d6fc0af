//! Evaluation metrics: confusion matrices, accuracy, MCC, hinge loss,
//! ROC AUC, Pearson correlation, and the dilution-regression accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// K×K contingency counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::input(format!(
                "truth has {} labels, predictions {}",
                truth.len(),
                pred.len()
            )));
        }
        if classes == 0 {
            return Err(Error::input("need at least one class"));
        }
        let mut counts = vec![0u64; classes * classes];
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= classes || p >= classes {
                return Err(Error::input(format!(
                    "label ({t}, {p}) outside {classes} classes"
                )));
            }
            counts[t * classes + p] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    /// Build from explicit binary counts (tn/fp/fn/tp order by row).
    pub fn binary(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        ConfusionMatrix {
            classes: 2,
            counts: vec![tn, fp, fn_, tp],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.count(i, i)).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.classes)
            .map(|i| (0..self.classes).map(|j| self.count(i, j)).sum())
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.classes)
            .map(|i| (0..self.classes).map(|j| self.count(i, j)).collect())
            .collect()
    }
}

/// Correct-prediction share in percent: 100 · trace / total.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::input("empty confusion matrix"));
    }
    Ok(100.0 * cm.trace() as f64 / total as f64)
}

/// Misclassification share in percent, defined as `100 − accuracy` so the
/// two always sum to exactly 100.
pub fn zero_one_loss(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(100.0 - accuracy(cm)?)
}

/// Matthews correlation coefficient of a binary matrix. A zero factor in
/// the denominator yields 0 by convention.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.classes() != 2 {
        return Err(Error::input(format!(
            "mcc needs a 2x2 matrix, got {0}x{0}",
            cm.classes()
        )));
    }
    let tn = cm.count(0, 0) as f64;
    let fp = cm.count(0, 1) as f64;
    let fn_ = cm.count(1, 0) as f64;
    let tp = cm.count(1, 1) as f64;
    let denom2 = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom2 == 0.0 {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * fn_) / denom2.sqrt())
}

/// Mean hinge loss of decision scores against ±1 labels.
pub fn mean_hinge_loss(scores: &[f64], truth_pm1: &[f64]) -> Result<f64> {
    if scores.len() != truth_pm1.len() {
        return Err(Error::input(format!(
            "{} scores vs {} labels",
            scores.len(),
            truth_pm1.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::input("no samples"));
    }
    let sum: f64 = scores
        .iter()
        .zip(truth_pm1)
        .map(|(&s, &y)| (1.0 - y * s).max(0.0))
        .sum();
    Ok(sum / scores.len() as f64)
}

/// ROC AUC: probability a random positive outscores a random negative, ties
/// counted one half. Computed by midrank statistics; the numerator is exact
/// integer arithmetic, so the result equals the all-pairs count bit for bit.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::input(format!(
            "{} scores vs {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::input("scores must be finite"));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::input("roc_auc needs both classes present"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Twice the positive rank sum, walking tie groups. For a tie group
    // occupying 0-based positions [lo, hi], twice the midrank is lo+hi+2.
    let mut twice_rank_sum: u128 = 0;
    let mut lo = 0usize;
    while lo < order.len() {
        let mut hi = lo;
        while hi + 1 < order.len() && scores[order[hi + 1]] == scores[order[lo]] {
            hi += 1;
        }
        let twice_midrank = (lo + hi + 2) as u128;
        for &idx in &order[lo..=hi] {
            if truth[idx] {
                twice_rank_sum += twice_midrank;
            }
        }
        lo = hi + 1;
    }

    let p = positives as u128;
    let numerator = twice_rank_sum - p * (p + 1);
    Ok(numerator as f64 / (2 * p * negatives as u128) as f64)
}

/// Product-moment correlation. Constant sequences are an error, not 0.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::input(format!("{} vs {} values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::input("pearson_r needs at least 2 samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::input("pearson_r undefined for a constant sequence"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Dilution-regression accuracy: `100 − mean |pred − target|`, floored at 0.
/// Units are dilution percentage points. This is a reconstruction — the
/// headline tables it mirrors never define their regression "accuracy" — and
/// is labeled as such wherever it is printed.
pub fn regression_accuracy(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::input(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::input("no samples"));
    }
    let mae = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64;
    Ok((100.0 - mae).max(0.0))
}

/// Per-epoch training curves recorded by the CNN trainer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochHistory {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    /// Present for binary tasks only.
    pub val_roc_auc: Vec<Option<f64>>,
}

impl EpochHistory {
    pub fn len(&self) -> usize {
        self.train_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_loss.is_empty()
    }
}

/// Everything one evaluation run reports. Which fields are present depends
/// on the model family; `zero_one_loss_percent` always equals
/// `100 − accuracy_percent` when both are set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_kind: String,
    pub label_set: Vec<String>,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<u64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_percent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_one_loss_percent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_hinge_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson_r: Option<f64>,
    /// 100 − mean absolute error in percentage points (reconstruction).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression_accuracy: Option<f64>,
    /// How many regression predictions hit the [0, 100] clamp.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamped_predictions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<EpochHistory>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One CSV header plus one row of headline metrics; absent metrics
    /// render as empty fields.
    pub fn to_csv(&self) -> String {
        fn cell(v: &Option<f64>) -> String {
            v.map(|x| format!("{x:.6}")).unwrap_or_default()
        }
        let header = "model_kind,samples,accuracy_percent,zero_one_loss_percent,\
mean_hinge_loss,mcc,roc_auc,pearson_r,regression_accuracy";
        format!(
            "{header}\n{},{},{},{},{},{},{},{},{}\n",
            self.model_kind,
            self.samples,
            cell(&self.accuracy_percent),
            cell(&self.zero_one_loss_percent),
            cell(&self.mean_hinge_loss),
            cell(&self.mcc),
            cell(&self.roc_auc),
            cell(&self.pearson_r),
            cell(&self.regression_accuracy),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn matching_predictions_give_a_diagonal_matrix() {
        let truth = vec![0, 1, 2, 1, 0];
        let cm = ConfusionMatrix::from_predictions(&truth, &truth, 3).unwrap();
        assert_eq!(cm.trace(), 5);
        assert_eq!(cm.total(), 5);
        assert_eq!(accuracy(&cm).unwrap(), 100.0);
    }

    #[test]
    fn hand_counted_binary_matrix() {
        let cm =
            ConfusionMatrix::from_predictions(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(cm.rows(), vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn empty_inputs_make_an_empty_matrix() {
        let cm = ConfusionMatrix::from_predictions(&[], &[], 2).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(accuracy(&cm).is_err(), "accuracy of an empty matrix is undefined");
    }

    #[test]
    fn mismatched_or_out_of_range_labels_are_rejected() {
        assert!(ConfusionMatrix::from_predictions(&[0, 1], &[0], 2).is_err());
        assert!(ConfusionMatrix::from_predictions(&[0, 2], &[0, 1], 2).is_err());
    }

    #[test]
    fn accuracy_of_the_cranberry_shaped_counts() {
        // TP=239, TN=239, FP=1, FN=1 → 478/480 ≈ 99.58%.
        let cm = ConfusionMatrix::binary(239, 1, 1, 239);
        let acc = accuracy(&cm).unwrap();
        assert!((acc - 100.0 * 478.0 / 480.0).abs() < 1e-12);
        assert_eq!(format!("{acc:.2}"), "99.58");
    }

    #[test]
    fn all_off_diagonal_scores_zero() {
        let cm = ConfusionMatrix::binary(0, 5, 5, 0);
        assert_eq!(accuracy(&cm).unwrap(), 0.0);
        assert_eq!(zero_one_loss(&cm).unwrap(), 100.0);
    }

    #[test]
    fn accuracy_and_loss_sum_to_exactly_100() {
        let mut rng = Stream::from_seed(17);
        for _ in 0..1000 {
            let cm = ConfusionMatrix::binary(
                rng.next_index(1000) as u64,
                rng.next_index(1000) as u64,
                rng.next_index(1000) as u64,
                rng.next_index(1000) as u64 + 1,
            );
            let a = accuracy(&cm).unwrap();
            let l = zero_one_loss(&cm).unwrap();
            assert_eq!(a + l, 100.0, "sum must be exact, got {a} + {l}");
        }
    }

    #[test]
    fn mcc_on_reference_matrices() {
        let perfect = ConfusionMatrix::binary(10, 0, 0, 10);
        assert_eq!(mcc(&perfect).unwrap(), 1.0);

        // TP=95 TN=95 FP=5 FN=5 → (9025−25)/10000 = 0.9
        let cm = ConfusionMatrix::binary(95, 5, 5, 95);
        assert!((mcc(&cm).unwrap() - 0.9).abs() < 1e-12);

        // Degenerate single-column predictions → 0 by convention.
        let one_sided = ConfusionMatrix::binary(10, 0, 10, 0);
        assert_eq!(mcc(&one_sided).unwrap(), 0.0);

        let multi = ConfusionMatrix::from_predictions(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert!(mcc(&multi).is_err());
    }

    #[test]
    fn mcc_matches_the_hand_formula_on_random_matrices() {
        let mut rng = Stream::from_seed(23);
        for _ in 0..1000 {
            let (tn, fp, fn_, tp) = (
                rng.next_index(50) as u64,
                rng.next_index(50) as u64,
                rng.next_index(50) as u64,
                rng.next_index(50) as u64,
            );
            let cm = ConfusionMatrix::binary(tn, fp, fn_, tp);
            let got = mcc(&cm).unwrap();
            let (tnf, fpf, fnf, tpf) = (tn as f64, fp as f64, fn_ as f64, tp as f64);
            let denom = ((tpf + fpf) * (tpf + fnf) * (tnf + fpf) * (tnf + fnf)).sqrt();
            let want = if denom == 0.0 {
                0.0
            } else {
                (tpf * tnf - fpf * fnf) / denom
            };
            assert_eq!(got, want);
            assert!((-1.0..=1.0).contains(&got));
        }
    }

    #[test]
    fn hinge_loss_reference_values() {
        assert_eq!(mean_hinge_loss(&[2.0, -3.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(mean_hinge_loss(&[0.5], &[1.0]).unwrap(), 0.5);
        assert_eq!(mean_hinge_loss(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(mean_hinge_loss(&[0.0], &[1.0, -1.0]).is_err());
    }

    #[test]
    fn roc_extremes() {
        let scores = [0.9, 0.8, 0.3, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);

        let swapped = [false, false, true, true];
        assert_eq!(roc_auc(&scores, &swapped).unwrap(), 0.0);

        let flat = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(roc_auc(&flat, &labels).unwrap(), 0.5);

        assert!(roc_auc(&scores, &[true, true, true, true]).is_err());
    }

    /// All-pairs oracle: count wins twice, ties once.
    fn roc_auc_brute(scores: &[f64], truth: &[bool]) -> f64 {
        let mut wins2: u128 = 0;
        let mut pairs: u128 = 0;
        for (i, &ti) in truth.iter().enumerate() {
            if !ti {
                continue;
            }
            for (j, &tj) in truth.iter().enumerate() {
                if tj {
                    continue;
                }
                pairs += 1;
                if scores[i] > scores[j] {
                    wins2 += 2;
                } else if scores[i] == scores[j] {
                    wins2 += 1;
                }
            }
        }
        wins2 as f64 / (2 * pairs) as f64
    }

    #[test]
    fn roc_equals_the_all_pairs_oracle_exactly() {
        let mut rng = Stream::from_seed(31);
        for case in 0..1000 {
            let n = 2 + rng.next_index(98);
            // Quantized scores force plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.next_index(12) as f64 / 4.0).collect();
            let mut truth: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.5).collect();
            truth[0] = true;
            truth[n - 1] = false;

            let fast = roc_auc(&scores, &truth).unwrap();
            let brute = roc_auc_brute(&scores, &truth);
            assert_eq!(fast.to_bits(), brute.to_bits(), "case {case}: {fast} vs {brute}");
        }
    }

    #[test]
    fn pearson_reference_values() {
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson_r(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn pearson_is_affine_invariant() {
        let mut rng = Stream::from_seed(41);
        let xs: Vec<f64> = (0..50).map(|_| rng.next_f64() * 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * x + rng.next_normal()).collect();
        let base = pearson_r(&xs, &ys).unwrap();
        let shifted: Vec<f64> = xs.iter().map(|&x| 2.5 * x + 40.0).collect();
        let scaled: Vec<f64> = ys.iter().map(|&y| 0.25 * y - 3.0).collect();
        let moved = pearson_r(&shifted, &scaled).unwrap();
        assert!((base - moved).abs() < 1e-12, "{base} vs {moved}");
    }

    #[test]
    fn regression_accuracy_reference_values() {
        let t = [0.0, 25.0, 50.0];
        assert_eq!(regression_accuracy(&t, &t).unwrap(), 100.0);

        let off: Vec<f64> = t.iter().map(|&v| v + 1.39).collect();
        let acc = regression_accuracy(&off, &t).unwrap();
        assert!((acc - 98.61).abs() < 1e-12);

        let wild: Vec<f64> = t.iter().map(|&v| v + 120.0).collect();
        assert_eq!(regression_accuracy(&wild, &t).unwrap(), 0.0);
    }

    #[test]
    fn confusion_row_sums_count_truth_labels() {
        let mut rng = Stream::from_seed(53);
        for _ in 0..200 {
            let n = 1 + rng.next_index(200);
            let k = 2 + rng.next_index(4);
            let truth: Vec<usize> = (0..n).map(|_| rng.next_index(k)).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.next_index(k)).collect();
            let cm = ConfusionMatrix::from_predictions(&truth, &pred, k).unwrap();
            let sums = cm.row_sums();
            for class in 0..k {
                let want = truth.iter().filter(|&&t| t == class).count() as u64;
                assert_eq!(sums[class], want);
            }
        }
    }

    #[test]
    fn report_serializes_and_round_trips() {
        let report = EvaluationReport {
            model_kind: "svm".into(),
            label_set: vec!["clean".into(), "contaminated".into()],
            samples: 400,
            confusion: Some(vec![vec![200, 0], vec![0, 200]]),
            accuracy_percent: Some(100.0),
            zero_one_loss_percent: Some(0.0),
            mean_hinge_loss: Some(0.01),
            mcc: Some(1.0),
            roc_auc: Some(1.0),
            ..EvaluationReport::default()
        };
        let json = report.to_json().unwrap();
        let back = EvaluationReport::from_json(&json).unwrap();
        assert_eq!(back.accuracy_percent, Some(100.0));
        assert_eq!(back.confusion.unwrap()[1][1], 200);

        let csv = report.to_csv();
        assert!(csv.contains("svm,400,100.000000,0.000000"));
        assert_eq!(csv.lines().count(), 2);
    }
}
