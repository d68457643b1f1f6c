//! Accuracy and micro / macro F-scores against ground truth.

use serde::{Deserialize, Serialize};

use crate::model::GroundTruth;
use crate::numerics::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ClassScore<F: Real> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct ScoreCard<F: Real> {
    pub accuracy: F,
    pub micro_f1: F,
    pub macro_f1: F,
    pub per_class: Vec<ClassScore<F>>,
    /// Items with known truth.
    pub n_evaluated: usize,
    /// Classes absent from both predictions and truth (scored F1 = 0).
    pub absent_classes: Vec<usize>,
}

/// Scores `pred` on the items whose truth is known.
///
/// Empty precision / recall denominators count as 0.
pub fn score<F: Real>(pred: &[usize], truth: &GroundTruth, n_classes: usize) -> Result<ScoreCard<F>> {
    if pred.len() != truth.len() {
        return Err(Error::domain(format!(
            "{} predictions for {} truth entries",
            pred.len(),
            truth.len()
        )));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    let mut evaluated = 0;
    for (&p, t) in pred.iter().zip(truth.labels()) {
        let Some(t) = *t else { continue };
        if p >= n_classes {
            return Err(Error::domain(format!("predicted class {} outside {n_classes}", p + 1)));
        }
        evaluated += 1;
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::domain("no items with known truth to score"));
    }

    let ratio = |num: usize, den: usize| {
        if den == 0 {
            F::zero()
        } else {
            F::of_usize(num) / F::of_usize(den)
        }
    };
    let f1 = |p: F, r: F| {
        if p + r == F::zero() {
            F::zero()
        } else {
            F::lit(2.0) * p * r / (p + r)
        }
    };
    let mut absent_classes = Vec::new();
    let per_class: Vec<ClassScore<F>> = (0..n_classes)
        .map(|k| {
            if tp[k] + fp[k] + fn_[k] == 0 {
                absent_classes.push(k);
            }
            let precision = ratio(tp[k], tp[k] + fp[k]);
            let recall = ratio(tp[k], tp[k] + fn_[k]);
            ClassScore {
                precision,
                recall,
                f1: f1(precision, recall),
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<F>() / F::of_usize(n_classes);

    let (tp_all, fp_all, fn_all) = (
        tp.iter().sum::<usize>(),
        fp.iter().sum::<usize>(),
        fn_.iter().sum::<usize>(),
    );
    // pooled 2TP / (2TP + FP + FN); equals accuracy to the last bit here
    let micro_f1 = ratio(2 * tp_all, 2 * tp_all + fp_all + fn_all);
    Ok(ScoreCard {
        accuracy: ratio(tp_all, evaluated),
        micro_f1,
        macro_f1,
        per_class,
        n_evaluated: evaluated,
        absent_classes,
    })
}
