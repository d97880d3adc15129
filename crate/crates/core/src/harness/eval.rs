use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedSentence, RelationSchema};
use crate::discriminator::Discriminator;
use crate::error::{Error, Result};

/// One point of a precision-recall curve: the predictions with confidence
/// at or above `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
}

/// A ranked prediction for one test sentence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub relation: usize,
    pub confidence: f64,
    pub correct: bool,
}

/// Best non-NA relation for every sentence. A prediction is correct when
/// it equals a non-NA gold label.
pub fn predict(disc: &Discriminator, test: &[EncodedSentence], schema: &RelationSchema) -> Result<Vec<Prediction>> {
    if test.is_empty() {
        return Err(Error::Empty("test corpus"));
    }
    let candidates = schema.non_na();
    let na = schema.na_index();
    test.iter()
        .map(|s| {
            let out = disc.classify(s)?;
            let (relation, confidence) = out
                .best_among(&candidates)
                .ok_or(Error::Empty("non-NA relations"))?;
            Ok(Prediction {
                relation,
                confidence,
                correct: relation == s.relation && s.relation != na,
            })
        })
        .collect()
}

/// Sweeps the threshold over every distinct confidence, highest first.
/// `gold_positive` is the number of test sentences with a non-NA label.
pub fn pr_curve(predictions: &[Prediction], gold_positive: usize) -> Result<Vec<PrPoint>> {
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if gold_positive == 0 {
        return Err(Error::Empty("non-NA gold labels"));
    }
    if let Some(p) = predictions.iter().find(|p| !p.confidence.is_finite()) {
        return Err(Error::NonFinite(format!("confidence {}", p.confidence)));
    }
    let mut order: Vec<&Prediction> = predictions.iter().collect();
    // stable: equal confidences keep input order
    order.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut points = Vec::new();
    let mut correct = 0usize;
    for (k, p) in order.iter().enumerate() {
        correct += p.correct as usize;
        let last_of_tie = order.get(k + 1).is_none_or(|n| n.confidence != p.confidence);
        if last_of_tie {
            points.push(PrPoint {
                recall: correct as f64 / gold_positive as f64,
                precision: correct as f64 / (k + 1) as f64,
                threshold: p.confidence,
            });
        }
    }
    Ok(points)
}

/// Held-out precision-recall curve of `disc` on `test`.
pub fn held_out_eval(disc: &Discriminator, test: &[EncodedSentence], schema: &RelationSchema) -> Result<Vec<PrPoint>> {
    let preds = predict(disc, test, schema)?;
    let na = schema.na_index();
    let gold = test.iter().filter(|s| s.relation != na).count();
    pr_curve(&preds, gold)
}

/// Trapezoidal area under the curve over recall, starting from a point at
/// recall 0 with the precision of the first point.
pub fn auc(points: &[PrPoint]) -> Result<f64> {
    let first = points.first().ok_or(Error::Empty("PR points"))?;
    let mut area = 0.0;
    let (mut r0, mut p0) = (0.0, first.precision);
    for p in points {
        area += (p.recall - r0) * (p.precision + p0) / 2.0;
        (r0, p0) = (p.recall, p.precision);
    }
    Ok(area)
}

pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut s = String::from("threshold,recall,precision\n");
    for p in points {
        let _ = writeln!(s, "{:.10},{:.10},{:.10}", p.threshold, p.recall, p.precision);
    }
    s
}
