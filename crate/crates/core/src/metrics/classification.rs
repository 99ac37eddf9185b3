use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::ot::w2_distance;

/// Label of the W2-nearest prototype for each test measure; ties go to the
/// smallest label.
pub fn classify_nearest_prototype<L>(test: &[DiscreteMeasure], prototypes: &BTreeMap<L, DiscreteMeasure>) -> Result<Vec<L>>
where
    L: Ord + Clone + Send + Sync,
{
    if prototypes.is_empty() {
        return Err(Error::Empty("prototypes"));
    }
    test.par_iter()
        .map(|mu| {
            let mut best: Option<(&L, f64)> = None;
            for (label, proto) in prototypes {
                let d = w2_distance(mu, proto)?;
                if best.map_or(true, |(_, b)| d < b) {
                    best = Some((label, d));
                }
            }
            Ok(best.expect("nonempty").0.clone())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy and macro-averaged precision, recall and F1 over every label
/// seen in either sequence. Undefined ratios count as 0.
pub fn classification_report<L: Ord>(predicted: &[L], truth: &[L]) -> Result<ClassificationReport> {
    if predicted.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions but {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let classes: BTreeSet<&L> = predicted.iter().chain(truth).collect();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for class in &classes {
        let tp = predicted.iter().zip(truth).filter(|(p, t)| p == class && t == class).count();
        let pred = predicted.iter().filter(|p| p == class).count();
        let actual = truth.iter().filter(|t| t == class).count();
        let (p, r) = (ratio(tp, pred), ratio(tp, actual));
        p_sum += p;
        r_sum += r;
        f_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let k = classes.len() as f64;
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(ClassificationReport {
        accuracy: ratio(correct, truth.len()),
        precision: p_sum / k,
        recall: r_sum / k,
        f1: f_sum / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn prototype_cases() {
        let mut protos = BTreeMap::new();
        protos.insert("a", DiscreteMeasure::dirac(&[0.0]).unwrap());
        protos.insert("b", DiscreteMeasure::dirac(&[10.0]).unwrap());
        let test = vec![
            DiscreteMeasure::dirac(&[3.0]).unwrap(),
            DiscreteMeasure::dirac(&[10.0]).unwrap(),
            DiscreteMeasure::dirac(&[5.0]).unwrap(),
        ];
        assert_eq!(classify_nearest_prototype(&test, &protos).unwrap(), vec!["a", "b", "a"]);
    }

    #[test]
    fn prototype_equal_to_test_wins() {
        let mut protos = BTreeMap::new();
        let m = DiscreteMeasure::uniform(array![[0.0, 0.0], [1.0, 2.0]]).unwrap();
        protos.insert(1u32, m.translated(array![0.5, 0.0].view()).unwrap());
        protos.insert(2u32, m.clone());
        assert_eq!(classify_nearest_prototype(&[m], &protos).unwrap(), vec![2]);
    }

    #[test]
    fn perfect_report() {
        let r = classification_report(&[0, 1, 1, 2], &[0, 1, 1, 2]).unwrap();
        assert_eq!(r, ClassificationReport { accuracy: 1.0, precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn single_class_predictions() {
        let r = classification_report(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert!((r.f1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.precision - 0.25).abs() < 1e-12);
        assert!((r.recall - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(classification_report::<u8>(&[], &[]).is_err());
        assert!(classification_report(&[0], &[0, 1]).is_err());
    }
}
