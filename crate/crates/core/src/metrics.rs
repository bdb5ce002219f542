//! Agreement between a label map and a ground-truth partition.

use ndarray::Array2;

use crate::admm::LabelMap;

/// Fraction of pixels on which `labels` agrees with `truth` under the best
/// one-to-one matching of truth classes to label codes.
pub fn matched_accuracy(labels: &LabelMap, truth: &Array2<u32>) -> f64 {
    assert_eq!(labels.dim(), truth.dim());
    let classes = truth.iter().copied().max().map_or(0, |m| m as usize + 1);
    let codes = 1usize << labels.n();
    let mut confusion = vec![vec![0usize; codes]; classes];
    for (&t, &l) in truth.iter().zip(labels.as_array().iter()) {
        confusion[t as usize][l as usize] += 1;
    }
    let mut used = vec![false; codes];
    let best = best_matching(&confusion, 0, &mut used);
    best as f64 / truth.len() as f64
}

fn best_matching(confusion: &[Vec<usize>], class: usize, used: &mut [bool]) -> usize {
    if class == confusion.len() {
        return 0;
    }
    let mut best = 0;
    let mut any_free = false;
    for code in 0..used.len() {
        if used[code] {
            continue;
        }
        any_free = true;
        used[code] = true;
        best = best.max(confusion[class][code] + best_matching(confusion, class + 1, used));
        used[code] = false;
    }
    if !any_free {
        // more classes than codes: this class scores nothing
        best = best_matching(confusion, class + 1, used);
    }
    best
}
