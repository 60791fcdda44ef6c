use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Example index → fold index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    assignment: Vec<usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_of(&self, index: usize) -> usize {
        self.assignment[index]
    }

    /// Indices of the examples in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f == fold)
    }

    /// Indices of the examples outside `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.indices_where(|f| f != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    fn indices_where(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified k-fold assignment.
///
/// Each class's indices are shuffled with a seeded generator and dealt
/// round-robin. The negative class continues dealing where the positive class
/// stopped, so overall fold sizes and per-fold positive counts each differ by
/// at most one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::invalid(format!(
            "fold count {k} exceeds number of examples {}",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next_fold = 0;
    for class in [Label::Security, Label::NonSecurity] {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for idx in members {
            assignment[idx] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    }
    Ok(FoldAssignment { k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: usize, n: usize) -> Vec<Label> {
        (0..n).map(|i| Label::from_bool(i < pos)).collect()
    }

    #[test]
    fn ten_examples_two_positive() {
        let y = labels(2, 10);
        let f = stratified_folds(&y, 5, 3).unwrap();
        assert_eq!(f.fold_sizes(), vec![2; 5]);
        let mut pos_per_fold = [0; 5];
        for (i, l) in y.iter().enumerate() {
            if l.is_security() {
                pos_per_fold[f.fold_of(i)] += 1;
            }
        }
        assert_eq!(pos_per_fold.iter().filter(|&&c| c == 1).count(), 2);
        assert_eq!(pos_per_fold.iter().sum::<usize>(), 2);
    }

    #[test]
    fn leave_one_out_shape() {
        let f = stratified_folds(&labels(3, 7), 7, 0).unwrap();
        assert_eq!(f.fold_sizes(), vec![1; 7]);
    }

    #[test]
    fn invalid_k() {
        assert!(stratified_folds(&labels(2, 5), 6, 0).is_err());
        assert!(stratified_folds(&labels(2, 5), 1, 0).is_err());
    }

    #[test]
    fn train_and_test_partition() {
        let f = stratified_folds(&labels(4, 13), 3, 9).unwrap();
        for fold in 0..3 {
            let mut all = f.train_indices(fold);
            all.extend(f.test_indices(fold));
            all.sort_unstable();
            assert_eq!(all, (0..13).collect::<Vec<_>>());
        }
    }
}
