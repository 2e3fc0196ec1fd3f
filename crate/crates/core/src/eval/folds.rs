use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index of every row.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

/// Shuffles each class with `seed` and deals its rows round-robin into `k`
/// folds. The dealing position carries over from one class to the next
/// (classes in index order) so fold sizes also stay within one row of
/// each other.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(Error::Stratification("k must be at least 1".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    if let Some((c, m)) = members.iter().enumerate().find(|(_, m)| !m.is_empty() && m.len() < k) {
        return Err(Error::Stratification(format!(
            "class {c} has {} rows, fewer than k = {k}",
            m.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut cursor = 0;
    for rows in &mut members {
        rows.shuffle(&mut rng);
        for &i in rows.iter() {
            fold_of[i] = cursor % k;
            cursor += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ninety_ten_split() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        let folds = stratified_kfold(&labels, 5, 1).unwrap();
        for f in 0..5 {
            let test = folds.test_indices(f);
            let minority = test.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!((test.len() - minority, minority), (18, 2));
        }
    }

    #[test]
    fn degenerate_and_error_cases() {
        let folds = stratified_kfold(&[0, 1, 1, 0], 1, 0).unwrap();
        assert_eq!(folds.fold_of, vec![0; 4]);
        assert!(matches!(stratified_kfold(&[0, 0, 0, 1], 2, 0), Err(Error::Stratification(_))));
    }
}
