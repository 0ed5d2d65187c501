use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

/// Subject-level partition into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub fold_of_subject: BTreeMap<String, usize>,
}

impl FoldAssignment {
    /// Shuffles subjects with `seed`, then gives each one to the currently
    /// smallest fold (lowest index on ties).
    pub fn balanced(subjects: &[String], k: usize, seed: u64) -> Result<Self> {
        if k == 0 || subjects.len() < k {
            return Err(Error::TooFewSubjects {
                subjects: subjects.len(),
                k,
            });
        }
        let mut order: Vec<&String> = subjects.iter().collect();
        order.sort();
        order.dedup();
        if order.len() < k {
            return Err(Error::TooFewSubjects {
                subjects: order.len(),
                k,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut sizes = vec![0usize; k];
        let mut fold_of_subject = BTreeMap::new();
        for s in order {
            let (fold, _) = sizes
                .iter()
                .enumerate()
                .min_by_key(|(i, n)| (**n, *i))
                .expect("k > 0");
            sizes[fold] += 1;
            fold_of_subject.insert(s.clone(), fold);
        }
        Ok(FoldAssignment {
            k,
            seed,
            fold_of_subject,
        })
    }

    pub fn fold_of(&self, subject: &str) -> Option<usize> {
        self.fold_of_subject.get(subject).copied()
    }

    pub fn subjects_in(&self, fold: usize) -> Vec<&str> {
        self.fold_of_subject
            .iter()
            .filter(|(_, f)| **f == fold)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for f in self.fold_of_subject.values() {
            sizes[*f] += 1;
        }
        sizes
    }
}

pub fn split_folds(c: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment> {
    FoldAssignment::balanced(&c.subjects, k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subjects(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:02}")).collect()
    }

    #[test]
    fn ten_subjects_five_folds() {
        let f = FoldAssignment::balanced(&subjects(10), 5, 1).unwrap();
        assert_eq!(f.fold_sizes(), vec![2; 5]);
    }

    #[test]
    fn eleven_subjects_five_folds() {
        let f = FoldAssignment::balanced(&subjects(11), 5, 3).unwrap();
        let mut sizes = f.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = FoldAssignment::balanced(&subjects(13), 5, 42).unwrap();
        let b = FoldAssignment::balanced(&subjects(13), 5, 42).unwrap();
        assert_eq!(a, b);
        let c = FoldAssignment::balanced(&subjects(13), 5, 43).unwrap();
        assert_ne!(a.fold_of_subject, c.fold_of_subject);
    }

    #[test]
    fn too_few_subjects() {
        assert!(matches!(
            FoldAssignment::balanced(&subjects(3), 5, 0),
            Err(Error::TooFewSubjects { subjects: 3, k: 5 })
        ));
    }

    proptest! {
        #[test]
        fn folds_partition_the_subjects(n in 1usize..40, k in 1usize..8, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let subs = subjects(n);
            let f = FoldAssignment::balanced(&subs, k, seed).unwrap();
            prop_assert_eq!(f.fold_of_subject.len(), n);
            for s in &subs {
                prop_assert!(f.fold_of(s).unwrap() < k);
            }
            let sizes = f.fold_sizes();
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
        }
    }
}
