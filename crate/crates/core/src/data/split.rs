use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.788, seed: 0 }
    }
}

impl SplitSpec {
    /// Number of training rows out of `n`.
    ///
    /// Rounds up, with a small slack so products that land a hair above an
    /// integer (`0.7 * 10`) are not pushed to the next row.
    pub fn train_size(&self, n: usize) -> usize {
        let raw = n as f64 * self.train_fraction;
        ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

/// Shuffled `(train, test)` row indices; a pure function of `(n, spec)`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(DataError::InvalidFraction(spec.train_fraction));
    }
    let n_train = spec.train_size(n);
    if n_train == 0 || n_train == n {
        return Err(DataError::DegenerateSplit { train: n_train, test: n - n_train });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    if ds.n_rows() < 2 {
        return Err(DataError::DegenerateSplit { train: ds.n_rows(), test: 0 });
    }
    let (train, test) = split_indices(ds.n_rows(), spec)?;
    Ok((ds.select(&train), ds.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_reported_sizes() {
        let spec = SplitSpec { train_fraction: 0.788, seed: 17 };
        let (train, test) = split_indices(10443, &spec).unwrap();
        assert_eq!((train.len(), test.len()), (8230, 2213));
        assert_eq!(SplitSpec { train_fraction: 0.7, seed: 0 }.train_size(10), 7);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SplitSpec { train_fraction: 0.5, seed: 3 };
        assert_eq!(split_indices(100, &spec).unwrap(), split_indices(100, &spec).unwrap());
        let other = SplitSpec { seed: 4, ..spec };
        assert_ne!(split_indices(100, &spec).unwrap(), split_indices(100, &other).unwrap());
    }

    #[test]
    fn degenerate() {
        let full = SplitSpec { train_fraction: 1.0, seed: 0 };
        assert!(matches!(split_indices(10, &full), Err(DataError::DegenerateSplit { .. })));
        let tiny = SplitSpec { train_fraction: 0.01, seed: 0 };
        assert!(split_indices(2, &tiny).is_ok());
        assert!(matches!(
            split_indices(10, &SplitSpec { train_fraction: 0.0, seed: 0 }),
            Err(DataError::InvalidFraction(_))
        ));
    }

    proptest! {
        #[test]
        fn partition_covers_all_rows(n in 2usize..400, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let spec = SplitSpec { train_fraction: frac, seed };
            if let Ok((train, test)) = split_indices(n, &spec) {
                let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert!(!train.is_empty() && !test.is_empty());
            }
        }
    }
}
