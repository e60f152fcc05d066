use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::triplets::LabeledSample;
use crate::{Error, Result};

/// Run-level train/validation split.
///
/// Runs (not samples) are shuffled under `seed`; the first
/// `round(fraction * runs)` go to training. All triplets of a run land on the
/// same side. Sample order within each side is preserved.
pub fn split_dataset(
    samples: Vec<LabeledSample>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut runs: Vec<u32> =
        samples.iter().map(|s| s.run_id).collect::<BTreeSet<_>>().into_iter().collect();
    if runs.len() < 2 {
        return Err(Error::Config(format!(
            "run-level split needs at least 2 runs, found {}",
            runs.len()
        )));
    }
    runs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * runs.len() as f64).round() as usize).clamp(1, runs.len() - 1);
    let train_runs: BTreeSet<u32> = runs[..n_train].iter().copied().collect();
    Ok(samples.into_iter().partition(|s| train_runs.contains(&s.run_id)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NetInput;

    fn sample(run: u32, k: usize) -> LabeledSample {
        LabeledSample {
            run_id: run,
            input: NetInput::from_raw(1, 1, vec![0.0, 0.5, (k % 2) as f32]).unwrap(),
            target_value: k as f32,
            material_onehot: vec![1.0, 0.0],
        }
    }

    fn runs(n: u32, per: usize) -> Vec<LabeledSample> {
        (0..n).flat_map(|r| (0..per).map(move |k| sample(r, k))).collect()
    }

    #[test]
    fn ten_runs_split_eight_two() {
        let (train, val) = split_dataset(runs(10, 3), 0.8, 1).unwrap();
        let tr: BTreeSet<u32> = train.iter().map(|s| s.run_id).collect();
        let va: BTreeSet<u32> = val.iter().map(|s| s.run_id).collect();
        assert_eq!((tr.len(), va.len()), (8, 2));
        assert!(tr.is_disjoint(&va));
        assert_eq!(train.len() + val.len(), 30);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = split_dataset(runs(10, 2), 0.7, 42).unwrap();
        let b = split_dataset(runs(10, 2), 0.7, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_single_run_and_bad_fraction() {
        assert!(split_dataset(runs(1, 5), 0.5, 0).is_err());
        assert!(split_dataset(runs(4, 1), 1.0, 0).is_err());
        assert!(split_dataset(runs(4, 1), 0.0, 0).is_err());
    }
}
