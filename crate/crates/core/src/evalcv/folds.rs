use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng_for;

const STREAM_FOLDS: u64 = 0x464f_4c44;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldStrategy {
    /// Sort by score, cut into `k` strata, deal each stratum round-robin.
    Stratified,
    Random,
}

impl fmt::Display for FoldStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoldStrategy::Stratified => "stratified",
            FoldStrategy::Random => "random",
        })
    }
}

impl FromStr for FoldStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stratified" => Ok(FoldStrategy::Stratified),
            "random" => Ok(FoldStrategy::Random),
            _ => Err(Error::Parse(format!(
                "unknown fold strategy {s:?} (expected stratified or random)"
            ))),
        }
    }
}

/// Assignment of original sample ids to folds.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    k: usize,
    strategy: FoldStrategy,
    seed: u64,
    // (sample_id, fold) in the order the ids were given
    assignments: Vec<(String, usize)>,
    index: HashMap<String, usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn strategy(&self) -> FoldStrategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignments(&self) -> &[(String, usize)] {
        &self.assignments
    }

    pub fn fold_of(&self, sample_id: &str) -> Option<usize> {
        self.index.get(sample_id).copied()
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.index.contains_key(sample_id)
    }

    /// Held-out ids of fold `fold`, in input order.
    pub fn validation_ids(&self, fold: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|(_, f)| *f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for (_, f) in &self.assignments {
            sizes[*f] += 1;
        }
        sizes
    }
}

/// Splits original samples, given as `(sample_id, raw score)`, into `k`
/// folds. Deterministic in `seed`.
///
/// Stratified plans sort by score, cut the ranking into `k` contiguous
/// strata and deal each stratum (shuffled) round-robin. The dealing counter
/// carries over between strata, so overall fold sizes also differ by at
/// most one.
pub fn make_folds(
    samples: &[(String, f64)],
    k: usize,
    strategy: FoldStrategy,
    seed: u64,
) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if samples.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} samples cannot fill {k} folds",
            samples.len()
        )));
    }
    let mut seen = HashSet::new();
    for (id, score) in samples {
        if score.is_nan() {
            return Err(Error::InvalidArgument(format!("{id}: NaN score")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate sample id {id:?}"
            )));
        }
    }
    let mut rng = rng_for(seed, STREAM_FOLDS);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    // shuffling first makes tie order within equal scores seed-dependent
    order.shuffle(&mut rng);
    let n = samples.len();
    let strata: Vec<Vec<usize>> = match strategy {
        FoldStrategy::Random => vec![order],
        FoldStrategy::Stratified => {
            order.sort_by(|&a, &b| samples[a].1.total_cmp(&samples[b].1));
            (0..k)
                .map(|s| order[s * n / k..(s + 1) * n / k].to_vec())
                .collect()
        }
    };
    let mut fold_ids: Vec<usize> = (0..k).collect();
    fold_ids.shuffle(&mut rng);
    let mut fold = vec![0usize; n];
    let mut counter = 0;
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        for i in stratum {
            fold[i] = fold_ids[counter % k];
            counter += 1;
        }
    }
    let assignments: Vec<(String, usize)> = samples
        .iter()
        .zip(&fold)
        .map(|((id, _), &f)| (id.clone(), f))
        .collect();
    let index = assignments.iter().cloned().collect();
    Ok(FoldPlan {
        k,
        strategy,
        seed,
        assignments,
        index,
    })
}
