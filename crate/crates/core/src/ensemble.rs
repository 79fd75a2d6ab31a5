//! Seed splitting and parallel replica ensembles.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` derived from a master seed.
pub fn split_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Fraction of replicas allowed to fail before a run is abandoned.
pub const DEFAULT_FAILURE_BUDGET: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct ReplicaFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

/// Successful replicas in index order, with the failures set aside.
#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    pub master_seed: u64,
    pub requested: usize,
    pub indices: Vec<usize>,
    pub items: Vec<T>,
    pub failures: Vec<ReplicaFailure>,
}

impl<T> Ensemble<T> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> Vec<U> {
        self.items.iter().map(f).collect()
    }
}

/// Runs `f(index, seed)` for `n` replicas in parallel with seeds from
/// [`split_seed`]. Fails if more than `budget·n` replicas fail.
pub fn run_replicas<T, F>(n: usize, master_seed: u64, budget: f64, f: F) -> Result<Ensemble<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let results: Vec<(usize, u64, Result<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let seed = split_seed(master_seed, i as u64);
            (i, seed, f(i, seed))
        })
        .collect();
    let mut out = Ensemble {
        master_seed,
        requested: n,
        indices: Vec::with_capacity(n),
        items: Vec::with_capacity(n),
        failures: Vec::new(),
    };
    for (index, seed, r) in results {
        match r {
            Ok(v) => {
                out.indices.push(index);
                out.items.push(v);
            }
            Err(e) => out.failures.push(ReplicaFailure {
                index,
                seed,
                error: e.to_string(),
            }),
        }
    }
    if out.failures.len() as f64 > budget * n as f64 {
        return Err(Error::ReplicaBudget {
            failed: out.failures.len(),
            total: n,
            budget,
        });
    }
    Ok(out)
}
