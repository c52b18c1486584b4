//! Finite-statistics sampling of a Bell scenario.
//!
//! Each shot picks one of the four setting pairs uniformly and draws a binned
//! outcome pair from that pair's exact joint table. Shots are processed in
//! fixed-size chunks; chunk `c` uses the ChaCha8 stream `c` of the seed, so the
//! counts do not depend on how chunks are scheduled across threads.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bell::chsh_max;
use crate::fock::MixedTwoModeState;
use crate::measurement::{scenario, Pair, ScenarioTables, Setting};
use crate::{Error, Result};

const CHUNK: u64 = 1 << 16;

/// Sampled CHSH estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub shots: u64,
    pub seed: u64,
    pub s_hat: f64,
    pub std_err: f64,
    /// Exact value for the same arrangement.
    pub s_exact: f64,
    /// Shots that landed on each setting pair, in [`Pair::ALL`] order.
    pub pair_shots: [u64; 4],
    /// False when some setting pair received no shots.
    pub valid: bool,
}

#[derive(Clone, Copy, Default)]
struct Counts {
    shots: [u64; 4],
    equal: [u64; 4],
}

impl Counts {
    fn merge(mut self, other: Counts) -> Counts {
        for k in 0..4 {
            self.shots[k] += other.shots[k];
            self.equal[k] += other.equal[k];
        }
        self
    }
}

fn sample_chunk(tables: &ScenarioTables, seed: u64, chunk: u64, n: u64) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let cumulative: Vec<[f64; 3]> = tables
        .tables()
        .iter()
        .map(|t| {
            let [pp, pm, mp, _] = t.entries();
            [pp, pp + pm, pp + pm + mp]
        })
        .collect();
    let mut counts = Counts::default();
    for _ in 0..n {
        let pair = rng.random_range(0..4usize);
        let u: f64 = rng.random();
        let c = &cumulative[pair];
        // (++) and (−−) are the equal-outcome cells.
        let equal = u < c[0] || u >= c[2];
        counts.shots[pair] += 1;
        counts.equal[pair] += u64::from(equal);
    }
    counts
}

/// Samples `shots` rounds of the scenario defined by `state` and the four
/// settings, and estimates the CHSH value in the arrangement that maximizes
/// the exact value.
pub fn mc_sample(
    state: &MixedTwoModeState,
    alice: [&Setting; 2],
    bob: [&Setting; 2],
    shots: u64,
    seed: u64,
) -> Result<McEstimate> {
    let tables = scenario(state, alice[0], alice[1], bob[0], bob[1])?;
    mc_sample_tables(&tables, shots, seed)
}

/// As [`mc_sample`], starting from exact tables.
pub fn mc_sample_tables(tables: &ScenarioTables, shots: u64, seed: u64) -> Result<McEstimate> {
    if shots < 4 {
        return Err(Error::domain(format!("need at least 4 shots, got {shots}")));
    }
    let exact = chsh_max(tables);
    let chunks = shots.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = CHUNK.min(shots - c * CHUNK);
            sample_chunk(tables, seed, c, n)
        })
        .reduce(Counts::default, Counts::merge);

    let valid = counts.shots.iter().all(|&n| n > 0);
    let mut s_hat = 0.0;
    let mut var = 0.0;
    for pair in Pair::ALL {
        let k = pair.index();
        let n = counts.shots[k];
        let sign = if pair == exact.minus { -exact.sign } else { exact.sign };
        if n == 0 {
            s_hat = f64::NAN;
            var = f64::NAN;
            continue;
        }
        let e = (2.0 * counts.equal[k] as f64 - n as f64) / n as f64;
        s_hat += sign * e;
        var += (1.0 - e * e) / n as f64;
    }
    Ok(McEstimate {
        shots,
        seed,
        s_hat,
        std_err: var.sqrt(),
        s_exact: exact.s,
        pair_shots: counts.shots,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::psi2_scenario;

    #[test]
    fn same_seed_same_estimate() {
        let st = psi2_scenario(1.0, 1.0, 0.83).unwrap();
        let a = mc_sample_tables(&st, 200_000, 7).unwrap();
        let b = mc_sample_tables(&st, 200_000, 7).unwrap();
        assert_eq!(a.s_hat.to_bits(), b.s_hat.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
        let c = mc_sample_tables(&st, 200_000, 8).unwrap();
        assert_ne!(a.s_hat, c.s_hat);
    }

    #[test]
    fn chunking_is_schedule_independent() {
        let st = psi2_scenario(0.95, 0.9, 0.8).unwrap();
        let shots = 3 * CHUNK + 17;
        let parallel = mc_sample_tables(&st, shots, 99).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| mc_sample_tables(&st, shots, 99).unwrap());
        assert_eq!(parallel, serial);
        assert_eq!(parallel.pair_shots.iter().sum::<u64>(), shots);
    }

    #[test]
    fn estimate_near_exact() {
        let st = psi2_scenario(1.0, 1.0, 0.83).unwrap();
        let est = mc_sample_tables(&st, 400_000, 2024).unwrap();
        assert!(est.valid);
        assert!(est.std_err > 0.0);
        assert!((est.s_hat - est.s_exact).abs() < 4.0 * est.std_err);
    }

    #[test]
    fn unsampled_pair_is_flagged() {
        let st = psi2_scenario(1.0, 1.0, 0.83).unwrap();
        let seed = (0..1000u64)
            .find(|&s| !mc_sample_tables(&st, 4, s).unwrap().valid)
            .expect("some seed leaves a pair unsampled with 4 shots");
        let est = mc_sample_tables(&st, 4, seed).unwrap();
        assert!(!est.valid);
        assert!(est.s_hat.is_nan());
        assert!(est.pair_shots.contains(&0));
    }

    #[test]
    fn too_few_shots() {
        let st = psi2_scenario(1.0, 1.0, 0.83).unwrap();
        assert!(mc_sample_tables(&st, 3, 1).is_err());
    }
}
