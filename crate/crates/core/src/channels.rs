//! Photon loss on both optical paths.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::fock::{make_basis, make_psi2, MixedTwoModeState, PureTwoModeState, PSI2_CUTOFF};
use crate::{Error, Result};

/// Two branches closer than this in fidelity are merged into one.
const MERGE_TOL: f64 = 1e-14;

/// Intensity transmissions of Alice's and Bob's paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    t_a: f64,
    t_b: f64,
}

impl LossParams {
    /// Equal transmission `t` on both paths.
    pub fn symmetric(t: f64) -> Result<Self> {
        Self::asymmetric(t, t)
    }

    pub fn asymmetric(t_a: f64, t_b: f64) -> Result<Self> {
        for t in [t_a, t_b] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::domain(format!("transmission {t} outside [0, 1]")));
            }
        }
        Ok(LossParams { t_a, t_b })
    }

    pub fn t_a(&self) -> f64 {
        self.t_a
    }

    pub fn t_b(&self) -> f64 {
        self.t_b
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `⟨n−k|A_k|n⟩ = √(C(n,k) tⁿ⁻ᵏ (1−t)ᵏ)` for every `n ≥ k`.
fn kraus_column(t: f64, k: usize, cutoff: usize) -> Vec<f64> {
    (0..=cutoff)
        .map(|n| {
            if n < k {
                0.0
            } else {
                (binomial(n, k) * t.powi((n - k) as i32) * (1.0 - t).powi(k as i32)).sqrt()
            }
        })
        .collect()
}

/// Accumulates branches, merging those equal up to a global phase. Candidates
/// are bucketed by their support so distinct shapes are never compared.
#[derive(Default)]
struct BranchSet {
    branches: Vec<(f64, PureTwoModeState)>,
    by_support: HashMap<Vec<usize>, Vec<usize>>,
}

impl BranchSet {
    fn push(&mut self, weight: f64, state: PureTwoModeState) {
        let support: Vec<usize> = state
            .amps()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, _)| i)
            .collect();
        let bucket = self.by_support.entry(support).or_default();
        for &i in bucket.iter() {
            let (w, s) = &mut self.branches[i];
            if (s.inner(&state).norm_sqr() - 1.0).abs() < MERGE_TOL {
                *w += weight;
                return;
            }
        }
        bucket.push(self.branches.len());
        self.branches.push((weight, state));
    }
}

/// Applies independent pure-loss channels to both modes.
///
/// Each input branch splits into one branch per pair of lost-photon counts
/// `(k_A, k_B)`. Zero-weight branches are dropped, and branches that
/// describe the same pure state are merged.
pub fn apply_loss(state: &MixedTwoModeState, loss: LossParams) -> MixedTwoModeState {
    let cutoff = state.cutoff();
    let dim = cutoff + 1;
    let cols_a: Vec<Vec<f64>> = (0..dim).map(|k| kraus_column(loss.t_a, k, cutoff)).collect();
    let cols_b: Vec<Vec<f64>> = (0..dim).map(|k| kraus_column(loss.t_b, k, cutoff)).collect();

    let mut set = BranchSet::default();
    for (w, psi) in state.branches() {
        if *w == 0.0 {
            continue;
        }
        let top = psi.max_occupied();
        for k_a in 0..=top {
            for k_b in 0..=top {
                let mut amps = vec![Complex64::new(0.0, 0.0); dim * dim];
                let mut norm = 0.0;
                for n_a in k_a..dim {
                    for n_b in k_b..dim {
                        let c = psi.amp(n_a, n_b);
                        if c.norm_sqr() == 0.0 {
                            continue;
                        }
                        let v = c * cols_a[k_a][n_a] * cols_b[k_b][n_b];
                        amps[(n_a - k_a) * dim + (n_b - k_b)] = v;
                        norm += v.norm_sqr();
                    }
                }
                if norm == 0.0 {
                    continue;
                }
                let s = norm.sqrt();
                amps.iter_mut().for_each(|v| *v /= s);
                let branch = PureTwoModeState::new(cutoff, amps)
                    .expect("normalized Kraus branch has unit norm");
                set.push(w * norm, branch);
            }
        }
    }
    let mut out = set.branches;
    let total: f64 = out.iter().map(|(w, _)| w).sum();
    for (w, _) in &mut out {
        *w /= total;
    }
    MixedTwoModeState::new(out).expect("loss output is a valid mixture")
}

/// The lossy |Ψ₂⟩ mixture written out directly:
/// `t²|Ψ₂⟩⟨Ψ₂| + t(1−t)(|10⟩⟨10| + |01⟩⟨01|) + (1−t)²|00⟩⟨00|`.
pub fn closed_form_rho(t: f64) -> Result<MixedTwoModeState> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("transmission {t} outside [0, 1]")));
    }
    let c = PSI2_CUTOFF;
    let branches = vec![
        (t * t, make_psi2()),
        (t * (1.0 - t), make_basis(1, 0, c)?),
        (t * (1.0 - t), make_basis(0, 1, c)?),
        ((1.0 - t) * (1.0 - t), make_basis(0, 0, c)?),
    ];
    MixedTwoModeState::new(branches.into_iter().filter(|(w, _)| *w > 0.0).collect())
}
