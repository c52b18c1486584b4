//! Two-mode states in a truncated photon-number (Fock) basis.

use num_complex::Complex64;

use crate::{Error, Result};

/// Normalization slack accepted by the constructors.
pub const NORM_TOL: f64 = 1e-12;

/// Cutoff used for |Ψ₂⟩ and everything derived from it by loss.
pub const PSI2_CUTOFF: usize = 4;

/// Cutoff used by default for squeezed and cat states.
pub const DEFAULT_CUTOFF: usize = 60;

/// A normalized pure state of two bosonic modes A and B.
///
/// Amplitudes are stored row-major, `amps[n_a * (cutoff + 1) + n_b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureTwoModeState {
    cutoff: usize,
    amps: Vec<Complex64>,
}

impl PureTwoModeState {
    /// Builds a state from a full amplitude table, checking normalization.
    pub fn new(cutoff: usize, amps: Vec<Complex64>) -> Result<Self> {
        let dim = cutoff + 1;
        if amps.len() != dim * dim {
            return Err(Error::domain(format!(
                "expected {} amplitudes for cutoff {cutoff}, got {}",
                dim * dim,
                amps.len()
            )));
        }
        let state = PureTwoModeState { cutoff, amps };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("state norm² {norm} differs from 1")));
        }
        Ok(state)
    }

    /// Builds a state from an arbitrary non-zero table, dividing out its norm.
    pub fn normalized(cutoff: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::domain("cannot normalize a zero or non-finite state"));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::new(cutoff, amps)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Number of levels per mode, `cutoff + 1`.
    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn amp(&self, n_a: usize, n_b: usize) -> Complex64 {
        if n_a > self.cutoff || n_b > self.cutoff {
            return Complex64::new(0.0, 0.0);
        }
        self.amps[n_a * self.dim() + n_b]
    }

    /// Row-major amplitude table.
    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Re-embeds the state at a larger cutoff. Shrinking is allowed only when
    /// every dropped amplitude is exactly zero.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        let old = self.dim();
        let new = cutoff + 1;
        for n_a in 0..old {
            for n_b in 0..old {
                if (n_a >= new || n_b >= new) && self.amp(n_a, n_b) != Complex64::new(0.0, 0.0) {
                    return Err(Error::domain(format!(
                        "occupied level ({n_a}, {n_b}) lies above cutoff {cutoff}"
                    )));
                }
            }
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); new * new];
        for n_a in 0..old.min(new) {
            for n_b in 0..old.min(new) {
                amps[n_a * new + n_b] = self.amp(n_a, n_b);
            }
        }
        Ok(PureTwoModeState { cutoff, amps })
    }

    /// Largest photon number with non-zero amplitude in either mode.
    pub fn max_occupied(&self) -> usize {
        let dim = self.dim();
        let mut top = 0;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() > 0.0 {
                top = top.max(i / dim).max(i % dim);
            }
        }
        top
    }

    /// Mean photon numbers `(⟨n_A⟩, ⟨n_B⟩)`.
    pub fn mean_photons(&self) -> (f64, f64) {
        let dim = self.dim();
        let mut na = 0.0;
        let mut nb = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            na += p * (i / dim) as f64;
            nb += p * (i % dim) as f64;
        }
        (na, nb)
    }

    /// `⟨self|other⟩`; both states must share a cutoff.
    pub fn inner(&self, other: &PureTwoModeState) -> Complex64 {
        debug_assert_eq!(self.cutoff, other.cutoff);
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// A probabilistic mixture of pure two-mode states sharing one cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTwoModeState {
    branches: Vec<(f64, PureTwoModeState)>,
}

impl MixedTwoModeState {
    pub fn new(branches: Vec<(f64, PureTwoModeState)>) -> Result<Self> {
        let Some((_, first)) = branches.first() else {
            return Err(Error::domain("a mixture needs at least one branch"));
        };
        let cutoff = first.cutoff();
        let mut total = 0.0;
        for (w, s) in &branches {
            if !(*w >= 0.0) {
                return Err(Error::domain(format!("negative branch weight {w}")));
            }
            if s.cutoff() != cutoff {
                return Err(Error::domain("branches must share one cutoff"));
            }
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("branch weights sum to {total}")));
        }
        Ok(MixedTwoModeState { branches })
    }

    pub fn branches(&self) -> &[(f64, PureTwoModeState)] {
        &self.branches
    }

    pub fn cutoff(&self) -> usize {
        self.branches[0].1.cutoff()
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|(w, _)| w).sum()
    }

    pub fn mean_photons(&self) -> (f64, f64) {
        self.branches.iter().fold((0.0, 0.0), |(a, b), (w, s)| {
            let (na, nb) = s.mean_photons();
            (a + w * na, b + w * nb)
        })
    }

    /// Dense density operator over the joint basis, row-major with
    /// `(cutoff + 1)^2` rows. Intended for diagnostics and small cutoffs.
    pub fn density_matrix(&self) -> Vec<Complex64> {
        let n = self.cutoff() + 1;
        let size = n * n;
        let mut rho = vec![Complex64::new(0.0, 0.0); size * size];
        for (w, s) in &self.branches {
            let a = s.amps();
            for i in 0..size {
                if a[i] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..size {
                    rho[i * size + j] += *w * a[i] * a[j].conj();
                }
            }
        }
        rho
    }
}

impl From<PureTwoModeState> for MixedTwoModeState {
    fn from(state: PureTwoModeState) -> Self {
        MixedTwoModeState {
            branches: vec![(1.0, state)],
        }
    }
}

fn zeros(cutoff: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)]
}

/// `|n_a⟩|n_b⟩` at the given cutoff.
pub fn make_basis(n_a: usize, n_b: usize, cutoff: usize) -> Result<PureTwoModeState> {
    if n_a > cutoff || n_b > cutoff {
        return Err(Error::domain(format!(
            "basis index ({n_a}, {n_b}) exceeds cutoff {cutoff}"
        )));
    }
    let mut amps = zeros(cutoff);
    amps[n_a * (cutoff + 1) + n_b] = Complex64::new(1.0, 0.0);
    Ok(PureTwoModeState { cutoff, amps })
}

/// `(|2⟩|0⟩ + |0⟩|2⟩)/√2` at [`PSI2_CUTOFF`].
pub fn make_psi2() -> PureTwoModeState {
    let cutoff = PSI2_CUTOFF;
    let mut amps = zeros(cutoff);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[2 * (cutoff + 1)] = h;
    amps[2] = h;
    PureTwoModeState { cutoff, amps }
}

/// `(|1⟩|0⟩ + |0⟩|1⟩)/√2` at [`PSI2_CUTOFF`].
pub fn make_single_photon_path() -> PureTwoModeState {
    let cutoff = PSI2_CUTOFF;
    let mut amps = zeros(cutoff);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[cutoff + 1] = h;
    amps[1] = h;
    PureTwoModeState { cutoff, amps }
}

fn tmss_raw(lambda: f64, cutoff: usize) -> Result<Vec<Complex64>> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::domain(format!(
            "squeezing parameter {lambda} outside [0, 1)"
        )));
    }
    let pre = (1.0 - lambda * lambda).sqrt();
    let mut amps = zeros(cutoff);
    let mut c = pre;
    for n in 0..=cutoff {
        amps[n * (cutoff + 1) + n] = Complex64::new(c, 0.0);
        c *= lambda;
    }
    Ok(amps)
}

/// Squared norm of the truncated squeezed state before renormalization.
pub fn tmss_raw_norm_sqr(lambda: f64, cutoff: usize) -> Result<f64> {
    Ok(tmss_raw(lambda, cutoff)?.iter().map(|a| a.norm_sqr()).sum())
}

/// Probability weight discarded by truncating the squeezed state at `cutoff`.
pub fn tmss_tail_weight(lambda: f64, cutoff: usize) -> f64 {
    lambda.powi(2 * (cutoff as i32 + 1))
}

/// Smallest cutoff whose discarded squeezed-state weight is below `tol`.
pub fn tmss_min_cutoff(lambda: f64, tol: f64) -> usize {
    let mut cutoff = 0;
    while tmss_tail_weight(lambda, cutoff) >= tol {
        cutoff += 1;
    }
    cutoff
}

/// Two-mode squeezed vacuum `√(1−λ²) Σ λⁿ |n⟩|n⟩`, truncated at `cutoff`
/// and renormalized.
pub fn make_tmss(lambda: f64, cutoff: usize) -> Result<PureTwoModeState> {
    PureTwoModeState::normalized(cutoff, tmss_raw(lambda, cutoff)?)
}

fn cat_raw(alpha: f64, cutoff: usize) -> Result<Vec<Complex64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!(
            "cat amplitude must be positive, got {alpha}"
        )));
    }
    // Coherent-state amplitudes e^{-α²/2} αⁿ/√n!, built by ratio to avoid factorials.
    let mut coh = Vec::with_capacity(cutoff + 1);
    let mut c = (-0.5 * alpha * alpha).exp();
    for n in 0..=cutoff {
        if n > 0 {
            c *= alpha / (n as f64).sqrt();
        }
        coh.push(c);
    }
    let sign = |n: usize| if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let dim = cutoff + 1;
    let mut amps = zeros(cutoff);
    for n in 0..dim {
        for m in 0..dim {
            amps[n * dim + m] = Complex64::new(coh[n] * coh[m] * (sign(m) + sign(n)), 0.0);
        }
    }
    Ok(amps)
}

/// Squared norm of the truncated `|α⟩|−α⟩ + |−α⟩|α⟩` before renormalization.
pub fn cat_raw_norm_sqr(alpha: f64, cutoff: usize) -> Result<f64> {
    Ok(cat_raw(alpha, cutoff)?.iter().map(|a| a.norm_sqr()).sum())
}

/// A cutoff that leaves less than ~1e-12 of a coherent state of amplitude
/// `alpha` outside the basis.
pub fn cat_min_cutoff(alpha: f64) -> usize {
    let a2 = alpha * alpha;
    (a2 + 10.0 * (a2 + 1.0).sqrt()).ceil() as usize
}

/// `|α⟩|−α⟩ + |−α⟩|α⟩` for real `α > 0`, truncated and renormalized.
pub fn make_cat(alpha: f64, cutoff: usize) -> Result<PureTwoModeState> {
    PureTwoModeState::normalized(cutoff, cat_raw(alpha, cutoff)?)
}
