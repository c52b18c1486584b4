//! Oscillator eigenfunctions, their overlaps on intervals, and the effect
//! operators of binned quadrature measurements in the Fock basis.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::fock::PureTwoModeState;
use crate::integrate::{integrate_vec, AdaptiveOptions};
use crate::{Error, Result};

/// Absolute tolerance used for every overlap integral.
pub const OVERLAP_TOL: f64 = 1e-12;

fn overlap_options() -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: OVERLAP_TOL,
        max_panels: 4000,
    }
}

/// Normalized oscillator eigenfunction `φ_n(x)`.
///
/// Uses the upward three-term recurrence on the normalized functions,
/// `φ_{n+1} = √(2/(n+1)) x φ_n − √(n/(n+1)) φ_{n−1}`.
pub fn hermite_fn(n: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    hermite_fns(x, &mut buf);
    buf[n]
}

/// Fills `out[k] = φ_k(x)` for `k < out.len()`.
pub fn hermite_fns(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// A finite interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    /// `[−z, z]` for `z > 0`.
    pub fn symmetric(z: f64) -> Result<Self> {
        if !(z > 0.0) {
            return Err(Error::domain(format!("half-width must be positive, got {z}")));
        }
        Interval::new(-z, z)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    fn is_symmetric(&self) -> bool {
        self.lo == -self.hi
    }
}

/// The part of the real line mapped to outcome +1; its complement maps to −1.
///
/// Intervals are kept sorted with overlapping or touching neighbours merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BinRegion {
    plus: Vec<Interval>,
}

impl BinRegion {
    pub fn new(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut plus: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match plus.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => plus.push(iv),
            }
        }
        BinRegion { plus }
    }

    /// The region `[−z, z]`.
    pub fn symmetric(z: f64) -> Result<Self> {
        Ok(BinRegion {
            plus: vec![Interval::symmetric(z)?],
        })
    }

    pub fn empty() -> Self {
        BinRegion::default()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.plus
    }

    pub fn contains(&self, x: f64) -> bool {
        self.plus.iter().any(|iv| iv.lo <= x && x <= iv.hi)
    }

    /// True when the region is its own mirror image under `x → −x`.
    pub fn is_symmetric(&self) -> bool {
        let n = self.plus.len();
        (0..n).all(|i| self.plus[i].lo == -self.plus[n - 1 - i].hi)
    }
}

/// A quadrature angle reduced to `[0, 2π)`; 0 is X and π/2 is P.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureAngle(f64);

impl QuadratureAngle {
    pub const X: QuadratureAngle = QuadratureAngle(0.0);
    pub const P: QuadratureAngle = QuadratureAngle(std::f64::consts::FRAC_PI_2);

    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::domain(format!("non-finite quadrature angle {theta}")));
        }
        let r = theta.rem_euclid(TAU);
        Ok(QuadratureAngle(if r >= TAU { 0.0 } else { r }))
    }

    pub fn radians(&self) -> f64 {
        self.0
    }

    /// `e^{−inθ}`, the phase level `n` picks up in the rotated quadrature basis.
    pub fn level_phase(&self, n: usize) -> Complex64 {
        // Exact values at the two quadratures used most.
        if self.0 == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        if self.0 == std::f64::consts::FRAC_PI_2 {
            return match n % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, -1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 1.0),
            };
        }
        Complex64::from_polar(1.0, -(n as f64) * self.0)
    }
}

/// `∫ φ_m φ_n dx` over a finite interval.
pub fn overlap(m: usize, n: usize, interval: Interval) -> Result<f64> {
    if interval.is_symmetric() && (m + n) % 2 == 1 {
        return Ok(0.0);
    }
    let top = m.max(n);
    let mut phi = vec![0.0; top + 1];
    let v = integrate_vec(
        |x, out| {
            hermite_fns(x, &mut phi);
            out[0] = phi[m] * phi[n];
        },
        1,
        interval.lo,
        interval.hi,
        overlap_options(),
    )?;
    Ok(v[0])
}

/// All overlaps `∫ φ_m φ_n` for `m, n ≤ cutoff` on one interval, as a
/// row-major symmetric matrix.
pub fn overlap_matrix(cutoff: usize, interval: Interval) -> Result<Vec<f64>> {
    let dim = cutoff + 1;
    let symmetric = interval.is_symmetric();
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|m| (m..dim).map(move |n| (m, n)))
        .filter(|&(m, n)| !symmetric || (m + n) % 2 == 0)
        .collect();
    let mut phi = vec![0.0; dim];
    let values = integrate_vec(
        |x, out| {
            hermite_fns(x, &mut phi);
            for (slot, &(m, n)) in out.iter_mut().zip(&pairs) {
                *slot = phi[m] * phi[n];
            }
        },
        pairs.len(),
        interval.lo,
        interval.hi,
        overlap_options(),
    )?;
    let mut mat = vec![0.0; dim * dim];
    for (&(m, n), v) in pairs.iter().zip(values) {
        mat[m * dim + n] = v;
        mat[n * dim + m] = v;
    }
    Ok(mat)
}

/// `∫_{region} φ_m φ_n`, summed over the region's intervals.
pub fn region_overlap(m: usize, n: usize, region: &BinRegion) -> Result<f64> {
    region
        .intervals()
        .iter()
        .try_fold(0.0, |acc, &iv| Ok(acc + overlap(m, n, iv)?))
}

/// Overlap over the complement of the region, `δ_mn − region_overlap`.
pub fn complement_overlap(m: usize, n: usize, region: &BinRegion) -> Result<f64> {
    let delta = if m == n { 1.0 } else { 0.0 };
    Ok(delta - region_overlap(m, n, region)?)
}

/// Overlap matrix of a whole region, row-major `(cutoff+1)²`.
pub fn region_overlap_matrix(cutoff: usize, region: &BinRegion) -> Result<Vec<f64>> {
    let dim = cutoff + 1;
    let mut total = vec![0.0; dim * dim];
    for &iv in region.intervals() {
        for (t, v) in total.iter_mut().zip(overlap_matrix(cutoff, iv)?) {
            *t += v;
        }
    }
    Ok(total)
}

/// A single-mode measurement effect in the Fock basis, `0 ≤ M ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOperator {
    cutoff: usize,
    entries: Vec<Complex64>,
}

impl RegionOperator {
    /// Wraps a row-major matrix. The caller vouches for it being an effect.
    pub fn from_entries(cutoff: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != (cutoff + 1) * (cutoff + 1) {
            return Err(Error::domain("operator size does not match cutoff"));
        }
        Ok(RegionOperator { cutoff, entries })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (k, &d) in diag.iter().enumerate() {
            entries[k * dim + k] = Complex64::new(d, 0.0);
        }
        RegionOperator {
            cutoff: dim - 1,
            entries,
        }
    }

    pub fn identity(cutoff: usize) -> Self {
        Self::from_diagonal(&vec![1.0; cutoff + 1])
    }

    /// Builds `e^{i(m−n)θ} O_mn` from a real overlap matrix.
    pub fn rotated(cutoff: usize, overlaps: &[f64], angle: QuadratureAngle) -> Self {
        let dim = cutoff + 1;
        let mut entries = Vec::with_capacity(dim * dim);
        for m in 0..dim {
            for n in 0..dim {
                let phase = angle.level_phase(m).conj() * angle.level_phase(n);
                entries.push(phase * overlaps[m * dim + n]);
            }
        }
        RegionOperator { cutoff, entries }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * self.dim() + n]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `1 − M`, the effect of the opposite outcome.
    pub fn complement(&self) -> Self {
        let dim = self.dim();
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, &v)| if i / dim == i % dim { 1.0 - v } else { -v })
            .collect();
        RegionOperator {
            cutoff: self.cutoff,
            entries,
        }
    }

    /// Largest deviation from Hermiticity, `max |M_mn − conj(M_nm)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for m in 0..dim {
            for n in m..dim {
                worst = worst.max((self.get(m, n) - self.get(n, m).conj()).norm());
            }
        }
        worst
    }

    pub fn is_diagonal(&self) -> bool {
        let dim = self.dim();
        self.entries
            .iter()
            .enumerate()
            .all(|(i, v)| i / dim == i % dim || v.norm() == 0.0)
    }
}

/// Effect operator of outcome +1 for a quadrature at angle `theta` binned by
/// `region`.
pub fn region_operator(
    theta: QuadratureAngle,
    region: &BinRegion,
    cutoff: usize,
) -> Result<RegionOperator> {
    let overlaps = region_overlap_matrix(cutoff, region)?;
    Ok(RegionOperator::rotated(cutoff, &overlaps, theta))
}

/// Joint probability density of quadrature outcomes `(x, y)` at angles
/// `(theta_a, theta_b)` for a pure two-mode state.
pub fn quadrature_density(
    state: &PureTwoModeState,
    theta_a: QuadratureAngle,
    theta_b: QuadratureAngle,
    x: f64,
    y: f64,
) -> f64 {
    let dim = state.dim();
    let mut phi_x = vec![0.0; dim];
    let mut phi_y = vec![0.0; dim];
    hermite_fns(x, &mut phi_x);
    hermite_fns(y, &mut phi_y);
    let mut amp = Complex64::new(0.0, 0.0);
    for n in 0..dim {
        let row = theta_a.level_phase(n) * phi_x[n];
        for m in 0..dim {
            let c = state.amp(n, m);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            amp += c * row * theta_b.level_phase(m) * phi_y[m];
        }
    }
    amp.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hermite_values_at_origin() {
        assert!((hermite_fn(0, 0.0) - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(hermite_fn(1, 0.0), 0.0);
        assert!((hermite_fn(2, 0.0) + (4.0 * PI).powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn hermite_matches_closed_forms() {
        for &x in &[-2.3f64, -0.4, 0.0, 0.83, 1.7, 3.1] {
            let g = (-0.5 * x * x).exp();
            let phi0 = PI.powf(-0.25) * g;
            let phi1 = PI.powf(-0.25) * std::f64::consts::SQRT_2 * x * g;
            let phi2 = (4.0 * PI).powf(-0.25) * (2.0 * x * x - 1.0) * g;
            assert!((hermite_fn(0, x) - phi0).abs() < 1e-15);
            assert!((hermite_fn(1, x) - phi1).abs() < 1e-15);
            assert!((hermite_fn(2, x) - phi2).abs() < 1e-15);
        }
    }

    #[test]
    fn hermite_large_order_stays_finite() {
        for n in [40, 60, 80] {
            for &x in &[0.0, 3.0, 9.0, 12.0, 30.0] {
                assert!(hermite_fn(n, x).is_finite());
            }
        }
        assert_eq!(hermite_fn(5, 60.0), 0.0);
    }

    #[test]
    fn ground_state_overlap_is_erf() {
        for &z in &[0.1, 0.5, 0.83, 1.5, 3.0] {
            let v = overlap(0, 0, Interval::symmetric(z).unwrap()).unwrap();
            assert!((v - libm::erf(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_line_orthonormality() {
        let wide = Interval::new(-12.0, 12.0).unwrap();
        assert!(overlap(0, 2, wide).unwrap().abs() < 1e-10);
        assert!((overlap(2, 2, wide).unwrap() - 1.0).abs() < 1e-10);
        assert!((overlap(7, 7, wide).unwrap() - 1.0).abs() < 1e-10);
        assert!(overlap(3, 9, wide).unwrap().abs() < 1e-10);
    }

    #[test]
    fn region_overlap_cases() {
        let r = BinRegion::symmetric(0.83).unwrap();
        assert!((region_overlap(0, 0, &r).unwrap() - libm::erf(0.83)).abs() < 1e-12);
        assert_eq!(region_overlap(1, 1, &BinRegion::empty()).unwrap(), 0.0);
        let full = BinRegion::symmetric(12.0).unwrap();
        for m in 0..5 {
            assert!((region_overlap(m, m, &full).unwrap() - 1.0).abs() < 1e-10);
        }
        let c = complement_overlap(0, 0, &r).unwrap();
        assert!((c - libm::erfc(0.83)).abs() < 1e-12);
    }

    #[test]
    fn region_canonicalization() {
        let iv = |a, b| Interval::new(a, b).unwrap();
        let r = BinRegion::new(vec![iv(2.0, 3.0), iv(-1.0, 0.5), iv(0.5, 1.0), iv(2.5, 4.0)]);
        assert_eq!(r.intervals(), &[iv(-1.0, 1.0), iv(2.0, 4.0)]);
        assert!(r.contains(0.7));
        assert!(!r.contains(1.5));
        assert!(!r.is_symmetric());
        assert!(BinRegion::new(vec![iv(-3.0, -1.0), iv(1.0, 3.0)]).is_symmetric());
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::INFINITY).is_err());
        assert!(BinRegion::symmetric(0.0).is_err());
    }

    #[test]
    fn split_region_adds_up() {
        let iv = |a, b| Interval::new(a, b).unwrap();
        let split = BinRegion::new(vec![iv(-2.0, -0.5), iv(0.3, 1.1)]);
        let a = region_overlap(1, 3, &split).unwrap();
        let b = overlap(1, 3, iv(-2.0, -0.5)).unwrap() + overlap(1, 3, iv(0.3, 1.1)).unwrap();
        assert!((a - b).abs() < 1e-15);
        let mat = region_overlap_matrix(4, &split).unwrap();
        assert!((mat[5 + 3] - a).abs() < 1e-12);
    }

    #[test]
    fn angle_reduction() {
        let a = QuadratureAngle::new(-std::f64::consts::FRAC_PI_2).unwrap();
        assert!((a.radians() - 1.5 * PI).abs() < 1e-15);
        assert_eq!(QuadratureAngle::new(TAU).unwrap().radians(), 0.0);
        assert!(QuadratureAngle::new(f64::NAN).is_err());
        let generic = QuadratureAngle::new(0.3).unwrap();
        assert!((generic.level_phase(2) - Complex64::from_polar(1.0, -0.6)).norm() < 1e-15);
        let p = QuadratureAngle::P;
        for n in 0..8 {
            let polar = Complex64::from_polar(1.0, -(n as f64) * std::f64::consts::FRAC_PI_2);
            assert!((p.level_phase(n) - polar).norm() < 1e-15);
        }
    }

    #[test]
    fn x_operator_is_real_symmetric() {
        let r = BinRegion::symmetric(0.9).unwrap();
        let m = region_operator(QuadratureAngle::X, &r, 6).unwrap();
        for a in 0..7 {
            for b in 0..7 {
                assert_eq!(m.get(a, b).im, 0.0);
                assert_eq!(m.get(a, b), m.get(b, a));
            }
        }
    }

    #[test]
    fn p_operator_phases() {
        let r = BinRegion::symmetric(0.86).unwrap();
        let m = region_operator(QuadratureAngle::P, &r, 6).unwrap();
        let o02 = region_overlap(0, 2, &r).unwrap();
        // e^{i(0−2)π/2} = −1
        assert!((m.get(0, 2) - Complex64::new(-o02, 0.0)).norm() < 1e-15);
        assert!(m.hermiticity_error() < 1e-12);
    }

    #[test]
    fn full_line_operator_is_identity() {
        let r = BinRegion::symmetric(12.0).unwrap();
        for theta in [0.0, 0.4, 2.0, 5.5] {
            let m = region_operator(QuadratureAngle::new(theta).unwrap(), &r, 5).unwrap();
            for a in 0..6 {
                for b in 0..6 {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((m.get(a, b) - Complex64::new(want, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn operator_eigenvalues_in_unit_interval() {
        let iv = |a, b| Interval::new(a, b).unwrap();
        let regions = [
            BinRegion::symmetric(0.83).unwrap(),
            BinRegion::new(vec![iv(-2.5, -0.2), iv(0.7, 1.9)]),
        ];
        for region in &regions {
            for theta in [0.0, 1.1, std::f64::consts::FRAC_PI_2] {
                let cutoff = 20;
                let m = region_operator(QuadratureAngle::new(theta).unwrap(), region, cutoff).unwrap();
                assert!(m.hermiticity_error() < 1e-12);
                let mat = nalgebra::DMatrix::from_fn(cutoff + 1, cutoff + 1, |i, j| m.get(i, j));
                let eig = nalgebra::SymmetricEigen::new(mat);
                for &e in eig.eigenvalues.iter() {
                    assert!((-1e-9..=1.0 + 1e-9).contains(&e), "eigenvalue {e}");
                }
            }
        }
    }

    #[test]
    fn complement_operator() {
        let r = BinRegion::symmetric(0.5).unwrap();
        let m = region_operator(QuadratureAngle::P, &r, 3).unwrap();
        let c = m.complement();
        for a in 0..4 {
            for b in 0..4 {
                let id = if a == b { 1.0 } else { 0.0 };
                assert!((m.get(a, b) + c.get(a, b) - Complex64::new(id, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn overlap_matrix_matches_single_overlaps() {
        let iv = Interval::new(-0.4, 1.7).unwrap();
        let mat = overlap_matrix(8, iv).unwrap();
        for m in 0..9 {
            for n in 0..9 {
                assert!((mat[m * 9 + n] - overlap(m, n, iv).unwrap()).abs() < 2e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn overlap_is_symmetric(m in 0usize..12, n in 0usize..12, lo in -4.0f64..3.0, w in 0.01f64..4.0) {
            let iv = Interval::new(lo, lo + w).unwrap();
            prop_assert_eq!(overlap(m, n, iv).unwrap(), overlap(n, m, iv).unwrap());
        }

        #[test]
        fn overlap_is_additive(m in 0usize..10, n in 0usize..10, a in -4.0f64..0.0, w1 in 0.01f64..3.0, w2 in 0.01f64..3.0) {
            let b = a + w1;
            let c = b + w2;
            let whole = overlap(m, n, Interval::new(a, c).unwrap()).unwrap();
            let parts = overlap(m, n, Interval::new(a, b).unwrap()).unwrap()
                + overlap(m, n, Interval::new(b, c).unwrap()).unwrap();
            prop_assert!((whole - parts).abs() < 2e-12, "{} vs {}", whole, parts);
        }

        #[test]
        fn odd_parity_vanishes_on_symmetric_intervals(m in 0usize..15, k in 0usize..7, z in 0.01f64..6.0) {
            let n = m + 2 * k + 1;
            prop_assert_eq!(overlap(m, n, Interval::symmetric(z).unwrap()).unwrap(), 0.0);
            // The general path (shifted by nothing but split in two) agrees.
            let left = overlap(m, n, Interval::new(-z, 0.0).unwrap()).unwrap();
            let right = overlap(m, n, Interval::new(0.0, z).unwrap()).unwrap();
            prop_assert!((left + right).abs() < 2e-12);
        }
    }
}
