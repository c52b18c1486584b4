//! Measurement settings and exact binned joint-outcome tables.
//!
//! Outcome conventions: a threshold click is +1 and no click is −1; a
//! quadrature value inside the binning region is +1 and outside is −1.

use std::fmt;

use num_complex::Complex64;

use crate::fock::{MixedTwoModeState, PureTwoModeState};
use crate::quadrature::{region_operator, BinRegion, QuadratureAngle, RegionOperator};
use crate::{Error, Result};

/// Tolerance on the sum of a joint table.
pub const TABLE_SUM_TOL: f64 = 1e-10;
/// Negative probabilities down to this value are rounding and get clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-12;
/// Largest imaginary part tolerated in an expectation value.
pub const IMAG_TOL: f64 = 1e-10;
/// Largest total-weight mismatch tolerated before renormalizing a table.
pub const RENORM_TOL: f64 = 1e-8;

/// A binary outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }
}

/// Threshold ("click / no click") detector with quantum efficiency `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdDetector {
    eta: f64,
}

impl ThresholdDetector {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::domain(format!("efficiency {eta} outside [0, 1]")));
        }
        Ok(ThresholdDetector { eta })
    }

    pub fn ideal() -> Self {
        ThresholdDetector { eta: 1.0 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Probability of a click when `n` photons arrive.
    pub fn click_probability(&self, n: usize) -> f64 {
        1.0 - (1.0 - self.eta).powi(n as i32)
    }
}

/// Homodyne detection at a quadrature angle followed by binning.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureBinning {
    pub angle: QuadratureAngle,
    pub region: BinRegion,
}

impl QuadratureBinning {
    /// `[−z, z] → +1` at the given angle.
    pub fn symmetric(angle: QuadratureAngle, z: f64) -> Result<Self> {
        Ok(QuadratureBinning {
            angle,
            region: BinRegion::symmetric(z)?,
        })
    }
}

/// One party's measurement choice.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    Threshold(ThresholdDetector),
    Quadrature(QuadratureBinning),
}

impl Setting {
    /// Threshold detector with efficiency `eta`.
    pub fn counting(eta: f64) -> Result<Self> {
        Ok(Setting::Threshold(ThresholdDetector::new(eta)?))
    }

    /// X quadrature binned on `[−z, z]`.
    pub fn x_bin(z: f64) -> Result<Self> {
        Ok(Setting::Quadrature(QuadratureBinning::symmetric(
            QuadratureAngle::X,
            z,
        )?))
    }

    /// P quadrature binned on `[−z, z]`.
    pub fn p_bin(z: f64) -> Result<Self> {
        Ok(Setting::Quadrature(QuadratureBinning::symmetric(
            QuadratureAngle::P,
            z,
        )?))
    }

    /// Short label: `N`, `X`, `P`, or `Q(θ)` for other angles.
    pub fn label(&self) -> String {
        match self {
            Setting::Threshold(_) => "N".into(),
            Setting::Quadrature(q) if q.angle == QuadratureAngle::X => "X".into(),
            Setting::Quadrature(q) if q.angle == QuadratureAngle::P => "P".into(),
            Setting::Quadrature(q) => format!("Q({})", q.angle.radians()),
        }
    }
}

/// Diagonal click effect `1 − (1−η)ⁿ` on level `n`.
pub fn detector_effect(det: ThresholdDetector, cutoff: usize) -> RegionOperator {
    let diag: Vec<f64> = (0..=cutoff).map(|n| det.click_probability(n)).collect();
    RegionOperator::from_diagonal(&diag)
}

/// Effect operator of outcome +1 for any setting.
pub fn setting_effect(setting: &Setting, cutoff: usize) -> Result<RegionOperator> {
    match setting {
        Setting::Threshold(det) => Ok(detector_effect(*det, cutoff)),
        Setting::Quadrature(q) => region_operator(q.angle, &q.region, cutoff),
    }
}

/// Joint outcome probabilities for one setting pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTable {
    // (++, +−, −+, −−)
    p: [f64; 4],
}

impl JointTable {
    /// Validates non-negativity and normalization.
    pub fn new(pp: f64, pm: f64, mp: f64, mm: f64) -> Result<Self> {
        let p = [pp, pm, mp, mm];
        if p.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::domain(format!("negative or NaN probability in {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > TABLE_SUM_TOL {
            return Err(Error::domain(format!("table sums to {sum}")));
        }
        Ok(JointTable { p })
    }

    /// Product table of two independent marginals.
    pub fn product(pa_plus: f64, pb_plus: f64) -> Result<Self> {
        let (qa, qb) = (1.0 - pa_plus, 1.0 - pb_plus);
        JointTable::new(pa_plus * pb_plus, pa_plus * qb, qa * pb_plus, qa * qb)
    }

    pub fn get(&self, a: Outcome, b: Outcome) -> f64 {
        let i = match (a, b) {
            (Outcome::Plus, Outcome::Plus) => 0,
            (Outcome::Plus, Outcome::Minus) => 1,
            (Outcome::Minus, Outcome::Plus) => 2,
            (Outcome::Minus, Outcome::Minus) => 3,
        };
        self.p[i]
    }

    /// Entries in the order `(++, +−, −+, −−)`.
    pub fn entries(&self) -> [f64; 4] {
        self.p
    }

    pub fn sum(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn alice_plus(&self) -> f64 {
        self.p[0] + self.p[1]
    }

    pub fn bob_plus(&self) -> f64 {
        self.p[0] + self.p[2]
    }

    /// The same statistics with the parties' roles exchanged.
    pub fn transposed(&self) -> Self {
        JointTable {
            p: [self.p[0], self.p[2], self.p[1], self.p[3]],
        }
    }
}

/// `D×D` row-major complex matrix product helpers for amplitude tables.
fn left_apply(op: &RegionOperator, psi: &[Complex64], out: &mut [Complex64]) {
    let dim = op.dim();
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    if op.is_diagonal() {
        for a in 0..dim {
            let d = op.get(a, a);
            for b in 0..dim {
                out[a * dim + b] = d * psi[a * dim + b];
            }
        }
        return;
    }
    let m = op.entries();
    for k in 0..dim {
        for b in 0..dim {
            let v = psi[k * dim + b];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            for a in 0..dim {
                out[a * dim + b] += m[a * dim + k] * v;
            }
        }
    }
}

// out = psi · opᵀ, i.e. the effect acting on mode B.
fn right_apply(op: &RegionOperator, psi: &[Complex64], out: &mut [Complex64]) {
    let dim = op.dim();
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    if op.is_diagonal() {
        for a in 0..dim {
            for b in 0..dim {
                out[a * dim + b] = psi[a * dim + b] * op.get(b, b);
            }
        }
        return;
    }
    let m = op.entries();
    for a in 0..dim {
        for k in 0..dim {
            let v = psi[a * dim + k];
            if v.norm_sqr() == 0.0 {
                continue;
            }
            for b in 0..dim {
                out[a * dim + b] += v * m[b * dim + k];
            }
        }
    }
}

fn braket(psi: &[Complex64], phi: &[Complex64]) -> Complex64 {
    psi.iter().zip(phi).map(|(a, b)| a.conj() * b).sum()
}

fn real_part(v: Complex64) -> Result<f64> {
    if v.im.abs() > IMAG_TOL {
        return Err(Error::Numerical {
            what: "expectation value (imaginary part)",
            achieved: v.im.abs(),
            required: IMAG_TOL,
        });
    }
    Ok(v.re)
}

fn check_cutoff(state_cutoff: usize, op: &RegionOperator) -> Result<()> {
    if op.cutoff() != state_cutoff {
        return Err(Error::domain(format!(
            "operator cutoff {} does not match state cutoff {state_cutoff}",
            op.cutoff()
        )));
    }
    Ok(())
}

/// `(⟨M_A⊗1⟩, ⟨1⊗M_B⟩, ⟨M_A⊗M_B⟩, ⟨1⟩)` on one pure branch.
fn branch_moments(
    psi: &PureTwoModeState,
    ma: &RegionOperator,
    mb: &RegionOperator,
) -> Result<[f64; 4]> {
    let amps = psi.amps();
    let mut ta = vec![Complex64::new(0.0, 0.0); amps.len()];
    let mut tb = vec![Complex64::new(0.0, 0.0); amps.len()];
    let mut tab = vec![Complex64::new(0.0, 0.0); amps.len()];
    left_apply(ma, amps, &mut ta);
    right_apply(mb, amps, &mut tb);
    right_apply(mb, &ta, &mut tab);
    Ok([
        real_part(braket(amps, &ta))?,
        real_part(braket(amps, &tb))?,
        real_part(braket(amps, &tab))?,
        psi.norm_sqr(),
    ])
}

/// Joint table from precomputed +1 effects of both parties.
pub fn joint_table_from_effects(
    state: &MixedTwoModeState,
    ma: &RegionOperator,
    mb: &RegionOperator,
) -> Result<JointTable> {
    check_cutoff(state.cutoff(), ma)?;
    check_cutoff(state.cutoff(), mb)?;
    let mut acc = [0.0; 4];
    for (w, psi) in state.branches() {
        if *w == 0.0 {
            continue;
        }
        let m = branch_moments(psi, ma, mb)?;
        for (a, v) in acc.iter_mut().zip(m) {
            *a += w * v;
        }
    }
    let [pa, pb, pp, total] = acc;
    if (total - 1.0).abs() > RENORM_TOL {
        return Err(Error::Numerical {
            what: "joint table normalization",
            achieved: (total - 1.0).abs(),
            required: RENORM_TOL,
        });
    }
    let mut p = [pp, pa - pp, pb - pp, total - pa - pb + pp];
    for v in &mut p {
        if *v < 0.0 {
            if *v < -NEGATIVE_CLAMP {
                return Err(Error::Numerical {
                    what: "joint table positivity",
                    achieved: *v,
                    required: -NEGATIVE_CLAMP,
                });
            }
            *v = 0.0;
        }
    }
    let sum: f64 = p.iter().sum();
    for v in &mut p {
        *v /= sum;
    }
    Ok(JointTable { p })
}

/// Exact binned joint table of two settings on a (mixed) two-mode state.
pub fn joint_table(
    state: &MixedTwoModeState,
    setting_a: &Setting,
    setting_b: &Setting,
) -> Result<JointTable> {
    let cutoff = state.cutoff();
    let ma = setting_effect(setting_a, cutoff)?;
    let mb = setting_effect(setting_b, cutoff)?;
    joint_table_from_effects(state, &ma, &mb)
}

/// A setting pair `(A_i, B_j)`; also used to name CHSH sign placements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pair {
    A1B1,
    A1B2,
    A2B1,
    A2B2,
}

impl Pair {
    pub const ALL: [Pair; 4] = [Pair::A1B1, Pair::A1B2, Pair::A2B1, Pair::A2B2];

    /// `(i, j)` with zero-based setting indices.
    pub fn indices(self) -> (usize, usize) {
        match self {
            Pair::A1B1 => (0, 0),
            Pair::A1B2 => (0, 1),
            Pair::A2B1 => (1, 0),
            Pair::A2B2 => (1, 1),
        }
    }

    pub fn index(self) -> usize {
        let (i, j) = self.indices();
        2 * i + j
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (i, j) = self.indices();
        write!(f, "A{}B{}", i + 1, j + 1)
    }
}

/// The four joint tables of a two-setting Bell scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTables {
    alice: [Setting; 2],
    bob: [Setting; 2],
    tables: [JointTable; 4],
}

impl ScenarioTables {
    /// Assembles tables computed elsewhere, in [`Pair::ALL`] order.
    pub fn from_tables(alice: [Setting; 2], bob: [Setting; 2], tables: [JointTable; 4]) -> Self {
        ScenarioTables { alice, bob, tables }
    }

    pub fn table(&self, pair: Pair) -> &JointTable {
        &self.tables[pair.index()]
    }

    pub fn tables(&self) -> &[JointTable; 4] {
        &self.tables
    }

    pub fn alice(&self) -> &[Setting; 2] {
        &self.alice
    }

    pub fn bob(&self) -> &[Setting; 2] {
        &self.bob
    }

    /// Label like `XN` for the settings of a pair.
    pub fn pair_label(&self, pair: Pair) -> String {
        let (i, j) = pair.indices();
        format!("{}{}", self.alice[i].label(), self.bob[j].label())
    }

    /// Exchanges the parties.
    pub fn swapped(&self) -> Self {
        let t = |p: Pair| self.table(p).transposed();
        ScenarioTables {
            alice: self.bob.clone(),
            bob: self.alice.clone(),
            tables: [t(Pair::A1B1), t(Pair::A2B1), t(Pair::A1B2), t(Pair::A2B2)],
        }
    }
}

/// Computes all four tables of a scenario from one state.
pub fn scenario(
    state: &MixedTwoModeState,
    a1: &Setting,
    a2: &Setting,
    b1: &Setting,
    b2: &Setting,
) -> Result<ScenarioTables> {
    let cutoff = state.cutoff();
    let ea = [setting_effect(a1, cutoff)?, setting_effect(a2, cutoff)?];
    let eb = [setting_effect(b1, cutoff)?, setting_effect(b2, cutoff)?];
    scenario_from_effects(state, [a1.clone(), a2.clone()], [b1.clone(), b2.clone()], &ea, &eb)
}

/// As [`scenario`], reusing effect operators the caller already built.
pub fn scenario_from_effects(
    state: &MixedTwoModeState,
    alice: [Setting; 2],
    bob: [Setting; 2],
    effects_a: &[RegionOperator; 2],
    effects_b: &[RegionOperator; 2],
) -> Result<ScenarioTables> {
    let mut tables = [JointTable { p: [0.0; 4] }; 4];
    for pair in Pair::ALL {
        let (i, j) = pair.indices();
        tables[pair.index()] = joint_table_from_effects(state, &effects_a[i], &effects_b[j])?;
    }
    Ok(ScenarioTables { alice, bob, tables })
}

/// Largest change in either party's marginal when the other party switches
/// setting.
pub fn max_signaling(st: &ScenarioTables) -> f64 {
    let t = |p| st.table(p);
    let alice = [
        (t(Pair::A1B1).alice_plus() - t(Pair::A1B2).alice_plus()).abs(),
        (t(Pair::A2B1).alice_plus() - t(Pair::A2B2).alice_plus()).abs(),
    ];
    let bob = [
        (t(Pair::A1B1).bob_plus() - t(Pair::A2B1).bob_plus()).abs(),
        (t(Pair::A1B2).bob_plus() - t(Pair::A2B2).bob_plus()).abs(),
    ];
    alice.into_iter().chain(bob).fold(0.0, f64::max)
}
