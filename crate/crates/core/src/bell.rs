//! CHSH and Clauser-Horne functionals on scenario tables, and the closed-form
//! detector-efficiency threshold for the lossy two-photon state.

use crate::channels::closed_form_rho;
use crate::fock::{make_psi2, MixedTwoModeState, PSI2_CUTOFF};
use crate::measurement::{
    joint_table_from_effects, setting_effect, JointTable, Outcome, Pair, ScenarioTables, Setting,
};
use crate::Result;

/// Local-realistic bound of the CHSH expression.
pub const CHSH_LOCAL_BOUND: f64 = 2.0;

/// `p(++) + p(−−) − p(+−) − p(−+)`.
pub fn correlator(tab: &JointTable) -> f64 {
    let [pp, pm, mp, mm] = tab.entries();
    pp + mm - pm - mp
}

/// One correlator together with the setting pair it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub pair: Pair,
    pub label: String,
    pub value: f64,
}

/// A CHSH value with the sign arrangement that produced it.
///
/// `s = sign · Σ_k ε_k E_k` where `ε_k = −1` only for `minus`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChshResult {
    pub s: f64,
    pub terms: [Term; 4],
    pub minus: Pair,
    pub sign: f64,
}

impl ChshResult {
    /// Arrangement label such as `A2B2`, prefixed by `-` for a flipped
    /// overall sign.
    pub fn arrangement(&self) -> String {
        if self.sign < 0.0 {
            format!("-{}", self.minus)
        } else {
            self.minus.to_string()
        }
    }

    pub fn violates(&self) -> bool {
        self.s > CHSH_LOCAL_BOUND
    }
}

fn terms(st: &ScenarioTables) -> [Term; 4] {
    Pair::ALL.map(|pair| Term {
        pair,
        label: st.pair_label(pair),
        value: correlator(st.table(pair)),
    })
}

fn signed_sum(terms: &[Term; 4], minus: Pair, sign: f64) -> f64 {
    sign * terms
        .iter()
        .map(|t| if t.pair == minus { -t.value } else { t.value })
        .sum::<f64>()
}

/// CHSH expression with the minus sign on `minus`.
pub fn chsh(st: &ScenarioTables, minus: Pair) -> ChshResult {
    let terms = terms(st);
    let s = signed_sum(&terms, minus, 1.0);
    ChshResult {
        s,
        terms,
        minus,
        sign: 1.0,
    }
}

/// Largest CHSH value over the four minus placements and the overall sign.
pub fn chsh_max(st: &ScenarioTables) -> ChshResult {
    let terms = terms(st);
    let mut best = (f64::NEG_INFINITY, Pair::A2B2, 1.0);
    for minus in Pair::ALL {
        for sign in [1.0, -1.0] {
            let s = signed_sum(&terms, minus, sign);
            if s > best.0 {
                best = (s, minus, sign);
            }
        }
    }
    ChshResult {
        s: best.0,
        terms,
        minus: best.1,
        sign: best.2,
    }
}

/// The six probabilities entering the Clauser-Horne expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChComponents {
    pub alice_x_plus: f64,
    pub bob_x_plus: f64,
    pub pp_xx: f64,
    pub pp_nx: f64,
    pub pp_xn: f64,
    pub pp_nn: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChResult {
    pub value: f64,
    pub components: ChComponents,
}

impl ChResult {
    pub fn violates(&self) -> bool {
        self.value > 0.0
    }
}

/// `−p_A(+|X) − p_B(+|X) + p(++|XX) + p(++|NX) + p(++|XN) − p(++|NN)`.
///
/// Setting 1 of each party is the quadrature (X) and setting 2 the counter
/// (N); the marginals are read from the XX table.
pub fn ch(st: &ScenarioTables) -> ChResult {
    let pp = |pair| st.table(pair).get(Outcome::Plus, Outcome::Plus);
    let xx = st.table(Pair::A1B1);
    let components = ChComponents {
        alice_x_plus: xx.alice_plus(),
        bob_x_plus: xx.bob_plus(),
        pp_xx: pp(Pair::A1B1),
        pp_nx: pp(Pair::A2B1),
        pp_xn: pp(Pair::A1B2),
        pp_nn: pp(Pair::A2B2),
    };
    let c = components;
    let value = -c.alice_x_plus - c.bob_x_plus + c.pp_xx + c.pp_nx + c.pp_xn - c.pp_nn;
    ChResult { value, components }
}

/// Minimal threshold-detector efficiency for which the lossy two-photon
/// state with transmission `t`, binned on `[−z, z]`, violates the CH
/// inequality.
///
/// Uses `tη ≥ 1 − √(1 − (1 − p(−−|XX)) / (P(++|NX) + P(++|XN)))`, with
/// `p(−−|XX)` on the lossy mixture and the `P` terms on the lossless state
/// with perfect detectors. The result exceeds 1 when no efficiency suffices
/// and is `+∞` when the square root has no real value.
pub fn eta_threshold(t: f64, z: f64) -> Result<f64> {
    let x = Setting::x_bin(z)?;
    let rho = closed_form_rho(t)?;
    let effect_x = setting_effect(&x, PSI2_CUTOFF)?;
    let effect_n = setting_effect(&Setting::counting(1.0)?, PSI2_CUTOFF)?;

    let p_mm = joint_table_from_effects(&rho, &effect_x, &effect_x)?.get(Outcome::Minus, Outcome::Minus);
    let ideal: MixedTwoModeState = make_psi2().into();
    let p_nx = joint_table_from_effects(&ideal, &effect_n, &effect_x)?.get(Outcome::Plus, Outcome::Plus);
    let p_xn = joint_table_from_effects(&ideal, &effect_x, &effect_n)?.get(Outcome::Plus, Outcome::Plus);

    Ok(eta_threshold_from(t, p_mm, p_nx + p_xn))
}

/// The threshold formula given its ingredients.
pub fn eta_threshold_from(t: f64, p_minus_minus_xx: f64, p_plus_plus_sum: f64) -> f64 {
    if p_plus_plus_sum <= 0.0 || t <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = (1.0 - p_minus_minus_xx) / p_plus_plus_sum;
    if ratio > 1.0 {
        return f64::INFINITY;
    }
    (1.0 - (1.0 - ratio).sqrt()) / t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{eta_threshold_bisect, psi2_scenario};
    use crate::fock::{make_basis, make_tmss};
    use crate::measurement::{scenario, QuadratureBinning};
    use crate::quadrature::{BinRegion, QuadratureAngle};
    use proptest::prelude::*;

    #[test]
    fn correlator_cases() {
        let psi2 = psi2_scenario(1.0, 1.0, 0.83).unwrap();
        assert_eq!(correlator(psi2.table(Pair::A2B2)), -1.0);
        assert_eq!(correlator(&JointTable::new(0.25, 0.25, 0.25, 0.25).unwrap()), 0.0);
        assert_eq!(correlator(&JointTable::new(1.0, 0.0, 0.0, 0.0).unwrap()), 1.0);
    }

    #[test]
    fn counting_pair_on_lossless_state_is_deterministic_per_branch() {
        let st = psi2_scenario(1.0, 1.0, 0.5).unwrap();
        let nn = st.table(Pair::A2B2);
        assert_eq!(nn.get(Outcome::Plus, Outcome::Plus), 0.0);
        assert_eq!(nn.get(Outcome::Minus, Outcome::Minus), 0.0);
    }

    #[test]
    fn psi2_ideal_violation() {
        let st = psi2_scenario(1.0, 1.0, 0.83).unwrap();
        let r = chsh(&st, Pair::A2B2);
        assert!((r.s - 2.25).abs() < 0.01, "S = {}", r.s);
        assert!(r.violates());
        let best = chsh_max(&st);
        assert_eq!(best.minus, Pair::A2B2);
        assert_eq!(best.sign, 1.0);
        assert!((best.s - r.s).abs() < 1e-15);
        assert_eq!(best.arrangement(), "A2B2");
        assert_eq!(r.terms[3].label, "NN");
    }

    #[test]
    fn chsh_max_dominates_every_position() {
        let st = psi2_scenario(0.9, 0.8, 1.1).unwrap();
        let best = chsh_max(&st);
        for p in Pair::ALL {
            assert!(best.s >= chsh(&st, p).s);
        }
        // Exhaustive independent check over the eight arrangements.
        let e: Vec<f64> = st.tables().iter().map(correlator).collect();
        let mut brute = f64::NEG_INFINITY;
        for k in 0..4 {
            let s: f64 = (0..4).map(|i| if i == k { -e[i] } else { e[i] }).sum();
            brute = brute.max(s).max(-s);
        }
        assert!((brute - best.s).abs() < 1e-15);
    }

    #[test]
    fn all_plus_scenario_gives_two() {
        let one = JointTable::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let x = Setting::x_bin(1.0).unwrap();
        let st = ScenarioTables::from_tables([x.clone(), x.clone()], [x.clone(), x], [one; 4]);
        for p in Pair::ALL {
            assert!((chsh(&st, p).s - 2.0).abs() < 1e-15);
        }
        assert!((chsh_max(&st).s - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ch_on_vacuum() {
        let vac: MixedTwoModeState = make_basis(0, 0, PSI2_CUTOFF).unwrap().into();
        let x = Setting::x_bin(0.83).unwrap();
        let n = Setting::counting(1.0).unwrap();
        let st = scenario(&vac, &x, &n, &x, &n).unwrap();
        let r = ch(&st);
        assert_eq!(r.components.pp_nn, 0.0);
        let mm = st.table(Pair::A1B1).get(Outcome::Minus, Outcome::Minus);
        // Counters never click on vacuum, so the value reduces to p(−−|XX) − 1.
        assert!((r.value - (mm - 1.0)).abs() < 1e-15);
        assert!(!r.violates());
    }

    #[test]
    fn ch_never_sees_double_clicks_on_lossy_state() {
        for &t in &[0.5, 0.85, 1.0] {
            let st = psi2_scenario(t, 0.9, 0.8).unwrap();
            assert_eq!(ch(&st).components.pp_nn, 0.0);
        }
    }

    #[test]
    fn ch_chsh_identity_on_psi2() {
        let st = psi2_scenario(1.0, 1.0, 0.83).unwrap();
        let r = ch(&st);
        assert!(r.value > 0.0);
        assert!((chsh(&st, Pair::A2B2).s - (4.0 * r.value + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn counting_efficiency_scales_click_coincidences() {
        // p(++|NX) on the lossy mixture is tη(2 − tη) times its ideal value.
        let ideal = psi2_scenario(1.0, 1.0, 0.7).unwrap();
        let ideal_nx = ideal.table(Pair::A2B1).get(Outcome::Plus, Outcome::Plus);
        for &t in &[0.3, 0.84, 0.95] {
            for &eta in &[0.2, 0.711, 1.0] {
                let st = psi2_scenario(t, eta, 0.7).unwrap();
                let nx = st.table(Pair::A2B1).get(Outcome::Plus, Outcome::Plus);
                let te = t * eta;
                assert!((nx - te * (2.0 - te) * ideal_nx).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn threshold_matches_bisection() {
        for &t in &[0.86, 0.9, 0.95, 1.0] {
            for &z in &[0.6, 0.78, 0.9, 1.2] {
                let formula = eta_threshold(t, z).unwrap();
                match eta_threshold_bisect(t, z, 1e-10).unwrap() {
                    Some(root) => assert!((formula - root).abs() < 1e-6, "t={t} z={z}: {formula} vs {root}"),
                    None => assert!(formula > 1.0 - 1e-6, "t={t} z={z}: {formula}"),
                }
            }
        }
    }

    #[test]
    fn threshold_degenerate_binning_is_infeasible() {
        assert!(eta_threshold(1.0, 1e-4).unwrap() > 1.0);
        assert_eq!(eta_threshold_from(1.0, 0.5, 0.0), f64::INFINITY);
        assert_eq!(eta_threshold_from(0.0, 0.5, 0.4), f64::INFINITY);
    }

    #[test]
    fn threshold_near_optimum() {
        let eta = eta_threshold(1.0, 0.7833).unwrap();
        assert!((eta - 0.711).abs() < 0.005, "{eta}");
    }

    #[test]
    fn vacuum_with_p_quadrature_respects_bound() {
        let vac: MixedTwoModeState = make_tmss(0.0, 10).unwrap().into();
        let x = Setting::x_bin(0.9).unwrap();
        let p = Setting::Quadrature(QuadratureBinning {
            angle: QuadratureAngle::P,
            region: BinRegion::symmetric(0.9).unwrap(),
        });
        let n = Setting::counting(1.0).unwrap();
        let st = scenario(&vac, &x, &n, &p, &n).unwrap();
        assert!(chsh_max(&st).s <= 2.0 + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_states_respect_chsh(
            na in 0usize..4, nb in 0usize..4,
            z1 in 0.05f64..3.0, z2 in 0.05f64..3.0,
            eta in 0.0f64..1.0, theta in 0.0f64..6.28,
        ) {
            let s: MixedTwoModeState = make_basis(na, nb, 4).unwrap().into();
            let a1 = Setting::x_bin(z1).unwrap();
            let b1 = Setting::Quadrature(QuadratureBinning::symmetric(QuadratureAngle::new(theta).unwrap(), z2).unwrap());
            let n = Setting::counting(eta).unwrap();
            let st = scenario(&s, &a1, &n, &b1, &n).unwrap();
            prop_assert!(chsh_max(&st).s <= 2.0 + 1e-9);
        }

        #[test]
        fn ch_chsh_identity(t in 0.0f64..1.0, eta in 0.0f64..1.0, z in 0.01f64..4.0) {
            let st = psi2_scenario(t, eta, z).unwrap();
            let lhs = chsh(&st, Pair::A2B2).s;
            prop_assert!((lhs - (4.0 * ch(&st).value + 2.0)).abs() < 1e-12);
        }
    }
}
