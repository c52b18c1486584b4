//! Scenario builders, parameter scans, optimizers and the efficiency
//! frontier for the hybrid counting/homodyne Bell test.

mod montecarlo;
pub mod optimize;

use std::fmt;

use rayon::prelude::*;

use crate::bell::{ch, chsh_max, eta_threshold, ChshResult};
use crate::channels::closed_form_rho;
use crate::fock::{self, MixedTwoModeState};
use crate::measurement::{
    scenario, scenario_from_effects, setting_effect, QuadratureBinning, ScenarioTables, Setting,
};
use crate::quadrature::{overlap_matrix, Interval, QuadratureAngle, RegionOperator};
use crate::{Error, Result};

pub use montecarlo::{mc_sample, mc_sample_tables, McEstimate};
use optimize::{bisect, maximize, minimize, SearchOptions};

/// Upper end of every binning half-width search.
pub const Z_SEARCH_MAX: f64 = 4.0;

/// Agreement required between the closed-form threshold and a bisection on
/// the full CH evaluation.
pub const FRONTIER_CROSS_CHECK_TOL: f64 = 1e-4;

/// One evaluated point of a parameter scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub params: Vec<(&'static str, f64)>,
    pub s: f64,
    pub arrangement: String,
}

impl ScanPoint {
    fn new(params: Vec<(&'static str, f64)>, r: &ChshResult) -> Self {
        ScanPoint {
            params,
            s: r.s,
            arrangement: r.arrangement(),
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }
}

/// A point on the minimal-efficiency curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub t: f64,
    /// Minimal detector efficiency; above 1 (or infinite) when infeasible.
    pub eta_min: f64,
    pub z_opt: f64,
    pub feasible: bool,
}

/// The lossy two-photon mixture measured with `X` on `[−z, z]` and a
/// threshold detector of efficiency `eta`, identically on both sides.
pub fn psi2_scenario(t: f64, eta: f64, z: f64) -> Result<ScenarioTables> {
    let rho = closed_form_rho(t)?;
    let x = Setting::x_bin(z)?;
    let n = Setting::counting(eta)?;
    scenario(&rho, &x, &n, &x, &n)
}

/// CHSH (best arrangement) along a grid of binning half-widths.
pub fn psi2_scan(z_grid: &[f64], t: f64, eta: f64) -> Result<Vec<ScanPoint>> {
    z_grid
        .par_iter()
        .map(|&z| {
            let r = chsh_max(&psi2_scenario(t, eta, z)?);
            Ok(ScanPoint::new(vec![("z", z), ("t", t), ("eta", eta)], &r))
        })
        .collect()
}

/// Binning half-width maximizing CHSH for given losses; returns `(z, S)`.
pub fn optimize_z(t: f64, eta: f64) -> Result<(f64, f64)> {
    // Validate once so the search does not swallow a domain error.
    psi2_scenario(t, eta, 1.0)?;
    maximize(
        |z| Ok(chsh_max(&psi2_scenario(t, eta, z)?).s),
        SearchOptions::new(0.0, Z_SEARCH_MAX),
    )
}

/// Detector efficiency at which the CH expression of [`psi2_scenario`]
/// crosses zero, found by bisection on the full table evaluation. `None`
/// when even a perfect detector gives no violation.
pub fn eta_threshold_bisect(t: f64, z: f64, tol: f64) -> Result<Option<f64>> {
    let ch_at = |eta: f64| Ok(ch(&psi2_scenario(t, eta, z)?).value);
    if ch_at(1.0)? <= 0.0 {
        return Ok(None);
    }
    bisect(ch_at, 0.0, 1.0, tol).map(Some)
}

fn best_threshold(t: f64) -> Result<(f64, f64)> {
    minimize(|z| eta_threshold(t, z), SearchOptions::new(0.0, Z_SEARCH_MAX))
}

/// Minimal detector efficiency over binnings, for each transmission.
///
/// Every feasible point is cross-checked against [`eta_threshold_bisect`];
/// a disagreement above [`FRONTIER_CROSS_CHECK_TOL`] is a numerical error.
pub fn frontier(t_grid: &[f64]) -> Result<Vec<FrontierPoint>> {
    for &t in t_grid {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::domain(format!("transmission {t} outside (0, 1]")));
        }
    }
    t_grid
        .par_iter()
        .map(|&t| {
            let (z_opt, eta_min) = best_threshold(t)?;
            let feasible = eta_min <= 1.0;
            if feasible {
                let root = eta_threshold_bisect(t, z_opt, 1e-9)?;
                let gap = root.map_or(f64::INFINITY, |r| (r - eta_min).abs());
                // A root pinned at η = 1 can legitimately be missing by rounding.
                let edge = root.is_none() && (eta_min - 1.0).abs() < FRONTIER_CROSS_CHECK_TOL;
                if gap > FRONTIER_CROSS_CHECK_TOL && !edge {
                    return Err(Error::Numerical {
                        what: "frontier cross-check against CH bisection",
                        achieved: gap,
                        required: FRONTIER_CROSS_CHECK_TOL,
                    });
                }
            }
            Ok(FrontierPoint {
                t,
                eta_min,
                z_opt,
                feasible,
            })
        })
        .collect()
}

/// Smallest transmission at which a detector of efficiency `eta` still
/// allows a violation for some binning. `None` if even `t = 1` fails.
pub fn min_transmission(eta: f64, tol: f64) -> Result<Option<f64>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("efficiency {eta} outside (0, 1]")));
    }
    let excess = |t: f64| {
        if t <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(eta - best_threshold(t)?.1)
    };
    if excess(1.0)? < 0.0 {
        return Ok(None);
    }
    bisect(excess, 0.0, 1.0, tol).map(Some)
}

fn quadrature_effects(cutoff: usize, z: f64) -> Result<(RegionOperator, RegionOperator)> {
    let overlaps = overlap_matrix(cutoff, Interval::symmetric(z)?)?;
    Ok((
        RegionOperator::rotated(cutoff, &overlaps, QuadratureAngle::X),
        RegionOperator::rotated(cutoff, &overlaps, QuadratureAngle::P),
    ))
}

/// Squeezed vacuum with Alice measuring `{X on [−z_a, z_a], N}` and Bob
/// `{P on [−z_b, z_b], N}`, ideal counters, no loss.
pub fn tmss_scenario(lambda: f64, z_a: f64, z_b: f64, cutoff: usize) -> Result<ScenarioTables> {
    let state: MixedTwoModeState = fock::make_tmss(lambda, cutoff)?.into();
    let x = Setting::x_bin(z_a)?;
    let p = Setting::p_bin(z_b)?;
    let n = Setting::counting(1.0)?;
    scenario(&state, &x, &n, &p, &n)
}

/// CHSH (best arrangement) over a `λ × z` grid for the squeezed vacuum.
/// Rows are ordered with `λ` outermost.
pub fn tmss_scan(lambda_grid: &[f64], z_grid: &[f64], cutoff: usize) -> Result<Vec<ScanPoint>> {
    let states = lambda_grid
        .iter()
        .map(|&l| fock::make_tmss(l, cutoff).map(MixedTwoModeState::from))
        .collect::<Result<Vec<_>>>()?;
    let n = Setting::counting(1.0)?;
    let effect_n = setting_effect(&n, cutoff)?;

    let by_z: Vec<Vec<ScanPoint>> = z_grid
        .par_iter()
        .map(|&z| {
            let (effect_x, effect_p) = quadrature_effects(cutoff, z)?;
            let alice = [Setting::x_bin(z)?, n.clone()];
            let bob = [Setting::p_bin(z)?, n.clone()];
            let ea = [effect_x, effect_n.clone()];
            let eb = [effect_p, effect_n.clone()];
            lambda_grid
                .iter()
                .zip(&states)
                .map(|(&lambda, state)| {
                    let st = scenario_from_effects(state, alice.clone(), bob.clone(), &ea, &eb)?;
                    Ok(ScanPoint::new(vec![("lambda", lambda), ("z", z)], &chsh_max(&st)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(lambda_grid.len() * z_grid.len());
    for li in 0..lambda_grid.len() {
        for row in &by_z {
            out.push(row[li].clone());
        }
    }
    Ok(out)
}

/// States searched for (the absence of) violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// `(|1⟩|0⟩ + |0⟩|1⟩)/√2`.
    SinglePhotonPath,
    /// `|α⟩|−α⟩ + |−α⟩|α⟩`, normalized.
    Cat,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateKind::SinglePhotonPath => "single-photon-path",
            StateKind::Cat => "cat",
        })
    }
}

/// Best CHSH value found by [`nonviolation_scan`] and where it occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct NonviolationResult {
    pub kind: StateKind,
    /// Cat amplitude; `None` for the single-photon path state.
    pub param: Option<f64>,
    pub z: f64,
    pub bob_angle: QuadratureAngle,
    pub s_max: f64,
    pub arrangement: String,
}

/// Supremum of CHSH over a parameter and binning grid, with Alice measuring
/// `{X, N}` and Bob `{X, N}` or `{P, N}` (both are tried). Detectors are ideal.
pub fn nonviolation_scan(
    kind: StateKind,
    param_grid: &[f64],
    z_grid: &[f64],
) -> Result<NonviolationResult> {
    let states: Vec<(Option<f64>, MixedTwoModeState)> = match kind {
        StateKind::SinglePhotonPath => vec![(None, fock::make_single_photon_path().into())],
        StateKind::Cat => {
            if param_grid.is_empty() {
                return Err(Error::domain("cat scan needs at least one amplitude"));
            }
            param_grid
                .iter()
                .map(|&a| {
                    let s = fock::make_cat(a, fock::cat_min_cutoff(a))?;
                    Ok((Some(a), s.into()))
                })
                .collect::<Result<_>>()?
        }
    };
    if z_grid.is_empty() {
        return Err(Error::domain("empty binning grid"));
    }
    let top = states.iter().map(|(_, s)| s.cutoff()).max().unwrap_or(0);
    let n = Setting::counting(1.0)?;

    let per_z: Vec<NonviolationResult> = z_grid
        .par_iter()
        .map(|&z| {
            let overlaps = overlap_matrix(top, Interval::symmetric(z)?)?;
            let mut best: Option<NonviolationResult> = None;
            for (param, state) in &states {
                let c = state.cutoff();
                let sub: Vec<f64> = (0..=c)
                    .flat_map(|m| (0..=c).map(move |k| (m, k)))
                    .map(|(m, k)| overlaps[m * (top + 1) + k])
                    .collect();
                let effect_n = setting_effect(&n, c)?;
                let effect_x = RegionOperator::rotated(c, &sub, QuadratureAngle::X);
                for angle in [QuadratureAngle::X, QuadratureAngle::P] {
                    let effect_b = RegionOperator::rotated(c, &sub, angle);
                    let bob_q = Setting::Quadrature(QuadratureBinning::symmetric(angle, z)?);
                    let st = scenario_from_effects(
                        state,
                        [Setting::x_bin(z)?, n.clone()],
                        [bob_q, n.clone()],
                        &[effect_x.clone(), effect_n.clone()],
                        &[effect_b, effect_n.clone()],
                    )?;
                    let r = chsh_max(&st);
                    if best.as_ref().is_none_or(|b| r.s > b.s_max) {
                        best = Some(NonviolationResult {
                            kind,
                            param: *param,
                            z,
                            bob_angle: angle,
                            s_max: r.s,
                            arrangement: r.arrangement(),
                        });
                    }
                }
            }
            Ok(best.expect("at least one state"))
        })
        .collect::<Result<_>>()?;

    Ok(per_z
        .into_iter()
        .reduce(|a, b| if b.s_max > a.s_max { b } else { a })
        .expect("non-empty grid"))
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|k| if k + 1 == count { hi } else { lo + step * k as f64 })
                .collect()
        }
    }
}
