//! Adaptive Gauss-Kronrod quadrature on finite intervals.
//!
//! Each panel is evaluated with the 15-point Kronrod rule; the embedded
//! 7-point Gauss rule provides the error estimate. The panel with the largest
//! estimate is bisected until the summed estimate meets the absolute
//! tolerance. A vector-valued variant integrates many functions that share
//! evaluation nodes, which is how whole overlap matrices are built.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerance and resource limits for [`integrate`] and [`integrate_vec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    /// Target bound on the absolute error (per component for vector integrands).
    pub abs_tol: f64,
    /// Upper limit on the number of panels before giving up.
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            abs_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

struct Panel {
    lo: f64,
    hi: f64,
    value: Vec<f64>,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn kronrod_panel<F>(f: &mut F, dim: usize, lo: f64, hi: f64, buf: &mut [f64]) -> Panel
where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if x == 0.0 {
            &[center]
        } else {
            &[center - half * x, center + half * x]
        };
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        for &node in nodes {
            f(node, buf);
            for c in 0..dim {
                kron[c] += wk * buf[c];
                gauss[c] += wg * buf[c];
            }
        }
    }

    let mut err: f64 = 0.0;
    for c in 0..dim {
        kron[c] *= half;
        gauss[c] *= half;
        err = err.max((kron[c] - gauss[c]).abs());
    }
    Panel {
        lo,
        hi,
        value: kron,
        err,
    }
}

/// Integrates a vector-valued function over `[lo, hi]`.
///
/// `f(x, out)` must fill `out[..dim]` with the integrand components at `x`.
/// The returned vector holds the integral of each component. The error bound
/// applies to every component simultaneously.
pub fn integrate_vec<F>(
    mut f: F,
    dim: usize,
    lo: f64,
    hi: f64,
    opts: AdaptiveOptions,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain(format!(
            "integration bounds must be finite, got [{lo}, {hi}]"
        )));
    }
    if lo == hi || dim == 0 {
        return Ok(vec![0.0; dim]);
    }
    let (lo, hi, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };

    let mut buf = vec![0.0; dim];
    // Unit-width starting panels keep oscillatory integrands from agreeing
    // between the two rules by accident on one wide panel.
    let initial = ((hi - lo).ceil() as usize).clamp(1, opts.max_panels.max(1));
    let step = (hi - lo) / initial as f64;
    let mut heap = BinaryHeap::with_capacity(2 * initial);
    let mut total_err = 0.0;
    for k in 0..initial {
        let a = lo + step * k as f64;
        let b = if k + 1 == initial { hi } else { a + step };
        let p = kronrod_panel(&mut f, dim, a, b, &mut buf);
        total_err += p.err;
        heap.push(p);
    }

    while total_err > opts.abs_tol {
        if heap.len() >= opts.max_panels {
            return Err(Error::Numerical {
                what: "adaptive quadrature",
                achieved: total_err,
                required: opts.abs_tol,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Panel cannot be split further in floating point.
            return Err(Error::Numerical {
                what: "adaptive quadrature",
                achieved: total_err,
                required: opts.abs_tol,
            });
        }
        let left = kronrod_panel(&mut f, dim, worst.lo, mid, &mut buf);
        let right = kronrod_panel(&mut f, dim, mid, worst.hi, &mut buf);
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
    }

    // Summation in interval order makes the result independent of heap layout.
    let mut panels = heap.into_vec();
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out = vec![0.0; dim];
    for p in &panels {
        for c in 0..dim {
            out[c] += p.value[c];
        }
    }
    for v in &mut out {
        *v *= sign;
    }
    Ok(out)
}

/// Integrates a scalar function over `[lo, hi]`.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, opts: AdaptiveOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x, out| out[0] = f(x), 1, lo, hi, opts).map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x - 2.0 * x + 1.0, -1.0, 2.0, AdaptiveOptions::default())
            .unwrap();
        // x^3 - x^2 + x from -1 to 2: (8 - 4 + 2) - (-1 - 1 - 1) = 9
        assert!((v - 9.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_matches_erf() {
        let v = integrate(|x| (-x * x).exp(), -0.7, 1.3, AdaptiveOptions::default()).unwrap();
        let exact = 0.5 * std::f64::consts::PI.sqrt() * (libm::erf(1.3) + libm::erf(0.7));
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let opts = AdaptiveOptions::default();
        let a = integrate(f64::cos, 0.0, 2.0, opts).unwrap();
        let b = integrate(f64::cos, 2.0, 0.0, opts).unwrap();
        assert_eq!(a, -b);
        assert!((a - 2f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let v = integrate(|x| (40.0 * x).sin().powi(2), 0.0, 3.0, AdaptiveOptions::default())
            .unwrap();
        let exact = 1.5 - (240.0f64).sin() / 160.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn panel_limit_is_reported() {
        let opts = AdaptiveOptions {
            abs_tol: 1e-14,
            max_panels: 3,
        };
        let err = integrate(|x| (50.0 * x).sin(), 0.0, 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn infinite_bounds_rejected() {
        let err = integrate(|x| x, 0.0, f64::INFINITY, AdaptiveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn vector_components_are_independent() {
        let v = integrate_vec(
            |x, out| {
                out[0] = 1.0;
                out[1] = x;
                out[2] = x * x;
            },
            3,
            0.0,
            3.0,
            AdaptiveOptions::default(),
        )
        .unwrap();
        assert!((v[0] - 3.0).abs() < 1e-14);
        assert!((v[1] - 4.5).abs() < 1e-14);
        assert!((v[2] - 9.0).abs() < 1e-13);
    }
}
