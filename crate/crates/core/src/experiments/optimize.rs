//! Two-stage 1-D optimizer: a uniform grid locates the best cell, then
//! golden-section search refines inside the neighbouring cells.

use rayon::prelude::*;

use crate::{Error, Result};

/// Search settings for [`maximize`] and [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Lower end of the search range (excluded from evaluation).
    pub lo: f64,
    /// Upper end of the search range (included in the grid).
    pub hi: f64,
    /// Number of grid points in `(lo, hi]`.
    pub grid: usize,
    /// Final bracket width of the golden-section stage.
    pub tol: f64,
}

impl SearchOptions {
    pub fn new(lo: f64, hi: f64) -> Self {
        SearchOptions {
            lo,
            hi,
            grid: 80,
            tol: 1e-7,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

fn golden_min<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Minimizes `f` over `(lo, hi]`; returns `(argmin, min)`.
pub fn minimize<F>(f: F, opts: SearchOptions) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(opts.lo < opts.hi) || opts.grid == 0 {
        return Err(Error::domain(format!(
            "empty search range ({}, {}] with {} points",
            opts.lo, opts.hi, opts.grid
        )));
    }
    let step = (opts.hi - opts.lo) / opts.grid as f64;
    let xs: Vec<f64> = (1..=opts.grid).map(|k| opts.lo + step * k as f64).collect();
    let values = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    let left = if best == 0 { opts.lo } else { xs[best - 1] };
    let right = if best + 1 == xs.len() { opts.hi } else { xs[best + 1] };
    let (xg, fg) = golden_min(&f, left, right, opts.tol)?;
    Ok(if fg <= values[best] {
        (xg, fg)
    } else {
        (xs[best], values[best])
    })
}

/// Maximizes `f` over `(lo, hi]`; returns `(argmax, max)`.
pub fn maximize<F>(f: F, opts: SearchOptions) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let (x, v) = minimize(|x| f(x).map(|v| -v), opts)?;
    Ok((x, -v))
}

/// Bisection for the sign change of a function with `f(lo) ≤ 0 < f(hi)`.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
