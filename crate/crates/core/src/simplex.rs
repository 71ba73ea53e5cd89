//! Convex minimization over the closed probability simplex.
//!
//! The main routine is exponentiated gradient (entropic mirror descent) with
//! backtracking on the Bregman upper model and an adaptive step. Optimality
//! is certified by the Frank–Wolfe gap `⟨g, s⟩ − min_i g_i`, which bounds
//! `f(s) − f*` for convex `f`. A derivative-free pattern search on the
//! simplex (step halving from 1/8) is kept as a fallback for objectives whose
//! gradient is unavailable or non-finite.

use serde::Serialize;

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the unit simplex `S_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::validation("simplex point needs at least one coordinate"));
        }
        if coords.iter().any(|x| !x.is_finite() || *x < -SIMPLEX_TOL) {
            return Err(Error::validation("simplex coordinates must be nonnegative"));
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::validation(format!(
                "simplex coordinates must sum to 1 (sum = {s:.15})"
            )));
        }
        Ok(SimplexPoint(coords.into_iter().map(|x| x.max(0.0)).collect()))
    }

    pub fn barycenter(r: usize) -> Self {
        SimplexPoint(vec![1.0 / r as f64; r])
    }

    /// The corner `e_i`.
    pub fn vertex(r: usize, i: usize) -> Self {
        let mut v = vec![0.0; r];
        v[i] = 1.0;
        SimplexPoint(v)
    }

    pub(crate) fn from_unchecked(coords: Vec<f64>) -> Self {
        SimplexPoint(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MirrorDescentOptions {
    /// Stop once the Frank–Wolfe gap falls below this.
    pub gap_tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
}

impl Default for MirrorDescentOptions {
    fn default() -> Self {
        MirrorDescentOptions {
            gap_tol: 1e-11,
            max_iter: 50_000,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexMinimum {
    pub point: SimplexPoint,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Frank–Wolfe gap at `point`; an upper bound on `value − min f`.
    pub fw_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn fw_gap(x: &[f64], g: &[f64]) -> f64 {
    let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
    x.iter().zip(g).map(|(xi, gi)| xi * (gi - gmin)).sum::<f64>().max(0.0)
}

// Coordinates are kept above this so multiplicative updates can recover.
const COORD_FLOOR: f64 = 1e-300;

// Iterations without halving the gap before rounding is assumed to dominate.
const STALL_ITERATIONS: usize = 500;

/// Minimizes a convex, differentiable `f` over the simplex by exponentiated
/// gradient. `f` returns the value and gradient; both must be finite on the
/// relative interior.
pub fn minimize_mirror_descent<F>(r: usize, f: F, opts: &MirrorDescentOptions) -> SimplexMinimum
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = vec![1.0 / r as f64; r];
    let (mut fx, mut g) = f(&x);
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut gap = fw_gap(&x, &g);
    let mut best_gap = gap;
    let mut last_progress = 0;

    while iterations < opts.max_iter && gap > opts.gap_tol {
        iterations += 1;
        if gap < 0.5 * best_gap {
            best_gap = gap;
            last_progress = iterations;
        } else if iterations - last_progress > STALL_ITERATIONS {
            break;
        }
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut accepted = false;
        let mut moved = false;
        for _ in 0..80 {
            let mut y: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(xi, gi)| xi * (-step * (gi - gmin)).exp())
                .collect();
            let sum: f64 = y.iter().sum();
            y.iter_mut().for_each(|v| *v = (*v / sum).max(COORD_FLOOR));
            let (fy, gy) = f(&y);
            // By convexity f(y) ≤ f(x) + ⟨∇f(y), y − x⟩, so this test certifies
            // descent using gradients only; objective differences would be lost
            // to rounding near the minimum.
            let slope_x: f64 = g.iter().zip(y.iter().zip(&x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
            let slope_y: f64 = gy.iter().zip(y.iter().zip(&x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
            if fy.is_finite() && gy.iter().all(|v| v.is_finite()) && slope_y <= 0.5 * slope_x {
                moved = y != x;
                x = y;
                fx = fy;
                g = gy;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        gap = fw_gap(&x, &g);
        if !accepted || !moved {
            break;
        }
    }

    snap_to_face(&mut x, &mut fx, &mut g, &f);
    let gap = fw_gap(&x, &g);
    SimplexMinimum {
        converged: gap <= opts.gap_tol.max(1e-9),
        point: SimplexPoint::from_unchecked(x),
        value: fx,
        gradient: g,
        fw_gap: gap,
        iterations,
    }
}

/// Sets negligible coordinates to exactly zero when that does not raise
/// the objective, so boundary minimizers are reported on the boundary.
fn snap_to_face<F>(x: &mut Vec<f64>, fx: &mut f64, g: &mut Vec<f64>, f: &F)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if x.iter().all(|&v| v >= 1e-12) {
        return;
    }
    let mut y: Vec<f64> = x.iter().map(|&v| if v < 1e-12 { 0.0 } else { v }).collect();
    let s: f64 = y.iter().sum();
    y.iter_mut().for_each(|v| *v /= s);
    let (fy, gy) = f(&y);
    if fy.is_finite() && fy <= *fx + 1e-14 * fx.abs().max(1.0) && gy.iter().all(|v| v.is_finite()) {
        *x = y;
        *fx = fy;
        *g = gy;
    }
}

/// Derivative-free pattern search over the simplex: moves mass `h` between
/// pairs of coordinates, halving `h` from 1/8 whenever no move improves.
pub fn minimize_grid_refinement<F>(r: usize, f: F, start: Option<&[f64]>, min_step: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut x: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => vec![1.0 / r as f64; r],
    };
    let mut fx = f(&x);
    let mut h = 0.125;
    while h >= min_step {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for i in 0..r {
            for j in 0..r {
                if i == j || x[j] <= 0.0 {
                    continue;
                }
                let mv = h.min(x[j]);
                let mut y = x.clone();
                y[i] += mv;
                y[j] -= mv;
                let fy = f(&y);
                if fy < best.as_ref().map_or(fx, |b| b.1) {
                    best = Some((y, fy));
                }
            }
        }
        match best {
            Some((y, fy)) => {
                x = y;
                fx = fy;
            }
            None => h *= 0.5,
        }
    }
    (x, fx)
}

/// Minimizes a convex function of one variable on `[lo, hi]` by golden
/// section with parabolic steps (Brent's method). Returns `(argmin, min)`.
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..500 {
        let xm = 0.5 * (a + b);
        let tol1 = xtol * 0.5 + 1e-15 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + if d >= 0.0 { tol1 } else { -tol1 }
        };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    // Convex functions on a closed interval may attain the minimum at an end.
    let (flo, fhi) = (f(lo), f(hi));
    if flo <= fx && flo <= fhi {
        (lo, flo)
    } else if fhi <= fx {
        (hi, fhi)
    } else {
        (x, fx)
    }
}
