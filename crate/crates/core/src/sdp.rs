//! Interior-point solver for `max Tr[Y]` subject to `L_i ⪯ Y ⪯ U_i`.
//!
//! Each constraint contributes a log-det barrier term. For fixed `μ` the
//! barrier function
//!
//! ```text
//! φ_μ(Y) = Tr[Y]/μ + Σ_i ln det(U_i − Y) + Σ_i ln det(Y − L_i)
//! ```
//!
//! is maximized by damped Newton steps, then `μ` is divided by 5. The Newton
//! operator is `Δ ↦ Σ_k P_k Δ P_k` with `P_k` the inverse slacks. One term is
//! inverted directly, two terms in closed form by simultaneous
//! diagonalization, and more terms by a dense Kronecker solve (small
//! dimension) or conjugate gradients preconditioned with the two-term solve.
//!
//! Every reported value carries a duality-gap certificate built from the
//! multipliers `μ (U_i − Y)⁻¹`, so `gap` bounds the distance to the optimum.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::hermitian::{trace_product, HermitianMatrix, SpectralDecomposition};
use crate::C64;

type Mat = DMatrix<C64>;

/// Largest feasibility violation tolerated in a returned solution.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Two-sided problems whose value falls below this are reported as degenerate.
pub const DEGENERATE_VALUE: f64 = 1e-10;

const MU_FACTOR: f64 = 5.0;
const LOOSE_CENTERING: f64 = 0.05;
const TIGHT_CENTERING: f64 = 1e-8;
const DENSE_NEWTON_MAX_DIM: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedTraceProblem {
    dim: usize,
    uppers: Vec<HermitianMatrix>,
    lowers: Option<Vec<HermitianMatrix>>,
}

impl BoundedTraceProblem {
    pub fn new(uppers: Vec<HermitianMatrix>, lowers: Option<Vec<HermitianMatrix>>) -> Result<Self> {
        let dim = uppers
            .first()
            .ok_or_else(|| Error::validation("need at least one upper bound"))?
            .dim();
        for u in &uppers {
            if u.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: u.dim(),
                });
            }
        }
        if let Some(ls) = &lowers {
            if ls.len() != uppers.len() {
                return Err(Error::DimensionMismatch {
                    expected: uppers.len(),
                    found: ls.len(),
                });
            }
            for (i, (l, u)) in ls.iter().zip(&uppers).enumerate() {
                if l.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: l.dim(),
                    });
                }
                let m = u.sub(l).min_eigenvalue();
                if m < -1e-10 {
                    return Err(Error::validation(format!(
                        "lower bound {i} exceeds its upper bound (min eigenvalue of U - L = {m:.3e})"
                    )));
                }
            }
        }
        Ok(BoundedTraceProblem { dim, uppers, lowers })
    }

    /// `max Tr[Y] : Y ⪯ U_i`.
    pub fn upper_only(uppers: Vec<HermitianMatrix>) -> Result<Self> {
        Self::new(uppers, None)
    }

    /// `max Tr[Y] : −A_i ⪯ Y ⪯ A_i`.
    pub fn symmetric(bounds: Vec<HermitianMatrix>) -> Result<Self> {
        let lowers = bounds.iter().map(|b| b.neg()).collect();
        Self::new(bounds, Some(lowers))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn uppers(&self) -> &[HermitianMatrix] {
        &self.uppers
    }

    pub fn lowers(&self) -> Option<&[HermitianMatrix]> {
        self.lowers.as_deref()
    }

    pub fn is_two_sided(&self) -> bool {
        self.lowers.is_some()
    }

    fn is_symmetric(&self) -> bool {
        match &self.lowers {
            None => false,
            Some(ls) => ls
                .iter()
                .zip(&self.uppers)
                .all(|(l, u)| l.add(u).max_abs_diff(&HermitianMatrix::zeros(self.dim)) == 0.0),
        }
    }

    /// Largest negative-eigenvalue magnitude of `U_i − Y` and `Y − L_i`.
    pub fn feasibility_residual(&self, y: &HermitianMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for u in &self.uppers {
            worst = worst.max(-u.sub(y).min_eigenvalue());
        }
        if let Some(ls) = &self.lowers {
            for l in ls {
                worst = worst.max(-y.sub(l).min_eigenvalue());
            }
        }
        worst.max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub y: HermitianMatrix,
    /// `Tr[Y]` of the returned strictly feasible iterate.
    pub value: f64,
    /// Dual objective of the certificate; the optimum lies in `[value, dual_value]`.
    pub dual_value: f64,
    /// Multipliers of the upper constraints. For upper-only problems they sum
    /// to the identity and form a POVM.
    pub primal_certificate: Vec<HermitianMatrix>,
    /// Multipliers of the lower constraints (empty for upper-only problems).
    pub lower_certificate: Vec<HermitianMatrix>,
    pub gap: f64,
    /// Newton steps taken.
    pub iterations: usize,
    /// Set when the working subspace is trivial or the value is below
    /// [`DEGENERATE_VALUE`] on a two-sided problem.
    pub degenerate: bool,
    /// Isometry onto the working subspace when the problem was compressed.
    /// Certificates are expressed in those coordinates.
    pub subspace: Option<DMatrix<C64>>,
}

/// One Newton step as reported to an observer.
#[derive(Debug, Clone, Copy)]
pub struct IterationTrace {
    pub iteration: usize,
    pub mu: f64,
    pub primal: f64,
    pub decrement: f64,
    pub step: f64,
}

pub struct SdpOptions<'a> {
    pub tol: f64,
    pub max_iter: usize,
    pub observer: Option<&'a dyn Fn(&IterationTrace)>,
}

impl Default for SdpOptions<'_> {
    fn default() -> Self {
        SdpOptions {
            tol: 1e-8,
            max_iter: 200,
            observer: None,
        }
    }
}

pub fn solve_bounded_trace(problem: &BoundedTraceProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    solve_bounded_trace_with(
        problem,
        &SdpOptions {
            tol,
            max_iter,
            observer: None,
        },
    )
}

pub fn solve_bounded_trace_with(problem: &BoundedTraceProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::validation("tolerance must be positive"));
    }
    let d = problem.dim;
    let uppers: Vec<Mat> = problem.uppers.iter().map(|u| u.matrix().clone()).collect();
    match &problem.lowers {
        None => {
            let c = problem.uppers.iter().map(|u| u.operator_norm()).fold(0.0, f64::max) + 1.0;
            let y0 = Mat::identity(d, d).scale(-c);
            let terms: Vec<Term> = uppers.into_iter().map(Term::upper).collect();
            let mu0 = c / terms.len() as f64;
            let out = path_follow(terms, y0, mu0, opts)?;
            Ok(out.finish(None, false))
        }
        Some(_) if problem.is_symmetric() => solve_symmetric(&uppers, opts),
        Some(lowers) => {
            let lowers: Vec<Mat> = lowers.iter().map(|l| l.matrix().clone()).collect();
            let zero = Mat::zeros(d, d);
            let mid = uppers
                .iter()
                .zip(&lowers)
                .fold(Mat::zeros(d, d), |acc, (u, l)| acc + (u + l).scale(0.5 / uppers.len() as f64));
            let strictly_inside = |y: &Mat| {
                uppers.iter().all(|u| Cholesky::new(u - y).is_some())
                    && lowers.iter().all(|l| Cholesky::new(y - l).is_some())
            };
            let y0 = if strictly_inside(&zero) {
                zero
            } else if strictly_inside(&mid) {
                mid
            } else {
                return Err(Error::domain(
                    "two-sided problem has no strictly feasible starting point at 0 or the midpoint",
                ));
            };
            let scale = problem.uppers.iter().map(|u| u.operator_norm()).fold(1e-300, f64::max);
            let mut terms: Vec<Term> = uppers.into_iter().map(Term::upper).collect();
            terms.extend(lowers.into_iter().map(Term::lower));
            let mu0 = scale / terms.len() as f64;
            let out = path_follow(terms, y0, mu0, opts)?;
            let degenerate = out.value() < DEGENERATE_VALUE;
            Ok(out.finish(None, degenerate))
        }
    }
}

/// Optimal measurement for an upper-only problem. Multipliers are
/// renormalized to sum exactly to the identity, with any leftover residual
/// assigned to the first operator.
pub fn recover_povm(solution: &SdpSolution, problem: &BoundedTraceProblem) -> Result<Vec<HermitianMatrix>> {
    if problem.is_two_sided() {
        return Err(Error::UnsupportedForm(
            "POVM recovery applies only to upper-bound-only problems".into(),
        ));
    }
    if solution.primal_certificate.len() != problem.uppers.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.uppers.len(),
            found: solution.primal_certificate.len(),
        });
    }
    let zs: Vec<Mat> = solution.primal_certificate.iter().map(|m| m.matrix().clone()).collect();
    Ok(normalize_povm(&zs).into_iter().map(HermitianMatrix::from_raw).collect())
}

fn normalize_povm(zs: &[Mat]) -> Vec<Mat> {
    let d = zs[0].nrows();
    let total = zs.iter().fold(Mat::zeros(d, d), |acc, z| acc + z);
    let inv_sqrt = HermitianMatrix::from_raw(total)
        .eig()
        .apply(|l| if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 })
        .into_matrix();
    let mut ms: Vec<Mat> = zs.iter().map(|z| hermitize(&(&inv_sqrt * z * &inv_sqrt))).collect();
    let sum = ms.iter().fold(Mat::zeros(d, d), |acc, m| acc + m);
    ms[0] += Mat::identity(d, d) - sum;
    ms[0] = hermitize(&ms[0]);
    ms
}

/// Symmetric two-sided problems `−A_i ⪯ Y ⪯ A_i` with PSD `A_i`. Any feasible
/// `Y` is supported on `∩ supp(A_i)`, so the problem is compressed onto that
/// subspace (replacing each `A_i` by its shorted operator) until every bound
/// is positive definite, then solved from `Y = 0`.
fn solve_symmetric(bounds: &[Mat], opts: &SdpOptions) -> Result<SdpSolution> {
    let d = bounds[0].nrows();
    for (i, b) in bounds.iter().enumerate() {
        if HermitianMatrix::from_raw(b.clone()).min_eigenvalue() < -1e-10 {
            return Err(Error::validation(format!(
                "symmetric bound {i} must be positive semi-definite"
            )));
        }
    }
    let (v, reduced) = working_subspace(bounds);
    let k = v.ncols();
    if k == 0 {
        return Ok(SdpSolution {
            y: HermitianMatrix::zeros(d),
            value: 0.0,
            dual_value: 0.0,
            primal_certificate: Vec::new(),
            lower_certificate: Vec::new(),
            gap: 0.0,
            iterations: 0,
            degenerate: true,
            subspace: Some(v),
        });
    }
    let scale = reduced
        .iter()
        .map(|a| HermitianMatrix::from_raw(a.clone()).operator_norm())
        .fold(1e-300, f64::max);
    let mut terms: Vec<Term> = reduced.iter().cloned().map(Term::upper).collect();
    terms.extend(reduced.iter().map(|a| Term::lower(-a)));
    let mu0 = scale / terms.len() as f64;
    let mut out = path_follow(terms, Mat::zeros(k, k), mu0, opts)?;
    if out.value() < 0.0 {
        // Y = 0 is feasible and no worse.
        out.y = Mat::zeros(k, k);
    }
    let degenerate = out.value() < DEGENERATE_VALUE;
    let embed = if k == d { None } else { Some(v) };
    Ok(out.finish(embed, degenerate))
}

/// Iterated compression onto `∩ supp(A_i)`. Returns the isometry `V` (`d × k`)
/// and the compressed positive-definite bounds.
fn working_subspace(bounds: &[Mat]) -> (Mat, Vec<Mat>) {
    let d = bounds[0].nrows();
    let mut v = Mat::identity(d, d);
    let mut cur: Vec<Mat> = bounds.to_vec();
    loop {
        let k = v.ncols();
        // Q = Σ (I − P_i) vanishes exactly on the common support.
        let mut q = Mat::zeros(k, k);
        for a in &cur {
            let e = HermitianMatrix::from_raw(a.clone()).eig();
            let thr = e.support_threshold();
            q += e.apply(|l| if l > thr { 0.0 } else { 1.0 }).into_matrix();
        }
        let eq = HermitianMatrix::from_raw(q).eig();
        let keep = eq.columns_where(|l| l < 0.5);
        let drop = eq.columns_where(|l| l >= 0.5);
        if keep.ncols() == k {
            return (v, cur);
        }
        if keep.ncols() == 0 {
            return (Mat::zeros(d, 0), Vec::new());
        }
        cur = cur.iter().map(|a| shorted_operator(a, &keep, &drop)).collect();
        v = &v * &keep;
    }
}

/// `B†AB − B†AC (C†AC)⁺ C†AB`: the largest `X` with `B X B† ⪯ A`.
fn shorted_operator(a: &Mat, b: &Mat, c: &Mat) -> Mat {
    let bab = b.adjoint() * a * b;
    if c.ncols() == 0 {
        return hermitize(&bab);
    }
    let cac = HermitianMatrix::from_raw(c.adjoint() * a * c).eig();
    let thr = cac.support_threshold();
    let pinv = cac.apply(|l| if l > thr { 1.0 / l } else { 0.0 }).into_matrix();
    let bac = b.adjoint() * a * c;
    hermitize(&(bab - &bac * pinv * bac.adjoint()))
}

fn hermitize(m: &Mat) -> Mat {
    (m + m.adjoint()).scale(0.5)
}

/// A barrier term with slack `σ (B − Y)`: `σ = +1` for `Y ⪯ U`,
/// `σ = −1` for `Y ⪰ L`.
#[derive(Clone)]
struct Term {
    bound: Mat,
    sign: f64,
}

impl Term {
    fn upper(u: Mat) -> Self {
        Term { bound: u, sign: 1.0 }
    }

    fn lower(l: Mat) -> Self {
        Term { bound: l, sign: -1.0 }
    }

    fn slack(&self, y: &Mat) -> Mat {
        hermitize(&(&self.bound - y).scale(self.sign))
    }
}

struct PathState {
    terms: Vec<Term>,
    y: Mat,
    /// Slacks carried alongside `Y` and updated incrementally, so their
    /// rounding error scales with the slack rather than with the bound.
    slacks: Vec<Mat>,
    mu: f64,
    iterations: usize,
    certificate: Option<Certificate>,
}

struct Certificate {
    uppers: Vec<Mat>,
    lowers: Vec<Mat>,
    dual: f64,
}

impl PathState {
    fn value(&self) -> f64 {
        self.y.trace().re
    }

    fn finish(mut self, embed: Option<Mat>, degenerate: bool) -> SdpSolution {
        let cert = self.certificate.take().unwrap_or_else(|| certificate(&self.terms, &self.slacks, self.mu));
        let value = self.value();
        let y_full = match &embed {
            Some(v) => v * &self.y * v.adjoint(),
            None => self.y.clone(),
        };
        SdpSolution {
            y: HermitianMatrix::from_raw(y_full),
            value,
            dual_value: cert.dual,
            primal_certificate: cert.uppers.into_iter().map(HermitianMatrix::from_raw).collect(),
            lower_certificate: cert.lowers.into_iter().map(HermitianMatrix::from_raw).collect(),
            gap: (cert.dual - value).max(0.0),
            iterations: self.iterations,
            degenerate,
            subspace: embed,
        }
    }
}

/// Multipliers from the Newton step, `Z_k = μ S_k⁻¹ (S_k + σ_k Δ) S_k⁻¹`,
/// which satisfy `Σ σ_k Z_k = I` up to the linear solve; `μ S_k⁻¹` is the
/// fallback when the step leaves the PSD cone. Either is then repaired to
/// satisfy the dual equality exactly.
fn certificate(terms: &[Term], slacks: &[Mat], mu: f64) -> Certificate {
    let d = slacks[0].nrows();
    let inverses: Option<Vec<Mat>> = slacks.iter().map(inverse_hpd).map(|i| i.map(|m| hermitize(&m))).collect();
    let zs: Vec<Mat> = match inverses {
        Some(inv) => {
            let mut grad = Mat::identity(d, d).scale(1.0 / mu);
            for (t, i) in terms.iter().zip(&inv) {
                grad -= i.scale(t.sign);
            }
            let pairs: Vec<(Mat, Mat)> = inv.iter().cloned().zip(slacks.iter().cloned()).collect();
            let delta = hermitize(&newton_direction(&pairs, &hermitize(&grad)));
            let stepped: Vec<Mat> = terms
                .iter()
                .zip(&inv)
                .map(|(t, i)| hermitize(&((i + i * delta.scale(t.sign) * i).scale(mu))))
                .collect();
            let psd = delta.iter().all(|x| x.re.is_finite() && x.im.is_finite())
                && stepped.iter().all(|z| HermitianMatrix::from_raw(z.clone()).min_eigenvalue() >= 0.0);
            if psd {
                stepped
            } else {
                inv.iter().map(|i| i.scale(mu)).collect()
            }
        }
        None => slacks
            .iter()
            .map(|s| inverse_hpd(s).map_or_else(|| Mat::zeros(d, d), |i| hermitize(&i.scale(mu))))
            .collect(),
    };
    let mut ups = Vec::new();
    let mut lows = Vec::new();
    for (t, z) in terms.iter().zip(zs) {
        if t.sign > 0.0 {
            ups.push((z, &t.bound));
        } else {
            lows.push((z, &t.bound));
        }
    }
    if lows.is_empty() {
        let zs: Vec<Mat> = ups.iter().map(|(z, _)| z.clone()).collect();
        let ms = normalize_povm(&zs);
        let dual = ms.iter().zip(&ups).map(|(m, (_, u))| trace_product(m, u)).sum();
        return Certificate {
            uppers: ms,
            lowers: Vec::new(),
            dual,
        };
    }
    // Rescale by D^{-1/2} with D = ΣZ − ΣW ≈ I so the dual equality holds
    // exactly; fall back to an additive repair if D is not positive definite.
    let mut dmat = Mat::zeros(d, d);
    for (z, _) in &ups {
        dmat += z;
    }
    for (w, _) in &lows {
        dmat -= w;
    }
    let e = HermitianMatrix::from_raw(hermitize(&dmat)).eig();
    if e.eigenvalues[0] > 0.0 {
        let inv_sqrt = e.apply(|l| 1.0 / l.sqrt()).into_matrix();
        for (z, _) in ups.iter_mut().chain(lows.iter_mut()) {
            *z = hermitize(&(&inv_sqrt * &*z * &inv_sqrt));
        }
    } else {
        let residual = HermitianMatrix::from_raw(Mat::identity(d, d) - dmat).eig();
        ups[0].0 += residual.apply(|l| l.max(0.0)).into_matrix();
        lows[0].0 += residual.apply(|l| (-l).max(0.0)).into_matrix();
    }
    let dual = ups.iter().map(|(z, u)| trace_product(z, u)).sum::<f64>()
        - lows.iter().map(|(w, l)| trace_product(w, l)).sum::<f64>();
    Certificate {
        uppers: ups.into_iter().map(|(z, _)| z).collect(),
        lowers: lows.into_iter().map(|(w, _)| w).collect(),
        dual,
    }
}

fn inverse_hpd(m: &Mat) -> Option<Mat> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

fn path_follow(terms: Vec<Term>, y0: Mat, mu0: f64, opts: &SdpOptions) -> Result<PathState> {
    let d = y0.nrows();
    let m = terms.len();
    let slacks = terms.iter().map(|t| t.slack(&y0)).collect();
    let mut st = PathState {
        terms,
        slacks,
        y: y0,
        mu: mu0,
        iterations: 0,
        certificate: None,
    };
    // Smallest-gap iterate seen so far; near a degenerate optimum the
    // certificate can get worse as μ shrinks past machine precision.
    let mut best: Option<(f64, Mat, Certificate)> = None;
    loop {
        let mut converged = center(&mut st, LOOSE_CENTERING, opts)?;
        let mut cert = certificate(&st.terms, &st.slacks, st.mu);
        let mut gap = cert.dual - st.value();
        if gap > opts.tol && (m * d) as f64 * st.mu <= opts.tol / 2.0 {
            converged = center(&mut st, TIGHT_CENTERING, opts)?;
            cert = certificate(&st.terms, &st.slacks, st.mu);
            gap = cert.dual - st.value();
        }
        if gap <= opts.tol {
            st.certificate = Some(cert);
            return Ok(st);
        }
        if best.as_ref().is_none_or(|b| gap < b.0) {
            best = Some((gap, st.y.clone(), cert));
        }
        if !converged || st.iterations >= opts.max_iter {
            let (gap, y, cert) = best.expect("recorded above");
            st.y = y;
            st.certificate = Some(cert);
            let iterations = st.iterations;
            return Err(Error::NonConvergence {
                iterations,
                gap,
                best: Box::new(st.finish(None, false)),
            });
        }
        st.mu /= MU_FACTOR;
    }
}

/// Damped Newton on `φ_μ` until `λ² ≤ target`. Returns `false` when the
/// iteration budget runs out first.
fn center(st: &mut PathState, target: f64, opts: &SdpOptions) -> Result<bool> {
    let d = st.y.nrows();
    loop {
        if st.iterations >= opts.max_iter {
            return Ok(false);
        }
        let mut chols = Vec::with_capacity(st.terms.len());
        let mut inverses = Vec::with_capacity(st.terms.len());
        let mut grad = Mat::identity(d, d).scale(1.0 / st.mu);
        for (t, s) in st.terms.iter().zip(&st.slacks) {
            let s = s.clone();
            let c = Cholesky::new(s.clone()).ok_or_else(|| {
                Error::domain("interior-point iterate left the feasible region")
            })?;
            let inv = hermitize(&c.inverse());
            grad -= inv.scale(t.sign);
            chols.push(c);
            inverses.push((inv, s));
        }
        let grad = hermitize(&grad);
        let delta = hermitize(&newton_direction(&inverses, &grad));
        let decrement = trace_product(&grad, &delta);
        if !(decrement.is_finite()) {
            return Err(Error::domain("Newton system produced a non-finite direction"));
        }
        if decrement <= target {
            return Ok(true);
        }

        // Eigenvalues of L⁻¹(σΔ)L⁻† give the exact barrier change along Δ.
        let mut spectra = Vec::with_capacity(st.terms.len());
        let mut alpha_max = f64::INFINITY;
        for (t, c) in st.terms.iter().zip(&chols) {
            let ld = c.l();
            let sd = delta.scale(t.sign);
            let x = ld.solve_lower_triangular(&sd).expect("Cholesky factor is invertible");
            let x = ld
                .solve_lower_triangular(&x.adjoint())
                .expect("Cholesky factor is invertible");
            let nu = HermitianMatrix::from_raw(x).eigenvalues();
            let top = *nu.last().unwrap();
            if top > 0.0 {
                alpha_max = alpha_max.min(1.0 / top);
            }
            spectra.push(nu);
        }
        let tr_delta = delta.trace().re;
        let psi = |a: f64| -> f64 {
            let mut v = a * tr_delta / st.mu;
            for nu in &spectra {
                for &n in nu {
                    v += (-a * n).ln_1p();
                }
            }
            v
        };
        let mut alpha = (0.99 * alpha_max).min(1.0);
        let mut accepted = false;
        for _ in 0..60 {
            let v = psi(alpha);
            if v.is_finite() && v >= 0.01 * alpha * decrement {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        st.iterations += 1;
        if let Some(obs) = opts.observer {
            obs(&IterationTrace {
                iteration: st.iterations,
                mu: st.mu,
                primal: st.value(),
                decrement,
                step: if accepted { alpha } else { 0.0 },
            });
        }
        if !accepted {
            // No measurable progress at machine precision.
            return Ok(true);
        }
        st.y = hermitize(&(&st.y + delta.scale(alpha)));
        for (t, sl) in st.terms.iter().zip(st.slacks.iter_mut()) {
            *sl = hermitize(&(&*sl - delta.scale(alpha * t.sign)));
        }
    }
}

/// Solves `Σ_k P_k Δ P_k = G` where `inverses[k] = (P_k, P_k⁻¹)`.
fn newton_direction(inverses: &[(Mat, Mat)], g: &Mat) -> Mat {
    let d = g.nrows();
    match inverses.len() {
        1 => {
            let s = &inverses[0].1;
            s * g * s
        }
        2 => TwoTermSolver::new(&inverses[0], &inverses[1].0).solve(g),
        _ if d <= DENSE_NEWTON_MAX_DIM => dense_newton(inverses, g),
        _ => pcg_newton(inverses, g),
    }
}

/// Closed-form inverse of `Δ ↦ P₁ΔP₁ + P₂ΔP₂`: with `R = P₁^{-1/2}` and
/// `R P₂ R = W diag(a) W†`, `Δ = R W [ (W† R G R W)_{jk} / (1 + a_j a_k) ] W† R`.
struct TwoTermSolver {
    rw: Mat,
    a: Vec<f64>,
}

impl TwoTermSolver {
    fn new(first: &(Mat, Mat), p2: &Mat) -> Self {
        let r = sqrt_psd(&first.1);
        let a_mat = hermitize(&(&r * p2 * &r));
        let SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        } = HermitianMatrix::from_raw(a_mat).eig();
        TwoTermSolver {
            rw: &r * eigenvectors,
            a: eigenvalues,
        }
    }

    fn solve(&self, g: &Mat) -> Mat {
        let mut x = self.rw.adjoint() * g * &self.rw;
        let n = self.a.len();
        for j in 0..n {
            for k in 0..n {
                x[(j, k)] /= 1.0 + self.a[j] * self.a[k];
            }
        }
        &self.rw * x * self.rw.adjoint()
    }
}

fn sqrt_psd(m: &Mat) -> Mat {
    HermitianMatrix::from_raw(m.clone())
        .eig()
        .apply(|l| l.max(0.0).sqrt())
        .into_matrix()
}

fn dense_newton(inverses: &[(Mat, Mat)], g: &Mat) -> Mat {
    let d = g.nrows();
    let mut big = DMatrix::<C64>::zeros(d * d, d * d);
    for (p, _) in inverses {
        big += p.transpose().kronecker(p);
    }
    let big = hermitize(&big);
    let rhs = DMatrix::from_column_slice(d * d, 1, g.as_slice());
    match Cholesky::new(big.clone()) {
        Some(c) => {
            let sol = c.solve(&rhs);
            DMatrix::from_column_slice(d, d, sol.as_slice())
        }
        None => pcg_newton(inverses, g),
    }
}

fn apply_operator(inverses: &[(Mat, Mat)], x: &Mat) -> Mat {
    let d = x.nrows();
    let mut out = Mat::zeros(d, d);
    for (p, _) in inverses {
        out += p * x * p;
    }
    hermitize(&out)
}

fn pcg_newton(inverses: &[(Mat, Mat)], g: &Mat) -> Mat {
    let mut order: Vec<usize> = (0..inverses.len()).collect();
    let norms: Vec<f64> = inverses.iter().map(|(p, _)| p.norm()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let pre = TwoTermSolver::new(&inverses[order[0]], &inverses[order[1]].0);

    let g_norm = g.norm();
    let mut x = hermitize(&pre.solve(g));
    let mut r = g - apply_operator(inverses, &x);
    let mut z = hermitize(&pre.solve(&r));
    let mut p = z.clone();
    let mut rz = trace_product(&r, &z);
    let limit = 4 * g.nrows() * g.nrows() + 50;
    for _ in 0..limit {
        if r.norm() <= 1e-13 * g_norm {
            break;
        }
        let ap = apply_operator(inverses, &p);
        let pap = trace_product(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x += p.scale(alpha);
        r -= ap.scale(alpha);
        z = hermitize(&pre.solve(&r));
        let rz_next = trace_product(&r, &z);
        p = &z + p.scale(rz_next / rz);
        rz = rz_next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_solution(problem: &BoundedTraceProblem, sol: &SdpSolution, tol: f64) {
        assert!(problem.feasibility_residual(&sol.y) <= FEASIBILITY_TOL);
        assert!(sol.gap <= tol, "gap {}", sol.gap);
        for z in &sol.primal_certificate {
            assert!(z.min_eigenvalue() >= -1e-8);
        }
    }

    #[test]
    fn single_constraint_value_is_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random::hermitian(4, &mut rng);
        let p = BoundedTraceProblem::upper_only(vec![a.clone()]).unwrap();
        let sol = solve_bounded_trace(&p, 1e-8, 200).unwrap();
        check_solution(&p, &sol, 1e-8);
        assert!((sol.value - a.trace()).abs() < 1e-8);
        assert!(sol.y.max_abs_diff(&a) < 1e-6);
    }

    #[test]
    fn helstrom_for_qubit_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let r1 = random::density(2, 2, &mut rng);
            let r2 = random::density(2, 1, &mut rng);
            let p = BoundedTraceProblem::upper_only(vec![
                r1.as_hermitian().scale(0.5),
                r2.as_hermitian().scale(0.5),
            ])
            .unwrap();
            let sol = solve_bounded_trace(&p, 1e-8, 200).unwrap();
            check_solution(&p, &sol, 1e-8);
            let helstrom = 0.5 * (1.0 - 0.5 * r1.as_hermitian().sub(r2.as_hermitian()).trace_norm());
            assert!((sol.value - helstrom).abs() < 1e-8, "{} vs {}", sol.value, helstrom);
        }
    }

    #[test]
    fn three_and_more_terms_use_iterative_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [3, 12] {
            let states: Vec<HermitianMatrix> = (0..4)
                .map(|_| random::full_rank_density(d, &mut rng).into_hermitian().scale(0.25))
                .collect();
            let p = BoundedTraceProblem::upper_only(states).unwrap();
            let sol = solve_bounded_trace(&p, 1e-8, 200).unwrap();
            check_solution(&p, &sol, 1e-8);
            let povm = recover_povm(&sol, &p).unwrap();
            let obj: f64 = povm.iter().zip(p.uppers()).map(|(m, u)| m.trace_product(u)).sum();
            assert!((obj - sol.value).abs() <= 1e-7);
        }
    }

    #[test]
    fn symmetric_problem_on_orthogonal_states_is_degenerate() {
        let a = HermitianMatrix::from_diagonal(&[1.0, 0.0]);
        let b = HermitianMatrix::from_diagonal(&[0.0, 1.0]);
        let p = BoundedTraceProblem::symmetric(vec![a, b]).unwrap();
        let sol = solve_bounded_trace(&p, 1e-8, 200).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.value, 0.0);
        assert!(matches!(recover_povm(&sol, &p), Err(Error::UnsupportedForm(_))));
    }

    #[test]
    fn symmetric_problem_single_bound() {
        // max Tr Y over −A ⪯ Y ⪯ A is Tr A.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random::density(3, 2, &mut rng).into_hermitian();
        let p = BoundedTraceProblem::symmetric(vec![a.clone()]).unwrap();
        let sol = solve_bounded_trace(&p, 1e-8, 200).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-8);
        assert!(p.feasibility_residual(&sol.y) <= FEASIBILITY_TOL);
    }

    #[test]
    fn general_two_sided_from_zero() {
        let u = HermitianMatrix::from_diagonal(&[1.0, 2.0]);
        let l = HermitianMatrix::from_diagonal(&[-1.0, -0.5]);
        let p = BoundedTraceProblem::new(vec![u], Some(vec![l])).unwrap();
        let sol = solve_bounded_trace(&p, 1e-8, 200).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-8);
    }

    #[test]
    fn validation() {
        assert!(BoundedTraceProblem::upper_only(vec![]).is_err());
        let a = HermitianMatrix::identity(2);
        let b = HermitianMatrix::identity(3);
        assert!(BoundedTraceProblem::upper_only(vec![a.clone(), b]).is_err());
        assert!(BoundedTraceProblem::new(vec![a.clone()], Some(vec![a.scale(2.0)])).is_err());
    }

    #[test]
    fn observer_sees_every_step() {
        let counter = std::cell::Cell::new(0);
        let obs = |_: &IterationTrace| counter.set(counter.get() + 1);
        let p = BoundedTraceProblem::upper_only(vec![
            HermitianMatrix::from_diagonal(&[0.5, 0.0]),
            HermitianMatrix::from_diagonal(&[0.0, 0.5]),
        ])
        .unwrap();
        let sol = solve_bounded_trace_with(
            &p,
            &SdpOptions {
                observer: Some(&obs),
                ..SdpOptions::default()
            },
        )
        .unwrap();
        assert_eq!(counter.get(), sol.iterations);
        assert!(sol.value.abs() < 1e-8);
    }

    #[test]
    fn iteration_budget_reports_best_iterate() {
        let p = BoundedTraceProblem::upper_only(vec![
            HermitianMatrix::from_diagonal(&[0.5, 0.2]),
            HermitianMatrix::from_diagonal(&[0.1, 0.5]),
        ])
        .unwrap();
        match solve_bounded_trace(&p, 1e-8, 3) {
            Err(Error::NonConvergence { best, .. }) => {
                assert!(p.feasibility_residual(&best.y) <= FEASIBILITY_TOL);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
