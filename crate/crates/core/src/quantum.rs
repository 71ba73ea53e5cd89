//! Quantum antidistinguishability: the one-shot SDP and bounds on the
//! many-copy error exponent.
//!
//! The exponent `E` of an ensemble is bracketed by
//!
//! ```text
//! max_{i<j} ξ(ρ_i, ρ_j)  ≤  E  ≤  −ln κ(ρ_1, …, ρ_r)
//! ```
//!
//! with `ξ` the quantum Chernoff divergence and `κ = sup{Tr Y : −ρ_i ⪯ Y ⪯ ρ_i}`.
//! Any fixed measurement also gives a lower bound: the classical Chernoff
//! divergence of the outcome distributions it induces.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{self, validate_priors, ClassicalEnsemble, Distribution, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::hermitian::{checked_pow, operator_min, DensityMatrix, HermitianMatrix, SUPPORT_CUTOFF};
use crate::sdp::{self, BoundedTraceProblem, SdpSolution};
use crate::simplex::{self, SimplexPoint};
use crate::{random, ExtendedReal, C64};

/// Duality-gap tolerance used for every SDP solved in this module.
pub const SDP_TOL: f64 = 1e-8;
pub const SDP_MAX_ITER: usize = 200;

/// Largest dimension accepted for SDPs on tensor products.
pub const SDP_DIM_CAP: usize = 64;

/// Two states are treated as commuting when `‖[ρ_i, ρ_j]‖_∞` is at most this.
pub const COMMUTATOR_TOL: f64 = 1e-10;

const POVM_ELEMENT_TOL: f64 = 1e-8;
const POVM_SUM_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumEnsemble {
    priors: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl QuantumEnsemble {
    pub fn new(priors: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        validate_priors(&priors, NORMALIZATION_TOL)?;
        if priors.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: priors.len(),
                found: states.len(),
            });
        }
        shared_dim(&states)?;
        Ok(QuantumEnsemble { priors, states })
    }

    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let r = states.len();
        QuantumEnsemble::new(vec![1.0 / r as f64; r], states)
    }

    /// Diagonal states built from the distributions of a classical ensemble.
    pub fn from_classical(ensemble: &ClassicalEnsemble) -> Result<Self> {
        let states = ensemble
            .dists()
            .iter()
            .map(|d| DensityMatrix::from_diagonal(d.weights()))
            .collect::<Result<Vec<_>>>()?;
        QuantumEnsemble::new(ensemble.priors().to_vec(), states)
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        QuantumEnsemble::new(priors, self.states.clone())
    }

    /// `{(η_i, ρ_i^{⊗n})}` with the total dimension capped.
    pub fn tensor_power(&self, n: usize, dim_cap: usize) -> Result<Self> {
        let states = self
            .states
            .iter()
            .map(|s| {
                s.as_hermitian()
                    .tensor_power_capped(n, dim_cap)
                    .and_then(DensityMatrix::normalized)
            })
            .collect::<Result<Vec<_>>>()?;
        QuantumEnsemble::new(self.priors.clone(), states)
    }

    fn weighted(&self) -> Vec<HermitianMatrix> {
        self.priors
            .iter()
            .zip(&self.states)
            .map(|(eta, s)| s.as_hermitian().scale(*eta))
            .collect()
    }
}

fn shared_dim(states: &[DensityMatrix]) -> Result<usize> {
    let d = states
        .first()
        .ok_or_else(|| Error::validation("need at least one state"))?
        .dim();
    for s in states {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
    }
    Ok(d)
}

fn require_pairs(states: &[DensityMatrix]) -> Result<usize> {
    if states.len() < 2 {
        return Err(Error::validation("need at least two states"));
    }
    shared_dim(states)
}

/// A measurement: PSD operators summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianMatrix>) -> Result<Self> {
        let d = elements
            .first()
            .ok_or_else(|| Error::validation("a POVM needs at least one element"))?
            .dim();
        let mut sum = HermitianMatrix::zeros(d);
        for (x, m) in elements.iter().enumerate() {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.dim(),
                });
            }
            let lo = m.min_eigenvalue();
            if lo < -POVM_ELEMENT_TOL {
                return Err(Error::validation(format!(
                    "POVM element {x} is not positive semi-definite (eigenvalue {lo:.3e})"
                )));
            }
            sum = sum.add(m);
        }
        let dev = sum.sub(&HermitianMatrix::identity(d)).operator_norm();
        if dev > POVM_SUM_TOL {
            return Err(Error::validation(format!(
                "POVM elements must sum to the identity (deviation {dev:.3e})"
            )));
        }
        Ok(Povm { elements })
    }

    /// Rank-one projectors onto the columns of a unitary.
    pub fn from_basis(u: &DMatrix<C64>) -> Result<Self> {
        if u.nrows() != u.ncols() {
            return Err(Error::validation("basis matrix must be square"));
        }
        Povm::new(
            (0..u.ncols())
                .map(|c| HermitianMatrix::outer(&u.column(c).into_owned()))
                .collect(),
        )
    }

    pub fn computational(d: usize) -> Self {
        Povm {
            elements: (0..d)
                .map(|i| {
                    let mut diag = vec![0.0; d];
                    diag[i] = 1.0;
                    HermitianMatrix::from_diagonal(&diag)
                })
                .collect(),
        }
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Outcome distribution `x ↦ Tr[M_x ρ]`.
    pub fn outcome_distribution(&self, rho: &DensityMatrix) -> Result<Distribution> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.dim(),
            });
        }
        Distribution::normalized(
            self.elements
                .iter()
                .map(|m| m.trace_product(rho.as_hermitian()).max(0.0))
                .collect(),
        )
    }

    /// `Σ_i η_i Tr[M_i ρ_i]` for a measurement with one outcome per hypothesis.
    pub fn exclusion_error(&self, ensemble: &QuantumEnsemble) -> Result<f64> {
        if self.len() != ensemble.len() {
            return Err(Error::DimensionMismatch {
                expected: ensemble.len(),
                found: self.len(),
            });
        }
        Ok(self
            .elements
            .iter()
            .zip(ensemble.weighted())
            .map(|(m, w)| m.trace_product(&w))
            .sum())
    }
}

/// Classical ensemble of outcome distributions induced by a measurement.
pub fn induced_ensemble(ensemble: &QuantumEnsemble, povm: &Povm) -> Result<ClassicalEnsemble> {
    let dists = ensemble
        .states
        .iter()
        .map(|s| povm.outcome_distribution(s))
        .collect::<Result<Vec<_>>>()?;
    ClassicalEnsemble::new(ensemble.priors.clone(), dists)
}

#[derive(Debug, Clone)]
pub struct OneShot {
    pub error: f64,
    pub povm: Povm,
    /// Optimal `Y` of `max Tr Y : Y ⪯ η_i ρ_i`.
    pub dual_y: HermitianMatrix,
    pub gap: f64,
}

/// Optimal one-shot exclusion error
/// `inf_M Σ η_i Tr[M_i ρ_i] = sup{Tr Y : Y ⪯ η_i ρ_i}`.
pub fn one_shot_error(ensemble: &QuantumEnsemble) -> Result<OneShot> {
    let problem = BoundedTraceProblem::upper_only(ensemble.weighted())?;
    let sol = sdp::solve_bounded_trace(&problem, SDP_TOL, SDP_MAX_ITER)?;
    let povm = Povm::new(sdp::recover_povm(&sol, &problem)?)?;
    Ok(OneShot {
        error: sol.value.max(0.0),
        povm,
        dual_y: sol.y,
        gap: sol.gap,
    })
}

/// `min_{i<j} Tr[η_i ρ_i ∧ η_j ρ_j]`, an upper bound on the one-shot error.
pub fn pairwise_upper_bound(ensemble: &QuantumEnsemble) -> Result<f64> {
    let w = ensemble.weighted();
    let mut best = f64::INFINITY;
    for i in 0..w.len() {
        for j in (i + 1)..w.len() {
            best = best.min(operator_min(&w[i], &w[j])?.trace().max(0.0));
        }
    }
    Ok(best)
}

/// `‖ |φ⟩⟨φ| − |ζ⟩⟨ζ| ‖_1` for arbitrary (unnormalized) vectors.
pub fn pure_state_trace_distance(phi: &DVector<C64>, zeta: &DVector<C64>) -> f64 {
    let a = phi.norm_squared();
    let b = zeta.norm_squared();
    let c = zeta.dotc(phi).norm_sqr();
    ((a + b).powi(2) - 4.0 * c).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PureStateBounds {
    /// `min_{i<j} (η_i+η_j)/2 · (1 − sqrt(1 − 4η_iη_j|⟨ψ_i|ψ_j⟩|²/(η_i+η_j)²))`
    pub bound_exact_pair: f64,
    /// `½ min_{i<j} |⟨ψ_i|ψ_j⟩|²`
    pub bound_overlap: f64,
}

/// Leading eigenvector of a rank-one state.
fn pure_vector(rho: &DensityMatrix) -> Result<DVector<C64>> {
    let e = rho.as_hermitian().eig();
    let d = e.dim();
    if d > 1 && e.eigenvalues[d - 2] > 1e-9 {
        return Err(Error::validation(format!(
            "state is not pure (second eigenvalue {:.3e})",
            e.eigenvalues[d - 2]
        )));
    }
    Ok(e.eigenvectors.column(d - 1).into_owned())
}

pub fn pure_state_bounds(ensemble: &QuantumEnsemble) -> Result<PureStateBounds> {
    let vecs = ensemble
        .states
        .iter()
        .map(pure_vector)
        .collect::<Result<Vec<_>>>()?;
    let eta = &ensemble.priors;
    let mut exact = f64::INFINITY;
    let mut overlap = f64::INFINITY;
    for i in 0..vecs.len() {
        for j in (i + 1)..vecs.len() {
            let f = vecs[i].dotc(&vecs[j]).norm_sqr().min(1.0);
            let s = eta[i] + eta[j];
            let x = (4.0 * eta[i] * eta[j] * f / (s * s)).min(1.0);
            exact = exact.min(0.5 * s * (1.0 - (1.0 - x).sqrt()));
            overlap = overlap.min(0.5 * f);
        }
    }
    Ok(PureStateBounds {
        bound_exact_pair: exact,
        bound_overlap: overlap,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantumChernoff {
    pub value: ExtendedReal,
    pub s_star: f64,
}

/// `ξ(ρ, σ) = −ln min_{s∈[0,1]} Tr[ρ^s σ^{1−s}]`, with `ρ^0` the support
/// projector.
pub fn quantum_chernoff_pair(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<QuantumChernoff> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let er = rho.as_hermitian().eig();
    let es = sigma.as_hermitian().eig();
    let (tr, ts) = (er.support_threshold(), es.support_threshold());
    let lam: Vec<(usize, f64)> = er.eigenvalues.iter().cloned().enumerate().filter(|(_, l)| *l > tr).collect();
    let mu: Vec<(usize, f64)> = es.eigenvalues.iter().cloned().enumerate().filter(|(_, l)| *l > ts).collect();
    // |⟨v_j|w_k⟩|² over the two supports
    let overlaps = er.eigenvectors.adjoint() * &es.eigenvectors;
    let mut terms = Vec::with_capacity(lam.len() * mu.len());
    let mut largest: f64 = 0.0;
    for &(j, l) in &lam {
        for &(k, m) in &mu {
            let c = overlaps[(j, k)].norm_sqr();
            largest = largest.max(c);
            terms.push((l.ln(), m.ln(), c));
        }
    }
    if largest <= SUPPORT_CUTOFF * SUPPORT_CUTOFF {
        return Ok(QuantumChernoff {
            value: ExtendedReal::Infinite,
            s_star: 0.5,
        });
    }
    let f = |s: f64| -> f64 {
        terms
            .iter()
            .map(|(ll, lm, c)| c * (s * ll + (1.0 - s) * lm).exp())
            .sum()
    };
    let (s, fmin) = simplex::minimize_scalar(f, 0.0, 1.0, 1e-10);
    Ok(QuantumChernoff {
        value: if fmin > 0.0 {
            ExtendedReal::Finite((-fmin.ln()).max(0.0))
        } else {
            ExtendedReal::Infinite
        },
        s_star: s,
    })
}

/// `max_{i<j} ξ(ρ_i, ρ_j)`.
pub fn lower_bound_exponent(states: &[DensityMatrix]) -> Result<ExtendedReal> {
    require_pairs(states)?;
    let mut best = ExtendedReal::Finite(0.0);
    for i in 0..states.len() {
        for j in (i + 1)..states.len() {
            best = best.max(quantum_chernoff_pair(&states[i], &states[j])?.value);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct Kappa {
    /// `κ ∈ [0, 1]`; exactly 0 when `zero` is set.
    pub value: f64,
    pub zero: bool,
    pub solution: SdpSolution,
}

impl Kappa {
    pub fn neg_ln(&self) -> ExtendedReal {
        if self.zero {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite((-self.value.ln()).max(0.0))
        }
    }
}

/// `κ(ρ_1, …, ρ_r) = sup{Tr Y : −ρ_i ⪯ Y ⪯ ρ_i}`.
pub fn kappa(states: &[DensityMatrix]) -> Result<Kappa> {
    require_pairs(states)?;
    let problem = BoundedTraceProblem::symmetric(states.iter().map(|s| s.as_hermitian().clone()).collect())?;
    let solution = sdp::solve_bounded_trace(&problem, SDP_TOL, SDP_MAX_ITER)?;
    let zero = solution.degenerate;
    Ok(Kappa {
        value: if zero { 0.0 } else { solution.value.min(1.0) },
        zero,
        solution,
    })
}

/// `−ln κ`, an upper bound on the error exponent.
pub fn upper_bound_exponent(states: &[DensityMatrix]) -> Result<ExtendedReal> {
    Ok(kappa(states)?.neg_ln())
}

/// `D_max(X‖σ) = ln inf{λ : −λσ ⪯ X ⪯ λσ}`.
pub fn dmax(x: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<ExtendedReal> {
    if x.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: x.dim(),
        });
    }
    let xn = x.operator_norm();
    if xn == 0.0 {
        return Err(Error::validation("D_max needs a nonzero first argument"));
    }
    let es = sigma.eig();
    if es.operator_norm() == 0.0 {
        return Err(Error::validation("D_max needs a nonzero second argument"));
    }
    let thr = es.support_threshold();
    if es.eigenvalues[0] < -thr {
        return Err(Error::domain("D_max needs a positive semi-definite second argument"));
    }
    let kernel = es.columns_where(|l| l <= thr);
    if kernel.ncols() > 0 {
        let leak = (x.matrix() * &kernel).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if leak > SUPPORT_CUTOFF * xn.max(1.0) {
            return Ok(ExtendedReal::Infinite);
        }
    }
    let support = es.columns_where(|l| l > thr);
    let inv_sqrt: Vec<f64> = es.eigenvalues.iter().filter(|&&l| l > thr).map(|l| 1.0 / l.sqrt()).collect();
    let mut m = support.adjoint() * x.matrix() * &support;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            m[(r, c)] *= inv_sqrt[r] * inv_sqrt[c];
        }
    }
    let norm = HermitianMatrix::from_raw(m).operator_norm();
    Ok(ExtendedReal::Finite(norm.ln()))
}

#[derive(Debug, Clone)]
pub struct DmaxMinimax {
    /// `inf_ω max_i D_max(ω‖ρ_i) = −ln κ`.
    pub value: ExtendedReal,
    /// `Y*/Tr Y*` from the κ optimizer (absent when `κ = 0`).
    pub omega: Option<HermitianMatrix>,
    /// `max_i D_max(ω‖ρ_i)` at that `ω`.
    pub witness: ExtendedReal,
}

pub fn dmax_minimax(states: &[DensityMatrix]) -> Result<DmaxMinimax> {
    let k = kappa(states)?;
    if k.zero {
        return Ok(DmaxMinimax {
            value: ExtendedReal::Infinite,
            omega: None,
            witness: ExtendedReal::Infinite,
        });
    }
    let y = &k.solution.y;
    let omega = y.scale(1.0 / y.trace());
    let mut witness = ExtendedReal::Finite(f64::NEG_INFINITY);
    for s in states {
        witness = witness.max(dmax(&omega, s.as_hermitian())?);
    }
    Ok(DmaxMinimax {
        value: k.neg_ln(),
        omega: Some(omega),
        witness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LogEuclidean {
    pub value: f64,
    pub s_star: SimplexPoint,
    pub optimality_gap: f64,
}

/// `max_s −ln Tr exp(Σ s_i ln ρ_i)` for positive-definite states.
pub fn log_euclidean_divergence(states: &[DensityMatrix]) -> Result<LogEuclidean> {
    require_pairs(states)?;
    let logs = states
        .iter()
        .map(|s| {
            let lo = s.as_hermitian().min_eigenvalue();
            if lo <= 1e-10 {
                Err(Error::domain(format!(
                    "log-Euclidean divergence needs positive-definite states (eigenvalue {lo:.3e})"
                )))
            } else {
                s.as_hermitian().log()
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let d = states[0].dim();
    let f = |s: &[f64]| -> (f64, Vec<f64>) {
        let mut h = HermitianMatrix::zeros(d);
        for (l, si) in logs.iter().zip(s) {
            h = h.add(&l.scale(*si));
        }
        let e = h.eig();
        let top = *e.eigenvalues.last().unwrap();
        let w: Vec<f64> = e.eigenvalues.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        // ∂/∂s_i ln Tr e^H = Tr[e^H ln ρ_i] / Tr e^H
        let grad = logs
            .iter()
            .map(|l| {
                let rot = e.eigenvectors.adjoint() * l.matrix() * &e.eigenvectors;
                (0..d).map(|j| w[j] * rot[(j, j)].re).sum::<f64>() / z
            })
            .collect();
        (top + z.ln(), grad)
    };
    let (point, fmin, gap) = classical::minimize_k_minus(states.len(), f);
    Ok(LogEuclidean {
        value: (-fmin).max(0.0),
        s_star: point,
        optimality_gap: gap,
    })
}

/// `ξ_cl` of the outcome distributions of `povm`, a lower bound on `E`.
pub fn measured_lower_bound(ensemble: &QuantumEnsemble, povm: &Povm) -> Result<ExtendedReal> {
    let induced = induced_ensemble(ensemble, povm)?;
    Ok(classical::multivariate_chernoff(induced.dists())?.value)
}

#[derive(Debug, Clone)]
pub struct MeasuredBound {
    pub best: ExtendedReal,
    pub povm: Povm,
}

fn basis_value(ensemble: &QuantumEnsemble, u: &DMatrix<C64>) -> ExtendedReal {
    Povm::from_basis(u)
        .and_then(|p| measured_lower_bound(ensemble, &p))
        .unwrap_or(ExtendedReal::Finite(0.0))
}

/// Applies the Givens rotation `(θ, φ)` to columns `j, k` of `u`.
fn rotate(u: &DMatrix<C64>, j: usize, k: usize, theta: f64, phi: f64) -> DMatrix<C64> {
    let (c, s) = (theta.cos(), theta.sin());
    let ph = C64::from_polar(1.0, phi);
    let mut out = u.clone();
    for r in 0..u.nrows() {
        let a = u[(r, j)];
        let b = u[(r, k)];
        out[(r, j)] = a * c + b * ph * s;
        out[(r, k)] = b * c - a * ph.conj() * s;
    }
    out
}

const MAX_REFINE_SWEEPS: usize = 60;
const REFINE_MIN_GAIN: f64 = 1e-9;

/// Coordinate search over Givens rotations with step halving.
fn refine_basis(ensemble: &QuantumEnsemble, mut u: DMatrix<C64>) -> (ExtendedReal, DMatrix<C64>) {
    let d = u.ncols();
    let mut best = basis_value(ensemble, &u);
    let mut h = 0.25;
    let mut sweeps = 0;
    while h >= 1e-4 && best.is_finite() && sweeps < MAX_REFINE_SWEEPS {
        sweeps += 1;
        let mut improved = false;
        for j in 0..d {
            for k in (j + 1)..d {
                for phi in [0.0, std::f64::consts::FRAC_PI_2] {
                    for theta in [h, -h] {
                        let cand = rotate(&u, j, k, theta, phi);
                        let v = basis_value(ensemble, &cand);
                        if !v.le_within(&best, REFINE_MIN_GAIN) {
                            best = v;
                            u = cand;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, u)
}

/// Heuristic search for a good measured lower bound over projective
/// measurements: computational basis, eigenbases of the states and of a
/// random mixture, a simultaneous eigenbasis if the states commute, and
/// `restarts` Haar-random bases, each refined by rotation search. The result
/// is always a valid lower bound on `E`, but not necessarily the measured
/// divergence itself.
pub fn optimize_measured_lower_bound(
    ensemble: &QuantumEnsemble,
    restarts: usize,
    seed: u64,
) -> Result<MeasuredBound> {
    if restarts == 0 {
        return Err(Error::validation("restarts must be at least 1"));
    }
    let d = ensemble.dim();
    let mut starts: Vec<DMatrix<C64>> = vec![DMatrix::identity(d, d)];
    let check = commuting_detector(&ensemble.states);
    if let Some(b) = check.basis {
        starts.push(b);
    }
    for s in &ensemble.states {
        starts.push(s.as_hermitian().eig().eigenvectors);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = random::simplex_point(ensemble.len(), &mut rng);
    let mix = ensemble
        .states
        .iter()
        .zip(&weights)
        .fold(HermitianMatrix::zeros(d), |acc, (s, w)| acc.add(&s.as_hermitian().scale(*w)));
    starts.push(mix.eig().eigenvectors);
    for i in 0..restarts {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(i as u64 + 1);
        starts.push(random::unitary(d, &mut r));
    }

    let results: Vec<(ExtendedReal, DMatrix<C64>)> = starts
        .into_par_iter()
        .map(|u| refine_basis(ensemble, u))
        .collect();
    let mut best_idx = 0;
    for (i, (v, _)) in results.iter().enumerate() {
        if v.total_cmp(&results[best_idx].0).is_gt() {
            best_idx = i;
        }
    }
    let (best, u) = results.into_iter().nth(best_idx).unwrap();
    Ok(MeasuredBound {
        best,
        povm: Povm::from_basis(&u)?,
    })
}

/// Measured bound on `ℓ` copies divided by `ℓ` (`ℓ ∈ {1, 2}`).
pub fn regularized_measured_lower_bound(
    ensemble: &QuantumEnsemble,
    ell: usize,
    restarts: usize,
    seed: u64,
) -> Result<ExtendedReal> {
    if !(1..=2).contains(&ell) {
        return Err(Error::validation("only ell = 1 or 2 is supported"));
    }
    let blocked = ensemble.tensor_power(ell, SDP_DIM_CAP)?;
    Ok(optimize_measured_lower_bound(&blocked, restarts, seed)?
        .best
        .scale(1.0 / ell as f64))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupermultiplicativityCheck {
    pub holds: bool,
    /// `κ(ρ_i ⊗ σ_i) − κ(ρ_i)·κ(σ_i)`
    pub slack: f64,
    pub kappa_product_ensemble: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
}

pub fn kappa_supermultiplicativity_check(
    a: &[DensityMatrix],
    b: &[DensityMatrix],
) -> Result<SupermultiplicativityCheck> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let da = require_pairs(a)?;
    let db = require_pairs(b)?;
    let joint = (da as u128) * (db as u128);
    if joint > SDP_DIM_CAP as u128 {
        return Err(Error::ResourceCap {
            what: "tensor-product kappa SDP dimension".into(),
            required: joint,
            cap: SDP_DIM_CAP as u128,
            hint: "use smaller factors".into(),
        });
    }
    let ab: Vec<DensityMatrix> = a.iter().zip(b).map(|(x, y)| x.tensor(y)).collect();
    let (ka, kb, kab) = (kappa(a)?.value, kappa(b)?.value, kappa(&ab)?.value);
    let slack = kab - ka * kb;
    Ok(SupermultiplicativityCheck {
        holds: slack >= -1e-7,
        slack,
        kappa_product_ensemble: kab,
        kappa_a: ka,
        kappa_b: kb,
    })
}

#[derive(Debug, Clone)]
pub struct CommutingCheck {
    pub commuting: bool,
    /// Simultaneous eigenbasis (columns), when commuting.
    pub basis: Option<DMatrix<C64>>,
    /// Spectra of the states in that basis.
    pub spectra: Option<Vec<Vec<f64>>>,
}

/// Detects pairwise commuting states and returns a simultaneous eigenbasis.
pub fn commuting_detector(states: &[DensityMatrix]) -> CommutingCheck {
    let commuting = states.iter().enumerate().all(|(i, a)| {
        states[i + 1..]
            .iter()
            .all(|b| a.as_hermitian().commutator_norm(b.as_hermitian()) <= COMMUTATOR_TOL)
    });
    if !commuting || states.is_empty() {
        return CommutingCheck {
            commuting,
            basis: None,
            spectra: None,
        };
    }
    let basis = simultaneous_eigenbasis(states);
    let spectra = states
        .iter()
        .map(|s| {
            let rot = basis.adjoint() * s.as_hermitian().matrix() * &basis;
            let p: Vec<f64> = (0..basis.ncols()).map(|j| rot[(j, j)].re.max(0.0)).collect();
            let t: f64 = p.iter().sum();
            p.into_iter().map(|x| x / t).collect()
        })
        .collect();
    CommutingCheck {
        commuting,
        basis: Some(basis),
        spectra: Some(spectra),
    }
}

/// Refines an orthonormal basis state by state, diagonalizing each state
/// inside the clusters of columns that all previous states leave degenerate.
fn simultaneous_eigenbasis(states: &[DensityMatrix]) -> DMatrix<C64> {
    let d = states[0].dim();
    let mut basis = DMatrix::<C64>::identity(d, d);
    let mut clusters: Vec<Vec<usize>> = vec![(0..d).collect()];
    for s in states {
        let mut next = Vec::new();
        for cl in clusters {
            if cl.len() == 1 {
                next.push(cl);
                continue;
            }
            let b = DMatrix::from_fn(d, cl.len(), |r, c| basis[(r, cl[c])]);
            let e = HermitianMatrix::from_raw(b.adjoint() * s.as_hermitian().matrix() * &b).eig();
            let rotated = &b * &e.eigenvectors;
            for (c, &col) in cl.iter().enumerate() {
                basis.set_column(col, &rotated.column(c));
            }
            let mut start = 0;
            for c in 1..=cl.len() {
                if c == cl.len() || e.eigenvalues[c] - e.eigenvalues[c - 1] > 1e-9 {
                    next.push(cl[start..c].to_vec());
                    start = c;
                }
            }
        }
        clusters = next;
    }
    // Present the basis in a canonical order: by position of the dominant
    // component, each column phased so that component is real and positive.
    let mut cols: Vec<(usize, DVector<C64>)> = (0..d)
        .map(|c| {
            let v = basis.column(c).into_owned();
            let (arg, _) = v.iter().enumerate().fold((0, -1.0), |(bi, bv), (i, z)| {
                if z.norm() > bv + 1e-12 {
                    (i, z.norm())
                } else {
                    (bi, bv)
                }
            });
            let phase = v[arg] / v[arg].norm();
            (arg, v.map(|z| z / phase))
        })
        .collect();
    cols.sort_by_key(|(arg, _)| *arg);
    DMatrix::from_fn(d, d, |r, c| cols[c].1[r])
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentBounds {
    pub lower_pairwise: ExtendedReal,
    pub lower_measured: ExtendedReal,
    pub upper_neg_ln_kappa: ExtendedReal,
    /// Reported alongside the bounds, not as a bound itself.
    pub log_euclidean: Option<f64>,
    /// `ξ_cl` of the spectra when the states commute (the exact exponent).
    pub commuting_exact: Option<ExtendedReal>,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundsOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions { restarts: 8, seed: 0 }
    }
}

/// Every exponent bound for an ensemble.
pub fn quantum_bounds(ensemble: &QuantumEnsemble, opts: &BoundsOptions) -> Result<ExponentBounds> {
    let states = ensemble.states();
    let lower_pairwise = lower_bound_exponent(states)?;
    let measured = optimize_measured_lower_bound(ensemble, opts.restarts, opts.seed)?.best;
    let upper = upper_bound_exponent(states)?;
    let full_rank = states.iter().all(|s| s.as_hermitian().min_eigenvalue() > 1e-10);
    let log_euclidean = if full_rank {
        Some(log_euclidean_divergence(states)?.value)
    } else {
        None
    };
    let check = commuting_detector(states);
    let commuting_exact = match check.spectra {
        Some(spectra) => {
            let dists = spectra
                .into_iter()
                .map(Distribution::normalized)
                .collect::<Result<Vec<_>>>()?;
            Some(classical::multivariate_chernoff(&dists)?.value)
        }
        None => None,
    };
    Ok(ExponentBounds {
        lower_pairwise,
        lower_measured: measured,
        upper_neg_ln_kappa: upper,
        log_euclidean,
        commuting_exact,
    })
}

/// Total dimension of `n` copies, checked against a cap.
pub(crate) fn tensor_dim(d: usize, n: usize, cap: usize, what: &str) -> Result<usize> {
    let required = checked_pow(d, n);
    if required > cap as u128 {
        return Err(Error::ResourceCap {
            what: format!("{what}: dimension {d}^{n}"),
            required,
            cap: cap as u128,
            hint: "reduce n".into(),
        });
    }
    Ok(required as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ket(v: &[f64]) -> DVector<C64> {
        DVector::from_iterator(v.len(), v.iter().map(|x| C64::new(*x, 0.0)))
    }

    fn example_commuting() -> Vec<DensityMatrix> {
        vec![
            DensityMatrix::from_diagonal(&[0.5, 0.5, 0.0]).unwrap(),
            DensityMatrix::from_diagonal(&[0.5, 0.0, 0.5]).unwrap(),
            DensityMatrix::from_diagonal(&[0.0, 0.5, 0.5]).unwrap(),
        ]
    }

    #[test]
    fn commuting_triple_is_perfectly_excluded() {
        let e = QuantumEnsemble::uniform(example_commuting()).unwrap();
        let r = one_shot_error(&e).unwrap();
        assert!(r.error.abs() < 1e-8);
        assert!(r.povm.exclusion_error(&e).unwrap() <= 1e-8);
        // M_1 projects onto |3⟩
        assert!((r.povm.elements()[0].matrix()[(2, 2)].re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identical_states() {
        let rho = DensityMatrix::from_diagonal(&[0.7, 0.3]).unwrap();
        let e = QuantumEnsemble::uniform(vec![rho.clone(), rho.clone()]).unwrap();
        assert!((one_shot_error(&e).unwrap().error - 0.5).abs() < 1e-8);
        assert!((pairwise_upper_bound(&e).unwrap() - 0.5).abs() < 1e-12);
        let k = kappa(&[rho.clone(), rho.clone()]).unwrap();
        assert!((k.value - 1.0).abs() < 1e-8);
        assert!(upper_bound_exponent(&[rho.clone(), rho.clone()]).unwrap().finite().unwrap() < 1e-8);
        assert_eq!(lower_bound_exponent(&[rho.clone(), rho]).unwrap(), ExtendedReal::Finite(0.0));
    }

    #[test]
    fn orthogonal_pair() {
        let a = DensityMatrix::pure(&ket(&[1.0, 0.0])).unwrap();
        let b = DensityMatrix::pure(&ket(&[0.0, 1.0])).unwrap();
        let k = kappa(&[a.clone(), b.clone()]).unwrap();
        assert!(k.zero);
        assert_eq!(k.neg_ln(), ExtendedReal::Infinite);
        assert_eq!(quantum_chernoff_pair(&a, &b).unwrap().value, ExtendedReal::Infinite);
        let e = QuantumEnsemble::uniform(vec![a, b]).unwrap();
        assert_eq!(pairwise_upper_bound(&e).unwrap(), 0.0);
        let pb = pure_state_bounds(&e).unwrap();
        assert_eq!(pb.bound_overlap, 0.0);
        assert_eq!(pb.bound_exact_pair, 0.0);
    }

    #[test]
    fn chernoff_of_zero_and_plus() {
        let zero = DensityMatrix::pure(&ket(&[1.0, 0.0])).unwrap();
        let plus = DensityMatrix::pure(&ket(&[1.0, 1.0])).unwrap();
        let v = quantum_chernoff_pair(&zero, &plus).unwrap().value.finite().unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn pure_bound_arithmetic() {
        let zero = DensityMatrix::pure(&ket(&[1.0, 0.0])).unwrap();
        let plus = DensityMatrix::pure(&ket(&[1.0, 1.0])).unwrap();
        let e = QuantumEnsemble::uniform(vec![zero, plus]).unwrap();
        let b = pure_state_bounds(&e).unwrap();
        assert!((b.bound_exact_pair - (1.0 - 0.5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((one_shot_error(&e).unwrap().error - b.bound_exact_pair).abs() < 1e-7);
        let mixed = QuantumEnsemble::uniform(vec![
            DensityMatrix::maximally_mixed(2),
            DensityMatrix::maximally_mixed(2),
        ])
        .unwrap();
        assert!(pure_state_bounds(&mixed).is_err());
    }

    #[test]
    fn pure_trace_distance_identity() {
        let a = ket(&[1.0, 2.0]);
        let b = ket(&[0.5, -1.0]);
        let direct = HermitianMatrix::outer(&a).sub(&HermitianMatrix::outer(&b)).trace_norm();
        assert!((pure_state_trace_distance(&a, &b) - direct).abs() < 1e-12);
    }

    #[test]
    fn dmax_examples() {
        let rho = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!(dmax(rho.as_hermitian(), rho.as_hermitian()).unwrap().finite().unwrap().abs() < 1e-12);
        let half = HermitianMatrix::from_diagonal(&[0.5, 0.5]);
        let quarter = HermitianMatrix::from_diagonal(&[0.25, 0.25]);
        assert!((dmax(&half, &quarter).unwrap().finite().unwrap() - 2f64.ln()).abs() < 1e-12);
        let p0 = HermitianMatrix::from_diagonal(&[1.0, 0.0]);
        let p1 = HermitianMatrix::from_diagonal(&[0.0, 1.0]);
        assert_eq!(dmax(&p0, &p1).unwrap(), ExtendedReal::Infinite);
        assert!(dmax(&HermitianMatrix::zeros(2), &p1).is_err());
        assert!(dmax(&p1, &HermitianMatrix::zeros(2)).is_err());
    }

    #[test]
    fn commuting_detector_recovers_example_basis() {
        let c = commuting_detector(&example_commuting());
        assert!(c.commuting);
        let basis = c.basis.unwrap();
        assert!((basis.clone() - DMatrix::<C64>::identity(3, 3)).norm() < 1e-12);
        let spectra = c.spectra.unwrap();
        assert_eq!(spectra[0], vec![0.5, 0.5, 0.0]);
        assert_eq!(spectra[2], vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn log_euclidean_identical_and_singular() {
        let rho = DensityMatrix::from_diagonal(&[0.6, 0.4]).unwrap();
        let v = log_euclidean_divergence(&[rho.clone(), rho.clone()]).unwrap();
        assert!(v.value.abs() < 1e-12);
        let p = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert!(matches!(log_euclidean_divergence(&[rho, p]), Err(Error::Domain(_))));
    }

    #[test]
    fn povm_validation() {
        assert!(Povm::new(vec![HermitianMatrix::from_diagonal(&[1.0, 0.5])]).is_err());
        assert!(Povm::new(vec![
            HermitianMatrix::from_diagonal(&[1.5, 0.0]),
            HermitianMatrix::from_diagonal(&[-0.5, 1.0]),
        ])
        .is_err());
        assert_eq!(Povm::computational(3).len(), 3);
    }
}
