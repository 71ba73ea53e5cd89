//! Classical antidistinguishability on a finite sample space.
//!
//! Distributions are weight vectors with respect to counting measure. The
//! optimal one-shot strategy is the minimum-likelihood rule (eliminate the
//! hypothesis with the smallest `η_i p_i(ω)`, lowest index on ties), and the
//! optimal error exponent is the multivariate Chernoff divergence
//! `ξ_cl = −ln inf_s Σ_ω Π_i p_i(ω)^{s_i}`.
//!
//! Every exponent computation is restricted to the common support
//! `D = ∩_i supp(p_i)`. On `D` the log-Hellinger function
//! `K⁻(s) = ln Σ_{ω∈D} Π_i p_i(ω)^{s_i}` is a finite, smooth, convex function
//! on the whole closed simplex, and its infimum equals the infimum of the
//! Hellinger transform over the open simplex.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::checked_pow;
use crate::simplex::{self, MirrorDescentOptions, SimplexPoint};
use crate::ExtendedReal;

/// Tolerance on `Σ w = 1` for a [`Distribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Largest number of product atoms enumerated by [`nfold_error`] in exact mode.
pub const EXACT_ENUMERATION_CAP: u128 = 10_000_000;

/// Required Frank–Wolfe residual for a certified Chernoff minimizer.
pub const CHERNOFF_OPTIMALITY_TOL: f64 = 1e-7;

/// Probability weights on `{0, …, size − 1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("distribution needs at least one outcome"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::validation(format!(
                "distribution weights must be nonnegative and finite (found {w})"
            )));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!(
                "distribution weights must sum to 1 (sum = {s:.15})"
            )));
        }
        Ok(Distribution { weights })
    }

    /// Rescales nonnegative weights (negatives above `-1e-12` are clipped).
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < -1e-12) {
            return Err(Error::validation("weights must be nonnegative and finite"));
        }
        let clipped: Vec<f64> = weights.into_iter().map(|w| w.max(0.0)).collect();
        let s: f64 = clipped.iter().sum();
        if !(s > 0.0) {
            return Err(Error::validation("weights must have positive total mass"));
        }
        Distribution::new(clipped.into_iter().map(|w| w / s).collect())
    }

    pub fn uniform(size: usize) -> Self {
        Distribution {
            weights: vec![1.0 / size as f64; size],
        }
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.size()).filter(|&w| self.weights[w] > 0.0).collect()
    }
}

/// Priors `η` paired with distributions on a shared sample space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalEnsemble {
    priors: Vec<f64>,
    dists: Vec<Distribution>,
}

pub(crate) fn validate_priors(priors: &[f64], tol: f64) -> Result<()> {
    if priors.len() < 2 {
        return Err(Error::validation("an ensemble needs at least two members"));
    }
    if let Some(p) = priors.iter().find(|p| !p.is_finite() || **p <= 0.0) {
        return Err(Error::validation(format!("priors must be positive (found {p})")));
    }
    let s: f64 = priors.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::validation(format!("priors must sum to 1 (sum = {s:.15})")));
    }
    Ok(())
}

impl ClassicalEnsemble {
    pub fn new(priors: Vec<f64>, dists: Vec<Distribution>) -> Result<Self> {
        validate_priors(&priors, NORMALIZATION_TOL)?;
        if priors.len() != dists.len() {
            return Err(Error::DimensionMismatch {
                expected: priors.len(),
                found: dists.len(),
            });
        }
        check_shared_size(&dists)?;
        Ok(ClassicalEnsemble { priors, dists })
    }

    pub fn uniform(dists: Vec<Distribution>) -> Result<Self> {
        let r = dists.len();
        ClassicalEnsemble::new(vec![1.0 / r as f64; r], dists)
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn dists(&self) -> &[Distribution] {
        &self.dists
    }

    pub fn len(&self) -> usize {
        self.priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.priors.is_empty()
    }

    pub fn sample_size(&self) -> usize {
        self.dists[0].size()
    }

    /// The same distributions under different priors.
    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        ClassicalEnsemble::new(priors, self.dists.clone())
    }
}

fn check_shared_size(dists: &[Distribution]) -> Result<usize> {
    let size = dists
        .first()
        .ok_or_else(|| Error::validation("need at least one distribution"))?
        .size();
    for d in dists {
        if d.size() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: d.size(),
            });
        }
    }
    Ok(size)
}

/// `H_s(P_1,…,P_r) = Σ_ω Π_i p_i(ω)^{s_i}` with `0^0 = 1`.
pub fn hellinger_transform(dists: &[Distribution], s: &SimplexPoint) -> Result<f64> {
    let size = check_shared_size(dists)?;
    if s.len() != dists.len() {
        return Err(Error::DimensionMismatch {
            expected: dists.len(),
            found: s.len(),
        });
    }
    let total = (0..size)
        .map(|w| {
            dists
                .iter()
                .zip(s.coords())
                .filter(|(_, &si)| si != 0.0)
                .map(|(d, &si)| d.weights[w].powf(si))
                .product::<f64>()
        })
        .sum::<f64>();
    Ok(total)
}

/// Outcomes where every distribution is strictly positive.
pub fn common_support(dists: &[Distribution]) -> Vec<usize> {
    if dists.is_empty() {
        return Vec::new();
    }
    (0..dists[0].size())
        .filter(|&w| dists.iter().all(|d| d.weights[w] > 0.0))
        .collect()
}

/// Log-likelihood table `ln p_i(ω)` over the common support.
struct LogTable {
    /// `rows[k][i] = ln p_i(D[k])`
    rows: Vec<Vec<f64>>,
    r: usize,
}

impl LogTable {
    fn new(dists: &[Distribution], support: &[usize]) -> Self {
        LogTable {
            rows: support
                .iter()
                .map(|&w| dists.iter().map(|d| d.weights[w].ln()).collect())
                .collect(),
            r: dists.len(),
        }
    }

    /// `K⁻(s)` and its gradient `E_{p̃_s}[ln p_i]`.
    fn k_minus(&self, s: &[f64]) -> (f64, Vec<f64>) {
        let exps: Vec<f64> = self
            .rows
            .iter()
            .map(|row| row.iter().zip(s).map(|(l, si)| l * si).sum())
            .collect();
        let m = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = exps.iter().map(|e| (e - m).exp()).collect();
        let z: f64 = weights.iter().sum();
        let mut grad = vec![0.0; self.r];
        for (row, w) in self.rows.iter().zip(&weights) {
            for (g, l) in grad.iter_mut().zip(row) {
                *g += w / z * l;
            }
        }
        (m + z.ln(), grad)
    }

    /// The tilted density `p̃_s ∝ Π p_i^{s_i}` on the support, as logs.
    fn tilted_log_density(&self, s: &[f64]) -> Vec<f64> {
        let (k, _) = self.k_minus(s);
        self.rows
            .iter()
            .map(|row| row.iter().zip(s).map(|(l, si)| l * si).sum::<f64>() - k)
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChernoffResult {
    /// `ξ_cl` in nats; `+∞` when the common support is empty.
    pub value: ExtendedReal,
    /// Minimizer of `K⁻` on the closed simplex (barycenter when `D = ∅`).
    pub minimizer: SimplexPoint,
    pub hellinger_at_min: f64,
    /// `α_i = P_i(D)`.
    pub common_support_mass: Vec<f64>,
    /// Frank–Wolfe residual certifying the minimizer.
    pub optimality_gap: f64,
}

/// Multivariate classical Chernoff divergence of `r ≥ 2` distributions.
pub fn multivariate_chernoff(dists: &[Distribution]) -> Result<ChernoffResult> {
    check_shared_size(dists)?;
    let r = dists.len();
    if r < 2 {
        return Err(Error::validation("multivariate Chernoff divergence needs r >= 2"));
    }
    let support = common_support(dists);
    let alpha: Vec<f64> = dists
        .iter()
        .map(|d| support.iter().map(|&w| d.weights[w]).sum())
        .collect();
    if support.is_empty() {
        return Ok(ChernoffResult {
            value: ExtendedReal::Infinite,
            minimizer: SimplexPoint::barycenter(r),
            hellinger_at_min: 0.0,
            common_support_mass: alpha,
            optimality_gap: 0.0,
        });
    }
    let table = LogTable::new(dists, &support);
    let (point, k, gap) = minimize_k_minus(r, |s| table.k_minus(s));
    Ok(ChernoffResult {
        value: ExtendedReal::Finite(exponent_from_log(k)),
        minimizer: point,
        hellinger_at_min: k.exp(),
        common_support_mass: alpha,
        optimality_gap: gap,
    })
}

/// `−k`, with values at the rounding level of the log-sum reported as zero.
fn exponent_from_log(k: f64) -> f64 {
    let v = -k;
    if v <= 1e-14 {
        0.0
    } else {
        v
    }
}

/// Mirror descent with a pattern-search fallback. Returns `(s*, f(s*), gap)`.
pub(crate) fn minimize_k_minus<F>(r: usize, f: F) -> (SimplexPoint, f64, f64)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if r == 2 {
        let (t, _) = simplex::minimize_scalar(|t| f(&[t, 1.0 - t]).0, 0.0, 1.0, 1e-12);
        let x = vec![t, 1.0 - t];
        let (fx, g) = f(&x);
        let gmin = g[0].min(g[1]);
        let gap = x[0] * (g[0] - gmin) + x[1] * (g[1] - gmin);
        return (SimplexPoint::from_unchecked(x), fx, gap.max(0.0));
    }
    let md = simplex::minimize_mirror_descent(r, &f, &MirrorDescentOptions::default());
    if md.converged && md.fw_gap <= CHERNOFF_OPTIMALITY_TOL {
        return (md.point, md.value, md.fw_gap);
    }
    let (x, _) = simplex::minimize_grid_refinement(r, |s| f(s).0, Some(md.point.coords()), 1e-13);
    let (fx, g) = f(&x);
    let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
    let gap: f64 = x.iter().zip(&g).map(|(xi, gi)| xi * (gi - gmin)).sum();
    if fx < md.value {
        (SimplexPoint::from_unchecked(x), fx, gap.max(0.0))
    } else {
        (md.point, md.value, md.fw_gap)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairwiseChernoff {
    pub value: ExtendedReal,
    pub s_star: f64,
}

/// `ξ_cl(P, Q) = −ln inf_{s∈[0,1]} Σ p^s q^{1−s}`.
pub fn pairwise_chernoff(p: &Distribution, q: &Distribution) -> Result<PairwiseChernoff> {
    let dists = [p.clone(), q.clone()];
    check_shared_size(&dists)?;
    let support = common_support(&dists);
    if support.is_empty() {
        return Ok(PairwiseChernoff {
            value: ExtendedReal::Infinite,
            s_star: 0.5,
        });
    }
    let table = LogTable::new(&dists, &support);
    let (s, k) = simplex::minimize_scalar(|s| table.k_minus(&[s, 1.0 - s]).0, 0.0, 1.0, 1e-10);
    Ok(PairwiseChernoff {
        value: ExtendedReal::Finite(exponent_from_log(k)),
        s_star: s,
    })
}

/// Matrix of pairwise Chernoff divergences (zero diagonal).
pub fn pairwise_matrix(dists: &[Distribution]) -> Result<Vec<Vec<ExtendedReal>>> {
    let r = dists.len();
    let mut m = vec![vec![ExtendedReal::Finite(0.0); r]; r];
    for i in 0..r {
        for j in (i + 1)..r {
            let v = pairwise_chernoff(&dists[i], &dists[j])?.value;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// Index eliminated by the minimum-likelihood rule at outcome `w`.
pub fn min_likelihood_decision(ensemble: &ClassicalEnsemble, w: usize) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, (eta, d)) in ensemble.priors.iter().zip(&ensemble.dists).enumerate() {
        let v = eta * d.weights[w];
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// One-shot optimal error `Σ_ω min_i η_i p_i(ω)`.
pub fn min_likelihood_error(ensemble: &ClassicalEnsemble) -> f64 {
    let mut acc = Kahan::default();
    for w in 0..ensemble.sample_size() {
        let m = ensemble
            .priors
            .iter()
            .zip(&ensemble.dists)
            .map(|(eta, d)| eta * d.weights[w])
            .fold(f64::INFINITY, f64::min);
        acc.add(m);
    }
    acc.sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NfoldMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NfoldEstimate {
    pub error: f64,
    /// Binomial standard error (Monte Carlo only).
    pub std_err: Option<f64>,
    /// 95% Wilson score interval (Monte Carlo only).
    pub wilson: Option<(f64, f64)>,
}

/// Error of the minimum-likelihood rule on `n` i.i.d. samples.
pub fn nfold_error(ensemble: &ClassicalEnsemble, n: usize, mode: NfoldMode) -> Result<NfoldEstimate> {
    if n == 0 {
        return Err(Error::validation("n must be a positive integer"));
    }
    match mode {
        NfoldMode::Exact => Ok(NfoldEstimate {
            error: nfold_exact(ensemble, n)?,
            std_err: None,
            wilson: None,
        }),
        NfoldMode::MonteCarlo { trials, seed } => nfold_monte_carlo(ensemble, n, trials, seed),
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum
    }
}

fn nfold_exact(ensemble: &ClassicalEnsemble, n: usize) -> Result<f64> {
    let m = ensemble.sample_size();
    let required = checked_pow(m, n);
    if required > EXACT_ENUMERATION_CAP {
        return Err(Error::ResourceCap {
            what: format!("exact enumeration of {m}^{n} atoms"),
            required,
            cap: EXACT_ENUMERATION_CAP,
            hint: "switch to monte_carlo mode".into(),
        });
    }
    let r = ensemble.len();
    // Fixed prefix length so the partition (and reduction order) does not
    // depend on the thread count.
    let mut prefix_len = 0;
    while prefix_len < n && checked_pow(m, prefix_len) < 256 {
        prefix_len += 1;
    }
    let n_prefixes = checked_pow(m, prefix_len) as usize;
    let partials: Vec<f64> = (0..n_prefixes)
        .into_par_iter()
        .map(|code| {
            let mut prods = ensemble.priors.clone();
            let mut c = code;
            for _ in 0..prefix_len {
                let w = c % m;
                c /= m;
                for (p, d) in prods.iter_mut().zip(&ensemble.dists) {
                    *p *= d.weights[w];
                }
            }
            let mut acc = Kahan::default();
            if prods.iter().all(|&p| p > 0.0) {
                let mut stack = vec![vec![0.0; r]; n - prefix_len + 1];
                stack[0].copy_from_slice(&prods);
                subtree_sum(ensemble, &mut stack, 0, n - prefix_len, &mut acc);
            }
            acc.sum()
        })
        .collect();
    let mut total = Kahan::default();
    for p in partials {
        total.add(p);
    }
    Ok(total.sum())
}

fn subtree_sum(
    ensemble: &ClassicalEnsemble,
    stack: &mut [Vec<f64>],
    depth: usize,
    remaining: usize,
    acc: &mut Kahan,
) {
    if remaining == 0 {
        acc.add(stack[depth].iter().cloned().fold(f64::INFINITY, f64::min));
        return;
    }
    for w in 0..ensemble.sample_size() {
        let (head, tail) = stack.split_at_mut(depth + 1);
        let cur = &head[depth];
        let next = &mut tail[0];
        let mut any_zero = false;
        for ((nx, c), d) in next.iter_mut().zip(cur).zip(&ensemble.dists) {
            *nx = c * d.weights[w];
            any_zero |= *nx == 0.0;
        }
        // Every leaf below a zero factor contributes min = 0.
        if !any_zero {
            subtree_sum(ensemble, stack, depth + 1, remaining - 1, acc);
        }
    }
}

const MC_CHUNK: u64 = 1 << 16;

fn nfold_monte_carlo(ensemble: &ClassicalEnsemble, n: usize, trials: u64, seed: u64) -> Result<NfoldEstimate> {
    if trials == 0 {
        return Err(Error::validation("monte_carlo mode needs at least one trial"));
    }
    let prior_sampler = WeightedIndex::new(&ensemble.priors)
        .map_err(|e| Error::validation(format!("bad priors: {e}")))?;
    let samplers: Vec<WeightedIndex<f64>> = ensemble
        .dists
        .iter()
        .map(|d| WeightedIndex::new(&d.weights))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::validation(format!("bad distribution: {e}")))?;
    let log_priors: Vec<f64> = ensemble.priors.iter().map(|p| p.ln()).collect();
    let log_p: Vec<Vec<f64>> = ensemble
        .dists
        .iter()
        .map(|d| d.weights.iter().map(|w| w.ln()).collect())
        .collect();
    let r = ensemble.len();
    let n_chunks = trials.div_ceil(MC_CHUNK);

    let errors: u64 = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            let mut ll = vec![0.0; r];
            let mut errs = 0u64;
            for _ in 0..count {
                let truth = prior_sampler.sample(&mut rng);
                ll.copy_from_slice(&log_priors);
                for _ in 0..n {
                    let w = samplers[truth].sample(&mut rng);
                    for (l, lp) in ll.iter_mut().zip(&log_p) {
                        *l += lp[w];
                    }
                }
                let mut decision = 0;
                for j in 1..r {
                    if ll[j] < ll[decision] {
                        decision = j;
                    }
                }
                if decision == truth {
                    errs += 1;
                }
            }
            errs
        })
        .sum();

    let nt = trials as f64;
    let p = errors as f64 / nt;
    let std_err = (p * (1.0 - p) / nt).sqrt();
    Ok(NfoldEstimate {
        error: p,
        std_err: Some(std_err),
        wilson: Some(wilson_interval(errors, trials, 1.959_963_984_540_054)),
    })
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Converts `t ∈ T_r` (first `r − 1` simplex coordinates) to `s ∈ S_r`,
/// rejecting corner points with `Σ t = 1`.
fn non_corner_point(r: usize, t: &[f64]) -> Result<Vec<f64>> {
    if t.len() + 1 != r {
        return Err(Error::DimensionMismatch {
            expected: r - 1,
            found: t.len(),
        });
    }
    if t.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::validation("t must have nonnegative coordinates"));
    }
    let sum: f64 = t.iter().sum();
    if sum >= 1.0 {
        return Err(Error::validation(format!(
            "t is a corner point (sum of coordinates = {sum}); need sum < 1"
        )));
    }
    let mut s = t.to_vec();
    s.push(1.0 - sum);
    Ok(s)
}

/// Exponential-family density `p_t ∝ p_r exp(Σ t_j ln(p_j/p_r))` on the common
/// support, i.e. `Π p_i^{s_i}` normalized over `D`. Zero outside `D`.
pub fn exponential_family_density(dists: &[Distribution], t: &[f64]) -> Result<Distribution> {
    let size = check_shared_size(dists)?;
    let s = non_corner_point(dists.len(), t)?;
    let support = common_support(dists);
    if support.is_empty() {
        return Err(Error::domain("common support is empty, so H(t) = 0"));
    }
    let table = LogTable::new(dists, &support);
    let logs = table.tilted_log_density(&s);
    let mut w = vec![0.0; size];
    for (&o, l) in support.iter().zip(logs) {
        w[o] = l.exp();
    }
    Distribution::normalized(w)
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaDiagnostics {
    /// `γ̃_i + ln α_i = E_{p̃}[ln p_i − ln p̃]` for each hypothesis.
    pub gamma: Vec<f64>,
    /// `K⁻` at the same point.
    pub k_minus: f64,
}

impl GammaDiagnostics {
    pub fn min_gamma(&self) -> f64 {
        self.gamma.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// `γ` diagnostics at a non-corner `t ∈ T_r`.
pub fn gamma_diagnostics(dists: &[Distribution], t: &[f64]) -> Result<GammaDiagnostics> {
    check_shared_size(dists)?;
    let s = non_corner_point(dists.len(), t)?;
    gamma_at(dists, &SimplexPoint::from_unchecked(s))
}

/// `γ` diagnostics at any point of the closed simplex. Expectations are
/// taken under the tilted density on `D`, where every `ln p_i` is finite.
pub fn gamma_at(dists: &[Distribution], s: &SimplexPoint) -> Result<GammaDiagnostics> {
    check_shared_size(dists)?;
    if s.len() != dists.len() {
        return Err(Error::DimensionMismatch {
            expected: dists.len(),
            found: s.len(),
        });
    }
    let support = common_support(dists);
    if support.is_empty() {
        return Err(Error::domain("common support is empty"));
    }
    let table = LogTable::new(dists, &support);
    let (k, grad) = table.k_minus(s.coords());
    // ln p̃_s = Σ_j s_j ln p_j − K, so E[ln p_i − ln p̃_s] = g_i − s·g + K.
    let sg: f64 = s.coords().iter().zip(&grad).map(|(a, b)| a * b).sum();
    Ok(GammaDiagnostics {
        gamma: grad.iter().map(|g| g - sg + k).collect(),
        k_minus: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dice() -> Vec<Distribution> {
        vec![
            Distribution::new(vec![0.5, 0.5, 0.0]).unwrap(),
            Distribution::new(vec![0.5, 0.0, 0.5]).unwrap(),
            Distribution::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap(),
        ]
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::normalized(vec![0.0, 0.0]).is_err());
        assert_eq!(Distribution::normalized(vec![1.0, 3.0]).unwrap().weights(), &[0.25, 0.75]);
    }

    #[test]
    fn ensemble_validation() {
        let d = dice();
        assert!(ClassicalEnsemble::new(vec![0.5, 0.6, -0.1], d.clone()).is_err());
        assert!(ClassicalEnsemble::new(vec![1.0], vec![d[0].clone()]).is_err());
        assert!(ClassicalEnsemble::new(vec![0.5, 0.5], d.clone()).is_err());
        let short = Distribution::new(vec![1.0]).unwrap();
        assert!(ClassicalEnsemble::uniform(vec![d[0].clone(), short]).is_err());
    }

    #[test]
    fn hellinger_examples() {
        let d = dice();
        for i in 0..3 {
            let h = hellinger_transform(&d, &SimplexPoint::vertex(3, i)).unwrap();
            assert!((h - 1.0).abs() < 1e-15);
        }
        let h = hellinger_transform(&d, &SimplexPoint::barycenter(3)).unwrap();
        assert!((h - (1.0f64 / 12.0).cbrt()).abs() < 1e-14);
        let same = vec![d[2].clone(), d[2].clone()];
        let s = SimplexPoint::new(vec![0.3, 0.7]).unwrap();
        assert!((hellinger_transform(&same, &s).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chernoff_dice_is_ln3_at_boundary() {
        let res = multivariate_chernoff(&dice()).unwrap();
        assert!((res.value.finite().unwrap() - 3f64.ln()).abs() < 1e-9);
        let s = res.minimizer.coords();
        assert!(s[0] < 1e-9 && s[1] < 1e-9 && s[2] > 1.0 - 1e-9);
        assert!(res.optimality_gap <= CHERNOFF_OPTIMALITY_TOL);
        assert_eq!(res.common_support_mass, vec![0.5, 0.5, 1.0 / 3.0]);
    }

    #[test]
    fn chernoff_empty_support_is_infinite() {
        let d = vec![
            Distribution::new(vec![1.0, 0.0]).unwrap(),
            Distribution::new(vec![0.0, 1.0]).unwrap(),
        ];
        let res = multivariate_chernoff(&d).unwrap();
        assert_eq!(res.value, ExtendedReal::Infinite);
        assert_eq!(pairwise_chernoff(&d[0], &d[1]).unwrap().value, ExtendedReal::Infinite);
    }

    #[test]
    fn chernoff_rejects_single_distribution() {
        assert!(multivariate_chernoff(&dice()[..1]).is_err());
    }

    #[test]
    fn pairwise_dice_values() {
        let d = dice();
        let v12 = pairwise_chernoff(&d[0], &d[1]).unwrap().value.finite().unwrap();
        let v13 = pairwise_chernoff(&d[0], &d[2]).unwrap().value.finite().unwrap();
        let v23 = pairwise_chernoff(&d[1], &d[2]).unwrap().value.finite().unwrap();
        assert!((v12 - 2f64.ln()).abs() < 1e-10);
        assert!((v13 - 1.5f64.ln()).abs() < 1e-10);
        assert!((v23 - 1.5f64.ln()).abs() < 1e-10);
        let v = pairwise_chernoff(&d[2], &d[2]).unwrap().value.finite().unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn min_likelihood_examples() {
        let e = ClassicalEnsemble::uniform(dice()).unwrap();
        assert!((min_likelihood_error(&e) - 1.0 / 9.0).abs() < 1e-16);
        let p = Distribution::new(vec![0.2, 0.8]).unwrap();
        let same = ClassicalEnsemble::new(vec![0.3, 0.7], vec![p.clone(), p]).unwrap();
        assert!((min_likelihood_error(&same) - 0.3).abs() < 1e-15);
        // ties resolve to the lowest index
        assert_eq!(min_likelihood_decision(&e, 0), 2);
        assert_eq!(min_likelihood_decision(&e, 1), 1);
        assert_eq!(min_likelihood_decision(&same, 0), 0);
    }

    #[test]
    fn nfold_cap_and_zero_n() {
        let e = ClassicalEnsemble::uniform(dice()).unwrap();
        assert!(matches!(
            nfold_error(&e, 15, NfoldMode::Exact),
            Err(Error::ResourceCap { .. })
        ));
        assert!(nfold_error(&e, 0, NfoldMode::Exact).is_err());
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let e = ClassicalEnsemble::uniform(dice()).unwrap();
        let mode = NfoldMode::MonteCarlo { trials: 200_000, seed: 42 };
        let a = nfold_error(&e, 3, mode).unwrap();
        let b = nfold_error(&e, 3, mode).unwrap();
        assert_eq!(a.error.to_bits(), b.error.to_bits());
        let (lo, hi) = a.wilson.unwrap();
        assert!(lo <= a.error && a.error <= hi);
    }

    #[test]
    fn wilson_interval_contains_estimate() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn exponential_family_examples() {
        let d = dice();
        let p0 = exponential_family_density(&d, &[0.0, 0.0]).unwrap();
        // conditional of p_3 on D = {x}
        assert_eq!(p0.weights(), &[1.0, 0.0, 0.0]);
        let p = exponential_family_density(&d, &[0.4, 0.4]).unwrap();
        assert_eq!(p.weights(), &[1.0, 0.0, 0.0]);
        assert!(exponential_family_density(&d, &[0.5, 0.5]).is_err());

        let q = Distribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        let same = vec![q.clone(), q.clone(), q.clone()];
        let pt = exponential_family_density(&same, &[0.2, 0.5]).unwrap();
        for (a, b) in pt.weights().iter().zip(q.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_examples() {
        let q = Distribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        let g = gamma_diagnostics(&[q.clone(), q.clone(), q], &[0.3, 0.3]).unwrap();
        assert!(g.gamma.iter().all(|x| x.abs() < 1e-12));

        let d = dice();
        let res = multivariate_chernoff(&d).unwrap();
        let g = gamma_at(&d, &res.minimizer).unwrap();
        assert!(g.min_gamma() >= (1.0f64 / 3.0).ln() - 1e-6);
        assert!(g.min_gamma() >= g.k_minus - 1e-6);
    }

    #[test]
    fn gamma_pairwise_stationarity() {
        let p = Distribution::new(vec![0.7, 0.2, 0.1]).unwrap();
        let q = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let pc = pairwise_chernoff(&p, &q).unwrap();
        let s = SimplexPoint::new(vec![pc.s_star, 1.0 - pc.s_star]).unwrap();
        let g = gamma_at(&[p, q], &s).unwrap();
        let k = -pc.value.finite().unwrap();
        assert!((g.gamma[0] - k).abs() < 1e-8);
        assert!((g.gamma[1] - k).abs() < 1e-8);
    }
}
