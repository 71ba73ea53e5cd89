//! Scans of the `n`-copy error and empirical exponent fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{self, ClassicalEnsemble, Distribution, NfoldMode};
use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};
use crate::quantum::{self, BoundsOptions, ExponentBounds, QuantumEnsemble, SDP_DIM_CAP};
use crate::sdp::{self, BoundedTraceProblem};
use crate::ExtendedReal;

/// Weight of the identity added to each state before tensor powering.
pub const TENSOR_REGULARIZATION: f64 = 1e-12;

/// An SDP row whose certified upper bound is below this counts as zero error.
pub const ZERO_ERROR_CERTIFICATE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowMode {
    Exact,
    Sdp,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub error: f64,
    /// `−(1/n) ln error`
    pub neg_log_rate: ExtendedReal,
    pub mode: RowMode,
    pub std_err: Option<f64>,
}

impl ScanRow {
    fn new(n: usize, error: f64, mode: RowMode, std_err: Option<f64>) -> Self {
        ScanRow {
            n,
            error,
            neg_log_rate: ExtendedReal::neg_ln(error).scale(1.0 / n as f64),
            mode,
            std_err,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Least-squares slope of `−ln error` against `n` over the largest half of `n`.
    pub fitted_exponent: ExtendedReal,
    /// `neg_log_rate` of the last row.
    pub last_rate: ExtendedReal,
    /// A row had zero error, so the scan stopped early.
    pub perfect: bool,
    /// Exact exponent when known (classical ensembles and commuting states).
    pub exact_exponent: Option<ExtendedReal>,
    pub bounds: Option<ExponentBounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
    /// Exact while the enumeration fits the cap, Monte Carlo beyond it.
    ExactThenMonteCarlo { trials: u64, seed: u64 },
}

/// Slope of `−ln error` over the last `⌈n_max/2⌉` rows (at least two).
pub fn fit_exponent(rows: &[ScanRow]) -> ExtendedReal {
    if rows.iter().any(|r| r.error <= 0.0) {
        return ExtendedReal::Infinite;
    }
    if rows.len() < 2 {
        return rows.last().map(|r| r.neg_log_rate).unwrap_or(ExtendedReal::Finite(0.0));
    }
    let n_max = rows.last().unwrap().n;
    let window = n_max.div_ceil(2).max(2).min(rows.len());
    let tail = &rows[rows.len() - window..];
    let xs: Vec<f64> = tail.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|r| -r.error.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    ExtendedReal::Finite(sxy / sxx)
}

fn assemble(mut rows: Vec<ScanRow>, perfect_modes: &[RowMode]) -> (Vec<ScanRow>, bool) {
    if let Some(pos) = rows
        .iter()
        .position(|r| r.error <= 0.0 && perfect_modes.contains(&r.mode))
    {
        rows.truncate(pos + 1);
        return (rows, true);
    }
    (rows, false)
}

fn report(rows: Vec<ScanRow>, perfect: bool, exact: Option<ExtendedReal>, bounds: Option<ExponentBounds>) -> ScanReport {
    let fitted_exponent = if perfect {
        ExtendedReal::Infinite
    } else {
        fit_exponent(&rows)
    };
    ScanReport {
        last_rate: rows.last().map(|r| r.neg_log_rate).unwrap_or(ExtendedReal::Finite(0.0)),
        fitted_exponent,
        perfect,
        exact_exponent: exact,
        bounds,
        rows,
    }
}

/// `n`-copy minimum-likelihood errors for `n = 1..=n_max`.
pub fn classical_scan(ensemble: &ClassicalEnsemble, n_max: usize, mode: ScanMode) -> Result<ScanReport> {
    if n_max < 2 {
        return Err(Error::validation("n_max must be at least 2"));
    }
    let rows = (1..=n_max)
        .into_par_iter()
        .map(|n| classical_row(ensemble, n, mode))
        .collect::<Result<Vec<_>>>()?;
    let (rows, perfect) = assemble(rows, &[RowMode::Exact]);
    let exact = classical::multivariate_chernoff(ensemble.dists())?.value;
    Ok(report(rows, perfect, Some(exact), None))
}

fn classical_row(ensemble: &ClassicalEnsemble, n: usize, mode: ScanMode) -> Result<ScanRow> {
    let (nfold_mode, row_mode) = match mode {
        ScanMode::Exact => (NfoldMode::Exact, RowMode::Exact),
        ScanMode::MonteCarlo { trials, seed } => (NfoldMode::MonteCarlo { trials, seed }, RowMode::MonteCarlo),
        ScanMode::ExactThenMonteCarlo { trials, seed } => {
            let atoms = crate::hermitian::checked_pow(ensemble.sample_size(), n);
            if atoms <= classical::EXACT_ENUMERATION_CAP {
                (NfoldMode::Exact, RowMode::Exact)
            } else {
                (NfoldMode::MonteCarlo { trials, seed }, RowMode::MonteCarlo)
            }
        }
    };
    let est = classical::nfold_error(ensemble, n, nfold_mode)?;
    Ok(ScanRow::new(n, est.error, row_mode, est.std_err))
}

/// `(ρ + εI) / Tr(ρ + εI)` with `ε` = [`TENSOR_REGULARIZATION`].
fn regularize(rho: &DensityMatrix) -> Result<DensityMatrix> {
    DensityMatrix::normalized(
        rho.as_hermitian()
            .add(&HermitianMatrix::identity(rho.dim()).scale(TENSOR_REGULARIZATION)),
    )
}

/// `n`-copy optimal errors for `n = 1..=n_max`. Commuting ensembles are
/// reduced to the classical ensemble of their spectra; otherwise each row is
/// an SDP on the tensor power.
pub fn quantum_scan(ensemble: &QuantumEnsemble, n_max: usize, bounds: &BoundsOptions) -> Result<ScanReport> {
    if n_max < 2 {
        return Err(Error::validation("n_max must be at least 2"));
    }
    let check = quantum::commuting_detector(ensemble.states());
    if check.spectra.is_none() {
        quantum::tensor_dim(ensemble.dim(), n_max, SDP_DIM_CAP, "tensor-power SDP")?;
    }
    let exponent_bounds = quantum::quantum_bounds(ensemble, bounds)?;
    if let Some(spectra) = check.spectra {
        let dists = spectra
            .into_iter()
            .map(Distribution::normalized)
            .collect::<Result<Vec<_>>>()?;
        let cl = ClassicalEnsemble::new(ensemble.priors().to_vec(), dists)?;
        let mut rep = classical_scan(&cl, n_max, ScanMode::Exact)?;
        rep.bounds = Some(exponent_bounds);
        return Ok(rep);
    }
    let regularized = QuantumEnsemble::new(
        ensemble.priors().to_vec(),
        ensemble.states().iter().map(regularize).collect::<Result<Vec<_>>>()?,
    )?;
    let rows = (1..=n_max)
        .into_par_iter()
        .map(|n| sdp_row(&regularized, n))
        .collect::<Result<Vec<_>>>()?;
    let (rows, perfect) = assemble(rows, &[RowMode::Sdp]);
    Ok(report(rows, perfect, None, Some(exponent_bounds)))
}

fn sdp_row(ensemble: &QuantumEnsemble, n: usize) -> Result<ScanRow> {
    let powered = ensemble.tensor_power(n, SDP_DIM_CAP)?;
    let uppers = powered
        .priors()
        .iter()
        .zip(powered.states())
        .map(|(eta, s)| s.as_hermitian().scale(*eta))
        .collect();
    let problem = BoundedTraceProblem::upper_only(uppers)?;
    let sol = sdp::solve_bounded_trace(&problem, quantum::SDP_TOL, quantum::SDP_MAX_ITER)?;
    let error = if sol.dual_value <= ZERO_ERROR_CERTIFICATE {
        0.0
    } else {
        sol.value.max(0.0)
    };
    Ok(ScanRow::new(n, error, RowMode::Sdp, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dice() -> ClassicalEnsemble {
        ClassicalEnsemble::uniform(vec![
            Distribution::new(vec![0.5, 0.5, 0.0]).unwrap(),
            Distribution::new(vec![0.5, 0.0, 0.5]).unwrap(),
            Distribution::new(vec![1.0 / 3.0; 3]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn dice_scan_rates() {
        let rep = classical_scan(&dice(), 8, ScanMode::Exact).unwrap();
        assert_eq!(rep.rows.len(), 8);
        for r in &rep.rows {
            let expect = 3f64.ln() * (r.n as f64 + 1.0) / r.n as f64;
            assert!((r.neg_log_rate.finite().unwrap() - expect).abs() < 1e-12);
        }
        assert!((rep.fitted_exponent.finite().unwrap() - 3f64.ln()).abs() < 0.08);
    }

    #[test]
    fn identical_distributions_have_flat_scan() {
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        let e = ClassicalEnsemble::new(vec![0.4, 0.6], vec![p.clone(), p]).unwrap();
        let rep = classical_scan(&e, 5, ScanMode::Exact).unwrap();
        for r in &rep.rows {
            assert!((r.error - 0.4).abs() < 1e-14);
        }
        assert!(rep.fitted_exponent.finite().unwrap().abs() < 1e-12);
    }

    #[test]
    fn orthogonal_supports_stop_early() {
        let e = ClassicalEnsemble::uniform(vec![
            Distribution::new(vec![1.0, 0.0]).unwrap(),
            Distribution::new(vec![0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let rep = classical_scan(&e, 6, ScanMode::Exact).unwrap();
        assert!(rep.perfect);
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.fitted_exponent, ExtendedReal::Infinite);
    }

    #[test]
    fn fit_is_exact_on_linear_data() {
        let rows: Vec<ScanRow> = (1..=6)
            .map(|n| ScanRow::new(n, (-(0.7 * n as f64) - 0.2).exp(), RowMode::Exact, None))
            .collect();
        assert!((fit_exponent(&rows).finite().unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn n_max_validation() {
        assert!(classical_scan(&dice(), 1, ScanMode::Exact).is_err());
    }
}
