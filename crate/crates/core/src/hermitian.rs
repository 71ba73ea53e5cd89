//! Dense complex Hermitian matrices and the spectral calculus built on them.
//!
//! Everything here goes through one eigendecomposition routine
//! ([`HermitianMatrix::eig`]): Householder reduction to real tridiagonal form
//! followed by implicit-shift QR, as implemented by `nalgebra`. Matrix
//! functions are applied as `V f(Λ) V†`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::C64;

/// Absolute tolerance for the conjugate-symmetry check on input matrices.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Relative cutoff below which an eigenvalue counts as zero for every
/// support/kernel decision. The absolute threshold is
/// `SUPPORT_CUTOFF * max(1, ‖H‖_∞)`.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

/// Largest dimension a tensor power may produce unless a caller raises it.
pub const DEFAULT_TENSOR_CAP: usize = 4096;

/// Negative eigenvalues down to `-PSD_TOL` are accepted as rounding noise.
pub const PSD_TOL: f64 = 1e-10;

/// Smallest eigenvalue accepted by [`HermitianMatrix::log`].
pub const LOG_MIN_EIGENVALUE: f64 = 1e-12;

/// Dense Hermitian matrix. Always exactly conjugate-symmetric in storage.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<C64>,
}

/// Eigenvalues (ascending) and the unitary whose columns are eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

fn symmetrize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

impl HermitianMatrix {
    /// Validates conjugate symmetry to within [`HERMITICITY_TOL`] and stores the
    /// symmetrized matrix `(H + H†)/2`.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::validation(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::validation("matrix dimension must be at least 1"));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("matrix has non-finite entries"));
        }
        let n = m.nrows();
        for j in 0..n {
            for k in j..n {
                let d = (m[(j, k)] - m[(k, j)].conj()).norm();
                if d > HERMITICITY_TOL {
                    return Err(Error::validation(format!(
                        "matrix is not Hermitian: |H[{j},{k}] - conj(H[{k},{j}])| = {d:.3e}"
                    )));
                }
            }
        }
        Ok(HermitianMatrix { m: symmetrize(&m) })
    }

    /// Symmetrizes without validation. For results of internal arithmetic
    /// that are Hermitian up to rounding.
    pub(crate) fn from_raw(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        HermitianMatrix { m: symmetrize(&m) }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::validation("rows must form a square matrix"));
        }
        Self::new(DMatrix::from_fn(n, n, |j, k| C64::new(rows[j][k], 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianMatrix {
            m: DMatrix::from_fn(n, n, |j, k| {
                if j == k {
                    C64::new(diag[j], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            m: DMatrix::zeros(dim, dim),
        }
    }

    /// `|v⟩⟨v|` for an arbitrary (not necessarily normalized) vector.
    pub fn outer(v: &DVector<C64>) -> Self {
        HermitianMatrix::from_raw(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|j| self.m[(j, j)].re).sum()
    }

    /// `Tr[self · other]`, which is real for Hermitian arguments.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        trace_product(&self.m, &other.m)
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            m: &self.m - &other.m,
        }
    }

    pub fn scale(&self, c: f64) -> HermitianMatrix {
        HermitianMatrix {
            m: self.m.map(|z| z * c),
        }
    }

    pub fn neg(&self) -> HermitianMatrix {
        self.scale(-1.0)
    }

    /// `A X A†` for an arbitrary (possibly rectangular) `A`.
    pub fn congruence(&self, a: &DMatrix<C64>) -> HermitianMatrix {
        HermitianMatrix::from_raw(a * &self.m * a.adjoint())
    }

    /// Largest absolute entry difference; used for approximate equality checks.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        (&self.m - &other.m)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Spectral decomposition with eigenvalues sorted ascending.
    pub fn eig(&self) -> SpectralDecomposition {
        let n = self.dim();
        if n == 1 {
            return SpectralDecomposition {
                eigenvalues: vec![self.m[(0, 0)].re],
                eigenvectors: DMatrix::identity(1, 1),
            };
        }
        let se = SymmetricEigen::try_new(self.m.clone(), f64::EPSILON, 0)
            .expect("implicit QR iteration is unbounded and always terminates");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
        SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eig().eigenvalues
    }

    /// Operator norm `‖H‖_∞ = max |λ|`.
    pub fn operator_norm(&self) -> f64 {
        self.eig().operator_norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().eigenvalues[0]
    }

    /// True when every eigenvalue is at least `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// `P^s` for positive semi-definite `P`, taken on the support: zero
    /// eigenvalues stay zero for `s ≠ 0`, and `P^0` is the support projector.
    pub fn power(&self, s: f64) -> Result<HermitianMatrix> {
        self.eig().power(s)
    }

    pub fn exp(&self) -> HermitianMatrix {
        self.eig().apply(f64::exp)
    }

    /// Matrix logarithm; requires the smallest eigenvalue to exceed
    /// [`LOG_MIN_EIGENVALUE`].
    pub fn log(&self) -> Result<HermitianMatrix> {
        let sd = self.eig();
        if sd.eigenvalues[0] <= LOG_MIN_EIGENVALUE {
            return Err(Error::domain(format!(
                "matrix logarithm needs a positive definite argument (smallest eigenvalue {:.3e})",
                sd.eigenvalues[0]
            )));
        }
        Ok(sd.apply(f64::ln))
    }

    /// `‖H‖_1`, the sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> f64 {
        self.eig().eigenvalues.iter().map(|l| l.abs()).sum()
    }

    /// `|H| = V |Λ| V†`.
    pub fn abs(&self) -> HermitianMatrix {
        self.eig().apply(f64::abs)
    }

    /// `H_+ = (H + |H|)/2`.
    pub fn positive_part(&self) -> HermitianMatrix {
        self.eig().apply(|l| l.max(0.0))
    }

    /// Orthogonal projector onto the span of eigenvectors with eigenvalue
    /// above the support threshold.
    pub fn support_projector(&self) -> HermitianMatrix {
        self.eig().support_projector()
    }

    /// `‖[A, B]‖_∞`.
    pub fn commutator_norm(&self, other: &HermitianMatrix) -> f64 {
        let c = &self.m * &other.m - &other.m * &self.m;
        // [A,B] is anti-Hermitian; i[A,B] is Hermitian with the same norm.
        let h = HermitianMatrix::from_raw(c.map(|z| z * C64::new(0.0, 1.0)));
        h.operator_norm()
    }

    /// Kronecker product; the index of the pair `(j, k)` is `j·dim(B) + k`.
    pub fn tensor(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            m: self.m.kronecker(&other.m),
        }
    }

    /// `A^{⊗n}` with the default size cap.
    pub fn tensor_power(&self, n: usize) -> Result<HermitianMatrix> {
        self.tensor_power_capped(n, DEFAULT_TENSOR_CAP)
    }

    pub fn tensor_power_capped(&self, n: usize, cap: usize) -> Result<HermitianMatrix> {
        if n == 0 {
            return Err(Error::validation("tensor power needs n >= 1"));
        }
        let required = checked_pow(self.dim(), n);
        if required > cap as u128 {
            return Err(Error::ResourceCap {
                what: format!("tensor power {}^{}", self.dim(), n),
                required,
                cap: cap as u128,
                hint: "reduce n or raise the dimension cap".into(),
            });
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tensor(self);
        }
        Ok(acc)
    }
}

pub(crate) fn checked_pow(base: usize, n: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}

/// `Tr[A B]` real part, for square matrices of equal size.
pub(crate) fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for k in 0..n {
            let x = a[(j, k)] * b[(k, j)];
            acc += x.re;
        }
    }
    acc
}

/// `A ∧ B = (A + B − |A − B|)/2`.
pub fn operator_min(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff_abs = a.sub(b).abs();
    Ok(a.add(b).sub(&diff_abs).scale(0.5))
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    /// Absolute threshold below which eigenvalues are treated as zero.
    pub fn support_threshold(&self) -> f64 {
        self.support_threshold_with(SUPPORT_CUTOFF)
    }

    pub fn support_threshold_with(&self, cutoff: f64) -> f64 {
        cutoff * self.operator_norm().max(1.0)
    }

    /// `V diag(f(λ)) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for c in 0..n {
            let fl = f(self.eigenvalues[c]);
            for r in 0..n {
                scaled[(r, c)] *= fl;
            }
        }
        HermitianMatrix::from_raw(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.apply(|l| l)
    }

    pub fn power(&self, s: f64) -> Result<HermitianMatrix> {
        let thr = self.support_threshold();
        if self.eigenvalues[0] < -PSD_TOL.max(thr) {
            return Err(Error::domain(format!(
                "matrix power needs a positive semi-definite argument (eigenvalue {:.3e})",
                self.eigenvalues[0]
            )));
        }
        Ok(self.apply(|l| {
            if l <= thr {
                0.0
            } else if s == 0.0 {
                1.0
            } else {
                l.powf(s)
            }
        }))
    }

    pub fn support_projector(&self) -> HermitianMatrix {
        let thr = self.support_threshold();
        self.apply(|l| if l > thr { 1.0 } else { 0.0 })
    }

    /// Number of eigenvalues above the support threshold.
    pub fn rank(&self) -> usize {
        let thr = self.support_threshold();
        self.eigenvalues.iter().filter(|&&l| l > thr).count()
    }

    /// Orthonormal basis (as columns) of the eigenvectors selected by `keep`.
    pub fn columns_where(&self, keep: impl Fn(f64) -> bool) -> DMatrix<C64> {
        let cols: Vec<usize> = (0..self.dim())
            .filter(|&c| keep(self.eigenvalues[c]))
            .collect();
        DMatrix::from_fn(self.dim(), cols.len(), |r, c| {
            self.eigenvectors[(r, cols[c])]
        })
    }

    /// Orthonormal basis of the support.
    pub fn support_basis(&self) -> DMatrix<C64> {
        let thr = self.support_threshold();
        self.columns_where(|l| l > thr)
    }

    /// Orthonormal basis of the kernel (|λ| at or below the threshold).
    pub fn kernel_basis(&self) -> DMatrix<C64> {
        let thr = self.support_threshold();
        self.columns_where(|l| l.abs() <= thr)
    }
}

/// Density operator: positive semi-definite with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    base: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::validation(format!(
                "density matrix must have unit trace (trace = {tr:.12})"
            )));
        }
        let lmin = h.min_eigenvalue();
        if lmin < -PSD_TOL {
            return Err(Error::validation(format!(
                "density matrix must be positive semi-definite (eigenvalue {lmin:.3e})"
            )));
        }
        Ok(DensityMatrix { base: h })
    }

    /// Scales a nonzero PSD matrix to unit trace.
    pub fn normalized(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if !(tr > 0.0) {
            return Err(Error::validation("cannot normalize a matrix with nonpositive trace"));
        }
        DensityMatrix::new(h.scale(1.0 / tr))
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let nrm = psi.norm();
        if !(nrm > 0.0) {
            return Err(Error::validation("pure state vector must be nonzero"));
        }
        Ok(DensityMatrix {
            base: HermitianMatrix::outer(&(psi / C64::new(nrm, 0.0))),
        })
    }

    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        DensityMatrix::new(HermitianMatrix::from_diagonal(p))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            base: HermitianMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.base
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            base: self.base.tensor(&other.base),
        }
    }

    pub fn tensor_power(&self, n: usize) -> Result<DensityMatrix> {
        Ok(DensityMatrix {
            base: self.base.tensor_power(n)?,
        })
    }

    /// `(1 − ε)ρ + ε I/d`, which keeps the state valid and full rank.
    pub fn mixed_with_identity(&self, eps: f64) -> DensityMatrix {
        let d = self.dim() as f64;
        DensityMatrix {
            base: self
                .base
                .scale(1.0 - eps)
                .add(&HermitianMatrix::identity(self.dim()).scale(eps / d)),
        }
    }
}

impl AsRef<HermitianMatrix> for DensityMatrix {
    fn as_ref(&self) -> &HermitianMatrix {
        &self.base
    }
}
