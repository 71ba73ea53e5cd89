//! Random test instances: Gaussian vectors, Haar unitaries, random states and
//! distributions. All generators take an explicit RNG so results are
//! reproducible from a seed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution as _, Exp1, StandardNormal};

use crate::hermitian::{DensityMatrix, HermitianMatrix};
use crate::C64;

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Vector with i.i.d. standard complex Gaussian entries (not normalized).
pub fn gaussian_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<C64> {
    DVector::from_fn(d, |_, _| C64::new(normal(rng), normal(rng)))
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| C64::new(normal(rng), normal(rng)))
}

/// Hermitian matrix `(G + G†)/2` from a Ginibre `G`.
pub fn hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianMatrix {
    HermitianMatrix::from_raw(ginibre(d, d, rng))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` absorbed into `Q`.
pub fn unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..d {
        let rc = r[(c, c)];
        let phase = if rc.norm() > 0.0 { rc / rc.norm() } else { C64::new(1.0, 0.0) };
        for row in 0..d {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Isometry `V: C^d_in → C^d_out` (`V†V = I`), `d_out ≥ d_in`.
pub fn isometry<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> DMatrix<C64> {
    let u = unitary(d_out, rng);
    u.columns(0, d_in).into_owned()
}

/// Random density matrix of the given rank, `G G† / Tr[G G†]` with
/// `G` a `d × rank` Ginibre matrix.
pub fn density<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let h = HermitianMatrix::from_raw(&g * g.adjoint());
    DensityMatrix::normalized(h).expect("Ginibre product has positive trace")
}

/// Full-rank random density matrix with smallest eigenvalue bounded away
/// from zero (mixed with a little of the maximally mixed state).
pub fn full_rank_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    density(d, d, rng).mixed_with_identity(0.05)
}

pub fn pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::pure(&gaussian_vector(d, rng)).expect("Gaussian vector is nonzero")
}

/// Uniform point on the probability simplex (normalized exponentials).
pub fn simplex_point<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..r).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Probability vector with every entry at least `floor / n`.
pub fn probability_vector<R: Rng + ?Sized>(n: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let p = simplex_point(n, rng);
    let u = 1.0 / n as f64;
    let mut q: Vec<f64> = p.iter().map(|x| (1.0 - floor) * x + floor * u).collect();
    let s: f64 = q.iter().sum();
    q.iter_mut().for_each(|x| *x /= s);
    q
}

/// `U diag(p) U†` for a shared unitary, producing commuting states.
pub fn commuting_states<R: Rng + ?Sized>(
    spectra: &[Vec<f64>],
    rng: &mut R,
) -> Vec<DensityMatrix> {
    let d = spectra[0].len();
    let u = unitary(d, rng);
    spectra
        .iter()
        .map(|p| {
            let h = HermitianMatrix::from_diagonal(p).congruence(&u);
            DensityMatrix::normalized(h).expect("spectrum is a probability vector")
        })
        .collect()
}
