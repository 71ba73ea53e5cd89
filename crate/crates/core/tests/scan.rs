use antidist::asymptotics::{classical_scan, quantum_scan, RowMode, ScanMode};
use antidist::classical::{multivariate_chernoff, ClassicalEnsemble, Distribution};
use antidist::quantum::{quantum_chernoff_pair, BoundsOptions, QuantumEnsemble};
use antidist::{random, DensityMatrix, ExtendedReal};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn helstrom(e1: f64, r1: &DensityMatrix, e2: f64, r2: &DensityMatrix) -> f64 {
    let diff = r1.as_hermitian().scale(e1).sub(&r2.as_hermitian().scale(e2));
    0.5 * (e1 + e2 - diff.trace_norm())
}

#[test]
fn commuting_triple_is_perfect_at_one_copy() {
    let states = vec![
        DensityMatrix::from_diagonal(&[0.5, 0.5, 0.0]).unwrap(),
        DensityMatrix::from_diagonal(&[0.5, 0.0, 0.5]).unwrap(),
        DensityMatrix::from_diagonal(&[0.0, 0.5, 0.5]).unwrap(),
    ];
    let e = QuantumEnsemble::uniform(states).unwrap();
    let rep = quantum_scan(&e, 3, &BoundsOptions::default()).unwrap();
    assert!(rep.perfect);
    assert_eq!(rep.rows.len(), 1);
    assert_eq!(rep.rows[0].error, 0.0);
    assert_eq!(rep.fitted_exponent, ExtendedReal::Infinite);
}

#[test]
fn identical_qubits_keep_error_one_over_r() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random::unitary(2, &mut rng);
    let rho = DensityMatrix::normalized(
        antidist::HermitianMatrix::from_diagonal(&[0.8, 0.2]).congruence(&u),
    )
    .unwrap();
    let e = QuantumEnsemble::uniform(vec![rho.clone(), rho.clone(), rho]).unwrap();
    let rep = quantum_scan(&e, 4, &BoundsOptions::default()).unwrap();
    assert_eq!(rep.rows.len(), 4);
    for r in &rep.rows {
        assert!((r.error - 1.0 / 3.0).abs() < 1e-7, "n={} error={}", r.n, r.error);
    }
    assert!(rep.fitted_exponent.finite().unwrap().abs() < 1e-6);
}

#[test]
fn qubit_pair_rows_match_helstrom_on_tensor_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random::full_rank_density(2, &mut rng);
    let b = random::full_rank_density(2, &mut rng);
    let e = QuantumEnsemble::new(vec![0.35, 0.65], vec![a.clone(), b.clone()]).unwrap();
    let rep = quantum_scan(&e, 4, &BoundsOptions::default()).unwrap();
    for r in &rep.rows {
        assert_eq!(r.mode, RowMode::Sdp);
        let oracle = helstrom(0.35, &a.tensor_power(r.n).unwrap(), 0.65, &b.tensor_power(r.n).unwrap());
        assert!((r.error - oracle).abs() < 1e-7, "n={} sdp={} oracle={}", r.n, r.error, oracle);
    }
    let xi = quantum_chernoff_pair(&a, &b).unwrap().value.finite().unwrap();
    assert!(rep.rows.last().unwrap().neg_log_rate.finite().unwrap() > 0.0);
    assert!((rep.fitted_exponent.finite().unwrap() - xi).abs() < 0.2);
}

#[test]
fn random_three_distribution_scan_tracks_chernoff() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dists = (0..3)
        .map(|_| Distribution::new(random::probability_vector(4, 0.0, &mut rng)).unwrap())
        .collect();
    let e = ClassicalEnsemble::uniform(dists).unwrap();
    let rep = classical_scan(&e, 9, ScanMode::Exact).unwrap();
    let xi = multivariate_chernoff(e.dists()).unwrap().value.finite().unwrap();
    assert!((rep.fitted_exponent.finite().unwrap() - xi).abs() < 0.15);
}

#[test]
fn monte_carlo_fallback_past_the_cap() {
    let d = Distribution::new(vec![0.1; 10]).unwrap();
    let e = ClassicalEnsemble::new(vec![0.25, 0.75], vec![d.clone(), d]).unwrap();
    let rep = classical_scan(&e, 8, ScanMode::ExactThenMonteCarlo { trials: 20_000, seed: 1 }).unwrap();
    assert_eq!(rep.rows[6].mode, RowMode::Exact);
    assert_eq!(rep.rows[7].mode, RowMode::MonteCarlo);
    assert!((rep.rows[7].error - 0.25).abs() < 5.0 * rep.rows[7].std_err.unwrap().max(1e-3));
    assert!(classical_scan(&e, 8, ScanMode::Exact).is_err());
}

#[test]
fn qutrit_scan_beyond_cap_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let e = QuantumEnsemble::uniform(vec![
        random::full_rank_density(3, &mut rng),
        random::full_rank_density(3, &mut rng),
    ])
    .unwrap();
    assert!(matches!(
        quantum_scan(&e, 4, &BoundsOptions::default()),
        Err(antidist::Error::ResourceCap { .. })
    ));
}

#[test]
fn lattice_oscillations_fade_with_larger_n() {
    let e = ClassicalEnsemble::new(
        vec![0.27980885312401943, 0.6071304312885698, 0.11306071558741079],
        vec![
            Distribution::new(vec![0.9963208252968482, 0.0036791747031518053]).unwrap(),
            Distribution::new(vec![0.2703487069745071, 0.7296512930254929]).unwrap(),
            Distribution::new(vec![0.6266430903772847, 0.3733569096227153]).unwrap(),
        ],
    )
    .unwrap();
    let xi = multivariate_chernoff(e.dists()).unwrap().value.finite().unwrap();
    let short = classical_scan(&e, 9, ScanMode::Exact).unwrap().fitted_exponent.finite().unwrap();
    let long = classical_scan(&e, 22, ScanMode::Exact).unwrap().fitted_exponent.finite().unwrap();
    assert!((short - xi).abs() > 0.15);
    assert!((long - xi).abs() < 0.01, "fit {long} vs {xi}");
}
