use antidist::asymptotics::{classical_scan, quantum_scan, ScanMode};
use antidist::classical::{
    hellinger_transform, min_likelihood_error, multivariate_chernoff, nfold_error, pairwise_chernoff,
    ClassicalEnsemble, Distribution, NfoldMode,
};
use antidist::quantum::{
    induced_ensemble, kappa, one_shot_error, pairwise_upper_bound, BoundsOptions, Povm, QuantumEnsemble,
};
use antidist::sdp::{solve_bounded_trace, BoundedTraceProblem};
use antidist::simplex::SimplexPoint;
use antidist::{random, DensityMatrix, Error, ExtendedReal, HermitianMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("positive mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-3).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn priors(r: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, r).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    })
}

fn ensemble(r: usize, size: usize) -> impl Strategy<Value = ClassicalEnsemble> {
    (priors(r), prop::collection::vec(weights(size), r)).prop_map(|(p, ds)| {
        ClassicalEnsemble::new(p, ds.into_iter().map(|d| Distribution::normalized(d).unwrap()).collect()).unwrap()
    })
}

fn any_ensemble() -> impl Strategy<Value = ClassicalEnsemble> {
    (2usize..=4, 2usize..=5).prop_flat_map(|(r, size)| ensemble(r, size))
}

fn xi(dists: &[Distribution]) -> ExtendedReal {
    multivariate_chernoff(dists).unwrap().value
}

fn kappa_bracket(states: &[DensityMatrix]) -> (f64, f64) {
    let problem = BoundedTraceProblem::symmetric(states.iter().map(|s| s.as_hermitian().clone()).collect()).unwrap();
    let sol = match solve_bounded_trace(&problem, 1e-8, 200) {
        Ok(sol) => sol,
        Err(Error::NonConvergence { best, .. }) => *best,
        Err(e) => panic!("{e}"),
    };
    (sol.value, sol.value + sol.gap)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_shot_error_is_at_most_smallest_prior(e in any_ensemble()) {
        let err = min_likelihood_error(&e);
        let eta_min = e.priors().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(err >= 0.0);
        prop_assert!(err <= eta_min + 1e-15);
    }

    #[test]
    fn nfold_error_does_not_increase_with_copies(e in any_ensemble()) {
        let mut prev = min_likelihood_error(&e);
        let first = nfold_error(&e, 1, NfoldMode::Exact).unwrap().error;
        prop_assert!((first - prev).abs() <= 1e-15);
        for n in 2..=4 {
            let cur = nfold_error(&e, n, NfoldMode::Exact).unwrap().error;
            prop_assert!(cur <= prev + 1e-14, "n={} {} > {}", n, cur, prev);
            prev = cur;
        }
    }

    #[test]
    fn multivariate_exponent_dominates_every_pair(e in any_ensemble()) {
        let total = xi(e.dists());
        for i in 0..e.len() {
            for j in (i + 1)..e.len() {
                let pair = pairwise_chernoff(&e.dists()[i], &e.dists()[j]).unwrap().value;
                prop_assert!(pair.le_within(&total, 1e-7), "pair {:?} total {:?}", pair, total);
            }
        }
    }

    #[test]
    fn exponent_is_invariant_under_relabeling(e in any_ensemble(), shift in 0usize..5) {
        let r = e.len();
        let permuted: Vec<Distribution> = (0..r).map(|i| e.dists()[(i + shift) % r].clone()).collect();
        let size = e.sample_size();
        let relabeled: Vec<Distribution> = e
            .dists()
            .iter()
            .map(|d| Distribution::new((0..size).map(|w| d.weights()[(w + shift) % size]).collect()).unwrap())
            .collect();
        let base = xi(e.dists());
        for other in [xi(&permuted), xi(&relabeled)] {
            match (base, other) {
                (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => prop_assert!((a - b).abs() < 1e-7),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn coarse_graining_cannot_raise_the_exponent(e in any_ensemble(), channel in prop::collection::vec(weights(2), 5)) {
        let coarse: Vec<Distribution> = e
            .dists()
            .iter()
            .map(|d| {
                let mut out = vec![0.0; 2];
                for (w, p) in d.weights().iter().enumerate() {
                    out[0] += p * channel[w][0];
                    out[1] += p * channel[w][1];
                }
                Distribution::normalized(out).unwrap()
            })
            .collect();
        prop_assert!(xi(&coarse).le_within(&xi(e.dists()), 1e-7));
    }

    #[test]
    fn hellinger_transform_brackets_the_minimum(e in any_ensemble()) {
        let c = multivariate_chernoff(e.dists()).unwrap();
        for i in 0..e.len() {
            let h = hellinger_transform(e.dists(), &SimplexPoint::vertex(e.len(), i)).unwrap();
            prop_assert!((h - 1.0).abs() < 1e-12);
        }
        let alpha_min = c.common_support_mass.iter().cloned().fold(1.0, f64::min);
        prop_assert!(c.hellinger_at_min <= alpha_min + 1e-12);
        if c.minimizer.coords().iter().all(|&x| x > 0.0) {
            let h = hellinger_transform(e.dists(), &c.minimizer).unwrap();
            prop_assert!((h - c.hellinger_at_min).abs() <= 1e-10);
        }
    }

    #[test]
    fn scan_rows_are_consistent(e in ensemble(3, 3)) {
        let rep = classical_scan(&e, 5, ScanMode::Exact).unwrap();
        for row in &rep.rows {
            prop_assert!((0.0..=1.0).contains(&row.error));
            if row.error > 0.0 {
                let rate = row.neg_log_rate.finite().unwrap();
                let expect = -row.error.ln() / row.n as f64;
                prop_assert!((rate - expect).abs() <= 1e-12 * expect.abs().max(1e-300));
            } else {
                prop_assert!(row.neg_log_rate.is_infinite());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fitted_exponent_forgets_the_priors(
        dists in prop::collection::vec(weights(3), 3),
        a in priors(3),
        b in priors(3),
    ) {
        let dists: Vec<Distribution> = dists.into_iter().map(|d| Distribution::normalized(d).unwrap()).collect();
        let n_max = 9;
        let ea = ClassicalEnsemble::new(a.clone(), dists.clone()).unwrap();
        let eb = ClassicalEnsemble::new(b.clone(), dists).unwrap();
        let fa = classical_scan(&ea, n_max, ScanMode::Exact).unwrap();
        let fb = classical_scan(&eb, n_max, ScanMode::Exact).unwrap();
        if let (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) = (fa.fitted_exponent, fb.fitted_exponent) {
            let all = a.iter().chain(&b);
            let hi = all.clone().cloned().fold(0.0, f64::max);
            let lo = all.cloned().fold(1.0, f64::min);
            let bound = 2.0 * (hi / lo).ln() / n_max as f64;
            prop_assert!((x - y).abs() <= bound + 1e-9, "|{} - {}| > {}", x, y, bound);
        }
    }

    #[test]
    fn quantum_error_is_bracketed(seed in any::<u64>(), r in 2usize..=4, d in 2usize..=3, p in priors(4)) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let states: Vec<DensityMatrix> = (0..r).map(|_| random::density(d, d, &mut g)).collect();
        let eta: Vec<f64> = {
            let s: f64 = p[..r].iter().sum();
            p[..r].iter().map(|x| x / s).collect()
        };
        let e = QuantumEnsemble::new(eta.clone(), states.clone()).unwrap();
        let err = one_shot_error(&e).unwrap().error;
        let eta_min = eta.iter().cloned().fold(1.0, f64::min);
        let k = kappa(&states).unwrap().value;
        prop_assert!(eta_min * k <= err + 1e-7, "eta_min kappa {} > err {}", eta_min * k, err);
        prop_assert!(err <= pairwise_upper_bound(&e).unwrap() + 1e-7);
    }

    #[test]
    fn measuring_cannot_beat_the_optimal_measurement(seed in any::<u64>(), r in 2usize..=3) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let states: Vec<DensityMatrix> = (0..r).map(|_| random::density(d, 2, &mut g)).collect();
        let e = QuantumEnsemble::uniform(states).unwrap();
        let povm = Povm::from_basis(&random::unitary(d, &mut g)).unwrap();
        let classical = induced_ensemble(&e, &povm).unwrap();
        prop_assert!(one_shot_error(&e).unwrap().error <= min_likelihood_error(&classical) + 1e-7);
    }

    #[test]
    fn kappa_is_supermultiplicative(seed in any::<u64>(), r in 2usize..=3) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<DensityMatrix> = (0..r).map(|_| random::density(2, 2, &mut g)).collect();
        let b: Vec<DensityMatrix> = (0..r).map(|_| random::density(2, 2, &mut g)).collect();
        let joint: Vec<DensityMatrix> = a.iter().zip(&b).map(|(x, y)| x.tensor(y)).collect();
        // dual(joint) >= kappa(joint) >= kappa(a) kappa(b) >= primal(a) primal(b),
        // which holds for non-converged iterates too.
        let (_, joint_hi) = kappa_bracket(&joint);
        let (a_lo, _) = kappa_bracket(&a);
        let (b_lo, _) = kappa_bracket(&b);
        prop_assert!(a_lo * b_lo <= joint_hi + 1e-9, "{} * {} > {}", a_lo, b_lo, joint_hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn quantum_scan_respects_the_sandwich(seed in any::<u64>(), p in priors(2)) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let states = vec![random::full_rank_density(2, &mut g), random::full_rank_density(2, &mut g)];
        let e = QuantumEnsemble::new(p.clone(), states).unwrap();
        let n_max = 5;
        let rep = quantum_scan(&e, n_max, &BoundsOptions { restarts: 2, seed }).unwrap();
        let b = rep.bounds.clone().unwrap();
        let eta_min = p.iter().cloned().fold(1.0, f64::min);
        for row in &rep.rows {
            let cap = b.upper_neg_ln_kappa.finite().unwrap() + (1.0 / eta_min).ln() / row.n as f64;
            prop_assert!(row.neg_log_rate.le_within(&ExtendedReal::Finite(cap), 1e-6));
        }
        let lower = b.lower_pairwise.finite().unwrap();
        prop_assert!(rep.fitted_exponent.finite().unwrap() >= lower - 2.0 / n_max as f64);
    }
}

#[test]
fn identity_kappa_is_one() {
    let rho = DensityMatrix::normalized(HermitianMatrix::from_diagonal(&[0.6, 0.4])).unwrap();
    let k = kappa(&[rho.clone(), rho]).unwrap();
    assert!((k.value - 1.0).abs() < 1e-7);
}
