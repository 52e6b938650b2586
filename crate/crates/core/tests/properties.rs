use num_complex::Complex;
use proptest::prelude::*;
use qtomo::dist::ProbDist;
use qtomo::generative::{exact_distribution, RnnParams};
use qtomo::linalg::{hermitian_eig, kron, psd_sqrt, CMatrix};
use qtomo::metrics::{classical_fidelity, quantum_fidelity};
use qtomo::mle::{mle_project, MleConfig};
use qtomo::povm::{make_povm, povm_distribution, PovmKind};
use qtomo::sim::{
    apply_circuit, build_ghz, densify, random_circuit, random_state, DensityMatrix, Gate,
    NoiseModel, StateVector,
};

fn hermitian(dim: usize, vals: &[f64]) -> CMatrix<f64> {
    let m = CMatrix::from_fn(dim, dim, |i, j| {
        Complex::new(
            vals[(i * dim + j) % vals.len()],
            vals[(j * dim + i + 1) % vals.len()],
        )
    });
    m.hermitian_part()
}

fn mixed_state(n: usize, seed: u64, p: f64) -> DensityMatrix<f64> {
    let psi = random_state::<f64>(n, 3, seed).unwrap();
    densify(&psi, &NoiseModel::depolarizing(p).unwrap()).unwrap()
}

fn unitary(n: usize, seed: u64) -> CMatrix<f64> {
    let c = random_circuit(n, 3, seed).unwrap();
    let dim = 1 << n;
    let mut u = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut amps = vec![Complex::new(0.0, 0.0); dim];
        amps[j] = Complex::new(1.0, 0.0);
        let out = apply_circuit(&c, &StateVector::new(n, amps).unwrap()).unwrap();
        for (i, a) in out.amplitudes().iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kron_is_associative_on_integers(v in proptest::collection::vec(-4i32..5, 12)) {
        let m = |o: usize| CMatrix::<f64>::from_fn(2, 2, |i, j| Complex::new(v[o + 2 * i + j] as f64, 0.0));
        let (a, b, c) = (m(0), m(4), m(8));
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn eigenvalues_sum_to_trace(vals in proptest::collection::vec(-1.0f64..1.0, 16..40), dim in 2usize..7) {
        let a = hermitian(dim, &vals);
        let e = hermitian_eig(&a).unwrap();
        let sum: f64 = e.eigenvalues.iter().sum();
        prop_assert!((sum - a.trace().re).abs() <= 1e-9 * a.frobenius_norm().max(1.0));
        let rebuilt = e.map_eigenvalues(|x| x);
        prop_assert!(rebuilt.distance(&a).unwrap() <= 1e-9 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn psd_sqrt_is_stable(seed in 0u64..1000, n in 1usize..4, p in 0.0f64..1.0) {
        let rho = mixed_state(n, seed, p);
        let s = psd_sqrt(rho.matrix()).unwrap();
        let again = psd_sqrt(&s.matmul(&s).unwrap()).unwrap();
        prop_assert!(again.distance(&s).unwrap() <= 1e-7);
    }

    #[test]
    fn densify_keeps_trace_and_positivity(seed in 0u64..1000, n in 1usize..5, p in 0.0f64..=1.0) {
        let rho = mixed_state(n, seed, p);
        prop_assert!((rho.matrix().trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(rho.min_eigenvalue().unwrap() >= -1e-12);
    }

    #[test]
    fn experimental_ghz_is_x_layer_on_standard(n in 2usize..7) {
        let standard = build_ghz::<f64>(n, false).unwrap();
        let mut layer = qtomo::sim::Circuit::new(n).unwrap();
        for q in (1..n).step_by(2) {
            layer.push(Gate::X(q)).unwrap();
        }
        let flipped = apply_circuit(&layer, &standard).unwrap();
        prop_assert_eq!(flipped, build_ghz::<f64>(n, true).unwrap());
    }

    #[test]
    fn born_distribution_is_normalized(seed in 0u64..1000, n in 1usize..5, p in 0.0f64..1.0, p6 in any::<bool>()) {
        let kind = if p6 { PovmKind::Pauli6 } else { PovmKind::Pauli4 };
        let dist = povm_distribution(&mixed_state(n, seed, p), &make_povm(kind)).unwrap();
        prop_assert!(dist.values().iter().all(|&v| v >= 0.0));
        prop_assert!((dist.values().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn model_marginal_matches_shorter_model(
        seed in any::<u64>(),
        n in 2usize..5,
        hidden in 2usize..10,
        p6 in any::<bool>(),
    ) {
        let k = if p6 { 6 } else { 4 };
        let params = RnnParams::<f64>::random(hidden, k, 1.5, seed).unwrap();
        let full = exact_distribution(&params, n).unwrap();
        let prefix = exact_distribution(&params, n - 1).unwrap();
        let keep: Vec<usize> = (0..n - 1).collect();
        let marginal = full.marginal(&keep).unwrap();
        for (a, b) in marginal.values().iter().zip(prefix.values()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn mle_output_is_physical_and_idempotent(
        seed in 0u64..1000,
        n in 1usize..3,
        w in proptest::collection::vec(0.0f64..1.0, 16),
    ) {
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let exact = povm_distribution(&mixed_state(n, seed, 0.0), &povm).unwrap();
        let noisy: Vec<f64> = exact.values().iter().enumerate().map(|(i, v)| v + 0.2 * w[i % w.len()]).collect();
        let p = ProbDist::from_weights(n, 4, noisy).unwrap();
        let cfg = MleConfig::default();
        let fit = mle_project(&p, &povm, &cfg).unwrap();
        prop_assert!(fit.rho.min_eigenvalue().unwrap() >= -1e-9);
        prop_assert!((fit.rho.matrix().trace().re - 1.0).abs() <= 1e-9);
        prop_assert!(fit.rho.matrix().hermitian_defect() <= 1e-9);
        prop_assert!(fit.history.windows(2).all(|h| h[1] <= h[0]));
        let again = mle_project(&fit.p_mle, &povm, &cfg).unwrap();
        prop_assert!(again.rho.matrix().distance(fit.rho.matrix()).unwrap() < 1e-6);
    }

    #[test]
    fn classical_fidelity_is_symmetric(a in proptest::collection::vec(0.0f64..1.0, 16), b in proptest::collection::vec(0.0f64..1.0, 16)) {
        prop_assume!(a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0);
        let p = ProbDist::from_weights(2, 4, a).unwrap();
        let q = ProbDist::from_weights(2, 4, b).unwrap();
        let (pq, qp) = (classical_fidelity(&p, &q).unwrap(), classical_fidelity(&q, &p).unwrap());
        prop_assert!((pq - qp).abs() <= 1e-12);
        prop_assert!((classical_fidelity(&p, &p).unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!(pq <= 1.0 + 1e-12);
    }

    #[test]
    fn quantum_fidelity_is_symmetric_and_unitarily_invariant(
        s1 in 0u64..1000,
        s2 in 0u64..1000,
        n in 1usize..4,
        p in 0.0f64..0.5,
    ) {
        let a = mixed_state(n, s1, p);
        let b = mixed_state(n, s2, 0.5 - p);
        let ab = quantum_fidelity(&a, &b).unwrap();
        prop_assert!((ab - quantum_fidelity(&b, &a).unwrap()).abs() <= 1e-8);
        let u = unitary(n, s1 ^ s2);
        let conj = |r: &DensityMatrix<f64>| {
            let m = u.matmul(r.matrix()).unwrap().matmul(&u.adjoint()).unwrap();
            DensityMatrix::from_estimate(n, m.hermitian_part()).unwrap()
        };
        prop_assert!((ab - quantum_fidelity(&conj(&a), &conj(&b)).unwrap()).abs() <= 1e-8);
    }
}
