mod common;

use std::sync::Arc;

use adiabat::models::*;
use adiabat::specfun::Interval01;
use adiabat::spectral::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn pauli_x() -> SparseOperator {
    SparseOperator::from_triplets(2, vec![(0, 1, Complex64::new(1.0, 0.0)), (1, 0, Complex64::new(1.0, 0.0))])
}

fn pauli_z() -> SparseOperator {
    SparseOperator::from_diagonal(&[1.0, -1.0])
}

/// `H(τ) = α(τ − ½) σz + V σx`.
fn landau_zener(alpha: f64, coupling: f64) -> AffinePath {
    AffinePath::new(1, &[pauli_z(), pauli_x()], move |t| vec![alpha * (t - 0.5), coupling])
}

#[test]
fn landau_zener_coupling_matches_closed_form() {
    let (alpha, v) = (6.0, 0.7);
    let path = landau_zener(alpha, v);
    for tau in common::open_grid(0.05, 0.95, 25) {
        let got = gamma0(&path, Interval01::new(tau).unwrap(), DEFAULT_GAMMA_STEP).unwrap();
        let x = tau - 0.5;
        let want = 0.5 * alpha * v / (alpha * alpha * x * x + v * v);
        assert!((got - want).abs() < 1e-6 * want.max(1.0), "tau {tau}: {got} vs {want}");
    }
    let gap = path_eigenpairs(&path, 0.5, 2).unwrap().gap().unwrap();
    assert!((gap - 2.0 * v).abs() < 1e-12);
}

#[test]
fn lanczos_agrees_with_full_diagonalization() {
    for sites in [4usize, 5, 6, 9] {
        let chain = IsingChain::new(sites, DEFAULT_MEMORY_CAP).unwrap();
        for s in [0.0, 0.3, 0.74, 1.0] {
            let h = chain.hamiltonian(Interval01::new(s).unwrap()).unwrap();
            let full = h.to_dense().symmetric_eigen();
            let mut exact: Vec<f64> = full.eigenvalues.iter().copied().collect();
            exact.sort_by(f64::total_cmp);
            let got = lowest_eigenpairs(&h, 2).unwrap();
            for k in 0..2 {
                assert!(
                    (got.energies[k] - exact[k]).abs() < 1e-9 * exact[k].abs().max(1.0),
                    "L = {sites}, s = {s}, level {k}: {} vs {}",
                    got.energies[k],
                    exact[k]
                );
            }
            // eigen-equation residual of the returned ground state
            let psi = got.ground_state().amplitudes();
            let hpsi = h.apply(psi);
            let res: f64 = hpsi
                .iter()
                .zip(psi)
                .map(|(a, b)| (a - b * got.energies[0]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-8 * exact[0].abs().max(1.0));
        }
    }
}

#[test]
fn ising_endpoints_have_known_ground_states() {
    for sites in [5usize, 7] {
        let chain = IsingChain::new(sites, DEFAULT_MEMORY_CAP).unwrap();
        let start = path_eigenpairs(&chain, 0.0, 2).unwrap();
        assert!(start.ground_state().amplitudes()[0].norm() > 1.0 - 1e-12);
        let end = path_eigenpairs(&chain, 1.0, 2).unwrap();
        assert!(end.ground_state().amplitudes()[neel_index(sites)].norm() > 1.0 - 1e-12);
    }
}

#[test]
fn gap_profile_has_interior_minimum() {
    let chain = IsingChain::new(7, DEFAULT_MEMORY_CAP).unwrap();
    let profile = gap_profile(&chain, 41).unwrap();
    let (s_min, g_min) = profile.minimum();
    assert!(s_min > 0.5 && s_min < 0.95, "minimum at {s_min}");
    assert!(g_min > 0.1 && g_min < 0.25);
    assert!(profile.gaps().iter().all(|g| *g >= g_min));
}

fn rephased(path: Arc<AffinePath>, phases: Vec<f64>) -> AffinePath {
    let u: Vec<Complex64> = phases.iter().map(|p| Complex64::from_polar(1.0, *p)).collect();
    let terms: Vec<SparseOperator> = (0..path.terms().num_terms())
        .map(|k| {
            let t = path.terms().term(k);
            let mut triplets = Vec::new();
            for r in 0..t.dim() {
                for (c, v) in t.row(r) {
                    triplets.push((r, c, u[r] * v * u[c].conj()));
                }
            }
            SparseOperator::from_triplets(t.dim(), triplets)
        })
        .collect();
    let source = path.clone();
    AffinePath::new(path.num_sites(), &terms, move |s| {
        source.coefficients(Interval01::saturating(s)).unwrap()
    })
}

fn two_spin_path() -> AffinePath {
    let zz = SparseOperator::from_diagonal(&[1.0, -1.0, -1.0, 1.0]);
    let z_sum = SparseOperator::from_diagonal(&[2.0, 0.0, 0.0, -2.0]);
    let one = Complex64::new(1.0, 0.0);
    let x_sum = SparseOperator::from_triplets(
        4,
        vec![(0, 1, one), (1, 0, one), (0, 2, one), (2, 0, one), (1, 3, one), (3, 1, one), (2, 3, one), (3, 2, one)],
    );
    AffinePath::new(2, &[zz, z_sum, x_sum], |s| vec![0.3, 1.0 - 2.0 * s, 0.4 + 0.2 * s])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn coupling_is_gauge_invariant(
        phases in proptest::collection::vec(-3.0f64..3.0, 4),
        tau in 0.05f64..0.95,
    ) {
        let base = Arc::new(two_spin_path());
        let other = rephased(base.clone(), phases);
        let t = Interval01::new(tau).unwrap();
        let a = gamma0(base.as_ref(), t, DEFAULT_GAMMA_STEP).unwrap();
        let b = gamma0(&other, t, DEFAULT_GAMMA_STEP).unwrap();
        prop_assert!((a - b).abs() < 1e-7 * a.max(1.0), "{} vs {}", a, b);
    }
}
