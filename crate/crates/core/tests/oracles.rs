//! Library results checked against independent, mostly brute-force computations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use gsp_transient::graph::{band_select, build_knn_graph, gft_basis, laplacian, BandBasis};
use gsp_transient::harness::{compare_curves, run_monte_carlo, synthetic_stations};
use gsp_transient::noise::{build_cw, NoiseModel};
use gsp_transient::sampling::{greedy_max_lambda_min, random_sampling, SamplingSet};
use gsp_transient::theory::{
    lms_steady_state, lms_theory_exact, rls_theory_exact, Algorithm, RlsSummary, TheoryMode,
};
use gsp_transient::SignalModel;

struct Setup {
    band: BandBasis,
    sampling: SamplingSet,
    s_f: DVector<f64>,
    noise: NoiseModel,
}

fn setup(n: usize, k: usize, f: usize, m: usize, seed: u64) -> Setup {
    let st = synthetic_stations(n, seed).unwrap();
    let basis = gft_basis(&laplacian(&build_knn_graph(&st, k).unwrap())).unwrap();
    let band = band_select(&basis, f).unwrap();
    let sampling = random_sampling(&band, m, seed).unwrap();
    let s_f = band.u_f().tr_mul(&DVector::from_column_slice(st.signal()));
    let noise = build_cw(0.05, 0.05, n, seed).unwrap();
    Setup {
        band,
        sampling,
        s_f,
        noise,
    }
}

impl Setup {
    fn d_s(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.sampling.mask()))
    }

    fn c(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(self.noise.c_w()))
    }

    fn model(&self) -> SignalModel {
        SignalModel::new(
            self.band.clone(),
            self.s_f.clone(),
            self.sampling.clone(),
            self.noise.clone(),
        )
        .unwrap()
    }
}

fn min_eig(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

#[test]
fn lms_exact_matches_full_covariance_recursion() {
    let s = setup(16, 4, 6, 9, 3);
    let u = s.band.u_f();
    let f = s.band.f();
    let mu = 0.8;
    let g = u.transpose() * s.d_s() * u;
    let a = DMatrix::identity(f, f) - &g * mu;
    let q = u.transpose() * s.d_s() * s.c() * s.d_s() * u * (mu * mu);
    let curve = lms_theory_exact(&s.band, &s.sampling, &s.s_f, s.noise.c_w(), mu, 300).unwrap();
    let mut p = &s.s_f * s.s_f.transpose();
    for t in 0..300 {
        let tr = p.trace();
        assert!((curve.values[t] - tr).abs() <= 1e-10 * tr, "t={t}");
        p = &a * &p * a.transpose() + &q;
    }
}

#[test]
fn lms_steady_states_match_series_and_inverse() {
    let s = setup(16, 4, 6, 9, 4);
    let u = s.band.u_f();
    let f = s.band.f();
    let mu = 0.6;
    let g = u.transpose() * s.d_s() * u;
    let q = u.transpose() * s.d_s() * s.c() * s.d_s() * u;
    let a = DMatrix::identity(f, f) - &g * mu;
    // Σ_k A^k (μ² Q) A^kᵀ summed until the terms vanish
    let mut p = DMatrix::zeros(f, f);
    let mut term = &q * (mu * mu);
    for _ in 0..20_000 {
        p += &term;
        term = &a * term * a.transpose();
    }
    let exact = lms_steady_state(&s.band, &s.sampling, s.noise.c_w(), mu, TheoryMode::ExactExpectation)
        .unwrap();
    assert!((exact - p.trace()).abs() <= 1e-10 * p.trace());

    let g_inv = g.try_inverse().unwrap();
    let literal = (&g_inv * &q * &g_inv).trace();
    let lib = lms_steady_state(&s.band, &s.sampling, s.noise.c_w(), mu, TheoryMode::PaperLiteral)
        .unwrap();
    assert!((lib - literal).abs() <= 1e-10 * literal);
}

#[test]
fn rls_frobenius_term_equals_trace_of_m() {
    let s = setup(18, 4, 7, 11, 5);
    let summary = RlsSummary::new(&s.band, &s.sampling, &s.s_f, s.noise.c_w()).unwrap();
    let u = s.band.u_f();
    let c_inv = s.c().try_inverse().unwrap();
    let m = (u.transpose() * s.d_s() * &c_inv * s.d_s() * u).try_inverse().unwrap();
    assert!((summary.trace_m - m.trace()).abs() <= 1e-10 * m.trace());
    assert!((summary.noise_frobenius - m.trace()).abs() <= 1e-10 * m.trace());
}

#[test]
fn small_instance_tail_within_three_standard_errors() {
    let s = setup(10, 3, 4, 6, 3);
    let model = s.model();
    let c = s.noise.c_w();
    for (alg, param) in [(Algorithm::Lms, 0.5), (Algorithm::Rls, 0.79)] {
        let exact = match alg {
            Algorithm::Lms => lms_theory_exact(&s.band, &s.sampling, &s.s_f, c, param, 200),
            Algorithm::Rls => rls_theory_exact(&s.band, &s.sampling, &s.s_f, c, param, 200),
        }
        .unwrap();
        let runs = run_monte_carlo(&model, alg, param, 200, 10_000, 9, None).unwrap();
        let (mean, _) = gsp_transient::harness::aggregate(&runs);
        let d = compare_curves(&mean, &exact.values, &exact.values, Some(&runs), 0.5).unwrap();
        assert!(d.exact.tail_z <= 3.0, "{alg:?}: z = {}", d.exact.tail_z);
    }
}

#[test]
fn doubling_runs_shrinks_tail_standard_error() {
    let s = setup(10, 3, 4, 6, 3);
    let model = s.model();
    let c = s.noise.c_w();
    let exact = lms_theory_exact(&s.band, &s.sampling, &s.s_f, c, 0.5, 200).unwrap();
    let se = |runs: usize| {
        let per_run = run_monte_carlo(&model, Algorithm::Lms, 0.5, 200, runs, 17, None).unwrap();
        let (mean, _) = gsp_transient::harness::aggregate(&per_run);
        compare_curves(&mean, &exact.values, &exact.values, Some(&per_run), 0.5)
            .unwrap()
            .tail_std_err
    };
    let ratio = se(4000) / se(2000);
    let target = 0.5f64.sqrt();
    assert!((ratio - target).abs() <= 0.2 * target, "ratio {ratio}");
}

#[test]
fn synthetic_field_is_nearly_bandlimited() {
    let n = 299;
    let st = synthetic_stations(n, 1).unwrap();
    let basis = gft_basis(&laplacian(&build_knn_graph(&st, 8).unwrap())).unwrap();
    let band = band_select(&basis, 2 * n / 3).unwrap();
    let x = DVector::from_column_slice(st.signal());
    let x_o = band.synthesize(&band.analyze(&x));
    assert!((&x - &x_o).norm() / x.norm() < 0.5);
}

/// Greedy selection recomputed with a dense eigensolve for every candidate.
fn brute_greedy(band: &BandBasis, m: usize) -> Vec<usize> {
    let u = band.u_f();
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < m {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..band.n() {
            if chosen.contains(&c) {
                continue;
            }
            let mut trial = chosen.clone();
            trial.push(c);
            let rows = u.select_rows(trial.iter());
            let score = if trial.len() <= band.f() {
                min_eig(&rows * rows.transpose())
            } else {
                min_eig(rows.transpose() * &rows)
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((c, score));
            }
        }
        chosen.push(best.unwrap().0);
    }
    chosen.sort_unstable();
    chosen
}

#[test]
fn greedy_matches_dense_brute_force() {
    for seed in 0..6 {
        let st = synthetic_stations(14, seed).unwrap();
        let basis = gft_basis(&laplacian(&build_knn_graph(&st, 3).unwrap())).unwrap();
        let band = band_select(&basis, 4).unwrap();
        for m in [4, 7, 10] {
            let fast = greedy_max_lambda_min(&band, m).unwrap();
            assert_eq!(fast.indices(), brute_greedy(&band, m).as_slice(), "seed {seed} m {m}");
        }
    }
}
