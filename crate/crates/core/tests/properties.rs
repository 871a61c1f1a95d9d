use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use gsp_transient::estimators::{msd_spectral, rls_init};
use gsp_transient::graph::{
    band_select, build_knn_graph, gft_basis, laplacian, project_bandlimited, BandBasis,
};
use gsp_transient::harness::{run_monte_carlo, synthetic_stations};
use gsp_transient::linalg::orthonormality_error;
use gsp_transient::noise::{build_cw, NoiseModel};
use gsp_transient::sampling::{random_sampling, stable_step_range, SampledGram, SamplingSet};
use gsp_transient::theory::{
    lms_steady_state, lms_theory_exact, lms_theory_paper, rls_steady_state, rls_theory_exact,
    rls_theory_paper, Algorithm, TheoryMode,
};
use gsp_transient::{lms_step, msd, rls_step, LmsState, SignalModel};

#[derive(Debug, Clone)]
struct Instance {
    band: BandBasis,
    sampling: SamplingSet,
    s_f: DVector<f64>,
    lap: DMatrix<f64>,
}

fn instance(n: usize, k: usize, f: usize, extra: usize, seed: u64) -> Option<Instance> {
    let st = synthetic_stations(n, seed).ok()?;
    let g = build_knn_graph(&st, k).ok()?;
    let lap = laplacian(&g);
    let basis = gft_basis(&lap).ok()?;
    let band = band_select(&basis, f).ok()?;
    let m = (f + extra).min(n);
    let sampling = random_sampling(&band, m, seed).ok()?;
    let (s_f, _) = project_bandlimited(&band, &DVector::from_column_slice(st.signal())).ok()?;
    Some(Instance {
        band,
        sampling,
        s_f,
        lap,
    })
}

fn instances() -> impl Strategy<Value = Instance> {
    (6usize..28, 1usize..5, any::<u64>())
        .prop_flat_map(|(n, k, seed)| (Just(n), Just(k.min(n - 1)), 1..=n / 2, 0..=n / 3, Just(seed)))
        .prop_filter_map("unrecoverable draw", |(n, k, f, extra, seed)| {
            instance(n, k, f, extra, seed)
        })
}

fn noise_for(inst: &Instance, seed: u64) -> NoiseModel {
    build_cw(0.05, 0.05, inst.band.n(), seed).unwrap()
}

fn model(inst: &Instance, noise: NoiseModel) -> SignalModel {
    SignalModel::new(
        inst.band.clone(),
        inst.s_f.clone(),
        inst.sampling.clone(),
        noise,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_basis_is_orthonormal_and_accurate(n in 2usize..40, k in 1usize..8, seed in any::<u64>()) {
        let st = synthetic_stations(n, seed).unwrap();
        let g = build_knn_graph(&st, k.min(n - 1)).unwrap();
        let lap = laplacian(&g);
        prop_assert!(lap.row_iter().all(|r| r.sum().abs() < 1e-12));
        prop_assert_eq!(&lap, &lap.transpose());
        let basis = gft_basis(&lap).unwrap();
        prop_assert!(orthonormality_error(&basis.vectors) <= 1e-10);
        for i in 0..n {
            let v = basis.vectors.column(i);
            let lam = basis.eigenvalues[i];
            prop_assert!(lam >= -1e-9);
            let res = (&lap * v - v * lam).amax();
            prop_assert!(res <= 1e-8 * (1.0 + lam.abs()));
        }
        prop_assert!(basis.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
        // determinism
        prop_assert_eq!(&build_knn_graph(&st, k.min(n - 1)).unwrap(), &g);
        prop_assert_eq!(&gft_basis(&lap).unwrap(), &basis);
    }

    #[test]
    fn knn_graph_is_symmetric_with_min_degree_k(n in 2usize..40, k in 1usize..8, seed in any::<u64>()) {
        let k = k.min(n - 1);
        let g = build_knn_graph(&synthetic_stations(n, seed).unwrap(), k).unwrap();
        prop_assert_eq!(g.adjacency(), &g.adjacency().transpose());
        prop_assert!(g.degrees().iter().all(|&d| d >= k));
        prop_assert!((0..n).all(|i| g.adjacency()[(i, i)] == 0.0));
    }

    #[test]
    fn projection_is_idempotent(inst in instances()) {
        let x_o = inst.band.synthesize(&inst.s_f);
        let (_, again) = project_bandlimited(&inst.band, &x_o).unwrap();
        prop_assert!((&again - &x_o).amax() <= 1e-12 * (1.0 + x_o.amax()));
        prop_assert!(inst.lap.nrows() == inst.band.n());
    }

    #[test]
    fn sampling_is_idempotent_and_gram_is_a_contraction(inst in instances(), seed in any::<u64>()) {
        let x = DVector::from_fn(inst.band.n(), |i, _| ((i as u64 ^ seed) % 97) as f64 - 48.0);
        let once = inst.sampling.apply(&x).unwrap();
        prop_assert_eq!(inst.sampling.apply(&once).unwrap(), once);
        let gram = SampledGram::new(&inst.band, &inst.sampling).unwrap();
        prop_assert!(gram.lambda_min() > 0.0);
        prop_assert!(gram.lambda_min() <= gram.lambda_max());
        prop_assert!(gram.lambda_max() <= 1.0 + 1e-12);
        let mu_max = stable_step_range(&inst.band, &inst.sampling).unwrap().mu_max;
        prop_assert!(gram.lms_spectral_radius(0.99 * mu_max) < 1.0);
        prop_assert!(gram.lms_spectral_radius(1.01 * mu_max) >= 1.0);
    }

    #[test]
    fn covariance_draw_is_pure_and_positive(n_a in 0.0f64..1.0, n_b in 1e-6f64..1.0, n in 1usize..50, seed in any::<u64>()) {
        let a = build_cw(n_a, n_b, n, seed).unwrap();
        let b = build_cw(n_a, n_b, n, seed).unwrap();
        prop_assert_eq!(a.c_w(), b.c_w());
        prop_assert!(a.c_w().iter().all(|&c| c >= n_b));
    }

    #[test]
    fn node_and_frequency_msd_agree(inst in instances(), seed in any::<u64>(), mu_frac in 0.05f64..0.95) {
        let noise = noise_for(&inst, seed);
        let m = model(&inst, noise.clone());
        let mu = mu_frac * stable_step_range(&inst.band, &inst.sampling).unwrap().mu_max;
        let mut state = LmsState::new(&m, mu).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        for _ in 0..20 {
            let a = msd(&m, &state.s_hat);
            let b = msd_spectral(&m, &state.s_hat);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-300) + 1e-300);
            let w = gsp_transient::noise::draw_noise(&noise, &mut rng);
            state = lms_step(&state, &m, &w).unwrap();
        }
    }

    #[test]
    fn noiseless_lms_contracts(inst in instances(), mu_frac in 0.05f64..0.95) {
        let quiet = NoiseModel::noiseless(inst.band.n());
        let m = model(&inst, quiet);
        let mu = mu_frac * stable_step_range(&inst.band, &inst.sampling).unwrap().mu_max;
        let zero = DVector::zeros(inst.band.n());
        let mut state = LmsState::new(&m, mu).unwrap();
        let mut prev = msd_spectral(&m, &state.s_hat);
        let first = prev;
        for _ in 0..3000 {
            state = lms_step(&state, &m, &zero).unwrap();
            let cur = msd_spectral(&m, &state.s_hat);
            // A is symmetric with spectral radius < 1, so ‖A Δ‖ ≤ ‖Δ‖ up to roundoff
            prop_assert!(cur <= prev * (1.0 + 1e-12) + 1e-28 * first);
            prev = cur;
        }
        let gram = SampledGram::new(&inst.band, &inst.sampling).unwrap();
        let rho = gram.lms_spectral_radius(mu);
        // bound from the slowest mode after 3000 steps
        prop_assert!(prev <= first * (rho.powi(6000) * (1.0 + 1e-9) + 1e-28));
    }

    #[test]
    fn noiseless_rls_decays_geometrically(inst in instances(), lambda in 0.3f64..1.0) {
        // C_w only shapes the gain here; the noise itself is zero
        let noise = NoiseModel::from_variances(vec![1.0; inst.band.n()]).unwrap();
        let m = model(&inst, noise);
        let zero = DVector::zeros(inst.band.n());
        let mut state = rls_init(&m, lambda).unwrap();
        let s2 = inst.s_f.norm_squared();
        for t in 1..=60 {
            let expected = lambda.powi(2 * (t - 1)) * s2;
            let got = msd_spectral(&m, &state.s_hat);
            prop_assert!((got - expected).abs() <= 1e-10 * s2.max(1.0));
            state = rls_step(&state, &m, &zero).unwrap();
        }
    }

    #[test]
    fn theory_starts_at_signal_energy(inst in instances(), seed in any::<u64>(), mu_frac in 0.05f64..0.95, lambda in 0.3f64..1.0) {
        let noise = noise_for(&inst, seed);
        let c = noise.c_w();
        let mu = mu_frac * stable_step_range(&inst.band, &inst.sampling).unwrap().mu_max;
        let s2 = inst.s_f.norm_squared();
        let curves = [
            lms_theory_paper(&inst.band, &inst.sampling, &inst.s_f, c, mu, 3).unwrap(),
            lms_theory_exact(&inst.band, &inst.sampling, &inst.s_f, c, mu, 3).unwrap(),
            rls_theory_paper(&inst.band, &inst.sampling, &inst.s_f, c, lambda, 3).unwrap(),
            rls_theory_exact(&inst.band, &inst.sampling, &inst.s_f, c, lambda, 3).unwrap(),
        ];
        for curve in curves {
            prop_assert!((curve.values[0] - s2).abs() <= 1e-10 * s2.max(1.0));
        }
    }

    #[test]
    fn noiseless_theory_modes_coincide(inst in instances(), mu_frac in 0.05f64..0.95) {
        let c = vec![0.0; inst.band.n()];
        let mu = mu_frac * stable_step_range(&inst.band, &inst.sampling).unwrap().mu_max;
        let p = lms_theory_paper(&inst.band, &inst.sampling, &inst.s_f, &c, mu, 200).unwrap();
        let e = lms_theory_exact(&inst.band, &inst.sampling, &inst.s_f, &c, mu, 200).unwrap();
        let s2 = inst.s_f.norm_squared();
        for (a, b) in p.values.iter().zip(&e.values) {
            prop_assert!((a - b).abs() <= 1e-10 * s2.max(1.0));
        }
    }

    #[test]
    fn exact_curves_settle_monotonically(inst in instances(), seed in any::<u64>(), mu_frac in 0.05f64..0.95, lambda in 0.3f64..0.99) {
        let noise = noise_for(&inst, seed);
        let c = noise.c_w();
        let mu = mu_frac * stable_step_range(&inst.band, &inst.sampling).unwrap().mu_max;
        let lms = lms_theory_exact(&inst.band, &inst.sampling, &inst.s_f, c, mu, 600).unwrap();
        let lms_ss = lms_steady_state(&inst.band, &inst.sampling, c, mu, TheoryMode::ExactExpectation).unwrap();
        let rls = rls_theory_exact(&inst.band, &inst.sampling, &inst.s_f, c, lambda, 600).unwrap();
        let rls_ss = rls_steady_state(&inst.band, &inst.sampling, c, lambda, TheoryMode::ExactExpectation).unwrap();
        for (curve, ss) in [(&lms.values, lms_ss), (&rls.values, rls_ss)] {
            let gaps: Vec<f64> = curve.iter().map(|v| (v - ss).abs()).collect();
            let tol = 1e-12 * curve[0].max(ss);
            prop_assert!(gaps[300..].windows(2).all(|w| w[1] <= w[0] + tol));
        }
    }

    #[test]
    fn rls_steady_state_scaling(inst in instances(), seed in any::<u64>(), l1 in 0.3f64..0.99, l2 in 0.3f64..0.99) {
        let noise = noise_for(&inst, seed);
        let c = noise.c_w();
        let lit = |l| rls_steady_state(&inst.band, &inst.sampling, c, l, TheoryMode::PaperLiteral).unwrap();
        let ex = |l| rls_steady_state(&inst.band, &inst.sampling, c, l, TheoryMode::ExactExpectation).unwrap();
        prop_assert_eq!(lit(l1), lit(l2));
        let ratio = ex(l1) / ex(l2);
        let expected = ((1.0 - l1) / (1.0 + l1)) / ((1.0 - l2) / (1.0 + l2));
        prop_assert!((ratio - expected).abs() <= 1e-12 * expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn monte_carlo_ignores_thread_count(inst in instances(), seed in any::<u64>(), threads in 1usize..6) {
        let m = model(&inst, noise_for(&inst, seed));
        let a = run_monte_carlo(&m, Algorithm::Lms, 0.5, 40, 9, seed, Some(1)).unwrap();
        let b = run_monte_carlo(&m, Algorithm::Lms, 0.5, 40, 9, seed, Some(threads)).unwrap();
        prop_assert_eq!(a, b);
    }
}
