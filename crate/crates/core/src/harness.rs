//! Seeded Monte Carlo experiments comparing simulated MSD with both theory modes.
//!
//! Every random quantity derives from `master_seed` through ChaCha streams:
//! stream 0 draws the noise covariance, stream `r + 1` drives run `r`, and a
//! reserved stream draws random sampling sets. Runs may execute in any order
//! on any number of threads; aggregation walks runs in ascending index order.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{msd_db, rls_init, LmsState, SignalModel};
use crate::graph::{
    band_select, build_knn_graph, gft_basis, laplacian, project_bandlimited, BandBasis, GftBasis,
    Graph, StationTable,
};
use crate::noise::{build_cw, draw_noise, NoiseModel};
use crate::sampling::{
    check_recoverability, greedy_max_lambda_min, random_sampling, stable_step_range, SamplingSet,
};
use crate::theory::{
    lms_exact_from_spectrum, lms_paper_from_spectrum, rls_exact_from_summary,
    rls_paper_from_summary, theory_db, Algorithm, LmsSpectrum, RlsSummary, TheoryCurve,
};

/// Tail statistics start after this fraction of the iterations unless told otherwise.
pub const DEFAULT_BURN_IN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    Greedy,
    Random,
}

impl SamplingStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SamplingStrategy::Greedy => "greedy",
            SamplingStrategy::Random => "random",
        }
    }
}

/// Graph parameters `(K, F, |S|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseParams {
    pub k: usize,
    pub f: usize,
    pub sample_size: usize,
}

impl CaseParams {
    /// `K = 8, F = 200, |S| = 210`.
    pub const CASE_I: CaseParams = CaseParams {
        k: 8,
        f: 200,
        sample_size: 210,
    };
    /// `K = 16, F = 160, |S| = 210`.
    pub const CASE_II: CaseParams = CaseParams {
        k: 16,
        f: 160,
        sample_size: 210,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: CaseParams,
    pub n_a: f64,
    pub n_b: f64,
    pub algorithm: Algorithm,
    /// `μ` for LMS, `λ` for RLS.
    pub param: f64,
    pub iterations: usize,
    pub runs: usize,
    pub master_seed: u64,
    pub sampling_strategy: SamplingStrategy,
    /// Free-form labels echoed into every output (case name, scenario name, ...).
    pub labels: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.iterations < 1 {
            problems.push("iterations must be >= 1".to_string());
        }
        if self.runs < 1 {
            problems.push("runs must be >= 1".to_string());
        }
        if !(self.param.is_finite() && self.param > 0.0) {
            problems.push(format!("param must be positive, got {}", self.param));
        }
        if self.algorithm == Algorithm::Rls && self.param > 1.0 {
            problems.push(format!("RLS forgetting factor must be <= 1, got {}", self.param));
        }
        if !(self.n_a >= 0.0 && self.n_b >= 0.0) {
            problems.push("noise coefficients must be nonnegative".to_string());
        }
        if self.n_a == 0.0 && self.n_b == 0.0 {
            problems.push("noise coefficients n_a and n_b cannot both be zero".to_string());
        }
        if self.case.k < 1 {
            problems.push("k must be >= 1".to_string());
        }
        if self.case.f < 1 {
            problems.push("f must be >= 1".to_string());
        }
        if self.case.sample_size < self.case.f {
            problems.push(format!(
                "sample_size ({}) must be >= f ({})",
                self.case.sample_size, self.case.f
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Graph, basis, band, sampling set and true spectrum shared by every
/// scenario and algorithm run on one case.
#[derive(Debug, Clone)]
pub struct CaseSetup {
    pub graph: Graph,
    pub basis: GftBasis,
    pub band: BandBasis,
    pub sampling: SamplingSet,
    pub s_f: DVector<f64>,
    pub x_o: DVector<f64>,
    pub lambda_min: f64,
    pub mu_max: f64,
    pub strategy: SamplingStrategy,
}

impl CaseSetup {
    pub fn build(
        stations: &StationTable,
        case: CaseParams,
        strategy: SamplingStrategy,
        seed: u64,
    ) -> Result<Self> {
        let graph = build_knn_graph(stations, case.k)?;
        let basis = gft_basis(&laplacian(&graph))?;
        Self::from_basis(stations, graph, basis, case, strategy, seed)
    }

    /// Same as [`CaseSetup::build`] but reuses an already computed basis.
    pub fn from_basis(
        stations: &StationTable,
        graph: Graph,
        basis: GftBasis,
        case: CaseParams,
        strategy: SamplingStrategy,
        seed: u64,
    ) -> Result<Self> {
        let band = band_select(&basis, case.f)?;
        let sampling = match strategy {
            SamplingStrategy::Greedy => greedy_max_lambda_min(&band, case.sample_size)?,
            SamplingStrategy::Random => random_sampling(&band, case.sample_size, seed)?,
        };
        let rec = check_recoverability(&band, &sampling)?;
        if !rec.ok {
            return Err(Error::NotRecoverable {
                lambda_min: rec.lambda_min,
            });
        }
        let range = stable_step_range(&band, &sampling)?;
        let x = DVector::from_column_slice(stations.signal());
        let (s_f, x_o) = project_bandlimited(&band, &x)?;
        Ok(Self {
            graph,
            basis,
            band,
            sampling,
            s_f,
            x_o,
            lambda_min: rec.lambda_min,
            mu_max: range.mu_max,
            strategy,
        })
    }

    pub fn signal_model(&self, noise: NoiseModel) -> Result<SignalModel> {
        SignalModel::new(
            self.band.clone(),
            self.s_f.clone(),
            self.sampling.clone(),
            noise,
        )
    }
}

/// Tail agreement between the empirical curve and one theory curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDeviation {
    #[serde(deserialize_with = "nan_if_null")]
    pub max_abs_db: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub mean_abs_db: f64,
    /// Tail mean of the theory curve, linear units.
    #[serde(deserialize_with = "nan_if_null")]
    pub theory_tail_mean: f64,
    /// `|empirical tail mean − theory tail mean|` in units of the tail standard error.
    #[serde(deserialize_with = "nan_if_null")]
    pub tail_z: f64,
    /// Largest pointwise `|empirical − theory| / SE(t)` over the tail.
    #[serde(deserialize_with = "nan_if_null")]
    pub max_pointwise_z: f64,
    /// Tail points where the theory curve is negative; each counts as an infinite dB gap.
    pub negative_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    #[serde(deserialize_with = "nan_if_null")]
    pub burn_in_fraction: f64,
    /// First 1-based iteration counted in the tail.
    pub tail_start_t: usize,
    pub tail_len: usize,
    /// Tail mean of the empirical curve, linear units.
    #[serde(deserialize_with = "nan_if_null")]
    pub empirical_tail_mean: f64,
    /// Monte Carlo standard error of `empirical_tail_mean` (NaN without per-run data).
    #[serde(deserialize_with = "nan_if_null")]
    pub tail_std_err: f64,
    pub paper: ModeDeviation,
    pub exact: ModeDeviation,
}

/// JSON has no NaN or infinity; serde_json writes them as `null`.
fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub msd_mean: Vec<f64>,
    pub msd_mean_db: Vec<f64>,
    /// Per-t standard error of `msd_mean` across runs.
    pub msd_std_err: Vec<f64>,
    /// `runs × iterations` MSD trajectories.
    pub per_run: Vec<Vec<f64>>,
    pub theory_paper: TheoryCurve,
    pub theory_exact: TheoryCurve,
    pub deviation: DeviationStats,
    pub metadata: BTreeMap<String, String>,
    pub sampling_indices: Vec<usize>,
    pub c_w: Vec<f64>,
}

/// Child RNG for run `run_index` of an experiment seeded with `master_seed`.
pub fn run_rng(master_seed: u64, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index as u64 + 1);
    rng
}

/// Both theory curves for a prepared model.
pub fn theory_curves(
    model: &SignalModel,
    algorithm: Algorithm,
    param: f64,
    iterations: usize,
) -> Result<(TheoryCurve, TheoryCurve)> {
    let band = model.band();
    let sampling = model.sampling();
    let c_w = model.noise().c_w();
    match algorithm {
        Algorithm::Lms => {
            let spec = LmsSpectrum::new(band, sampling, model.s_f(), c_w)?;
            Ok((
                lms_paper_from_spectrum(&spec, param, iterations),
                lms_exact_from_spectrum(&spec, param, iterations),
            ))
        }
        Algorithm::Rls => {
            let summary = RlsSummary::new(band, sampling, model.s_f(), c_w)?;
            Ok((
                rls_paper_from_summary(&summary, param, iterations),
                rls_exact_from_summary(&summary, param, iterations),
            ))
        }
    }
}

/// One trajectory: MSD at `t = 1..=iterations`, fresh noise each iteration.
pub fn simulate_run<R: Rng>(
    model: &SignalModel,
    algorithm: Algorithm,
    param: f64,
    iterations: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(iterations);
    let s_f = model.s_f();
    match algorithm {
        Algorithm::Lms => {
            let mut state = LmsState::new(model, param)?;
            for t in 0..iterations {
                out.push((&state.s_hat - s_f).norm_squared());
                if t + 1 < iterations {
                    let w = draw_noise(model.noise(), rng);
                    state.advance(model, &w);
                }
            }
        }
        Algorithm::Rls => {
            let mut state = rls_init(model, param)?;
            for t in 0..iterations {
                out.push((&state.s_hat - s_f).norm_squared());
                if t + 1 < iterations {
                    let w = draw_noise(model.noise(), rng);
                    state.advance(model, &w);
                }
            }
        }
    }
    Ok(out)
}

/// Runs `runs` independent trajectories and averages them in linear units.
///
/// `threads = None` uses the global rayon pool; the result does not depend on it.
pub fn run_monte_carlo(
    model: &SignalModel,
    algorithm: Algorithm,
    param: f64,
    iterations: usize,
    runs: usize,
    master_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    let job = || -> Result<Vec<Vec<f64>>> {
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = run_rng(master_seed, r);
                simulate_run(model, algorithm, param, iterations, &mut rng)
            })
            .collect()
    };
    match threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(job),
    }
}

/// Mean and standard error per iteration, reducing runs in ascending order.
pub fn aggregate(per_run: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let r = per_run.len();
    let t_len = per_run.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; t_len];
    for run in per_run {
        for (m, v) in mean.iter_mut().zip(run) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= r as f64;
    }
    let mut se = vec![f64::NAN; t_len];
    if r > 1 {
        let mut ss = vec![0.0; t_len];
        for run in per_run {
            for ((s, v), m) in ss.iter_mut().zip(run).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for (e, s) in se.iter_mut().zip(ss) {
            *e = (s / (r - 1) as f64 / r as f64).sqrt();
        }
    }
    (mean, se)
}

fn to_db(values: &[f64]) -> Result<Vec<f64>> {
    values.iter().map(|&v| msd_db(v)).collect()
}

fn abs_db_gap(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::INFINITY
    } else if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Index of the first tail sample for `len` iterations and a burn-in fraction.
pub fn tail_start(len: usize, burn_in_fraction: f64) -> usize {
    ((burn_in_fraction * len as f64).floor() as usize).min(len.saturating_sub(1))
}

/// Tail deviation statistics from curves in linear units.
///
/// `per_run` supplies the Monte Carlo spread; without it the standard errors are NaN.
pub fn compare_curves(
    empirical: &[f64],
    paper: &[f64],
    exact: &[f64],
    per_run: Option<&[Vec<f64>]>,
    burn_in_fraction: f64,
) -> Result<DeviationStats> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidParameter(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    let len = empirical.len();
    if paper.len() != len || exact.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: paper.len().min(exact.len()),
        });
    }
    if len == 0 {
        return Err(Error::InvalidParameter("empty curves".into()));
    }
    let start = tail_start(len, burn_in_fraction);
    let tail = start..len;
    let tail_len = len - start;
    let emp_db = to_db(empirical)?;
    let emp_tail_mean = empirical[tail.clone()].iter().sum::<f64>() / tail_len as f64;

    let (tail_se, point_se) = match per_run {
        Some(runs) if runs.len() > 1 => {
            let r = runs.len() as f64;
            let means: Vec<f64> = runs
                .iter()
                .map(|run| run[tail.clone()].iter().sum::<f64>() / tail_len as f64)
                .collect();
            let grand = means.iter().sum::<f64>() / r;
            let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (r - 1.0);
            (
                (var / r).sqrt(),
                aggregate(runs).1,
            )
        }
        _ => (f64::NAN, vec![f64::NAN; len]),
    };

    let mode = |theory: &[f64]| -> Result<ModeDeviation> {
        let th_db: Vec<f64> = theory.iter().map(|&v| theory_db(v)).collect();
        let gaps: Vec<f64> = tail
            .clone()
            .map(|i| abs_db_gap(emp_db[i], th_db[i]))
            .collect();
        let theory_tail_mean = theory[tail.clone()].iter().sum::<f64>() / tail_len as f64;
        let max_pointwise_z = tail
            .clone()
            .map(|i| z_score(empirical[i], theory[i], point_se[i]))
            .fold(0.0, f64::max);
        Ok(ModeDeviation {
            max_abs_db: gaps.iter().copied().fold(0.0, f64::max),
            mean_abs_db: gaps.iter().sum::<f64>() / tail_len as f64,
            theory_tail_mean,
            tail_z: z_score(emp_tail_mean, theory_tail_mean, tail_se),
            max_pointwise_z,
            negative_points: tail.clone().filter(|&i| theory[i] < 0.0).count(),
        })
    };

    Ok(DeviationStats {
        burn_in_fraction,
        tail_start_t: start + 1,
        tail_len,
        empirical_tail_mean: emp_tail_mean,
        tail_std_err: tail_se,
        paper: mode(paper)?,
        exact: mode(exact)?,
    })
}

/// `|a − b| / se`, with agreement to roundoff counting as zero even when `se` is zero.
fn z_score(a: f64, b: f64, se: f64) -> f64 {
    let diff = a - b;
    if diff.abs() <= 1e-12 * a.abs().max(b.abs()) {
        0.0
    } else if se.is_nan() {
        f64::NAN
    } else {
        diff.abs() / se
    }
}

/// Recomputes the deviation summary of a finished run with another burn-in.
pub fn compare(result: &RunResult, burn_in_fraction: f64) -> Result<DeviationStats> {
    compare_curves(
        &result.msd_mean,
        &result.theory_paper.values,
        &result.theory_exact.values,
        Some(&result.per_run),
        burn_in_fraction,
    )
}

/// Full pipeline from station data: graph, basis, band, sampling, noise, runs, theory.
pub fn run_experiment(config: &ExperimentConfig, stations: &StationTable) -> Result<RunResult> {
    config.validate()?;
    let setup = CaseSetup::build(
        stations,
        config.case,
        config.sampling_strategy,
        config.master_seed,
    )?;
    run_with_setup(config, &setup, None)
}

/// Runs the noise/simulation/theory stages on a prepared case.
pub fn run_with_setup(
    config: &ExperimentConfig,
    setup: &CaseSetup,
    threads: Option<usize>,
) -> Result<RunResult> {
    config.validate()?;
    let n = setup.band.n();
    let noise = build_cw(config.n_a, config.n_b, n, config.master_seed)?;
    let model = setup.signal_model(noise)?;

    let mut metadata = config.labels.clone();
    metadata.insert("algorithm".into(), config.algorithm.name().into());
    metadata.insert("param".into(), config.param.to_string());
    metadata.insert("k".into(), config.case.k.to_string());
    metadata.insert("f".into(), config.case.f.to_string());
    metadata.insert("sample_size".into(), config.case.sample_size.to_string());
    metadata.insert("n_a".into(), config.n_a.to_string());
    metadata.insert("n_b".into(), config.n_b.to_string());
    metadata.insert("sampling_strategy".into(), setup.strategy.name().into());
    metadata.insert("lambda_min".into(), setup.lambda_min.to_string());
    metadata.insert("mu_max".into(), setup.mu_max.to_string());
    metadata.insert("edge_weights".into(), "binary".into());
    metadata.insert("shift_operator".into(), "combinatorial-laplacian".into());
    metadata.insert("averaging".into(), "linear".into());
    metadata.insert("noise_abs_a".into(), "true".into());
    if config.algorithm == Algorithm::Lms {
        let stable = config.param < setup.mu_max;
        metadata.insert("stable".into(), stable.to_string());
        if !stable {
            log::warn!(
                "step size {} exceeds the stable range (0, {}); the run will diverge",
                config.param,
                setup.mu_max
            );
        }
    }

    let per_run = run_monte_carlo(
        &model,
        config.algorithm,
        config.param,
        config.iterations,
        config.runs,
        config.master_seed,
        threads,
    )?;
    let (msd_mean, msd_std_err) = aggregate(&per_run);
    let msd_mean_db = to_db(&msd_mean)?;

    let (theory_paper, theory_exact) =
        theory_curves(&model, config.algorithm, config.param, config.iterations)?;
    let theory_paper = label_curve(theory_paper, &metadata);
    let theory_exact = label_curve(theory_exact, &metadata);
    let deviation = compare_curves(
        &msd_mean,
        &theory_paper.values,
        &theory_exact.values,
        Some(&per_run),
        DEFAULT_BURN_IN,
    )?;

    Ok(RunResult {
        msd_mean,
        msd_mean_db,
        msd_std_err,
        per_run,
        theory_paper,
        theory_exact,
        deviation,
        metadata,
        sampling_indices: setup.sampling.indices().to_vec(),
        c_w: model.noise().c_w().to_vec(),
    })
}

fn label_curve(mut curve: TheoryCurve, meta: &BTreeMap<String, String>) -> TheoryCurve {
    for (k, v) in meta {
        curve.metadata.insert(k.clone(), v.clone());
    }
    curve
}

/// Station table with uniform coordinates over a Brazil-sized box and a smooth
/// temperature field built from a few low-frequency spatial harmonics.
pub fn synthetic_stations(n: usize, seed: u64) -> Result<StationTable> {
    if n < 2 {
        return Err(Error::InvalidStations(format!(
            "need at least 2 stations, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lat_lo, lat_hi) = (-33.0, 5.0);
    let (lon_lo, lon_hi) = (-73.0, -35.0);
    let mut coords = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let lat: f64 = rng.random_range(lat_lo..lat_hi);
        let lon: f64 = rng.random_range(lon_lo..lon_hi);
        // normalized position in [-1, 1]²
        let y = 2.0 * (lat - lat_lo) / (lat_hi - lat_lo) - 1.0;
        let x = 2.0 * (lon - lon_lo) / (lon_hi - lon_lo) - 1.0;
        let pi = std::f64::consts::PI;
        let temp = 20.0
            + 6.0 * y
            + 2.5 * (pi * x / 2.0).cos()
            + 1.5 * (pi * (x + y) / 2.0).sin()
            + 0.8 * (pi * x).cos() * (pi * y / 2.0).cos();
        coords.push([lat, lon]);
        values.push(temp);
    }
    let ids = (0..n).map(|i| format!("S{i:04}")).collect();
    StationTable::new(ids, coords, values)
}
