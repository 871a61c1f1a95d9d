//! Sampling sets `S`, the induced operator `D_S`, recoverability checks and
//! sampling-set design.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BandBasis;
use crate::linalg;

/// `lambda_min` at or below this counts as rank deficient.
pub const RECOVERABILITY_TOL: f64 = 1e-8;

/// Maximum draws attempted by [`random_sampling`].
pub const RANDOM_SAMPLING_ATTEMPTS: usize = 100;

/// ChaCha stream reserved for random sampling-set draws.
const SAMPLING_STREAM: u64 = u64::MAX - 1;

/// Sorted, duplicate-free subset of `{0..n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingSet {
    indices: Vec<usize>,
    n: usize,
}

impl SamplingSet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        let before = indices.len();
        indices.dedup();
        if indices.len() != before {
            return Err(Error::InvalidParameter(
                "sampling set contains duplicate indices".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::IndexOutOfRange { index: last, n });
            }
        }
        Ok(Self { indices, n })
    }

    pub fn all(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            n,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            indices: Vec::new(),
            n,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Diagonal of `D_S` as 0/1 weights.
    pub fn mask(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for &i in &self.indices {
            m[i] = 1.0;
        }
        m
    }

    /// `D_S x`, computed without forming the matrix.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = DVector::zeros(self.n);
        for &i in &self.indices {
            out[i] = x[i];
        }
        Ok(out)
    }

    /// Rows of `U_F` at the sampled nodes (`|S| × F`).
    pub fn sampled_rows(&self, band: &BandBasis) -> DMatrix<f64> {
        band.u_f().select_rows(self.indices.iter())
    }

    /// `U_Fᵀ D_S U_F`.
    pub fn gram(&self, band: &BandBasis) -> DMatrix<f64> {
        let rows = self.sampled_rows(band);
        let g = rows.tr_mul(&rows);
        (&g + g.transpose()) * 0.5
    }

    fn check_dims(&self, band: &BandBasis) -> Result<()> {
        if band.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: band.n(),
                got: self.n,
            });
        }
        Ok(())
    }
}

/// `D_S x` as a free function.
pub fn apply_sampling(s: &SamplingSet, x: &DVector<f64>) -> Result<DVector<f64>> {
    s.apply(x)
}

/// Eigendecomposition of `U_Fᵀ D_S U_F`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SampledGram {
    pub eigenvalues: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SampledGram {
    pub fn new(band: &BandBasis, s: &SamplingSet) -> Result<Self> {
        s.check_dims(band)?;
        let (eigenvalues, vectors) = linalg::sym_eigen(&s.gram(band))?;
        Ok(Self {
            eigenvalues,
            vectors,
        })
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Spectral radius of `I − μ U_Fᵀ D_S U_F`.
    pub fn lms_spectral_radius(&self, mu: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|g| (1.0 - mu * g).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recoverability {
    pub ok: bool,
    pub lambda_min: f64,
}

pub fn check_recoverability(band: &BandBasis, s: &SamplingSet) -> Result<Recoverability> {
    let gram = SampledGram::new(band, s)?;
    let lambda_min = gram.lambda_min();
    Ok(Recoverability {
        ok: lambda_min > RECOVERABILITY_TOL,
        lambda_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRange {
    pub mu_min: f64,
    pub mu_max: f64,
}

/// Open interval `(0, 2/λ_max)` of LMS step sizes for which `I − μU_FᵀD_SU_F`
/// is a strict contraction.
pub fn stable_step_range(band: &BandBasis, s: &SamplingSet) -> Result<StepRange> {
    let gram = SampledGram::new(band, s)?;
    if gram.lambda_min() <= RECOVERABILITY_TOL {
        return Err(Error::NotRecoverable {
            lambda_min: gram.lambda_min(),
        });
    }
    Ok(StepRange {
        mu_min: 0.0,
        mu_max: 2.0 / gram.lambda_max(),
    })
}

fn check_target_size(band: &BandBasis, m: usize) -> Result<()> {
    if m < band.f() || m > band.n() {
        return Err(Error::SampleSizeOutOfRange {
            m,
            min: band.f(),
            max: band.n(),
        });
    }
    Ok(())
}

/// Greedy design that grows `S` one node at a time, each step keeping the
/// candidate that maximizes the smallest eigenvalue of `U_Fᵀ D_S U_F`.
///
/// While `|S| < F` that matrix is singular for every candidate, so the score
/// used is the smallest eigenvalue of `U_S U_Sᵀ` (the smallest non-trivial
/// eigenvalue). Ties go to the lower node index.
///
/// Candidate scores come from the secular equation of a bordered or rank-one
/// updated matrix, so each step needs one eigendecomposition of the current
/// set plus `O(k)` root finding per candidate.
pub fn greedy_max_lambda_min(band: &BandBasis, m: usize) -> Result<SamplingSet> {
    check_target_size(band, m)?;
    let n = band.n();
    let f = band.f();
    let u = band.u_f();
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut in_set = vec![false; n];

    while chosen.len() < m {
        let s = chosen.len();
        let candidates: Vec<usize> = (0..n).filter(|&i| !in_set[i]).collect();
        let cand_rows = u.select_rows(candidates.iter());
        let scores: Vec<f64> = if s == 0 {
            cand_rows.row_iter().map(|r| r.norm_squared()).collect()
        } else if s < f {
            // bordered growth of U_S U_Sᵀ
            let rows = u.select_rows(chosen.iter());
            let core = {
                let k = &rows * rows.transpose();
                (&k + k.transpose()) * 0.5
            };
            let (d, v) = linalg::sym_eigen(&core)?;
            let cross = &rows * cand_rows.transpose();
            let z = v.tr_mul(&cross);
            (0..candidates.len())
                .map(|c| {
                    let alpha = cand_rows.row(c).norm_squared();
                    bordered_min_eigenvalue(d.as_slice(), z.column(c).as_slice(), alpha)
                })
                .collect()
        } else {
            // rank-one update of U_Sᵀ U_S
            let rows = u.select_rows(chosen.iter());
            let g = {
                let g = rows.tr_mul(&rows);
                (&g + g.transpose()) * 0.5
            };
            let (d, v) = linalg::sym_eigen(&g)?;
            let z = v.tr_mul(&cand_rows.transpose());
            (0..candidates.len())
                .map(|c| rank_one_min_eigenvalue(d.as_slice(), z.column(c).as_slice()))
                .collect()
        };

        let mut best = 0usize;
        for (c, &score) in scores.iter().enumerate() {
            if score > scores[best] {
                best = c;
            }
        }
        let pick = candidates[best];
        in_set[pick] = true;
        chosen.push(pick);
    }
    SamplingSet::new(chosen, n)
}

/// Smallest eigenvalue of `[[diag(d), z], [zᵀ, alpha]]` for `d` ascending and
/// a PSD result. Bisection on the secular function, which is decreasing below `d[0]`.
pub(crate) fn bordered_min_eigenvalue(d: &[f64], z: &[f64], alpha: f64) -> f64 {
    let secular = |x: f64| -> f64 {
        let mut acc = alpha - x;
        for (&di, &zi) in d.iter().zip(z) {
            let gap = di - x;
            let z2 = zi * zi;
            if gap <= 0.0 {
                if z2 > 0.0 {
                    return f64::NEG_INFINITY;
                }
                continue;
            }
            acc -= z2 / gap;
        }
        acc
    };
    let top = d[0].min(alpha);
    if top <= 0.0 || secular(0.0) <= 0.0 {
        return 0.0;
    }
    bisect(0.0, top, |x| secular(x) > 0.0)
}

/// Smallest eigenvalue of `diag(d) + z zᵀ` for `d` ascending.
pub(crate) fn rank_one_min_eigenvalue(d: &[f64], z: &[f64]) -> f64 {
    let z_norm2: f64 = z.iter().map(|v| v * v).sum();
    let lo = d[0];
    let mut hi = lo + z_norm2;
    if d.len() > 1 {
        hi = hi.min(d[1]);
    }
    if hi <= lo {
        return lo;
    }
    // 1 + Σ z²/(d − x) is increasing on (d[0], d[1])
    let secular = |x: f64| -> f64 {
        let mut acc = 1.0;
        for (&di, &zi) in d.iter().zip(z) {
            let gap = di - x;
            let z2 = zi * zi;
            if gap == 0.0 {
                if z2 > 0.0 {
                    return if di <= lo { f64::NEG_INFINITY } else { f64::INFINITY };
                }
                continue;
            }
            acc += z2 / gap;
        }
        acc
    };
    bisect(lo, hi, |x| secular(x) < 0.0)
}

/// Finds the boundary of `below` on `[lo, hi]`, where `below(x)` holds for x
/// left of the root.
fn bisect(mut lo: f64, mut hi: f64, below: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Uniform random `m`-subset, redrawn until recoverable. Deterministic given `seed`.
pub fn random_sampling(band: &BandBasis, m: usize, seed: u64) -> Result<SamplingSet> {
    check_target_size(band, m)?;
    let n = band.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLING_STREAM);
    for _ in 0..RANDOM_SAMPLING_ATTEMPTS {
        let picked = rand::seq::index::sample(&mut rng, n, m).into_vec();
        let set = SamplingSet::new(picked, n)?;
        if check_recoverability(band, &set)?.ok {
            return Ok(set);
        }
    }
    Err(Error::RandomSamplingFailed {
        m,
        attempts: RANDOM_SAMPLING_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_min_eig(m: &DMatrix<f64>) -> f64 {
        linalg::sym_eigenvalues(m).unwrap()[0]
    }

    #[test]
    fn apply_definition() {
        let s = SamplingSet::new(vec![2, 0], 4).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.apply(&x).unwrap().as_slice(), &[1.0, 0.0, 3.0, 0.0]);
        assert_eq!(SamplingSet::all(4).apply(&x).unwrap(), x);
        assert_eq!(SamplingSet::empty(4).apply(&x).unwrap(), DVector::zeros(4));
        assert!(s.apply(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn set_validation() {
        assert!(SamplingSet::new(vec![1, 1], 3).is_err());
        assert!(matches!(
            SamplingSet::new(vec![3], 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn bordered_matches_dense() {
        let d = [0.3, 0.7, 2.0];
        let z = [0.2, -0.5, 0.1];
        let alpha = 0.9;
        let mut full = DMatrix::zeros(4, 4);
        for i in 0..3 {
            full[(i, i)] = d[i];
            full[(i, 3)] = z[i];
            full[(3, i)] = z[i];
        }
        full[(3, 3)] = alpha;
        let got = bordered_min_eigenvalue(&d, &z, alpha);
        assert!((got - brute_min_eig(&full)).abs() < 1e-12, "{got}");
    }

    #[test]
    fn rank_one_matches_dense() {
        let d = [0.1, 0.4, 0.9];
        let z = [0.3, 0.2, -0.6];
        let mut full = DMatrix::from_diagonal(&DVector::from_column_slice(&d));
        let zv = DVector::from_column_slice(&z);
        full += &zv * zv.transpose();
        let got = rank_one_min_eigenvalue(&d, &z);
        assert!((got - brute_min_eig(&full)).abs() < 1e-12, "{got}");
        // zero weight on the smallest direction keeps it
        assert!((rank_one_min_eigenvalue(&d, &[0.0, 0.5, 0.5]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn greedy_trivial_cases() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let band = BandBasis::from_matrix(u).unwrap();
        assert_eq!(greedy_max_lambda_min(&band, 1).unwrap().indices(), &[0]);
        assert_eq!(greedy_max_lambda_min(&band, 3).unwrap().indices(), &[0, 1, 2]);
        assert!(matches!(
            greedy_max_lambda_min(&band, 0),
            Err(Error::SampleSizeOutOfRange { .. })
        ));
    }

    #[test]
    fn full_set_recoverable_with_unit_lambda() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let band = BandBasis::from_matrix(u).unwrap();
        let r = check_recoverability(&band, &SamplingSet::all(3)).unwrap();
        assert!(r.ok);
        assert!((r.lambda_min - 1.0).abs() < 1e-15);
        let r = check_recoverability(&band, &SamplingSet::new(vec![1, 2], 3).unwrap()).unwrap();
        assert!(!r.ok);
        assert!(stable_step_range(&band, &SamplingSet::new(vec![1], 3).unwrap()).is_err());
        let range = stable_step_range(&band, &SamplingSet::all(3)).unwrap();
        assert!((range.mu_max - 2.0).abs() < 1e-14);
    }
}
