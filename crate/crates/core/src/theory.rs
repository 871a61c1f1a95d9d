//! Transient MSD predictions for the GSP LMS and GSP RLS estimators.
//!
//! Two modes are provided for each algorithm:
//!
//! * [`TheoryMode::PaperLiteral`] evaluates the frozen-noise closed forms term by
//!   term. Those formulas come from unrolling the error recursion with a single
//!   noise vector held fixed across iterations, and keep a cross term linear in
//!   `sqrt(c_w)`. The `diag(sqrt(C_w))` factor inside the cross term is read as
//!   the vector `sqrt(c_w)`, and the squared norm of a matrix in the last term
//!   as a squared Frobenius norm.
//! * [`TheoryMode::ExactExpectation`] propagates the error covariance
//!   `P(t) = E[Δŝ(t) Δŝ(t)ᵀ]` under independent noise at every iteration and
//!   reports `tr P(t)`.
//!
//! LMS powers `A^{t−1}` with `A = I − μ U_Fᵀ D_S U_F` are taken elementwise in
//! the eigenbasis of `U_Fᵀ D_S U_F`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::rls_gain_matrix;
use crate::graph::BandBasis;
use crate::sampling::{SampledGram, SamplingSet, RECOVERABILITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryMode {
    PaperLiteral,
    ExactExpectation,
}

impl TheoryMode {
    pub fn name(self) -> &'static str {
        match self {
            TheoryMode::PaperLiteral => "paper-literal",
            TheoryMode::ExactExpectation => "exact-expectation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lms,
    Rls,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lms => "lms",
            Algorithm::Rls => "rls",
        }
    }
}

/// Predicted MSD (linear units) for `t = 1..=T`; `values[0]` is `t = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCurve {
    pub mode: TheoryMode,
    pub algorithm: Algorithm,
    pub param: f64,
    pub values: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl TheoryCurve {
    fn new(mode: TheoryMode, algorithm: Algorithm, param: f64, values: Vec<f64>) -> Self {
        Self {
            mode,
            algorithm,
            param,
            values,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// dB value of a theory curve point. The literal formulas are not
/// expectations and can dip below zero; such points have no dB value and map
/// to NaN.
pub fn theory_db(value: f64) -> f64 {
    if value > 0.0 {
        10.0 * value.log10()
    } else if value == 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::NAN
    }
}

/// Quantities of the LMS recursion expressed in the eigenbasis `V` of
/// `G = U_Fᵀ D_S U_F`.
#[derive(Debug, Clone)]
pub struct LmsSpectrum {
    /// Eigenvalues `g_i` of `G`, ascending.
    pub g: DVector<f64>,
    /// `Vᵀ s_F`.
    pub s_rot: DVector<f64>,
    /// `Vᵀ U_Fᵀ D_S sqrt(c_w)`.
    pub drive_rot: DVector<f64>,
    /// Diagonal of `Vᵀ U_Fᵀ D_S C_w D_S U_F V`.
    pub q_rot: DVector<f64>,
    /// The rotation `V` itself.
    pub basis: DMatrix<f64>,
}

impl LmsSpectrum {
    pub fn new(
        band: &BandBasis,
        sampling: &SamplingSet,
        s_f: &DVector<f64>,
        c_w: &[f64],
    ) -> Result<Self> {
        check_inputs(band, sampling, s_f, c_w)?;
        let gram = SampledGram::new(band, sampling)?;
        let v = gram.vectors;
        let rows = sampling.sampled_rows(band);
        let c_s: Vec<f64> = sampling.indices().iter().map(|&i| c_w[i]).collect();
        // U_S V, one row per sampled node
        let rows_rot = &rows * &v;
        let sqrt_c = DVector::from_iterator(c_s.len(), c_s.iter().map(|c| c.sqrt()));
        let drive_rot = rows_rot.tr_mul(&sqrt_c);
        let q_rot = DVector::from_iterator(
            v.ncols(),
            rows_rot
                .column_iter()
                .map(|col| col.iter().zip(&c_s).map(|(u, c)| u * u * c).sum()),
        );
        Ok(Self {
            g: gram.eigenvalues,
            s_rot: v.tr_mul(s_f),
            drive_rot,
            q_rot,
            basis: v,
        })
    }

    fn require_recoverable(&self) -> Result<()> {
        if self.g[0] <= RECOVERABILITY_TOL {
            return Err(Error::NotRecoverable {
                lambda_min: self.g[0],
            });
        }
        Ok(())
    }

    /// Spectral radius of `A = I − μ G`.
    pub fn spectral_radius(&self, mu: f64) -> f64 {
        self.g.iter().map(|g| (1.0 - mu * g).abs()).fold(0.0, f64::max)
    }

    /// The three terms (decay, cross, noise) of the literal LMS formula at iteration `t`.
    pub fn paper_terms(&self, mu: f64, t: usize) -> (f64, f64, f64) {
        let exp = (t - 1) as i32;
        let mut decay = 0.0;
        let mut cross = 0.0;
        let mut noise = 0.0;
        for i in 0..self.g.len() {
            let g = self.g[i];
            let p = (1.0 - mu * g).powi(exp);
            let s = self.s_rot[i];
            // G⁻¹(A^{t−1} − I) is diagonal here
            let k = (p - 1.0) / g;
            decay += p * p * s * s;
            cross += 2.0 * p * s * k * self.drive_rot[i];
            noise += k * k * self.q_rot[i];
        }
        (decay, cross, noise)
    }
}

fn check_inputs(
    band: &BandBasis,
    sampling: &SamplingSet,
    s_f: &DVector<f64>,
    c_w: &[f64],
) -> Result<()> {
    if s_f.len() != band.f() {
        return Err(Error::DimensionMismatch {
            expected: band.f(),
            got: s_f.len(),
        });
    }
    for n in [sampling.n(), c_w.len()] {
        if n != band.n() {
            return Err(Error::DimensionMismatch {
                expected: band.n(),
                got: n,
            });
        }
    }
    if let Some(c) = c_w.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::InvalidNoise(format!("variance {c} is not a nonnegative number")));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be finite and nonnegative, got {mu}"
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "forgetting factor must lie in (0, 1], got {lambda}"
        )));
    }
    Ok(())
}

/// Literal closed-form LMS transient MSD.
pub fn lms_theory_paper(
    band: &BandBasis,
    sampling: &SamplingSet,
    s_f: &DVector<f64>,
    c_w: &[f64],
    mu: f64,
    t_max: usize,
) -> Result<TheoryCurve> {
    check_mu(mu)?;
    let spec = LmsSpectrum::new(band, sampling, s_f, c_w)?;
    spec.require_recoverable()?;
    Ok(lms_paper_from_spectrum(&spec, mu, t_max))
}

pub fn lms_paper_from_spectrum(spec: &LmsSpectrum, mu: f64, t_max: usize) -> TheoryCurve {
    let values = (1..=t_max)
        .map(|t| {
            let (a, b, c) = spec.paper_terms(mu, t);
            a + b + c
        })
        .collect();
    TheoryCurve::new(TheoryMode::PaperLiteral, Algorithm::Lms, mu, values)
}

/// Exact `E[MSD(t)]` for LMS with independent noise per iteration:
/// `P(1) = s_F s_Fᵀ`, `P(t+1) = A P(t) Aᵀ + μ² U_Fᵀ D_S C_w D_S U_F`.
pub fn lms_theory_exact(
    band: &BandBasis,
    sampling: &SamplingSet,
    s_f: &DVector<f64>,
    c_w: &[f64],
    mu: f64,
    t_max: usize,
) -> Result<TheoryCurve> {
    check_mu(mu)?;
    let spec = LmsSpectrum::new(band, sampling, s_f, c_w)?;
    spec.require_recoverable()?;
    Ok(lms_exact_from_spectrum(&spec, mu, t_max))
}

pub fn lms_exact_from_spectrum(spec: &LmsSpectrum, mu: f64, t_max: usize) -> TheoryCurve {
    // only the diagonal of VᵀPV enters the trace, and it evolves independently
    let contraction: Vec<f64> = spec.g.iter().map(|g| (1.0 - mu * g).powi(2)).collect();
    let injection: Vec<f64> = spec.q_rot.iter().map(|q| mu * mu * q).collect();
    let mut diag: Vec<f64> = spec.s_rot.iter().map(|s| s * s).collect();
    let mut values = Vec::with_capacity(t_max);
    for t in 0..t_max {
        if t > 0 {
            for i in 0..diag.len() {
                diag[i] = contraction[i] * diag[i] + injection[i];
            }
        }
        values.push(diag.iter().sum());
    }
    TheoryCurve::new(TheoryMode::ExactExpectation, Algorithm::Lms, mu, values)
}

/// `tr M` and the literal cross coefficient `s_Fᵀ M U_Fᵀ D_S C_w⁻¹ sqrt(c_w)` for RLS.
#[derive(Debug, Clone)]
pub struct RlsSummary {
    pub s_norm2: f64,
    pub trace_m: f64,
    pub cross: f64,
    /// `‖M U_Fᵀ D_S C_w⁻¹ diag(sqrt(c_w))‖_F²`, equal to `tr M` up to roundoff.
    pub noise_frobenius: f64,
}

impl RlsSummary {
    pub fn new(
        band: &BandBasis,
        sampling: &SamplingSet,
        s_f: &DVector<f64>,
        c_w: &[f64],
    ) -> Result<Self> {
        check_inputs(band, sampling, s_f, c_w)?;
        let m = rls_gain_matrix(band, sampling, c_w)?;
        let rows = sampling.sampled_rows(band);
        let inv_sqrt: Vec<f64> = sampling
            .indices()
            .iter()
            .map(|&i| 1.0 / c_w[i].sqrt())
            .collect();
        // M U_Sᵀ C_S⁻¹ diag(sqrt c_S) = M U_Sᵀ diag(1/sqrt c_S)
        let mut weighted_t = rows.transpose();
        for (k, &w) in inv_sqrt.iter().enumerate() {
            weighted_t.column_mut(k).scale_mut(w);
        }
        let b = &m * &weighted_t;
        let ones = DVector::from_element(inv_sqrt.len(), 1.0);
        let cross = s_f.dot(&(&b * ones));
        Ok(Self {
            s_norm2: s_f.norm_squared(),
            trace_m: m.trace(),
            cross,
            noise_frobenius: b.norm_squared(),
        })
    }

    pub fn paper_value(&self, lambda: f64, t: usize) -> f64 {
        let p = lambda.powi((t - 1) as i32);
        p * p * self.s_norm2 + 2.0 * (p - 1.0) * p * self.cross + (p - 1.0).powi(2) * self.noise_frobenius
    }
}

/// Literal closed-form RLS transient MSD.
pub fn rls_theory_paper(
    band: &BandBasis,
    sampling: &SamplingSet,
    s_f: &DVector<f64>,
    c_w: &[f64],
    lambda: f64,
    t_max: usize,
) -> Result<TheoryCurve> {
    check_lambda(lambda)?;
    let summary = RlsSummary::new(band, sampling, s_f, c_w)?;
    Ok(rls_paper_from_summary(&summary, lambda, t_max))
}

pub fn rls_paper_from_summary(summary: &RlsSummary, lambda: f64, t_max: usize) -> TheoryCurve {
    let values = (1..=t_max).map(|t| summary.paper_value(lambda, t)).collect();
    TheoryCurve::new(TheoryMode::PaperLiteral, Algorithm::Rls, lambda, values)
}

/// Exact `E[MSD(t)]` for RLS: `tr P(t)` with `P(t+1) = λ² P(t) + (1−λ)² M`.
pub fn rls_theory_exact(
    band: &BandBasis,
    sampling: &SamplingSet,
    s_f: &DVector<f64>,
    c_w: &[f64],
    lambda: f64,
    t_max: usize,
) -> Result<TheoryCurve> {
    check_lambda(lambda)?;
    let summary = RlsSummary::new(band, sampling, s_f, c_w)?;
    Ok(rls_exact_from_summary(&summary, lambda, t_max))
}

pub fn rls_exact_from_summary(summary: &RlsSummary, lambda: f64, t_max: usize) -> TheoryCurve {
    let injection = (1.0 - lambda).powi(2) * summary.trace_m;
    let l2 = lambda * lambda;
    let mut v = summary.s_norm2;
    let mut values = Vec::with_capacity(t_max);
    for t in 0..t_max {
        if t > 0 {
            v = l2 * v + injection;
        }
        values.push(v);
    }
    TheoryCurve::new(TheoryMode::ExactExpectation, Algorithm::Rls, lambda, values)
}

/// `λ^{2t−2}‖s_F‖² + (1−λ)²(1−λ^{2t−2})/(1−λ²)·tr M`, valid for `λ < 1`.
pub fn rls_exact_closed_form(lambda: f64, t: usize, s_norm2: f64, trace_m: f64) -> f64 {
    let p2 = lambda.powi(2 * (t as i32 - 1));
    p2 * s_norm2 + (1.0 - lambda).powi(2) * (1.0 - p2) / (1.0 - lambda * lambda) * trace_m
}

/// Solves `P = A P Aᵀ + Q` by doubled fixed-point iteration (Smith's method).
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    let mut ak = a.clone();
    for _ in 0..128 {
        let inc = &ak * &p * ak.transpose();
        let inc_norm = inc.norm();
        p += inc;
        let p_norm = p.norm();
        if inc_norm <= 1e-16 * p_norm || p_norm == 0.0 {
            return Ok((&p + p.transpose()) * 0.5);
        }
        if !p_norm.is_finite() {
            break;
        }
        ak = &ak * &ak;
    }
    Err(Error::InvalidParameter(
        "Lyapunov iteration did not converge".into(),
    ))
}

/// `(A, Q)` of the LMS covariance recursion with `Q = μ² U_Fᵀ D_S C_w D_S U_F`.
pub fn lms_covariance_operators(
    band: &BandBasis,
    sampling: &SamplingSet,
    c_w: &[f64],
    mu: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let g = sampling.gram(band);
    let f = band.f();
    let a = DMatrix::identity(f, f) - g * mu;
    let rows = sampling.sampled_rows(band);
    let c_s: Vec<f64> = sampling.indices().iter().map(|&i| c_w[i]).collect();
    let q = crate::linalg::weighted_gram(&rows, &c_s) * (mu * mu);
    (a, q)
}

/// Limit of the LMS MSD curve as `t → ∞`.
///
/// Paper-literal: `tr((U_FᵀD_SU_F)⁻¹ U_FᵀD_S C_w D_SU_F (U_FᵀD_SU_F)⁻¹)`.
/// Exact: `tr P∞` with `P∞ = A P∞ Aᵀ + μ² U_FᵀD_S C_w D_SU_F`.
pub fn lms_steady_state(
    band: &BandBasis,
    sampling: &SamplingSet,
    c_w: &[f64],
    mu: f64,
    mode: TheoryMode,
) -> Result<f64> {
    check_mu(mu)?;
    let zero = DVector::zeros(band.f());
    let spec = LmsSpectrum::new(band, sampling, &zero, c_w)?;
    spec.require_recoverable()?;
    let radius = spec.spectral_radius(mu);
    if radius >= 1.0 {
        return Err(Error::UnstableStep { mu, radius });
    }
    match mode {
        TheoryMode::PaperLiteral => Ok(spec
            .g
            .iter()
            .zip(spec.q_rot.iter())
            .map(|(g, q)| q / (g * g))
            .sum()),
        TheoryMode::ExactExpectation => {
            let (a, q) = lms_covariance_operators(band, sampling, c_w, mu);
            Ok(discrete_lyapunov(&a, &q)?.trace())
        }
    }
}

/// Limit of the RLS MSD curve: `tr M` (paper-literal) or `(1−λ)/(1+λ)·tr M` (exact).
pub fn rls_steady_state(
    band: &BandBasis,
    sampling: &SamplingSet,
    c_w: &[f64],
    lambda: f64,
    mode: TheoryMode,
) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda >= 1.0 {
        return Err(Error::InvalidParameter(
            "forgetting factor 1 has no steady state (the estimate never moves)".into(),
        ));
    }
    let trace_m = rls_gain_matrix(band, sampling, c_w)?.trace();
    Ok(match mode {
        TheoryMode::PaperLiteral => trace_m,
        TheoryMode::ExactExpectation => (1.0 - lambda) / (1.0 + lambda) * trace_m,
    })
}
