//! GSP LMS and GSP RLS estimators of a bandlimited graph signal.
//!
//! Both estimators keep the frequency-domain estimate `ŝ_F(t)` and start from
//! `ŝ_F(1) = 0`. The node-domain estimate is `U_F ŝ_F(t)`.
//!
//! ```text
//! e(t)        = D_S (x_o + w(t) − U_F ŝ_F(t))
//! LMS: ŝ(t+1) = ŝ(t) + μ U_Fᵀ e(t)
//! RLS: ŝ(t+1) = ŝ(t) + (1−λ) M U_Fᵀ D_S C_w⁻¹ e(t),   M = (U_Fᵀ D_S C_w⁻¹ D_S U_F)⁻¹
//! ```

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{project_bandlimited, BandBasis};
use crate::noise::NoiseModel;
use crate::sampling::{check_recoverability, SamplingSet};

/// Forgetting factors below this are accepted with a warning.
pub const LAMBDA_WARN_BELOW: f64 = 0.5;

/// Everything fixed for the lifetime of an experiment.
#[derive(Debug, Clone)]
pub struct SignalModel {
    band: BandBasis,
    s_f: DVector<f64>,
    x_o: DVector<f64>,
    sampling: SamplingSet,
    noise: NoiseModel,
    sampled_rows: DMatrix<f64>,
}

impl SignalModel {
    pub fn new(
        band: BandBasis,
        s_f: DVector<f64>,
        sampling: SamplingSet,
        noise: NoiseModel,
    ) -> Result<Self> {
        if s_f.len() != band.f() {
            return Err(Error::DimensionMismatch {
                expected: band.f(),
                got: s_f.len(),
            });
        }
        for n in [sampling.n(), noise.n()] {
            if n != band.n() {
                return Err(Error::DimensionMismatch {
                    expected: band.n(),
                    got: n,
                });
            }
        }
        let x_o = band.synthesize(&s_f);
        let sampled_rows = sampling.sampled_rows(&band);
        Ok(Self {
            band,
            s_f,
            x_o,
            sampling,
            noise,
            sampled_rows,
        })
    }

    /// Projects a raw node signal onto the band and uses the projection as truth.
    pub fn from_signal(
        band: BandBasis,
        x: &DVector<f64>,
        sampling: SamplingSet,
        noise: NoiseModel,
    ) -> Result<Self> {
        let (s_f, _) = project_bandlimited(&band, x)?;
        Self::new(band, s_f, sampling, noise)
    }

    pub fn band(&self) -> &BandBasis {
        &self.band
    }

    pub fn s_f(&self) -> &DVector<f64> {
        &self.s_f
    }

    pub fn x_o(&self) -> &DVector<f64> {
        &self.x_o
    }

    pub fn sampling(&self) -> &SamplingSet {
        &self.sampling
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// `U_F` restricted to the sampled rows.
    pub fn sampled_rows(&self) -> &DMatrix<f64> {
        &self.sampled_rows
    }

    /// Sampled entries of `x_o + w − U_F ŝ`, i.e. the nonzero part of `e(t)`.
    pub(crate) fn sampled_residual(&self, s_hat: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut r = -(&self.sampled_rows * s_hat);
        for (k, &i) in self.sampling.indices().iter().enumerate() {
            r[k] += self.x_o[i] + w[i];
        }
        r
    }

    fn check_signal(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.band.n() {
            return Err(Error::DimensionMismatch {
                expected: self.band.n(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_spectrum(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.band.f() {
            return Err(Error::DimensionMismatch {
                expected: self.band.f(),
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// `e = D_S (x_o + w − U_F ŝ)`.
pub fn error_signal(
    model: &SignalModel,
    s_hat: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.check_spectrum(s_hat)?;
    model.check_signal(w)?;
    let r = model.sampled_residual(s_hat, w);
    let mut e = DVector::zeros(model.band.n());
    for (k, &i) in model.sampling.indices().iter().enumerate() {
        e[i] = r[k];
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmsState {
    pub s_hat: DVector<f64>,
    pub mu: f64,
    pub t: usize,
}

impl LmsState {
    pub fn new(model: &SignalModel, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LMS step size must be positive, got {mu}"
            )));
        }
        Ok(Self {
            s_hat: DVector::zeros(model.band.f()),
            mu,
            t: 1,
        })
    }

    /// In-place update; `w` must already be validated.
    pub(crate) fn advance(&mut self, model: &SignalModel, w: &DVector<f64>) {
        let r = model.sampled_residual(&self.s_hat, w);
        self.s_hat
            .gemv_tr(self.mu, &model.sampled_rows, &r, 1.0);
        self.t += 1;
    }
}

/// One LMS iteration: `ŝ ← ŝ + μ U_Fᵀ e`.
pub fn lms_step(state: &LmsState, model: &SignalModel, w: &DVector<f64>) -> Result<LmsState> {
    model.check_spectrum(&state.s_hat)?;
    model.check_signal(w)?;
    let mut next = state.clone();
    next.advance(model, w);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub s_hat: DVector<f64>,
    pub lambda: f64,
    pub m_mat: DMatrix<f64>,
    pub t: usize,
    /// `M U_Sᵀ C_S⁻¹`, the gain applied to the sampled residual.
    gain: DMatrix<f64>,
}

/// `M = (U_Fᵀ D_S C_w⁻¹ D_S U_F)⁻¹`.
pub fn rls_gain_matrix(band: &BandBasis, sampling: &SamplingSet, c_w: &[f64]) -> Result<DMatrix<f64>> {
    Ok(rls_factors(band, sampling, c_w)?.0)
}

/// `M` together with `M U_Sᵀ C_S⁻¹`, both obtained from one Cholesky factorization.
fn rls_factors(
    band: &BandBasis,
    sampling: &SamplingSet,
    c_w: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if c_w.len() != band.n() || sampling.n() != band.n() {
        return Err(Error::DimensionMismatch {
            expected: band.n(),
            got: c_w.len().min(sampling.n()),
        });
    }
    if !c_w.iter().all(|&c| c > 0.0) {
        return Err(Error::InvalidNoise(
            "RLS needs every noise variance > 0 to form C_w⁻¹".into(),
        ));
    }
    let rec = check_recoverability(band, sampling)?;
    if !rec.ok {
        return Err(Error::NotRecoverable {
            lambda_min: rec.lambda_min,
        });
    }
    let rows = sampling.sampled_rows(band);
    // U_Sᵀ C_S⁻¹
    let mut weighted_t = rows.transpose();
    for (k, &i) in sampling.indices().iter().enumerate() {
        weighted_t.column_mut(k).scale_mut(1.0 / c_w[i]);
    }
    let info = &weighted_t * &rows;
    let info = (&info + info.transpose()) * 0.5;
    let not_recoverable = Error::NotRecoverable {
        lambda_min: rec.lambda_min,
    };
    let chol = Cholesky::new(info).ok_or(not_recoverable)?;
    let gain = chol.solve(&weighted_t);
    let m_mat = chol.inverse();
    let m_mat = (&m_mat + m_mat.transpose()) * 0.5;
    if Cholesky::new(m_mat.clone()).is_none() {
        return Err(Error::NotRecoverable {
            lambda_min: rec.lambda_min,
        });
    }
    Ok((m_mat, gain))
}

/// Builds `M` and a zero initial estimate.
pub fn rls_init(model: &SignalModel, lambda: f64) -> Result<RlsState> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "forgetting factor must lie in (0, 1], got {lambda}"
        )));
    }
    if lambda < LAMBDA_WARN_BELOW {
        log::warn!("forgetting factor {lambda} is well below 1");
    }
    let (m_mat, gain) = rls_factors(&model.band, &model.sampling, model.noise.c_w())?;
    Ok(RlsState {
        s_hat: DVector::zeros(model.band.f()),
        lambda,
        m_mat,
        t: 1,
        gain,
    })
}

impl RlsState {
    pub(crate) fn advance(&mut self, model: &SignalModel, w: &DVector<f64>) {
        let r = model.sampled_residual(&self.s_hat, w);
        self.s_hat.gemv(1.0 - self.lambda, &self.gain, &r, 1.0);
        self.t += 1;
    }
}

/// One RLS iteration: `ŝ ← ŝ + (1−λ) M U_Fᵀ D_S C_w⁻¹ e`.
pub fn rls_step(state: &RlsState, model: &SignalModel, w: &DVector<f64>) -> Result<RlsState> {
    model.check_spectrum(&state.s_hat)?;
    model.check_signal(w)?;
    if state.gain.ncols() != model.sampling.len() {
        return Err(Error::DimensionMismatch {
            expected: model.sampling.len(),
            got: state.gain.ncols(),
        });
    }
    let mut next = state.clone();
    next.advance(model, w);
    Ok(next)
}

/// `‖U_F ŝ − x_o‖²`, evaluated in the node domain.
pub fn msd(model: &SignalModel, s_hat: &DVector<f64>) -> f64 {
    (model.band.synthesize(s_hat) - &model.x_o).norm_squared()
}

/// `‖ŝ − s_F‖²`, the frequency-domain form of [`msd`].
pub fn msd_spectral(model: &SignalModel, s_hat: &DVector<f64>) -> f64 {
    (s_hat - &model.s_f).norm_squared()
}

/// `10·log10(value)`; exact zero maps to `-inf`.
pub fn msd_db(value: f64) -> Result<f64> {
    if value == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if value.is_nan() || value <= 0.0 {
        return Err(Error::NonPositiveMsd(value));
    }
    Ok(10.0 * value.log10())
}
