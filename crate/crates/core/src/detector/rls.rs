use nalgebra::{DMatrix, DVector};

use super::{ArxConfig, DetectorError};

/// Exponentially weighted recursive least squares over an ARX coefficient
/// vector `[a_1..a_na, b_0..b_{nb-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsEstimator {
    config: ArxConfig,
    theta: DVector<f64>,
    cov: DMatrix<f64>,
    forgetting: f64,
    samples_seen: u64,
}

impl RlsEstimator {
    /// Zero coefficients and a diffuse `cov_init · I` prior.
    pub fn new(config: ArxConfig, forgetting: f64, cov_init: f64) -> Result<Self, DetectorError> {
        config.validate()?;
        if !(cov_init.is_finite() && cov_init > 0.0) {
            return Err(DetectorError::InvalidParameter(format!("cov_init must be positive, got {cov_init}")));
        }
        let n = config.order();
        Self::with_state(config, DVector::zeros(n), DMatrix::identity(n, n) * cov_init, forgetting)
    }

    pub fn with_state(
        config: ArxConfig,
        theta: DVector<f64>,
        cov: DMatrix<f64>,
        forgetting: f64,
    ) -> Result<Self, DetectorError> {
        config.validate()?;
        let n = config.order();
        if theta.len() != n {
            return Err(DetectorError::Dimension { expected: n, got: theta.len() });
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(DetectorError::Dimension { expected: n, got: cov.nrows() });
        }
        if !(forgetting > 0.0 && forgetting <= 1.0) {
            return Err(DetectorError::InvalidParameter(format!("forgetting factor must lie in (0, 1], got {forgetting}")));
        }
        Ok(Self { config, theta, cov, forgetting, samples_seen: 0 })
    }

    pub fn config(&self) -> ArxConfig {
        self.config
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn forgetting(&self) -> f64 {
        self.forgetting
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    fn check_dim(&self, phi: &DVector<f64>) -> Result<(), DetectorError> {
        if phi.len() != self.theta.len() {
            return Err(DetectorError::Dimension { expected: self.theta.len(), got: phi.len() });
        }
        Ok(())
    }

    /// One-step-ahead prediction `φᵀθ`.
    pub fn predict(&self, phi: &DVector<f64>) -> Result<f64, DetectorError> {
        self.check_dim(phi)?;
        Ok(phi.dot(&self.theta))
    }

    /// Absorb one observation and return the prior residual `y - φᵀθ`.
    ///
    /// Non-finite inputs leave the estimator untouched.
    pub fn update(&mut self, phi: &DVector<f64>, y: f64) -> Result<f64, DetectorError> {
        self.check_dim(phi)?;
        if !y.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(DetectorError::NonFinite);
        }
        let residual = y - phi.dot(&self.theta);
        let p_phi = &self.cov * phi;
        let denom = self.forgetting + phi.dot(&p_phi);
        let gain = &p_phi / denom;

        self.theta.axpy(residual, &gain, 1.0);
        // cov ← (cov − k·(cov·φ)ᵀ) / λ, using symmetry of cov.
        self.cov.ger(-1.0, &gain, &p_phi, 1.0);
        self.cov /= self.forgetting;
        let n = self.cov.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.cov[(i, j)] + self.cov[(j, i)]);
                self.cov[(i, j)] = avg;
                self.cov[(j, i)] = avg;
            }
        }
        self.samples_seen += 1;
        Ok(residual)
    }
}
