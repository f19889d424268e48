use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DmfcGpm;
use crate::geometry::Disp3;
use crate::{Error, Result};

/// Observed values at one domain point. Unobserved channels are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointObservation {
    pub point: usize,
    #[serde(default)]
    pub shape: Option<Disp3>,
    #[serde(default)]
    pub pose: Option<Disp3>,
    #[serde(default)]
    pub intensity: Option<f64>,
}

impl PointObservation {
    pub fn shape(point: usize, value: Disp3) -> Self {
        Self {
            point,
            shape: Some(value),
            pose: None,
            intensity: None,
        }
    }
}

impl DmfcGpm {
    /// Flat row indices and values of a set of observations.
    pub fn observation_rows(&self, obs: &[PointObservation]) -> Result<(Vec<usize>, Vec<f64>)> {
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for o in obs {
            if o.point >= self.layout.n_points {
                return Err(Error::IndexOutOfRange {
                    what: "observed point",
                    index: o.point,
                    len: self.layout.n_points,
                });
            }
            let e = self.layout.point_entries(o.point);
            if let Some(s) = o.shape {
                rows.extend(e.shape);
                values.extend(s.iter());
            }
            if let Some(p) = o.pose {
                let idx = e.pose.ok_or_else(|| {
                    Error::InvalidArgument("pose observations need a per-point pose coding".into())
                })?;
                rows.extend(idx);
                values.extend(p.iter());
            }
            if let Some(i) = o.intensity {
                rows.push(e.intensity);
                values.push(i);
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observations"));
        }
        Ok((rows, values))
    }

    /// GP posterior given point observations with noise variance `sigma2`.
    ///
    /// With `Φ̃ = Φ diag(√λ)` the posterior over the latent coordinates is
    /// Gaussian with covariance `(I + Φ̃_Oᵀ Φ̃_O / σ²)⁻¹`; everything is solved
    /// in the `M × M` (or, for `σ² = 0`, `k × k`) system.
    pub fn posterior(&self, obs: &[PointObservation], sigma2: f64) -> Result<DmfcGpm> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be non-negative and finite, got {sigma2}"
            )));
        }
        let (rows, values) = self.observation_rows(obs)?;
        if rows.is_empty() {
            return Ok(self.clone());
        }
        let scaled = self.scaled_basis();
        let m = scaled.ncols();
        let b = scaled.select_rows(&rows);
        let resid = DVector::from_vec(values) - self.mean.select_rows(&rows);
        let (shift, cov) = if sigma2 > 0.0 {
            let a = DMatrix::identity(m, m) + b.transpose() * &b / sigma2;
            let chol = a
                .cholesky()
                .ok_or(Error::Singular("posterior precision"))?;
            let cov = chol.inverse();
            let shift = &cov * (b.transpose() * &resid) / sigma2;
            (shift, cov)
        } else {
            let k = &b * b.transpose();
            let chol = k
                .cholesky()
                .ok_or(Error::Singular("noise-free observations are rank deficient"))?;
            let shift = b.transpose() * chol.solve(&resid);
            let cov = DMatrix::identity(m, m) - b.transpose() * chol.solve(&b);
            (shift, cov)
        };
        let mean = &self.mean + &scaled * shift;
        let factor = psd_factor(&cov);
        Ok(self.with_covariance(
            self.reference.clone(),
            self.layout,
            mean,
            scaled * factor,
        ))
    }
}

/// `L` with `L Lᵀ = cov` for a symmetric positive semi-definite matrix.
fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut l = eig.eigenvectors;
    for (c, e) in eig.eigenvalues.iter().enumerate() {
        l.column_mut(c).scale_mut(e.max(0.0).sqrt());
    }
    l
}
