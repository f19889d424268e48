use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DmfcGpm;
use crate::geometry::PoseLayout;
use crate::{Error, Result};

/// Feature classes a model can be marginalised onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureClass {
    Shape,
    Pose,
    Intensity,
}

impl std::str::FromStr for FeatureClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shape" => Ok(FeatureClass::Shape),
            "pose" => Ok(FeatureClass::Pose),
            "intensity" => Ok(FeatureClass::Intensity),
            other => Err(Error::InvalidArgument(format!("unknown feature class {other}"))),
        }
    }
}

impl DmfcGpm {
    /// The model restricted to the domain ids `subset` (global ids).
    ///
    /// Tets and triangles survive only when all their vertices are kept.
    /// Under SR coding the pose parameters of every object with at least one
    /// kept point are retained.
    pub fn marginalize_domain(&self, subset: &[usize]) -> Result<DmfcGpm> {
        let (reference, kept, kept_objects) = self.reference.restrict(subset)?;
        let layout = self.coding.layout(&reference);
        let rows = self.domain_rows(&kept, &kept_objects);
        debug_assert_eq!(rows.len(), layout.dim());
        let mean = self.mean.select_rows(&rows);
        let scaled = self.scaled_basis().select_rows(&rows);
        Ok(self.with_covariance(reference, layout, mean, scaled))
    }

    /// The model with every channel outside `classes` fixed at zero.
    pub fn marginalize_class(&self, classes: &[FeatureClass]) -> Result<DmfcGpm> {
        if classes.is_empty() {
            return Err(Error::Empty("feature class subset"));
        }
        let mut excluded = Vec::new();
        if !classes.contains(&FeatureClass::Shape) {
            excluded.push(self.layout.shape_range());
        }
        if !classes.contains(&FeatureClass::Pose) {
            excluded.push(self.layout.pose_range());
        }
        if !classes.contains(&FeatureClass::Intensity) {
            excluded.push(self.layout.intensity_range());
        }
        if excluded.is_empty() {
            return Ok(self.clone());
        }
        let mut mean: DVector<f64> = self.mean.clone();
        let mut scaled: DMatrix<f64> = self.scaled_basis();
        for range in excluded {
            for k in range {
                mean[k] = 0.0;
                scaled.row_mut(k).fill(0.0);
            }
        }
        Ok(self.with_covariance(self.reference.clone(), self.layout, mean, scaled))
    }

    fn domain_rows(&self, kept: &[usize], kept_objects: &[usize]) -> Vec<usize> {
        let l = &self.layout;
        let mut rows = Vec::with_capacity(7 * kept.len());
        for &i in kept {
            rows.extend([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        let p0 = l.pose_range().start;
        match l.pose {
            PoseLayout::PerPoint => {
                for &i in kept {
                    rows.extend([p0 + 3 * i, p0 + 3 * i + 1, p0 + 3 * i + 2]);
                }
            }
            PoseLayout::PerObject { .. } => {
                for &j in kept_objects {
                    rows.extend((0..6).map(|c| p0 + 6 * j + c));
                }
            }
        }
        let i0 = l.intensity_range().start;
        rows.extend(kept.iter().map(|i| i0 + i));
        rows
    }
}
