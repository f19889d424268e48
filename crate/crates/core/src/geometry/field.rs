use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::Disp3;
use crate::{Error, Result};

/// Storage of the pose channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoseLayout {
    /// One displacement per domain point (EDR and PDM codings).
    PerPoint,
    /// Six numbers per object: XYZ Euler angles then translation (SR coding).
    PerObject { objects: usize },
}

/// Shape of the flattened feature vector: `[shape 3N | pose | intensity N]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLayout {
    pub n_points: usize,
    pub pose: PoseLayout,
}

impl FieldLayout {
    pub fn per_point(n_points: usize) -> Self {
        Self {
            n_points,
            pose: PoseLayout::PerPoint,
        }
    }

    pub fn pose_len(&self) -> usize {
        match self.pose {
            PoseLayout::PerPoint => 3 * self.n_points,
            PoseLayout::PerObject { objects } => 6 * objects,
        }
    }

    pub fn dim(&self) -> usize {
        4 * self.n_points + self.pose_len()
    }

    pub fn shape_range(&self) -> std::ops::Range<usize> {
        0..3 * self.n_points
    }

    pub fn pose_range(&self) -> std::ops::Range<usize> {
        let s = 3 * self.n_points;
        s..s + self.pose_len()
    }

    pub fn intensity_range(&self) -> std::ops::Range<usize> {
        let s = 3 * self.n_points + self.pose_len();
        s..s + self.n_points
    }

    /// Flat indices carrying one point's values, listed per channel.
    /// Per-object pose entries are not point-indexed and are skipped.
    pub fn point_entries(&self, point: usize) -> PointEntries {
        let pose = match self.pose {
            PoseLayout::PerPoint => {
                let s = self.pose_range().start + 3 * point;
                Some([s, s + 1, s + 2])
            }
            PoseLayout::PerObject { .. } => None,
        };
        PointEntries {
            shape: [3 * point, 3 * point + 1, 3 * point + 2],
            pose,
            intensity: self.intensity_range().start + point,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PointEntries {
    pub shape: [usize; 3],
    pub pose: Option<[usize; 3]>,
    pub intensity: usize,
}

/// Pose channel values of a feature field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PoseChannel {
    Field(Vec<Disp3>),
    Params(Vec<[f64; 6]>),
}

/// Per-domain-point shape displacement, pose displacement and intensity offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureField {
    pub shape: Vec<Disp3>,
    pub pose: PoseChannel,
    pub intensity: Vec<f64>,
}

/// The seven values a field takes at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Septuple {
    pub shape: Disp3,
    pub pose: Disp3,
    pub intensity: f64,
}

impl FeatureField {
    pub fn zeros(layout: FieldLayout) -> Self {
        let n = layout.n_points;
        let pose = match layout.pose {
            PoseLayout::PerPoint => PoseChannel::Field(vec![Disp3::zeros(); n]),
            PoseLayout::PerObject { objects } => PoseChannel::Params(vec![[0.0; 6]; objects]),
        };
        Self {
            shape: vec![Disp3::zeros(); n],
            pose,
            intensity: vec![0.0; n],
        }
    }

    pub fn new(shape: Vec<Disp3>, pose: PoseChannel, intensity: Vec<f64>) -> Result<Self> {
        let f = Self {
            shape,
            pose,
            intensity,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn n_points(&self) -> usize {
        self.shape.len()
    }

    pub fn layout(&self) -> FieldLayout {
        let pose = match &self.pose {
            PoseChannel::Field(_) => PoseLayout::PerPoint,
            PoseChannel::Params(p) => PoseLayout::PerObject { objects: p.len() },
        };
        FieldLayout {
            n_points: self.shape.len(),
            pose,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.shape.len();
        if self.intensity.len() != n {
            return Err(Error::LengthMismatch {
                what: "intensity channel",
                expected: n,
                got: self.intensity.len(),
            });
        }
        if let PoseChannel::Field(p) = &self.pose {
            if p.len() != n {
                return Err(Error::LengthMismatch {
                    what: "pose channel",
                    expected: n,
                    got: p.len(),
                });
            }
        }
        if self.to_vector().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature field"));
        }
        Ok(())
    }

    pub fn pose_field(&self) -> Option<&[Disp3]> {
        match &self.pose {
            PoseChannel::Field(p) => Some(p),
            PoseChannel::Params(_) => None,
        }
    }

    pub fn at(&self, point: usize) -> Septuple {
        let pose = match &self.pose {
            PoseChannel::Field(p) => p[point],
            PoseChannel::Params(_) => Disp3::zeros(),
        };
        Septuple {
            shape: self.shape[point],
            pose,
            intensity: self.intensity[point],
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let layout = self.layout();
        let mut v = DVector::zeros(layout.dim());
        for (k, s) in self.shape.iter().enumerate() {
            v.fixed_rows_mut::<3>(3 * k).copy_from(s);
        }
        let p0 = layout.pose_range().start;
        match &self.pose {
            PoseChannel::Field(p) => {
                for (k, d) in p.iter().enumerate() {
                    v.fixed_rows_mut::<3>(p0 + 3 * k).copy_from(d);
                }
            }
            PoseChannel::Params(p) => {
                for (k, q) in p.iter().enumerate() {
                    for (c, x) in q.iter().enumerate() {
                        v[p0 + 6 * k + c] = *x;
                    }
                }
            }
        }
        let i0 = layout.intensity_range().start;
        for (k, x) in self.intensity.iter().enumerate() {
            v[i0 + k] = *x;
        }
        v
    }

    pub fn from_vector(layout: FieldLayout, v: &[f64]) -> Result<Self> {
        if v.len() != layout.dim() {
            return Err(Error::LengthMismatch {
                what: "feature vector",
                expected: layout.dim(),
                got: v.len(),
            });
        }
        let n = layout.n_points;
        let shape = (0..n)
            .map(|k| Disp3::new(v[3 * k], v[3 * k + 1], v[3 * k + 2]))
            .collect();
        let p0 = layout.pose_range().start;
        let pose = match layout.pose {
            PoseLayout::PerPoint => PoseChannel::Field(
                (0..n)
                    .map(|k| Disp3::new(v[p0 + 3 * k], v[p0 + 3 * k + 1], v[p0 + 3 * k + 2]))
                    .collect(),
            ),
            PoseLayout::PerObject { objects } => PoseChannel::Params(
                (0..objects)
                    .map(|k| {
                        let mut q = [0.0; 6];
                        q.copy_from_slice(&v[p0 + 6 * k..p0 + 6 * k + 6]);
                        q
                    })
                    .collect(),
            ),
        };
        let i0 = layout.intensity_range().start;
        Ok(Self {
            shape,
            pose,
            intensity: v[i0..i0 + n].to_vec(),
        })
    }
}
