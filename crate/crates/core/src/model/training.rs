use serde::{Deserialize, Serialize};

use super::PoseCoding;
use crate::geometry::{Disp3, FeatureField, MultiObjectReference, PoseChannel, TetMesh};
use crate::pose::{edr_log_with_rest, procrustes_align, rest_translation, sr_params};
use crate::{Error, Result};

/// Training functions `f_i` over a shared reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub reference: MultiObjectReference,
    pub fields: Vec<FeatureField>,
    pub coding: PoseCoding,
}

impl TrainingSet {
    pub fn new(
        reference: MultiObjectReference,
        fields: Vec<FeatureField>,
        coding: PoseCoding,
    ) -> Result<Self> {
        let n = reference.n_points();
        let layout = coding.layout(&reference);
        for f in &fields {
            f.validate()?;
            if f.layout() != layout {
                return Err(Error::LengthMismatch {
                    what: "training field",
                    expected: layout.dim(),
                    got: f.layout().dim(),
                });
            }
            debug_assert_eq!(f.n_points(), n);
        }
        Ok(Self {
            reference,
            fields,
            coding,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Turns in-correspondence posed objects into training fields: per object the
/// Procrustes alignment `h` onto the reference yields the shape residual
/// `h(V) − Γ`, the pose coding of `h`, and the intensity difference.
///
/// `samples[i][j]` is object `j` of training joint `i`, vertices in the
/// reference's domain order.
pub fn assemble_training_functions(
    samples: &[Vec<TetMesh>],
    reference: &MultiObjectReference,
    coding: PoseCoding,
) -> Result<TrainingSet> {
    let fields = samples
        .iter()
        .map(|joint| training_function(joint, reference, coding))
        .collect::<Result<Vec<_>>>()?;
    TrainingSet::new(reference.clone(), fields, coding)
}

pub(crate) fn training_function(
    joint: &[TetMesh],
    reference: &MultiObjectReference,
    coding: PoseCoding,
) -> Result<FeatureField> {
    if joint.len() != reference.n_objects() {
        return Err(Error::LengthMismatch {
            what: "objects per joint",
            expected: reference.n_objects(),
            got: joint.len(),
        });
    }
    let mut shape = Vec::with_capacity(reference.n_points());
    let mut pose_field = Vec::new();
    let mut pose_params = Vec::new();
    let mut intensity = Vec::with_capacity(reference.n_points());
    for (obj, refo) in joint.iter().zip(&reference.objects) {
        if obj.vertices.len() != refo.len() {
            return Err(Error::LengthMismatch {
                what: "object vertices (correspondence)",
                expected: refo.len(),
                got: obj.vertices.len(),
            });
        }
        let h = procrustes_align(&obj.vertices, refo.points())?;
        for (v, x) in obj.vertices.iter().zip(refo.points()) {
            shape.push(h.apply(v) - x);
        }
        match coding {
            PoseCoding::Edr | PoseCoding::Pdm => {
                let rest = rest_translation(&h, refo.points(), &obj.vertices)?;
                pose_field.extend(edr_log_with_rest(&h, refo.points(), rest).0);
            }
            PoseCoding::Sr => pose_params.push(sr_params(&h.inverse())),
        }
        intensity.extend(
            obj.intensity
                .iter()
                .zip(&refo.tet.intensity)
                .map(|(a, b)| a - b),
        );
    }
    let pose = match coding {
        PoseCoding::Sr => PoseChannel::Params(pose_params),
        _ => PoseChannel::Field(pose_field),
    };
    FeatureField::new(shape, pose, intensity)
}

/// Pose permutation: every sample's shape and intensity paired with every
/// sample's pose. With a threshold, pair `(i, j)` is kept only when the RMS
/// distance between the shape fields of `i` and `j` is at most the threshold.
pub fn permute_poses(ts: &TrainingSet, similarity_threshold: Option<f64>) -> TrainingSet {
    let n = ts.fields.len();
    let mut fields = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if let Some(thr) = similarity_threshold {
                if i != j && shape_rms(&ts.fields[i].shape, &ts.fields[j].shape) > thr {
                    continue;
                }
            }
            fields.push(FeatureField {
                shape: ts.fields[i].shape.clone(),
                pose: ts.fields[j].pose.clone(),
                intensity: ts.fields[i].intensity.clone(),
            });
        }
    }
    TrainingSet {
        reference: ts.reference.clone(),
        fields,
        coding: ts.coding,
    }
}

fn shape_rms(a: &[Disp3], b: &[Disp3]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>() / a.len() as f64).sqrt()
}
