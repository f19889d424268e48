//! Correlations between derived joint quantities, surface distances, and
//! specificity / generality of fitted models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fitting::{closest_distance, fit, object_residuals, ChainConfig, Observation};
use crate::geometry::{MultiObjectReference, RigidTransform, TetMesh, TriMesh};
use crate::model::{DmfcGpm, JointInstance};
use crate::pose::procrustes_align;
use crate::{Error, Result};

/// Sample Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "correlation inputs",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 3 pairs, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Derived per-object quantities of one joint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectQuantities {
    /// Distance between the first two landmarks (head poles).
    pub length: f64,
    /// Mean intensity over the landmarks.
    pub intensity: f64,
    /// yz-plane angle relative to the previous object (absolute for the first).
    pub angle: f64,
}

/// Quantities of a joint given per-object domains and placements.
pub fn joint_quantities(
    reference: &MultiObjectReference,
    tets: &[TetMesh],
    placements: &[RigidTransform],
) -> Result<Vec<ObjectQuantities>> {
    let mut out = Vec::with_capacity(tets.len());
    for (j, (obj, tet)) in reference.objects.iter().zip(tets).enumerate() {
        let lm = &obj.landmarks;
        if lm.len() < 2 {
            return Err(Error::InvalidArgument(format!("object {j} needs two landmarks")));
        }
        let length = (tet.vertices[lm[1]] - tet.vertices[lm[0]]).norm();
        let intensity = lm.iter().map(|&i| tet.intensity[i]).sum::<f64>() / lm.len() as f64;
        let angle = if j == 0 {
            placements[0].yz_angle()
        } else {
            placements[j - 1].inverse().compose(&placements[j]).yz_angle()
        };
        out.push(ObjectQuantities {
            length,
            intensity,
            angle,
        });
    }
    Ok(out)
}

pub fn instance_quantities(model: &DmfcGpm, inst: &JointInstance) -> Result<Vec<ObjectQuantities>> {
    let tets: Vec<TetMesh> = inst.objects.iter().map(|o| o.tet.clone()).collect();
    let placements: Vec<RigidTransform> = inst.objects.iter().map(|o| o.transform).collect();
    joint_quantities(&model.reference, &tets, &placements)
}

/// Quantities of training joints; placements are recovered by aligning the
/// reference onto every object.
pub fn training_quantities(
    reference: &MultiObjectReference,
    samples: &[Vec<TetMesh>],
) -> Result<Vec<Vec<ObjectQuantities>>> {
    samples
        .iter()
        .map(|joint| {
            let placements = reference
                .objects
                .iter()
                .zip(joint)
                .map(|(o, t)| procrustes_align(o.points(), &t.vertices))
                .collect::<Result<Vec<_>>>()?;
            joint_quantities(reference, joint, &placements)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub a: String,
    pub b: String,
    /// `|r|`.
    pub value: f64,
    pub signed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_samples: usize,
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.a == a && e.b == b).map(|e| e.value)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("a,b,abs_r,r\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{}\n", e.a, e.b, e.value, e.signed));
        }
        s
    }
}

/// The six pairs of the three-object table: shape vs intensity per object,
/// object 2 vs object 3 angle, and consecutive shape pairs.
pub fn correlation_table(quantities: &[Vec<ObjectQuantities>]) -> Result<CorrelationReport> {
    if quantities.first().is_none_or(|q| q.len() < 3) {
        return Err(Error::InvalidArgument("correlation table needs three objects".into()));
    }
    let col = |j: usize, f: fn(&ObjectQuantities) -> f64| -> Vec<f64> { quantities.iter().map(|q| f(&q[j])).collect() };
    let len = |q: &ObjectQuantities| q.length;
    let int = |q: &ObjectQuantities| q.intensity;
    let ang = |q: &ObjectQuantities| q.angle;
    let pairs: [(&str, Vec<f64>, &str, Vec<f64>); 6] = [
        ("r1", col(0, len), "d1", col(0, int)),
        ("r2", col(1, len), "d2", col(1, int)),
        ("r3", col(2, len), "d3", col(2, int)),
        ("theta2", col(1, ang), "theta3", col(2, ang)),
        ("r1", col(0, len), "r2", col(1, len)),
        ("r2", col(1, len), "r3", col(2, len)),
    ];
    let entries = pairs
        .into_iter()
        .map(|(a, x, b, y)| {
            let r = pearson(&x, &y)?;
            Ok(CorrelationEntry {
                a: a.into(),
                b: b.into(),
                value: r.abs(),
                signed: r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport {
        n_samples: quantities.len(),
        entries,
    })
}

/// Correlation table over `n_samples` random model instances.
pub fn correlation_report(model: &DmfcGpm, n_samples: usize, seed: u64) -> Result<CorrelationReport> {
    if n_samples < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {n_samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = (0..n_samples)
        .map(|_| {
            let theta = model.random_coefficients(&mut rng);
            instance_quantities(model, &model.sample(&theta)?)
        })
        .collect::<Result<Vec<_>>>()?;
    correlation_table(&q)
}

fn directed_sq(a: &TriMesh, b: &TriMesh) -> Vec<f64> {
    a.vertices.iter().map(|p| closest_distance(p, &b.vertices).powi(2)).collect()
}

fn check_non_empty(a: &TriMesh, b: &TriMesh) -> Result<()> {
    if a.vertices.is_empty() || b.vertices.is_empty() {
        return Err(Error::Empty("surface mesh"));
    }
    Ok(())
}

/// Closest-vertex RMS distance, averaged over both directions.
pub fn rms_surface_distance(a: &TriMesh, b: &TriMesh) -> Result<f64> {
    check_non_empty(a, b)?;
    let rms = |d: Vec<f64>| (d.iter().sum::<f64>() / d.len() as f64).sqrt();
    Ok(0.5 * (rms(directed_sq(a, b)) + rms(directed_sq(b, a))))
}

/// Symmetric Hausdorff distance between vertex sets.
pub fn hausdorff(a: &TriMesh, b: &TriMesh) -> Result<f64> {
    check_non_empty(a, b)?;
    let max = |d: Vec<f64>| d.into_iter().fold(0.0, f64::max).sqrt();
    Ok(max(directed_sq(a, b)).max(max(directed_sq(b, a))))
}

/// Per-object intensity RMS of an instance against a volume observation.
pub fn intensity_rms(inst: &JointInstance, obs: &Observation) -> Result<Vec<f64>> {
    (0..inst.objects.len())
        .map(|j| {
            let r = object_residuals(inst, obs, j)?;
            if r.is_empty() {
                return Err(Error::Empty("object residuals"));
            }
            Ok((r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt())
        })
        .collect()
}

/// Per-object error lists (one entry per sample or observation).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub per_object: Vec<Vec<f64>>,
}

impl ErrorSeries {
    fn push(&mut self, errors: &[f64]) {
        if self.per_object.is_empty() {
            self.per_object = vec![Vec::new(); errors.len()];
        }
        for (s, e) in self.per_object.iter_mut().zip(errors) {
            s.push(*e);
        }
    }

    pub fn medians(&self) -> Vec<f64> {
        self.per_object.iter().map(|s| median(s)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,object,error\n");
        for (j, series) in self.per_object.iter().enumerate() {
            for (i, e) in series.iter().enumerate() {
                s.push_str(&format!("{i},{},{e}\n", j + 1));
            }
        }
        s
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// For each of `n_samples` random instances, the smallest per-object
/// intensity RMS over the observations (taken per object).
pub fn specificity(model: &DmfcGpm, observations: &[Observation], n_samples: usize, seed: u64) -> Result<ErrorSeries> {
    if observations.is_empty() {
        return Err(Error::Empty("specificity observations"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ErrorSeries::default();
    for _ in 0..n_samples {
        let inst = model.sample(&model.random_coefficients(&mut rng))?;
        let mut best = vec![f64::INFINITY; model.reference.n_objects()];
        for obs in observations {
            for (b, e) in best.iter_mut().zip(intensity_rms(&inst, obs)?) {
                *b = b.min(e);
            }
        }
        out.push(&best);
    }
    Ok(out)
}

/// Per-object intensity RMS of the best fit to every held-out observation.
pub fn generality(model: &DmfcGpm, observations: &[Observation], cfg: &ChainConfig, chains: usize) -> Result<ErrorSeries> {
    if observations.is_empty() {
        return Err(Error::Empty("generality observations"));
    }
    let mut out = ErrorSeries::default();
    for obs in observations {
        let res = fit(model, obs, cfg, chains)?;
        out.push(&intensity_rms(&res.instance, obs)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    #[test]
    fn pearson_basics() {
        let a = [1.0, 2.0, 4.0, 8.0];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&a, &[1.0; 4]), Err(Error::ZeroVariance)));
        assert!(pearson(&a[..2], &a[..2]).is_err());
        assert!(pearson(&a, &a[..3]).is_err());
    }

    #[test]
    fn distances_of_translated_mesh() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let a = TriMesh::new(v.clone(), vec![[0, 1, 2]]).unwrap();
        assert_eq!(rms_surface_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        let t = nalgebra::Vector3::new(0.0, 0.0, 0.1);
        let b = TriMesh::new(v.iter().map(|p| p + t).collect(), vec![[0, 1, 2]]).unwrap();
        assert!(rms_surface_distance(&a, &b).unwrap() <= 0.1 + 1e-15);
        assert!((hausdorff(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        let empty = TriMesh {
            vertices: vec![],
            triangles: vec![],
        };
        assert!(rms_surface_distance(&a, &empty).is_err());
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
