//! Toy references, training sets and dense oracles shared by the test targets.
#![allow(dead_code)]

use dmfc_core::geometry::{FieldLayout, ReferenceObject};
use dmfc_core::model::{ClassWeights, Weighting};
use dmfc_core::{DmfcGpm, FeatureField, MultiObjectReference, Point3, PoseCoding, TetMesh, TrainingSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Regular `nx × ny × nz` vertex grid split into six tetrahedra per cell.
pub fn grid_object(name: &str, dims: [usize; 3], offset: [f64; 3]) -> ReferenceObject {
    let [nx, ny, nz] = dims;
    let id = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut pts = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                pts.push(Point3::new(
                    i as f64 + offset[0],
                    j as f64 * 1.3 + offset[1],
                    k as f64 * 0.9 + offset[2] + 0.05 * (i * j) as f64,
                ));
            }
        }
    }
    let mut tets = Vec::new();
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let c = |a: usize, b: usize, d: usize| id(i + a, j + b, k + d);
                let (v0, v7) = (c(0, 0, 0), c(1, 1, 1));
                for [a, b] in [
                    [c(1, 0, 0), c(1, 1, 0)],
                    [c(1, 0, 0), c(1, 0, 1)],
                    [c(0, 1, 0), c(1, 1, 0)],
                    [c(0, 1, 0), c(0, 1, 1)],
                    [c(0, 0, 1), c(1, 0, 1)],
                    [c(0, 0, 1), c(0, 1, 1)],
                ] {
                    tets.push([v0, a, b, v7]);
                }
            }
        }
    }
    let n = pts.len();
    let intensity = (0..n).map(|i| (i % 7) as f64 * 0.3).collect();
    let tet = TetMesh::new(pts, tets, intensity).unwrap();
    let tris = tet.boundary_faces();
    ReferenceObject::new(name, tet, (0..n).collect(), tris, vec![0, n - 1]).unwrap()
}

/// Two objects, 12 + 18 = 30 points.
pub fn toy_reference() -> MultiObjectReference {
    MultiObjectReference::new(vec![
        grid_object("a", [2, 2, 3], [0.0; 3]),
        grid_object("b", [3, 2, 3], [4.0, 0.5, 0.0]),
    ])
    .unwrap()
}

pub fn random_field(rng: &mut ChaCha8Rng, layout: FieldLayout) -> FeatureField {
    let v: Vec<f64> = (0..layout.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureField::from_vector(layout, &v).unwrap()
}

pub fn random_set(seed: u64, n: usize, coding: PoseCoding) -> TrainingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = toy_reference();
    let layout = coding.layout(&reference);
    let fields = (0..n).map(|_| random_field(&mut rng, layout)).collect();
    TrainingSet::new(reference, fields, coding).unwrap()
}

pub fn uneven_weights() -> Weighting {
    Weighting::Fixed(ClassWeights {
        shape: 1.0,
        pose: 0.6,
        intensity: 2.0,
    })
}

/// Unbiased sample covariance of the raw training vectors.
pub fn sample_covariance(ts: &TrainingSet) -> DMatrix<f64> {
    let vs: Vec<DVector<f64>> = ts.fields.iter().map(FeatureField::to_vector).collect();
    let n = vs.len() as f64;
    let mean = vs.iter().fold(DVector::zeros(vs[0].len()), |a, v| a + v) / n;
    let mut cov = DMatrix::zeros(mean.len(), mean.len());
    for v in &vs {
        let c = v - &mean;
        cov += &c * c.transpose();
    }
    cov / (n - 1.0)
}

/// Dense GP regression on the model's full covariance.
pub fn dense_posterior(m: &DmfcGpm, rows: &[usize], y: &[f64], s2: f64) -> (DVector<f64>, DMatrix<f64>) {
    let b = m.scaled_basis();
    let k = &b * b.transpose();
    let kx = k.select_columns(rows);
    let koo = kx.select_rows(rows) + DMatrix::identity(rows.len(), rows.len()) * s2;
    let inv = koo.try_inverse().unwrap();
    let r = DVector::from_column_slice(y) - m.mean.select_rows(rows);
    let mean = &m.mean + &kx * &inv * r;
    let cov = &k - &kx * inv * kx.transpose();
    (mean, cov)
}
