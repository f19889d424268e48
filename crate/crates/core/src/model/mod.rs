//! The shared low-rank Gaussian-process latent space.
//!
//! Training fields are flattened to `[shape 3N | pose | intensity N]` vectors,
//! centred, scaled per feature class and decomposed through the `n × n` Gram
//! matrix of the data (the thin SVD of the `n × D` data matrix, without ever
//! forming a `D × D` kernel). The basis is stored in raw feature units and is
//! orthonormal under the class-weighted inner product
//! `<a, b> = Σ_k w_k² a_k b_k`, so that `Σ_m λ_m Φ_m Φ_mᵀ` is exactly the
//! sample covariance of the raw training fields.

mod io;
mod marginal;
mod posterior;
mod training;

pub use io::{load_model, read_model, save_model, write_model};
pub use marginal::FeatureClass;
pub use posterior::PointObservation;
pub use training::{assemble_training_functions, permute_poses, TrainingSet};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{
    Disp3, FeatureField, FieldLayout, MultiObjectReference, PoseChannel, PoseLayout,
    RigidTransform, TetMesh, TriMesh,
};
use crate::pose::{edr_exp, sr_transform, PoseField};
use crate::{Error, Result};

/// How rigid pose enters the linear latent space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PoseCoding {
    /// Energy displacement representation; pose recovered through the exp map.
    #[default]
    Edr,
    /// Euler angles and translation per object, treated as linear.
    Sr,
    /// EDR fields added to the shape as plain displacements (no exp map).
    Pdm,
}

impl PoseCoding {
    pub fn layout(self, reference: &MultiObjectReference) -> FieldLayout {
        let pose = match self {
            PoseCoding::Sr => PoseLayout::PerObject {
                objects: reference.n_objects(),
            },
            _ => PoseLayout::PerPoint,
        };
        FieldLayout {
            n_points: reference.n_points(),
            pose,
        }
    }
}

impl std::str::FromStr for PoseCoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edr" => Ok(PoseCoding::Edr),
            "sr" => Ok(PoseCoding::Sr),
            "pdm" => Ok(PoseCoding::Pdm),
            other => Err(Error::InvalidArgument(format!("unknown pose coding {other}"))),
        }
    }
}

/// Per-class scale factors applied to field values before decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub shape: f64,
    pub pose: f64,
    pub intensity: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        Self {
            shape: 1.0,
            pose: 1.0,
            intensity: 1.0,
        }
    }
}

/// Class weighting used by [`DmfcGpm::build`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Weighting {
    /// `(1, 1, w_I)` with `w_I` = RMS(shape+pose) / RMS(intensity) of the
    /// centred training fields.
    #[default]
    Balanced,
    Fixed(ClassWeights),
}

/// Rank selection for [`DmfcGpm::build`].
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Rank {
    /// Every numerically non-zero component, at most `n − 1`.
    #[default]
    Full,
    Fixed(usize),
    /// Smallest rank explaining the given fraction of the total variance.
    Explained(f64),
}

/// Standard-normal model coordinates `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients(pub Vec<f64>);

impl Coefficients {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// One object of a sampled joint.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectInstance {
    pub surface: TriMesh,
    pub tet: TetMesh,
    pub transform: RigidTransform,
}

/// A concrete joint generated from coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct JointInstance {
    pub objects: Vec<ObjectInstance>,
    /// The sampled field `f_θ` before pose was applied.
    pub field: FeatureField,
}

/// Trained dynamic multi feature-class GP model.
#[derive(Clone, Debug, PartialEq)]
pub struct DmfcGpm {
    pub reference: MultiObjectReference,
    pub coding: PoseCoding,
    pub layout: FieldLayout,
    pub class_weights: ClassWeights,
    pub mean: DVector<f64>,
    /// Non-increasing, non-negative.
    pub eigenvalues: Vec<f64>,
    /// `D × M`, raw feature units, weighted-orthonormal columns.
    pub basis: DMatrix<f64>,
}

/// Gram eigenvalues below this fraction of the largest are numerically zero.
const RANK_TOL: f64 = 1e-12;

impl DmfcGpm {
    pub fn build(ts: &TrainingSet, weighting: Weighting, rank: Rank) -> Result<Self> {
        let n = ts.fields.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "building a model needs at least 2 training fields, got {n}"
            )));
        }
        let layout = ts.coding.layout(&ts.reference);
        let d = layout.dim();
        let rows: Vec<DVector<f64>> = ts.fields.iter().map(FeatureField::to_vector).collect();
        let mut mean = DVector::zeros(d);
        for r in &rows {
            mean += r;
        }
        mean /= n as f64;
        let mut centred = DMatrix::zeros(n, d);
        for (i, r) in rows.iter().enumerate() {
            centred.row_mut(i).copy_from(&(r - &mean).transpose());
        }
        let class_weights = match weighting {
            Weighting::Fixed(w) => w,
            Weighting::Balanced => balanced_weights(&centred, &layout)?,
        };
        if [class_weights.shape, class_weights.pose, class_weights.intensity]
            .iter()
            .any(|w| !(*w > 0.0 && w.is_finite()))
        {
            return Err(Error::InvalidArgument("class weights must be positive".into()));
        }
        let w = weight_vector(&layout, &class_weights);
        let total: f64 = centred
            .column_iter()
            .zip(w.iter())
            .map(|(c, wk)| c.norm_squared() * wk * wk)
            .sum::<f64>()
            / (n - 1) as f64;
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("training set has zero variance".into()));
        }
        let scaled = centred.transpose() / ((n - 1) as f64).sqrt();
        let (full_basis, lambdas) = rediagonalize(scaled, &w);
        let m = select_rank(&lambdas, total, rank)?;
        let basis = full_basis.columns(0, m).into_owned();
        let mut model = DmfcGpm {
            reference: ts.reference.clone(),
            coding: ts.coding,
            layout,
            class_weights,
            mean,
            eigenvalues: lambdas[..m].to_vec(),
            basis,
        };
        model.normalize_signs();
        Ok(model)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn weight_vector(&self) -> DVector<f64> {
        weight_vector(&self.layout, &self.class_weights)
    }

    /// `λ_m / Σλ`.
    pub fn variance_explained(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|l| l / total).collect()
    }

    /// `f̄ + Σ θ_m √λ_m Φ_m` as a flat vector.
    pub fn field_vector(&self, theta: &Coefficients) -> Result<DVector<f64>> {
        if theta.len() > self.rank() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients given for a rank-{} model",
                theta.len(),
                self.rank()
            )));
        }
        if theta.0.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        let mut f = self.mean.clone();
        for (m, t) in theta.0.iter().enumerate() {
            if *t != 0.0 {
                f.axpy(t * self.eigenvalues[m].sqrt(), &self.basis.column(m), 1.0);
            }
        }
        Ok(f)
    }

    pub fn field(&self, theta: &Coefficients) -> Result<FeatureField> {
        FeatureField::from_vector(self.layout, self.field_vector(theta)?.as_slice())
    }

    /// Per-object placement transforms encoded by a sampled field.
    pub fn poses_of(&self, field: &FeatureField) -> Result<Vec<RigidTransform>> {
        let ranges = self.reference.ranges();
        match (&field.pose, self.coding) {
            (PoseChannel::Field(p), PoseCoding::Edr) => ranges
                .iter()
                .zip(&self.reference.objects)
                .map(|(r, o)| edr_exp(&PoseField(p[r.clone()].to_vec()), o.points()))
                .collect(),
            (PoseChannel::Field(_), PoseCoding::Pdm) => {
                Ok(vec![RigidTransform::identity(); ranges.len()])
            }
            (PoseChannel::Params(p), PoseCoding::Sr) => Ok(p.iter().map(sr_transform).collect()),
            _ => Err(Error::InvalidArgument("pose channel does not match the coding".into())),
        }
    }

    /// Joint instance for `θ` (missing trailing coefficients are zero).
    pub fn sample(&self, theta: &Coefficients) -> Result<JointInstance> {
        let field = self.field(theta)?;
        self.instance_from_field(field)
    }

    pub fn instance_from_field(&self, field: FeatureField) -> Result<JointInstance> {
        let poses = self.poses_of(&field)?;
        let mut objects = Vec::with_capacity(self.reference.n_objects());
        for (j, (range, obj)) in self
            .reference
            .ranges()
            .into_iter()
            .zip(&self.reference.objects)
            .enumerate()
        {
            let pose = &poses[j];
            let vertices: Vec<_> = obj
                .points()
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    let g = range.start + k;
                    let mut d: Disp3 = field.shape[g];
                    if self.coding == PoseCoding::Pdm {
                        if let PoseChannel::Field(p) = &field.pose {
                            d += p[g];
                        }
                    }
                    pose.apply(&(x + d))
                })
                .collect();
            let intensity: Vec<f64> = obj
                .tet
                .intensity
                .iter()
                .zip(&field.intensity[range.clone()])
                .map(|(a, b)| a + b)
                .collect();
            let surface = obj.surface_with(&vertices);
            let tet = TetMesh {
                vertices,
                tets: obj.tet.tets.clone(),
                intensity,
            };
            objects.push(ObjectInstance {
                surface,
                tet,
                transform: *pose,
            });
        }
        Ok(JointInstance { objects, field })
    }

    /// Draws `θ ~ N(0, I)` from a seeded generator.
    pub fn random_coefficients(&self, rng: &mut ChaCha8Rng) -> Coefficients {
        Coefficients((0..self.rank()).map(|_| StandardNormal.sample(rng)).collect())
    }

    pub fn random_sample(&self, seed: u64) -> Result<(Coefficients, JointInstance)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = self.random_coefficients(&mut rng);
        let inst = self.sample(&theta)?;
        Ok((theta, inst))
    }

    /// Least-squares coordinates of a field in the weighted basis.
    pub fn project(&self, field: &FeatureField) -> Result<Coefficients> {
        let v = field.to_vector();
        if v.len() != self.dim() {
            return Err(Error::LengthMismatch {
                what: "projected field",
                expected: self.dim(),
                got: v.len(),
            });
        }
        let w = self.weight_vector();
        let w2 = w.component_mul(&w);
        let r = (v - &self.mean).component_mul(&w2);
        Ok(Coefficients(
            (0..self.rank())
                .map(|m| self.basis.column(m).dot(&r) / self.eigenvalues[m].sqrt())
                .collect(),
        ))
    }

    /// Low-rank covariance `Σ λ_m Φ_m[a] Φ_m[b]` between flat entries.
    pub fn kernel_entries(&self, a: &[usize], b: &[usize]) -> DMatrix<f64> {
        let scaled = self.scaled_basis();
        let ra = scaled.select_rows(a);
        let rb = scaled.select_rows(b);
        ra * rb.transpose()
    }

    /// Covariance block between all entries of points `x` and `y`
    /// (per-point layouts: 7 × 7, order shape, pose, intensity).
    pub fn kernel(&self, x: usize, y: usize) -> DMatrix<f64> {
        let a = point_rows(&self.layout, x);
        let b = point_rows(&self.layout, y);
        self.kernel_entries(&a, &b)
    }

    /// Marginal variance of every flat entry.
    pub fn entry_variances(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for (m, l) in self.eigenvalues.iter().enumerate() {
            let col = self.basis.column(m);
            v += col.component_mul(&col) * *l;
        }
        v
    }

    /// `Φ diag(√λ)`.
    pub fn scaled_basis(&self) -> DMatrix<f64> {
        let mut b = self.basis.clone();
        for (m, l) in self.eigenvalues.iter().enumerate() {
            b.column_mut(m).scale_mut(l.sqrt());
        }
        b
    }

    /// Gram matrix of the basis under the weighted inner product.
    pub fn basis_gram(&self) -> DMatrix<f64> {
        let mut wb = self.basis.clone();
        let w = self.weight_vector();
        for mut col in wb.column_iter_mut() {
            col.component_mul_assign(&w);
        }
        wb.transpose() * &wb
    }

    /// Sign convention: the largest-magnitude entry of every column is positive.
    fn normalize_signs(&mut self) {
        for mut col in self.basis.column_iter_mut() {
            let imax = col.iamax();
            if col[imax] < 0.0 {
                col.neg_mut();
            }
        }
    }

    /// Replaces mean and covariance with `mean` and `scaled · scaledᵀ`,
    /// re-expressed as a weighted-orthonormal eigenbasis. `scaled` columns
    /// must be raw-unit vectors.
    pub(crate) fn with_covariance(
        &self,
        reference: MultiObjectReference,
        layout: FieldLayout,
        mean: DVector<f64>,
        scaled: DMatrix<f64>,
    ) -> DmfcGpm {
        let w = weight_vector(&layout, &self.class_weights);
        let (basis, eigenvalues) = rediagonalize(scaled, &w);
        let mut out = DmfcGpm {
            reference,
            coding: self.coding,
            layout,
            class_weights: self.class_weights,
            mean,
            eigenvalues,
            basis,
        };
        out.normalize_signs();
        out
    }
}

/// Flat entries of one point (shape, pose when per point, intensity).
pub fn point_rows(layout: &FieldLayout, point: usize) -> Vec<usize> {
    let e = layout.point_entries(point);
    let mut rows = e.shape.to_vec();
    if let Some(p) = e.pose {
        rows.extend(p);
    }
    rows.push(e.intensity);
    rows
}

pub(crate) fn weight_vector(layout: &FieldLayout, w: &ClassWeights) -> DVector<f64> {
    let mut v = DVector::from_element(layout.dim(), w.shape);
    for k in layout.pose_range() {
        v[k] = w.pose;
    }
    for k in layout.intensity_range() {
        v[k] = w.intensity;
    }
    v
}

fn balanced_weights(centred: &DMatrix<f64>, layout: &FieldLayout) -> Result<ClassWeights> {
    let sum_sq = |range: std::ops::Range<usize>| -> f64 {
        range.map(|k| centred.column(k).norm_squared()).sum()
    };
    let sp = sum_sq(layout.shape_range()) + sum_sq(layout.pose_range());
    let int = sum_sq(layout.intensity_range());
    let intensity = if int > 0.0 && sp > 0.0 {
        (sp / int).sqrt()
    } else {
        1.0
    };
    Ok(ClassWeights {
        shape: 1.0,
        pose: 1.0,
        intensity,
    })
}

fn select_rank(lambdas: &[f64], total: f64, rank: Rank) -> Result<usize> {
    match rank {
        Rank::Full => Ok(lambdas.len()),
        Rank::Fixed(m) => {
            if m == 0 {
                return Err(Error::InvalidArgument("rank must be at least 1".into()));
            }
            Ok(m.min(lambdas.len()))
        }
        Rank::Explained(frac) => {
            if !(frac > 0.0 && frac <= 1.0) {
                return Err(Error::InvalidArgument(format!("explained fraction {frac} not in (0, 1]")));
            }
            let mut acc = 0.0;
            for (m, l) in lambdas.iter().enumerate() {
                acc += l;
                if acc >= frac * total * (1.0 - 1e-12) {
                    return Ok(m + 1);
                }
            }
            Ok(lambdas.len())
        }
    }
}

/// Eigenbasis of `scaled · scaledᵀ` orthonormal under `diag(w)²`, returned
/// in raw units with eigenvalues sorted non-increasing. Near-null directions
/// are dropped.
pub(crate) fn rediagonalize(scaled: DMatrix<f64>, w: &DVector<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let d = scaled.nrows();
    if scaled.ncols() == 0 {
        return (DMatrix::zeros(d, 0), Vec::new());
    }
    let mut weighted = scaled;
    for mut col in weighted.column_iter_mut() {
        col.component_mul_assign(w);
    }
    let gram = weighted.transpose() * &weighted;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| top > 0.0 && eig.eigenvalues[k] > RANK_TOL * top)
        .collect();
    let mut basis = DMatrix::zeros(d, keep.len());
    let mut lambdas = Vec::with_capacity(keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let l = eig.eigenvalues[k];
        let mut col = &weighted * eig.eigenvectors.column(k) / l.sqrt();
        // polish the weighted column to unit norm against rounding
        let nrm = col.norm();
        col /= nrm;
        col.component_div_assign(w);
        basis.set_column(c, &col);
        lambdas.push(l);
    }
    (basis, lambdas)
}
