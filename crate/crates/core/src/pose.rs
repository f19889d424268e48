//! Rigid alignment and the energy displacement representation (EDR) of pose.
//!
//! A rigid transform `h` is encoded as the displacement field it induces on an
//! object's reference points: `log[h](x) = h⁻¹(T(x)) − x`, where `T` is a
//! translation taking the aligned object's centroid onto the reference
//! centroid. The exponential map goes back to SE(3) through a Procrustes fit
//! of the displaced points.

use nalgebra::{Matrix3, Vector3};

use crate::geometry::{apply_rigid, Disp3, Point3, RigidTransform};
use crate::geometry::point_centroid as centroid_of;
use crate::{Error, Result};

/// EDR displacement values of one object, one per reference point.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseField(pub Vec<Disp3>);

impl PoseField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Disp3::zeros(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Disp3] {
        &self.0
    }
}

/// Least-squares rigid transform taking `source` onto `target` (Kabsch),
/// with reflections corrected along the weakest singular direction.
pub fn procrustes_align(source: &[Point3], target: &[Point3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::LengthMismatch {
            what: "procrustes target",
            expected: source.len(),
            got: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::Degenerate("procrustes needs at least 3 points"));
    }
    let cs = centroid_of(source)?;
    let ct = centroid_of(target)?;
    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s - cs) * (t - ct).transpose();
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("procrustes cross-covariance"));
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let scale = sv[order[0]];
    if !(scale > 0.0) || sv[order[1]] <= 1e-12 * scale {
        return Err(Error::Degenerate("collinear or coincident points"));
    }
    let v = v_t.transpose();
    let mut d = Vector3::repeat(1.0);
    if (v * u.transpose()).determinant() < 0.0 {
        d[order[2]] = -1.0;
    }
    let r = v * Matrix3::from_diagonal(&d) * u.transpose();
    let r = orthonormalize(&r);
    let t = ct.coords - r * cs.coords;
    RigidTransform::new(r, t)
}

// One polar-decomposition cleanup step keeps RᵀR = I at machine precision.
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("u");
    let v_t = svd.v_t.expect("v_t");
    let m = u * v_t;
    if m.determinant() < 0.0 {
        *r
    } else {
        m
    }
}

/// Result of generalised Procrustes analysis.
#[derive(Clone, Debug)]
pub struct GpaResult {
    pub aligned: Vec<Vec<Point3>>,
    /// `transforms[i]` maps shape `i` onto its aligned version.
    pub transforms: Vec<RigidTransform>,
    pub consensus: Vec<Point3>,
    pub iterations: usize,
}

/// Iteratively aligns every shape to the evolving mean until the consensus
/// moves less than `tol` (RMS per point) or `max_iter` is reached. The
/// consensus is centred at the origin and oriented like the first shape.
pub fn gpa(shapes: &[Vec<Point3>], tol: f64, max_iter: usize) -> Result<GpaResult> {
    if shapes.len() < 2 {
        return Err(Error::InvalidArgument("gpa needs at least 2 shapes".into()));
    }
    let n = shapes[0].len();
    if let Some(bad) = shapes.iter().find(|s| s.len() != n) {
        return Err(Error::LengthMismatch {
            what: "gpa shape",
            expected: n,
            got: bad.len(),
        });
    }
    let c0 = centroid_of(&shapes[0])?;
    let mut consensus: Vec<Point3> = shapes[0].iter().map(|p| Point3::from(p - c0)).collect();
    let mut transforms = vec![RigidTransform::identity(); shapes.len()];
    let mut iterations = 0;
    for it in 0..max_iter.max(1) {
        iterations = it + 1;
        for (i, s) in shapes.iter().enumerate() {
            transforms[i] = procrustes_align(s, &consensus)?;
        }
        let mut mean = vec![Vector3::zeros(); n];
        for (s, h) in shapes.iter().zip(&transforms) {
            for (m, p) in mean.iter_mut().zip(s) {
                *m += h.apply(p).coords;
            }
        }
        let k = shapes.len() as f64;
        let mut next: Vec<Point3> = mean.into_iter().map(|m| Point3::from(m / k)).collect();
        // keep the consensus frame fixed: centred, and aligned with the previous one
        let fix = procrustes_align(&next, &consensus)?;
        next = apply_rigid(&fix, &next);
        let cn = centroid_of(&next)?;
        for p in next.iter_mut() {
            *p = Point3::from(*p - cn);
        }
        let moved = (next
            .iter()
            .zip(&consensus)
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            / n as f64)
            .sqrt();
        consensus = next;
        if moved < tol {
            break;
        }
    }
    for (i, s) in shapes.iter().enumerate() {
        transforms[i] = procrustes_align(s, &consensus)?;
    }
    let aligned = shapes
        .iter()
        .zip(&transforms)
        .map(|(s, h)| apply_rigid(h, s))
        .collect();
    Ok(GpaResult {
        aligned,
        transforms,
        consensus,
        iterations,
    })
}

/// Translation `c_ref − centroid(h(object))` that places the aligned object's
/// centroid on the reference centroid.
pub fn rest_translation(
    h: &RigidTransform,
    reference: &[Point3],
    object: &[Point3],
) -> Result<Disp3> {
    let aligned = apply_rigid(h, object);
    Ok(centroid_of(reference)? - centroid_of(&aligned)?)
}

/// EDR log map with the rest translation `T(x) = x + rest`.
pub fn edr_log_with_rest(h: &RigidTransform, reference: &[Point3], rest: Disp3) -> PoseField {
    let inv = h.inverse();
    PoseField(
        reference
            .iter()
            .map(|x| inv.apply(&(x + rest)) - x)
            .collect(),
    )
}

/// EDR log map with `T = Id`: `x ↦ h⁻¹(x) − x`.
pub fn edr_log(h: &RigidTransform, reference: &[Point3]) -> PoseField {
    edr_log_with_rest(h, reference, Disp3::zeros())
}

/// EDR exp map: the rigid transform whose action on the reference best
/// reproduces `reference + field`.
pub fn edr_exp(field: &PoseField, reference: &[Point3]) -> Result<RigidTransform> {
    if field.len() != reference.len() {
        return Err(Error::LengthMismatch {
            what: "pose field",
            expected: reference.len(),
            got: field.len(),
        });
    }
    let displaced: Vec<Point3> = reference.iter().zip(&field.0).map(|(x, d)| x + d).collect();
    Ok(procrustes_align(&displaced, reference)?.inverse())
}

/// Squared EDR distance to the identity: `Σ‖P(x)‖²`.
pub fn pose_distance_sq(field: &PoseField) -> f64 {
    field.0.iter().map(|d| d.norm_squared()).sum()
}

/// Mean pose as the exp of the pointwise mean field.
pub fn frechet_mean_pose(
    fields: &[PoseField],
    reference: &[Point3],
) -> Result<(RigidTransform, PoseField)> {
    let first = fields.first().ok_or(Error::Empty("pose fields"))?;
    let n = first.len();
    let mut mean = vec![Disp3::zeros(); n];
    for f in fields {
        if f.len() != n {
            return Err(Error::LengthMismatch {
                what: "pose field",
                expected: n,
                got: f.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(&f.0) {
            *m += v;
        }
    }
    let k = fields.len() as f64;
    let mean = PoseField(mean.into_iter().map(|m| m / k).collect());
    Ok((edr_exp(&mean, reference)?, mean))
}

/// SR coding of the transform that moves the reference into place:
/// XYZ Euler angles then translation.
pub fn sr_params(placement: &RigidTransform) -> [f64; 6] {
    let e = placement.euler_xyz();
    let t = placement.translation();
    [e[0], e[1], e[2], t.x, t.y, t.z]
}

pub fn sr_transform(params: &[f64; 6]) -> RigidTransform {
    RigidTransform::from_euler_xyz(
        [params[0], params[1], params[2]],
        Disp3::new(params[3], params[4], params[5]),
    )
}
