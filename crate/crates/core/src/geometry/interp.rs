use super::mesh::barycentric_tet;
use super::{FeatureField, MultiObjectReference, Point3, Septuple};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Interpolation {
    Nearest,
    #[default]
    Barycentric,
}

const INSIDE_TOL: f64 = 1e-12;

/// Evaluates a discrete field at an arbitrary point of space.
///
/// Queries must lie inside the domain bounding box scaled by 2 about its
/// centre. Barycentric evaluation uses the first tet that contains the query
/// and falls back to the nearest domain point outside the tet meshes.
pub fn interpolate_field(
    field: &FeatureField,
    reference: &MultiObjectReference,
    query: &Point3,
    scheme: Interpolation,
) -> Result<Septuple> {
    if field.n_points() != reference.n_points() {
        return Err(Error::LengthMismatch {
            what: "field over reference",
            expected: reference.n_points(),
            got: field.n_points(),
        });
    }
    let points = reference.points();
    check_expansion(&points, query)?;

    if scheme == Interpolation::Barycentric {
        for (j, obj) in reference.objects.iter().enumerate() {
            let off = reference.offset(j);
            for tet in &obj.tet.tets {
                let v = tet.map(|i| obj.tet.vertices[i]);
                let Some(w) = barycentric_tet(&v, query) else {
                    continue;
                };
                if w.iter().all(|&x| x >= -INSIDE_TOL) {
                    let mut out = Septuple {
                        shape: Default::default(),
                        pose: Default::default(),
                        intensity: 0.0,
                    };
                    for (k, &i) in tet.iter().enumerate() {
                        let s = field.at(off + i);
                        out.shape += w[k] * s.shape;
                        out.pose += w[k] * s.pose;
                        out.intensity += w[k] * s.intensity;
                    }
                    return Ok(out);
                }
            }
        }
    }
    let nearest = points
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - query)
                .norm_squared()
                .total_cmp(&(b.1 - query).norm_squared())
        })
        .map(|(i, _)| i)
        .ok_or(Error::Empty("field domain"))?;
    Ok(field.at(nearest))
}

fn check_expansion(points: &[Point3], q: &Point3) -> Result<()> {
    let mut lo = points[0].coords;
    let mut hi = points[0].coords;
    for p in points {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    let center = (lo + hi) / 2.0;
    let half = hi - lo;
    for k in 0..3 {
        if (q[k] - center[k]).abs() > half[k].max(1e-12) {
            return Err(Error::OutOfDomain);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Disp3, PoseChannel, ReferenceObject, TetMesh};

    fn unit_tet() -> (MultiObjectReference, FeatureField) {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let tet = TetMesh::new(pts, vec![[0, 1, 2, 3]], vec![0.0; 4]).unwrap();
        let obj = ReferenceObject::new("t", tet, vec![], vec![], vec![]).unwrap();
        let r = MultiObjectReference::new(vec![obj]).unwrap();
        let f = FeatureField::new(
            (0..4).map(|i| Disp3::new(i as f64, 0.0, 0.0)).collect(),
            PoseChannel::Field((0..4).map(|i| Disp3::new(0.0, 2.0 * i as f64, 0.0)).collect()),
            vec![10.0, 20.0, 30.0, 40.0],
        )
        .unwrap();
        (r, f)
    }

    #[test]
    fn exact_at_domain_points() {
        let (r, f) = unit_tet();
        for scheme in [Interpolation::Nearest, Interpolation::Barycentric] {
            for (i, p) in r.points().iter().enumerate() {
                let v = interpolate_field(&f, &r, p, scheme).unwrap();
                assert!((v.intensity - f.intensity[i]).abs() < 1e-12);
                assert!((v.shape - f.shape[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn edge_midpoint_is_average() {
        let (r, f) = unit_tet();
        let v = interpolate_field(&f, &r, &Point3::new(0.5, 0.0, 0.0), Interpolation::Barycentric).unwrap();
        assert!((v.intensity - 15.0).abs() < 1e-12);
        assert!((v.pose - Disp3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn far_query_is_out_of_domain() {
        let (r, f) = unit_tet();
        let q = Point3::new(5.0, 0.0, 0.0);
        assert!(matches!(
            interpolate_field(&f, &r, &q, Interpolation::Nearest),
            Err(Error::OutOfDomain)
        ));
    }

    #[test]
    fn off_mesh_nearest_matches_brute_force() {
        let (r, f) = unit_tet();
        let q = Point3::new(0.9, 0.9, 0.1);
        let v = interpolate_field(&f, &r, &q, Interpolation::Barycentric).unwrap();
        let pts = r.points();
        let mut best = 0;
        for i in 0..pts.len() {
            if (pts[i] - q).norm() < (pts[best] - q).norm() {
                best = i;
            }
        }
        assert_eq!(v.intensity, f.intensity[best]);
    }
}
