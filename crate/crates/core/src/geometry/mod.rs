//! Points, meshes, volumes, rigid transforms and the per-point feature fields
//! every other module builds on.

mod field;
mod interp;
pub mod io;
mod mesh;
mod reference;
mod rigid;
mod volume;

pub use field::{FeatureField, FieldLayout, PoseChannel, PoseLayout, Septuple};
pub use interp::{interpolate_field, Interpolation};
pub(crate) use mesh::barycentric_tet;
pub use mesh::{centroid, point_centroid, TetMesh, TriMesh};
pub use reference::{compose_fields, MultiObjectReference, ReferenceObject};
pub use rigid::{apply_rigid, RigidTransform};
pub use volume::{Image2, Volume3};

/// A position in space.
pub type Point3 = nalgebra::Point3<f64>;
/// A displacement (shape or pose channel value).
pub type Disp3 = nalgebra::Vector3<f64>;

pub(crate) fn check_finite_points(points: &[Point3], what: &'static str) -> crate::Result<()> {
    if points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())) {
        Ok(())
    } else {
        Err(crate::Error::NonFinite(what))
    }
}
