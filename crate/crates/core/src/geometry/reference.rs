use serde::{Deserialize, Serialize};

use super::{check_finite_points, Disp3, Point3, RigidTransform, TetMesh, TriMesh};
use crate::{Error, Result};

/// One object of the reference joint. Its domain is the vertex set of `tet`;
/// the surface vertices are a subset of that domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceObject {
    pub name: String,
    pub tet: TetMesh,
    /// Domain ids of the surface vertices, in surface-mesh vertex order.
    pub surface_ids: Vec<usize>,
    /// Triangles indexing into `surface_ids`.
    pub triangles: Vec<[usize; 3]>,
    /// Named landmark vertices (domain ids), used by shape measurements.
    pub landmarks: Vec<usize>,
}

impl ReferenceObject {
    pub fn new(
        name: impl Into<String>,
        tet: TetMesh,
        surface_ids: Vec<usize>,
        triangles: Vec<[usize; 3]>,
        landmarks: Vec<usize>,
    ) -> Result<Self> {
        let n = tet.vertices.len();
        if n == 0 {
            return Err(Error::Empty("reference object domain"));
        }
        for &i in surface_ids.iter().chain(&landmarks) {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    what: "reference domain id",
                    index: i,
                    len: n,
                });
            }
        }
        for t in &triangles {
            for &i in t {
                if i >= surface_ids.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "surface triangle",
                        index: i,
                        len: surface_ids.len(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            tet,
            surface_ids,
            triangles,
            landmarks,
        })
    }

    pub fn points(&self) -> &[Point3] {
        &self.tet.vertices
    }

    pub fn len(&self) -> usize {
        self.tet.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tet.vertices.is_empty()
    }

    /// Surface mesh for an arbitrary placement of this object's domain points.
    pub fn surface_with(&self, points: &[Point3]) -> TriMesh {
        TriMesh {
            vertices: self.surface_ids.iter().map(|&i| points[i]).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn surface(&self) -> TriMesh {
        self.surface_with(&self.tet.vertices)
    }

    /// Sub-object over the sorted local ids `keep`; tets and triangles that
    /// lose a vertex are dropped.
    fn restrict(&self, keep: &[usize]) -> ReferenceObject {
        let mut map = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let vertices = keep.iter().map(|&i| self.tet.vertices[i]).collect();
        let intensity = keep.iter().map(|&i| self.tet.intensity[i]).collect();
        let tets = self
            .tet
            .tets
            .iter()
            .filter(|t| t.iter().all(|&i| map[i] != usize::MAX))
            .map(|t| t.map(|i| map[i]))
            .collect();
        let mut surf_map = vec![usize::MAX; self.surface_ids.len()];
        let mut surface_ids = Vec::new();
        for (s, &d) in self.surface_ids.iter().enumerate() {
            if map[d] != usize::MAX {
                surf_map[s] = surface_ids.len();
                surface_ids.push(map[d]);
            }
        }
        let triangles = self
            .triangles
            .iter()
            .filter(|t| t.iter().all(|&i| surf_map[i] != usize::MAX))
            .map(|t| t.map(|i| surf_map[i]))
            .collect();
        let landmarks = self
            .landmarks
            .iter()
            .filter(|&&i| map[i] != usize::MAX)
            .map(|&i| map[i])
            .collect();
        ReferenceObject {
            name: self.name.clone(),
            tet: TetMesh {
                vertices,
                tets,
                intensity,
            },
            surface_ids,
            triangles,
            landmarks,
        }
    }
}

/// The reference joint: the union of the per-object reference domains.
/// Global point ids enumerate object 0's domain first, then object 1's, ...
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiObjectReference {
    pub objects: Vec<ReferenceObject>,
}

impl MultiObjectReference {
    pub fn new(objects: Vec<ReferenceObject>) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::Empty("reference objects"));
        }
        for o in &objects {
            check_finite_points(o.points(), "reference points")?;
        }
        Ok(Self { objects })
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn n_points(&self) -> usize {
        self.objects.iter().map(|o| o.len()).sum()
    }

    pub fn offset(&self, object: usize) -> usize {
        self.objects[..object].iter().map(|o| o.len()).sum()
    }

    pub fn range(&self, object: usize) -> std::ops::Range<usize> {
        let s = self.offset(object);
        s..s + self.objects[object].len()
    }

    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        (0..self.n_objects()).map(|j| self.range(j)).collect()
    }

    /// All domain points, in global id order.
    pub fn points(&self) -> Vec<Point3> {
        self.objects
            .iter()
            .flat_map(|o| o.points().iter().copied())
            .collect()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.objects
            .iter()
            .flat_map(|o| o.tet.intensity.iter().copied())
            .collect()
    }

    /// Restriction to the global ids `ids`. Returns the sub-reference, the
    /// sorted global ids kept, and the indices of the objects that survived.
    pub fn restrict(&self, ids: &[usize]) -> Result<(MultiObjectReference, Vec<usize>, Vec<usize>)> {
        if ids.is_empty() {
            return Err(Error::Empty("subdomain"));
        }
        let n = self.n_points();
        let mut sorted = ids.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&bad) = sorted.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange {
                what: "domain point",
                index: bad,
                len: n,
            });
        }
        let mut objects = Vec::new();
        let mut kept_objects = Vec::new();
        for (j, range) in self.ranges().into_iter().enumerate() {
            let local: Vec<usize> = sorted
                .iter()
                .filter(|i| range.contains(i))
                .map(|i| i - range.start)
                .collect();
            if !local.is_empty() {
                objects.push(self.objects[j].restrict(&local));
                kept_objects.push(j);
            }
        }
        Ok((MultiObjectReference { objects }, sorted, kept_objects))
    }
}

/// Posed point sets `pose_j(x + shape(x))` for every object `j`.
pub fn compose_fields(
    reference: &MultiObjectReference,
    shape: &[Disp3],
    poses: &[RigidTransform],
) -> Result<Vec<Vec<Point3>>> {
    if shape.len() != reference.n_points() {
        return Err(Error::LengthMismatch {
            what: "shape field",
            expected: reference.n_points(),
            got: shape.len(),
        });
    }
    if poses.len() != reference.n_objects() {
        return Err(Error::LengthMismatch {
            what: "object poses",
            expected: reference.n_objects(),
            got: poses.len(),
        });
    }
    Ok(reference
        .ranges()
        .into_iter()
        .zip(&reference.objects)
        .zip(poses)
        .map(|((range, obj), pose)| {
            obj.points()
                .iter()
                .zip(&shape[range])
                .map(|(x, s)| pose.apply(&(x + s)))
                .collect()
        })
        .collect())
}
