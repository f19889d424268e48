use serde::{Deserialize, Serialize};

use super::{check_finite_points, Point3};
use crate::{Error, Result};

/// Triangulated surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        check_finite_points(&vertices, "triangle mesh vertices")?;
        if vertices.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "triangle mesh needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for tri in &triangles {
            for &i in tri {
                if i >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "triangle vertex",
                        index: i,
                        len: vertices.len(),
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Reference meshes must not contain zero-area triangles.
    pub fn check_non_degenerate(&self) -> Result<()> {
        if (0..self.triangles.len()).any(|t| self.triangle_area(t) <= 1e-14) {
            return Err(Error::Degenerate("zero-area triangle"));
        }
        Ok(())
    }
}

/// Tetrahedral volume mesh carrying one intensity per vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TetMesh {
    pub vertices: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
    pub intensity: Vec<f64>,
}

impl TetMesh {
    pub fn new(vertices: Vec<Point3>, tets: Vec<[usize; 4]>, intensity: Vec<f64>) -> Result<Self> {
        check_finite_points(&vertices, "tet mesh vertices")?;
        if intensity.len() != vertices.len() {
            return Err(Error::LengthMismatch {
                what: "tet mesh intensity",
                expected: vertices.len(),
                got: intensity.len(),
            });
        }
        if intensity.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tet mesh intensity"));
        }
        for tet in &tets {
            for &i in tet {
                if i >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "tet vertex",
                        index: i,
                        len: vertices.len(),
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            tets,
            intensity,
        })
    }

    pub fn tet_points(&self, t: usize) -> [Point3; 4] {
        self.tets[t].map(|i| self.vertices[i])
    }

    /// Barycentric coordinates of `p` in tet `t`, or `None` for a flat tet.
    pub fn barycentric(&self, t: usize, p: &Point3) -> Option<[f64; 4]> {
        barycentric_tet(&self.tet_points(t), p)
    }

    /// Faces referenced by exactly one tet, outward orientation not guaranteed.
    pub fn boundary_faces(&self) -> Vec<[usize; 3]> {
        use std::collections::BTreeMap;
        let mut count: BTreeMap<[usize; 3], ([usize; 3], u32)> = BTreeMap::new();
        for tet in &self.tets {
            let [a, b, c, d] = *tet;
            // faces oriented so that the remaining vertex lies on the negative side
            for face in [[b, c, d], [a, d, c], [a, b, d], [a, c, b]] {
                let mut key = face;
                key.sort_unstable();
                count.entry(key).or_insert((face, 0)).1 += 1;
            }
        }
        count
            .into_values()
            .filter(|(_, n)| *n == 1)
            .map(|(f, _)| f)
            .collect()
    }
}

pub(crate) fn barycentric_tet(v: &[Point3; 4], p: &Point3) -> Option<[f64; 4]> {
    let m = nalgebra::Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let inv = m.try_inverse()?;
    let l = inv * (p - v[0]);
    Some([1.0 - l.x - l.y - l.z, l.x, l.y, l.z])
}

/// Arithmetic mean of the mesh vertices.
pub fn centroid(mesh: &TriMesh) -> Result<Point3> {
    point_centroid(&mesh.vertices)
}

pub fn point_centroid(points: &[Point3]) -> Result<Point3> {
    if points.is_empty() {
        return Err(Error::Empty("point set"));
    }
    let sum = points
        .iter()
        .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
    Ok(Point3::from(sum / points.len() as f64))
}
