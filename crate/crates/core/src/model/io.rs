//! Model container: an 8-byte magic, the manifest length as a little-endian
//! `u64`, a JSON manifest, then little-endian binary sections addressed by
//! the manifest.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ClassWeights, DmfcGpm, PoseCoding};
use crate::geometry::io::write_atomic;
use crate::geometry::{FieldLayout, MultiObjectReference, Point3, ReferenceObject, TetMesh};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"DMFCGPM\x01";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    version: String,
    coding: PoseCoding,
    class_weights: ClassWeights,
    layout: FieldLayout,
    rank: usize,
    objects: Vec<ObjectManifest>,
    sections: Vec<Section>,
}

#[derive(Serialize, Deserialize)]
struct ObjectManifest {
    name: String,
    n_points: usize,
}

#[derive(Serialize, Deserialize)]
struct Section {
    name: String,
    dtype: String,
    len: usize,
    offset: usize,
}

#[derive(Default)]
struct Payload {
    bytes: Vec<u8>,
    sections: Vec<Section>,
}

impl Payload {
    fn f64s(&mut self, name: String, values: impl IntoIterator<Item = f64>) {
        let offset = self.bytes.len();
        let mut len = 0;
        for v in values {
            self.bytes.extend_from_slice(&v.to_le_bytes());
            len += 1;
        }
        self.sections.push(Section {
            name,
            dtype: "f64".into(),
            len,
            offset,
        });
    }

    fn u64s(&mut self, name: String, values: impl IntoIterator<Item = usize>) {
        let offset = self.bytes.len();
        let mut len = 0;
        for v in values {
            self.bytes.extend_from_slice(&(v as u64).to_le_bytes());
            len += 1;
        }
        self.sections.push(Section {
            name,
            dtype: "u64".into(),
            len,
            offset,
        });
    }
}

/// Serialises a model into the container format.
pub fn write_model(model: &DmfcGpm) -> Result<Vec<u8>> {
    let mut p = Payload::default();
    for (j, o) in model.reference.objects.iter().enumerate() {
        p.f64s(
            format!("object{j}.vertices"),
            o.tet.vertices.iter().flat_map(|v| [v.x, v.y, v.z]),
        );
        p.f64s(format!("object{j}.intensity"), o.tet.intensity.iter().copied());
        p.u64s(format!("object{j}.tets"), o.tet.tets.iter().flatten().copied());
        p.u64s(format!("object{j}.surface_ids"), o.surface_ids.iter().copied());
        p.u64s(format!("object{j}.triangles"), o.triangles.iter().flatten().copied());
        p.u64s(format!("object{j}.landmarks"), o.landmarks.iter().copied());
    }
    p.f64s("mean".into(), model.mean.iter().copied());
    p.f64s("eigenvalues".into(), model.eigenvalues.iter().copied());
    // column-major
    p.f64s("basis".into(), model.basis.iter().copied());
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        version: crate::VERSION.to_string(),
        coding: model.coding,
        class_weights: model.class_weights,
        layout: model.layout,
        rank: model.rank(),
        objects: model
            .reference
            .objects
            .iter()
            .map(|o| ObjectManifest {
                name: o.name.clone(),
                n_points: o.len(),
            })
            .collect(),
        sections: p.sections,
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(16 + json.len() + p.bytes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&p.bytes);
    Ok(out)
}

struct Sections<'a> {
    payload: &'a [u8],
    index: BTreeMap<String, &'a Section>,
}

impl Sections<'_> {
    fn raw(&self, name: &str, dtype: &str) -> Result<&[u8]> {
        let s = self
            .index
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing section {name}")))?;
        if s.dtype != dtype {
            return Err(Error::Format(format!("section {name} has type {}", s.dtype)));
        }
        let end = s
            .len
            .checked_mul(8)
            .and_then(|n| n.checked_add(s.offset))
            .filter(|&e| e <= self.payload.len())
            .ok_or_else(|| Error::Format(format!("section {name} is truncated")))?;
        Ok(&self.payload[s.offset..end])
    }

    fn f64s(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self
            .raw(name, "f64")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    fn u64s(&self, name: &str) -> Result<Vec<usize>> {
        self.raw(name, "u64")?
            .chunks_exact(8)
            .map(|c| {
                usize::try_from(u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .map_err(|_| Error::Format(format!("index overflow in {name}")))
            })
            .collect()
    }
}

fn chunked<const K: usize, T: Copy + Default>(v: Vec<T>, name: &str) -> Result<Vec<[T; K]>> {
    if !v.len().is_multiple_of(K) {
        return Err(Error::Format(format!("section {name} length not a multiple of {K}")));
    }
    Ok(v.chunks_exact(K)
        .map(|c| {
            let mut a = [T::default(); K];
            a.copy_from_slice(c);
            a
        })
        .collect())
}

/// Parses a model from container bytes.
pub fn read_model(bytes: &[u8]) -> Result<DmfcGpm> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a model file".into()));
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if mlen > body.len() {
        return Err(Error::Format("manifest is truncated".into()));
    }
    let manifest: Manifest = serde_json::from_slice(&body[..mlen])?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {}",
            manifest.format_version
        )));
    }
    let sections = Sections {
        payload: &body[mlen..],
        index: manifest.sections.iter().map(|s| (s.name.clone(), s)).collect(),
    };
    let mut objects = Vec::with_capacity(manifest.objects.len());
    for (j, om) in manifest.objects.iter().enumerate() {
        let vname = format!("object{j}.vertices");
        let vertices: Vec<Point3> = chunked::<3, f64>(sections.f64s(&vname)?, &vname)?
            .into_iter()
            .map(|[x, y, z]| Point3::new(x, y, z))
            .collect();
        if vertices.len() != om.n_points {
            return Err(Error::Format(format!("object {j} vertex count disagrees with manifest")));
        }
        let tname = format!("object{j}.tets");
        let tets = chunked::<4, usize>(sections.u64s(&tname)?, &tname)?;
        let intensity = sections.f64s(&format!("object{j}.intensity"))?;
        let tet = TetMesh::new(vertices, tets, intensity)?;
        let fname = format!("object{j}.triangles");
        let triangles = chunked::<3, usize>(sections.u64s(&fname)?, &fname)?;
        objects.push(ReferenceObject::new(
            om.name.clone(),
            tet,
            sections.u64s(&format!("object{j}.surface_ids"))?,
            triangles,
            sections.u64s(&format!("object{j}.landmarks"))?,
        )?);
    }
    let reference = MultiObjectReference::new(objects)?;
    if manifest.coding.layout(&reference) != manifest.layout {
        return Err(Error::Format("layout disagrees with reference".into()));
    }
    let d = manifest.layout.dim();
    let mean = sections.f64s("mean")?;
    let eigenvalues = sections.f64s("eigenvalues")?;
    let basis = sections.f64s("basis")?;
    if mean.len() != d || eigenvalues.len() != manifest.rank || basis.len() != d * manifest.rank {
        return Err(Error::Format("model arrays disagree with manifest".into()));
    }
    Ok(DmfcGpm {
        reference,
        coding: manifest.coding,
        layout: manifest.layout,
        class_weights: manifest.class_weights,
        mean: DVector::from_vec(mean),
        eigenvalues,
        basis: DMatrix::from_vec(d, manifest.rank, basis),
    })
}

pub fn save_model(path: &Path, model: &DmfcGpm) -> Result<()> {
    write_atomic(path, &write_model(model)?)
}

pub fn load_model(path: &Path) -> Result<DmfcGpm> {
    read_model(&std::fs::read(path)?)
}
