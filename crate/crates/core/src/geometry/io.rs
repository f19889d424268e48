//! ASCII PLY meshes and raw float64 volumes with a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Point3, TetMesh, TriMesh, Volume3};
use crate::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Mesh content of a PLY file: vertices, optional per-vertex intensity,
/// triangle faces and tetrahedra.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<Point3>,
    pub intensity: Option<Vec<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub tets: Vec<[usize; 4]>,
}

pub fn ply_to_string(data: &PlyData) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", data.vertices.len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if data.intensity.is_some() {
        s.push_str("property double intensity\n");
    }
    let _ = writeln!(s, "element face {}", data.faces.len());
    s.push_str("property list uchar int vertex_indices\n");
    if !data.tets.is_empty() {
        let _ = writeln!(s, "element tet {}", data.tets.len());
        s.push_str("property list uchar int vertex_indices\n");
    }
    s.push_str("end_header\n");
    for (i, v) in data.vertices.iter().enumerate() {
        let _ = write!(s, "{} {} {}", v.x, v.y, v.z);
        if let Some(int) = &data.intensity {
            let _ = write!(s, " {}", int[i]);
        }
        s.push('\n');
    }
    for f in &data.faces {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    for t in &data.tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    s
}

pub fn parse_ply(text: &str) -> Result<PlyData> {
    let bad = |m: &str| Error::Format(format!("ply: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing magic"));
    }
    // (element name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    loop {
        let line = lines.next().ok_or_else(|| bad("unterminated header"))?.trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(bad("only ascii format is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| bad("element name"))?.to_string();
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| bad("element count"))?;
                elements.push((name, count, Vec::new()));
            }
            Some("property") => {
                let last = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let name = tok.last().ok_or_else(|| bad("property name"))?;
                last.2.push(name.to_string());
            }
            Some("end_header") => break,
            Some(other) => return Err(bad(&format!("unknown header keyword {other}"))),
        }
    }
    let mut out = PlyData::default();
    for (name, count, props) in &elements {
        for _ in 0..*count {
            let line = lines.next().ok_or_else(|| bad("truncated body"))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            match name.as_str() {
                "vertex" => {
                    if vals.len() != props.len() {
                        return Err(bad("vertex arity"));
                    }
                    let get = |p: &str| -> Result<Option<f64>> {
                        match props.iter().position(|q| q == p) {
                            Some(i) => vals[i]
                                .parse::<f64>()
                                .map(Some)
                                .map_err(|_| bad("vertex value")),
                            None => Ok(None),
                        }
                    };
                    let (x, y, z) = (get("x")?, get("y")?, get("z")?);
                    let (Some(x), Some(y), Some(z)) = (x, y, z) else {
                        return Err(bad("vertex needs x y z"));
                    };
                    out.vertices.push(Point3::new(x, y, z));
                    if let Some(v) = get("intensity")? {
                        out.intensity.get_or_insert_with(Vec::new).push(v);
                    }
                }
                "face" | "tet" => {
                    let idx: Vec<usize> = vals
                        .iter()
                        .map(|v| v.parse().map_err(|_| bad("index")))
                        .collect::<Result<_>>()?;
                    let want = if name == "face" { 3 } else { 4 };
                    if idx.first() != Some(&want) || idx.len() != want + 1 {
                        return Err(bad("polygon arity"));
                    }
                    if name == "face" {
                        out.faces.push([idx[1], idx[2], idx[3]]);
                    } else {
                        out.tets.push([idx[1], idx[2], idx[3], idx[4]]);
                    }
                }
                _ => {}
            }
        }
    }
    if let Some(int) = &out.intensity {
        if int.len() != out.vertices.len() {
            return Err(bad("intensity present on some vertices only"));
        }
    }
    Ok(out)
}

pub fn write_tri_mesh(path: &Path, mesh: &TriMesh) -> Result<()> {
    let data = PlyData {
        vertices: mesh.vertices.clone(),
        faces: mesh.triangles.clone(),
        ..Default::default()
    };
    write_atomic(path, ply_to_string(&data).as_bytes())
}

pub fn read_tri_mesh(path: &Path) -> Result<TriMesh> {
    let d = parse_ply(&fs::read_to_string(path)?)?;
    TriMesh::new(d.vertices, d.faces)
}

pub fn write_tet_mesh(path: &Path, mesh: &TetMesh, faces: &[[usize; 3]]) -> Result<()> {
    let data = PlyData {
        vertices: mesh.vertices.clone(),
        intensity: Some(mesh.intensity.clone()),
        faces: faces.to_vec(),
        tets: mesh.tets.clone(),
    };
    write_atomic(path, ply_to_string(&data).as_bytes())
}

pub fn read_tet_mesh(path: &Path) -> Result<(TetMesh, Vec<[usize; 3]>)> {
    let d = parse_ply(&fs::read_to_string(path)?)?;
    let n = d.vertices.len();
    let mesh = TetMesh::new(d.vertices, d.tets, d.intensity.unwrap_or_else(|| vec![0.0; n]))?;
    Ok((mesh, d.faces))
}

#[derive(Serialize, Deserialize)]
struct VolumeHeader {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
}

/// Writes `<stem>.raw` (little-endian float64, x fastest) and `<stem>.json`.
pub fn write_volume(stem: &Path, volume: &Volume3) -> Result<()> {
    let header = VolumeHeader {
        dims: volume.dims,
        spacing: volume.spacing,
        origin: [volume.origin.x, volume.origin.y, volume.origin.z],
    };
    let mut raw = Vec::with_capacity(volume.voxels.len() * 8);
    for v in &volume.voxels {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&stem.with_extension("raw"), &raw)?;
    write_atomic(
        &stem.with_extension("json"),
        serde_json::to_string_pretty(&header)?.as_bytes(),
    )
}

/// Reads a volume from either the `.raw` or `.json` path (or the bare stem).
pub fn read_volume(path: &Path) -> Result<Volume3> {
    let header: VolumeHeader =
        serde_json::from_str(&fs::read_to_string(path.with_extension("json"))?)?;
    let raw = fs::read(path.with_extension("raw"))?;
    if raw.len() % 8 != 0 {
        return Err(Error::Format("volume raw size is not a multiple of 8".into()));
    }
    let voxels = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Volume3::new(
        header.dims,
        header.spacing,
        Point3::new(header.origin[0], header.origin[1], header.origin[2]),
        voxels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tet_ply_roundtrip_is_exact() {
        let mesh = TetMesh::new(
            vec![
                Point3::new(0.1, 0.2, 1.0 / 3.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1e-17, 0.0),
                Point3::new(0.0, 0.0, -7.25),
            ],
            vec![[0, 1, 2, 3]],
            vec![0.5, std::f64::consts::PI, 2.0, 3.0],
        )
        .unwrap();
        let faces = vec![[0, 1, 2]];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ply");
        write_tet_mesh(&p, &mesh, &faces).unwrap();
        let (back, f) = read_tet_mesh(&p).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(f, faces);
    }

    #[test]
    fn volume_roundtrip_is_exact() {
        let v = Volume3::new([2, 1, 2], [0.5, 1.0, 1.5], Point3::new(-1.0, 0.0, 2.0), vec![0.1, 0.2, 1e300, -3.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("vol");
        write_volume(&stem, &v).unwrap();
        assert_eq!(read_volume(&stem.with_extension("raw")).unwrap(), v);
    }

    #[test]
    fn corrupt_ply_is_an_error() {
        assert!(parse_ply("ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nend_header\n1\n").is_err());
        assert!(parse_ply("not a ply").is_err());
    }
}
