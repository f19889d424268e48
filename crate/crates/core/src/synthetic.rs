//! Lollipop joints: three stick-and-ellipsoid objects whose head lengths are
//! correlated across the dataset and whose second and third members rotate in
//! the yz-plane. Includes the distance-function renderer, orthographic DRRs
//! and the per-vertex intensity lookup that puts intensities in
//! correspondence.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::io::{read_tet_mesh, write_atomic, write_tet_mesh, write_tri_mesh, write_volume};
use crate::geometry::{
    apply_rigid, Disp3, Image2, MultiObjectReference, Point3, ReferenceObject, RigidTransform,
    TetMesh, TriMesh, Volume3,
};
use crate::{Error, Result};

pub const STICK_LENGTH: f64 = 10.0;
pub const STICK_RADIUS: f64 = 1.0;
/// Equatorial radius of the head ellipsoid.
pub const HEAD_RADIUS: f64 = 3.0;
/// Depth by which the stick reaches into the head.
pub const HEAD_EMBED: f64 = 0.5;
/// Head length `r` of the reference joint's first object.
pub const REFERENCE_R: f64 = 8.0;
pub const DEFAULT_LEVEL: u32 = 1;
pub const DEFAULT_SPACING: f64 = 0.5;

/// Object 2 angles of the training motion.
pub const TRAINING_THETA2: [f64; 4] = [PI / 5.0, 2.0 * PI / 5.0, 3.0 * PI / 5.0, 4.0 * PI / 5.0];
/// Object 3 angles (relative to object 2), paired by position with [`TRAINING_THETA2`].
pub const TRAINING_THETA3: [f64; 4] = [PI / 2.0, PI / 3.0, 2.0 * PI / 9.0, PI / 9.0];

/// One lollipop: head length `r` (full polar axis of the head) and mesh
/// resolution level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LollipopSpec {
    pub r: f64,
    pub level: u32,
}

impl LollipopSpec {
    pub fn new(r: f64, level: u32) -> Self {
        Self { r, level }
    }

    fn cells(&self) -> (usize, usize, usize) {
        let n_s = 1usize << self.level;
        (2 * n_s, n_s, 2 * n_s)
    }

    /// `(n_h + 1)³ + (n_s + 1)² (n_z + 1)` with `n_h = n_z = 2^(level+1)`
    /// head and stick-length cells and `n_s = 2^level` stick cross-section cells.
    pub fn vertex_count(&self) -> usize {
        let (n_h, n_s, n_z) = self.cells();
        (n_h + 1).pow(3) + (n_s + 1).pow(2) * (n_z + 1)
    }

    /// `6 n_h³ + 6 n_s² n_z` Kuhn tetrahedra.
    pub fn tet_count(&self) -> usize {
        let (n_h, n_s, n_z) = self.cells();
        6 * n_h.pow(3) + 6 * n_s * n_s * n_z
    }
}

/// Head centre of a lollipop with head length `r`, in the object frame.
pub fn head_center(r: f64) -> Point3 {
    Point3::new(0.0, 0.0, STICK_LENGTH - HEAD_EMBED + 0.5 * r)
}

/// A meshed lollipop in its object frame (stick along +z from the origin).
#[derive(Clone, Debug, PartialEq)]
pub struct Lollipop {
    pub tet: TetMesh,
    /// Domain ids of the surface vertices.
    pub surface_ids: Vec<usize>,
    /// Triangles indexing into `surface_ids`.
    pub triangles: Vec<[usize; 3]>,
    /// Bottom and top head poles.
    pub landmarks: [usize; 2],
}

impl Lollipop {
    pub fn surface(&self) -> TriMesh {
        self.surface_with(&self.tet.vertices)
    }

    pub fn surface_with(&self, points: &[Point3]) -> TriMesh {
        TriMesh {
            vertices: self.surface_ids.iter().map(|&i| points[i]).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn grid_tets(n: [usize; 3], base: usize, tets: &mut Vec<[usize; 4]>) {
    let id = |i: usize, j: usize, k: usize| base + i + (n[0] + 1) * (j + (n[1] + 1) * k);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let c: Vec<usize> = (0..8)
                    .map(|b| id(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1)))
                    .collect();
                for t in KUHN {
                    tets.push(t.map(|a| c[a]));
                }
            }
        }
    }
}

fn unit(i: usize, n: usize) -> f64 {
    2.0 * i as f64 / n as f64 - 1.0
}

/// Structured lollipop mesh. Vertex order (stick grid, then head grid) depends
/// only on the level, so lollipops of equal level are in correspondence.
pub fn lollipop_mesh(spec: &LollipopSpec) -> Result<Lollipop> {
    if !(spec.r > 0.0 && spec.r.is_finite()) {
        return Err(Error::InvalidArgument(format!("lollipop head length must be positive, got {}", spec.r)));
    }
    if spec.level > 5 {
        return Err(Error::InvalidArgument(format!("resolution level {} above 5", spec.level)));
    }
    let (n_h, n_s, n_z) = spec.cells();
    let mut vertices = Vec::with_capacity(spec.vertex_count());
    for k in 0..=n_z {
        for j in 0..=n_s {
            for i in 0..=n_s {
                let (x, y) = (unit(i, n_s), unit(j, n_s));
                // square-to-disc
                let dx = x * (1.0 - 0.5 * y * y).sqrt();
                let dy = y * (1.0 - 0.5 * x * x).sqrt();
                vertices.push(Point3::new(
                    STICK_RADIUS * dx,
                    STICK_RADIUS * dy,
                    STICK_LENGTH * k as f64 / n_z as f64,
                ));
            }
        }
    }
    let head_base = vertices.len();
    let c = head_center(spec.r);
    for k in 0..=n_h {
        for j in 0..=n_h {
            for i in 0..=n_h {
                let (x, y, z) = (unit(i, n_h), unit(j, n_h), unit(k, n_h));
                // cube-to-ball
                let (x2, y2, z2) = (x * x, y * y, z * z);
                let bx = x * (1.0 - 0.5 * y2 - 0.5 * z2 + y2 * z2 / 3.0).sqrt();
                let by = y * (1.0 - 0.5 * z2 - 0.5 * x2 + z2 * x2 / 3.0).sqrt();
                let bz = z * (1.0 - 0.5 * x2 - 0.5 * y2 + x2 * y2 / 3.0).sqrt();
                vertices.push(c + Disp3::new(HEAD_RADIUS * bx, HEAD_RADIUS * by, 0.5 * spec.r * bz));
            }
        }
    }
    let mut tets = Vec::with_capacity(spec.tet_count());
    grid_tets([n_s, n_s, n_z], 0, &mut tets);
    grid_tets([n_h, n_h, n_h], head_base, &mut tets);
    let n = vertices.len();
    let tet = TetMesh::new(vertices, tets, vec![0.0; n])?;
    let faces = tet.boundary_faces();
    let ids: BTreeSet<usize> = faces.iter().flatten().copied().collect();
    let surface_ids: Vec<usize> = ids.into_iter().collect();
    let mut local = vec![usize::MAX; n];
    for (s, &d) in surface_ids.iter().enumerate() {
        local[d] = s;
    }
    let triangles = faces.iter().map(|f| f.map(|i| local[i])).collect();
    let mid = n_h / 2;
    let head_id = |i: usize, j: usize, k: usize| head_base + i + (n_h + 1) * (j + (n_h + 1) * k);
    Ok(Lollipop {
        tet,
        surface_ids,
        triangles,
        landmarks: [head_id(mid, mid, 0), head_id(mid, mid, n_h)],
    })
}

/// Head lengths of the three objects and the yz-plane angles of objects 2
/// and 3 (object 3's angle is relative to object 2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub r: [f64; 3],
    pub theta2: f64,
    pub theta3: f64,
}

impl JointSpec {
    /// The correlated shape triple `(r, 31 − r, 17 − r)`.
    pub fn from_r(r: f64, theta2: f64, theta3: f64) -> Self {
        Self {
            r: [r, 31.0 - r, 17.0 - r],
            theta2,
            theta3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("head lengths must be positive".into()));
        }
        if !(self.theta2.is_finite() && self.theta3.is_finite()) {
            return Err(Error::NonFinite("joint angles"));
        }
        Ok(())
    }
}

/// The reference joint: `r = 8` at the canonical pose.
pub fn reference_spec() -> JointSpec {
    JointSpec::from_r(REFERENCE_R, 0.0, 0.0)
}

/// 15 shape triples × 4 paired poses, shape-major.
pub fn training_joint_specs() -> Vec<JointSpec> {
    let mut out = Vec::with_capacity(60);
    for i in 1..=15 {
        for k in 0..4 {
            out.push(JointSpec::from_r(i as f64, TRAINING_THETA2[k], TRAINING_THETA3[k]));
        }
    }
    out
}

/// Six joints at poses between the training poses (object 2 half-way between
/// consecutive training angles, object 3 half-way between the paired angles).
pub fn held_out_pose_specs() -> Vec<JointSpec> {
    let mut out = Vec::with_capacity(6);
    for r in [5.0, 11.0] {
        for k in 0..3 {
            let t2 = 0.5 * (TRAINING_THETA2[k] + TRAINING_THETA2[k + 1]);
            let t3 = 0.5 * (TRAINING_THETA3[k] + TRAINING_THETA3[k + 1]);
            out.push(JointSpec::from_r(r, t2, t3));
        }
    }
    out
}

/// One posed object of a joint.
#[derive(Clone, Debug, PartialEq)]
pub struct PosedObject {
    pub lollipop: Lollipop,
    /// Object frame to world.
    pub placement: RigidTransform,
    /// Posed domain; intensities are filled by [`assign_intensities`].
    pub tet: TetMesh,
    /// Distance anchor of the renderer.
    pub anchor: Point3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub spec: JointSpec,
    pub level: u32,
    pub objects: Vec<PosedObject>,
}

impl Joint {
    pub fn tets(&self) -> Vec<TetMesh> {
        self.objects.iter().map(|o| o.tet.clone()).collect()
    }

    pub fn placements(&self) -> Vec<RigidTransform> {
        self.objects.iter().map(|o| o.placement).collect()
    }
}

/// Canonical (θ = 0) placements: object 2's stick starts at object 1's head
/// centre and object 3's stick starts at the top end of object 2's stick.
fn canonical_placements(r: &[f64; 3]) -> [RigidTransform; 3] {
    let g2 = RigidTransform::from_translation(head_center(r[0]).coords);
    let g3 = RigidTransform::from_translation(
        g2.apply(&Point3::new(0.0, 0.0, STICK_LENGTH)).coords,
    );
    [RigidTransform::identity(), g2, g3]
}

/// Placements of the three objects: object 2 rotates by `θ2` about its
/// pivot, object 3 by `θ3` about its own pivot in object 2's frame.
pub fn joint_placements(spec: &JointSpec) -> [RigidTransform; 3] {
    let [g1, g2, g3] = canonical_placements(&spec.r);
    let pivot2 = g2.apply(&Point3::origin());
    let pivot3 = g3.apply(&Point3::origin());
    let pose2 = RigidTransform::yz_rotation(spec.theta2, pivot2);
    let pose3 = pose2.compose(&RigidTransform::yz_rotation(spec.theta3, pivot3));
    [g1, pose2.compose(&g2), pose3.compose(&g3)]
}

/// Posed geometry of a joint (intensities zero until assigned).
pub fn generate_joint(spec: &JointSpec, level: u32) -> Result<Joint> {
    spec.validate()?;
    let placements = joint_placements(spec);
    let mut objects = Vec::with_capacity(3);
    for (j, placement) in placements.into_iter().enumerate() {
        let lollipop = lollipop_mesh(&LollipopSpec::new(spec.r[j], level))?;
        let tet = TetMesh {
            vertices: apply_rigid(&placement, &lollipop.tet.vertices),
            tets: lollipop.tet.tets.clone(),
            intensity: vec![0.0; lollipop.tet.vertices.len()],
        };
        let anchor = placement.apply(&head_center(spec.r[j]));
        objects.push(PosedObject {
            lollipop,
            placement,
            tet,
            anchor,
        });
    }
    Ok(Joint {
        spec: *spec,
        level,
        objects,
    })
}

/// Per-voxel distance rendering: inside object `j` the value is the distance
/// to its anchor, 0 elsewhere. Where objects overlap, the lower index wins.
/// The grid covers the joint's bounding box plus two voxels, on the lattice of
/// integer multiples of `spacing`.
pub fn render_volume(joint: &Joint, spacing: f64) -> Result<Volume3> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    let all: Vec<Point3> = joint.objects.iter().flat_map(|o| o.tet.vertices.iter().copied()).collect();
    let (lo, hi) = bounds(&all).ok_or(Error::Empty("joint vertices"))?;
    let margin = 2.0 * spacing;
    let origin = Point3::from((lo.coords - Disp3::repeat(margin)).map(|c| (c / spacing).floor() * spacing));
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = ((hi[a] + margin - origin[a]) / spacing).ceil() as usize + 1;
    }
    let mut vol = Volume3::zeros(dims, [spacing; 3], origin)?;
    let mut owner = vec![usize::MAX; vol.voxels.len()];
    for (j, obj) in joint.objects.iter().enumerate() {
        for t in 0..obj.tet.tets.len() {
            let pts = obj.tet.tet_points(t);
            let Some((tlo, thi)) = bounds(&pts) else { continue };
            let (Some(i0), Some(i1)) = (grid_floor(&vol, &tlo), grid_ceil(&vol, &thi)) else {
                continue;
            };
            for k in i0[2]..=i1[2] {
                for jj in i0[1]..=i1[1] {
                    for i in i0[0]..=i1[0] {
                        let idx = vol.index(i, jj, k);
                        if owner[idx] <= j {
                            continue;
                        }
                        let c = vol.center(i, jj, k);
                        if inside_tet(&pts, &c) {
                            owner[idx] = j;
                            vol.voxels[idx] = (c - obj.anchor).norm();
                        }
                    }
                }
            }
        }
    }
    Ok(vol)
}

const INSIDE_TOL: f64 = -1e-12;

fn inside_tet(pts: &[Point3; 4], p: &Point3) -> bool {
    crate::geometry::barycentric_tet(pts, p).is_some_and(|b| b.iter().all(|w| *w >= INSIDE_TOL))
}

fn bounds(points: &[Point3]) -> Option<(Point3, Point3)> {
    let first = points.first()?;
    let mut lo = *first;
    let mut hi = *first;
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    Some((lo, hi))
}

fn grid_floor(vol: &Volume3, p: &Point3) -> Option<[usize; 3]> {
    let g = vol.to_grid(p);
    let mut out = [0usize; 3];
    for a in 0..3 {
        let v = g[a].ceil().max(0.0);
        if v >= vol.dims[a] as f64 {
            return None;
        }
        out[a] = v as usize;
    }
    Some(out)
}

fn grid_ceil(vol: &Volume3, p: &Point3) -> Option<[usize; 3]> {
    let g = vol.to_grid(p);
    let mut out = [0usize; 3];
    for a in 0..3 {
        let v = g[a].floor().min(vol.dims[a] as f64 - 1.0);
        if v < 0.0 {
            return None;
        }
        out[a] = v as usize;
    }
    Some(out)
}

/// The rendered value of a single point (the per-voxel rule without a grid).
pub fn eval_distance_function(joint: &Joint, x: &Point3) -> f64 {
    for obj in &joint.objects {
        if (0..obj.tet.tets.len()).any(|t| inside_tet(&obj.tet.tet_points(t), x)) {
            return (x - obj.anchor).norm();
        }
    }
    0.0
}

/// Viewing axis of an orthographic projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidArgument(format!("unknown axis {other}"))),
        }
    }
}

/// Ray sums `Σ v · spacing` along `axis`. The image's `u` runs along the
/// lower remaining axis, `v` along the higher.
pub fn drr_line_integrals(volume: &Volume3, axis: Axis) -> Image2 {
    let a = axis.index();
    let (ua, va) = match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (w, h) = (volume.dims[ua], volume.dims[va]);
    let ds = volume.spacing[a];
    let mut pixels = vec![0.0; w * h];
    for k in 0..volume.dims[2] {
        for j in 0..volume.dims[1] {
            for i in 0..volume.dims[0] {
                let ijk = [i, j, k];
                pixels[ijk[ua] + w * ijk[va]] += volume.get(i, j, k) * ds;
            }
        }
    }
    Image2 {
        width: w,
        height: h,
        pixels,
    }
}

/// Line integrals normalised to `[0, 1]`.
pub fn drr_project(volume: &Volume3, axis: Axis) -> Image2 {
    drr_line_integrals(volume, axis).normalized()
}

/// Nearest-voxel value at every vertex of `mesh`.
pub fn tet_intensity_correspondence(volume: &Volume3, mesh: &TetMesh) -> Result<Vec<f64>> {
    mesh.vertices
        .iter()
        .map(|p| volume.sample_nearest(p).ok_or(Error::OutOfDomain))
        .collect()
}

/// Fills every object's vertex intensities from `volume`.
pub fn assign_intensities(joint: &mut Joint, volume: &Volume3) -> Result<()> {
    for obj in &mut joint.objects {
        obj.tet.intensity = tet_intensity_correspondence(volume, &obj.tet)?;
    }
    Ok(())
}

/// Generates, renders and samples one joint.
pub fn synthesize_joint(spec: &JointSpec, level: u32, spacing: f64) -> Result<(Joint, Volume3)> {
    let mut joint = generate_joint(spec, level)?;
    let vol = render_volume(&joint, spacing)?;
    assign_intensities(&mut joint, &vol)?;
    Ok((joint, vol))
}

/// Model reference of a (canonical) joint: its posed, intensity-bearing
/// domains with the lollipop surfaces and head-pole landmarks.
pub fn reference_from_joint(joint: &Joint) -> Result<MultiObjectReference> {
    let objects = joint
        .objects
        .iter()
        .enumerate()
        .map(|(j, o)| {
            ReferenceObject::new(
                format!("object{}", j + 1),
                o.tet.clone(),
                o.lollipop.surface_ids.clone(),
                o.lollipop.triangles.clone(),
                o.lollipop.landmarks.to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    MultiObjectReference::new(objects)
}

/// Training joints and the reference, generated in memory.
pub struct LollipopData {
    pub reference: MultiObjectReference,
    pub specs: Vec<JointSpec>,
    /// Per joint, per object posed tet meshes with sampled intensities.
    pub samples: Vec<Vec<TetMesh>>,
}

/// Generates the reference and the joints for `specs` (in parallel).
pub fn generate_dataset(specs: &[JointSpec], level: u32, spacing: f64) -> Result<LollipopData> {
    use rayon::prelude::*;
    let (ref_joint, _) = synthesize_joint(&reference_spec(), level, spacing)?;
    let reference = reference_from_joint(&ref_joint)?;
    let samples = specs
        .par_iter()
        .map(|s| synthesize_joint(s, level, spacing).map(|(j, _)| j.tets()))
        .collect::<Result<Vec<_>>>()?;
    Ok(LollipopData {
        reference,
        specs: specs.to_vec(),
        samples,
    })
}

/// Ground truth of one generated joint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointRecord {
    pub id: usize,
    pub r: [f64; 3],
    pub theta2: f64,
    pub theta3: f64,
    /// Object-frame-to-world transforms, rotation row-major then translation.
    pub placements: Vec<[f64; 12]>,
    pub anchors: Vec<[f64; 3]>,
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub r: [f64; 3],
    pub objects: Vec<ReferenceObjectRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceObjectRecord {
    pub name: String,
    pub mesh: String,
    pub surface_ids: Vec<usize>,
    pub triangles: Vec<[usize; 3]>,
    pub landmarks: Vec<usize>,
}

/// `dataset.json` of a generated dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub level: u32,
    pub spacing: f64,
    pub reference: ReferenceRecord,
    pub joints: Vec<JointRecord>,
}

pub const DATASET_MANIFEST: &str = "dataset.json";

/// Writes a dataset directory: `reference/`, one `joint_NNN/` per joint with
/// per-object tet meshes (intensity per vertex) and surfaces, optionally the
/// rendered volume, and `dataset.json` with the ground truth.
pub fn write_dataset(
    dir: &Path,
    specs: &[JointSpec],
    level: u32,
    spacing: f64,
    volumes: bool,
) -> Result<DatasetManifest> {
    use rayon::prelude::*;
    let (ref_joint, ref_vol) = synthesize_joint(&reference_spec(), level, spacing)?;
    let mut ref_objects = Vec::new();
    for (j, o) in ref_joint.objects.iter().enumerate() {
        let mesh = format!("reference/object{}.ply", j + 1);
        write_tet_mesh(&dir.join(&mesh), &o.tet, &o.surface_faces())?;
        ref_objects.push(ReferenceObjectRecord {
            name: format!("object{}", j + 1),
            mesh,
            surface_ids: o.lollipop.surface_ids.clone(),
            triangles: o.lollipop.triangles.clone(),
            landmarks: o.lollipop.landmarks.to_vec(),
        });
    }
    if volumes {
        write_volume(&dir.join("reference/volume"), &ref_vol)?;
    }
    let joints = specs
        .par_iter()
        .enumerate()
        .map(|(id, spec)| -> Result<JointRecord> {
            let (joint, vol) = synthesize_joint(spec, level, spacing)?;
            let sub = format!("joint_{id:03}");
            for (j, o) in joint.objects.iter().enumerate() {
                write_tet_mesh(&dir.join(&sub).join(format!("object{}.ply", j + 1)), &o.tet, &o.surface_faces())?;
                write_tri_mesh(
                    &dir.join(&sub).join(format!("object{}_surface.ply", j + 1)),
                    &o.lollipop.surface_with(&o.tet.vertices),
                )?;
            }
            if volumes {
                write_volume(&dir.join(&sub).join("volume"), &vol)?;
            }
            Ok(JointRecord {
                id,
                r: spec.r,
                theta2: spec.theta2,
                theta3: spec.theta3,
                placements: joint.placements().iter().map(RigidTransform::to_array).collect(),
                anchors: joint.objects.iter().map(|o| [o.anchor.x, o.anchor.y, o.anchor.z]).collect(),
                dir: sub,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        version: crate::VERSION.to_string(),
        level,
        spacing,
        reference: ReferenceRecord {
            r: reference_spec().r,
            objects: ref_objects,
        },
        joints,
    };
    write_atomic(
        &dir.join(DATASET_MANIFEST),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(manifest)
}

impl PosedObject {
    /// Surface triangles in domain ids (for writing tet meshes).
    pub fn surface_faces(&self) -> Vec<[usize; 3]> {
        self.lollipop
            .triangles
            .iter()
            .map(|t| t.map(|s| self.lollipop.surface_ids[s]))
            .collect()
    }
}

/// A dataset directory read back into memory.
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub reference: MultiObjectReference,
    pub samples: Vec<Vec<TetMesh>>,
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let text = std::fs::read_to_string(dir.join(DATASET_MANIFEST))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let objects = manifest
        .reference
        .objects
        .iter()
        .map(|o| {
            let (tet, _) = read_tet_mesh(&dir.join(&o.mesh))?;
            ReferenceObject::new(
                o.name.clone(),
                tet,
                o.surface_ids.clone(),
                o.triangles.clone(),
                o.landmarks.clone(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = MultiObjectReference::new(objects)?;
    let samples = manifest
        .joints
        .iter()
        .map(|jr| {
            (1..=reference.n_objects())
                .map(|j| read_tet_mesh(&dir.join(&jr.dir).join(format!("object{j}.ply"))).map(|(t, _)| t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedDataset {
        manifest,
        reference,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_closed_form() {
        for level in 0..3 {
            let spec = LollipopSpec::new(4.0, level);
            let l = lollipop_mesh(&spec).unwrap();
            assert_eq!(l.tet.vertices.len(), spec.vertex_count());
            assert_eq!(l.tet.tets.len(), spec.tet_count());
        }
        assert_eq!(LollipopSpec::new(1.0, 2).vertex_count(), 9 * 9 * 9 + 5 * 5 * 9);
    }

    #[test]
    fn head_scales_with_r() {
        let a = lollipop_mesh(&LollipopSpec::new(1.0, 1)).unwrap();
        let b = lollipop_mesh(&LollipopSpec::new(2.0, 1)).unwrap();
        assert_eq!(a.tet.tets, b.tet.tets);
        assert_eq!(a.surface_ids, b.surface_ids);
        let head0 = LollipopSpec::new(1.0, 1).vertex_count() - 5usize.pow(3);
        for i in head0..a.tet.vertices.len() {
            let da = a.tet.vertices[i] - head_center(1.0);
            let db = b.tet.vertices[i] - head_center(2.0);
            assert!((db.x - da.x).abs() < 1e-12 && (db.y - da.y).abs() < 1e-12);
            assert!((db.z - 2.0 * da.z).abs() < 1e-12);
        }
        let [lo, hi] = b.landmarks;
        assert!((b.tet.vertices[hi] - b.tet.vertices[lo]).norm() - 2.0 < 1e-12);
    }

    #[test]
    fn mesh_is_deterministic_and_valid() {
        let s = LollipopSpec::new(7.5, 1);
        let a = lollipop_mesh(&s).unwrap();
        assert_eq!(a, lollipop_mesh(&s).unwrap());
        for t in 0..a.tet.tets.len() {
            let p = a.tet.tet_points(t);
            let vol = (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0]));
            assert!(vol.abs() > 1e-9);
        }
        assert!(a.surface().check_non_degenerate().is_ok());
        assert!(lollipop_mesh(&LollipopSpec::new(0.0, 1)).is_err());
    }

    #[test]
    fn training_specs() {
        let s = training_joint_specs();
        assert_eq!(s.len(), 60);
        assert_eq!(s[0].r, [1.0, 30.0, 16.0]);
        assert_eq!(s[59].r, [15.0, 16.0, 2.0]);
        assert_eq!(s[5].theta2, TRAINING_THETA2[1]);
        assert_eq!(s[5].theta3, TRAINING_THETA3[1]);
    }

    #[test]
    fn canonical_joint_has_unrotated_objects() {
        let j = generate_joint(&JointSpec::from_r(8.0, 0.0, 0.0), 0).unwrap();
        for o in &j.objects {
            assert_eq!(*o.placement.rotation(), nalgebra::Matrix3::identity());
        }
        assert_eq!(j.objects[1].placement.translation().z, head_center(8.0).z);
    }

    #[test]
    fn angles_recovered_by_procrustes() {
        let canon = generate_joint(&JointSpec::from_r(6.0, 0.0, 0.0), 1).unwrap();
        let posed = generate_joint(&JointSpec::from_r(6.0, 0.9, 0.4), 1).unwrap();
        let h2 = crate::pose::procrustes_align(&canon.objects[1].tet.vertices, &posed.objects[1].tet.vertices).unwrap();
        assert!((h2.yz_angle() - 0.9).abs() < 1e-9);
        let h3 = crate::pose::procrustes_align(&canon.objects[2].tet.vertices, &posed.objects[2].tet.vertices).unwrap();
        assert!((h3.yz_angle() - 1.3).abs() < 1e-9);
    }

    #[test]
    fn drr_of_single_voxel() {
        let mut v = Volume3::zeros([3, 4, 5], [0.5; 3], Point3::origin()).unwrap();
        let idx = v.index(1, 2, 3);
        v.voxels[idx] = 4.0;
        let img = drr_line_integrals(&v, Axis::X);
        assert_eq!((img.width, img.height), (4, 5));
        assert_eq!(img.get(2, 3), 2.0);
        assert_eq!(img.pixels.iter().filter(|p| **p != 0.0).count(), 1);
        let z = Volume3::zeros([3, 3, 3], [1.0; 3], Point3::origin()).unwrap();
        assert!(drr_project(&z, Axis::Y).pixels.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn intensity_lookup() {
        let v = Volume3::new([2, 1, 1], [1.0; 3], Point3::origin(), vec![3.0, 5.0]).unwrap();
        let m = TetMesh::new(
            vec![Point3::new(1.0, 0.0, 0.0), Point3::new(0.2, 0.1, 0.0), Point3::origin(), Point3::origin()],
            vec![],
            vec![0.0; 4],
        )
        .unwrap();
        assert_eq!(tet_intensity_correspondence(&v, &m).unwrap(), vec![5.0, 3.0, 3.0, 3.0]);
        let out = TetMesh::new(vec![Point3::new(9.0, 0.0, 0.0)], vec![], vec![0.0]).unwrap();
        assert!(tet_intensity_correspondence(&v, &out).is_err());
    }
}
