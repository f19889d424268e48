use std::path::{Path, PathBuf};

use clap::Args;
use dmfc_core::fitting::{fit as run_fit, ChainConfig, Observation, SurfaceTarget};
use dmfc_core::geometry::io::{read_volume, write_atomic, write_tet_mesh, write_tri_mesh};
use dmfc_core::metrics::{correlation_report, correlation_table, generality, specificity, training_quantities};
use dmfc_core::model::{
    assemble_training_functions, load_model, permute_poses, save_model, ClassWeights, FeatureClass,
    JointInstance, PointObservation, Rank, Weighting,
};
use dmfc_core::synthetic::{
    drr_line_integrals, held_out_pose_specs, load_dataset, training_joint_specs, write_dataset, Axis,
    LoadedDataset, DEFAULT_LEVEL, DEFAULT_SPACING,
};
use dmfc_core::{Coefficients, DmfcGpm, PoseCoding, TrainingSet, VERSION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{CliError, DATA_DIR_ENV};

type CmdResult = Result<Value, CliError>;

fn data_dir(given: Option<PathBuf>) -> PathBuf {
    given
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("dmfc-data"))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Usage(format!("invalid {what} `{t}`"))))
        .collect()
}

fn parse_weights(s: &str) -> Result<Weighting, CliError> {
    if s.eq_ignore_ascii_case("balanced") {
        return Ok(Weighting::Balanced);
    }
    match parse_list::<f64>(s, "class weight")?.as_slice() {
        [shape, pose, intensity] => Ok(Weighting::Fixed(ClassWeights {
            shape: *shape,
            pose: *pose,
            intensity: *intensity,
        })),
        _ => Err(CliError::Usage(format!("weights must be `balanced` or `s,p,i`, got `{s}`"))),
    }
}

fn parse_rank(s: &str) -> Result<Rank, CliError> {
    match s {
        "full" => Ok(Rank::Full),
        "auto" => Ok(Rank::Explained(0.98)),
        _ => {
            if let Ok(m) = s.parse::<usize>() {
                Ok(Rank::Fixed(m))
            } else {
                match s.parse::<f64>() {
                    Ok(f) if f > 0.0 && f <= 1.0 => Ok(Rank::Explained(f)),
                    _ => Err(CliError::Usage(format!(
                        "rank must be `full`, `auto`, a count or a fraction in (0, 1], got `{s}`"
                    ))),
                }
            }
        }
    }
}

fn parse_coding(s: &str) -> Result<PoseCoding, CliError> {
    s.parse().map_err(|e: dmfc_core::Error| CliError::Usage(e.to_string()))
}

fn model_summary(m: &DmfcGpm) -> Value {
    let ve = m.variance_explained();
    json!({
        "coding": m.coding,
        "rank": m.rank(),
        "dim": m.dim(),
        "class_weights": m.class_weights,
        "variance_explained": ve.iter().take(3).collect::<Vec<_>>(),
    })
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Output directory [default: $DMFC_DATA_DIR or ./dmfc-data].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `training` (60 training joints) or `held-out` (6 unseen pose pairs).
    #[arg(long, default_value = "training")]
    pub preset: String,
    /// Mesh subdivision level.
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub level: u32,
    /// Voxel spacing of the rendered volumes.
    #[arg(long, default_value_t = DEFAULT_SPACING)]
    pub spacing: f64,
    /// Skip writing volumes.
    #[arg(long)]
    pub no_volumes: bool,
}

pub fn gen_data(a: GenDataArgs) -> CmdResult {
    let specs = match a.preset.as_str() {
        "training" => training_joint_specs(),
        "held-out" => held_out_pose_specs(),
        other => return Err(CliError::Usage(format!("unknown preset `{other}`"))),
    };
    let out = data_dir(a.out);
    let manifest = write_dataset(&out, &specs, a.level, a.spacing, !a.no_volumes)?;
    Ok(json!({
        "command": "gen-data",
        "version": VERSION,
        "out": path_str(&out),
        "preset": a.preset,
        "joints": manifest.joints.len(),
        "level": a.level,
        "spacing": a.spacing,
    }))
}

#[derive(Args, Debug)]
pub struct ModelSpecArgs {
    /// Dataset directory [default: $DMFC_DATA_DIR or ./dmfc-data].
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pose coding: edr, sr or pdm.
    #[arg(long, default_value = "edr")]
    pub coding: String,
    /// `balanced` or explicit `shape,pose,intensity` weights.
    #[arg(long, default_value = "balanced")]
    pub weights: String,
    /// `full`, `auto` (98% variance), a component count or a variance fraction.
    #[arg(long, default_value = "full")]
    pub rank: String,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

fn training_set(a: &ModelSpecArgs) -> Result<(TrainingSet, PathBuf), CliError> {
    let dir = data_dir(a.data.clone());
    let data = load_dataset(&dir)?;
    let ts = assemble_training_functions(&data.samples, &data.reference, parse_coding(&a.coding)?)?;
    Ok((ts, dir))
}

fn build_and_save(ts: &TrainingSet, a: &ModelSpecArgs) -> Result<DmfcGpm, CliError> {
    let m = DmfcGpm::build(ts, parse_weights(&a.weights)?, parse_rank(&a.rank)?)?;
    save_model(&a.out, &m)?;
    Ok(m)
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub spec: ModelSpecArgs,
}

pub fn build(a: BuildArgs) -> CmdResult {
    let (ts, dir) = training_set(&a.spec)?;
    let m = build_and_save(&ts, &a.spec)?;
    Ok(json!({
        "command": "build",
        "version": VERSION,
        "data": path_str(&dir),
        "out": path_str(&a.spec.out),
        "training_functions": ts.len(),
        "model": model_summary(&m),
    }))
}

#[derive(Args, Debug)]
pub struct PermuteArgs {
    #[command(flatten)]
    pub spec: ModelSpecArgs,
    /// Keep pose pairs only between samples whose shape fields differ by at
    /// most this RMS distance.
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn permute(a: PermuteArgs) -> CmdResult {
    if a.threshold.is_some_and(|t| !(t >= 0.0)) {
        return Err(CliError::Usage("threshold must be non-negative".into()));
    }
    let (ts, dir) = training_set(&a.spec)?;
    let permuted = permute_poses(&ts, a.threshold);
    let m = build_and_save(&permuted, &a.spec)?;
    Ok(json!({
        "command": "permute",
        "version": VERSION,
        "data": path_str(&dir),
        "out": path_str(&a.spec.out),
        "training_functions": ts.len(),
        "permuted_functions": permuted.len(),
        "model": model_summary(&m),
    }))
}

#[derive(Serialize)]
struct InstanceManifest<'a> {
    version: &'a str,
    theta: &'a [f64],
    /// Per object, rotation row-major then translation.
    transforms: Vec<[f64; 12]>,
    objects: Vec<String>,
}

fn write_instance(dir: &Path, model: &DmfcGpm, theta: &Coefficients, inst: &JointInstance) -> Result<(), CliError> {
    let mut names = Vec::new();
    for (j, (obj, refo)) in inst.objects.iter().zip(&model.reference.objects).enumerate() {
        let faces: Vec<[usize; 3]> = refo.triangles.iter().map(|t| t.map(|s| refo.surface_ids[s])).collect();
        let name = format!("object{}", j + 1);
        write_tet_mesh(&dir.join(format!("{name}.ply")), &obj.tet, &faces)?;
        write_tri_mesh(&dir.join(format!("{name}_surface.ply")), &obj.surface)?;
        names.push(name);
    }
    let manifest = InstanceManifest {
        version: VERSION,
        theta: theta.as_slice(),
        transforms: inst.objects.iter().map(|o| o.transform.to_array()).collect(),
        objects: names,
    };
    write_atomic(&dir.join("instance.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated coefficients (missing trailing ones are 0); `0` gives
    /// the mean instance.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Draw θ ~ N(0, I) with this seed instead of `--theta`.
    #[arg(long, conflicts_with = "theta")]
    pub seed: Option<u64>,
    /// Output directory for the instance meshes.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn sample(a: SampleArgs) -> CmdResult {
    let m = load_model(&a.model)?;
    let (theta, inst) = match (&a.theta, a.seed) {
        (Some(t), None) => {
            let th = Coefficients(parse_list(t, "coefficient")?);
            let inst = m.sample(&th)?;
            (th, inst)
        }
        (None, Some(seed)) => m.random_sample(seed)?,
        _ => return Err(CliError::Usage("give exactly one of --theta or --seed".into())),
    };
    write_instance(&a.out, &m, &theta, &inst)?;
    Ok(json!({
        "command": "sample",
        "version": VERSION,
        "out": path_str(&a.out),
        "theta": theta.as_slice(),
        "objects": inst.objects.len(),
    }))
}

#[derive(Args, Debug)]
pub struct MarginalizeArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Objects to keep (1-based, comma-separated).
    #[arg(long)]
    pub objects: Option<String>,
    /// Feature classes to keep: shape, pose, intensity.
    #[arg(long)]
    pub classes: Option<String>,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn marginalize(a: MarginalizeArgs) -> CmdResult {
    if a.objects.is_none() && a.classes.is_none() {
        return Err(CliError::Usage("give --objects and/or --classes".into()));
    }
    let mut m = load_model(&a.model)?;
    if let Some(objs) = &a.objects {
        let ids: Vec<usize> = parse_list(objs, "object number")?;
        let n = m.reference.n_objects();
        let mut subset = Vec::new();
        for id in ids {
            if id == 0 || id > n {
                return Err(CliError::Usage(format!("object {id} not in 1..={n}")));
            }
            subset.extend(m.reference.range(id - 1));
        }
        subset.sort_unstable();
        subset.dedup();
        m = m.marginalize_domain(&subset)?;
    }
    if let Some(cls) = &a.classes {
        let classes: Vec<FeatureClass> = parse_list(cls, "feature class")?;
        m = m.marginalize_class(&classes)?;
    }
    save_model(&a.out, &m)?;
    Ok(json!({
        "command": "marginalize",
        "version": VERSION,
        "out": path_str(&a.out),
        "model": model_summary(&m),
    }))
}

#[derive(Args, Debug)]
pub struct PosteriorArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// JSON list of point observations
    /// (`{"point": i, "shape": [x,y,z], "pose": [x,y,z], "intensity": v}`).
    #[arg(long)]
    pub observations: PathBuf,
    /// Observation noise variance (0 = noise-free).
    #[arg(long, default_value_t = 0.01)]
    pub sigma2: f64,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn posterior(a: PosteriorArgs) -> CmdResult {
    let m = load_model(&a.model)?;
    let obs: Vec<PointObservation> = serde_json::from_str(&std::fs::read_to_string(&a.observations)?)?;
    let post = m.posterior(&obs, a.sigma2)?;
    save_model(&a.out, &post)?;
    Ok(json!({
        "command": "posterior",
        "version": VERSION,
        "out": path_str(&a.out),
        "observations": obs.len(),
        "model": model_summary(&post),
    }))
}

/// Surface observation file of `fit --surface`.
#[derive(Deserialize)]
struct SurfaceFile {
    targets: Vec<Option<SurfaceTarget>>,
    sigma: f64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Observed volume (`.json` header or `.raw` data path).
    #[arg(long, conflicts_with = "surface")]
    pub volume: Option<PathBuf>,
    /// JSON surface observation (`{"targets": [{"points": [...]}|null], "sigma": s}`).
    #[arg(long)]
    pub surface: Option<PathBuf>,
    /// Intensity noise scale for volumes [default: 10% of the value range].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Proposals per chain.
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    /// Independent chains run in parallel.
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (fitted instance and fit.json).
    #[arg(long)]
    pub out: PathBuf,
}

fn volume_observation(path: &Path, sigma: Option<f64>) -> Result<Observation, CliError> {
    let volume = read_volume(path)?;
    Ok(match sigma {
        Some(sigma) => Observation::Volume { volume, sigma },
        None => Observation::volume_default(volume)?,
    })
}

pub fn fit(a: FitArgs) -> CmdResult {
    let m = load_model(&a.model)?;
    let obs = match (&a.volume, &a.surface) {
        (Some(v), None) => volume_observation(v, a.sigma)?,
        (None, Some(s)) => {
            let f: SurfaceFile = serde_json::from_str(&std::fs::read_to_string(s)?)?;
            Observation::Surface {
                targets: f.targets,
                sigma: a.sigma.unwrap_or(f.sigma),
            }
        }
        _ => return Err(CliError::Usage("give exactly one of --volume or --surface".into())),
    };
    let res = run_fit(&m, &obs, &ChainConfig::new(a.iterations, a.seed), a.chains)?;
    write_instance(&a.out, &m, &res.best, &res.instance)?;
    let chains: Vec<Value> = res
        .chains
        .iter()
        .map(|c| {
            json!({
                "seed": c.seed,
                "accepted": c.states.len(),
                "acceptance_rate": c.acceptance_rate(),
                "filter_counts": c.filter_counts,
                "best_log_posterior": c.states.iter().map(|s| s.1).fold(c.start.1, f64::max),
            })
        })
        .collect();
    let record = json!({
        "version": VERSION,
        "best": res.best.as_slice(),
        "best_log_posterior": res.best_log_posterior,
        "iterations": a.iterations,
        "chains": chains,
    });
    write_atomic(&a.out.join("fit.json"), serde_json::to_string_pretty(&record)?.as_bytes())?;
    Ok(json!({
        "command": "fit",
        "version": VERSION,
        "out": path_str(&a.out),
        "chains": a.chains,
        "iterations": a.iterations,
        "best_log_posterior": res.best_log_posterior,
    }))
}

#[derive(Args, Debug)]
pub struct EvalCorrelationsArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Number of random model instances.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset directory for the training row (optional).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for correlations.json / correlations.csv.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn eval_correlations(a: EvalCorrelationsArgs) -> CmdResult {
    let m = load_model(&a.model)?;
    let model_row = correlation_report(&m, a.samples, a.seed)?;
    let training_row = match &a.data {
        Some(d) => {
            let data = load_dataset(d)?;
            Some(correlation_table(&training_quantities(&data.reference, &data.samples)?)?)
        }
        None => None,
    };
    let mut csv = String::from("row,a,b,abs_r,r\n");
    for (row, rep) in [("model", Some(&model_row)), ("training", training_row.as_ref())] {
        if let Some(rep) = rep {
            for e in &rep.entries {
                csv.push_str(&format!("{row},{},{},{},{}\n", e.a, e.b, e.value, e.signed));
            }
        }
    }
    let record = json!({
        "version": VERSION,
        "samples": a.samples,
        "seed": a.seed,
        "model": model_row,
        "training": training_row,
    });
    write_atomic(&a.out.join("correlations.json"), serde_json::to_string_pretty(&record)?.as_bytes())?;
    write_atomic(&a.out.join("correlations.csv"), csv.as_bytes())?;
    let table: serde_json::Map<String, Value> = model_row
        .entries
        .iter()
        .map(|e| (format!("{}_{}", e.a, e.b), json!(e.value)))
        .collect();
    Ok(json!({
        "command": "eval-correlations",
        "version": VERSION,
        "out": path_str(&a.out),
        "samples": a.samples,
        "abs_r": table,
    }))
}

fn dataset_volumes(dir: &Path, sigma: Option<f64>) -> Result<Vec<Observation>, CliError> {
    let LoadedDataset { manifest, .. } = load_dataset(dir)?;
    manifest
        .joints
        .iter()
        .map(|j| volume_observation(&dir.join(&j.dir).join("volume.json"), sigma))
        .collect()
}

#[derive(Args, Debug)]
pub struct EvalSpecgenArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset with volumes of the modelled (held-in) joints.
    #[arg(long)]
    pub held_in: PathBuf,
    /// Dataset with volumes of unseen joints.
    #[arg(long)]
    pub held_out: PathBuf,
    /// Random instances for specificity.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Proposals per chain for generality fits.
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise scale for the volume likelihood [default: 10% of each volume's range].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Output directory (specgen.json, specificity.csv, generality.csv).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn eval_specgen(a: EvalSpecgenArgs) -> CmdResult {
    let m = load_model(&a.model)?;
    let held_in = dataset_volumes(&a.held_in, a.sigma)?;
    let held_out = dataset_volumes(&a.held_out, a.sigma)?;
    let spec = specificity(&m, &held_in, a.samples, a.seed)?;
    let gen = generality(&m, &held_out, &ChainConfig::new(a.iterations, a.seed), a.chains)?;
    let record = json!({
        "version": VERSION,
        "specificity": spec.per_object,
        "generality": gen.per_object,
        "specificity_median": spec.medians(),
        "generality_median": gen.medians(),
    });
    write_atomic(&a.out.join("specgen.json"), serde_json::to_string_pretty(&record)?.as_bytes())?;
    write_atomic(&a.out.join("specificity.csv"), spec.to_csv().as_bytes())?;
    write_atomic(&a.out.join("generality.csv"), gen.to_csv().as_bytes())?;
    Ok(json!({
        "command": "eval-specgen",
        "version": VERSION,
        "out": path_str(&a.out),
        "specificity_median": spec.medians(),
        "generality_median": gen.medians(),
    }))
}

#[derive(Args, Debug)]
pub struct ProjectDrrArgs {
    /// Volume (`.json` header or `.raw` data path).
    #[arg(long)]
    pub volume: PathBuf,
    /// Projection axis: x, y or z.
    #[arg(long, default_value = "x")]
    pub axis: String,
    /// Output 16-bit binary PGM (normalised to the full range).
    #[arg(long)]
    pub out: PathBuf,
}

fn pgm16(w: usize, h: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for v in values {
        out.extend_from_slice(&((v.clamp(0.0, 1.0) * 65535.0).round() as u16).to_be_bytes());
    }
    out
}

pub fn project_drr(a: ProjectDrrArgs) -> CmdResult {
    let axis: Axis = a.axis.parse().map_err(|e: dmfc_core::Error| CliError::Usage(e.to_string()))?;
    let vol = read_volume(&a.volume)?;
    let raw = drr_line_integrals(&vol, axis);
    let max = raw.pixels.iter().copied().fold(0.0, f64::max);
    let img = raw.normalized();
    write_atomic(&a.out, &pgm16(img.width, img.height, &img.pixels))?;
    Ok(json!({
        "command": "project-drr",
        "version": VERSION,
        "out": path_str(&a.out),
        "width": img.width,
        "height": img.height,
        "max_line_integral": max,
    }))
}
