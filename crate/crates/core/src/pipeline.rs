//! File-level workflows shared by the command line front end and the tests.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adjoint::{fd_gradient_check, FdReport, ReducedObjective};
use crate::discretization::{CgVectorField, GridMesh};
use crate::error::{Error, Result};
use crate::flowmap::{
    ball_mesh, transform_mesh, AffineMap, Backend, Direction, FlowConfig, MeshTransform,
    SimplicialMesh, TransformResult,
};
use crate::io::{
    crop_and_pad, field_dims, make_synthetic, normalize_percentile, read_affine, read_cg_field,
    read_image, write_cg_field, write_dg_field, write_image, write_mesh, write_pgm16,
    write_trace_csv, CropRecord, GroundTruth, ImageVolume, RunConfig, SyntheticCase,
    SyntheticParams,
};
use crate::objective::{default_delta, ObjectiveConfig};
use crate::optimize::{register_multistage, RegistrationResult, StageConfig};
use crate::transport::{solve_transport, CflReport, TransportProblem};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "velocities.json";

/// Index of the velocity files written by a registration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityManifest {
    /// Velocity files in stage order, relative to the manifest.
    pub files: Vec<String>,
    /// Flow time of each stage.
    pub final_times: Vec<f64>,
    /// Crop applied to the images before registration.
    pub crop: Option<CropRecord>,
}

/// Loads input and target, then crops and normalizes them as configured.
pub fn prepare_images(cfg: &RunConfig) -> Result<(ImageVolume, ImageVolume, Option<CropRecord>)> {
    let mut input = read_image(&cfg.input)?;
    let mut target = read_image(&cfg.target)?;
    if input.dims() != target.dims() {
        return Err(Error::invalid(format!(
            "input {:?} and target {:?} differ in size",
            input.dims(),
            target.dims()
        )));
    }
    let mut crop = None;
    if cfg.crop {
        let (a, b, rec) = crop_and_pad(&input, &target)?;
        input = a;
        target = b;
        crop = Some(rec);
    }
    if let Some([lo, hi]) = cfg.normalize {
        input = normalize_percentile(&input, lo, hi)?;
        target = normalize_percentile(&target, lo, hi)?;
    }
    Ok((input, target, crop))
}

#[derive(Debug)]
pub struct RegistrationRun {
    pub mesh: GridMesh<f64>,
    pub result: RegistrationResult<f64>,
    pub crop: Option<CropRecord>,
    pub trace_path: PathBuf,
}

fn stage_file(prefix: &str, stage: usize) -> String {
    format!("{prefix}_{stage:02}.json")
}

/// Runs the configured multi-stage registration and writes velocities,
/// deformed images, the trace CSV, a velocity manifest and a summary.
pub fn run_registration(cfg: &RunConfig) -> Result<RegistrationRun> {
    let (input, target, crop) = prepare_images(cfg)?;
    let mesh = GridMesh::new(input.grid()?)?;
    let phi_a = input.to_dg(&mesh)?;
    let phi_e = target.to_dg(&mesh)?;
    let result = register_multistage(&mesh, &phi_a, &phi_e, &cfg.stages)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut stages = Vec::new();
    for (i, s) in result.stages.iter().enumerate() {
        let k = i + 1;
        let vname = stage_file("velocity", k);
        write_cg_field(&out.join(&vname), &s.velocity)?;
        write_dg_field(&out.join(stage_file("deformed", k)), &s.deformed)?;
        write_image(
            &out.join(stage_file("image", k)),
            &ImageVolume::from_dg(&s.deformed, &mesh)?,
        )?;
        files.push(vname);
        stages.push(json!({
            "stage": k,
            "status": s.status.as_str(),
            "iterations": s.trace.len(),
            "evaluations": s.evaluations,
            "delta": s.delta,
            "initial_objective": s.initial.objective,
            "final_objective": s.last.objective,
            "final_mismatch": s.last.mismatch,
            "final_regularizer": s.last.regularizer,
            "final_l2": s.last.l2_discrepancy,
        }));
    }
    let manifest = VelocityManifest {
        files,
        final_times: cfg.stages.iter().map(|s| s.final_time).collect(),
        crop: crop.clone(),
    };
    fs::write(
        out.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    let trace_path = out.join(TRACE_FILE);
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &result.trace())?;
    fs::write(&trace_path, buf)?;
    let summary = json!({
        "dims": input.dims(),
        "crop": crop,
        "initial_l2": result.initial_l2,
        "final_l2": result.final_l2,
        "relative_l2": result.relative_discrepancy(),
        "initial_tukey": result.initial_tukey,
        "final_tukey": result.final_tukey,
        "stages": stages,
    });
    fs::write(
        out.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(RegistrationRun {
        mesh,
        result,
        crop,
        trace_path,
    })
}

/// Finite-difference check of the first stage's reduced gradient at a random
/// control, along `dirs` random directions (seeded by the config).
pub fn run_gradcheck(cfg: &RunConfig, dirs: usize, steps: &[f64]) -> Result<Vec<FdReport>> {
    if dirs == 0 {
        return Err(Error::invalid("gradcheck needs at least one direction"));
    }
    let (input, target, _) = prepare_images(cfg)?;
    let mesh = GridMesh::new(input.grid()?)?;
    let phi_a = input.to_dg(&mesh)?;
    let phi_e = target.to_dg(&mesh)?;
    let stage: &StageConfig<f64> = &cfg.stages[0];
    let delta = stage.delta.unwrap_or_else(|| default_delta(phi_e.coeffs()));
    let obj = ReducedObjective::new(
        &mesh,
        &phi_a,
        &phi_e,
        stage.transport(),
        ObjectiveConfig::new(delta, stage.gamma, stage.tukey_c)?,
        stage.smoother(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = obj.control_len();
    let mut normal = |scale: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect::<Vec<f64>>()
    };
    let v_hat = normal(0.05);
    (0..dirs)
        .map(|_| {
            let dir = normal(1.0);
            fd_gradient_check(&obj, &v_hat, &dir, steps)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TransportRun {
    pub image: ImageVolume,
    pub field: crate::discretization::DgScalarField<f64>,
    pub cfl: CflReport,
}

/// Single forward transport of an image file by a velocity field file.
pub fn run_transport(
    image: &Path,
    velocity: &Path,
    steps: usize,
    epsilon: f64,
    final_time: f64,
) -> Result<TransportRun> {
    let img = read_image(image)?;
    let mesh = GridMesh::new(img.grid()?)?;
    let v = read_cg_field(velocity, &mesh)?;
    let v = if v.dirichlet_zero() {
        v
    } else {
        return Err(Error::invalid(
            "transport velocity must vanish on the boundary",
        ));
    };
    let problem = TransportProblem::new(v, final_time, steps, epsilon)?;
    let phi0 = img.to_dg(&mesh)?;
    let out = solve_transport(&mesh, &phi0, &problem, false)?;
    Ok(TransportRun {
        image: ImageVolume::from_dg(&out.final_state, &mesh)?,
        field: out.final_state,
        cfl: out.cfl,
    })
}

/// Grid, stage velocities and the manifest they were listed in, if any.
pub type LoadedVelocities = (
    GridMesh<f64>,
    Vec<CgVectorField<f64>>,
    Option<VelocityManifest>,
);

/// Velocity fields listed in a manifest (or `velocity_*.json` in name order)
/// together with their grid and manifest.
pub fn load_velocities(dir: &Path) -> Result<LoadedVelocities> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let (files, manifest) = if manifest_path.is_file() {
        let m: VelocityManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
        (
            m.files.iter().map(|f| dir.join(f)).collect::<Vec<_>>(),
            Some(m),
        )
    } else {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|s| s.to_str())
                    .is_some_and(|s| s.starts_with("velocity_") && s.ends_with(".json"))
            })
            .collect();
        files.sort();
        (files, None)
    };
    if files.is_empty() {
        return Err(Error::invalid(format!(
            "no velocity fields found in {}",
            dir.display()
        )));
    }
    let dims = field_dims(&files[0])?;
    let mesh = GridMesh::new(crate::discretization::GridDims::new(&dims)?)?;
    let fields = files
        .iter()
        .map(|f| read_cg_field(f, &mesh))
        .collect::<Result<Vec<_>>>()?;
    Ok((mesh, fields, manifest))
}

/// Mesh transform with affine files and a velocity directory. A crop recorded
/// in the manifest is undone around the flow.
pub fn run_transform_mesh(
    mesh: &SimplicialMesh<f64>,
    affines: [Option<&Path>; 3],
    velocity_dir: &Path,
    direction: Direction,
    backend: Backend,
    steps_per_field: usize,
) -> Result<TransformResult<f64>> {
    let d = mesh.dim();
    let load = |p: Option<&Path>| -> Result<AffineMap<f64>> {
        match p {
            Some(p) => read_affine(p),
            None => Ok(AffineMap::identity(d)),
        }
    };
    let (input_affine, affine, target_affine) =
        (load(affines[0])?, load(affines[1])?, load(affines[2])?);
    let (grid, velocities, manifest) = load_velocities(velocity_dir)?;
    let final_time = match &manifest {
        Some(m) if !m.final_times.is_empty() => {
            let t = m.final_times[0];
            if m.final_times.iter().any(|&x| x != t) {
                return Err(Error::invalid(
                    "velocity fields with different flow times are not supported",
                ));
            }
            t
        }
        _ => 1.0,
    };
    let (input_affine, affine) = match manifest.as_ref().and_then(|m| m.crop.as_ref()) {
        Some(c) => {
            let off: Vec<f64> = c.offset.iter().map(|&o| -(o as f64)).collect();
            let shift = AffineMap::translation_by(&off)?;
            (shift.compose(&input_affine)?, shift.compose(&affine)?)
        }
        None => (input_affine, affine),
    };
    let cfg = MeshTransform {
        input_affine,
        affine,
        target_affine,
        direction,
        flow: FlowConfig {
            steps_per_field,
            final_time,
            backend,
        },
    };
    transform_mesh(mesh, &grid, &velocities, &cfg)
}

/// Writes a synthetic pair (`input.json`, `target.json`, PGMs in 2D), its
/// ground truth, a disk or ball mesh around the input blob and a run config
/// with three smoothing stages.
pub fn write_synthetic(
    case: SyntheticCase,
    dims: &[usize],
    params: &SyntheticParams,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let pair = make_synthetic(case, dims, params, seed)?;
    fs::create_dir_all(out)?;
    write_image(&out.join("input.json"), &pair.input)?;
    write_image(&out.join("target.json"), &pair.target)?;
    if dims.len() == 2 {
        write_pgm16(&out.join("input.pgm"), &pair.input)?;
        write_pgm16(&out.join("target.pgm"), &pair.target)?;
    }
    fs::write(
        out.join("truth.json"),
        serde_json::to_string_pretty(&json!({
            "case": case.name(),
            "dims": dims,
            "seed": seed,
            "params": params,
            "ground_truth": pair.ground_truth,
        }))? + "\n",
    )?;
    let nmin = *dims.iter().min().expect("non-empty") as f64;
    let (center, radius) = match &pair.ground_truth {
        Some(GroundTruth::Translation { center, radius, .. }) => (center.clone(), *radius * 0.8),
        _ => (dims.iter().map(|&n| n as f64 / 2.0).collect(), nmin / 6.0),
    };
    let mesh = ball_mesh(dims.len(), &center, radius, 3)?;
    write_mesh(&out.join("mesh.mesh"), &mesh)?;
    let run = json!({
        "input": "input.json",
        "target": "target.json",
        "output_dir": "out",
        "seed": seed,
        "stages": vec![StageConfig::<f64>::smooth(100); 3],
    });
    fs::write(
        out.join("run.json"),
        serde_json::to_string_pretty(&run)? + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_register_without_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let img = make_synthetic(
            SyntheticCase::TranslateBlob,
            &[16, 16],
            &SyntheticParams::default(),
            0,
        )
        .unwrap()
        .input;
        write_image(&dir.path().join("a.json"), &img).unwrap();
        let cfg = RunConfig {
            input: dir.path().join("a.json"),
            target: dir.path().join("a.json"),
            affines: Default::default(),
            stages: vec![StageConfig::smooth(5)],
            output_dir: dir.path().join("out"),
            seed: 0,
            crop: true,
            normalize: None,
        };
        let run = run_registration(&cfg).unwrap();
        assert!(run.result.trace().is_empty());
        let csv = fs::read_to_string(&run.trace_path).unwrap();
        assert_eq!(csv.lines().count(), 1);
        let (grid, v, manifest) = load_velocities(&cfg.output_dir).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(grid.dims().extents(), run.mesh.dims().extents());
        assert!(manifest.unwrap().crop.is_some());
    }

    #[test]
    fn synthetic_bundle_is_complete() {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic(
            SyntheticCase::TranslateBlob,
            &[20, 20],
            &SyntheticParams::default(),
            3,
            dir.path(),
        )
        .unwrap();
        for f in [
            "input.json",
            "input.raw",
            "target.json",
            "input.pgm",
            "truth.json",
            "mesh.mesh",
            "run.json",
        ] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let cfg = RunConfig::load(&dir.path().join("run.json")).unwrap();
        assert_eq!(cfg.stages.len(), 3);
        assert_eq!(cfg.seed, 3);
    }
}
