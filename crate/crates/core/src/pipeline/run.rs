use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, StateRecipe};
use crate::analysis::{
    entropy_from_eh, entropy_scaling, entropy_scaling_csv, mutual_information, profile_csv, vn_entropy,
    windowed_fidelity, ProfileKind, ReferenceProfile, Verification,
};
use crate::eht::{fit_eh, EHAnsatz, FitOptions, FitResult, Geometry};
use crate::error::{Error, Result};
use crate::measurement::{
    sample_dataset, stream_rng, window_settings, z2_symmetrize_dataset, Axis, MeasurementDataset, MeasurementSetting,
    Source,
};
use crate::noise::{calibrate_noise, NoiseParams};
use crate::spinmodel::SpinModel;
use crate::statekit::{
    excited_states, ground_state, neel_state, reduced_density_matrix, run_circuit, vqe_optimize, CircuitParams,
    PureState, VqeConfig,
};

pub const STATE_FILE: &str = "state.bin";
pub const FIT_DATA: &str = "data/fit.jsonl";
pub const HOLDOUT_DATA: &str = "data/holdout.jsonl";
pub const CALIBRATION_DATA: &str = "data/calibration.jsonl";
pub const NOISE_FILE: &str = "noise.json";
pub const MANIFEST: &str = "manifest.json";

/// Derived seeds, one per random consumer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub state: u64,
    pub fit_data: u64,
    pub holdout_data: u64,
    pub calibration: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        let d = |stream| stream_rng(master, stream).next_u64();
        Self {
            master,
            state: d(1),
            fit_data: d(2),
            holdout_data: d(3),
            calibration: d(4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seeds: Option<Seeds>,
    pub completed: Vec<String>,
    pub error: Option<StageError>,
    /// Relative path → SHA-256 of every file written.
    pub files: BTreeMap<String, String>,
}

/// The run directory; every file goes through here so the manifest sees
/// each write.
pub struct Output {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl Output {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    fn read(&self, rel: &str) -> Result<Vec<u8>> {
        fs::read(self.root.join(rel)).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{rel}: {e}"))))
    }

    fn read_dataset(&self, rel: &str) -> Result<MeasurementDataset> {
        let file = fs::File::open(self.root.join(rel))
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{rel}: {e}"))))?;
        MeasurementDataset::read_jsonl(BufReader::new(file))
    }
}

/// File label of a subsystem, e.g. `c0-4` or `t3-2-6-2`.
pub fn geometry_label(g: &Geometry) -> String {
    match *g {
        Geometry::Contiguous { start, len } => format!("c{start}-{len}"),
        Geometry::TwoIntervals {
            a_start,
            a_len,
            b_start,
            b_len,
        } => format!("t{a_start}-{a_len}-{b_start}-{b_len}"),
    }
}

fn master_seed(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.measurement
        .seed
        .ok_or_else(|| Error::InvalidParameter("sampled runs need a seed".into()))
}

fn model_of(cfg: &ExperimentConfig) -> Result<SpinModel> {
    SpinModel::from_params(&cfg.model)
}

#[derive(Serialize)]
struct ModelSummary {
    n: usize,
    j: f64,
    delta: f64,
    spectral_bounds: (f64, f64),
    couplings: Vec<f64>,
}

pub fn stage_model(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let model = model_of(cfg)?;
    let couplings = cfg.coupling_matrix()?;
    out.write_json(
        "model.json",
        &ModelSummary {
            n: model.n_sites,
            j: model.coupling_j,
            delta: model.anisotropy_delta,
            spectral_bounds: model.spectral_bounds()?,
            couplings: couplings.values,
        },
    )
}

#[derive(Serialize)]
struct StateSummary {
    energy: f64,
    total_sz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    circuit: Option<CircuitParams>,
}

fn prepare_state(cfg: &ExperimentConfig, seeds: &Seeds) -> Result<(PureState, Option<CircuitParams>)> {
    let model = model_of(cfg)?;
    match &cfg.state {
        StateRecipe::Ground { sector } => Ok((ground_state(&model, *sector)?.1, None)),
        StateRecipe::Excited { k, sector } => {
            let mut states = excited_states(&model, k + 1, None, *sector)?;
            Ok((states.swap_remove(*k).1, None))
        }
        StateRecipe::Vqe {
            layers,
            thetas,
            iterations,
            shots_per_basis,
            heating_quench,
        } => {
            let couplings = cfg.coupling_matrix()?;
            let thetas = match thetas {
                Some(t) => t.clone(),
                None => {
                    let vqe = VqeConfig {
                        layers: *layers,
                        shots_per_basis: *shots_per_basis,
                        iterations: *iterations,
                        seed: seeds.state,
                        ..VqeConfig::default()
                    };
                    vqe_optimize(&model, &couplings, &vqe)?.params.thetas
                }
            };
            let mut params = CircuitParams::new(thetas)?;
            if let Some(q) = heating_quench {
                params = params.with_quench(*q);
            }
            let psi = run_circuit(&neel_state(model.n_sites)?, &params, &couplings)?;
            Ok((psi, Some(params)))
        }
    }
}

pub fn stage_prepare(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let seeds = Seeds::derive(master_seed(cfg)?);
    let (psi, circuit) = prepare_state(cfg, &seeds)?;
    let model = model_of(cfg)?;
    out.write(STATE_FILE, &psi.to_bytes())?;
    out.write_json(
        "state.json",
        &StateSummary {
            energy: crate::statekit::exact_energy(&model, &psi),
            total_sz: psi.total_sz(),
            circuit,
        },
    )
}

fn load_state(out: &Output) -> Result<PureState> {
    PureState::read_from(out.read(STATE_FILE)?.as_slice())
}

pub fn stage_sample(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let seeds = Seeds::derive(master_seed(cfg)?);
    let psi = load_state(out)?;
    let register = cfg.register();
    let window = cfg.measurement.window.min(register.len());
    let settings = window_settings(register.len(), window)?;
    let planted = cfg.noise.planted;
    let noise = (!planted.is_identity()).then_some(&planted);
    let fit_shots = cfg.measurement.shots / 2;
    let hold_shots = cfg.measurement.shots - fit_shots;
    let source = Source::Pure(&psi);
    let label = |part: &str| format!("{}/{part}", cfg.name);
    let mut fit = sample_dataset(source, &register, &settings, fit_shots, noise, seeds.fit_data, &label("fit"))?;
    let mut hold = sample_dataset(source, &register, &settings, hold_shots, noise, seeds.holdout_data, &label("holdout"))?;
    if cfg.measurement.z2 {
        fit = z2_symmetrize_dataset(&fit);
        hold = z2_symmetrize_dataset(&hold);
    }
    out.write(FIT_DATA, &fit.to_jsonl())?;
    out.write(HOLDOUT_DATA, &hold.to_jsonl())?;
    let fit_noise = match cfg.noise.calibration_shots {
        Some(shots) => {
            let n = cfg.model.n;
            let neel = neel_state(n)?;
            let all: Vec<usize> = (0..n).collect();
            let z = [MeasurementSetting::uniform(Axis::Z, n)];
            let cal = sample_dataset(Source::Pure(&neel), &all, &z, shots, noise, seeds.calibration, &label("calibration"))?;
            out.write(CALIBRATION_DATA, &cal.to_jsonl())?;
            calibrate_noise(&cal, (2.0 * neel.total_sz()).round() as i64)?
        }
        None => planted,
    };
    out.write_json(NOISE_FILE, &fit_noise)
}

fn fit_path(g: &Geometry) -> String {
    format!("fits/{}.json", geometry_label(g))
}

pub fn stage_fit(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let data = out.read_dataset(FIT_DATA)?;
    let noise: NoiseParams = serde_json::from_slice(&out.read(NOISE_FILE)?)?;
    let fits = cfg
        .fit
        .geometries
        .par_iter()
        .map(|g| {
            let ansatz = EHAnsatz::new(cfg.fit.variant, g.clone(), cfg.model.delta)?;
            let init = cfg.fit.init.clone().filter(|v| v.len() == ansatz.n_params());
            let opts = FitOptions {
                init,
                max_iter: cfg.fit.max_iter,
                ..FitOptions::default()
            };
            fit_eh(&data, &ansatz, &noise, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    for (g, fit) in cfg.fit.geometries.iter().zip(&fits) {
        out.write_json(&fit_path(g), fit)?;
    }
    Ok(())
}

fn load_fits(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<FitResult>> {
    cfg.fit
        .geometries
        .iter()
        .map(|g| Ok(serde_json::from_slice(&out.read(&fit_path(g))?)?))
        .collect()
}

pub fn stage_verify(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let holdout = out.read_dataset(HOLDOUT_DATA)?;
    let fits = load_fits(cfg, out)?;
    let reports = fits
        .par_iter()
        .map(|f| windowed_fidelity(f, &holdout, cfg.fit.verify_window.min(f.geometry.len())))
        .collect::<Result<Vec<Verification>>>()?;
    let mut summary = String::from("geometry,window,f_max,f_mean,f_max_err,f_mean_err\n");
    for (g, r) in cfg.fit.geometries.iter().zip(&reports) {
        let label = geometry_label(g);
        out.write(&format!("verify/{label}.csv"), r.to_csv().as_bytes())?;
        out.write_json(&format!("verify/{label}.json"), r)?;
        summary.push_str(&format!(
            "{label},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.window, r.f_max, r.f_mean, r.f_max_err, r.f_mean_err
        ));
    }
    out.write("verify/summary.csv", summary.as_bytes())
}

pub fn stage_analyze(cfg: &ExperimentConfig, out: &mut Output) -> Result<()> {
    let psi = load_state(out)?;
    let fits = load_fits(cfg, out)?;
    let gibbs = fits.iter().map(FitResult::gibbs).collect::<Result<Vec<_>>>()?;
    let mut entropy = String::from("geometry,L_A,S_fit,S_exact\n");
    let mut scaling_points = Vec::new();
    let mut mi = String::from("geometry,separation,I_fit,I_exact\n");
    let mut any_mi = false;
    for ((g, fit), gs) in cfg.fit.geometries.iter().zip(&fits).zip(&gibbs) {
        let label = geometry_label(g);
        let sites = g.sites();
        let exact = reduced_density_matrix(&psi, &sites)?;
        let s_fit = entropy_from_eh(gs);
        entropy.push_str(&format!("{label},{},{s_fit:.12e},{:.12e}\n", sites.len(), vn_entropy(&exact)));
        match g {
            Geometry::Contiguous { len, .. } => {
                scaling_points.push((*len, s_fit));
                let reference = ReferenceProfile::lattice(ProfileKind::CftBall, g)?;
                out.write(&format!("analysis/profile_{label}.csv"), profile_csv(&fit.beta, &reference)?.as_bytes())?;
            }
            Geometry::TwoIntervals { a_len, b_len, .. } => {
                any_mi = true;
                let a: Vec<usize> = (0..*a_len).collect();
                let b: Vec<usize> = (*a_len..a_len + b_len).collect();
                let i_fit = mutual_information(&gs.rho, &gs.rho.partial_trace(&a)?, &gs.rho.partial_trace(&b)?)?;
                let i_exact = mutual_information(&exact, &exact.partial_trace(&a)?, &exact.partial_trace(&b)?)?;
                mi.push_str(&format!("{label},{},{i_fit:.12e},{i_exact:.12e}\n", g.separation()));
                if a_len == b_len && g.separation() > 0 {
                    let reference = ReferenceProfile::lattice(ProfileKind::DiracTwoIntervalLocal, g)?;
                    out.write(&format!("analysis/profile_{label}.csv"), profile_csv(&fit.beta, &reference)?.as_bytes())?;
                }
            }
        }
    }
    out.write("analysis/entropy.csv", entropy.as_bytes())?;
    if any_mi {
        out.write("analysis/mutual_information.csv", mi.as_bytes())?;
    }
    let mut sizes: Vec<usize> = scaling_points.iter().map(|p| p.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() >= 3 && sizes.len() == scaling_points.len() {
        let scaling = entropy_scaling(&scaling_points)?;
        out.write("analysis/entropy_scaling.csv", entropy_scaling_csv(&scaling).as_bytes())?;
        out.write_json("analysis/entropy_scaling.json", &scaling)?;
    }
    Ok(())
}

type Stage = fn(&ExperimentConfig, &mut Output) -> Result<()>;

pub const STAGES: [(&str, Stage); 6] = [
    ("model", stage_model),
    ("prepare", stage_prepare),
    ("sample", stage_sample),
    ("fit", stage_fit),
    ("verify", stage_verify),
    ("analyze", stage_analyze),
];

/// Run every stage into `dir`, then write the manifest. On failure the
/// manifest names the failing stage and the files written so far stay.
pub fn run_pipeline(cfg: &ExperimentConfig, dir: impl Into<PathBuf>) -> Result<Manifest> {
    cfg.validate()?;
    let mut out = Output::new(dir)?;
    out.write("config.json", cfg.to_json().as_bytes())?;
    let mut completed = Vec::new();
    let mut error = None;
    let mut failure = None;
    for (name, stage) in STAGES {
        if let Err(e) = stage(cfg, &mut out) {
            error = Some(StageError {
                stage: name.to_string(),
                message: e.to_string(),
            });
            failure = Some(e);
            break;
        }
        completed.push(name.to_string());
    }
    let manifest = Manifest {
        name: cfg.name.clone(),
        seeds: cfg.measurement.seed.map(Seeds::derive),
        completed,
        error,
        files: out.files.clone(),
    };
    out.write_json(MANIFEST, &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}
