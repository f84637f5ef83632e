use serde::{Deserialize, Serialize};

use crate::eht::{Geometry, Variant};
use crate::error::{Error, Result};
use crate::noise::NoiseParams;
use crate::spinmodel::{mode_sum_couplings, power_law_couplings, CouplingMatrix, ModelParams, TrapParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSource {
    /// J_ij = j0/|i − j|^alpha.
    PowerLaw { j0: f64, alpha: f64 },
    Trap(TrapParams),
}

impl CouplingSource {
    pub fn build(&self, n: usize) -> Result<CouplingMatrix> {
        match self {
            CouplingSource::PowerLaw { j0, alpha } => power_law_couplings(n, *j0, *alpha),
            CouplingSource::Trap(trap) => {
                if trap.n_ions != n {
                    return Err(Error::Mismatch(format!("{}-ion trap for {n} sites", trap.n_ions)));
                }
                mode_sum_couplings(trap)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateRecipe {
    Ground {
        #[serde(default)]
        sector: Option<i64>,
    },
    /// k-th eigenstate above the lowest (k = 0 is the lowest).
    Excited {
        k: usize,
        #[serde(default)]
        sector: Option<i64>,
    },
    /// Variational circuit on the Néel state; `thetas` skips the
    /// optimization, and `heating_quench` prepends an XY quench.
    Vqe {
        layers: usize,
        #[serde(default)]
        thetas: Option<Vec<f64>>,
        #[serde(default = "default_iterations")]
        iterations: usize,
        #[serde(default = "default_shots_per_basis")]
        shots_per_basis: u64,
        #[serde(default)]
        heating_quench: Option<f64>,
    },
}

fn default_iterations() -> usize {
    200
}

fn default_shots_per_basis() -> u64 {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    /// Settings cover every Pauli string on each window of this many sites.
    pub window: usize,
    /// Shots per setting, shared between the fit and holdout datasets.
    pub shots: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Apply the Z₂ symmetrization to both datasets.
    #[serde(default)]
    pub z2: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan {
    /// Channel applied while sampling.
    #[serde(default)]
    pub planted: NoiseParams,
    /// Z-basis shots on the Néel state used to estimate the channel; when
    /// absent the fit uses `planted`.
    #[serde(default)]
    pub calibration_shots: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPlan {
    pub geometries: Vec<Geometry>,
    pub variant: Variant,
    #[serde(default)]
    pub init: Option<Vec<f64>>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Sub-window size for verification (clamped to each subsystem).
    #[serde(default = "default_verify_window")]
    pub verify_window: usize,
}

fn default_max_iter() -> usize {
    2000
}

fn default_verify_window() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelParams,
    #[serde(default)]
    pub couplings: Option<CouplingSource>,
    pub state: StateRecipe,
    pub measurement: MeasurementPlan,
    #[serde(default)]
    pub noise: NoisePlan,
    pub fit: FitPlan,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.model.n;
        if n < 2 {
            return Err(Error::InvalidSize(format!("{n}-site chain")));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::InvalidParameter(format!("unusable run name '{}'", self.name)));
        }
        if self.measurement.shots < 2 {
            return Err(Error::InvalidParameter("need at least 2 shots per setting".into()));
        }
        if self.measurement.window == 0 || self.measurement.window > n {
            return Err(Error::InvalidParameter(format!("settings window {} on {n} sites", self.measurement.window)));
        }
        self.noise.planted.validate()?;
        if self.noise.calibration_shots == Some(0) {
            return Err(Error::InvalidParameter("calibration needs shots".into()));
        }
        if let StateRecipe::Vqe { layers: 0, .. } = self.state {
            return Err(Error::InvalidParameter("VQE needs at least one layer".into()));
        }
        if self.fit.geometries.is_empty() {
            return Err(Error::InvalidParameter("no subsystems to fit".into()));
        }
        for g in &self.fit.geometries {
            g.validate()?;
            if g.sites().last().is_some_and(|&s| s >= n) {
                return Err(Error::InvalidSize(format!("{g:?} does not fit in {n} sites")));
            }
        }
        Ok(())
    }

    /// The couplings driving the circuit: the configured source, or the
    /// nearest-neighbour chain itself.
    pub fn coupling_matrix(&self) -> Result<CouplingMatrix> {
        match &self.couplings {
            Some(src) => src.build(self.model.n),
            None => {
                let n = self.model.n;
                let values = (0..n * n)
                    .map(|k| if (k / n).abs_diff(k % n) == 1 { self.model.j } else { 0.0 })
                    .collect();
                CouplingMatrix::new(n, values)
            }
        }
    }

    /// Union of all fitted sites, ascending.
    pub fn register(&self) -> Vec<usize> {
        let mut sites: Vec<usize> = self.fit.geometries.iter().flat_map(|g| g.sites()).collect();
        sites.sort_unstable();
        sites.dedup();
        sites
    }
}

fn base(name: &str, n: usize, state: StateRecipe, geometries: Vec<Geometry>, window: usize, shots: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        model: ModelParams { n, j: 1.0, delta: 1.0 },
        couplings: Some(CouplingSource::PowerLaw { j0: 1.0, alpha: 0.82 }),
        state,
        measurement: MeasurementPlan {
            window,
            shots,
            seed: Some(20240601),
            z2: false,
        },
        noise: NoisePlan::default(),
        fit: FitPlan {
            geometries,
            variant: Variant::LocalLinks,
            init: None,
            max_iter: default_max_iter(),
            verify_window: default_verify_window(),
        },
    }
}

pub const PRESETS: [&str; 3] = ["minimal", "figure1c-desk", "figure3-desk"];

/// Named configurations; some expand to several runs.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    match name {
        "minimal" => Ok(vec![base(
            "minimal",
            6,
            StateRecipe::Ground { sector: None },
            vec![Geometry::contiguous(0, 2), Geometry::contiguous(0, 3)],
            3,
            400,
        )]),
        "figure1c-desk" => {
            let geometries: Vec<Geometry> = (2..=6).map(|l| Geometry::contiguous(0, l)).collect();
            let ground = base("ground", 12, StateRecipe::Ground { sector: None }, geometries.clone(), 6, 400);
            let heated = base(
                "heated",
                12,
                StateRecipe::Vqe {
                    layers: 2,
                    thetas: None,
                    iterations: 100,
                    shots_per_basis: 30,
                    heating_quench: Some(3.0),
                },
                geometries,
                6,
                400,
            );
            Ok(vec![ground, heated])
        }
        "figure3-desk" => {
            let geometries = (1..=6)
                .map(|d| {
                    let start = (12 - (4 + d)) / 2;
                    Geometry::two_intervals(start, 2, start + 2 + d, 2)
                })
                .collect();
            let mut cfg = base("disjoint", 12, StateRecipe::Ground { sector: None }, geometries, 4, 400);
            cfg.fit.variant = Variant::Bilocal { cross_links: true };
            Ok(vec![cfg])
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown preset '{other}' (known: {})",
            PRESETS.join(", ")
        ))),
    }
}
