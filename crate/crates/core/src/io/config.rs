use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::PotentialRule;
use crate::error::Error;
use crate::experiments::{amplitude_range, SweepPlan};
use crate::field::CoefficientField;
use crate::geometry::{BoundaryLayout, Domain};
use crate::phase::PhaseModel;
use crate::solver::{BoundaryData, NeumannClosure, SolverConfig};

fn zero() -> f64 {
    0.0
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn tol_ref() -> f64 {
    1e-3
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// Solver keys of the config file. `slave_factor` lives at the top level with
/// the model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub dt_factor: f64,
    pub ss_tol: f64,
    pub ss_window: usize,
    pub max_steps: usize,
    pub lin_tol: f64,
    pub max_linear_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub el_tol: Option<f64>,
    pub closure: NeumannClosure,
    pub potential: PotentialRule,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::<f64>::default();
        Self {
            dt: c.dt,
            dt_factor: c.dt_factor,
            ss_tol: c.ss_tol,
            ss_window: c.ss_window,
            max_steps: c.max_steps,
            lin_tol: c.lin_tol,
            max_linear_iterations: c.max_linear_iterations,
            el_tol: c.el_tol,
            closure: c.closure,
            potential: c.potential,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), svg: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, rename = "A_list", skip_serializing_if = "Option::is_none")]
    pub amplitude_list: Option<Vec<f64>>,
    #[serde(default, rename = "A_range", skip_serializing_if = "Option::is_none")]
    pub amplitude_range: Option<AmplitudeRange>,
    pub x0: f64,
    pub delta: f64,
    #[serde(default = "zero")]
    pub lambda1: f64,
    #[serde(default = "one")]
    pub lambda2: f64,
    #[serde(default = "two")]
    pub slave_factor: f64,
    /// Uniform weight `Q`.
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default)]
    pub layout: BoundaryLayout,
    #[serde(default = "tol_ref")]
    pub tol_ref: f64,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn keyed(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::config(key, e.to_string())
}

impl RunConfig {
    /// Mesh sizes, from `n_list` or the single `n`.
    pub fn meshes(&self) -> Vec<usize> {
        self.n_list.clone().or(self.n.map(|n| vec![n])).unwrap_or_default()
    }

    /// Amplitudes from `A`, `A_list` or `A_range`.
    pub fn amplitudes(&self) -> Result<Vec<f64>, Error> {
        if let Some(a) = self.amplitude {
            return Ok(vec![a]);
        }
        if let Some(l) = &self.amplitude_list {
            return Ok(l.clone());
        }
        if let Some(r) = self.amplitude_range {
            return amplitude_range(r.start, r.stop, r.step).map_err(keyed("A_range"));
        }
        Ok(Vec::new())
    }

    pub fn domain(&self, n: usize) -> Result<Domain<f64>, Error> {
        Domain::with_layout(self.theta, n, self.layout).map_err(|e| {
            let msg = e.to_string();
            let key = if !msg.contains("cells per side") {
                "theta"
            } else if self.n_list.is_some() {
                "n_list"
            } else {
                "n"
            };
            Error::config(key, msg)
        })
    }

    pub fn boundary(&self, amplitude: f64) -> Result<BoundaryData<f64>, Error> {
        let b = BoundaryData { amplitude, x0: self.x0, delta: self.delta };
        b.validate().map_err(|e| {
            let key = if !(amplitude > 0.0) {
                "A"
            } else if !(self.delta > 0.0) || self.delta >= self.x0 {
                "delta"
            } else {
                "x0"
            };
            Error::config(key, e.to_string())
        })?;
        Ok(b)
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        let s = &self.solver;
        SolverConfig {
            dt: s.dt,
            dt_factor: s.dt_factor,
            ss_tol: s.ss_tol,
            ss_window: s.ss_window,
            max_steps: s.max_steps,
            lin_tol: s.lin_tol,
            max_linear_iterations: s.max_linear_iterations,
            slave_factor: self.slave_factor,
            el_tol: s.el_tol,
            closure: s.closure,
            potential: s.potential,
        }
    }

    pub fn model(&self, d: &Domain<f64>) -> Result<PhaseModel<f64>, Error> {
        let key = if self.lambda1 < 0.0 || !self.lambda1.is_finite() { "lambda1" } else { "lambda2" };
        self.solver_config().model(d, self.lambda1, self.lambda2).map_err(keyed(key))
    }

    pub fn q_field(&self, d: &Domain<f64>) -> Result<CoefficientField<f64>, Error> {
        CoefficientField::uniform(d, self.q).map_err(keyed("q"))
    }

    pub fn sweep_plan(&self) -> Result<SweepPlan<f64>, Error> {
        let amplitudes = self.amplitudes()?;
        let boundary = self.boundary(amplitudes[0])?;
        Ok(SweepPlan {
            theta: self.theta,
            layout: self.layout,
            n_list: self.meshes(),
            boundary,
            amplitudes,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            q: self.q,
        })
    }

    /// Checks every constraint, naming the offending key.
    pub fn validate(&self) -> Result<(), Error> {
        match (&self.n, &self.n_list) {
            (None, None) => return Err(Error::config("n", "one of `n` or `n_list` is required")),
            (Some(_), Some(_)) => return Err(Error::config("n_list", "give either `n` or `n_list`, not both")),
            (None, Some(l)) if l.is_empty() => return Err(Error::config("n_list", "must not be empty")),
            (None, Some(l)) if l.windows(2).any(|w| w[1] <= w[0]) => {
                return Err(Error::config("n_list", "must be strictly increasing"))
            }
            _ => {}
        }
        let given = [self.amplitude.is_some(), self.amplitude_list.is_some(), self.amplitude_range.is_some()];
        match given.iter().filter(|&&g| g).count() {
            0 => return Err(Error::config("A", "one of `A`, `A_list` or `A_range` is required")),
            1 => {}
            _ => return Err(Error::config("A", "give only one of `A`, `A_list` and `A_range`")),
        }
        let amps = self.amplitudes()?;
        let key = if self.amplitude_list.is_some() { "A_list" } else { "A" };
        if amps.is_empty() {
            return Err(Error::config(key, "no amplitudes"));
        }
        if amps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(key, "amplitudes must be strictly increasing"));
        }
        for &n in &self.meshes() {
            let d = self.domain(n)?;
            self.model(&d)?;
            self.q_field(&d)?;
        }
        for &a in &amps {
            self.boundary(a)?;
        }
        if !(self.tol_ref > 0.0) {
            return Err(Error::config("tol_ref", format!("must be positive, got {}", self.tol_ref)));
        }
        self.solver_config().validate().map_err(|e| {
            let msg = e.to_string();
            let key = [
                "slave_factor",
                "dt_factor",
                "ss_tol",
                "ss_window",
                "lin_tol",
                "el_tol",
                "max_steps",
                "dt",
            ]
            .into_iter()
            .find(|k| msg.contains(k))
            .map(|k| if k == "slave_factor" { k.to_string() } else { format!("solver.{k}") })
            .unwrap_or_else(|| "solver".to_string());
            Error::Config { key, message: msg }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a configuration; `origin` is only used in messages.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, Error> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() || path.is_empty() || path == "." {
            Error::Parse { path: origin.to_path_buf(), message: inner.to_string() }
        } else {
            Error::config(path, inner.to_string())
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}
