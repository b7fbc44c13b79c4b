//! Run configuration files.
//!
//! A run file is TOML with a `[run]` section (seed, output directory, tolerances,
//! budget), a `[model]` section and optional `[refine]` and `[simulate]` sections.
//! The model is one of
//!
//! * `kind = "table"`: `discount`, optional `initial_state` and `payoff_bound`, one
//!   `[[model.states]]` entry per state with `label`, `leader_actions`, `efforts` and a
//!   row-major `cells` array of `{ payoff_x, payoff_e, next = [[state, mass], ..] }`,
//!   and an optional `[model.viability]` with `members` and `safe_actions` given as
//!   `[[state, action], ..]`; without it `V` is every state;
//! * `kind = "toy3"`: the three-state fixture with its viability set, at `discount`;
//! * `kind = "hc"`: the hegemon/client grid model, parameters in `[model.hc]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::game::{GameModel, StateSpec, StrategyProfile, ViabilitySet};
use crate::hc::{build_hc_model, HcParams};
use crate::mse::{DEFAULT_BUDGET, DEFAULT_CERT_TOL};
use crate::refine::{EquilibriumSource, RpQuantifier, DEFAULT_COMPARE_TOL};

/// Environment variable overriding `run.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SEE_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub output_dir: String,
    /// Bellman residual tolerance of the solver.
    pub tol: f64,
    /// Certification tolerance on one-shot deviation gains.
    pub cert_tol: f64,
    pub budget: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "see-out".into(),
            tol: crate::game::DEFAULT_VALUE_TOL,
            cert_tol: DEFAULT_CERT_TOL,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Table,
    Toy3,
    Hc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViabilitySpec {
    pub members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_actions: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viability: Option<ViabilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hc: Option<HcParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    Auto,
    Enumerate,
    Solve,
}

impl From<SourceSpec> for EquilibriumSource {
    fn from(s: SourceSpec) -> Self {
        match s {
            SourceSpec::Auto => EquilibriumSource::Auto,
            SourceSpec::Enumerate => EquilibriumSource::Enumerate,
            SourceSpec::Solve => EquilibriumSource::Solve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineSection {
    /// Fixed catastrophe penalty; ignored when `find_threshold` is set.
    pub penalty: Option<f64>,
    pub find_threshold: bool,
    pub m_cap: f64,
    pub threshold_tol: f64,
    pub selection_state: Option<usize>,
    pub rp_quantifier: RpQuantifier,
    pub compare_tol: f64,
    /// Per-state outside-option values for the individual-rationality filter.
    pub outside: Option<Vec<f64>>,
    pub source: SourceSpec,
}

impl Default for RefineSection {
    fn default() -> Self {
        Self {
            penalty: None,
            find_threshold: false,
            m_cap: 1e6,
            threshold_tol: 1e-6,
            selection_state: None,
            rp_quantifier: RpQuantifier::SomeState,
            compare_tol: DEFAULT_COMPARE_TOL,
            outside: None,
            source: SourceSpec::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Defaults to the model's initial state.
    pub start: Option<usize>,
    pub horizon: usize,
    /// Explicit profile; without one the solver's equilibrium is simulated.
    pub profile: Option<StrategyProfile>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { start: None, horizon: 100, profile: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub model: ModelSection,
    #[serde(default)]
    pub refine: RefineSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

/// A built model with its viability set and, for `kind = "hc"`, the parameters.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: GameModel,
    pub viability: ViabilitySet,
    pub hc: Option<HcParams>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("key `{key}` must be > 0, got {v}")))
            }
        };
        positive("run.tol", self.run.tol)?;
        positive("run.cert_tol", self.run.cert_tol)?;
        positive("refine.compare_tol", self.refine.compare_tol)?;
        positive("refine.threshold_tol", self.refine.threshold_tol)?;
        positive("refine.m_cap", self.refine.m_cap)?;
        if let Some(m) = self.refine.penalty {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("key `refine.penalty` must be >= 0, got {m}")));
            }
        }
        let m = &self.model;
        let need_discount = || match m.discount {
            None => Err(Error::Config("missing key `model.discount`".into())),
            Some(d) if !(0.0..1.0).contains(&d) => {
                Err(Error::Config(format!("key `model.discount` must lie in [0, 1), got {d}")))
            }
            Some(d) => Ok(d),
        };
        match m.kind {
            ModelKind::Table => {
                need_discount()?;
                if m.states.is_empty() {
                    return Err(Error::Config("missing key `model.states`".into()));
                }
                if m.hc.is_some() {
                    return Err(Error::Config("key `model.hc` is only valid with kind = \"hc\"".into()));
                }
            }
            ModelKind::Toy3 => {
                need_discount()?;
                if !m.states.is_empty() || m.viability.is_some() || m.hc.is_some() {
                    return Err(Error::Config("kind = \"toy3\" takes only `discount`".into()));
                }
            }
            ModelKind::Hc => {
                if m.hc.is_none() {
                    return Err(Error::Config("missing key `model.hc`".into()));
                }
                if m.discount.is_some() || !m.states.is_empty() || m.viability.is_some() {
                    return Err(Error::Config("kind = \"hc\" is configured entirely in `model.hc`".into()));
                }
            }
        }
        Ok(())
    }

    /// Output directory after the environment override.
    pub fn output_dir(&self) -> String {
        std::env::var(OUTPUT_DIR_ENV).ok().filter(|s| !s.is_empty()).unwrap_or_else(|| self.run.output_dir.clone())
    }

    pub fn build_model(&self) -> Result<LoadedModel> {
        let m = &self.model;
        match m.kind {
            ModelKind::Toy3 => {
                let model = fixtures::toy3(m.discount.expect("validated"));
                let viability = fixtures::toy3_viability(&model);
                Ok(LoadedModel { model, viability, hc: None })
            }
            ModelKind::Hc => {
                let p = m.hc.expect("validated");
                let (model, viability) = build_hc_model(&p)?;
                Ok(LoadedModel { model, viability, hc: Some(p) })
            }
            ModelKind::Table => {
                let model =
                    GameModel::new(m.states.clone(), m.discount.expect("validated"), m.payoff_bound, m.initial_state)?;
                let viability = match &m.viability {
                    None => ViabilitySet::all(model.n_states()),
                    Some(spec) => {
                        let v = ViabilitySet::new(model.n_states(), spec.members.iter().copied())?;
                        match &spec.safe_actions {
                            None => v,
                            Some(pairs) => {
                                let safe: BTreeMap<usize, usize> = pairs.iter().copied().collect();
                                v.with_safe_actions(&model, safe)?
                            }
                        }
                    }
                };
                Ok(LoadedModel { model, viability, hc: None })
            }
        }
    }
}

/// The `[model]` section describing `model` and `viability` as a table.
pub fn table_section(model: &GameModel, viability: &ViabilitySet) -> ModelSection {
    ModelSection {
        kind: ModelKind::Table,
        discount: Some(model.discount()),
        initial_state: Some(model.initial_state()),
        payoff_bound: Some(model.payoff_bound()),
        states: model.states().to_vec(),
        viability: Some(ViabilitySpec {
            members: viability.members().collect(),
            safe_actions: viability.safe_action().map(|m| m.iter().map(|(&s, &x)| (s, x)).collect()),
        }),
        hc: None,
    }
}
