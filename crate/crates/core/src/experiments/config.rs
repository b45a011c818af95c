//! Resolved experiment configuration with defaults for every field.

use serde::{Deserialize, Serialize};

use crate::ensembles::{Beta, DeformationSpec, EnsembleSpec, EntryLaw, WeightVector};
use crate::error::{LabError, Result};
use crate::linalg::{self, CMat};

pub const CONFIG_VERSION: u32 = 1;

/// Deterministic observable recipes, defined for every `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// `diag(+1, -1, +1, ...)`.
    Alternating,
    /// `diag(-1, ..., -1, +1, ..., +1)`.
    Halves,
    Identity,
    /// Fixed diagonal; only valid for matching N.
    Explicit { values: Vec<f64> },
}

impl ObservableSpec {
    pub fn diagonal(&self, n: usize) -> Result<Vec<f64>> {
        Ok(match self {
            ObservableSpec::Alternating => (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            ObservableSpec::Halves => (0..n).map(|i| if i < n / 2 { -1.0 } else { 1.0 }).collect(),
            ObservableSpec::Identity => vec![1.0; n],
            ObservableSpec::Explicit { values } => {
                if values.len() != n {
                    return Err(LabError::Config(format!(
                        "explicit observable has {} values but N = {n}",
                        values.len()
                    )));
                }
                values.clone()
            }
        })
    }

    pub fn build(&self, n: usize) -> Result<CMat> {
        Ok(linalg::real_diag(&self.diagonal(n)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EthSection {
    pub observable: ObservableSpec,
    pub deformation: Option<DeformationSpec>,
}

impl Default for EthSection {
    fn default() -> Self {
        Self { observable: ObservableSpec::Alternating, deformation: Some(DeformationSpec::Zero) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CltSection {
    pub observable: ObservableSpec,
    pub deformation: Option<DeformationSpec>,
    /// Also report the single index `N/2` separately.
    pub single_index: bool,
}

impl Default for CltSection {
    fn default() -> Self {
        Self { observable: ObservableSpec::Halves, deformation: None, single_index: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquipartitionSection {
    /// Number of frozen `W_2` draws; samples are split evenly across them.
    pub batches: usize,
}

impl Default for EquipartitionSection {
    fn default() -> Self {
        Self { batches: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalLawSection {
    pub observable: ObservableSpec,
    pub deformation: Option<DeformationSpec>,
    pub energy: f64,
    pub eta_points: usize,
    /// Largest η is `N^{eta_max_exponent}`; the smallest is `N^{-1 + eta_rule}`.
    pub eta_max_exponent: f64,
    /// Real parts of the far-apart two-resolvent check.
    pub far_apart: [f64; 2],
}

impl Default for LocalLawSection {
    fn default() -> Self {
        Self {
            observable: ObservableSpec::Alternating,
            deformation: Some(DeformationSpec::Zero),
            energy: 0.0,
            eta_points: 6,
            eta_max_exponent: -0.2,
            far_apart: [-0.5, 0.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbmSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub runs: usize,
    /// Step size as a fraction of the smallest eigenvalue gap.
    pub dt_factor: f64,
    pub dt_min: f64,
    /// Number of equally spaced trajectory snapshots after `t = 0`.
    pub checkpoints: usize,
    pub observable: ObservableSpec,
    /// Seed of the frozen initial matrix `W_0`.
    pub w0_seed: u64,
}

impl Default for DbmSection {
    fn default() -> Self {
        Self {
            n: 32,
            t: 0.5,
            runs: 200,
            dt_factor: 1e-2,
            dt_min: 1e-8,
            checkpoints: 4,
            observable: ObservableSpec::Alternating,
            w0_seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub samples: usize,
    pub beta: Beta,
    pub offdiag_law: EntryLaw,
    pub diag_law: EntryLaw,
    pub deformation: DeformationSpec,
    pub kappa: f64,
    /// Two-point cut-off width; defaults to a tenth of the longest bulk interval.
    pub delta: Option<f64>,
    /// Lower bound on `<(A - <A>)^2>` required by the CLT.
    pub sigma: f64,
    /// `a` in the smallest local-law scale `eta = N^{-1 + a}`.
    pub eta_rule: f64,
    /// Fraction of central indices used for pooled statistics.
    pub bulk_index_window: f64,
    pub p: Vec<f64>,
    pub eth: EthSection,
    pub clt: CltSection,
    pub equipartition: EquipartitionSection,
    pub locallaw: LocalLawSection,
    pub dbm: DbmSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 20_240_601,
            n_list: vec![128, 256, 512],
            samples: 50,
            beta: Beta::Real,
            offdiag_law: EntryLaw::Gaussian,
            diag_law: EntryLaw::Gaussian,
            deformation: DeformationSpec::Bimodal { a: 0.5 },
            kappa: 1e-3,
            delta: None,
            sigma: 0.01,
            eta_rule: 0.1,
            bulk_index_window: 0.5,
            p: vec![1.0, 1.0],
            eth: EthSection::default(),
            clt: CltSection::default(),
            equipartition: EquipartitionSection::default(),
            locallaw: LocalLawSection::default(),
            dbm: DbmSection::default(),
        }
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> LabError {
    LabError::Config(format!("{name}: {msg}"))
}

impl ExperimentConfig {
    /// Range checks; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(field("version", format!("unsupported schema version {}", self.version)));
        }
        if self.n_list.is_empty() || self.n_list.iter().any(|&n| n < 2) {
            return Err(field("N_list", "needs at least one dimension, each >= 2"));
        }
        if self.samples < 1 {
            return Err(field("samples", "must be >= 1"));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(field("kappa", format!("must lie in (0, 1], got {}", self.kappa)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(field("delta", format!("must be positive, got {d}")));
            }
        }
        if !(self.sigma >= 0.0) {
            return Err(field("sigma", "must be non-negative"));
        }
        if !(self.eta_rule > 0.0 && self.eta_rule < 1.0) {
            return Err(field("eta_rule", format!("must lie in (0, 1), got {}", self.eta_rule)));
        }
        if !(self.bulk_index_window > 0.0 && self.bulk_index_window < 1.0) {
            return Err(field("bulk_index_window", format!("must lie in (0, 1), got {}", self.bulk_index_window)));
        }
        WeightVector::new(self.p.clone()).map_err(|e| field("p", e))?;
        if self.equipartition.batches < 1 {
            return Err(field("equipartition.batches", "must be >= 1"));
        }
        let ll = &self.locallaw;
        if ll.eta_points < 4 {
            return Err(field("locallaw.eta_points", "needs at least four η values"));
        }
        if !(ll.eta_max_exponent < 0.0 && ll.eta_max_exponent > self.eta_rule - 1.0) {
            return Err(field("locallaw.eta_max_exponent", "must lie in (eta_rule - 1, 0)"));
        }
        let dbm = &self.dbm;
        if dbm.n < 2 || dbm.n > 64 {
            return Err(field("dbm.N", format!("must lie in 2..=64, got {}", dbm.n)));
        }
        if !(dbm.t >= 0.0) {
            return Err(field("dbm.T", "must be non-negative"));
        }
        if dbm.runs < 1 {
            return Err(field("dbm.runs", "must be >= 1"));
        }
        if !(dbm.dt_factor > 0.0 && dbm.dt_factor <= 0.1) {
            return Err(field("dbm.dt_factor", "must lie in (0, 0.1]"));
        }
        if !(dbm.dt_min > 0.0) {
            return Err(field("dbm.dt_min", "must be positive"));
        }
        if dbm.checkpoints < 1 {
            return Err(field("dbm.checkpoints", "must be >= 1"));
        }
        Ok(())
    }

    pub fn ensemble(&self, n: usize, seed: u64) -> EnsembleSpec {
        EnsembleSpec { n, beta: self.beta, offdiag_law: self.offdiag_law, diag_law: self.diag_law, seed }
    }

    pub fn weights(&self) -> Result<WeightVector> {
        WeightVector::new(self.p.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_ranges_name_the_field() {
        let d = ExperimentConfig::default;
        let err = |c: ExperimentConfig| c.validate().unwrap_err().to_string();
        assert!(err(ExperimentConfig { eta_rule: 1.5, ..d() }).contains("eta_rule"));
        assert!(err(ExperimentConfig { bulk_index_window: 1.0, ..d() }).contains("bulk_index_window"));
        assert!(err(ExperimentConfig { samples: 0, ..d() }).contains("samples"));
        assert!(err(ExperimentConfig { p: vec![1.0, 0.0], ..d() }).contains("p:"));
    }

    #[test]
    fn observables() {
        assert_eq!(ObservableSpec::Alternating.diagonal(4).unwrap(), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(ObservableSpec::Halves.diagonal(4).unwrap(), vec![-1.0, -1.0, 1.0, 1.0]);
        assert!(ObservableSpec::Explicit { values: vec![1.0] }.diagonal(2).is_err());
    }
}
