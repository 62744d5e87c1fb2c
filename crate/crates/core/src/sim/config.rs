//! Study configuration (TOML).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::balance::DEFAULT_RIDGE_DRAWS;
use crate::engine::DEFAULT_MAX_DRAWS;
use crate::error::{Error, Result};
use crate::sim::generate::{BetaChoice, Surface};

/// Rerandomization schemes compared against complete randomization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StudyScheme {
    Rer,
    Ridge,
    Pca,
}

impl StudyScheme {
    pub fn tag(self) -> &'static str {
        match self {
            StudyScheme::Rer => "ReR",
            StudyScheme::Ridge => "RidgeReR",
            StudyScheme::Pca => "PCAReR",
        }
    }
}

impl fmt::Display for StudyScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl TryFrom<String> for StudyScheme {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rer" => Ok(StudyScheme::Rer),
            "ridge" | "ridgerer" => Ok(StudyScheme::Ridge),
            "pca" | "pcarer" => Ok(StudyScheme::Pca),
            _ => Err(format!("unknown scheme {s:?} (expected ReR, RidgeReR or PCAReR)")),
        }
    }
}

impl From<StudyScheme> for String {
    fn from(s: StudyScheme) -> Self {
        s.tag().to_string()
    }
}

/// Ridge penalty: fixed, or chosen per covariate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LambdaRepr", into = "LambdaRepr")]
pub enum LambdaSetting {
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LambdaRepr {
    Text(String),
    Number(f64),
}

impl TryFrom<LambdaRepr> for LambdaSetting {
    type Error = String;

    fn try_from(r: LambdaRepr) -> std::result::Result<Self, String> {
        match r {
            LambdaRepr::Text(t) if t.eq_ignore_ascii_case("auto") => Ok(LambdaSetting::Auto),
            LambdaRepr::Text(t) => t
                .parse::<f64>()
                .map(LambdaSetting::Fixed)
                .map_err(|_| format!("lambda must be \"auto\" or a number, got {t:?}")),
            LambdaRepr::Number(v) => Ok(LambdaSetting::Fixed(v)),
        }
    }
}

impl From<LambdaSetting> for LambdaRepr {
    fn from(l: LambdaSetting) -> Self {
        match l {
            LambdaSetting::Auto => LambdaRepr::Text("auto".into()),
            LambdaSetting::Fixed(v) => LambdaRepr::Number(v),
        }
    }
}

fn default_schemes() -> Vec<StudyScheme> {
    vec![StudyScheme::Rer, StudyScheme::Ridge, StudyScheme::Pca]
}
fn default_surfaces() -> Vec<Surface> {
    vec![Surface::Linear, Surface::Exp]
}
fn default_betas() -> Vec<BetaChoice> {
    vec![BetaChoice::Ones, BetaChoice::HalfDoubled]
}
fn default_resid() -> Vec<f64> {
    vec![0.5, 1.0]
}
fn default_p_a() -> f64 {
    0.05
}
fn default_gamma() -> f64 {
    0.95
}
fn default_tau() -> f64 {
    1.0
}
fn default_lambda() -> LambdaSetting {
    LambdaSetting::Auto
}
fn default_max_draws() -> u64 {
    DEFAULT_MAX_DRAWS
}
fn default_ridge_draws() -> usize {
    DEFAULT_RIDGE_DRAWS
}
fn default_replications() -> usize {
    500
}
fn default_groups() -> usize {
    5
}

/// Factor levels, replication layout and scheme settings of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorGrid {
    pub seed: u64,
    pub n_levels: Vec<usize>,
    pub d_levels: Vec<usize>,
    pub rho_levels: Vec<f64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<StudyScheme>,
    #[serde(default = "default_surfaces")]
    pub surfaces: Vec<Surface>,
    #[serde(default = "default_betas")]
    pub beta_choices: Vec<BetaChoice>,
    #[serde(default = "default_resid")]
    pub resid_vars: Vec<f64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_groups")]
    pub groups: usize,
    #[serde(default = "default_p_a")]
    pub p_a: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_lambda")]
    pub lambda: LambdaSetting,
    #[serde(default = "default_max_draws")]
    pub max_draws: u64,
    #[serde(default = "default_ridge_draws")]
    pub ridge_calibration_draws: usize,
    /// Rows of the master matrix; defaults to the largest n level.
    #[serde(default)]
    pub master_n: Option<usize>,
    /// Columns of the master matrix; defaults to the largest d level.
    #[serde(default)]
    pub master_d: Option<usize>,
    /// Also evaluate β = Vβ̃ with β̃_j = j(j+1)/2 on the selected components.
    #[serde(default)]
    pub special_beta: bool,
}

impl FactorGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: FactorGrid = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("grid serializes")
    }

    pub fn master_dims(&self) -> (usize, usize) {
        let n = self.master_n.unwrap_or_else(|| self.n_levels.iter().copied().max().unwrap_or(0));
        let d = self.master_d.unwrap_or_else(|| self.d_levels.iter().copied().max().unwrap_or(0));
        (n, d)
    }

    pub fn group_size(&self) -> usize {
        self.replications / self.groups
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, empty) in [
            ("n_levels", self.n_levels.is_empty()),
            ("d_levels", self.d_levels.is_empty()),
            ("rho_levels", self.rho_levels.is_empty()),
            ("surfaces", self.surfaces.is_empty()),
            ("beta_choices", self.beta_choices.is_empty()),
            ("resid_vars", self.resid_vars.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        for (name, dup) in [
            ("n_levels", has_duplicates(&self.n_levels)),
            ("d_levels", has_duplicates(&self.d_levels)),
            ("rho_levels", has_duplicates(&self.rho_levels)),
            ("schemes", has_duplicates(&self.schemes)),
            ("surfaces", has_duplicates(&self.surfaces)),
            ("beta_choices", has_duplicates(&self.beta_choices)),
            ("resid_vars", has_duplicates(&self.resid_vars)),
        ] {
            if dup {
                return bad(format!("{name} contains a repeated level"));
            }
        }
        let (mn, md) = self.master_dims();
        for &n in &self.n_levels {
            if n < 4 || n % 2 == 1 {
                return bad(format!("n level {n} must be even and at least 4"));
            }
            if n > mn {
                return bad(format!("n level {n} exceeds master_n = {mn}"));
            }
        }
        for &d in &self.d_levels {
            if d == 0 {
                return bad("d level 0 is not allowed".into());
            }
            if d > md {
                return bad(format!("d level {d} exceeds master_d = {md}"));
            }
        }
        for &rho in &self.rho_levels {
            let lower = if md > 1 { -1.0 / (md as f64 - 1.0) } else { f64::NEG_INFINITY };
            if !(rho > lower && rho < 1.0) {
                return bad(format!("rho level {rho} must lie in ({lower}, 1)"));
            }
        }
        for &v in &self.resid_vars {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("resid_vars level {v} must be finite and >= 0"));
            }
        }
        if self.replications == 0 || self.groups == 0 {
            return bad("replications and groups must be positive".into());
        }
        if !self.replications.is_multiple_of(self.groups) {
            return bad(format!(
                "replications ({}) must be divisible by groups ({})",
                self.replications, self.groups
            ));
        }
        if self.group_size() < 2 {
            return bad("each group needs at least 2 replications".into());
        }
        if !(self.p_a > 0.0 && self.p_a < 1.0) {
            return bad(format!("p_a = {} must lie in (0, 1)", self.p_a));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma = {} must lie in (0, 1]", self.gamma));
        }
        if !self.tau.is_finite() {
            return bad("tau must be finite".into());
        }
        if let LambdaSetting::Fixed(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda = {l} must be finite and >= 0"));
            }
        }
        if self.max_draws == 0 || self.ridge_calibration_draws == 0 {
            return bad("max_draws and ridge_calibration_draws must be positive".into());
        }
        Ok(())
    }
}

fn has_duplicates<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, a)| v[..i].contains(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
n_levels = [100]
d_levels = [10]
rho_levels = [0.5]
replications = 10
groups = 2
"#;

    #[test]
    fn defaults_follow_study_settings() {
        let g = FactorGrid::from_toml(MINIMAL).unwrap();
        assert_eq!(g.p_a, 0.05);
        assert_eq!(g.gamma, 0.95);
        assert_eq!(g.tau, 1.0);
        assert_eq!(g.lambda, LambdaSetting::Auto);
        assert_eq!(g.schemes, default_schemes());
        assert_eq!(g.master_dims(), (100, 10));
        assert_eq!(FactorGrid::from_toml(&g.to_toml()).unwrap(), g);
    }

    #[test]
    fn scheme_and_lambda_spellings() {
        let text = format!("{MINIMAL}schemes = [\"pca\", \"RidgeReR\"]\nlambda = 0.25\n");
        let g = FactorGrid::from_toml(&text).unwrap();
        assert_eq!(g.schemes, vec![StudyScheme::Pca, StudyScheme::Ridge]);
        assert_eq!(g.lambda, LambdaSetting::Fixed(0.25));
        let bad = format!("{MINIMAL}schemes = [\"cr\"]\n");
        assert!(FactorGrid::from_toml(&bad).is_err());
    }

    #[test]
    fn offending_level_is_named() {
        let text = format!("{MINIMAL}master_d = 8\n");
        let err = FactorGrid::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("d level 10"), "{err}");
        let text = MINIMAL.replace("groups = 2", "groups = 3");
        assert!(FactorGrid::from_toml(&text).unwrap_err().to_string().contains("divisible"));
        let text = MINIMAL.replace("[0.5]", "[1.5]");
        assert!(FactorGrid::from_toml(&text).unwrap_err().to_string().contains("rho level 1.5"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}colour = 3\n");
        assert!(matches!(FactorGrid::from_toml(&text), Err(Error::Config(_))));
    }
}
