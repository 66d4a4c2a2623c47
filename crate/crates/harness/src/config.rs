//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use rfr_core::data::{GroupSpec, ToySpec};
use rfr_core::losses::{PNorm, TrainConfig};
use rfr_core::shift::ShiftOrientation;
use serde::{Deserialize, Serialize};

use crate::metrics::DEFAULT_THRESHOLD;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    /// Classification loss only (`lambda` forced to 0).
    Mlp,
    /// Classification plus parity regularizer: RFR with `rho = 0`.
    Reg,
    Rfr,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Mlp => "MLP",
            Method::Reg => "REG",
            Method::Rfr => "RFR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Seeded two-group Gaussian toy; the seed of each run regenerates it.
    Toy {
        n: usize,
        #[serde(default = "default_toy")]
        spec: ToySpec,
    },
    /// Raw CSV plus a schema file.
    Csv { path: PathBuf, schema: PathBuf },
    /// A dataset written by `save_dataset` (CSV plus sidecar schema).
    Saved { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShiftSpec {
    /// Biased sampling along the first principal component.
    Synthetic {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        n_source: Option<usize>,
        #[serde(default)]
        n_target: Option<usize>,
        #[serde(default)]
        orientation: ShiftOrientation,
    },
    /// Source and target given by the schema's split column (CSV only).
    SplitColumn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub methods: Vec<Method>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub hidden: Vec<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub shift: ShiftSpec,
    /// `lambda` and `seed` here are ignored; the grid and seed list win.
    pub train: TrainConfig,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

/// Command-line overrides; every field replaces the matching config key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub p_norm: Option<PNorm>,
}

impl ExperimentConfig {
    /// Parses and validates. `train.rho` and `train.p_norm` must be written
    /// out: results depend on them and there is no neutral default.
    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let raw: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config parse error: {e}")))?;
        let train = raw.get("train").and_then(toml::Value::as_table);
        for key in ["rho", "p_norm"] {
            let given = train.is_some_and(|t| t.contains_key(key));
            let overridden = match key {
                "rho" => overrides.rho.is_some(),
                _ => overrides.p_norm.is_some(),
            };
            if !given && !overridden {
                return Err(Error::Config(format!("missing required key `train.{key}`")));
            }
        }
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config error: {e}")))?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(lambda) = o.lambda {
            self.lambdas = vec![lambda];
        }
        if let Some(rho) = o.rho {
            self.train.rho = rho;
        }
        if let Some(p) = o.p_norm {
            self.train.p_norm = p;
        }
    }

    /// Dataset paths are relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSpec::Csv { path, schema } => {
                fix(path);
                fix(schema);
            }
            DatasetSpec::Saved { path } => fix(path),
            DatasetSpec::Toy { .. } => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.methods.is_empty() {
            return bad("`methods` must list at least one of MLP, REG, RFR".into());
        }
        if self.seeds.is_empty() {
            return bad("`seeds` must not be empty".into());
        }
        if self.lambdas.is_empty() {
            return bad("`lambdas` must not be empty".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return bad(format!("`lambdas` entries must be finite and >= 0, got {l}"));
        }
        if self.hidden.contains(&0) {
            return bad("`hidden` layer widths must be positive".into());
        }
        if !self.threshold.is_finite() {
            return bad("`threshold` must be finite".into());
        }
        if let (ShiftSpec::SplitColumn, DatasetSpec::Toy { .. } | DatasetSpec::Saved { .. }) = (&self.shift, &self.dataset) {
            return bad("`shift.kind = \"split-column\"` needs `dataset.kind = \"csv\"`".into());
        }
        if let ShiftSpec::Synthetic { beta, alpha, .. } = &self.shift {
            if !(*beta > 0.0 && beta.is_finite()) || !alpha.is_finite() {
                return bad(format!("`shift.beta` must be > 0 and `shift.alpha` finite, got ({alpha}, {beta})"));
            }
        }
        if let DatasetSpec::Toy { n: 0, .. } = self.dataset {
            return bad("`dataset.n` must be positive".into());
        }
        self.train.validate()?;
        Ok(())
    }

    /// Training settings for one cell: `lambda` and `rho` follow the method.
    pub fn train_config(&self, method: Method, lambda: f64, seed: u64) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = seed;
        t.lambda = match method {
            Method::Mlp => 0.0,
            Method::Reg | Method::Rfr => lambda,
        };
        if method == Method::Reg {
            t.rho = 0.0;
        }
        t
    }

    /// `(method, lambda)` cells. MLP ignores `lambda`, so it gets one cell at
    /// `lambda = 0` whatever the grid.
    pub fn cells(&self) -> Vec<(Method, f64)> {
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        let mut out = Vec::new();
        for m in methods {
            if m == Method::Mlp {
                out.push((m, 0.0));
            } else {
                out.extend(self.lambdas.iter().map(|&l| (m, l)));
            }
        }
        out
    }
}

/// Two unit-variance Gaussian groups centred at `(∓1, 0)`, so the groups sit
/// apart along the leading principal direction. Labels follow
/// `sigmoid((±0.5 x₀ + x₁) / 0.5)`: the slope on the group axis flips sign
/// between groups.
pub fn default_toy() -> ToySpec {
    let group = |mx: f64, slope: f64| GroupSpec {
        mean: vec![mx, 0.0],
        cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        label_weights: vec![slope, 1.0],
        label_bias: 0.0,
    };
    ToySpec {
        groups: [group(-1.0, 0.5), group(1.0, -0.5)],
        group1_fraction: 0.5,
        label_temperature: 0.5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "toy"
methods = ["MLP", "REG", "RFR"]
lambdas = [0.5, 1.0]
seeds = [0, 1]
hidden = [8]

[dataset]
kind = "toy"
n = 300

[shift]
kind = "synthetic"
alpha = 1.0
beta = 2.0

[train]
rho = 0.03
p_norm = 2
epochs = 5
"#;

    #[test]
    fn parses_and_expands_cells() {
        let cfg = ExperimentConfig::from_toml_str(BASE, &Overrides::default()).unwrap();
        assert_eq!(cfg.threshold, 0.5);
        assert_eq!(
            cfg.cells(),
            vec![(Method::Mlp, 0.0), (Method::Reg, 0.5), (Method::Reg, 1.0), (Method::Rfr, 0.5), (Method::Rfr, 1.0)]
        );
        assert_eq!(cfg.train_config(Method::Reg, 1.0, 7).rho, 0.0);
        assert_eq!(cfg.train_config(Method::Mlp, 1.0, 7).lambda, 0.0);
        assert_eq!(cfg.train_config(Method::Rfr, 1.0, 7).seed, 7);
    }

    #[test]
    fn rho_and_p_are_required() {
        let text = BASE.replace("rho = 0.03\n", "");
        let err = ExperimentConfig::from_toml_str(&text, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("train.rho"));
        let o = Overrides {
            rho: Some(0.1),
            ..Overrides::default()
        };
        assert_eq!(ExperimentConfig::from_toml_str(&text, &o).unwrap().train.rho, 0.1);
        let text = BASE.replace("p_norm = 2\n", "");
        assert!(ExperimentConfig::from_toml_str(&text, &Overrides::default()).unwrap_err().to_string().contains("p_norm"));
    }

    #[test]
    fn overrides_replace_keys() {
        let o = Overrides {
            seed: Some(9),
            lambda: Some(3.0),
            p_norm: Some(PNorm::Infinity),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::from_toml_str(BASE, &o).unwrap();
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.lambdas, vec![3.0]);
        assert_eq!(cfg.train.p_norm, PNorm::Infinity);
    }

    #[test]
    fn contradictions_are_usage_errors() {
        let split_on_toy = BASE.replace("kind = \"synthetic\"\nalpha = 1.0\nbeta = 2.0", "kind = \"split-column\"");
        for text in [
            split_on_toy,
            BASE.replace("lambdas = [0.5, 1.0]", "lambdas = []"),
            BASE.replace("seeds = [0, 1]", "seeds = []"),
            BASE.replace("beta = 2.0", "beta = 0.0"),
            BASE.replace("epochs = 5", "epochs = 5\nbogus = 1"),
        ] {
            let err = ExperimentConfig::from_toml_str(&text, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::exit::USAGE, "{err}");
        }
    }
}
