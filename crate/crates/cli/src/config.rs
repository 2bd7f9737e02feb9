use std::fs;
use std::path::{Path, PathBuf};

use delaystab::energy::TimeProfile;
use delaystab::limit::{MuRule, Side, SweepConfig};
use delaystab::{
    make_commuting_family, make_polynomial, make_quartic_family, make_rotating_family,
    EnergyModel, Matrix, PolyTerm, SampleBox,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Energy selection: a built-in family with its parameters or a polynomial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    /// `(t_c − t)x₁²/2 + Σᵢ₌₂ xᵢ²/2 + ‖x‖⁴/4`.
    Quartic { n: usize, t_c: f64, horizon: f64 },
    /// `⟨(I − φ(t)B)x, x⟩/2 + ‖x‖⁴/4`; `phi` lists polynomial coefficients.
    Commuting {
        base: Vec<Vec<f64>>,
        phi: Vec<f64>,
        horizon: f64,
    },
    /// Planar model whose eigenbasis rotates with angular speed `omega`.
    Rotating { omega: f64, t_c: f64, horizon: f64 },
    Polynomial {
        #[serde(default = "default_poly_name")]
        name: String,
        n: usize,
        horizon: f64,
        terms: Vec<PolyTerm>,
    },
}

fn default_poly_name() -> String {
    "polynomial".into()
}

impl ModelSpec {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let spec = match name {
            "quartic-1d" => ModelSpec::Quartic {
                n: 1,
                t_c: 0.5,
                horizon: 1.5,
            },
            "quartic-2d" => ModelSpec::Quartic {
                n: 2,
                t_c: 0.5,
                horizon: 1.5,
            },
            "commuting" => ModelSpec::Commuting {
                base: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
                phi: vec![0.25, 0.5],
                horizon: 1.5,
            },
            "rotating" => ModelSpec::Rotating {
                omega: 1.0,
                t_c: 0.5,
                horizon: 1.5,
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown model preset `{other}` (expected quartic-1d, quartic-2d, commuting or rotating)"
                )))
            }
        };
        Ok(spec)
    }

    pub fn build(&self) -> Result<EnergyModel, CliError> {
        let model = match self {
            ModelSpec::Quartic { n, t_c, horizon } => make_quartic_family(*n, *t_c, *horizon),
            ModelSpec::Commuting { base, phi, horizon } => {
                let n = base.len();
                if base.iter().any(|row| row.len() != n) {
                    return Err(CliError::Config("commuting base must be a square matrix".into()));
                }
                let flat: Vec<f64> = base.iter().flatten().copied().collect();
                make_commuting_family(
                    Matrix::from_row_slice(n, n, &flat),
                    TimeProfile::polynomial(phi.clone()),
                    *horizon,
                )
            }
            ModelSpec::Rotating { omega, t_c, horizon } => {
                make_rotating_family(*omega, *t_c, *horizon)
            }
            ModelSpec::Polynomial {
                name,
                n,
                horizon,
                terms,
            } => make_polynomial(name.clone(), *n, *horizon, terms.clone()),
        };
        model.map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Points of the uniform spectral grid on `[0, T]`.
    pub grid_points: usize,
    /// Points of the limit-curve grid.
    pub curve_points: usize,
    pub eps: Vec<f64>,
    pub alpha: f64,
    pub sign: Side,
    pub mu: MuRule,
    pub rtol: f64,
    pub atol: f64,
    pub relaxed_rtol: f64,
    /// Half-width of the box `[−r, r]ⁿ` searched for critical points.
    pub box_radius: f64,
    pub delta0: f64,
    /// Seed for the jitter of the critical-point seed grid.
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sweep = SweepConfig::default();
        Self {
            model: ModelSpec::Quartic {
                n: 1,
                t_c: 0.5,
                horizon: 1.5,
            },
            grid_points: 61,
            curve_points: 121,
            eps: sweep.eps,
            alpha: sweep.alpha,
            sign: sweep.side,
            mu: sweep.mu,
            rtol: sweep.rtol,
            atol: sweep.atol,
            relaxed_rtol: sweep.relaxed_rtol,
            box_radius: 2.0,
            delta0: 1e-4,
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let parsed = match ext {
            "toml" => toml::from_str(text).map_err(|e| e.to_string()),
            "json" => serde_json::from_str(text).map_err(|e| e.to_string()),
            _ => serde_json::from_str(text)
                .or_else(|_| toml::from_str(text))
                .map_err(|e: toml::de::Error| e.to_string()),
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            eps: self.eps.clone(),
            alpha: self.alpha,
            side: self.sign,
            mu: self.mu,
            rtol: self.rtol,
            atol: self.atol,
            relaxed_rtol: self.relaxed_rtol,
            search_box: None,
            seed: self.seed,
        }
    }

    pub fn search_box(&self, n: usize) -> Result<SampleBox, CliError> {
        SampleBox::symmetric(n, self.box_radius).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), CliError> {
        self.sweep()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.grid_points < 3 || self.curve_points < 3 {
            return Err(CliError::Config("grid_points and curve_points must be at least 3".into()));
        }
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("relaxed_rtol", self.relaxed_rtol),
            ("box_radius", self.box_radius),
            ("delta0", self.delta0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        self.model.build()?;
        Ok(())
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<(), CliError> {
        let dir = &self.output;
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"")
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|e| CliError::Config(format!("{} is not writable: {e}", dir.display())))
    }

    /// SHA-256 of the canonical JSON form of the configuration, output
    /// directory excluded.
    pub fn hash(&self) -> String {
        let mut key = self.clone();
        key.output = PathBuf::new();
        let canonical = serde_json::to_vec(&key).expect("configuration serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
            eps = [0.01, 0.001]
            sign = "minus"
            mu = { fixed = 0.1 }
            [model]
            kind = "quartic"
            n = 2
            t_c = 0.5
            horizon = 1.5
        "#;
        let json_text = r#"{"eps": [0.01, 0.001], "sign": "minus", "mu": {"fixed": 0.1},
            "model": {"kind": "quartic", "n": 2, "t_c": 0.5, "horizon": 1.5}}"#;
        let a = ExperimentConfig::parse(toml_text, Path::new("a.toml")).unwrap();
        let b = ExperimentConfig::parse(json_text, Path::new("b.json")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.sign, Side::Minus);
        assert_eq!(a.mu, MuRule::Fixed(0.1));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r = ExperimentConfig::parse(r#"{"epsilon": [0.1]}"#, Path::new("c.json"));
        assert!(matches!(r, Err(CliError::Config(_))));
    }

    #[test]
    fn increasing_eps_is_a_config_error() {
        let cfg = ExperimentConfig {
            eps: vec![1e-3, 1e-2],
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&text, Path::new("d.toml")).unwrap(), cfg);
    }
}
