//! Run configuration: a flat `key = value` file (TOML syntax) plus
//! command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every key is optional; commands fill in their own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // family: r0 with exactly one of abar / ell_target
    pub r0: Option<f64>,
    pub abar: Option<f64>,
    pub ell_target: Option<f64>,

    // solver
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_max: Option<f64>,
    pub blowup_threshold: Option<f64>,
    pub metric_t_max: Option<f64>,
    pub metric_rel_tol: Option<f64>,

    // scan
    pub f1_range: Option<[f64; 2]>,
    pub g1_range: Option<[f64; 2]>,
    pub n_f: Option<usize>,
    pub n_g: Option<usize>,

    // boundary
    pub g1_list: Option<Vec<f64>>,
    pub bisect_tol: Option<f64>,

    // output
    pub directory: Option<PathBuf>,
    pub format: Option<Format>,

    // Taub-NUT and adiabatic limit
    pub m: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub eta_points: Option<usize>,
    pub random_checks: Option<usize>,
    pub adiabatic: Option<bool>,
    pub mu1: Option<f64>,
    pub mu3: Option<f64>,
    pub r0_list: Option<Vec<f64>>,

    // end shooting
    pub g_inf: Option<f64>,
    pub lambda: Option<f64>,
    pub t_end: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.abar.is_some() && self.ell_target.is_some() {
            return Err("give either abar or ell_target, not both".into());
        }
        let positive = [
            ("r0", self.r0),
            ("ell_target", self.ell_target),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("t_max", self.t_max),
            ("blowup_threshold", self.blowup_threshold),
            ("metric_t_max", self.metric_t_max),
            ("metric_rel_tol", self.metric_rel_tol),
            ("bisect_tol", self.bisect_tol),
            ("m", self.m),
            ("t_end", self.t_end),
        ];
        for (name, v) in positive {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(format!("{name} = {x} must be positive"));
                }
            }
        }
        for (name, r) in [("f1_range", self.f1_range), ("g1_range", self.g1_range)] {
            if let Some([lo, hi]) = r {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return Err(format!("{name} = [{lo}, {hi}] is not well ordered"));
                }
            }
        }
        for (name, n) in [("n_f", self.n_f), ("n_g", self.n_g)] {
            if matches!(n, Some(k) if k < 2) {
                return Err(format!("{name} must be at least 2"));
            }
        }
        if matches!(self.eta_points, Some(k) if k < 2) {
            return Err("eta_points must be at least 2".into());
        }
        for (name, list) in [("g1_list", &self.g1_list), ("r0_list", &self.r0_list)] {
            if let Some(l) = list {
                if l.is_empty() || l.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(format!(
                        "{name} must be a non-empty list of positive numbers"
                    ));
                }
            }
        }
        Ok(())
    }

    /// The keys that are set, minus the output directory, as sorted JSON.
    pub fn canonical(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let serde_json::Value::Object(m) = &mut v {
            m.retain(|k, v| !v.is_null() && k != "directory");
        }
        v
    }

    /// SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.canonical()).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let cfg = RunConfig::parse(
            "r0 = 1.0\nabar = 0.0078125\nf1_range = [0.0, 0.9]\nn_f = 8\nformat = \"json\"\nC = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.abar, Some(0.0078125));
        assert_eq!(cfg.f1_range, Some([0.0, 0.9]));
        assert_eq!(cfg.format, Some(Format::Json));
        assert_eq!(cfg.c, Some(2.0));
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            "abar = 0.1\nell_target = 1.0",
            "rel_tol = -1e-10",
            "f1_range = [1.0, 0.0]",
            "n_g = 1",
            "unknown_key = 3",
            "r0 = \"one\"",
            "g1_list = []",
            "[section]\nr0 = 1.0",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::parse("r0 = 1.0").unwrap();
        let b = RunConfig::parse("r0 = 1.0\n# comment\n").unwrap();
        let c = RunConfig::parse("r0 = 2.0").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
        let moved = RunConfig::parse("r0 = 1.0\ndirectory = \"elsewhere\"").unwrap();
        assert_eq!(a.hash(), moved.hash());
    }
}
