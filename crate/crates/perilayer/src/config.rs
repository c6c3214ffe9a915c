//! Run configuration read from a TOML file with the sections `[domain]`,
//! `[cell]`, `[study]`, `[nearfield]` and `[output]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cell::CellConfig;
use crate::error::{Error, Result};
use crate::expansion::{CompositeForm, Level};
use crate::mesh::layer_cell_count;
use crate::nearfield::NearFieldConfig;
use crate::geometry::DomainSpec;

/// Schema version understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Thresholds checked at the end of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceThresholds {
    /// Smallest admissible H¹ order of the limit field alone.
    #[serde(default = "default_eoc_min")]
    pub eoc_min: f64,
    /// Smallest admissible gain in H¹ order from the first-order terms.
    #[serde(default = "default_eoc_gap")]
    pub eoc_gap: f64,
    /// Largest admissible relative H¹ increase when the δ^{4/3} term is added.
    #[serde(default = "default_max_increase")]
    pub singular_max_increase: f64,
}

fn default_eoc_min() -> f64 {
    0.8
}

fn default_eoc_gap() -> f64 {
    0.3
}

fn default_max_increase() -> f64 {
    0.05
}

impl Default for AcceptanceThresholds {
    fn default() -> Self {
        AcceptanceThresholds {
            eoc_min: default_eoc_min(),
            eoc_gap: default_eoc_gap(),
            singular_max_increase: default_max_increase(),
        }
    }
}

/// The `[study]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Layer periods, strictly decreasing, each with 2L/δ an integer.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// Bulk mesh size h₀; the perforated mesh uses min(h₀, δ/8).
    #[serde(default = "default_h")]
    pub h: f64,
    /// Mesh size of the limit-domain mesh carrying the macroscopic terms.
    #[serde(default = "default_h")]
    pub h_limit: f64,
    /// Half-width of the strip around the layer excluded from the error norms.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_levels")]
    pub levels: Vec<Level>,
    /// Arrangement of the composite inside the layer strip.
    #[serde(default)]
    pub composite: CompositeForm,
    /// Checked when present; violations give a nonzero exit status.
    #[serde(default)]
    pub acceptance: Option<AcceptanceThresholds>,
}

fn default_deltas() -> Vec<f64> {
    vec![0.25, 0.125, 0.0625]
}

fn default_h() -> f64 {
    1.0 / 128.0
}

fn default_alpha() -> f64 {
    0.15
}

fn default_levels() -> Vec<Level> {
    vec![Level::TwoThirds, Level::One, Level::FourThirds]
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            deltas: default_deltas(),
            h: default_h(),
            h_limit: default_h(),
            alpha: default_alpha(),
            levels: default_levels(),
            composite: CompositeForm::default(),
            acceptance: None,
        }
    }
}

impl StudySection {
    /// Mesh size of the direct solve at layer period `delta`.
    pub fn mesh_size(&self, delta: f64) -> f64 {
        self.h.min(delta / 8.0)
    }
}

/// The `[output]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; the command-line flag `--out` takes precedence.
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Also write ASCII VTK files of the computed fields.
    #[serde(default)]
    pub vtk: bool,
}

fn default_dir() -> String {
    "perilayer-out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            vtk: false,
        }
    }
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub domain: DomainSpec,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub nearfield: NearFieldConfig,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl RunConfig {
    /// Parses and validates a configuration text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {}", path.display(), e)))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Re-validates every physical constraint.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        self.domain.validate()?;
        self.cell.validate()?;
        self.nearfield.validate()?;
        let s = &self.study;
        if s.deltas.is_empty() {
            return Err(Error::Config("study.deltas must not be empty".into()));
        }
        if s.deltas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("study.deltas must be strictly decreasing".into()));
        }
        for &d in &s.deltas {
            layer_cell_count(&self.domain, d)?;
            if d >= self.domain.h_b.min(self.domain.h_t) {
                return Err(Error::Config(format!("delta = {} must be below min(H_B, H_T)", d)));
            }
        }
        if !(s.h > 0.0 && s.h <= 0.25) || !(s.h_limit > 0.0 && s.h_limit <= 0.25) {
            return Err(Error::Config("study.h and study.h_limit must lie in (0, 1/4]".into()));
        }
        if !(s.alpha > 0.0 && s.alpha < 0.5 * self.domain.h_b.min(self.domain.h_t)) {
            return Err(Error::Config(format!(
                "study.alpha = {} must lie in (0, min(H_B, H_T)/2)",
                s.alpha
            )));
        }
        if s.levels.is_empty() {
            return Err(Error::Config("study.levels must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = r#"
[domain]
L = 1.0
L_top = 1.5
H_B = 0.75
H_T = 0.75
source = { center = [0.0, 0.4], radius = 0.2, amplitude = 1.0 }

[cell]
cell = { hole = { kind = "disk", center = [0.5, 0.0], radius = 0.25 } }

[study]
deltas = [0.25, 0.125, 0.0625]
levels = ["2/3", "1", "4/3"]
acceptance = {}
"#;

    #[test]
    fn benchmark_config_parses() {
        let c = RunConfig::from_toml(BENCH).unwrap();
        assert_eq!(c.study.deltas.len(), 3);
        assert_eq!(c.study.acceptance, Some(AcceptanceThresholds::default()));
        assert_eq!(c.cell.l_band, 8.0);
        assert_eq!(c.study.mesh_size(0.0625), 1.0 / 128.0);
        let again = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = BENCH.replace("[study]", "[study]\nspeed = 3");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn physical_constraints_are_checked() {
        let bad = BENCH.replace("0.0625]", "0.07]");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = BENCH.replace("[0.25, 0.125, 0.0625]", "[0.125, 0.25]");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = BENCH.replace("radius = 0.25", "radius = 1.5");
        assert!(RunConfig::from_toml(&bad).is_err());
    }
}
