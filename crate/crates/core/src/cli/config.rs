//! Run configuration: a TOML document, optionally layered over a named preset.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::funcspace::{Interval, PiecewisePoly, Poly, QuadratureRule, Smoothness, PI};
use crate::spectral::{compute_iak, CosineSeries, CouplingPair, InitialData, Profile, SeriesExtent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Distributed,
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Biorthogonality residual.
    pub biortho: f64,
    /// Pass threshold for `||y(T)|| / ||y0||`.
    pub null_ratio: f64,
    /// Pass threshold for each boundary duality residual.
    pub duality: f64,
    /// Adaptive quadrature target.
    pub quadrature: f64,
    /// Step-doubling threshold.
    pub stepping: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { biortho: 1e-8, null_ratio: 1e-3, duality: 1e-5, quadrature: 1e-12, stepping: 1e-6 }
    }
}

fn default_samples() -> usize {
    257
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub mode: ControlMode,
    pub coupling: CouplingPair,
    pub omega: Interval,
    pub horizon: f64,
    /// Truncation of the control series.
    pub modes: usize,
    /// Truncation for analyze, classify and the minimal-time estimate;
    /// defaults to `modes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_modes: Option<usize>,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub seed: u64,
    /// Galerkin size for verification; defaults to `modes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub galerkin_modes: Option<usize>,
    /// Use adjoint tables projected on the Galerkin span used by verify.
    #[serde(default = "default_true")]
    pub project_adjoint: bool,
    /// Synthesize even when classification does not answer yes.
    #[serde(default)]
    pub allow_uncontrollable: bool,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub quotient_modes: Vec<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Command-line overrides.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub modes: Option<usize>,
    pub horizon: Option<f64>,
}

pub const PRESETS: &[&str] = &[
    "zero",
    "q1",
    "p-linear",
    "boundary-q1",
    "distributed",
    "surrogate",
    "surrogate-short",
    "surrogate-long",
    "tuned",
    "p-constant",
];

impl RunConfig {
    pub fn analysis_modes(&self) -> usize {
        self.analysis_modes.unwrap_or(self.modes)
    }

    pub fn galerkin_modes(&self) -> usize {
        self.galerkin_modes.unwrap_or(self.modes)
    }

    pub fn rule(&self) -> QuadratureRule {
        QuadratureRule::with_tol(self.tolerances.quadrature)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("biortho", t.biortho),
            ("null_ratio", t.null_ratio),
            ("duality", t.duality),
            ("quadrature", t.quadrature),
            ("stepping", t.stepping),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.modes == 0 || self.analysis_modes == Some(0) || self.galerkin_modes == Some(0) {
            return Err(Error::Config("mode counts must be at least 1".into()));
        }
        if self.samples < 2 {
            return Err(Error::Config("samples must be at least 2".into()));
        }
        if self.quotient_modes.contains(&0) {
            return Err(Error::Config("quotient modes start at 1".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(k) = o.modes {
            self.modes = k;
        }
        if let Some(t) = o.horizon {
            self.horizon = t;
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let Some(preset) = value.get("preset") else {
            let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            cfg.validate()?;
            return Ok(cfg);
        };
        let name = preset.as_str().ok_or_else(|| Error::Config("preset must be a string".into()))?;
        let base = preset_config(name)?;
        let mut merged: toml::Table = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        let mut layer = value.clone();
        layer.remove("preset");
        merge(&mut merged, layer);
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(format!("preset {name}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// Deep merge; a layer table carrying a `kind` tag replaces the base table
/// so that fields of a different variant do not leak through.
fn merge(base: &mut toml::Table, layer: toml::Table) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(l)) if !l.contains_key("kind") => merge(b, l),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn omega(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).expect("preset interval")
}

fn pair(p: PiecewisePoly, q: PiecewisePoly) -> CouplingPair {
    CouplingPair::new(p, q).expect("preset coupling")
}

fn surrogate(tau: f64) -> CouplingPair {
    let s = CosineSeries::exponential_profile(SeriesExtent::Half, tau, 40);
    CouplingPair::with_series(PiecewisePoly::zero(), PiecewisePoly::zero(), Some(s)).expect("preset surrogate")
}

/// C2 bump `((x - 0.8)(1.4 - x))^3`, normalized to peak 1.
fn bump_p() -> PiecewisePoly {
    let c: f64 = 0.09;
    let poly = Poly::new(1.1, vec![1.0, 0.0, -3.0 / c, 0.0, 3.0 / (c * c), 0.0, -1.0 / (c * c * c)]);
    PiecewisePoly::embed(omega(0.8, 1.4), poly, Smoothness::W2infty).expect("preset bump")
}

/// q supported left and right of (1, 2) with `I_2 = I_(a,2) = 0`: each side
/// is `1 + c (x - mid)` and `(c_L, c_R)` solve the 2x2 system.
pub fn tuned_coupling() -> Result<CouplingPair> {
    let rule = QuadratureRule::default();
    let piece = |iv: Interval, c: Vec<f64>| PiecewisePoly::embed(iv, Poly::new(iv.mid(), c), Smoothness::Linfty);
    let (left, right) = (Interval::new(0.0, 0.9)?, Interval::new(2.3, PI)?);
    let (l1, l2, r1, r2) = (piece(left, vec![1.0])?, piece(left, vec![0.0, 1.0])?, piece(right, vec![1.0])?, piece(right, vec![0.0, 1.0])?);
    let idx = |q: &PiecewisePoly, a: f64| -> Result<f64> { Ok(compute_iak(&CouplingPair::new(PiecewisePoly::zero(), q.clone())?, a, 2, &rule)?.value) };
    let a = 1.0;
    let m = [[idx(&l2, a)?, idx(&r2, a)?], [idx(&l2, PI)?, idx(&r2, PI)?]];
    let rhs = [-(idx(&l1, a)? + idx(&r1, a)?), -(idx(&l1, PI)? + idx(&r1, PI)?)];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let cl = (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det;
    let cr = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
    CouplingPair::new(PiecewisePoly::zero(), l1.add(&l2.scale(cl)).add(&r1).add(&r2.scale(cr)))
}

/// Named configurations for the documented scenarios.
pub fn preset_config(name: &str) -> Result<RunConfig> {
    let base = RunConfig {
        name: name.to_string(),
        mode: ControlMode::Distributed,
        coupling: CouplingPair::zero(),
        omega: omega(1.0, 2.0),
        horizon: 1.0,
        modes: 6,
        analysis_modes: None,
        initial: InitialData { first: Profile::mode(1), second: Profile::Zero },
        seed: 0,
        galerkin_modes: None,
        project_adjoint: true,
        allow_uncontrollable: false,
        samples: default_samples(),
        quotient_modes: Vec::new(),
        tolerances: Tolerances::default(),
    };
    let both = InitialData { first: Profile::mode(1), second: Profile::mode(2) };
    let cfg = match name {
        "zero" => RunConfig { quotient_modes: vec![1, 2, 3], ..base },
        "q1" => RunConfig { coupling: pair(PiecewisePoly::zero(), PiecewisePoly::constant(1.0)), analysis_modes: Some(30), initial: both, ..base },
        "p-linear" => RunConfig { coupling: pair(PiecewisePoly::polynomial(vec![0.0, 1.0]), PiecewisePoly::zero()), analysis_modes: Some(30), ..base },
        "boundary-q1" => RunConfig {
            mode: ControlMode::Boundary,
            coupling: pair(PiecewisePoly::zero(), PiecewisePoly::constant(1.0)),
            analysis_modes: Some(30),
            initial: both,
            ..base
        },
        "distributed" => RunConfig {
            coupling: pair(bump_p(), PiecewisePoly::zero()),
            horizon: 0.5,
            modes: 8,
            analysis_modes: Some(30),
            initial: both,
            seed: 7,
            ..base
        },
        "surrogate" => RunConfig { coupling: surrogate(0.4), omega: omega(2.0, 3.0), horizon: 0.8, analysis_modes: Some(40), ..base },
        "surrogate-short" | "surrogate-long" => RunConfig {
            coupling: surrogate(0.2),
            omega: omega(2.0, 3.0),
            horizon: if name == "surrogate-short" { 0.1 } else { 0.4 },
            analysis_modes: Some(40),
            quotient_modes: (10..=30).collect(),
            ..base
        },
        "tuned" => RunConfig { coupling: tuned_coupling()?, analysis_modes: Some(10), ..base },
        "p-constant" => RunConfig { coupling: pair(PiecewisePoly::constant(1.0), PiecewisePoly::zero()), analysis_modes: Some(30), ..base },
        other => return Err(Error::Config(format!("unknown preset {other}; known presets: {}", PRESETS.join(", ")))),
    };
    cfg.validate()?;
    Ok(cfg)
}
