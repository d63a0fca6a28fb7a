//! Run configuration read from TOML.
//!
//! ```toml
//! [run]
//! k = 2
//! d = 2
//! seed = 7
//!
//! [torus]
//! theta = [0.3]          # theta_{kl} for k < l, row by row
//! truncation = 32
//! check_truncation = 24  # optional second truncation for the doubling test
//! eval_truncation = 12   # truncation used to evaluate the symbolic formula
//!
//! [elements]
//! x = [{ n = [0, 0], re = 1.5 }, { n = [1, 0], re = 0.2 }, { n = [-1, 0], re = 0.2 }]
//! a_i = "dx"             # or one list of modes per direction
//! a = [{ n = [0, 0], re = 0.1 }]
//!
//! [heat]
//! t_min = 0.02
//! t_max = 0.2
//! points = 40
//! orders = [0, 2, 4, 6]
//!
//! [tolerances]
//! heat_c0_rel = 0.02
//! ```

use crate::torus::{FourierElement, ThetaMatrix, TorusError};
use faer::c64;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Torus(#[from] TorusError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Every numeric threshold used by the verification suites.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub dd_quadrature_rel: f64,
    pub dd_symmetry: f64,
    pub dd_confluent: f64,
    pub dd_expand: f64,
    pub moi_oracle_rel: f64,
    pub moi_commutator: f64,
    pub symbols_identity: f64,
    pub symbols_modular: f64,
    pub symbols_k04: f64,
    pub symbols_k0_limit: f64,
    pub heat_c0_rel: f64,
    pub heat_c1_rel: f64,
    pub heat_control_rel: f64,
    pub conjugation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dd_quadrature_rel: 1e-8,
            dd_symmetry: 1e-10,
            dd_confluent: 1e-10,
            dd_expand: 1e-12,
            moi_oracle_rel: 1e-6,
            moi_commutator: 1e-10,
            symbols_identity: 1e-10,
            symbols_modular: 1e-8,
            symbols_k04: 1e-12,
            symbols_k0_limit: 1e-4,
            heat_c0_rel: 0.02,
            heat_c1_rel: 0.05,
            heat_control_rel: 1e-4,
            conjugation: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub n: Vec<i32>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
enum RawAi {
    Keyword(String),
    Explicit(Vec<Vec<Mode>>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    k: Option<u32>,
    d: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTorus {
    theta: Option<Vec<f64>>,
    truncation: Option<usize>,
    check_truncation: Option<usize>,
    eval_truncation: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawElements {
    x: Option<Vec<Mode>>,
    a_i: Option<RawAi>,
    a: Option<Vec<Mode>>,
    y: Option<Vec<Mode>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct HeatGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub orders: Vec<u32>,
}

impl Default for HeatGrid {
    fn default() -> Self {
        HeatGrid { t_min: 0.02, t_max: 0.2, points: 40, orders: vec![0, 2, 4, 6] }
    }
}

impl HeatGrid {
    /// Geometric grid from `t_min` to `t_max`.
    pub fn times(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.t_min];
        }
        let r = (self.t_max / self.t_min).ln() / (self.points - 1) as f64;
        (0..self.points).map(|i| self.t_min * (r * i as f64).exp()).collect()
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ConjugationSetup {
    /// Increasing truncations; the error must shrink along this list.
    pub truncations: Vec<usize>,
    /// Radius of the compared interior block.
    pub interior: usize,
}

impl Default for ConjugationSetup {
    fn default() -> Self {
        ConjugationSetup { truncations: vec![16, 24, 32], interior: 4 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    torus: RawTorus,
    #[serde(default)]
    elements: RawElements,
    #[serde(default)]
    heat: HeatGrid,
    #[serde(default)]
    conjugation: ConjugationSetup,
    #[serde(default)]
    tolerances: Tolerances,
}

/// First-order coefficients of `P`.
#[derive(Clone, Debug, PartialEq)]
pub enum FirstOrder {
    /// `a_i = D_i x`, which makes `P = sum D_i x D_i + a` symmetric.
    DerivativeOfX,
    Explicit(Vec<FourierElement>),
}

/// Validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub k: u32,
    pub d: usize,
    pub seed: u64,
    pub theta: ThetaMatrix,
    pub truncation: usize,
    pub check_truncation: Option<usize>,
    pub eval_truncation: usize,
    pub x: Option<FourierElement>,
    pub a_i: FirstOrder,
    pub a: Option<FourierElement>,
    pub y: Option<FourierElement>,
    pub heat: HeatGrid,
    pub conjugation: ConjugationSetup,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("").expect("empty configuration is valid")
    }
}

fn element(d: usize, modes: &[Mode], name: &str) -> Result<FourierElement, ConfigError> {
    let mut e = FourierElement::zero(d);
    for m in modes {
        if m.n.len() != d {
            return invalid(format!("{name}: mode {:?} has {} components, expected {d}", m.n, m.n.len()));
        }
        if !m.re.is_finite() || !m.im.is_finite() {
            return invalid(format!("{name}: non-finite coefficient"));
        }
        e.add_mode(&m.n, c64::new(m.re, m.im));
    }
    Ok(e)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let k = raw.run.k.unwrap_or(2);
        if k % 2 == 1 {
            return invalid(format!("order k must be even, got {k}"));
        }
        let d = raw.run.d.unwrap_or(2);
        if d < 2 {
            return invalid(format!("numeric runs need d >= 2, got {d}"));
        }
        let pairs = d * (d - 1) / 2;
        let theta_entries = raw.torus.theta.unwrap_or_else(|| vec![0.0; pairs]);
        if theta_entries.len() != pairs {
            return invalid(format!("theta needs {pairs} entries for d={d}, got {}", theta_entries.len()));
        }
        let mut full = vec![0.0; d * d];
        let mut it = theta_entries.iter();
        for r in 0..d {
            for c in r + 1..d {
                let v = *it.next().expect("length checked");
                full[r * d + c] = v;
                full[c * d + r] = -v;
            }
        }
        let theta = ThetaMatrix::new(d, full)?;
        let truncation = raw.torus.truncation.unwrap_or(32);
        let eval_truncation = raw.torus.eval_truncation.unwrap_or(12);
        if truncation == 0 || eval_truncation == 0 || raw.torus.check_truncation == Some(0) {
            return invalid("truncations must be positive");
        }
        let x = raw.elements.x.as_deref().map(|m| element(d, m, "x")).transpose()?;
        let a = raw.elements.a.as_deref().map(|m| element(d, m, "a")).transpose()?;
        let y = raw.elements.y.as_deref().map(|m| element(d, m, "y")).transpose()?;
        let a_i = match raw.elements.a_i {
            None => FirstOrder::Explicit(vec![FourierElement::zero(d); d]),
            Some(RawAi::Keyword(s)) if s == "dx" => FirstOrder::DerivativeOfX,
            Some(RawAi::Keyword(s)) => return invalid(format!("a_i: unknown keyword {s:?} (expected \"dx\")")),
            Some(RawAi::Explicit(lists)) => {
                if lists.len() != d {
                    return invalid(format!("a_i needs {d} mode lists, got {}", lists.len()));
                }
                FirstOrder::Explicit(lists.iter().map(|m| element(d, m, "a_i")).collect::<Result<_, _>>()?)
            }
        };
        let heat = raw.heat;
        if !(heat.t_min > 0.0 && heat.t_max >= heat.t_min && heat.points >= 1) {
            return invalid("heat grid needs 0 < t_min <= t_max and at least one point");
        }
        if heat.orders.iter().any(|k| k % 2 == 1) {
            return invalid("heat orders must be even");
        }
        let conjugation = raw.conjugation;
        if conjugation.truncations.is_empty() || conjugation.truncations.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("conjugation truncations must be a nonempty increasing list");
        }
        if conjugation.truncations[0] <= conjugation.interior {
            return invalid("conjugation interior must be smaller than every truncation");
        }
        let tol = &raw.tolerances;
        let all = [
            tol.dd_quadrature_rel,
            tol.dd_symmetry,
            tol.dd_confluent,
            tol.dd_expand,
            tol.moi_oracle_rel,
            tol.moi_commutator,
            tol.symbols_identity,
            tol.symbols_modular,
            tol.symbols_k04,
            tol.symbols_k0_limit,
            tol.heat_c0_rel,
            tol.heat_c1_rel,
            tol.heat_control_rel,
            tol.conjugation,
        ];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return invalid("tolerances must be positive and finite");
        }
        Ok(RunConfig {
            k,
            d,
            seed: raw.run.seed.unwrap_or(7),
            theta,
            truncation,
            check_truncation: raw.torus.check_truncation,
            eval_truncation,
            x,
            a_i,
            a,
            y,
            heat,
            conjugation,
            tolerances: raw.tolerances,
        })
    }

    /// The first-order coefficients as Fourier elements.
    pub fn first_order(&self, x: &FourierElement) -> Vec<FourierElement> {
        match &self.a_i {
            FirstOrder::DerivativeOfX => (0..self.d).map(|k| x.derivative(k)).collect(),
            FirstOrder::Explicit(v) => v.clone(),
        }
    }
}
