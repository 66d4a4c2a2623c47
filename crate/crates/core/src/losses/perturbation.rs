use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Norm exponent `p > 1` of the perturbation ball, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_infinite() && p > 0.0 {
            Ok(PNorm::Infinity)
        } else if p.is_finite() && p > 1.0 {
            Ok(PNorm::Finite(p))
        } else {
            Err(Error::Config(format!("norm exponent must satisfy p > 1, got {p}")))
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            PNorm::Finite(p) => p,
            PNorm::Infinity => f64::INFINITY,
        }
    }

    /// Conjugate exponent: `1/p + 1/q = 1`.
    pub fn conjugate(&self) -> f64 {
        match *self {
            PNorm::Finite(p) => p / (p - 1.0),
            PNorm::Infinity => 1.0,
        }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match *self {
            PNorm::Infinity => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            PNorm::Finite(p) => lp_norm(v, p),
        }
    }

    /// Norm in the dual space (`L_q`).
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match *self {
            PNorm::Infinity => v.iter().map(|x| x.abs()).sum(),
            PNorm::Finite(_) => lp_norm(v, self.conjugate()),
        }
    }
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    let scale = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt();
    }
    scale * v.iter().map(|x| (x.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            PNorm::Finite(p) => s.serialize_f64(p),
            PNorm::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Text(t) => t
                .trim()
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("bad norm exponent {t:?}")))?,
        };
        PNorm::new(p).map_err(serde::de::Error::custom)
    }
}

impl std::str::FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad norm exponent {s:?}")))?;
        PNorm::new(p)
    }
}

/// The ball `{eps : ||eps||_p <= rho}` in flat parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub rho: f64,
    pub p: PNorm,
}

impl PerturbationConfig {
    pub fn new(rho: f64, p: PNorm) -> Result<Self> {
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::Config(format!("rho must be finite and >= 0, got {rho}")));
        }
        Ok(Self { rho, p })
    }

    pub fn q(&self) -> f64 {
        self.p.conjugate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonStatus {
    Ok,
    /// The gradient was exactly zero; no direction increases the objective
    /// at first order and the perturbation is zero.
    FlatGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualNormSolution {
    pub eps: Vec<f64>,
    pub status: EpsilonStatus,
}

/// Maximizer of `<g, eps>` over `||eps||_p <= rho`:
///
/// `eps* = rho * sign(g) * |g|^(q-1) / (||g||_q^q)^(1/p)`
///
/// which attains `<g, eps*> = rho * ||g||_q`. `sign(0) = 0`, so coordinates
/// with zero gradient are never perturbed.
pub fn dual_norm_epsilon(g: &[f64], cfg: &PerturbationConfig) -> DualNormSolution {
    let scale = g.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return DualNormSolution {
            eps: vec![0.0; g.len()],
            status: EpsilonStatus::FlatGradient,
        };
    }
    let rho = cfg.rho;
    // Work with g / max|g|; the maximizer depends only on the direction of g.
    let eps = match cfg.p {
        PNorm::Infinity => g.iter().map(|&x| rho * signum0(x)).collect(),
        PNorm::Finite(p) if p == 2.0 => {
            let norm = g.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt();
            g.iter().map(|&x| rho * (x / scale) / norm).collect()
        }
        PNorm::Finite(p) => {
            let q = cfg.q();
            let sum_q: f64 = g.iter().map(|x| (x.abs() / scale).powf(q)).sum();
            let denom = sum_q.powf(1.0 / p);
            g.iter()
                .map(|&x| rho * signum0(x) * (x.abs() / scale).powf(q - 1.0) / denom)
                .collect()
        }
    };
    DualNormSolution {
        eps,
        status: EpsilonStatus::Ok,
    }
}

fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
