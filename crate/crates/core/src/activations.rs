//! Activation catalog with the metadata the bounds consume.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussmath::abs_moment;

/// Safe upper bound on `sup |d/dx x·sigmoid(x)| ≈ 1.0998`.
pub const SWISH_LIPSCHITZ: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ActivationKind {
    Relu,
    Perceptron,
    Sigmoid,
    Tanh,
    Sine,
    Softplus,
    Swish,
    SqrtRelu,
    Monomial(u32),
    /// `σ ≡ c`. Useful for degenerate test networks.
    Constant(f64),
    /// A catalog function carrying user-supplied metadata.
    Custom(Box<ActivationKind>),
}

impl ActivationKind {
    /// The function actually evaluated (strips `Custom`).
    pub fn base(&self) -> &ActivationKind {
        match self {
            ActivationKind::Custom(inner) => inner.base(),
            other => other,
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Relu => write!(f, "relu"),
            ActivationKind::Perceptron => write!(f, "perceptron"),
            ActivationKind::Sigmoid => write!(f, "sigmoid"),
            ActivationKind::Tanh => write!(f, "tanh"),
            ActivationKind::Sine => write!(f, "sine"),
            ActivationKind::Softplus => write!(f, "softplus"),
            ActivationKind::Swish => write!(f, "swish"),
            ActivationKind::SqrtRelu => write!(f, "sqrt_relu"),
            ActivationKind::Monomial(k) => write!(f, "monomial:{k}"),
            ActivationKind::Constant(c) => write!(f, "constant:{c}"),
            ActivationKind::Custom(base) => write!(f, "custom:{base}"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((name, param)) => (name, Some(param)),
            None => (s, None),
        };
        let kind = match (name.to_ascii_lowercase().as_str(), param) {
            ("relu", None) => ActivationKind::Relu,
            ("perceptron" | "step", None) => ActivationKind::Perceptron,
            ("sigmoid", None) => ActivationKind::Sigmoid,
            ("tanh", None) => ActivationKind::Tanh,
            ("sine" | "sin", None) => ActivationKind::Sine,
            ("softplus", None) => ActivationKind::Softplus,
            ("swish", None) => ActivationKind::Swish,
            ("sqrt_relu", None) => ActivationKind::SqrtRelu,
            ("monomial", Some(k)) => {
                let k: u32 = k
                    .parse()
                    .map_err(|_| Error::Parse(format!("monomial degree must be a positive integer, got {k:?}")))?;
                if k == 0 {
                    return Err(Error::InvalidParameter("monomial degree must be >= 1".into()));
                }
                ActivationKind::Monomial(k)
            }
            ("constant", Some(c)) => {
                let c: f64 = c
                    .parse()
                    .map_err(|_| Error::Parse(format!("constant activation needs a real value, got {c:?}")))?;
                if !c.is_finite() {
                    return Err(Error::InvalidParameter("constant activation must be finite".into()));
                }
                ActivationKind::Constant(c)
            }
            ("custom", Some(base)) => ActivationKind::Custom(Box::new(base.parse()?)),
            _ => return Err(Error::Parse(format!("unknown activation {s:?}"))),
        };
        Ok(kind)
    }
}

impl From<ActivationKind> for String {
    fn from(kind: ActivationKind) -> String {
        kind.to_string()
    }
}

impl TryFrom<String> for ActivationKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Envelope `max{|σ|, |σ'|(, |σ''|)} <= r1 + r2 |x|^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthEnvelope {
    pub r1: f64,
    pub r2: f64,
    pub gamma: f64,
}

impl GrowthEnvelope {
    pub fn new(r1: f64, r2: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("r1", r1), ("r2", r2), ("gamma", gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "growth envelope {name} must be a finite nonnegative real, got {v}"
                )));
            }
        }
        Ok(Self { r1, r2, gamma })
    }

    pub fn at(&self, x: f64) -> f64 {
        self.r1 + self.r2 * x.abs().powf(self.gamma)
    }

    /// Envelope for `x^k` and all its derivatives with `r1 = k!`, `γ = k`
    /// and the smallest `r2` that makes `(k!/j!)|x|^j <= k! + r2|x|^k` hold
    /// for every `j = 0..=k`.
    pub fn for_monomial(k: u32) -> Self {
        let kf = f64::from(k);
        let factorial = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let r1 = factorial(k);
        let mut r2: f64 = 1.0;
        for j in 1..k {
            let a = r1 / factorial(j);
            // maximiser of (a t^j - r1) / t^k
            let t = (kf * factorial(j) / (kf - f64::from(j))).powf(1.0 / f64::from(j));
            let needed = (a * t.powi(j as i32) - r1) / t.powi(k as i32);
            r2 = r2.max(needed);
        }
        Self { r1, r2, gamma: kf }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    /// Lipschitz constant of σ.
    pub lip: Option<f64>,
    /// Lipschitz constant of σ².
    pub lip_sq: Option<f64>,
    pub growth: Option<GrowthEnvelope>,
    /// |σ(0)|
    pub sigma_at_zero: f64,
}

impl ActivationSpec {
    /// Catalog constructor with the documented metadata for each kind.
    pub fn new(kind: ActivationKind) -> Result<Self> {
        let (lip, lip_sq, growth) = match &kind {
            ActivationKind::Relu
            | ActivationKind::Tanh
            | ActivationKind::Sine
            | ActivationKind::Softplus => (Some(1.0), None, None),
            ActivationKind::Perceptron => (None, None, None),
            ActivationKind::Sigmoid => (Some(0.25), None, None),
            ActivationKind::Swish => (Some(SWISH_LIPSCHITZ), None, None),
            ActivationKind::SqrtRelu => (None, Some(1.0), None),
            ActivationKind::Monomial(0) => {
                return Err(Error::InvalidParameter("monomial degree must be >= 1".into()))
            }
            ActivationKind::Monomial(k) => {
                let lip = (*k == 1).then_some(1.0);
                (lip, None, Some(GrowthEnvelope::for_monomial(*k)))
            }
            ActivationKind::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::InvalidParameter("constant activation must be finite".into()));
                }
                (Some(0.0), Some(0.0), None)
            }
            ActivationKind::Custom(_) => {
                return Err(Error::InvalidParameter(
                    "custom activations are built with ActivationSpec::custom".into(),
                ))
            }
        };
        let mut spec = Self {
            kind,
            lip,
            lip_sq,
            growth,
            sigma_at_zero: 0.0,
        };
        spec.sigma_at_zero = spec.eval(0.0).abs();
        Ok(spec)
    }

    /// A catalog function with caller-asserted metadata.
    pub fn custom(
        base: ActivationKind,
        lip: Option<f64>,
        lip_sq: Option<f64>,
        growth: Option<GrowthEnvelope>,
    ) -> Result<Self> {
        let base = match base {
            ActivationKind::Custom(inner) => *inner,
            other => other,
        };
        if let ActivationKind::Monomial(0) = base {
            return Err(Error::InvalidParameter("monomial degree must be >= 1".into()));
        }
        for (name, v) in [("lip", lip), ("lip_sq", lip_sq)] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "{name} must be a finite nonnegative real, got {v}"
                    )));
                }
            }
        }
        if let Some(g) = growth {
            GrowthEnvelope::new(g.r1, g.r2, g.gamma)?;
        }
        let mut spec = Self {
            kind: ActivationKind::Custom(Box::new(base)),
            lip,
            lip_sq,
            growth,
            sigma_at_zero: 0.0,
        };
        spec.sigma_at_zero = spec.eval(0.0).abs();
        Ok(spec)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::new(name.parse()?)
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind.base() {
            ActivationKind::Relu => {
                if x >= 0.0 {
                    x
                } else {
                    0.0
                }
            }
            ActivationKind::Perceptron => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => logistic(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Sine => x.sin(),
            ActivationKind::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            ActivationKind::Swish => x * logistic(x),
            ActivationKind::SqrtRelu => x.max(0.0).sqrt(),
            ActivationKind::Monomial(k) => x.powi(*k as i32),
            ActivationKind::Constant(c) => *c,
            ActivationKind::Custom(_) => unreachable!("base() strips Custom"),
        }
    }

    /// Closed form of `E[σ(κZ)^r]` for `r ∈ {2, 4}`, where one exists.
    pub fn moment_oracle(&self, kappa: f64, r: u32) -> Option<f64> {
        if r != 2 && r != 4 {
            return None;
        }
        let k = kappa.abs();
        let value = match self.kind.base() {
            ActivationKind::Relu => match r {
                2 => 0.5 * k * k,
                _ => 1.5 * k.powi(4),
            },
            ActivationKind::Perceptron => {
                if k == 0.0 {
                    1.0
                } else {
                    0.5
                }
            }
            // σ² is the ReLU
            ActivationKind::SqrtRelu => match r {
                2 => k / (2.0 * PI).sqrt(),
                _ => 0.5 * k * k,
            },
            ActivationKind::Sine => {
                let e2 = (-2.0 * k * k).exp();
                match r {
                    2 => 0.5 * (1.0 - e2),
                    _ => 0.375 - 0.5 * e2 + 0.125 * (-8.0 * k * k).exp(),
                }
            }
            ActivationKind::Monomial(d) => {
                let p = f64::from(d * r);
                k.powf(p) * abs_moment(p).ok()?
            }
            ActivationKind::Constant(c) => c.powi(r as i32),
            _ => return None,
        };
        Some(value)
    }

    pub fn has_moment_oracle(&self) -> bool {
        self.moment_oracle(1.0, 2).is_some()
    }

    /// Whether some case of the collective-observable estimate applies.
    pub fn supports_deep_bounds(&self) -> bool {
        self.lip.is_some()
            || self.lip_sq.is_some()
            || self.growth.is_some()
            || *self.kind.base() == ActivationKind::Perceptron
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One term `coeff · x^power` of a generalized polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub power: f64,
    pub coeff: f64,
}

/// Polynomial with nonnegative coefficients. Powers are real so that the
/// growth-envelope case with non-integer γ fits the same representation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    terms: Vec<PolyTerm>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    /// From `d_0, …, d_m`.
    pub fn from_coeffs(coeffs: &[f64]) -> Result<Self> {
        Self::from_terms(
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &coeff)| PolyTerm {
                    power: k as f64,
                    coeff,
                })
                .collect(),
        )
    }

    pub fn from_terms(terms: Vec<PolyTerm>) -> Result<Self> {
        let mut kept: Vec<PolyTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            if !(t.coeff >= 0.0) || !t.coeff.is_finite() || !(t.power >= 0.0) || !t.power.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "polynomial terms need finite nonnegative coefficients and powers, got {t:?}"
                )));
            }
            if t.coeff == 0.0 {
                continue;
            }
            match kept.iter_mut().find(|k| k.power == t.power) {
                Some(k) => k.coeff += t.coeff,
                None => kept.push(t),
            }
        }
        kept.sort_by(|a, b| a.power.total_cmp(&b.power));
        Ok(Self { terms: kept })
    }

    pub fn terms(&self) -> &[PolyTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `x^power` (0 if absent).
    pub fn coeff(&self, power: f64) -> f64 {
        self.terms
            .iter()
            .find(|t| t.power == power)
            .map_or(0.0, |t| t.coeff)
    }

    /// `P(|x|)`.
    pub fn eval_abs(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.terms.iter().map(|t| t.coeff * ax.powf(t.power)).sum()
    }

    /// `‖P(|Z|)‖_{L²} = sqrt(Σ_j Σ_k d_j d_k E|Z|^{p_j + p_k})`.
    pub fn gaussian_l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for a in &self.terms {
            for b in &self.terms {
                acc += a.coeff * b.coeff * abs_moment(a.power + b.power).expect("powers are nonnegative");
            }
        }
        acc.sqrt()
    }
}

/// Which sufficient condition produced `P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PCase {
    Perceptron,
    Lipschitz,
    LipschitzSquare,
    Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PSelection {
    pub case: PCase,
    pub polynomial: Polynomial,
    pub l2_norm: f64,
}

fn check_prior(cb: f64, cw: f64) -> Result<()> {
    if !(cb > 0.0) || !cb.is_finite() || !(cw > 0.0) || !cw.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "prior variances must be positive and finite, got C_b = {cb}, C_W = {cw}"
        )));
    }
    Ok(())
}

/// Every applicable `P` for this activation, in case order.
pub fn p_candidates(act: &ActivationSpec, cb: f64, cw: f64) -> Result<Vec<PSelection>> {
    check_prior(cb, cw)?;
    let mut out = Vec::new();
    let mut push = |case, polynomial: Polynomial| {
        let l2_norm = polynomial.gaussian_l2_norm();
        out.push(PSelection {
            case,
            polynomial,
            l2_norm,
        });
    };
    if *act.kind.base() == ActivationKind::Perceptron {
        push(PCase::Perceptron, Polynomial::zero());
    }
    if let Some(lip) = act.lip {
        // The published coefficient is 2|σ(0)| C_W Lip / (2 √C_b).
        let linear = act.sigma_at_zero * cw * lip / cb.sqrt();
        push(PCase::Lipschitz, Polynomial::from_coeffs(&[0.0, linear, cw * lip * lip])?);
    }
    if let Some(lip_sq) = act.lip_sq {
        push(
            PCase::LipschitzSquare,
            Polynomial::from_coeffs(&[0.0, lip_sq * cw / (2.0 * cb.sqrt())])?,
        );
    }
    if let Some(g) = act.growth {
        // (C_W/√C_b) x (r1 + r2 x^γ), reproduced as published. For unbounded
        // σ it does not dominate the squared-activation increment, so the
        // sampled domination check covers the other three cases only.
        let scale = cw / cb.sqrt();
        push(
            PCase::Growth,
            Polynomial::from_terms(vec![
                PolyTerm {
                    power: 1.0,
                    coeff: scale * g.r1,
                },
                PolyTerm {
                    power: 1.0 + g.gamma,
                    coeff: scale * g.r2,
                },
            ])?,
        );
    }
    Ok(out)
}

/// The applicable `P` with the smallest `‖P(|Z|)‖_{L²}`.
pub fn p_polynomial(act: &ActivationSpec, cb: f64, cw: f64) -> Result<PSelection> {
    p_candidates(act, cb, cw)?
        .into_iter()
        .min_by(|a, b| a.l2_norm.total_cmp(&b.l2_norm))
        .ok_or_else(|| {
            Error::DeepBoundsUnavailable(format!(
                "{} has no Lipschitz, squared-Lipschitz or growth data and is not the perceptron",
                act.name()
            ))
        })
}

/// `‖P(|Z|)‖_{L²}`.
///
/// For the ReLU, `σ(x√A₂)² − σ(x√A₁)² = C_W x² 1{x ≥ 0} (a₂ − a₁)` exactly,
/// so the indicator can be kept and the norm is `C_W √(3/2)` rather than the
/// generic Lipschitz value `C_W √3`.
pub fn p_l2_norm(act: &ActivationSpec, cb: f64, cw: f64) -> Result<f64> {
    let selection = p_polynomial(act, cb, cw)?;
    Ok(match act.kind.base() {
        ActivationKind::Relu => cw * 1.5f64.sqrt(),
        ActivationKind::Perceptron => 0.0,
        _ => selection.l2_norm,
    })
}
