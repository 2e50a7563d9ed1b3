//! Gaussian special functions and one-dimensional Gaussian expectations.
//!
//! Every expectation the bounds need has the form `E[g(Z)]` with
//! `Z ~ N(0, 1)`. Integrands such as `relu(κz)^r` have a kink at the
//! origin, so the default scheme integrates each half-line separately on
//! `[0, R]` (in standardized units) with the substitution `z = R t²`, which
//! also smooths square-root endpoint behaviour. Gauss-Legendre nodes are
//! cached per node count.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};
use statrs::function::{erf, gamma};

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Relative change between successive refinements at which quadrature stops.
pub const QUADRATURE_TOLERANCE: f64 = 1e-12;

/// Node count above which refinement gives up (unless the scheme starts higher).
pub const MAX_QUADRATURE_NODES: usize = 3200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub node_count: usize,
    pub split_at_zero: bool,
    /// Integration half-width in standard deviations of `Z`.
    pub truncation_radius: f64,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self {
            node_count: 200,
            split_at_zero: true,
            truncation_radius: 12.0,
        }
    }
}

impl QuadratureScheme {
    pub fn with_nodes(node_count: usize) -> Result<Self> {
        let scheme = Self {
            node_count,
            ..Self::default()
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 8 {
            return Err(Error::InvalidParameter(format!(
                "quadrature node_count must be >= 8, got {}",
                self.node_count
            )));
        }
        if !(self.truncation_radius >= 10.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature truncation_radius must be >= 10, got {}",
                self.truncation_radius
            )));
        }
        Ok(())
    }

    fn max_nodes(&self) -> usize {
        MAX_QUADRATURE_NODES.max(self.node_count)
    }

    /// One fixed-size evaluation of `E[g(Z)]`.
    fn evaluate<F: Fn(f64) -> f64>(&self, nodes: usize, g: &F) -> f64 {
        let rule = legendre_rule(nodes);
        let radius = self.truncation_radius;
        let mut acc = CompensatedSum::new();
        if self.split_at_zero {
            // z = ±R t², t in [0, 1], dz = 2 R t dt
            for &(node, weight) in rule.iter() {
                let t = 0.5 * (node + 1.0);
                let z = radius * t * t;
                let jac = 0.5 * weight * 2.0 * radius * t * normal_pdf(z);
                acc.add(jac * g(z));
                acc.add(jac * g(-z));
            }
        } else {
            for &(node, weight) in rule.iter() {
                let z = radius * node;
                acc.add(radius * weight * normal_pdf(z) * g(z));
            }
        }
        acc.value()
    }

    /// `E[g(Z)]` with node doubling until the relative change drops below
    /// [`QUADRATURE_TOLERANCE`].
    pub fn expectation<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        self.validate()?;
        let mut nodes = self.node_count;
        let mut previous = self.evaluate(nodes, &g);
        loop {
            let next_nodes = nodes * 2;
            if next_nodes > self.max_nodes() {
                let change = relative_change(previous, self.evaluate(nodes, &g));
                return Err(Error::Quadrature { nodes, change });
            }
            let current = self.evaluate(next_nodes, &g);
            let change = relative_change(previous, current);
            if !current.is_finite() {
                return Err(Error::Quadrature {
                    nodes: next_nodes,
                    change: f64::NAN,
                });
            }
            if change <= QUADRATURE_TOLERANCE {
                return Ok(current);
            }
            previous = current;
            nodes = next_nodes;
        }
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn legendre_rule(nodes: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(nodes)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(nodes).expect("node count >= 8");
            Arc::new(rule.into_node_weight_pairs())
        })
        .clone()
}

/// `E|Z|^p = 2^{p/2} Γ((p+1)/2) / √π` for real `p >= 0`.
pub fn abs_moment(p: f64) -> Result<f64> {
    if !(p >= 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "absolute moment order must be a finite nonnegative real, got {p}"
        )));
    }
    Ok(2f64.powf(0.5 * p) * gamma::gamma(0.5 * (p + 1.0)) / PI.sqrt())
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF Φ.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal quantile Φ⁻¹.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Halley step polishes the inverse to full precision
    let u = (normal_cdf(x) - p) / normal_pdf(x);
    if u.is_finite() {
        x - u / (1.0 + 0.5 * x * u)
    } else {
        x
    }
}

/// `E[σ(κZ)^r]` for `r ∈ {1, 2, 4}`.
///
/// Uses the activation's closed-form moments when available; `κ = 0` is
/// handled exactly as `σ(0)^r`. The law of `σ(κZ)` depends on `|κ|` only.
pub fn expect_sigma_power(
    act: &ActivationSpec,
    kappa: f64,
    r: u32,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    if !matches!(r, 1 | 2 | 4) {
        return Err(Error::InvalidParameter(format!(
            "moment order must be 1, 2 or 4, got {r}"
        )));
    }
    if !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!("scale must be finite, got {kappa}")));
    }
    let kappa = kappa.abs();
    if kappa == 0.0 {
        return Ok(act.eval(0.0).powi(r as i32));
    }
    if let Some(value) = act.moment_oracle(kappa, r) {
        return Ok(value);
    }
    expect_sigma_power_quadrature(act, kappa, r, scheme)
}

/// Quadrature route for `E[σ(κZ)^r]`, bypassing any closed form.
pub fn expect_sigma_power_quadrature(
    act: &ActivationSpec,
    kappa: f64,
    r: u32,
    scheme: &QuadratureScheme,
) -> Result<f64> {
    scheme.expectation(|z| act.eval(kappa * z).powi(r as i32))
}

/// `Var(σ(κZ)²) = E[σ(κZ)⁴] − (E[σ(κZ)²])²`.
///
/// Fails when the variance vanishes relative to the fourth moment, since the
/// shallow bounds need it strictly positive.
pub fn variance_sigma_sq(act: &ActivationSpec, kappa: f64, scheme: &QuadratureScheme) -> Result<f64> {
    let fourth = expect_sigma_power(act, kappa, 4, scheme)?;
    let second = expect_sigma_power(act, kappa, 2, scheme)?;
    let variance = fourth - second * second;
    if !fourth.is_finite() || !variance.is_finite() {
        return Err(Error::Degenerate(format!(
            "fourth moment of the activation is not finite at scale {kappa}"
        )));
    }
    if variance <= 1e-14 * fourth || fourth == 0.0 {
        return Err(Error::Degenerate(format!(
            "Var(sigma(kappa Z)^2) = 0 at kappa = {kappa}; the shallow bounds need it strictly positive"
        )));
    }
    Ok(variance)
}
