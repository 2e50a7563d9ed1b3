//! Output localization: limiting Gaussian rectangle probabilities and
//! certified probability intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{deep_convex_bound, shallow_bounds};
use crate::error::{Error, Result};
use crate::gaussmath::normal_cdf;
use crate::recursion::{LayerStats, Network};

/// Axis-aligned box `Π [r_i, s_i]` with extended-real endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    bounds: Vec<(f64, f64)>,
}

impl Rect {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidParameter("rectangle needs at least one coordinate".into()));
        }
        for (i, &(r, s)) in bounds.iter().enumerate() {
            if r.is_nan() || s.is_nan() || r > s {
                return Err(Error::InvalidParameter(format!(
                    "coordinate {}: need lo <= hi, got [{r}, {s}]",
                    i + 1
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// The whole space `ℝ^d`.
    pub fn full(d: usize) -> Result<Self> {
        Self::new(vec![(f64::NEG_INFINITY, f64::INFINITY); d])
    }

    /// `[-h, h]^d`.
    pub fn symmetric(d: usize, h: f64) -> Result<Self> {
        Self::new(vec![(-h, h); d])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && self.bounds.iter().zip(y).all(|(&(r, s), &v)| r <= v && v <= s)
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

fn parse_endpoint(tok: &str) -> Result<f64> {
    match tok.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::Parse(format!("bad rectangle endpoint {tok:?}"))),
    }
}

/// Parses `lo:hi,lo:hi,…`; endpoints accept `inf` and `-inf`.
impl FromStr for Rect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bounds = s
            .split(',')
            .map(|pair| {
                let (lo, hi) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("expected lo:hi, got {pair:?}")))?;
                Ok((parse_endpoint(lo)?, parse_endpoint(hi)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Rect::new(bounds)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.bounds.iter().map(|(r, s)| format!("{r}:{s}")).collect();
        f.write_str(&parts.join(","))
    }
}

fn standardized_cdf(t: f64, nu: f64) -> f64 {
    if t == f64::INFINITY {
        1.0
    } else if t == f64::NEG_INFINITY {
        0.0
    } else {
        normal_cdf(t / nu)
    }
}

/// `P(N(0, ν² I) ∈ rect) = Π (Φ(s_i/ν) − Φ(r_i/ν))`.
pub fn gaussian_rect_prob(nu_sq: f64, rect: &Rect) -> Result<f64> {
    if !(nu_sq > 0.0) || !nu_sq.is_finite() {
        return Err(Error::Degenerate(format!("limiting variance must be positive, got {nu_sq}")));
    }
    let nu = nu_sq.sqrt();
    Ok(rect
        .bounds()
        .iter()
        .map(|&(r, s)| (standardized_cdf(s, nu) - standardized_cdf(r, nu)).max(0.0))
        .product())
}

/// Limiting probability of `rect` under the `n_out`-dimensional output law.
pub fn limit_rect_prob(stats: &LayerStats, n_out: usize, rect: &Rect) -> Result<f64> {
    rect.check_dim(n_out)?;
    gaussian_rect_prob(stats.nu_sq, rect)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalizationMode {
    /// Total-variation bound of a one-hidden-layer univariate network.
    TvShallow,
    /// Convex-distance bound of a deep network.
    ConvexDeep,
}

impl LocalizationMode {
    /// Shallow univariate networks use the TV bound, everything else the
    /// convex bound.
    pub fn for_network(net: &Network) -> Self {
        if net.arch.is_shallow_univariate() {
            LocalizationMode::TvShallow
        } else {
            LocalizationMode::ConvexDeep
        }
    }
}

impl FromStr for LocalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv_shallow" | "shallow" => Ok(LocalizationMode::TvShallow),
            "convex_deep" | "deep" => Ok(LocalizationMode::ConvexDeep),
            other => Err(Error::Parse(format!("unknown localization mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub rect: String,
    pub p_limit: f64,
    pub c_bound: f64,
    pub interval: (f64, f64),
    pub mode: LocalizationMode,
    pub nu_sq: f64,
}

impl LocalizationReport {
    pub fn contains(&self, p: f64) -> bool {
        self.interval.0 <= p && p <= self.interval.1
    }
}

/// Certified interval `[p − C, p + C] ∩ [0, 1]` for `P(z⁽ᴸ⁺¹⁾ ∈ rect)`.
pub fn certified_interval(net: &Network, rect: &Rect, mode: LocalizationMode) -> Result<LocalizationReport> {
    rect.check_dim(net.arch.n_out)?;
    let (c_bound, nu_sq) = match mode {
        LocalizationMode::TvShallow => {
            let b = shallow_bounds(net)?;
            let nu_sq = b.total_variation.constants["nu_sq"];
            (b.total_variation.value, nu_sq)
        }
        LocalizationMode::ConvexDeep => {
            let b = deep_convex_bound(net)?;
            (b.value, b.constants["nu_sq"])
        }
    };
    let p_limit = gaussian_rect_prob(nu_sq, rect)?;
    Ok(LocalizationReport {
        rect: rect.to_string(),
        p_limit,
        c_bound,
        interval: ((p_limit - c_bound).max(0.0), (p_limit + c_bound).min(1.0)),
        mode,
        nu_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ActivationSpec;
    use crate::recursion::Architecture;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn relu(hidden: Vec<usize>, n_out: usize) -> Network {
        let arch = Architecture::new(4, hidden, n_out, 1.0, 1.0).unwrap();
        Network::new(ActivationSpec::from_name("relu").unwrap(), arch, vec![0.0; 4]).unwrap()
    }

    #[test]
    fn parse_and_display() {
        let r: Rect = "-1:1, -inf:0.5 ,0:inf".parse().unwrap();
        assert_eq!(r.bounds(), &[(-1.0, 1.0), (f64::NEG_INFINITY, 0.5), (0.0, f64::INFINITY)]);
        assert_eq!(r.to_string(), "-1:1,-inf:0.5,0:inf");
        assert_eq!(r.to_string().parse::<Rect>().unwrap(), r);
        assert!("1:0".parse::<Rect>().is_err());
        assert!("1".parse::<Rect>().is_err());
        assert!("a:1".parse::<Rect>().is_err());
        assert!("nan:1".parse::<Rect>().is_err());
    }

    #[test]
    fn limit_examples() {
        let stats = LayerStats::compute(&relu(vec![10], 1)).unwrap();
        assert_eq!(limit_rect_prob(&stats, 1, &Rect::full(1).unwrap()).unwrap(), 1.0);
        let nu = stats.nu_sq.sqrt();
        let p = limit_rect_prob(&stats, 1, &Rect::symmetric(1, nu).unwrap()).unwrap();
        assert!((p - 0.682_689).abs() < 1e-6);
        let quad: Rect = "0:inf,0:inf".parse().unwrap();
        assert_eq!(limit_rect_prob(&stats, 2, &quad).unwrap(), 0.25);
        assert!(matches!(
            limit_rect_prob(&stats, 1, &quad),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn complement_sums_to_one() {
        for t in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            let a = gaussian_rect_prob(2.0, &Rect::new(vec![(f64::NEG_INFINITY, t)]).unwrap()).unwrap();
            let b = gaussian_rect_prob(2.0, &Rect::new(vec![(t, f64::INFINITY)]).unwrap()).unwrap();
            assert_relative_eq!(a + b, 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn shallow_interval_example() {
        let net = relu(vec![10_000], 1);
        let nu = 1.5f64.sqrt();
        let rep = certified_interval(&net, &Rect::symmetric(1, nu).unwrap(), LocalizationMode::TvShallow).unwrap();
        assert!((rep.p_limit - 0.6827).abs() < 1e-4);
        assert!((rep.c_bound - 0.014_907).abs() < 1e-6);
        assert!((rep.interval.0 - 0.6678).abs() < 1e-4);
        assert!((rep.interval.1 - 0.6976).abs() < 1e-4);
        assert!(rep.contains(rep.p_limit));
    }

    #[test]
    fn deep_interval_example() {
        let net = relu(vec![1_000_000_000; 3], 1);
        let rep = certified_interval(&net, &"-1:2".parse().unwrap(), LocalizationMode::ConvexDeep).unwrap();
        assert!((rep.c_bound - 0.2801).abs() < 1e-4);
        assert_eq!(rep.nu_sq, 1.875);
    }

    #[test]
    fn vacuous_bound_gives_unit_interval() {
        let net = relu(vec![1], 1);
        let rep = certified_interval(&net, &"-1:1".parse().unwrap(), LocalizationMode::TvShallow).unwrap();
        assert!(rep.c_bound >= 1.0);
        assert_eq!(rep.interval, (0.0, 1.0));
    }

    #[test]
    fn mode_preconditions() {
        let deep = relu(vec![10, 10], 1);
        assert!(certified_interval(&deep, &"-1:1".parse().unwrap(), LocalizationMode::TvShallow).is_err());
        assert_eq!(LocalizationMode::for_network(&deep), LocalizationMode::ConvexDeep);
        assert_eq!(LocalizationMode::for_network(&relu(vec![10], 1)), LocalizationMode::TvShallow);
    }

    proptest! {
        #[test]
        fn monotone_under_inclusion(
            lo in -5.0f64..5.0, w in 0.0f64..5.0, grow_lo in 0.0f64..3.0, grow_hi in 0.0f64..3.0,
            nu_sq in 0.1f64..10.0,
        ) {
            let inner = Rect::new(vec![(lo, lo + w), (lo, lo + w)]).unwrap();
            let outer = Rect::new(vec![(lo - grow_lo, lo + w + grow_hi), (lo, lo + w + grow_hi)]).unwrap();
            prop_assert!(gaussian_rect_prob(nu_sq, &inner).unwrap() <= gaussian_rect_prob(nu_sq, &outer).unwrap());
        }
    }
}
