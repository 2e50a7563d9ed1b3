//! Certified distance bounds between the network output and its Gaussian
//! limit.
//!
//! * shallow, univariate output: Kolmogorov, total variation and
//!   1-Wasserstein bounds driven by `Var(σ(κZ)²)`;
//! * the earlier shallow bounds for `C²` activations with a growth
//!   envelope, kept for comparison;
//! * deep networks: convex-distance and 1-Wasserstein bounds built on the
//!   collective-observable estimate of [`LayerStats::collective_bound`];
//! * conversion of a 1-Wasserstein bound into a convex-distance bound.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::activations::p_polynomial;
use crate::error::{Error, Result};
use crate::gaussmath::{abs_moment, expect_sigma_power, variance_sigma_sq};
use crate::recursion::{LayerStats, Network};

/// Exponent of `n_{L+1}` in the convex-distance constants.
pub const OUTPUT_DIM_EXPONENT: f64 = 59.0 / 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Kolmogorov,
    TotalVariation,
    Wasserstein1,
    Convex,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Kolmogorov => "kolmogorov",
            Metric::TotalVariation => "total_variation",
            Metric::Wasserstein1 => "wasserstein1",
            Metric::Convex => "convex",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kolmogorov" | "k" | "ks" => Ok(Metric::Kolmogorov),
            "total_variation" | "tv" => Ok(Metric::TotalVariation),
            "wasserstein1" | "w1" => Ok(Metric::Wasserstein1),
            "convex" | "c" => Ok(Metric::Convex),
            other => Err(Error::Parse(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Shallow bound driven by the variance of `σ(κZ)²`.
    ShallowVariance,
    /// Shallow bound for `C²` activations with a growth envelope.
    ShallowGrowth,
    DeepConvex,
    DeepWasserstein,
    ConvexFromWasserstein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub metric: Metric,
    pub value: f64,
    /// `min(1, value)` for metrics bounded by one, `value` otherwise.
    pub effective: f64,
    pub provenance: Provenance,
    pub constants: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(metric: Metric, value: f64, provenance: Provenance, constants: BTreeMap<String, f64>) -> Self {
        let effective = match metric {
            Metric::Wasserstein1 => value,
            _ => value.min(1.0),
        };
        Self {
            metric,
            value,
            effective,
            provenance,
            constants,
        }
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }
}

/// The three shallow bounds, sharing one set of constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowBounds {
    pub kolmogorov: BoundReport,
    pub total_variation: BoundReport,
    pub wasserstein1: BoundReport,
}

impl ShallowBounds {
    pub fn get(&self, metric: Metric) -> Option<&BoundReport> {
        match metric {
            Metric::Kolmogorov => Some(&self.kolmogorov),
            Metric::TotalVariation => Some(&self.total_variation),
            Metric::Wasserstein1 => Some(&self.wasserstein1),
            Metric::Convex => None,
        }
    }

    pub fn into_vec(self) -> Vec<BoundReport> {
        vec![self.kolmogorov, self.total_variation, self.wasserstein1]
    }
}

fn require_shallow(net: &Network) -> Result<()> {
    if !net.arch.is_shallow_univariate() {
        return Err(Error::InvalidParameter(format!(
            "shallow bounds need one hidden layer and a univariate output, got depth {} and n_out {}",
            net.arch.depth(),
            net.arch.n_out
        )));
    }
    Ok(())
}

/// Shallow univariate bounds. With `κ² = C_b + C_W O⁽⁰⁾`,
/// `V = Var(σ(κZ)²)` and `D = C_b + C_W E[σ(κZ)²]`:
///
/// ```text
/// d_K  <= C_W √V / D / √n₁
/// d_TV <= 2 C_W √V / D / √n₁
/// d_W1 <= √(2/π) C_W √V / √D / √n₁
/// ```
pub fn shallow_bounds(net: &Network) -> Result<ShallowBounds> {
    require_shallow(net)?;
    let arch = &net.arch;
    let o0 = net.o_zero();
    let kappa_sq = arch.cb + arch.cw * o0;
    let kappa = kappa_sq.sqrt();
    let variance = variance_sigma_sq(&net.activation, kappa, &net.quadrature)?;
    let second = expect_sigma_power(&net.activation, kappa, 2, &net.quadrature)?;
    let denom = arch.cb + arch.cw * second;
    let sqrt_n = (arch.hidden[0] as f64).sqrt();

    let kolmogorov_const = arch.cw * variance.sqrt() / denom;
    let w1_const = (2.0 / PI).sqrt() * arch.cw * variance.sqrt() / denom.sqrt();

    let constants: BTreeMap<String, f64> = [
        ("o0", o0),
        ("kappa_sq", kappa_sq),
        ("var_sigma_sq", variance),
        ("sqrt_var", variance.sqrt()),
        ("second_moment", second),
        ("nu_sq", denom),
        ("n1", arch.hidden[0] as f64),
        ("kolmogorov_constant", kolmogorov_const),
        ("total_variation_constant", 2.0 * kolmogorov_const),
        ("wasserstein1_constant", w1_const),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    let dk = kolmogorov_const / sqrt_n;
    Ok(ShallowBounds {
        kolmogorov: BoundReport::new(Metric::Kolmogorov, dk, Provenance::ShallowVariance, constants.clone()),
        total_variation: BoundReport::new(
            Metric::TotalVariation,
            2.0 * dk,
            Provenance::ShallowVariance,
            constants.clone(),
        ),
        wasserstein1: BoundReport::new(
            Metric::Wasserstein1,
            w1_const / sqrt_n,
            Provenance::ShallowVariance,
            constants,
        ),
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `‖r₁ + r₂ |Z √a|^γ‖_{L⁴}²` by binomial expansion over absolute moments.
pub fn growth_l4_norm_sq(r1: f64, r2: f64, gamma: f64, a: f64) -> f64 {
    let scaled = r2 * a.sqrt().powf(gamma);
    let fourth: f64 = (0..=4u32)
        .map(|j| {
            let coeff = binomial(4, j) * r1.powi((4 - j) as i32) * scaled.powi(j as i32);
            if coeff == 0.0 {
                0.0
            } else {
                coeff * abs_moment(f64::from(j) * gamma).expect("nonnegative order")
            }
        })
        .sum();
    fourth.sqrt()
}

/// Earlier shallow bounds for `σ ∈ C²` with `max{|σ|,|σ'|,|σ''|} <= r₁ + r₂|x|^γ`.
/// With `a = C_b + C_W O⁽⁰⁾`:
///
/// ```text
/// d_s <= c_s √(a + a²(2 + √(3(1 + 2a + 3a²)))) ‖r₁ + r₂|Z√a|^γ‖²_{L⁴} / √n₁
/// ```
///
/// where `c_TV = 4/ν²`, `c_K = 2/ν²`, `c_W1 = √(8/π)/ν` and
/// `ν² = C_b + C_W O⁽¹⁾`.
pub fn bff_bounds(net: &Network) -> Result<ShallowBounds> {
    require_shallow(net)?;
    let growth = net.activation.growth.ok_or_else(|| {
        Error::InvalidParameter(format!(
            "{} carries no growth envelope (r1, r2, gamma)",
            net.activation.name()
        ))
    })?;
    let arch = &net.arch;
    let o0 = net.o_zero();
    let a = arch.cb + arch.cw * o0;
    let o1 = expect_sigma_power(&net.activation, a.sqrt(), 2, &net.quadrature)?;
    let nu_sq = arch.cb + arch.cw * o1;
    let root = (a + a * a * (2.0 + (3.0 * (1.0 + 2.0 * a + 3.0 * a * a)).sqrt())).sqrt();
    let l4_sq = growth_l4_norm_sq(growth.r1, growth.r2, growth.gamma, a);
    let core = root * l4_sq;
    let sqrt_n = (arch.hidden[0] as f64).sqrt();

    let c_tv = 4.0 / nu_sq;
    let c_k = 2.0 / nu_sq;
    let c_w1 = (8.0 / PI).sqrt() / nu_sq.sqrt();

    let constants: BTreeMap<String, f64> = [
        ("o0", o0),
        ("a", a),
        ("o1", o1),
        ("nu_sq", nu_sq),
        ("r1", growth.r1),
        ("r2", growth.r2),
        ("gamma", growth.gamma),
        ("sqrt_factor", root),
        ("l4_norm_sq", l4_sq),
        ("c_tv", c_tv),
        ("c_k", c_k),
        ("c_w1", c_w1),
        ("kolmogorov_constant", c_k * core),
        ("total_variation_constant", c_tv * core),
        ("wasserstein1_constant", c_w1 * core),
        ("n1", arch.hidden[0] as f64),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();

    Ok(ShallowBounds {
        kolmogorov: BoundReport::new(Metric::Kolmogorov, c_k * core / sqrt_n, Provenance::ShallowGrowth, constants.clone()),
        total_variation: BoundReport::new(
            Metric::TotalVariation,
            c_tv * core / sqrt_n,
            Provenance::ShallowGrowth,
            constants.clone(),
        ),
        wasserstein1: BoundReport::new(
            Metric::Wasserstein1,
            c_w1 * core / sqrt_n,
            Provenance::ShallowGrowth,
            constants,
        ),
    })
}

/// `C_W (80/s^{3/2} + 48/s + 20√2) n_out^{59/24}`.
fn convex_constant(cw: f64, scale: f64, n_out: usize) -> f64 {
    cw * (80.0 / scale.powf(1.5) + 48.0 / scale + 20.0 * SQRT_2) * (n_out as f64).powf(OUTPUT_DIM_EXPONENT)
}

fn deep_prelude(net: &Network) -> Result<(LayerStats, BTreeMap<String, f64>, f64)> {
    // surfaces the "no P" error with the activation name
    p_polynomial(&net.activation, net.arch.cb, net.arch.cw)?;
    let stats = LayerStats::compute(net)?;
    let depth = stats.depth();
    let terms = stats.collective_terms(depth)?;
    let sum = stats.collective_bound(depth)?;
    let mut constants = BTreeMap::new();
    constants.insert("o0".to_string(), stats.o0);
    for (i, o) in stats.o_seq.iter().enumerate() {
        constants.insert(format!("o{}", i + 1), *o);
    }
    for (i, c) in stats.c_seq.iter().enumerate() {
        constants.insert(format!("c{}", i + 1), *c);
    }
    for (i, t) in terms.iter().enumerate() {
        constants.insert(format!("term{}", i + 1), *t);
    }
    constants.insert("p_l2".to_string(), stats.p_l2.unwrap_or(0.0));
    constants.insert("multiplier".to_string(), stats.multiplier()?);
    constants.insert("nu_sq".to_string(), stats.nu_sq);
    constants.insert("collective_sum".to_string(), sum);
    Ok((stats, constants, sum))
}

/// Convex-distance bound `C₁ · Σ_k (4√2‖P(|Z|)‖)^{L−k} c_k/√n_k`.
///
/// `C₁` is evaluated at `ν² = C_b + C_W O⁽ᴸ⁾`, the covariance scale of the
/// limiting output. The report also carries the weaker `C₂` (`ν²` replaced
/// by `C_b`) and `C₃` (`ν²` replaced by `C_W O⁽ᴸ⁾`, absent when `O⁽ᴸ⁾ = 0`)
/// and the bounds they give.
pub fn deep_convex_bound(net: &Network) -> Result<BoundReport> {
    let (stats, mut constants, sum) = deep_prelude(net)?;
    let arch = &net.arch;
    let c1 = convex_constant(arch.cw, stats.nu_sq, arch.n_out);
    let c2 = convex_constant(arch.cw, arch.cb, arch.n_out);
    constants.insert("C1".to_string(), c1);
    constants.insert("C2".to_string(), c2);
    constants.insert("bound_C2".to_string(), c2 * sum);
    let cw_o = arch.cw * stats.o_last();
    if cw_o > 0.0 {
        let c3 = convex_constant(arch.cw, cw_o, arch.n_out);
        constants.insert("C3".to_string(), c3);
        constants.insert("bound_C3".to_string(), c3 * sum);
    }
    Ok(BoundReport::new(Metric::Convex, c1 * sum, Provenance::DeepConvex, constants))
}

/// 1-Wasserstein bound `K₁ · Σ_k (4√2‖P(|Z|)‖)^{L−k} c_k/√n_k` with
/// `K₁ = n_out C_W / √(C_b + C_W O⁽ᴸ⁾)`; also reports `K₂ = n_out C_W/√C_b`
/// and `K₃ = n_out √C_W / √O⁽ᴸ⁾` (absent when `O⁽ᴸ⁾ = 0`).
pub fn deep_w1_bound(net: &Network) -> Result<BoundReport> {
    let (stats, mut constants, sum) = deep_prelude(net)?;
    let arch = &net.arch;
    let n_out = arch.n_out as f64;
    let k1 = n_out * arch.cw / stats.nu_sq.sqrt();
    let k2 = n_out * arch.cw / arch.cb.sqrt();
    constants.insert("K1".to_string(), k1);
    constants.insert("K2".to_string(), k2);
    constants.insert("bound_K2".to_string(), k2 * sum);
    if stats.o_last() > 0.0 {
        let k3 = n_out * arch.cw.sqrt() / stats.o_last().sqrt();
        constants.insert("K3".to_string(), k3);
        constants.insert("bound_K3".to_string(), k3 * sum);
    }
    Ok(BoundReport::new(Metric::Wasserstein1, k1 * sum, Provenance::DeepWasserstein, constants))
}

/// Bracket `e^{−5/4} d^{1/4} <= Γ(Σ) <= (2π)^{−1/4} d^{1/4}` on the worst
/// Gaussian perimeter of convex sets in dimension `d`.
pub fn gamma_bounds(d: usize) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let q = (d as f64).powf(0.25);
    Ok(((-1.25f64).exp() * q, (2.0 * PI).powf(-0.25) * q))
}

/// Convex-distance bound from a 1-Wasserstein bound in dimension `d`:
/// `2√2 · Γ^{1/2} · √W₁` with the upper bracket for `Γ`, i.e.
/// `2^{11/8} π^{−1/8} d^{1/8} √W₁`. (The familiar `d^{3/8}` form appears
/// when the Wasserstein bound itself carries a `√d` factor.)
pub fn convex_from_w1(w1_bound: f64, d: usize) -> Result<f64> {
    if !(w1_bound >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Wasserstein bound must be nonnegative, got {w1_bound}"
        )));
    }
    let (_, upper) = gamma_bounds(d)?;
    Ok(2.0 * SQRT_2 * upper.sqrt() * w1_bound.sqrt())
}

/// [`convex_from_w1`] wrapped as a report.
pub fn convex_from_w1_report(w1: &BoundReport, d: usize) -> Result<BoundReport> {
    let value = convex_from_w1(w1.value, d)?;
    let (lower, upper) = gamma_bounds(d)?;
    let constants = [
        ("w1_bound", w1.value),
        ("gamma_lower", lower),
        ("gamma_upper", upper),
        ("dimension", d as f64),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(BoundReport::new(Metric::Convex, value, Provenance::ConvexFromWasserstein, constants))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ActivationSpec;
    use crate::recursion::Architecture;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn network(name: &str, hidden: Vec<usize>, n_out: usize, cb: f64, cw: f64, x: Vec<f64>) -> Network {
        let act = ActivationSpec::from_name(name).unwrap();
        let arch = Architecture::new(x.len(), hidden, n_out, cb, cw).unwrap();
        Network::new(act, arch, x).unwrap()
    }

    #[test]
    fn shallow_relu_examples() {
        let b = shallow_bounds(&network("relu", vec![1], 1, 1.0, 1.0, vec![0.0; 4])).unwrap();
        assert_relative_eq!(b.total_variation.value, 2.0 * 1.25f64.sqrt() / 1.5, max_relative = 1e-14);
        assert!((b.total_variation.value - 1.4907).abs() < 1e-4);
        assert_eq!(b.total_variation.effective, 1.0);

        let b = shallow_bounds(&network("relu", vec![100], 1, 1.0, 1.0, vec![0.0; 4])).unwrap();
        assert!((b.kolmogorov.value - 0.074_536).abs() < 1e-6);
        assert!((b.wasserstein1.value - 0.072_838).abs() < 5e-6);
        assert_eq!(b.total_variation.value, 2.0 * b.kolmogorov.value);
    }

    #[test]
    fn shallow_preconditions() {
        assert!(shallow_bounds(&network("relu", vec![3, 3], 1, 1.0, 1.0, vec![0.0])).is_err());
        assert!(shallow_bounds(&network("relu", vec![3], 2, 1.0, 1.0, vec![0.0])).is_err());
        assert!(matches!(
            shallow_bounds(&network("constant:1", vec![3], 1, 1.0, 1.0, vec![0.0])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn bff_sanity() {
        assert_eq!(growth_l4_norm_sq(3.0, 0.0, 2.0, 5.0), 9.0);
        // r1 = 0, γ = 1: ‖r2 √a |Z|‖_4² = r2² a √3
        assert_relative_eq!(growth_l4_norm_sq(0.0, 2.0, 1.0, 5.0), 4.0 * 5.0 * 3f64.sqrt(), max_relative = 1e-14);

        let cubic = network("monomial:3", vec![1], 1, 1.0, 1.0, vec![1.0]);
        let b = bff_bounds(&cubic).unwrap();
        assert_relative_eq!(b.total_variation.value, 2.0 * b.kolmogorov.value, max_relative = 1e-14);
        // a = 2, O⁽¹⁾ = E(√2 Z)⁶ = 8·15
        assert_relative_eq!(b.kolmogorov.constants["o1"], 120.0, max_relative = 1e-13);
        assert!(bff_bounds(&network("relu", vec![1], 1, 1.0, 1.0, vec![1.0])).is_err());
    }

    #[test]
    fn bff_small_a_is_continuous() {
        let mut last = f64::INFINITY;
        for cb in [1e-2, 1e-4, 1e-6, 1e-8] {
            let act = ActivationSpec::custom(
                crate::ActivationKind::Tanh,
                Some(1.0),
                None,
                Some(crate::GrowthEnvelope::new(1.0, 0.0, 0.0).unwrap()),
            )
            .unwrap();
            let arch = Architecture::new(1, vec![1], 1, cb, 1.0).unwrap();
            let net = Network::new(act, arch, vec![0.0]).unwrap();
            let root = bff_bounds(&net).unwrap().kolmogorov.constants["sqrt_factor"];
            assert!(root < last);
            last = root;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn deep_convex_table_anchors() {
        let n = network("relu", vec![10_000; 3], 1, 1.0, 1.0, vec![0.0; 4]);
        let r = deep_convex_bound(&n).unwrap();
        assert!((r.constants["C1"] - 85.04).abs() < 0.005);
        assert!((r.value - 88.59).abs() < 0.005);
        assert_eq!(r.effective, 1.0);

        let n = network("relu", vec![10_000; 3], 1, 10.0, 1.0, vec![0.0; 4]);
        let r = deep_convex_bound(&n).unwrap();
        assert!((r.constants["C1"] - 31.83).abs() < 0.005);
        assert!((r.value - 331.57).abs() < 0.005);
    }

    #[test]
    fn deep_w1_examples() {
        let n = network("relu", vec![10_000; 3], 1, 1.0, 1.0, vec![0.0; 4]);
        let r = deep_w1_bound(&n).unwrap();
        assert_relative_eq!(r.constants["K1"], 1.0 / 1.875f64.sqrt(), max_relative = 1e-14);
        assert!((r.value - 0.760_75).abs() < 1e-5);
        assert!(r.constants["K2"] >= r.constants["K1"]);

        let p = network("perceptron", vec![100, 100], 1, 1.0, 1.0, vec![0.7; 3]);
        let r = deep_w1_bound(&p).unwrap();
        assert_relative_eq!(r.constants["K1"], 1.0 / 1.5f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(r.constants["collective_sum"], 0.1, max_relative = 1e-14);
        assert!((r.value - 0.081_65).abs() < 1e-5);
    }

    #[test]
    fn vanishing_last_layer_drops_third_constants() {
        // σ ≡ 0 gives O⁽ᴸ⁾ = 0
        let n = network("constant:0", vec![10, 10], 1, 1.0, 1.0, vec![0.0; 2]);
        let c = deep_convex_bound(&n).unwrap();
        assert!(!c.constants.contains_key("C3"));
        let w = deep_w1_bound(&n).unwrap();
        assert!(!w.constants.contains_key("K3"));
    }

    #[test]
    fn deep_bounds_refused_without_p() {
        let act = ActivationSpec::custom(crate::ActivationKind::Sigmoid, None, None, None).unwrap();
        let arch = Architecture::new(1, vec![10, 10], 1, 1.0, 1.0).unwrap();
        let n = Network::new(act, arch, vec![0.0]).unwrap();
        assert!(matches!(deep_convex_bound(&n), Err(Error::DeepBoundsUnavailable(_))));
        assert!(matches!(deep_w1_bound(&n), Err(Error::DeepBoundsUnavailable(_))));
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(convex_from_w1(0.0, 1).unwrap(), 0.0);
        let c = convex_from_w1(1.0, 1).unwrap();
        assert_relative_eq!(c, 2f64.powf(11.0 / 8.0) * PI.powf(-0.125), max_relative = 1e-14);
        assert!((c - 2.247_88).abs() < 1e-5);
        assert_relative_eq!(convex_from_w1(2.0, 3).unwrap(), SQRT_2 * convex_from_w1(1.0, 3).unwrap(), max_relative = 1e-14);
        assert_relative_eq!(
            convex_from_w1(0.7, 5).unwrap(),
            2f64.powf(11.0 / 8.0) * PI.powf(-0.125) * 5f64.powf(0.125) * 0.7f64.sqrt(),
            max_relative = 1e-14
        );
        assert!(convex_from_w1(-1.0, 1).is_err());
    }

    #[test]
    fn gamma_bracket_examples() {
        let (lo, hi) = gamma_bounds(1).unwrap();
        assert!((lo - 0.286_50).abs() < 1e-5);
        assert!((hi - 0.631_61).abs() < 1e-5);
        let (lo, _) = gamma_bounds(16).unwrap();
        assert!((lo - 0.573_01).abs() < 1e-5);
        for d in 1..=100 {
            let (lo, hi) = gamma_bounds(d).unwrap();
            assert!(lo < hi);
        }
        assert!(gamma_bounds(0).is_err());
    }

    #[test]
    fn deep_convex_overtakes_converted_w1_at_large_width() {
        // direct bound is O(n^{-1/2}), the converted one O(n^{-1/4})
        for cb in [1.0, 10.0] {
            for cw in [0.01, 0.1, 1.0] {
                let ratio = |n: usize| {
                    let net = network("relu", vec![n; 3], 1, cb, cw, vec![0.5, -0.5, 0.5, -0.5]);
                    let direct = deep_convex_bound(&net).unwrap().value;
                    direct / convex_from_w1(deep_w1_bound(&net).unwrap().value, 1).unwrap()
                };
                assert_relative_eq!(ratio(10_000_000) / ratio(100_000), 0.1f64.sqrt(), max_relative = 1e-9);
                assert!(ratio(1usize << 50) < 1.0, "cb={cb} cw={cw}");
            }
        }
    }

    #[test]
    fn n_out_scaling() {
        let base = network("tanh", vec![50, 60], 1, 1.0, 0.8, vec![0.2; 3]);
        let c1 = deep_convex_bound(&base).unwrap().value;
        let w1 = deep_w1_bound(&base).unwrap().value;
        for d in [2usize, 4] {
            let mut net = base.clone();
            net.arch.n_out = d;
            let ratio_c = deep_convex_bound(&net).unwrap().value / c1;
            let ratio_w = deep_w1_bound(&net).unwrap().value / w1;
            assert_relative_eq!(ratio_c, (d as f64).powf(59.0 / 24.0), max_relative = 1e-12);
            assert_relative_eq!(ratio_w, d as f64, max_relative = 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn first_constants_are_the_smallest(
            act in prop::sample::select(vec!["relu", "tanh", "sigmoid", "perceptron", "sqrt_relu", "sine", "swish"]),
            hidden in prop::collection::vec(1usize..100_000, 1..5),
            n_out in 1usize..5,
            cb in 0.01f64..20.0,
            cw in 0.01f64..5.0,
            x in prop::collection::vec(-10.0f64..10.0, 1..5),
        ) {
            let net = network(act, hidden, n_out, cb, cw, x);
            let c = deep_convex_bound(&net).unwrap();
            let w = deep_w1_bound(&net).unwrap();
            prop_assert!(c.constants["C1"] <= c.constants["C2"]);
            prop_assert!(c.value <= c.constants["bound_C2"]);
            prop_assert!(w.constants["K1"] <= w.constants["K2"]);
            prop_assert!(w.value <= w.constants["bound_K2"]);
            if let Some(c3) = c.constants.get("C3") {
                prop_assert!(c.constants["C1"] <= *c3);
            }
            if let Some(k3) = w.constants.get("K3") {
                prop_assert!(w.constants["K1"] <= *k3 * (1.0 + 1e-12));
            }
        }

        #[test]
        fn deep_bounds_strictly_decrease_in_each_width(
            hidden in prop::collection::vec(1usize..100_000, 1..5),
            pick in 0usize..5,
            cb in 0.01f64..20.0,
            cw in 0.01f64..5.0,
        ) {
            let which = pick % hidden.len();
            let net = network("relu", hidden.clone(), 1, cb, cw, vec![0.1; 4]);
            let mut wider = hidden;
            wider[which] += 1 + wider[which] / 2;
            let net2 = network("relu", wider, 1, cb, cw, vec![0.1; 4]);
            prop_assert!(deep_convex_bound(&net2).unwrap().value < deep_convex_bound(&net).unwrap().value);
            prop_assert!(deep_w1_bound(&net2).unwrap().value < deep_w1_bound(&net).unwrap().value);
        }

        #[test]
        fn tv_is_twice_kolmogorov(
            act in prop::sample::select(vec!["relu", "tanh", "sigmoid", "perceptron", "sine", "softplus"]),
            n1 in 1usize..1_000_000,
            cb in 0.01f64..20.0,
            cw in 0.01f64..5.0,
            x in prop::collection::vec(-5.0f64..5.0, 1..4),
        ) {
            let b = shallow_bounds(&network(act, vec![n1], 1, cb, cw, x)).unwrap();
            prop_assert_eq!(b.total_variation.value, 2.0 * b.kolmogorov.value);
        }
    }
}
