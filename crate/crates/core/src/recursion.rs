//! Network description and the deterministic layer recursion.

use serde::{Deserialize, Serialize};

use crate::activations::{p_l2_norm, ActivationSpec};
use crate::error::{Error, Result};
use crate::gaussmath::{expect_sigma_power, QuadratureScheme};
use crate::numeric::CompensatedSum;

/// Depth beyond which composed quadrature error is no longer negligible.
pub const RECOMMENDED_MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub n0: usize,
    /// Hidden widths `n_1..n_L`.
    pub hidden: Vec<usize>,
    pub n_out: usize,
    pub cb: f64,
    pub cw: f64,
}

impl Architecture {
    pub fn new(n0: usize, hidden: Vec<usize>, n_out: usize, cb: f64, cw: f64) -> Result<Self> {
        let arch = Self {
            n0,
            hidden,
            n_out,
            cb,
            cw,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        if self.n0 == 0 || self.n_out == 0 || self.hidden.iter().any(|&n| n == 0) {
            return Err(Error::InvalidParameter("all layer widths must be >= 1".into()));
        }
        if !(self.cb > 0.0) || !self.cb.is_finite() {
            return Err(Error::InvalidParameter(format!("C_b must be positive, got {}", self.cb)));
        }
        if !(self.cw > 0.0) || !self.cw.is_finite() {
            return Err(Error::InvalidParameter(format!("C_W must be positive, got {}", self.cw)));
        }
        Ok(())
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    /// `n_0, n_1, …, n_L, n_{L+1}`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.n0);
        w.extend_from_slice(&self.hidden);
        w.push(self.n_out);
        w
    }

    pub fn is_shallow_univariate(&self) -> bool {
        self.depth() == 1 && self.n_out == 1
    }
}

/// Activation, architecture and input point: everything a bound or a
/// simulation is a function of.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub activation: ActivationSpec,
    pub arch: Architecture,
    pub input: Vec<f64>,
    #[serde(default)]
    pub quadrature: QuadratureScheme,
}

impl Network {
    pub fn new(activation: ActivationSpec, arch: Architecture, input: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if input.len() != arch.n0 {
            return Err(Error::DimensionMismatch {
                expected: arch.n0,
                got: input.len(),
            });
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("input coordinates must be finite".into()));
        }
        Ok(Self {
            activation,
            arch,
            input,
            quadrature: QuadratureScheme::default(),
        })
    }

    pub fn with_quadrature(mut self, scheme: QuadratureScheme) -> Result<Self> {
        scheme.validate()?;
        self.quadrature = scheme;
        Ok(self)
    }

    pub fn o_zero(&self) -> f64 {
        o_zero(&self.input)
    }
}

/// `O⁽⁰⁾ = (1/n₀) Σ x_j²`.
pub fn o_zero(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let acc: CompensatedSum = x.iter().map(|v| v * v).collect();
    acc.value() / x.len() as f64
}

/// Like [`o_zero`], checking the input length against `n0`.
pub fn o_zero_checked(x: &[f64], n0: usize) -> Result<f64> {
    if x.len() != n0 {
        return Err(Error::DimensionMismatch {
            expected: n0,
            got: x.len(),
        });
    }
    Ok(o_zero(x))
}

/// `O⁽¹⁾ … O⁽ᴸ⁾` with `O⁽ℓ⁾ = E[σ(Z √(C_b + C_W O⁽ℓ⁻¹⁾))²]`.
pub fn o_sequence(net: &Network) -> Result<Vec<f64>> {
    let arch = &net.arch;
    if arch.depth() > RECOMMENDED_MAX_DEPTH {
        log::warn!(
            "depth {} exceeds {}: quadrature error compounds through the recursion",
            arch.depth(),
            RECOMMENDED_MAX_DEPTH
        );
    }
    let mut prev = net.o_zero();
    let mut out = Vec::with_capacity(arch.depth());
    for _ in 0..arch.depth() {
        let kappa = (arch.cb + arch.cw * prev).sqrt();
        let next = expect_sigma_power(&net.activation, kappa, 2, &net.quadrature)?;
        out.push(next);
        prev = next;
    }
    Ok(out)
}

/// `c_ℓ = sqrt(2 E[σ(Z √(C_b + C_W O⁽ℓ⁻¹⁾))⁴])` for `ℓ = 1..L`.
pub fn c_sequence(net: &Network) -> Result<Vec<f64>> {
    let o = o_sequence(net)?;
    c_from_o(net, net.o_zero(), &o)
}

fn c_from_o(net: &Network, o0: f64, o: &[f64]) -> Result<Vec<f64>> {
    let arch = &net.arch;
    let prevs = std::iter::once(o0).chain(o.iter().copied()).take(arch.depth());
    prevs
        .map(|prev| {
            let kappa = (arch.cb + arch.cw * prev).sqrt();
            let fourth = expect_sigma_power(&net.activation, kappa, 4, &net.quadrature)?;
            let c = (2.0 * fourth).sqrt();
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "fourth moment of the activation is not finite at scale {kappa}"
                )));
            }
            Ok(c)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub o0: f64,
    /// `O⁽¹⁾ … O⁽ᴸ⁾`
    pub o_seq: Vec<f64>,
    /// `c_1 … c_L`
    pub c_seq: Vec<f64>,
    /// `‖P(|Z|)‖_{L²}`; absent when the activation admits no `P`.
    pub p_l2: Option<f64>,
    /// Limiting per-coordinate output variance `C_b + C_W O⁽ᴸ⁾`.
    pub nu_sq: f64,
    pub hidden: Vec<usize>,
}

impl LayerStats {
    pub fn compute(net: &Network) -> Result<Self> {
        let o0 = net.o_zero();
        let o_seq = o_sequence(net)?;
        let c_seq = c_from_o(net, o0, &o_seq)?;
        let arch = &net.arch;
        let p_l2 = if net.activation.supports_deep_bounds() {
            Some(p_l2_norm(&net.activation, arch.cb, arch.cw)?)
        } else {
            None
        };
        let o_last = *o_seq.last().expect("depth >= 1");
        let nu_sq = arch.cb + arch.cw * o_last;
        if !(nu_sq > 0.0) || !nu_sq.is_finite() {
            return Err(Error::Degenerate(format!("limiting output variance is {nu_sq}")));
        }
        Ok(Self {
            o0,
            o_seq,
            c_seq,
            p_l2,
            nu_sq,
            hidden: arch.hidden.clone(),
        })
    }

    pub fn depth(&self) -> usize {
        self.o_seq.len()
    }

    /// `O⁽ᴸ⁾`
    pub fn o_last(&self) -> f64 {
        *self.o_seq.last().expect("depth >= 1")
    }

    /// `4√2 ‖P(|Z|)‖_{L²}`.
    pub fn multiplier(&self) -> Result<f64> {
        let p = self.p_l2.ok_or_else(|| {
            Error::DeepBoundsUnavailable("activation admits no P polynomial".into())
        })?;
        Ok(4.0 * std::f64::consts::SQRT_2 * p)
    }

    /// Terms `(4√2‖P‖)^{ℓ−k} c_k / √n_k` for `k = 1..ℓ`. `0⁰ = 1`, so the
    /// `k = ℓ` term survives a vanishing `P`.
    pub fn collective_terms(&self, layer: usize) -> Result<Vec<f64>> {
        if layer == 0 || layer > self.depth() {
            return Err(Error::InvalidParameter(format!(
                "layer must lie in 1..={}, got {layer}",
                self.depth()
            )));
        }
        let m = self.multiplier()?;
        Ok((1..=layer)
            .map(|k| m.powi((layer - k) as i32) * self.c_seq[k - 1] / (self.hidden[k - 1] as f64).sqrt())
            .collect())
    }

    /// Upper bound on `‖O_n⁽ℓ⁾ − O⁽ℓ⁾‖_{L²}`.
    pub fn collective_bound(&self, layer: usize) -> Result<f64> {
        let terms = self.collective_terms(layer)?;
        Ok(terms.iter().copied().collect::<CompensatedSum>().value())
    }
}

/// Upper bound on the `L²` distance between the collective observable at
/// `layer` and its limit.
pub fn collective_bound(net: &Network, layer: usize) -> Result<f64> {
    LayerStats::compute(net)?.collective_bound(layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn net(name: &str, hidden: Vec<usize>, cb: f64, cw: f64, x: Vec<f64>) -> Network {
        let act = ActivationSpec::from_name(name).unwrap();
        let arch = Architecture::new(x.len(), hidden, 1, cb, cw).unwrap();
        Network::new(act, arch, x).unwrap()
    }

    /// `O⁽ℓ⁾ = (C_b/2) Σ_{k<ℓ} (C_W/2)^k + (C_W/2)^ℓ O⁽⁰⁾` for the ReLU.
    fn relu_closed_form(cb: f64, cw: f64, o0: f64, layer: usize) -> f64 {
        let h = cw / 2.0;
        (0..layer).map(|k| 0.5 * cb * h.powi(k as i32)).sum::<f64>() + h.powi(layer as i32) * o0
    }

    #[test]
    fn architecture_validation() {
        assert!(Architecture::new(4, vec![], 1, 1.0, 1.0).is_err());
        assert!(Architecture::new(4, vec![3, 0], 1, 1.0, 1.0).is_err());
        assert!(Architecture::new(4, vec![3], 1, 0.0, 1.0).is_err());
        assert!(Architecture::new(4, vec![3], 1, 1.0, -1.0).is_err());
        let arch = Architecture::new(4, vec![3, 5], 2, 1.0, 1.0).unwrap();
        assert_eq!(arch.widths(), vec![4, 3, 5, 2]);
        let act = ActivationSpec::from_name("relu").unwrap();
        assert!(matches!(
            Network::new(act, arch, vec![0.0; 3]),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn o_zero_examples() {
        assert_eq!(o_zero_checked(&[0.0; 4], 4).unwrap(), 0.0);
        assert_eq!(o_zero_checked(&[10.0; 4], 4).unwrap(), 100.0);
        assert_eq!(o_zero_checked(&[0.5, -0.5, 0.5, -0.5], 4).unwrap(), 0.25);
        assert!(o_zero_checked(&[1.0], 4).is_err());
    }

    #[test]
    fn o_sequence_examples() {
        let o = o_sequence(&net("relu", vec![7; 3], 1.0, 1.0, vec![0.0; 4])).unwrap();
        for (got, want) in o.iter().zip([0.5, 0.75, 0.875]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        let o = o_sequence(&net("perceptron", vec![7; 2], 3.0, 0.2, vec![1.0; 4])).unwrap();
        assert_eq!(o, vec![0.5, 0.5]);
        let o = o_sequence(&net("relu", vec![7; 3], 10.0, 1.0, vec![0.0; 4])).unwrap();
        for (got, want) in o.iter().zip([5.0, 7.5, 8.75]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
    }

    #[test]
    fn c_sequence_examples() {
        let s3 = 3f64.sqrt();
        let c = c_sequence(&net("relu", vec![7; 3], 1.0, 1.0, vec![0.0; 4])).unwrap();
        for (got, want) in c.iter().zip([s3, 1.5 * s3, 1.75 * s3]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
        let c = c_sequence(&net("perceptron", vec![7; 3], 1.0, 1.0, vec![0.3; 4])).unwrap();
        assert_eq!(c, vec![1.0; 3]);
        let c = c_sequence(&net("relu", vec![7; 3], 10.0, 1.0, vec![0.0; 4])).unwrap();
        for (got, want) in c.iter().zip([10.0 * s3, 15.0 * s3, 17.5 * s3]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn collective_bound_examples() {
        // hand evaluation: multiplier 4√2·√1.5 = 4√3
        let s3 = 3f64.sqrt();
        let m = 4.0 * s3;
        let expected = (m * m * s3 + m * 1.5 * s3 + 1.75 * s3) / 100.0;
        let b = collective_bound(&net("relu", vec![10_000; 3], 1.0, 1.0, vec![0.0; 4]), 3).unwrap();
        assert_relative_eq!(b, expected, max_relative = 1e-14);
        assert!((b - 1.041_695).abs() < 1e-6);

        let n = net("sigmoid", vec![40, 9], 1.0, 1.0, vec![0.2; 4]);
        let stats = LayerStats::compute(&n).unwrap();
        assert_relative_eq!(stats.collective_bound(1).unwrap(), stats.c_seq[0] / 40f64.sqrt());

        let p = net("perceptron", vec![50, 60, 100], 1.0, 1.0, vec![0.0; 4]);
        assert_relative_eq!(collective_bound(&p, 3).unwrap(), 0.1, max_relative = 1e-15);

        let stats = LayerStats::compute(&p).unwrap();
        assert!(stats.collective_bound(0).is_err());
        assert!(stats.collective_bound(4).is_err());
    }

    #[test]
    fn collective_bound_needs_p() {
        let act = ActivationSpec::custom(crate::activations::ActivationKind::Tanh, None, None, None).unwrap();
        let arch = Architecture::new(1, vec![10], 1, 1.0, 1.0).unwrap();
        let n = Network::new(act, arch, vec![0.0]).unwrap();
        assert!(matches!(collective_bound(&n, 1), Err(Error::DeepBoundsUnavailable(_))));
    }

    #[test]
    fn relu_recursion_matches_closed_form() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        for _ in 0..50 {
            use rand::Rng;
            let cb: f64 = rng.random_range(0.01..10.0);
            let cw: f64 = rng.random_range(0.01..3.0);
            let o0: f64 = rng.random_range(0.0..100.0);
            let depth: usize = rng.random_range(1..=6);
            let x = vec![o0.sqrt(); 4];
            let o = o_sequence(&net("relu", vec![3; depth], cb, cw, x)).unwrap();
            for (l, got) in o.iter().enumerate() {
                let want = relu_closed_form(cb, cw, o0, l + 1);
                assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{got} vs {want}");
            }
        }
    }

    proptest! {
        #[test]
        fn o_zero_is_quadratically_homogeneous(
            x in prop::collection::vec(-50.0f64..50.0, 1..12),
            lambda in -8.0f64..8.0,
        ) {
            let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            let lhs = o_zero(&scaled);
            let rhs = lambda * lambda * o_zero(&x);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn collective_bound_decreases_in_each_width(
            widths in prop::collection::vec(1usize..5000, 1..5),
            which in 0usize..5,
            cb in 0.1f64..10.0,
            cw in 0.01f64..2.0,
            layer_pick in 0usize..5,
        ) {
            let depth = widths.len();
            let layer = layer_pick % depth + 1;
            let which = which % layer;
            let base = net("relu", widths.clone(), cb, cw, vec![0.3; 4]);
            let mut wider = widths.clone();
            wider[which] += 1 + wider[which] / 3;
            let more = net("relu", wider, cb, cw, vec![0.3; 4]);
            let b0 = collective_bound(&base, layer).unwrap();
            let b1 = collective_bound(&more, layer).unwrap();
            prop_assert!(b1 < b0);
            let stats = LayerStats::compute(&base).unwrap();
            prop_assert!(b0 >= stats.c_seq[layer - 1] / (widths[layer - 1] as f64).sqrt());
        }
    }
}
