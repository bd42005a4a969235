//! Vector belief states: cosine alignment, friction and the coefficiented update.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Block, BLOCK_COUNT};

pub type Vec5 = [f64; BLOCK_COUNT];

pub fn dot(u: &Vec5, v: &Vec5) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &Vec5) -> f64 {
    dot(u, u).sqrt()
}

pub fn add_scaled(u: &Vec5, scale: f64, v: &Vec5) -> Vec5 {
    std::array::from_fn(|i| u[i] + scale * v[i])
}

/// Cosine similarity; 0 when either side has zero magnitude.
pub fn cosine(u: &Vec5, v: &Vec5) -> f64 {
    let denom = norm(u) * norm(v);
    if denom == 0.0 {
        return 0.0;
    }
    (dot(u, v) / denom).clamp(-1.0, 1.0)
}

/// A listener's degree of commitment toward each block's weight, in grams.
/// Never renormalized: magnitude carries strength of belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefVector(Vec5);

impl BeliefVector {
    pub fn new(components: Vec5) -> BeliefVector {
        BeliefVector(components)
    }

    pub fn zero() -> BeliefVector {
        BeliefVector([0.0; BLOCK_COUNT])
    }

    pub fn components(&self) -> &Vec5 {
        &self.0
    }

    pub fn get(&self, block: Block) -> f64 {
        self.0[block.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Formats as `[a,b,c,d,e]` with fixed precision.
    pub fn display(&self, precision: usize) -> String {
        format_vector(&self.0, precision)
    }
}

impl From<Vec5> for BeliefVector {
    fn from(v: Vec5) -> Self {
        BeliefVector(v)
    }
}

impl fmt::Display for BeliefVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display(3))
    }
}

pub fn format_vector(v: &[f64], precision: usize) -> String {
    let parts: Vec<String> = v
        .iter()
        // Avoid printing "-0.000".
        .map(|c| {
            let s = format!("{c:.precision$}");
            if s.trim_start_matches('-')
                .chars()
                .all(|ch| ch == '0' || ch == '.')
            {
                s.trim_start_matches('-').to_string()
            } else {
                s
            }
        })
        .collect();
    format!("[{}]", parts.join(","))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("friction coefficient {name} must be positive and finite, got {value}")]
    InvalidCoefficient { name: &'static str, value: f64 },
    #[error("weight must be positive and finite, got {0}")]
    NonPositiveWeight(f64),
}

/// Friction coefficients of the update operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionConfig {
    /// Force applied by each update.
    pub alpha: f64,
    /// Ceiling on how strongly an aligned assertion can reinforce.
    pub beta: f64,
    /// Clamp reinforced components at the asserted value. Disable only for
    /// ablations of the raw operator.
    #[serde(default = "default_true")]
    pub reinforcement_cap: bool,
}

fn default_true() -> bool {
    true
}

impl FrictionConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<FrictionConfig, BeliefError> {
        for (name, value) in [("alpha", alpha), ("beta", beta)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(BeliefError::InvalidCoefficient { name, value });
            }
        }
        Ok(FrictionConfig {
            alpha,
            beta,
            reinforcement_cap: true,
        })
    }

    pub fn uncapped(self) -> FrictionConfig {
        FrictionConfig {
            reinforcement_cap: false,
            ..self
        }
    }
}

/// Relative weights of the proposition and evidence vectors in alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for AlignmentWeights {
    fn default() -> Self {
        AlignmentWeights {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl AlignmentWeights {
    pub fn combine(&self, prop: &Vec5, evidence: &Vec5) -> Vec5 {
        std::array::from_fn(|i| self.lambda1 * prop[i] + self.lambda2 * evidence[i])
    }
}

pub fn alignment(belief: &Vec5, prop: &Vec5, evidence: &Vec5, w: AlignmentWeights) -> f64 {
    cosine(belief, &w.combine(prop, evidence))
}

/// `1 - alignment`, in `[0, 2]`.
pub fn friction(belief: &Vec5, prop: &Vec5, evidence: &Vec5, w: AlignmentWeights) -> f64 {
    1.0 - alignment(belief, prop, evidence, w)
}

fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One friction-weighted update of `belief` by an encoded assertion:
///
/// `b' = b + min(beta, alpha * sgn(b·a)) * cos(b, a) * a`
///
/// With the cap enabled, a component pushed upward by a positive asserted
/// value stops at `max(b[i], a[i])`. Orthogonal or zero assertions leave the
/// belief untouched.
pub fn def_update(belief: &BeliefVector, assertion: &Vec5, cfg: &FrictionConfig) -> BeliefVector {
    let b = &belief.0;
    let s = signum(dot(b, assertion));
    if s == 0.0 {
        return *belief;
    }
    let step = (cfg.beta.min(cfg.alpha * s)) * cosine(b, assertion);
    let mut out = add_scaled(b, step, assertion);
    if cfg.reinforcement_cap {
        for i in 0..BLOCK_COUNT {
            if assertion[i] > 0.0 && step * assertion[i] > 0.0 {
                out[i] = out[i].min(b[i].max(assertion[i]));
            }
        }
    }
    BeliefVector(out)
}

/// Sets one block's component outright, as when the listener states or
/// accepts a specific weight.
pub fn direct_assign(
    belief: &BeliefVector,
    block: Block,
    grams: f64,
) -> Result<BeliefVector, BeliefError> {
    if !(grams.is_finite() && grams > 0.0) {
        return Err(BeliefError::NonPositiveWeight(grams));
    }
    let mut out = *belief;
    out.0[block.index()] = grams;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-3;

    fn close(a: &Vec5, b: &Vec5, tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn unit() -> FrictionConfig {
        FrictionConfig::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let c = cosine(&[10.0, 10.0, 0.0, 0.0, 0.0], &[0.0, -10.0, 0.0, 0.0, 0.0]);
        assert!((c + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(
            cosine(&[1.0, 0.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0, 0.0]),
            1.0
        );
        assert_eq!(cosine(&[0.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), 0.0);
    }

    #[test]
    fn alignment_and_friction_examples() {
        let w = AlignmentWeights::default();
        let zero = [0.0; 5];
        let a = alignment(
            &[10.0, 10.0, 0.0, 0.0, 0.0],
            &[0.0, -10.0, 0.0, 0.0, 0.0],
            &zero,
            w,
        );
        assert!((a + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        let v = [3.0, -1.0, 4.0, 1.0, 5.0];
        assert!((alignment(&v, &v, &zero, w) - 1.0).abs() < 1e-12);
        // cos([1,0..], [1,1,0..]) = 1/sqrt(2)
        let a = alignment(
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            w,
        );
        assert!((a - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);

        assert!(friction(&v, &v, &zero, w).abs() < 1e-12);
        assert!(
            (friction(
                &[1.0, 0.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0, 0.0],
                &zero,
                w
            ) - 1.0)
                .abs()
                < 1e-12
        );
        let f = friction(
            &[10.0, 10.0, 0.0, 0.0, 0.0],
            &[0.0, -10.0, 0.0, 0.0, 0.0],
            &zero,
            w,
        );
        assert!((f - 1.70710678).abs() < 1e-6);
    }

    #[test]
    fn reproduces_worked_examples() {
        let cases = [
            (
                [10.0, 10.0, 0.0, 0.0, 0.0],
                [0.0, -10.0, 0.0, 0.0, 0.0],
                [10.0, 2.929, 0.0, 0.0, 0.0],
            ),
            (
                [10.0, 10.0, 20.0, 0.0, 0.0],
                [10.0, -10.0, 20.0, 0.0, 0.0],
                [10.0, 3.333, 20.0, 0.0, 0.0],
            ),
            (
                [10.0, 10.0, 20.0, 0.0, 0.0],
                [0.0, -10.0, 20.0, 0.0, 0.0],
                [10.0, 4.523, 20.0, 0.0, 0.0],
            ),
        ];
        for (belief, assertion, expected) in cases {
            let out = def_update(&BeliefVector::new(belief), &assertion, &unit());
            assert!(
                close(out.components(), &expected, TOL),
                "{out} vs {expected:?}"
            );
        }
    }

    #[test]
    fn uncapped_variant_is_the_raw_operator() {
        let out = def_update(
            &BeliefVector::new([10.0, 10.0, 20.0, 0.0, 0.0]),
            &[10.0, -10.0, 20.0, 0.0, 0.0],
            &unit().uncapped(),
        );
        assert!(
            close(out.components(), &[16.667, 3.333, 33.333, 0.0, 0.0], TOL),
            "{out}"
        );
    }

    #[test]
    fn orthogonal_and_zero_assertions_are_noops() {
        let b = BeliefVector::new([10.0, 10.0, 0.0, 0.0, 0.0]);
        assert_eq!(def_update(&b, &[0.0, 0.0, 0.0, 20.0, 0.0], &unit()), b);
        assert_eq!(def_update(&b, &[0.0; 5], &unit()), b);
    }

    #[test]
    fn direct_assignment() {
        let b = BeliefVector::new([0.3, 4.0, 1.0, 2.0, 9.0]);
        let out = direct_assign(&b, Block::Red, 10.0).unwrap();
        assert_eq!(out.components(), &[10.0, 4.0, 1.0, 2.0, 9.0]);
        assert_eq!(direct_assign(&out, Block::Red, 10.0).unwrap(), out);
        let out = direct_assign(
            &BeliefVector::new([10.0, 2.9, 0.0, 0.0, 0.0]),
            Block::Blue,
            10.0,
        )
        .unwrap();
        assert_eq!(out.components(), &[10.0, 10.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            direct_assign(&b, Block::Blue, 0.0),
            Err(BeliefError::NonPositiveWeight(0.0))
        );
    }

    #[test]
    fn coefficients_are_validated() {
        assert!(FrictionConfig::new(0.0, 1.0).is_err());
        assert!(FrictionConfig::new(1.0, f64::NAN).is_err());
        assert!(FrictionConfig::new(0.01, 100.0).is_ok());
    }

    #[test]
    fn display_uses_three_decimals() {
        let b = BeliefVector::new([10.0, 2.9289321881, 0.0, -0.0, 0.0]);
        assert_eq!(b.to_string(), "[10.000,2.929,0.000,0.000,0.000]");
    }

    fn vec5(range: std::ops::Range<f64>) -> impl Strategy<Value = Vec5> {
        prop::array::uniform5(range)
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_scale_invariant_and_bounded(
            u in vec5(-50.0..50.0), v in vec5(-50.0..50.0), a in 0.01f64..100.0, b in 0.01f64..100.0
        ) {
            prop_assume!(norm(&u) > 1e-3 && norm(&v) > 1e-3);
            let c = cosine(&u, &v);
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((c - cosine(&v, &u)).abs() < 1e-12);
            let su = u.map(|x| x * a);
            let sv = v.map(|x| x * b);
            prop_assert!((c - cosine(&su, &sv)).abs() < 1e-9);
        }

        #[test]
        fn reinforcement_never_overshoots(
            belief in vec5(0.0..60.0), assertion in vec5(0.0..60.0),
            alpha in 0.01f64..100.0, beta in 0.01f64..100.0
        ) {
            let b = BeliefVector::new(belief);
            let cfg = FrictionConfig::new(alpha, beta).unwrap();
            let out = def_update(&b, &assertion, &cfg);
            for i in 0..BLOCK_COUNT {
                prop_assert!(out.components()[i] <= belief[i].max(assertion[i]) + 1e-9);
            }
        }

        #[test]
        fn suppression_grows_with_alpha(
            belief in vec5(1.0..60.0), assertion in vec5(0.0..60.0), conflict in 0usize..5,
            alpha in 0.01f64..50.0, extra in 0.01f64..50.0, beta in 0.01f64..100.0
        ) {
            let mut assertion = assertion;
            assertion[conflict] = 0.0;
            // Large enough in magnitude to make the dot product negative.
            assertion[conflict] = -(dot(&belief, &assertion) / belief[conflict] + 1.0);
            let b = BeliefVector::new(belief);
            prop_assert!(dot(&belief, &assertion) < 0.0);
            let low = def_update(&b, &assertion, &FrictionConfig::new(alpha, beta).unwrap());
            let high = def_update(&b, &assertion, &FrictionConfig::new(alpha + extra, beta).unwrap());
            prop_assert!(high.components()[conflict] < low.components()[conflict]);
        }
    }
}
