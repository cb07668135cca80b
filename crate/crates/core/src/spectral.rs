//! Diagonal generators on truncated `ℓ²`, their semigroups, fractional
//! powers and extrapolation norms, plus the control operators acting on them.
//!
//! Every generator is diagonal in the canonical basis `e_n` with
//! `A e_n = -(λ_n - ω₀) e_n`, where `λ_1 < λ_2 < …` are the positive base
//! eigenvalues and `ω₀` is an optional spectral shift. The quantities
//! `r_n = λ_n - ω₀` are called the effective rates throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{l2_norm, pairwise_sum, pairwise_sum_by};

/// A value paired with a bound on the error introduced by mode truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub tail_bound: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, tail_bound: 0.0 }
    }
}

/// Closed-form eigenvalue laws `λ_n = scale·n + offset` or `scale·n² + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenRule {
    Linear { scale: f64, offset: f64 },
    Quadratic { scale: f64, offset: f64 },
}

impl EigenRule {
    pub fn eigenvalue(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            EigenRule::Linear { scale, offset } => scale * nf + offset,
            EigenRule::Quadratic { scale, offset } => scale * nf * nf + offset,
        }
    }
}

/// Sign of a fractional power: `(-A)^{+α}` or `(-A)^{-α}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerSign {
    Plus,
    Minus,
}

/// State in the truncated `ℓ²` space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coefficients: Vec<f64>) -> Self {
        StateVector(coefficients)
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0.0; n])
    }

    /// Canonical basis vector `e_k` (zero-based `k`).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        StateVector(v)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn scaled(&self, a: f64) -> StateVector {
        StateVector(self.0.iter().map(|v| a * v).collect())
    }

    pub fn add(&self, other: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        pairwise_sum_by(self.0.len(), |i| self.0[i] * other.0[i])
    }
}

/// Diagonal generator `A = -diag(λ_n - ω₀)` truncated to `N` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGenerator {
    eigenvalues: Vec<f64>,
    shift: f64,
    rule: Option<EigenRule>,
}

impl DiagonalGenerator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidEigenvalues("at least one mode is required".into()));
        }
        for (i, &l) in eigenvalues.iter().enumerate() {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::InvalidEigenvalues(format!(
                    "λ_{} = {l} is not a positive finite number",
                    i + 1
                )));
            }
            if i > 0 && l <= eigenvalues[i - 1] {
                return Err(Error::InvalidEigenvalues(format!(
                    "sequence not strictly increasing at mode {}",
                    i + 1
                )));
            }
        }
        Ok(DiagonalGenerator { eigenvalues, shift: 0.0, rule: None })
    }

    pub fn from_rule(rule: EigenRule, modes: usize) -> Result<Self> {
        let eigenvalues = (1..=modes).map(|n| rule.eigenvalue(n)).collect();
        let mut gen = DiagonalGenerator::new(eigenvalues)?;
        gen.rule = Some(rule);
        Ok(gen)
    }

    /// Generator of `A + ω`: every effective rate drops by `omega`.
    pub fn shifted(&self, omega: f64) -> DiagonalGenerator {
        DiagonalGenerator {
            eigenvalues: self.eigenvalues.clone(),
            shift: self.shift + omega,
            rule: self.rule,
        }
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Unshifted eigenvalues `λ_n`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn rule(&self) -> Option<EigenRule> {
        self.rule
    }

    /// Effective decay rate `r_n = λ_n - ω₀` of mode `n` (zero-based).
    pub fn rate(&self, n: usize) -> f64 {
        self.eigenvalues[n] - self.shift
    }

    pub fn rates(&self) -> Vec<f64> {
        (0..self.modes()).map(|n| self.rate(n)).collect()
    }

    /// Growth bound `ω₀(A) = -(λ₁ - ω₀)`.
    pub fn growth_bound(&self) -> f64 {
        -self.rate(0)
    }

    pub fn is_stable(&self) -> bool {
        self.rate(0) > 0.0
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable { growth_bound: self.growth_bound() })
        }
    }

    fn require_invertible(&self) -> Result<()> {
        for n in 0..self.modes() {
            let r = self.rate(n);
            if r <= 0.0 {
                return Err(Error::NonPositiveEigenvalue { index: n + 1, value: r });
            }
        }
        Ok(())
    }

    fn check_dim(&self, x: &StateVector) -> Result<()> {
        if x.len() != self.modes() {
            return Err(Error::DimensionMismatch { expected: self.modes(), found: x.len() });
        }
        Ok(())
    }

    /// `T(t)x`, acting as `e^{-r_n t}` per mode.
    pub fn semigroup_apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.check_dim(x)?;
        Ok(StateVector(
            x.0.iter()
                .enumerate()
                .map(|(n, v)| (-self.rate(n) * t).exp() * v)
                .collect(),
        ))
    }

    /// `(-A)^{±α} x`, acting as `r_n^{±α}` per mode.
    pub fn fractional_power_apply(&self, alpha: f64, sign: PowerSign, x: &StateVector) -> Result<StateVector> {
        self.require_invertible()?;
        self.check_dim(x)?;
        let e = match sign {
            PowerSign::Plus => alpha,
            PowerSign::Minus => -alpha,
        };
        Ok(StateVector(
            x.0.iter()
                .enumerate()
                .map(|(n, v)| if alpha == 0.0 { *v } else { self.rate(n).powf(e) * v })
                .collect(),
        ))
    }

    /// `A x` with the sign convention `A e_n = -r_n e_n`.
    pub fn apply_generator(&self, x: &StateVector) -> Result<StateVector> {
        self.check_dim(x)?;
        Ok(StateVector(x.0.iter().enumerate().map(|(n, v)| -self.rate(n) * v).collect()))
    }

    /// `A^{-1} x`.
    pub fn apply_generator_inverse(&self, x: &StateVector) -> Result<StateVector> {
        self.require_invertible()?;
        self.check_dim(x)?;
        Ok(StateVector(x.0.iter().enumerate().map(|(n, v)| -v / self.rate(n)).collect()))
    }

    /// `‖x‖_{-α} = ‖A^{-α}x‖` with the resolvent point fixed at 0.
    pub fn extrapolation_norm(&self, x: &StateVector, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("extrapolation index {alpha} outside [0, 1]")));
        }
        if !self.is_stable() {
            return Err(Error::Unstable { growth_bound: self.growth_bound() });
        }
        Ok(self.fractional_power_apply(alpha, PowerSign::Minus, x)?.norm())
    }

    /// `‖T(t)(-A)^α‖ = max_n r_n^α e^{-r_n t}` over the retained modes.
    /// Returns `+∞` for `t = 0` and `α > 0`.
    pub fn operator_norm_t_a_alpha(&self, alpha: f64, t: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("α = {alpha} outside [0, 1)")));
        }
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        if t == 0.0 && alpha > 0.0 {
            return Ok(f64::INFINITY);
        }
        self.require_invertible()?;
        Ok((0..self.modes())
            .map(|n| {
                let r = self.rate(n);
                r.powf(alpha) * (-r * t).exp()
            })
            .fold(0.0, f64::max))
    }
}

/// Structure of the control operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "b", rename_all = "snake_case")]
pub enum ControlKind {
    /// Scalar input: `Bu = u·(b_n)`.
    RankOne(Vec<f64>),
    /// Input in `ℓ²`: `(Bu)_n = b_n u_n`.
    DiagonalMultiplier(Vec<f64>),
}

/// Largest tolerated ratio of the last dyadic block maximum of `|b_n|/r_n^α`
/// to the maximum over all earlier modes: `2^{1/4}`, the ratio `n^{1/4}`
/// gains per doubling.
const MULTIPLIER_GROWTH_SLACK: f64 = 1.189_207_115_002_721;

/// Control operator `B ∈ L(U, X_{-α})` in spectral coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlOperator {
    kind: ControlKind,
    regularity: f64,
}

impl ControlOperator {
    /// Builds the operator and verifies that `‖A^{-α}B‖` stays bounded as
    /// the truncation grows, judged from dyadic blocks of the coefficients.
    pub fn new(kind: ControlKind, regularity: f64, gen: &DiagonalGenerator) -> Result<Self> {
        if !(0.0..=1.0).contains(&regularity) {
            return Err(Error::Regularity(format!("α = {regularity} outside [0, 1]")));
        }
        let op = ControlOperator { kind, regularity };
        if op.coefficients().len() != gen.modes() {
            return Err(Error::DimensionMismatch { expected: gen.modes(), found: op.coefficients().len() });
        }
        if op.coefficients().iter().any(|b| !b.is_finite()) {
            return Err(Error::Regularity("non-finite control coefficient".into()));
        }
        if regularity > 0.0 {
            gen.require_invertible()?;
        }
        op.check_growth(gen)?;
        Ok(op)
    }

    pub fn rank_one(b: Vec<f64>, regularity: f64, gen: &DiagonalGenerator) -> Result<Self> {
        Self::new(ControlKind::RankOne(b), regularity, gen)
    }

    pub fn multiplier(b: Vec<f64>, regularity: f64, gen: &DiagonalGenerator) -> Result<Self> {
        Self::new(ControlKind::DiagonalMultiplier(b), regularity, gen)
    }

    pub fn kind(&self) -> &ControlKind {
        &self.kind
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn coefficients(&self) -> &[f64] {
        match &self.kind {
            ControlKind::RankOne(b) | ControlKind::DiagonalMultiplier(b) => b,
        }
    }

    pub fn is_rank_one(&self) -> bool {
        matches!(self.kind, ControlKind::RankOne(_))
    }

    /// `α = 0`: `B` maps into `X`.
    pub fn is_bounded(&self) -> bool {
        self.regularity == 0.0
    }

    /// Dimension of the input space `U`.
    pub fn input_dim(&self) -> usize {
        match &self.kind {
            ControlKind::RankOne(_) => 1,
            ControlKind::DiagonalMultiplier(b) => b.len(),
        }
    }

    /// Mode-wise forcing `(Bu)_n`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match &self.kind {
            ControlKind::RankOne(b) => b.iter().map(|bn| bn * u[0]).collect(),
            ControlKind::DiagonalMultiplier(b) => b.iter().zip(u).map(|(bn, un)| bn * un).collect(),
        }
    }

    /// Transpose `Bᵀ v`.
    pub fn adjoint_apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.kind {
            ControlKind::RankOne(b) => vec![pairwise_sum_by(b.len(), |n| b[n] * v[n])],
            ControlKind::DiagonalMultiplier(b) => b.iter().zip(v).map(|(bn, vn)| bn * vn).collect(),
        }
    }

    /// Operator norm `U → X` (finite only in the truncation unless `α = 0`).
    pub fn bounded_norm(&self) -> f64 {
        match &self.kind {
            ControlKind::RankOne(b) => l2_norm(b),
            ControlKind::DiagonalMultiplier(b) => b.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    fn weighted_terms(&self, gen: &DiagonalGenerator, alpha: f64) -> Vec<f64> {
        self.coefficients()
            .iter()
            .enumerate()
            .map(|(n, b)| {
                let w = if alpha == 0.0 { 1.0 } else { gen.rate(n).powf(alpha) };
                b.abs() / w
            })
            .collect()
    }

    fn check_growth(&self, gen: &DiagonalGenerator) -> Result<()> {
        let m = gen.modes();
        if m < 8 {
            return Ok(());
        }
        let terms = self.weighted_terms(gen, self.regularity);
        let last = &terms[m / 2..];
        let (p, l, slack, what) = if self.is_rank_one() {
            let prev = &terms[m / 4..m / 2];
            (
                pairwise_sum_by(prev.len(), |i| prev[i] * prev[i]),
                pairwise_sum_by(last.len(), |i| last[i] * last[i]),
                1.0 + 1e-12,
                "dyadic block sums of (b_n / r_n^α)² do not decay",
            )
        } else {
            // A bounded but irregular multiplier can set a new maximum in one
            // block by chance, so growth must persist over two doublings.
            let max_of = |s: &[f64]| s.iter().fold(0.0, |a: f64, v| a.max(*v));
            let (early, middle) = (max_of(&terms[..m / 4]), max_of(&terms[m / 4..m / 2]));
            let persistent = early > 0.0 && middle > early * MULTIPLIER_GROWTH_SLACK;
            (
                if persistent { early.max(middle) } else { 0.0 },
                max_of(last),
                MULTIPLIER_GROWTH_SLACK,
                "|b_n| / r_n^α grows across dyadic blocks",
            )
        };
        if p > 0.0 && l > p * slack {
            return Err(Error::Regularity(format!(
                "{what} for declared α = {} (last block {l:.6e} > previous {p:.6e})",
                self.regularity
            )));
        }
        Ok(())
    }

    /// `‖A^{-α}B‖` over the retained modes, with a geometric extrapolation of
    /// the dyadic block sums as tail bound.
    pub fn regularity_norm(&self, gen: &DiagonalGenerator) -> Estimate {
        let terms = self.weighted_terms(gen, self.regularity);
        let m = terms.len();
        if self.is_rank_one() {
            let sq: Vec<f64> = terms.iter().map(|t| t * t).collect();
            let total = pairwise_sum(&sq);
            let value = total.sqrt();
            if m < 8 {
                return Estimate { value, tail_bound: 0.0 };
            }
            let prev = pairwise_sum(&sq[m / 4..m / 2]);
            let last = pairwise_sum(&sq[m / 2..]);
            let tail_bound = if last == 0.0 {
                0.0
            } else if prev > last {
                let rho = last / prev;
                (total + last * rho / (1.0 - rho)).sqrt() - value
            } else {
                f64::INFINITY
            };
            Estimate { value, tail_bound }
        } else {
            Estimate::exact(terms.iter().fold(0.0, |a: f64, v| a.max(*v)))
        }
    }

    /// `A^{-1}B`, a bounded operator whenever `α ≤ 1`.
    pub fn compose_inverse_generator(&self, gen: &DiagonalGenerator) -> Result<ControlOperator> {
        gen.require_invertible()?;
        let b: Vec<f64> = self
            .coefficients()
            .iter()
            .enumerate()
            .map(|(n, bn)| -bn / gen.rate(n))
            .collect();
        let kind = match self.kind {
            ControlKind::RankOne(_) => ControlKind::RankOne(b),
            ControlKind::DiagonalMultiplier(_) => ControlKind::DiagonalMultiplier(b),
        };
        Ok(ControlOperator { kind, regularity: 0.0 })
    }
}

/// The pair `Σ(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub generator: DiagonalGenerator,
    pub control: ControlOperator,
}

impl LinearSystem {
    pub fn new(generator: DiagonalGenerator, control: ControlOperator) -> Result<Self> {
        if control.coefficients().len() != generator.modes() {
            return Err(Error::DimensionMismatch {
                expected: generator.modes(),
                found: control.coefficients().len(),
            });
        }
        Ok(LinearSystem { generator, control })
    }

    pub fn modes(&self) -> usize {
        self.generator.modes()
    }

    pub fn input_dim(&self) -> usize {
        self.control.input_dim()
    }

    /// Same control operator, generator `A + ω`.
    pub fn shifted(&self, omega: f64) -> LinearSystem {
        LinearSystem { generator: self.generator.shifted(omega), control: self.control.clone() }
    }

    /// Same generator, control operator replaced by `A^{-1}B`.
    pub fn with_inverse_generator_control(&self) -> Result<LinearSystem> {
        Ok(LinearSystem {
            generator: self.generator.clone(),
            control: self.control.compose_inverse_generator(&self.generator)?,
        })
    }

    /// Same generator with `B = 0`.
    pub fn without_control(&self) -> LinearSystem {
        let zeros = vec![0.0; self.modes()];
        let kind = match self.control.kind {
            ControlKind::RankOne(_) => ControlKind::RankOne(zeros),
            ControlKind::DiagonalMultiplier(_) => ControlKind::DiagonalMultiplier(zeros),
        };
        LinearSystem {
            generator: self.generator.clone(),
            control: ControlOperator { kind, regularity: 0.0 },
        }
    }
}

/// JSON form of a generator: explicit eigenvalues or a rule with mode count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<[f64; 2]>,
    #[serde(default, rename = "N", alias = "n", skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(default)]
    pub shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    Linear,
    Quadratic,
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<DiagonalGenerator> {
        let gen = match (&self.eigenvalues, self.rule) {
            (Some(ev), None) => DiagonalGenerator::new(ev.clone())?,
            (None, Some(rule)) => {
                let [scale, offset] = self.coefficients.unwrap_or([1.0, 0.0]);
                let modes = self
                    .modes
                    .ok_or_else(|| Error::InvalidArgument("rule-based generator needs N".into()))?;
                let rule = match rule {
                    RuleName::Linear => EigenRule::Linear { scale, offset },
                    RuleName::Quadratic => EigenRule::Quadratic { scale, offset },
                };
                DiagonalGenerator::from_rule(rule, modes)?
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "generator spec needs exactly one of 'eigenvalues' or 'rule'".into(),
                ))
            }
        };
        Ok(gen.shifted(self.shift))
    }

    pub fn from_generator(gen: &DiagonalGenerator) -> Self {
        match gen.rule() {
            Some(EigenRule::Linear { scale, offset }) => GeneratorSpec {
                eigenvalues: None,
                rule: Some(RuleName::Linear),
                coefficients: Some([scale, offset]),
                modes: Some(gen.modes()),
                shift: gen.shift(),
            },
            Some(EigenRule::Quadratic { scale, offset }) => GeneratorSpec {
                eigenvalues: None,
                rule: Some(RuleName::Quadratic),
                coefficients: Some([scale, offset]),
                modes: Some(gen.modes()),
                shift: gen.shift(),
            },
            None => GeneratorSpec {
                eigenvalues: Some(gen.eigenvalues().to_vec()),
                rule: None,
                coefficients: None,
                modes: None,
                shift: gen.shift(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(ev: &[f64]) -> DiagonalGenerator {
        DiagonalGenerator::new(ev.to_vec()).unwrap()
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let g = gen(&[1.0, 2.0, 5.0]);
        let x = StateVector::new(vec![0.3, -1.0, 2.0]);
        assert_eq!(g.semigroup_apply(0.0, &x).unwrap(), x);
    }

    #[test]
    fn semigroup_scalar_half_life() {
        let g = gen(&[1.0]);
        let y = g.semigroup_apply(2f64.ln(), &StateVector::new(vec![1.0])).unwrap();
        assert!((y.coefficients()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn semigroup_per_mode() {
        let g = gen(&[1.0, 2.0]);
        let y = g.semigroup_apply(1.0, &StateVector::new(vec![1.0, 1.0])).unwrap();
        assert!((y.coefficients()[0] - (-1f64).exp()).abs() < 1e-15);
        assert!((y.coefficients()[1] - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn semigroup_rejects_negative_time_and_bad_dims() {
        let g = gen(&[1.0, 2.0]);
        assert!(matches!(
            g.semigroup_apply(-1.0, &StateVector::zeros(2)),
            Err(Error::NegativeTime(_))
        ));
        assert!(matches!(
            g.semigroup_apply(1.0, &StateVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eigenvalue_validation() {
        assert!(DiagonalGenerator::new(vec![]).is_err());
        assert!(DiagonalGenerator::new(vec![1.0, 1.0]).is_err());
        assert!(DiagonalGenerator::new(vec![-1.0, 1.0]).is_err());
        assert!(DiagonalGenerator::new(vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn fractional_power_examples() {
        let g = gen(&[1.0, 4.0]);
        let x = StateVector::new(vec![1.0, 1.0]);
        let y = g.fractional_power_apply(0.5, PowerSign::Minus, &x).unwrap();
        assert_eq!(y.coefficients(), &[1.0, 0.5]);
        assert_eq!(g.fractional_power_apply(0.0, PowerSign::Plus, &x).unwrap(), x);
        let back = g.fractional_power_apply(0.5, PowerSign::Plus, &y).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn fractional_power_rejects_nonpositive_rate() {
        let g = gen(&[1.0, 2.0]).shifted(1.0);
        let r = g.fractional_power_apply(0.5, PowerSign::Minus, &StateVector::zeros(2));
        assert!(matches!(r, Err(Error::NonPositiveEigenvalue { index: 1, .. })));
    }

    #[test]
    fn extrapolation_norm_examples() {
        let g = gen(&[1.0, 2.0]);
        let x = StateVector::new(vec![0.0, 2.0]);
        assert_eq!(g.extrapolation_norm(&x, 1.0).unwrap(), 1.0);
        assert_eq!(g.extrapolation_norm(&x, 0.0).unwrap(), 2.0);
        let unstable = g.shifted(3.0);
        assert!(matches!(unstable.extrapolation_norm(&x, 0.5), Err(Error::Unstable { .. })));
    }

    #[test]
    fn extrapolation_norm_basel_partial_sums() {
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        let mut prev_gap = f64::INFINITY;
        for n in [10usize, 100, 1000] {
            let g = DiagonalGenerator::from_rule(EigenRule::Linear { scale: 1.0, offset: 0.0 }, n).unwrap();
            let v = g.extrapolation_norm(&StateVector::new(vec![1.0; n]), 1.0).unwrap();
            let partial: f64 = (1..=n).map(|k| 1.0 / (k as f64).powi(2)).sum();
            assert!((v * v - partial).abs() < 1e-12);
            let gap = pi2_6 - v * v;
            assert!(gap > 0.0 && gap < prev_gap && gap <= 1.0 / n as f64);
            prev_gap = gap;
        }
    }

    #[test]
    fn shift_examples() {
        let g = gen(&[1.0, 2.0]);
        assert_eq!(g.shifted(0.0), g);
        let u = g.shifted(2.0);
        assert_eq!(u.rates(), vec![-1.0, 0.0]);
        assert!(!u.is_stable());
        let s = g.shifted(0.5);
        assert!((s.growth_bound() + 0.5).abs() < 1e-15);
        assert!(s.is_stable());
    }

    #[test]
    fn operator_norm_examples() {
        let g = gen(&[1.5, 3.0]);
        assert!((g.operator_norm_t_a_alpha(0.0, 0.7).unwrap() - (-1.05f64).exp()).abs() < 1e-15);
        assert!(g.operator_norm_t_a_alpha(0.5, 0.0).unwrap().is_infinite());
        assert!(g.operator_norm_t_a_alpha(1.0, 1.0).is_err());
    }

    #[test]
    fn operator_norm_discrete_maximizer() {
        let n = 64;
        let g = DiagonalGenerator::from_rule(EigenRule::Linear { scale: 1.0, offset: 0.0 }, n).unwrap();
        let v = g.operator_norm_t_a_alpha(0.5, 0.1).unwrap();
        let (best_n, best) = (1..=n)
            .map(|k| (k, (k as f64).sqrt() * (-0.1 * k as f64).exp()))
            .fold((0, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        assert_eq!(best_n, 5);
        assert_eq!(v, best);
    }

    #[test]
    fn operator_norm_sectorial_bound() {
        let g = DiagonalGenerator::from_rule(EigenRule::Linear { scale: 1.0, offset: 0.0 }, 200).unwrap();
        for &alpha in &[0.25, 0.5, 0.75] {
            let bound = (alpha / std::f64::consts::E).powf(alpha) + 1.0;
            for k in 1..=100 {
                let t = k as f64 / 100.0;
                let v = t.powf(alpha) * g.operator_norm_t_a_alpha(alpha, t).unwrap();
                assert!(v <= bound);
            }
        }
    }

    #[test]
    fn control_regularity_accepts_and_rejects() {
        let n = 32;
        let g = DiagonalGenerator::from_rule(EigenRule::Linear { scale: 1.0, offset: 0.0 }, n).unwrap();
        let minus_n: Vec<f64> = (1..=n).map(|k| -(k as f64)).collect();
        assert!(ControlOperator::multiplier(minus_n.clone(), 1.0, &g).is_ok());
        assert!(matches!(
            ControlOperator::multiplier(minus_n, 0.5, &g),
            Err(Error::Regularity(_))
        ));
        let inv: Vec<f64> = (1..=n).map(|k| 1.0 / k as f64).collect();
        let b = ControlOperator::rank_one(inv, 0.0, &g).unwrap();
        assert!(b.is_bounded());
        let est = b.regularity_norm(&g);
        assert!(est.tail_bound > 0.0 && est.tail_bound < 0.1);
        // Harmonic terms sit exactly on the divergence boundary.
        let ones = vec![1.0; n];
        assert!(ControlOperator::rank_one(ones, 0.5, &g).is_err());
    }

    #[test]
    fn generator_spec_round_trip() {
        let json = r#"{"rule":"linear","coefficients":[1.0,0.0],"N":4,"shift":0.5}"#;
        let spec: GeneratorSpec = serde_json::from_str(json).unwrap();
        let g = spec.build().unwrap();
        assert_eq!(g.eigenvalues(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g.shift(), 0.5);
        let back = GeneratorSpec::from_generator(&g);
        assert_eq!(back.build().unwrap(), g);
        let explicit: GeneratorSpec = serde_json::from_str(r#"{"eigenvalues":[1,3]}"#).unwrap();
        assert_eq!(explicit.build().unwrap().eigenvalues(), &[1.0, 3.0]);
        let bad: GeneratorSpec = serde_json::from_str(r#"{"shift":1}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
