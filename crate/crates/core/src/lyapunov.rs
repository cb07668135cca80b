//! Lyapunov functions for diagonal systems, Dini derivatives along the
//! mild flow, and sampled verification of homogeneity and dissipation.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::mild_solution::{integrator_factor, trajectory};
use crate::numerics::{gauss_legendre_unit, golden_section_max, integrate, least_squares_slope, pairwise_sum, pairwise_sum_by};
use crate::signals::GridSignal;
use crate::spectral::{DiagonalGenerator, LinearSystem, PowerSign, StateVector};

/// Which construction a Lyapunov function uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Construction {
    SupExp { lambda: f64 },
    DiagQuadratic,
    HeatKernel { route: HeatRoute },
    IntegralHomogeneous { n: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatRoute {
    Spectral,
    Kernel,
}

pub trait LyapunovFunction: Send + Sync {
    fn construction(&self) -> Construction;

    /// Homogeneity degree `q` in `V(ax) = |a|^q V(x)`.
    fn degree(&self) -> f64;

    fn value(&self, x: &StateVector) -> Result<f64>;

    /// `V(x + d) - V(x)`; overridden where cancellation can be avoided.
    fn increment(&self, x: &StateVector, d: &StateVector) -> Result<f64> {
        Ok(self.value(&x.add(d))? - self.value(x)?)
    }

    /// `(c_lo, c_hi)` with `c_lo‖x‖^q ≤ V(x) ≤ c_hi‖x‖^q`.
    fn coercivity(&self) -> (f64, f64);

    /// True when `V` is a finite sum; false when it involves quadrature.
    fn exact_sum(&self) -> bool;

    /// Closed-form derivative of `V` along `ẋ = Ax + Bu₀`, where available.
    fn lie_derivative(&self, _system: &LinearSystem, _x: &StateVector, _u0: &[f64]) -> Option<Result<f64>> {
        None
    }

    /// Rejects systems this function cannot certify.
    fn check_compatible(&self, system: &LinearSystem) -> Result<()>;
}

fn check_modes(expected: usize, system: &LinearSystem) -> Result<()> {
    if system.modes() != expected {
        return Err(Error::DimensionMismatch { expected, found: system.modes() });
    }
    Ok(())
}

fn check_len(expected: usize, x: &StateVector) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: x.len() });
    }
    Ok(())
}

/// `A x + B u₀` for the given system.
fn vector_field(system: &LinearSystem, x: &StateVector, u0: &[f64]) -> Vec<f64> {
    let g = system.control.apply(u0);
    (0..system.modes()).map(|n| g[n] - system.generator.rate(n) * x.coefficients()[n]).collect()
}

// ---------------------------------------------------------------------------
// sup_t e^{λt}‖T(t)x‖

/// `V(x) = sup_{t ≥ 0} e^{λt}‖T(t)x‖`, degree 1 and coercive.
#[derive(Debug, Clone)]
pub struct SupExp {
    generator: DiagonalGenerator,
    lambda: f64,
    t_max: f64,
}

const SUP_TAIL_TOL: f64 = 1e-12;

impl SupExp {
    /// Requires `0 < λ < r₁`, so that `e^{λt}‖T(t)‖` decays.
    pub fn new(generator: &DiagonalGenerator, lambda: f64) -> Result<Self> {
        let r1 = -generator.growth_bound();
        if !(lambda > 0.0) || !(lambda < r1) {
            return Err(Error::InvalidArgument(format!(
                "weight λ = {lambda} must lie in (0, {r1}), the decay rate of the semigroup"
            )));
        }
        let t_max = SUP_TAIL_TOL.ln() / (lambda - r1);
        Ok(SupExp { generator: generator.clone(), lambda, t_max })
    }

    fn squared_profile<'a>(&'a self, x: &'a [f64]) -> impl Fn(f64) -> f64 + 'a {
        move |t| {
            pairwise_sum_by(x.len(), |n| {
                let k = self.generator.rate(n) - self.lambda;
                x[n] * x[n] * (-2.0 * k * t).exp()
            })
        }
    }

    /// `(argmax, max)` of `e^{2λt}‖T(t)x‖²` over `[0, T*]`.
    fn argmax(&self, x: &[f64]) -> (f64, f64) {
        let g = self.squared_profile(x);
        const GRID: usize = 64;
        let ts: Vec<f64> = (0..=GRID).map(|k| self.t_max * k as f64 / GRID as f64).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
        let (i, _) = vals.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        if i == 0 {
            // Endpoint maximum unless the profile still rises on the first cell.
            let (t, v) = golden_section_max(&g, 0.0, ts[1], 1e-10);
            return if v > vals[0] { (t, v) } else { (0.0, vals[0]) };
        }
        let lo = ts[i - 1];
        let hi = ts[(i + 1).min(GRID)];
        let (t, v) = golden_section_max(&g, lo, hi, 1e-10);
        if v >= vals[i] { (t, v) } else { (ts[i], vals[i]) }
    }

    /// `e^{2λt}(‖T(t)(x + d)‖² - ‖T(t)x‖²)` without cancellation.
    fn squared_increment_at(&self, x: &[f64], d: &[f64], t: f64) -> f64 {
        pairwise_sum_by(x.len(), |n| {
            let k = self.generator.rate(n) - self.lambda;
            (-2.0 * k * t).exp() * d[n] * (2.0 * x[n] + d[n])
        })
    }
}

impl LyapunovFunction for SupExp {
    fn construction(&self) -> Construction {
        Construction::SupExp { lambda: self.lambda }
    }

    fn degree(&self) -> f64 {
        1.0
    }

    fn value(&self, x: &StateVector) -> Result<f64> {
        check_len(self.generator.modes(), x)?;
        Ok(self.argmax(x.coefficients()).1.sqrt())
    }

    /// Bounds the change of the squared maximum by its value at the new
    /// argmax, which is exact to second order and never underestimates.
    fn increment(&self, x: &StateVector, d: &StateVector) -> Result<f64> {
        check_len(self.generator.modes(), x)?;
        check_len(self.generator.modes(), d)?;
        let y = x.add(d);
        let (t_new, g_new) = self.argmax(y.coefficients());
        let g_old = self.argmax(x.coefficients()).1;
        let delta_sq = self.squared_increment_at(x.coefficients(), d.coefficients(), t_new);
        let denom = g_new.sqrt() + g_old.sqrt();
        Ok(if denom == 0.0 { 0.0 } else { delta_sq / denom })
    }

    fn coercivity(&self) -> (f64, f64) {
        (1.0, 1.0)
    }

    fn exact_sum(&self) -> bool {
        true
    }

    fn check_compatible(&self, system: &LinearSystem) -> Result<()> {
        check_modes(self.generator.modes(), system)
    }
}

// ---------------------------------------------------------------------------
// Σ x_n² / λ_n

/// `V(x) = Σ x_n²/λ_n` with the unshifted eigenvalues, degree 2 and
/// non-coercive in infinite dimensions.
#[derive(Debug, Clone)]
pub struct DiagQuadratic {
    weights: Vec<f64>,
}

impl DiagQuadratic {
    pub fn new(generator: &DiagonalGenerator) -> Self {
        DiagQuadratic { weights: generator.eigenvalues().iter().map(|l| 1.0 / l).collect() }
    }
}

fn weighted_square(w: &[f64], x: &[f64]) -> f64 {
    pairwise_sum_by(x.len(), |n| w[n] * x[n] * x[n])
}

fn weighted_increment(w: &[f64], x: &[f64], d: &[f64]) -> f64 {
    pairwise_sum_by(x.len(), |n| w[n] * d[n] * (2.0 * x[n] + d[n]))
}

fn weighted_lie(w: &[f64], system: &LinearSystem, x: &StateVector, u0: &[f64]) -> Result<f64> {
    check_len(w.len(), x)?;
    if u0.len() != system.input_dim() {
        return Err(Error::DimensionMismatch { expected: system.input_dim(), found: u0.len() });
    }
    let f = vector_field(system, x, u0);
    let c = x.coefficients();
    Ok(2.0 * pairwise_sum_by(c.len(), |n| w[n] * c[n] * f[n]))
}

impl LyapunovFunction for DiagQuadratic {
    fn construction(&self) -> Construction {
        Construction::DiagQuadratic
    }

    fn degree(&self) -> f64 {
        2.0
    }

    fn value(&self, x: &StateVector) -> Result<f64> {
        check_len(self.weights.len(), x)?;
        Ok(weighted_square(&self.weights, x.coefficients()))
    }

    fn increment(&self, x: &StateVector, d: &StateVector) -> Result<f64> {
        check_len(self.weights.len(), x)?;
        check_len(self.weights.len(), d)?;
        Ok(weighted_increment(&self.weights, x.coefficients(), d.coefficients()))
    }

    fn coercivity(&self) -> (f64, f64) {
        (0.0, self.weights.iter().copied().fold(0.0, f64::max))
    }

    fn exact_sum(&self) -> bool {
        true
    }

    fn lie_derivative(&self, system: &LinearSystem, x: &StateVector, u0: &[f64]) -> Option<Result<f64>> {
        Some(check_modes(self.weights.len(), system).and_then(|_| weighted_lie(&self.weights, system, x, u0)))
    }

    fn check_compatible(&self, system: &LinearSystem) -> Result<()> {
        check_modes(self.weights.len(), system)
    }
}

// ---------------------------------------------------------------------------
// -⟨A⁻¹x, x⟩ for the Dirichlet heat equation

/// `V(x) = -⟨A⁻¹x, x⟩` for `A = a∂²` on `(0, 1)` with Dirichlet conditions.
///
/// The spectral route sums `x_n²/μ_n`. The kernel route evaluates the
/// Green's function form `(1/a)∬ min(ξ,τ)(1 - max(ξ,τ)) x(ξ)x(τ)` on the
/// physical profile `x(ξ) = Σ x_n √2 sin(nπξ)` by composite Gauss-Legendre
/// quadrature, independently of the eigenvalues.
#[derive(Debug, Clone)]
pub struct HeatQuadratic {
    diffusion: f64,
    modes: usize,
    route: HeatRoute,
    weights: Vec<f64>,
    cell: f64,
}

impl HeatQuadratic {
    /// Checks that `system` is the Dirichlet heat system with diffusion `a`.
    pub fn new(system: &LinearSystem, diffusion: f64, route: HeatRoute) -> Result<Self> {
        if !(diffusion > 0.0) || !diffusion.is_finite() {
            return Err(Error::InvalidArgument(format!("diffusion {diffusion} must be positive")));
        }
        let gen = &system.generator;
        let matches = gen.shift() == 0.0
            && gen.eigenvalues().iter().enumerate().all(|(i, mu)| {
                let n = (i + 1) as f64;
                let expect = diffusion * PI * PI * n * n;
                ((mu - expect) / expect).abs() <= 1e-12
            });
        if !matches {
            return Err(Error::Incompatible(
                "generator is not the unshifted Dirichlet Laplacian with the given diffusion".into(),
            ));
        }
        Ok(HeatQuadratic {
            diffusion,
            modes: gen.modes(),
            route,
            weights: gen.eigenvalues().iter().map(|mu| 1.0 / mu).collect(),
            cell: 1e-3,
        })
    }

    pub fn route(&self) -> HeatRoute {
        self.route
    }

    pub fn with_route(&self, route: HeatRoute) -> Self {
        HeatQuadratic { route, ..self.clone() }
    }

    fn kernel_value(&self, x: &[f64]) -> f64 {
        let profile = |xi: f64| -> f64 {
            let terms: Vec<f64> =
                x.iter().enumerate().map(|(i, c)| c * ((i + 1) as f64 * PI * xi).sin()).collect();
            2f64.sqrt() * pairwise_sum(&terms)
        };
        let (nodes, wts) = gauss_legendre_unit(5);
        let cells = (1.0 / self.cell).ceil() as usize;
        let h = 1.0 / cells as f64;
        // Per cell: full-cell ∫ τ x(τ) and the outer contributions that need
        // the running inner integral I(ξ) = ∫₀^ξ τ x(τ) dτ.
        let mut running = 0.0;
        let mut outer = Vec::with_capacity(cells);
        for k in 0..cells {
            let a = k as f64 * h;
            let mut cell_inner = 0.0;
            let mut cell_outer = 0.0;
            for (s, w) in nodes.iter().zip(&wts) {
                let xi = a + s * h;
                let x_xi = profile(xi);
                cell_inner += w * h * xi * x_xi;
                let width = xi - a;
                let partial: f64 = nodes
                    .iter()
                    .zip(&wts)
                    .map(|(s2, w2)| {
                        let tau = a + s2 * width;
                        w2 * width * tau * profile(tau)
                    })
                    .sum();
                cell_outer += w * h * (1.0 - xi) * x_xi * (running + partial);
            }
            outer.push(cell_outer);
            running += cell_inner;
        }
        2.0 * pairwise_sum(&outer) / self.diffusion
    }
}

impl LyapunovFunction for HeatQuadratic {
    fn construction(&self) -> Construction {
        Construction::HeatKernel { route: self.route }
    }

    fn degree(&self) -> f64 {
        2.0
    }

    fn value(&self, x: &StateVector) -> Result<f64> {
        check_len(self.modes, x)?;
        Ok(match self.route {
            HeatRoute::Spectral => weighted_square(&self.weights, x.coefficients()),
            HeatRoute::Kernel => self.kernel_value(x.coefficients()),
        })
    }

    fn increment(&self, x: &StateVector, d: &StateVector) -> Result<f64> {
        check_len(self.modes, x)?;
        check_len(self.modes, d)?;
        match self.route {
            HeatRoute::Spectral => Ok(weighted_increment(&self.weights, x.coefficients(), d.coefficients())),
            HeatRoute::Kernel => Ok(self.value(&x.add(d))? - self.value(x)?),
        }
    }

    fn coercivity(&self) -> (f64, f64) {
        (0.0, self.weights[0])
    }

    fn exact_sum(&self) -> bool {
        self.route == HeatRoute::Spectral
    }

    fn lie_derivative(&self, system: &LinearSystem, x: &StateVector, u0: &[f64]) -> Option<Result<f64>> {
        Some(check_modes(self.modes, system).and_then(|_| weighted_lie(&self.weights, system, x, u0)))
    }

    fn check_compatible(&self, system: &LinearSystem) -> Result<()> {
        HeatQuadratic::new(system, self.diffusion, self.route).map(|_| ())
    }
}

// ---------------------------------------------------------------------------
// ∫₀^∞ ‖T(t)x‖ⁿ dt

/// `V(x) = ∫₀^∞ ‖T(t)x‖ⁿ dt`, degree `n` and non-coercive in infinite
/// dimensions.
#[derive(Debug, Clone)]
pub struct IntegralHomogeneous {
    generator: DiagonalGenerator,
    n: u32,
    r_min: f64,
    t_max: f64,
}

impl IntegralHomogeneous {
    pub fn new(generator: &DiagonalGenerator, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("homogeneity degree n must be at least 1".into()));
        }
        generator.require_stable()?;
        let rates = generator.rates();
        let r_min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let r_max = rates.iter().copied().fold(0.0, f64::max);
        // Tail (‖x‖ e^{-r_min T})ⁿ/(n r_min) stays below 1e-10 of the lower
        // bound ‖x‖ⁿ/(n r_max) on the value.
        let t_max = (1e10 * r_max / r_min).ln() / (n as f64 * r_min);
        Ok(IntegralHomogeneous { generator: generator.clone(), n, r_min, t_max })
    }

    fn norm_at(&self, x: &[f64], t: f64) -> f64 {
        pairwise_sum_by(x.len(), |k| {
            let e = (-self.generator.rate(k) * t).exp() * x[k];
            e * e
        })
        .sqrt()
    }

    /// Upper bound `‖x‖ⁿ/(n r₁)` used as the absolute quadrature scale.
    fn scale(&self, norm: f64) -> f64 {
        norm.powi(self.n as i32) / (self.n as f64 * self.r_min)
    }
}

impl LyapunovFunction for IntegralHomogeneous {
    fn construction(&self) -> Construction {
        Construction::IntegralHomogeneous { n: self.n }
    }

    fn degree(&self) -> f64 {
        self.n as f64
    }

    fn value(&self, x: &StateVector) -> Result<f64> {
        check_len(self.generator.modes(), x)?;
        let c = x.coefficients();
        let n = self.n as i32;
        let scale = self.scale(x.norm());
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok(integrate(|t| self.norm_at(c, t).powi(n), 0.0, self.t_max, 1e-12, 1e-16 * scale, 4000).value)
    }

    /// Integrates `aⁿ - bⁿ = (a - b)Σ a^k b^{n-1-k}` with `a - b` formed
    /// from `d(2x + d)`, avoiding the difference of two quadratures.
    fn increment(&self, x: &StateVector, d: &StateVector) -> Result<f64> {
        check_len(self.generator.modes(), x)?;
        check_len(self.generator.modes(), d)?;
        let xc = x.coefficients();
        let dc = d.coefficients();
        let y = x.add(d);
        let yc = y.coefficients();
        let n = self.n;
        let integrand = |t: f64| {
            let a = self.norm_at(yc, t);
            let b = self.norm_at(xc, t);
            if a + b == 0.0 {
                return 0.0;
            }
            let diff_sq = pairwise_sum_by(xc.len(), |k| {
                (-2.0 * self.generator.rate(k) * t).exp() * dc[k] * (2.0 * xc[k] + dc[k])
            });
            let diff = diff_sq / (a + b);
            let mut s = 0.0;
            for k in 0..n {
                s += a.powi(k as i32) * b.powi((n - 1 - k) as i32);
            }
            diff * s
        };
        let scale = self.n as f64 * d.norm() * (x.norm() + d.norm()).powi(self.n as i32 - 1) / (self.n as f64 * self.r_min);
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok(integrate(integrand, 0.0, self.t_max, 1e-11, 1e-14 * scale, 4000).value)
    }

    fn coercivity(&self) -> (f64, f64) {
        (0.0, 1.0 / (self.n as f64 * self.r_min))
    }

    fn exact_sum(&self) -> bool {
        false
    }

    /// `n ∫ ‖T(t)x‖^{n-2} ⟨T(t)x, T(t)f⟩ dt` with `f = Ax + Bu₀`.
    fn lie_derivative(&self, system: &LinearSystem, x: &StateVector, u0: &[f64]) -> Option<Result<f64>> {
        if let Err(e) = check_modes(self.generator.modes(), system).and_then(|_| check_len(system.modes(), x)) {
            return Some(Err(e));
        }
        if u0.len() != system.input_dim() {
            return Some(Err(Error::DimensionMismatch { expected: system.input_dim(), found: u0.len() }));
        }
        let f = vector_field(system, x, u0);
        let xc = x.coefficients();
        let n = self.n as i32;
        let fnorm = crate::numerics::l2_norm(&f);
        if fnorm == 0.0 {
            return Some(Ok(0.0));
        }
        let x_zero = xc.iter().all(|v| *v == 0.0);
        if x_zero && n > 1 {
            return Some(Ok(0.0));
        }
        let integrand = |t: f64| {
            if x_zero {
                return self.norm_at(&f, t);
            }
            let nx = self.norm_at(xc, t);
            let inner = pairwise_sum_by(xc.len(), |k| (-2.0 * self.generator.rate(k) * t).exp() * xc[k] * f[k]);
            self.n as f64 * nx.powi(n - 2) * inner
        };
        let scale = self.n as f64 * fnorm * x.norm().max(fnorm).powi(n - 1) / (self.n as f64 * self.r_min);
        Some(Ok(integrate(integrand, 0.0, self.t_max, 1e-11, 1e-14 * scale, 4000).value))
    }

    /// The certificate needs `n·α < 1` for the control regularity `α`.
    fn check_compatible(&self, system: &LinearSystem) -> Result<()> {
        check_modes(self.generator.modes(), system)?;
        let alpha = system.control.regularity();
        if self.n as f64 * alpha >= 1.0 {
            return Err(Error::Regularity(format!(
                "degree n = {} with control regularity α = {alpha} violates nα < 1",
                self.n
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Dini derivative

/// Step lengths `2^{-10-j}` for `j = 0..=36`.
pub fn default_h_schedule() -> Vec<f64> {
    (0..=36).map(|j| 2f64.powi(-10 - j)).collect()
}

/// Number of trailing schedule entries entering the limsup proxy.
pub const DINI_TAIL: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct DiniReport {
    pub schedule: Vec<f64>,
    pub quotients: Vec<f64>,
    /// Maximum of the last four quotients.
    pub value: f64,
}

/// `φ(h, x, u) - x`, formed per mode when `u` is constant on `[0, h]`.
fn flow_increment(system: &LinearSystem, x: &StateVector, u: &GridSignal, h: f64) -> Result<StateVector> {
    if h <= u.breakpoints()[1] {
        let f = vector_field(system, x, &u.values()[0]);
        let gen = &system.generator;
        return Ok(StateVector::new(f.iter().enumerate().map(|(n, v)| v * integrator_factor(gen.rate(n), h)).collect()));
    }
    let tr = trajectory(system, x, u, &[h])?;
    Ok(tr.final_state().sub(x))
}

/// Difference quotients `(V(φ(h, x, u)) - V(x))/h` over `schedule`.
pub fn dini_lie_derivative(
    v: &dyn LyapunovFunction,
    system: &LinearSystem,
    x: &StateVector,
    u: &GridSignal,
    schedule: &[f64],
) -> Result<DiniReport> {
    if schedule.is_empty() || schedule.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(Error::InvalidArgument("step schedule must be nonempty with positive entries".into()));
    }
    if u.dim() != system.input_dim() {
        return Err(Error::DimensionMismatch { expected: system.input_dim(), found: u.dim() });
    }
    check_len(system.modes(), x)?;
    let quotients = schedule
        .iter()
        .map(|&h| -> Result<f64> {
            let d = flow_increment(system, x, u, h)?;
            let inc = v.increment(x, &d)?;
            if !inc.is_finite() {
                return Err(Error::InvalidArgument(format!("V is undefined along the flow at h = {h}")));
            }
            Ok(inc / h)
        })
        .collect::<Result<Vec<f64>>>()?;
    let start = quotients.len().saturating_sub(DINI_TAIL);
    let value = quotients[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DiniReport { schedule: schedule.to_vec(), quotients, value })
}

// ---------------------------------------------------------------------------
// Sampled verification

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovCertificate {
    pub construction: Construction,
    pub degree: f64,
    /// `[c_lo, c_hi]`; `c_lo = 0` marks a non-coercive function.
    pub coercivity: [f64; 2],
    /// `[a₃, a₄]` in `V̇ ≤ -a₃‖x‖^q + a₄‖u(0)‖^q`, when a pair was found.
    pub dissipation: Option<[f64; 2]>,
    pub success: bool,
    pub q: Exponent,
    pub sample_pairs: usize,
    pub seed: u64,
    /// Largest `V̇/‖x‖^q` observed at zero input.
    pub max_zero_input_rate: f64,
}

impl LyapunovCertificate {
    /// `(2a₄/a₃)^{1/q}`, the gain implied by the dissipation constants.
    pub fn implied_gain(&self) -> Option<f64> {
        self.dissipation.map(|[a3, a4]| (2.0 * a4 / a3).powf(1.0 / self.q.value()))
    }
}

/// Slack allowed on every sampled dissipation inequality.
pub const DISSIPATION_TOL: f64 = 1e-6;
const GRID_EXP: i32 = 10;

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalized(v: Vec<f64>) -> Option<StateVector> {
    let x = StateVector::new(v);
    let nx = x.norm();
    (nx > 0.0).then(|| x.scaled(1.0 / nx))
}

fn state_samples(system: &LinearSystem, count: usize, rng: &mut ChaCha8Rng) -> Vec<StateVector> {
    let n = system.modes();
    let mut out = vec![StateVector::zeros(n)];
    let stride = n.div_ceil(64).max(1);
    out.extend((0..n).step_by(stride).map(|k| StateVector::basis(n, k)));
    if !(n - 1).is_multiple_of(stride) {
        out.push(StateVector::basis(n, n - 1));
    }
    out.extend((0..count).filter_map(|_| normalized(normal_vec(rng, n))));
    let high = 3 * n / 4;
    out.extend((0..(count / 4).max(1)).filter_map(|_| {
        let v: Vec<f64> = (0..n).map(|k| if k >= high { StandardNormal.sample(rng) } else { 0.0 }).collect();
        normalized(v)
    }));
    let ones = vec![1.0; system.input_dim()];
    let g = system.control.apply(&ones);
    let aligned: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let r = system.generator.rate(k);
            if r == 0.0 { *v } else { v / r }
        })
        .collect();
    if let Some(c) = normalized(aligned) {
        out.push(c.scaled(-1.0));
        out.push(c);
    }
    out
}

fn input_samples(system: &LinearSystem, x: &StateVector, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = system.input_dim();
    let mut out = vec![vec![0.0; m]];
    let mut directions = Vec::new();
    if m == 1 {
        directions.push(vec![1.0]);
    } else {
        if m == x.len() && x.norm() > 0.0 {
            directions.push(x.scaled(1.0 / x.norm()).into_inner());
        }
        if let Some(r) = normalized(normal_vec(rng, m)) {
            directions.push(r.into_inner());
        }
    }
    for dir in &directions {
        for mag in [1.0, -1.0, 10.0, -10.0] {
            out.push(dir.iter().map(|v| mag * v).collect());
        }
    }
    out
}

/// Samples `(x, u₀)` pairs, evaluates the Dini proxy with the four
/// smallest steps, and searches `a₃, a₄ ∈ {2^k : |k| ≤ 10}` for the largest
/// feasible `a₃` and then the smallest `a₄`.
pub fn check_dissipation(
    v: &dyn LyapunovFunction,
    system: &LinearSystem,
    q: Exponent,
    sample_count: usize,
    seed: u64,
) -> Result<LyapunovCertificate> {
    if q.is_infinite() {
        return Err(Error::InvalidArgument("dissipation check needs finite q".into()));
    }
    v.check_compatible(system)?;
    let qv = q.value();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = state_samples(system, sample_count, &mut rng);
    let work: Vec<(StateVector, Vec<Vec<f64>>)> =
        xs.into_iter().map(|x| { let us = input_samples(system, &x, &mut rng); (x, us) }).collect();
    let full = default_h_schedule();
    let schedule = &full[full.len() - DINI_TAIL..];
    let samples: Vec<(f64, f64, f64)> = work
        .par_iter()
        .map(|(x, us)| -> Result<Vec<(f64, f64, f64)>> {
            us.iter()
                .map(|u0| {
                    let u = GridSignal::constant(u0.clone(), 1.0)?;
                    let d = dini_lie_derivative(v, system, x, &u, schedule)?.value;
                    Ok((x.norm().powf(qv), crate::numerics::l2_norm(u0).powf(qv), d))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let max_zero_input_rate = samples
        .iter()
        .filter(|s| s.1 == 0.0 && s.0 > 0.0)
        .map(|s| s.2 / s.0)
        .fold(f64::NEG_INFINITY, f64::max);

    let grid: Vec<f64> = (-GRID_EXP..=GRID_EXP).map(|k| 2f64.powi(k)).collect();
    let mut dissipation = None;
    for &a3 in grid.iter().rev() {
        let zero_ok = samples.iter().filter(|s| s.1 == 0.0).all(|s| s.2 + a3 * s.0 <= DISSIPATION_TOL);
        if !zero_ok {
            continue;
        }
        let need = samples
            .iter()
            .filter(|s| s.1 > 0.0)
            .map(|s| (s.2 + a3 * s.0 - DISSIPATION_TOL) / s.1)
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(&a4) = grid.iter().find(|&&a4| a4 >= need) {
            dissipation = Some([a3, a4]);
            break;
        }
    }
    let success = dissipation.is_some_and(|[a3, _]| a3 >= 1e-3);
    let (c_lo, c_hi) = v.coercivity();
    Ok(LyapunovCertificate {
        construction: v.construction(),
        degree: v.degree(),
        coercivity: [c_lo, c_hi],
        dissipation,
        success,
        q,
        sample_pairs: samples.len(),
        seed,
        max_zero_input_rate,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HomogeneityReport {
    pub degree: f64,
    pub scalars: Vec<f64>,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const HOMOGENEITY_SCALARS: [f64; 4] = [-2.0, -0.5, 0.5, 3.0];

/// Largest relative violation of `V(ax) = |a|^q V(x)` over random states.
pub fn check_homogeneity(v: &dyn LyapunovFunction, modes: usize, samples: usize, seed: u64) -> Result<HomogeneityReport> {
    let q = v.degree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<StateVector> = (0..samples).map(|_| StateVector::new(normal_vec(&mut rng, modes))).collect();
    let violations = xs
        .par_iter()
        .map(|x| -> Result<f64> {
            let base = v.value(x)?;
            let mut worst: f64 = 0.0;
            for a in HOMOGENEITY_SCALARS {
                let expect = a.abs().powf(q) * base;
                let got = v.value(&x.scaled(a))?;
                let err = (got - expect).abs();
                worst = worst.max(if expect == 0.0 { err } else { err / expect });
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_violation = violations.into_iter().fold(0.0, f64::max);
    let tolerance = if v.exact_sum() { 1e-12 } else { 1e-8 };
    Ok(HomogeneityReport {
        degree: q,
        scalars: HOMOGENEITY_SCALARS.to_vec(),
        samples,
        max_violation,
        tolerance,
        passed: max_violation <= tolerance,
    })
}

// ---------------------------------------------------------------------------
// Smoothing bounds for A^{-α}-regular controls

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub alpha: f64,
    pub omega: f64,
    /// Smallest `C` with `‖T(t)Φ_h u‖ ≤ C t^{-α}e^{-ωt}‖A^{-α}Φ_h u‖` on the grids.
    pub c_empirical: f64,
    /// `max_t t^α e^{ωt}‖T(t)(-A)^α‖` over the time grid.
    pub c_theory: f64,
    /// `max_t ‖T(t)Φ_{h_min}u‖/h_min ÷ (C‖A^{-α}Bu₀‖t^{-α}e^{-ωt})`.
    pub limit_ratio: f64,
    /// `(h, ‖A^{-α}(Φ_h u/h - Bu₀)‖)` per step.
    pub convergence: Vec<(f64, f64)>,
    pub convergence_order: f64,
    pub passed: bool,
}

/// Step lengths `2^{-k}` for `k = 4..=24`.
pub fn default_lemma_h_schedule() -> Vec<f64> {
    (4..=24).map(|k| 2f64.powi(-k)).collect()
}

/// Times `2^{k/2}` for `k = -16..=6`.
pub fn default_lemma_t_grid() -> Vec<f64> {
    (-16..=6).map(|k| 2f64.powf(k as f64 / 2.0)).collect()
}

/// `(1 - e^{-z})/z - 1` without cancellation for small `z`.
fn integrator_defect(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        -z / 2.0 + z * z / 6.0 - z * z * z / 24.0
    } else {
        -((-z).exp_m1() + z) / z
    }
}

/// Checks the smoothing estimate for `y_h = Φ_h u` with `u ≡ 1`,
/// `ω = r₁/2`, its `h ↓ 0` limit, and first-order convergence of
/// `A^{-α}y_h/h` to `A^{-α}Bu₀`.
pub fn lemma_bounds_check(system: &LinearSystem, h_schedule: &[f64], t_grid: &[f64]) -> Result<LemmaReport> {
    let gen = &system.generator;
    gen.require_stable()?;
    let alpha = system.control.regularity();
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Regularity(format!("smoothing bound needs α < 1, got {alpha}")));
    }
    if h_schedule.is_empty() || h_schedule.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("h schedule must be nonempty and positive".into()));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("time grid must be nonempty and positive".into()));
    }
    let omega = -gen.growth_bound() / 2.0;
    let u0 = vec![1.0; system.input_dim()];
    let b = StateVector::new(system.control.apply(&u0));
    let rates = gen.rates();
    let y = |h: f64| StateVector::new(b.coefficients().iter().zip(&rates).map(|(g, r)| g * integrator_factor(*r, h)).collect());
    let minus_alpha = |v: &StateVector| gen.fractional_power_apply(alpha, PowerSign::Minus, v);
    let weight = |t: f64| t.powf(-alpha) * (-omega * t).exp();

    // The h ↓ 0 limit y_h/h → Bu₀ is included as one more member.
    let mut members: Vec<StateVector> = h_schedule.iter().map(|&h| y(h).scaled(1.0 / h)).collect();
    members.push(b.clone());
    let mut c_empirical: f64 = 0.0;
    for m in &members {
        let base = minus_alpha(m)?.norm();
        if base == 0.0 {
            continue;
        }
        for &t in t_grid {
            let lhs = gen.semigroup_apply(t, m)?.norm();
            c_empirical = c_empirical.max(lhs / (weight(t) * base));
        }
    }
    let c_theory = t_grid
        .iter()
        .map(|&t| gen.operator_norm_t_a_alpha(alpha, t).map(|n| t.powf(alpha) * (omega * t).exp() * n))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let h_min = h_schedule.iter().copied().fold(f64::INFINITY, f64::min);
    let limit_base = minus_alpha(&b)?.norm();
    let y_min = y(h_min);
    let mut limit_ratio: f64 = 0.0;
    if limit_base > 0.0 {
        for &t in t_grid {
            let lhs = gen.semigroup_apply(t, &y_min)?.norm() / h_min;
            limit_ratio = limit_ratio.max(lhs / (c_empirical * limit_base * weight(t)));
        }
    }

    let convergence: Vec<(f64, f64)> = h_schedule
        .iter()
        .map(|&h| -> Result<(f64, f64)> {
            let defect = StateVector::new(
                b.coefficients().iter().zip(&rates).map(|(g, r)| g * integrator_defect(r * h)).collect(),
            );
            Ok((h, minus_alpha(&defect)?.norm()))
        })
        .collect::<Result<_>>()?;
    let usable: Vec<&(f64, f64)> = convergence.iter().filter(|(_, e)| *e > 1e-13 * limit_base && *e > 0.0).collect();
    let convergence_order = if usable.len() >= 2 {
        let lx: Vec<f64> = usable.iter().map(|(h, _)| h.ln()).collect();
        let ly: Vec<f64> = usable.iter().map(|(_, e)| e.ln()).collect();
        least_squares_slope(&lx, &ly)
    } else {
        f64::NAN
    };
    let order_ok = limit_base == 0.0 || (convergence_order - 1.0).abs() <= 0.1;
    let passed = c_empirical <= c_theory * (1.0 + 1e-12) && limit_ratio <= 1.0 + 1e-6 && order_ok;
    Ok(LemmaReport {
        alpha,
        omega,
        c_empirical,
        c_theory,
        limit_ratio,
        convergence,
        convergence_order,
        passed,
    })
}
