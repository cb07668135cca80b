//! Exact mild solutions `φ(t, x₀, u) = T(t)x₀ + Φ_t u` for piecewise-constant
//! inputs, and time norms of the resulting trajectories.
//!
//! On a piece of length `Δ` with constant forcing `g_n = (Bu)_n` each mode
//! evolves as `x_n(a + σ) = E(σ)x_n(a) + F(σ)g_n` with `E(σ) = e^{-r_n σ}` and
//! `F(σ) = (1 - E(σ))/r_n`. Everything below is built on that formula.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::numerics::{gauss_legendre_16, integrate, l2_norm, pairwise_sum, pairwise_sum_by, phi1};
use crate::signals::GridSignal;
use crate::spectral::{ControlKind, LinearSystem, StateVector};

/// `(1 - e^{-rΔ})/r`, switching to `Δ - rΔ²/2` when `|rΔ| < 1e-8`.
pub fn integrator_factor(r: f64, dt: f64) -> f64 {
    let z = r * dt;
    if z.abs() < 1e-8 {
        dt - r * dt * dt / 2.0
    } else if dt.is_infinite() {
        1.0 / r
    } else {
        -(-z).exp_m1() / r
    }
}

fn uses_series(r: f64, dt: f64) -> bool {
    (r * dt).abs() < 1e-8
}

/// Exact update over one interval of length `dt` with constant input `u`.
pub fn step(system: &LinearSystem, x: &StateVector, u: &[f64], dt: f64) -> Result<StateVector> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step length {dt} must be positive")));
    }
    check_state(system, x)?;
    check_input(system, u)?;
    let g = system.control.apply(u);
    let gen = &system.generator;
    Ok(StateVector::new(
        (0..system.modes())
            .map(|n| {
                let r = gen.rate(n);
                (-r * dt).exp() * x.coefficients()[n] + integrator_factor(r, dt) * g[n]
            })
            .collect(),
    ))
}

fn check_state(system: &LinearSystem, x: &StateVector) -> Result<()> {
    if x.len() != system.modes() {
        return Err(Error::DimensionMismatch { expected: system.modes(), found: x.len() });
    }
    Ok(())
}

fn check_input(system: &LinearSystem, u: &[f64]) -> Result<()> {
    if u.len() != system.input_dim() {
        return Err(Error::DimensionMismatch { expected: system.input_dim(), found: u.len() });
    }
    Ok(())
}

/// Per-step metadata of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    pub dt: f64,
    /// Modes whose integrator factor used the small-argument series.
    pub series_modes: usize,
}

/// Sampled mild solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub input: GridSignal,
    pub steps: Vec<StepInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub samples: usize,
    pub t_final: f64,
    pub final_norm: f64,
    pub max_norm: f64,
    pub max_jump: f64,
    pub series_steps: usize,
    pub final_state: Vec<f64>,
}

impl Trajectory {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(StateVector::norm).collect()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory holds x₀")
    }

    /// Largest `‖x(t_{k+1}) - x(t_k)‖` over consecutive samples.
    pub fn max_jump(&self) -> f64 {
        self.states.windows(2).map(|w| w[1].sub(&w[0]).norm()).fold(0.0, f64::max)
    }

    /// Columns `time, x_1, …, x_N, norm`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, StateVector::len);
        let mut out = String::from("time");
        for k in 1..=n {
            let _ = write!(out, ",x_{k}");
        }
        out.push_str(",norm\n");
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t}");
            for v in x.coefficients() {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", x.norm());
        }
        out
    }

    pub fn summary(&self) -> TrajectorySummary {
        let norms = self.norms();
        TrajectorySummary {
            samples: self.times.len(),
            t_final: *self.times.last().unwrap_or(&0.0),
            final_norm: *norms.last().unwrap_or(&0.0),
            max_norm: norms.iter().copied().fold(0.0, f64::max),
            max_jump: self.max_jump(),
            series_steps: self.steps.iter().filter(|s| s.series_modes > 0).count(),
            final_state: self.final_state().coefficients().to_vec(),
        }
    }
}

/// `0, dt, 2dt, …, t_final` with the last point clamped to `t_final`.
pub fn uniform_grid(t_final: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!("grid needs dt > 0 and finite t_final > 0, got {dt}, {t_final}")));
    }
    let n = ((t_final / dt) * (1.0 - 1e-12)).ceil() as usize;
    let mut g: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    g.push(t_final);
    Ok(g)
}

/// Adds the points `2^{-j}·t_final`, `j = 1..=levels`, to `grid`.
pub fn geometric_refinement(grid: &[f64], t_final: f64, levels: u32) -> Vec<f64> {
    let mut g: Vec<f64> = grid.to_vec();
    g.extend((1..=levels).map(|j| t_final * 2f64.powi(-(j as i32))));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Mild solution sampled on `output_grid` merged with the input breakpoints
/// up to the last grid time.
pub fn trajectory(system: &LinearSystem, x0: &StateVector, u: &GridSignal, output_grid: &[f64]) -> Result<Trajectory> {
    check_state(system, x0)?;
    if u.dim() != system.input_dim() {
        return Err(Error::DimensionMismatch { expected: system.input_dim(), found: u.dim() });
    }
    if output_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("output grid times must be finite and nonnegative".into()));
    }
    let t_end = output_grid.iter().copied().fold(0.0, f64::max);
    let mut times: Vec<f64> = output_grid.to_vec();
    times.push(0.0);
    times.extend(u.breakpoints().iter().copied().filter(|b| *b <= t_end));
    times.sort_by(f64::total_cmp);
    times.dedup();

    let gen = &system.generator;
    let mut states = Vec::with_capacity(times.len());
    let mut steps = Vec::with_capacity(times.len().saturating_sub(1));
    let mut x = x0.clone();
    states.push(x.clone());
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        x = step(system, &x, u.value_at(w[0]), dt)?;
        let series_modes = (0..gen.modes()).filter(|&n| uses_series(gen.rate(n), dt)).count();
        steps.push(StepInfo { dt, series_modes });
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, input: u.clone(), steps })
}

/// Trajectory of `AΦ_t u`, i.e. `-r_n (Φ_t u)_n` per mode.
pub fn apply_a_phi(system: &LinearSystem, u: &GridSignal, grid: &[f64]) -> Result<Trajectory> {
    system.generator.require_stable()?;
    let mut traj = trajectory(system, &StateVector::zeros(system.modes()), u, grid)?;
    for s in &mut traj.states {
        *s = system.generator.apply_generator(s)?;
    }
    Ok(traj)
}

/// Exact response to the per-mode indicator input on `[0, τ]`.
#[derive(Debug, Clone, Serialize)]
pub struct IndicatorResponse {
    pub tau: f64,
    pub state: Vec<f64>,
    pub norm_squared: f64,
    /// `(e - e^{1/2})² Σ_{n=⌈1/τ⌉}^{N} e^{-2nτ}`.
    pub lower_bound: f64,
    /// Same sum extended to `n → ∞`.
    pub lower_bound_infinite: f64,
}

/// `Φ_τ u` for `(u(s))_n = 1_{[1/(2n), 1/n]}(s)` on the system with
/// `λ_n = n` and `B = A₋₁` (multiplier `b_n = -n`).
pub fn input_map_indicator(system: &LinearSystem, tau: f64) -> Result<IndicatorResponse> {
    if !(tau > 0.0) || tau > 1.0 {
        return Err(Error::InvalidArgument(format!("τ = {tau} must lie in (0, 1]")));
    }
    let gen = &system.generator;
    let b = match system.control.kind() {
        ControlKind::DiagonalMultiplier(b) => b,
        ControlKind::RankOne(_) => {
            return Err(Error::Incompatible("indicator input needs a diagonal multiplier control".into()))
        }
    };
    let matches = gen.shift() == 0.0
        && gen.eigenvalues().iter().enumerate().all(|(k, l)| *l == (k + 1) as f64)
        && b.iter().enumerate().all(|(k, v)| *v == -((k + 1) as f64));
    if !matches {
        return Err(Error::Incompatible("indicator response requires λ_n = n and b_n = -n".into()));
    }
    let state: Vec<f64> = (1..=gen.modes())
        .map(|n| {
            let nf = n as f64;
            let lo = 1.0 / (2.0 * nf);
            let hi = (1.0 / nf).min(tau);
            if lo >= tau {
                return 0.0;
            }
            -nf * ((-nf * (tau - hi)).exp() - (-nf * (tau - lo)).exp()) / nf
        })
        .collect();
    let norm_squared = pairwise_sum_by(state.len(), |i| state[i] * state[i]);
    let c = (std::f64::consts::E - 0.5f64.exp()).powi(2);
    let q = (-2.0 * tau).exp();
    let n0 = (1.0 / tau).ceil();
    let big_n = gen.modes() as f64;
    let finite = if n0 > big_n { 0.0 } else { q.powf(n0) * -(q.ln() * (big_n - n0 + 1.0)).exp_m1() / (1.0 - q) };
    Ok(IndicatorResponse {
        tau,
        state,
        norm_squared,
        lower_bound: c * finite,
        lower_bound_infinite: c * q.powf(n0) / (1.0 - q),
    })
}

/// Per-mode weight applied before taking time norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeWeights {
    /// `‖x(t)‖`.
    Identity,
    /// `‖A x(t)‖`, weights `r_n`.
    Rates,
}

fn weights(system: &LinearSystem, w: ModeWeights) -> Vec<f64> {
    match w {
        ModeWeights::Identity => vec![1.0; system.modes()],
        ModeWeights::Rates => system.generator.rates(),
    }
}

/// Entries `(∫E², ∫EF, ∫F²)` of the Gram matrix of `(E, F)` on `[0, dt]`.
pub fn piece_gram(r: f64, dt: f64) -> [f64; 3] {
    let z = r * dt;
    if z.abs() < 2.0 {
        let (nodes, wts) = gauss_legendre_16();
        let mut ef = 0.0;
        let mut ff = 0.0;
        for (t, w) in nodes.iter().zip(wts) {
            let psi = phi1(z * t);
            ef += w * (-z * t).exp() * t * psi;
            ff += w * t * t * psi * psi;
        }
        [dt * phi1(2.0 * z), dt * dt * ef, dt * dt * dt * ff]
    } else {
        let e1 = -(-z).exp_m1();
        let e2 = -(-2.0 * z).exp_m1();
        let ee = e2 / (2.0 * r);
        let ef = (e1 - 0.5 * e2) / (r * r);
        let ff = (dt - 2.0 * e1 / r + e2 / (2.0 * r)) / (r * r);
        [ee, ef, ff]
    }
}

/// `‖w ⊙ φ(·, x₀, u)‖_{L^q([0, t], X)}` of the continuous-time solution.
///
/// `q = 2` is exact through per-piece Gram matrices; finite `q ≠ 2` uses
/// adaptive quadrature per piece; `q = ∞` takes the maximum over piece
/// endpoints and eight interior samples per piece.
pub fn trajectory_time_norm(
    system: &LinearSystem,
    x0: &StateVector,
    u: &GridSignal,
    t: f64,
    q: Exponent,
    weight: ModeWeights,
) -> Result<f64> {
    check_state(system, x0)?;
    if u.dim() != system.input_dim() {
        return Err(Error::DimensionMismatch { expected: system.input_dim(), found: u.dim() });
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let gen = &system.generator;
    let m = system.modes();
    let rates = gen.rates();
    let w = weights(system, weight);
    let mut y: Vec<f64> = x0.coefficients().to_vec();
    let mut contributions = Vec::new();
    let mut sup: f64 = 0.0;
    for piece in u.pieces_until(t) {
        let dt = piece.end - piece.start;
        let g = system.control.apply(piece.value);
        if q == Exponent::TWO {
            let terms: Vec<f64> = (0..m)
                .map(|n| {
                    let [ee, ef, ff] = piece_gram(rates[n], dt);
                    let v = y[n] * y[n] * ee + 2.0 * y[n] * g[n] * ef + g[n] * g[n] * ff;
                    w[n] * w[n] * v.max(0.0)
                })
                .collect();
            contributions.push(pairwise_sum(&terms));
        } else {
            let at = |s: f64| -> f64 {
                let v: Vec<f64> = (0..m)
                    .map(|n| w[n] * ((-rates[n] * s).exp() * y[n] + integrator_factor(rates[n], s) * g[n]))
                    .collect();
                l2_norm(&v)
            };
            if q.is_infinite() {
                for j in 0..=9 {
                    sup = sup.max(at(dt * j as f64 / 9.0));
                }
            } else {
                let qv = q.value();
                let quad = integrate(|s| at(s).powf(qv), 0.0, dt, 1e-10, 1e-300, 400);
                contributions.push(quad.value);
            }
        }
        for n in 0..m {
            y[n] = (-rates[n] * dt).exp() * y[n] + integrator_factor(rates[n], dt) * g[n];
        }
    }
    if q.is_infinite() {
        return Ok(sup);
    }
    if contributions.is_empty() {
        return Ok(0.0);
    }
    Ok(pairwise_sum(&contributions).powf(1.0 / q.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{ControlOperator, DiagonalGenerator, EigenRule};

    fn scalar() -> LinearSystem {
        let g = DiagonalGenerator::new(vec![1.0]).unwrap();
        let b = ControlOperator::rank_one(vec![1.0], 0.0, &g).unwrap();
        LinearSystem::new(g, b).unwrap()
    }

    fn two_mode() -> LinearSystem {
        let g = DiagonalGenerator::new(vec![1.0, 2.0]).unwrap();
        let b = ControlOperator::rank_one(vec![1.0, 1.0], 0.0, &g).unwrap();
        LinearSystem::new(g, b).unwrap()
    }

    fn minus_n(n: usize) -> LinearSystem {
        let g = DiagonalGenerator::from_rule(EigenRule::Linear { scale: 1.0, offset: 0.0 }, n).unwrap();
        let b = ControlOperator::multiplier((1..=n).map(|k| -(k as f64)).collect(), 1.0, &g).unwrap();
        LinearSystem::new(g, b).unwrap()
    }

    #[test]
    fn step_examples() {
        let s = scalar();
        let y = step(&s, &StateVector::zeros(1), &[1.0], 2.0).unwrap();
        assert!((y.coefficients()[0] - (1.0 - (-2f64).exp())).abs() < 1e-15);
        let t = two_mode();
        let x = StateVector::new(vec![0.3, -0.7]);
        let free = step(&t, &x, &[0.0], 0.8).unwrap();
        assert_eq!(free, t.generator.semigroup_apply(0.8, &x).unwrap());
        let steady = step(&t, &StateVector::zeros(2), &[1.0], f64::INFINITY).unwrap();
        assert_eq!(steady.coefficients(), &[1.0, 0.5]);
        assert!(step(&t, &StateVector::zeros(3), &[1.0], 1.0).is_err());
    }

    #[test]
    fn integrator_series_branch_is_continuous() {
        let a = integrator_factor(1.0, 1e-9);
        let b = integrator_factor(1.0, 1.1e-8);
        assert!((a - (1e-9 - 0.5e-18)).abs() < 1e-24);
        assert!((b - (1.1e-8 - 0.5 * 1.21e-16)).abs() < 1e-22);
    }

    #[test]
    fn scalar_toy_unit_steady_state() {
        let s = scalar();
        let u = GridSignal::constant(vec![1.0], 10.0).unwrap();
        let grid = uniform_grid(10.0, 0.25).unwrap();
        let tr = trajectory(&s, &StateVector::new(vec![1.0]), &u, &grid).unwrap();
        for x in &tr.states {
            assert!((x.coefficients()[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn free_trajectory_is_semigroup() {
        let s = two_mode();
        let x0 = StateVector::new(vec![1.0, -2.0]);
        let u = GridSignal::zero(1, 1.0).unwrap();
        let tr = trajectory(&s, &x0, &u, &uniform_grid(3.0, 0.5).unwrap()).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            let e = s.generator.semigroup_apply(*t, &x0).unwrap();
            assert!(x.sub(&e).norm() <= 1e-14 * x0.norm());
        }
    }

    #[test]
    fn trajectory_includes_breakpoints() {
        let s = scalar();
        let u = GridSignal::scalar(vec![0.0, 0.3, 0.7], vec![1.0, -1.0]).unwrap();
        let tr = trajectory(&s, &StateVector::zeros(1), &u, &[0.0, 1.0]).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.3, 0.7, 1.0]);
        assert_eq!(tr.steps.len(), 3);
    }

    #[test]
    fn a_phi_scalar_closed_form() {
        let s = scalar();
        let u = GridSignal::constant(vec![1.0], 5.0).unwrap();
        let tr = apply_a_phi(&s, &u, &uniform_grid(5.0, 0.5).unwrap()).unwrap();
        for (t, x) in tr.times.iter().zip(&tr.states) {
            assert!((x.coefficients()[0] + (1.0 - (-t).exp())).abs() < 1e-15);
        }
        let zero = apply_a_phi(&s, &GridSignal::zero(1, 5.0).unwrap(), &[5.0]).unwrap();
        assert!(zero.states.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn indicator_response_examples() {
        let sys = minus_n(16);
        let r = input_map_indicator(&sys, 1.0).unwrap();
        let c = (std::f64::consts::E - 0.5f64.exp()).powi(2);
        let expected = c * (-2f64).exp() / (1.0 - (-2f64).exp());
        assert!((r.lower_bound_infinite - expected).abs() < 1e-15);
        assert!(r.norm_squared >= r.lower_bound);
        // Full-support mode: -e^{-nτ}(e - e^{1/2}).
        let n = 3.0;
        let full = -(-n * 1.0f64).exp() * (std::f64::consts::E - 0.5f64.exp());
        assert!((r.state[2] - full).abs() < 1e-15);
        assert!(input_map_indicator(&sys, 0.0).is_err());
        assert!(input_map_indicator(&scalar(), 0.5).is_err());
    }

    #[test]
    fn indicator_partial_integral() {
        let sys = minus_n(16);
        let tau = 0.2;
        let r = input_map_indicator(&sys, tau).unwrap();
        // Mode 3: support [1/6, 1/3] cut at τ = 0.2.
        let oracle = integrate(|s| -3.0 * (-3.0 * (tau - s)).exp(), 1.0 / 6.0, tau, 1e-14, 0.0, 100).value;
        assert!((r.state[2] - oracle).abs() < 1e-14);
        // Modes with 1/(2n) ≥ τ see no input.
        assert_eq!(r.state[0], 0.0);
        assert_eq!(r.state[1], 0.0);
    }

    #[test]
    fn gram_branches_agree() {
        for &r in &[0.0, 1e-9, 0.3, 1.9, 2.1, 7.0, -1.0, -3.0] {
            let dt = 1.0;
            let g = piece_gram(r, dt);
            let e = |s: f64| (-r * s).exp();
            let f = |s: f64| integrator_factor(r, s);
            let ee = integrate(|s| e(s) * e(s), 0.0, dt, 1e-14, 0.0, 200).value;
            let ef = integrate(|s| e(s) * f(s), 0.0, dt, 1e-14, 0.0, 200).value;
            let ff = integrate(|s| f(s) * f(s), 0.0, dt, 1e-14, 0.0, 200).value;
            assert!((g[0] - ee).abs() < 1e-13 * ee.abs().max(1.0), "ee r={r}");
            assert!((g[1] - ef).abs() < 1e-13 * ef.abs().max(1.0), "ef r={r}");
            assert!((g[2] - ff).abs() < 1e-13 * ff.abs().max(1.0), "ff r={r}");
        }
    }

    #[test]
    fn time_norms_scalar_closed_forms() {
        let s = scalar();
        let zero = GridSignal::zero(1, 1.0).unwrap();
        let x0 = StateVector::new(vec![1.0]);
        let t = 3.0;
        let l2 = trajectory_time_norm(&s, &x0, &zero, t, Exponent::TWO, ModeWeights::Identity).unwrap();
        assert!((l2 - ((1.0 - (-2.0 * t).exp()) / 2.0).sqrt()).abs() < 1e-15);
        let l1 = trajectory_time_norm(&s, &x0, &zero, t, Exponent::ONE, ModeWeights::Identity).unwrap();
        assert!((l1 - (1.0 - (-t).exp())).abs() < 1e-12);
        let linf = trajectory_time_norm(&s, &x0, &zero, t, Exponent::INFINITY, ModeWeights::Identity).unwrap();
        assert_eq!(linf, 1.0);

        let one = GridSignal::constant(vec![1.0], t).unwrap();
        let zero_state = StateVector::zeros(1);
        let l1u = trajectory_time_norm(&s, &zero_state, &one, t, Exponent::ONE, ModeWeights::Identity).unwrap();
        assert!((l1u - (t - 1.0 + (-t).exp())).abs() < 1e-11);
        let l2u = trajectory_time_norm(&s, &zero_state, &one, t, Exponent::TWO, ModeWeights::Identity).unwrap();
        let exact = t - 2.0 * (1.0 - (-t).exp()) + (1.0 - (-2.0 * t).exp()) / 2.0;
        assert!((l2u - exact.sqrt()).abs() < 1e-14);
        let l3u = trajectory_time_norm(&s, &zero_state, &one, t, Exponent::new(2.0).unwrap(), ModeWeights::Identity)
            .unwrap();
        assert_eq!(l3u, l2u);
    }

    #[test]
    fn generic_quadrature_matches_gram_path() {
        let sys = minus_n(8);
        let u = GridSignal::new(
            vec![0.0, 0.4, 1.1],
            vec![vec![1.0, -1.0, 0.5, 0.0, 0.2, 0.3, -0.4, 1.0], vec![0.1; 8]],
            vec![0.0; 8],
        )
        .unwrap();
        let x0 = StateVector::new((0..8).map(|k| (k as f64).sin()).collect());
        let exact = trajectory_time_norm(&sys, &x0, &u, 2.0, Exponent::TWO, ModeWeights::Rates).unwrap();
        // p = 2 through the generic path by nudging the exponent.
        let near = trajectory_time_norm(&sys, &x0, &u, 2.0, Exponent::new(2.0 + 1e-12).unwrap(), ModeWeights::Rates)
            .unwrap();
        assert!((exact - near).abs() < 1e-9 * exact);
    }
}
