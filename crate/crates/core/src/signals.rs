//! Input signals: piecewise-constant grid signals, a few analytic families,
//! and their `L^p([0, t], U)` norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::numerics::{integrate, l2_norm, pairwise_sum};

/// Right-continuous piecewise-constant signal `u: [0, ∞) → U`.
///
/// `values[k]` holds on `[breakpoints[k], breakpoints[k+1])`; `tail` holds
/// after the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSignal", into = "RawGridSignal")]
pub struct GridSignal {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
    tail: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Sample {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Sample {
    fn into_vec(self) -> Vec<f64> {
        match self {
            Sample::Scalar(v) => vec![v],
            Sample::Vector(v) => v,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawGridSignal {
    breakpoints: Vec<f64>,
    values: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<Sample>,
}

impl TryFrom<RawGridSignal> for GridSignal {
    type Error = Error;

    fn try_from(raw: RawGridSignal) -> Result<Self> {
        let values: Vec<Vec<f64>> = raw.values.into_iter().map(Sample::into_vec).collect();
        let dim = values.first().map_or(1, Vec::len);
        let tail = raw.tail.map_or_else(|| vec![0.0; dim], Sample::into_vec);
        GridSignal::new(raw.breakpoints, values, tail)
    }
}

impl From<GridSignal> for RawGridSignal {
    fn from(s: GridSignal) -> Self {
        let scalar = s.dim() == 1;
        let wrap = |v: Vec<f64>| if scalar { Sample::Scalar(v[0]) } else { Sample::Vector(v) };
        let tail = if s.tail.iter().all(|v| *v == 0.0) { None } else { Some(wrap(s.tail)) };
        RawGridSignal {
            breakpoints: s.breakpoints,
            values: s.values.into_iter().map(wrap).collect(),
            tail,
        }
    }
}

/// One constant piece `[start, end)` of a signal.
#[derive(Debug, Clone, Copy)]
pub struct Piece<'a> {
    pub start: f64,
    pub end: f64,
    pub value: &'a [f64],
}

impl GridSignal {
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<f64>>, tail: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidArgument(format!(
                "grid signal needs K+1 breakpoints for K ≥ 1 values, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidArgument("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidArgument("breakpoints must be finite and strictly increasing".into()));
        }
        let dim = values[0].len();
        if dim == 0 || values.iter().any(|v| v.len() != dim) || tail.len() != dim {
            return Err(Error::InvalidArgument("signal value dimension must be constant and positive".into()));
        }
        if values.iter().flatten().chain(&tail).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("signal values must be finite".into()));
        }
        Ok(GridSignal { breakpoints, values, tail })
    }

    /// Scalar-valued signal with zero tail.
    pub fn scalar(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let values = values.into_iter().map(|v| vec![v]).collect();
        GridSignal::new(breakpoints, values, vec![0.0])
    }

    /// `value` on `[0, horizon)`, zero afterwards.
    pub fn constant(value: Vec<f64>, horizon: f64) -> Result<Self> {
        let dim = value.len();
        GridSignal::new(vec![0.0, horizon], vec![value], vec![0.0; dim])
    }

    pub fn zero(dim: usize, horizon: f64) -> Result<Self> {
        GridSignal::constant(vec![0.0; dim], horizon)
    }

    pub fn dim(&self) -> usize {
        self.tail.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    /// Last breakpoint.
    pub fn horizon(&self) -> f64 {
        *self.breakpoints.last().expect("at least two breakpoints")
    }

    pub fn value_at(&self, t: f64) -> &[f64] {
        if t >= self.horizon() {
            return &self.tail;
        }
        let k = self.breakpoints.partition_point(|b| *b <= t).saturating_sub(1);
        &self.values[k]
    }

    /// Constant pieces covering `[0, t]`, the tail included when `t` exceeds
    /// the horizon.
    pub fn pieces_until(&self, t: f64) -> Vec<Piece<'_>> {
        let mut out = Vec::new();
        for (k, v) in self.values.iter().enumerate() {
            let (a, b) = (self.breakpoints[k], self.breakpoints[k + 1]);
            if a >= t {
                break;
            }
            out.push(Piece { start: a, end: b.min(t), value: v });
        }
        if t > self.horizon() {
            out.push(Piece { start: self.horizon(), end: t, value: &self.tail });
        }
        out
    }

    /// `L^p([0, t], U)` norm, exact per constant piece.
    pub fn lp_norm(&self, p: Exponent, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let pieces = self.pieces_until(t);
        if p.is_infinite() {
            return Ok(pieces.iter().map(|pc| l2_norm(pc.value)).fold(0.0, f64::max));
        }
        let pv = p.value();
        let terms: Vec<f64> = pieces
            .iter()
            .map(|pc| {
                let n = l2_norm(pc.value);
                if n == 0.0 {
                    0.0
                } else {
                    n.powf(pv) * (pc.end - pc.start)
                }
            })
            .collect();
        Ok(pairwise_sum(&terms).powf(1.0 / pv))
    }

    pub fn scaled(&self, a: f64) -> GridSignal {
        GridSignal {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v.iter().map(|x| a * x).collect()).collect(),
            tail: self.tail.iter().map(|x| a * x).collect(),
        }
    }

    /// Same function on a grid that also contains `extra` (points outside
    /// `(0, ∞)` are ignored; points past the horizon extend it with the tail).
    pub fn refined(&self, extra: &[f64]) -> GridSignal {
        let mut bps = self.breakpoints.clone();
        bps.extend(extra.iter().copied().filter(|t| *t > 0.0 && t.is_finite()));
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let values = bps.windows(2).map(|w| self.value_at(w[0]).to_vec()).collect();
        GridSignal { breakpoints: bps, values, tail: self.tail.clone() }
    }

    /// `a·self + b·other` on the merged grid.
    pub fn linear_combination(a: f64, u: &GridSignal, b: f64, v: &GridSignal) -> Result<GridSignal> {
        if u.dim() != v.dim() {
            return Err(Error::DimensionMismatch { expected: u.dim(), found: v.dim() });
        }
        let mut bps: Vec<f64> = u.breakpoints.iter().chain(&v.breakpoints).copied().collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let comb = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect::<Vec<_>>();
        let values = bps.windows(2).map(|w| comb(u.value_at(w[0]), v.value_at(w[0]))).collect();
        GridSignal::new(bps, values, comb(&u.tail, &v.tail))
    }

    /// `u(s + ·)`.
    pub fn shifted(&self, s: f64) -> Result<GridSignal> {
        if s < 0.0 {
            return Err(Error::NegativeTime(s));
        }
        if s >= self.horizon() {
            return GridSignal::new(vec![0.0, 1.0], vec![self.tail.clone()], self.tail.clone());
        }
        // Pieces are carried over by index; looking values up at `(b - s) + s`
        // can round below `b` and pick the previous piece.
        let k = self.breakpoints.partition_point(|b| *b <= s) - 1;
        let mut bps = vec![0.0];
        bps.extend(self.breakpoints[k + 1..].iter().map(|b| b - s));
        GridSignal::new(bps, self.values[k..].to_vec(), self.tail.clone())
    }

    /// Zero from `t` on.
    pub fn truncated(&self, t: f64) -> Result<GridSignal> {
        let pieces = self.pieces_until(t);
        if pieces.is_empty() {
            return GridSignal::zero(self.dim(), t.max(1.0));
        }
        let mut bps = vec![0.0];
        bps.extend(pieces.iter().map(|p| p.end));
        let values = pieces.iter().map(|p| p.value.to_vec()).collect();
        GridSignal::new(bps, values, vec![0.0; self.dim()])
    }
}

/// Analytic input families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SignalFamily {
    /// `u(t) = (1 + t)^{-θ}`, scalar.
    PowerDecay { theta: f64 },
    /// `(u(s))_n = 1` on `[1/(2n), 1/n]` for `n ≤ modes`, else 0.
    IntervalIndicatorPerMode { modes: usize },
    /// Scalar constant.
    Constant { value: f64 },
}

/// Analytic signal, zero after `horizon` (`None` means unbounded support).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSignal {
    #[serde(flatten)]
    pub family: SignalFamily,
    #[serde(default)]
    pub horizon: Option<f64>,
}

/// `θ = (1 + 1/p)/2`, the midpoint of `(1/p, 1)`.
pub fn default_power_decay_theta(p: Exponent) -> f64 {
    0.5 * (1.0 + p.reciprocal())
}

impl AnalyticSignal {
    pub fn power_decay(theta: f64, horizon: Option<f64>) -> Result<Self> {
        if !(theta > 0.0) {
            return Err(Error::InvalidArgument(format!("decay exponent θ = {theta} must be positive")));
        }
        Ok(AnalyticSignal { family: SignalFamily::PowerDecay { theta }, horizon })
    }

    pub fn indicator_per_mode(modes: usize, horizon: Option<f64>) -> Self {
        AnalyticSignal { family: SignalFamily::IntervalIndicatorPerMode { modes }, horizon }
    }

    pub fn constant(value: f64, horizon: Option<f64>) -> Self {
        AnalyticSignal { family: SignalFamily::Constant { value }, horizon }
    }

    pub fn support_end(&self) -> f64 {
        self.horizon.unwrap_or(f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        match self.family {
            SignalFamily::IntervalIndicatorPerMode { modes } => modes,
            _ => 1,
        }
    }

    pub fn value_at(&self, t: f64) -> Vec<f64> {
        if t >= self.support_end() || t < 0.0 {
            return vec![0.0; self.dim()];
        }
        match self.family {
            SignalFamily::PowerDecay { theta } => vec![(1.0 + t).powf(-theta)],
            SignalFamily::Constant { value } => vec![value],
            SignalFamily::IntervalIndicatorPerMode { modes } => (1..=modes)
                .map(|n| {
                    let nf = n as f64;
                    if t >= 1.0 / (2.0 * nf) && t < 1.0 / nf {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        }
    }

    fn indicator_breakpoints(modes: usize, end: f64) -> Vec<f64> {
        let mut bps = vec![0.0];
        for n in 1..=modes {
            let nf = n as f64;
            for b in [1.0 / (2.0 * nf), 1.0 / nf] {
                if b < end {
                    bps.push(b);
                }
            }
        }
        bps.push(end);
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        bps
    }

    /// `L^p([0, t], U)` norm. Power decay uses adaptive quadrature on
    /// dyadic intervals with an analytic tail for unbounded windows; the
    /// other families are integrated exactly.
    pub fn lp_norm(&self, p: Exponent, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let end = t.min(self.support_end());
        if end <= 0.0 {
            return Ok(0.0);
        }
        match self.family {
            SignalFamily::Constant { value } => Ok(if p.is_infinite() {
                value.abs()
            } else if value == 0.0 {
                0.0
            } else if end.is_infinite() {
                f64::INFINITY
            } else {
                value.abs() * end.powf(1.0 / p.value())
            }),
            SignalFamily::IntervalIndicatorPerMode { .. } => {
                if end.is_infinite() {
                    return self.exact_grid(1.0)?.lp_norm(p, 1.0);
                }
                self.exact_grid(end)?.lp_norm(p, end)
            }
            SignalFamily::PowerDecay { theta } => {
                if p.is_infinite() {
                    return Ok(1.0);
                }
                let e = theta * p.value();
                let f = |s: f64| (1.0 + s).powf(-e);
                let mut parts = Vec::new();
                let mut a = 0.0;
                let mut b: f64 = 1.0;
                let cutoff = if end.is_infinite() {
                    if e <= 1.0 {
                        return Ok(f64::INFINITY);
                    }
                    // Past this point the analytic tail is used.
                    1e6
                } else {
                    end
                };
                while a < cutoff {
                    let bb = b.min(cutoff);
                    parts.push(integrate(f, a, bb, 1e-13, 0.0, 200).value);
                    a = bb;
                    b = 2.0 * b + 1.0;
                }
                if end.is_infinite() {
                    parts.push((1.0 + cutoff).powf(1.0 - e) / (e - 1.0));
                }
                Ok(pairwise_sum(&parts).powf(1.0 / p.value()))
            }
        }
    }

    fn exact_grid(&self, end: f64) -> Result<GridSignal> {
        let SignalFamily::IntervalIndicatorPerMode { modes } = self.family else {
            unreachable!("exact grid only for the indicator family");
        };
        let bps = Self::indicator_breakpoints(modes, end);
        let values = bps.windows(2).map(|w| self.value_at(w[0])).collect();
        GridSignal::new(bps, values, vec![0.0; modes])
    }

    /// Midpoint-sampled piecewise-constant approximant on a `step` grid up
    /// to `horizon`. Constants become one piece; the indicator family is
    /// represented exactly on its own breakpoints.
    pub fn discretize(&self, step: f64, horizon: f64) -> Result<GridSignal> {
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("step {step} must be positive")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive and finite")));
        }
        let end = horizon.min(self.support_end());
        match self.family {
            SignalFamily::Constant { value } => GridSignal::constant(vec![value], end),
            SignalFamily::IntervalIndicatorPerMode { .. } => self.exact_grid(end),
            SignalFamily::PowerDecay { .. } => {
                let n = ((end / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let mut bps: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
                bps.push(end);
                self.sample_midpoints(bps)
            }
        }
    }

    /// Like [`discretize`](Self::discretize) but with piece widths
    /// `rel_width·(1 + t)`, suited to slowly decaying inputs on long windows.
    pub fn discretize_graded(&self, rel_width: f64, horizon: f64) -> Result<GridSignal> {
        if !(rel_width > 0.0) {
            return Err(Error::InvalidArgument(format!("relative width {rel_width} must be positive")));
        }
        match self.family {
            SignalFamily::PowerDecay { .. } => {
                let end = horizon.min(self.support_end());
                let mut bps = vec![0.0];
                let mut t: f64 = 0.0;
                while t < end {
                    t = (t + rel_width * (1.0 + t)).min(end);
                    if end - t < 0.5 * rel_width * (1.0 + t) {
                        t = end;
                    }
                    bps.push(t);
                }
                self.sample_midpoints(bps)
            }
            _ => self.discretize(rel_width, horizon),
        }
    }

    fn sample_midpoints(&self, bps: Vec<f64>) -> Result<GridSignal> {
        let values = bps.windows(2).map(|w| self.value_at(0.5 * (w[0] + w[1]))).collect();
        let dim = self.dim();
        GridSignal::new(bps, values, vec![0.0; dim])
    }
}

/// Window and shape of a random probe family.
#[derive(Debug, Clone, Copy)]
pub struct ProbeShape {
    pub horizon: f64,
    pub input_dim: usize,
    pub pieces: usize,
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if l2_norm(&v) > 1e-3 {
            return v;
        }
    }
}

/// Deterministic family of probe inputs on `[0, horizon]`, each normalized
/// to unit `L^p` norm. Members cycle through random sign patterns,
/// single-interval bumps and chirps on geometric breakpoints.
pub fn random_probe_family(seed: u64, count: usize, shape: ProbeShape, p: Exponent) -> Result<Vec<GridSignal>> {
    if count == 0 {
        return Err(Error::InvalidArgument("probe count must be at least 1".into()));
    }
    if !(shape.horizon > 0.0) || shape.input_dim == 0 || shape.pieces == 0 {
        return Err(Error::InvalidArgument("probe shape needs positive horizon, dimension and pieces".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, d, k) = (shape.horizon, shape.input_dim, shape.pieces);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let signal = match i % 3 {
            0 => {
                let bps: Vec<f64> = (0..=k).map(|j| h * j as f64 / k as f64).collect();
                let values = (0..k)
                    .map(|_| {
                        let amp = rng.random_range(0.25..1.0);
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        if d == 1 {
                            vec![sign * amp]
                        } else {
                            random_direction(&mut rng, d).into_iter().map(|v| v * amp).collect()
                        }
                    })
                    .collect();
                GridSignal::new(bps, values, vec![0.0; d])?
            }
            1 => {
                let width = h * 2f64.powf(-rng.random_range(0.0..8.0));
                let start = rng.random_range(0.0..(h - width).max(0.0) + f64::MIN_POSITIVE);
                let dir = if d == 1 { vec![1.0] } else { random_direction(&mut rng, d) };
                let mut bps = vec![0.0];
                let mut values = Vec::new();
                if start > 0.0 {
                    bps.push(start);
                    values.push(vec![0.0; d]);
                }
                bps.push((start + width).min(h));
                values.push(dir);
                if *bps.last().unwrap() < h {
                    bps.push(h);
                    values.push(vec![0.0; d]);
                }
                GridSignal::new(bps, values, vec![0.0; d])?
            }
            _ => {
                let ratio = rng.random_range(0.3..0.8);
                let mut bps = vec![h];
                while bps.len() < k && bps.last().unwrap() * ratio > h * 1e-6 {
                    let next = bps.last().unwrap() * ratio;
                    bps.push(next);
                }
                bps.push(0.0);
                bps.reverse();
                let dir = if d == 1 { vec![1.0] } else { random_direction(&mut rng, d) };
                let values = (0..bps.len() - 1)
                    .map(|j| {
                        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                        dir.iter().map(|v| s * v).collect()
                    })
                    .collect();
                GridSignal::new(bps, values, vec![0.0; d])?
            }
        };
        let norm = signal.lp_norm(p, h)?;
        out.push(signal.scaled(1.0 / norm));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_l2_norm() {
        let u = GridSignal::constant(vec![1.0], 3.0).unwrap();
        assert!((u.lp_norm(Exponent::TWO, 3.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        let z = GridSignal::zero(2, 3.0).unwrap();
        assert_eq!(z.lp_norm(Exponent::TWO, 3.0).unwrap(), 0.0);
        assert_eq!(z.lp_norm(Exponent::INFINITY, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn grid_norm_is_exact_piece_sum() {
        let u = GridSignal::scalar(vec![0.0, 0.5, 2.0], vec![2.0, -1.0]).unwrap();
        let p = Exponent::new(3.0).unwrap();
        let exact = (8.0 * 0.5 + 1.0 * 1.5f64).powf(1.0 / 3.0);
        assert_eq!(u.lp_norm(p, 2.0).unwrap(), exact);
        assert_eq!(u.lp_norm(Exponent::INFINITY, 2.0).unwrap(), 2.0);
        // Partial window and zero tail.
        assert!((u.lp_norm(Exponent::ONE, 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(u.lp_norm(Exponent::ONE, 10.0).unwrap(), 2.5);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(GridSignal::scalar(vec![0.0, 1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(GridSignal::scalar(vec![0.5, 1.0], vec![1.0]).is_err());
        assert!(GridSignal::new(vec![0.0, 1.0], vec![vec![1.0]], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn power_decay_infinite_l2() {
        let u = AnalyticSignal::power_decay(0.6, None).unwrap();
        let v = u.lp_norm(Exponent::TWO, f64::INFINITY).unwrap();
        assert!((v - 5f64.sqrt()).abs() < 1e-9 * 5f64.sqrt());
        assert!(u.lp_norm(Exponent::ONE, f64::INFINITY).unwrap().is_infinite());
    }

    #[test]
    fn power_decay_l1_on_window() {
        let u = AnalyticSignal::power_decay(0.75, None).unwrap();
        for t in [1e2f64, 1e3, 1e4] {
            let exact = ((1.0 + t).powf(0.25) - 1.0) / 0.25;
            let v = u.lp_norm(Exponent::ONE, t).unwrap();
            assert!((v - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn discretize_examples() {
        let c = AnalyticSignal::constant(2.5, None).discretize(0.1, 4.0).unwrap();
        assert_eq!(c.values().len(), 1);
        assert_eq!(c.values()[0], vec![2.5]);

        let u = AnalyticSignal::power_decay(0.6, None).unwrap();
        let g = u.discretize(0.1, 1.0).unwrap();
        assert_eq!(g.values().len(), 10);
        for (k, v) in g.values().iter().enumerate() {
            let mid = 0.5 * (g.breakpoints()[k] + g.breakpoints()[k + 1]);
            assert_eq!(v[0], (1.0 + mid).powf(-0.6));
        }

        let ind = AnalyticSignal::indicator_per_mode(4, None).discretize(0.1, 1.0).unwrap();
        let expected = [0.0, 1.0 / 8.0, 1.0 / 6.0, 1.0 / 4.0, 1.0 / 3.0, 1.0 / 2.0, 1.0];
        assert_eq!(ind.breakpoints(), &expected);
        // On [1/4, 1/3) only mode 3 (support [1/6, 1/3]) and mode 2 ([1/4, 1/2]) are active.
        assert_eq!(ind.values()[3], vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn discretization_error_decreases() {
        let u = AnalyticSignal::power_decay(0.6, None).unwrap();
        let fine = u.discretize(1e-4, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for step in [0.1, 0.05, 0.025, 0.0125] {
            let g = u.discretize(step, 1.0).unwrap();
            let err = GridSignal::linear_combination(1.0, &g, -1.0, &fine)
                .unwrap()
                .lp_norm(Exponent::TWO, 1.0)
                .unwrap();
            assert!(err < 0.6 * prev);
            prev = err;
        }
    }

    #[test]
    fn probe_family_is_deterministic_and_normalized() {
        let shape = ProbeShape { horizon: 2.0, input_dim: 3, pieces: 16 };
        for p in [Exponent::ONE, Exponent::TWO, Exponent::INFINITY] {
            let a = random_probe_family(7, 12, shape, p).unwrap();
            let b = random_probe_family(7, 12, shape, p).unwrap();
            assert_eq!(a, b);
            for u in &a {
                assert!((u.lp_norm(p, 2.0).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_bump_closed_form() {
        let w: f64 = 0.3;
        let u = GridSignal::scalar(vec![0.0, w, 1.0], vec![1.0 / w.sqrt(), 0.0]).unwrap();
        assert!((u.lp_norm(Exponent::TWO, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let u = GridSignal::scalar(vec![0.0, 1.0, 2.0], vec![1.0, -2.0]).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"breakpoints":[0.0,1.0,2.0],"values":[1.0,-2.0]}"#);
        assert_eq!(serde_json::from_str::<GridSignal>(&s).unwrap(), u);
        let a = AnalyticSignal::power_decay(0.75, Some(10.0)).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<AnalyticSignal>(&s).unwrap(), a);
        assert!(serde_json::from_str::<GridSignal>(r#"{"breakpoints":[0,1],"values":[]}"#).is_err());
    }

    #[test]
    fn shift_and_combination() {
        let u = GridSignal::scalar(vec![0.0, 1.0, 3.0], vec![1.0, 2.0]).unwrap();
        let s = u.shifted(0.5).unwrap();
        assert_eq!(s.breakpoints(), &[0.0, 0.5, 2.5]);
        assert_eq!(s.value_at(1.0), &[2.0]);
        let z = GridSignal::linear_combination(1.0, &u, -1.0, &u).unwrap();
        assert_eq!(z.lp_norm(Exponent::ONE, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn shift_keeps_pieces_when_offsets_round() {
        // (b - s) + s rounds below b here.
        let (b, s) = (0.9476412030040481, 0.4314625562705721);
        assert!((b - s) + s < b);
        let u = GridSignal::scalar(vec![0.0, b, 1.8476781664241697], vec![0.0, -1.0]).unwrap();
        let v = u.shifted(s).unwrap();
        assert_eq!(v.values(), &[vec![0.0], vec![-1.0]]);
        assert_eq!(v.value_at(b - s), &[-1.0]);
    }
}
