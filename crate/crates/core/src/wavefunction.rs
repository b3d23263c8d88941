//! Coordinate-space oscillator functions and reconstructed eigenfunctions.

use rayon::prelude::*;
use rug::float::Constant;
use rug::{Assign, Float, Rational};

use crate::eigensolve::EigenPair;
use crate::error::{Error, Result};
use crate::numerics::{exact_decimal, pow10, rational_to_f64, PrecisionContext};
use crate::operator::{BasisSpec, ModelParams};

/// Bits added to the working precision for recurrences and sums, which
/// cancel heavily where ψ is small.
const EXTRA_BITS: u32 = 64;

/// An eigenfunction as its sector coefficients in a given basis.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    basis: BasisSpec,
    coefficients: Vec<Float>,
    energy: Float,
    level: usize,
}

impl WaveFunction {
    pub fn new(basis: BasisSpec, coefficients: Vec<Float>, energy: Float, level: usize) -> Result<Self> {
        if coefficients.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: coefficients.len(),
            });
        }
        Ok(Self { basis, coefficients, energy, level })
    }

    pub fn from_pair(basis: BasisSpec, pair: &EigenPair) -> Result<Self> {
        Self::new(basis, pair.vector.clone(), pair.value.clone(), pair.level)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn coefficients(&self) -> &[Float] {
        &self.coefficients
    }

    pub fn energy(&self) -> &Float {
        &self.energy
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// A copy with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let coefficients = self
            .coefficients
            .iter()
            .map(|c| Float::with_val(c.prec(), c * factor))
            .collect();
        Self { coefficients, ..self.clone() }
    }

    fn max_index(&self) -> usize {
        self.basis.parity().basis_index(self.basis.order())
    }
}

/// Coefficients of the normalized three-term recurrence, precomputed up to
/// a maximal index.
struct Recurrence {
    prec: u32,
    /// `√(2/(k+1))`
    up: Vec<Float>,
    /// `√(k/(k+1))`
    back: Vec<Float>,
    /// `(ω₀/π)^(1/4)`
    prefactor: Float,
    sqrt_omega0: Float,
}

impl Recurrence {
    fn new(max_n: usize, omega0: &Rational, prec: u32) -> Self {
        let up = (0..max_n)
            .map(|k| Float::with_val(prec, Rational::from((2u64, k as u64 + 1))).sqrt())
            .collect();
        let back = (0..max_n)
            .map(|k| Float::with_val(prec, Rational::from((k as u64, k as u64 + 1))).sqrt())
            .collect();
        let pi = Float::with_val(prec, Constant::Pi);
        let w = Float::with_val(prec, omega0);
        let prefactor = Float::with_val(prec, &w / &pi).sqrt().sqrt();
        Self { prec, up, back, prefactor, sqrt_omega0: w.sqrt() }
    }

    /// `φ_0(x), ..., φ_max(x)`.
    fn values(&self, x: &Float) -> Vec<Float> {
        let prec = self.prec;
        let xi = Float::with_val(prec, &self.sqrt_omega0 * x);
        let half_sq = Float::with_val(prec, xi.square_ref()) / 2u32;
        let mut out = Vec::with_capacity(self.up.len() + 1);
        out.push(Float::with_val(prec, -half_sq).exp() * &self.prefactor);
        let mut tmp = Float::new(prec);
        for k in 0..self.up.len() {
            let mut next = Float::with_val(prec, &self.up[k] * &xi);
            next *= &out[k];
            if k > 0 {
                tmp.assign(&self.back[k] * &out[k - 1]);
                next -= &tmp;
            }
            out.push(next);
        }
        out
    }
}

/// Normalized oscillator function `φ_n(ω₀; x)`.
pub fn basis_function(n: usize, omega0: f64, x: f64, ctx: &PrecisionContext) -> Result<Float> {
    let omega0 = exact_decimal(omega0)?;
    if omega0 <= 0 {
        return Err(Error::NonPositive { name: "basis frequency ω₀", value: omega0.to_f64().to_string() });
    }
    let x = Float::with_val(ctx.bits() + EXTRA_BITS, exact_decimal(x)?);
    let rec = Recurrence::new(n, &omega0, ctx.bits() + EXTRA_BITS);
    let mut values = rec.values(&x);
    Ok(Float::with_val(ctx.bits(), values.swap_remove(n)))
}

/// Evaluator that reuses the recurrence tables across many points.
struct Evaluator<'a> {
    wf: &'a WaveFunction,
    rec: Recurrence,
}

impl<'a> Evaluator<'a> {
    fn new(wf: &'a WaveFunction, ctx: &PrecisionContext) -> Self {
        let rec = Recurrence::new(wf.max_index(), wf.basis.omega0(), ctx.bits() + EXTRA_BITS);
        Self { wf, rec }
    }

    fn at(&self, x: &Float) -> Float {
        let phi = self.rec.values(x);
        let mut sum = Float::new(self.rec.prec);
        for (j, c) in self.wf.coefficients.iter().enumerate() {
            let m = self.wf.basis.parity().basis_index(j);
            sum += Float::with_val(self.rec.prec, c * &phi[m]);
        }
        sum
    }
}

/// `ψ(x) = Σ_j c_j φ_{m(j)}(ω₀; x)`.
pub fn evaluate(wf: &WaveFunction, x: f64, ctx: &PrecisionContext) -> Result<Float> {
    let x = Float::with_val(ctx.bits() + EXTRA_BITS, exact_decimal(x)?);
    Ok(Float::with_val(ctx.bits(), Evaluator::new(wf, ctx).at(&x)))
}

/// Inclusive, evenly spaced sample points; endpoints and step are taken as
/// the decimals they print as, so `-5:5:0.01` yields exactly 1001 points.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    x_min: Rational,
    step: Rational,
    count: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, step: f64) -> Result<Self> {
        Self::from_rationals(exact_decimal(x_min)?, exact_decimal(x_max)?, exact_decimal(step)?)
    }

    pub fn from_rationals(x_min: Rational, x_max: Rational, step: Rational) -> Result<Self> {
        if x_min > x_max {
            return Err(Error::InvalidGrid(format!(
                "x_min = {} exceeds x_max = {}",
                rational_to_f64(&x_min),
                rational_to_f64(&x_max)
            )));
        }
        if step <= 0 {
            return Err(Error::InvalidGrid(format!("step must be positive, got {}", rational_to_f64(&step))));
        }
        let span = Rational::from(&x_max - &x_min) / &step;
        let (_, intervals) = span.fract_floor(rug::Integer::new());
        let count = intervals
            .to_usize()
            .and_then(|n| n.checked_add(1))
            .filter(|&n| n <= 100_000_000)
            .ok_or_else(|| Error::InvalidGrid("too many points".into()))?;
        Ok(Self { x_min, step, count })
    }

    pub fn single(x: f64) -> Result<Self> {
        Self::new(x, x, 1.0)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn point(&self, i: usize) -> Rational {
        Rational::from(&self.step * rug::Integer::from(i)) + &self.x_min
    }

    pub fn points(&self) -> Vec<Rational> {
        (0..self.count).map(|i| self.point(i)).collect()
    }
}

/// `(x, ψ(x))` over the grid, in grid order.
pub fn sample(wf: &WaveFunction, grid: &Grid, ctx: &PrecisionContext) -> Vec<(f64, Float)> {
    let eval = Evaluator::new(wf, ctx);
    let prec = ctx.bits() + EXTRA_BITS;
    grid.points()
        .par_iter()
        .map(|x| {
            let psi = eval.at(&Float::with_val(prec, x));
            (rational_to_f64(x), Float::with_val(ctx.bits(), psi))
        })
        .collect()
}

/// `∫ψ²` by the composite trapezoid rule on `[−L, L]`.
///
/// `L` starts at `12/√ω₀` and doubles until `|ψ(±L)| < 10^(−target)`; the
/// step is halved until successive estimates agree to `target` digits.
pub fn norm_check(wf: &WaveFunction, ctx: &PrecisionContext) -> Float {
    let eval = Evaluator::new(wf, ctx);
    let prec = ctx.bits() + EXTRA_BITS;
    let tail = pow10(prec, -(ctx.target_digits() as i32));
    let length_unit = Float::with_val(prec, wf.basis.omega0()).sqrt().recip();
    let mut half_width = Float::with_val(prec, &length_unit * 12u32);
    for _ in 0..64 {
        let right = eval.at(&half_width);
        let left = eval.at(&Float::with_val(prec, -&half_width));
        if *right.as_abs() < tail && *left.as_abs() < tail {
            break;
        }
        half_width *= 2u32;
    }

    let square_at = |x: &Float| Float::with_val(prec, eval.at(x).square_ref());
    let lo = Float::with_val(prec, -&half_width);
    let width = Float::with_val(prec, &half_width * 2u32);
    let mut intervals: u32 = 64;
    let mut sum = Float::with_val(prec, square_at(&lo) + square_at(&half_width)) / 2u32;
    sum += interior_sum(&square_at, &lo, &width, intervals, 1, prec);
    let mut estimate = Float::with_val(prec, &sum * &width) / intervals;
    let tolerance = Float::with_val(prec, &tail);
    for _ in 0..20 {
        // only the new midpoints are evaluated
        sum += interior_sum(&square_at, &lo, &width, intervals * 2, 2, prec);
        intervals *= 2;
        let next = Float::with_val(prec, &sum * &width) / intervals;
        let diff = Float::with_val(prec, &next - &estimate).abs();
        let scale = Float::with_val(prec, next.as_abs().clone()).max(&Float::with_val(prec, 1));
        estimate = next;
        if diff <= Float::with_val(prec, &tolerance * &scale) {
            break;
        }
    }
    Float::with_val(ctx.bits(), estimate)
}

/// `Σ f(lo + i·width/n)` over interior `i = 1, 1 + stride, ...`: every
/// interior point for stride 1, the odd ones for stride 2.
fn interior_sum<F>(f: &F, lo: &Float, width: &Float, n: u32, stride: u32, prec: u32) -> Float
where
    F: Fn(&Float) -> Float + Sync,
{
    let terms: Vec<Float> = (1..n)
        .step_by(stride as usize)
        .collect::<Vec<u32>>()
        .par_iter()
        .map(|&i| {
            let x = Float::with_val(prec, width * i) / n + lo;
            f(&x)
        })
        .collect();
    let mut sum = Float::new(prec);
    for t in &terms {
        sum += t;
    }
    sum
}

/// The two parts of the potential in the ω₀ basis picture, sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSeries {
    pub x: Vec<f64>,
    /// `ω₀²x²/2`
    pub harmonic: Vec<f64>,
    /// `λx⁴`
    pub perturbation: Vec<f64>,
}

pub fn sample_potential(params: &ModelParams, omega0: f64, grid: &Grid) -> Result<PotentialSeries> {
    let w = exact_decimal(omega0)?;
    if w <= 0 {
        return Err(Error::NonPositive { name: "basis frequency ω₀", value: omega0.to_string() });
    }
    let half_w2 = Rational::from(w.square_ref()) / 2u32;
    let mut series = PotentialSeries {
        x: Vec::with_capacity(grid.len()),
        harmonic: Vec::with_capacity(grid.len()),
        perturbation: Vec::with_capacity(grid.len()),
    };
    for x in grid.points() {
        let x2 = Rational::from(x.square_ref());
        let x4 = Rational::from(x2.square_ref());
        series.harmonic.push(rational_to_f64(&Rational::from(&half_w2 * &x2)));
        series.perturbation.push(rational_to_f64(&Rational::from(params.lambda() * &x4)));
        series.x.push(rational_to_f64(&x));
    }
    Ok(series)
}
