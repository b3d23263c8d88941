//! Convergence-controlled level solving and the choice of basis frequency.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rug::{Float, Rational};

use crate::eigensolve::{eigenpairs_lowest, EigenPair};
use crate::error::{Error, Result};
use crate::numerics::{exact_decimal, format_fixed, make_context, rational_to_f64, PrecisionContext};
use crate::operator::{assemble_hamiltonian, BasisSpec, ModelParams, Parity};

pub const DEFAULT_N_START: usize = 8;
pub const DEFAULT_N_MAX: usize = 2000;
/// Largest order at which the optimize policy searches for ω₀.
pub const OPTIMIZE_ORDER_CAP: usize = 12;
/// Width of the final golden-section bracket.
pub const OPTIMIZE_TOLERANCE: f64 = 0.05;
/// Consecutive tested orders that must agree before a level is converged.
const STABLE_ROWS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub enum Omega0Policy {
    Fixed(f64),
    Formula,
    Optimize,
}

#[derive(Clone, Debug)]
pub struct SolveRequest {
    pub params: ModelParams,
    /// Global level indices; the parity sector is `n mod 2`.
    pub levels: Vec<usize>,
    /// Decimal places the energies must be stable to.
    pub target_digits: u32,
    pub omega0_policy: Omega0Policy,
    pub n_start: usize,
    pub n_max: usize,
}

impl SolveRequest {
    pub fn new(params: ModelParams, levels: Vec<usize>, target_digits: u32) -> Self {
        Self {
            params,
            levels,
            target_digits,
            omega0_policy: Omega0Policy::Optimize,
            n_start: DEFAULT_N_START,
            n_max: DEFAULT_N_MAX,
        }
    }

    pub fn with_policy(mut self, policy: Omega0Policy) -> Self {
        self.omega0_policy = policy;
        self
    }

    pub fn with_n_start(mut self, n_start: usize) -> Self {
        self.n_start = n_start;
        self
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    fn highest_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    /// First order tested: the sector must hold the requested levels with
    /// some room to spare.
    pub fn effective_n_start(&self) -> usize {
        self.n_start.max(self.highest_level() / 2 + 2)
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidRequest("no levels requested".into()));
        }
        if self.target_digits == 0 {
            return Err(Error::ZeroPrecision);
        }
        if self.n_max < self.effective_n_start() {
            return Err(Error::InvalidRequest(format!(
                "n_max = {} is below the starting order {}",
                self.n_max,
                self.effective_n_start()
            )));
        }
        if let Omega0Policy::Fixed(w) = self.omega0_policy {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositive { name: "basis frequency ω₀", value: w.to_string() });
            }
        }
        Ok(())
    }
}

/// Energies of the requested levels at one truncation order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub order: usize,
    pub energies: Vec<Float>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// One pair per requested level, in request order; `level` is global.
    pub pairs: Vec<EigenPair>,
    pub final_order: usize,
    pub omega0: f64,
    /// Every tested order, ascending.
    pub history: Vec<ConvergenceRow>,
}

impl Solution {
    pub fn energies(&self) -> Vec<&Float> {
        self.pairs.iter().map(|p| &p.value).collect()
    }

    pub fn basis_for(&self, level: usize) -> Result<BasisSpec> {
        BasisSpec::new(self.omega0, Parity::of_level(level), self.final_order)
    }
}

/// Parameters `a, b, c, α` of `ω₀(λ) = a + bμ + cμ^α` with `μ = ln λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Omega0Model {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
}

impl Default for Omega0Model {
    fn default() -> Self {
        Self::PUBLISHED
    }
}

impl Omega0Model {
    pub const PUBLISHED: Omega0Model = Omega0Model {
        a: 3.47542,
        b: 1.92476,
        c: 2.25163e-7,
        alpha: 8.48258,
    };

    /// Model value at `μ = ln λ`; below `λ = 1` the power term is dropped
    /// and the result is held at or above 1.
    pub fn eval_mu(&self, mu: f64) -> f64 {
        if mu >= 0.0 {
            self.a + self.b * mu + self.c * mu.powf(self.alpha)
        } else {
            (self.a + self.b * mu).max(1.0)
        }
    }

    pub fn sse(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(lambda, w)| (self.eval_mu(lambda.ln()) - w).powi(2))
            .sum()
    }

    pub fn max_abs_error(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(lambda, w)| (self.eval_mu(lambda.ln()) - w).abs())
            .fold(0.0, f64::max)
    }
}

/// Basis frequency predicted for `ω = 1`.
pub fn predict_omega0(lambda: f64, model: &Omega0Model) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NonPositive { name: "coupling λ", value: lambda.to_string() });
    }
    Ok(model.eval_mu(lambda.ln()))
}

/// Prediction for arbitrary ω, using that the spectrum in units of ω depends
/// only on `λ/ω³`. The harmonic case returns ω itself.
pub fn predict_omega0_for(params: &ModelParams, model: &Omega0Model) -> Result<f64> {
    let omega = rational_to_f64(params.omega());
    if params.is_harmonic() {
        return Ok(omega);
    }
    Ok(omega * predict_omega0(rational_to_f64(&params.reduced_coupling()), model)?)
}

/// Eigenpairs of the requested global levels at truncation `order`.
pub fn solve_at_order(
    params: &ModelParams,
    omega0: &Rational,
    order: usize,
    levels: &[usize],
    ctx: &PrecisionContext,
) -> Result<Vec<EigenPair>> {
    let mut by_parity: Vec<(Parity, Vec<EigenPair>)> = Vec::new();
    for parity in [Parity::Even, Parity::Odd] {
        let needed = levels
            .iter()
            .filter(|&&n| Parity::of_level(n) == parity)
            .map(|&n| Parity::sector_index(n) + 1)
            .max();
        let Some(k) = needed else { continue };
        let basis = BasisSpec::from_rational(omega0.clone(), parity, order)?;
        if k > basis.dim() {
            return Err(Error::LevelOutOfRange { requested: k, dim: basis.dim() });
        }
        let h = assemble_hamiltonian(params, &basis, ctx)?;
        by_parity.push((parity, eigenpairs_lowest(&h, k, ctx)?));
    }
    Ok(levels
        .iter()
        .map(|&n| {
            let (_, pairs) = by_parity
                .iter()
                .find(|(p, _)| *p == Parity::of_level(n))
                .expect("sector solved above");
            let mut pair = pairs[Parity::sector_index(n)].clone();
            pair.level = n;
            pair
        })
        .collect())
}

/// Energy of one level at a given order and ω₀, at the precision of `ctx`.
pub fn level_energy(
    params: &ModelParams,
    omega0: f64,
    order: usize,
    level: usize,
    ctx: &PrecisionContext,
) -> Result<Float> {
    let omega0 = exact_decimal(omega0)?;
    let mut pairs = solve_at_order(params, &omega0, order, &[level], ctx)?;
    Ok(pairs.remove(0).value)
}

/// One row per order, each computed from scratch at exactly that truncation.
pub fn convergence_table(
    params: &ModelParams,
    omega0: f64,
    orders: &[usize],
    level: usize,
    ctx: &PrecisionContext,
) -> Result<Vec<ConvergenceRow>> {
    if orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidRequest("orders must be strictly increasing".into()));
    }
    let omega0 = exact_decimal(omega0)?;
    orders
        .par_iter()
        .map(|&order| {
            let pairs = solve_at_order(params, &omega0, order, &[level], ctx)?;
            Ok(ConvergenceRow {
                order,
                energies: pairs.into_iter().map(|p| p.value).collect(),
            })
        })
        .collect()
}

/// Golden-section minimization of the truncated level energy over ω₀.
///
/// Returns the best ω₀ evaluated, endpoints included, and its energy.
pub fn optimize_omega0(
    params: &ModelParams,
    order: usize,
    level: usize,
    ctx: &PrecisionContext,
) -> Result<(f64, Float)> {
    if order < level / 2 + 2 {
        return Err(Error::InvalidRequest(format!(
            "order {order} is too small to optimize level {level}"
        )));
    }
    let omega = rational_to_f64(params.omega());
    let reduced = if params.is_harmonic() {
        1.0
    } else {
        predict_omega0(rational_to_f64(&params.reduced_coupling()), &Omega0Model::PUBLISHED)?
    };
    let mut lo = omega.max(0.5);
    let mut hi = omega * (3.0 * reduced + 10.0);
    let tol = OPTIMIZE_TOLERANCE;

    let energy = |w: f64| level_energy(params, w, order, level, ctx);
    let mut best = (lo, energy(lo)?);
    let consider = |w: f64, e: &Float, best: &mut (f64, Float)| {
        if *e < best.1 {
            *best = (w, e.clone());
        }
    };
    let e_hi = energy(hi)?;
    consider(hi, &e_hi, &mut best);

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut e1 = energy(x1)?;
    let mut e2 = energy(x2)?;
    consider(x1, &e1, &mut best);
    consider(x2, &e2, &mut best);
    while hi - lo > tol {
        if e1 <= e2 {
            hi = x2;
            x2 = x1;
            e2 = e1;
            x1 = hi - ratio * (hi - lo);
            e1 = energy(x1)?;
            consider(x1, &e1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            e1 = e2;
            x2 = lo + ratio * (hi - lo);
            e2 = energy(x2)?;
            consider(x2, &e2, &mut best);
        }
    }
    Ok(best)
}

fn resolve_omega0(request: &SolveRequest, ctx: &PrecisionContext) -> Result<f64> {
    match request.omega0_policy {
        Omega0Policy::Fixed(w) => Ok(w),
        Omega0Policy::Formula => predict_omega0_for(&request.params, &Omega0Model::PUBLISHED),
        Omega0Policy::Optimize => {
            let level = request.highest_level();
            let order = request.n_start.min(OPTIMIZE_ORDER_CAP).max(level / 2 + 2);
            // the search only ranks trial bases; 8 digits are plenty
            let coarse = make_context(ctx.target_digits().min(8))?;
            Ok(optimize_omega0(&request.params, order, level, &coarse)?.0)
        }
    }
}

/// Orders tried after `prev`: grow by a quarter, rounded up, at least by one.
pub fn next_order(prev: usize) -> usize {
    (prev + 1).max((prev * 5).div_ceil(4))
}

/// Solves for the requested levels, raising the order until every energy
/// rounds to the same `target_digits` decimals at three consecutive orders.
///
/// The reported order is the first of those three, and the eigenpairs are
/// the ones computed there.
pub fn solve_levels(request: &SolveRequest) -> Result<Solution> {
    request.validate()?;
    let ctx = make_context(request.target_digits)?;
    let omega0 = resolve_omega0(request, &ctx)?;
    let omega0_exact = exact_decimal(omega0)?;
    let decimals = request.target_digits;

    let mut history: Vec<ConvergenceRow> = Vec::new();
    let mut recent: Vec<(Vec<String>, Vec<EigenPair>)> = Vec::new();
    let mut order = request.effective_n_start();
    loop {
        let pairs = solve_at_order(&request.params, &omega0_exact, order, &request.levels, &ctx)?;
        let rounded: Vec<String> = pairs.iter().map(|p| format_fixed(&p.value, decimals)).collect();
        history.push(ConvergenceRow {
            order,
            energies: pairs.iter().map(|p| p.value.clone()).collect(),
        });
        recent.push((rounded, pairs));
        if recent.len() > STABLE_ROWS {
            recent.remove(0);
        }
        if recent.len() == STABLE_ROWS && recent.iter().all(|(r, _)| *r == recent[0].0) {
            let first = history.len() - STABLE_ROWS;
            return Ok(Solution {
                pairs: recent.swap_remove(0).1,
                final_order: history[first].order,
                omega0,
                history,
            });
        }
        if order >= request.n_max {
            let tail = history.len().saturating_sub(2);
            return Err(Error::NotConverged {
                digits: request.target_digits,
                n_max: request.n_max,
                last_rows: history.split_off(tail),
            });
        }
        order = next_order(order).min(request.n_max);
    }
}

/// Least-squares fit of the ω₀(λ) model: exhaustive search over α on
/// `[1, 12]` in steps of 0.005, linear least squares for `a, b, c`.
pub fn fit_omega0_model(points: &[(f64, f64)]) -> Result<Omega0Model> {
    if points.len() < 5 {
        return Err(Error::InvalidFit(format!("need at least 5 points, got {}", points.len())));
    }
    if let Some(&(lambda, _)) = points.iter().find(|(l, w)| l.is_nan() || *l < 1.0 || !w.is_finite()) {
        return Err(Error::InvalidFit(format!("λ = {lambda} is outside λ ≥ 1")));
    }
    let mus: Vec<f64> = points.iter().map(|(l, _)| l.ln()).collect();
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|&(_, w)| w));

    let mut best: Option<(f64, Omega0Model)> = None;
    for step in 0..=2200 {
        let alpha = 1.0 + 0.005 * f64::from(step);
        let Some(model) = linear_fit(&mus, &rhs, alpha) else { continue };
        let sse = model.sse(points);
        if best.as_ref().is_none_or(|(s, _)| sse < *s) {
            best = Some((sse, model));
        }
    }
    best.map(|(_, m)| m)
        .ok_or_else(|| Error::InvalidFit("design matrix is singular for every α".into()))
}

fn linear_fit(mus: &[f64], rhs: &DVector<f64>, alpha: f64) -> Option<Omega0Model> {
    let columns: [Vec<f64>; 3] = [
        vec![1.0; mus.len()],
        mus.to_vec(),
        mus.iter().map(|m| m.powf(alpha)).collect(),
    ];
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
        .collect();
    if scales.contains(&0.0) {
        return None;
    }
    let design = DMatrix::from_fn(mus.len(), 3, |i, j| columns[j][i] / scales[j]);
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let largest = sv.max();
    if sv.min() <= largest * 1e-12 {
        return None;
    }
    let x = svd.solve(rhs, 0.0).ok()?;
    Some(Omega0Model {
        a: x[0] / scales[0],
        b: x[1] / scales[1],
        c: x[2] / scales[2],
        alpha,
    })
}
