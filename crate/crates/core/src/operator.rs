//! Coordinate-power matrix elements and the parity-reduced Hamiltonian in a
//! harmonic-oscillator basis of arbitrary frequency.

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::{exact_decimal, parse_decimal, rational_to_f64, PrecisionContext};

/// The physical problem `H = (p² + ω²x²)/2 + λx⁴` with `ħ = m = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    omega: Rational,
    lambda: Rational,
}

impl ModelParams {
    /// Doubles are read as the decimal they print as, so `0.01` is exact.
    pub fn new(omega: f64, lambda: f64) -> Result<Self> {
        Self::from_rationals(exact_decimal(omega)?, exact_decimal(lambda)?)
    }

    pub fn from_decimal(omega: &str, lambda: &str) -> Result<Self> {
        Self::from_rationals(parse_decimal(omega)?, parse_decimal(lambda)?)
    }

    pub fn from_rationals(omega: Rational, lambda: Rational) -> Result<Self> {
        if omega <= 0 {
            return Err(Error::NonPositive {
                name: "oscillator frequency ω",
                value: rational_to_f64(&omega).to_string(),
            });
        }
        if lambda < 0 {
            return Err(Error::NegativeCoupling(rational_to_f64(&lambda).to_string()));
        }
        Ok(Self { omega, lambda })
    }

    pub fn omega(&self) -> &Rational {
        &self.omega
    }

    pub fn lambda(&self) -> &Rational {
        &self.lambda
    }

    /// Dimensionless coupling `λ/ω³`; the spectrum in units of ω depends on
    /// nothing else.
    pub fn reduced_coupling(&self) -> Rational {
        let omega3 = Rational::from(&self.omega * &self.omega) * &self.omega;
        Rational::from(&self.lambda / &omega3)
    }

    pub fn is_harmonic(&self) -> bool {
        self.lambda == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_level(level: usize) -> Self {
        if level.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Full-basis index of the `j`-th function in this sector.
    pub fn basis_index(self, j: usize) -> usize {
        match self {
            Parity::Even => 2 * j,
            Parity::Odd => 2 * j + 1,
        }
    }

    /// Position of a global level within its parity sector.
    pub fn sector_index(level: usize) -> usize {
        level / 2
    }

    pub fn sign(self) -> i32 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }
}

/// Expansion basis: oscillator functions of frequency `omega0` of one
/// parity, sector indices `0..=order`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSpec {
    omega0: Rational,
    parity: Parity,
    order: usize,
}

impl BasisSpec {
    pub fn new(omega0: f64, parity: Parity, order: usize) -> Result<Self> {
        Self::from_rational(exact_decimal(omega0)?, parity, order)
    }

    pub fn from_rational(omega0: Rational, parity: Parity, order: usize) -> Result<Self> {
        if omega0 <= 0 {
            return Err(Error::NonPositive {
                name: "basis frequency ω₀",
                value: rational_to_f64(&omega0).to_string(),
            });
        }
        Ok(Self { omega0, parity, order })
    }

    pub fn omega0(&self) -> &Rational {
        &self.omega0
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.order + 1
    }

    pub fn with_order(&self, order: usize) -> Self {
        Self { order, ..self.clone() }
    }

    /// Full-basis indices `m(0), ..., m(order)`.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.order).map(move |j| self.parity.basis_index(j))
    }
}

/// Symmetric band matrix stored as its main diagonal and superdiagonals:
/// `bands[k][i]` is entry `(i, i + k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    bands: Vec<Vec<Float>>,
}

impl BandedMatrix {
    pub fn from_bands(bands: Vec<Vec<Float>>) -> Result<Self> {
        let Some(diag) = bands.first() else {
            return Err(Error::InvalidMatrix("no diagonal".into()));
        };
        let dim = diag.len();
        if dim == 0 {
            return Err(Error::InvalidMatrix("empty diagonal".into()));
        }
        for (k, band) in bands.iter().enumerate() {
            if band.len() != dim.saturating_sub(k) {
                return Err(Error::InvalidMatrix(format!(
                    "band {k} has {} entries, expected {}",
                    band.len(),
                    dim.saturating_sub(k)
                )));
            }
            if band.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMatrix(format!("band {k} has a non-finite entry")));
            }
        }
        Ok(Self { bands })
    }

    /// Takes the band of a dense symmetric matrix given row-wise.
    pub fn from_dense(rows: &[Vec<f64>], half_bandwidth: usize, prec: u32) -> Result<Self> {
        let dim = rows.len();
        let bands = (0..=half_bandwidth)
            .map(|k| {
                (0..dim.saturating_sub(k))
                    .map(|i| Float::with_val(prec, rows[i][i + k]))
                    .collect()
            })
            .collect();
        Self::from_bands(bands)
    }

    pub fn diagonal(values: &[Float]) -> Result<Self> {
        Self::from_bands(vec![values.to_vec()])
    }

    pub fn dim(&self) -> usize {
        self.bands[0].len()
    }

    pub fn half_bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn band(&self, k: usize) -> &[Float] {
        &self.bands[k]
    }

    pub fn prec(&self) -> u32 {
        self.bands[0][0].prec()
    }

    pub fn entry(&self, i: usize, j: usize) -> Float {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        match self.bands.get(k) {
            Some(band) => band[lo].clone(),
            None => Float::new(self.prec()),
        }
    }

    pub fn to_dense_f64(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j).to_f64()).collect())
            .collect()
    }

    /// `H · v`.
    pub fn mul_vec(&self, v: &[Float]) -> Result<Vec<Float>> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        let prec = self.prec().max(v.first().map_or(0, Float::prec));
        let mut out: Vec<Float> = (0..n)
            .map(|i| Float::with_val(prec, &self.bands[0][i] * &v[i]))
            .collect();
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            for (i, a) in band.iter().enumerate() {
                out[i] += Float::with_val(prec, a * &v[i + k]);
                out[i + k] += Float::with_val(prec, a * &v[i]);
            }
        }
        Ok(out)
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (Float, Float) {
        let n = self.dim();
        let prec = self.prec();
        let mut radius = vec![Float::new(prec); n];
        for band in self.bands.iter().skip(1) {
            let k = self.dim() - band.len();
            for (i, a) in band.iter().enumerate() {
                let abs = Float::with_val(prec, a.abs_ref());
                radius[i] += &abs;
                radius[i + k] += &abs;
            }
        }
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (d, r) in self.bands[0].iter().zip(&radius) {
            let low = Float::with_val(prec, d - r);
            let high = Float::with_val(prec, d + r);
            if lo.as_ref().is_none_or(|l| low < *l) {
                lo = Some(low);
            }
            if hi.as_ref().is_none_or(|h| high > *h) {
                hi = Some(high);
            }
        }
        (lo.unwrap_or_else(|| Float::new(prec)), hi.unwrap_or_else(|| Float::new(prec)))
    }
}

/// `⟨m|ξ²|n⟩` for dimensionless oscillator functions.
pub fn xi2_element(m: usize, n: usize, ctx: &PrecisionContext) -> Float {
    xi2_exact(m, n).evaluate(ctx.bits())
}

/// `⟨m|ξ⁴|n⟩` for dimensionless oscillator functions.
pub fn xi4_element(m: usize, n: usize, ctx: &PrecisionContext) -> Float {
    xi4_exact(m, n).evaluate(ctx.bits())
}

/// A matrix element of the form `rational · √integer`, kept exact until it is
/// rounded at the precision of the caller.
#[derive(Clone, Debug, PartialEq)]
struct Surd {
    coeff: Rational,
    radicand: Integer,
}

impl Surd {
    fn zero() -> Self {
        Self { coeff: Rational::new(), radicand: Integer::from(1) }
    }

    fn rational(coeff: Rational) -> Self {
        Self { coeff, radicand: Integer::from(1) }
    }

    fn is_zero(&self) -> bool {
        self.coeff == 0
    }

    fn evaluate(&self, prec: u32) -> Float {
        if self.radicand == 1 {
            Float::with_val(prec, &self.coeff)
        } else {
            let root = Float::with_val(prec, &self.radicand).sqrt();
            root * &self.coeff
        }
    }

    /// `scale · self`, rounded once at `prec`.
    fn scaled(&self, scale: &Rational, prec: u32) -> Float {
        let coeff = Rational::from(&self.coeff * scale);
        Surd { coeff, radicand: self.radicand.clone() }.evaluate(prec)
    }
}

fn int_product(factors: &[usize]) -> Integer {
    factors.iter().fold(Integer::from(1), |acc, &f| acc * Integer::from(f))
}

fn xi2_exact(m: usize, n: usize) -> Surd {
    if m == n {
        Surd::rational(Rational::from((2 * n + 1, 2)))
    } else if m + 2 == n {
        Surd { coeff: Rational::from((1, 2)), radicand: int_product(&[n, n - 1]) }
    } else if m == n + 2 {
        Surd { coeff: Rational::from((1, 2)), radicand: int_product(&[n + 1, n + 2]) }
    } else {
        Surd::zero()
    }
}

fn xi4_exact(m: usize, n: usize) -> Surd {
    if m == n {
        let num = 3 * (2 * n * n + 2 * n + 1);
        Surd::rational(Rational::from((num, 4)))
    } else if m + 4 == n {
        Surd { coeff: Rational::from((1, 4)), radicand: int_product(&[n, n - 1, n - 2, n - 3]) }
    } else if m + 2 == n {
        Surd { coeff: Rational::from((2 * n - 1, 2)), radicand: int_product(&[n, n - 1]) }
    } else if m == n + 2 {
        Surd { coeff: Rational::from((2 * n + 3, 2)), radicand: int_product(&[n + 1, n + 2]) }
    } else if m == n + 4 {
        Surd {
            coeff: Rational::from((1, 4)),
            radicand: int_product(&[n + 1, n + 2, n + 3, n + 4]),
        }
    } else {
        Surd::zero()
    }
}

/// Coefficients of the Hamiltonian in the ω₀ basis:
/// `H = ω₀(n+½) + (ω²−ω₀²)/(2ω₀)·ξ² + λ/ω₀²·ξ⁴`.
struct HamiltonianCoefficients {
    omega0: Rational,
    quadratic: Rational,
    quartic: Rational,
}

impl HamiltonianCoefficients {
    fn new(params: &ModelParams, basis: &BasisSpec) -> Self {
        let omega0 = basis.omega0().clone();
        let omega_sq = Rational::from(params.omega().square_ref());
        let omega0_sq = Rational::from(omega0.square_ref());
        let quadratic = Rational::from(&omega_sq - &omega0_sq) / Rational::from(&omega0 * 2u32);
        let quartic = Rational::from(params.lambda() / &omega0_sq);
        Self { omega0, quadratic, quartic }
    }

    /// Rough size of the largest entry, used to size the extra working bits.
    fn scale_estimate(&self, max_index: usize) -> f64 {
        let m = max_index as f64 + 0.5;
        self.omega0.to_f64() * m
            + 2.0 * self.quadratic.to_f64().abs() * m
            + 2.0 * self.quartic.to_f64() * 0.75 * (2.0 * m * m + 1.0)
    }
}

/// Decimal digits added on top of the working precision for a given matrix:
/// the bisection and rotations are accurate relative to the largest entry,
/// and the low-lying eigenvalues need that accuracy in absolute terms.
pub fn extra_digits(params: &ModelParams, basis: &BasisSpec) -> u32 {
    let coeffs = HamiltonianCoefficients::new(params, basis);
    let max_index = basis.parity.basis_index(basis.order);
    let scale = coeffs.scale_estimate(max_index).max(1.0);
    let dim = basis.dim() as f64;
    (scale.log10().ceil() + (dim + 1.0).log10().ceil()).max(0.0) as u32
}

/// Parity-reduced `(N+1)×(N+1)` Hamiltonian with half-bandwidth 2.
///
/// Entries are rounded once from their exact `rational · √integer` form at
/// the working precision of `ctx` plus [`extra_digits`].
pub fn assemble_hamiltonian(
    params: &ModelParams,
    basis: &BasisSpec,
    ctx: &PrecisionContext,
) -> Result<BandedMatrix> {
    let prec = ctx.widened(extra_digits(params, basis)).bits();
    let coeffs = HamiltonianCoefficients::new(params, basis);
    let dim = basis.dim();
    let index = |j: usize| basis.parity.basis_index(j);

    let diag = (0..dim)
        .map(|i| {
            let m = index(i);
            // the diagonal is rational: ω₀(m+½) + c₂(m+½) + c₄·3(2m²+2m+1)/4
            let half = Rational::from((2 * m + 1, 2));
            let mut value = Rational::from(&coeffs.omega0 + &coeffs.quadratic) * &half;
            value += Rational::from(&coeffs.quartic * &xi4_exact(m, m).coeff);
            Float::with_val(prec, &value)
        })
        .collect();

    let first = (0..dim.saturating_sub(1))
        .map(|i| {
            let (m, n) = (index(i), index(i + 1));
            let mut value = Float::new(prec);
            let x2 = xi2_exact(m, n);
            if coeffs.quadratic != 0 && !x2.is_zero() {
                value += x2.scaled(&coeffs.quadratic, prec);
            }
            if coeffs.quartic != 0 {
                value += xi4_exact(m, n).scaled(&coeffs.quartic, prec);
            }
            value
        })
        .collect();

    let second = (0..dim.saturating_sub(2))
        .map(|i| {
            let (m, n) = (index(i), index(i + 2));
            if coeffs.quartic == 0 {
                Float::new(prec)
            } else {
                xi4_exact(m, n).scaled(&coeffs.quartic, prec)
            }
        })
        .collect();

    BandedMatrix::from_bands(vec![diag, first, second])
}
