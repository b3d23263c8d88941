//! Lowest eigenpairs of symmetric band matrices at arbitrary precision.
//!
//! The band is reduced to tridiagonal form by Givens rotations with bulge
//! chasing, eigenvalues are located by Sturm-count bisection and
//! eigenvectors come from inverse iteration, mapped back through the logged
//! rotations.

use rayon::prelude::*;
use rug::ops::NegAssign;
use rug::{Assign, Float};

use crate::error::{Error, Result};
use crate::numerics::{pow10, PrecisionContext};
use crate::operator::BandedMatrix;

const MAX_INVERSE_ITERATIONS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    /// Index in the ascending spectrum of the matrix.
    pub level: usize,
    pub value: Float,
    /// Unit-norm coefficients, first significant component positive.
    pub vector: Vec<Float>,
}

/// Plane rotation acting on coordinates `(plane, plane + 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    pub plane: usize,
    pub cos: Float,
    pub sin: Float,
}

/// `T = Qᵀ A Q` with `Q` the product of the logged rotations.
#[derive(Clone, Debug)]
pub struct Tridiagonalization {
    diag: Vec<Float>,
    off: Vec<Float>,
    rotations: Vec<Rotation>,
}

impl Tridiagonalization {
    pub fn diag(&self) -> &[Float] {
        &self.diag
    }

    pub fn off(&self) -> &[Float] {
        &self.off
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn prec(&self) -> u32 {
        self.diag[0].prec()
    }

    pub fn matrix(&self) -> BandedMatrix {
        BandedMatrix::from_bands(vec![self.diag.clone(), self.off.clone()])
            .expect("tridiagonal bands are consistent")
    }

    /// Maps a vector in tridiagonal coordinates back to the original ones.
    pub fn back_transform(&self, y: &[Float]) -> Vec<Float> {
        let mut v = y.to_vec();
        let prec = v.first().map_or(self.prec(), Float::prec);
        let mut tmp = Float::new(prec);
        for rot in self.rotations.iter().rev() {
            let (head, tail) = v.split_at_mut(rot.plane + 1);
            let vp = &mut head[rot.plane];
            let vq = &mut tail[0];
            let old_p = vp.clone();
            // v_p = c·v_p + s·v_q, v_q = c·v_q − s·v_p
            *vp *= &rot.cos;
            tmp.assign(&rot.sin * &*vq);
            *vp += &tmp;
            *vq *= &rot.cos;
            tmp.assign(&rot.sin * &old_p);
            *vq -= &tmp;
        }
        v
    }
}

/// Symmetric working storage of width 3 beyond the diagonal, enough to hold
/// the bulge created while chasing a half-bandwidth-2 matrix.
struct BulgeBand {
    bands: Vec<Vec<Float>>,
    prec: u32,
}

const BULGE_WIDTH: usize = 3;

impl BulgeBand {
    fn new(matrix: &BandedMatrix, prec: u32) -> Self {
        let n = matrix.dim();
        let bands = (0..=BULGE_WIDTH)
            .map(|k| {
                (0..n.saturating_sub(k))
                    .map(|i| {
                        if k <= matrix.half_bandwidth() {
                            Float::with_val(prec, &matrix.band(k)[i])
                        } else {
                            Float::new(prec)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { bands, prec }
    }

    fn dim(&self) -> usize {
        self.bands[0].len()
    }

    fn slot(i: usize, j: usize) -> Option<(usize, usize)> {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        (hi - lo <= BULGE_WIDTH).then_some((hi - lo, lo))
    }

    fn get(&self, i: usize, j: usize) -> &Float {
        let (k, lo) = Self::slot(i, j).expect("entry inside the bulge band");
        &self.bands[k][lo]
    }

    fn set(&mut self, i: usize, j: usize, value: Float) {
        let (k, lo) = Self::slot(i, j).expect("entry inside the bulge band");
        self.bands[k][lo] = value;
    }

    /// `A ← Gᵀ A G` for the rotation in plane `(p, p+1)`.
    fn rotate(&mut self, p: usize, c: &Float, s: &Float) {
        let q = p + 1;
        let n = self.dim();
        let prec = self.prec;
        let mut tmp = Float::new(prec);
        let lo = p.saturating_sub(BULGE_WIDTH);
        let hi = (q + BULGE_WIDTH).min(n - 1);
        for j in lo..=hi {
            if j == p || j == q {
                continue;
            }
            let (Some(sp), Some(sq)) = (Self::slot(j, p), Self::slot(j, q)) else {
                continue;
            };
            let x = self.bands[sp.0][sp.1].clone();
            let y = self.bands[sq.0][sq.1].clone();
            // x' = c·x − s·y, y' = s·x + c·y
            let mut nx = Float::with_val(prec, c * &x);
            tmp.assign(s * &y);
            nx -= &tmp;
            let mut ny = Float::with_val(prec, c * &y);
            tmp.assign(s * &x);
            ny += &tmp;
            self.bands[sp.0][sp.1] = nx;
            self.bands[sq.0][sq.1] = ny;
        }
        let app = self.get(p, p).clone();
        let aqq = self.get(q, q).clone();
        let apq = self.get(p, q).clone();
        let cc = Float::with_val(prec, c.square_ref());
        let ss = Float::with_val(prec, s.square_ref());
        let cs = Float::with_val(prec, c * s);
        let cs_apq2 = Float::with_val(prec, &cs * &apq) * 2u32;

        let mut new_pp = Float::with_val(prec, &cc * &app);
        new_pp -= &cs_apq2;
        tmp.assign(&ss * &aqq);
        new_pp += &tmp;

        let mut new_qq = Float::with_val(prec, &ss * &app);
        new_qq += &cs_apq2;
        tmp.assign(&cc * &aqq);
        new_qq += &tmp;

        let diff = Float::with_val(prec, &app - &aqq);
        let mut new_pq = Float::with_val(prec, &cs * &diff);
        let c2s2 = Float::with_val(prec, &cc - &ss);
        tmp.assign(&c2s2 * &apq);
        new_pq += &tmp;

        self.set(p, p, new_pp);
        self.set(q, q, new_qq);
        self.set(p, q, new_pq);
    }

    /// Rotation in plane `(col−1, col)` that annihilates entry `(row, col)`.
    fn annihilate(&mut self, row: usize, col: usize) -> Option<Rotation> {
        let target = self.get(row, col);
        if target.is_zero() {
            return None;
        }
        let prec = self.prec;
        let keep = self.get(row, col - 1);
        let r = Float::with_val(prec, keep.hypot_ref(target));
        let cos = Float::with_val(prec, keep / &r);
        let sin = -Float::with_val(prec, target / &r);
        self.rotate(col - 1, &cos, &sin);
        self.set(row, col - 1, r);
        self.set(row, col, Float::new(prec));
        Some(Rotation { plane: col - 1, cos, sin })
    }
}

/// Orthogonal reduction of a half-bandwidth ≤ 2 symmetric matrix to
/// tridiagonal form.
///
/// Arithmetic runs at the larger of the matrix precision and `ctx`.
pub fn band_to_tridiagonal(matrix: &BandedMatrix, ctx: &PrecisionContext) -> Result<Tridiagonalization> {
    if matrix.half_bandwidth() > 2 {
        return Err(Error::InvalidMatrix(format!(
            "half-bandwidth {} exceeds 2",
            matrix.half_bandwidth()
        )));
    }
    let prec = matrix.prec().max(ctx.bits());
    let n = matrix.dim();
    let mut work = BulgeBand::new(matrix, prec);
    let mut rotations = Vec::new();
    if matrix.half_bandwidth() == 2 {
        for k in 0..n.saturating_sub(2) {
            let (mut row, mut col) = (k, k + 2);
            while col < n {
                match work.annihilate(row, col) {
                    Some(rot) => rotations.push(rot),
                    None => break,
                }
                row = col - 1;
                col += 2;
                if col >= n {
                    break;
                }
                // the bulge sits three places off the diagonal
                if work.get(row, col).is_zero() {
                    break;
                }
            }
        }
    }
    let diag = work.bands[0].clone();
    let off = if n > 1 { work.bands[1].clone() } else { Vec::new() };
    Ok(Tridiagonalization { diag, off, rotations })
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
pub fn sturm_count(diag: &[Float], off: &[Float], x: &Float) -> usize {
    let prec = diag.first().map_or(x.prec(), Float::prec).max(x.prec());
    let squares: Vec<Float> = off.iter().map(|e| Float::with_val(prec, e.square_ref())).collect();
    sturm_count_squared(diag, &squares, x, &pivot_floor(&squares, prec))
}

fn pivot_floor(squares: &[Float], prec: u32) -> Float {
    let mut scale = Float::with_val(prec, 1);
    for e2 in squares {
        if *e2 > scale {
            scale.assign(e2);
        }
    }
    scale * Float::with_val(prec, Float::i_exp(1, -4 * prec as i32))
}

fn sturm_count_squared(diag: &[Float], squares: &[Float], x: &Float, floor: &Float) -> usize {
    let prec = floor.prec();
    let mut count = 0;
    let mut q = Float::with_val(prec, &diag[0] - x);
    let mut tmp = Float::new(prec);
    for i in 0..diag.len() {
        if i > 0 {
            tmp.assign(&squares[i - 1] / &q);
            q.assign(&diag[i] - x);
            q -= &tmp;
        }
        if *q.as_abs() < *floor {
            // an exact zero pivot means x is an eigenvalue: not strictly below
            if q.is_sign_negative() && !q.is_zero() {
                q.assign(-floor);
            } else {
                q.assign(floor);
            }
        }
        if q.is_sign_negative() {
            count += 1;
        }
    }
    count
}

fn tridiagonal_bounds(diag: &[Float], off: &[Float], prec: u32) -> (Float, Float) {
    let n = diag.len();
    let mut lo: Option<Float> = None;
    let mut hi: Option<Float> = None;
    for i in 0..n {
        let mut r = Float::new(prec);
        if i > 0 {
            r += &*off[i - 1].as_abs();
        }
        if i + 1 < n {
            r += &*off[i].as_abs();
        }
        let low = Float::with_val(prec, &diag[i] - &r);
        let high = Float::with_val(prec, &diag[i] + &r);
        if lo.as_ref().is_none_or(|l| low < *l) {
            lo = Some(low);
        }
        if hi.as_ref().is_none_or(|h| high > *h) {
            hi = Some(high);
        }
    }
    let (mut lo, mut hi) = (lo.expect("nonempty"), hi.expect("nonempty"));
    // widen so that the endpoints are strict bounds
    let pad = Float::with_val(prec, Float::with_val(prec, &hi - &lo).abs() + 1u32) * 1e-3;
    lo -= &pad;
    hi += &pad;
    (lo, hi)
}

/// Bisection for the eigenvalue of index `index` (0-based, ascending).
fn bisect(
    diag: &[Float],
    squares: &[Float],
    floor: &Float,
    bounds: &(Float, Float),
    index: usize,
    ctx: &PrecisionContext,
) -> Float {
    let prec = floor.prec();
    let rel = pow10(prec, 2 - ctx.working_digits() as i32);
    let mut lo = bounds.0.clone();
    let mut hi = bounds.1.clone();
    let mut mid = Float::new(prec);
    let mut width = Float::new(prec);
    let mut limit = Float::new(prec);
    loop {
        mid.assign(&lo + &hi);
        mid /= 2u32;
        width.assign(&hi - &lo);
        limit.assign(&*mid.as_abs());
        if limit < 1 {
            limit.assign(1);
        }
        limit *= &rel;
        if width <= limit || mid == lo || mid == hi {
            return mid;
        }
        if sturm_count_squared(diag, squares, &mid, floor) > index {
            hi.assign(&mid);
        } else {
            lo.assign(&mid);
        }
    }
}

fn tridiagonal_eigenvalues(tri: &Tridiagonalization, k: usize, ctx: &PrecisionContext) -> Result<Vec<Float>> {
    let n = tri.dim();
    if k == 0 || k > n {
        return Err(Error::LevelOutOfRange { requested: k, dim: n });
    }
    let prec = tri.prec();
    let squares: Vec<Float> = tri.off.iter().map(|e| Float::with_val(prec, e.square_ref())).collect();
    let floor = pivot_floor(&squares, prec);
    let bounds = tridiagonal_bounds(&tri.diag, &tri.off, prec);
    Ok((0..k)
        .into_par_iter()
        .map(|i| bisect(&tri.diag, &squares, &floor, &bounds, i, ctx))
        .collect())
}

/// The `k` smallest eigenvalues in ascending order.
pub fn eigenvalues_lowest(matrix: &BandedMatrix, k: usize, ctx: &PrecisionContext) -> Result<Vec<Float>> {
    if k == 0 || k > matrix.dim() {
        return Err(Error::LevelOutOfRange { requested: k, dim: matrix.dim() });
    }
    let tri = band_to_tridiagonal(matrix, ctx)?;
    tridiagonal_eigenvalues(&tri, k, ctx)
}

/// LU factors of `T − σI` with partial pivoting; `U` has two superdiagonals.
struct ShiftedLu {
    u0: Vec<Float>,
    u1: Vec<Float>,
    u2: Vec<Float>,
    swapped: Vec<bool>,
    multipliers: Vec<Float>,
}

impl ShiftedLu {
    fn new(diag: &[Float], off: &[Float], shift: &Float, prec: u32) -> Self {
        let n = diag.len();
        let mut scale = Float::new(prec);
        for x in diag.iter().chain(off) {
            if *x.as_abs() > scale {
                scale.assign(&*x.as_abs());
            }
        }
        if scale.is_zero() {
            scale.assign(1);
        }
        let tiny = scale * Float::with_val(prec, Float::i_exp(1, -(prec as i32)));
        let mut lu = ShiftedLu {
            u0: Vec::with_capacity(n),
            u1: Vec::with_capacity(n),
            u2: Vec::with_capacity(n),
            swapped: Vec::with_capacity(n),
            multipliers: Vec::with_capacity(n),
        };
        let mut p0 = Float::with_val(prec, &diag[0] - shift);
        let mut p1 = if n > 1 { off[0].clone() } else { Float::new(prec) };
        for i in 0..n.saturating_sub(1) {
            let sub = &off[i];
            let next_diag = Float::with_val(prec, &diag[i + 1] - shift);
            let next_off = if i + 2 < n { off[i + 1].clone() } else { Float::new(prec) };
            if *p0.as_abs() >= *sub.as_abs() {
                if p0.is_zero() {
                    p0.assign(&tiny);
                }
                let m = Float::with_val(prec, sub / &p0);
                let np0 = next_diag - Float::with_val(prec, &m * &p1);
                lu.u0.push(p0);
                lu.u1.push(p1);
                lu.u2.push(Float::new(prec));
                lu.swapped.push(false);
                lu.multipliers.push(m);
                p0 = np0;
                p1 = next_off;
            } else {
                let m = Float::with_val(prec, &p0 / sub);
                let np0 = Float::with_val(prec, &p1 - Float::with_val(prec, &m * &next_diag));
                let np1 = -Float::with_val(prec, &m * &next_off);
                lu.u0.push(sub.clone());
                lu.u1.push(next_diag);
                lu.u2.push(next_off);
                lu.swapped.push(true);
                lu.multipliers.push(m);
                p0 = np0;
                p1 = np1;
            }
        }
        if p0.is_zero() || *p0.as_abs() < tiny {
            p0.assign(&tiny);
        }
        lu.u0.push(p0);
        lu.u1.push(Float::new(prec));
        lu.u2.push(Float::new(prec));
        lu
    }

    fn solve(&self, rhs: &mut [Float]) {
        let n = rhs.len();
        let prec = self.u0[0].prec();
        let mut tmp = Float::new(prec);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                rhs.swap(i, i + 1);
            }
            tmp.assign(&self.multipliers[i] * &rhs[i]);
            rhs[i + 1] -= &tmp;
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                tmp.assign(&self.u1[i] * &rhs[i + 1]);
                rhs[i] -= &tmp;
            }
            if i + 2 < n {
                tmp.assign(&self.u2[i] * &rhs[i + 2]);
                rhs[i] -= &tmp;
            }
            rhs[i] /= &self.u0[i];
        }
    }
}

fn norm2(v: &[Float], prec: u32) -> Float {
    let mut sum = Float::new(prec);
    for x in v {
        sum += Float::with_val(prec, x.square_ref());
    }
    sum.sqrt()
}

fn normalize(v: &mut [Float], prec: u32) -> bool {
    let norm = norm2(v, prec);
    if norm.is_zero() || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= &norm;
    }
    true
}

fn dot(a: &[Float], b: &[Float], prec: u32) -> Float {
    let mut sum = Float::new(prec);
    for (x, y) in a.iter().zip(b) {
        sum += Float::with_val(prec, x * y);
    }
    sum
}

/// Two passes of Gram-Schmidt; returns the fraction of the norm that survives.
fn orthogonalize(v: &mut [Float], against: &[Vec<Float>], prec: u32) -> Float {
    let before = norm2(v, prec);
    for _ in 0..2 {
        for u in against {
            let proj = dot(v, u, prec);
            for (x, y) in v.iter_mut().zip(u) {
                *x -= Float::with_val(prec, &proj * y);
            }
        }
    }
    if before.is_zero() {
        return before;
    }
    norm2(v, prec) / before
}

fn tridiagonal_residual(diag: &[Float], off: &[Float], value: &Float, v: &[Float], prec: u32) -> Float {
    let n = diag.len();
    let mut worst = Float::new(prec);
    for i in 0..n {
        let mut r = Float::with_val(prec, &diag[i] - value) * &v[i];
        if i > 0 {
            r += Float::with_val(prec, &off[i - 1] * &v[i - 1]);
        }
        if i + 1 < n {
            r += Float::with_val(prec, &off[i] * &v[i + 1]);
        }
        if *r.as_abs() > worst {
            worst.assign(&*r.as_abs());
        }
    }
    worst
}

fn tolerance(value: &Float, ctx: &PrecisionContext, prec: u32) -> Float {
    let scale = Float::with_val(prec, &*value.as_abs()).max(&Float::with_val(prec, 1));
    pow10(prec, 1 - ctx.target_digits() as i32) * scale
}

/// Deterministic start vectors: all components equal, then the unit vectors.
fn start_vector(n: usize, attempt: usize, prec: u32) -> Vec<Float> {
    if attempt == 0 {
        vec![Float::with_val(prec, 1); n]
    } else {
        let mut v = vec![Float::new(prec); n];
        v[(attempt - 1) % n] = Float::with_val(prec, 1);
        v
    }
}

/// Inverse iteration on the tridiagonal form, orthogonal to `cluster`.
fn inverse_iteration(
    tri: &Tridiagonalization,
    value: &Float,
    cluster: &[Vec<Float>],
    ctx: &PrecisionContext,
) -> Result<Vec<Float>> {
    let n = tri.dim();
    let prec = tri.prec();
    let lu = ShiftedLu::new(&tri.diag, &tri.off, value, prec);
    let tol = tolerance(value, ctx, prec);
    let mut best: Option<(Float, Vec<Float>)> = None;
    for attempt in 0..=n {
        let mut v = start_vector(n, attempt, prec);
        // a start vector lying in the span of the cluster carries no information
        if orthogonalize(&mut v, cluster, prec) < 1e-3 || !normalize(&mut v, prec) {
            continue;
        }
        for _ in 0..MAX_INVERSE_ITERATIONS {
            lu.solve(&mut v);
            orthogonalize(&mut v, cluster, prec);
            if !normalize(&mut v, prec) {
                break;
            }
            let residual = tridiagonal_residual(&tri.diag, &tri.off, value, &v, prec);
            let done = residual <= tol;
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, v.clone()));
            }
            if done {
                return Ok(v);
            }
        }
        if best.is_some() && cluster.is_empty() {
            break;
        }
    }
    let residual = best.map_or_else(|| "undefined".to_string(), |(r, _)| r.to_string_radix(10, Some(6)));
    Err(Error::EigenvectorNotConverged {
        value: value.to_string_radix(10, Some(ctx.target_digits() as usize)),
        residual,
    })
}

/// Flips `v` so its first component above `10^(−target)` is positive.
fn fix_sign(v: &mut [Float], ctx: &PrecisionContext) {
    let prec = v.first().map_or(64, Float::prec);
    let threshold = pow10(prec, -(ctx.target_digits() as i32));
    if let Some(first) = v.iter().find(|x| *x.as_abs() > threshold) {
        if first.is_sign_negative() {
            for x in v.iter_mut() {
                x.neg_assign();
            }
        }
    }
}

/// Unit eigenvector for an eigenvalue of `matrix` known to target precision.
pub fn eigenvector(matrix: &BandedMatrix, value: &Float, ctx: &PrecisionContext) -> Result<Vec<Float>> {
    let tri = band_to_tridiagonal(matrix, ctx)?;
    let y = inverse_iteration(&tri, value, &[], ctx)?;
    let mut v = tri.back_transform(&y);
    fix_sign(&mut v, ctx);
    Ok(v)
}

/// The `k` lowest eigenpairs, ascending, each satisfying the residual bound
/// `10^(1−target)·max(1, |E|)`.
pub fn eigenpairs_lowest(matrix: &BandedMatrix, k: usize, ctx: &PrecisionContext) -> Result<Vec<EigenPair>> {
    if k == 0 || k > matrix.dim() {
        return Err(Error::LevelOutOfRange { requested: k, dim: matrix.dim() });
    }
    let tri = band_to_tridiagonal(matrix, ctx)?;
    let values = tridiagonal_eigenvalues(&tri, k, ctx)?;
    let prec = tri.prec();
    let gap = pow10(prec, -(ctx.target_digits().div_ceil(2) as i32));
    let mut pairs = Vec::with_capacity(k);
    let mut cluster: Vec<Vec<Float>> = Vec::new();
    for (level, value) in values.into_iter().enumerate() {
        let joins_cluster = pairs.last().is_some_and(|prev: &EigenPair| {
            let spacing = Float::with_val(prec, &value - &prev.value).abs();
            let scale = Float::with_val(prec, &*value.as_abs()).max(&Float::with_val(prec, 1));
            spacing < Float::with_val(prec, &gap * &scale)
        });
        if !joins_cluster {
            cluster.clear();
        }
        let y = inverse_iteration(&tri, &value, &cluster, ctx)?;
        cluster.push(y.clone());
        let mut vector = tri.back_transform(&y);
        fix_sign(&mut vector, ctx);
        let pair = EigenPair { level, value, vector };
        let residual = residual_norm(matrix, &pair)?;
        if residual > tolerance(&pair.value, ctx, prec) {
            return Err(Error::EigenvectorNotConverged {
                value: pair.value.to_string_radix(10, Some(ctx.target_digits() as usize)),
                residual: residual.to_string_radix(10, Some(6)),
            });
        }
        pairs.push(pair);
    }
    Ok(pairs)
}

/// `‖H·v − E·v‖∞`.
pub fn residual_norm(matrix: &BandedMatrix, pair: &EigenPair) -> Result<Float> {
    let hv = matrix.mul_vec(&pair.vector)?;
    let prec = hv.first().map_or(matrix.prec(), Float::prec);
    let mut worst = Float::new(prec);
    for (h, v) in hv.iter().zip(&pair.vector) {
        let r = Float::with_val(prec, h - Float::with_val(prec, &pair.value * v));
        if *r.as_abs() > worst {
            worst.assign(&*r.as_abs());
        }
    }
    Ok(worst)
}
