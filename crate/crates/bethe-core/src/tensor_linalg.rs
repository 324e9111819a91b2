//! Scalar backends and sparse linear algebra on the tensor-product space.
//!
//! Identities are checked over arbitrary-precision rationals, where equality
//! is literal; root finding and spectra run over complex doubles. Both
//! backends sit behind the [`Scalar`] trait so the whole construction is
//! generic in the field.
//!
//! Vectors and operators on the N^L-dimensional quantum space are sparse
//! maps keyed by the mixed-radix basis index b = Σ_s digit_s · N^s, site 0
//! being the least significant digit.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::Rational64;
use num::{BigRational, One, Zero};

use crate::algebra_spec::AlgebraSpec;

/// Exact rational scalar backend.
pub type Rat = BigRational;
/// Complex double-precision scalar backend.
pub type C64 = Complex64;

/// A field of spectral-parameter scalars.
///
/// `Key` is a total-order canonical form used to sort Bethe parameters and
/// key memo tables; it need not order numerically, only consistently.
pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    type Key: Ord + Eq + std::hash::Hash + Clone + fmt::Debug;

    /// Whether arithmetic in this backend is exact.
    const EXACT: bool;

    fn from_q(q: &BigRational) -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_q(&BigRational::from_integer(BigInt::from(v)))
    }

    fn from_ratio(p: i64, q: i64) -> Self {
        Self::from_q(&BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    fn from_q64(q: Rational64) -> Self {
        Self::from_ratio(*q.numer(), *q.denom())
    }

    /// Multiplicative inverse; calling it on zero is a caller bug and panics.
    fn inv(&self) -> Self;

    fn key(&self) -> Self::Key;

    /// Magnitude as a double, used for residual reporting and float
    /// tolerance checks; exact values may round.
    fn abs_f64(&self) -> f64;

    /// Rendering used in reports: `p/q` for rationals, `[re,im]` for
    /// complex values.
    fn report_string(&self) -> String;
}

impl Scalar for Rat {
    type Key = Rat;
    const EXACT: bool = true;

    fn from_q(q: &BigRational) -> Self {
        q.clone()
    }

    fn inv(&self) -> Self {
        assert!(!self.is_zero(), "exact scalar inversion of zero");
        Rat::one() / self.clone()
    }

    fn key(&self) -> Self::Key {
        self.clone()
    }

    fn abs_f64(&self) -> f64 {
        rat_to_f64(self).abs()
    }

    fn report_string(&self) -> String {
        self.to_string()
    }
}

impl Scalar for C64 {
    type Key = (u64, u64);
    const EXACT: bool = false;

    fn from_q(q: &BigRational) -> Self {
        C64::new(rat_to_f64(q), 0.0)
    }

    fn inv(&self) -> Self {
        assert!(self.norm_sqr() > 0.0, "float scalar inversion of zero");
        1.0 / self
    }

    fn key(&self) -> Self::Key {
        let norm = |x: f64| if x == 0.0 { 0.0f64 } else { x };
        (norm(self.re).to_bits(), norm(self.im).to_bits())
    }

    fn abs_f64(&self) -> f64 {
        self.norm()
    }

    fn report_string(&self) -> String {
        format!("[{},{}]", self.re, self.im)
    }
}

/// Round-to-nearest conversion of a big rational into a double.
pub fn rat_to_f64(q: &BigRational) -> f64 {
    use num::ToPrimitive;
    q.to_f64().unwrap_or_else(|| {
        // Fall back on a scaled division for magnitudes outside f64 range
        // of the direct conversion path.
        let n = q.numer().to_f64().unwrap_or(f64::MAX);
        let d = q.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Parses "p/q" or plain integer literals into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (t, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| format!("malformed rational numerator in {text:?}"))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| format!("malformed rational denominator in {text:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in {text:?}"));
    }
    Ok(BigRational::new(n, d))
}

/// Sparse vector on a `dim`-dimensional space; absent keys are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<F: Scalar> {
    dim: usize,
    entries: BTreeMap<usize, F>,
}

impl<F: Scalar> StateVector<F> {
    pub fn zero(dim: usize) -> Self {
        StateVector {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn basis(dim: usize, idx: usize) -> Self {
        assert!(idx < dim);
        let mut entries = BTreeMap::new();
        entries.insert(idx, F::one());
        StateVector { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, idx: usize) -> F {
        self.entries.get(&idx).cloned().unwrap_or_else(F::zero)
    }

    pub fn set(&mut self, idx: usize, value: F) {
        assert!(idx < self.dim);
        if value.is_zero() {
            self.entries.remove(&idx);
        } else {
            self.entries.insert(idx, value);
        }
    }

    pub fn add_to(&mut self, idx: usize, value: F) {
        assert!(idx < self.dim);
        let cur = self.entries.remove(&idx).unwrap_or_else(F::zero);
        let next = cur + value;
        if !next.is_zero() {
            self.entries.insert(idx, next);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &F)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn scaled(&self, s: &F) -> Self {
        if s.is_zero() {
            return StateVector::zero(self.dim);
        }
        let entries = self
            .entries
            .iter()
            .filter_map(|(k, v)| {
                let w = v.clone() * s.clone();
                if w.is_zero() {
                    None
                } else {
                    Some((*k, w))
                }
            })
            .collect();
        StateVector {
            dim: self.dim,
            entries,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "vector dimension mismatch");
        let mut out = self.clone();
        for (k, v) in other.entries.iter() {
            out.add_to(*k, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(&(-F::one())))
    }

    /// self += s · other
    pub fn axpy(&mut self, s: &F, other: &Self) {
        assert_eq!(self.dim, other.dim, "vector dimension mismatch");
        if s.is_zero() {
            return;
        }
        for (k, v) in other.entries.iter() {
            self.add_to(*k, v.clone() * s.clone());
        }
    }

    /// Euclidean norm as a double (exact entries are rounded).
    pub fn norm_f64(&self) -> f64 {
        self.entries
            .values()
            .map(|v| {
                let a = v.abs_f64();
                a * a
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries
            .values()
            .map(|v| v.abs_f64())
            .fold(0.0, f64::max)
    }
}

/// Sparse row-major operator on a `dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOperator<F: Scalar> {
    dim: usize,
    rows: BTreeMap<usize, BTreeMap<usize, F>>,
}

impl<F: Scalar> QuantumOperator<F> {
    pub fn zero(dim: usize) -> Self {
        QuantumOperator {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = QuantumOperator::zero(dim);
        for i in 0..dim {
            op.set_entry(i, i, F::one());
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.rows.values().map(|r| r.len()).sum()
    }

    pub fn entry(&self, i: usize, j: usize) -> F {
        self.rows
            .get(&i)
            .and_then(|r| r.get(&j))
            .cloned()
            .unwrap_or_else(F::zero)
    }

    pub fn set_entry(&mut self, i: usize, j: usize, value: F) {
        assert!(i < self.dim && j < self.dim);
        if value.is_zero() {
            if let Some(row) = self.rows.get_mut(&i) {
                row.remove(&j);
                if row.is_empty() {
                    self.rows.remove(&i);
                }
            }
        } else {
            self.rows.entry(i).or_default().insert(j, value);
        }
    }

    pub fn add_entry(&mut self, i: usize, j: usize, value: F) {
        let cur = self.entry(i, j);
        self.set_entry(i, j, cur + value);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &F)> {
        self.rows
            .iter()
            .flat_map(|(i, r)| r.iter().map(move |(j, v)| (*i, *j, v)))
    }

    pub fn apply(&self, v: &StateVector<F>) -> StateVector<F> {
        assert_eq!(self.dim, v.dim(), "operator/vector dimension mismatch");
        let mut out = StateVector::zero(self.dim);
        for (i, row) in self.rows.iter() {
            let mut acc = F::zero();
            let mut hit = false;
            for (j, a) in row.iter() {
                if let Some(x) = v.entries.get(j) {
                    acc = acc + a.clone() * x.clone();
                    hit = true;
                }
            }
            if hit && !acc.is_zero() {
                out.entries.insert(*i, acc);
            }
        }
        out
    }

    /// Matrix product self·other.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch");
        let mut out = QuantumOperator::zero(self.dim);
        for (i, row) in self.rows.iter() {
            let mut acc: BTreeMap<usize, F> = BTreeMap::new();
            for (k, a) in row.iter() {
                if let Some(orow) = other.rows.get(k) {
                    for (j, b) in orow.iter() {
                        let add = a.clone() * b.clone();
                        if add.is_zero() {
                            continue;
                        }
                        let cur = acc.remove(j).unwrap_or_else(F::zero);
                        let next = cur + add;
                        if !next.is_zero() {
                            acc.insert(*j, next);
                        }
                    }
                }
            }
            if !acc.is_empty() {
                out.rows.insert(*i, acc);
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "operator dimension mismatch");
        let mut out = self.clone();
        for (i, j, v) in other.entries() {
            out.add_entry(i, j, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(&(-F::one())))
    }

    pub fn scaled(&self, s: &F) -> Self {
        if s.is_zero() {
            return QuantumOperator::zero(self.dim);
        }
        let mut out = QuantumOperator::zero(self.dim);
        for (i, j, v) in self.entries() {
            out.set_entry(i, j, v.clone() * s.clone());
        }
        out
    }

    /// [self, other] = self·other − other·self.
    pub fn commutator(&self, other: &Self) -> Self {
        self.compose(other).sub(&other.compose(self))
    }

    /// Frobenius norm as a double.
    pub fn norm_f64(&self) -> f64 {
        self.rows
            .values()
            .flat_map(|r| r.values())
            .map(|v| {
                let a = v.abs_f64();
                a * a
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .values()
            .flat_map(|r| r.values())
            .map(|v| v.abs_f64())
            .fold(0.0, f64::max)
    }

    /// Kronecker product self ⊗ other: index = i_self · other.dim + i_other.
    pub fn kron(&self, other: &Self) -> Self {
        let dim = self.dim * other.dim;
        let mut out = QuantumOperator::zero(dim);
        for (i1, j1, a) in self.entries() {
            for (i2, j2, b) in other.entries() {
                let v = a.clone() * b.clone();
                if !v.is_zero() {
                    out.set_entry(i1 * other.dim + i2, j1 * other.dim + j2, v);
                }
            }
        }
        out
    }
}

/// Kronecker product of vectors with the same index convention as
/// [`QuantumOperator::kron`].
pub fn kron_vec<F: Scalar>(a: &StateVector<F>, b: &StateVector<F>) -> StateVector<F> {
    let dim = a.dim() * b.dim();
    let mut out = StateVector::zero(dim);
    for (i1, x) in a.iter() {
        for (i2, y) in b.iter() {
            let v = x.clone() * y.clone();
            if !v.is_zero() {
                out.set(i1 * b.dim() + i2, v);
            }
        }
    }
    out
}

/// Embeds a single-site operator into the L-fold product space as
/// I ⊗ … ⊗ op ⊗ … ⊗ I acting on the given site (site 0 is the least
/// significant digit of the basis index).
pub fn embed_site_operator<F: Scalar>(
    site_dim: usize,
    sites: usize,
    site: usize,
    local: &QuantumOperator<F>,
) -> QuantumOperator<F> {
    assert!(site < sites, "site index out of range");
    assert_eq!(local.dim(), site_dim, "local operator dimension mismatch");
    let dim = site_dim.pow(sites as u32);
    let stride = site_dim.pow(site as u32);
    let block = stride * site_dim;
    let mut out = QuantumOperator::zero(dim);
    for (r, c, v) in local.entries() {
        // basis index = high·block + digit·stride + low
        for high in 0..(dim / block) {
            for low in 0..stride {
                out.set_entry(
                    high * block + r * stride + low,
                    high * block + c * stride + low,
                    v.clone(),
                );
            }
        }
    }
    out
}

/// Sign-dressed transposition of a single-site operator:
/// (M^t)_{i,j} = ε_i ε_j M_{j′,i′}. The map is identically zero for gl.
pub fn transpose_with_signs<F: Scalar>(
    spec: &AlgebraSpec,
    m: &QuantumOperator<F>,
) -> QuantumOperator<F> {
    assert_eq!(m.dim(), spec.site_dim(), "transpose needs a site operator");
    let mut out = QuantumOperator::zero(m.dim());
    for i in spec.indices() {
        for j in spec.indices() {
            let s = spec.eps_local(i) * spec.eps_local(j);
            if s == 0 {
                continue;
            }
            let v = m.entry(
                spec.index_pos(spec.prime(j)),
                spec.index_pos(spec.prime(i)),
            );
            if !v.is_zero() {
                out.set_entry(
                    spec.index_pos(i),
                    spec.index_pos(j),
                    v * F::from_int(s),
                );
            }
        }
    }
    out
}

/// Sign-dressed partial transposition on one factor of a two-site operator
/// with index convention row = first·N + second.
pub fn partial_transpose_with_signs<F: Scalar>(
    spec: &AlgebraSpec,
    m: &QuantumOperator<F>,
    factor: usize,
) -> QuantumOperator<F> {
    let n = spec.site_dim();
    assert_eq!(m.dim(), n * n, "partial transpose needs a two-site operator");
    assert!(factor < 2);
    let mut out = QuantumOperator::zero(n * n);
    for (r, c, v) in m.entries() {
        let (a, b) = (r / n, r % n);
        let (cc, d) = (c / n, c % n);
        let (ia, ib) = (spec.pos_index(a), spec.pos_index(b));
        let (ic, id) = (spec.pos_index(cc), spec.pos_index(d));
        // transposing a factor swaps its row with its primed column and
        // dresses with the ε signs of the new outer indices
        let (nr, nc, i_new, j_new) = if factor == 0 {
            let i_new = spec.prime(ic);
            let j_new = spec.prime(ia);
            (
                spec.index_pos(i_new) * n + b,
                spec.index_pos(j_new) * n + d,
                i_new,
                j_new,
            )
        } else {
            let i_new = spec.prime(id);
            let j_new = spec.prime(ib);
            (
                a * n + spec.index_pos(i_new),
                cc * n + spec.index_pos(j_new),
                i_new,
                j_new,
            )
        };
        let s = spec.eps_local(i_new) * spec.eps_local(j_new);
        if s == 0 {
            continue;
        }
        out.add_entry(nr, nc, v.clone() * F::from_int(s));
    }
    out
}

/// Integer power with negative exponents via inversion.
pub fn pow_i<F: Scalar>(x: &F, e: i64) -> F {
    if e == 0 {
        return F::one();
    }
    let base = if e < 0 { x.inv() } else { x.clone() };
    let mut acc = F::one();
    for _ in 0..e.unsigned_abs() {
        acc = acc * base.clone();
    }
    acc
}
