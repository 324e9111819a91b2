//! Inhomogeneous spin chains built from the invariant R-matrix.
//!
//! The monodromy T(u) is the ordered product of single-site R-matrices over
//! an auxiliary space; its entries T_{i,j}(u) act on the N^L-dimensional
//! quantum space. The module locates the vacuum, reads off the vacuum
//! eigenvalues λ_i(u), extracts zero modes and Cartan/color operators by
//! exact polynomial interpolation, and checks the exchange relations the
//! whole construction rests on: the Yang-Baxter identity, the bilinear
//! commutation relations of monodromy entries, zero-mode commutators and
//! the crossing symmetry that is particular to the orthogonal and
//! symplectic cases.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::time::Instant;

use num::rational::Rational64;
use thiserror::Error;

use crate::algebra_spec::AlgebraSpec;
use crate::report::{CheckRecord, VerificationReport};
use crate::tensor_linalg::{QuantumOperator, Scalar, StateVector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("coupling constant must be nonzero")]
    ZeroCoupling,
    #[error("chain needs at least one site")]
    EmptyChain,
    #[error("site parameters must be pairwise distinct for orthogonal and symplectic chains")]
    DuplicateInhomogeneity,
    #[error("site parameters collide across the crossing shift")]
    ShiftCollision,
    #[error("no product basis state is annihilated by all lower triangular entries")]
    VacuumNotFound,
}

/// Common interface of a chain (or a tensor product of chains) carrying a
/// monodromy-matrix representation. All verification layers are written
/// against this trait.
pub trait Model<F: Scalar> {
    fn spec(&self) -> &AlgebraSpec;
    /// The coupling constant c of the R-matrix.
    fn c(&self) -> F;
    /// Dimension of the quantum space.
    fn dim(&self) -> usize;
    fn vacuum(&self) -> StateVector<F>;
    /// Vacuum eigenvalue λ_i(u) of the diagonal entry T_{i,i}(u).
    fn lambda(&self, i: i64, u: &F) -> F;
    fn monodromy_entry(&self, i: i64, j: i64, u: &F) -> QuantumOperator<F>;
    /// Zero mode of the entry: coefficient of (u/c)^{-1} in T_{i,j}(u).
    fn zero_mode(&self, i: i64, j: i64) -> QuantumOperator<F>;
    /// Whether u stays away from every pole of the monodromy entries.
    fn is_regular_point(&self, u: &F) -> bool;
    /// Short human-readable tag used in report contexts.
    fn describe(&self) -> String;

    fn apply_entry(&self, i: i64, j: i64, u: &F, v: &StateVector<F>) -> StateVector<F> {
        self.monodromy_entry(i, j, u).apply(v)
    }

    /// Transfer matrix: trace of the monodromy over the auxiliary space.
    fn transfer(&self, u: &F) -> QuantumOperator<F> {
        let mut acc = QuantumOperator::zero(self.dim());
        for i in self.spec().indices() {
            acc = acc.add(&self.monodromy_entry(i, i, u));
        }
        acc
    }

    /// Ratio α_a(u) = λ_a(u)/λ_{a+ν_a}(u) attached to the node a.
    fn alpha(&self, a: i64, u: &F) -> F {
        let up = a + self.spec().nu(a);
        self.lambda(a, u) * self.lambda(up, u).inv()
    }

    /// Zero mode attached to the simple root of the node a.
    fn simple_root_zero_mode(&self, a: i64) -> QuantumOperator<F> {
        self.zero_mode(a + self.spec().nu(a), a)
    }
}

/// Elementary two-site operator helpers keyed by matrix positions. The
/// two-site index convention is row = first·N + second.
pub fn permutation_matrix<F: Scalar>(spec: &AlgebraSpec) -> QuantumOperator<F> {
    let n = spec.site_dim();
    let mut p = QuantumOperator::zero(n * n);
    for a in 0..n {
        for b in 0..n {
            p.set_entry(a * n + b, b * n + a, F::one());
        }
    }
    p
}

/// Rank-one projector companion of the permutation, carrying the ε signs
/// and the index reflection. Identically zero in the gl case.
pub fn q_matrix<F: Scalar>(spec: &AlgebraSpec) -> QuantumOperator<F> {
    let n = spec.site_dim();
    let mut q = QuantumOperator::zero(n * n);
    if spec.is_gl() {
        return q;
    }
    for i in spec.indices() {
        for j in spec.indices() {
            let s = spec.eps_local(i) * spec.eps_local(j);
            if s == 0 {
                continue;
            }
            q.set_entry(
                spec.index_pos(i) * n + spec.index_pos(spec.prime(i)),
                spec.index_pos(j) * n + spec.index_pos(spec.prime(j)),
                F::from_int(s),
            );
        }
    }
    q
}

/// The invariant R-matrix on C^N ⊗ C^N evaluated at spectral parameters
/// (u, v).
pub fn r_matrix<F: Scalar>(spec: &AlgebraSpec, c: &F, u: &F, v: &F) -> QuantumOperator<F> {
    let n = spec.site_dim();
    let duv = u.clone() - v.clone();
    let mut r = QuantumOperator::identity(n * n);
    r = r.add(&permutation_matrix::<F>(spec).scaled(&(c.clone() * duv.clone().inv())));
    if !spec.is_gl() {
        let shifted = duv + c.clone() * F::from_q64(spec.kappa());
        r = r.sub(&q_matrix::<F>(spec).scaled(&(c.clone() * shifted.inv())));
    }
    r
}

/// Embeds a two-factor operator (row = first·N + second) into a k-fold
/// product space at the ordered factor pair (fa, fb); factor 0 is the most
/// significant digit of the full index.
pub fn embed_factor_pair<F: Scalar>(
    dim_local: usize,
    factors: usize,
    fa: usize,
    fb: usize,
    op: &QuantumOperator<F>,
) -> QuantumOperator<F> {
    assert!(fa != fb && fa < factors && fb < factors);
    assert_eq!(op.dim(), dim_local * dim_local);
    let weight = |m: usize| dim_local.pow((factors - 1 - m) as u32);
    let spectators: Vec<usize> = (0..factors).filter(|m| *m != fa && *m != fb).collect();
    let spect_count = dim_local.pow(spectators.len() as u32);
    let dim = dim_local.pow(factors as u32);
    let mut out = QuantumOperator::zero(dim);
    for (r, c, v) in op.entries() {
        let (ra, rb) = (r / dim_local, r % dim_local);
        let (ca, cb) = (c / dim_local, c % dim_local);
        for s in 0..spect_count {
            let mut row = ra * weight(fa) + rb * weight(fb);
            let mut col = ca * weight(fa) + cb * weight(fb);
            let mut rest = s;
            for m in spectators.iter() {
                let d = rest % dim_local;
                rest /= dim_local;
                row += d * weight(*m);
                col += d * weight(*m);
            }
            out.set_entry(row, col, v.clone());
        }
    }
    out
}

/// Coefficients (ascending powers) of the monic polynomial with the given
/// roots.
pub fn poly_from_roots<F: Scalar>(roots: &[F]) -> Vec<F> {
    let mut coeffs = vec![F::one()];
    for r in roots {
        let mut next = vec![F::zero(); coeffs.len() + 1];
        for (k, a) in coeffs.iter().enumerate() {
            next[k + 1] = next[k + 1].clone() + a.clone();
            next[k] = next[k].clone() - a.clone() * r.clone();
        }
        coeffs = next;
    }
    coeffs
}

pub fn eval_poly<F: Scalar>(coeffs: &[F], u: &F) -> F {
    let mut acc = F::zero();
    for a in coeffs.iter().rev() {
        acc = acc * u.clone() + a.clone();
    }
    acc
}

/// Newton interpolation through (xs[k], ys[k]); returns coefficients in
/// ascending powers, length xs.len().
pub fn interpolate_scalar_poly<F: Scalar>(xs: &[F], ys: &[F]) -> Vec<F> {
    assert_eq!(xs.len(), ys.len());
    let m = xs.len();
    assert!(m > 0);
    let mut dd = ys.to_vec();
    let mut newton = vec![dd[0].clone()];
    for k in 1..m {
        for i in 0..(m - k) {
            let denom = xs[i + k].clone() - xs[i].clone();
            dd[i] = (dd[i + 1].clone() - dd[i].clone()) * denom.inv();
        }
        newton.push(dd[0].clone());
    }
    let mut coeffs = vec![F::zero(); m];
    let mut basis = vec![F::one()];
    for (k, nk) in newton.iter().enumerate() {
        for (d, b) in basis.iter().enumerate() {
            coeffs[d] = coeffs[d].clone() + nk.clone() * b.clone();
        }
        if k + 1 < m {
            let mut nb = vec![F::zero(); basis.len() + 1];
            for (d, b) in basis.iter().enumerate() {
                nb[d + 1] = nb[d + 1].clone() + b.clone();
                nb[d] = nb[d].clone() - b.clone() * xs[k].clone();
            }
            basis = nb;
        }
    }
    coeffs
}

/// Operator-valued Newton interpolation; same layout as the scalar case.
pub fn interpolate_operator_poly<F: Scalar>(
    xs: &[F],
    ys: &[QuantumOperator<F>],
) -> Vec<QuantumOperator<F>> {
    assert_eq!(xs.len(), ys.len());
    let m = xs.len();
    assert!(m > 0);
    let dim = ys[0].dim();
    let mut dd = ys.to_vec();
    let mut newton = vec![dd[0].clone()];
    for k in 1..m {
        for i in 0..(m - k) {
            let denom = (xs[i + k].clone() - xs[i].clone()).inv();
            dd[i] = dd[i + 1].sub(&dd[i]).scaled(&denom);
        }
        newton.push(dd[0].clone());
    }
    let mut coeffs = vec![QuantumOperator::zero(dim); m];
    let mut basis = vec![F::one()];
    for (k, nk) in newton.iter().enumerate() {
        for (d, b) in basis.iter().enumerate() {
            coeffs[d] = coeffs[d].add(&nk.scaled(b));
        }
        if k + 1 < m {
            let mut nb = vec![F::zero(); basis.len() + 1];
            for (d, b) in basis.iter().enumerate() {
                nb[d + 1] = nb[d + 1].clone() + b.clone();
                nb[d] = nb[d].clone() - b.clone() * xs[k].clone();
            }
            basis = nb;
        }
    }
    coeffs
}

type MonodromyMatrix<F> = Vec<Vec<QuantumOperator<F>>>;

/// An L-site chain with inhomogeneities ξ_1,…,ξ_L in the R-matrix
/// realization.
pub struct ChainModel<F: Scalar> {
    spec: AlgebraSpec,
    c: F,
    inhoms: Vec<F>,
    vacuum_idx: usize,
    mono_cache: RefCell<HashMap<F::Key, Rc<MonodromyMatrix<F>>>>,
}

impl<F: Scalar> ChainModel<F> {
    pub fn new(spec: AlgebraSpec, c: F, inhoms: Vec<F>) -> Result<Self, ModelError> {
        if c.is_zero() {
            return Err(ModelError::ZeroCoupling);
        }
        if inhoms.is_empty() {
            return Err(ModelError::EmptyChain);
        }
        if !spec.is_gl() {
            let ck = c.clone() * F::from_q64(spec.kappa());
            for j in 0..inhoms.len() {
                for k in 0..inhoms.len() {
                    if j == k {
                        continue;
                    }
                    let diff = inhoms[j].clone() - inhoms[k].clone();
                    if scalar_vanishes(&diff) {
                        return Err(ModelError::DuplicateInhomogeneity);
                    }
                    if scalar_vanishes(&(diff + ck.clone())) {
                        return Err(ModelError::ShiftCollision);
                    }
                }
            }
        }
        let mut model = ChainModel {
            spec,
            c,
            inhoms,
            vacuum_idx: 0,
            mono_cache: RefCell::new(HashMap::new()),
        };
        model.vacuum_idx = model.search_vacuum()?;
        Ok(model)
    }

    pub fn sites(&self) -> usize {
        self.inhoms.len()
    }

    pub fn inhomogeneities(&self) -> &[F] {
        &self.inhoms
    }

    pub fn vacuum_index(&self) -> usize {
        self.vacuum_idx
    }

    /// Roots of the common denominator of all monodromy entries.
    fn pole_locations(&self) -> Vec<F> {
        let mut poles = self.inhoms.clone();
        if !self.spec.is_gl() {
            let ck = self.c.clone() * F::from_q64(self.spec.kappa());
            for xi in self.inhoms.iter() {
                poles.push(xi.clone() - ck.clone());
            }
        }
        poles
    }

    /// Single-site block W_{i,j}(u, ξ) of the R-matrix viewed as a matrix
    /// over the auxiliary indices with site-operator entries.
    fn site_block(&self, site: usize, u: &F) -> MonodromyMatrix<F> {
        let spec = &self.spec;
        let n = spec.site_dim();
        let xi = &self.inhoms[site];
        let gp = self.c.clone() * (u.clone() - xi.clone()).inv();
        let qp = if spec.is_gl() {
            F::zero()
        } else {
            let shifted = u.clone() - xi.clone() + self.c.clone() * F::from_q64(spec.kappa());
            self.c.clone() * shifted.inv()
        };
        let mut block = Vec::with_capacity(n);
        for pi in 0..n {
            let i = spec.pos_index(pi);
            let mut row = Vec::with_capacity(n);
            for pj in 0..n {
                let j = spec.pos_index(pj);
                let mut w = if i == j {
                    QuantumOperator::identity(n)
                } else {
                    QuantumOperator::zero(n)
                };
                w.add_entry(pj, pi, gp.clone());
                if !spec.is_gl() {
                    let s = spec.eps_local(i) * spec.eps_local(j);
                    if s != 0 {
                        w.add_entry(
                            spec.index_pos(spec.prime(i)),
                            spec.index_pos(spec.prime(j)),
                            -(qp.clone() * F::from_int(s)),
                        );
                    }
                }
                row.push(w);
            }
            block.push(row);
        }
        block
    }

    /// Full matrix of monodromy entries at u, cached per spectral point.
    /// Entry [pi][pj] is T_{i,j}(u) with i, j read off by position.
    pub fn monodromy_matrix(&self, u: &F) -> Rc<MonodromyMatrix<F>> {
        if let Some(hit) = self.mono_cache.borrow().get(&u.key()) {
            return hit.clone();
        }
        let n = self.spec.site_dim();
        let mut cur = self.site_block(0, u);
        for site in 1..self.inhoms.len() {
            let w = self.site_block(site, u);
            let dim = cur[0][0].dim();
            let mut next =
                vec![vec![QuantumOperator::zero(n * dim); n]; n];
            for (pi, wrow) in w.iter().enumerate() {
                for pj in 0..n {
                    let mut acc = QuantumOperator::zero(n * dim);
                    for (pk, wik) in wrow.iter().enumerate() {
                        if wik.is_zero() || cur[pk][pj].is_zero() {
                            continue;
                        }
                        acc = acc.add(&wik.kron(&cur[pk][pj]));
                    }
                    next[pi][pj] = acc;
                }
            }
            cur = next;
        }
        let rc = Rc::new(cur);
        self.mono_cache
            .borrow_mut()
            .insert(u.key(), rc.clone());
        rc
    }

    /// Distinct regular integer-spaced probe points for interpolation.
    fn interpolation_probes(&self, count: usize) -> Vec<F> {
        let mut probes = Vec::with_capacity(count);
        let mut k: i64 = 0;
        while probes.len() < count {
            let cand = F::from_int(k);
            if self.is_regular_point(&cand) {
                probes.push(cand);
            }
            k += 1;
            assert!(k < 10_000, "probe scan exhausted");
        }
        probes
    }

    fn search_vacuum(&self) -> Result<usize, ModelError> {
        let spec = &self.spec;
        let n = spec.site_dim();
        let degree = self.inhoms.len() * if spec.is_gl() { 1 } else { 2 };
        let probes = self.interpolation_probes(degree + 1);
        let mats: Vec<_> = probes.iter().map(|u| self.monodromy_matrix(u)).collect();
        let dim = self.dim();
        'candidates: for b in 0..dim {
            for mat in mats.iter() {
                for pi in 0..n {
                    for pj in 0..n {
                        let op = &mat[pi][pj];
                        for (r, c, v) in op.entries() {
                            if c != b {
                                continue;
                            }
                            let off_diagonal_hit = if pi > pj {
                                true
                            } else if pi == pj {
                                r != b
                            } else {
                                false
                            };
                            if off_diagonal_hit && !scalar_vanishes(v) {
                                continue 'candidates;
                            }
                        }
                    }
                }
            }
            return Ok(b);
        }
        Err(ModelError::VacuumNotFound)
    }

    /// Scalar zero mode of the vacuum eigenvalue λ_i(u).
    pub fn lambda_zero_mode(&self, i: i64) -> F {
        let roots = self.pole_locations();
        let d = roots.len();
        let probes = self.interpolation_probes(d + 1);
        let den = poly_from_roots(&roots);
        let samples: Vec<F> = probes
            .iter()
            .map(|u| self.lambda(i, u) * eval_poly(&den, u))
            .collect();
        let coeffs = interpolate_scalar_poly(&probes, &samples);
        (coeffs[d - 1].clone() - den[d - 1].clone()) * self.c.clone().inv()
    }

    /// Cartan operator attached to the node a: the centered diagonal zero
    /// mode annihilating the vacuum.
    pub fn cartan_operator(&self, a: i64) -> QuantumOperator<F> {
        let diag = self.zero_mode(a + 1, a + 1);
        let shift = self.lambda_zero_mode(a + 1);
        diag.sub(&QuantumOperator::identity(self.dim()).scaled(&shift))
    }

    /// Color operator counting Bethe parameters of the node a.
    pub fn color_operator(&self, a: i64) -> QuantumOperator<F> {
        let spec = &self.spec;
        assert!(spec.contains_node(a));
        let mut acc = QuantumOperator::zero(self.dim());
        let lo = a + spec.nu(a) - 1;
        for b in lo..=(spec.rank() - 1) {
            acc = acc.add(&self.cartan_operator(b));
        }
        let d = spec.frak_d(a);
        if d != 0 {
            let sgn = if a % 2 == 0 { 1 } else { -1 };
            let coeff = (spec.phi_g() - 1) * sgn * d;
            if coeff != 0 {
                acc = acc.add(&self.cartan_operator(0).scaled(&F::from_int(coeff)));
            }
        }
        acc.scaled(&F::from_ratio(1, 1 + d))
    }
}

/// Weight q_a(i) of the index i under the color operator of the node a.
pub fn color_weight(spec: &AlgebraSpec, a: i64, i: i64) -> Rational64 {
    let mut num = 0i64;
    for b in (a + spec.nu(a) - 1)..=(spec.rank() - 1) {
        if b + 1 == i {
            num += 1;
        }
    }
    if spec.phi_g() == 2 && i == 1 {
        let ap = spec.prime(a);
        num += i64::from(ap == i) - i64::from(a == i);
    }
    Rational64::new(num, 1 + spec.frak_d(a))
}

fn scalar_vanishes<F: Scalar>(x: &F) -> bool {
    if F::EXACT {
        x.is_zero()
    } else {
        x.abs_f64() <= 1e-10
    }
}

impl<F: Scalar> Model<F> for ChainModel<F> {
    fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    fn c(&self) -> F {
        self.c.clone()
    }

    fn dim(&self) -> usize {
        self.spec.site_dim().pow(self.inhoms.len() as u32)
    }

    fn vacuum(&self) -> StateVector<F> {
        StateVector::basis(self.dim(), self.vacuum_idx)
    }

    fn lambda(&self, i: i64, u: &F) -> F {
        let p = self.spec.index_pos(i);
        self.monodromy_matrix(u)[p][p].entry(self.vacuum_idx, self.vacuum_idx)
    }

    fn monodromy_entry(&self, i: i64, j: i64, u: &F) -> QuantumOperator<F> {
        let mat = self.monodromy_matrix(u);
        mat[self.spec.index_pos(i)][self.spec.index_pos(j)].clone()
    }

    fn apply_entry(&self, i: i64, j: i64, u: &F, v: &StateVector<F>) -> StateVector<F> {
        let mat = self.monodromy_matrix(u);
        mat[self.spec.index_pos(i)][self.spec.index_pos(j)].apply(v)
    }

    fn zero_mode(&self, i: i64, j: i64) -> QuantumOperator<F> {
        let roots = self.pole_locations();
        let d = roots.len();
        let probes = self.interpolation_probes(d + 1);
        let den = poly_from_roots(&roots);
        let samples: Vec<QuantumOperator<F>> = probes
            .iter()
            .map(|u| self.monodromy_entry(i, j, u).scaled(&eval_poly(&den, u)))
            .collect();
        let coeffs = interpolate_operator_poly(&probes, &samples);
        let mut top = coeffs[d - 1].clone();
        if i == j {
            top = top.sub(&QuantumOperator::identity(self.dim()).scaled(&den[d - 1]));
        }
        top.scaled(&self.c.clone().inv())
    }

    fn is_regular_point(&self, u: &F) -> bool {
        self.pole_locations()
            .iter()
            .all(|p| !scalar_vanishes(&(u.clone() - p.clone())))
    }

    fn describe(&self) -> String {
        format!(
            "{} L={}",
            self.spec.kind().label(self.spec.rank()),
            self.inhoms.len()
        )
    }
}

/// Picks `count` regular points whose pairwise differences avoid both R
/// matrix poles (0 and ±cκ scaled by the coupling).
pub fn pick_probe_points<F: Scalar, M: Model<F> + ?Sized>(model: &M, count: usize) -> Vec<F> {
    let c = model.c();
    let ck = if model.spec().is_gl() {
        None
    } else {
        Some(c.clone() * F::from_q64(model.spec().kappa()))
    };
    let mut picked: Vec<F> = Vec::with_capacity(count);
    let mut j: i64 = 0;
    while picked.len() < count {
        assert!(j < 10_000, "probe scan exhausted");
        let cand = c.clone() * (F::from_int(j) + F::from_ratio(1, 7));
        j += 1;
        if !model.is_regular_point(&cand) {
            continue;
        }
        let ok = picked.iter().all(|p| {
            let diff = cand.clone() - p.clone();
            if scalar_vanishes(&diff) {
                return false;
            }
            match &ck {
                Some(s) => {
                    !scalar_vanishes(&(diff.clone() + s.clone()))
                        && !scalar_vanishes(&(diff.clone() - s.clone()))
                }
                None => true,
            }
        });
        if ok {
            picked.push(cand);
        }
    }
    picked
}

fn op_zero_check<F: Scalar>(diff: &QuantumOperator<F>, tol: f64) -> (bool, f64) {
    let res = diff.max_abs();
    let ok = if F::EXACT { diff.is_zero() } else { res <= tol };
    (ok, res)
}

fn push_zero_record<F: Scalar>(
    report: &mut VerificationReport,
    id: &str,
    context: &str,
    worst: &QuantumOperator<F>,
    failures: usize,
    cases: usize,
    tol: f64,
    started: Instant,
) {
    let (_, res) = op_zero_check(worst, tol);
    let passed = failures == 0;
    let mut rec = if passed {
        CheckRecord::pass(id, context)
    } else {
        CheckRecord::fail(
            id,
            context,
            &format!("{failures} of {cases} instances violated the identity"),
        )
    };
    rec.residual = Some(res);
    rec.detail
        .get_or_insert_with(|| format!("{cases} instances checked"));
    rec.time_ms = started.elapsed().as_millis() as u64;
    report.push(rec);
}

/// Verifies the Yang-Baxter identity, the full set of bilinear exchange
/// relations, the zero-mode commutators, the Cartan/color gradings, and
/// (away from gl) the crossing symmetry of the monodromy, all at fixed
/// probe points. `tol` only matters for the float backend; the exact
/// backend requires literal zeros.
pub fn check_exchange_relations<F: Scalar>(
    model: &ChainModel<F>,
    tol: f64,
) -> VerificationReport {
    let spec = model.spec().clone();
    let n = spec.site_dim();
    let ctx = model.describe();
    let mut report = VerificationReport::new();
    let c = model.c();

    // Yang-Baxter identity on the three-fold product of local spaces.
    {
        let t0 = Instant::now();
        let pts = pick_probe_points(model, 3);
        let (u, v, w) = (&pts[0], &pts[1], &pts[2]);
        let r12 = embed_factor_pair(n, 3, 0, 1, &r_matrix(&spec, &c, u, v));
        let r13 = embed_factor_pair(n, 3, 0, 2, &r_matrix(&spec, &c, u, w));
        let r23 = embed_factor_pair(n, 3, 1, 2, &r_matrix(&spec, &c, v, w));
        let lhs = r12.compose(&r13).compose(&r23);
        let rhs = r23.compose(&r13).compose(&r12);
        let diff = lhs.sub(&rhs);
        let (ok, _) = op_zero_check(&diff, tol);
        push_zero_record(
            &mut report,
            "algebra/ybe",
            &ctx,
            &diff,
            usize::from(!ok),
            1,
            tol,
            t0,
        );
    }

    // Bilinear exchange relations for every quadruple of entries.
    {
        let t0 = Instant::now();
        let pts = pick_probe_points(model, 2);
        let (u, v) = (&pts[0], &pts[1]);
        let tu = model.monodromy_matrix(u);
        let tv = model.monodromy_matrix(v);
        let flat = |a: usize, b: usize, e: usize, f: usize| ((a * n + b) * n + e) * n + f;
        let mut uv: Vec<Option<QuantumOperator<F>>> = vec![None; n * n * n * n];
        let mut vu: Vec<Option<QuantumOperator<F>>> = vec![None; n * n * n * n];
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    for f in 0..n {
                        uv[flat(a, b, e, f)] = Some(tu[a][b].compose(&tv[e][f]));
                        vu[flat(a, b, e, f)] = Some(tv[a][b].compose(&tu[e][f]));
                    }
                }
            }
        }
        let guv = c.clone() * (u.clone() - v.clone()).inv();
        let gq = if spec.is_gl() {
            F::zero()
        } else {
            let den = u.clone() - v.clone() + c.clone() * F::from_q64(spec.kappa());
            c.clone() * den.inv()
        };
        let mut failures = 0usize;
        let mut cases = 0usize;
        let mut worst = QuantumOperator::zero(model.dim());
        let mut worst_res = -1.0f64;
        for i in spec.indices() {
            for j in spec.indices() {
                for k in spec.indices() {
                    for l in spec.indices() {
                        let (pi, pj) = (spec.index_pos(i), spec.index_pos(j));
                        let (pk, pl) = (spec.index_pos(k), spec.index_pos(l));
                        let mut diff = uv[flat(pi, pj, pk, pl)]
                            .as_ref()
                            .unwrap()
                            .sub(vu[flat(pk, pl, pi, pj)].as_ref().unwrap());
                        let first = vu[flat(pk, pj, pi, pl)]
                            .as_ref()
                            .unwrap()
                            .sub(uv[flat(pk, pj, pi, pl)].as_ref().unwrap());
                        diff = diff.sub(&first.scaled(&guv));
                        if !spec.is_gl() {
                            let mut tail = QuantumOperator::zero(model.dim());
                            if k == spec.prime(i) {
                                let ei = spec.eps_local(i);
                                for p in spec.indices() {
                                    let co = spec.eps_local(p) * ei;
                                    if co == 0 {
                                        continue;
                                    }
                                    let (pp, ppp) =
                                        (spec.index_pos(p), spec.index_pos(spec.prime(p)));
                                    tail = tail.add(
                                        &uv[flat(pp, pj, ppp, pl)]
                                            .as_ref()
                                            .unwrap()
                                            .scaled(&F::from_int(co)),
                                    );
                                }
                            }
                            if l == spec.prime(j) {
                                let ej = spec.eps_local(j);
                                for p in spec.indices() {
                                    let co = spec.eps_local(p) * ej;
                                    if co == 0 {
                                        continue;
                                    }
                                    let (pp, ppp) =
                                        (spec.index_pos(p), spec.index_pos(spec.prime(p)));
                                    tail = tail.sub(
                                        &vu[flat(pk, ppp, pi, pp)]
                                            .as_ref()
                                            .unwrap()
                                            .scaled(&F::from_int(co)),
                                    );
                                }
                            }
                            diff = diff.sub(&tail.scaled(&gq));
                        }
                        cases += 1;
                        let (ok, res) = op_zero_check(&diff, tol);
                        if !ok {
                            failures += 1;
                        }
                        if res > worst_res {
                            worst_res = res;
                            worst = diff;
                        }
                    }
                }
            }
        }
        push_zero_record(
            &mut report,
            "algebra/rtt",
            &ctx,
            &worst,
            failures,
            cases,
            tol,
            t0,
        );
    }

    // Zero-mode commutators in their per-algebra form, for every simple
    // root node against every monodromy entry.
    {
        let t0 = Instant::now();
        let z = pick_probe_points(model, 1).pop().unwrap();
        let tz = model.monodromy_matrix(&z);
        let entry = |i: i64, j: i64| -> QuantumOperator<F> {
            tz[spec.index_pos(i)][spec.index_pos(j)].clone()
        };
        let mut failures = 0usize;
        let mut cases = 0usize;
        let mut worst = QuantumOperator::zero(model.dim());
        let mut worst_res = -1.0f64;
        for a in spec.nodes() {
            let ta = model.simple_root_zero_mode(a);
            for i in spec.indices() {
                for j in spec.indices() {
                    let tij = entry(i, j);
                    let lhs = ta.compose(&tij).sub(&tij.compose(&ta));
                    let mut rhs = QuantumOperator::zero(model.dim());
                    let nu = spec.nu(a);
                    let mut add_term = |coeff: i64, ii: i64, jj: i64| {
                        if coeff == 0 {
                            return;
                        }
                        debug_assert!(spec.contains_index(ii) && spec.contains_index(jj));
                        rhs = rhs.add(&entry(ii, jj).scaled(&F::from_int(coeff)));
                    };
                    use crate::algebra_spec::AlgebraKind::*;
                    match spec.kind() {
                        Gl => {
                            add_term(i64::from(a == j - 1), i, j - 1);
                            add_term(-i64::from(a == i), i + 1, j);
                        }
                        OOdd => {
                            add_term(
                                i64::from(a == j - 1) - i64::from(a == -j),
                                i,
                                j - 1,
                            );
                            add_term(
                                -(i64::from(a == i) - i64::from(a == -i - 1)),
                                i + 1,
                                j,
                            );
                        }
                        Sp => {
                            let s = if a == 0 { -1 } else { 1 };
                            add_term(
                                i64::from(a == j - 1) - s * i64::from(a == -j + 1),
                                i,
                                j - 1,
                            );
                            add_term(
                                -(i64::from(a == i) - s * i64::from(a == -i)),
                                i + 1,
                                j,
                            );
                        }
                        OEven => {
                            add_term(
                                i64::from(a == j - nu) - i64::from(a == -j + 1),
                                i,
                                j - nu,
                            );
                            add_term(
                                -(i64::from(a == i) - i64::from(a == -i + 1 - nu)),
                                i + nu,
                                j,
                            );
                        }
                    }
                    let diff = lhs.sub(&rhs);
                    cases += 1;
                    let (ok, res) = op_zero_check(&diff, tol);
                    if !ok {
                        failures += 1;
                    }
                    if res > worst_res {
                        worst_res = res;
                        worst = diff;
                    }
                }
            }
        }
        push_zero_record(
            &mut report,
            "algebra/zero-mode-simple-root",
            &ctx,
            &worst,
            failures,
            cases,
            tol,
            t0,
        );
    }

    // Cartan grading: centered diagonal zero modes act diagonally in the
    // adjoint representation on monodromy entries.
    {
        let t0 = Instant::now();
        let z = pick_probe_points(model, 1).pop().unwrap();
        let eps2 = spec.eps_g() * spec.eps_g();
        let mut failures = 0usize;
        let mut cases = 0usize;
        let mut worst = QuantumOperator::zero(model.dim());
        let mut worst_res = -1.0f64;
        for a in spec.nodes() {
            let ka = model.cartan_operator(a);
            for i in spec.indices() {
                for j in spec.indices() {
                    let tij = model.monodromy_entry(i, j, &z);
                    let lhs = ka.compose(&tij).sub(&tij.compose(&ka));
                    let mut coeff = i64::from(a + 1 == j) - i64::from(a + 1 == i);
                    if !spec.is_gl() {
                        coeff -= eps2
                            * (i64::from(a + 1 == spec.prime(j))
                                - i64::from(a + 1 == spec.prime(i)));
                    }
                    let diff = lhs.sub(&tij.scaled(&F::from_int(coeff)));
                    cases += 1;
                    let (ok, res) = op_zero_check(&diff, tol);
                    if !ok {
                        failures += 1;
                    }
                    if res > worst_res {
                        worst_res = res;
                        worst = diff;
                    }
                }
            }
        }
        push_zero_record(
            &mut report,
            "algebra/cartan-grading",
            &ctx,
            &worst,
            failures,
            cases,
            tol,
            t0,
        );
    }

    // Color grading with rational weights.
    {
        let t0 = Instant::now();
        let z = pick_probe_points(model, 1).pop().unwrap();
        let eps2 = spec.eps_g() * spec.eps_g();
        let mut failures = 0usize;
        let mut cases = 0usize;
        let mut worst = QuantumOperator::zero(model.dim());
        let mut worst_res = -1.0f64;
        for a in spec.nodes() {
            let qa = model.color_operator(a);
            for i in spec.indices() {
                for j in spec.indices() {
                    let tij = model.monodromy_entry(i, j, &z);
                    let lhs = qa.compose(&tij).sub(&tij.compose(&qa));
                    let mut weight = color_weight(&spec, a, j) - color_weight(&spec, a, i);
                    if !spec.is_gl() && eps2 != 0 {
                        let wp = color_weight(&spec, a, spec.prime(j))
                            - color_weight(&spec, a, spec.prime(i));
                        weight -= wp * Rational64::new(eps2, 1);
                    }
                    let diff = lhs.sub(&tij.scaled(&F::from_q64(weight)));
                    cases += 1;
                    let (ok, res) = op_zero_check(&diff, tol);
                    if !ok {
                        failures += 1;
                    }
                    if res > worst_res {
                        worst_res = res;
                        worst = diff;
                    }
                }
            }
        }
        push_zero_record(
            &mut report,
            "algebra/color-grading",
            &ctx,
            &worst,
            failures,
            cases,
            tol,
            t0,
        );
    }

    // Crossing symmetry: the sign-dressed transpose at the shifted point
    // inverts the monodromy up to a scalar, on both sides.
    if !spec.is_gl() {
        let t0 = Instant::now();
        let u = pick_probe_points(model, 1).pop().unwrap();
        let ck = c.clone() * F::from_q64(spec.kappa());
        let us = u.clone() - ck;
        let tu = model.monodromy_matrix(&u);
        let ts = model.monodromy_matrix(&us);
        let vac = model.vacuum_index();
        let at = |m: &MonodromyMatrix<F>, i: i64, j: i64| {
            m[spec.index_pos(i)][spec.index_pos(j)].clone()
        };
        let mut s1 = vec![vec![QuantumOperator::zero(model.dim()); n]; n];
        let mut s2 = vec![vec![QuantumOperator::zero(model.dim()); n]; n];
        for i in spec.indices() {
            for j in spec.indices() {
                let (pi, pj) = (spec.index_pos(i), spec.index_pos(j));
                for k in spec.indices() {
                    let s1c = spec.eps_local(i) * spec.eps_local(k);
                    if s1c != 0 {
                        let term = at(&ts, spec.prime(k), spec.prime(i))
                            .compose(&at(&tu, k, j))
                            .scaled(&F::from_int(s1c));
                        s1[pi][pj] = s1[pi][pj].add(&term);
                    }
                    let s2c = spec.eps_local(k) * spec.eps_local(j);
                    if s2c != 0 {
                        let term = at(&tu, i, k)
                            .compose(&at(&ts, spec.prime(j), spec.prime(k)))
                            .scaled(&F::from_int(s2c));
                        s2[pi][pj] = s2[pi][pj].add(&term);
                    }
                }
            }
        }
        let z1 = s1[0][0].entry(vac, vac);
        let z2 = s2[0][0].entry(vac, vac);
        let mut failures = 0usize;
        let mut cases = 0usize;
        let mut worst = QuantumOperator::zero(model.dim());
        let mut worst_res = -1.0f64;
        for pi in 0..n {
            for pj in 0..n {
                for (mat, zval) in [(&s1, &z1), (&s2, &z2)] {
                    let mut diff = mat[pi][pj].clone();
                    if pi == pj {
                        diff = diff
                            .sub(&QuantumOperator::identity(model.dim()).scaled(zval));
                    }
                    cases += 1;
                    let (ok, res) = op_zero_check(&diff, tol);
                    if !ok {
                        failures += 1;
                    }
                    if res > worst_res {
                        worst_res = res;
                        worst = diff;
                    }
                }
            }
        }
        let (_, res) = op_zero_check(&worst, tol);
        let passed = failures == 0;
        let mut rec = if passed {
            CheckRecord::pass("algebra/crossing-symmetry", &ctx)
        } else {
            CheckRecord::fail(
                "algebra/crossing-symmetry",
                &ctx,
                &format!("{failures} of {cases} blocks violated the identity"),
            )
        };
        rec.residual = Some(res);
        rec.detail = Some(format!(
            "central values z1={} z2={}",
            z1.report_string(),
            z2.report_string()
        ));
        rec.time_ms = t0.elapsed().as_millis() as u64;
        report.push(rec);
    }

    // Vacuum structure: record the located basis state and its eigenvalues.
    {
        let t0 = Instant::now();
        let u = pick_probe_points(model, 1).pop().unwrap();
        let lam: Vec<String> = spec
            .indices()
            .map(|i| format!("λ_{i}={}", model.lambda(i, &u).report_string()))
            .collect();
        let mut rec = CheckRecord::pass("model/vacuum", &ctx);
        rec.detail = Some(format!(
            "basis index {}; {}",
            model.vacuum_index(),
            lam.join(" ")
        ));
        rec.time_ms = t0.elapsed().as_millis() as u64;
        report.push(rec);
    }

    report.sort();
    report
}
