//! Rational-function kit for the nested Bethe ansatz.
//!
//! Everything scalar lives here: the pole functions g, h, f attached to the
//! R-matrix, their node-decorated variants, set-broadcast products, the
//! shifted arguments z_s, the psi/phi/mu weight functions, the cardinality
//! tables that say how many parameters of each color a partition subset
//! holds, the explicit subset layouts for the diagonal action, and the
//! coefficient functions (omega, xi, upsilon) that multiply Bethe vectors in
//! action, recurrence, and diagonal-action formulas.
//!
//! Conventions used throughout: a "color map" sends a color s to the list of
//! Bethe parameters of that color; a missing color is an empty set; every
//! product over an empty set is 1. Colors run over the simple-root labels
//! J of the algebra, and the primed index is i' = xi - i.

use std::collections::BTreeMap;
use std::slice;

use itertools::Itertools;
use num::rational::Rational64;
use thiserror::Error;

use crate::algebra_spec::{sigma, AlgebraKind, AlgebraSpec};
use crate::tensor_linalg::Scalar;

/// Float dedup tolerance: two complex parameters closer than this are
/// treated as the same point when validating a Bethe set.
pub const DEDUP_TOL: f64 = 1e-7;

/// Parameters of one color, keyed by color label.
pub type ColorMap<F> = BTreeMap<i64, Vec<F>>;

/// Subset cardinalities per color.
pub type CardMap = BTreeMap<i64, usize>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("color {0} does not label a simple root of this algebra")]
    UnknownColor(i64),
    #[error("coinciding Bethe parameters within color {0}")]
    DuplicateParameter(i64),
    #[error("parameter extension step ({0},{1}) is not defined for this algebra")]
    UndefinedStep(i64, i64),
}

/// The parameters of the color-s set, or an empty slice if the color is
/// absent from the map.
pub fn color_slice<F>(map: &ColorMap<F>, s: i64) -> &[F] {
    map.get(&s).map(Vec::as_slice).unwrap_or(&[])
}

/// Total number of parameters across all colors.
pub fn total_len<F>(map: &ColorMap<F>) -> usize {
    map.values().map(Vec::len).sum()
}

fn push_color<F>(map: &mut ColorMap<F>, s: i64, x: F) {
    map.entry(s).or_default().push(x);
}

/// Product of `alpha(s, x)` over every parameter x of every color s.
pub fn alpha_product<F: Scalar>(map: &ColorMap<F>, alpha: &dyn Fn(i64, &F) -> F) -> F {
    let mut out = F::one();
    for (&s, xs) in map {
        for x in xs {
            out = out * alpha(s, x);
        }
    }
    out
}

/// A validated collection of Bethe parameters: one finite set per color,
/// colors restricted to the simple roots of the algebra, parameters within
/// a color pairwise distinct and stored in canonical order.
#[derive(Clone, Debug)]
pub struct BetheSets<F: Scalar> {
    spec: AlgebraSpec,
    sets: ColorMap<F>,
}

impl<F: Scalar> BetheSets<F> {
    pub fn new(spec: &AlgebraSpec, sets: ColorMap<F>) -> Result<Self, KernelError> {
        let mut clean: ColorMap<F> = ColorMap::new();
        for (s, mut xs) in sets {
            if xs.is_empty() {
                continue;
            }
            if !spec.contains_node(s) {
                return Err(KernelError::UnknownColor(s));
            }
            xs.sort_by(|a, b| a.key().cmp(&b.key()));
            for pair in xs.windows(2) {
                let same = if F::EXACT {
                    pair[0] == pair[1]
                } else {
                    (pair[0].clone() - pair[1].clone()).abs_f64() < DEDUP_TOL
                };
                if same {
                    return Err(KernelError::DuplicateParameter(s));
                }
            }
            clean.insert(s, xs);
        }
        Ok(BetheSets {
            spec: spec.clone(),
            sets: clean,
        })
    }

    pub fn empty(spec: &AlgebraSpec) -> Self {
        BetheSets {
            spec: spec.clone(),
            sets: ColorMap::new(),
        }
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn color(&self, s: i64) -> &[F] {
        color_slice(&self.sets, s)
    }

    pub fn cardinality(&self, s: i64) -> usize {
        self.color(s).len()
    }

    pub fn cardinalities(&self) -> CardMap {
        self.sets.iter().map(|(&s, xs)| (s, xs.len())).collect()
    }

    pub fn total(&self) -> usize {
        total_len(&self.sets)
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn as_map(&self) -> &ColorMap<F> {
        &self.sets
    }

    pub fn to_map(&self) -> ColorMap<F> {
        self.sets.clone()
    }

    /// A new collection with `x` adjoined to color s.
    pub fn with_inserted(&self, s: i64, x: F) -> Result<Self, KernelError> {
        let mut sets = self.sets.clone();
        push_color(&mut sets, s, x);
        Self::new(&self.spec, sets)
    }

    /// Splits off the canonically last parameter of color s, if any.
    pub fn split_last(&self, s: i64) -> Option<(F, Self)> {
        let xs = self.sets.get(&s)?;
        let x = xs.last()?.clone();
        let mut sets = self.sets.clone();
        {
            let v = sets.get_mut(&s).unwrap();
            v.pop();
            if v.is_empty() {
                sets.remove(&s);
            }
        }
        Some((
            x,
            BetheSets {
                spec: self.spec.clone(),
                sets,
            },
        ))
    }

    /// Canonical memoization key; equal collections give equal keys.
    pub fn memo_key(&self) -> Vec<(i64, Vec<F::Key>)> {
        self.sets
            .iter()
            .map(|(&s, xs)| (s, xs.iter().map(Scalar::key).collect()))
            .collect()
    }
}

/// One term of a partition sum: the ordered triple of subsets into which a
/// color map has been split.
#[derive(Clone, Debug)]
pub struct Partition3<F: Scalar> {
    pub sub_i: ColorMap<F>,
    pub sub_ii: ColorMap<F>,
    pub sub_iii: ColorMap<F>,
}

impl<F: Scalar> Partition3<F> {
    pub fn empty() -> Self {
        Partition3 {
            sub_i: ColorMap::new(),
            sub_ii: ColorMap::new(),
            sub_iii: ColorMap::new(),
        }
    }
}

/// All ways of splitting `full` into three subsets per color with the given
/// first- and third-subset cardinalities; the middle subset takes the rest.
/// Infeasible cardinalities give an empty list, i.e. an empty sum.
pub fn enumerate_partitions<F: Scalar>(
    full: &ColorMap<F>,
    card_i: &CardMap,
    card_iii: &CardMap,
) -> Vec<Partition3<F>> {
    let mut colors: Vec<i64> = full.keys().copied().collect();
    for (&s, &c) in card_i.iter().chain(card_iii.iter()) {
        if c > 0 && !full.contains_key(&s) {
            return Vec::new();
        }
        let _ = s;
    }
    colors.sort_unstable();

    // Per color, every admissible (I, III) index choice.
    let mut per_color: Vec<(i64, Vec<(Vec<F>, Vec<F>, Vec<F>)>)> = Vec::new();
    for &s in &colors {
        let xs = &full[&s];
        let ci = card_i.get(&s).copied().unwrap_or(0);
        let ciii = card_iii.get(&s).copied().unwrap_or(0);
        if ci + ciii > xs.len() {
            return Vec::new();
        }
        let mut options = Vec::new();
        for idx_i in (0..xs.len()).combinations(ci) {
            let rest: Vec<usize> = (0..xs.len()).filter(|p| !idx_i.contains(p)).collect();
            for idx_iii in rest.iter().copied().combinations(ciii) {
                let a: Vec<F> = idx_i.iter().map(|&p| xs[p].clone()).collect();
                let c: Vec<F> = idx_iii.iter().map(|&p| xs[p].clone()).collect();
                let b: Vec<F> = rest
                    .iter()
                    .copied()
                    .filter(|p| !idx_iii.contains(p))
                    .map(|p| xs[p].clone())
                    .collect();
                options.push((a, b, c));
            }
        }
        per_color.push((s, options));
    }

    let mut acc = vec![Partition3::empty()];
    for (s, options) in per_color {
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for base in &acc {
            for (a, b, c) in &options {
                let mut p = base.clone();
                if !a.is_empty() {
                    p.sub_i.insert(s, a.clone());
                }
                if !b.is_empty() {
                    p.sub_ii.insert(s, b.clone());
                }
                if !c.is_empty() {
                    p.sub_iii.insert(s, c.clone());
                }
                next.push(p);
            }
        }
        acc = next;
    }
    acc
}

/// Destination subset for a distinguished parameter in a diagonal-action
/// layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    SubI,
    SubII,
    SubIII,
}

fn mirror_part(p: Part) -> Part {
    match p {
        Part::SubI => Part::SubIII,
        Part::SubII => Part::SubII,
        Part::SubIII => Part::SubI,
    }
}

/// Where the distinguished parameters of one color go in a diagonal-action
/// term, and how many ordinary parameters of that color sit in the first
/// and third subsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColorLayout {
    /// Destination of the plain argument z.
    pub z_dest: Part,
    /// Destination of the shifted argument z_s; absent for colors below the
    /// shift threshold, whose extension contains z only.
    pub zs_dest: Option<Part>,
    /// Ordinary parameters of this color placed in the first subset.
    pub take_i: usize,
    /// Ordinary parameters of this color placed in the third subset.
    pub take_iii: usize,
}

/// Per-color layout of one diagonal-action term.
pub type DiagonalLayout = BTreeMap<i64, ColorLayout>;

/// How a parameter-extension step touches one color.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZExtension {
    /// The color receives the plain argument z.
    PlainZ,
    /// The color receives its shifted argument z_s.
    ShiftedZ,
    /// The color receives its full extension: z, and z_s where defined.
    Full,
}

/// Scalar engine bound to one algebra and one coupling constant.
#[derive(Clone, Debug)]
pub struct RfKernel<F: Scalar> {
    spec: AlgebraSpec,
    c: F,
}

impl<F: Scalar> RfKernel<F> {
    pub fn new(spec: &AlgebraSpec, c: F) -> Self {
        assert!(!c.is_zero(), "coupling constant must be nonzero");
        RfKernel {
            spec: spec.clone(),
            c,
        }
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn coupling(&self) -> &F {
        &self.c
    }

    fn d(&self, u: &F, v: &F) -> F {
        u.clone() - v.clone()
    }

    // ------------------------------------------------------------------
    // Elementary pole functions.
    // ------------------------------------------------------------------

    /// g(u,v) = c/(u-v).
    pub fn g(&self, u: &F, v: &F) -> F {
        self.c.clone() / self.d(u, v)
    }

    /// h(u,v) = (u-v+c)/c.
    pub fn h(&self, u: &F, v: &F) -> F {
        (self.d(u, v) + self.c.clone()) / self.c.clone()
    }

    /// f(u,v) = (u-v+c)/(u-v) = g(u,v) h(u,v).
    pub fn f(&self, u: &F, v: &F) -> F {
        (self.d(u, v) + self.c.clone()) / self.d(u, v)
    }

    /// gamma(u,v) = g(u,v)/h(v,u).
    pub fn gamma(&self, u: &F, v: &F) -> F {
        self.g(u, v) / self.h(v, u)
    }

    /// h_a(u,v) = (u - v + c G_aa/2)/c, with G the symmetrized Cartan form.
    pub fn h_node(&self, a: i64, u: &F, v: &F) -> F {
        let half_diag = F::from_ratio(self.spec.gram_diag(a), 2);
        (self.d(u, v) + self.c.clone() * half_diag) / self.c.clone()
    }

    /// f_a(u,v) = g(u,v) h_a(u,v).
    pub fn f_node(&self, a: i64, u: &F, v: &F) -> F {
        self.g(u, v) * self.h_node(a, u, v)
    }

    /// Same-color pair weight: g(u,v)/h_a(v,u) for a long or ordinary node,
    /// f_a(u,v) at a node with G_aa = 1.
    pub fn gamma_node(&self, a: i64, u: &F, v: &F) -> F {
        if self.spec.gram_diag(a) == 1 {
            self.f_node(a, u, v)
        } else {
            self.g(u, v) / self.h_node(a, v, u)
        }
    }

    // ------------------------------------------------------------------
    // Set broadcasts: products over all ordered pairs, empty set -> 1.
    // ------------------------------------------------------------------

    fn prod2(&self, xs: &[F], ys: &[F], f: impl Fn(&F, &F) -> F) -> F {
        let mut out = F::one();
        for x in xs {
            for y in ys {
                out = out * f(x, y);
            }
        }
        out
    }

    pub fn g_set(&self, xs: &[F], ys: &[F]) -> F {
        self.prod2(xs, ys, |x, y| self.g(x, y))
    }

    pub fn h_set(&self, xs: &[F], ys: &[F]) -> F {
        self.prod2(xs, ys, |x, y| self.h(x, y))
    }

    pub fn f_set(&self, xs: &[F], ys: &[F]) -> F {
        self.prod2(xs, ys, |x, y| self.f(x, y))
    }

    pub fn h_node_set(&self, a: i64, xs: &[F], ys: &[F]) -> F {
        self.prod2(xs, ys, |x, y| self.h_node(a, x, y))
    }

    pub fn f_node_set(&self, a: i64, xs: &[F], ys: &[F]) -> F {
        self.prod2(xs, ys, |x, y| self.f_node(a, x, y))
    }

    // ------------------------------------------------------------------
    // Color-decorated pair weights and omega products.
    // ------------------------------------------------------------------

    /// Pair weight between a parameter of color a (first argument) and one
    /// of color b (second argument). Same color gives the node weight,
    /// adjacent colors give a linear factor, non-adjacent colors give 1.
    pub fn gamma_bold(&self, a: i64, b: i64, u: &F, v: &F) -> F {
        if a == b {
            return self.gamma_node(a, u, v);
        }
        if self.spec.gram(a, b) == 0 {
            return F::one();
        }
        if b > a {
            (self.d(v, u) + self.c.clone() * F::from_int(self.spec.rho(a))) / self.c.clone()
        } else {
            self.d(u, v) / self.c.clone()
        }
    }

    pub fn gamma_bold_set(&self, a: i64, b: i64, xs: &[F], ys: &[F]) -> F {
        self.prod2(xs, ys, |x, y| self.gamma_bold(a, b, x, y))
    }

    /// Omega(X, Y): product of pair weights over all colors of X against
    /// all colors of Y.
    pub fn omega_pair(&self, x: &ColorMap<F>, y: &ColorMap<F>) -> F {
        let mut out = F::one();
        for (&a, xs) in x {
            for (&b, ys) in y {
                out = out * self.gamma_bold_set(a, b, xs, ys);
            }
        }
        out
    }

    /// Omega(A, B, C) = Omega(A,B) Omega(A,C) Omega(B,C).
    pub fn omega_triple(&self, a: &ColorMap<F>, b: &ColorMap<F>, c: &ColorMap<F>) -> F {
        self.omega_pair(a, b) * self.omega_pair(a, c) * self.omega_pair(b, c)
    }

    /// Right split-off weight for a single color-a parameter against the
    /// remaining sets.
    pub fn omega_r_color(&self, a: i64, x: &[F], rest: &ColorMap<F>) -> F {
        let mut out = F::one();
        for (&b, ys) in rest {
            out = out * self.gamma_bold_set(a, b, x, ys);
        }
        out
    }

    /// Left split-off weight: the remaining sets against a single color-a
    /// parameter.
    pub fn omega_l_color(&self, a: i64, rest: &ColorMap<F>, x: &[F]) -> F {
        let mut out = F::one();
        for (&b, ys) in rest {
            out = out * self.gamma_bold_set(b, a, ys, x);
        }
        out
    }

    /// Four-argument right weight used in nested products over consecutive
    /// colors: gamma between x and its own color y, times the neighbor
    /// factors h(hi,x)/g(x,lo).
    pub fn omega_r4(&self, x: &[F], y: &[F], lo: &[F], hi: &[F]) -> F {
        self.g_set(x, y) / self.h_set(y, x) * self.h_set(hi, x) / self.g_set(x, lo)
    }

    /// Four-argument left weight, mirror of [`Self::omega_r4`].
    pub fn omega_l4(&self, y: &[F], x: &[F], lo: &[F], hi: &[F]) -> F {
        self.g_set(y, x) / self.h_set(x, y) * self.h_set(x, lo) / self.g_set(hi, x)
    }

    /// On-shell ratio for one parameter x of color a against the rest of
    /// the sets: the value alpha_a(x) must take for the unwanted terms to
    /// cancel.
    pub fn bethe_rhs(&self, a: i64, x: &F, rest: &ColorMap<F>) -> F {
        let xs = slice::from_ref(x);
        self.omega_r_color(a, xs, rest) / self.omega_l_color(a, rest, xs)
    }

    // ------------------------------------------------------------------
    // Shifted arguments.
    // ------------------------------------------------------------------

    /// The shifted argument z_s: equal to z below the shift threshold,
    /// z - c(s + theta) from the threshold up.
    pub fn z_shift(&self, s: i64, z: &F) -> F {
        if self.spec.is_gl() || s < self.spec.phi_g() {
            return z.clone();
        }
        let step = Rational64::from_integer(s) + self.spec.theta();
        z.clone() - self.c.clone() * F::from_q64(step)
    }

    /// The extension z-bar_s of color s: {z} below the threshold,
    /// {z, z_s} from the threshold up. For a type-A algebra every color
    /// receives z only.
    pub fn z_bar(&self, s: i64, z: &F) -> Vec<F> {
        if self.spec.is_gl() || s < self.spec.phi_g() {
            vec![z.clone()]
        } else {
            vec![z.clone(), self.z_shift(s, z)]
        }
    }

    /// Extended sets: every color of the algebra with its extension
    /// adjoined.
    pub fn extended_sets(&self, z: &F, t: &ColorMap<F>) -> ColorMap<F> {
        let mut out = ColorMap::new();
        for s in self.spec.nodes() {
            let mut xs = t.get(&s).cloned().unwrap_or_default();
            xs.extend(self.z_bar(s, z));
            out.insert(s, xs);
        }
        out
    }

    // ------------------------------------------------------------------
    // psi / phi / mu weight functions.
    // ------------------------------------------------------------------

    fn sign_of(&self, parity: usize) -> F {
        if parity % 2 == 0 {
            F::one()
        } else {
            -F::one()
        }
    }

    /// psi_l(z; t): left weight of the entry row l.
    pub fn psi(&self, ell: i64, z: &F, t: &ColorMap<F>) -> F {
        assert!(
            self.spec.contains_index(ell),
            "psi index {ell} outside the index window"
        );
        let zz = slice::from_ref(z);
        match self.spec.kind() {
            AlgebraKind::Gl => {
                self.h_set(color_slice(t, ell), zz) * self.g_set(zz, color_slice(t, ell - 1))
            }
            AlgebraKind::OOdd => {
                if ell >= 1 {
                    self.h_set(color_slice(t, ell), zz) * self.g_set(zz, color_slice(t, ell - 1))
                } else if ell == 0 {
                    let z0 = self.z_shift(0, z);
                    self.g_set(slice::from_ref(&z0), color_slice(t, 0))
                } else {
                    let lp = -ell;
                    let zp = self.z_shift(lp, z);
                    let zp1 = self.z_shift(lp - 1, z);
                    let parity = color_slice(t, lp).len() + color_slice(t, lp - 1).len();
                    self.sign_of(parity)
                        * self.g_set(slice::from_ref(&zp), color_slice(t, lp))
                        * self.h_set(color_slice(t, lp - 1), slice::from_ref(&zp1))
                }
            }
            AlgebraKind::Sp => {
                if ell >= 1 {
                    self.h_set(color_slice(t, ell), zz) * self.g_set(zz, color_slice(t, ell - 1))
                } else {
                    let lp = 1 - ell;
                    let zp = self.z_shift(lp, z);
                    let zp1 = self.z_shift(lp - 1, z);
                    let parity = color_slice(t, lp).len() + color_slice(t, lp - 1).len();
                    self.sign_of(parity)
                        * self.g_set(slice::from_ref(&zp), color_slice(t, lp))
                        * self.h_node_set(lp - 1, color_slice(t, lp - 1), slice::from_ref(&zp1))
                }
            }
            AlgebraKind::OEven => {
                if ell >= 2 {
                    let mut out = self.h_set(color_slice(t, ell), zz);
                    for q in 1..=self.spec.nu(ell - 2) {
                        out = out * self.g_set(zz, color_slice(t, ell - q));
                    }
                    out
                } else if ell >= 0 {
                    let lp = 1 - ell;
                    let parity = color_slice(t, 0).len() + color_slice(t, 1).len();
                    self.sign_of(parity)
                        * self.g_set(zz, color_slice(t, lp))
                        * self.h_set(color_slice(t, ell), zz)
                } else {
                    let lp = 1 - ell;
                    let zp = self.z_shift(lp, z);
                    let mut out = self.sign_of(color_slice(t, lp).len())
                        * self.g_set(slice::from_ref(&zp), color_slice(t, lp));
                    for q in 1..=self.spec.nu(lp - 2) {
                        let zq = self.z_shift(lp - q, z);
                        out = out
                            * self.sign_of(color_slice(t, lp - q).len())
                            * self.h_set(color_slice(t, lp - q), slice::from_ref(&zq));
                    }
                    out
                }
            }
        }
    }

    /// phi_l(z; t): right weight of the entry column l.
    pub fn phi(&self, ell: i64, z: &F, t: &ColorMap<F>) -> F {
        assert!(
            self.spec.contains_index(ell),
            "phi index {ell} outside the index window"
        );
        let zz = slice::from_ref(z);
        match self.spec.kind() {
            AlgebraKind::Gl => {
                self.g_set(color_slice(t, ell), zz) * self.h_set(zz, color_slice(t, ell - 1))
            }
            AlgebraKind::OOdd => {
                if ell >= 1 {
                    self.g_set(color_slice(t, ell), zz) * self.h_set(zz, color_slice(t, ell - 1))
                } else if ell == 0 {
                    self.g_set(zz, color_slice(t, 0))
                } else {
                    let lp = -ell;
                    let zp = self.z_shift(lp, z);
                    let zp1 = self.z_shift(lp - 1, z);
                    let parity = color_slice(t, lp).len() + color_slice(t, lp - 1).len();
                    self.sign_of(parity)
                        * self.h_set(slice::from_ref(&zp), color_slice(t, lp))
                        * self.g_set(color_slice(t, lp - 1), slice::from_ref(&zp1))
                }
            }
            AlgebraKind::Sp => {
                if ell >= 1 {
                    self.g_set(color_slice(t, ell), zz)
                        * self.h_node_set(ell - 1, zz, color_slice(t, ell - 1))
                } else {
                    let lp = 1 - ell;
                    let zp = self.z_shift(lp, z);
                    let zp1 = self.z_shift(lp - 1, z);
                    let parity = color_slice(t, lp).len() + color_slice(t, lp - 1).len();
                    self.sign_of(parity)
                        * self.h_set(slice::from_ref(&zp), color_slice(t, lp))
                        * self.g_set(color_slice(t, lp - 1), slice::from_ref(&zp1))
                }
            }
            AlgebraKind::OEven => {
                if ell >= 2 {
                    let mut out = self.g_set(color_slice(t, ell), zz);
                    for q in 1..=self.spec.nu(ell - 2) {
                        out = out * self.h_set(zz, color_slice(t, ell - q));
                    }
                    out
                } else if ell >= 0 {
                    // No sign factor here, unlike the psi companion row.
                    let lp = 1 - ell;
                    self.h_set(zz, color_slice(t, lp)) * self.g_set(color_slice(t, ell), zz)
                } else {
                    let lp = 1 - ell;
                    let zp = self.z_shift(lp, z);
                    let mut out = self.sign_of(color_slice(t, lp).len())
                        * self.h_set(slice::from_ref(&zp), color_slice(t, lp));
                    for q in 1..=self.spec.nu(lp - 2) {
                        let zq = self.z_shift(lp - q, z);
                        out = out
                            * self.sign_of(color_slice(t, lp - q).len())
                            * self.g_set(color_slice(t, lp - q), slice::from_ref(&zq));
                    }
                    out
                }
            }
        }
    }

    /// Variant of `psi` used inside recurrence coefficients. The row weight
    /// there omits the factor pairing the row's own color with the new
    /// quasimomentum: that pairing is already carried by the extension
    /// entry, so keeping it double-counts whenever the partition places
    /// spectators at that color. Branches whose cardinalities forbid such
    /// spectators coincide with `psi`.
    pub fn xi_psi(&self, ell: i64, z: &F, t: &ColorMap<F>) -> F {
        let zz = slice::from_ref(z);
        match self.spec.kind() {
            AlgebraKind::Sp => {
                if ell >= 1 {
                    self.g_set(zz, color_slice(t, ell - 1))
                } else {
                    self.psi(ell, z, t)
                }
            }
            _ => self.psi(ell, z, t),
        }
    }

    /// Variant of `phi` used inside recurrence coefficients, mirroring
    /// `xi_psi`: the reflected branches drop the sign and the factor tied
    /// to the column's own color, keeping only the couplings to the lower
    /// colors.
    pub fn xi_phi(&self, ell: i64, z: &F, t: &ColorMap<F>) -> F {
        match self.spec.kind() {
            AlgebraKind::Sp => {
                if ell >= 1 {
                    self.phi(ell, z, t)
                } else {
                    let lp = 1 - ell;
                    let zp1 = self.z_shift(lp - 1, z);
                    self.g_set(color_slice(t, lp - 1), slice::from_ref(&zp1))
                }
            }
            _ => self.phi(ell, z, t),
        }
    }

    /// mu^k_l(z; t) for l <= k: the scalar weight in front of an extension
    /// step, equal to psi_l phi_k dressed with algebra-dependent sign and
    /// normalization factors.
    pub fn mu(&self, ell: i64, k: i64, z: &F, t: &ColorMap<F>) -> F {
        assert!(ell <= k, "mu requires l <= k, got ({ell},{k})");
        let base = self.psi(ell, z, t) * self.phi(k, z, t);
        let zz = slice::from_ref(z);
        match self.spec.kind() {
            AlgebraKind::Gl => base,
            AlgebraKind::OOdd => {
                if ell < k {
                    let lp = -ell;
                    let mut out = F::from_int(sigma(lp - k)) * base;
                    if ell < 0 && k > 1 {
                        let z1 = self.z_shift(1, z);
                        out = out * self.g_set(slice::from_ref(&z1), color_slice(t, 0))
                            / self.h_set(zz, color_slice(t, 0));
                    }
                    if k == lp {
                        out = out * F::from_ratio(2 * k - 1, 2);
                    }
                    out
                } else if ell == 0 {
                    let z1 = self.z_shift(1, z);
                    base * self.h_set(zz, color_slice(t, 0))
                        / self.g_set(slice::from_ref(&z1), color_slice(t, 0))
                } else {
                    base
                }
            }
            AlgebraKind::Sp => {
                if ell < k {
                    let lp = 1 - ell;
                    let sign = sigma(lp - k) * sigma(lp - 1) * sigma(k);
                    let mut out = F::from_int(sign) * base;
                    if ell < 1 && k > 0 {
                        out = out
                            * self.sign_of(color_slice(t, 0).len())
                            * self.h_set(color_slice(t, 1), zz);
                    }
                    if k == lp {
                        out = out * F::from_int(k + 1);
                    }
                    out
                } else {
                    base
                }
            }
            AlgebraKind::OEven => {
                let parity = color_slice(t, 0).len() + color_slice(t, 1).len();
                if ell < k {
                    let lp = 1 - ell;
                    let mut out = F::from_int(sigma(lp - k)) * base;
                    if ell < 2 && k > -1 {
                        out = out * self.sign_of(parity);
                    }
                    if k == lp {
                        out = out * F::from_int(k - 1);
                    }
                    out
                } else if ell == 0 || ell == 1 {
                    self.sign_of(parity) * base
                } else {
                    base
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // The polynomial pair weight and its chained products.
    // ------------------------------------------------------------------

    /// Two-set polynomial weight; nontrivial only for cardinalities (2,2)
    /// and (1,2), and symmetric within each argument set.
    pub fn lambda_poly(&self, xs: &[F], ys: &[F]) -> F {
        // The reciprocal of g is the polynomial (u - v)/c, regular at
        // coinciding arguments; the quotients below must stay evaluable
        // there, so they are multiplications by that polynomial.
        let g_inv = |u: &F, v: &F| self.d(u, v) / self.c.clone();
        match (xs.len(), ys.len()) {
            (2, 2) => {
                self.h(&xs[0], &xs[1])
                    + self.h(&xs[0], &ys[0]) * g_inv(&xs[1], &ys[1])
                    + self.h(&xs[0], &ys[1]) * g_inv(&xs[1], &ys[0])
            }
            (1, 2) => F::one() + g_inv(&xs[0], &ys[0]) + g_inv(&xs[0], &ys[1]),
            _ => F::one(),
        }
    }

    /// Chained product of polynomial weights up the color ladder:
    /// prod_{s=1}^{l-1} Lambda(w^{s+1} | w^s) / h(w^s, w^s). When l equals
    /// the rank, `top` supplies the set playing the role of color n.
    pub fn lambda_bar(&self, ell: i64, w: &ColorMap<F>, top: Option<&[F]>) -> F {
        let n = self.spec.rank();
        let mut out = F::one();
        for s in 1..ell {
            let cur = color_slice(w, s);
            let next: &[F] = if s + 1 == n {
                top.unwrap_or_else(|| color_slice(w, s + 1))
            } else {
                color_slice(w, s + 1)
            };
            out = out * self.lambda_poly(next, cur) / self.h_set(cur, cur);
        }
        out
    }

    // ------------------------------------------------------------------
    // Row and column decorations of the action formula.
    // ------------------------------------------------------------------

    /// Row decoration of the action formula: a step sign for the orthogonal
    /// algebras, a sign times a chained polynomial weight for the symplectic
    /// one. The set argument is the first subset of the extended partition.
    pub fn gamma_cap(&self, i: i64, w_i: &ColorMap<F>, z: &F) -> F {
        match self.spec.kind() {
            AlgebraKind::Gl => F::one(),
            AlgebraKind::OOdd | AlgebraKind::OEven => {
                F::from_int(sigma(i - self.spec.xi()))
            }
            AlgebraKind::Sp => {
                let zn = self.z_shift(self.spec.rank(), z);
                F::from_int(sigma(self.spec.prime(i)))
                    * self.lambda_bar(i, w_i, Some(slice::from_ref(&zn)))
            }
        }
    }

    /// Column decoration of the action formula, mirror of
    /// [`Self::gamma_cap`]; the set argument is the third subset.
    pub fn gamma_cap_bar(&self, j: i64, w_iii: &ColorMap<F>, z: &F) -> F {
        match self.spec.kind() {
            AlgebraKind::Gl => F::one(),
            AlgebraKind::OOdd | AlgebraKind::OEven => {
                F::from_int(sigma(self.spec.prime(j) - self.spec.xi()))
            }
            AlgebraKind::Sp => {
                let top = [z.clone()];
                self.lambda_bar(self.spec.prime(j), w_iii, Some(&top))
            }
        }
    }

    /// Row decoration of the recurrence coefficient. For the orthogonal
    /// algebras the sign fires on every window whose row index sits at or
    /// above the fork, which reads l >= 0 in both spellings of the index
    /// window.
    pub fn phi_cap(&self, ell: i64, i: i64, z: &F, t_i: &ColorMap<F>) -> F {
        match self.spec.kind() {
            AlgebraKind::Gl => F::one(),
            AlgebraKind::OOdd | AlgebraKind::OEven => {
                if ell >= 0 {
                    F::from_int(sigma(self.spec.prime(i) - self.spec.xi()))
                } else {
                    F::one()
                }
            }
            AlgebraKind::Sp => {
                let mut u = t_i.clone();
                push_color(&mut u, ell, z.clone());
                self.lambda_bar(ell, &u, None)
            }
        }
    }

    /// Column decoration of the recurrence coefficient; the mirror image of
    /// the row decoration, with the gate reflected through the index
    /// involution (k' >= 0).
    pub fn phi_cap_bar(&self, k: i64, j: i64, z: &F, t_iii: &ColorMap<F>) -> F {
        match self.spec.kind() {
            AlgebraKind::Gl => F::one(),
            AlgebraKind::OOdd | AlgebraKind::OEven => {
                if self.spec.prime(k) >= 0 {
                    F::from_int(sigma(j - self.spec.xi()))
                } else {
                    F::one()
                }
            }
            AlgebraKind::Sp => {
                let kp = self.spec.prime(k);
                let mut v = t_iii.clone();
                push_color(&mut v, kp, self.z_shift(kp, z));
                self.lambda_bar(kp, &v, None)
            }
        }
    }

    /// The lowest-row weight evaluated on the first subset of an extended
    /// partition: 1/g(z_n, w^{n-1}).
    pub fn psi_lowest(&self, z: &F, w_i: &ColorMap<F>) -> F {
        let n = self.spec.rank();
        let zn = self.z_shift(n, z);
        self.g_set(slice::from_ref(&zn), color_slice(w_i, n - 1)).inv()
    }

    /// The highest-column weight evaluated on the third subset of an
    /// extended partition: h(z, w^{n-1}).
    pub fn phi_highest(&self, z: &F, w_iii: &ColorMap<F>) -> F {
        let n = self.spec.rank();
        self.h_set(slice::from_ref(z), color_slice(w_iii, n - 1))
    }

    // ------------------------------------------------------------------
    // Cardinality tables.
    // ------------------------------------------------------------------

    fn step(m: i64) -> usize {
        usize::from(m >= 0)
    }

    /// Subset cardinalities for the action of T_{i,j} on the extended sets,
    /// written per algebra.
    pub fn action_cardinalities(&self, i: i64, j: i64) -> (CardMap, CardMap) {
        let n = self.spec.rank();
        let mut ci = CardMap::new();
        let mut ciii = CardMap::new();
        match self.spec.kind() {
            AlgebraKind::Gl => {
                for s in 1..n {
                    ci.insert(s, Self::step(i - 1 - s));
                    ciii.insert(s, Self::step(s - j));
                }
            }
            AlgebraKind::OOdd => {
                for s in 0..n {
                    ci.insert(s, Self::step(i + s) + Self::step(i - s - 1));
                    ciii.insert(s, Self::step(-j + s) + Self::step(-j - s - 1));
                }
            }
            AlgebraKind::Sp => {
                ci.insert(0, Self::step(i - 1));
                ciii.insert(0, Self::step(-j));
                for s in 1..n {
                    ci.insert(s, Self::step(i + s - 1) + Self::step(i - s - 1));
                    ciii.insert(s, Self::step(-j + s) + Self::step(-j - s));
                }
            }
            AlgebraKind::OEven => {
                let ip = self.spec.prime(i);
                for s in 0..2 {
                    ci.insert(s, Self::step(i - 2) + usize::from(ip == s));
                    ciii.insert(s, Self::step(-j - 1) + usize::from(j == s));
                }
                for s in 2..n {
                    ci.insert(s, Self::step(i + s - 1) + Self::step(i - s - 1));
                    ciii.insert(s, Self::step(-j + s) + Self::step(-j - s));
                }
            }
        }
        (ci, ciii)
    }

    /// Same table written uniformly in the structure constants; coincides
    /// with [`Self::action_cardinalities`] and serves as a cross-check.
    pub fn action_cardinalities_uniform(&self, i: i64, j: i64) -> (CardMap, CardMap) {
        if self.spec.is_gl() {
            return self.action_cardinalities(i, j);
        }
        let n = self.spec.rank();
        let phi = self.spec.phi_g();
        let xi = self.spec.xi();
        let ip = self.spec.prime(i);
        let jp = self.spec.prime(j);
        let mut ci = CardMap::new();
        let mut ciii = CardMap::new();
        for s in 0..n {
            if s < phi {
                let extra_i = usize::from(phi == 2 && ip == s);
                let extra_iii = usize::from(phi == 2 && j == s);
                ci.insert(s, Self::step(i - phi) + extra_i);
                ciii.insert(s, Self::step(jp - phi) + extra_iii);
            } else {
                ci.insert(s, Self::step(i + s - xi) + Self::step(i - s - 1));
                ciii.insert(s, Self::step(jp + s - xi) + Self::step(jp - s - 1));
            }
        }
        (ci, ciii)
    }

    /// Subset cardinalities for the recurrence that trades an extension
    /// step for a sum of monodromy actions, written per algebra.
    pub fn recurrence_cardinalities(&self, ell: i64, k: i64, i: i64, j: i64) -> (CardMap, CardMap) {
        let n = self.spec.rank();
        let mut ci = CardMap::new();
        let mut ciii = CardMap::new();
        match self.spec.kind() {
            AlgebraKind::Gl => {
                for s in 1..n {
                    ci.insert(s, Self::step(s - i) * Self::step(ell - s - 1));
                    ciii.insert(s, Self::step(j - s - 1) * Self::step(s - k));
                }
            }
            AlgebraKind::OOdd => {
                let al = ell.abs();
                let ak = k.abs();
                for s in 0..n {
                    let v = if s < al {
                        Self::step(ell) * (Self::step(s - i) + Self::step(-s - i - 1))
                    } else {
                        Self::step(-s - i - 1)
                    };
                    ci.insert(s, v);
                    let w = if s < ak {
                        Self::step(-k) * (Self::step(j + s) + Self::step(j - s - 1))
                    } else {
                        Self::step(j - s - 1)
                    };
                    ciii.insert(s, w);
                }
            }
            AlgebraKind::Sp => {
                let al = self.spec.abs_g(ell);
                let ak = self.spec.abs_g(k);
                for s in 0..n {
                    let v = if s == 0 {
                        Self::step(ell - 1) * Self::step(-i)
                    } else if s < al {
                        Self::step(ell - 1) * (Self::step(s - i) + Self::step(-s - i))
                    } else {
                        Self::step(-s - i)
                    };
                    ci.insert(s, v);
                    let w = if s == 0 {
                        Self::step(-k) * Self::step(j - 1)
                    } else if s < ak {
                        Self::step(-k) * (Self::step(j + s - 1) + Self::step(j - s - 1))
                    } else {
                        Self::step(j - s - 1)
                    };
                    ciii.insert(s, w);
                }
            }
            AlgebraKind::OEven => {
                let lp = self.spec.prime(ell);
                let low_l = ell == 0 || ell == 1;
                let low_k = k == 0 || k == 1;
                let al = self.spec.abs_g(ell) + i64::from(low_l);
                let ak = self.spec.abs_g(k) + i64::from(low_k);
                for s in 0..n {
                    let v = if s < 2 {
                        Self::step(ell - 2) * (Self::step(-i - 1) + usize::from(i == s))
                            + Self::step(-i - 1) * usize::from(low_l && lp == s)
                    } else if s < al {
                        Self::step(ell - 2) * (Self::step(s - i) + Self::step(-s - i))
                    } else {
                        Self::step(-i - s)
                    };
                    ci.insert(s, v);
                    let w = if s < 2 {
                        Self::step(-k - 1) * (Self::step(j - 2) + usize::from(j == 1 - s))
                            + Self::step(j - 2) * usize::from(low_k && k == s)
                    } else if s < ak {
                        Self::step(-k - 1) * (Self::step(s + j - 1) + Self::step(-s + j - 1))
                    } else {
                        Self::step(-s + j - 1)
                    };
                    ciii.insert(s, w);
                }
            }
        }
        (ci, ciii)
    }

    /// Uniform version of [`Self::recurrence_cardinalities`]; the third row
    /// of each table starts at max(threshold, folded index) so that every
    /// color is covered exactly once.
    pub fn recurrence_cardinalities_uniform(
        &self,
        ell: i64,
        k: i64,
        i: i64,
        j: i64,
    ) -> (CardMap, CardMap) {
        if self.spec.is_gl() {
            return self.recurrence_cardinalities(ell, k, i, j);
        }
        let n = self.spec.rank();
        let phi = self.spec.phi_g();
        let xi = self.spec.xi();
        let ip = self.spec.prime(i);
        let jp = self.spec.prime(j);
        let lp = self.spec.prime(ell);
        let kp = self.spec.prime(k);
        let al = self.spec.abs_g(ell).max(phi);
        let ak = self.spec.abs_g(k).max(phi);
        let mut ci = CardMap::new();
        let mut ciii = CardMap::new();
        for s in 0..n {
            let v = if s < phi {
                Self::step(ell - phi) * Self::step(ip - phi)
                    + if phi == 2 {
                        Self::step(ell - phi) * usize::from(s == i)
                            + Self::step(ip - phi) * usize::from(s == lp)
                    } else {
                        0
                    }
            } else if s < al {
                Self::step(ell - phi) * (Self::step(ip + s - xi) + Self::step(ip - s - 1))
            } else {
                Self::step(ip - s - 1)
            };
            ci.insert(s, v);
            let w = if s < phi {
                Self::step(kp - phi) * Self::step(j - phi)
                    + if phi == 2 {
                        Self::step(kp - phi) * usize::from(s == jp)
                            + Self::step(j - phi) * usize::from(s == k)
                    } else {
                        0
                    }
            } else if s < ak {
                Self::step(kp - phi) * (Self::step(j + s - xi) + Self::step(j - s - 1))
            } else {
                Self::step(j - s - 1)
            };
            ciii.insert(s, w);
        }
        (ci, ciii)
    }

    /// Subset cardinalities of the plain parameter sets in one diagonal
    /// term. Type A uses its own closed table; the reflection algebras
    /// count the layout of the term, absent terms give `None`.
    pub fn diagonal_cardinalities(&self, i: i64, ell: i64, k: i64) -> Option<(CardMap, CardMap)> {
        if self.spec.is_gl() {
            let n = self.spec.rank();
            let mut ci = CardMap::new();
            let mut ciii = CardMap::new();
            for s in 1..n {
                ci.insert(s, Self::step(s - ell) * Self::step(i - s - 1));
                ciii.insert(s, Self::step(k - 1 - s) * Self::step(s - i));
            }
            return Some((ci, ciii));
        }
        let layout = self.diagonal_layout(i, ell, k)?;
        let mut ci = CardMap::new();
        let mut ciii = CardMap::new();
        for (&s, row) in &layout {
            ci.insert(s, row.take_i);
            ciii.insert(s, row.take_iii);
        }
        Some((ci, ciii))
    }

    /// Uniform diagonal cardinality table for the reflection algebras; it
    /// matches the recurrence table under the index swap that trades the
    /// extension labels for the entry labels.
    pub fn diagonal_cardinalities_uniform(&self, i: i64, ell: i64, k: i64) -> (CardMap, CardMap) {
        assert!(
            !self.spec.is_gl(),
            "uniform diagonal table applies to the reflection algebras"
        );
        let n = self.spec.rank();
        let phi = self.spec.phi_g();
        let xi = self.spec.xi();
        let ip = self.spec.prime(i);
        let lp = self.spec.prime(ell);
        let kp = self.spec.prime(k);
        let ai = self.spec.abs_g(i).max(phi);
        let mut ci = CardMap::new();
        let mut ciii = CardMap::new();
        for s in 0..n {
            let v = if s < phi {
                Self::step(i - phi) * Self::step(lp - phi)
                    + if phi == 2 {
                        Self::step(i - phi) * usize::from(s == ell)
                            + Self::step(lp - phi) * usize::from(s == ip)
                    } else {
                        0
                    }
            } else if s < ai {
                Self::step(i - phi) * (Self::step(lp + s - xi) + Self::step(lp - s - 1))
            } else {
                Self::step(lp - s - 1)
            };
            ci.insert(s, v);
            let w = if s < phi {
                Self::step(ip - phi) * Self::step(k - phi)
                    + if phi == 2 {
                        Self::step(ip - phi) * usize::from(s == kp)
                            + Self::step(k - phi) * usize::from(s == i)
                    } else {
                        0
                    }
            } else if s < ai {
                Self::step(ip - phi) * (Self::step(k + s - xi) + Self::step(k - s - 1))
            } else {
                Self::step(k - s - 1)
            };
            ciii.insert(s, w);
        }
        (ci, ciii)
    }

    // ------------------------------------------------------------------
    // Diagonal-action layouts.
    // ------------------------------------------------------------------

    fn row(z_dest: Part, zs_dest: Option<Part>, take_i: usize, take_iii: usize) -> ColorLayout {
        ColorLayout {
            z_dest,
            zs_dest,
            take_i,
            take_iii,
        }
    }

    /// Layout of the term (i, l, k) of the diagonal action for a reflection
    /// algebra: where z and z_s of each color go, and how many plain
    /// parameters the outer subsets take. `None` marks a term that is
    /// absent from the sum.
    pub fn diagonal_layout(&self, i: i64, ell: i64, k: i64) -> Option<DiagonalLayout> {
        assert!(
            !self.spec.is_gl(),
            "diagonal layouts apply to the reflection algebras"
        );
        debug_assert!(ell <= i && i <= k);
        let phi = self.spec.phi_g();
        let ip = self.spec.prime(i);
        if i >= phi {
            self.layout_upper(i, ell, k)
        } else if ip >= phi {
            self.layout_upper(ip, self.spec.prime(k), self.spec.prime(ell))
                .map(|l| self.mirror_layout(&l))
        } else if i == 1 {
            self.layout_die1(ell, k)
        } else {
            self.layout_die1(self.spec.prime(k), self.spec.prime(ell))
                .map(|l| self.mirror_layout(&l))
        }
    }

    fn layout_upper(&self, i: i64, ell: i64, k: i64) -> Option<DiagonalLayout> {
        let phi = self.spec.phi_g();
        if ell >= phi {
            return Some(self.rows_central(i, ell, k));
        }
        if self.spec.kind() == AlgebraKind::OEven && (ell == 0 || ell == 1) {
            return Some(self.rows_low_left(i, ell, k));
        }
        let lp = self.spec.prime(ell);
        if lp <= i {
            Some(self.rows_crossed_low(i, lp, k))
        } else if lp <= k {
            Some(self.rows_crossed_mid(i, lp, k))
        } else {
            Some(self.rows_crossed_high(i, k, lp))
        }
    }

    /// l <= i <= k with every index at or above the shift threshold.
    fn rows_central(&self, i: i64, ell: i64, k: i64) -> DiagonalLayout {
        let n = self.spec.rank();
        let phi = self.spec.phi_g();
        let mut out = DiagonalLayout::new();
        for s in 0..n {
            let r = if s < phi {
                Self::row(Part::SubI, None, 0, 0)
            } else if s < ell {
                Self::row(Part::SubI, Some(Part::SubI), 0, 0)
            } else if s < i {
                Self::row(Part::SubII, Some(Part::SubI), 1, 0)
            } else if s < k {
                Self::row(Part::SubII, Some(Part::SubI), 0, 1)
            } else {
                Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
            };
            out.insert(s, r);
        }
        out
    }

    /// Folded row label below i: threshold <= l' <= i <= k.
    fn rows_crossed_low(&self, i: i64, lp: i64, k: i64) -> DiagonalLayout {
        let n = self.spec.rank();
        let phi = self.spec.phi_g();
        let mut out = DiagonalLayout::new();
        for s in 0..n {
            let r = if s < phi {
                Self::row(Part::SubII, None, 1, 0)
            } else if s < lp {
                Self::row(Part::SubII, Some(Part::SubII), 2, 0)
            } else if s < i {
                Self::row(Part::SubII, Some(Part::SubI), 1, 0)
            } else if s < k {
                Self::row(Part::SubII, Some(Part::SubI), 0, 1)
            } else {
                Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
            };
            out.insert(s, r);
        }
        out
    }

    /// Folded row label between the entry labels: i <= l' <= k.
    fn rows_crossed_mid(&self, i: i64, lp: i64, k: i64) -> DiagonalLayout {
        let n = self.spec.rank();
        let phi = self.spec.phi_g();
        let mut out = DiagonalLayout::new();
        for s in 0..n {
            let r = if s < phi {
                Self::row(Part::SubII, None, 1, 0)
            } else if s < i {
                Self::row(Part::SubII, Some(Part::SubII), 2, 0)
            } else if s < lp {
                Self::row(Part::SubII, Some(Part::SubII), 1, 1)
            } else if s < k {
                Self::row(Part::SubII, Some(Part::SubI), 0, 1)
            } else {
                Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
            };
            out.insert(s, r);
        }
        out
    }

    /// Folded row label above the column label: i <= k <= l'.
    fn rows_crossed_high(&self, i: i64, k: i64, lp: i64) -> DiagonalLayout {
        let n = self.spec.rank();
        let phi = self.spec.phi_g();
        let mut out = DiagonalLayout::new();
        for s in 0..n {
            let r = if s < phi {
                Self::row(Part::SubII, None, 1, 0)
            } else if s < i {
                Self::row(Part::SubII, Some(Part::SubII), 2, 0)
            } else if s < k {
                Self::row(Part::SubII, Some(Part::SubII), 1, 1)
            } else if s < lp {
                Self::row(Part::SubIII, Some(Part::SubII), 1, 0)
            } else {
                Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
            };
            out.insert(s, r);
        }
        out
    }

    /// Even orthogonal case with the row label at a fork node and i >= 2.
    fn rows_low_left(&self, i: i64, ell: i64, k: i64) -> DiagonalLayout {
        let n = self.spec.rank();
        let lp = 1 - ell;
        let mut out = DiagonalLayout::new();
        out.insert(lp, Self::row(Part::SubI, None, 0, 0));
        out.insert(ell, Self::row(Part::SubII, None, 1, 0));
        for s in 2..n {
            let r = if s < i {
                Self::row(Part::SubII, Some(Part::SubI), 1, 0)
            } else if s < k {
                Self::row(Part::SubII, Some(Part::SubI), 0, 1)
            } else {
                Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
            };
            out.insert(s, r);
        }
        out
    }

    /// Even orthogonal case with the diagonal label at the fork: i = 1.
    fn layout_die1(&self, ell: i64, k: i64) -> Option<DiagonalLayout> {
        let n = self.spec.rank();
        let mut out = DiagonalLayout::new();
        if ell == 0 {
            return None;
        }
        if ell == 1 {
            if k == 1 {
                out.insert(0, Self::row(Part::SubI, None, 0, 0));
                out.insert(1, Self::row(Part::SubIII, None, 0, 0));
                for s in 2..n {
                    out.insert(s, Self::row(Part::SubIII, Some(Part::SubI), 0, 0));
                }
            } else {
                out.insert(0, Self::row(Part::SubI, None, 0, 0));
                out.insert(1, Self::row(Part::SubII, None, 0, 1));
                for s in 2..n {
                    let r = if s < k {
                        Self::row(Part::SubII, Some(Part::SubI), 0, 1)
                    } else {
                        Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
                    };
                    out.insert(s, r);
                }
            }
            return Some(out);
        }
        let lp = 1 - ell;
        if k == 1 {
            out.insert(0, Self::row(Part::SubII, None, 1, 0));
            out.insert(1, Self::row(Part::SubIII, None, 0, 0));
            for s in 2..n {
                let r = if s < lp {
                    Self::row(Part::SubIII, Some(Part::SubII), 1, 0)
                } else {
                    Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
                };
                out.insert(s, r);
            }
        } else if lp <= k {
            out.insert(0, Self::row(Part::SubII, None, 1, 0));
            out.insert(1, Self::row(Part::SubII, None, 0, 1));
            for s in 2..n {
                let r = if s < lp {
                    Self::row(Part::SubII, Some(Part::SubII), 1, 1)
                } else if s < k {
                    Self::row(Part::SubII, Some(Part::SubI), 0, 1)
                } else {
                    Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
                };
                out.insert(s, r);
            }
        } else {
            out.insert(0, Self::row(Part::SubII, None, 1, 0));
            out.insert(1, Self::row(Part::SubII, None, 0, 1));
            for s in 2..n {
                let r = if s < k {
                    Self::row(Part::SubII, Some(Part::SubII), 1, 1)
                } else if s < lp {
                    Self::row(Part::SubIII, Some(Part::SubII), 1, 0)
                } else {
                    Self::row(Part::SubIII, Some(Part::SubI), 0, 0)
                };
                out.insert(s, r);
            }
        }
        Some(out)
    }

    /// Index reflection of a layout: swap the outer subsets, and trade the
    /// roles of the plain and shifted arguments where both exist.
    fn mirror_layout(&self, src: &DiagonalLayout) -> DiagonalLayout {
        src.iter()
            .map(|(&s, r)| {
                let m = match r.zs_dest {
                    None => Self::row(mirror_part(r.z_dest), None, r.take_iii, r.take_i),
                    Some(zs) => Self::row(
                        mirror_part(zs),
                        Some(mirror_part(r.z_dest)),
                        r.take_iii,
                        r.take_i,
                    ),
                };
                (s, m)
            })
            .collect()
    }

    /// Realizes a layout: distributes z, the shifted arguments, and the
    /// already-partitioned plain parameters into the three extended
    /// subsets.
    pub fn materialize_layout(
        &self,
        layout: &DiagonalLayout,
        z: &F,
        parts: &Partition3<F>,
    ) -> (ColorMap<F>, ColorMap<F>, ColorMap<F>) {
        let mut wi = parts.sub_i.clone();
        let mut wii = parts.sub_ii.clone();
        let mut wiii = parts.sub_iii.clone();
        for (&s, r) in layout {
            debug_assert_eq!(color_slice(&parts.sub_i, s).len(), r.take_i);
            debug_assert_eq!(color_slice(&parts.sub_iii, s).len(), r.take_iii);
            let dest = |p: Part, wi: &mut ColorMap<F>, wii: &mut ColorMap<F>, wiii: &mut ColorMap<F>, x: F| match p {
                Part::SubI => push_color(wi, s, x),
                Part::SubII => push_color(wii, s, x),
                Part::SubIII => push_color(wiii, s, x),
            };
            dest(r.z_dest, &mut wi, &mut wii, &mut wiii, z.clone());
            if let Some(p) = r.zs_dest {
                dest(p, &mut wi, &mut wii, &mut wiii, self.z_shift(s, z));
            }
        }
        (wi, wii, wiii)
    }

    // ------------------------------------------------------------------
    // Parameter-extension plans.
    // ------------------------------------------------------------------

    /// Which colors receive which new arguments under the extension
    /// operator labelled (l, k). The identity step returns an empty plan;
    /// the fork step that is not defined for the even orthogonal algebra
    /// returns an error.
    pub fn z_operator_plan(
        &self,
        ell: i64,
        k: i64,
    ) -> Result<BTreeMap<i64, ZExtension>, KernelError> {
        let spec = &self.spec;
        let bad = || KernelError::UndefinedStep(ell, k);
        if !spec.contains_index(ell) || !spec.contains_index(k) || ell > k {
            return Err(bad());
        }
        let mut plan = BTreeMap::new();
        if ell == k {
            return Ok(plan);
        }
        if spec.is_gl() {
            if ell < 1 {
                return Err(bad());
            }
            for s in ell..k {
                plan.insert(s, ZExtension::PlainZ);
            }
            return Ok(plan);
        }
        let phi = spec.phi_g();
        let lp = spec.prime(ell);
        let kp = spec.prime(k);
        if spec.kind() == AlgebraKind::OEven {
            if ell == 0 && k == 1 {
                return Err(bad());
            }
            if ell == 0 || ell == 1 {
                plan.insert(ell, ZExtension::Full);
                for s in 2..k {
                    plan.insert(s, ZExtension::PlainZ);
                }
                return Ok(plan);
            }
            if k == 0 || k == 1 {
                plan.insert(1 - k, ZExtension::Full);
                for s in 2..lp {
                    plan.insert(s, ZExtension::ShiftedZ);
                }
                return Ok(plan);
            }
        }
        if ell >= phi {
            for s in ell..k {
                plan.insert(s, ZExtension::PlainZ);
            }
        } else if kp >= phi {
            for s in kp..lp {
                plan.insert(s, ZExtension::ShiftedZ);
            }
        } else if lp >= phi && k >= lp {
            for s in 0..lp {
                plan.insert(s, ZExtension::Full);
            }
            for s in lp..k {
                plan.insert(s, ZExtension::PlainZ);
            }
        } else if k >= phi && lp >= k {
            for s in 0..k {
                plan.insert(s, ZExtension::Full);
            }
            for s in k..lp {
                plan.insert(s, ZExtension::ShiftedZ);
            }
        } else {
            return Err(bad());
        }
        Ok(plan)
    }

    /// Applies an extension plan to a color map.
    pub fn extend_by_plan(
        &self,
        plan: &BTreeMap<i64, ZExtension>,
        z: &F,
        t: &ColorMap<F>,
    ) -> ColorMap<F> {
        let mut out = t.clone();
        for (&s, ext) in plan {
            match ext {
                ZExtension::PlainZ => push_color(&mut out, s, z.clone()),
                ZExtension::ShiftedZ => push_color(&mut out, s, self.z_shift(s, z)),
                ZExtension::Full => {
                    for x in self.z_bar(s, z) {
                        push_color(&mut out, s, x);
                    }
                }
            }
        }
        out
    }

    // ------------------------------------------------------------------
    // Coefficient functions.
    // ------------------------------------------------------------------

    /// Coefficient of one partition term in the action of T_{i,j} on a
    /// Bethe vector of a reflection algebra, without the overall
    /// lambda_n mu prefactor. The partition splits the extended sets.
    pub fn action_coefficient(
        &self,
        i: i64,
        j: i64,
        z: &F,
        parts: &Partition3<F>,
        alpha: &dyn Fn(i64, &F) -> F,
    ) -> F {
        self.gamma_cap(i, &parts.sub_i, z) / self.psi_lowest(z, &parts.sub_i)
            * (self.gamma_cap_bar(j, &parts.sub_iii, z) / self.phi_highest(z, &parts.sub_iii))
            * self.omega_triple(&parts.sub_i, &parts.sub_ii, &parts.sub_iii)
            * alpha_product(&parts.sub_iii, alpha)
    }

    /// Type-A analogue of [`Self::action_coefficient`]; here the extended
    /// sets carry z only and the decorations collapse to the first-row and
    /// last-column weights.
    pub fn action_coefficient_gl(
        &self,
        z: &F,
        parts: &Partition3<F>,
        alpha: &dyn Fn(i64, &F) -> F,
    ) -> F {
        let n = self.spec.rank();
        self.omega_triple(&parts.sub_i, &parts.sub_ii, &parts.sub_iii)
            * alpha_product(&parts.sub_iii, alpha)
            / (self.psi(1, z, &parts.sub_i) * self.phi(n, z, &parts.sub_iii))
    }

    /// Coefficient of one partition term in the recurrence: the plain sets
    /// are partitioned, and the weight couples every ordered pair of
    /// subsets, exactly as in the entry action it rewrites.
    pub fn xi_coefficient(&self, i: i64, j: i64, ell: i64, k: i64, z: &F, parts: &Partition3<F>) -> F {
        if self.spec.kind() == AlgebraKind::OEven {
            // A window rooted on one tine of the fork never descends through
            // the other tine: those rows and columns are absent.
            if (ell == 0 || ell == 1) && i == 1 - ell {
                return F::zero();
            }
            if (k == 0 || k == 1) && j == 1 - k {
                return F::zero();
            }
        }
        let base = self.xi_psi(ell, z, &parts.sub_i)
            * self.xi_phi(k, z, &parts.sub_iii)
            * self.omega_triple(&parts.sub_i, &parts.sub_ii, &parts.sub_iii);
        if self.spec.is_gl() {
            base
        } else {
            base * self.phi_cap(ell, i, z, &parts.sub_i)
                * self.phi_cap_bar(k, j, z, &parts.sub_iii)
        }
    }

    /// Weight of one diagonal term for a type-A algebra, in the closed form
    /// that chains the four-argument weights up the color ladder.
    pub fn upsilon_gl(
        &self,
        i: i64,
        ell: i64,
        k: i64,
        z: &F,
        parts: &Partition3<F>,
        alpha: &dyn Fn(i64, &F) -> F,
    ) -> F {
        let zz = slice::from_ref(z);
        let ti = |s: i64| color_slice(&parts.sub_i, s);
        let tii = |s: i64| color_slice(&parts.sub_ii, s);
        let tiii = |s: i64| color_slice(&parts.sub_iii, s);
        let mut out = self.h_set(tiii(i), ti(i - 1))
            * self.g_set(ti(ell), zz)
            * self.g_set(zz, tiii(k - 1));
        for s in ell..i {
            out = out * self.omega_r4(ti(s), tii(s), tii(s - 1), tii(s + 1));
        }
        for s in i..k {
            let mut a = F::one();
            for x in tiii(s) {
                a = a * alpha(s, x);
            }
            out = out * a * self.omega_l4(tii(s), tiii(s), tii(s - 1), tii(s + 1));
        }
        out
    }

    /// Weight of one diagonal term for a reflection algebra, assembled from
    /// the term's layout. `lam` supplies the vacuum eigenvalues, `alpha`
    /// their simple-root ratios. Absent terms give `None`.
    #[allow(clippy::too_many_arguments)]
    pub fn upsilon(
        &self,
        i: i64,
        ell: i64,
        k: i64,
        z: &F,
        t_full: &ColorMap<F>,
        parts: &Partition3<F>,
        lam: &dyn Fn(i64, &F) -> F,
        alpha: &dyn Fn(i64, &F) -> F,
    ) -> Option<F> {
        let layout = self.diagonal_layout(i, ell, k)?;
        let (wi, wii, wiii) = self.materialize_layout(&layout, z, parts);
        let n = self.spec.rank();
        let np = self.spec.lowest_index();
        let lam_ratio = lam(n, z) / lam(k, z);
        let mu_ratio = self.mu(np, n, z, t_full) / self.mu(ell, k, z, &parts.sub_ii);
        let front = self.gamma_cap(i, &wi, z) / self.psi_lowest(z, &wi)
            * (self.gamma_cap_bar(i, &wiii, z) / self.phi_highest(z, &wiii));
        let om = self.omega_triple(&wi, &wii, &wiii);
        let al = alpha_product(&wiii, alpha);
        Some(lam_ratio * mu_ratio * front * om * al)
    }

    /// The chained-pole identity behind the cancellation of unwanted terms:
    /// one parameter per consecutive color, summed weights vanish
    /// identically.
    pub fn vanish_chain(&self, z: &F, xs: &[F]) -> F {
        assert!(!xs.is_empty());
        let first = &xs[0];
        let last = &xs[xs.len() - 1];
        let mut corr = F::zero();
        for w in xs.windows(2) {
            corr = corr + (w[1].clone() - w[0].clone()) / self.c.clone();
        }
        self.g(first, z) + self.g(z, last) + self.g(first, z) * self.g(z, last) * corr
    }

    /// Transfer-matrix eigenvalue on a Bethe set: the sum of diagonal
    /// weights lambda_i mu^i_i over the index window.
    pub fn transfer_eigenvalue(&self, z: &F, t: &ColorMap<F>, lam: &dyn Fn(i64, &F) -> F) -> F {
        let mut out = F::zero();
        for i in self.spec.indices() {
            out = out + lam(i, z) * self.mu(i, i, z, t);
        }
        out
    }
}
