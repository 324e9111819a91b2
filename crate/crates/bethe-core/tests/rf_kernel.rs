//! Scalar-kernel checks: pole functions, weight tables, cardinality tables,
//! diagonal layouts, extension plans, and partition enumeration.
//!
//! Oracles here are written directly from the closed-form expressions and
//! evaluated with independent rational arithmetic, so that every sign and
//! normalization factor in the kernel is pinned by a second route.

use std::collections::BTreeMap;

use bethe_core::algebra_spec::{AlgebraKind, AlgebraSpec};
use bethe_core::rf_kernel::{
    color_slice, enumerate_partitions, BetheSets, CardMap, ColorMap, KernelError, Partition3,
    RfKernel, ZExtension,
};
use bethe_core::tensor_linalg::{Rat, Scalar};
use num::Zero;
use proptest::prelude::*;

// ---------------------------------------------------------------------
// Fixtures.
// ---------------------------------------------------------------------

// Pairwise distinct rationals, chosen so that no two differ by c, 2c, or
// c/2 for c = 2/3, keeping every pole function finite in the set tests.
const POOL: [(i64, i64); 16] = [
    (5, 7),
    (-3, 2),
    (9, 4),
    (1, 3),
    (-7, 5),
    (11, 6),
    (-5, 9),
    (8, 3),
    (-9, 7),
    (13, 5),
    (4, 9),
    (-12, 7),
    (17, 6),
    (21, 8),
    (19, 8),
    (23, 9),
];

fn rr(p: i64, q: i64) -> Rat {
    <Rat as Scalar>::from_ratio(p, q)
}

fn pool(i: usize) -> Rat {
    let (p, q) = POOL[i];
    rr(p, q)
}

fn coupling() -> Rat {
    rr(2, 3)
}

fn probe() -> Rat {
    rr(31, 10)
}

fn spec(kind: AlgebraKind, n: i64) -> AlgebraSpec {
    AlgebraSpec::new(kind, n).unwrap()
}

fn all_kinds_small() -> Vec<AlgebraSpec> {
    vec![
        spec(AlgebraKind::Gl, 3),
        spec(AlgebraKind::OOdd, 2),
        spec(AlgebraKind::Sp, 2),
        spec(AlgebraKind::OEven, 3),
    ]
}

fn all_kinds_wide() -> Vec<AlgebraSpec> {
    vec![
        spec(AlgebraKind::Gl, 3),
        spec(AlgebraKind::Gl, 4),
        spec(AlgebraKind::OOdd, 2),
        spec(AlgebraKind::OOdd, 3),
        spec(AlgebraKind::Sp, 2),
        spec(AlgebraKind::Sp, 3),
        spec(AlgebraKind::OEven, 3),
        spec(AlgebraKind::OEven, 4),
    ]
}

/// Builds a color map with the requested cardinality per color, drawing
/// distinct values from the pool in node order.
fn tmap(sp: &AlgebraSpec, cards: &[usize]) -> ColorMap<Rat> {
    let mut out = ColorMap::new();
    let mut idx = 0;
    for (pos, s) in sp.nodes().enumerate() {
        let want = cards[pos.min(cards.len() - 1)];
        let xs: Vec<Rat> = (0..want)
            .map(|_| {
                let v = pool(idx);
                idx += 1;
                v
            })
            .collect();
        if !xs.is_empty() {
            out.insert(s, xs);
        }
    }
    out
}

// ---------------------------------------------------------------------
// Independent rational oracles.
// ---------------------------------------------------------------------

struct Ora {
    c: Rat,
}

impl Ora {
    fn g(&self, u: &Rat, v: &Rat) -> Rat {
        &self.c / (u - v)
    }

    fn h(&self, u: &Rat, v: &Rat) -> Rat {
        (u - v + &self.c) / &self.c
    }

    fn f(&self, u: &Rat, v: &Rat) -> Rat {
        (u - v + &self.c) / (u - v)
    }

    /// f decorated for the long symplectic root: (u-v+2c)/(u-v).
    fn f_long(&self, u: &Rat, v: &Rat) -> Rat {
        (u - v + rr(2, 1) * &self.c) / (u - v)
    }

    fn f_xs(&self, xs: &[Rat], v: &Rat) -> Rat {
        xs.iter().map(|x| self.f(x, v)).product()
    }

    fn f_sx(&self, u: &Rat, ys: &[Rat]) -> Rat {
        ys.iter().map(|y| self.f(u, y)).product()
    }

    fn f_long_xs(&self, xs: &[Rat], v: &Rat) -> Rat {
        xs.iter().map(|x| self.f_long(x, v)).product()
    }

    fn f_long_sx(&self, u: &Rat, ys: &[Rat]) -> Rat {
        ys.iter().map(|y| self.f_long(u, y)).product()
    }
}

/// Shifted argument written out per algebra, independent of the kernel.
fn shift_oracle(sp: &AlgebraSpec, c: &Rat, s: i64, z: &Rat) -> Rat {
    match sp.kind() {
        AlgebraKind::Gl => z.clone(),
        AlgebraKind::OOdd => z - c * rr(2 * s - 1, 2),
        AlgebraKind::Sp => {
            if s == 0 {
                z.clone()
            } else {
                z - c * rr(s + 1, 1)
            }
        }
        AlgebraKind::OEven => {
            if s <= 1 {
                z.clone()
            } else {
                z - c * rr(s - 1, 1)
            }
        }
    }
}

/// Diagonal weight mu^l_l written from its closed product forms.
fn mu_diag_oracle(sp: &AlgebraSpec, c: &Rat, ell: i64, z: &Rat, t: &ColorMap<Rat>) -> Rat {
    let o = Ora { c: c.clone() };
    let ts = |s: i64| color_slice(t, s);
    let zs = |s: i64| shift_oracle(sp, c, s, z);
    match sp.kind() {
        AlgebraKind::Gl => o.f_xs(ts(ell), z) * o.f_sx(z, ts(ell - 1)),
        AlgebraKind::OOdd => {
            if ell > 0 {
                o.f_xs(ts(ell), z) * o.f_sx(z, ts(ell - 1))
            } else if ell == 0 {
                o.f_xs(ts(0), &zs(0)) * o.f_sx(z, ts(0))
            } else {
                let m = -ell;
                o.f_xs(ts(m - 1), &zs(m - 1)) * o.f_sx(&zs(m), ts(m))
            }
        }
        AlgebraKind::Sp => {
            if ell >= 2 {
                o.f_xs(ts(ell), z) * o.f_sx(z, ts(ell - 1))
            } else if ell == 1 {
                o.f_xs(ts(1), z) * o.f_long_sx(z, ts(0))
            } else if ell == 0 {
                o.f_long_xs(ts(0), z) * o.f_sx(&zs(1), ts(1))
            } else {
                let m = -ell;
                o.f_xs(ts(m), &zs(m)) * o.f_sx(&zs(m + 1), ts(m + 1))
            }
        }
        AlgebraKind::OEven => {
            if ell >= 3 {
                o.f_xs(ts(ell), z) * o.f_sx(z, ts(ell - 1))
            } else if ell == 2 {
                o.f_xs(ts(2), z) * o.f_sx(z, ts(0)) * o.f_sx(z, ts(1))
            } else if ell == 1 {
                o.f_xs(ts(1), z) * o.f_sx(z, ts(0))
            } else if ell == 0 {
                o.f_xs(ts(0), z) * o.f_sx(z, ts(1))
            } else if ell == -1 {
                o.f_sx(&zs(2), ts(2)) * o.f_xs(ts(1), z) * o.f_xs(ts(0), z)
            } else {
                let m = -ell;
                o.f_xs(ts(m), &zs(m)) * o.f_sx(&zs(m + 1), ts(m + 1))
            }
        }
    }
}

/// Normalization weight mu^n_{n'} written from its closed form.
fn mu_corner_oracle(sp: &AlgebraSpec, c: &Rat, z: &Rat, t: &ColorMap<Rat>) -> Rat {
    let o = Ora { c: c.clone() };
    let n = sp.rank();
    let kappa = <Rat as Scalar>::from_q64(sp.kappa());
    let zn = shift_oracle(sp, c, n, z);
    let edge: Rat = color_slice(t, n - 1)
        .iter()
        .map(|x| o.h(z, x) / o.g(&zn, x))
        .product();
    let t0 = color_slice(t, 0);
    let t1 = color_slice(t, 1);
    match sp.kind() {
        AlgebraKind::Gl => unreachable!(),
        AlgebraKind::OOdd => {
            let z1 = shift_oracle(sp, c, 1, z);
            let low: Rat = t0.iter().map(|x| o.g(&z1, x) / o.h(z, x)).product();
            -kappa * low * edge
        }
        AlgebraKind::Sp => {
            let sign = if t0.len() % 2 == 0 { rr(1, 1) } else { rr(-1, 1) };
            let mid: Rat = t1.iter().map(|x| o.h(x, z)).product();
            -kappa * sign * mid * edge
        }
        AlgebraKind::OEven => {
            let par = t0.len() + t1.len();
            let sign = if par % 2 == 0 { rr(1, 1) } else { rr(-1, 1) };
            -kappa * sign * edge
        }
    }
}

// ---------------------------------------------------------------------
// Pole functions and pair weights.
// ---------------------------------------------------------------------

#[test]
fn pole_function_values() {
    let k = RfKernel::new(&spec(AlgebraKind::Gl, 3), rr(1, 1));
    let u = rr(3, 1);
    let v = rr(1, 1);
    assert_eq!(k.g(&u, &v), rr(1, 2));
    assert_eq!(k.h(&u, &v), rr(3, 1));
    assert_eq!(k.f(&u, &v), rr(3, 2));
    assert_eq!(k.gamma(&u, &v), rr(-1, 2));

    let ksp = RfKernel::new(&spec(AlgebraKind::Sp, 2), rr(1, 1));
    assert_eq!(ksp.f_node(0, &u, &v), rr(2, 1));
    let ko = RfKernel::new(&spec(AlgebraKind::OOdd, 2), rr(1, 1));
    assert_eq!(ko.gamma_node(0, &u, &v), rr(5, 4));

    for i in 0..6 {
        let (a, b) = (pool(i), pool(i + 4));
        let kk = RfKernel::new(&spec(AlgebraKind::Gl, 3), coupling());
        assert_eq!(kk.f(&a, &b), kk.g(&a, &b) * kk.h(&a, &b));
        assert_eq!(kk.gamma(&a, &b), kk.g(&a, &b) / kk.h(&b, &a));
    }
}

#[test]
fn pair_weight_cases() {
    let kgl = RfKernel::new(&spec(AlgebraKind::Gl, 3), rr(1, 1));
    assert_eq!(kgl.gamma_bold(1, 2, &rr(4, 1), &rr(1, 1)), rr(-2, 1));

    let c = coupling();
    let ksp = RfKernel::new(&spec(AlgebraKind::Sp, 2), c.clone());
    let (u, v) = (pool(0), pool(3));
    assert_eq!(ksp.gamma_bold(0, 1, &u, &v), (&v - &u + rr(2, 1) * &c) / &c);
    assert_eq!(ksp.gamma_bold(1, 0, &u, &v), (&u - &v) / &c);

    // Non-adjacent nodes decouple.
    let ko7 = RfKernel::new(&spec(AlgebraKind::OOdd, 3), c.clone());
    assert_eq!(ko7.gamma_bold(0, 2, &u, &v), rr(1, 1));
    assert_eq!(ko7.gamma_bold(2, 0, &u, &v), rr(1, 1));

    // Same color at the short odd-orthogonal node: weight equals f there.
    let ko5 = RfKernel::new(&spec(AlgebraKind::OOdd, 2), c.clone());
    assert_eq!(
        ko5.gamma_bold(0, 0, &u, &v),
        (&u - &v + &c * rr(1, 2)) / (&u - &v)
    );
}

#[test]
fn omega_products_and_split_weights() {
    let k2 = RfKernel::new(&spec(AlgebraKind::Gl, 2), rr(1, 1));
    let mut rest = ColorMap::new();
    rest.insert(1, vec![rr(5, 1)]);
    assert_eq!(k2.omega_r_color(1, &[rr(2, 1)], &rest), rr(-1, 12));

    let empty: ColorMap<Rat> = ColorMap::new();
    assert_eq!(k2.omega_pair(&empty, &rest), rr(1, 1));
    assert_eq!(k2.omega_pair(&rest, &empty), rr(1, 1));

    // The color-decorated split weights collapse to the four-argument
    // chain weights in the type-A case.
    let s4 = spec(AlgebraKind::Gl, 4);
    let k4 = RfKernel::new(&s4, coupling());
    let x = vec![pool(0)];
    let mut rest4 = ColorMap::new();
    rest4.insert(1, vec![pool(1), pool(2)]);
    rest4.insert(2, vec![pool(3)]);
    rest4.insert(3, vec![pool(4), pool(5)]);
    let a = 2;
    let lo = color_slice(&rest4, a - 1).to_vec();
    let mid = color_slice(&rest4, a).to_vec();
    let hi = color_slice(&rest4, a + 1).to_vec();
    assert_eq!(
        k4.omega_r_color(a, &x, &rest4),
        k4.omega_r4(&x, &mid, &lo, &hi)
    );
    assert_eq!(
        k4.omega_l_color(a, &rest4, &x),
        k4.omega_l4(&mid, &x, &lo, &hi)
    );

    // Triple product factorizes over pairs.
    let mut b = ColorMap::new();
    b.insert(1, vec![pool(6)]);
    let mut cmap = ColorMap::new();
    cmap.insert(2, vec![pool(7)]);
    assert_eq!(
        k4.omega_triple(&rest4, &b, &cmap),
        k4.omega_pair(&rest4, &b) * k4.omega_pair(&rest4, &cmap) * k4.omega_pair(&b, &cmap)
    );
}

// ---------------------------------------------------------------------
// psi / phi / mu tables.
// ---------------------------------------------------------------------

#[test]
fn gl_psi_phi_products() {
    let s = spec(AlgebraKind::Gl, 3);
    let c = coupling();
    let k = RfKernel::new(&s, c.clone());
    let o = Ora { c: c.clone() };
    let t = tmap(&s, &[2, 2]);
    let z = probe();
    for ell in 1..=3 {
        let psi: Rat = color_slice(&t, ell)
            .iter()
            .map(|x| o.h(x, &z))
            .product::<Rat>()
            * color_slice(&t, ell - 1)
                .iter()
                .map(|x| o.g(&z, x))
                .product::<Rat>();
        let phi: Rat = color_slice(&t, ell)
            .iter()
            .map(|x| o.g(x, &z))
            .product::<Rat>()
            * color_slice(&t, ell - 1)
                .iter()
                .map(|x| o.h(&z, x))
                .product::<Rat>();
        assert_eq!(k.psi(ell, &z, &t), psi);
        assert_eq!(k.phi(ell, &z, &t), phi);
    }
    // The corner weight of the highest entry: h(t^1, z) h(z, t^{n-1}).
    let corner: Rat = color_slice(&t, 1)
        .iter()
        .map(|x| o.h(x, &z))
        .product::<Rat>()
        * color_slice(&t, 2)
            .iter()
            .map(|x| o.h(&z, x))
            .product::<Rat>();
    assert_eq!(k.mu(1, 3, &z, &t), corner);
}

#[test]
fn mu_diagonal_matches_closed_forms() {
    let z = probe();
    let c = coupling();
    for sp in all_kinds_wide() {
        let cards: Vec<usize> = match sp.rank() {
            2 => vec![2, 1],
            3 => vec![1, 2, 2],
            _ => vec![2, 1, 2, 1],
        };
        let t = tmap(&sp, &cards);
        let k = RfKernel::new(&sp, c.clone());
        for ell in sp.indices() {
            if sp.is_gl() && ell < 1 {
                continue;
            }
            assert_eq!(
                k.mu(ell, ell, &z, &t),
                mu_diag_oracle(&sp, &c, ell, &z, &t),
                "diagonal weight at l={ell} for {}",
                sp.kind().label(sp.rank())
            );
        }
    }
}

#[test]
fn mu_corner_matches_normalization() {
    let z = probe();
    let c = coupling();
    for sp in all_kinds_wide() {
        if sp.is_gl() {
            continue;
        }
        // Odd cardinalities on the fork colors exercise the parity signs.
        let cards: Vec<usize> = match (sp.kind(), sp.rank()) {
            (AlgebraKind::OEven, 3) => vec![2, 1, 2],
            (AlgebraKind::OEven, _) => vec![2, 1, 2, 1],
            (_, 2) => vec![1, 2],
            _ => vec![1, 1, 2],
        };
        let t = tmap(&sp, &cards);
        let k = RfKernel::new(&sp, c.clone());
        assert_eq!(
            k.mu(sp.lowest_index(), sp.rank(), &z, &t),
            mu_corner_oracle(&sp, &c, &z, &t),
            "corner weight for {}",
            sp.kind().label(sp.rank())
        );
    }
}

#[test]
fn mu_fork_step_vanishes_for_even_orthogonal() {
    let sp = spec(AlgebraKind::OEven, 3);
    let k = RfKernel::new(&sp, coupling());
    let t = tmap(&sp, &[1, 2, 1]);
    assert!(k.mu(0, 1, &probe(), &t).is_zero());
}

// ---------------------------------------------------------------------
// Cardinality tables.
// ---------------------------------------------------------------------

#[test]
fn action_cardinality_examples() {
    let kgl = RfKernel::new(&spec(AlgebraKind::Gl, 3), rr(1, 1));
    let (ci, ciii) = kgl.action_cardinalities(2, 3);
    assert_eq!(ci[&1], 1);
    assert_eq!(ci[&2], 0);
    assert!(ciii.values().all(|&v| v == 0));

    let ko5 = RfKernel::new(&spec(AlgebraKind::OOdd, 2), rr(1, 1));
    let (ci, ciii) = ko5.action_cardinalities(-2, 2);
    assert!(ci.values().chain(ciii.values()).all(|&v| v == 0));
}

#[test]
fn action_cardinalities_agree_with_uniform_table() {
    for sp in all_kinds_wide() {
        let k = RfKernel::new(&sp, coupling());
        for i in sp.indices() {
            for j in sp.indices() {
                assert_eq!(
                    k.action_cardinalities(i, j),
                    k.action_cardinalities_uniform(i, j),
                    "action table mismatch at (i,j)=({i},{j}) for {}",
                    sp.kind().label(sp.rank())
                );
            }
        }
    }
}

#[test]
fn recurrence_cardinalities_agree_with_uniform_table() {
    for sp in all_kinds_wide() {
        let k = RfKernel::new(&sp, coupling());
        let lo = sp.lowest_index();
        let n = sp.rank();
        for ell in sp.indices() {
            for kk in sp.indices() {
                if ell >= kk {
                    continue;
                }
                if sp.is_gl() && ell < 1 {
                    continue;
                }
                for i in lo..=ell {
                    for j in kk..=n {
                        if sp.is_gl() && i < 1 {
                            continue;
                        }
                        assert_eq!(
                            k.recurrence_cardinalities(ell, kk, i, j),
                            k.recurrence_cardinalities_uniform(ell, kk, i, j),
                            "recurrence table mismatch at (l,k,i,j)=({ell},{kk},{i},{j}) for {}",
                            sp.kind().label(sp.rank())
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn diagonal_layouts_match_uniform_table() {
    for sp in all_kinds_wide() {
        if sp.is_gl() {
            continue;
        }
        let k = RfKernel::new(&sp, coupling());
        let lo = sp.lowest_index();
        let n = sp.rank();
        for i in sp.indices() {
            for ell in lo..=i {
                for kk in i..=n {
                    let absent = sp.kind() == AlgebraKind::OEven
                        && ((i == 1 && ell == 0) || (i == 0 && kk == 1));
                    let cards = k.diagonal_cardinalities(i, ell, kk);
                    assert_eq!(
                        cards.is_none(),
                        absent,
                        "presence mismatch at (i,l,k)=({i},{ell},{kk}) for {}",
                        sp.kind().label(sp.rank())
                    );
                    if let Some(found) = cards {
                        let want = k.diagonal_cardinalities_uniform(i, ell, kk);
                        assert_eq!(
                            found,
                            want,
                            "diagonal table mismatch at (i,l,k)=({i},{ell},{kk}) for {}",
                            sp.kind().label(sp.rank())
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn diagonal_table_is_recurrence_table_with_swapped_labels() {
    for sp in all_kinds_wide() {
        let k = RfKernel::new(&sp, coupling());
        let lo = if sp.is_gl() { 1 } else { sp.lowest_index() };
        let n = sp.rank();
        for i in sp.indices() {
            if sp.is_gl() && i < 1 {
                continue;
            }
            for ell in lo..=i {
                for kk in i..=n {
                    let swapped = if sp.is_gl() {
                        k.recurrence_cardinalities(i, i, ell, kk)
                    } else {
                        k.recurrence_cardinalities_uniform(i, i, ell, kk)
                    };
                    let diag = if sp.is_gl() {
                        k.diagonal_cardinalities(i, ell, kk).unwrap()
                    } else {
                        k.diagonal_cardinalities_uniform(i, ell, kk)
                    };
                    assert_eq!(
                        diag,
                        swapped,
                        "label-swap mismatch at (i,l,k)=({i},{ell},{kk}) for {}",
                        sp.kind().label(sp.rank())
                    );
                }
            }
        }
    }
}

// ---------------------------------------------------------------------
// Diagonal weights.
// ---------------------------------------------------------------------

/// Toy vacuum-eigenvalue family: distinct monic linear polynomials, with
/// the color ratios built to telescope.
fn toy_lambda(m: i64, x: &Rat) -> Rat {
    x + rr(2 * m + 3, 11)
}

#[test]
fn wanted_diagonal_weight_is_unity() {
    let z = probe();
    let c = coupling();
    for sp in all_kinds_wide() {
        if sp.is_gl() {
            continue;
        }
        let cards: Vec<usize> = match sp.rank() {
            2 => vec![1, 2],
            3 => vec![2, 1, 2],
            _ => vec![1, 2, 1, 2],
        };
        let t = tmap(&sp, &cards);
        let k = RfKernel::new(&sp, c.clone());
        let nu_of = |s: i64| sp.nu(s);
        let alpha = move |s: i64, x: &Rat| toy_lambda(s, x) / toy_lambda(s + nu_of(s), x);
        let lam = |m: i64, x: &Rat| toy_lambda(m, x);
        for i in sp.phi_g()..=sp.rank() {
            let parts = Partition3 {
                sub_i: ColorMap::new(),
                sub_ii: t.clone(),
                sub_iii: ColorMap::new(),
            };
            let got = k.upsilon(i, i, i, &z, &t, &parts, &lam, &alpha).unwrap();
            assert_eq!(
                got,
                rr(1, 1),
                "wanted weight at i={i} for {}",
                sp.kind().label(sp.rank())
            );
        }
    }
}

/// Second route for the type-A diagonal weight: the ratio form evaluated
/// on the extended sets materialized row by row.
#[allow(clippy::too_many_arguments)]
fn upsilon_gl_oracle(
    k: &RfKernel<Rat>,
    sp: &AlgebraSpec,
    c: &Rat,
    i: i64,
    ell: i64,
    kk: i64,
    z: &Rat,
    t_full: &ColorMap<Rat>,
    parts: &Partition3<Rat>,
) -> Rat {
    let o = Ora { c: c.clone() };
    let n = sp.rank();
    let mut ui: ColorMap<Rat> = ColorMap::new();
    let mut uii: ColorMap<Rat> = ColorMap::new();
    let mut uiii: ColorMap<Rat> = ColorMap::new();
    for s in 1..n {
        let t_i = color_slice(&parts.sub_i, s);
        let t_ii = color_slice(&parts.sub_ii, s);
        let t_iii = color_slice(&parts.sub_iii, s);
        if s < ell {
            ui.insert(s, vec![z.clone()]);
            uii.insert(s, color_slice(t_full, s).to_vec());
        } else if s < i {
            ui.insert(s, t_i.to_vec());
            let mut mid = vec![z.clone()];
            mid.extend_from_slice(t_ii);
            uii.insert(s, mid);
        } else if s < kk {
            let mut mid = vec![z.clone()];
            mid.extend_from_slice(t_ii);
            uii.insert(s, mid);
            if !t_iii.is_empty() {
                uiii.insert(s, t_iii.to_vec());
            }
        } else {
            uii.insert(s, color_slice(t_full, s).to_vec());
            uiii.insert(s, vec![z.clone()]);
        }
    }
    let lam_ratio = toy_lambda(n, z) / toy_lambda(kk, z);
    let mu_top: Rat = color_slice(t_full, 1)
        .iter()
        .map(|x| o.h(x, z))
        .product::<Rat>()
        * color_slice(t_full, n - 1)
            .iter()
            .map(|x| o.h(z, x))
            .product::<Rat>();
    let tii = &parts.sub_ii;
    let mu_low: Rat = color_slice(tii, ell)
        .iter()
        .map(|x| o.h(x, z))
        .product::<Rat>()
        * color_slice(tii, ell - 1)
            .iter()
            .map(|x| o.g(z, x))
            .product::<Rat>()
        * color_slice(tii, kk)
            .iter()
            .map(|x| o.g(x, z))
            .product::<Rat>()
        * color_slice(tii, kk - 1)
            .iter()
            .map(|x| o.h(z, x))
            .product::<Rat>();
    let psi1: Rat = color_slice(&ui, 1).iter().map(|x| o.h(x, z)).product();
    let phin: Rat = color_slice(&uiii, n - 1)
        .iter()
        .map(|x| o.h(z, x))
        .product();
    let mut alpha_prod = rr(1, 1);
    for (&s, xs) in &uiii {
        for x in xs {
            alpha_prod = alpha_prod * toy_lambda(s, x) / toy_lambda(s + 1, x);
        }
    }
    lam_ratio * (mu_top / mu_low) * k.omega_triple(&ui, &uii, &uiii) * alpha_prod / (psi1 * phin)
}

#[test]
fn gl_diagonal_weight_two_routes_agree() {
    let sp = spec(AlgebraKind::Gl, 3);
    let c = coupling();
    let k = RfKernel::new(&sp, c.clone());
    let z = probe();
    let t = tmap(&sp, &[2, 2]);
    let alpha = |s: i64, x: &Rat| toy_lambda(s, x) / toy_lambda(s + 1, x);
    let n = sp.rank();
    for ell in 1..=n {
        for i in ell..=n {
            for kk in i..=n {
                let (ci, ciii) = k.diagonal_cardinalities(i, ell, kk).unwrap();
                let parts = enumerate_partitions(&t, &ci, &ciii);
                assert!(!parts.is_empty());
                for p in &parts {
                    let got = k.upsilon_gl(i, ell, kk, &z, p, &alpha);
                    let want = upsilon_gl_oracle(&k, &sp, &c, i, ell, kk, &z, &t, p);
                    assert_eq!(got, want, "diagonal weight at (i,l,k)=({i},{ell},{kk})");
                }
            }
        }
    }
    // The wanted term carries weight one.
    let whole = Partition3 {
        sub_i: ColorMap::new(),
        sub_ii: t.clone(),
        sub_iii: ColorMap::new(),
    };
    for i in 1..=n {
        assert_eq!(k.upsilon_gl(i, i, i, &z, &whole, &alpha), rr(1, 1));
    }
}

// ---------------------------------------------------------------------
// Extension plans and shifted arguments.
// ---------------------------------------------------------------------

#[test]
fn shifted_arguments_per_algebra() {
    let z = probe();
    let c = coupling();
    for sp in all_kinds_small() {
        let k = RfKernel::new(&sp, c.clone());
        for s in 0..=sp.rank() {
            if sp.is_gl() {
                assert_eq!(k.z_shift(s, &z), z);
            } else {
                assert_eq!(k.z_shift(s, &z), shift_oracle(&sp, &c, s, &z));
            }
        }
        for s in sp.nodes() {
            let ext = k.z_bar(s, &z);
            let expect = if sp.is_gl() || s < sp.phi_g() { 1 } else { 2 };
            assert_eq!(ext.len(), expect);
            assert_eq!(ext[0], z);
        }
    }
}

#[test]
fn extension_plans_match_case_tables() {
    use ZExtension::{Full, PlainZ, ShiftedZ};
    let plan =
        |sp: &AlgebraSpec, l: i64, k: i64| RfKernel::new(sp, coupling()).z_operator_plan(l, k);

    let gl = spec(AlgebraKind::Gl, 3);
    assert_eq!(plan(&gl, 2, 2).unwrap(), BTreeMap::new());
    let p = plan(&gl, 1, 3).unwrap();
    assert_eq!(p[&1], PlainZ);
    assert_eq!(p[&2], PlainZ);

    let o5 = spec(AlgebraKind::OOdd, 2);
    let p = plan(&o5, 0, 1).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&0], PlainZ);
    let p = plan(&o5, -2, 2).unwrap();
    assert_eq!(p[&0], Full);
    assert_eq!(p[&1], Full);
    let p = plan(&o5, -1, 0).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&0], ShiftedZ);

    let sp4 = spec(AlgebraKind::Sp, 2);
    let p = plan(&sp4, 0, 1).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&0], Full);
    let p = plan(&sp4, -1, 0).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&1], ShiftedZ);
    let p = plan(&sp4, -1, 2).unwrap();
    assert_eq!(p[&0], Full);
    assert_eq!(p[&1], Full);

    let o6 = spec(AlgebraKind::OEven, 3);
    assert_eq!(
        plan(&o6, 0, 1).unwrap_err(),
        KernelError::UndefinedStep(0, 1)
    );
    let p = plan(&o6, 1, 3).unwrap();
    assert_eq!(p[&1], Full);
    assert_eq!(p[&2], PlainZ);
    let p = plan(&o6, 0, 2).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&0], Full);
    let p = plan(&o6, -1, 0).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&1], Full);
    let p = plan(&o6, -2, 0).unwrap();
    assert_eq!(p[&1], Full);
    assert_eq!(p[&2], ShiftedZ);
    let p = plan(&o6, -1, 1).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&0], Full);
    let p = plan(&o6, 2, 3).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(p[&2], PlainZ);

    // Applying a plan inserts the advertised arguments.
    let k = RfKernel::new(&sp4, coupling());
    let t = tmap(&sp4, &[1, 1]);
    let z = probe();
    let ext = k.extend_by_plan(&k.z_operator_plan(0, 1).unwrap(), &z, &t);
    assert_eq!(color_slice(&ext, 0).len(), 2);
    assert_eq!(color_slice(&ext, 1).len(), 1);
    assert!(color_slice(&ext, 0).contains(&z));
}

// ---------------------------------------------------------------------
// Polynomial pair weight and decorations.
// ---------------------------------------------------------------------

#[test]
fn polynomial_weight_values_and_symmetry() {
    let k = RfKernel::new(&spec(AlgebraKind::Sp, 2), rr(1, 1));
    let xs = [rr(3, 1), rr(1, 1)];
    let ys = [rr(2, 1), rr(0, 1)];
    assert_eq!(k.lambda_poly(&xs, &ys), rr(1, 1));

    let k = RfKernel::new(&spec(AlgebraKind::Sp, 2), coupling());
    let xs = [pool(0), pool(1)];
    let ys = [pool(2), pool(3)];
    let base = k.lambda_poly(&xs, &ys);
    assert_eq!(k.lambda_poly(&[xs[1].clone(), xs[0].clone()], &ys), base);
    assert_eq!(k.lambda_poly(&xs, &[ys[1].clone(), ys[0].clone()]), base);

    assert_eq!(k.lambda_poly(&xs[..1], &ys[..1]), rr(1, 1));
    assert_eq!(k.lambda_poly(&[], &ys), rr(1, 1));
    let deg = k.lambda_poly(&xs[..1], &ys);
    let c = coupling();
    assert_eq!(
        deg,
        rr(1, 1) + (&xs[0] - &ys[0]) / &c + (&xs[0] - &ys[1]) / &c
    );
}

#[test]
fn action_decorations_reduce_to_signs_for_orthogonal_algebras() {
    let z = probe();
    let o5 = spec(AlgebraKind::OOdd, 2);
    let k = RfKernel::new(&o5, coupling());
    let w = tmap(&o5, &[1, 1]);
    assert_eq!(k.gamma_cap(1, &w, &z), rr(1, 1));
    assert_eq!(k.gamma_cap(0, &w, &z), rr(-1, 1));
    assert_eq!(k.gamma_cap(-2, &w, &z), rr(-1, 1));
    assert_eq!(k.gamma_cap_bar(1, &w, &z), rr(-1, 1));
    assert_eq!(k.gamma_cap_bar(-1, &w, &z), rr(1, 1));

    let o6 = spec(AlgebraKind::OEven, 3);
    let k6 = RfKernel::new(&o6, coupling());
    let w6 = tmap(&o6, &[1, 1, 1]);
    assert_eq!(k6.gamma_cap(2, &w6, &z), rr(1, 1));
    assert_eq!(k6.gamma_cap(0, &w6, &z), rr(-1, 1));

    // Recurrence decorations: the sign applies only past the index fold.
    assert_eq!(k.phi_cap(1, 0, &z, &w), rr(-1, 1));
    assert_eq!(k.phi_cap(-1, 0, &z, &w), rr(1, 1));
    assert_eq!(k.phi_cap_bar(-1, 1, &z, &w), rr(1, 1));
    assert_eq!(k.phi_cap_bar(-1, 0, &z, &w), rr(-1, 1));
    assert_eq!(k.phi_cap_bar(1, 1, &z, &w), rr(1, 1));
}

#[test]
fn symplectic_decorations_chain_polynomial_weights() {
    let sp4 = spec(AlgebraKind::Sp, 2);
    let c = coupling();
    let k = RfKernel::new(&sp4, c.clone());
    let z = probe();
    // Gamma at the lowest row index reduces to a pure sign.
    let empty: ColorMap<Rat> = ColorMap::new();
    assert_eq!(k.gamma_cap(1, &empty, &z), rr(-1, 1));
    // At i = n the chain multiplies one polynomial weight.
    let mut w = ColorMap::new();
    w.insert(1, vec![z.clone(), shift_oracle(&sp4, &c, 1, &z)]);
    let zn = shift_oracle(&sp4, &c, 2, &z);
    let want = k.lambda_poly(std::slice::from_ref(&zn), color_slice(&w, 1))
        / k.h_set(color_slice(&w, 1), color_slice(&w, 1));
    assert_eq!(k.gamma_cap(2, &w, &z), -want);
}

// ---------------------------------------------------------------------
// The chained-pole identity.
// ---------------------------------------------------------------------

#[test]
fn chained_pole_sum_vanishes() {
    let k = RfKernel::new(&spec(AlgebraKind::Gl, 3), coupling());
    let z = probe();
    for len in 1usize..=5 {
        let xs: Vec<Rat> = (0..len).map(pool).collect();
        assert!(k.vanish_chain(&z, &xs).is_zero(), "chain length {len}");
    }
}

// ---------------------------------------------------------------------
// Bethe sets and partition enumeration.
// ---------------------------------------------------------------------

#[test]
fn bethe_sets_validation_and_canonical_order() {
    let sp = spec(AlgebraKind::OOdd, 2);
    let mut m = ColorMap::new();
    m.insert(0, vec![pool(1), pool(0)]);
    m.insert(1, vec![pool(2)]);
    let sets = BetheSets::new(&sp, m).unwrap();
    assert_eq!(sets.total(), 3);
    assert!(sets.color(0).windows(2).all(|w| w[0] < w[1]));
    assert!(sets.color(5).is_empty());

    let mut dup = ColorMap::new();
    dup.insert(1, vec![pool(0), pool(0)]);
    assert_eq!(
        BetheSets::new(&sp, dup).unwrap_err(),
        KernelError::DuplicateParameter(1)
    );

    let mut stray = ColorMap::new();
    stray.insert(7, vec![pool(0)]);
    assert_eq!(
        BetheSets::new(&sp, stray).unwrap_err(),
        KernelError::UnknownColor(7)
    );

    // Insertion order does not matter for the memo key.
    let mut a = ColorMap::new();
    a.insert(0, vec![pool(0), pool(1), pool(2)]);
    let mut b = ColorMap::new();
    b.insert(0, vec![pool(2), pool(0), pool(1)]);
    let ka = BetheSets::new(&sp, a).unwrap().memo_key();
    let kb = BetheSets::new(&sp, b).unwrap().memo_key();
    assert_eq!(ka, kb);

    // Splitting the last element undoes insertion.
    let base = BetheSets::new(&sp, ColorMap::new()).unwrap();
    let grown = base.with_inserted(1, pool(3)).unwrap();
    let (x, back) = grown.split_last(1).unwrap();
    assert_eq!(x, pool(3));
    assert!(back.is_empty());
}

#[test]
fn partition_enumeration_counts() {
    let mut full = ColorMap::new();
    full.insert(1, vec![pool(0), pool(1), pool(2)]);
    let mut ci = CardMap::new();
    ci.insert(1, 1);
    let ciii = CardMap::new();
    assert_eq!(enumerate_partitions(&full, &ci, &ciii).len(), 3);

    let zero = CardMap::new();
    let all = enumerate_partitions(&full, &zero, &zero);
    assert_eq!(all.len(), 1);
    assert_eq!(color_slice(&all[0].sub_ii, 1).len(), 3);

    let mut two = ColorMap::new();
    two.insert(1, vec![pool(0), pool(1)]);
    let mut one = CardMap::new();
    one.insert(1, 1);
    let both = enumerate_partitions(&two, &one, &one);
    assert_eq!(both.len(), 2);
    assert!(both.iter().all(|p| p.sub_ii.is_empty()));

    // Infeasible request: empty sum, not an error.
    let mut big = CardMap::new();
    big.insert(1, 3);
    assert!(enumerate_partitions(&two, &big, &zero).is_empty());

    // Partition subsets stay disjoint and exhaustive.
    let mut wide = ColorMap::new();
    wide.insert(0, vec![pool(0), pool(1), pool(2)]);
    wide.insert(1, vec![pool(3), pool(4)]);
    let mut ci = CardMap::new();
    ci.insert(0, 1);
    ci.insert(1, 1);
    let mut ciii = CardMap::new();
    ciii.insert(0, 1);
    for p in enumerate_partitions(&wide, &ci, &ciii) {
        for s in [0, 1] {
            let mut merged: Vec<Rat> = Vec::new();
            merged.extend_from_slice(color_slice(&p.sub_i, s));
            merged.extend_from_slice(color_slice(&p.sub_ii, s));
            merged.extend_from_slice(color_slice(&p.sub_iii, s));
            merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut want = color_slice(&wide, s).to_vec();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(merged, want);
        }
    }
}

// ---------------------------------------------------------------------
// Property tests.
// ---------------------------------------------------------------------

proptest! {
    #[test]
    fn prop_f_factorizes(u in -40i64..40, v in -40i64..40, cnum in 1i64..5) {
        prop_assume!(u != v);
        let k = RfKernel::new(&spec(AlgebraKind::Gl, 2), rr(cnum, 3));
        let (uu, vv) = (rr(u, 1), rr(v, 1));
        prop_assert_eq!(k.f(&uu, &vv), k.g(&uu, &vv) * k.h(&uu, &vv));
        prop_assert_eq!(k.gamma(&uu, &vv), k.g(&uu, &vv) / k.h(&vv, &uu));
    }

    #[test]
    fn prop_chained_pole_sum_vanishes(raw in proptest::collection::vec(-60i64..60, 2..=6), cnum in 1i64..4) {
        let mut seen = raw.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assume!(seen.len() == raw.len());
        let z = rr(raw[0], 1);
        let xs: Vec<Rat> = raw[1..].iter().map(|&v| rr(v, 1)).collect();
        let k = RfKernel::new(&spec(AlgebraKind::Gl, 2), rr(cnum, 1));
        prop_assert!(k.vanish_chain(&z, &xs).is_zero());
    }

    #[test]
    fn prop_polynomial_weight_symmetric(raw in proptest::collection::vec(-30i64..30, 4), cnum in 1i64..4) {
        let mut seen = raw.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assume!(seen.len() == 4);
        let k = RfKernel::new(&spec(AlgebraKind::Sp, 2), rr(cnum, 1));
        let xs = [rr(raw[0], 1), rr(raw[1], 1)];
        let ys = [rr(raw[2], 1), rr(raw[3], 1)];
        let base = k.lambda_poly(&xs, &ys);
        prop_assert_eq!(&k.lambda_poly(&[xs[1].clone(), xs[0].clone()], &ys), &base);
        prop_assert_eq!(&k.lambda_poly(&xs, &[ys[1].clone(), ys[0].clone()]), &base);
    }

    #[test]
    fn prop_bethe_sets_sorted_and_deduped(raw in proptest::collection::vec(-50i64..50, 1..6)) {
        let sp = spec(AlgebraKind::Gl, 2);
        let m: ColorMap<Rat> = [(1i64, raw.iter().map(|&v| rr(v, 1)).collect::<Vec<_>>())]
            .into_iter()
            .collect();
        let mut unique = raw.clone();
        unique.sort_unstable();
        unique.dedup();
        match BetheSets::new(&sp, m) {
            Ok(sets) => {
                prop_assert_eq!(unique.len(), raw.len());
                let got: Vec<Rat> = sets.color(1).to_vec();
                let want: Vec<Rat> = unique.iter().map(|&v| rr(v, 1)).collect();
                prop_assert_eq!(got, want);
            }
            Err(e) => {
                prop_assert!(unique.len() < raw.len());
                prop_assert_eq!(e, KernelError::DuplicateParameter(1));
            }
        }
    }
}
