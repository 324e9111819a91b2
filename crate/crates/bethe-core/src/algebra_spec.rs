//! Discrete data of the four classical symmetry classes.
//!
//! Everything downstream is written against this table: the fundamental
//! dimension N, the reflection parameter ξ with its index involution
//! i ↦ i′ = ξ−i, the sign ε_g, the crossing shift κ = n+θ, the boundary
//! width φ, the Dynkin-node set with the Gram matrix of the simple roots,
//! and the small per-node constants ν_a, ρ_a, 𝔡_a.

use num::rational::Rational64;
use thiserror::Error;

/// The four families of invariance algebras for which chains are built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlgebraKind {
    /// gl_n: no reflection structure, rank n−1.
    Gl,
    /// o_{2n+1}: odd orthogonal, fundamental dimension 2n+1.
    OOdd,
    /// sp_{2n}: symplectic, fundamental dimension 2n.
    Sp,
    /// o_{2n}: even orthogonal, fundamental dimension 2n.
    OEven,
}

impl AlgebraKind {
    pub fn label(&self, n: i64) -> String {
        match self {
            AlgebraKind::Gl => format!("gl_{n}"),
            AlgebraKind::OOdd => format!("o_{}", 2 * n + 1),
            AlgebraKind::Sp => format!("sp_{}", 2 * n),
            AlgebraKind::OEven => format!("o_{}", 2 * n),
        }
    }
}

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("rank parameter n must be at least 2, got {0}")]
    RankTooSmall(i64),
    #[error("index {0} is outside the fundamental index range")]
    IndexOutOfRange(i64),
    #[error("node {0} is not a Dynkin node of this algebra")]
    NodeOutOfRange(i64),
}

/// All discrete constants of one algebra at fixed rank.
#[derive(Clone, Debug)]
pub struct AlgebraSpec {
    kind: AlgebraKind,
    n: i64,
    big_n: i64,
    xi: i64,
    eps: i64,
    theta: Option<Rational64>,
    kappa: Option<Rational64>,
    phi: Option<i64>,
    /// Gram matrix of the simple roots, indexed by position in `nodes()`.
    gram: Vec<Vec<i64>>,
}

/// Simple-root vectors in the orthonormal e-basis of Z^n, used to compute
/// the Gram matrix directly (the scalar products, not a transcribed table).
fn simple_roots(kind: AlgebraKind, n: i64) -> Vec<Vec<i64>> {
    let n = n as usize;
    let mut roots: Vec<Vec<i64>> = Vec::new();
    let e = |i: usize, coef: i64| -> Vec<i64> {
        let mut v = vec![0i64; n];
        v[i] = coef;
        v
    };
    let diff = |i: usize| -> Vec<i64> {
        // e_{i+1} − e_i
        let mut v = vec![0i64; n];
        v[i + 1] = 1;
        v[i] = -1;
        v
    };
    match kind {
        AlgebraKind::Gl => {
            for a in 0..n - 1 {
                roots.push(diff(a));
            }
        }
        AlgebraKind::OOdd => {
            roots.push(e(0, 1));
            for a in 0..n - 1 {
                roots.push(diff(a));
            }
        }
        AlgebraKind::Sp => {
            roots.push(e(0, 2));
            for a in 0..n - 1 {
                roots.push(diff(a));
            }
        }
        AlgebraKind::OEven => {
            let mut r0 = vec![0i64; n];
            r0[0] = 1;
            r0[1] = 1;
            roots.push(r0);
            for a in 0..n - 1 {
                roots.push(diff(a));
            }
        }
    }
    roots
}

impl AlgebraSpec {
    /// Builds the full constant table for `kind` at rank `n ≥ 2`.
    pub fn new(kind: AlgebraKind, n: i64) -> Result<Self, AlgebraError> {
        if n < 2 {
            return Err(AlgebraError::RankTooSmall(n));
        }
        let (xi, eps, theta, phi) = match kind {
            AlgebraKind::Gl => (n + 1, 0, None, None),
            AlgebraKind::OOdd => (0, 1, Some(Rational64::new(-1, 2)), Some(0)),
            AlgebraKind::Sp => (1, -1, Some(Rational64::from(1)), Some(1)),
            AlgebraKind::OEven => (1, 1, Some(Rational64::from(-1)), Some(2)),
        };
        let kappa = theta.map(|t| t + Rational64::from(n));
        let big_n = 2 * n + 1 - xi;
        let roots = simple_roots(kind, n);
        let dot = |x: &[i64], y: &[i64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<i64>();
        let gram: Vec<Vec<i64>> = roots
            .iter()
            .map(|ra| roots.iter().map(|rb| dot(ra, rb)).collect())
            .collect();
        for (p, row) in gram.iter().enumerate() {
            debug_assert!(matches!(row[p], 1 | 2 | 4));
        }
        Ok(AlgebraSpec {
            kind,
            n,
            big_n,
            xi,
            eps,
            theta,
            kappa,
            phi,
            gram,
        })
    }

    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }

    pub fn is_gl(&self) -> bool {
        self.kind == AlgebraKind::Gl
    }

    /// Rank parameter n.
    pub fn rank(&self) -> i64 {
        self.n
    }

    /// Dimension N of the fundamental representation: 2n+1−ξ.
    pub fn fund_dim(&self) -> i64 {
        self.big_n
    }

    pub fn site_dim(&self) -> usize {
        self.big_n as usize
    }

    pub fn xi(&self) -> i64 {
        self.xi
    }

    /// ε_g: 0 for gl, +1 for orthogonal, −1 for symplectic.
    pub fn eps_g(&self) -> i64 {
        self.eps
    }

    /// θ_g for the reflection families; gl chains never consult it.
    pub fn theta(&self) -> Rational64 {
        self.theta.expect("theta is defined for o/sp kinds only")
    }

    /// Crossing shift κ = n + θ; gl chains never consult it.
    pub fn kappa(&self) -> Rational64 {
        self.kappa.expect("kappa is defined for o/sp kinds only")
    }

    pub fn has_reflection(&self) -> bool {
        self.kappa.is_some()
    }

    /// Boundary width φ_g ∈ {0,1,2}; gl chains never consult it.
    pub fn phi_g(&self) -> i64 {
        self.phi.expect("phi is defined for o/sp kinds only")
    }

    /// Fundamental index range: the contiguous integers ξ−n ..= n.
    pub fn indices(&self) -> impl Iterator<Item = i64> + Clone {
        (self.xi - self.n)..=self.n
    }

    pub fn lowest_index(&self) -> i64 {
        self.xi - self.n
    }

    pub fn contains_index(&self, i: i64) -> bool {
        i >= self.xi - self.n && i <= self.n
    }

    /// Basis position of an index, counting from the lowest index.
    pub fn index_pos(&self, i: i64) -> usize {
        debug_assert!(self.contains_index(i));
        (i - (self.xi - self.n)) as usize
    }

    pub fn pos_index(&self, p: usize) -> i64 {
        self.xi - self.n + p as i64
    }

    /// The involution i ↦ i′ = ξ − i on the fundamental index range.
    pub fn prime(&self, i: i64) -> i64 {
        debug_assert!(self.contains_index(i), "index {i} out of range");
        self.xi - i
    }

    pub fn try_prime(&self, i: i64) -> Result<i64, AlgebraError> {
        if self.contains_index(i) {
            Ok(self.xi - i)
        } else {
            Err(AlgebraError::IndexOutOfRange(i))
        }
    }

    /// Dynkin nodes: 1..n−1 for gl, 0..n−1 otherwise.
    pub fn nodes(&self) -> impl Iterator<Item = i64> + Clone {
        let lo = if self.is_gl() { 1 } else { 0 };
        lo..=(self.n - 1)
    }

    pub fn contains_node(&self, a: i64) -> bool {
        let lo = if self.is_gl() { 1 } else { 0 };
        a >= lo && a <= self.n - 1
    }

    fn node_pos(&self, a: i64) -> usize {
        debug_assert!(self.contains_node(a), "node {a} out of range");
        if self.is_gl() {
            (a - 1) as usize
        } else {
            a as usize
        }
    }

    /// Gram entry 𝔥_{a,b} of two simple roots.
    pub fn gram(&self, a: i64, b: i64) -> i64 {
        self.gram[self.node_pos(a)][self.node_pos(b)]
    }

    /// Squared length 𝔥_{a,a} of one simple root.
    pub fn gram_diag(&self, a: i64) -> i64 {
        self.gram(a, a)
    }

    /// ν_a: 2 at node 0 of o_{2n}, otherwise 1.
    pub fn nu(&self, a: i64) -> i64 {
        debug_assert!(self.contains_node(a));
        if self.kind == AlgebraKind::OEven && a == 0 {
            2
        } else {
            1
        }
    }

    /// ρ_a = 1 + δ_{a,0}(1−ε)/2: 2 at node 0 of sp_{2n}, otherwise 1.
    pub fn rho(&self, a: i64) -> i64 {
        debug_assert!(self.contains_node(a));
        if a == 0 {
            1 + (1 - self.eps) / 2
        } else {
            1
        }
    }

    /// 𝔡_a: marks the nodes whose color operator carries a half weight.
    pub fn frak_d(&self, a: i64) -> i64 {
        debug_assert!(self.contains_node(a));
        match self.kind {
            AlgebraKind::Gl | AlgebraKind::OOdd => 0,
            AlgebraKind::Sp => i64::from(a == 0),
            AlgebraKind::OEven => i64::from(a == 0 || a == 1),
        }
    }

    /// Local sign ε_i: ε_g for i > 0; 1 for i ≤ 0 on the reflection
    /// families; identically 0 for gl.
    pub fn eps_local(&self, i: i64) -> i64 {
        debug_assert!(self.contains_index(i));
        if self.eps == 0 {
            0
        } else if i > 0 {
            self.eps
        } else {
            1
        }
    }

    /// |ℓ|_g = |ℓ − ξ/2| + ξ/2 = max(ℓ, ξ−ℓ), invariant under ℓ ↦ ℓ′.
    pub fn abs_g(&self, l: i64) -> i64 {
        debug_assert!(self.contains_index(l));
        l.max(self.xi - l)
    }
}

/// Heaviside step: 1 for m ≥ 0, else 0.
pub fn theta_step(m: i64) -> i64 {
    i64::from(m >= 0)
}

/// Sign factor σ_m = 2Θ(m−1)−1: +1 for m > 0, −1 for m ≤ 0.
pub fn sigma(m: i64) -> i64 {
    2 * theta_step(m - 1) - 1
}
