//! Planar link patterns, meander matrices, and the kappa = 4 incidence
//! matrix, together with the pattern surgery (link removal, tying,
//! rotation, reflection) that drives the recursive asymptotics.

use crate::{Error, Result};
use nalgebra::DMatrix;
use std::fmt;
use std::str::FromStr;

/// A planar (non-crossing) pair partition of {1, ..., 2N}, stored in
/// canonical form: each link as (a, b) with a < b, links sorted by a.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkPattern {
    links: Vec<(usize, usize)>,
}

impl LinkPattern {
    pub fn new(pairs: &[(usize, usize)]) -> Result<Self> {
        let n = pairs.len();
        if n == 0 {
            return Err(Error::domain("empty link pattern"));
        }
        let mut links: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(p, q)| (p.min(q), p.max(q)))
            .collect();
        links.sort_unstable();
        let mut seen = vec![false; 2 * n + 1];
        for &(a, b) in &links {
            if a == 0 || b > 2 * n || a == b {
                return Err(Error::domain(format!(
                    "indices must cover 1..{} exactly once",
                    2 * n
                )));
            }
            for i in [a, b] {
                if seen[i] {
                    return Err(Error::domain(format!("index {i} appears twice")));
                }
                seen[i] = true;
            }
        }
        for r in 0..n {
            for s in (r + 1)..n {
                let (a1, b1) = links[r];
                let (a2, b2) = links[s];
                if a1 < a2 && a2 < b1 && b1 < b2 {
                    return Err(Error::domain(format!(
                        "links {a1}-{b1} and {a2}-{b2} cross"
                    )));
                }
            }
        }
        Ok(LinkPattern { links })
    }

    /// Number of links N.
    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    /// Number of endpoints 2N.
    pub fn n_points(&self) -> usize {
        2 * self.links.len()
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// The index linked to `i` (1-based).
    pub fn partner(&self, i: usize) -> usize {
        for &(a, b) in &self.links {
            if a == i {
                return b;
            }
            if b == i {
                return a;
            }
        }
        panic!("index {i} out of range for pattern {self}");
    }

    pub fn has_link(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.links.contains(&key)
    }

    /// Left endpoints a_1 < a_2 < ... < a_N.
    pub fn a_endpoints(&self) -> Vec<usize> {
        self.links.iter().map(|&(a, _)| a).collect()
    }

    /// Right endpoints in link order.
    pub fn b_endpoints(&self) -> Vec<usize> {
        self.links.iter().map(|&(_, b)| b).collect()
    }

    /// Remove the adjacent link {j, j+1} and relabel the remaining
    /// endpoints down by two.
    pub fn remove_link(&self, j: usize) -> Result<LinkPattern> {
        if !self.has_link(j, j + 1) {
            return Err(Error::domain(format!("link {{{},{}}} not in {self}", j, j + 1)));
        }
        if self.n_links() == 1 {
            return Err(Error::domain("cannot remove the last link"));
        }
        let relabel = |i: usize| if i > j + 1 { i - 2 } else { i };
        let pairs: Vec<(usize, usize)> = self
            .links
            .iter()
            .filter(|&&(a, b)| (a, b) != (j, j + 1))
            .map(|&(a, b)| (relabel(a), relabel(b)))
            .collect();
        LinkPattern::new(&pairs)
    }

    /// The tying operation: replace {j,k1}, {j+1,k2} by {j,j+1}, {k1,k2};
    /// identity when {j,j+1} is already a link.  `j = 2N` is interpreted
    /// cyclically (ties 2N with 1).
    pub fn tie_links(&self, j: usize) -> Result<LinkPattern> {
        let n2 = self.n_points();
        if j == 0 || j > n2 {
            return Err(Error::domain(format!("tie index {j} out of 1..{n2}")));
        }
        let jp = if j == n2 { 1 } else { j + 1 };
        if self.has_link(j, jp) {
            return Ok(self.clone());
        }
        let k1 = self.partner(j);
        let k2 = self.partner(jp);
        let mut pairs: Vec<(usize, usize)> = self
            .links
            .iter()
            .copied()
            .filter(|&(a, b)| !(a == j || b == j || a == jp || b == jp))
            .collect();
        pairs.push((j, jp));
        pairs.push((k1, k2));
        LinkPattern::new(&pairs)
    }

    /// Cyclic rotation sigma: i -> i-1 with 1 -> 2N (so for N=2,
    /// {{1,2},{3,4}} <-> {{1,4},{2,3}}).
    pub fn rotate(&self) -> LinkPattern {
        let n2 = self.n_points();
        let map = |i: usize| if i == 1 { n2 } else { i - 1 };
        let pairs: Vec<(usize, usize)> = self.links.iter().map(|&(a, b)| (map(a), map(b))).collect();
        LinkPattern::new(&pairs).expect("rotation preserves planarity")
    }

    /// Reflection i -> 2N+1-i; an involution.
    pub fn reflect(&self) -> LinkPattern {
        let n2 = self.n_points();
        let pairs: Vec<(usize, usize)> =
            self.links.iter().map(|&(a, b)| (n2 + 1 - a, n2 + 1 - b)).collect();
        LinkPattern::new(&pairs).expect("reflection preserves planarity")
    }

    /// Number of loops in the meander formed by this pattern over the
    /// mirror image of `other`: connected components of the union graph in
    /// which every index carries one link from each pattern.
    pub fn meander_loops(&self, other: &LinkPattern) -> Result<usize> {
        if self.n_links() != other.n_links() {
            return Err(Error::domain(format!(
                "loop count needs equal sizes, got {} and {}",
                self.n_links(),
                other.n_links()
            )));
        }
        let n2 = self.n_points();
        let mut visited = vec![false; n2 + 1];
        let mut loops = 0;
        for start in 1..=n2 {
            if visited[start] {
                continue;
            }
            loops += 1;
            let mut i = start;
            loop {
                visited[i] = true;
                let j = self.partner(i);
                visited[j] = true;
                i = other.partner(j);
                if i == start {
                    break;
                }
            }
        }
        Ok(loops)
    }
}

impl fmt::Display for LinkPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.links.iter().map(|&(a, b)| format!("{a}-{b}")).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for LinkPattern {
    type Err = Error;

    /// Parse the "1-2.3-4" format.
    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in s.split('.') {
            let (a, b) = part
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("bad link '{part}' in pattern '{s}'")))?;
            let a: usize = a.trim().parse().map_err(|_| Error::Config(format!("bad index '{a}'")))?;
            let b: usize = b.trim().parse().map_err(|_| Error::Config(format!("bad index '{b}'")))?;
            pairs.push((a, b));
        }
        LinkPattern::new(&pairs)
    }
}

/// Catalan number C(2n,n)/(n+1).
pub fn catalan(n: usize) -> u64 {
    let mut c: u128 = 1;
    for i in 0..n as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c as u64
}

/// All planar link patterns on {1..2N} in canonical order: ascending
/// lexicographic on the flattened link list (a_1, b_1, a_2, b_2, ...), so
/// the fully nested-free pattern {{1,2},{3,4},...} comes first and the
/// rainbow comes last.
pub fn enumerate_patterns(n: usize) -> Result<Vec<LinkPattern>> {
    if n == 0 || n > 8 {
        return Err(Error::domain(format!("pattern enumeration supports 1..=8, got {n}")));
    }
    // Pairing the first label with one an odd offset away splits the rest
    // into an inside and an outside block that must each be matched within
    // themselves; recursing on the blocks generates exactly the non-crossing
    // pairings, each once.
    fn gen(labels: &[usize]) -> Vec<Vec<(usize, usize)>> {
        if labels.is_empty() {
            return vec![Vec::new()];
        }
        let a = labels[0];
        let mut out = Vec::new();
        for k in (1..labels.len()).step_by(2) {
            let b = labels[k];
            let inner = gen(&labels[1..k]);
            let outer = gen(&labels[k + 1..]);
            for inn in &inner {
                for ext in &outer {
                    let mut pairs = Vec::with_capacity(labels.len() / 2);
                    pairs.push((a, b));
                    pairs.extend_from_slice(inn);
                    pairs.extend_from_slice(ext);
                    out.push(pairs);
                }
            }
        }
        out
    }
    let labels: Vec<usize> = (1..=2 * n).collect();
    let mut out: Vec<LinkPattern> = gen(&labels)
        .into_iter()
        .map(|pairs| LinkPattern::new(&pairs).expect("non-crossing by construction"))
        .collect();
    out.sort();
    if out.len() != catalan(n) as usize {
        return Err(Error::domain(format!(
            "enumeration bug: got {} patterns for N={n}, expected {}",
            out.len(),
            catalan(n)
        )));
    }
    Ok(out)
}

/// A meander matrix: entries nu^loops(alpha,beta) over the canonical
/// pattern enumeration, or the 0/1 renormalized variant (1 iff one loop).
#[derive(Debug, Clone)]
pub struct MeanderMatrix {
    pub n: usize,
    pub fugacity: Option<f64>,
    pub patterns: Vec<LinkPattern>,
    pub mat: DMatrix<f64>,
}

pub fn meander_matrix(n: usize, nu: f64) -> Result<MeanderMatrix> {
    meander_matrix_impl(n, Some(nu))
}

pub fn renormalized_meander_matrix(n: usize) -> Result<MeanderMatrix> {
    meander_matrix_impl(n, None)
}

fn meander_matrix_impl(n: usize, nu: Option<f64>) -> Result<MeanderMatrix> {
    let patterns = enumerate_patterns(n)?;
    let dim = patterns.len();
    let mut mat = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let loops = patterns[i].meander_loops(&patterns[j])?;
            let v = match nu {
                Some(nu) => nu.powi(loops as i32),
                None => {
                    if loops == 1 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            mat[(i, j)] = v;
            mat[(j, i)] = v;
        }
    }
    Ok(MeanderMatrix { n, fugacity: nu, patterns, mat })
}

impl MeanderMatrix {
    pub fn determinant(&self) -> f64 {
        self.mat.clone().lu().determinant()
    }

    /// Invertibility by LU with an absolute pivot threshold (the practical
    /// test used for the renormalized matrix, which has no closed-form
    /// determinant here).
    pub fn invertible(&self, pivot_threshold: f64) -> bool {
        let lu = self.mat.clone().full_piv_lu();
        let u = lu.u();
        (0..u.nrows().min(u.ncols())).all(|i| u[(i, i)].abs() > pivot_threshold)
    }
}

fn binom(n: u64, k: i64) -> i64 {
    if k < 0 || k as u64 > n {
        return 0;
    }
    let k = k as u64;
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc as i64
}

/// Chebyshev-product reference for det M_nu:
/// prod_{n=1}^{N} U_n(nu)^(a_{N,n}) with
/// a_{N,n} = C(2N,N-n) - 2 C(2N,N-n-1) + C(2N,N-n-2) and U_n the
/// Chebyshev polynomials normalized by U_n(2 cos t) = sin((n+1)t)/sin(t).
pub fn meander_det_reference(n: usize, nu: f64) -> Result<f64> {
    if n == 0 || n > 8 {
        return Err(Error::domain(format!("det reference supports 1..=8, got {n}")));
    }
    // U_0 = 1, U_1 = nu, U_{k+1} = nu U_k - U_{k-1}
    let mut u_prev = 1.0f64;
    let mut u = nu;
    let mut det = 1.0f64;
    for k in 1..=n {
        let a = binom(2 * n as u64, n as i64 - k as i64)
            - 2 * binom(2 * n as u64, n as i64 - k as i64 - 1)
            + binom(2 * n as u64, n as i64 - k as i64 - 2);
        det *= u.powi(a as i32);
        let next = nu * u - u_prev;
        u_prev = u;
        u = next;
    }
    Ok(det)
}

/// True iff the meander matrix is invertible at this kappa for patterns of
/// size N: kappa must not equal 4p/p' with coprime integers p, p' and
/// 2 <= p <= N+1.
pub fn kappa_invertibility(n: usize, kappa: f64) -> Result<bool> {
    if !(kappa > 0.0 && kappa < 8.0) {
        return Err(Error::domain(format!("kappa must lie in (0,8), got {kappa}")));
    }
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    for p in 2..=(n as u64 + 1) {
        let pp = 4.0 * p as f64 / kappa;
        let q = pp.round();
        if q >= 1.0 && (pp - q).abs() < 1e-9 && gcd(p, q as u64) == 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The kappa = 4 incidence matrix K(alpha, gamma): 1 iff each link of
/// gamma joins one left endpoint of alpha to one right endpoint of alpha.
pub fn incidence_matrix(n: usize) -> Result<(Vec<LinkPattern>, DMatrix<f64>)> {
    if n > 6 {
        return Err(Error::domain(format!("incidence matrix supports N <= 6, got {n}")));
    }
    let patterns = enumerate_patterns(n)?;
    let dim = patterns.len();
    let mut mat = DMatrix::zeros(dim, dim);
    for (i, alpha) in patterns.iter().enumerate() {
        let aset: Vec<bool> = {
            let mut v = vec![false; 2 * n + 1];
            for &a in &alpha.a_endpoints() {
                v[a] = true;
            }
            v
        };
        for (j, gamma) in patterns.iter().enumerate() {
            let ok = gamma
                .links()
                .iter()
                .all(|&(p, q)| aset[p] != aset[q]);
            if ok {
                mat[(i, j)] = 1.0;
            }
        }
    }
    Ok((patterns, mat))
}

/// Exact rational inverse of a small integer matrix (entries assumed
/// integral), via fraction Gaussian elimination over i128.  Returns the
/// inverse as (numerator, denominator) pairs.
pub fn rational_inverse(mat: &DMatrix<f64>) -> Result<Vec<Vec<(i128, i128)>>> {
    let n = mat.nrows();
    if n != mat.ncols() {
        return Err(Error::domain("rational inverse needs a square matrix"));
    }
    #[derive(Clone, Copy)]
    struct Q(i128, i128); // num, den > 0
    fn gcd(a: i128, b: i128) -> i128 {
        let (mut a, mut b) = (a.abs(), b.abs());
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a.max(1)
    }
    impl Q {
        fn reduce(self) -> Q {
            let g = gcd(self.0, self.1);
            let s = if self.1 < 0 { -1 } else { 1 };
            Q(s * self.0 / g, s * self.1 / g)
        }
        fn mul(self, o: Q) -> Q {
            Q(self.0.checked_mul(o.0).expect("overflow"), self.1.checked_mul(o.1).expect("overflow")).reduce()
        }
        fn sub(self, o: Q) -> Q {
            let num = self
                .0
                .checked_mul(o.1)
                .and_then(|x| o.0.checked_mul(self.1).map(|y| x - y))
                .expect("overflow");
            Q(num, self.1.checked_mul(o.1).expect("overflow")).reduce()
        }
        fn inv(self) -> Q {
            Q(self.1, self.0).reduce()
        }
        fn is_zero(self) -> bool {
            self.0 == 0
        }
    }
    let mut a: Vec<Vec<Q>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = mat[(i, j)];
                    if (v - v.round()).abs() > 1e-9 {
                        panic!("rational_inverse expects integer entries");
                    }
                    Q(v.round() as i128, 1)
                })
                .collect()
        })
        .collect();
    let mut inv: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| Q(i128::from(i == j), 1)).collect())
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Singular("incidence matrix not invertible".into()))?;
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pinv = a[col][col].inv();
        for j in 0..n {
            a[col][j] = a[col][j].mul(pinv);
            inv[col][j] = inv[col][j].mul(pinv);
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col];
                for j in 0..n {
                    let x = a[col][j].mul(f);
                    a[r][j] = a[r][j].sub(x);
                    let y = inv[col][j].mul(f);
                    inv[r][j] = inv[r][j].sub(y);
                }
            }
        }
    }
    Ok(inv
        .into_iter()
        .map(|row| row.into_iter().map(|q| (q.0, q.1)).collect())
        .collect())
}
