//! Pauli strings, weighted Pauli sums and the transverse-field Ising model.
//!
//! A string over `n <= 64` qubits is stored as two bitmasks: bit `q` of `x`
//! (resp. `z`) is set when qubit `q` carries an X (resp. Z) component, so
//! `(x, z) = (1, 1)` is Y. Text form lists qubit 0 first.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Terms whose magnitude falls below this are dropped when a sum is merged.
pub const DROP_TOL: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `i^k` for `k` taken mod 4.
pub fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => I,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I,
    }
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    I,
    X,
    Y,
    Z,
}

impl Axis {
    pub fn from_char(c: char) -> Result<Axis> {
        match c {
            'I' => Ok(Axis::I),
            'X' => Ok(Axis::X),
            'Y' => Ok(Axis::Y),
            'Z' => Ok(Axis::Z),
            _ => Err(Error::Parse(format!("invalid Pauli letter '{c}'"))),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Axis::I => 'I',
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }

    /// 2x2 matrix of the letter.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        match self {
            Axis::I => [[l, o], [o, l]],
            Axis::X => [[o, l], [l, o]],
            Axis::Y => [[o, -I], [I, o]],
            Axis::Z => [[l, o], [o, -l]],
        }
    }
}

/// Unweighted Pauli string on `n` qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    pub n: usize,
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { n, x: 0, z: 0 }
    }

    pub fn from_axes(axes: &[Axis]) -> Self {
        let mut p = PauliString::identity(axes.len());
        for (q, &a) in axes.iter().enumerate() {
            p.set(q, a);
        }
        p
    }

    pub fn parse(s: &str) -> Result<Self> {
        let axes = s.chars().map(Axis::from_char).collect::<Result<Vec<_>>>()?;
        if axes.is_empty() || axes.len() > 64 {
            return Err(Error::Parse(format!("Pauli string length {} out of range", axes.len())));
        }
        Ok(PauliString::from_axes(&axes))
    }

    /// Single-letter string `a` on qubit `q`.
    pub fn single(n: usize, q: usize, a: Axis) -> Self {
        let mut p = PauliString::identity(n);
        p.set(q, a);
        p
    }

    pub fn axis(&self, q: usize) -> Axis {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => Axis::I,
            (1, 0) => Axis::X,
            (1, 1) => Axis::Y,
            _ => Axis::Z,
        }
    }

    pub fn set(&mut self, q: usize, a: Axis) {
        let bit = 1u64 << q;
        self.x &= !bit;
        self.z &= !bit;
        match a {
            Axis::I => {}
            Axis::X => self.x |= bit,
            Axis::Y => {
                self.x |= bit;
                self.z |= bit
            }
            Axis::Z => self.z |= bit,
        }
    }

    pub fn axes(&self) -> Vec<Axis> {
        (0..self.n).map(|q| self.axis(q)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Number of Y letters.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.axis(q) != Axis::I).collect()
    }

    /// `self * other = phase * result`.
    pub fn mul(&self, other: &PauliString) -> (Complex64, PauliString) {
        debug_assert_eq!(self.n, other.n);
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let out = PauliString { n: self.n, x, z };
        let k = self.y_count() as i64 + other.y_count() as i64 - out.y_count() as i64
            + 2 * (self.z & other.x).count_ones() as i64;
        (i_pow(k), out)
    }

    pub fn commutes(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()).is_multiple_of(2)
    }

    /// Action on a basis state: `P|j> = phase |j ^ x>`.
    #[inline]
    pub fn apply_basis(&self, j: usize) -> (Complex64, usize) {
        let sign = if ((j as u64) & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        (i_pow(self.y_count() as i64) * sign, j ^ self.x as usize)
    }

    /// Restriction to the listed qubits, relabelled 0.. in list order.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut p = PauliString::identity(qubits.len());
        for (k, &q) in qubits.iter().enumerate() {
            p.set(k, self.axis(q));
        }
        p
    }

    /// Embed into `n` qubits, local qubit `k` going to `qubits[k]`.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> PauliString {
        let mut p = PauliString::identity(n);
        for (k, &q) in qubits.iter().enumerate() {
            p.set(q, self.axis(k));
        }
        p
    }

    /// Dense `2^n x 2^n` matrix.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            let (ph, k) = self.apply_basis(j);
            m[(k, j)] = ph;
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.axis(q).to_char())?;
        }
        Ok(())
    }
}

/// Weighted Pauli string.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: Complex64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coeff: Complex64, string: PauliString) -> Self {
        PauliTerm { coeff, string }
    }

    pub fn mul(&self, other: &PauliTerm) -> PauliTerm {
        let (ph, s) = self.string.mul(&other.string);
        PauliTerm { coeff: self.coeff * other.coeff * ph, string: s }
    }
}

/// Sum of Pauli terms with merged duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    pub n: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        PauliSum { n, terms: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut s = PauliSum::zero(n);
        s.add_term(Complex64::new(1.0, 0.0), PauliString::identity(n));
        s
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = PauliTerm>) -> Self {
        let mut s = PauliSum::zero(n);
        for t in terms {
            s.add_term(t.coeff, t.string);
        }
        s.prune();
        s
    }

    /// Accumulate without pruning; call [`PauliSum::prune`] afterwards.
    pub fn add_term(&mut self, coeff: Complex64, string: PauliString) {
        assert_eq!(string.n, self.n, "qubit count mismatch");
        *self.terms.entry(string).or_insert(Complex64::new(0.0, 0.0)) += coeff;
    }

    pub fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= DROP_TOL);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PauliTerm> + '_ {
        self.terms.iter().map(|(s, c)| PauliTerm::new(*c, *s))
    }

    pub fn coeff(&self, s: &PauliString) -> Complex64 {
        self.terms.get(s).copied().unwrap_or_default()
    }

    /// `gamma = sum |c_h|`.
    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn add(&self, other: &PauliSum) -> PauliSum {
        let mut out = self.clone();
        for t in other.iter() {
            out.add_term(t.coeff, t.string);
        }
        out.prune();
        out
    }

    pub fn scale(&self, a: Complex64) -> PauliSum {
        let mut out = PauliSum::zero(self.n);
        for t in self.iter() {
            out.add_term(a * t.coeff, t.string);
        }
        out.prune();
        out
    }

    pub fn mul(&self, other: &PauliSum) -> PauliSum {
        assert_eq!(self.n, other.n, "qubit count mismatch");
        let mut out = PauliSum::zero(self.n);
        for a in self.iter() {
            for b in other.iter() {
                let t = a.mul(&b);
                out.add_term(t.coeff, t.string);
            }
        }
        out.prune();
        out
    }

    /// `self^k`, with `self^0 = I`.
    pub fn pow(&self, k: usize) -> PauliSum {
        let mut out = PauliSum::identity(self.n);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// All powers `self^0 ..= self^kmax`.
    pub fn powers(&self, kmax: usize) -> Vec<PauliSum> {
        let mut v = vec![PauliSum::identity(self.n)];
        for k in 1..=kmax {
            let next = v[k - 1].mul(self);
            v.push(next);
        }
        v
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Dense matrix; intended for small `n`.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        for t in self.iter() {
            for j in 0..d {
                let (ph, k) = t.string.apply_basis(j);
                m[(k, j)] += t.coeff * ph;
            }
        }
        m
    }

    /// `Tr[self]`.
    pub fn trace(&self) -> Complex64 {
        self.coeff(&PauliString::identity(self.n)) * (1u64 << self.n) as f64
    }

    /// One `<re> <im> <axes>` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in self.iter() {
            s.push_str(&format!("{} {} {}\n", t.coeff.re, t.coeff.im, t.string));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut n = None;
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected '<re> <im> <axes>'", lineno + 1)));
            }
            let re: f64 = f[0].parse().map_err(|_| Error::Parse(format!("line {}: bad real part", lineno + 1)))?;
            let im: f64 = f[1].parse().map_err(|_| Error::Parse(format!("line {}: bad imaginary part", lineno + 1)))?;
            let s = PauliString::parse(f[2])?;
            match n {
                None => n = Some(s.n),
                Some(m) if m != s.n => {
                    return Err(Error::Parse(format!("line {}: qubit count {} != {}", lineno + 1, s.n, m)))
                }
                _ => {}
            }
            terms.push(PauliTerm::new(Complex64::new(re, im), s));
        }
        let n = n.ok_or_else(|| Error::Parse("empty Pauli sum".into()))?;
        Ok(PauliSum::from_terms(n, terms))
    }

    /// Split every term across the partition blocks.
    pub fn factorize(&self, partition: &SystemPartition) -> Vec<FactorizedTerm> {
        self.iter()
            .map(|t| FactorizedTerm {
                coeff: t.coeff,
                factors: partition.blocks.iter().map(|b| t.string.restrict(b)).collect(),
            })
            .collect()
    }
}

/// A term of a [`PauliSum`] written as a coefficient times one local string per block.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedTerm {
    pub coeff: Complex64,
    pub factors: Vec<PauliString>,
}

/// Disjoint covering of `0..n` by qubit blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemPartition {
    pub n: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl SystemPartition {
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in blocks.iter_mut() {
            if b.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            b.sort_unstable();
            for &q in b.iter() {
                if q >= n || seen[q] {
                    return Err(Error::InvalidPartition(format!("qubit {q} out of range or repeated")));
                }
                seen[q] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPartition("blocks do not cover all qubits".into()));
        }
        Ok(SystemPartition { n, blocks })
    }

    /// Single block holding every qubit.
    pub fn whole(n: usize) -> Self {
        SystemPartition { n, blocks: vec![(0..n).collect()] }
    }
}

/// `H = -sum_{(i,j) in E} Z_i Z_j - sum_i X_i`.
pub fn build_ising(n: usize, edges: &[(usize, usize)]) -> Result<PauliSum> {
    if n == 0 || n > 64 {
        return Err(Error::InvalidConfig(format!("qubit count {n} out of range")));
    }
    let mut h = PauliSum::zero(n);
    let m1 = Complex64::new(-1.0, 0.0);
    for &(a, b) in edges {
        if a >= n || b >= n || a == b {
            return Err(Error::InvalidConfig(format!("bad edge ({a}, {b})")));
        }
        let mut s = PauliString::identity(n);
        s.set(a, Axis::Z);
        s.set(b, Axis::Z);
        h.add_term(m1, s);
    }
    for q in 0..n {
        h.add_term(m1, PauliString::single(n, q, Axis::X));
    }
    h.prune();
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_axes(s: &PauliString) -> DMatrix<Complex64> {
        // Kronecker product with qubit 0 as the least significant factor.
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for q in (0..s.n).rev() {
            let a = s.axis(q).matrix();
            let am = DMatrix::from_fn(2, 2, |r, c| a[r][c]);
            m = m.kronecker(&am);
        }
        m
    }

    #[test]
    fn matrix_matches_kronecker() {
        for txt in ["XYZI", "IIII", "YYXZ", "ZIYX"] {
            let p = PauliString::parse(txt).unwrap();
            assert!((p.to_matrix() - dense_axes(&p)).norm() < 1e-14, "{txt}");
        }
    }

    #[test]
    fn product_matches_dense() {
        let all = ["I", "X", "Y", "Z"];
        for a in all {
            for b in all {
                for c in all {
                    for d in all {
                        let p = PauliString::parse(&format!("{a}{b}")).unwrap();
                        let q = PauliString::parse(&format!("{c}{d}")).unwrap();
                        let (ph, r) = p.mul(&q);
                        let lhs = p.to_matrix() * q.to_matrix();
                        let rhs = r.to_matrix() * ph;
                        assert!((lhs - rhs).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn text_roundtrip() {
        let h = build_ising(3, &[(0, 1), (1, 2)]).unwrap();
        let back = PauliSum::from_text(&h.to_text()).unwrap();
        assert_eq!(h, back);
        assert!(PauliSum::from_text("1 0 XQ").is_err());
        assert!(PauliSum::from_text("1 0 XX\n1 0 X").is_err());
    }

    #[test]
    fn ising_line() {
        let h = build_ising(8, &(0..7).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap();
        assert_eq!(h.len(), 15);
        assert!(h.to_text().contains("-1 0 ZZIIIIII"));
        assert!((h.l1_norm() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn factorize_roundtrip() {
        let h = build_ising(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let part = SystemPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        for (ft, t) in h.factorize(&part).iter().zip(h.iter()) {
            let mut s = PauliString::identity(4);
            for (b, f) in part.blocks.iter().zip(&ft.factors) {
                let e = f.embed(4, b);
                s.x |= e.x;
                s.z |= e.z;
            }
            assert_eq!(s, t.string);
            assert_eq!(ft.coeff, t.coeff);
        }
    }

    #[test]
    fn bad_partition() {
        assert!(SystemPartition::new(4, vec![vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(SystemPartition::new(4, vec![vec![0, 1], vec![2]]).is_err());
    }
}
