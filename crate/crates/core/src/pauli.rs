//! Pauli-string algebra.
//!
//! A [`PauliString`] is a tensor product of single-qubit operators from
//! `{I, X, Y, Z}` packed as a base-4 integer. Qubit 1 (index 0) is the most
//! significant digit and the leftmost tensor factor, which also makes it the
//! most significant bit of a dense amplitude index.
//!
//! [`PauliSum`] is a sparse linear combination keyed by string, iterated in
//! integer order so every printed or serialized sum is reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::CMatrix;

/// Coefficients below this magnitude are dropped whenever a sum is built.
pub const PRUNE_TOL: f64 = 1e-12;

/// Largest register a packed string can describe (base-4 digits in a `u64`).
pub const MAX_STRING_QUBITS: usize = 32;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    fn from_code(code: u64) -> Pauli {
        Self::ALL[(code & 3) as usize]
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' | '0' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// `a · b = phase · c` for single-qubit Paulis.
    pub fn mul(self, other: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        let i = Complex64::new(0.0, 1.0);
        match (self, other) {
            (I, p) | (p, I) => (ONE, p),
            (a, b) if a == b => (ONE, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
            _ => unreachable!(),
        }
    }
}

/// Tensor product of single-qubit Paulis on `n_qubits` qubits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: u8,
    code: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(
            (1..=MAX_STRING_QUBITS).contains(&n_qubits),
            "Pauli strings support 1..={MAX_STRING_QUBITS} qubits"
        );
        PauliString { n_qubits: n_qubits as u8, code: 0 }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut s = Self::identity(letters.len());
        for (q, &p) in letters.iter().enumerate() {
            s = s.with_letter(q, p);
        }
        s
    }

    /// Decode a base-4 integer. Panics if `code >= 4^n`.
    pub fn from_code(n_qubits: usize, code: u64) -> Self {
        let s = Self::identity(n_qubits);
        if n_qubits < MAX_STRING_QUBITS {
            assert!(code < 1u64 << (2 * n_qubits), "code out of range for {n_qubits} qubits");
        }
        PauliString { code, ..s }
    }

    /// A single letter on qubit `q` of an `n`-qubit register.
    pub fn single(n_qubits: usize, q: usize, p: Pauli) -> Self {
        Self::identity(n_qubits).with_letter(q, p)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn code(&self) -> u64 {
        self.code
    }

    fn shift(&self, q: usize) -> u32 {
        (2 * (self.n_qubits() - 1 - q)) as u32
    }

    pub fn letter(&self, q: usize) -> Pauli {
        assert!(q < self.n_qubits());
        Pauli::from_code(self.code >> self.shift(q))
    }

    pub fn with_letter(mut self, q: usize, p: Pauli) -> Self {
        assert!(q < self.n_qubits());
        let sh = self.shift(q);
        self.code = (self.code & !(3u64 << sh)) | ((p as u64) << sh);
        self
    }

    pub fn letters(&self) -> impl Iterator<Item = Pauli> + '_ {
        (0..self.n_qubits()).map(move |q| self.letter(q))
    }

    pub fn is_identity(&self) -> bool {
        self.code == 0
    }

    /// Qubits carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.letter(q) != Pauli::I).collect()
    }

    pub fn weight(&self) -> usize {
        self.letters().filter(|&p| p != Pauli::I).count()
    }

    pub fn y_count(&self) -> usize {
        self.letters().filter(|&p| p == Pauli::Y).count()
    }

    /// `σ^T = sign · σ` with `sign = (-1)^{#Y}`.
    pub fn transpose_parity(&self) -> i32 {
        if self.y_count() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Bit mask (in amplitude-index convention) of qubits flipped by the string.
    pub fn x_mask(&self) -> usize {
        self.mask_where(|p| matches!(p, Pauli::X | Pauli::Y))
    }

    /// Bit mask of qubits contributing a `(-1)^bit` phase.
    pub fn z_mask(&self) -> usize {
        self.mask_where(|p| matches!(p, Pauli::Z | Pauli::Y))
    }

    fn mask_where(&self, f: impl Fn(Pauli) -> bool) -> usize {
        let n = self.n_qubits();
        (0..n)
            .filter(|&q| f(self.letter(q)))
            .fold(0usize, |m, q| m | (1usize << (n - 1 - q)))
    }

    /// Action on a computational basis state: `σ|c> = phase · |c ^ x_mask>`.
    pub fn apply_to_basis(&self, c: usize) -> (Complex64, usize) {
        let phase = basis_phase(self.y_count(), self.z_mask(), c);
        (phase, c ^ self.x_mask())
    }

    /// Product `self · other = phase · result`.
    pub fn mul(&self, other: &PauliString) -> Result<(Complex64, PauliString)> {
        check_size(self.n_qubits(), other.n_qubits())?;
        let mut phase = ONE;
        let mut out = PauliString::identity(self.n_qubits());
        for q in 0..self.n_qubits() {
            let (ph, p) = self.letter(q).mul(other.letter(q));
            phase *= ph;
            out = out.with_letter(q, p);
        }
        Ok((phase, out))
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = (0..self.n_qubits())
            .filter(|&q| {
                let (a, b) = (self.letter(q), other.letter(q));
                a != Pauli::I && b != Pauli::I && a != b
            })
            .count();
        anti % 2 == 0
    }

    /// `[self, other] = coefficient · result`, or `None` when they commute.
    pub fn commutator(&self, other: &PauliString) -> Result<Option<(Complex64, PauliString)>> {
        check_size(self.n_qubits(), other.n_qubits())?;
        if self.commutes_with(other) {
            return Ok(None);
        }
        let (phase, s) = self.mul(other)?;
        Ok(Some((phase * 2.0, s)))
    }

    /// Place this string on qubits `offset..offset+n` of a `total`-qubit register.
    pub fn embed(&self, offset: usize, total: usize) -> PauliString {
        assert!(offset + self.n_qubits() <= total);
        let mut out = PauliString::identity(total);
        for q in 0..self.n_qubits() {
            out = out.with_letter(offset + q, self.letter(q));
        }
        out
    }

    /// Letters on the listed qubits, in the listed order.
    pub fn restrict(&self, qubits: &[usize]) -> PauliString {
        let mut out = PauliString::identity(qubits.len());
        for (i, &q) in qubits.iter().enumerate() {
            out = out.with_letter(i, self.letter(q));
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits();
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for c in 0..dim {
            let (ph, r) = self.apply_to_basis(c);
            m[(r, c)] = ph;
        }
        m
    }

    /// Every string on `n` qubits in integer order.
    pub fn all(n_qubits: usize) -> impl Iterator<Item = PauliString> {
        assert!(n_qubits <= 12, "enumerating 4^{n_qubits} strings is not supported");
        (0..(1u64 << (2 * n_qubits))).map(move |c| PauliString::from_code(n_qubits, c))
    }
}

pub(crate) fn basis_phase(y_count: usize, z_mask: usize, c: usize) -> Complex64 {
    let iy = match y_count % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    };
    if (c & z_mask).count_ones() % 2 == 1 {
        -iy
    } else {
        iy
    }
}

fn check_size(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, found })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.letters() {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.chars().count() > MAX_STRING_QUBITS {
            return Err(Error::Parse(format!("bad Pauli string '{s}'")));
        }
        let letters = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad letter '{c}' in '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_letters(&letters))
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sparse operator `Σ c_s σ_s` over a fixed register.
#[derive(Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        PauliSum { n_qubits, terms: BTreeMap::new() }
    }

    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut s = Self::zero(n_qubits);
        for (p, c) in terms {
            check_size(n_qubits, p.n_qubits())?;
            s.add_term(p, c);
        }
        Ok(s)
    }

    /// Convenience for real coefficients given as `("XZ", 0.5)` pairs.
    pub fn from_real(n_qubits: usize, terms: &[(&str, f64)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|(s, c)| Ok((s.parse::<PauliString>()?, Complex64::new(*c, 0.0))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n_qubits, parsed)
    }

    pub fn single(p: PauliString, c: f64) -> Self {
        let mut s = Self::zero(p.n_qubits());
        s.add_term(p, Complex64::new(c, 0.0));
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or(ZERO)
    }

    /// Accumulate `c · p`, dropping the term if it cancels below [`PRUNE_TOL`].
    pub fn add_term(&mut self, p: PauliString, c: Complex64) {
        assert_eq!(p.n_qubits(), self.n_qubits, "term width mismatch");
        let entry = self.terms.entry(p).or_insert(ZERO);
        *entry += c;
        if entry.norm() < PRUNE_TOL {
            self.terms.remove(&p);
        }
    }

    pub fn scale(&self, c: Complex64) -> PauliSum {
        let mut out = PauliSum::zero(self.n_qubits);
        for (p, v) in &self.terms {
            out.add_term(*p, v * c);
        }
        out
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        check_size(self.n_qubits, other.n_qubits)?;
        let mut out = self.clone();
        for (p, v) in &other.terms {
            out.add_term(*p, *v);
        }
        Ok(out)
    }

    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum> {
        check_size(self.n_qubits, other.n_qubits)?;
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (ph, s) = a.mul(b)?;
                *acc.entry(s).or_insert(ZERO) += ph * ca * cb;
            }
        }
        Ok(Self::from_accumulated(self.n_qubits, acc))
    }

    /// `[self, other]` using the single-string commutator rule term by term.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        check_size(self.n_qubits, other.n_qubits)?;
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if let Some((f, s)) = a.commutator(b)? {
                    *acc.entry(s).or_insert(ZERO) += f * ca * cb;
                }
            }
        }
        Ok(Self::from_accumulated(self.n_qubits, acc))
    }

    fn from_accumulated(n_qubits: usize, mut acc: BTreeMap<PauliString, Complex64>) -> PauliSum {
        acc.retain(|_, v| v.norm() >= PRUNE_TOL);
        PauliSum { n_qubits, terms: acc }
    }

    /// `Σ |c_s|^2`; the Hilbert-Schmidt norm squared is `2^N` times this.
    pub fn coeff_norm_sq(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    /// `Tr(self · other)` via Pauli orthogonality.
    pub fn trace_product(&self, other: &PauliSum) -> Result<Complex64> {
        check_size(self.n_qubits, other.n_qubits)?;
        let dim = (1u64 << self.n_qubits) as f64;
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        let s: Complex64 = small.terms.iter().map(|(p, c)| c * large.coefficient(p)).sum();
        Ok(s * dim)
    }

    pub fn is_hermitian(&self) -> bool {
        self.terms.values().all(|c| c.im.abs() <= PRUNE_TOL)
    }

    /// Real parts of the coefficients; intended for Hermitian sums.
    pub fn real_coefficients(&self) -> Vec<(PauliString, f64)> {
        self.terms.iter().map(|(p, c)| (*p, c.re)).collect()
    }

    pub fn to_dense(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for (p, coef) in &self.terms {
            let (xm, zm, ny) = (p.x_mask(), p.z_mask(), p.y_count());
            for c in 0..dim {
                m[(c ^ xm, c)] += coef * basis_phase(ny, zm, c);
            }
        }
        m
    }

    /// Decompose a Hermitian matrix: `c_s = Tr(M σ_s) / 2^N`.
    pub fn decompose(matrix: &CMatrix) -> Result<PauliSum> {
        let n = dimension_qubits(matrix)?;
        let dev = hermitian_deviation(matrix);
        if dev > 1e-10 {
            return Err(Error::NonHermitian { deviation: dev });
        }
        let mut sum = Self::decompose_any(matrix)?;
        for c in sum.terms.values_mut() {
            c.im = 0.0;
        }
        sum.terms.retain(|_, v| v.norm() >= PRUNE_TOL);
        debug_assert_eq!(sum.n_qubits, n);
        Ok(sum)
    }

    /// Decomposition without the Hermiticity check (complex coefficients).
    pub fn decompose_any(matrix: &CMatrix) -> Result<PauliSum> {
        let n = dimension_qubits(matrix)?;
        let dim = 1usize << n;
        let mut acc = BTreeMap::new();
        let mut buf = vec![ZERO; dim];
        for xm in 0..dim {
            // f(c) = M[c, c ^ x]; the z-sum is a Walsh-Hadamard transform.
            for (c, b) in buf.iter_mut().enumerate() {
                *b = matrix[(c, c ^ xm)];
            }
            walsh_hadamard(&mut buf);
            for (zm, val) in buf.iter().enumerate() {
                if val.norm() < PRUNE_TOL * dim as f64 {
                    continue;
                }
                // Letters per qubit: x only -> X, z only -> Z, both -> Y.
                let mut s = PauliString::identity(n);
                for q in 0..n {
                    let bit = 1usize << (n - 1 - q);
                    let letter = match (xm & bit != 0, zm & bit != 0) {
                        (false, false) => Pauli::I,
                        (true, false) => Pauli::X,
                        (true, true) => Pauli::Y,
                        (false, true) => Pauli::Z,
                    };
                    s = s.with_letter(q, letter);
                }
                // Tr(M σ) = Σ_c M[c, c^x] · phase_σ(c); the WHT supplied (-1)^{c·z}.
                let iy = basis_phase(s.y_count(), 0, 0);
                let c = val * iy / dim as f64;
                if c.norm() >= PRUNE_TOL {
                    acc.insert(s, c);
                }
            }
        }
        Ok(PauliSum { n_qubits: n, terms: acc })
    }

    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, v| v.norm() >= tol);
    }
}

fn walsh_hadamard(buf: &mut [Complex64]) {
    let mut h = 1;
    while h < buf.len() {
        for i in (0..buf.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (buf[j], buf[j + h]);
                buf[j] = a + b;
                buf[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Number of qubits of a square `2^N` matrix.
pub fn dimension_qubits(m: &CMatrix) -> Result<usize> {
    let dim = m.nrows();
    if dim != m.ncols() || dim == 0 || !dim.is_power_of_two() || dim > 1 << 12 {
        return Err(Error::BadDimension(dim.max(m.ncols())));
    }
    Ok(dim.trailing_zeros() as usize)
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            dev = dev.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    dev
}

impl fmt::Debug for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliSum[{}]({})", self.n_qubits, self)
    }
}

/// Textual form `1.0*ZI + -0.5*IZ`; complex coefficients print as `(re,im)*XY`.
impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (p, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c.im == 0.0 {
                write!(f, "{:?}*{}", c.re, p)?;
            } else {
                write!(f, "({:?},{:?})*{}", c.re, c.im, p)?;
            }
        }
        Ok(())
    }
}

impl FromStr for PauliSum {
    type Err = Error;

    /// Parses the [`Display`](fmt::Display) form. Terms are separated by `+`
    /// (a leading `-` on a coefficient is allowed, as is `a - b`).
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty Pauli sum".into()));
        }
        let mut pieces: Vec<String> = Vec::new();
        let mut depth = 0i32;
        let mut cur = String::new();
        let chars: Vec<char> = compact.chars().collect();
        for (i, &ch) in chars.iter().enumerate() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
            let prev = if i > 0 { Some(chars[i - 1]) } else { None };
            let boundary = depth == 0
                && (ch == '+' || ch == '-')
                && !matches!(prev, None | Some('e') | Some('E') | Some('+') | Some('-') | Some('('));
            if boundary {
                pieces.push(std::mem::take(&mut cur));
                if ch == '-' {
                    cur.push('-');
                }
            } else {
                cur.push(ch);
            }
        }
        pieces.push(cur);

        let mut terms = Vec::new();
        let mut width = None;
        for piece in pieces.iter().map(|p| p.trim_start_matches('+')) {
            if piece == "0" && pieces.len() == 1 {
                return Err(Error::Parse("the zero sum carries no register width".into()));
            }
            let (coef, letters) = piece
                .rsplit_once('*')
                .ok_or_else(|| Error::Parse(format!("term '{piece}' lacks '*'")))?;
            let p: PauliString = letters.parse()?;
            if *width.get_or_insert(p.n_qubits()) != p.n_qubits() {
                return Err(Error::Parse(format!("term '{piece}' has a different width")));
            }
            terms.push((p, parse_coefficient(coef)?));
        }
        PauliSum::from_terms(width.unwrap_or(1), terms)
    }
}

fn parse_coefficient(s: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("bad coefficient '{s}'"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) if rest.starts_with('(') => (true, rest),
        _ => (false, s),
    };
    let c = if let Some(inner) = body.strip_prefix('(').and_then(|b| b.strip_suffix(')')) {
        let (re, im) = inner.split_once(',').ok_or_else(bad)?;
        Complex64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?)
    } else {
        Complex64::new(body.parse().map_err(|_| bad())?, 0.0)
    };
    Ok(if neg { -c } else { c })
}

impl Serialize for PauliSum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term {
            pauli: String,
            re: f64,
            im: f64,
        }
        #[derive(Serialize)]
        struct Repr {
            n_qubits: usize,
            terms: Vec<Term>,
        }
        Repr {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| Term { pauli: p.to_string(), re: c.re, im: c.im })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PauliSum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Term {
            pauli: PauliString,
            re: f64,
            #[serde(default)]
            im: f64,
        }
        #[derive(Deserialize)]
        struct Repr {
            n_qubits: usize,
            terms: Vec<Term>,
        }
        let r = Repr::deserialize(d)?;
        PauliSum::from_terms(r.n_qubits, r.terms.into_iter().map(|t| (t.pauli, Complex64::new(t.re, t.im))))
            .map_err(serde::de::Error::custom)
    }
}

/// `[σ_l^T, σ_j] = F_{ljh} σ_h`, stored densely over all `16^N` pairs.
#[derive(Clone, Debug)]
pub struct StructureTable {
    n_qubits: usize,
    entries: Vec<Option<(PauliString, Complex64)>>,
}

impl StructureTable {
    pub fn build(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 4 {
            return Err(Error::TableTooLarge(n_qubits));
        }
        let strings: Vec<PauliString> = PauliString::all(n_qubits).collect();
        let mut entries = Vec::with_capacity(strings.len() * strings.len());
        for l in &strings {
            let sign = l.transpose_parity() as f64;
            for j in &strings {
                entries.push(l.commutator(j)?.map(|(f, h)| (h, f * sign)));
            }
        }
        Ok(StructureTable { n_qubits, entries })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn get(&self, l: &PauliString, j: &PauliString) -> Option<(PauliString, Complex64)> {
        let side = 1usize << (2 * self.n_qubits);
        self.entries[l.code() as usize * side + j.code() as usize]
    }
}
