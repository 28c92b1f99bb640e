//! Small finite fields `F_{p^s}` with table-driven arithmetic.
//!
//! The base field of the series kernel is algebraically closed in principle;
//! desk-scale computation works over `F_{p^s}` with `s` large enough that
//! plenty of nonzero residue constants exist (at `p = 2`, `s = 1` leaves only
//! the constant 1). Elements are encoded as integers in `[0, p^s)` whose
//! base-`p` digits are the coefficients of the residue polynomial; the
//! defining irreducible polynomial is the lexicographically first monic
//! irreducible of degree `s`, so encodings are stable across runs.
//!
//! All arithmetic goes through precomputed add/mul/inv tables built once per
//! `(p, s)` and shared read-only.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("extension degree must be >= 1")]
    BadDegree,
    #[error("field too large: p^s = {0} exceeds the table limit")]
    TooLarge(u64),
    #[error("residue constant resolves to zero in F_{{{p}^{s}}}")]
    ZeroResidue { p: u32, s: u32 },
}

/// Characteristic and extension degree of a coefficient field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub p: u32,
    pub s: u32,
}

impl FieldSpec {
    pub fn new(p: u32, s: u32) -> FieldSpec {
        FieldSpec { p, s }
    }
}

/// A field element, encoded as an integer in `[0, p^s)`.
pub type Elem = u16;

const TABLE_LIMIT: u64 = 1 << 12;

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Table-backed arithmetic for `F_{p^s}`.
pub struct Field {
    pub spec: FieldSpec,
    pub q: u32,
    /// Coefficients of the defining monic irreducible, low degree first,
    /// length `s + 1`.
    pub modulus: Vec<u32>,
    add: Vec<Elem>,
    mul: Vec<Elem>,
    neg: Vec<Elem>,
    inv: Vec<Elem>,
}

pub type FieldRef = Arc<Field>;

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{{{}^{}}}", self.spec.p, self.spec.s)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Field) -> bool {
        self.spec == other.spec
    }
}
impl Eq for Field {}

// Dense polynomial helpers over F_p, low degree first, used only while
// building the tables.
fn poly_mod_reduce(poly: &mut Vec<u32>, modulus: &[u32], p: u32) {
    let deg_m = modulus.len() - 1;
    while poly.len() > deg_m {
        let lead = *poly.last().unwrap();
        let shift = poly.len() - 1 - deg_m;
        if lead != 0 {
            for (i, &m) in modulus.iter().enumerate() {
                let idx = shift + i;
                let sub = (lead * m) % p;
                poly[idx] = (poly[idx] + p - sub) % p;
            }
        }
        poly.pop();
    }
    while poly.len() > 1 && *poly.last().unwrap() == 0 {
        poly.pop();
    }
}

fn poly_mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut out = vec![0u32; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    out
}

fn encode(digits: &[u32], p: u32) -> Elem {
    let mut v: u64 = 0;
    for &d in digits.iter().rev() {
        v = v * p as u64 + d as u64;
    }
    v as Elem
}

fn decode(mut e: u32, p: u32, s: u32) -> Vec<u32> {
    let mut digits = Vec::with_capacity(s as usize);
    for _ in 0..s {
        digits.push(e % p);
        e /= p;
    }
    digits
}

/// True when `f` (monic, degree >= 1, low-first over F_p) has no factor of
/// degree in `1..=deg/2`. Trial division is plenty at table scale.
fn poly_is_irreducible(f: &[u32], p: u32) -> bool {
    let deg = f.len() - 1;
    for d in 1..=deg / 2 {
        // all monic candidates of degree d
        let count = (p as u64).pow(d as u32);
        for c in 0..count {
            let mut g = decode(c as u32, p, d as u32);
            g.push(1);
            if poly_divides(&g, f, p) {
                return false;
            }
        }
    }
    true
}

fn poly_divides(g: &[u32], f: &[u32], p: u32) -> bool {
    // remainder of f by monic g
    let mut r: Vec<u32> = f.to_vec();
    let dg = g.len() - 1;
    while r.len() > dg {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - dg;
        if lead != 0 {
            for (i, &c) in g.iter().enumerate() {
                let idx = shift + i;
                let sub = (lead * c) % p;
                r[idx] = (r[idx] + p - sub) % p;
            }
        }
        r.pop();
    }
    r.iter().all(|&c| c == 0)
}

impl Field {
    pub fn new(spec: FieldSpec) -> Result<FieldRef, FieldError> {
        let FieldSpec { p, s } = spec;
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if s == 0 {
            return Err(FieldError::BadDegree);
        }
        let q64 = (p as u64)
            .checked_pow(s)
            .ok_or(FieldError::TooLarge(u64::MAX))?;
        if q64 > TABLE_LIMIT {
            return Err(FieldError::TooLarge(q64));
        }
        let q = q64 as u32;

        // lexicographically first monic irreducible of degree s
        let mut modulus = None;
        for c in 0..q64 {
            let mut f = decode(c as u32, p, s);
            f.push(1);
            if poly_is_irreducible(&f, p) {
                modulus = Some(f);
                break;
            }
        }
        let modulus = modulus.expect("irreducible polynomials of every degree exist");

        let n = q as usize;
        let mut add = vec![0 as Elem; n * n];
        let mut mul = vec![0 as Elem; n * n];
        let mut neg = vec![0 as Elem; n];
        let mut inv = vec![0 as Elem; n];

        for a in 0..q {
            let da = decode(a, p, s);
            let mut dn = da.clone();
            for d in dn.iter_mut() {
                *d = (p - *d) % p;
            }
            neg[a as usize] = encode(&dn, p);
            for b in 0..q {
                let db = decode(b, p, s);
                let sum: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[(a * q + b) as usize] = encode(&sum, p);
                let mut prod = poly_mul(&da, &db, p);
                poly_mod_reduce(&mut prod, &modulus, p);
                prod.resize(s as usize, 0);
                mul[(a * q + b) as usize] = encode(&prod, p);
            }
        }
        for a in 1..q {
            for b in 1..q {
                if mul[(a * q + b) as usize] == 1 {
                    inv[a as usize] = b as Elem;
                    break;
                }
            }
            debug_assert!(inv[a as usize] != 0, "every nonzero element is invertible");
        }

        Ok(Arc::new(Field {
            spec,
            q,
            modulus,
            add,
            mul,
            neg,
            inv,
        }))
    }

    pub fn p(&self) -> u32 {
        self.spec.p
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        self.add[(a as u32 * self.q + b as u32) as usize]
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        self.mul[(a as u32 * self.q + b as u32) as usize]
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        self.neg[a as usize]
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self, a: Elem) -> Elem {
        assert!(a != 0, "inverse of zero");
        self.inv[a as usize]
    }

    pub fn pow(&self, a: Elem, mut e: u64) -> Elem {
        let mut base = a;
        let mut acc: Elem = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Image of the integer `n` under `Z -> F_{p^s}`.
    pub fn from_int(&self, n: i64) -> Elem {
        let p = self.spec.p as i64;
        let r = ((n % p) + p) % p;
        r as Elem
    }

    /// Resolve an abstract residue-constant label to a concrete nonzero
    /// element: the label is reduced mod `p^s` and must not land on zero.
    pub fn resolve_label(&self, label: u32) -> Result<Elem, FieldError> {
        let e = (label % self.q) as Elem;
        if e == 0 {
            return Err(FieldError::ZeroResidue {
                p: self.spec.p,
                s: self.spec.s,
            });
        }
        Ok(e)
    }

    /// Binomial coefficient `C(n, k)` reduced mod p, digit by digit.
    pub fn binomial_mod_p(&self, n: u64, k: u64) -> Elem {
        if k > n {
            return 0;
        }
        let p = self.spec.p as u64;
        let (mut n, mut k) = (n, k);
        let mut acc: u64 = 1;
        while k > 0 || n > 0 {
            let (nd, kd) = (n % p, k % p);
            if kd > nd {
                return 0;
            }
            // C(nd, kd) mod p with nd, kd < p
            let mut c: u64 = 1;
            for i in 0..kd {
                c = c * (nd - i) % p * mod_inv(i + 1, p) % p;
            }
            acc = acc * c % p;
            n /= p;
            k /= p;
        }
        acc as Elem
    }

    /// All nonzero elements, for residue-constant sampling.
    pub fn nonzero_elems(&self) -> impl Iterator<Item = Elem> + '_ {
        (1..self.q).map(|e| e as Elem)
    }
}

fn mod_inv(a: u64, p: u64) -> u64 {
    // p is prime and a not divisible by p
    let mut result: u64 = 1;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    result
}
