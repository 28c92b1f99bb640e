//! Truncated bivariate power series over a small finite field.
//!
//! A [`TruncSeries`] stores the exact coefficients of all monomials
//! `x^i y^j` with `i + j < guaranteed_order`; nothing is known beyond that
//! bound. Every operation tracks the guarantee conservatively, and any query
//! whose answer could depend on unknown coefficients reports
//! [`SeriesError::TruncationInsufficient`] instead of guessing.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Elem, Field, FieldError, FieldRef, FieldSpec};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("operands live in different coefficient fields")]
    FieldMismatch,
    #[error("series is not a unit (zero constant term)")]
    NotAUnit,
    #[error("truncation insufficient: {0}")]
    TruncationInsufficient(String),
    #[error("series is identically zero within the guaranteed order")]
    ZeroWithinGuarantee,
    #[error("monomial x^{0} y^{1} does not divide every stored term")]
    NotDivisible(u32, u32),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Sparse truncated series; exponent pairs map to nonzero field elements.
#[derive(Clone)]
pub struct TruncSeries {
    pub field: FieldRef,
    pub guaranteed_order: u32,
    pub coeffs: BTreeMap<(u32, u32), Elem>,
}

impl PartialEq for TruncSeries {
    fn eq(&self, other: &TruncSeries) -> bool {
        self.field.spec == other.field.spec
            && self.guaranteed_order == other.guaranteed_order
            && self.coeffs == other.coeffs
    }
}

impl fmt::Debug for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .take(12)
            .map(|(&(i, j), &c)| format!("{}*x^{}y^{}", c, i, j))
            .collect();
        write!(
            f,
            "O<{}>[{}{}]",
            self.guaranteed_order,
            terms.join(" + "),
            if self.coeffs.len() > 12 { " + ..." } else { "" }
        )
    }
}

impl TruncSeries {
    pub fn zero(field: FieldRef, order: u32) -> TruncSeries {
        assert!(order >= 1);
        TruncSeries {
            field,
            guaranteed_order: order,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(field: FieldRef, c: Elem, order: u32) -> TruncSeries {
        let mut s = TruncSeries::zero(field, order);
        if c != 0 {
            s.coeffs.insert((0, 0), c);
        }
        s
    }

    pub fn monomial(field: FieldRef, c: Elem, i: u32, j: u32, order: u32) -> TruncSeries {
        let mut s = TruncSeries::zero(field, order);
        if c != 0 && i + j < order {
            s.coeffs.insert((i, j), c);
        }
        s
    }

    /// Build from raw terms, dropping zeros and everything at or above the
    /// guarantee.
    pub fn from_terms<I>(field: FieldRef, order: u32, terms: I) -> TruncSeries
    where
        I: IntoIterator<Item = ((u32, u32), Elem)>,
    {
        let mut s = TruncSeries::zero(field.clone(), order);
        for ((i, j), c) in terms {
            if c == 0 || i + j >= order {
                continue;
            }
            let entry = s.coeffs.entry((i, j)).or_insert(0);
            *entry = field.add(*entry, c);
            if *entry == 0 {
                s.coeffs.remove(&(i, j));
            }
        }
        s
    }

    pub fn coeff(&self, i: u32, j: u32) -> Elem {
        *self.coeffs.get(&(i, j)).unwrap_or(&0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Order-zero coefficient; a unit has a nonzero one.
    pub fn constant_term(&self) -> Elem {
        self.coeff(0, 0)
    }

    pub fn is_unit(&self) -> bool {
        self.constant_term() != 0
    }

    fn check_field(&self, other: &TruncSeries) -> Result<(), SeriesError> {
        if self.field.spec != other.field.spec {
            return Err(SeriesError::FieldMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &TruncSeries) -> Result<TruncSeries, SeriesError> {
        self.check_field(other)?;
        let order = self.guaranteed_order.min(other.guaranteed_order);
        let mut out = self.clone();
        out.truncate_to(order);
        for (&(i, j), &c) in &other.coeffs {
            if i + j >= order {
                continue;
            }
            let entry = out.coeffs.entry((i, j)).or_insert(0);
            *entry = self.field.add(*entry, c);
            if *entry == 0 {
                out.coeffs.remove(&(i, j));
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TruncSeries) -> Result<TruncSeries, SeriesError> {
        self.add(&other.scalar_mul(other.field.neg(1)))
    }

    pub fn scalar_mul(&self, c: Elem) -> TruncSeries {
        let mut out = TruncSeries::zero(self.field.clone(), self.guaranteed_order);
        if c == 0 {
            return out;
        }
        for (&k, &v) in &self.coeffs {
            let w = self.field.mul(v, c);
            if w != 0 {
                out.coeffs.insert(k, w);
            }
        }
        out
    }

    /// Product truncated to the weaker of the two guarantees. Dense
    /// accumulation keeps this fast at kernel working precision.
    pub fn mul(&self, other: &TruncSeries) -> Result<TruncSeries, SeriesError> {
        self.check_field(other)?;
        let order = self.guaranteed_order.min(other.guaranteed_order);
        let n = order as usize;
        let field = &self.field;
        let mut grid = vec![0 as Elem; n * n];
        for (&(i1, j1), &c1) in &self.coeffs {
            if i1 + j1 >= order {
                continue;
            }
            for (&(i2, j2), &c2) in &other.coeffs {
                let (i, j) = (i1 + i2, j1 + j2);
                if i + j >= order {
                    continue;
                }
                let idx = i as usize * n + j as usize;
                grid[idx] = field.add(grid[idx], field.mul(c1, c2));
            }
        }
        let mut out = TruncSeries::zero(self.field.clone(), order);
        for i in 0..n {
            for j in 0..n - i {
                let c = grid[i * n + j];
                if c != 0 {
                    out.coeffs.insert((i as u32, j as u32), c);
                }
            }
        }
        Ok(out)
    }

    /// Lower the guarantee and drop everything newly out of range.
    pub fn truncate_to(&mut self, order: u32) {
        assert!(order >= 1);
        if order < self.guaranteed_order {
            self.coeffs.retain(|&(i, j), _| i + j < order);
        }
        self.guaranteed_order = self.guaranteed_order.min(order);
    }

    pub fn truncated(&self, order: u32) -> TruncSeries {
        let mut s = self.clone();
        s.truncate_to(order);
        s
    }

    /// Multiplicative inverse of a unit, by Newton iteration; the algebraic
    /// identity `1 - f*g_{k+1} = (1 - f*g_k)^2` holds in any characteristic.
    pub fn invert_unit(&self) -> Result<TruncSeries, SeriesError> {
        let c0 = self.constant_term();
        if c0 == 0 {
            return Err(SeriesError::NotAUnit);
        }
        let order = self.guaranteed_order;
        let field = self.field.clone();
        let mut g = TruncSeries::constant(field.clone(), field.inv(c0), 1);
        let mut cur: u32 = 1;
        while cur < order {
            cur = (cur * 2).min(order);
            let f = self.truncated(cur);
            g.guaranteed_order = cur;
            // g <- 2g - f g^2
            let fg = f.mul(&g)?;
            let two_minus_fg =
                TruncSeries::constant(field.clone(), field.from_int(2), cur).sub(&fg)?;
            g = g.mul(&two_minus_fg)?;
        }
        Ok(g)
    }

    /// `self^e` for any integer exponent; negative exponents require a unit.
    pub fn pow_int(&self, e: i64) -> Result<TruncSeries, SeriesError> {
        let base = if e < 0 {
            self.invert_unit()?
        } else {
            self.clone()
        };
        let mut acc = TruncSeries::constant(self.field.clone(), 1, self.guaranteed_order);
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&b)?;
            }
            k >>= 1;
            if k > 0 {
                b = b.mul(&b)?;
            }
        }
        Ok(acc)
    }

    pub fn derivative_x(&self) -> TruncSeries {
        let order = self.guaranteed_order.saturating_sub(1).max(1);
        let field = &self.field;
        let terms = self.coeffs.iter().filter_map(|(&(i, j), &c)| {
            if i == 0 {
                return None;
            }
            let f = field.mul(c, field.from_int(i as i64));
            (f != 0).then_some(((i - 1, j), f))
        });
        TruncSeries::from_terms(self.field.clone(), order, terms.collect::<Vec<_>>())
    }

    pub fn derivative_y(&self) -> TruncSeries {
        let order = self.guaranteed_order.saturating_sub(1).max(1);
        let field = &self.field;
        let terms = self.coeffs.iter().filter_map(|(&(i, j), &c)| {
            if j == 0 {
                return None;
            }
            let f = field.mul(c, field.from_int(j as i64));
            (f != 0).then_some(((i, j - 1), f))
        });
        TruncSeries::from_terms(self.field.clone(), order, terms.collect::<Vec<_>>())
    }

    /// Smallest `i` such that some `x^i y^j` appears, certified within the
    /// guarantee.
    pub fn min_x_degree(&self) -> Result<u32, SeriesError> {
        self.coeffs
            .keys()
            .map(|&(i, _)| i)
            .min()
            .ok_or(SeriesError::ZeroWithinGuarantee)
    }

    /// `ord_y` of the restriction to `x = 0`. Errors if the restriction
    /// vanishes within the guarantee (the true order could be anything
    /// beyond it).
    pub fn ord_y_at_x0(&self) -> Result<u32, SeriesError> {
        self.coeffs
            .iter()
            .filter(|(&(i, _), _)| i == 0)
            .map(|(&(_, j), _)| j)
            .min()
            .ok_or_else(|| {
                SeriesError::TruncationInsufficient(format!(
                    "f(0, y) = 0 up to order {}",
                    self.guaranteed_order
                ))
            })
    }

    /// Exact division by `x^i y^j`; every stored term must be divisible.
    /// The guarantee drops by `i + j`.
    pub fn divide_monomial(&self, i: u32, j: u32) -> Result<TruncSeries, SeriesError> {
        let mut out = TruncSeries::zero(
            self.field.clone(),
            self.guaranteed_order
                .checked_sub(i + j)
                .filter(|&o| o >= 1)
                .ok_or_else(|| {
                    SeriesError::TruncationInsufficient("guarantee exhausted by division".into())
                })?,
        );
        for (&(a, b), &c) in &self.coeffs {
            if a < i || b < j {
                return Err(SeriesError::NotDivisible(i, j));
            }
            out.coeffs.insert((a - i, b - j), c);
        }
        Ok(out)
    }

    /// Substitute `x = x1^m (y1 + alpha)^{a'}, y = x1^q (y1 + alpha)^{b'}`.
    ///
    /// Unknown terms of the input have total degree >= N and land at
    /// `x1`-degree (hence total degree) >= `N * min(m, q)`, so the result is
    /// certified to that order; `cap` bounds the stored working order.
    pub fn substitute_monomial(
        &self,
        m: u32,
        q: u32,
        a_cof: u32,
        b_cof: u32,
        alpha: Elem,
        cap: u32,
    ) -> Result<TruncSeries, SeriesError> {
        if alpha == 0 {
            return Err(SeriesError::Field(FieldError::ZeroResidue {
                p: self.field.spec.p,
                s: self.field.spec.s,
            }));
        }
        let order = (self.guaranteed_order as u64 * m.min(q) as u64).min(cap as u64) as u32;
        let field = self.field.clone();

        // Expansions of (y1 + alpha)^k are built incrementally over the
        // sorted set of needed k's; each is a univariate polynomial in y1
        // truncated to degree < order.
        let mut needed: Vec<u64> = self
            .coeffs
            .keys()
            .map(|&(i, j)| i as u64 * a_cof as u64 + j as u64 * b_cof as u64)
            .collect();
        needed.sort_unstable();
        needed.dedup();

        let mut powers: BTreeMap<u64, Vec<Elem>> = BTreeMap::new();
        let mut cur_k: u64 = 0;
        let mut cur: Vec<Elem> = vec![1];
        for &k in &needed {
            while cur_k < k {
                // multiply by (y1 + alpha)
                let mut next = vec![0 as Elem; (cur.len() + 1).min(order as usize)];
                for (d, &c) in cur.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    if d < next.len() {
                        next[d] = field.add(next[d], field.mul(c, alpha));
                    }
                    if d + 1 < next.len() {
                        next[d + 1] = field.add(next[d + 1], c);
                    }
                }
                cur = next;
                cur_k += 1;
            }
            powers.insert(k, cur.clone());
        }

        let mut out = TruncSeries::zero(field.clone(), order.max(1));
        for (&(i, j), &c) in &self.coeffs {
            let e1 = i as u64 * m as u64 + j as u64 * q as u64;
            if e1 >= order as u64 {
                continue;
            }
            let k = i as u64 * a_cof as u64 + j as u64 * b_cof as u64;
            let pow = &powers[&k];
            for (d, &pc) in pow.iter().enumerate() {
                if pc == 0 {
                    continue;
                }
                let (e, f) = (e1 as u32, d as u32);
                if e + f >= order {
                    break;
                }
                let w = field.mul(c, pc);
                let entry = out.coeffs.entry((e, f)).or_insert(0);
                *entry = field.add(*entry, w);
                if *entry == 0 {
                    out.coeffs.remove(&(e, f));
                }
            }
        }
        Ok(out)
    }

    /// Substitute the pure monomial chart `x = x1^a y1^b, y = x1^c y1^d`
    /// (no residue translation), used by the strong-monomial search.
    pub fn substitute_pure_monomial(
        &self,
        a: u32,
        b: u32,
        c: u32,
        d: u32,
        cap: u32,
    ) -> TruncSeries {
        let rows = (a + b).min(c + d).max(1);
        let order = (self.guaranteed_order as u64 * rows as u64)
            .min(cap as u64)
            .max(1) as u32;
        let terms: Vec<_> = self
            .coeffs
            .iter()
            .map(|(&(i, j), &coef)| ((i * a + j * c, i * b + j * d), coef))
            .collect();
        TruncSeries::from_terms(self.field.clone(), order, terms)
    }

    /// Rescale `x -> c x` (c nonzero), which multiplies the `x^i y^j`
    /// coefficient by `c^i`.
    pub fn rescale_x(&self, c: Elem) -> TruncSeries {
        assert!(c != 0);
        let field = &self.field;
        let terms: Vec<_> = self
            .coeffs
            .iter()
            .map(|(&(i, j), &v)| ((i, j), field.mul(v, field.pow(c, i as u64))))
            .collect();
        TruncSeries::from_terms(self.field.clone(), self.guaranteed_order, terms)
    }
}

/// Serialized form: field spec, guarantee, and the sparse coefficient list
/// with each coefficient as its vector of base-p digits.
#[derive(Serialize, Deserialize)]
pub struct SeriesJson {
    pub field: FieldSpec,
    pub guaranteed_order: u32,
    pub coeffs: Vec<(u32, u32, Vec<u32>)>,
}

impl TruncSeries {
    pub fn to_json(&self) -> SeriesJson {
        let p = self.field.spec.p;
        let s = self.field.spec.s;
        SeriesJson {
            field: self.field.spec,
            guaranteed_order: self.guaranteed_order,
            coeffs: self
                .coeffs
                .iter()
                .map(|(&(i, j), &c)| {
                    let mut e = c as u32;
                    let digits = (0..s)
                        .map(|_| {
                            let d = e % p;
                            e /= p;
                            d
                        })
                        .collect();
                    (i, j, digits)
                })
                .collect(),
        }
    }

    pub fn from_json(json: &SeriesJson) -> Result<TruncSeries, SeriesError> {
        let field = Field::new(json.field)?;
        let p = json.field.p;
        let terms: Vec<_> = json
            .coeffs
            .iter()
            .map(|(i, j, digits)| {
                let mut e: u32 = 0;
                for &d in digits.iter().rev() {
                    e = e * p + (d % p);
                }
                ((*i, *j), e as Elem)
            })
            .collect();
        Ok(TruncSeries::from_terms(field, json.guaranteed_order, terms))
    }
}
