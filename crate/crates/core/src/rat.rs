//! Exact rational values, value-group lattices and distance intervals.
//!
//! Everything downstream of this module is exact: no floating point is used
//! anywhere in the crate. Values are normalized so that the seed parameter
//! has value 1, i.e. `omega(x_0) = 1`.
//!
//! Provides:
//! - [`Rat`]: arbitrary-precision rational, always in lowest terms
//! - [`GroupLattice`]: a rank-1 value group `(1/N) * Z * g`
//! - [`DistanceBound`]: an exact or interval representation of `-dist`
//! - [`limit_of_decrement_series`]: closed-form limit of `a_{n+1} = a_n - d0*r^n`
//! - [`lattice_index`]: group index of nested lattices

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ValueError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("lattice containment error: ratio of steps {0} is not a positive integer")]
    Containment(String),
    #[error("monotonicity violation: new upper bound {new_upper} is below lower bound {lower}")]
    Monotonicity { new_upper: String, lower: String },
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
}

/// Arbitrary-precision rational number, stored in lowest terms with a
/// positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rat(BigRational);

impl Rat {
    pub fn new(num: i64, den: i64) -> Rat {
        assert!(den != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Rat {
        assert!(!den.is_zero(), "zero denominator");
        Rat(BigRational::new(num, den))
    }

    pub fn from_int(n: i64) -> Rat {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_biguint(n: &BigUint) -> Rat {
        Rat(BigRational::from_integer(BigInt::from(n.clone())))
    }

    pub fn zero() -> Rat {
        Rat(BigRational::zero())
    }

    pub fn one() -> Rat {
        Rat(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// The integer value, when the denominator is 1.
    pub fn to_integer(&self) -> Option<BigInt> {
        if self.0.is_integer() {
            Some(self.0.to_integer())
        } else {
            None
        }
    }

    pub fn add(&self, other: &Rat) -> Rat {
        Rat(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Rat) -> Rat {
        Rat(&self.0 - &other.0)
    }

    pub fn mul(&self, other: &Rat) -> Rat {
        Rat(&self.0 * &other.0)
    }

    pub fn div(&self, other: &Rat) -> Rat {
        assert!(!other.is_zero(), "division by zero");
        Rat(&self.0 / &other.0)
    }

    pub fn neg(&self) -> Rat {
        Rat(-self.0.clone())
    }

    pub fn recip(&self) -> Rat {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rat(self.0.recip())
    }

    pub fn scale_int(&self, k: i64) -> Rat {
        Rat(&self.0 * BigRational::from_integer(BigInt::from(k)))
    }

    pub fn min(self, other: Rat) -> Rat {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// `2^{-t}` as an exact rational.
    pub fn pow2_neg(t: u32) -> Rat {
        Rat(BigRational::new(BigInt::one(), BigInt::from(2u32).pow(t)))
    }

    /// `base^exp` as an exact rational, for nonnegative integer `exp`.
    pub fn int_pow(base: i64, exp: u32) -> Rat {
        Rat(BigRational::from_integer(BigInt::from(base).pow(exp)))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl FromStr for Rat {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Rat, ValueError> {
        let s = s.trim();
        let parse_int =
            |t: &str| BigInt::from_str(t.trim()).map_err(|_| ValueError::Parse(s.to_string()));
        match s.split_once('/') {
            Some((n, d)) => {
                let num = parse_int(n)?;
                let den = parse_int(d)?;
                if den.is_zero() {
                    return Err(ValueError::Parse(s.to_string()));
                }
                Ok(Rat(BigRational::new(num, den)))
            }
            None => Ok(Rat(BigRational::from_integer(parse_int(s)?))),
        }
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(deserializer)?;
        Rat::from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// A rank-1 value group `(1/denominator) * Z * generator_value`, embedded in
/// the rationals with the normalization `omega(x_0) = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupLattice {
    pub generator_value: Rat,
    pub denominator: BigUint,
}

impl GroupLattice {
    pub fn new(generator_value: Rat, denominator: BigUint) -> GroupLattice {
        assert!(
            !generator_value.is_zero() && !generator_value.is_negative(),
            "lattice generator must be positive"
        );
        assert!(!denominator.is_zero(), "lattice denominator must be >= 1");
        GroupLattice {
            generator_value,
            denominator,
        }
    }

    /// Width of one lattice step, `generator_value / denominator`.
    pub fn step(&self) -> Rat {
        self.generator_value
            .div(&Rat::from_biguint(&self.denominator))
    }
}

/// Group index `[fine : coarse]` for nested lattices.
///
/// The coarse lattice must be a sublattice of the fine one, i.e. the ratio of
/// step widths must be a positive integer.
pub fn lattice_index(fine: &GroupLattice, coarse: &GroupLattice) -> Result<BigUint, ValueError> {
    let ratio = coarse.step().div(&fine.step());
    match ratio.to_integer() {
        Some(n) if n.is_positive() => Ok(n.to_biguint().expect("positive")),
        _ => Err(ValueError::Containment(ratio.to_string())),
    }
}

/// Cut flavor of a distance value. Rank-1 defect extensions always realize
/// the cut `s^-`, so this is a one-variant tag kept separate from the real
/// number `s` itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CutFlavor {
    #[default]
    #[serde(rename = "s-")]
    BelowValue,
}

impl fmt::Display for CutFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s^-")
    }
}

/// Bounds on `-dist(omega/nu)`, which is nonnegative for defect extensions.
///
/// `exact` is set only by a periodic-tail closure; plain interval tightening
/// never sets it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceBound {
    pub lower: Rat,
    pub upper: Rat,
    pub exact: bool,
    pub flavor: CutFlavor,
}

impl DistanceBound {
    pub fn interval(lower: Rat, upper: Rat) -> DistanceBound {
        assert!(!lower.is_negative(), "-dist is nonnegative");
        assert!(lower <= upper, "invalid interval");
        DistanceBound {
            lower,
            upper,
            exact: false,
            flavor: CutFlavor::BelowValue,
        }
    }

    pub fn exact(value: Rat) -> DistanceBound {
        assert!(!value.is_negative(), "-dist is nonnegative");
        DistanceBound {
            lower: value.clone(),
            upper: value,
            exact: true,
            flavor: CutFlavor::BelowValue,
        }
    }

    pub fn width(&self) -> Rat {
        self.upper.sub(&self.lower)
    }

    pub fn contains(&self, v: &Rat) -> bool {
        self.lower <= *v && *v <= self.upper
    }

    /// The signed distance `dist = -(-dist)`; meaningful when exact.
    pub fn dist(&self) -> Rat {
        self.upper.neg()
    }
}

impl fmt::Display for DistanceBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact {
            write!(f, "dist = {} (exact)", self.upper.neg())
        } else {
            write!(f, "-dist in [{}, {}]", self.lower, self.upper)
        }
    }
}

/// Tighten the upper bound of `current` with a later term of a non-increasing
/// sequence. The lower bound and exactness are left untouched.
pub fn bound_refine(current: &DistanceBound, new_upper: &Rat) -> Result<DistanceBound, ValueError> {
    if *new_upper < current.lower {
        return Err(ValueError::Monotonicity {
            new_upper: new_upper.to_string(),
            lower: current.lower.to_string(),
        });
    }
    Ok(DistanceBound {
        lower: current.lower.clone(),
        upper: current.upper.clone().min(new_upper.clone()),
        exact: current.exact,
        flavor: current.flavor,
    })
}

/// Exact limit of the monotone sequence `a_{n+1} = a_n - d0 * r^n`, namely
/// `a0 - d0/(1-r)`. Requires `0 <= r < 1` and `d0 >= 0`.
pub fn limit_of_decrement_series(a0: &Rat, d0: &Rat, r: &Rat) -> Result<Rat, ValueError> {
    if r.is_negative() || *r >= Rat::one() {
        return Err(ValueError::Domain(format!("ratio {} outside [0, 1)", r)));
    }
    if d0.is_negative() {
        return Err(ValueError::Domain(format!("decrement {} negative", d0)));
    }
    let geom = d0.div(&Rat::one().sub(r));
    Ok(a0.sub(&geom))
}
