//! Map germs `(u, v)` presenting an extension of local rings concretely as
//! truncated series, and the proof-level pipeline that transports them
//! through a quadratic-transform step.
//!
//! This module is the independent brute-force oracle for the exponent-level
//! engine: it performs the actual substitutions, solves the integer-linear
//! systems for the target coordinates, reads types and Jacobian exponents
//! off the resulting series, and cross-validates every transition against
//! the Jacobian chain rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Elem, FieldError, FieldRef};
use crate::rat::Rat;
use crate::series::{SeriesError, SeriesJson, TruncSeries};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum GermError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("jacobian determinant vanishes within the guarantee (inseparable presentation or truncation)")]
    ZeroJacobian,
    #[error("jacobian is x^{0} times a non-unit: not principal on the divisor")]
    JacobianNotPrincipal(u32),
    #[error("germ is not well prepared: residual factor of v is a unit")]
    NotWellPrepared,
    #[error("germ does not have the required shape: {0}")]
    UnsupportedShape(String),
    #[error("minimal-value factor is not a unit: two minimal terms cancel at this residue (unramified escape)")]
    LambdaNotUnit,
    #[error("integer system for the target coordinates has no solution: {0}")]
    InconsistentSystem(String),
    #[error("chain-rule cross-check failed: lhs {lhs} != rhs {rhs}")]
    ChainRule { lhs: u64, rhs: u64 },
    #[error("step hypothesis violated: {0}")]
    BadStep(String),
}

/// Germ type read off the prepared local form:
/// `(a, d) = (1,1) -> T0`, `(1,p) -> T1`, `(p,1) -> T2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GermType {
    T0,
    T1,
    T2,
    Other,
}

impl std::fmt::Display for GermType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GermType::T0 => "T0",
            GermType::T1 => "T1",
            GermType::T2 => "T2",
            GermType::Other => "other",
        };
        write!(f, "{}", s)
    }
}

/// A germ pair `(u, v)` in local coordinates `(x, y)`, with the cached
/// exponent data of the prepared form `u = gamma x^a`, `v = x^b f`.
#[derive(Clone, Debug)]
pub struct MapGerm {
    pub u: TruncSeries,
    pub v: TruncSeries,
    pub cached_a: u32,
    pub cached_b: u32,
    pub cached_d: u32,
}

impl MapGerm {
    pub fn new(u: TruncSeries, v: TruncSeries) -> Result<MapGerm, GermError> {
        if u.field.spec != v.field.spec {
            return Err(GermError::Series(SeriesError::FieldMismatch));
        }
        if u.is_unit() || v.is_unit() {
            return Err(GermError::UnsupportedShape(
                "u and v must be non-units".into(),
            ));
        }
        if u.is_zero() || v.is_zero() {
            return Err(GermError::Series(SeriesError::ZeroWithinGuarantee));
        }
        let cached_a = u.min_x_degree()?;
        let cached_b = v.min_x_degree()?;
        let cached_d = residue_order(&v, cached_b)?;
        Ok(MapGerm {
            u,
            v,
            cached_a,
            cached_b,
            cached_d,
        })
    }

    pub fn field(&self) -> &FieldRef {
        &self.u.field
    }

    pub fn p(&self) -> u32 {
        self.u.field.spec.p
    }
}

/// `ord_y` of the residue of `v / x^b` on the divisor `x = 0`, i.e. the
/// least `j` with an `x^b y^j` term.
fn residue_order(v: &TruncSeries, b: u32) -> Result<u32, GermError> {
    v.coeffs
        .iter()
        .filter(|(&(i, _), _)| i == b)
        .map(|(&(_, j), _)| j)
        .min()
        .ok_or(GermError::UnsupportedShape(
            "no term on the minimal x-level".into(),
        ))
}

/// Jacobian exponent: `c` with `J(S/R) = (unit) * x^c` when that holds
/// within the guarantee. `principal` is false when `y` divides the residual
/// cofactor, so the ideal is not generated by a power of `x`.
pub fn jacobian_exponent(germ: &MapGerm) -> Result<(u32, bool), GermError> {
    let jac = jacobian_determinant(germ)?;
    if jac.is_zero() {
        return Err(GermError::ZeroJacobian);
    }
    let c = jac.min_x_degree()?;
    let principal = jac.coeff(c, 0) != 0;
    Ok((c, principal))
}

pub fn jacobian_determinant(germ: &MapGerm) -> Result<TruncSeries, GermError> {
    let ux = germ.u.derivative_x();
    let uy = germ.u.derivative_y();
    let vx = germ.v.derivative_x();
    let vy = germ.v.derivative_y();
    Ok(ux.mul(&vy)?.sub(&uy.mul(&vx)?)?)
}

/// Classify a germ from its prepared exponents: `a` is the `x`-exponent of
/// `u` after unit factorization and `d = ord_y v(0, y)`.
pub fn classify_type(germ: &MapGerm) -> Result<GermType, GermError> {
    let p = germ.p();
    let a = germ.cached_a;
    if germ.u.coeff(a, 0) == 0 {
        // u = x^a * (non-unit): not one of the prepared forms
        return Ok(GermType::Other);
    }
    let d = match germ.v.ord_y_at_x0() {
        Ok(d) => d,
        Err(_) => {
            // v(0, y) = 0 within the guarantee; since terms up to the
            // guarantee are x-divisible the true d would exceed it, which
            // is already out of the prepared range when the guarantee
            // exceeds p.
            if germ.v.guaranteed_order > p {
                return Ok(GermType::Other);
            }
            return Err(GermError::Series(SeriesError::TruncationInsufficient(
                "cannot determine ord_y v(0, y)".into(),
            )));
        }
    };
    Ok(match (a, d) {
        (1, 1) => GermType::T0,
        (1, d) if d == p => GermType::T1,
        (a, 1) if a == p => GermType::T2,
        _ => GermType::Other,
    })
}

/// Complexity `a * d` of a well-prepared germ, from `u = gamma x^a` and
/// `v = x^b f` with `d` the residue order of `f`.
pub fn complexity(germ: &MapGerm) -> Result<u32, GermError> {
    if germ.u.coeff(germ.cached_a, 0) == 0 {
        return Err(GermError::UnsupportedShape(
            "u is not a unit times a power of x".into(),
        ));
    }
    if germ.cached_d == 0 {
        return Err(GermError::NotWellPrepared);
    }
    Ok(germ.cached_a * germ.cached_d)
}

/// The seed germ `(x, y^p - x^{e(p-1)} y)` of an Artin-Schreier extension
/// generated by a root of `X^p - X - v u^{-pe}`.
pub fn seed_artin_schreier(field: FieldRef, e: u32, order: u32) -> Result<MapGerm, GermError> {
    if e < 1 {
        return Err(GermError::BadStep("seed exponent e must be >= 1".into()));
    }
    let p = field.spec.p;
    let u = TruncSeries::monomial(field.clone(), 1, 1, 0, order);
    let v = TruncSeries::from_terms(
        field.clone(),
        order,
        [((0u32, p), 1 as Elem), ((e * (p - 1), 1), field.neg(1))],
    );
    MapGerm::new(u, v)
}

/// Value data of `sigma_j(y) - y` for the Galois action `sigma_j` sending
/// the Artin-Schreier generator to itself plus `j`, with `y = x^e * theta`.
///
/// The difference is `j * x^e` exactly, so its value is `e * omega(x)`;
/// the returned flag checks that against `c/(p-1) * omega(x)` with
/// `c = (p-1) e`.
pub fn galois_difference(field: &FieldRef, e: u32, j: u32) -> Result<(Rat, bool), GermError> {
    if e < 1 {
        return Err(GermError::BadStep("e must be >= 1".into()));
    }
    let p = field.spec.p;
    if j < 1 || j >= p {
        return Err(GermError::BadStep(format!(
            "galois index j = {} outside [1, p-1]",
            j
        )));
    }
    let coeff = field.from_int(j as i64);
    if coeff == 0 {
        return Err(GermError::Field(FieldError::ZeroResidue {
            p,
            s: field.spec.s,
        }));
    }
    let diff = TruncSeries::monomial(field.clone(), coeff, e, 0, e + 2);
    let value = Rat::from_int(diff.min_x_degree()? as i64);
    let c = (p - 1) * e;
    let predicted = Rat::from_int(c as i64).div(&Rat::from_int((p - 1) as i64));
    Ok((value.clone(), value == predicted))
}

/// One transition of the oracle pipeline.
#[derive(Clone, Debug)]
pub struct Transition {
    pub germ: MapGerm,
    pub germ_type: GermType,
    /// Jacobian exponent of the new germ, read from its determinant.
    pub c_exponent: u32,
    /// gcd invariant of the step (1 or p).
    pub sigma: u32,
    /// Co-step data on the base side: `u = u1^mbar (v1+beta)^..`.
    pub mbar: u32,
    pub qbar: u64,
}

/// Limits for the kernel working precision.
#[derive(Clone, Copy, Debug)]
pub struct KernelConfig {
    pub working_order: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { working_order: 64 }
    }
}

fn gcd64(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd64(b, a % b)
    }
}

/// Minimal cofactors `(a', b')` with `m b' - q a' = 1`, `b'` the least
/// positive solution; then `0 <= a' < m`.
pub fn unimodular_cofactors(m: u64, q: u64) -> Option<(u64, u64)> {
    if gcd64(m, q) != 1 {
        return None;
    }
    for b in 1..=q.max(1) {
        let t = m * b;
        if t >= 1 && (t - 1).is_multiple_of(q) {
            return Some(((t - 1) / q, b));
        }
    }
    None
}

/// Transport a germ through the substitution
/// `x = x1^m (y1+alpha)^{a'}, y = x1^q (y1+alpha)^{b'}`, producing the
/// target germ `(u1, v1)`, its type and its Jacobian exponent.
///
/// Accepted presentations: type 1 and type 0 germs with `u` a nonzero
/// constant times `x`; type 2 germs with `u = gamma(x) x^p` for a pure-`x`
/// unit `gamma`. The resulting germs are again of these shapes, up to a
/// unit of the target ring.
pub fn oracle_transition(
    germ: &MapGerm,
    m: u32,
    q: u32,
    a_cof: u32,
    b_cof: u32,
    alpha: Elem,
    cfg: &KernelConfig,
) -> Result<Transition, GermError> {
    if gcd64(m as u64, q as u64) != 1 {
        return Err(GermError::BadStep(format!("gcd({}, {}) != 1", m, q)));
    }
    if m as u64 * b_cof as u64 != q as u64 * a_cof as u64 + 1 {
        return Err(GermError::BadStep("cofactors are not unimodular".into()));
    }
    let ty = classify_type(germ)?;
    match ty {
        GermType::T1 | GermType::T0 => {
            if m <= 1 {
                return Err(GermError::BadStep(
                    "type-1 transitions require m > 1".into(),
                ));
            }
            transition_from_divisor_line(germ, ty, m, q, a_cof, b_cof, alpha, cfg)
        }
        GermType::T2 => transition_from_pth_power(germ, m, q, a_cof, b_cof, alpha, cfg),
        GermType::Other => Err(GermError::UnsupportedShape(
            "germ classifies as neither type 0, 1 nor 2".into(),
        )),
    }
}

/// Common tail: given the substituted pair together with its exponent data
/// on `(x1, y1+alpha, U)` for a unit factor `U`, solve for the target
/// coordinates and assemble the transition.
///
/// `u_data = (eu_x, eu_y, eu_l)` are the exponents of `u` on
/// `x1, (y1+alpha), U` and similarly `v_data` for `vbar`; `u_unit`/`v_unit`
/// are leftover unit factors carried along (exactly one side carries `U`).
#[allow(clippy::too_many_arguments)]
fn assemble_target(
    lambda: &TruncSeries,
    u_exp: (u64, u64, i64),
    v_exp: (u64, u64, i64),
    alpha: Elem,
    c_in: u32,
    m: u32,
    q: u32,
    cfg: &KernelConfig,
) -> Result<Transition, GermError> {
    let field = lambda.field.clone();
    let (ux, uy, ul) = u_exp;
    let (vx, vy, vl) = v_exp;

    let sigma = gcd64(ux, vx);
    // determinant of the exponent pairing on (x1, y1+alpha)
    let det = ux as i64 * vy as i64 - uy as i64 * vx as i64;
    if det <= 0 || det % sigma as i64 != 0 {
        return Err(GermError::InconsistentSystem(format!(
            "pairing determinant {} incompatible with sigma {}",
            det, sigma
        )));
    }
    let d_minus_c = det / sigma as i64;
    let f_minus_e = (ux as i64 * vl - ul * vx as i64) / sigma as i64;

    let mbar = ux / sigma;
    let qbar = vx / sigma;
    let (abar, bbar) = unimodular_cofactors(mbar, qbar).ok_or_else(|| {
        GermError::InconsistentSystem(format!("gcd({}, {}) != 1 after reduction", mbar, qbar))
    })?;

    // Solve the unit-exponent rows of the full system:
    //   u = u1^{mbar - abar} v1bar^{abar},  vbar = u1^{qbar - bbar} v1bar^{bbar}
    // gives e from  (mbar - abar) e + abar f = ul  with f = e + f_minus_e,
    // i.e. e = (ul - abar * f_minus_e) / mbar, and the translation-exponent
    // row c from  (mbar - abar) c + abar d = uy.
    let e_num = ul - abar as i64 * f_minus_e;
    if e_num % mbar as i64 != 0 {
        return Err(GermError::InconsistentSystem(format!(
            "unit exponent {}/{} not integral",
            e_num, mbar
        )));
    }
    let e_exp = e_num / mbar as i64;
    let f_exp = e_exp + f_minus_e;
    let c_num = uy as i64 - abar as i64 * d_minus_c;
    if c_num % mbar as i64 != 0 {
        return Err(GermError::InconsistentSystem(format!(
            "translation exponent {}/{} not integral",
            c_num, mbar
        )));
    }
    let c_exp = c_num / mbar as i64;
    let d_exp = c_exp + d_minus_c;
    debug_assert_eq!(
        (qbar - bbar) as i64 * e_exp + bbar as i64 * f_exp,
        vl,
        "unit row of vbar"
    );
    debug_assert_eq!(
        (qbar - bbar) as i64 * c_exp + bbar as i64 * d_exp,
        vy as i64,
        "translation row of vbar"
    );

    let w = cfg.working_order;
    let y_shift = TruncSeries::from_terms(field.clone(), w, [((0u32, 0u32), alpha), ((0, 1), 1)]);

    let lambda0 = lambda.constant_term();
    if lambda0 == 0 {
        return Err(GermError::LambdaNotUnit);
    }

    // u1 = x1^sigma (y1+alpha)^c Lambda^e
    let mut u1 = TruncSeries::monomial(field.clone(), 1, sigma as u32, 0, w);
    u1 = u1.mul(&y_shift.pow_int(c_exp)?)?;
    u1 = u1.mul(&lambda.pow_int(e_exp)?)?;

    // v1 = (y1+alpha)^{d-c} Lambda^{f-e} - alpha^{d-c} lambda0^{f-e}
    let mut v1 = y_shift.pow_int(d_minus_c)?;
    v1 = v1.mul(&lambda.pow_int(f_minus_e)?)?;
    let beta = {
        let a_pow = field.pow(alpha, d_minus_c as u64);
        let l_pow = if f_minus_e >= 0 {
            field.pow(lambda0, f_minus_e as u64)
        } else {
            field.pow(field.inv(lambda0), (-f_minus_e) as u64)
        };
        field.mul(a_pow, l_pow)
    };
    v1 = v1.sub(&TruncSeries::constant(field.clone(), beta, w))?;

    let germ1 = MapGerm::new(u1, v1)?;
    let ty1 = classify_type(&germ1)?;
    let (c1, principal) = jacobian_exponent(&germ1)?;
    if !principal {
        return Err(GermError::JacobianNotPrincipal(c1));
    }

    // Chain rule on x1-orders:
    //   sigma (mbar + qbar - 1) + c1 = m c + (m + q - 1)
    let lhs = sigma * (mbar + qbar - 1) + c1 as u64;
    let rhs = m as u64 * c_in as u64 + (m as u64 + q as u64 - 1);
    if lhs != rhs {
        return Err(GermError::ChainRule { lhs, rhs });
    }

    Ok(Transition {
        germ: germ1,
        germ_type: ty1,
        c_exponent: c1,
        sigma: sigma as u32,
        mbar: mbar as u32,
        qbar,
    })
}

/// Type 1 / type 0 pipeline: `u` is a constant times `x`, `v` is expanded
/// with the monomial valuation `mu(x) = m, mu(y) = q`; the pure-`x` part is
/// normalized away up to the degree cap `p q / m` before substituting.
#[allow(clippy::too_many_arguments)]
fn transition_from_divisor_line(
    germ: &MapGerm,
    ty: GermType,
    m: u32,
    q: u32,
    a_cof: u32,
    b_cof: u32,
    alpha: Elem,
    cfg: &KernelConfig,
) -> Result<Transition, GermError> {
    let field = germ.field().clone();
    let p = germ.p();
    let c_in = if ty == GermType::T0 {
        0
    } else {
        let (c, principal) = jacobian_exponent(germ)?;
        if !principal {
            return Err(GermError::JacobianNotPrincipal(c));
        }
        c
    };

    // normalize u = c0 * x to xbar = u by rescaling x
    let c0 = germ.u.coeff(1, 0);
    if germ.u.coeffs.len() != 1 || c0 == 0 {
        return Err(GermError::UnsupportedShape(
            "type-1 pipeline requires u to be a nonzero constant times x".into(),
        ));
    }
    let v = if c0 == 1 {
        germ.v.clone()
    } else {
        germ.v.rescale_x(field.inv(c0))
    };

    // vbar = v - sum e_i xbar^i over i <= p q / m
    let cap = (p as u64 * q as u64) / m as u64;
    let to_remove: Vec<_> = v
        .coeffs
        .iter()
        .filter(|(&(i, j), _)| j == 0 && i as u64 <= cap)
        .map(|(&(i, _), &c)| ((i, 0u32), field.neg(c)))
        .collect();
    let vbar = v.add(&TruncSeries::from_terms(
        field.clone(),
        v.guaranteed_order,
        to_remove,
    ))?;
    if vbar.is_zero() {
        return Err(GermError::Series(SeriesError::ZeroWithinGuarantee));
    }

    // minimal monomial-valuation terms of vbar
    let mu = |i: u32, j: u32| i as u64 * m as u64 + j as u64 * q as u64;
    let rho = vbar
        .coeffs
        .keys()
        .map(|&(i, j)| mu(i, j))
        .min()
        .expect("nonzero");
    if rho >= vbar.guaranteed_order as u64 * m.min(q) as u64 {
        return Err(GermError::Series(SeriesError::TruncationInsufficient(
            "minimal-value terms not certified".into(),
        )));
    }
    let (alpha1, beta1) = vbar
        .coeffs
        .keys()
        .filter(|&&(i, j)| mu(i, j) == rho)
        .map(|&(i, j)| (i, j))
        .min_by_key(|&(_, j)| j)
        .expect("nonzero");
    if beta1 == 0 {
        return Err(GermError::InconsistentSystem(
            "pure-x term of minimal value survived normalization".into(),
        ));
    }

    let v_sub = vbar.substitute_monomial(m, q, a_cof, b_cof, alpha, cfg.working_order)?;
    let k = alpha1 as u64 * a_cof as u64 + beta1 as u64 * b_cof as u64;

    // Lambda = vbar_subst / (x1^rho (y1+alpha)^k)
    let shifted = v_sub.divide_monomial(rho as u32, 0)?;
    let y_shift = TruncSeries::from_terms(
        field.clone(),
        shifted.guaranteed_order,
        [((0u32, 0u32), alpha), ((0, 1), 1)],
    );
    let lambda = shifted.mul(&y_shift.pow_int(-(k as i64))?)?;
    if lambda.constant_term() == 0 {
        return Err(GermError::LambdaNotUnit);
    }

    assemble_target(
        &lambda,
        (m as u64, a_cof as u64, 0),
        (rho, k, 1),
        alpha,
        c_in,
        m,
        q,
        cfg,
    )
}

/// Type 2 pipeline: `u = gamma(x) x^p` with `gamma` a pure-`x` unit; the
/// coordinate `ybar = v - g(u)` substitutes directly, so only `u` needs to
/// be transported through the substitution.
fn transition_from_pth_power(
    germ: &MapGerm,
    m: u32,
    q: u32,
    a_cof: u32,
    b_cof: u32,
    alpha: Elem,
    cfg: &KernelConfig,
) -> Result<Transition, GermError> {
    let field = germ.field().clone();
    let p = germ.p();
    let (c_in, principal) = jacobian_exponent(germ)?;
    if !principal {
        return Err(GermError::JacobianNotPrincipal(c_in));
    }

    if germ.u.coeffs.keys().any(|&(_, j)| j != 0) {
        return Err(GermError::UnsupportedShape(
            "type-2 pipeline requires u = gamma(x) * x^p with pure-x gamma".into(),
        ));
    }
    let gamma = germ.u.divide_monomial(p, 0)?;
    if !gamma.is_unit() {
        return Err(GermError::UnsupportedShape(
            "u is not a unit times x^p".into(),
        ));
    }

    // The pure-x part of v must sit above the incoming coordinate value so
    // that substituting y for ybar is harmless.
    if let Some(min_pure) = germ
        .v
        .coeffs
        .keys()
        .filter(|&&(_, j)| j == 0)
        .map(|&(i, _)| i)
        .min()
    {
        if (min_pure as u64) * (m as u64) <= q as u64 {
            return Err(GermError::UnsupportedShape(format!(
                "pure-x part of v has order {}, not above q/m = {}/{}",
                min_pure, q, m
            )));
        }
    }

    let u_sub = germ
        .u
        .substitute_monomial(m, q, a_cof, b_cof, alpha, cfg.working_order)?;
    // u_subst = x1^{pm} (y1+alpha)^{p a'} Gamma
    let shifted = u_sub.divide_monomial(p * m, 0)?;
    let y_shift = TruncSeries::from_terms(
        field.clone(),
        shifted.guaranteed_order,
        [((0u32, 0u32), alpha), ((0, 1), 1)],
    );
    let gamma_sub = shifted.mul(&y_shift.pow_int(-((p as i64) * (a_cof as i64)))?)?;
    if gamma_sub.constant_term() == 0 {
        return Err(GermError::LambdaNotUnit);
    }

    assemble_target(
        &gamma_sub,
        (p as u64 * m as u64, p as u64 * a_cof as u64, 1),
        (q as u64, b_cof as u64, 0),
        alpha,
        c_in,
        m,
        q,
        cfg,
    )
}

/// Outcome of the bounded strong-monomialization decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StrongMonomial {
    /// Verified witness: matrix entries of the chart change, whether the
    /// coordinates were swapped, and the power `A` in `u = delta z^A`.
    Yes {
        matrix: [u32; 4],
        swapped: bool,
        power: u32,
    },
    /// Certified impossible: the germ matches the stable shape
    /// `u = alpha z^p`, `v = beta w^p + eps z^K w + ...` with `K >= p`.
    No {
        cross_exponent: u32,
    },
    Unknown,
}

/// Decide whether the germ admits the strongly monomial form
/// `u = delta z^A, v = w` after a unimodular monomial chart change with
/// entries bounded by `search_bound`. Shears of the second coordinate by a
/// pure-`z` series are absorbed by the linear-term test.
///
/// The `No` certificate is the stable-shape case analysis; it is only
/// emitted when the cross-term exponent reaches `p`, the germ-level
/// sufficient condition for the value inequality it needs.
pub fn detect_strong_monomial(germ: &MapGerm, search_bound: u32) -> StrongMonomial {
    if let Some(k) = stable_shape_cross_exponent(germ) {
        if k >= germ.p() {
            debug_assert!(
                witness_search(germ, search_bound).is_none(),
                "certificate and witness cannot coexist"
            );
            return StrongMonomial::No { cross_exponent: k };
        }
    }
    match witness_search(germ, search_bound) {
        Some(w) => w,
        None => StrongMonomial::Unknown,
    }
}

/// Match `u = alpha x^p * unit`, `v = beta y^p * unit + eps x^K y + (x-divisible)`,
/// returning the cross exponent `K`.
fn stable_shape_cross_exponent(germ: &MapGerm) -> Option<u32> {
    let p = germ.p();
    if germ.cached_a != p || germ.u.coeff(p, 0) == 0 {
        return None;
    }
    let d = germ.v.ord_y_at_x0().ok()?;
    if d != p {
        return None;
    }
    // all terms below the y^p level must carry x
    if germ.v.coeffs.keys().any(|&(i, j)| j < p && i == 0) {
        return None;
    }
    germ.v
        .coeffs
        .keys()
        .filter(|&&(_, j)| j == 1)
        .map(|&(i, _)| i)
        .min()
}

fn witness_search(germ: &MapGerm, bound: u32) -> Option<StrongMonomial> {
    let cap = germ.u.guaranteed_order.min(germ.v.guaranteed_order).max(2);
    // identity chart first, then general unimodular charts
    let general = (0..=bound).flat_map(move |a| {
        (0..=bound).flat_map(move |b| {
            (0..=bound).flat_map(move |c| (0..=bound).map(move |d| [a, b, c, d]))
        })
    });
    for [a, b, c, d] in std::iter::once([1, 0, 0, 1]).chain(general) {
        let det = a as i64 * d as i64 - b as i64 * c as i64;
        if det.abs() != 1 || a + b == 0 || c + d == 0 {
            continue;
        }
        let u1 = germ.u.substitute_pure_monomial(a, b, c, d, cap);
        let v1 = germ.v.substitute_pure_monomial(a, b, c, d, cap);
        if let Some((swapped, power)) = strongly_monomial_shape(&u1, &v1) {
            return Some(StrongMonomial::Yes {
                matrix: [a, b, c, d],
                swapped,
                power,
            });
        }
    }
    None
}

/// Test `u = delta z^A` (unit cofactor) with `v` a coordinate transverse to
/// `z` after a shear, i.e. a nonzero linear `w`-term; and the mirrored
/// orientation.
fn strongly_monomial_shape(u: &TruncSeries, v: &TruncSeries) -> Option<(bool, u32)> {
    if let Some(a) = pure_power_of_x(u) {
        if v.coeff(0, 1) != 0 && !v.is_unit() {
            return Some((false, a));
        }
    }
    if let Some(a) = pure_power_of_y(u) {
        if v.coeff(1, 0) != 0 && !v.is_unit() {
            return Some((true, a));
        }
    }
    None
}

fn pure_power_of_x(u: &TruncSeries) -> Option<u32> {
    let a = u.min_x_degree().ok()?;
    (a >= 1 && u.coeff(a, 0) != 0).then_some(a)
}

fn pure_power_of_y(u: &TruncSeries) -> Option<u32> {
    let a = u.coeffs.keys().map(|&(_, j)| j).min()?;
    (a >= 1 && u.coeff(0, a) != 0).then_some(a)
}

/// Germ serialization per the external interface.
#[derive(Serialize, Deserialize)]
pub struct GermJson {
    pub u: SeriesJson,
    pub v: SeriesJson,
}

impl MapGerm {
    pub fn to_json(&self) -> GermJson {
        GermJson {
            u: self.u.to_json(),
            v: self.v.to_json(),
        }
    }

    pub fn from_json(json: &GermJson) -> Result<MapGerm, GermError> {
        let u = TruncSeries::from_json(&json.u)?;
        let v = TruncSeries::from_json(&json.v)?;
        MapGerm::new(u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Field, FieldSpec};

    fn field(p: u32, s: u32) -> FieldRef {
        Field::new(FieldSpec::new(p, s)).unwrap()
    }

    fn germ(u: TruncSeries, v: TruncSeries) -> MapGerm {
        MapGerm::new(u, v).unwrap()
    }

    #[test]
    fn seeds_classify_and_differentiate() {
        for p in [2u32, 3, 5] {
            for e in [1u32, 2, 3] {
                let k = field(p, 1);
                let g = seed_artin_schreier(k, e, 48).unwrap();
                assert_eq!(classify_type(&g).unwrap(), GermType::T1);
                let (c, principal) = jacobian_exponent(&g).unwrap();
                assert!(principal);
                assert_eq!(c, (p - 1) * e);
                assert_eq!(complexity(&g).unwrap(), p);
            }
        }
    }

    #[test]
    fn classify_reference_germs() {
        let k = field(2, 1);
        // (x, y) is unramified
        let g = germ(
            TruncSeries::monomial(k.clone(), 1, 1, 0, 16),
            TruncSeries::monomial(k.clone(), 1, 0, 1, 16),
        );
        assert_eq!(classify_type(&g).unwrap(), GermType::T0);
        assert_eq!(complexity(&g).unwrap(), 1);

        // (x^2 (1+y), y + x^3) at p=2 has (a, d) = (2, 1)
        let g = germ(
            TruncSeries::from_terms(k.clone(), 16, [((2u32, 0u32), 1), ((2, 1), 1)]),
            TruncSeries::from_terms(k.clone(), 16, [((0u32, 1u32), 1), ((3, 0), 1)]),
        );
        assert_eq!(classify_type(&g).unwrap(), GermType::T2);

        // (x^2, y + x) has complexity 2
        let g = germ(
            TruncSeries::monomial(k.clone(), 1, 2, 0, 16),
            TruncSeries::from_terms(k, 16, [((0u32, 1u32), 1), ((1, 0), 1)]),
        );
        assert_eq!(complexity(&g).unwrap(), 2);
    }

    #[test]
    fn jacobian_reference_values() {
        // u = x^p / (1 - x^{p-1}), v = y gives c = 2p - 2
        for p in [2u32, 3, 5] {
            let k = field(p, 1);
            let order = 32;
            let denom = TruncSeries::from_terms(
                k.clone(),
                order,
                [((0u32, 0u32), 1 as Elem), ((p - 1, 0), k.neg(1))],
            );
            let u = TruncSeries::monomial(k.clone(), 1, p, 0, order)
                .mul(&denom.invert_unit().unwrap())
                .unwrap();
            let v = TruncSeries::monomial(k.clone(), 1, 0, 1, order);
            let g = germ(u, v);
            let (c, principal) = jacobian_exponent(&g).unwrap();
            assert!(principal);
            assert_eq!(c, 2 * p - 2);
            assert_eq!(classify_type(&g).unwrap(), GermType::T2);

            // u = x, v = y^p - x^c y gives back c
            for c_in in [p - 1, 2 * (p - 1)] {
                let u = TruncSeries::monomial(k.clone(), 1, 1, 0, order);
                let v = TruncSeries::from_terms(
                    k.clone(),
                    order,
                    [((0u32, p), 1 as Elem), ((c_in, 1), k.neg(1))],
                );
                let g = germ(u, v);
                assert_eq!(jacobian_exponent(&g).unwrap(), (c_in, true));
            }
        }
    }

    #[test]
    fn classify_truncation_guard() {
        // v(0, y) vanishes within a guarantee too small to exclude the
        // prepared d-range
        let k = field(3, 1);
        let g = germ(
            TruncSeries::monomial(k.clone(), 1, 1, 0, 2),
            TruncSeries::monomial(k.clone(), 1, 1, 0, 2),
        );
        assert!(matches!(
            classify_type(&g),
            Err(GermError::Series(SeriesError::TruncationInsufficient(_)))
        ));

        // with enough guarantee the same shape is decidably not prepared
        let g = germ(
            TruncSeries::monomial(k.clone(), 1, 1, 0, 8),
            TruncSeries::monomial(k, 1, 1, 0, 8),
        );
        assert_eq!(classify_type(&g).unwrap(), GermType::Other);
    }

    #[test]
    fn zero_jacobian_is_an_error() {
        // constant-unit u = x^p is an inseparable presentation
        let k = field(2, 1);
        let g = germ(
            TruncSeries::monomial(k.clone(), 1, 2, 0, 16),
            TruncSeries::monomial(k, 1, 0, 1, 16),
        );
        assert_eq!(jacobian_exponent(&g).unwrap_err(), GermError::ZeroJacobian);
    }

    #[test]
    fn transition_seed_examples() {
        let k = field(2, 1);
        let cfg = KernelConfig { working_order: 64 };
        let seed = seed_artin_schreier(k.clone(), 1, 64).unwrap();

        // (m, q) = (3, 1): stays type 1 with c' = 2
        let t = oracle_transition(&seed, 3, 1, 2, 1, 1, &cfg).unwrap();
        assert_eq!(t.germ_type, GermType::T1);
        assert_eq!(t.c_exponent, 2);
        assert_eq!(t.sigma, 1);
        assert_eq!((t.mbar, t.qbar), (3, 2));
        assert_eq!(complexity(&t.germ).unwrap(), 2);

        // (m, q) = (4, 1): switches to type 2 with c' = 4
        let t = oracle_transition(&seed, 4, 1, 3, 1, 1, &cfg).unwrap();
        assert_eq!(t.germ_type, GermType::T2);
        assert_eq!(t.c_exponent, 4);
        assert_eq!(t.sigma, 2);
        assert_eq!((t.mbar, t.qbar), (2, 1));
        assert_eq!(complexity(&t.germ).unwrap(), 2);
    }

    #[test]
    fn transition_type2_examples() {
        let k = field(2, 1);
        let cfg = KernelConfig { working_order: 64 };
        // u = x^2/(1-x), v = y: a type-2 germ with c = 2
        let denom = TruncSeries::from_terms(k.clone(), 64, [((0u32, 0u32), 1), ((1, 0), 1)]);
        let u = TruncSeries::monomial(k.clone(), 1, 2, 0, 64)
            .mul(&denom.invert_unit().unwrap())
            .unwrap();
        let v = TruncSeries::monomial(k.clone(), 1, 0, 1, 64);
        let g = germ(u, v);
        assert_eq!(jacobian_exponent(&g).unwrap(), (2, true));

        // (m, q) = (3, 1): sigma = gcd(6, 1) = 1, to type 1 with c' = 3
        let t = oracle_transition(&g, 3, 1, 2, 1, 1, &cfg).unwrap();
        assert_eq!(t.germ_type, GermType::T1);
        assert_eq!(t.c_exponent, 3);

        // (m, q) = (1, 2): sigma = 2, stays type 2 with c' = 2
        let t = oracle_transition(&g, 1, 2, 0, 1, 1, &cfg).unwrap();
        assert_eq!(t.germ_type, GermType::T2);
        assert_eq!(t.c_exponent, 2);

        // (m, q) = (3, 2): sigma = gcd(6, 2) = 2, stays type 2 with
        // c'/(p-1) = 2*3 - 3 + 1 = 4, cross-checked by the chain rule
        let t = oracle_transition(&g, 3, 2, 1, 1, 1, &cfg).unwrap();
        assert_eq!(t.germ_type, GermType::T2);
        assert_eq!(t.c_exponent, 4);
    }

    #[test]
    fn type2_rejects_low_pure_x_part() {
        // v = y + x: the pure-x part sits at order 1 <= q/m, so y cannot
        // stand in for the prepared coordinate
        let k = field(2, 1);
        let cfg = KernelConfig::default();
        let denom = TruncSeries::from_terms(k.clone(), 64, [((0u32, 0u32), 1), ((1, 0), 1)]);
        let u = TruncSeries::monomial(k.clone(), 1, 2, 0, 64)
            .mul(&denom.invert_unit().unwrap())
            .unwrap();
        let v = TruncSeries::from_terms(k, 64, [((0u32, 1u32), 1), ((1, 0), 1)]);
        let g = germ(u, v);
        assert!(matches!(
            oracle_transition(&g, 1, 2, 0, 1, 1, &cfg),
            Err(GermError::UnsupportedShape(_))
        ));
    }

    #[test]
    fn type1_constant_rescale() {
        // u = c0 x with c0 != 1 renormalizes through xbar = u
        let k = Field::new(FieldSpec::new(3, 2)).unwrap();
        let cfg = KernelConfig::default();
        let c0 = 5u16; // a nonzero element outside the prime field
        let u = TruncSeries::monomial(k.clone(), c0, 1, 0, 64);
        let v = TruncSeries::from_terms(
            k.clone(),
            64,
            [((0u32, 3u32), 1u16), ((2, 1), k.neg(1))],
        );
        let g = germ(u, v);
        let t = oracle_transition(&g, 2, 1, 1, 1, 1, &cfg).unwrap();
        // same outcome as the c0 = 1 seed: sigma = 1, c' = 2*2 - 2*1 = 2
        assert_eq!(t.germ_type, GermType::T1);
        assert_eq!(t.c_exponent, 2);
    }

    #[test]
    fn bad_cofactors_rejected() {
        let k = field(2, 1);
        let cfg = KernelConfig::default();
        let seed = seed_artin_schreier(k, 1, 64).unwrap();
        assert!(matches!(
            oracle_transition(&seed, 3, 1, 1, 1, 1, &cfg),
            Err(GermError::BadStep(_))
        ));
        assert!(matches!(
            oracle_transition(&seed, 4, 2, 1, 1, 1, &cfg),
            Err(GermError::BadStep(_))
        ));
    }

    #[test]
    fn transition_identity_germ_degenerates() {
        let k = field(2, 1);
        let cfg = KernelConfig::default();
        let g = germ(
            TruncSeries::monomial(k.clone(), 1, 1, 0, 32),
            TruncSeries::monomial(k, 1, 0, 1, 32),
        );
        let t = oracle_transition(&g, 3, 2, 1, 1, 1, &cfg).unwrap();
        assert_eq!(t.germ_type, GermType::T0);
        assert_eq!(t.c_exponent, 0);
    }

    #[test]
    fn transition_case0_lands_unramified() {
        // q/m >= c/(p-1) forces the unramified outcome
        let k = field(3, 1);
        let cfg = KernelConfig::default();
        let seed = seed_artin_schreier(k, 1, 48).unwrap(); // c = 2, ratio 1
        let t = oracle_transition(&seed, 2, 3, 1, 2, 1, &cfg).unwrap();
        assert_eq!(t.germ_type, GermType::T0);
    }

    #[test]
    fn galois_difference_values() {
        let k = field(2, 4);
        let (v, ok) = galois_difference(&k, 1, 1).unwrap();
        assert_eq!(v, Rat::one());
        assert!(ok);

        let k3 = field(3, 2);
        let (v1, ok1) = galois_difference(&k3, 2, 1).unwrap();
        let (v2, ok2) = galois_difference(&k3, 2, 2).unwrap();
        assert_eq!(v1, Rat::from_int(2));
        assert_eq!(v1, v2);
        assert!(ok1 && ok2);

        assert!(galois_difference(&k3, 0, 1).is_err());
        assert!(galois_difference(&k3, 1, 3).is_err());
    }

    #[test]
    fn strong_monomial_decisions() {
        let k = field(2, 1);
        // (x^2, y): already strongly monomial
        let g = germ(
            TruncSeries::monomial(k.clone(), 1, 2, 0, 16),
            TruncSeries::monomial(k.clone(), 1, 0, 1, 16),
        );
        assert!(matches!(
            detect_strong_monomial(&g, 2),
            StrongMonomial::Yes {
                swapped: false,
                power: 2,
                ..
            }
        ));

        // (x^3 (1+y), y + x): witness after unit absorption and a shear
        let g = germ(
            TruncSeries::from_terms(k.clone(), 16, [((3u32, 0u32), 1), ((3, 1), 1)]),
            TruncSeries::from_terms(k.clone(), 16, [((0u32, 1u32), 1), ((1, 0), 1)]),
        );
        assert!(matches!(
            detect_strong_monomial(&g, 2),
            StrongMonomial::Yes {
                swapped: false,
                power: 3,
                ..
            }
        ));

        // stable shape u = x^2, v = y^2 + x^2 y (+ higher): certified no
        let g = germ(
            TruncSeries::from_terms(k.clone(), 16, [((2u32, 0u32), 1), ((3, 0), 1)]),
            TruncSeries::from_terms(k, 16, [((0u32, 2u32), 1), ((2, 1), 1)]),
        );
        assert_eq!(
            detect_strong_monomial(&g, 3),
            StrongMonomial::No { cross_exponent: 2 }
        );
    }

    #[test]
    fn germ_json_roundtrip() {
        let k = field(3, 4);
        let g = seed_artin_schreier(k, 2, 24).unwrap();
        let text = serde_json::to_string(&g.to_json()).unwrap();
        let parsed: GermJson = serde_json::from_str(&text).unwrap();
        let g2 = MapGerm::from_json(&parsed).unwrap();
        assert_eq!(g.u, g2.u);
        assert_eq!(g.v, g2.v);
    }
}
