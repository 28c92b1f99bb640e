//! Exponent-level state machine for quadratic-transform sequences in an
//! Artin-Schreier extension.
//!
//! A state tracks the prepared type (0, 1 or 2), the Jacobian ratio
//! `c/(p-1)`, and the accumulated products `M = m_1...m_i` (target side)
//! and `Mbar = mbar_1...mbar_i` (base side), normalized to
//! `omega(x_0) = 1`. Transitions implement the two transition rules:
//!
//! - from type 1 (`m > 1`, `sigma = gcd(m, pq)`): type 0 when
//!   `q/m >= c/(p-1)`, else type 1 with ratio `ratio*m - q` (`sigma = 1`)
//!   or type 2 with ratio `ratio*m - q + 1` (`sigma = p`);
//! - from type 2 (`sigma = gcd(pm, q)`): type 1 with ratio `ratio*m - m`
//!   (`sigma = 1`) or type 2 with ratio `ratio*m - m + 1` (`sigma = p`).
//!
//! Distances come from the infimum of `d_i = ratio_i / M_i`; a declared
//! periodic tail is closed to an exact geometric limit.

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::{
    bound_refine, lattice_index, limit_of_decrement_series, DistanceBound, GroupLattice, Rat,
    ValueError,
};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("step applied to a state of the wrong type: expected {expected}, found {found}")]
    WrongType { expected: String, found: String },
    #[error("step hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("resulting exponent ratio {0} is not a positive multiple of 1/(p-1)")]
    BadResultExponent(String),
    #[error("step {index}: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<EngineError>,
    },
    #[error("d-values failed to be non-increasing at step {0}")]
    MonotonicityViolation(usize),
    #[error("state has absorbing type 0; no further defect-tracking transitions")]
    Absorbed,
    #[error("tail is not certifiable: {0}")]
    InfeasibleTail(String),
    #[error("trace reached type 0; distance tracking is not meaningful")]
    ReachedTypeZero,
    #[error("trace is unusable for this operation: {0}")]
    BadTrace(String),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
}

/// Prepared type of the extension at the current depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtType {
    T0,
    T1,
    T2,
}

impl std::fmt::Display for ExtType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtType::T0 => write!(f, "T0"),
            ExtType::T1 => write!(f, "T1"),
            ExtType::T2 => write!(f, "T2"),
        }
    }
}

impl ExtType {
    /// `x`-exponent of `u` in the prepared form (1 for types 0 and 1, p for
    /// type 2).
    pub fn u_exponent(&self, p: u32) -> u32 {
        match self {
            ExtType::T2 => p,
            _ => 1,
        }
    }
}

/// One blowup datum: the substitution
/// `xbar = x1^m (y1+alpha)^{a'}, ybar = x1^q (y1+alpha)^{b'}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StepJson", into = "StepJson")]
pub struct TransformStep {
    pub m: u32,
    pub q: u32,
    pub a_cof: u32,
    pub b_cof: u32,
    /// Abstract nonzero residue-constant identifier; only the series kernel
    /// resolves it to a field element.
    pub alpha_label: u32,
}

#[derive(Serialize, Deserialize)]
struct StepJson {
    m: u32,
    q: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<u32>,
}

impl TryFrom<StepJson> for TransformStep {
    type Error = String;
    fn try_from(j: StepJson) -> Result<TransformStep, String> {
        TransformStep::with_label(j.m, j.q, j.alpha.unwrap_or(1)).map_err(|e| e.to_string())
    }
}

impl From<TransformStep> for StepJson {
    fn from(s: TransformStep) -> StepJson {
        StepJson {
            m: s.m,
            q: s.q,
            alpha: (s.alpha_label != 1).then_some(s.alpha_label),
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl TransformStep {
    /// Canonical step for `(m, q)`: cofactors from the extended Euclidean
    /// algorithm with `0 <= a' < m`, residue label 1.
    pub fn new(m: u32, q: u32) -> Result<TransformStep, EngineError> {
        TransformStep::with_label(m, q, 1)
    }

    pub fn with_label(m: u32, q: u32, alpha_label: u32) -> Result<TransformStep, EngineError> {
        if m == 0 || q == 0 {
            return Err(EngineError::HypothesisViolation(
                "m and q must be positive".into(),
            ));
        }
        if gcd(m as u64, q as u64) != 1 {
            return Err(EngineError::HypothesisViolation(format!(
                "gcd({}, {}) != 1",
                m, q
            )));
        }
        if alpha_label == 0 {
            return Err(EngineError::HypothesisViolation(
                "residue label must be nonzero".into(),
            ));
        }
        let (a_cof, b_cof) =
            crate::germ::unimodular_cofactors(m as u64, q as u64).expect("coprimality checked");
        Ok(TransformStep {
            m,
            q,
            a_cof: a_cof as u32,
            b_cof: b_cof as u32,
            alpha_label,
        })
    }
}

/// Exponent-level state of one map `R_i -> S_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionState {
    pub p: u32,
    #[serde(rename = "type")]
    pub ext_type: ExtType,
    /// The ratio `c/(p-1)`; `(p-1) * jac_ratio` is a positive integer at
    /// every non-T0 state (zero at T0, where the map is unramified).
    pub jac_ratio: Rat,
    pub depth: usize,
    /// Product `m_1 ... m_i`, so `omega(x_i) = 1/M`.
    pub m_product: BigUint,
    /// Product `mbar_1 ... mbar_i` on the base side.
    pub mbar_product: BigUint,
}

impl ExtensionState {
    pub fn seed(p: u32, ext_type: ExtType, jac_ratio: Rat) -> Result<ExtensionState, EngineError> {
        if ext_type == ExtType::T0 {
            return Err(EngineError::Absorbed);
        }
        let state = ExtensionState {
            p,
            ext_type,
            jac_ratio,
            depth: 0,
            m_product: BigUint::one(),
            mbar_product: BigUint::one(),
        };
        state.check_integral()?;
        Ok(state)
    }

    pub fn omega_x(&self) -> Rat {
        Rat::from_biguint(&self.m_product).recip()
    }

    /// `d_i = jac_ratio / M = (c_i/(p-1)) omega(x_i)`.
    pub fn d_value(&self) -> Rat {
        self.jac_ratio.div(&Rat::from_biguint(&self.m_product))
    }

    /// The integer exponent `c = (p-1) * jac_ratio`.
    pub fn c_exponent(&self) -> Option<BigUint> {
        self.jac_ratio
            .scale_int((self.p - 1) as i64)
            .to_integer()
            .and_then(|n| n.to_biguint())
    }

    fn check_integral(&self) -> Result<(), EngineError> {
        if self.ext_type == ExtType::T0 {
            return Ok(());
        }
        let c = self.jac_ratio.scale_int((self.p - 1) as i64);
        match c.to_integer() {
            Some(n) if n.is_positive() => Ok(()),
            _ => Err(EngineError::BadResultExponent(c.to_string())),
        }
    }
}

/// Per-step strictness options; `require_mbar_gt_1` enforces the
/// standard-sequence alignment `mbar > 1` on type-2 steps (off by default,
/// the transition rule itself does not need it).
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct EngineOptions {
    pub require_mbar_gt_1: bool,
}

/// Result data of one engine step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub state: ExtensionState,
    pub sigma: u32,
    pub mbar: u32,
    pub qbar: u64,
}

/// Type-1 transition; requires `m > 1`.
pub fn step_from_type1(
    state: &ExtensionState,
    step: &TransformStep,
    _opts: &EngineOptions,
) -> Result<StepOutcome, EngineError> {
    if state.ext_type != ExtType::T1 {
        return Err(EngineError::WrongType {
            expected: "T1".into(),
            found: state.ext_type.to_string(),
        });
    }
    if step.m <= 1 {
        return Err(EngineError::HypothesisViolation(
            "type-1 steps require m > 1".into(),
        ));
    }
    let p = state.p as u64;
    let (m, q) = (step.m as u64, step.q as u64);
    let q_over_m = Rat::from_int(q as i64).div(&Rat::from_int(m as i64));

    let mut next = state.clone();
    next.depth += 1;
    next.m_product *= BigUint::from(m);

    if q_over_m >= state.jac_ratio {
        // unramified from here on; the co-step has sigma-bar = 1
        next.ext_type = ExtType::T0;
        next.jac_ratio = Rat::zero();
        next.mbar_product *= BigUint::from(m);
        return Ok(StepOutcome {
            state: next,
            sigma: 1,
            mbar: m as u32,
            qbar: 0,
        });
    }

    let sigma = gcd(m, p * q);
    debug_assert!(sigma == 1 || sigma == p);
    let mbar = m / sigma;
    let qbar = p * q / sigma;
    next.mbar_product *= BigUint::from(mbar);
    let dropped = state
        .jac_ratio
        .scale_int(m as i64)
        .sub(&Rat::from_int(q as i64));
    if sigma == 1 {
        next.ext_type = ExtType::T1;
        next.jac_ratio = dropped;
    } else {
        next.ext_type = ExtType::T2;
        next.jac_ratio = dropped.add(&Rat::one());
    }
    next.check_integral()?;
    Ok(StepOutcome {
        state: next,
        sigma: sigma as u32,
        mbar: mbar as u32,
        qbar,
    })
}

/// Type-2 transition; `m = 1` is permitted.
pub fn step_from_type2(
    state: &ExtensionState,
    step: &TransformStep,
    opts: &EngineOptions,
) -> Result<StepOutcome, EngineError> {
    if state.ext_type != ExtType::T2 {
        return Err(EngineError::WrongType {
            expected: "T2".into(),
            found: state.ext_type.to_string(),
        });
    }
    let p = state.p as u64;
    let (m, q) = (step.m as u64, step.q as u64);
    let sigma = gcd(p * m, q);
    debug_assert!(sigma == 1 || sigma == p);
    let mbar = p * m / sigma;
    let qbar = q / sigma;
    if opts.require_mbar_gt_1 && mbar <= 1 {
        return Err(EngineError::HypothesisViolation(format!(
            "strict mode: mbar = {} must exceed 1",
            mbar
        )));
    }

    let mut next = state.clone();
    next.depth += 1;
    next.m_product *= BigUint::from(m);
    next.mbar_product *= BigUint::from(mbar);
    let dropped = state
        .jac_ratio
        .scale_int(m as i64)
        .sub(&Rat::from_int(m as i64));
    if sigma == 1 {
        next.ext_type = ExtType::T1;
        next.jac_ratio = dropped;
    } else {
        next.ext_type = ExtType::T2;
        next.jac_ratio = dropped.add(&Rat::one());
    }
    next.check_integral()?;
    Ok(StepOutcome {
        state: next,
        sigma: sigma as u32,
        mbar: mbar as u32,
        qbar,
    })
}

/// Dispatch on the current type.
pub fn step_any(
    state: &ExtensionState,
    step: &TransformStep,
    opts: &EngineOptions,
) -> Result<StepOutcome, EngineError> {
    match state.ext_type {
        ExtType::T1 => step_from_type1(state, step, opts),
        ExtType::T2 => step_from_type2(state, step, opts),
        ExtType::T0 => Err(EngineError::Absorbed),
    }
}

/// A finite prefix plus an optional tail repeated forever.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub prefix: Vec<TransformStep>,
    pub tail: Option<Vec<TransformStep>>,
}

impl Schedule {
    pub fn finite(prefix: Vec<TransformStep>) -> Schedule {
        Schedule { prefix, tail: None }
    }

    pub fn with_tail(
        prefix: Vec<TransformStep>,
        tail: Vec<TransformStep>,
    ) -> Result<Schedule, EngineError> {
        if tail.is_empty() {
            return Err(EngineError::BadSchedule("declared tail is empty".into()));
        }
        Ok(Schedule {
            prefix,
            tail: Some(tail),
        })
    }

    pub fn step_at(&self, i: usize) -> Option<&TransformStep> {
        if i < self.prefix.len() {
            return Some(&self.prefix[i]);
        }
        let tail = self.tail.as_ref()?;
        Some(&tail[(i - self.prefix.len()) % tail.len()])
    }
}

/// Full history of a schedule run.
#[derive(Clone, Debug)]
pub struct Trace {
    pub p: u32,
    pub states: Vec<ExtensionState>,
    pub steps: Vec<TransformStep>,
    pub d_values: Vec<Rat>,
    pub sigma_values: Vec<u32>,
    /// The declared tail, when the schedule had one and the run consumed
    /// the whole prefix; infinite-behavior verdicts require it.
    pub tail: Option<Vec<TransformStep>>,
    /// Index at which the tail starts (= prefix length).
    pub tail_start: usize,
    pub halted_t0: bool,
}

impl Trace {
    pub fn seed_state(&self) -> &ExtensionState {
        &self.states[0]
    }

    pub fn last_state(&self) -> &ExtensionState {
        self.states.last().expect("nonempty")
    }

    pub fn depth(&self) -> usize {
        self.states.len() - 1
    }
}

/// Fold `depth` schedule steps from the seed state, recording every state,
/// d-value and sigma. Reaching type 0 freezes the trace. A finite schedule
/// shorter than `depth` stops at its end.
pub fn run_schedule(
    state0: &ExtensionState,
    schedule: &Schedule,
    depth: usize,
    opts: &EngineOptions,
) -> Result<Trace, EngineError> {
    let mut states = vec![state0.clone()];
    let mut d_values = vec![state0.d_value()];
    let mut steps = Vec::new();
    let mut sigma_values = Vec::new();
    let mut halted_t0 = state0.ext_type == ExtType::T0;
    let p = state0.p;
    let a0 = state0.ext_type.u_exponent(p);

    for i in 0..depth {
        if halted_t0 {
            break;
        }
        let Some(step) = schedule.step_at(i) else {
            break;
        };
        let out =
            step_any(states.last().unwrap(), step, opts).map_err(|e| EngineError::AtStep {
                index: i,
                source: Box::new(e),
            })?;
        let d = out.state.d_value();
        if d > *d_values.last().unwrap() {
            return Err(EngineError::MonotonicityViolation(i));
        }
        // switching necessary conditions, direct consequences of the sigma
        // definitions
        match (states.last().unwrap().ext_type, out.state.ext_type) {
            (ExtType::T1, ExtType::T2) => debug_assert_eq!(step.m % p, 0),
            (ExtType::T2, ExtType::T1) => {
                debug_assert!(step.q % p != 0 && out.mbar % p == 0)
            }
            _ => {}
        }
        // cross-check a_0 M_d Mbar_0 = a_d Mbar_d M_0 (run may start from a
        // mid-trace state with nontrivial products)
        debug_assert_eq!(
            BigUint::from(a0) * &out.state.m_product * &state0.mbar_product,
            BigUint::from(out.state.ext_type.u_exponent(p))
                * &out.state.mbar_product
                * &state0.m_product,
        );
        if out.state.ext_type == ExtType::T0 {
            halted_t0 = true;
        }
        d_values.push(d);
        sigma_values.push(out.sigma);
        steps.push(step.clone());
        states.push(out.state);
    }

    let consumed_prefix = states.len() > schedule.prefix.len();
    Ok(Trace {
        p,
        states,
        steps,
        d_values,
        sigma_values,
        tail: if consumed_prefix && !halted_t0 {
            schedule.tail.clone()
        } else {
            None
        },
        tail_start: schedule.prefix.len(),
        halted_t0,
    })
}

/// Certified data of a periodic tail: the effective cycle (passes of the
/// tail until the boundary type recurs), its d decrement at the anchor, and
/// the geometric ratio `1/P` with `P` the cycle's m-product.
struct TailCycle {
    anchor_d: Rat,
    first_decrement: Rat,
    ratio: Rat,
    cycle_types: Vec<ExtType>,
}

fn certify_tail(trace: &Trace, opts: &EngineOptions) -> Result<Option<TailCycle>, EngineError> {
    let Some(tail) = &trace.tail else {
        return Ok(None);
    };
    if trace.tail_start >= trace.states.len() {
        return Ok(None);
    }
    let start = trace.states[trace.tail_start].clone();

    let run_pass = |s: &ExtensionState| -> Result<(ExtensionState, Vec<ExtType>), EngineError> {
        let mut cur = s.clone();
        let mut types = Vec::new();
        for step in tail {
            let out = step_any(&cur, step, opts)
                .map_err(|e| EngineError::InfeasibleTail(format!("tail step failed: {}", e)))?;
            cur = out.state;
            if cur.ext_type == ExtType::T0 {
                return Err(EngineError::ReachedTypeZero);
            }
            types.push(cur.ext_type);
        }
        Ok((cur, types))
    };

    // Pass boundaries s_0..s_3; among four boundaries with two possible
    // types some pair (i, j) with i < j repeats, and the tail from s_i is
    // periodic with cycle length j - i passes. The discarded passes only
    // lower d, which is fine: the limit from the anchor is the infimum.
    let mut boundaries: Vec<(ExtensionState, Vec<ExtType>)> = vec![(start, Vec::new())];
    for _ in 0..3 {
        let prev = &boundaries.last().unwrap().0;
        let next = run_pass(prev)?;
        boundaries.push(next);
    }
    let (i, j) = 'found: {
        for i in 0..boundaries.len() {
            for j in (i + 1)..boundaries.len() {
                if boundaries[i].0.ext_type == boundaries[j].0.ext_type {
                    break 'found (i, j);
                }
            }
        }
        unreachable!("two types among four boundaries must repeat");
    };
    let cycle_passes = j - i;
    let s_a = boundaries[i].0.clone();
    let s_b = boundaries[j].0.clone();
    let cycle_types: Vec<ExtType> = boundaries[i + 1..=j]
        .iter()
        .flat_map(|(_, t)| t.iter().copied())
        .collect();

    // one more cycle to confirm the geometric pattern
    let mut s_c = s_b.clone();
    for _ in 0..cycle_passes {
        s_c = run_pass(&s_c)?.0;
    }

    let p_prod = Rat::from_biguint(&s_b.m_product).div(&Rat::from_biguint(&s_a.m_product));
    let d_a = s_a.d_value();
    let d_b = s_b.d_value();
    let d_c = s_c.d_value();
    let dec1 = d_a.sub(&d_b);
    if dec1.is_negative() {
        return Err(EngineError::InfeasibleTail(
            "d increased over a cycle".into(),
        ));
    }
    if p_prod <= Rat::one() {
        // no blowup progress in the cycle; only a frozen d is certifiable
        if !dec1.is_zero() {
            return Err(EngineError::InfeasibleTail(
                "cycle has unit m-product but a nonzero decrement".into(),
            ));
        }
        return Ok(Some(TailCycle {
            anchor_d: d_a,
            first_decrement: Rat::zero(),
            ratio: Rat::zero(),
            cycle_types,
        }));
    }
    let ratio = p_prod.recip();
    let dec2 = d_b.sub(&d_c);
    if dec2 != dec1.mul(&ratio) {
        return Err(EngineError::InfeasibleTail(format!(
            "per-cycle decrements {} then {} are not geometric with ratio {}",
            dec1, dec2, ratio
        )));
    }
    // The boundary ratio evolves affinely J -> J*P - C per cycle; once it
    // is non-decreasing every in-cycle constraint holds forever. A
    // decreasing boundary ratio eventually turns nonpositive, so the tail
    // itself is infeasible.
    if s_b.jac_ratio < s_a.jac_ratio {
        return Err(EngineError::InfeasibleTail(
            "jacobian ratio decreases across cycles; the tail eventually fails".into(),
        ));
    }
    Ok(Some(TailCycle {
        anchor_d: d_a,
        first_decrement: dec1,
        ratio,
        cycle_types,
    }))
}

/// Distance bound from a trace: `[0, min d_i]` for finite traces, the exact
/// geometric limit when a periodic tail is certified.
pub fn distance_from_trace(trace: &Trace) -> Result<DistanceBound, EngineError> {
    distance_from_trace_opts(trace, &EngineOptions::default())
}

pub fn distance_from_trace_opts(
    trace: &Trace,
    opts: &EngineOptions,
) -> Result<DistanceBound, EngineError> {
    if trace.states.is_empty() {
        return Err(EngineError::BadTrace("empty trace".into()));
    }
    if trace.halted_t0 {
        return Err(EngineError::ReachedTypeZero);
    }
    for (i, w) in trace.d_values.windows(2).enumerate() {
        if w[1] > w[0] {
            return Err(EngineError::MonotonicityViolation(i));
        }
    }
    if let Some(cycle) = certify_tail(trace, opts)? {
        let limit =
            limit_of_decrement_series(&cycle.anchor_d, &cycle.first_decrement, &cycle.ratio)?;
        if limit.is_negative() {
            return Err(EngineError::InfeasibleTail(format!(
                "certified limit {} is negative",
                limit
            )));
        }
        return Ok(DistanceBound::exact(limit));
    }
    let mut bound = DistanceBound::interval(Rat::zero(), trace.d_values[0].clone());
    for d in &trace.d_values[1..] {
        bound = bound_refine(&bound, d)?;
    }
    Ok(bound)
}

/// Verdict on defect and ramification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Defectless,
    Defect,
    UnramifiedSplit,
    Undetermined,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Defectless => "defectless",
            Verdict::Defect => "defect",
            Verdict::UnramifiedSplit => "unramified_split",
            Verdict::Undetermined => "undetermined",
        };
        write!(f, "{}", s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectVerdict {
    pub verdict: Verdict,
    /// Reduced ramification index `e(omega/nu)` when determined.
    pub e_over_nu: u32,
    /// Defect `delta(omega/nu)` when determined.
    pub defect_power: u32,
    pub group_index_at_depth: BigUint,
}

/// Infinite-behavior verdict; requires a declared tail for anything beyond
/// `undetermined` (eventual behavior is not decidable from a prefix).
pub fn defect_verdict(trace: &Trace) -> Result<DefectVerdict, EngineError> {
    let p = trace.p;
    let group_index = value_group_index(trace)?;
    if trace.halted_t0 {
        return Ok(DefectVerdict {
            verdict: Verdict::UnramifiedSplit,
            e_over_nu: 1,
            defect_power: 1,
            group_index_at_depth: group_index,
        });
    }
    let cycle = match certify_tail(trace, &EngineOptions::default())? {
        Some(c) => c,
        None => {
            return Ok(DefectVerdict {
                verdict: Verdict::Undetermined,
                e_over_nu: 1,
                defect_power: 1,
                group_index_at_depth: group_index,
            })
        }
    };
    let all_t2 = cycle.cycle_types.iter().all(|t| *t == ExtType::T2);
    let verdict = if all_t2 {
        DefectVerdict {
            verdict: Verdict::Defectless,
            e_over_nu: p,
            defect_power: 1,
            group_index_at_depth: group_index,
        }
    } else {
        DefectVerdict {
            verdict: Verdict::Defect,
            e_over_nu: 1,
            defect_power: p,
            group_index_at_depth: group_index,
        }
    };
    debug_assert!(verdict.e_over_nu * verdict.defect_power == p);
    Ok(verdict)
}

/// `[omega L : nu K]` read from the trace: the lattice index at the final
/// depth for finite traces, the certified limit value when a tail is
/// declared (`p` for an all-T2 tail, 1 when the tail switches or stays
/// type 1, since the limit groups then coincide).
pub fn value_group_index(trace: &Trace) -> Result<BigUint, EngineError> {
    if trace.states.is_empty() {
        return Err(EngineError::BadTrace("empty trace".into()));
    }
    if !trace.halted_t0 {
        if let Some(cycle) = certify_tail(trace, &EngineOptions::default())? {
            let all_t2 = cycle.cycle_types.iter().all(|t| *t == ExtType::T2);
            return Ok(if all_t2 {
                BigUint::from(trace.p)
            } else {
                BigUint::one()
            });
        }
    }
    let last = trace.last_state();
    let seed = trace.seed_state();
    let p = trace.p;
    let omega_l = GroupLattice::new(Rat::one(), last.m_product.clone());
    let nu_k = GroupLattice::new(
        Rat::from_int(seed.ext_type.u_exponent(p) as i64),
        last.mbar_product.clone(),
    );
    Ok(lattice_index(&omega_l, &nu_k)?)
}

/// One switch record of the certificate report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub step_index: usize,
    pub from: ExtType,
    pub to: ExtType,
    pub m: u32,
    pub q: u32,
    pub ok: bool,
    pub condition: String,
}

/// Report of the switching necessary conditions along a trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwitchingReport {
    pub switches: Vec<SwitchRecord>,
    pub all_pass: bool,
    /// p-adic valuation of `M` after each step; growth witnesses the
    /// p-divisibility the switching criterion needs.
    pub m_padic_valuations: Vec<u32>,
}

fn padic_valuation(n: &BigUint, p: u32) -> u32 {
    let p = BigUint::from(p);
    let mut n = n.clone();
    let mut v = 0;
    while !n.is_zero() && (&n % &p).is_zero() {
        n /= &p;
        v += 1;
    }
    v
}

/// Verify the divisibility conditions forced at every type switch: a
/// `T1 -> T2` step has `p | m` and a `T2 -> T1` step has `q` coprime to `p`
/// (whence `p | mbar = pm`). Violations are reported, not thrown.
pub fn switching_certificate(trace: &Trace) -> SwitchingReport {
    let p = trace.p;
    let mut switches = Vec::new();
    let mut all_pass = true;
    for (i, step) in trace.steps.iter().enumerate() {
        let from = trace.states[i].ext_type;
        let to = trace.states[i + 1].ext_type;
        let rec = match (from, to) {
            (ExtType::T1, ExtType::T2) => Some(SwitchRecord {
                step_index: i,
                from,
                to,
                m: step.m,
                q: step.q,
                ok: step.m % p == 0,
                condition: format!("T1->T2 requires p = {} to divide m = {}", p, step.m),
            }),
            (ExtType::T2, ExtType::T1) => Some(SwitchRecord {
                step_index: i,
                from,
                to,
                m: step.m,
                q: step.q,
                ok: step.q % p != 0,
                condition: format!(
                    "T2->T1 requires q = {} coprime to p = {} (then p | mbar = pm)",
                    step.q, p
                ),
            }),
            _ => None,
        };
        if let Some(r) = rec {
            all_pass &= r.ok;
            switches.push(r);
        }
    }
    let m_padic_valuations = trace
        .states
        .iter()
        .skip(1)
        .map(|s| padic_valuation(&s.m_product, p))
        .collect();
    SwitchingReport {
        switches,
        all_pass,
        m_padic_valuations,
    }
}

/// Schedule JSON per the external interface.
#[derive(Serialize, Deserialize)]
pub struct ScheduleJson {
    pub p: u32,
    pub seed: SeedJson,
    pub prefix: Vec<TransformStep>,
    pub tail: Option<Vec<TransformStep>>,
}

#[derive(Serialize, Deserialize)]
pub struct SeedJson {
    #[serde(rename = "type")]
    pub ext_type: ExtType,
    pub jac_ratio: Rat,
}

impl ScheduleJson {
    pub fn into_parts(self) -> Result<(ExtensionState, Schedule), EngineError> {
        let state = ExtensionState::seed(self.p, self.seed.ext_type, self.seed.jac_ratio)?;
        let schedule = match self.tail {
            Some(tail) => Schedule::with_tail(self.prefix, tail)?,
            None => Schedule::finite(self.prefix),
        };
        Ok((state, schedule))
    }

    pub fn from_parts(state: &ExtensionState, schedule: &Schedule) -> ScheduleJson {
        ScheduleJson {
            p: state.p,
            seed: SeedJson {
                ext_type: state.ext_type,
                jac_ratio: state.jac_ratio.clone(),
            },
            prefix: schedule.prefix.clone(),
            tail: schedule.tail.clone(),
        }
    }
}
