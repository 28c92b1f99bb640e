//! Two-level towers of Artin-Schreier extensions: the dependent worked
//! example with its exact distances, the independent-defect tower where
//! strong local monomialization fails, and the stable-form audit.
//!
//! Both levels are driven by the exponent engine. The lower level's
//! blowup data are the middle-row substitutions `(m_i, q_i)`; the upper
//! level's are the top-row `(m'_i, q'_i)`. The levels are linked:
//! at a step where the lower map is type 1 and the upper type 2,
//! `m = p mbar` and `m' = mbar`; in the opposite configuration
//! `mbar = p m` and `m' = mbar`; the `q`'s agree across all three rows.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{step_any, EngineError, EngineOptions, ExtType, ExtensionState, TransformStep};
use crate::field::{Field, FieldSpec};
use crate::germ::{detect_strong_monomial, GermError, MapGerm, StrongMonomial};
use crate::rat::{limit_of_decrement_series, DistanceBound, Rat, ValueError};
use crate::series::TruncSeries;
use crate::synth::{choose_step, SynthError};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TowerError {
    #[error("c must be a positive multiple of p - 1, got c = {c} at p = {p}")]
    Divisibility { p: u32, c: u32 },
    #[error("link invariant violated at depth {depth}: {what}")]
    LinkViolation { depth: usize, what: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Germ(#[from] GermError),
}

/// Per-step link record between the three rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkRecord {
    /// Middle-row datum `(m, q)` driving the lower level.
    pub m: u32,
    pub q: u32,
    /// Base-row co-step `mbar` of the lower level.
    pub mbar: u32,
    /// Top-row datum `(m', q')` driving the upper level.
    pub m_upper: u32,
    pub q_upper: u32,
}

/// Linked pair of extension states at one depth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerState {
    pub lower: ExtensionState,
    pub upper: ExtensionState,
}

/// Full history of a linked two-level run.
#[derive(Clone, Debug)]
pub struct TowerTrace {
    pub p: u32,
    pub states: Vec<TowerState>,
    pub links: Vec<LinkRecord>,
    pub d_lower: Vec<Rat>,
    pub d_upper: Vec<Rat>,
    pub audit_flags: Vec<Option<StableFormFlag>>,
}

impl TowerTrace {
    pub fn depth(&self) -> usize {
        self.states.len() - 1
    }
}

fn apply_linked_step(
    states: &mut Vec<TowerState>,
    links: &mut Vec<LinkRecord>,
    d_lower: &mut Vec<Rat>,
    d_upper: &mut Vec<Rat>,
    lower_step: &TransformStep,
    upper_step: &TransformStep,
) -> Result<(), TowerError> {
    let opts = EngineOptions::default();
    let cur = states.last().expect("nonempty");
    let depth = states.len() - 1;
    let p = cur.lower.p;

    let lower_out = step_any(&cur.lower, lower_step, &opts)?;
    let upper_out = step_any(&cur.upper, upper_step, &opts)?;

    // link invariants: the upper level's base-row co-step must be the
    // middle row, and all q's agree
    if upper_out.mbar != lower_step.m {
        return Err(TowerError::LinkViolation {
            depth,
            what: format!(
                "upper co-step mbar' = {} differs from the middle-row m = {}",
                upper_out.mbar, lower_step.m
            ),
        });
    }
    if upper_out.qbar != lower_step.q as u64 {
        return Err(TowerError::LinkViolation {
            depth,
            what: format!(
                "upper co-step qbar' = {} differs from the middle-row q = {}",
                upper_out.qbar, lower_step.q
            ),
        });
    }
    // parity form of the link: one level is type 1 and the other type 2,
    // and the p-factor sits on the type-1 side's blowup datum
    match (cur.lower.ext_type, cur.upper.ext_type) {
        (ExtType::T1, ExtType::T2) => {
            if lower_step.m != p * upper_step.m {
                return Err(TowerError::LinkViolation {
                    depth,
                    what: format!(
                        "expected m = p m', got m = {}, m' = {}",
                        lower_step.m, upper_step.m
                    ),
                });
            }
            if lower_out.mbar != upper_step.m {
                return Err(TowerError::LinkViolation {
                    depth,
                    what: format!(
                        "expected mbar = m' = {}, got mbar = {}",
                        upper_step.m, lower_out.mbar
                    ),
                });
            }
        }
        (ExtType::T2, ExtType::T1) => {
            if upper_step.m != p * lower_step.m {
                return Err(TowerError::LinkViolation {
                    depth,
                    what: format!(
                        "expected m' = p m, got m = {}, m' = {}",
                        lower_step.m, upper_step.m
                    ),
                });
            }
            if lower_out.mbar != upper_step.m {
                return Err(TowerError::LinkViolation {
                    depth,
                    what: format!(
                        "expected mbar = m' = {}, got mbar = {}",
                        upper_step.m, lower_out.mbar
                    ),
                });
            }
        }
        (lo, up) => {
            return Err(TowerError::LinkViolation {
                depth,
                what: format!(
                    "levels have types {} and {}, expected opposite types",
                    lo, up
                ),
            })
        }
    }
    if lower_step.q != upper_step.q {
        return Err(TowerError::LinkViolation {
            depth,
            what: format!("q = {} and q' = {} differ", lower_step.q, upper_step.q),
        });
    }

    links.push(LinkRecord {
        m: lower_step.m,
        q: lower_step.q,
        mbar: lower_out.mbar,
        m_upper: upper_step.m,
        q_upper: upper_step.q,
    });
    debug_assert!(lower_out.state.d_value() <= cur.lower.d_value());
    debug_assert!(upper_out.state.d_value() <= cur.upper.d_value());
    d_lower.push(lower_out.state.d_value());
    d_upper.push(upper_out.state.d_value());
    states.push(TowerState {
        lower: lower_out.state,
        upper: upper_out.state,
    });
    Ok(())
}

/// Exact data of the dependent worked example.
#[derive(Clone, Debug)]
pub struct WorkedExample {
    /// Exact `-dist` of the base-to-middle extension.
    pub dist_lower: DistanceBound,
    /// Exact `-dist` of the middle-to-top extension.
    pub dist_upper: DistanceBound,
    /// Recurrence d-values of the lower level, indices `0..=depth`.
    pub d_lower: Vec<Rat>,
    /// Recurrence d-values of the upper level.
    pub d_upper: Vec<Rat>,
    /// Finite interval bounds at the requested depth.
    pub finite_lower: DistanceBound,
    pub finite_upper: DistanceBound,
}

/// The dependent two-level tower `u = x^p/(1 - x^{p-1})`, `v = y^p - x^c y`
/// evaluated by its own parity recurrences, with both distances closed to
/// exact rationals.
///
/// Lower level: `omega(x_k)` drops by `p` at odd steps and `p^3` at even
/// steps; the d-value is invariant at even steps and drops by
/// `omega(x_k)` at odd steps, starting from `c_1 = 2p - 2`. Upper level:
/// `omega` drops by `p^2` every step; the d-value is invariant at odd
/// steps and drops by `omega(x_k)` at even steps, starting from `c_1 = c`.
pub fn worked_example(p: u32, c: u32, depth: usize) -> Result<WorkedExample, TowerError> {
    if c == 0 || !c.is_multiple_of(p - 1) {
        return Err(TowerError::Divisibility { p, c });
    }

    // lower level recurrence, 1-based step parity
    let mut d_lower = vec![Rat::from_int(2)];
    let mut omega = Rat::one();
    for k in 1..=depth {
        let d_prev = d_lower.last().unwrap().clone();
        if k % 2 == 1 {
            d_lower.push(d_prev.sub(&omega));
            omega = omega.div(&Rat::from_int(p as i64)); // m_{k+1} = p
        } else {
            d_lower.push(d_prev);
            omega = omega.div(&Rat::int_pow(p as i64, 3)); // m_{k+1} = p^3
        }
    }

    // upper level recurrence
    let c_ratio = Rat::from_int(c as i64).div(&Rat::from_int((p - 1) as i64));
    let mut d_upper = vec![c_ratio.clone()];
    let mut omega_up = Rat::one();
    for k in 1..=depth {
        let d_prev = d_upper.last().unwrap().clone();
        if k % 2 == 0 {
            d_upper.push(d_prev.sub(&omega_up));
        } else {
            d_upper.push(d_prev);
        }
        omega_up = omega_up.div(&Rat::int_pow(p as i64, 2));
    }

    // periodic closure: lower decrements 1, 1/p^4, 1/p^8, ...; upper
    // decrements 1/p^2, 1/p^6, ...
    let r = Rat::int_pow(p as i64, 4).recip();
    let dist_lower = DistanceBound::exact(limit_of_decrement_series(
        &Rat::from_int(2),
        &Rat::one(),
        &r,
    )?);
    let dist_upper = DistanceBound::exact(limit_of_decrement_series(
        &c_ratio,
        &Rat::int_pow(p as i64, 2).recip(),
        &r,
    )?);

    let min_of = |v: &[Rat]| {
        v.iter()
            .skip(1)
            .fold(v[0].clone(), |acc, d| acc.min(d.clone()))
    };
    Ok(WorkedExample {
        finite_lower: DistanceBound::interval(Rat::zero(), min_of(&d_lower)),
        finite_upper: DistanceBound::interval(Rat::zero(), min_of(&d_upper)),
        dist_lower,
        dist_upper,
        d_lower,
        d_upper,
    })
}

/// The worked example rebuilt through the engine as a linked tower:
/// lower level seeded type 2 with ratio 2 (`c_1 = 2p-2`), upper level
/// type 1 with ratio `c/(p-1)`; middle-row data alternate `(p, 1)`,
/// `(p^3, 1)` and top-row data are `(p^2, 1)` throughout.
pub fn worked_example_tower(p: u32, c: u32, depth: usize) -> Result<TowerTrace, TowerError> {
    if c == 0 || !c.is_multiple_of(p - 1) {
        return Err(TowerError::Divisibility { p, c });
    }
    let c_ratio = Rat::from_int(c as i64).div(&Rat::from_int((p - 1) as i64));
    let lower0 = ExtensionState::seed(p, ExtType::T2, Rat::from_int(2))?;
    let upper0 = ExtensionState::seed(p, ExtType::T1, c_ratio)?;
    let mut states = vec![TowerState {
        lower: lower0.clone(),
        upper: upper0.clone(),
    }];
    let mut links = Vec::new();
    let mut d_lower = vec![lower0.d_value()];
    let mut d_upper = vec![upper0.d_value()];
    for k in 1..=depth {
        let lower_step = if k % 2 == 1 {
            TransformStep::new(p, 1)?
        } else {
            TransformStep::new(p.pow(3), 1)?
        };
        let upper_step = TransformStep::new(p.pow(2), 1)?;
        apply_linked_step(
            &mut states,
            &mut links,
            &mut d_lower,
            &mut d_upper,
            &lower_step,
            &upper_step,
        )?;
    }
    Ok(TowerTrace {
        p,
        states,
        links,
        d_lower,
        d_upper,
        audit_flags: Vec::new(),
    })
}

/// Build the independent-defect tower: lower level type 1 at even depths
/// and type 2 at odd depths, upper level the opposite, with shrinking
/// windows forcing both distances to 0.
///
/// The pre-construction (two Artin-Schreier seeds with exponent `e` and
/// two coarse-window steps) produces the depth-0 configuration; reported
/// depths start there, keeping the pre-construction's normalization.
pub fn build_independent_tower(p: u32, depth: usize) -> Result<TowerTrace, TowerError> {
    build_independent_tower_with(p, depth, 2, 64)
}

pub fn build_independent_tower_with(
    p: u32,
    depth: usize,
    e: u32,
    lambda_cap: u32,
) -> Result<TowerTrace, TowerError> {
    let opts = EngineOptions::default();
    let e_ratio = Rat::from_int(e as i64);

    // pre-construction: lower seed (type 1) stepped to type 2, then the
    // upper seed (type 1) stepped to type 2 while the lower returns to
    // type 1; window exponents 1 and 2
    let mut lower = ExtensionState::seed(p, ExtType::T1, e_ratio.clone())?;
    {
        let entry = choose_step(
            &lower.jac_ratio,
            &lower.m_product,
            &Rat::zero(),
            2,
            1,
            p,
            pick_aux(p),
            lambda_cap,
        )?;
        lower = step_any(&lower, &entry, &opts)?.state;
        debug_assert_eq!(lower.ext_type, ExtType::T2);
    }
    let mut upper = ExtensionState::seed(p, ExtType::T1, e_ratio)?;
    {
        // upper entry fixes the shared q and the middle-row m = m'/p
        let entry_up = choose_step(
            &upper.jac_ratio,
            &upper.m_product,
            &Rat::zero(),
            2,
            2,
            p,
            pick_aux(p),
            lambda_cap,
        )?;
        let m_mid = entry_up.m / p;
        debug_assert!(m_mid > 1, "window exponents start at 2");
        let mid = TransformStep::new(m_mid, entry_up.q)?;
        let lower_out = step_any(&lower, &mid, &opts)?;
        let upper_out = step_any(&upper, &entry_up, &opts)?;
        debug_assert_eq!(lower_out.state.ext_type, ExtType::T1);
        debug_assert_eq!(upper_out.state.ext_type, ExtType::T2);
        debug_assert_eq!(upper_out.mbar, mid.m);
        lower = lower_out.state;
        upper = upper_out.state;
    }

    let mut states = vec![TowerState {
        lower: lower.clone(),
        upper: upper.clone(),
    }];
    let mut links = Vec::new();
    let mut d_lower = vec![lower.d_value()];
    let mut d_upper = vec![upper.d_value()];

    for i in 0..depth {
        let cur = states.last().unwrap();
        let t = i + 3; // window exponent, continuing the pre-construction's
        let (lower_step, upper_step) = if i % 2 == 0 {
            // lower T1 -> T2 through a window on the middle row
            let mid = choose_step(
                &cur.lower.jac_ratio,
                &cur.lower.m_product,
                &Rat::zero(),
                2,
                t,
                p,
                pick_aux(p),
                lambda_cap,
            )?;
            let up = TransformStep::new(mid.m / p, mid.q)?;
            (mid, up)
        } else {
            // upper T1 -> T2 through a window on the top row
            let up = choose_step(
                &cur.upper.jac_ratio,
                &cur.upper.m_product,
                &Rat::zero(),
                2,
                t,
                p,
                pick_aux(p),
                lambda_cap,
            )?;
            let mid = TransformStep::new(up.m / p, up.q)?;
            (mid, up)
        };
        apply_linked_step(
            &mut states,
            &mut links,
            &mut d_lower,
            &mut d_upper,
            &lower_step,
            &upper_step,
        )?;
        // type pattern: lower T1 at even depths, upper T1 at odd depths
        let newest = states.last().unwrap();
        let at = i + 1;
        let want_lower = if at % 2 == 0 {
            ExtType::T1
        } else {
            ExtType::T2
        };
        let want_upper = if at % 2 == 0 {
            ExtType::T2
        } else {
            ExtType::T1
        };
        if newest.lower.ext_type != want_lower || newest.upper.ext_type != want_upper {
            return Err(TowerError::LinkViolation {
                depth: at,
                what: format!(
                    "type pattern broke: lower {}, upper {}",
                    newest.lower.ext_type, newest.upper.ext_type
                ),
            });
        }
    }

    Ok(TowerTrace {
        p,
        states,
        links,
        d_lower,
        d_upper,
        audit_flags: Vec::new(),
    })
}

fn pick_aux(p: u32) -> u32 {
    if p == 2 {
        3
    } else {
        2
    }
}

/// Finite interval bounds for the two distances of a tower trace.
pub fn tower_distance_bounds(trace: &TowerTrace) -> (DistanceBound, DistanceBound) {
    let min_of = |v: &[Rat]| {
        v.iter()
            .skip(1)
            .fold(v[0].clone(), |acc, d| acc.min(d.clone()))
    };
    (
        DistanceBound::interval(Rat::zero(), min_of(&trace.d_lower)),
        DistanceBound::interval(Rat::zero(), min_of(&trace.d_upper)),
    )
}

/// Stable-form decision at one depth of a tower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StableFormFlag {
    /// Composite matches `u = alpha z^p, v = beta w^p + eps z^K w + ...`
    /// with the value inequality verified; not strongly monomial.
    NotStronglyMonomial,
    /// The level data form the strongly monomial shape.
    StronglyMonomial,
    /// No decision (missing next-step data or inequality unresolved).
    Unresolved,
}

/// Audit entry for one depth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditEntry {
    pub depth: usize,
    pub lower_type: ExtType,
    pub upper_type: ExtType,
    /// `z`-exponent of the composite `u`.
    pub composite_u_exponent: u32,
    /// Cross-term exponent `K` of `eps z^K w` in the composite `v`.
    pub cross_exponent: Option<BigUint>,
    /// Whether `omega(w^p) < omega(z^K w)` holds from the trace's window
    /// data.
    pub value_inequality: Option<bool>,
    /// Sufficient tail-order bound `p q_{next} / m_{next}` for the
    /// high-order parts; always satisfiable by construction.
    pub required_tail_order: Option<Rat>,
    pub flag: StableFormFlag,
    /// Kernel cross-check on a representative germ, when sampled.
    pub kernel_check: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub all_not_strongly_monomial: bool,
}

/// Audit the composed stable form of a two-level tower.
///
/// At each depth the composite of the two prepared forms has `u` a unit
/// times `z^{a a'}` and `v` led by `w^p` with cross term `z^K w`, where
/// `K = p c` (lower type 1 over upper type 2) or `K = c'` (lower type 2
/// over upper type 1). The not-strongly-monomial certificate additionally
/// needs `omega(w^p) < omega(z^K w)`, i.e. `(p-1) q_next < K m'_next`,
/// which is exactly the window inequality the construction enforces.
/// Sampled depths are cross-checked against the series kernel.
pub fn stable_form_audit(
    trace: &TowerTrace,
    sample_stride: usize,
) -> Result<AuditReport, TowerError> {
    let p = trace.p;
    let mut entries = Vec::new();
    let field = Field::new(FieldSpec::new(p, 1)).ok();
    for (depth, state) in trace.states.iter().enumerate() {
        let lower_t = state.lower.ext_type;
        let upper_t = state.upper.ext_type;
        let a_lower = lower_t.u_exponent(p);
        let a_upper = upper_t.u_exponent(p);
        let composite_u_exponent = a_lower * a_upper;

        let next_link = trace.links.get(depth);
        let (cross, inequality, tail_order) = match (lower_t, upper_t) {
            (ExtType::T1, ExtType::T2) => {
                // v = y^p tau + x^c y tau' + f(x) with x = delta z^p:
                // cross term z^{p c} w
                let c = state.lower.c_exponent().unwrap_or_default();
                let k = BigUint::from(p) * &c;
                let ineq = next_link.map(|l| {
                    // omega(w^p) < omega(z^K w) iff (p-1) q' < K m'
                    BigUint::from((p - 1) * l.q_upper) < &k * BigUint::from(l.m_upper)
                });
                let tail = next_link
                    .map(|l| Rat::from_int((p * l.q) as i64).div(&Rat::from_int(l.m as i64)));
                (Some(k), ineq, tail)
            }
            (ExtType::T2, ExtType::T1) => {
                // v = y tau + x Omega with y = w^p gamma + z^{c'} w + f(z):
                // cross term z^{c'} w
                let k = state.upper.c_exponent().unwrap_or_default();
                let ineq = next_link
                    .map(|l| BigUint::from((p - 1) * l.q_upper) < &k * BigUint::from(l.m_upper));
                let tail = next_link.map(|l| {
                    Rat::from_int((p * l.q_upper) as i64).div(&Rat::from_int(l.m_upper as i64))
                });
                (Some(k), ineq, tail)
            }
            _ => (None, None, None),
        };

        let flag = match (composite_u_exponent == p, &inequality) {
            (true, Some(true)) => StableFormFlag::NotStronglyMonomial,
            (true, Some(false)) | (true, None) => StableFormFlag::Unresolved,
            (false, _) => {
                // no composite defect shape; a single type-2 level over an
                // unramified one is the strongly monomial shape
                StableFormFlag::Unresolved
            }
        };

        // kernel cross-check on sampled depths with a small representative
        // cross exponent
        let kernel_check = if sample_stride > 0
            && depth % sample_stride.max(1) == 0
            && flag == StableFormFlag::NotStronglyMonomial
        {
            match (&field, &cross) {
                (Some(f), Some(k)) => {
                    u32::try_from(k)
                        .ok()
                        .filter(|&k| k >= p && k < 24)
                        .map(|k| {
                            representative_stable_germ(f.clone(), p, k)
                                .map(|g| {
                                    matches!(
                                        detect_strong_monomial(&g, 3),
                                        StrongMonomial::No { .. }
                                    )
                                })
                                .unwrap_or(false)
                        })
                }
                _ => None,
            }
        } else {
            None
        };

        entries.push(AuditEntry {
            depth,
            lower_type: lower_t,
            upper_type: upper_t,
            composite_u_exponent,
            cross_exponent: cross,
            value_inequality: inequality,
            required_tail_order: tail_order,
            flag,
            kernel_check,
        });
    }
    // the final depth has no next-step data; it does not defeat the audit
    let all = entries
        .iter()
        .take(entries.len().saturating_sub(1))
        .all(|e| e.flag == StableFormFlag::NotStronglyMonomial);
    Ok(AuditReport {
        entries,
        all_not_strongly_monomial: all,
    })
}

/// Representative germ of the composed stable shape with cross exponent
/// `k`: `u = z^p (1 + z), v = w^p + z^k w`.
fn representative_stable_germ(
    field: crate::field::FieldRef,
    p: u32,
    k: u32,
) -> Result<MapGerm, GermError> {
    let order = (k + p + 4).max(16);
    let u = TruncSeries::from_terms(
        field.clone(),
        order,
        [((p, 0u32), 1 as crate::field::Elem), ((p + 1, 0), 1)],
    );
    let v = TruncSeries::from_terms(field, order, [((0u32, p), 1), ((k, 1), 1)]);
    MapGerm::new(u, v)
}

/// Stable-form reading of a single-level trace: type 2 is the strongly
/// monomial shape, type 1 is not, type 0 is trivially monomial.
pub fn single_level_flags(trace: &crate::engine::Trace) -> Vec<StableFormFlag> {
    trace
        .states
        .iter()
        .map(|s| match s.ext_type {
            ExtType::T2 | ExtType::T0 => StableFormFlag::StronglyMonomial,
            ExtType::T1 => StableFormFlag::NotStronglyMonomial,
        })
        .collect()
}

/// Per-depth tower report row for serialization.
#[derive(Serialize, Deserialize)]
pub struct TowerReportRow {
    pub depth: usize,
    pub lower_type: ExtType,
    pub upper_type: ExtType,
    pub c_lower: String,
    pub c_upper: String,
    pub d_lower: Rat,
    pub d_upper: Rat,
    pub audit_flag: Option<StableFormFlag>,
}

pub fn tower_report_rows(trace: &TowerTrace, audit: Option<&AuditReport>) -> Vec<TowerReportRow> {
    trace
        .states
        .iter()
        .enumerate()
        .map(|(depth, s)| TowerReportRow {
            depth,
            lower_type: s.lower.ext_type,
            upper_type: s.upper.ext_type,
            c_lower: s
                .lower
                .c_exponent()
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into()),
            c_upper: s
                .upper
                .c_exponent()
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into()),
            d_lower: trace.d_lower[depth].clone(),
            d_upper: trace.d_upper[depth].clone(),
            audit_flag: audit.and_then(|a| a.entries.get(depth).map(|e| e.flag)),
        })
        .collect()
}
