//! Schedule synthesis with prescribed type switching and prescribed
//! distance.
//!
//! Given a switching plan `Phi: N -> {1, 2}` (not eventually constant 2)
//! and a rational target `alpha >= 0`, the synthesizer seeds an
//! Artin-Schreier extension with exponent `e > alpha` and picks blowup data
//! step by step so that the realized type at every position equals `Phi`
//! and the d-values at type-1 checkpoints are squeezed into
//! `(alpha, alpha + 2^{-t})`. The resulting `-dist` interval contains
//! `alpha` and its width shrinks geometrically with depth.
//!
//! Window searches pick `m` as a power of the auxiliary prime (type-1
//! steps) or of `p` (type-2 entries), iterating the exponent upward from
//! its least legal value; density of prime-power denominators guarantees a
//! hit, with a configurable cap raising an explicit infeasibility error.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    run_schedule, EngineError, EngineOptions, ExtType, ExtensionState, Schedule, Trace,
    TransformStep,
};
use crate::rat::{DistanceBound, Rat};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("window for step {t} is empty or exhausted the exponent cap {cap}")]
    InfeasibleStep { t: usize, cap: u32 },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("invalid plan: {0}")]
    BadPlan(String),
    #[error("construction bug: realized type {found} at position {position} differs from the plan's {planned}")]
    PlanMismatch {
        position: usize,
        planned: u8,
        found: String,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Prescribed switching function: a finite prefix and a tail repeated
/// forever. The tail must mention type 1 (a plan eventually constant 2
/// prescribes a defectless extension, which the construction cannot and
/// must not realize).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchPlan {
    pub prefix: Vec<u8>,
    pub tail: Vec<u8>,
}

impl SwitchPlan {
    pub fn new(prefix: Vec<u8>, tail: Vec<u8>) -> Result<SwitchPlan, SynthError> {
        if tail.is_empty() {
            return Err(SynthError::BadPlan("tail must be nonempty".into()));
        }
        if prefix.iter().chain(&tail).any(|&t| t != 1 && t != 2) {
            return Err(SynthError::BadPlan("plan entries must be 1 or 2".into()));
        }
        if !tail.contains(&1) {
            return Err(SynthError::BadPlan(
                "tail must contain a type-1 position".into(),
            ));
        }
        Ok(SwitchPlan { prefix, tail })
    }

    pub fn at(&self, n: usize) -> u8 {
        if n < self.prefix.len() {
            self.prefix[n]
        } else {
            self.tail[(n - self.prefix.len()) % self.tail.len()]
        }
    }

    /// Position > n of the next type-1 entry.
    fn next_type1_after(&self, n: usize) -> usize {
        let mut k = n + 1;
        loop {
            if self.at(k) == 1 {
                return k;
            }
            k += 1;
        }
    }
}

/// Parameters of a synthesis run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthParams {
    pub p: u32,
    /// Auxiliary prime distinct from `p`, the denominator base of type-1
    /// windows.
    pub p_aux: u32,
    /// Seed exponent; must exceed `alpha`.
    pub e: u32,
    /// Target value of `-dist`.
    pub alpha: Rat,
    pub depth: usize,
    /// Cap on window exponents before reporting infeasibility.
    #[serde(default = "default_lambda_cap")]
    pub lambda_cap: u32,
}

fn default_lambda_cap() -> u32 {
    64
}

impl SynthParams {
    fn validate(&self) -> Result<(), SynthError> {
        if self.p == self.p_aux {
            return Err(SynthError::BadParams("p_aux must differ from p".into()));
        }
        if !is_prime(self.p) || !is_prime(self.p_aux) {
            return Err(SynthError::BadParams("p and p_aux must be prime".into()));
        }
        if self.alpha.is_negative() {
            return Err(SynthError::BadParams("alpha must be >= 0".into()));
        }
        if Rat::from_int(self.e as i64) <= self.alpha {
            return Err(SynthError::BadParams(format!(
                "seed exponent e = {} must exceed alpha = {}",
                self.e, self.alpha
            )));
        }
        Ok(())
    }
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Choose the blowup datum for a checkpoint with window
/// `(c_ratio - (target + 2^{-t}) M, c_ratio - target M)` for `q/m`:
/// `m = base^lambda` with the least feasible `lambda` (at least 1 for
/// type-1 steps, at least 2 for type-2 entries), then the least `q`
/// coprime to `base` inside the scaled open window.
#[allow(clippy::too_many_arguments)]
pub fn choose_step(
    c_ratio: &Rat,
    m_product: &BigUint,
    target: &Rat,
    to_type: u8,
    t: usize,
    p: u32,
    p_aux: u32,
    lambda_cap: u32,
) -> Result<TransformStep, SynthError> {
    let scale = Rat::from_biguint(m_product);
    let upper = c_ratio.sub(&target.mul(&scale));
    let lower = c_ratio.sub(&target.add(&Rat::pow2_neg(t as u32)).mul(&scale));
    if upper <= Rat::zero() {
        return Err(SynthError::InfeasibleStep { t, cap: 0 });
    }
    let (base, lambda_min) = match to_type {
        1 => (p_aux, 1u32),
        2 => (p, 2u32),
        _ => return Err(SynthError::BadPlan("step type must be 1 or 2".into())),
    };
    for lambda in lambda_min..=lambda_cap {
        let m = Rat::int_pow(base as i64, lambda);
        let lo = lower.mul(&m);
        let hi = upper.mul(&m);
        // least integer >= 1 strictly above lo, scanning the open window
        let mut q = least_integer_above(&lo);
        while Rat::from_biguint(&q) < hi {
            let Ok(q_small) = u64::try_from(&q) else {
                break;
            };
            if gcd(q_small, base as u64) == 1 {
                let Some(m_small) = (base as u64).checked_pow(lambda) else {
                    return Err(SynthError::InfeasibleStep { t, cap: lambda_cap });
                };
                let (Ok(m_u32), Ok(q_u32)) = (u32::try_from(m_small), u32::try_from(q_small))
                else {
                    return Err(SynthError::InfeasibleStep { t, cap: lambda_cap });
                };
                return Ok(TransformStep::new(m_u32, q_u32)?);
            }
            q += 1u32;
        }
    }
    Err(SynthError::InfeasibleStep { t, cap: lambda_cap })
}

fn least_integer_above(r: &Rat) -> BigUint {
    if r.is_negative() {
        return BigUint::from(1u8);
    }
    let floor = r.numer() / r.denom();
    (floor + 1u8).to_biguint().expect("nonnegative")
}

/// Result of a synthesis run.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub schedule: Schedule,
    pub trace: Trace,
    pub bound: DistanceBound,
    /// Positions (state indices > 0) of the type-1 checkpoints.
    pub checkpoints: Vec<usize>,
}

/// Synthesize a schedule realizing the plan's types and the target
/// distance.
///
/// Each type-1 position `t` is a checkpoint with window exponent `t`; a
/// run of type-2 positions is entered through a window already tightened
/// to the exponent of the position where the run exits back to type 1, so
/// the envelope holds at every checkpoint. Intermediate run steps use
/// `(m, q) = (p_aux^2, p^2)` and the exit step `(p^2, p_aux^2)`.
///
/// A plan with `Phi(0) = 2` is realized by prepending one type-1 stage
/// internally and discarding it from the reported schedule and trace.
pub fn synthesize(params: &SynthParams, plan: &SwitchPlan) -> Result<Synthesis, SynthError> {
    params.validate()?;
    if plan.at(0) == 2 {
        let mut prefix = vec![1u8];
        prefix.extend(plan.prefix.iter().copied());
        let aug_plan = SwitchPlan {
            prefix,
            tail: plan.tail.clone(),
        };
        let aug_params = SynthParams {
            depth: params.depth + 1,
            ..params.clone()
        };
        let result = synthesize_from_type1(&aug_params, &aug_plan)?;
        return Ok(strip_first_stage(result, params));
    }
    synthesize_from_type1(params, plan)
}

fn synthesize_from_type1(params: &SynthParams, plan: &SwitchPlan) -> Result<Synthesis, SynthError> {
    let opts = EngineOptions::default();
    let seed = ExtensionState::seed(params.p, ExtType::T1, Rat::from_int(params.e as i64))?;
    let mut state = seed.clone();
    let mut steps: Vec<TransformStep> = Vec::new();
    let mut checkpoints = Vec::new();
    let mut envelope_min: Option<Rat> = None;

    let mut pos = 0usize;
    while pos < params.depth {
        let next = pos + 1;
        let step = match plan.at(next) {
            1 => {
                if plan.at(pos) != 1 {
                    // exit step of a type-2 run
                    let m = params.p * params.p;
                    let q = params.p_aux * params.p_aux;
                    TransformStep::new(m, q)?
                } else {
                    choose_step(
                        &state.jac_ratio,
                        &state.m_product,
                        &params.alpha,
                        1,
                        next,
                        params.p,
                        params.p_aux,
                        params.lambda_cap,
                    )?
                }
            }
            2 => {
                if plan.at(pos) == 1 {
                    // run entry: tighten the window to the run's exit index
                    let exit = plan.next_type1_after(pos);
                    choose_step(
                        &state.jac_ratio,
                        &state.m_product,
                        &params.alpha,
                        2,
                        exit,
                        params.p,
                        params.p_aux,
                        params.lambda_cap,
                    )?
                } else {
                    // intermediate run step
                    let m = params.p_aux * params.p_aux;
                    let q = params.p * params.p;
                    TransformStep::new(m, q)?
                }
            }
            _ => unreachable!("plan validated"),
        };
        let out = crate::engine::step_any(&state, &step, &opts)?;
        let realized = out.state.ext_type;
        let planned = plan.at(next);
        let matches = matches!((planned, realized), (1, ExtType::T1) | (2, ExtType::T2));
        if !matches {
            return Err(SynthError::PlanMismatch {
                position: next,
                planned,
                found: realized.to_string(),
            });
        }
        if realized == ExtType::T1 {
            checkpoints.push(next);
            let d = out.state.d_value();
            // envelope: alpha < d_t < alpha + 2^{-t}
            debug_assert!(d > params.alpha);
            debug_assert!(d < params.alpha.add(&Rat::pow2_neg(next as u32)));
            envelope_min = Some(match envelope_min {
                Some(m) => m.min(d),
                None => d,
            });
        }
        steps.push(step);
        state = out.state;
        pos = next;
    }

    let schedule = Schedule::finite(steps);
    let trace = run_schedule(&seed, &schedule, params.depth, &opts)?;
    let upper = trace
        .d_values
        .iter()
        .skip(1)
        .fold(trace.d_values[0].clone(), |acc, d| acc.min(d.clone()));
    // the envelope guarantees every future d stays above alpha
    let bound = DistanceBound {
        lower: params.alpha.clone(),
        upper,
        exact: false,
        flavor: Default::default(),
    };
    Ok(Synthesis {
        schedule,
        trace,
        bound,
        checkpoints,
    })
}

/// Drop the internally prepended type-1 stage. The replayed trace keeps
/// the augmented normalization (its seed state carries the first stage's
/// m-products), so the distance target and envelope stay as stated.
fn strip_first_stage(aug: Synthesis, params: &SynthParams) -> Synthesis {
    let opts = EngineOptions::default();
    let state1 = aug.trace.states[1].clone();
    let steps: Vec<TransformStep> = aug.schedule.prefix[1..].to_vec();
    let schedule = Schedule::finite(steps);
    let trace = run_schedule(&state1, &schedule, params.depth, &opts)
        .expect("replay of a validated schedule");
    let checkpoints = aug
        .checkpoints
        .iter()
        .filter(|&&c| c >= 2)
        .map(|&c| c - 1)
        .collect();
    let upper = trace
        .d_values
        .iter()
        .skip(1)
        .fold(trace.d_values[0].clone(), |acc, d| acc.min(d.clone()));
    let bound = DistanceBound {
        lower: params.alpha.clone(),
        upper,
        exact: false,
        flavor: Default::default(),
    };
    Synthesis {
        schedule,
        trace,
        bound,
        checkpoints,
    }
}

/// Check the envelope `alpha < d_t < alpha + 2^{-t}` at every recorded
/// type-1 checkpoint `t > 0`.
pub fn verify_envelope(trace: &Trace, checkpoints: &[usize], alpha: &Rat) -> bool {
    checkpoints.iter().all(|&t| {
        if t == 0 || t >= trace.d_values.len() {
            return false;
        }
        let d = &trace.d_values[t];
        *d > *alpha && *d < alpha.add(&Rat::pow2_neg(t as u32))
    })
}

/// Plan JSON per the external interface.
#[derive(Serialize, Deserialize)]
pub struct PlanJson {
    pub prefix: Vec<u8>,
    pub tail: Vec<u8>,
}

impl PlanJson {
    pub fn into_plan(self) -> Result<SwitchPlan, SynthError> {
        SwitchPlan::new(self.prefix, self.tail)
    }
}
