//! Integral curves of the Milnor field from the tube `‖f‖ = δ` to the sphere
//! `‖x‖ = ε`, and the tube-inflation equivalence report.
//!
//! The integrated field is `ŵ = w̃ · 2‖x‖/⟨w̃,∇ℌ⟩`, which has unit radial
//! speed, so a curve started at radius `r₀` reaches the sphere at time
//! `ε − r₀`. Integration uses the Dormand–Prince 5(4) pair with the
//! sphere crossing located by bisection on the last step.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discriminant::Exclusion;
use crate::error::{Error, Result};
use crate::linalg;
use crate::milnorfield::{map_name, milnor_vector};
use crate::polymap::PolynomialMap;
use crate::regularity::{dreg_scan, DregOpts, DregWitness, Verdict};
use crate::sampling::{self, streams, SamplerCfg};
use crate::scalar::Real;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOpts {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Accuracy of the located sphere crossing.
    pub event_tol: f64,
}

impl Default for FlowOpts {
    fn default() -> Self {
        FlowOpts {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 100_000,
            event_tol: 1e-10,
        }
    }
}

impl FlowOpts {
    /// Both tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        FlowOpts {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    TransversalityLost,
    DiscriminantProximity,
    FieldUndefined,
    NoConvergence,
    MonotonicityLost,
    RoundTrip,
}

impl std::fmt::Display for FailureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureKind::TransversalityLost => "transversality lost",
            FailureKind::DiscriminantProximity => "discriminant proximity",
            FailureKind::FieldUndefined => "field undefined",
            FailureKind::NoConvergence => "no convergence",
            FailureKind::MonotonicityLost => "monotonicity lost",
            FailureKind::RoundTrip => "round trip",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceFailure {
    pub kind: FailureKind,
    pub message: String,
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowStep {
    pub t: f64,
    pub x: Vec<f64>,
    pub r: f64,
    pub f_norm: f64,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrace {
    pub x0: Vec<f64>,
    /// Accepted steps, starting with `x0` at `t = 0`.
    pub steps: Vec<FlowStep>,
    /// Point on the target sphere, absent when the trace failed.
    pub end: Option<Vec<f64>>,
    /// `max ‖Φ(x) − Φ(x₀)‖` over accepted steps.
    pub phi_drift: f64,
    pub monotone_r: bool,
    pub monotone_h: bool,
    pub rejected: usize,
    pub case_histogram: BTreeMap<String, usize>,
    pub failure: Option<TraceFailure>,
}

impl FlowTrace {
    pub fn accepted(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }
}

enum EvalError {
    Failure(FailureKind, String),
}

struct Rhs<'a, T: Real> {
    map: &'a PolynomialMap<T>,
    tols: &'a Tolerances,
    exclusion: &'a Exclusion,
    sign: T,
}

impl<T: Real> Rhs<'_, T> {
    /// `±ŵ(x)` and the case label at `x`.
    fn eval(&self, x: &DVector<T>) -> std::result::Result<(DVector<T>, String), EvalError> {
        let jet = self
            .map
            .jet(x, None)
            .map_err(|e| EvalError::Failure(FailureKind::FieldUndefined, e.to_string()))?;
        if let Some(reason) = self.exclusion.excludes(&jet.fx) {
            return Err(EvalError::Failure(
                FailureKind::DiscriminantProximity,
                reason.to_string(),
            ));
        }
        let s = milnor_vector(&jet, self.tols)
            .map_err(|e| EvalError::Failure(FailureKind::FieldUndefined, e.to_string()))?;
        if !(s.ip_sphere > T::zero()) {
            return Err(EvalError::Failure(
                FailureKind::TransversalityLost,
                format!("<w,grad H> = {:e}", s.ip_sphere.to_f64_lossy()),
            ));
        }
        let w = &s.w_tilde * (T::c(2.0) * jet.x_norm / s.ip_sphere * self.sign);
        Ok((w, s.case.label.to_string()))
    }
}

// Dormand–Prince 5(4) tableau; the field is autonomous, so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// 5th-order minus embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Attempt<T: Real> {
    x: DVector<T>,
    k_last: DVector<T>,
    label: String,
    /// Scaled max-norm error estimate; the step is accepted when `≤ 1`.
    err: T,
}

/// One Dormand–Prince step. The last stage is evaluated at the 5th-order
/// solution, so its slope is reused as the next step's first stage.
fn dp_step<T: Real>(
    rhs: &Rhs<'_, T>,
    x: &DVector<T>,
    k1: &DVector<T>,
    h: T,
    opts: &FlowOpts,
) -> std::result::Result<Attempt<T>, EvalError> {
    let mut k: Vec<DVector<T>> = Vec::with_capacity(7);
    k.push(k1.clone());
    let mut y = x.clone();
    let mut label = String::new();
    for row in A.iter().skip(1) {
        y = x.clone();
        for (j, kj) in k.iter().enumerate() {
            if row[j] != 0.0 {
                y.axpy(h * T::c(row[j]), kj, T::one());
            }
        }
        let (ki, l) = rhs.eval(&y)?;
        k.push(ki);
        label = l;
    }
    let mut err_vec = DVector::zeros(x.len());
    for (j, kj) in k.iter().enumerate() {
        if E[j] != 0.0 {
            err_vec.axpy(h * T::c(E[j]), kj, T::one());
        }
    }
    let (atol, rtol) = (T::c(opts.atol), T::c(opts.rtol));
    let mut err = T::zero();
    for d in 0..x.len() {
        let sc = atol + rtol * x[d].abs().max(y[d].abs());
        let e = (err_vec[d] / sc).abs();
        if e > err {
            err = e;
        }
    }
    Ok(Attempt {
        x: y,
        k_last: k.pop().expect("seven stages"),
        label,
        err,
    })
}

fn phi_of<T: Real>(fx: &DVector<T>) -> DVector<T> {
    fx / fx.norm()
}

struct Integration<T: Real> {
    trace: FlowTrace,
    end: Option<DVector<T>>,
}

#[allow(clippy::too_many_arguments)]
fn integrate_to_radius<T: Real>(
    map: &PolynomialMap<T>,
    x0: &DVector<T>,
    target: T,
    forward: bool,
    opts: &FlowOpts,
    tols: &Tolerances,
    exclusion: &Exclusion,
) -> Integration<T> {
    let rhs = Rhs {
        map,
        tols,
        exclusion,
        sign: if forward { T::one() } else { -T::one() },
    };
    let f0 = map.eval(x0).expect("dimension checked");
    let phi0 = phi_of(&f0);
    let step_record = |t: T, x: &DVector<T>, fx: &DVector<T>| FlowStep {
        t: t.to_f64_lossy(),
        x: linalg::vec_f64(x),
        r: x.norm().to_f64_lossy(),
        f_norm: fx.norm().to_f64_lossy(),
        phi: linalg::vec_f64(&phi_of(fx)),
    };
    let mut trace = FlowTrace {
        x0: linalg::vec_f64(x0),
        steps: vec![step_record(T::zero(), x0, &f0)],
        end: None,
        phi_drift: 0.0,
        monotone_r: true,
        monotone_h: true,
        rejected: 0,
        case_histogram: BTreeMap::new(),
        failure: None,
    };
    let fail = |trace: &mut FlowTrace, kind: FailureKind, message: String, t: T, x: &DVector<T>| {
        trace.failure = Some(TraceFailure {
            kind,
            message,
            t: t.to_f64_lossy(),
            x: linalg::vec_f64(x),
        });
    };
    // Signed distance to the target sphere, positive once crossed.
    let gap = |x: &DVector<T>| {
        if forward {
            x.norm() - target
        } else {
            target - x.norm()
        }
    };

    let mut x = x0.clone();
    let mut t = T::zero();
    let mut k1 = match rhs.eval(&x) {
        Ok((k, label)) => {
            *trace.case_histogram.entry(label).or_default() += 1;
            k
        }
        Err(EvalError::Failure(kind, msg)) => {
            fail(&mut trace, kind, msg, t, &x);
            return Integration { trace, end: None };
        }
    };
    let distance = -gap(&x);
    if distance <= T::zero() {
        trace.end = Some(linalg::vec_f64(&x));
        return Integration {
            trace,
            end: Some(x),
        };
    }
    let mut h = distance * T::c(0.01);
    let h_min = distance * T::c(1e-14);
    let mut last_r = x.norm();
    let mut last_h = f0.norm();
    let mut last_error = (
        FailureKind::NoConvergence,
        String::from("step limit reached"),
    );
    let mut steps = 0;

    while steps < opts.max_steps {
        steps += 1;
        let attempt = match dp_step(&rhs, &x, &k1, h, opts) {
            Ok(a) if a.err <= T::one() => a,
            Ok(a) => {
                trace.rejected += 1;
                let factor = (T::c(0.9) * a.err.powf(T::c(-0.2))).clamp(T::c(0.2), T::one());
                h *= factor;
                if h < h_min {
                    fail(
                        &mut trace,
                        FailureKind::NoConvergence,
                        "step size underflow".into(),
                        t,
                        &x,
                    );
                    return Integration { trace, end: None };
                }
                continue;
            }
            Err(EvalError::Failure(kind, msg)) => {
                trace.rejected += 1;
                last_error = (kind, msg);
                h *= T::c(0.25);
                if h < h_min {
                    fail(&mut trace, last_error.0, last_error.1, t, &x);
                    return Integration { trace, end: None };
                }
                continue;
            }
        };

        let (mut x_new, mut k_new, mut label, mut t_new) =
            (attempt.x, attempt.k_last, attempt.label, t + h);
        let crossed = gap(&x_new) >= T::zero();
        if crossed {
            // Bisection on the step length for the sphere crossing.
            let (mut lo, mut hi) = (T::zero(), h);
            let tol = T::c(opts.event_tol);
            let mut located = false;
            for _ in 0..200 {
                let mid = (lo + hi) * T::c(0.5);
                match dp_step(&rhs, &x, &k1, mid, opts) {
                    Ok(a) => {
                        let g = gap(&a.x);
                        if g.abs() <= tol {
                            x_new = a.x;
                            k_new = a.k_last;
                            label = a.label;
                            t_new = t + mid;
                            located = true;
                            break;
                        }
                        if g > T::zero() {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    Err(_) => hi = mid,
                }
            }
            if !located {
                fail(
                    &mut trace,
                    FailureKind::NoConvergence,
                    "sphere crossing not located".into(),
                    t,
                    &x,
                );
                return Integration { trace, end: None };
            }
        }

        let fx = map.eval(&x_new).expect("dimension checked");
        if exclusion.excludes(&fx).is_some() {
            fail(
                &mut trace,
                FailureKind::DiscriminantProximity,
                "entered the exclusion zone".into(),
                t_new,
                &x_new,
            );
            return Integration { trace, end: None };
        }
        let r = x_new.norm();
        let hn = fx.norm();
        let (r_up, h_up) = if forward {
            (r > last_r, hn > last_h)
        } else {
            (r < last_r, hn < last_h)
        };
        trace.monotone_r &= r_up;
        trace.monotone_h &= h_up;
        last_r = r;
        last_h = hn;
        let drift = (phi_of(&fx) - &phi0).norm().to_f64_lossy();
        if drift > trace.phi_drift || drift.is_nan() {
            trace.phi_drift = drift;
        }
        *trace.case_histogram.entry(label).or_default() += 1;
        trace.steps.push(step_record(t_new, &x_new, &fx));
        x = x_new;
        k1 = k_new;
        t = t_new;
        if crossed {
            trace.end = Some(linalg::vec_f64(&x));
            return Integration {
                trace,
                end: Some(x),
            };
        }
        let factor =
            (T::c(0.9) * attempt.err.max(T::c(1e-10)).powf(T::c(-0.2))).clamp(T::c(0.2), T::c(5.0));
        h *= factor;
    }
    fail(&mut trace, last_error.0, last_error.1, t, &x);
    Integration { trace, end: None }
}

/// Follows `ŵ` from `x0` to the sphere `‖x‖ = ε`.
///
/// Errors are reserved for bad input; integration problems are recorded as
/// the trace's `failure`.
pub fn integrate<T: Real>(
    map: &PolynomialMap<T>,
    x0: &DVector<T>,
    epsilon: T,
    opts: &FlowOpts,
    tols: &Tolerances,
    exclusion: &Exclusion,
) -> Result<FlowTrace> {
    if x0.len() != map.n() {
        return Err(Error::DimensionMismatch {
            expected: map.n(),
            found: x0.len(),
        });
    }
    if !(x0.norm() < epsilon) {
        return Err(Error::input(
            "x0",
            "seed must lie strictly inside the sphere",
        ));
    }
    map.jet(x0, None)?;
    Ok(integrate_to_radius(map, x0, epsilon, true, opts, tols, exclusion).trace)
}

/// Integrates `−ŵ` from `end` down to radius `‖x0‖` and returns
/// `‖x_back − x0‖`, or `None` when the backward curve fails.
pub fn round_trip_error<T: Real>(
    map: &PolynomialMap<T>,
    x0: &DVector<T>,
    end: &DVector<T>,
    opts: &FlowOpts,
    tols: &Tolerances,
    exclusion: &Exclusion,
) -> Option<f64> {
    let back = integrate_to_radius(map, end, x0.norm(), false, opts, tols, exclusion);
    back.end.map(|xb| (xb - x0).norm().to_f64_lossy())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedCfg {
    pub count: usize,
    pub seed: u64,
    /// Attempts are capped at `count · max_attempt_factor`.
    pub max_attempt_factor: usize,
}

impl Default for SeedCfg {
    fn default() -> Self {
        SeedCfg {
            count: 100,
            seed: 0,
            max_attempt_factor: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflateOpts {
    pub flow: FlowOpts,
    pub exclusion: Exclusion,
    pub dreg: DregOpts,
    /// Sampler of the d-regularity pre-check.
    pub dreg_sampler: SamplerCfg,
    pub drift_tolerance: f64,
    /// Relative to `ε`.
    pub round_trip_tolerance: f64,
    /// Re-run every trace at 10× tighter integrator tolerances.
    pub refine: bool,
}

impl Default for InflateOpts {
    fn default() -> Self {
        InflateOpts {
            flow: FlowOpts::default(),
            exclusion: Exclusion::default(),
            dreg: DregOpts::default(),
            dreg_sampler: SamplerCfg::default(),
            drift_tolerance: 1e-5,
            round_trip_tolerance: 1e-6,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EquivalenceVerdict {
    Pass,
    Fail,
    Refused,
}

impl std::fmt::Display for EquivalenceVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EquivalenceVerdict::Pass => "pass",
            EquivalenceVerdict::Fail => "fail",
            EquivalenceVerdict::Refused => "refused",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub seed_index: usize,
    pub x0: Vec<f64>,
    pub end: Option<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
    pub phi_drift: f64,
    pub monotone_r: bool,
    pub monotone_h: bool,
    pub round_trip_error: Option<f64>,
    pub case_histogram: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceFailureRecord {
    pub seed_index: usize,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineCheck {
    pub rtol: f64,
    pub atol: f64,
    pub max_drift_default: f64,
    pub max_drift_tight: f64,
    /// Below this, both drifts count as roundoff and the check holds.
    pub roundoff_floor: f64,
    pub reduced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub map: String,
    pub epsilon: f64,
    pub delta: f64,
    pub verdict: EquivalenceVerdict,
    pub regularity_verdict: Verdict,
    pub regularity_adversarial_min: f64,
    pub refusal_witness: Option<DregWitness>,
    pub seeds_requested: usize,
    pub seed_attempts: usize,
    pub seed_failures: usize,
    pub max_phi_drift: f64,
    pub max_round_trip_error: f64,
    pub drift_tolerance: f64,
    pub round_trip_tolerance: f64,
    pub traces: Vec<TraceSummary>,
    pub failures: Vec<TraceFailureRecord>,
    pub refine: Option<RefineCheck>,
    /// Full step records, in seed order.
    #[serde(skip)]
    pub full_traces: Vec<FlowTrace>,
}

/// Projection of `x` onto `‖f‖ = δ` along its own ray: safeguarded Newton
/// on `t ↦ ‖f(t·x/‖x‖)‖ − δ`, bracketed in `(0, ‖x‖]` when `‖f(x)‖ ≥ δ` and in
/// `[‖x‖, ε)` otherwise.
fn project_to_tube<T: Real>(
    map: &PolynomialMap<T>,
    x: DVector<T>,
    delta: T,
    epsilon: T,
) -> Option<DVector<T>> {
    let r = x.norm();
    if r == T::zero() {
        return None;
    }
    let dir = &x / r;
    let g = |t: T| -> Option<(T, T)> {
        let y = &dir * t;
        let fy = map.eval(&y).ok()?;
        let fnorm = fy.norm();
        let slope = if fnorm > T::zero() {
            fy.dot(&(map.jacobian(&y).ok()? * &dir)) / fnorm
        } else {
            T::zero()
        };
        Some((fnorm - delta, slope))
    };
    let (mut lo, mut hi) = if g(r)?.0 >= T::zero() {
        (T::zero(), r)
    } else {
        let top = epsilon * T::c(1.0 - 1e-6);
        if !(top > r) || g(top)?.0 < T::zero() {
            return None;
        }
        (r, top)
    };
    let mut t = hi;
    for _ in 0..200 {
        let (value, slope) = g(t)?;
        if value.abs() <= T::c(1e-13) * (T::one() + delta) {
            return Some(&dir * t);
        }
        if value < T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - value / slope;
        t = if slope != T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::c(0.5)
        };
    }
    None
}

fn tube_seed<T: Real>(
    map: &PolynomialMap<T>,
    epsilon: f64,
    delta: f64,
    seeds: &SeedCfg,
    index: usize,
    tols: &Tolerances,
    exclusion: &Exclusion,
) -> Option<DVector<T>> {
    let mut rng = sampling::stream_rng(seeds.seed, streams::TUBE_SEEDS, index as u64);
    let start = sampling::ball_point(&mut rng, map.n(), epsilon);
    let x = project_to_tube(
        map,
        linalg::from_f64_slice::<T>(start.as_slice()),
        T::c(delta),
        T::c(epsilon),
    )?;
    if !(x.norm().to_f64_lossy() < epsilon * (1.0 - 1e-6)) {
        return None;
    }
    let jet = map.jet(&x, None).ok()?;
    if exclusion.excludes(&jet.fx).is_some() {
        return None;
    }
    let s = milnor_vector(&jet, tols).ok()?;
    s.valid.then_some(x)
}

/// Attempt index and tube point.
type IndexedSeed<T> = (usize, DVector<T>);

/// Tube seeds in attempt order: the first `count` successes and the number of
/// attempts used.
fn generate_seeds<T: Real>(
    map: &PolynomialMap<T>,
    epsilon: f64,
    delta: f64,
    seeds: &SeedCfg,
    tols: &Tolerances,
    exclusion: &Exclusion,
) -> Result<(Vec<IndexedSeed<T>>, usize)> {
    let max_attempts = seeds.count * seeds.max_attempt_factor.max(2);
    let mut found = Vec::with_capacity(seeds.count);
    let mut attempts = 0;
    let mut next = 0;
    let batch = (2 * seeds.count).max(1);
    while found.len() < seeds.count && next < max_attempts {
        let end = (next + batch).min(max_attempts);
        let results: Vec<Option<DVector<T>>> = (next..end)
            .into_par_iter()
            .map(|i| tube_seed(map, epsilon, delta, seeds, i, tols, exclusion))
            .collect();
        for (i, r) in (next..end).zip(results) {
            if found.len() == seeds.count {
                break;
            }
            attempts = i + 1;
            if let Some(x) = r {
                found.push((i, x));
            }
        }
        next = end;
    }
    let failures = attempts - found.len();
    if found.len() < seeds.count || 2 * failures > attempts {
        return Err(Error::TubeUnreachable { failures, attempts });
    }
    Ok((found, attempts))
}

fn run_traces<T: Real>(
    map: &PolynomialMap<T>,
    seeds: &[IndexedSeed<T>],
    epsilon: f64,
    opts: &FlowOpts,
    tols: &Tolerances,
    exclusion: &Exclusion,
    round_trip: bool,
) -> Vec<(FlowTrace, Option<f64>)> {
    let eps = T::c(epsilon);
    seeds
        .par_iter()
        .map(|(_, x0)| {
            let run = integrate_to_radius(map, x0, eps, true, opts, tols, exclusion);
            let rt = match (&run.end, round_trip) {
                (Some(end), true) => round_trip_error(map, x0, end, opts, tols, exclusion),
                _ => None,
            };
            (run.trace, rt)
        })
        .collect()
}

/// Tube-to-sphere inflation along `ŵ` with the equivalence verdict.
///
/// Refuses (verdict `refused`) unless the d-regularity scan at `ε` passes.
/// A trace fails when integration fails, when `‖x‖` or `‖f‖` is not strictly
/// increasing, or when the backward curve misses the seed by more than
/// `round_trip_tolerance · ε`. The verdict is pass iff no trace fails and the
/// largest `Φ` drift is below `drift_tolerance`.
pub fn inflate_tube<T: Real>(
    map: &PolynomialMap<T>,
    epsilon: f64,
    delta: f64,
    seeds: &SeedCfg,
    opts: &InflateOpts,
    tols: &Tolerances,
) -> Result<EquivalenceReport> {
    if !(epsilon > 0.0) {
        return Err(Error::input("epsilon", "epsilon must be positive"));
    }
    if !(delta > 0.0 && delta <= epsilon / 10.0) {
        return Err(Error::input(
            "delta",
            format!("need 0 < delta <= epsilon/10, got delta = {delta}"),
        ));
    }
    if seeds.count == 0 {
        return Err(Error::input("seeds.count", "at least one seed is required"));
    }
    let dreg_opts = DregOpts {
        exclusion: opts.exclusion.clone(),
        ..opts.dreg.clone()
    };
    let regularity = dreg_scan(map, epsilon, &opts.dreg_sampler, &dreg_opts)?;
    let mut report = EquivalenceReport {
        map: map_name(map),
        epsilon,
        delta,
        verdict: EquivalenceVerdict::Refused,
        regularity_verdict: regularity.verdict,
        regularity_adversarial_min: regularity.adversarial_min,
        refusal_witness: None,
        seeds_requested: seeds.count,
        seed_attempts: 0,
        seed_failures: 0,
        max_phi_drift: 0.0,
        max_round_trip_error: 0.0,
        drift_tolerance: opts.drift_tolerance,
        round_trip_tolerance: opts.round_trip_tolerance,
        traces: Vec::new(),
        failures: Vec::new(),
        refine: None,
        full_traces: Vec::new(),
    };
    if regularity.verdict != Verdict::Pass {
        report.refusal_witness = regularity.worst_witness().cloned();
        return Ok(report);
    }

    let (seed_points, attempts) =
        generate_seeds(map, epsilon, delta, seeds, tols, &opts.exclusion)?;
    report.seed_attempts = attempts;
    report.seed_failures = attempts - seed_points.len();
    let runs = run_traces(
        map,
        &seed_points,
        epsilon,
        &opts.flow,
        tols,
        &opts.exclusion,
        true,
    );
    let rt_limit = opts.round_trip_tolerance * epsilon;
    for ((index, _), (trace, rt)) in seed_points.iter().zip(&runs) {
        let failure = if let Some(f) = &trace.failure {
            Some((f.kind, f.message.clone()))
        } else if !trace.monotone_r || !trace.monotone_h {
            Some((
                FailureKind::MonotonicityLost,
                format!(
                    "monotone_r = {}, monotone_h = {}",
                    trace.monotone_r, trace.monotone_h
                ),
            ))
        } else {
            match rt {
                None => Some((FailureKind::RoundTrip, "backward curve failed".into())),
                Some(e) if !(*e < rt_limit) => {
                    Some((FailureKind::RoundTrip, format!("round-trip error {e:e}")))
                }
                Some(_) => None,
            }
        };
        if let Some((kind, message)) = failure {
            report.failures.push(TraceFailureRecord {
                seed_index: *index,
                kind,
                message,
            });
        }
        report.max_phi_drift = report.max_phi_drift.max(trace.phi_drift);
        if let Some(e) = rt {
            report.max_round_trip_error = report.max_round_trip_error.max(*e);
        }
        report.traces.push(TraceSummary {
            seed_index: *index,
            x0: trace.x0.clone(),
            end: trace.end.clone(),
            accepted: trace.accepted(),
            rejected: trace.rejected,
            phi_drift: trace.phi_drift,
            monotone_r: trace.monotone_r,
            monotone_h: trace.monotone_h,
            round_trip_error: *rt,
            case_histogram: trace.case_histogram.clone(),
        });
    }
    if opts.refine {
        let tight = opts.flow.tightened(10.0);
        let refined = run_traces(
            map,
            &seed_points,
            epsilon,
            &tight,
            tols,
            &opts.exclusion,
            false,
        );
        let max_drift_tight = refined.iter().map(|(t, _)| t.phi_drift).fold(0.0, f64::max);
        let roundoff_floor = 1e-12;
        report.refine = Some(RefineCheck {
            rtol: tight.rtol,
            atol: tight.atol,
            max_drift_default: report.max_phi_drift,
            max_drift_tight,
            roundoff_floor,
            reduced: max_drift_tight < report.max_phi_drift
                || (max_drift_tight <= roundoff_floor && report.max_phi_drift <= roundoff_floor),
        });
    }
    report.full_traces = runs.into_iter().map(|(t, _)| t).collect();
    report.verdict = if report.failures.is_empty() && report.max_phi_drift < opts.drift_tolerance {
        EquivalenceVerdict::Pass
    } else {
        EquivalenceVerdict::Fail
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn run(map: &PolynomialMap<f64>, x0: &[f64], eps: f64) -> FlowTrace {
        integrate(
            map,
            &v(x0),
            eps,
            &FlowOpts::default(),
            &Tolerances::default(),
            &Exclusion::default(),
        )
        .unwrap()
    }

    #[test]
    fn square_flow_is_radial() {
        let f = catalog::square::<f64>();
        let tr = run(&f, &[0.5, 0.0], 1.0);
        assert!(tr.failure.is_none());
        let end = tr.end.unwrap();
        assert_relative_eq!(end[0], 1.0, epsilon = 1e-9);
        assert!(end[1].abs() < 1e-12);
        assert_eq!(tr.phi_drift, 0.0);
        assert!(tr.monotone_r && tr.monotone_h);
        assert_relative_eq!(tr.steps.last().unwrap().t, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn identity_flow_ends_on_the_seed_direction() {
        let f = catalog::identity_2::<f64>();
        let u = v(&[0.6, -0.8]);
        let tr = run(&f, (&u * 0.3).as_slice(), 1.0);
        let end = v(&tr.end.unwrap());
        assert_relative_eq!(end, u, epsilon = 1e-9);
        assert!(tr.phi_drift < 1e-15);
    }

    #[test]
    fn quadrics_trace_keeps_phi() {
        let f = catalog::quadrics_3_2::<f64>();
        let x0 = project_to_tube(&f, v(&[0.1, 0.05, 0.02]), 0.005, 0.5).unwrap();
        let tr = run(&f, x0.as_slice(), 0.5);
        assert!(tr.failure.is_none(), "{:?}", tr.failure);
        assert!(tr.phi_drift < 1e-5);
        assert!(tr.monotone_r && tr.monotone_h);
        let end = v(tr.end.as_ref().unwrap());
        assert!((end.norm() - 0.5).abs() < 1e-7 * 0.5);
        let rt = round_trip_error(
            &f,
            &x0,
            &end,
            &FlowOpts::default(),
            &Tolerances::default(),
            &Exclusion::default(),
        );
        assert!(rt.unwrap() < 1e-6 * 0.5);
    }

    #[test]
    fn traces_are_bitwise_repeatable() {
        let f = catalog::quadrics_3_2::<f64>();
        let x0 = project_to_tube(&f, v(&[0.2, -0.1, 0.05]), 0.005, 0.5).unwrap();
        assert_eq!(run(&f, x0.as_slice(), 0.5), run(&f, x0.as_slice(), 0.5));
    }

    #[test]
    fn seed_outside_sphere_is_rejected() {
        let f = catalog::square::<f64>();
        let r = integrate(
            &f,
            &v(&[2.0, 0.0]),
            1.0,
            &FlowOpts::default(),
            &Tolerances::default(),
            &Exclusion::default(),
        );
        assert!(matches!(r, Err(Error::Input { .. })));
    }

    #[test]
    fn delta_must_be_small() {
        let f = catalog::square::<f64>();
        let r = inflate_tube(
            &f,
            1.0,
            0.5,
            &SeedCfg::default(),
            &InflateOpts::default(),
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(Error::Input { .. })));
    }

    #[test]
    fn tube_projection_hits_delta() {
        let f = catalog::quadrics_3_2::<f64>();
        let x = project_to_tube(&f, v(&[0.3, 0.2, 0.1]), 0.005, 0.5).unwrap();
        assert_relative_eq!(f.eval(&x).unwrap().norm(), 0.005, epsilon = 1e-12);
    }

    #[test]
    fn small_square_inflation_passes() {
        let f = catalog::square::<f64>();
        let opts = InflateOpts {
            dreg_sampler: SamplerCfg {
                samples: 500,
                restarts: 4,
                ..SamplerCfg::default()
            },
            ..InflateOpts::default()
        };
        let seeds = SeedCfg {
            count: 10,
            ..SeedCfg::default()
        };
        let r = inflate_tube(&f, 1.0, 0.05, &seeds, &opts, &Tolerances::default()).unwrap();
        assert_eq!(r.verdict, EquivalenceVerdict::Pass, "{:?}", r.failures);
        assert_eq!(r.traces.len(), 10);
        assert!(r.refine.unwrap().reduced);
    }
}
