//! Deterministic adaptive integration of ODE systems with dense output and
//! zero-crossing event detection.
//!
//! The stepper is Verner's embedded 6(5) Runge-Kutta pair with a 5th-order
//! continuous extension, used uniformly for the nonlinear flows and the
//! time-periodic variational systems in this crate. Complex-valued systems
//! are integrated by the same scheme applied componentwise to real and
//! imaginary parts (the caller packs the state).
//!
//! All entry points are pure with respect to their inputs: two runs with
//! identical inputs produce bitwise-identical output.

mod tableau;

use thiserror::Error;

pub use tableau::{DENSE_STAGES, ORDER, STAGES};
use tableau::{A, A_DENSE, B_DENSE, B_HIGH, B_LOW, C, C_DENSE};

/// Tolerances and step-size limits for the adaptive integrator.
#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    /// Relative tolerance on the per-step local error.
    pub rel_tol: f64,
    /// Absolute tolerance on the per-step local error.
    pub abs_tol: f64,
    /// Upper bound on the step size.
    pub max_step: f64,
    /// Initial step size; 0 selects an automatic estimate.
    pub initial_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        // Multipliers must be resolved near |mu| = 1 to ~1e-4 and the
        // monodromy compounds local error over one period, hence the
        // tight defaults.
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: f64::INFINITY,
            initial_step: 0.0,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tols(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(OdeError::InvalidConfig(
                "rel_tol and abs_tol must be positive".into(),
            ));
        }
        if !(self.max_step > 0.0) {
            return Err(OdeError::InvalidConfig("max_step must be positive".into()));
        }
        if self.initial_step < 0.0 || !self.initial_step.is_finite() && self.initial_step != 0.0 {
            return Err(OdeError::InvalidConfig(
                "initial_step must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OdeError {
    /// The controller drove the step below the representable floor,
    /// which signals stiffness or a finite-time blow-up.
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    /// NaN or infinity in the state; signals divergence.
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("exceeded {max} accepted steps at t = {t}")]
    TooManySteps { t: f64, max: usize },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
}

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 6.0;
const MAX_ACCEPTED_STEPS: usize = 50_000_000;
const EVENT_VALUE_TOL: f64 = 1e-12;

/// Interpolation weights of the continuous extension at normalized
/// position `s` within a step.
fn dense_weights(s: f64) -> [f64; DENSE_STAGES] {
    let mut w = [0.0; DENSE_STAGES];
    for (wi, row) in w.iter_mut().zip(B_DENSE.iter()) {
        let mut acc = row[ORDER - 1];
        for j in (0..ORDER - 1).rev() {
            acc = acc * s + row[j];
        }
        *wi = acc * s;
    }
    w
}

/// One accepted step together with everything needed to evaluate the
/// solution anywhere inside it.
#[derive(Clone, Debug)]
pub struct DenseStep {
    t0: f64,
    h: f64,
    y0: Vec<f64>,
    /// Stage derivatives, flattened stage-major: k[i * n + j].
    k: Vec<f64>,
}

impl DenseStep {
    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }

    /// Evaluate the interpolant at `t` (expected inside the step).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let n = self.y0.len();
        let s = (t - self.t0) / self.h;
        let w = dense_weights(s);
        out.copy_from_slice(&self.y0);
        for (i, wi) in w.iter().enumerate() {
            let scale = self.h * wi;
            let ki = &self.k[i * n..(i + 1) * n];
            for (o, kij) in out.iter_mut().zip(ki) {
                *o += scale * kij;
            }
        }
    }
}

/// Result of an integration: accepted mesh points, states, and per-step
/// interpolants for evaluation at arbitrary interior times.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    steps: Vec<DenseStep>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    fn direction(&self) -> f64 {
        (self.t_end() - self.t_start()).signum()
    }

    /// Index of the step containing `t` (after clamping to the span).
    fn step_index(&self, t: f64) -> usize {
        let dir = self.direction();
        let idx = self
            .steps
            .partition_point(|s| (s.t_end() - t) * dir < 0.0);
        idx.min(self.steps.len() - 1)
    }

    /// Evaluate the dense interpolant at `t`, clamped to the integration span.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let dir = self.direction();
        let t = if (t - self.t_start()) * dir < 0.0 {
            self.t_start()
        } else if (t - self.t_end()) * dir > 0.0 {
            self.t_end()
        } else {
            t
        };
        self.steps[self.step_index(t)].eval(t, out);
    }

    pub fn eval_vec(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(t, &mut out);
        out
    }

    /// Cursor for repeated dense evaluation at slowly varying times.
    pub fn cursor(&self) -> TrajCursor<'_> {
        TrajCursor { traj: self, idx: 0 }
    }

    /// Integral of a scalar functional of (t, y) along the trajectory,
    /// by 5-point Gauss-Legendre quadrature on each step.
    pub fn integral_of<F: FnMut(f64, &[f64]) -> f64>(&self, mut f: F) -> f64 {
        const NODES: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683_1,
            0.0,
            0.538_469_310_105_683_1,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.236_926_885_056_189_08,
            0.478_628_670_499_366_47,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
        ];
        let mut buf = vec![0.0; self.dim()];
        let mut total = 0.0;
        for step in &self.steps {
            let half = 0.5 * step.h;
            let mid = step.t0 + half;
            let mut acc = 0.0;
            for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
                let t = mid + half * x;
                step.eval(t, &mut buf);
                acc += w * f(t, &buf);
            }
            total += acc * half;
        }
        total
    }
}

/// Dense evaluator that remembers the last step index; lookup cost is O(1)
/// when consecutive query times fall in the same or a neighboring step.
pub struct TrajCursor<'a> {
    traj: &'a Trajectory,
    idx: usize,
}

impl TrajCursor<'_> {
    pub fn eval(&mut self, t: f64, out: &mut [f64]) {
        let steps = &self.traj.steps;
        let dir = self.traj.direction();
        let t = {
            let (a, b) = (self.traj.t_start(), self.traj.t_end());
            if (t - a) * dir < 0.0 {
                a
            } else if (t - b) * dir > 0.0 {
                b
            } else {
                t
            }
        };
        let inside = |i: usize| -> bool {
            let s = &steps[i];
            (t - s.t0) * dir >= 0.0 && (t - s.t_end()) * dir <= 0.0
        };
        if !inside(self.idx) {
            // Walk to a neighbor first, fall back to binary search.
            if self.idx + 1 < steps.len() && inside(self.idx + 1) {
                self.idx += 1;
            } else if self.idx > 0 && inside(self.idx - 1) {
                self.idx -= 1;
            } else {
                self.idx = self.traj.step_index(t);
            }
        }
        steps[self.idx].eval(t, out);
    }
}

/// Borrowed view of the step just accepted by the driver loop.
struct StepView<'a> {
    t0: f64,
    h: f64,
    /// Step end time, snapped to the span endpoint on the final step.
    t1: f64,
    y0: &'a [f64],
    k: &'a [f64],
    y1: &'a [f64],
}

impl StepView<'_> {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let n = self.y0.len();
        let s = (t - self.t0) / self.h;
        let w = dense_weights(s);
        out.copy_from_slice(self.y0);
        for (i, wi) in w.iter().enumerate() {
            let scale = self.h * wi;
            let ki = &self.k[i * n..(i + 1) * n];
            for (o, kij) in out.iter_mut().zip(ki) {
                *o += scale * kij;
            }
        }
    }

    fn to_dense(&self) -> DenseStep {
        DenseStep {
            t0: self.t0,
            h: self.h,
            y0: self.y0.to_vec(),
            k: self.k.to_vec(),
        }
    }
}

trait StepSink {
    /// Called once per accepted step; return false to stop the integration.
    fn on_step(&mut self, view: &StepView<'_>) -> bool;
}

/// Automatic initial step selection (two extra derivative evaluations).
fn initial_step_estimate<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    span: f64,
    cfg: &IntegratorConfig,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let scale: Vec<f64> = y0
        .iter()
        .map(|y| cfg.abs_tol + cfg.rel_tol * y.abs())
        .collect();
    let rms = |v: &[f64]| -> f64 {
        let s: f64 = v
            .iter()
            .zip(&scale)
            .map(|(x, sc)| (x / sc) * (x / sc))
            .sum();
        (s / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span.abs()).min(cfg.max_step);

    let y1: Vec<f64> = y0
        .iter()
        .zip(f0)
        .map(|(y, f)| y + dir * h0 * f)
        .collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + dir * h0, &y1, &mut f1);
    let df: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&df) / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / ORDER as f64)
    };
    (100.0 * h0).min(h1).min(span.abs()).min(cfg.max_step)
}

/// Core driver: adaptive stepping from t0 to t1 feeding each accepted step
/// to `sink`. Returns the final (t, y).
fn drive<F, S>(
    mut rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    cfg: &IntegratorConfig,
    sink: &mut S,
) -> Result<(f64, Vec<f64>), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: StepSink,
{
    cfg.validate()?;
    let [t0, t1] = t_span;
    if !t0.is_finite() || !t1.is_finite() || t1 == t0 {
        return Err(OdeError::InvalidSpan { t0, t1 });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteState { t: t0 });
    }

    let n = y0.len();
    let dir = (t1 - t0).signum();
    let span = t1 - t0;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![0.0; DENSE_STAGES * n];
    let mut y_stage = vec![0.0; n];
    let mut y_high = vec![0.0; n];
    let mut stage_out = vec![0.0; n];

    rhs(t, &y, &mut stage_out);
    k[..n].copy_from_slice(&stage_out);

    let mut h = if cfg.initial_step > 0.0 {
        cfg.initial_step.min(span.abs()).min(cfg.max_step)
    } else {
        let f0 = k[..n].to_vec();
        initial_step_estimate(&mut rhs, t, &y, &f0, dir, span, cfg)
    };

    let mut accepted: usize = 0;
    let mut rejected_last;

    loop {
        if (t1 - t) * dir <= 0.0 {
            return Ok((t, y));
        }
        // A remaining sliver at rounding width counts as arrival.
        if (t1 - t).abs() <= 16.0 * f64::EPSILON * t1.abs().max(1.0) {
            return Ok((t1, y));
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(OdeError::StepSizeUnderflow { t });
        }
        // Land exactly on the endpoint.
        let mut last = false;
        if (t + dir * h - t1) * dir >= 0.0 {
            h = (t1 - t).abs();
            last = true;
        }

        let hs = dir * h;

        // Stages 1..=7 (stage 0 is the stored derivative at t).
        for i in 1..STAGES - 1 {
            y_stage.copy_from_slice(&y);
            for j in 0..i {
                let a = A[i][j];
                if a != 0.0 {
                    let kj = &k[j * n..(j + 1) * n];
                    for (ys, kv) in y_stage.iter_mut().zip(kj) {
                        *ys += hs * a * kv;
                    }
                }
            }
            rhs(t + C[i] * hs, &y_stage, &mut stage_out);
            k[i * n..(i + 1) * n].copy_from_slice(&stage_out);
        }

        // 6th-order solution (B_HIGH[8] = 0, so stage 8 is not needed yet).
        y_high.copy_from_slice(&y);
        for i in 0..STAGES {
            let b = B_HIGH[i];
            if b != 0.0 {
                let ki = &k[i * n..(i + 1) * n];
                for (yh, kv) in y_high.iter_mut().zip(ki) {
                    *yh += hs * b * kv;
                }
            }
        }

        // Stage 8 is the derivative at the proposed endpoint (FSAL).
        rhs(t + hs, &y_high, &mut stage_out);
        k[(STAGES - 1) * n..STAGES * n].copy_from_slice(&stage_out);

        // Scaled error norm from the embedded 5th-order weights.
        let mut err_norm: f64 = 0.0;
        for j in 0..n {
            let mut e = 0.0;
            for i in 0..STAGES {
                let db = B_HIGH[i] - B_LOW[i];
                if db != 0.0 {
                    e += db * k[i * n + j];
                }
            }
            e *= hs;
            let sc = cfg.abs_tol + cfg.rel_tol * y[j].abs().max(y_high[j].abs());
            err_norm = err_norm.max((e / sc).abs());
        }

        if err_norm <= 1.0 {
            if y_high.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFiniteState { t: t + hs });
            }

            // Extra stage for the 5th-order interpolant (A_DENSE[9] = 0).
            y_stage.copy_from_slice(&y);
            for (j, a) in A_DENSE.iter().enumerate() {
                if *a != 0.0 {
                    let kj = &k[j * n..(j + 1) * n];
                    for (ys, kv) in y_stage.iter_mut().zip(kj) {
                        *ys += hs * a * kv;
                    }
                }
            }
            rhs(t + C_DENSE * hs, &y_stage, &mut stage_out);
            k[(DENSE_STAGES - 1) * n..DENSE_STAGES * n].copy_from_slice(&stage_out);

            let t_new = if last { t1 } else { t + hs };
            let keep_going = sink.on_step(&StepView {
                t0: t,
                h: hs,
                t1: t_new,
                y0: &y,
                k: &k,
                y1: &y_high,
            });

            // FSAL: stage 8 is the derivative at the accepted point.
            k.copy_within((STAGES - 1) * n..STAGES * n, 0);

            t = t_new;
            std::mem::swap(&mut y, &mut y_high);
            accepted += 1;
            rejected_last = false;

            if !keep_going {
                return Ok((t, y));
            }
            if accepted >= MAX_ACCEPTED_STEPS {
                return Err(OdeError::TooManySteps {
                    t,
                    max: MAX_ACCEPTED_STEPS,
                });
            }
        } else {
            rejected_last = true;
        }

        let mut factor = if err_norm == 0.0 {
            MAX_SCALE
        } else {
            SAFETY * err_norm.powf(-1.0 / ORDER as f64)
        };
        factor = factor.clamp(MIN_SCALE, MAX_SCALE);
        if rejected_last {
            factor = factor.min(1.0);
        }
        h = (h * factor).min(cfg.max_step);
        if !h.is_finite() {
            return Err(OdeError::NonFiniteState { t });
        }
    }
}

struct StoreSink {
    traj: Trajectory,
}

impl StepSink for StoreSink {
    fn on_step(&mut self, view: &StepView<'_>) -> bool {
        self.traj.times.push(view.t1);
        self.traj.states.push(view.y1.to_vec());
        self.traj.steps.push(view.to_dense());
        true
    }
}

struct NullSink;

impl StepSink for NullSink {
    fn on_step(&mut self, _view: &StepView<'_>) -> bool {
        true
    }
}

struct SampleSink {
    next: f64,
    dt: f64,
    dir: f64,
    t_last: f64,
    buf: Vec<f64>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl StepSink for SampleSink {
    fn on_step(&mut self, view: &StepView<'_>) -> bool {
        while (self.next - view.t1) * self.dir <= 0.0
            && (self.next - self.t_last) * self.dir <= 0.0
        {
            view.eval(self.next, &mut self.buf);
            self.times.push(self.next);
            self.states.push(self.buf.clone());
            self.next += self.dir * self.dt;
        }
        true
    }
}

/// Sign-crossing direction for event detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crossing {
    Upward,
    Downward,
    Any,
}

impl Crossing {
    fn matches(self, g_prev: f64, g_new: f64) -> bool {
        match self {
            Crossing::Upward => g_prev < 0.0 && g_new >= 0.0,
            Crossing::Downward => g_prev > 0.0 && g_new <= 0.0,
            Crossing::Any => {
                Crossing::Upward.matches(g_prev, g_new) || Crossing::Downward.matches(g_prev, g_new)
            }
        }
    }
}

/// An event located on the dense interpolant.
#[derive(Clone, Debug)]
pub struct Event {
    pub t: f64,
    pub state: Vec<f64>,
}

struct EventSink<'g, S> {
    inner: S,
    event: &'g dyn Fn(&[f64]) -> f64,
    direction: Crossing,
    g_prev: f64,
    events: Vec<Event>,
    stop_after: Option<usize>,
    buf: Vec<f64>,
}

impl<S: StepSink> EventSink<'_, S> {
    /// Bisection on the dense interpolant; refines until the event value is
    /// below EVENT_VALUE_TOL or the bracket is at rounding width.
    fn refine(&mut self, view: &StepView<'_>, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
        let rising = g_lo < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            view.eval(mid, &mut self.buf);
            let g_mid = (self.event)(&self.buf);
            if g_mid.abs() < EVENT_VALUE_TOL {
                return mid;
            }
            if (g_mid < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl<S: StepSink> StepSink for EventSink<'_, S> {
    fn on_step(&mut self, view: &StepView<'_>) -> bool {
        let keep = self.inner.on_step(view);
        let g_new = (self.event)(view.y1);
        if self.direction.matches(self.g_prev, g_new) {
            let t_ev = self.refine(view, view.t0, view.t1, self.g_prev);
            view.eval(t_ev, &mut self.buf);
            self.events.push(Event {
                t: t_ev,
                state: self.buf.clone(),
            });
            if let Some(limit) = self.stop_after {
                if self.events.len() >= limit {
                    return false;
                }
            }
        }
        self.g_prev = g_new;
        keep
    }
}

/// Integrate `rhs` from `y0` over `t_span`, storing the full dense trajectory.
pub fn integrate<F>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut sink = StoreSink {
        traj: Trajectory {
            times: vec![t_span[0]],
            states: vec![y0.to_vec()],
            steps: Vec::new(),
        },
    };
    drive(rhs, y0, t_span, cfg, &mut sink)?;
    Ok(sink.traj)
}

/// Integrate without storing the trajectory; returns the final state.
pub fn integrate_final<F>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut sink = NullSink;
    let (_, y) = drive(rhs, y0, t_span, cfg, &mut sink)?;
    Ok(y)
}

/// Uniformly sampled trajectory (dense data discarded after sampling).
#[derive(Clone, Debug)]
pub struct SampledTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Integrate and sample the dense solution every `dt`, starting at t0.
pub fn integrate_sampled<F>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<SampledTrajectory, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(OdeError::InvalidConfig("sampling dt must be positive".into()));
    }
    let dir = (t_span[1] - t_span[0]).signum();
    let mut sink = SampleSink {
        next: t_span[0] + dir * dt,
        dt,
        dir,
        t_last: t_span[1],
        buf: vec![0.0; y0.len()],
        times: vec![t_span[0]],
        states: vec![y0.to_vec()],
    };
    drive(rhs, y0, t_span, cfg, &mut sink)?;
    Ok(SampledTrajectory {
        times: sink.times,
        states: sink.states,
    })
}

/// Integrate with event detection; each reported event time locates a sign
/// change of `event` along the dense interpolant, refined by bisection, with
/// the crossing direction matching `direction`.
pub fn integrate_with_events<F, G>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    cfg: &IntegratorConfig,
    event: G,
    direction: Crossing,
) -> Result<(Trajectory, Vec<f64>), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: Fn(&[f64]) -> f64,
{
    let inner = StoreSink {
        traj: Trajectory {
            times: vec![t_span[0]],
            states: vec![y0.to_vec()],
            steps: Vec::new(),
        },
    };
    let mut sink = EventSink {
        inner,
        event: &event,
        direction,
        g_prev: event(y0),
        events: Vec::new(),
        stop_after: None,
        buf: vec![0.0; y0.len()],
    };
    drive(rhs, y0, t_span, cfg, &mut sink)?;
    let times = sink.events.iter().map(|e| e.t).collect();
    Ok((sink.inner.traj, times))
}

/// Event-collecting integration without trajectory storage. Stops early once
/// `stop_after` events have been found (when given). Returns the events and
/// the final state reached.
pub fn integrate_events_only<F, G>(
    rhs: F,
    y0: &[f64],
    t_span: [f64; 2],
    cfg: &IntegratorConfig,
    event: G,
    direction: Crossing,
    stop_after: Option<usize>,
) -> Result<(Vec<Event>, f64, Vec<f64>), OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    G: Fn(&[f64]) -> f64,
{
    let mut sink = EventSink {
        inner: NullSink,
        event: &event,
        direction,
        g_prev: event(y0),
        events: Vec::new(),
        stop_after,
        buf: vec![0.0; y0.len()],
    };
    let (t, y) = drive(rhs, y0, t_span, cfg, &mut sink)?;
    Ok((sink.events, t, y))
}
