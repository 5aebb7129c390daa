//! Explicit time integration of the two coupled transport equations in full Fourier space,
//! used to check that continued profiles really travel and that flat strips stay put.

use serde::Serialize;
use thiserror::Error;

use crate::format::csv;
use crate::model::{self, ModelError, StripParams};
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectral::{Fourier, FullState, ProfilePair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error("time step {dt:e} exceeds the stability limit {limit:e} at t={t}")]
    Guard { t: f64, dt: f64, limit: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exponential high-mode filter `exp(−α (k/K)^p)` applied after every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Filter<T> {
    pub alpha: T,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub n_modes: usize,
    pub dt: T,
    pub t_final: T,
    /// Steps between recorded frames.
    pub record_every: usize,
    pub filter: Option<Filter<T>>,
    /// Symmetry whose broken modes are tracked as leakage (1 tracks nothing).
    pub symmetry: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(n_modes: usize, dt: T, t_final: T) -> Self {
        Self { n_modes, dt, t_final, record_every: 1, filter: None, symmetry: 1 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if self.n_modes == 0 || self.record_every == 0 || self.symmetry == 0 {
            return bad("n_modes, record_every and symmetry must be positive");
        }
        if !(self.dt > T::zero()) || !(self.t_final >= T::zero()) {
            return bad("need dt > 0 and t_final >= 0");
        }
        if let Some(f) = self.filter {
            if !(f.alpha >= T::zero()) || f.order == 0 {
                return bad("filter needs alpha >= 0 and a positive order");
            }
        }
        Ok(())
    }
}

/// Values of `f` at `x_i = i/S`, `i = 0..S`, through a shared trig table.
fn sample<T: Real>(f: &Fourier<T>, samples: usize) -> Vec<T> {
    let table: Vec<(T, T)> = (0..samples)
        .map(|i| {
            let th = T::two_pi() * from_usize::<T>(i) / from_usize::<T>(samples);
            (th.cos(), th.sin())
        })
        .collect();
    (0..samples)
        .map(|i| {
            (0..f.n_modes()).fold(T::zero(), |acc, k| {
                let (c, s) = table[((k + 1) * i) % samples];
                acc + f.cos[k] * c + f.sin[k] * s
            })
        })
        .collect()
}

fn sup<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Largest sampled advection speed `max |r± + shift±|`.
pub fn max_speed<T: Real>(a: T, b: T, state: &FullState<T>) -> T {
    let samples = 4 * state.n_modes();
    let vp = sample(&state.plus, samples).into_iter().fold(T::zero(), |m, v| m.max((v + b).abs()));
    let vm = sample(&state.minus, samples).into_iter().fold(T::zero(), |m, v| m.max((v + a).abs()));
    vp.max(vm)
}

/// `0.5 / (2π n_modes V_max)`.
pub fn stable_dt<T: Real>(a: T, b: T, state: &FullState<T>) -> T {
    lit::<T>(0.5) / (T::two_pi() * from_usize::<T>(state.n_modes()) * max_speed(a, b, state))
}

fn check_guard<T: Real>(a: T, b: T, state: &FullState<T>, dt: T, t: T) -> Result<(), SimError> {
    let limit = stable_dt(a, b, state);
    if dt > limit {
        return Err(SimError::Guard { t: to_f64(t), dt: to_f64(dt), limit: to_f64(limit) });
    }
    Ok(())
}

/// One RK4 step without the guard; also returns the RK4-weighted constant modes that the
/// quadratic terms produced and the state cannot hold.
fn rk4<T: Real>(a: T, b: T, y: &FullState<T>, dt: T) -> Result<(FullState<T>, (T, T)), SimError> {
    let half = dt * lit(0.5);
    let k1 = model::time_rhs_detailed(a, b, y)?;
    let k2 = model::time_rhs_detailed(a, b, &y.axpy(half, &k1.rate))?;
    let k3 = model::time_rhs_detailed(a, b, &y.axpy(half, &k2.rate))?;
    let k4 = model::time_rhs_detailed(a, b, &y.axpy(dt, &k3.rate))?;
    let w = dt / lit(6.0);
    let two = lit::<T>(2.0);
    let next = y
        .axpy(w, &k1.rate)
        .axpy(w * two, &k2.rate)
        .axpy(w * two, &k3.rate)
        .axpy(w, &k4.rate);
    let mean = |f: fn(&(T, T)) -> T| {
        w * (f(&k1.dropped_mean) + two * f(&k2.dropped_mean) + two * f(&k3.dropped_mean) + f(&k4.dropped_mean))
    };
    Ok((next, (mean(|m| m.0), mean(|m| m.1))))
}

/// Classical RK4 step of the evolution system, refusing steps beyond the stability limit.
pub fn step<T: Real>(a: T, b: T, state: &FullState<T>, dt: T) -> Result<FullState<T>, SimError> {
    check_guard(a, b, state, dt.abs(), T::zero())?;
    rk4(a, b, state, dt).map(|(s, _)| s)
}

fn apply_filter<T: Real>(state: &FullState<T>, f: Filter<T>) -> FullState<T> {
    let n = state.n_modes();
    let damp = |v: &[T]| -> Vec<T> {
        v.iter()
            .enumerate()
            .map(|(i, &c)| {
                let r = from_usize::<T>(i + 1) / from_usize::<T>(n);
                c * (-f.alpha * r.powi(f.order as i32)).exp()
            })
            .collect()
    };
    FullState {
        plus: Fourier { cos: damp(&state.plus.cos), sin: damp(&state.plus.sin) },
        minus: Fourier { cos: damp(&state.minus.cos), sin: damp(&state.minus.sin) },
    }
}

/// Per-frame diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorFrame<T> {
    pub t: T,
    /// Sampled `min |r₊ − r₋ + b − a|`.
    pub m_ab: T,
    pub v_max: T,
    pub max_coeff: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport<T> {
    pub a: T,
    pub b: T,
    pub n_modes: usize,
    pub dt: T,
    pub t_final: T,
    pub times: Vec<T>,
    /// Largest accumulated mean of `r₊` (resp. `r₋`) over the run.
    pub mean_drift_plus: T,
    pub mean_drift_minus: T,
    /// Largest coefficient on modes not divisible by `symmetry`.
    pub leakage: T,
    pub symmetry: usize,
    /// Sup-norm deviation from the translated reference, when one was supplied.
    pub traveling_error: Option<T>,
    pub traveling_speed: Option<T>,
    pub monitor_history: Vec<MonitorFrame<T>>,
    pub filter: Option<Filter<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub report: TrajectoryReport<T>,
    /// Recorded `(t, state)` frames.
    pub frames: Vec<(T, FullState<T>)>,
}

fn leakage<T: Real>(state: &FullState<T>, m: usize) -> T {
    let mut worst = T::zero();
    for f in [&state.plus, &state.minus] {
        for k in (1..=f.n_modes()).filter(|k| k % m != 0) {
            worst = worst.max(f.cos[k - 1].abs()).max(f.sin[k - 1].abs());
        }
    }
    worst
}

fn frame_monitors<T: Real>(a: T, b: T, state: &FullState<T>, t: T) -> MonitorFrame<T> {
    let samples = 4 * state.n_modes();
    let diff = state.plus.axpy(-T::one(), &state.minus);
    let gaps: Vec<T> = sample(&diff, samples).into_iter().map(|v| (v + b - a).abs()).collect();
    let m_ab = gaps.iter().copied().fold(gaps[0], |m, v| m.min(v));
    MonitorFrame { t, m_ab, v_max: max_speed(a, b, state), max_coeff: state.max_abs_coeff() }
}

/// Integrates from `initial` to `t_final`, recording every `record_every` steps and the end.
pub fn evolve<T: Real>(a: T, b: T, initial: &FullState<T>, cfg: &SimConfig<T>) -> Result<Trajectory<T>, SimError> {
    cfg.validate()?;
    StripParams::new(a, b, T::zero())?;
    if initial.n_modes() != cfg.n_modes {
        return Err(SimError::InvalidConfig(format!(
            "initial state has {} modes, config expects {}",
            initial.n_modes(),
            cfg.n_modes
        )));
    }
    let mut report = TrajectoryReport {
        a,
        b,
        n_modes: cfg.n_modes,
        dt: cfg.dt,
        t_final: cfg.t_final,
        times: Vec::new(),
        mean_drift_plus: T::zero(),
        mean_drift_minus: T::zero(),
        leakage: T::zero(),
        symmetry: cfg.symmetry,
        traveling_error: None,
        traveling_speed: None,
        monitor_history: Vec::new(),
        filter: cfg.filter,
    };
    let mut frames = Vec::new();
    let mut record = |t: T, s: &FullState<T>, report: &mut TrajectoryReport<T>| -> Result<(), SimError> {
        check_guard(a, b, s, cfg.dt, t)?;
        report.times.push(t);
        report.leakage = report.leakage.max(leakage(s, cfg.symmetry));
        report.monitor_history.push(frame_monitors(a, b, s, t));
        frames.push((t, s.clone()));
        Ok(())
    };

    let mut state = initial.clone();
    let mut t = T::zero();
    let (mut mean_p, mut mean_m) = (T::zero(), T::zero());
    record(t, &state, &mut report)?;
    let n_steps = (cfg.t_final / cfg.dt - lit(1e-9)).ceil().to_usize().unwrap_or(0);
    for i in 1..=n_steps {
        let dt = if i == n_steps { cfg.t_final - t } else { cfg.dt };
        let (next, (dp, dm)) = rk4(a, b, &state, dt)?;
        state = match cfg.filter {
            Some(f) => apply_filter(&next, f),
            None => next,
        };
        mean_p += dp;
        mean_m += dm;
        report.mean_drift_plus = report.mean_drift_plus.max(mean_p.abs());
        report.mean_drift_minus = report.mean_drift_minus.max(mean_m.abs());
        t = if i == n_steps { cfg.t_final } else { from_usize::<T>(i) * cfg.dt };
        if i % cfg.record_every == 0 || i == n_steps {
            record(t, &state, &mut report)?;
        }
    }
    Ok(Trajectory { report, frames })
}

/// `ř(x − ct)` in full Fourier form.
pub fn translated<T: Real>(profiles: &ProfilePair<T>, n_modes: usize, shift: T) -> FullState<T> {
    let base = FullState::from_profiles(profiles, n_modes);
    let rotate = |f: &Fourier<T>| {
        let mut out = Fourier::zeros(n_modes);
        for k in 0..n_modes {
            let th = T::two_pi() * from_usize::<T>(k + 1) * shift;
            let (c, s) = (th.cos(), th.sin());
            out.cos[k] = f.cos[k] * c - f.sin[k] * s;
            out.sin[k] = f.cos[k] * s + f.sin[k] * c;
        }
        out
    };
    FullState { plus: rotate(&base.plus), minus: rotate(&base.minus) }
}

/// Evolves `profiles` on the strip `(a, b)` and measures, over the recorded frames,
/// `sup_x |r(t, x) − ř(x − ct)|`.
pub fn traveling_error<T: Real>(
    profiles: &ProfilePair<T>,
    params: &StripParams<T>,
    cfg: &SimConfig<T>,
) -> Result<Trajectory<T>, SimError> {
    let grid = profiles.grid();
    if cfg.n_modes < grid.n() * grid.m() {
        return Err(SimError::InvalidConfig(format!(
            "n_modes={} cannot hold N={} harmonics of symmetry m={}",
            cfg.n_modes,
            grid.n(),
            grid.m()
        )));
    }
    let initial = FullState::from_profiles(profiles, cfg.n_modes);
    let mut traj = evolve(params.a, params.b, &initial, cfg)?;
    let samples = 4 * cfg.n_modes;
    let mut err = T::zero();
    for (t, state) in &traj.frames {
        let reference = translated(profiles, cfg.n_modes, params.c * *t);
        let dp = state.plus.axpy(-T::one(), &reference.plus);
        let dm = state.minus.axpy(-T::one(), &reference.minus);
        err = err.max(sup(&sample(&dp, samples))).max(sup(&sample(&dm, samples)));
    }
    traj.report.traveling_error = Some(err);
    traj.report.traveling_speed = Some(params.c);
    Ok(traj)
}

/// Frame dump: header `x,r_plus,r_minus`, `samples` uniform rows, 10 significant digits.
pub fn frame_csv<T: Real>(state: &FullState<T>, samples: usize) -> String {
    let p = sample(&state.plus, samples);
    let m = sample(&state.minus, samples);
    let mut out = String::from("x,r_plus,r_minus\n");
    for i in 0..samples {
        let x = i as f64 / samples as f64;
        out.push_str(&format!("{},{},{}\n", csv(x), csv(to_f64(p[i])), csv(to_f64(m[i]))));
    }
    out
}
