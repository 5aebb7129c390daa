//! Continuation of a bifurcating branch: bordered Newton corrector, adaptive step control,
//! detection of the alternatives that end a branch, and the small-amplitude comparison
//! with the local expansion.

use std::fmt;
use std::io::{self, BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bifurcation::{BifurcationError, BifurcationPoint, Scenario, ScenarioKind};
use crate::format::to_json_line;
use crate::model::{self, ModelError, Monitors, StripParams};
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::{ModeGrid, ProfilePair, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuationError {
    #[error("invalid continuation settings: {0}")]
    InvalidConfig(String),
    #[error("singular bordered Jacobian (condition estimate {cond:e})")]
    Singular { cond: f64 },
    #[error("Newton stalled after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("could not leave the bifurcation point on the {side} side: {reason}")]
    Init { side: &'static str, reason: String },
    #[error("{found} small-amplitude projection points available, need at least 2 distinct amplitudes")]
    InsufficientPoints { found: usize },
    #[error("malformed branch file: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Bifurcation(#[from] BifurcationError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<SpectralError> for ContinuationError {
    fn from(e: SpectralError) -> Self {
        ContinuationError::Model(e.into())
    }
}

impl From<io::Error> for ContinuationError {
    fn from(e: io::Error) -> Self {
        ContinuationError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationConfig<T> {
    /// Harmonics per profile.
    pub n_harmonics: usize,
    pub ds0: T,
    pub ds_min: T,
    pub ds_max: T,
    pub newton_tol: T,
    pub newton_max_iter: usize,
    pub monitor_eps: T,
    pub norm_max: T,
    /// Accepted steps per half-branch.
    pub max_steps: usize,
    /// Projection amplitude beyond which pseudo-arclength takes over.
    pub switchover: T,
    /// Amplitudes at which projection points are always computed (both signs).
    pub s_grid: Vec<T>,
    /// Exponents of the analytic norm reported per point and used for blow-up.
    pub norm_s: T,
    pub norm_sigma: T,
    /// Relative distance to the start that counts as a closed loop.
    pub loop_tol: T,
    /// Energy fraction in the top quarter of harmonics that triggers a warning.
    pub resolution_tol: T,
}

impl<T: Real> Default for ContinuationConfig<T> {
    fn default() -> Self {
        Self {
            n_harmonics: 64,
            ds0: lit(1e-2),
            ds_min: lit(1e-6),
            ds_max: lit(0.1),
            newton_tol: lit(1e-12),
            newton_max_iter: 25,
            monitor_eps: lit(1e-3),
            norm_max: lit(1e3),
            max_steps: 2000,
            switchover: lit(0.05),
            s_grid: [1e-3, 2e-3, 4e-3, 8e-3].iter().map(|&s| lit(s)).collect(),
            norm_s: lit(2.0),
            norm_sigma: T::zero(),
            loop_tol: lit(1e-8),
            resolution_tol: lit(1e-8),
        }
    }
}

impl<T: Real> ContinuationConfig<T> {
    pub fn validate(&self) -> Result<(), ContinuationError> {
        let bad = |msg: &str| Err(ContinuationError::InvalidConfig(msg.into()));
        if self.n_harmonics < 4 {
            return bad("need at least 4 harmonics");
        }
        if !(self.ds_min > T::zero() && self.ds_min <= self.ds0 && self.ds0 <= self.ds_max) {
            return bad("need 0 < ds_min <= ds0 <= ds_max");
        }
        if !(self.newton_tol > T::zero()) || self.newton_max_iter == 0 {
            return bad("Newton tolerance and iteration budget must be positive");
        }
        if !(self.monitor_eps > T::zero() && self.norm_max > T::zero() && self.switchover > T::zero()) {
            return bad("monitor_eps, norm_max and switchover must be positive");
        }
        if self.s_grid.iter().any(|&s| !(s > T::zero())) {
            return bad("grid amplitudes must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Projection,
    Arclength,
}

/// Scalar equation closing the bordered system. Unknowns are stacked as
/// `[ř₊ coefficients, ř₋ coefficients, λ]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint<T> {
    /// `⟨ř, κ⟩ = s ‖κ‖²` with `κ` the stacked kernel.
    Projection { kernel: DVector<T>, s: T },
    /// `t · (x − origin) = ds`.
    Arclength { origin: DVector<T>, tangent: DVector<T>, ds: T },
}

impl<T: Real> Constraint<T> {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            Constraint::Projection { .. } => ConstraintKind::Projection,
            Constraint::Arclength { .. } => ConstraintKind::Arclength,
        }
    }

    /// Constraint value and the magnitude of its terms (for a rounding-aware test).
    fn value(&self, x: &DVector<T>) -> (T, T) {
        match self {
            Constraint::Projection { kernel, s } => {
                let n = kernel.len();
                let proj = x.rows(0, n).dot(kernel);
                let target = *s * kernel.norm_squared();
                (proj - target, proj.abs() + target.abs())
            }
            Constraint::Arclength { origin, tangent, ds } => {
                let a = tangent.dot(x);
                let b = tangent.dot(origin);
                (a - b - *ds, a.abs() + b.abs() + ds.abs())
            }
        }
    }

    fn gradient(&self, dim: usize) -> DVector<T> {
        match self {
            Constraint::Projection { kernel, .. } => {
                let mut g = DVector::zeros(dim);
                g.rows_mut(0, kernel.len()).copy_from(kernel);
                g
            }
            Constraint::Arclength { tangent, .. } => tangent.clone(),
        }
    }
}

/// Unit tangent of the branch at the bifurcation point: along the kernel, with `δλ = 0`.
pub fn initial_tangent<T: Real>(point: &BifurcationPoint<T>, n: usize) -> Result<DVector<T>, ContinuationError> {
    let x = pack(&point.kernel_profile(n)?, T::zero());
    let norm = x.norm();
    Ok(x / norm)
}

fn pack<T: Real>(r: &ProfilePair<T>, lambda: T) -> DVector<T> {
    let u = r.to_vector();
    let n = u.len();
    let mut x = DVector::zeros(n + 1);
    x.rows_mut(0, n).copy_from(&u);
    x[n] = lambda;
    x
}

fn unpack<T: Real>(grid: ModeGrid, x: &DVector<T>) -> Result<(ProfilePair<T>, T), ContinuationError> {
    let n = x.len() - 1;
    let u = DVector::from_iterator(n, x.rows(0, n).iter().copied());
    Ok((ProfilePair::from_vector(grid, &u)?, x[n]))
}

/// Converged solution of the bordered system.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrected<T> {
    pub lambda: T,
    pub profiles: ProfilePair<T>,
    pub residual_norm: T,
    pub iterations: usize,
}

/// Newton iteration on `(F(λ, ř), constraint) = 0`. Converged once the residual's ℓ² norm is
/// below `tol` and the constraint holds to rounding.
pub fn newton_correct<T: Real>(
    scenario: &Scenario<T>,
    grid: ModeGrid,
    guess: &DVector<T>,
    constraint: &Constraint<T>,
    tol: T,
    max_iter: usize,
) -> Result<Corrected<T>, ContinuationError> {
    let dim = 2 * grid.n() + 1;
    if guess.len() != dim {
        return Err(SpectralError::Length { expected: dim, got: guess.len() }.into());
    }
    let dir = scenario.direction();
    let mut x = guess.clone();
    let mut residual = T::zero();
    for it in 0..=max_iter {
        let (r, lambda) = unpack(grid, &x)?;
        let p = scenario.params_at(lambda);
        let f = model::residual(&p, &r)?.to_vector();
        residual = f.norm();
        let (g, g_scale) = constraint.value(&x);
        if residual < tol && g.abs() <= tol * (T::one() + g_scale) {
            return Ok(Corrected { lambda, profiles: r, residual_norm: residual, iterations: it });
        }
        if it == max_iter || !residual.is_finite() {
            break;
        }
        let mut a = DMatrix::zeros(dim, dim);
        a.view_mut((0, 0), (dim - 1, dim - 1)).copy_from(&model::jacobian(&p, &r)?);
        a.view_mut((0, dim - 1), (dim - 1, 1)).copy_from(&model::param_derivative(&p, &r, &dir)?.to_vector());
        a.view_mut((dim - 1, 0), (1, dim)).copy_from(&constraint.gradient(dim).transpose());
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, dim - 1).copy_from(&(-f));
        rhs[dim - 1] = -g;
        match a.clone().lu().solve(&rhs) {
            Some(dx) if dx.iter().all(|v| v.is_finite()) => x += dx,
            _ => return Err(ContinuationError::Singular { cond: condition(a) }),
        }
    }
    Err(ContinuationError::NotConverged { iterations: max_iter, residual: to_f64(residual) })
}

fn condition<T: Real>(a: DMatrix<T>) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().copied().fold(T::zero(), |m, v| m.max(v));
    let min = sv.iter().copied().fold(max, |m, v| m.min(v));
    to_f64(max) / to_f64(min)
}

/// Alternative that ended a half-branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    StepBudget,
    Loop,
    BlowUp,
    Collision,
    DegeneracyPlus,
    DegeneracyMinus,
    DomainExit,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint<T> {
    /// Projection amplitude on the initial segment, accumulated signed arclength beyond.
    pub s: T,
    pub lambda: T,
    pub params: StripParams<T>,
    pub profiles: ProfilePair<T>,
    pub residual_norm: T,
    pub monitors: Monitors<T>,
    /// Analytic `(s, σ)` norm of the profiles.
    pub norm: T,
    pub newton_iters: usize,
    pub constraint: ConstraintKind,
    pub warnings: Vec<String>,
}

impl<T: Real> BranchPoint<T> {
    fn new(
        scenario: &Scenario<T>,
        cfg: &ContinuationConfig<T>,
        s: T,
        sol: Corrected<T>,
        constraint: ConstraintKind,
    ) -> Result<Self, ContinuationError> {
        let params = scenario.params_at(sol.lambda);
        let monitors = model::monitors(&params, &sol.profiles)?;
        let norm = sol.profiles.norm_s_sigma(cfg.norm_s, cfg.norm_sigma);
        let mut warnings = Vec::new();
        let top = top_quarter_fraction(&sol.profiles);
        if top > cfg.resolution_tol {
            warnings.push(format!("under-resolved: top-quarter energy fraction {:.3e}", to_f64(top)));
        }
        let defect = model::qualitative_defect(&params, &sol.profiles);
        if defect > lit::<T>(100.0) * cfg.newton_tol {
            warnings.push(format!("qualitative defect above 100 x newton_tol: {:.3e}", to_f64(defect)));
        }
        Ok(Self {
            s,
            lambda: sol.lambda,
            params,
            profiles: sol.profiles,
            residual_norm: sol.residual_norm,
            monitors,
            norm,
            newton_iters: sol.iterations,
            constraint,
            warnings,
        })
    }

    fn state(&self) -> DVector<T> {
        pack(&self.profiles, self.lambda)
    }

    /// Line record for the branch file.
    pub fn record(&self, kind: ScenarioKind, m: usize) -> PointRecord {
        PointRecord {
            s: to_f64(self.s),
            lambda: to_f64(self.lambda),
            a: to_f64(self.params.a),
            b: to_f64(self.params.b),
            c: to_f64(self.params.c),
            m,
            coeffs_plus: self.profiles.plus.coeffs().iter().map(|&v| to_f64(v)).collect(),
            coeffs_minus: self.profiles.minus.coeffs().iter().map(|&v| to_f64(v)).collect(),
            residual_norm: to_f64(self.residual_norm),
            monitors: MonitorRecord {
                m_ab: to_f64(self.monitors.m_ab),
                m_plus: to_f64(self.monitors.m_plus),
                m_minus: to_f64(self.monitors.m_minus),
            },
            warnings: self.warnings.clone(),
            scenario: kind,
            constraint: self.constraint,
        }
    }
}

/// Fraction of the coefficient energy held by harmonics above `3N/4`.
pub fn top_quarter_fraction<T: Real>(r: &ProfilePair<T>) -> T {
    let n = r.grid().n();
    let cut = n - n / 4;
    let energy = |c: &[T], from: usize| c[from..].iter().fold(T::zero(), |acc, &v| acc + v * v);
    let total = energy(r.plus.coeffs(), 0) + energy(r.minus.coeffs(), 0);
    if total == T::zero() {
        return T::zero();
    }
    (energy(r.plus.coeffs(), cut) + energy(r.minus.coeffs(), cut)) / total
}

/// Thresholds crossed at `pt`: the dominant one, and the others within a factor 2.
fn classify<T: Real>(pt: &BranchPoint<T>, cfg: &ContinuationConfig<T>) -> (Option<Termination>, Vec<Termination>) {
    let eps = cfg.monitor_eps;
    let blow = if pt.norm.is_finite() && pt.lambda.is_finite() {
        cfg.norm_max / pt.norm.max(pt.lambda.abs())
    } else {
        T::zero()
    };
    let ratios = [
        (Termination::Collision, pt.monitors.m_ab / eps),
        (Termination::DegeneracyPlus, pt.monitors.m_plus / eps),
        (Termination::DegeneracyMinus, pt.monitors.m_minus / eps),
        (Termination::BlowUp, blow),
        (Termination::DomainExit, (pt.params.b - pt.params.a) / eps),
    ];
    let primary = ratios
        .iter()
        .filter(|(_, r)| *r < T::one())
        .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(t, _)| *t);
    let two = lit::<T>(2.0);
    let near = ratios.iter().filter(|(t, r)| *r < two && Some(*t) != primary).map(|(t, _)| *t).collect();
    (primary, near)
}

fn segment_distance<T: Real>(p: &DVector<T>, a: &DVector<T>, b: &DVector<T>) -> T {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > T::zero() { ((p - a).dot(&d) / len2).max(T::zero()).min(T::one()) } else { T::zero() };
    (a + d * t - p).norm()
}

/// One half of a branch, ordered away from the bifurcation point.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfBranch<T> {
    pub points: Vec<BranchPoint<T>>,
    pub termination: Termination,
    pub also_near: Vec<Termination>,
}

/// A continued branch with both halves.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub bifurcation: BifurcationPoint<T>,
    /// Points ordered by `s`: negative half, the bifurcation point, positive half.
    pub points: Vec<BranchPoint<T>>,
    /// The positive half's verdict unless it only ran out of budget.
    pub termination: Termination,
    pub negative: Termination,
    pub positive: Termination,
    pub also_near: Vec<Termination>,
    pub warnings: Vec<String>,
}

struct Stepper<'a, T: Real> {
    point: &'a BifurcationPoint<T>,
    cfg: &'a ContinuationConfig<T>,
    grid: ModeGrid,
    kernel: DVector<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(point: &'a BifurcationPoint<T>, cfg: &'a ContinuationConfig<T>) -> Result<Self, ContinuationError> {
        cfg.validate()?;
        let grid = point.grid(cfg.n_harmonics)?;
        let kernel = point.kernel_profile(cfg.n_harmonics)?.to_vector();
        Ok(Self { point, cfg, grid, kernel })
    }

    fn start(&self) -> Result<BranchPoint<T>, ContinuationError> {
        let sol = Corrected {
            lambda: self.point.lambda,
            profiles: ProfilePair::zeros(self.grid),
            residual_norm: T::zero(),
            iterations: 0,
        };
        BranchPoint::new(&self.point.scenario, self.cfg, T::zero(), sol, ConstraintKind::Projection)
    }

    /// Predictor for amplitude `s`: the local expansion from the start, secant extrapolation
    /// in `s` afterwards.
    fn projection_guess(&self, s: T, last: &[BranchPoint<T>]) -> DVector<T> {
        match last {
            [.., p0, p1] if p1.s != p0.s => {
                let (x0, x1) = (p0.state(), p1.state());
                let w = (s - p1.s) / (p1.s - p0.s);
                &x1 + (&x1 - &x0) * w
            }
            _ => {
                let mut x = DVector::zeros(self.kernel.len() + 1);
                x.rows_mut(0, self.kernel.len()).copy_from(&(&self.kernel * s));
                x[self.kernel.len()] = self.point.lambda + lit::<T>(0.5) * self.point.shi_second * s * s;
                x
            }
        }
    }

    fn projection_point(&self, s: T, guess: &DVector<T>) -> Result<BranchPoint<T>, ContinuationError> {
        let constraint = Constraint::Projection { kernel: self.kernel.clone(), s };
        let sol = newton_correct(
            &self.point.scenario,
            self.grid,
            guess,
            &constraint,
            self.cfg.newton_tol,
            self.cfg.newton_max_iter,
        )?;
        BranchPoint::new(&self.point.scenario, self.cfg, s, sol, ConstraintKind::Projection)
    }

    fn arclength_point(&self, prev: &BranchPoint<T>, cur: &BranchPoint<T>, ds: T, sign: T) -> Result<BranchPoint<T>, ContinuationError> {
        let (x0, x1) = (prev.state(), cur.state());
        let secant = &x1 - &x0;
        let len = secant.norm();
        if !(len > T::zero()) {
            return Err(ContinuationError::Singular { cond: f64::INFINITY });
        }
        let tangent = secant / len;
        let guess = &x1 + &tangent * ds;
        let constraint = Constraint::Arclength { origin: x1, tangent, ds };
        let sol = newton_correct(
            &self.point.scenario,
            self.grid,
            &guess,
            &constraint,
            self.cfg.newton_tol,
            self.cfg.newton_max_iter,
        )?;
        BranchPoint::new(&self.point.scenario, self.cfg, cur.s + sign * ds, sol, ConstraintKind::Arclength)
    }

    fn half(&self, start: &BranchPoint<T>, sign: T) -> Result<HalfBranch<T>, ContinuationError> {
        let cfg = self.cfg;
        let side = if sign > T::zero() { "positive" } else { "negative" };
        let x_start = start.state();
        let loop_scale = cfg.loop_tol * x_start.norm().max(T::one());
        let mut stops: Vec<T> = cfg.s_grid.iter().copied().filter(|&g| g < cfg.switchover).collect();
        stops.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

        let mut pts: Vec<BranchPoint<T>> = vec![start.clone()];
        let mut ds = cfg.ds0;
        let mut projecting = true;
        let mut steps = 0;
        loop {
            if steps >= cfg.max_steps {
                return Ok(self.finish(pts, Termination::StepBudget));
            }
            let cur = pts.last().expect("start point");
            let attempt = if projecting {
                let amp = cur.s.abs();
                if amp >= cfg.switchover {
                    projecting = false;
                    ds = cfg.ds0;
                    continue;
                }
                let mut target = amp + ds;
                if let Some(&g) = stops.iter().find(|&&g| g > amp * (T::one() + lit(1e-12))) {
                    target = target.min(g);
                }
                let s = sign * target;
                self.projection_point(s, &self.projection_guess(s, &pts))
            } else {
                let prev = &pts[pts.len() - 2];
                self.arclength_point(prev, cur, ds, sign)
            };
            match attempt {
                Ok(pt) => {
                    if pt.newton_iters <= 3 {
                        ds = (ds * lit(1.3)).min(cfg.ds_max);
                    }
                    steps += 1;
                    let (crossed, near) = classify(&pt, cfg);
                    let closes = steps >= 10 && {
                        let prev = pts.last().expect("previous point").state();
                        segment_distance(&x_start, &prev, &pt.state()) < loop_scale
                    };
                    pts.push(pt);
                    if let Some(t) = crossed {
                        pts.remove(0);
                        return Ok(HalfBranch { points: pts, termination: t, also_near: near });
                    }
                    if closes {
                        return Ok(self.finish(pts, Termination::Loop));
                    }
                }
                Err(e) => {
                    if pts.len() == 1 && ds / lit::<T>(2.0) < cfg.ds_min {
                        return Err(ContinuationError::Init { side, reason: e.to_string() });
                    }
                    let domain_failure = matches!(e, ContinuationError::Model(ModelError::DegenerateStrip { .. }));
                    ds /= lit::<T>(2.0);
                    if ds < cfg.ds_min {
                        if projecting {
                            // fold in the kernel direction: hand over to arclength
                            projecting = false;
                            ds = cfg.ds0;
                            continue;
                        }
                        let t = if domain_failure { Termination::DomainExit } else { Termination::StepBudget };
                        return Ok(self.finish(pts, t));
                    }
                }
            }
        }
    }

    fn finish(&self, mut pts: Vec<BranchPoint<T>>, termination: Termination) -> HalfBranch<T> {
        let near = pts.last().map(|p| classify(p, self.cfg).1).unwrap_or_default();
        pts.remove(0);
        HalfBranch { points: pts, termination, also_near: near }
    }
}

/// Continues the branch emanating from `point` in both directions.
pub fn continue_branch<T: Real>(point: &BifurcationPoint<T>, cfg: &ContinuationConfig<T>) -> Result<Branch<T>, ContinuationError> {
    let stepper = Stepper::new(point, cfg)?;
    let start = stepper.start()?;
    let neg = stepper.half(&start, -T::one())?;
    let pos = stepper.half(&start, T::one())?;
    let termination = if pos.termination != Termination::StepBudget { pos.termination } else { neg.termination };
    let mut also_near = if pos.termination != Termination::StepBudget { pos.also_near.clone() } else { neg.also_near.clone() };
    also_near.retain(|t| *t != termination);
    let mut points: Vec<BranchPoint<T>> = neg.points.into_iter().rev().collect();
    points.push(start);
    points.extend(pos.points);
    let mut warnings: Vec<String> = Vec::new();
    for w in points.iter().flat_map(|p| &p.warnings) {
        let head = w.split(':').next().unwrap_or(w).to_string();
        if !warnings.contains(&head) {
            warnings.push(head);
        }
    }
    Ok(Branch {
        bifurcation: point.clone(),
        points,
        termination,
        negative: neg.termination,
        positive: pos.termination,
        also_near,
        warnings,
    })
}

/// Projection points at `±s` for every `s` in `amplitudes`, stepping outward from the
/// bifurcation point. Returned in ascending `s`.
pub fn projection_points<T: Real>(
    point: &BifurcationPoint<T>,
    cfg: &ContinuationConfig<T>,
    amplitudes: &[T],
) -> Result<Vec<BranchPoint<T>>, ContinuationError> {
    let stepper = Stepper::new(point, cfg)?;
    let start = stepper.start()?;
    let mut amps: Vec<T> = amplitudes.to_vec();
    amps.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = Vec::new();
    for sign in [-T::one(), T::one()] {
        let mut pts = vec![start.clone()];
        for &a in &amps {
            let s = sign * a;
            let pt = stepper.projection_point(s, &stepper.projection_guess(s, &pts))?;
            pts.push(pt);
        }
        pts.remove(0);
        out.extend(pts);
    }
    out.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Comparison of small-amplitude projection points with the local expansion
/// `λ(s) = λ(0) + ½λ''(0)s² + …`, `ř(s) = sκ + O(s²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport<T> {
    pub lambda0: T,
    /// Least-squares `q` in `λ(s) − λ(0) ≈ q s²`.
    pub fitted: T,
    /// `½λ''(0)`.
    pub predicted: T,
    pub relative_deviation: T,
    /// `(s, ‖ř(s) − sκ‖ / s²)`.
    pub profile_ratios: Vec<(T, T)>,
    /// `max/min` of the profile ratios.
    pub ratio_variation: T,
    /// `max |λ(s) − λ(−s)| / |s|³` over the pairs present.
    pub even_defect: T,
    pub points_used: usize,
}

pub fn asymptotic_compare<T: Real>(
    points: &[BranchPoint<T>],
    bif: &BifurcationPoint<T>,
    s_grid: &[T],
) -> Result<AsymptoticReport<T>, ContinuationError> {
    let on_grid = |s: T| s_grid.iter().any(|&g| (s.abs() - g).abs() <= lit::<T>(1e-9) * g);
    let used: Vec<&BranchPoint<T>> =
        points.iter().filter(|p| p.constraint == ConstraintKind::Projection && p.s != T::zero() && on_grid(p.s)).collect();
    let mut distinct: Vec<T> = Vec::new();
    for p in &used {
        if !distinct.iter().any(|&d| (d - p.s.abs()).abs() <= lit::<T>(1e-9) * d) {
            distinct.push(p.s.abs());
        }
    }
    if distinct.len() < 2 {
        return Err(ContinuationError::InsufficientPoints { found: used.len() });
    }
    let (num, den) = used.iter().fold((T::zero(), T::zero()), |(n, d), p| {
        let s2 = p.s * p.s;
        (n + (p.lambda - bif.lambda) * s2, d + s2 * s2)
    });
    let fitted = num / den;
    let predicted = lit::<T>(0.5) * bif.shi_second;
    let mut ratios = Vec::new();
    for p in &used {
        let kernel = bif.kernel_profile(p.profiles.grid().n())?;
        let dev = p.profiles.sub(&kernel.scale(p.s))?.l2_norm() / (p.s * p.s);
        ratios.push((p.s, dev));
    }
    let rmax = ratios.iter().fold(T::zero(), |m, r| m.max(r.1));
    let rmin = ratios.iter().fold(rmax, |m, r| m.min(r.1));
    let mut even = T::zero();
    for p in &used {
        if let Some(q) = used.iter().find(|q| (q.s + p.s).abs() <= lit::<T>(1e-9) * p.s.abs()) {
            even = even.max((p.lambda - q.lambda).abs() / p.s.abs().powi(3));
        }
    }
    Ok(AsymptoticReport {
        lambda0: bif.lambda,
        fitted,
        predicted,
        relative_deviation: (fitted - predicted).abs() / predicted.abs(),
        profile_ratios: ratios,
        ratio_variation: rmax / rmin,
        even_defect: even,
        points_used: used.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub m_ab: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

/// One branch point as written to a branch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub s: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m: usize,
    pub coeffs_plus: Vec<f64>,
    pub coeffs_minus: Vec<f64>,
    pub residual_norm: f64,
    pub monitors: MonitorRecord,
    pub warnings: Vec<String>,
    pub scenario: ScenarioKind,
    pub constraint: ConstraintKind,
}

impl PointRecord {
    pub fn grid(&self) -> Result<ModeGrid, ContinuationError> {
        Ok(ModeGrid::new(self.m, self.coeffs_plus.len())?)
    }

    pub fn profiles(&self) -> Result<ProfilePair<f64>, ContinuationError> {
        let grid = self.grid()?;
        let plus = crate::spectral::CosineSeries::from_coeffs(grid, self.coeffs_plus.clone())?;
        let minus = crate::spectral::CosineSeries::from_coeffs(grid, self.coeffs_minus.clone())?;
        Ok(ProfilePair::new(plus, minus)?)
    }

    pub fn params(&self) -> StripParams<f64> {
        StripParams { a: self.a, b: self.b, c: self.c }
    }

    /// Scenario with its frozen parameters read off this point.
    pub fn scenario(&self) -> Scenario<f64> {
        Scenario::from_kind(self.scenario, self.a, self.b, self.c)
    }

    pub fn to_point(&self, cfg: &ContinuationConfig<f64>) -> Result<BranchPoint<f64>, ContinuationError> {
        let profiles = self.profiles()?;
        Ok(BranchPoint {
            s: self.s,
            lambda: self.lambda,
            params: self.params(),
            norm: profiles.norm_s_sigma(cfg.norm_s, cfg.norm_sigma),
            profiles,
            residual_norm: self.residual_norm,
            monitors: Monitors { m_ab: self.monitors.m_ab, m_plus: self.monitors.m_plus, m_minus: self.monitors.m_minus },
            newton_iters: 0,
            constraint: self.constraint,
            warnings: self.warnings.clone(),
        })
    }
}

/// Final line of a branch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationRecord {
    pub termination: Termination,
    pub negative: Termination,
    pub positive: Termination,
    pub also_near: Vec<Termination>,
    pub scenario: ScenarioKind,
    pub m: usize,
    /// Parameters at the bifurcation point.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub points: usize,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Record {
    End(TerminationRecord),
    Point(PointRecord),
}

impl<T: Real> Branch<T> {
    pub fn records(&self) -> (Vec<PointRecord>, TerminationRecord) {
        let kind = self.bifurcation.kind();
        let m = self.bifurcation.m;
        let pts = self.points.iter().map(|p| p.record(kind, m)).collect();
        let p = self.bifurcation.params;
        let end = TerminationRecord {
            termination: self.termination,
            negative: self.negative,
            positive: self.positive,
            also_near: self.also_near.clone(),
            scenario: kind,
            m,
            a: to_f64(p.a),
            b: to_f64(p.b),
            c: to_f64(p.c),
            points: self.points.len(),
            warnings: self.warnings.clone(),
        };
        (pts, end)
    }

    /// JSON lines: one record per point, then the termination record.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), ContinuationError> {
        let (pts, end) = self.records();
        let json_err = |e: serde_json::Error| ContinuationError::Format(e.to_string());
        for rec in &pts {
            writeln!(w, "{}", to_json_line(rec).map_err(json_err)?)?;
        }
        writeln!(w, "{}", to_json_line(&end).map_err(json_err)?)?;
        Ok(())
    }
}

/// Contents of a branch file.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFile {
    pub points: Vec<PointRecord>,
    pub end: Option<TerminationRecord>,
}

impl BranchFile {
    pub fn read<R: BufRead>(r: R) -> Result<Self, ContinuationError> {
        let mut points = Vec::new();
        let mut end = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&line) {
                Ok(Record::Point(p)) => points.push(p),
                Ok(Record::End(t)) => end = Some(t),
                Err(e) => return Err(ContinuationError::Format(format!("line {}: {e}", i + 1))),
            }
        }
        if points.is_empty() {
            return Err(ContinuationError::Format("no branch points".into()));
        }
        Ok(Self { points, end })
    }

    pub fn scenario(&self) -> Scenario<f64> {
        match &self.end {
            Some(e) => Scenario::from_kind(e.scenario, e.a, e.b, e.c),
            None => self.points[0].scenario(),
        }
    }

    pub fn m(&self) -> usize {
        self.points[0].m
    }
}
