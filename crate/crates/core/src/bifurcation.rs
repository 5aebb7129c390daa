//! Closed-form bifurcation data of the flat strip: critical parameters, admissible modes,
//! kernel and cokernel directions, transversality, the auxiliary second-order profile and
//! the second derivative of the parameter along the bifurcating curve.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, ModeMatrix, ModelError, ParamDirection, StripParams};
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectral::{inner_product, ModeGrid, ProfilePair, ResidualPair};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BifurcationError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("mode m={m} is not admissible for {scenario} (admissible: {modes})")]
    Inadmissible { scenario: ScenarioKind, m: usize, modes: ModeSet },
    #[error("internal cross-validation failed: direct {direct:e} vs closed form {closed:e}")]
    CrossValidation { direct: f64, closed: f64 },
    #[error("vanishing transversality at the critical point")]
    Degenerate,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    VelocityPlus,
    VelocityMinus,
    UpperBoundaryB,
    LowerBoundaryA,
    SymmetricArea,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::VelocityPlus,
        ScenarioKind::VelocityMinus,
        ScenarioKind::UpperBoundaryB,
        ScenarioKind::LowerBoundaryA,
        ScenarioKind::SymmetricArea,
    ];
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which parameter bifurcates, with the two frozen ones.
///
/// In the symmetric scenario the strip is `(−λ, λ)` and `c` is frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario<T> {
    VelocityPlus { a: T, b: T },
    VelocityMinus { a: T, b: T },
    UpperBoundaryB { a: T, c: T },
    LowerBoundaryA { b: T, c: T },
    SymmetricArea { c: T },
}

impl<T: Real> Scenario<T> {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::VelocityPlus { .. } => ScenarioKind::VelocityPlus,
            Scenario::VelocityMinus { .. } => ScenarioKind::VelocityMinus,
            Scenario::UpperBoundaryB { .. } => ScenarioKind::UpperBoundaryB,
            Scenario::LowerBoundaryA { .. } => ScenarioKind::LowerBoundaryA,
            Scenario::SymmetricArea { .. } => ScenarioKind::SymmetricArea,
        }
    }

    /// Rebuilds a scenario from its tag and full parameter triple (the active entry is ignored).
    pub fn from_kind(kind: ScenarioKind, a: T, b: T, c: T) -> Self {
        match kind {
            ScenarioKind::VelocityPlus => Scenario::VelocityPlus { a, b },
            ScenarioKind::VelocityMinus => Scenario::VelocityMinus { a, b },
            ScenarioKind::UpperBoundaryB => Scenario::UpperBoundaryB { a, c },
            ScenarioKind::LowerBoundaryA => Scenario::LowerBoundaryA { b, c },
            ScenarioKind::SymmetricArea => Scenario::SymmetricArea { c },
        }
    }

    pub fn validate(&self) -> Result<(), BifurcationError> {
        let finite = |xs: &[T]| xs.iter().all(|x| x.is_finite());
        match *self {
            Scenario::VelocityPlus { a, b } | Scenario::VelocityMinus { a, b } => {
                if !finite(&[a, b]) || !(a < b) {
                    return Err(BifurcationError::InvalidScenario(format!(
                        "velocity scenario needs finite a < b, got a={}, b={}",
                        to_f64(a),
                        to_f64(b)
                    )));
                }
            }
            Scenario::UpperBoundaryB { a, c } | Scenario::LowerBoundaryA { b: a, c } => {
                if !finite(&[a, c]) {
                    return Err(BifurcationError::InvalidScenario("non-finite parameter".into()));
                }
            }
            Scenario::SymmetricArea { c } => {
                if !c.is_finite() || c.is_zero() {
                    return Err(BifurcationError::InvalidScenario(format!(
                        "symmetric scenario needs a finite nonzero speed c, got c={}",
                        to_f64(c)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Strip parameters when the active parameter equals `lambda` (not validated).
    pub fn params_at(&self, lambda: T) -> StripParams<T> {
        match *self {
            Scenario::VelocityPlus { a, b } | Scenario::VelocityMinus { a, b } => StripParams { a, b, c: lambda },
            Scenario::UpperBoundaryB { a, c } => StripParams { a, b: lambda, c },
            Scenario::LowerBoundaryA { b, c } => StripParams { a: lambda, b, c },
            Scenario::SymmetricArea { c } => StripParams { a: -lambda, b: lambda, c },
        }
    }

    /// `∂(a, b, c)/∂λ`.
    pub fn direction(&self) -> ParamDirection<T> {
        let (o, z) = (T::one(), T::zero());
        match self {
            Scenario::VelocityPlus { .. } | Scenario::VelocityMinus { .. } => ParamDirection { da: z, db: z, dc: o },
            Scenario::UpperBoundaryB { .. } => ParamDirection { da: z, db: o, dc: z },
            Scenario::LowerBoundaryA { .. } => ParamDirection { da: o, db: z, dc: z },
            Scenario::SymmetricArea { .. } => ParamDirection { da: -o, db: o, dc: z },
        }
    }

    pub fn admissible_modes(&self) -> ModeSet {
        let inv_2pi = T::one() / T::two_pi();
        match *self {
            Scenario::VelocityPlus { .. } | Scenario::VelocityMinus { .. } => ModeSet::From(1),
            Scenario::UpperBoundaryB { a, c } => one_sided(a - c, inv_2pi),
            Scenario::LowerBoundaryA { b, c } => one_sided(c - b, inv_2pi),
            Scenario::SymmetricArea { c } if c.is_zero() => ModeSet::Empty,
            Scenario::SymmetricArea { c } => ModeSet::From(n1(c)),
        }
    }

    /// Critical value of the active parameter for mode `m`.
    pub fn critical_value(&self, m: usize) -> Result<T, BifurcationError> {
        self.validate()?;
        let modes = self.admissible_modes();
        if !modes.contains(m) {
            return Err(BifurcationError::Inadmissible { scenario: self.kind(), m, modes });
        }
        Ok(match *self {
            Scenario::VelocityPlus { a, b } => critical_velocity(a, b, m).0,
            Scenario::VelocityMinus { a, b } => critical_velocity(a, b, m).1,
            Scenario::UpperBoundaryB { a, c } => c + T::one() / (omega2::<T>(m) * (a - c)),
            Scenario::LowerBoundaryA { b, c } => c + T::one() / (omega2::<T>(m) * (b - c)),
            Scenario::SymmetricArea { c } => ((omega2::<T>(m) * c * c - T::one()) / omega2::<T>(m)).sqrt(),
        })
    }

    pub fn cast<U: Real>(&self) -> Scenario<U> {
        let f = |x: T| lit::<U>(to_f64(x));
        match *self {
            Scenario::VelocityPlus { a, b } => Scenario::VelocityPlus { a: f(a), b: f(b) },
            Scenario::VelocityMinus { a, b } => Scenario::VelocityMinus { a: f(a), b: f(b) },
            Scenario::UpperBoundaryB { a, c } => Scenario::UpperBoundaryB { a: f(a), c: f(c) },
            Scenario::LowerBoundaryA { b, c } => Scenario::LowerBoundaryA { b: f(b), c: f(c) },
            Scenario::SymmetricArea { c } => Scenario::SymmetricArea { c: f(c) },
        }
    }
}

/// Modes keeping the critical boundary level on the correct side of the frozen one; `p` is
/// `a − c` for the upper boundary and `c − b` for the lower one.
fn one_sided<T: Real>(p: T, inv_2pi: T) -> ModeSet {
    if p.is_zero() {
        ModeSet::Empty
    } else if p < T::zero() {
        ModeSet::From(n1(p))
    } else if p < inv_2pi {
        ModeSet::UpTo(n2(p))
    } else {
        ModeSet::Empty
    }
}

/// Admissible symmetries `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeSet {
    /// Every `m ≥ M₀`.
    From(usize),
    /// `1 ≤ m ≤ M₁`.
    UpTo(usize),
    Empty,
}

impl ModeSet {
    pub fn contains(&self, m: usize) -> bool {
        match *self {
            ModeSet::From(m0) => m >= m0.max(1),
            ModeSet::UpTo(m1) => (1..=m1).contains(&m),
            ModeSet::Empty => false,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ModeSet::Empty | ModeSet::UpTo(0))
    }

    /// Admissible modes inside `lo..=hi`.
    pub fn within(&self, lo: usize, hi: usize) -> Vec<usize> {
        (lo.max(1)..=hi).filter(|&m| self.contains(m)).collect()
    }
}

impl fmt::Display for ModeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSet::From(m0) => write!(f, "m >= {m0}"),
            ModeSet::UpTo(m1) if *m1 >= 1 => write!(f, "1 <= m <= {m1}"),
            _ => f.write_str("none"),
        }
    }
}

/// `N₂(p) = ⌊1/(2π|p|)⌋`.
pub fn n2<T: Real>(p: T) -> usize {
    let v = (T::one() / (T::two_pi() * p.abs())).floor();
    to_f64(v) as usize
}

/// `N₁(p) = 1 + N₂(p)`.
pub fn n1<T: Real>(p: T) -> usize {
    n2(p).saturating_add(1)
}

fn omega<T: Real>(m: usize) -> T {
    T::two_pi() * from_usize::<T>(m)
}

/// `4π²m²`.
fn omega2<T: Real>(m: usize) -> T {
    omega::<T>(m).powi(2)
}

/// `Δ_j = 4π²j²(b−c)(a−c) − 1`, the determinant of `M_j`.
pub fn determinant<T: Real>(j: usize, p: &StripParams<T>) -> T {
    omega2::<T>(j) * (p.b - p.c) * (p.a - p.c) - T::one()
}

/// Determinant on the symmetric strip `(−a, a)`: `−4π²j²(a²−c²) − 1`.
pub fn determinant_symmetric<T: Real>(j: usize, a: T, c: T) -> T {
    -omega2::<T>(j) * (a * a - c * c) - T::one()
}

/// `(c⁺_m, c⁻_m) = (a+b)/2 ± sqrt((π²m²(b−a)²+1)/(4π²m²))`.
pub fn critical_velocity<T: Real>(a: T, b: T, m: usize) -> (T, T) {
    let mid = (a + b) * lit::<T>(0.5);
    let pm = T::pi() * from_usize::<T>(m);
    let r = ((pm * pm * (b - a).powi(2) + T::one()) / omega2::<T>(m)).sqrt();
    (mid + r, mid - r)
}

pub fn critical_b<T: Real>(a: T, c: T, m: usize) -> Result<T, BifurcationError> {
    Scenario::UpperBoundaryB { a, c }.critical_value(m)
}

pub fn critical_a<T: Real>(b: T, c: T, m: usize) -> Result<T, BifurcationError> {
    Scenario::LowerBoundaryA { b, c }.critical_value(m)
}

pub fn critical_a_symmetric<T: Real>(c: T, m: usize) -> Result<T, BifurcationError> {
    Scenario::SymmetricArea { c }.critical_value(m)
}

/// `h₁(x) = 4x⁶ − 3x⁵ − 2x³ − 3x`.
pub fn h1<T: Real>(x: T) -> T {
    let k = |v: f64| lit::<T>(v);
    x * (((((k(4.0) * x - k(3.0)) * x) * x - k(2.0)) * x) * x - k(3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Supercritical,
    Subcritical,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Supercritical => "supercritical",
            Direction::Subcritical => "subcritical",
        })
    }
}

/// A simple bifurcation point of the trivial line with its local data.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationPoint<T> {
    pub scenario: Scenario<T>,
    pub m: usize,
    /// Critical value of the active parameter.
    pub lambda: T,
    pub params: StripParams<T>,
    /// Kernel amplitudes: the kernel function is `(κ₊, κ₋) cos(2πmx)`.
    pub kernel: (T, T),
    /// Cokernel amplitudes: `(g₊, g₋) sin(2πmx)` spans the complement of the range.
    pub cokernel: (T, T),
    pub transversality: T,
    /// `λ''(0)` along the bifurcating curve.
    pub shi_second: T,
    pub direction: Direction,
}

impl<T: Real> BifurcationPoint<T> {
    pub fn kind(&self) -> ScenarioKind {
        self.scenario.kind()
    }

    /// Kernel function on a grid with symmetry `m`.
    pub fn kernel_profile(&self, n: usize) -> Result<ProfilePair<T>, BifurcationError> {
        let grid = self.grid(n)?;
        Ok(ProfilePair::first_harmonic(grid, self.kernel.0, self.kernel.1))
    }

    pub fn cokernel_residual(&self, n: usize) -> Result<ResidualPair<T>, BifurcationError> {
        let grid = self.grid(n)?;
        Ok(ResidualPair::first_harmonic(grid, self.cokernel.0, self.cokernel.1))
    }

    pub fn grid(&self, n: usize) -> Result<ModeGrid, BifurcationError> {
        ModeGrid::new(self.m, n).map_err(|e| BifurcationError::Model(e.into()))
    }

    /// One CSV row `scenario,m,critical_value,transversality,shi_second,direction`.
    pub fn csv_row(&self) -> String {
        use crate::format::csv;
        format!(
            "{},{},{},{},{},{}",
            self.kind(),
            self.m,
            csv(to_f64(self.lambda)),
            csv(to_f64(self.transversality)),
            csv(to_f64(self.shi_second)),
            self.direction
        )
    }
}

pub const TABLE_HEADER: &str = "scenario,m,critical_value,transversality,shi_second,direction";

/// `(β_m, γ_m)` at the critical parameters, with the symmetric sign convention applied.
fn beta_gamma<T: Real>(scenario: &Scenario<T>, m: usize, p: &StripParams<T>) -> (T, T) {
    let mm = ModeMatrix::new(m, p);
    match scenario {
        Scenario::SymmetricArea { .. } => (-mm.beta, -mm.gamma),
        _ => (mm.beta, mm.gamma),
    }
}

/// Kernel amplitudes `(β_m, −γ_m)`; on the symmetric strip `(2πm(a+c)+γ̃, γ̃)`.
pub fn kernel_vector<T: Real>(point: &BifurcationPoint<T>) -> (T, T) {
    let (beta, gamma) = beta_gamma(&point.scenario, point.m, &point.params);
    (beta, -gamma)
}

/// Cokernel amplitudes `(β_m, γ_m)`; on the symmetric strip `(2πm(a+c)+γ̃, −γ̃)`.
pub fn cokernel_vector<T: Real>(point: &BifurcationPoint<T>) -> (T, T) {
    beta_gamma(&point.scenario, point.m, &point.params)
}

/// Closed-form `⟨∂λ dF[ř₀], g₀⟩`.
pub fn transversality<T: Real>(point: &BifurcationPoint<T>) -> T {
    transversality_at(&point.scenario, point.m, &point.params)
}

fn transversality_at<T: Real>(scenario: &Scenario<T>, m: usize, p: &StripParams<T>) -> T {
    let k = |v: f64| lit::<T>(v);
    let mm = from_usize::<T>(m);
    let pi = T::pi();
    let w2 = omega2::<T>(m);
    let (a, b, c) = (p.a, p.b, p.c);
    match scenario {
        Scenario::VelocityPlus { .. } | Scenario::VelocityMinus { .. } => {
            omega::<T>(m) * (a - c) * (k(2.0) * (pi * mm).powi(2) * (a - c) - T::one() / (b - a))
        }
        Scenario::UpperBoundaryB { .. } => {
            pi * mm * (a - c).powi(2) / (b - a).powi(2) * (T::one() - w2 * (a - c).powi(2))
        }
        Scenario::LowerBoundaryA { .. } => {
            (w2 * (b - c).powi(2) - T::one()) / (k(16.0) * (pi * mm).powi(3) * (b - c).powi(2) * (b - a).powi(2))
        }
        // the strip is (−λ, λ), so b is the half-width
        Scenario::SymmetricArea { .. } => -k(4.0) * (pi * mm).powi(3) * (c + b).powi(2),
    }
}

/// `⟨∂λ dF[ř₀], g₀⟩` assembled from the model's parameter derivative.
pub fn transversality_assembled<T: Real>(point: &BifurcationPoint<T>) -> Result<T, BifurcationError> {
    let r0 = point.kernel_profile(1)?;
    let g0 = point.cokernel_residual(1)?;
    let d = model::param_derivative(&point.params, &r0, &point.scenario.direction())?;
    Ok(inner_product(&d, &g0).map_err(ModelError::from)?)
}

/// Amplitudes of `θ₀ = 2πm M_{2m}⁻¹ (κ₊², κ₋²) cos(4πmx)`, solving `dF(0)[θ₀] = d²F(0)[ř₀, ř₀]`.
pub fn theta0_amplitudes<T: Real>(point: &BifurcationPoint<T>) -> (T, T) {
    let (kp, km) = point.kernel;
    let (tp, tm) = ModeMatrix::new(2 * point.m, &point.params).solve((kp * kp, km * km));
    let w = omega::<T>(point.m);
    (w * tp, w * tm)
}

/// `θ₀` on a grid with `n ≥ 2` harmonics.
pub fn theta0<T: Real>(point: &BifurcationPoint<T>, n: usize) -> Result<ProfilePair<T>, BifurcationError> {
    let grid = point.grid(n.max(2))?;
    let (tp, tm) = theta0_amplitudes(point);
    Ok(ProfilePair::new(
        crate::spectral::CosineSeries::single(grid, 2, tp),
        crate::spectral::CosineSeries::single(grid, 2, tm),
    )
    .map_err(ModelError::from)?)
}

/// Direct assembly of `⟨d²F(0)[ř₀, θ₀], g₀⟩` on three harmonics.
pub fn pitchfork_numerator<T: Real>(point: &BifurcationPoint<T>) -> Result<T, BifurcationError> {
    let r0 = point.kernel_profile(3)?;
    let th = theta0(point, 3)?;
    let g0 = point.cokernel_residual(3)?;
    let d2 = model::second_diff(&r0, &th)?;
    Ok(inner_product(&d2, &g0).map_err(ModelError::from)?)
}

/// `λ''(0) = ⟨d²F(0)[ř₀, θ₀], g₀⟩ / ⟨∂λ dF[ř₀], g₀⟩`.
pub fn shi_second_derivative<T: Real>(point: &BifurcationPoint<T>) -> Result<T, BifurcationError> {
    let t = transversality(point);
    if t.is_zero() || !t.is_finite() {
        return Err(BifurcationError::Degenerate);
    }
    Ok(pitchfork_numerator(point)? / t)
}

fn poly<T: Real>(x: T, coeffs_high_first: &[f64]) -> T {
    coeffs_high_first.iter().fold(T::zero(), |acc, &c| acc * x + lit::<T>(c))
}

/// `16w² + 21w + 6`: its square equals `B² − A²(1+y²)` (velocity, `w = y²`) and
/// `(D² − C²a²)/Y²` (symmetric), which turns the subtractive branches into sums.
fn conjugate_factor<T: Real>(w: T) -> T {
    poly(w, &[16.0, 21.0, 6.0])
}

/// Velocity polynomials `A`, `B` of `y = πz(b−a)`.
pub(crate) fn velocity_ab<T: Real>(y: T) -> (T, T) {
    let y2 = y * y;
    (y * poly(y2, &[128.0, 232.0, 132.0, 24.0]), poly(y2, &[128.0, 296.0, 232.0, 69.0, 6.0]))
}

/// `f^±(z, a, b)`. The minus branch is evaluated in conjugate form,
/// `(B − A√(1+y²)) = (16y⁴+21y²+6)² / (B + A√(1+y²))`, which is free of cancellation.
pub fn f_velocity<T: Real>(z: T, a: T, b: T, plus: bool) -> T {
    let pi = T::pi();
    let y = pi * z * (b - a);
    let (ca, cb) = velocity_ab(y);
    let root = (y * y + T::one()).sqrt();
    let num = if plus { ca * root + cb } else { conjugate_factor(y * y).powi(2) / (cb + ca * root) };
    num / (lit::<T>(4.0) * y.powi(3))
}

/// Literal `(±A√(π²z²(b−a)²+1) + B)/(4π³z³(b−a)³)`, kept as a reference for the minus branch.
#[cfg(test)]
fn f_velocity_literal<T: Real>(z: T, a: T, b: T, plus: bool) -> T {
    let y = T::pi() * z * (b - a);
    let (ca, cb) = velocity_ab(y);
    let root = (y * y + T::one()).sqrt();
    let s = if plus { T::one() } else { -T::one() };
    (s * ca * root + cb) / (lit::<T>(4.0) * y.powi(3))
}

/// `(x−1)⁻²(h₁(x)+4) = 4x⁴ + 5x³ + 6x² + 5x + 4`.
fn h1_quotient<T: Real>(x: T) -> T {
    poly(x, &[4.0, 5.0, 6.0, 5.0, 4.0])
}

/// `h(z, a, c) = 4π³z³(a−c)³ (h₁(X)+4)/(1−X)⁵`, `X = 4π²z²(a−c)²`, with the double root of
/// `h₁ + 4` at `X = 1` divided out.
pub fn h_upper<T: Real>(z: T, a: T, c: T) -> T {
    let pz = T::pi() * z;
    let x = lit::<T>(4.0) * (pz * (a - c)).powi(2);
    lit::<T>(4.0) * (pz * (a - c)).powi(3) * h1_quotient(x) / (T::one() - x).powi(3)
}

/// `h̃(z, b, c) = (h₁(Y)+4)/(64π⁵z⁵(b−c)⁵(Y−1)⁵)`, `Y = 4π²z²(b−c)²`.
pub fn h_lower<T: Real>(z: T, b: T, c: T) -> T {
    let pz = T::pi() * z;
    let y = lit::<T>(4.0) * (pz * (b - c)).powi(2);
    h1_quotient(y) / (lit::<T>(64.0) * (pz * (b - c)).powi(5) * (y - T::one()).powi(3))
}

/// Symmetric polynomials `C(z, c)`, `D(z, c)`.
pub(crate) fn symmetric_cd<T: Real>(z: T, c: T) -> (T, T) {
    let x = T::pi() * z * c;
    let x2 = x * x;
    let cc = x * x * poly(x2, &[131072.0, -71680.0, 13056.0, -896.0, 16.0]) / c;
    let dd = poly(x2, &[131072.0, -88064.0, 20992.0, -2096.0, 80.0, -1.0]);
    (cc, dd)
}

/// `f(z, c) = (C a_z(c) + D)/(128π⁵z⁵a_z(c)⁵)`. For `c < 0` the sum `Ca + D` cancels; it is
/// evaluated as `Y²(16Y²+21Y+6)²/(D − Ca)` with `Y = 4π²z²c² − 1`.
pub fn f_symmetric<T: Real>(z: T, c: T) -> T {
    let pz = T::pi() * z;
    let y = lit::<T>(4.0) * (pz * c).powi(2) - T::one();
    let az = y.sqrt() / (T::two_pi() * z);
    let (cc, dd) = symmetric_cd(z, c);
    let num = if c > T::zero() { cc * az + dd } else { (y * conjugate_factor(y)).powi(2) / (dd - cc * az) };
    num / (lit::<T>(128.0) * (pz * az).powi(5))
}

#[cfg(test)]
fn f_symmetric_literal<T: Real>(z: T, c: T) -> T {
    let pz = T::pi() * z;
    let az = ((lit::<T>(4.0) * (pz * c).powi(2) - T::one()) / (T::two_pi() * z).powi(2)).sqrt();
    let (cc, dd) = symmetric_cd(z, c);
    (cc * az + dd) / (lit::<T>(128.0) * (pz * az).powi(5))
}

/// Closed-form pitchfork polynomial of the point's scenario; equals
/// `3/(π²m²) · ⟨d²F(0)[ř₀, θ₀], g₀⟩`.
pub fn closed_form_pitchfork<T: Real>(point: &BifurcationPoint<T>) -> T {
    let z = from_usize::<T>(point.m);
    match point.scenario {
        Scenario::VelocityPlus { a, b } => f_velocity(z, a, b, true),
        Scenario::VelocityMinus { a, b } => f_velocity(z, a, b, false),
        Scenario::UpperBoundaryB { a, c } => h_upper(z, a, c),
        Scenario::LowerBoundaryA { b, c } => h_lower(z, b, c),
        Scenario::SymmetricArea { c } => f_symmetric(z, c),
    }
}

/// `(π²m²/3)·closed_form_pitchfork`, the value the direct numerator must reproduce.
pub fn closed_form_numerator<T: Real>(point: &BifurcationPoint<T>) -> T {
    (T::pi() * from_usize::<T>(point.m)).powi(2) / lit::<T>(3.0) * closed_form_pitchfork(point)
}

/// Relative tolerance of the internal direct-vs-closed-form check.
pub const CROSS_CHECK_TOL: f64 = 1e-9;

fn assemble<T: Real>(scenario: Scenario<T>, m: usize) -> Result<BifurcationPoint<T>, BifurcationError> {
    let lambda = scenario.critical_value(m)?;
    let params = scenario.params_at(lambda);
    params.validate()?;
    let mut point = BifurcationPoint {
        scenario,
        m,
        lambda,
        params,
        kernel: (T::zero(), T::zero()),
        cokernel: (T::zero(), T::zero()),
        transversality: T::zero(),
        shi_second: T::zero(),
        direction: Direction::Subcritical,
    };
    point.kernel = kernel_vector(&point);
    point.cokernel = cokernel_vector(&point);
    point.transversality = transversality(&point);
    point.shi_second = shi_second_derivative(&point)?;
    point.direction = if point.shi_second > T::zero() { Direction::Supercritical } else { Direction::Subcritical };
    Ok(point)
}

/// Builds the bifurcation point of `scenario` at mode `m`, cross-checking the assembled
/// second-order coefficient against the closed-form polynomial (in double precision).
pub fn build_point<T: Real>(scenario: Scenario<T>, m: usize) -> Result<BifurcationPoint<T>, BifurcationError> {
    let point = assemble(scenario, m)?;
    let check = assemble(scenario.cast::<f64>(), m)?;
    let direct = pitchfork_numerator(&check)?;
    let closed = closed_form_numerator(&check);
    if !((direct - closed).abs() <= CROSS_CHECK_TOL * closed.abs()) {
        return Err(BifurcationError::CrossValidation { direct, closed });
    }
    Ok(point)
}

/// All points of `scenario` with admissible `m` in `m_min..=m_max`.
pub fn table<T: Real>(scenario: Scenario<T>, m_min: usize, m_max: usize) -> Result<Vec<BifurcationPoint<T>>, BifurcationError> {
    scenario.validate()?;
    scenario.admissible_modes().within(m_min, m_max).into_iter().map(|m| build_point(scenario, m)).collect()
}
