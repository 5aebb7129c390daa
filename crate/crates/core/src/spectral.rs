//! Truncated real Fourier series on the unit torus.
//!
//! Profiles live in m-symmetric cosine series (harmonics `m, 2m, .., Nm`), residuals in the
//! matching sine series. Products are exact convolutions evaluated up to harmonic `2N` and
//! then truncated; the discarded tail and the constant mode are returned next to the result.

use std::fmt;
use std::marker::PhantomData;

use nalgebra::DVector;
use thiserror::Error;

use crate::scalar::{from_usize, lit, Real};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpectralError {
    #[error("invalid mode grid: need m >= 1 and N >= 1, got m={m}, N={n}")]
    InvalidGrid { m: usize, n: usize },
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: ModeGrid, right: ModeGrid },
    #[error("expected {expected} coefficients, got {got}")]
    Length { expected: usize, got: usize },
    #[error("{samples} samples requested, at least {min} (4N) required")]
    TooFewSamples { samples: usize, min: usize },
}

/// Symmetry `m` and truncation `N`: coefficients sit on frequencies `2πjm`, `j = 1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeGrid {
    m: usize,
    n: usize,
}

impl ModeGrid {
    pub fn new(m: usize, n: usize) -> Result<Self, SpectralError> {
        if m == 0 || n == 0 {
            return Err(SpectralError::InvalidGrid { m, n });
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Angular frequency `2πjm` of harmonic `j`.
    pub fn frequency<T: Real>(&self, j: usize) -> T {
        T::two_pi() * from_usize::<T>(j * self.m)
    }

    fn check(&self, other: &ModeGrid) -> Result<(), SpectralError> {
        if self == other {
            Ok(())
        } else {
            Err(SpectralError::GridMismatch { left: *self, right: *other })
        }
    }
}

impl fmt::Display for ModeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(m={}, N={})", self.m, self.n)
    }
}

/// Trigonometric basis marker of a [`Series`].
pub trait Basis: Copy + Default + fmt::Debug + PartialEq + Send + Sync + 'static {
    fn eval<T: Real>(theta: T) -> T;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cos;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Sin;

impl Basis for Cos {
    fn eval<T: Real>(theta: T) -> T {
        theta.cos()
    }
}

impl Basis for Sin {
    fn eval<T: Real>(theta: T) -> T {
        theta.sin()
    }
}

/// Zero-mean series `Σ_j u_j φ(2πjm x)` with `φ` the basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T, B> {
    grid: ModeGrid,
    coeffs: Vec<T>,
    basis: PhantomData<B>,
}

pub type CosineSeries<T> = Series<T, Cos>;
pub type SineSeries<T> = Series<T, Sin>;

impl<T: Real, B: Basis> Series<T, B> {
    pub fn zeros(grid: ModeGrid) -> Self {
        Self { grid, coeffs: vec![T::zero(); grid.n], basis: PhantomData }
    }

    /// `coeffs[j - 1]` is the coefficient of harmonic `j`.
    pub fn from_coeffs(grid: ModeGrid, coeffs: Vec<T>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.n {
            return Err(SpectralError::Length { expected: grid.n, got: coeffs.len() });
        }
        Ok(Self { grid, coeffs, basis: PhantomData })
    }

    /// Series with a single nonzero harmonic.
    pub fn single(grid: ModeGrid, j: usize, value: T) -> Self {
        let mut s = Self::zeros(grid);
        if (1..=grid.n).contains(&j) {
            s.coeffs[j - 1] = value;
        }
        s
    }

    pub fn grid(&self) -> ModeGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Coefficient of harmonic `j` (1-based); zero outside `1..=N`.
    pub fn coeff(&self, j: usize) -> T {
        if (1..=self.grid.n).contains(&j) {
            self.coeffs[j - 1]
        } else {
            T::zero()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn evaluate(&self, x: T) -> T {
        let base = self.grid.frequency::<T>(1) * x;
        self.coeffs
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &c)| acc + c * B::eval(base * from_usize::<T>(i + 1)))
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|c| c * k)
    }

    pub fn add(&self, other: &Self) -> Result<Self, SpectralError> {
        self.zip(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SpectralError> {
        self.zip(other, |x, y| x - y)
    }

    /// Plain ℓ² norm of the coefficient array.
    pub fn l2_norm(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt()
    }

    /// Sobolev-analytic norm `(Σ_j (2πj)^{2s} u_j² e^{4πσj})^{1/2}`, `j` counting harmonics.
    ///
    /// Accumulated in log space so large `σ` does not overflow before the final result.
    pub fn norm_s_sigma(&self, s: T, sigma: T) -> T {
        let logs: Vec<T> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, &c)| {
                let j = from_usize::<T>(i + 1);
                lit::<T>(2.0) * (s * (T::two_pi() * j).ln() + c.abs().ln())
                    + lit::<T>(2.0) * T::two_pi() * sigma * j
            })
            .collect();
        let Some(top) = logs.iter().copied().reduce(|a, b| a.max(b)) else {
            return T::zero();
        };
        let sum = logs.iter().fold(T::zero(), |acc, &l| acc + (l - top).exp());
        ((top + sum.ln()) * lit::<T>(0.5)).exp()
    }

    /// Sampled `min_x |u(x) + offset|` over `samples` uniform points of `[0, 1)`.
    pub fn min_abs_offset(&self, offset: T, samples: usize) -> Result<T, SpectralError> {
        let min = 4 * self.grid.n;
        if samples < min {
            return Err(SpectralError::TooFewSamples { samples, min });
        }
        let h = T::one() / from_usize::<T>(samples);
        Ok((0..samples)
            .map(|i| (self.evaluate(h * from_usize::<T>(i)) + offset).abs())
            .reduce(|a, b| a.min(b))
            .unwrap_or_else(|| offset.abs()))
    }

    pub(crate) fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, coeffs: self.coeffs.iter().map(|&c| f(c)).collect(), basis: PhantomData }
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, SpectralError> {
        self.grid.check(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&x, &y)| f(x, y)).collect(),
            basis: PhantomData,
        })
    }

    fn with_coeffs<C: Basis>(&self, f: impl Fn(usize, T) -> T) -> Series<T, C> {
        Series {
            grid: self.grid,
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| f(i + 1, c)).collect(),
            basis: PhantomData,
        }
    }
}

impl<T: Real> CosineSeries<T> {
    /// `∂x cos(ωx) = −ω sin(ωx)`.
    pub fn differentiate(&self) -> SineSeries<T> {
        let g = self.grid;
        self.with_coeffs(|j, c| -g.frequency::<T>(j) * c)
    }

    /// `∂x⁻¹ cos(ωx) = sin(ωx)/ω`.
    pub fn antiderivative(&self) -> SineSeries<T> {
        let g = self.grid;
        self.with_coeffs(|j, c| c / g.frequency::<T>(j))
    }

    pub fn mul_cos(&self, other: &CosineSeries<T>) -> Result<Product<T, Cos>, SpectralError> {
        self.grid.check(&other.grid)?;
        Ok(Product::truncate(self.grid, convolve(&self.coeffs, &other.coeffs, Kind::CosCos)))
    }

    pub fn mul_sin(&self, other: &SineSeries<T>) -> Result<Product<T, Sin>, SpectralError> {
        other.mul_cos(self)
    }
}

impl<T: Real> SineSeries<T> {
    /// `∂x sin(ωx) = ω cos(ωx)`.
    pub fn differentiate(&self) -> CosineSeries<T> {
        let g = self.grid;
        self.with_coeffs(|j, c| g.frequency::<T>(j) * c)
    }

    /// `∂x⁻¹ sin(ωx) = −cos(ωx)/ω`.
    pub fn antiderivative(&self) -> CosineSeries<T> {
        let g = self.grid;
        self.with_coeffs(|j, c| -c / g.frequency::<T>(j))
    }

    pub fn mul_cos(&self, other: &CosineSeries<T>) -> Result<Product<T, Sin>, SpectralError> {
        self.grid.check(&other.grid)?;
        Ok(Product::truncate(self.grid, convolve(&self.coeffs, &other.coeffs, Kind::SinCos)))
    }

    pub fn mul_sin(&self, other: &SineSeries<T>) -> Result<Product<T, Cos>, SpectralError> {
        self.grid.check(&other.grid)?;
        Ok(Product::truncate(self.grid, convolve(&self.coeffs, &other.coeffs, Kind::SinSin)))
    }
}

/// Truncated product together with what the truncation removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Product<T, B> {
    pub series: Series<T, B>,
    /// Constant mode of the exact product (always zero for sine-valued products).
    pub mean: T,
    /// ℓ² size of the coefficients on harmonics `N+1..=2N`.
    pub tail: T,
}

impl<T: Real, B: Basis> Product<T, B> {
    fn truncate(grid: ModeGrid, full: Vec<T>) -> Self {
        let (mean, coeffs, tail) = split_full(full, grid.n);
        Self { series: Series { grid, coeffs, basis: PhantomData }, mean, tail }
    }
}

fn split_full<T: Real>(full: Vec<T>, n: usize) -> (T, Vec<T>, T) {
    let tail = full[n + 1..].iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt();
    (full[0], full[1..=n].to_vec(), tail)
}

#[derive(Clone, Copy)]
enum Kind {
    CosCos,
    SinCos,
    SinSin,
}

/// Exact product of two trigonometric polynomials with harmonics `1..=N`; the returned
/// array holds harmonics `0..=2N` of the result in the basis implied by `kind`.
fn convolve<T: Real>(u: &[T], v: &[T], kind: Kind) -> Vec<T> {
    let n = u.len().max(v.len());
    let mut out = vec![T::zero(); 2 * n + 1];
    let half = lit::<T>(0.5);
    for (i, &ui) in u.iter().enumerate() {
        if ui.is_zero() {
            continue;
        }
        let j = i + 1;
        for (l, &vl) in v.iter().enumerate() {
            if vl.is_zero() {
                continue;
            }
            let k = l + 1;
            let w = half * ui * vl;
            match kind {
                // cos j cos k = ½[cos(j+k) + cos(j−k)]
                Kind::CosCos => {
                    out[j + k] += w;
                    out[j.abs_diff(k)] += w;
                }
                // sin j cos k = ½[sin(j+k) + sin(j−k)]
                Kind::SinCos => {
                    out[j + k] += w;
                    if j > k {
                        out[j - k] += w;
                    } else if k > j {
                        out[k - j] -= w;
                    }
                }
                // sin j sin k = ½[cos(j−k) − cos(j+k)]
                Kind::SinSin => {
                    out[j.abs_diff(k)] += w;
                    out[j + k] -= w;
                }
            }
        }
    }
    out
}

macro_rules! pair_type {
    ($(#[$doc:meta])* $name:ident, $basis:ty) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<T> {
            pub plus: Series<T, $basis>,
            pub minus: Series<T, $basis>,
        }

        impl<T: Real> $name<T> {
            pub fn new(plus: Series<T, $basis>, minus: Series<T, $basis>) -> Result<Self, SpectralError> {
                plus.grid.check(&minus.grid)?;
                Ok(Self { plus, minus })
            }

            pub fn zeros(grid: ModeGrid) -> Self {
                Self { plus: Series::zeros(grid), minus: Series::zeros(grid) }
            }

            /// Both components on harmonic 1 only.
            pub fn first_harmonic(grid: ModeGrid, plus: T, minus: T) -> Self {
                Self { plus: Series::single(grid, 1, plus), minus: Series::single(grid, 1, minus) }
            }

            pub fn grid(&self) -> ModeGrid {
                self.plus.grid
            }

            /// Stacked coefficients `[plus_1..plus_N, minus_1..minus_N]`.
            pub fn to_vector(&self) -> DVector<T> {
                DVector::from_iterator(
                    2 * self.grid().n,
                    self.plus.coeffs.iter().chain(&self.minus.coeffs).copied(),
                )
            }

            pub fn from_vector(grid: ModeGrid, v: &DVector<T>) -> Result<Self, SpectralError> {
                let n = grid.n;
                if v.len() != 2 * n {
                    return Err(SpectralError::Length { expected: 2 * n, got: v.len() });
                }
                Ok(Self {
                    plus: Series::from_coeffs(grid, v.rows(0, n).iter().copied().collect())?,
                    minus: Series::from_coeffs(grid, v.rows(n, n).iter().copied().collect())?,
                })
            }

            pub fn scale(&self, k: T) -> Self {
                Self { plus: self.plus.scale(k), minus: self.minus.scale(k) }
            }

            pub fn add(&self, other: &Self) -> Result<Self, SpectralError> {
                Ok(Self { plus: self.plus.add(&other.plus)?, minus: self.minus.add(&other.minus)? })
            }

            pub fn sub(&self, other: &Self) -> Result<Self, SpectralError> {
                Ok(Self { plus: self.plus.sub(&other.plus)?, minus: self.minus.sub(&other.minus)? })
            }

            /// ℓ² norm of the stacked coefficients.
            pub fn l2_norm(&self) -> T {
                (self.plus.l2_norm().powi(2) + self.minus.l2_norm().powi(2)).sqrt()
            }

            /// Sum of the componentwise analytic norms.
            pub fn norm_s_sigma(&self, s: T, sigma: T) -> T {
                self.plus.norm_s_sigma(s, sigma) + self.minus.norm_s_sigma(s, sigma)
            }

            pub fn is_zero(&self) -> bool {
                self.plus.is_zero() && self.minus.is_zero()
            }
        }
    };
}

pair_type!(
    /// Boundary profiles `(ř₊, ř₋)` as cosine series on a shared grid.
    ProfilePair,
    Cos
);
pair_type!(
    /// Residual values `(F₊, F₋)` as sine series on a shared grid.
    ResidualPair,
    Sin
);

/// `⟨g, g̃⟩ = ½ Σ_j (g⁺_j g̃⁺_j + g⁻_j g̃⁻_j)`, the L² pairing on the torus.
pub fn inner_product<T: Real>(g: &ResidualPair<T>, h: &ResidualPair<T>) -> Result<T, SpectralError> {
    g.grid().check(&h.grid())?;
    let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    Ok(lit::<T>(0.5) * (dot(&g.plus.coeffs, &h.plus.coeffs) + dot(&g.minus.coeffs, &h.minus.coeffs)))
}

/// Zero-mean real Fourier series with both cosine and sine parts on frequencies `2πk`,
/// `k = 1..=n_modes` (no symmetry assumed).
#[derive(Debug, Clone, PartialEq)]
pub struct Fourier<T> {
    pub cos: Vec<T>,
    pub sin: Vec<T>,
}

impl<T: Real> Fourier<T> {
    pub fn zeros(n_modes: usize) -> Self {
        Self { cos: vec![T::zero(); n_modes], sin: vec![T::zero(); n_modes] }
    }

    pub fn n_modes(&self) -> usize {
        self.cos.len()
    }

    fn freq(k: usize) -> T {
        T::two_pi() * from_usize::<T>(k)
    }

    pub fn differentiate(&self) -> Self {
        Self {
            cos: self.sin.iter().enumerate().map(|(i, &s)| Self::freq(i + 1) * s).collect(),
            sin: self.cos.iter().enumerate().map(|(i, &c)| -Self::freq(i + 1) * c).collect(),
        }
    }

    pub fn antiderivative(&self) -> Self {
        Self {
            cos: self.sin.iter().enumerate().map(|(i, &s)| -s / Self::freq(i + 1)).collect(),
            sin: self.cos.iter().enumerate().map(|(i, &c)| c / Self::freq(i + 1)).collect(),
        }
    }

    /// Exact product truncated back to `n_modes`.
    pub fn mul(&self, other: &Self) -> FourierProduct<T> {
        let n = self.n_modes();
        let cc = convolve(&self.cos, &other.cos, Kind::CosCos);
        let ss = convolve(&self.sin, &other.sin, Kind::SinSin);
        let sc = convolve(&self.sin, &other.cos, Kind::SinCos);
        let cs = convolve(&other.sin, &self.cos, Kind::SinCos);
        let cos: Vec<T> = cc.iter().zip(&ss).map(|(&x, &y)| x + y).collect();
        let sin: Vec<T> = sc.iter().zip(&cs).map(|(&x, &y)| x + y).collect();
        let (mean, cos, tail_c) = split_full(cos, n);
        let (_, sin, tail_s) = split_full(sin, n);
        FourierProduct {
            value: Self { cos, sin },
            mean,
            tail: (tail_c * tail_c + tail_s * tail_s).sqrt(),
        }
    }

    pub fn axpy(&self, k: T, other: &Self) -> Self {
        let f = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x + k * y).collect();
        Self { cos: f(&self.cos, &other.cos), sin: f(&self.sin, &other.sin) }
    }

    pub fn scale(&self, k: T) -> Self {
        Self { cos: self.cos.iter().map(|&c| c * k).collect(), sin: self.sin.iter().map(|&c| c * k).collect() }
    }

    pub fn evaluate(&self, x: T) -> T {
        (0..self.n_modes()).fold(T::zero(), |acc, i| {
            let th = Self::freq(i + 1) * x;
            acc + self.cos[i] * th.cos() + self.sin[i] * th.sin()
        })
    }

    /// Embeds an m-symmetric cosine series: harmonic `j` lands on mode `jm`.
    pub fn from_cosine(u: &CosineSeries<T>, n_modes: usize) -> Self {
        let mut out = Self::zeros(n_modes);
        let m = u.grid.m;
        for (i, &c) in u.coeffs.iter().enumerate() {
            if let Some(slot) = out.cos.get_mut((i + 1) * m - 1) {
                *slot = c;
            }
        }
        out
    }

    pub fn max_abs_coeff(&self) -> T {
        self.cos.iter().chain(&self.sin).fold(T::zero(), |a, &c| a.max(c.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierProduct<T> {
    pub value: Fourier<T>,
    pub mean: T,
    pub tail: T,
}

/// Time-dependent boundary perturbations `(r₊, r₋)` without any symmetry restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState<T> {
    pub plus: Fourier<T>,
    pub minus: Fourier<T>,
}

impl<T: Real> FullState<T> {
    pub fn zeros(n_modes: usize) -> Self {
        Self { plus: Fourier::zeros(n_modes), minus: Fourier::zeros(n_modes) }
    }

    pub fn n_modes(&self) -> usize {
        self.plus.n_modes()
    }

    pub fn cos_plus(&self) -> &[T] {
        &self.plus.cos
    }

    pub fn sin_plus(&self) -> &[T] {
        &self.plus.sin
    }

    pub fn cos_minus(&self) -> &[T] {
        &self.minus.cos
    }

    pub fn sin_minus(&self) -> &[T] {
        &self.minus.sin
    }

    pub fn from_profiles(r: &ProfilePair<T>, n_modes: usize) -> Self {
        Self { plus: Fourier::from_cosine(&r.plus, n_modes), minus: Fourier::from_cosine(&r.minus, n_modes) }
    }

    pub fn differentiate(&self) -> Self {
        Self { plus: self.plus.differentiate(), minus: self.minus.differentiate() }
    }

    pub fn antiderivative(&self) -> Self {
        Self { plus: self.plus.antiderivative(), minus: self.minus.antiderivative() }
    }

    pub fn axpy(&self, k: T, other: &Self) -> Self {
        Self { plus: self.plus.axpy(k, &other.plus), minus: self.minus.axpy(k, &other.minus) }
    }

    pub fn scale(&self, k: T) -> Self {
        Self { plus: self.plus.scale(k), minus: self.minus.scale(k) }
    }

    pub fn max_abs_coeff(&self) -> T {
        self.plus.max_abs_coeff().max(self.minus.max_abs_coeff())
    }
}
