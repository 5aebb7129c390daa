//! Traveling-wave residual, its differentials, the evolution right-hand side and
//! per-solution diagnostics.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectral::{CosineSeries, Fourier, FullState, ProfilePair, ResidualPair, SineSeries, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("degenerate strip: need a < b, got a={a}, b={b}")]
    DegenerateStrip { a: f64, b: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Flat strip levels `a < b` and traveling speed `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> StripParams<T> {
    pub fn new(a: T, b: T, c: T) -> Result<Self, ModelError> {
        let p = Self { a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        // written so that NaN levels are rejected too
        if self.a < self.b {
            Ok(())
        } else {
            Err(ModelError::DegenerateStrip { a: to_f64(self.a), b: to_f64(self.b) })
        }
    }

    /// Coupling strength `1/(b−a)`.
    pub fn coupling(&self) -> T {
        T::one() / (self.b - self.a)
    }
}

/// Entries of the 2×2 Fourier block `M_j = [[α, −γ], [γ, β]]` at absolute frequency index `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Real> ModeMatrix<T> {
    pub fn new(j: usize, p: &StripParams<T>) -> Self {
        let w = T::two_pi() * from_usize::<T>(j);
        let gamma = T::one() / (w * (p.b - p.a));
        Self { alpha: w * (p.b - p.c) + gamma, beta: w * (p.a - p.c) - gamma, gamma }
    }

    pub fn det(&self) -> T {
        self.alpha * self.beta + self.gamma * self.gamma
    }

    pub fn apply(&self, v: (T, T)) -> (T, T) {
        (self.alpha * v.0 - self.gamma * v.1, self.gamma * v.0 + self.beta * v.1)
    }

    pub fn apply_transpose(&self, v: (T, T)) -> (T, T) {
        (self.alpha * v.0 + self.gamma * v.1, -self.gamma * v.0 + self.beta * v.1)
    }

    /// `M⁻¹ v` through the adjugate.
    pub fn solve(&self, v: (T, T)) -> (T, T) {
        let d = self.det();
        ((self.beta * v.0 + self.gamma * v.1) / d, (-self.gamma * v.0 + self.alpha * v.1) / d)
    }
}

/// Direction of a parameter change `(δa, δb, δc)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDirection<T> {
    pub da: T,
    pub db: T,
    pub dc: T,
}

/// `(ř + shift − c)∂ř` truncated, plus the truncation tail.
fn transport<T: Real>(r: &CosineSeries<T>, offset: T) -> Result<(SineSeries<T>, T), SpectralError> {
    let d = r.differentiate();
    let prod = r.mul_sin(&d)?;
    Ok((prod.series.add(&d.scale(offset))?, prod.tail))
}

/// `F(a, b, c; ř)` and the ℓ² size of the discarded product harmonics.
pub fn residual_with_tail<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>) -> Result<(ResidualPair<T>, T), ModelError> {
    p.validate()?;
    let coupling = r.plus.sub(&r.minus)?.antiderivative().scale(p.coupling());
    let (tp, tail_p) = transport(&r.plus, p.b - p.c)?;
    let (tm, tail_m) = transport(&r.minus, p.a - p.c)?;
    let f = ResidualPair::new(tp.sub(&coupling)?, tm.sub(&coupling)?)?;
    Ok((f, (tail_p * tail_p + tail_m * tail_m).sqrt()))
}

/// Traveling-wave residual `F₊ = (ř₊+b−c)∂ř₊ − ∂⁻¹(ř₊−ř₋)/(b−a)`, likewise `F₋` with `a`.
pub fn residual<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>) -> Result<ResidualPair<T>, ModelError> {
    residual_with_tail(p, r).map(|(f, _)| f)
}

/// Dense Jacobian `dF(ř)`: columns index `(h₊ cos coefficients, h₋ cos coefficients)`,
/// rows `(F₊ sin coefficients, F₋ sin coefficients)`.
pub fn jacobian<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>) -> Result<DMatrix<T>, ModelError> {
    p.validate()?;
    let grid = r.grid();
    let n = grid.n();
    let k = p.coupling();
    let half = lit::<T>(0.5);
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for (block, prof, offset) in [(0, &r.plus, p.b - p.c), (n, &r.minus, p.a - p.c)] {
        // ∂x((ř + offset) cos_k) projected on sin_l
        for l in 1..=n {
            let w = grid.frequency::<T>(l);
            for col in 1..=n {
                let mut v = if l == col { offset } else { T::zero() };
                if l > col {
                    v += half * prof.coeff(l - col);
                }
                if col > l {
                    v += half * prof.coeff(col - l);
                }
                v += half * prof.coeff(l + col);
                jac[(block + l - 1, block + col - 1)] = -w * v;
            }
        }
    }
    for l in 1..=n {
        let g = k / grid.frequency::<T>(l);
        for row in [l - 1, n + l - 1] {
            jac[(row, l - 1)] -= g;
            jac[(row, n + l - 1)] += g;
        }
    }
    Ok(jac)
}

/// `∂λ F` for a parameter moving along `dir`; affine in `ř` and independent of `λ`, so it also
/// equals `∂λ dF(·)[ř]`.
pub fn param_derivative<T: Real>(
    p: &StripParams<T>,
    r: &ProfilePair<T>,
    dir: &ParamDirection<T>,
) -> Result<ResidualPair<T>, ModelError> {
    p.validate()?;
    let k = p.coupling();
    let w = r.plus.sub(&r.minus)?.antiderivative().scale((dir.db - dir.da) * k * k);
    let plus = r.plus.differentiate().scale(dir.db - dir.dc).add(&w)?;
    let minus = r.minus.differentiate().scale(dir.da - dir.dc).add(&w)?;
    Ok(ResidualPair::new(plus, minus)?)
}

/// Second differential `d²F[h, h₂] = (∂x(h₊h₂₊), ∂x(h₋h₂₋))`; the product's constant mode is
/// annihilated by the derivative.
pub fn second_diff<T: Real>(h: &ProfilePair<T>, h2: &ProfilePair<T>) -> Result<ResidualPair<T>, ModelError> {
    let plus = h.plus.mul_cos(&h2.plus)?.series.differentiate();
    let minus = h.minus.mul_cos(&h2.minus)?.series.differentiate();
    Ok(ResidualPair::new(plus, minus)?)
}

/// Result of [`time_rhs_detailed`].
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency<T> {
    pub rate: FullState<T>,
    /// Constant modes produced by the quadratic terms and dropped (analytically zero).
    pub dropped_mean: (T, T),
    pub tail: T,
}

fn advect<T: Real>(r: &Fourier<T>, shift: T) -> (Fourier<T>, T, T) {
    let d = r.differentiate();
    let prod = r.mul(&d);
    (prod.value.axpy(shift, &d), prod.mean, prod.tail)
}

/// `∂t r± = −(r± + shift±)∂x r± + ∂⁻¹(r₊ − r₋)/(b−a)` with `shift₊ = b`, `shift₋ = a`.
pub fn time_rhs_detailed<T: Real>(a: T, b: T, state: &FullState<T>) -> Result<Tendency<T>, ModelError> {
    let p = StripParams { a, b, c: T::zero() };
    p.validate()?;
    let coupling = state.plus.axpy(-T::one(), &state.minus).antiderivative().scale(p.coupling());
    let (ap, mean_p, tail_p) = advect(&state.plus, b);
    let (am, mean_m, tail_m) = advect(&state.minus, a);
    Ok(Tendency {
        rate: FullState { plus: coupling.axpy(-T::one(), &ap), minus: coupling.axpy(-T::one(), &am) },
        dropped_mean: (-mean_p, -mean_m),
        tail: (tail_p * tail_p + tail_m * tail_m).sqrt(),
    })
}

pub fn time_rhs<T: Real>(a: T, b: T, state: &FullState<T>) -> Result<FullState<T>, ModelError> {
    time_rhs_detailed(a, b, state).map(|t| t.rate)
}

/// Minimal distances to the alternatives of the global picture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitors<T> {
    /// `min |ř₊ − ř₋ + b − a|` (boundary collision).
    pub m_ab: T,
    /// `min |ř₊ + b − c|`.
    pub m_plus: T,
    /// `min |ř₋ + a − c|`.
    pub m_minus: T,
}

/// Default sample count for sampled minima and suprema: `4N`.
pub fn default_samples(n: usize) -> usize {
    4 * n
}

pub fn monitors<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>) -> Result<Monitors<T>, ModelError> {
    monitors_sampled(p, r, default_samples(r.grid().n()))
}

pub fn monitors_sampled<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>, samples: usize) -> Result<Monitors<T>, ModelError> {
    Ok(Monitors {
        m_ab: r.plus.sub(&r.minus)?.min_abs_offset(p.b - p.a, samples)?,
        m_plus: r.plus.min_abs_offset(p.b - p.c, samples)?,
        m_minus: r.minus.min_abs_offset(p.a - p.c, samples)?,
    })
}

/// Sampled `sup |(ř₋+a−c)∂ř₋ − (ř₊+b−c)∂ř₊|`, evaluated pointwise (no truncation).
pub fn qualitative_defect<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>) -> T {
    qualitative_defect_sampled(p, r, default_samples(r.grid().n()))
}

pub fn qualitative_defect_sampled<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>, samples: usize) -> T {
    let dp = r.plus.differentiate();
    let dm = r.minus.differentiate();
    let h = T::one() / from_usize::<T>(samples.max(1));
    (0..samples.max(1)).fold(T::zero(), |sup, i| {
        let x = h * from_usize::<T>(i);
        let lhs = (r.minus.evaluate(x) + p.a - p.c) * dm.evaluate(x);
        let rhs = (r.plus.evaluate(x) + p.b - p.c) * dp.evaluate(x);
        sup.max((lhs - rhs).abs())
    })
}

/// Sampled boundary graphs `v₊ = b + ř₊`, `v₋ = a + ř₋`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurves<T> {
    /// Rows `(x, v₊, v₋)`.
    pub rows: Vec<[T; 3]>,
    /// Set when `v₊ > v₋` fails at some sample.
    pub layer_violated: bool,
}

impl<T: Real> BoundaryCurves<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,v_plus,v_minus\n");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| crate::format::csv(to_f64(v))).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn boundary_curves<T: Real>(p: &StripParams<T>, r: &ProfilePair<T>, samples: usize) -> BoundaryCurves<T> {
    let h = T::one() / from_usize::<T>(samples.max(1));
    let rows: Vec<[T; 3]> = (0..samples)
        .map(|i| {
            let x = h * from_usize::<T>(i);
            [x, p.b + r.plus.evaluate(x), p.a + r.minus.evaluate(x)]
        })
        .collect();
    let layer_violated = rows.iter().any(|row| !(row[1] > row[2]));
    BoundaryCurves { rows, layer_violated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::ModeGrid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(m: usize, n: usize) -> ModeGrid {
        ModeGrid::new(m, n).unwrap()
    }

    fn pair(g: ModeGrid, p: &[f64], m: &[f64]) -> ProfilePair<f64> {
        let pad = |c: &[f64]| {
            let mut v = c.to_vec();
            v.resize(g.n(), 0.0);
            CosineSeries::from_coeffs(g, v).unwrap()
        };
        ProfilePair::new(pad(p), pad(m)).unwrap()
    }

    #[test]
    fn strip_validation() {
        assert!(StripParams::new(1.0, 1.0, 0.0).is_err());
        assert!(StripParams::new(f64::NAN, 1.0, 0.0).is_err());
        let g = grid(1, 2);
        let bad = StripParams { a: 2.0, b: 1.0, c: 0.0 };
        assert!(matches!(residual(&bad, &ProfilePair::zeros(g)), Err(ModelError::DegenerateStrip { .. })));
        assert!(jacobian(&bad, &ProfilePair::zeros(g)).is_err());
        assert!(time_rhs(1.0, 1.0, &FullState::zeros(3)).is_err());
    }

    #[test]
    fn trivial_line() {
        let g = grid(2, 8);
        for (a, b, c) in [(0.0, 1.0, 0.3), (-3.0, -1.0, 5.0), (0.5, 0.6, 0.55)] {
            let f = residual(&StripParams { a, b, c }, &ProfilePair::zeros(g)).unwrap();
            assert!(f.is_zero());
        }
    }

    #[test]
    fn single_mode_residual() {
        let (eps, c) = (0.1, 0.3);
        let g = grid(1, 4);
        let f = residual(&StripParams { a: 0.0, b: 1.0, c }, &pair(g, &[eps], &[])).unwrap();
        let tp = 2.0 * PI;
        let want_plus = [-eps * (1.0 - c) * tp - eps / tp, -eps * eps * PI, 0.0, 0.0];
        let want_minus = [-eps / tp, 0.0, 0.0, 0.0];
        for j in 0..4 {
            assert!((f.plus.coeffs()[j] - want_plus[j]).abs() < 1e-15);
            assert!((f.minus.coeffs()[j] - want_minus[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn residual_reports_truncation_tail() {
        let g = grid(1, 2);
        let (_, tail) = residual_with_tail(&StripParams { a: 0.0, b: 1.0, c: 0.0 }, &pair(g, &[0.0, 0.1], &[])).unwrap();
        // (0.1 cos 2)·(−0.4π sin 2) = −0.02π sin 4, outside N = 2
        assert!((tail - 0.02 * PI).abs() < 1e-15);
    }

    #[test]
    fn time_rhs_examples() {
        assert!(time_rhs(0.0, 1.0, &FullState::zeros(5)).unwrap().max_abs_coeff() == 0.0);
        let (eps, b) = (0.01, 1.5);
        let mut s = FullState::zeros(4);
        s.plus.cos[0] = eps;
        let t = time_rhs_detailed(0.0, b, &s).unwrap();
        let tp = 2.0 * PI;
        assert!((t.rate.plus.sin[0] - (tp * b * eps + eps / (tp * b))).abs() < 1e-15);
        assert!((t.rate.plus.sin[1] - PI * eps * eps).abs() < 1e-17);
        assert!((t.rate.minus.sin[0] - eps / (tp * b)).abs() < 1e-17);
        assert!(t.rate.plus.cos.iter().chain(&t.rate.minus.cos).all(|&x| x == 0.0));
        assert_eq!(t.dropped_mean, (0.0, 0.0));
    }

    #[test]
    fn jacobian_at_zero_is_block_diagonal() {
        let (m, n) = (2, 6);
        let p = StripParams { a: -0.3, b: 0.8, c: 1.7 };
        let jac = jacobian(&p, &ProfilePair::zeros(grid(m, n))).unwrap();
        for j in 1..=n {
            let mm: ModeMatrix<f64> = ModeMatrix::new(j * m, &p);
            let (r, s) = (j - 1, n + j - 1);
            assert!((jac[(r, r)] + mm.alpha).abs() < 1e-12);
            assert!((jac[(r, s)] - mm.gamma).abs() < 1e-12);
            assert!((jac[(s, r)] + mm.gamma).abs() < 1e-12);
            assert!((jac[(s, s)] + mm.beta).abs() < 1e-12);
        }
        let off = jac.iter().filter(|x| **x != 0.0).count();
        assert_eq!(off, 4 * n);
    }

    #[test]
    fn second_diff_examples() {
        let g = grid(3, 3);
        let h = pair(g, &[1.0], &[]);
        let d = second_diff(&h, &h).unwrap();
        assert!((d.plus.coeffs()[1] + 6.0 * PI).abs() < 1e-14);
        assert!(d.plus.coeffs()[0] == 0.0 && d.minus.is_zero());
        assert!(second_diff(&ProfilePair::zeros(g), &h).unwrap().is_zero());
    }

    #[test]
    fn monitor_examples() {
        let g = grid(1, 4);
        let p = StripParams { a: 0.0, b: 1.0, c: 0.3 };
        let mon = monitors(&p, &ProfilePair::zeros(g)).unwrap();
        assert_eq!((mon.m_ab, mon.m_plus, mon.m_minus), (1.0, 0.7, 0.3));
        let cp = crate::bifurcation::critical_velocity(0.0f64, 1.0, 1).0;
        let mon = monitors(&StripParams { a: 0.0, b: 1.0, c: cp }, &ProfilePair::zeros(g)).unwrap();
        assert!((mon.m_plus - 0.02472).abs() < 1e-5);
        let crossing = pair(g, &[-0.5], &[0.5]);
        assert!(monitors(&p, &crossing).unwrap().m_ab < 1e-15);
    }

    #[test]
    fn qualitative_defect_examples() {
        let g = grid(1, 4);
        let p = StripParams { a: 0.0, b: 1.0, c: 0.3 };
        assert_eq!(qualitative_defect(&p, &ProfilePair::zeros(g)), 0.0);
        assert!(qualitative_defect(&p, &pair(g, &[0.1, 0.02], &[0.03])) > 1e-3);
    }

    #[test]
    fn boundary_curve_examples() {
        let g = grid(2, 3);
        let p = StripParams { a: 0.0, b: 1.0, c: 0.0 };
        let flat = boundary_curves(&p, &ProfilePair::zeros(g), 8);
        assert!(flat.rows.iter().all(|r| r[1] == 1.0 && r[2] == 0.0) && !flat.layer_violated);
        assert!(flat.to_csv().starts_with("x,v_plus,v_minus\n0,1,0\n0.125,1,0\n"));
        // kernel-shaped perturbation: m periods per unit length
        let k = boundary_curves(&p, &pair(g, &[0.1], &[-0.05]), 8);
        assert!((k.rows[0][1] - k.rows[4][1]).abs() < 1e-15 && (k.rows[2][1] - 0.9).abs() < 1e-15);
        assert!(boundary_curves(&p, &pair(g, &[-0.6], &[0.6]), 8).layer_violated);
    }

    fn params() -> impl Strategy<Value = StripParams<f64>> {
        (-1.0..1.0f64, 0.2..2.0f64, -2.0..2.0f64).prop_map(|(a, w, c)| StripParams { a, b: a + w, c })
    }

    fn profile(n: usize, amp: f64) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-amp..amp, 2 * n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn jacobian_matches_central_differences(p in params(), r in profile(8, 0.03), h in profile(8, 1.0), m in 1usize..3) {
            let g = grid(m, 8);
            let r = ProfilePair::from_vector(g, &nalgebra::DVector::from_vec(r)).unwrap();
            let hv = nalgebra::DVector::from_vec(h);
            let h = ProfilePair::from_vector(g, &hv).unwrap();
            let eps = 1e-6;
            let fp = residual(&p, &r.add(&h.scale(eps)).unwrap()).unwrap().to_vector();
            let fm = residual(&p, &r.sub(&h.scale(eps)).unwrap()).unwrap().to_vector();
            let fd = (fp - fm) / (2.0 * eps);
            let jh = jacobian(&p, &r).unwrap() * hv;
            prop_assert!((&jh - &fd).norm() <= 1e-6 * jh.norm().max(1e-300));
        }

        #[test]
        fn second_diff_is_the_quadratic_part(p in params(), r in profile(6, 0.1), h in profile(6, 1.0), h2 in profile(6, 1.0)) {
            let g = grid(1, 6);
            let to = |v: Vec<f64>| ProfilePair::from_vector(g, &nalgebra::DVector::from_vec(v)).unwrap();
            let (r, h, h2) = (to(r), to(h), to(h2));
            // F is quadratic, so the second difference is exact up to rounding
            let eps = 1e-3;
            let f0 = residual(&p, &r).unwrap().to_vector();
            let fp = residual(&p, &r.add(&h.scale(eps)).unwrap()).unwrap().to_vector();
            let fm = residual(&p, &r.sub(&h.scale(eps)).unwrap()).unwrap().to_vector();
            let dd = (fp + fm - f0 * 2.0) / (eps * eps);
            let d2 = second_diff(&h, &h).unwrap().to_vector();
            prop_assert!((&dd - &d2).norm() <= 1e-5 * d2.norm().max(1e-12));
            // and the first difference of the Jacobian
            let dj = (jacobian(&p, &r.add(&h2.scale(eps)).unwrap()).unwrap() - jacobian(&p, &r).unwrap()) / eps * h.to_vector();
            let d2b = second_diff(&h, &h2).unwrap().to_vector();
            prop_assert!((&dj - &d2b).norm() <= 1e-8 * d2b.norm().max(1e-12));
            let sym = second_diff(&h2, &h).unwrap().to_vector();
            prop_assert!((&sym - &d2b).norm() <= 1e-12 * d2b.norm().max(1e-12));
        }

        #[test]
        fn param_derivative_matches_differences(p in params(), r in profile(5, 0.2), da in -1.0..1.0f64, db in -1.0..1.0f64, dc in -1.0..1.0f64) {
            let g = grid(2, 5);
            let r = ProfilePair::from_vector(g, &nalgebra::DVector::from_vec(r)).unwrap();
            let dir = ParamDirection { da, db, dc };
            let eps = 1e-6;
            let shift = |s: f64| StripParams { a: p.a + s * da, b: p.b + s * db, c: p.c + s * dc };
            let fd = (residual(&shift(eps), &r).unwrap().to_vector() - residual(&shift(-eps), &r).unwrap().to_vector()) / (2.0 * eps);
            let an = param_derivative(&p, &r, &dir).unwrap().to_vector();
            prop_assert!((&an - &fd).norm() <= 1e-6 * an.norm().max(1e-9));
        }
    }
}
