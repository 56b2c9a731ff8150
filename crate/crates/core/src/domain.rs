//! Grids, initial data, conserved quantities and the characteristic
//! frequencies shared by every other module.
//!
//! All integrals in x use the periodic composite trapezoid rule, accumulated
//! strictly left to right so that a full-circle integral and the last entry of
//! a cumulative integral are the same floating-point sum.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default positivity threshold for φ_x; defines the discrete degeneracy set.
pub const EPS_PHI_X: f64 = 1e-10;

/// Default tolerance for detecting grid points with ρ₀ = s.
pub const RHO_TOL: f64 = 1e-9;

/// Uniform periodic grid x_j = j/n on the circle [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::GridMismatch { expected: self.n, got: len });
        }
        Ok(())
    }
}

/// One Fourier mode `(k, a_k, b_k)` used by [`fourier_synthesize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: i64,
    pub a: f64,
    pub b: f64,
}

impl Mode {
    pub fn new(k: i64, a: f64, b: f64) -> Self {
        Self { k, a, b }
    }
}

/// Sampled initial velocity, its slope and the initial density.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub grid: Grid,
    pub u0: Vec<f64>,
    pub u0x: Vec<f64>,
    pub rho0: Vec<f64>,
}

impl InitialData {
    pub fn new(grid: Grid, u0: Vec<f64>, u0x: Vec<f64>, rho0: Vec<f64>) -> Result<Self> {
        grid.check_len(u0.len())?;
        grid.check_len(u0x.len())?;
        grid.check_len(rho0.len())?;
        Ok(Self { grid, u0, u0x, rho0 })
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Ḣ¹-energy c² of the data.
    pub fn energy(&self) -> f64 {
        quarter_energy(&self.u0x, &self.rho0)
    }

    /// Contact angle δ = ½∫ρ₀ of the data.
    pub fn contact_angle(&self) -> f64 {
        contact_angle(&self.rho0)
    }

    /// Periodic-trapezoid mean of u0x; zero for admissible data.
    pub fn slope_mean(&self) -> f64 {
        trapezoid(&self.u0x)
    }

    pub fn max_rho(&self) -> f64 {
        self.rho0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Conserved quantities, magnetic strength and numerical thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub s: f64,
    pub c2: f64,
    pub delta: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub eps_phi_x: f64,
    pub rho_tol: f64,
}

impl SimParams {
    pub fn new(s: f64, c2: f64, delta: f64) -> Result<Self> {
        let (theta1, theta2) = thetas(s, c2, delta)?;
        Ok(Self { s, c2, delta, theta1, theta2, eps_phi_x: EPS_PHI_X, rho_tol: RHO_TOL })
    }

    /// Parameters consistent with `data`: c² and δ are measured on the grid
    /// with the same quadrature the flow uses.
    pub fn from_data(data: &InitialData, s: f64) -> Result<Self> {
        Self::new(s, data.energy(), data.contact_angle())
    }

    /// θ₁ − θ₂ > 0.
    #[inline]
    pub fn omega(&self) -> f64 {
        self.theta1 - self.theta2
    }

    /// c² − sδ, the constant forcing of the Riccati equation.
    #[inline]
    pub fn forcing(&self) -> f64 {
        self.c2 - self.s * self.delta
    }

    /// Copy with θ₂ shifted by `shift` and everything else untouched. Used to
    /// inject an inconsistent frequency pair.
    pub fn with_theta2_shift(mut self, shift: f64) -> Self {
        self.theta2 += shift;
        self
    }
}

/// Periodic trapezoid ∫₀¹ f dx, summed left to right exactly as in
/// [`cumulative_integral`].
pub fn trapezoid(f: &[f64]) -> f64 {
    let n = f.len();
    if n == 0 {
        return 0.0;
    }
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        acc += 0.5 * h * (f[j] + f[(j + 1) % n]);
    }
    acc
}

/// F[j] ≈ ∫₀^{x_j} f, j = 0..=n, with F[0] = 0 and x_n = 1.
pub fn cumulative_integral(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    if n == 0 {
        return out;
    }
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        acc += 0.5 * h * (f[j] + f[(j + 1) % n]);
        out.push(acc);
    }
    out
}

/// Fourth-order central difference of a periodic field on [0, 1).
pub fn periodic_derivative(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let inv = n as f64 / 12.0;
    (0..n)
        .map(|j| {
            let m2 = f[(j + n - 2) % n];
            let m1 = f[(j + n - 1) % n];
            let p1 = f[(j + 1) % n];
            let p2 = f[(j + 2) % n];
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) * inv
        })
        .collect()
}

/// Cumulative trapezoid with the Euler–Maclaurin end correction
/// F[j] − h²/12 (f'(x_j) − f'(0)), f' by [`periodic_derivative`].
///
/// Fourth order at interior nodes for smooth periodic f. The correction
/// vanishes at j = 0 and j = n, so F[n] is bitwise the periodic trapezoid.
pub fn cumulative_integral_corrected(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = cumulative_integral(f);
    if n < 4 {
        return out;
    }
    let d = periodic_derivative(f);
    let w = 1.0 / (12.0 * (n * n) as f64);
    for j in 1..n {
        out[j] -= w * (d[j] - d[0]);
    }
    out
}

fn quarter_energy(u_x: &[f64], rho: &[f64]) -> f64 {
    let density: Vec<f64> = u_x.iter().zip(rho).map(|(a, b)| a * a + b * b).collect();
    0.25 * trapezoid(&density)
}

/// c² = ¼∫(u_x² + ρ²).
pub fn energy(u_x: &[f64], rho: &[f64]) -> Result<f64> {
    if u_x.len() != rho.len() {
        return Err(Error::GridMismatch { expected: u_x.len(), got: rho.len() });
    }
    Ok(quarter_energy(u_x, rho))
}

/// δ = ½∫ρ.
pub fn contact_angle(rho: &[f64]) -> f64 {
    0.5 * trapezoid(rho)
}

/// Roots θ₁ > θ₂ of λ² − sλ − (c² − sδ) = 0.
///
/// The larger-magnitude root is formed directly and the other from the
/// product, which keeps both sum and product identities at round-off even
/// when |s| dominates the discriminant.
pub fn thetas(s: f64, c2: f64, delta: f64) -> Result<(f64, f64)> {
    let q = c2 - s * delta;
    let discriminant = s * s + 4.0 * q;
    if !(discriminant > 0.0) {
        return Err(Error::DegenerateFrequencies { discriminant });
    }
    let root = discriminant.sqrt();
    if s >= 0.0 {
        let theta1 = 0.5 * (s + root);
        Ok((theta1, -q / theta1))
    } else {
        let theta2 = 0.5 * (s - root);
        Ok((-q / theta2, theta2))
    }
}

/// Rescales the data to unit energy. Returns the rescaled data and the
/// applied factor 1/c.
pub fn normalize(data: &InitialData) -> Result<(InitialData, f64)> {
    let e = data.energy();
    if !(e > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let scale = 1.0 / e.sqrt();
    let mul = |v: &[f64]| v.iter().map(|x| x * scale).collect::<Vec<_>>();
    let out = InitialData {
        grid: data.grid,
        u0: mul(&data.u0),
        u0x: mul(&data.u0x),
        rho0: mul(&data.rho0),
    };
    Ok((out, scale))
}

fn check_modes(modes: &[Mode], grid: Grid) -> Result<()> {
    let half = (grid.n() / 2) as i64;
    match modes.iter().find(|m| m.k.abs() >= half) {
        Some(m) => Err(Error::AliasedMode { k: m.k, n: grid.n() }),
        None => Ok(()),
    }
}

/// Synthesises band-limited data:
/// u₀ = Σ a_k sin(2πkx) + b_k(cos(2πkx) − 1), so u₀(0) = 0 exactly, and
/// ρ₀ = ρ̄ + Σ a_k sin(2πkx) + b_k cos(2πkx).
pub fn fourier_synthesize(
    u_modes: &[Mode],
    rho_modes: &[Mode],
    rho_mean: f64,
    grid: Grid,
) -> Result<InitialData> {
    check_modes(u_modes, grid)?;
    check_modes(rho_modes, grid)?;
    let n = grid.n();
    let (u0, u0x) = synthesize_velocity(u_modes, grid);
    let rho0 = (0..n)
        .map(|j| {
            let x = grid.x(j);
            rho_modes.iter().fold(rho_mean, |acc, m| {
                let w = 2.0 * PI * m.k as f64;
                acc + m.a * (w * x).sin() + m.b * (w * x).cos()
            })
        })
        .collect();
    InitialData::new(grid, u0, u0x, rho0)
}

fn synthesize_velocity(u_modes: &[Mode], grid: Grid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n();
    let mut u0 = vec![0.0; n];
    let mut u0x = vec![0.0; n];
    for j in 0..n {
        let x = grid.x(j);
        for m in u_modes {
            let w = 2.0 * PI * m.k as f64;
            let (sn, cs) = (w * x).sin_cos();
            u0[j] += m.a * sn + m.b * (cs - 1.0);
            u0x[j] += w * (m.a * cs - m.b * sn);
        }
    }
    (u0, u0x)
}

/// Unit-energy data with ρ₀(x_site) = s exactly.
///
/// The velocity comes from `u_modes`; the density is
/// ρ₀ = s + r·sin(2πk(x − x_site)) with r chosen so that c² = 1.
pub fn seeded_profile(
    grid: Grid,
    s: f64,
    site: usize,
    u_modes: &[Mode],
    k_rho: i64,
) -> Result<InitialData> {
    check_modes(u_modes, grid)?;
    if k_rho == 0 || k_rho.abs() >= (grid.n() / 2) as i64 {
        return Err(Error::AliasedMode { k: k_rho, n: grid.n() });
    }
    if site >= grid.n() {
        return Err(Error::InvalidArgument(format!("seed site {site} outside grid")));
    }
    let (u0, u0x) = synthesize_velocity(u_modes, grid);
    let e_u = quarter_energy(&u0x, &vec![0.0; grid.n()]);
    let budget = 1.0 - e_u - 0.25 * s * s;
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "no unit-energy seeded profile: velocity energy {e_u} and s = {s} leave no room for density"
        )));
    }
    let r = (8.0 * budget).sqrt();
    let n = grid.n() as i64;
    let w = 2.0 * PI * k_rho as f64 / n as f64;
    let rho0 = (0..grid.n())
        .map(|j| {
            let m = (j as i64 - site as i64).rem_euclid(n);
            s + r * (w * m as f64).sin()
        })
        .collect();
    InitialData::new(grid, u0, u0x, rho0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn sampled(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid(n).points().into_iter().map(f).collect()
    }

    #[test]
    fn grid_rejects_small_or_odd() {
        assert_eq!(Grid::new(8), Err(Error::InvalidGrid(8)));
        assert_eq!(Grid::new(17), Err(Error::InvalidGrid(17)));
        assert!(Grid::new(16).is_ok());
        assert_eq!(grid(64).h(), 1.0 / 64.0);
    }

    #[test]
    fn energy_examples() {
        let z = vec![0.0; 64];
        assert_eq!(energy(&z, &z).unwrap(), 0.0);
        let two = vec![2.0; 64];
        assert!((energy(&z, &two).unwrap() - 1.0).abs() < 1e-15);
        let ux = sampled(256, |x| 2.0 * 2f64.sqrt() * (2.0 * PI * x).sin());
        assert!((energy(&ux, &vec![0.0; 256]).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn energy_rejects_mismatch() {
        assert_eq!(
            energy(&[0.0; 16], &[0.0; 32]),
            Err(Error::GridMismatch { expected: 16, got: 32 })
        );
    }

    #[test]
    fn contact_angle_examples() {
        assert_eq!(contact_angle(&[0.0; 32]), 0.0);
        assert!((contact_angle(&[2.0; 32]) - 1.0).abs() < 1e-15);
        let rho = sampled(128, |x| 2.0 + (2.0 * PI * x).cos());
        assert!((contact_angle(&rho) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theta_examples() {
        let (t1, t2) = thetas(0.0, 1.0, 0.3).unwrap();
        assert!((t1 - 1.0).abs() < 1e-15 && (t2 + 1.0).abs() < 1e-15);
        let (t1, t2) = thetas(2.0, 1.0, 0.0).unwrap();
        assert!((t1 - (1.0 + 2f64.sqrt())).abs() < 1e-14);
        assert!((t2 - (1.0 - 2f64.sqrt())).abs() < 1e-14);
        let (t1, t2) = thetas(1.0, 1.0, 0.5).unwrap();
        assert!((t1 + t2 - 1.0).abs() < 1e-15);
        assert!((t1 * t2 + 0.5).abs() < 1e-15);
        // both roots of λ² − sλ − (c² − sδ)
        for l in [t1, t2] {
            assert!((l * l - l - 0.5).abs() < 1e-14);
        }
        assert!(t1 > t2);
    }

    #[test]
    fn degenerate_discriminant_is_an_error() {
        // s = 2, c² = 1, δ = 1: s² + 4(1 − 2) = 0
        assert!(matches!(thetas(2.0, 1.0, 1.0), Err(Error::DegenerateFrequencies { .. })));
        assert!(matches!(thetas(0.0, -1.0, 0.0), Err(Error::DegenerateFrequencies { .. })));
    }

    #[test]
    fn normalize_examples() {
        let g = grid(64);
        let unit = fourier_synthesize(&[], &[], 2.0, g).unwrap();
        let (same, scale) = normalize(&unit).unwrap();
        assert!((scale - 1.0).abs() < 1e-15);
        assert!((same.contact_angle() - 1.0).abs() < 1e-15);

        let four = InitialData::new(g, vec![0.0; 64], vec![0.0; 64], vec![4.0; 64]).unwrap();
        assert!((four.energy() - 4.0).abs() < 1e-14);
        let (half, scale) = normalize(&four).unwrap();
        assert!((scale - 0.5).abs() < 1e-15);
        assert!(half.rho0.iter().all(|r| (r - 2.0).abs() < 1e-14));

        let zero = fourier_synthesize(&[], &[], 0.0, g).unwrap();
        assert_eq!(normalize(&zero), Err(Error::ZeroEnergy));
    }

    #[test]
    fn synthesize_examples() {
        let g = grid(32);
        let z = fourier_synthesize(&[], &[], 0.0, g).unwrap();
        assert!(z.u0.iter().chain(&z.u0x).chain(&z.rho0).all(|v| *v == 0.0));

        let d = fourier_synthesize(&[Mode::new(1, 1.0, 0.0)], &[], 0.0, g).unwrap();
        for j in 0..32 {
            let x = g.x(j);
            assert!((d.u0[j] - (2.0 * PI * x).sin()).abs() < 1e-15);
            assert!((d.u0x[j] - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-14);
        }

        let m = fourier_synthesize(
            &[Mode::new(3, 0.2, -0.7), Mode::new(5, 0.1, 0.4)],
            &[Mode::new(2, 0.3, 0.1)],
            0.5,
            g,
        )
        .unwrap();
        assert_eq!(m.u0[0], 0.0);
        assert!(m.slope_mean().abs() < 1e-13);
    }

    #[test]
    fn synthesize_rejects_aliasing() {
        let g = grid(16);
        assert_eq!(
            fourier_synthesize(&[Mode::new(8, 1.0, 0.0)], &[], 0.0, g),
            Err(Error::AliasedMode { k: 8, n: 16 })
        );
        assert!(fourier_synthesize(&[], &[Mode::new(-9, 1.0, 0.0)], 0.0, g).is_err());
    }

    #[test]
    fn cumulative_integral_examples() {
        let n = 64;
        let f = cumulative_integral(&vec![1.0; n]);
        assert_eq!(f.len(), n + 1);
        for (j, v) in f.iter().enumerate() {
            assert!((v - j as f64 / n as f64).abs() < 1e-15);
        }
        assert!((f[n] - 1.0).abs() < 1e-15);
        assert!(cumulative_integral(&vec![0.0; n]).iter().all(|v| *v == 0.0));
        let c = cumulative_integral(&sampled(512, |x| (2.0 * PI * x).cos()));
        assert!(c[512].abs() < 1e-12);
    }

    #[test]
    fn seeded_profile_hits_s_exactly() {
        let g = grid(256);
        let d = seeded_profile(g, 1.0, 37, &[Mode::new(1, 0.05, 0.02)], 1).unwrap();
        assert_eq!(d.rho0[37], 1.0);
        assert!((d.energy() - 1.0).abs() < 1e-13);
        assert!((d.contact_angle() - 0.5).abs() < 1e-13);
        assert!(seeded_profile(g, 2.5, 0, &[], 1).is_err());
    }

    #[test]
    fn band_limited_invariance_under_refinement() {
        let modes = [Mode::new(1, 0.3, 0.1), Mode::new(4, -0.05, 0.02)];
        let rho = [Mode::new(2, 0.4, -0.2)];
        let a = fourier_synthesize(&modes, &rho, 0.7, grid(64)).unwrap();
        let b = fourier_synthesize(&modes, &rho, 0.7, grid(128)).unwrap();
        assert!((a.energy() - b.energy()).abs() < 1e-12);
        assert!((a.contact_angle() - b.contact_angle()).abs() < 1e-12);
    }
}
