//! Brute-force integrators for certifying the closed forms.
//!
//! Nothing here calls into `lagrangian` or `weakflow`; the right-hand sides
//! are coded from the equations directly and only grid/data types are shared.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::domain::{contact_angle, energy, InitialData, SimParams};
use crate::error::{Error, Result};
use crate::eulerian::EulerianState;
use crate::weakflow::GammaField;

/// |(U, P)| beyond which a characteristic is reported as escaping.
pub const OVERFLOW_BOUND: f64 = 1e12;

/// Energy drift that marks a method-of-lines run as unstable.
pub const INSTABILITY_DRIFT: f64 = 1e-3;

/// Errors below this are treated as round-off.
const ROUNDOFF_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeRunConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Store every `stride`-th step (the final step is always stored).
    pub stride: usize,
}

impl OdeRunConfig {
    pub fn new(dt: f64, t_end: f64, stride: usize) -> Result<Self> {
        if !(dt > 0.0) || !(t_end >= 0.0) || stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "need dt > 0, t_end >= 0, stride >= 1 (got {dt}, {t_end}, {stride})"
            )));
        }
        Ok(Self { dt, t_end, stride })
    }

    /// Number of equal steps; the step is shrunk so that they land on t_end.
    pub fn steps(&self) -> usize {
        let k = (self.t_end / self.dt).round() as usize;
        if k == 0 && self.t_end > 0.0 {
            1
        } else {
            k
        }
    }

    pub fn step(&self) -> f64 {
        match self.steps() {
            0 => self.dt,
            k => self.t_end / k as f64,
        }
    }

    pub fn stored_steps(&self) -> Vec<usize> {
        let k = self.steps();
        let mut idx: Vec<usize> = (0..=k).step_by(self.stride).collect();
        if *idx.last().unwrap() != k {
            idx.push(k);
        }
        idx
    }

    pub fn stored_times(&self) -> Vec<f64> {
        let h = self.step();
        self.stored_steps().into_iter().map(|k| k as f64 * h).collect()
    }
}

/// Stored (U, P) samples; `u[k][j]` is point j at `times[k]`. Points that
/// escaped carry NaN from the first stored time after escape.
#[derive(Debug, Clone)]
pub struct UpTrajectory {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub overflow: Vec<bool>,
}

#[inline]
fn up_rhs(u: f64, p: f64, s: f64, q: f64) -> (f64, f64) {
    (-0.5 * u * u + 0.5 * p * p - (s * p + 2.0 * q), (s - p) * u)
}

/// One classical RK4 step of U_t = −½U² + ½P² − (sP + 2(c² − sδ)),
/// P_t = −PU + sU.
pub fn rk4_up_step(u: f64, p: f64, s: f64, q: f64, h: f64) -> (f64, f64) {
    let (k1u, k1p) = up_rhs(u, p, s, q);
    let (k2u, k2p) = up_rhs(u + 0.5 * h * k1u, p + 0.5 * h * k1p, s, q);
    let (k3u, k3p) = up_rhs(u + 0.5 * h * k2u, p + 0.5 * h * k2p, s, q);
    let (k4u, k4p) = up_rhs(u + h * k3u, p + h * k3p, s, q);
    (
        u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

pub fn rk4_up(data: &InitialData, params: &SimParams, cfg: &OdeRunConfig) -> UpTrajectory {
    let steps = cfg.steps();
    let h = cfg.step();
    let stored = cfg.stored_steps();
    let (s, q) = (params.s, params.c2 - params.s * params.delta);
    let per_point: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..data.n())
        .into_par_iter()
        .map(|j| {
            let (mut u, mut p) = (data.u0x[j], data.rho0[j]);
            let mut us = Vec::with_capacity(stored.len());
            let mut ps = Vec::with_capacity(stored.len());
            let mut escaped = false;
            let mut next = 0;
            for k in 0..=steps {
                if next < stored.len() && stored[next] == k {
                    if escaped {
                        us.push(f64::NAN);
                        ps.push(f64::NAN);
                    } else {
                        us.push(u);
                        ps.push(p);
                    }
                    next += 1;
                }
                if k == steps || escaped {
                    continue;
                }
                let (nu, np) = rk4_up_step(u, p, s, q, h);
                if !(nu.hypot(np) <= OVERFLOW_BOUND) {
                    escaped = true;
                }
                u = nu;
                p = np;
            }
            (us, ps, escaped)
        })
        .collect();

    let m = stored.len();
    let mut traj = UpTrajectory {
        times: cfg.stored_times(),
        u: vec![Vec::with_capacity(data.n()); m],
        p: vec![Vec::with_capacity(data.n()); m],
        overflow: Vec::with_capacity(data.n()),
    };
    for (us, ps, escaped) in per_point {
        for k in 0..m {
            traj.u[k].push(us[k]);
            traj.p[k].push(ps[k]);
        }
        traj.overflow.push(escaped);
    }
    traj
}

/// RK4 on (γ, γ̇)' = (γ̇, isγ̇ − (c² − sδ)γ) with γ(0) = 1, γ̇(0) = ½(u₀ₓ + iρ₀).
///
/// γ̈ in the output is the central difference of the integrated γ̇ over the
/// neighbouring steps (one-sided second order at the ends), so feeding it to
/// a residual measures the integration error rather than the right-hand side.
pub fn rk4_gamma(data: &InitialData, params: &SimParams, cfg: &OdeRunConfig) -> Vec<GammaField> {
    let steps = cfg.steps();
    let h = cfg.step();
    let stored = cfg.stored_steps();
    let is = Complex64::new(0.0, params.s);
    let q = params.c2 - params.s * params.delta;
    let f = |g: Complex64, v: Complex64| (v, is * v - q * g);

    let per_point: Vec<Vec<(Complex64, Complex64, Complex64)>> = (0..data.n())
        .into_par_iter()
        .map(|j| {
            let mut g = Complex64::new(1.0, 0.0);
            let mut v = 0.5 * Complex64::new(data.u0x[j], data.rho0[j]);
            let mut gs = Vec::with_capacity(steps + 1);
            let mut vs = Vec::with_capacity(steps + 1);
            gs.push(g);
            vs.push(v);
            for _ in 0..steps {
                let (a1, b1) = f(g, v);
                let (a2, b2) = f(g + 0.5 * h * a1, v + 0.5 * h * b1);
                let (a3, b3) = f(g + 0.5 * h * a2, v + 0.5 * h * b2);
                let (a4, b4) = f(g + h * a3, v + h * b3);
                g += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
                v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
                gs.push(g);
                vs.push(v);
            }
            stored
                .iter()
                .map(|&k| {
                    let acc = if steps < 2 {
                        is * vs[k] - q * gs[k]
                    } else if k == 0 {
                        (-3.0 * vs[0] + 4.0 * vs[1] - vs[2]) / (2.0 * h)
                    } else if k == steps {
                        (3.0 * vs[k] - 4.0 * vs[k - 1] + vs[k - 2]) / (2.0 * h)
                    } else {
                        (vs[k + 1] - vs[k - 1]) / (2.0 * h)
                    };
                    (gs[k], vs[k], acc)
                })
                .collect()
        })
        .collect();

    cfg.stored_times()
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            let mut field = GammaField {
                t,
                gamma: Vec::with_capacity(data.n()),
                gamma_dot: Vec::with_capacity(data.n()),
                gamma_ddot: Vec::with_capacity(data.n()),
            };
            for point in &per_point {
                let (a, b, c) = point[k];
                field.gamma.push(a);
                field.gamma_dot.push(b);
                field.gamma_ddot.push(c);
            }
            field
        })
        .collect()
}

/// Periodic spectral calculus on n points of [0, 1).
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn wavenumber(&self, k: usize) -> Option<f64> {
        let n = self.n;
        if k == n / 2 {
            None
        } else if k < n / 2 {
            Some(k as f64)
        } else {
            Some(k as f64 - n as f64)
        }
    }

    /// Applies `mult(k)` to every non-Nyquist Fourier coefficient.
    fn filter(&self, f: &[f64], mult: impl Fn(f64) -> Complex64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.forward.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            *c = match self.wavenumber(k) {
                Some(w) => *c * mult(w),
                None => Complex64::new(0.0, 0.0),
            };
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        self.filter(f, |k| Complex64::new(0.0, 2.0 * std::f64::consts::PI * k))
    }

    /// Periodic antiderivative of f − mean(f), pinned to zero at x = 0.
    pub fn antiderivative(&self, f: &[f64]) -> Vec<f64> {
        let g = self.filter(f, |k| {
            if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / (2.0 * std::f64::consts::PI * k))
            }
        });
        let g0 = g[0];
        g.into_iter().map(|v| v - g0).collect()
    }
}

/// Right-hand side of the gauged system together with the mean defect
/// mean(½u_x² + ½ρ² − sρ) − 2(c² − sδ) that the periodic antiderivative drops.
#[derive(Debug, Clone)]
pub struct MolRhs {
    pub u_t: Vec<f64>,
    pub rho_t: Vec<f64>,
    pub mean_defect: f64,
}

/// u_t = −u u_x + ∫₀^x(½u_x² + ½ρ² − sρ) − 2x(c² − sδ),
/// ρ_t = −(ρu)_x + s u_x, with (c², δ) frozen from `params`.
pub fn mol_rhs(spec: &Spectral, u: &[f64], rho: &[f64], params: &SimParams) -> MolRhs {
    let n = u.len();
    let s = params.s;
    let ux = spec.derivative(u);
    let g: Vec<f64> = ux.iter().zip(rho).map(|(a, r)| 0.5 * a * a + 0.5 * r * r - s * r).collect();
    let mean = g.iter().sum::<f64>() / n as f64;
    let prim = spec.antiderivative(&g);
    let flux: Vec<f64> = rho.iter().zip(u).map(|(r, v)| r * v).collect();
    let dflux = spec.derivative(&flux);
    let u_t = (0..n).map(|j| -u[j] * ux[j] + prim[j]).collect();
    let rho_t = (0..n).map(|j| -dflux[j] + s * ux[j]).collect();
    MolRhs { u_t, rho_t, mean_defect: mean - 2.0 * (params.c2 - s * params.delta) }
}

#[derive(Debug, Clone)]
pub struct MolTrajectory {
    pub states: Vec<EulerianState>,
    /// Diagnostic c²(t) and δ(t) at the stored times.
    pub energy: Vec<f64>,
    pub angle: Vec<f64>,
    pub max_mean_defect: f64,
    /// Set when |c²(t) − c²(0)| exceeded the drift bound at any step.
    pub instability: bool,
}

impl MolTrajectory {
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().fold(0.0, |m, e| m.max((e - e0).abs()))
    }

    pub fn max_angle_drift(&self) -> f64 {
        let a0 = self.angle[0];
        self.angle.iter().fold(0.0, |m, a| m.max((a - a0).abs()))
    }
}

/// Method of lines: spectral differentiation in x, RK4 in time.
pub fn mol_m2hs(data: &InitialData, params: &SimParams, cfg: &OdeRunConfig) -> MolTrajectory {
    let n = data.n();
    let spec = Spectral::new(n);
    let steps = cfg.steps();
    let h = cfg.step();
    let stored = cfg.stored_steps();
    let mut u = data.u0.clone();
    let mut rho = data.rho0.clone();
    let e0 = data.energy();

    let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + a * q).collect() };

    let mut out = MolTrajectory {
        states: Vec::with_capacity(stored.len()),
        energy: Vec::with_capacity(stored.len()),
        angle: Vec::with_capacity(stored.len()),
        max_mean_defect: 0.0,
        instability: false,
    };
    let mut next = 0;
    for k in 0..=steps {
        if next < stored.len() && stored[next] == k {
            let ux = spec.derivative(&u);
            out.energy.push(energy(&ux, &rho).expect("fields share one grid"));
            out.angle.push(contact_angle(&rho));
            out.states.push(EulerianState { t: k as f64 * h, u: u.clone(), u_x: ux, rho: rho.clone(), quality: 0 });
            next += 1;
        }
        if k == steps {
            break;
        }
        let k1 = mol_rhs(&spec, &u, &rho, params);
        let k2 = mol_rhs(&spec, &axpy(&u, 0.5 * h, &k1.u_t), &axpy(&rho, 0.5 * h, &k1.rho_t), params);
        let k3 = mol_rhs(&spec, &axpy(&u, 0.5 * h, &k2.u_t), &axpy(&rho, 0.5 * h, &k2.rho_t), params);
        let k4 = mol_rhs(&spec, &axpy(&u, h, &k3.u_t), &axpy(&rho, h, &k3.rho_t), params);
        for d in [&k1, &k2, &k3, &k4] {
            out.max_mean_defect = out.max_mean_defect.max(d.mean_defect.abs());
        }
        for j in 0..n {
            u[j] += h / 6.0 * (k1.u_t[j] + 2.0 * k2.u_t[j] + 2.0 * k3.u_t[j] + k4.u_t[j]);
            rho[j] += h / 6.0 * (k1.rho_t[j] + 2.0 * k2.rho_t[j] + 2.0 * k3.rho_t[j] + k4.rho_t[j]);
        }
        let ek = energy(&spec.derivative(&u), &rho).expect("fields share one grid");
        if !((ek - e0).abs() <= INSTABILITY_DRIFT) {
            out.instability = true;
        }
    }
    out
}

/// Least-squares slope of log(error) against log(step).
pub fn richardson_order<F>(mut runner: F, steps: &[f64]) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if steps.len() < 3 {
        return Err(Error::InvalidArgument("need at least three step sizes".into()));
    }
    let ratio = steps[1] / steps[0];
    if !(ratio > 0.0) || ratio == 1.0 {
        return Err(Error::InvalidArgument("step sizes must form a geometric progression".into()));
    }
    for w in steps.windows(2) {
        if ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("step sizes must form a geometric progression".into()));
        }
    }
    let errors: Vec<f64> = steps.iter().map(|h| runner(*h)).collect();
    if errors.iter().any(|e| !e.is_finite() || *e <= ROUNDOFF_FLOOR) {
        return Err(Error::InsufficientDecay);
    }
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Ok(least_squares_slope(&xs, &ys))
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{cumulative_integral, fourier_synthesize, normalize, Grid, Mode};

    fn data(n: usize) -> InitialData {
        let g = Grid::new(n).unwrap();
        let raw = fourier_synthesize(&[Mode::new(1, 0.2, -0.1), Mode::new(2, 0.05, 0.0)], &[Mode::new(1, 0.1, 0.2)], 1.2, g)
            .unwrap();
        normalize(&raw).unwrap().0
    }

    #[test]
    fn config_steps_land_on_t_end() {
        let cfg = OdeRunConfig::new(0.3, 1.0, 2).unwrap();
        assert_eq!(cfg.steps(), 3);
        assert_eq!(cfg.stored_steps(), vec![0, 2, 3]);
        assert_eq!(*cfg.stored_times().last().unwrap(), 1.0);
        assert!(OdeRunConfig::new(0.0, 1.0, 1).is_err());
        assert!(OdeRunConfig::new(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn fixed_point_is_stationary() {
        // constant ρ with u_x = 0 sits at a fixed point i(s ± Ω) of the Riccati field
        let g = Grid::new(16).unwrap();
        let d = InitialData::new(g, vec![0.0; 16], vec![0.0; 16], vec![2.0; 16]).unwrap();
        let p = SimParams::from_data(&d, 0.7).unwrap();
        let tr = rk4_up(&d, &p, &OdeRunConfig::new(1e-2, 5.0, 50).unwrap());
        for k in 0..tr.times.len() {
            assert!(tr.u[k].iter().all(|v| v.abs() < 1e-12));
            assert!(tr.p[k].iter().all(|v| (v - 2.0).abs() < 1e-12));
        }
    }

    #[test]
    fn p_minus_s_keeps_sign() {
        let d = data(64);
        let p = SimParams::from_data(&d, 0.9).unwrap();
        let tr = rk4_up(&d, &p, &OdeRunConfig::new(1e-3, 1.0, 10).unwrap());
        for j in 0..64 {
            let sign = (d.rho0[j] - p.s).signum();
            for k in 0..tr.times.len() {
                if tr.u[k][j].is_finite() {
                    assert_eq!((tr.p[k][j] - p.s).signum(), sign);
                }
            }
        }
    }

    #[test]
    fn harmonic_oscillator_without_field() {
        // s = 0, c² = 1, δ = 0 gives θ = ±1 and γ = cos t + sin t · γ̇(0)
        let g = Grid::new(16).unwrap();
        let x = g.points();
        let u0x: Vec<f64> = x.iter().map(|x| 2.0 * 2f64.sqrt() * (2.0 * std::f64::consts::PI * x).cos()).collect();
        let u0: Vec<f64> = x.iter().map(|x| 2f64.sqrt() / std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).sin()).collect();
        let d = InitialData::new(g, u0, u0x, vec![0.0; 16]).unwrap();
        let p = SimParams::new(0.0, 1.0, 0.0).unwrap();
        let tr = rk4_gamma(&d, &p, &OdeRunConfig::new(1e-3, 1.0, 1000).unwrap());
        let last = tr.last().unwrap();
        for j in 0..16 {
            let want = Complex64::new(1.0_f64.cos(), 0.0) + 1.0_f64.sin() * 0.5 * Complex64::new(d.u0x[j], 0.0);
            assert!((last.gamma[j] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn gamma_norm_drift() {
        let d = data(128);
        let p = SimParams::from_data(&d, 0.6).unwrap();
        let tr = rk4_gamma(&d, &p, &OdeRunConfig::new(1e-3, 10.0, 500).unwrap());
        for f in &tr {
            assert!((f.l2_norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn spectral_calculus() {
        let spec = Spectral::new(32);
        let x: Vec<f64> = (0..32).map(|j| j as f64 / 32.0).collect();
        let f: Vec<f64> = x.iter().map(|x| (2.0 * std::f64::consts::PI * 3.0 * x).sin()).collect();
        let d = spec.derivative(&f);
        let a = spec.antiderivative(&f);
        for j in 0..32 {
            let w = 6.0 * std::f64::consts::PI;
            assert!((d[j] - w * (w * x[j]).cos()).abs() < 1e-12);
            assert!((a[j] - (1.0 - (w * x[j]).cos()) / w).abs() < 1e-14);
        }
    }

    #[test]
    fn mol_rhs_at_zero_matches_analytic_form() {
        let modes = ([Mode::new(1, 0.2, -0.1), Mode::new(2, 0.05, 0.0)], [Mode::new(1, 0.1, 0.2)]);
        let d = fourier_synthesize(&modes.0, &modes.1, 1.2, Grid::new(64).unwrap()).unwrap();
        let fine = fourier_synthesize(&modes.0, &modes.1, 1.2, Grid::new(64 * 256).unwrap()).unwrap();
        let p = SimParams::from_data(&d, 0.4).unwrap();
        let r = mol_rhs(&Spectral::new(64), &d.u0, &d.rho0, &p);
        // reference primitive by trapezoid on a much finer grid, using exact u0x
        let g: Vec<f64> = fine.u0x.iter().zip(&fine.rho0).map(|(a, r)| 0.5 * a * a + 0.5 * r * r - p.s * r).collect();
        let prim = cumulative_integral(&g);
        let q = p.forcing();
        for j in 0..64 {
            let x = j as f64 / 64.0;
            let want = -d.u0[j] * d.u0x[j] + prim[256 * j] - 2.0 * x * q;
            assert!((r.u_t[j] - want).abs() < 1e-6, "j {j}: {} vs {want}", r.u_t[j]);
        }
        assert!(r.mean_defect.abs() < 1e-12);
    }

    #[test]
    fn mol_keeps_invariants() {
        let d = data(128);
        let p = SimParams::from_data(&d, 0.4).unwrap();
        let tr = mol_m2hs(&d, &p, &OdeRunConfig::new(1e-3, 0.2, 50).unwrap());
        assert!(!tr.instability);
        assert!(tr.max_energy_drift() < 1e-6);
        assert!(tr.max_angle_drift() < 1e-8);
        assert!(tr.states.iter().all(|s| s.u[0].abs() < 1e-12));
    }

    #[test]
    fn richardson_of_known_power() {
        let order = richardson_order(|h| 3.0 * h.powi(4), &[1e-1, 5e-2, 2.5e-2]).unwrap();
        assert!((order - 4.0).abs() < 1e-12);
        assert_eq!(richardson_order(|_| 1e-16, &[1e-1, 5e-2, 2.5e-2]), Err(Error::InsufficientDecay));
        assert!(richardson_order(|h| h, &[1e-1, 5e-2]).is_err());
        assert!(richardson_order(|h| h, &[1e-1, 5e-2, 1e-2]).is_err());
    }

    #[test]
    fn trapezoid_cumulative_order() {
        let f = |x: f64| (x * 3.0).exp();
        let order = richardson_order(
            |h| {
                let n = (1.0 / h).round() as usize;
                let v: Vec<f64> = (0..n).map(|j| f(j as f64 / n as f64)).collect();
                // f is not periodic; integrate only up to x_{n-1} to avoid the wrap cell
                let c = cumulative_integral(&v);
                let x = (n - 1) as f64 / n as f64;
                (c[n - 1] - ((3.0 * x).exp() - 1.0) / 3.0).abs()
            },
            &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0],
        )
        .unwrap();
        assert!(order >= 1.9, "order {order}");
    }
}
