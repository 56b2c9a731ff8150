//! Riccati reduction along characteristics.
//!
//! Along the flow φ of u the pair U = u_x∘φ, P = ρ∘φ combines into
//! Z = U + iP, which solves dZ/dt = −½Z² + isZ − 2(c² − sδ). The solution is
//! evaluated through the rotated ratio Z = is + 2(Ȧ + iḂ)/(A + iB), where
//! A + iB = e^{−ist/2}γ with
//!
//! A = cos a + (u₀ₓ/Ω) sin a,  B = ((ρ₀ − s)/Ω) sin a,  a = Ωt/2,  Ω = θ₁ − θ₂.
//!
//! This form is finite everywhere except where A = B = 0, i.e. at genuine
//! blow-up points. The tan form is kept for cross-validation only.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{InitialData, SimParams};
use crate::error::{Error, Result};

/// Number of uniform time samples in the denominator sweep.
pub const MARGIN_SAMPLES: usize = 10_000;

const TAN_POLE_GAP: f64 = 1e-6;

/// Z(t, x_j) on the grid. Samples at blow-up points are NaN and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiField {
    pub t: f64,
    pub z: Vec<Complex64>,
    pub at_blowup: Vec<bool>,
}

impl RiccatiField {
    pub fn blowup_count(&self) -> usize {
        self.at_blowup.iter().filter(|b| **b).count()
    }

    pub fn u(&self) -> Vec<f64> {
        self.z.iter().map(|z| z.re).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        self.z.iter().map(|z| z.im).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupSite {
    pub index: usize,
    pub x: f64,
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub occurs: bool,
    pub sites: Vec<BlowupSite>,
    pub t_first: Option<f64>,
    /// Minimum of the tan-form denominator over grid and sampled times.
    pub margin: f64,
    pub horizon: f64,
}

impl BlowupReport {
    /// Every instant in [0, t_end] at which some site degenerates; a site
    /// with first time t₀ degenerates again at t₀ + 2πk/Ω.
    pub fn instants(&self, params: &SimParams, t_end: f64) -> Vec<f64> {
        let period = 2.0 * PI / params.omega();
        let mut out = Vec::new();
        for site in &self.sites {
            let mut t = site.t0;
            while t <= t_end {
                out.push(t);
                t += period;
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginRow {
    pub s: f64,
    pub sites: usize,
    pub t_first: Option<f64>,
    pub min_denominator: f64,
}

/// Right-hand side of dZ/dt = −½Z² + isZ − 2(c² − sδ).
pub fn riccati_rhs(z: Complex64, s: f64, c2: f64, delta: f64) -> Complex64 {
    -0.5 * z * z + Complex64::new(0.0, s) * z - 2.0 * (c2 - s * delta)
}

/// Z at a single point. Returns `None` when |γ|² = A² + B² < `eps`.
pub fn riccati_point(u0x: f64, rho0: f64, params: &SimParams, t: f64, eps: f64) -> Option<Complex64> {
    let omega = params.omega();
    let (sa, ca) = (0.5 * omega * t).sin_cos();
    let excess = rho0 - params.s;
    let a = ca + u0x / omega * sa;
    let b = excess / omega * sa;
    let a_dot = -0.5 * omega * sa + 0.5 * u0x * ca;
    let b_dot = 0.5 * excess * ca;
    let norm = a * a + b * b;
    if norm < eps {
        return None;
    }
    let re = 2.0 * (a_dot * a + b_dot * b) / norm;
    let im = params.s + 2.0 * (b_dot * a - a_dot * b) / norm;
    Some(Complex64::new(re, im))
}

/// Z(t, ·) for the whole grid.
pub fn riccati_explicit(data: &InitialData, params: &SimParams, t: f64) -> RiccatiField {
    let (z, at_blowup) = data
        .u0x
        .par_iter()
        .zip(data.rho0.par_iter())
        .map(|(&ux, &r)| match riccati_point(ux, r, params, t, params.eps_phi_x) {
            Some(z) => (z, false),
            None => (Complex64::new(f64::NAN, f64::NAN), true),
        })
        .unzip();
    RiccatiField { t, z, at_blowup }
}

/// (U, P) from the literal tan-form representation.
///
/// Errors with [`Error::TanPole`] when Ωt/2 lies within 1e-6 of an odd
/// multiple of π/2.
pub fn explicit_u_rho_tanform(u0x: f64, rho0: f64, params: &SimParams, t: f64) -> Result<(f64, f64)> {
    let omega = params.omega();
    let arg = 0.5 * omega * t;
    let shifted = (arg - FRAC_PI_2).rem_euclid(PI);
    if shifted.min(PI - shifted) < TAN_POLE_GAP {
        return Err(Error::TanPole { t });
    }
    let tan = arg.tan();
    let tt = tan / omega;
    let excess = rho0 - params.s;
    let first = 1.0 + u0x * tt;
    let den = first * first + (excess * tt).powi(2);
    let u = ((-omega * tan + u0x) * first + excess * excess * tt) / den;
    let p = params.s + (1.0 + tan * tan) * excess / den;
    Ok((u, p))
}

/// Tan-form denominator (1 + u₀ₓT)² + ((ρ₀ − s)T)², T = tan(Ωt/2)/Ω.
pub fn tan_denominator(u0x: f64, rho0: f64, params: &SimParams, t: f64) -> f64 {
    let omega = params.omega();
    let tt = (0.5 * omega * t).tan() / omega;
    (1.0 + u0x * tt).powi(2) + ((rho0 - params.s) * tt).powi(2)
}

/// arccot valued in (0, π).
pub fn arccot(y: f64) -> f64 {
    FRAC_PI_2 - y.atan()
}

/// First positive blow-up time at a point with ρ₀ = s.
pub fn blowup_time(u0x: f64, params: &SimParams) -> f64 {
    let omega = params.omega();
    2.0 * arccot(-u0x / omega) / omega
}

fn sweep_min(data: &InitialData, params: &SimParams, horizon: f64, samples: usize) -> f64 {
    let times: Vec<f64> = if samples <= 1 {
        vec![0.0]
    } else {
        (0..samples).map(|k| horizon * k as f64 / (samples - 1) as f64).collect()
    };
    let omega = params.omega();
    let per_point: Vec<f64> = data
        .u0x
        .par_iter()
        .zip(data.rho0.par_iter())
        .map(|(&ux, &r)| {
            times
                .iter()
                .filter(|&&t| {
                    let shifted = (0.5 * omega * t - FRAC_PI_2).rem_euclid(PI);
                    shifted.min(PI - shifted) >= TAN_POLE_GAP
                })
                .map(|&t| tan_denominator(ux, r, params, t))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    per_point.into_iter().fold(f64::INFINITY, f64::min)
}

fn collect_sites(data: &InitialData, params: &SimParams, rho_tol: f64) -> Vec<BlowupSite> {
    data.rho0
        .iter()
        .zip(&data.u0x)
        .enumerate()
        .filter(|(_, (r, _))| (**r - params.s).abs() <= rho_tol)
        .map(|(j, (_, ux))| BlowupSite { index: j, x: data.grid.x(j), t0: blowup_time(*ux, params) })
        .collect()
}

/// Blow-up sites ρ₀(x_j) = s (within `rho_tol`) with their first blow-up
/// times, and the denominator margin over one period 2π/Ω.
pub fn blowup_scan(data: &InitialData, params: &SimParams, rho_tol: f64) -> BlowupReport {
    blowup_scan_over(data, params, rho_tol, 2.0 * PI / params.omega())
}

pub fn blowup_scan_over(
    data: &InitialData,
    params: &SimParams,
    rho_tol: f64,
    horizon: f64,
) -> BlowupReport {
    let sites = collect_sites(data, params, rho_tol);
    let t_first = sites.iter().map(|s| s.t0).min_by(f64::total_cmp);
    let margin = sweep_min(data, params, horizon, MARGIN_SAMPLES);
    BlowupReport { occurs: !sites.is_empty(), sites, t_first, margin, horizon }
}

/// Earliest blow-up of the continuum profile, including crossings ρ₀ = s
/// that fall between grid points (located by linear interpolation of ρ₀ − s
/// and u₀ₓ). `None` when ρ₀ − s keeps one sign.
pub fn interpolated_blowup_time(data: &InitialData, params: &SimParams) -> Option<f64> {
    let n = data.n();
    let mut best: Option<f64> = None;
    for j in 0..n {
        let k = (j + 1) % n;
        let (dj, dk) = (data.rho0[j] - params.s, data.rho0[k] - params.s);
        let slope = if dj.abs() <= params.rho_tol {
            Some(data.u0x[j])
        } else if dj * dk < 0.0 && dk.abs() > params.rho_tol {
            let lam = dj / (dj - dk);
            Some((1.0 - lam) * data.u0x[j] + lam * data.u0x[k])
        } else {
            None
        };
        if let Some(ux) = slope {
            let t0 = blowup_time(ux, params);
            best = Some(best.map_or(t0, |b| b.min(t0)));
        }
    }
    best
}

/// Site count and swept denominator minimum for each magnetic strength.
pub fn large_s_margin(
    data: &InitialData,
    s_values: &[f64],
    horizon: f64,
    rho_tol: f64,
) -> Vec<(f64, Result<MarginRow>)> {
    let (c2, delta) = (data.energy(), data.contact_angle());
    s_values
        .iter()
        .map(|&s| {
            let row = SimParams::new(s, c2, delta).map(|params| {
                let sites = collect_sites(data, &params, rho_tol);
                MarginRow {
                    s,
                    sites: sites.len(),
                    t_first: sites.iter().map(|s| s.t0).min_by(f64::total_cmp),
                    min_denominator: sweep_min(data, &params, horizon, MARGIN_SAMPLES),
                }
            });
            (s, row)
        })
        .collect()
}
