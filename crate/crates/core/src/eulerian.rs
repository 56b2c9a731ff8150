//! Pull-back of the relaxed configuration to Eulerian variables and the
//! residuals of the evolution equations.
//!
//! u(t, φ(t, x)) = φ_t(t, x) and ρ(t, φ(t, x)) = τ_t(t, x). Target points y_j
//! are pulled back through the generalized inverse of φ. Inside a cell φ and
//! φ_t are cubic Hermite interpolants (slopes φ_x and φ_tx are exact at the
//! nodes); u_x∘φ and τ_t use four-point Lagrange interpolation. The Hermite
//! cubic of a trapezoid-accumulated φ with non-negative slopes is monotone on
//! every cell.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{cumulative_integral, cumulative_integral_corrected, energy, trapezoid, SimParams};
use crate::error::{Error, Result};
use crate::weakflow::{LagrangianState, WeakFlow};

pub use crate::domain::periodic_derivative as fd4_derivative;

/// Decreasing steps of φ smaller than this are treated as round-off.
const MONOTONE_SLACK: f64 = 1e-13;

/// Local coordinates this close to a cell end are moved onto the node.
const SNAP: f64 = 1e-12;

/// Default time step of the central differences used for u_t and ρ_t.
pub const DT_FD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EulerianState {
    pub t: f64,
    pub u: Vec<f64>,
    pub u_x: Vec<f64>,
    pub rho: Vec<f64>,
    /// Samples whose pre-image cell touches the degeneracy set.
    pub quality: usize,
}

impl EulerianState {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.u_x, &self.rho).expect("state fields share one grid")
    }

    pub fn contact_angle(&self) -> f64 {
        crate::domain::contact_angle(&self.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub sup: f64,
    pub l2: f64,
    /// ∫(½u_x² + ½ρ² − sρ) − 2(c² − sδ) for the u residual; zero for ρ.
    pub periodic_consistency: f64,
}

fn norms(r: &[f64], periodic_consistency: f64) -> ResidualNorms {
    let sup = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    ResidualNorms { sup, l2: trapezoid(&sq).sqrt(), periodic_consistency }
}

fn check_monotone(phi: &[f64]) -> Result<()> {
    for (index, w) in phi.windows(2).enumerate() {
        if w[1] < w[0] - MONOTONE_SLACK {
            return Err(Error::NonMonotone { index, left: w[0], right: w[1] });
        }
    }
    Ok(())
}

/// First node index k with phi[k] ≥ y (phi non-decreasing).
fn first_reaching(phi: &[f64], y: f64) -> usize {
    phi.partition_point(|v| *v < y)
}

/// Left-continuous generalized inverse of a non-decreasing map sampled on
/// x_k = k/(len − 1), by binary search and linear interpolation. On a
/// plateau at level y the left endpoint is returned.
pub fn generalized_inverse(phi: &[f64], y: f64) -> Result<f64> {
    if phi.len() < 2 {
        return Err(Error::InvalidArgument("map needs at least two samples".into()));
    }
    check_monotone(phi)?;
    let n = phi.len() - 1;
    let h = 1.0 / n as f64;
    let k = first_reaching(phi, y);
    if k == 0 {
        return Ok(0.0);
    }
    if k > n {
        return Ok(1.0);
    }
    let (lo, hi) = (phi[k - 1], phi[k]);
    let frac = if hi > lo { (y - lo) / (hi - lo) } else { 1.0 };
    Ok(((k - 1) as f64 + frac) * h)
}

/// Monotone cubic Hermite representation of φ for repeated inversion.
#[derive(Debug, Clone)]
pub struct HermiteMap<'a> {
    phi: &'a [f64],
    slope: &'a [f64],
    h: f64,
}

/// Location of a pulled-back point: cell index and local coordinate in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPoint {
    pub cell: usize,
    pub s: f64,
}

#[inline]
fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * h * m1
}

#[inline]
fn hermite_ds(p0: f64, p1: f64, m0: f64, m1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s) * p0 + (3.0 * s2 - 4.0 * s + 1.0) * h * m0 + (-6.0 * s2 + 6.0 * s) * p1
        + (3.0 * s2 - 2.0 * s) * h * m1
}

impl<'a> HermiteMap<'a> {
    /// `phi` on n + 1 nodes, periodic `slope` on n nodes.
    pub fn new(phi: &'a [f64], slope: &'a [f64]) -> Result<Self> {
        if phi.len() != slope.len() + 1 {
            return Err(Error::GridMismatch { expected: slope.len() + 1, got: phi.len() });
        }
        check_monotone(phi)?;
        Ok(Self { phi, slope, h: 1.0 / slope.len() as f64 })
    }

    fn n(&self) -> usize {
        self.slope.len()
    }

    fn slopes(&self, cell: usize) -> (f64, f64) {
        (self.slope[cell], self.slope[(cell + 1) % self.n()])
    }

    pub fn value(&self, at: CellPoint) -> f64 {
        let (m0, m1) = self.slopes(at.cell);
        hermite(self.phi[at.cell], self.phi[at.cell + 1], m0, m1, self.h, at.s)
    }

    /// Leftmost x with φ(x) ≥ y.
    pub fn inverse(&self, y: f64) -> CellPoint {
        let n = self.n();
        let k = first_reaching(self.phi, y);
        if k == 0 {
            return CellPoint { cell: 0, s: 0.0 };
        }
        if k > n {
            return CellPoint { cell: n - 1, s: 1.0 };
        }
        let cell = k - 1;
        let (p0, p1) = (self.phi[cell], self.phi[k]);
        if p1 == y {
            return self.node(k);
        }
        let (m0, m1) = self.slopes(cell);
        // safeguarded Newton on the bracket [0, 1]
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut s = if p1 > p0 { (y - p0) / (p1 - p0) } else { 0.5 };
        for _ in 0..100 {
            let f = hermite(p0, p1, m0, m1, self.h, s) - y;
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let df = hermite_ds(p0, p1, m0, m1, self.h, s);
            let mut next = if df > 0.0 { s - f / df } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-16 || hi - lo <= 1e-16 {
                s = next;
                break;
            }
            s = next;
        }
        // snap onto nodes so that grid-aligned targets reproduce nodal values
        if s >= 1.0 - SNAP {
            self.node(k)
        } else if s <= SNAP {
            CellPoint { cell, s: 0.0 }
        } else {
            CellPoint { cell, s }
        }
    }

    fn node(&self, k: usize) -> CellPoint {
        if k < self.n() {
            CellPoint { cell: k, s: 0.0 }
        } else {
            CellPoint { cell: k - 1, s: 1.0 }
        }
    }
}

/// Four-point Lagrange interpolation of a periodic nodal field.
fn lagrange4(f: &[f64], at: CellPoint) -> f64 {
    let n = f.len();
    let c = at.cell;
    let fm = f[(c + n - 1) % n];
    let f0 = f[c % n];
    let f1 = f[(c + 1) % n];
    let f2 = f[(c + 2) % n];
    let s = at.s;
    let wm = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let w0 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let w1 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let w2 = (s + 1.0) * s * (s - 1.0) / 6.0;
    wm * fm + w0 * f0 + w1 * f1 + w2 * f2
}

/// Eulerian (u, u_x, ρ) on the uniform grid y_j = j/n.
pub fn reconstruct(state: &LagrangianState) -> Result<EulerianState> {
    let n = state.n();
    let eps = state.eps_phi_x;
    let map = HermiteMap::new(&state.phi, &state.phi_x)?;
    let degenerate: Vec<bool> = state.phi_x.iter().map(|v| *v <= eps).collect();
    let slope_nodes: Vec<f64> = state
        .phi_tx
        .iter()
        .zip(&state.phi_x)
        .zip(&degenerate)
        .map(|((ptx, px), d)| if *d { 0.0 } else { ptx / px })
        .collect();
    let velocity = HermiteMap { phi: &state.phi_t, slope: &state.phi_tx, h: map.h };

    let rows: Vec<(f64, f64, f64, bool)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = j as f64 / n as f64;
            let at = map.inverse(y);
            let u = velocity.value(at);
            let c = at.cell;
            let touches = degenerate[c] || degenerate[(c + 1) % n];
            if touches {
                return (u, 0.0, lagrange2(&state.tau_t, at), true);
            }
            let outer = degenerate[(c + n - 1) % n] || degenerate[(c + 2) % n];
            let (ux, rho) = if outer {
                (lagrange2(&slope_nodes, at), lagrange2(&state.tau_t, at))
            } else {
                (lagrange4(&slope_nodes, at), lagrange4(&state.tau_t, at))
            };
            (u, ux, rho, false)
        })
        .collect();

    let mut out = EulerianState {
        t: state.t,
        u: Vec::with_capacity(n),
        u_x: Vec::with_capacity(n),
        rho: Vec::with_capacity(n),
        quality: 0,
    };
    for (u, ux, rho, flagged) in rows {
        out.u.push(u);
        out.u_x.push(ux);
        out.rho.push(rho);
        out.quality += flagged as usize;
    }
    // gauge: φ_t(t, 0) = 0 and y_0 = 0 pulls back to x = 0
    out.u[0] = state.phi_t[0];
    Ok(out)
}

fn lagrange2(f: &[f64], at: CellPoint) -> f64 {
    let n = f.len();
    (1.0 - at.s) * f[at.cell % n] + at.s * f[(at.cell + 1) % n]
}

/// u_t + u u_x − ∫₀^x(½u_x² + ½ρ² − sρ) + 2x(c² − sδ), the momentum equation
/// integrated once in x under the gauge u(t, 0) = 0.
pub fn residual_u(state: &EulerianState, u_t: &[f64], params: &SimParams) -> Result<ResidualNorms> {
    let n = state.n();
    if u_t.len() != n {
        return Err(Error::GridMismatch { expected: n, got: u_t.len() });
    }
    let s = params.s;
    let q = params.forcing();
    let integrand: Vec<f64> = state
        .u_x
        .iter()
        .zip(&state.rho)
        .map(|(ux, r)| 0.5 * ux * ux + 0.5 * r * r - s * r)
        .collect();
    let primitive = cumulative_integral(&integrand);
    let h = 1.0 / n as f64;
    let r: Vec<f64> = (0..n)
        .map(|j| u_t[j] + state.u[j] * state.u_x[j] - primitive[j] + 2.0 * (j as f64 * h) * q)
        .collect();
    Ok(norms(&r, primitive[n] - 2.0 * q))
}

/// ρ_t + (ρu)_x − s u_x with both spatial derivatives taken by the same
/// fourth-order stencil.
pub fn residual_rho(state: &EulerianState, rho_t: &[f64], params: &SimParams) -> Result<ResidualNorms> {
    let n = state.n();
    if rho_t.len() != n {
        return Err(Error::GridMismatch { expected: n, got: rho_t.len() });
    }
    let flux: Vec<f64> = state.rho.iter().zip(&state.u).map(|(r, u)| r * u).collect();
    let dflux = fd4_derivative(&flux);
    let du = fd4_derivative(&state.u);
    let r: Vec<f64> = (0..n).map(|j| rho_t[j] + dflux[j] - params.s * du[j]).collect();
    Ok(norms(&r, 0.0))
}

/// Reconstructed states at t − dt, t, t + dt and the central differences
/// (u_t, ρ_t) at t.
pub fn central_state(flow: &WeakFlow<'_>, t: f64, dt_fd: f64) -> Result<(EulerianState, Vec<f64>, Vec<f64>)> {
    let before = reconstruct(&flow.velocity_state(t - dt_fd))?;
    let mid = reconstruct(&flow.velocity_state(t))?;
    let after = reconstruct(&flow.velocity_state(t + dt_fd))?;
    let inv = 0.5 / dt_fd;
    let u_t = after.u.iter().zip(&before.u).map(|(a, b)| (a - b) * inv).collect();
    let rho_t = after.rho.iter().zip(&before.rho).map(|(a, b)| (a - b) * inv).collect();
    Ok((mid, u_t, rho_t))
}

/// Sup-norms of the composed residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComposedResiduals {
    pub u: f64,
    pub rho: f64,
    /// Points skipped in the ρ component.
    pub unresolved: usize,
}

/// Residuals of both components composed with φ, evaluated in Lagrangian
/// coordinates:
///
/// * φ_tt − ∫₀^x(½U² + ½P² − sP)φ_x + 2φ(c² − sδ), with (½U² + ½P²)φ_x the
///   relaxed energy density;
/// * (P_t + (P − s)U)/(1 + |P_t| + |(P − s)U|) at grid points where
///   |γ|/|γ̇| > 50·dt_fd on the whole stencil (this excludes the degeneracy
///   set and the neighbourhood the difference cannot resolve).
///
/// Time derivatives are five-point central differences of φ_t and τ_t.
pub fn composed_residuals(flow: &WeakFlow<'_>, t: f64, dt_fd: f64) -> ComposedResiduals {
    let eps = flow.params.eps_phi_x;
    let s = flow.params.s;
    let q = flow.params.forcing();
    let gammas: Vec<_> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|k| flow.gamma(t + k * dt_fd)).collect();
    let states: Vec<_> = gammas.iter().map(|g| flow.assemble(g, None)).collect();
    let mid = &states[2];
    let n = mid.n();
    let ddt = |f: &dyn Fn(&LagrangianState) -> f64| {
        (f(&states[0]) - 8.0 * f(&states[1]) + 8.0 * f(&states[3]) - f(&states[4])) / (12.0 * dt_fd)
    };

    let density: Vec<f64> = (0..n)
        .map(|j| {
            let px = mid.phi_x[j];
            if px > eps {
                let (ptx, tt) = (mid.phi_tx[j], mid.tau_t[j]);
                0.5 * (ptx * ptx / px + tt * tt * px) - s * tt * px
            } else {
                0.0
            }
        })
        .collect();
    let primitive = cumulative_integral_corrected(&density);
    let mut sup_u = 0.0_f64;
    for j in 0..=n {
        let phi_tt = ddt(&|st| st.phi_t[j]);
        let r = phi_tt - primitive[j] + 2.0 * mid.phi[j] * q;
        sup_u = sup_u.max(r.abs());
    }

    let horizon = 50.0 * dt_fd;
    let mut sup_rho = 0.0_f64;
    let mut unresolved = 0;
    for j in 0..n {
        let resolved = gammas.iter().all(|g| g.gamma[j].norm() > horizon * g.gamma_dot[j].norm())
            && states.iter().all(|st| st.phi_x[j] > eps);
        if !resolved {
            unresolved += 1;
            continue;
        }
        let p_t = ddt(&|st| st.tau_t[j]);
        let transport = (mid.tau_t[j] - s) * mid.phi_tx[j] / mid.phi_x[j];
        sup_rho = sup_rho.max((p_t + transport).abs() / (1.0 + p_t.abs() + transport.abs()));
    }
    ComposedResiduals { u: sup_u, rho: sup_rho, unresolved }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationRow {
    pub t: f64,
    pub energy: f64,
    pub angle: f64,
    pub energy_deviation: f64,
    pub angle_deviation: f64,
    pub degenerate: bool,
}

/// Energy and contact angle per state, with deviations from (c², δ) and a
/// flag for times within `window` of any listed blow-up instant.
pub fn conservation_report(
    trajectory: &[EulerianState],
    params: &SimParams,
    blowup_instants: &[f64],
    window: f64,
) -> Vec<ConservationRow> {
    trajectory
        .iter()
        .map(|st| {
            let e = st.energy();
            let a = st.contact_angle();
            ConservationRow {
                t: st.t,
                energy: e,
                angle: a,
                energy_deviation: e - params.c2,
                angle_deviation: a - params.delta,
                degenerate: blowup_instants.iter().any(|t0| (st.t - t0).abs() <= window),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{fourier_synthesize, normalize, Grid, InitialData, Mode};
    use crate::lagrangian::{interpolated_blowup_time, riccati_explicit};

    fn smooth_data(n: usize) -> InitialData {
        let g = Grid::new(n).unwrap();
        let raw =
            fourier_synthesize(&[Mode::new(1, 0.2, 0.1)], &[Mode::new(1, 0.2, 0.1)], 1.5, g).unwrap();
        normalize(&raw).unwrap().0
    }

    #[test]
    fn inverse_of_identity() {
        let phi: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        assert!((generalized_inverse(&phi, 0.37).unwrap() - 0.37).abs() < 1e-15);
        assert_eq!(generalized_inverse(&phi, 0.0).unwrap(), 0.0);
        assert!((generalized_inverse(&phi, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_plateau_returns_left_endpoint() {
        // rises to 0.5 on [0, 0.25], flat on [0.25, 0.75], rises to 1
        let phi: Vec<f64> = (0..=8)
            .map(|k| match k {
                0..=2 => 0.25 * k as f64,
                3..=6 => 0.5,
                _ => 0.5 + 0.25 * (k - 6) as f64,
            })
            .collect();
        assert_eq!(generalized_inverse(&phi, 0.5).unwrap(), 0.25);
        assert!((generalized_inverse(&phi, 0.6).unwrap() - (0.75 + 0.4 * 0.125)).abs() < 1e-15);
    }

    #[test]
    fn inverse_rejects_non_monotone() {
        let phi = [0.0, 0.5, 0.4, 1.0];
        assert!(matches!(generalized_inverse(&phi, 0.3), Err(Error::NonMonotone { index: 1, .. })));
    }

    #[test]
    fn linear_inverse_round_trip() {
        let d = smooth_data(256);
        let p = SimParams::from_data(&d, 0.5).unwrap();
        let st = WeakFlow::new(&d, p).velocity_state(0.6);
        let max_slope = st.phi_x.iter().copied().fold(0.0, f64::max);
        let h = 1.0 / 256.0;
        for k in 1..50 {
            let y = k as f64 / 50.0;
            let x = generalized_inverse(&st.phi, y).unwrap();
            let j = ((x / h).floor() as usize).min(255);
            let frac = x / h - j as f64;
            let back = (1.0 - frac) * st.phi[j] + frac * st.phi[j + 1];
            assert!((back - y).abs() <= h * max_slope);
        }
    }

    #[test]
    fn hermite_inverse_round_trip() {
        let d = smooth_data(128);
        let p = SimParams::from_data(&d, 0.5).unwrap();
        let st = WeakFlow::new(&d, p).velocity_state(1.1);
        let map = HermiteMap::new(&st.phi, &st.phi_x).unwrap();
        for k in 0..97 {
            let y = k as f64 / 97.0;
            let at = map.inverse(y);
            assert!((map.value(at) - y).abs() < 1e-14, "y = {y}");
        }
    }

    #[test]
    fn reconstruct_at_zero_reproduces_data() {
        let d = smooth_data(64);
        let p = SimParams::from_data(&d, 0.8).unwrap();
        let e = reconstruct(&WeakFlow::new(&d, p).velocity_state(0.0)).unwrap();
        for j in 0..64 {
            assert!((e.u[j] - d.u0[j]).abs() < 1e-14, "u at {j}: {} vs {}", e.u[j], d.u0[j]);
            assert!((e.u_x[j] - d.u0x[j]).abs() < 1e-12);
            assert!((e.rho[j] - d.rho0[j]).abs() < 1e-12);
        }
        assert_eq!(e.u[0], 0.0);
        assert_eq!(e.quality, 0);
    }

    #[test]
    fn reconstruction_matches_riccati_slope() {
        let d = smooth_data(512);
        let p = SimParams::from_data(&d, 0.5).unwrap();
        let horizon = interpolated_blowup_time(&d, &p).unwrap_or(2.0);
        let flow = WeakFlow::new(&d, p);
        for t in [0.3 * horizon, 0.6 * horizon] {
            let st = flow.velocity_state(t);
            let e = reconstruct(&st).unwrap();
            let z = riccati_explicit(&d, &p, t);
            let map = HermiteMap::new(&st.phi, &st.phi_x).unwrap();
            // compare Re Z(x_j) with u_x sampled at y = φ(x_j)
            let mut worst = 0.0_f64;
            for j in (0..512).step_by(3) {
                let at = map.inverse(st.phi[j]);
                let ux = lagrange4(
                    &st.phi_tx.iter().zip(&st.phi_x).map(|(a, b)| a / b).collect::<Vec<_>>(),
                    at,
                );
                worst = worst.max((ux - z.z[j].re).abs());
            }
            assert!(worst < 1e-6, "worst {worst}");
            assert!((e.energy() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn residual_periodic_consistency() {
        let d = smooth_data(256);
        let p = SimParams::from_data(&d, 0.7).unwrap();
        let flow = WeakFlow::new(&d, p);
        let (st, u_t, rho_t) = central_state(&flow, 0.4, DT_FD).unwrap();
        let ru = residual_u(&st, &u_t, &p).unwrap();
        assert!(ru.periodic_consistency.abs() < 1e-6, "{}", ru.periodic_consistency);
        let rr = residual_rho(&st, &rho_t, &p).unwrap();
        assert!(ru.sup < 1e-3 && rr.sup < 1e-3, "{ru:?} {rr:?}");
    }

    #[test]
    fn constant_density_stays_put() {
        let g = Grid::new(128).unwrap();
        let s = 1.2;
        let d = fourier_synthesize(&[Mode::new(1, 0.1, 0.05)], &[], s, g).unwrap();
        let p = SimParams::from_data(&d, s).unwrap();
        let flow = WeakFlow::new(&d, p);
        let (st, _, rho_t) = central_state(&flow, 0.3, DT_FD).unwrap();
        assert!(st.rho.iter().all(|r| (r - s).abs() < 1e-6));
        assert!(rho_t.iter().all(|r| r.abs() < 1e-6));
        let rr = residual_rho(&st, &rho_t, &p).unwrap();
        assert!(rr.sup < 1e-6);
    }

    #[test]
    fn composed_residuals_vanish_for_ode_tau() {
        let d = smooth_data(256);
        let p = SimParams::from_data(&d, 1.0).unwrap();
        let flow = WeakFlow::new(&d, p);
        let r = composed_residuals(&flow, 0.7, DT_FD);
        assert!(r.u < 1e-6 && r.rho < 1e-6, "{r:?}");
        assert_eq!(r.unresolved, 0);
        let verbatim = flow.with_variant(crate::weakflow::TauVariant::PaperVerbatim);
        assert!(composed_residuals(&verbatim, 0.7, DT_FD).rho > 1e-3);
    }

    #[test]
    fn fd4_is_fourth_order() {
        let err = |n: usize| {
            let f: Vec<f64> = (0..n).map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).sin()).collect();
            let d = fd4_derivative(&f);
            (0..n)
                .map(|j| {
                    let x = j as f64 / n as f64;
                    (d[j] - 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 14.0, "ratio {ratio}");
    }

    #[test]
    fn conservation_rows() {
        let d = smooth_data(128);
        let p = SimParams::from_data(&d, 0.5).unwrap();
        let flow = WeakFlow::new(&d, p);
        let states: Vec<_> = [0.0, 0.2].iter().map(|&t| reconstruct(&flow.velocity_state(t)).unwrap()).collect();
        let rows = conservation_report(&states, &p, &[0.2], 1e-3);
        assert_eq!(rows[0].energy, d.energy());
        assert_eq!(rows[0].angle, d.contact_angle());
        assert!(!rows[0].degenerate && rows[1].degenerate);
    }
}
