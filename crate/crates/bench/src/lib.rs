//! Fixtures shared by the kernel benchmarks.

use m2hs_core::{fourier_synthesize, normalize, seeded_profile, Grid, InitialData, Mode, SimParams};

/// Smooth unit-energy data without blow-up sites.
pub fn smooth(n: usize) -> InitialData {
    let raw = fourier_synthesize(
        &[Mode::new(1, 0.2, 0.1), Mode::new(2, 0.05, -0.03)],
        &[Mode::new(1, 0.25, 0.1)],
        1.3,
        Grid::new(n).expect("even grid"),
    )
    .expect("band-limited modes");
    normalize(&raw).expect("nonzero energy").0
}

/// Unit-energy data with ρ₀ = s at one grid point.
pub fn seeded(n: usize, s: f64) -> InitialData {
    seeded_profile(Grid::new(n).expect("even grid"), s, n / 3, &[Mode::new(1, 0.1, 0.05)], 1).expect("seedable")
}

pub fn params(data: &InitialData, s: f64) -> SimParams {
    SimParams::from_data(data, s).expect("positive discriminant")
}
