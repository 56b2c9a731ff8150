//! simulate, blowup and validate.

use std::f64::consts::PI;
use std::path::Path;

use m2hs_core::eulerian::reconstruct;
use m2hs_core::lagrangian::{blowup_scan, blowup_scan_over, interpolated_blowup_time, riccati_explicit, BlowupReport};
use m2hs_core::oracle::{mol_m2hs, rk4_up};
use m2hs_core::weakflow::{
    degeneracy_events, gamma_pq_form, relaxed_energy, sphere_ode_residual, tau_rate, weak_geodesic_check,
    DegeneracyEvent, WeakCheckConfig, WeakFlow,
};
use m2hs_core::{InitialData, OdeRunConfig, SimParams, TauVariant};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::output::{float, optional, write_json, Csv};
use crate::CliError;

/// Uniform samples per period 2π/Ω in the degeneracy scan.
const EVENT_MESH_PER_PERIOD: f64 = 2000.0;

/// Runtime step of the brute-force oracles.
const ORACLE_DT: f64 = 1e-4;

/// Data, parameters and the blow-up picture shared by all subcommands.
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub data: InitialData,
    pub params: SimParams,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, CliError> {
        let data = cfg.initial_data()?;
        let params = SimParams::from_data(&data, cfg.s)?;
        Ok(Self { cfg, data, params })
    }

    fn flow(&self) -> WeakFlow<'_> {
        WeakFlow::new(&self.data, self.params).with_variant(self.cfg.tau)
    }

    fn output_dir(&self) -> Result<&Path, CliError> {
        let dir = self.cfg.output_dir.as_path();
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

/// Grid blow-up sites, located degeneracy intervals in [0, t_end] and the
/// merged list of blow-up instants.
struct BlowupPicture {
    report: BlowupReport,
    interpolated: Option<f64>,
    events: Vec<DegeneracyEvent>,
    instants: Vec<f64>,
}

impl BlowupPicture {
    fn new(data: &InitialData, params: &SimParams, t_end: f64) -> Self {
        let report = blowup_scan(data, params, params.rho_tol);
        let interpolated = interpolated_blowup_time(data, params);
        let events = if t_end > 0.0 {
            let periods = t_end * params.omega() / (2.0 * PI);
            let mesh = ((periods * EVENT_MESH_PER_PERIOD).ceil() as usize).max(64);
            degeneracy_events(data, params, params.eps_phi_x, t_end, mesh)
        } else {
            Vec::new()
        };
        let mut instants = report.instants(params, t_end);
        instants.extend(events.iter().map(DegeneracyEvent::midpoint));
        instants.sort_by(f64::total_cmp);
        Self { report, interpolated, events, instants }
    }

    fn near(&self, t: f64, window: f64) -> bool {
        self.instants.iter().any(|t0| (t - t0).abs() <= window)
    }

    /// Earliest blow-up of the profile, grid sites first.
    fn t_first(&self) -> Option<f64> {
        self.report.t_first.or(self.interpolated)
    }
}

#[derive(Serialize)]
struct ParamsReport {
    n: usize,
    s: f64,
    c2: f64,
    delta: f64,
    theta1: f64,
    theta2: f64,
    omega: f64,
    eps_phi_x: f64,
    tau: String,
}

impl ParamsReport {
    fn new(sc: &Scenario, p: &SimParams) -> Self {
        Self {
            n: sc.data.n(),
            s: p.s,
            c2: p.c2,
            delta: p.delta,
            theta1: p.theta1,
            theta2: p.theta2,
            omega: p.omega(),
            eps_phi_x: p.eps_phi_x,
            tau: sc.cfg.tau.to_string(),
        }
    }
}

#[derive(Serialize)]
struct EventReport {
    entry: f64,
    exit: f64,
    midpoint: f64,
    depth: f64,
}

#[derive(Serialize)]
struct BlowupSummary {
    occurs: bool,
    sites: usize,
    site_x: Vec<f64>,
    t_first: Option<f64>,
    t_first_interpolated: Option<f64>,
    margin: f64,
    margin_horizon: f64,
    events: Vec<EventReport>,
}

impl BlowupSummary {
    fn new(b: &BlowupPicture) -> Self {
        Self {
            occurs: b.report.occurs,
            sites: b.report.sites.len(),
            site_x: b.report.sites.iter().map(|s| s.x).collect(),
            t_first: b.report.t_first,
            t_first_interpolated: b.interpolated,
            margin: b.report.margin,
            margin_horizon: b.report.horizon,
            events: b
                .events
                .iter()
                .map(|e| EventReport { entry: e.entry, exit: e.exit, midpoint: e.midpoint(), depth: e.depth })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct TimeReport {
    t_start: f64,
    t_end: f64,
    samples: usize,
}

#[derive(Serialize)]
struct Deviations {
    /// Over rows without the degenerate flag.
    energy: f64,
    angle: f64,
    /// Same, restricted to rows after the first blow-up.
    energy_after_blowup: Option<f64>,
    /// Largest energy deficit over flagged rows.
    energy_dip: Option<f64>,
}

#[derive(Serialize)]
struct Quality {
    reconstruction_flags: usize,
    clamped_tau_points: usize,
    degenerate_rows: usize,
    max_degenerate_points: usize,
}

#[derive(Serialize)]
struct SimulateSummary {
    command: &'static str,
    params: ParamsReport,
    time: TimeReport,
    blowup: BlowupSummary,
    max_deviations: Deviations,
    quality: Quality,
}

/// What a subcommand wrote, for the one-line report on stdout.
#[derive(Debug)]
pub struct Written {
    pub files: Vec<String>,
    pub note: String,
}

/// Weak-flow trajectory at the sampled times: states.csv,
/// conservation.csv and summary.json.
pub fn simulate(sc: &Scenario) -> Result<Written, CliError> {
    let dir = sc.output_dir()?;
    let times = sc.cfg.time.times();
    let t_end = times.last().copied().unwrap_or(0.0);
    let blowup = BlowupPicture::new(&sc.data, &sc.params, t_end);
    let flow = sc.flow();
    let eps = sc.params.eps_phi_x;
    let window = sc.cfg.tolerances.degeneracy_window;
    let stride = sc.cfg.simulate.x_stride;
    let n = sc.data.n();

    let mut states = Csv::new(&["t", "x", "u", "u_x", "rho"]);
    let mut conservation = Csv::new(&["t", "energy", "angle", "degenerate_flag"]);
    let mut dev = Deviations { energy: 0.0, angle: 0.0, energy_after_blowup: None, energy_dip: None };
    let mut quality = Quality { reconstruction_flags: 0, clamped_tau_points: 0, degenerate_rows: 0, max_degenerate_points: 0 };
    let t_first = blowup.t_first();

    for &t in &times {
        let lag = flow.velocity_state(t);
        let eul = reconstruct(&lag)?;
        for j in (0..n).step_by(stride) {
            states.row(&[float(t), float(sc.data.grid.x(j)), float(eul.u[j]), float(eul.u_x[j]), float(eul.rho[j])]);
        }
        let energy = relaxed_energy(&lag, eps);
        let angle = lag.pulled_back_angle();
        let degenerate_points = lag.degenerate_count();
        let flagged = degenerate_points > 0 || blowup.near(t, window);
        conservation.row(&[float(t), float(energy), float(angle), u8::from(flagged).to_string()]);

        let de = energy - sc.params.c2;
        if flagged {
            quality.degenerate_rows += 1;
            dev.energy_dip = Some(dev.energy_dip.unwrap_or(0.0).max(-de));
        } else {
            dev.energy = dev.energy.max(de.abs());
            dev.angle = dev.angle.max((angle - sc.params.delta).abs());
            if t_first.is_some_and(|t0| t > t0) {
                dev.energy_after_blowup = Some(dev.energy_after_blowup.unwrap_or(0.0).max(de.abs()));
            }
        }
        quality.reconstruction_flags += eul.quality;
        quality.clamped_tau_points += lag.clamped;
        quality.max_degenerate_points = quality.max_degenerate_points.max(degenerate_points);
    }

    let summary = SimulateSummary {
        command: "simulate",
        params: ParamsReport::new(sc, &sc.params),
        time: TimeReport { t_start: sc.cfg.time.t_start, t_end: sc.cfg.time.t_end, samples: times.len() },
        blowup: BlowupSummary::new(&blowup),
        max_deviations: dev,
        quality,
    };
    states.write(&dir.join("states.csv"))?;
    conservation.write(&dir.join("conservation.csv"))?;
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Written {
        files: vec!["states.csv".into(), "conservation.csv".into(), "summary.json".into()],
        note: format!("{} samples, max energy deviation {:.3e}", times.len(), summary.max_deviations.energy),
    })
}

/// Blow-up sites, first time and denominator margin per listed s:
/// blowup.csv.
pub fn blowup(sc: &Scenario) -> Result<Written, CliError> {
    let s_values = &sc.cfg.blowup.s_values;
    if s_values.is_empty() {
        return Err(CliError::Config("blowup needs a non-empty blowup.s_values list".into()));
    }
    let dir = sc.output_dir()?;
    let (c2, delta) = (sc.params.c2, sc.params.delta);
    let max_rho = sc.data.max_rho();
    let mut csv = Csv::new(&["s", "sites", "t_first", "margin", "beyond_max_rho", "status"]);
    let mut regular = true;
    for &s in s_values {
        let beyond = u8::from(s > max_rho).to_string();
        match SimParams::new(s, c2, delta) {
            Ok(p) => {
                let horizon = sc.cfg.blowup.horizon.unwrap_or(2.0 * PI / p.omega());
                let report = blowup_scan_over(&sc.data, &p, p.rho_tol, horizon);
                if s > max_rho && !report.sites.is_empty() {
                    regular = false;
                }
                csv.row(&[
                    float(s),
                    report.sites.len().to_string(),
                    optional(report.t_first),
                    float(report.margin),
                    beyond,
                    "ok".into(),
                ]);
            }
            Err(m2hs_core::Error::DegenerateFrequencies { .. }) => {
                csv.row(&[float(s), String::new(), String::new(), String::new(), beyond, "degenerate-frequencies".into()]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    csv.write(&dir.join("blowup.csv"))?;
    Ok(Written {
        files: vec!["blowup.csv".into()],
        note: format!(
            "{} values of s; {}",
            s_values.len(),
            if regular { "no sites beyond max rho0" } else { "sites found beyond max rho0" }
        ),
    })
}

/// One named invariant of the validation report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: Option<String>,
}

impl Check {
    fn new(name: &str, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured <= tolerance, note: None }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        self.note = Some(match self.note.take() {
            Some(prev) => format!("{prev}; {note}"),
            None => note,
        });
        self
    }
}

#[derive(Debug, Clone, Serialize)]
struct Skipped {
    name: String,
    reason: String,
}

#[derive(Serialize)]
struct ValidationReport {
    command: &'static str,
    params: ParamsReport,
    checks: Vec<Check>,
    skipped: Vec<Skipped>,
    failed: Vec<String>,
    passed: bool,
    warn_only: bool,
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) })
}

/// Invariant suite: validation.json, and exit status 1 on any failure
/// unless `warn_only`.
pub fn validate(sc: &Scenario) -> Result<Written, CliError> {
    let dir = sc.output_dir()?;
    let opts = sc.cfg.validate;
    let tol = sc.cfg.tolerances;
    let data = &sc.data;
    let params = sc.params.with_theta2_shift(opts.corrupt_theta2);
    let eps = params.eps_phi_x;
    let flow = WeakFlow::new(data, params).with_variant(sc.cfg.tau);
    let times = sc.cfg.time.times();
    let t_end = times.last().copied().unwrap_or(0.0);
    let blowup = BlowupPicture::new(data, &params, t_end);
    let t_first = blowup.t_first();
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    let mut skip = |name: &str, reason: &str| skipped.push(Skipped { name: name.into(), reason: reason.into() });
    let verbatim_note = (sc.cfg.tau == TauVariant::PaperVerbatim && params.s != 0.0)
        .then_some("paper-verbatim tau rate is rho0/phi_x: it drops rho0 on the degeneracy set and differs from Im(2 gamma_dot/gamma) when s != 0");

    // frequencies and data
    let ulp = f64::EPSILON;
    checks.push(Check::new("theta_sum", (params.theta1 + params.theta2 - params.s).abs(), 4.0 * ulp * params.s.abs().max(1.0)));
    let scale = params.theta1.abs().max(params.theta2.abs()).max(1.0).powi(2);
    checks.push(Check::new("theta_product", (params.theta1 * params.theta2 + params.forcing()).abs(), 8.0 * ulp * scale));
    let unit = (params.c2 - 1.0).abs() <= 1e-12;
    if sc.cfg.normalize || matches!(sc.cfg.profile, crate::config::Profile::Seeded { .. }) {
        checks.push(Check::new("unit_energy", (params.c2 - 1.0).abs(), 1e-12));
    } else {
        skip("unit_energy", "normalize = false");
    }
    checks.push(Check::new("gauge_u0", data.u0[0].abs(), 0.0));
    checks.push(Check::new("slope_mean", data.slope_mean().abs(), 1e-12));

    // sphere curve and relaxed configuration, at the samples and at located
    // blow-up instants
    let mut probe: Vec<f64> = times.clone();
    probe.extend(blowup.events.iter().map(DegeneracyEvent::midpoint).filter(|t| *t >= sc.cfg.time.t_start));
    probe.sort_by(f64::total_cmp);
    let (mut norm_dev, mut ode_res, mut forms, mut ends) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut identity, mut angle_dev, mut energy_dev, mut cross) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut agreement = Vec::new();
    let cross_until = t_first.map_or(f64::INFINITY, |t0| 0.9 * t0);
    for &t in &probe {
        let g = flow.gamma(t);
        let lag = flow.assemble(&g, None);
        let n = lag.n();
        norm_dev.push((g.l2_norm() - 1.0).abs());
        ode_res.push(sphere_ode_residual(&g, &params));
        let pq = gamma_pq_form(data, &params, t);
        forms.push(sup((0..n).map(|j| (g.gamma[j] - pq.gamma[j]).norm().max((g.gamma_dot[j] - pq.gamma_dot[j]).norm()))));
        ends.push(lag.phi[0].abs().max((lag.phi[n] - 1.0).abs()).max(lag.phi_t[n].abs()));
        let energy = relaxed_energy(&lag, eps);
        identity.push((energy - g.kinetic_mass(eps)).abs());
        angle_dev.push((lag.pulled_back_angle() - params.delta).abs());
        if lag.degenerate_count() == 0 && !blowup.near(t, tol.degeneracy_window) {
            energy_dev.push((energy - params.c2).abs());
        }
        if t <= cross_until {
            let z = riccati_explicit(data, &params, t);
            cross.push(sup((0..n).filter(|&j| g.gamma[j].norm_sqr() > eps && !z.at_blowup[j]).map(|j| {
                let w = 2.0 * g.gamma_dot[j] / g.gamma[j];
                (w - z.z[j]).norm() / z.z[j].norm().max(1.0)
            })));
        }
        if params.s == 0.0 {
            let (a, _) = tau_rate(&g, data, eps, TauVariant::OdeConsistent);
            let (b, _) = tau_rate(&g, data, eps, TauVariant::PaperVerbatim);
            agreement.push(sup((0..n).filter(|&j| lag.phi_x[j] > eps).map(|j| (a[j] - b[j]).abs() / b[j].abs().max(1.0))));
        }
    }
    if unit {
        checks.push(Check::new("sphere_norm", sup(norm_dev), tol.sphere));
    } else {
        skip("sphere_norm", "data is not unit-speed");
    }
    checks.push(Check::new("sphere_ode_residual", sup(ode_res), tol.sphere));
    checks.push(Check::new("gamma_forms_agree", sup(forms), tol.forms));
    checks.push(Check::new("phi_endpoints", sup(ends), tol.endpoint));
    if cross.is_empty() {
        skip("cross_form", "no sample before 0.9 t_first");
    } else {
        checks.push(
            Check::new("cross_form", sup(cross), tol.cross_form).with_note("relative to max(1, |Z|), samples up to 0.9 t_first"),
        );
    }
    let mut c = Check::new("energy_identity", sup(identity), tol.identity);
    if let Some(note) = verbatim_note {
        c = c.with_note(note);
    }
    checks.push(c);
    let mut c = Check::new("delta_conservation", sup(angle_dev), tol.conservation)
        .with_note("includes located blow-up instants");
    if let Some(note) = verbatim_note {
        c = c.with_note(note);
    }
    checks.push(c);
    if energy_dev.is_empty() {
        skip("energy_conservation", "every sample lies in a degeneracy window");
    } else {
        checks.push(Check::new("energy_conservation", sup(energy_dev), tol.conservation).with_note("outside degeneracy windows"));
    }
    if params.s == 0.0 {
        checks.push(Check::new("tau_variant_agreement", sup(agreement), tol.variant_agreement));
    } else {
        skip("tau_variant_agreement", "the variants coincide only for s = 0");
    }

    // zero set: at most 1 + TΩ/π zeros per site
    let bound = blowup.report.sites.len() as f64 * (1.0 + t_end * params.omega() / PI).floor();
    checks.push(Check::new("zero_set_count", blowup.events.len() as f64, bound));

    let wcfg = WeakCheckConfig {
        endpoint_tol: tol.endpoint,
        conservation_tol: tol.conservation,
        residual_tol: tol.residual,
        ..WeakCheckConfig::default()
    };
    let rows = weak_geodesic_check(&flow, &times, &wcfg)?;
    let failing = rows.iter().filter(|r| !r.passed()).count();
    checks.push(Check::new("weak_geodesic", failing as f64, 0.0).with_note("number of failing sample times"));

    // brute-force oracles on the smooth window
    let oracle_end = t_first.map_or(t_end, |t0| t_end.min(0.9 * t0));
    if oracle_end > 0.0 {
        let steps = (oracle_end / ORACLE_DT).round().max(1.0) as usize;
        let cfg = OdeRunConfig::new(oracle_end / steps as f64, oracle_end, (steps / 50).max(1))?;
        let tr = rk4_up(data, &params, &cfg);
        let err = sup(tr.times.iter().enumerate().map(|(k, &t)| {
            let z = riccati_explicit(data, &params, t);
            sup((0..data.n()).map(|j| (z.z[j].re - tr.u[k][j]).abs().max((z.z[j].im - tr.p[k][j]).abs())))
        }));
        checks.push(Check::new("riccati_vs_rk4", err, tol.oracle));
    } else {
        skip("riccati_vs_rk4", "empty smooth window");
    }
    let mol_end = t_first.map_or(t_end, |t0| t_end.min(0.5 * t0));
    if !opts.mol {
        skip("mol_energy_drift", "validate.mol = false");
        skip("mol_angle_drift", "validate.mol = false");
    } else if mol_end > 0.0 {
        let steps = (mol_end / ORACLE_DT).round().max(1.0) as usize;
        let cfg = OdeRunConfig::new(mol_end / steps as f64, mol_end, (steps / 50).max(1))?;
        let mol = mol_m2hs(data, &params, &cfg);
        checks.push(Check::new("mol_energy_drift", mol.max_energy_drift(), tol.mol_energy));
        checks.push(Check::new("mol_angle_drift", mol.max_angle_drift(), tol.mol_angle));
    } else {
        skip("mol_energy_drift", "empty smooth window");
        skip("mol_angle_drift", "empty smooth window");
    }

    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let report = ValidationReport {
        command: "validate",
        params: ParamsReport::new(sc, &params),
        passed: failed.is_empty(),
        failed: failed.clone(),
        checks,
        skipped,
        warn_only: opts.warn_only,
    };
    write_json(&dir.join("validation.json"), &report)?;
    if !failed.is_empty() && !opts.warn_only {
        return Err(CliError::Invariant { failed: failed.len(), names: failed.join(", ") });
    }
    Ok(Written {
        files: vec!["validation.json".into()],
        note: if failed.is_empty() {
            format!("{} checks passed", report.checks.len())
        } else {
            format!("warn-only: failed {}", failed.join(", "))
        },
    })
}
