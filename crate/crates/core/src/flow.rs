//! Radial drift-diffusion flow `∂ρ/∂t = ∇·(ρ∇(c log ρ + a log(1+|x|²) + (4πb/M)W))`.
//!
//! Vertex-centred finite volumes with Scharfetter–Gummel fluxes. The discrete
//! free energy below decreases along the semi-discrete flow, and the explicit
//! step keeps it decreasing for time steps within the positivity bound.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{FreeEnergyParams, DENSITY_FLOOR};
use crate::grids::{make_radial_grid, Grading, RadialDensity, RadialGrid};

/// `dt ≤ CFL_SAFETY·h²/c` with `h` the smallest node spacing.
pub const CFL_SAFETY: f64 = 0.25;

/// Accepted steps may raise the free energy by at most this much.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-8;

/// Settings of one run.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub params: FreeEnergyParams,
    pub dt: f64,
    pub steps: usize,
    pub grid: RadialGrid,
    /// stop once the dissipation relative to `max(|F|, M)` drops below this
    pub stop: f64,
    /// keep every `record_every`-th step in the history
    pub record_every: usize,
}

impl FlowConfig {
    /// Uniform grid on `[0, 60]` with 601 nodes and `dt` at 0.8 of the CFL bound.
    pub fn new(params: FreeEnergyParams) -> Result<Self> {
        let grid = make_radial_grid(601, 60.0, Grading::Uniform)?;
        Self::on_grid(params, grid)
    }

    pub fn on_grid(params: FreeEnergyParams, grid: RadialGrid) -> Result<Self> {
        let dt = 0.8 * cfl_limit(&grid, params.c);
        Ok(FlowConfig { params, dt, steps: 2_000_000, grid, stop: 1e-8, record_every: 100 })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.params.c > 0.0) {
            return Err(Error::Parameter(format!("the flow needs a positive entropy weight, got c = {}", self.params.c)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        let limit = cfl_limit(&self.grid, self.params.c);
        if self.dt > limit {
            return Err(Error::Unstable(format!("dt = {} exceeds the CFL bound {limit}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::Parameter("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

fn cfl_limit(grid: &RadialGrid, c: f64) -> f64 {
    let h = grid.nodes().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    CFL_SAFETY * h * h / c
}

/// One history record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub time: f64,
    pub free_energy: f64,
    pub dissipation: f64,
    pub mass: f64,
}

/// Density at a time, with the recorded history.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub time: f64,
    pub steps: usize,
    pub density: RadialDensity,
    pub history: Vec<HistoryPoint>,
    pub converged: bool,
}

impl FlowState {
    /// Free energy of the current density in the scheme's own discretization.
    pub fn free_energy(&self, params: &FreeEnergyParams) -> f64 {
        Cells::new(self.density.grid()).free_energy(self.density.values(), params)
    }

    /// `Σ A_i ρ_i`, the conserved mass.
    pub fn mass(&self) -> f64 {
        Cells::new(self.density.grid()).mass(self.density.values())
    }
}

/// Control volumes `A_i` between face radii and face transmissions `2πr_f/Δr`.
pub(crate) struct Cells {
    pub(crate) r: Vec<f64>,
    pub(crate) area: Vec<f64>,
    pub(crate) trans: Vec<f64>,
    /// radius used in the log kernel; the origin cell uses its mean log radius
    s_log: Vec<f64>,
}

impl Cells {
    pub(crate) fn new(grid: &RadialGrid) -> Self {
        let r = grid.nodes().to_vec();
        let n = r.len();
        let faces: Vec<f64> = r.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let area = (0..n)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { faces[i - 1] };
                let hi = if i == n - 1 { r[n - 1] } else { faces[i] };
                PI * (hi * hi - lo * lo)
            })
            .collect();
        let trans = (0..n - 1).map(|i| 2.0 * PI * faces[i] / (r[i + 1] - r[i])).collect();
        let s_log = r.iter().map(|&x| if x > 0.0 { x.ln() } else { faces[0].ln() - 0.5 }).collect();
        Cells { r, area, trans, s_log }
    }

    pub(crate) fn mass(&self, rho: &[f64]) -> f64 {
        self.area.iter().zip(rho).map(|(a, v)| a * v).sum()
    }

    /// `Σ_j A_jρ_j log max(s_i, s_j)` for every `i`.
    pub(crate) fn log_convolution(&self, rho: &[f64]) -> Vec<f64> {
        let n = rho.len();
        let mut out = vec![0.0; n];
        let mut outer = 0.0;
        for i in (0..n).rev() {
            out[i] = outer;
            outer += self.area[i] * rho[i] * self.s_log[i];
        }
        let mut inner = 0.0;
        for i in 0..n {
            inner += self.area[i] * rho[i];
            out[i] += inner * self.s_log[i];
        }
        out
    }

    /// `a log(1+r²) + (4πb/M)W` at the nodes.
    fn potential(&self, rho: &[f64], p: &FreeEnergyParams) -> Vec<f64> {
        let ext = self.r.iter().map(|&r| p.a * (r * r).ln_1p());
        if p.b == 0.0 {
            return ext.collect();
        }
        let conv = self.log_convolution(rho);
        // (4πb/M)W with W = −conv/2π
        ext.zip(conv).map(|(e, l)| e - 2.0 * p.b / p.mass * l).collect()
    }

    fn free_energy(&self, rho: &[f64], p: &FreeEnergyParams) -> f64 {
        let m = p.mass;
        let mut f = 0.0;
        for i in 0..rho.len() {
            let v = rho[i];
            let ent = if v > DENSITY_FLOOR { v * (v / m).ln() } else { 0.0 };
            f += self.area[i] * (p.c * ent + p.a * (self.r[i] * self.r[i]).ln_1p() * v);
        }
        if p.b != 0.0 {
            let conv = self.log_convolution(rho);
            let i_h: f64 = (0..rho.len()).map(|i| self.area[i] * rho[i] * conv[i]).sum();
            f -= p.b / m * i_h;
        }
        f
    }

    fn dissipation(&self, rho: &[f64], phi: &[f64], c: f64) -> f64 {
        let mut d = 0.0;
        for i in 0..rho.len() - 1 {
            let dpsi = (phi[i + 1] - phi[i]) / c;
            let (lo, hi) = (rho[i].max(DENSITY_FLOOR), rho[i + 1].max(DENSITY_FLOOR));
            // (g_{i+1} − g_i)e^{−ψ_i} and log g_{i+1} − log g_i with g = ρe^ψ
            let dg = hi * dpsi.exp() - lo;
            let dlog = hi.ln() - lo.ln() + dpsi;
            d += (c * c * self.trans[i] * bernoulli(dpsi) * dg * dlog).max(0.0);
        }
        d
    }
}

/// `B(x) = x/(eˣ−1)`.
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x / 2.0 + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

/// `∇(δF/δρ)` at the cell faces.
pub fn drift_field(rho: &RadialDensity, params: &FreeEnergyParams) -> Vec<f64> {
    let cells = Cells::new(rho.grid());
    let v = rho.values();
    let phi = cells.potential(v, params);
    (0..v.len() - 1)
        .map(|i| {
            let mu = |k: usize| params.c * v[k].max(DENSITY_FLOOR).ln() + phi[k];
            (mu(i + 1) - mu(i)) / (cells.r[i + 1] - cells.r[i])
        })
        .collect()
}

/// `D[ρ] = ∫ρ|∇(δF/δρ)|²` in the discrete form that the scheme dissipates.
pub fn dissipation(rho: &RadialDensity, params: &FreeEnergyParams) -> f64 {
    let cells = Cells::new(rho.grid());
    let phi = cells.potential(rho.values(), params);
    cells.dissipation(rho.values(), &phi, params.c)
}

/// Free energy in the scheme's discretization.
pub fn discrete_free_energy(rho: &RadialDensity, params: &FreeEnergyParams) -> f64 {
    Cells::new(rho.grid()).free_energy(rho.values(), params)
}

/// Face coefficients `cT·B(±Δψ)` with `ψ = φ/c`.
struct Coefficients {
    forward: Vec<f64>,
    backward: Vec<f64>,
}

impl Coefficients {
    fn new(cells: &Cells, phi: &[f64], c: f64) -> Self {
        let n = phi.len();
        let mut forward = Vec::with_capacity(n - 1);
        let mut backward = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let d = (phi[i + 1] - phi[i]) / c;
            forward.push(c * cells.trans[i] * bernoulli(d));
            backward.push(c * cells.trans[i] * bernoulli(-d));
        }
        Coefficients { forward, backward }
    }

    /// Largest step keeping every update coefficient nonnegative.
    fn positivity_limit(&self, cells: &Cells) -> f64 {
        let n = cells.area.len();
        (0..n)
            .map(|i| {
                let out = self.forward.get(i).copied().unwrap_or(0.0)
                    + if i > 0 { self.backward[i - 1] } else { 0.0 };
                if out > 0.0 { cells.area[i] / out } else { f64::INFINITY }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

struct Stepper<'a> {
    cells: Cells,
    config: &'a FlowConfig,
    /// coefficients and step when the potential does not depend on `ρ`
    frozen: Option<(Coefficients, f64)>,
}

impl<'a> Stepper<'a> {
    fn new(config: &'a FlowConfig) -> Self {
        let cells = Cells::new(&config.grid);
        let p = &config.params;
        let frozen = (p.b == 0.0).then(|| {
            let phi = cells.potential(&[], p);
            let k = Coefficients::new(&cells, &phi, p.c);
            let dt = config.dt.min(0.95 * k.positivity_limit(&cells));
            (k, dt)
        });
        Stepper { cells, config, frozen }
    }

    /// Advance in place; returns the step taken.
    fn step(&self, rho: &mut [f64]) -> f64 {
        let owned;
        let (k, dt) = match &self.frozen {
            Some((k, dt)) => (k, *dt),
            None => {
                let p = &self.config.params;
                let phi = self.cells.potential(rho, p);
                owned = Coefficients::new(&self.cells, &phi, p.c);
                (&owned, self.config.dt.min(0.95 * owned.positivity_limit(&self.cells)))
            }
        };
        let n = rho.len();
        let mut inflow = 0.0;
        for i in 0..n {
            let outflow = if i + 1 < n { k.forward[i] * rho[i] - k.backward[i] * rho[i + 1] } else { 0.0 };
            rho[i] = (rho[i] + dt / self.cells.area[i] * (inflow - outflow)).max(DENSITY_FLOOR);
            inflow = outflow;
        }
        dt
    }

    fn record(&self, rho: &[f64], time: f64) -> HistoryPoint {
        let p = &self.config.params;
        let phi = self.cells.potential(rho, p);
        HistoryPoint {
            time,
            free_energy: self.cells.free_energy(rho, p),
            dissipation: self.cells.dissipation(rho, &phi, p.c),
            mass: self.cells.mass(rho),
        }
    }
}

fn start_values(config: &FlowConfig, initial: &RadialDensity, rescale: bool) -> Result<Vec<f64>> {
    if !initial.grid().is_same(&config.grid) {
        return Err(Error::Mismatch("initial density lives on a different grid than the run".into()));
    }
    let mut v: Vec<f64> = initial.values().iter().map(|x| x.max(DENSITY_FLOOR)).collect();
    if !rescale {
        return Ok(v);
    }
    let m = Cells::new(&config.grid).mass(&v);
    let k = config.params.mass / m;
    v.iter_mut().for_each(|x| *x *= k);
    Ok(v)
}

/// One explicit step from `state`, taken as is.
pub fn flow_step(state: &FlowState, config: &FlowConfig) -> Result<FlowState> {
    config.validate()?;
    let stepper = Stepper::new(config);
    let mut rho = start_values(config, &state.density, false)?;
    let before = stepper.cells.free_energy(&rho, &config.params);
    let dt = stepper.step(&mut rho);
    let time = state.time + dt;
    let point = stepper.record(&rho, time);
    if point.free_energy > before + MONOTONICITY_TOLERANCE {
        return Err(Error::Unstable(format!(
            "free energy rose from {before} to {} at t = {time}",
            point.free_energy
        )));
    }
    let mut history = state.history.clone();
    history.push(point);
    Ok(FlowState {
        time,
        steps: state.steps + 1,
        density: RadialDensity::new(&config.grid, rho, None)?,
        history,
        converged: false,
    })
}

/// Run from `initial`, rescaled to the configured mass, until steady or out of steps.
pub fn flow_run(config: &FlowConfig, initial: &RadialDensity) -> Result<FlowState> {
    config.validate()?;
    let stepper = Stepper::new(config);
    let p = &config.params;
    let mut rho = start_values(config, initial, true)?;
    let mut time = 0.0;
    let mut last = stepper.record(&rho, 0.0);
    let mut history = vec![last];
    let mut converged = false;
    let mut steps = 0;
    while steps < config.steps {
        time += stepper.step(&mut rho);
        steps += 1;
        let f = stepper.cells.free_energy(&rho, p);
        if f > last.free_energy + MONOTONICITY_TOLERANCE {
            return Err(Error::Unstable(format!(
                "free energy rose from {} to {f} at step {steps}",
                last.free_energy
            )));
        }
        last.free_energy = f;
        if steps % config.record_every == 0 || steps == config.steps {
            let point = stepper.record(&rho, time);
            history.push(point);
            last = point;
            if point.dissipation <= config.stop * point.free_energy.abs().max(p.mass) {
                converged = true;
                break;
            }
        }
    }
    log::info!("flow stopped after {steps} steps at t = {time}, converged = {converged}");
    Ok(FlowState { time, steps, density: RadialDensity::new(&config.grid, rho, None)?, history, converged })
}

/// Areas of the annular control volumes around each node, shared by the flow
/// and the ground-state minimizer.
pub fn control_volumes(grid: &RadialGrid) -> Vec<f64> {
    Cells::new(grid).area
}

/// `∫|ρ − ρ_ref| / ∫ρ_ref` with the scheme's control volumes.
pub fn relative_l1(rho: &RadialDensity, reference: impl Fn(f64) -> f64) -> f64 {
    let cells = Cells::new(rho.grid());
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &v) in rho.values().iter().enumerate() {
        let r = reference(cells.r[i]);
        num += cells.area[i] * (v - r).abs();
        den += cells.area[i] * r;
    }
    num / den
}

/// CSV `time,F,dissipation,mass`.
pub fn write_history_csv(out: &mut dyn Write, state: &FlowState, config: &str) -> std::io::Result<()> {
    writeln!(out, "# config: {config}")?;
    writeln!(out, "time,F,dissipation,mass")?;
    for h in &state.history {
        writeln!(out, "{},{},{},{}", h.time, h.free_energy, h.dissipation, h.mass)?;
    }
    Ok(())
}

/// CSV `r,rho` of the final density.
pub fn write_profile_csv(out: &mut dyn Write, state: &FlowState, config: &str) -> std::io::Result<()> {
    writeln!(out, "# config: {config}")?;
    writeln!(out, "r,rho")?;
    for (r, v) in state.density.grid().nodes().iter().zip(state.density.values()) {
        writeln!(out, "{r},{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedforms::{ClosedForm, Family};

    fn params(a: f64, b: f64) -> FreeEnergyParams {
        FreeEnergyParams::new(a, b, 1.0).unwrap()
    }

    fn small_config(a: f64, b: f64) -> FlowConfig {
        let grid = make_radial_grid(201, 20.0, Grading::Uniform).unwrap();
        FlowConfig::on_grid(params(a, b), grid).unwrap()
    }

    fn gaussian(cfg: &FlowConfig) -> RadialDensity {
        ClosedForm::new(Family::Gaussian, 1.0).unwrap().density(&cfg.grid).unwrap()
    }

    #[test]
    fn stationary_profiles_have_no_drift() {
        let cfg = small_config(1.5, 0.0);
        let rho = RadialDensity::from_fn(&cfg.grid, |r| (1.0 + r * r).powf(-1.5), None, None).unwrap();
        assert!(drift_field(&rho, &cfg.params).iter().all(|d| d.abs() < 1e-12));
        assert!(dissipation(&rho, &cfg.params) < 1e-20);
        let star = ClosedForm::new(Family::RhoStar, 1.0).unwrap().density(&cfg.grid).unwrap();
        assert!(dissipation(&star, &params(2.0, 0.0)) < 1e-20);
    }

    #[test]
    fn heat_flow_drift_is_log_gradient() {
        let cfg = small_config(0.0, 0.0);
        let rho = gaussian(&cfg);
        let d = drift_field(&rho, &cfg.params);
        let r = cfg.grid.nodes();
        for i in 0..50 {
            // ∇log e^{−r²/2} at the face midpoint
            let expected = -(r[i] + r[i + 1]) / 2.0;
            assert!((d[i] - expected).abs() < 1e-9, "{i}: {} vs {expected}", d[i]);
        }
    }

    #[test]
    fn gaussian_is_not_stationary() {
        let cfg = small_config(2.0, 0.0);
        assert!(dissipation(&gaussian(&cfg), &cfg.params) > 1e-3);
    }

    #[test]
    fn oversized_steps_are_rejected() {
        let mut cfg = small_config(2.0, 0.0);
        cfg.dt = 1.0;
        assert!(matches!(flow_run(&cfg, &gaussian(&cfg)), Err(Error::Unstable(_))));
    }

    #[test]
    fn coupled_flow_conserves_mass_and_decreases_f() {
        for b in [-1.0, 0.5] {
            let mut cfg = small_config(1.0, b);
            cfg.steps = 4000;
            cfg.record_every = 10;
            let st = flow_run(&cfg, &gaussian(&cfg)).unwrap();
            let m0 = st.history[0].mass;
            for w in st.history.windows(2) {
                assert!(w[1].free_energy <= w[0].free_energy + MONOTONICITY_TOLERANCE);
                assert!((w[1].mass - m0).abs() <= 1e-8 * m0);
            }
        }
    }

    #[test]
    fn energy_decay_matches_dissipation() {
        let cfg = small_config(2.0, -0.5);
        let rho = gaussian(&cfg);
        let start = FlowState { time: 0.0, steps: 0, density: rho.clone(), history: Vec::new(), converged: false };
        let f0 = discrete_free_energy(&rho, &cfg.params);
        let d0 = dissipation(&rho, &cfg.params);
        let mut errors = Vec::new();
        for k in 0..3 {
            let mut c = cfg.clone();
            c.dt = cfg.dt / 2f64.powi(k);
            let next = flow_step(&start, &c).unwrap();
            let rate = (f0 - next.free_energy(&c.params)) / next.time;
            errors.push((rate - d0).abs() / d0);
        }
        assert!(errors[2] < 0.1, "{errors:?}");
        assert!(errors[2] <= errors[0]);
    }
}
