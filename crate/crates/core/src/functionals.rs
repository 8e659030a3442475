//! Entropy, potential, interaction, kinetic and combined energies.
//!
//! For radial densities the logarithmic interaction goes through Newton's
//! theorem: the angular mean of `log|x−y|` is `log max{|x|,|y|}`, so
//! `I[ρ] = 4π ∫ ρ(s) log s F(s) ds·s` with `F(s)` the mass inside radius `s`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{extend, PlanarDensity, RadialDensity, Samples, WaveFunction};

/// Values below this are treated as zero in `t log t`.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// Largest planar grid accepted by the direct double sum.
pub const PLANAR_CELL_CAP: usize = 16_384;

#[inline]
pub(crate) fn xlogx(v: f64) -> f64 {
    if v < DENSITY_FLOOR {
        0.0
    } else {
        v * v.ln()
    }
}

fn check_mass(m: f64) -> Result<f64> {
    if m > 0.0 && m.is_finite() {
        Ok(m)
    } else {
        Err(Error::Parameter(format!("mass must be positive, got {m}")))
    }
}

/// Coefficients of `F = c∫ρlog(ρ/M) + a∫log(1+|x|²)ρ − (b/M)I[ρ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mass: f64,
}

impl FreeEnergyParams {
    pub fn new(a: f64, b: f64, mass: f64) -> Result<Self> {
        Self::with_entropy(a, b, 1.0, mass)
    }

    pub fn with_entropy(a: f64, b: f64, c: f64, mass: f64) -> Result<Self> {
        check_mass(mass)?;
        if ![a, b, c].iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("coefficients must be finite".into()));
        }
        Ok(FreeEnergyParams { a, b, c, mass })
    }
}

/// Coefficients of `E = ∫|∇u|² + α∫V|u|² + 2πβ∫W|u|² + γ∫|u|²log|u|²`,
/// with `V = 2log(1+|x|²)` and `−ΔW = |u|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mass: f64,
}

impl SchrodingerParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, mass: f64) -> Result<Self> {
        check_mass(mass)?;
        if ![alpha, beta, gamma].iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("coefficients must be finite".into()));
        }
        Ok(SchrodingerParams { alpha, beta, gamma, mass })
    }
}

/// `∫ρ log(ρ/M)`.
pub fn entropy(rho: &RadialDensity, mass: f64) -> Result<f64> {
    let m = check_mass(mass)?;
    let s = rho.samples();
    Ok(s.integrate_with(|_, v| xlogx(v)) - rho.mass() * m.ln())
}

/// `∫ log(1+|x|²) ρ`.
pub fn potential_moment(rho: &RadialDensity) -> f64 {
    rho.samples().integrate_with(|r, v| (r * r).ln_1p() * v)
}

/// `∫ log(1+|x−x₀|²) ρ` for a radial `ρ` translated to distance `d = |x₀|`.
///
/// Uses the circle mean `⟨log(A + B cos θ)⟩ = log((A + √(A²−B²))/2)`.
pub fn potential_moment_translated(rho: &RadialDensity, d: f64) -> f64 {
    rho.samples().integrate_with(|s, v| {
        let a = 1.0 + d * d + s * s;
        let root = ((1.0 + (d - s).powi(2)) * (1.0 + (d + s).powi(2))).sqrt();
        ((a + root) / 2.0).ln() * v
    })
}

/// `∫ 2 log|x| ρ`.
pub fn log_moment(rho: &RadialDensity) -> Result<f64> {
    let s = rho.samples();
    if s.r()[0] == 0.0 && s.values[0] > 0.0 {
        return Err(Error::Divergence(
            "log moment on a grid whose origin node carries mass; use a geometric grid".into(),
        ));
    }
    Ok(s.integrate_with(|r, v| if v == 0.0 { 0.0 } else { 2.0 * r.ln() * v }))
}

fn newton_interaction(s: &Samples) -> f64 {
    let c = s.rule.cumulative(&s.values);
    let h: Vec<f64> = s
        .r()
        .iter()
        .zip(&s.values)
        .zip(&c)
        .map(|((&r, &v), &ck)| if ck == 0.0 || v == 0.0 { 0.0 } else { v * r.ln() * ck })
        .collect();
    8.0 * PI * PI * s.rule.integrate(&h)
}

/// `I[ρ] = ∬ ρ(x)ρ(y) log|x−y| dx dy` for radial `ρ`.
pub fn interaction(rho: &RadialDensity) -> f64 {
    newton_interaction(&rho.samples())
}

/// Self-consistent potential `W = (−Δ)⁻¹ρ` with kernel `−(1/2π)log|x|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonPotential {
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// number of leading extension nodes before the density's own grid
    offset: usize,
    grid_len: usize,
    mass: f64,
}

impl PoissonPotential {
    /// Values at the nodes of the density's grid.
    pub fn on_grid(&self) -> &[f64] {
        &self.values[self.offset..self.offset + self.grid_len]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes[self.offset..self.offset + self.grid_len]
    }

    /// `W(r)`; linear interpolation between nodes, `−(M/2π)log r` beyond them.
    pub fn at(&self, r: f64) -> f64 {
        let n = self.nodes.len();
        if r >= self.nodes[n - 1] {
            return -self.mass / (2.0 * PI) * r.ln();
        }
        if r <= self.nodes[0] {
            return self.values[0];
        }
        let i = self.nodes.partition_point(|&x| x <= r) - 1;
        let t = (r - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// `W(r) = −[log r ∫₀^r ρ s ds + ∫_r^∞ log s ρ s ds]`.
pub fn poisson_potential(rho: &RadialDensity) -> PoissonPotential {
    let s = rho.samples();
    let c = s.rule.cumulative(&s.values);
    let g: Vec<f64> = s.r().iter().zip(&s.values).map(|(&r, &v)| if v == 0.0 { 0.0 } else { r.ln() * v }).collect();
    let cg = s.rule.cumulative(&g);
    let total = s.rule.integrate(&g);
    let values: Vec<f64> = s
        .r()
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let inner = if c[k] == 0.0 { 0.0 } else { r.ln() * c[k] };
            -(inner + total - cg[k])
        })
        .collect();
    let offset = s.r().partition_point(|&x| x < rho.grid().nodes()[0]);
    PoissonPotential {
        nodes: s.r().to_vec(),
        values,
        offset,
        grid_len: rho.grid().len(),
        mass: rho.mass(),
    }
}

/// Staggered-difference Dirichlet energy `2π Σ ((u_{i+1}−u_i)/Δr)²(r_{i+1}²−r_i²)/2`.
pub(crate) fn dirichlet_sum(r: &[f64], u: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..r.len() - 1 {
        let dr = r[i + 1] - r[i];
        let d = (u[i + 1] - u[i]) / dr;
        s += d * d * (r[i + 1] * r[i + 1] - r[i] * r[i]) / 2.0;
    }
    2.0 * PI * s
}

/// `∫|∇u|² = 2π∫(u′)² r dr`, including the wave function's tail.
pub fn kinetic(u: &WaveFunction) -> f64 {
    let s = extend(u.grid(), u.values(), None, u.tail());
    dirichlet_sum(s.r(), &s.values)
}

/// Individual terms of the free energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyTerms {
    pub entropy: f64,
    pub potential_moment: f64,
    pub interaction: f64,
    pub total: f64,
}

impl FreeEnergyTerms {
    pub fn combine(p: &FreeEnergyParams, entropy: f64, potential_moment: f64, interaction: f64) -> Self {
        let total = p.c * entropy + p.a * potential_moment - p.b / p.mass * interaction;
        FreeEnergyTerms { entropy, potential_moment, interaction, total }
    }
}

fn check_consistent_mass(actual: f64, declared: f64) -> Result<()> {
    if (actual - declared).abs() > 1e-3 * declared {
        return Err(Error::Mismatch(format!("density has mass {actual}, parameters declare {declared}")));
    }
    Ok(())
}

pub fn free_energy_terms(rho: &RadialDensity, p: &FreeEnergyParams) -> Result<FreeEnergyTerms> {
    check_consistent_mass(rho.mass(), p.mass)?;
    Ok(FreeEnergyTerms::combine(p, entropy(rho, p.mass)?, potential_moment(rho), interaction(rho)))
}

/// `F_{a,b}[ρ]` with entropy weight `c`.
pub fn free_energy(rho: &RadialDensity, p: &FreeEnergyParams) -> Result<f64> {
    Ok(free_energy_terms(rho, p)?.total)
}

/// `G_a[ρ] = ∫ρlogρ + 2a∫log|x|ρ + 2(a−1)∬ρ(x)log(1/|x−y|)ρ(y)`.
pub fn g_functional(rho: &RadialDensity, a: f64) -> Result<f64> {
    let ent = rho.samples().integrate_with(|_, v| xlogx(v));
    Ok(ent + a * log_moment(rho)? - 2.0 * (a - 1.0) * interaction(rho))
}

/// `J_η[ρ] = ∫ρlog(ρ/∥ρ∥₁) + η∫log(1+|x|²)ρ`.
pub fn j_functional(rho: &RadialDensity, eta: f64) -> Result<f64> {
    Ok(entropy(rho, rho.mass())? + eta * potential_moment(rho))
}

/// Individual terms of the Schrödinger energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerTerms {
    pub kinetic: f64,
    /// `∫V|u|² = 2∫log(1+|x|²)|u|²`
    pub potential: f64,
    /// `2π∫W|u|² = −I[|u|²]`
    pub coupling: f64,
    /// `∫|u|²log|u|²`
    pub nonlinear: f64,
    pub total: f64,
}

pub fn schrodinger_terms(u: &WaveFunction, p: &SchrodingerParams) -> Result<SchrodingerTerms> {
    check_consistent_mass(u.mass(), p.mass)?;
    let rho = u.density()?;
    let s = rho.samples();
    let kin = kinetic(u);
    let potential = 2.0 * s.integrate_with(|r, v| (r * r).ln_1p() * v);
    let coupling = -newton_interaction(&s);
    let nonlinear = s.integrate_with(|_, v| xlogx(v));
    let total = kin + p.alpha * potential + p.beta * coupling + p.gamma * nonlinear;
    Ok(SchrodingerTerms { kinetic: kin, potential, coupling, nonlinear, total })
}

/// `E[u] = ∫|∇u|² + α∫V|u|² + 2πβ∫W|u|² + γ∫|u|²log|u|²`.
pub fn schrodinger_energy(u: &WaveFunction, p: &SchrodingerParams) -> Result<f64> {
    Ok(schrodinger_terms(u, p)?.total)
}

/// Mean of `log|x−y|` for `x, y` independent and uniform on the unit square.
///
/// Reduces to `4∫₀¹ [2A(t) + B(t)log(1+t²)] dt` with polynomial `A, B`; the
/// integral is done with 20-point Gauss–Legendre on eight panels.
pub fn unit_square_log_mean() -> f64 {
    static C0: OnceLock<f64> = OnceLock::new();
    *C0.get_or_init(|| {
        let (x, w) = gauss_legendre(20);
        let panels = 8;
        let mut s = 0.0;
        for p in 0..panels {
            let (lo, hi) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for (xi, wi) in x.iter().zip(&w) {
                let t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
                let a = -0.25 + (1.0 + t) / 9.0 - t / 16.0;
                let b = 0.5 - (1.0 + t) / 3.0 + t / 4.0;
                s += 0.5 * (hi - lo) * wi * (2.0 * a + b * (t * t).ln_1p());
            }
        }
        4.0 * s
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `∫ρ log(ρ/M)` on a planar grid (cell-centre rule).
pub fn entropy_planar(rho: &PlanarDensity, mass: f64) -> Result<f64> {
    let m = check_mass(mass)?;
    let h2 = rho.grid().h().powi(2);
    Ok(h2 * rho.values().iter().map(|&v| xlogx(v)).sum::<f64>() - rho.mass() * m.ln())
}

fn planar_moment(rho: &PlanarDensity, f: impl Fn(f64) -> f64) -> f64 {
    let g = rho.grid();
    let n = g.n();
    let h2 = g.h().powi(2);
    let v = rho.values();
    let mut s = 0.0;
    for j in 0..n {
        let x = g.center(j);
        for k in 0..n {
            let y = g.center(k);
            s += f(x * x + y * y) * v[j * n + k];
        }
    }
    h2 * s
}

/// `∫ log(1+|x|²) ρ` on a planar grid.
pub fn potential_moment_planar(rho: &PlanarDensity) -> f64 {
    planar_moment(rho, |r2| r2.ln_1p())
}

/// `∫ 2log|x| ρ` on a planar grid; cell centres never sit at the origin.
pub fn log_moment_planar(rho: &PlanarDensity) -> f64 {
    planar_moment(rho, |r2| r2.ln())
}

/// Direct double sum of `log|x−y|` over cell pairs, with self-cell term
/// `m²(log h + c₀)`.
pub fn interaction_planar(rho: &PlanarDensity) -> Result<f64> {
    let g = rho.grid();
    let cells = g.cells();
    if cells > PLANAR_CELL_CAP {
        return Err(Error::CellCap { cells, cap: PLANAR_CELL_CAP });
    }
    let n = g.n();
    let h = g.h();
    let m = rho.cell_masses();
    let self_term = h.ln() + unit_square_log_mean();
    let s: f64 = (0..cells)
        .into_par_iter()
        .map(|p| {
            let mp = m[p];
            if mp == 0.0 {
                return 0.0;
            }
            let (pj, pk) = ((p / n) as f64, (p % n) as f64);
            let mut acc = mp * mp * self_term;
            for q in p + 1..cells {
                let mq = m[q];
                if mq == 0.0 {
                    continue;
                }
                let dx = (q / n) as f64 - pj;
                let dy = (q % n) as f64 - pk;
                acc += 2.0 * mp * mq * (h * h * (dx * dx + dy * dy)).ln() * 0.5;
            }
            acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(s)
}

/// The same discrete sum as [`interaction_planar`], evaluated by zero-padded
/// FFT convolution; usable on grids beyond the direct-sum cap.
pub fn interaction_planar_fft(rho: &PlanarDensity) -> f64 {
    let g = rho.grid();
    let n = g.n();
    let h = g.h();
    let big = 2 * n;
    let m = rho.cell_masses();
    let self_term = h.ln() + unit_square_log_mean();
    let mut kernel = vec![Complex::new(0.0, 0.0); big * big];
    for i in 0..big {
        let di = if i < n { i as f64 } else { i as f64 - big as f64 };
        for j in 0..big {
            let dj = if j < n { j as f64 } else { j as f64 - big as f64 };
            let v = if i == 0 && j == 0 { self_term } else { 0.5 * (h * h * (di * di + dj * dj)).ln() };
            kernel[i * big + j] = Complex::new(v, 0.0);
        }
    }
    let mut field = vec![Complex::new(0.0, 0.0); big * big];
    for j in 0..n {
        for k in 0..n {
            field[j * big + k] = Complex::new(m[j * n + k], 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(big);
    let inv = planner.plan_fft_inverse(big);
    fft2(&mut kernel, big, &*fwd);
    fft2(&mut field, big, &*fwd);
    kernel.par_iter_mut().zip(field.par_iter()).for_each(|(k, f)| *k *= f);
    fft2(&mut kernel, big, &*inv);
    let scale = 1.0 / (big * big) as f64;
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            s += m[j * n + k] * kernel[j * big + k].re * scale;
        }
    }
    s
}

fn fft2(data: &mut [Complex<f64>], n: usize, fft: &dyn rustfft::Fft<f64>) {
    data.par_chunks_mut(n).for_each(|row| fft.process(row));
    let mut t = vec![Complex::new(0.0, 0.0); n * n];
    transpose(data, &mut t, n);
    t.par_chunks_mut(n).for_each(|row| fft.process(row));
    transpose(&t, data, n);
}

fn transpose(src: &[Complex<f64>], dst: &mut [Complex<f64>], n: usize) {
    dst.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, d) in row.iter_mut().enumerate() {
            *d = src[j * n + i];
        }
    });
}

/// Planar interaction choosing the direct sum when it fits under the cap.
pub fn interaction_planar_auto(rho: &PlanarDensity) -> f64 {
    match interaction_planar(rho) {
        Ok(v) => v,
        Err(_) => interaction_planar_fft(rho),
    }
}

/// `F_{a,b}` on a planar grid.
pub fn free_energy_planar(rho: &PlanarDensity, p: &FreeEnergyParams) -> Result<FreeEnergyTerms> {
    check_consistent_mass(rho.mass(), p.mass)?;
    Ok(FreeEnergyTerms::combine(
        p,
        entropy_planar(rho, p.mass)?,
        potential_moment_planar(rho),
        interaction_planar_auto(rho),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedforms::{ClosedForm, Family};
    use crate::grids::{make_radial_grid, Grading, PlanarGrid, RadialGrid};
    use approx::assert_relative_eq;

    fn grid() -> RadialGrid {
        make_radial_grid(2048, 100.0, Grading::Geometric).unwrap()
    }

    fn dens(f: Family) -> RadialDensity {
        ClosedForm::new(f, 1.0).unwrap().density(&grid()).unwrap()
    }

    #[test]
    fn rho_star_values() {
        let rho = dens(Family::RhoStar);
        assert!((entropy(&rho, 1.0).unwrap() + PI.ln() + 2.0).abs() < 1e-5);
        assert!((potential_moment(&rho) - 1.0).abs() < 1e-6);
        assert!((interaction(&rho) - 0.5).abs() < 1e-5);
        assert!(log_moment(&rho).unwrap().abs() < 1e-6);
    }

    #[test]
    fn uniform_disk_entropy() {
        let g = make_radial_grid(1024, 1.0, Grading::Uniform).unwrap();
        let rho = RadialDensity::new(&g, vec![1.0 / PI; g.len()], None).unwrap();
        assert!((entropy(&rho, 1.0).unwrap() + PI.ln()).abs() < 1e-10);
    }

    #[test]
    fn rho_eta_potential_moment() {
        let rho = dens(Family::RhoEta { eta: 3.0 });
        assert!((potential_moment(&rho) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn translated_potential_moment_grows_like_twice_log_distance() {
        let rho = dens(Family::RhoStar);
        let d = 1e3;
        let v = potential_moment_translated(&rho, d);
        assert!((v / (2.0 * d.ln()) - 1.0).abs() < 0.01);
        assert_relative_eq!(potential_moment_translated(&rho, 0.0), potential_moment(&rho), max_relative = 1e-12);
    }

    #[test]
    fn log_moment_of_annulus_is_bounded_by_support() {
        let v = log_moment(&dens(Family::AnnulusBump)).unwrap();
        assert!(v > 0.0 && v < 2.0 * 2f64.ln());
    }

    #[test]
    fn log_moment_flags_origin_mass() {
        let g = make_radial_grid(64, 5.0, Grading::Uniform).unwrap();
        let rho = ClosedForm::new(Family::Gaussian, 1.0).unwrap().density(&g).unwrap();
        assert!(matches!(log_moment(&rho), Err(Error::Divergence(_))));
    }

    #[test]
    fn poisson_potential_of_rho_star() {
        let rho = dens(Family::RhoStar);
        let w = poisson_potential(&rho);
        for (&r, &v) in w.nodes().iter().zip(w.on_grid()) {
            if r <= 10.0 {
                assert!((v + (r * r).ln_1p() / (4.0 * PI)).abs() < 1e-5, "r = {r}");
            }
        }
        assert!(w.at(0.0).abs() < 1e-6);
        assert!((w.at(1.0) + 2f64.ln() / (4.0 * PI)).abs() < 1e-5);
        let far = 200.0;
        assert!((w.at(far) / (-(far.ln()) / (2.0 * PI)) - 1.0).abs() < 0.01);
    }

    #[test]
    fn poisson_equation_holds_in_the_interior() {
        let rho = dens(Family::Gaussian);
        let w = poisson_potential(&rho);
        let (r, v) = (w.nodes(), w.on_grid());
        for i in (400..1700).step_by(50) {
            let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
            let d1 = (v[i + 1] - v[i]) / h1;
            let d0 = (v[i] - v[i - 1]) / h0;
            let rp = 0.5 * (r[i] + r[i + 1]);
            let rm = 0.5 * (r[i] + r[i - 1]);
            let lap = (rp * d1 - rm * d0) / (0.5 * (h0 + h1)) / r[i];
            let target = rho.values()[i];
            assert!((-lap - target).abs() < 1e-4 * (1.0 + target), "r = {}: {} vs {target}", r[i], -lap);
        }
    }

    #[test]
    fn kinetic_of_gaussian_root() {
        let u = ClosedForm::new(Family::Gaussian, 1.0).unwrap().wave(&grid()).unwrap();
        assert!((kinetic(&u) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn kinetic_of_smooth_bump() {
        // u = (1−r²)³ on r < 1: |∇u|² = 36 r²(1−r²)⁴, ∫ = 2π·36·∫r³(1−r²)⁴dr = 72π/(2·5·6) = 6π/5
        let g = make_radial_grid(2048, 1.0, Grading::Uniform).unwrap();
        let u = WaveFunction::from_fn(&g, |r| (1.0 - r * r).max(0.0).powi(3), None).unwrap();
        assert!((kinetic(&u) - 6.0 * PI / 5.0).abs() < 1e-5);
    }

    #[test]
    fn degenerate_schrodinger_is_kinetic() {
        let u = ClosedForm::new(Family::Gaussian, 1.0).unwrap().wave(&grid()).unwrap();
        let p = SchrodingerParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(schrodinger_energy(&u, &p).unwrap(), kinetic(&u));
    }

    #[test]
    fn free_energy_at_loghls_point() {
        let rho = dens(Family::RhoStar);
        let p = FreeEnergyParams::new(0.0, -2.0, 1.0).unwrap();
        assert!((free_energy(&rho, &p).unwrap() + 1.0 + PI.ln()).abs() < 1e-5);
    }

    #[test]
    fn g_and_j_values() {
        let rho = dens(Family::RhoEta { eta: 3.0 });
        assert!((j_functional(&rho, 3.0).unwrap() - (2.0 / PI).ln()).abs() < 1e-5);
        let k = dens(Family::KMinimizer { a: 0.5, lambda: 1.0 });
        assert!((g_functional(&k, 0.5).unwrap() + (std::f64::consts::E * PI / 0.5).ln()).abs() < 1e-4);
        let star = dens(Family::RhoStar);
        assert!((g_functional(&star, 0.0).unwrap() + 1.0 + PI.ln()).abs() < 1e-5);
    }

    #[test]
    fn mass_mismatch_is_reported() {
        let rho = dens(Family::RhoStar);
        let p = FreeEnergyParams::new(0.0, -2.0, 2.0).unwrap();
        assert!(matches!(free_energy(&rho, &p), Err(Error::Mismatch(_))));
    }

    #[test]
    fn unit_square_constant() {
        let exact = 2f64.ln() / 3.0 + PI / 3.0 - 25.0 / 12.0;
        assert!((unit_square_log_mean() - exact).abs() < 1e-13);
    }

    #[test]
    fn planar_two_point_masses() {
        let g = PlanarGrid::new(0.5, 8.0).unwrap();
        let n = g.n();
        let mut v = vec![0.0; n * n];
        let h2 = 0.25;
        // cells centred at (−7.25, 0.25) and (3.75, 0.25): distance 11
        v[1 * n + 16] = 1.0 / h2;
        v[23 * n + 16] = 1.0 / h2;
        let rho = PlanarDensity::new(g, v).unwrap();
        let i = interaction_planar(&rho).unwrap();
        let expect = 2.0 * 11f64.ln() + 2.0 * (0.5f64.ln() + unit_square_log_mean());
        assert_relative_eq!(i, expect, max_relative = 1e-12);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let g = PlanarGrid::new(0.25, 8.0).unwrap();
        let rho = ClosedForm::new(Family::Gaussian, 1.0).unwrap().profile().planar(&g, [0.7, -0.3]).unwrap();
        let d = interaction_planar(&rho).unwrap();
        let f = interaction_planar_fft(&rho);
        assert_relative_eq!(d, f, max_relative = 1e-10);
    }

    #[test]
    fn planar_cap_is_enforced() {
        let g = PlanarGrid::new(0.05, 30.0).unwrap();
        let rho = ClosedForm::new(Family::RhoStar, 1.0).unwrap().profile().planar(&g, [0.0, 0.0]).unwrap();
        assert!(matches!(interaction_planar(&rho), Err(Error::CellCap { .. })));
    }
}
