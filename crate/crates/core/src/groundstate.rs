//! Mass-constrained minimization of the Schrödinger energy by projected,
//! preconditioned gradient descent with renormalization.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::closedforms::{ClosedForm, Family};
use crate::error::{Error, Result};
use crate::flow::Cells;
use crate::functionals::{schrodinger_energy, xlogx, SchrodingerParams, SchrodingerTerms, DENSITY_FLOOR};
use crate::grids::{GridSpec, Grading, RadialGrid, WaveFunction};
use crate::inequalities::{classify_schrodinger, Region};

/// Knobs of one minimization.
#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// first trial step of the line search
    pub step: f64,
    /// backtracking factor
    pub shrink: f64,
    pub max_iterations: usize,
    /// stop once the Euler–Lagrange residual drops below this
    pub tolerance: f64,
    /// starting state; `√(Mμ)` with the unit Gaussian `μ` when absent
    pub initial: Option<WaveFunction>,
    pub grid: GridSpec,
    /// run where boundedness is undecided
    pub allow_unknown: bool,
    /// run even where the energy is unbounded below
    pub allow_unbounded: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            step: 1.0,
            shrink: 0.5,
            max_iterations: 5000,
            tolerance: 1e-6,
            initial: None,
            grid: GridSpec { n: 1024, r_max: 30.0, grading: Grading::Uniform },
            allow_unknown: false,
            allow_unbounded: false,
        }
    }
}

/// Outcome of [`minimize`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub params: SchrodingerParams,
    pub grid: GridSpec,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// `Σ A_j u_j²`, equal to `M` after the final projection
    pub mass: f64,
    /// discrete energy that was minimized
    pub energy: f64,
    /// the same state under the quadrature of `functionals`
    pub energy_quadrature: f64,
    /// Lagrange multiplier `⟨G, u⟩/(2M)`
    pub theta: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

impl GroundStateReport {
    pub fn wave(&self) -> Result<WaveFunction> {
        WaveFunction::new(&self.grid.build()?, self.u.clone())
    }
}

/// Energy on control volumes: `Σ T_f(Δu)² + Σ A_j[2α log(1+r_j²)u_j² + γu_j²log u_j²] − βI_h[u²]`.
struct Discrete {
    cells: Cells,
}

impl Discrete {
    fn new(grid: &RadialGrid) -> Self {
        Discrete { cells: Cells::new(grid) }
    }

    fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.cells.area.iter().zip(f).zip(g).map(|((a, f), g)| a * f * g).sum()
    }

    fn energy(&self, u: &[f64], p: &SchrodingerParams) -> SchrodingerTerms {
        let c = &self.cells;
        let kinetic: f64 = c.trans.iter().zip(u.windows(2)).map(|(t, w)| t * (w[1] - w[0]).powi(2)).sum();
        let rho: Vec<f64> = u.iter().map(|v| v * v).collect();
        let mut potential = 0.0;
        let mut nonlinear = 0.0;
        for j in 0..u.len() {
            potential += c.area[j] * 2.0 * (c.r[j] * c.r[j]).ln_1p() * rho[j];
            nonlinear += c.area[j] * xlogx(rho[j]);
        }
        let coupling = if p.beta != 0.0 {
            let conv = c.log_convolution(&rho);
            -(0..u.len()).map(|j| c.area[j] * rho[j] * conv[j]).sum::<f64>()
        } else {
            0.0
        };
        let total = kinetic + p.alpha * potential + p.beta * coupling + p.gamma * nonlinear;
        SchrodingerTerms { kinetic, potential, coupling, nonlinear, total }
    }

    /// `∂E/∂u_j`.
    fn euclidean_gradient(&self, u: &[f64], p: &SchrodingerParams) -> Vec<f64> {
        let c = &self.cells;
        let n = u.len();
        let mut g = vec![0.0; n];
        for i in 0..n - 1 {
            let d = 2.0 * c.trans[i] * (u[i + 1] - u[i]);
            g[i + 1] += d;
            g[i] -= d;
        }
        let conv = (p.beta != 0.0).then(|| c.log_convolution(&u.iter().map(|v| v * v).collect::<Vec<_>>()));
        for j in 0..n {
            let sq = u[j] * u[j];
            let log_term = sq.max(DENSITY_FLOOR).ln();
            let mut local = 2.0 * p.alpha * (c.r[j] * c.r[j]).ln_1p() + p.gamma * (log_term + 1.0);
            if let Some(conv) = &conv {
                local -= 2.0 * p.beta * conv[j];
            }
            g[j] += c.area[j] * 2.0 * u[j] * local;
        }
        g
    }

    /// L² gradient `∂E/∂u_j / A_j`.
    fn gradient(&self, u: &[f64], p: &SchrodingerParams) -> Vec<f64> {
        let g = self.euclidean_gradient(u, p);
        g.iter().zip(&self.cells.area).map(|(g, a)| g / a).collect()
    }

    /// `(θ, residual)` with `θ = ⟨G, u⟩/(2M)` and residual `∥G − (⟨G,u⟩/M)u∥/∥u∥`.
    fn multiplier_and_residual(&self, u: &[f64], big_g: &[f64]) -> (f64, f64) {
        let m = self.inner(u, u);
        let gu = self.inner(big_g, u);
        let proj: Vec<f64> = big_g.iter().zip(u).map(|(g, v)| g - gu / m * v).collect();
        (gu / (2.0 * m), (self.inner(&proj, &proj) / m).sqrt())
    }

    fn renormalize(&self, u: &mut [f64], m: f64) {
        let k = (m / self.inner(u, u)).sqrt();
        u.iter_mut().for_each(|v| *v *= k);
    }
}

/// The minimizer's discrete energy of a grid-only wave function.
pub fn discrete_energy(u: &WaveFunction, p: &SchrodingerParams) -> Result<SchrodingerTerms> {
    check_tailless(u)?;
    Ok(Discrete::new(u.grid()).energy(u.values(), p))
}

/// L² gradient `G` of the discrete energy, `dE = ⟨G, du⟩`;
/// `G/2 = −Δu + αVu + 4πβWu + γ(log u² + 1)u`.
pub fn energy_gradient(u: &WaveFunction, p: &SchrodingerParams) -> Result<Vec<f64>> {
    check_tailless(u)?;
    Ok(Discrete::new(u.grid()).gradient(u.values(), p))
}

fn check_tailless(u: &WaveFunction) -> Result<()> {
    if u.tail().is_some() {
        return Err(Error::Mismatch("the minimizer works with grid-only wave functions".into()));
    }
    Ok(())
}

/// Euler–Lagrange residual of `u` as a constrained critical point.
pub fn el_residual(u: &WaveFunction, p: &SchrodingerParams) -> Result<f64> {
    check_tailless(u)?;
    let d = Discrete::new(u.grid());
    let g = d.gradient(u.values(), p);
    Ok(d.multiplier_and_residual(u.values(), &g).1)
}

/// Gradient with its component along `u` removed.
pub fn projected_gradient(u: &WaveFunction, p: &SchrodingerParams) -> Result<Vec<f64>> {
    check_tailless(u)?;
    let d = Discrete::new(u.grid());
    let v = u.values();
    let g = d.gradient(v, p);
    let gu = d.inner(&g, v) / d.inner(v, v);
    Ok(g.iter().zip(v).map(|(g, v)| g - gu * v).collect())
}

/// Solve `(2L + 2σA)x = y` with `L` the Dirichlet form and `A` the cell areas.
struct Preconditioner {
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl Preconditioner {
    fn new(cells: &Cells, sigma: f64) -> Self {
        let n = cells.area.len();
        let mut diag: Vec<f64> = cells.area.iter().map(|a| 2.0 * sigma * a).collect();
        let mut lower = vec![0.0; n - 1];
        for i in 0..n - 1 {
            let q = 2.0 * cells.trans[i];
            diag[i] += q;
            diag[i + 1] += q;
            lower[i] = -q;
        }
        Preconditioner { lower, diag }
    }

    fn solve(&self, y: &[f64]) -> Vec<f64> {
        // Thomas algorithm on the symmetric tridiagonal system
        let n = y.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        c[0] = if n > 1 { self.lower[0] / denom } else { 0.0 };
        d[0] = y[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if i < n - 1 {
                c[i] = self.lower[i] / denom;
            }
            d[i] = (y[i] - self.lower[i - 1] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }
}

/// The unit Gaussian `μ = e^{−|x|²/2}/(2π)` scaled to mass `M`, as a wave function.
pub fn gaussian_trial(grid: &RadialGrid, mass: f64) -> Result<WaveFunction> {
    let g = ClosedForm::new(Family::Gaussian, mass)?;
    WaveFunction::new(grid, grid.nodes().iter().map(|&r| g.evaluate(r).sqrt()).collect())
}

/// Minimize `E` on `∥u∥₂² = M`.
pub fn minimize(p: &SchrodingerParams, opts: &MinimizeOptions) -> Result<GroundStateReport> {
    if !(opts.step > 0.0) || !(opts.tolerance > 0.0) || !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::Parameter("step and tolerance must be positive and the shrink factor in (0, 1)".into()));
    }
    match classify_schrodinger(p).region {
        Region::Bounded => {}
        Region::Unknown if opts.allow_unknown => {}
        Region::Unknown => {
            return Err(Error::Parameter(format!(
                "boundedness of E is undecided at (α, β, γ, M) = ({}, {}, {}, {}); pass the override to run anyway",
                p.alpha, p.beta, p.gamma, p.mass
            )))
        }
        Region::Unbounded if opts.allow_unbounded => {}
        Region::Unbounded => {
            return Err(Error::Unbounded(format!(
                "E is unbounded below on ∥u∥₂² = M at (α, β, γ, M) = ({}, {}, {}, {}): α < 0 or Mβ > min(2α − γ, 4α − 2γ)",
                p.alpha, p.beta, p.gamma, p.mass
            )))
        }
    }
    let grid = opts.grid.build()?;
    let mut u = match &opts.initial {
        Some(w) => {
            check_tailless(w)?;
            if !w.grid().is_same(&grid) {
                return Err(Error::Mismatch("initial state lives on a different grid".into()));
            }
            w.values().to_vec()
        }
        None => gaussian_trial(&grid, p.mass)?.values().to_vec(),
    };
    let disc = Discrete::new(&grid);
    disc.renormalize(&mut u, p.mass);
    let pre = Preconditioner::new(&disc.cells, 1.0);

    let mut energy = disc.energy(&u, p).total;
    let mut trace = vec![energy];
    let mut step = opts.step;
    let mut converged = false;
    let mut iterations = 0;
    let (mut theta, mut residual);
    loop {
        let g = disc.euclidean_gradient(&u, p);
        let big_g: Vec<f64> = g.iter().zip(&disc.cells.area).map(|(g, a)| g / a).collect();
        (theta, residual) = disc.multiplier_and_residual(&u, &big_g);
        if residual < opts.tolerance {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        // preconditioned direction, made tangent to the sphere ∥u∥² = M
        let x1 = pre.solve(&g);
        let du: Vec<f64> = u.iter().zip(&disc.cells.area).map(|(u, a)| u * a).collect();
        let x2 = pre.solve(&du);
        let t = dot(&du, &x1) / dot(&du, &x2);
        let dir: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| -a + t * b).collect();
        let slope = dot(&g, &dir);
        if !(slope < 0.0) {
            break;
        }
        let mut accepted = None;
        while step > 1e-14 {
            let mut trial: Vec<f64> = u.iter().zip(&dir).map(|(u, d)| u + step * d).collect();
            disc.renormalize(&mut trial, p.mass);
            let e = disc.energy(&trial, p).total;
            if e <= energy + 1e-4 * step * slope {
                accepted = Some((trial, e));
                break;
            }
            step *= opts.shrink;
        }
        let Some((next, e)) = accepted else {
            log::warn!("line search stalled at residual {residual}");
            break;
        };
        u = next;
        energy = e;
        trace.push(e);
        iterations += 1;
        step = (step / opts.shrink).min(4.0 * opts.step);
    }
    if !converged {
        log::warn!("minimization stopped after {iterations} iterations with residual {residual}");
    }
    let energy_quadrature = schrodinger_energy(&WaveFunction::new(&grid, u.clone())?, p)?;
    Ok(GroundStateReport {
        params: *p,
        mass: disc.inner(&u, &u),
        energy_quadrature,
        grid: grid.spec(),
        r: grid.nodes().to_vec(),
        u,
        energy,
        theta,
        residual,
        iterations,
        converged,
        trace,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// EL residual of `√(Mμ)` for `(α, β, γ) = (0, 0, γ)` at each `γ`, with the minimizing `γ`.
pub fn gausson_scan(gammas: &[f64], grid: &RadialGrid, mass: f64) -> Result<(Vec<(f64, f64)>, f64)> {
    let u = gaussian_trial(grid, mass)?;
    let mut rows = Vec::with_capacity(gammas.len());
    for &g in gammas {
        rows.push((g, el_residual(&u, &SchrodingerParams::new(0.0, 0.0, g, mass)?)?));
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|r| r.0)
        .ok_or_else(|| Error::Parameter("empty γ scan".into()))?;
    Ok((rows, best))
}

/// Coefficient of determination of a quadratic fit of `log u²` against `r`
/// over nodes where `u²` exceeds `floor` times its maximum.
pub fn log_profile_quadratic_r2(r: &[f64], u: &[f64], floor: f64) -> f64 {
    let max = u.iter().map(|v| v * v).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> =
        r.iter().zip(u).filter(|(_, v)| *v * *v > floor * max).map(|(r, v)| (*r, (v * v).ln())).collect();
    // normal equations for y = c0 + c1 r + c2 r²
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for &(x, y) in &pts {
        let phi = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += phi[i] * phi[j];
            }
            b[i] += phi[i] * y;
        }
    }
    let c = solve3(a, b);
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(x, y) in &pts {
        let fit = c[0] + c[1] * x + c[2] * x * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean) * (y - mean);
    }
    1.0 - ss_res / ss_tot
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for k in 0..3 {
        let piv = (k..3).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap_or(k);
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..3 {
            let f = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        x[k] = (b[k] - (k + 1..3).map(|j| a[k][j] * x[j]).sum::<f64>()) / a[k][k];
    }
    x
}

/// CSV `r,u` of the minimizer.
pub fn write_profile_csv(out: &mut dyn Write, report: &GroundStateReport, config: &str) -> std::io::Result<()> {
    writeln!(out, "# config: {config}")?;
    writeln!(out, "r,u")?;
    for (r, u) in report.r.iter().zip(&report.u) {
        writeln!(out, "{r},{u}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::make_radial_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> RadialGrid {
        make_radial_grid(400, 20.0, Grading::Uniform).unwrap()
    }

    fn smooth_state(grid: &RadialGrid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (a, b, c) = (rng.gen_range(0.3..1.5), rng.gen_range(-0.5..0.5), rng.gen_range(0.5..3.0));
        grid.nodes().iter().map(|&r| (-a * r * r / 2.0).exp() * (1.0 + b * (r / c).sin())).collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(al, be, ga) in &[(1.0, 0.0, -1.0), (1.0, 0.5, 0.3), (0.5, -1.0, 1.0), (-0.5, 2.0, -0.7)] {
            let u = WaveFunction::new(&g, smooth_state(&g, &mut rng)).unwrap();
            let p = SchrodingerParams::new(al, be, ga, u.mass()).unwrap();
            let dir = smooth_state(&g, &mut rng);
            let grad = energy_gradient(&u, &p).unwrap();
            let d = Discrete::new(&g);
            let analytic = d.inner(&grad, &dir);
            let h = 1e-5;
            let shifted = |s: f64| {
                let v: Vec<f64> = u.values().iter().zip(&dir).map(|(a, b)| a + s * b).collect();
                d.energy(&v, &p).total
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            assert!((fd - analytic).abs() < 1e-4 * analytic.abs().max(1e-3), "{p:?}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn free_gradient_is_twice_minus_laplacian() {
        let g = make_radial_grid(2001, 20.0, Grading::Uniform).unwrap();
        let u = gaussian_trial(&g, 1.0).unwrap();
        let p = SchrodingerParams::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let grad = energy_gradient(&u, &p).unwrap();
        let k = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        for (i, &r) in g.nodes().iter().enumerate().skip(10).take(400).step_by(20) {
            // u = k e^{−r²/4}: −Δu = (1 − r²/4)u
            let expected = 2.0 * (1.0 - r * r / 4.0) * k * (-r * r / 4.0).exp();
            assert!((grad[i] - expected).abs() < 1e-3, "r = {r}: {} vs {expected}", grad[i]);
        }
    }

    #[test]
    fn projected_gradient_is_orthogonal() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = WaveFunction::new(&g, smooth_state(&g, &mut rng)).unwrap();
        let p = SchrodingerParams::new(1.0, 0.3, -0.5, u.mass()).unwrap();
        let pg = projected_gradient(&u, &p).unwrap();
        let d = Discrete::new(&g);
        let scale = (d.inner(&pg, &pg) * d.inner(u.values(), u.values())).sqrt();
        assert!(d.inner(&pg, u.values()).abs() < 1e-10 * scale);
    }

    #[test]
    fn gausson_width_selects_minus_half() {
        let g = grid();
        let gammas: Vec<f64> = (0..=40).map(|k| -1.0 + 0.025 * k as f64).collect();
        let (rows, best) = gausson_scan(&gammas, &g, 1.0).unwrap();
        assert!((best + 0.5).abs() < 1e-9, "{best}");
        let at_best = rows.iter().find(|r| r.0 == best).unwrap().1;
        assert!(at_best < 1e-3, "{rows:?}");
    }

    #[test]
    fn random_state_has_large_residual() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = g.nodes().iter().map(|&r| (-r * r / 4.0).exp() * rng.gen_range(0.5..1.5)).collect();
        let u = WaveFunction::new(&g, v).unwrap();
        let p = SchrodingerParams::new(1.0, 0.0, 0.0, u.mass()).unwrap();
        assert!(el_residual(&u, &p).unwrap() > 0.1);
    }

    #[test]
    fn unbounded_parameters_are_rejected() {
        let p = SchrodingerParams::new(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(minimize(&p, &MinimizeOptions::default()), Err(Error::Unbounded(_))));
    }

    #[test]
    fn trap_ground_state_converges() {
        let p = SchrodingerParams::new(1.0, 0.0, 0.0, 1.0).unwrap();
        let opts = MinimizeOptions { grid: GridSpec { n: 400, r_max: 20.0, grading: Grading::Uniform }, ..Default::default() };
        let rep = minimize(&p, &opts).unwrap();
        assert!(rep.converged, "residual {}", rep.residual);
        assert!(rep.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((rep.mass - 1.0).abs() < 1e-12);
        assert!((rep.energy - rep.energy_quadrature).abs() < 1e-3);
    }
}
