//! Verification suites: equality cases, a seeded random corpus of inequality
//! checks, scaling identities and closed-form integrals.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedforms::{analytic_value, ClosedForm, Family, Identity, Profile};
use crate::error::Result;
use crate::functionals::{
    entropy, g_functional, interaction, kinetic, log_moment, poisson_potential, potential_moment,
};
use crate::grids::{GridSpec, RadialDensity, RadialGrid, WaveFunction};
use crate::inequalities::{deficit, deficit_with_tolerance, DeficitReport, InequalityId, Input, EQUALITY_TOLERANCE};

/// Which checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Equalities,
    Inequalities,
    Scaling,
    Identities,
    All,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Equalities => "equalities",
            Suite::Inequalities => "inequalities",
            Suite::Scaling => "scaling",
            Suite::Identities => "identities",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

/// One verified quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `|value − expected| ≤ tolerance`.
    pub fn close(suite: &str, name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let error = (value - expected).abs();
        Check {
            suite: suite.into(),
            name: name.into(),
            value,
            expected,
            error,
            tolerance,
            pass: error <= tolerance,
        }
    }

    /// `deficit ≥ −tolerance`; `expected` holds the right-hand side.
    fn inequality(suite: &str, name: String, r: &DeficitReport) -> Self {
        Check {
            suite: suite.into(),
            name,
            value: r.lhs,
            expected: r.rhs,
            error: (-r.deficit).max(0.0),
            tolerance: r.tolerance,
            pass: r.pass,
        }
    }

    /// `|deficit| ≤ tolerance`.
    fn equality(suite: &str, name: String, r: &DeficitReport) -> Self {
        Check::close(suite, name, r.lhs, r.rhs, r.tolerance)
    }
}

/// Settings shared by the suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    pub grid: GridSpec,
    pub seed: u64,
    /// size of the random corpus
    pub samples: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { grid: GridSpec::default(), seed: 0, samples: 24 }
    }
}

pub fn run_suite(suite: Suite, s: &VerifySettings) -> Result<Vec<Check>> {
    match suite {
        Suite::Equalities => equalities(s),
        Suite::Inequalities => inequalities(s),
        Suite::Scaling => scaling(s),
        Suite::Identities => identities(s),
        Suite::All => {
            let mut out = Vec::new();
            for part in [Suite::Equalities, Suite::Inequalities, Suite::Scaling, Suite::Identities] {
                out.extend(run_suite(part, s)?);
            }
            Ok(out)
        }
    }
}

fn density(family: Family, mass: f64, grid: &RadialGrid) -> Result<RadialDensity> {
    ClosedForm::new(family, mass)?.density(grid)
}

/// Equality cases of the density inequalities and of the Gaussian logarithmic
/// Sobolev inequalities.
pub fn equalities(s: &VerifySettings) -> Result<Vec<Check>> {
    const SUITE: &str = "equalities";
    let grid = s.grid.build()?;
    let mut out = Vec::new();
    for m in [1.0, 2.5] {
        let star = density(Family::RhoStar, m, &grid)?;
        let mut ids = vec![InequalityId::LogHls, InequalityId::PotentialVsInteraction];
        ids.extend([0.0, 0.5, 1.0, 2.0].map(|tau| InequalityId::LogHlsTau { tau }));
        for id in ids {
            let r = deficit(id, Input::Radial(&star), m)?;
            out.push(Check::equality(SUITE, format!("{id} at rho-star, M={m}"), &r));
        }
        for eta in [1.5, 2.0, 3.0, 5.0] {
            let rho = density(Family::RhoEta { eta }, m, &grid)?;
            let id = InequalityId::EntropyPotential { eta };
            let r = deficit(id, Input::Radial(&rho), m)?;
            out.push(Check::equality(SUITE, format!("{id} at rho-eta, M={m}"), &r));
        }
        let u = ClosedForm::new(Family::Gaussian, m)?.wave(&grid)?;
        for id in [InequalityId::LogsobEuclidean, InequalityId::LogsobWeissler] {
            let r = deficit(id, Input::Wave(&u), m)?;
            out.push(Check::equality(SUITE, format!("{id} at gaussian, M={m}"), &r));
        }
    }
    Ok(out)
}

/// A random radial density built from one to three closed-form profiles.
struct Sample {
    label: String,
    profile: Profile,
    /// the profile is bounded at the origin, so `√ρ` is a valid wave function
    smooth: bool,
}

fn random_sample(rng: &mut ChaCha8Rng) -> Result<Sample> {
    let parts = rng.gen_range(1..=3);
    let mut label = Vec::new();
    let mut profile: Option<Profile> = None;
    let mut smooth = true;
    for _ in 0..parts {
        let family = match rng.gen_range(0..4) {
            0 => Family::RhoEta { eta: rng.gen_range(1.3..4.0) },
            1 => Family::Gaussian,
            2 => Family::AnnulusBump,
            _ => {
                smooth = false;
                Family::KMinimizer { a: rng.gen_range(0.0..0.8), lambda: rng.gen_range(0.5..2.0) }
            }
        };
        let mass = rng.gen_range(0.2..2.0);
        let lambda: f64 = rng.gen_range(0.5..2.0);
        let p = ClosedForm::new(family, mass)?.profile().scaled(lambda);
        label.push(format!("{mass:.3}·{family}(λ={lambda:.3})"));
        profile = Some(match profile {
            None => p,
            Some(q) => q.plus(&p),
        });
    }
    Ok(Sample { label: label.join(" + "), profile: profile.expect("at least one part"), smooth })
}

/// Every inequality on a seeded random corpus; each must hold up to the
/// quadrature tolerance.
pub fn inequalities(s: &VerifySettings) -> Result<Vec<Check>> {
    const SUITE: &str = "inequalities";
    let grid = s.grid.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    // draw everything up front so the corpus does not depend on thread scheduling
    let mut jobs = Vec::with_capacity(s.samples);
    for _ in 0..s.samples {
        let sample = random_sample(&mut rng)?;
        let tau = rng.gen_range(0.0..3.0);
        let eta = rng.gen_range(1.05..6.0);
        let a = rng.gen_range(0.05..3.0);
        let b = rng.gen_range(-2.0..(a - 1.0_f64).min(2.0 * a - 2.0));
        let lambda = rng.gen_range(0.25..4.0);
        let density_ids = vec![
            InequalityId::LogHls,
            InequalityId::LogHlsTau { tau },
            InequalityId::PotentialVsInteraction,
            InequalityId::EntropyPotential { eta },
            InequalityId::FreeEnergyBound { a, b },
        ];
        let wave_ids = vec![
            InequalityId::LogsobEuclidean,
            InequalityId::LogsobScaled { lambda },
            InequalityId::LogsobWeissler,
            InequalityId::KinVsInteraction,
            InequalityId::KinVsInteractionScaled { lambda },
            InequalityId::ScaleInvariant,
        ];
        jobs.push((sample, density_ids, wave_ids));
    }
    let per_sample: Vec<Result<Vec<Check>>> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, (sample, density_ids, wave_ids))| {
            let rho = sample.profile.density(&grid)?;
            let m = rho.mass();
            let tol = EQUALITY_TOLERANCE * m.max(1.0).powi(2);
            let mut out = Vec::new();
            for &id in density_ids {
                let r = deficit_with_tolerance(id, Input::Radial(&rho), m, tol)?;
                if r.claim {
                    out.push(Check::inequality(SUITE, format!("#{k} {id} at {}", sample.label), &r));
                }
            }
            if sample.smooth {
                let u = sample.profile.wave(&grid)?;
                let m = u.mass();
                for &id in wave_ids {
                    let r = deficit_with_tolerance(id, Input::Wave(&u), m, tol)?;
                    out.push(Check::inequality(SUITE, format!("#{k} {id} at sqrt of {}", sample.label), &r));
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for part in per_sample {
        out.extend(part?);
    }
    Ok(out)
}

/// Relative tolerance of the scaling identities that the quadrature preserves exactly.
const SCALING_TOLERANCE: f64 = 1e-10;
/// The interaction picks up `−M² log λ` only up to the quadrature error of the
/// discrete pair mass, so its identities get a looser relative tolerance.
const INTERACTION_SCALING_TOLERANCE: f64 = 1e-7;

/// `ρ_λ(x) = λ²ρ(λx)` sampled on the grid with nodes `r/λ`, so that both
/// sides see the same quadrature.
fn scaled_pair(family: Family, mass: f64, lambda: f64, grid: &RadialGrid) -> Result<(RadialDensity, RadialDensity)> {
    let base = ClosedForm::new(family, mass)?.profile();
    let shrunk = RadialGrid::from_nodes(grid.nodes().iter().map(|r| r / lambda).collect())?;
    Ok((base.density(grid)?, base.scaled(lambda).density(&shrunk)?))
}

/// Exact behaviour of each term under `ρ ↦ λ²ρ(λ·)` and `u ↦ λu(λ·)`.
pub fn scaling(s: &VerifySettings) -> Result<Vec<Check>> {
    const SUITE: &str = "scaling";
    let grid = s.grid.build()?;
    let mut out = Vec::new();
    let close_with = |rel: f64, name: String, value: f64, expected: f64| {
        let tol = rel * expected.abs().max(value.abs()).max(1.0);
        Check::close(SUITE, name, value, expected, tol)
    };
    let close = |name, value, expected| close_with(SCALING_TOLERANCE, name, value, expected);
    let close_pair = |name, value, expected| close_with(INTERACTION_SCALING_TOLERANCE, name, value, expected);
    for family in [Family::RhoStar, Family::Gaussian, Family::AnnulusBump] {
        for lambda in [0.25, 3.0, 10.0] {
            let m = 1.5;
            let (rho, rl) = scaled_pair(family, m, lambda, &grid)?;
            let ll = lambda.ln();
            let tag = |q: &str| format!("{q} of {family} at λ={lambda}");
            out.push(close(tag("mass"), rl.mass(), rho.mass()));
            out.push(close(tag("entropy"), entropy(&rl, m)?, entropy(&rho, m)? + 2.0 * m * ll));
            out.push(close_pair(tag("interaction"), interaction(&rl), interaction(&rho) - rho.mass().powi(2) * ll));
            // undefined on grids whose origin node carries mass
            if let (Ok(a), Ok(b)) = (log_moment(&rl), log_moment(&rho)) {
                out.push(close(tag("log moment"), a, b - 2.0 * rho.mass() * ll));
            }
            let loghls = |d: &RadialDensity| -> Result<f64> { Ok(entropy(d, m)? + 2.0 / m * interaction(d)) };
            out.push(close_pair(tag("log-HLS functional"), loghls(&rl)?, loghls(&rho)?));
            let u = WaveFunction::from_density(&rho)?;
            let ul = WaveFunction::from_density(&rl)?;
            out.push(close(tag("kinetic"), kinetic(&ul), lambda * lambda * kinetic(&u)));
        }
    }
    Ok(out)
}

/// Closed-form integrals of the families and the known sharp constants.
pub fn identities(s: &VerifySettings) -> Result<Vec<Check>> {
    const SUITE: &str = "identities";
    let grid = s.grid.build()?;
    let mut out = Vec::new();
    for zeta in [1.2, 1.5, 2.0, 3.0, 6.0] {
        let rho = density(Family::RhoEta { eta: zeta }, 1.0, &grid)?;
        let exact = analytic_value(Identity::RhoZetaPotentialMoment { zeta, mass: 1.0 })?;
        out.push(Check::close(SUITE, format!("potential moment of rho-zeta, ζ={zeta}"), potential_moment(&rho), exact, 1e-6));
        for m in [1.0, 2.5] {
            let rho = density(Family::RhoEta { eta: zeta }, m, &grid)?;
            let exact = analytic_value(Identity::RhoZetaEntropy { zeta, mass: m })?;
            out.push(Check::close(SUITE, format!("entropy of rho-zeta, ζ={zeta}, M={m}"), entropy(&rho, m)?, exact, 1e-6));
        }
    }
    let star = density(Family::RhoStar, 1.0, &grid)?;
    out.push(Check::close(SUITE, "log moment of rho-star", log_moment(&star)?, 0.0, 1e-6));
    let w = poisson_potential(&star);
    let sup = grid
        .nodes()
        .iter()
        .zip(w.on_grid())
        .filter(|(r, _)| **r <= 10.0)
        .map(|(&r, &v)| (v + (r * r).ln_1p() / (4.0 * PI)).abs())
        .fold(0.0, f64::max);
    out.push(Check::close(SUITE, "Poisson potential of rho-star, sup over r ≤ 10", sup, 0.0, 1e-5));
    for m in [1.0, 2.0] {
        let star = density(Family::RhoStar, m, &grid)?;
        let exact = analytic_value(Identity::RhoStarInteraction { mass: m })?;
        out.push(Check::close(SUITE, format!("interaction of rho-star, M={m}"), interaction(&star), exact, 1e-5));
        let gauss = density(Family::Gaussian, m, &grid)?;
        let exact = analytic_value(Identity::GaussianInteraction { mass: m })?;
        out.push(Check::close(SUITE, format!("interaction of gaussian, M={m}"), interaction(&gauss), exact, 1e-4));
        let exact = analytic_value(Identity::GaussianEntropy { mass: m })?;
        out.push(Check::close(SUITE, format!("entropy of gaussian, M={m}"), entropy(&gauss, m)?, exact, 1e-4));
    }
    for a in [0.0, 0.25, 0.5, 0.75] {
        let exact = analytic_value(Identity::KConstant { a })?;
        for lambda in [0.5, 1.0, 2.0] {
            let rho = density(Family::KMinimizer { a, lambda }, 1.0, &grid)?;
            out.push(Check::close(
                SUITE,
                format!("G_a at the k-minimizer, a={a}, λ={lambda}"),
                g_functional(&rho, a)?,
                exact,
                1e-4,
            ));
        }
    }
    Ok(out)
}
