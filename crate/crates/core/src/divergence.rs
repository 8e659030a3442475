//! Test-function families along which the energies go to `−∞`, and log-slope fits.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedforms::{ClosedForm, Family, Profile};
use crate::error::{Error, Result};
use crate::functionals::{
    entropy, interaction, kinetic, potential_moment, potential_moment_translated, FreeEnergyParams,
    SchrodingerParams,
};
use crate::grids::{make_radial_grid, Grading, RadialGrid};

/// Members are declared divergent when the fitted slope is within this relative distance of the analytic one.
pub const SLOPE_TOLERANCE: f64 = 0.05;

const MIN_MEMBERS: usize = 4;
const MEMBER_NODES: usize = 2048;
const MIN_RMAX: f64 = 100.0;

/// A family that drives an energy to `−∞`, as attached to phase-diagram cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "witness", rename_all = "kebab-case")]
pub enum Witness {
    /// move the mass off to infinity
    Translate,
    /// concentrate `ρ_⋆` (`λ → ∞`)
    ScaleUp,
    /// spread an annulus bump (`λ → 0`)
    ScaleDown,
    /// spread a wave function (`λ → 0`)
    WaveScale,
    /// keep a fraction `1−ε` in place and spread the rest
    TwoBubble { eps: f64 },
    /// `n²` bumps of radius `n^{−A}` on the integer lattice
    Lattice { a_exp: f64 },
    /// `ρ_ζ` with `ζ → 1⁺`
    ZetaLimit,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Translate => write!(f, "translate"),
            Witness::ScaleUp => write!(f, "scale-up"),
            Witness::ScaleDown => write!(f, "scale-down"),
            Witness::WaveScale => write!(f, "wave-scale"),
            Witness::TwoBubble { eps } => write!(f, "two-bubble(eps={eps})"),
            Witness::Lattice { a_exp } => write!(f, "lattice(A={a_exp})"),
            Witness::ZetaLimit => write!(f, "zeta-limit"),
        }
    }
}

/// Largest bubble fraction tried by the two-bubble witness.
const MAX_EPS: f64 = 0.3;

fn two_bubble_eps(a: f64, b: f64, c: f64) -> Option<f64> {
    // need c − a + b(1 − ε/2) > 0, i.e. ε < 2(b − (a − c))/b
    if !(b > 0.0) || !(b > a - c) {
        return None;
    }
    let eps = MAX_EPS.min((b - (a - c)) / b);
    Some((eps * 1e6).floor() / 1e6).filter(|e| *e > 0.0)
}

/// Pick the family with the steepest expected descent, on `F` with coefficients `(a, b, c)` per unit mass.
fn pick(a: f64, b: f64, c: f64, wave: bool) -> Option<Witness> {
    let mut best: Option<(f64, Witness)> = None;
    let mut offer = |rate: f64, w: Witness| {
        if rate > 0.0 && best.map_or(true, |(r, _)| rate > r) {
            best = Some((rate, w));
        }
    };
    offer(-2.0 * a, Witness::Translate);
    if !wave {
        offer(-(b + 2.0 * c), Witness::ScaleUp);
    }
    offer(b + 2.0 * c - 2.0 * a, if wave { Witness::WaveScale } else { Witness::ScaleDown });
    if let Some(eps) = two_bubble_eps(a, b, c) {
        offer(2.0 * eps * (c - a + b * (1.0 - eps / 2.0)), Witness::TwoBubble { eps });
    }
    if !wave && c < 0.0 {
        let a_exp = lattice_exponent(a, b, c);
        offer(-(2.0 * c * (a_exp - 1.0) + 2.0 * a - b), Witness::Lattice { a_exp });
    }
    if let Some((_, w)) = best {
        return Some(w);
    }
    let near = |x: f64, y: f64| (x - y).abs() <= 1e-9;
    (c > 0.0 && near(a, c) && near(b, 0.0)).then_some(Witness::ZetaLimit)
}

fn lattice_exponent(a: f64, b: f64, c: f64) -> f64 {
    // smallest integer A ≥ 4 with 2c(A−1) + 2a − b ≤ c
    let need = 1.0 + (2.0 * a - b - c) / (2.0 * c.abs());
    need.ceil().max(4.0)
}

/// Witness for `F = c∫ρlog(ρ/M) + a∫log(1+|x|²)ρ − (b/M)I`, or `None` when no family descends.
pub fn free_energy_witness(a: f64, b: f64, c: f64) -> Option<Witness> {
    pick(a, b, c, false)
}

/// Witness for the Schrödinger energy; it behaves like `F` with `(2α, Mβ, γ)` plus a kinetic term.
pub fn schrodinger_witness(p: &SchrodingerParams) -> Option<Witness> {
    pick(2.0 * p.alpha, p.mass * p.beta, p.gamma, true)
}

/// A family of test functions with its parameter sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FamilyId {
    /// `ρ(· − x₀)` with `|x₀|` from the sequence
    Translate { distances: Vec<f64> },
    /// `λ²ρ(λ·)`
    Scale { lambdas: Vec<f64> },
    /// `(1−ε)ρ + ελ²ρ(λ·)`, annulus base, `λ < 1/2`
    TwoBubble { eps: f64, lambdas: Vec<f64> },
    /// `n²` copies of the unit-ball bump scaled to radius `ε = n^{−A}` at `(k, ℓ)`, `1 ≤ k, ℓ ≤ n`
    Lattice { a_exp: f64, ns: Vec<usize> },
    /// `λu(λ·)`
    WaveScale { lambdas: Vec<f64> },
    /// `ρ_ζ` for the given `ζ > 1`
    ZetaLimit { zetas: Vec<f64> },
}

impl FamilyId {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyId::Translate { .. } => "TRANSLATE",
            FamilyId::Scale { .. } => "SCALE",
            FamilyId::TwoBubble { .. } => "TWO_BUBBLE",
            FamilyId::Lattice { .. } => "LATTICE",
            FamilyId::WaveScale { .. } => "WAVE_SCALE",
            FamilyId::ZetaLimit { .. } => "ZETA_LIMIT",
        }
    }

    fn len(&self) -> usize {
        match self {
            FamilyId::Translate { distances } => distances.len(),
            FamilyId::Scale { lambdas } | FamilyId::TwoBubble { lambdas, .. } | FamilyId::WaveScale { lambdas } => {
                lambdas.len()
            }
            FamilyId::Lattice { ns, .. } => ns.len(),
            FamilyId::ZetaLimit { zetas } => zetas.len(),
        }
    }

    fn is_wave(&self) -> bool {
        matches!(self, FamilyId::WaveScale { .. })
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyId::TwoBubble { eps, .. } => write!(f, "TWO_BUBBLE(eps={eps})"),
            FamilyId::Lattice { a_exp, .. } => write!(f, "LATTICE(A={a_exp})"),
            other => write!(f, "{}", other.name()),
        }
    }
}

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    let step = if to >= from { 1 } else { -1 };
    let mut out = Vec::new();
    let mut k = from;
    loop {
        out.push(2f64.powi(k));
        if k == to {
            break;
        }
        k += step;
    }
    out
}

impl Witness {
    /// The family and base density executed for this witness.
    pub fn family(&self) -> (FamilyId, Family) {
        match *self {
            Witness::Translate => (FamilyId::Translate { distances: dyadic(4, 10) }, Family::RhoStar),
            Witness::ScaleUp => (FamilyId::Scale { lambdas: dyadic(3, 9) }, Family::RhoStar),
            Witness::ScaleDown => (FamilyId::Scale { lambdas: dyadic(-3, -9) }, Family::AnnulusBump),
            Witness::WaveScale => (FamilyId::WaveScale { lambdas: dyadic(-3, -9) }, Family::AnnulusBump),
            Witness::TwoBubble { eps } => {
                (FamilyId::TwoBubble { eps, lambdas: dyadic(-3, -8) }, Family::AnnulusBump)
            }
            Witness::Lattice { a_exp } => (FamilyId::Lattice { a_exp, ns: vec![2, 3, 4, 6, 8] }, Family::UnitBallBump),
            Witness::ZetaLimit => (
                FamilyId::ZetaLimit { zetas: (1..=6).map(|k| 1.0 + 2f64.powi(-k)).collect() },
                Family::RhoEta { eta: 2.0 },
            ),
        }
    }
}

/// One member of a family; densities are built only when the member is evaluated.
#[derive(Debug, Clone)]
pub enum Member {
    Radial { param: f64, profile: Profile },
    Translated { param: f64, profile: Profile, distance: f64 },
    Lattice { param: f64, bump: Profile, n: usize, eps: f64 },
}

impl Member {
    pub fn param(&self) -> f64 {
        match self {
            Member::Radial { param, .. } | Member::Translated { param, .. } | Member::Lattice { param, .. } => *param,
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Member::Radial { profile, .. } | Member::Translated { profile, .. } => profile.mass(),
            Member::Lattice { bump, n, .. } => bump.mass() * (n * n) as f64,
        }
    }
}

fn positive(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| *v > 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{what} must be positive and finite")))
    }
}

/// Members of `id` built from `base`.
pub fn make_family(id: &FamilyId, base: &ClosedForm) -> Result<Vec<Member>> {
    let profile = base.profile();
    let support = base.family.support();
    let members = match id {
        FamilyId::Translate { distances } => {
            positive(distances, "distances")?;
            distances
                .iter()
                .map(|&d| Member::Translated { param: d, profile: profile.clone(), distance: d })
                .collect()
        }
        FamilyId::Scale { lambdas } | FamilyId::WaveScale { lambdas } => {
            positive(lambdas, "scales")?;
            lambdas.iter().map(|&l| Member::Radial { param: l, profile: profile.scaled(l) }).collect()
        }
        FamilyId::TwoBubble { eps, lambdas } => {
            positive(lambdas, "scales")?;
            match support {
                Some((lo, hi)) if lo >= 1.0 && hi <= 2.0 => {}
                _ => {
                    return Err(Error::Support(format!(
                        "two-bubble family needs a base supported in 1 ≤ |x| ≤ 2, got {}",
                        base.family
                    )))
                }
            }
            if !(*eps > 0.0 && *eps < 1.0) {
                return Err(Error::Parameter(format!("bubble fraction must lie in (0, 1), got {eps}")));
            }
            if let Some(l) = lambdas.iter().find(|l| **l >= 0.5) {
                return Err(Error::Parameter(format!("two-bubble scales must be below 1/2, got {l}")));
            }
            lambdas
                .iter()
                .map(|&l| Member::Radial {
                    param: l,
                    profile: profile.times(1.0 - eps).plus(&profile.times(*eps).scaled(l)),
                })
                .collect()
        }
        FamilyId::Lattice { a_exp, ns } => {
            match support {
                Some((_, hi)) if hi <= 1.0 => {}
                _ => {
                    return Err(Error::Support(format!(
                        "lattice family needs a base supported in the unit ball, got {}",
                        base.family
                    )))
                }
            }
            if !(*a_exp > 1.0) {
                return Err(Error::Parameter(format!("lattice exponent must exceed 1, got {a_exp}")));
            }
            let mut out = Vec::with_capacity(ns.len());
            for &n in ns {
                let eps = (n as f64).powf(-a_exp);
                if n == 0 || !(eps < 0.25) {
                    return Err(Error::Parameter(format!("lattice radius n^(−A) must be below 1/4, got n = {n}")));
                }
                let bump = profile.times(1.0 / (n * n) as f64).scaled(1.0 / eps);
                out.push(Member::Lattice { param: n as f64, bump, n, eps });
            }
            out
        }
        FamilyId::ZetaLimit { zetas } => {
            if !matches!(base.family, Family::RhoEta { .. }) {
                return Err(Error::Support(format!("ζ-limit family needs the ρ_η base, got {}", base.family)));
            }
            let mut out = Vec::with_capacity(zetas.len());
            for &z in zetas {
                let cf = ClosedForm::new(Family::RhoEta { eta: z }, base.mass)?;
                out.push(Member::Radial { param: z, profile: cf.profile() });
            }
            out
        }
    };
    Ok(members)
}

/// The energy a family is run against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "kebab-case")]
pub enum Functional {
    FreeEnergy(FreeEnergyParams),
    Schrodinger(SchrodingerParams),
}

impl Functional {
    pub fn mass(&self) -> f64 {
        match self {
            Functional::FreeEnergy(p) => p.mass,
            Functional::Schrodinger(p) => p.mass,
        }
    }

    /// `(a, b, c)` of the equivalent free energy.
    fn coefficients(&self) -> (f64, f64, f64) {
        match self {
            Functional::FreeEnergy(p) => (p.a, p.b, p.c),
            Functional::Schrodinger(p) => (2.0 * p.alpha, p.mass * p.beta, p.gamma),
        }
    }

    /// Witness selected for this energy.
    pub fn witness(&self) -> Option<Witness> {
        match self {
            Functional::FreeEnergy(p) => free_energy_witness(p.a, p.b, p.c),
            Functional::Schrodinger(p) => schrodinger_witness(p),
        }
    }
}

/// Term breakdown for one member.
///
/// For the Schrödinger energy `entropy` holds `∫|u|²log|u|²` and `kinetic` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberTerms {
    pub entropy: f64,
    pub potential_moment: f64,
    pub interaction: f64,
    pub kinetic: Option<f64>,
    pub total: f64,
}

fn member_grid(profile: &Profile) -> Result<RadialGrid> {
    let outer = profile.support().map_or(0.0, |s| s.1);
    make_radial_grid(MEMBER_NODES, MIN_RMAX.max(4.0 * outer), Grading::Geometric)
}

fn combine(f: &Functional, ent: f64, pm: f64, i: f64, kin: Option<f64>) -> MemberTerms {
    let total = match f {
        Functional::FreeEnergy(p) => p.c * ent + p.a * pm - p.b / p.mass * i,
        Functional::Schrodinger(p) => kin.unwrap_or(0.0) + 2.0 * p.alpha * pm - p.beta * i + p.gamma * ent,
    };
    MemberTerms { entropy: ent, potential_moment: pm, interaction: i, kinetic: kin, total }
}

/// Entropy term in the convention of `f`: `∫ρlog(ρ/M)` or `∫ρlogρ`.
fn entropy_term(f: &Functional, rho: &crate::grids::RadialDensity) -> Result<f64> {
    match f {
        Functional::FreeEnergy(p) => entropy(rho, p.mass),
        Functional::Schrodinger(_) => entropy(rho, 1.0),
    }
}

/// Evaluate one member.
pub fn evaluate_member(member: &Member, f: &Functional) -> Result<MemberTerms> {
    match member {
        Member::Radial { profile, .. } | Member::Translated { profile, .. } => {
            let grid = member_grid(profile)?;
            let (rho, kin) = match f {
                Functional::FreeEnergy(_) => (profile.density(&grid)?, None),
                Functional::Schrodinger(_) => {
                    let u = profile.wave(&grid)?;
                    (u.density()?, Some(kinetic(&u)))
                }
            };
            let pm = match member {
                Member::Translated { distance, .. } => potential_moment_translated(&rho, *distance),
                _ => potential_moment(&rho),
            };
            Ok(combine(f, entropy_term(f, &rho)?, pm, interaction(&rho), kin))
        }
        Member::Lattice { bump, n, eps, .. } => {
            if matches!(f, Functional::Schrodinger(_)) {
                return Err(Error::Mismatch("the lattice family runs against the free energy only".into()));
            }
            let grid = make_radial_grid(MEMBER_NODES, *eps, Grading::Geometric)?;
            let rho = bump.density(&grid)?;
            let copies = (n * n) as f64;
            let m = bump.mass();
            let points: Vec<(f64, f64)> =
                (1..=*n).flat_map(|k| (1..=*n).map(move |l| (k as f64, l as f64))).collect();
            let pm: f64 = points.iter().map(|(x, y)| potential_moment_translated(&rho, x.hypot(*y))).sum();
            // disjoint radial bumps interact like point masses
            let mut cross = 0.0;
            for (i, p) in points.iter().enumerate() {
                for q in &points[i + 1..] {
                    cross += (p.0 - q.0).hypot(p.1 - q.1).ln();
                }
            }
            let i_total = copies * interaction(&rho) + 2.0 * m * m * cross;
            Ok(combine(f, copies * entropy_term(f, &rho)?, pm, i_total, None))
        }
    }
}

/// Log-slope fit of an energy along a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub family: FamilyId,
    pub base: ClosedForm,
    pub functional: Functional,
    /// `log λ`, `log|x₀|`, `log n` or `log(ζ−1)`
    pub abscissa: Vec<f64>,
    pub energies: Vec<f64>,
    pub terms: Vec<MemberTerms>,
    pub fitted_slope: f64,
    pub analytic_slope: Option<f64>,
    pub relative_error: Option<f64>,
    /// slope of the energy against `|abscissa|` in the limit direction; negative means descent
    pub rate: f64,
    pub divergence_confirmed: bool,
}

fn abscissa(id: &FamilyId, member: &Member) -> f64 {
    match id {
        FamilyId::ZetaLimit { .. } => (member.param() - 1.0).ln(),
        _ => member.param().ln(),
    }
}

/// Asymptotic slope `dE/d(abscissa)`, when known.
pub fn analytic_slope(id: &FamilyId, f: &Functional) -> Option<f64> {
    let (a, b, c) = f.coefficients();
    let m = f.mass();
    let schrodinger = matches!(f, Functional::Schrodinger(_));
    let shrinking = |l: &[f64]| l.len() >= 2 && l[l.len() - 1] < l[0];
    match id {
        FamilyId::Translate { .. } => Some(2.0 * a * m),
        FamilyId::Scale { lambdas } | FamilyId::WaveScale { lambdas } => {
            if shrinking(lambdas) {
                Some(m * (2.0 * c - 2.0 * a + b))
            } else if schrodinger {
                // the kinetic term grows like λ² and dominates
                None
            } else {
                Some(m * (2.0 * c + b))
            }
        }
        FamilyId::TwoBubble { eps, .. } => Some(2.0 * eps * m * (c - a + b * (1.0 - eps / 2.0))),
        FamilyId::Lattice { a_exp, .. } => Some(m * (2.0 * c * (a_exp - 1.0) + 2.0 * a - b)),
        FamilyId::ZetaLimit { .. } => {
            // otherwise the potential or interaction terms blow up like 1/(ζ−1)
            ((a - c).abs() <= 1e-9 && b.abs() <= 1e-9).then_some(c * m)
        }
    }
}

/// Ordinary least-squares slope.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Evaluate `f` along the family and fit the slope on the last half of the sequence.
pub fn measure_slope(id: &FamilyId, base: &ClosedForm, f: &Functional) -> Result<SlopeEstimate> {
    if id.len() < MIN_MEMBERS {
        return Err(Error::TooShort(id.len()));
    }
    if id.is_wave() && !matches!(f, Functional::Schrodinger(_)) {
        return Err(Error::Mismatch("wave families run against the Schrödinger energy".into()));
    }
    if (base.mass - f.mass()).abs() > 1e-12 * f.mass() {
        return Err(Error::Mismatch(format!("base has mass {}, energy expects {}", base.mass, f.mass())));
    }
    let members = make_family(id, base)?;
    for m in &members {
        if (m.mass() - base.mass).abs() > 1e-9 * base.mass {
            return Err(Error::Mismatch(format!("member mass {} differs from {}", m.mass(), base.mass)));
        }
    }
    let terms = members.par_iter().map(|m| evaluate_member(m, f)).collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = members.iter().map(|m| abscissa(id, m)).collect();
    let energies: Vec<f64> = terms.iter().map(|t| t.total).collect();
    if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let start = x.len() / 2;
    let fitted = ols_slope(&x[start..], &energies[start..]);
    let analytic = analytic_slope(id, f);
    let relative_error = analytic.map(|s| (fitted - s).abs() / s.abs().max(f64::MIN_POSITIVE));
    let direction = (x[x.len() - 1] - x[0]).signum();
    let rate = fitted * direction;
    let confirmed = rate < 0.0 && relative_error.is_some_and(|e| e <= SLOPE_TOLERANCE);
    log::debug!("{id}: fitted {fitted}, analytic {analytic:?}");
    Ok(SlopeEstimate {
        family: id.clone(),
        base: *base,
        functional: *f,
        abscissa: x,
        energies,
        terms,
        fitted_slope: fitted,
        analytic_slope: analytic,
        relative_error,
        rate,
        divergence_confirmed: confirmed,
    })
}

/// Run the default family of a witness.
pub fn run_witness(w: Witness, f: &Functional) -> Result<SlopeEstimate> {
    let (id, family) = w.family();
    measure_slope(&id, &ClosedForm::new(family, f.mass())?, f)
}

/// CSV with one row per member; `config` goes on a leading comment line.
pub fn write_slope_csv(out: &mut dyn Write, est: &SlopeEstimate, config: &str) -> std::io::Result<()> {
    writeln!(out, "# config: {config}")?;
    writeln!(out, "log_param,energy,entropy,potential_moment,interaction,kinetic")?;
    for (x, t) in est.abscissa.iter().zip(&est.terms) {
        let kin = t.kinetic.map(|k| k.to_string()).unwrap_or_default();
        writeln!(out, "{x},{},{},{},{},{kin}", t.total, t.entropy, t.potential_moment, t.interaction)?;
    }
    Ok(())
}
