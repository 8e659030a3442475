//! Deficits of the logarithmic inequalities and the two phase diagrams.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedforms::sharp_constant;
use crate::divergence::{free_energy_witness, schrodinger_witness, Witness};
use crate::error::{Error, Result};
use crate::functionals::{
    entropy, entropy_planar, interaction, interaction_planar_auto, kinetic, potential_moment,
    potential_moment_planar, SchrodingerParams,
};
use crate::grids::{GridSpec, PlanarDensity, RadialDensity, WaveFunction};

/// Default tolerance for equality cases on the default grid.
pub const EQUALITY_TOLERANCE: f64 = 1e-4;

/// Boundary comparisons in the classifiers treat values within this distance as equal.
const BOUNDARY_EPS: f64 = 1e-9;

/// The inequalities, arranged as `lhs ≥ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InequalityId {
    /// `∫ρlog(ρ/M) + (2/M)I + M(1+logπ) ≥ 0`
    LogHls,
    /// `∫ρlog(ρ/M) + 2τ∫log(1+|x|²)ρ + M(1−τ+logπ) ≥ (2/M)(τ−1)I`
    LogHlsTau { tau: f64 },
    /// `2∫log(1+|x|²)ρ − M ≥ (2/M)I`
    PotentialVsInteraction,
    /// `∫ρlog(ρ/M) + η∫log(1+|x|²)ρ ≥ M log((η−1)/π)`, claimed for `η > 1`
    EntropyPotential { eta: f64 },
    /// `F_{a,b}[ρ] ≥ C(a,b)M`
    FreeEnergyBound { a: f64, b: f64 },
    /// `∫|∇u|² ≥ ½∫u²log(u²/M) + ½log(2πe²)M`
    LogsobEuclidean,
    /// `λ²∫|∇u|² − M logλ ≥ ½∫u²log(u²/M) + ½log(2πe²)M`
    LogsobScaled { lambda: f64 },
    /// `M log(∫|∇u|²/(πeM)) ≥ ∫u²log(u²/M)`
    LogsobWeissler,
    /// `∫|∇u|² ≥ −I[u²]/M + ½log(2e)M`
    KinVsInteraction,
    /// `λ²∫|∇u|² − M logλ ≥ −I[u²]/M + ½log(2e)M`
    KinVsInteractionScaled { lambda: f64 },
    /// `(M²/2)log(∫|∇u|²/M) ≥ −I[u²]`
    ScaleInvariant,
}

impl InequalityId {
    fn needs_wave(&self) -> bool {
        matches!(
            self,
            InequalityId::LogsobEuclidean
                | InequalityId::LogsobScaled { .. }
                | InequalityId::LogsobWeissler
                | InequalityId::KinVsInteraction
                | InequalityId::KinVsInteractionScaled { .. }
                | InequalityId::ScaleInvariant
        )
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InequalityId::LogHlsTau { tau } if !(tau >= 0.0) => {
                Err(Error::Parameter(format!("τ must be nonnegative, got {tau}")))
            }
            InequalityId::EntropyPotential { eta } if !(eta > 0.0) => {
                Err(Error::Parameter(format!("η must be positive, got {eta}")))
            }
            InequalityId::LogsobScaled { lambda } | InequalityId::KinVsInteractionScaled { lambda }
                if !(lambda > 0.0) =>
            {
                Err(Error::Parameter(format!("λ must be positive, got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InequalityId::LogHls => write!(f, "LOG_HLS"),
            InequalityId::LogHlsTau { tau } => write!(f, "LOG_HLS_TAU(τ={tau})"),
            InequalityId::PotentialVsInteraction => write!(f, "POTENTIAL_VS_INTERACTION"),
            InequalityId::EntropyPotential { eta } => write!(f, "ENTROPY_POTENTIAL(η={eta})"),
            InequalityId::FreeEnergyBound { a, b } => write!(f, "FREE_ENERGY_BOUND(a={a},b={b})"),
            InequalityId::LogsobEuclidean => write!(f, "LOGSOB_EUCLIDEAN"),
            InequalityId::LogsobScaled { lambda } => write!(f, "LOGSOB_SCALED(λ={lambda})"),
            InequalityId::LogsobWeissler => write!(f, "LOGSOB_WEISSLER"),
            InequalityId::KinVsInteraction => write!(f, "KIN_VS_INTERACTION"),
            InequalityId::KinVsInteractionScaled { lambda } => write!(f, "KIN_VS_INTERACTION_SCALED(λ={lambda})"),
            InequalityId::ScaleInvariant => write!(f, "SCALE_INVARIANT"),
        }
    }
}

/// What the inequality is evaluated on.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Radial(&'a RadialDensity),
    Planar(&'a PlanarDensity),
    Wave(&'a WaveFunction),
}

/// Result of one inequality check; `deficit = lhs − rhs ≥ 0` is the claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    pub id: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// false when the inequality is known to fail for these parameters;
    /// such reports always pass.
    pub claim: bool,
    pub mass: f64,
    pub grid: Option<GridSpec>,
}

impl DeficitReport {
    fn new(id: InequalityId, lhs: f64, rhs: f64, tolerance: f64, mass: f64, grid: Option<GridSpec>) -> Self {
        let deficit = lhs - rhs;
        DeficitReport { id, lhs, rhs, deficit, tolerance, pass: deficit >= -tolerance, claim: true, mass, grid }
    }

    fn no_claim(id: InequalityId, lhs: f64, mass: f64, grid: Option<GridSpec>) -> Self {
        DeficitReport {
            id,
            lhs,
            rhs: f64::NEG_INFINITY,
            deficit: f64::INFINITY,
            tolerance: 0.0,
            pass: true,
            claim: false,
            mass,
            grid,
        }
    }
}

struct DensityTerms {
    entropy: f64,
    potential_moment: f64,
    interaction: f64,
    grid: Option<GridSpec>,
}

fn density_terms(input: Input<'_>, m: f64) -> Result<DensityTerms> {
    match input {
        Input::Radial(rho) => {
            check_mass(rho.mass(), m)?;
            Ok(DensityTerms {
                entropy: entropy(rho, m)?,
                potential_moment: potential_moment(rho),
                interaction: interaction(rho),
                grid: Some(rho.grid().spec()),
            })
        }
        Input::Planar(rho) => {
            check_mass(rho.mass(), m)?;
            Ok(DensityTerms {
                entropy: entropy_planar(rho, m)?,
                potential_moment: potential_moment_planar(rho),
                interaction: interaction_planar_auto(rho),
                grid: None,
            })
        }
        Input::Wave(_) => Err(Error::Mismatch("this inequality takes a density, not a wave function".into())),
    }
}

fn check_mass(actual: f64, declared: f64) -> Result<()> {
    if !(declared > 0.0) {
        return Err(Error::Parameter(format!("mass must be positive, got {declared}")));
    }
    if (actual - declared).abs() > 1e-3 * declared {
        return Err(Error::Mismatch(format!("input has mass {actual}, expected {declared}")));
    }
    Ok(())
}

/// Evaluate one inequality with the default tolerance.
pub fn deficit(id: InequalityId, input: Input<'_>, mass: f64) -> Result<DeficitReport> {
    deficit_with_tolerance(id, input, mass, EQUALITY_TOLERANCE)
}

pub fn deficit_with_tolerance(id: InequalityId, input: Input<'_>, mass: f64, tol: f64) -> Result<DeficitReport> {
    id.validate()?;
    let m = mass;
    let lnpi = PI.ln();
    if id.needs_wave() {
        let u = match input {
            Input::Wave(u) => u,
            _ => return Err(Error::Mismatch(format!("{id} takes a wave function"))),
        };
        check_mass(u.mass(), m)?;
        let rho = u.density()?;
        let k = kinetic(u);
        let ent = entropy(&rho, m)?;
        let i = interaction(&rho);
        let grid = Some(u.grid().spec());
        let logsob_rhs = 0.5 * ent + 0.5 * (2.0 * PI * std::f64::consts::E.powi(2)).ln() * m;
        let kin_rhs = -i / m + 0.5 * (2.0 * std::f64::consts::E).ln() * m;
        let (lhs, rhs) = match id {
            InequalityId::LogsobEuclidean => (k, logsob_rhs),
            InequalityId::LogsobScaled { lambda } => (lambda * lambda * k - m * lambda.ln(), logsob_rhs),
            InequalityId::LogsobWeissler => (m * (k / (PI * std::f64::consts::E * m)).ln(), ent),
            InequalityId::KinVsInteraction => (k, kin_rhs),
            InequalityId::KinVsInteractionScaled { lambda } => (lambda * lambda * k - m * lambda.ln(), kin_rhs),
            InequalityId::ScaleInvariant => (m * m / 2.0 * (k / m).ln(), -i),
            _ => unreachable!(),
        };
        return Ok(DeficitReport::new(id, lhs, rhs, tol, m, grid));
    }
    let t = density_terms(input, m)?;
    let (lhs, rhs) = match id {
        InequalityId::LogHls => (t.entropy + 2.0 / m * t.interaction + m * (1.0 + lnpi), 0.0),
        InequalityId::LogHlsTau { tau } => (
            t.entropy + 2.0 * tau * t.potential_moment + m * (1.0 - tau + lnpi),
            2.0 / m * (tau - 1.0) * t.interaction,
        ),
        InequalityId::PotentialVsInteraction => (2.0 * t.potential_moment - m, 2.0 / m * t.interaction),
        InequalityId::EntropyPotential { eta } => {
            let lhs = t.entropy + eta * t.potential_moment;
            if eta <= 1.0 {
                return Ok(DeficitReport::no_claim(id, lhs, m, t.grid));
            }
            (lhs, m * ((eta - 1.0) / PI).ln())
        }
        InequalityId::FreeEnergyBound { a, b } => {
            let lhs = t.entropy + a * t.potential_moment - b / m * t.interaction;
            match classify_free_energy(a, b).constant {
                Some(c) => (lhs, c * m),
                None => return Ok(DeficitReport::no_claim(id, lhs, m, t.grid)),
            }
        }
        _ => unreachable!(),
    };
    Ok(DeficitReport::new(id, lhs, rhs, tol, m, t.grid))
}

/// Region of a phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Bounded,
    Unbounded,
    Unknown,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::Bounded => "bounded",
            Region::Unbounded => "unbounded",
            Region::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Classification of one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub region: Region,
    /// best known constant `C(a,b)` per unit mass (free energy only)
    pub constant: Option<f64>,
    /// whether `constant` is the exact infimum or only a lower bound
    pub sharp: bool,
    /// a test-function family along which the energy tends to `−∞`
    pub witness: Option<Witness>,
}

impl RegionLabel {
    fn plain(region: Region) -> Self {
        RegionLabel { region, constant: None, sharp: false, witness: None }
    }
}

fn near(x: f64, y: f64) -> bool {
    (x - y).abs() <= BOUNDARY_EPS
}
fn less(x: f64, y: f64) -> bool {
    x < y - BOUNDARY_EPS
}
fn less_eq(x: f64, y: f64) -> bool {
    x <= y + BOUNDARY_EPS
}

/// Lower bound for `inf F_{a,b}/M` obtained by combining the logarithmic HLS
/// inequality with the potential inequalities.
///
/// Returns the exact infimum where it is known; `None` outside the bounded region.
pub fn free_energy_constant(a: f64, b: f64) -> Option<(f64, bool)> {
    if let Some(c) = sharp_constant(a, b) {
        return Some((c, true));
    }
    let lnpi = PI.ln();
    if !(a > 0.0) || less(b, -2.0) {
        return None;
    }
    if near(b, -2.0) {
        Some((-(1.0 + lnpi), false))
    } else if b < 0.0 {
        let arg = (2.0 * a - 2.0 - b) / (PI * (b + 2.0));
        (arg > 0.0).then(|| ((1.0 + lnpi) * b / 2.0 + (b + 2.0) / 2.0 * arg.ln(), false))
    } else {
        let arg = (a - b - 1.0) / PI;
        (arg > 0.0).then(|| (b / 2.0 + arg.ln(), false))
    }
}

/// Bounded / Unbounded / Unknown for `F_{a,b}` (entropy weight 1).
pub fn classify_free_energy(a: f64, b: f64) -> RegionLabel {
    let bounded = (near(a, 0.0) && near(b, -2.0))
        || (a > BOUNDARY_EPS && less_eq(-2.0, b) && less(b, a - 1.0) && less_eq(b, 2.0 * a - 2.0));
    if bounded {
        let (constant, sharp) = match free_energy_constant(a, b) {
            Some((c, s)) => (Some(c), s),
            None => (None, false),
        };
        return RegionLabel { region: Region::Bounded, constant, sharp, witness: None };
    }
    let unbounded = less(a, 0.0)
        || less(b, -2.0)
        || b > (a - 1.0).min(2.0 * a - 2.0) + BOUNDARY_EPS
        || (near(a, 1.0) && near(b, 0.0));
    if unbounded {
        return RegionLabel { region: Region::Unbounded, witness: free_energy_witness(a, b, 1.0), ..RegionLabel::plain(Region::Unbounded) };
    }
    RegionLabel::plain(Region::Unknown)
}

/// Bounded / Unbounded / Unknown for the Schrödinger energy on `∥u∥₂² = M`.
pub fn classify_schrodinger(p: &SchrodingerParams) -> RegionLabel {
    let (al, ga) = (p.alpha, p.gamma);
    let mb = p.mass * p.beta;
    if less(al, 0.0) || (!less(al, 0.0) && mb > (2.0 * al - ga).min(4.0 * al - 2.0 * ga) + BOUNDARY_EPS) {
        return RegionLabel { witness: schrodinger_witness(p), ..RegionLabel::plain(Region::Unbounded) };
    }
    let bounded = if near(al, 0.0) {
        less_eq(p.beta, 0.0) && less_eq(mb + 2.0 * ga, 0.0)
    } else {
        (less_eq(ga, 0.0) && less_eq(mb, 2.0 * al))
            || (ga > BOUNDARY_EPS && less_eq(mb, 4.0 * al - 2.0 * ga) && less(mb, 2.0 * al - ga))
    };
    RegionLabel::plain(if bounded { Region::Bounded } else { Region::Unknown })
}

/// Inclusive arithmetic range `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Vec::new();
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| {
            let v = self.start + i as f64 * self.step;
            // strip accumulated rounding so boundary points land exactly
            (v * 1e12).round() / 1e12 + 0.0
        }).collect()
    }
}

impl std::str::FromStr for SweepRange {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parameter(format!("bad range `{s}`")));
        match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Ok(SweepRange { start: v, stop: v, step: 1.0 })
            }
            [a, b, c] => {
                let r = SweepRange { start: num(a)?, stop: num(b)?, step: num(c)? };
                if !(r.step > 0.0) {
                    return Err(Error::Parameter(format!("range step must be positive in `{s}`")));
                }
                Ok(r)
            }
            _ => Err(Error::Parameter(format!("range must be start:stop:step, got `{s}`"))),
        }
    }
}

/// One labelled cell of a phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    /// first coordinate: `a`, or `γ` for the Schrödinger diagram
    pub x: f64,
    /// second coordinate: `b`, or `Mβ` for the Schrödinger diagram
    pub y: f64,
    pub label: RegionLabel,
}

/// Which diagram to scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "which")]
pub enum Diagram {
    /// axes `(a, b)`
    FreeEnergy,
    /// axes `(γ, Mβ)` at fixed `α` and `M`
    Schrodinger { alpha: f64, mass: f64 },
}

/// Label every cell of `xs × ys`; rows follow `xs`, columns `ys`.
pub fn scan_phase_diagram(which: Diagram, xs: &SweepRange, ys: &SweepRange) -> Result<Vec<PhaseCell>> {
    let (xv, yv) = (xs.values(), ys.values());
    let pts: Vec<(f64, f64)> = xv.iter().flat_map(|&x| yv.iter().map(move |&y| (x, y))).collect();
    pts.par_iter()
        .map(|&(x, y)| {
            let label = match which {
                Diagram::FreeEnergy => classify_free_energy(x, y),
                Diagram::Schrodinger { alpha, mass } => {
                    let p = SchrodingerParams::new(alpha, y / mass, x, mass)?;
                    classify_schrodinger(&p)
                }
            };
            Ok(PhaseCell { x, y, label })
        })
        .collect()
}

/// CSV with columns `a,b,label,constant` (or `gamma,mbeta,label,constant`).
pub fn write_phase_csv(out: &mut dyn Write, which: Diagram, cells: &[PhaseCell], header: &str) -> std::io::Result<()> {
    if !header.is_empty() {
        writeln!(out, "# config: {header}")?;
    }
    match which {
        Diagram::FreeEnergy => writeln!(out, "a,b,label,constant,witness")?,
        Diagram::Schrodinger { .. } => writeln!(out, "gamma,mbeta,label,constant,witness")?,
    }
    for c in cells {
        let constant = c.label.constant.map(|v| format!("{v:.10}")).unwrap_or_default();
        let witness = c.label.witness.map(|w| w.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", c.x, c.y, c.label.region, constant, witness)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedforms::{ClosedForm, Family};
    use crate::grids::{make_radial_grid, Grading, RadialGrid};
    use proptest::prelude::*;

    fn grid() -> RadialGrid {
        make_radial_grid(2048, 100.0, Grading::Geometric).unwrap()
    }

    #[test]
    fn free_energy_examples() {
        let l = classify_free_energy(0.0, -2.0);
        assert_eq!(l.region, Region::Bounded);
        assert!((l.constant.unwrap() + 1.0 + PI.ln()).abs() < 1e-14);
        assert!(l.sharp);
        assert_eq!(classify_free_energy(1.0, 0.0).region, Region::Unbounded);
        assert_eq!(classify_free_energy(2.0, 1.0).region, Region::Unknown);
        let l = classify_free_energy(0.5, -1.0);
        assert_eq!(l.region, Region::Bounded);
        assert!((l.constant.unwrap() + 2.837_88).abs() < 1e-5);
    }

    #[test]
    fn schrodinger_examples() {
        let c = |a, b, g| classify_schrodinger(&SchrodingerParams::new(a, b, g, 1.0).unwrap()).region;
        assert_eq!(c(1.0, 0.0, -1.0), Region::Bounded);
        assert_eq!(c(1.0, 3.0, 0.5), Region::Unbounded);
        assert_eq!(c(1.0, 2.5, -1.0), Region::Unknown);
        assert_eq!(c(0.0, 1.0, 1.0), Region::Unbounded);
        assert_eq!(c(-0.1, 0.0, 0.0), Region::Unbounded);
    }

    #[test]
    fn empty_range_gives_empty_scan() {
        let r = SweepRange { start: 1.0, stop: 0.0, step: 0.1 };
        assert!(scan_phase_diagram(Diagram::FreeEnergy, &r, &r).unwrap().is_empty());
    }

    #[test]
    fn range_parsing() {
        let r: SweepRange = "-1:3:0.05".parse().unwrap();
        let v = r.values();
        assert_eq!(v.len(), 81);
        assert_eq!(v[20], 0.0);
        assert_eq!(v[40], 1.0);
        assert!("1:2".parse::<SweepRange>().is_err());
    }

    #[test]
    fn loghls_equality_at_rho_star() {
        let rho = ClosedForm::new(Family::RhoStar, 1.0).unwrap().density(&grid()).unwrap();
        let r = deficit(InequalityId::LogHls, Input::Radial(&rho), 1.0).unwrap();
        assert!(r.deficit.abs() < 1e-4, "{r:?}");
        let r = deficit(InequalityId::PotentialVsInteraction, Input::Radial(&rho), 1.0).unwrap();
        assert!(r.deficit.abs() < 1e-4);
    }

    #[test]
    fn entropy_potential_equality_and_no_claim() {
        let rho = ClosedForm::new(Family::RhoEta { eta: 3.0 }, 1.0).unwrap().density(&grid()).unwrap();
        let r = deficit(InequalityId::EntropyPotential { eta: 3.0 }, Input::Radial(&rho), 1.0).unwrap();
        assert!(r.deficit.abs() < 1e-4);
        let r = deficit(InequalityId::EntropyPotential { eta: 0.5 }, Input::Radial(&rho), 1.0).unwrap();
        assert!(!r.claim && r.pass);
    }

    #[test]
    fn wrong_input_kind_is_rejected() {
        let rho = ClosedForm::new(Family::RhoStar, 1.0).unwrap().density(&grid()).unwrap();
        assert!(matches!(deficit(InequalityId::ScaleInvariant, Input::Radial(&rho), 1.0), Err(Error::Mismatch(_))));
        let u = ClosedForm::new(Family::Gaussian, 1.0).unwrap().wave(&grid()).unwrap();
        assert!(matches!(deficit(InequalityId::LogHls, Input::Wave(&u), 1.0), Err(Error::Mismatch(_))));
    }

    #[test]
    fn gaussian_logsob_equalities() {
        let u = ClosedForm::new(Family::Gaussian, 1.0).unwrap().wave(&grid()).unwrap();
        for id in [InequalityId::LogsobEuclidean, InequalityId::LogsobWeissler, InequalityId::LogsobScaled { lambda: 1.0 }] {
            let r = deficit(id, Input::Wave(&u), 1.0).unwrap();
            assert!(r.deficit.abs() < 1e-4, "{id}: {}", r.deficit);
        }
    }

    #[test]
    fn lemma_bound_meets_sharp_line() {
        // on b = a − 2 the combined bound is attained by ρ_⋆
        for a in [0.5, 1.0, 1.7, 3.0] {
            let b = a - 2.0;
            let lnpi = PI.ln();
            let combined = if b < 0.0 {
                (1.0 + lnpi) * b / 2.0 + (b + 2.0) / 2.0 * ((2.0 * a - 2.0 - b) / (PI * (b + 2.0))).ln()
            } else {
                b / 2.0 + ((a - b - 1.0) / PI).ln()
            };
            assert!((combined - sharp_constant(a, b).unwrap()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn regions_partition_the_plane(a in -2.0f64..4.0, b in -4.0f64..4.0) {
            let l = classify_free_energy(a, b);
            if l.region == Region::Bounded {
                prop_assert!(l.constant.is_some());
                prop_assert!(l.witness.is_none());
            }
            if l.region == Region::Unbounded {
                prop_assert!(l.witness.is_some());
            }
        }

        #[test]
        fn schrodinger_unbounded_cells_have_witnesses(al in -1.0f64..3.0, b in -4.0f64..6.0, g in -3.0f64..3.0, m in 0.2f64..3.0) {
            let p = SchrodingerParams::new(al, b, g, m).unwrap();
            let l = classify_schrodinger(&p);
            prop_assert_eq!(l.region == Region::Unbounded, l.witness.is_some());
        }
    }
}
