//! Closed-form densities and the exact values of their integrals.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{Asymptote, PlanarDensity, PlanarGrid, RadialDensity, RadialGrid, WaveFunction};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Named profile families; each evaluates to a density of mass `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `M/(π(1+r²)²)`
    RhoStar,
    /// `M(η−1)/(π(1+r²)^η)`, `η > 1`
    RhoEta { eta: f64 },
    /// `M((1−a)/π)λ²/(r^{2a}(λ²+r^{2(1−a)})²)`, `0 ≤ a < 1`, `λ > 0`
    KMinimizer { a: f64, lambda: f64 },
    /// `M(2π)⁻¹e^{−r²/2}`
    Gaussian,
    /// `c·exp(−1/((r−1)(2−r)))` on `1 < r < 2`
    AnnulusBump,
    /// `c·exp(−1/(1−r²))` on `r < 1`
    UnitBallBump,
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::RhoEta { eta } if !(eta > 1.0) => {
                Err(Error::Parameter(format!("η must exceed 1 for ρ_η to have finite mass, got {eta}")))
            }
            Family::KMinimizer { a, lambda } if !(0.0..1.0).contains(&a) || !(lambda > 0.0) => Err(
                Error::Parameter(format!("k-minimizer needs 0 ≤ a < 1 and λ > 0, got a = {a}, λ = {lambda}")),
            ),
            _ => Ok(()),
        }
    }

    /// Unit-mass profile value at radius `r`. For the k-minimizer with `a > 0`
    /// the value at `r = 0` is `+∞` (integrable singularity).
    pub fn unit(&self, r: f64) -> f64 {
        match *self {
            Family::RhoStar => 1.0 / (PI * (1.0 + r * r).powi(2)),
            Family::RhoEta { eta } => (eta - 1.0) / (PI * (1.0 + r * r).powf(eta)),
            Family::KMinimizer { a, lambda } => {
                if a > 0.0 && r == 0.0 {
                    return f64::INFINITY;
                }
                let l2 = lambda * lambda;
                let s = r.powf(2.0 * (1.0 - a));
                (1.0 - a) / PI * l2 / (r.powf(2.0 * a) * (l2 + s).powi(2))
            }
            Family::Gaussian => (-0.5 * r * r).exp() / (2.0 * PI),
            Family::AnnulusBump => {
                if r > 1.0 && r < 2.0 {
                    annulus_norm() * (-1.0 / ((r - 1.0) * (2.0 - r))).exp()
                } else {
                    0.0
                }
            }
            Family::UnitBallBump => {
                if r < 1.0 {
                    ball_norm() * (-1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// `p` in `ρ ~ r^{-p}` near the origin, when singular.
    pub fn head_exponent(&self) -> Option<f64> {
        match *self {
            Family::KMinimizer { a, .. } if a > 0.0 => Some(2.0 * a),
            _ => None,
        }
    }

    /// `p` in `ρ ~ r^{-p}` at infinity, for algebraically decaying families.
    pub fn tail_exponent(&self) -> Option<f64> {
        match *self {
            Family::RhoStar => Some(4.0),
            Family::RhoEta { eta } => Some(2.0 * eta),
            Family::KMinimizer { a, .. } => Some(4.0 - 2.0 * a),
            _ => None,
        }
    }

    /// Radial interval outside which the profile vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Family::AnnulusBump => Some((1.0, 2.0)),
            Family::UnitBallBump => Some((0.0, 1.0)),
            _ => None,
        }
    }

    pub fn with_mass(self, mass: f64) -> Result<ClosedForm> {
        ClosedForm::new(self, mass)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::RhoStar => write!(f, "rho-star"),
            Family::RhoEta { eta } => write!(f, "rho-eta:eta={eta}"),
            Family::KMinimizer { a, lambda } => write!(f, "k-minimizer:a={a},lambda={lambda}"),
            Family::Gaussian => write!(f, "gaussian"),
            Family::AnnulusBump => write!(f, "annulus"),
            Family::UnitBallBump => write!(f, "unit-ball"),
        }
    }
}

/// Parse `name[:key=value,...]`, e.g. `rho-eta:eta=3` or `k-minimizer:a=0.5,lambda=1`.
impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let params = parse_params(rest)?;
        let get = |k: &str| {
            params.get(k).copied().ok_or_else(|| Error::Parameter(format!("`{name}` needs parameter `{k}`")))
        };
        let fam = match name {
            "rho-star" => Family::RhoStar,
            "rho-eta" | "rho-zeta" => Family::RhoEta { eta: get("eta").or_else(|_| get("zeta"))? },
            "k-minimizer" => Family::KMinimizer { a: get("a")?, lambda: params.get("lambda").copied().unwrap_or(1.0) },
            "gaussian" => Family::Gaussian,
            "annulus" => Family::AnnulusBump,
            "unit-ball" => Family::UnitBallBump,
            other => return Err(Error::Unknown(format!("density family `{other}`"))),
        };
        fam.validate()?;
        Ok(fam)
    }
}

/// Parse `k=v,k=v` into a map.
pub fn parse_params(s: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("expected key=value, got `{item}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Parameter(format!("`{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn bump_normalization(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    // The integrand is smooth with all derivatives vanishing at the ends, so
    // the trapezoid rule converges faster than any power.
    let n = 20_000;
    let h = (hi - lo) / n as f64;
    let s: f64 = (1..n).map(|i| {
        let r = lo + i as f64 * h;
        f(r) * r
    }).sum();
    1.0 / (2.0 * PI * s * h)
}

fn annulus_norm() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| bump_normalization(|r| (-1.0 / ((r - 1.0) * (2.0 - r))).exp(), 1.0, 2.0))
}

fn ball_norm() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| bump_normalization(|r| (-1.0 / (1.0 - r * r)).exp(), 0.0, 1.0))
}

/// A family together with its mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub family: Family,
    pub mass: f64,
}

impl ClosedForm {
    pub fn new(family: Family, mass: f64) -> Result<Self> {
        family.validate()?;
        if !(mass > 0.0) {
            return Err(Error::Parameter(format!("mass must be positive, got {mass}")));
        }
        Ok(ClosedForm { family, mass })
    }

    pub fn evaluate(&self, r: f64) -> f64 {
        self.mass * self.family.unit(r)
    }

    pub fn profile(&self) -> Profile {
        let fam = self.family;
        let m = self.mass;
        Profile {
            f: Arc::new(move |r| m * fam.unit(r)),
            mass: m,
            head: fam.head_exponent(),
            tail: fam.tail_exponent(),
            support: fam.support(),
        }
    }

    pub fn density(&self, grid: &RadialGrid) -> Result<RadialDensity> {
        self.profile().density(grid)
    }

    /// `u = √ρ`.
    pub fn wave(&self, grid: &RadialGrid) -> Result<WaveFunction> {
        self.profile().wave(grid)
    }
}

/// A radial profile built from closed forms by scaling and mixing.
#[derive(Clone)]
pub struct Profile {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    mass: f64,
    head: Option<f64>,
    tail: Option<f64>,
    support: Option<(f64, f64)>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile")
            .field("mass", &self.mass)
            .field("head", &self.head)
            .field("tail", &self.tail)
            .field("support", &self.support)
            .finish()
    }
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    pub fn tail_exponent(&self) -> Option<f64> {
        self.tail
    }

    pub fn head_exponent(&self) -> Option<f64> {
        self.head
    }

    /// `λ²f(λr)`; mass is unchanged.
    pub fn scaled(&self, lambda: f64) -> Profile {
        let f = self.f.clone();
        Profile {
            f: Arc::new(move |r| lambda * lambda * f(lambda * r)),
            mass: self.mass,
            head: self.head,
            tail: self.tail,
            support: self.support.map(|(lo, hi)| (lo / lambda, hi / lambda)),
        }
    }

    /// `k·f`.
    pub fn times(&self, k: f64) -> Profile {
        let f = self.f.clone();
        Profile { f: Arc::new(move |r| k * f(r)), mass: self.mass * k, ..self.clone() }
    }

    /// `f + g`.
    pub fn plus(&self, other: &Profile) -> Profile {
        let (f, g) = (self.f.clone(), other.f.clone());
        let head = match (self.head, other.head) {
            (Some(p), Some(q)) => Some(p.max(q)),
            (p, q) => p.or(q),
        };
        let tail = match (self.tail, other.tail) {
            (Some(p), Some(q)) => Some(p.min(q)),
            (p, q) => p.or(q),
        };
        let support = match (self.support, other.support) {
            (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
            _ => None,
        };
        Profile { f: Arc::new(move |r| f(r) + g(r)), mass: self.mass + other.mass, head, tail, support }
    }

    pub fn density(&self, grid: &RadialGrid) -> Result<RadialDensity> {
        let f = self.f.clone();
        RadialDensity::from_fn(grid, move |r| f(r), self.head, self.tail)
    }

    pub fn wave(&self, grid: &RadialGrid) -> Result<WaveFunction> {
        if self.head.is_some() {
            return Err(Error::Parameter("wave functions with a singular head are not supported".into()));
        }
        let f = self.f.clone();
        WaveFunction::from_fn(grid, move |r| f(r).sqrt(), self.tail.map(|p| p / 2.0))
    }

    /// Sample on a planar grid centred at `center`; the mass is renormalized.
    pub fn planar(&self, grid: &PlanarGrid, center: [f64; 2]) -> Result<PlanarDensity> {
        crate::grids::sample_planar(&|r| (self.f)(r), self.mass, center, grid, self.support.map(|s| s.1))
    }
}

/// Change of variables `τ(z) = |x|^{2a}ρ(x)` with `|z| = |x|^{1−a}`.
///
/// It maps the scale-invariant problem with weight `2a∫log|x|ρ` onto a plain
/// logarithmic HLS problem: `∫τ = (1−a)M`,
/// `∫ρlogρ + 2a∫log|x|ρ = (1−a)⁻¹∫τlogτ` and `I[ρ] = (1−a)⁻³I[τ]`.
pub fn radial_substitution(rho: &RadialDensity, a: f64) -> Result<RadialDensity> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Parameter(format!("substitution exponent a = {a} must lie in [0, 1)")));
    }
    if a == 0.0 {
        return Ok(rho.clone());
    }
    let e = 1.0 - a;
    let nodes: Vec<f64> = rho.grid().nodes().iter().map(|r| r.powf(e)).collect();
    let values: Vec<f64> = rho
        .grid()
        .nodes()
        .iter()
        .zip(rho.values())
        .map(|(&r, &v)| if r == 0.0 { if a > 0.0 { 0.0 } else { v } } else { r.powf(2.0 * a) * v })
        .collect();
    let grid = RadialGrid::from_nodes(nodes)?;
    let map = |t: &Asymptote| -> Asymptote {
        let p = (t.exponent() - 2.0 * a) / e;
        let t = t.clone();
        Asymptote::exact(p, move |z: f64| {
            let r = z.powf(1.0 / e);
            r.powf(2.0 * a) * t.eval(r)
        })
    };
    RadialDensity::with_extensions(&grid, values, rho.head().map(map), rho.tail().map(map))
}

/// Exact values of integrals of the closed-form families and of the known
/// sharp constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "quantity", rename_all = "snake_case")]
pub enum Identity {
    /// `∫ρ log(ρ/M)` for `Mρ_ζ`: `M[log((ζ−1)/π) − ζ/(ζ−1)]`
    RhoZetaEntropy { zeta: f64, mass: f64 },
    /// `∫log(1+|x|²)Mρ_ζ = M/(ζ−1)`
    RhoZetaPotentialMoment { zeta: f64, mass: f64 },
    /// `min J_η = M log((η−1)/π)`
    JMinimum { eta: f64, mass: f64 },
    /// `K(a) = −log(eπ/(1−a))`
    KConstant { a: f64 },
    /// `M(1 + log π)`
    LogHlsConstant { mass: f64 },
    /// best constant `C(a,b)` per unit mass where it is known exactly
    FreeEnergyConstant { a: f64, b: f64 },
    /// `I[Mρ_⋆] = M²/2`
    RhoStarInteraction { mass: f64 },
    /// `I[Mμ] = M²(log 2 − γ_E/2)`
    GaussianInteraction { mass: f64 },
    /// `∫ρ log(ρ/M) = −M(1 + log 2π)` for `Mμ`
    GaussianEntropy { mass: f64 },
}

impl Identity {
    /// Build from a textual id and named parameters.
    pub fn parse(id: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str| params.get(k).copied().ok_or_else(|| Error::Parameter(format!("`{id}` needs `{k}`")));
        let mass = params.get("M").copied().unwrap_or(1.0);
        Ok(match id {
            "entropy-rho-zeta" => Identity::RhoZetaEntropy { zeta: get("zeta")?, mass },
            "potential-moment-rho-zeta" => Identity::RhoZetaPotentialMoment { zeta: get("zeta")?, mass },
            "j-minimum" => Identity::JMinimum { eta: get("eta")?, mass },
            "k-constant" => Identity::KConstant { a: get("a")? },
            "loghls-constant" => Identity::LogHlsConstant { mass },
            "free-energy-constant" => Identity::FreeEnergyConstant { a: get("a")?, b: get("b")? },
            "rho-star-interaction" => Identity::RhoStarInteraction { mass },
            "gaussian-interaction" => Identity::GaussianInteraction { mass },
            "gaussian-entropy" => Identity::GaussianEntropy { mass },
            other => return Err(Error::Unknown(format!("analytic quantity `{other}`"))),
        })
    }
}

/// `K(a) = −log(eπ/(1−a))`, the infimum of `G_a` over unit-mass densities.
pub fn k_constant(a: f64) -> f64 {
    -(std::f64::consts::E * PI / (1.0 - a)).ln()
}

/// Exact infimum of `F_{a,b}/M` where it is known: the logarithmic HLS point
/// `(0,−2)`, the segment `b = 2a−2` with `0 ≤ a < 1`, and the half-line
/// `b = a−2 ≥ −2` on which `ρ_⋆` is optimal.
pub fn sharp_constant(a: f64, b: f64) -> Option<f64> {
    const EPS: f64 = 1e-12;
    if (0.0..1.0).contains(&a) && (b - (2.0 * a - 2.0)).abs() < EPS {
        Some(k_constant(a))
    } else if a >= 0.0 && (b - (a - 2.0)).abs() < EPS {
        Some(a / 2.0 - 1.0 - PI.ln())
    } else {
        None
    }
}

pub fn analytic_value(q: Identity) -> Result<f64> {
    let check_mass = |m: f64| {
        if m > 0.0 {
            Ok(m)
        } else {
            Err(Error::Parameter(format!("mass must be positive, got {m}")))
        }
    };
    let check_zeta = |z: f64| {
        if z > 1.0 {
            Ok(z)
        } else {
            Err(Error::Parameter(format!("ζ must exceed 1, got {z}")))
        }
    };
    Ok(match q {
        Identity::RhoZetaEntropy { zeta, mass } => {
            let (z, m) = (check_zeta(zeta)?, check_mass(mass)?);
            m * (((z - 1.0) / PI).ln() - z / (z - 1.0))
        }
        Identity::RhoZetaPotentialMoment { zeta, mass } => check_mass(mass)? / (check_zeta(zeta)? - 1.0),
        Identity::JMinimum { eta, mass } => check_mass(mass)? * ((check_zeta(eta)? - 1.0) / PI).ln(),
        Identity::KConstant { a } => {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::Parameter(format!("K(a) needs 0 ≤ a < 1, got {a}")));
            }
            k_constant(a)
        }
        Identity::LogHlsConstant { mass } => check_mass(mass)? * (1.0 + PI.ln()),
        Identity::FreeEnergyConstant { a, b } => sharp_constant(a, b)
            .ok_or_else(|| Error::Unknown(format!("no exact constant is known at (a, b) = ({a}, {b})")))?,
        Identity::RhoStarInteraction { mass } => check_mass(mass)?.powi(2) / 2.0,
        Identity::GaussianInteraction { mass } => {
            check_mass(mass)?.powi(2) * (std::f64::consts::LN_2 - EULER_GAMMA / 2.0)
        }
        Identity::GaussianEntropy { mass } => -check_mass(mass)? * (1.0 + (2.0 * PI).ln()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{make_radial_grid, Grading};
    use approx::assert_relative_eq;

    fn grid() -> RadialGrid {
        make_radial_grid(2048, 100.0, Grading::Geometric).unwrap()
    }

    #[test]
    fn rho_star_at_origin() {
        assert_relative_eq!(Family::RhoStar.unit(0.0), 1.0 / PI);
    }

    #[test]
    fn special_cases_coincide_with_rho_star() {
        for r in [0.0, 0.3, 1.0, 7.5, 80.0] {
            assert_relative_eq!(Family::RhoEta { eta: 2.0 }.unit(r), Family::RhoStar.unit(r), max_relative = 1e-14);
            let k = Family::KMinimizer { a: 0.0, lambda: 1.0 };
            assert_relative_eq!(k.unit(r), Family::RhoStar.unit(r), max_relative = 1e-14);
        }
    }

    #[test]
    fn k_minimizer_is_singular_at_origin() {
        assert!(Family::KMinimizer { a: 0.5, lambda: 1.0 }.unit(0.0).is_infinite());
    }

    #[test]
    fn masses() {
        let g = grid();
        let families = [
            Family::RhoStar,
            Family::RhoEta { eta: 1.5 },
            Family::RhoEta { eta: 5.0 },
            Family::KMinimizer { a: 0.5, lambda: 1.0 },
            Family::KMinimizer { a: 0.9, lambda: 2.0 },
            Family::Gaussian,
            Family::AnnulusBump,
            Family::UnitBallBump,
        ];
        for f in families {
            let rho = f.with_mass(2.5).unwrap().density(&g).unwrap();
            assert!((rho.mass() - 2.5).abs() < 1e-6 * 2.5, "{f}: {}", rho.mass());
        }
    }

    #[test]
    fn parameter_checks() {
        assert!(Family::RhoEta { eta: 1.0 }.validate().is_err());
        assert!(Family::KMinimizer { a: 1.0, lambda: 1.0 }.validate().is_err());
        assert!(Family::KMinimizer { a: 0.2, lambda: 0.0 }.validate().is_err());
        assert!("k-minimizer:a=0.5,lambda=1".parse::<Family>().is_ok());
        assert!(matches!("nothing".parse::<Family>(), Err(Error::Unknown(_))));
    }

    #[test]
    fn analytic_table() {
        assert_relative_eq!(
            analytic_value(Identity::KConstant { a: 0.75 }).unwrap(),
            -(4.0 * std::f64::consts::E * PI).ln(),
            max_relative = 1e-14
        );
        assert!((analytic_value(Identity::KConstant { a: 0.75 }).unwrap() + 3.531_02).abs() < 1e-5);
        let e = analytic_value(Identity::RhoZetaEntropy { zeta: 1.5, mass: 1.0 }).unwrap();
        assert!((e + 4.837_88).abs() < 1e-5);
        let c = analytic_value(Identity::FreeEnergyConstant { a: 0.0, b: -2.0 }).unwrap();
        assert_relative_eq!(c, -(1.0 + PI.ln()), max_relative = 1e-14);
        assert!(matches!(Identity::parse("bogus", &BTreeMap::new()), Err(Error::Unknown(_))));
    }

    #[test]
    fn substitution_of_rho_star_halves_mass() {
        let g = grid();
        let rho = ClosedForm::new(Family::RhoStar, 1.0).unwrap().density(&g).unwrap();
        let tau = radial_substitution(&rho, 0.5).unwrap();
        assert!((tau.mass() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn substitution_with_zero_exponent_is_identity() {
        let g = grid();
        let rho = ClosedForm::new(Family::Gaussian, 1.0).unwrap().density(&g).unwrap();
        let tau = radial_substitution(&rho, 0.0).unwrap();
        assert_eq!(tau.values(), rho.values());
        assert_eq!(tau.grid().nodes(), rho.grid().nodes());
    }

    #[test]
    fn substitution_maps_k_minimizer_to_rho_star() {
        let g = grid();
        let a = 0.6;
        let rho = ClosedForm::new(Family::KMinimizer { a, lambda: 1.0 }, 1.0).unwrap().density(&g).unwrap();
        let tau = radial_substitution(&rho, a).unwrap();
        for (&z, &t) in tau.grid().nodes().iter().zip(tau.values()).step_by(97) {
            let expect = (1.0 - a) / (PI * (1.0 + z * z).powi(2));
            assert_relative_eq!(t, expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn scaled_profile_keeps_mass() {
        let g = grid();
        let p = ClosedForm::new(Family::RhoStar, 1.0).unwrap().profile().scaled(8.0);
        assert!((p.density(&g).unwrap().mass() - 1.0).abs() < 1e-6);
    }
}
