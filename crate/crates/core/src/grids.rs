//! Radial and planar discretizations.
//!
//! Radial integrals are always written as `∫ f(r) r dr` and discretized with a
//! product rule: on every interval `f` is replaced by the quintic through six
//! neighbouring nodes, and that quintic times `r` is integrated exactly. The
//! rule is exact whenever `f` is a polynomial of degree five, so the disk area
//! comes out exact, and on a geometric grid the relative error is the same at every
//! scale, which keeps power-law singularities at the origin under control.
//!
//! Densities may carry analytic extensions below the first node (`head`) and
//! beyond `R_max` (`tail`). Functionals integrate over an extended node set in
//! which the extension supplies the values outside the grid.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest node of a geometric grid, relative to `R_max`.
pub const GEOMETRIC_SPAN: f64 = 1e-8;
/// Minimum node count accepted by [`make_radial_grid`].
pub const MIN_NODES: usize = 16;
/// Log-spacing used when extending a grid with an analytic head or tail.
const EXTENSION_LOG_STEP: f64 = 0.02;
/// The extension stops once the neglected mass fraction is below `e^{-30}`.
const EXTENSION_DEPTH: f64 = 30.0;
/// Extensions never go beyond `|ln r| = 300`.
const EXTENSION_LOG_CAP: f64 = 300.0;

/// Nodes per interpolation stencil; the local interpolant has degree `STENCIL - 1`.
const STENCIL: usize = 6;

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
];

fn lagrange(z: &[f64; STENCIL], k: usize, x: f64) -> f64 {
    let mut v = 1.0;
    for (j, &zj) in z.iter().enumerate() {
        if j != k {
            v *= (x - zj) / (z[k] - zj);
        }
    }
    v
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    start: usize,
    w: [f64; STENCIL],
}

/// Product quadrature for `∫ f(r) r dr` on an arbitrary increasing node set.
#[derive(Debug, Clone)]
pub(crate) struct Rule {
    nodes: Vec<f64>,
    cells: Vec<Cell>,
    /// weight of `f(x_0)` for the piece `[0, x_0]`
    head: f64,
    /// weight of `f(x_last)` for the piece `[x_last, ∞)`
    tail: f64,
}

impl Rule {
    /// `head_exponent` is `q` in `f ~ r^{-q}` on `[0, x_0]`; `None` drops that piece.
    pub(crate) fn new(nodes: Vec<f64>, head_exponent: Option<f64>, tail_exponent: Option<f64>) -> Self {
        let n = nodes.len();
        assert!(n >= STENCIL, "quadrature rule needs at least {STENCIL} nodes");
        let mut cells = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let start = i.saturating_sub(STENCIL / 2 - 1).min(n - STENCIL);
            let mut z = [0.0; STENCIL];
            z.copy_from_slice(&nodes[start..start + STENCIL]);
            let (a, b) = (nodes[i], nodes[i + 1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut w = [0.0; STENCIL];
            for &(x, gw) in &GAUSS4 {
                let r = mid + half * x;
                for (k, wk) in w.iter_mut().enumerate() {
                    *wk += gw * half * lagrange(&z, k, r) * r;
                }
            }
            cells.push(Cell { start, w });
        }
        let x0 = nodes[0];
        let head = match head_exponent {
            Some(q) if x0 > 0.0 => x0 * x0 / (2.0 - q),
            _ => 0.0,
        };
        let tail = tail_exponent.map_or(0.0, |p| {
            let x = nodes[n - 1];
            x * x / (p - 2.0)
        });
        Rule { nodes, cells, head, tail }
    }

    pub(crate) fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub(crate) fn len(&self) -> usize {
        self.nodes.len()
    }

    fn cell_integral(&self, i: usize, f: &[f64]) -> f64 {
        let c = &self.cells[i];
        c.w.iter().zip(&f[c.start..c.start + STENCIL]).map(|(w, v)| w * v).sum()
    }

    /// `∫_0^∞ f r dr` including head and tail pieces.
    pub(crate) fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.nodes.len());
        let mut s = self.head * f[0] + self.tail * f[f.len() - 1];
        for i in 0..self.cells.len() {
            s += self.cell_integral(i, f);
        }
        s
    }

    /// `C_k = ∫_0^{x_k} f r dr`.
    pub(crate) fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(f.len());
        let mut acc = self.head * f[0];
        out.push(acc);
        for i in 0..self.cells.len() {
            acc += self.cell_integral(i, f);
            out.push(acc);
        }
        out
    }

    pub(crate) fn weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let mut w = vec![0.0; n];
        w[0] += self.head;
        w[n - 1] += self.tail;
        for c in &self.cells {
            for k in 0..STENCIL {
                w[c.start + k] += c.w[k];
            }
        }
        w
    }
}

/// Node placement of a radial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grading {
    Uniform,
    Geometric,
    /// Arbitrary increasing nodes, e.g. the image of a grid under a power map.
    Custom,
}

impl std::str::FromStr for Grading {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Grading::Uniform),
            "geometric" => Ok(Grading::Geometric),
            other => Err(Error::Parameter(format!("unknown grading `{other}`"))),
        }
    }
}

/// Serializable description of a grid, embedded in reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
    pub grading: Grading,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 2048, r_max: 100.0, grading: Grading::Geometric }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<RadialGrid> {
        make_radial_grid(self.n, self.r_max, self.grading)
    }
}

#[derive(Debug)]
struct GridInner {
    grading: Grading,
    rule: Rule,
    weights: Vec<f64>,
    r_max: f64,
}

/// Radial grid on `[0, R_max]` with positive weights for `∫ f(r) r dr`.
///
/// Cloning is cheap; the node data is shared.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    inner: Arc<GridInner>,
}

/// Build a uniform or geometrically graded radial grid.
///
/// Geometric grids start at `R_max·1e-8`; the disk `[0, r_0]` is integrated by
/// constant extension of the first value.
pub fn make_radial_grid(n: usize, r_max: f64, grading: Grading) -> Result<RadialGrid> {
    if n < MIN_NODES {
        return Err(Error::Resolution(format!("{n} nodes, need at least {MIN_NODES}")));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::Resolution(format!("R_max = {r_max} must be positive")));
    }
    let nodes: Vec<f64> = match grading {
        Grading::Uniform => (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect(),
        Grading::Geometric => {
            let r0 = r_max * GEOMETRIC_SPAN;
            let step = (r_max / r0).ln() / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| r0 * (step * i as f64).exp()).collect();
            v[n - 1] = r_max;
            v
        }
        Grading::Custom => {
            return Err(Error::Parameter("custom grids are built with RadialGrid::from_nodes".into()))
        }
    };
    Ok(RadialGrid::from_parts(nodes, grading))
}

impl RadialGrid {
    /// Grid on arbitrary strictly increasing nonnegative nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::Resolution(format!("{} nodes, need at least {MIN_NODES}", nodes.len())));
        }
        if nodes[0] < 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("grid nodes must be finite, nonnegative and strictly increasing".into()));
        }
        Ok(RadialGrid::from_parts(nodes, Grading::Custom))
    }

    fn from_parts(nodes: Vec<f64>, grading: Grading) -> Self {
        let r_max = *nodes.last().unwrap();
        let rule = Rule::new(nodes, Some(0.0), None);
        let weights = rule.weights();
        RadialGrid { inner: Arc::new(GridInner { grading, rule, weights, r_max }) }
    }

    pub fn nodes(&self) -> &[f64] {
        self.inner.rule.nodes()
    }

    /// Quadrature weights `w_i` with `Σ w_i f_i ≈ ∫_0^{R_max} f(r) r dr`.
    pub fn weights(&self) -> &[f64] {
        &self.inner.weights
    }

    pub fn r_max(&self) -> f64 {
        self.inner.r_max
    }

    pub fn len(&self) -> usize {
        self.inner.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grading(&self) -> Grading {
        self.inner.grading
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.len(), r_max: self.r_max(), grading: self.grading() }
    }

    pub(crate) fn rule(&self) -> &Rule {
        &self.inner.rule
    }

    /// `2π Σ w_i f_i`, the planar integral of a radial function over the disk.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        2.0 * PI * self.inner.rule.integrate(f)
    }

    /// Log-spacing used for analytic extensions of this grid.
    fn extension_step(&self) -> f64 {
        let n = self.nodes();
        let last = n.len() - 1;
        let main = (n[last] / n[last - 1]).ln();
        main.min(EXTENSION_LOG_STEP)
    }

    pub(crate) fn is_same(&self, other: &RadialGrid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }
}

/// Closed-form behaviour of a profile outside the grid.
///
/// `exponent` is `p` in `f(r) ~ c·r^{-p}`: `p > 2` for a tail, `p < 2` for a
/// head at the origin.
#[derive(Clone)]
pub enum Asymptote {
    Power { coefficient: f64, exponent: f64 },
    Exact { exponent: f64, profile: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl fmt::Debug for Asymptote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Asymptote::Power { coefficient, exponent } => {
                write!(f, "Power {{ coefficient: {coefficient}, exponent: {exponent} }}")
            }
            Asymptote::Exact { exponent, .. } => write!(f, "Exact {{ exponent: {exponent} }}"),
        }
    }
}

impl Asymptote {
    pub fn power(coefficient: f64, exponent: f64) -> Self {
        Asymptote::Power { coefficient, exponent }
    }

    pub fn exact(exponent: f64, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Asymptote::Exact { exponent, profile: Arc::new(profile) }
    }

    pub fn exponent(&self) -> f64 {
        match self {
            Asymptote::Power { exponent, .. } | Asymptote::Exact { exponent, .. } => *exponent,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Asymptote::Power { coefficient, exponent } => coefficient * r.powf(-exponent),
            Asymptote::Exact { profile, .. } => profile(r),
        }
    }

    /// Pointwise square, used to pass from a wave function to its density.
    pub fn squared(&self) -> Asymptote {
        match self {
            Asymptote::Power { coefficient, exponent } => {
                Asymptote::Power { coefficient: coefficient * coefficient, exponent: 2.0 * exponent }
            }
            Asymptote::Exact { exponent, profile } => {
                let p = profile.clone();
                Asymptote::Exact { exponent: 2.0 * exponent, profile: Arc::new(move |r| p(r).powi(2)) }
            }
        }
    }

    /// `∫_R^∞ f r dr` of the tail model.
    fn tail_integral(&self, r_max: f64, step: f64) -> f64 {
        match self {
            Asymptote::Power { coefficient, exponent } => {
                coefficient * r_max.powf(2.0 - exponent) / (exponent - 2.0)
            }
            Asymptote::Exact { exponent, profile } => {
                let nodes = tail_nodes(r_max, *exponent, step, true);
                let vals: Vec<f64> = nodes.iter().map(|&r| profile(r)).collect();
                let rule = Rule::new(nodes, None, Some(*exponent));
                rule.integrate(&vals)
            }
        }
    }
}

fn tail_nodes(r_max: f64, p: f64, step: f64, include_start: bool) -> Vec<f64> {
    let depth = (EXTENSION_DEPTH / (p - 2.0)).min(EXTENSION_LOG_CAP - r_max.ln()).max(4.0 * step);
    let k_max = (depth / step).ceil() as usize;
    let first = if include_start { 0 } else { 1 };
    (first..=k_max.max(4)).map(|k| r_max * (step * k as f64).exp()).collect()
}

fn head_nodes(r0: f64, q: f64, step: f64) -> Vec<f64> {
    let depth = (EXTENSION_DEPTH / (2.0 - q)).min(EXTENSION_LOG_CAP + r0.ln()).max(4.0 * step);
    let k_max = (depth / step).ceil() as usize;
    (1..=k_max).rev().map(|k| r0 * (-step * k as f64).exp()).collect()
}

fn check_values(values: &[f64]) -> Result<()> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// `2π ∫_0^∞ f(r) r dr` for values on the grid plus the integral of the tail model.
pub fn integrate_radial(grid: &RadialGrid, f: &[f64], tail: Option<&Asymptote>) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(Error::Mismatch(format!("{} values on a grid of {} nodes", f.len(), grid.len())));
    }
    check_values(f)?;
    let mut s = grid.rule().integrate(f);
    if let Some(t) = tail {
        if !(t.exponent() > 2.0) {
            return Err(Error::Parameter(format!("tail exponent {} must exceed 2", t.exponent())));
        }
        s += t.tail_integral(grid.r_max(), grid.extension_step());
    }
    Ok(2.0 * PI * s)
}

/// Values of a radial profile on an extended node set.
#[derive(Debug, Clone)]
pub(crate) struct Samples {
    pub rule: Rule,
    pub values: Vec<f64>,
}

impl Samples {
    pub(crate) fn r(&self) -> &[f64] {
        self.rule.nodes()
    }

    /// `2π ∫ h(r, ρ(r)) r dr`.
    pub(crate) fn integrate_with(&self, h: impl Fn(f64, f64) -> f64) -> f64 {
        let g: Vec<f64> = self.r().iter().zip(&self.values).map(|(&r, &v)| h(r, v)).collect();
        2.0 * PI * self.rule.integrate(&g)
    }
}

/// Extended node set around `grid` with values from the extensions.
pub(crate) fn extend(
    grid: &RadialGrid,
    values: &[f64],
    head: Option<&Asymptote>,
    tail: Option<&Asymptote>,
) -> Samples {
    let step = grid.extension_step();
    let main = grid.nodes();
    let mut nodes = Vec::new();
    let mut vals = Vec::new();
    let mut head_q = Some(0.0);
    if let Some(h) = head {
        if main[0] > 0.0 {
            head_q = Some(h.exponent());
            for r in head_nodes(main[0], h.exponent(), step) {
                nodes.push(r);
                vals.push(h.eval(r));
            }
        }
    }
    nodes.extend_from_slice(main);
    vals.extend_from_slice(values);
    let mut tail_p = None;
    if let Some(t) = tail {
        tail_p = Some(t.exponent());
        for r in tail_nodes(grid.r_max(), t.exponent(), step, false) {
            nodes.push(r);
            vals.push(t.eval(r));
        }
    }
    Samples { rule: Rule::new(nodes, head_q, tail_p), values: vals }
}

/// Nonnegative radial density on a radial grid.
#[derive(Debug, Clone)]
pub struct RadialDensity {
    grid: RadialGrid,
    values: Vec<f64>,
    mass: f64,
    head: Option<Asymptote>,
    tail: Option<Asymptote>,
}

impl RadialDensity {
    pub fn new(grid: &RadialGrid, values: Vec<f64>, tail: Option<Asymptote>) -> Result<Self> {
        Self::with_extensions(grid, values, None, tail)
    }

    pub fn with_extensions(
        grid: &RadialGrid,
        values: Vec<f64>,
        head: Option<Asymptote>,
        tail: Option<Asymptote>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!("{} values on a grid of {} nodes", values.len(), grid.len())));
        }
        check_values(&values)?;
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::Parameter("density values must be nonnegative".into()));
        }
        if let Some(t) = &tail {
            if !(t.exponent() > 2.0) {
                return Err(Error::Parameter(format!("tail exponent {} must exceed 2", t.exponent())));
            }
        }
        if let Some(h) = &head {
            if !(h.exponent() < 2.0) {
                return Err(Error::Parameter(format!("head exponent {} must be below 2", h.exponent())));
            }
        }
        let mut d = RadialDensity { grid: grid.clone(), values, mass: 0.0, head, tail };
        d.mass = d.samples().integrate_with(|_, v| v);
        if !(d.mass > 0.0) {
            return Err(Error::Parameter("density has no mass".into()));
        }
        Ok(d)
    }

    /// Sample a closed-form profile; the profile itself supplies the extensions.
    pub fn from_fn(
        grid: &RadialGrid,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        head_exponent: Option<f64>,
        tail_exponent: Option<f64>,
    ) -> Result<Self> {
        let profile: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(profile);
        let values = grid.nodes().iter().map(|&r| profile(r)).collect();
        let head = head_exponent.map(|q| Asymptote::Exact { exponent: q, profile: profile.clone() });
        let tail = tail_exponent.map(|p| Asymptote::Exact { exponent: p, profile: profile.clone() });
        Self::with_extensions(grid, values, head, tail)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn tail(&self) -> Option<&Asymptote> {
        self.tail.as_ref()
    }

    pub fn head(&self) -> Option<&Asymptote> {
        self.head.as_ref()
    }

    /// Evaluate at `r`, using the extensions outside the grid and linear
    /// interpolation inside.
    pub fn at(&self, r: f64) -> f64 {
        let n = self.grid.nodes();
        if r <= n[0] {
            return self.head.as_ref().map_or(self.values[0], |h| if r > 0.0 { h.eval(r) } else { h.eval(n[0]) });
        }
        if r >= self.grid.r_max() {
            return self.tail.as_ref().map_or(0.0, |t| t.eval(r));
        }
        let i = n.partition_point(|&x| x <= r) - 1;
        let t = (r - n[i]) / (n[i + 1] - n[i]);
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    pub(crate) fn samples(&self) -> Samples {
        extend(&self.grid, &self.values, self.head.as_ref(), self.tail.as_ref())
    }

    /// Mass that lies beyond `R_max` according to the tail model (0 without one).
    pub fn tail_mass(&self) -> f64 {
        self.tail.as_ref().map_or(0.0, |t| 2.0 * PI * t.tail_integral(self.grid.r_max(), self.grid.extension_step()))
    }

    /// Multiply by a positive constant.
    pub fn scaled_by(&self, k: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Parameter("scale factor must be positive".into()));
        }
        let scale = |a: &Asymptote| match a {
            Asymptote::Power { coefficient, exponent } => {
                Asymptote::Power { coefficient: coefficient * k, exponent: *exponent }
            }
            Asymptote::Exact { exponent, profile } => {
                let p = profile.clone();
                Asymptote::Exact { exponent: *exponent, profile: Arc::new(move |r| k * p(r)) }
            }
        };
        Ok(RadialDensity {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
            mass: self.mass * k,
            head: self.head.as_ref().map(scale),
            tail: self.tail.as_ref().map(scale),
        })
    }
}

/// Real radial wave function `u`; its density is `u²`.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: RadialGrid,
    values: Vec<f64>,
    mass: f64,
    tail: Option<Asymptote>,
}

impl WaveFunction {
    pub fn new(grid: &RadialGrid, values: Vec<f64>) -> Result<Self> {
        Self::with_tail(grid, values, None)
    }

    /// `tail` describes `u` itself beyond `R_max` (exponent `p/2` for a density tail `p`).
    pub fn with_tail(grid: &RadialGrid, values: Vec<f64>, tail: Option<Asymptote>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!("{} values on a grid of {} nodes", values.len(), grid.len())));
        }
        check_values(&values)?;
        if let Some(t) = &tail {
            if !(t.exponent() > 1.0) {
                return Err(Error::Parameter(format!("wave tail exponent {} must exceed 1", t.exponent())));
            }
        }
        let mut u = WaveFunction { grid: grid.clone(), values, mass: 0.0, tail };
        u.mass = u.density_samples().integrate_with(|_, v| v);
        if !(u.mass > 0.0) {
            return Err(Error::Parameter("wave function vanishes".into()));
        }
        Ok(u)
    }

    pub fn from_fn(
        grid: &RadialGrid,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tail_exponent: Option<f64>,
    ) -> Result<Self> {
        let profile: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(profile);
        let values = grid.nodes().iter().map(|&r| profile(r)).collect();
        let tail = tail_exponent.map(|p| Asymptote::Exact { exponent: p, profile: profile.clone() });
        Self::with_tail(grid, values, tail)
    }

    /// `u = √ρ`.
    pub fn from_density(rho: &RadialDensity) -> Result<Self> {
        let values = rho.values().iter().map(|v| v.sqrt()).collect();
        let tail = rho.tail().map(|t| match t {
            Asymptote::Power { coefficient, exponent } => {
                Asymptote::Power { coefficient: coefficient.sqrt(), exponent: exponent / 2.0 }
            }
            Asymptote::Exact { exponent, profile } => {
                let p = profile.clone();
                Asymptote::Exact { exponent: exponent / 2.0, profile: Arc::new(move |r| p(r).sqrt()) }
            }
        });
        Self::with_tail(rho.grid(), values, tail)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn tail(&self) -> Option<&Asymptote> {
        self.tail.as_ref()
    }

    fn density_samples(&self) -> Samples {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        let t = self.tail.as_ref().map(Asymptote::squared);
        extend(&self.grid, &sq, None, t.as_ref())
    }

    /// The density `|u|²`, carrying the squared tail.
    pub fn density(&self) -> Result<RadialDensity> {
        let sq = self.values.iter().map(|v| v * v).collect();
        RadialDensity::new(&self.grid, sq, self.tail.as_ref().map(Asymptote::squared))
    }

    /// Rescale to `∥u∥₂² = m`.
    pub fn normalized(&self, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::Parameter("mass must be positive".into()));
        }
        let k = (m / self.mass).sqrt();
        let tail = self.tail.as_ref().map(|t| match t {
            Asymptote::Power { coefficient, exponent } => {
                Asymptote::Power { coefficient: coefficient * k, exponent: *exponent }
            }
            Asymptote::Exact { exponent, profile } => {
                let p = profile.clone();
                Asymptote::Exact { exponent: *exponent, profile: Arc::new(move |r| k * p(r)) }
            }
        });
        Ok(WaveFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
            mass: m,
            tail,
        })
    }
}

/// Square grid of cell centres `(-L + (j+½)h)`, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarGrid {
    h: f64,
    half_width: f64,
    n: usize,
}

impl PlanarGrid {
    pub fn new(h: f64, half_width: f64) -> Result<Self> {
        if !(h > 0.0) || !(half_width > 0.0) {
            return Err(Error::Resolution("planar spacing and half-width must be positive".into()));
        }
        let cells = 2.0 * half_width / h;
        let n = cells.round() as usize;
        if n == 0 || (cells - n as f64).abs() > 1e-6 * cells.max(1.0) {
            return Err(Error::Resolution(format!("2L/h = {cells} is not an integer")));
        }
        Ok(PlanarGrid { h, half_width, n })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn center(&self, j: usize) -> f64 {
        -self.half_width + (j as f64 + 0.5) * self.h
    }
}

/// Nonnegative values on a [`PlanarGrid`], row-major with index `j·n + k` for `(x_j, y_k)`.
#[derive(Debug, Clone)]
pub struct PlanarDensity {
    grid: PlanarGrid,
    values: Vec<f64>,
    mass: f64,
}

impl PlanarDensity {
    pub fn new(grid: PlanarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Mismatch(format!("{} values for {} cells", values.len(), grid.cells())));
        }
        check_values(&values)?;
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::Parameter("density values must be nonnegative".into()));
        }
        let mass = grid.h * grid.h * values.iter().sum::<f64>();
        if !(mass > 0.0) {
            return Err(Error::Parameter("density has no mass".into()));
        }
        Ok(PlanarDensity { grid, values, mass })
    }

    pub fn grid(&self) -> &PlanarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Cell masses `h²ρ`.
    pub fn cell_masses(&self) -> Vec<f64> {
        let a = self.grid.h * self.grid.h;
        self.values.iter().map(|v| v * a).collect()
    }

    /// Sum of two densities on the same grid.
    pub fn add(&self, other: &PlanarDensity) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("planar densities live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        PlanarDensity::new(self.grid, values)
    }
}

/// Sample a radial profile centred at `center` on the cell centres and
/// renormalize to `mass`.
///
/// `support` is the radius outside which the profile vanishes; when given, the
/// shifted support must lie inside the grid.
pub fn sample_planar(
    profile: &dyn Fn(f64) -> f64,
    mass: f64,
    center: [f64; 2],
    grid: &PlanarGrid,
    support: Option<f64>,
) -> Result<PlanarDensity> {
    if !(mass > 0.0) {
        return Err(Error::Parameter("mass must be positive".into()));
    }
    if let Some(s) = support {
        let reach = center[0].abs().max(center[1].abs()) + s;
        if reach > grid.half_width() {
            return Err(Error::Support(format!(
                "profile of radius {s} at ({}, {}) reaches {reach}, grid half-width is {}",
                center[0],
                center[1],
                grid.half_width()
            )));
        }
    }
    let n = grid.n();
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        let x = grid.center(j) - center[0];
        for k in 0..n {
            let y = grid.center(k) - center[1];
            values.push(profile((x * x + y * y).sqrt()));
        }
    }
    let raw = grid.h() * grid.h() * values.iter().sum::<f64>();
    if !(raw > 0.0) {
        return Err(Error::Support("profile does not reach any cell centre".into()));
    }
    let k = mass / raw;
    values.iter_mut().for_each(|v| *v *= k);
    PlanarDensity::new(*grid, values)
}
