//! Randomized invariants across modules.

use loglab::closedforms::{analytic_value, radial_substitution, ClosedForm, Family, Identity, Profile};
use loglab::divergence::{run_witness, Functional, Witness};
use loglab::functionals::{
    entropy, interaction, kinetic, log_moment, potential_moment, FreeEnergyParams, SchrodingerParams,
};
use loglab::groundstate::{minimize, MinimizeOptions};
use loglab::grids::{integrate_radial, GridSpec, Grading, RadialGrid, WaveFunction};
use loglab::inequalities::{
    classify_free_energy, classify_schrodinger, deficit, deficit_with_tolerance, InequalityId, Input, Region,
};
use proptest::prelude::*;
use std::sync::OnceLock;

fn grid() -> RadialGrid {
    static G: OnceLock<RadialGrid> = OnceLock::new();
    G.get_or_init(|| GridSpec::default().build().unwrap()).clone()
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::RhoStar),
        (1.3f64..5.0).prop_map(|eta| Family::RhoEta { eta }),
        Just(Family::Gaussian),
        Just(Family::AnnulusBump),
    ]
}

/// Sums of one to three scaled closed forms.
fn mixture() -> impl Strategy<Value = Profile> {
    prop::collection::vec((family(), 0.2f64..2.0, 0.4f64..2.5), 1..=3).prop_map(|parts| {
        parts
            .into_iter()
            .map(|(f, m, l)| ClosedForm::new(f, m).unwrap().profile().scaled(l))
            .reduce(|a, b| a.plus(&b))
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn integration_is_linear(
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        k in 0.1f64..3.0,
    ) {
        let g = grid();
        let f: Vec<f64> = g.nodes().iter().map(|r| (-k * r * r).exp()).collect();
        let h: Vec<f64> = g.nodes().iter().map(|r| 1.0 / (1.0 + r * r).powi(3)).collect();
        let mix: Vec<f64> = f.iter().zip(&h).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = integrate_radial(&g, &mix, None).unwrap();
        let rhs = alpha * integrate_radial(&g, &f, None).unwrap() + beta * integrate_radial(&g, &h, None).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (alpha.abs() + beta.abs()).max(1.0));
    }

    #[test]
    fn scaling_covariances(f in family(), m in 0.3f64..3.0, lambda in 0.1f64..10.0) {
        let g = grid();
        let base = ClosedForm::new(f, m).unwrap().profile();
        let shrunk = RadialGrid::from_nodes(g.nodes().iter().map(|r| r / lambda).collect()).unwrap();
        let rho = base.density(&g).unwrap();
        let rl = base.scaled(lambda).density(&shrunk).unwrap();
        let mass = rho.mass();
        let ll = lambda.ln();
        let e = entropy(&rl, m).unwrap() - entropy(&rho, m).unwrap() - 2.0 * mass * ll;
        prop_assert!(e.abs() < 1e-10 * (1.0 + ll.abs()) * mass, "entropy shift off by {e}");
        let i = interaction(&rl) - interaction(&rho) + mass * mass * ll;
        prop_assert!(i.abs() < 1e-7 * (1.0 + ll.abs()) * mass * mass, "interaction shift off by {i}");
        let u = WaveFunction::from_density(&rho).unwrap();
        let ul = WaveFunction::from_density(&rl).unwrap();
        let k = kinetic(&ul) / (lambda * lambda * kinetic(&u)) - 1.0;
        prop_assert!(k.abs() < 1e-10, "kinetic ratio off by {k}");
    }

    #[test]
    fn interaction_is_below_mass_times_potential_moment(p in mixture()) {
        let rho = p.density(&grid()).unwrap();
        prop_assert!(interaction(&rho) <= rho.mass() * potential_moment(&rho) + 1e-9);
    }

    #[test]
    fn tau_deficit_is_a_convex_combination(p in mixture(), tau in 0.0f64..1.0) {
        let rho = p.density(&grid()).unwrap();
        let m = rho.mass();
        let d = |t: f64| deficit(InequalityId::LogHlsTau { tau: t }, Input::Radial(&rho), m).unwrap().deficit;
        let combo = (1.0 - tau) * d(0.0) + tau * d(1.0);
        prop_assert!((d(tau) - combo).abs() < 1e-11 * (1.0 + m * m), "{} vs {combo}", d(tau));
    }

    #[test]
    fn free_energy_bound_holds_on_the_corpus(
        p in mixture(),
        a in 0.05f64..3.0,
        t in 0.0f64..1.0,
    ) {
        let top = (a - 1.0).min(2.0 * a - 2.0);
        let b = -2.0 + t * (top - (-2.0)) * 0.999;
        prop_assume!(classify_free_energy(a, b).region == Region::Bounded);
        let rho = p.density(&grid()).unwrap();
        let m = rho.mass();
        let r = deficit_with_tolerance(InequalityId::FreeEnergyBound { a, b }, Input::Radial(&rho), m, 1e-4 * m.max(1.0).powi(2)).unwrap();
        prop_assert!(r.pass, "deficit {} at (a, b) = ({a}, {b})", r.deficit);
    }

    #[test]
    fn scale_invariant_deficit_ignores_dilations(f in prop_oneof![Just(Family::Gaussian), Just(Family::RhoStar), Just(Family::AnnulusBump)], lambda in 0.2f64..5.0) {
        let g = grid();
        let base = ClosedForm::new(f, 1.0).unwrap().profile();
        let shrunk = RadialGrid::from_nodes(g.nodes().iter().map(|r| r / lambda).collect()).unwrap();
        let u = base.wave(&g).unwrap();
        let ul = base.scaled(lambda).wave(&shrunk).unwrap();
        let d = deficit(InequalityId::ScaleInvariant, Input::Wave(&u), u.mass()).unwrap().deficit;
        let dl = deficit(InequalityId::ScaleInvariant, Input::Wave(&ul), ul.mass()).unwrap().deficit;
        prop_assert!((d - dl).abs() < 1e-7, "{d} vs {dl}");
    }

    #[test]
    fn closed_forms_match_analytic_values(zeta in 1.2f64..8.0, m in 0.2f64..5.0) {
        let rho = ClosedForm::new(Family::RhoEta { eta: zeta }, m).unwrap().density(&grid()).unwrap();
        let e = analytic_value(Identity::RhoZetaEntropy { zeta, mass: m }).unwrap();
        let pm = analytic_value(Identity::RhoZetaPotentialMoment { zeta, mass: m }).unwrap();
        prop_assert!((entropy(&rho, m).unwrap() - e).abs() <= 1e-4 * e.abs().max(1.0));
        prop_assert!((potential_moment(&rho) - pm).abs() <= 1e-4 * pm.abs());
        prop_assert!((rho.mass() - m).abs() <= 1e-8 * m);
    }

    #[test]
    fn substitution_identities(a in 0.0f64..0.8, f in prop_oneof![Just(Family::Gaussian), Just(Family::RhoStar)], m in 0.5f64..2.0) {
        let rho = ClosedForm::new(f, m).unwrap().density(&grid()).unwrap();
        let tau = radial_substitution(&rho, a).unwrap();
        let e = 1.0 - a;
        prop_assert!((tau.mass() - e * rho.mass()).abs() < 1e-3 * rho.mass());
        let lhs = entropy(&rho, 1.0).unwrap() + a * log_moment(&rho).unwrap();
        let rhs = entropy(&tau, 1.0).unwrap() / e;
        prop_assert!((lhs - rhs).abs() < 1e-3 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        let (il, ir) = (interaction(&rho), interaction(&tau) / e.powi(3));
        prop_assert!((il - ir).abs() < 1e-3 * il.abs().max(1.0), "{il} vs {ir}");
    }
}

fn free_energy_unbounded() -> impl Strategy<Value = (f64, f64)> {
    ((-1.0f64..3.0), (-3.0f64..3.0))
        .prop_map(|(a, b)| ((a * 20.0).round() / 20.0 + 0.0, (b * 20.0).round() / 20.0 + 0.0))
        .prop_filter("unbounded cells only", |&(a, b)| classify_free_energy(a, b).region == Region::Unbounded)
}

fn schrodinger_unbounded() -> impl Strategy<Value = SchrodingerParams> {
    (prop_oneof![Just(0.0), Just(1.0), -1.0f64..2.0], -2.0f64..3.0, -3.0f64..4.0)
        .prop_map(|(al, ga, mb)| SchrodingerParams::new(al, mb, ga, 1.0).unwrap())
        .prop_filter("unbounded cells only", |p| classify_schrodinger(p).region == Region::Unbounded)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_unbounded_free_energy_cell_has_a_diverging_witness((a, b) in free_energy_unbounded()) {
        let label = classify_free_energy(a, b);
        let w = label.witness.expect("unbounded cells name a witness");
        let est = run_witness(w, &Functional::FreeEnergy(FreeEnergyParams::new(a, b, 1.0).unwrap())).unwrap();
        prop_assert!(est.rate < 0.0, "{w} at ({a}, {b}) has rate {}", est.rate);
    }

    #[test]
    fn every_unbounded_schrodinger_cell_has_a_diverging_witness(p in schrodinger_unbounded()) {
        let w = classify_schrodinger(&p).witness.expect("unbounded cells name a witness");
        let est = run_witness(w, &Functional::Schrodinger(p)).unwrap();
        prop_assert!(est.rate < 0.0, "{w} at {p:?} has rate {}", est.rate);
    }

    /// No generic family drives a bounded free energy down.
    #[test]
    fn bounded_cells_resist_every_family(a in 0.2f64..3.0, t in 0.05f64..0.95) {
        let top = (a - 1.0).min(2.0 * a - 2.0);
        let b = -2.0 + t * (top + 2.0);
        prop_assume!(classify_free_energy(a, b).region == Region::Bounded);
        let f = Functional::FreeEnergy(FreeEnergyParams::new(a, b, 1.0).unwrap());
        for w in [Witness::Translate, Witness::ScaleUp, Witness::ScaleDown, Witness::TwoBubble { eps: 0.2 }] {
            let est = run_witness(w, &f).unwrap();
            prop_assert!(est.rate > -0.05, "{w} at ({a}, {b}) has rate {}", est.rate);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn minimization_descends_and_keeps_mass(
        alpha in 0.5f64..2.0,
        gamma in -1.0f64..0.0,
        mbeta in -1.0f64..0.5,
        m in 0.5f64..2.0,
    ) {
        let p = SchrodingerParams::new(alpha, mbeta / m, gamma, m).unwrap();
        prop_assume!(classify_schrodinger(&p).region == Region::Bounded);
        let opts = MinimizeOptions {
            grid: GridSpec { n: 256, r_max: 15.0, grading: Grading::Uniform },
            max_iterations: 300,
            ..MinimizeOptions::default()
        };
        let rep = minimize(&p, &opts).unwrap();
        for w in rep.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "energy rose from {} to {}", w[0], w[1]);
        }
        prop_assert!((rep.mass - m).abs() < 1e-12 * m);
    }
}
