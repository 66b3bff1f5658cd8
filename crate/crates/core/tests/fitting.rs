//! Round trips through the line-shape fitter on synthetic traces.

use ladder_eit::experiments::linspace;
use ladder_eit::fit::{eit_curve, fit_eit, fit_two_level, two_level_curve, Domain, FitWarning, KnownRates, Trace};
use proptest::prelude::*;

const TAU: f64 = std::f64::consts::TAU;

/// Log-uniform within a factor ten of `center`.
fn around(center: f64) -> impl Strategy<Value = f64> {
    (-1.0f64..1.0).prop_map(move |e| center * 10f64.powf(e))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn two_level_case() -> impl Strategy<Value = (f64, f64, f64)> {
    (around(6.9e7), 0.0f64..1.0, -0.5f64..0.5).prop_map(|(g, excess, c)| {
        // Keep γ₂₁ within a decade of the reference and above Γ₂₁/2.
        let lo = (g / 2.0).max(4.5e6);
        let hi = 4.5e8f64.max(lo * 1.01);
        let gamma = lo * (hi / lo).powf(excess);
        (g, gamma, c * gamma)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_level_round_trip(case in two_level_case(), magnitude in any::<bool>()) {
        let (g, gamma, x0) = case;
        let d = linspace(-8.0 * gamma, 8.0 * gamma, 161);
        let t = two_level_curve(g, gamma, x0, &d);
        let trace = if magnitude {
            Trace::magnitude(d, t.iter().map(|z| z.norm()).collect()).unwrap()
        } else {
            Trace::complex(d, t).unwrap()
        };
        let rep = fit_two_level(&trace).unwrap();
        prop_assert!(rep.converged);
        prop_assert_eq!(rep.domain, if magnitude { Domain::Magnitude } else { Domain::Complex });
        prop_assert!(rel(rep.get("gamma_rel_21").unwrap(), g) < 1e-3, "{:?}", rep);
        prop_assert!(rel(rep.get("gamma_deph_21").unwrap(), gamma) < 1e-3, "{:?}", rep);
        prop_assert!((rep.get("center_offset").unwrap() - x0).abs() < 1e-3 * gamma);
    }

    #[test]
    fn eit_round_trip(g31 in around(4.3e7), oc in around(TAU * 44e6)) {
        let known = KnownRates { gamma_rel_21: 6.9e7, gamma_deph_21: 4.5e7, delta_c: 0.0 };
        let span = (6.0_f64 * known.gamma_deph_21).max(1.5 * oc);
        let d = linspace(-span, span, 241);
        let trace = Trace::complex(d.clone(), eit_curve(&known, g31, oc, 0.0, &d)).unwrap();
        let rep = fit_eit(&trace, &known).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(rel(rep.get("omega_c_rabi").unwrap(), oc) < 1e-3, "{:?}", rep);
        prop_assert!(rel(rep.get("gamma_deph_31").unwrap(), g31) < 1e-3, "{:?}", rep);
    }

    #[test]
    fn uniform_weight_rescaling_changes_nothing(case in two_level_case(), w in around(1.0)) {
        let (g, gamma, x0) = case;
        let d = linspace(-8.0 * gamma, 8.0 * gamma, 81);
        // A deterministic perturbation so the optimum is not an exact zero.
        let t: Vec<_> = two_level_curve(g, gamma, x0, &d)
            .into_iter()
            .enumerate()
            .map(|(k, z)| z + ladder_eit::Cplx::new(0.01 * (k as f64 * 0.7).sin(), 0.01 * (k as f64 * 1.3).cos()))
            .collect();
        let weights: Vec<f64> = (0..d.len()).map(|k| 1.0 + 0.5 * (k as f64 * 0.37).sin()).collect();
        let base = Trace::complex(d.clone(), t.clone()).unwrap().with_weights(weights.clone()).unwrap();
        let scaled = Trace::complex(d, t).unwrap().with_weights(weights.iter().map(|x| x * w).collect()).unwrap();
        let (r1, r2) = (fit_two_level(&base).unwrap(), fit_two_level(&scaled).unwrap());
        for (e1, e2) in r1.estimates.iter().zip(&r2.estimates) {
            prop_assert!((e1.value - e2.value).abs() <= 1e-6 * gamma, "{} {} {}", e1.name, e1.value, e2.value);
        }
    }
}

#[test]
fn true_parameters_give_vanishing_residual() {
    let d = linspace(-4e8, 4e8, 101);
    let trace = Trace::complex(d.clone(), two_level_curve(6.9e7, 4.5e7, 0.0, &d)).unwrap();
    let rep = fit_two_level(&trace).unwrap();
    assert!(rep.residual_norm < 1e-10, "{}", rep.residual_norm);
}

#[test]
fn wrong_known_radiative_rate_is_detected() {
    let known = KnownRates { gamma_rel_21: 6.9e7, gamma_deph_21: 4.5e7, delta_c: 0.0 };
    let d = linspace(-5e8, 5e8, 201);
    let trace = Trace::complex(d.clone(), eit_curve(&known, 4.3e7, TAU * 44e6, 0.0, &d)).unwrap();
    let good = fit_eit(&trace, &known).unwrap();
    let wrong = KnownRates { gamma_rel_21: 2.0 * known.gamma_rel_21, ..known };
    let bad = fit_eit(&trace, &wrong).unwrap();
    assert!(bad.converged, "{bad:?}");
    assert!(
        bad.residual_norm > 10.0 * good.residual_norm.max(1e-12),
        "{} vs {}",
        bad.residual_norm,
        good.residual_norm
    );
}

#[test]
fn undriven_trace_cannot_reveal_control_parameters() {
    let known = KnownRates { gamma_rel_21: 6.9e7, gamma_deph_21: 4.5e7, delta_c: 0.0 };
    let d = linspace(-4e8, 4e8, 101);
    let trace = Trace::complex(d.clone(), eit_curve(&known, 4.3e7, 0.0, 0.0, &d)).unwrap();
    let rep = fit_eit(&trace, &known).unwrap();
    assert!(rep.warnings.contains(&FitWarning::Identifiability));
}
