use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use steercert::certify_analytic::{fidelity_lower, tilted_slope, Scenario};
use steercert::certify_sdp::{
    assemble_gamma, build_gamma_pattern, fidelity_value, random_strategy, solve_min_fidelity, steering_value,
    DEFAULT_SOLVER_TOL,
};
use steercert::model::{noisy_state, BobObservable, BobSettings, Family, Pauli, SteeringInequality};
use steercert::qmat::{
    self, c, eig_hermitian, fidelity_pure, frobenius, is_psd, kron, partial_trace, projector, Keep, Ket, Mat,
};
use steercert::sampling::{guessing_probability, sample_count, Regime};
use steercert::sos::{self, sos_residual, SosId};

fn cplx(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
}

fn mat(n: usize, v: &[(f64, f64)]) -> Mat {
    Mat::from_fn(n, n, |i, j| c(v[i * n + j].0, v[i * n + j].1))
}

fn herm(n: usize, v: &[(f64, f64)]) -> Mat {
    let m = mat(n, v);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

fn unit_ket(v: &[(f64, f64)]) -> Ket {
    let k = Ket::from_iterator(v.len(), v.iter().map(|&(a, b)| c(a, b)));
    let n = k.norm();
    k / c(n.max(1e-300), 0.0)
}

/// Cholesky of `h + shift I` by hand; succeeds iff the shifted matrix is positive definite.
fn cholesky_succeeds(h: &Mat, shift: f64) -> bool {
    let n = h.nrows();
    let a = h + qmat::identity(n) * c(shift, 0.0);
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 0.0 {
            return false;
        }
        l[(j, j)] = c(d.sqrt(), 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    true
}

fn valid_params(family: Family, a: f64, db: f64) -> (f64, f64) {
    match family {
        Family::TiltedAnalog => (a.min(1.9), 1.0),
        Family::TwoTrusted | Family::ThreeTrusted => (a, 0.05 + db),
        Family::TwoUntrusted => (a, (1.0 + a * a).sqrt() + 1e-3 + db),
        Family::ThreeUntrusted => (a, (4.0 + a * a).sqrt() + 1e-3 + db),
    }
}

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(Family::ALL.to_vec())
}

/// Largest eigenvalue of `d I + a X + b Y + e Z` is `d + |(a, b, e)|`.
fn lhs_oracle(ineq: &SteeringInequality) -> f64 {
    let k = ineq.family().settings();
    let mut best = f64::NEG_INFINITY;
    for mask in 0..1usize << k {
        let mut coef = [0.0; 4];
        for t in ineq.terms() {
            let sign = t.bob.map_or(1.0, |j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 });
            let slot = match t.alice {
                Pauli::I => 0,
                Pauli::X => 1,
                Pauli::Y => 2,
                Pauli::Z => 3,
            };
            coef[slot] += t.coef * sign;
        }
        best = best.max(coef[0] + (coef[1] * coef[1] + coef[2] * coef[2] + coef[3] * coef[3]).sqrt());
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstructs(v in cplx(16)) {
        let h = herm(4, &v);
        let e = eig_hermitian(&h).unwrap();
        prop_assert!(frobenius(&(e.reconstruct() - &h)) < 1e-10);
    }

    #[test]
    fn pure_fidelity_is_overlap(a in cplx(4), b in cplx(4)) {
        let (phi, psi) = (unit_ket(&a), unit_ket(&b));
        let f = fidelity_pure(&projector(&phi), &psi).unwrap();
        prop_assert!((f - phi.dotc(&psi).norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_is_linear_and_trace_preserving(a in cplx(16), b in cplx(16), t in -2.0..2.0f64) {
        let (x, y) = (mat(4, &a), mat(4, &b));
        for keep in [Keep::First, Keep::Second] {
            let px = partial_trace(&x, keep);
            prop_assert!((px.trace() - x.trace()).norm() < 1e-12);
            let lhs = partial_trace(&(&x + &y * c(t, 0.0)), keep);
            let rhs = &px + partial_trace(&y, keep) * c(t, 0.0);
            prop_assert!(frobenius(&(lhs - rhs)) < 1e-12);
        }
        let prod = kron(&mat(2, &a[..4]), &mat(2, &b[..4]));
        let kept = partial_trace(&prod, Keep::First);
        prop_assert!(frobenius(&(kept - mat(2, &a[..4]) * mat(2, &b[..4]).trace())) < 1e-12);
    }

    #[test]
    fn psd_agrees_with_cholesky(v in cplx(16), shift in -1.5..1.5f64) {
        let h = herm(4, &v) + qmat::identity(4) * c(shift, 0.0);
        let psd = is_psd(&h, 0.0).unwrap().psd;
        let min = qmat::min_eigenvalue(&h);
        prop_assume!(min.abs() > 1e-6);
        prop_assert_eq!(psd, cholesky_succeeds(&h, 0.0));
    }

    #[test]
    fn lhs_bound_matches_oracle_and_closed_form(f in family(), a in 0.0..3.0f64, db in 0.0..4.0f64) {
        let (a, b) = valid_params(f, a, db);
        let ineq = SteeringInequality::new(f, a, b).unwrap();
        prop_assert!((ineq.lhs_bound() - lhs_oracle(&ineq)).abs() < 1e-10);
        prop_assert!((ineq.lhs_bound() - ineq.lhs_bound_closed()).abs() < 1e-10);
        prop_assert!(ineq.quantum_bound() > ineq.lhs_bound());
    }

    #[test]
    fn ideal_violation_is_quantum_bound(f in family(), a in 0.0..3.0f64, db in 0.0..4.0f64) {
        let (a, b) = valid_params(f, a, db);
        let ineq = SteeringInequality::new(f, a, b).unwrap();
        let s = ineq.violation(&ineq.target().density(), &ineq.ideal_bob_settings()).unwrap();
        prop_assert!((s - ineq.quantum_bound()).abs() < 1e-9);
    }

    #[test]
    fn steering_operator_is_linear_in_bloch_vectors(
        f in family(), a in 0.0..2.0f64, db in 0.0..2.0f64,
        u in prop::collection::vec(-1.0..1.0f64, 9), w in prop::collection::vec(-1.0..1.0f64, 9), t in -2.0..2.0f64,
    ) {
        let (a, b) = valid_params(f, a, db);
        let ineq = SteeringInequality::new(f, a, b).unwrap();
        let k = f.settings();
        let ops = |v: &[f64]| -> Vec<Mat> { (0..k).map(|j| qmat::bloch_operator([v[3 * j], v[3 * j + 1], v[3 * j + 2]])).collect() };
        let mix: Vec<f64> = u.iter().zip(&w).map(|(x, y)| x + t * y).collect();
        let constant = ineq.operator_from(&vec![Mat::zeros(2, 2); k]);
        let lhs = ineq.operator_from(&ops(&mix)) - &constant;
        let rhs = (ineq.operator_from(&ops(&u)) - &constant) + (ineq.operator_from(&ops(&w)) - &constant) * c(t, 0.0);
        prop_assert!(frobenius(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn scenario_bounds_are_ordered(a in 0.0..1.9f64, x in 0.0..1.0f64) {
        let ineq = SteeringInequality::tilted(a).unwrap();
        let obs = ineq.lhs_bound() + x * (ineq.quantum_bound() - ineq.lhs_bound());
        let dd = fidelity_lower(Scenario::DeviceDependent, a, obs).unwrap();
        let one = fidelity_lower(Scenario::OneSided, a, obs).unwrap();
        let di = fidelity_lower(Scenario::DeviceIndependent, a, obs).unwrap();
        prop_assert!(dd >= one - 1e-12 && one >= di - 1e-12);
    }

    #[test]
    fn one_sided_bound_never_overclaims(a in 0.0..1.9f64, v in 0.0..1.0f64) {
        let ineq = SteeringInequality::tilted(a).unwrap();
        let rho = noisy_state(ineq.target_theta(), v).unwrap();
        let s = ineq.violation(&rho, &ineq.ideal_bob_settings()).unwrap();
        let f = fidelity_lower(Scenario::OneSided, a, s).unwrap();
        prop_assert!(f <= fidelity_pure(&rho, &ineq.target().ket()).unwrap() + 1e-9);
    }

    #[test]
    fn guessing_probability_is_affine_increasing(a in 0.0..2.0f64, db in 0.0..3.0f64, three in any::<bool>(), x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let f = if three { Family::ThreeTrusted } else { Family::TwoTrusted };
        let ineq = SteeringInequality::new(f, a, 0.05 + db).unwrap();
        let q = ineq.quantum_bound();
        let p = |s: f64| guessing_probability(&ineq, s).unwrap();
        let (s1, s2) = (x.min(y) * q, x.max(y) * q);
        prop_assert!(p(s1) <= p(s2));
        prop_assert!((p(0.5 * (s1 + s2)) - 0.5 * (p(s1) + p(s2))).abs() < 1e-12);
        prop_assert!((p(q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sample_count_is_monotone(e1 in 0.001..0.5f64, e2 in 0.001..0.5f64, d1 in 0.001..0.9f64, d2 in 0.001..0.9f64, tilted in any::<bool>()) {
        let (ineq, slope) = if tilted {
            (SteeringInequality::tilted(0.3).unwrap(), tilted_slope(0.3))
        } else {
            (SteeringInequality::new(Family::ThreeTrusted, 0.0, 1.0).unwrap(), 3.0 / (12.0 - 4.0 * 2f64.sqrt()))
        };
        let n = |e: f64, d: f64| sample_count(&ineq, e, d, slope).unwrap().n_required;
        let (elo, ehi) = (e1.min(e2), e1.max(e2));
        let (dlo, dhi) = (d1.min(d2), d1.max(d2));
        prop_assert!(n(elo, dlo) >= n(ehi, dlo));
        prop_assert!(n(elo, dlo) >= n(elo, dhi));
    }

    #[test]
    fn coinciding_count_is_nearly_linear(ce in 0.002..0.05f64, d in 1e-6..0.5f64) {
        let ineq = SteeringInequality::new(Family::ThreeTrusted, 0.0, 1.0).unwrap();
        let s = 3.0 / (12.0 - 4.0 * 2f64.sqrt());
        let cc = 1.0 / (2.0 * s * 3.0);
        let plan = sample_count(&ineq, ce / cc, d, s).unwrap();
        prop_assert_eq!(plan.regime, Regime::Coinciding);
        let approx = (1.0 / d).ln() / ce;
        let n = plan.n_required as f64;
        prop_assume!(approx > 30.0);
        prop_assert!((n / approx - 1.0).abs() < 0.03, "n {} approx {}", n, approx);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sos_identities_close(seed in any::<u64>(), which in 0..SosId::ALL.len()) {
        let id = SosId::ALL[which];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = sos::random_parameters(id, &mut rng);
        let bob = sos::random_settings(&mut rng, id.family().settings());
        prop_assert!(sos_residual(id, a, b, &bob).unwrap() < 1e-10);
    }

    #[test]
    fn swap_fidelity_is_continuous(a in 0.0..1.5f64, mu in 0.3..1.2f64) {
        let ineq = SteeringInequality::tilted(a).unwrap();
        let psi = ineq.target().ket();
        let h = 1e-5;
        let f = |m: f64| sos::swap_isometry_output(&psi, &ineq, &BobSettings::tilted(m)).unwrap().target_fidelity;
        let jump = (f(mu + h) - f(mu)).abs();
        prop_assert!(jump <= 10.0 * h, "jump {}", jump);
    }

    #[test]
    fn bloch_observable_is_involution(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
        let n = (x * x + y * y + z * z).sqrt();
        prop_assume!(n > 1e-3);
        let b = BobObservable::new([x / n, y / n, z / n]).unwrap().matrix();
        prop_assert!(frobenius(&(&b * &b - qmat::identity(2))) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn moment_bound_never_exceeds_strategy_fidelity(seed in any::<u64>(), three in any::<bool>()) {
        let settings = if three { 3 } else { 2 };
        let family = if three { Family::ThreeTrusted } else { Family::TwoTrusted };
        let ineq = SteeringInequality::new(family, 1.0, 2.0).unwrap();
        let theta = ineq.target_theta();
        let pattern = build_gamma_pattern(settings).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rho, proj) = random_strategy(&mut rng, settings, 2);
        let gamma = assemble_gamma(&pattern, &rho, &proj).unwrap();
        let observed = steering_value(&pattern, &ineq, &gamma);
        let truth = fidelity_value(&pattern, theta, &gamma);
        let sol = solve_min_fidelity(&ineq, theta, observed, DEFAULT_SOLVER_TOL).unwrap();
        prop_assert!(sol.f_min <= truth + DEFAULT_SOLVER_TOL, "f_min {} truth {}", sol.f_min, truth);
        prop_assert!(sol.dual_gap < 10.0 * DEFAULT_SOLVER_TOL);
    }
}
