use std::f64::consts::PI;

use proptest::prelude::*;

use echolab::bipartite::{apply_diagonal_coupling, apply_separable, apply_tops, partial_trace_env, CompositeState};
use echolab::echo::{evolve_pair, CoupledConfig, Perturbation};
use echolab::linalg::{hermitian_expm, kron, CMatrix, CVector, C64, I};
use echolab::oracle::full_space_sums;
use echolab::response::{correlation_sums, master_equation_kicked};
use echolab::bipartite::ReducedDensity;
use echolab::spin::{coherent_state, CoherentSpec, Spin, TopParams, TopPropagator};

fn perturbation() -> impl Strategy<Value = Perturbation> {
    prop_oneof![Just(Perturbation::JzOverJ), Just(Perturbation::Jz2OverJ2)]
}

prop_compose! {
    fn top(j: u32)(alpha in 0.0..30.0f64, gamma in 0.01..(PI - 0.01)) -> TopParams {
        TopParams::new(alpha, gamma, Spin::integer(j).unwrap()).unwrap()
    }
}

prop_compose! {
    fn angles()(theta in 0.0..PI, phi in 0.0..(2.0 * PI)) -> CoherentSpec {
        CoherentSpec::new(theta, phi)
    }
}

prop_compose! {
    fn config(js: std::ops::RangeInclusive<u32>, tmax: usize)
        (j in js)
        (sys in top(j), env in top(j), v_sys in perturbation(), v_env in perturbation(),
         init_sys in angles(), init_env in angles(), delta in 0.0..0.3f64, tmax in 1..=tmax)
        -> CoupledConfig
    {
        CoupledConfig { sys, env, v_sys, v_env, delta, init_sys, init_env, tmax }
    }
}

fn state(dims: (usize, usize), re: &[f64], im: &[f64]) -> CompositeState {
    let n = dims.0 * dims.1;
    let v = CVector::from_fn(n, |k, _| C64::new(re[k % re.len()] + 0.01 * k as f64, im[k % im.len()]));
    let norm = v.norm();
    CompositeState::from_vector(&(v / C64::from(norm)), dims).unwrap()
}

fn hermitian(n: usize, xs: &[f64]) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |i, k| C64::new(xs[(3 * i + k) % xs.len()], xs[(i + 5 * k + 1) % xs.len()]));
    (&a + a.adjoint()) * C64::from(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn factorized_sums_match_full_space(cfg in config(2..=5, 20)) {
        let l = correlation_sums(&cfg).unwrap();
        let (c, d, e) = full_space_sums(&cfg).unwrap();
        for t in 0..=cfg.tmax {
            let scale = 1.0 + c[t].abs();
            prop_assert!((l.c[t] - c[t]).abs() <= 1e-10 * scale);
            prop_assert!((l.d[t] - d[t]).abs() <= 1e-10 * scale);
            prop_assert!((l.e[t] - e[t]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn separable_product_matches_kronecker(
        j_s in 1u32..=4, j_e in 1u32..=4,
        xs in prop::collection::vec(-1.0..1.0f64, 8),
        ys in prop::collection::vec(-1.0..1.0f64, 8),
        re in prop::collection::vec(-1.0..1.0f64, 5),
        im in prop::collection::vec(-1.0..1.0f64, 5),
    ) {
        let (ns, ne) = (2 * j_s as usize + 1, 2 * j_e as usize + 1);
        let us = hermitian_expm(&hermitian(ns, &xs), -I);
        let ue = hermitian_expm(&hermitian(ne, &ys), -I * 0.7);
        let s = state((ns, ne), &re, &im);
        let fast = apply_separable(&us, &ue, &s).unwrap().to_vector();
        let dense = kron(&us, &ue) * s.to_vector();
        prop_assert!((fast - dense).camax() < 1e-12);
    }

    #[test]
    fn kicked_tops_match_kronecker(
        ts in top(3), te in top(2),
        re in prop::collection::vec(-1.0..1.0f64, 6),
        im in prop::collection::vec(-1.0..1.0f64, 6),
    ) {
        let ps = TopPropagator::new(ts).unwrap();
        let pe = TopPropagator::new(te).unwrap();
        let mut s = state((7, 5), &re, &im);
        let dense = kron(&ps.matrix(), &pe.matrix()) * s.to_vector();
        apply_tops(&ps, &pe, &mut s).unwrap();
        prop_assert!((s.to_vector() - dense).camax() < 1e-12);
    }

    #[test]
    fn diagonal_coupling_matches_dense_exponential(
        vs in perturbation(), ve in perturbation(), strength in -20.0..20.0f64,
        re in prop::collection::vec(-1.0..1.0f64, 4),
        im in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        let (js, je) = (Spin::integer(2).unwrap(), Spin::integer(3).unwrap());
        let s = state((5, 7), &re, &im);
        let out = apply_diagonal_coupling(&vs.diagonal(js), &ve.diagonal(je), strength, &s).unwrap();
        let v = kron(&vs.matrix(js), &ve.matrix(je));
        let dense = hermitian_expm(&v, -I * strength) * s.to_vector();
        prop_assert!((out.to_vector() - dense).camax() < 1e-12);
    }

    #[test]
    fn stability_measures_are_ordered(cfg in config(1..=4, 40)) {
        let s = evolve_pair(&cfg).unwrap();
        for k in 0..s.len() {
            let (f2, fr2, i) = (s.f[k].powi(2), s.fr[k].powi(2), s.i[k]);
            prop_assert!(f2 <= fr2 + 1e-9, "t={} F²={} F_R²={}", k, f2, fr2);
            prop_assert!(fr2 <= i + 1e-9, "t={} F_R²={} I={}", k, fr2, i);
            prop_assert!(i <= 1.0 + 1e-12);
            prop_assert!(s.f[k] >= -1e-15 && s.f[k] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn second_order_sums_are_ordered(cfg in config(1..=5, 30)) {
        let l = correlation_sums(&cfg).unwrap();
        for t in 0..=cfg.tmax {
            prop_assert!(l.d[t] >= -1e-10 && l.e[t] >= -1e-10);
            prop_assert!(l.c[t] - l.d[t] - l.e[t] >= -1e-10);
        }
    }

    #[test]
    fn reduced_density_has_unit_trace(
        re in prop::collection::vec(-1.0..1.0f64, 7),
        im in prop::collection::vec(-1.0..1.0f64, 7),
        ns in 1usize..6, ne in 1usize..6,
    ) {
        let s = state((ns, ne), &re, &im);
        let rho = partial_trace_env(&s);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-12);
        let p = s.purity();
        prop_assert!(p <= 1.0 + 1e-12 && p >= 1.0 / ns.min(ne) as f64 - 1e-12);
        prop_assert!((p - s.purity_svd()).abs() < 1e-10);
    }

    #[test]
    fn master_equation_purity_never_grows(
        t in top(4), init in angles(), sigma in 0.0..2.0f64, delta in 0.0..0.05f64,
    ) {
        let p = TopPropagator::new(t).unwrap();
        let psi = coherent_state(t.spin, init).unwrap();
        let run = master_equation_kicked(
            &p, &Perturbation::JzOverJ.diagonal(t.spin), sigma, delta, t.hbar_eff(),
            &ReducedDensity::pure(&psi), 60,
        ).unwrap();
        for w in run.purity.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for tr in &run.trace {
            prop_assert!((tr - 1.0).abs() < 1e-8);
        }
    }
}
