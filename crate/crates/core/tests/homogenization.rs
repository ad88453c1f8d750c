use fracelast::homogenization::*;
use fracelast::material_law::{frac_elasticity_law, CoefficientField};
use fracelast::spatial_operators::{build_setup, BoundaryCondition};
use fracelast::weighted_time::{frequency_point, weighted_norm, TimeGrid, WeightedSignal};
use fracelast::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn two_phase(a: f64, b: f64) -> PeriodicCoefficient {
    PeriodicCoefficient::two_phase(a, b).unwrap()
}

fn constant(v: f64) -> PeriodicCoefficient {
    PeriodicCoefficient::constant(v).unwrap()
}

/// Study on `m` cells with window `40 / nu` and the default forcing and
/// test family.
fn study(
    mu: PeriodicCoefficient,
    c: PeriodicCoefficient,
    d: PeriodicCoefficient,
    k_bound: f64,
    k_list: Vec<usize>,
    m: usize,
    n: usize,
) -> HomogenizationStudy {
    let placeholder = TimeGrid::new(0.0, 1.0, n, 2).unwrap();
    let mut s = HomogenizationStudy {
        mu,
        c,
        d,
        alpha: 0.5,
        k_bound,
        k_list,
        m,
        grid: placeholder,
        nu_override: None,
        l_max: 8,
        k_max: 12,
        n_quad: DEFAULT_N_QUAD,
        forcing: WeightedSignal::zeros(placeholder, 1.0, 1).unwrap(),
        test_functions: Vec::new(),
    };
    let nu = s.nu().unwrap();
    s.grid = TimeGrid::over(0.0, 40.0 / nu, n, 2).unwrap();
    s.forcing = default_forcing(m, &s.grid).unwrap();
    s.test_functions = default_test_functions(m, &s.grid).unwrap();
    s
}

#[test]
fn gaussian_pairing_matches_closed_form() {
    // int exp(-((t-a)^2 + (t-b)^2) / (2 s^2) - 2 nu t) dt
    //   = sqrt(pi) s exp(-(a-b)^2/(4 s^2) - (a+b) nu + nu^2 s^2)
    let (a, b, s, nu) = (1.0, 1.3, 0.15, 0.7);
    let grid = TimeGrid::over(-2.0, 5.0, 1 << 14, 1).unwrap();
    let bump = |c: f64| WeightedSignal::from_fn(grid, nu, 1, move |t, _| (-(t - c).powi(2) / (2.0 * s * s)).exp()).unwrap();
    let got = weak_pairing(&bump(a), &bump(b)).unwrap();
    let want = std::f64::consts::PI.sqrt()
        * s
        * (-(a - b).powi(2) / (4.0 * s * s) - (a + b) * nu + nu * nu * s * s).exp();
    assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
}

#[test]
fn pairing_rejects_mismatched_grids() {
    let g1 = TimeGrid::new(0.0, 0.1, 16, 1).unwrap();
    let g2 = TimeGrid::new(0.0, 0.2, 16, 1).unwrap();
    let u = WeightedSignal::zeros(g1, 1.0, 2).unwrap();
    let v = WeightedSignal::zeros(g2, 1.0, 2).unwrap();
    assert!(matches!(weak_pairing(&u, &v), Err(Error::DimensionMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 32,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn pairing_is_bilinear(
        seeds in prop::collection::vec(-1.0f64..1.0, 9),
        s in -3.0f64..3.0,
    ) {
        let grid = TimeGrid::new(-0.5, 0.05, 64, 1).unwrap();
        let make = |o: usize| WeightedSignal::from_fn(grid, 1.5, 3, |t, i| seeds[o + i] * (t * (i + 1) as f64).cos()).unwrap();
        let (u, v, phi) = (make(0), make(3), make(6));
        let lhs = weak_pairing(&u.scale(s).add(&v).unwrap(), &phi).unwrap();
        let rhs = s * weak_pairing(&u, &phi).unwrap() + weak_pairing(&v, &phi).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let sym = weak_pairing(&phi, &u).unwrap() - weak_pairing(&u, &phi).unwrap();
        prop_assert!(sym.abs() <= 1e-14);
    }

    #[test]
    fn oscillated_fields_respect_profile_bounds(
        a in 0.5f64..5.0,
        b in 0.5f64..5.0,
        log_k in 0u32..5,
        periods in 1usize..4,
    ) {
        let k = 1usize << log_k;
        let m = 2 * k * periods;
        let p = two_phase(a, b);
        let f = oscillate(&p, k, m).unwrap();
        prop_assert_eq!(f.len(), m);
        prop_assert!(f.samples().iter().all(|&v| v == a || v == b));
        // aligned: each phase covers exactly half the cells
        prop_assert_eq!(f.samples().iter().filter(|&&v| v == a).count() * 2 >= m, true);
        let mean = f.samples().iter().sum::<f64>() / m as f64;
        prop_assert!((mean - (a + b) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_phase_quadrature_is_exact(
        a in 0.5f64..5.0,
        b in 0.5f64..5.0,
        ca in -1.0f64..1.0,
        cb in -1.0f64..1.0,
        half in 1usize..40,
    ) {
        let eff = effective_coefficients(&two_phase(a, b), &two_phase(ca, cb), &two_phase(a, b), 3, 2 * half).unwrap();
        prop_assert!((eff.mu_mean - (a + b) / 2.0).abs() <= 1e-14 * (a + b));
        prop_assert!((eff.dinv_mean - (1.0 / a + 1.0 / b) / 2.0).abs() <= 1e-14 * (1.0 / a + 1.0 / b));
        for (l, k) in eff.k_table.iter().enumerate() {
            let p = l as i32 + 1;
            let want = (ca.powi(p) / a.powi(p + 1) + cb.powi(p) / b.powi(p + 1)) / 2.0;
            prop_assert!((k - want).abs() <= 1e-14 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn sinusoid_cell_identity() {
    // k (j + 1/2) / m lands on the k = 1 cell centre with index k j + (k - 1)/2
    let p = PeriodicCoefficient::from_profile(Profile::Sinusoid { mean: 3.0, amp: -1.2 }).unwrap();
    let m = 30;
    for k in [3usize, 5] {
        let fk = oscillate(&p, k, m).unwrap();
        let f1 = oscillate(&p, 1, m).unwrap();
        for j in 0..m {
            let i = (k * j + (k - 1) / 2) % m;
            assert!((fk.samples()[j] - f1.samples()[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn effective_stiffness_is_the_harmonic_mean() {
    let eff = effective_coefficients(&constant(1.0), &constant(0.0), &two_phase(1.0, 4.0), 8, 2).unwrap();
    assert_eq!(eff.dinv_mean, 0.625);
    assert!((eff.effective_stiffness() - 1.6).abs() <= 1e-14);
    assert!(eff.k_table.iter().all(|&k| k == 0.0));
    assert_eq!(eff.k_table.len(), 8);
}

#[test]
fn limit_law_without_viscosity_is_harmonic() {
    let s = study(two_phase(1.0, 2.0), constant(0.0), two_phase(1.0, 4.0), 1.0, vec![1], 8, 64);
    let law = s.homogenized(8).unwrap();
    let nu = s.nu().unwrap();
    for t in [-300.0, -7.0, 0.0, 0.5, 42.0, 1e4] {
        let z = frequency_point(t, nu);
        let got = law.eval(z).stress.to_dense(1)[(0, 0)];
        let want = z.powf(0.5) * 0.625;
        assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-300), "{got} vs {want}");
        assert_eq!(law.eval(z).velocity.to_dense(1)[(0, 0)], Complex64::new(1.5, 0.0));
    }
}

#[test]
fn uniform_weight_is_shared_by_every_k() {
    let s = study(two_phase(1.0, 2.0), constant(0.0), two_phase(1.0, 4.0), 1.0, vec![1, 2, 4], 16, 64);
    // sqrt(nu)/4 >= 1 and nu >= 1
    assert!((s.nu().unwrap() - 16.0).abs() < 1e-4);
    for k in [1, 2, 4] {
        assert!(s.oscillating_law(k).is_ok());
    }
    let mut low = s.clone();
    low.nu_override = Some(10.0);
    assert!(matches!(low.nu(), Err(Error::NuBelowNu0 { .. })));
}

#[test]
fn misaligned_k_is_rejected() {
    let s = study(two_phase(1.0, 2.0), constant(0.0), two_phase(1.0, 4.0), 1.0, vec![1, 3], 16, 64);
    assert_eq!(s.run().unwrap_err(), Error::MisalignedGrid { m: 16, k: 3 });
}

#[test]
fn default_inputs_are_equi_integrable() {
    let grid = TimeGrid::over(0.0, 2.5, 4096, 2).unwrap();
    let f = default_forcing(32, &grid).unwrap().with_nu(16.0).unwrap();
    let ladder: Vec<f64> = (0..8).map(|i| -0.5 + 0.1 * i as f64).collect();
    let table = equi_integrability_check(&[f.clone(), f.scale(3.0)], &ladder).unwrap();
    for &(a, sup) in &table {
        if a < 0.0 {
            assert_eq!(sup, 0.0);
        }
    }
    // the bump is centred 8 widths after the window start: two widths in
    // leaves a six-sigma tail
    let early = equi_integrability_check(std::slice::from_ref(&f), &[0.05]).unwrap()[0].1;
    assert!(early < 1e-6 * weighted_norm(&f));
}

#[test]
fn constant_coefficients_are_a_fixed_point() {
    let s = study(constant(1.5), constant(0.3), constant(2.0), 1.0, vec![1, 2, 4, 8], 32, 512);
    let report = s.run().unwrap();
    for row in &report.weak_errors {
        for &e in row {
            assert!(e <= 1e-7, "{e}");
        }
    }
    for (&e, &scale) in report.strong_errors.iter().zip(&report.pairing_scale) {
        assert!(e <= 1e-10 * (1.0 + scale));
    }
    assert_eq!(report.k_table.len(), report.truncation.l_max);
    assert!(report.max_relative_residual < 1e-10);
}

#[test]
fn oscillating_solutions_converge_weakly() {
    let s = study(two_phase(1.0, 2.0), constant(0.0), two_phase(1.0, 4.0), 1.0, vec![1, 2, 4, 8, 16, 32], 128, 4096);
    let report = s.run().unwrap();
    let errs = report.max_weak_errors();
    assert!(errs.iter().all(|e| e.is_finite()));
    assert!(errs[5] <= 0.2 * errs[0], "{errs:?}");
    let inversions = errs.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{errs:?}");
    eprintln!("weak {errs:?}\nstrong {:?}", report.strong_errors);
}

#[test]
fn memory_kernels_beat_the_naive_law() {
    let s = study(two_phase(1.0, 2.0), two_phase(1.0, 0.0), two_phase(1.0, 2.0), 1.0, vec![1, 8, 32], 128, 4096);
    let report = s.run().unwrap();
    let mem = report.max_weak_errors();
    let naive = report.max_naive_weak_errors();
    eprintln!("memory {mem:?}\nnaive {naive:?}");
    assert!(mem[2] < naive[2]);
}

#[test]
fn series_cut_moves_the_limit_within_the_tail_bound() {
    let s = study(two_phase(1.0, 2.0), two_phase(1.0, 0.0), two_phase(1.0, 2.0), 1.0, vec![1], 64, 2048);
    let check = s.truncation_check(4, 8, 0).unwrap();
    eprintln!("{check:?}");
    assert!(check.difference > 0.0);
    assert!(check.difference < check.bound);
}

#[test]
fn naive_law_matches_constant_fractional_law() {
    let s = study(two_phase(1.0, 2.0), two_phase(1.0, 0.0), two_phase(1.0, 2.0), 1.0, vec![1], 8, 64);
    let setup = build_setup(8, BoundaryCondition::Dirichlet).unwrap();
    let nu = s.nu().unwrap();
    let direct = frac_elasticity_law(
        &CoefficientField::constant(setup.velocity_dim(), 1.5).unwrap(),
        &CoefficientField::constant(setup.stress_dim(), 0.5).unwrap(),
        &CoefficientField::constant(setup.stress_dim(), 4.0 / 3.0).unwrap(),
        0.5,
        nu,
    )
    .unwrap();
    let naive = s.naive().unwrap();
    let z = frequency_point(3.0, nu);
    let (a, b) = (naive.eval(z).stress.to_dense(8), direct.eval(z).stress.to_dense(8));
    assert!((a - b).norm() < 1e-12);
}
