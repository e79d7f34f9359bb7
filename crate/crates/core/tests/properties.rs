//! Property tests over the public API.

use ksos::bounds::{
    c0_constant, c0_constant_alt, fill_distance, kernel_deriv_sup, scattering_check, sigma_fast, BoundsReport,
    BoundsTerms, DomainGrid,
};
use ksos::experiments::{
    boundary_samples, global_opt_lower_bound, lv_field, lv_metrics, outward_normal, perimeter_point, ConstraintGrid,
};
use ksos::kernels::cholesky_factor;
use ksos::solver::{fit_ksos, fit_sampled, fit_unconstrained};
use ksos::sos::{interpolate_nonneg, psd_project};
use ksos::{ConstraintBlock, ConstraintSpec, Dataset, KernelSpec, SosBasis, SosModel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(rng: &mut ChaCha8Rng, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

/// Points at least `gap` apart, so Gram matrices stay well conditioned.
fn separated_points(rng: &mut ChaCha8Rng, n: usize, gap: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let p = vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
        if out.iter().all(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() >= gap) {
            out.push(p);
        }
    }
    out
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// Small 2-output regression problem with one constraint family on `count` samples.
struct Problem {
    data: Dataset,
    spec: KernelSpec,
    lambda: f64,
    constraints: ConstraintSpec,
}

fn problem(seed: u64, count: usize) -> Problem {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let inputs = points(&mut r, 6, 2, 0.0, 1.0);
    let targets = inputs.iter().map(|x| vec![x[0].sin() + 0.3, x[1] - x[0]]).collect();
    let data = Dataset::new(inputs, targets).unwrap();
    let spec = KernelSpec::new(r.random_range(0.3..1.0), 2).unwrap();
    let samples = points(&mut r, count, 2, 0.0, 1.0);
    let rows = samples
        .iter()
        .map(|_| {
            let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
            vec![a.cos(), a.sin()]
        })
        .collect();
    let offsets = samples.iter().map(|_| r.random_range(-0.5..0.5)).collect();
    let block = ConstraintBlock::new(samples, rows, offsets).unwrap();
    Problem {
        data,
        spec,
        lambda: 10f64.powf(r.random_range(-3.0..-1.0)),
        constraints: ConstraintSpec { blocks: vec![block], equalities: Vec::new() },
    }
}

/// Field on `[0,1]^2` whose normal component vanishes or points inward on every face.
fn invariant_field(c: Vec<f64>) -> impl Fn(&[f64]) -> Vec<f64> {
    move |x: &[f64]| {
        let (a, b) = (x[0], x[1]);
        let p1 = (c[0] + c[1] * b + c[2] * a).powi(2) + c[3].abs();
        let q1 = c[4] * (3.0 * b).sin() + c[5] * a;
        let p2 = (c[6] + c[7] * a + c[8] * b).powi(2) + c[9].abs();
        let q2 = c[10] * (2.0 * a).cos() + c[11] * b;
        vec![(1.0 - 2.0 * a) * p1 + a * (1.0 - a) * q1, (1.0 - 2.0 * b) * p2 + b * (1.0 - b) * q2]
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kernel_is_exactly_symmetric(
        x in prop::collection::vec(-5.0..5.0f64, 3),
        y in prop::collection::vec(-5.0..5.0f64, 3),
        sigma in 0.05..10.0f64,
    ) {
        let k = KernelSpec::scalar(sigma).unwrap();
        prop_assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
    }

    #[test]
    fn gram_is_psd(seed in any::<u64>(), n in 1usize..30, sigma in 0.1..3.0f64) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = KernelSpec::scalar(sigma).unwrap().gram(&points(&mut r, n, 2, -1.0, 1.0));
        prop_assert!(min_eig(&g) >= -1e-10);
    }

    // Analytic derivatives against a central difference of the next lower order.
    #[test]
    fn partial_matches_finite_differences(
        x in prop::collection::vec(-1.0..1.0f64, 2),
        y in prop::collection::vec(-1.0..1.0f64, 2),
        sigma in 0.5..2.0f64,
        alpha in prop::collection::vec(0usize..=2, 2),
        beta in prop::collection::vec(0usize..=2, 2),
        axis in 0usize..2,
    ) {
        prop_assume!(alpha.iter().sum::<usize>() <= 2 && beta.iter().sum::<usize>() <= 2);
        prop_assume!(alpha[axis] >= 1);
        let k = KernelSpec::scalar(sigma).unwrap();
        let mut lower = alpha.clone();
        lower[axis] -= 1;
        let h = 1e-5;
        let shifted = |t: f64| {
            let mut p = x.clone();
            p[axis] += t;
            k.partial(&lower, &beta, &p, &y).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let exact = k.partial(&alpha, &beta, &x, &y).unwrap();
        prop_assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1e-2), "{} vs {}", exact, fd);
    }

    #[test]
    fn cholesky_round_trip(seed in any::<u64>(), n in 1usize..25) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = KernelSpec::scalar(0.4).unwrap().gram(&separated_points(&mut r, n, 0.2));
        let f = cholesky_factor(&g).unwrap();
        prop_assert!((f.factored_gram() - &g).norm() <= 1e-10 * g.norm());
    }

    #[test]
    fn interpolation_is_exact_when_well_conditioned(seed in any::<u64>(), m in 1usize..=20) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let anchors = separated_points(&mut r, m, 0.3);
        let y: Vec<f64> = (0..m).map(|_| r.random_range(0.0..10.0)).collect();
        let basis = SosBasis::new(KernelSpec::scalar(0.3).unwrap(), anchors.clone()).unwrap();
        let model = interpolate_nonneg(&basis, &y).unwrap();
        for (a, v) in anchors.iter().zip(&y) {
            prop_assert!((model.evaluate(a) - v).abs() <= 1e-8);
        }
        prop_assert!(model.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn psd_models_are_nonnegative(seed in any::<u64>(), m in 1usize..12) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let anchors = points(&mut r, m, 2, 0.0, 1.0);
        let basis = SosBasis::new(KernelSpec::scalar(0.5).unwrap(), anchors).unwrap();
        let dim = basis.len();
        let l = DMatrix::from_fn(dim, dim, |_, _| r.random_range(-1.0..1.0));
        let model = SosModel::from_matrix(basis, &l * l.transpose()).unwrap();
        for x in points(&mut r, 200, 2, -1.0, 2.0) {
            prop_assert!(model.evaluate(&x) >= -1e-10);
        }
    }

    #[test]
    fn psd_projection_is_idempotent(entries in prop::collection::vec(-3.0..3.0f64, 16)) {
        let s = DMatrix::from_vec(4, 4, entries);
        let s = (&s + s.transpose()) * 0.5;
        let p = psd_project(&s);
        prop_assert!(min_eig(&p) >= -1e-12);
        prop_assert!((psd_project(&p) - &p).norm() <= 1e-12 * (1.0 + p.norm()));
    }

    #[test]
    fn fill_distance_is_antitone(seed in any::<u64>(), n in 1usize..15) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let domain = DomainGrid::unit_cube(2, 25).unwrap();
        let mut samples = points(&mut r, n, 2, 0.0, 1.0);
        let mut h = fill_distance(&samples, &domain).unwrap();
        for _ in 0..10 {
            samples.push(points(&mut r, 1, 2, 0.0, 1.0).remove(0));
            let next = fill_distance(&samples, &domain).unwrap();
            prop_assert!(next <= h);
            h = next;
        }
    }

    #[test]
    fn sigma_is_min_of_rates(
        h in 0.0..1.0f64,
        s in 1usize..=4,
        d in 1usize..=3,
        terms in prop::collection::vec(0.0..10.0f64, 7),
    ) {
        let t = BoundsTerms {
            h,
            s,
            d,
            d_seminorm1: terms[0],
            d_seminorm: terms[1],
            ck1: terms[2],
            cks: terms[3],
            d2: terms[4],
            m_f: terms[5],
            m_a: terms[6],
            gap_inputs: Some((1.5, 2.0)),
            ball_radius: None,
        };
        let rep = BoundsReport::assemble(&t).unwrap();
        prop_assert_eq!(rep.sigma, rep.sigma_fast.map_or(rep.sigma_slow, |f| rep.sigma_slow.min(f)));
        prop_assert_eq!(rep.sigma_fast.is_some(), s >= 2);
        prop_assert_eq!(rep.gap, Some(3.0 * rep.sigma));
    }

    #[test]
    fn nonnegative_values_pass_scattering(
        values in prop::collection::vec(0.0..5.0f64, 1..50),
        tau in 0.0..1.0f64,
        trace in 0.0..10.0f64,
        h in 0.0..1.0f64,
    ) {
        prop_assert!(scattering_check(&values, tau, trace, h, 2, 1.0, 1.0, 2).holds);
    }

    #[test]
    fn lv_field_is_invariant_on_the_boundary(t in 0.0..4.0f64) {
        let x = perimeter_point(t);
        let f = lv_field(&x);
        for n in outward_normal(&x).unwrap() {
            prop_assert!(n[0] * f[0] + n[1] * f[1] <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn unconstrained_objective_is_a_lower_bound(seed in any::<u64>(), count in 1usize..=4) {
        let p = problem(seed, count);
        let free = fit_unconstrained(&p.data, p.spec, p.lambda).unwrap();
        let sampled = fit_sampled(&p.data, p.spec, p.lambda, &p.constraints).unwrap();
        prop_assert!(free.report.objective <= sampled.report.objective + 1e-8);
        prop_assert!(p.constraints.min_slack(&sampled.model) >= -1e-6);
    }

    #[test]
    fn fits_are_deterministic(seed in any::<u64>()) {
        let p = problem(seed, 3);
        let phi = KernelSpec::scalar(0.3).unwrap();
        let a = fit_unconstrained(&p.data, p.spec, p.lambda).unwrap();
        let b = fit_unconstrained(&p.data, p.spec, p.lambda).unwrap();
        prop_assert_eq!(a.model.coefficients(), b.model.coefficients());
        let a = fit_sampled(&p.data, p.spec, p.lambda, &p.constraints).unwrap();
        let b = fit_sampled(&p.data, p.spec, p.lambda, &p.constraints).unwrap();
        prop_assert_eq!(a.model.coefficients(), b.model.coefficients());
        let a = fit_ksos(&p.data, p.spec, p.lambda, 1e-4, phi, &p.constraints).unwrap();
        let b = fit_ksos(&p.data, p.spec, p.lambda, 1e-4, phi, &p.constraints).unwrap();
        prop_assert_eq!(a.model.coefficients(), b.model.coefficients());
        prop_assert_eq!(a.sos_blocks[0].matrix(), b.sos_blocks[0].matrix());
        if a.report.converged {
            prop_assert!(a.sos_equality_residual(&p.constraints) <= 1e-6, "{} {:?}", a.sos_equality_residual(&p.constraints), a.report);
        }
    }

    #[test]
    fn ksos_objective_grows_with_trace_weight(seed in any::<u64>()) {
        let p = problem(seed, 4);
        let phi = KernelSpec::scalar(0.3).unwrap();
        let objectives: Vec<f64> = [1e-6, 1e-4, 1e-2]
            .iter()
            .map(|&l| fit_ksos(&p.data, p.spec, p.lambda, l, phi, &p.constraints).unwrap().report.objective)
            .collect();
        for w in objectives.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-6 * (1.0 + w[0].abs()), "{:?}", objectives);
        }
    }

    // A field feasible on a dense boundary grid gets exact SoS certificates at its samples.
    #[test]
    fn feasible_fields_admit_sos_certificates(
        c in prop::collection::vec(-2.0..2.0f64, 12),
        m in prop::sample::select(vec![8usize, 12, 20]),
    ) {
        let f = invariant_field(c);
        prop_assume!(ConstraintGrid::lv_boundary(400).unwrap().violations(&f).iter().all(|&v| v == 0.0));
        let spec = boundary_samples(m).unwrap();
        for block in &spec.blocks {
            let y: Vec<f64> = block.points.iter().zip(&block.rows).zip(&block.offsets)
                .map(|((x, r), d)| r.iter().zip(f(x)).map(|(a, b)| a * b).sum::<f64>() + d)
                .collect();
            prop_assert!(y.iter().all(|&v| v >= 0.0));
            let basis = SosBasis::new(KernelSpec::scalar(0.5).unwrap(), block.points.clone()).unwrap();
            let model = interpolate_nonneg(&basis, &y).unwrap();
            for (x, v) in block.points.iter().zip(&y) {
                prop_assert!((model.evaluate(x) - v).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn lower_bound_never_exceeds_sampled_minimum(
        coef in prop::collection::vec(-1.0..1.0f64, 4),
        n in 5usize..25,
    ) {
        let g = |x: &[f64]| coef[0] + coef[1] * (3.0 * x[0]).sin() + coef[2] * x[0] * x[0] + coef[3] * (5.0 * x[0]).cos();
        let samples: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let r = global_opt_lower_bound(&g, &samples, KernelSpec::scalar(0.3).unwrap(), 1e-6).unwrap();
        let min = samples.iter().map(|x| g(x)).fold(f64::INFINITY, f64::min);
        prop_assert!(r.c_hat <= min + 1e-6, "{} > {}", r.c_hat, min);
    }
}

#[test]
fn c0_forms_agree_on_small_orders() {
    for d in 1..=4 {
        for s in 1..=4 {
            let (a, b) = (c0_constant(d, s), c0_constant_alt(d, s));
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a, "d={d} s={s}: {a} vs {b}");
        }
    }
}

#[test]
fn sigma_fast_needs_second_order() {
    for s in 0..2 {
        assert!(sigma_fast(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.1, s).is_err());
    }
    assert!(sigma_fast(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.1, 2).is_ok());
}

#[test]
fn kernel_derivative_sup_grows_with_order() {
    let domain = DomainGrid::unit_cube(2, 12).unwrap();
    for sigma in [0.2, 0.5, 1.0, 3.0] {
        let spec = KernelSpec::scalar(sigma).unwrap();
        let d2: Vec<f64> = (0..=2).map(|s| kernel_deriv_sup(spec, &domain, s).unwrap()).collect();
        assert!(d2.windows(2).all(|w| w[1] >= w[0]), "sigma={sigma}: {d2:?}");
    }
}

#[test]
fn metrics_vanish_on_the_true_field() {
    let report = lv_metrics(&lv_field, 60, &ConstraintGrid::lv_boundary(400).unwrap()).unwrap();
    assert!(report.angular.abs() <= 1e-10);
    assert_eq!(report.l2, 0.0);
    assert!(report.linf_violation <= 1e-12);
    assert!(report.l1_violation <= 1e-12);
}
