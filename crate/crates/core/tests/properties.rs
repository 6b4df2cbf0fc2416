use benign_core::bounds::{self, RateKnobs};
use benign_core::interpolant::{self, INTERP_TOL};
use benign_core::sampler::{self, DesignFamily, ModelSpec, NoiseFamily};
use benign_core::spectrum::{self, Regime};
use benign_core::{seed, DMatrix, DVector, FeatureSplit, GeometryConstants, Spectrum};
use proptest::prelude::*;

fn sorted_spectrum(max_p: usize) -> impl Strategy<Value = Spectrum> {
    prop::collection::vec(1e-3f64..10.0, 2..max_p).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        Spectrum::new(v).unwrap()
    })
}

fn spectrum_and_k(max_p: usize) -> impl Strategy<Value = (Spectrum, usize)> {
    sorted_spectrum(max_p).prop_flat_map(|s| {
        let p = s.p();
        (Just(s), 0..p)
    })
}

fn spectrum_and_split(max_p: usize) -> impl Strategy<Value = (Spectrum, FeatureSplit)> {
    sorted_spectrum(max_p).prop_flat_map(|s| {
        let p = s.p();
        let mask = prop::collection::vec(any::<bool>(), p);
        (Just(s), mask).prop_map(|(s, mut m)| {
            // Keep at least one tail index.
            let last = m.len() - 1;
            m[last] = false;
            let idx: Vec<usize> = m
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(j, _)| j + 1)
                .collect();
            let p = s.p();
            (s, FeatureSplit::from_indices(idx, p).unwrap())
        })
    })
}

fn model(s: Spectrum, beta: Vec<f64>, sigma_xi: f64, n: usize) -> ModelSpec {
    ModelSpec {
        spectrum: s,
        beta_star: beta,
        sigma_xi,
        n,
        design_family: DesignFamily::Gaussian,
        noise_family: NoiseFamily::Gaussian,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ranks_ordered_and_trace_identity((s, k) in spectrum_and_k(60)) {
        let split = FeatureSplit::head(k, s.p()).unwrap();
        let er = spectrum::effective_ranks(&s, &split).unwrap();
        // Tr(Σ²) ≤ ‖Σ‖·Tr(Σ) gives r ≤ R, and Tr(Σ²) ≥ ‖Σ‖² gives R ≤ r².
        prop_assert!(er.r <= er.big_r * (1.0 + 1e-12));
        prop_assert!(er.big_r <= er.r * er.r * (1.0 + 1e-12));
        let tail = spectrum::tail_trace(&s, &split).unwrap();
        prop_assert!((er.r * s.sigmas()[k] - tail).abs() <= 1e-12 * tail);
        let d = spectrum::dvoretsky_dimension(&s, &split, &GeometryConstants::default()).unwrap();
        prop_assert!((d - er.r).abs() <= 1e-12 * er.r);
    }

    #[test]
    fn tail_trace_non_increasing_in_k((s, k) in spectrum_and_k(60)) {
        prop_assume!(k + 1 < s.p());
        let a = spectrum::tail_trace(&s, &FeatureSplit::head(k, s.p()).unwrap()).unwrap();
        let b = spectrum::tail_trace(&s, &FeatureSplit::head(k + 1, s.p()).unwrap()).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn k_star_is_minimal(s in sorted_spectrum(80), n in 1usize..30, b in 0.5f64..6.0) {
        let g = GeometryConstants::default().with_b(b);
        let target = b * n as f64;
        match spectrum::k_star(&s, n, &g) {
            Some(k) => {
                prop_assert!(spectrum::contiguous_effective_rank(&s, k).unwrap() >= target);
                if k > 0 {
                    prop_assert!(spectrum::contiguous_effective_rank(&s, k - 1).unwrap() < target);
                }
            }
            None => {
                for k in 0..s.p() {
                    prop_assert!(spectrum::contiguous_effective_rank(&s, k).unwrap() < target);
                }
            }
        }
    }

    #[test]
    fn fixed_point_satisfies_inequality(s in sorted_spectrum(120), n in 1usize..80, c0 in 0.05f64..1.0) {
        let g = GeometryConstants::default().with_c0(c0);
        let split = FeatureSplit::head(s.p(), s.p()).unwrap();
        let fp = spectrum::fixed_point_rn(&s, &split, n, &g).unwrap();
        let head = s.sigmas();
        // Tiny slack for the rounding of R² in regime B and C.
        let r = fp.r_n * (1.0 + 1e-12);
        prop_assert!(spectrum::fixed_point_inequality(head, r, n, c0));
        if fp.regime == Regime::A {
            prop_assert_eq!(fp.r_n, 0.0);
        }
    }

    #[test]
    fn j1_j2_partition((s, split) in spectrum_and_split(50), n in 1usize..60) {
        let g = GeometryConstants::default();
        let (j1, j2) = spectrum::split_j1_j2(&s, &split, n, &g).unwrap();
        let thr = spectrum::j1_threshold(&s, &split, n, &g).unwrap();
        let mut all: Vec<usize> = j1.iter().chain(&j2).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, split.indices().to_vec());
        prop_assert!(j1.iter().all(|&j| s.sigma(j) >= thr));
        prop_assert!(j2.iter().all(|&j| s.sigma(j) < thr));
    }

    #[test]
    fn pythagoras_any_split((s, split) in spectrum_and_split(40), seed in any::<u64>()) {
        let p = s.p();
        let mut rng = seed::rng(seed);
        let bh = DVector::from_fn(p, |_, _| rand_normal(&mut rng));
        let bs = DVector::from_fn(p, |_, _| rand_normal(&mut rng));
        let r = interpolant::excess_risk(&s, &bh, &bs, &split).unwrap();
        prop_assert!(r.pythagoras_defect() <= 1e-10);
    }

    #[test]
    fn min_norm_beats_null_space_shifts(n in 2usize..12, extra in 1usize..20, seed in any::<u64>()) {
        let p = n + extra;
        let mut rng = seed::rng(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rand_normal(&mut rng));
        let y = DVector::from_fn(n, |_, _| rand_normal(&mut rng));
        let sol = interpolant::min_norm_interpolant(&x, &y, INTERP_TOL).unwrap();
        prop_assert!(sol.relative_residual <= 1e-8);
        let pinv = sol.pinv.as_ref().unwrap();
        for _ in 0..5 {
            let v = DVector::from_fn(p, |_, _| rand_normal(&mut rng));
            // Project onto the null space of X.
            let z = &v - x.tr_mul(&pinv.apply(&(&x * &v)));
            prop_assert!((&sol.beta + z).norm() >= sol.beta.norm() * (1.0 - 1e-10));
        }
    }

    #[test]
    fn lower_bound_below_scaled_r_star_squared(
        s in sorted_spectrum(200), n in 8usize..40, seed in any::<u64>(), sx in 0.0f64..3.0, c_lb in 0.0f64..2.0
    ) {
        let mut rng = seed::rng(seed);
        let beta: Vec<f64> = (0..s.p()).map(|_| rand_normal(&mut rng)).collect();
        let m = model(s, beta, sx, n);
        let g = GeometryConstants::default();
        if let Ok(lb) = bounds::lower_bound_value(&m, &g, c_lb) {
            let r = bounds::rate_r_star(&m, &g).unwrap();
            let cap = c_lb / (lb.b_effective * lb.b_effective) * r.value * r.value;
            prop_assert!(lb.value <= cap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rates_scale_with_signal_and_noise(
        s in sorted_spectrum(150), n in 2usize..30, t in 0.1f64..10.0, seed in any::<u64>()
    ) {
        let mut rng = seed::rng(seed);
        let beta: Vec<f64> = (0..s.p()).map(|_| rand_normal(&mut rng)).collect();
        let base = model(s, beta.clone(), 0.7, n);
        let scaled = model(base.spectrum.clone(), beta.iter().map(|b| b * t).collect(), 0.7 * t, n);
        let g = GeometryConstants::default();
        let knobs = RateKnobs::default();
        if let Ok(a) = bounds::rate_report(&base, &g, None, &knobs) {
            let b = bounds::rate_report(&scaled, &g, None, &knobs).unwrap();
            let close = |x: f64, y: f64| (x * t - y).abs() <= 1e-10 * (x * t).abs().max(1e-300);
            prop_assert!(close(a.r_star, b.r_star));
            prop_assert!(close(a.square, b.square));
            prop_assert!(close(a.overfit_price, b.overfit_price));
            if let (Some(x), Some(y)) = (a.lower_bound, b.lower_bound) {
                prop_assert!(close(x.sqrt(), y.sqrt()));
            }
        }
    }

    #[test]
    fn term_domination_in_case_ii((s, split) in spectrum_and_split(60), n in 1usize..40, seed in any::<u64>()) {
        let mut rng = seed::rng(seed);
        let beta: Vec<f64> = (0..s.p()).map(|_| rand_normal(&mut rng)).collect();
        let m = model(s, beta, 1.0, n);
        if let Ok(t) = bounds::term_domination(&m, &split, &GeometryConstants::default()) {
            prop_assert!(t.noise_split <= t.noise_head * (1.0 + 1e-12));
            prop_assert!(t.thres_norm <= t.head_inv_norm * (1.0 + 1e-12));
        }
    }
}

fn rand_normal(rng: &mut seed::Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

#[test]
fn fixed_point_half_radius_violates_inequality() {
    // The returned radius is minimal up to a factor 2 on the reference cases.
    let g = GeometryConstants::default();
    let geo = Spectrum::new((1..=100).map(|j| 2f64.powi(-j)).collect()).unwrap();
    let flat = Spectrum::new(vec![1.0; 80]).unwrap();
    for s in [geo, flat] {
        let split = FeatureSplit::head(s.p(), s.p()).unwrap();
        let fp = spectrum::fixed_point_rn(&s, &split, 80, &g).unwrap();
        assert!(fp.r_n > 0.0);
        assert!(!spectrum::fixed_point_inequality(
            s.sigmas(),
            fp.r_n / 2.0,
            80,
            0.25
        ));
    }
}

#[test]
fn decomposition_identity_on_random_instances() {
    for trial in 0..30u64 {
        let n = 10 + (trial as usize % 5) * 8;
        let p = n * (4 + trial as usize % 7);
        let s = Spectrum::new((1..=p).map(|j| (j as f64).powf(-0.5)).collect()).unwrap();
        let m = model(s.clone(), vec![0.5; p], 1.0, n);
        let data = sampler::make_sample(&m, trial).unwrap();
        let sol = interpolant::min_norm_interpolant(&data.x, &data.y, INTERP_TOL).unwrap();
        let split = FeatureSplit::head(n / 3, p).unwrap();
        let r = interpolant::decompose(&data.x, &data.y, &sol.beta, &split, &s).unwrap();
        assert!(r.diagnostic("identity_rel_error").unwrap() <= 1e-8);
        assert!(r.diagnostic("interp_rel_residual").unwrap() <= 1e-8);
        assert_eq!(&r.beta_head + &r.beta_tail, sol.beta);
    }
}

#[test]
fn rotation_leaves_risk_and_classification_unchanged() {
    let g = GeometryConstants::default();
    let base = bounds::spike_model(20, 120, 1.0).unwrap();
    let mut rng = seed::rng(99);
    let mut rotated = base.clone();
    rotated.spectrum = base
        .spectrum
        .clone()
        .with_random_rotation(&mut rng)
        .unwrap();

    let a = sampler::make_sample(&base, 5).unwrap();
    let b = sampler::make_sample(&rotated, 5).unwrap();
    let split = FeatureSplit::head(2, 120).unwrap();
    let ra = interpolant::excess_risk(
        &base.spectrum,
        &interpolant::min_norm_interpolant(&a.x, &a.y, INTERP_TOL)
            .unwrap()
            .beta,
        &base.beta_star(),
        &split,
    )
    .unwrap();
    let rb = interpolant::excess_risk(
        &rotated.spectrum,
        &interpolant::min_norm_interpolant(&b.x, &b.y, INTERP_TOL)
            .unwrap()
            .beta,
        &rotated.beta_star(),
        &split,
    )
    .unwrap();
    assert!((ra.total - rb.total).abs() <= 1e-9 * ra.total.max(1.0));

    let seq =
        |m: &ModelSpec| -> Vec<ModelSpec> { [20, 40, 80].iter().map(|&n| m.with_n(n)).collect() };
    assert_eq!(
        bounds::bo_classify(&seq(&base), &g).unwrap(),
        bounds::bo_classify(&seq(&rotated), &g).unwrap()
    );
}

#[test]
fn model_spec_json_round_trip() {
    let m = ModelSpec {
        design_family: DesignFamily::StudentT { dof: 6.0 },
        ..bounds::spike_model(10, 40, 0.5).unwrap()
    };
    let text = serde_json::to_string(&m).unwrap();
    assert!(text.contains("\"N\":10"));
    let back: ModelSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);

    let bad = r#"{"spectrum":[1.0,2.0],"beta_star":[0,0],"sigma_xi":1,"N":3}"#;
    assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
    let s: Spectrum = serde_json::from_str("[3, 2, 1]").unwrap();
    assert_eq!(serde_json::to_string(&s).unwrap(), "[3.0,2.0,1.0]");
}

#[test]
fn generators_from_json() {
    let g: spectrum::SpectrumGenerator =
        serde_json::from_str(r#"{"kind":"polynomial","p":4,"alpha":2.0,"scale":1.0}"#).unwrap();
    assert_eq!(
        g.build().unwrap().sigmas(),
        &[1.0, 0.25, 1.0 / 9.0, 1.0 / 16.0]
    );
}
