use bernoulli_phase::action::{self, FreeWord};
use bernoulli_phase::classify::{self, Phase};
use bernoulli_phase::measure::{self, DiscreteMeasure, MeasurePair, RangeKind};
use bernoulli_phase::simulate::{self, cocycle_sum, sample_field, EdgeField, PercolationOptions, Translated};
use bernoulli_phase::tree::{Direction, TreeSpec, Vertex};
use bernoulli_phase::{Error, KriegerType};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

fn normalize(raw: Vec<f64>) -> DiscreteMeasure {
    let s: f64 = raw.iter().sum();
    DiscreteMeasure::new(raw.iter().map(|x| x / s).collect()).unwrap()
}

fn weights(k: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(0.02f64..1.0, k).prop_map(normalize)
}

fn two(max: usize) -> impl Strategy<Value = (DiscreteMeasure, DiscreteMeasure)> {
    (2..=max).prop_flat_map(|k| (weights(k), weights(k)))
}

fn three(max: usize) -> impl Strategy<Value = (DiscreteMeasure, DiscreteMeasure, DiscreteMeasure)> {
    (2..=max).prop_flat_map(|k| (weights(k), weights(k), weights(k)))
}

fn word(d: u32, max_len: usize) -> impl Strategy<Value = FreeWord> {
    let d = d as i32;
    prop::collection::vec((1..=d, any::<bool>()), 0..=max_len)
        .prop_map(move |ls| FreeWord::new(d as u32, &ls.iter().map(|&(l, s)| if s { l } else { -l }).collect::<Vec<_>>()).unwrap())
}

/// Largest singular value of `F ↦ tF + (1 − t)ν(F)` from mean-zero
/// `L²(m)` into `L²(μ)`, by power iteration on `G*G`.
fn contraction_by_power_iteration(nu: &[f64], mu: &[f64], t: f64) -> f64 {
    let k = nu.len();
    let m: Vec<f64> = (0..k).map(|i| (1.0 - t) * nu[i] + t * mu[i]).collect();
    let project = |f: &mut Vec<f64>| {
        let mean: f64 = f.iter().zip(&m).map(|(a, b)| a * b).sum();
        f.iter_mut().for_each(|x| *x -= mean);
    };
    let apply = |f: &[f64]| -> Vec<f64> {
        let nf: f64 = f.iter().zip(nu).map(|(a, b)| a * b).sum();
        f.iter().map(|x| t * x + (1.0 - t) * nf).collect()
    };
    let adjoint = |h: &[f64]| -> Vec<f64> {
        let mh: f64 = h.iter().zip(mu).map(|(a, b)| a * b).sum();
        (0..k).map(|j| (t * mu[j] * h[j] + (1.0 - t) * nu[j] * mh) / m[j]).collect()
    };
    let norm_m = |f: &[f64]| f.iter().zip(&m).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
    let mut f: Vec<f64> = (0..k).map(|i| 1.0 + (i as f64 * 1.7).sin()).collect();
    project(&mut f);
    let mut ratio = 0.0;
    for _ in 0..5000 {
        let n = norm_m(&f);
        if n == 0.0 {
            return 0.0;
        }
        f.iter_mut().for_each(|x| *x /= n);
        let g = apply(&f);
        let gg: f64 = g.iter().zip(mu).map(|(a, b)| a * a * b).sum();
        ratio = gg.sqrt();
        f = adjoint(&g);
        project(&mut f);
    }
    ratio
}

/// `lim ⟨P^{2n}1, 1⟩^{1/2n}` for the simple random walk on `𝔽_d` against
/// the radial coefficient `a^{2|g|}`: the word length is a birth–death
/// chain, so the moments come from a one-dimensional recursion.
fn spectral_by_birth_death(d: u32, a: f64, steps: usize) -> f64 {
    let r = a * a;
    let up = (2 * d - 1) as f64 / (2 * d) as f64;
    let down = 1.0 / (2 * d) as f64;
    // w[k] = P(|X_t| = k)·r^k, renormalized every step.
    let mut w = vec![0.0; steps + 2];
    w[0] = 1.0;
    let mut log_mass = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    log_mass.push(0.0);
    for t in 0..steps {
        let mut next = vec![0.0; steps + 2];
        for k in 0..=t.min(steps) {
            if w[k] == 0.0 {
                continue;
            }
            if k == 0 {
                next[1] += w[0] * r;
            } else {
                next[k + 1] += w[k] * up * r;
                next[k - 1] += w[k] * down / r;
            }
        }
        let s: f64 = next.iter().sum();
        acc += s.ln();
        next.iter_mut().for_each(|x| *x /= s);
        log_mass.push(acc);
        w = next;
    }
    let n = steps - steps % 2;
    ((log_mass[n] - log_mass[n - 2]) / 2.0).exp()
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn hellinger_symmetric_and_in_range((mu, nu) in two(8)) {
        let a = measure::hellinger_sq(&mu, &nu).unwrap();
        let b = measure::hellinger_sq(&nu, &mu).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((-1e-12..1.0).contains(&a));
        prop_assert!(measure::hellinger_sq(&mu, &mu).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn affinity_multiplies_over_products((mu, nu) in two(4), (mu2, nu2) in two(4)) {
        let lhs = measure::affinity(&mu.product(&mu2), &nu.product(&nu2)).unwrap();
        let rhs = measure::affinity(&mu, &nu).unwrap() * measure::affinity(&mu2, &nu2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn interpolation_bound((nu, mu0, mu1) in three(8), t in 0.0f64..=1.0) {
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        let mixed = pair.mixed(&nu, t).unwrap();
        prop_assert!(mixed.hellinger_sq() <= t * pair.hellinger_sq() + 1e-12);
    }

    #[test]
    fn mgf_symmetry_value_and_convexity((mu0, mu1) in two(6), s in 0.0f64..1.0, u in 0.0f64..1.0) {
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        let z = measure::step_distribution(&pair).unwrap();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let (a, b) = (measure::mgf(&z, t), measure::mgf(&z, 1.0 - t));
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
        prop_assert!((measure::mgf(&z, 0.5) - pair.affinity().powi(2)).abs() <= 1e-12);
        let mid = measure::mgf(&z, (s + u) / 2.0);
        prop_assert!(mid <= (measure::mgf(&z, s) + measure::mgf(&z, u)) / 2.0 + 1e-12);
    }

    #[test]
    fn chernoff_minimum_is_squared_affinity((mu0, mu1) in two(8)) {
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        let m = measure::chernoff_min(&pair).unwrap();
        prop_assert!((m.value - pair.affinity().powi(2)).abs() <= 1e-10);
    }

    #[test]
    fn half_exponential_moment_is_affinity((mu0, mu1) in two(8)) {
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        for dir in [Direction::TowardRoot, Direction::AwayFromRoot] {
            let law = measure::log_ratio_distribution(&pair, dir);
            let m: f64 = law.atoms().iter().map(|(v, p)| p * (v / 2.0).exp()).sum();
            prop_assert!((m - pair.affinity()).abs() <= 1e-12);
        }
    }

    #[test]
    fn contraction_norm_matches_power_iteration((nu, mu) in two(6), t in 0.01f64..=1.0) {
        let svd = measure::site_contraction_norm(&nu, &mu, t).unwrap();
        prop_assert!(svd <= t.sqrt() + 1e-9);
        let oracle = contraction_by_power_iteration(nu.weights(), mu.weights(), t);
        prop_assert!((svd - oracle).abs() <= 1e-6, "svd {svd} oracle {oracle}");
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn range_group_of_equal_marginals_is_trivial(mu in (2usize..=8).prop_flat_map(weights)) {
        let pair = MeasurePair::new(mu.clone(), mu).unwrap();
        prop_assert_eq!(measure::essential_range_group(&pair, None).kind, RangeKind::Trivial);
    }

    #[test]
    fn lattice_generator_recovered(
        a in 0.05f64..2.0,
        ns in prop::collection::vec(0i32..6, 2..=6),
        raw in prop::collection::vec(0.05f64..1.0, 6),
    ) {
        prop_assume!(ns.iter().any(|&n| n != ns[0]));
        let k = ns.len();
        let mu1 = normalize(raw[..k].to_vec());
        let mu0 = normalize((0..k).map(|i| mu1.weights()[i] * (ns[i] as f64 * a).exp()).collect());
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        let mut g = 0i32;
        for i in 0..k {
            for j in 0..k {
                g = gcd(g, (ns[i] - ns[j]).abs());
            }
        }
        let expected = g as f64 * a;
        let report = measure::essential_range_group(&pair, None);
        prop_assert_eq!(report.kind, RangeKind::Lattice);
        let got = report.generator.unwrap();
        prop_assert!((got - expected).abs() <= 1e-9 * expected);
        match classify::krieger_type(&pair, None).krieger {
            KriegerType::TypeIIIlambda { lambda } => {
                let want = (-expected).exp();
                prop_assert!((lambda - want).abs() <= 1e-9 * want);
            }
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn distances_and_paths(q in 3u32..6, a in prop::collection::vec(0u32..5, 0..6), b in prop::collection::vec(0u32..5, 0..6)) {
        let spec = TreeSpec::regular(q).unwrap();
        let fix = |steps: Vec<u32>| {
            let steps: Vec<u32> = steps.iter().enumerate().map(|(i, &s)| if i == 0 { s % q } else { s % (q - 1) }).collect();
            Vertex::from_steps(steps)
        };
        let (v, w) = (fix(a), fix(b));
        prop_assert_eq!(spec.distance(&v, &w), spec.distance(&w, &v));
        prop_assert_eq!(spec.path_edges(&v, &w).len(), 2 * spec.distance(&v, &w));
        let enc = spec.encode(&v);
        prop_assert_eq!(spec.parse_vertex(&enc).unwrap(), v);
    }

    #[test]
    fn cayley_encoding_round_trips(g in (2u32..5).prop_flat_map(|d| word(d, 8))) {
        let spec = TreeSpec::cayley(g.rank()).unwrap();
        let v = g.to_vertex();
        prop_assert_eq!(spec.parse_vertex(&spec.encode(&v)).unwrap(), v.clone());
        prop_assert_eq!(FreeWord::from_vertex(g.rank(), &v), g);
    }

    #[test]
    fn action_is_a_group_action(g in word(3, 5), h in word(3, 5), v in word(3, 5)) {
        let spec = TreeSpec::cayley(3).unwrap();
        let v = v.to_vertex();
        let lhs = action::act_on_vertex(&spec, &g, &action::act_on_vertex(&spec, &h, &v).unwrap()).unwrap();
        let rhs = action::act_on_vertex(&spec, &g.compose(&h).unwrap(), &v).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn flipped_counts(g in word(2, 4)) {
        prop_assert_eq!(action::flipped_edge_count(&g), action::flipped_edge_count(&g.inverse()));
        prop_assert_eq!(action::flipped_edges_brute(&g, g.len() + 2).unwrap(), 2 * g.len());
    }

    #[test]
    fn kakutani_interpolation_and_koopman_limit(g in word(2, 4), (nu, mu0, mu1) in three(4), t in 0.0f64..=1.0) {
        prop_assume!(!g.is_identity());
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        let full = action::kakutani_sum(&g, &pair, &nu, 1.0).unwrap();
        prop_assert!(action::kakutani_sum(&g, &pair, &nu, t).unwrap() <= t * full + 1e-12);
        let by_edges = action::kakutani_sum_by_edges(&g, &pair, &nu, t).unwrap();
        prop_assert!((by_edges - action::kakutani_sum(&g, &pair, &nu, t).unwrap()).abs() <= 1e-12);
        let mut last = 0.0;
        for t in [0.1, 0.01, 0.001] {
            let c = action::koopman_correlation(&g, &pair, &nu, t).unwrap();
            prop_assert!(c >= last - 1e-15 && c <= 1.0);
            last = c;
        }
        prop_assert!(1.0 - last <= 1e-2);
    }

    #[test]
    fn classification_is_monotone(delta in 0.1f64..3.0, raw in prop::collection::vec(0.001f64..1.0, 2..20)) {
        let mut affinities = raw;
        affinities.sort_by(f64::total_cmp);
        let phases: Vec<Phase> = affinities
            .iter()
            .map(|&a| classify::classify_affinity(delta, a, false).unwrap().phase)
            .collect();
        prop_assert!(phases.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn spectral_bounds(d in 2u32..7, a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
        let r = classify::spectral_radius_from_affinity(d, a).unwrap();
        prop_assert!(r.rho_action >= r.rho_group - 1e-15);
        let kink = ((2 * d - 1) as f64).powf(-0.25);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo > kink {
            let rl = classify::spectral_radius_from_affinity(d, lo).unwrap().rho_action;
            let rh = classify::spectral_radius_from_affinity(d, hi).unwrap().rho_action;
            prop_assert!(rl <= rh + 1e-15);
        }
    }

    #[test]
    fn phase_scan_brackets_the_crossing((nu, mu0, mu1) in three(4), delta in 0.2f64..3.0) {
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        let tol = 1e-9;
        let scan = classify::phase_scan(delta, &nu, &pair, 64, tol).unwrap();
        if let Some(t1) = scan.t1 {
            let at = |t: f64| classify::classify_tree_action(delta, &pair.mixed(&nu, t).unwrap(), false).unwrap().phase;
            prop_assert!((classify::affinity_at(&nu, &pair, t1).unwrap() - scan.threshold).abs() <= 1e-9);
            if t1 - 10.0 * tol >= 0.0 {
                prop_assert_eq!(at(t1 - 10.0 * tol), Phase::WeaklyMixing);
            }
            if t1 + 10.0 * tol <= 1.0 {
                prop_assert_eq!(at(t1 + 10.0 * tol), Phase::Dissipative);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn cocycle_identity(
        d in 2u32..4,
        seed in any::<u64>(),
        (mu0, mu1) in two(3),
        gl in prop::collection::vec((1i32..=3, any::<bool>()), 0..4),
        hl in prop::collection::vec((1i32..=3, any::<bool>()), 0..4),
    ) {
        let letter = |&(l, s): &(i32, bool)| { let l = (l - 1) % d as i32 + 1; if s { l } else { -l } };
        let g = FreeWord::new(d, &gl.iter().map(letter).collect::<Vec<_>>()).unwrap();
        let h = FreeWord::new(d, &hl.iter().map(letter).collect::<Vec<_>>()).unwrap();
        let spec = TreeSpec::cayley(d).unwrap();
        let pair = MeasurePair::new(mu0, mu1).unwrap();
        let depth = g.len() + h.len();
        let x = sample_field(&spec, &pair, depth, seed).unwrap();
        let root = Vertex::root();
        let hg = action::act_on_vertex(&spec, &h.compose(&g).unwrap(), &root).unwrap();
        let lhs = cocycle_sum(&x, &hg).unwrap();
        let shifted = Translated::new(&x, h.clone());
        let rhs = cocycle_sum(&shifted, &g.to_vertex()).unwrap() + cocycle_sum(&x, &h.to_vertex()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn spectral_formula_matches_birth_death_moments(d in 2u32..5, a in 0.2f64..=1.0) {
        let formula = classify::spectral_radius_from_affinity(d, a).unwrap().rho_action;
        let oracle = spectral_by_birth_death(d, a, 4000);
        prop_assert!((formula - oracle).abs() <= 2e-3 * formula, "formula {formula} oracle {oracle}");
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

#[test]
fn spectral_branches_agree_at_the_kink() {
    for d in 2u32..=6 {
        let m = (2 * d - 1) as f64;
        let a = m.powf(-0.25);
        let upper = a * a / (2.0 * d as f64) * (m + a.powi(-4));
        let lower = m.sqrt() / d as f64;
        assert!((upper - lower).abs() <= 1e-12);
        let r = classify::spectral_radius_from_affinity(d, a).unwrap();
        assert!((r.rho_action - lower).abs() <= 1e-12);
    }
}

#[test]
fn poincare_partial_sums() {
    let spec = TreeSpec::regular(3).unwrap();
    let delta = spec.poincare_exponent();
    let terms = |s: f64| -> Vec<f64> {
        (0..=60).map(|n| spec.sphere_size(n).unwrap() as f64 * (-s * n as f64).exp()).collect()
    };
    let above = terms(delta + 0.1);
    assert!(above.windows(2).skip(1).all(|w| w[1] < w[0]));
    let tail_bound = above[60] / (1.0 - (-0.1f64).exp());
    assert!(tail_bound < 1e-1);
    let below = terms(delta - 0.1);
    assert!(below.windows(2).skip(1).all(|w| w[1] > w[0]));
    assert!(below.iter().sum::<f64>() > 400.0);
    // wider trees overflow the u64 sphere count well before n = 60
    let wide = TreeSpec::regular(7).unwrap();
    assert!(matches!(wide.sphere_size(60), Err(Error::Overflow(_))));
}

#[test]
fn edge_variables_have_unit_expectation() {
    let spec = TreeSpec::regular(3).unwrap();
    let pair = MeasurePair::from_weights(vec![0.7, 0.2, 0.1], vec![0.2, 0.3, 0.5]).unwrap();
    let x = sample_field(&spec, &pair, 16, 2024).unwrap();
    let mut by_dir = [Vec::new(), Vec::new()];
    for (id, s) in x.symbols() {
        let dir = if id & 1 == 0 { Direction::TowardRoot } else { Direction::AwayFromRoot };
        by_dir[(id & 1) as usize].push(pair.edge_log_value(dir, s).exp());
    }
    for xs in by_dir {
        assert!(xs.len() >= 100_000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.0).abs() <= 4.0 * (var / n).sqrt(), "mean {mean}");
    }
}

#[test]
fn retained_fraction_matches_p() {
    let spec = TreeSpec::regular(3).unwrap();
    for (mu0, mu1, m) in [
        (vec![0.7, 0.3], vec![0.3, 0.7], 1),
        (vec![0.7, 0.3], vec![0.3, 0.7], 2),
        (vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], 2),
    ] {
        let pair = MeasurePair::from_weights(mu0, mu1).unwrap();
        let opts = PercolationOptions {
            mc_trials: Some(5000),
            mc_depth: 2 * m,
            seed: 7,
            workers: 0,
        };
        let r = simulate::percolation_report(&spec, &pair, m, opts).unwrap();
        let (f, se) = (r.retained_fraction.unwrap(), r.retained_fraction_se.unwrap());
        assert!((f - r.p).abs() <= 3.0 * se, "p {} fraction {f} se {se}", r.p);
    }
}

#[test]
fn reports_do_not_depend_on_worker_count() {
    let spec = TreeSpec::regular(3).unwrap();
    let pair = MeasurePair::from_weights(vec![0.8, 0.2], vec![0.2, 0.8]).unwrap();
    let a = simulate::martingale_stats(&spec, &pair, 5, 500, 9, 1).unwrap();
    let b = simulate::martingale_stats(&spec, &pair, 5, 500, 9, 8).unwrap();
    assert_eq!(a, b);
    let a = simulate::recurrence_diagnostic(&spec, &pair, 6, 40, 9, 1e-6, 1).unwrap();
    let b = simulate::recurrence_diagnostic(&spec, &pair, 6, 40, 9, 1e-6, 8).unwrap();
    assert_eq!(a, b);
    let opts = |workers| PercolationOptions {
        mc_trials: Some(300),
        mc_depth: 8,
        seed: 9,
        workers,
    };
    let a = simulate::percolation_report(&spec, &pair, 1, opts(1)).unwrap();
    let b = simulate::percolation_report(&spec, &pair, 1, opts(8)).unwrap();
    assert_eq!(a, b);
    let c2 = TreeSpec::cayley(2).unwrap();
    let g = FreeWord::parse(2, "abA").unwrap();
    let a = simulate::rn_sqrt_mean(&c2, &pair, &g, 1000, 9, 1).unwrap();
    let b = simulate::rn_sqrt_mean(&c2, &pair, &g, 1000, 9, 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lazy_and_stored_fields_agree_under_translation() {
    let spec = TreeSpec::cayley(2).unwrap();
    let pair = MeasurePair::from_weights(vec![0.6, 0.4], vec![0.1, 0.9]).unwrap();
    let stored = sample_field(&spec, &pair, 6, 31).unwrap();
    let lazy = simulate::LazyField::new(&spec, &pair, 31);
    let h = FreeWord::parse(2, "bA").unwrap();
    let (ts, tl) = (Translated::new(&stored, h.clone()), Translated::new(&lazy, h));
    let v = spec.parse_vertex("abaB").unwrap();
    for e in spec.path_edges(&Vertex::root(), &v) {
        assert_eq!(ts.symbol(&e).unwrap(), tl.symbol(&e).unwrap());
    }
}
