mod common;

use common::Lcg;
use nonlocal_tv::*;
use proptest::prelude::*;

fn weights_1d(n: usize, h: f64, r: f64) -> PairWeights64 {
    let g = Grid64::new_1d(n, h, 0.0).unwrap();
    build_pair_weights(&g, &KernelSpec64::new(0.5, 1, r, NearFieldRule::CellAveraged).unwrap()).unwrap()
}

fn weights_2d(n: usize, r: f64) -> PairWeights64 {
    let g = Grid64::new_2d([n, n], 1.0, [0.0, 0.0]).unwrap();
    build_pair_weights(&g, &KernelSpec64::new(0.4, 2, r, NearFieldRule::CellAveraged).unwrap()).unwrap()
}

/// Unit-length interval resolved with spacing `h`, centred in a grid with a
/// few cells of margin.
fn interval(len: f64, h: f64, r: f64) -> (LevelSet64, PairWeights64) {
    let n = ((len + 2.0) / h).round() as usize;
    let g = Grid64::new_1d(n, h, -1.0 + 0.5 * h).unwrap();
    let w = build_pair_weights(&g, &KernelSpec64::new(0.5, 1, r, NearFieldRule::CellAveraged).unwrap()).unwrap();
    let e = LevelSet::from_fn(g, |p| 0.5 * len - (p[0] - 0.5 * len).abs());
    (e, w)
}

fn mask_from(bits: &[bool], w: &PairWeights64) -> LevelSet64 {
    LevelSet::from_mask(*w.grid(), bits.to_vec()).unwrap()
}

#[test]
fn unit_interval_perimeter_matches_closed_form() {
    // ∫_0^1 ∫_{R∖[0,1]} |x-y|^{-3/2} = 2/(s(1-s)) = 8
    let (e, w) = interval(1.0, 1.0 / 64.0, 2.0);
    let p = perimeter(&e, &w, true).unwrap();
    assert!(p.lower <= 8.0 && 8.0 <= p.upper, "{p:?}");
    assert!((p.value - 8.0).abs() < 0.01, "{p:?}");
}

#[test]
fn interval_perimeter_scales() {
    let (e1, w1) = interval(1.0, 1.0 / 64.0, 2.0);
    let (e2, w2) = interval(2.0, 2.0 / 64.0, 4.0);
    let p1 = perimeter(&e1, &w1, true).unwrap().value;
    let p2 = perimeter(&e2, &w2, true).unwrap().value;
    assert!((p2 / p1 - 2f64.sqrt()).abs() < 0.01 * 2f64.sqrt());
    assert!((p2 - 8.0 * 2f64.sqrt()).abs() < 0.1);
}

#[test]
fn isoperimetric_ratio_examples() {
    let (e1, w1) = interval(1.0, 1.0 / 64.0, 2.0);
    let r1 = isoperimetric_ratio(&e1, &w1).unwrap();
    assert!((r1 - 8.0).abs() < 0.05);
    let (e2, w2) = interval(2.0, 1.0 / 64.0, 2.0);
    let r2 = isoperimetric_ratio(&e2, &w2).unwrap();
    assert!((r2 - 8.0).abs() < 0.05, "{r2}");

    // two unit intervals 40 apart
    let h = 1.0 / 32.0;
    let n = (44.0 / h) as usize;
    let g = Grid64::new_1d(n, h, -1.0 + 0.5 * h).unwrap();
    let w = build_pair_weights(&g, &KernelSpec64::new(0.5, 1, 2.0, NearFieldRule::CellAveraged).unwrap()).unwrap();
    let e = LevelSet::from_fn(g, |p| {
        let x = p[0];
        (0.5 - (x - 0.5).abs()).max(0.5 - (x - 41.5).abs())
    });
    let r = isoperimetric_ratio(&e, &w).unwrap();
    assert!((r - 16.0 / 2f64.sqrt()).abs() < 0.1, "{r}");
    assert!(r > r2);
    assert!(matches!(isoperimetric_ratio(&LevelSet::empty(g), &w), Err(Error::EmptySet(_))));
}

#[test]
fn localized_perimeter_matches_triple_classification() {
    let w = weights_1d(8, 1.0, 5.0);
    let mut rng = Lcg(7);
    for _ in 0..50 {
        let eb: Vec<bool> = (0..8).map(|_| rng.next_bool()).collect();
        let ob: Vec<bool> = (0..8).map(|_| rng.next_bool()).collect();
        let (e, o) = (mask_from(&eb, &w), mask_from(&ob, &w));
        let mut brute = 0.0;
        for (i, j, wij) in w.iter() {
            for (a, b) in [(i, j), (j, i)] {
                let t1 = ob[a] && eb[a] && ob[b] && !eb[b];
                let t2 = ob[a] && eb[a] && !ob[b] && !eb[b];
                let t3 = ob[a] && !eb[a] && !ob[b] && eb[b];
                if t1 || t2 || t3 {
                    brute += wij;
                }
            }
        }
        let got = localized_perimeter(&e, &o, &w).unwrap();
        assert!((got - brute).abs() < 1e-12 * (1.0 + brute));
        let full = localized_perimeter(&e, &LevelSet::full(*w.grid()), &w).unwrap();
        assert!((full - perimeter(&e, &w, false).unwrap().value).abs() < 1e-12);
    }
    let g = *w.grid();
    assert_eq!(localized_perimeter(&LevelSet::empty(g), &LevelSet::full(g), &w).unwrap(), 0.0);
}

#[test]
fn disjoint_sets_have_negative_submodularity_gap() {
    let w = weights_1d(12, 1.0, 6.0);
    let e = mask_from(&[true, true, false, false, false, false, false, false, false, false, false, false], &w);
    let f = mask_from(&[false, false, false, false, true, true, false, false, false, false, false, false], &w);
    let interaction: f64 = w.iter().filter(|&(i, j, _)| i < 2 && (4..6).contains(&j)).map(|(_, _, x)| x).sum();
    let gap = submodularity_gap(&e, &f, &w).unwrap();
    assert!((gap + 2.0 * interaction).abs() < 1e-12);
    assert_eq!(submodularity_gap(&e, &e, &w).unwrap(), 0.0);
}

#[test]
fn submodularity_on_random_pairs() {
    let w = weights_1d(12, 1.0, 11.0);
    let mut rng = Lcg(99);
    for _ in 0..200 {
        let a: Vec<bool> = (0..12).map(|_| rng.next_bool()).collect();
        let b: Vec<bool> = (0..12).map(|_| rng.next_bool()).collect();
        let (e, f) = (mask_from(&a, &w), mask_from(&b, &w));
        let gap = submodularity_gap(&e, &f, &w).unwrap();
        let scale = 1.0 + perimeter(&e, &w, false).unwrap().value + perimeter(&f, &w, false).unwrap().value;
        assert!(gap <= 1e-12 * scale, "{gap}");
    }
}

#[test]
fn coarea_on_random_16_cells() {
    let w = weights_1d(16, 1.0, 8.0);
    let mut rng = Lcg(3);
    let u = ScalarField::new(*w.grid(), (0..16).map(|_| rng.next_f64()).collect()).unwrap();
    let gap = coarea_gap(&u, &w).unwrap();
    assert!(gap <= 1e-10 * seminorm(&u, &w).unwrap());
    let two = weights_1d(2, 1.0, 2.0);
    let u = ScalarField::new(*two.grid(), vec![0.0, 1.0]).unwrap();
    assert_eq!(coarea_gap(&u, &two).unwrap(), 0.0);
}

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seminorm_is_homogeneous_and_translation_invariant(v in field_strategy(36), lam in -5.0f64..5.0, c in -5.0f64..5.0) {
        let w = weights_2d(6, 3.0);
        let u = ScalarField::new(*w.grid(), v).unwrap();
        let base = seminorm(&u, &w).unwrap();
        let scaled = seminorm(&u.map(|x| lam * x).unwrap(), &w).unwrap();
        prop_assert!((scaled - lam.abs() * base).abs() <= 1e-12 * (1.0 + base * lam.abs()));
        let shifted = seminorm(&u.map(|x| x + c).unwrap(), &w).unwrap();
        prop_assert!((shifted - base).abs() <= 1e-12 * (1.0 + base));
    }

    #[test]
    fn seminorm_triangle_inequality(a in field_strategy(36), b in field_strategy(36)) {
        let w = weights_2d(6, 3.0);
        let ua = ScalarField::new(*w.grid(), a).unwrap();
        let ub = ScalarField::new(*w.grid(), b).unwrap();
        let sum = ua.zip_map(&ub, |x, y| x + y).unwrap();
        let lhs = seminorm(&sum, &w).unwrap();
        let rhs = seminorm(&ua, &w).unwrap() + seminorm(&ub, &w).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn perimeter_of_complement_is_identical(bits in prop::collection::vec(any::<bool>(), 36)) {
        let w = weights_2d(6, 3.0);
        let e = LevelSet::from_mask(*w.grid(), bits).unwrap();
        prop_assert_eq!(perimeter(&e, &w, false).unwrap().value, perimeter(&e.complement(), &w, false).unwrap().value);
    }

    #[test]
    fn coarea_identity_holds(v in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 1.0, 2.5, -3.0]), 36)) {
        let w = weights_2d(6, 3.0);
        let u = ScalarField::new(*w.grid(), v).unwrap();
        let gap = coarea_gap(&u, &w).unwrap();
        prop_assert!(gap <= 1e-10 * (1.0 + seminorm(&u, &w).unwrap()));
    }

    #[test]
    fn submodularity_holds(a in prop::collection::vec(any::<bool>(), 36), b in prop::collection::vec(any::<bool>(), 36)) {
        let w = weights_2d(6, 4.0);
        let e = LevelSet::from_mask(*w.grid(), a).unwrap();
        let f = LevelSet::from_mask(*w.grid(), b).unwrap();
        let scale = 1.0 + perimeter(&e, &w, false).unwrap().value + perimeter(&f, &w, false).unwrap().value;
        prop_assert!(submodularity_gap(&e, &f, &w).unwrap() <= 1e-12 * scale);
    }

    #[test]
    fn energy_breakdown_adds_up(v in field_strategy(36), f in field_strategy(36)) {
        let w = weights_2d(6, 3.0);
        let u = ScalarField::new(*w.grid(), v).unwrap();
        let f = ScalarField::new(*w.grid(), f).unwrap();
        let e = total_energy(&u, &f, &w).unwrap();
        prop_assert_eq!(e.total, e.seminorm_term + e.fidelity_term);
        prop_assert!(e.seminorm_term >= 0.0 && e.fidelity_term >= 0.0 && e.tail_bound >= 0.0);
    }
}
