mod common;

use std::f64::consts::PI;

use common::simpson;
use nonlocal_tv::geometry::*;
use nonlocal_tv::*;
use proptest::prelude::*;

fn spec2(s: f64) -> KernelSpec64 {
    KernelSpec64::new(s, 2, 0.25, NearFieldRule::CellAveraged).unwrap()
}

fn spec1(s: f64) -> KernelSpec64 {
    KernelSpec64::new(s, 1, 0.25, NearFieldRule::CellAveraged).unwrap()
}

/// Square grid of `n` cells per side centred at the origin.
fn square(n: usize, half: f64) -> Grid64 {
    let h = 2.0 * half / n as f64;
    Grid64::new_2d([n, n], h, [-half + 0.5 * h, -half + 0.5 * h]).unwrap()
}

fn line(n: usize, half: f64) -> Grid64 {
    let h = 2.0 * half / n as f64;
    Grid64::new_1d(n, h, -half + 0.5 * h).unwrap()
}

fn disc(g: Grid64, c: [f64; 2], r: f64) -> LevelSet64 {
    LevelSet::from_fn(g, move |x| r - (x[0] - c[0]).hypot(x[1] - c[1]))
}

/// Unit-disc curvature from `(2/s) ∫_{-π/2}^{π/2} (2 cos θ)^{-s} dθ`. With
/// `φ = π/2 - |θ|` and `φ = v^q`, `q = 1/(1-s)`, the endpoint singularity
/// becomes the smooth factor `q (φ / sin φ)^s`.
fn unit_disc_curvature(s: f64) -> f64 {
    let q = 1.0 / (1.0 - s);
    let top = (PI / 2.0).powf(1.0 / q);
    let g = |v: f64| {
        let phi = v.powf(q);
        let ratio = if phi < 1e-12 { 1.0 } else { phi / phi.sin() };
        q * ratio.powf(s) * 2f64.powf(-s)
    };
    2.0 * 2.0 / s * simpson(&g, 0.0, top, 1e-13)
}

#[test]
fn disc_oracle_sanity() {
    // s = 1/2: 2^{3/2} ∫_0^{π/2} sin^{-1/2} = 2^{3/2} · B(1/4, 1/2) / 2 ≈ 14.8326
    assert!((unit_disc_curvature(0.5) - 14.8326).abs() < 1e-3);
}

#[test]
fn disc_curvature_matches_oracle_and_scales() {
    for s in [0.3, 0.5, 0.7] {
        let h1 = unit_disc_curvature(s);
        for radius in [0.5, 1.0, 2.0] {
            let g = square(96, 1.5 * radius);
            let e = disc(g, [0.0, 0.0], radius);
            for angle in [0.0, 0.4, 1.3] {
                let p = nearest_boundary_point(&e, [radius * f64::cos(angle), radius * f64::sin(angle)]).unwrap();
                let hv = mean_curvature(&e, &p, &spec2(s)).unwrap();
                let want = radius.powf(-s) * h1;
                assert!((hv / want - 1.0).abs() < 1e-3, "s={s} R={radius}: {hv} vs {want}");
            }
        }
    }
}

#[test]
fn interval_endpoint_curvature() {
    for s in [0.3, 0.5, 0.7] {
        let e = LevelSet::from_fn(line(512, 4.0), |x| 1.0 - x[0].abs());
        let p = nearest_boundary_point(&e, [1.0, 0.0]).unwrap();
        let hv = mean_curvature(&e, &p, &spec1(s)).unwrap();
        // the complement beyond both ends contributes 2 ∫_2^∞ r^{-1-s}
        let want = 2f64.powf(1.0 - s) / s;
        assert!((hv - want).abs() < 1e-6 * want, "s={s}: {hv} vs {want}");
    }
}

#[test]
fn inclusion_comparison_in_1d_and_2d() {
    let s = 0.5;
    let g = line(512, 4.0);
    let e = LevelSet::from_fn(g, |x| 1.0 - x[0].abs());
    let f = LevelSet::from_fn(g, |x| (x[0] + 2.0).min(1.0 - x[0]));
    let p = nearest_boundary_point(&e, [1.0, 0.0]).unwrap();
    let d = inclusion_curvature_check(&e, &f, &p, &spec1(s)).unwrap();
    let want = 2.0 * (2f64.powf(-s) - 3f64.powf(-s)) / s;
    assert!((d - want).abs() < 1e-6, "{d} vs {want}");
    assert!(inclusion_curvature_check(&f, &e, &p, &spec1(s)).is_err());

    // internally tangent discs sharing (1, 0)
    let g = square(128, 1.5);
    let small = disc(g, [0.5, 0.0], 0.5);
    let big = disc(g, [0.0, 0.0], 1.0);
    let p = nearest_boundary_point(&big, [1.0, 0.0]).unwrap();
    let d = inclusion_curvature_check(&small, &big, &p, &spec2(s)).unwrap();
    let want = unit_disc_curvature(s) * (0.5f64.powf(-s) - 1.0);
    assert!(d > 0.0 && (d / want - 1.0).abs() < 0.01, "{d} vs {want}");
}

#[test]
fn half_plane_has_zero_curvature() {
    let g = square(64, 1.0);
    let e = LevelSet::from_fn(g, |x| -x[0]);
    let p = nearest_boundary_point(&e, [0.0, 0.1]).unwrap();
    let opts = CurvatureOptions { allow_open: true, ..Default::default() };
    let hv = mean_curvature_with(&e, &p, &spec2(0.5), opts).unwrap();
    let scale = 2f64.powf(0.5) / 0.5;
    assert!(hv.abs() <= 0.02 * scale, "{hv}");
    // without the opt-in an open boundary is refused
    assert!(mean_curvature(&e, &p, &spec2(0.5)).is_err());
}

#[test]
fn truncated_curvature_of_large_disc_is_local() {
    let g = square(128, 1.5);
    let e = disc(g, [0.0, 0.0], 1.0);
    let p = nearest_boundary_point(&e, [1.0, 0.0]).unwrap();
    let spec = KernelSpec64::new(0.5, 2, 4.0, NearFieldRule::CellAveraged).unwrap();
    let opts = CurvatureOptions { truncated: true, ..Default::default() };
    // a radius beyond the diameter only drops the far complement, worth
    // |S^1| R^{-s} / s
    let full = mean_curvature(&e, &p, &spec).unwrap();
    let trunc = mean_curvature_with(&e, &p, &spec, opts).unwrap();
    let tail = 2.0 * PI * 4f64.powf(-0.5) / 0.5;
    assert!((full - trunc - tail).abs() < 1e-6 * full, "{full} {trunc} {tail}");
}

#[test]
fn normal_translation_shrinks_disc_and_interval() {
    let g = square(96, 1.5);
    let h = g.spacing();
    let e = disc(g, [0.0, 0.0], 1.0);
    let moved = translate_along_normal(&e, 0.25, |_| 1.0).unwrap();
    for bp in boundary_points(&moved).unwrap() {
        let r = bp.position[0].hypot(bp.position[1]);
        assert!((r - 0.75).abs() < h, "radius {r}");
    }

    let g = line(256, 2.0);
    let e = LevelSet::from_fn(g, |x| 1.0 - x[0].abs());
    let moved = translate_along_normal(&e, 0.5, |_| 1.0).unwrap();
    let pts = boundary_points(&moved).unwrap();
    assert_eq!(pts.len(), 2);
    for bp in pts {
        assert!((bp.position[0].abs() - 0.5).abs() < 1e-9, "{:?}", bp.position);
    }
}

#[test]
fn first_variation_on_disc_ellipse_and_half_plane() {
    let s = 0.5;
    let spec = spec2(s);
    let deltas = [0.0, 0.025, 0.05, 0.075, 0.1];

    let g = square(128, 1.5);
    let e = disc(g, [0.0, 0.0], 1.0);
    let p = nearest_boundary_point(&e, [0.6, 0.8]).unwrap();
    let rep = first_variation_check(&e, &p, &spec, &deltas, CurvatureOptions::default()).unwrap();
    // for B_R the slope is s R^{-s-1} H_1
    let want = s * unit_disc_curvature(s);
    assert!(rep.relative_mismatch < 0.05, "{rep:?}");
    assert!((rep.formula_slope / want - 1.0).abs() < 0.01, "{} vs {want}", rep.formula_slope);

    let e = LevelSet::from_fn(g, |x| 1.0 - (x[0] * x[0] / 1.0 + x[1] * x[1] / 0.25).sqrt());
    let p = nearest_boundary_point(&e, [0.0, 0.5]).unwrap();
    let rep = first_variation_check(&e, &p, &spec, &deltas, CurvatureOptions::default()).unwrap();
    assert!(rep.relative_mismatch < 0.10, "{rep:?}");

    let g = square(64, 1.0);
    let e = LevelSet::from_fn(g, |x| -x[0]);
    let p = nearest_boundary_point(&e, [0.0, 0.0]).unwrap();
    let opts = CurvatureOptions { allow_open: true, ..Default::default() };
    let rep = first_variation_check(&e, &p, &spec, &[0.0, 0.05, 0.1], opts).unwrap();
    assert!(rep.fd_slope.abs() < 1e-6 && rep.formula_slope.abs() < 1e-9, "{rep:?}");
}

#[test]
fn boundary_distance_and_support_radius() {
    let g = square(96, 1.5);
    let h = g.spacing();
    let outer = disc(g, [0.0, 0.0], 1.0);
    let inner = disc(g, [0.0, 0.0], 0.6);
    let d = boundary_distance(&outer, &inner).unwrap();
    assert!((d - 0.4).abs() < h, "{d}");
    let r = support_radius(&outer, [0.0, 0.0]);
    assert!(r <= 1.0 && r > 1.0 - h, "{r}");
    assert_eq!(support_radius(&LevelSet::empty(g), [0.0, 0.0]), 0.0);
}

#[test]
fn el_residual_refuses_trivial_levels() {
    let g = square(32, 1.0);
    let spec = spec2(0.5);
    let u = Field64::from_fn(g, |x| 1.0 - x[0].hypot(x[1])).unwrap();
    assert!(el_residual(&u, &u, 5.0, &spec).is_err());
    assert!(el_residual(&u, &u, -5.0, &spec).is_err());
    let r = el_residual(&u, &u, 0.5, &spec).unwrap();
    assert!(r.points > 0 && r.max_residual.is_finite() && !r.under_resolved);
}

#[test]
fn minimality_of_zero_solution() {
    let g = Grid64::new_2d([12, 12], 1.0 / 12.0, [0.0, 0.0]).unwrap();
    let spec = KernelSpec64::new(0.5, 2, 3.0 / 12.0, NearFieldRule::CellAveraged).unwrap();
    let w = build_pair_weights(&g, &spec).unwrap().with_zero_extension();
    let f = Field64::constant(g, 0.0);
    let sol = minimize(&f, &w, &SolverOptions::default()).unwrap();
    for t in [-0.5, 0.5] {
        let m = levelset_minimality_margin(&sol, &f, t, &w, &CompetitorSpec::default()).unwrap();
        assert!(m.margin > 0.0 && m.passed(), "t={t}: {m:?}");
    }
}

#[test]
fn minimality_of_1d_step_levels() {
    let g = Grid64::new_1d(16, 1.0 / 16.0, 0.5 / 16.0).unwrap();
    let spec = KernelSpec64::new(0.5, 1, 4.0 / 16.0, NearFieldRule::CellAveraged).unwrap();
    let f = synth_field(&SynthKind::Step { height: 10.0, center: [0.5, 0.0], half_width: 0.2 }, &g).unwrap();
    for w in [build_pair_weights(&g, &spec).unwrap(), build_pair_weights(&g, &spec).unwrap().with_zero_extension()] {
        let sol = minimize(&f, &w, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        for t in midpoint_thresholds(&sol.u, 1e-9) {
            let m = levelset_minimality_margin(&sol, &f, t, &w, &CompetitorSpec::default()).unwrap();
            assert!(m.passed(), "t={t}: {m:?}");
            assert!(m.margin >= -1e-6, "t={t}: {m:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn superlevel_sets_are_nested(v in prop::collection::vec(-5.0f64..5.0, 64), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let g = Grid64::new_2d([8, 8], 0.125, [0.0, 0.0]).unwrap();
        let u = Field64::new(g, v).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let upper = superlevel_set(&u, hi).unwrap();
        let lower = superlevel_set(&u, lo).unwrap();
        prop_assert!(upper.is_subset_of(&lower).unwrap());
    }
}
