use stacked_contact::lattice::Geometry;
use stacked_contact::par::Exec;
use stacked_contact::renorm::{
    estimate_gadget_probs_mc, gadget_event_probs, oriented_percolation_wet, survival_gadget_params, EdgeRule, Extent,
};
use stacked_contact::{BoxPartition, ParamSet};

#[test]
fn reduced_neighborhoods_are_sandwiched() {
    for dim in [1usize, 2] {
        for range in [5usize, 10] {
            for eps in [0.1, 0.2] {
                let l = (eps * range as f64).floor() as usize;
                if l == 0 {
                    continue;
                }
                let side = (4 * range + 4).div_ceil(2 * l) * 2 * l;
                let p = ParamSet::new(1.0, 1.0, 1.0, range, dim, side).unwrap();
                let part = BoxPartition::new(eps, &p).unwrap();
                let g: Geometry = p.geometry();
                let inner = ((1.0 - 4.0 * eps) * range as f64).floor() as usize;
                for x in 0..g.volume() {
                    for y in 0..g.volume() {
                        let d = g.sup_distance(x, y);
                        let inside = x != y && part.in_reduced_neighborhood(x, y);
                        if x != y && d <= inner {
                            assert!(inside, "d={dim} L={range} eps={eps}: {x} {y}");
                        }
                        if inside {
                            assert!(d <= range);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn gadget_identity() {
    for k in 1..10 {
        let eps = k as f64 / 10.0;
        let (t, l) = survival_gadget_params(eps).unwrap();
        let lhs = (-12.0 * t).exp() * (1.0 - (-l * t).exp());
        assert!((lhs - (1.0 - eps / 4.0).powi(2)).abs() < 1e-12);
    }
}

#[test]
fn gadget_monte_carlo_agrees() {
    let probs = gadget_event_probs(0.05, 50.0, 10.0, 1.0, 2).unwrap();
    let est = estimate_gadget_probs_mc(0.05, 50.0, 10.0, 1.0, 20_000, 11, Exec::Parallel).unwrap();
    assert!(est.a1.agrees_with(probs.a1, 4.0));
    assert!(est.a2.agrees_with(probs.a2, 4.0));
    assert!(est.single.agrees_with(probs.p_single, 4.0));
    assert!(est.a4_time.agrees_with(probs.a4_time, 4.0));
    assert!(est.a4_race.agrees_with(probs.a4_race, 4.0));
    let no_recovery = estimate_gadget_probs_mc(0.05, 50.0, 10.0, 0.0, 2000, 12, Exec::Sequential).unwrap();
    assert_eq!(no_recovery.a3.mean, 1.0);
}

#[test]
fn wet_sets_grow_with_p() {
    let e = Extent { width: 40, levels: 40 };
    for rule in [EdgeRule::Survival, EdgeRule::Extinction] {
        for seed in 0..10 {
            let f = oriented_percolation_wet(0.3, rule, e, seed).unwrap();
            let mut prev = f.clone();
            for p in [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0] {
                let g = f.with_p(p);
                for (z, n) in prev.wet_sites() {
                    assert!(g.is_wet(z, n), "{rule:?} seed {seed} p {p}");
                }
                prev = g;
            }
        }
    }
}

#[test]
fn supercritical_survival_percolation_reaches_far() {
    let e = Extent { width: 100, levels: 101 };
    let reached = (0..1000)
        .filter(|&s| oriented_percolation_wet(0.9, EdgeRule::Survival, e, s).unwrap().reaches_level(100))
        .count();
    assert!(reached > 500, "{reached}");
}
