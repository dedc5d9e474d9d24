use rand::Rng;
use stacked_contact::coupling::couple_contact_lower;
use stacked_contact::meanfield::{mf_integrate, mf_integrate_sampled, MFState};
use stacked_contact::rng::{child_seed, rng_from_seed};
use stacked_contact::{Configuration, ParamSet, State, Trajectory};

/// Direct Gillespie simulation of a contact process on a ring (birth
/// `lambda` split over two neighbours, death `death`), all sites occupied at
/// time 0. Returns the extinction time.
fn gillespie_extinction(m: usize, lambda: f64, death: f64, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut occ: Vec<usize> = (0..m).collect();
    let mut pos: Vec<Option<usize>> = (0..m).map(Some).collect();
    let mut t = 0.0;
    while !occ.is_empty() {
        let rate = occ.len() as f64 * (lambda + death);
        t += -(1.0 - rng.random::<f64>()).ln() / rate;
        let x = occ[rng.random_range(0..occ.len())];
        if rng.random::<f64>() * (lambda + death) < death {
            let i = pos[x].take().unwrap();
            occ.swap_remove(i);
            if i < occ.len() {
                pos[occ[i]] = Some(i);
            }
        } else {
            let y = if rng.random::<bool>() { (x + 1) % m } else { (x + m - 1) % m };
            if pos[y].is_none() {
                pos[y] = Some(occ.len());
                occ.push(y);
            }
        }
    }
    t
}

fn extinction_time(traj: &Trajectory) -> Option<f64> {
    if traj.final_state().occupied_count() > 0 {
        return None;
    }
    traj.changes().last().map(|c| c.time)
}

fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn lower_contact_process_matches_gillespie_in_law() {
    let (m, lambda0, delta) = (12, 1.5, 1.0);
    let p = ParamSet::one_dim(2.0, 3.0, delta, m).unwrap();
    let n = 400;
    let mut ours = Vec::with_capacity(n);
    for k in 0..n as u64 {
        let xi = Configuration::uniform(p.geometry(), State::Infected);
        let eta = xi.clone();
        let (_, traj_eta, r) = couple_contact_lower(lambda0, &p, xi, eta, 60.0, child_seed(3, k)).unwrap();
        assert!(r.holds);
        ours.push(extinction_time(&traj_eta).expect("extinct by the horizon"));
    }
    let mut theirs: Vec<f64> = (0..n as u64)
        .map(|k| gillespie_extinction(m, lambda0, 1.0 + delta, child_seed(4, k)))
        .collect();
    let d = ks_statistic(&mut ours, &mut theirs);
    // two-sample critical value at level 0.001
    let crit = 1.949 * (2.0 / n as f64).sqrt();
    assert!(d < crit, "KS distance {d} >= {crit}");
}

fn logistic(u0: f64, l1: f64, t: f64) -> f64 {
    if l1 == 1.0 {
        return u0 / (1.0 + u0 * t);
    }
    let r = l1 - 1.0;
    let k = 1.0 - 1.0 / l1;
    k * u0 * (r * t).exp() / (k + u0 * ((r * t).exp() - 1.0))
}

#[test]
fn host_density_solves_the_logistic_equation() {
    for (l1, l2, d) in [(4.0, 8.0, 2.0), (1.0, 3.0, 0.5), (2.5, 0.0, 0.0), (0.7, 5.0, 1.0)] {
        let p = ParamSet::one_dim(l1, l2, d, 3).unwrap();
        let s0 = MFState::new(0.2, 0.1).unwrap();
        let tr = mf_integrate_sampled(s0, &p, 10.0, 1e-3, 0.5).unwrap();
        for (t, s) in &tr.samples {
            let exact = logistic(0.3, l1, *t);
            assert!((s.hosts() - exact).abs() < 1e-9, "l1={l1} t={t}: {} vs {exact}", s.hosts());
        }
    }
}

#[test]
fn halving_the_step_changes_little() {
    for (l1, l2, d) in [(4.0, 8.0, 2.0), (4.0, 2.0, 2.0), (0.8, 1.0, 1.0)] {
        let p = ParamSet::one_dim(l1, l2, d, 3).unwrap();
        let s0 = MFState::new(0.1, 0.1).unwrap();
        let a = mf_integrate(s0, &p, 50.0, 1e-3).unwrap().last();
        let b = mf_integrate(s0, &p, 50.0, 5e-4).unwrap().last();
        assert!((a.u1 - b.u1).abs() < 1e-8 && (a.u2 - b.u2).abs() < 1e-8);
    }
}

#[test]
fn infection_on_the_host_manifold_is_logistic() {
    // with u1 + u2 = u* the infected density solves u2' = (λ2 (u* - u2) - δ) u2
    let p = ParamSet::one_dim(4.0, 8.0, 2.0, 3).unwrap();
    let s0 = MFState::new(0.7, 0.05).unwrap();
    let tr = mf_integrate_sampled(s0, &p, 5.0, 1e-3, 1.0).unwrap();
    let (r, k) = (8.0 * 0.75 - 2.0, 0.75 - 0.25);
    for (t, s) in &tr.samples {
        let exact = k * 0.05 * (r * t).exp() / (k + 0.05 * ((r * t).exp() - 1.0));
        assert!((s.u2 - exact).abs() < 1e-9);
    }
}
