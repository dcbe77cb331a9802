use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use rand::SeedableRng;

use swarm_fusion::maxflow::binary_fusion_graphcut;
use swarm_fusion::model::{build_random_mrf, build_synthetic_stereo, from_fixed, EnergyModel};
use swarm_fusion::proposals::{constant_label_generator, ProposalGenerator};
use swarm_fusion::swarm::{
    cfg_ae, cfg_hfm, cfg_pae, cfg_pfm, cfg_sf, cfg_sf_mf, cfg_sf_ss, initial_labeling, label_blocks,
    label_order, run, run_swarm, EnergyTrace, SolutionPool, Stall, SwarmConfig,
};
use swarm_fusion::{Error, Labeling, SwarmRng};

fn all_architectures(n: usize) -> Vec<SwarmConfig> {
    vec![
        cfg_ae(),
        cfg_pae(n).unwrap(),
        cfg_pfm(n, None).unwrap(),
        cfg_hfm(n, 12).unwrap(),
        cfg_sf_mf(n).unwrap(),
        cfg_sf_ss(n, 2).unwrap(),
        cfg_sf(n, 2, 1).unwrap(),
    ]
}

fn assert_monotone(t: &EnergyTrace, what: &str) {
    for w in t.workers() {
        let e: Vec<f64> = t.worker(w).map(|r| r.energy).collect();
        assert!(e.windows(2).all(|p| p[1] <= p[0]), "{what}: worker {w} {e:?}");
    }
    let best: Vec<f64> = t.records().iter().map(|r| r.best_energy).collect();
    assert!(best.windows(2).all(|p| p[1] <= p[0]), "{what}: best column");
}

#[test]
fn zero_budget_records_only_initialization() {
    let m = build_random_mrf(6, 5, 4, false, 2).unwrap();
    for c in all_architectures(3) {
        let out = run(&c.clone().with_budget(Duration::ZERO), &m).unwrap();
        let t = &out.trace;
        assert_eq!(t.len(), c.threads, "{}", c.name);
        assert!(t.records().iter().all(|r| r.iteration == 0));
        assert_eq!(t.fusion_rows(), 0);
        assert_eq!(Some(out.cost()), t.final_best());
        for w in 0..c.threads {
            let init = initial_labeling(&c, &m, w);
            let e = m.evaluate(&init).unwrap();
            assert_eq!(t.worker(w).next().unwrap().energy, e);
        }
    }
}

#[test]
fn traces_are_monotone_for_every_architecture() {
    let m = build_random_mrf(8, 6, 5, false, 4).unwrap();
    for seed in 0..20 {
        for c in all_architectures(3) {
            let c = c
                .with_seed(seed)
                .with_budget(Duration::from_secs(5))
                .with_max_iterations(8);
            let out = run(&c, &m).unwrap();
            assert_monotone(&out.trace, &c.name);
            assert_eq!(m.evaluate_fixed(&out.best).unwrap(), out.best_energy);
            assert_eq!(Some(out.cost()), out.trace.final_best(), "{}", c.name);
        }
    }
}

#[test]
fn deterministic_runs_repeat() {
    let (m, _) = build_synthetic_stereo(16, 12, 8, 1.0, 5).unwrap();
    for c in all_architectures(3) {
        let c = c.with_deterministic(true).with_max_iterations(10).with_seed(11);
        let key = |t: &EnergyTrace| {
            t.records()
                .iter()
                .map(|r| (r.worker, r.iteration, r.energy.to_bits()))
                .collect::<Vec<_>>()
        };
        let a = run(&c, &m).unwrap();
        let b = run(&c, &m).unwrap();
        assert_eq!(key(&a.trace), key(&b.trace), "{}", c.name);
        assert_eq!(a.best, b.best);
    }
}

#[test]
fn single_worker_swarm_is_alpha_expansion() {
    let (m, _) = build_synthetic_stereo(12, 10, 6, 1.0, 9).unwrap();
    let c = cfg_ae()
        .with_seed(3)
        .with_stall(Stall::Off)
        .with_max_iterations(18);
    let out = run(&c, &m).unwrap();
    let order = label_order(&c, &m).unwrap();
    let mut x = initial_labeling(&c, &m, 0);
    let mut expected = vec![m.evaluate(&x).unwrap()];
    for k in 0..18 {
        x = binary_fusion_graphcut(&m, &x, &Labeling::constant(m.num_vars(), order[k % 6])).unwrap();
        expected.push(from_fixed(m.evaluate_fixed(&x).unwrap()));
    }
    let got: Vec<f64> = out.trace.worker(0).map(|r| r.energy).collect();
    assert_eq!(got, expected);
    assert_eq!(out.best, x);
}

#[test]
fn parallel_expansion_blocks_partition_the_labels() {
    for (l, n) in [(8, 3), (5, 5), (16, 4), (7, 2)] {
        let order: Vec<usize> = (0..l).rev().collect();
        let blocks = label_blocks(&order, n);
        assert_eq!(blocks.len(), n);
        let sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(blocks.concat(), order);
    }
    let m = build_random_mrf(3, 3, 2, false, 0).unwrap();
    assert!(matches!(run(&cfg_pae(3).unwrap(), &m), Err(Error::Config(_))));
}

#[test]
fn runs_stop_near_their_budget() {
    let (m, _) = build_synthetic_stereo(40, 30, 16, 1.0, 1).unwrap();
    for c in [cfg_sf_mf(2).unwrap(), cfg_pfm(2, None).unwrap(), cfg_hfm(2, 64).unwrap()] {
        let c = c.with_budget(Duration::from_millis(200)).with_stall(Stall::Off);
        let start = Instant::now();
        run(&c, &m).unwrap();
        assert!(start.elapsed() < Duration::from_secs(3), "{} took {:?}", c.name, start.elapsed());
    }
}

#[test]
fn stall_detection_ends_converged_runs() {
    let m = build_random_mrf(4, 4, 3, true, 7).unwrap();
    let c = cfg_sf_mf(2).unwrap().with_budget(Duration::from_secs(30));
    let start = Instant::now();
    let out = run(&c, &m).unwrap();
    assert!(start.elapsed() < Duration::from_secs(10));
    assert!(out.iterations.iter().sum::<usize>() > 0);
}

#[test]
fn generator_count_must_match_threads() {
    let m = build_random_mrf(3, 3, 3, false, 0).unwrap();
    let gens: Vec<Box<dyn ProposalGenerator>> =
        vec![Box::new(constant_label_generator(vec![0, 1, 2]).unwrap())];
    let c = cfg_sf_mf(2).unwrap();
    assert!(matches!(run_swarm(&c, &m, gens), Err(Error::Contract(_))));
}

#[test]
fn pool_survives_concurrent_readers_and_writers() {
    let m = build_random_mrf(6, 6, 4, false, 1).unwrap();
    let pool = SolutionPool::new(&m, 4).unwrap();
    let label = |w: usize, i: usize| Labeling::constant(36, (w + i) % 4);
    for w in 0..4 {
        let l = label(w, 0);
        pool.publish(w, w, l.clone(), m.evaluate_fixed(&l).unwrap()).unwrap();
    }
    let done = AtomicBool::new(false);
    thread::scope(|s| {
        for w in 0..4 {
            let (pool, m) = (&pool, &m);
            s.spawn(move || {
                for i in 1..=200 {
                    let l = label(w, i);
                    let v = pool.publish(w, w, l.clone(), m.evaluate_fixed(&l).unwrap()).unwrap();
                    assert_eq!(v, i as u64 + 1);
                }
            });
        }
        for r in 0..2 {
            let (pool, m, done) = (&pool, &m, &done);
            s.spawn(move || {
                let mut rng = SwarmRng::seed_from_u64(r);
                let mut seen = [0u64; 4];
                while !done.load(Ordering::Relaxed) {
                    for snap in pool.sample(3, &mut rng, r as usize).unwrap() {
                        assert_eq!(m.evaluate_fixed(&snap.labeling).unwrap(), snap.energy);
                        assert!(snap.version >= seen[snap.slot]);
                        seen[snap.slot] = snap.version;
                        assert_ne!(snap.slot, r as usize);
                    }
                }
            });
        }
        thread::sleep(Duration::from_millis(50));
        while (0..4).any(|w| pool.version(w) < 201) {
            thread::yield_now();
        }
        done.store(true, Ordering::Relaxed);
    });
    for w in 0..4 {
        let s = pool.snapshot(w).unwrap();
        assert_eq!(s.version, 201);
        assert_eq!(s.labeling, label(w, 200));
    }
}

#[test]
fn foreign_publish_is_a_contract_violation() {
    let m = build_random_mrf(2, 2, 2, false, 1).unwrap();
    let pool = SolutionPool::new(&m, 2).unwrap();
    let l = Labeling::constant(4, 0);
    let e = m.evaluate_fixed(&l).unwrap();
    assert!(matches!(pool.publish(0, 1, l.clone(), e), Err(Error::Contract(_))));
    assert!(matches!(pool.publish(2, 2, l, e), Err(Error::Contract(_))));
}

fn small_model(seed: u64) -> EnergyModel {
    build_random_mrf(5, 4, 4, false, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn swarm_best_is_no_worse_than_any_start(seed in any::<u64>(), n in 2usize..5, beta in 0usize..4) {
        prop_assume!(beta < n);
        let m = small_model(seed);
        let c = cfg_sf(n, 1, beta).unwrap().with_seed(seed).with_max_iterations(6);
        let out = run(&c, &m).unwrap();
        for w in 0..n {
            let init = m.evaluate_fixed(&initial_labeling(&c, &m, w)).unwrap();
            prop_assert!(out.best_energy <= init);
        }
        let workers: BTreeSet<usize> = out.trace.records().iter().map(|r| r.worker).collect();
        prop_assert_eq!(workers.len(), n);
    }

    #[test]
    fn trace_csv_round_trips(seed in any::<u64>()) {
        let m = small_model(seed);
        let c = cfg_sf_mf(3).unwrap().with_seed(seed).with_max_iterations(4);
        let t = run(&c, &m).unwrap().trace;
        let back = EnergyTrace::from_csv(&t.to_csv()).unwrap();
        prop_assert_eq!(back.len(), t.len());
        for (a, b) in back.records().iter().zip(t.records()) {
            prop_assert_eq!(a.energy.to_bits(), b.energy.to_bits());
            prop_assert_eq!(a.best_energy.to_bits(), b.best_energy.to_bits());
            prop_assert_eq!((a.worker, a.iteration), (b.worker, b.iteration));
        }
    }
}
