use dpsac_core::cluster::{
    cluster_batch, elbow_select, kmeans_1d_dp, merge_clusters, Cluster, IdGen, Member,
};
use dpsac_core::load::{load_distribution, transition_matrix};
use dpsac_core::model::{catalog_app, AppId, BatchEntry, ScenarioSpec, SystemConfig};
use dpsac_core::partition::{compute_shares, repartition, ClusterLoad, Lineage};
use dpsac_core::scheduler::{
    priority_order, schedule_bios, schedule_cluster, PendingApp, PoolState, ScheduleOptions,
    Strategy as Priority,
};
use dpsac_core::sim::{run, SchedulerKind, SimConfig};
use dpsac_core::updater::{
    js_divergence_probs, OkEvent, OnlineKMeansState, SimpleThresholdState, Updater, UpdaterConfig,
    UpdaterKind,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn apps_strategy(max: usize, p_max: f64) -> impl Strategy<Value = Vec<(u32, f64)>> {
    prop::collection::vec((1u32..=8, 0.0..=p_max), 1..=max)
}

fn members(lengths: &[f64]) -> Vec<Member> {
    lengths
        .iter()
        .enumerate()
        .map(|(i, &length)| Member {
            app: AppId(i as u32),
            length,
        })
        .collect()
}

fn total_members(clusters: &[Cluster]) -> usize {
    clusters.iter().map(Cluster::len).sum()
}

fn strategy_strategy() -> impl Strategy<Value = Priority> {
    prop_oneof![
        Just(Priority::MinDilation),
        Just(Priority::MaxSysEff),
        (0.0..=1.0f64).prop_map(|gamma| Priority::MinMax { gamma }),
    ]
}

fn pending_strategy() -> impl Strategy<Value = Vec<PendingApp>> {
    prop::collection::vec((1u32..=160, 0u32..5, 0.0..100.0f64, 0.5..0.999f64), 0..8).prop_map(
        |raw| {
            raw.into_iter()
                .enumerate()
                .map(|(i, (b, done, release, rho))| PendingApp {
                    id: AppId(i as u32),
                    bandwidth: b,
                    nodes: b,
                    release,
                    compute_work: 1000.0 * rho,
                    dedicated_efficiency: rho,
                    completed: done,
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_rows_are_stochastic(apps in apps_strategy(8, 1.0), cap in 0u32..40, drain in 0u32..20) {
        let dist = load_distribution(&apps).unwrap();
        let m = transition_matrix(&dist, cap, drain);
        for row in m.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn add_remove_round_trip(apps in prop::collection::vec((1u32..=8, 0.0..=0.99f64), 6), idx in 0usize..6) {
        let full = load_distribution(&apps).unwrap();
        let mut d = full.clone();
        let (b, p) = apps[idx];
        d.remove_app(b, p).unwrap();
        d.add_app(b, p).unwrap();
        prop_assert_eq!(d.pmf().len(), full.pmf().len());
        for (x, y) in d.pmf().iter().zip(full.pmf()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn tail_is_non_increasing(apps in apps_strategy(8, 1.0), a in -2.0..60.0f64, b in -2.0..60.0f64) {
        let dist = load_distribution(&apps).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(dist.tail(lo) >= dist.tail(hi));
    }

    #[test]
    fn wss_curve_never_increases(mut values in prop::collection::vec(0.0..500.0f64, 1..30)) {
        values.sort_by(f64::total_cmp);
        let k = values.len().min(6);
        let curve = kmeans_1d_dp(&values, k).unwrap().wss_curve();
        for w in curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        let chosen = elbow_select(&curve).unwrap();
        prop_assert!((1..=curve.len()).contains(&chosen));
    }

    #[test]
    fn batch_clustering_and_merging_keep_members(
        a in prop::collection::vec(1.0..300.0f64, 1..20),
        b in prop::collection::vec(1.0..300.0f64, 1..20),
    ) {
        let mut ids = IdGen::default();
        let first = cluster_batch(&members(&a), 5, &mut ids).unwrap();
        prop_assert!(first.len() <= 5);
        prop_assert_eq!(total_members(&first), a.len());
        let second = cluster_batch(&members(&b), 5, &mut ids).unwrap();
        let merged = merge_clusters(second, first);
        prop_assert_eq!(total_members(&merged), a.len() + b.len());
        prop_assert!(merged.iter().all(|c| !c.is_empty()));
    }

    #[test]
    fn split_keeps_union(values in prop::collection::vec(1.0..300.0f64, 2..20)) {
        let mut ids = IdGen::default();
        let c = Cluster::new(ids.next_id(), members(&values)).unwrap();
        if let Some((lo, hi)) = c.split_at_largest_gap(&mut ids) {
            prop_assert!(!lo.is_empty() && !hi.is_empty());
            prop_assert_eq!(lo.len() + hi.len(), c.len());
            prop_assert!(lo.max_length() <= hi.min_length());
        } else {
            prop_assert_eq!(c.min_length(), c.max_length());
        }
    }

    #[test]
    fn shares_never_overallocate(eios in prop::collection::vec(0.001..50.0f64, 1..8)) {
        let system = SystemConfig::default();
        let loads: Vec<ClusterLoad> = eios.iter().enumerate().map(|(i, &e)| ClusterLoad {
            id: dpsac_core::cluster::ClusterId(i as u32), expected_load: e, centroid: i as f64,
        }).collect();
        let layout = compute_shares(&loads, &system).unwrap();
        let cap: u32 = layout.partitions.iter().map(|p| p.buffer_capacity).sum();
        let drain: u32 = layout.partitions.iter().map(|p| p.drain_budget).sum();
        prop_assert!(cap <= system.buffer_size);
        prop_assert!(drain <= system.pfs_bandwidth);
        let shares: f64 = layout.partitions.iter().map(|p| p.share).sum();
        prop_assert!((shares - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shares_match_global_mean(apps in prop::collection::vec((1u32..=160, 0.001..0.5f64), 1..12), k in 1usize..4) {
        // any grouping of the applications: Σ EIO_k is the global pmf mean
        let groups: Vec<Vec<(f64, u32)>> = (0..k)
            .map(|g| apps.iter().enumerate().filter(|(i, _)| i % k == g).map(|(_, &(b, p))| (p, b)).collect())
            .collect();
        let total: f64 = groups.iter().map(|g| dpsac_core::partition::expected_load(g)).sum();
        let dist = load_distribution(&apps).unwrap();
        prop_assert!((total - dist.mean()).abs() <= 1e-9);
    }

    #[test]
    fn repartition_conserves_bytes(
        eios in prop::collection::vec(0.1..20.0f64, 1..6),
        fill in prop::collection::vec(0.0..1.0f64, 6),
        new_eios in prop::collection::vec(0.1..20.0f64, 1..6),
    ) {
        let system = SystemConfig::default();
        let id = dpsac_core::cluster::ClusterId;
        let old_loads: Vec<ClusterLoad> = eios.iter().enumerate()
            .map(|(i, &e)| ClusterLoad { id: id(i as u32), expected_load: e, centroid: i as f64 })
            .collect();
        let mut old = compute_shares(&old_loads, &system).unwrap().partitions;
        for (p, f) in old.iter_mut().zip(&fill) {
            p.occupancy = p.buffer_capacity as f64 * f;
        }
        // new layout: fresh ids; every old cluster maps to one or two successors
        let new_loads: Vec<ClusterLoad> = new_eios.iter().enumerate()
            .map(|(i, &e)| ClusterLoad { id: id(100 + i as u32), expected_load: e, centroid: i as f64 })
            .collect();
        let mut lineage = Lineage::new();
        for (i, p) in old.iter().enumerate() {
            let a = new_loads[i % new_loads.len()].id;
            let b = new_loads[(i + 1) % new_loads.len()].id;
            lineage.insert(p.cluster, if a == b { vec![a] } else { vec![a, b] });
        }
        let new = repartition(&old, &new_loads, &lineage, &system).unwrap();
        let before: f64 = old.iter().map(|p| p.buffered()).sum();
        let after: f64 = new.partitions.iter().map(|p| p.buffered()).sum();
        prop_assert!((before - after).abs() <= 1e-9);
        for p in &new.partitions {
            prop_assert!(p.occupancy <= p.buffer_capacity as f64 + 1e-9);
            prop_assert!(p.occupancy >= 0.0 && p.drain_debt >= 0.0);
        }
    }

    #[test]
    fn js_bounds_and_symmetry(
        raw in prop::collection::vec((0u32..10, 0u32..10), 1..20),
    ) {
        let p: Vec<f64> = raw.iter().map(|&(a, _)| a as f64).collect();
        let q: Vec<f64> = raw.iter().map(|&(_, b)| b as f64).collect();
        prop_assume!(p.iter().sum::<f64>() > 0.0 && q.iter().sum::<f64>() > 0.0);
        let d = js_divergence_probs(&p, &q).unwrap();
        prop_assert!((0.0..=std::f64::consts::LN_2).contains(&d));
        prop_assert_eq!(d, js_divergence_probs(&q, &p).unwrap());
        prop_assert_eq!(js_divergence_probs(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn st_running_mean(base in prop::collection::vec(10.0..20.0f64, 1..6), extra in prop::collection::vec(10.0..20.0f64, 1..10)) {
        let mut ids = IdGen::default();
        let mut clusters = vec![Cluster::new(ids.next_id(), members(&base)).unwrap()];
        let id = clusters[0].id;
        let c = clusters[0].centroid();
        // an unreachable threshold rules out splits
        let mut st = SimpleThresholdState::new(&clusters, f64::INFINITY, 1);
        for (i, &x) in extra.iter().enumerate() {
            st.insert(&mut clusters, Member { app: AppId(100 + i as u32), length: x }, &mut ids).unwrap();
        }
        let s = base.len() as f64;
        let expected = (c * s + extra.iter().sum::<f64>()) / (s + extra.len() as f64);
        prop_assert!((st.cumulative_centroid(id).unwrap() - expected).abs() <= 1e-9);
    }

    #[test]
    fn ok_facility_cost_and_stable_centers(
        lengths in prop::collection::vec(1.0..400.0f64, 1..40),
        seed in 0u64..1000,
    ) {
        let mut ids = IdGen::default();
        let mut clusters = vec![
            Cluster::new(ids.next_id(), members(&[20.0, 25.0])).unwrap(),
            Cluster::new(ids.next_id(), members(&[280.0])).unwrap(),
        ];
        let mut ok = OnlineKMeansState::init(&clusters).unwrap();
        let f1 = ok.first_cost();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, &x) in lengths.iter().enumerate() {
            let before = ok.centers().len();
            let out = ok.insert(&mut clusters, Member { app: AppId(50 + i as u32), length: x }, &mut ids, &mut rng).unwrap();
            prop_assert_eq!(ok.facility_cost(), f1 * 2f64.powi(ok.epoch() as i32 - 1));
            if out.retired.is_none() {
                prop_assert!(ok.centers().len() >= before);
            }
        }
        // arrivals exactly at existing centers never change the set
        let centers: Vec<f64> = ok.centers().iter().map(|c| c.value).collect();
        for (i, &v) in centers.iter().enumerate() {
            let change = ok.update(OkEvent::Arrive(Member { app: AppId(900 + i as u32), length: v }), &mut ids, &mut rng);
            prop_assert!(change.added.is_none());
        }
        let after: Vec<f64> = ok.centers().iter().map(|c| c.value).collect();
        prop_assert_eq!(centers, after);
    }

    #[test]
    fn updaters_account_for_every_application(
        ops in prop::collection::vec((1.0..400.0f64, any::<bool>()), 1..60),
        kind in prop_oneof![Just(UpdaterKind::SimpleThreshold), Just(UpdaterKind::DistributionThreshold), Just(UpdaterKind::OnlineKMeans)],
    ) {
        let mut ids = IdGen::default();
        let mut clusters = cluster_batch(&members(&[20.0, 23.4, 25.0, 125.0, 140.0, 234.0, 280.0]), 5, &mut ids).unwrap();
        let mut updater = Updater::new(kind, &UpdaterConfig::default(), &clusters);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut live: Vec<u32> = (0..7).collect();
        for (i, &(length, remove)) in ops.iter().enumerate() {
            if remove && live.len() > 1 {
                let app = live.remove(i % live.len());
                updater.remove(&mut clusters, AppId(app), &mut ids, &mut rng).unwrap();
            } else {
                let app = 100 + i as u32;
                updater.insert(&mut clusters, Member { app: AppId(app), length }, &mut ids, &mut rng).unwrap();
                live.push(app);
            }
            prop_assert_eq!(total_members(&clusters), live.len());
            for &app in &live {
                prop_assert_eq!(clusters.iter().filter(|c| c.contains(AppId(app))).count(), 1);
            }
        }
    }

    #[test]
    fn priority_order_is_a_deterministic_permutation(
        pending in pending_strategy(),
        strategy in strategy_strategy(),
    ) {
        let a = priority_order(&pending, strategy, 500.0).unwrap();
        let b = priority_order(&pending, strategy, 500.0).unwrap();
        prop_assert_eq!(&a, &b);
        let mut sorted = a.clone();
        sorted.sort();
        prop_assert_eq!(sorted, (0..pending.len()).collect::<Vec<_>>());
        let md = priority_order(&pending, Priority::MinDilation, 500.0).unwrap();
        let ms = priority_order(&pending, Priority::MaxSysEff, 500.0).unwrap();
        prop_assert_eq!(priority_order(&pending, Priority::MinMax { gamma: 1.0 }, 500.0).unwrap(), md);
        prop_assert_eq!(priority_order(&pending, Priority::MinMax { gamma: 0.0 }, 500.0).unwrap(), ms);
    }

    #[test]
    fn allocations_respect_caps(
        pending in pending_strategy(),
        strategy in strategy_strategy(),
        probs in prop::collection::vec(0.0..1.0f64, 8),
        fill in 0.0..1.0f64,
        capacity in 0u32..300,
        budget in 1u32..100,
        dt in 1.0..300.0f64,
        seed in 0u64..100,
        literal in any::<bool>(),
    ) {
        let dist = load_distribution(
            &pending.iter().zip(&probs).map(|(a, &p)| (a.bandwidth, p)).collect::<Vec<_>>(),
        ).unwrap();
        let pool = PoolState {
            occupancy: capacity as f64 * fill,
            debt: 0.0,
            capacity: capacity as f64,
            drain_budget: budget as f64,
            dt,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = ScheduleOptions { literal_feasibility: literal };
        let cluster = schedule_cluster(&pending, &dist, &pool, strategy, 500.0, opts, &mut rng).unwrap();
        let bios = schedule_bios(&pending, &pool, strategy, 500.0).unwrap();
        for alloc in [&cluster, &bios] {
            prop_assert!(alloc.pfs_usage() <= budget as f64 + 1e-9);
            prop_assert!(pool.occupancy + alloc.buffer_total() * dt <= pool.capacity + 1e-6);
            for r in &alloc.rates {
                let app = pending.iter().find(|a| a.id == r.app).unwrap();
                prop_assert!(r.pfs_rate >= 0.0 && r.buffer_rate >= 0.0);
                prop_assert!(r.total() <= app.bandwidth as f64 + 1e-9);
            }
            prop_assert!(alloc.drain_rate >= 0.0);
        }
    }

    #[test]
    fn uncongested_allocation_ignores_the_rng(pending in pending_strategy(), seed in 0u64..100) {
        let demand: u32 = pending.iter().map(|a| a.bandwidth).sum();
        let pool = PoolState { occupancy: 5.0, debt: 0.0, capacity: 300.0, drain_budget: demand.max(1) as f64, dt: 20.0 };
        let dist = load_distribution(&pending.iter().map(|a| (a.bandwidth, 0.5)).collect::<Vec<_>>()).unwrap();
        let opts = ScheduleOptions::default();
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = ChaCha8Rng::seed_from_u64(seed + 1);
        let a = schedule_cluster(&pending, &dist, &pool, Priority::default(), 500.0, opts, &mut r1).unwrap();
        let b = schedule_cluster(&pending, &dist, &pool, Priority::default(), 500.0, opts, &mut r2).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn small_scenario(picks: &[(usize, u32)]) -> ScenarioSpec {
    let names = ["EAP", "LAP", "VPIC", "Silverton", "LAP5", "EAP10", "VPIC10", "Silverton0.5"];
    ScenarioSpec {
        name: "random".into(),
        initial_batch: picks
            .iter()
            .map(|&(i, count)| BatchEntry {
                spec: catalog_app(names[i % names.len()]).unwrap().with_instances(2),
                count,
            })
            .collect(),
        periodic_joins: Vec::new(),
        join_until: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulations_hold_invariants(
        picks in prop::collection::vec((0usize..8, 1u32..4), 1..5),
        kind in prop_oneof![Just(SchedulerKind::Dpsac), Just(SchedulerKind::Mcios), Just(SchedulerKind::Bios)],
        updater in prop_oneof![Just(UpdaterKind::SimpleThreshold), Just(UpdaterKind::DistributionThreshold), Just(UpdaterKind::OnlineKMeans)],
        seed in 0u64..1000,
    ) {
        let scenario = small_scenario(&picks);
        let config = SimConfig { scheduler: kind, updater, ..SimConfig::default() };
        let r = run(&scenario, &config, seed).unwrap();
        prop_assert!(r.invariants_hold(), "{:?}", r.invariants);
        prop_assert!(r.dilation() >= 1.0);
        for app in &r.apps {
            prop_assert!(app.efficiency <= app.dedicated_efficiency + 1e-12);
        }
        prop_assert_eq!(run(&scenario, &config, seed).unwrap(), r);
    }

    #[test]
    fn a_lone_application_only_waits_for_bandwidth_and_ticks(
        pick in 0usize..8,
        kind in prop_oneof![Just(SchedulerKind::Dpsac), Just(SchedulerKind::Mcios), Just(SchedulerKind::Bios)],
    ) {
        let scenario = small_scenario(&[(pick, 1)]);
        let spec = &scenario.initial_batch[0].spec;
        let config = SimConfig { scheduler: kind, ..SimConfig::default() };
        let r = run(&scenario, &config, 1).unwrap();
        // per instance: compute, at most one tick of waiting, then the
        // transfer at no less than min(B_i, B)
        let rate = spec.bandwidth.min(config.system.pfs_bandwidth) as f64;
        let bound = spec.instances as f64 * (spec.compute_work + spec.io_time + spec.io_volume() / rate);
        let d = r.apps[0].completion.unwrap();
        prop_assert!(d <= bound + 1e-6, "{} {d} > {bound}", spec.name);
        prop_assert!(d >= spec.instances as f64 * spec.period() - 1e-6);
    }
}
