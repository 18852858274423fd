use bikelane::ingest::{
    decensor, detect_stockouts, geohash_encode, parse_network_str, parse_routes_str, parse_stock_str, parse_trajectories_str,
    synth_instance, synth_network, write_network, write_routes, write_stock, write_trajectories, DecensorOptions, MissingPolicy,
    StockObservation,
};
use bikelane::model::{Origin, Trajectory};
use chrono::{NaiveDate, NaiveDateTime};
use proptest::prelude::*;

const NET: &str = "\
# three segments in a row
s1,100,,113.5 22.2;113.501 22.2
s2,150.5,200
s3,80,
NEIGHBORS
s1,s2
s2,s3
";

/// Bounding box of a geohash, decoded bit by bit.
fn geohash_box(hash: &str) -> ((f64, f64), (f64, f64)) {
    const B32: &str = "0123456789bcdefghjkmnpqrstuvwxyz";
    let (mut lon, mut lat) = ((-180.0, 180.0), (-90.0, 90.0));
    let mut even = true;
    for c in hash.chars() {
        let v = B32.find(c).unwrap();
        for b in (0..5).rev() {
            let r: &mut (f64, f64) = if even { &mut lon } else { &mut lat };
            let mid = (r.0 + r.1) / 2.0;
            if v >> b & 1 == 1 {
                r.0 = mid;
            } else {
                r.1 = mid;
            }
            even = !even;
        }
    }
    (lon, lat)
}

#[test]
fn network_parse_and_round_trip() {
    let net = parse_network_str(NET, "net", 2.0).unwrap();
    assert_eq!(net.len(), 3);
    assert_eq!(net.segment(0).cost, 200.0);
    assert_eq!(net.segment(1).cost, 200.0);
    assert_eq!(net.segment(2).cost, 160.0);
    assert_eq!(net.segment(0).geometry.as_deref(), Some(&[(113.5, 22.2), (113.501, 22.2)][..]));
    assert!(net.are_neighbors(0, 1) && !net.are_neighbors(0, 2));
    let again = parse_network_str(&write_network(&net), "again", 2.0).unwrap();
    assert_eq!(again, net);
}

#[test]
fn trajectory_lines() {
    let net = parse_network_str(NET, "net", 1.0).unwrap();
    let text = "t1,2017-03-05T08:00:00,113.5,22.2,[s1 s2 s3]\n# comment\nt2,2017-03-05 09:15:00,113.6,22.3,[s3 s2],0.5\n";
    let trajs = parse_trajectories_str(text, "trips", &net).unwrap();
    assert_eq!(trajs.len(), 2);
    assert_eq!(trajs[0].segments, vec![0, 1, 2]);
    assert_eq!(trajs[0].weight, 1.0);
    assert_eq!(trajs[1].id, "t2");
    assert_eq!(trajs[1].weight, 0.5);
    let o = trajs[0].origin.as_ref().unwrap();
    assert_eq!((o.lon, o.lat), (113.5, 22.2));
    assert_eq!(o.start, "2017-03-05T08:00:00".parse::<NaiveDateTime>().unwrap());
    let again = parse_trajectories_str(&write_trajectories(&trajs, &net), "again", &net).unwrap();
    assert_eq!(again, trajs);
    assert!(parse_trajectories_str("", "empty", &net).unwrap().is_empty());
}

#[test]
fn trajectory_errors_name_the_line() {
    let net = parse_network_str(NET, "net", 1.0).unwrap();
    let bad = "t1,2017-03-05T08:00:00,113.5,22.2,[s1]\nt2,2017-03-05T08:00:00,113.5,22.2,[]\n";
    let msg = parse_trajectories_str(bad, "trips", &net).unwrap_err().to_string();
    assert!(msg.contains(":2") || msg.contains("line 2"), "{msg}");
    assert!(parse_trajectories_str("t1,2017-03-05T08:00:00,113.5,22.2,[s1 s3]", "x", &net).is_err());
    assert!(parse_trajectories_str("t1,2017-03-05T08:00:00,113.5,22.2,[s1 zz]", "x", &net).is_err());
}

#[test]
fn routes_round_trip() {
    let net = parse_network_str(NET, "net", 1.0).unwrap();
    let text = "a,3,1,-0.5,[s1 s2]\na,3,0,-0.2,[s1 s2 s3]\nb,1,0,0,[s3]\n";
    let ctx = parse_routes_str(text, "routes", &net).unwrap();
    assert_eq!(ctx.ods.len(), 2);
    assert_eq!(ctx.ods[0].demand, 3.0);
    assert_eq!(ctx.ods[0].routes[0].segments, vec![0, 1, 2]);
    assert_eq!(ctx.num_routes(), 3);
    let again = parse_routes_str(&write_routes(&ctx, &net), "again", &net).unwrap();
    assert_eq!(again, ctx);
}

#[test]
fn geohash_reference_values() {
    assert_eq!(geohash_encode(10.40744, 57.64911, 7).unwrap(), "u4pruyd");
    assert_eq!(geohash_encode(0.0, 0.0, 1).unwrap(), "s");
    assert!(geohash_encode(0.0, 0.0, 0).is_err());
    assert!(geohash_encode(181.0, 0.0, 5).is_err());
    assert!(geohash_encode(0.0, -90.5, 5).is_err());
}

proptest! {
    #[test]
    fn geohash_is_prefix_stable_and_contains_the_point(lon in -180.0f64..180.0, lat in -90.0f64..90.0) {
        let h7 = geohash_encode(lon, lat, 7).unwrap();
        let h5 = geohash_encode(lon, lat, 5).unwrap();
        prop_assert!(h7.starts_with(&h5));
        let ((lo0, lo1), (la0, la1)) = geohash_box(&h7);
        prop_assert!(lo0 <= lon && lon <= lo1 && la0 <= lat && lat <= la1);
    }
}

fn day(d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 3, d).unwrap()
}

#[test]
fn stockout_thresholds() {
    let obs: Vec<StockObservation> = [3, 1, 0, 2]
        .iter()
        .enumerate()
        .map(|(p, &a)| StockObservation {
            neighborhood: "wecnv1k".into(),
            period: p as u16,
            day: day(1),
            available: a,
        })
        .collect();
    let at = |t| {
        let s = detect_stockouts(&obs, t);
        (0..4u16).filter(|&p| s.flagged.contains(&("wecnv1k".to_string(), p, day(1)))).collect::<Vec<_>>()
    };
    assert_eq!(at(0), vec![2]);
    assert_eq!(at(1), vec![1, 2]);
    // unobserved periods of the day are flagged and counted
    let s = detect_stockouts(&obs, 0);
    assert!(s.flagged.contains(&("wecnv1k".to_string(), 4, day(1))));
    assert_eq!(s.missing, 140);
}

#[test]
fn stock_file_round_trip_and_validation() {
    let text = "h1,2017-03-01,0,4\nh1,2017-03-01,143,0\n";
    let obs = parse_stock_str(text, "stock").unwrap();
    assert_eq!(parse_stock_str(&write_stock(&obs), "again").unwrap(), obs);
    assert!(parse_stock_str("h1,2017-03-01,144,4", "s").is_err());
    assert!(parse_stock_str("h1,2017-03-01,1,4\nh1,2017-03-01,1,5", "s").is_err());
}

/// Fourteen fully observed days for two neighborhoods: `a` is empty in
/// period 50 on days 2, 5, 9 and 13; `b` is empty in period 50 every day.
struct Fixture {
    hood_a: String,
    hood_b: String,
    a_point: (f64, f64),
    b_point: (f64, f64),
    obs: Vec<StockObservation>,
}

fn fixture() -> Fixture {
    let a_point = (113.5401, 22.2703);
    let b_point = (113.5901, 22.3103);
    let hood_a = geohash_encode(a_point.0, a_point.1, 7).unwrap();
    let hood_b = geohash_encode(b_point.0, b_point.1, 7).unwrap();
    assert_ne!(hood_a, hood_b);
    let out_a = [2, 5, 9, 13];
    let mut obs = Vec::new();
    for d in 1..=14 {
        for p in 0..144u16 {
            let empty_a = p == 50 && out_a.contains(&d);
            obs.push(StockObservation {
                neighborhood: hood_a.clone(),
                period: p,
                day: day(d),
                available: if empty_a { 0 } else { 3 },
            });
            obs.push(StockObservation {
                neighborhood: hood_b.clone(),
                period: p,
                day: day(d),
                available: if p == 50 { 0 } else { 2 },
            });
        }
    }
    Fixture {
        hood_a,
        hood_b,
        a_point,
        b_point,
        obs,
    }
}

fn trip(id: &str, (lon, lat): (f64, f64), d: u32, hh: u32, mm: u32) -> Trajectory {
    let mut t = Trajectory::new(id, vec![0]);
    t.origin = Some(Origin {
        start: day(d).and_hms_opt(hh, mm, 0).unwrap(),
        lon,
        lat,
    });
    t
}

#[test]
fn decensor_fixture() {
    let f = fixture();
    // period 50 is 08:20-08:30
    let trips = vec![
        trip("a50", f.a_point, 3, 8, 25),
        trip("a51", f.a_point, 3, 8, 31),
        trip("b50", f.b_point, 4, 8, 20),
        trip("b10", f.b_point, 4, 1, 45),
    ];
    let (kept, report) = decensor(&trips, &f.obs, &DecensorOptions::new(14)).unwrap();
    let w: Vec<(&str, f64)> = kept.iter().map(|t| (t.id.as_str(), t.weight)).collect();
    assert_eq!(w, vec![("a50", 1.0 / 10.0), ("a51", 1.0 / 14.0), ("b10", 1.0 / 14.0)]);
    assert_eq!(report.dropped, vec!["b50".to_string()]);
    assert!(report.undefined.contains(&(f.hood_b.clone(), 50)));
    assert_eq!(report.stockout_days[&(f.hood_a.clone(), 50)], 4);
    assert_eq!(report.stockout_days[&(f.hood_b.clone(), 50)], 14);
    assert_eq!(report.weights[&(f.hood_a.clone(), 50)], 0.1);
    assert_eq!(report.missing_observations, 0);
    // every defined cell follows the formula
    for (cell, &wt) in &report.weights {
        assert_eq!(wt, 1.0 / (14 - report.stockout_days[cell]) as f64);
    }
}

#[test]
fn decensor_without_stockouts_is_uniform() {
    let f = fixture();
    let obs: Vec<StockObservation> = f
        .obs
        .iter()
        .map(|o| StockObservation {
            available: 5,
            ..o.clone()
        })
        .collect();
    let trips: Vec<Trajectory> = (0..30).map(|k| trip(&format!("t{k}"), f.a_point, 1 + k % 14, (k % 24) as u32, 0)).collect();
    let (kept, report) = decensor(&trips, &obs, &DecensorOptions::new(14)).unwrap();
    assert!(report.dropped.is_empty());
    assert!(kept.iter().all(|t| t.weight == 1.0 / 14.0));
    let total: f64 = kept.iter().map(|t| t.weight).sum();
    assert!((total - 30.0 / 14.0).abs() < 1e-12);
}

#[test]
fn decensor_missing_policy() {
    let f = fixture();
    let sparse: Vec<StockObservation> = f.obs.iter().filter(|o| o.day != day(7)).cloned().collect();
    let trips = vec![trip("a", f.a_point, 3, 2, 0)];
    let (kept, report) = decensor(&trips, &sparse, &DecensorOptions::new(14)).unwrap();
    assert_eq!(kept[0].weight, 1.0 / 13.0);
    assert_eq!(report.missing_observations, 2 * 144);
    let lenient = DecensorOptions {
        missing: MissingPolicy::Available,
        ..DecensorOptions::new(14)
    };
    let (kept, _) = decensor(&trips, &sparse, &lenient).unwrap();
    assert_eq!(kept[0].weight, 1.0 / 14.0);
    // origin metadata is required
    assert!(decensor(&[Trajectory::new("x", vec![0])], &sparse, &DecensorOptions::new(14)).is_err());
}

#[test]
fn synthetic_two_by_two() {
    let grid = synth_network(1, 2, 2, 1.0).unwrap();
    assert_eq!(grid.network.len(), 4);
    assert_eq!(grid.network.neighbors().len(), 4);
    let inst = synth_instance(1, 2, 2, 0, 3).unwrap();
    assert!(inst.d_seg.iter().all(|&d| d == 0.0));
    assert!(synth_network(1, 1, 1, 1.0).is_err());
}

#[test]
fn synthetic_grid_counts() {
    for (r, c) in [(2, 3), (4, 4), (3, 7)] {
        let grid = synth_network(9, r, c, 1.0).unwrap();
        assert_eq!(grid.network.len(), r * (c - 1) + c * (r - 1));
        // edges sharing a node: sum over nodes of C(degree, 2)
        let mut deg = vec![0usize; r * c];
        for &(a, b) in &grid.ends {
            deg[a] += 1;
            deg[b] += 1;
        }
        let pairs: usize = deg.iter().map(|d| d * d.saturating_sub(1) / 2).sum();
        assert_eq!(grid.network.neighbors().len(), pairs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn synthetic_instances_are_valid_and_deterministic(seed in any::<u64>(), r in 1usize..6, c in 2usize..6, n in 0usize..40, len in 1usize..6) {
        let a = synth_instance(seed, r, c, n, len).unwrap();
        let b = synth_instance(seed, r, c, n, len).unwrap();
        prop_assert_eq!(&a.trajectories, &b.trajectories);
        prop_assert_eq!(a.network.segments(), b.network.segments());
        prop_assert_eq!(a.trajectories.len(), n);
        for t in &a.trajectories {
            prop_assert!(a.network.validate_trajectory(t).is_ok());
        }
    }
}
