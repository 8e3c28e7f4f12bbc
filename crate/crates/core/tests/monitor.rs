use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;
use worldgrid::fabric::{FailureKind, FailureSpec, FailureWindow, Scenario};
use worldgrid::grid::Grid;
use worldgrid::monitor::{export_map, parse_map, MapFilter, MonitorError, ProbeKind, Status};

fn shipped() -> Scenario {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/worldgrid.scenario");
    Scenario::load(&p).unwrap()
}

fn grid() -> Grid {
    Grid::new(&shipped(), 1).unwrap()
}

#[test]
fn healthy_grid_is_all_up() {
    let g = grid();
    let map = g.map(&MapFilter::None).unwrap();
    assert_eq!(map.sites.len(), 17);
    assert!(map.sites.iter().all(|s| s.rollup == Status::Up && s.color == "green"));
    assert!(map.sites.iter().all(|s| s.services.len() == 3));
    assert_eq!(map.central.len(), 6);
    assert!(map.central.iter().all(|c| c.service.status == Status::Up));
    assert!(g.monitor().history().iter().all(|r| r.status == Status::Up));
}

#[test]
fn gatekeeper_window_turns_only_that_probe_down() {
    let mut g = grid();
    g.inject_failure(FailureWindow { kind: FailureKind::Gatekeeper, target: "padova".into(), start: 45, end: Some(200) }).unwrap();
    g.advance_to(60).unwrap();
    let map = g.map(&MapFilter::None).unwrap();
    for s in &map.sites {
        for svc in &s.services {
            let expect = if s.id == "padova" && svc.kind == ProbeKind::Gatekeeper { Status::Down } else { Status::Up };
            assert_eq!(svc.status, expect, "{} {:?}", s.id, svc.kind);
        }
    }
    let padova = map.sites.iter().find(|s| s.id == "padova").unwrap();
    assert_eq!((padova.rollup, padova.color.as_str()), (Status::Down, "red"));
    g.advance_to(240).unwrap();
    assert_eq!(g.monitor().latest("padova", ProbeKind::Gatekeeper).unwrap().status, Status::Up);
}

#[test]
fn central_service_failure_shows_on_map() {
    let mut g = grid();
    g.inject_failure(FailureWindow { kind: FailureKind::Rc, target: "rc-cnaf".into(), start: 10, end: None }).unwrap();
    g.advance_to(30).unwrap();
    let map = g.map(&MapFilter::None).unwrap();
    let rc = map.central.iter().find(|c| c.id == "rc-cnaf").unwrap();
    assert_eq!((rc.service.status, rc.color.as_str()), (Status::Down, "red"));
    assert!(map.sites.iter().all(|s| s.rollup == Status::Up));
}

#[test]
fn stale_crl_warns_after_lifetime() {
    let s = shipped();
    let lifetime = s.ca.iter().map(|c| c.crl_lifetime).min().unwrap();
    let mut g = Grid::new(&s, 1).unwrap();
    g.inject_failure(FailureWindow { kind: FailureKind::CrlFetch, target: "valencia".into(), start: 100, end: None }).unwrap();
    g.advance_to(lifetime + 60).unwrap();
    let gk: Vec<_> = g
        .monitor()
        .history()
        .iter()
        .filter(|r| r.target == "valencia" && r.kind == ProbeKind::Gatekeeper)
        .collect();
    let first_warn = gk.iter().find(|r| r.status == Status::Warn).expect("goes stale").t;
    assert!(first_warn >= lifetime && first_warn <= lifetime + 30, "{first_warn}");
    assert!(gk.iter().filter(|r| r.t < first_warn).all(|r| r.status == Status::Up));
    assert!(gk.iter().find(|r| r.t == first_warn).unwrap().detail.contains("stale CRL"));
    // other sites keep fetching
    assert_eq!(g.monitor().latest("lisbon", ProbeKind::Gatekeeper).unwrap().status, Status::Up);
}

#[test]
fn crl_never_fetched_is_stale_from_start() {
    let mut s = shipped();
    s.failure.push(FailureSpec { kind: FailureKind::CrlFetch, target: "lisbon".into(), start: 0, end: None });
    let g = Grid::new(&s, 1).unwrap();
    assert_eq!(g.monitor().latest("lisbon", ProbeKind::Gatekeeper).unwrap().status, Status::Warn);
}

#[test]
fn lapsed_registration_warns_on_gris() {
    let mut s = shipped();
    s.grid.registration_ttl = 10;
    s.grid.probe_period = 45;
    let mut g = Grid::new(&s, 1).unwrap();
    g.advance_to(45).unwrap();
    // last refresh at 30, TTL 10: every registration has lapsed by 45
    let r = g.monitor().latest("bologna", ProbeKind::Gris).unwrap();
    assert_eq!((r.t, r.status), (45, Status::Warn));
    // with the default TTL, refreshes always land before registrations lapse
    let mut g = grid();
    g.advance_to(900).unwrap();
    assert!(g.monitor().history().iter().all(|r| r.status == Status::Up));
}

#[test]
fn vo_filter_matches_authorized_vos_scan() {
    let g = grid();
    for vo in ["datatag", "ivdgl"] {
        let expect: BTreeSet<String> = g
            .fabric()
            .ces()
            .filter(|c| c.authorized_vos.iter().any(|v| v == vo))
            .map(|c| c.site.clone())
            .collect();
        let got: BTreeSet<String> = g.map(&MapFilter::Vo(vo.into())).unwrap().sites.into_iter().map(|s| s.id).collect();
        assert_eq!(got, expect, "{vo}");
    }
    assert_eq!(g.map(&MapFilter::Vo("datatag".into())).unwrap().sites.len(), 13);
    assert_eq!(g.map(&MapFilter::Vo("ivdgl".into())).unwrap().sites.len(), 17);
}

#[test]
fn country_and_site_filters() {
    let g = grid();
    let it = g.map(&"country=IT".parse().unwrap()).unwrap();
    let ids: BTreeSet<String> = it.sites.iter().map(|s| s.id.clone()).collect();
    assert_eq!(ids, ["bologna", "milano", "padova"].map(String::from).into());
    let one = g.map(&"site=batavia".parse().unwrap()).unwrap();
    assert_eq!(one.sites.len(), 1);
    assert_eq!(
        g.map(&MapFilter::Country("Atlantis".into())),
        Err(worldgrid::grid::GridError::Monitor(MonitorError::UnknownFilterValue { what: "country".into(), value: "Atlantis".into() }))
    );
    assert!(g.map(&MapFilter::Vo("cms".into())).is_err());
    assert!(g.map(&MapFilter::Site("nowhere".into())).is_err());
}

#[test]
fn filter_parsing() {
    assert_eq!("".parse::<MapFilter>().unwrap(), MapFilter::None);
    assert_eq!("none".parse::<MapFilter>().unwrap(), MapFilter::None);
    assert_eq!("vo=ivdgl".parse::<MapFilter>().unwrap(), MapFilter::Vo("ivdgl".into()));
    for bad in ["vo", "vo=", "colour=red", "=x"] {
        assert!(matches!(bad.parse::<MapFilter>(), Err(MonitorError::BadFilter(_))), "{bad}");
    }
    for f in [MapFilter::None, MapFilter::Vo("a".into()), MapFilter::Country("US".into()), MapFilter::Site("x".into())] {
        assert_eq!(f.to_string().parse::<MapFilter>().unwrap(), f);
    }
}

#[test]
fn export_round_trips_with_17_located_sites() {
    let mut g = grid();
    g.inject_failure(FailureWindow { kind: FailureKind::Gridftp, target: "boston".into(), start: 0, end: None }).unwrap();
    g.advance_to(30).unwrap();
    let snap = g.map(&MapFilter::None).unwrap();
    let text = export_map(&snap);
    let back = parse_map(&text).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.sites.len(), 17);
    let ids: BTreeSet<&str> = back.sites.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids.len(), 17);
    for s in &back.sites {
        assert!((-90.0..=90.0).contains(&s.lat) && (-180.0..=180.0).contains(&s.lon), "{}", s.id);
        assert!(s.lat != 0.0 || s.lon != 0.0);
    }
    assert_eq!(back.sites.iter().filter(|s| s.rollup == Status::Down).count(), 1);
    assert!(parse_map("{").is_err());
}

#[test]
fn empty_fabric_exports_empty_document() {
    let g = Grid::new(&Scenario::default(), 1).unwrap();
    let snap = g.map(&MapFilter::None).unwrap();
    assert!(snap.sites.is_empty());
    let back = parse_map(&export_map(&snap)).unwrap();
    assert_eq!(back, snap);
}

#[test]
fn metrics_follow_load() {
    let mut g = grid();
    let text = "Executable = \"x\"; Duration = 500; Requirements = other.CEId == \"gridce.bo.infn.it:2119/jobmanager-pbs-long\";";
    let ce = g.fabric().ces().find(|c| c.site == "bologna").unwrap().id.clone();
    let text = text.replace("gridce.bo.infn.it:2119/jobmanager-pbs-long", &ce);
    for _ in 0..4 {
        g.submit(&worldgrid::grid::SubmitRequest {
            jdl: text.clone(),
            owner: "/C=IT/O=INFN/OU=Personal Certificate/L=Padova/CN=DataTAG Demo".into(),
            vo: None,
            target: worldgrid::grid::Target::Broker("rb-pisa".into()),
        })
        .unwrap();
    }
    g.advance_to(100).unwrap();
    let site = g.map(&MapFilter::Site("bologna".into())).unwrap().sites.remove(0);
    let cpus: u32 = g.fabric().ces().filter(|c| c.site == "bologna").map(|c| c.total_cpus).sum();
    assert_eq!(site.metrics.load, ((4.0 / cpus as f64) * 1000.0).round() / 1000.0);
    for m in [site.metrics.load, site.metrics.memory, site.metrics.swap, site.metrics.disk, site.metrics.network] {
        assert!((0.0..=1.0).contains(&m));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    // DOWN exactly while the window is open, at probe granularity.
    #[test]
    fn probe_soundness(site in prop::sample::select(vec!["bologna", "geneva", "batavia", "argonne"]),
                       kind in prop::sample::select(vec![FailureKind::Gatekeeper, FailureKind::Gris, FailureKind::Gridftp]),
                       start in 0u64..400, len in 1u64..300) {
        let mut g = grid();
        g.inject_failure(FailureWindow { kind, target: site.into(), start, end: Some(start + len) }).unwrap();
        g.advance_to(900).unwrap();
        let pk = match kind {
            FailureKind::Gatekeeper => ProbeKind::Gatekeeper,
            FailureKind::Gris => ProbeKind::Gris,
            _ => ProbeKind::Gridftp,
        };
        for r in g.monitor().history() {
            let inside = r.target == site && r.kind == pk && r.t >= start && r.t < start + len;
            prop_assert_eq!(r.status == Status::Down, inside, "{:?}", r);
        }
        let downs = g.monitor().history().iter().filter(|r| r.status == Status::Down).count() as u64;
        let expect = (start..start + len).filter(|t| t % 30 == 0).count() as u64;
        prop_assert_eq!(downs, expect);
    }

    #[test]
    fn history_is_bounded(cap in 1usize..200, until in 0u64..2000) {
        let mut s = shipped();
        s.grid.history_capacity = cap;
        let mut g = Grid::new(&s, 1).unwrap();
        g.advance_to(until).unwrap();
        prop_assert!(g.monitor().history().len() <= cap);
        prop_assert_eq!(g.monitor().capacity(), cap);
    }

    #[test]
    fn filtered_sites_are_a_subset(f in prop::sample::select(vec!["vo=datatag", "vo=ivdgl", "country=US", "country=IT", "site=lisbon", "none"])) {
        let g = grid();
        let all: BTreeSet<String> = g.map(&MapFilter::None).unwrap().sites.into_iter().map(|s| s.id).collect();
        let some: BTreeSet<String> = g.map(&f.parse().unwrap()).unwrap().sites.into_iter().map(|s| s.id).collect();
        prop_assert!(some.is_subset(&all));
        prop_assert!(!some.is_empty());
    }
}
