use proptest::prelude::*;
use worldgrid::datamgmt::{
    copy_and_register, replicate, DataError, Endpoint, LogicalFileName, PhysicalFileName, ReplicaCatalog,
};
use worldgrid::fabric::{FailureKind, FailureWindow};

#[path = "support/data_model.rs"]
mod data_model;
use data_model::*;

fn lfn(s: &str) -> LogicalFileName {
    s.parse().unwrap()
}

#[test]
fn lfn_syntax() {
    let l = lfn("lfn:/datatag/cms/run1.ntpl");
    assert_eq!((l.vo(), l.path()), ("datatag", "cms/run1.ntpl"));
    assert_eq!(l.to_string(), "lfn:/datatag/cms/run1.ntpl");
    assert_eq!(l.physical_path(), "/grid/datatag/cms/run1.ntpl");
    for bad in ["", "lfn:/", "lfn:/vo", "lfn:/vo/", "lfn://x", "lfn:/vo/a//b", "file:/vo/x", "lfn:/vo/a b", "lfn:/vo/../x"] {
        assert!(matches!(bad.parse::<LogicalFileName>(), Err(DataError::InvalidLfn(_))), "{bad}");
    }
}

#[test]
fn endpoint_text_round_trip() {
    for s in ["ui:sim.sh", "ce:gridce.bo.infn.it:job/out", "wn:padova:out.root", "se:a.eu:/grid/v/x"] {
        let e: Endpoint = s.parse().unwrap();
        assert_eq!(e.to_string(), s);
    }
    for bad in ["", "ui:", "xx:a:b", "wn:site", "se::p"] {
        assert!(bad.parse::<Endpoint>().is_err(), "{bad}");
    }
}

#[test]
fn pfn_url_round_trip() {
    let p = PhysicalFileName { se: "a.eu".into(), path: "/grid/v/x".into(), protocol: "gsiftp".into(), size: 3 };
    assert_eq!(p.url(), "gsiftp://a.eu/grid/v/x");
    assert_eq!(PhysicalFileName::parse_url(&p.url()), Some(("a.eu".into(), "/grid/v/x".into())));
}

#[test]
fn wn_output_registered_on_close_se() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    let l = lfn("lfn:/v/out.root");
    let p = copy_and_register(&mut rc, &mut f, &"wn:a:out.root".parse().unwrap(), "a.eu", &l).unwrap();
    assert_eq!(rc.list_replicas(&l), vec![p.clone()]);
    assert_eq!(f.se("a.eu").unwrap().files.get(&p.path), Some(&200));
    rc.check_consistency(&f).unwrap();
}

#[test]
fn full_destination_leaves_catalogue_alone() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    copy_and_register(&mut rc, &mut f, &"ui:big".parse().unwrap(), "c.us", &lfn("lfn:/v/one")).unwrap();
    let before = rc.clone();
    let err = copy_and_register(&mut rc, &mut f, &"ui:big".parse().unwrap(), "c.us", &lfn("lfn:/v/two")).unwrap_err();
    assert!(matches!(err, DataError::NoSpace { needed: 350, free: 50, .. }), "{err:?}");
    assert_eq!(rc, before);
}

#[test]
fn outbound_disabled_denies_wn_copy() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    let err = copy_and_register(&mut rc, &mut f, &"wn:c:out.root".parse().unwrap(), "c.us", &lfn("lfn:/v/x")).unwrap_err();
    match err {
        DataError::ConnectivityDenied { site, reason } => {
            assert_eq!(site, "c");
            assert!(reason.contains("outbound"));
        }
        e => panic!("{e:?}"),
    }
    assert!(rc.is_empty());
}

#[test]
fn missing_source() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    let err = copy_and_register(&mut rc, &mut f, &"ui:nope".parse().unwrap(), "a.eu", &lfn("lfn:/v/x")).unwrap_err();
    assert!(matches!(err, DataError::SourceMissing(_)));
}

#[test]
fn replicate_to_other_continent_and_back() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    let l = lfn("lfn:/v/evgen");
    copy_and_register(&mut rc, &mut f, &"ui:small".parse().unwrap(), "a.eu", &l).unwrap();
    let us = replicate(&mut rc, &mut f, &l, "c.us").unwrap();
    assert_eq!(rc.list_replicas(&l).len(), 2);
    // idempotent
    assert_eq!(replicate(&mut rc, &mut f, &l, "c.us").unwrap(), us);
    assert_eq!(rc.list_replicas(&l).len(), 2);
    assert!(matches!(replicate(&mut rc, &mut f, &lfn("lfn:/v/none"), "c.us"), Err(DataError::UnknownLfn(_))));
    rc.check_consistency(&f).unwrap();
}

#[test]
fn replica_source_prefers_same_continent() {
    let f = grid();
    let mk = |se: &str| PhysicalFileName { se: se.into(), path: "/p".into(), protocol: "gsiftp".into(), size: 1 };
    let reps = vec![mk("a.eu"), mk("c.us")];
    assert_eq!(worldgrid::datamgmt::pick_source(&f, &reps, "b").unwrap().se, "a.eu");
    assert_eq!(worldgrid::datamgmt::pick_source(&f, &reps, "c").unwrap().se, "c.us");
    assert_eq!(worldgrid::datamgmt::pick_source(&f, &reps[..1], "c").unwrap().se, "a.eu");
}

#[test]
fn unregister_cases() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    let l = lfn("lfn:/v/x");
    let p = copy_and_register(&mut rc, &mut f, &"ui:small".parse().unwrap(), "a.eu", &l).unwrap();
    replicate(&mut rc, &mut f, &l, "b.eu").unwrap();
    rc.unregister(&l, "b.eu", &p.path).unwrap();
    assert_eq!(rc.list_replicas(&l), vec![p.clone()]);
    rc.unregister(&l, "a.eu", &p.path).unwrap();
    assert!(rc.list_replicas(&l).is_empty());
    assert!(!rc.contains(&l));
    assert!(matches!(rc.unregister(&l, "a.eu", &p.path), Err(DataError::UnknownPair { .. })));
}

#[test]
fn existing_name_is_refused() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    let l = lfn("lfn:/v/x");
    copy_and_register(&mut rc, &mut f, &"ui:small".parse().unwrap(), "a.eu", &l).unwrap();
    let err = copy_and_register(&mut rc, &mut f, &"ui:small".parse().unwrap(), "b.eu", &l).unwrap_err();
    assert!(matches!(err, DataError::LfnExists { .. }));
}

#[test]
fn catalogue_or_gridftp_down() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    f.add_failure(FailureWindow { kind: FailureKind::Gridftp, target: "b".into(), start: 0, end: Some(10) });
    f.add_failure(FailureWindow { kind: FailureKind::Rc, target: "rc".into(), start: 10, end: Some(20) });
    let src: Endpoint = "ui:small".parse().unwrap();
    assert!(matches!(copy_and_register(&mut rc, &mut f, &src, "b.eu", &lfn("lfn:/v/x")), Err(DataError::ServiceDown(_))));
    f.set_now(10);
    assert!(matches!(copy_and_register(&mut rc, &mut f, &src, "b.eu", &lfn("lfn:/v/x")), Err(DataError::ServiceDown(_))));
    f.set_now(20);
    copy_and_register(&mut rc, &mut f, &src, "b.eu", &lfn("lfn:/v/x")).unwrap();
}

#[test]
fn dump_is_sorted_triples() {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    copy_and_register(&mut rc, &mut f, &"ui:small".parse().unwrap(), "b.eu", &lfn("lfn:/v/z")).unwrap();
    copy_and_register(&mut rc, &mut f, &"ui:small".parse().unwrap(), "a.eu", &lfn("lfn:/v/a")).unwrap();
    replicate(&mut rc, &mut f, &lfn("lfn:/v/z"), "a.eu").unwrap();
    assert_eq!(
        rc.dump(),
        "lfn:/v/a gsiftp://a.eu/grid/v/a 100\n\
         lfn:/v/z gsiftp://a.eu/grid/v/z 100\n\
         lfn:/v/z gsiftp://b.eu/grid/v/z 100\n"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn agrees_with_model(ops in prop::collection::vec(op(), 1..40)) {
        check_sequence(&ops).map_err(TestCaseError::fail)?;
    }
}
