use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use worldgrid::infosys::*;

fn schema() -> Arc<Schema> {
    Arc::new(Schema::worldgrid())
}

fn host(dn: &str, name: &str, source: &str, t: u64) -> DirectoryEntry {
    DirectoryEntry::new(dn.parse().unwrap(), source, t)
        .with_class("MdsHost")
        .with_attr("Mds-Hostname", name)
}

fn ce(i: usize, free: i64, lrms: &str, tags: &[&str], source: &str, t: u64) -> DirectoryEntry {
    DirectoryEntry::new(format!("ceid=ce{i},o=grid").parse().unwrap(), source, t)
        .with_class("ComputingElement")
        .with_attr("CEId", format!("ce{i}"))
        .with_attr("LRMSType", lrms)
        .with_attr("TotalCPUs", 8)
        .with_attr("FreeCPUs", free)
        .with_attr("RunningJobs", 8 - free)
        .with_attr("WaitingJobs", 0)
        .with_list("RunTimeEnvironment", tags.iter().copied())
}

fn root() -> DistinguishedName {
    "o=grid".parse().unwrap()
}

#[test]
fn two_sources_both_contribute() {
    let mut d = Directory::new(schema());
    let a = InfoSource::static_entries("a", vec![host("mds-hostname=grid001,o=grid", "grid001", "", 0)]);
    let b = InfoSource::static_entries("b", vec![host("mds-hostname=grid002,o=grid", "grid002", "", 0)]);
    let report = d.load_sources(&[a, b], 0).unwrap();
    assert_eq!(report.accepted, 2);
    assert_eq!(d.len(), 2);
}

#[test]
fn hostname_base_does_not_match_mds_hostname() {
    let mut d = Directory::new(schema());
    let a = InfoSource::static_entries("a", vec![host("mds-hostname=grid001", "grid001", "", 0)]);
    d.load_sources(&[a], 0).unwrap();
    let base: DistinguishedName = "hostname=grid001".parse().unwrap();
    assert!(d.search(&base, Scope::Base, &QueryFilter::any()).is_empty());
    assert!(d.search(&base, Scope::Subtree, &QueryFilter::any()).is_empty());
    let exact: DistinguishedName = "mds-hostname=grid001".parse().unwrap();
    let hit = d.search(&exact, Scope::Base, &QueryFilter::Presence("mds-hostname".into()));
    assert_eq!(hit.len(), 1);
}

#[test]
fn empty_source_list() {
    let mut d = Directory::new(schema());
    let r = d.load_sources(&[], 0).unwrap();
    assert_eq!(r.accepted, 0);
    assert!(r.rejected.is_empty());
    assert!(d.is_empty());
}

#[test]
fn duplicate_source_id_rejected() {
    let mut d = Directory::new(schema());
    let a = InfoSource::static_entries("a", vec![]);
    assert!(matches!(d.load_sources(&[a.clone(), a], 0), Err(InfoError::DuplicateSourceId(id)) if id == "a"));
}

#[test]
fn invalid_entries_go_to_report() {
    let mut d = Directory::new(schema());
    let bad = DirectoryEntry::new("ceid=x,o=grid".parse().unwrap(), "", 0).with_class("ComputingElement");
    let good = host("mds-hostname=h,o=grid", "h", "", 0);
    let r = d.load_sources(&[InfoSource::static_entries("s", vec![bad, good])], 0).unwrap();
    assert_eq!(r.accepted, 1);
    assert_eq!(r.rejected.len(), 1);
    assert_eq!(d.len(), 1);
}

#[test]
fn collision_resolution_is_order_independent() {
    let dn = "mds-hostname=shared,o=grid";
    let entry = |src: &str, t: u64, os: &str| host(dn, "shared", src, t).with_attr("Mds-Os-name", os);
    let sources = [
        InfoSource::static_entries("s1", vec![entry("s1", 10, "rh62"), host("mds-hostname=a,o=grid", "a", "", 0)]),
        InfoSource::static_entries("s2", vec![entry("s2", 30, "rh72")]),
        InfoSource::static_entries("s3", vec![entry("s3", 20, "fermi"), host("mds-hostname=b,o=grid", "b", "", 0)]),
    ];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut outputs = BTreeSet::new();
    for p in perms {
        let ordered: Vec<InfoSource> = p.iter().map(|&i| sources[i].clone()).collect();
        let mut d = Directory::new(schema());
        d.load_sources(&ordered, 0).unwrap();
        let hit = d.search(&dn.parse().unwrap(), Scope::Base, &QueryFilter::any());
        assert_eq!(hit.len(), 1);
        assert_eq!(hit[0].first("Mds-Os-name"), Some("rh72"));
        assert_eq!(hit[0].source_id, "s2");
        assert_eq!(d.len(), 3);
        outputs.insert(d.to_ldif());
    }
    assert_eq!(outputs.len(), 1);
}

#[test]
fn equal_timestamps_break_to_smaller_source_id() {
    let dn = "mds-hostname=x,o=grid";
    let a = InfoSource::static_entries("zeta", vec![host(dn, "x", "", 5).with_attr("Mds-Os-name", "z")]);
    let b = InfoSource::static_entries("alpha", vec![host(dn, "x", "", 5).with_attr("Mds-Os-name", "a")]);
    for order in [vec![a.clone(), b.clone()], vec![b, a]] {
        let mut d = Directory::new(schema());
        d.load_sources(&order, 0).unwrap();
        assert_eq!(d.entries().next().unwrap().first("Mds-Os-name"), Some("a"));
    }
}

#[test]
fn ldif_round_trip() {
    let mut d = Directory::new(schema());
    let entries = vec![ce(1, 3, "pbs", &["ATLAS", "CMS"], "", 0), host("mds-hostname=h,o=grid", "h", "", 0)];
    d.load_sources(&[InfoSource::static_entries("s", entries)], 7).unwrap();
    let text = d.to_ldif();
    let parsed = parse_ldif(&text, "s", 7).unwrap();
    let mut again = Directory::new(schema());
    again.load_sources(&[InfoSource::static_entries("s", parsed)], 7).unwrap();
    assert_eq!(again.to_ldif(), text);
}

// Brute-force reading of a filter against raw entry data. Written against the
// documented semantics rather than reusing QueryFilter::matches.
#[derive(Debug, Clone)]
enum F {
    Eq(&'static str, String),
    Present(&'static str),
    Class(&'static str),
    Ge(&'static str, i64),
    Le(&'static str, i64),
    And(Vec<F>),
    Or(Vec<F>),
    Not(Box<F>),
}

fn to_filter(f: &F) -> QueryFilter {
    match f {
        F::Eq(a, v) => QueryFilter::Equality(a.to_string(), v.clone()),
        F::Present(a) => QueryFilter::Presence(a.to_string()),
        F::Class(c) => QueryFilter::ObjectClassIs(c.to_string()),
        F::Ge(a, n) => QueryFilter::GreaterOrEqual(a.to_string(), *n),
        F::Le(a, n) => QueryFilter::LessOrEqual(a.to_string(), *n),
        F::And(v) => QueryFilter::And(v.iter().map(to_filter).collect()),
        F::Or(v) => QueryFilter::Or(v.iter().map(to_filter).collect()),
        F::Not(x) => QueryFilter::Not(Box::new(to_filter(x))),
    }
}

struct Raw {
    classes: Vec<&'static str>,
    attrs: Vec<(&'static str, String)>,
}

fn oracle(f: &F, e: &Raw) -> bool {
    let vals = |a: &'static str| e.attrs.iter().filter(move |(k, _)| k.eq_ignore_ascii_case(a)).map(|(_, v)| v.clone());
    let ints = ["FreeCPUs", "TotalCPUs"];
    match f {
        F::Eq(a, v) => vals(a).any(|x| &x == v),
        F::Present(a) => vals(a).next().is_some(),
        F::Class(c) => e.classes.iter().any(|k| k.eq_ignore_ascii_case(c)),
        F::Ge(a, n) => ints.contains(a) && vals(a).any(|x| x.parse::<i64>().unwrap() >= *n),
        F::Le(a, n) => ints.contains(a) && vals(a).any(|x| x.parse::<i64>().unwrap() <= *n),
        F::And(v) => v.iter().all(|x| oracle(x, e)),
        F::Or(v) => v.iter().any(|x| oracle(x, e)),
        F::Not(x) => !oracle(x, e),
    }
}

fn leaf_filter() -> impl Strategy<Value = F> {
    prop_oneof![
        (0..6usize).prop_map(|i| F::Eq("LRMSType", ["pbs", "lsf", "condor", "x", "sge", "PBS"][i].to_string())),
        (0..4usize).prop_map(|i| F::Eq("RunTimeEnvironment", ["ATLAS", "CMS", "LHCb", "atlas"][i].to_string())),
        (0..3usize).prop_map(|i| F::Present(["RunTimeEnvironment", "Mds-Os-name", "FreeCPUs"][i])),
        (0..2usize).prop_map(|i| F::Class(["ComputingElement", "MdsHost"][i])),
        (-1i64..10).prop_map(|n| F::Ge("FreeCPUs", n)),
        (-1i64..10).prop_map(|n| F::Le("FreeCPUs", n)),
        (0i64..10).prop_map(|n| F::Ge("LRMSType", n)),
    ]
}

fn filter_strategy() -> impl Strategy<Value = F> {
    leaf_filter().prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(F::And),
            prop::collection::vec(inner.clone(), 1..4).prop_map(F::Or),
            inner.prop_map(|x| F::Not(Box::new(x))),
        ]
    })
}

type RawSpec = (i64, usize, Vec<usize>, bool);

fn build(specs: &[RawSpec]) -> (Vec<DirectoryEntry>, Vec<Raw>) {
    let lrms = ["pbs", "lsf", "condor"];
    let tags = ["ATLAS", "CMS", "LHCb"];
    let mut entries = Vec::new();
    let mut raws = Vec::new();
    for (i, (free, l, tag_idx, is_host)) in specs.iter().enumerate() {
        if *is_host {
            entries.push(host(&format!("mds-hostname=h{i},o=grid"), &format!("h{i}"), "", 0).with_attr("Mds-Os-name", "rh"));
            raws.push(Raw {
                classes: vec!["MdsHost"],
                attrs: vec![("Mds-Hostname", format!("h{i}")), ("Mds-Os-name", "rh".into())],
            });
        } else {
            let t: Vec<&str> = tag_idx.iter().map(|&k| tags[k]).collect::<BTreeSet<_>>().into_iter().collect();
            entries.push(ce(i, *free, lrms[*l], &t, "", 0));
            let mut attrs = vec![
                ("CEId", format!("ce{i}")),
                ("LRMSType", lrms[*l].to_string()),
                ("TotalCPUs", "8".into()),
                ("FreeCPUs", free.to_string()),
                ("RunningJobs", (8 - free).to_string()),
                ("WaitingJobs", "0".into()),
            ];
            attrs.extend(t.iter().map(|x| ("RunTimeEnvironment", x.to_string())));
            raws.push(Raw { classes: vec!["ComputingElement"], attrs });
        }
    }
    (entries, raws)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn search_matches_brute_force_scan(
        specs in prop::collection::vec((0i64..9, 0usize..3, prop::collection::vec(0usize..3, 0..3), any::<bool>()), 50),
        filters in prop::collection::vec(filter_strategy(), 5),
    ) {
        let (entries, raws) = build(&specs);
        let mut d = Directory::new(schema());
        let r = d.load_sources(&[InfoSource::static_entries("s", entries.clone())], 0).unwrap();
        prop_assert_eq!(r.accepted, 50);
        for f in &filters {
            let got: BTreeSet<String> = d.search(&root(), Scope::Subtree, &to_filter(f)).iter().map(|e| e.dn.to_string()).collect();
            let want: BTreeSet<String> = entries.iter().zip(&raws).filter(|(_, raw)| oracle(f, raw)).map(|(e, _)| e.dn.to_string()).collect();
            prop_assert_eq!(got, want, "filter {}", to_filter(f));
        }
    }

    #[test]
    fn filter_text_round_trips(f in filter_strategy()) {
        let q = to_filter(&f);
        let back: QueryFilter = q.to_string().parse().unwrap();
        prop_assert_eq!(back, q);
    }
}

const ATTRS: [&str; 5] = ["hostname", "mds-hostname", "s-hostname", "name", "mds-vo-name"];
const VALUES: [&str; 4] = ["grid001", "rid001", "001", "local"];

fn dn_strategy() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..ATTRS.len(), 0..VALUES.len()), 1..4)
}

fn render(parts: &[(usize, usize)]) -> String {
    parts.iter().map(|&(a, v)| format!("{}={}", ATTRS[a], VALUES[v])).collect::<Vec<_>>().join(",")
}

fn generic(dn: &str) -> DirectoryEntry {
    let parsed: DistinguishedName = dn.parse().unwrap();
    let leaf = parsed.leaf().clone();
    let mut e = DirectoryEntry::new(parsed, "", 0).with_class("MdsHost").with_attr("Mds-Hostname", "h");
    if !leaf.attribute().eq_ignore_ascii_case("mds-hostname") {
        e = e.with_attr(leaf.attribute(), leaf.value());
    } else {
        e.attributes.insert("Mds-Hostname".into(), vec![leaf.value().to_string()]);
    }
    e
}

fn loose_schema() -> Arc<Schema> {
    let mut s = Schema::globus();
    for a in ATTRS {
        if a != "mds-hostname" {
            s.define_attribute(a, AttributeType::String);
        }
    }
    s.define_class("MdsHost", &["Mds-Hostname"], &["hostname", "s-hostname", "name", "mds-vo-name"]).unwrap();
    Arc::new(s)
}

proptest! {
    #[test]
    fn dn_matching_is_component_wise(dns in prop::collection::vec(dn_strategy(), 1..12), base in dn_strategy()) {
        let schema = loose_schema();
        let rendered: BTreeSet<String> = dns.iter().map(|d| render(d)).collect();
        let entries: Vec<DirectoryEntry> = rendered.iter().map(|d| generic(d)).collect();
        let mut d = Directory::new(schema);
        let r = d.load_sources(&[InfoSource::static_entries("s", entries)], 0).unwrap();
        prop_assert_eq!(r.rejected.len(), 0);
        let base_dn: DistinguishedName = render(&base).parse().unwrap();
        let base_parts: Vec<(String, String)> = base.iter().map(|&(a, v)| (ATTRS[a].to_string(), VALUES[v].to_string())).collect();

        let hits: BTreeSet<String> = d.search(&base_dn, Scope::Base, &QueryFilter::any()).iter().map(|e| e.dn.to_string()).collect();
        let sub: BTreeSet<String> = d.search(&base_dn, Scope::Subtree, &QueryFilter::any()).iter().map(|e| e.dn.to_string()).collect();
        for dn in &rendered {
            let parts: Vec<(String, String)> = dn.split(',').map(|p| {
                let (a, v) = p.split_once('=').unwrap();
                (a.to_string(), v.to_string())
            }).collect();
            prop_assert_eq!(hits.contains(dn), parts == base_parts);
            let suffix = parts.len() >= base_parts.len() && parts[parts.len() - base_parts.len()..] == base_parts[..];
            prop_assert_eq!(sub.contains(dn), suffix);
        }
    }

    #[test]
    fn union_counts_distinct_dns(sources in prop::collection::vec(prop::collection::vec((0usize..15, 0u64..4), 0..8), 0..5)) {
        let srcs: Vec<InfoSource> = sources.iter().enumerate().map(|(i, es)| {
            InfoSource::static_entries(&format!("s{i}"), es.iter().map(|&(h, t)| host(&format!("mds-hostname=h{h},o=grid"), &format!("h{h}"), "", t)).collect())
        }).collect();
        let distinct: BTreeSet<usize> = sources.iter().flatten().map(|&(h, _)| h).collect();
        let mut d = Directory::new(schema());
        d.load_sources(&srcs, 0).unwrap();
        prop_assert_eq!(d.len(), distinct.len());
        let mut again = Directory::new(schema());
        again.load_sources(&srcs, 0).unwrap();
        prop_assert_eq!(again.to_ldif(), d.to_ldif());
    }
}

// Random index topologies: each node publishes a few hosts, some shared across
// nodes, and registers a subset of lower-numbered nodes (so no cycles).
#[derive(Debug, Clone)]
struct Topo {
    publish: Vec<Vec<(usize, u64)>>,
    edges: Vec<(usize, usize, u64, u64)>,
    down: Vec<bool>,
    now: u64,
}

fn topo_strategy() -> impl Strategy<Value = Topo> {
    (2usize..=20).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec((0usize..30, 0u64..3), 0..4), n),
            prop::collection::vec((1usize..n, 0usize..n, 0u64..40, 10u64..60), 0..40),
            prop::collection::vec(prop::bool::weighted(0.15), n),
            40u64..100,
        )
            .prop_map(|(publish, raw, down, now)| Topo {
                publish,
                edges: raw.into_iter().filter(|(a, b, _, _)| b < a).collect(),
                down,
                now,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn aggregation_is_a_view(t in topo_strategy()) {
        let n = t.publish.len();
        let mut sys = InfoSystem::new(schema());
        for i in 0..n {
            let level = if i == n - 1 { IndexLevel::TopGiis } else { IndexLevel::SiteGiis };
            sys.add_node(&format!("n{i}"), level, None).unwrap();
            let es = t.publish[i].iter().map(|&(h, p)| {
                host(&format!("mds-hostname=h{h},o=grid"), &format!("h{h}"), "", p).with_attr("Mds-Os-name", format!("from-n{i:02}"))
            }).collect();
            sys.load_sources(&format!("n{i}"), &[InfoSource::static_entries(&format!("src{i:02}"), es)], 0).unwrap();
        }
        // last registration for an edge wins
        let mut regs: BTreeMap<(usize, usize), (u64, u64)> = BTreeMap::new();
        for &(a, b, seen, ttl) in &t.edges {
            sys.register(&format!("n{a}"), &format!("n{b}"), ttl, seen).unwrap();
            regs.insert((a, b), (seen, ttl));
        }
        for (i, &d) in t.down.iter().enumerate() {
            sys.set_down(&format!("n{i}"), d);
        }
        for start in 0..n {
            let got = sys.search(&format!("n{start}"), &root(), Scope::Subtree, &QueryFilter::any(), t.now);
            if t.down[start] {
                prop_assert!(got.is_err());
                continue;
            }
            // reachable nodes over fresh edges to live children
            let mut reach = BTreeSet::from([start]);
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for (&(a, b), &(seen, ttl)) in &regs {
                    if a == x && seen + ttl >= t.now && !t.down[b] && reach.insert(b) {
                        stack.push(b);
                    }
                }
            }
            // collision rule by hand: max published_at, then min source id
            let mut best: BTreeMap<usize, (u64, std::cmp::Reverse<String>, String)> = BTreeMap::new();
            for &node in &reach {
                for &(h, p) in &t.publish[node] {
                    let cand = (p, std::cmp::Reverse(format!("src{node:02}")), format!("from-n{node:02}"));
                    let keep = match best.get(&h) {
                        None => true,
                        Some(cur) => (cand.0, &cand.1) > (cur.0, &cur.1),
                    };
                    if keep {
                        best.insert(h, cand);
                    }
                }
            }
            let got: BTreeMap<String, String> = got.unwrap().into_iter().map(|e| (e.dn.to_string(), e.first("Mds-Os-name").unwrap().to_string())).collect();
            let want_keys: BTreeSet<String> = best.keys().map(|h| format!("mds-hostname=h{h},o=grid")).collect();
            prop_assert_eq!(got.keys().cloned().collect::<BTreeSet<_>>(), want_keys);
            for (h, (_, _, origin)) in &best {
                prop_assert_eq!(&got[&format!("mds-hostname=h{h},o=grid")], origin);
            }
        }
    }
}

#[test]
fn gris_to_site_to_top_is_transitive_and_expires() {
    let mut sys = InfoSystem::new(schema());
    sys.add_node("gris", IndexLevel::Gris, None).unwrap();
    sys.add_node("site", IndexLevel::SiteGiis, None).unwrap();
    sys.add_node("top", IndexLevel::TopGiis, None).unwrap();
    sys.load_sources("gris", &[InfoSource::static_entries("p", vec![host("mds-hostname=h,o=grid", "h", "", 0)])], 0)
        .unwrap();
    sys.register("site", "gris", 60, 0).unwrap();
    sys.register("top", "site", 30, 0).unwrap();
    let count = |s: &InfoSystem, now| s.search("top", &root(), Scope::Subtree, &QueryFilter::any(), now).unwrap().len();
    assert_eq!(count(&sys, 0), 1);
    assert_eq!(count(&sys, 30), 1);
    assert_eq!(count(&sys, 31), 0);
    assert!(matches!(sys.register("gris", "top", 60, 0), Err(InfoError::CycleDetected { .. })));
    assert!(matches!(sys.register("top", "nope", 60, 0), Err(InfoError::UnknownNode(_))));
}

#[test]
fn thirteen_site_top_count_is_sum_of_sites() {
    let mut sys = InfoSystem::new(schema());
    sys.add_node("top", IndexLevel::TopGiis, None).unwrap();
    let mut per_site = Vec::new();
    for s in 0..13 {
        let site = format!("giis-{s}");
        sys.add_node(&site, IndexLevel::SiteGiis, None).unwrap();
        let hosts = 1 + s % 3;
        for h in 0..hosts {
            let gris = format!("gris-{s}-{h}");
            sys.add_node(&gris, IndexLevel::Gris, None).unwrap();
            let dn = format!("mds-hostname=h{h},mds-vo-name=site{s},o=grid");
            let es = vec![host(&dn, &format!("h{h}"), "", 0), ce(100 * s + h, 2, "pbs", &["ATLAS"], "", 0)];
            sys.load_sources(&gris, &[InfoSource::static_entries(&gris, es)], 0).unwrap();
            sys.register(&site, &gris, 60, 0).unwrap();
        }
        sys.register("top", &site, 60, 0).unwrap();
        per_site.push(sys.search(&site, &root(), Scope::Subtree, &QueryFilter::any(), 10).unwrap().len());
    }
    let top = sys.search("top", &root(), Scope::Subtree, &QueryFilter::any(), 10).unwrap().len();
    assert_eq!(top, per_site.iter().sum::<usize>());
}

#[test]
fn effective_top_failover() {
    let mut sys = InfoSystem::new(schema());
    sys.add_node("pisa", IndexLevel::TopGiis, None).unwrap();
    sys.add_node("milan", IndexLevel::TopGiis, Some("pisa")).unwrap();
    sys.add_node("site", IndexLevel::SiteGiis, None).unwrap();
    assert_eq!(sys.effective_top("pisa", "milan").unwrap(), "pisa");
    sys.set_down("pisa", true);
    assert_eq!(sys.effective_top("pisa", "milan").unwrap(), "milan");
    sys.set_down("milan", true);
    assert_eq!(sys.effective_top("pisa", "milan"), Err(InfoError::AllIndexesDown));
    assert_eq!(sys.effective_top("pisa", "site"), Err(InfoError::NotTopLevel("site".into())));
}
