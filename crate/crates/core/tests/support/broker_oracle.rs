//! Seeded random broker instances and a brute-force reference choice.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use worldgrid::jdl::{parse_expr, AttrMap, JdlDocument, Value};
use worldgrid::wms::{rank_candidates, Candidate, MatchInput};

const TAGS: [&str; 2] = ["ATLAS", "CMS"];
const VOS: [&str; 2] = ["datatag", "ivdgl"];

#[derive(Debug, Clone)]
pub struct Ce {
    pub id: String,
    pub site: String,
    pub free: i64,
    pub waiting: i64,
    pub total: i64,
    pub tags: Vec<&'static str>,
    pub vos: Vec<&'static str>,
    pub close: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub enum Req {
    True,
    Tag(usize),
    TagAndFree(usize, i64),
    FreeOrWaiting(i64),
    Undefined,
}

#[derive(Debug, Clone, Copy)]
pub enum Rank {
    Default,
    NegWaiting,
    FreeMinusWaiting,
    Missing,
    Total,
}

fn subset<T: Copy>(rng: &mut ChaCha8Rng, items: &[T], p: f64) -> Vec<T> {
    items.iter().copied().filter(|_| rng.random_bool(p)).collect()
}

pub struct Instance {
    pub ces: Vec<Ce>,
    pub vo: &'static str,
    pub authorized_sites: BTreeSet<String>,
    pub req: Req,
    pub rank: Rank,
    pub input: Vec<String>,
    pub replicas: BTreeMap<String, BTreeSet<String>>,
    pub strict: bool,
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(0..=10);
    let ses: Vec<String> = (0..4).map(|i| format!("se{i}")).collect();
    let ces = (0..n)
        .map(|i| {
            let total = rng.random_range(1..=4);
            Ce {
                // ids are shuffled so list order never decides ties
                id: format!("ce{:02}.example:2119/pbs-q", (i * 7 + seed as usize) % 23),
                site: format!("s{}", rng.random_range(0..5)),
                free: rng.random_range(0..=total),
                waiting: rng.random_range(0..3),
                total,
                tags: subset(&mut rng, &TAGS, 0.7),
                vos: subset(&mut rng, &VOS, 0.8),
                close: subset(&mut rng, &[0, 1, 2, 3], 0.4).into_iter().map(|k| ses[k].clone()).collect(),
            }
        })
        .collect::<Vec<_>>();
    let authorized_sites = (0..5).filter(|_| rng.random_bool(0.8)).map(|k| format!("s{k}")).collect();
    let req = match rng.random_range(0..5) {
        0 => Req::True,
        1 => Req::Tag(rng.random_range(0..2)),
        2 => Req::TagAndFree(rng.random_range(0..2), rng.random_range(0..3)),
        3 => Req::FreeOrWaiting(rng.random_range(0..3)),
        _ => Req::Undefined,
    };
    let rank = [Rank::Default, Rank::NegWaiting, Rank::FreeMinusWaiting, Rank::Missing, Rank::Total][rng.random_range(0..5)];
    let input: Vec<String> = (0..rng.random_range(0..3)).map(|i| format!("lfn:/datatag/f{i}")).collect();
    let replicas = input
        .iter()
        .map(|l| (l.clone(), subset(&mut rng, &[0, 1, 2, 3], 0.3).into_iter().map(|k| ses[k].clone()).collect()))
        .collect();
    Instance {
        ces,
        vo: VOS[rng.random_range(0..2)],
        authorized_sites,
        req,
        rank,
        input,
        replicas,
        strict: rng.random_bool(0.2),
    }
}

pub fn jdl_text(inst: &Instance) -> String {
    let req = match inst.req {
        Req::True => "true".to_string(),
        Req::Tag(t) => format!("Member(\"{}\", other.RunTimeEnvironment)", TAGS[t]),
        Req::TagAndFree(t, k) => format!("Member(\"{}\", other.RunTimeEnvironment) && other.FreeCPUs >= {k}", TAGS[t]),
        Req::FreeOrWaiting(k) => format!("other.FreeCPUs > {k} || other.WaitingJobs == 0"),
        Req::Undefined => "other.NoSuchAttribute > 1".to_string(),
    };
    let rank = match inst.rank {
        Rank::Default => None,
        Rank::NegWaiting => Some("-other.WaitingJobs"),
        Rank::FreeMinusWaiting => Some("other.FreeCPUs - other.WaitingJobs"),
        Rank::Missing => Some("other.NoSuchAttribute"),
        Rank::Total => Some("other.TotalCPUs * 2"),
    };
    let mut s = format!("Executable = \"sim.sh\";\nRequirements = {req};\n");
    if let Some(r) = rank {
        s += &format!("Rank = {r};\n");
    }
    if !inst.input.is_empty() {
        let l: Vec<String> = inst.input.iter().map(|x| format!("\"{x}\"")).collect();
        s += &format!("InputData = {{{}}};\n", l.join(", "));
    }
    s
}

pub fn candidates(inst: &Instance) -> Vec<Candidate> {
    inst.ces
        .iter()
        .map(|c| {
            let mut a = AttrMap::new();
            a.insert("CEId", Value::Str(c.id.clone()));
            a.insert("FreeCPUs", Value::Int(c.free));
            a.insert("WaitingJobs", Value::Int(c.waiting));
            a.insert("TotalCPUs", Value::Int(c.total));
            a.insert("RunTimeEnvironment", Value::List(c.tags.iter().map(|t| Value::Str(t.to_string())).collect()));
            Candidate {
                ce: c.id.clone(),
                site: c.site.clone(),
                attrs: a,
                authorized_vos: c.vos.iter().map(|v| v.to_string()).collect(),
                close_ses: c.close.clone(),
            }
        })
        .collect()
}

/// Scores each CE on its own, then keeps the best by a linear scan.
pub fn oracle(inst: &Instance) -> Option<String> {
    let mut best: Option<(bool, Option<f64>, &str)> = None;
    for c in &inst.ces {
        if !c.vos.contains(&inst.vo) || !inst.authorized_sites.contains(&c.site) {
            continue;
        }
        let ok = match inst.req {
            Req::True => true,
            Req::Tag(t) => c.tags.contains(&TAGS[t]),
            Req::TagAndFree(t, k) => c.tags.contains(&TAGS[t]) && c.free >= k,
            Req::FreeOrWaiting(k) => c.free > k || c.waiting == 0,
            Req::Undefined => false,
        };
        if !ok {
            continue;
        }
        let close = inst.input.is_empty()
            || inst.input.iter().any(|l| inst.replicas[l].iter().any(|se| c.close.contains(se)));
        if inst.strict && !close {
            continue;
        }
        let rank = match inst.rank {
            Rank::Default => Some(c.free as f64),
            Rank::NegWaiting => Some(-c.waiting as f64),
            Rank::FreeMinusWaiting => Some((c.free - c.waiting) as f64),
            Rank::Missing => None,
            Rank::Total => Some((c.total * 2) as f64),
        };
        let better = match best {
            None => true,
            Some((bc, br, bid)) => {
                if close != bc {
                    close
                } else if rank != br {
                    match (rank, br) {
                        (Some(x), Some(y)) => x > y,
                        (Some(_), None) => true,
                        _ => false,
                    }
                } else {
                    c.id.as_str() < bid
                }
            }
        };
        if better {
            best = Some((close, rank, &c.id));
        }
    }
    best.map(|(_, _, id)| id.to_string())
}

/// Broker choice and oracle choice for the instance generated from `seed`.
pub fn compare(seed: u64) -> (Option<String>, Option<String>) {
    let inst = instance(seed);
    let default_rank = parse_expr("other.FreeCPUs").unwrap();
    let none = BTreeSet::new();
    let jdl = JdlDocument::parse(&jdl_text(&inst)).unwrap();
    let input = MatchInput {
        jdl: &jdl,
        vo: inst.vo,
        default_rank: &default_rank,
        strict_data: inst.strict,
        replicas: &inst.replicas,
        excluded: &none,
    };
    let got = rank_candidates(&input, &candidates(&inst), |s| inst.authorized_sites.contains(s));
    (got.chosen().map(|r| r.ce.clone()), oracle(&inst))
}
