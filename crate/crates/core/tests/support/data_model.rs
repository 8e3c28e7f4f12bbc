//! Reference model for the replica catalogue over a three-site fabric.
#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use worldgrid::datamgmt::{copy_and_register, replicate, DataError, ReplicaCatalog};
use worldgrid::fabric::{Fabric, Scenario};

const GRID: &str = r#"
[grid]
ui_site = "a"

[[vo]]
name = "v"

[[site]]
id = "a"
country = "IT"
continent = "EU"
lat = 45.0
lon = 9.0
flavor = "VDT"
supported_vos = ["v"]
[[site.ce]]
host = "a.eu"
lrms = "pbs"
cpus = 1
[[site.se]]
host = "a.eu"
capacity_bytes = 1000

[[site]]
id = "b"
country = "FR"
continent = "EU"
lat = 46.0
lon = 6.0
flavor = "VDT"
supported_vos = ["v"]
[[site.ce]]
host = "b.eu"
lrms = "pbs"
cpus = 1
[[site.se]]
host = "b.eu"
capacity_bytes = 600

[[site]]
id = "c"
country = "US"
continent = "US"
lat = 41.0
lon = -88.0
flavor = "VDT"
supported_vos = ["v"]
wn_outbound = false
[[site.ce]]
host = "c.us"
lrms = "pbs"
cpus = 1
[[site.se]]
host = "c.us"
capacity_bytes = 400

[[ui_file]]
path = "small"
size = 100

[[ui_file]]
path = "big"
size = 350
"#;

pub fn grid() -> Fabric<()> {
    let mut f = Fabric::from_scenario(&Scenario::parse(GRID).unwrap(), 0);
    f.put_wn_file("a", "out.root", 200);
    f.put_wn_file("c", "out.root", 50);
    f
}


pub const SES: [&str; 4] = ["a.eu", "b.eu", "c.us", "nowhere"];
pub const LFNS: [&str; 4] = ["lfn:/v/f0", "lfn:/v/f1", "lfn:/v/f2", "lfn:/v/f3"];
pub const SOURCES: [&str; 5] = ["ui:small", "ui:big", "ui:gone", "wn:a:out.root", "wn:c:out.root"];

#[derive(Debug, Clone)]
pub enum Op {
    Copy { src: usize, se: usize, lfn: usize },
    Replicate { lfn: usize, se: usize },
    Unregister { lfn: usize, se: usize },
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..SOURCES.len(), 0..SES.len(), 0..LFNS.len()).prop_map(|(src, se, lfn)| Op::Copy { src, se, lfn }),
        (0..LFNS.len(), 0..SES.len()).prop_map(|(lfn, se)| Op::Replicate { lfn, se }),
        (0..LFNS.len(), 0..SES.len()).prop_map(|(lfn, se)| Op::Unregister { lfn, se }),
    ]
}

/// Reference model: a map of sets for the catalogue plus a plain file table.
#[derive(Default)]
pub struct Model {
    reg: BTreeMap<&'static str, BTreeMap<&'static str, u64>>,
    files: BTreeMap<(&'static str, String), u64>,
}

impl Model {
    fn capacity(se: &str) -> Option<u64> {
        match se {
            "a.eu" => Some(1000),
            "b.eu" => Some(600),
            "c.us" => Some(400),
            _ => None,
        }
    }

    fn used(&self, se: &str) -> u64 {
        self.files.iter().filter(|((s, _), _)| *s == se).map(|(_, v)| *v).sum()
    }

    fn path(lfn: &str) -> String {
        format!("/grid/v/{}", &lfn["lfn:/v/".len()..])
    }

    fn put(&mut self, se: &'static str, lfn: &str, size: u64) -> Result<(), &'static str> {
        let p = Self::path(lfn);
        let old = self.files.get(&(se, p.clone())).copied().unwrap_or(0);
        if self.used(se) - old + size > Self::capacity(se).unwrap() {
            return Err("NoSpace");
        }
        self.files.insert((se, p), size);
        Ok(())
    }

    fn apply(&mut self, op: &Op) -> Result<(), &'static str> {
        match *op {
            Op::Copy { src, se, lfn } => {
                let (se, lfn) = (SES[se], LFNS[lfn]);
                Self::capacity(se).ok_or("UnknownSe")?;
                if self.reg.contains_key(lfn) {
                    return Err("LfnExists");
                }
                let size = match SOURCES[src] {
                    "ui:small" => 100,
                    "ui:big" => 350,
                    "wn:a:out.root" => 200,
                    "wn:c:out.root" => return Err("ConnectivityDenied"),
                    _ => return Err("SourceMissing"),
                };
                self.put(se, lfn, size)?;
                self.reg.entry(lfn).or_default().insert(se, size);
                Ok(())
            }
            Op::Replicate { lfn, se } => {
                let (se, lfn) = (SES[se], LFNS[lfn]);
                Self::capacity(se).ok_or("UnknownSe")?;
                let reps = self.reg.get(lfn).ok_or("UnknownLfn")?;
                if reps.contains_key(se) {
                    return Ok(());
                }
                let size = *reps.values().next().unwrap();
                self.put(se, lfn, size)?;
                self.reg.get_mut(lfn).unwrap().insert(se, size);
                Ok(())
            }
            Op::Unregister { lfn, se } => {
                let (se, lfn) = (SES[se], LFNS[lfn]);
                let reps = self.reg.get_mut(lfn).ok_or("UnknownPair")?;
                reps.remove(se).ok_or("UnknownPair")?;
                if reps.is_empty() {
                    self.reg.remove(lfn);
                }
                Ok(())
            }
        }
    }
}

pub fn kind(e: &DataError) -> &'static str {
    match e {
        DataError::UnknownSe(_) => "UnknownSe",
        DataError::LfnExists { .. } => "LfnExists",
        DataError::ConnectivityDenied { .. } => "ConnectivityDenied",
        DataError::SourceMissing(_) => "SourceMissing",
        DataError::NoSpace { .. } => "NoSpace",
        DataError::UnknownLfn(_) => "UnknownLfn",
        DataError::UnknownPair { .. } => "UnknownPair",
        _ => "other",
    }
}


/// Applies `ops` to the real catalogue and to the model, failing on the
/// first disagreement or consistency violation.
pub fn check_sequence(ops: &[Op]) -> Result<(), String> {
    let mut f = grid();
    let mut rc = ReplicaCatalog::new("rc");
    let mut model = Model::default();
    for op in ops {
        let want = model.apply(op);
        let got = match *op {
            Op::Copy { src, se, lfn } => copy_and_register(
                &mut rc, &mut f, &SOURCES[src].parse().unwrap(), SES[se], &LFNS[lfn].parse().unwrap(),
            )
            .map(|_| ()),
            Op::Replicate { lfn, se } => replicate(&mut rc, &mut f, &LFNS[lfn].parse().unwrap(), SES[se]).map(|_| ()),
            Op::Unregister { lfn, se } => rc
                .unregister(&LFNS[lfn].parse().unwrap(), SES[se], &Model::path(LFNS[lfn]))
                .map(|_| ()),
        };
        let got = got.map_err(|e| kind(&e));
        if got != want {
            return Err(format!("{op:?}: got {got:?}, model {want:?}"));
        }
        rc.check_consistency(&f).map_err(|e| format!("after {op:?}: {e}"))?;
        for l in LFNS {
            let got: BTreeMap<String, u64> =
                rc.list_replicas(&l.parse().unwrap()).into_iter().map(|p| (p.se, p.size)).collect();
            let want: BTreeMap<String, u64> = model
                .reg
                .get(l)
                .map(|m| m.iter().map(|(k, v)| (k.to_string(), *v)).collect())
                .unwrap_or_default();
            if got != want {
                return Err(format!("after {op:?}: replicas of {l}: {got:?} vs {want:?}"));
            }
        }
        for se in &SES[..3] {
            if f.se(se).unwrap().used_bytes() != model.used(se) {
                return Err(format!("after {op:?}: {se} usage differs"));
            }
        }
    }
    Ok(())
}
