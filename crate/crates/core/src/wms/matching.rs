//! Matchmaking: authorization, requirements, data location, rank, tie-break.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::infosys::{AttributeType, DirectoryEntry, Schema};
use crate::jdl::{evaluate, AttrMap, EvalEnv, Expr, JdlDocument, Value};

/// A CE as the broker sees it in the directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub ce: String,
    pub site: String,
    pub attrs: AttrMap,
    pub authorized_vos: Vec<String>,
    pub close_ses: Vec<String>,
}

impl Candidate {
    /// Builds a candidate from a published CE entry, typing attribute values
    /// with `schema`. Entries without a CE id are skipped.
    pub fn from_entry(e: &DirectoryEntry, schema: &Schema) -> Option<Self> {
        let ce = e.first("CEId").or_else(|| e.first("GlueCEUniqueID"))?.to_string();
        Some(Self {
            ce,
            site: e.first("SiteId").unwrap_or_default().to_string(),
            attrs: entry_attrs(e, schema),
            authorized_vos: e.values("AuthorizedVOs").to_vec(),
            close_ses: e.values("CloseSEs").to_vec(),
        })
    }
}

/// Directory attributes as expression values.
pub fn entry_attrs(e: &DirectoryEntry, schema: &Schema) -> AttrMap {
    let mut m = AttrMap::new();
    for (name, vals) in &e.attributes {
        let ty = schema.attribute_type(name).unwrap_or(AttributeType::String);
        let v = match ty {
            AttributeType::StringList => Value::List(vals.iter().cloned().map(Value::Str).collect()),
            AttributeType::Integer => vals.first().and_then(|s| s.parse().ok()).map_or(Value::Undefined, Value::Int),
            AttributeType::Boolean => match vals.first().map(|s| s.to_ascii_lowercase()) {
                Some(s) if s == "true" => Value::Bool(true),
                Some(s) if s == "false" => Value::Bool(false),
                _ => Value::Undefined,
            },
            AttributeType::String => vals.first().cloned().map_or(Value::Undefined, Value::Str),
        };
        m.insert(name, v);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub ce: String,
    pub site: String,
    /// `None` when the rank expression is undefined or not a number.
    pub rank: Option<f64>,
    pub data_close: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub ranked: Vec<Ranked>,
}

impl MatchResult {
    pub fn chosen(&self) -> Option<&Ranked> {
        self.ranked.first()
    }
}

/// What the broker needs besides the candidates.
pub struct MatchInput<'a> {
    pub jdl: &'a JdlDocument,
    pub vo: &'a str,
    pub default_rank: &'a Expr,
    pub strict_data: bool,
    /// SEs holding each input file; empty when the catalogue is unreachable.
    pub replicas: &'a BTreeMap<String, BTreeSet<String>>,
    pub excluded: &'a BTreeSet<String>,
}

/// Descending by data locality, then rank (undefined last), then ascending CE id.
pub fn compare(a: &Ranked, b: &Ranked) -> Ordering {
    let rank = match (a.rank, b.rank) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    b.data_close.cmp(&a.data_close).then(rank).then_with(|| a.ce.cmp(&b.ce))
}

/// Filters and orders `candidates`. `authorized(site)` says whether the owner
/// maps to a local account there.
pub fn rank_candidates(
    input: &MatchInput<'_>,
    candidates: &[Candidate],
    authorized: impl Fn(&str) -> bool,
) -> MatchResult {
    let own = input.jdl.own_attributes();
    let rank_expr = input.jdl.rank.as_ref().unwrap_or(input.default_rank);
    let mut ranked: Vec<Ranked> = candidates
        .iter()
        .filter(|c| !input.excluded.contains(&c.ce))
        .filter(|c| c.authorized_vos.iter().any(|v| v == input.vo) && authorized(&c.site))
        .filter(|c| input.jdl.requirements_satisfied(&c.attrs))
        .map(|c| {
            let data_close = input.jdl.input_data.is_empty()
                || input.jdl.input_data.iter().any(|lfn| {
                    input.replicas.get(lfn).is_some_and(|ses| c.close_ses.iter().any(|s| ses.contains(s)))
                });
            let rank = evaluate(rank_expr, &EvalEnv { other: &c.attrs, own: &own }).as_f64();
            Ranked { ce: c.ce.clone(), site: c.site.clone(), rank, data_close }
        })
        .filter(|r| !input.strict_data || r.data_close)
        .collect();
    ranked.sort_by(compare);
    MatchResult { ranked }
}
