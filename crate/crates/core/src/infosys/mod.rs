//! Hierarchical resource directory: schema-checked entries, multi-source
//! ingestion, filtered search and the GRIS / site-GIIS / top-GIIS index tree.

mod directory;
mod dn;
mod filter;
mod index;
mod ldif;
mod schema;

pub use directory::{
    to_ldif, Directory, DirectoryEntry, InfoSource, IngestReport, ProviderFn, Scope, Snapshot, SourceKind,
};
pub use dn::{DistinguishedName, Rdn};
pub use filter::QueryFilter;
pub use index::{IndexLevel, IndexNode, InfoSystem, Registration};
pub use ldif::parse_ldif;
pub use schema::{
    AttributeDef, AttributeType, ObjectClassDef, Schema, SchemaViolation, EDG_CE_CLASS, EDG_SE_CLASS, GLUE_CE_CLASS,
    GLUE_SE_CLASS,
};

/// Registration lifetime when none is given.
pub const DEFAULT_REGISTRATION_TTL: u64 = 60;
/// Provider refresh interval when none is given.
pub const DEFAULT_REFRESH_PERIOD: u64 = 30;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InfoError {
    #[error("invalid distinguished name {0:?}")]
    InvalidDn(String),
    #[error("schema definition error: {0}")]
    Schema(String),
    #[error("filter syntax error at offset {offset}: {message}")]
    FilterSyntax { offset: usize, message: String },
    #[error("line {line}: {message}")]
    Ldif { line: usize, message: String },
    #[error("duplicate source id {0}")]
    DuplicateSourceId(String),
    #[error("duplicate index node {0}")]
    DuplicateNode(String),
    #[error("unknown index node {0}")]
    UnknownNode(String),
    #[error("registering {child} under {node} would create a cycle")]
    CycleDetected { node: String, child: String },
    #[error("index node {0} is down")]
    NodeDown(String),
    #[error("index node {0} is not a top-level index")]
    NotTopLevel(String),
    #[error("all top-level indexes are down")]
    AllIndexesDown,
}
