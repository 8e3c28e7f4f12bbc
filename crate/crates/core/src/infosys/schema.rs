//! Object-class and attribute-type definitions, and the three resource
//! schemas shipped with the simulator (Globus MDS, EDG and GLUE).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DirectoryEntry, InfoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeType {
    String,
    Integer,
    Boolean,
    StringList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDef {
    pub name: String,
    pub ty: AttributeType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectClassDef {
    pub name: String,
    pub required: Vec<String>,
    pub optional: Vec<String>,
}

/// Why an entry was refused at ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemaViolation {
    NoObjectClass,
    UnknownObjectClass(String),
    MissingRequired { class: String, attribute: String },
    UndeclaredAttribute(String),
    NotAllowed(String),
    BadValue { attribute: String, value: String },
    MultipleValues(String),
    LeafNotInAttributes(String),
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoObjectClass => f.write_str("entry declares no object class"),
            Self::UnknownObjectClass(c) => write!(f, "unknown object class {c}"),
            Self::MissingRequired { class, attribute } => {
                write!(f, "object class {class} requires attribute {attribute}")
            }
            Self::UndeclaredAttribute(a) => write!(f, "attribute {a} has no declared type"),
            Self::NotAllowed(a) => write!(f, "attribute {a} is not allowed by any declared object class"),
            Self::BadValue { attribute, value } => write!(f, "value {value:?} is not valid for {attribute}"),
            Self::MultipleValues(a) => write!(f, "single-valued attribute {a} has several values"),
            Self::LeafNotInAttributes(r) => write!(f, "leaf component {r} missing from attributes"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    classes: BTreeMap<String, ObjectClassDef>,
    attributes: BTreeMap<String, AttributeDef>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define_attribute(&mut self, name: &str, ty: AttributeType) -> &mut Self {
        self.attributes.insert(
            name.to_ascii_lowercase(),
            AttributeDef { name: name.to_string(), ty },
        );
        self
    }

    pub fn define_class(&mut self, name: &str, required: &[&str], optional: &[&str]) -> Result<&mut Self, InfoError> {
        let req: BTreeSet<String> = required.iter().map(|a| a.to_ascii_lowercase()).collect();
        if let Some(a) = optional.iter().find(|a| req.contains(&a.to_ascii_lowercase())) {
            return Err(InfoError::Schema(format!("{name}: {a} is both required and optional")));
        }
        for a in required.iter().chain(optional) {
            if !self.attributes.contains_key(&a.to_ascii_lowercase()) {
                return Err(InfoError::Schema(format!("{name}: attribute {a} has no declared type")));
            }
        }
        self.classes.insert(
            name.to_ascii_lowercase(),
            ObjectClassDef {
                name: name.to_string(),
                required: required.iter().map(|s| s.to_string()).collect(),
                optional: optional.iter().map(|s| s.to_string()).collect(),
            },
        );
        Ok(self)
    }

    /// Union of two schemas. Later definitions replace earlier ones of the same name.
    pub fn merged(mut self, other: &Schema) -> Self {
        self.attributes.extend(other.attributes.clone());
        self.classes.extend(other.classes.clone());
        self
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.get(&name.to_ascii_lowercase())
    }

    pub fn attribute_type(&self, name: &str) -> Option<AttributeType> {
        self.attribute(name).map(|a| a.ty)
    }

    pub fn class(&self, name: &str) -> Option<&ObjectClassDef> {
        self.classes.get(&name.to_ascii_lowercase())
    }

    pub fn classes(&self) -> impl Iterator<Item = &ObjectClassDef> {
        self.classes.values()
    }

    /// Checks `entry` and returns a copy with object-class and attribute
    /// names rewritten to their declared spelling.
    pub fn validate(&self, entry: &DirectoryEntry) -> Result<DirectoryEntry, SchemaViolation> {
        if entry.object_classes.is_empty() {
            return Err(SchemaViolation::NoObjectClass);
        }
        let mut classes = BTreeSet::new();
        let mut allowed = BTreeSet::new();
        for oc in &entry.object_classes {
            let def = self
                .class(oc)
                .ok_or_else(|| SchemaViolation::UnknownObjectClass(oc.clone()))?;
            classes.insert(def.name.clone());
            for a in def.required.iter().chain(&def.optional) {
                allowed.insert(a.to_ascii_lowercase());
            }
        }

        let mut attributes: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (name, values) in &entry.attributes {
            let def = self
                .attribute(name)
                .ok_or_else(|| SchemaViolation::UndeclaredAttribute(name.clone()))?;
            if !allowed.contains(&name.to_ascii_lowercase()) {
                return Err(SchemaViolation::NotAllowed(def.name.clone()));
            }
            if values.len() > 1 && def.ty != AttributeType::StringList {
                return Err(SchemaViolation::MultipleValues(def.name.clone()));
            }
            for v in values {
                let ok = match def.ty {
                    AttributeType::Integer => v.trim().parse::<i64>().is_ok(),
                    AttributeType::Boolean => matches!(v.to_ascii_uppercase().as_str(), "TRUE" | "FALSE"),
                    AttributeType::String | AttributeType::StringList => !v.is_empty(),
                };
                if !ok {
                    return Err(SchemaViolation::BadValue {
                        attribute: def.name.clone(),
                        value: v.clone(),
                    });
                }
            }
            if !values.is_empty() {
                attributes.entry(def.name.clone()).or_default().extend(values.iter().cloned());
            }
        }

        for oc in &entry.object_classes {
            let def = self.class(oc).expect("checked above");
            for req in &def.required {
                if !attributes.keys().any(|k| k.eq_ignore_ascii_case(req)) {
                    return Err(SchemaViolation::MissingRequired {
                        class: def.name.clone(),
                        attribute: req.clone(),
                    });
                }
            }
        }

        let leaf = entry.dn.leaf();
        let leaf_present = attributes
            .iter()
            .any(|(k, vs)| k.eq_ignore_ascii_case(leaf.attribute()) && vs.iter().any(|v| v == leaf.value()));
        if !leaf_present {
            return Err(SchemaViolation::LeafNotInAttributes(leaf.to_string()));
        }

        Ok(DirectoryEntry {
            dn: entry.dn.clone(),
            object_classes: classes,
            attributes,
            source_id: entry.source_id.clone(),
            published_at: entry.published_at,
        })
    }

    /// Globus MDS host objects.
    pub fn globus() -> Self {
        let mut s = Schema::new();
        s.define_attribute("Mds-Hostname", AttributeType::String)
            .define_attribute("Mds-Os-name", AttributeType::String)
            .define_attribute("Mds-Cpu-Total-count", AttributeType::Integer);
        s.define_class("MdsHost", &["Mds-Hostname"], &["Mds-Os-name", "Mds-Cpu-Total-count"])
            .expect("static schema");
        s
    }

    /// EDG-style computing and storage element objects.
    pub fn edg() -> Self {
        let mut s = Self::resource_attributes();
        s.define_class("ComputingElement", CE_REQUIRED, CE_OPTIONAL).expect("static schema");
        s.define_class("StorageElement", SE_REQUIRED, SE_OPTIONAL).expect("static schema");
        s
    }

    /// GLUE-style objects: the same resource attributes under GLUE class names,
    /// keyed by a GLUE unique id.
    pub fn glue() -> Self {
        let mut s = Self::resource_attributes();
        s.define_attribute("GlueCEUniqueID", AttributeType::String)
            .define_attribute("GlueSEUniqueID", AttributeType::String);
        let ce_req: Vec<&str> = std::iter::once("GlueCEUniqueID").chain(CE_REQUIRED.iter().copied()).collect();
        let se_req: Vec<&str> = std::iter::once("GlueSEUniqueID").chain(SE_REQUIRED.iter().copied()).collect();
        s.define_class("GlueCE", &ce_req, CE_OPTIONAL).expect("static schema");
        s.define_class("GlueSE", &se_req, SE_OPTIONAL).expect("static schema");
        s
    }

    /// Everything a WorldGrid resource may publish.
    pub fn worldgrid() -> Self {
        Self::globus().merged(&Self::edg()).merged(&Self::glue())
    }

    fn resource_attributes() -> Self {
        let mut s = Schema::new();
        s.define_attribute("CEId", AttributeType::String)
            .define_attribute("LRMSType", AttributeType::String)
            .define_attribute("TotalCPUs", AttributeType::Integer)
            .define_attribute("FreeCPUs", AttributeType::Integer)
            .define_attribute("RunningJobs", AttributeType::Integer)
            .define_attribute("WaitingJobs", AttributeType::Integer)
            .define_attribute("RunTimeEnvironment", AttributeType::StringList)
            .define_attribute("AuthorizedVOs", AttributeType::StringList)
            .define_attribute("CloseSEs", AttributeType::StringList)
            .define_attribute("SEId", AttributeType::String)
            .define_attribute("TotalBytes", AttributeType::Integer)
            .define_attribute("UsedBytes", AttributeType::Integer)
            .define_attribute("Protocols", AttributeType::StringList)
            .define_attribute("HostName", AttributeType::String)
            .define_attribute("SiteId", AttributeType::String);
        s
    }
}

pub const EDG_CE_CLASS: &str = "ComputingElement";
pub const EDG_SE_CLASS: &str = "StorageElement";
pub const GLUE_CE_CLASS: &str = "GlueCE";
pub const GLUE_SE_CLASS: &str = "GlueSE";

const CE_REQUIRED: &[&str] = &["CEId", "LRMSType", "TotalCPUs", "FreeCPUs", "RunningJobs", "WaitingJobs"];
const CE_OPTIONAL: &[&str] = &["RunTimeEnvironment", "AuthorizedVOs", "CloseSEs", "HostName", "SiteId"];
const SE_REQUIRED: &[&str] = &["SEId", "TotalBytes", "UsedBytes"];
const SE_OPTIONAL: &[&str] = &["Protocols", "HostName", "SiteId"];

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(dn: &str, classes: &[&str], attrs: &[(&str, &str)]) -> DirectoryEntry {
        let mut e = DirectoryEntry::new(dn.parse().unwrap(), "test", 0);
        for c in classes {
            e.object_classes.insert(c.to_string());
        }
        for (k, v) in attrs {
            e.attributes.entry(k.to_string()).or_default().push(v.to_string());
        }
        e
    }

    #[test]
    fn class_invariants_enforced() {
        let mut s = Schema::new();
        s.define_attribute("a", AttributeType::String);
        assert!(s.define_class("X", &["a"], &["a"]).is_err());
        assert!(s.define_class("X", &["a"], &["b"]).is_err());
        assert!(s.define_class("X", &["a"], &[]).is_ok());
    }

    #[test]
    fn validate_canonicalizes_names() {
        let s = Schema::globus();
        let e = entry("mds-hostname=grid001,o=grid", &["mdshost"], &[("mds-hostname", "grid001")]);
        let v = s.validate(&e).unwrap();
        assert!(v.object_classes.contains("MdsHost"));
        assert_eq!(v.attributes["Mds-Hostname"], vec!["grid001".to_string()]);
    }

    #[test]
    fn validate_reports_violations() {
        let s = Schema::worldgrid();
        let missing = entry("ceid=x,o=grid", &["ComputingElement"], &[("CEId", "x")]);
        assert!(matches!(s.validate(&missing), Err(SchemaViolation::MissingRequired { .. })));

        let bad_int = entry("seid=s,o=grid", &["StorageElement"], &[("SEId", "s"), ("TotalBytes", "lots"), ("UsedBytes", "0")]);
        assert!(matches!(s.validate(&bad_int), Err(SchemaViolation::BadValue { .. })));

        let leaf = entry("seid=t,o=grid", &["StorageElement"], &[("SEId", "s"), ("TotalBytes", "1"), ("UsedBytes", "0")]);
        assert!(matches!(s.validate(&leaf), Err(SchemaViolation::LeafNotInAttributes(_))));

        let undeclared = entry("mds-hostname=h,o=grid", &["MdsHost"], &[("Mds-Hostname", "h"), ("Colour", "red")]);
        assert!(matches!(s.validate(&undeclared), Err(SchemaViolation::UndeclaredAttribute(_))));

        let not_allowed = entry("mds-hostname=h,o=grid", &["MdsHost"], &[("Mds-Hostname", "h"), ("FreeCPUs", "1")]);
        assert!(matches!(s.validate(&not_allowed), Err(SchemaViolation::NotAllowed(_))));

        let unknown = entry("x=h,o=grid", &["Nope"], &[]);
        assert!(matches!(s.validate(&unknown), Err(SchemaViolation::UnknownObjectClass(_))));
    }

    #[test]
    fn glue_and_edg_share_resource_attributes() {
        let s = Schema::worldgrid();
        let edg = s.class(EDG_CE_CLASS).unwrap();
        let glue = s.class(GLUE_CE_CLASS).unwrap();
        for a in &edg.required {
            assert!(glue.required.contains(a));
        }
        assert_eq!(s.attribute_type("runtimeenvironment"), Some(AttributeType::StringList));
    }
}
