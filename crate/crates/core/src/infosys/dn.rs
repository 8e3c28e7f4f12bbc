use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::InfoError;

/// One `attribute=value` component of a distinguished name.
///
/// The attribute is stored lowercased; the value is kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rdn {
    attribute: String,
    value: String,
}

impl Rdn {
    pub fn new(attribute: &str, value: &str) -> Result<Self, InfoError> {
        let attribute = attribute.trim();
        let value = value.trim();
        if attribute.is_empty() || value.is_empty() {
            return Err(InfoError::InvalidDn(format!("{attribute}={value}")));
        }
        if attribute.contains([',', '=']) || value.contains(',') {
            return Err(InfoError::InvalidDn(format!("{attribute}={value}")));
        }
        Ok(Self {
            attribute: attribute.to_ascii_lowercase(),
            value: value.to_string(),
        })
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn value(&self) -> &str {
        &self.value
    }
}

impl fmt::Display for Rdn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.attribute, self.value)
    }
}

/// A distinguished name, leaf component first (`ceid=x,mds-vo-name=site,o=grid`).
///
/// Equality and ancestry are decided component by component. Two names that
/// merely share a string suffix (`hostname=grid001` against
/// `mds-hostname=grid001`) are unrelated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DistinguishedName {
    components: Vec<Rdn>,
}

impl DistinguishedName {
    pub fn new(components: Vec<Rdn>) -> Result<Self, InfoError> {
        if components.is_empty() {
            return Err(InfoError::InvalidDn(String::new()));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[Rdn] {
        &self.components
    }

    pub fn leaf(&self) -> &Rdn {
        &self.components[0]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// A new name with `rdn` prepended as the leaf.
    pub fn child(&self, rdn: Rdn) -> Self {
        let mut components = Vec::with_capacity(self.components.len() + 1);
        components.push(rdn);
        components.extend(self.components.iter().cloned());
        Self { components }
    }

    /// True when `self` equals `base` or lies below it in the tree.
    pub fn is_within(&self, base: &DistinguishedName) -> bool {
        let n = base.components.len();
        if self.components.len() < n {
            return false;
        }
        let offset = self.components.len() - n;
        self.components[offset..] == base.components[..]
    }
}

impl FromStr for DistinguishedName {
    type Err = InfoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut components = Vec::new();
        for part in s.split(',') {
            let (attr, value) = part
                .split_once('=')
                .ok_or_else(|| InfoError::InvalidDn(s.to_string()))?;
            components.push(Rdn::new(attr, value).map_err(|_| InfoError::InvalidDn(s.to_string()))?);
        }
        DistinguishedName::new(components).map_err(|_| InfoError::InvalidDn(s.to_string()))
    }
}

impl TryFrom<String> for DistinguishedName {
    type Error = InfoError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<DistinguishedName> for String {
    fn from(dn: DistinguishedName) -> Self {
        dn.to_string()
    }
}

impl fmt::Display for DistinguishedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, rdn) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{rdn}")?;
        }
        Ok(())
    }
}

impl PartialOrd for DistinguishedName {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Lexicographic on the rendered form, so listings sort the way they print.
impl Ord for DistinguishedName {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dn(s: &str) -> DistinguishedName {
        s.parse().unwrap()
    }

    #[test]
    fn parses_and_lowercases_attributes() {
        let d = dn("Mds-Host-hn=grid001, Mds-Vo-name=local,o=grid");
        assert_eq!(d.to_string(), "mds-host-hn=grid001,mds-vo-name=local,o=grid");
        assert_eq!(d.leaf().attribute(), "mds-host-hn");
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn rejects_malformed() {
        assert!("".parse::<DistinguishedName>().is_err());
        assert!("o=".parse::<DistinguishedName>().is_err());
        assert!("=grid".parse::<DistinguishedName>().is_err());
        assert!("grid".parse::<DistinguishedName>().is_err());
        assert!("o=grid,".parse::<DistinguishedName>().is_err());
    }

    #[test]
    fn suffix_strings_are_not_ancestors() {
        let entry = dn("mds-hostname=grid001,o=grid");
        let base = dn("hostname=grid001,o=grid");
        assert!(!entry.is_within(&base));
        assert_ne!(entry, base);
        // the rendered string does end with the base string
        assert!(entry.to_string().ends_with(&base.to_string()));
    }

    #[test]
    fn subtree_containment() {
        let root = dn("o=grid");
        let site = dn("mds-vo-name=bologna,o=grid");
        let ce = site.child(Rdn::new("ceid", "ce.bo:2119/pbs-workq").unwrap());
        assert!(ce.is_within(&site));
        assert!(ce.is_within(&root));
        assert!(site.is_within(&site));
        assert!(!site.is_within(&ce));
        assert!(!dn("mds-vo-name=padova,o=grid").is_within(&site));
    }
}
