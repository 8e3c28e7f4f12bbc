//! Prefix search filters, `(&(objectClass=GlueCE)(FreeCPUs>=1))` style.

use std::fmt;
use std::str::FromStr;

use super::{AttributeType, DirectoryEntry, InfoError, Schema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryFilter {
    Equality(String, String),
    Presence(String),
    ObjectClassIs(String),
    GreaterOrEqual(String, i64),
    LessOrEqual(String, i64),
    And(Vec<QueryFilter>),
    Or(Vec<QueryFilter>),
    Not(Box<QueryFilter>),
}

impl QueryFilter {
    /// The filter that accepts every entry.
    pub fn any() -> Self {
        QueryFilter::Presence("objectClass".into())
    }

    /// Evaluates the filter on one entry. Ordering comparisons only succeed
    /// on attributes the schema declares as integers.
    pub fn matches(&self, entry: &DirectoryEntry, schema: &Schema) -> bool {
        match self {
            QueryFilter::Equality(attr, value) => {
                if attr.eq_ignore_ascii_case("objectclass") {
                    entry.object_classes.iter().any(|c| c.eq_ignore_ascii_case(value))
                } else {
                    entry.values(attr).iter().any(|v| v == value)
                }
            }
            QueryFilter::Presence(attr) => {
                attr.eq_ignore_ascii_case("objectclass") || !entry.values(attr).is_empty()
            }
            QueryFilter::ObjectClassIs(name) => entry.object_classes.iter().any(|c| c.eq_ignore_ascii_case(name)),
            QueryFilter::GreaterOrEqual(attr, bound) => numeric(entry, schema, attr).any(|v| v >= *bound),
            QueryFilter::LessOrEqual(attr, bound) => numeric(entry, schema, attr).any(|v| v <= *bound),
            QueryFilter::And(children) => children.iter().all(|c| c.matches(entry, schema)),
            QueryFilter::Or(children) => children.iter().any(|c| c.matches(entry, schema)),
            QueryFilter::Not(inner) => !inner.matches(entry, schema),
        }
    }
}

fn numeric<'a>(entry: &'a DirectoryEntry, schema: &Schema, attr: &str) -> impl Iterator<Item = i64> + 'a {
    let is_int = schema.attribute_type(attr) == Some(AttributeType::Integer);
    entry
        .values(attr)
        .iter()
        .filter(move |_| is_int)
        .filter_map(|v| v.trim().parse::<i64>().ok())
}

impl fmt::Display for QueryFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryFilter::Equality(a, v) => write!(f, "({a}={v})"),
            QueryFilter::Presence(a) => write!(f, "({a}=*)"),
            QueryFilter::ObjectClassIs(c) => write!(f, "(objectClass={c})"),
            QueryFilter::GreaterOrEqual(a, n) => write!(f, "({a}>={n})"),
            QueryFilter::LessOrEqual(a, n) => write!(f, "({a}<={n})"),
            QueryFilter::And(cs) | QueryFilter::Or(cs) => {
                f.write_str(if matches!(self, QueryFilter::And(_)) { "(&" } else { "(|" })?;
                for c in cs {
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            QueryFilter::Not(inner) => write!(f, "(!{inner})"),
        }
    }
}

impl FromStr for QueryFilter {
    type Err = InfoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        let wrapped;
        let text = if text.starts_with('(') {
            text
        } else {
            wrapped = format!("({text})");
            wrapped.as_str()
        };
        let mut p = FilterParser { src: text.as_bytes(), pos: 0 };
        let filter = p.filter()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input after filter"));
        }
        Ok(filter)
    }
}

struct FilterParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl FilterParser<'_> {
    fn error(&self, msg: &str) -> InfoError {
        InfoError::FilterSyntax { offset: self.pos, message: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), InfoError> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", b as char)))
        }
    }

    fn filter(&mut self) -> Result<QueryFilter, InfoError> {
        self.expect(b'(')?;
        self.skip_ws();
        let f = match self.src.get(self.pos) {
            Some(b'&') | Some(b'|') => {
                let and = self.src[self.pos] == b'&';
                self.pos += 1;
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    if self.src.get(self.pos) == Some(&b'(') {
                        children.push(self.filter()?);
                    } else {
                        break;
                    }
                }
                if children.is_empty() {
                    return Err(self.error("and/or needs at least one operand"));
                }
                if and {
                    QueryFilter::And(children)
                } else {
                    QueryFilter::Or(children)
                }
            }
            Some(b'!') => {
                self.pos += 1;
                QueryFilter::Not(Box::new(self.filter()?))
            }
            Some(_) => self.item()?,
            None => return Err(self.error("unexpected end of filter")),
        };
        self.expect(b')')?;
        Ok(f)
    }

    fn item(&mut self) -> Result<QueryFilter, InfoError> {
        let start = self.pos;
        while self.pos < self.src.len() && !matches!(self.src[self.pos], b'=' | b'>' | b'<' | b'(' | b')') {
            self.pos += 1;
        }
        let attr = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("").trim().to_string();
        if attr.is_empty() || attr.contains(char::is_whitespace) {
            return Err(self.error("expected attribute name"));
        }
        let op = match (self.src.get(self.pos), self.src.get(self.pos + 1)) {
            (Some(b'='), _) => {
                self.pos += 1;
                "="
            }
            (Some(b'>'), Some(b'=')) => {
                self.pos += 2;
                ">="
            }
            (Some(b'<'), Some(b'=')) => {
                self.pos += 2;
                "<="
            }
            _ => return Err(self.error("expected '=', '>=' or '<='")),
        };
        let vstart = self.pos;
        while self.pos < self.src.len() && !matches!(self.src[self.pos], b'(' | b')') {
            self.pos += 1;
        }
        let value = std::str::from_utf8(&self.src[vstart..self.pos]).unwrap_or("").trim().to_string();
        if value.is_empty() {
            return Err(self.error("expected value"));
        }
        Ok(match op {
            "=" if value == "*" => QueryFilter::Presence(attr),
            "=" if attr.eq_ignore_ascii_case("objectclass") => QueryFilter::ObjectClassIs(value),
            "=" => QueryFilter::Equality(attr, value),
            _ => {
                let n: i64 = value.parse().map_err(|_| {
                    self.pos = vstart;
                    self.error("ordering comparison needs an integer")
                })?;
                if op == ">=" {
                    QueryFilter::GreaterOrEqual(attr, n)
                } else {
                    QueryFilter::LessOrEqual(attr, n)
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> QueryFilter {
        s.parse().unwrap()
    }

    #[test]
    fn parses_documented_shapes() {
        assert_eq!(
            f("(&(objectClass=GlueCE)(FreeCPUs>=1))"),
            QueryFilter::And(vec![
                QueryFilter::ObjectClassIs("GlueCE".into()),
                QueryFilter::GreaterOrEqual("FreeCPUs".into(), 1)
            ])
        );
        assert_eq!(f("(CEId=*)"), QueryFilter::Presence("CEId".into()));
        assert_eq!(f("LRMSType=pbs"), QueryFilter::Equality("LRMSType".into(), "pbs".into()));
        assert_eq!(
            f("(|(a=1)(!(b<=2)))"),
            QueryFilter::Or(vec![
                QueryFilter::Equality("a".into(), "1".into()),
                QueryFilter::Not(Box::new(QueryFilter::LessOrEqual("b".into(), 2)))
            ])
        );
    }

    #[test]
    fn display_round_trips() {
        for s in ["(&(objectClass=GlueCE)(FreeCPUs>=1))", "(|(a=1)(!(b<=-2)))", "(x=*)"] {
            assert_eq!(f(s).to_string(), s);
            assert_eq!(f(&f(s).to_string()), f(s));
        }
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "(", "(&)", "(a>=x)", "(a=1))", "(=1)", "(a)", "(a=)", "(a b=1)"] {
            assert!(bad.parse::<QueryFilter>().is_err(), "{bad}");
        }
    }
}
