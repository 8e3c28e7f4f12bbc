//! Line-oriented entry records: a `dn:` line, `objectClass:` lines and
//! `attr: value` lines, with records separated by blank lines.

use super::{DirectoryEntry, DistinguishedName, InfoError};

/// Parses entry records, stamping each with `source_id` and `published_at`.
pub fn parse_ldif(text: &str, source_id: &str, published_at: u64) -> Result<Vec<DirectoryEntry>, InfoError> {
    // unfold continuation lines (leading single space) first, keeping the
    // line number of the physical line each logical line started on
    let mut lines: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let raw = raw.trim_end_matches('\r');
        if let Some(rest) = raw.strip_prefix(' ') {
            match lines.last_mut() {
                Some((_, prev)) if !prev.is_empty() => prev.push_str(rest),
                _ => return Err(err(i + 1, "continuation line without a preceding line")),
            }
        } else {
            lines.push((i + 1, raw.to_string()));
        }
    }

    let mut entries = Vec::new();
    let mut current: Option<DirectoryEntry> = None;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            if let Some(e) = current.take() {
                entries.push(e);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| err(lineno, "expected 'attribute: value'"))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(err(lineno, "empty attribute name"));
        }
        if key.eq_ignore_ascii_case("dn") {
            if current.is_some() {
                return Err(err(lineno, "dn line inside a record; records are separated by blank lines"));
            }
            let dn: DistinguishedName = value.parse().map_err(|_| err(lineno, &format!("invalid dn {value:?}")))?;
            current = Some(DirectoryEntry::new(dn, source_id, published_at));
            continue;
        }
        let entry = current.as_mut().ok_or_else(|| err(lineno, "record must start with a dn line"))?;
        if value.is_empty() {
            return Err(err(lineno, &format!("empty value for {key}")));
        }
        if key.eq_ignore_ascii_case("objectclass") {
            entry.object_classes.insert(value.to_string());
        } else {
            entry.attributes.entry(key.to_string()).or_default().push(value.to_string());
        }
    }
    if let Some(e) = current.take() {
        entries.push(e);
    }
    Ok(entries)
}

fn err(line: usize, message: &str) -> InfoError {
    InfoError::Ldif { line, message: message.to_string() }
}
