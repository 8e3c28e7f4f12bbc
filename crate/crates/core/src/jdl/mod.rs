//! Job descriptions: `Name = value;` attributes with classad-style
//! `Requirements` and `Rank` expressions evaluated against a resource.
//!
//! The concrete expression syntax (operators, `other.`/`self.` scoping, the
//! `Member` function) is a reconstruction of the EDG JDL conventions; it is
//! not taken from a normative grammar.

mod expr;
mod parser;
mod print;

use std::fmt;

pub use expr::{evaluate, AttrMap, AttrScope, BinaryOp, EvalEnv, Expr, Function, UnaryOp, Value};
pub use print::expr_to_string;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JdlError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("attribute {name} defined twice (second at {line}:{column})")]
    DuplicateAttribute { name: String, line: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JdlDocument {
    pub executable: String,
    pub arguments: String,
    pub stdout: String,
    pub stderr: String,
    pub input_sandbox: Vec<String>,
    pub output_sandbox: Vec<String>,
    pub input_data: Vec<String>,
    pub virtual_organisation: Option<String>,
    pub requirements: Expr,
    pub rank: Option<Expr>,
    /// Attributes with no dedicated field, in source order.
    pub extra: Vec<(String, Expr)>,
}

const KNOWN: [&str; 10] = [
    "Executable",
    "Arguments",
    "StdOutput",
    "StdError",
    "InputSandbox",
    "OutputSandbox",
    "InputData",
    "VirtualOrganisation",
    "Requirements",
    "Rank",
];

impl JdlDocument {
    /// A minimal document: just an executable, requirements `true`.
    pub fn new(executable: &str) -> Self {
        Self {
            executable: executable.to_string(),
            arguments: String::new(),
            stdout: String::new(),
            stderr: String::new(),
            input_sandbox: Vec::new(),
            output_sandbox: Vec::new(),
            input_data: Vec::new(),
            virtual_organisation: None,
            requirements: Expr::bool(true),
            rank: None,
            extra: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, JdlError> {
        let mut p = parser::Parser::new(text)?;
        let (attrs, end) = p.attributes()?;

        let mut seen: Vec<String> = Vec::new();
        let mut doc = JdlDocument::new("");
        let mut has_exec = false;
        for (name, value, pos) in attrs {
            let lower = name.to_ascii_lowercase();
            if seen.contains(&lower) {
                return Err(JdlError::DuplicateAttribute { name, line: pos.line, column: pos.col });
            }
            seen.push(lower.clone());
            let type_err = |what: &str| JdlError::Syntax {
                line: pos.line,
                column: pos.col,
                message: format!("{name} must be {what}"),
            };
            match lower.as_str() {
                "executable" => {
                    doc.executable = string_value(&value).filter(|s| !s.is_empty()).ok_or_else(|| type_err("a non-empty string"))?;
                    has_exec = true;
                }
                "arguments" => doc.arguments = string_value(&value).ok_or_else(|| type_err("a string"))?,
                "stdoutput" => doc.stdout = string_value(&value).ok_or_else(|| type_err("a string"))?,
                "stderror" => doc.stderr = string_value(&value).ok_or_else(|| type_err("a string"))?,
                "inputsandbox" => doc.input_sandbox = string_list(&value).ok_or_else(|| type_err("a list of strings"))?,
                "outputsandbox" => doc.output_sandbox = string_list(&value).ok_or_else(|| type_err("a list of strings"))?,
                "inputdata" => doc.input_data = string_list(&value).ok_or_else(|| type_err("a list of strings"))?,
                "virtualorganisation" => {
                    doc.virtual_organisation = Some(string_value(&value).ok_or_else(|| type_err("a string"))?)
                }
                "requirements" => doc.requirements = value,
                "rank" => doc.rank = Some(value),
                _ => doc.extra.push((name, value)),
            }
        }
        if !has_exec {
            return Err(JdlError::Syntax {
                line: end.line,
                column: end.col,
                message: "Executable is required".into(),
            });
        }
        Ok(doc)
    }

    /// Parses raw bytes; invalid UTF-8 is reported as a positioned syntax error.
    pub fn parse_bytes(bytes: &[u8]) -> Result<Self, JdlError> {
        match std::str::from_utf8(bytes) {
            Ok(s) => Self::parse(s),
            Err(e) => {
                let valid = &bytes[..e.valid_up_to()];
                let text = String::from_utf8_lossy(valid);
                let line = text.matches('\n').count() + 1;
                let column = text.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
                Err(JdlError::Syntax { line, column, message: "invalid UTF-8".into() })
            }
        }
    }

    pub fn extra(&self, name: &str) -> Option<&Expr> {
        self.extra.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, e)| e)
    }

    /// The job's own attributes as seen through `self.` in expressions.
    pub fn own_attributes(&self) -> AttrMap {
        let mut m = AttrMap::new();
        let strs = |v: &[String]| Value::List(v.iter().cloned().map(Value::Str).collect());
        m.insert("Executable", Value::Str(self.executable.clone()));
        m.insert("Arguments", Value::Str(self.arguments.clone()));
        m.insert("StdOutput", Value::Str(self.stdout.clone()));
        m.insert("StdError", Value::Str(self.stderr.clone()));
        m.insert("InputSandbox", strs(&self.input_sandbox));
        m.insert("OutputSandbox", strs(&self.output_sandbox));
        m.insert("InputData", strs(&self.input_data));
        if let Some(vo) = &self.virtual_organisation {
            m.insert("VirtualOrganisation", Value::Str(vo.clone()));
        }
        let empty = AttrMap::new();
        for (name, e) in &self.extra {
            let v = evaluate(e, &EvalEnv { other: &empty, own: &empty });
            if !v.is_undefined() {
                m.insert(name, v);
            }
        }
        m
    }

    pub fn env<'a>(&self, own: &'a AttrMap, other: &'a AttrMap) -> EvalEnv<'a> {
        EvalEnv { other, own }
    }

    /// Canonical text: attributes sorted case-insensitively by name.
    pub fn to_canonical(&self) -> String {
        let mut attrs: Vec<(String, String)> = Vec::new();
        let list = |v: &[String]| Expr::List(v.iter().map(|s| Expr::Literal(Value::Str(s.clone()))).collect());
        let lit = |s: &str| Expr::Literal(Value::Str(s.to_string()));
        let mut push = |name: &str, e: &Expr| attrs.push((name.to_string(), expr_to_string(e)));
        push(KNOWN[0], &lit(&self.executable));
        if !self.arguments.is_empty() {
            push(KNOWN[1], &lit(&self.arguments));
        }
        if !self.stdout.is_empty() {
            push(KNOWN[2], &lit(&self.stdout));
        }
        if !self.stderr.is_empty() {
            push(KNOWN[3], &lit(&self.stderr));
        }
        if !self.input_sandbox.is_empty() {
            push(KNOWN[4], &list(&self.input_sandbox));
        }
        if !self.output_sandbox.is_empty() {
            push(KNOWN[5], &list(&self.output_sandbox));
        }
        if !self.input_data.is_empty() {
            push(KNOWN[6], &list(&self.input_data));
        }
        if let Some(vo) = &self.virtual_organisation {
            push(KNOWN[7], &lit(vo));
        }
        push(KNOWN[8], &self.requirements);
        if let Some(r) = &self.rank {
            push(KNOWN[9], r);
        }
        for (n, e) in &self.extra {
            push(n, e);
        }
        attrs.sort_by(|a, b| a.0.to_ascii_lowercase().cmp(&b.0.to_ascii_lowercase()).then(a.0.cmp(&b.0)));
        let mut out = String::new();
        for (n, v) in attrs {
            out.push_str(&n);
            out.push_str(" = ");
            out.push_str(&v);
            out.push_str(";\n");
        }
        out
    }

    /// True iff `Requirements` evaluates to exactly `true` against `ce`.
    pub fn requirements_satisfied(&self, ce: &AttrMap) -> bool {
        let own = self.own_attributes();
        evaluate(&self.requirements, &EvalEnv { other: ce, own: &own }) == Value::Bool(true)
    }
}

impl fmt::Display for JdlDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

fn string_value(e: &Expr) -> Option<String> {
    match e {
        Expr::Literal(Value::Str(s)) => Some(s.clone()),
        _ => None,
    }
}

fn string_list(e: &Expr) -> Option<Vec<String>> {
    match e {
        Expr::Literal(Value::Str(s)) => Some(vec![s.clone()]),
        Expr::List(items) => items.iter().map(string_value).collect(),
        _ => None,
    }
}

/// Parses a standalone expression such as a rank or requirements string.
pub fn parse_expr(text: &str) -> Result<Expr, JdlError> {
    let mut p = parser::Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_end() {
        let pos = p.pos();
        return Err(JdlError::Syntax { line: pos.line, column: pos.col, message: "unexpected input after expression".into() });
    }
    Ok(e)
}

/// Free-function form of [`JdlDocument::requirements_satisfied`].
pub fn requirements_satisfied(doc: &JdlDocument, ce: &AttrMap) -> bool {
    doc.requirements_satisfied(ce)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ATLAS: &str = r#"
        Executable = "sim.sh";
        Requirements = Member("ATLAS", other.RunTimeEnvironment);
    "#;

    #[test]
    fn parses_member_requirement() {
        let doc = JdlDocument::parse(ATLAS).unwrap();
        assert_eq!(doc.executable, "sim.sh");
        assert!(matches!(doc.requirements, Expr::Call(Function::Member, _)));
        assert!(doc.rank.is_none());
    }

    #[test]
    fn empty_input_requires_executable() {
        assert!(matches!(JdlDocument::parse(""), Err(JdlError::Syntax { .. })));
        assert!(matches!(JdlDocument::parse("Arguments = \"x\";"), Err(JdlError::Syntax { .. })));
    }

    #[test]
    fn duplicate_attributes_case_insensitive() {
        let err = JdlDocument::parse("Executable = \"a\";\nexecutable = \"b\";").unwrap_err();
        assert_eq!(err, JdlError::DuplicateAttribute { name: "executable".into(), line: 2, column: 1 });
    }

    #[test]
    fn requirements_default_and_extras() {
        let doc = JdlDocument::parse("Executable = \"a\"; MaxCPUTime = 60; [bad").unwrap_err();
        assert!(matches!(doc, JdlError::Syntax { .. }));
        let doc = JdlDocument::parse("[ Executable = \"a\"; MaxCPUTime = 60 ]").unwrap();
        assert_eq!(doc.requirements, Expr::bool(true));
        assert_eq!(doc.extra("maxcputime"), Some(&Expr::Literal(Value::Int(60))));
        assert_eq!(doc.own_attributes().get("MaxCPUTime"), Some(&Value::Int(60)));
    }

    #[test]
    fn typed_known_attributes() {
        assert!(JdlDocument::parse("Executable = 3;").is_err());
        assert!(JdlDocument::parse("Executable = \"\";").is_err());
        let doc = JdlDocument::parse("Executable = \"a\"; InputData = \"lfn:/cms/x\";").unwrap();
        assert_eq!(doc.input_data, vec!["lfn:/cms/x".to_string()]);
        assert!(JdlDocument::parse("Executable = \"a\"; InputSandbox = {1};").is_err());
    }

    #[test]
    fn canonical_form_sorts_and_reparses() {
        let text = r#"
            Rank = other.FreeCPUs;
            VirtualOrganisation = "datatag";
            Executable = "sim.sh";
            InputSandbox = {"sim.sh", "cfg.mac"};
            zeta = 1;
            Requirements = other.LRMSType == "pbs" && Member("CMS", other.RunTimeEnvironment);
        "#;
        let doc = JdlDocument::parse(text).unwrap();
        let canon = doc.to_canonical();
        assert_eq!(
            canon,
            "Executable = \"sim.sh\";\n\
             InputSandbox = {\"sim.sh\", \"cfg.mac\"};\n\
             Rank = other.FreeCPUs;\n\
             Requirements = other.LRMSType == \"pbs\" && Member(\"CMS\", other.RunTimeEnvironment);\n\
             VirtualOrganisation = \"datatag\";\n\
             zeta = 1;\n"
        );
        assert_eq!(JdlDocument::parse(&canon).unwrap(), doc);
    }

    #[test]
    fn requirement_matching() {
        let doc = JdlDocument::parse(ATLAS).unwrap();
        let mut with_tag = AttrMap::new();
        with_tag.insert("RunTimeEnvironment", Value::List(vec![Value::Str("ATLAS".into())]));
        let mut without = AttrMap::new();
        without.insert("RunTimeEnvironment", Value::List(vec![Value::Str("CMS".into())]));
        assert!(doc.requirements_satisfied(&with_tag));
        assert!(!doc.requirements_satisfied(&without));
        assert!(!doc.requirements_satisfied(&AttrMap::new()));
        assert!(JdlDocument::new("x").requirements_satisfied(&AttrMap::new()));
    }

    #[test]
    fn invalid_utf8_is_positioned() {
        let err = JdlDocument::parse_bytes(b"Executable = \"a\";\nArg\xff").unwrap_err();
        assert!(matches!(err, JdlError::Syntax { line: 2, column: 4, .. }));
    }
}
