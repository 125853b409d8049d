//! Line-oriented text format for fundamental-graph descriptions (`.qg`).
//!
//! ```text
//! graph stanene
//! dim 2
//! vertices v1 v2 v3 v4
//! edge e1 v1 v2 index 1 0
//! edge e2 v1 v2 index 0 1
//! edge e3 v1 v2 index 0 0
//! ```
//!
//! `#` starts a comment. Directives must appear in the order graph, dim,
//! vertices, edges; all four kinds are required. Identifiers are ASCII
//! alphanumerics plus underscore. The parser never panics: every violation
//! becomes a [`ParseDiagnostic`] and parsing continues past recoverable
//! errors so several mistakes can be reported at once.

use std::fmt;

/// Parsed (not yet validated) graph description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSpec {
    pub name: String,
    pub dim: usize,
    pub vertex_names: Vec<String>,
    pub edge_decls: Vec<EdgeDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeDecl {
    pub name: String,
    pub tail: String,
    pub head: String,
    pub index: Vec<i64>,
}

impl EdgeDecl {
    pub fn new(name: &str, tail: &str, head: &str, index: Vec<i64>) -> Self {
        EdgeDecl {
            name: name.into(),
            tail: tail.into(),
            head: head.into(),
            index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    UnknownVertex,
    DuplicateName,
    ArityMismatch,
    MissingHeader,
}

/// One parse problem, anchored at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {:?}: {}",
            self.line, self.column, self.kind, self.message
        )
    }
}

/// A whitespace-separated token with its 1-based starting column.
struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            column: s + 1,
        });
    }
    out
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Graph,
    Dim,
    Vertices,
    Edges,
}

/// Parse `.qg` text. On success the spec satisfies the unique-name and
/// index-arity invariants; otherwise all diagnostics found are returned.
pub fn parse(text: &str) -> Result<GraphSpec, Vec<ParseDiagnostic>> {
    let mut diags: Vec<ParseDiagnostic> = Vec::new();
    let mut name: Option<String> = None;
    let mut dim: Option<usize> = None;
    let mut vertex_names: Vec<String> = Vec::new();
    let mut edge_decls: Vec<EdgeDecl> = Vec::new();
    // names are reserved even when the rest of their declaration is bad, so
    // a later re-declaration is still flagged as a duplicate
    let mut edge_names: std::collections::BTreeSet<String> = Default::default();
    let mut section = Section::Graph;
    let mut saw_edge_line = false;
    let mut last_line = 0usize;

    let mut diag = |line: usize, column: usize, kind: DiagnosticKind, message: String| {
        // capped so a hostile input cannot balloon memory
        if diags.len() < 1000 {
            diags.push(ParseDiagnostic {
                line,
                column,
                kind,
                message,
            });
        }
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        last_line = lineno;
        let body = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let tokens = tokenize(body);
        if tokens.is_empty() {
            continue;
        }
        let keyword = &tokens[0];
        match keyword.text {
            "graph" => {
                if section != Section::Graph {
                    diag(
                        lineno,
                        keyword.column,
                        DiagnosticKind::Syntax,
                        "`graph` directive out of order or repeated".into(),
                    );
                    continue;
                }
                if tokens.len() != 2 || !is_identifier(tokens[1].text) {
                    diag(
                        lineno,
                        tokens.get(1).map_or(keyword.column, |t| t.column),
                        DiagnosticKind::Syntax,
                        "expected `graph <name>` with an identifier name".into(),
                    );
                } else {
                    name = Some(tokens[1].text.to_string());
                }
                section = Section::Dim;
            }
            "dim" => {
                if section != Section::Dim {
                    diag(
                        lineno,
                        keyword.column,
                        if section < Section::Dim {
                            DiagnosticKind::MissingHeader
                        } else {
                            DiagnosticKind::Syntax
                        },
                        "`dim` directive out of order or repeated".into(),
                    );
                    if section > Section::Dim {
                        continue;
                    }
                }
                match tokens.get(1).map(|t| (t, t.text.parse::<usize>())) {
                    Some((_, Ok(d))) if d >= 1 && tokens.len() == 2 => dim = Some(d),
                    Some((t, _)) => diag(
                        lineno,
                        t.column,
                        DiagnosticKind::Syntax,
                        "expected `dim <d>` with a single positive integer".into(),
                    ),
                    None => diag(
                        lineno,
                        keyword.column,
                        DiagnosticKind::Syntax,
                        "expected `dim <d>`".into(),
                    ),
                }
                section = Section::Vertices;
            }
            "vertices" => {
                if section != Section::Vertices {
                    diag(
                        lineno,
                        keyword.column,
                        if section < Section::Vertices {
                            DiagnosticKind::MissingHeader
                        } else {
                            DiagnosticKind::Syntax
                        },
                        "`vertices` directive out of order or repeated".into(),
                    );
                    if section > Section::Vertices {
                        continue;
                    }
                }
                if tokens.len() < 2 {
                    diag(
                        lineno,
                        keyword.column,
                        DiagnosticKind::Syntax,
                        "expected `vertices <name>+`".into(),
                    );
                }
                for t in &tokens[1..] {
                    if !is_identifier(t.text) {
                        diag(
                            lineno,
                            t.column,
                            DiagnosticKind::Syntax,
                            format!("`{}` is not a valid identifier", t.text),
                        );
                    } else if vertex_names.iter().any(|n| n == t.text) {
                        diag(
                            lineno,
                            t.column,
                            DiagnosticKind::DuplicateName,
                            format!("vertex `{}` declared twice", t.text),
                        );
                    } else {
                        vertex_names.push(t.text.to_string());
                    }
                }
                section = Section::Edges;
            }
            "edge" => {
                saw_edge_line = true;
                if section != Section::Edges {
                    diag(
                        lineno,
                        keyword.column,
                        DiagnosticKind::MissingHeader,
                        "`edge` before the graph/dim/vertices headers".into(),
                    );
                    continue;
                }
                // edge <name> <tail> <head> index <i1> ... <id>
                if tokens.len() < 5 || tokens[4].text != "index" {
                    diag(
                        lineno,
                        tokens.get(4).map_or(keyword.column, |t| t.column),
                        DiagnosticKind::Syntax,
                        "expected `edge <name> <tail> <head> index <i1> ...`".into(),
                    );
                    continue;
                }
                let (ename, tail, head) = (&tokens[1], &tokens[2], &tokens[3]);
                let mut ok = true;
                for t in [ename, tail, head] {
                    if !is_identifier(t.text) {
                        diag(
                            lineno,
                            t.column,
                            DiagnosticKind::Syntax,
                            format!("`{}` is not a valid identifier", t.text),
                        );
                        ok = false;
                    }
                }
                if !ok {
                    continue;
                }
                if !edge_names.insert(ename.text.to_string()) {
                    diag(
                        lineno,
                        ename.column,
                        DiagnosticKind::DuplicateName,
                        format!("edge `{}` declared twice", ename.text),
                    );
                    continue;
                }
                let mut bad_vertex = false;
                for t in [tail, head] {
                    if !vertex_names.iter().any(|n| n == t.text) {
                        diag(
                            lineno,
                            t.column,
                            DiagnosticKind::UnknownVertex,
                            format!("vertex `{}` is not declared", t.text),
                        );
                        bad_vertex = true;
                    }
                }
                let mut index = Vec::new();
                let mut bad_int = false;
                for t in &tokens[5..] {
                    match t.text.parse::<i64>() {
                        Ok(x) => index.push(x),
                        Err(_) => {
                            diag(
                                lineno,
                                t.column,
                                DiagnosticKind::Syntax,
                                format!("`{}` is not an integer", t.text),
                            );
                            bad_int = true;
                        }
                    }
                }
                if let Some(d) = dim {
                    if !bad_int && index.len() != d {
                        diag(
                            lineno,
                            tokens[4].column,
                            DiagnosticKind::ArityMismatch,
                            format!("index has {} entries, expected dim {}", index.len(), d),
                        );
                        continue;
                    }
                }
                if bad_vertex || bad_int {
                    continue;
                }
                edge_decls.push(EdgeDecl {
                    name: ename.text.to_string(),
                    tail: tail.text.to_string(),
                    head: head.text.to_string(),
                    index,
                });
            }
            other => {
                diag(
                    lineno,
                    keyword.column,
                    DiagnosticKind::Syntax,
                    format!("unknown directive `{other}`"),
                );
            }
        }
    }

    let eof = last_line.max(1);
    if name.is_none() {
        diag(eof, 1, DiagnosticKind::MissingHeader, "missing `graph` directive".into());
    }
    if dim.is_none() {
        diag(eof, 1, DiagnosticKind::MissingHeader, "missing `dim` directive".into());
    }
    if vertex_names.is_empty() && section < Section::Edges {
        diag(eof, 1, DiagnosticKind::MissingHeader, "missing `vertices` directive".into());
    }
    if !saw_edge_line {
        diag(eof, 1, DiagnosticKind::MissingHeader, "missing `edge` directives".into());
    }

    if diags.is_empty() {
        Ok(GraphSpec {
            name: name.unwrap(),
            dim: dim.unwrap(),
            vertex_names,
            edge_decls,
        })
    } else {
        Err(diags)
    }
}

/// Canonical text form; `parse(serialize(spec))` reproduces `spec` exactly.
pub fn serialize(spec: &GraphSpec) -> String {
    let mut out = String::new();
    out.push_str(&format!("graph {}\n", spec.name));
    out.push_str(&format!("dim {}\n", spec.dim));
    out.push_str("vertices");
    for v in &spec.vertex_names {
        out.push(' ');
        out.push_str(v);
    }
    out.push('\n');
    for e in &spec.edge_decls {
        out.push_str(&format!("edge {} {} {} index", e.name, e.tail, e.head));
        for x in &e.index {
            out.push_str(&format!(" {x}"));
        }
        out.push('\n');
    }
    out
}
