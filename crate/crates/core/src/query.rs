//! Conjunctive queries, databases and update streams.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::value::{Tuple, Value};

pub type Var = usize;
/// Bitmask over variable indices of one query.
pub type VarSet = u32;

pub const MAX_VARS: usize = 32;

pub fn varset_of(vars: &[Var]) -> VarSet {
    vars.iter().fold(0, |s, &v| s | (1 << v))
}

pub fn vars_of(s: VarSet) -> Vec<Var> {
    (0..MAX_VARS).filter(|&v| s & (1 << v) != 0).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: String,
    pub schema: Vec<Var>,
}

impl Atom {
    pub fn varset(&self) -> VarSet {
        varset_of(&self.schema)
    }
}

/// Full self-join-free conjunctive query. Variables are indexed by their
/// position in the head.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub name: String,
    pub vars: Vec<String>,
    pub atoms: Vec<Atom>,
}

impl Query {
    /// Build a query from atoms given by variable names; the head lists the
    /// variables in order of first appearance.
    pub fn from_atoms(name: &str, atoms: &[(&str, &[&str])]) -> Result<Query> {
        let mut vars: Vec<String> = Vec::new();
        for (_, schema) in atoms {
            for v in schema.iter() {
                if !vars.iter().any(|x| x == v) {
                    vars.push(v.to_string());
                }
            }
        }
        let atoms: Vec<(String, Vec<String>)> = atoms
            .iter()
            .map(|(r, s)| (r.to_string(), s.iter().map(|v| v.to_string()).collect()))
            .collect();
        Query::build(name, vars, atoms)
    }

    pub fn build(name: &str, head: Vec<String>, atoms: Vec<(String, Vec<String>)>) -> Result<Query> {
        if atoms.is_empty() {
            return Err(Error::NoAtoms);
        }
        if head.len() > MAX_VARS {
            return Err(Error::Budget(format!("more than {MAX_VARS} variables")));
        }
        let mut seen_head = HashSet::new();
        for v in &head {
            if !seen_head.insert(v.as_str()) {
                return Err(Error::HeadMismatch(format!("`{v}` repeated in head")));
            }
        }
        let mut rels = HashSet::new();
        let mut out = Vec::new();
        let mut used = vec![false; head.len()];
        for (rel, schema) in atoms {
            if !rels.insert(rel.clone()) {
                return Err(Error::RepeatedRelation(rel));
            }
            let mut s = Vec::new();
            for v in &schema {
                let idx = head
                    .iter()
                    .position(|h| h == v)
                    .ok_or_else(|| Error::HeadMismatch(format!("`{v}` of `{rel}` missing from head")))?;
                if s.contains(&idx) {
                    return Err(Error::RepeatedVariable {
                        relation: rel.clone(),
                        var: v.clone(),
                    });
                }
                used[idx] = true;
                s.push(idx);
            }
            out.push(Atom {
                relation: rel,
                schema: s,
            });
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::HeadMismatch(format!("head variable `{}` occurs in no atom", head[i])));
        }
        Ok(Query {
            name: name.to_string(),
            vars: head,
            atoms: out,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn all_vars(&self) -> VarSet {
        if self.vars.len() == 32 {
            u32::MAX
        } else {
            (1u32 << self.vars.len()) - 1
        }
    }

    pub fn var_index(&self, name: &str) -> Option<Var> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn atom_index(&self, rel: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.relation == rel)
    }

    pub fn edges(&self) -> Vec<VarSet> {
        self.atoms.iter().map(|a| a.varset()).collect()
    }

    /// Indices of atoms whose schema contains `x`.
    pub fn atoms_of_variable(&self, x: &str) -> Result<Vec<usize>> {
        let v = self.var_index(x).ok_or_else(|| Error::UnknownVariable(x.to_string()))?;
        Ok(self.atoms_of(v))
    }

    pub fn atoms_of(&self, v: Var) -> Vec<usize> {
        (0..self.atoms.len()).filter(|&i| self.atoms[i].schema.contains(&v)).collect()
    }

    /// Restriction to the variables `y`: schemas are intersected with `y`,
    /// atoms left without variables stay as nullary atoms.
    pub fn restrict(&self, y: VarSet) -> Query {
        let keep: Vec<Var> = (0..self.vars.len()).filter(|v| y & (1 << v) != 0).collect();
        let remap = |v: Var| keep.iter().position(|&k| k == v).unwrap();
        Query {
            name: self.name.clone(),
            vars: keep.iter().map(|&v| self.vars[v].clone()).collect(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    relation: a.relation.clone(),
                    schema: a.schema.iter().filter(|&&v| y & (1 << v) != 0).map(|&v| remap(v)).collect(),
                })
                .collect(),
        }
    }

    pub fn varset_names(&self, s: VarSet) -> Vec<String> {
        vars_of(s).into_iter().map(|v| self.vars[v].clone()).collect()
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) :- ", self.name, self.vars.join(","))?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let names: Vec<&str> = a.schema.iter().map(|&v| self.vars[v].as_str()).collect();
            write!(f, "{}({})", a.relation, names.join(","))?;
        }
        f.write_str(".")
    }
}

/// Union of queries over one head.
#[derive(Clone, Debug)]
pub struct UnionQuery {
    pub components: Vec<Query>,
}

impl UnionQuery {
    pub fn new(components: Vec<Query>) -> Result<UnionQuery> {
        if let Some(first) = components.first() {
            let head: HashSet<&String> = first.vars.iter().collect();
            for c in &components[1..] {
                if c.vars.iter().collect::<HashSet<_>>() != head {
                    return Err(Error::HeadMismatch("components disagree on head".into()));
                }
            }
        }
        Ok(UnionQuery { components })
    }
}

// ---------------------------------------------------------------- parser

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Turnstile,
    Dot,
    Eof,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            _src: src,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.get(self.pos) {
            if c == '%' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> Error {
        Error::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<(Tok, usize, usize)> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let Some(c) = self.bump() else {
            return Ok((Tok::Eof, line, col));
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '.' => Tok::Dot,
            ':' => {
                if self.bump() == Some('-') {
                    Tok::Turnstile
                } else {
                    return Err(self.err(line, col, "expected `:-`"));
                }
            }
            c if c.is_ascii_alphabetic() => {
                let mut s = String::from(c);
                while let Some(&n) = self.chars.get(self.pos) {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        s.push(n);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => return Err(self.err(line, col, format!("unexpected character `{other}`"))),
        };
        Ok((tok, line, col))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    peeked: Option<(Tok, usize, usize)>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&(Tok, usize, usize)> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex.next()?);
        }
        Ok(self.peeked.as_ref().unwrap())
    }

    fn take(&mut self) -> Result<(Tok, usize, usize)> {
        self.peek()?;
        Ok(self.peeked.take().unwrap())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let (t, line, col) = self.take()?;
        if t == want {
            Ok(())
        } else {
            Err(Error::Syntax {
                line,
                col,
                msg: format!("expected {what}, found {}", describe(&t)),
            })
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        match self.take()? {
            (Tok::Ident(s), l, c) => Ok((s, l, c)),
            (t, line, col) => Err(Error::Syntax {
                line,
                col,
                msg: format!("expected {what}, found {}", describe(&t)),
            }),
        }
    }

    /// `Name(V, ...)` with position of every variable.
    fn atom(&mut self) -> Result<(String, Vec<(String, usize, usize)>)> {
        let (name, _, _) = self.ident("relation name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut vars = Vec::new();
        if self.peek()?.0 == Tok::RParen {
            self.take()?;
            return Ok((name, vars));
        }
        loop {
            vars.push(self.ident("variable")?);
            match self.take()? {
                (Tok::Comma, _, _) => continue,
                (Tok::RParen, _, _) => break,
                (t, line, col) => {
                    return Err(Error::Syntax {
                        line,
                        col,
                        msg: format!("expected `,` or `)`, found {}", describe(&t)),
                    })
                }
            }
        }
        Ok((name, vars))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Turnstile => "`:-`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parse `Head(V1,...) :- R1(...), R2(...), ... .`
pub fn parse_query(text: &str) -> Result<Query> {
    let mut p = Parser {
        lex: Lexer::new(text),
        peeked: None,
    };
    let (head_name, head_vars) = p.atom()?;
    p.expect(Tok::Turnstile, "`:-`")?;
    let mut atoms = Vec::new();
    let mut rels: HashSet<String> = HashSet::new();
    loop {
        let (rel, vars) = p.atom()?;
        if !rels.insert(rel.clone()) {
            return Err(Error::RepeatedRelation(rel));
        }
        let mut seen = HashSet::new();
        for (v, _, _) in &vars {
            if !seen.insert(v.clone()) {
                return Err(Error::RepeatedVariable {
                    relation: rel.clone(),
                    var: v.clone(),
                });
            }
        }
        atoms.push((rel, vars.into_iter().map(|(v, _, _)| v).collect::<Vec<_>>()));
        match p.take()? {
            (Tok::Comma, _, _) => continue,
            (Tok::Dot, _, _) => break,
            (t, line, col) => {
                return Err(Error::Syntax {
                    line,
                    col,
                    msg: format!("expected `,` or `.`, found {}", describe(&t)),
                })
            }
        }
    }
    let (t, line, col) = p.take()?;
    if t != Tok::Eof {
        return Err(Error::Syntax {
            line,
            col,
            msg: format!("trailing input {}", describe(&t)),
        });
    }
    let head: Vec<String> = head_vars.into_iter().map(|(v, _, _)| v).collect();
    let body_vars: HashSet<&String> = atoms.iter().flat_map(|(_, s)| s.iter()).collect();
    let head_set: HashSet<&String> = head.iter().collect();
    if body_vars != head_set {
        return Err(Error::HeadMismatch(
            "head must list exactly the variables of the body".into(),
        ));
    }
    Query::build(&head_name, head, atoms)
}

// ---------------------------------------------------------------- data

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Insert,
    Delete,
}

impl Sign {
    pub fn symbol(&self) -> &'static str {
        match self {
            Sign::Insert => "+",
            Sign::Delete => "-",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Single-tuple update on atom `rel` of a query; the tuple follows the atom's schema.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Update {
    pub sign: Sign,
    pub rel: usize,
    pub tuple: Tuple,
}

impl Update {
    pub fn insert(rel: usize, tuple: Tuple) -> Update {
        Update {
            sign: Sign::Insert,
            rel,
            tuple,
        }
    }

    pub fn delete(rel: usize, tuple: Tuple) -> Update {
        Update {
            sign: Sign::Delete,
            rel,
            tuple,
        }
    }
}

/// Updates at timestamps 1, 2, 3, ...
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateStream {
    pub updates: Vec<Update>,
}

impl UpdateStream {
    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn is_insert_only(&self) -> bool {
        self.updates.iter().all(|u| u.sign == Sign::Insert)
    }

    pub fn to_jsonl(&self, q: &Query) -> String {
        let mut out = String::new();
        for u in &self.updates {
            let obj = serde_json::json!({
                "op": u.sign.symbol(),
                "rel": q.atoms[u.rel].relation,
                "tuple": u.tuple.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            });
            out.push_str(&obj.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Deserialize)]
struct StreamLine {
    op: String,
    rel: String,
    tuple: Vec<serde_json::Value>,
}

/// Parse a JSON-lines stream against `q`. Blank lines are not allowed since
/// the line number is the timestamp.
pub fn parse_stream(q: &Query, text: &str) -> Result<UpdateStream> {
    let mut updates = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    for (i, line) in lines[..last].iter().enumerate() {
        let ln = i + 1;
        let err = |msg: String| Error::Stream { line: ln, msg };
        let parsed: StreamLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let sign = match parsed.op.as_str() {
            "+" => Sign::Insert,
            "-" => Sign::Delete,
            other => return Err(err(format!("op must be \"+\" or \"-\", got {other:?}"))),
        };
        let rel = q
            .atom_index(&parsed.rel)
            .ok_or_else(|| err(format!("unknown relation `{}`", parsed.rel)))?;
        let arity = q.atoms[rel].schema.len();
        if parsed.tuple.len() != arity {
            return Err(err(format!(
                "arity mismatch for `{}`: expected {arity}, got {}",
                parsed.rel,
                parsed.tuple.len()
            )));
        }
        let tuple = parsed
            .tuple
            .iter()
            .map(|v| match v {
                serde_json::Value::String(s) => Ok(Value::constant(s)),
                serde_json::Value::Number(n) => Ok(Value::constant(&n.to_string())),
                other => Err(err(format!("unsupported value {other}"))),
            })
            .collect::<Result<Tuple>>()?;
        updates.push(Update { sign, rel, tuple });
    }
    Ok(UpdateStream { updates })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub schema: Vec<String>,
    pub tuples: HashSet<Tuple>,
}

/// Plain set-semantics database with one relation per atom of a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    pub relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn empty(q: &Query) -> Database {
        Database {
            relations: q
                .atoms
                .iter()
                .map(|a| {
                    (
                        a.relation.clone(),
                        Relation {
                            name: a.relation.clone(),
                            schema: a.schema.iter().map(|&v| q.vars[v].clone()).collect(),
                            tuples: HashSet::new(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn size(&self) -> usize {
        self.relations.values().map(|r| r.tuples.len()).sum()
    }

    /// Apply one update; returns whether the database changed.
    pub fn apply(&mut self, relation: &str, sign: Sign, tuple: &Tuple) -> Result<bool> {
        let r = self
            .relations
            .get_mut(relation)
            .ok_or_else(|| Error::UnknownRelation(relation.to_string()))?;
        if r.schema.len() != tuple.len() {
            return Err(Error::Arity {
                relation: relation.to_string(),
                expected: r.schema.len(),
                got: tuple.len(),
            });
        }
        Ok(match sign {
            Sign::Insert => r.tuples.insert(tuple.clone()),
            Sign::Delete => r.tuples.remove(tuple),
        })
    }
}

/// Apply `u` (addressed by atom index of `q`) to `db`.
pub fn apply_update(q: &Query, db: &mut Database, u: &Update) -> Result<bool> {
    let atom = q
        .atoms
        .get(u.rel)
        .ok_or_else(|| Error::UnknownRelation(format!("#{}", u.rel)))?;
    db.apply(&atom.relation, u.sign, &u.tuple)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::tuple_of;

    #[test]
    fn parses_triangle() {
        let q = parse_query("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).").unwrap();
        assert_eq!(q.vars, vec!["A", "B", "C"]);
        assert_eq!(q.atoms.len(), 3);
        assert_eq!(q.atoms[2].schema, vec![0, 2]);
        assert_eq!(q.to_string(), "Q(A,B,C) :- R(A,B), S(B,C), T(A,C).");
    }

    #[test]
    fn parses_single_atom_and_path() {
        let q = parse_query("Q(A) :- R(A).").unwrap();
        assert_eq!(q.vars, vec!["A"]);
        let p = parse_query("% three path\nQ(A,B,C,D) :- R(A,B),\n  S(B,C), T(C,D).  % done\n").unwrap();
        assert_eq!(p.atoms.len(), 3);
        assert_eq!(p.atoms[2].schema, vec![2, 3]);
    }

    #[test]
    fn reports_errors_with_position() {
        match parse_query("Q(A) :- R(A)\n , S(A) ; ") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 9)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_query("Q(A,B) :- R(A,B), R(B)."),
            Err(Error::RepeatedRelation(_))
        ));
        assert!(matches!(
            parse_query("Q(A) :- R(A,A)."),
            Err(Error::RepeatedVariable { .. })
        ));
        assert!(matches!(parse_query("Q(A,B) :- R(A)."), Err(Error::HeadMismatch(_))));
        assert!(matches!(parse_query("Q(A) :- R(A). extra"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn atoms_of_variable_examples() {
        let qh = Query::from_atoms("Q", &[("R", &["A", "B"]), ("S", &["A", "C"])]).unwrap();
        assert_eq!(qh.atoms_of_variable("A").unwrap(), vec![0, 1]);
        assert_eq!(qh.atoms_of_variable("B").unwrap(), vec![0]);
        assert!(qh.atoms_of_variable("Z").is_err());
        let one = Query::from_atoms("Q", &[("R", &["A"])]).unwrap();
        assert_eq!(one.atoms_of_variable("A").unwrap(), vec![0]);
    }

    #[test]
    fn restriction() {
        let q = parse_query("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).").unwrap();
        let r = q.restrict(0b011);
        assert_eq!(r.vars, vec!["A", "B"]);
        assert_eq!(r.atoms[0].schema, vec![0, 1]);
        assert_eq!(r.atoms[1].schema, vec![1]);
        assert_eq!(r.atoms[2].schema, vec![0]);
        assert_eq!(r.restrict(r.all_vars()), r);
        assert_eq!(q.restrict(q.all_vars()), q);
        let nullary = q.restrict(0b100);
        assert!(nullary.atoms[0].schema.is_empty());
    }

    #[test]
    fn table_one_replay() {
        let q = parse_query("Q(A,B,C) :- R(A,B), S(B,C), T(A,C).").unwrap();
        let stream = "{\"op\":\"+\",\"rel\":\"R\",\"tuple\":[\"a1\",\"b1\"]}\n\
{\"op\":\"+\",\"rel\":\"S\",\"tuple\":[\"b1\",\"c1\"]}\n\
{\"op\":\"+\",\"rel\":\"T\",\"tuple\":[\"a1\",\"c1\"]}\n\
{\"op\":\"+\",\"rel\":\"S\",\"tuple\":[\"b2\",\"c1\"]}\n\
{\"op\":\"-\",\"rel\":\"S\",\"tuple\":[\"b1\",\"c1\"]}\n\
{\"op\":\"-\",\"rel\":\"S\",\"tuple\":[\"b2\",\"c1\"]}\n\
{\"op\":\"-\",\"rel\":\"T\",\"tuple\":[\"a1\",\"c1\"]}\n\
{\"op\":\"-\",\"rel\":\"R\",\"tuple\":[\"a1\",\"b1\"]}\n";
        let s = parse_stream(&q, stream).unwrap();
        assert_eq!(s.len(), 8);
        let mut db = Database::empty(&q);
        for u in &s.updates[..4] {
            assert!(apply_update(&q, &mut db, u).unwrap());
        }
        assert_eq!(db.relation("R").unwrap().tuples, [tuple_of(&["a1", "b1"])].into_iter().collect());
        assert_eq!(db.relation("S").unwrap().tuples.len(), 2);
        assert_eq!(db.relation("T").unwrap().tuples.len(), 1);
        for u in &s.updates[4..] {
            assert!(apply_update(&q, &mut db, u).unwrap());
        }
        assert_eq!(db.size(), 0);
        assert!(apply_update(&q, &mut db, &s.updates[0]).unwrap());
        assert!(!apply_update(&q, &mut db, &s.updates[0]).unwrap());
        assert_eq!(parse_stream(&q, &s.to_jsonl(&q)).unwrap(), s);
    }

    #[test]
    fn stream_errors() {
        let q = parse_query("Q(A,B) :- R(A,B).").unwrap();
        assert!(matches!(
            parse_stream(&q, "{\"op\":\"+\",\"rel\":\"X\",\"tuple\":[\"a\",\"b\"]}"),
            Err(Error::Stream { line: 1, .. })
        ));
        assert!(matches!(
            parse_stream(&q, "{\"op\":\"+\",\"rel\":\"R\",\"tuple\":[\"a\",\"b\"]}\n{\"op\":\"+\",\"rel\":\"R\",\"tuple\":[\"a\"]}"),
            Err(Error::Stream { line: 2, .. })
        ));
        let mut db = Database::empty(&q);
        assert!(matches!(db.apply("X", Sign::Insert, &tuple_of(&["a"])), Err(Error::UnknownRelation(_))));
        assert!(matches!(db.apply("R", Sign::Insert, &tuple_of(&["a"])), Err(Error::Arity { .. })));
    }
}
