//! Textual syntax for systems (`.lst`) and global types (`.gt`), pretty
//! printing and JSON export.
//!
//! Local: `a!<sort>`, `a?<sort>`, `.`, `(+)` internal choice, `+` external
//! choice, `end`, `rec X . P`, `X`. System entries `Name = P;` and
//! `queue a = [s1, s2];`. Global: `s->r:a<sort>`, `*` as the anonymous
//! sender, `(+)` choice, `|` parallel, `;;` sequencing, `rec X . G`, `end`.
//! Precedence: prefix > choice > parallel > sequencing. `//` comments.

use crate::ast::{Behaviour, Branch, GlobalType, Participant, System};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{}:{}:{}: {message}", span.file, span.line, span.column)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Bang,
    Quest,
    Lt,
    Gt,
    Dot,
    OPlus,
    Plus,
    Bar,
    SemiSemi,
    Semi,
    Eq,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Arrow,
    Colon,
    Star,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::Bang => "`!`",
            Tok::Quest => "`?`",
            Tok::Lt => "`<`",
            Tok::Gt => "`>`",
            Tok::Dot => "`.`",
            Tok::OPlus => "`(+)`",
            Tok::Plus => "`+`",
            Tok::Bar => "`|`",
            Tok::SemiSemi => "`;;`",
            Tok::Semi => "`;`",
            Tok::Eq => "`=`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Comma => "`,`",
            Tok::Arrow => "`->`",
            Tok::Colon => "`:`",
            Tok::Star => "`*`",
            Tok::Eof => "end of input",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    column: usize,
    length: usize,
}

fn lex(text: &str, file: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = Pos {
            line,
            column: col,
            length: 1,
        };
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let three: String = chars[i..(i + 3).min(chars.len())].iter().collect();
        let (tok, len) = if three == "(+)" {
            (Tok::OPlus, 3)
        } else if two == ";;" {
            (Tok::SemiSemi, 2)
        } else if two == "->" {
            (Tok::Arrow, 2)
        } else if c.is_alphanumeric() || c == '_' {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '\'')
            {
                j += 1;
            }
            (Tok::Ident(chars[i..j].iter().collect()), j - i)
        } else {
            let t = match c {
                '!' => Tok::Bang,
                '?' => Tok::Quest,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '|' => Tok::Bar,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '*' => Tok::Star,
                _ => {
                    return Err(ParseError {
                        span: SourceSpan {
                            file: file.to_string(),
                            line,
                            column: col,
                            length: 1,
                        },
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            (t, 1)
        };
        out.push((
            tok,
            Pos {
                length: len,
                ..start
            },
        ));
        i += len;
        col += len;
    }
    out.push((
        Tok::Eof,
        Pos {
            line,
            column: col,
            length: 0,
        },
    ));
    Ok(out)
}

const KEYWORDS: [&str; 3] = ["rec", "end", "queue"];

struct Parser {
    toks: Vec<(Tok, Pos)>,
    pos: usize,
    file: String,
    scope: Vec<String>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(text: &str, file: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(text, file)?,
            pos: 0,
            file: file.to_string(),
            scope: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn here(&self) -> Pos {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_at<T>(&self, p: Pos, message: String) -> PResult<T> {
        Err(ParseError {
            span: SourceSpan {
                file: self.file.clone(),
                line: p.line,
                column: p.column,
                length: p.length,
            },
            message,
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.err_at(
            self.here(),
            format!("expected {wanted}, found {}", self.peek()),
        )
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&t.to_string())
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    /// Optional `<sort>`; absent or `<>` is the unit sort.
    fn sort(&mut self) -> PResult<String> {
        if *self.peek() != Tok::Lt {
            return Ok(String::new());
        }
        self.bump();
        if *self.peek() == Tok::Gt {
            self.bump();
            return Ok(String::new());
        }
        let s = self.ident("a sort")?;
        self.expect(Tok::Gt)?;
        Ok(s)
    }

    // ---- local behaviours ----

    fn behaviour(&mut self) -> PResult<Behaviour> {
        let start = self.here();
        let first = self.local_prefix()?;
        let kind = match self.peek() {
            Tok::OPlus => true,
            Tok::Plus => false,
            _ => return Ok(first),
        };
        let mut ops = vec![(start, first)];
        loop {
            match (self.peek(), kind) {
                (Tok::OPlus, true) | (Tok::Plus, false) => {
                    self.bump();
                }
                (Tok::OPlus, false) | (Tok::Plus, true) => {
                    return self.err_at(
                        self.here(),
                        "mixed internal and external choice".to_string(),
                    )
                }
                _ => break,
            }
            let p = self.here();
            ops.push((p, self.local_prefix()?));
        }
        let mut branches: Vec<Branch> = Vec::new();
        for (p, op) in ops {
            match op {
                Behaviour::InternalChoice(bs) if kind || bs.is_empty() => branches.extend(bs),
                Behaviour::ExternalChoice(bs) if !kind || bs.is_empty() => branches.extend(bs),
                Behaviour::InternalChoice(_) | Behaviour::ExternalChoice(_) => {
                    return self.err_at(p, "mixed internal and external choice".to_string())
                }
                _ => {
                    return self.err_at(p, "choice operand must be guarded by a prefix".to_string())
                }
            }
        }
        for (i, b) in branches.iter().enumerate() {
            if branches[..i].iter().any(|c| c.chan == b.chan) {
                return self.err_at(start, format!("duplicate guard {} in choice", b.chan));
            }
        }
        Ok(if kind {
            Behaviour::InternalChoice(branches)
        } else {
            Behaviour::ExternalChoice(branches)
        })
    }

    fn local_prefix(&mut self) -> PResult<Behaviour> {
        let here = self.here();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let p = self.behaviour()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(s) if s == "end" => {
                self.bump();
                Ok(Behaviour::zero())
            }
            Tok::Ident(s) if s == "rec" => {
                self.bump();
                let x = self.ident("a recursion variable")?;
                self.expect(Tok::Dot)?;
                self.scope.push(x.clone());
                let body = self.behaviour();
                self.scope.pop();
                Ok(Behaviour::Rec(x, Box::new(body?)))
            }
            Tok::Ident(s) => {
                let internal = match self.peek_at(1) {
                    Tok::Bang => true,
                    Tok::Quest => false,
                    _ => {
                        self.bump();
                        if !self.scope.contains(&s) {
                            return self.err_at(here, format!("unbound recursion variable {s}"));
                        }
                        return Ok(Behaviour::Var(s));
                    }
                };
                let chan = self.ident("a channel")?;
                self.bump();
                let sort = self.sort()?;
                let cont = if *self.peek() == Tok::Dot {
                    self.bump();
                    self.local_prefix()?
                } else {
                    Behaviour::zero()
                };
                let b = vec![Branch { chan, sort, cont }];
                Ok(if internal {
                    Behaviour::InternalChoice(b)
                } else {
                    Behaviour::ExternalChoice(b)
                })
            }
            _ => self.unexpected("a behaviour"),
        }
    }

    fn system(&mut self) -> PResult<System> {
        let mut s = System::new();
        while *self.peek() != Tok::Eof {
            let here = self.here();
            if self.is_kw("queue") {
                self.bump();
                let a = self.ident("a channel")?;
                self.expect(Tok::Eq)?;
                self.expect(Tok::LBracket)?;
                let mut contents = Vec::new();
                while *self.peek() != Tok::RBracket {
                    if *self.peek() == Tok::Lt {
                        self.bump();
                        self.expect(Tok::Gt)?;
                        contents.push(String::new());
                    } else {
                        contents.push(self.ident("a sort")?);
                    }
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RBracket)?;
                self.expect(Tok::Semi)?;
                if s.queues.insert(a.clone(), contents).is_some() {
                    return self.err_at(here, format!("duplicate queue {a}"));
                }
                continue;
            }
            let name = self.ident("a participant name")?;
            self.expect(Tok::Eq)?;
            let p = self.behaviour()?;
            self.expect(Tok::Semi)?;
            if s.participants.insert(name.clone(), p).is_some() {
                return self.err_at(here, format!("duplicate participant {name}"));
            }
        }
        Ok(s)
    }

    // ---- global types ----

    fn global(&mut self) -> PResult<GlobalType> {
        let mut items = vec![self.gpar()?];
        while *self.peek() == Tok::SemiSemi {
            self.bump();
            items.push(self.gpar()?);
        }
        Ok(fold_right(items, GlobalType::seq))
    }

    fn gpar(&mut self) -> PResult<GlobalType> {
        let mut items = vec![self.gchoice()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            items.push(self.gchoice()?);
        }
        Ok(fold_right(items, GlobalType::par))
    }

    fn gchoice(&mut self) -> PResult<GlobalType> {
        let mut items = vec![self.gprefix()?];
        while *self.peek() == Tok::OPlus {
            self.bump();
            items.push(self.gprefix()?);
        }
        Ok(fold_right(items, GlobalType::choice))
    }

    fn gprefix(&mut self) -> PResult<GlobalType> {
        let here = self.here();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let g = self.global()?;
                self.expect(Tok::RParen)?;
                Ok(g)
            }
            Tok::Ident(s) if s == "end" => {
                self.bump();
                Ok(GlobalType::End)
            }
            Tok::Ident(s) if s == "rec" => {
                self.bump();
                let x = self.ident("a recursion variable")?;
                self.expect(Tok::Dot)?;
                self.scope.push(x.clone());
                let body = self.global();
                self.scope.pop();
                Ok(GlobalType::Rec(x, Box::new(body?)))
            }
            Tok::Ident(s) if *self.peek_at(1) != Tok::Arrow => {
                self.bump();
                if !self.scope.contains(&s) {
                    return self.err_at(here, format!("unbound recursion variable {s}"));
                }
                Ok(GlobalType::GVar(s))
            }
            Tok::Ident(_) | Tok::Star => {
                let sender = if *self.peek() == Tok::Star {
                    self.bump();
                    Participant::Star
                } else {
                    Participant::Named(self.ident("a sender")?)
                };
                self.expect(Tok::Arrow)?;
                let receiver = self.ident("a receiver")?;
                self.expect(Tok::Colon)?;
                let channel = self.ident("a channel")?;
                let sort = self.sort()?;
                if sender.is(&receiver) {
                    let len = self.toks[self.pos - 1].1.column + self.toks[self.pos - 1].1.length;
                    let span = Pos {
                        length: len.saturating_sub(here.column).max(1),
                        ..here
                    };
                    return self.err_at(span, format!("sender and receiver coincide ({receiver})"));
                }
                let cont = if *self.peek() == Tok::Dot {
                    self.bump();
                    self.gprefix()?
                } else {
                    GlobalType::End
                };
                Ok(GlobalType::Msg {
                    sender,
                    receiver,
                    channel,
                    sort,
                    cont: Box::new(cont),
                })
            }
            _ => self.unexpected("a global type"),
        }
    }

    fn finish(&mut self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.unexpected("end of input")
        }
    }
}

fn fold_right(
    mut items: Vec<GlobalType>,
    mk: fn(GlobalType, GlobalType) -> GlobalType,
) -> GlobalType {
    let mut acc = items.pop().expect("at least one operand");
    while let Some(g) = items.pop() {
        acc = mk(g, acc);
    }
    acc
}

pub fn parse_system(text: &str) -> Result<System, ParseError> {
    parse_system_file(text, "<input>")
}

pub fn parse_system_file(text: &str, file: &str) -> Result<System, ParseError> {
    let mut p = Parser::new(text, file)?;
    let s = p.system()?;
    p.finish()?;
    Ok(s)
}

/// A single behaviour, as written on the right of `Name = ...;`.
pub fn parse_behaviour(text: &str) -> Result<Behaviour, ParseError> {
    let mut p = Parser::new(text, "<input>")?;
    let b = p.behaviour()?;
    p.finish()?;
    Ok(b)
}

pub fn parse_global(text: &str) -> Result<GlobalType, ParseError> {
    parse_global_file(text, "<input>")
}

pub fn parse_global_file(text: &str, file: &str) -> Result<GlobalType, ParseError> {
    let mut p = Parser::new(text, file)?;
    let g = p.global()?;
    p.finish()?;
    Ok(g)
}

fn action(chan: &str, pol: char, sort: &str) -> String {
    if sort.is_empty() {
        format!("{chan}{pol}")
    } else {
        format!("{chan}{pol}<{sort}>")
    }
}

pub fn print_behaviour(p: &Behaviour) -> String {
    match p {
        _ if p.is_zero() => "end".to_string(),
        Behaviour::Var(x) => x.clone(),
        Behaviour::Rec(x, body) => format!("rec {x} . {}", print_behaviour(body)),
        Behaviour::InternalChoice(bs) | Behaviour::ExternalChoice(bs) => {
            let (pol, sep) = if p.is_internal() {
                ('!', " (+) ")
            } else {
                ('?', " + ")
            };
            bs.iter()
                .map(|b| {
                    let head = action(&b.chan, pol, &b.sort);
                    if b.cont.is_zero() {
                        head
                    } else {
                        format!("{head}. {}", print_cont(&b.cont))
                    }
                })
                .collect::<Vec<_>>()
                .join(sep)
        }
    }
}

fn print_cont(p: &Behaviour) -> String {
    match p {
        Behaviour::Rec(..) => format!("({})", print_behaviour(p)),
        _ if p.branches().len() > 1 => format!("({})", print_behaviour(p)),
        _ => print_behaviour(p),
    }
}

pub fn print_system(s: &System) -> String {
    let mut out = String::new();
    for (n, p) in &s.participants {
        out.push_str(&format!("{n} = {};\n", print_behaviour(p)));
    }
    for (a, q) in &s.queues {
        let items: Vec<&str> = q
            .iter()
            .map(|e| if e.is_empty() { "<>" } else { e.as_str() })
            .collect();
        out.push_str(&format!("queue {a} = [{}];\n", items.join(", ")));
    }
    out
}

fn level(g: &GlobalType) -> u8 {
    match g {
        GlobalType::Seq(..) | GlobalType::Rec(..) => 0,
        GlobalType::Par(..) => 1,
        GlobalType::Choice(..) => 2,
        _ => 3,
    }
}

fn print_at(g: &GlobalType, min: u8) -> String {
    let s = print_global(g);
    if level(g) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn print_global(g: &GlobalType) -> String {
    match g {
        GlobalType::End => "end".to_string(),
        GlobalType::GVar(x) => x.clone(),
        GlobalType::Msg {
            sender,
            receiver,
            channel,
            sort,
            cont,
        } => {
            let head = if sort.is_empty() {
                format!("{sender}->{receiver}:{channel}")
            } else {
                format!("{sender}->{receiver}:{channel}<{sort}>")
            };
            if **cont == GlobalType::End {
                head
            } else {
                format!("{head}. {}", print_at(cont, 3))
            }
        }
        GlobalType::Choice(a, b) => format!("{} (+) {}", print_at(a, 3), print_at(b, 2)),
        GlobalType::Par(a, b) => format!("{} | {}", print_at(a, 2), print_at(b, 1)),
        GlobalType::Seq(a, b) => format!("{} ;; {}", print_at(a, 1), print_at(b, 0)),
        GlobalType::Rec(x, body) => format!("rec {x} . {}", print_global(body)),
    }
}

pub fn system_to_json(s: &System) -> String {
    serde_json::to_string_pretty(s).expect("systems serialise")
}

pub fn global_to_json(g: &GlobalType) -> String {
    serde_json::to_string_pretty(g).expect("global types serialise")
}

pub fn system_from_json(text: &str) -> Result<System, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn global_from_json(text: &str) -> Result<GlobalType, serde_json::Error> {
    serde_json::from_str(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{global_eq, norm_local};

    #[test]
    fn end_participant() {
        let s = parse_system("P = end;").unwrap();
        assert_eq!(s.participants.len(), 1);
        assert!(s.participants["P"].is_zero());
    }

    #[test]
    fn rec_round_trip() {
        let s = parse_system("P = rec X . a!<int>. X;").unwrap();
        let again = parse_system(&print_system(&s)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn prefix_binds_tighter_than_choice() {
        let p = parse_behaviour("a!. b! (+) c!").unwrap();
        assert_eq!(p.branches().len(), 2);
        assert_eq!(p.branches()[0].cont.branches().len(), 1);
    }

    #[test]
    fn mixed_choice_rejected() {
        assert!(parse_behaviour("a! (+) b?").is_err());
        assert!(parse_behaviour("a! + b!").is_err());
    }

    #[test]
    fn duplicate_participant_span() {
        let e = parse_system("P = end;\nP = a!;").unwrap_err();
        assert_eq!((e.span.line, e.span.column), (2, 1));
        assert!(e.message.contains("duplicate participant P"));
    }

    #[test]
    fn unbound_variable() {
        let e = parse_system("P = a!. X;").unwrap_err();
        assert!(e.message.contains("unbound"));
        assert_eq!(e.span.column, 9);
        assert!(parse_global("s->r:a. X").is_err());
    }

    #[test]
    fn sender_equals_receiver() {
        let e = parse_global("s->s:a").unwrap_err();
        assert!(e.message.contains("coincide"));
        assert_eq!(e.span.column, 1);
    }

    #[test]
    fn global_precedence() {
        let g = parse_global("a->b:x | c->d:y ;; b->d:z (+) b->d:w").unwrap();
        match g {
            GlobalType::Seq(l, r) => {
                assert!(matches!(*l, GlobalType::Par(..)));
                assert!(matches!(*r, GlobalType::Choice(..)));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_global("end").unwrap(), GlobalType::End);
        assert_eq!(print_global(&GlobalType::End), "end");
    }

    #[test]
    fn star_sender_and_queues() {
        let g = parse_global("*->r:a<int>. s->r:b").unwrap();
        assert!(g.has_star());
        let s = parse_system("R = a?<int>; queue a = [int, <>];").unwrap();
        assert_eq!(s.queues["a"], vec!["int".to_string(), String::new()]);
        assert_eq!(parse_system(&print_system(&s)).unwrap(), s);
    }

    #[test]
    fn comments_skipped() {
        let s = parse_system("// header\nP = a!; // trailing\nQ = a?;").unwrap();
        assert_eq!(s.participants.len(), 2);
    }

    #[test]
    fn nested_choice_printing() {
        let p = parse_behaviour("a?. (b! (+) c!. (rec Y . d!. Y)) + e?").unwrap();
        let q = parse_behaviour(&print_behaviour(&p)).unwrap();
        assert_eq!(norm_local(&p), norm_local(&q));
        let g = parse_global("s->r:a. (rec X . s->r:b. X) | (t->u:c (+) t->u:d) ;; end").unwrap();
        assert!(global_eq(&g, &parse_global(&print_global(&g)).unwrap()));
    }

    #[test]
    fn json_round_trip() {
        let g = parse_global("s->r:a<int>. (r->s:b | t->u:c)").unwrap();
        assert_eq!(global_from_json(&global_to_json(&g)).unwrap(), g);
        assert!(global_to_json(&g).contains("\"Msg\""));
        let s = parse_system("P = a!; Q = a?; queue a = [];").unwrap();
        assert_eq!(system_from_json(&system_to_json(&s)).unwrap(), s);
    }
}
