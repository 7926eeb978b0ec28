//! Recursive-descent parser for the C-like concrete syntax.

use std::collections::{BTreeMap, HashMap};

use super::ast::{Expr, SourceComponent, SourceProgram};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::model::{ComponentId, Interface, ProcedureId};
use crate::value::BinOp;

const KEYWORDS: [&str; 11] = [
    "component", "import", "export", "buffer", "if", "then", "else", "alloc", "exit", "local",
    "return",
];

/// Components, the optional `main` declaration and the optional input tape of
/// a source file, before whole-program checks.
#[derive(Debug, Clone, Default)]
pub struct SourceUnit {
    pub components: Vec<SourceComponent>,
    pub main: Option<ProcedureId>,
    pub env_tape: Vec<i64>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    names: HashMap<String, ComponentId>,
}

/// Parses a file that may mention components defined elsewhere (declared
/// with `extern Name @ id;`).
pub fn parse_unit(text: &str) -> Result<SourceUnit, ParseError> {
    let toks = tokenize(text)?;
    let names = scan_names(&toks)?;
    let mut p = Parser {
        toks,
        pos: 0,
        names,
    };
    p.unit()
}

/// Parses a whole program. The entry point is the `main Comp.proc;`
/// declaration, or else the first component defining a procedure `main`.
pub fn parse_source(text: &str) -> Result<SourceProgram, ParseError> {
    let unit = parse_unit(text)?;
    let mut components = BTreeMap::new();
    for c in unit.components {
        components.insert(c.id(), c);
    }
    let main = match unit.main {
        Some(m) => m,
        None => components
            .values()
            .find(|c| c.procedures.contains_key("main"))
            .map(|c| ProcedureId::new(c.id(), "main"))
            .ok_or_else(|| ParseError::new(1, 1, "no `main` declaration and no procedure named main"))?,
    };
    Ok(SourceProgram {
        components,
        main,
        env_tape: unit.env_tape,
    })
}

fn scan_names(toks: &[Token]) -> Result<HashMap<String, ComponentId>, ParseError> {
    let mut names = HashMap::new();
    names.insert("E".to_string(), ComponentId::ENV);
    let mut depth = 0i32;
    let mut next_implicit = 1u32;
    let mut i = 0;
    while i < toks.len() {
        match &toks[i].tok {
            Tok::Sym("{") => depth += 1,
            Tok::Sym("}") => depth -= 1,
            Tok::Ident(kw) if depth == 0 && (kw == "component" || kw == "extern") => {
                if let Some(Tok::Ident(name)) = toks.get(i + 1).map(|t| &t.tok) {
                    let explicit = match (toks.get(i + 2), toks.get(i + 3)) {
                        (Some(Token { tok: Tok::Sym("@"), .. }), Some(Token { tok: Tok::Num(n), .. })) => {
                            Some(*n as u32)
                        }
                        _ => None,
                    };
                    let id = match explicit {
                        Some(n) => ComponentId(n),
                        None if kw == "component" => {
                            let id = ComponentId(next_implicit);
                            next_implicit += 1;
                            id
                        }
                        None => {
                            return Err(ParseError::at(&toks[i], "extern declarations need `@ id`"))
                        }
                    };
                    if names.insert(name.clone(), id).is_some() {
                        return Err(ParseError::at(
                            &toks[i + 1],
                            format!("component `{name}` declared twice"),
                        ));
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
    let mut seen: HashMap<ComponentId, &str> = HashMap::new();
    for (n, id) in &names {
        if let Some(other) = seen.insert(*id, n) {
            return Err(ParseError::new(
                1,
                1,
                format!("components `{other}` and `{n}` share id {id}"),
            ));
        }
    }
    Ok(names)
}

fn lvalue(target: Expr, at: &Token) -> Result<Expr, ParseError> {
    match target {
        Expr::Deref(p) => Ok(*p),
        _ => Err(ParseError::at(at, "left side of assignment is not a memory cell")),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::at(self.here(), msg))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {t}")),
        }
    }

    fn number(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat_sym("-");
        match *self.peek() {
            Tok::Num(n) => {
                let v = if neg {
                    if n == 1u64 << 63 {
                        i64::MIN
                    } else if n < 1u64 << 63 {
                        -(n as i64)
                    } else {
                        return self.err("integer literal out of range");
                    }
                } else if n < 1u64 << 63 {
                    n as i64
                } else {
                    return self.err("integer literal out of range");
                };
                self.bump();
                Ok(v)
            }
            ref t => self.err(format!("expected integer, found {t}")),
        }
    }

    fn component_ref(&mut self) -> Result<ComponentId, ParseError> {
        let at = self.here().clone();
        let name = self.ident()?;
        self.names
            .get(&name)
            .copied()
            .ok_or_else(|| ParseError::at(&at, format!("unknown component `{name}`")))
    }

    fn unit(&mut self) -> Result<SourceUnit, ParseError> {
        let mut unit = SourceUnit::default();
        loop {
            if matches!(self.peek(), Tok::Eof) {
                return Ok(unit);
            }
            if self.eat_kw("component") {
                let c = self.component()?;
                unit.components.push(c);
            } else if self.eat_kw("extern") {
                self.ident()?;
                self.expect_sym("@")?;
                self.number()?;
                self.expect_sym(";")?;
            } else if self.eat_kw("main") {
                if unit.main.is_some() {
                    return self.err("duplicate `main` declaration");
                }
                let c = self.component_ref()?;
                self.expect_sym(".")?;
                let p = self.ident()?;
                self.expect_sym(";")?;
                unit.main = Some(ProcedureId::new(c, p));
            } else if self.eat_kw("input") {
                if !self.is_sym(";") {
                    unit.env_tape.push(self.number()?);
                    while self.eat_sym(",") {
                        unit.env_tape.push(self.number()?);
                    }
                }
                self.expect_sym(";")?;
            } else {
                return self.err(format!(
                    "expected `component`, `main`, `input` or `extern`, found {}",
                    self.peek()
                ));
            }
        }
    }

    fn component(&mut self) -> Result<SourceComponent, ParseError> {
        let name_tok = self.here().clone();
        let name = self.ident()?;
        if name == "E" {
            return Err(ParseError::at(&name_tok, "`E` is the environment and cannot be defined"));
        }
        if self.eat_sym("@") {
            self.number()?;
        }
        let id = self.names[&name];
        self.expect_sym("{")?;
        let mut iface = Interface::new(id);
        let mut procedures = BTreeMap::new();
        let mut buffers: Option<Vec<i64>> = None;
        while !self.eat_sym("}") {
            if self.eat_kw("import") {
                loop {
                    let c = self.component_ref()?;
                    self.expect_sym(".")?;
                    let p = self.ident()?;
                    iface.imports.insert(ProcedureId::new(c, p));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            } else if self.eat_kw("export") {
                loop {
                    iface.exports.insert(self.ident()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(";")?;
            } else if self.eat_kw("buffer") {
                let b = buffers.get_or_insert_with(Vec::new);
                if !self.is_sym(";") {
                    loop {
                        let at = self.here().clone();
                        let n = self.number()?;
                        if n < 0 {
                            return Err(ParseError::at(&at, "buffer size must be non-negative"));
                        }
                        b.push(n);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(";")?;
            } else {
                let at = self.here().clone();
                let pname = self.ident()?;
                self.expect_sym("(")?;
                let param = if self.is_sym(")") {
                    None
                } else {
                    let p = self.ident()?;
                    (p != "_").then_some(p)
                };
                self.expect_sym(")")?;
                let body = self.block(param.as_deref())?;
                if procedures.insert(pname.clone(), body).is_some() {
                    return Err(ParseError::at(&at, format!("procedure `{pname}` defined twice")));
                }
            }
        }
        Ok(SourceComponent {
            name,
            interface: iface,
            procedures,
            buffers: buffers.unwrap_or_else(|| vec![1]),
        })
    }

    fn block(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        self.expect_sym("{")?;
        let e = self.seq(param, "}")?;
        self.expect_sym("}")?;
        Ok(e)
    }

    /// `;`-separated expressions up to (not including) `close`.
    fn seq(&mut self, param: Option<&str>, close: &str) -> Result<Expr, ParseError> {
        let mut items = Vec::new();
        while !self.is_sym(close) {
            items.push(self.statement(param)?);
            if !self.eat_sym(";") {
                break;
            }
        }
        if !self.is_sym(close) {
            return self.err(format!("expected `;` or `{close}`, found {}", self.peek()));
        }
        Ok(Expr::seq_all(items))
    }

    fn statement(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        if self.eat_kw("return") {
            return self.assign(param);
        }
        self.assign(param)
    }

    fn assign(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        let lhs = self.compare(param)?;
        if self.is_sym(":=") {
            let at = self.bump();
            let target = lvalue(lhs, &at)?;
            let rhs = self.assign(param)?;
            return Ok(Expr::assign(target, rhs));
        }
        Ok(lhs)
    }

    fn compare(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        let lhs = self.additive(param)?;
        let op = match self.peek() {
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive(param)?;
        if matches!(self.peek(), Tok::Sym("==" | "<" | "<=")) {
            return self.err("comparisons do not chain; add parentheses");
        }
        Ok(Expr::binop(op, lhs, rhs))
    }

    fn additive(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative(param)?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative(param)?;
            lhs = Expr::binop(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        let mut lhs = self.unary(param)?;
        while self.eat_sym("*") {
            let rhs = self.unary(param)?;
            lhs = Expr::binop(BinOp::Mul, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        if self.eat_sym("!") {
            return Ok(Expr::deref(self.unary(param)?));
        }
        if self.is_sym("-") {
            if matches!(self.peek_at(1), Tok::Num(_)) {
                let n = self.number()?;
                return self.postfix(Expr::Int(n), param);
            }
            self.bump();
            let e = self.unary(param)?;
            return Ok(Expr::binop(BinOp::Sub, Expr::Int(0), e));
        }
        if self.eat_kw("alloc") {
            return Ok(Expr::alloc(self.unary(param)?));
        }
        let p = self.primary(param)?;
        self.postfix(p, param)
    }

    fn postfix(&mut self, mut e: Expr, param: Option<&str>) -> Result<Expr, ParseError> {
        loop {
            if self.eat_sym("[") {
                let idx = self.seq(param, "]")?;
                self.expect_sym("]")?;
                e = Expr::deref(Expr::binop(BinOp::Add, e, idx));
            } else if self.is_sym("++") {
                let at = self.bump();
                let cell = lvalue(e, &at)?;
                e = Expr::assign(
                    cell.clone(),
                    Expr::binop(BinOp::Add, Expr::deref(cell), Expr::Int(1)),
                );
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(_) => Ok(Expr::Int(self.number()?)),
            Tok::Sym("(") => {
                self.bump();
                let e = self.seq(param, ")")?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => self.block(param),
            Tok::Ident(w) if w == "local" => {
                self.bump();
                Ok(Expr::Local)
            }
            Tok::Ident(w) if w == "exit" => {
                self.bump();
                if self.eat_sym("(") {
                    self.expect_sym(")")?;
                }
                Ok(Expr::Exit)
            }
            Tok::Ident(w) if w == "if" => {
                self.bump();
                self.if_rest(param)
            }
            Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                if matches!(self.peek_at(1), Tok::Sym(".")) {
                    let c = self.component_ref()?;
                    self.expect_sym(".")?;
                    let p = self.ident()?;
                    self.expect_sym("(")?;
                    let arg = if self.is_sym(")") {
                        Expr::Int(0)
                    } else {
                        self.assign(param)?
                    };
                    self.expect_sym(")")?;
                    Ok(Expr::call(c, p, arg))
                } else if Some(w.as_str()) == param {
                    self.bump();
                    Ok(Expr::Arg)
                } else {
                    self.err(format!("unknown name `{w}`"))
                }
            }
            t => self.err(format!("expected expression, found {t}")),
        }
    }

    fn if_rest(&mut self, param: Option<&str>) -> Result<Expr, ParseError> {
        let cond = self.assign(param)?;
        if self.eat_kw("then") {
            let t = self.assign(param)?;
            let e = if self.eat_kw("else") {
                self.assign(param)?
            } else {
                Expr::Int(0)
            };
            return Ok(Expr::if_(cond, t, e));
        }
        let t = self.block(param)?;
        let e = if self.eat_kw("else") {
            if self.eat_kw("if") {
                self.if_rest(param)?
            } else {
                self.block(param)?
            }
        } else {
            Expr::Int(0)
        };
        Ok(Expr::if_(cond, t, e))
    }
}
