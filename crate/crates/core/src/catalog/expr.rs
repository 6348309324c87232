//! Expression and predicate language shared by theorem entries and
//! reasoning claims.
//!
//! Two notations parse to the same tree:
//!
//! ```text
//! len(A,B) = 0.5 * len(B,C)        AB = 0.5 * BC
//! angle(A,B,C) = angle(A,C,B)      ∠ABC = ∠ACB
//! parallel(D,E; B,C)               DE ∥ BC
//! ```
//!
//! Angles are in degrees; `sin`, `cos` and `tan` take degrees.

use crate::geometry::{
    angle_at, collinear, distance, point_line_distance, polygon_area, GeometryError, Label, Point,
    Role, EPS,
};
use std::collections::BTreeMap;
use std::fmt;

/// Absolute tolerance for checking instantiated conclusions.
pub const CONCLUSION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("unexpected character {0:?} at byte {1}")]
    BadChar(char, usize),
    #[error("unexpected end of input")]
    Eof,
    #[error("unexpected token {0}")]
    Unexpected(String),
    #[error("unknown function or predicate {0:?}")]
    UnknownName(String),
    #[error("{0}")]
    Arity(String),
    #[error("invalid argument: {0}")]
    BadArg(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown vertex {0}")]
    UnknownVertex(Label),
    #[error("no circle centred at {0}")]
    NoCircle(Label),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0} is outside the function domain")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Tan,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl Op {
    fn prec(self) -> u8 {
        match self {
            Op::Add | Op::Sub => 1,
            Op::Mul | Op::Div => 2,
            Op::Pow => 3,
        }
    }

    fn sym(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Len(Label, Label),
    /// Angle at the middle vertex.
    Angle(Label, Label, Label),
    Area(Vec<Label>),
    /// Radius of the circle centred at the vertex.
    Radius(Label),
    /// Distance from the first vertex to the line through the other two.
    Dist(Label, Label, Label),
    Func(Func, Box<Expr>),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Lt,
    Gt,
}

impl Cmp {
    fn sym(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Lt => "<",
            Cmp::Gt => ">",
        }
    }
}

/// Closed predicate vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pred {
    Point,
    Seg,
    Triangle,
    Quad,
    Circle,
    OnCircle,
    Between,
    Midpoint,
    Role,
    Shape,
    Substrate,
    Parallel,
    Perpendicular,
    NotParallel,
    Collinear,
    SameSide,
    OppositeSides,
    InsideAngle,
    OutsideCircle,
    Tangent,
    DistinctSets,
    Congruent,
    Similar,
}

/// Argument group shapes: labels per `;`-separated group, or a name.
#[derive(Debug, Clone, Copy)]
enum Sig {
    Labels(&'static [usize]),
    /// Labels then one trailing name group.
    LabelsThenName(usize),
    /// One name group then a variable number of labels.
    NameThenLabels,
    Name,
}

impl Pred {
    pub const ALL: [Pred; 23] = [
        Pred::Point,
        Pred::Seg,
        Pred::Triangle,
        Pred::Quad,
        Pred::Circle,
        Pred::OnCircle,
        Pred::Between,
        Pred::Midpoint,
        Pred::Role,
        Pred::Shape,
        Pred::Substrate,
        Pred::Parallel,
        Pred::Perpendicular,
        Pred::NotParallel,
        Pred::Collinear,
        Pred::SameSide,
        Pred::OppositeSides,
        Pred::InsideAngle,
        Pred::OutsideCircle,
        Pred::Tangent,
        Pred::DistinctSets,
        Pred::Congruent,
        Pred::Similar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pred::Point => "point",
            Pred::Seg => "seg",
            Pred::Triangle => "triangle",
            Pred::Quad => "quad",
            Pred::Circle => "circle",
            Pred::OnCircle => "on_circle",
            Pred::Between => "between",
            Pred::Midpoint => "midpoint",
            Pred::Role => "role",
            Pred::Shape => "shape",
            Pred::Substrate => "substrate",
            Pred::Parallel => "parallel",
            Pred::Perpendicular => "perpendicular",
            Pred::NotParallel => "not_parallel",
            Pred::Collinear => "collinear",
            Pred::SameSide => "same_side",
            Pred::OppositeSides => "opposite_sides",
            Pred::InsideAngle => "inside_angle",
            Pred::OutsideCircle => "outside_circle",
            Pred::Tangent => "tangent",
            Pred::DistinctSets => "distinct_sets",
            Pred::Congruent => "congruent",
            Pred::Similar => "similar",
        }
    }

    fn from_name(s: &str) -> Option<Pred> {
        Pred::ALL.into_iter().find(|p| p.name() == s)
    }

    fn sig(self) -> Sig {
        match self {
            Pred::Point | Pred::Circle => Sig::Labels(&[1]),
            Pred::Seg => Sig::Labels(&[2]),
            Pred::Triangle | Pred::Collinear => Sig::Labels(&[3]),
            Pred::Quad => Sig::Labels(&[4]),
            Pred::OnCircle | Pred::OutsideCircle => Sig::Labels(&[1, 1]),
            Pred::Between | Pred::Midpoint => Sig::Labels(&[1, 2]),
            Pred::Parallel | Pred::Perpendicular | Pred::NotParallel => Sig::Labels(&[2, 2]),
            Pred::SameSide | Pred::OppositeSides => Sig::Labels(&[2, 2]),
            Pred::Tangent => Sig::Labels(&[2, 1]),
            Pred::InsideAngle => Sig::Labels(&[1, 3]),
            Pred::DistinctSets | Pred::Congruent | Pred::Similar => Sig::Labels(&[3, 3]),
            Pred::Role => Sig::LabelsThenName(2),
            Pred::Shape => Sig::NameThenLabels,
            Pred::Substrate => Sig::Name,
        }
    }

    /// Predicates allowed as theorem conclusions and claims.
    pub fn is_conclusion(self) -> bool {
        matches!(
            self,
            Pred::Parallel
                | Pred::Perpendicular
                | Pred::Collinear
                | Pred::Midpoint
                | Pred::OnCircle
                | Pred::Between
                | Pred::Tangent
                | Pred::Congruent
                | Pred::Similar
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Pred {
        pred: Pred,
        labels: Vec<Label>,
        name: Option<String>,
    },
    Cmp(Expr, Cmp, Expr),
}

// ---------------------------------------------------------------------------
// tokenizer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Run(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Op(Op),
    Cmp(Cmp),
    Angle,
    Par,
    Perp,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "{n}"),
            Tok::Ident(s) | Tok::Run(s) => write!(f, "{s:?}"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Semi => f.write_str("';'"),
            Tok::Op(o) => write!(f, "'{}'", o.sym()),
            Tok::Cmp(c) => write!(f, "'{}'", c.sym()),
            Tok::Angle => f.write_str("'∠'"),
            Tok::Par => f.write_str("'∥'"),
            Tok::Perp => f.write_str("'⊥'"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Tok>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() || c == '°' => i += 1,
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
                let n = text.parse().map_err(|_| ParseError::BadChar(c, pos))?;
                out.push(Tok::Num(n));
            }
            'a'..='z' => {
                let start = i;
                while i < chars.len() {
                    let ch = chars[i].1;
                    let hyphen_word = ch == '-'
                        && chars.get(i + 1).is_some_and(|(_, n)| n.is_ascii_lowercase());
                    if ch.is_ascii_lowercase() || ch.is_ascii_digit() || ch == '_' || hyphen_word {
                        i += 1;
                    } else {
                        break;
                    }
                }
                out.push(Tok::Ident(chars[start..i].iter().map(|(_, c)| c).collect()));
            }
            'A'..='Z' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_uppercase() || chars[i].1.is_ascii_digit()) {
                    i += 1;
                }
                out.push(Tok::Run(chars[start..i].iter().map(|(_, c)| c).collect()));
            }
            '(' => (out.push(Tok::LParen), i += 1).1,
            ')' => (out.push(Tok::RParen), i += 1).1,
            ',' => (out.push(Tok::Comma), i += 1).1,
            ';' => (out.push(Tok::Semi), i += 1).1,
            '+' => (out.push(Tok::Op(Op::Add)), i += 1).1,
            '-' | '−' => (out.push(Tok::Op(Op::Sub)), i += 1).1,
            '*' | '·' | '×' => (out.push(Tok::Op(Op::Mul)), i += 1).1,
            '/' => (out.push(Tok::Op(Op::Div)), i += 1).1,
            '^' => (out.push(Tok::Op(Op::Pow)), i += 1).1,
            '=' => (out.push(Tok::Cmp(Cmp::Eq)), i += 1).1,
            '<' => (out.push(Tok::Cmp(Cmp::Lt)), i += 1).1,
            '>' => (out.push(Tok::Cmp(Cmp::Gt)), i += 1).1,
            '∠' => (out.push(Tok::Angle), i += 1).1,
            '∥' => (out.push(Tok::Par), i += 1).1,
            '⊥' => (out.push(Tok::Perp), i += 1).1,
            '|' if chars.get(i + 1).map(|x| x.1) == Some('|') => {
                out.push(Tok::Par);
                i += 2;
            }
            _ => return Err(ParseError::BadChar(c, pos)),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// parser

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

enum Arg {
    Labels(Vec<Label>),
    Name(String),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok, ParseError> {
        let t = self.toks.get(self.pos).cloned().ok_or(ParseError::Eof)?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        let t = self.next()?;
        if t == want {
            Ok(())
        } else {
            Err(ParseError::Unexpected(t.to_string()))
        }
    }

    fn done(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(ParseError::Unexpected(t.to_string())),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        if let (Some(Tok::Ident(name)), Some(Tok::LParen)) = (self.peek(), self.toks.get(self.pos + 1)) {
            if let Some(pred) = Pred::from_name(name) {
                self.pos += 2;
                let groups = self.arg_groups()?;
                return build_pred(pred, groups);
            }
        }
        // `AB ∥ CD` and `AB ⊥ CD`
        if let (Some(Tok::Run(r1)), Some(Tok::Par | Tok::Perp)) = (self.peek(), self.toks.get(self.pos + 1)) {
            let r1 = r1.clone();
            self.pos += 1;
            let pred = if self.next()? == Tok::Par {
                Pred::Parallel
            } else {
                Pred::Perpendicular
            };
            let r2 = match self.next()? {
                Tok::Run(r) => r,
                t => return Err(ParseError::Unexpected(t.to_string())),
            };
            let mut labels = run_labels(&r1, 2)?;
            labels.extend(run_labels(&r2, 2)?);
            return Ok(Atom::Pred {
                pred,
                labels,
                name: None,
            });
        }
        let lhs = self.expr()?;
        let cmp = match self.next()? {
            Tok::Cmp(c) => c,
            t => return Err(ParseError::Unexpected(t.to_string())),
        };
        let rhs = self.expr()?;
        Ok(Atom::Cmp(lhs, cmp, rhs))
    }

    fn arg_groups(&mut self) -> Result<Vec<Vec<Arg>>, ParseError> {
        let mut groups = vec![Vec::new()];
        loop {
            match self.next()? {
                Tok::Run(r) => groups.last_mut().unwrap().push(Arg::Labels(
                    Label::split_run(&r).ok_or_else(|| ParseError::BadArg(r.clone()))?,
                )),
                Tok::Ident(n) => groups.last_mut().unwrap().push(Arg::Name(n)),
                t => return Err(ParseError::Unexpected(t.to_string())),
            }
            match self.next()? {
                Tok::Comma => {}
                Tok::Semi => groups.push(Vec::new()),
                Tok::RParen => return Ok(groups),
                t => return Err(ParseError::Unexpected(t.to_string())),
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ (Op::Add | Op::Sub))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Op(op @ (Op::Mul | Op::Div))) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op(Op::Sub)) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if let Some(Tok::Op(Op::Pow)) = self.peek() {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.next()? {
            Tok::Num(n) => Ok(Expr::Num(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Run(r) => {
                let l = run_labels(&r, 2)?;
                Ok(Expr::Len(l[0].clone(), l[1].clone()))
            }
            Tok::Angle => match self.next()? {
                Tok::Run(r) => {
                    let l = run_labels(&r, 3)?;
                    Ok(Expr::Angle(l[0].clone(), l[1].clone(), l[2].clone()))
                }
                t => Err(ParseError::Unexpected(t.to_string())),
            },
            Tok::Ident(name) => {
                self.expect(Tok::LParen)?;
                let func = match name.as_str() {
                    "sqrt" => Some(Func::Sqrt),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tan" => Some(Func::Tan),
                    _ => None,
                };
                if let Some(f) = func {
                    let e = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Func(f, Box::new(e)));
                }
                let groups = self.arg_groups()?;
                let flat = |g: &[Arg]| -> Result<Vec<Label>, ParseError> {
                    let mut out = Vec::new();
                    for a in g {
                        match a {
                            Arg::Labels(l) => out.extend(l.iter().cloned()),
                            Arg::Name(n) => return Err(ParseError::BadArg(n.clone())),
                        }
                    }
                    Ok(out)
                };
                let arity = |l: &Vec<Label>, n: usize| -> Result<(), ParseError> {
                    if l.len() == n {
                        Ok(())
                    } else {
                        Err(ParseError::Arity(format!("{name} takes {n} vertices, got {}", l.len())))
                    }
                };
                match name.as_str() {
                    "len" | "angle" | "area" | "radius" if groups.len() == 1 => {
                        let l = flat(&groups[0])?;
                        match name.as_str() {
                            "len" => {
                                arity(&l, 2)?;
                                Ok(Expr::Len(l[0].clone(), l[1].clone()))
                            }
                            "angle" => {
                                arity(&l, 3)?;
                                Ok(Expr::Angle(l[0].clone(), l[1].clone(), l[2].clone()))
                            }
                            "radius" => {
                                arity(&l, 1)?;
                                Ok(Expr::Radius(l[0].clone()))
                            }
                            _ => {
                                if l.len() < 3 {
                                    return Err(ParseError::Arity("area takes at least 3 vertices".into()));
                                }
                                Ok(Expr::Area(l))
                            }
                        }
                    }
                    "dist" if groups.len() == 2 => {
                        let p = flat(&groups[0])?;
                        let l = flat(&groups[1])?;
                        arity(&p, 1)?;
                        arity(&l, 2)?;
                        Ok(Expr::Dist(p[0].clone(), l[0].clone(), l[1].clone()))
                    }
                    _ => Err(ParseError::UnknownName(name)),
                }
            }
            t => Err(ParseError::Unexpected(t.to_string())),
        }
    }
}

fn run_labels(run: &str, n: usize) -> Result<Vec<Label>, ParseError> {
    let l = Label::split_run(run).ok_or_else(|| ParseError::BadArg(run.to_string()))?;
    if l.len() != n {
        return Err(ParseError::Arity(format!("{run:?} should name {n} vertices")));
    }
    Ok(l)
}

fn build_pred(pred: Pred, groups: Vec<Vec<Arg>>) -> Result<Atom, ParseError> {
    let label_group = |g: &[Arg]| -> Result<Vec<Label>, ParseError> {
        let mut out = Vec::new();
        for a in g {
            match a {
                Arg::Labels(l) => out.extend(l.iter().cloned()),
                Arg::Name(n) => return Err(ParseError::BadArg(format!("{n} in {}", pred.name()))),
            }
        }
        Ok(out)
    };
    let name_group = |g: &[Arg]| -> Result<String, ParseError> {
        match g {
            [Arg::Name(n)] => Ok(n.clone()),
            _ => Err(ParseError::BadArg(format!("{} expects a name", pred.name()))),
        }
    };
    let bad = || ParseError::Arity(format!("wrong argument shape for {}", pred.name()));
    let (labels, name) = match pred.sig() {
        Sig::Labels(shape) => {
            if groups.len() != shape.len() {
                return Err(bad());
            }
            let mut labels = Vec::new();
            for (g, &n) in groups.iter().zip(shape) {
                let l = label_group(g)?;
                if l.len() != n {
                    return Err(bad());
                }
                labels.extend(l);
            }
            (labels, None)
        }
        Sig::LabelsThenName(n) => {
            if groups.len() != 2 {
                return Err(bad());
            }
            let l = label_group(&groups[0])?;
            if l.len() != n {
                return Err(bad());
            }
            let role = name_group(&groups[1])?;
            role.parse::<Role>().map_err(ParseError::BadArg)?;
            (l, Some(role))
        }
        Sig::NameThenLabels => {
            if groups.len() != 2 {
                return Err(bad());
            }
            (label_group(&groups[1])?, Some(name_group(&groups[0])?))
        }
        Sig::Name => {
            if groups.len() != 1 {
                return Err(bad());
            }
            (Vec::new(), Some(name_group(&groups[0])?))
        }
    };
    Ok(Atom::Pred { pred, labels, name })
}

pub fn parse_atom(src: &str) -> Result<Atom, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let a = p.atom()?;
    p.done()?;
    Ok(a)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    p.done()?;
    Ok(e)
}

// ---------------------------------------------------------------------------
// display

fn fmt_num(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

fn join(l: &[Label]) -> String {
    l.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(",")
}

fn concat(l: &[Label]) -> String {
    l.iter().map(|x| x.as_str()).collect()
}

impl Expr {
    fn write(&self, out: &mut String, friendly: bool) {
        match self {
            Expr::Num(n) => out.push_str(&fmt_num(*n)),
            Expr::Len(a, b) if friendly => out.push_str(&format!("{a}{b}")),
            Expr::Len(a, b) => out.push_str(&format!("len({a},{b})")),
            Expr::Angle(a, b, c) if friendly => out.push_str(&format!("∠{a}{b}{c}")),
            Expr::Angle(a, b, c) => out.push_str(&format!("angle({a},{b},{c})")),
            Expr::Area(l) if friendly => out.push_str(&format!("area({})", concat(l))),
            Expr::Area(l) => out.push_str(&format!("area({})", join(l))),
            Expr::Radius(o) => out.push_str(&format!("radius({o})")),
            Expr::Dist(p, a, b) => out.push_str(&format!("dist({p};{a},{b})")),
            Expr::Func(f, e) => {
                out.push_str(f.name());
                out.push('(');
                e.write(out, friendly);
                out.push(')');
            }
            Expr::Neg(e) => {
                out.push('-');
                let wrap = matches!(**e, Expr::Bin(..));
                if wrap {
                    out.push('(');
                }
                e.write(out, friendly);
                if wrap {
                    out.push(')');
                }
            }
            Expr::Bin(op, l, r) => {
                let wrap_l = match &**l {
                    Expr::Bin(o, ..) => o.prec() < op.prec() || (*op == Op::Pow && *o == Op::Pow),
                    Expr::Neg(_) | Expr::Num(_) => *op == Op::Pow && !matches!(**l, Expr::Num(n) if n >= 0.0),
                    _ => false,
                };
                let wrap_r = matches!(**r, Expr::Bin(o, ..) if o.prec() < op.prec()
                    || (o.prec() == op.prec() && matches!(op, Op::Sub | Op::Div)));
                let side = |out: &mut String, e: &Expr, wrap: bool| {
                    if wrap {
                        out.push('(');
                    }
                    e.write(out, friendly);
                    if wrap {
                        out.push(')');
                    }
                };
                side(out, l, wrap_l);
                match (op, friendly) {
                    (Op::Pow, _) => out.push('^'),
                    (Op::Mul, true) => out.push_str(" · "),
                    _ => {
                        out.push(' ');
                        out.push_str(op.sym());
                        out.push(' ');
                    }
                }
                side(out, r, wrap_r);
            }
        }
    }

    /// Notation used in descriptions and claims: `AB`, `∠ABC`.
    pub fn friendly(&self) -> String {
        let mut s = String::new();
        self.write(&mut s, true);
        s
    }

    pub fn labels(&self, out: &mut Vec<Label>) {
        match self {
            Expr::Num(_) => {}
            Expr::Len(a, b) => out.extend([a.clone(), b.clone()]),
            Expr::Angle(a, b, c) | Expr::Dist(a, b, c) => out.extend([a.clone(), b.clone(), c.clone()]),
            Expr::Area(l) => out.extend(l.iter().cloned()),
            Expr::Radius(o) => out.push(o.clone()),
            Expr::Func(_, e) | Expr::Neg(e) => e.labels(out),
            Expr::Bin(_, l, r) => {
                l.labels(out);
                r.labels(out);
            }
        }
    }

    pub fn substitute(&self, map: &BTreeMap<Label, Label>) -> Expr {
        let s = |l: &Label| map.get(l).cloned().unwrap_or_else(|| l.clone());
        match self {
            Expr::Num(n) => Expr::Num(*n),
            Expr::Len(a, b) => Expr::Len(s(a), s(b)),
            Expr::Angle(a, b, c) => Expr::Angle(s(a), s(b), s(c)),
            Expr::Area(l) => Expr::Area(l.iter().map(s).collect()),
            Expr::Radius(o) => Expr::Radius(s(o)),
            Expr::Dist(p, a, b) => Expr::Dist(s(p), s(a), s(b)),
            Expr::Func(f, e) => Expr::Func(*f, Box::new(e.substitute(map))),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(map))),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(l.substitute(map)), Box::new(r.substitute(map))),
        }
    }

    /// Canonical key: segment and angle endpoints in label order.
    pub fn canonical(&self) -> Expr {
        match self {
            Expr::Len(a, b) if b < a => Expr::Len(b.clone(), a.clone()),
            Expr::Angle(a, v, c) if c < a => Expr::Angle(c.clone(), v.clone(), a.clone()),
            Expr::Func(f, e) => Expr::Func(*f, Box::new(e.canonical())),
            Expr::Neg(e) => Expr::Neg(Box::new(e.canonical())),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(l.canonical()), Box::new(r.canonical())),
            e => e.clone(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(&mut s, false);
        f.write_str(&s)
    }
}

impl Atom {
    fn write(&self, friendly: bool) -> String {
        match self {
            Atom::Cmp(l, c, r) => {
                let (a, b) = if friendly {
                    (l.friendly(), r.friendly())
                } else {
                    (l.to_string(), r.to_string())
                };
                format!("{a} {} {b}", c.sym())
            }
            Atom::Pred { pred: Pred::Parallel, labels, .. } if friendly => {
                format!("{}{} ∥ {}{}", labels[0], labels[1], labels[2], labels[3])
            }
            Atom::Pred { pred: Pred::Perpendicular, labels, .. } if friendly => {
                format!("{}{} ⊥ {}{}", labels[0], labels[1], labels[2], labels[3])
            }
            Atom::Pred { pred, labels, name } => {
                let groups: Vec<String> = match pred.sig() {
                    Sig::Labels(shape) => {
                        let mut i = 0;
                        shape
                            .iter()
                            .map(|&n| {
                                let g = join(&labels[i..i + n]);
                                i += n;
                                g
                            })
                            .collect()
                    }
                    Sig::LabelsThenName(_) => vec![join(labels), name.clone().unwrap_or_default()],
                    Sig::NameThenLabels => vec![name.clone().unwrap_or_default(), join(labels)],
                    Sig::Name => vec![name.clone().unwrap_or_default()],
                };
                format!("{}({})", pred.name(), groups.join("; "))
            }
        }
    }

    pub fn friendly(&self) -> String {
        self.write(true)
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        match self {
            Atom::Cmp(l, _, r) => {
                l.labels(&mut out);
                r.labels(&mut out);
            }
            Atom::Pred { labels, .. } => out.extend(labels.iter().cloned()),
        }
        out
    }

    pub fn substitute(&self, map: &BTreeMap<Label, Label>) -> Atom {
        match self {
            Atom::Cmp(l, c, r) => Atom::Cmp(l.substitute(map), *c, r.substitute(map)),
            Atom::Pred { pred, labels, name } => Atom::Pred {
                pred: *pred,
                labels: labels
                    .iter()
                    .map(|l| map.get(l).cloned().unwrap_or_else(|| l.clone()))
                    .collect(),
                name: name.clone(),
            },
        }
    }

    pub fn is_conclusion(&self) -> bool {
        match self {
            Atom::Cmp(..) => true,
            Atom::Pred { pred, .. } => pred.is_conclusion(),
        }
    }

    /// Order-insensitive key used to deduplicate instantiated facts.
    pub fn canonical_key(&self) -> String {
        match self {
            Atom::Cmp(l, Cmp::Eq, r) => {
                let (a, b) = (l.canonical().to_string(), r.canonical().to_string());
                if a <= b {
                    format!("{a} = {b}")
                } else {
                    format!("{b} = {a}")
                }
            }
            Atom::Cmp(l, Cmp::Gt, r) => format!("{} < {}", r.canonical(), l.canonical()),
            Atom::Cmp(l, c, r) => format!("{} {} {}", l.canonical(), c.sym(), r.canonical()),
            Atom::Pred { pred: p @ (Pred::Parallel | Pred::Perpendicular), labels, .. } => {
                let mut s1 = [labels[0].clone(), labels[1].clone()];
                let mut s2 = [labels[2].clone(), labels[3].clone()];
                s1.sort();
                s2.sort();
                let (a, b) = (concat(&s1), concat(&s2));
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                format!("{}({a};{b})", p.name())
            }
            other => other.to_string(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.write(false))
    }
}

// ---------------------------------------------------------------------------
// evaluation

/// Coordinate access for evaluation.
pub trait Coords {
    fn point(&self, l: &Label) -> Option<Point>;
    fn radius(&self, center: &Label) -> Option<f64>;
}

impl Coords for crate::geometry::Scene {
    fn point(&self, l: &Label) -> Option<Point> {
        crate::geometry::Scene::point(self, l)
    }

    fn radius(&self, center: &Label) -> Option<f64> {
        self.circles().find(|(_, c, _)| *c == center).map(|(_, _, r)| r)
    }
}

fn pt(g: &dyn Coords, l: &Label) -> Result<Point, EvalError> {
    g.point(l).ok_or_else(|| EvalError::UnknownVertex(l.clone()))
}

impl Expr {
    pub fn eval(&self, g: &dyn Coords) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(n) => *n,
            Expr::Len(a, b) => distance(pt(g, a)?, pt(g, b)?),
            Expr::Angle(a, v, c) => angle_at(pt(g, v)?, pt(g, a)?, pt(g, c)?)?,
            Expr::Area(l) => {
                let pts = l.iter().map(|x| pt(g, x)).collect::<Result<Vec<_>, _>>()?;
                polygon_area(&pts)?
            }
            Expr::Radius(o) => g.radius(o).ok_or_else(|| EvalError::NoCircle(o.clone()))?,
            Expr::Dist(p, a, b) => {
                let (pa, pb) = (pt(g, a)?, pt(g, b)?);
                if distance(pa, pb) <= EPS {
                    return Err(GeometryError::DegenerateRay.into());
                }
                point_line_distance(pt(g, p)?, pa, pb)
            }
            Expr::Func(f, e) => {
                let x = e.eval(g)?;
                match f {
                    Func::Sqrt if x < 0.0 => return Err(EvalError::Domain(format!("sqrt({x})"))),
                    Func::Sqrt => x.sqrt(),
                    Func::Sin => x.to_radians().sin(),
                    Func::Cos => x.to_radians().cos(),
                    Func::Tan => x.to_radians().tan(),
                }
            }
            Expr::Neg(e) => -e.eval(g)?,
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(g)?, r.eval(g)?);
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div if b == 0.0 => return Err(EvalError::Domain("division by zero".into())),
                    Op::Div => a / b,
                    Op::Pow => a.powf(b),
                }
            }
        })
    }

    /// The single length, angle, area or radius this expression names.
    pub fn as_element(&self) -> Option<&Expr> {
        matches!(self, Expr::Len(..) | Expr::Angle(..) | Expr::Area(..) | Expr::Radius(..)).then_some(self)
    }
}

/// Numeric strictness for comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// Relative `EPS`, for deciding preconditions on constructed figures.
    Exact,
    /// Absolute tolerance, for checking conclusions.
    Absolute(f64),
}

impl Tolerance {
    fn bound(self, a: f64, b: f64) -> f64 {
        match self {
            Tolerance::Exact => EPS * a.abs().max(b.abs()).max(1.0),
            Tolerance::Absolute(t) => t,
        }
    }
}

/// Evaluates a comparison, returning whether it holds and its residual.
pub fn compare(l: f64, c: Cmp, r: f64, tol: Tolerance) -> (bool, f64) {
    let t = tol.bound(l, r);
    match c {
        Cmp::Eq => ((l - r).abs() <= t, (l - r).abs()),
        Cmp::Lt => (l < r - t, (l - r).max(0.0)),
        Cmp::Gt => (l > r + t, (r - l).max(0.0)),
    }
}

/// Geometry-only predicate evaluation for fully bound atoms. Predicates
/// that depend on drawn structure (`seg`, `triangle`, `role`, ...) are
/// evaluated by the matcher instead and return `None` here.
pub fn eval_geometric(atom: &Atom, g: &dyn Coords, tol: Tolerance) -> Result<Option<(bool, f64)>, EvalError> {
    let (pred, labels) = match atom {
        Atom::Cmp(l, c, r) => return Ok(Some(compare(l.eval(g)?, *c, r.eval(g)?, tol))),
        Atom::Pred { pred, labels, .. } => (*pred, labels),
    };
    let p = |i: usize| pt(g, &labels[i]);
    let unit = |a: Point, b: Point| b.sub(a).unit().ok_or(EvalError::Geometry(GeometryError::DegenerateRay));
    let small = match tol {
        Tolerance::Exact => EPS,
        Tolerance::Absolute(t) => t,
    };
    Ok(Some(match pred {
        Pred::Parallel | Pred::NotParallel => {
            let r = unit(p(0)?, p(1)?)?.cross(unit(p(2)?, p(3)?)?).abs();
            if pred == Pred::Parallel {
                (r <= small, r)
            } else {
                (r > small, r)
            }
        }
        Pred::Perpendicular => {
            let r = unit(p(0)?, p(1)?)?.dot(unit(p(2)?, p(3)?)?).abs();
            (r <= small, r)
        }
        Pred::Collinear => {
            let (a, b, c) = (p(0)?, p(1)?, p(2)?);
            let r = point_line_distance(c, a, b);
            (collinear(a, b, c) || r <= small, r)
        }
        Pred::Between | Pred::Midpoint => {
            let (x, y, z) = (p(0)?, p(1)?, p(2)?);
            let yz = distance(y, z);
            if yz <= EPS {
                return Ok(Some((false, f64::INFINITY)));
            }
            if pred == Pred::Midpoint {
                let r = distance(x, y.midpoint(z));
                (r <= small * yz.max(1.0), r)
            } else {
                let r = point_line_distance(x, y, z);
                let t = x.sub(y).dot(z.sub(y)) / (yz * yz);
                (r <= small * yz.max(1.0) && t > 1e-6 && t < 1.0 - 1e-6, r)
            }
        }
        Pred::OnCircle | Pred::OutsideCircle => {
            let o = &labels[1];
            let r = g.radius(o).ok_or_else(|| EvalError::NoCircle(o.clone()))?;
            let d = distance(p(0)?, p(1)?);
            if pred == Pred::OnCircle {
                ((d - r).abs() <= small * r.max(1.0), (d - r).abs())
            } else {
                (d > r * (1.0 + 1e-6), (r - d).max(0.0))
            }
        }
        Pred::SameSide | Pred::OppositeSides => {
            let (x, y, a, b) = (p(0)?, p(1)?, p(2)?, p(3)?);
            let d = b.sub(a);
            let scale = d.norm().max(1.0);
            let sx = d.cross(x.sub(a)) / scale;
            let sy = d.cross(y.sub(a)) / scale;
            let nonzero = sx.abs() > EPS * scale && sy.abs() > EPS * scale;
            let same = sx.signum() == sy.signum();
            let ok = nonzero && (same == (pred == Pred::SameSide));
            (ok, sx.abs().min(sy.abs()))
        }
        Pred::InsideAngle => {
            // inside_angle(D; B,A,C): D strictly inside angle BAC
            let (d, b, a, c) = (p(0)?, p(1)?, p(2)?, p(3)?);
            let whole = angle_at(a, b, c)?;
            let x = angle_at(a, b, d)?;
            let y = angle_at(a, d, c)?;
            let r = (x + y - whole).abs();
            (r <= 1e-7 && x > 1e-6 && y > 1e-6, r)
        }
        Pred::Tangent => {
            // tangent(P,T; O): line PT touches circle O at T
            let o = &labels[2];
            let r = g.radius(o).ok_or_else(|| EvalError::NoCircle(o.clone()))?;
            let (pp, t, po) = (p(0)?, p(1)?, p(2)?);
            let on = (distance(t, po) - r).abs();
            let touch = (point_line_distance(po, pp, t) - r).abs();
            let res = on.max(touch);
            (res <= small * r.max(1.0), res)
        }
        Pred::DistinctSets => {
            let mut a: Vec<&Label> = labels[..3].iter().collect();
            let mut b: Vec<&Label> = labels[3..].iter().collect();
            a.sort();
            b.sort();
            (a != b, 0.0)
        }
        Pred::Congruent | Pred::Similar => {
            let pts = (0..6).map(p).collect::<Result<Vec<_>, _>>()?;
            let sides = |o: usize| {
                [
                    distance(pts[o], pts[o + 1]),
                    distance(pts[o + 1], pts[o + 2]),
                    distance(pts[o], pts[o + 2]),
                ]
            };
            let (s, t) = (sides(0), sides(3));
            let r = if pred == Pred::Congruent {
                (0..3).map(|i| (s[i] - t[i]).abs()).fold(0.0, f64::max)
            } else {
                let k = t[0] / s[0];
                (0..3).map(|i| (s[i] * k - t[i]).abs()).fold(0.0, f64::max)
            };
            let bound = match tol {
                Tolerance::Exact => EPS * s.iter().chain(&t).fold(1.0f64, |m, x| m.max(*x)),
                Tolerance::Absolute(t) => t,
            };
            (r <= bound, r)
        }
        _ => return Ok(None),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_notations_agree() {
        assert_eq!(parse_atom("AB = 0.5 * BC").unwrap(), parse_atom("len(A,B) = 0.5 * len(B,C)").unwrap());
        assert_eq!(parse_atom("∠ABC = ∠ACB").unwrap(), parse_atom("angle(A,B,C) = angle(A,C,B)").unwrap());
        assert_eq!(parse_atom("DE ∥ BC").unwrap(), parse_atom("parallel(D,E; B,C)").unwrap());
        assert_eq!(parse_atom("AB ⊥ CD").unwrap(), parse_atom("perpendicular(AB; CD)").unwrap());
        assert_eq!(parse_atom("∠ABC = 62°").unwrap(), parse_atom("angle(A,B,C) = 62").unwrap());
    }

    #[test]
    fn canonical_display_round_trips() {
        for src in [
            "len(A,B) ^ 2 + len(B,C) ^ 2 = len(A,C) ^ 2",
            "len(A,D) = len(B,C) / (2 * sin(30))",
            "area(A,B,C,D) = len(A,B) * dist(D; A,B)",
            "role(A,D; angle-bisector)",
            "shape(regular-pentagon; A,B,C,D,E)",
            "substrate(circle)",
            "angle(A,B,C) - (angle(D,E,F) - 3) > -1",
        ] {
            let a = parse_atom(src).unwrap();
            let printed = a.to_string();
            assert_eq!(parse_atom(&printed).unwrap(), a, "{src} -> {printed}");
        }
    }

    #[test]
    fn precedence() {
        let e = parse_expr("1 + 2 * 3 ^ 2").unwrap();
        let g = crate::geometry::Scene::new();
        assert_eq!(e.eval(&g).unwrap(), 19.0);
        assert_eq!(parse_expr("8 - 3 - 2").unwrap().eval(&g).unwrap(), 3.0);
        assert_eq!(parse_expr("-2 ^ 2").unwrap().eval(&g).unwrap(), -4.0);
        assert!((parse_expr("tan(60)").unwrap().eval(&g).unwrap() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_vocabulary() {
        assert!(matches!(parse_atom("foo(A,B)"), Err(ParseError::UnknownName(_))));
        assert!(parse_atom("role(A,B; spline)").is_err());
        assert!(parse_atom("triangle(A,B)").is_err());
        assert!(parse_atom("AB =").is_err());
    }

    #[test]
    fn friendly_form() {
        let a = parse_atom("len(A,D) = 0.5 * len(B,C)").unwrap();
        assert_eq!(a.friendly(), "AD = 0.5 · BC");
        assert_eq!(parse_atom(&a.friendly()).unwrap(), a);
    }

    #[test]
    fn canonical_keys_ignore_orientation() {
        let a = parse_atom("∠ABC = ∠ACB").unwrap();
        let b = parse_atom("∠BCA = ∠CBA").unwrap();
        assert_eq!(a.canonical_key(), b.canonical_key());
        let p = parse_atom("BA ∥ DC").unwrap();
        let q = parse_atom("CD ∥ AB").unwrap();
        assert_eq!(p.canonical_key(), q.canonical_key());
    }
}
