//! Line-oriented edit scripts over proxies.
//!
//! ```text
//! scale #3 by 1.0 1.0 1.5        # multiply a3 by 1.5
//! translate #1 #4 by 0 0.1 0
//! rotate #2 by 0 0 0.5
//! shape #2 by 0.3 1.0
//! delete #7
//! add #9 scale 0.1 0.1 0.1 shape 1 1 at 0 0.2 0 rot 0 0 0
//! clone #1 as #10 offset 0.2 0 0
//! ```
//!
//! Verbs and keywords are case-insensitive. A `#` that is not immediately
//! followed by a digit starts a comment running to the end of the line.

use std::collections::HashSet;
use std::fmt;

use crate::proxy::{palette_color, Primitive, Proxy};
use crate::sq::{euler_xyz_to_matrix, matrix_to_euler_xyz, SuperquadricParams};

#[derive(Debug, Clone, PartialEq)]
pub enum EditOp {
    Scale { ids: Vec<u32>, factors: [f64; 3] },
    Translate { ids: Vec<u32>, offset: [f64; 3] },
    Rotate { ids: Vec<u32>, angles: [f64; 3] },
    Shape { ids: Vec<u32>, exponents: [f64; 2] },
    Delete { ids: Vec<u32> },
    /// Parameters in `a1 a2 a3 ε1 ε2 tx ty tz rx ry rz` order.
    Add { id: u32, params: [f64; 11] },
    Clone { source: u32, id: u32, offset: [f64; 3] },
}

impl EditOp {
    pub fn verb(&self) -> &'static str {
        match self {
            EditOp::Scale { .. } => "scale",
            EditOp::Translate { .. } => "translate",
            EditOp::Rotate { .. } => "rotate",
            EditOp::Shape { .. } => "shape",
            EditOp::Delete { .. } => "delete",
            EditOp::Add { .. } => "add",
            EditOp::Clone { .. } => "clone",
        }
    }

    /// Every id the command reads or creates.
    pub fn touched_ids(&self) -> Vec<u32> {
        match self {
            EditOp::Scale { ids, .. }
            | EditOp::Translate { ids, .. }
            | EditOp::Rotate { ids, .. }
            | EditOp::Shape { ids, .. }
            | EditOp::Delete { ids } => ids.clone(),
            EditOp::Add { id, .. } => vec![*id],
            EditOp::Clone { source, id, .. } => vec![*source, *id],
        }
    }
}

struct Nums<'a>(&'a [f64]);

impl fmt::Display for Nums<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

struct Ids<'a>(&'a [u32]);

impl fmt::Display for Ids<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "#{x}")?;
        }
        Ok(())
    }
}

/// Canonical single-line form; parsing it yields the same op.
impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = self.verb();
        match self {
            EditOp::Scale { ids, factors: v }
            | EditOp::Translate { ids, offset: v }
            | EditOp::Rotate { ids, angles: v } => write!(f, "{verb} {} by {}", Ids(ids), Nums(v)),
            EditOp::Shape { ids, exponents } => write!(f, "{verb} {} by {}", Ids(ids), Nums(exponents)),
            EditOp::Delete { ids } => write!(f, "{verb} {}", Ids(ids)),
            EditOp::Add { id, params: p } => write!(
                f,
                "add #{id} scale {} shape {} at {} rot {}",
                Nums(&p[0..3]),
                Nums(&p[3..5]),
                Nums(&p[5..8]),
                Nums(&p[8..11])
            ),
            EditOp::Clone { source, id, offset } => {
                write!(f, "clone #{source} as #{id} offset {}", Nums(offset))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditCommand {
    pub op: EditOp,
    /// 1-based position of the verb.
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EditScript {
    pub commands: Vec<EditCommand>,
    pub source: String,
}

impl EditScript {
    pub fn ops(&self) -> Vec<EditOp> {
        self.commands.iter().map(|c| c.op.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    /// One canonical command per line.
    pub fn to_canonical(&self) -> String {
        self.commands.iter().map(|c| format!("{}\n", c.op)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScriptErrorKind {
    #[error("unknown verb '{0}'")]
    UnknownVerb(String),
    #[error("expected {expected}, found {found}")]
    Expected { expected: String, found: String },
    #[error("invalid id '{0}'")]
    BadId(String),
    #[error("bad arity: '{verb}' takes {expected} values, got {found}")]
    BadArity { verb: &'static str, expected: usize, found: usize },
    #[error("non-numeric token '{0}'")]
    NotANumber(String),
    #[error("unexpected token '{0}'")]
    Unexpected(String),
    #[error("duplicate add id {0}")]
    DuplicateAddId(u32),
    #[error("unknown id {0}")]
    UnknownId(u32),
    #[error("id {0} already exists")]
    IdCollision(u32),
    #[error("scale of primitive {0} would become non-positive")]
    NonPositiveScale(u32),
    #[error("invalid parameters for primitive {id}: {reason}")]
    InvalidParams { id: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{kind} at line {line}, col {col}")]
pub struct ScriptError {
    pub kind: ScriptErrorKind,
    pub line: usize,
    pub col: usize,
}

const ADD_KEYWORDS: [&str; 4] = ["scale", "shape", "at", "rot"];

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> (Vec<Token<'_>>, usize) {
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut tokens = Vec::new();
    let mut end_col = 1;
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' && !chars.get(i + 1).is_some_and(|&(_, d)| d.is_ascii_digit()) {
            break;
        }
        let mut j = i;
        while j < chars.len() && !chars[j].1.is_whitespace() {
            j += 1;
        }
        let end = chars.get(j).map_or(line.len(), |&(b, _)| b);
        tokens.push(Token { text: &line[start..end], col: i + 1 });
        end_col = j + 1;
        i = j;
    }
    (tokens, end_col)
}

struct LineParser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> LineParser<'a> {
    fn err_at(&self, col: usize, kind: ScriptErrorKind) -> ScriptError {
        ScriptError { kind, line: self.line, col }
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn found(&self) -> String {
        self.tokens
            .get(self.pos)
            .map_or_else(|| "end of line".to_string(), |t| format!("'{}'", t.text))
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ScriptError> {
        match self.peek() {
            Some(t) if t.text.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err_at(
                self.here(),
                ScriptErrorKind::Expected { expected: format!("'{kw}'"), found: self.found() },
            )),
        }
    }

    fn selector(&mut self) -> Result<(u32, usize), ScriptError> {
        match self.peek() {
            Some(t) if t.text.starts_with('#') => {
                let id = t.text[1..]
                    .parse::<u32>()
                    .map_err(|_| self.err_at(t.col, ScriptErrorKind::BadId(t.text.to_string())))?;
                self.pos += 1;
                Ok((id, t.col))
            }
            _ => Err(self.err_at(
                self.here(),
                ScriptErrorKind::Expected { expected: "selector '#ID'".into(), found: self.found() },
            )),
        }
    }

    fn selectors(&mut self) -> Result<Vec<u32>, ScriptError> {
        let mut ids = vec![self.selector()?.0];
        while self.peek().is_some_and(|t| t.text.starts_with('#')) {
            ids.push(self.selector()?.0);
        }
        Ok(ids)
    }

    /// Exactly `n` reals, stopping at a keyword when `terminal` is false.
    fn reals<const N: usize>(&mut self, verb: &'static str, terminal: bool) -> Result<[f64; N], ScriptError> {
        let mut out = [0.0; N];
        for (found, slot) in out.iter_mut().enumerate() {
            let Some(t) = self.peek() else {
                return Err(self.err_at(
                    self.end_col,
                    ScriptErrorKind::BadArity { verb, expected: N, found },
                ));
            };
            match t.text.parse::<f64>() {
                Ok(v) if v.is_finite() => *slot = v,
                _ if !terminal && ADD_KEYWORDS.iter().any(|k| t.text.eq_ignore_ascii_case(k)) => {
                    return Err(self.err_at(t.col, ScriptErrorKind::BadArity { verb, expected: N, found }));
                }
                _ => return Err(self.err_at(t.col, ScriptErrorKind::NotANumber(t.text.to_string()))),
            }
            self.pos += 1;
        }
        if terminal {
            if let Some(t) = self.peek() {
                let extra = self.tokens.len() - self.pos;
                let kind = if t.text.parse::<f64>().is_ok() {
                    ScriptErrorKind::BadArity { verb, expected: N, found: N + extra }
                } else {
                    ScriptErrorKind::Unexpected(t.text.to_string())
                };
                return Err(self.err_at(t.col, kind));
            }
        }
        Ok(out)
    }

    fn finish(&self) -> Result<(), ScriptError> {
        match self.peek() {
            Some(t) => Err(self.err_at(t.col, ScriptErrorKind::Unexpected(t.text.to_string()))),
            None => Ok(()),
        }
    }
}

pub fn parse_script(text: &str) -> Result<EditScript, ScriptError> {
    let mut commands = Vec::new();
    let mut created: HashSet<u32> = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let (tokens, end_col) = tokenize(raw);
        if tokens.is_empty() {
            continue;
        }
        let mut p = LineParser { tokens, pos: 1, line: idx + 1, end_col };
        let head = p.tokens[0];
        let verb = head.text.to_ascii_lowercase();
        let op = match verb.as_str() {
            "scale" | "translate" | "rotate" => {
                let ids = p.selectors()?;
                p.keyword("by")?;
                let v = match verb.as_str() {
                    "scale" => p.reals::<3>("scale", true)?,
                    "translate" => p.reals::<3>("translate", true)?,
                    _ => p.reals::<3>("rotate", true)?,
                };
                match verb.as_str() {
                    "scale" => EditOp::Scale { ids, factors: v },
                    "translate" => EditOp::Translate { ids, offset: v },
                    _ => EditOp::Rotate { ids, angles: v },
                }
            }
            "shape" => {
                let ids = p.selectors()?;
                p.keyword("by")?;
                EditOp::Shape { ids, exponents: p.reals::<2>("shape", true)? }
            }
            "delete" => {
                let ids = p.selectors()?;
                p.finish()?;
                EditOp::Delete { ids }
            }
            "add" => {
                let (id, id_col) = p.selector()?;
                p.keyword("scale")?;
                let a = p.reals::<3>("add", false)?;
                p.keyword("shape")?;
                let e = p.reals::<2>("add", false)?;
                p.keyword("at")?;
                let t = p.reals::<3>("add", false)?;
                p.keyword("rot")?;
                let r = p.reals::<3>("add", true)?;
                if !created.insert(id) {
                    return Err(p.err_at(id_col, ScriptErrorKind::DuplicateAddId(id)));
                }
                EditOp::Add {
                    id,
                    params: [a[0], a[1], a[2], e[0], e[1], t[0], t[1], t[2], r[0], r[1], r[2]],
                }
            }
            "clone" => {
                let (source, _) = p.selector()?;
                p.keyword("as")?;
                let (id, id_col) = p.selector()?;
                p.keyword("offset")?;
                let offset = p.reals::<3>("clone", true)?;
                if !created.insert(id) {
                    return Err(p.err_at(id_col, ScriptErrorKind::DuplicateAddId(id)));
                }
                EditOp::Clone { source, id, offset }
            }
            _ => {
                return Err(ScriptError {
                    kind: ScriptErrorKind::UnknownVerb(head.text.to_string()),
                    line: idx + 1,
                    col: head.col,
                })
            }
        };
        commands.push(EditCommand { op, line: idx + 1, col: head.col });
    }
    Ok(EditScript { commands, source: text.to_string() })
}

/// Runs the script in order against a copy of `proxy`, failing fast.
pub fn apply_script(script: &EditScript, proxy: &Proxy) -> Result<Proxy, ScriptError> {
    let mut out = proxy.clone();
    for cmd in &script.commands {
        apply_command(cmd, &mut out)?;
    }
    Ok(out)
}

fn apply_command(cmd: &EditCommand, proxy: &mut Proxy) -> Result<(), ScriptError> {
    let err = |kind| ScriptError { kind, line: cmd.line, col: cmd.col };
    let index_of = |proxy: &Proxy, id: u32| {
        proxy
            .primitives()
            .iter()
            .position(|p| p.id == id)
            .ok_or_else(|| err(ScriptErrorKind::UnknownId(id)))
    };
    let invalid = |id: u32, e: crate::sq::SqError| err(ScriptErrorKind::InvalidParams { id, reason: e.to_string() });

    match &cmd.op {
        EditOp::Scale { ids, factors } => {
            for &id in ids {
                let i = index_of(proxy, id)?;
                let prim = &mut proxy.primitives_mut()[i];
                let a = prim.params.scale();
                let scaled = [a[0] * factors[0], a[1] * factors[1], a[2] * factors[2]];
                if scaled.iter().any(|&x| x <= 0.0) {
                    return Err(err(ScriptErrorKind::NonPositiveScale(id)));
                }
                prim.params = prim.params.with_scale(scaled).map_err(|e| invalid(id, e))?;
            }
        }
        EditOp::Translate { ids, offset } => {
            for &id in ids {
                let i = index_of(proxy, id)?;
                let prim = &mut proxy.primitives_mut()[i];
                let t = prim.params.translation();
                let moved = [t[0] + offset[0], t[1] + offset[1], t[2] + offset[2]];
                prim.params = prim.params.with_translation(moved).map_err(|e| invalid(id, e))?;
            }
        }
        EditOp::Rotate { ids, angles } => {
            let delta = euler_xyz_to_matrix(*angles);
            for &id in ids {
                let i = index_of(proxy, id)?;
                let prim = &mut proxy.primitives_mut()[i];
                let composed = delta * prim.params.rotation_matrix();
                prim.params = prim
                    .params
                    .with_rotation(matrix_to_euler_xyz(&composed))
                    .map_err(|e| invalid(id, e))?;
            }
        }
        EditOp::Shape { ids, exponents } => {
            for &id in ids {
                let i = index_of(proxy, id)?;
                let prim = &mut proxy.primitives_mut()[i];
                prim.params = prim.params.with_shape(*exponents).map_err(|e| invalid(id, e))?;
            }
        }
        EditOp::Delete { ids } => {
            for &id in ids {
                let i = index_of(proxy, id)?;
                proxy.primitives_mut().remove(i);
            }
        }
        EditOp::Add { id, params } => {
            if proxy.contains(*id) {
                return Err(err(ScriptErrorKind::IdCollision(*id)));
            }
            if params[..3].iter().any(|&a| a <= 0.0) {
                return Err(err(ScriptErrorKind::NonPositiveScale(*id)));
            }
            let q = SuperquadricParams::from_array(*params).map_err(|e| invalid(*id, e))?;
            proxy.primitives_mut().push(Primitive { id: *id, color: palette_color(*id), params: q });
        }
        EditOp::Clone { source, id, offset } => {
            let i = index_of(proxy, *source)?;
            if proxy.contains(*id) {
                return Err(err(ScriptErrorKind::IdCollision(*id)));
            }
            let src = proxy.primitives()[i].params;
            let t = src.translation();
            let q = src
                .with_translation([t[0] + offset[0], t[1] + offset[1], t[2] + offset[2]])
                .map_err(|e| invalid(*id, e))?;
            proxy.primitives_mut().push(Primitive { id: *id, color: palette_color(*id), params: q });
        }
    }
    Ok(())
}
