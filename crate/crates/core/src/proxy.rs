//! Primitive-set proxies, their JSON file format, and the primitive diff.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde_json::{json, Map, Value};

use crate::sq::{wrap_angle, SqError, SuperquadricParams};

/// Relative per-parameter tolerance used when no other is given.
pub const DEFAULT_DIFF_TOLERANCE: f64 = 1e-6;

/// Fixed 16-entry color palette used for newly created primitives.
pub const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [0, 0, 128],
];

pub fn palette_color(index: u32) -> [u8; 3] {
    PALETTE[index as usize % PALETTE.len()]
}

#[derive(Debug, thiserror::Error)]
pub enum ProxyError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Params { path: String, source: SqError },
    #[error("duplicate primitive id {0}")]
    DuplicateId(u32),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ProxyError {
    ProxyError::Schema { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub id: u32,
    pub color: [u8; 3],
    pub params: SuperquadricParams,
}

impl Primitive {
    pub fn new(id: u32, params: SuperquadricParams) -> Self {
        Primitive { id, color: palette_color(id), params }
    }
}

/// Ordered, id-keyed set of primitives with a free-text category label.
#[derive(Debug, Clone, PartialEq)]
pub struct Proxy {
    category: String,
    primitives: Vec<Primitive>,
}

impl Proxy {
    pub fn new(category: impl Into<String>, primitives: Vec<Primitive>) -> Result<Self, ProxyError> {
        let mut seen = HashSet::new();
        for p in &primitives {
            if !seen.insert(p.id) {
                return Err(ProxyError::DuplicateId(p.id));
            }
        }
        Ok(Proxy { category: category.into(), primitives })
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Primitive> {
        self.primitives.iter().find(|p| p.id == id)
    }

    pub fn contains(&self, id: u32) -> bool {
        self.get(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.primitives.iter().map(|p| p.id)
    }

    pub(crate) fn primitives_mut(&mut self) -> &mut Vec<Primitive> {
        &mut self.primitives
    }

    pub fn from_json(text: &str) -> Result<Self, ProxyError> {
        let value: Value = serde_json::from_str(text)?;
        parse_proxy(&value)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProxyError> {
        let text = std::str::from_utf8(bytes).map_err(|e| schema("$", format!("not UTF-8: {e}")))?;
        Self::from_json(text)
    }

    /// Pretty-printed JSON with every number rounded to 9 significant digits.
    pub fn to_json(&self) -> String {
        let prims: Vec<Value> = self
            .primitives
            .iter()
            .map(|p| {
                let q = &p.params;
                json!({
                    "id": p.id,
                    "color": p.color,
                    "scale": q.scale().map(round_sig9),
                    "shape": q.shape().map(round_sig9),
                    "translation": q.translation().map(round_sig9),
                    "rotation": q.rotation().map(round_sig9),
                })
            })
            .collect();
        let doc = json!({ "category": self.category, "primitives": prims });
        let mut s = serde_json::to_string_pretty(&doc).expect("proxy JSON is always serializable");
        s.push('\n');
        s
    }
}

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    format!("{x:.8e}").parse().unwrap_or(x)
}

const PRIMITIVE_FIELDS: [&str; 6] = ["id", "color", "scale", "shape", "translation", "rotation"];

fn parse_proxy(v: &Value) -> Result<Proxy, ProxyError> {
    let obj = v.as_object().ok_or_else(|| schema("$", "expected an object"))?;
    reject_unknown(obj, &["category", "primitives"], "")?;
    let category = obj
        .get("category")
        .ok_or_else(|| schema("category", "missing field"))?
        .as_str()
        .ok_or_else(|| schema("category", "expected a string"))?;
    let list = obj
        .get("primitives")
        .ok_or_else(|| schema("primitives", "missing field"))?
        .as_array()
        .ok_or_else(|| schema("primitives", "expected an array"))?;
    let mut prims = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        prims.push(parse_primitive(item, &format!("primitives[{i}]"))?);
    }
    Proxy::new(category, prims)
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], prefix: &str) -> Result<(), ProxyError> {
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        return Err(schema(path, "unknown field"));
    }
    Ok(())
}

fn parse_primitive(v: &Value, path: &str) -> Result<Primitive, ProxyError> {
    let obj = v.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    reject_unknown(obj, &PRIMITIVE_FIELDS, path)?;
    let field = |name: &str| {
        obj.get(name).ok_or_else(|| schema(format!("{path}.{name}"), "missing field"))
    };
    let id_path = format!("{path}.id");
    let id = field("id")?
        .as_u64()
        .filter(|&x| x <= u32::MAX as u64)
        .ok_or_else(|| schema(&id_path, "expected a non-negative integer"))? as u32;

    let color_path = format!("{path}.color");
    let color_vals = fixed_array(field("color")?, 3, &color_path)?;
    let mut color = [0u8; 3];
    for (c, v) in color.iter_mut().zip(color_vals) {
        *c = v
            .as_u64()
            .filter(|&x| x <= 255)
            .ok_or_else(|| schema(&color_path, "expected integers in [0, 255]"))? as u8;
    }

    let scale = numbers::<3>(field("scale")?, &format!("{path}.scale"))?;
    let shape = numbers::<2>(field("shape")?, &format!("{path}.shape"))?;
    let translation = numbers::<3>(field("translation")?, &format!("{path}.translation"))?;
    let rotation = numbers::<3>(field("rotation")?, &format!("{path}.rotation"))?;
    let params = SuperquadricParams::new(scale, shape, translation, rotation)
        .map_err(|source| ProxyError::Params { path: path.to_string(), source })?;
    Ok(Primitive { id, color, params })
}

fn fixed_array<'a>(v: &'a Value, n: usize, path: &str) -> Result<&'a [Value], ProxyError> {
    match v.as_array() {
        Some(a) if a.len() == n => Ok(a),
        _ => Err(schema(path, format!("expected an array of {n} elements"))),
    }
}

fn numbers<const N: usize>(v: &Value, path: &str) -> Result<[f64; N], ProxyError> {
    let vals = fixed_array(v, N, path)?;
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(vals) {
        *o = x.as_f64().ok_or_else(|| schema(path, "expected numbers"))?;
    }
    Ok(out)
}

/// Classification of an edited proxy's primitives relative to the original.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrimitiveDiff {
    pub unchanged: BTreeSet<u32>,
    /// `(original, edited)` pairs sharing one id, in edited-proxy order.
    pub edited: Vec<(Primitive, Primitive)>,
    /// Present only in the edited proxy, in its order.
    pub added: Vec<Primitive>,
    /// Present only in the original proxy, in its order.
    pub deleted: Vec<Primitive>,
}

impl PrimitiveDiff {
    pub fn is_identity(&self) -> bool {
        self.edited.is_empty() && self.added.is_empty() && self.deleted.is_empty()
    }

    pub fn edited_ids(&self) -> Vec<u32> {
        self.edited.iter().map(|(o, _)| o.id).collect()
    }

    pub fn added_ids(&self) -> Vec<u32> {
        self.added.iter().map(|p| p.id).collect()
    }

    pub fn deleted_ids(&self) -> Vec<u32> {
        self.deleted.iter().map(|p| p.id).collect()
    }
}

/// True when all 11 parameters agree. Scale, shape and translation use a
/// relative tolerance floored at magnitude 1; angles use `tol` as an
/// absolute wrapped difference.
pub fn params_match(a: &SuperquadricParams, b: &SuperquadricParams, tol: f64) -> bool {
    let (x, y) = (a.to_array(), b.to_array());
    let linear = x[..8]
        .iter()
        .zip(&y[..8])
        .all(|(p, q)| (p - q).abs() <= tol * p.abs().max(q.abs()).max(1.0));
    let angular = x[8..]
        .iter()
        .zip(&y[8..])
        .all(|(p, q)| wrap_angle(p - q).abs() <= tol);
    linear && angular
}

pub fn diff_proxies(orig: &Proxy, edit: &Proxy, tol: f64) -> PrimitiveDiff {
    let orig_by_id: HashMap<u32, &Primitive> = orig.primitives.iter().map(|p| (p.id, p)).collect();
    let mut diff = PrimitiveDiff::default();
    for e in &edit.primitives {
        match orig_by_id.get(&e.id) {
            Some(o) if params_match(&o.params, &e.params, tol) => {
                diff.unchanged.insert(e.id);
            }
            Some(o) => diff.edited.push(((*o).clone(), e.clone())),
            None => diff.added.push(e.clone()),
        }
    }
    diff.deleted = orig.primitives.iter().filter(|o| !edit.contains(o.id)).cloned().collect();
    diff
}
