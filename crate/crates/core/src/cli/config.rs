//! JSON problem description.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "dimension": 1,
//!   "lattice": [["1"]],
//!   "point_group": "p1",
//!   "dilation": [["2"]],
//!   "mask": {
//!     "multiplicity": 1,
//!     "domain": "crystal",
//!     "entries": [{"g": 0, "k": [0], "coef": [["1/2"]]}]
//!   },
//!   "independent": true,
//!   "options": {"p_max": 6}
//! }
//! ```
//!
//! Scalars are `"p/q"` strings, integers, plain floats, or `[re, im]` pairs of
//! either. A single float anywhere in the mask switches it to the float
//! backend. `point_group` is a catalog name, `{"elements": [...]}` or
//! `{"generators": [...]}`.

use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::cascade::CascadeOptions;
use crate::crystal::{
    catalog_elements, generate_group, validate_triple, CrystalElement, CrystalError, CrystalTriple,
    Dilation, Lattice,
};
use crate::linalg::{format_rational, parse_rational, Exact, Float, Mat, Rational, Scalar};
use crate::mask::{Mask, MaskError};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_P_MAX: usize = 6;
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error("invalid point group: {0}")]
    Group(CrystalError),
    #[error("inadmissible dilation: {0}")]
    Dilation(CrystalError),
    #[error("{path}: {source}")]
    Mask { path: String, source: MaskError },
}

fn malformed(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Malformed {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// Keys are crystal elements `(g, k)`.
    Crystal,
    /// Keys are lattice translations; the mask refines over `Λ` alone.
    Lattice,
}

#[derive(Clone, Debug)]
pub enum AnyMask {
    Exact(Mask<Exact>),
    Float(Mask<Float>),
}

impl AnyMask {
    pub fn r(&self) -> usize {
        match self {
            AnyMask::Exact(m) => m.r(),
            AnyMask::Float(m) => m.r(),
        }
    }

    pub fn backend(&self) -> &'static str {
        match self {
            AnyMask::Exact(_) => "exact",
            AnyMask::Float(_) => "float",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub p_max: usize,
    pub cascade: CascadeOptions,
}

/// Parsed and validated configuration.
#[derive(Clone, Debug)]
pub struct Problem {
    pub dimension: usize,
    pub lattice: Lattice,
    /// `point_group` exactly as given, echoed by lift and extract.
    pub point_group: Value,
    pub triple: CrystalTriple,
    pub dilation: Dilation,
    pub domain: Domain,
    pub mask: AnyMask,
    pub independent: bool,
    pub options: Options,
    pub raw_options: Value,
}

impl Problem {
    /// Triple and dilation the mask refines over: the full crystal group for
    /// crystal masks, its translations for lattice masks.
    pub fn refinement_setting(&self) -> Result<(CrystalTriple, Dilation), ConfigError> {
        match self.domain {
            Domain::Crystal => Ok((self.triple.clone(), self.dilation.clone())),
            Domain::Lattice => {
                let t = CrystalTriple::translations(self.lattice.clone());
                let dil = Dilation::new(self.dilation.matrix().clone(), &t)
                    .map_err(ConfigError::Dilation)?;
                Ok((t, dil))
            }
        }
    }
}

pub fn parse_problem(text: &str) -> Result<Problem, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| malformed("$", e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| malformed("$", "expected an object"))?;
    if let Some(v) = obj.get("schema_version") {
        match v.as_u64() {
            Some(n) if n == SCHEMA_VERSION as u64 => {}
            _ => {
                return Err(malformed(
                    "$.schema_version",
                    format!("expected {SCHEMA_VERSION}"),
                ))
            }
        }
    }
    let dimension = obj
        .get("dimension")
        .and_then(Value::as_u64)
        .filter(|&d| d >= 1)
        .ok_or_else(|| malformed("$.dimension", "expected a positive integer"))?
        as usize;

    let lattice = match obj.get("lattice") {
        None | Some(Value::Null) => Lattice::standard(dimension),
        Some(v) => {
            let basis = rational_matrix(v, "$.lattice", dimension)?;
            Lattice::new(basis).map_err(ConfigError::Group)?
        }
    };

    let point_group = obj
        .get("point_group")
        .cloned()
        .unwrap_or_else(|| Value::String("p1".into()));
    let elements = group_elements(&point_group, dimension)?;
    let triple = validate_triple(lattice.clone(), elements).map_err(ConfigError::Group)?;

    let a = rational_matrix(
        obj.get("dilation")
            .ok_or_else(|| malformed("$.dilation", "missing"))?,
        "$.dilation",
        dimension,
    )?;
    let dilation = Dilation::new(a, &triple).map_err(ConfigError::Dilation)?;

    let mask_value = obj
        .get("mask")
        .ok_or_else(|| malformed("$.mask", "missing"))?;
    let (domain, mask) = parse_mask(mask_value, dimension, &triple)?;

    let independent = match obj.get("independent") {
        None | Some(Value::Null) => false,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| malformed("$.independent", "expected a boolean"))?,
    };
    let raw_options = obj.get("options").cloned().unwrap_or(Value::Null);
    let options = parse_options(&raw_options)?;

    Ok(Problem {
        dimension,
        lattice,
        point_group,
        triple,
        dilation,
        domain,
        mask,
        independent,
        options,
        raw_options,
    })
}

fn group_elements(value: &Value, dim: usize) -> Result<Vec<Mat<Rational>>, ConfigError> {
    match value {
        Value::String(name) => catalog_elements(name, dim).map_err(ConfigError::Group),
        Value::Object(map) => {
            if let Some(list) = map.get("elements") {
                let items = list
                    .as_array()
                    .ok_or_else(|| malformed("$.point_group.elements", "expected a list"))?;
                items
                    .iter()
                    .enumerate()
                    .map(|(i, m)| rational_matrix(m, &format!("$.point_group.elements[{i}]"), dim))
                    .collect()
            } else if let Some(list) = map.get("generators") {
                let items = list
                    .as_array()
                    .ok_or_else(|| malformed("$.point_group.generators", "expected a list"))?;
                let gens = items
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        rational_matrix(m, &format!("$.point_group.generators[{i}]"), dim)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                generate_group(&gens, dim).map_err(ConfigError::Group)
            } else {
                Err(malformed(
                    "$.point_group",
                    "expected \"elements\" or \"generators\"",
                ))
            }
        }
        _ => Err(malformed("$.point_group", "expected a name or an object")),
    }
}

fn parse_options(value: &Value) -> Result<Options, ConfigError> {
    let mut opts = Options {
        p_max: DEFAULT_P_MAX,
        cascade: CascadeOptions {
            seed: DEFAULT_SEED,
            ..CascadeOptions::default()
        },
    };
    let map = match value {
        Value::Null => return Ok(opts),
        Value::Object(map) => map,
        _ => return Err(malformed("$.options", "expected an object")),
    };
    let uint = |key: &str| -> Result<Option<u64>, ConfigError> {
        match map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| {
                malformed(
                    &format!("$.options.{key}"),
                    "expected a non-negative integer",
                )
            }),
        }
    };
    if let Some(p) = uint("p_max")? {
        opts.p_max = p as usize;
    }
    if let Some(n) = uint("iterations")? {
        opts.cascade.iterations = n as usize;
    }
    if let Some(q) = uint("grid_exponent")? {
        opts.cascade.grid_exponent = q as u32;
    }
    if let Some(n) = uint("samples")? {
        opts.cascade.samples = n as usize;
    }
    if let Some(seed) = uint("seed")? {
        opts.cascade.seed = seed;
    }
    if let Some(v) = map.get("tolerance") {
        opts.cascade.tolerance = v
            .as_f64()
            .filter(|t| *t > 0.0)
            .ok_or_else(|| malformed("$.options.tolerance", "expected a positive number"))?;
    }
    Ok(opts)
}

/// Rational entry: `"p/q"` string or integral JSON number.
fn rational_value(v: &Value, path: &str) -> Result<Rational, ConfigError> {
    match v {
        Value::String(s) => {
            parse_rational(s).ok_or_else(|| malformed(path, format!("bad rational {s:?}")))
        }
        Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Rational::from_integer(i.into())),
            None => Err(malformed(
                path,
                "non-integer numbers must be written as \"p/q\" strings",
            )),
        },
        _ => Err(malformed(path, "expected a rational")),
    }
}

fn rational_matrix(v: &Value, path: &str, dim: usize) -> Result<Mat<Rational>, ConfigError> {
    let rows = v
        .as_array()
        .ok_or_else(|| malformed(path, "expected a list of rows"))?;
    if rows.len() != dim {
        return Err(malformed(path, format!("expected {dim} rows")));
    }
    let mut out = Vec::with_capacity(dim);
    for (i, row) in rows.iter().enumerate() {
        let entries = row
            .as_array()
            .filter(|r| r.len() == dim)
            .ok_or_else(|| malformed(&format!("{path}[{i}]"), format!("expected {dim} entries")))?;
        out.push(
            entries
                .iter()
                .enumerate()
                .map(|(j, e)| rational_value(e, &format!("{path}[{i}][{j}]")))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Mat::from_rows(out).map_err(|e| malformed(path, e.to_string()))
}

#[derive(Clone, Debug)]
enum Coef {
    Exact(Exact),
    Float(Float),
}

impl Coef {
    fn to_float(&self) -> Float {
        match self {
            Coef::Exact(x) => x.to_c64(),
            Coef::Float(x) => *x,
        }
    }
}

enum Part {
    Exact(Rational),
    Float(f64),
}

fn real_part(v: &Value, path: &str) -> Result<Part, ConfigError> {
    match v {
        Value::String(s) => parse_rational(s)
            .map(Part::Exact)
            .ok_or_else(|| malformed(path, format!("bad rational {s:?}"))),
        Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Part::Exact(Rational::from_integer(i.into()))),
            None => n
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Part::Float)
                .ok_or_else(|| malformed(path, "bad number")),
        },
        _ => Err(malformed(path, "expected a number or a rational string")),
    }
}

fn coef_value(v: &Value, path: &str) -> Result<Coef, ConfigError> {
    let (re, im) = match v {
        Value::Array(pair) if pair.len() == 2 && !pair[0].is_array() => (
            real_part(&pair[0], &format!("{path}[0]"))?,
            real_part(&pair[1], &format!("{path}[1]"))?,
        ),
        _ => (real_part(v, path)?, Part::Exact(Rational::zero())),
    };
    Ok(match (re, im) {
        (Part::Exact(a), Part::Exact(b)) => Coef::Exact(Exact::new(a, b)),
        (a, b) => {
            let f = |p: Part| match p {
                Part::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
                Part::Float(x) => x,
            };
            Coef::Float(Float::new(f(a), f(b)))
        }
    })
}

/// `coef` is an `r×r` list of rows, or a bare scalar when `r = 1`.
fn coef_matrix(v: &Value, path: &str, r: usize) -> Result<Vec<Coef>, ConfigError> {
    let is_rows = matches!(v, Value::Array(rows) if rows.first().is_some_and(Value::is_array));
    if !is_rows {
        if r != 1 {
            return Err(malformed(path, format!("expected a {r}x{r} matrix")));
        }
        return Ok(vec![coef_value(v, path)?]);
    }
    let rows = v.as_array().expect("checked");
    if rows.len() != r {
        return Err(malformed(path, format!("expected {r} rows")));
    }
    let mut out = Vec::with_capacity(r * r);
    for (i, row) in rows.iter().enumerate() {
        let entries = row
            .as_array()
            .filter(|e| e.len() == r)
            .ok_or_else(|| malformed(&format!("{path}[{i}]"), format!("expected {r} entries")))?;
        for (j, e) in entries.iter().enumerate() {
            out.push(coef_value(e, &format!("{path}[{i}][{j}]"))?);
        }
    }
    Ok(out)
}

fn parse_mask(
    value: &Value,
    dim: usize,
    triple: &CrystalTriple,
) -> Result<(Domain, AnyMask), ConfigError> {
    let obj = value
        .as_object()
        .ok_or_else(|| malformed("$.mask", "expected an object"))?;
    let r = obj
        .get("multiplicity")
        .and_then(Value::as_u64)
        .filter(|&r| r >= 1)
        .ok_or_else(|| malformed("$.mask.multiplicity", "expected a positive integer"))?
        as usize;
    let domain = match obj
        .get("domain")
        .and_then(Value::as_str)
        .unwrap_or("crystal")
    {
        "crystal" => Domain::Crystal,
        "lattice" => Domain::Lattice,
        other => {
            return Err(malformed(
                "$.mask.domain",
                format!("unknown domain {other:?}"),
            ))
        }
    };
    let entries = obj
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("$.mask.entries", "expected a list"))?;
    let mut parsed = Vec::with_capacity(entries.len());
    for (n, e) in entries.iter().enumerate() {
        let path = format!("$.mask.entries[{n}]");
        let g = e
            .get("g")
            .map(|v| {
                v.as_u64()
                    .ok_or_else(|| malformed(&format!("{path}.g"), "expected an index"))
            })
            .transpose()?
            .unwrap_or(0) as usize;
        let k = e
            .get("k")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(&format!("{path}.k"), "expected a list of integers"))?
            .iter()
            .map(|x| x.as_i64())
            .collect::<Option<Vec<i64>>>()
            .ok_or_else(|| malformed(&format!("{path}.k"), "expected integers"))?;
        if k.len() != dim {
            return Err(malformed(
                &format!("{path}.k"),
                format!("expected {dim} coordinates"),
            ));
        }
        let gamma = CrystalElement::new(g, k);
        let allowed = match domain {
            Domain::Crystal => triple.contains(&gamma),
            Domain::Lattice => gamma.is_translation(),
        };
        if !allowed {
            return Err(malformed(&format!("{path}.g"), "element outside the group"));
        }
        let coef = coef_matrix(
            e.get("coef")
                .ok_or_else(|| malformed(&format!("{path}.coef"), "missing"))?,
            &format!("{path}.coef"),
            r,
        )?;
        parsed.push((gamma, coef));
    }
    let any_float = parsed
        .iter()
        .any(|(_, c)| c.iter().any(|x| matches!(x, Coef::Float(_))));
    let to_mask_err = |source| ConfigError::Mask {
        path: "$.mask".into(),
        source,
    };
    let mask = if any_float {
        AnyMask::Float(
            Mask::new(
                dim,
                r,
                parsed.into_iter().map(|(g, c)| {
                    let m = Mat::new(r, r, c.iter().map(Coef::to_float).collect()).expect("r×r");
                    (g, m)
                }),
            )
            .map_err(to_mask_err)?,
        )
    } else {
        AnyMask::Exact(
            Mask::new(
                dim,
                r,
                parsed.into_iter().map(|(g, c)| {
                    let vals = c
                        .into_iter()
                        .map(|x| match x {
                            Coef::Exact(q) => q,
                            Coef::Float(_) => unreachable!("no floats"),
                        })
                        .collect();
                    (g, Mat::new(r, r, vals).expect("r×r"))
                }),
            )
            .map_err(to_mask_err)?,
        )
    };
    Ok((domain, mask))
}

/// JSON form of a scalar: rational strings for exact values, numbers for
/// floats, `[re, im]` pairs when complex.
pub trait JsonScalar {
    fn to_json(&self) -> Value;
}

impl JsonScalar for Rational {
    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }
}

impl JsonScalar for Exact {
    fn to_json(&self) -> Value {
        if self.im.is_zero() {
            self.re.to_json()
        } else {
            json!([format_rational(&self.re), format_rational(&self.im)])
        }
    }
}

impl JsonScalar for Float {
    fn to_json(&self) -> Value {
        if self.im == 0.0 {
            json!(self.re)
        } else {
            json!([self.re, self.im])
        }
    }
}

pub fn matrix_json<S: Clone + JsonScalar>(m: &Mat<S>) -> Value {
    Value::Array(
        m.to_rows()
            .iter()
            .map(|row| Value::Array(row.iter().map(JsonScalar::to_json).collect()))
            .collect(),
    )
}

pub fn mask_json<S: Scalar + JsonScalar>(mask: &Mask<S>, domain: Domain) -> Value {
    let entries: Vec<Value> = mask
        .iter()
        .map(|(g, c)| json!({"g": g.g, "k": g.k, "coef": matrix_json(c)}))
        .collect();
    json!({
        "multiplicity": mask.r(),
        "domain": match domain {
            Domain::Crystal => "crystal",
            Domain::Lattice => "lattice",
        },
        "entries": entries,
    })
}

/// Canonical configuration text with a replacement mask.
pub fn problem_json(problem: &Problem, mask: Value) -> Value {
    let mut out = Map::new();
    out.insert("schema_version".into(), json!(SCHEMA_VERSION));
    out.insert("dimension".into(), json!(problem.dimension));
    out.insert("lattice".into(), matrix_json(problem.lattice.basis()));
    out.insert("point_group".into(), problem.point_group.clone());
    out.insert("dilation".into(), matrix_json(problem.dilation.matrix()));
    out.insert("mask".into(), mask);
    out.insert("independent".into(), json!(problem.independent));
    if !problem.raw_options.is_null() {
        out.insert("options".into(), problem.raw_options.clone());
    }
    Value::Object(out)
}
