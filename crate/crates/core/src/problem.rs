//! Problem definition files.
//!
//! A problem is a TOML document (conventionally `*.spec`). Boundary values
//! are numbers or affine expressions in `x` and `y` such as `"1000*y"`.
//!
//! ```toml
//! spec_version = 1
//! name = "patch"
//!
//! [material]
//! youngs_modulus = 2000.0
//! poisson_ratio = 0.3
//! mode = "plane-strain"
//!
//! [[loops]]
//! segments = [
//!   { id = "bottom", type = "line", start = [0.0, 0.0], end = [1.0, 0.0], elements = 5 },
//!   { id = "right",  type = "line", start = [1.0, 0.0], end = [1.0, 1.0], elements = 5 },
//!   { id = "top",    type = "line", start = [1.0, 1.0], end = [0.0, 1.0], elements = 5 },
//!   { id = "left",   type = "line", start = [0.0, 1.0], end = [0.0, 0.0], elements = 5 },
//! ]
//!
//! [[boundary]]
//! segment = "bottom"
//! t1 = 0
//! u2 = 0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kernels::{Material, PlaneMode};
use crate::mesh::{build_mesh, BoundaryMesh, GeometrySegment, DEFAULT_ALPHA1, DEFAULT_ALPHA3};
use crate::network::{Activation, InputMap, Network, OutputMode};
use crate::postprocess::Benchmark;
use crate::quadrature::QuadratureConfig;
use crate::solver::{bind_bcs, BinnModel, BoundaryConditions, PointConstraint, Prescribed, SegmentBc, TrainConfig};
use crate::{BinnError, Result, Vec2};

pub const SPEC_VERSION: u32 = 1;

/// `c + cx * x + cy * y`
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub c: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Affine {
    pub const ZERO: Affine = Affine { c: 0.0, cx: 0.0, cy: 0.0 };

    pub fn constant(c: f64) -> Self {
        Self { c, cx: 0.0, cy: 0.0 }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        self.c + self.cx * p.x + self.cy * p.y
    }

    fn is_constant(&self) -> bool {
        self.cx == 0.0 && self.cy == 0.0
    }

    fn scale(self, k: f64) -> Self {
        Self {
            c: k * self.c,
            cx: k * self.cx,
            cy: k * self.cy,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            c: self.c + o.c,
            cx: self.cx + o.cx,
            cy: self.cy + o.cy,
        }
    }
}

impl std::str::FromStr for Affine {
    type Err = BinnError;

    /// Numbers, `x`, `y`, `+ - * /` and parentheses; the result must be affine.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = ExprParser { src: s, pos: 0 };
        let v = p.expr()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(v)
    }
}

struct ExprParser<'a> {
    src: &'a str,
    pos: usize,
}

impl ExprParser<'_> {
    fn error(&self, msg: &str) -> BinnError {
        BinnError::Specification(format!("expression '{}' at column {}: {msg}", self.src, self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expr(&mut self) -> Result<Affine> {
        let mut v = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            v = v.add(if op == '+' { rhs } else { rhs.scale(-1.0) });
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<Affine> {
        let mut v = self.factor()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            v = match op {
                '*' if v.is_constant() => rhs.scale(v.c),
                '*' if rhs.is_constant() => v.scale(rhs.c),
                '*' => return Err(self.error("product of two coordinate terms is not affine")),
                _ if !rhs.is_constant() => return Err(self.error("division by a coordinate term is not affine")),
                _ if rhs.c == 0.0 => return Err(self.error("division by zero")),
                _ => v.scale(1.0 / rhs.c),
            };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<Affine> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(self.factor()?.scale(-1.0))
            }
            Some('+') => {
                self.pos += 1;
                self.factor()
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some('x') => {
                self.pos += 1;
                Ok(Affine { c: 0.0, cx: 1.0, cy: 0.0 })
            }
            Some('y') => {
                self.pos += 1;
                Ok(Affine { c: 0.0, cx: 0.0, cy: 1.0 })
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let rest = &self.src[self.pos..];
                let mut end = 0;
                let bytes = rest.as_bytes();
                while end < bytes.len() {
                    let b = bytes[end];
                    let exp_sign = (b == b'+' || b == b'-') && end > 0 && matches!(bytes[end - 1], b'e' | b'E');
                    if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                        end += 1;
                    } else {
                        break;
                    }
                }
                let v: f64 = rest[..end].parse().map_err(|_| self.error("malformed number"))?;
                self.pos += end;
                Ok(Affine::constant(v))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}

/// A boundary value: a number or an affine expression string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Number(f64),
    Expression(String),
}

impl ValueSpec {
    pub fn to_affine(&self) -> Result<Affine> {
        match self {
            ValueSpec::Number(v) => Ok(Affine::constant(*v)),
            ValueSpec::Expression(s) => s.parse(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    #[serde(default = "default_mode")]
    pub mode: PlaneMode,
}

fn default_mode() -> PlaneMode {
    PlaneMode::PlaneStrain
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    #[serde(default = "default_alpha3")]
    pub alpha3: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            alpha1: DEFAULT_ALPHA1,
            alpha3: DEFAULT_ALPHA3,
        }
    }
}

fn default_alpha1() -> f64 {
    DEFAULT_ALPHA1
}

fn default_alpha3() -> f64 {
    DEFAULT_ALPHA3
}

/// Segment geometry; arc angles are in degrees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SegmentSpec {
    Line {
        id: String,
        start: [f64; 2],
        end: [f64; 2],
        elements: usize,
    },
    Arc {
        id: String,
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
        end_angle: f64,
        elements: usize,
    },
}

impl SegmentSpec {
    pub fn id(&self) -> &str {
        match self {
            SegmentSpec::Line { id, .. } | SegmentSpec::Arc { id, .. } => id,
        }
    }

    fn to_segment(&self) -> GeometrySegment {
        match self {
            SegmentSpec::Line { id, start, end, elements } => {
                GeometrySegment::line(id.clone(), Vec2::from(*start), Vec2::from(*end), *elements)
            }
            SegmentSpec::Arc {
                id,
                center,
                radius,
                start_angle,
                end_angle,
                elements,
            } => GeometrySegment::arc(
                id.clone(),
                Vec2::from(*center),
                *radius,
                start_angle.to_radians(),
                end_angle.to_radians(),
                *elements,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub segments: Vec<SegmentSpec>,
}

/// Exactly one of `u1`/`t1` and one of `u2`/`t2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub segment: String,
    pub u1: Option<ValueSpec>,
    pub t1: Option<ValueSpec>,
    pub u2: Option<ValueSpec>,
    pub t2: Option<ValueSpec>,
}

impl BoundarySpec {
    fn to_segment_bc(&self) -> Result<SegmentBc> {
        let dir = |u: &Option<ValueSpec>, t: &Option<ValueSpec>, d: usize| -> Result<Prescribed> {
            match (u, t) {
                (Some(u), None) => Ok(Prescribed::Displacement(u.to_affine()?)),
                (None, Some(t)) => Ok(Prescribed::Traction(t.to_affine()?)),
                (Some(_), Some(_)) => Err(BinnError::Specification(format!(
                    "segment '{}': both u{d} and t{d} given",
                    self.segment
                ))),
                (None, None) => Err(BinnError::Specification(format!(
                    "segment '{}': one of u{d} or t{d} is required",
                    self.segment
                ))),
            }
        };
        Ok(SegmentBc {
            segment: self.segment.clone(),
            directions: [dir(&self.u1, &self.t1, 1)?, dir(&self.u2, &self.t2, 2)?],
        })
    }
}

/// Displacement prescribed at the node of `segment` nearest `at`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConstraintSpec {
    pub segment: String,
    pub at: [f64; 2],
    pub u1: Option<f64>,
    pub u2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub output: OutputMode,
    /// One network per boundary segment instead of one for the whole boundary.
    #[serde(default)]
    pub per_segment: bool,
    /// Physical size of a unit network output; derived from the data if absent.
    pub output_scale: Option<f64>,
}

fn default_hidden() -> Vec<usize> {
    vec![20, 20, 20]
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            activation: default_activation(),
            output: OutputMode::Displacement,
            per_segment: false,
            output_scale: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 50, ny: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub spec_version: u32,
    #[serde(default)]
    pub name: String,
    /// Closed-form solution to compare against, if one exists.
    pub benchmark: Option<Benchmark>,
    pub material: MaterialSpec,
    #[serde(default)]
    pub mesh: MeshSpec,
    pub loops: Vec<LoopSpec>,
    pub boundary: Vec<BoundarySpec>,
    #[serde(default)]
    pub point_constraints: Vec<PointConstraintSpec>,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub grid: GridSpec,
}

/// Everything needed to solve a problem.
#[derive(Clone, Debug)]
pub struct Setup {
    pub name: String,
    pub mesh: BoundaryMesh,
    pub material: Material,
    pub quadrature: QuadratureConfig,
    pub bcs: BoundaryConditions,
    pub network: NetworkSpec,
    pub train: TrainConfig,
    pub grid: GridSpec,
    pub benchmark: Option<Benchmark>,
}

impl ProblemSpec {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            BinnError::Specification(m) => BinnError::Specification(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let spec: ProblemSpec = toml::from_str(text).map_err(|e| BinnError::Specification(e.to_string()))?;
        if spec.spec_version != SPEC_VERSION {
            return Err(BinnError::Specification(format!(
                "spec_version {} is not supported (expected {SPEC_VERSION})",
                spec.spec_version
            )));
        }
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem specs serialize")
    }

    pub fn build(&self) -> Result<Setup> {
        let material = Material::new(self.material.youngs_modulus, self.material.poisson_ratio, self.material.mode)?;
        let loops: Vec<Vec<GeometrySegment>> = self
            .loops
            .iter()
            .map(|l| l.segments.iter().map(SegmentSpec::to_segment).collect())
            .collect();
        let mesh = build_mesh(&loops, self.mesh.alpha1, self.mesh.alpha3)?;
        let segments = self.boundary.iter().map(BoundarySpec::to_segment_bc).collect::<Result<Vec<_>>>()?;
        let mut points = Vec::new();
        for pc in &self.point_constraints {
            if pc.u1.is_none() && pc.u2.is_none() {
                return Err(BinnError::Specification(format!(
                    "point constraint on '{}' prescribes nothing",
                    pc.segment
                )));
            }
            for (d, v) in [pc.u1, pc.u2].into_iter().enumerate() {
                if let Some(value) = v {
                    points.push(PointConstraint {
                        segment: pc.segment.clone(),
                        point: Vec2::from(pc.at),
                        direction: d,
                        value,
                    });
                }
            }
        }
        let bcs = bind_bcs(&mesh, &segments, &points)?;
        self.train.validate()?;
        if self.network.hidden.is_empty() || self.network.hidden.contains(&0) {
            return Err(BinnError::Config("network needs at least one non-empty hidden layer".into()));
        }
        if let Some(s) = self.network.output_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(BinnError::Config("network output_scale must be positive".into()));
            }
        }
        if self.grid.nx < 2 || self.grid.ny < 2 {
            return Err(BinnError::Config("grid needs at least 2 x 2 points".into()));
        }
        Ok(Setup {
            name: self.name.clone(),
            mesh,
            material,
            quadrature: self.quadrature,
            bcs,
            network: self.network.clone(),
            train: self.train.clone(),
            grid: self.grid.clone(),
            benchmark: self.benchmark,
        })
    }

    /// Every problem found without solving, empty when the spec is usable.
    pub fn diagnostics(&self) -> Vec<String> {
        match self.build() {
            Err(e) => vec![e.to_string()],
            Ok(setup) => {
                let mut out = Vec::new();
                if let Err(e) = setup.bcs.check_pinned() {
                    out.push(e.to_string());
                }
                let widths = setup.widths();
                if let Err(e) = Network::zeros(&widths, setup.network.activation, setup.network.output) {
                    out.push(e.to_string());
                }
                out
            }
        }
    }
}

/// Read and check a spec file; the list is empty when it is usable.
pub fn validate_path(path: impl AsRef<Path>) -> Vec<String> {
    match ProblemSpec::from_path(path) {
        Ok(spec) => spec.diagnostics(),
        Err(e) => vec![e.to_string()],
    }
}

impl Setup {
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![2];
        w.extend(&self.network.hidden);
        w.push(self.network.output.n_outputs());
        w
    }

    /// Size of a unit network output: the configured value, else the larger
    /// of the largest prescribed displacement and the displacement scale
    /// `|t| D / E` of the largest prescribed traction.
    pub fn output_scale(&self) -> f64 {
        if let Some(s) = self.network.output_scale {
            return s;
        }
        let (mut u, mut t) = (0.0f64, 0.0f64);
        for (kind, v) in self.bcs.kinds.iter().zip(&self.bcs.values) {
            match kind {
                crate::solver::BcKind::Dirichlet => u = u.max(v.abs()),
                crate::solver::BcKind::Neumann => t = t.max(v.abs()),
            }
        }
        let s = u.max(t * self.mesh.diameter() / self.material.youngs_modulus);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Freshly initialized networks; per-segment networks use seeds `seed`, `seed + 1`, ...
    pub fn init_model(&self, seed: u64) -> Result<BinnModel> {
        let (lo, hi) = self.mesh.bounding_box();
        let map = InputMap::from_box(lo, hi);
        let widths = self.widths();
        let s = self.output_scale();
        let n_out = self.network.output.n_outputs();
        // Traction outputs are scaled to the traction matching a displacement of size s.
        let t_scale = s * self.material.youngs_modulus / self.mesh.diameter();
        let scales: Vec<f64> = (0..n_out).map(|k| if k < 2 { s } else { t_scale }).collect();
        let make = |k: u64| -> Result<Network> {
            Ok(Network::init(&widths, self.network.activation, self.network.output, seed.wrapping_add(k))?
                .with_input_map(map)
                .with_output_scale(&scales))
        };
        if self.network.per_segment {
            let nets = (0..self.mesh.segment_ids.len() as u64).map(make).collect::<Result<Vec<_>>>()?;
            BinnModel::per_segment(nets, &self.mesh)
        } else {
            Ok(BinnModel::single(make(0)?, self.mesh.n_nodes()))
        }
    }
}
