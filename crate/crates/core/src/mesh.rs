//! Boundary discretization with quadratic geometry and discontinuous
//! quadratic physical interpolation.
//!
//! Each element carries three geometry nodes (local coordinates -1, 0, 1)
//! and three collocation nodes at `alpha1`, `0`, `alpha3`, all strictly
//! inside the element. Outer loops run counter-clockwise and hole loops
//! clockwise, so the outward normal is always the unit tangent rotated by
//! -90 degrees.

use std::f64::consts::PI;

use crate::quadrature::gauss_rule;
use crate::{BinnError, Result, Vec2};

pub const DEFAULT_ALPHA1: f64 = -0.8;
pub const DEFAULT_ALPHA3: f64 = 0.8;

/// Closure tolerance for consecutive segment endpoints, relative to the
/// loop diameter.
const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum SegmentShape {
    Line {
        start: Vec2,
        end: Vec2,
    },
    /// Angles in radians; the arc runs from `start_angle` to `end_angle`,
    /// counter-clockwise when `end_angle > start_angle`.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySegment {
    pub id: String,
    pub shape: SegmentShape,
    pub n_elements: usize,
}

impl GeometrySegment {
    pub fn line(id: impl Into<String>, start: Vec2, end: Vec2, n_elements: usize) -> Self {
        Self {
            id: id.into(),
            shape: SegmentShape::Line { start, end },
            n_elements,
        }
    }

    pub fn arc(
        id: impl Into<String>,
        center: Vec2,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
        n_elements: usize,
    ) -> Self {
        Self {
            id: id.into(),
            shape: SegmentShape::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            },
            n_elements,
        }
    }

    /// Point at segment parameter `s` in [0, 1].
    pub fn point_at(&self, s: f64) -> Vec2 {
        match self.shape {
            SegmentShape::Line { start, end } => start + (end - start) * s,
            SegmentShape::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                let theta = start_angle + (end_angle - start_angle) * s;
                center + Vec2::new(theta.cos(), theta.sin()) * radius
            }
        }
    }

    pub fn start(&self) -> Vec2 {
        self.point_at(0.0)
    }

    pub fn end(&self) -> Vec2 {
        self.point_at(1.0)
    }

    fn validate(&self) -> Result<()> {
        if self.n_elements == 0 {
            return Err(BinnError::Geometry(format!(
                "segment '{}' has zero elements",
                self.id
            )));
        }
        match self.shape {
            SegmentShape::Line { start, end } => {
                if (end - start).norm() == 0.0 {
                    return Err(BinnError::DegenerateGeometry(format!(
                        "segment '{}' has zero length",
                        self.id
                    )));
                }
            }
            SegmentShape::Arc {
                radius,
                start_angle,
                end_angle,
                ..
            } => {
                if !(radius > 0.0) {
                    return Err(BinnError::DegenerateGeometry(format!(
                        "arc '{}' has non-positive radius",
                        self.id
                    )));
                }
                if end_angle == start_angle {
                    return Err(BinnError::Geometry(format!(
                        "arc '{}' has an empty angle range",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A rectangle `[x0, x1] x [y0, y1]` traversed counter-clockwise starting at
/// the lower-left corner: bottom, right, top, left.
pub fn rectangle_loop(
    lower: Vec2,
    upper: Vec2,
    ids: [&str; 4],
    counts: [usize; 4],
) -> Vec<GeometrySegment> {
    let c = [
        lower,
        Vec2::new(upper.x, lower.y),
        upper,
        Vec2::new(lower.x, upper.y),
    ];
    (0..4)
        .map(|k| GeometrySegment::line(ids[k], c[k], c[(k + 1) % 4], counts[k]))
        .collect()
}

/// Full circle as a single arc segment. Holes run clockwise.
pub fn circle_loop(id: &str, center: Vec2, radius: f64, n_elements: usize, hole: bool) -> Vec<GeometrySegment> {
    let end = if hole { -2.0 * PI } else { 2.0 * PI };
    vec![GeometrySegment::arc(id, center, radius, 0.0, end, n_elements)]
}

/// Quadratic Lagrange functions on the geometry nodes -1, 0, 1.
#[inline]
pub fn shape_geom(xi: f64) -> [f64; 3] {
    [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)]
}

#[inline]
pub fn shape_geom_deriv(xi: f64) -> [f64; 3] {
    [xi - 0.5, -2.0 * xi, xi + 0.5]
}

/// Discontinuous quadratic interpolation on the nodes `alpha1`, 0, `alpha3`.
pub fn shape_phys(xi: f64, alpha1: f64, alpha3: f64) -> Result<[f64; 3]> {
    Layout::new(alpha1, alpha3).map(|l| l.shape(xi))
}

/// Local coordinates of the three collocation nodes of every element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layout {
    pub alpha1: f64,
    pub alpha3: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            alpha1: DEFAULT_ALPHA1,
            alpha3: DEFAULT_ALPHA3,
        }
    }
}

impl Layout {
    pub fn new(alpha1: f64, alpha3: f64) -> Result<Self> {
        if !(alpha1 > -1.0 && alpha1 < 0.0) || !(alpha3 > 0.0 && alpha3 < 1.0) {
            return Err(BinnError::Config(format!(
                "collocation coordinates must satisfy -1 < alpha1 < 0 < alpha3 < 1, got ({alpha1}, {alpha3})"
            )));
        }
        Ok(Self { alpha1, alpha3 })
    }

    pub fn local_coords(&self) -> [f64; 3] {
        [self.alpha1, 0.0, self.alpha3]
    }

    #[inline]
    pub fn shape(&self, xi: f64) -> [f64; 3] {
        let (a1, a3) = (self.alpha1, self.alpha3);
        [
            xi * (xi - a3) / (a1 * (a1 - a3)),
            (xi - a1) * (xi - a3) / (a1 * a3),
            xi * (xi - a1) / (a3 * (a3 - a1)),
        ]
    }
}

/// Geometry evaluated at one local coordinate of an element.
#[derive(Clone, Copy, Debug)]
pub struct ElementPoint {
    pub position: Vec2,
    /// Unit tangent in the direction of increasing local coordinate.
    pub tangent: Vec2,
    pub normal: Vec2,
    pub jacobian: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryElement {
    pub geom: [Vec2; 3],
    pub loop_index: usize,
    pub segment: usize,
    pub hole: bool,
    pub length: f64,
}

impl BoundaryElement {
    pub fn new(geom: [Vec2; 3], loop_index: usize, segment: usize) -> Self {
        let mut e = Self {
            geom,
            loop_index,
            segment,
            hole: false,
            length: 0.0,
        };
        let rule = gauss_rule(16).expect("order 16 is valid");
        e.length = rule.integrate(-1.0, 1.0, |xi| e.eval(xi).jacobian);
        e
    }

    /// Position, tangent, normal and Jacobian without the degeneracy check.
    #[inline]
    pub fn eval(&self, xi: f64) -> ElementPoint {
        let n = shape_geom(xi);
        let dn = shape_geom_deriv(xi);
        let position = self.geom[0] * n[0] + self.geom[1] * n[1] + self.geom[2] * n[2];
        let d = self.geom[0] * dn[0] + self.geom[1] * dn[1] + self.geom[2] * dn[2];
        let jacobian = d.norm();
        let tangent = d / jacobian;
        ElementPoint {
            position,
            tangent,
            normal: Vec2::new(tangent.y, -tangent.x),
            jacobian,
        }
    }

    #[inline]
    pub fn position(&self, xi: f64) -> Vec2 {
        let n = shape_geom(xi);
        self.geom[0] * n[0] + self.geom[1] * n[1] + self.geom[2] * n[2]
    }
}

/// Geometry of `element` at `xi`, rejecting vanishing Jacobians.
pub fn geometry_at(element: &BoundaryElement, xi: f64) -> Result<ElementPoint> {
    let p = element.eval(xi);
    if !(p.jacobian >= 1e-14 * element.length) {
        return Err(BinnError::DegenerateGeometry(format!(
            "Jacobian {:e} at xi = {xi} is below 1e-14 x element length",
            p.jacobian
        )));
    }
    Ok(p)
}

#[derive(Clone, Debug)]
pub struct CollocationNode {
    pub index: usize,
    pub element: usize,
    /// 0, 1 or 2: position within the element.
    pub local: usize,
    pub xi: f64,
    pub position: Vec2,
    pub normal: Vec2,
    pub jacobian: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    pub layout: Layout,
    pub elements: Vec<BoundaryElement>,
    pub nodes: Vec<CollocationNode>,
    /// Element indices per loop, in traversal order.
    pub loops: Vec<Vec<usize>>,
    pub segment_ids: Vec<String>,
    /// Element index range per segment.
    pub segment_elements: Vec<std::ops::Range<usize>>,
}

/// Subdivide every segment into quadratic elements and lay out the
/// collocation nodes. Node numbering is element-major, then local order.
pub fn build_mesh(loops: &[Vec<GeometrySegment>], alpha1: f64, alpha3: f64) -> Result<BoundaryMesh> {
    let layout = Layout::new(alpha1, alpha3)?;
    if loops.is_empty() {
        return Err(BinnError::Geometry("no boundary loops given".into()));
    }

    let mut elements = Vec::new();
    let mut mesh_loops = Vec::with_capacity(loops.len());
    let mut segment_ids: Vec<String> = Vec::new();
    let mut segment_elements = Vec::new();

    for (li, segs) in loops.iter().enumerate() {
        if segs.is_empty() {
            return Err(BinnError::Geometry(format!("loop {li} has no segments")));
        }
        for s in segs {
            s.validate()?;
            if segment_ids.iter().any(|id| id == &s.id) {
                return Err(BinnError::Geometry(format!("duplicate segment id '{}'", s.id)));
            }
        }
        check_closed(li, segs)?;

        let mut loop_elems = Vec::new();
        for s in segs {
            let seg_index = segment_ids.len();
            segment_ids.push(s.id.clone());
            let first = elements.len();
            let n = s.n_elements as f64;
            for j in 0..s.n_elements {
                let j = j as f64;
                let geom = [
                    s.point_at(j / n),
                    s.point_at((j + 0.5) / n),
                    s.point_at((j + 1.0) / n),
                ];
                if (geom[0] - geom[1]).norm() == 0.0
                    || (geom[1] - geom[2]).norm() == 0.0
                    || (geom[0] - geom[2]).norm() == 0.0
                {
                    return Err(BinnError::DegenerateGeometry(format!(
                        "zero-length element on segment '{}'",
                        s.id
                    )));
                }
                let e = BoundaryElement::new(geom, li, seg_index);
                if !(e.length > 0.0) {
                    return Err(BinnError::DegenerateGeometry(format!(
                        "zero-length element on segment '{}'",
                        s.id
                    )));
                }
                loop_elems.push(elements.len());
                elements.push(e);
            }
            segment_elements.push(first..elements.len());
        }
        mesh_loops.push(loop_elems);
    }

    let mut mesh = BoundaryMesh {
        layout,
        elements,
        nodes: Vec::new(),
        loops: mesh_loops,
        segment_ids,
        segment_elements,
    };
    mesh.check_orientation()?;

    let xis = layout.local_coords();
    let mut nodes = Vec::with_capacity(3 * mesh.elements.len());
    for (ei, e) in mesh.elements.iter().enumerate() {
        for (k, &xi) in xis.iter().enumerate() {
            let g = geometry_at(e, xi)?;
            nodes.push(CollocationNode {
                index: nodes.len(),
                element: ei,
                local: k,
                xi,
                position: g.position,
                normal: g.normal,
                jacobian: g.jacobian,
            });
        }
    }
    mesh.nodes = nodes;
    Ok(mesh)
}

fn check_closed(li: usize, segs: &[GeometrySegment]) -> Result<()> {
    let mut pts: Vec<Vec2> = Vec::new();
    for s in segs {
        for k in 0..=8 {
            pts.push(s.point_at(k as f64 / 8.0));
        }
    }
    let diameter = diameter_of(&pts);
    let tol = CLOSURE_TOL * diameter.max(f64::MIN_POSITIVE);
    for (k, s) in segs.iter().enumerate() {
        let next = &segs[(k + 1) % segs.len()];
        let gap = (s.end() - next.start()).norm();
        if gap > tol {
            return Err(BinnError::Geometry(format!(
                "loop {li} is open: segment '{}' ends {gap:e} away from the start of '{}'",
                s.id, next.id
            )));
        }
    }
    Ok(())
}

fn diameter_of(pts: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

impl BoundaryMesh {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Total number of collocation nodes, `3 * n_elements`.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn segment_index(&self, id: &str) -> Option<usize> {
        self.segment_ids.iter().position(|s| s == id)
    }

    pub fn node_segment(&self, node: usize) -> usize {
        self.elements[self.nodes[node].element].segment
    }

    pub fn nodes_on_segment(&self, segment: usize) -> impl Iterator<Item = &CollocationNode> + '_ {
        let r = self.segment_elements[segment].clone();
        self.nodes[3 * r.start..3 * r.end].iter()
    }

    /// Nearest collocation node to `point` among the nodes of `segment`;
    /// ties go to the lowest node index.
    pub fn nearest_node_on_segment(&self, segment: usize, point: Vec2) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for n in self.nodes_on_segment(segment) {
            let d = (n.position - point).norm();
            if d < best.0 * (1.0 - 1e-12) {
                best = (d, n.index);
            }
        }
        best.1
    }

    /// Every loop's elements chain end-to-start and wrap around.
    pub fn is_closed(&self) -> bool {
        let diameter = self.diameter();
        self.loops.iter().all(|l| {
            !l.is_empty()
                && (0..l.len()).all(|k| {
                    let a = &self.elements[l[k]];
                    let b = &self.elements[l[(k + 1) % l.len()]];
                    (a.geom[2] - b.geom[0]).norm() <= CLOSURE_TOL * diameter
                })
        })
    }

    /// Signed area enclosed by one discretized loop (positive when
    /// counter-clockwise).
    pub fn signed_area(&self, loop_index: usize) -> f64 {
        let rule = gauss_rule(4).expect("valid order");
        self.loops[loop_index]
            .iter()
            .map(|&ei| {
                let e = &self.elements[ei];
                rule.integrate(-1.0, 1.0, |xi| {
                    let p = e.eval(xi);
                    let d = p.tangent * p.jacobian;
                    0.5 * (p.position.x * d.y - p.position.y * d.x)
                })
            })
            .sum()
    }

    /// Net area of the domain (outer loops minus holes).
    pub fn area(&self) -> f64 {
        (0..self.loops.len()).map(|l| self.signed_area(l)).sum()
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for e in &self.elements {
            for k in 0..=4 {
                let p = e.position(-1.0 + 0.5 * k as f64);
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Polyline approximation of one loop, `per_element` points per element.
    fn loop_polyline(&self, loop_index: usize, per_element: usize) -> Vec<Vec2> {
        let mut pts = Vec::new();
        for &ei in &self.loops[loop_index] {
            let e = &self.elements[ei];
            for k in 0..per_element {
                pts.push(e.position(-1.0 + 2.0 * k as f64 / per_element as f64));
            }
        }
        pts
    }

    fn check_orientation(&mut self) -> Result<()> {
        let polys: Vec<Vec<Vec2>> = (0..self.loops.len())
            .map(|l| self.loop_polyline(l, 8))
            .collect();
        for l in 0..self.loops.len() {
            let probe = polys[l][0];
            let depth = polys
                .iter()
                .enumerate()
                .filter(|(m, poly)| *m != l && winding_number(poly, probe) != 0)
                .count();
            let hole = depth % 2 == 1;
            let area = self.signed_area(l);
            if hole && area > 0.0 {
                return Err(BinnError::Geometry(format!(
                    "loop {l} is a hole and must run clockwise"
                )));
            }
            if !hole && area < 0.0 {
                return Err(BinnError::Geometry(format!(
                    "loop {l} is an outer boundary and must run counter-clockwise"
                )));
            }
            for &ei in &self.loops[l] {
                self.elements[ei].hole = hole;
            }
        }
        Ok(())
    }

    /// Winding-number test against the discretized boundary.
    pub fn contains(&self, point: Vec2) -> bool {
        let total: i32 = (0..self.loops.len())
            .map(|l| winding_number(&self.loop_polyline(l, 16), point))
            .sum();
        total != 0
    }

    /// Approximate distance from `point` to the discretized boundary.
    pub fn distance_to_boundary(&self, point: Vec2) -> f64 {
        self.elements
            .iter()
            .map(|e| distance_to_element(e, point))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Distance from `point` to a quadratic element: coarse sampling followed by
/// golden-section refinement around the best sample.
pub fn distance_to_element(e: &BoundaryElement, point: Vec2) -> f64 {
    const SAMPLES: usize = 16;
    let f = |xi: f64| (e.position(xi) - point).norm();
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=SAMPLES {
        let xi = -1.0 + 2.0 * k as f64 / SAMPLES as f64;
        let d = f(xi);
        if d < best.0 {
            best = (d, xi);
        }
    }
    let h = 2.0 / SAMPLES as f64;
    let (mut a, mut b) = ((best.1 - h).max(-1.0), (best.1 + h).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.min(f(0.5 * (a + b)))
}

fn winding_number(poly: &[Vec2], p: Vec2) -> i32 {
    let mut wn = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && cross > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}
