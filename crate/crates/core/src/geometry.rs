//! Bounded planar Voronoi tessellations.
//!
//! The Delaunay triangulation is built by incremental Bowyer–Watson insertion
//! inside a large super-triangle. Each cell is the bounding box clipped
//! (Sutherland–Hodgman) by the bisector half-planes of the site's Delaunay
//! neighbours. Sites are inserted and neighbours clipped in lexicographic
//! coordinate order, so the output depends only on the set of sites and is
//! equivariant under reordering.

use std::collections::HashSet;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Minimum separation between two sites.
pub const DUPLICATE_TOLERANCE: f64 = 1e-9;
/// Relative size below which the fast in-circle determinant is recomputed
/// exactly.
const INCIRCLE_FILTER: f64 = 1e-12;
/// Distance of the super-triangle vertices from the box, in box diameters.
const SUPER_SCALE: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        let b = Self { xmin, ymin, xmax, ymax };
        if ![xmin, ymin, xmax, ymax].iter().all(|v| v.is_finite()) || xmin >= xmax || ymin >= ymax {
            return Err(Error::Geometry(format!(
                "invalid bounding box ({xmin}, {ymin}, {xmax}, {ymax})"
            )));
        }
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.xmin..=self.xmax).contains(&p[0]) && (self.ymin..=self.ymax).contains(&p[1])
    }

    /// Corners, counterclockwise from `(xmin, ymin)`.
    pub fn corners(&self) -> Vec<Point> {
        vec![
            [self.xmin, self.ymin],
            [self.xmax, self.ymin],
            [self.xmax, self.ymax],
            [self.xmin, self.ymax],
        ]
    }
}

/// Extent of `sites` padded by 5% per side; a zero extent is padded by 0.5.
pub fn default_bbox(sites: &[Point]) -> Result<BoundingBox> {
    if sites.is_empty() {
        return Err(Error::Geometry("no sites".into()));
    }
    let fold = |k: usize| {
        sites.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[k]), hi.max(p[k]))
        })
    };
    let pad = |(lo, hi): (f64, f64)| {
        let p = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
        (lo - p, hi + p)
    };
    let (xmin, xmax) = pad(fold(0));
    let (ymin, ymax) = pad(fold(1));
    BoundingBox::new(xmin, ymin, xmax, ymax)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiDiagram {
    pub sites: Vec<Point>,
    /// Convex cell of each site, counterclockwise.
    pub cells: Vec<Vec<Point>>,
    pub bounding_box: BoundingBox,
}

impl VoronoiDiagram {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn locate(&self, p: Point) -> usize {
        locate(&self.sites, p)
    }
}

/// Nearest site by Euclidean distance, ties to the smaller index.
pub fn locate(sites: &[Point], p: Point) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, s) in sites.iter().enumerate() {
        let d = (s[0] - p[0]).powi(2) + (s[1] - p[1]).powi(2);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    twice / 2.0
}

/// Shoelace area of each cell.
pub fn cell_areas(diagram: &VoronoiDiagram) -> Vec<f64> {
    diagram.cells.iter().map(|c| polygon_area(c)).collect()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// `v = m * 2^e` exactly.
fn decompose(v: f64) -> (i64, i32) {
    if v == 0.0 {
        return (0, i32::MAX);
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1 << 52) - 1)) as i64;
    let (m, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), exp - 1075)
    };
    (sign * m, e)
}

fn exact_incircle(pts: [Point; 4]) -> std::cmp::Ordering {
    let parts: Vec<(i64, i32)> = pts.iter().flat_map(|p| [decompose(p[0]), decompose(p[1])]).collect();
    let emin = parts.iter().map(|p| p.1).min().unwrap_or(0);
    let ints: Vec<BigInt> = parts
        .iter()
        .map(|&(m, e)| {
            if m == 0 {
                BigInt::from(0)
            } else {
                BigInt::from(m) << (e - emin) as usize
            }
        })
        .collect();
    let (dx, dy) = (&ints[6], &ints[7]);
    let rel = |k: usize| (&ints[2 * k] - dx, &ints[2 * k + 1] - dy);
    let (ax, ay) = rel(0);
    let (bx, by) = rel(1);
    let (cx, cy) = rel(2);
    let la = &ax * &ax + &ay * &ay;
    let lb = &bx * &bx + &by * &by;
    let lc = &cx * &cx + &cy * &cy;
    let det = la * (&bx * &cy - &cx * &by) - lb * (&ax * &cy - &cx * &ay) + lc * (&ax * &by - &bx * &ay);
    det.sign().cmp(&num_bigint::Sign::NoSign)
}

/// Whether `d` lies strictly inside the circumcircle of the counterclockwise
/// triangle `a b c`.
fn in_circle(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let (la, lb, lc) = (adx * adx + ady * ady, bdx * bdx + bdy * bdy, cdx * cdx + cdy * cdy);
    let (m1, m2, m3) = (bdx * cdy - cdx * bdy, adx * cdy - cdx * ady, adx * bdy - bdx * ady);
    let det = la * m1 - lb * m2 + lc * m3;
    let permanent = la * (bdx * cdy).abs().max((cdx * bdy).abs())
        + lb * (adx * cdy).abs().max((cdx * ady).abs())
        + lc * (adx * bdy).abs().max((bdx * ady).abs());
    if det.abs() > INCIRCLE_FILTER * permanent {
        det > 0.0
    } else {
        exact_incircle([a, b, c, d]) == std::cmp::Ordering::Greater
    }
}

/// Delaunay edges between real sites (indices into `points`).
fn delaunay_neighbours(points: &[Point], bbox: &BoundingBox) -> Vec<Vec<usize>> {
    let n = points.len();
    let (cx, cy) = ((bbox.xmin + bbox.xmax) / 2.0, (bbox.ymin + bbox.ymax) / 2.0);
    let r = SUPER_SCALE * bbox.width().hypot(bbox.height());
    let mut verts: Vec<Point> = points.to_vec();
    for k in 0..3 {
        let t = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::FRAC_PI_3;
        verts.push([cx + 2.0 * r * t.cos(), cy + 2.0 * r * t.sin()]);
    }
    let mut tris: Vec<[usize; 3]> = vec![[n, n + 1, n + 2]];

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    for &p in &order {
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = tris
            .into_iter()
            .partition(|t| in_circle(verts[t[0]], verts[t[1]], verts[t[2]], verts[p]));
        let directed: HashSet<(usize, usize)> = bad
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .collect();
        tris = keep;
        // Boundary edges in the order they were found keep the result
        // independent of hash iteration order.
        for t in &bad {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if !directed.contains(&(b, a)) {
                    tris.push([a, b, p]);
                }
            }
        }
    }

    let mut nbrs = vec![Vec::new(); n];
    for t in &tris {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            if a < n && b < n {
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
        }
    }
    for list in &mut nbrs {
        list.sort_by(|&a, &b| {
            points[a][0]
                .total_cmp(&points[b][0])
                .then(points[a][1].total_cmp(&points[b][1]))
        });
        list.dedup();
    }
    nbrs
}

/// Keep the part of `poly` where `a·p <= c`.
fn clip(poly: &[Point], a: Point, c: f64) -> Vec<Point> {
    let side = |p: Point| a[0] * p[0] + a[1] * p[1] - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sp, sq) = (side(p), side(q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

fn drop_repeats(poly: Vec<Point>, tol: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(poly.len());
    for p in poly {
        if out.last().is_none_or(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > tol) {
            out.push(p);
        }
    }
    while out.len() > 1 {
        let (f, l) = (out[0], out[out.len() - 1]);
        if (f[0] - l[0]).hypot(f[1] - l[1]) > tol {
            break;
        }
        out.pop();
    }
    out
}

/// Voronoi diagram of `sites` clipped to `bbox`.
pub fn build_voronoi(sites: &[Point], bbox: BoundingBox) -> Result<VoronoiDiagram> {
    if sites.is_empty() {
        return Err(Error::Geometry("no sites".into()));
    }
    let bbox = BoundingBox::new(bbox.xmin, bbox.ymin, bbox.xmax, bbox.ymax)?;
    for (i, s) in sites.iter().enumerate() {
        if !s[0].is_finite() || !s[1].is_finite() {
            return Err(Error::Geometry(format!("site {i} is not finite")));
        }
        if !bbox.contains(*s) {
            return Err(Error::Geometry(format!(
                "site {i} ({}, {}) lies outside the bounding box",
                s[0], s[1]
            )));
        }
    }
    let mut by_x: Vec<usize> = (0..sites.len()).collect();
    by_x.sort_by(|&a, &b| sites[a][0].total_cmp(&sites[b][0]));
    for (k, &i) in by_x.iter().enumerate() {
        for &j in &by_x[k + 1..] {
            if sites[j][0] - sites[i][0] > DUPLICATE_TOLERANCE {
                break;
            }
            if (sites[j][0] - sites[i][0]).hypot(sites[j][1] - sites[i][1]) <= DUPLICATE_TOLERANCE {
                let (a, b) = (i.min(j), i.max(j));
                return Err(Error::Geometry(format!("sites {a} and {b} coincide")));
            }
        }
    }

    let nbrs = delaunay_neighbours(sites, &bbox);
    let tol = 1e-12 * bbox.width().hypot(bbox.height());
    let cells = sites
        .iter()
        .zip(&nbrs)
        .map(|(s, list)| {
            let mut poly = bbox.corners();
            for &j in list {
                let t = sites[j];
                let a = [2.0 * (t[0] - s[0]), 2.0 * (t[1] - s[1])];
                let c = (t[0] * t[0] + t[1] * t[1]) - (s[0] * s[0] + s[1] * s[1]);
                poly = clip(&poly, a, c);
            }
            drop_repeats(poly, tol)
        })
        .collect();
    Ok(VoronoiDiagram {
        sites: sites.to_vec(),
        cells,
        bounding_box: bbox,
    })
}

/// Whether `p` lies in the convex counterclockwise polygon, allowing `tol`
/// of slack on every edge.
pub fn polygon_contains(poly: &[Point], p: Point, tol: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        len == 0.0 || orient(a, b, p) / len >= -tol
    })
}
