//! Planar geometric primitives: polygons are CCW vertex loops of `[f64; 2]`.
//!
//! Clipping follows the Sutherland–Hodgman scheme: the subject polygon may be
//! arbitrary, each clip step is a half-plane, so intersections with convex
//! regions are exact up to roundoff.

use crate::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Signed area of a polygon loop; positive for CCW orientation.
pub fn polygon_signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += cross(poly[i], poly[j]);
    }
    0.5 * s
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    polygon_signed_area(poly).abs()
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(poly: &[Point]) -> Point {
    let n = poly.len();
    let mut a = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let w = cross(poly[i], poly[j]);
        a += w;
        cx += (poly[i][0] + poly[j][0]) * w;
        cy += (poly[i][1] + poly[j][1]) * w;
    }
    if a.abs() < 1e-300 {
        // Degenerate loop: fall back to the vertex mean.
        let inv = 1.0 / n as f64;
        let mut m = [0.0, 0.0];
        for p in poly {
            m[0] += p[0] * inv;
            m[1] += p[1] * inv;
        }
        return m;
    }
    [cx / (3.0 * a), cy / (3.0 * a)]
}

/// Maximum pairwise vertex distance.
pub fn polygon_diameter(poly: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..poly.len() {
        for j in (i + 1)..poly.len() {
            d = d.max(dist(poly[i], poly[j]));
        }
    }
    d
}

/// Axis-aligned bounding box `(min, max)`.
pub fn polygon_bbox(poly: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY, f64::INFINITY];
    let mut hi = [f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in poly {
        lo[0] = lo[0].min(p[0]);
        lo[1] = lo[1].min(p[1]);
        hi[0] = hi[0].max(p[0]);
        hi[1] = hi[1].max(p[1]);
    }
    (lo, hi)
}

/// Clip a polygon against the half-plane `n·x <= c`.
pub fn clip_halfplane(poly: &[Point], n: Point, c: f64) -> Vec<Point> {
    let m = poly.len();
    if m == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(m + 2);
    for i in 0..m {
        let s = poly[i];
        let e = poly[(i + 1) % m];
        let ds = dot(n, s) - c;
        let de = dot(n, e) - c;
        let s_in = ds <= 0.0;
        let e_in = de <= 0.0;
        match (s_in, e_in) {
            (true, true) => out.push(e),
            (true, false) | (false, true) => {
                let denom = ds - de;
                if denom.abs() > 1e-300 {
                    let t = ds / denom;
                    out.push([s[0] + (e[0] - s[0]) * t, s[1] + (e[1] - s[1]) * t]);
                }
                if e_in {
                    out.push(e);
                }
            }
            (false, false) => {}
        }
    }
    out
}

/// Whether a CCW loop is convex (tolerates collinear vertices).
pub fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let scale = polygon_diameter(poly).max(1e-300);
    let tol = -1e-12 * scale * scale;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        if cross(sub(b, a), sub(c, b)) < tol {
            return false;
        }
    }
    true
}

/// Intersection of two convex CCW polygons.
///
/// Returns `None` when the overlap measure is below `1e-12 * min(|A|, |B|)`.
pub fn convex_intersection(a: &[Point], b: &[Point]) -> Result<Option<Vec<Point>>> {
    if !is_convex(a) || !is_convex(b) {
        return Err(Error::Geometry(
            "convex_intersection requires convex CCW polygons".into(),
    ));
    }
    let mut cur = a.to_vec();
    let m = b.len();
    for i in 0..m {
        let p = b[i];
        let q = b[(i + 1) % m];
        // inside of edge p->q is the left side: n·x <= n·p with n the outward normal
        let e = sub(q, p);
        let n = [e[1], -e[0]];
        cur = clip_halfplane(&cur, n, dot(n, p));
        if cur.len() < 3 {
            return Ok(None);
        }
    }
    let cur = dedupe_ring(&cur, 1e-14 * (polygon_diameter(a) + polygon_diameter(b)));
    if cur.len() < 3 {
        return Ok(None);
    }
    let area = polygon_area(&cur);
    if area < 1e-12 * polygon_area(a).min(polygon_area(b)) {
        return Ok(None);
    }
    Ok(Some(cur))
}

/// Remove consecutive near-duplicate vertices from a loop.
pub fn dedupe_ring(poly: &[Point], tol: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(poly.len());
    for &p in poly {
        if out.last().map_or(true, |&q| dist(p, q) > tol) {
            out.push(p);
        }
    }
    while out.len() > 1 && dist(out[0], *out.last().unwrap()) <= tol {
        out.pop();
    }
    out
}

/// Crossing-number point-in-polygon test; works for non-convex simple loops.
pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from a point to the boundary of a polygon.
pub fn dist_to_boundary(poly: &[Point], p: Point) -> f64 {
    let n = poly.len();
    let mut d = f64::INFINITY;
    for i in 0..n {
        d = d.min(dist_to_segment(poly[i], poly[(i + 1) % n], p));
    }
    d
}

fn dist_to_segment(a: Point, b: Point, p: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 < 1e-300 {
        return dist(a, p);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Containment with tolerance: inside, or within `tol` of the boundary.
pub fn contains_with_slack(poly: &[Point], p: Point, tol: f64) -> bool {
    point_in_polygon(poly, p) || dist_to_boundary(poly, p) <= tol
}

/// Merge two CCW polygons that share (exactly) one common edge, traversed in
/// opposite directions. Returns `None` when no matching edge pair is found.
pub fn merge_on_shared_edge(p: &[Point], q: &[Point], tol: f64) -> Option<Vec<Point>> {
    let np = p.len();
    let nq = q.len();
    for i in 0..np {
        let a = p[i];
        let b = p[(i + 1) % np];
        for j in 0..nq {
            if dist(q[j], b) <= tol && dist(q[(j + 1) % nq], a) <= tol {
                // p: ... a b ...    q: ... b a ...  (edge b->a at position j)
                let mut merged = Vec::with_capacity(np + nq - 2);
                for k in 0..=i {
                    merged.push(p[k]);
                }
                // walk q the long way from a (at j+1) back to b (at j)
                for k in 2..nq {
                    merged.push(q[(j + k) % nq]);
                }
                for k in (i + 1)..np {
                    merged.push(p[k]);
                }
                let merged = dedupe_ring(&merged, tol);
                if merged.len() >= 3 {
                    return Some(merged);
                }
            }
        }
    }
    None
}

/// Andrew's monotone chain convex hull, CCW output.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| dist(*a, *b) == 0.0);
    let n = pts.len();
    if n < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2
            && cross(
                sub(hull[hull.len() - 1], hull[hull.len() - 2]),
                sub(p, hull[hull.len() - 1]),
            ) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len
            && cross(
                sub(hull[hull.len() - 1], hull[hull.len() - 2]),
                sub(p, hull[hull.len() - 1]),
            ) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}
