use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{signed_area, Point2};
use crate::error::{Error, Result};

/// Polygonal domain: one counter-clockwise outer ring plus clockwise holes.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPolygon {
    outer: Vec<Point2>,
    holes: Vec<Vec<Point2>>,
}

#[derive(Serialize, Deserialize)]
struct DomainFile {
    outer: Vec<Point2>,
    #[serde(default)]
    holes: Vec<Vec<Point2>>,
}

impl DomainPolygon {
    /// Validates and normalizes the rings. A repeated closing point is
    /// dropped; ring orientation must already follow the outer-CCW /
    /// hole-CW convention.
    pub fn new(outer: Vec<Point2>, holes: Vec<Vec<Point2>>) -> Result<Self> {
        let outer = normalize_ring(outer, "outer ring")?;
        if signed_area(&outer) <= 0.0 {
            return Err(Error::InvalidDomain("outer ring must be counter-clockwise".into()));
        }
        let mut normalized = Vec::with_capacity(holes.len());
        for (h, ring) in holes.into_iter().enumerate() {
            let ring = normalize_ring(ring, &format!("hole {h}"))?;
            if signed_area(&ring) >= 0.0 {
                return Err(Error::InvalidDomain(format!("hole {h} must be clockwise")));
            }
            if !ring.iter().all(|&p| point_in_ring(&outer, p)) {
                return Err(Error::InvalidDomain(format!("hole {h} is not enclosed by the outer ring")));
            }
            normalized.push(ring);
        }
        Ok(Self {
            outer,
            holes: normalized,
        })
    }

    /// Axis-aligned rectangle.
    pub fn rectangle(min: Point2, max: Point2) -> Result<Self> {
        Self::new(
            vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)],
            Vec::new(),
        )
    }

    pub fn outer(&self) -> &[Point2] {
        &self.outer
    }

    pub fn holes(&self) -> &[Vec<Point2>] {
        &self.holes
    }

    /// Inside the outer ring and outside every hole.
    pub fn contains(&self, p: Point2) -> bool {
        point_in_ring(&self.outer, p) && !self.holes.iter().any(|h| point_in_ring(h, p))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.outer) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DomainFile = serde_json::from_str(text)?;
        Self::new(file.outer, file.holes)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&DomainFile {
            outer: self.outer.clone(),
            holes: self.holes.clone(),
        })?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn normalize_ring(mut ring: Vec<Point2>, name: &str) -> Result<Vec<Point2>> {
    if ring.len() >= 2 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::InvalidDomain(format!("{name} needs at least 3 distinct points")));
    }
    if ring.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidDomain(format!("{name} has non-finite coordinates")));
    }
    if !is_simple(&ring) {
        return Err(Error::InvalidDomain(format!("{name} is self-intersecting")));
    }
    Ok(ring)
}

/// Crossing-number test; points exactly on an edge count as inside only
/// on the lower/left sides, which is adequate for centroid tests.
pub(crate) fn point_in_ring(ring: &[Point2], p: Point2) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    use super::predicates::orient;
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: Point2, b: Point2, c: Point2, d: f64| {
        d == 0.0 && c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn is_simple(ring: &[Point2]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
