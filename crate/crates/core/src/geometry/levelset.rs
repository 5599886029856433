//! Level sets of f(x,y) = x²/2 + (y²−1)²/2 by marching squares.
//!
//! The two wells at (0, ±1) merge at c = 1/2, where the contour pinches at the
//! origin; below that value the level set has two components, above it one.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 64;

pub fn double_well(x: f64, y: f64) -> f64 {
    let w = y * y - 1.0;
    0.5 * x * x + 0.5 * w * w
}

/// Samples of the double-well function on [−xmax,xmax]×[−ymax,ymax].
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    xmax: f64,
    ymax: f64,
    nx: usize,
    ny: usize,
    /// `values[j * nx + i] = f(x_i, y_j)`
    values: Vec<f64>,
}

impl LevelSetField {
    pub fn new(xmax: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < MIN_RESOLUTION || ny < MIN_RESOLUTION {
            return Err(Error::InvalidParameter(format!(
                "level-set grid {nx}x{ny} below {MIN_RESOLUTION}x{MIN_RESOLUTION}"
            )));
        }
        if !(xmax > 0.0 && ymax > 0.0) {
            return Err(Error::InvalidParameter("level-set extents must be positive".into()));
        }
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(double_well(Self::coord(xmax, nx, i), Self::coord(ymax, ny, j)));
            }
        }
        Ok(Self { xmax, ymax, nx, ny, values })
    }

    /// The 256×256 grid over [−1.5, 1.5]².
    pub fn standard() -> Self {
        Self::new(1.5, 1.5, 256, 256).expect("valid default grid")
    }

    fn coord(max: f64, n: usize, i: usize) -> f64 {
        -max + 2.0 * max * i as f64 / (n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        Self::coord(self.xmax, self.nx, i)
    }

    pub fn y(&self, j: usize) -> f64 {
        Self::coord(self.ymax, self.ny, j)
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// (Δx, Δy)
    pub fn spacing(&self) -> (f64, f64) {
        (2.0 * self.xmax / (self.nx - 1) as f64, 2.0 * self.ymax / (self.ny - 1) as f64)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub level: f64,
    /// Number of connected contour components.
    pub components: usize,
    /// One ordered polyline per component. Closed curves repeat their first point.
    pub polylines: Vec<Vec<(f64, f64)>>,
}

impl LevelSet {
    /// CSV with header `component_id,x,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("component_id,x,y\n");
        for (id, line) in self.polylines.iter().enumerate() {
            for (x, y) in line {
                let _ = writeln!(s, "{id},{x},{y}");
            }
        }
        s
    }

    /// Smallest distance from a contour vertex to (x, y).
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        self.polylines
            .iter()
            .flatten()
            .map(|(px, py)| (px - x).hypot(py - y))
            .fold(f64::INFINITY, f64::min)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

pub fn level_set_components(field: &LevelSetField, c: f64) -> Result<LevelSet> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("level {c} must be positive")));
    }
    let (nx, ny) = (field.nx, field.ny);
    // edge ids: 2*(j*nx+i) horizontal (i,j)-(i+1,j), +1 vertical (i,j)-(i,j+1)
    let h_edge = |i: usize, j: usize| 2 * (j * nx + i);
    let v_edge = |i: usize, j: usize| 2 * (j * nx + i) + 1;
    let above = |v: f64| v >= c;

    let mut points: HashMap<usize, (f64, f64)> = HashMap::new();
    let mut crossing = |id: usize, (x0, y0, f0): (f64, f64, f64), (x1, y1, f1): (f64, f64, f64)| {
        points.entry(id).or_insert_with(|| {
            let w = (c - f0) / (f1 - f0);
            (x0 + w * (x1 - x0), y0 + w * (y1 - y0))
        });
        id
    };
    let mut segments: Vec<(usize, usize)> = Vec::new();

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let p00 = (field.x(i), field.y(j), field.value(i, j));
            let p10 = (field.x(i + 1), field.y(j), field.value(i + 1, j));
            let p11 = (field.x(i + 1), field.y(j + 1), field.value(i + 1, j + 1));
            let p01 = (field.x(i), field.y(j + 1), field.value(i, j + 1));
            let (a, b, cc, d) = (above(p00.2), above(p10.2), above(p11.2), above(p01.2));
            let mut bottom = None;
            let mut right = None;
            let mut top = None;
            let mut left = None;
            if a != b {
                bottom = Some(crossing(h_edge(i, j), p00, p10));
            }
            if b != cc {
                right = Some(crossing(v_edge(i + 1, j), p10, p11));
            }
            if cc != d {
                top = Some(crossing(h_edge(i, j + 1), p01, p11));
            }
            if d != a {
                left = Some(crossing(v_edge(i, j), p00, p01));
            }
            match (bottom, right, top, left) {
                (Some(bo), Some(r), Some(t), Some(l)) => {
                    let center = 0.25 * (p00.2 + p10.2 + p11.2 + p01.2);
                    if above(center) == a {
                        // a and cc joined through the center: cut off b and d
                        segments.push((bo, r));
                        segments.push((l, t));
                    } else {
                        segments.push((l, bo));
                        segments.push((r, t));
                    }
                }
                _ => {
                    let ends: Vec<usize> = [bottom, right, top, left].into_iter().flatten().collect();
                    if ends.len() == 2 {
                        segments.push((ends[0], ends[1]));
                    }
                }
            }
        }
    }

    let ids: Vec<usize> = {
        let mut v: Vec<usize> = points.keys().copied().collect();
        v.sort_unstable();
        v
    };
    let index: HashMap<usize, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut uf = UnionFind::new(ids.len());
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    for &(p, q) in &segments {
        let (a, b) = (index[&p], index[&q]);
        uf.union(a, b);
        adj[a].push(b);
        adj[b].push(a);
    }

    let mut visited = vec![false; ids.len()];
    let mut polylines = Vec::new();
    // open chains first start at an endpoint so they come out in order
    let starts: Vec<usize> = (0..ids.len())
        .filter(|&k| adj[k].len() == 1)
        .chain((0..ids.len()).filter(|&k| adj[k].len() != 1))
        .collect();
    for s in starts {
        if visited[s] {
            continue;
        }
        let mut line = vec![points[&ids[s]]];
        visited[s] = true;
        let mut cur = s;
        loop {
            match adj[cur].iter().find(|&&n| !visited[n]) {
                Some(&n) => {
                    visited[n] = true;
                    line.push(points[&ids[n]]);
                    cur = n;
                }
                None => {
                    if adj[cur].contains(&s) && line.len() > 2 {
                        line.push(line[0]);
                    }
                    break;
                }
            }
        }
        polylines.push(line);
    }

    let mut roots: Vec<usize> = (0..ids.len()).map(|k| uf.find(k)).collect();
    roots.sort_unstable();
    roots.dedup();
    Ok(LevelSet { level: c, components: roots.len(), polylines })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_invariants() {
        assert_eq!(double_well(0.0, 1.0), 0.0);
        assert_eq!(double_well(0.0, -1.0), 0.0);
        assert_eq!(double_well(0.0, 0.0), 0.5);
        let f = LevelSetField::standard();
        assert!(f.min_value() >= 0.0);
        assert!(LevelSetField::new(1.5, 1.5, 32, 256).is_err());
    }

    #[test]
    fn component_counts_across_the_pinch() {
        let f = LevelSetField::standard();
        for (c, n) in [(0.6, 1), (0.4, 2), (0.3, 2), (0.49, 2), (0.7, 1)] {
            let ls = level_set_components(&f, c).unwrap();
            assert_eq!(ls.components, n, "c = {c}");
            assert_eq!(ls.polylines.len(), n, "c = {c}");
        }
    }

    #[test]
    fn pinch_contour_touches_origin() {
        let f = LevelSetField::standard();
        let ls = level_set_components(&f, 0.5).unwrap();
        let (dx, dy) = f.spacing();
        assert!(ls.distance_to(0.0, 0.0) <= dx.hypot(dy));
    }

    #[test]
    fn empty_below_minimum() {
        let f = LevelSetField::new(1.5, 1.5, 64, 64).unwrap();
        let ls = level_set_components(&f, 1e-9).unwrap();
        assert_eq!(ls.components, 0);
        assert!(level_set_components(&f, 0.0).is_err());
    }

    #[test]
    fn contour_points_lie_on_level() {
        let f = LevelSetField::standard();
        let ls = level_set_components(&f, 0.3).unwrap();
        let (dx, _) = f.spacing();
        for (x, y) in ls.polylines.iter().flatten() {
            // linear interpolation error is O(h²·|f''|)
            assert!((double_well(*x, *y) - 0.3).abs() < 10.0 * dx * dx);
        }
        let csv = ls.to_csv();
        assert!(csv.starts_with("component_id,x,y\n"));
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn closed_curves_close() {
        let f = LevelSetField::standard();
        let ls = level_set_components(&f, 0.6).unwrap();
        let line = &ls.polylines[0];
        assert_eq!(line.first(), line.last());
    }
}
