//! Ground-truth progress measure: shortest-path distance to the goal over
//! an 8-connected grid whose cells are blocked only where the robot disc
//! would overlap a wall or leave the course bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::{Aabb, Polygon, Vec2};

pub const GRID_CELL: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct GeodesicField {
    origin: Vec2,
    nx: usize,
    ny: usize,
    blocked: Vec<bool>,
    dist: Vec<f64>,
}

#[derive(PartialEq)]
struct Frontier {
    cost: f64,
    index: usize,
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // Min-heap on cost, ties broken by index for a deterministic pop order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

const NEIGHBORS: [(isize, isize, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, std::f64::consts::SQRT_2),
    (1, -1, std::f64::consts::SQRT_2),
    (-1, 1, std::f64::consts::SQRT_2),
    (-1, -1, std::f64::consts::SQRT_2),
];

impl GeodesicField {
    pub fn compute(bounds: &Aabb, walls: &[&Polygon], goal: Vec2, goal_radius: f64, robot_radius: f64) -> Self {
        let nx = ((bounds.width() / GRID_CELL).round() as usize).max(1);
        let ny = ((bounds.height() / GRID_CELL).round() as usize).max(1);
        let origin = Vec2::new(bounds.min_x, bounds.min_y);
        let mut blocked = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let c = Self::center_of(origin, i, j);
                blocked[j * nx + i] = !bounds.contains_disc(c, robot_radius)
                    || walls.iter().any(|w| w.signed_distance(c) < robot_radius);
            }
        }

        let mut dist = vec![f64::INFINITY; nx * ny];
        let mut heap = BinaryHeap::new();
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                if !blocked[idx] && Self::center_of(origin, i, j).distance(goal) <= goal_radius {
                    dist[idx] = 0.0;
                    heap.push(Frontier { cost: 0.0, index: idx });
                }
            }
        }
        while let Some(Frontier { cost, index }) = heap.pop() {
            if cost > dist[index] {
                continue;
            }
            let (i, j) = ((index % nx) as isize, (index / nx) as isize);
            for (di, dj, w) in NEIGHBORS {
                let (ni, nj) = (i + di, j + dj);
                if ni < 0 || nj < 0 || ni >= nx as isize || nj >= ny as isize {
                    continue;
                }
                let n = nj as usize * nx + ni as usize;
                if blocked[n] {
                    continue;
                }
                let c = cost + w * GRID_CELL;
                if c < dist[n] {
                    dist[n] = c;
                    heap.push(Frontier { cost: c, index: n });
                }
            }
        }
        Self { origin, nx, ny, blocked, dist }
    }

    fn center_of(origin: Vec2, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            origin.x + (i as f64 + 0.5) * GRID_CELL,
            origin.y + (j as f64 + 0.5) * GRID_CELL,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let fi = ((p.x - self.origin.x) / GRID_CELL).floor();
        let fj = ((p.y - self.origin.y) / GRID_CELL).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        Self::center_of(self.origin, i, j)
    }

    pub fn cell_value(&self, i: usize, j: usize) -> f64 {
        self.dist[j * self.nx + i]
    }

    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.blocked[j * self.nx + i]
    }

    /// Distance from an arbitrary point: best `value + offset` over nearby
    /// reachable cells, searching outward when the point's own cell is blocked.
    pub fn distance_from(&self, p: Vec2) -> f64 {
        let (ci, cj) = match self.cell_of(p) {
            Some(c) => c,
            None => return f64::INFINITY,
        };
        for ring in 1..=5isize {
            let mut best = f64::INFINITY;
            for dj in -ring..=ring {
                for di in -ring..=ring {
                    let (i, j) = (ci as isize + di, cj as isize + dj);
                    if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                        continue;
                    }
                    let v = self.cell_value(i as usize, j as usize);
                    if v.is_finite() {
                        best = best.min(v + p.distance(self.cell_center(i as usize, j as usize)));
                    }
                }
            }
            if best.is_finite() {
                return best;
            }
        }
        f64::INFINITY
    }

    /// Follows steepest descent from `p` for up to `max_cells` cells and
    /// returns the visited cell centers, nearest first.
    pub fn descent_chain(&self, p: Vec2, max_cells: usize) -> Vec<Vec2> {
        let mut chain = Vec::new();
        let Some((mut i, mut j)) = self.nearest_reachable_cell(p) else {
            return chain;
        };
        for _ in 0..max_cells {
            let here = self.cell_value(i, j);
            if here == 0.0 {
                break;
            }
            let mut best: Option<(usize, usize, f64)> = None;
            for (di, dj, _) in NEIGHBORS {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni < 0 || nj < 0 || ni >= self.nx as isize || nj >= self.ny as isize {
                    continue;
                }
                let v = self.cell_value(ni as usize, nj as usize);
                if v < here && best.is_none_or(|b| v < b.2) {
                    best = Some((ni as usize, nj as usize, v));
                }
            }
            let Some((ni, nj, _)) = best else { break };
            i = ni;
            j = nj;
            chain.push(self.cell_center(i, j));
        }
        chain
    }

    fn nearest_reachable_cell(&self, p: Vec2) -> Option<(usize, usize)> {
        let (ci, cj) = self.cell_of(p)?;
        if self.cell_value(ci, cj).is_finite() {
            return Some((ci, cj));
        }
        for ring in 1..=5isize {
            let mut best: Option<(usize, usize, f64)> = None;
            for dj in -ring..=ring {
                for di in -ring..=ring {
                    let (i, j) = (ci as isize + di, cj as isize + dj);
                    if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                        continue;
                    }
                    let (i, j) = (i as usize, j as usize);
                    let v = self.cell_value(i, j);
                    if v.is_finite() {
                        let d = p.distance(self.cell_center(i, j));
                        if best.is_none_or(|b| d < b.2) {
                            best = Some((i, j, d));
                        }
                    }
                }
            }
            if let Some((i, j, _)) = best {
                return Some((i, j));
            }
        }
        None
    }
}
