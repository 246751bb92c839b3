//! Discrete grid state space: obstacle mask, successor sets, step costs and
//! exact shortest-path distance fields toward candidate goals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    pub fn xy(self) -> (usize, usize) {
        (self.x, self.y)
    }
}

impl From<[usize; 2]> for Cell {
    fn from(v: [usize; 2]) -> Self {
        Cell::new(v[0], v[1])
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

/// Offsets in the fixed successor order: stay first, then row-major.
const OFFSETS: [(i64, i64); 9] = [
    (0, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Successor set of a cell, at most nine entries, in the fixed offset order.
#[derive(Debug, Clone, Copy)]
pub struct Successors {
    cells: [Cell; 9],
    len: u8,
}

impl Successors {
    fn push(&mut self, c: Cell) {
        self.cells[self.len as usize] = c;
        self.len += 1;
    }
}

impl Deref for Successors {
    type Target = [Cell];

    fn deref(&self) -> &[Cell] {
        &self.cells[..self.len as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cell_size: f64,
    blocked: Vec<bool>,
    connectivity: Connectivity,
    allow_stay: bool,
}

impl GridMap {
    /// Obstacle-free 8-connected map with the stay action enabled.
    pub fn open(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        Self::new(width, height, cell_size, Connectivity::Eight, true)
    }

    pub fn new(
        width: usize,
        height: usize,
        cell_size: f64,
        connectivity: Connectivity,
        allow_stay: bool,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Input(format!("map must be at least 2x2, got {width}x{height}")));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Input(format!("cell_size must be positive, got {cell_size}")));
        }
        Ok(GridMap {
            width,
            height,
            cell_size,
            blocked: vec![false; width * height],
            connectivity,
            allow_stay,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn allow_stay(&self) -> bool {
        self.allow_stay
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.contains(c) || self.blocked[self.index(c)]
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) -> Result<()> {
        self.check_bounds(c)?;
        let i = self.index(c);
        self.blocked[i] = blocked;
        Ok(())
    }

    /// Blocks the axis-aligned rectangle `[x0, x0+w) x [y0, y0+h)`, clipped to the map.
    pub fn block_rect(&mut self, x0: usize, y0: usize, w: usize, h: usize) {
        for y in y0..(y0 + h).min(self.height) {
            for x in x0..(x0 + w).min(self.width) {
                let i = y * self.width + x;
                self.blocked[i] = true;
            }
        }
    }

    /// World coordinates of the cell.
    pub fn position(&self, c: Cell) -> [f64; 2] {
        [c.x as f64 * self.cell_size, c.y as f64 * self.cell_size]
    }

    /// Upper corner of the bounding box of all cell positions.
    pub fn extent(&self) -> [f64; 2] {
        [
            (self.width - 1) as f64 * self.cell_size,
            (self.height - 1) as f64 * self.cell_size,
        ]
    }

    fn check_bounds(&self, c: Cell) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                x: c.x as i64,
                y: c.y as i64,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn check_free(&self, c: Cell) -> Result<()> {
        self.check_bounds(c)?;
        if self.blocked[self.index(c)] {
            return Err(Error::Blocked { x: c.x, y: c.y });
        }
        Ok(())
    }

    fn free_offset(&self, c: Cell, dx: i64, dy: i64) -> Option<Cell> {
        let x = c.x as i64 + dx;
        let y = c.y as i64 + dy;
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        let n = Cell::new(x as usize, y as usize);
        (!self.blocked[self.index(n)]).then_some(n)
    }

    /// Feasible one-step successors of an unblocked cell.
    pub fn successors(&self, c: Cell) -> Result<Successors> {
        self.check_free(c)?;
        Ok(self.successors_unchecked(c))
    }

    pub(crate) fn successors_unchecked(&self, c: Cell) -> Successors {
        let mut out = Successors {
            cells: [c; 9],
            len: 0,
        };
        for &(dx, dy) in &OFFSETS {
            if dx == 0 && dy == 0 {
                if self.allow_stay {
                    out.push(c);
                }
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal && self.connectivity == Connectivity::Four {
                continue;
            }
            let Some(n) = self.free_offset(c, dx, dy) else {
                continue;
            };
            // no corner cutting between two blocked orthogonal cells
            if diagonal && self.free_offset(c, dx, 0).is_none() && self.free_offset(c, 0, dy).is_none() {
                continue;
            }
            out.push(n);
        }
        out
    }

    /// Euclidean length of a single move between adjacent cells (or a stay).
    pub fn step_cost(&self, from: Cell, to: Cell) -> Result<f64> {
        let dx = from.x.abs_diff(to.x);
        let dy = from.y.abs_diff(to.y);
        match (dx, dy) {
            (0, 0) => Ok(0.0),
            (1, 0) | (0, 1) => Ok(self.cell_size),
            (1, 1) if self.connectivity == Connectivity::Eight => {
                Ok(self.cell_size * std::f64::consts::SQRT_2)
            }
            _ => Err(Error::NotAdjacent {
                from: from.xy(),
                to: to.xy(),
            }),
        }
    }

    /// Cost of a move already known to be a successor; no adjacency check.
    #[inline]
    pub(crate) fn move_cost(&self, from: Cell, to: Cell) -> f64 {
        match (from.x != to.x, from.y != to.y) {
            (false, false) => 0.0,
            (true, true) => self.cell_size * std::f64::consts::SQRT_2,
            _ => self.cell_size,
        }
    }

    /// Exact shortest-path cost from every cell to `goal` (Dijkstra).
    pub fn distance_field(&self, goal: Cell) -> Result<DistanceField> {
        self.check_free(goal)?;
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        let g = self.index(goal);
        dist[g] = 0.0;
        heap.push(Entry { cost: 0.0, index: g });
        while let Some(Entry { cost, index }) = heap.pop() {
            if cost > dist[index] {
                continue;
            }
            let c = self.cell_at(index);
            for &n in self.successors_unchecked(c).iter() {
                let ni = self.index(n);
                let next = cost + self.move_cost(c, n);
                if next < dist[ni] {
                    dist[ni] = next;
                    heap.push(Entry { cost: next, index: ni });
                }
            }
        }
        Ok(DistanceField { goal, dist })
    }

    /// Shortest grid path from `from` to `to`, both endpoints included.
    pub fn shortest_path(&self, from: Cell, to: Cell) -> Result<Vec<Cell>> {
        self.check_free(from)?;
        let field = self.distance_field(to)?;
        if !field.get(self, from).is_finite() {
            return Err(Error::Model(format!("{:?} cannot reach {:?}", from.xy(), to.xy())));
        }
        let mut path = vec![from];
        let mut cur = from;
        while cur != to {
            let here = field.get(self, cur);
            let next = self
                .successors_unchecked(cur)
                .iter()
                .copied()
                .filter(|&n| n != cur)
                .min_by(|a, b| {
                    let da = self.move_cost(cur, *a) + field.get(self, *a);
                    let db = self.move_cost(cur, *b) + field.get(self, *b);
                    da.total_cmp(&db)
                })
                .ok_or_else(|| Error::Model("dead end on shortest path".into()))?;
            debug_assert!(field.get(self, next) < here);
            path.push(next);
            cur = next;
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lowest travel cost from each cell to one goal, in world units.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    goal: Cell,
    dist: Vec<f64>,
}

impl DistanceField {
    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn values(&self) -> &[f64] {
        &self.dist
    }

    #[inline]
    pub fn get(&self, map: &GridMap, c: Cell) -> f64 {
        self.dist[map.index(c)]
    }
}
