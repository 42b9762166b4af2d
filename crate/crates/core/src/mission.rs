//! Missions, their scheduling and grid path planning.

use alloc::collections::{BTreeSet, BinaryHeap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use crate::grounding::{MissionDraft, MissionTime};
use crate::id::ObjectId;
use crate::level1::OnlineMap;
use crate::world::{Cell, OccupancyGrid, Pose};

const SQRT2: f64 = core::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq)]
pub enum MissionError {
    UnknownObject { id: ObjectId },
    UnreachableTarget { id: ObjectId },
    OutsideGrid { cell: Cell },
    Blocked { cell: Cell },
    NoPath { start: Cell, goal: Cell },
}

impl fmt::Display for MissionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MissionError::UnknownObject { id } => write!(f, "`{id}` has no footprint on the map"),
            MissionError::UnreachableTarget { id } => write!(f, "no free cell next to `{id}`"),
            MissionError::OutsideGrid { cell } => write!(f, "cell ({}, {}) lies outside the grid", cell.row, cell.col),
            MissionError::Blocked { cell } => write!(f, "cell ({}, {}) is occupied", cell.row, cell.col),
            MissionError::NoPath { start, goal } => write!(
                f,
                "no path from ({}, {}) to ({}, {})",
                start.row, start.col, goal.row, goal.col
            ),
        }
    }
}

impl core::error::Error for MissionError {}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Mission {
    pub id: u64,
    pub scheduled_time: MissionTime,
    pub target_object_id: ObjectId,
    /// Free cell 8-adjacent to the object's footprint.
    pub target_cell: Cell,
    pub action: String,
}

/// Creates a mission towards `resolved_id`. The target cell is the free cell
/// next to the footprint closest to the robot; ties go to the lowest
/// `(row, col)`.
pub fn build_mission(
    id: u64,
    draft: &MissionDraft,
    resolved_id: &ObjectId,
    online: &OnlineMap,
    pose: &Pose,
) -> Result<Mission, MissionError> {
    let footprint = online
        .footprint(resolved_id)
        .filter(|f| !f.is_empty())
        .ok_or_else(|| MissionError::UnknownObject { id: resolved_id.clone() })?;
    let grid = online.base();
    let ring: BTreeSet<Cell> = footprint
        .iter()
        .flat_map(|&c| grid.neighbors8(c))
        .filter(|c| !footprint.contains(c) && online.is_free(*c))
        .collect();
    let mut best: Option<(f64, Cell)> = None;
    for cell in ring {
        let d = grid.cell_center(cell).distance(pose.position);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, cell));
        }
    }
    let (_, target_cell) = best.ok_or_else(|| MissionError::UnreachableTarget { id: resolved_id.clone() })?;
    Ok(Mission {
        id,
        scheduled_time: draft.time,
        target_object_id: resolved_id.clone(),
        target_cell,
        action: draft.action.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Path {
    /// Start first, goal last; consecutive cells are 8-adjacent.
    pub cells: Vec<Cell>,
    /// Sum of step costs, 1 per straight and √2 per diagonal step.
    pub cost: f64,
}

impl Path {
    /// Checks adjacency, freeness, endpoints and the corner-cutting rule.
    pub fn is_valid_on(&self, grid: &OccupancyGrid, start: Cell, goal: Cell) -> bool {
        self.cells.first() == Some(&start)
            && self.cells.last() == Some(&goal)
            && self.cells.iter().all(|c| grid.is_free(*c))
            && self.cells.windows(2).all(|w| step_cost(grid, w[0], w[1]).is_some())
    }
}

/// Cost of moving between two cells, `None` when the move is not allowed.
fn step_cost(grid: &OccupancyGrid, from: Cell, to: Cell) -> Option<f64> {
    let dr = to.row as isize - from.row as isize;
    let dc = to.col as isize - from.col as isize;
    if !grid.is_free(to) || dr.abs() > 1 || dc.abs() > 1 || (dr == 0 && dc == 0) {
        return None;
    }
    if dr != 0 && dc != 0 {
        // No squeezing between two diagonally touching obstacles, or past one.
        let side_a = grid.offset(from, dr, 0)?;
        let side_b = grid.offset(from, 0, dc)?;
        if !(grid.is_free(side_a) && grid.is_free(side_b)) {
            return None;
        }
        return Some(SQRT2);
    }
    Some(1.0)
}

/// Octile distance, admissible for the unit/√2 step costs.
fn octile(a: Cell, b: Cell) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    dr.max(dc) + (SQRT2 - 1.0) * dr.min(dc)
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    seq: u64,
    cell: Cell,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Max-heap order: lowest f first, then highest g, then earliest insertion.
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.seq.cmp(&self.seq))
    }
}

fn check_endpoint(grid: &OccupancyGrid, cell: Cell) -> Result<(), MissionError> {
    if !grid.contains(cell) {
        return Err(MissionError::OutsideGrid { cell });
    }
    if grid.is_occupied(cell) {
        return Err(MissionError::Blocked { cell });
    }
    Ok(())
}

/// Shortest 8-connected path with A*. Neighbours are expanded in row-major
/// order and equal-priority nodes leave the queue in insertion order, so the
/// result is deterministic.
pub fn plan_path(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Path, MissionError> {
    check_endpoint(grid, start)?;
    check_endpoint(grid, goal)?;
    let idx = |c: Cell| c.row * grid.width() + c.col;
    let n = grid.width() * grid.height();
    let mut g_score = alloc::vec![f64::INFINITY; n];
    let mut parent: Vec<Option<Cell>> = alloc::vec![None; n];
    let mut closed = alloc::vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    g_score[idx(start)] = 0.0;
    open.push(Open { f: octile(start, goal), g: 0.0, seq, cell: start });
    while let Some(Open { g, cell, .. }) = open.pop() {
        if closed[idx(cell)] {
            continue;
        }
        closed[idx(cell)] = true;
        if cell == goal {
            let mut cells = alloc::vec![cell];
            let mut cur = cell;
            while let Some(p) = parent[idx(cur)] {
                cells.push(p);
                cur = p;
            }
            cells.reverse();
            return Ok(Path { cells, cost: g });
        }
        for next in grid.neighbors8(cell) {
            let Some(step) = step_cost(grid, cell, next) else { continue };
            let tentative = g + step;
            if tentative < g_score[idx(next)] - 1e-12 {
                g_score[idx(next)] = tentative;
                parent[idx(next)] = Some(cell);
                seq += 1;
                open.push(Open { f: tentative + octile(next, goal), g: tentative, seq, cell: next });
            }
        }
    }
    Err(MissionError::NoPath { start, goal })
}

/// Grid where every cell within `radius` cells (centre to centre) of an
/// occupied cell is occupied too.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    let mut out = grid.clone();
    if radius.is_nan() || radius <= 0.0 {
        return out;
    }
    let r = radius.floor() as isize;
    let r2 = radius * radius;
    for cell in grid.occupied_cells() {
        for dr in -r..=r {
            for dc in -r..=r {
                if ((dr * dr + dc * dc) as f64) <= r2 {
                    if let Some(c) = grid.offset(cell, dr, dc) {
                        out.set_occupied(c, true);
                    }
                }
            }
        }
    }
    out
}

/// Mission queue. Immediate missions leave first in submission order, then
/// scheduled ones by time, ties in submission order.
#[derive(Debug, Clone, Default)]
pub struct Scheduler {
    immediate: VecDeque<Mission>,
    scheduled: Vec<(f64, Mission)>,
}

impl Scheduler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn submit(&mut self, mission: Mission) {
        match mission.scheduled_time {
            MissionTime::Immediate => self.immediate.push_back(mission),
            MissionTime::At(t) => {
                let pos = self.scheduled.partition_point(|(s, _)| *s <= t);
                self.scheduled.insert(pos, (t, mission));
            }
        }
    }

    /// Next mission due at time `now`, if any.
    pub fn next_due(&mut self, now: f64) -> Option<Mission> {
        if let Some(m) = self.immediate.pop_front() {
            return Some(m);
        }
        match self.scheduled.first() {
            Some((t, _)) if *t <= now => Some(self.scheduled.remove(0).1),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.immediate.len() + self.scheduled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Text view of a grid, north up: `#` occupied, `.` free, `*` path, `S`/`G`
/// path ends. `marks` are drawn last and win over everything else.
pub fn render_overlay(grid: &OccupancyGrid, path: Option<&Path>, marks: &[(Cell, char)]) -> String {
    let w = grid.width();
    let mut canvas: Vec<Vec<char>> = (0..grid.height())
        .map(|row| {
            (0..w)
                .map(|col| if grid.is_occupied(Cell::new(row, col)) { '#' } else { '.' })
                .collect()
        })
        .collect();
    let mut put = |c: Cell, ch: char| {
        if grid.contains(c) {
            canvas[c.row][c.col] = ch;
        }
    };
    if let Some(p) = path {
        for &c in &p.cells {
            put(c, '*');
        }
        if let (Some(&s), Some(&g)) = (p.cells.first(), p.cells.last()) {
            put(s, 'S');
            put(g, 'G');
        }
    }
    for &(c, ch) in marks {
        put(c, ch);
    }
    let mut out = String::with_capacity((w + 1) * grid.height());
    for row in canvas.iter().rev() {
        out.extend(row.iter());
        out.push('\n');
    }
    out
}

/// Footprint marks for [`render_overlay`]: the n-th object (in id order) is
/// drawn with the n-th letter `a..z`, then `A..Z`, then `?`.
pub fn footprint_marks(online: &OnlineMap) -> Vec<(Cell, char)> {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    online
        .footprints()
        .values()
        .enumerate()
        .flat_map(|(i, cells)| {
            let ch = LETTERS.get(i).map_or('?', |&b| b as char);
            cells.iter().map(move |&c| (c, ch))
        })
        .collect()
}
