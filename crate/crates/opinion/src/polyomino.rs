//! Polyominoes on the torus: perimeters, shape predicates, enumeration up to
//! translation, and classification of minimal-perimeter shapes.

use crate::config::{component_with_winding, Winding};
use crate::error::{ModelError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use std::fmt;

pub const DEFAULT_AREA_CAP: usize = 12;
pub const DEFAULT_SIDE_CAP: usize = 8;

/// Edge-connected cell set stored as its lexicographically smallest translate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Polyomino {
    pub side: usize,
    /// Sorted row-major indices of the canonical translate.
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attachment {
    None,
    Long,
    Short,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShapeClass {
    /// `short x long` quasi-square (`long <= short + 1`) plus a straight
    /// protuberance of `prot` cells along one side.
    QuasiSquareProt {
        short: usize,
        long: usize,
        prot: usize,
        attached: Attachment,
    },
    /// `width` full wrapping lines plus a straight protuberance.
    StripProt {
        width: usize,
        vertical: bool,
        prot: usize,
    },
    /// Rectangle that is not a quasi-square, plus a straight protuberance.
    RectangleProt {
        short: usize,
        long: usize,
        prot: usize,
        attached: Attachment,
    },
    Other,
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeClass::QuasiSquareProt {
                short,
                long,
                prot,
                attached,
            } => {
                write!(f, "quasi-square {short}x{long}+{prot}({attached:?})")
            }
            ShapeClass::StripProt {
                width,
                vertical,
                prot,
            } => {
                write!(
                    f,
                    "strip w{width}{}+{prot}",
                    if *vertical { "v" } else { "h" }
                )
            }
            ShapeClass::RectangleProt {
                short,
                long,
                prot,
                attached,
            } => {
                write!(f, "rectangle {short}x{long}+{prot}({attached:?})")
            }
            ShapeClass::Other => write!(f, "other"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concavity {
    pub cardinality: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicates {
    pub is_winding: bool,
    pub has_hole: bool,
    pub is_convex: bool,
    pub concavities: Vec<Concavity>,
}

fn neighbors(idx: usize, side: usize) -> [usize; 4] {
    let (r, c) = (idx / side, idx % side);
    [
        ((r + side - 1) % side) * side + c,
        ((r + 1) % side) * side + c,
        r * side + (c + side - 1) % side,
        r * side + (c + 1) % side,
    ]
}

fn translate(cells: &[usize], side: usize, dr: usize, dc: usize) -> Vec<usize> {
    let mut out: Vec<usize> = cells
        .iter()
        .map(|&i| ((i / side + dr) % side) * side + (i % side + dc) % side)
        .collect();
    out.sort_unstable();
    out
}

/// Smallest sorted translate of a cell set.
pub fn canonical_cells(cells: &[usize], side: usize) -> Vec<usize> {
    let mut best: Option<Vec<usize>> = None;
    // The canonical translate contains cell 0, so only shifts moving a cell there matter.
    for &anchor in cells {
        let (r, c) = (anchor / side, anchor % side);
        let t = translate(cells, side, side - r, side - c);
        if best.as_ref().is_none_or(|b| t < *b) {
            best = Some(t);
        }
    }
    best.unwrap_or_default()
}

fn is_connected(cells: &[usize], side: usize) -> bool {
    if cells.is_empty() {
        return false;
    }
    let set: HashSet<usize> = cells.iter().copied().collect();
    let mut seen = HashSet::from([cells[0]]);
    let mut stack = vec![cells[0]];
    while let Some(u) = stack.pop() {
        for v in neighbors(u, side) {
            if set.contains(&v) && seen.insert(v) {
                stack.push(v);
            }
        }
    }
    seen.len() == set.len()
}

impl Polyomino {
    pub fn new(side: usize, cells: &[usize]) -> Result<Self> {
        let mut cells: Vec<usize> = cells.to_vec();
        cells.sort_unstable();
        cells.dedup();
        if cells.iter().any(|&i| i >= side * side) {
            return Err(ModelError::Range("cell outside the torus".into()));
        }
        if !is_connected(&cells, side) {
            return Err(ModelError::Range("cells are not edge-connected".into()));
        }
        Ok(Polyomino {
            side,
            cells: canonical_cells(&cells, side),
        })
    }

    /// Build from `(row, col)` pairs; coordinates are reduced modulo the side.
    pub fn from_coords(side: usize, coords: &[(i64, i64)]) -> Result<Self> {
        let s = side as i64;
        let cells: Vec<usize> = coords
            .iter()
            .map(|&(r, c)| (r.rem_euclid(s) * s + c.rem_euclid(s)) as usize)
            .collect();
        Self::new(side, &cells)
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn coords(&self) -> Vec<(usize, usize)> {
        self.cells
            .iter()
            .map(|&i| (i / self.side, i % self.side))
            .collect()
    }

    fn membership(&self) -> Vec<bool> {
        let mut m = vec![false; self.side * self.side];
        for &i in &self.cells {
            m[i] = true;
        }
        m
    }

    /// Unit edges between a cell of the polyomino and a cell outside it.
    pub fn edge_perimeter(&self) -> usize {
        let m = self.membership();
        self.cells
            .iter()
            .map(|&i| neighbors(i, self.side).iter().filter(|&&j| !m[j]).count())
            .sum()
    }

    /// Exterior cells sharing an edge with the polyomino.
    pub fn site_perimeter(&self) -> usize {
        let m = self.membership();
        let outside: HashSet<usize> = self
            .cells
            .iter()
            .flat_map(|&i| neighbors(i, self.side))
            .filter(|&j| !m[j])
            .collect();
        outside.len()
    }

    pub fn winding(&self) -> Winding {
        let m = self.membership();
        let mut seen = vec![false; self.side * self.side];
        component_with_winding(self.side, self.cells[0], &mut seen, |j| m[j]).1
    }

    pub fn is_winding(&self) -> bool {
        self.winding().winds()
    }

    /// Planar lift `(row, col)` of a non-winding polyomino, shifted to start at 0.
    fn planar_lift(&self) -> Option<Vec<(i64, i64)>> {
        if self.is_winding() {
            return None;
        }
        let s = self.side as i64;
        let m = self.membership();
        let mut lift = vec![None; self.side * self.side];
        let start = self.cells[0];
        lift[start] = Some((0i64, 0i64));
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            let (lr, lc) = lift[u].unwrap();
            let (r, c) = ((u / self.side) as i64, (u % self.side) as i64);
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let v = ((r + dr).rem_euclid(s) * s + (c + dc).rem_euclid(s)) as usize;
                if m[v] && lift[v].is_none() {
                    lift[v] = Some((lr + dr, lc + dc));
                    stack.push(v);
                }
            }
        }
        let pts: Vec<(i64, i64)> = self.cells.iter().map(|&i| lift[i].unwrap()).collect();
        let r0 = pts.iter().map(|p| p.0).min().unwrap();
        let c0 = pts.iter().map(|p| p.1).min().unwrap();
        Some(pts.into_iter().map(|(r, c)| (r - r0, c - c0)).collect())
    }

    pub fn predicates(&self) -> Predicates {
        let side = self.side;
        let m = self.membership();
        let winding = self.is_winding();

        let mut seen = m.clone();
        let mut has_hole = false;
        for start in 0..side * side {
            if !seen[start] {
                let (_, w) = component_with_winding(side, start, &mut seen, |j| !m[j]);
                if !w.winds() {
                    has_hole = true;
                }
            }
        }

        // Lines are rows then columns; each is listed as its membership pattern.
        let lines: Vec<Vec<bool>> = (0..side)
            .map(|r| (0..side).map(|c| m[r * side + c]).collect())
            .chain((0..side).map(|c| (0..side).map(|r| m[r * side + c]).collect()))
            .collect();
        let is_convex = lines.iter().all(|l| cyclic_runs(l) <= 1);

        let gap_cells: Vec<usize> = match self.planar_lift() {
            Some(pts) => planar_gap_counts(&pts),
            None => lines.iter().map(|l| cyclic_inner_gap(l)).collect(),
        };
        let mut concavities = Vec::new();
        for family in [
            &gap_cells[..gap_cells.len() / 2],
            &gap_cells[gap_cells.len() / 2..],
        ] {
            let mut i = 0;
            while i < family.len() {
                if family[i] == 0 {
                    i += 1;
                    continue;
                }
                let mut j = i;
                let mut card = 0;
                while j < family.len() && family[j] > 0 {
                    card += family[j];
                    j += 1;
                }
                concavities.push(Concavity {
                    cardinality: card,
                    width: j - i,
                });
                i = j;
            }
        }
        Predicates {
            is_winding: winding,
            has_hole,
            is_convex,
            concavities,
        }
    }

    pub fn classify(&self) -> ShapeClass {
        match self.winding() {
            Winding::None => classify_planar(&self.planar_lift().expect("non-winding")),
            Winding::Vertical => classify_strip(&self.membership(), self.side, true),
            Winding::Horizontal => classify_strip(&self.membership(), self.side, false),
            Winding::Both => ShapeClass::Other,
        }
    }

    /// The polyomino with its straight protuberance removed, if it has one.
    pub fn base_shape(&self) -> Option<Polyomino> {
        let class = self.classify();
        let prot = match class {
            ShapeClass::QuasiSquareProt { prot, .. }
            | ShapeClass::RectangleProt { prot, .. }
            | ShapeClass::StripProt { prot, .. } => prot,
            ShapeClass::Other => return None,
        };
        if prot == 0 {
            return Some(self.clone());
        }
        // Drop the partial boundary line identified during classification.
        let m = self.membership();
        let side = self.side;
        let candidates: Vec<Vec<usize>> = match class {
            ShapeClass::StripProt { vertical, .. } => (0..side)
                .map(|line| {
                    self.cells
                        .iter()
                        .copied()
                        .filter(|&i| {
                            if vertical {
                                i % side != line
                            } else {
                                i / side != line
                            }
                        })
                        .collect()
                })
                .collect(),
            _ => {
                let pts = self.planar_lift().unwrap();
                let (h, w) = bbox(&pts);
                let sides = [(0usize, true), (h - 1, true), (0, false), (w - 1, false)];
                sides
                    .iter()
                    .map(|&(line, is_row)| {
                        self.cells
                            .iter()
                            .zip(&pts)
                            .filter(|(_, p)| {
                                if is_row {
                                    p.0 as usize != line
                                } else {
                                    p.1 as usize != line
                                }
                            })
                            .map(|(&i, _)| i)
                            .collect()
                    })
                    .collect()
            }
        };
        let _ = m;
        candidates
            .into_iter()
            .filter(|c: &Vec<usize>| c.len() + prot == self.area())
            .filter_map(|c| Polyomino::new(side, &c).ok())
            .find(|p| {
                matches!(
                    p.classify(),
                    ShapeClass::QuasiSquareProt { prot: 0, .. }
                        | ShapeClass::RectangleProt { prot: 0, .. }
                        | ShapeClass::StripProt { prot: 0, .. }
                )
            })
    }
}

fn cyclic_runs(line: &[bool]) -> usize {
    let n = line.len();
    if line.iter().all(|&x| x) {
        return 1;
    }
    (0..n)
        .filter(|&i| line[i] && !line[(i + n - 1) % n])
        .count()
}

/// Gap cells of a line that are not part of its largest cyclic gap.
fn cyclic_inner_gap(line: &[bool]) -> usize {
    if cyclic_runs(line) <= 1 {
        return 0;
    }
    let n = line.len();
    let start = (0..n).find(|&i| line[i]).unwrap();
    let mut gaps = Vec::new();
    let mut run = 0;
    for step in 1..=n {
        if line[(start + step) % n] {
            if run > 0 {
                gaps.push(run);
            }
            run = 0;
        } else {
            run += 1;
        }
    }
    let total: usize = gaps.iter().sum();
    total - gaps.iter().max().unwrap()
}

fn bbox(pts: &[(i64, i64)]) -> (usize, usize) {
    let h = pts.iter().map(|p| p.0).max().unwrap() + 1;
    let w = pts.iter().map(|p| p.1).max().unwrap() + 1;
    (h as usize, w as usize)
}

/// Per-line count of empty cells strictly between occupied cells, rows first.
fn planar_gap_counts(pts: &[(i64, i64)]) -> Vec<usize> {
    let (h, w) = bbox(pts);
    let grid: HashSet<(i64, i64)> = pts.iter().copied().collect();
    let count = |cells: Vec<bool>| -> usize {
        let first = cells.iter().position(|&x| x);
        let last = cells.iter().rposition(|&x| x);
        match (first, last) {
            (Some(a), Some(b)) => (a..=b).filter(|&i| !cells[i]).count(),
            _ => 0,
        }
    };
    let rows = (0..h).map(|r| {
        count(
            (0..w)
                .map(|c| grid.contains(&(r as i64, c as i64)))
                .collect(),
        )
    });
    let cols = (0..w).map(|c| {
        count(
            (0..h)
                .map(|r| grid.contains(&(r as i64, c as i64)))
                .collect(),
        )
    });
    rows.chain(cols).collect()
}

fn attachment(side_len: usize, other_len: usize) -> Attachment {
    match side_len.cmp(&other_len) {
        std::cmp::Ordering::Greater => Attachment::Long,
        std::cmp::Ordering::Less => Attachment::Short,
        std::cmp::Ordering::Equal => Attachment::Square,
    }
}

fn rank(class: &ShapeClass) -> u8 {
    match class {
        ShapeClass::QuasiSquareProt {
            attached: Attachment::None,
            ..
        } => 0,
        ShapeClass::QuasiSquareProt {
            attached: Attachment::Long | Attachment::Square,
            ..
        } => 1,
        ShapeClass::QuasiSquareProt { .. } => 2,
        ShapeClass::RectangleProt {
            attached: Attachment::None,
            ..
        } => 3,
        ShapeClass::RectangleProt { .. } => 4,
        _ => 5,
    }
}

fn rect_class(h: usize, w: usize, prot: usize, attached: Attachment) -> ShapeClass {
    let (short, long) = (h.min(w), h.max(w));
    if long <= short + 1 {
        ShapeClass::QuasiSquareProt {
            short,
            long,
            prot,
            attached,
        }
    } else {
        ShapeClass::RectangleProt {
            short,
            long,
            prot,
            attached,
        }
    }
}

fn classify_planar(pts: &[(i64, i64)]) -> ShapeClass {
    let (h, w) = bbox(pts);
    let grid: HashSet<(usize, usize)> =
        pts.iter().map(|&(r, c)| (r as usize, c as usize)).collect();
    let mut options = Vec::new();
    if grid.len() == h * w {
        let whole = rect_class(h, w, 0, Attachment::None);
        if matches!(whole, ShapeClass::QuasiSquareProt { .. }) {
            return whole;
        }
        options.push(whole);
    }
    // Each option strips one boundary line of the bounding box.
    let lines: [(bool, usize); 4] = [(true, 0), (true, h - 1), (false, 0), (false, w - 1)];
    for (is_row, line) in lines {
        let (rh, rw) = if is_row { (h - 1, w) } else { (h, w - 1) };
        if rh == 0 || rw == 0 {
            continue;
        }
        let in_line = |&(r, c): &(usize, usize)| if is_row { r == line } else { c == line };
        let rest: Vec<(usize, usize)> = grid.iter().copied().filter(|p| !in_line(p)).collect();
        if rest.len() != rh * rw {
            continue;
        }
        let mut seg: Vec<usize> = grid
            .iter()
            .filter(|p| in_line(p))
            .map(|&(r, c)| if is_row { c } else { r })
            .collect();
        seg.sort_unstable();
        let contiguous = seg.windows(2).all(|p| p[1] == p[0] + 1);
        if !contiguous || seg.is_empty() {
            continue;
        }
        let (side_len, other) = if is_row { (rw, rh) } else { (rh, rw) };
        options.push(rect_class(rh, rw, seg.len(), attachment(side_len, other)));
    }
    options
        .into_iter()
        .min_by_key(rank)
        .unwrap_or(ShapeClass::Other)
}

fn classify_strip(m: &[bool], side: usize, vertical: bool) -> ShapeClass {
    let at = |line: usize, pos: usize| {
        if vertical {
            m[pos * side + line]
        } else {
            m[line * side + pos]
        }
    };
    let counts: Vec<usize> = (0..side)
        .map(|l| (0..side).filter(|&p| at(l, p)).count())
        .collect();
    let full: Vec<bool> = counts.iter().map(|&c| c == side).collect();
    let width = full.iter().filter(|&&f| f).count();
    if width == 0 || width == side || cyclic_runs(&full) != 1 {
        return ShapeClass::Other;
    }
    let partial: Vec<usize> = (0..side).filter(|&l| counts[l] > 0 && !full[l]).collect();
    match partial.as_slice() {
        [] => ShapeClass::StripProt {
            width,
            vertical,
            prot: 0,
        },
        [l] => {
            let adjacent = full[(l + 1) % side] || full[(l + side - 1) % side];
            let line: Vec<bool> = (0..side).map(|p| at(*l, p)).collect();
            if adjacent && cyclic_runs(&line) == 1 {
                ShapeClass::StripProt {
                    width,
                    vertical,
                    prot: counts[*l],
                }
            } else {
                ShapeClass::Other
            }
        }
        _ => ShapeClass::Other,
    }
}

/// Visits every edge-connected set of at most `max_area` cells containing cell 0,
/// each exactly once (Redelmeier's method on the torus graph).
fn for_each_rooted<F: FnMut(&[usize], usize)>(side: usize, max_area: usize, visit: &mut F) {
    let total = side * side;
    let mut reached = vec![false; total];
    let mut in_poly = vec![false; total];
    let mut poly = Vec::with_capacity(max_area);
    reached[0] = true;
    fn rec<F: FnMut(&[usize], usize)>(
        side: usize,
        max_area: usize,
        mut untried: Vec<usize>,
        poly: &mut Vec<usize>,
        perimeter: usize,
        reached: &mut [bool],
        in_poly: &mut [bool],
        visit: &mut F,
    ) {
        while let Some(v) = untried.pop() {
            let nbs = neighbors(v, side);
            let inside = nbs.iter().filter(|&&j| in_poly[j]).count();
            let perim = perimeter + 4 - 2 * inside;
            poly.push(v);
            in_poly[v] = true;
            visit(poly, perim);
            if poly.len() < max_area {
                let mut next = untried.clone();
                let mut added = Vec::new();
                for j in nbs {
                    if !reached[j] {
                        reached[j] = true;
                        added.push(j);
                        next.push(j);
                    }
                }
                rec(side, max_area, next, poly, perim, reached, in_poly, visit);
                for j in added {
                    reached[j] = false;
                }
            }
            in_poly[v] = false;
            poly.pop();
        }
    }
    rec(
        side,
        max_area,
        vec![0],
        &mut poly,
        0,
        &mut reached,
        &mut in_poly,
        visit,
    );
}

fn guard(area: usize, side: usize, area_cap: usize, side_cap: usize) -> Result<()> {
    if area == 0 || area > side * side {
        return Err(ModelError::Range(format!(
            "area {area} outside 1..={}",
            side * side
        )));
    }
    if area > area_cap || side > side_cap {
        return Err(ModelError::Guard(format!(
            "enumeration of area {area} on side {side} exceeds caps (area {area_cap}, side {side_cap})"
        )));
    }
    Ok(())
}

/// All polyominoes of the given area up to torus translation.
pub fn enumerate(area: usize, side: usize) -> Result<BTreeSet<Polyomino>> {
    enumerate_with_caps(area, side, DEFAULT_AREA_CAP, DEFAULT_SIDE_CAP)
}

pub fn enumerate_with_caps(
    area: usize,
    side: usize,
    area_cap: usize,
    side_cap: usize,
) -> Result<BTreeSet<Polyomino>> {
    guard(area, side, area_cap, side_cap)?;
    let mut out = BTreeSet::new();
    for_each_rooted(side, area, &mut |cells, _| {
        if cells.len() == area {
            out.insert(Polyomino {
                side,
                cells: canonical_cells(cells, side),
            });
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalShapes {
    pub area: usize,
    pub side: usize,
    pub winding: bool,
    pub min_perimeter: usize,
    pub minimizers: Vec<(Polyomino, ShapeClass)>,
}

impl MinimalShapes {
    /// Minimizers whose class is outside the expected family for their kind.
    pub fn unexpected(&self) -> Vec<&(Polyomino, ShapeClass)> {
        self.minimizers
            .iter()
            .filter(|(_, c)| {
                if self.winding {
                    !matches!(c, ShapeClass::StripProt { .. })
                } else {
                    !matches!(c, ShapeClass::QuasiSquareProt { .. })
                }
            })
            .collect()
    }

    /// Whether some minimizer belongs to the expected family.
    pub fn minimum_attained_by_family(&self) -> bool {
        self.unexpected().len() < self.minimizers.len()
    }

    pub fn class_summary(&self) -> String {
        let classes: BTreeSet<String> =
            self.minimizers.iter().map(|(_, c)| c.to_string()).collect();
        classes.into_iter().collect::<Vec<_>>().join("; ")
    }
}

/// Minimal edge perimeter for every area up to `max_area`, split by winding,
/// from a single enumeration pass. Entries are `None` when no shape exists.
pub fn minimal_perimeter_table(
    max_area: usize,
    side: usize,
) -> Result<Vec<[Option<MinimalShapes>; 2]>> {
    minimal_perimeter_table_with_caps(max_area, side, DEFAULT_AREA_CAP, DEFAULT_SIDE_CAP)
}

pub fn minimal_perimeter_table_with_caps(
    max_area: usize,
    side: usize,
    area_cap: usize,
    side_cap: usize,
) -> Result<Vec<[Option<MinimalShapes>; 2]>> {
    guard(max_area, side, area_cap, side_cap)?;
    let mut best = vec![[usize::MAX; 2]; max_area + 1];
    let mut found: Vec<[HashSet<Vec<usize>>; 2]> = (0..=max_area)
        .map(|_| [HashSet::new(), HashSet::new()])
        .collect();
    let mut seen = vec![false; side * side];
    let mut member = vec![false; side * side];
    for_each_rooted(side, max_area, &mut |cells, perim| {
        let a = cells.len();
        if perim > best[a][0].max(best[a][1])
            && best[a][0] != usize::MAX
            && best[a][1] != usize::MAX
        {
            return;
        }
        for &c in cells {
            member[c] = true;
        }
        let (_, w) = component_with_winding(side, cells[0], &mut seen, |j| member[j]);
        for &c in cells {
            member[c] = false;
            seen[c] = false;
        }
        let slot = w.winds() as usize;
        if perim < best[a][slot] {
            best[a][slot] = perim;
            found[a][slot].clear();
        }
        if perim == best[a][slot] {
            found[a][slot].insert(canonical_cells(cells, side));
        }
    });
    let mut table = Vec::with_capacity(max_area + 1);
    for a in 0..=max_area {
        let mut row: [Option<MinimalShapes>; 2] = [None, None];
        for slot in 0..2 {
            if best[a][slot] == usize::MAX {
                continue;
            }
            let mut minimizers: Vec<(Polyomino, ShapeClass)> = found[a][slot]
                .iter()
                .map(|cells| {
                    let p = Polyomino {
                        side,
                        cells: cells.clone(),
                    };
                    let c = p.classify();
                    (p, c)
                })
                .collect();
            minimizers.sort();
            row[slot] = Some(MinimalShapes {
                area: a,
                side,
                winding: slot == 1,
                min_perimeter: best[a][slot],
                minimizers,
            });
        }
        table.push(row);
    }
    Ok(table)
}

/// Minimal edge perimeter and classified minimizers for one area.
pub fn minimal_perimeter_shapes(
    area: usize,
    side: usize,
    winding_required: bool,
) -> Result<MinimalShapes> {
    if winding_required && area < side {
        return Err(ModelError::Range(format!(
            "winding shapes need area >= {side}"
        )));
    }
    let mut table = minimal_perimeter_table(area, side)?;
    table
        .swap_remove(area)
        .into_iter()
        .nth(winding_required as usize)
        .flatten()
        .ok_or_else(|| {
            ModelError::Range(format!(
                "no shape of area {area} with winding={winding_required}"
            ))
        })
}

/// CSV summary with columns `side,area,winding,min_perimeter,minimizer_count,classes`.
pub fn write_summary_csv<W: std::io::Write>(rows: &[MinimalShapes], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "side",
        "area",
        "winding",
        "min_perimeter",
        "minimizer_count",
        "classes",
    ])
    .map_err(|e| ModelError::Format(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.side.to_string(),
            r.area.to_string(),
            r.winding.to_string(),
            r.min_perimeter.to_string(),
            r.minimizers.len().to_string(),
            r.class_summary(),
        ])
        .map_err(|e| ModelError::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| ModelError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(side: usize, coords: &[(i64, i64)]) -> Polyomino {
        Polyomino::from_coords(side, coords).unwrap()
    }

    // Slow oracle: grow every set by one neighboring cell and deduplicate.
    fn slow_enumerate(area: usize, side: usize) -> BTreeSet<Vec<usize>> {
        let mut level: BTreeSet<Vec<usize>> = BTreeSet::from([vec![0]]);
        for _ in 1..area {
            let mut next = BTreeSet::new();
            for cells in &level {
                for &c in cells {
                    for nb in neighbors(c, side) {
                        if !cells.contains(&nb) {
                            let mut grown = cells.clone();
                            grown.push(nb);
                            next.insert(canonical_cells(&grown, side));
                        }
                    }
                }
            }
            level = next;
        }
        level
    }

    #[test]
    fn perimeters() {
        assert_eq!(poly(8, &[(0, 0)]).edge_perimeter(), 4);
        assert_eq!(poly(8, &[(0, 0)]).site_perimeter(), 4);
        assert_eq!(poly(8, &[(0, 0), (0, 1)]).site_perimeter(), 6);
        let sq: Vec<(i64, i64)> = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).collect();
        assert_eq!(poly(8, &sq).edge_perimeter(), 12);
        for w in 1..4 {
            let strip: Vec<(i64, i64)> = (0..8).flat_map(|r| (0..w).map(move |c| (r, c))).collect();
            let p = poly(8, &strip);
            assert_eq!(p.edge_perimeter(), 16);
            if w == 1 {
                assert_eq!(p.site_perimeter(), 16);
            }
        }
    }

    #[test]
    fn strip_perimeter_matches_configuration_contour() {
        use crate::{ModelSpec, SpinConfiguration};
        use std::sync::Arc;
        let spec = Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap());
        let cells: Vec<usize> = (0..64).filter(|i| i % 8 < 2).collect();
        let p = Polyomino::new(8, &cells).unwrap();
        let c = SpinConfiguration::from_plus_sites(&spec, cells);
        assert_eq!(p.edge_perimeter(), c.contour_length());
    }

    #[test]
    fn predicate_examples() {
        let ring: Vec<(i64, i64)> = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .filter(|&p| p != (1, 1))
            .collect();
        assert!(poly(8, &ring).predicates().has_hole);
        let l = poly(8, &[(0, 0), (1, 0), (1, 1)]).predicates();
        assert!(l.is_convex && !l.has_hole && l.concavities.is_empty());
        let u = poly(8, &[(0, 0), (0, 2), (1, 0), (1, 1), (1, 2)]).predicates();
        assert!(!u.is_convex);
        assert_eq!(
            u.concavities,
            vec![Concavity {
                cardinality: 1,
                width: 1
            }]
        );
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate(1, 6).unwrap().len(), 1);
        assert_eq!(enumerate(2, 6).unwrap().len(), 2);
        assert_eq!(enumerate(3, 6).unwrap().len(), 6);
        assert_eq!(enumerate(4, 6).unwrap().len(), 19);
        assert_eq!(enumerate(5, 8).unwrap().len(), 63);
        assert!(matches!(enumerate(13, 8), Err(ModelError::Guard(_))));
    }

    #[test]
    fn enumeration_matches_slow_oracle_on_small_tori() {
        for side in [4, 5] {
            for area in 1..=7 {
                let fast: BTreeSet<Vec<usize>> = enumerate(area, side)
                    .unwrap()
                    .into_iter()
                    .map(|p| p.cells)
                    .collect();
                assert_eq!(fast, slow_enumerate(area, side), "side {side} area {area}");
            }
        }
    }

    #[test]
    fn enumeration_closed_under_translation() {
        let set = enumerate(4, 6).unwrap();
        for p in &set {
            for dr in 0..6 {
                let t = translate(&p.cells, 6, dr, (dr * 5) % 6);
                assert!(set.contains(&Polyomino {
                    side: 6,
                    cells: canonical_cells(&t, 6)
                }));
            }
        }
    }

    #[test]
    fn classification() {
        assert!(matches!(
            poly(8, &[(0, 0), (1, 0), (1, 1)]).classify(),
            ShapeClass::QuasiSquareProt {
                short: 1,
                long: 2,
                prot: 1,
                attached: Attachment::Long
            }
        ));
        assert!(matches!(
            poly(8, &[(0, 0), (0, 1), (0, 2)]).classify(),
            ShapeClass::QuasiSquareProt {
                short: 1,
                long: 2,
                prot: 1,
                attached: Attachment::Short
            }
        ));
        let strip: Vec<(i64, i64)> = (0..6).map(|r| (r, 2)).chain([(3, 3)]).collect();
        assert_eq!(
            poly(6, &strip).classify(),
            ShapeClass::StripProt {
                width: 1,
                vertical: true,
                prot: 1
            }
        );
        let skew = poly(8, &[(0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1)]);
        assert_eq!(skew.classify(), ShapeClass::Other);
    }

    #[test]
    fn removing_protuberance_reduces_perimeter_by_two() {
        for p in enumerate(7, 6).unwrap() {
            let class = p.classify();
            let has_prot = matches!(
                class,
                ShapeClass::QuasiSquareProt { prot: 1.., .. }
                    | ShapeClass::StripProt { prot: 1.., .. }
            );
            if has_prot {
                let base = p.base_shape().expect("base exists");
                assert_eq!(
                    p.edge_perimeter(),
                    base.edge_perimeter() + 2,
                    "{p:?} {class}"
                );
            }
        }
    }

    #[test]
    fn minimal_shapes_examples() {
        for side in [4, 6, 8] {
            let r = minimal_perimeter_shapes(side, side, true).unwrap();
            assert_eq!(r.min_perimeter, 2 * side);
            assert!(r.minimizers.iter().all(|(_, c)| matches!(
                c,
                ShapeClass::StripProt {
                    width: 1,
                    prot: 0,
                    ..
                }
            )));
        }
        let r = minimal_perimeter_shapes(6, 8, false).unwrap();
        assert_eq!(r.min_perimeter, 10);
        assert!(r.minimizers.iter().all(|(_, c)| matches!(
            c,
            ShapeClass::QuasiSquareProt {
                short: 2,
                long: 3,
                prot: 0,
                ..
            }
        )));
        let r = minimal_perimeter_shapes(7, 6, true).unwrap();
        assert_eq!(r.min_perimeter, 14);
        assert!(r.minimizers.iter().all(|(_, c)| matches!(
            c,
            ShapeClass::StripProt {
                width: 1,
                prot: 1,
                ..
            }
        )));
    }

    #[test]
    fn non_winding_lower_bound() {
        for p in enumerate(6, 6).unwrap() {
            if !p.is_winding() {
                assert!(p.edge_perimeter() as f64 >= 4.0 * (p.area() as f64).sqrt());
            }
        }
    }
}
