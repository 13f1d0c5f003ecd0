//! Named configuration families, reference single-flip paths and the
//! closed-form saddle heights they are compared against.
//!
//! Conventions: families in zone `A` put `+1` on the described set and `-1`
//! elsewhere; families in zone `B` (and the outer zone `S1 ∪ B ∪ S2`) put `-1`
//! on the set and `+1` elsewhere. Clusters are anchored at row 0 and at the
//! zone's first column. A protuberance is the first cell of the next row.

use crate::config::SpinConfiguration;
use crate::error::{ModelError, Result};
use crate::lattice::{format_rational, ModelSpec, Regime};
use crate::Energy;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Zone {
    A,
    B,
    /// `S1 ∪ B ∪ S2`, the columns outside `A`.
    Outer,
}

impl Zone {
    /// Columns of the zone, left to right.
    pub fn columns(self, spec: &ModelSpec) -> Vec<usize> {
        match self {
            Zone::A => (0..spec.n).collect(),
            Zone::B => (spec.n + spec.k..spec.n + spec.k + spec.m).collect(),
            Zone::Outer => (spec.n..spec.side).collect(),
        }
    }

    fn plus_inside(self) -> bool {
        self == Zone::A
    }

    fn configuration(self, spec: &Arc<ModelSpec>, cells: &[usize]) -> SpinConfiguration {
        if self.plus_inside() {
            SpinConfiguration::from_plus_sites(spec, cells.iter().copied())
        } else {
            SpinConfiguration::from_minus_sites(spec, cells.iter().copied())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedFamily {
    /// `A` plus the `near` columns of `S1` and the `far` columns of `S2` closest to `A`.
    SigmaA {
        near: usize,
        far: usize,
    },
    /// `cols x rows` rectangle with a protuberance of `prot` cells on the next row.
    RectProt {
        zone: Zone,
        cols: usize,
        rows: usize,
        prot: usize,
    },
    QuasiSquareProt {
        zone: Zone,
        side: usize,
        prot: usize,
    },
    /// `full` adjacent columns whose first lies at distance `offset` from the
    /// zone's `S1` side, plus a partial column of `partial` cells placed after
    /// the last full column (`trailing`) or before the first.
    Column {
        zone: Zone,
        offset: usize,
        full: usize,
        partial: usize,
        trailing: bool,
    },
    GateGA,
    GateGB,
    GateRA,
    GateRB,
    GateCA,
    GateCB,
}

impl fmt::Display for NamedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let zone = |z: &Zone| match z {
            Zone::A => "A",
            Zone::B => "B",
            Zone::Outer => "S",
        };
        match self {
            NamedFamily::SigmaA { near, far } => write!(f, "sigma_A({near},{far})"),
            NamedFamily::RectProt {
                zone: z,
                cols,
                rows,
                prot,
            } => write!(f, "R_{}({cols},{rows},{prot})", zone(z)),
            NamedFamily::QuasiSquareProt {
                zone: z,
                side,
                prot,
            } => write!(f, "Q_{}({side},{prot})", zone(z)),
            NamedFamily::Column {
                zone: z,
                offset,
                full,
                partial,
                ..
            } => write!(f, "C_{}({offset},{full},{partial})", zone(z)),
            NamedFamily::GateGA => f.write_str("G_A"),
            NamedFamily::GateGB => f.write_str("G_B"),
            NamedFamily::GateRA => f.write_str("R_A"),
            NamedFamily::GateRB => f.write_str("R_B"),
            NamedFamily::GateCA => f.write_str("C_A"),
            NamedFamily::GateCB => f.write_str("C_B"),
        }
    }
}

fn site(spec: &ModelSpec, row: usize, col: usize) -> usize {
    (row % spec.side) * spec.side + col % spec.side
}

fn range_err(msg: impl Into<String>) -> ModelError {
    ModelError::Range(msg.into())
}

fn rect_cells(spec: &ModelSpec, cols: &[usize], rows: usize, prot: usize) -> Vec<usize> {
    let mut cells: Vec<usize> = (0..rows)
        .flat_map(|r| cols.iter().map(move |&c| (r, c)))
        .map(|(r, c)| site(spec, r, c))
        .collect();
    cells.extend(cols.iter().take(prot).map(|&c| site(spec, rows, c)));
    cells
}

/// Column of the zone at distance `d >= 1` from its `S1` side.
fn column_at(spec: &ModelSpec, zone: Zone, d: usize) -> Option<usize> {
    let width = zone.columns(spec).len();
    if d == 0 || d > width {
        return None;
    }
    Some(match zone {
        Zone::A => spec.n - d,
        Zone::B | Zone::Outer => zone.columns(spec)[d - 1],
    })
}

/// Build a named family: a single configuration, or every placement for the
/// gate families.
pub fn build_family(spec: &Arc<ModelSpec>, family: NamedFamily) -> Result<Vec<SpinConfiguration>> {
    let side = spec.side;
    match family {
        NamedFamily::SigmaA { near, far } => {
            if near > spec.k || far > spec.k {
                return Err(range_err(format!(
                    "neutral depths ({near}, {far}) exceed k = {}",
                    spec.k
                )));
            }
            Ok(vec![sigma_a(spec, near, far)])
        }
        NamedFamily::RectProt {
            zone,
            cols,
            rows,
            prot,
        } => {
            let zc = zone.columns(spec);
            if cols == 0 || rows == 0 || cols > zc.len() || rows > side {
                return Err(range_err(format!(
                    "{cols}x{rows} rectangle does not fit zone {zone:?}"
                )));
            }
            if prot >= cols.max(2) || (rows == side && prot > 0) {
                return Err(range_err(format!(
                    "protuberance {prot} out of range for {cols}x{rows}"
                )));
            }
            Ok(vec![zone.configuration(
                spec,
                &rect_cells(spec, &zc[..cols], rows, prot),
            )])
        }
        NamedFamily::QuasiSquareProt {
            zone,
            side: l,
            prot,
        } => {
            if prot >= l.max(1) && !(l == 1 && prot <= 1) {
                return Err(range_err(format!(
                    "protuberance {prot} out of range for {l}x{l}"
                )));
            }
            build_family(
                spec,
                NamedFamily::RectProt {
                    zone,
                    cols: l,
                    rows: l,
                    prot,
                },
            )
        }
        NamedFamily::Column {
            zone,
            offset,
            full,
            partial,
            trailing,
        } => {
            if offset == 0 || partial > side {
                return Err(range_err(
                    "column offset must be positive and partial at most N",
                ));
            }
            let mut cells = Vec::new();
            for d in offset..offset + full {
                let c = column_at(spec, zone, d)
                    .ok_or_else(|| range_err(format!("column distance {d} outside zone")))?;
                cells.extend((0..side).map(|r| site(spec, r, c)));
            }
            if partial > 0 {
                let d = if trailing {
                    offset + full
                } else {
                    offset.wrapping_sub(1)
                };
                let c = column_at(spec, zone, d).ok_or_else(|| {
                    range_err(format!("partial column distance {d} outside zone"))
                })?;
                cells.extend((0..partial).map(|r| site(spec, r, c)));
            }
            Ok(vec![zone.configuration(spec, &cells)])
        }
        NamedFamily::GateGA | NamedFamily::GateGB => {
            let zone = if family == NamedFamily::GateGA {
                Zone::A
            } else {
                Zone::B
            };
            let a = alpha_int(spec)?;
            let width = zone.columns(spec).len();
            if a < 2 || a > width {
                return Err(ModelError::Regime(format!(
                    "critical rectangle {a}x{} does not fit zone {zone:?} of width {width}",
                    a - 1
                )));
            }
            let mut out = placements(spec, zone, a, a - 1);
            out.extend(placements(spec, zone, a - 1, a));
            Ok(dedup(spec, zone, out))
        }
        NamedFamily::GateRA | NamedFamily::GateRB => {
            let zone = if family == NamedFamily::GateRA {
                Zone::A
            } else {
                Zone::B
            };
            let width = zone.columns(spec).len();
            let mut out = Vec::new();
            for rows in width.saturating_sub(1).max(1)..=side - 2 {
                out.extend(placements(spec, zone, width, rows));
            }
            if width >= 2 {
                out.extend(placements(spec, zone, width - 1, width));
            }
            Ok(dedup(spec, zone, out))
        }
        NamedFamily::GateCA | NamedFamily::GateCB => {
            let zone = if family == NamedFamily::GateCA {
                Zone::A
            } else {
                Zone::B
            };
            let zc = zone.columns(spec);
            let mut out = Vec::new();
            for (i, &c) in zc.iter().enumerate() {
                let column: Vec<usize> = (0..side).map(|r| site(spec, r, c)).collect();
                for j in [i.wrapping_sub(1), i + 1] {
                    if let Some(&adj) = zc.get(j) {
                        for r in 0..side {
                            let mut cells = column.clone();
                            cells.push(site(spec, r, adj));
                            out.push(cells);
                        }
                    }
                }
            }
            Ok(dedup(spec, zone, out))
        }
    }
}

fn alpha_int(spec: &ModelSpec) -> Result<usize> {
    if !spec.alpha.is_integer() || *spec.alpha.numer() < 0 {
        return Err(ModelError::Regime(format!(
            "alpha = {} is not a non-negative integer",
            spec.alpha
        )));
    }
    Ok(*spec.alpha.numer() as usize)
}

fn dedup(spec: &Arc<ModelSpec>, zone: Zone, cell_sets: Vec<Vec<usize>>) -> Vec<SpinConfiguration> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for cells in cell_sets {
        let c = zone.configuration(spec, &cells);
        if seen.insert(c.words().to_vec()) {
            out.push(c);
        }
    }
    out
}

/// Every translate of a `cols x rows` rectangle inside the zone together with
/// one protuberance cell on a longest side whose adjacent line stays in the
/// zone (the other sides when no longest side qualifies).
fn placements(spec: &ModelSpec, zone: Zone, cols: usize, rows: usize) -> Vec<Vec<usize>> {
    let zc = zone.columns(spec);
    let side = spec.side;
    if cols == 0 || rows == 0 || cols > zc.len() || rows + 1 > side {
        return Vec::new();
    }
    let mut out = Vec::new();
    for c0 in 0..=zc.len() - cols {
        let ccols = &zc[c0..c0 + cols];
        let vertical_ok = c0 > 0 || c0 + cols < zc.len();
        let use_horizontal = cols >= rows || !vertical_ok;
        let use_vertical = vertical_ok && rows >= cols;
        for r0 in 0..side {
            let base: Vec<usize> = (0..rows)
                .flat_map(|r| ccols.iter().map(move |&c| (r0 + r, c)))
                .map(|(r, c)| site(spec, r, c))
                .collect();
            if use_horizontal {
                for &c in ccols {
                    for r in [r0 + side - 1, r0 + rows] {
                        let mut cells = base.clone();
                        cells.push(site(spec, r, c));
                        out.push(cells);
                    }
                }
            }
            if use_vertical {
                for adj in [c0.wrapping_sub(1), c0 + cols] {
                    if let Some(&c) = zc.get(adj) {
                        for r in 0..rows {
                            let mut cells = base.clone();
                            cells.push(site(spec, r0 + r, c));
                            out.push(cells);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn sigma_a(spec: &Arc<ModelSpec>, near: usize, far: usize) -> SpinConfiguration {
    let n = spec.n;
    let mut cols: Vec<usize> = (0..n + near).collect();
    cols.extend((spec.side - far..spec.side).filter(|_| far > 0));
    SpinConfiguration::from_plus_sites(
        spec,
        cols.iter()
            .flat_map(|&c| (0..spec.side).map(move |r| r * spec.side + c)),
    )
}

/// The stable target family `{σ_A(ℓ, p) : 0 <= ℓ, p <= k}`.
pub fn sigma_a_family(spec: &Arc<ModelSpec>) -> Vec<SpinConfiguration> {
    (0..=spec.k)
        .flat_map(|l| (0..=spec.k).map(move |p| (l, p)))
        .map(|(l, p)| sigma_a(spec, l, p))
        .collect()
}

/// Global minimizers of the regime.
pub fn stable_set(spec: &Arc<ModelSpec>) -> Result<Vec<SpinConfiguration>> {
    let minus = SpinConfiguration::all_minus(spec);
    let plus = SpinConfiguration::all_plus(spec);
    let equal = spec.n == spec.m;
    Ok(match spec.classify_regime() {
        Regime::Unsupported => {
            return Err(ModelError::Regime(
                "stable set is tabulated only for supported regimes".into(),
            ))
        }
        Regime::LowAlpha => sigma_a_family(spec),
        Regime::CriticalEqual => [vec![minus, plus], sigma_a_family(spec)].concat(),
        Regime::CriticalStrict => [vec![minus], sigma_a_family(spec)].concat(),
        _ if equal => vec![minus, plus],
        _ => vec![minus],
    })
}

/// Metastable states of the regime. Empty where no metastable set is
/// tabulated (the critical regimes and the symmetric high-alpha cases).
pub fn metastable_set(spec: &Arc<ModelSpec>) -> Result<Vec<SpinConfiguration>> {
    let equal = spec.n == spec.m;
    Ok(match spec.classify_regime() {
        Regime::Unsupported => {
            return Err(ModelError::Regime(
                "metastable set is tabulated only for supported regimes".into(),
            ))
        }
        Regime::LowAlpha => vec![
            SpinConfiguration::all_minus(spec),
            SpinConfiguration::all_plus(spec),
        ],
        Regime::CriticalEqual | Regime::CriticalStrict => Vec::new(),
        _ if equal => Vec::new(),
        _ => vec![SpinConfiguration::all_plus(spec)],
    })
}

/// Reference path names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathName {
    /// Quasi-square growth of `+1` inside `A` from `-1`.
    Bar1,
    /// Row-by-row growth of the `+1` rectangle in `A` up to the full strip.
    Bar2,
    /// Quasi-square growth of `-1` inside `B` from `+1`.
    Tilde1,
    Tilde2,
    /// Continued quasi-square growth spilling symmetrically into `S1` and `S2`.
    Tilde3,
    Tilde4,
    Tilde5,
    /// Column-by-column erasure of `A`.
    Tilde6,
    /// Column-by-column erasure of the neutral strips, then of `A`.
    Tilde7,
    /// Column-by-column filling of `B` with `-1` from `+1`.
    Prime,
    BarStar1,
    BarStar2,
    BarStar3,
    Star1,
    Star2,
    Star3,
    Star4,
}

impl PathName {
    pub const ALL: [PathName; 17] = [
        PathName::Bar1,
        PathName::Tilde1,
        PathName::Bar2,
        PathName::Tilde2,
        PathName::Tilde3,
        PathName::Tilde4,
        PathName::Tilde5,
        PathName::Tilde6,
        PathName::Tilde7,
        PathName::Prime,
        PathName::BarStar1,
        PathName::BarStar2,
        PathName::BarStar3,
        PathName::Star1,
        PathName::Star2,
        PathName::Star3,
        PathName::Star4,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PathName::Bar1 => "wbar1",
            PathName::Bar2 => "wbar2",
            PathName::Tilde1 => "wtilde1",
            PathName::Tilde2 => "wtilde2",
            PathName::Tilde3 => "wtilde3",
            PathName::Tilde4 => "wtilde4",
            PathName::Tilde5 => "wtilde5",
            PathName::Tilde6 => "wtilde6",
            PathName::Tilde7 => "wtilde7",
            PathName::Prime => "wprime",
            PathName::BarStar1 => "wbarstar1",
            PathName::BarStar2 => "wbarstar2",
            PathName::BarStar3 => "wbarstar3",
            PathName::Star1 => "wstar1",
            PathName::Star2 => "wstar2",
            PathName::Star3 => "wstar3",
            PathName::Star4 => "wstar4",
        }
    }

    /// Whether the path is defined for the spec's regime.
    pub fn valid_for(self, spec: &ModelSpec) -> bool {
        let regime = spec.classify_regime();
        let low = matches!(
            regime,
            Regime::LowAlpha | Regime::CriticalEqual | Regime::CriticalStrict
        );
        let high = matches!(
            regime,
            Regime::MidAlpha | Regime::HighAlpha | Regime::VeryHighAlpha
        );
        match self {
            PathName::Bar1 | PathName::Bar2 | PathName::BarStar1 | PathName::BarStar2 => low,
            PathName::BarStar3 => regime == Regime::CriticalEqual,
            PathName::Tilde1 | PathName::Tilde2 => low || high,
            _ => high,
        }
    }
}

impl fmt::Display for PathName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PathName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let key = key.replace('w', "").replace('ω', "");
        PathName::ALL
            .into_iter()
            .find(|p| p.label().trim_start_matches('w') == key)
            .ok_or_else(|| ModelError::Format(format!("unknown path name {s:?}")))
    }
}

/// A single-flip path with its energy profile.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub states: Vec<SpinConfiguration>,
    pub elevations: Vec<Energy>,
    pub max_elevation: Energy,
    pub saddle_indices: Vec<usize>,
}

impl PathRecord {
    pub fn from_states(states: Vec<SpinConfiguration>) -> Self {
        let elevations: Vec<Energy> = states.iter().map(|s| s.energy()).collect();
        let max_elevation = *elevations.iter().max().expect("nonempty path");
        let saddle_indices = (0..elevations.len())
            .filter(|&i| elevations[i] == max_elevation)
            .collect();
        PathRecord {
            states,
            elevations,
            max_elevation,
            saddle_indices,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &SpinConfiguration {
        &self.states[0]
    }

    pub fn last(&self) -> &SpinConfiguration {
        self.states.last().expect("nonempty path")
    }

    pub fn is_valid(&self) -> bool {
        self.states.windows(2).all(|w| w[0].hamming(&w[1]) == 1)
            && self
                .elevations
                .iter()
                .zip(&self.states)
                .all(|(e, s)| *e == s.hamiltonian_direct())
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| ModelError::Format(e.to_string());
        w.write_record(["step", "energy", "is_saddle"])
            .map_err(err)?;
        for (i, e) in self.elevations.iter().enumerate() {
            let saddle = self.saddle_indices.binary_search(&i).is_ok();
            w.write_record([i.to_string(), format_rational(e), saddle.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| ModelError::Format(e.to_string()))
    }
}

/// Incremental construction of a single-flip path.
struct Walk {
    states: Vec<SpinConfiguration>,
}

impl Walk {
    fn new(start: SpinConfiguration) -> Self {
        Walk {
            states: vec![start],
        }
    }

    fn current(&self) -> &SpinConfiguration {
        self.states.last().expect("nonempty")
    }

    fn set(&mut self, site: usize, plus: bool) {
        if self.current().is_plus(site) != plus {
            let next = self.current().flipped(site);
            self.states.push(next);
        }
    }

    fn fill_column(&mut self, spec: &ModelSpec, col: usize, plus: bool) {
        for r in 0..spec.side {
            self.set(site(spec, r, col), plus);
        }
    }

    fn append(&mut self, other: Walk) {
        assert_eq!(self.current(), &other.states[0]);
        self.states.extend(other.states.into_iter().skip(1));
    }
}

/// Rectangular cluster occupying rows `0..rows` of an ordered column list,
/// drawn with `plus` spins.
struct Cluster {
    cols: VecDeque<usize>,
    rows: usize,
    plus: bool,
}

impl Cluster {
    fn add_row(&mut self, walk: &mut Walk, spec: &ModelSpec) {
        let mut cols: Vec<usize> = self.cols.iter().copied().collect();
        cols.sort_unstable();
        for c in cols {
            walk.set(site(spec, self.rows, c), self.plus);
        }
        self.rows += 1;
    }

    fn add_col(&mut self, walk: &mut Walk, spec: &ModelSpec, col: usize, front: bool) {
        for r in 0..self.rows {
            walk.set(site(spec, r, col), self.plus);
        }
        if front {
            self.cols.push_front(col);
        } else {
            self.cols.push_back(col);
        }
    }

    /// Grow by alternating full rows and columns, each added one cell at a
    /// time, until the cluster is `max_cols x max_rows`. Columns are taken
    /// from `col_source`, which yields `(column, at_front)`.
    fn grow_quasi_square<F>(
        &mut self,
        walk: &mut Walk,
        spec: &ModelSpec,
        max_cols: usize,
        max_rows: usize,
        mut col_source: F,
    ) where
        F: FnMut(&VecDeque<usize>) -> Option<(usize, bool)>,
    {
        loop {
            let (w, h) = (self.cols.len(), self.rows);
            let want_row = h < max_rows && (h <= w || w >= max_cols);
            let want_col = w < max_cols && (w < h || h >= max_rows);
            if want_row {
                self.add_row(walk, spec);
            } else if want_col {
                match col_source(&self.cols) {
                    Some((c, front)) => self.add_col(walk, spec, c, front),
                    None => break,
                }
            } else {
                break;
            }
        }
    }
}

/// Column source extending the cluster to the right within `zone_cols`.
fn rightward(zone_cols: Vec<usize>) -> impl FnMut(&VecDeque<usize>) -> Option<(usize, bool)> {
    move |cols: &VecDeque<usize>| zone_cols.get(cols.len()).map(|&c| (c, false))
}

/// Column source alternating left and right of the current cluster on the torus.
fn alternating(
    side: usize,
    allowed: Vec<bool>,
) -> impl FnMut(&VecDeque<usize>) -> Option<(usize, bool)> {
    let mut left_next = true;
    move |cols: &VecDeque<usize>| {
        let left = (cols.front()? + side - 1) % side;
        let right = (cols.back()? + 1) % side;
        let free = |c: usize| allowed[c] && !cols.contains(&c);
        let choice = if left_next && free(left) {
            Some((left, true))
        } else if free(right) {
            Some((right, false))
        } else if free(left) {
            Some((left, true))
        } else {
            None
        };
        left_next = !left_next;
        choice
    }
}

fn start_cluster(walk: &mut Walk, spec: &ModelSpec, col: usize, plus: bool) -> Cluster {
    walk.set(site(spec, 0, col), plus);
    Cluster {
        cols: VecDeque::from([col]),
        rows: 1,
        plus,
    }
}

fn bar1(spec: &Arc<ModelSpec>) -> (Walk, Cluster) {
    let mut walk = Walk::new(SpinConfiguration::all_minus(spec));
    let a = Zone::A.columns(spec);
    let mut cl = start_cluster(&mut walk, spec, a[0], true);
    cl.grow_quasi_square(&mut walk, spec, spec.n, spec.n + 1, rightward(a));
    (walk, cl)
}

fn tilde1(spec: &Arc<ModelSpec>) -> (Walk, Cluster) {
    let mut walk = Walk::new(SpinConfiguration::all_plus(spec));
    let b = Zone::B.columns(spec);
    let mut cl = start_cluster(&mut walk, spec, b[0], false);
    cl.grow_quasi_square(&mut walk, spec, spec.m, spec.m + 1, rightward(b));
    (walk, cl)
}

/// Row-by-row growth of a full-width cluster until it wraps vertically.
fn grow_rows(walk: &mut Walk, spec: &ModelSpec, cl: &mut Cluster) {
    while cl.rows < spec.side {
        cl.add_row(walk, spec);
    }
}

fn tilde3(spec: &Arc<ModelSpec>) -> (Walk, Cluster) {
    let (first, cl) = tilde1(spec);
    let mut walk = Walk::new(first.current().clone());
    let mut cl = cl;
    let mut allowed = vec![false; spec.side];
    Zone::Outer
        .columns(spec)
        .into_iter()
        .for_each(|c| allowed[c] = true);
    let width = Zone::Outer.columns(spec).len();
    cl.grow_quasi_square(
        &mut walk,
        spec,
        width,
        width + 1,
        alternating(spec.side, allowed),
    );
    (walk, cl)
}

fn erase_columns(walk: &mut Walk, spec: &ModelSpec, cols: impl IntoIterator<Item = usize>) {
    for c in cols {
        walk.fill_column(spec, c, false);
    }
}

fn tilde6(spec: &Arc<ModelSpec>) -> Walk {
    let mut walk = Walk::new(sigma_a(spec, 0, 0));
    erase_columns(&mut walk, spec, (0..spec.n).rev());
    walk
}

fn tilde7(spec: &Arc<ModelSpec>) -> Walk {
    let mut walk = Walk::new(sigma_a(spec, spec.k, spec.k));
    let (n, k, m) = (spec.n, spec.k, spec.m);
    erase_columns(&mut walk, spec, (n..n + k).rev());
    erase_columns(&mut walk, spec, n + k + m..spec.side);
    walk.append(tilde6(spec));
    walk
}

fn prime(spec: &Arc<ModelSpec>) -> Walk {
    let mut walk = Walk::new(SpinConfiguration::all_plus(spec));
    erase_columns(&mut walk, spec, Zone::B.columns(spec));
    walk
}

fn path_walk(spec: &Arc<ModelSpec>, name: PathName) -> Walk {
    match name {
        PathName::Bar1 => bar1(spec).0,
        PathName::Tilde1 => tilde1(spec).0,
        PathName::Bar2 => {
            let (w, mut cl) = bar1(spec);
            let mut walk = Walk::new(w.current().clone());
            grow_rows(&mut walk, spec, &mut cl);
            walk
        }
        PathName::Tilde2 => {
            let (w, mut cl) = tilde1(spec);
            let mut walk = Walk::new(w.current().clone());
            grow_rows(&mut walk, spec, &mut cl);
            walk
        }
        PathName::Tilde3 => tilde3(spec).0,
        PathName::Tilde4 => {
            let (w, mut cl) = tilde3(spec);
            let mut walk = Walk::new(w.current().clone());
            grow_rows(&mut walk, spec, &mut cl);
            walk
        }
        PathName::Tilde5 => {
            let (w, mut cl) = tilde3(spec);
            let mut walk = Walk::new(w.current().clone());
            let side = spec.side;
            cl.grow_quasi_square(
                &mut walk,
                spec,
                side,
                side,
                alternating(side, vec![true; side]),
            );
            walk
        }
        PathName::Tilde6 => tilde6(spec),
        PathName::Tilde7 => tilde7(spec),
        PathName::Prime => prime(spec),
        PathName::BarStar1 => concat(spec, &[PathName::Tilde1, PathName::Tilde2]),
        PathName::BarStar2 => concat(spec, &[PathName::Bar1, PathName::Bar2]),
        PathName::BarStar3 => {
            let mut walk = concat(spec, &[PathName::Bar1, PathName::Bar2]);
            // move within the stable family from σ_A(0,0) to σ_A(k,k)
            let (n, k, m) = (spec.n, spec.k, spec.m);
            for c in (n..n + k).chain((n + k + m..spec.side).rev()) {
                walk.fill_column(spec, c, true);
            }
            let mut back = concat(spec, &[PathName::Tilde1, PathName::Tilde2]);
            back.states.reverse();
            walk.append(back);
            walk
        }
        PathName::Star1 => concat(spec, &[PathName::Prime, PathName::Tilde7]),
        PathName::Star2 => concat(
            spec,
            &[PathName::Tilde1, PathName::Tilde2, PathName::Tilde7],
        ),
        PathName::Star3 => concat(
            spec,
            &[
                PathName::Tilde1,
                PathName::Tilde3,
                PathName::Tilde4,
                PathName::Tilde6,
            ],
        ),
        PathName::Star4 => concat(
            spec,
            &[PathName::Tilde1, PathName::Tilde3, PathName::Tilde5],
        ),
    }
}

fn concat(spec: &Arc<ModelSpec>, parts: &[PathName]) -> Walk {
    let mut walk = path_walk(spec, parts[0]);
    for &p in &parts[1..] {
        walk.append(path_walk(spec, p));
    }
    walk
}

/// Concrete single-flip realization of a named reference path.
pub fn build_reference_path(spec: &Arc<ModelSpec>, name: PathName) -> Result<PathRecord> {
    if !name.valid_for(spec) {
        return Err(ModelError::Regime(format!(
            "{name} is not defined in regime {}",
            spec.classify_regime()
        )));
    }
    Ok(PathRecord::from_states(path_walk(spec, name).states))
}

/// The closed form for the maximal energy along a named path, or
/// `None` when no closed form is given for that path and regime.
pub fn closed_form_phi(spec: &ModelSpec, name: PathName) -> Result<Option<Energy>> {
    if !name.valid_for(spec) {
        return Err(ModelError::Regime(format!(
            "{name} is not defined in regime {}",
            spec.classify_regime()
        )));
    }
    let e = Energy::from_integer;
    let (nn, n, m, k) = (
        e(spec.side as i64),
        e(spec.n as i64),
        e(spec.m as i64),
        e(spec.k as i64),
    );
    let a = spec.alpha;
    let two = e(2);
    let h_plus = spec.energy_all_plus();
    let low = spec.alpha <= n;
    let g = (m / two).max(n + 1);
    let form = |name: PathName| -> Option<Energy> {
        let rel = match name {
            PathName::Prime => {
                two * (nn * m - nn - 1 - nn * n) + two * a * (nn + 1) + two * nn * (n - m)
            }
            PathName::Tilde1 if a <= m => {
                two * (nn * m - a * (a + 1) - 1 - nn * n)
                    + two * a * (two * a + two)
                    + two * nn * (n - m)
            }
            PathName::Tilde1 => {
                two * (nn * m - m * (m + 1) - 1 - nn * n)
                    + two * a * (two * m + two)
                    + two * nn * (n - m)
            }
            PathName::Tilde2 => {
                two * (nn * m - m * (nn - two) - 1 - nn * n)
                    + two * a * (m + nn - 1)
                    + two * nn * (n - m)
            }
            PathName::Tilde3 if a >= g => {
                let w = two * k + m;
                two * (nn * m - w * (w + 1) - 1 - nn * n)
                    + two * a * (two * w + two)
                    + two * nn * (n - m)
            }
            PathName::Tilde3 => {
                two * (nn * m - m * (m + 1) - 1 - nn * n)
                    + two * a * (two * m + two)
                    + two * nn * (n - m)
            }
            PathName::Tilde4 => {
                let w = two * k + m;
                two * (nn * m - w * (nn - two) - 1 - nn * n)
                    + two * a * (w + nn - 1)
                    + two * nn * (n - m)
            }
            PathName::Tilde5 => {
                two * (nn * m - (nn - two) * (nn - two) - 1 - nn * n + (n - two) * (nn - two))
                    + two * a * (two * nn - 3)
                    + two * nn * (n - m)
            }
            PathName::Tilde6 | PathName::Tilde7 => {
                two * (nn * n - nn - 1 - nn * m) + two * a * (nn + 1) + two * nn * (m - n)
            }
            _ => return None,
        };
        Some(h_plus + rel)
    };
    // Rectangle energies in B used by the low-alpha upper bound.
    let b_rect = |cols: Energy, rows: Energy, prot: Energy| {
        let ind = if prot != e(0) { e(1) } else { e(0) };
        nn * (n - m) - a * nn * nn
            + two * (nn * m - cols * rows - prot - nn * n)
            + two * a * (cols + rows + ind)
    };
    let low_height = nn * (m - n) + two * a * a - a * (nn * nn - two) - two;
    let value = match name {
        PathName::BarStar1 | PathName::BarStar2 | PathName::BarStar3 => Some(low_height),
        PathName::Tilde1 if low => Some(b_rect(a, a - 1, e(1))),
        PathName::Tilde2 if low => Some(b_rect(m, m + 1, e(1))),
        PathName::Bar1 | PathName::Bar2 => None,
        PathName::Star1 => max_of(&[form(PathName::Prime), form(PathName::Tilde7)]),
        PathName::Star2 => max_of(&[
            form(PathName::Tilde1),
            form(PathName::Tilde2),
            form(PathName::Tilde7),
        ]),
        PathName::Star3 => max_of(&[
            form(PathName::Tilde1),
            form(PathName::Tilde3),
            form(PathName::Tilde4),
            form(PathName::Tilde6),
        ]),
        PathName::Star4 => max_of(&[
            form(PathName::Tilde1),
            form(PathName::Tilde3),
            form(PathName::Tilde5),
        ]),
        other => form(other),
    };
    Ok(value)
}

fn max_of(values: &[Option<Energy>]) -> Option<Energy> {
    values
        .iter()
        .copied()
        .collect::<Option<Vec<_>>>()
        .and_then(|v| v.into_iter().max())
}

/// Where a transition starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    AllMinus,
    AllPlus,
    /// Any `σ_A(ℓ, p)`.
    StableFamily,
}

impl Endpoint {
    pub fn states(self, spec: &Arc<ModelSpec>) -> Vec<SpinConfiguration> {
        match self {
            Endpoint::AllMinus => vec![SpinConfiguration::all_minus(spec)],
            Endpoint::AllPlus => vec![SpinConfiguration::all_plus(spec)],
            Endpoint::StableFamily => sigma_a_family(spec),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Endpoint::AllMinus => "-1",
            Endpoint::AllPlus => "+1",
            Endpoint::StableFamily => "sigma_A",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaStar {
    pub regime: Regime,
    /// Saddle height given by the closed-form case split.
    #[serde(with = "crate::landscape::energy_serde")]
    pub height: Energy,
    /// Barrier from each start state to its target. On the `-1` side of the
    /// low-alpha regimes this uses the saddle of the `-1` growth path, which
    /// differs from `height - H(-1)` by `2N(m - n)`.
    pub barrier_from: Vec<(Endpoint, String)>,
    #[serde(skip)]
    pub barriers: Vec<(Endpoint, Energy)>,
}

impl GammaStar {
    pub fn barrier(&self, from: Endpoint) -> Option<Energy> {
        self.barriers
            .iter()
            .find(|(e, _)| *e == from)
            .map(|(_, b)| *b)
    }
}

/// Closed-form maximal stability level and per-start barriers.
pub fn gamma_star(spec: &ModelSpec) -> Result<GammaStar> {
    let regime = spec.classify_regime();
    let e = Energy::from_integer;
    let (nn, n, m) = (e(spec.side as i64), e(spec.n as i64), e(spec.m as i64));
    let a = spec.alpha;
    let two = e(2);
    let h_plus = spec.energy_all_plus();
    let h_minus = spec.energy_all_minus();
    let low_saddle = two * a * a + two * a - two;
    let (height, barriers) = match regime {
        Regime::Unsupported => {
            return Err(ModelError::Regime(format!(
                "no closed form outside the supported regimes ({})",
                spec.assumption_violation()
                    .unwrap_or_else(|| "excluded alpha range".into())
            )))
        }
        Regime::LowAlpha => {
            let h = nn * (m - n) + two * a * a - a * (nn * nn - two) - two;
            (
                h,
                vec![
                    (Endpoint::AllMinus, low_saddle),
                    (Endpoint::AllPlus, h - h_plus),
                ],
            )
        }
        Regime::CriticalEqual => {
            let h = two * n * n - n * (nn * nn - two) - two;
            (
                h,
                vec![
                    (Endpoint::AllMinus, h - h_minus),
                    (Endpoint::AllPlus, h - h_plus),
                ],
            )
        }
        Regime::CriticalStrict => {
            let h = nn * (m - n) + two * n * n - n * (nn * nn - two) - two;
            (h, vec![(Endpoint::AllMinus, low_saddle)])
        }
        Regime::MidAlpha => {
            let h = [
                PathName::Star1,
                PathName::Star2,
                PathName::Star3,
                PathName::Star4,
            ]
            .into_iter()
            .filter_map(|p| closed_form_phi(spec, p).ok().flatten())
            .min()
            .expect("closed forms exist above m + 1");
            (h, vec![(Endpoint::AllPlus, h - h_plus)])
        }
        Regime::HighAlpha => {
            let h = -nn * (n + m) - a * nn * nn + two * (two * m - 1) + two * a * (nn + m - 1);
            (h, vec![(Endpoint::AllPlus, h - h_plus)])
        }
        Regime::VeryHighAlpha => {
            let h = nn * (m - n) - a * nn * nn + two * (nn + 1) * (a - 1);
            (h, vec![(Endpoint::AllPlus, h - h_plus)])
        }
    };
    Ok(GammaStar {
        regime,
        height,
        barrier_from: barriers
            .iter()
            .map(|(p, b)| (*p, format_rational(b)))
            .collect(),
        barriers,
    })
}

/// One row of the gate table: a transition and the configuration sets that
/// every optimal path for it is expected to visit. Each entry of `gates` is a
/// gate on its own; a gate listed as several families is their union.
#[derive(Debug, Clone)]
pub struct GateRow {
    pub from: Endpoint,
    pub to: Endpoint,
    pub gates: Vec<Vec<(NamedFamily, Vec<SpinConfiguration>)>>,
}

impl GateRow {
    pub fn gate_states(&self, i: usize) -> Vec<SpinConfiguration> {
        self.gates[i]
            .iter()
            .flat_map(|(_, s)| s.iter().cloned())
            .collect()
    }
}

fn family_or_empty(spec: &Arc<ModelSpec>, f: NamedFamily) -> (NamedFamily, Vec<SpinConfiguration>) {
    (f, build_family(spec, f).unwrap_or_default())
}

/// The gates of the regime's transitions.
pub fn gate_family(spec: &Arc<ModelSpec>) -> Result<Vec<GateRow>> {
    let regime = spec.classify_regime();
    let fam = |f| family_or_empty(spec, f);
    let equal = spec.n == spec.m;
    let rows = match regime {
        Regime::Unsupported => {
            return Err(ModelError::Regime(
                "gates are tabulated only for supported regimes".into(),
            ))
        }
        Regime::LowAlpha => vec![
            GateRow {
                from: Endpoint::AllMinus,
                to: Endpoint::StableFamily,
                gates: vec![vec![fam(NamedFamily::GateGA)]],
            },
            GateRow {
                from: Endpoint::AllPlus,
                to: Endpoint::StableFamily,
                gates: vec![vec![fam(NamedFamily::GateGB)]],
            },
        ],
        Regime::CriticalEqual => vec![GateRow {
            from: Endpoint::AllMinus,
            to: Endpoint::AllPlus,
            gates: vec![
                vec![fam(NamedFamily::GateRA)],
                vec![fam(NamedFamily::GateRB)],
            ],
        }],
        Regime::CriticalStrict => vec![GateRow {
            from: Endpoint::AllMinus,
            to: Endpoint::StableFamily,
            gates: vec![vec![fam(NamedFamily::GateRA)]],
        }],
        Regime::MidAlpha => vec![GateRow {
            from: Endpoint::AllPlus,
            to: Endpoint::AllMinus,
            gates: vec![
                vec![
                    fam(NamedFamily::GateGA),
                    fam(NamedFamily::GateRA),
                    fam(NamedFamily::GateCA),
                ],
                vec![
                    fam(NamedFamily::GateGB),
                    fam(NamedFamily::GateRB),
                    fam(NamedFamily::GateCB),
                ],
            ],
        }],
        Regime::HighAlpha => {
            let rows = spec.side - 2;
            let a_side = (
                NamedFamily::RectProt {
                    zone: Zone::A,
                    cols: spec.n,
                    rows,
                    prot: 1,
                },
                placements(spec, Zone::A, spec.n, rows)
                    .into_iter()
                    .map(|c| Zone::A.configuration(spec, &c))
                    .collect(),
            );
            let b_side = (
                NamedFamily::RectProt {
                    zone: Zone::B,
                    cols: spec.m,
                    rows,
                    prot: 1,
                },
                placements(spec, Zone::B, spec.m, rows)
                    .into_iter()
                    .map(|c| Zone::B.configuration(spec, &c))
                    .collect(),
            );
            let gates = if equal {
                vec![vec![a_side], vec![b_side]]
            } else {
                vec![vec![b_side]]
            };
            vec![GateRow {
                from: Endpoint::AllPlus,
                to: Endpoint::AllMinus,
                gates,
            }]
        }
        Regime::VeryHighAlpha => {
            let gates = if equal {
                vec![
                    vec![fam(NamedFamily::GateCA)],
                    vec![fam(NamedFamily::GateCB)],
                ]
            } else {
                vec![vec![fam(NamedFamily::GateCB)]]
            };
            vec![GateRow {
                from: Endpoint::AllPlus,
                to: Endpoint::AllMinus,
                gates,
            }]
        }
    };
    Ok(rows)
}

/// Specs satisfying the modelling assumptions, up to `per_regime` for each
/// supported regime, scanning even sides from 8 to 20.
pub fn regression_grid(per_regime: usize) -> Vec<ModelSpec> {
    let mut buckets: Vec<(Regime, Vec<ModelSpec>)> = Vec::new();
    for side in (8..=20).step_by(2) {
        for n in 3..side {
            for k in 1..side {
                if n + 2 * k >= side {
                    break;
                }
                let m = side - n - 2 * k;
                if m < n {
                    continue;
                }
                for alpha in 2..=(3 * side as i64) {
                    let Ok(spec) = ModelSpec::strict(side, n, m, k, alpha) else {
                        continue;
                    };
                    let regime = spec.classify_regime();
                    if regime == Regime::Unsupported {
                        continue;
                    }
                    let pos = match buckets.iter().position(|(r, _)| *r == regime) {
                        Some(p) => p,
                        None => {
                            buckets.push((regime, Vec::new()));
                            buckets.len() - 1
                        }
                    };
                    if buckets[pos].1.len() < per_regime {
                        buckets[pos].1.push(spec);
                    }
                }
            }
        }
    }
    buckets.sort_by_key(|(r, _)| *r as u8);
    buckets.into_iter().flat_map(|(_, v)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> Arc<ModelSpec> {
        Arc::new(ModelSpec::strict(12, 3, 5, 2, 2).unwrap())
    }

    fn e(v: i64) -> Energy {
        Energy::from_integer(v)
    }

    #[test]
    fn sigma_a_counts() {
        let spec = e1();
        let c = &build_family(&spec, NamedFamily::SigmaA { near: 0, far: 0 }).unwrap()[0];
        let (ma, mb) = c.magnetization_counts();
        assert_eq!((ma, mb, c.contour_length()), (36, 0, 24));
        for s in sigma_a_family(&spec) {
            assert_eq!(s.energy(), e(-336));
        }
    }

    #[test]
    fn rect_prot_is_critical_cluster() {
        let spec = e1();
        let c = &build_family(
            &spec,
            NamedFamily::RectProt {
                zone: Zone::A,
                cols: 2,
                rows: 1,
                prot: 1,
            },
        )
        .unwrap()[0];
        assert_eq!(c.energy() - spec.energy_all_minus(), e(10));
        let gate = build_family(&spec, NamedFamily::GateGA).unwrap();
        assert!(gate.contains(c));
        assert!(gate
            .iter()
            .all(|g| g.energy() - spec.energy_all_minus() == e(10)));
        let gb = build_family(&spec, NamedFamily::GateGB).unwrap();
        assert!(gb
            .iter()
            .all(|g| g.energy() - spec.energy_all_plus() == e(10)));
    }

    #[test]
    fn gate_placements_count() {
        // L-trominoes inside a width-3 strip on 12 rows: horizontal dominoes
        // (2 column offsets, 4 attachments) and vertical ones (3 columns,
        // 2 or 4 attachments), each counted once.
        let spec = e1();
        let gate = build_family(&spec, NamedFamily::GateGA).unwrap();
        let mut shapes = BTreeSet::new();
        for g in &gate {
            assert_eq!(g.plus_count(), 3);
            let p = crate::polyomino::Polyomino::new(12, &g.plus_sites()).unwrap();
            assert_eq!(p.edge_perimeter(), 8);
            shapes.insert(p);
        }
        assert_eq!(shapes.len(), 4);
        assert_eq!(gate.len(), 12 * 8);
    }

    #[test]
    fn column_seed_energy() {
        let spec = e1();
        let c = &build_family(
            &spec,
            NamedFamily::Column {
                zone: Zone::A,
                offset: 1,
                full: 0,
                partial: 1,
                trailing: true,
            },
        )
        .unwrap()[0];
        let (nn, n, t, a) = (12i64, 3i64, 1i64, 2i64);
        let expected = 2 * (n * nn - t) + 2 * a * (t - nn + 1);
        assert_eq!(c.energy() - sigma_a(&spec, 0, 0).energy(), e(expected));
    }

    #[test]
    fn column_family_energies() {
        let spec = Arc::new(ModelSpec::strict(12, 3, 5, 2, 13).unwrap());
        let (nn, n, m, a) = (12i64, 3i64, 5i64, 13i64);
        let ind = |t: i64| (t != nn) as i64;
        for s in 0..n {
            for t in 1..=nn {
                let c = &build_family(
                    &spec,
                    NamedFamily::Column {
                        zone: Zone::A,
                        offset: 1,
                        full: s as usize,
                        partial: t as usize,
                        trailing: true,
                    },
                )
                .unwrap()[0];
                let rel = if s != 0 {
                    2 * (nn * (n - s) - t) + 2 * a * ind(t)
                } else {
                    2 * (n * nn - t) + 2 * a * (t - nn + 1) * ind(t)
                };
                assert_eq!(
                    c.energy() - sigma_a(&spec, 0, 0).energy(),
                    e(rel),
                    "s={s} t={t}"
                );
            }
        }
        for s in 0..m {
            for t in 1..=nn {
                let c = &build_family(
                    &spec,
                    NamedFamily::Column {
                        zone: Zone::B,
                        offset: 1,
                        full: s as usize,
                        partial: t as usize,
                        trailing: true,
                    },
                )
                .unwrap()[0];
                let rel = if s != 0 {
                    2 * (nn * (m - s) - t) + 2 * a * ind(t)
                } else {
                    2 * (m * nn - t) + 2 * a * (t - nn + 1) * ind(t)
                };
                assert_eq!(
                    c.energy() - sigma_a(&spec, 2, 2).energy(),
                    e(rel),
                    "s={s} t={t}"
                );
            }
        }
    }

    #[test]
    fn gate_b_needs_fitting_alpha() {
        let spec = Arc::new(ModelSpec::strict(12, 3, 5, 2, 13).unwrap());
        assert!(matches!(
            build_family(&spec, NamedFamily::GateGA),
            Err(ModelError::Regime(_))
        ));
    }

    #[test]
    fn all_paths_are_valid() {
        for spec in regression_grid(3) {
            let spec = Arc::new(spec);
            for name in PathName::ALL {
                if !name.valid_for(&spec) {
                    assert!(build_reference_path(&spec, name).is_err());
                    continue;
                }
                let p = build_reference_path(&spec, name).unwrap();
                assert!(p.is_valid(), "{name} on {spec}");
            }
        }
    }

    #[test]
    fn path_endpoints() {
        let spec = Arc::new(ModelSpec::strict(12, 3, 5, 2, 13).unwrap());
        let star1 = build_reference_path(&spec, PathName::Star1).unwrap();
        assert_eq!(star1.first(), &SpinConfiguration::all_plus(&spec));
        assert_eq!(star1.last(), &SpinConfiguration::all_minus(&spec));
        let t2 = build_reference_path(&spec, PathName::Tilde2).unwrap();
        assert_eq!(t2.last(), &sigma_a(&spec, 2, 2));
        let t4 = build_reference_path(&spec, PathName::Tilde4).unwrap();
        assert_eq!(t4.last(), &sigma_a(&spec, 0, 0));
        for name in [PathName::Star2, PathName::Star3, PathName::Star4] {
            let p = build_reference_path(&spec, name).unwrap();
            assert_eq!(p.last(), &SpinConfiguration::all_minus(&spec), "{name}");
        }
        let low = e1();
        let b2 = build_reference_path(&low, PathName::BarStar2).unwrap();
        assert_eq!(b2.first(), &SpinConfiguration::all_minus(&low));
        assert_eq!(b2.last(), &sigma_a(&low, 0, 0));
    }

    #[test]
    fn prime_saddle_value() {
        let spec = Arc::new(ModelSpec::strict(12, 3, 5, 2, 13).unwrap());
        let p = build_reference_path(&spec, PathName::Prime).unwrap();
        assert_eq!(p.max_elevation, e(-1536));
        let saddle = &p.states[p.saddle_indices[0]];
        let cb = build_family(&spec, NamedFamily::GateCB).unwrap();
        assert!(cb.contains(saddle));
        assert_eq!(
            closed_form_phi(&spec, PathName::Prime).unwrap(),
            Some(e(-1536))
        );
    }

    #[test]
    fn low_alpha_growth_saddle() {
        let spec = e1();
        let p = build_reference_path(&spec, PathName::BarStar2).unwrap();
        assert_eq!(p.max_elevation - spec.energy_all_minus(), e(10));
        let ga = build_family(&spec, NamedFamily::GateGA).unwrap();
        assert!(p.saddle_indices.iter().any(|&i| ga.contains(&p.states[i])));
        let q = build_reference_path(&spec, PathName::BarStar1).unwrap();
        assert_eq!(q.max_elevation, e(-254));
        assert_eq!(
            closed_form_phi(&spec, PathName::BarStar1).unwrap(),
            Some(e(-254))
        );
        // the closed-form -1 side value is off by 2N(m - n)
        assert_eq!(
            closed_form_phi(&spec, PathName::BarStar2).unwrap().unwrap() - p.max_elevation,
            e(2 * 12 * 2)
        );
    }

    #[test]
    fn rectangle_growth_descends_after_saddle() {
        let spec = Arc::new(ModelSpec::strict(12, 3, 5, 2, 13).unwrap());
        for name in [PathName::Tilde2, PathName::Bar2] {
            let Ok(p) = build_reference_path(&spec, name) else {
                continue;
            };
            let top = *p.saddle_indices.last().unwrap();
            let row = spec.m;
            // compare full-row states after the saddle
            let after: Vec<Energy> = p.elevations[top..].iter().copied().step_by(row).collect();
            assert!(after.windows(2).all(|w| w[1] <= w[0]), "{name}");
        }
    }

    #[test]
    fn gamma_star_examples() {
        let g = gamma_star(&e1()).unwrap();
        assert_eq!(g.height, e(-254));
        assert_eq!(g.barrier(Endpoint::AllPlus), Some(e(10)));
        assert_eq!(g.barrier(Endpoint::AllMinus), Some(e(10)));
        let v = gamma_star(&ModelSpec::strict(12, 3, 5, 2, 13).unwrap()).unwrap();
        assert_eq!(v.regime, Regime::VeryHighAlpha);
        assert_eq!(v.height, e(-1536));
        assert_eq!(v.barrier(Endpoint::AllPlus), Some(e(312)));
        let s = gamma_star(&ModelSpec::strict(8, 3, 3, 1, 2).unwrap()).unwrap();
        assert_eq!(s.barrier(Endpoint::AllMinus), Some(e(10)));
        assert_eq!(s.barrier(Endpoint::AllPlus), Some(e(10)));
        assert!(gamma_star(&ModelSpec::relaxed(4, 1, 1, 1, e(1)).unwrap()).is_err());
    }

    #[test]
    fn gate_table_rows() {
        let rows = gate_family(&e1()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].gates[0][0].0, NamedFamily::GateGA);
        assert_eq!(rows[1].gates[0][0].0, NamedFamily::GateGB);
        let v = gate_family(&Arc::new(ModelSpec::strict(12, 3, 5, 2, 13).unwrap())).unwrap();
        assert_eq!(v[0].gates.len(), 1);
        assert_eq!(v[0].gates[0][0].0, NamedFamily::GateCB);
        let c = gate_family(&Arc::new(ModelSpec::strict(8, 3, 3, 1, 3).unwrap())).unwrap();
        assert_eq!(c[0].gates.len(), 2);
        assert_eq!(c[0].gates[0][0].0, NamedFamily::GateRA);
        assert_eq!(c[0].gates[1][0].0, NamedFamily::GateRB);
        let h = Arc::new(ModelSpec::strict(8, 3, 3, 1, 3).unwrap());
        let g = gamma_star(&h).unwrap();
        for s in c[0].gate_states(0) {
            assert_eq!(s.energy(), g.height);
        }
    }

    #[test]
    fn path_names_parse() {
        for p in PathName::ALL {
            assert_eq!(p.label().parse::<PathName>().unwrap(), p);
        }
        assert!("w9".parse::<PathName>().is_err());
    }

    #[test]
    fn grid_covers_regimes() {
        let grid = regression_grid(12);
        for regime in [
            Regime::LowAlpha,
            Regime::CriticalEqual,
            Regime::CriticalStrict,
            Regime::MidAlpha,
            Regime::HighAlpha,
            Regime::VeryHighAlpha,
        ] {
            assert_eq!(
                grid.iter()
                    .filter(|s| s.classify_regime() == regime)
                    .count(),
                12,
                "{regime}"
            );
        }
    }

    #[test]
    fn csv_profile() {
        let p = build_reference_path(&e1(), PathName::Tilde1).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("step,energy,is_saddle\n0,-264,false\n"));
        assert_eq!(text.lines().count(), p.len() + 1);
    }
}
