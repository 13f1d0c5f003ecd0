//! Classification of non-stable configurations into the recurrence classes
//! and explicit bounded-climb reductions certifying stability levels of at
//! most `2(alpha - 1)`.
//!
//! A cluster has a concave corner when some site of the opposite sign in the
//! same zone touches it on two or more sides.

use crate::config::SpinConfiguration;
use crate::error::{ModelError, Result};
use crate::lattice::{format_rational, ModelSpec, Region};
use crate::paths::{self, PathRecord};
use crate::Energy;
use serde::Serialize;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum RecurrenceClass {
    /// Plus cluster in `A` with a concave corner.
    X1,
    /// Only convex plus clusters in `A`.
    X2,
    /// `A` all minus, minus cluster in `B` with a concave corner.
    X3,
    /// `A` all minus, only convex minus clusters in `B`.
    X4,
    /// `A` all minus, `B` all plus, plus cluster in `S` with a concave corner.
    X5,
    /// `A` all minus, `B` all plus, only convex plus clusters in `S`.
    X6,
    /// `A` and `S` all minus, `B` all plus.
    X7,
    StableOrMeta,
}

impl fmt::Display for RecurrenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ReductionMove {
    CornerFlip,
    HoleFill,
    SideRemoval,
    SideGrowth,
    ColumnSweep,
    /// Breadth-first search of the sublevel set within the climb budget.
    Search,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionCertificate {
    pub class: RecurrenceClass,
    pub method: ReductionMove,
    #[serde(skip)]
    pub path: PathRecord,
    #[serde(with = "crate::landscape::energy_serde")]
    pub max_climb: Energy,
    #[serde(with = "crate::landscape::energy_serde")]
    pub drop: Energy,
}

impl ReductionCertificate {
    pub fn start(&self) -> &SpinConfiguration {
        self.path.first()
    }

    pub fn end(&self) -> &SpinConfiguration {
        self.path.last()
    }

    /// JSON header for the path CSV.
    pub fn header_json(&self, rounds: usize) -> String {
        serde_json::json!({
            "class": self.class.to_string(),
            "method": format!("{:?}", self.method),
            "climb": format_rational(&self.max_climb),
            "drop": format_rational(&self.drop),
            "rounds": rounds,
        })
        .to_string()
    }
}

/// Number of sublevel states the search fallback may visit.
pub const SEARCH_CAP: usize = 400_000;

/// Classifier and reducer for one spec.
pub struct Recurrence {
    spec: Arc<ModelSpec>,
    special: HashSet<Vec<u64>>,
    budget: Energy,
    regions: Vec<Region>,
}

fn zone_of(r: Region) -> Zone {
    match r {
        Region::A => Zone::A,
        Region::B => Zone::B,
        Region::S1 | Region::S2 => Zone::S,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Zone {
    A,
    B,
    S,
}

/// A cluster of one sign inside a zone.
struct Cluster {
    cells: Vec<usize>,
    /// First row and height of the cyclic row span; height `N` when it winds.
    rows: (usize, usize),
    cols: (usize, usize),
}

impl Recurrence {
    /// Classifier whose excluded set is the regime's stable and metastable
    /// families.
    pub fn new(spec: &Arc<ModelSpec>) -> Result<Self> {
        Ok(Self::with_special(
            spec,
            [paths::stable_set(spec)?, paths::metastable_set(spec)?].concat(),
        ))
    }

    /// Classifier with an explicit excluded set, for specs without
    /// tabulated families.
    pub fn with_special(spec: &Arc<ModelSpec>, special: Vec<SpinConfiguration>) -> Self {
        let special = special.into_iter().map(|c| c.words().to_vec()).collect();
        let regions = (0..spec.num_sites())
            .map(|i| spec.region_of_col(i % spec.side))
            .collect();
        Recurrence {
            spec: spec.clone(),
            special,
            budget: (spec.alpha - 1) * 2,
            regions,
        }
    }

    /// The climb budget `2(alpha - 1)`.
    pub fn budget(&self) -> Energy {
        self.budget
    }

    pub fn is_special(&self, c: &SpinConfiguration) -> bool {
        self.special.contains(c.words())
    }

    fn zone(&self, i: usize) -> Zone {
        zone_of(self.regions[i])
    }

    fn in_zone(&self, z: Zone) -> impl Iterator<Item = usize> + '_ {
        (0..self.spec.num_sites()).filter(move |&i| self.zone(i) == z)
    }

    /// Sites of zone `z` with sign `-sign` touching at least two sites of
    /// sign `sign` in the same zone.
    fn corners(&self, c: &SpinConfiguration, z: Zone, sign: i32) -> Vec<usize> {
        self.in_zone(z)
            .filter(|&i| c.spin(i) == -sign)
            .filter(|&i| {
                self.spec
                    .neighbor_indices(i)
                    .iter()
                    .filter(|&&j| self.zone(j) == z && c.spin(j) == sign)
                    .count()
                    >= 2
            })
            .collect()
    }

    fn any(&self, c: &SpinConfiguration, z: Zone, sign: i32) -> bool {
        self.in_zone(z).any(|i| c.spin(i) == sign)
    }

    pub fn classify(&self, c: &SpinConfiguration) -> RecurrenceClass {
        use RecurrenceClass::*;
        if self.is_special(c) {
            return StableOrMeta;
        }
        if self.any(c, Zone::A, 1) {
            return if self.corners(c, Zone::A, 1).is_empty() {
                X2
            } else {
                X1
            };
        }
        if self.any(c, Zone::B, -1) {
            return if self.corners(c, Zone::B, -1).is_empty() {
                X4
            } else {
                X3
            };
        }
        if self.any(c, Zone::S, 1) {
            return if self.corners(c, Zone::S, 1).is_empty() {
                X6
            } else {
                X5
            };
        }
        X7
    }

    fn clusters(&self, c: &SpinConfiguration, z: Zone, sign: i32) -> Vec<Cluster> {
        let side = self.spec.side;
        let mut seen = vec![false; self.spec.num_sites()];
        let mut out = Vec::new();
        for s in self.in_zone(z) {
            if seen[s] || c.spin(s) != sign {
                continue;
            }
            let mut cells = vec![s];
            seen[s] = true;
            let mut k = 0;
            while k < cells.len() {
                for j in self.spec.neighbor_indices(cells[k]) {
                    if !seen[j] && self.zone(j) == z && c.spin(j) == sign {
                        seen[j] = true;
                        cells.push(j);
                    }
                }
                k += 1;
            }
            cells.sort_unstable();
            let span = |coords: Vec<usize>| {
                let mut used = vec![false; side];
                coords.iter().for_each(|&x| used[x] = true);
                match (0..side).find(|&x| !used[x]) {
                    None => (0, side),
                    Some(gap) => {
                        let start = (1..=side)
                            .map(|d| (gap + d) % side)
                            .find(|&x| used[x])
                            .unwrap();
                        let len = (0..side)
                            .rev()
                            .map(|d| (start + d) % side)
                            .position(|x| used[x])
                            .map(|p| side - p)
                            .unwrap();
                        (start, len)
                    }
                }
            };
            let rows = span(cells.iter().map(|&i| i / side).collect());
            let cols = span(cells.iter().map(|&i| i % side).collect());
            out.push(Cluster { cells, rows, cols });
        }
        out
    }

    fn site(&self, row: usize, col: usize) -> usize {
        let s = self.spec.side;
        (row % s) * s + col % s
    }

    /// Removal of each side line of a cluster, in both directions.
    fn side_removals(&self, cl: &Cluster) -> Vec<Vec<usize>> {
        let s = self.spec.side;
        let members: HashSet<usize> = cl.cells.iter().copied().collect();
        let mut lines = Vec::new();
        let (r0, h) = cl.rows;
        let (c0, w) = cl.cols;
        if h < s {
            for r in [r0, r0 + h - 1] {
                lines.push(
                    (0..w)
                        .map(|d| self.site(r, c0 + d))
                        .filter(|i| members.contains(i))
                        .collect::<Vec<_>>(),
                );
            }
        }
        if w < s {
            for c in [c0, c0 + w - 1] {
                lines.push(
                    (0..h)
                        .map(|d| self.site(r0 + d, c))
                        .filter(|i| members.contains(i))
                        .collect::<Vec<_>>(),
                );
            }
        }
        let mut out = Vec::new();
        for l in lines {
            let mut rev = l.clone();
            rev.reverse();
            out.push(l);
            out.push(rev);
        }
        out
    }

    /// Rows (or columns) added one after another on each side of a cluster,
    /// staying inside its zone, until the cluster winds. One unit per line.
    fn side_growths(
        &self,
        c: &SpinConfiguration,
        cl: &Cluster,
        z: Zone,
        sign: i32,
    ) -> Vec<Vec<Vec<usize>>> {
        let s = self.spec.side;
        let (r0, h) = cl.rows;
        let (c0, w) = cl.cols;
        let keep = |line: Vec<usize>| -> Vec<usize> {
            line.into_iter()
                .filter(|&i| self.zone(i) == z && c.spin(i) != sign)
                .collect()
        };
        let mut out = Vec::new();
        if h < s {
            out.push(
                (1..=s - h)
                    .map(|d| keep((0..w).map(|x| self.site(r0 + s - d, c0 + x)).collect()))
                    .collect(),
            );
            out.push(
                (0..s - h)
                    .map(|d| keep((0..w).map(|x| self.site(r0 + h + d, c0 + x)).collect()))
                    .collect(),
            );
        }
        if w < s {
            out.push(
                (1..=s - w)
                    .map(|d| keep((0..h).map(|y| self.site(r0 + y, c0 + s - d)).collect()))
                    .collect(),
            );
            out.push(
                (0..s - w)
                    .map(|d| keep((0..h).map(|y| self.site(r0 + y, c0 + w + d)).collect()))
                    .collect(),
            );
        }
        out
    }

    /// Flip every site of column `col` not already of sign `to`, moving down
    /// cyclically from just below a site that already has sign `to`.
    fn column_sweep(&self, c: &SpinConfiguration, col: usize, to: i32) -> Vec<usize> {
        let s = self.spec.side;
        let start = (0..s)
            .find(|&r| c.spin(self.site(r, col)) == to)
            .map_or(0, |r| r + 1);
        (0..s)
            .map(|d| self.site(start + d, col))
            .filter(|&i| c.spin(i) != to)
            .collect()
    }

    fn zone_columns(&self, z: Zone) -> Vec<usize> {
        (0..self.spec.side)
            .filter(|&col| self.zone(col) == z)
            .collect()
    }

    /// Sweeps of every column of `z` toward sign `to`, columns next to a
    /// full column of sign `to` or to another zone first.
    fn sweeps(&self, c: &SpinConfiguration, z: Zone, to: i32) -> Vec<Vec<usize>> {
        let s = self.spec.side;
        let full = |col: usize| (0..s).all(|r| c.spin(self.site(r, col)) == to);
        let mut cols = self.zone_columns(z);
        cols.retain(|&col| !full(col));
        let rank = |col: usize| {
            let (l, r) = ((col + s - 1) % s, (col + 1) % s);
            let near_full = (self.zone(l) == z && full(l)) || (self.zone(r) == z && full(r));
            let border = self.zone(l) != z || self.zone(r) != z;
            (!near_full, !border, col)
        };
        cols.sort_by_key(|&col| rank(col));
        cols.into_iter()
            .map(|col| self.column_sweep(c, col, to))
            .collect()
    }

    /// Repeated corner fills in zone `z` toward `sign` while they do not
    /// raise the energy.
    fn hole_fill(&self, c: &SpinConfiguration, z: Zone, sign: i32) -> Vec<usize> {
        let zero = Energy::from_integer(0);
        let mut cur = c.clone();
        let mut seq = Vec::new();
        for _ in 0..self.spec.num_sites() {
            let Some(j) = self
                .corners(&cur, z, sign)
                .into_iter()
                .find(|&j| cur.delta_h(j) <= zero)
            else {
                break;
            };
            seq.push(j);
            cur.flip(j);
            if cur.energy() < c.energy() {
                break;
            }
        }
        seq
    }

    /// Candidate flip sequences for a class, in the order the constructions
    /// are tried.
    fn candidates(
        &self,
        c: &SpinConfiguration,
        class: RecurrenceClass,
    ) -> Vec<(ReductionMove, Vec<Vec<usize>>)> {
        use RecurrenceClass::*;
        use ReductionMove::*;
        let mut out: Vec<(ReductionMove, Vec<Vec<usize>>)> = Vec::new();
        let corner = |out: &mut Vec<(ReductionMove, Vec<Vec<usize>>)>, z: Zone, sign: i32| {
            if let Some(&j) = self.corners(c, z, sign).first() {
                out.push((CornerFlip, vec![vec![j]]));
            }
        };
        let shapes = |out: &mut Vec<(ReductionMove, Vec<Vec<usize>>)>, z: Zone, sign: i32| {
            for cl in self
                .clusters(c, z, sign)
                .into_iter()
                .filter(|cl| cl.rows.1 < self.spec.side)
            {
                out.extend(
                    self.side_removals(&cl)
                        .into_iter()
                        .map(|s| (SideRemoval, vec![s])),
                );
                out.extend(
                    self.side_growths(c, &cl, z, sign)
                        .into_iter()
                        .map(|s| (SideGrowth, s)),
                );
            }
        };
        match class {
            X1 => corner(&mut out, Zone::A, 1),
            X3 => corner(&mut out, Zone::B, -1),
            X5 => {
                out.push((
                    HoleFill,
                    self.hole_fill(c, Zone::S, 1)
                        .into_iter()
                        .map(|i| vec![i])
                        .collect(),
                ));
                shapes(&mut out, Zone::S, 1);
            }
            X2 => {
                shapes(&mut out, Zone::A, 1);
                out.extend(
                    self.sweeps(c, Zone::A, 1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
                corner(&mut out, Zone::B, -1);
                out.push((
                    HoleFill,
                    self.hole_fill(c, Zone::S, 1)
                        .into_iter()
                        .map(|i| vec![i])
                        .collect(),
                ));
                shapes(&mut out, Zone::B, -1);
                shapes(&mut out, Zone::S, 1);
                out.extend(
                    self.sweeps(c, Zone::B, -1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
                out.extend(
                    self.sweeps(c, Zone::S, 1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
                out.extend(
                    self.sweeps(c, Zone::S, -1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
            }
            X4 => {
                out.extend(
                    self.sweeps(c, Zone::A, 1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
                out.extend(
                    self.sweeps(c, Zone::S, -1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
                shapes(&mut out, Zone::B, -1);
                out.extend(
                    self.sweeps(c, Zone::B, -1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
            }
            X6 => {
                shapes(&mut out, Zone::S, 1);
                out.extend(
                    self.sweeps(c, Zone::S, 1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
                out.extend(
                    self.sweeps(c, Zone::B, -1)
                        .into_iter()
                        .map(|s| (ColumnSweep, vec![s])),
                );
            }
            X7 => out.extend(
                self.sweeps(c, Zone::B, -1)
                    .into_iter()
                    .map(|s| (ColumnSweep, vec![s])),
            ),
            StableOrMeta => {}
        }
        out.retain(|(_, units)| units.iter().any(|u| !u.is_empty()));
        out
    }

    /// Apply `units` of flips from `c` and stop after the first unit that
    /// ends strictly below `H(c)`; `None` if none does or the climb exceeds
    /// the budget.
    fn try_units(
        &self,
        c: &SpinConfiguration,
        units: &[Vec<usize>],
    ) -> Option<Vec<SpinConfiguration>> {
        let h0 = c.energy();
        let mut cur = c.clone();
        let mut states = vec![cur.clone()];
        for unit in units {
            for &i in unit {
                cur.flip(i);
                if cur.energy() - h0 > self.budget {
                    return None;
                }
                states.push(cur.clone());
            }
            if cur.energy() < h0 {
                return Some(states);
            }
        }
        None
    }

    /// Shortest single-flip path from `c` to a strictly lower state inside
    /// `{H <= H(c) + budget}`.
    fn search(&self, c: &SpinConfiguration) -> Option<Vec<SpinConfiguration>> {
        let h0 = c.energy();
        let ceiling = h0 + self.budget;
        let mut parent: HashMap<Vec<u64>, Option<(Vec<u64>, usize)>> = HashMap::new();
        parent.insert(c.words().to_vec(), None);
        let mut queue = VecDeque::from([c.clone()]);
        while let Some(cur) = queue.pop_front() {
            for i in 0..self.spec.num_sites() {
                let e = cur.energy() + cur.delta_h(i);
                if e > ceiling {
                    continue;
                }
                let next = cur.flipped(i);
                if parent.contains_key(next.words()) {
                    continue;
                }
                parent.insert(next.words().to_vec(), Some((cur.words().to_vec(), i)));
                if e < h0 {
                    let mut sites = Vec::new();
                    let mut key = next.words().to_vec();
                    while let Some(Some((prev, site))) = parent.get(&key) {
                        sites.push(*site);
                        key = prev.clone();
                    }
                    sites.reverse();
                    let mut walk = c.clone();
                    let mut states = vec![walk.clone()];
                    for s in sites {
                        walk.flip(s);
                        states.push(walk.clone());
                    }
                    return Some(states);
                }
                if parent.len() >= SEARCH_CAP {
                    return None;
                }
                queue.push_back(next);
            }
        }
        None
    }

    /// Reduce a configuration outside the stable and metastable families to
    /// a strictly lower one with climb at most `2(alpha - 1)`.
    pub fn reduce(&self, c: &SpinConfiguration) -> Result<ReductionCertificate> {
        let class = self.classify(c);
        if class == RecurrenceClass::StableOrMeta {
            return Err(ModelError::Regime(
                "stable and metastable states are not reduced".into(),
            ));
        }
        let found = self
            .candidates(c, class)
            .into_iter()
            .find_map(|(m, units)| self.try_units(c, &units).map(|s| (m, s)))
            .or_else(|| self.search(c).map(|s| (ReductionMove::Search, s)));
        let (method, states) = found.ok_or_else(|| {
            ModelError::Falsified(format!(
                "{class} configuration at energy {} has no reduction:\n{c:?}",
                c.energy()
            ))
        })?;
        let path = PathRecord::from_states(states);
        let max_climb = path.max_elevation - c.energy();
        let drop = c.energy() - path.last().energy();
        assert!(
            max_climb <= self.budget && drop > Energy::from_integer(0),
            "reduction certificate out of bounds"
        );
        Ok(ReductionCertificate {
            class,
            method,
            path,
            max_climb,
            drop,
        })
    }

    /// Reduce repeatedly until the stable or metastable families are reached.
    pub fn descend(&self, c: &SpinConfiguration) -> Result<Vec<ReductionCertificate>> {
        let mut out = Vec::new();
        let mut cur = c.clone();
        while !self.is_special(&cur) {
            let cert = self.reduce(&cur)?;
            cur = cert.end().clone();
            out.push(cert);
        }
        Ok(out)
    }
}

pub fn classify(spec: &Arc<ModelSpec>, config: &SpinConfiguration) -> Result<RecurrenceClass> {
    Ok(Recurrence::new(spec)?.classify(config))
}

pub fn reduce(spec: &Arc<ModelSpec>, config: &SpinConfiguration) -> Result<ReductionCertificate> {
    Recurrence::new(spec)?.reduce(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::random_start;
    use crate::paths::sigma_a;

    fn spec() -> Arc<ModelSpec> {
        Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap())
    }

    fn cols(spec: &Arc<ModelSpec>, cs: &[usize]) -> Vec<usize> {
        cs.iter()
            .flat_map(|&c| (0..spec.side).map(move |r| r * spec.side + c))
            .collect()
    }

    #[test]
    fn classes_of_named_configurations() {
        let s = spec();
        let rec = Recurrence::new(&s).unwrap();
        // L-tromino in A.
        let l = SpinConfiguration::from_plus_sites(&s, [9, 10, 17]);
        assert_eq!(rec.classify(&l), RecurrenceClass::X1);
        // B all plus, the rest minus.
        let x7 = SpinConfiguration::from_plus_sites(&s, cols(&s, &[4, 5, 6]));
        assert_eq!(rec.classify(&x7), RecurrenceClass::X7);
        assert_eq!(
            rec.classify(&sigma_a(&s, 0, 0)),
            RecurrenceClass::StableOrMeta
        );
        assert_eq!(
            rec.classify(&SpinConfiguration::all_minus(&s)),
            RecurrenceClass::StableOrMeta
        );
    }

    #[test]
    fn reductions_follow_the_class_moves() {
        let s = spec();
        let rec = Recurrence::new(&s).unwrap();
        let l = SpinConfiguration::from_plus_sites(&s, [9, 10, 17]);
        let cert = rec.reduce(&l).unwrap();
        assert_eq!(
            (cert.method, cert.path.len(), cert.max_climb),
            (ReductionMove::CornerFlip, 2, Energy::from_integer(0))
        );
        assert!(cert.drop >= Energy::from_integer(2));

        // Two full plus columns of A and an empty one: the column is filled.
        let gap = SpinConfiguration::from_plus_sites(&s, cols(&s, &[1, 2]));
        let cert = rec.reduce(&gap).unwrap();
        assert_eq!(cert.class, RecurrenceClass::X2);
        assert_eq!(cert.method, ReductionMove::ColumnSweep);
        assert_eq!(
            cert.path.elevations[1] - cert.path.elevations[0],
            Energy::from_integer(2)
        );
        assert_eq!(cert.drop, Energy::from_integer(16));

        let x7 = SpinConfiguration::from_plus_sites(&s, cols(&s, &[4, 5, 6]));
        let cert = rec.reduce(&x7).unwrap();
        assert_eq!(cert.method, ReductionMove::ColumnSweep);
        assert_eq!(cert.max_climb, Energy::from_integer(2));
        assert_eq!(cert.drop, Energy::from_integer(16));
    }

    #[test]
    fn random_configurations_descend() {
        let s = spec();
        let rec = Recurrence::new(&s).unwrap();
        for i in 0..300 {
            let c = random_start(&s, 17, i);
            let certs = rec.descend(&c).unwrap();
            assert!(certs.len() <= s.num_sites(), "{} rounds", certs.len());
            for w in certs.windows(2) {
                assert_eq!(w[0].end(), w[1].start());
            }
            for cert in &certs {
                assert!(cert.path.is_valid());
                assert!(cert.max_climb <= rec.budget());
            }
        }
    }
}
