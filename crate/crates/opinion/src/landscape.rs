//! Exact energy-landscape analysis: communication heights, stability levels,
//! stable and metastable sets, and gate checks by level-set disconnection.
//!
//! Energies are kept as integers scaled by the denominator of alpha so that
//! ties are decided exactly.

use crate::config::SpinConfiguration;
use crate::error::{ModelError, Result};
use crate::lattice::{format_rational, ModelSpec};
use crate::union_find::UnionFind;
use crate::Energy;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

/// Largest grid (in sites) analysed exhaustively unless overridden.
pub const DEFAULT_SITE_GUARD: usize = 16;
/// Largest restricted subspace built unless overridden.
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

enum Adjacency {
    /// States are bit patterns; neighbors differ in one bit.
    Hypercube {
        bits: usize,
    },
    Explicit(Vec<Vec<u32>>),
}

/// A finite state graph with exact energies.
pub struct Landscape {
    spec: Arc<ModelSpec>,
    energies: Vec<i64>,
    scale: i64,
    adjacency: Adjacency,
    /// Configurations of an explicit (restricted) landscape.
    configs: Vec<SpinConfiguration>,
    index: HashMap<Vec<u64>, u32>,
    restricted: bool,
}

fn scaled_energy(c: &SpinConfiguration, scale: i64) -> i64 {
    let e = c.energy() * scale;
    assert!(e.is_integer());
    *e.numer()
}

impl Landscape {
    /// Full state space of a grid with at most `DEFAULT_SITE_GUARD` sites.
    pub fn enumerate(spec: &Arc<ModelSpec>) -> Result<Self> {
        Self::enumerate_with_guard(spec, DEFAULT_SITE_GUARD)
    }

    pub fn enumerate_with_guard(spec: &Arc<ModelSpec>, max_sites: usize) -> Result<Self> {
        let bits = spec.num_sites();
        if bits > max_sites || bits > 30 {
            return Err(ModelError::Guard(format!(
                "exhaustive analysis of {bits} sites exceeds the guard of {max_sites}"
            )));
        }
        let scale = *spec.alpha.denom();
        let size = 1usize << bits;
        let prefs = spec.preferences();
        let side = spec.side;
        let p = *spec.alpha.numer();
        let (ns, n, m) = (side as i64, spec.n as i64, spec.m as i64);
        // H * scale = scale * (-sum s_i sigma_i) - p * (N^2 - |gamma|)
        let energies: Vec<i64> = (0..size)
            .map(|state| {
                let spin = |i: usize| if (state >> i) & 1 == 1 { 1i64 } else { -1 };
                let mut field = 0i64;
                let mut contour = 0i64;
                for i in 0..bits {
                    field += prefs[i] as i64 * spin(i);
                    let (r, c) = (i / side, i % side);
                    contour += (spin(i) != spin(((r + 1) % side) * side + c)) as i64;
                    contour += (spin(i) != spin(r * side + (c + 1) % side)) as i64;
                }
                let _ = (n, m);
                -scale * field + p * (contour - ns * ns)
            })
            .collect();
        Ok(Landscape {
            spec: spec.clone(),
            energies,
            scale,
            adjacency: Adjacency::Hypercube { bits },
            configs: Vec::new(),
            index: HashMap::new(),
            restricted: false,
        })
    }

    /// Induced landscape on an explicit set of configurations.
    pub fn from_configs(spec: &Arc<ModelSpec>, configs: Vec<SpinConfiguration>) -> Self {
        let scale = *spec.alpha.denom();
        let mut index = HashMap::with_capacity(configs.len());
        for (i, c) in configs.iter().enumerate() {
            index.insert(c.words().to_vec(), i as u32);
        }
        let energies = configs.iter().map(|c| scaled_energy(c, scale)).collect();
        let mut adj = vec![Vec::new(); configs.len()];
        for (i, c) in configs.iter().enumerate() {
            let mut words = c.words().to_vec();
            for site in 0..spec.num_sites() {
                words[site / 64] ^= 1 << (site % 64);
                if let Some(&j) = index.get(&words) {
                    adj[i].push(j);
                }
                words[site / 64] ^= 1 << (site % 64);
            }
        }
        Landscape {
            spec: spec.clone(),
            energies,
            scale,
            adjacency: Adjacency::Explicit(adj),
            configs,
            index,
            restricted: true,
        }
    }

    pub fn spec(&self) -> &Arc<ModelSpec> {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn is_restricted(&self) -> bool {
        self.restricted
    }

    pub fn energy(&self, v: usize) -> Energy {
        Energy::new(self.energies[v], self.scale)
    }

    pub fn scaled(&self, v: usize) -> i64 {
        self.energies[v]
    }

    pub fn to_energy(&self, scaled: i64) -> Energy {
        Energy::new(scaled, self.scale)
    }

    pub fn config(&self, v: usize) -> SpinConfiguration {
        match self.adjacency {
            Adjacency::Hypercube { .. } => SpinConfiguration::from_bits(&self.spec, v as u64),
            Adjacency::Explicit(_) => self.configs[v].clone(),
        }
    }

    pub fn state_of(&self, c: &SpinConfiguration) -> Option<usize> {
        match self.adjacency {
            Adjacency::Hypercube { .. } => Some(c.to_bits() as usize),
            Adjacency::Explicit(_) => self.index.get(c.words()).map(|&i| i as usize),
        }
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        match &self.adjacency {
            Adjacency::Hypercube { bits } => (0..*bits).map(|b| v ^ (1 << b)).collect(),
            Adjacency::Explicit(adj) => adj[v].iter().map(|&j| j as usize).collect(),
        }
    }

    fn for_each_neighbor<F: FnMut(usize)>(&self, v: usize, mut f: F) {
        match &self.adjacency {
            Adjacency::Hypercube { bits } => (0..*bits).for_each(|b| f(v ^ (1 << b))),
            Adjacency::Explicit(adj) => adj[v].iter().for_each(|&j| f(j as usize)),
        }
    }

    /// State indices grouped by energy, lowest level first.
    fn levels(&self) -> Vec<(i64, Vec<usize>)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&v| self.energies[v]);
        let mut out: Vec<(i64, Vec<usize>)> = Vec::new();
        for v in order {
            match out.last_mut() {
                Some((e, batch)) if *e == self.energies[v] => batch.push(v),
                _ => out.push((self.energies[v], vec![v])),
            }
        }
        out
    }

    /// Communication height between two state sets by a union-find sweep:
    /// the lowest level at which the sets share a sublevel component.
    /// Each level is inserted as a batch before connectivity is queried.
    pub fn communication_height_sets(&self, xs: &[usize], ys: &[usize]) -> Option<Energy> {
        let mut uf = UnionFind::new(self.len());
        let mut active = vec![false; self.len()];
        let mut in_x = vec![false; self.len()];
        let mut in_y = vec![false; self.len()];
        xs.iter().for_each(|&x| in_x[x] = true);
        ys.iter().for_each(|&y| in_y[y] = true);
        for (level, batch) in self.levels() {
            for &v in &batch {
                active[v] = true;
            }
            for &v in &batch {
                self.for_each_neighbor(v, |u| {
                    if active[u] {
                        uf.union(u, v);
                    }
                });
            }
            let x_roots: Vec<usize> = xs
                .iter()
                .filter(|&&x| active[x])
                .map(|&x| uf.find(x))
                .collect();
            if x_roots.is_empty() {
                continue;
            }
            for &y in ys.iter().filter(|&&y| active[y]) {
                let r = uf.find(y);
                if x_roots.contains(&r) {
                    return Some(self.to_energy(level));
                }
            }
        }
        None
    }

    pub fn communication_height(&self, x: usize, y: usize) -> Option<Energy> {
        self.communication_height_sets(&[x], &[y])
    }

    /// Independent oracle: binary search over levels with BFS reachability.
    pub fn communication_height_bfs(&self, xs: &[usize], ys: &[usize]) -> Option<Energy> {
        let mut levels: Vec<i64> = self.energies.clone();
        levels.sort_unstable();
        levels.dedup();
        let floor = xs.iter().map(|&x| self.energies[x]).min()?;
        let candidates: Vec<i64> = levels.into_iter().filter(|&l| l >= floor).collect();
        let reaches = |level: i64| {
            self.reachable_below(xs, level, &[])
                .iter()
                .zip(0..)
                .any(|(&r, v)| r && ys.contains(&v))
        };
        if candidates.is_empty() || !reaches(*candidates.last().unwrap()) {
            return None;
        }
        let (mut lo, mut hi) = (0usize, candidates.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if reaches(candidates[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(self.to_energy(candidates[lo]))
    }

    /// States reachable from `xs` through states with energy at most `level`,
    /// never entering `blocked`.
    fn reachable_below(&self, xs: &[usize], level: i64, blocked: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut blocked_mask = vec![false; self.len()];
        blocked.iter().for_each(|&b| blocked_mask[b] = true);
        let mut queue = VecDeque::new();
        for &x in xs {
            if self.energies[x] <= level && !blocked_mask[x] && !seen[x] {
                seen[x] = true;
                queue.push_back(x);
            }
        }
        while let Some(v) = queue.pop_front() {
            self.for_each_neighbor(v, |u| {
                if !seen[u] && !blocked_mask[u] && self.energies[u] <= level {
                    seen[u] = true;
                    queue.push_back(u);
                }
            });
        }
        seen
    }

    /// Stability level of every state (`None` for global minima), from one sweep.
    pub fn stability_levels(&self) -> Vec<Option<Energy>> {
        let n = self.len();
        let mut uf = UnionFind::new(n);
        let mut active = vec![false; n];
        let mut comp_min = vec![i64::MAX; n];
        let mut pending: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut result: Vec<Option<i64>> = vec![None; n];
        for (level, batch) in self.levels() {
            for &v in &batch {
                active[v] = true;
                comp_min[v] = level;
                pending[v].push(v as u32);
            }
            for &v in &batch {
                let mut nbs = Vec::with_capacity(8);
                self.for_each_neighbor(v, |u| nbs.push(u));
                for u in nbs {
                    if !active[u] {
                        continue;
                    }
                    let (ru, rv) = (uf.find(u), uf.find(v));
                    if ru == rv {
                        continue;
                    }
                    let (mu, mv) = (comp_min[ru], comp_min[rv]);
                    let mut pu = std::mem::take(&mut pending[ru]);
                    let mut pv = std::mem::take(&mut pending[rv]);
                    // States sitting at the higher minimum escape at this level.
                    if mu < mv {
                        pv.iter()
                            .for_each(|&s| result[s as usize] = Some(level - mv));
                        pv.clear();
                    } else if mv < mu {
                        pu.iter()
                            .for_each(|&s| result[s as usize] = Some(level - mu));
                        pu.clear();
                    }
                    if pu.len() < pv.len() {
                        std::mem::swap(&mut pu, &mut pv);
                    }
                    pu.extend(pv);
                    uf.union(ru, rv);
                    let root = uf.find(ru);
                    comp_min[root] = mu.min(mv);
                    pending[root] = pu;
                }
            }
        }
        result
            .into_iter()
            .map(|r| r.map(|e| self.to_energy(e)))
            .collect()
    }

    /// `Phi(x, target) - H(x)` for every state `x`, from one sweep.
    pub fn depths_to(&self, target: usize) -> Vec<Energy> {
        let n = self.len();
        let mut uf = UnionFind::new(n);
        let mut active = vec![false; n];
        let mut phi: Vec<Option<i64>> = vec![None; n];
        let mut members: Vec<Vec<u32>> = (0..n as u32).map(|v| vec![v]).collect();
        for (level, batch) in self.levels() {
            for &v in &batch {
                active[v] = true;
            }
            for &v in &batch {
                let mut nbs = Vec::with_capacity(8);
                self.for_each_neighbor(v, |u| nbs.push(u));
                for u in nbs {
                    let (ru, rv) = (uf.find(u), uf.find(v));
                    if !active[u] || ru == rv {
                        continue;
                    }
                    let mut a = std::mem::take(&mut members[ru]);
                    let b = std::mem::take(&mut members[rv]);
                    a.extend(b);
                    uf.union(ru, rv);
                    members[uf.find(ru)] = a;
                }
            }
            if active[target] {
                let root = uf.find(target);
                for &s in &std::mem::take(&mut members[root]) {
                    phi[s as usize].get_or_insert(level);
                }
            }
        }
        (0..n)
            .map(|v| self.to_energy(phi[v].expect("connected") - self.energies[v]))
            .collect()
    }

    /// Largest depth `max_x Phi(x, s) - H(x)` over states other than a ground
    /// state `s`; this is the rate governing the spectral gap. It equals the
    /// maximal stability level when the ground state is unique.
    pub fn critical_depth(&self) -> Energy {
        let min = (0..self.len())
            .min_by_key(|&v| self.energies[v])
            .expect("nonempty");
        self.depths_to(min)
            .into_iter()
            .enumerate()
            .filter(|&(v, _)| v != min)
            .map(|(_, d)| d)
            .max()
            .unwrap_or_default()
    }

    /// Independent oracle for one state: `Phi(z, I_z) - H(z)` by threshold BFS.
    pub fn stability_level_bfs(&self, z: usize) -> Option<Energy> {
        let below: Vec<usize> = (0..self.len())
            .filter(|&v| self.energies[v] < self.energies[z])
            .collect();
        if below.is_empty() {
            return None;
        }
        self.communication_height_bfs(&[z], &below)
            .map(|phi| phi - self.energy(z))
    }

    pub fn report(&self) -> LandscapeReport {
        let levels = self.stability_levels();
        let min = *self.energies.iter().min().expect("nonempty");
        let stable: Vec<usize> = (0..self.len())
            .filter(|&v| self.energies[v] == min)
            .collect();
        let gamma_m = levels.iter().flatten().max().copied();
        let meta: Vec<usize> = match gamma_m {
            Some(g) => (0..self.len()).filter(|&v| levels[v] == Some(g)).collect(),
            None => Vec::new(),
        };
        LandscapeReport {
            spec: (*self.spec).clone(),
            restricted: self.restricted,
            state_count: self.len(),
            min_energy: self.to_energy(min),
            stable_set: stable.iter().map(|&v| self.state_entry(v)).collect(),
            metastable_set: meta.iter().map(|&v| self.state_entry(v)).collect(),
            gamma_m,
            stable_states: stable,
            metastable_states: meta,
            stability_levels: levels,
        }
    }

    fn state_entry(&self, v: usize) -> StateEntry {
        StateEntry {
            state: v,
            energy: self.energy(v),
            config: self.config(v).to_pm_string(),
        }
    }

    /// True iff deleting the gate states at the saddle level disconnects `xs`
    /// from `ys` in the graph of states with energy at most `Phi(xs, ys)`.
    pub fn gate_check(&self, xs: &[usize], ys: &[usize], gate: &[usize]) -> Option<bool> {
        let phi = self.communication_height_sets(xs, ys)?;
        let level = *(phi * self.scale).numer();
        let blocked: Vec<usize> = gate
            .iter()
            .copied()
            .filter(|&g| self.energies[g] == level && !xs.contains(&g) && !ys.contains(&g))
            .collect();
        let seen = self.reachable_below(xs, level, &blocked);
        Some(!ys.iter().any(|&y| seen[y]))
    }

    /// States at the saddle level that lie on every optimal path from `x` to
    /// `y`, computed as dominators of `y` in the saddle-level sublevel graph.
    pub fn saddle_dominators(&self, x: usize, y: usize) -> Vec<usize> {
        let Some(phi) = self.communication_height(x, y) else {
            return Vec::new();
        };
        let level = *(phi * self.scale).numer();
        let reach = self.reachable_below(&[x], level, &[]);
        // Reverse postorder from x over the sublevel graph.
        let mut order = Vec::new();
        let mut visited = vec![false; self.len()];
        let mut stack = vec![(x, self.neighbors(x), 0usize)];
        visited[x] = true;
        while let Some((v, nbs, i)) = stack.last_mut() {
            if *i < nbs.len() {
                let u = nbs[*i];
                *i += 1;
                if reach[u] && !visited[u] {
                    visited[u] = true;
                    let nb = self.neighbors(u);
                    stack.push((u, nb, 0));
                }
            } else {
                order.push(*v);
                stack.pop();
            }
        }
        order.reverse();
        let mut rpo = vec![usize::MAX; self.len()];
        for (i, &v) in order.iter().enumerate() {
            rpo[v] = i;
        }
        let mut idom = vec![usize::MAX; self.len()];
        idom[x] = x;
        let intersect = |idom: &Vec<usize>, mut a: usize, mut b: usize| {
            while a != b {
                while rpo[a] > rpo[b] {
                    a = idom[a];
                }
                while rpo[b] > rpo[a] {
                    b = idom[b];
                }
            }
            a
        };
        let mut changed = true;
        while changed {
            changed = false;
            for &v in order.iter().skip(1) {
                let mut new_idom = usize::MAX;
                for u in self.neighbors(v) {
                    if reach[u] && idom[u] != usize::MAX {
                        new_idom = if new_idom == usize::MAX {
                            u
                        } else {
                            intersect(&idom, u, new_idom)
                        };
                    }
                }
                if new_idom != idom[v] {
                    idom[v] = new_idom;
                    changed = true;
                }
            }
        }
        if idom[y] == usize::MAX {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut v = idom[y];
        while v != x {
            if self.energies[v] == level {
                out.push(v);
            }
            v = idom[v];
        }
        out.sort_unstable();
        out
    }

    /// `(energy, count)` histogram, lowest energy first.
    pub fn energy_histogram(&self) -> Vec<(Energy, usize)> {
        self.levels()
            .into_iter()
            .map(|(e, b)| (self.to_energy(e), b.len()))
            .collect()
    }

    pub fn write_histogram_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| ModelError::Format(e.to_string());
        w.write_record(["energy", "count"]).map_err(err)?;
        for (e, c) in self.energy_histogram() {
            w.write_record([format_rational(&e), c.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| ModelError::Format(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateEntry {
    pub state: usize,
    #[serde(with = "energy_serde")]
    pub energy: Energy,
    pub config: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub spec: ModelSpec,
    /// Quantities of a restricted landscape are bounds, not exact values.
    pub restricted: bool,
    pub state_count: usize,
    #[serde(with = "energy_serde")]
    pub min_energy: Energy,
    pub stable_set: Vec<StateEntry>,
    pub metastable_set: Vec<StateEntry>,
    #[serde(with = "opt_energy_serde")]
    pub gamma_m: Option<Energy>,
    #[serde(skip)]
    pub stable_states: Vec<usize>,
    #[serde(skip)]
    pub metastable_states: Vec<usize>,
    #[serde(skip)]
    pub stability_levels: Vec<Option<Energy>>,
}

impl LandscapeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) mod energy_serde {
    use crate::lattice::{format_rational, parse_rational};
    use crate::Energy;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &Energy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(e))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Energy, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod opt_energy_serde {
    use crate::lattice::{format_rational, parse_rational};
    use crate::Energy;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &Option<Energy>, s: S) -> Result<S::Ok, S::Error> {
        match e {
            Some(e) => s.serialize_str(&format_rational(e)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Energy>, D::Error> {
        let text = Option::<String>::deserialize(d)?;
        text.map(|t| parse_rational(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Tube of configurations around a reference path: every configuration within
/// Hamming distance `radius` of some path state whose energy exceeds that path
/// state's energy by at most `window`, closed under the path's connectivity.
#[derive(Debug, Clone)]
pub struct TubeGenerator {
    pub path: Vec<SpinConfiguration>,
    pub window: Energy,
    pub radius: usize,
}

impl TubeGenerator {
    /// Radius follows the window: each uphill flip costs at least 2 energy
    /// units in the models of interest, so `ceil(window / 2)` flips suffice.
    pub fn new(path: Vec<SpinConfiguration>, window: Energy) -> Self {
        let half = window / 2;
        let radius = half.ceil().to_integer().max(0) as usize;
        TubeGenerator {
            path,
            window,
            radius,
        }
    }
}

/// Landscape induced on the tube around a path.
pub fn restricted_subspace(
    spec: &Arc<ModelSpec>,
    generator: &TubeGenerator,
    state_cap: usize,
) -> Result<Landscape> {
    let mut members: HashMap<Vec<u64>, SpinConfiguration> = HashMap::new();
    for anchor in &generator.path {
        let ceiling = anchor.energy() + generator.window;
        // Breadth-first layers by Hamming distance from the anchor.
        let mut frontier = vec![anchor.clone()];
        let mut local: HashMap<Vec<u64>, ()> = HashMap::from([(anchor.words().to_vec(), ())]);
        members
            .entry(anchor.words().to_vec())
            .or_insert_with(|| anchor.clone());
        for _ in 0..generator.radius {
            let mut next = Vec::new();
            for c in &frontier {
                for site in 0..spec.num_sites() {
                    let mut d = c.clone();
                    d.flip(site);
                    if d.energy() > ceiling || local.contains_key(d.words()) {
                        continue;
                    }
                    local.insert(d.words().to_vec(), ());
                    members
                        .entry(d.words().to_vec())
                        .or_insert_with(|| d.clone());
                    next.push(d);
                }
            }
            if members.len() > state_cap {
                return Err(ModelError::Guard(format!(
                    "restricted subspace exceeds {state_cap} states"
                )));
            }
            frontier = next;
        }
    }
    let mut configs: Vec<SpinConfiguration> = members.into_values().collect();
    configs.sort_by(|a, b| a.words().cmp(b.words()));
    Ok(Landscape::from_configs(spec, configs))
}

/// Exact report on a fully enumerable instance.
pub fn landscape_report(spec: &Arc<ModelSpec>) -> Result<LandscapeReport> {
    Ok(Landscape::enumerate(spec)?.report())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(alpha: Rational64) -> Arc<ModelSpec> {
        Arc::new(ModelSpec::relaxed(4, 1, 1, 1, alpha).unwrap())
    }

    #[test]
    fn energies_match_configurations() {
        let spec = toy(Rational64::new(3, 2));
        let l = Landscape::enumerate(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let v = rng.random_range(0..l.len());
            assert_eq!(l.energy(v), l.config(v).hamiltonian_direct());
        }
    }

    #[test]
    fn sweep_matches_bfs_oracle() {
        let spec = toy(Rational64::from_integer(1));
        let l = Landscape::enumerate(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (x, y) = (rng.random_range(0..l.len()), rng.random_range(0..l.len()));
            let a = l.communication_height(x, y);
            assert_eq!(a, l.communication_height_bfs(&[x], &[y]));
            assert_eq!(a, l.communication_height(y, x));
        }
        assert_eq!(l.communication_height(5, 5), Some(l.energy(5)));
    }

    #[test]
    fn ultrametric_triangle() {
        let spec = toy(Rational64::from_integer(1));
        let l = Landscape::enumerate(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (x, y, z) = (
                rng.random_range(0..l.len()),
                rng.random_range(0..l.len()),
                rng.random_range(0..l.len()),
            );
            let xz = l.communication_height(x, z).unwrap();
            let m = l
                .communication_height(x, y)
                .unwrap()
                .max(l.communication_height(y, z).unwrap());
            assert!(xz <= m);
        }
    }

    #[test]
    fn adjacent_states() {
        let spec = toy(Rational64::from_integer(1));
        let l = Landscape::enumerate(&spec).unwrap();
        let (x, y) = (0usize, 1usize);
        let phi = l.communication_height(x, y).unwrap();
        assert!(phi <= l.energy(x).max(l.energy(y)));
        assert_eq!(phi, l.communication_height_bfs(&[x], &[y]).unwrap());
    }

    #[test]
    fn stability_levels_match_oracle() {
        let spec = toy(Rational64::new(3, 2));
        let l = Landscape::enumerate(&spec).unwrap();
        let levels = l.stability_levels();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..40 {
            let v = rng.random_range(0..l.len());
            assert_eq!(levels[v], l.stability_level_bfs(v), "state {v}");
        }
        let report = l.report();
        for s in report.metastable_states.iter().take(4) {
            assert_eq!(levels[*s], l.stability_level_bfs(*s));
            let phi = l
                .communication_height_sets(&[*s], &report.stable_states)
                .unwrap();
            assert_eq!(phi - l.energy(*s), report.gamma_m.unwrap());
        }
        for s in &report.stable_states {
            assert_eq!(levels[*s], None);
        }
        // a state with a strictly lower neighbor has level zero
        let v = (0..l.len())
            .find(|&v| l.neighbors(v).iter().any(|&u| l.energy(u) < l.energy(v)))
            .unwrap();
        assert_eq!(levels[v], Some(Energy::from_integer(0)));
    }

    #[test]
    fn level_batches_are_order_independent() {
        let spec = toy(Rational64::from_integer(1));
        let l = Landscape::enumerate(&spec).unwrap();
        let configs: Vec<SpinConfiguration> = (0..l.len()).map(|v| l.config(v)).collect();
        let mut shuffled = configs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let explicit = Landscape::from_configs(&spec, shuffled);
        let a = l.report();
        let b = explicit.report();
        assert_eq!(a.gamma_m, b.gamma_m);
        let mut sa: Vec<String> = a.metastable_set.iter().map(|e| e.config.clone()).collect();
        let mut sb: Vec<String> = b.metastable_set.iter().map(|e| e.config.clone()).collect();
        sa.sort();
        sb.sort();
        assert_eq!(sa, sb);
    }

    #[test]
    fn strong_coupling_favours_homogeneous_states() {
        let spec = toy(Rational64::from_integer(5));
        let report = landscape_report(&spec).unwrap();
        let mut stable: Vec<String> = report.stable_set.iter().map(|e| e.config.clone()).collect();
        stable.sort();
        assert_eq!(stable, vec!["+".repeat(16), "-".repeat(16)]);
    }

    #[test]
    fn field_only_ground_states() {
        let spec = toy(Rational64::from_integer(0));
        let report = landscape_report(&spec).unwrap();
        // A = column 0 plus, B = column 2 minus, neutral columns free.
        assert_eq!(report.stable_set.len(), 1 << 8);
        for e in &report.stable_set {
            let c = e.config.as_bytes();
            for r in 0..4 {
                assert_eq!(c[r * 4], b'+');
                assert_eq!(c[r * 4 + 2], b'-');
            }
        }
    }

    #[test]
    fn gate_checks_agree_with_dominators() {
        let spec = toy(Rational64::new(3, 2));
        let l = Landscape::enumerate(&spec).unwrap();
        let report = l.report();
        let x = report.metastable_states[0];
        let y = report.stable_states[0];
        let phi = l.communication_height(x, y).unwrap();
        let saddle: Vec<usize> = (0..l.len()).filter(|&v| l.energy(v) == phi).collect();
        assert_eq!(l.gate_check(&[x], &[y], &saddle), Some(true));
        assert_eq!(l.gate_check(&[x], &[y], &[]), Some(false));
        let doms = l.saddle_dominators(x, y);
        for &g in saddle.iter().take(300) {
            let single = l.gate_check(&[x], &[y], &[g]).unwrap();
            assert_eq!(single, doms.contains(&g), "state {g}");
        }
    }

    #[test]
    fn depths_match_pairwise_heights() {
        let spec = toy(Rational64::new(3, 2));
        let l = Landscape::enumerate(&spec).unwrap();
        let depths = l.depths_to(0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = rng.random_range(0..l.len());
            assert_eq!(
                depths[v],
                l.communication_height_bfs(&[v], &[0]).unwrap() - l.energy(v)
            );
        }
        assert!(l.critical_depth() >= l.report().gamma_m.unwrap());
    }

    #[test]
    fn guard_rejects_large_grids() {
        let spec = Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap());
        assert!(matches!(
            Landscape::enumerate(&spec),
            Err(ModelError::Guard(_))
        ));
    }

    #[test]
    fn zero_window_tube_is_the_path() {
        let spec = Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap());
        let path: Vec<SpinConfiguration> = (0..4)
            .map(|k| SpinConfiguration::from_plus_sites(&spec, (0..k).map(|r| r * 8)))
            .collect();
        let tube = TubeGenerator::new(path.clone(), Energy::from_integer(0));
        let l = restricted_subspace(&spec, &tube, 1000).unwrap();
        assert_eq!(l.len(), 4);
        assert!(path.iter().all(|c| l.state_of(c).is_some()));
    }
}
