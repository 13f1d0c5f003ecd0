//! Spin configurations, exact energies and cluster geometry.

use crate::error::{ModelError, Result};
use crate::lattice::{ModelSpec, Region};
use crate::Energy;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

/// `+1`/`-1` assignment on the torus, packed one bit per site (set = `+1`).
///
/// Magnetization counts and contour length are cached and updated on every flip.
#[derive(Clone)]
pub struct SpinConfiguration {
    spec: Arc<ModelSpec>,
    words: Vec<u64>,
    m_a: usize,
    m_b: usize,
    contour: usize,
}

impl PartialEq for SpinConfiguration {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words && *self.spec == *other.spec
    }
}

impl Eq for SpinConfiguration {}

impl std::hash::Hash for SpinConfiguration {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.words.hash(state);
    }
}

impl fmt::Debug for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SpinConfiguration {}", self.spec)?;
        let s = self.spec.side;
        for r in 0..s {
            let row: String = (0..s)
                .map(|c| if self.is_plus(r * s + c) { '+' } else { '-' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winding {
    None,
    Vertical,
    Horizontal,
    Both,
}

impl Winding {
    pub fn winds(self) -> bool {
        self != Winding::None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Site indices, sorted.
    pub cells: Vec<usize>,
    pub positive: bool,
    pub winding: Winding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    pub clusters: Vec<Cluster>,
}

impl ClusterDecomposition {
    pub fn positive(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| c.positive)
    }

    pub fn negative(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| !c.positive)
    }
}

impl SpinConfiguration {
    pub fn all_minus(spec: &Arc<ModelSpec>) -> Self {
        let words = vec![0u64; spec.num_sites().div_ceil(64)];
        SpinConfiguration {
            spec: spec.clone(),
            words,
            m_a: 0,
            m_b: 0,
            contour: 0,
        }
    }

    pub fn all_plus(spec: &Arc<ModelSpec>) -> Self {
        let mut c = Self::all_minus(spec);
        for i in 0..spec.num_sites() {
            c.words[i / 64] |= 1 << (i % 64);
        }
        c.recompute_caches();
        c
    }

    /// All-minus except the listed sites.
    pub fn from_plus_sites<I: IntoIterator<Item = usize>>(spec: &Arc<ModelSpec>, sites: I) -> Self {
        let mut c = Self::all_minus(spec);
        for i in sites {
            c.words[i / 64] |= 1 << (i % 64);
        }
        c.recompute_caches();
        c
    }

    /// All-plus except the listed sites.
    pub fn from_minus_sites<I: IntoIterator<Item = usize>>(
        spec: &Arc<ModelSpec>,
        sites: I,
    ) -> Self {
        let mut c = Self::all_plus(spec);
        for i in sites {
            c.words[i / 64] &= !(1 << (i % 64));
        }
        c.recompute_caches();
        c
    }

    pub fn from_spins(spec: &Arc<ModelSpec>, spins: &[i8]) -> Result<Self> {
        if spins.len() != spec.num_sites() {
            return Err(ModelError::Format(format!(
                "expected {} spins, got {}",
                spec.num_sites(),
                spins.len()
            )));
        }
        if spins.iter().any(|&x| x != 1 && x != -1) {
            return Err(ModelError::Format("spins must be +1 or -1".into()));
        }
        Ok(Self::from_plus_sites(
            spec,
            (0..spins.len()).filter(|&i| spins[i] == 1),
        ))
    }

    /// Configuration whose bit `i` of `bits` is site `i` (requires at most 64 sites).
    pub fn from_bits(spec: &Arc<ModelSpec>, bits: u64) -> Self {
        assert!(
            spec.num_sites() <= 64,
            "bit encoding needs at most 64 sites"
        );
        let mut c = Self::all_minus(spec);
        c.words[0] = bits;
        c.recompute_caches();
        c
    }

    pub fn to_bits(&self) -> u64 {
        assert!(
            self.spec.num_sites() <= 64,
            "bit encoding needs at most 64 sites"
        );
        self.words[0]
    }

    pub fn spec(&self) -> &Arc<ModelSpec> {
        &self.spec
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn num_sites(&self) -> usize {
        self.spec.num_sites()
    }

    #[inline]
    pub fn is_plus(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn spin(&self, i: usize) -> i32 {
        if self.is_plus(i) {
            1
        } else {
            -1
        }
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.num_sites()).map(|i| self.spin(i) as i8).collect()
    }

    pub fn plus_sites(&self) -> Vec<usize> {
        (0..self.num_sites()).filter(|&i| self.is_plus(i)).collect()
    }

    pub fn plus_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Flip one site, keeping the caches exact.
    pub fn flip(&mut self, i: usize) {
        let s = self.spin(i);
        let same = self
            .spec
            .neighbor_indices(i)
            .iter()
            .filter(|&&j| self.spin(j) == s)
            .count();
        // Same-sign neighbors become disagreeing edges and vice versa.
        self.contour = self.contour + same - (4 - same);
        match self.spec.region_of_col(i % self.spec.side) {
            Region::A => {
                if s == 1 {
                    self.m_a -= 1
                } else {
                    self.m_a += 1
                }
            }
            Region::B => {
                if s == 1 {
                    self.m_b -= 1
                } else {
                    self.m_b += 1
                }
            }
            _ => {}
        }
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn set(&mut self, i: usize, plus: bool) {
        if self.is_plus(i) != plus {
            self.flip(i);
        }
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.flip(i);
        c
    }

    fn recompute_caches(&mut self) {
        let (m_a, m_b) = self.recount_magnetization();
        self.m_a = m_a;
        self.m_b = m_b;
        self.contour = self.recount_contour();
    }

    fn recount_magnetization(&self) -> (usize, usize) {
        let (mut m_a, mut m_b) = (0, 0);
        for i in 0..self.num_sites() {
            if self.is_plus(i) {
                match self.spec.region_of_col(i % self.spec.side) {
                    Region::A => m_a += 1,
                    Region::B => m_b += 1,
                    _ => {}
                }
            }
        }
        (m_a, m_b)
    }

    fn recount_contour(&self) -> usize {
        let s = self.spec.side;
        let mut count = 0;
        for i in 0..self.num_sites() {
            let (r, c) = (i / s, i % s);
            let down = ((r + 1) % s) * s + c;
            let right = r * s + (c + 1) % s;
            count += (self.is_plus(i) != self.is_plus(down)) as usize;
            count += (self.is_plus(i) != self.is_plus(right)) as usize;
        }
        count
    }

    /// True when the cached aggregates match a full recount.
    pub fn caches_consistent(&self) -> bool {
        self.recount_magnetization() == (self.m_a, self.m_b)
            && self.recount_contour() == self.contour
    }

    /// Number of `+1` agents in `A` and in `B`.
    pub fn magnetization_counts(&self) -> (usize, usize) {
        (self.m_a, self.m_b)
    }

    /// Number of edges joining opposite spins.
    pub fn contour_length(&self) -> usize {
        self.contour
    }

    /// Sum of `s_i * sigma_i` over all sites and of `sigma_i * sigma_j` over
    /// undirected edges, by direct summation.
    pub fn direct_sums(&self) -> (i64, i64) {
        let s = self.spec.side;
        let prefs = self.spec.preferences();
        let mut field = 0i64;
        let mut pair = 0i64;
        for i in 0..self.num_sites() {
            let si = self.spin(i) as i64;
            field += prefs[i] as i64 * si;
            let (r, c) = (i / s, i % s);
            pair += si * self.spin(((r + 1) % s) * s + c) as i64;
            pair += si * self.spin(r * s + (c + 1) % s) as i64;
        }
        (field, pair)
    }

    /// Energy by summing the field and pair terms site by site and edge by edge.
    pub fn hamiltonian_direct(&self) -> Energy {
        let (field, pair) = self.direct_sums();
        Rational64::from_integer(-field) - self.spec.alpha * Rational64::new(pair, 2)
    }

    /// Energy from magnetization counts and contour length.
    pub fn hamiltonian_contour(&self) -> Energy {
        let spec = &self.spec;
        let (ns, n, m) = (spec.side as i64, spec.n as i64, spec.m as i64);
        let base = ns * (n - m) + 2 * (self.m_b as i64 - self.m_a as i64);
        Rational64::from_integer(base) + spec.alpha * (self.contour as i64 - ns * ns)
    }

    /// Energy (cached form).
    #[inline]
    pub fn energy(&self) -> Energy {
        self.hamiltonian_contour()
    }

    /// Integer parts `(f, c)` of the flip energy change `f + alpha * c`.
    #[inline]
    pub fn delta_parts(&self, i: usize) -> (i64, i64) {
        let s = self.spin(i) as i64;
        let pref = self.spec.region_of_col(i % self.spec.side).preference() as i64;
        let nsum: i64 = self
            .spec
            .neighbor_indices(i)
            .iter()
            .map(|&j| self.spin(j) as i64)
            .sum();
        (2 * pref * s, s * nsum)
    }

    /// `H(flip(sigma, i)) - H(sigma)` from the four neighbors.
    pub fn delta_h(&self, i: usize) -> Energy {
        let (f, c) = self.delta_parts(i);
        Rational64::from_integer(f) + self.spec.alpha * c
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Sites where the two configurations differ.
    pub fn diff_sites(&self, other: &Self) -> Vec<usize> {
        (0..self.num_sites())
            .filter(|&i| self.is_plus(i) != other.is_plus(i))
            .collect()
    }

    /// Global spin flip composed with the column reflection exchanging `A` and `B`.
    pub fn mirror_flip(&self) -> Self {
        let spec = &self.spec;
        let s = spec.side;
        let c0 = spec.n + spec.k + spec.m - 1;
        let mut out = Self::all_minus(spec);
        for i in 0..self.num_sites() {
            let (r, c) = (i / s, i % s);
            let j = r * s + (c0 + s - c) % s;
            if !self.is_plus(i) {
                out.words[j / 64] |= 1 << (j % 64);
            }
        }
        out.recompute_caches();
        out
    }

    /// Row-major `+`/`-` string.
    pub fn to_pm_string(&self) -> String {
        (0..self.num_sites())
            .map(|i| if self.is_plus(i) { '+' } else { '-' })
            .collect()
    }

    pub fn from_pm_string(spec: &Arc<ModelSpec>, text: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.len() != spec.num_sites() {
            return Err(ModelError::Format(format!(
                "expected {} symbols, got {}",
                spec.num_sites(),
                chars.len()
            )));
        }
        let mut plus = Vec::new();
        for (i, ch) in chars.iter().enumerate() {
            match ch {
                '+' => plus.push(i),
                '-' => {}
                other => return Err(ModelError::Format(format!("unexpected symbol '{other}'"))),
            }
        }
        Ok(Self::from_plus_sites(spec, plus))
    }

    /// Run-length form of the `+`/`-` string, e.g. `12+4-`.
    pub fn to_rle(&self) -> String {
        let pm = self.to_pm_string();
        let mut out = String::new();
        let bytes = pm.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let mut j = i;
            while j < bytes.len() && bytes[j] == bytes[i] {
                j += 1;
            }
            out.push_str(&(j - i).to_string());
            out.push(bytes[i] as char);
            i = j;
        }
        out
    }

    pub fn from_rle(spec: &Arc<ModelSpec>, text: &str) -> Result<Self> {
        let mut expanded = String::with_capacity(spec.num_sites());
        let mut count = String::new();
        for ch in text.chars().filter(|c| !c.is_whitespace()) {
            if ch.is_ascii_digit() {
                count.push(ch);
            } else if ch == '+' || ch == '-' {
                let reps: usize = if count.is_empty() {
                    1
                } else {
                    count
                        .parse()
                        .map_err(|_| ModelError::Format("bad run length".into()))?
                };
                if expanded.len() + reps > spec.num_sites() {
                    return Err(ModelError::Format("run lengths exceed grid size".into()));
                }
                expanded.extend(std::iter::repeat_n(ch, reps));
                count.clear();
            } else {
                return Err(ModelError::Format(format!("unexpected symbol '{ch}'")));
            }
        }
        if !count.is_empty() {
            return Err(ModelError::Format("dangling run length".into()));
        }
        Self::from_pm_string(spec, &expanded)
    }

    /// Maximal edge-connected same-sign components with winding flags.
    pub fn decompose_clusters(&self) -> ClusterDecomposition {
        let n = self.num_sites();
        let mut seen = vec![false; n];
        let mut clusters = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let sign = self.is_plus(start);
            let (cells, winding) = component_with_winding(self.spec.side, start, &mut seen, |j| {
                self.is_plus(j) == sign
            });
            clusters.push(Cluster {
                cells,
                positive: sign,
                winding,
            });
        }
        ClusterDecomposition { clusters }
    }
}

/// Grows the component of `start` among cells satisfying `member`, marking
/// them in `seen`, and detects winding by lifting cells to the plane.
pub(crate) fn component_with_winding<F: Fn(usize) -> bool>(
    side: usize,
    start: usize,
    seen: &mut [bool],
    member: F,
) -> (Vec<usize>, Winding) {
    let s = side as i64;
    let mut lift: Vec<Option<(i64, i64)>> = vec![None; side * side];
    let mut queue = VecDeque::new();
    let mut cells = Vec::new();
    let (mut vert, mut horiz) = (false, false);
    lift[start] = Some(((start / side) as i64, (start % side) as i64));
    seen[start] = true;
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        cells.push(u);
        let (lr, lc) = lift[u].unwrap();
        let (r, c) = ((u / side) as i64, (u % side) as i64);
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let v = (((r + dr).rem_euclid(s)) * s + (c + dc).rem_euclid(s)) as usize;
            if !member(v) {
                continue;
            }
            let want = (lr + dr, lc + dc);
            match lift[v] {
                None => {
                    lift[v] = Some(want);
                    seen[v] = true;
                    queue.push_back(v);
                }
                Some(have) => {
                    if have.0 != want.0 {
                        vert = true;
                    }
                    if have.1 != want.1 {
                        horiz = true;
                    }
                }
            }
        }
    }
    cells.sort_unstable();
    let winding = match (vert, horiz) {
        (false, false) => Winding::None,
        (true, false) => Winding::Vertical,
        (false, true) => Winding::Horizontal,
        (true, true) => Winding::Both,
    };
    (cells, winding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e1() -> Arc<ModelSpec> {
        Arc::new(ModelSpec::strict(12, 3, 5, 2, 2).unwrap())
    }

    fn int(v: i64) -> Energy {
        Energy::from_integer(v)
    }

    fn random_config(spec: &Arc<ModelSpec>, rng: &mut ChaCha8Rng) -> SpinConfiguration {
        let p: f64 = rng.random();
        let plus: Vec<usize> = (0..spec.num_sites())
            .filter(|_| rng.random::<f64>() < p)
            .collect();
        SpinConfiguration::from_plus_sites(spec, plus)
    }

    // Independent oracle: double sum over ordered neighbor pairs, which counts
    // every edge twice.
    fn oracle_energy(c: &SpinConfiguration) -> Energy {
        let spec = c.spec();
        let mut field = 0i64;
        let mut ordered = 0i64;
        for i in 0..spec.num_sites() {
            let site = crate::Site::from_index(i, spec.side);
            field += spec.hidden_preference(site) as i64 * c.spin(i) as i64;
            for nb in spec.neighbors(site) {
                ordered += c.spin(i) as i64 * c.spin(nb.index(spec.side)) as i64;
            }
        }
        int(-field) - spec.alpha * Energy::new(ordered, 4)
    }

    #[test]
    fn homogeneous_energies() {
        let s = e1();
        let minus = SpinConfiguration::all_minus(&s);
        let plus = SpinConfiguration::all_plus(&s);
        assert_eq!(minus.hamiltonian_direct(), int(-312));
        assert_eq!(minus.hamiltonian_contour(), int(-312));
        assert_eq!(plus.hamiltonian_direct(), int(-264));
        assert_eq!(plus.magnetization_counts(), (36, 60));
        assert_eq!(minus.magnetization_counts(), (0, 0));
        assert_eq!(plus.contour_length(), 0);
    }

    #[test]
    fn strip_a_energy_and_contour() {
        let s = e1();
        let c = SpinConfiguration::from_plus_sites(&s, (0..144).filter(|i| i % 12 < 3));
        assert_eq!(c.hamiltonian_contour(), int(-336));
        assert_eq!(c.hamiltonian_direct(), int(-336));
        assert_eq!(c.magnetization_counts(), (36, 0));
        assert_eq!(c.contour_length(), 24);
    }

    #[test]
    fn single_flip_contour_and_delta() {
        let s = e1();
        let minus = SpinConfiguration::all_minus(&s);
        let one = minus.flipped(1);
        assert_eq!(one.contour_length(), 4);
        assert_eq!(minus.delta_h(1), int(6));
        // neutral site inside a uniform region costs 4 alpha
        assert_eq!(minus.delta_h(10), s.alpha * 4);
    }

    #[test]
    fn toy_single_plus_matches_oracle() {
        let s = Arc::new(ModelSpec::relaxed(4, 1, 1, 1, Energy::from_integer(1)).unwrap());
        let c = SpinConfiguration::from_plus_sites(&s, [0]);
        assert_eq!(c.hamiltonian_direct(), oracle_energy(&c));
        let base = SpinConfiguration::all_minus(&s);
        // field term -2 (site in A) plus four broken bonds at alpha = 1
        assert_eq!(c.hamiltonian_direct() - base.hamiltonian_direct(), int(2));
    }

    #[test]
    fn fuzz_energy_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = [
            ModelSpec::strict(12, 3, 5, 2, 2).unwrap(),
            ModelSpec::strict(8, 3, 3, 1, 3).unwrap(),
            ModelSpec::relaxed(6, 1, 3, 1, Energy::new(5, 3)).unwrap(),
        ];
        for spec in specs {
            let spec = Arc::new(spec);
            for _ in 0..400 {
                let mut c = random_config(&spec, &mut rng);
                assert_eq!(c.hamiltonian_direct(), c.hamiltonian_contour());
                assert_eq!(c.hamiltonian_direct(), oracle_energy(&c));
                let (_, pair) = c.direct_sums();
                assert_eq!(
                    pair + 2 * c.contour_length() as i64,
                    2 * (spec.side * spec.side) as i64
                );
                let i = rng.random_range(0..spec.num_sites());
                let before = c.hamiltonian_direct();
                let dh = c.delta_h(i);
                c.flip(i);
                assert!(c.caches_consistent());
                assert_eq!(c.hamiltonian_direct() - before, dh);
                assert_eq!(c.delta_h(i), -dh);
            }
        }
    }

    #[test]
    fn mirror_flip_preserves_energy_when_strips_match() {
        let spec = Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = random_config(&spec, &mut rng);
            assert_eq!(c.mirror_flip().energy(), c.energy());
        }
    }

    #[test]
    fn serialization_round_trip() {
        let spec = e1();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let c = random_config(&spec, &mut rng);
            assert_eq!(
                SpinConfiguration::from_pm_string(&spec, &c.to_pm_string()).unwrap(),
                c
            );
            assert_eq!(SpinConfiguration::from_rle(&spec, &c.to_rle()).unwrap(), c);
        }
        assert_eq!(SpinConfiguration::all_minus(&spec).to_rle(), "144-");
        assert!(SpinConfiguration::from_pm_string(&spec, "+-").is_err());
    }

    #[test]
    fn clusters() {
        let spec = e1();
        let strip = SpinConfiguration::from_plus_sites(&spec, (0..144).filter(|i| i % 12 < 3));
        let d = strip.decompose_clusters();
        assert_eq!(d.clusters.len(), 2);
        assert!(d.clusters.iter().all(|c| c.winding == Winding::Vertical));
        let minus = SpinConfiguration::all_minus(&spec).decompose_clusters();
        assert_eq!(minus.clusters.len(), 1);
        assert_eq!(minus.clusters[0].winding, Winding::Both);
        let square =
            SpinConfiguration::from_plus_sites(&spec, [13, 14, 25, 26]).decompose_clusters();
        let pos: Vec<_> = square.positive().collect();
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].winding, Winding::None);
        assert_eq!(pos[0].cells, vec![13, 14, 25, 26]);
    }

    #[test]
    fn clusters_partition_and_boundary_sum() {
        let spec = Arc::new(ModelSpec::strict(8, 3, 3, 1, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let c = random_config(&spec, &mut rng);
            let d = c.decompose_clusters();
            let total: usize = d.clusters.iter().map(|x| x.cells.len()).sum();
            assert_eq!(total, 64);
            let boundary: usize = d
                .positive()
                .map(|cl| {
                    cl.cells
                        .iter()
                        .map(|&i| {
                            spec.neighbor_indices(i)
                                .iter()
                                .filter(|&&j| !c.is_plus(j))
                                .count()
                        })
                        .sum::<usize>()
                })
                .sum();
            assert_eq!(boundary, c.contour_length());
        }
    }
}
