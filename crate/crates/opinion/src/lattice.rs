//! Toric grid, strip layout of hidden preferences, and parameter regimes.
//!
//! Columns are laid out left to right as `A | S1 | B | S2` with widths
//! `n`, `k`, `m`, `k`. Sites are indexed row-major: `row * N + col`.

use crate::error::SpecError;
use crate::Energy;
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub row: usize,
    pub col: usize,
}

impl Site {
    pub fn new(row: usize, col: usize, side: usize) -> Self {
        Site {
            row: row % side,
            col: col % side,
        }
    }

    pub fn index(&self, side: usize) -> usize {
        self.row * side + self.col
    }

    pub fn from_index(idx: usize, side: usize) -> Self {
        Site {
            row: idx / side,
            col: idx % side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    A,
    S1,
    B,
    S2,
}

impl Region {
    pub fn preference(self) -> i32 {
        match self {
            Region::A => 1,
            Region::B => -1,
            Region::S1 | Region::S2 => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    LowAlpha,
    CriticalEqual,
    CriticalStrict,
    MidAlpha,
    HighAlpha,
    VeryHighAlpha,
    Unsupported,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Parameters of one model instance. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub side: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub alpha: Rational64,
    pub strict: bool,
}

impl ModelSpec {
    pub fn new(
        side: usize,
        n: usize,
        m: usize,
        k: usize,
        alpha: Rational64,
        strict: bool,
    ) -> Result<Self, SpecError> {
        let spec = ModelSpec {
            side,
            n,
            m,
            k,
            alpha,
            strict,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Strict spec with integer interaction strength.
    pub fn strict(
        side: usize,
        n: usize,
        m: usize,
        k: usize,
        alpha: i64,
    ) -> Result<Self, SpecError> {
        Self::new(side, n, m, k, Rational64::from_integer(alpha), true)
    }

    /// Non-strict spec, used for tiny lattices and oracles.
    pub fn relaxed(
        side: usize,
        n: usize,
        m: usize,
        k: usize,
        alpha: Rational64,
    ) -> Result<Self, SpecError> {
        Self::new(side, n, m, k, alpha, false)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.side < 2 {
            return Err(SpecError::Invalid(format!(
                "grid side {} too small",
                self.side
            )));
        }
        if self.n < 1 || self.k < 1 || self.m < self.n {
            return Err(SpecError::Invalid(format!(
                "need n >= 1, k >= 1, m >= n (got n={}, m={}, k={})",
                self.n, self.m, self.k
            )));
        }
        if self.n + self.m + 2 * self.k != self.side {
            return Err(SpecError::Partition {
                n: self.n,
                m: self.m,
                k: self.k,
                side: self.side,
            });
        }
        if self.alpha < Rational64::zero() {
            return Err(SpecError::Invalid("alpha must be non-negative".into()));
        }
        if self.strict {
            if let Some(why) = self.assumption_violation() {
                return Err(SpecError::Assumption(why));
            }
        }
        Ok(())
    }

    /// First violated modelling assumption, if any.
    pub fn assumption_violation(&self) -> Option<String> {
        let n_side = self.side;
        if n_side % 2 != 0 {
            return Some(format!("grid side {n_side} is odd"));
        }
        if self.n < 3 {
            return Some(format!("strip width n={} is below 3", self.n));
        }
        if 2 * self.k >= n_side {
            return Some(format!("neutral width k={} is not below N/2", self.k));
        }
        if !self.alpha.is_integer() {
            return Some(format!("alpha={} is not an integer", self.alpha));
        }
        let a = *self.alpha.numer();
        let (n, m) = (self.n as i64, self.m as i64);
        if a < 2 {
            return Some(format!("alpha={a} is below 2"));
        }
        if a > n && a <= m {
            return Some(format!(
                "alpha={a} lies in the excluded range n < alpha <= m ({n}, {m}]"
            ));
        }
        None
    }

    pub fn num_sites(&self) -> usize {
        self.side * self.side
    }

    pub fn num_edges(&self) -> usize {
        2 * self.side * self.side
    }

    pub fn region_of_col(&self, col: usize) -> Region {
        let (n, k, m) = (self.n, self.k, self.m);
        if col < n {
            Region::A
        } else if col < n + k {
            Region::S1
        } else if col < n + k + m {
            Region::B
        } else {
            Region::S2
        }
    }

    pub fn region(&self, site: Site) -> Region {
        self.region_of_col(site.col)
    }

    pub fn hidden_preference(&self, site: Site) -> i32 {
        self.region(site).preference()
    }

    /// Column range `[start, end)` of a region.
    pub fn region_cols(&self, region: Region) -> (usize, usize) {
        let (n, k, m) = (self.n, self.k, self.m);
        match region {
            Region::A => (0, n),
            Region::S1 => (n, n + k),
            Region::B => (n + k, n + k + m),
            Region::S2 => (n + k + m, self.side),
        }
    }

    /// Region label of every site, row-major.
    pub fn build_layout(&self) -> Vec<Region> {
        (0..self.num_sites())
            .map(|i| self.region_of_col(i % self.side))
            .collect()
    }

    /// Hidden preference of every site, row-major.
    pub fn preferences(&self) -> Vec<i8> {
        (0..self.num_sites())
            .map(|i| self.region_of_col(i % self.side).preference() as i8)
            .collect()
    }

    /// Up, down, left, right, with wraparound.
    pub fn neighbors(&self, site: Site) -> [Site; 4] {
        let s = self.side;
        [
            Site {
                row: (site.row + s - 1) % s,
                col: site.col,
            },
            Site {
                row: (site.row + 1) % s,
                col: site.col,
            },
            Site {
                row: site.row,
                col: (site.col + s - 1) % s,
            },
            Site {
                row: site.row,
                col: (site.col + 1) % s,
            },
        ]
    }

    pub fn neighbor_indices(&self, idx: usize) -> [usize; 4] {
        let s = self.side;
        let (r, c) = (idx / s, idx % s);
        [
            ((r + s - 1) % s) * s + c,
            ((r + 1) % s) * s + c,
            r * s + (c + s - 1) % s,
            r * s + (c + 1) % s,
        ]
    }

    /// Critical interaction strength separating the two high-alpha regimes.
    /// `None` when `m == 2`, where the expression is undefined.
    pub fn alpha_star(&self) -> Option<Rational64> {
        let (n_side, m) = (self.side as i64, self.m as i64);
        if m == 2 {
            return None;
        }
        Some(Rational64::new(n_side * (m - 1) - 2 * m, m - 2))
    }

    pub fn classify_regime(&self) -> Regime {
        if self.assumption_violation().is_some() {
            return Regime::Unsupported;
        }
        let a = self.alpha;
        let n = Rational64::from_integer(self.n as i64);
        let m = Rational64::from_integer(self.m as i64);
        let two_k_m = Rational64::from_integer((2 * self.k + self.m) as i64);
        if a < n {
            Regime::LowAlpha
        } else if a == n {
            if self.n == self.m {
                Regime::CriticalEqual
            } else {
                Regime::CriticalStrict
            }
        } else if a >= m + Rational64::one() {
            if a < two_k_m {
                Regime::MidAlpha
            } else {
                match self.alpha_star() {
                    Some(star) if a < star => Regime::HighAlpha,
                    _ => Regime::VeryHighAlpha,
                }
            }
        } else {
            Regime::Unsupported
        }
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64().unwrap_or(f64::NAN)
    }

    /// Energy of the all-minus configuration.
    pub fn energy_all_minus(&self) -> Energy {
        let (ns, n, m) = (self.side as i64, self.n as i64, self.m as i64);
        Rational64::from_integer(ns * (n - m)) - self.alpha * (ns * ns)
    }

    /// Energy of the all-plus configuration.
    pub fn energy_all_plus(&self) -> Energy {
        let (ns, n, m) = (self.side as i64, self.n as i64, self.m as i64);
        Rational64::from_integer(ns * (m - n)) - self.alpha * (ns * ns)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: ModelSpec =
            serde_json::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(N={}, n={}, m={}, k={}, alpha={})",
            self.side, self.n, self.m, self.k, self.alpha
        )
    }
}

pub fn parse_rational(text: &str) -> Result<Rational64, SpecError> {
    let t = text.trim();
    let bad = || SpecError::Parse(format!("cannot parse rational '{t}'"));
    match t.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(p, q))
        }
        None => Ok(Rational64::from_integer(t.parse().map_err(|_| bad())?)),
    }
}

pub fn format_rational(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    #[serde(rename = "N")]
    side: usize,
    n: usize,
    m: usize,
    k: usize,
    alpha: serde_json::Value,
    #[serde(default = "default_strict")]
    strict: bool,
}

fn default_strict() -> bool {
    true
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let alpha = if self.alpha.is_integer() {
            serde_json::Value::from(*self.alpha.numer())
        } else {
            serde_json::Value::from(format_rational(&self.alpha))
        };
        RawSpec {
            side: self.side,
            n: self.n,
            m: self.m,
            k: self.k,
            alpha,
            strict: self.strict,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = RawSpec::deserialize(deserializer)?;
        let alpha = match &raw.alpha {
            serde_json::Value::Number(v) => match v.as_i64() {
                Some(i) => Rational64::from_integer(i),
                None => {
                    return Err(D::Error::custom(
                        "alpha must be an integer or a \"p/q\" string",
                    ))
                }
            },
            serde_json::Value::String(s) => parse_rational(s).map_err(D::Error::custom)?,
            _ => {
                return Err(D::Error::custom(
                    "alpha must be an integer or a \"p/q\" string",
                ))
            }
        };
        Ok(ModelSpec {
            side: raw.side,
            n: raw.n,
            m: raw.m,
            k: raw.k,
            alpha,
            strict: raw.strict,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> ModelSpec {
        ModelSpec::strict(12, 3, 5, 2, 2).unwrap()
    }

    #[test]
    fn layout_columns() {
        let s = e1();
        assert_eq!(s.region(Site::new(0, 0, 12)), Region::A);
        assert_eq!(s.region(Site::new(0, 4, 12)), Region::S1);
        assert_eq!(s.region(Site::new(0, 7, 12)), Region::B);
        assert_eq!(s.region(Site::new(0, 11, 12)), Region::S2);
    }

    #[test]
    fn region_sizes() {
        let s = ModelSpec::strict(8, 3, 3, 1, 2).unwrap();
        let layout = s.build_layout();
        let count = |r| layout.iter().filter(|&&x| x == r).count();
        assert_eq!(count(Region::A), 24);
        assert_eq!(count(Region::B), 24);
        assert_eq!(count(Region::S1) + count(Region::S2), 16);
    }

    #[test]
    fn partition_rejected() {
        let err = ModelSpec::strict(8, 3, 4, 1, 2).unwrap_err();
        assert!(matches!(err, SpecError::Partition { .. }));
    }

    #[test]
    fn preferences() {
        let s = e1();
        assert_eq!(s.hidden_preference(Site::new(0, 1, 12)), 1);
        assert_eq!(s.hidden_preference(Site::new(5, 8, 12)), -1);
        assert_eq!(s.hidden_preference(Site::new(3, 10, 12)), 0);
    }

    #[test]
    fn torus_neighbors() {
        let s = ModelSpec::strict(8, 3, 3, 1, 2).unwrap();
        let mut nb = s.neighbors(Site::new(0, 0, 8)).to_vec();
        nb.sort_by_key(|x| (x.row, x.col));
        assert_eq!(
            nb,
            vec![
                Site::new(0, 1, 8),
                Site::new(0, 7, 8),
                Site::new(1, 0, 8),
                Site::new(7, 0, 8)
            ]
        );
        let nb = s.neighbors(Site::new(3, 3, 8));
        assert!(nb.contains(&Site::new(2, 3, 8)) && nb.contains(&Site::new(4, 3, 8)));
        assert!(nb.contains(&Site::new(3, 2, 8)) && nb.contains(&Site::new(3, 4, 8)));
        let mut edges = 0;
        for i in 0..s.num_sites() {
            for j in s.neighbor_indices(i) {
                assert!(s.neighbor_indices(j).contains(&i));
                edges += 1;
            }
        }
        assert_eq!(edges / 2, 128);
    }

    #[test]
    fn regimes() {
        assert_eq!(e1().classify_regime(), Regime::LowAlpha);
        assert_eq!(
            ModelSpec::strict(12, 3, 5, 2, 6).unwrap().classify_regime(),
            Regime::MidAlpha
        );
        let s = ModelSpec::strict(12, 3, 5, 2, 13).unwrap();
        assert_eq!(s.alpha_star(), Some(Rational64::new(38, 3)));
        assert_eq!(s.classify_regime(), Regime::VeryHighAlpha);
        assert_eq!(
            ModelSpec::strict(12, 3, 5, 2, 12)
                .unwrap()
                .classify_regime(),
            Regime::HighAlpha
        );
        assert_eq!(
            ModelSpec::strict(8, 3, 3, 1, 3).unwrap().classify_regime(),
            Regime::CriticalEqual
        );
        assert_eq!(
            ModelSpec::strict(12, 3, 5, 2, 3).unwrap().classify_regime(),
            Regime::CriticalStrict
        );
        let toy = ModelSpec::relaxed(4, 1, 1, 1, Rational64::one()).unwrap();
        assert_eq!(toy.classify_regime(), Regime::Unsupported);
        assert!(ModelSpec::strict(12, 3, 5, 2, 4).is_err());
    }

    #[test]
    fn reflection_swaps_strips_when_widths_match() {
        let s = ModelSpec::strict(8, 3, 3, 1, 2).unwrap();
        // col -> (n + k + m - 1 - col) mod N exchanges A and B; each neutral
        // strip sits between them on one side and is mapped onto itself.
        for col in 0..8 {
            let mirrored = (s.n + s.k + s.m - 1 + 8 - col) % 8;
            let (a, b) = (s.region_of_col(col), s.region_of_col(mirrored));
            let expected = match a {
                Region::A => Region::B,
                Region::B => Region::A,
                Region::S1 => Region::S1,
                Region::S2 => Region::S2,
            };
            assert_eq!(b, expected, "col {col}");
        }
    }

    #[test]
    fn json_round_trip() {
        let s = ModelSpec::relaxed(4, 1, 1, 1, Rational64::new(3, 2)).unwrap();
        let text = s.to_json();
        assert!(text.contains("\"3/2\""));
        assert_eq!(ModelSpec::from_json(&text).unwrap(), s);
        let parsed =
            ModelSpec::from_json(r#"{"N":12,"n":3,"m":5,"k":2,"alpha":2,"strict":true}"#).unwrap();
        assert_eq!(parsed, e1());
    }
}
