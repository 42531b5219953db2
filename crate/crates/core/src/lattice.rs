//! Finitely supported coupling sequences `α = (α_j)` on the integer lattice.
//!
//! A [`CouplingSequence`] is the only way couplings enter the rest of the
//! crate, so every constructor goes through [`canonicalize`]: sites are sorted
//! and unique, strengths are finite and nonzero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One delta interaction `value · δ(x − j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub j: i64,
    pub value: f64,
}

/// Sorted, deduplicated list of nonzero couplings. Empty means the free Laplacian.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CouplingSequence {
    #[serde(rename = "alpha")]
    entries: Vec<Coupling>,
}

#[derive(Deserialize)]
struct RawSequence {
    alpha: Vec<Coupling>,
}

impl<'de> Deserialize<'de> for CouplingSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawSequence::deserialize(d)?;
        canonicalize(raw.alpha.into_iter().map(|c| (c.j, c.value)))
            .map_err(serde::de::Error::custom)
    }
}

/// Sorts by site, sums strengths that share a site and drops zeros.
pub fn canonicalize<I>(raw: I) -> Result<CouplingSequence>
where
    I: IntoIterator<Item = (i64, f64)>,
{
    let mut pairs: Vec<(i64, f64)> = raw.into_iter().collect();
    if let Some(&(j, v)) = pairs.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite strength {v} at site {j}")));
    }
    pairs.sort_by_key(|&(j, _)| j);

    let mut entries: Vec<Coupling> = Vec::with_capacity(pairs.len());
    for (j, value) in pairs {
        match entries.last_mut() {
            Some(last) if last.j == j => last.value += value,
            _ => entries.push(Coupling { j, value }),
        }
    }
    entries.retain(|c| c.value != 0.0);
    Ok(CouplingSequence { entries })
}

/// `Σ_j |j|^s |α_j|` over the finite support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNormReport {
    pub s: f64,
    pub value: f64,
}

/// Weighted ℓ¹ norm with the convention `0^0 = 1`, so `s = 0` is the plain ℓ¹ norm.
pub fn weighted_norm(seq: &CouplingSequence, s: f64) -> Result<WeightedNormReport> {
    if !s.is_finite() {
        return Err(Error::Input(format!("weight exponent must be finite, got {s}")));
    }
    let value = seq
        .iter()
        .map(|c| {
            let w = if c.j == 0 {
                if s == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (c.j.unsigned_abs() as f64).powf(s)
            };
            w * c.value.abs()
        })
        .sum();
    Ok(WeightedNormReport { s, value })
}

impl CouplingSequence {
    /// The free case.
    pub fn free() -> Self {
        Self::default()
    }

    pub fn new<I>(raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        canonicalize(raw)
    }

    /// Convenience for a single delta at `site`.
    pub fn single(site: i64, strength: f64) -> Result<Self> {
        canonicalize([(site, strength)])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Coupling> + DoubleEndedIterator + Clone {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[Coupling] {
        &self.entries
    }

    pub fn sites(&self) -> impl ExactSizeIterator<Item = i64> + '_ {
        self.entries.iter().map(|c| c.j)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Strength at `site`, zero off the support.
    pub fn strength(&self, site: i64) -> f64 {
        self.entries
            .binary_search_by_key(&site, |c| c.j)
            .map(|k| self.entries[k].value)
            .unwrap_or(0.0)
    }

    /// `‖α‖_{ℓ¹}`.
    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|c| c.value.abs()).sum()
    }

    /// Largest `|j|` over the support, 0 when free.
    pub fn support_radius(&self) -> i64 {
        self.entries.iter().map(|c| c.j.abs()).max().unwrap_or(0)
    }

    /// Smallest and largest site, `None` when free.
    pub fn support_span(&self) -> Option<(i64, i64)> {
        Some((self.entries.first()?.j, self.entries.last()?.j))
    }
}
