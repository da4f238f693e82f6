//! Finite Hamiltonian spectra.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Relative tolerance below which two eigenvalues are treated as one level.
pub const MERGE_RELATIVE_TOLERANCE: f64 = 1e-9;
/// Absolute floor of the merge tolerance, relevant for energies near zero.
pub const MERGE_ABSOLUTE_TOLERANCE: f64 = 1e-12;
/// Largest Ising chain whose `2^L` configurations are enumerated.
pub const MAX_ISING_SPINS: usize = 24;

/// Returns true when `a` and `b` fall within the merge tolerance of each other.
pub fn energies_coincide(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= (MERGE_RELATIVE_TOLERANCE * scale).max(MERGE_ABSOLUTE_TOLERANCE)
}

/// A validated spectrum: distinct energies in increasing order, each with its
/// degeneracy. The Hilbert space dimension is the sum of multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    levels: Vec<(f64, usize)>,
    dim: usize,
}

impl Spectrum {
    /// Distinct `(energy, multiplicity)` pairs, energies strictly increasing.
    pub fn levels(&self) -> &[(f64, usize)] {
        &self.levels
    }

    /// Hilbert space dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Complex dimension `n` of the pure-state manifold.
    pub fn n(&self) -> usize {
        self.dim - 1
    }

    pub fn min_energy(&self) -> f64 {
        self.levels[0].0
    }

    pub fn max_energy(&self) -> f64 {
        self.levels[self.levels.len() - 1].0
    }

    pub fn width(&self) -> f64 {
        self.max_energy() - self.min_energy()
    }

    pub fn distinct_count(&self) -> usize {
        self.levels.len()
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.levels.iter().all(|&(_, m)| m == 1)
    }

    /// Eigenvalues repeated according to multiplicity, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.levels
            .iter()
            .flat_map(|&(e, m)| std::iter::repeat_n(e, m))
            .collect()
    }

    /// Applies `E -> scale * E + shift` to every level. `scale` must be positive.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Spectrum> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!(
                "affine scale must be positive, got {scale}"
            )));
        }
        make_spectrum(
            &self
                .levels
                .iter()
                .map(|&(e, m)| (scale * e + shift, m))
                .collect::<Vec<_>>(),
        )
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(e, m) in &self.levels {
            writeln!(f, "{e} {m}")?;
        }
        Ok(())
    }
}

/// Sorts, merges near-equal energies and validates a raw level list.
///
/// Energies within [`energies_coincide`] of the preceding energy join its
/// level; the merged level keeps the lowest energy of its group so that the
/// operation is idempotent.
pub fn make_spectrum(raw: &[(f64, usize)]) -> Result<Spectrum> {
    if raw.is_empty() {
        return Err(invalid("spectrum has no levels"));
    }
    for &(e, m) in raw {
        if !e.is_finite() {
            return Err(invalid(format!("energy {e} is not finite")));
        }
        if m == 0 {
            return Err(invalid(format!("level at energy {e} has multiplicity 0")));
        }
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut levels: Vec<(f64, usize)> = Vec::with_capacity(sorted.len());
    let mut last_in_group = f64::NAN;
    for (e, m) in sorted {
        match levels.last_mut() {
            Some(level) if energies_coincide(last_in_group, e) => level.1 += m,
            _ => levels.push((e, m)),
        }
        last_in_group = e;
    }

    let dim: usize = levels.iter().map(|&(_, m)| m).sum();
    if dim < 2 {
        return Err(invalid(format!(
            "Hilbert space dimension {dim} < 2 has no energy surface"
        )));
    }
    Ok(Spectrum { levels, dim })
}

/// Periodic chain of `spins` classical-basis spins with Hamiltonian
/// `-J Σ s_k s_{k+1} - B Σ s_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingChainSpec {
    pub spins: usize,
    pub coupling: f64,
    pub field: f64,
}

impl IsingChainSpec {
    pub fn new(spins: usize, coupling: f64, field: f64) -> Self {
        Self {
            spins,
            coupling,
            field,
        }
    }

    /// Raw `(energy, count)` pairs over all `2^L` configurations, before
    /// merging into a [`Spectrum`].
    pub fn enumerate(&self) -> Result<Vec<(f64, usize)>> {
        let l = self.spins;
        if l < 2 {
            return Err(invalid(format!(
                "Ising chain needs at least 2 spins, got {l}"
            )));
        }
        if l > MAX_ISING_SPINS {
            return Err(Error::ResourceLimit(format!(
                "Ising chain of {l} spins exceeds the enumeration limit of {MAX_ISING_SPINS}"
            )));
        }
        // Keyed on the integer bond sum and magnetization so that equal
        // energies are grouped exactly before any floating point enters.
        let mut counts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for config in 0u32..(1u32 << l) {
            let spin = |k: usize| {
                if (config >> (k % l)) & 1 == 1 {
                    -1i64
                } else {
                    1
                }
            };
            let bonds: i64 = (0..l).map(|k| spin(k) * spin(k + 1)).sum();
            let magnetization: i64 = (0..l).map(spin).sum();
            *counts.entry((bonds, magnetization)).or_default() += 1;
        }
        let mut raw: Vec<(f64, usize)> = counts
            .into_iter()
            .map(|((bonds, mag), c)| {
                (
                    -self.coupling * bonds as f64 - self.field * mag as f64 + 0.0,
                    c,
                )
            })
            .collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Distinct (bonds, magnetization) pairs can still share an energy exactly.
        let mut merged: Vec<(f64, usize)> = Vec::with_capacity(raw.len());
        for (e, c) in raw {
            match merged.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => merged.push((e, c)),
            }
        }
        Ok(merged)
    }
}

/// Exact spectrum of a periodic Ising chain by enumeration of all
/// configurations.
pub fn ising_spectrum(spec: &IsingChainSpec) -> Result<Spectrum> {
    make_spectrum(&spec.enumerate()?)
}

/// Parses the plain-text spectrum format: one `<energy> [<multiplicity>]`
/// per line, `#` comments, blank lines ignored.
pub fn parse_spectrum(text: &str) -> Result<Spectrum> {
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut fields = content.split_whitespace();
        let energy_text = fields.next().unwrap_or_default();
        let energy: f64 = energy_text
            .parse()
            .map_err(|_| parse_err(format!("cannot parse energy {energy_text:?}")))?;
        if !energy.is_finite() {
            return Err(parse_err(format!("energy {energy_text:?} is not finite")));
        }
        let multiplicity = match fields.next() {
            None => 1,
            Some(tok) => match tok.parse::<usize>() {
                Ok(m) if m >= 1 => m,
                _ => return Err(parse_err(format!("bad multiplicity {tok:?}"))),
            },
        };
        if let Some(extra) = fields.next() {
            return Err(parse_err(format!("unexpected trailing field {extra:?}")));
        }
        raw.push((energy, multiplicity));
    }
    make_spectrum(&raw)
}

/// Reads and parses a spectrum file.
pub fn load_spectrum(path: impl AsRef<Path>) -> Result<Spectrum> {
    parse_spectrum(&fs::read_to_string(path)?)
}
