//! Shared per-modulus class tables.
//!
//! For a fixed `c`, the residues `d mod 2c` of the right parity and coprime
//! to `c` index the translation cosets with that lower-left entry. Each
//! class carries its completion entry `alpha` and normalized Gauss sum `g`;
//! both depend on `d` only through `d mod 2c`, so they are tabulated once.

use dashmap::DashMap;
use num_complex::Complex64;
use std::sync::{Arc, OnceLock};

use crate::modular::{g_small, gcd};
use crate::words::{alpha_entry, BottomRow, RowKind};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ClassEntry {
    /// Residue in `[0, 2c)` (odd for `EvenC`, even for `OddC`).
    pub d0: i64,
    /// Completion entry of the member with this bottom row.
    pub alpha: i64,
    /// Normalized Gauss sum `g_c(d0)`.
    pub g: Complex64,
}

const CACHE_C_LIMIT: i64 = 4096;

fn cache() -> &'static DashMap<(RowKind, i64), Arc<Vec<ClassEntry>>> {
    static CACHE: OnceLock<DashMap<(RowKind, i64), Arc<Vec<ClassEntry>>>> = OnceLock::new();
    CACHE.get_or_init(DashMap::new)
}

fn build(kind: RowKind, c: i64) -> Result<Arc<Vec<ClassEntry>>> {
    let start = match kind {
        RowKind::EvenC => 1,
        RowKind::OddC => 0,
    };
    let mut entries = Vec::new();
    let mut d0 = start;
    while d0 < 2 * c {
        if gcd(c, d0) == 1 {
            let row = BottomRow::new(c, if d0 == 0 { 0 } else { d0 }, kind)?;
            let alpha = alpha_entry(&row)?;
            let g = g_small(c, d0)?.value;
            entries.push(ClassEntry { d0, alpha, g });
        }
        d0 += 2;
    }
    Ok(Arc::new(entries))
}

/// The classes for modulus `c` of the given kind, cached for small `c`.
pub(crate) fn classes(kind: RowKind, c: i64) -> Result<Arc<Vec<ClassEntry>>> {
    debug_assert!(c >= 1);
    debug_assert!((c % 2 == 0) == matches!(kind, RowKind::EvenC));
    if c <= CACHE_C_LIMIT {
        if let Some(hit) = cache().get(&(kind, c)) {
            return Ok(hit.clone());
        }
        let built = build(kind, c)?;
        cache().insert((kind, c), built.clone());
        Ok(built)
    } else {
        build(kind, c)
    }
}

/// Iterate moduli of a kind: 2, 4, 6, ... or 1, 3, 5, ...
pub(crate) fn modulus_range(kind: RowKind, c_max: i64) -> impl Iterator<Item = i64> {
    let start = match kind {
        RowKind::EvenC => 2,
        RowKind::OddC => 1,
    };
    (0..).map(move |j| start + 2 * j).take_while(move |&c| c <= c_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts_match_units() {
        // EvenC: odd units mod 2c; OddC: even residues coprime to c
        let e = classes(RowKind::EvenC, 6).unwrap();
        assert_eq!(e.len(), 4); // d0 in {1,5,7,11}
        let o = classes(RowKind::OddC, 5).unwrap();
        assert_eq!(o.len(), 4); // d0 in {2,4,6,8}
        let s = classes(RowKind::OddC, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].alpha, 0);
    }
}
