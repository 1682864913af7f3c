//! Dense mixed-radix indexing of finite configuration spaces, plus the
//! compensated summation used for exact mass accounting.
//!
//! A configuration assigns one of `m` symbols to each of `n` sites; it is
//! stored as the integer Σ_k digit_k · m^k, where site `k` is the k-th vertex
//! in the graph's ascending-id order. All engines in the crate enumerate
//! these integers in increasing order, which fixes every iteration order.

use crate::error::EngineError;

/// The index layout of Ξ^n for a fixed alphabet size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigSpace {
    n_sites: usize,
    n_symbols: usize,
    size: usize,
}

impl ConfigSpace {
    /// Lays out `n_symbols^n_sites` configurations. Fails when that count
    /// does not fit a `usize`.
    pub fn new(n_sites: usize, n_symbols: usize) -> Result<Self, EngineError> {
        assert!(n_symbols >= 1, "alphabet cannot be empty");
        match (n_symbols as u128).checked_pow(n_sites as u32) {
            Some(s) if s <= usize::MAX as u128 => Ok(ConfigSpace {
                n_sites,
                n_symbols,
                size: s as usize,
            }),
            Some(s) => Err(EngineError::CapExceeded {
                needed: s,
                cap: usize::MAX,
            }),
            None => Err(EngineError::CapExceeded {
                needed: u128::MAX,
                cap: usize::MAX,
            }),
        }
    }

    pub fn site_count(&self) -> usize {
        self.n_sites
    }

    pub fn symbol_count(&self) -> usize {
        self.n_symbols
    }

    /// Number of configurations.
    pub fn size(&self) -> usize {
        self.size
    }

    /// The multiplier of site `site` in the index.
    pub fn stride(&self, site: usize) -> usize {
        self.n_symbols.pow(site as u32)
    }

    /// The symbol at `site` in configuration `cfg`.
    #[inline]
    pub fn symbol_at(&self, cfg: usize, site: usize) -> usize {
        (cfg / self.stride(site)) % self.n_symbols
    }

    /// `cfg` with the symbol at `site` replaced by `sym`.
    #[inline]
    pub fn with_symbol(&self, cfg: usize, site: usize, sym: usize) -> usize {
        let stride = self.stride(site);
        cfg - self.symbol_at(cfg, site) * stride + sym * stride
    }

    /// All site symbols of `cfg`, in site order.
    pub fn decode(&self, cfg: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_sites);
        let mut rest = cfg;
        for _ in 0..self.n_sites {
            out.push(rest % self.n_symbols);
            rest /= self.n_symbols;
        }
        out
    }

    /// The index of a full symbol assignment.
    pub fn encode(&self, symbols: &[usize]) -> usize {
        assert_eq!(symbols.len(), self.n_sites);
        let mut cfg = 0;
        for (site, &sym) in symbols.iter().enumerate() {
            assert!(sym < self.n_symbols);
            cfg += sym * self.stride(site);
        }
        cfg
    }
}

/// Kahan-style compensated accumulator for long probability sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of a slice.
pub fn kahan_total(values: &[f64]) -> f64 {
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrips_encode_decode() {
        let space = ConfigSpace::new(4, 3).unwrap();
        assert_eq!(space.size(), 81);
        for cfg in 0..space.size() {
            let symbols = space.decode(cfg);
            assert_eq!(space.encode(&symbols), cfg);
            for (site, &sym) in symbols.iter().enumerate() {
                assert_eq!(space.symbol_at(cfg, site), sym);
            }
        }
    }

    #[test]
    fn with_symbol_replaces_one_digit() {
        let space = ConfigSpace::new(3, 2).unwrap();
        let cfg = space.encode(&[1, 0, 1]);
        let swapped = space.with_symbol(cfg, 1, 1);
        assert_eq!(space.decode(swapped), vec![1, 1, 1]);
        assert_eq!(space.with_symbol(cfg, 1, 0), cfg);
    }

    #[test]
    fn rejects_overflowing_space() {
        assert!(ConfigSpace::new(200, 7).is_err());
    }

    #[test]
    fn kahan_handles_many_small_terms() {
        let n = 1_000_000;
        let values = vec![0.1f64; n];
        let total = kahan_total(&values);
        assert!((total - 100_000.0).abs() < 1e-9);
    }
}
