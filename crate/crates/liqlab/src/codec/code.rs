//! Systematic Cauchy MDS code over GF(2^16).
//!
//! Fragment symbols are indexed by an encoded fragment id (EFI): ids
//! `0..k` are the source symbols verbatim, ids `k..n` carry repair symbols
//! `repair_i = Σ_j C(i, j)·source_j` with the Cauchy coefficients
//! `C(i, j) = (x_i ⊕ y_j)⁻¹`, `x_i = i`, `y_j = j`. The index sets are
//! disjoint (`i ≥ k > j`), so every coefficient is defined, and every
//! square submatrix of a Cauchy matrix is invertible — any k distinct
//! fragments recover the source.

use std::collections::HashMap;

use super::gf;
use super::CodecError;

/// Code geometry (n total fragments, k source fragments).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErasureCode {
    n: u16,
    k: u16,
}

impl ErasureCode {
    pub fn new(n: u32, k: u32) -> Result<Self, CodecError> {
        if !(1 <= k && k < n && n <= u16::MAX as u32) {
            return Err(CodecError::BadGeometry { n, k });
        }
        Ok(ErasureCode {
            n: n as u16,
            k: k as u16,
        })
    }

    pub fn n(&self) -> u16 {
        self.n
    }

    pub fn k(&self) -> u16 {
        self.k
    }

    pub fn r(&self) -> u16 {
        self.n - self.k
    }

    /// Cauchy generator coefficient of repair fragment `efi` (≥ k) against
    /// source index `j` (< k).
    pub fn coefficient(&self, efi: u16, j: u16) -> u16 {
        debug_assert!(self.k <= efi && efi < self.n && j < self.k);
        gf::inv(efi ^ j)
    }

    fn check_symbols<S: AsRef<[u8]>>(symbols: &[S]) -> Result<usize, CodecError> {
        let len = symbols.first().map_or(0, |s| s.as_ref().len());
        if len == 0 || len % 2 != 0 || symbols.iter().any(|s| s.as_ref().len() != len) {
            return Err(CodecError::SymbolShape);
        }
        Ok(len)
    }

    /// Encodes one source block (k symbols) into the symbols named by
    /// `efis`. Source ids are returned verbatim (systematic).
    pub fn encode_block<S: AsRef<[u8]>>(
        &self,
        source: &[S],
        efis: &[u16],
    ) -> Result<Vec<Vec<u8>>, CodecError> {
        if source.len() != self.k as usize {
            return Err(CodecError::InsufficientFragments {
                got: source.len(),
                need: self.k as usize,
            });
        }
        let len = Self::check_symbols(source)?;
        efis.iter()
            .map(|&efi| {
                if efi >= self.n {
                    return Err(CodecError::EfiOutOfRange { efi, n: self.n });
                }
                if efi < self.k {
                    return Ok(source[efi as usize].as_ref().to_vec());
                }
                let mut acc = vec![0u8; len];
                for (j, sym) in source.iter().enumerate() {
                    gf::mul_acc_slice(&mut acc, self.coefficient(efi, j as u16), sym.as_ref());
                }
                Ok(acc)
            })
            .collect()
    }

    /// Recovers the k source symbols of one block from any ≥ k distinct
    /// received fragments.
    pub fn decode_block<S: AsRef<[u8]>>(
        &self,
        received: &[(u16, S)],
    ) -> Result<Vec<Vec<u8>>, CodecError> {
        let mut by_efi = HashMap::with_capacity(received.len());
        for (efi, sym) in received {
            if by_efi.insert(*efi, sym.as_ref()).is_some() {
                return Err(CodecError::DuplicateEfi(*efi));
            }
        }
        let efis: Vec<u16> = by_efi.keys().copied().collect();
        let decoder = BlockDecoder::prepare(self, &efis)?;
        let symbols: Vec<&[u8]> = decoder.selected().iter().map(|efi| by_efi[efi]).collect();
        decoder.solve(&symbols)
    }
}

/// Reusable decoder for one fragment-availability pattern.
///
/// Preparation picks k fragments (all available source ids, topped up with
/// repair ids), reduces the k×k generator submatrix to the m×m Cauchy
/// system over the missing source symbols, and LU-factorizes it once by
/// Gaussian elimination. [`BlockDecoder::solve`] then back-substitutes per
/// block, which is what makes whole-object reassembly cheap.
#[derive(Debug, Clone)]
pub struct BlockDecoder {
    code: ErasureCode,
    /// The k chosen EFIs: available source ids ascending, then the repair
    /// ids used, ascending. `solve` takes symbols in this order.
    selected: Vec<u16>,
    /// Source ids not among `selected` (size m).
    missing: Vec<u16>,
    /// Number of selected source ids (k − m).
    sources: usize,
    /// m×m LU factors, row-major: unit-lower L below the diagonal, U on
    /// and above it.
    lu: Vec<u16>,
    /// Row permutation from pivoting: row i of the factored system is
    /// original row `perm[i]`.
    perm: Vec<usize>,
}

impl BlockDecoder {
    pub fn prepare(code: &ErasureCode, available_efis: &[u16]) -> Result<Self, CodecError> {
        let k = code.k as usize;
        let mut efis = available_efis.to_vec();
        efis.sort_unstable();
        for pair in efis.windows(2) {
            if pair[0] == pair[1] {
                return Err(CodecError::DuplicateEfi(pair[0]));
            }
        }
        if let Some(&efi) = efis.iter().find(|&&efi| efi >= code.n) {
            return Err(CodecError::EfiOutOfRange { efi, n: code.n });
        }
        if efis.len() < k {
            return Err(CodecError::InsufficientFragments {
                got: efis.len(),
                need: k,
            });
        }
        let split = efis.partition_point(|&efi| efi < code.k);
        let (source_ids, repair_ids) = efis.split_at(split);
        let m = k - source_ids.len();
        let selected: Vec<u16> = source_ids
            .iter()
            .chain(repair_ids.iter().take(m))
            .copied()
            .collect();
        let missing: Vec<u16> = (0..code.k)
            .filter(|efi| source_ids.binary_search(efi).is_err())
            .collect();

        // Reduced system: for each used repair row i,
        //   Σ_{j missing} C(i, j)·s_j = received_i ⊕ Σ_{j known} C(i, j)·s_j.
        let mut lu = vec![0u16; m * m];
        for (a, &rep) in selected[source_ids.len()..].iter().enumerate() {
            for (b, &mis) in missing.iter().enumerate() {
                lu[a * m + b] = code.coefficient(rep, mis);
            }
        }
        let mut perm: Vec<usize> = (0..m).collect();
        for col in 0..m {
            let pivot = (col..m)
                .find(|&row| lu[row * m + col] != 0)
                .ok_or(CodecError::SingularMatrix)?;
            if pivot != col {
                for c in 0..m {
                    lu.swap(pivot * m + c, col * m + c);
                }
                perm.swap(pivot, col);
            }
            let pivot_inv = gf::inv(lu[col * m + col]);
            for row in col + 1..m {
                let factor = gf::mul(lu[row * m + col], pivot_inv);
                lu[row * m + col] = factor;
                if factor != 0 {
                    for c in col + 1..m {
                        lu[row * m + c] ^= gf::mul(factor, lu[col * m + c]);
                    }
                }
            }
        }
        Ok(BlockDecoder {
            code: *code,
            selected,
            missing,
            sources: source_ids.len(),
            lu,
            perm,
        })
    }

    /// EFIs whose symbols `solve` expects, in order.
    pub fn selected(&self) -> &[u16] {
        &self.selected
    }

    /// Solves one block: `symbols[i]` is the received symbol of
    /// `selected()[i]`. Returns the k source symbols.
    pub fn solve<S: AsRef<[u8]>>(&self, symbols: &[S]) -> Result<Vec<Vec<u8>>, CodecError> {
        if symbols.len() != self.selected.len() {
            return Err(CodecError::InsufficientFragments {
                got: symbols.len(),
                need: self.selected.len(),
            });
        }
        let len = ErasureCode::check_symbols(symbols)?;
        let m = self.missing.len();
        let mut out = vec![Vec::new(); self.code.k as usize];
        for (i, &efi) in self.selected[..self.sources].iter().enumerate() {
            out[efi as usize] = symbols[i].as_ref().to_vec();
        }
        if m == 0 {
            return Ok(out);
        }

        // Right-hand sides: repair symbols minus known-source contributions,
        // in pivoted row order.
        let mut rhs: Vec<Vec<u8>> = self
            .perm
            .iter()
            .map(|&row| {
                let rep = self.selected[self.sources + row];
                let mut b = symbols[self.sources + row].as_ref().to_vec();
                for &src in &self.selected[..self.sources] {
                    gf::mul_acc_slice(&mut b, self.code.coefficient(rep, src), &out[src as usize]);
                }
                b
            })
            .collect();
        debug_assert_eq!(rhs.first().map_or(len, Vec::len), len);

        // Forward substitution (unit-lower L), then back substitution (U).
        for col in 0..m {
            let (head, tail) = rhs.split_at_mut(col + 1);
            for (below, row_sym) in tail.iter_mut().enumerate() {
                let row = col + 1 + below;
                gf::mul_acc_slice(row_sym, self.lu[row * m + col], &head[col]);
            }
        }
        for col in (0..m).rev() {
            gf::scale_slice(&mut rhs[col], gf::inv(self.lu[col * m + col]));
            let (head, tail) = rhs.split_at_mut(col);
            for (row, row_sym) in head.iter_mut().enumerate() {
                gf::mul_acc_slice(row_sym, self.lu[row * m + col], &tail[0]);
            }
        }
        for (b, sym) in self.missing.iter().zip(rhs) {
            out[*b as usize] = sym;
        }
        Ok(out)
    }
}
