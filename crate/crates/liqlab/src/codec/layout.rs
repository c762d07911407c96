//! Flow storage organization: objects, source blocks and fragments.
//!
//! An object of `object_size` bytes is segmented into `N` source blocks of
//! `block_size = k·symbol_size` bytes; the k symbols of each block are
//! erasure-encoded independently. The fragment with a given EFI is the
//! concatenation of that EFI's symbol from every block, so byte range
//! `[b·Ssize, (b+1)·Ssize)` of a fragment belongs to source block `b`. A
//! consecutive block range can therefore be served by reading the matching
//! portion of any k fragments — access reads exactly the chunk size.
//!
//! Objects are padded with zeros up to a block multiple before layout; the
//! true length travels in metadata next to the fragments.

use super::code::{BlockDecoder, ErasureCode};
use super::gf;
use super::CodecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectLayout {
    object_size: u64,
    k: u32,
    symbol_size: u32,
}

impl ObjectLayout {
    pub fn new(object_size: u64, k: u32, symbol_size: u32) -> Result<Self, CodecError> {
        if k == 0 {
            return Err(CodecError::BadLayout("k must be positive"));
        }
        if symbol_size == 0 || symbol_size % 2 != 0 {
            return Err(CodecError::BadLayout(
                "symbol size must be positive and even (2-byte lanes)",
            ));
        }
        let block = k as u64 * symbol_size as u64;
        if object_size == 0 || object_size % block != 0 {
            return Err(CodecError::BadLayout(
                "object size must be a positive multiple of the block size",
            ));
        }
        Ok(ObjectLayout {
            object_size,
            k,
            symbol_size,
        })
    }

    /// Padded object size for a payload of `true_size` bytes.
    pub fn padded_size(true_size: u64, k: u32, symbol_size: u32) -> u64 {
        let block = (k as u64 * symbol_size as u64).max(1);
        true_size.div_ceil(block).max(1) * block
    }

    pub fn object_size(&self) -> u64 {
        self.object_size
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn symbol_size(&self) -> u32 {
        self.symbol_size
    }

    pub fn block_size(&self) -> u64 {
        self.k as u64 * self.symbol_size as u64
    }

    pub fn block_count(&self) -> u64 {
        self.object_size / self.block_size()
    }

    pub fn fragment_size(&self) -> u64 {
        self.block_count() * self.symbol_size as u64
    }

    fn check_code(&self, code: &ErasureCode) -> Result<(), CodecError> {
        if code.k() as u32 != self.k {
            return Err(CodecError::LayoutMismatch("layout k differs from code k"));
        }
        Ok(())
    }

    /// Builds the fragment with the given EFI from the (padded) object.
    pub fn make_fragment(
        &self,
        object: &[u8],
        efi: u16,
        code: &ErasureCode,
    ) -> Result<Vec<u8>, CodecError> {
        self.check_code(code)?;
        if object.len() as u64 != self.object_size {
            return Err(CodecError::LayoutMismatch(
                "object length differs from layout size",
            ));
        }
        if efi >= code.n() {
            return Err(CodecError::EfiOutOfRange { efi, n: code.n() });
        }
        let ssize = self.symbol_size as usize;
        let bsize = self.block_size() as usize;
        let mut fragment = vec![0u8; self.fragment_size() as usize];
        for (b, block) in object.chunks_exact(bsize).enumerate() {
            let out = &mut fragment[b * ssize..(b + 1) * ssize];
            if efi < code.k() {
                out.copy_from_slice(&block[efi as usize * ssize..(efi as usize + 1) * ssize]);
            } else {
                for j in 0..self.k as usize {
                    gf::mul_acc_slice(
                        out,
                        code.coefficient(efi, j as u16),
                        &block[j * ssize..(j + 1) * ssize],
                    );
                }
            }
        }
        Ok(fragment)
    }

    /// Rebuilds the (padded) object from ≥ k distinct fragments.
    pub fn reassemble<S: AsRef<[u8]>>(
        &self,
        fragments: &[(u16, S)],
        code: &ErasureCode,
    ) -> Result<Vec<u8>, CodecError> {
        self.check_code(code)?;
        let fsize = self.fragment_size();
        if fragments.iter().any(|(_, f)| f.as_ref().len() as u64 != fsize) {
            return Err(CodecError::LayoutMismatch(
                "fragment length differs from layout size",
            ));
        }
        let efis: Vec<u16> = fragments.iter().map(|(efi, _)| *efi).collect();
        let decoder = BlockDecoder::prepare(code, &efis)?;
        let by_selected: Vec<&[u8]> = decoder
            .selected()
            .iter()
            .map(|sel| {
                fragments
                    .iter()
                    .find(|(efi, _)| efi == sel)
                    .map(|(_, f)| f.as_ref())
                    .expect("selected EFIs come from the fragment list")
            })
            .collect();

        let ssize = self.symbol_size as usize;
        let bsize = self.block_size() as usize;
        let mut object = vec![0u8; self.object_size as usize];
        for b in 0..self.block_count() as usize {
            let symbols: Vec<&[u8]> = by_selected
                .iter()
                .map(|f| &f[b * ssize..(b + 1) * ssize])
                .collect();
            let sources = decoder.solve(&symbols)?;
            let block = &mut object[b * bsize..(b + 1) * bsize];
            for (j, sym) in sources.iter().enumerate() {
                block[j * ssize..(j + 1) * ssize].copy_from_slice(sym);
            }
        }
        Ok(object)
    }
}
