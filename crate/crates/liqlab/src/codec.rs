//! MDS erasure codec and storage organizations.
//!
//! Four layers, bottom up:
//!
//! * [`gf`] — GF(2^16) arithmetic on log/antilog tables, processing symbol
//!   buffers as 2-byte little-endian lanes;
//! * [`code`] — the systematic Cauchy MDS code: any k of the n fragment
//!   symbols recover a source block;
//! * [`layout`] — the flow storage organization: objects segmented into
//!   source blocks, fragments built by concatenating the per-block symbols
//!   of one encoded position (EFI);
//! * [`access`] — chunk-access planning and read-amplification accounting
//!   for the flow organization and for the block organization of small-code
//!   systems (direct and degraded reads).

pub mod access;
pub mod code;
pub mod gf;
pub mod layout;

pub use access::{
    plan_chunk_access, AccessError, AccessMode, AccessPlan, AccessRequest, DEFAULT_EXTRA_FRAGMENTS,
};
pub use code::{BlockDecoder, ErasureCode};
pub use layout::ObjectLayout;

use thiserror::Error;

/// Errors of the codec proper (coding, layout and fragment arithmetic).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("code geometry (n = {n}, k = {k}) needs 1 <= k < n <= 65535")]
    BadGeometry { n: u32, k: u32 },
    #[error("symbols must be non-empty, equal-length and even-sized")]
    SymbolShape,
    #[error("EFI {efi} out of range for n = {n}")]
    EfiOutOfRange { efi: u16, n: u16 },
    #[error("duplicate EFI {0}")]
    DuplicateEfi(u16),
    #[error("got {got} distinct fragments, need {need}")]
    InsufficientFragments { got: usize, need: usize },
    #[error("singular decoding matrix: Cauchy submatrices must be invertible")]
    SingularMatrix,
    #[error("invalid layout: {0}")]
    BadLayout(&'static str),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(&'static str),
}
