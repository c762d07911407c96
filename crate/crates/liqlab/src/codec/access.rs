//! Chunk access planning for the flow and block storage organizations.
//!
//! A chunk is a contiguous byte range of an object. Under the flow
//! organization (`Liq`) every chunk maps to a block range, and the plan reads
//! the matching portion — the same row range — of the first `k + extra`
//! available fragments; total traffic is `(k + extra)/k` times the chunk
//! size regardless of which fragments respond first. Under the block
//! organization a chunk lives inside one source piece: the normal path
//! (`Sc`) reads it from the owning node, and the degraded path (`ScDeg`)
//! reads the same range from `k` pieces, a `k`-fold amplification.

use super::layout::ObjectLayout;
use thiserror::Error;

/// Default spare fragments requested beyond `k` so a flow read completes at
/// the speed of the fastest `k` responders.
pub const DEFAULT_EXTRA_FRAGMENTS: u16 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    /// Flow organization: portion reads from `k + extra` fragments.
    Liq { extra: u16 },
    /// Block organization, direct read from the owning piece.
    Sc,
    /// Block organization, degraded read through the decoder.
    ScDeg,
}

/// One read issued to the node holding fragment `efi`; `offset` is relative
/// to the start of that fragment (equivalently piece).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRequest {
    pub efi: u16,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessPlan {
    pub mode: AccessMode,
    pub requests: Vec<AccessRequest>,
    /// Total bytes moved over the network.
    pub total_read: u64,
    /// `total_read` over the chunk size.
    pub amplification: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AccessError {
    #[error("flow chunks must be aligned to the block size")]
    Misaligned,
    #[error("chunk range leaves the object")]
    OutOfBounds,
    #[error("block-organization chunk crosses a piece boundary")]
    SpansOwners,
    #[error("owning piece is unavailable; retry with a degraded read")]
    UseDegraded,
    #[error("only {available} fragments available, plan needs {needed}")]
    InsufficientAvailability { available: usize, needed: usize },
    #[error("bad access parameter: {0}")]
    BadParameter(&'static str),
}

/// Plans the reads serving `object[chunk_offset .. chunk_offset + chunk_len)`
/// from a cluster of `n` fragments, of which `available[efi]` are reachable.
pub fn plan_chunk_access(
    chunk_offset: u64,
    chunk_len: u64,
    layout: &ObjectLayout,
    n: u16,
    mode: AccessMode,
    available: &[bool],
) -> Result<AccessPlan, AccessError> {
    if available.len() != n as usize {
        return Err(AccessError::BadParameter(
            "availability mask length differs from n",
        ));
    }
    if layout.k() as u64 > n as u64 {
        return Err(AccessError::BadParameter("layout k exceeds cluster size"));
    }
    if chunk_len == 0 {
        return Err(AccessError::BadParameter("chunk length must be positive"));
    }
    if chunk_offset
        .checked_add(chunk_len)
        .is_none_or(|end| end > layout.object_size())
    {
        return Err(AccessError::OutOfBounds);
    }

    let plan = |requests: Vec<AccessRequest>| {
        let total_read: u64 = requests.iter().map(|r| r.length).sum();
        AccessPlan {
            mode,
            requests,
            total_read,
            amplification: total_read as f64 / chunk_len as f64,
        }
    };

    match mode {
        AccessMode::Liq { extra } => {
            let bsize = layout.block_size();
            if chunk_offset % bsize != 0 || chunk_len % bsize != 0 {
                return Err(AccessError::Misaligned);
            }
            let needed = layout.k() as usize + extra as usize;
            if needed > n as usize {
                return Err(AccessError::BadParameter("k + extra exceeds cluster size"));
            }
            let efis = first_available(available, needed)?;
            let portion_offset = chunk_offset / bsize * layout.symbol_size() as u64;
            let portion_len = chunk_len / bsize * layout.symbol_size() as u64;
            Ok(plan(
                efis.into_iter()
                    .map(|efi| AccessRequest {
                        efi,
                        offset: portion_offset,
                        length: portion_len,
                    })
                    .collect(),
            ))
        }
        AccessMode::Sc | AccessMode::ScDeg => {
            let piece = layout.fragment_size();
            let owner = chunk_offset / piece;
            if chunk_offset + chunk_len > (owner + 1) * piece {
                return Err(AccessError::SpansOwners);
            }
            let offset = chunk_offset - owner * piece;
            if mode == AccessMode::Sc {
                if !available[owner as usize] {
                    return Err(AccessError::UseDegraded);
                }
                Ok(plan(vec![AccessRequest {
                    efi: owner as u16,
                    offset,
                    length: chunk_len,
                }]))
            } else {
                let efis = first_available(available, layout.k() as usize)?;
                Ok(plan(
                    efis.into_iter()
                        .map(|efi| AccessRequest {
                            efi,
                            offset,
                            length: chunk_len,
                        })
                        .collect(),
                ))
            }
        }
    }
}

/// First `needed` available EFIs in ascending order.
fn first_available(available: &[bool], needed: usize) -> Result<Vec<u16>, AccessError> {
    let mut efis = Vec::with_capacity(needed);
    for (efi, &up) in available.iter().enumerate() {
        if up {
            efis.push(efi as u16);
            if efis.len() == needed {
                return Ok(efis);
            }
        }
    }
    Err(AccessError::InsufficientAvailability {
        available: efis.len(),
        needed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    const GIB_1_5: u64 = 1_610_612_736;
    const MIB_32: u64 = 33_554_432;
    const CHUNK_OFFSET: u64 = 603_979_776; // 576 MiB into the object

    fn flow_layout() -> ObjectLayout {
        ObjectLayout::new(GIB_1_5, 1024, 64).unwrap()
    }

    fn block_layout() -> ObjectLayout {
        ObjectLayout::new(GIB_1_5, 6, 64).unwrap()
    }

    #[test]
    fn flow_chunk_reads_one_portion_per_fragment() {
        let layout = flow_layout();
        let available = vec![true; 1400];
        let plan = plan_chunk_access(
            CHUNK_OFFSET,
            MIB_32,
            &layout,
            1400,
            AccessMode::Liq {
                extra: DEFAULT_EXTRA_FRAGMENTS,
            },
            &available,
        )
        .unwrap();
        // 32 MiB spans blocks 9216..9728; their rows start 9216 symbols into
        // each fragment and run for 512 symbols.
        assert_eq!(plan.requests.len(), 1054);
        for (i, req) in plan.requests.iter().enumerate() {
            assert_eq!(req.efi as usize, i);
            assert_eq!(req.offset, 589_824);
            assert_eq!(req.length, 32_768);
        }
        assert_eq!(plan.total_read, 34_537_472);
        let by_hand: u64 = plan.requests.iter().map(|r| r.length).sum();
        assert_eq!(by_hand, plan.total_read);
        assert_relative_eq!(plan.amplification, 1054.0 / 1024.0, max_relative = 1e-12);
    }

    #[test]
    fn flow_whole_object_with_no_extra_is_amplification_free() {
        let layout = flow_layout();
        let available = vec![true; 1400];
        let plan = plan_chunk_access(
            0,
            GIB_1_5,
            &layout,
            1400,
            AccessMode::Liq { extra: 0 },
            &available,
        )
        .unwrap();
        assert_eq!(plan.requests.len(), 1024);
        assert_eq!(plan.requests[0].length, layout.fragment_size());
        assert_eq!(plan.total_read, GIB_1_5);
        assert_relative_eq!(plan.amplification, 1.0);
    }

    #[test]
    fn flow_selection_skips_unavailable_fragments() {
        let layout = flow_layout();
        let mut available = vec![true; 1400];
        available[0] = false;
        available[5] = false;
        let plan = plan_chunk_access(
            CHUNK_OFFSET,
            MIB_32,
            &layout,
            1400,
            AccessMode::Liq { extra: 0 },
            &available,
        )
        .unwrap();
        let efis: Vec<u16> = plan.requests.iter().map(|r| r.efi).collect();
        assert_eq!(efis[0], 1);
        assert_eq!(efis[4], 6);
        assert_eq!(*efis.last().unwrap(), 1025);
    }

    #[test]
    fn block_chunk_is_served_by_its_owner() {
        let layout = block_layout();
        assert_eq!(layout.fragment_size(), 268_435_456); // 256 MiB pieces
        let available = vec![true; 9];
        let plan =
            plan_chunk_access(CHUNK_OFFSET, MIB_32, &layout, 9, AccessMode::Sc, &available)
                .unwrap();
        assert_eq!(
            plan.requests,
            vec![AccessRequest {
                efi: 2,
                offset: 67_108_864,
                length: MIB_32,
            }]
        );
        assert_eq!(plan.total_read, MIB_32);
        assert_relative_eq!(plan.amplification, 1.0);
    }

    #[test]
    fn block_chunk_with_owner_down_defers_to_degraded() {
        let layout = block_layout();
        let mut available = vec![true; 9];
        available[2] = false;
        assert_eq!(
            plan_chunk_access(CHUNK_OFFSET, MIB_32, &layout, 9, AccessMode::Sc, &available),
            Err(AccessError::UseDegraded)
        );
    }

    #[test]
    fn degraded_block_read_amplifies_k_fold() {
        let layout = block_layout();
        let mut available = vec![true; 9];
        available[2] = false;
        let plan = plan_chunk_access(
            CHUNK_OFFSET,
            MIB_32,
            &layout,
            9,
            AccessMode::ScDeg,
            &available,
        )
        .unwrap();
        assert_eq!(plan.requests.len(), 6);
        let efis: BTreeSet<u16> = plan.requests.iter().map(|r| r.efi).collect();
        assert_eq!(efis.len(), 6);
        assert!(!efis.contains(&2));
        for req in &plan.requests {
            assert_eq!(req.offset, 67_108_864);
            assert_eq!(req.length, MIB_32);
        }
        assert_eq!(plan.total_read, 201_326_592);
        assert_relative_eq!(plan.amplification, 6.0);
    }

    #[test]
    fn block_chunk_may_not_cross_piece_boundaries() {
        let layout = block_layout();
        let piece = layout.fragment_size();
        let available = vec![true; 9];
        for mode in [AccessMode::Sc, AccessMode::ScDeg] {
            assert_eq!(
                plan_chunk_access(piece - 64, 128, &layout, 9, mode, &available),
                Err(AccessError::SpansOwners)
            );
        }
    }

    #[test]
    fn flow_chunks_must_align_to_blocks() {
        let layout = flow_layout();
        let available = vec![true; 1400];
        let mode = AccessMode::Liq { extra: 0 };
        for (offset, len) in [(1, 65_536), (65_536, 100)] {
            assert_eq!(
                plan_chunk_access(offset, len, &layout, 1400, mode, &available),
                Err(AccessError::Misaligned)
            );
        }
    }

    #[test]
    fn range_and_parameter_validation() {
        let layout = block_layout();
        let available = vec![true; 9];
        assert_eq!(
            plan_chunk_access(GIB_1_5 - 64, 128, &layout, 9, AccessMode::Sc, &available),
            Err(AccessError::OutOfBounds)
        );
        assert_eq!(
            plan_chunk_access(u64::MAX, 2, &layout, 9, AccessMode::Sc, &available),
            Err(AccessError::OutOfBounds)
        );
        assert!(matches!(
            plan_chunk_access(0, 0, &layout, 9, AccessMode::Sc, &available),
            Err(AccessError::BadParameter(_))
        ));
        assert!(matches!(
            plan_chunk_access(0, 64, &layout, 8, AccessMode::Sc, &available),
            Err(AccessError::BadParameter(_))
        ));
        assert!(matches!(
            plan_chunk_access(0, 384, &layout, 4, AccessMode::Sc, &available[..4]),
            Err(AccessError::BadParameter(_))
        ));
        let flow = flow_layout();
        assert!(matches!(
            plan_chunk_access(
                0,
                65_536,
                &flow,
                1040,
                AccessMode::Liq { extra: 30 },
                &vec![true; 1040],
            ),
            Err(AccessError::BadParameter(_))
        ));
    }

    #[test]
    fn availability_shortfall_reports_the_gap() {
        let flow = flow_layout();
        let mut available = vec![false; 1400];
        for slot in available.iter_mut().take(1000) {
            *slot = true;
        }
        assert_eq!(
            plan_chunk_access(
                0,
                65_536,
                &flow,
                1400,
                AccessMode::Liq { extra: 30 },
                &available,
            ),
            Err(AccessError::InsufficientAvailability {
                available: 1000,
                needed: 1054,
            })
        );
        let layout = block_layout();
        let few = vec![true, false, true, false, true, false, true, false, true];
        assert_eq!(
            plan_chunk_access(0, 384, &layout, 9, AccessMode::ScDeg, &few),
            Err(AccessError::InsufficientAvailability {
                available: 5,
                needed: 6,
            })
        );
    }
}
