//! Time-frequency geometry: subframes (1 ms), subchannels and candidate
//! single-subframe resources (CSRs).

use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SimParams;

/// A candidate single-subframe resource: one subframe and a contiguous
/// run of subchannels.
///
/// Field order gives the canonical `(subframe, subchannel_start)` ordering
/// used for every tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Csr {
    pub subframe: u64,
    pub subchannel_start: u16,
    pub subchannel_len: u16,
}

impl Csr {
    pub fn new(subframe: u64, subchannel_start: u16, subchannel_len: u16) -> Self {
        debug_assert!(subchannel_len >= 1);
        Csr {
            subframe,
            subchannel_start,
            subchannel_len,
        }
    }

    pub fn subchannels(&self) -> Range<usize> {
        let s = self.subchannel_start as usize;
        s..s + self.subchannel_len as usize
    }

    /// True if the two subchannel spans intersect (subframes ignored).
    pub fn overlaps_span(&self, other: &Csr) -> bool {
        self.subchannel_start < other.subchannel_start + other.subchannel_len
            && other.subchannel_start < self.subchannel_start + self.subchannel_len
    }

    /// Same subchannels, shifted in time.
    pub fn shifted(&self, subframes: u64) -> Csr {
        Csr {
            subframe: self.subframe + subframes,
            ..*self
        }
    }
}

/// Inclusive subframe range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionWindow {
    pub start_subframe: u64,
    pub end_subframe: u64,
}

impl SelectionWindow {
    /// The window opened by a packet generated at `t`: `[t + 1, t + latency]`.
    pub fn after(t: u64, latency_ms: u32) -> Self {
        SelectionWindow {
            start_subframe: t + 1,
            end_subframe: t + latency_ms as u64,
        }
    }

    pub fn len(&self) -> u64 {
        self.end_subframe + 1 - self.start_subframe
    }

    pub fn is_empty(&self) -> bool {
        self.end_subframe < self.start_subframe
    }

    pub fn contains(&self, subframe: u64) -> bool {
        (self.start_subframe..=self.end_subframe).contains(&subframe)
    }

    pub fn subframes(&self) -> core::ops::RangeInclusive<u64> {
        self.start_subframe..=self.end_subframe
    }
}

pub fn num_subchannels(params: &SimParams) -> Result<u32> {
    let total = params.bandwidth_mhz.total_rbs();
    if params.rbs_per_subchannel == 0 || params.rbs_per_subchannel > total {
        return Err(Error::config(alloc::format!(
            "rbs_per_subchannel {} not in [1, {total}]",
            params.rbs_per_subchannel
        )));
    }
    Ok(total / params.rbs_per_subchannel)
}

/// Every contiguous placement of the packet footprint within a subframe.
pub fn candidate_starts(params: &SimParams) -> Result<Range<u16>> {
    let n = num_subchannels(params)?;
    let l = params.packet_subchannels;
    if l == 0 || l > n {
        return Err(Error::config(alloc::format!(
            "packet footprint of {l} subchannels does not fit in {n}"
        )));
    }
    Ok(0..(n - l + 1) as u16)
}

/// All CSRs in a selection window, ordered by `(subframe, subchannel_start)`.
pub fn enumerate_csrs(window: SelectionWindow, params: &SimParams) -> Result<Vec<Csr>> {
    let starts = candidate_starts(params)?;
    let len = params.packet_subchannels as u16;
    let mut out = Vec::with_capacity(window.len() as usize * starts.len());
    for sf in window.subframes() {
        for s in starts.clone() {
            out.push(Csr::new(sf, s, len));
        }
    }
    Ok(out)
}
