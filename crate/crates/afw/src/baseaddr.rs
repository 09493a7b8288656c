//! Load-address estimation for raw firmware images.
//!
//! A raw image extracted from an update container carries no load
//! address, but linked-in absolute pointers give it away: at the
//! correct base, many 32-bit words in the image resolve to the start
//! of a string literal.  At a wrong base they resolve to noise.
//!
//! Two estimators:
//!
//! * [`estimate_base`] tries every candidate base on a stride grid and
//!   scores it by how many aligned words point at a detected string
//!   start.  Works when the true base lies on the grid (typical for
//!   flash mappings: bases are page aligned).
//! * [`vote_base`] inverts the search: every (word, string) pair votes
//!   for the base `word - string_offset`; the modal base wins.  Finds
//!   bases that sit off any reasonable grid, at the cost of needing
//!   enough genuine references to outvote coincidences.
//!
//! Both scan 4-byte-aligned words only (ARM literal pools are word
//! aligned) and count only references to string *starts*: interior
//! pointers are rare in practice and admitting them mostly adds noise.
//!
//! Cost: `estimate_base` is O(candidates x words), `vote_base` is
//! O(words x strings) plus a sort.  Both are comfortably fast for
//! images up to the half-megabyte class this targets.

use alloc::vec;
use alloc::vec::Vec;

/// Default minimum string length for [`detect_strings`].
pub const DEFAULT_MIN_STRING_LEN: usize = 5;

/// A NUL-terminated printable-ASCII run.  `length` excludes the
/// terminator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectedString {
    pub offset: usize,
    pub length: usize,
}

/// Candidate grid for [`estimate_base`]: bases `start, start+stride,
/// ...` strictly below `end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidateRange {
    pub start: u64,
    /// Exclusive; values above 2^32 are clamped, a base must fit in
    /// 32 bits.
    pub end: u64,
    pub stride: u64,
}

impl Default for CandidateRange {
    /// 4 KiB grid over the first half megabyte: covers the flash
    /// mapping of the Cortex-M0 class parts these images come from.
    fn default() -> Self {
        CandidateRange { start: 0, end: 0x8_0000, stride: 0x1000 }
    }
}

/// One scored candidate base.  `rank` is 1-based after sorting by
/// score (descending), ties broken toward the lower base.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaseCandidate {
    pub base: u32,
    pub score: usize,
    pub rank: usize,
}

/// Modal result of [`vote_base`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaseVote {
    pub base: u32,
    pub votes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanError {
    /// The candidate range contains no base (empty range or zero
    /// stride).
    EmptyRange,
}

impl core::fmt::Display for ScanError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ScanError::EmptyRange => f.write_str("candidate range is empty"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScanError {}

fn printable(b: u8) -> bool {
    (0x20..=0x7E).contains(&b)
}

/// Find maximal NUL-terminated printable runs of at least `min_len`
/// bytes, in offset order.  Runs that end without a NUL (end of blob,
/// or a non-NUL unprintable byte) do not count.
pub fn detect_strings(blob: &[u8], min_len: usize) -> Vec<DetectedString> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &b) in blob.iter().enumerate() {
        if printable(b) {
            run_start.get_or_insert(i);
        } else {
            if let Some(start) = run_start.take() {
                if b == 0 && i - start >= min_len {
                    out.push(DetectedString { offset: start, length: i - start });
                }
            }
        }
    }
    out
}

fn aligned_words(blob: &[u8]) -> Vec<u32> {
    blob.chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// Score every candidate base in `range`.
///
/// A candidate's score is the number of 4-byte-aligned little-endian
/// words `w` in the blob for which `w - base` is the offset of a
/// detected string.  Returns all candidates, best first.
pub fn estimate_base(
    blob: &[u8],
    range: CandidateRange,
    min_len: usize,
) -> Result<Vec<BaseCandidate>, ScanError> {
    let end = range.end.min(1u64 << 32);
    if range.stride == 0 || range.start >= end {
        return Err(ScanError::EmptyRange);
    }

    let mut is_start = vec![false; blob.len()];
    for s in detect_strings(blob, min_len) {
        is_start[s.offset] = true;
    }
    let words = aligned_words(blob);

    let mut candidates = Vec::new();
    let mut base = range.start;
    while base < end {
        let score = words
            .iter()
            .filter(|&&w| match (w as u64).checked_sub(base) {
                Some(rel) => (rel as usize) < is_start.len() && is_start[rel as usize],
                None => false,
            })
            .count();
        candidates.push(BaseCandidate { base: base as u32, score, rank: 0 });
        base += range.stride;
    }

    candidates.sort_by(|a, b| b.score.cmp(&a.score).then(a.base.cmp(&b.base)));
    for (i, c) in candidates.iter_mut().enumerate() {
        c.rank = i + 1;
    }
    Ok(candidates)
}

/// Off-grid base recovery by voting.
///
/// Every (aligned word `w`, detected string offset `s`) pair with
/// `w >= s` votes for base `w - s`.  Returns the modal base if it
/// collected at least `min_votes` votes (ties toward the lower base);
/// `None` otherwise or when there is nothing to vote with.
pub fn vote_base(blob: &[u8], min_len: usize, min_votes: usize) -> Option<BaseVote> {
    let strings = detect_strings(blob, min_len);
    if strings.is_empty() {
        return None;
    }
    let words = aligned_words(blob);

    let mut votes: Vec<u32> = Vec::new();
    for &w in &words {
        for s in &strings {
            if let Some(base) = (w as u64).checked_sub(s.offset as u64) {
                // base <= w < 2^32 always holds here.
                votes.push(base as u32);
            }
        }
    }
    votes.sort_unstable();

    let mut best: Option<BaseVote> = None;
    let mut i = 0;
    while i < votes.len() {
        let mut j = i;
        while j < votes.len() && votes[j] == votes[i] {
            j += 1;
        }
        let count = j - i;
        // Strict > keeps the lowest base on ties (votes are sorted).
        if best.map_or(true, |b| count > b.votes) {
            best = Some(BaseVote { base: votes[i], votes: count });
        }
        i = j;
    }
    best.filter(|b| b.votes >= min_votes)
}
