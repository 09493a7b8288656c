//! Deterministic synthetic-firmware generator.
//!
//! [`gen_blob`] produces a blob that looks like raw firmware to the
//! analysis tools: unprintable filler, planted NUL-terminated strings,
//! and word-aligned absolute references to those strings assuming a
//! chosen load base.  The ground truth is exact by construction, so it
//! can serve as the oracle for `afw::baseaddr`:
//!
//! * filler bytes always have the top bit set (never printable, never
//!   NUL), so filler can neither form a string nor extend one;
//! * every planted string reserves one guard byte before its first
//!   character, so no other planted material can touch a string start;
//! * reference words reserve a guard byte on each side, so at most 4
//!   printable bytes can ever appear in a row outside a planted
//!   string.
//!
//! Hence, for any `min_len >= 4`, the detectable strings of a
//! generated blob are exactly the planted ones.  Generation is a pure
//! function of the [`FixtureSpec`] (ChaCha stream, stable across
//! platforms) so fixture corpora are reproducible from a seed.

use afw::container::{build_update, serialize_update};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Parameters for [`gen_blob`].
#[derive(Clone, Copy, Debug)]
pub struct FixtureSpec {
    pub seed: u64,
    pub size: usize,
    pub n_strings: usize,
    pub n_refs: usize,
    /// Load base the planted references assume.
    pub base: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PlantedString {
    pub offset: usize,
    pub length: usize,
}

/// Exact description of what [`gen_blob`] planted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    pub base: u32,
    /// In placement order, not offset order.
    pub strings: Vec<PlantedString>,
    /// Word-aligned blob offsets of the planted reference words.
    pub refs: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FixtureError {
    /// The requested strings/references cannot be placed in a blob of
    /// the requested size (or a reference value would overflow 32
    /// bits).
    #[error("fixture does not fit the requested blob size")]
    DoesNotFit,
}

const STRING_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_./-%";
const MIN_STRING: usize = 6;
const MAX_STRING: usize = 16;
const PLACEMENT_ATTEMPTS: usize = 10_000;

struct Occupancy(Vec<bool>);

impl Occupancy {
    fn claim(&mut self, start: usize, end: usize) -> bool {
        let end = end.min(self.0.len());
        if self.0[start..end].iter().any(|&b| b) {
            return false;
        }
        self.0[start..end].iter_mut().for_each(|b| *b = true);
        true
    }
}

/// Generate a synthetic firmware blob and its ground truth.
pub fn gen_blob(spec: &FixtureSpec) -> Result<(Vec<u8>, GroundTruth), FixtureError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    if spec.n_refs > 0 && spec.n_strings == 0 {
        return Err(FixtureError::DoesNotFit);
    }

    // Unprintable, non-NUL filler.
    let mut blob: Vec<u8> = (0..spec.size).map(|_| rng.gen::<u8>() | 0x80).collect();
    let mut occupied = Occupancy(vec![false; spec.size]);
    let mut truth = GroundTruth { base: spec.base, strings: Vec::new(), refs: Vec::new() };

    for _ in 0..spec.n_strings {
        let length = rng.gen_range(MIN_STRING..=MAX_STRING);
        // Guard byte before, text, NUL after: start-1 .. start+length+1.
        if spec.size < length + 2 {
            return Err(FixtureError::DoesNotFit);
        }
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let start = rng.gen_range(1..=spec.size - length - 1);
            if !occupied.claim(start - 1, start + length + 1) {
                continue;
            }
            for b in &mut blob[start..start + length] {
                *b = STRING_CHARS[rng.gen_range(0..STRING_CHARS.len())];
            }
            blob[start + length] = 0;
            truth.strings.push(PlantedString { offset: start, length });
            placed = true;
            break;
        }
        if !placed {
            return Err(FixtureError::DoesNotFit);
        }
    }

    for _ in 0..spec.n_refs {
        if spec.size < 4 {
            return Err(FixtureError::DoesNotFit);
        }
        let target = truth.strings[rng.gen_range(0..truth.strings.len())];
        let value = spec.base as u64 + target.offset as u64;
        if value > u32::MAX as u64 {
            return Err(FixtureError::DoesNotFit);
        }
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let pos = 4 * rng.gen_range(0..spec.size / 4);
            // Guard byte on both sides keeps reference words apart.
            if !occupied.claim(pos.saturating_sub(1), pos + 5) {
                continue;
            }
            blob[pos..pos + 4].copy_from_slice(&(value as u32).to_le_bytes());
            truth.refs.push(pos);
            placed = true;
            break;
        }
        if !placed {
            return Err(FixtureError::DoesNotFit);
        }
    }

    Ok((blob, truth))
}

/// Serialized AFW1 container with synthetic payloads in both slots.
///
/// Strings and references are planted at a scale proportional to the
/// payload sizes so the analysis commands have something to find.
/// Derived deterministically from `seed`.
pub fn gen_update_bytes(
    seed: u64,
    app_size: usize,
    boot_size: usize,
    app_version: u32,
    boot_version: u32,
) -> Result<Vec<u8>, FixtureError> {
    let plant = |size: usize| ((size / 192).clamp(2, 40), (size / 128).clamp(2, 60));
    let (app_strings, app_refs) = plant(app_size);
    let (boot_strings, boot_refs) = plant(boot_size);
    let (app, _) = gen_blob(&FixtureSpec {
        seed: seed.wrapping_mul(2).wrapping_add(1),
        size: app_size,
        n_strings: app_strings,
        n_refs: app_refs,
        base: 0x0001_8000,
    })?;
    let (boot, _) = gen_blob(&FixtureSpec {
        seed: seed.wrapping_mul(2).wrapping_add(2),
        size: boot_size,
        n_strings: boot_strings,
        n_refs: boot_refs,
        base: 0x0003_AC00,
    })?;
    let update = build_update(&app, &boot, app_version, boot_version)
        .map_err(|_| FixtureError::DoesNotFit)?;
    Ok(serialize_update(&update).expect("fresh build is serializable"))
}
