//! Tower level generation.

use rand::RngCore;

/// Highest tower level; a node of level `l` participates in the lists
/// for levels `0..=l`.
pub const MAX_LEVEL: usize = 32;

/// Tower slots per full-height node (levels `0..=MAX_LEVEL`).
pub const TOWER_SLOTS: usize = MAX_LEVEL + 1;

/// Draws a level with the geometric law `P(L >= i) = 2^-i` (p = 1/2),
/// capped at [`MAX_LEVEL`].
///
/// The trailing-zero count of a uniform 32-bit draw has exactly this
/// distribution, with the all-zero draw mapping to the cap.
pub fn generate_level(rng: &mut impl RngCore) -> usize {
    (rng.next_u32().trailing_zeros() as usize).min(MAX_LEVEL)
}
