use alloc::vec::Vec;
use core::fmt;

/// Largest supported channel count. Count summaries keep one histogram bin
/// per click pattern, so memory grows as `2^channels`.
pub const MAX_CHANNELS: usize = 16;

/// A set of detector channels, stored as a bitmask (bit `i` = channel `i`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelMask(u32);

impl ChannelMask {
    pub const EMPTY: ChannelMask = ChannelMask(0);

    pub const fn from_bits(bits: u32) -> Self {
        ChannelMask(bits)
    }

    pub fn from_channels(channels: &[usize]) -> Self {
        ChannelMask(channels.iter().fold(0u32, |acc, &c| acc | (1 << c)))
    }

    /// All of the first `n` channels.
    pub const fn full(n: usize) -> Self {
        if n >= 32 {
            ChannelMask(u32::MAX)
        } else {
            ChannelMask((1u32 << n) - 1)
        }
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, channel: usize) -> bool {
        channel < 32 && self.0 & (1 << channel) != 0
    }

    pub const fn with(self, channel: usize) -> Self {
        ChannelMask(self.0 | (1 << channel))
    }

    pub const fn is_subset_of(self, other: ChannelMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn intersects(self, other: ChannelMask) -> bool {
        self.0 & other.0 != 0
    }

    /// Highest channel index + 1, or 0 for the empty set.
    pub const fn span(self) -> usize {
        32 - self.0.leading_zeros() as usize
    }

    /// Channel indices in ascending order.
    pub fn channels(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        core::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let c = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(c)
        })
    }

    /// Every subset of this set, the empty set and the set itself included.
    pub fn subsets(self) -> impl Iterator<Item = ChannelMask> {
        let full = self.0;
        let mut next = Some(0u32);
        core::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(ChannelMask(cur))
        })
    }

    /// All `k`-element subsets of the first `n` channels, ordered
    /// lexicographically by their channel lists: (0,1), (0,2), ..., (n-2,n-1).
    pub fn combinations(n: usize, k: usize) -> Vec<ChannelMask> {
        let mut out = Vec::new();
        if k > n {
            return out;
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(ChannelMask::from_channels(&idx));
            let Some(pos) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
                return out;
            };
            idx[pos] += 1;
            for j in pos + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}

impl fmt::Display for ChannelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.channels().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
