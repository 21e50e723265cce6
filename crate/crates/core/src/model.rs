//! Messages, bit addressing, message splitting and per-database storage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::placement::PlacementSpec;
use crate::rational::{self, Rational};

/// Leading bytes of a serialized [`Library`].
pub const LIBRARY_MAGIC: [u8; 8] = *b"SCPIRLIB";

/// The K equal-length messages held collectively by the databases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Library {
    message_len: usize,
    messages: Vec<BitString>,
}

impl Library {
    pub fn new(messages: Vec<BitString>) -> Result<Self> {
        let first = messages
            .first()
            .ok_or_else(|| Error::InvalidParameter("library needs at least one message".into()))?;
        let message_len = first.len();
        if message_len == 0 {
            return Err(Error::InvalidParameter("messages must be at least 1 bit".into()));
        }
        if messages.iter().any(|m| m.len() != message_len) {
            return Err(Error::InvalidParameter("messages must have equal length".into()));
        }
        Ok(Self {
            message_len,
            messages,
        })
    }

    /// K pseudo-random messages of `message_len` bits. The byte stream is
    /// ChaCha8 seeded with `seed` via `seed_from_u64`; message `k` takes the
    /// next `ceil(L/8)` bytes with padding bits cleared.
    pub fn random(message_count: usize, message_len: usize, seed: u64) -> Result<Self> {
        if message_count == 0 || message_len == 0 {
            return Err(Error::InvalidParameter(format!(
                "K and L must be positive (K={message_count}, L={message_len})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let messages = (0..message_count)
            .map(|_| {
                let mut bytes = vec![0u8; message_len.div_ceil(8)];
                rng.fill_bytes(&mut bytes);
                BitString::from_bytes(bytes, message_len)
            })
            .collect();
        Self::new(messages)
    }

    pub fn zeros(message_count: usize, message_len: usize) -> Result<Self> {
        if message_count == 0 {
            return Err(Error::InvalidParameter("K must be positive".into()));
        }
        Self::new(vec![BitString::zeros(message_len); message_count])
    }

    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    pub fn message_len(&self) -> usize {
        self.message_len
    }

    /// Message `k`, 1-based.
    pub fn message(&self, k: usize) -> &BitString {
        &self.messages[k - 1]
    }

    pub fn messages(&self) -> &[BitString] {
        &self.messages
    }

    /// `magic | K (u64 LE) | L (u64 LE) | K * ceil(L/8) bytes`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.messages.len() * self.message_len.div_ceil(8));
        out.extend_from_slice(&LIBRARY_MAGIC);
        out.extend_from_slice(&(self.messages.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.message_len as u64).to_le_bytes());
        for m in &self.messages {
            out.extend_from_slice(m.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || bytes[..8] != LIBRARY_MAGIC {
            return Err(Error::Parse("not a library file (bad magic)".into()));
        }
        let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let count = usize::try_from(read_u64(8)).map_err(|_| Error::Parse("K too large".into()))?;
        let len = usize::try_from(read_u64(16)).map_err(|_| Error::Parse("L too large".into()))?;
        let stride = len.div_ceil(8);
        let body = &bytes[24..];
        if count.checked_mul(stride) != Some(body.len()) {
            return Err(Error::Parse(format!(
                "library body is {} bytes, expected K*ceil(L/8) = {count}*{stride}",
                body.len()
            )));
        }
        let messages = (0..count)
            .map(|k| BitString::from_bytes(body[k * stride..(k + 1) * stride].to_vec(), len))
            .collect();
        Self::new(messages)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Address of a single stored bit: message `k`, sub-message group `f`, bit
/// `j` within `W_{k,f}`. All three are 1-based. Ordering is lexicographic on
/// `(k, f, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BitAddress {
    pub message: usize,
    pub group: usize,
    pub bit: usize,
}

impl BitAddress {
    pub fn new(message: usize, group: usize, bit: usize) -> Self {
        Self {
            message,
            group,
            bit,
        }
    }

    /// 0-based position of this bit inside its full message.
    pub fn message_position(&self, offsets: &[usize]) -> usize {
        offsets[self.group - 1] + self.bit - 1
    }
}

impl fmt::Display for BitAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.message, self.group, self.bit)
    }
}

impl FromStr for BitAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Parse(format!("bad bit address {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if nums.contains(&0) {
            return Err(bad());
        }
        Ok(Self::new(nums[0], nums[1], nums[2]))
    }
}

/// Bit lengths `alpha_f * L` of each sub-message.
pub fn submessage_lengths(alpha: &[Rational], message_len: usize) -> Result<Vec<usize>> {
    if alpha.is_empty() {
        return Err(Error::InvalidParameter("alpha must be non-empty".into()));
    }
    let total = rational::sum(alpha);
    if total != Rational::one() {
        return Err(Error::InvalidParameter(format!(
            "split fractions sum to {}, not 1",
            rational::format(&total)
        )));
    }
    alpha
        .iter()
        .enumerate()
        .map(|(f, a)| {
            let bits = a * rational::int(message_len as i128);
            match rational::to_usize(&bits) {
                Some(n) if n > 0 && *a > Rational::zero() => Ok(n),
                _ => Err(Error::MessageLengthIncompatible(format!(
                    "alpha_{} * L = {} * {} = {} is not a positive integer",
                    f + 1,
                    rational::format(a),
                    message_len,
                    rational::format(&bits)
                ))),
            }
        })
        .collect()
}

/// Starting bit of each sub-message within a message.
pub fn submessage_offsets(lengths: &[usize]) -> Vec<usize> {
    lengths
        .iter()
        .scan(0usize, |acc, &len| {
            let start = *acc;
            *acc += len;
            Some(start)
        })
        .collect()
}

/// Cuts a message into contiguous slices of `alpha_f * L` bits, in order.
pub fn split_message(message: &BitString, alpha: &[Rational]) -> Result<Vec<BitString>> {
    let lengths = submessage_lengths(alpha, message.len())?;
    let offsets = submessage_offsets(&lengths);
    Ok(offsets
        .iter()
        .zip(&lengths)
        .map(|(&start, &len)| message.slice(start, len))
        .collect())
}

/// Contents `Z_n` of one database: every `W_{k,f}` with `n` in `N_f`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatabaseStore {
    database: usize,
    /// group f -> sub-message of each message (index k-1)
    contents: BTreeMap<usize, Vec<BitString>>,
}

impl DatabaseStore {
    pub fn build(library: &Library, placement: &PlacementSpec, database: usize) -> Result<Self> {
        if database == 0 || database > placement.database_count {
            return Err(Error::InvalidParameter(format!(
                "database {database} outside [1..{}]",
                placement.database_count
            )));
        }
        let split: Vec<Vec<BitString>> = library
            .messages()
            .iter()
            .map(|m| split_message(m, &placement.alpha))
            .collect::<Result<_>>()?;
        let contents = placement
            .groups
            .iter()
            .enumerate()
            .filter(|(_, members)| members.contains(&database))
            .map(|(f, _)| (f + 1, split.iter().map(|parts| parts[f].clone()).collect()))
            .collect();
        Ok(Self { database, contents })
    }

    /// One store per database, indexed by `n - 1`.
    pub fn build_all(library: &Library, placement: &PlacementSpec) -> Result<Vec<Self>> {
        (1..=placement.database_count)
            .map(|n| Self::build(library, placement, n))
            .collect()
    }

    pub fn database(&self) -> usize {
        self.database
    }

    pub fn groups(&self) -> impl Iterator<Item = usize> + '_ {
        self.contents.keys().copied()
    }

    pub fn get(&self, address: &BitAddress) -> Option<bool> {
        let sub = self.contents.get(&address.group)?.get(address.message.checked_sub(1)?)?;
        if address.bit == 0 || address.bit > sub.len() {
            return None;
        }
        Some(sub.get(address.bit - 1))
    }

    pub fn contains(&self, address: &BitAddress) -> bool {
        self.get(address).is_some()
    }

    pub fn stored_bits(&self) -> usize {
        self.contents
            .values()
            .flat_map(|subs| subs.iter().map(BitString::len))
            .sum()
    }

    /// Every stored address with its value, in address order.
    pub fn iter(&self) -> impl Iterator<Item = (BitAddress, bool)> + '_ {
        let mut out: Vec<(BitAddress, bool)> = self
            .contents
            .iter()
            .flat_map(|(&f, subs)| {
                subs.iter().enumerate().flat_map(move |(k, sub)| {
                    sub.iter()
                        .enumerate()
                        .map(move |(j, v)| (BitAddress::new(k + 1, f, j + 1), v))
                })
            })
            .collect();
        out.sort_by_key(|(a, _)| *a);
        out.into_iter()
    }
}
