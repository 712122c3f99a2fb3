//! Deterministic enumeration driver for the brute-force order checks.
//!
//! A check is a maximum of a violation score over a finite combination
//! space, addressed by a flat `u128` index. Spaces at most `budget` large
//! are scanned exhaustively; larger ones are subsampled with a seeded
//! ChaCha stream, `budget` draws with replacement, and the report records
//! the seed. Work may be split across threads; the merge is ordered, so the
//! outcome is identical for every thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Enumeration limits shared by every order check.
#[derive(Debug, Clone, Copy)]
pub struct ScanParams {
    /// Largest combination count scanned exhaustively, and the sample size
    /// above it.
    pub budget: u64,
    /// Seed for the subsample stream.
    pub seed: u64,
    /// Worker threads; `0` picks the machine's available parallelism.
    pub threads: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self { budget: 1_000_000, seed: 0, threads: 0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOutcome {
    /// Largest violation seen; `-inf` when the space was empty.
    pub worst: f64,
    /// Combination index of the largest violation.
    pub worst_idx: Option<u128>,
    /// First scanned combination whose violation exceeded the cutoff.
    pub first_fail_idx: Option<u128>,
    pub checked: u64,
    /// True when the space exceeded the budget and was subsampled.
    pub sampled: bool,
}

struct ChunkResult {
    worst: f64,
    worst_pos: Option<u64>,
    first_fail_pos: Option<u64>,
}

fn scan_positions(
    range: std::ops::Range<u64>,
    cutoff: f64,
    idx_at: &(impl Fn(u64) -> u128 + Sync),
    eval: &(impl Fn(u128) -> f64 + Sync),
) -> ChunkResult {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pos = None;
    let mut first_fail_pos = None;
    for pos in range {
        let v = eval(idx_at(pos));
        debug_assert!(!v.is_nan());
        if v > worst {
            worst = v;
            worst_pos = Some(pos);
        }
        if first_fail_pos.is_none() && v > cutoff {
            first_fail_pos = Some(pos);
        }
    }
    ChunkResult { worst, worst_pos, first_fail_pos }
}

fn effective_threads(requested: usize, len: u64) -> usize {
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = if requested == 0 { hw } else { requested };
    // Small scans are not worth spawning for.
    let by_size = (len / 4096).max(1) as usize;
    cap.max(1).min(by_size)
}

/// Scan `total` combinations, returning the worst violation and the first
/// one beyond `cutoff`. `eval` must be pure; it is called from worker
/// threads.
pub fn scan(
    total: u128,
    cutoff: f64,
    params: &ScanParams,
    eval: impl Fn(u128) -> f64 + Sync,
) -> ScanOutcome {
    let sampled = total > params.budget as u128;
    let samples: Option<Vec<u128>> = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        Some((0..params.budget).map(|_| rng.gen_range(0..total)).collect())
    } else {
        None
    };
    let len = if sampled { params.budget } else { total as u64 };
    let idx_at = |pos: u64| -> u128 {
        match &samples {
            Some(s) => s[pos as usize],
            None => pos as u128,
        }
    };

    let threads = effective_threads(params.threads, len);
    let merged = if threads <= 1 || len == 0 {
        vec![scan_positions(0..len, cutoff, &idx_at, &eval)]
    } else {
        let chunk = len.div_ceil(threads as u64);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads as u64)
                .map(|t| {
                    let lo = t * chunk;
                    let hi = ((t + 1) * chunk).min(len);
                    let idx_at = &idx_at;
                    let eval = &eval;
                    scope.spawn(move || scan_positions(lo..hi, cutoff, idx_at, eval))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
        })
    };

    // Ordered merge: ties on the violation value resolve to the earliest
    // position, so the result does not depend on the thread count.
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pos = None;
    let mut first_fail_pos: Option<u64> = None;
    for r in merged {
        if let Some(p) = r.worst_pos {
            if r.worst > worst {
                worst = r.worst;
                worst_pos = Some(p);
            }
        }
        if let (Some(p), None) = (r.first_fail_pos, first_fail_pos) {
            first_fail_pos = Some(p);
        }
    }

    ScanOutcome {
        worst,
        worst_idx: worst_pos.map(idx_at),
        first_fail_idx: first_fail_pos.map(idx_at),
        checked: len,
        sampled,
    }
}

/// Decode one digit of a mixed-radix index; returns (digit, rest).
#[inline]
pub fn split_radix(idx: u128, radix: u64) -> (u64, u128) {
    let digit = (idx % radix as u128) as u64;
    (digit, idx / radix as u128)
}
