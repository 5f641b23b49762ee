use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

/// Buckets kept in the flat array; costs beyond it spill into a heap that
/// preserves the same `(bucket, insertion)` order.
const MAX_DIRECT_BUCKETS: usize = 1 << 18;

/// One tabled cost record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub handle: u32,
    pub stamp: u32,
    pub lambda: f64,
    seq: u64,
}

/// Verdict of the caller on the entry at the head of the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    Fresh,
    /// The record no longer refers to anything live.
    Discard,
    /// The record is outdated; table it again under a new stamp and cost.
    Requeue {
        stamp: u32,
        lambda: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Spilled {
    bucket: u64,
    seq: u64,
    handle: u32,
    stamp: u32,
    lambda_bits: u64,
}

/// Direct-access table of costs quantized by `width`.
///
/// Records leave in ascending bucket order and first-in first-out within a
/// bucket. Negative costs share bucket 0.
#[derive(Debug, Clone)]
pub struct DirectAccessTable {
    width: f64,
    buckets: Vec<VecDeque<Entry>>,
    spill: BinaryHeap<Reverse<Spilled>>,
    cursor: usize,
    len: usize,
    seq: u64,
}

impl DirectAccessTable {
    pub fn new(width: f64) -> Self {
        assert!(width > 0.0);
        Self {
            width,
            buckets: Vec::new(),
            spill: BinaryHeap::new(),
            cursor: 0,
            len: 0,
            seq: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bucket_of(&self, lambda: f64) -> u64 {
        let b = (lambda / self.width).floor();
        if b.is_nan() || b <= 0.0 {
            0
        } else if b >= u64::MAX as f64 {
            u64::MAX
        } else {
            b as u64
        }
    }

    pub fn insert(&mut self, handle: u32, stamp: u32, lambda: f64) {
        let bucket = self.bucket_of(lambda);
        let seq = self.seq;
        self.seq += 1;
        self.len += 1;
        if (bucket as usize) < MAX_DIRECT_BUCKETS {
            let b = bucket as usize;
            if b >= self.buckets.len() {
                self.buckets.resize_with(b + 1, VecDeque::new);
            }
            self.buckets[b].push_back(Entry {
                handle,
                stamp,
                lambda,
                seq,
            });
            self.cursor = self.cursor.min(b);
        } else {
            self.spill.push(Reverse(Spilled {
                bucket,
                seq,
                handle,
                stamp,
                lambda_bits: lambda.to_bits(),
            }));
        }
    }

    /// Head record in table order, without any freshness check.
    pub fn front(&mut self) -> Option<Entry> {
        while self.cursor < self.buckets.len() {
            if let Some(e) = self.buckets[self.cursor].front() {
                return Some(*e);
            }
            self.cursor += 1;
        }
        self.spill.peek().map(|Reverse(s)| Entry {
            handle: s.handle,
            stamp: s.stamp,
            lambda: f64::from_bits(s.lambda_bits),
            seq: s.seq,
        })
    }

    /// Removes the record returned by the last [`front`](Self::front).
    pub fn remove_front(&mut self) -> Option<Entry> {
        let head = self.front()?;
        if self.cursor < self.buckets.len() {
            self.buckets[self.cursor].pop_front();
        } else {
            self.spill.pop();
        }
        self.len -= 1;
        Some(head)
    }

    /// Returns the first record the caller judges fresh, leaving it tabled.
    /// Discarded records are dropped and requeued ones re-tabled on the way.
    pub fn peek_min(&mut self, mut check: impl FnMut(&Entry) -> Check) -> Option<Entry> {
        loop {
            let head = self.front()?;
            match check(&head) {
                Check::Fresh => return Some(head),
                Check::Discard => {
                    self.remove_front();
                }
                Check::Requeue { stamp, lambda } => {
                    self.remove_front();
                    self.insert(head.handle, stamp, lambda);
                }
            }
        }
    }

    pub fn pop_min(&mut self, check: impl FnMut(&Entry) -> Check) -> Option<Entry> {
        self.peek_min(check)?;
        self.remove_front()
    }
}
