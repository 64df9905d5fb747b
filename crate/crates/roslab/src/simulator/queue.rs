//! Order-statistic container for one class's queued jobs.

use std::cmp::Ordering;

/// A queued job: absolute patience deadline plus insertion sequence number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEntry {
    pub deadline: f64,
    pub seq: u64,
}

impl QueueEntry {
    fn key_cmp(&self, other: &QueueEntry) -> Ordering {
        self.deadline.total_cmp(&other.deadline).then(self.seq.cmp(&other.seq))
    }

    pub fn remaining(&self, now: f64) -> f64 {
        self.deadline - now
    }
}

const BLOCK: usize = 512;

/// Sorted-by-deadline multiset stored as a list of sorted blocks, giving
/// cheap rank selection, minimum removal and insertion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueMeasure {
    blocks: Vec<Vec<QueueEntry>>,
    len: usize,
}

impl QueueMeasure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn min(&self) -> Option<&QueueEntry> {
        self.blocks.first().and_then(|b| b.first())
    }

    pub fn insert(&mut self, entry: QueueEntry) {
        self.len += 1;
        if self.blocks.is_empty() {
            self.blocks.push(vec![entry]);
            return;
        }
        let bi = self
            .blocks
            .partition_point(|b| b.last().expect("blocks are nonempty").key_cmp(&entry) == Ordering::Less)
            .min(self.blocks.len() - 1);
        let block = &mut self.blocks[bi];
        let pos = block.partition_point(|e| e.key_cmp(&entry) == Ordering::Less);
        block.insert(pos, entry);
        if block.len() > 2 * BLOCK {
            let tail = block.split_off(BLOCK);
            self.blocks.insert(bi + 1, tail);
        }
    }

    pub fn pop_min(&mut self) -> Option<QueueEntry> {
        self.remove_rank(0)
    }

    /// Remove the job with the `(rank+1)`-th smallest deadline.
    pub fn remove_rank(&mut self, mut rank: usize) -> Option<QueueEntry> {
        if rank >= self.len {
            return None;
        }
        for bi in 0..self.blocks.len() {
            let n = self.blocks[bi].len();
            if rank < n {
                let entry = self.blocks[bi].remove(rank);
                if self.blocks[bi].is_empty() {
                    self.blocks.remove(bi);
                }
                self.len -= 1;
                return Some(entry);
            }
            rank -= n;
        }
        unreachable!("rank below len always resolves")
    }

    pub fn get_rank(&self, mut rank: usize) -> Option<&QueueEntry> {
        for b in &self.blocks {
            if rank < b.len() {
                return Some(&b[rank]);
            }
            rank -= b.len();
        }
        None
    }

    /// Entries in deadline order.
    pub fn iter(&self) -> impl Iterator<Item = &QueueEntry> + '_ {
        self.blocks.iter().flatten()
    }

    /// `Σ f(deadline − now)` over queued jobs.
    pub fn pairing(&self, now: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().fold(0.0, |acc, e| acc + f(e.deadline - now))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn behaves_like_a_sorted_vec(ops in proptest::collection::vec((0u8..3, 0.0f64..100.0, 0usize..3000), 1..3000)) {
            let mut q = QueueMeasure::new();
            let mut model: Vec<(f64, u64)> = Vec::new();
            for (seq, (op, x, r)) in ops.into_iter().enumerate() {
                match op {
                    0 | 1 => {
                        q.insert(QueueEntry { deadline: x, seq: seq as u64 });
                        let pos = model.partition_point(|&(d, s)| (d, s) < (x, seq as u64));
                        model.insert(pos, (x, seq as u64));
                    }
                    _ => {
                        if model.is_empty() {
                            prop_assert!(q.remove_rank(0).is_none());
                        } else {
                            let r = r % model.len();
                            let e = q.remove_rank(r).unwrap();
                            let m = model.remove(r);
                            prop_assert_eq!((e.deadline, e.seq), m);
                        }
                    }
                }
                prop_assert_eq!(q.len(), model.len());
            }
            let got: Vec<(f64, u64)> = q.iter().map(|e| (e.deadline, e.seq)).collect();
            prop_assert_eq!(got, model);
        }
    }

    #[test]
    fn min_and_pairing() {
        let mut q = QueueMeasure::new();
        for (i, d) in [5.0, 2.0, 9.0].into_iter().enumerate() {
            q.insert(QueueEntry { deadline: d, seq: i as u64 });
        }
        assert_eq!(q.min().unwrap().deadline, 2.0);
        assert_eq!(q.get_rank(2).unwrap().deadline, 9.0);
        assert_eq!(q.pairing(1.0, |x| x), 4.0 + 1.0 + 8.0);
        assert_eq!(q.pop_min().unwrap().deadline, 2.0);
        assert_eq!(q.len(), 2);
    }
}
