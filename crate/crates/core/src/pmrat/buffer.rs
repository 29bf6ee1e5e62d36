//! Bounded store of high-loss adversarial examples.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::label::ClassLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry {
    pub features: Vec<f64>,
    pub label: ClassLabel,
    pub loss: f64,
    /// Curriculum stage that produced the example.
    pub stage: usize,
}

/// Keeps the `capacity` highest-loss entries seen, sorted by descending
/// loss (earlier insertions first among equal losses).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<ReplayEntry>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    pub fn min_loss(&self) -> Option<f64> {
        self.entries.last().map(|e| e.loss)
    }

    /// Insert, evicting the lowest-loss entry when full. Returns whether the
    /// entry was kept.
    pub fn insert(&mut self, entry: ReplayEntry) -> bool {
        if self.capacity == 0 || !entry.loss.is_finite() {
            return false;
        }
        if self.entries.len() == self.capacity {
            match self.min_loss() {
                Some(min) if entry.loss > min => {
                    self.entries.pop();
                }
                _ => return false,
            }
        }
        let pos = self.entries.partition_point(|e| e.loss >= entry.loss);
        self.entries.insert(pos, entry);
        true
    }

    /// Up to `k` distinct entries drawn uniformly with a seeded RNG; the whole
    /// buffer when `k >= len`. Entries are not removed.
    pub fn sample(&self, k: usize, seed: u64) -> Vec<&ReplayEntry> {
        if k >= self.entries.len() {
            return self.entries.iter().collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        index::sample(&mut rng, self.entries.len(), k)
            .into_iter()
            .map(|i| &self.entries[i])
            .collect()
    }
}

/// Free-function form of [`ReplayBuffer::sample`].
pub fn replay_sample(buffer: &ReplayBuffer, k: usize, seed: u64) -> Vec<&ReplayEntry> {
    buffer.sample(k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(loss: f64) -> ReplayEntry {
        ReplayEntry {
            features: vec![loss],
            label: ClassLabel::NORMAL,
            loss,
            stage: 0,
        }
    }

    #[test]
    fn sampling_examples() {
        let empty = ReplayBuffer::new(4);
        assert!(empty.sample(3, 0).is_empty());
        let mut b = ReplayBuffer::new(8);
        for l in [1.0, 5.0, 3.0] {
            b.insert(entry(l));
        }
        assert_eq!(b.sample(5, 0).len(), 3);
        let a: Vec<f64> = b.sample(2, 9).iter().map(|e| e.loss).collect();
        let c: Vec<f64> = b.sample(2, 9).iter().map(|e| e.loss).collect();
        assert_eq!(a, c);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn evicts_lowest_loss() {
        let mut b = ReplayBuffer::new(2);
        assert!(b.insert(entry(1.0)));
        assert!(b.insert(entry(3.0)));
        assert!(b.insert(entry(2.0)));
        assert!(!b.insert(entry(0.5)));
        let losses: Vec<f64> = b.entries().iter().map(|e| e.loss).collect();
        assert_eq!(losses, vec![3.0, 2.0]);
    }

    proptest! {
        #[test]
        fn keeps_the_top_losses(losses in prop::collection::vec(0.0f64..10.0, 0..60), cap in 1usize..16) {
            let mut b = ReplayBuffer::new(cap);
            for &l in &losses {
                b.insert(entry(l));
            }
            prop_assert!(b.len() <= cap);
            prop_assert_eq!(b.len(), losses.len().min(cap));
            if let Some(min) = b.min_loss() {
                prop_assert!(b.entries().iter().all(|e| e.loss >= min));
            }
            let mut sorted = losses.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let kept: Vec<f64> = b.entries().iter().map(|e| e.loss).collect();
            prop_assert_eq!(kept, sorted[..b.len()].to_vec());
        }
    }
}
