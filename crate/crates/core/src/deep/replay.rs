use std::collections::VecDeque;

use rand::Rng;

use crate::policy::Transition;

/// Fixed-capacity experience store; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            items: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// `n` distinct transitions chosen uniformly, or `None` if fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if n > self.items.len() {
            return None;
        }
        let idx = rand::seq::index::sample(rng, self.items.len(), n);
        Some(idx.iter().map(|i| &self.items[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(tag: f64) -> Transition {
        Transition {
            state: vec![tag],
            action: 0,
            reward: tag,
            next_state: vec![tag],
            terminal: false,
        }
    }

    #[test]
    fn evicts_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..4 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.get(0).reward, 1.0);
    }

    #[test]
    fn full_sample_is_permutation() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..7 {
            b.push(t(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut got: Vec<f64> = b.sample(7, &mut rng).unwrap().iter().map(|x| x.reward).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, (0..7).map(|i| i as f64).collect::<Vec<_>>());
        assert!(b.sample(8, &mut rng).is_none());
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(20);
        for i in 0..20 {
            b.push(t(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut counts = [0usize; 20];
        let draws = 40_000;
        for _ in 0..draws {
            for x in b.sample(5, &mut rng).unwrap() {
                counts[x.reward as usize] += 1;
            }
        }
        let expected = draws as f64 * 5.0 / 20.0;
        for c in counts {
            assert!((c as f64 - expected).abs() / expected < 0.02, "{counts:?}");
        }
    }
}
