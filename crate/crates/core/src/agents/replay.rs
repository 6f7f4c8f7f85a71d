//! Proportional prioritized replay backed by a sum tree.

use rand::Rng;

use crate::scalar::Scalar;

/// One stored transition. Actions are kept in squashed `[-1, 1]` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<T>,
    pub action: Vec<T>,
    pub reward: T,
    pub next_obs: Vec<T>,
    pub done: bool,
}

#[derive(Debug, Clone)]
struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.capacity + i]
    }

    fn set(&mut self, i: usize, p: f64) {
        let mut k = self.capacity + i;
        self.nodes[k] = p;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`.
    fn find(&self, mut mass: f64, len: usize) -> usize {
        let mut k = 1;
        while k < self.capacity {
            let left = self.nodes[2 * k];
            if mass < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                mass -= left;
                k = 2 * k + 1;
            }
        }
        (k - self.capacity).min(len - 1)
    }
}

/// A sampled minibatch with importance weights normalized by their maximum.
#[derive(Debug, Clone)]
pub struct PrioritizedSample<T> {
    pub indices: Vec<usize>,
    pub weights: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct PrioritizedReplay<T> {
    data: Vec<Transition<T>>,
    capacity: usize,
    tree: SumTree,
    next: usize,
    max_priority: f64,
    alpha: f64,
    beta: f64,
    eps: f64,
}

impl<T: Scalar> PrioritizedReplay<T> {
    pub fn new(capacity: usize, alpha: f64, beta: f64, eps: f64) -> Self {
        let capacity = capacity.max(1);
        Self {
            data: Vec::new(),
            capacity,
            tree: SumTree::new(capacity.next_power_of_two()),
            next: 0,
            max_priority: 1.0,
            alpha,
            beta,
            eps,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition<T> {
        &self.data[i]
    }

    /// Inserts at the highest priority seen so far, overwriting the oldest
    /// entry once full.
    pub fn push(&mut self, t: Transition<T>) {
        let slot = self.next;
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[slot] = t;
        }
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        self.next = (self.next + 1) % self.capacity;
    }

    /// Sampling probability of entry `i`.
    pub fn probability(&self, i: usize) -> f64 {
        self.tree.get(i) / self.tree.total()
    }

    /// Stratified proportional sampling of `n` entries.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<PrioritizedSample<T>> {
        if self.data.is_empty() || n == 0 {
            return None;
        }
        let total = self.tree.total();
        let seg = total / n as f64;
        let len = self.data.len();
        let indices: Vec<usize> = (0..n)
            .map(|k| {
                let u: f64 = rng.random_range(0.0..1.0);
                self.tree.find(((k as f64 + u) * seg).min(total * (1.0 - 1e-12)), len)
            })
            .collect();
        let raw: Vec<f64> = indices
            .iter()
            .map(|&i| (len as f64 * self.probability(i)).powf(-self.beta))
            .collect();
        let max = raw.iter().copied().fold(0.0f64, f64::max);
        Some(PrioritizedSample {
            indices,
            weights: raw.iter().map(|&w| T::lit(w / max)).collect(),
        })
    }

    /// Sets priorities to `|td| + eps`.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[T]) {
        for (&i, &d) in indices.iter().zip(td_errors) {
            let mut p = d.as_f64().abs() + self.eps;
            if !p.is_finite() {
                p = self.max_priority;
            }
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.alpha));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition<f64> {
        Transition {
            obs: vec![r],
            action: vec![0.0],
            reward: r,
            next_obs: vec![r],
            done: false,
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_follow_priorities() {
        let mut b = PrioritizedReplay::new(5, 0.6, 0.4, 1e-6);
        for i in 0..5 {
            b.push(tr(i as f64));
        }
        b.update_priorities(&[0, 1, 2, 3, 4], &[1.0, 2.0, 0.0, 4.0, 3.0]);
        let p: Vec<f64> = (0..5).map(|i| b.probability(i)).collect();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let raw: Vec<f64> = [1.0f64, 2.0, 0.0, 4.0, 3.0].iter().map(|d| (d + 1e-6).powf(0.6)).collect();
        let z: f64 = raw.iter().sum();
        for (pi, ri) in p.iter().zip(&raw) {
            assert!((pi - ri / z).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_frequencies_match_probabilities() {
        let mut b = PrioritizedReplay::new(4, 1.0, 0.4, 0.0);
        for i in 0..4 {
            b.push(tr(i as f64));
        }
        b.update_priorities(&[0, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 4];
        let draws = 20_000;
        for _ in 0..draws / 10 {
            for i in b.sample(10, &mut rng).unwrap().indices {
                counts[i] += 1;
            }
        }
        for (i, c) in counts.iter().enumerate() {
            let want = (i + 1) as f64 / 10.0;
            assert!((*c as f64 / draws as f64 - want).abs() < 0.01, "{i}: {c}");
        }
    }

    #[test]
    fn weights_are_normalized_importance_ratios() {
        let mut b = PrioritizedReplay::new(3, 1.0, 1.0, 0.0);
        for i in 0..3 {
            b.push(tr(i as f64));
        }
        b.update_priorities(&[0, 1, 2], &[1.0, 1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = b.sample(64, &mut rng).unwrap();
        for (&i, &w) in s.indices.iter().zip(&s.weights) {
            assert!(w <= 1.0 + 1e-12);
            // beta = 1: w proportional to 1 / p
            let want = if i == 2 { 0.5 } else { 1.0 };
            assert!((w - want).abs() < 1e-12, "{i} {w}");
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = PrioritizedReplay::new(3, 0.6, 0.4, 1e-6);
        for i in 0..5 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| b.get(i).reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
        assert!(((0..3).map(|i| b.probability(i)).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn new_entries_get_max_priority() {
        let mut b = PrioritizedReplay::new(4, 1.0, 0.4, 0.0);
        b.push(tr(0.0));
        b.update_priorities(&[0], &[5.0]);
        b.push(tr(1.0));
        assert!((b.probability(1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_buffer_yields_nothing() {
        let b = PrioritizedReplay::<f64>::new(4, 0.6, 0.4, 1e-6);
        assert!(b.sample(2, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }
}
