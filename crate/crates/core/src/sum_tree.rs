//! Binary sum-tree over nonnegative weights: `O(log n)` point update and
//! `O(log n)` sampling proportional to weight.

#[derive(Debug, Clone)]
pub struct SumTree {
    n: usize,
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let leaves = n.next_power_of_two().max(1);
        let mut t = Self {
            n,
            leaves,
            nodes: vec![0.0; 2 * leaves],
        };
        t.rebuild(weights);
        t
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rebuild(&mut self, weights: &[f64]) {
        debug_assert_eq!(weights.len(), self.n);
        self.nodes.iter_mut().for_each(|v| *v = 0.0);
        self.nodes[self.leaves..self.leaves + self.n].copy_from_slice(weights);
        for i in (1..self.leaves).rev() {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    pub fn total(&self) -> f64 {
        self.nodes[1.min(self.nodes.len() - 1)]
    }

    pub fn update(&mut self, i: usize, w: f64) {
        debug_assert!(w >= 0.0);
        let mut k = self.leaves + i;
        self.nodes[k] = w;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Index `i` with `Σ_{j<i} w_j ≤ u < Σ_{j≤i} w_j` for `u ∈ [0, total)`.
    /// Zero-weight leaves are never returned.
    pub fn find(&self, mut u: f64) -> usize {
        if self.leaves == 1 {
            return 0;
        }
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left || self.nodes[2 * k + 1] <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        let mut i = k - self.leaves;
        // rounding at the right edge can land on padding
        while i >= self.n || self.weight(i) <= 0.0 {
            if i == 0 {
                break;
            }
            i -= 1;
        }
        i
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.find(rng.random::<f64>() * self.total())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn find_respects_prefix_sums() {
        let t = SumTree::new(&[1.0, 0.0, 2.0, 3.0, 0.5]);
        assert_eq!(t.total(), 6.5);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(6.2), 4);
        assert_eq!(t.find(6.5), 4);
    }

    #[test]
    fn update_changes_totals() {
        let mut t = SumTree::new(&[1.0, 1.0, 1.0]);
        t.update(1, 5.0);
        assert_eq!(t.total(), 7.0);
        assert_eq!(t.find(1.5), 1);
        assert_eq!(t.find(6.5), 2);
    }

    #[test]
    fn singleton() {
        let t = SumTree::new(&[0.3]);
        assert_eq!(t.find(0.1), 0);
        assert_eq!(t.total(), 0.3);
    }
}
