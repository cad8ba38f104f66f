//! Fenwick (binary indexed) tree over per-site particle counts.

#[derive(Debug, Clone)]
pub struct PrefixSumTree {
    tree: Vec<u64>,
    top: usize,
}

impl PrefixSumTree {
    /// Tree over positions `1..=weights.len()` (`weights[0]` is position 1).
    pub fn from_weights(weights: &[u64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        tree[1..].copy_from_slice(weights);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let top = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        PrefixSumTree { tree, top }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn add(&mut self, pos: usize, delta: i64) {
        debug_assert!(pos >= 1 && pos <= self.len());
        let mut i = pos;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add(delta as u64);
            i += i & i.wrapping_neg();
        }
    }

    pub fn prefix(&self, pos: usize) -> u64 {
        let mut i = pos.min(self.len());
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    pub fn total(&self) -> u64 {
        self.prefix(self.len())
    }

    /// Smallest position whose inclusive prefix sum exceeds `target`.
    ///
    /// With `target` uniform on `0..total()` this picks position `i` with
    /// probability `weight(i) / total()`.
    #[inline]
    pub fn find(&self, mut target: u64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos + 1
    }
}
