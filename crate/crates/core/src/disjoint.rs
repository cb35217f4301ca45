//! Disjoint-set forest with union by size and path halving.

#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    count: usize,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
            count: n,
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Number of disjoint sets.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            let grand = self.parent[self.parent[x]];
            self.parent[x] = grand;
            x = grand;
        }
        x
    }

    /// Root lookup without path compression.
    pub fn find_const(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Size of the set rooted at `root`.
    pub fn size(&self, root: usize) -> usize {
        self.size[root]
    }

    /// Joins two roots and returns the surviving root. Ties keep the smaller
    /// index as root so results do not depend on argument order.
    pub fn union_roots(&mut self, a: usize, b: usize) -> usize {
        debug_assert!(self.parent[a] == a && self.parent[b] == b);
        if a == b {
            return a;
        }
        let (big, small) = match self.size[a].cmp(&self.size[b]) {
            std::cmp::Ordering::Greater => (a, b),
            std::cmp::Ordering::Less => (b, a),
            std::cmp::Ordering::Equal => (a.min(b), a.max(b)),
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.count -= 1;
        big
    }

    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let ra = self.find(a);
        let rb = self.find(b);
        self.union_roots(ra, rb)
    }

    /// Dense labels in `[0, count)`, numbered by first occurrence.
    pub fn labels(&mut self) -> Vec<usize> {
        let n = self.len();
        let mut by_root = vec![usize::MAX; n];
        let mut next = 0;
        (0..n)
            .map(|i| {
                let r = self.find(i);
                if by_root[r] == usize::MAX {
                    by_root[r] = next;
                    next += 1;
                }
                by_root[r]
            })
            .collect()
    }
}
