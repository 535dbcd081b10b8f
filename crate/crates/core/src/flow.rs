//! Dinic maximum flow on undirected capacitated graphs, used to find a
//! bounded dual field with prescribed divergence.

use std::collections::VecDeque;

pub(crate) struct FlowNetwork {
    head: Vec<usize>,
    next: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl FlowNetwork {
    pub(crate) fn new(nodes: usize) -> Self {
        Self { head: vec![NONE; nodes], next: Vec::new(), to: Vec::new(), cap: Vec::new(), level: vec![0; nodes], iter: vec![0; nodes] }
    }

    fn push_arc(&mut self, a: usize, b: usize, c: f64) -> usize {
        let id = self.to.len();
        self.to.push(b);
        self.cap.push(c);
        self.next.push(self.head[a]);
        self.head[a] = id;
        id
    }

    /// Arc pair `a -> b` with capacities `c_ab` and `c_ba`; returns the id of
    /// the forward arc.
    pub(crate) fn add_edge(&mut self, a: usize, b: usize, c_ab: f64, c_ba: f64) -> usize {
        let id = self.push_arc(a, b, c_ab);
        self.push_arc(b, a, c_ba);
        id
    }

    /// Residual capacity of an arc.
    pub(crate) fn residual(&self, arc: usize) -> f64 {
        self.cap[arc]
    }

    fn bfs(&mut self, s: usize, t: usize, tiny: f64) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            let mut e = self.head[v];
            while e != NONE {
                let u = self.to[e];
                if self.cap[e] > tiny && self.level[u] < 0 {
                    self.level[u] = self.level[v] + 1;
                    q.push_back(u);
                }
                e = self.next[e];
            }
        }
        self.level[t] >= 0
    }

    /// One augmenting path in the level graph, found iteratively.
    fn augment(&mut self, s: usize, t: usize, tiny: f64) -> f64 {
        let mut path: Vec<usize> = Vec::new();
        let mut v = s;
        loop {
            if v == t {
                let f = path.iter().map(|&e| self.cap[e]).fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.cap[e] -= f;
                    self.cap[e ^ 1] += f;
                }
                return f;
            }
            let mut advanced = false;
            while self.iter[v] != NONE {
                let e = self.iter[v];
                let u = self.to[e];
                if self.cap[e] > tiny && self.level[u] == self.level[v] + 1 {
                    path.push(e);
                    v = u;
                    advanced = true;
                    break;
                }
                self.iter[v] = self.next[e];
            }
            if !advanced {
                // dead end: retreat and skip the arc that led here
                self.level[v] = -1;
                match path.pop() {
                    Some(e) => {
                        v = self.to[e ^ 1];
                        self.iter[v] = self.next[e];
                    }
                    None => return 0.0,
                }
            }
        }
    }

    pub(crate) fn max_flow(&mut self, s: usize, t: usize, tiny: f64) -> f64 {
        let mut total = 0.0;
        while self.bfs(s, t, tiny) {
            self.iter.copy_from_slice(&self.head);
            loop {
                let f = self.augment(s, t, tiny);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
        total
    }
}
