//! Primal network simplex for the uncapacitated transportation problem.
//!
//! Nodes are the sources `0..m`, the sinks `m..m+n` and an artificial root.
//! The initial basis sends every supply to the root and every demand out of
//! it; artificial arcs cost `1 + max_cost`, which already makes any flow
//! through the root strictly worse than a direct arc. The basis is kept
//! strongly feasible (every node can push flow to the root), so the leaving
//! arc rule below prevents cycling under any entering rule.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

pub(crate) struct SimplexOutput {
    /// `(source, sink, flow)` over basic arcs with positive flow.
    pub flows: Vec<(usize, usize, i64)>,
    pub pivots: u64,
}

struct Tree<'a, C: Fn(usize, usize) -> f64> {
    m: usize,
    n: usize,
    root: usize,
    cost: &'a C,
    art: f64,
    parent: Vec<usize>,
    /// arc id linking a node to its parent
    pred: Vec<usize>,
    /// true when the tree arc points from the node to its parent
    up: Vec<bool>,
    flow: Vec<i64>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    first_child: Vec<usize>,
    next_sib: Vec<usize>,
    prev_sib: Vec<usize>,
}

impl<'a, C: Fn(usize, usize) -> f64> Tree<'a, C> {
    fn arc_count(&self) -> usize {
        self.m * self.n + self.m + self.n
    }

    /// `(tail, head, cost)` of an arc id. Ids below `m n` are the real arcs
    /// `source -> sink`, then `source -> root`, then `root -> sink`.
    #[inline]
    fn arc(&self, e: usize) -> (usize, usize, f64) {
        let mn = self.m * self.n;
        if e < mn {
            let (i, j) = (e / self.n, e % self.n);
            (i, self.m + j, (self.cost)(i, j))
        } else if e < mn + self.m {
            (e - mn, self.root, self.art)
        } else {
            (self.root, self.m + (e - mn - self.m), self.art)
        }
    }

    #[inline]
    fn reduced_cost(&self, e: usize) -> f64 {
        let (t, h, c) = self.arc(e);
        c + self.pi[t] - self.pi[h]
    }

    fn detach(&mut self, v: usize) {
        let p = self.parent[v];
        let (prev, next) = (self.prev_sib[v], self.next_sib[v]);
        if prev == NONE {
            self.first_child[p] = next;
        } else {
            self.next_sib[prev] = next;
        }
        if next != NONE {
            self.prev_sib[next] = prev;
        }
        self.prev_sib[v] = NONE;
        self.next_sib[v] = NONE;
    }

    fn attach(&mut self, v: usize, p: usize) {
        self.parent[v] = p;
        let head = self.first_child[p];
        self.next_sib[v] = head;
        self.prev_sib[v] = NONE;
        if head != NONE {
            self.prev_sib[head] = v;
        }
        self.first_child[p] = v;
    }

    /// Recomputes depth and potentials below `top` from its parent.
    fn refresh_subtree(&mut self, top: usize, stack: &mut Vec<usize>) {
        stack.clear();
        stack.push(top);
        while let Some(v) = stack.pop() {
            let p = self.parent[v];
            let (_, _, c) = self.arc(self.pred[v]);
            self.depth[v] = self.depth[p] + 1;
            self.pi[v] = if self.up[v] { self.pi[p] - c } else { self.pi[p] + c };
            let mut ch = self.first_child[v];
            while ch != NONE {
                stack.push(ch);
                ch = self.next_sib[ch];
            }
        }
    }
}

/// Solves `min sum c(i,j) x_ij` with row sums `supply` and column sums
/// `demand` (equal totals, all entries positive).
pub(crate) fn transport_simplex<C: Fn(usize, usize) -> f64>(
    supply: &[i64],
    demand: &[i64],
    cost: &C,
    max_cost: f64,
) -> Result<SimplexOutput> {
    let (m, n) = (supply.len(), demand.len());
    let nodes = m + n + 1;
    let root = m + n;
    let art = 1.0 + max_cost;
    let mut t = Tree {
        m,
        n,
        root,
        cost,
        art,
        parent: vec![NONE; nodes],
        pred: vec![NONE; nodes],
        up: vec![false; nodes],
        flow: vec![0; nodes],
        depth: vec![0; nodes],
        pi: vec![0.0; nodes],
        first_child: vec![NONE; nodes],
        next_sib: vec![NONE; nodes],
        prev_sib: vec![NONE; nodes],
    };
    let mn = m * n;
    for i in 0..m {
        t.attach(i, root);
        t.pred[i] = mn + i;
        t.up[i] = true;
        t.flow[i] = supply[i];
        t.depth[i] = 1;
        t.pi[i] = -art;
    }
    for j in 0..n {
        let v = m + j;
        t.attach(v, root);
        t.pred[v] = mn + m + j;
        t.up[v] = false;
        t.flow[v] = demand[j];
        t.depth[v] = 1;
        t.pi[v] = art;
    }

    let arcs = t.arc_count();
    let block = ((arcs as f64).sqrt().ceil() as usize).max(16);
    let tol = 1e-12 * (1.0 + max_cost);
    let bland_after = 20 * nodes as u64 + 100;
    let mut next_arc = 0usize;
    let mut degenerate_run = 0u64;
    let mut pivots = 0u64;
    let mut stack = Vec::new();
    let mut path = Vec::new();

    loop {
        // pricing
        let entering = if degenerate_run >= bland_after {
            (0..arcs).find(|&e| t.reduced_cost(e) < -tol)
        } else {
            let mut best = NONE;
            let mut best_rc = -tol;
            let mut scanned = 0;
            let mut e = next_arc;
            let mut in_block = 0;
            while scanned < arcs {
                let rc = t.reduced_cost(e);
                if rc < best_rc {
                    best_rc = rc;
                    best = e;
                }
                e += 1;
                if e == arcs {
                    e = 0;
                }
                scanned += 1;
                in_block += 1;
                if in_block == block {
                    if best != NONE {
                        break;
                    }
                    in_block = 0;
                }
            }
            next_arc = e;
            if best == NONE {
                None
            } else {
                Some(best)
            }
        };
        let Some(e_in) = entering else { break };
        pivots += 1;

        let (u, w, _) = t.arc(e_in);
        // apex of the cycle
        let (mut a, mut b) = (u, w);
        while a != b {
            if t.depth[a] >= t.depth[b] {
                a = t.parent[a];
            } else {
                b = t.parent[b];
            }
        }
        let apex = a;

        // leaving arc: flow on the u side runs parent -> child, so up arcs
        // block; on the w side it runs child -> parent, so down arcs block
        let mut delta = i64::MAX;
        let mut out = NONE;
        let mut out_on_u_side = false;
        let mut v = u;
        while v != apex {
            if t.up[v] && t.flow[v] < delta {
                delta = t.flow[v];
                out = v;
                out_on_u_side = true;
            }
            v = t.parent[v];
        }
        v = w;
        while v != apex {
            if !t.up[v] && t.flow[v] <= delta {
                delta = t.flow[v];
                out = v;
                out_on_u_side = false;
            }
            v = t.parent[v];
        }
        if out == NONE {
            return Err(Error::Internal("transport simplex found an unbounded cycle".into()));
        }
        degenerate_run = if delta == 0 { degenerate_run + 1 } else { 0 };

        if delta > 0 {
            v = u;
            while v != apex {
                t.flow[v] += if t.up[v] { -delta } else { delta };
                v = t.parent[v];
            }
            v = w;
            while v != apex {
                t.flow[v] += if t.up[v] { delta } else { -delta };
                v = t.parent[v];
            }
        }

        // re-hang the cut-off subtree below the entering arc, reversing the
        // path from the entering endpoint to the leaving node
        let (start, new_parent, start_up) = if out_on_u_side { (u, w, true) } else { (w, u, false) };
        path.clear();
        v = start;
        loop {
            path.push(v);
            if v == out {
                break;
            }
            v = t.parent[v];
        }
        let mut carry_pred = e_in;
        let mut carry_up = start_up;
        let mut carry_flow = delta;
        let mut carry_parent = new_parent;
        for &x in &path {
            let (old_pred, old_up, old_flow) = (t.pred[x], t.up[x], t.flow[x]);
            t.detach(x);
            t.attach(x, carry_parent);
            t.pred[x] = carry_pred;
            t.up[x] = carry_up;
            t.flow[x] = carry_flow;
            carry_pred = old_pred;
            carry_up = !old_up;
            carry_flow = old_flow;
            carry_parent = x;
        }
        t.refresh_subtree(start, &mut stack);
    }

    let mut flows = Vec::new();
    for v in 0..root {
        let e = t.pred[v];
        if e >= mn {
            if t.flow[v] != 0 {
                return Err(Error::Internal("artificial arc carries flow at optimum".into()));
            }
            continue;
        }
        if t.flow[v] > 0 {
            flows.push((e / n, e % n, t.flow[v]));
        }
    }
    flows.sort_unstable();
    Ok(SimplexOutput { flows, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_instances() {
        let c = |i: usize, j: usize| [[1.0, 3.0], [2.0, 1.0]][i][j];
        let out = transport_simplex(&[5, 5], &[5, 5], &c, 3.0).unwrap();
        assert_eq!(out.flows, vec![(0, 0, 5), (1, 1, 5)]);

        let c = |i: usize, j: usize| [[0.0, 1.0, 4.0]][i][j];
        let out = transport_simplex(&[9], &[2, 3, 4], &c, 4.0).unwrap();
        assert_eq!(out.flows, vec![(0, 0, 2), (0, 1, 3), (0, 2, 4)]);
    }

    #[test]
    fn degenerate_ties() {
        // all costs equal: every feasible plan is optimal
        let c = |_: usize, _: usize| 1.0;
        let out = transport_simplex(&[3, 3, 3], &[3, 3, 3], &c, 1.0).unwrap();
        let total: i64 = out.flows.iter().map(|f| f.2).sum();
        assert_eq!(total, 9);
        assert!(out.flows.len() <= 5);
    }
}
