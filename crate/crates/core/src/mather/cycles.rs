//! Johnson's enumeration of elementary circuits of a directed graph.

/// Simple cycles of `adj` (self-loops included), each listed from its smallest vertex.
///
/// Stops after `cap` cycles; the flag reports whether the cap was hit.
pub fn simple_cycles(adj: &[Vec<usize>], cap: usize) -> (Vec<Vec<usize>>, bool) {
    let n = adj.len();
    let mut out = Vec::new();
    for s in 0..n {
        let comp = component_of(adj, s);
        if comp.iter().filter(|&&v| v).count() == 1 && !adj[s].contains(&s) {
            continue;
        }
        let mut search = Search {
            adj,
            allowed: &comp,
            start: s,
            blocked: vec![false; n],
            b: vec![Vec::new(); n],
            stack: Vec::new(),
            out: &mut out,
            cap,
        };
        search.circuit(s);
        if out.len() >= cap {
            out.truncate(cap);
            return (out, true);
        }
    }
    (out, false)
}

/// Strong component of `s` in the subgraph induced by vertices `≥ s`.
fn component_of(adj: &[Vec<usize>], s: usize) -> Vec<bool> {
    let n = adj.len();
    let mut fwd = vec![false; n];
    fwd[s] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if w >= s && !fwd[w] {
                fwd[w] = true;
                stack.push(w);
            }
        }
    }
    let bwd = reverse_reach(adj, s);
    fwd.iter().zip(&bwd).map(|(a, b)| *a && *b).collect()
}

fn reverse_reach(adj: &[Vec<usize>], s: usize) -> Vec<bool> {
    let n = adj.len();
    let mut radj = vec![Vec::new(); n];
    for (u, targets) in adj.iter().enumerate().skip(s) {
        for &w in targets {
            if w >= s {
                radj[w].push(u);
            }
        }
    }
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &u in &radj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

struct Search<'a> {
    adj: &'a [Vec<usize>],
    allowed: &'a [bool],
    start: usize,
    blocked: Vec<bool>,
    b: Vec<Vec<usize>>,
    stack: Vec<usize>,
    out: &'a mut Vec<Vec<usize>>,
    cap: usize,
}

impl Search<'_> {
    fn unblock(&mut self, u: usize) {
        let mut work = vec![u];
        while let Some(v) = work.pop() {
            if self.blocked[v] {
                self.blocked[v] = false;
                work.append(&mut self.b[v]);
            }
        }
    }

    fn circuit(&mut self, v: usize) -> bool {
        let mut found = false;
        self.stack.push(v);
        self.blocked[v] = true;
        for &w in self.adj[v].iter() {
            if self.out.len() >= self.cap {
                break;
            }
            if !self.allowed[w] {
                continue;
            }
            if w == self.start {
                self.out.push(self.stack.clone());
                found = true;
            } else if !self.blocked[w] && self.circuit(w) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in self.adj[v].iter() {
                if self.allowed[w] && !self.b[w].contains(&v) {
                    self.b[w].push(v);
                }
            }
        }
        self.stack.pop();
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_with_loops() {
        let adj = vec![vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]];
        let (cycles, capped) = simple_cycles(&adj, 100);
        assert!(!capped);
        // 3 loops, 3 two-cycles, 2 three-cycles.
        assert_eq!(cycles.len(), 8);
        assert_eq!(cycles.iter().filter(|c| c.len() == 1).count(), 3);
        assert_eq!(cycles.iter().filter(|c| c.len() == 2).count(), 3);
        assert_eq!(cycles.iter().filter(|c| c.len() == 3).count(), 2);
    }

    #[test]
    fn cap_and_acyclic() {
        let adj = vec![vec![1], vec![2], vec![]];
        assert!(simple_cycles(&adj, 10).0.is_empty());
        let adj = vec![vec![0, 1], vec![0, 1]];
        let (c, capped) = simple_cycles(&adj, 2);
        assert!(capped && c.len() == 2);
    }
}
