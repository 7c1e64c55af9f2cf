//! Exact discrete Wasserstein distances at desk scale.
//!
//! The solver is a transportation simplex on the bipartite graph (network
//! simplex specialized to dense transport problems): northwest-corner
//! start, spanning-tree basis, block pivot search with a Bland-rule
//! fallback against degenerate cycling. It is the ground-truth oracle the
//! Sinkhorn bounds are validated against.

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::real::Real;
use crate::util::{compensated_sum, dist_pow};

/// Ground cost specification: Euclidean distance raised to the power `r`.
#[derive(Debug, Clone, Copy)]
pub struct CostSpec<T: Real = f64> {
    /// Cost order, r >= 1.
    pub r: T,
    /// Refuse to materialize cost matrices with more than this many
    /// entries.
    pub entry_cap: usize,
}

pub const DEFAULT_LP_ENTRY_CAP: usize = 250_000;

impl<T: Real> CostSpec<T> {
    pub fn new(r: T) -> Result<Self> {
        if !(r >= T::one()) {
            return Err(Error::Domain(format!("cost order r = {r} must be >= 1")));
        }
        Ok(Self {
            r,
            entry_cap: DEFAULT_LP_ENTRY_CAP,
        })
    }

    pub fn with_entry_cap(mut self, cap: usize) -> Self {
        self.entry_cap = cap;
        self
    }
}

/// A dense coupling matrix with its prescribed marginals.
#[derive(Debug, Clone)]
pub struct TransportPlan<T: Real = f64> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
    row_marginals: Vec<T>,
    col_marginals: Vec<T>,
}

impl<T: Real> TransportPlan<T> {
    /// Wraps entries as a plan. Shape and nonnegativity are enforced here;
    /// agreement with the prescribed marginals is the solver's contract
    /// and can be checked with [`TransportPlan::marginal_residual`].
    pub fn new(
        rows: usize,
        cols: usize,
        entries: Vec<T>,
        row_marginals: Vec<T>,
        col_marginals: Vec<T>,
    ) -> Result<Self> {
        if entries.len() != rows * cols
            || row_marginals.len() != rows
            || col_marginals.len() != cols
        {
            return Err(Error::Dimension(format!(
                "plan of {} entries does not match {rows} x {cols}",
                entries.len()
            )));
        }
        if entries.iter().any(|&e| !e.is_finite() || e < T::zero()) {
            return Err(Error::Domain("negative or non-finite plan entry".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            row_marginals,
            col_marginals,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.entries[i * self.cols + j]
    }

    pub fn row_marginals(&self) -> &[T] {
        &self.row_marginals
    }

    pub fn col_marginals(&self) -> &[T] {
        &self.col_marginals
    }

    /// Row sums of the plan.
    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| compensated_sum(self.entries[i * self.cols..(i + 1) * self.cols].iter().copied()))
            .collect()
    }

    /// Column sums of the plan.
    pub fn col_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += self.entries[i * self.cols + j];
            }
        }
        sums
    }

    /// l1 deviation of the plan's marginals from the prescribed ones.
    pub fn marginal_residual(&self) -> T {
        let rows: T = self
            .row_sums()
            .iter()
            .zip(&self.row_marginals)
            .map(|(&s, &p)| (s - p).abs())
            .sum();
        let cols: T = self
            .col_sums()
            .iter()
            .zip(&self.col_marginals)
            .map(|(&s, &q)| (s - q).abs())
            .sum();
        rows + cols
    }

    /// Total mass of the plan.
    pub fn mass(&self) -> T {
        compensated_sum(self.entries.iter().copied())
    }

    /// Entropy -sum pi log pi with the 0 log 0 = 0 convention.
    pub fn entropy(&self) -> T {
        compensated_sum(self.entries.iter().map(|&e| {
            if e > T::zero() {
                -e * e.ln()
            } else {
                T::zero()
            }
        }))
    }
}

/// Cost matrix c_ij = |x_i - y_j|^r, materialized only under the cap.
fn cost_matrix<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    spec: &CostSpec<T>,
) -> Result<Vec<T>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "measures of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let (n, m) = (a.len(), b.len());
    if n.saturating_mul(m) > spec.entry_cap {
        return Err(Error::SizeCapExceeded {
            rows: n,
            cols: m,
            cap: spec.entry_cap,
        });
    }
    let mut c = Vec::with_capacity(n * m);
    for i in 0..n {
        let xi = a.point(i);
        for j in 0..m {
            c.push(dist_pow(xi, b.point(j), spec.r));
        }
    }
    Ok(c)
}

/// Exact Wasserstein distance d_r(P, Q) and an optimal plan.
///
/// Returns the distance (the r-th root of the optimal objective); the
/// objective itself is `distance.powf(r)` or [`TransportPlan`] cost.
pub fn wasserstein_lp<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    spec: &CostSpec<T>,
) -> Result<(T, TransportPlan<T>)> {
    let cost = cost_matrix(a, b, spec)?;
    let (objective, flows) = transport_simplex(a.weights(), b.weights(), &cost)?;
    let plan = TransportPlan::new(
        a.len(),
        b.len(),
        flows,
        a.weights().to_vec(),
        b.weights().to_vec(),
    )?;
    Ok((objective.max(T::zero()).powf(T::one() / spec.r), plan))
}

/// 1-D Wasserstein distance via the monotone CDF coupling, an
/// O((n + m) log(n + m)) oracle equal to [`wasserstein_lp`] on the line.
pub fn wasserstein_1d<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    r: T,
) -> Result<T> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Dimension(format!(
            "wasserstein_1d needs 1-D measures, got dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    if !(r >= T::one()) {
        return Err(Error::Domain(format!("cost order r = {r} must be >= 1")));
    }

    let sort_atoms = |m: &DiscreteMeasure<T>| {
        let mut idx: Vec<usize> = (0..m.len()).collect();
        idx.sort_by(|&i, &j| m.coords()[i].partial_cmp(&m.coords()[j]).unwrap());
        idx
    };
    let ia = sort_atoms(a);
    let ib = sort_atoms(b);

    // Monotone coupling: sweep both sorted atom lists, pairing off the
    // smaller remaining mass each step. When masses tie exactly (common
    // with uniform weights), both sides advance.
    let two = T::of(2.0);
    let pow = |d: T| {
        if r == two {
            d * d
        } else if r == T::one() {
            d
        } else {
            d.powf(r)
        }
    };
    let mut terms: Vec<T> = Vec::with_capacity(ia.len() + ib.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut rem_a = a.weights()[ia[0]];
    let mut rem_b = b.weights()[ib[0]];
    while i < ia.len() && j < ib.len() {
        let mass = rem_a.min(rem_b);
        let d = (a.coords()[ia[i]] - b.coords()[ib[j]]).abs();
        terms.push(mass * pow(d));
        rem_a -= mass;
        rem_b -= mass;
        if rem_a <= T::zero() {
            i += 1;
            if i < ia.len() {
                rem_a = a.weights()[ia[i]];
            }
        }
        if rem_b <= T::zero() {
            j += 1;
            if j < ib.len() {
                rem_b = b.weights()[ib[j]];
            }
        }
    }
    Ok(compensated_sum(terms).max(T::zero()).powf(T::one() / r))
}

// --- transportation simplex ---------------------------------------------

struct Basis<T> {
    n: usize,
    m: usize,
    arc_row: Vec<usize>,
    arc_col: Vec<usize>,
    arc_flow: Vec<T>,
    /// node -> (neighbor node, basis slot); nodes 0..n are sources,
    /// n..n+m sinks.
    adj: Vec<Vec<(usize, usize)>>,
    is_basic: Vec<bool>,
}

impl<T: Real> Basis<T> {
    fn node_of_col(&self, j: usize) -> usize {
        self.n + j
    }

    fn add_arc(&mut self, slot: usize, i: usize, j: usize, flow: T) {
        self.arc_row[slot] = i;
        self.arc_col[slot] = j;
        self.arc_flow[slot] = flow;
        self.adj[i].push((self.n + j, slot));
        self.adj[self.n + j].push((i, slot));
        self.is_basic[i * self.m + j] = true;
    }

    fn remove_arc(&mut self, slot: usize) {
        let i = self.arc_row[slot];
        let node_j = self.n + self.arc_col[slot];
        self.adj[i].retain(|&(_, s)| s != slot);
        self.adj[node_j].retain(|&(_, s)| s != slot);
        self.is_basic[i * self.m + self.arc_col[slot]] = false;
    }
}

/// Solves min sum c_ij f_ij s.t. row sums = p, col sums = q, f >= 0.
/// Returns (objective, dense flow matrix).
fn transport_simplex<T: Real>(p: &[T], q: &[T], cost: &[T]) -> Result<(T, Vec<T>)> {
    let n = p.len();
    let m = q.len();
    let n_arcs = n + m - 1;

    let mut basis = Basis {
        n,
        m,
        arc_row: vec![0; n_arcs],
        arc_col: vec![0; n_arcs],
        arc_flow: vec![T::zero(); n_arcs],
        adj: vec![Vec::new(); n + m],
        is_basic: vec![false; n * m],
    };

    // Northwest-corner start: advances one index per placed arc, so it
    // yields exactly n + m - 1 basic arcs, degenerate zeros included.
    {
        let mut rem_p = p.to_vec();
        let mut rem_q = q.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        for slot in 0..n_arcs {
            let f = rem_p[i].min(rem_q[j]);
            basis.add_arc(slot, i, j, f);
            rem_p[i] -= f;
            rem_q[j] -= f;
            if slot + 1 == n_arcs {
                break;
            }
            if rem_p[i] <= T::zero() && i + 1 < n {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let cost_scale = cost
        .iter()
        .fold(T::zero(), |acc, &c| acc.max(c.abs()))
        .max(T::one());
    let tol = T::of(1e-12) * cost_scale;

    let mut u = vec![T::zero(); n];
    let mut v = vec![T::zero(); m];
    let mut parent_node = vec![usize::MAX; n + m];
    let mut parent_slot = vec![usize::MAX; n + m];
    let mut order: Vec<usize> = Vec::with_capacity(n + m);
    let mut stack: Vec<usize> = Vec::new();

    let total_arcs = n * m;
    let block = ((total_arcs as f64).sqrt().ceil() as usize)
        .max(64)
        .min(total_arcs.max(1));
    let mut scan_start = 0usize;

    let max_pivots = 1000 * (n + m) + 10_000;
    let degenerate_limit = 4 * (n + m);
    let mut degenerate_run = 0usize;
    let mut bland = false;

    for _pivot in 0..max_pivots {
        // Potentials u_i + v_j = c_ij on tree arcs, rooted at source 0,
        // via one DFS; also records parent pointers for cycle tracing.
        for x in parent_node.iter_mut() {
            *x = usize::MAX;
        }
        order.clear();
        stack.clear();
        stack.push(0);
        parent_node[0] = 0;
        u[0] = T::zero();
        while let Some(node) = stack.pop() {
            order.push(node);
            for &(next, slot) in &basis.adj[node] {
                if parent_node[next] != usize::MAX {
                    continue;
                }
                parent_node[next] = node;
                parent_slot[next] = slot;
                let (i, j) = (basis.arc_row[slot], basis.arc_col[slot]);
                let c = cost[i * m + j];
                if next >= n {
                    v[next - n] = c - u[i];
                } else {
                    u[next] = c - v[j];
                }
                stack.push(next);
            }
        }
        debug_assert_eq!(order.len(), n + m, "basis is not a spanning tree");

        // Entering arc: most negative reduced cost within a rotating
        // block (Dantzig-style); after a long degenerate run fall back to
        // the lowest-index violating arc (Bland) to break cycling.
        let mut entering: Option<(usize, T)> = None;
        if bland {
            for arc in 0..total_arcs {
                if basis.is_basic[arc] {
                    continue;
                }
                let (i, j) = (arc / m, arc % m);
                let rc = cost[arc] - u[i] - v[j];
                if rc < -tol {
                    entering = Some((arc, rc));
                    break;
                }
            }
        } else {
            let mut scanned = 0usize;
            let mut offset = scan_start;
            while scanned < total_arcs {
                let mut best: Option<(usize, T)> = None;
                let upper = (scanned + block).min(total_arcs);
                while scanned < upper {
                    let arc = offset;
                    offset += 1;
                    if offset == total_arcs {
                        offset = 0;
                    }
                    scanned += 1;
                    if basis.is_basic[arc] {
                        continue;
                    }
                    let (i, j) = (arc / m, arc % m);
                    let rc = cost[arc] - u[i] - v[j];
                    if rc < -tol {
                        match best {
                            Some((barc, brc)) if rc > brc || (rc == brc && arc > barc) => {}
                            _ => best = Some((arc, rc)),
                        }
                    }
                }
                if best.is_some() {
                    entering = best;
                    scan_start = offset;
                    break;
                }
            }
        }

        let Some((arc_in, _)) = entering else {
            // Optimal.
            let mut flows = vec![T::zero(); n * m];
            for slot in 0..n_arcs {
                let f = basis.arc_flow[slot].max(T::zero());
                flows[basis.arc_row[slot] * m + basis.arc_col[slot]] = f;
            }
            let objective = compensated_sum(
                flows
                    .iter()
                    .zip(cost)
                    .filter(|(&f, _)| f > T::zero())
                    .map(|(&f, &c)| f * c),
            );
            return Ok((objective, flows));
        };

        let (ei, ej) = (arc_in / m, arc_in % m);

        // Cycle: entering arc plus the tree path between its endpoints.
        // In a bipartite cycle arc directions alternate, so signs follow
        // path parity with the entering arc at +theta.
        let (node_a, node_b) = (ei, basis.node_of_col(ej));
        let mut path_a = vec![node_a];
        let mut path_b = vec![node_b];
        {
            // climb to equal depth is implicit: walk both to root and trim
            let mut x = node_a;
            while parent_node[x] != x {
                x = parent_node[x];
                path_a.push(x);
            }
            let mut y = node_b;
            while parent_node[y] != y {
                y = parent_node[y];
                path_b.push(y);
            }
            while path_a.len() >= 2
                && path_b.len() >= 2
                && path_a[path_a.len() - 1] == path_b[path_b.len() - 1]
                && path_a[path_a.len() - 2] == path_b[path_b.len() - 2]
            {
                path_a.pop();
                path_b.pop();
            }
        }

        // Arc slots along node_a -> lca -> node_b.
        let mut cycle_slots: Vec<usize> = Vec::with_capacity(path_a.len() + path_b.len());
        for w in path_a.windows(2) {
            cycle_slots.push(parent_slot_of(&parent_slot, w[0], w[1], &parent_node));
        }
        for w in path_b.windows(2).rev() {
            cycle_slots.push(parent_slot_of(&parent_slot, w[0], w[1], &parent_node));
        }

        // The entering arc takes +theta. Walking node_a -> ... -> node_b,
        // the first tree arc shares row ei with the entering arc and must
        // take -theta, and signs alternate from there: even path
        // positions are -theta, odd are +theta.
        let mut theta = T::infinity();
        let mut leaving: Option<usize> = None;
        for (pos, &slot) in cycle_slots.iter().enumerate() {
            if pos % 2 == 0 {
                let f = basis.arc_flow[slot];
                let slot_arc = basis.arc_row[slot] * m + basis.arc_col[slot];
                let better = match leaving {
                    None => true,
                    Some(cur) => {
                        let cur_arc = basis.arc_row[cur] * m + basis.arc_col[cur];
                        f < theta || (f == theta && slot_arc < cur_arc)
                    }
                };
                if better {
                    theta = f;
                    leaving = Some(slot);
                }
            }
        }
        let leaving = leaving.expect("cycle must contain a leaving arc");
        let theta = theta.max(T::zero());

        for (pos, &slot) in cycle_slots.iter().enumerate() {
            if pos % 2 == 0 {
                basis.arc_flow[slot] -= theta;
            } else {
                basis.arc_flow[slot] += theta;
            }
        }
        basis.arc_flow[leaving] = T::zero();

        basis.remove_arc(leaving);
        basis.add_arc(leaving, ei, ej, theta);

        if theta <= tol {
            degenerate_run += 1;
            if degenerate_run > degenerate_limit {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
    }

    Err(Error::Domain(
        "transportation simplex exceeded its pivot budget".into(),
    ))
}

/// Slot of the tree arc between adjacent path nodes `a` and `b`, one of
/// which is the other's parent.
fn parent_slot_of(
    parent_slot: &[usize],
    a: usize,
    b: usize,
    parent_node: &[usize],
) -> usize {
    if parent_node[a] == b {
        parent_slot[a]
    } else {
        debug_assert_eq!(parent_node[b], a);
        parent_slot[b]
    }
}
