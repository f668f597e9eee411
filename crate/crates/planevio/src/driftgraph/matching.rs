//! Graph matching between the local and global plane graphs.
//!
//! The objective is the standard quadratic-assignment form: vertex
//! affinities for every selected match plus edge affinities for every pair
//! of selected matches, maximized over partial permutations restricted by a
//! binary constraint matrix. The production solver uses a spectral
//! relaxation (leading eigenvector of the pairwise affinity matrix) followed
//! by greedy discretization and steepest-ascent local search; the exhaustive
//! enumerator below serves as its oracle on small instances.

use crate::error::{Error, Result};
use crate::{MatD, Real};

/// Binary matrix constraining which (local, global) matches are admissible.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<bool>,
}

impl ConstraintMatrix {
    pub fn new(rows: usize, cols: usize, value: bool) -> Self {
        ConstraintMatrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i * self.cols + j] = value;
    }

    pub fn zero_column(&mut self, j: usize) {
        for i in 0..self.rows {
            self.set(i, j, false);
        }
    }

    pub fn zero_row(&mut self, i: usize) {
        for j in 0..self.cols {
            self.set(i, j, false);
        }
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    pub fn row_any(&self, i: usize) -> bool {
        (0..self.cols).any(|j| self.get(i, j))
    }

    pub fn col_any(&self, j: usize) -> bool {
        (0..self.rows).any(|i| self.get(i, j))
    }
}

/// Edge affinity lookup: entry for local edge (i1, i2) against global edge
/// (j1, j2), zero on degenerate (i1 == i2 or j1 == j2) indices.
#[derive(Debug, Clone)]
pub struct EdgeAffinity {
    n_local: usize,
    n_global: usize,
    data: Vec<Real>,
}

impl EdgeAffinity {
    pub fn new(n_local: usize, n_global: usize) -> Self {
        EdgeAffinity { n_local, n_global, data: vec![0.0; n_local * n_local * n_global * n_global] }
    }

    #[inline]
    fn idx(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> usize {
        ((i1 * self.n_local + i2) * self.n_global + j1) * self.n_global + j2
    }

    pub fn get(&self, i1: usize, i2: usize, j1: usize, j2: usize) -> Real {
        self.data[self.idx(i1, i2, j1, j2)]
    }

    pub fn set(&mut self, i1: usize, i2: usize, j1: usize, j2: usize, value: Real) {
        let k = self.idx(i1, i2, j1, j2);
        self.data[k] = value;
    }
}

/// A partial-permutation assignment between local and global vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Selected (local, global) index pairs, sorted by local index.
    matches: Vec<(usize, usize)>,
}

impl AssignMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        AssignMatrix { rows, cols, matches: Vec::new() }
    }

    pub fn from_matches(
        rows: usize,
        cols: usize,
        mut matches: Vec<(usize, usize)>,
        ct: Option<&ConstraintMatrix>,
    ) -> Result<Self> {
        matches.sort();
        let mut seen_rows = vec![false; rows];
        let mut seen_cols = vec![false; cols];
        for &(i, j) in &matches {
            if i >= rows || j >= cols || seen_rows[i] || seen_cols[j] {
                return Err(Error::ObservationInvalid("not a partial permutation"));
            }
            if let Some(ct) = ct {
                if !ct.get(i, j) {
                    return Err(Error::ObservationInvalid("assignment violates constraints"));
                }
            }
            seen_rows[i] = true;
            seen_cols[j] = true;
        }
        Ok(AssignMatrix { rows, cols, matches })
    }

    pub fn matches(&self) -> &[(usize, usize)] {
        &self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Partial-permutation and constraint compliance.
    pub fn satisfies(&self, ct: &ConstraintMatrix) -> bool {
        let mut rows = vec![false; self.rows];
        let mut cols = vec![false; self.cols];
        for &(i, j) in &self.matches {
            if rows[i] || cols[j] || !ct.get(i, j) {
                return false;
            }
            rows[i] = true;
            cols[j] = true;
        }
        true
    }
}

/// Exact objective of an assignment: vertex terms plus all ordered pairs of
/// edge terms.
pub fn matching_objective(x: &AssignMatrix, kp: &MatD, kq: &EdgeAffinity) -> Real {
    let m = x.matches();
    let mut total = 0.0;
    for &(i, j) in m {
        total += kp[(i, j)];
    }
    for &(i1, j1) in m {
        for &(i2, j2) in m {
            if i1 != i2 && j1 != j2 {
                total += kq.get(i1, i2, j1, j2);
            }
        }
    }
    total
}

/// Exhaustive maximizer of the matching objective over all Ct-feasible
/// partial permutations. Bounded to small instances.
pub fn brute_force_matching(
    kp: &MatD,
    kq: &EdgeAffinity,
    ct: &ConstraintMatrix,
) -> Result<(AssignMatrix, Real)> {
    let (n_a, n_m) = (ct.rows, ct.cols);
    if n_a > 6 || n_m > 7 {
        return Err(Error::OracleTooLarge(n_a, n_m));
    }
    let mut best: Vec<(usize, usize)> = Vec::new();
    let mut best_obj = 0.0;
    let mut current: Vec<(usize, usize)> = Vec::new();
    let mut used_cols = vec![false; n_m];

    fn gain(
        current: &[(usize, usize)],
        cand: (usize, usize),
        kp: &MatD,
        kq: &EdgeAffinity,
    ) -> Real {
        let mut g = kp[(cand.0, cand.1)];
        for &(i, j) in current {
            g += kq.get(i, cand.0, j, cand.1) + kq.get(cand.0, i, cand.1, j);
        }
        g
    }

    fn recurse(
        row: usize,
        obj: Real,
        current: &mut Vec<(usize, usize)>,
        used_cols: &mut [bool],
        best: &mut Vec<(usize, usize)>,
        best_obj: &mut Real,
        kp: &MatD,
        kq: &EdgeAffinity,
        ct: &ConstraintMatrix,
    ) {
        if row == ct.rows {
            if obj > *best_obj {
                *best_obj = obj;
                *best = current.clone();
            }
            return;
        }
        // Leave this row unmatched.
        recurse(row + 1, obj, current, used_cols, best, best_obj, kp, kq, ct);
        for j in 0..ct.cols {
            if used_cols[j] || !ct.get(row, j) {
                continue;
            }
            let g = gain(current, (row, j), kp, kq);
            current.push((row, j));
            used_cols[j] = true;
            recurse(row + 1, obj + g, current, used_cols, best, best_obj, kp, kq, ct);
            used_cols[j] = false;
            current.pop();
        }
    }

    recurse(0, 0.0, &mut current, &mut used_cols, &mut best, &mut best_obj, kp, kq, ct);
    let x = AssignMatrix::from_matches(n_a, n_m, best, Some(ct))?;
    Ok((x, best_obj))
}

/// Approximate maximizer: spectral relaxation over the candidate pairwise
/// affinity matrix, greedy constrained discretization, then steepest-ascent
/// local search (add/remove/replace/swap moves). Deterministic.
pub fn solve_matching(
    kp: &MatD,
    kq: &EdgeAffinity,
    ct: &ConstraintMatrix,
    power_iters: usize,
) -> AssignMatrix {
    let (n_a, n_m) = (ct.rows, ct.cols);
    let candidates: Vec<(usize, usize)> = (0..n_a)
        .flat_map(|i| (0..n_m).map(move |j| (i, j)))
        .filter(|&(i, j)| ct.get(i, j))
        .collect();
    if candidates.is_empty() {
        return AssignMatrix::empty(n_a, n_m);
    }
    let m = candidates.len();
    // Symmetrized pairwise affinity; the quadratic form is unchanged.
    let mut aff = MatD::zeros(m, m);
    for a in 0..m {
        let (ia, ja) = candidates[a];
        aff[(a, a)] = kp[(ia, ja)];
        for b in (a + 1)..m {
            let (ib, jb) = candidates[b];
            if ia != ib && ja != jb {
                let v = 0.5 * (kq.get(ia, ib, ja, jb) + kq.get(ib, ia, jb, ja));
                aff[(a, b)] = v;
                aff[(b, a)] = v;
            }
        }
    }
    // Power iteration for the leading eigenvector (nonnegative matrix).
    let mut x = nalgebra::DVector::from_element(m, 1.0 / (m as Real).sqrt());
    for _ in 0..power_iters.max(1) {
        let y = &aff * &x;
        let n = y.norm();
        if n < 1e-30 {
            break;
        }
        x = y / n;
    }

    let pair_gain = |sel: &[usize], c: usize| -> Real {
        let (i, j) = candidates[c];
        let mut g = kp[(i, j)];
        for &s in sel {
            let (is, js) = candidates[s];
            if is != i && js != j {
                g += kq.get(is, i, js, j) + kq.get(i, is, j, js);
            }
        }
        g
    };
    let objective = |sel: &[usize]| -> Real {
        let mut total = 0.0;
        for (k, &s) in sel.iter().enumerate() {
            total += pair_gain(&sel[..k], s);
        }
        total
    };

    // Marginal-gain greedy discretization seeded by a priority vector and an
    // optional forced initial selection: repeatedly take the feasible
    // candidate maximizing (gain, priority).
    let greedy = |priority: &dyn Fn(usize) -> Real, init: &[usize]| -> Vec<usize> {
        let mut sel: Vec<usize> = init.to_vec();
        let mut rows = vec![false; n_a];
        let mut cols = vec![false; n_m];
        for &c in init {
            rows[candidates[c].0] = true;
            cols[candidates[c].1] = true;
        }
        loop {
            let mut best: Option<(Real, Real, usize)> = None;
            for c in 0..m {
                let (i, j) = candidates[c];
                if rows[i] || cols[j] {
                    continue;
                }
                let g = pair_gain(&sel, c);
                let p = priority(c);
                let better = match best {
                    None => true,
                    Some((bg, bp, bc)) => {
                        g > bg + 1e-12
                            || ((g - bg).abs() <= 1e-12
                                && (p > bp + 1e-12
                                    || ((p - bp).abs() <= 1e-12 && candidates[c] < candidates[bc])))
                    }
                };
                if better {
                    best = Some((g, p, c));
                }
            }
            match best {
                Some((g, _, c)) if g > 1e-12 => {
                    rows[candidates[c].0] = true;
                    cols[candidates[c].1] = true;
                    sel.push(c);
                }
                _ => break,
            }
        }
        sel
    };

    // Steepest-ascent local search over add / remove / replace / swap moves.
    let improve = |mut selected: Vec<usize>| -> Vec<usize> {
        let mut used_rows = vec![false; n_a];
        let mut used_cols = vec![false; n_m];
        for &c in &selected {
            used_rows[candidates[c].0] = true;
            used_cols[candidates[c].1] = true;
        }
        let tol = 1e-12;
        for _ in 0..200 {
            let current_obj = objective(&selected);
            let mut best_delta = tol;
            let mut best_sel: Option<Vec<usize>> = None;
            for c in 0..m {
                let (i, j) = candidates[c];
                if used_rows[i] || used_cols[j] {
                    continue;
                }
                let delta = pair_gain(&selected, c);
                if delta > best_delta {
                    best_delta = delta;
                    let mut s = selected.clone();
                    s.push(c);
                    best_sel = Some(s);
                }
            }
            for k in 0..selected.len() {
                let mut without: Vec<usize> = selected.clone();
                without.remove(k);
                let base = objective(&without);
                if base - current_obj > best_delta {
                    best_delta = base - current_obj;
                    best_sel = Some(without.clone());
                }
                let (i_k, j_k) = candidates[selected[k]];
                for c in 0..m {
                    let (i, j) = candidates[c];
                    let row_free = i == i_k || !used_rows[i];
                    let col_free = j == j_k || !used_cols[j];
                    if c == selected[k] || !row_free || !col_free {
                        continue;
                    }
                    let delta = base + pair_gain(&without, c) - current_obj;
                    if delta > best_delta {
                        best_delta = delta;
                        let mut s = without.clone();
                        s.push(c);
                        best_sel = Some(s);
                    }
                }
                // Swap the global sides of two matches.
                for l in (k + 1)..selected.len() {
                    let (i_l, j_l) = candidates[selected[l]];
                    if !ct.get(i_k, j_l) || !ct.get(i_l, j_k) {
                        continue;
                    }
                    let (Some(ca), Some(cb)) = (
                        candidates.iter().position(|&p| p == (i_k, j_l)),
                        candidates.iter().position(|&p| p == (i_l, j_k)),
                    ) else {
                        continue;
                    };
                    let mut s: Vec<usize> = selected
                        .iter()
                        .enumerate()
                        .filter(|(q, _)| *q != k && *q != l)
                        .map(|(_, &v)| v)
                        .collect();
                    s.push(ca);
                    s.push(cb);
                    let delta = objective(&s) - current_obj;
                    if delta > best_delta {
                        best_delta = delta;
                        best_sel = Some(s);
                    }
                }
            }
            match best_sel {
                Some(s) => {
                    selected = s;
                    used_rows = vec![false; n_a];
                    used_cols = vec![false; n_m];
                    for &c in &selected {
                        used_rows[candidates[c].0] = true;
                        used_cols[candidates[c].1] = true;
                    }
                }
                None => break,
            }
        }
        selected
    };

    // Multi-start: eigenvector-weighted, vertex-affinity-weighted and
    // unweighted greedy seeds, plus restarts forcing each of the highest
    // eigenvector candidates into the seed. All refined by local search.
    let mut starts: Vec<Vec<usize>> = vec![
        greedy(&|c| x[c], &[]),
        greedy(&|c| kp[(candidates[c].0, candidates[c].1)], &[]),
        greedy(&|_| 0.0, &[]),
    ];
    let mut by_weight: Vec<usize> = (0..m).collect();
    by_weight.sort_by(|&a, &b| {
        x[b].partial_cmp(&x[a]).unwrap().then(candidates[a].cmp(&candidates[b]))
    });
    for &c in by_weight.iter().take(16) {
        starts.push(greedy(&|k| x[k], &[c]));
    }
    let mut best_sel: Vec<usize> = Vec::new();
    let mut best_obj = -1.0;
    for start in starts {
        let refined = improve(start);
        let obj = objective(&refined);
        if obj > best_obj + 1e-12 {
            best_obj = obj;
            best_sel = refined;
        }
    }

    let matches: Vec<(usize, usize)> = best_sel.iter().map(|&c| candidates[c]).collect();
    AssignMatrix::from_matches(n_a, n_m, matches, Some(ct)).expect("solver output feasible")
}
