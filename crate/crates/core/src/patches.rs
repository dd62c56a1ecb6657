//! Patchwork observation structure.
//!
//! A [`PatchSet`] holds `M` observed submatrices `X[T_m, I_m]` whose feature
//! blocks `T_m` partition `0..p` and whose sample sets `I_m` jointly cover
//! `0..n`. Indices are 0-based throughout.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{QuiltError, Result};
use crate::linalg::{self, Matrix};

/// One observed block: `data` is `features.len() x samples.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub features: Vec<usize>,
    pub samples: Vec<usize>,
    pub data: Matrix,
}

impl Patch {
    pub fn new(features: Vec<usize>, samples: Vec<usize>, data: Matrix) -> Self {
        Patch { features, samples, data }
    }

    /// Sub-block of this patch restricted to the given local sample positions.
    pub fn columns(&self, local: &[usize]) -> Matrix {
        linalg::select_columns(&self.data, local)
    }
}

/// Validated, immutable collection of patches.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    n: usize,
    p: usize,
    patches: Vec<Patch>,
}

fn invalid(constraint: &'static str, detail: String) -> QuiltError {
    QuiltError::InvalidPatchSet { constraint, detail }
}

fn check_sorted_in_range(ids: &[usize], bound: usize, what: &str, m: usize) -> Result<()> {
    if ids.is_empty() {
        return Err(invalid("non-empty index sets", format!("patch {m} has no {what}")));
    }
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(
            "sorted unique indices",
            format!("patch {m} {what} are not strictly increasing"),
        ));
    }
    if let Some(&last) = ids.last() {
        if last >= bound {
            return Err(invalid(
                "indices in range",
                format!("patch {m} references {what} index {last} but only {bound} exist"),
            ));
        }
    }
    Ok(())
}

impl PatchSet {
    /// Validate and build. Rejects overlapping feature blocks, uncovered
    /// features or samples, mis-shaped data and non-finite values.
    pub fn new(n: usize, p: usize, patches: Vec<Patch>) -> Result<Self> {
        if patches.is_empty() {
            return Err(invalid("at least one patch", "patch list is empty".into()));
        }
        let mut feature_owner = vec![None; p];
        let mut sample_seen = vec![false; n];
        for (m, patch) in patches.iter().enumerate() {
            check_sorted_in_range(&patch.features, p, "features", m)?;
            check_sorted_in_range(&patch.samples, n, "samples", m)?;
            if patch.data.shape() != (patch.features.len(), patch.samples.len()) {
                return Err(invalid(
                    "data shape = |features| x |samples|",
                    format!(
                        "patch {m} data is {}x{} but index sets are {}x{}",
                        patch.data.nrows(),
                        patch.data.ncols(),
                        patch.features.len(),
                        patch.samples.len()
                    ),
                ));
            }
            if !patch.data.iter().all(|x| x.is_finite()) {
                return Err(invalid("finite data", format!("patch {m} has non-finite entries")));
            }
            for &f in &patch.features {
                if let Some(prev) = feature_owner[f] {
                    return Err(invalid(
                        "disjoint feature blocks",
                        format!("feature {f} appears in patches {prev} and {m}"),
                    ));
                }
                feature_owner[f] = Some(m);
            }
            for &s in &patch.samples {
                sample_seen[s] = true;
            }
        }
        if let Some(f) = feature_owner.iter().position(|o| o.is_none()) {
            return Err(invalid("feature blocks cover all features", format!("feature {f} is in no patch")));
        }
        if let Some(s) = sample_seen.iter().position(|seen| !seen) {
            return Err(invalid("every sample observed", format!("sample {s} is in no patch")));
        }
        Ok(PatchSet { n, p, patches })
    }

    /// Cut patches out of a full `p x n` matrix.
    pub fn from_full(x: &Matrix, layout: &[(Vec<usize>, Vec<usize>)]) -> Result<Self> {
        let (p, n) = x.shape();
        for (m, (features, samples)) in layout.iter().enumerate() {
            check_sorted_in_range(features, p, "features", m)?;
            check_sorted_in_range(samples, n, "samples", m)?;
        }
        let patches = layout
            .iter()
            .map(|(features, samples)| {
                Patch::new(features.clone(), samples.clone(), linalg::submatrix(x, features, samples))
            })
            .collect();
        PatchSet::new(n, p, patches)
    }

    /// Same layout, data taken from another full matrix (e.g. the noiseless signal).
    pub fn with_data_from(&self, x: &Matrix) -> Result<Self> {
        if x.shape() != (self.p, self.n) {
            return Err(QuiltError::InvalidInput(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.p,
                self.n,
                x.nrows(),
                x.ncols()
            )));
        }
        PatchSet::from_full(x, &self.layout())
    }

    /// Keep only the listed global samples (sorted, unique), re-indexed to
    /// `0..keep.len()`. Fails if a patch would lose all of its samples.
    pub fn restrict_samples(&self, keep: &[usize]) -> Result<Self> {
        let mut new_index = vec![usize::MAX; self.n];
        for (i, &s) in keep.iter().enumerate() {
            new_index[s] = i;
        }
        let mut patches = Vec::with_capacity(self.patches.len());
        for patch in &self.patches {
            let local: Vec<usize> = patch
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| new_index[**s] != usize::MAX)
                .map(|(j, _)| j)
                .collect();
            let samples = local.iter().map(|&j| new_index[patch.samples[j]]).collect();
            patches.push(Patch::new(patch.features.clone(), samples, patch.columns(&local)));
        }
        PatchSet::new(keep.len(), self.p, patches)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patch(&self, m: usize) -> &Patch {
        &self.patches[m]
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn layout(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.patches
            .iter()
            .map(|p| (p.features.clone(), p.samples.clone()))
            .collect()
    }

    /// Largest rank every patch can support.
    pub fn max_rank(&self) -> usize {
        self.patches
            .iter()
            .map(|p| p.features.len().min(p.samples.len()))
            .min()
            .unwrap_or(0)
    }

    pub fn graph(&self) -> ObservationGraph {
        build_graph(self)
    }

    /// Scatter the patches into a dense `p x n` matrix plus an observation mask.
    pub fn to_dense(&self) -> (Matrix, Vec<Vec<bool>>) {
        let mut x = Matrix::zeros(self.p, self.n);
        let mut mask = vec![vec![false; self.n]; self.p];
        for patch in &self.patches {
            for (a, &f) in patch.features.iter().enumerate() {
                for (b, &s) in patch.samples.iter().enumerate() {
                    x[(f, s)] = patch.data[(a, b)];
                    mask[f][s] = true;
                }
            }
        }
        (x, mask)
    }
}

/// Patches are nodes; an edge joins two patches that share a sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationGraph {
    nodes: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl ObservationGraph {
    pub fn new(nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        ObservationGraph { nodes, edges }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

/// Whether two sorted index lists intersect.
pub fn sorted_intersects(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

pub fn build_graph(ps: &PatchSet) -> ObservationGraph {
    let m = ps.len();
    let mut edges = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if sorted_intersects(&ps.patch(a).samples, &ps.patch(b).samples) {
                edges.push((a, b));
            }
        }
    }
    ObservationGraph::new(m, edges)
}

/// True iff the graph is connected. A single node counts as connected.
pub fn check_connected(g: &ObservationGraph) -> bool {
    if g.nodes <= 1 {
        return true;
    }
    let adj = g.adjacency();
    let mut seen = vec![false; g.nodes];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count == g.nodes
}

/// Samples of the patch at `ordering[step]` already covered by earlier steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlap {
    /// Global sample ids (J1), increasing.
    pub global: Vec<usize>,
    /// Positions of those samples inside the patch's sample list (J2).
    pub local: Vec<usize>,
}

impl Overlap {
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }
}

/// Membership mask over `0..n` for the union of the given patches' samples.
pub fn union_mask(ps: &PatchSet, patches: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; ps.n()];
    for &m in patches {
        for &s in &ps.patch(m).samples {
            mask[s] = true;
        }
    }
    mask
}

/// Overlap of patch `ordering[step]` (0-based `step >= 1`) with the union of
/// `ordering[..step]`.
pub fn overlap_sets(ps: &PatchSet, ordering: &[usize], step: usize) -> Result<Overlap> {
    if step == 0 || step >= ordering.len() {
        return Err(QuiltError::InvalidInput(format!(
            "overlap step {step} outside 1..{}",
            ordering.len()
        )));
    }
    let prior = union_mask(ps, &ordering[..step]);
    Ok(overlap_with_mask(ps, ordering[step], &prior))
}

pub(crate) fn overlap_with_mask(ps: &PatchSet, patch: usize, prior: &[bool]) -> Overlap {
    let mut global = Vec::new();
    let mut local = Vec::new();
    for (j, &s) in ps.patch(patch).samples.iter().enumerate() {
        if prior[s] {
            global.push(s);
            local.push(j);
        }
    }
    Overlap { global, local }
}
