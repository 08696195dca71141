//! Structural network analysis: Feinberg-Horn-Jackson graph, linkage
//! classes, rank and deficiency, mass conservation, weak reversibility, and
//! detailed-balance classification with explicit circuit and spanning-forest
//! conditions.

use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::unionfind::UnionFind;

use crate::linalg::{self, Rat};
use crate::mechanism::{Complex, Mechanism};
use crate::{Error, Result};

/// Detailed-balance class of a fully reversible mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbClass {
    /// ker(gamma) = {0}: detailed balanced for every rate choice.
    Udb,
    /// Detailed balanced only on the variety cut out by the constraints.
    Cdb,
}

impl std::fmt::Display for DbClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DbClass::Udb => "UDB",
            DbClass::Cdb => "CDB",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Circuit,
    Forest,
}

impl std::fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConstraintKind::Circuit => "CIRCUIT",
            ConstraintKind::Forest => "FOREST",
        })
    }
}

/// One detailed-balance condition prod_r (k+_r / k-_r)^(a_r) = 1.
/// `exponents` is primitive with positive first nonzero entry and lies in
/// ker(gamma) exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbConstraint {
    pub kind: ConstraintKind,
    pub exponents: Vec<i64>,
}

impl DbConstraint {
    /// Renders with negative exponents moved to the opposite side, e.g.
    /// a = (2, 0, -1, 0) becomes "k-1^2 k3 = k-3 k1^2".
    pub fn render(&self) -> String {
        let factor = |label: String, e: i64| {
            if e == 1 {
                label
            } else {
                format!("{}^{}", label, e)
            }
        };
        // each side lists reverse coefficients first, then forward ones
        let (mut lhs, mut rhs) = (Vec::new(), Vec::new());
        let (mut lhs_fwd, mut rhs_fwd) = (Vec::new(), Vec::new());
        for (r, &a) in self.exponents.iter().enumerate() {
            if a > 0 {
                lhs.push(factor(format!("k-{}", r + 1), a));
                rhs_fwd.push(factor(format!("k{}", r + 1), a));
            } else if a < 0 {
                lhs_fwd.push(factor(format!("k{}", r + 1), -a));
                rhs.push(factor(format!("k-{}", r + 1), -a));
            }
        }
        lhs.extend(lhs_fwd);
        rhs.extend(rhs_fwd);
        format!("{} = {}", lhs.join(" "), rhs.join(" "))
    }
}

/// Positive rational mass vector: rho' gamma = 0, every entry >= 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassVector {
    pub rho: Vec<Rat>,
}

/// FHJ graph: distinct complexes as vertices, one edge per reaction step.
#[derive(Debug, Clone)]
pub struct FhjGraph {
    pub vertices: Vec<Complex>,
    /// (reactant vertex, product vertex, step index) per step.
    pub edges: Vec<(usize, usize, usize)>,
    pub linkage_classes: usize,
}

pub fn build_fhj(mech: &Mechanism) -> FhjGraph {
    let mut vertices: Vec<Complex> = Vec::new();
    let index_of = |c: &Complex, vertices: &mut Vec<Complex>| match vertices
        .iter()
        .position(|v| v == c)
    {
        Some(i) => i,
        None => {
            vertices.push(c.clone());
            vertices.len() - 1
        }
    };
    let mut edges = Vec::with_capacity(mech.r());
    for (s, step) in mech.steps().iter().enumerate() {
        let u = index_of(&step.reactant, &mut vertices);
        let v = index_of(&step.product, &mut vertices);
        edges.push((u, v, s));
    }
    let mut uf = UnionFind::new(vertices.len());
    for &(u, v, _) in &edges {
        uf.union(u, v);
    }
    let mut reps: Vec<usize> = (0..vertices.len()).map(|v| uf.find(v)).collect();
    reps.sort_unstable();
    reps.dedup();
    FhjGraph {
        vertices,
        edges,
        linkage_classes: reps.len(),
    }
}

/// Structural invariants of a mechanism's network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSummary {
    pub n: usize,
    pub l: usize,
    pub s: usize,
    pub deficiency: usize,
    pub reversible: bool,
    pub weakly_reversible: bool,
    pub mass_conserving: bool,
    /// None when the mechanism has irreversible steps (not applicable).
    pub db_class: Option<DbClass>,
    pub n_circuit_conditions: usize,
    pub n_forest_conditions: usize,
}

pub fn summarize(mech: &Mechanism) -> NetworkSummary {
    let fhj = build_fhj(mech);
    let gamma = mech.gamma_columns();
    let s = linalg::rank_of_columns(&gamma);
    let n = fhj.vertices.len();
    let l = fhj.linkage_classes;
    assert!(n >= l + s, "deficiency cannot be negative");
    let reversible = mech.reversible();
    let db_class = if reversible {
        Some(if linalg::integer_kernel_basis(&gamma).is_empty() {
            DbClass::Udb
        } else {
            DbClass::Cdb
        })
    } else {
        None
    };
    let (n_circuit, n_forest) = if reversible {
        (mech.r() - (n - l), n - l - s)
    } else {
        (0, 0)
    };
    NetworkSummary {
        n,
        l,
        s,
        deficiency: n - l - s,
        reversible,
        weakly_reversible: weakly_reversible(mech, &fhj),
        mass_conserving: mass_conserving(mech).is_some(),
        db_class,
        n_circuit_conditions: n_circuit,
        n_forest_conditions: n_forest,
    }
}

/// Every edge of the directed FHJ graph lies on a directed cycle. Trivially
/// true for fully reversible mechanisms; decided by strongly connected
/// components otherwise.
fn weakly_reversible(mech: &Mechanism, fhj: &FhjGraph) -> bool {
    if mech.reversible() {
        return true;
    }
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<NodeIndex> = (0..fhj.vertices.len()).map(|_| graph.add_node(())).collect();
    for &(u, v, s) in &fhj.edges {
        graph.add_edge(nodes[u], nodes[v], ());
        if mech.steps()[s].reversible {
            graph.add_edge(nodes[v], nodes[u], ());
        }
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut scc_of = vec![0usize; fhj.vertices.len()];
    for (i, scc) in sccs.iter().enumerate() {
        for &node in scc {
            scc_of[node.index()] = i;
        }
    }
    fhj.edges
        .iter()
        .all(|&(u, v, _)| scc_of[u] == scc_of[v])
}

/// Positive mass vector if one exists. Exact; a `None` is certified
/// internally by the dual infeasibility vector.
pub fn mass_conserving(mech: &Mechanism) -> Option<MassVector> {
    let gamma = mech.gamma_columns();
    match linalg::mass_vector(&gamma, mech.m()) {
        Some(rho) => Some(MassVector { rho }),
        None => {
            debug_assert!(linalg::stiemke_certificate(&gamma, mech.m()).is_some());
            None
        }
    }
}

/// Primitive integer basis of ker(gamma), pivot-ordered. Length R - S.
pub fn integer_kernel_basis(mech: &Mechanism) -> Vec<Vec<i64>> {
    linalg::integer_kernel_basis(&mech.gamma_columns())
}

/// Detailed-balance class with the R - S constraints split into circuit
/// conditions (one per non-forest edge) and spanning-forest conditions.
/// Forest conditions precede circuit conditions in the result.
pub fn classify_db(mech: &Mechanism) -> Result<(DbClass, Vec<DbConstraint>)> {
    if !mech.reversible() {
        return Err(Error::Analysis(
            "detailed-balance classification requires every step reversible".into(),
        ));
    }
    let fhj = build_fhj(mech);
    let gamma = mech.gamma_columns();
    let n = fhj.vertices.len();

    // breadth-first spanning forest, rooted at the lowest-index vertex of
    // each component; adjacency explored in step order
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (other vertex, step)
    for &(u, v, s) in &fhj.edges {
        adjacency[u].push((v, s));
        adjacency[v].push((u, s));
    }
    // parent_edge[v] = (parent, step, sign): sign +1 when walking v -> parent
    // follows the step's reactant -> product direction
    let mut parent_edge: Vec<Option<(usize, usize, i64)>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut in_tree = vec![false; mech.r()];
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, s) in &adjacency[u] {
                if !visited[v] {
                    visited[v] = true;
                    in_tree[s] = true;
                    let (ru, _rv, _) = fhj.edges[s];
                    // v -> u forward means v is the step's reactant
                    let sign = if ru == v { 1 } else { -1 };
                    parent_edge[v] = Some((u, s, sign));
                    queue.push_back(v);
                }
            }
        }
    }

    let mut constraints = Vec::new();

    // forest conditions: kernel of the tree-edge columns, embedded back
    let tree_steps: Vec<usize> = (0..mech.r()).filter(|&s| in_tree[s]).collect();
    let tree_columns: Vec<Vec<i64>> = tree_steps.iter().map(|&s| gamma[s].clone()).collect();
    for vector in linalg::integer_kernel_basis(&tree_columns) {
        let mut a = vec![0i64; mech.r()];
        for (i, &s) in tree_steps.iter().enumerate() {
            a[s] = vector[i];
        }
        constraints.push(DbConstraint {
            kind: ConstraintKind::Forest,
            exponents: a,
        });
    }

    // circuit conditions: one per non-tree edge, +1 on the edge itself plus
    // the signed tree path closing the cycle
    for &(u, v, s) in &fhj.edges {
        if in_tree[s] {
            continue;
        }
        let mut a = vec![0i64; mech.r()];
        a[s] += 1;
        let chain = |mut x: usize| {
            let mut path = Vec::new();
            while let Some((p, step, sign)) = parent_edge[x] {
                path.push((step, sign));
                x = p;
            }
            path
        };
        let (mut up_v, mut up_u) = (chain(v), chain(u));
        while let (Some(a_), Some(b_)) = (up_v.last(), up_u.last()) {
            if a_ == b_ {
                up_v.pop();
                up_u.pop();
            } else {
                break;
            }
        }
        for (step, sign) in up_v {
            a[step] += sign;
        }
        for (step, sign) in up_u {
            a[step] -= sign;
        }
        if let Some(first) = a.iter().find(|&&x| x != 0) {
            if *first < 0 {
                for x in &mut a {
                    *x = -*x;
                }
            }
        }
        constraints.push(DbConstraint {
            kind: ConstraintKind::Circuit,
            exponents: a,
        });
    }

    for c in &constraints {
        debug_assert!(in_kernel(&gamma, &c.exponents), "constraint not in ker gamma");
    }
    let class = if constraints.is_empty() {
        DbClass::Udb
    } else {
        DbClass::Cdb
    };
    // forest first, as derived; reorder so the list is forest then circuit
    constraints.sort_by_key(|c| c.kind == ConstraintKind::Circuit);
    debug_assert_eq!(
        constraints.len(),
        mech.r() - linalg::rank_of_columns(&gamma)
    );
    Ok((class, constraints))
}

fn in_kernel(gamma: &[Vec<i64>], a: &[i64]) -> bool {
    let species = gamma.first().map_or(0, Vec::len);
    (0..species).all(|s| {
        gamma
            .iter()
            .zip(a)
            .map(|(col, &coeff)| col[s] * coeff)
            .sum::<i64>()
            == 0
    })
}

/// True iff weakly reversible with zero deficiency: complex balanced for
/// every choice of rate coefficients.
pub fn is_complex_balanced_structural(mech: &Mechanism) -> bool {
    let summary = summarize(mech);
    summary.weakly_reversible && summary.deficiency == 0
}

/// Classification tallies over every mechanism with M species and R steps.
/// UDB and CDB are counted within the mass-conserving ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Census {
    pub total: u64,
    pub mass_conserving: u64,
    pub udb: u64,
    pub cdb: u64,
}

impl Census {
    fn merge(self, other: Census) -> Census {
        Census {
            total: self.total + other.total,
            mass_conserving: self.mass_conserving + other.mass_conserving,
            udb: self.udb + other.udb,
            cdb: self.cdb + other.cdb,
        }
    }

    fn tally(&mut self, mech: &Mechanism) {
        self.total += 1;
        let gamma = mech.gamma_columns();
        if linalg::mass_vector(&gamma, mech.m()).is_some() {
            self.mass_conserving += 1;
            if linalg::integer_kernel_basis(&gamma).is_empty() {
                self.udb += 1;
            } else {
                self.cdb += 1;
            }
        }
    }
}

/// Runs the unfiltered enumeration and classifies every mechanism,
/// partitioning the subset range over `workers` threads.
pub fn census(m: usize, r: usize, workers: usize) -> Result<Census> {
    use crate::enumeration::{self, EnumerationFilter};
    let total: u128 = enumeration::count_mechanisms(m as u64, r as u64, false)
        .try_into()
        .map_err(|_| Error::Analysis("census size exceeds u128".into()))?;
    let workers = workers.clamp(1, 64).min(total.max(1) as usize);
    if workers == 1 {
        let mut census = Census::default();
        for mech in enumeration::enumerate_mechanisms(m, r, EnumerationFilter::default())? {
            census.tally(&mech);
        }
        return Ok(census);
    }
    let chunk = total / workers as u128;
    let remainder = total % workers as u128;
    let mut parts = Vec::new();
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        let mut start = 0u128;
        for w in 0..workers as u128 {
            let count = chunk + u128::from(w < remainder);
            handles.push(scope.spawn(move || -> Result<Census> {
                let mut census = Census::default();
                for mech in enumeration::enumerate_mechanisms_range(
                    m,
                    r,
                    EnumerationFilter::default(),
                    start,
                    count,
                )? {
                    census.tally(&mech);
                }
                Ok(census)
            }));
            start += count;
        }
        for handle in handles {
            parts.push(handle.join().expect("census worker panicked")?);
        }
        Ok(())
    })?;
    Ok(parts.into_iter().fold(Census::default(), Census::merge))
}
