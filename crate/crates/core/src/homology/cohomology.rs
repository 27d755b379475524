use std::collections::{BTreeSet, HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use super::snf::{smith_normal_form, unit_eliminate};
use crate::error::{Error, Result};
use crate::mesh::{Cochain, SimplicialComplex3};
use crate::sparse::IntMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum BasisSource {
    /// One cocycle per periodic axis, supported on the edges that wrap.
    Seams,
    /// Spanning tree plus exact elimination of the face relations.
    TreeElimination,
}

/// Integral basis of H¹ together with dual 1-cycles.
#[derive(Clone, Debug)]
pub struct CohomologyBasis {
    /// Closed integer 1-cochains.
    pub cocycles: Vec<Cochain<i64>>,
    /// Integer 1-chains (edge coefficients) dual to the cocycles.
    pub dual_cycles: Vec<Cochain<i64>>,
    /// Closed vertex walks realizing `dual_cycles`, when the cycle is a single loop.
    pub loops: Vec<Vec<usize>>,
    /// `pairing[j][k] = ⟨cocycle j, dual cycle k⟩`.
    pub pairing: Vec<Vec<i64>>,
    pub source: BasisSource,
}

impl CohomologyBasis {
    pub fn rank(&self) -> usize {
        self.cocycles.len()
    }
}

/// Generators of H¹ of an abstract 2-complex in local numbering.
pub(crate) struct H1Data {
    pub cocycles: Vec<Vec<i64>>,
    pub chains: Vec<Vec<i64>>,
    pub loops: Vec<Vec<usize>>,
    pub torsion: Vec<BigInt>,
}

struct Forest {
    parent: Vec<Option<(usize, usize)>>,
    depth: Vec<usize>,
    in_tree: Vec<bool>,
}

fn adjacency(nv: usize, edges: &[[usize; 2]]) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); nv];
    for (e, &[a, b]) in edges.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    adj
}

fn spanning_forest(nv: usize, edges: &[[usize; 2]]) -> Forest {
    let adj = adjacency(nv, edges);
    let mut parent = vec![None; nv];
    let mut depth = vec![0; nv];
    let mut seen = vec![false; nv];
    let mut in_tree = vec![false; edges.len()];
    for root in 0..nv {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, e) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, e));
                    depth[v] = depth[u] + 1;
                    in_tree[e] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    Forest { parent, depth, in_tree }
}

fn edge_sign(edges: &[[usize; 2]], e: usize, from: usize) -> i64 {
    if edges[e][0] == from {
        1
    } else {
        -1
    }
}

/// Vertex path from `a` to `b` through the forest (same tree).
fn tree_path(forest: &Forest, mut a: usize, mut b: usize) -> Vec<usize> {
    let mut head = vec![a];
    let mut tail = vec![b];
    while forest.depth[a] > forest.depth[b] {
        a = forest.parent[a].unwrap().0;
        head.push(a);
    }
    while forest.depth[b] > forest.depth[a] {
        b = forest.parent[b].unwrap().0;
        tail.push(b);
    }
    while a != b {
        a = forest.parent[a].unwrap().0;
        b = forest.parent[b].unwrap().0;
        head.push(a);
        tail.push(b);
    }
    tail.pop();
    head.extend(tail.into_iter().rev());
    head
}

fn walk_chain(edges: &[[usize; 2]], walk: &[usize], lookup: &HashMap<(usize, usize), usize>) -> Vec<i64> {
    let mut chain = vec![0i64; edges.len()];
    for w in walk.windows(2) {
        let e = lookup[&(w[0].min(w[1]), w[0].max(w[1]))];
        chain[e] += edge_sign(edges, e, w[0]);
    }
    chain
}

/// Integral H¹ generators of the 2-complex with `nv` vertices, edges given
/// as ordered vertex pairs, and faces given as signed edge rows.
pub(crate) fn integral_h1(nv: usize, edges: &[[usize; 2]], faces: &[Vec<(usize, i64)>]) -> H1Data {
    let forest = spanning_forest(nv, edges);
    let cotree: Vec<usize> = (0..edges.len()).filter(|&e| !forest.in_tree[e]).collect();
    let mut col_of = vec![usize::MAX; edges.len()];
    for (c, &e) in cotree.iter().enumerate() {
        col_of[e] = c;
    }
    // Face relations among the non-tree edges: contracting the forest is a
    // homotopy equivalence, after which every edge is a cycle.
    let rows: Vec<Vec<(usize, i64)>> = faces
        .iter()
        .map(|r| r.iter().filter(|(e, _)| !forest.in_tree[*e]).map(|&(e, v)| (col_of[e], v)).collect())
        .collect();
    let relations = IntMatrix::from_rows(cotree.len(), rows);
    let reduction = unit_eliminate(&relations, true).expect("face relations overflowed i64");

    let pivoted: BTreeSet<usize> = reduction.pivots.iter().map(|p| p.col).collect();
    let survivors: Vec<usize> = (0..cotree.len()).filter(|c| !pivoted.contains(c)).collect();
    let mut surv_index = vec![usize::MAX; cotree.len()];
    for (k, &c) in survivors.iter().enumerate() {
        surv_index[c] = k;
    }

    // What remains is a relation matrix on the survivors; its Smith form
    // separates free generators from torsion.
    let leftover: Vec<Vec<i64>> = reduction
        .leftover
        .iter()
        .map(|r| {
            let mut d = vec![0i64; survivors.len()];
            for &(c, v) in r {
                d[surv_index[c]] = v;
            }
            d
        })
        .collect();
    let ns = survivors.len();
    let (v, vinv, rank, torsion) = if leftover.is_empty() {
        let id: Vec<Vec<BigInt>> =
            (0..ns).map(|i| (0..ns).map(|j| BigInt::from((i == j) as i64)).collect()).collect();
        (id.clone(), id, 0, Vec::new())
    } else {
        let snf = smith_normal_form(&leftover, true);
        let torsion = snf.torsion();
        (snf.right.unwrap(), snf.right_inverse.unwrap(), snf.rank, torsion)
    };
    let free: Vec<usize> = (rank..ns).collect();

    // Express every non-tree edge in the survivor basis by back-substitution.
    let mut expr: Vec<Vec<i64>> = vec![Vec::new(); cotree.len()];
    for &c in &survivors {
        let mut unit = vec![0; ns];
        unit[surv_index[c]] = 1;
        expr[c] = unit;
    }
    for p in reduction.pivots.iter().rev() {
        let mut acc = vec![0i64; ns];
        for &(c, a) in &p.row {
            if c == p.col {
                continue;
            }
            for (x, y) in acc.iter_mut().zip(&expr[c]) {
                *x -= p.value * a * y;
            }
        }
        expr[p.col] = acc;
    }

    let big = |x: &BigInt| x.to_i64().expect("generator coefficient overflow");
    let mut cocycles = Vec::with_capacity(free.len());
    for &g in &free {
        let mut c = vec![0i64; edges.len()];
        for (col, &e) in cotree.iter().enumerate() {
            c[e] = expr[col].iter().enumerate().map(|(s, &x)| x * big(&v[s][g])).sum();
        }
        cocycles.push(c);
    }

    let lookup: HashMap<(usize, usize), usize> =
        edges.iter().enumerate().map(|(e, &[a, b])| ((a.min(b), a.max(b)), e)).collect();
    let cycle_of = |col: usize| -> Vec<usize> {
        let [a, b] = edges[cotree[col]];
        let mut walk = vec![a];
        walk.extend(tree_path(&forest, b, a));
        walk
    };
    let mut chains = Vec::with_capacity(free.len());
    let mut loops = Vec::with_capacity(free.len());
    for &g in &free {
        let weights: Vec<i64> = (0..ns).map(|s| big(&vinv[g][s])).collect();
        let mut chain = vec![0i64; edges.len()];
        for (s, &w) in weights.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let z = walk_chain(edges, &cycle_of(survivors[s]), &lookup);
            for (x, y) in chain.iter_mut().zip(&z) {
                *x += w * y;
            }
        }
        let single: Vec<usize> = weights.iter().enumerate().filter(|(_, &w)| w != 0).map(|(s, _)| s).collect();
        let walk = match single.as_slice() {
            [s] if weights[*s] == 1 => cycle_of(survivors[*s]),
            [s] if weights[*s] == -1 => {
                let mut w = cycle_of(survivors[*s]);
                w.reverse();
                w
            }
            _ => Vec::new(),
        };
        chains.push(chain);
        loops.push(walk);
    }
    H1Data { cocycles, chains, loops, torsion: torsion.into_iter().filter(|t| !t.is_zero()).collect() }
}

fn pairing(cocycles: &[Vec<i64>], chains: &[Vec<i64>]) -> Vec<Vec<i64>> {
    cocycles.iter().map(|c| chains.iter().map(|z| c.iter().zip(z).map(|(a, b)| a * b).sum()).collect()).collect()
}

/// Cocycle counting signed crossings of the periodic seam of `axis`.
fn seam_cocycle(complex: &SimplicialComplex3, axis: usize) -> Vec<i64> {
    let l = complex.periods()[axis].expect("axis is periodic");
    complex
        .edges()
        .iter()
        .map(|&[a, b]| {
            let raw = complex.vertices()[b][axis] - complex.vertices()[a][axis];
            let wrapped = complex.displacement(a, b)[axis];
            ((wrapped - raw) / l).round() as i64
        })
        .collect()
}

/// Shortest closed walk from vertex 0 whose periods under `cocycles` equal
/// the `target` unit vector, with partial periods kept in {-1, 0, 1}.
fn constrained_loop(complex: &SimplicialComplex3, cocycles: &[Vec<i64>], target: usize) -> Option<Vec<usize>> {
    let p = cocycles.len();
    let adj = adjacency(complex.num_vertices(), complex.edges());
    let encode = |v: usize, w: &[i64]| -> usize {
        w.iter().fold(v, |acc, &x| acc * 3 + (x + 1) as usize)
    };
    let start = vec![0i64; p];
    let mut goal = vec![0i64; p];
    goal[target] = 1;
    let goal_key = encode(0, &goal);
    let mut prev: HashMap<usize, (usize, usize, Vec<i64>)> = HashMap::new();
    let mut queue = VecDeque::from([(0usize, start.clone())]);
    prev.insert(encode(0, &start), (usize::MAX, usize::MAX, start));
    while let Some((u, w)) = queue.pop_front() {
        let key = encode(u, &w);
        if key == goal_key {
            let mut walk = vec![u];
            let mut k = key;
            while let Some((pv, pk, _)) = prev.get(&k) {
                if *pv == usize::MAX {
                    break;
                }
                walk.push(*pv);
                k = *pk;
            }
            walk.reverse();
            return Some(walk);
        }
        for &(v, e) in &adj[u] {
            let s = edge_sign(complex.edges(), e, u);
            let nw: Vec<i64> = w.iter().zip(cocycles).map(|(x, c)| x + s * c[e]).collect();
            if nw.iter().any(|x| x.abs() > 1) {
                continue;
            }
            let nk = encode(v, &nw);
            if let std::collections::hash_map::Entry::Vacant(slot) = prev.entry(nk) {
                slot.insert((u, key, nw.clone()));
                queue.push_back((v, nw));
            }
        }
    }
    None
}

fn seam_basis(complex: &SimplicialComplex3) -> Option<CohomologyBasis> {
    let axes: Vec<usize> = (0..3).filter(|&a| complex.periods()[a].is_some()).collect();
    let cocycles: Vec<Vec<i64>> = axes.iter().map(|&a| seam_cocycle(complex, a)).collect();
    if cocycles.iter().any(|c| !complex.d1().apply(c).iter().all(|&x| x == 0)) {
        return None;
    }
    let lookup: HashMap<(usize, usize), usize> =
        complex.edges().iter().enumerate().map(|(e, &[a, b])| ((a, b), e)).collect();
    let mut loops = Vec::new();
    let mut chains = Vec::new();
    for j in 0..cocycles.len() {
        let walk = constrained_loop(complex, &cocycles, j)?;
        chains.push(walk_chain(complex.edges(), &walk, &lookup));
        loops.push(walk);
    }
    let pairing = pairing(&cocycles, &chains);
    Some(CohomologyBasis {
        cocycles: cocycles.into_iter().map(|c| Cochain::new(1, c)).collect(),
        dual_cycles: chains.into_iter().map(|c| Cochain::new(1, c)).collect(),
        loops,
        pairing,
        source: BasisSource::Seams,
    })
}

/// Integral basis of H¹(M; ℤ) with dual cycles, pairing equal to the identity.
///
/// Periodic grids whose seams generate H¹ get seam cocycles with
/// axis-parallel dual loops; everything else gets the tree/elimination basis.
pub fn h1_basis(complex: &SimplicialComplex3) -> Result<CohomologyBasis> {
    let faces: Vec<Vec<(usize, i64)>> = complex.d1().rows().to_vec();
    let data = integral_h1(complex.num_vertices(), complex.edges(), &faces);
    if !data.torsion.is_empty() {
        log::warn!("H1 has torsion {:?}; only the free part gets cocycles", data.torsion);
    }
    if data.cocycles.is_empty() {
        return Err(Error::TrivialH1);
    }
    let periodic_axes = complex.periods().iter().filter(|p| p.is_some()).count();
    if periodic_axes == data.cocycles.len() {
        if let Some(basis) = seam_basis(complex) {
            return Ok(basis);
        }
    }
    let pairing = pairing(&data.cocycles, &data.chains);
    Ok(CohomologyBasis {
        cocycles: data.cocycles.into_iter().map(|c| Cochain::new(1, c)).collect(),
        dual_cycles: data.chains.into_iter().map(|c| Cochain::new(1, c)).collect(),
        loops: data.loops,
        pairing,
        source: BasisSource::TreeElimination,
    })
}
