//! Limits of finite diagrams of sets and of finite meet-semilattices.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitError {
    #[error("arrow {arrow} is ill-typed: {reason}")]
    IllTypedArrow { arrow: usize, reason: String },
    #[error("lattice object {object} is malformed: {reason}")]
    BadLattice { object: usize, reason: String },
    #[error("arrow {arrow} does not preserve meets")]
    NotMeetPreserving { arrow: usize },
}

/// A total map between two finite sets of a diagram.
#[derive(Clone, Debug)]
pub struct SetArrow {
    pub src: usize,
    pub dst: usize,
    /// map[x] = image of element x of the source set
    pub map: Vec<usize>,
}

/// A finite diagram of finite sets; objects are given by their sizes.
#[derive(Clone, Debug, Default)]
pub struct DiagramSet {
    pub sizes: Vec<usize>,
    pub arrows: Vec<SetArrow>,
}

impl DiagramSet {
    pub fn validate(&self) -> Result<(), LimitError> {
        for (k, a) in self.arrows.iter().enumerate() {
            if a.src >= self.sizes.len() || a.dst >= self.sizes.len() {
                return Err(LimitError::IllTypedArrow { arrow: k, reason: "object index".into() });
            }
            if a.map.len() != self.sizes[a.src] {
                return Err(LimitError::IllTypedArrow { arrow: k, reason: "not total".into() });
            }
            if a.map.iter().any(|&v| v >= self.sizes[a.dst]) {
                return Err(LimitError::IllTypedArrow { arrow: k, reason: "value range".into() });
            }
        }
        Ok(())
    }
}

/// All tuples (x_a) with map(x_src) = x_dst for every arrow, in lexicographic
/// order of the tuple indexed by the original object order.
///
/// Backtracking assigns the most-constrained objects first and propagates
/// forced values along arrows, which keeps adversarial instances fast.
pub fn limit_set(d: &DiagramSet) -> Result<Vec<Vec<usize>>, LimitError> {
    d.validate()?;
    let n = d.sizes.len();
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    let mut degree = vec![0usize; n];
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, a) in d.arrows.iter().enumerate() {
        degree[a.src] += 1;
        degree[a.dst] += 1;
        touching[a.src].push(k);
        if a.dst != a.src {
            touching[a.dst].push(k);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(degree[i]), i));

    let full_domains: Vec<Vec<bool>> = d.sizes.iter().map(|&s| vec![true; s]).collect();
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut out = Vec::new();
    search(d, &touching, &order, 0, &full_domains, &mut assignment, &mut out);
    out.sort();
    Ok(out)
}

fn search(
    d: &DiagramSet,
    touching: &[Vec<usize>],
    order: &[usize],
    depth: usize,
    domains: &[Vec<bool>],
    assignment: &mut Vec<Option<usize>>,
    out: &mut Vec<Vec<usize>>,
) {
    if depth == order.len() {
        out.push(assignment.iter().map(|x| x.unwrap()).collect());
        return;
    }
    let var = order[depth];
    for x in 0..d.sizes[var] {
        if !domains[var][x] {
            continue;
        }
        assignment[var] = Some(x);
        let mut next = domains.to_vec();
        next[var] = vec![false; d.sizes[var]];
        next[var][x] = true;
        let mut ok = true;
        for &k in &touching[var] {
            let a = &d.arrows[k];
            match (assignment[a.src], assignment[a.dst]) {
                (Some(s), Some(t)) => {
                    if a.map[s] != t {
                        ok = false;
                        break;
                    }
                }
                (Some(s), None) => {
                    let forced = a.map[s];
                    for v in 0..d.sizes[a.dst] {
                        if v != forced {
                            next[a.dst][v] = false;
                        }
                    }
                    if !next[a.dst][forced] {
                        ok = false;
                        break;
                    }
                }
                (None, Some(t)) => {
                    for (v, slot) in next[a.src].iter_mut().enumerate() {
                        if a.map[v] != t {
                            *slot = false;
                        }
                    }
                    if next[a.src].iter().all(|b| !b) {
                        ok = false;
                        break;
                    }
                }
                (None, None) => {}
            }
        }
        if ok {
            search(d, touching, order, depth + 1, &next, assignment, out);
        }
        assignment[var] = None;
    }
}

/// A finite lattice given by its meet table; elements are 0..size.
#[derive(Clone, Debug)]
pub struct FinLattice {
    pub meet: Vec<Vec<usize>>,
}

impl FinLattice {
    pub fn size(&self) -> usize {
        self.meet.len()
    }

    pub fn meet_of(&self, a: usize, b: usize) -> usize {
        self.meet[a][b]
    }

    /// a ≤ b in the meet order.
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.meet[a][b] == a
    }

    /// The powerset of `n` points as a lattice of bitmasks under intersection.
    pub fn powerset(n: usize) -> FinLattice {
        let size = 1usize << n;
        let meet = (0..size).map(|a| (0..size).map(|b| a & b).collect()).collect();
        FinLattice { meet }
    }

    pub fn validate(&self, object: usize) -> Result<(), LimitError> {
        let n = self.size();
        let bad = |reason: &str| Err(LimitError::BadLattice { object, reason: reason.into() });
        for (i, row) in self.meet.iter().enumerate() {
            if row.len() != n {
                return bad("ragged meet table");
            }
            if row.iter().any(|&v| v >= n) {
                return bad("meet out of range");
            }
            if self.meet[i][i] != i {
                return bad("meet not idempotent");
            }
        }
        for i in 0..n {
            for j in 0..n {
                if self.meet[i][j] != self.meet[j][i] {
                    return bad("meet not commutative");
                }
                for k in 0..n {
                    if self.meet[self.meet[i][j]][k] != self.meet[i][self.meet[j][k]] {
                        return bad("meet not associative");
                    }
                }
            }
        }
        if self.top().is_none() {
            return bad("no top element");
        }
        Ok(())
    }

    /// Greatest element: the unique t with t ∧ x = x for all x.
    pub fn top(&self) -> Option<usize> {
        (0..self.size()).find(|&t| (0..self.size()).all(|x| self.meet[t][x] == x))
    }
}

#[derive(Clone, Debug)]
pub struct LatArrow {
    pub src: usize,
    pub dst: usize,
    pub map: Vec<usize>,
}

/// A finite diagram of finite meet-semilattices.
#[derive(Clone, Debug, Default)]
pub struct DiagramLat {
    pub objects: Vec<FinLattice>,
    pub arrows: Vec<LatArrow>,
}

/// Limit of the diagram, carried by the limit of the underlying sets.
#[derive(Clone, Debug)]
pub struct LimitLattice {
    /// Compatible tuples, lexicographically ordered.
    pub tuples: Vec<Vec<usize>>,
    /// Componentwise meet structure on those tuples.
    pub lattice: FinLattice,
}

/// Computes the limit in meet-semilattices: the compatible tuples with
/// componentwise meets.  Fails if an arrow does not preserve all meets
/// (binary meets plus the empty meet, i.e. the top element).
pub fn limit_meet_semilattice(d: &DiagramLat) -> Result<LimitLattice, LimitError> {
    for (i, obj) in d.objects.iter().enumerate() {
        obj.validate(i)?;
    }
    for (k, a) in d.arrows.iter().enumerate() {
        if a.src >= d.objects.len() || a.dst >= d.objects.len() {
            return Err(LimitError::IllTypedArrow { arrow: k, reason: "object index".into() });
        }
        let (ls, ld) = (&d.objects[a.src], &d.objects[a.dst]);
        if a.map.len() != ls.size() || a.map.iter().any(|&v| v >= ld.size()) {
            return Err(LimitError::IllTypedArrow { arrow: k, reason: "map shape".into() });
        }
        for x in 0..ls.size() {
            for y in 0..ls.size() {
                if a.map[ls.meet_of(x, y)] != ld.meet_of(a.map[x], a.map[y]) {
                    return Err(LimitError::NotMeetPreserving { arrow: k });
                }
            }
        }
        if a.map[ls.top().unwrap()] != ld.top().unwrap() {
            return Err(LimitError::NotMeetPreserving { arrow: k });
        }
    }

    let set_diagram = DiagramSet {
        sizes: d.objects.iter().map(|l| l.size()).collect(),
        arrows: d
            .arrows
            .iter()
            .map(|a| SetArrow { src: a.src, dst: a.dst, map: a.map.clone() })
            .collect(),
    };
    let tuples = limit_set(&set_diagram)?;
    let index: HashMap<&Vec<usize>, usize> =
        tuples.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut meet = vec![vec![0usize; tuples.len()]; tuples.len()];
    for (i, a) in tuples.iter().enumerate() {
        for (j, b) in tuples.iter().enumerate() {
            let m: Vec<usize> =
                (0..a.len()).map(|c| d.objects[c].meet_of(a[c], b[c])).collect();
            let idx = index
                .get(&m)
                .expect("componentwise meet of compatible tuples must be compatible");
            meet[i][j] = *idx;
        }
    }
    Ok(LimitLattice { tuples, lattice: FinLattice { meet } })
}
