use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{BaseModel, HermitianOperator, PerturbationBlock, SiteSpace};

/// Default cap on the number of sites a builder may allocate.
pub const DEFAULT_SIZE_CAP: usize = 4096;

fn check_cap(required: usize, cap: usize) -> Result<()> {
    if required > cap {
        return Err(Error::SizeOverflow { required, cap });
    }
    Ok(())
}

/// Path of length `length` in x times `fibers` independent rows; site `x*F + y`.
/// Block `n` projects onto column `x = n`.
pub fn build_strip(length: usize, fibers: usize) -> Result<BaseModel> {
    build_strip_with(length, fibers, false)
}

/// Strip with optional vertical hopping inside each column, which couples the
/// fibers and destroys their degeneracy.
pub fn build_strip_with(length: usize, fibers: usize, vertical: bool) -> Result<BaseModel> {
    if length < 2 || fibers < 1 {
        return Err(Error::pre(format!(
            "strip needs L >= 2 and F >= 1, got L={length}, F={fibers}"
        )));
    }
    let dim = length.checked_mul(fibers).ok_or(Error::SizeOverflow {
        required: usize::MAX,
        cap: DEFAULT_SIZE_CAP,
    })?;
    check_cap(dim, DEFAULT_SIZE_CAP)?;
    let site = |x: usize, y: usize| x * fibers + y;
    let mut edges = Vec::new();
    for x in 0..length {
        for y in 0..fibers {
            if x + 1 < length {
                edges.push((site(x, y), site(x + 1, y), 1.0));
            }
            if vertical && y + 1 < fibers {
                edges.push((site(x, y), site(x, y + 1), 1.0));
            }
        }
    }
    let labels = (0..length)
        .flat_map(|x| (0..fibers).map(move |y| format!("({x},{y})")))
        .collect();
    let blocks = (0..length)
        .map(|n| PerturbationBlock::projection(n, (0..fibers).map(|y| site(n, y)).collect()))
        .collect();
    BaseModel::new(
        SiteSpace::new(labels)?,
        HermitianOperator::from_edges(dim, &edges),
        blocks,
    )
}

/// Dense real symmetric background with entries `U(-1, 1)` drawn from `seed`,
/// one projection block on sites `0..rank` and singleton blocks on the rest.
pub fn build_random_dense(dim: usize, rank: usize, seed: u64) -> Result<BaseModel> {
    if dim == 0 || rank == 0 || rank > dim {
        return Err(Error::pre(format!(
            "random model needs 1 <= rank <= dim, got rank={rank}, dim={dim}"
        )));
    }
    check_cap(dim, DEFAULT_SIZE_CAP)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            edges.push((i, j, rng.random_range(-1.0..1.0)));
        }
    }
    let mut blocks = vec![PerturbationBlock::projection(0, (0..rank).collect())];
    blocks.extend(
        (rank..dim)
            .enumerate()
            .map(|(k, s)| PerturbationBlock::projection(k + 1, vec![s])),
    );
    BaseModel::new(
        SiteSpace::indexed(dim),
        HermitianOperator::from_edges(dim, &edges),
        blocks,
    )
}

/// Nearest-neighbour adjacency on the box `|x|_inf <= R` in dimension 1 or 2,
/// with one block per shell `|x|_inf = n`, `n = 0..=R`.
pub fn build_shell_model(d: usize, radius: usize) -> Result<BaseModel> {
    if !(1..=2).contains(&d) {
        return Err(Error::pre(format!(
            "shell model supports d in {{1,2}}, got {d}"
        )));
    }
    if radius < 1 {
        return Err(Error::pre("shell model needs R >= 1"));
    }
    let side = 2 * radius + 1;
    let dim = side.pow(d as u32);
    check_cap(dim, DEFAULT_SIZE_CAP)?;
    let r = radius as i64;
    let points: Vec<Vec<i64>> = if d == 1 {
        (-r..=r).map(|x| vec![x]).collect()
    } else {
        (-r..=r)
            .flat_map(|x| (-r..=r).map(move |y| vec![x, y]))
            .collect()
    };
    let index = |p: &[i64]| -> usize {
        p.iter()
            .fold(0usize, |acc, &v| acc * side + (v + r) as usize)
    };
    let mut edges = Vec::new();
    for p in &points {
        for axis in 0..d {
            if p[axis] < r {
                let mut q = p.clone();
                q[axis] += 1;
                edges.push((index(p), index(&q), 1.0));
            }
        }
    }
    let shell = |p: &[i64]| {
        p.iter()
            .map(|v| v.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    };
    let blocks = (0..=radius)
        .map(|n| {
            let support = points
                .iter()
                .filter(|p| shell(p) == n)
                .map(|p| index(p))
                .collect();
            PerturbationBlock::projection(n, support)
        })
        .collect();
    let labels = points.iter().map(|p| format!("{p:?}")).collect();
    BaseModel::new(
        SiteSpace::new(labels)?,
        HermitianOperator::from_edges(dim, &edges),
        blocks,
    )
}

/// Row ranges `[lo, hi]` (1-based, inclusive) of the dyadic blocks of column
/// `n` truncated at `rows`: block `m` covers `2^{n(m-1)} ..= 2^{nm} - 1`.
pub fn nested_block_rows(n: usize, rows: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut m = 1u32;
    loop {
        let lo_exp = n as u32 * (m - 1);
        if lo_exp >= usize::BITS - 1 {
            break;
        }
        let lo = 1usize << lo_exp;
        if lo > rows {
            break;
        }
        let hi_exp = n as u32 * m;
        let hi = if hi_exp >= usize::BITS - 1 {
            rows
        } else {
            ((1usize << hi_exp) - 1).min(rows)
        };
        out.push((lo, hi));
        m += 1;
    }
    out
}

/// Truncated nested model: columns `x = 1..=levels`, rows `y = 1..=2^levels - 1`,
/// hopping along rows only, blocks from [`nested_block_rows`].
pub fn build_nested_model(levels: usize) -> Result<BaseModel> {
    build_nested_model_capped(levels, DEFAULT_SIZE_CAP)
}

pub fn build_nested_model_capped(levels: usize, cap: usize) -> Result<BaseModel> {
    if levels == 0 || levels > 6 {
        return Err(Error::pre(format!(
            "nested model needs 1 <= levels <= 6, got {levels}"
        )));
    }
    let rows = (1usize << levels) - 1;
    let dim = levels * rows;
    check_cap(dim, cap)?;
    let site = |x: usize, y: usize| (x - 1) * rows + (y - 1);
    let mut edges = Vec::new();
    for x in 1..levels {
        for y in 1..=rows {
            edges.push((site(x, y), site(x + 1, y), 1.0));
        }
    }
    let mut blocks = Vec::new();
    for x in 1..=levels {
        for (lo, hi) in nested_block_rows(x, rows) {
            let idx = blocks.len();
            blocks.push(PerturbationBlock::projection(
                idx,
                (lo..=hi).map(|y| site(x, y)).collect(),
            ));
        }
    }
    let labels = (1..=levels)
        .flat_map(|x| (1..=rows).map(move |y| format!("({x},{y})")))
        .collect();
    BaseModel::new(
        SiteSpace::new(labels)?,
        HermitianOperator::from_edges(dim, &edges),
        blocks,
    )
}

/// Vertex layout of a truncated rooted Bethe lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanopyLayout {
    pub k: usize,
    pub depth: usize,
    pub block_depth: usize,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub level: Vec<usize>,
    /// Root vertex of each block, in block order.
    pub block_roots: Vec<usize>,
    /// Block index of every vertex.
    pub block_of: Vec<usize>,
}

impl CanopyLayout {
    /// All pairs `(p, q)` of neighbours with `p` in block `n` and `q` outside it,
    /// the parent of the block root included.
    pub fn boundary_pairs(&self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if let Some(&r) = self.block_roots.get(n) {
            if let Some(q) = self.parent[r] {
                out.push((r, q));
            }
        }
        out.extend(self.forward_pairs(n));
        out
    }

    /// Pairs `(p, q)` with `p` in block `n` and `q` a child of `p` outside it.
    pub fn forward_pairs(&self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (p, &b) in self.block_of.iter().enumerate() {
            if b == n {
                for &q in &self.children[p] {
                    if self.block_of[q] != n {
                        out.push((p, q));
                    }
                }
            }
        }
        out
    }
}

/// Adjacency of the depth-`D` truncation of the rooted Bethe lattice in which
/// every vertex has `K` neighbours (root: `K` children, others `K - 1`), with
/// blocks the forward subtrees of `l` levels rooted at depths `0, l, 2l, ...`.
pub fn build_canopy_bethe(
    k: usize,
    depth: usize,
    block_depth: usize,
) -> Result<(BaseModel, CanopyLayout)> {
    if k < 3 {
        return Err(Error::pre(format!("canopy model needs K >= 3, got {k}")));
    }
    if depth < 1 || block_depth < 1 {
        return Err(Error::pre("canopy model needs D >= 1 and l >= 1"));
    }
    if !(depth + 1).is_multiple_of(block_depth) {
        return Err(Error::InvalidTiling(format!(
            "block depth {block_depth} does not partition levels 0..={depth}"
        )));
    }
    let mut count = 1usize;
    let mut width = 1usize;
    for lvl in 1..=depth {
        width = width.saturating_mul(if lvl == 1 { k } else { k - 1 });
        count = count.saturating_add(width);
        check_cap(count, DEFAULT_SIZE_CAP)?;
    }
    let mut parent = vec![None];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut level = vec![0];
    let mut frontier = vec![0usize];
    for lvl in 1..=depth {
        let mut next = Vec::new();
        for &p in &frontier {
            let nc = if lvl == 1 { k } else { k - 1 };
            for _ in 0..nc {
                let v = parent.len();
                parent.push(Some(p));
                children.push(Vec::new());
                level.push(lvl);
                children[p].push(v);
                next.push(v);
            }
        }
        frontier = next;
    }
    let dim = parent.len();
    let mut block_of = vec![usize::MAX; dim];
    let mut block_roots = Vec::new();
    for v in 0..dim {
        if level[v] % block_depth == 0 {
            block_of[v] = block_roots.len();
            block_roots.push(v);
        } else {
            block_of[v] = block_of[parent[v].expect("non-root vertex")];
        }
    }
    let mut supports = vec![Vec::new(); block_roots.len()];
    for v in 0..dim {
        supports[block_of[v]].push(v);
    }
    let edges: Vec<(usize, usize, f64)> = (1..dim).map(|v| (parent[v].unwrap(), v, 1.0)).collect();
    let blocks = supports
        .into_iter()
        .enumerate()
        .map(|(i, s)| PerturbationBlock::projection(i, s))
        .collect();
    let model = BaseModel::new(
        SiteSpace::indexed(dim),
        HermitianOperator::from_edges(dim, &edges),
        blocks,
    )?;
    Ok((
        model,
        CanopyLayout {
            k,
            depth,
            block_depth,
            parent,
            children,
            level,
            block_roots,
            block_of,
        },
    ))
}

/// Rooted tree `T_L`: every internal vertex has `K` children, leaves at
/// distance `L`. Vertices are numbered in depth-first preorder from the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedTreeModel {
    pub k: usize,
    pub depth: usize,
    pub operator: HermitianOperator,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub boundary: Vec<usize>,
}

impl RootedTreeModel {
    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }
}

pub fn build_rooted_tree(k: usize, depth: usize) -> Result<RootedTreeModel> {
    build_rooted_tree_capped(k, depth, DEFAULT_SIZE_CAP)
}

pub fn build_rooted_tree_capped(k: usize, depth: usize, cap: usize) -> Result<RootedTreeModel> {
    if k < 2 {
        return Err(Error::pre(format!("rooted tree needs K >= 2, got {k}")));
    }
    let mut total = 1usize;
    let mut width = 1usize;
    for _ in 0..depth {
        width = width.checked_mul(k).ok_or(Error::SizeOverflow {
            required: usize::MAX,
            cap,
        })?;
        total = total.checked_add(width).ok_or(Error::SizeOverflow {
            required: usize::MAX,
            cap,
        })?;
        check_cap(total, cap)?;
    }
    let mut parent = Vec::with_capacity(total);
    let mut children = Vec::with_capacity(total);
    let mut boundary = Vec::with_capacity(width);
    preorder(k, depth, None, &mut parent, &mut children, &mut boundary);
    let edges: Vec<(usize, usize, f64)> = (1..parent.len())
        .map(|v| (parent[v].unwrap(), v, 1.0))
        .collect();
    Ok(RootedTreeModel {
        k,
        depth,
        operator: HermitianOperator::from_edges(parent.len(), &edges),
        parent,
        children,
        boundary,
    })
}

fn preorder(
    k: usize,
    remaining: usize,
    up: Option<usize>,
    parent: &mut Vec<Option<usize>>,
    children: &mut Vec<Vec<usize>>,
    boundary: &mut Vec<usize>,
) {
    let v = parent.len();
    parent.push(up);
    children.push(Vec::new());
    if let Some(p) = up {
        children[p].push(v);
    }
    if remaining == 0 {
        boundary.push(v);
    } else {
        for _ in 0..k {
            preorder(k, remaining - 1, Some(v), parent, children, boundary);
        }
    }
}
