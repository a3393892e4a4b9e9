//! Built-in test matrices, parametric families, and a seeded random
//! generator of sparse completely positive matrices.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cprank::CpInstance;
use crate::graph::{self, Graph};
use crate::nnrank::{self, NnInstance};
use crate::{Error, Result};

/// A named instance is either symmetric (cp-rank side) or rectangular
/// (nonnegative-rank side).
#[derive(Clone, Debug)]
pub enum Instance {
    Cp(CpInstance),
    Nn(NnInstance),
}

impl Instance {
    pub fn as_cp(&self) -> Option<&CpInstance> {
        match self {
            Instance::Cp(i) => Some(i),
            Instance::Nn(_) => None,
        }
    }

    pub fn as_nn(&self) -> Option<&NnInstance> {
        match self {
            Instance::Nn(i) => Some(i),
            Instance::Cp(_) => None,
        }
    }
}

const EX1: [[i64; 5]; 5] = [
    [3, 2, 0, 0, 1],
    [2, 5, 6, 0, 0],
    [0, 6, 14, 4, 0],
    [0, 0, 4, 9, 1],
    [1, 0, 0, 1, 2],
];

const EX2: [[i64; 5]; 5] = [
    [2, 0, 0, 1, 1],
    [0, 2, 0, 1, 1],
    [0, 0, 2, 1, 1],
    [1, 1, 1, 3, 0],
    [1, 1, 1, 0, 3],
];

const EX3: [[i64; 11]; 11] = [
    [781, 0, 72, 36, 228, 320, 240, 228, 36, 96, 0],
    [0, 845, 0, 96, 36, 228, 320, 320, 228, 36, 96],
    [72, 0, 827, 0, 72, 36, 198, 320, 320, 198, 36],
    [36, 96, 0, 845, 0, 96, 36, 228, 320, 320, 228],
    [228, 36, 72, 0, 781, 0, 96, 36, 228, 240, 320],
    [320, 228, 36, 96, 0, 845, 0, 96, 36, 228, 320],
    [240, 320, 198, 36, 96, 0, 745, 0, 96, 36, 228],
    [228, 320, 320, 228, 36, 96, 0, 845, 0, 96, 36],
    [36, 228, 320, 320, 228, 36, 96, 0, 845, 0, 96],
    [96, 36, 198, 320, 240, 228, 36, 96, 0, 745, 0],
    [0, 96, 36, 228, 320, 320, 228, 36, 96, 0, 845],
];

const EX4: [[i64; 12]; 12] = [
    [91, 0, 0, 0, 19, 24, 24, 24, 19, 24, 24, 24],
    [0, 42, 0, 0, 24, 6, 6, 6, 24, 6, 6, 6],
    [0, 0, 42, 0, 24, 6, 6, 6, 24, 6, 6, 6],
    [0, 0, 0, 42, 24, 6, 6, 6, 24, 6, 6, 6],
    [19, 24, 24, 24, 91, 0, 0, 0, 19, 24, 24, 24],
    [24, 6, 6, 6, 0, 42, 0, 0, 24, 6, 6, 6],
    [24, 6, 6, 6, 0, 0, 42, 0, 24, 6, 6, 6],
    [24, 6, 6, 6, 0, 0, 0, 42, 24, 6, 6, 6],
    [19, 24, 24, 24, 19, 24, 24, 24, 91, 0, 0, 0],
    [24, 6, 6, 6, 24, 6, 6, 6, 0, 42, 0, 0],
    [24, 6, 6, 6, 24, 6, 6, 6, 0, 0, 42, 0],
    [24, 6, 6, 6, 24, 6, 6, 6, 0, 0, 0, 42],
];

const EX5: [[i64; 5]; 5] = [
    [1, 1, 0, 0, 1],
    [1, 2, 1, 0, 0],
    [0, 1, 2, 1, 0],
    [0, 0, 1, 2, 1],
    [1, 0, 0, 1, 3],
];

const EX6: [[i64; 5]; 5] = [
    [1, 1, 0, 0, 1],
    [1, 2, 1, 0, 0],
    [0, 1, 2, 1, 0],
    [0, 0, 1, 2, 1],
    [1, 0, 0, 1, 6],
];

const EX7: [[i64; 6]; 6] = [
    [7, 1, 2, 2, 1, 1],
    [1, 12, 1, 3, 3, 5],
    [2, 1, 2, 3, 0, 0],
    [2, 3, 3, 5, 0, 0],
    [1, 3, 0, 0, 2, 4],
    [1, 5, 0, 0, 4, 10],
];

/// 5×5 matrix (entries rounded to three decimals) on which the weak
/// ideal-sparse level-2 bound drops strictly below the dense one.
const EQ_A: [[f64; 5]; 5] = [
    [1.0, 0.578, 0.0, 0.0, 0.225],
    [0.578, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.656],
    [0.0, 0.0, 0.0, 1.0, 0.526],
    [0.225, 0.0, 0.656, 0.526, 1.0],
];

fn int_matrix<const C: usize>(rows: &[[i64; C]]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), C), |(i, j)| rows[i][j] as f64)
}

/// The separation family `[(m+1)·I_m, J_m; J_m, (m+1)·I_m]` of size `2m`:
/// diagonally dominant (hence cp) with complete bipartite support `K_{m,m}`
/// and cp-rank exactly `m²`.
pub fn sep_cp(m: usize) -> Result<CpInstance> {
    if m < 1 {
        return Err(Error::Parse(format!("sep_cp(m) needs m >= 1, got {m}")));
    }
    let n = 2 * m;
    let a = Array2::from_shape_fn((n, n), |(i, j)| {
        let same_side = (i < m) == (j < m);
        match (same_side, i == j) {
            (true, true) => (m + 1) as f64,
            (true, false) => 0.0,
            (false, _) => 1.0,
        }
    });
    CpInstance::new(a)
}

fn parse_call(name: &str) -> Result<(&str, Vec<f64>)> {
    let name = name.trim();
    let Some(open) = name.find('(') else {
        return Ok((name, Vec::new()));
    };
    let Some(stripped) = name[open..].strip_prefix('(').and_then(|s| s.strip_suffix(')')) else {
        return Err(Error::Parse(format!("malformed instance name `{name}`")));
    };
    let mut params = Vec::new();
    for part in stripped.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad parameter `{part}` in `{name}`")))?;
        params.push(v);
    }
    Ok((&name[..open], params))
}

/// Named instances: `ex1`–`ex7` and `eqA` (fixed matrices), `sep_cp(m)`
/// (cp side), and `S(a,b)`, `edm(n)`, `identity(n)` (nonnegative-rank side).
pub fn builtin(name: &str) -> Result<Instance> {
    let (base, params) = parse_call(name)?;
    let fixed_cp = |rows: Array2<f64>, params: &[f64]| -> Result<Instance> {
        if !params.is_empty() {
            return Err(Error::Parse(format!("`{base}` takes no parameters")));
        }
        Ok(Instance::Cp(CpInstance::new(rows)?))
    };
    match base {
        "ex1" => fixed_cp(int_matrix(&EX1), &params),
        "ex2" => fixed_cp(int_matrix(&EX2), &params),
        "ex3" => fixed_cp(int_matrix(&EX3), &params),
        "ex4" => fixed_cp(int_matrix(&EX4), &params),
        "ex5" => fixed_cp(int_matrix(&EX5), &params),
        "ex6" => fixed_cp(int_matrix(&EX6), &params),
        "ex7" => fixed_cp(int_matrix(&EX7), &params),
        "eqA" => {
            let rows: Vec<f64> = EQ_A.iter().flatten().copied().collect();
            fixed_cp(Array2::from_shape_vec((5, 5), rows).unwrap(), &params)
        }
        "sep_cp" => {
            if params.len() != 1 || params[0].fract() != 0.0 || params[0] < 1.0 {
                return Err(Error::Parse(format!(
                    "sep_cp takes one positive integer parameter, got {params:?}"
                )));
            }
            Ok(Instance::Cp(sep_cp(params[0] as usize)?))
        }
        "S" | "s" | "edm" | "identity" => {
            Ok(Instance::Nn(nnrank::builtin_nn(base, &params)?))
        }
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

/// [`builtin`] restricted to the cp-rank side.
pub fn builtin_cp(name: &str) -> Result<CpInstance> {
    match builtin(name)? {
        Instance::Cp(i) => Ok(i),
        Instance::Nn(_) => Err(Error::Parse(format!(
            "`{name}` is a nonnegative-rank instance, not a cp instance"
        ))),
    }
}

/// [`builtin`] restricted to the nonnegative-rank side.
pub fn builtin_nn(name: &str) -> Result<NnInstance> {
    match builtin(name)? {
        Instance::Nn(i) => Ok(i),
        Instance::Cp(_) => Err(Error::Parse(format!(
            "`{name}` is a cp instance, not a nonnegative-rank instance"
        ))),
    }
}

// ---------------------------------------------------------------------------
// random sparse cp-matrix generator
// ---------------------------------------------------------------------------

/// Configuration of the random generator: a connected support graph on `n`
/// vertices with exactly `m` edges (`n−1 ≤ m ≤ C(n,2)`), and `m_k` rank-one
/// factors per clique of a greedy edge clique cover.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub m_k: usize,
}

impl GeneratorConfig {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        GeneratorConfig { n, m, seed, m_k: 2 }
    }

    /// Proportion of nonzero entries above the main diagonal.
    pub fn nzd(&self) -> f64 {
        self.m as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::BadGeneratorConfig(format!(
                "need n >= 2, got n = {}",
                self.n
            )));
        }
        let max_m = self.n * (self.n - 1) / 2;
        if self.m + 1 < self.n || self.m > max_m {
            return Err(Error::BadGeneratorConfig(format!(
                "need n−1 <= m <= C(n,2) = {max_m}, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        if self.m_k < 1 {
            return Err(Error::BadGeneratorConfig("need m_k >= 1".into()));
        }
        Ok(())
    }
}

/// A generated matrix together with its construction witnesses.
#[derive(Clone, Debug)]
pub struct GeneratedCp {
    pub instance: CpInstance,
    /// number of rank-one factors summed, an upper bound on the cp-rank
    pub factors: usize,
    /// proportion of nonzero entries above the diagonal
    pub nzd: f64,
}

const GENERATOR_ATTEMPTS: usize = 10_000;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, i: usize, j: usize) -> bool {
        let (ri, rj) = (self.find(i), self.find(j));
        self.0[ri] = rj;
        ri != rj
    }
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut uf = UnionFind::new(n);
    let mut components = n;
    for &(i, j) in edges {
        if uf.union(i, j) {
            components -= 1;
        }
    }
    components == 1
}

/// Draws a random completely positive matrix with unit diagonal whose
/// support is a uniformly sampled connected graph with exactly `m` edges.
///
/// The pipeline is fully determined by the seed (ChaCha8 keyed with
/// `seed_from_u64`; rejected draws advance the same stream): sample `m` of
/// the `C(n,2)` vertex pairs, redraw until the graph is connected, cover its
/// edges greedily by maximal cliques, draw `m_k` vectors per cover clique
/// with entries uniform on [0,1) supported on the clique, sum the outer
/// products, and rescale `S ↦ D^{−1/2} S D^{−1/2}` to unit diagonal.  Draws
/// whose support accidentally misses a sampled edge (an exact floating-point
/// zero) are rejected like disconnected ones.
pub fn gen_random_cp(cfg: &GeneratorConfig) -> Result<GeneratedCp> {
    cfg.validate()?;
    let n = cfg.n;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..GENERATOR_ATTEMPTS {
        let chosen: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, pairs.len(), cfg.m)
            .iter()
            .map(|k| pairs[k])
            .collect();
        if !connected(n, &chosen) {
            continue;
        }
        let g = Graph::with_edges(n, chosen.iter().copied());
        let cliques = graph::maximal_cliques(&g);
        let cover = graph::greedy_edge_clique_cover(&g, &cliques);
        let mut s = Array2::<f64>::zeros((n, n));
        let mut factors = 0;
        for clique in cover.iter() {
            for _ in 0..cfg.m_k {
                let mut a = vec![0.0f64; n];
                for &v in clique {
                    a[v] = rng.gen::<f64>();
                }
                for &i in clique {
                    for &j in clique {
                        s[[i, j]] += a[i] * a[j];
                    }
                }
                factors += 1;
            }
        }
        // exact-zero collisions on the diagonal or a sampled edge: reject
        let support_ok = (0..n).all(|i| s[[i, i]] > 0.0)
            && chosen.iter().all(|&(i, j)| s[[i, j]] > 0.0);
        if !support_ok {
            continue;
        }
        let scaled = Array2::from_shape_fn((n, n), |(i, j)| {
            s[[i, j]] / (s[[i, i]] * s[[j, j]]).sqrt()
        });
        let instance = CpInstance::new(scaled)?;
        debug_assert_eq!(instance.graph.edge_count(), cfg.m);
        return Ok(GeneratedCp {
            instance,
            factors,
            nzd: cfg.nzd(),
        });
    }
    Err(Error::DisconnectedSupport(GENERATOR_ATTEMPTS))
}

// ---------------------------------------------------------------------------
// matrix text format
// ---------------------------------------------------------------------------

/// Parses the plain-text matrix format: first the two counts `rows cols`,
/// then `rows · cols` decimal entries in row-major order, all separated by
/// whitespace.
pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what} count")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad {what} count: {e}")))
    };
    let rows = dim("row")?;
    let cols = dim("column")?;
    let mut entries = Vec::with_capacity(rows * cols);
    for tok in tokens.by_ref() {
        let v: f64 = tok
            .parse()
            .map_err(|e| Error::Parse(format!("bad entry `{tok}`: {e}")))?;
        entries.push(v);
    }
    if entries.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            entries.len()
        )));
    }
    Array2::from_shape_vec((rows, cols), entries)
        .map_err(|e| Error::Parse(format!("bad matrix shape: {e}")))
}

/// Renders a matrix in the text format accepted by [`parse_matrix`], with
/// full-precision (round-tripping) entries.
pub fn format_matrix(a: &Array2<f64>) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{}", a[[i, j]])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}
