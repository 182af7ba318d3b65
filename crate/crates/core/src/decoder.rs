//! Central decoder.
//!
//! Links are error-free, so `Y` is a deterministic OR of the codewords that
//! were used and the likelihood of a hypothesis is 1 for an exact cover of `Y`
//! and 0 otherwise. Maximum-likelihood decoding is therefore an exact-cover
//! search: pick at most one codeword per sub-bin, within the sparsity model,
//! whose OR equals `Y`. Among exact covers the decoder prefers the smallest
//! cardinality, then the lexicographically smallest sorted `(m, i, j)` list,
//! and reports whether that choice was forced.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::codec::{is_subset, or_into, words_for, Codebook, Codeword, QuantizerSpec};
use crate::error::{param, Error, Result};
use crate::model::SparsityModel;

/// `Y = Z_1 ∨ ... ∨ Z_p`; an empty list fuses to the all-zero word of length `b`.
pub fn fuse_outputs(b: usize, outputs: &[Codeword]) -> Result<Codeword> {
    let mut y = Codeword::zeros(b);
    for z in outputs {
        y.or_assign(z)?;
    }
    Ok(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStatus {
    Unique,
    Ambiguous,
    Infeasible,
}

impl DecodeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecodeStatus::Unique => "unique",
            DecodeStatus::Ambiguous => "ambiguous",
            DecodeStatus::Infeasible => "infeasible",
        }
    }
}

impl fmt::Display for DecodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A decoded support with one level index `j ∈ 1..=l` per support pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SupportHypothesis {
    levels: BTreeMap<(usize, usize), usize>,
}

impl SupportHypothesis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples<I: IntoIterator<Item = (usize, usize, usize)>>(triples: I) -> Self {
        Self { levels: triples.into_iter().map(|(m, i, j)| ((m, i), j)).collect() }
    }

    pub fn insert(&mut self, m: usize, i: usize, j: usize) -> Option<usize> {
        self.levels.insert((m, i), j)
    }

    pub fn level(&self, m: usize, i: usize) -> Option<usize> {
        self.levels.get(&(m, i)).copied()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.levels.keys()
    }

    /// Sorted `(m, i, j)` triples.
    pub fn triples(&self) -> Vec<(usize, usize, usize)> {
        self.levels.iter().map(|(&(m, i), &j)| (m, i, j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub hypothesis: SupportHypothesis,
    pub status: DecodeStatus,
    /// Number of minimal-cardinality exact covers found.
    pub covers: usize,
}

/// Level indices per sub-bin whose codeword fits inside `Y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateTable {
    n: usize,
    t: usize,
    entries: Vec<Vec<usize>>,
}

impl CandidateTable {
    /// Every level of every sub-bin, i.e. no pruning at all.
    pub fn unpruned(n: usize, t: usize, l: usize) -> Self {
        Self { n, t, entries: vec![(1..=l).collect(); n * t] }
    }

    pub fn get(&self, m: usize, i: usize) -> &[usize] {
        &self.entries[m * self.t + i]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Total number of surviving codewords.
    pub fn total(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, m: usize, i: usize, j: usize) -> bool {
        self.get(m, i).contains(&j)
    }

    /// Drops every candidate of encoder `m`, forcing its row to zero.
    pub fn exclude_encoder(&mut self, m: usize) {
        for i in 0..self.t {
            self.entries[m * self.t + i].clear();
        }
    }
}

struct Layout {
    n: usize,
    t: usize,
    l: usize,
    b: usize,
}

fn check_inputs(y: &Codeword, codebooks: &[Codebook]) -> Result<Layout> {
    let first = codebooks.first().ok_or_else(|| Error::Param("no codebooks supplied".into()))?;
    let (t, l, b) = (first.t(), first.l(), first.b());
    for (m, cb) in codebooks.iter().enumerate() {
        if cb.encoder() != m {
            return param(format!("codebook at position {m} belongs to encoder {}", cb.encoder()));
        }
        if (cb.t(), cb.l(), cb.b()) != (t, l, b) {
            return param(format!("codebook {m} has inconsistent dimensions"));
        }
    }
    if y.len() != b {
        return param(format!("Y has {} bits but codewords have {b}", y.len()));
    }
    Ok(Layout { n: codebooks.len(), t, l, b })
}

/// Keeps, per sub-bin, exactly the levels `j` with `c_{m,i,j} ∧ ¬Y = 0`.
pub fn prune_candidates(y: &Codeword, codebooks: &[Codebook]) -> Result<CandidateTable> {
    let lay = check_inputs(y, codebooks)?;
    let yw = y.words();
    let mut entries = Vec::with_capacity(lay.n * lay.t);
    for cb in codebooks {
        for i in 0..lay.t {
            entries.push(cb.sub_bin(i).filter(|(_, w)| is_subset(w, yw)).map(|(j, _)| j).collect());
        }
    }
    Ok(CandidateTable { n: lay.n, t: lay.t, entries })
}

/// Maximum-likelihood decoding over error-free OR links.
pub fn ml_decode(
    y: &Codeword,
    codebooks: &[Codebook],
    model: &SparsityModel,
    q: &QuantizerSpec,
) -> Result<DecodeOutcome> {
    let table = prune_candidates(y, codebooks)?;
    ml_decode_with_table(y, codebooks, model, q, &table)
}

/// [`ml_decode`] restricted to the candidates in `table`. Any table that
/// contains every codeword fitting inside `Y` (including
/// [`CandidateTable::unpruned`]) yields the same result.
pub fn ml_decode_with_table(
    y: &Codeword,
    codebooks: &[Codebook],
    model: &SparsityModel,
    q: &QuantizerSpec,
    table: &CandidateTable,
) -> Result<DecodeOutcome> {
    let lay = check_inputs(y, codebooks)?;
    if q.l() != lay.l {
        return param(format!("quantizer has {} levels, codebooks have {}", q.l(), lay.l));
    }
    if table.n != lay.n || table.t != lay.t {
        return param("candidate table does not match codebook dimensions");
    }
    model.validate(lay.n, lay.t)?;

    let yw = y.words();
    let mut bins = Vec::new();
    for (m, cb) in codebooks.iter().enumerate() {
        for i in 0..lay.t {
            let cands: Vec<(usize, &[u64])> =
                table.get(m, i).iter().map(|&j| (j, cb.words(i, j))).filter(|(_, w)| is_subset(w, yw)).collect();
            if !cands.is_empty() {
                bins.push(Bin { m, i, cands });
            }
        }
    }
    // Fewest candidates first; ties keep (m, i) order.
    bins.sort_by_key(|bin| bin.cands.len());

    let stride = words_for(lay.b);
    let mut suffix = vec![vec![0u64; stride]; bins.len() + 1];
    let mut max_pop = vec![0u32; bins.len() + 1];
    for p in (0..bins.len()).rev() {
        let mut acc = suffix[p + 1].clone();
        let mut best = max_pop[p + 1];
        for (_, w) in &bins[p].cands {
            or_into(&mut acc, w);
            best = best.max(w.iter().map(|x| x.count_ones()).sum());
        }
        suffix[p] = acc;
        max_pop[p] = best;
    }

    let (row_cap, col_cap) = model.limits();
    let mut search = Search {
        bins: &bins,
        suffix: &suffix,
        max_pop: &max_pop,
        row_cap,
        col_cap,
        rows: vec![0; lay.n],
        cols: vec![0; lay.t],
        chosen: Vec::new(),
        found: Vec::new(),
        limit: 0,
    };
    for limit in 0..=model.k() {
        search.limit = limit;
        search.dfs(0, yw);
        if !search.found.is_empty() {
            break;
        }
    }
    Ok(finish(search.found))
}

fn finish(mut found: Vec<Vec<(usize, usize, usize)>>) -> DecodeOutcome {
    if found.is_empty() {
        return DecodeOutcome { hypothesis: SupportHypothesis::new(), status: DecodeStatus::Infeasible, covers: 0 };
    }
    found.sort();
    found.dedup();
    let status = if found.len() == 1 { DecodeStatus::Unique } else { DecodeStatus::Ambiguous };
    DecodeOutcome { hypothesis: SupportHypothesis::from_triples(found[0].iter().copied()), status, covers: found.len() }
}

struct Bin<'a> {
    m: usize,
    i: usize,
    cands: Vec<(usize, &'a [u64])>,
}

struct Search<'s, 'a> {
    bins: &'s [Bin<'a>],
    suffix: &'s [Vec<u64>],
    max_pop: &'s [u32],
    row_cap: usize,
    col_cap: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    chosen: Vec<(usize, usize, usize)>,
    found: Vec<Vec<(usize, usize, usize)>>,
    limit: usize,
}

impl Search<'_, '_> {
    fn dfs(&mut self, pos: usize, residual: &[u64]) {
        if residual.iter().all(|&w| w == 0) {
            let mut cover = self.chosen.clone();
            cover.sort_unstable();
            self.found.push(cover);
            return;
        }
        let budget = self.limit - self.chosen.len();
        if budget == 0 || pos == self.bins.len() {
            return;
        }
        if !is_subset(residual, &self.suffix[pos]) {
            return;
        }
        let need: u32 = residual.iter().map(|w| w.count_ones()).sum();
        if need > budget as u32 * self.max_pop[pos] {
            return;
        }

        let bin = &self.bins[pos];
        let (m, i) = (bin.m, bin.i);
        if self.rows[m] < self.row_cap && self.cols[i] < self.col_cap {
            for &(j, w) in &bin.cands {
                // A codeword adding nothing cannot be part of a minimal cover.
                if residual.iter().zip(w).all(|(r, c)| r & c == 0) {
                    continue;
                }
                let next: Vec<u64> = residual.iter().zip(w).map(|(r, c)| r & !c).collect();
                self.rows[m] += 1;
                self.cols[i] += 1;
                self.chosen.push((m, i, j));
                self.dfs(pos + 1, &next);
                self.chosen.pop();
                self.rows[m] -= 1;
                self.cols[i] -= 1;
            }
        }
        self.dfs(pos + 1, residual);
    }
}

/// Largest instance the exhaustive decoder accepts.
pub const BRUTE_FORCE_MAX_CELLS: usize = 12;
pub const BRUTE_FORCE_MAX_K: usize = 2;
pub const BRUTE_FORCE_MAX_L: usize = 3;

/// Exhaustive reference decoder: enumerates every admissible support and
/// every level assignment. Same return contract as [`ml_decode`].
pub fn brute_force_decode(
    y: &Codeword,
    codebooks: &[Codebook],
    model: &SparsityModel,
    q: &QuantizerSpec,
) -> Result<DecodeOutcome> {
    let lay = check_inputs(y, codebooks)?;
    if q.l() != lay.l {
        return param(format!("quantizer has {} levels, codebooks have {}", q.l(), lay.l));
    }
    model.validate(lay.n, lay.t)?;
    let cells = lay.n * lay.t;
    if cells > BRUTE_FORCE_MAX_CELLS || model.k() > BRUTE_FORCE_MAX_K || lay.l > BRUTE_FORCE_MAX_L {
        return Err(Error::Guard(format!(
            "n*t={cells}, k={}, l={} (limits {BRUTE_FORCE_MAX_CELLS}, {BRUTE_FORCE_MAX_K}, {BRUTE_FORCE_MAX_L})",
            model.k(),
            lay.l
        )));
    }

    let mut by_size: BTreeMap<usize, Vec<Vec<(usize, usize, usize)>>> = BTreeMap::new();
    let mut support = Vec::new();
    enumerate_supports(cells, model.k(), 0, &mut support, &mut |cells_sel: &[usize]| {
        let pairs: Vec<(usize, usize)> = cells_sel.iter().map(|&c| (c / lay.t, c % lay.t)).collect();
        if !model.admits(lay.n, lay.t, &pairs) {
            return;
        }
        let mut levels = vec![1usize; pairs.len()];
        loop {
            let mut acc = Codeword::zeros(lay.b);
            for (&(m, i), &j) in pairs.iter().zip(&levels) {
                acc.or_assign(&codebooks[m].codeword(i, j)).expect("lengths checked");
            }
            if acc == *y {
                let triples = pairs.iter().zip(&levels).map(|(&(m, i), &j)| (m, i, j)).collect();
                by_size.entry(pairs.len()).or_default().push(triples);
            }
            // odometer over level assignments
            let mut pos = 0;
            while pos < levels.len() && levels[pos] == lay.l {
                levels[pos] = 1;
                pos += 1;
            }
            if pos == levels.len() {
                break;
            }
            levels[pos] += 1;
        }
    });

    Ok(finish(by_size.into_iter().next().map(|(_, covers)| covers).unwrap_or_default()))
}

fn enumerate_supports(
    cells: usize,
    max: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    visit(current);
    if current.len() == max {
        return;
    }
    for c in start..cells {
        current.push(c);
        enumerate_supports(cells, max, c + 1, current, visit);
        current.pop();
    }
}

/// `ŝ_m[i] = q_j` on the support, exactly `0` elsewhere.
pub fn reconstruct(h: &SupportHypothesis, q: &QuantizerSpec, n: usize, t: usize) -> Result<Array2<f64>> {
    let mut est = Array2::zeros((n, t));
    for (m, i, j) in h.triples() {
        if m >= n || i >= t {
            return param(format!("support pair ({m}, {i}) outside {n}x{t}"));
        }
        if j == 0 || j > q.l() {
            return param(format!("level {j} outside 1..={}", q.l()));
        }
        est[(m, i)] = q.level(j);
    }
    Ok(est)
}

/// Decoder output together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub estimate: Array2<f64>,
    pub decode_status: DecodeStatus,
    pub per_encoder_reachable: Vec<bool>,
}

/// Full decode: ML search followed by reconstruction. Infeasible decodes
/// reconstruct as all zeros; ambiguous ones use the canonical pick.
/// Encoders marked unreachable contribute no candidates, so their rows are
/// estimated as zero.
pub fn decode(
    y: &Codeword,
    codebooks: &[Codebook],
    model: &SparsityModel,
    q: &QuantizerSpec,
    per_encoder_reachable: Vec<bool>,
) -> Result<(DecodeOutcome, ReconstructionResult)> {
    if per_encoder_reachable.len() != codebooks.len() {
        return param(format!(
            "reachability given for {} encoders, expected {}",
            per_encoder_reachable.len(),
            codebooks.len()
        ));
    }
    let mut table = prune_candidates(y, codebooks)?;
    for (m, _) in per_encoder_reachable.iter().enumerate().filter(|(_, r)| !**r) {
        table.exclude_encoder(m);
    }
    let outcome = ml_decode_with_table(y, codebooks, model, q, &table)?;
    let t = codebooks[0].t();
    let estimate = reconstruct(&outcome.hypothesis, q, codebooks.len(), t)?;
    let result = ReconstructionResult { estimate, decode_status: outcome.status, per_encoder_reachable };
    Ok((outcome, result))
}
