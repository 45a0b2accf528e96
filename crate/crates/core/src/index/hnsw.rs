//! Hierarchical navigable small-world graph.
//!
//! Levels are drawn as `floor(-ln(U) * ml)` with `ml = 1/ln(M)` from a
//! generator keyed on `(seed, slot)`, so a graph is fully determined by its
//! parameters, seed, and insertion order. Neighbors are chosen with the
//! distance-based diversity heuristic and capped at `M` per upper level and
//! `2M` on level 0. Deletion only tombstones a node; it keeps routing.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distance::sq_euclidean;
use super::{Neighbor, VectorIndex};
use crate::error::{Error, Result};

pub const DEFAULT_M: usize = 16;
pub const DEFAULT_EF_CONSTRUCTION: usize = 200;
pub const DEFAULT_EF_SEARCH: usize = 64;
const MAX_LEVEL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: DEFAULT_M,
            ef_construction: DEFAULT_EF_CONSTRUCTION,
        }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter(format!("M must be >= 2 (got {})", self.m)));
        }
        if self.ef_construction < self.m {
            return Err(Error::InvalidParameter(format!(
                "ef_construction ({}) must be >= M ({})",
                self.ef_construction, self.m
            )));
        }
        Ok(())
    }

    fn cap(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    fn ml(&self) -> f64 {
        1.0 / (self.m as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    id: u32,
    slot: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Visited(Vec<u64>);

impl Visited {
    fn new(n: usize) -> Self {
        Visited(vec![0; n.div_ceil(64)])
    }

    /// Marks `slot`, returning true if it was not yet marked.
    fn insert(&mut self, slot: u32) -> bool {
        let (w, b) = ((slot / 64) as usize, slot % 64);
        let fresh = self.0[w] & (1 << b) == 0;
        self.0[w] |= 1 << b;
        fresh
    }
}

#[derive(Debug, Clone)]
pub struct HnswIndex {
    dim: usize,
    params: HnswParams,
    seed: u64,
    data: Vec<f32>,
    ids: Vec<u32>,
    slot_of: HashMap<u32, u32>,
    /// `links[slot][level]` holds neighbor slots.
    links: Vec<Vec<Vec<u32>>>,
    deleted: Vec<bool>,
    entry: Option<u32>,
    max_level: usize,
    live: usize,
}

impl HnswIndex {
    pub fn new(dim: usize, params: HnswParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(HnswIndex {
            dim,
            params,
            seed,
            data: Vec::new(),
            ids: Vec::new(),
            slot_of: HashMap::new(),
            links: Vec::new(),
            deleted: Vec::new(),
            entry: None,
            max_level: 0,
            live: 0,
        })
    }

    /// Inserts row-major `vectors` sequentially with ids `0..n`.
    pub fn build(dim: usize, vectors: &[f32], params: HnswParams, seed: u64) -> Result<Self> {
        let mut index = HnswIndex::new(dim, params, seed)?;
        if vectors.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: vectors.len() % dim,
            });
        }
        let n = vectors.len() / dim;
        index.data.reserve(vectors.len());
        index.links.reserve(n);
        for (i, row) in vectors.chunks_exact(dim).enumerate() {
            index.insert(i as u32, row)?;
        }
        Ok(index)
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Id of the entry point, if any.
    pub fn entry_id(&self) -> Option<u32> {
        self.entry.map(|s| self.ids[s as usize])
    }

    /// Level assigned to `id`.
    pub fn level_of(&self, id: u32) -> Option<usize> {
        self.slot_of
            .get(&id)
            .map(|&s| self.links[s as usize].len() - 1)
    }

    /// Neighbor ids of `id` at `level`.
    pub fn neighbors(&self, id: u32, level: usize) -> Option<Vec<u32>> {
        let slot = *self.slot_of.get(&id)? as usize;
        self.links[slot]
            .get(level)
            .map(|l| l.iter().map(|&s| self.ids[s as usize]).collect())
    }

    fn vec_at(&self, slot: u32) -> &[f32] {
        let s = slot as usize * self.dim;
        &self.data[s..s + self.dim]
    }

    fn cand(&self, q: &[f32], slot: u32) -> Cand {
        Cand {
            d2: sq_euclidean(q, self.vec_at(slot)),
            id: self.ids[slot as usize],
            slot,
        }
    }

    fn draw_level(&self, slot: usize) -> usize {
        let key = self.seed ^ (slot as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let u = 1.0 - rng.random::<f64>();
        ((-u.ln() * self.params.ml()).floor() as usize).min(MAX_LEVEL)
    }

    fn greedy(&self, q: &[f32], mut ep: Cand, level: usize) -> Cand {
        loop {
            let mut improved = false;
            for &nb in &self.links[ep.slot as usize][level] {
                let c = self.cand(q, nb);
                if c < ep {
                    ep = c;
                    improved = true;
                }
            }
            if !improved {
                return ep;
            }
        }
    }

    /// Beam search on one level; returns up to `ef` candidates ascending.
    fn search_layer(&self, q: &[f32], entry: &[Cand], ef: usize, level: usize) -> Vec<Cand> {
        let mut visited = Visited::new(self.ids.len());
        let mut frontier: BinaryHeap<Reverse<Cand>> = BinaryHeap::new();
        let mut best: BinaryHeap<Cand> = BinaryHeap::new();
        for &e in entry {
            if visited.insert(e.slot) {
                frontier.push(Reverse(e));
                best.push(e);
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(Reverse(c)) = frontier.pop() {
            if let Some(worst) = best.peek() {
                if best.len() >= ef && c > *worst {
                    break;
                }
            }
            for &nb in &self.links[c.slot as usize][level] {
                if !visited.insert(nb) {
                    continue;
                }
                let cand = self.cand(q, nb);
                if best.len() < ef || cand < *best.peek().expect("non-empty") {
                    frontier.push(Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the
    /// base than to every neighbor already kept. `candidates` ascending.
    fn select_neighbors(&self, candidates: &[Cand], max: usize) -> Vec<Cand> {
        let mut kept: Vec<Cand> = Vec::with_capacity(max);
        for &c in candidates {
            if kept.len() >= max {
                break;
            }
            let vc = self.vec_at(c.slot);
            if kept
                .iter()
                .all(|k| sq_euclidean(vc, self.vec_at(k.slot)) >= c.d2)
            {
                kept.push(c);
            }
        }
        kept
    }

    fn link(&mut self, from: u32, to: u32, level: usize) {
        let cap = self.params.cap(level);
        let list = &mut self.links[from as usize][level];
        if list.contains(&to) {
            return;
        }
        list.push(to);
        if list.len() <= cap {
            return;
        }
        let base = self.vec_at(from).to_vec();
        let mut cands: Vec<Cand> = self.links[from as usize][level]
            .iter()
            .map(|&s| self.cand(&base, s))
            .collect();
        cands.sort_unstable();
        let kept = self.select_neighbors(&cands, cap);
        self.links[from as usize][level] = kept.into_iter().map(|c| c.slot).collect();
    }

    fn search_base(&self, q: &[f32], ef: usize) -> Vec<Cand> {
        let Some(entry) = self.entry else {
            return Vec::new();
        };
        let mut ep = self.cand(q, entry);
        for level in (1..=self.max_level).rev() {
            ep = self.greedy(q, ep, level);
        }
        self.search_layer(q, &[ep], ef, 0)
    }

    /// Serializes adjacency, tombstones and parameters (not the vectors).
    pub fn write_graph<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_u32::<LittleEndian>(self.params.m as u32)?;
        w.write_u32::<LittleEndian>(self.params.ef_construction as u32)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_u32::<LittleEndian>(self.ids.len() as u32)?;
        w.write_u32::<LittleEndian>(self.entry.unwrap_or(u32::MAX))?;
        w.write_u32::<LittleEndian>(self.max_level as u32)?;
        for (slot, levels) in self.links.iter().enumerate() {
            w.write_u32::<LittleEndian>(self.ids[slot])?;
            w.write_u8(self.deleted[slot] as u8)?;
            w.write_u8((levels.len() - 1) as u8)?;
            for list in levels {
                w.write_u32::<LittleEndian>(list.len() as u32)?;
                for &nb in list {
                    w.write_u32::<LittleEndian>(nb)?;
                }
            }
        }
        Ok(())
    }

    /// Restores a graph written by [`HnswIndex::write_graph`]; `vector_of`
    /// supplies the stored vector for each id.
    pub fn read_graph<R: Read>(
        r: &mut R,
        dim: usize,
        mut vector_of: impl FnMut(u32) -> Option<Vec<f32>>,
    ) -> Result<Self> {
        let truncated = |_| Error::Truncated("graph section".into());
        let m = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let ef_construction = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let seed = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let mut index = HnswIndex::new(dim, HnswParams { m, ef_construction }, seed)
            .map_err(|e| Error::Malformed(format!("graph parameters: {e}")))?;
        let n = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let entry = r.read_u32::<LittleEndian>().map_err(truncated)?;
        index.max_level = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        index.entry = (entry != u32::MAX).then_some(entry);
        if index.entry.is_some_and(|e| e as usize >= n) || (n > 0) != index.entry.is_some() {
            return Err(Error::Malformed("graph entry point out of range".into()));
        }
        for slot in 0..n {
            let id = r.read_u32::<LittleEndian>().map_err(truncated)?;
            let deleted = r.read_u8().map_err(truncated)? != 0;
            let top = r.read_u8().map_err(truncated)? as usize;
            if top > MAX_LEVEL {
                return Err(Error::Malformed(format!("node level {top} too large")));
            }
            let mut levels = Vec::with_capacity(top + 1);
            for _ in 0..=top {
                let len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
                if len > 2 * m + 1 {
                    return Err(Error::Malformed("neighbor list exceeds degree cap".into()));
                }
                let mut list = Vec::with_capacity(len);
                for _ in 0..len {
                    let nb = r.read_u32::<LittleEndian>().map_err(truncated)?;
                    if nb as usize >= n {
                        return Err(Error::Malformed("neighbor out of range".into()));
                    }
                    list.push(nb);
                }
                levels.push(list);
            }
            let v = vector_of(id)
                .ok_or_else(|| Error::Malformed(format!("graph references unknown id {id}")))?;
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            if index.slot_of.insert(id, slot as u32).is_some() {
                return Err(Error::Malformed(format!("duplicate id {id} in graph")));
            }
            index.data.extend_from_slice(&v);
            index.ids.push(id);
            index.links.push(levels);
            index.deleted.push(deleted);
            if !deleted {
                index.live += 1;
            }
        }
        if index.links.iter().any(|l| l.iter().any(|list| list.iter().any(|&nb| index.links[nb as usize].len() == 0))) {
            return Err(Error::Malformed("dangling neighbor".into()));
        }
        Ok(index)
    }
}

impl VectorIndex for HnswIndex {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.live
    }

    fn insert(&mut self, id: u32, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if self.slot_of.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        let slot = self.ids.len() as u32;
        let level = self.draw_level(slot as usize);
        self.slot_of.insert(id, slot);
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        self.links.push(vec![Vec::new(); level + 1]);
        self.deleted.push(false);
        self.live += 1;

        let Some(entry) = self.entry else {
            self.entry = Some(slot);
            self.max_level = level;
            return Ok(());
        };

        let q = vector.to_vec();
        let mut ep = self.cand(&q, entry);
        for lc in (level + 1..=self.max_level).rev() {
            ep = self.greedy(&q, ep, lc);
        }
        for lc in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&q, &[ep], self.params.ef_construction, lc);
            let chosen = self.select_neighbors(&found, self.params.m);
            self.links[slot as usize][lc] = chosen.iter().map(|c| c.slot).collect();
            for c in &chosen {
                self.link(c.slot, slot, lc);
            }
            ep = found[0];
        }
        if level > self.max_level {
            self.entry = Some(slot);
            self.max_level = level;
        }
        Ok(())
    }

    fn mark_deleted(&mut self, id: u32) -> Result<()> {
        let slot = *self.slot_of.get(&id).ok_or(Error::UnknownId(id))? as usize;
        if !std::mem::replace(&mut self.deleted[slot], true) {
            self.live -= 1;
        }
        Ok(())
    }

    fn search(&self, query: &[f32], count: usize, effort: usize) -> Result<Vec<Neighbor>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let want = count.min(self.live);
        if want == 0 {
            return Ok(Vec::new());
        }
        let mut ef = effort.max(count);
        loop {
            let hits: Vec<Neighbor> = self
                .search_base(query, ef)
                .into_iter()
                .filter(|c| !self.deleted[c.slot as usize])
                .take(count)
                .map(|c| Neighbor {
                    id: c.id,
                    distance: c.d2.sqrt(),
                })
                .collect();
            // Tombstones can crowd the beam; widen until enough live hits.
            if hits.len() >= want || ef >= self.ids.len() {
                return Ok(hits);
            }
            ef = (ef * 2).min(self.ids.len());
        }
    }

    fn vector(&self, id: u32) -> Option<&[f32]> {
        self.slot_of.get(&id).map(|&s| self.vec_at(s))
    }

    fn is_deleted(&self, id: u32) -> bool {
        self.slot_of
            .get(&id)
            .map(|&s| self.deleted[s as usize])
            .unwrap_or(false)
    }

    fn memory_bytes(&self) -> usize {
        let links: usize = self
            .links
            .iter()
            .map(|l| l.iter().map(|x| 24 + x.capacity() * 4).sum::<usize>() + 24)
            .sum();
        self.data.len() * 4 + self.ids.len() * (4 + 1 + 16) + links
    }
}
