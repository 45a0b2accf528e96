//! Exhaustive nearest-neighbor search over flat row-major storage. Serves as
//! the exact oracle for recall measurement.

use std::collections::HashMap;

use super::distance::sq_euclidean;
use super::{by_distance_then_id, Neighbor, VectorIndex};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BruteForceIndex {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<u32>,
    slot_of: HashMap<u32, usize>,
    deleted: Vec<bool>,
    live: usize,
}

impl BruteForceIndex {
    pub fn new(dim: usize) -> Self {
        BruteForceIndex {
            dim,
            data: Vec::new(),
            ids: Vec::new(),
            slot_of: HashMap::new(),
            deleted: Vec::new(),
            live: 0,
        }
    }

    /// Builds over row-major `vectors` with ids `0..n`.
    pub fn build(dim: usize, vectors: &[f32]) -> Result<Self> {
        if dim == 0 || vectors.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: vectors.len(),
            });
        }
        let n = vectors.len() / dim;
        let mut index = BruteForceIndex::new(dim);
        index.data = vectors.to_vec();
        index.ids = (0..n as u32).collect();
        index.slot_of = (0..n).map(|i| (i as u32, i)).collect();
        index.deleted = vec![false; n];
        index.live = n;
        Ok(index)
    }

    /// Exact top-`count` by Euclidean distance, ties by ascending id.
    pub fn bf_search(&self, query: &[f32], count: usize) -> Result<Vec<Neighbor>> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let mut scored: Vec<(f64, u32)> = self
            .data
            .chunks_exact(self.dim)
            .zip(&self.ids)
            .zip(&self.deleted)
            .filter(|(_, &dead)| !dead)
            .map(|((row, &id), _)| (sq_euclidean(query, row), id))
            .collect();
        let count = count.min(scored.len());
        if count == 0 {
            return Ok(Vec::new());
        }
        if count < scored.len() {
            scored.select_nth_unstable_by(count - 1, by_distance_then_id);
            scored.truncate(count);
        }
        scored.sort_unstable_by(by_distance_then_id);
        Ok(scored
            .into_iter()
            .map(|(d2, id)| Neighbor {
                id,
                distance: d2.sqrt(),
            })
            .collect())
    }
}

impl VectorIndex for BruteForceIndex {
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
        self.slot_of.insert(id, self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        self.deleted.push(false);
        self.live += 1;
        Ok(())
    }

    fn mark_deleted(&mut self, id: u32) -> Result<()> {
        let slot = *self.slot_of.get(&id).ok_or(Error::UnknownId(id))?;
        if !std::mem::replace(&mut self.deleted[slot], true) {
            self.live -= 1;
        }
        Ok(())
    }

    fn search(&self, query: &[f32], count: usize, _effort: usize) -> Result<Vec<Neighbor>> {
        self.bf_search(query, count)
    }

    fn vector(&self, id: u32) -> Option<&[f32]> {
        let slot = *self.slot_of.get(&id)?;
        Some(&self.data[slot * self.dim..(slot + 1) * self.dim])
    }

    fn is_deleted(&self, id: u32) -> bool {
        self.slot_of
            .get(&id)
            .map(|&s| self.deleted[s])
            .unwrap_or(false)
    }

    fn memory_bytes(&self) -> usize {
        self.data.len() * 4 + self.ids.len() * (4 + 1 + 16)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_example() {
        let idx = BruteForceIndex::build(1, &[0.0, 1.0, 2.0]).unwrap();
        let hits = idx.bf_search(&[0.0], 2).unwrap();
        assert_eq!(
            hits,
            vec![
                Neighbor { id: 0, distance: 0.0 },
                Neighbor { id: 1, distance: 1.0 }
            ]
        );
        assert_eq!(idx.bf_search(&[0.0], 10).unwrap().len(), 3);
        assert!(idx.bf_search(&[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let idx = BruteForceIndex::build(1, &[1.0, -1.0, 1.0, -1.0]).unwrap();
        let ids: Vec<u32> = idx.bf_search(&[0.0], 4).unwrap().iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn matches_naive_rescan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dim = 16;
        let data: Vec<f32> = (0..500 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let idx = BruteForceIndex::build(dim, &data).unwrap();
        for _ in 0..10 {
            let q: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got: Vec<u32> = idx.bf_search(&q, 25).unwrap().iter().map(|n| n.id).collect();
            // Independent re-scan: full sort of (distance, id) computed in f64.
            let mut all: Vec<(f64, u32)> = data
                .chunks(dim)
                .enumerate()
                .map(|(i, row)| {
                    let d: f64 = row
                        .iter()
                        .zip(&q)
                        .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                        .sum();
                    (d, i as u32)
                })
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let want: Vec<u32> = all.iter().take(25).map(|x| x.1).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn insert_delete() {
        let mut idx = BruteForceIndex::build(2, &[0.0, 0.0, 5.0, 5.0]).unwrap();
        idx.insert(7, &[1.0, 1.0]).unwrap();
        assert!(matches!(idx.insert(7, &[1.0, 1.0]), Err(Error::DuplicateId(7))));
        assert_eq!(idx.bf_search(&[1.0, 1.0], 1).unwrap()[0].id, 7);
        idx.mark_deleted(7).unwrap();
        assert_eq!(idx.bf_search(&[1.0, 1.0], 1).unwrap()[0].id, 0);
        assert_eq!(idx.len(), 2);
        assert!(matches!(idx.mark_deleted(42), Err(Error::UnknownId(42))));
    }
}
