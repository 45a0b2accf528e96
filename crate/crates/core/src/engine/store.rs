use crate::error::{Error, Result};
use crate::transform::{fit_normalizer, FilterSchema, NormStats, ProbeSet, DEFAULT_EPSILON};

/// Original records (raw `f32` vectors and encoded filters) with their
/// normalization statistics and normalized copies. Record ids are row
/// indices; deletion is a tombstone.
#[derive(Debug, Clone)]
pub struct RecordStore {
    schema: FilterSchema,
    d: usize,
    m: usize,
    stats: NormStats,
    raw_vectors: Vec<f32>,
    raw_filters: Vec<f32>,
    norm_vectors: Vec<f64>,
    norm_filters: Vec<f64>,
    deleted: Vec<bool>,
    live: usize,
}

impl RecordStore {
    /// Fits normalization over the given records.
    pub fn new(schema: FilterSchema, d: usize, vectors: Vec<f32>, filters: Vec<f32>) -> Result<Self> {
        let m = schema.dim();
        check_shape(d, m, &vectors, &filters)?;
        let stats = fit_normalizer(&vectors, d, &filters, m, DEFAULT_EPSILON)?;
        Self::with_stats(schema, d, vectors, filters, stats, Vec::new())
    }

    /// Reassembles a store from saved parts without refitting.
    pub fn with_stats(
        schema: FilterSchema,
        d: usize,
        vectors: Vec<f32>,
        filters: Vec<f32>,
        stats: NormStats,
        tombstones: Vec<u32>,
    ) -> Result<Self> {
        let m = schema.dim();
        check_shape(d, m, &vectors, &filters)?;
        stats.validate()?;
        if stats.vector_dim() != d || stats.filter_dim() != m {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: stats.vector_dim(),
            });
        }
        let n = vectors.len() / d;
        let mut store = RecordStore {
            schema,
            d,
            m,
            stats,
            raw_vectors: Vec::with_capacity(vectors.len()),
            raw_filters: Vec::with_capacity(filters.len()),
            norm_vectors: Vec::with_capacity(vectors.len()),
            norm_filters: Vec::with_capacity(filters.len()),
            deleted: Vec::with_capacity(n),
            live: 0,
        };
        for (v, f) in vectors.chunks_exact(d).zip(filters.chunks_exact(m)) {
            store.push(v, f)?;
        }
        for id in tombstones {
            store.delete(id)?;
        }
        Ok(store)
    }

    pub fn schema(&self) -> &FilterSchema {
        &self.schema
    }

    pub fn stats(&self) -> &NormStats {
        &self.stats
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn filter_dim(&self) -> usize {
        self.m
    }

    /// Total records ever stored, including tombstoned ones.
    pub fn len(&self) -> usize {
        self.deleted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deleted.is_empty()
    }

    pub fn live_len(&self) -> usize {
        self.live
    }

    pub fn is_deleted(&self, id: u32) -> bool {
        self.deleted.get(id as usize).copied().unwrap_or(true)
    }

    pub fn tombstones(&self) -> Vec<u32> {
        (0..self.len() as u32).filter(|&i| self.deleted[i as usize]).collect()
    }

    pub fn live_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len() as u32).filter(|&i| !self.deleted[i as usize])
    }

    pub fn raw_vectors(&self) -> &[f32] {
        &self.raw_vectors
    }

    pub fn raw_filters(&self) -> &[f32] {
        &self.raw_filters
    }

    pub fn raw_vector(&self, id: u32) -> &[f32] {
        let i = id as usize * self.d;
        &self.raw_vectors[i..i + self.d]
    }

    pub fn raw_filter(&self, id: u32) -> &[f32] {
        let i = id as usize * self.m;
        &self.raw_filters[i..i + self.m]
    }

    pub fn norm_vectors(&self) -> &[f64] {
        &self.norm_vectors
    }

    pub fn norm_filters(&self) -> &[f64] {
        &self.norm_filters
    }

    pub fn norm_vector(&self, id: u32) -> &[f64] {
        let i = id as usize * self.d;
        &self.norm_vectors[i..i + self.d]
    }

    pub fn norm_filter(&self, id: u32) -> &[f64] {
        let i = id as usize * self.m;
        &self.norm_filters[i..i + self.m]
    }

    /// Appends a record normalized with the existing statistics.
    pub fn push(&mut self, v: &[f32], f: &[f32]) -> Result<u32> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: v.len(),
            });
        }
        if f.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                actual: f.len(),
            });
        }
        let row = self.len();
        if let Some(pos) = v.iter().chain(f).position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row, dim: pos });
        }
        let id = u32::try_from(row).map_err(|_| Error::InvalidParameter("too many records".into()))?;
        let zv = self.stats.normalize_vector(v)?;
        let zf = self.stats.normalize_filter(f)?;
        self.raw_vectors.extend_from_slice(v);
        self.raw_filters.extend_from_slice(f);
        self.norm_vectors.extend_from_slice(&zv);
        self.norm_filters.extend_from_slice(&zf);
        self.deleted.push(false);
        self.live += 1;
        Ok(id)
    }

    pub fn delete(&mut self, id: u32) -> Result<()> {
        match self.deleted.get_mut(id as usize) {
            Some(flag) => {
                if !*flag {
                    *flag = true;
                    self.live -= 1;
                }
                Ok(())
            }
            None => Err(Error::UnknownId(id)),
        }
    }

    pub fn normalize_query(&self, q: &[f32]) -> Result<Vec<f64>> {
        if let Some(pos) = q.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: 0, dim: pos });
        }
        self.stats.normalize_vector(q)
    }

    /// Normalized probe vectors. Probe values pass through `f32` like
    /// stored filters, so an exact probe equals the record's filter bitwise;
    /// unconstrained slots take the dataset mean (0 after normalization).
    pub fn normalize_probes(&self, probes: &ProbeSet) -> Result<Vec<Vec<f64>>> {
        probes
            .vectors
            .iter()
            .map(|p| {
                let mut z = self.stats.normalize_filter(&p.to_f32())?;
                for &s in &probes.free_slots {
                    z[s] = 0.0;
                }
                Ok(z)
            })
            .collect()
    }
}

fn check_shape(d: usize, m: usize, vectors: &[f32], filters: &[f32]) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("vector dimension must be positive".into()));
    }
    if vectors.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: vectors.len() % d,
        });
    }
    let n = vectors.len() / d;
    if filters.len() != n * m {
        return Err(Error::InvalidParameter(format!(
            "{} vectors but {} filter values for m = {m}",
            n,
            filters.len()
        )));
    }
    Ok(())
}
