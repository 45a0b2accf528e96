//! Binary container for datasets and built indexes.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic "FCVI" | version u32 | d u32 | m u32 | d* u32 | n u64
//! variant u8 | alpha f64 | flags u32 | section count u32 | lengths u64 x count
//! sections: norm stats | schema JSON | raw vectors f32 | raw filters f32
//!           | transformed f32 | centers or W f64 | graph | metadata JSON
//! crc32 u32 over every preceding byte
//! ```
//!
//! A dataset container carries variant tag 0 and empty transform sections.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::engine::{FcviConfig, FcviIndex, RecordStore};
use crate::error::{Error, Result};
use crate::index::{Backend, BackendConfig, BackendKind, BruteForceIndex, HnswIndex, VectorIndex};
use crate::transform::{FilterSchema, NormStats, Projection, TransformConfig, Variant};

pub const MAGIC: [u8; 4] = *b"FCVI";
pub const VERSION: u32 = 1;
const SECTIONS: usize = 8;
const FIXED_HEADER: usize = 4 + 4 + 4 + 4 + 4 + 8 + 1 + 8 + 4 + 4;
const HEADER_LEN: usize = FIXED_HEADER + 8 * SECTIONS;

pub const FLAG_TRANSFORM: u32 = 1;
pub const FLAG_AUX: u32 = 2;
pub const FLAG_GRAPH: u32 = 4;

const NAMES: [&str; SECTIONS] = [
    "norm stats section",
    "schema section",
    "raw vector section",
    "raw filter section",
    "transformed vector section",
    "centers/projection section",
    "graph section",
    "metadata section",
];

#[derive(Debug, Clone, Copy)]
enum Section {
    Stats = 0,
    Schema,
    Vectors,
    Filters,
    Transformed,
    Aux,
    Graph,
    Meta,
}

/// Parsed header plus raw section bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub d: u32,
    pub m: u32,
    pub padded_dim: u32,
    pub n: u64,
    pub variant_tag: u8,
    pub alpha: f64,
    pub flags: u32,
    pub sections: Vec<Vec<u8>>,
}

impl Container {
    pub fn encode(&self) -> Vec<u8> {
        let body: usize = self.sections.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + body + 4);
        out.extend_from_slice(&MAGIC);
        for v in [VERSION, self.d, self.m, self.padded_dim] {
            out.write_u32::<LittleEndian>(v).expect("vec write");
        }
        out.write_u64::<LittleEndian>(self.n).expect("vec write");
        out.push(self.variant_tag);
        out.write_f64::<LittleEndian>(self.alpha).expect("vec write");
        out.write_u32::<LittleEndian>(self.flags).expect("vec write");
        out.write_u32::<LittleEndian>(SECTIONS as u32).expect("vec write");
        for s in &self.sections {
            out.write_u64::<LittleEndian>(s.len() as u64).expect("vec write");
        }
        for s in &self.sections {
            out.extend_from_slice(s);
        }
        let crc = crc32fast::hash(&out);
        out.write_u32::<LittleEndian>(crc).expect("vec write");
        out
    }

    /// Validates magic and version, then section lengths, then the CRC,
    /// before splitting sections.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(Error::BadMagic(bytes[..4].try_into().expect("4 bytes")));
            }
            return Err(Error::Truncated("header".into()));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let mut r = Cursor::new(&bytes[4..]);
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated("header".into()));
        }
        let trunc = |_| Error::Truncated("header".into());
        let d = r.read_u32::<LittleEndian>().map_err(trunc)?;
        let m = r.read_u32::<LittleEndian>().map_err(trunc)?;
        let padded_dim = r.read_u32::<LittleEndian>().map_err(trunc)?;
        let n = r.read_u64::<LittleEndian>().map_err(trunc)?;
        let variant_tag = r.read_u8().map_err(trunc)?;
        let alpha = r.read_f64::<LittleEndian>().map_err(trunc)?;
        let flags = r.read_u32::<LittleEndian>().map_err(trunc)?;
        let count = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
        if count != SECTIONS {
            return Err(Error::Malformed(format!("expected {SECTIONS} sections, found {count}")));
        }
        let mut lengths = [0u64; SECTIONS];
        for len in &mut lengths {
            *len = r.read_u64::<LittleEndian>().map_err(trunc)?;
        }
        let available = (bytes.len() - HEADER_LEN) as u64;
        let mut offset = 0u64;
        for (i, &len) in lengths.iter().enumerate() {
            offset = offset.saturating_add(len);
            if offset > available {
                return Err(Error::Truncated(NAMES[i].into()));
            }
        }
        if offset + 4 > available {
            return Err(Error::Truncated("checksum trailer".into()));
        }
        if offset + 4 != available {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after checksum",
                available - offset - 4
            )));
        }
        let body_end = bytes.len() - 4;
        let stored = u32::from_le_bytes(bytes[body_end..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(&bytes[..body_end]);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }
        let mut sections = Vec::with_capacity(SECTIONS);
        let mut at = HEADER_LEN;
        for &len in &lengths {
            sections.push(bytes[at..at + len as usize].to_vec());
            at += len as usize;
        }
        Ok(Container {
            d,
            m,
            padded_dim,
            n,
            variant_tag,
            alpha,
            flags,
            sections,
        })
    }

    fn section(&self, s: Section) -> &[u8] {
        &self.sections[s as usize]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    tombstones: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<FcviConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    backend: Option<BackendConfig>,
    #[serde(default)]
    rng_seed: u64,
    /// The embedding projection was supplied rather than seeded.
    #[serde(default)]
    explicit_projection: bool,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    extra: serde_json::Value,
}

fn f32_bytes(xs: impl IntoIterator<Item = f32>) -> Vec<u8> {
    xs.into_iter().flat_map(f32::to_le_bytes).collect()
}

fn f64_bytes(out: &mut Vec<u8>, xs: &[f64]) {
    for &x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn read_f32s(bytes: &[u8], count: usize, name: &str) -> Result<Vec<f32>> {
    if bytes.len() != count * 4 {
        return Err(Error::Malformed(format!(
            "{name}: expected {} bytes, found {}",
            count * 4,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

fn read_f64s<R: Read>(r: &mut R, count: usize, name: &str) -> Result<Vec<f64>> {
    (0..count)
        .map(|_| {
            r.read_f64::<LittleEndian>()
                .map_err(|_| Error::Truncated(name.into()))
        })
        .collect()
}

fn encode_stats(stats: &NormStats) -> Vec<u8> {
    let mut out = Vec::new();
    out.write_u32::<LittleEndian>(stats.vector_dim() as u32).expect("vec write");
    out.write_u32::<LittleEndian>(stats.filter_dim() as u32).expect("vec write");
    f64_bytes(&mut out, &stats.vector_mean);
    f64_bytes(&mut out, &stats.vector_std);
    f64_bytes(&mut out, &stats.filter_mean);
    f64_bytes(&mut out, &stats.filter_std);
    f64_bytes(&mut out, &[stats.epsilon]);
    out
}

fn decode_stats(bytes: &[u8]) -> Result<NormStats> {
    let name = NAMES[Section::Stats as usize];
    let mut r = Cursor::new(bytes);
    let trunc = |_| Error::Truncated(name.into());
    let d = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let m = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let stats = NormStats {
        vector_mean: read_f64s(&mut r, d, name)?,
        vector_std: read_f64s(&mut r, d, name)?,
        filter_mean: read_f64s(&mut r, m, name)?,
        filter_std: read_f64s(&mut r, m, name)?,
        epsilon: read_f64s(&mut r, 1, name)?[0],
    };
    if r.position() as usize != bytes.len() {
        return Err(Error::Malformed(format!("{name} has trailing bytes")));
    }
    stats.validate()?;
    Ok(stats)
}

fn encode_aux(t: &TransformConfig) -> Vec<u8> {
    let mut out = Vec::new();
    match t.variant {
        Variant::Cluster => {
            let centers = t.cluster_centers.as_deref().unwrap_or(&[]);
            out.write_u32::<LittleEndian>(centers.len() as u32).expect("vec write");
            out.write_u32::<LittleEndian>(t.filter_dim as u32).expect("vec write");
            for c in centers {
                f64_bytes(&mut out, c);
            }
        }
        Variant::Embedding => {
            if let Some(w) = &t.projection {
                out.write_u32::<LittleEndian>(w.rows as u32).expect("vec write");
                out.write_u32::<LittleEndian>(w.cols as u32).expect("vec write");
                f64_bytes(&mut out, &w.data);
            }
        }
        Variant::Partition => {}
    }
    out
}

fn decode_matrix(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let name = NAMES[Section::Aux as usize];
    let mut r = Cursor::new(bytes);
    let trunc = |_| Error::Truncated(name.into());
    let rows = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    let cols = r.read_u32::<LittleEndian>().map_err(trunc)? as usize;
    if bytes.len() != 8 + rows * cols * 8 {
        return Err(Error::Malformed(format!("{name}: size does not match {rows}x{cols}")));
    }
    Ok((rows, cols, read_f64s(&mut r, rows * cols, name)?))
}

fn store_sections(store: &RecordStore) -> Vec<Vec<u8>> {
    vec![
        encode_stats(store.stats()),
        store.schema().to_json().into_bytes(),
        f32_bytes(store.raw_vectors().iter().copied()),
        f32_bytes(store.raw_filters().iter().copied()),
    ]
}

fn decode_store(c: &Container, tombstones: Vec<u32>) -> Result<RecordStore> {
    let (d, m, n) = (c.d as usize, c.m as usize, c.n as usize);
    let stats = decode_stats(c.section(Section::Stats))?;
    let schema_json = std::str::from_utf8(c.section(Section::Schema))
        .map_err(|e| Error::Malformed(format!("schema is not UTF-8: {e}")))?;
    let schema = FilterSchema::from_json(schema_json)?;
    if schema.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: schema.dim(),
        });
    }
    let vectors = read_f32s(c.section(Section::Vectors), n * d, NAMES[Section::Vectors as usize])?;
    let filters = read_f32s(c.section(Section::Filters), n * m, NAMES[Section::Filters as usize])?;
    RecordStore::with_stats(schema, d, vectors, filters, stats, tombstones)
}

fn decode_meta(c: &Container) -> Result<Metadata> {
    Ok(serde_json::from_slice(c.section(Section::Meta))?)
}

/// Serializes a dataset (records only) with optional generator metadata.
pub fn encode_dataset(store: &RecordStore, extra: serde_json::Value) -> Vec<u8> {
    let mut sections = store_sections(store);
    sections.extend([Vec::new(), Vec::new(), Vec::new()]);
    let meta = Metadata {
        tombstones: store.tombstones(),
        extra,
        ..Metadata::default()
    };
    sections.push(serde_json::to_vec(&meta).expect("metadata serializes"));
    Container {
        d: store.dim() as u32,
        m: store.filter_dim() as u32,
        padded_dim: store.dim() as u32,
        n: store.len() as u64,
        variant_tag: 0,
        alpha: 0.0,
        flags: 0,
        sections,
    }
    .encode()
}

pub fn save_dataset(store: &RecordStore, extra: serde_json::Value, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(store, extra))?;
    Ok(())
}

/// Loads the records of a dataset or index container, with its extra
/// metadata.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<(RecordStore, serde_json::Value)> {
    let c = Container::decode(&fs::read(path)?)?;
    let meta = decode_meta(&c)?;
    Ok((decode_store(&c, meta.tombstones)?, meta.extra))
}

pub fn encode_index(index: &FcviIndex) -> Vec<u8> {
    let store = index.store();
    let transform = index.transform();
    let mut sections = store_sections(store);
    let backend = index.backend();
    sections.push(f32_bytes((0..store.len() as u32).flat_map(|id| {
        backend.vector(id).expect("every record is indexed").iter().copied()
    })));
    let aux = encode_aux(transform);
    let mut flags = FLAG_TRANSFORM;
    if !aux.is_empty() {
        flags |= FLAG_AUX;
    }
    sections.push(aux);
    let mut graph = Vec::new();
    if let Backend::Hnsw(h) = backend {
        h.write_graph(&mut graph).expect("vec write");
        flags |= FLAG_GRAPH;
    }
    sections.push(graph);
    let mut config = index.config().clone();
    let explicit_projection = config.projection.take().is_some();
    let meta = Metadata {
        tombstones: store.tombstones(),
        config: Some(config),
        backend: Some(*index.backend_config()),
        rng_seed: transform.rng_seed,
        explicit_projection,
        extra: serde_json::Value::Null,
    };
    sections.push(serde_json::to_vec(&meta).expect("metadata serializes"));
    Container {
        d: store.dim() as u32,
        m: store.filter_dim() as u32,
        padded_dim: transform.padded_dim as u32,
        n: store.len() as u64,
        variant_tag: transform.variant.tag(),
        alpha: transform.alpha,
        flags,
        sections,
    }
    .encode()
}

pub fn save_index(index: &FcviIndex, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_index(index))?;
    Ok(())
}

pub fn decode_index(bytes: &[u8]) -> Result<FcviIndex> {
    let c = Container::decode(bytes)?;
    if c.flags & FLAG_TRANSFORM == 0 {
        return Err(Error::Malformed("container holds a dataset, not an index".into()));
    }
    let meta = decode_meta(&c)?;
    let store = decode_store(&c, meta.tombstones.clone())?;
    let (d, m, dp, n) = (c.d as usize, c.m as usize, c.padded_dim as usize, c.n as usize);
    let variant = Variant::from_tag(c.variant_tag)
        .ok_or_else(|| Error::Malformed(format!("unknown variant tag {}", c.variant_tag)))?;
    let mut transform = TransformConfig {
        variant,
        alpha: c.alpha,
        original_dim: d,
        filter_dim: m,
        padded_dim: dp,
        cluster_centers: None,
        projection: None,
        rng_seed: meta.rng_seed,
    };
    match variant {
        Variant::Cluster => {
            let (k, cols, data) = decode_matrix(c.section(Section::Aux))?;
            if cols != m {
                return Err(Error::DimensionMismatch { expected: m, actual: cols });
            }
            transform.cluster_centers = Some(data.chunks_exact(m.max(1)).take(k).map(<[f64]>::to_vec).collect());
        }
        Variant::Embedding => {
            let (rows, cols, data) = decode_matrix(c.section(Section::Aux))?;
            transform.projection = Some(Projection::new(rows, cols, data)?);
        }
        Variant::Partition => {}
    }
    transform.validate()?;
    let mut config = meta
        .config
        .ok_or_else(|| Error::Malformed("index metadata lacks a config".into()))?;
    if meta.explicit_projection {
        config.projection = transform.projection.clone();
    }
    let backend_config = meta
        .backend
        .ok_or_else(|| Error::Malformed("index metadata lacks a backend".into()))?;

    let transformed = read_f32s(
        c.section(Section::Transformed),
        n * dp,
        NAMES[Section::Transformed as usize],
    )?;
    let graph = c.section(Section::Graph);
    let mut backend = match backend_config.kind {
        BackendKind::BruteForce => Backend::BruteForce(BruteForceIndex::build(dp, &transformed)?),
        BackendKind::Hnsw if !graph.is_empty() => {
            let h = HnswIndex::read_graph(&mut &graph[..], dp, |id| {
                let i = id as usize;
                (i < n).then(|| transformed[i * dp..(i + 1) * dp].to_vec())
            })?;
            if h.params() != backend_config.hnsw || h.seed() != backend_config.seed {
                return Err(Error::Malformed("graph parameters disagree with metadata".into()));
            }
            Backend::Hnsw(h)
        }
        // No stored graph: rebuild deterministically from the stored seed.
        BackendKind::Hnsw => backend_config.build(dp, &transformed)?,
    };
    for &id in &meta.tombstones {
        if !backend.is_deleted(id) {
            backend.mark_deleted(id)?;
        }
    }
    FcviIndex::from_parts(store, config, transform, backend_config, backend)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<FcviIndex> {
    decode_index(&fs::read(path)?)
}

/// Header fields of a container file, validated but not fully parsed.
pub fn inspect(path: impl AsRef<Path>) -> Result<Container> {
    Container::decode(&fs::read(path)?)
}
