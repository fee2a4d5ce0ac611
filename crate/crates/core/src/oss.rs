//! Order-based sequence similarity (OSS) dissimilarity.
//!
//! For sequences `s_i`, `s_j` of lengths `L_i`, `L_j`:
//!
//! ```text
//! d = (f + g) / (L_i + L_j)
//! f = sum over common actions a, m = 1..min(L_i^a, L_j^a) of |pos_i^a(m) - pos_j^a(m)| / max(L_i, L_j)
//! g = occurrences in s_i of actions absent from s_j + occurrences in s_j of actions absent from s_i
//! ```
//!
//! Positions are 1-based over the full token list and occurrences are paired
//! by rank (first with first, second with second). The whole quantity is
//! carried as integers and divided once, so `d(a, b) == d(b, a)` bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seqdata::{ActionSequence, Cohort};

/// Occurrence positions of each action, keyed and sorted by action.
#[derive(Debug, Clone)]
struct Profile<K> {
    len: u64,
    positions: Vec<(K, Vec<u64>)>,
}

impl<K: Ord + Clone> Profile<K> {
    fn build<'a>(tokens: impl IntoIterator<Item = &'a K>) -> Self
    where
        K: 'a,
    {
        let mut map: BTreeMap<K, Vec<u64>> = BTreeMap::new();
        let mut len = 0;
        for (i, t) in tokens.into_iter().enumerate() {
            map.entry(t.clone()).or_default().push(i as u64 + 1);
            len += 1;
        }
        Profile {
            len,
            positions: map.into_iter().collect(),
        }
    }
}

fn profile_distance<K: Ord>(a: &Profile<K>, b: &Profile<K>) -> f64 {
    let max_len = a.len.max(b.len);
    let mut shift: u64 = 0;
    let mut unique: u64 = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.positions.len() || j < b.positions.len() {
        let ord = match (a.positions.get(i), b.positions.get(j)) {
            (Some((ka, _)), Some((kb, _))) => ka.cmp(kb),
            (Some(_), None) => std::cmp::Ordering::Less,
            _ => std::cmp::Ordering::Greater,
        };
        match ord {
            std::cmp::Ordering::Less => {
                unique += a.positions[i].1.len() as u64;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                unique += b.positions[j].1.len() as u64;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let (pa, pb) = (&a.positions[i].1, &b.positions[j].1);
                shift += pa.iter().zip(pb).map(|(x, y)| x.abs_diff(*y)).sum::<u64>();
                i += 1;
                j += 1;
            }
        }
    }
    // (shift / max_len + unique) / (L_i + L_j), as one division.
    let num = shift + unique * max_len;
    let den = max_len * (a.len + b.len);
    num as f64 / den as f64
}

/// OSS dissimilarity between two action sequences, in `[0, 1]`.
pub fn oss_distance(a: &ActionSequence, b: &ActionSequence) -> Result<f64> {
    for s in [a, b] {
        if s.is_empty() {
            return Err(Error::EmptySequence {
                subject_id: s.subject_id.clone(),
                item_id: s.item_id.clone(),
            });
        }
    }
    Ok(token_distance(&a.tokens, &b.tokens))
}

/// OSS dissimilarity over raw token slices. Both slices must be non-empty.
pub fn token_distance<K: Ord + Clone>(a: &[K], b: &[K]) -> f64 {
    profile_distance(&Profile::build(a), &Profile::build(b))
}

/// Symmetric matrix of pairwise dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    subject_ids: Vec<String>,
    entries: DMatrix<f64>,
}

impl DissimilarityMatrix {
    /// Checks the symmetric, zero-diagonal, `[0, 1]` invariants.
    pub fn new(subject_ids: Vec<String>, entries: DMatrix<f64>) -> Result<Self> {
        let n = subject_ids.len();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Shape(format!(
                "{} subject ids for a {}x{} matrix",
                n,
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..n {
            if entries[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("entry ({i}, {j}) is not finite")));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "entry ({i}, {j}) = {v} is outside [0, 1]"
                    )));
                }
                if v != entries[(j, i)] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            subject_ids,
            entries,
        })
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let header =
            std::iter::once("subject_id").chain(self.subject_ids.iter().map(String::as_str));
        w.write_record(header).map_err(crate::features::csv_err)?;
        for (i, id) in self.subject_ids.iter().enumerate() {
            let row = std::iter::once(id.clone())
                .chain((0..self.len()).map(|j| format!("{}", self.entries[(i, j)])));
            w.write_record(row).map_err(crate::features::csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<dissimilarity>", e))
    }

    pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Self> {
        let fm = crate::features::FeatureMatrix::read_csv(reader, source)?;
        if fm.columns() != fm.subject_ids() {
            return Err(Error::Parse {
                path: source.into(),
                line: 1,
                message: "header and row labels differ".into(),
            });
        }
        let ids = fm.subject_ids().to_vec();
        Self::new(ids, fm.into_values())
    }

    const MAGIC: &'static [u8; 4] = b"OSSD";
    const VERSION: u32 = 1;

    /// Little-endian binary form: magic, version, N, labels, then N*N f64
    /// values in row-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<dissimilarity>", e);
        w.write_all(Self::MAGIC).map_err(io)?;
        w.write_all(&Self::VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.len() as u64).to_le_bytes())
            .map_err(io)?;
        for id in &self.subject_ids {
            w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(id.as_bytes()).map_err(io)?;
        }
        for i in 0..self.len() {
            for j in 0..self.len() {
                w.write_all(&self.entries[(i, j)].to_le_bytes())
                    .map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            path: "<binary>".into(),
            line: 0,
            message: m.to_owned(),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != Self::MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(|_| bad("truncated header"))?;
        if u32::from_le_bytes(b4) != Self::VERSION {
            return Err(bad("unsupported version"));
        }
        r.read_exact(&mut b8).map_err(|_| bad("truncated header"))?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b4).map_err(|_| bad("truncated labels"))?;
            let mut buf = vec![0u8; u32::from_le_bytes(b4) as usize];
            r.read_exact(&mut buf)
                .map_err(|_| bad("truncated labels"))?;
            ids.push(String::from_utf8(buf).map_err(|_| bad("label is not utf-8"))?);
        }
        let mut entries = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                r.read_exact(&mut b8).map_err(|_| bad("truncated body"))?;
                entries[(i, j)] = f64::from_le_bytes(b8);
            }
        }
        Self::new(ids, entries)
    }

    /// Writes the binary format for a `.bin` extension, csv otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let w = std::io::BufWriter::new(f);
        if is_binary(path) {
            self.write_binary(w)
        } else {
            self.write_csv(w)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let r = std::io::BufReader::new(f);
        if is_binary(path) {
            Self::read_binary(r)
        } else {
            Self::read_csv(r, &path.display().to_string())
        }
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

/// Pairwise OSS dissimilarities for every pair in the cohort.
pub fn dissimilarity_matrix(cohort: &Cohort) -> Result<DissimilarityMatrix> {
    if cohort.len() < 2 {
        return Err(Error::invalid(format!(
            "item `{}` needs at least 2 sequences for a dissimilarity matrix",
            cohort.item_id()
        )));
    }
    let profiles: Vec<Profile<usize>> = cohort.indexed().iter().map(Profile::build).collect();
    let n = profiles.len();
    // Each row owns its upper-triangle cells; assembly order is fixed.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| profile_distance(&profiles[i], &profiles[j]))
                .collect()
        })
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let j = i + 1 + off;
            entries[(i, j)] = d;
            entries[(j, i)] = d;
        }
    }
    Ok(DissimilarityMatrix {
        subject_ids: cohort.subject_ids(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(a: &[&str], b: &[&str]) -> f64 {
        token_distance(a, b)
    }

    #[test]
    fn hand_computed_cases() {
        assert_eq!(d(&["A", "B"], &["A", "C"]), 0.5);
        assert_eq!(d(&["A", "B"], &["B", "A"]), 0.25);
        assert_eq!(d(&["A", "B", "A"], &["A", "B", "A"]), 0.0);
        assert_eq!(d(&["A", "A"], &["B"]), 1.0);
    }

    #[test]
    fn unmatched_extra_occurrences_are_not_counted() {
        // A at 1,2 vs A at 1: one matched pair with shift 0, no unique actions.
        assert_eq!(d(&["A", "A"], &["A"]), 0.0);
        // [A,B,A] vs [B,A]: A 1->2 (1), B 2->1 (1); f = 2/3, g = 0, d = (2/3)/5.
        assert_eq!(d(&["A", "B", "A"], &["B", "A"]), 2.0 / 15.0);
    }

    #[test]
    fn empty_is_an_error() {
        let a = ActionSequence {
            subject_id: "a".into(),
            item_id: "i".into(),
            tokens: vec![],
            score: None,
        };
        let b = ActionSequence::from_tokens("b", "i", &["A"]).unwrap();
        assert!(oss_distance(&a, &b).is_err());
    }

    #[test]
    fn matrix_of_identical_pair_is_zero() {
        let a = ActionSequence::from_tokens("a", "i", &["A", "B"]).unwrap();
        let b = ActionSequence::from_tokens("b", "i", &["A", "B"]).unwrap();
        let m = dissimilarity_matrix(&Cohort::new("i", vec![a, b]).unwrap()).unwrap();
        assert_eq!(m.entries(), &DMatrix::zeros(2, 2));
    }

    #[test]
    fn binary_round_trip() {
        let seqs = [["A", "B", "C"], ["C", "A", "A"], ["B", "B", "D"]]
            .iter()
            .enumerate()
            .map(|(i, t)| ActionSequence::from_tokens(&format!("s{i}"), "i", t).unwrap())
            .collect();
        let m = dissimilarity_matrix(&Cohort::new("i", seqs).unwrap()).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(DissimilarityMatrix::read_binary(buf.as_slice()).unwrap(), m);
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(
            DissimilarityMatrix::read_csv(csv.as_slice(), "mem").unwrap(),
            m
        );
    }
}
