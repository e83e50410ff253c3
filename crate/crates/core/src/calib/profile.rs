use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CalibError;

/// One entry of the per-edge two-qubit error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeError {
    pub edge: [usize; 2],
    pub value: f64,
}

/// On-disk calibration profile layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub name: String,
    pub num_qubits: usize,
    pub coupling: Vec<[usize; 2]>,
    pub t1_us: Vec<f64>,
    pub t2_us: Vec<f64>,
    pub readout_error: Vec<f64>,
    pub err_1q: Vec<f64>,
    pub err_2q: Vec<EdgeError>,
    pub gate_time_us: f64,
}

/// Undirected device connectivity with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap {
    num_qubits: usize,
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl CouplingMap {
    fn new(num_qubits: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); num_qubits];
        for &(a, b) in edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let mut edges: Vec<_> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        Self { num_qubits, adjacency, edges }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Edges as `(low, high)` pairs in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).is_some_and(|n| n.binary_search(&b).is_ok())
    }

    pub fn is_connected(&self) -> bool {
        if self.num_qubits == 0 {
            return true;
        }
        let mut seen = vec![false; self.num_qubits];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.num_qubits
    }

    /// Breadth-first shortest path from `from` to `to`, inclusive of both ends.
    ///
    /// Neighbors are explored in ascending index order, so among equal-length
    /// paths the one through lower-index qubits is returned.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut parent = vec![usize::MAX; self.num_qubits];
        parent[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &v in &self.adjacency[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[to] == usize::MAX {
            return None;
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

/// A device calibration snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendProfile {
    pub name: String,
    pub num_qubits: usize,
    pub coupling: CouplingMap,
    pub t1_us: Vec<f64>,
    pub t2_us: Vec<f64>,
    pub readout_error: Vec<f64>,
    pub err_1q: Vec<f64>,
    err_2q: BTreeMap<(usize, usize), f64>,
    pub gate_time_us: f64,
}

fn check_unit(field: &str, values: impl IntoIterator<Item = f64>) -> Result<(), CalibError> {
    for v in values {
        if !(0.0..=1.0).contains(&v) || v.is_nan() {
            return Err(CalibError::Invalid(format!("{field} out of [0,1]")));
        }
    }
    Ok(())
}

fn check_positive(field: &str, values: impl IntoIterator<Item = f64>) -> Result<(), CalibError> {
    for v in values {
        if v.is_nan() || v <= 0.0 || v.is_infinite() {
            return Err(CalibError::Invalid(format!("{field} must be strictly positive")));
        }
    }
    Ok(())
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    values.sum::<f64>() / n as f64
}

impl BackendProfile {
    pub fn from_file_repr(raw: ProfileFile) -> Result<Self, CalibError> {
        let n = raw.num_qubits;
        if n == 0 {
            return Err(CalibError::Invalid("num_qubits must be positive".into()));
        }
        for (field, len) in [
            ("t1_us", raw.t1_us.len()),
            ("t2_us", raw.t2_us.len()),
            ("readout_error", raw.readout_error.len()),
            ("err_1q", raw.err_1q.len()),
        ] {
            if len != n {
                return Err(CalibError::Invalid(format!(
                    "{field} has length {len}, expected num_qubits = {n}"
                )));
            }
        }

        let mut edges = Vec::with_capacity(raw.coupling.len());
        for &[a, b] in &raw.coupling {
            if a >= n || b >= n {
                return Err(CalibError::Invalid(format!(
                    "coupling edge ({a},{b}) references missing qubit"
                )));
            }
            if a == b {
                return Err(CalibError::Invalid(format!("coupling self-loop on qubit {a}")));
            }
            let key = (a.min(b), a.max(b));
            if edges.contains(&key) {
                return Err(CalibError::Invalid(format!("duplicate coupling edge ({a},{b})")));
            }
            edges.push(key);
        }

        if raw.err_2q.len() != edges.len() {
            return Err(CalibError::Invalid(format!(
                "err_2q has {} entries, expected one per coupling edge ({})",
                raw.err_2q.len(),
                edges.len()
            )));
        }
        let mut err_2q = BTreeMap::new();
        for entry in &raw.err_2q {
            let [a, b] = entry.edge;
            let key = (a.min(b), a.max(b));
            if !edges.contains(&key) {
                return Err(CalibError::Invalid(format!(
                    "err_2q edge ({a},{b}) is not a coupling edge"
                )));
            }
            if err_2q.insert(key, entry.value).is_some() {
                return Err(CalibError::Invalid(format!("err_2q edge ({a},{b}) listed twice")));
            }
        }

        check_unit("err_2q", err_2q.values().copied())?;
        check_unit("err_1q", raw.err_1q.iter().copied())?;
        check_unit("readout_error", raw.readout_error.iter().copied())?;
        check_positive("t1_us", raw.t1_us.iter().copied())?;
        check_positive("t2_us", raw.t2_us.iter().copied())?;
        check_positive("gate_time_us", [raw.gate_time_us])?;

        for (q, (t1, t2)) in raw.t1_us.iter().zip(&raw.t2_us).enumerate() {
            if *t2 > 2.0 * t1 {
                log::warn!("{}: qubit {q} has T2 = {t2} > 2*T1 = {}", raw.name, 2.0 * t1);
            }
        }

        Ok(Self {
            name: raw.name,
            num_qubits: n,
            coupling: CouplingMap::new(n, &edges),
            t1_us: raw.t1_us,
            t2_us: raw.t2_us,
            readout_error: raw.readout_error,
            err_1q: raw.err_1q,
            err_2q,
            gate_time_us: raw.gate_time_us,
        })
    }

    pub fn to_file_repr(&self) -> ProfileFile {
        ProfileFile {
            name: self.name.clone(),
            num_qubits: self.num_qubits,
            coupling: self.coupling.edges().iter().map(|&(a, b)| [a, b]).collect(),
            t1_us: self.t1_us.clone(),
            t2_us: self.t2_us.clone(),
            readout_error: self.readout_error.clone(),
            err_1q: self.err_1q.clone(),
            err_2q: self
                .err_2q
                .iter()
                .map(|(&(a, b), &value)| EdgeError { edge: [a, b], value })
                .collect(),
            gate_time_us: self.gate_time_us,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CalibError> {
        let raw: ProfileFile = serde_json::from_str(text).map_err(CalibError::Parse)?;
        Self::from_file_repr(raw)
    }

    /// Two-qubit error on an undirected edge, `None` when the qubits are not coupled.
    pub fn edge_error(&self, a: usize, b: usize) -> Option<f64> {
        self.err_2q.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn mean_err_1q(&self) -> f64 {
        mean(self.err_1q.iter().copied())
    }

    pub fn mean_err_2q(&self) -> f64 {
        mean(self.err_2q.values().copied())
    }

    pub fn mean_readout_error(&self) -> f64 {
        mean(self.readout_error.iter().copied())
    }

    pub fn mean_t1_us(&self) -> f64 {
        mean(self.t1_us.iter().copied())
    }

    pub fn mean_t2_us(&self) -> f64 {
        mean(self.t2_us.iter().copied())
    }

    /// Multiply every two-qubit error by `factor`, clamped to 1.
    pub fn scale_err_2q(&mut self, factor: f64) {
        for v in self.err_2q.values_mut() {
            *v = (*v * factor).min(1.0);
        }
    }
}

/// Load and validate one calibration profile file.
pub fn load_profile(path: impl AsRef<Path>) -> Result<BackendProfile, CalibError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CalibError::Io(path.display().to_string(), e))?;
    BackendProfile::from_json(&text).map_err(|e| e.in_file(path))
}

/// Load every `*.json` profile in a directory, ordered by file name.
pub fn load_profile_dir(dir: impl AsRef<Path>) -> Result<Vec<BackendProfile>, CalibError> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CalibError::Io(dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CalibError::Empty);
    }
    paths.iter().map(load_profile).collect()
}
