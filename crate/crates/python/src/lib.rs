use std::sync::Arc;

use cobs_core::evaluation::unconstrained_instances;
use cobs_core::selection::{silhouette_score, DistanceMatrix};
use cobs_core::{
    generate_ensemble_with_workers, generate_random_constraints, load_dataset, normalize, rng, split_supervision,
    ActiveConfig, Algorithm, ClusteringEnsemble, ConstraintKind, ConstraintSet, HyperGrid, LabelColumn,
    LabelOracle, LoadOptions, Pair,
};
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: cobs_core::Error) -> PyErr {
    match e {
        cobs_core::Error::Io(e) => PyErr::from(e),
        cobs_core::Error::QueryPending | cobs_core::Error::NotPending { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn kind(must_link: bool) -> ConstraintKind {
    ConstraintKind::from_same(must_link)
}

/// `(i, j, must_link)` triples to a constraint set, keeping their order.
fn constraint_set(items: &[(usize, usize, bool)]) -> PyResult<ConstraintSet> {
    let mut cs = ConstraintSet::new();
    for &(i, j, ml) in items {
        cs.insert(Pair::new(i, j).map_err(err)?, kind(ml)).map_err(err)?;
    }
    Ok(cs)
}

fn triples(cs: &ConstraintSet) -> Vec<(usize, usize, bool)> {
    cs.iter().map(|c| (c.i, c.j, c.kind.is_must_link())).collect()
}

/// A numeric dataset, min-max normalized on load.
#[pyclass(name = "Dataset", module = "cobs", frozen)]
struct PyDataset {
    inner: Arc<cobs_core::Dataset>,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (path, label_col=None, header=None))]
    fn load(path: &str, label_col: Option<&str>, header: Option<bool>) -> PyResult<Self> {
        let opts = LoadOptions {
            label: label_col.map(|s| s.parse::<LabelColumn>().expect("infallible")),
            header,
            name: None,
        };
        let d = load_dataset(path, &opts).map_err(err)?;
        Ok(Self {
            inner: Arc::new(normalize(&d)),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (rows, labels=None, name="data"))]
    fn from_rows(rows: Vec<Vec<f64>>, labels: Option<Vec<usize>>, name: &str) -> PyResult<Self> {
        let d = cobs_core::Dataset::from_rows(name, rows, labels).map_err(err)?;
        Ok(Self {
            inner: Arc::new(normalize(&d)),
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<usize>> {
        self.inner.labels().map(<[usize]>::to_vec)
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyIndexError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row(i).to_vec())
    }

    /// Random constraints answered from the labels, drawn like one
    /// experiment repetition with `seed`.
    #[pyo3(signature = (count, seed=0))]
    fn random_constraints(&self, count: usize, seed: u64) -> PyResult<Vec<(usize, usize, bool)>> {
        let labels = self
            .inner
            .labels()
            .ok_or_else(|| PyValueError::new_err("dataset has no labels"))?;
        let split = split_supervision(&self.inner, rng::derive(seed, 0)).map_err(err)?;
        let mut oracle = LabelOracle::new(labels.to_vec());
        let cs = generate_random_constraints(&split, &mut oracle, count, rng::derive(seed, 1)).map_err(err)?;
        Ok(triples(&cs))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset({:?}, n={}, f={})", self.inner.name(), self.inner.len(), self.inner.n_features())
    }
}

#[pyclass(name = "Ensemble", module = "cobs", frozen)]
struct PyEnsemble {
    inner: Arc<ClusteringEnsemble>,
}

#[pymethods]
impl PyEnsemble {
    /// Runs the sweep. `grid` is a JSON grid description; `None` is the
    /// default 931-member grid.
    #[staticmethod]
    #[pyo3(signature = (dataset, grid=None, workers=None))]
    fn generate(py: Python<'_>, dataset: &PyDataset, grid: Option<&str>, workers: Option<usize>) -> PyResult<Self> {
        let grid: HyperGrid = match grid {
            Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("invalid grid: {e}")))?,
            None => HyperGrid::default(),
        };
        let d = dataset.inner.clone();
        let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let e = py
            .detach(move || generate_ensemble_with_workers(&d, &grid, workers))
            .map_err(err)?;
        Ok(Self { inner: Arc::new(e) })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(ClusteringEnsemble::load(path).map_err(err)?),
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    fn provenance(&self, i: usize) -> PyResult<String> {
        self.member(i).map(|c| c.provenance.to_string())
    }

    fn assignment(&self, i: usize) -> PyResult<Vec<i32>> {
        self.member(i).map(|c| c.assignment.clone())
    }

    /// Members per algorithm.
    fn counts(&self) -> (usize, usize, usize) {
        (
            self.inner.count(Algorithm::Kmeans),
            self.inner.count(Algorithm::Dbscan),
            self.inner.count(Algorithm::Spectral),
        )
    }

    #[getter]
    fn skipped(&self) -> usize {
        self.inner.skipped.len()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

impl PyEnsemble {
    fn member(&self, i: usize) -> PyResult<&cobs_core::Clustering> {
        self.inner
            .clusterings
            .get(i)
            .ok_or_else(|| PyIndexError::new_err(format!("clustering {i} out of range")))
    }
}

/// Index and satisfaction score of the member satisfying the most
/// `(i, j, must_link)` constraints.
#[pyfunction]
#[pyo3(signature = (ensemble, constraints, seed=0))]
fn cobs_select(ensemble: &PyEnsemble, constraints: Vec<(usize, usize, bool)>, seed: u64) -> PyResult<(usize, usize)> {
    let cs = constraint_set(&constraints)?;
    let s = cobs_core::cobs_select(&ensemble.inner, &cs, seed).map_err(err)?;
    Ok((s.index, s.score))
}

/// Silhouette-best K-means member: `(index, silhouette)`.
#[pyfunction]
fn silhouette_select(py: Python<'_>, dataset: &PyDataset, ensemble: &PyEnsemble) -> PyResult<(usize, f64)> {
    let d = dataset.inner.clone();
    let e = ensemble.inner.clone();
    py.detach(move || {
        let dm = DistanceMatrix::new(&d);
        let members = e.restrict(Algorithm::Kmeans);
        let (pos, score) =
            cobs_core::silhouette_select(&dm, members.iter().map(|(_, c)| *c)).map_err(err)?;
        Ok((members[pos].0, score))
    })
}

/// Mean silhouette of one assignment; `None` when undefined.
#[pyfunction]
fn silhouette(dataset: &PyDataset, assignment: Vec<i32>) -> PyResult<Option<f64>> {
    if assignment.len() != dataset.inner.len() {
        return Err(PyValueError::new_err("assignment length differs from the dataset"));
    }
    let c = cobs_core::Clustering::new(cobs_core::Provenance::Kmeans { k: 0, seed: 0 }, assignment);
    Ok(silhouette_score(&DistanceMatrix::new(&dataset.inner), &c))
}

/// Adjusted Rand index between two assignments; negative ids are singletons.
#[pyfunction]
fn ari(a: Vec<i32>, b: Vec<i32>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("assignments differ in length"));
    }
    Ok(cobs_core::ari(&a, &b))
}

/// ARI of ensemble member `index` against the labels on instances outside the
/// constraints.
#[pyfunction]
fn evaluate(dataset: &PyDataset, ensemble: &PyEnsemble, index: usize, constraints: Vec<(usize, usize, bool)>) -> PyResult<f64> {
    let cs = constraint_set(&constraints)?;
    cobs_core::evaluate_selected(ensemble.member(index)?, &dataset.inner, &cs).map_err(err)
}

/// Instances not involved in any constraint.
#[pyfunction]
fn unconstrained(n: usize, constraints: Vec<(usize, usize, bool)>) -> PyResult<Vec<usize>> {
    Ok(unconstrained_instances(n, &constraint_set(&constraints)?))
}

#[pyclass(name = "ActiveSession", module = "cobs")]
struct PyActiveSession {
    inner: cobs_core::ActiveSession,
}

#[pymethods]
impl PyActiveSession {
    /// `candidates` defaults to every instance.
    #[new]
    #[pyo3(signature = (ensemble, candidates=None, budget=50, m=2.0, sample_size=1000, seed=0))]
    fn new(
        ensemble: &PyEnsemble,
        candidates: Option<Vec<usize>>,
        budget: usize,
        m: f64,
        sample_size: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let candidates = candidates.unwrap_or_else(|| (0..ensemble.inner.n_instances()).collect());
        let config = ActiveConfig {
            budget,
            m,
            sample_size,
            seed,
        };
        let inner = cobs_core::ActiveSession::new(ensemble.inner.clone(), &candidates, config).map_err(err)?;
        Ok(Self { inner })
    }

    /// The next pair to ask about, or `None` once the budget or pool is spent.
    fn next_query(&mut self) -> PyResult<Option<(usize, usize)>> {
        match self.inner.next_query() {
            Ok(p) => Ok(Some((p.i, p.j))),
            Err(cobs_core::Error::BudgetExhausted | cobs_core::Error::PoolExhausted) => Ok(None),
            Err(e) => Err(err(e)),
        }
    }

    fn answer(&mut self, i: usize, j: usize, must_link: bool) -> PyResult<()> {
        let pair = Pair::new(i, j).map_err(err)?;
        self.inner.update(pair, kind(must_link)).map_err(err)
    }

    /// Answers every query from class labels until the session ends.
    fn run_labels(&mut self, labels: Vec<usize>) -> PyResult<()> {
        let mut oracle = LabelOracle::new(labels);
        self.inner.run(&mut oracle).map_err(err)
    }

    fn result(&self) -> usize {
        self.inner.result()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn used(&self) -> usize {
        self.inner.used()
    }

    #[getter]
    fn budget(&self) -> usize {
        self.inner.budget()
    }

    #[getter]
    fn answers(&self) -> Vec<(usize, usize, bool)> {
        self.inner
            .answers()
            .iter()
            .map(|c| (c.i, c.j, c.kind.is_must_link()))
            .collect()
    }

    fn is_finished(&self) -> bool {
        self.inner.is_finished()
    }
}

#[pymodule]
fn cobs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyActiveSession>()?;
    m.add_function(wrap_pyfunction!(cobs_select, m)?)?;
    m.add_function(wrap_pyfunction!(silhouette_select, m)?)?;
    m.add_function(wrap_pyfunction!(silhouette, m)?)?;
    m.add_function(wrap_pyfunction!(ari, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(unconstrained, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_round_trip() {
        let items = vec![(3, 1, true), (0, 2, false)];
        let cs = constraint_set(&items).unwrap();
        assert_eq!(triples(&cs), vec![(1, 3, true), (0, 2, false)]);
        assert!(constraint_set(&[(1, 1, true)]).is_err());
        assert!(constraint_set(&[(0, 1, true), (1, 0, false)]).is_err());
    }
}
