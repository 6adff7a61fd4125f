//! JSON exchange formats.
//!
//! Matrices are `{"dims": [...], "entries": [[re, im], ...]}` with entries
//! row-major over the full product dimension. Every other object embeds
//! matrix objects.

use std::collections::BTreeMap;

use dynres_core::choi::{ChannelChoi, SystemPair, ValidationReport};
use dynres_core::comb::CombChoi;
use dynres_core::conic::{IpmSettings, SolveReport, Status, Value};
use dynres_core::linalg::{Mat, C64};
use dynres_core::problems::{Bound, DiamondReport};
use dynres_core::protocols::{ProtocolResult, Task};
use dynres_core::supermap::{Realization, Rep, RepMatrix, SuperChoi};
use dynres_core::theory::{ChannelParties, Factorization, Parties, TheoryKind, TheorySpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dims: Vec<usize>,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn new(dims: &[usize], m: &Mat) -> Self {
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        Self { dims: dims.to_vec(), entries }
    }

    /// A square matrix over the product of `dims`.
    pub fn to_mat(&self) -> Result<Mat, CliError> {
        let d: usize = self.dims.iter().product();
        if self.dims.is_empty() || d == 0 {
            return Err(CliError::domain("matrix dims must be non-empty and positive"));
        }
        if self.entries.len() != d * d {
            return Err(CliError::domain(format!(
                "matrix with dims {:?} needs {} entries, found {}",
                self.dims,
                d * d,
                self.entries.len()
            )));
        }
        Ok(Mat::from_fn(d, d, |i, j| {
            let [re, im] = self.entries[i * d + j];
            C64::new(re, im)
        }))
    }

    /// Rectangular matrices (isometries, unitaries) keep `[rows, cols]` in
    /// `dims`.
    pub fn rect(m: &Mat) -> Self {
        let mut s = Self::new(&[m.nrows(), m.ncols()], m);
        s.dims = vec![m.nrows(), m.ncols()];
        s
    }

    pub fn to_rect(&self) -> Result<Mat, CliError> {
        let [r, c] = self.dims[..] else {
            return Err(CliError::domain("a rectangular matrix needs dims [rows, cols]"));
        };
        if self.entries.len() != r * c {
            return Err(CliError::domain(format!("{r}×{c} matrix needs {} entries", r * c)));
        }
        Ok(Mat::from_fn(r, c, |i, j| {
            let [re, im] = self.entries[i * c + j];
            C64::new(re, im)
        }))
    }
}

fn pair(p: SystemPair) -> [usize; 2] {
    [p.in_dim, p.out_dim]
}

fn sys(p: [usize; 2]) -> SystemPair {
    SystemPair::new(p[0], p[1])
}

fn check_dims(what: &str, m: &MatrixJson, want: &[usize]) -> Result<(), CliError> {
    let got: usize = m.dims.iter().product();
    let need: usize = want.iter().product();
    if got != need {
        return Err(CliError::domain(format!("{what}: matrix dims {:?} do not match {want:?}", m.dims)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub sys: [usize; 2],
    pub choi: MatrixJson,
}

impl ChannelJson {
    pub fn new(n: &ChannelChoi) -> Self {
        Self { sys: pair(n.sys), choi: MatrixJson::new(&[n.sys.in_dim, n.sys.out_dim], n.matrix()) }
    }

    /// Parses without checking CPTP; callers validate where it matters.
    pub fn to_channel(&self) -> Result<ChannelChoi, CliError> {
        check_dims("channel", &self.choi, &self.sys)?;
        Ok(ChannelChoi::new(sys(self.sys), self.choi.to_mat()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperChoiJson {
    #[serde(rename = "sysA")]
    pub sys_a: [usize; 2],
    #[serde(rename = "sysB")]
    pub sys_b: [usize; 2],
    pub choi: MatrixJson,
}

impl SuperChoiJson {
    pub fn new(t: &SuperChoi) -> Self {
        Self { sys_a: pair(t.sys_a), sys_b: pair(t.sys_b), choi: MatrixJson::new(&t.dims(), t.matrix()) }
    }

    pub fn to_superchoi(&self) -> Result<SuperChoi, CliError> {
        let d = [self.sys_a[0], self.sys_a[1], self.sys_b[0], self.sys_b[1]];
        check_dims("superchannel", &self.choi, &d)?;
        Ok(SuperChoi::new(sys(self.sys_a), sys(self.sys_b), self.choi.to_mat()?)?)
    }
}

/// Matrix object plus the comb's slot and global systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombJson {
    pub dims: Vec<usize>,
    pub entries: Vec<[f64; 2]>,
    pub teeth: Vec<[usize; 2]>,
    pub io: [usize; 2],
}

impl CombJson {
    pub fn new(c: &CombChoi) -> Self {
        let m = MatrixJson::new(&c.dims(), c.matrix());
        Self { dims: m.dims, entries: m.entries, teeth: c.teeth.iter().map(|&t| pair(t)).collect(), io: pair(c.io) }
    }

    pub fn to_comb(&self) -> Result<CombChoi, CliError> {
        let m = MatrixJson { dims: self.dims.clone(), entries: self.entries.clone() };
        let teeth: Vec<SystemPair> = self.teeth.iter().map(|&t| sys(t)).collect();
        let want = dynres_core::comb::comb_dims(sys(self.io), &teeth);
        check_dims("comb", &m, &want)?;
        Ok(CombChoi::new(sys(self.io), teeth, m.to_mat()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationJson {
    #[serde(rename = "sysA")]
    pub sys_a: [usize; 2],
    #[serde(rename = "sysB")]
    pub sys_b: [usize; 2],
    pub env_dim: usize,
    /// `V: B₀ → E ⊗ A₀`.
    pub isometry: MatrixJson,
    /// `E ⊗ A₁ → B₁`.
    pub post: ChannelJson,
}

impl RealizationJson {
    pub fn new(r: &Realization) -> Self {
        Self {
            sys_a: pair(r.sys_a),
            sys_b: pair(r.sys_b),
            env_dim: r.env_dim,
            isometry: MatrixJson::rect(&r.isometry),
            post: ChannelJson::new(&r.post),
        }
    }

    pub fn to_realization(&self) -> Result<Realization, CliError> {
        let isometry = self.isometry.to_rect()?;
        let (a, b) = (sys(self.sys_a), sys(self.sys_b));
        if isometry.nrows() != self.env_dim * a.in_dim || isometry.ncols() != b.in_dim {
            return Err(CliError::domain("isometry shape does not match env_dim · |A₀| × |B₀|"));
        }
        let post = self.post.to_channel()?;
        if post.sys != SystemPair::new(self.env_dim * a.out_dim, b.out_dim) {
            return Err(CliError::domain("post-processing channel must map E ⊗ A₁ to B₁"));
        }
        Ok(Realization { sys_a: a, sys_b: b, env_dim: self.env_dim, isometry, post })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepJson {
    pub rep: String,
    #[serde(rename = "sysA")]
    pub sys_a: [usize; 2],
    #[serde(rename = "sysB")]
    pub sys_b: [usize; 2],
    pub matrix: MatrixJson,
}

impl RepJson {
    pub fn new(r: &RepMatrix) -> Self {
        let rep = match r.rep {
            Rep::P => "p",
            Rep::Q => "q",
            Rep::R => "r",
        };
        Self {
            rep: rep.into(),
            sys_a: pair(r.sys_a),
            sys_b: pair(r.sys_b),
            matrix: MatrixJson::new(r.matrix.dims(), r.matrix.matrix()),
        }
    }
}

/// Which factors of a system party β holds: explicit factor indices or the
/// whole system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartySpec {
    Indices(Vec<usize>),
    Named(String),
}

/// `{"theory": "ppt", "bipartition": {"A0": [..], ..}, "factors": {"A0": [2, 2], ..}}`.
///
/// Channel-level commands also accept the keys `in` and `out`. Systems that
/// are not named are held by α; systems without `factors` are one factor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TheoryJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theory: Option<String>,
    #[serde(default)]
    pub bipartition: BTreeMap<String, PartySpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub factors: BTreeMap<String, Vec<usize>>,
}

impl TheoryJson {
    /// Reads either a full theory object or a bare bipartition map (which
    /// may carry its own `"factors"` entry).
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::domain(format!("bipartition: {e}")))?;
        let full = v.get("theory").is_some() || v.get("bipartition").is_some();
        if full {
            return serde_json::from_value(v).map_err(|e| CliError::domain(format!("theory: {e}")));
        }
        let serde_json::Value::Object(mut map) = v else {
            return Err(CliError::domain("bipartition must be a JSON object"));
        };
        let factors = match map.remove("factors") {
            Some(f) => serde_json::from_value(f).map_err(|e| CliError::domain(format!("factors: {e}")))?,
            None => BTreeMap::new(),
        };
        let bipartition = serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| CliError::domain(format!("bipartition: {e}")))?;
        Ok(Self { theory: None, bipartition, factors })
    }

    pub fn kind(&self) -> Result<Option<TheoryKind>, CliError> {
        self.theory.as_deref().map(parse_kind).transpose()
    }

    /// Factorization of a system of dimension `dim` named by the first key
    /// of `keys` present in the object.
    pub fn factorization(&self, keys: &[&str], dim: usize) -> Result<Factorization, CliError> {
        let dims = keys.iter().find_map(|k| self.factors.get(*k)).cloned().unwrap_or_else(|| vec![dim]);
        if dims.iter().product::<usize>() != dim {
            return Err(CliError::domain(format!("factors {dims:?} of {} do not multiply to {dim}", keys[0])));
        }
        let beta = match keys.iter().find_map(|k| self.bipartition.get(*k)) {
            None => Vec::new(),
            Some(PartySpec::Indices(ix)) => ix.clone(),
            Some(PartySpec::Named(s)) => match s.as_str() {
                "alpha" => Vec::new(),
                "beta" => (0..dims.len()).collect(),
                other => return Err(CliError::domain(format!("{}: unknown party {other:?}", keys[0]))),
            },
        };
        Ok(Factorization { dims, beta })
    }

    pub fn parties(&self, a: SystemPair, b: SystemPair) -> Result<Parties, CliError> {
        Ok(Parties {
            a0: self.factorization(&["A0"], a.in_dim)?,
            a1: self.factorization(&["A1"], a.out_dim)?,
            b0: self.factorization(&["B0"], b.in_dim)?,
            b1: self.factorization(&["B1"], b.out_dim)?,
        })
    }

    /// Bipartition of a lone channel, from `in`/`out` or the given side.
    pub fn channel_parties(&self, s: SystemPair, side: [&str; 2]) -> Result<ChannelParties, CliError> {
        Ok(ChannelParties {
            input: self.factorization(&["in", side[0]], s.in_dim)?,
            output: self.factorization(&["out", side[1]], s.out_dim)?,
        })
    }
}

pub fn parse_kind(s: &str) -> Result<TheoryKind, CliError> {
    match s {
        "all" => Ok(TheoryKind::All),
        "ppt" => Ok(TheoryKind::Ppt),
        other => Err(CliError::domain(format!("unknown theory {other:?}"))),
    }
}

/// Serialized form of a validated theory, with every system spelled out.
pub fn theory_json(t: &TheorySpec) -> TheoryJson {
    let mut out = TheoryJson { theory: Some(t.name().into()), ..TheoryJson::default() };
    if let Some(p) = &t.parties {
        for (k, f) in [("A0", &p.a0), ("A1", &p.a1), ("B0", &p.b0), ("B1", &p.b1)] {
            out.bipartition.insert(k.into(), PartySpec::Indices(f.beta.clone()));
            out.factors.insert(k.into(), f.dims.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationJson {
    pub pass: bool,
    pub min_eig: f64,
    pub marginal_error: f64,
    pub notes: Vec<String>,
    /// Present when a theory was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pt_min_eig: Option<f64>,
}

impl ValidationJson {
    pub fn new(v: &ValidationReport) -> Self {
        Self {
            pass: v.valid,
            min_eig: v.min_eig,
            marginal_error: v.marginal_error,
            notes: v.notes.clone(),
            free: None,
            pt_min_eig: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsJson {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub gap_tol: f64,
}

impl From<&IpmSettings> for SettingsJson {
    fn from(s: &IpmSettings) -> Self {
        Self { max_iter: s.max_iter, feas_tol: s.feas_tol, gap_tol: s.gap_tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueJson {
    Real(Vec<f64>),
    Herm(MatrixJson),
}

fn value_json(v: &Value) -> ValueJson {
    match v {
        Value::Real(x) => ValueJson::Real(x.clone()),
        Value::Herm(m) => ValueJson::Herm(MatrixJson::new(&[m.nrows()], m)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReportJson {
    pub status: String,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub violation: f64,
    pub iterations: usize,
    pub settings: SettingsJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<BTreeMap<String, ValueJson>>,
}

pub fn status_name(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::Unbounded => "unbounded",
        Status::MaxIterations => "max_iterations",
        Status::NumericalFailure => "numerical_failure",
    }
}

impl SolveReportJson {
    pub fn new(r: &SolveReport, with_values: bool) -> Self {
        Self {
            status: status_name(r.status).into(),
            primal: r.primal,
            dual: r.dual,
            gap: r.gap,
            violation: r.violation,
            iterations: r.iterations,
            settings: (&r.settings).into(),
            values: with_values.then(|| r.values.iter().map(|(k, v)| (k.clone(), value_json(v))).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundJson {
    pub value: f64,
    /// `|primal − dual|` between the two separate solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primal: Option<SolveReportJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual: Option<SolveReportJson>,
}

impl BoundJson {
    pub fn new(b: &Bound, with_values: bool) -> Self {
        Self {
            value: b.value,
            gap: b.gap(),
            primal: b.primal.as_ref().map(|r| SolveReportJson::new(r, with_values)),
            dual: b.dual.as_ref().map(|r| SolveReportJson::new(r, with_values)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiamondJson {
    pub value: f64,
    pub channel_form: f64,
    pub disagreement: f64,
    pub reports: Vec<SolveReportJson>,
}

impl DiamondJson {
    pub fn new(d: &DiamondReport, with_values: bool) -> Self {
        Self {
            value: d.value,
            channel_form: d.channel_form,
            disagreement: d.disagreement(),
            reports: d.reports.iter().map(|r| SolveReportJson::new(r, with_values)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntryJson {
    pub d: usize,
    /// `null` when the dimension was skipped.
    pub distance: Option<f64>,
    pub feasible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolJson {
    pub task: String,
    pub n: usize,
    pub eps: f64,
    /// Bits; `null` when no scanned dimension is feasible.
    pub value: Option<f64>,
    pub dimension: Option<usize>,
    pub table: Vec<ScanEntryJson>,
    pub notes: Vec<String>,
}

impl ProtocolJson {
    pub fn new(r: &ProtocolResult) -> Self {
        Self {
            task: match r.task {
                Task::Cost => "cost",
                Task::Distill => "distill",
            }
            .into(),
            n: r.n,
            eps: r.eps,
            value: r.value,
            dimension: r.dimension,
            table: r
                .table
                .iter()
                .map(|e| ScanEntryJson { d: e.d, distance: e.distance, feasible: e.feasible })
                .collect(),
            notes: r.notes.clone(),
        }
    }
}
