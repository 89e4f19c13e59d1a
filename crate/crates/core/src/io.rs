//! JSON encodings for everything the tools read and write.
//!
//! One convention repo-wide: a complex scalar is the two-element array
//! `[re, im]`, a matrix is a row-major nested array of such pairs, map
//! matrices act on column-stacked vectorizations.  Deserialization
//! funnels through the validating constructors, so a well-formed file
//! with incoherent content is still refused; the `_unchecked` model
//! loader relaxes only the certification step, not structure.

use crate::algebra::{AlgElement, AlgebraError, AlgebraSpec, MatPoint};
use crate::cauchy::{AsymptoticReport, CauchyError, CauchyModel};
use crate::cpmaps::{LinMap, MapError};
use crate::herglotz::{HerglotzData, HerglotzError, NevanlinnaData};
use crate::linalg::{c, CMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("matrix rows have unequal lengths")]
    Ragged,
    #[error("non-finite float in matrix data")]
    NonFinite,
    #[error("{0}")]
    Algebra(#[from] AlgebraError),
    #[error("{0}")]
    Map(#[from] MapError),
    #[error("{0}")]
    Model(#[from] CauchyError),
    #[error("{0}")]
    Herglotz(#[from] HerglotzError),
    #[error("bad shape: {0}")]
    Shape(String),
}

type JsonMat = Vec<Vec<[f64; 2]>>;

fn mat_to_json(m: &CMatrix) -> JsonMat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn mat_from_json(rows: &JsonMat) -> Result<CMatrix, IoError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(IoError::Ragged);
    }
    for row in rows {
        for &[re, im] in row {
            if !re.is_finite() || !im.is_finite() {
                return Err(IoError::NonFinite);
            }
        }
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
        c(rows[i][j][0], rows[i][j][1])
    }))
}

#[derive(Serialize, Deserialize)]
struct SpecJson {
    blocks: Vec<usize>,
}

impl SpecJson {
    fn of(spec: &AlgebraSpec) -> Self {
        SpecJson {
            blocks: spec.blocks().to_vec(),
        }
    }

    fn build(&self) -> Result<AlgebraSpec, IoError> {
        Ok(AlgebraSpec::new(self.blocks.clone())?)
    }
}

#[derive(Serialize, Deserialize)]
struct ElemJson {
    spec: SpecJson,
    data: JsonMat,
}

impl ElemJson {
    fn of(el: &AlgElement) -> Self {
        ElemJson {
            spec: SpecJson::of(el.spec()),
            data: mat_to_json(el.data()),
        }
    }

    fn build(&self) -> Result<AlgElement, IoError> {
        Ok(AlgElement::new(self.spec.build()?, mat_from_json(&self.data)?)?)
    }
}

#[derive(Serialize, Deserialize)]
struct PointJson {
    level: usize,
    grid: Vec<Vec<ElemJson>>,
}

#[derive(Serialize, Deserialize)]
struct FlagsJson {
    unital: bool,
    cp_verified: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    homomorphic_on: Option<Vec<ElemJson>>,
}

#[derive(Serialize, Deserialize)]
struct MapJson {
    dom: SpecJson,
    cod: SpecJson,
    matrix: JsonMat,
    flags: FlagsJson,
}

impl MapJson {
    fn of(map: &LinMap) -> Self {
        MapJson {
            dom: SpecJson::of(map.dom()),
            cod: SpecJson::of(map.cod()),
            matrix: mat_to_json(map.matrix()),
            flags: FlagsJson {
                unital: map.flags.unital,
                cp_verified: map.flags.cp_verified,
                homomorphic_on: map
                    .flags
                    .homomorphic_on
                    .as_ref()
                    .map(|gens| gens.iter().map(ElemJson::of).collect()),
            },
        }
    }

    fn build(&self) -> Result<LinMap, IoError> {
        let mut map = LinMap::from_matrix(
            self.dom.build()?,
            self.cod.build()?,
            mat_from_json(&self.matrix)?,
        )?;
        map.flags.unital = self.flags.unital;
        map.flags.cp_verified = self.flags.cp_verified;
        if let Some(gens) = &self.flags.homomorphic_on {
            let gens: Result<Vec<AlgElement>, IoError> =
                gens.iter().map(ElemJson::build).collect();
            map.flags.homomorphic_on = Some(gens?);
        }
        Ok(map)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    #[serde(rename = "B")]
    b: SpecJson,
    #[serde(rename = "M")]
    m: SpecJson,
    #[serde(rename = "A")]
    a: JsonMat,
    #[serde(rename = "E")]
    e: MapJson,
    psi: MapJson,
}

#[derive(Serialize, Deserialize)]
struct HerglotzJson {
    #[serde(rename = "T")]
    t: JsonMat,
    #[serde(rename = "L")]
    l: JsonMat,
    #[serde(rename = "V")]
    v: JsonMat,
    /// Target algebra; defaults to one full block of the vessel width.
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    b: Option<SpecJson>,
}

#[derive(Serialize, Deserialize)]
struct NevJson {
    #[serde(rename = "A")]
    a: JsonMat,
    #[serde(rename = "P")]
    p: JsonMat,
    #[serde(rename = "W")]
    w: JsonMat,
    #[serde(rename = "C")]
    c: JsonMat,
    is_cauchy: bool,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    b: Option<SpecJson>,
}

/// `{"vars":[...]}` with an optional expression, or a bare matrix array.
#[derive(Debug)]
pub struct ExprManifest {
    pub expr: Option<String>,
    pub vars: Vec<CMatrix>,
}

#[derive(Deserialize)]
struct ManifestJson {
    #[serde(default)]
    expr: Option<String>,
    vars: Vec<JsonMat>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ManifestForms {
    Tagged(ManifestJson),
    Bare(Vec<JsonMat>),
}

pub fn point_to_string(p: &MatPoint) -> String {
    let n = p.level();
    let grid: Vec<Vec<ElemJson>> = (0..n)
        .map(|i| (0..n).map(|j| ElemJson::of(&p.grid_cell(i, j))).collect())
        .collect();
    let doc = PointJson { level: n, grid };
    serde_json::to_string_pretty(&doc).expect("serialization is infallible")
}

pub fn point_from_str(text: &str) -> Result<MatPoint, IoError> {
    let doc: PointJson = serde_json::from_str(text)?;
    if doc.grid.len() != doc.level || doc.grid.iter().any(|row| row.len() != doc.level) {
        return Err(IoError::Shape(format!(
            "grid must be {n} x {n} rows of cells",
            n = doc.level
        )));
    }
    let mut cells = Vec::with_capacity(doc.level * doc.level);
    for row in &doc.grid {
        for cell in row {
            cells.push(cell.build()?);
        }
    }
    let spec = cells
        .first()
        .ok_or_else(|| IoError::Shape("empty grid".to_string()))?
        .spec()
        .clone();
    Ok(MatPoint::from_grid(spec, doc.level, cells)?)
}

fn model_doc(model: &CauchyModel) -> ModelJson {
    ModelJson {
        b: SpecJson::of(model.b()),
        m: SpecJson::of(model.m()),
        a: mat_to_json(model.a().data()),
        e: MapJson::of(model.e()),
        psi: MapJson::of(model.psi()),
    }
}

pub fn model_to_string(model: &CauchyModel) -> String {
    serde_json::to_string_pretty(&model_doc(model)).expect("serialization is infallible")
}

fn model_parts(text: &str) -> Result<(AlgElement, LinMap, LinMap), IoError> {
    let doc: ModelJson = serde_json::from_str(text)?;
    let b = doc.b.build()?;
    let m = doc.m.build()?;
    let e = doc.e.build()?;
    let psi = doc.psi.build()?;
    if e.dom() != &m || e.cod() != &b || psi.dom() != &b || psi.cod() != &m {
        return Err(IoError::Shape(
            "E must map M to B and psi must map B to M".to_string(),
        ));
    }
    let a = AlgElement::new(m, mat_from_json(&doc.a)?)?;
    Ok((a, e, psi))
}

/// Full validation and certification, as for a freshly built model.
pub fn model_from_str(text: &str) -> Result<CauchyModel, IoError> {
    let (a, e, psi) = model_parts(text)?;
    Ok(CauchyModel::new(a, e, psi)?)
}

/// Structural validation only; certification defects are recorded in the
/// certificate instead of refusing the load.
pub fn model_from_str_unchecked(text: &str) -> Result<CauchyModel, IoError> {
    let (a, e, psi) = model_parts(text)?;
    Ok(CauchyModel::new_unchecked(a, e, psi)?)
}

pub fn herglotz_to_string(data: &HerglotzData) -> String {
    let default_b = data.v().ncols() == data.b().total_dim() && data.b().blocks().len() == 1;
    let doc = HerglotzJson {
        t: mat_to_json(data.t().data()),
        l: mat_to_json(data.l()),
        v: mat_to_json(data.v()),
        b: if default_b {
            None
        } else {
            Some(SpecJson::of(data.b()))
        },
    };
    serde_json::to_string_pretty(&doc).expect("serialization is infallible")
}

pub fn herglotz_from_str(text: &str) -> Result<HerglotzData, IoError> {
    let doc: HerglotzJson = serde_json::from_str(text)?;
    let v = mat_from_json(&doc.v)?;
    let b = match &doc.b {
        Some(spec) => spec.build()?,
        None => AlgebraSpec::new(vec![v.ncols().max(1)])?,
    };
    let t = AlgElement::new(b.clone(), mat_from_json(&doc.t)?)?;
    Ok(HerglotzData::new(b, t, mat_from_json(&doc.l)?, v)?)
}

pub fn nev_to_string(data: &NevanlinnaData) -> String {
    let default_b = data.b.total_dim() == data.c.data().nrows() && data.b.blocks().len() == 1;
    let doc = NevJson {
        a: mat_to_json(&data.a),
        p: mat_to_json(&data.p),
        w: mat_to_json(&data.w),
        c: mat_to_json(data.c.data()),
        is_cauchy: data.is_cauchy,
        b: if default_b {
            None
        } else {
            Some(SpecJson::of(&data.b))
        },
    };
    serde_json::to_string_pretty(&doc).expect("serialization is infallible")
}

pub fn nev_from_str(text: &str) -> Result<NevanlinnaData, IoError> {
    let doc: NevJson = serde_json::from_str(text)?;
    let c_mat = mat_from_json(&doc.c)?;
    let b = match &doc.b {
        Some(spec) => spec.build()?,
        None => AlgebraSpec::new(vec![c_mat.nrows().max(1)])?,
    };
    let a = mat_from_json(&doc.a)?;
    let p = mat_from_json(&doc.p)?;
    let w = mat_from_json(&doc.w)?;
    let m = a.nrows();
    if a.ncols() != m || p.nrows() != m || w.nrows() != m || w.ncols() != b.total_dim() {
        return Err(IoError::Shape(
            "A must be m x m with P, W having m rows and W dim(B) columns".to_string(),
        ));
    }
    let c_el = AlgElement::new(b.clone(), c_mat)?;
    Ok(NevanlinnaData {
        b,
        a,
        p,
        w,
        c: c_el,
        is_cauchy: doc.is_cauchy,
    })
}

/// Variables for expression evaluation: `{"expr": ..., "vars": [...]}`
/// with `expr` optional, or a bare array of matrices.
pub fn expr_manifest_from_str(text: &str) -> Result<ExprManifest, IoError> {
    let doc: ManifestForms = serde_json::from_str(text)?;
    let (expr, raw) = match doc {
        ManifestForms::Tagged(m) => (m.expr, m.vars),
        ManifestForms::Bare(vars) => (None, vars),
    };
    let vars: Result<Vec<CMatrix>, IoError> = raw.iter().map(mat_from_json).collect();
    Ok(ExprManifest { expr, vars: vars? })
}

/// A bare matrix as row-major `[re, im]` pairs.
pub fn matrix_to_string(m: &CMatrix) -> String {
    serde_json::to_string_pretty(&mat_to_json(m)).expect("serialization is infallible")
}

pub fn matrix_from_str(text: &str) -> Result<CMatrix, IoError> {
    let rows: JsonMat = serde_json::from_str(text)?;
    mat_from_json(&rows)
}

/// Two columns, `s,residual`, one row per sampled scale.
pub fn asymptotics_csv(report: &AsymptoticReport) -> String {
    let mut out = String::from("s,residual\n");
    for (s, r) in report.s_values.iter().zip(&report.residuals) {
        out.push_str(&format!("{s},{r}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::sample_uhp;
    use crate::cauchy::{counterexample_model, sample_homomorphic_model};
    use crate::herglotz::{herglotz_from_classical, sample_data};
    use crate::linalg::operator_norm;

    #[test]
    fn point_round_trips_exactly() {
        let spec = AlgebraSpec::new(vec![2, 1]).unwrap();
        let z = sample_uhp(&spec, 2, 0.6, 7);
        let text = point_to_string(&z);
        let back = point_from_str(&text).unwrap();
        assert_eq!(back.spec(), z.spec());
        assert_eq!(back.level(), z.level());
        assert_eq!(back.flat(), z.flat());
    }

    #[test]
    fn point_grid_shape_is_enforced() {
        let spec = AlgebraSpec::scalar();
        let z = sample_uhp(&spec, 2, 0.6, 7);
        let text = point_to_string(&z).replace("\"level\": 2", "\"level\": 3");
        match point_from_str(&text) {
            Err(IoError::Shape(_)) => {}
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn model_round_trips_and_recertifies() {
        let model = counterexample_model();
        let text = model_to_string(&model);
        let back = model_from_str(&text).unwrap();
        assert!(back.homomorphic_certified());
        let z = sample_uhp(model.b(), 2, 0.8, 3);
        let orig = model.eval(&z).unwrap();
        let loaded = back.eval(&z).unwrap();
        assert!(operator_norm(&(orig.flat() - loaded.flat())) < 1e-14);
    }

    #[test]
    fn sampled_model_survives_the_file_format() {
        let model = sample_homomorphic_model(11);
        let back = model_from_str(&model_to_string(&model)).unwrap();
        let z = sample_uhp(model.b(), 1, 0.8, 5);
        let orig = model.eval(&z).unwrap();
        let loaded = back.eval(&z).unwrap();
        assert!(operator_norm(&(orig.flat() - loaded.flat())) < 1e-12);
    }

    #[test]
    fn broken_dilation_fails_strict_but_loads_unchecked() {
        let model = counterexample_model();
        let text = model_to_string(&model);
        // scale E by 1.1: structure intact, E o psi far from identity
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut doc = doc;
        let mat = doc["E"]["matrix"].as_array_mut().unwrap();
        for row in mat {
            for entry in row.as_array_mut().unwrap() {
                let re = entry[0].as_f64().unwrap();
                let im = entry[1].as_f64().unwrap();
                entry[0] = serde_json::json!(1.1 * re);
                entry[1] = serde_json::json!(1.1 * im);
            }
        }
        let tampered = serde_json::to_string(&doc).unwrap();
        match model_from_str(&tampered) {
            Err(IoError::Model(CauchyError::DilationFailed { .. })) => {}
            other => panic!("expected dilation failure, got {other:?}"),
        }
        let lenient = model_from_str_unchecked(&tampered).unwrap();
        assert!(!lenient.certificate().fully_certified());
        assert!(lenient.certificate().dilation_defect > 1e-3);
    }

    #[test]
    fn off_block_model_data_is_refused_in_both_modes() {
        let model = counterexample_model();
        let text = model_to_string(&model);
        // B is diagonal; psi's matrix keeps its shape, so corrupt A over
        // M = full(3) is not enough -- corrupt B's coupling instead by
        // claiming M is diagonal while A has the off-diagonal coupling.
        let tampered = text.replace(
            "\"M\": {\n    \"blocks\": [\n      3\n    ]\n  }",
            "\"M\": {\n    \"blocks\": [\n      1,\n      1,\n      1\n    ]\n  }",
        );
        assert!(tampered.contains("\"blocks\": [\n      1,\n      1,\n      1\n    ]"));
        assert!(model_from_str(&tampered).is_err());
        assert!(model_from_str_unchecked(&tampered).is_err());
    }

    #[test]
    fn truncated_json_is_a_json_error() {
        let text = model_to_string(&counterexample_model());
        let cut = &text[..text.len() / 2];
        match model_from_str(cut) {
            Err(IoError::Json(_)) => {}
            other => panic!("expected json error, got {other:?}"),
        }
    }

    #[test]
    fn classical_herglotz_data_omits_the_default_algebra() {
        let data = herglotz_from_classical(&[-1.0, 2.0], &[0.5, 0.5]).unwrap();
        let text = herglotz_to_string(&data);
        assert!(!text.contains("\"B\""));
        let back = herglotz_from_str(&text).unwrap();
        assert_eq!(back.b(), data.b());
        assert_eq!(back.l(), data.l());
        assert_eq!(back.v(), data.v());
        assert!(operator_norm(&(back.t().data() - data.t().data())) < 1e-15);
    }

    #[test]
    fn block_herglotz_data_round_trips_with_algebra() {
        let spec = AlgebraSpec::new(vec![2, 1]).unwrap();
        let data = sample_data(&spec, &[2, 1], &[0, 0], 0.5, 3).unwrap();
        let text = herglotz_to_string(&data);
        assert!(text.contains("\"B\""));
        let back = herglotz_from_str(&text).unwrap();
        assert_eq!(back.b(), data.b());
        assert_eq!(back.l(), data.l());
        assert_eq!(back.v(), data.v());
    }

    #[test]
    fn extraction_output_round_trips_through_json() {
        let data = sample_data(&AlgebraSpec::scalar(), &[5], &[0], 0.4, 9).unwrap();
        let nev = data.extract(1e-8, 1e-9).unwrap();
        let text = nev_to_string(&nev);
        let back = nev_from_str(&text).unwrap();
        assert_eq!(back.is_cauchy, nev.is_cauchy);
        let z = sample_uhp(&AlgebraSpec::scalar(), 2, 0.7, 4);
        let orig = nev.eval(&z).unwrap();
        let loaded = back.eval(&z).unwrap();
        assert!(operator_norm(&(orig.flat() - loaded.flat())) < 1e-13);
    }

    #[test]
    fn ragged_matrices_are_refused() {
        let text = r#"{"level":1,"grid":[[{"spec":{"blocks":[2]},"data":[[[0,0],[1,0]],[[2,0]]]}]]}"#;
        match point_from_str(text) {
            Err(IoError::Ragged) => {}
            other => panic!("expected ragged error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_accepts_both_forms() {
        let tagged = r#"{"expr":"Z1*Z1","vars":[[[[0,1]]]]}"#;
        let m = expr_manifest_from_str(tagged).unwrap();
        assert_eq!(m.expr.as_deref(), Some("Z1*Z1"));
        assert_eq!(m.vars.len(), 1);
        assert_eq!(m.vars[0][(0, 0)], c(0.0, 1.0));
        let bare = r#"[[[[0,1]]],[[[2,0]]]]"#;
        let m = expr_manifest_from_str(bare).unwrap();
        assert!(m.expr.is_none());
        assert_eq!(m.vars.len(), 2);
    }

    #[test]
    fn csv_has_one_row_per_scale() {
        let model = counterexample_model();
        let z = sample_uhp(model.b(), 1, 0.9, 2);
        let report = model.asymptotic_residual(&z, 1e2, 1e6, 5).unwrap();
        let csv = asymptotics_csv(&report);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "s,residual");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("100,"));
    }
}
