//! Loading user systems: matrices as Matrix Market, force and forcing as JSON.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::io::load_coo_from_matrix_market_file;
use nalgebra_sparse::CooMatrix;
use serde::{Deserialize, Serialize};

use super::{MechSystem, PolyTerm, PolynomialForce};
use crate::error::{Error, Result};

pub const FORCE_SCHEMA_VERSION: u32 = 1;

/// JSON document describing `f_nl(x, x')` and the forcing shape.
///
/// State indices `0..n` address displacements, `n..2n` velocities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForceDocument {
    pub version: u32,
    pub n: usize,
    #[serde(default)]
    pub terms: Vec<PolyTerm>,
    pub f_ext: Vec<f64>,
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let coo: CooMatrix<f64> = load_coo_from_matrix_market_file(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {}", path.display(), e.message())))?;
    Ok(DMatrix::from(&coo))
}

pub fn parse_force_document(text: &str) -> Result<ForceDocument> {
    let doc: ForceDocument = serde_json::from_str(text)?;
    if doc.version != FORCE_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "force document version {} unsupported (expected {FORCE_SCHEMA_VERSION})",
            doc.version
        )));
    }
    if doc.f_ext.len() != doc.n {
        return Err(Error::Dimension(format!("f_ext has {} entries, n = {}", doc.f_ext.len(), doc.n)));
    }
    Ok(doc)
}

pub fn load_mech_system(
    m: impl AsRef<Path>,
    c: impl AsRef<Path>,
    k: impl AsRef<Path>,
    force: impl AsRef<Path>,
) -> Result<MechSystem> {
    let doc = parse_force_document(&std::fs::read_to_string(force)?)?;
    let f_nl = PolynomialForce::new(2 * doc.n, doc.n, doc.terms)?;
    MechSystem::new(
        load_matrix_market(m)?,
        load_matrix_market(c)?,
        load_matrix_market(k)?,
        f_nl,
        DVector::from_vec(doc.f_ext),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn symmetric_matrix_market_expands() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.mtx");
        let mut f = std::fs::File::create(&p).unwrap();
        writeln!(f, "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2.0\n2 1 -1.0\n2 2 2.0").unwrap();
        let k = load_matrix_market(&p).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
    }

    #[test]
    fn force_document_checks_version_and_length() {
        let ok = r#"{"version":1,"n":1,"terms":[{"coeff":1.0,"output":0,"factors":[[0,3]]}],"f_ext":[1.0]}"#;
        assert_eq!(parse_force_document(ok).unwrap().terms.len(), 1);
        let bad_version = r#"{"version":9,"n":1,"f_ext":[1.0]}"#;
        assert!(parse_force_document(bad_version).is_err());
        let bad_len = r#"{"version":1,"n":2,"f_ext":[1.0]}"#;
        assert!(parse_force_document(bad_len).is_err());
    }
}
