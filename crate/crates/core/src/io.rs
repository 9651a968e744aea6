//! JSON round trip for tensor fields with bit-exact hexadecimal values.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainSpec, GridSpec, Mesh};
use crate::error::{Error, Result};
use crate::field::TensorField;
use crate::hexfloat::{format_hex, parse_hex};
use crate::sym::SymMat;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldFile {
    d: usize,
    domain: DomainSpec,
    grid: Vec<usize>,
    tag: String,
    /// Packed upper triangles, cell after cell.
    values: Vec<String>,
}

pub fn field_to_json(field: &TensorField) -> String {
    let file = FieldFile {
        d: field.dim(),
        domain: field.mesh.domain.clone(),
        grid: field.mesh.grid.shape.clone(),
        tag: field.tag.clone(),
        values: field
            .values
            .iter()
            .flat_map(|a| a.packed().iter().map(|v| format_hex(*v)))
            .collect(),
    };
    serde_json::to_string(&file).expect("field files contain only strings and integers")
}

pub fn field_from_json(text: &str) -> Result<TensorField> {
    let file: FieldFile = serde_json::from_str(text).map_err(json_error)?;
    if file.d != file.domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: file.domain.dim(),
            got: file.d,
        });
    }
    let mesh = Mesh::new(file.domain, GridSpec::new(file.grid))?;
    let packed = file.d * (file.d + 1) / 2;
    if file.values.len() != mesh.len() * packed {
        return Err(Error::DimensionMismatch {
            expected: mesh.len() * packed,
            got: file.values.len(),
        });
    }
    let nums = file.values.iter().map(|s| parse_hex(s)).collect::<Result<Vec<f64>>>()?;
    let values = nums
        .chunks(packed)
        .map(|c| SymMat::from_packed(file.d, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    TensorField::new(mesh, values, file.tag)
}

pub(crate) fn json_error(e: serde_json::Error) -> Error {
    Error::Parse(format!("{e} (line {}, column {})", e.line(), e.column()))
}
