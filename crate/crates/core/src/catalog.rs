//! Built-in example maps with tuned run defaults.

use crate::error::{Error, Result};
use crate::polymap::{MapDocument, PolynomialMap, TermDocument};
use crate::scalar::Real;

/// A catalog map together with its default radii.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub document: MapDocument,
    pub epsilon: f64,
    pub delta: f64,
}

impl CatalogEntry {
    pub fn map<T: Real>(&self) -> PolynomialMap<T> {
        PolynomialMap::from_document(&self.document).expect("catalog maps are valid")
    }
}

fn term(c: f64, e: &[u32]) -> TermDocument {
    TermDocument { c, e: e.to_vec() }
}

fn doc(name: &str, n: usize, components: Vec<Vec<TermDocument>>) -> MapDocument {
    MapDocument {
        n,
        p: components.len(),
        components,
        name: Some(name.to_string()),
        constant_zero: Vec::new(),
    }
}

pub const NAMES: [&str; 5] = [
    "square",
    "nondreg-4-3",
    "quadrics-3-2",
    "identity-2",
    "projection-3-2",
];

pub fn entry(name: &str) -> Result<CatalogEntry> {
    let e = match name {
        // z ↦ z² as a real map.
        "square" => CatalogEntry {
            name: "square",
            description: "(x^2 - y^2, 2xy): complex squaring, isolated critical value",
            document: doc(
                "square",
                2,
                vec![
                    vec![term(1.0, &[2, 0]), term(-1.0, &[0, 2])],
                    vec![term(2.0, &[1, 1])],
                ],
            ),
            epsilon: 1.0,
            delta: 0.05,
        },
        "nondreg-4-3" => CatalogEntry {
            name: "nondreg-4-3",
            description: "(x^2 - y^2 z, y, w): linear discriminant, not d-regular",
            document: doc(
                "nondreg-4-3",
                4,
                vec![
                    vec![term(1.0, &[2, 0, 0, 0]), term(-1.0, &[0, 2, 1, 0])],
                    vec![term(1.0, &[0, 1, 0, 0])],
                    vec![term(1.0, &[0, 0, 0, 1])],
                ],
            ),
            epsilon: 0.5,
            delta: 0.005,
        },
        // (a_i, b_i) = (1,0), (-1,1), (-1,-1): pairwise independent, origin in the hull.
        "quadrics-3-2" => CatalogEntry {
            name: "quadrics-3-2",
            description: "(x1^2 - x2^2 - x3^2, x2^2 - x3^2): quadric family, d-regular",
            document: doc(
                "quadrics-3-2",
                3,
                vec![
                    vec![
                        term(1.0, &[2, 0, 0]),
                        term(-1.0, &[0, 2, 0]),
                        term(-1.0, &[0, 0, 2]),
                    ],
                    vec![term(1.0, &[0, 2, 0]), term(-1.0, &[0, 0, 2])],
                ],
            ),
            epsilon: 0.5,
            delta: 0.005,
        },
        "identity-2" => CatalogEntry {
            name: "identity-2",
            description: "(x, y): identity baseline",
            document: doc(
                "identity-2",
                2,
                vec![vec![term(1.0, &[1, 0])], vec![term(1.0, &[0, 1])]],
            ),
            epsilon: 1.0,
            delta: 0.05,
        },
        "projection-3-2" => CatalogEntry {
            name: "projection-3-2",
            description: "(x, y): linear projection R^3 -> R^2",
            document: doc(
                "projection-3-2",
                3,
                vec![vec![term(1.0, &[1, 0, 0])], vec![term(1.0, &[0, 1, 0])]],
            ),
            epsilon: 1.0,
            delta: 0.05,
        },
        other => {
            return Err(Error::input(
                "map",
                format!(
                    "unknown catalog map '{other}'; available: {}",
                    NAMES.join(", ")
                ),
            ))
        }
    };
    Ok(e)
}

pub fn square<T: Real>() -> PolynomialMap<T> {
    entry("square").unwrap().map()
}

pub fn nondreg_4_3<T: Real>() -> PolynomialMap<T> {
    entry("nondreg-4-3").unwrap().map()
}

pub fn quadrics_3_2<T: Real>() -> PolynomialMap<T> {
    entry("quadrics-3-2").unwrap().map()
}

pub fn identity_2<T: Real>() -> PolynomialMap<T> {
    entry("identity-2").unwrap().map()
}

pub fn projection_3_2<T: Real>() -> PolynomialMap<T> {
    entry("projection-3-2").unwrap().map()
}
