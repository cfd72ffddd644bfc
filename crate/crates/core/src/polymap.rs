//! Polynomial map germs `f: (Rⁿ,0) → (Rᵖ,0)` with exact symbolic
//! differentiation, and the first-order [`Jet`] of a map at a point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pairwise_sum};
use crate::pencil;
use crate::scalar::Real;

/// One monomial `c · x^e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term<T> {
    pub coeff: T,
    pub exponents: Vec<u32>,
}

impl<T: Real> Term<T> {
    fn eval(&self, x: &DVector<T>) -> T {
        let mut v = self.coeff;
        for (xi, &e) in x.iter().zip(&self.exponents) {
            if e > 0 {
                v *= xi.powi(e as i32);
            }
        }
        v
    }
}

/// A polynomial in `n` variables with terms sorted lexicographically by
/// exponent vector and like terms merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    terms: Vec<Term<T>>,
}

impl<T: Real> Polynomial<T> {
    fn new(mut terms: Vec<Term<T>>) -> Self {
        terms.sort_by(|a, b| a.exponents.cmp(&b.exponents));
        let mut merged: Vec<Term<T>> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.exponents == t.exponents => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != T::zero());
        Polynomial { terms: merged }
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &DVector<T>) -> T {
        let values: Vec<T> = self.terms.iter().map(|t| t.eval(x)).collect();
        pairwise_sum(&values)
    }

    fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exponents[var] > 0)
            .map(|t| {
                let mut exponents = t.exponents.clone();
                let e = exponents[var];
                exponents[var] -= 1;
                Term {
                    coeff: t.coeff * T::c(e as f64),
                    exponents,
                }
            })
            .collect();
        Polynomial::new(terms)
    }

    fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }
}

/// Wire format of a single term: `{"c": coefficient, "e": [exponents]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDocument {
    pub c: f64,
    pub e: Vec<u32>,
}

/// Wire format of a map:
/// `{"n":2,"p":2,"components":[[{"c":1,"e":[2,0]},{"c":-1,"e":[0,2]}],[{"c":2,"e":[1,1]}]]}`.
///
/// `name` is optional; `constant_zero` lists the components allowed to be
/// identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub n: usize,
    pub p: usize,
    pub components: Vec<Vec<TermDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constant_zero: Vec<usize>,
}

/// A validated polynomial map germ. Immutable after construction; the
/// Jacobian polynomials are differentiated once, up front.
#[derive(Debug, Clone)]
pub struct PolynomialMap<T> {
    n: usize,
    p: usize,
    components: Vec<Polynomial<T>>,
    partials: Vec<Vec<Polynomial<T>>>,
    name: Option<String>,
    constant_zero: Vec<usize>,
}

impl<T: Real> PolynomialMap<T> {
    /// Validates a map document: `2 ≤ p ≤ n`, exponent arity, no constant
    /// terms (so that `f(0) = 0`) and no unflagged zero components.
    pub fn from_document(doc: &MapDocument) -> Result<Self> {
        if doc.n < 2 {
            return Err(Error::input(
                "n",
                format!("input dimension must be >= 2, got {}", doc.n),
            ));
        }
        if doc.p < 2 {
            return Err(Error::input(
                "p",
                format!("output dimension must be >= 2, got {}", doc.p),
            ));
        }
        if doc.p > doc.n {
            return Err(Error::input(
                "p",
                format!(
                    "output dimension p = {} exceeds input dimension n = {}",
                    doc.p, doc.n
                ),
            ));
        }
        if doc.components.len() != doc.p {
            return Err(Error::input(
                "components",
                format!(
                    "expected {} components, found {}",
                    doc.p,
                    doc.components.len()
                ),
            ));
        }
        if let Some(&bad) = doc.constant_zero.iter().find(|&&i| i >= doc.p) {
            return Err(Error::input(
                "constant_zero",
                format!("component index {bad} out of range"),
            ));
        }
        let mut components = Vec::with_capacity(doc.p);
        for (i, comp) in doc.components.iter().enumerate() {
            let mut terms = Vec::with_capacity(comp.len());
            for (j, t) in comp.iter().enumerate() {
                if t.e.len() != doc.n {
                    return Err(Error::input(
                        format!("components[{i}][{j}].e"),
                        format!("expected {} exponents, found {}", doc.n, t.e.len()),
                    ));
                }
                if !t.c.is_finite() {
                    return Err(Error::input(
                        format!("components[{i}][{j}].c"),
                        "coefficient is not finite",
                    ));
                }
                if t.c != 0.0 && t.e.iter().all(|&e| e == 0) {
                    return Err(Error::input(
                        format!("components[{i}][{j}]"),
                        format!("f(0) ≠ 0: constant term {} in component {i}", t.c),
                    ));
                }
                terms.push(Term {
                    coeff: T::c(t.c),
                    exponents: t.e.clone(),
                });
            }
            let poly = Polynomial::new(terms);
            if poly.is_zero() && !doc.constant_zero.contains(&i) {
                return Err(Error::input(
                    format!("components[{i}]"),
                    "component is identically zero (list it in constant_zero to allow this)",
                ));
            }
            components.push(poly);
        }
        let partials = components
            .iter()
            .map(|c| (0..doc.n).map(|j| c.derivative(j)).collect())
            .collect();
        Ok(PolynomialMap {
            n: doc.n,
            p: doc.p,
            components,
            partials,
            name: doc.name.clone(),
            constant_zero: doc.constant_zero.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn components(&self) -> &[Polynomial<T>] {
        &self.components
    }

    pub fn degree(&self) -> u32 {
        self.components
            .iter()
            .map(|c| c.degree())
            .max()
            .unwrap_or(0)
    }

    /// Same map with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let scale = |p: &Polynomial<T>| Polynomial {
            terms: p
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * factor,
                    exponents: t.exponents.clone(),
                })
                .collect(),
        };
        PolynomialMap {
            n: self.n,
            p: self.p,
            components: self.components.iter().map(scale).collect(),
            partials: self
                .partials
                .iter()
                .map(|row| row.iter().map(scale).collect())
                .collect(),
            name: self.name.clone(),
            constant_zero: self.constant_zero.clone(),
        }
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            n: self.n,
            p: self.p,
            components: self
                .components
                .iter()
                .map(|c| {
                    c.terms
                        .iter()
                        .map(|t| TermDocument {
                            c: t.coeff.to_f64_lossy(),
                            e: t.exponents.clone(),
                        })
                        .collect()
                })
                .collect(),
            name: self.name.clone(),
            constant_zero: self.constant_zero.clone(),
        }
    }

    fn check_dim(&self, x: &DVector<T>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `f(x)`.
    pub fn eval(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x)?;
        Ok(DVector::from_iterator(
            self.p,
            self.components.iter().map(|c| c.eval(x)),
        ))
    }

    /// `Df_x`, entry `(i, j) = ∂f_i/∂x_j`.
    pub fn jacobian(&self, x: &DVector<T>) -> Result<DMatrix<T>> {
        self.check_dim(x)?;
        Ok(DMatrix::from_fn(self.p, self.n, |i, j| {
            self.partials[i][j].eval(x)
        }))
    }

    /// `∂(Df)/∂x_var` at `x`.
    pub fn jacobian_derivative(&self, x: &DVector<T>, var: usize) -> Result<DMatrix<T>> {
        self.check_dim(x)?;
        if var >= self.n {
            return Err(Error::input(
                "var",
                format!("variable index {var} out of range"),
            ));
        }
        Ok(DMatrix::from_fn(self.p, self.n, |i, j| {
            self.partials[i][j].derivative(var).eval(x)
        }))
    }

    /// Default floor below which `Φ` is treated as undefined: `1e-9·(1+‖x‖)`.
    pub fn default_floor(x: &DVector<T>) -> T {
        T::c(1e-9) * (T::one() + x.norm())
    }

    /// First-order data at `x`. Fails with [`Error::OnZeroSet`] when
    /// `‖f(x)‖ ≤ floor` (default [`PolynomialMap::default_floor`]).
    pub fn jet(&self, x: &DVector<T>, floor: Option<T>) -> Result<Jet<T>> {
        let fx = self.eval(x)?;
        let jac = self.jacobian(x)?;
        Jet::assemble(
            x.clone(),
            fx,
            jac,
            floor.unwrap_or_else(|| Self::default_floor(x)),
        )
    }
}

/// Parses and validates a map document.
pub fn parse_map<T: Real>(text: &str) -> Result<PolynomialMap<T>> {
    let doc: MapDocument = serde_json::from_str(text).map_err(|e| {
        Error::input(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    PolynomialMap::from_document(&doc)
}

/// First-order data of a map at a point off the zero set.
///
/// `h = ‖f‖²`, `ℌ = ‖x‖²`, `Φ = f/‖f‖` and the spherefication
/// `𝔉 = ‖x‖Φ`, together with its differential and the augmented Jacobian
/// of `x ↦ (f(x), ‖x‖²)`.
#[derive(Debug, Clone)]
pub struct Jet<T: Real> {
    pub x: DVector<T>,
    pub fx: DVector<T>,
    pub jac: DMatrix<T>,
    pub h: T,
    pub grad_h: DVector<T>,
    pub sq_radius: T,
    pub grad_sq_radius: DVector<T>,
    pub phi: DVector<T>,
    pub spherified: DVector<T>,
    pub d_spherified: DMatrix<T>,
    pub augmented: DMatrix<T>,
    pub x_norm: T,
    pub f_norm: T,
}

impl<T: Real> Jet<T> {
    /// Builds a jet from raw values; `d_spherified` is assembled column by
    /// column from the closed-form spherefication differential.
    pub fn assemble(x: DVector<T>, fx: DVector<T>, jac: DMatrix<T>, floor: T) -> Result<Self> {
        let n = x.len();
        let p = fx.len();
        if jac.nrows() != p || jac.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: p * n,
                found: jac.nrows() * jac.ncols(),
            });
        }
        let f_norm = fx.norm();
        if f_norm <= floor {
            return Err(Error::OnZeroSet {
                norm_f: f_norm.to_f64_lossy(),
                floor: floor.to_f64_lossy(),
            });
        }
        let x_norm = x.norm();
        let two = T::c(2.0);
        let grad_h = jac.transpose() * &fx * two;
        let phi = &fx / f_norm;
        let spherified = &phi * x_norm;
        let mut d_spherified = DMatrix::zeros(p, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = T::one();
            let col = pencil::apply_differential(&x, x_norm, &fx, f_norm, &spherified, &jac, &e);
            d_spherified.set_column(j, &col);
        }
        let mut augmented = DMatrix::zeros(p + 1, n);
        augmented.rows_mut(0, p).copy_from(&jac);
        for j in 0..n {
            augmented[(p, j)] = two * x[j];
        }
        Ok(Jet {
            h: f_norm * f_norm,
            grad_sq_radius: &x * two,
            sq_radius: x_norm * x_norm,
            x,
            fx,
            jac,
            grad_h,
            phi,
            spherified,
            d_spherified,
            augmented,
            x_norm,
            f_norm,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.fx.len()
    }

    /// Tolerance scale `max(1, ‖J‖_F, ‖x‖, 1/‖f(x)‖)`.
    pub fn scale(&self) -> T {
        let mut s = T::one();
        for v in [self.jac.norm(), self.x_norm, T::one() / self.f_norm] {
            if v > s {
                s = v;
            }
        }
        s
    }

    /// Diagnostic dump with field names `x, fx, J, grad_h, grad_H, phi, Fx, DF, aug`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "x": linalg::vec_f64(&self.x),
            "fx": linalg::vec_f64(&self.fx),
            "J": linalg::matrix_rows_f64(&self.jac),
            "grad_h": linalg::vec_f64(&self.grad_h),
            "grad_H": linalg::vec_f64(&self.grad_sq_radius),
            "phi": linalg::vec_f64(&self.phi),
            "Fx": linalg::vec_f64(&self.spherified),
            "DF": linalg::matrix_rows_f64(&self.d_spherified),
            "aug": linalg::matrix_rows_f64(&self.augmented),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn eval_square_map() {
        let f = catalog::square::<f64>();
        assert_eq!(f.eval(&v(&[1.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(f.eval(&v(&[1.0, 1.0])).unwrap(), v(&[0.0, 2.0]));
    }

    #[test]
    fn eval_nondreg_map() {
        let f = catalog::nondreg_4_3::<f64>();
        assert_eq!(
            f.eval(&v(&[1.0, 1.0, 1.0, 1.0])).unwrap(),
            v(&[0.0, 1.0, 1.0])
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let f = catalog::square::<f64>();
        assert!(matches!(
            f.eval(&v(&[1.0, 0.0, 0.0])),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
        assert!(f.jacobian(&v(&[1.0])).is_err());
    }

    #[test]
    fn jacobian_of_square_map() {
        let f = catalog::square::<f64>();
        let j = f.jacobian(&v(&[1.0, 1.0])).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[2.0, -2.0, 2.0, 2.0]));
    }

    #[test]
    fn jacobian_first_row_vanishes_on_critical_plane() {
        let f = catalog::nondreg_4_3::<f64>();
        let j = f.jacobian(&v(&[0.0, 0.0, 1.0, 1.0])).unwrap();
        for c in 0..4 {
            assert_eq!(j[(0, c)], 0.0);
        }
    }

    #[test]
    fn jet_of_square_map_at_diagonal() {
        let f = catalog::square::<f64>();
        let jet = f.jet(&v(&[1.0, 1.0]), None).unwrap();
        assert_eq!(jet.fx, v(&[0.0, 2.0]));
        assert_eq!(jet.grad_h, v(&[8.0, 8.0]));
        assert_eq!(jet.grad_sq_radius, v(&[2.0, 2.0]));
        assert_eq!(jet.phi, v(&[0.0, 1.0]));
        assert_relative_eq!(jet.spherified, v(&[0.0, 2f64.sqrt()]), epsilon = 1e-15);
        assert_relative_eq!(
            jet.spherified.norm_squared(),
            jet.sq_radius,
            epsilon = 1e-14
        );
    }

    #[test]
    fn jet_of_identity() {
        let f = catalog::identity_2::<f64>();
        let jet = f.jet(&v(&[3.0, 4.0]), None).unwrap();
        assert_eq!(jet.grad_h, v(&[6.0, 8.0]));
        assert_eq!(jet.grad_sq_radius, v(&[6.0, 8.0]));
        assert_relative_eq!(jet.phi, v(&[0.6, 0.8]), epsilon = 1e-15);
    }

    #[test]
    fn jet_refuses_zero_set() {
        let f = catalog::square::<f64>();
        assert!(matches!(
            f.jet(&v(&[0.0, 0.0]), None),
            Err(Error::OnZeroSet { .. })
        ));
        // Explicit floor above |f|.
        assert!(matches!(
            f.jet(&v(&[0.1, 0.0]), Some(0.5)),
            Err(Error::OnZeroSet { .. })
        ));
    }

    #[test]
    fn parse_reference_document() {
        let text = r#"{"n":2,"p":2,"components":[[{"c":1,"e":[2,0]},{"c":-1,"e":[0,2]}],[{"c":2,"e":[1,1]}]]}"#;
        let f: PolynomialMap<f64> = parse_map(text).unwrap();
        assert_eq!((f.n(), f.p()), (2, 2));
        let sq = catalog::square::<f64>();
        for x in [v(&[0.3, -0.7]), v(&[1.5, 2.0])] {
            assert_eq!(f.eval(&x).unwrap(), sq.eval(&x).unwrap());
        }
    }

    #[test]
    fn parse_rejects_wrong_arity() {
        let text = r#"{"n":2,"p":2,"components":[[{"c":1,"e":[2,0,1]}],[{"c":2,"e":[1,1]}]]}"#;
        match parse_map::<f64>(text) {
            Err(Error::Input { location, .. }) => assert_eq!(location, "components[0][0].e"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_constant_term() {
        let text = r#"{"n":2,"p":2,"components":[[{"c":1,"e":[0,0]},{"c":1,"e":[1,0]}],[{"c":2,"e":[1,1]}]]}"#;
        match parse_map::<f64>(text) {
            Err(Error::Input { message, .. }) => assert!(message.contains("f(0) ≠ 0")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_p_greater_than_n_and_unknown_fields() {
        let text = r#"{"n":2,"p":3,"components":[[{"c":1,"e":[1,0]}],[{"c":1,"e":[0,1]}],[{"c":1,"e":[1,1]}]]}"#;
        assert!(matches!(parse_map::<f64>(text), Err(Error::Input { .. })));
        let text = r#"{"n":2,"p":2,"q":1,"components":[[{"c":1,"e":[1,0]}],[{"c":1,"e":[0,1]}]]}"#;
        assert!(matches!(parse_map::<f64>(text), Err(Error::Input { .. })));
    }

    #[test]
    fn zero_component_needs_flag() {
        let text = r#"{"n":2,"p":2,"components":[[{"c":1,"e":[1,0]}],[{"c":1,"e":[0,1]},{"c":-1,"e":[0,1]}]]}"#;
        assert!(parse_map::<f64>(text).is_err());
        let text = r#"{"n":2,"p":2,"constant_zero":[1],"components":[[{"c":1,"e":[1,0]}],[]]}"#;
        assert!(parse_map::<f64>(text).is_ok());
    }

    #[test]
    fn document_round_trip() {
        let f = catalog::quadrics_3_2::<f64>();
        let text = serde_json::to_string(&f.to_document()).unwrap();
        let g: PolynomialMap<f64> = parse_map(&text).unwrap();
        assert_eq!(g.to_document(), f.to_document());
    }

    #[test]
    fn jet_json_has_expected_fields() {
        let f = catalog::square::<f64>();
        let dump = f.jet(&v(&[1.0, 0.5]), None).unwrap().to_json();
        let obj = dump.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["DF", "Fx", "J", "aug", "fx", "grad_H", "grad_h", "phi", "x"]
        );
    }

    #[test]
    fn single_precision_evaluation() {
        let f = catalog::square::<f32>();
        let jet = f.jet(&DVector::from_vec(vec![1.0f32, 1.0]), None).unwrap();
        assert_eq!(jet.grad_h, DVector::from_vec(vec![8.0f32, 8.0]));
    }
}
