//! Rota-Baxter operators on square complex matrices.
//!
//! An operator `P` of weight `λ` satisfies
//! `P(x)P(y) = P(xP(y)) + P(P(x)y) + λP(xy)`. Two concrete families are
//! built in (scalar scaling `X ↦ −λX` and the projection onto the upper
//! triangle along the strictly lower triangle, weight −1); anything else is a
//! [`OperatorKind::GeneralLinear`] map on column-stacked vectorizations and is
//! only as good as [`rb_residual`] says it is.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{CMatrix, RMatrix};

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    /// `X ↦ −λX`, weight `λ`.
    ScalarScaling(Complex64),
    /// Keep the upper triangle (diagonal included), zero the strictly lower part. Weight −1.
    TriangularProjection,
    /// `n² × n²` matrix acting on `vec(X)` (columns stacked).
    GeneralLinear(CMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotaBaxterOperator {
    kind: OperatorKind,
    weight: Complex64,
}

impl RotaBaxterOperator {
    pub fn scalar(lambda: impl Into<Complex64>) -> Self {
        let lambda = lambda.into();
        Self {
            kind: OperatorKind::ScalarScaling(lambda),
            weight: lambda,
        }
    }

    pub fn triangular() -> Self {
        Self {
            kind: OperatorKind::TriangularProjection,
            weight: Complex64::new(-1.0, 0.0),
        }
    }

    /// Arbitrary linear map with a claimed weight. Nothing is verified here.
    pub fn general(map: CMatrix, weight: impl Into<Complex64>) -> Result<Self> {
        let n = (map.rows() as f64).sqrt().round() as usize;
        if !map.is_square() || n * n != map.rows() {
            return dim_err(format!(
                "general operator map must be n²×n², got {}x{}",
                map.rows(),
                map.cols()
            ));
        }
        Ok(Self {
            kind: OperatorKind::GeneralLinear(map),
            weight: weight.into(),
        })
    }

    /// Tabulates a linear map `f` on `n×n` matrices by its action on matrix units.
    pub fn general_from_fn(
        n: usize,
        weight: impl Into<Complex64>,
        f: impl Fn(&CMatrix) -> CMatrix,
    ) -> Result<Self> {
        let mut map = CMatrix::zeros(n * n, n * n);
        for j in 0..n {
            for i in 0..n {
                let col = j * n + i;
                let image = f(&CMatrix::unit(n, i, j));
                if image.shape() != (n, n) {
                    return dim_err("tabulated map must return an n×n matrix");
                }
                for (row, v) in image.vectorize().into_iter().enumerate() {
                    map[(row, col)] = v;
                }
            }
        }
        Self::general(map, weight)
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn weight(&self) -> Complex64 {
        self.weight
    }

    /// Fixed dimension for general maps; `None` for the dimension-free families.
    pub fn dimension(&self) -> Option<usize> {
        match &self.kind {
            OperatorKind::GeneralLinear(map) => Some((map.rows() as f64).sqrt().round() as usize),
            _ => None,
        }
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        match &self.kind {
            OperatorKind::ScalarScaling(lambda) => Ok(x.scale(-lambda)),
            OperatorKind::TriangularProjection => {
                if !x.is_square() {
                    return dim_err("triangular projection needs a square argument");
                }
                Ok(CMatrix::from_fn(x.rows(), x.cols(), |i, j| {
                    if i > j {
                        Complex64::new(0.0, 0.0)
                    } else {
                        x[(i, j)]
                    }
                }))
            }
            OperatorKind::GeneralLinear(map) => {
                let n = self.dimension().unwrap_or(0);
                if x.shape() != (n, n) {
                    return dim_err(format!(
                        "operator acts on {n}x{n} matrices, got {}x{}",
                        x.rows(),
                        x.cols()
                    ));
                }
                CMatrix::unvectorize(n, n, &map.mul_vec(&x.vectorize())?)
            }
        }
    }

    /// Applies the operator to a real matrix, requiring a real image.
    ///
    /// Scalar scaling acts entrywise and so also accepts rectangular input.
    pub fn apply_real(&self, x: &RMatrix) -> Result<RMatrix> {
        if let OperatorKind::ScalarScaling(lambda) = self.kind {
            if lambda.im != 0.0 {
                return Err(Error::InvalidArgument(
                    "complex scaling cannot deform a real system".into(),
                ));
            }
            return Ok(x.scale(-lambda.re));
        }
        self.apply(&x.to_complex())?
            .to_real(0.0)
            .ok_or_else(|| Error::InvalidArgument("operator maps a real matrix off the reals".into()))
    }

    fn check_dims(&self, xs: &[&CMatrix]) -> Result<()> {
        let n = match self.dimension() {
            Some(n) => n,
            None => xs[0].rows(),
        };
        if xs.iter().any(|x| x.shape() != (n, n)) {
            return dim_err(format!("all arguments must be {n}x{n}"));
        }
        Ok(())
    }
}

/// `‖P(x)P(y) − P(xP(y)) − P(P(x)y) − λP(xy)‖_F`.
pub fn rb_residual(p: &RotaBaxterOperator, x: &CMatrix, y: &CMatrix) -> Result<f64> {
    p.check_dims(&[x, y])?;
    let px = p.apply(x)?;
    let py = p.apply(y)?;
    let lhs = &px * &py;
    let rhs = &(&p.apply(&(x * &py))? + &p.apply(&(&px * y))?)
        + &p.apply(&(x * y))?.scale(p.weight);
    Ok((&lhs - &rhs).frobenius_norm())
}

/// `[x,y]_P = [P(x),y] + [x,P(y)] + λ[x,y]`.
pub fn induced_bracket(p: &RotaBaxterOperator, x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    p.check_dims(&[x, y])?;
    let a = p.apply(x)?.commutator(y)?;
    let b = x.commutator(&p.apply(y)?)?;
    let c = x.commutator(y)?.scale(p.weight);
    Ok(&(&a + &b) + &c)
}

/// Norm of the cyclic Jacobi sum of the induced bracket.
pub fn jacobi_residual(p: &RotaBaxterOperator, x: &CMatrix, y: &CMatrix, z: &CMatrix) -> Result<f64> {
    p.check_dims(&[x, y, z])?;
    let term = |a: &CMatrix, b: &CMatrix, c: &CMatrix| -> Result<CMatrix> {
        induced_bracket(p, &induced_bracket(p, a, b)?, c)
    };
    let sum = &(&term(x, y, z)? + &term(y, z, x)?) + &term(z, x, y)?;
    Ok(sum.frobenius_norm())
}

/// The weight-λ terms of the expanded Jacobi sum, grouped as
/// `G⁽¹⁾ = λΣ[[P(x),y],z]`, `G⁽²⁾ = λΣ[[x,y],P(z)]`, `H = λΣ[[x,P(y)],z]`
/// (cyclic sums over `(x,y,z)`).
#[derive(Clone, Debug, PartialEq)]
pub struct BracketWitness {
    pub g1: CMatrix,
    pub g2: CMatrix,
    pub h: CMatrix,
    pub sum: CMatrix,
}

pub fn group3_witness(
    p: &RotaBaxterOperator,
    x: &CMatrix,
    y: &CMatrix,
    z: &CMatrix,
) -> Result<BracketWitness> {
    p.check_dims(&[x, y, z])?;
    let n = x.rows();
    let cyclic = [(x, y, z), (y, z, x), (z, x, y)];
    let mut g1 = CMatrix::zeros(n, n);
    let mut g2 = CMatrix::zeros(n, n);
    let mut h = CMatrix::zeros(n, n);
    for (a, b, c) in cyclic {
        g1 = &g1 + &p.apply(a)?.commutator(b)?.commutator(c)?;
        g2 = &g2 + &a.commutator(b)?.commutator(&p.apply(c)?)?;
        h = &h + &a.commutator(&p.apply(b)?)?.commutator(c)?;
    }
    let (g1, g2, h) = (g1.scale(p.weight), g2.scale(p.weight), h.scale(p.weight));
    let sum = &(&g1 + &h) + &g2;
    Ok(BracketWitness { g1, g2, h, sum })
}

/// `‖P([x,y]_P) − [P(x),P(y)]‖_F`.
pub fn rb_comm_residual(p: &RotaBaxterOperator, x: &CMatrix, y: &CMatrix) -> Result<f64> {
    let lhs = p.apply(&induced_bracket(p, x, y)?)?;
    let rhs = p.apply(x)?.commutator(&p.apply(y)?)?;
    Ok((&lhs - &rhs).frobenius_norm())
}

/// `‖C·P(M) − P(C·M)‖_F` for square `C`, `M` of the operator's dimension.
pub fn commute_with_output(p: &RotaBaxterOperator, c: &CMatrix, m: &CMatrix) -> Result<f64> {
    p.check_dims(&[m])?;
    if c.shape() != m.shape() {
        return dim_err("output-map invariance is only defined for square C matching M");
    }
    let lhs = c.matmul(&p.apply(m)?)?;
    let rhs = p.apply(&c.matmul(m)?)?;
    Ok((&lhs - &rhs).frobenius_norm())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LieCompatReport {
    /// `P(g) ∈ span(basis)` for every basis element.
    pub closed_under_p: bool,
    /// Worst `‖P([X,Y]) − [X,P(Y)]‖_F` over ordered basis pairs.
    pub hyp_residual: f64,
    /// First violating ordered pair, as indices into the basis.
    pub witness: Option<(usize, usize)>,
}

/// Subspace-membership threshold for [`lie_compat_check`].
pub const SPAN_TOL: f64 = 1e-9;

/// Checks `P(𝔤) ⊂ 𝔤` and `P([X,Y]) = [X,P(Y)]` on a spanning set of 𝔤.
pub fn lie_compat_check(p: &RotaBaxterOperator, basis: &[CMatrix]) -> Result<LieCompatReport> {
    let Some(first) = basis.first() else {
        return Err(Error::EmptyBasis);
    };
    let refs: Vec<&CMatrix> = basis.iter().collect();
    p.check_dims(&refs)?;
    let n = first.rows();

    let ortho = orthonormalize(basis);
    if ortho.is_empty() {
        return Err(Error::EmptyBasis);
    }
    let mut closed = true;
    for g in basis {
        let v = p.apply(g)?.vectorize();
        let mut r = v.clone();
        for q in &ortho {
            let c: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        let resid = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = 1.0 + v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if resid > SPAN_TOL * scale {
            closed = false;
        }
    }

    let mut worst = 0.0_f64;
    let mut witness = None;
    for (i, x) in basis.iter().enumerate() {
        for (j, y) in basis.iter().enumerate() {
            let lhs = p.apply(&x.commutator(y)?)?;
            let rhs = x.commutator(&p.apply(y)?)?;
            let r = (&lhs - &rhs).frobenius_norm();
            debug_assert_eq!(lhs.rows(), n);
            worst = worst.max(r);
            let scale = 1.0 + x.frobenius_norm() * y.frobenius_norm();
            if witness.is_none() && r > SPAN_TOL * scale {
                witness = Some((i, j));
            }
        }
    }
    Ok(LieCompatReport {
        closed_under_p: closed,
        hyp_residual: worst,
        witness,
    })
}

fn orthonormalize(basis: &[CMatrix]) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for b in basis {
        let mut v = b.vectorize();
        let orig = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &out {
                let c: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 * orig.max(1.0) {
            out.push(v.into_iter().map(|z| z / norm).collect());
        }
    }
    out
}

/// Worst scaled residual of one identity over a sample suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub tolerance: f64,
    /// Largest `residual / scale` seen.
    pub worst: f64,
    pub samples: usize,
    pub passed: bool,
    /// Labels of the first failing arguments.
    pub witness: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub weight: [f64; 2],
    pub dimensions: Vec<usize>,
    pub properties: Vec<PropertyResult>,
    pub passed: bool,
}

/// Sample-suite tolerances: identity, Jacobi, bracket-commutation, grouped terms.
pub const RB_TOL: f64 = 1e-12;
pub const JACOBI_TOL: f64 = 1e-9;
pub const RB_COMM_TOL: f64 = 1e-10;
pub const GROUP3_TOL: f64 = 1e-10;

pub fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

struct Probe {
    label: String,
    m: CMatrix,
}

/// Runs the identity, Jacobi, bracket-commutation and grouped-term checks on
/// canonical probes (identity and matrix units) followed by random samples.
///
/// `tolerance_scale` multiplies every tolerance.
pub fn verify_operator(
    p: &RotaBaxterOperator,
    pairs: usize,
    triples: usize,
    seed: u64,
    tolerance_scale: f64,
) -> Result<VerificationReport> {
    let dims: Vec<usize> = match p.dimension() {
        Some(n) => vec![n],
        None => (2..=5).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rb = Acc::new("rota_baxter_identity", RB_TOL * tolerance_scale);
    let mut jac = Acc::new("jacobi", JACOBI_TOL * tolerance_scale);
    let mut comm = Acc::new("bracket_commutation", RB_COMM_TOL * tolerance_scale);
    let mut g3 = Acc::new("grouped_weight_terms", GROUP3_TOL * tolerance_scale);

    for &n in &dims {
        let mut probes = vec![Probe {
            label: "I".into(),
            m: CMatrix::identity(n),
        }];
        for i in 0..n {
            for j in 0..n {
                probes.push(Probe {
                    label: format!("e{}{}", i + 1, j + 1),
                    m: CMatrix::unit(n, i, j),
                });
            }
        }
        for a in &probes {
            for b in &probes {
                let scale = 1.0 + a.m.frobenius_norm() * b.m.frobenius_norm();
                rb.push(rb_residual(p, &a.m, &b.m)? / scale, || vec![a.label.clone(), b.label.clone()]);
                comm.push(rb_comm_residual(p, &a.m, &b.m)? / scale, || {
                    vec![a.label.clone(), b.label.clone()]
                });
            }
        }
        for k in 0..pairs {
            let x = random_complex(&mut rng, n);
            let y = random_complex(&mut rng, n);
            let scale = 1.0 + x.frobenius_norm() * y.frobenius_norm();
            let label = || vec![format!("random{n}#{k}.x"), format!("random{n}#{k}.y")];
            rb.push(rb_residual(p, &x, &y)? / scale, label);
            comm.push(rb_comm_residual(p, &x, &y)? / scale, label);
        }
        for k in 0..triples {
            let x = random_complex(&mut rng, n);
            let y = random_complex(&mut rng, n);
            let z = random_complex(&mut rng, n);
            let scale = 1.0 + x.frobenius_norm() * y.frobenius_norm() * z.frobenius_norm();
            let label = || {
                vec![
                    format!("random{n}#{k}.x"),
                    format!("random{n}#{k}.y"),
                    format!("random{n}#{k}.z"),
                ]
            };
            jac.push(jacobi_residual(p, &x, &y, &z)? / scale, label);
            g3.push(group3_witness(p, &x, &y, &z)?.sum.frobenius_norm() / scale, label);
        }
    }

    let properties: Vec<PropertyResult> = [rb, jac, comm, g3].into_iter().map(Acc::finish).collect();
    let passed = properties.iter().all(|r| r.passed);
    Ok(VerificationReport {
        weight: [p.weight.re, p.weight.im],
        dimensions: dims,
        properties,
        passed,
    })
}

struct Acc(PropertyResult);

impl Acc {
    fn new(name: &str, tolerance: f64) -> Self {
        Acc(PropertyResult {
            name: name.into(),
            tolerance,
            worst: 0.0,
            samples: 0,
            passed: true,
            witness: None,
        })
    }

    fn push(&mut self, scaled: f64, label: impl FnOnce() -> Vec<String>) {
        self.0.samples += 1;
        self.0.worst = self.0.worst.max(scaled);
        if !(scaled <= self.0.tolerance) && self.0.witness.is_none() {
            self.0.passed = false;
            self.0.witness = Some(label());
        }
    }

    fn finish(self) -> PropertyResult {
        self.0
    }
}

/// JSON form: `{"kind":"scalar","lambda":0.5}`, `{"kind":"triangular"}`,
/// `{"kind":"general","weight":w,"map":[[...]]}`. Complex numbers may be
/// written as `[re, im]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorSpec {
    Scalar { lambda: ComplexSpec },
    Triangular,
    General { weight: ComplexSpec, map: RMatrix },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Complex([f64; 2]),
}

impl From<ComplexSpec> for Complex64 {
    fn from(c: ComplexSpec) -> Self {
        match c {
            ComplexSpec::Real(r) => Complex64::new(r, 0.0),
            ComplexSpec::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for ComplexSpec {
    fn from(c: Complex64) -> Self {
        if c.im == 0.0 {
            ComplexSpec::Real(c.re)
        } else {
            ComplexSpec::Complex([c.re, c.im])
        }
    }
}

impl TryFrom<&OperatorSpec> for RotaBaxterOperator {
    type Error = Error;
    fn try_from(spec: &OperatorSpec) -> Result<Self> {
        match spec {
            OperatorSpec::Scalar { lambda } => Ok(Self::scalar(*lambda)),
            OperatorSpec::Triangular => Ok(Self::triangular()),
            OperatorSpec::General { weight, map } => Self::general(map.to_complex(), *weight),
        }
    }
}

impl RotaBaxterOperator {
    /// Inverse of the JSON mapping; complex general maps have no JSON form.
    pub fn to_spec(&self) -> Result<OperatorSpec> {
        Ok(match &self.kind {
            OperatorKind::ScalarScaling(l) => OperatorSpec::Scalar { lambda: (*l).into() },
            OperatorKind::TriangularProjection => OperatorSpec::Triangular,
            OperatorKind::GeneralLinear(map) => OperatorSpec::General {
                weight: self.weight.into(),
                map: map.to_real(0.0).ok_or_else(|| {
                    Error::InvalidArgument("complex operator map has no JSON form".into())
                })?,
            },
        })
    }
}
