//! Roots of the delayed characteristic equation
//! `det(z^{τ+1} I − z^τ Ā − Ā_d) = 0` through the companion linearization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{determinant, eigenvalues, CMatrix, RMatrix};

/// Buffer on the strict inequality `|z| < 1`.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CompanionForm {
    /// `[Ā 0 ⋯ 0 Ā_d; I 0 ⋯ 0 0; 0 I ⋯ 0 0; ⋯; 0 0 ⋯ I 0]`, size `n(τ+1)`.
    pub f: RMatrix,
    pub n: usize,
    pub tau: usize,
}

impl CompanionForm {
    pub fn a_bar(&self) -> RMatrix {
        self.f.block(0, 0, self.n, self.n)
    }

    pub fn a_dbar(&self) -> RMatrix {
        self.f.block(0, self.n * self.tau, self.n, self.n)
    }
}

pub fn build_companion(a_bar: &RMatrix, a_dbar: &RMatrix, tau: usize) -> Result<CompanionForm> {
    let n = a_bar.rows();
    if !a_bar.is_square() || a_dbar.shape() != (n, n) {
        return dim_err("Ā and Ā_d must be square of equal size");
    }
    if tau < 1 {
        return Err(Error::InvalidArgument("delay τ must be at least 1".into()));
    }
    let size = n * (tau + 1);
    let mut f = RMatrix::zeros(size, size);
    f.set_block(0, 0, a_bar);
    f.set_block(0, n * tau, a_dbar);
    for blk in 1..=tau {
        f.set_block(n * blk, n * (blk - 1), &RMatrix::identity(n));
    }
    Ok(CompanionForm { f, n, tau })
}

/// All `n(τ+1)` roots, as eigenvalues of the companion matrix.
pub fn delayed_spectrum(form: &CompanionForm) -> Result<Vec<Complex64>> {
    eigenvalues(&form.f)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub stable: bool,
    pub max_modulus: f64,
}

pub fn is_schur_stable(form: &CompanionForm) -> Result<Stability> {
    let max_modulus = delayed_spectrum(form)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Ok(Stability {
        stable: max_modulus < 1.0 - STABILITY_MARGIN,
        max_modulus,
    })
}

/// `|det(z^{τ+1} I − z^τ Ā − Ā_d)|`.
pub fn char_poly_residual(form: &CompanionForm, z: Complex64) -> f64 {
    let n = form.n;
    let zt = z.powu(form.tau as u32);
    let zt1 = zt * z;
    let a = form.a_bar();
    let ad = form.a_dbar();
    let m = CMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { zt1 } else { Complex64::new(0.0, 0.0) };
        id - zt * a[(i, j)] - ad[(i, j)]
    });
    determinant(&m).map(|d| d.norm()).unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub tau: usize,
    pub roots: Vec<Root>,
    pub max_modulus: f64,
    pub stable: bool,
}

pub fn spectrum_report(form: &CompanionForm) -> Result<SpectrumReport> {
    let mut roots: Vec<Root> = delayed_spectrum(form)?
        .into_iter()
        .map(|z| Root {
            re: z.re,
            im: z.im,
            modulus: z.norm(),
        })
        .collect();
    roots.sort_by(|a, b| b.modulus.total_cmp(&a.modulus).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
    let max_modulus = roots.first().map_or(0.0, |r| r.modulus);
    Ok(SpectrumReport {
        n: form.n,
        tau: form.tau,
        roots,
        max_modulus,
        stable: max_modulus < 1.0 - STABILITY_MARGIN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;
    use crate::rota_baxter::RotaBaxterOperator;
    use crate::smc::deform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn companion_layout() {
        let a = RMatrix::from_fn(2, 2, |i, j| (1 + i * 2 + j) as f64);
        let ad = RMatrix::from_fn(2, 2, |i, j| (10 + i * 2 + j) as f64);
        let f1 = build_companion(&a, &ad, 1).unwrap();
        assert_eq!(f1.f.shape(), (4, 4));
        assert_eq!(f1.f.block(0, 0, 2, 2), a);
        assert_eq!(f1.f.block(0, 2, 2, 2), ad);
        assert_eq!(f1.f.block(2, 0, 2, 2), RMatrix::identity(2));
        assert_eq!(f1.f.block(2, 2, 2, 2), RMatrix::zeros(2, 2));

        let f2 = build_companion(&a, &ad, 2).unwrap();
        assert_eq!(f2.f.shape(), (6, 6));
        assert_eq!(f2.f.block(2, 0, 2, 2), RMatrix::identity(2));
        assert_eq!(f2.f.block(4, 2, 2, 2), RMatrix::identity(2));
        assert_eq!(f2.f.block(0, 2, 2, 2), RMatrix::zeros(2, 2));
        assert_eq!(f2.a_dbar(), ad);
        assert!(build_companion(&a, &RMatrix::zeros(3, 3), 1).is_err());
    }

    #[test]
    fn scalar_examples() {
        let f = build_companion(&RMatrix::diag(&[0.5]), &RMatrix::zeros(1, 1), 1).unwrap();
        let r = sorted(delayed_spectrum(&f).unwrap());
        assert!((r[0] - c(0.0)).norm() < 1e-12 && (r[1] - c(0.5)).norm() < 1e-12);

        let (a, b) = (0.3, 0.1);
        let f = build_companion(&RMatrix::diag(&[a]), &RMatrix::diag(&[b]), 1).unwrap();
        let r = sorted(delayed_spectrum(&f).unwrap());
        let disc = (a * a + 4.0 * b).sqrt();
        assert!((r[0] - c((a - disc) / 2.0)).norm() < 1e-12);
        assert!((r[1] - c((a + disc) / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn reduced_reference_system_is_stable() {
        let def = deform(&examples::underactuated_system(), &RotaBaxterOperator::scalar(examples::LAMBDA)).unwrap();
        let f = build_companion(&def.a_bar, &def.a_dbar, 1).unwrap();
        let roots = delayed_spectrum(&f).unwrap();
        assert_eq!(roots.len(), 4);
        let st = is_schur_stable(&f).unwrap();
        assert!(st.stable);
        // differs from eig(Ā) = {0, −0.4}
        assert!(roots.iter().all(|z| (z - c(-0.4)).norm() > 1e-3));
        for z in roots {
            assert!(char_poly_residual(&f, z) < 1e-12);
        }
    }

    #[test]
    fn stability_boundaries() {
        let unstable = build_companion(&RMatrix::identity(2).scale(2.0), &RMatrix::zeros(2, 2), 1).unwrap();
        let s = is_schur_stable(&unstable).unwrap();
        assert!(!s.stable);
        assert!((s.max_modulus - 2.0).abs() < 1e-12);
        let edge = build_companion(&RMatrix::identity(2), &RMatrix::zeros(2, 2), 1).unwrap();
        assert!(!is_schur_stable(&edge).unwrap().stable);
    }

    #[test]
    fn residual_far_from_roots_is_dominated_by_leading_term() {
        let def = deform(&examples::underactuated_system(), &RotaBaxterOperator::scalar(examples::LAMBDA)).unwrap();
        let f = build_companion(&def.a_bar, &def.a_dbar, 1).unwrap();
        let r = char_poly_residual(&f, c(10.0));
        assert!((r / 1e4 - 1.0).abs() < 0.1);
    }

    #[test]
    fn delay_free_spectrum_pads_with_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(1..4);
            let tau = rng.gen_range(1..4);
            let a = RMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let f = build_companion(&a, &RMatrix::zeros(n, n), tau).unwrap();
            let got = delayed_spectrum(&f).unwrap();
            let mut want = eigenvalues(&a).unwrap();
            want.extend(std::iter::repeat_n(c(0.0), n * tau));
            // greedy multiset match; the zero cluster is a defective eigenvalue only when τ > 1
            let tol = 1e-8;
            let mut used = vec![false; got.len()];
            for w in want {
                let (k, d) = got
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| !used[*k])
                    .map(|(k, z)| (k, (z - w).norm()))
                    .min_by(|x, y| x.1.total_cmp(&y.1))
                    .unwrap();
                assert!(d < tol, "{w} unmatched ({d:e})");
                used[k] = true;
            }
            for z in got {
                if z.norm() > 1e-3 {
                    assert!(char_poly_residual(&f, z) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn report_json() {
        let f = build_companion(&RMatrix::diag(&[0.5]), &RMatrix::zeros(1, 1), 1).unwrap();
        let rep = spectrum_report(&f).unwrap();
        assert_eq!(rep.roots.len(), 2);
        assert!(rep.stable);
        let v = serde_json::to_value(&rep).unwrap();
        assert!(v["roots"][0]["modulus"].as_f64().unwrap() > 0.49);
        assert_eq!(v["stable"], serde_json::Value::Bool(true));
    }
}
