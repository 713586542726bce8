//! Extended-precision spectral kernels.
//!
//! Reduced correlation matrices of large-system ground states have occupation
//! eigenvalues exponentially close to 0 and 1, so fidelity and entropy
//! kernels lose all signal in double precision. This module provides a cyclic
//! Jacobi eigensolver over software big-floats plus the closed-form Uhlmann
//! fidelity and entropy evaluations that need it. Inputs and results stay in
//! `f64`; only the kernels run in extended precision.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;
const TWO64: f64 = 18_446_744_073_709_551_616.0;

/// Working mantissa bits for a decimal-digit budget, with guard bits.
pub fn bits_for_digits(digits: u32) -> usize {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize + 64
}

fn bf(x: f64, p: usize) -> BigFloat {
    BigFloat::from_f64(x, p)
}

fn bf_to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    match x.as_raw_parts() {
        Some((m, _n, s, e, _)) => {
            let len = m.len();
            let top = m[len - 1] as f64 / TWO64;
            let sub = if len > 1 {
                m[len - 2] as f64 / (TWO64 * TWO64)
            } else {
                0.0
            };
            let mag = (top + sub) * 2f64.powi(e);
            if s == Sign::Neg {
                -mag
            } else {
                mag
            }
        }
        None => f64::NAN,
    }
}

fn bf_lt(a: &BigFloat, b: &BigFloat) -> bool {
    matches!(a.partial_cmp(b), Some(std::cmp::Ordering::Less))
}

/// 10^-k at precision `p`.
fn pow10_neg(k: u32, p: usize) -> BigFloat {
    let ten = BigFloat::from_i8(10, p);
    let pk = ten.powi(k as usize, p, RM);
    BigFloat::from_i8(1, p).div(&pk, p, RM)
}

#[derive(Clone)]
struct MpC {
    re: BigFloat,
    im: BigFloat,
}

impl MpC {
    fn zero(p: usize) -> Self {
        Self {
            re: bf(0.0, p),
            im: bf(0.0, p),
        }
    }

    fn from_c64(z: Complex64, p: usize) -> Self {
        Self {
            re: bf(z.re, p),
            im: bf(z.im, p),
        }
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(bf_to_f64(&self.re), bf_to_f64(&self.im))
    }

    fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    fn add(&self, o: &Self, p: usize) -> Self {
        Self {
            re: self.re.add(&o.re, p, RM),
            im: self.im.add(&o.im, p, RM),
        }
    }

    fn sub(&self, o: &Self, p: usize) -> Self {
        Self {
            re: self.re.sub(&o.re, p, RM),
            im: self.im.sub(&o.im, p, RM),
        }
    }

    fn mul(&self, o: &Self, p: usize) -> Self {
        let rr = self.re.mul(&o.re, p, RM);
        let ii = self.im.mul(&o.im, p, RM);
        let ri = self.re.mul(&o.im, p, RM);
        let ir = self.im.mul(&o.re, p, RM);
        Self {
            re: rr.sub(&ii, p, RM),
            im: ri.add(&ir, p, RM),
        }
    }

    fn scale(&self, r: &BigFloat, p: usize) -> Self {
        Self {
            re: self.re.mul(r, p, RM),
            im: self.im.mul(r, p, RM),
        }
    }

    fn abs2(&self, p: usize) -> BigFloat {
        let a = self.re.mul(&self.re, p, RM);
        let b = self.im.mul(&self.im, p, RM);
        a.add(&b, p, RM)
    }
}

/// Dense complex matrix in extended precision, row-major.
pub struct MpMatrix {
    n: usize,
    d: Vec<MpC>,
    p: usize,
}

impl MpMatrix {
    pub fn from_c64(m: &DMatrix<Complex64>, digits: u32) -> Self {
        let p = bits_for_digits(digits);
        let n = m.nrows();
        assert_eq!(n, m.ncols());
        let d = (0..n * n)
            .map(|k| MpC::from_c64(m[(k / n, k % n)], p))
            .collect();
        Self { n, d, p }
    }

    fn zeros(n: usize, p: usize) -> Self {
        Self {
            n,
            d: vec![MpC::zero(p); n * n],
            p,
        }
    }

    fn identity(n: usize, p: usize) -> Self {
        let mut m = Self::zeros(n, p);
        for i in 0..n {
            m.d[i * n + i].re = BigFloat::from_i8(1, p);
        }
        m
    }

    fn at(&self, i: usize, j: usize) -> &MpC {
        &self.d[i * self.n + j]
    }

    pub fn to_c64(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.at(i, j).to_c64())
    }

    fn matmul(&self, o: &Self) -> Self {
        let (n, p) = (self.n, self.p);
        let mut out = Self::zeros(n, p);
        for i in 0..n {
            for j in 0..n {
                let mut acc = MpC::zero(p);
                for k in 0..n {
                    acc = acc.add(&self.at(i, k).mul(o.at(k, j), p), p);
                }
                out.d[i * n + j] = acc;
            }
        }
        out
    }

    fn adjoint(&self) -> Self {
        let (n, p) = (self.n, self.p);
        let mut out = Self::zeros(n, p);
        for i in 0..n {
            for j in 0..n {
                out.d[i * n + j] = self.at(j, i).conj();
            }
        }
        out
    }

    /// (A + A^dag) / 2
    fn hermitize(&mut self) {
        let (n, p) = (self.n, self.p);
        let half = bf(0.5, p);
        for i in 0..n {
            for j in i..n {
                let a = self.at(i, j).clone();
                let b = self.at(j, i).conj();
                let s = a.add(&b, p).scale(&half, p);
                self.d[j * n + i] = s.conj();
                self.d[i * n + j] = s;
            }
        }
    }

    fn frobenius(&self) -> BigFloat {
        let p = self.p;
        let mut acc = bf(0.0, p);
        for z in &self.d {
            acc = acc.add(&z.abs2(p), p, RM);
        }
        acc.sqrt(p, RM)
    }
}

/// Eigendecomposition of a Hermitian matrix in extended precision.
pub struct MpEigen {
    pub eigenvalues: Vec<BigFloat>,
    vectors: MpMatrix,
    p: usize,
}

impl MpEigen {
    pub fn eigenvalues_f64(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(bf_to_f64).collect()
    }

    pub fn eigenvectors_c64(&self) -> DMatrix<Complex64> {
        self.vectors.to_c64()
    }

    /// max_k || M v_k - lambda_k v_k ||_2, evaluated in extended precision.
    pub fn max_residual(&self, m: &MpMatrix) -> f64 {
        let (n, p) = (m.n, m.p);
        let mv = m.matmul(&self.vectors);
        let mut worst = bf(0.0, p);
        for k in 0..n {
            let mut acc = bf(0.0, p);
            for i in 0..n {
                let lam_v = self.vectors.at(i, k).scale(&self.eigenvalues[k], p);
                let r = mv.at(i, k).sub(&lam_v, p);
                acc = acc.add(&r.abs2(p), p, RM);
            }
            let norm = acc.sqrt(p, RM);
            if bf_lt(&worst, &norm) {
                worst = norm;
            }
        }
        bf_to_f64(&worst)
    }
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix. When `seed` is given
/// the matrix is pre-rotated by those (approximate) eigenvectors, which cuts
/// the sweep count to one or two for well-conditioned input.
pub fn jacobi_hermitian(
    m: &MpMatrix,
    seed: Option<&DMatrix<Complex64>>,
    digits: u32,
) -> Result<MpEigen> {
    let p = m.p;
    let n = m.n;
    let mut v = MpMatrix::identity(n, p);
    let mut a = MpMatrix {
        n,
        d: m.d.clone(),
        p,
    };
    if let Some(v0) = seed {
        let v0m = MpMatrix::from_c64(v0, digits);
        a = v0m.adjoint().matmul(&a).matmul(&v0m);
        v = v0m;
    }
    a.hermitize();

    let scale = a.frobenius();
    let tol = scale.mul(&pow10_neg(digits + 4, p), p, RM);
    let one = BigFloat::from_i8(1, p);
    let max_sweeps = 60;
    let mut converged = false;
    for _sweep in 0..max_sweeps {
        let mut rotated = false;
        for q in 1..n {
            for pp in 0..q {
                let apq = a.at(pp, q).clone();
                let m2 = apq.abs2(p);
                let mabs = m2.sqrt(p, RM);
                if !bf_lt(&tol, &mabs) {
                    continue;
                }
                rotated = true;
                // phase u = apq / |apq|, then a real 2x2 rotation
                let inv_m = one.div(&mabs, p, RM);
                let u = apq.scale(&inv_m, p);
                let app = a.at(pp, pp).re.clone();
                let aqq = a.at(q, q).re.clone();
                let two_m = mabs.add(&mabs, p, RM);
                let tau = aqq.sub(&app, p, RM).div(&two_m, p, RM);
                // t = sign(tau) / (|tau| + sqrt(1 + tau^2))
                let tau_abs = tau.abs();
                let denom = tau_abs
                    .mul(&tau_abs, p, RM)
                    .add(&one, p, RM)
                    .sqrt(p, RM)
                    .add(&tau_abs, p, RM);
                let mut t = one.div(&denom, p, RM);
                if tau.is_negative() {
                    t = t.neg();
                }
                let c = one
                    .div(&t.mul(&t, p, RM).add(&one, p, RM).sqrt(p, RM), p, RM);
                let s = t.mul(&c, p, RM);
                let su = u.scale(&s, p);
                let su_conj = su.conj();

                // columns: B[k,p] = c A[k,p] - conj(su) A[k,q]; B[k,q] = su A[k,p] + c A[k,q]
                for k in 0..n {
                    let akp = a.d[k * n + pp].clone();
                    let akq = a.d[k * n + q].clone();
                    a.d[k * n + pp] = akp.scale(&c, p).sub(&su_conj.mul(&akq, p), p);
                    a.d[k * n + q] = su.mul(&akp, p).add(&akq.scale(&c, p), p);
                }
                // rows: A'[p,k] = c B[p,k] - su B[q,k]; A'[q,k] = conj(su) B[p,k] + c B[q,k]
                for k in 0..n {
                    let apk = a.d[pp * n + k].clone();
                    let aqk = a.d[q * n + k].clone();
                    a.d[pp * n + k] = apk.scale(&c, p).sub(&su.mul(&aqk, p), p);
                    a.d[q * n + k] = su_conj.mul(&apk, p).add(&aqk.scale(&c, p), p);
                }
                // eigenvector accumulation: V <- V J
                for k in 0..n {
                    let vkp = v.d[k * n + pp].clone();
                    let vkq = v.d[k * n + q].clone();
                    v.d[k * n + pp] = vkp.scale(&c, p).sub(&su_conj.mul(&vkq, p), p);
                    v.d[k * n + q] = su.mul(&vkp, p).add(&vkq.scale(&c, p), p);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalState(format!(
            "Jacobi did not converge in {max_sweeps} sweeps at {digits} digits"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<BigFloat> = (0..n).map(|i| a.at(i, i).re.clone()).collect();
    order.sort_by(|&i, &j| {
        diag[i]
            .partial_cmp(&diag[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&i| diag[i].clone()).collect();
    let mut vs = MpMatrix::zeros(n, p);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vs.d[i * n + new_col] = v.at(i, old_col).clone();
        }
    }
    Ok(MpEigen {
        eigenvalues,
        vectors: vs,
        p,
    })
}

/// Double-precision Hermitian eigendecomposition, eigenvalues ascending.
pub fn eigh_f64(m: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = DVector::from_fn(n, |k, _| se.eigenvalues[order[k]]);
    let vecs = DMatrix::from_fn(n, n, |i, k| se.eigenvectors[(i, order[k])]);
    (vals, vecs)
}

fn check_occupation_range(vals: &[f64], tol: f64) -> Result<()> {
    for &l in vals {
        if !(-tol..=1.0 + tol).contains(&l) {
            return Err(Error::NumericalState(format!(
                "occupation eigenvalue {l} outside [0, 1] beyond tolerance {tol}"
            )));
        }
    }
    Ok(())
}

/// Uhlmann fidelity between two number-conserving Gaussian states given by
/// their correlation matrices, evaluated at a decimal-digit budget.
///
/// Uses the product form `F = det(1-C1) det(1-C2) det(1 + sqrt(sqrt(X1) X2
/// sqrt(X1)))^2` with `X = C (1-C)^{-1}`. Occupations are clamped away from
/// {0, 1} by `10^-(digits-20)/2`, which keeps the mixed scales representable
/// in the working precision and perturbs the result by at most O(n * clamp).
pub fn fidelity_mp(
    c1: &DMatrix<Complex64>,
    c2: &DMatrix<Complex64>,
    digits: u32,
) -> Result<f64> {
    let digits = digits.max(24);
    let n = c1.nrows();
    if c2.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} vs {} in fidelity",
            c2.nrows()
        )));
    }
    let p = bits_for_digits(digits);
    let one = BigFloat::from_i8(1, p);
    let eps = pow10_neg((digits - 20) / 2, p);
    let ceil = one.sub(&eps, p, RM);

    let mut spectra = Vec::with_capacity(2);
    let mut vecs = Vec::with_capacity(2);
    for c in [c1, c2] {
        let (vals, seed) = eigh_f64(c);
        check_occupation_range(vals.as_slice(), 1e-8)?;
        let eig = jacobi_hermitian(&MpMatrix::from_c64(c, digits), Some(&seed), digits)?;
        let clamped: Vec<BigFloat> = eig
            .eigenvalues
            .iter()
            .map(|l| {
                let mut l = l.clone();
                if bf_lt(&l, &eps) {
                    l = eps.clone();
                }
                if bf_lt(&ceil, &l) {
                    l = ceil.clone();
                }
                l
            })
            .collect();
        spectra.push(clamped);
        vecs.push(eig.vectors);
    }

    // sqrt(X1) = V1 diag(sqrt(l/(1-l))) V1^dag ; X2 = V2 diag(l/(1-l)) V2^dag
    let build = |v: &MpMatrix, lams: &[BigFloat], take_sqrt: bool| -> MpMatrix {
        let mut scaled = MpMatrix::zeros(n, p);
        for k in 0..n {
            let x = lams[k].div(&one.sub(&lams[k], p, RM), p, RM);
            let x = if take_sqrt { x.sqrt(p, RM) } else { x };
            for i in 0..n {
                scaled.d[i * n + k] = v.at(i, k).scale(&x, p);
            }
        }
        scaled.matmul(&v.adjoint())
    };
    let sq_x1 = build(&vecs[0], &spectra[0], true);
    let x2 = build(&vecs[1], &spectra[1], false);
    let mut mid = sq_x1.matmul(&x2).matmul(&sq_x1);
    mid.hermitize();
    let eig_m = jacobi_hermitian(&mid, None, digits)?;

    let mut f = BigFloat::from_i8(1, p);
    let zero = bf(0.0, p);
    for k in 0..n {
        let d1 = one.sub(&spectra[0][k], p, RM);
        let d2 = one.sub(&spectra[1][k], p, RM);
        let mu = if bf_lt(&eig_m.eigenvalues[k], &zero) {
            zero.clone()
        } else {
            eig_m.eigenvalues[k].clone()
        };
        let root = one.add(&mu.sqrt(p, RM), p, RM);
        f = f
            .mul(&d1, p, RM)
            .mul(&d2, p, RM)
            .mul(&root, p, RM)
            .mul(&root, p, RM);
    }
    let f = bf_to_f64(&f);
    if f > 1.0 + 1e-8 {
        return Err(Error::NumericalState(format!(
            "fidelity overshoot: {f}"
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Double-precision route of the same closed form. Adequate when occupations
/// stay a few ulps inside [0, 1].
pub fn fidelity_f64(c1: &DMatrix<Complex64>, c2: &DMatrix<Complex64>) -> Result<f64> {
    let n = c1.nrows();
    if c2.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} vs {} in fidelity",
            c2.nrows()
        )));
    }
    let eps = 1e-14;
    let mut sqx1 = DMatrix::<Complex64>::zeros(n, n);
    let mut x2 = DMatrix::<Complex64>::zeros(n, n);
    let mut log_d = 0.0;
    for (which, c) in [c1, c2].into_iter().enumerate() {
        let (vals, v) = eigh_f64(c);
        check_occupation_range(vals.as_slice(), 1e-8)?;
        let lam: Vec<f64> = vals.iter().map(|l| l.clamp(eps, 1.0 - eps)).collect();
        log_d += lam.iter().map(|l| (1.0 - l).ln()).sum::<f64>();
        let mut scaled = v.clone();
        for k in 0..n {
            let x = lam[k] / (1.0 - lam[k]);
            let x = if which == 0 { x.sqrt() } else { x };
            scaled.column_mut(k).scale_mut(x);
        }
        let m = &scaled * v.adjoint();
        if which == 0 {
            sqx1 = m;
        } else {
            x2 = m;
        }
    }
    let mid = &sqx1 * x2 * &sqx1;
    let mid = (&mid + mid.adjoint()).scale(0.5);
    let (mu, _) = eigh_f64(&mid);
    let log_f = log_d
        + 2.0
            * mu
                .iter()
                .map(|&m| (1.0 + m.max(0.0).sqrt()).ln())
                .sum::<f64>();
    let f = log_f.exp();
    if f > 1.0 + 1e-8 {
        return Err(Error::NumericalState(format!("fidelity overshoot: {f}")));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// Occupation spectrum of a correlation matrix as `(lambda, 1 - lambda)`
/// pairs, each rounded to f64 separately so that eigenvalues exponentially
/// close to 1 keep an accurate complement.
pub fn occupation_pairs_mp(c: &DMatrix<Complex64>, digits: u32) -> Result<Vec<(f64, f64)>> {
    let p = bits_for_digits(digits);
    let one = BigFloat::from_i8(1, p);
    let (_, seed) = eigh_f64(c);
    let eig = jacobi_hermitian(&MpMatrix::from_c64(c, digits), Some(&seed), digits)?;
    Ok(eig
        .eigenvalues
        .iter()
        .map(|l| (bf_to_f64(l), bf_to_f64(&one.sub(l, p, RM))))
        .collect())
}

/// `x ln x` with the extended-precision branch guarding underflow for
/// `x < 1e-300`.
pub fn x_ln_x(x: f64, digits: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1e-300 {
        return x * x.ln();
    }
    let p = bits_for_digits(digits.max(32));
    let mut cc = Consts::new().expect("constants cache");
    let xb = bf(x, p);
    bf_to_f64(&xb.mul(&xb.ln(p, RM, &mut cc), p, RM))
}

/// Reconstruction residual `|| V L V^dag - M ||_F` of the extended-precision
/// decomposition, evaluated without leaving extended precision.
pub fn reconstruction_residual_mp(m: &DMatrix<Complex64>, digits: u32) -> Result<f64> {
    let p = bits_for_digits(digits);
    let mp = MpMatrix::from_c64(m, digits);
    let (_, seed) = eigh_f64(m);
    let eig = jacobi_hermitian(&mp, Some(&seed), digits)?;
    let n = m.nrows();
    let mut scaled = MpMatrix::zeros(n, p);
    for k in 0..n {
        for i in 0..n {
            scaled.d[i * n + k] = eig.vectors.at(i, k).scale(&eig.eigenvalues[k], p);
        }
    }
    let rec = scaled.matmul(&eig.vectors.adjoint());
    let mut diff = MpMatrix::zeros(n, p);
    for k in 0..n * n {
        diff.d[k] = rec.d[k].sub(&mp.d[k], p);
    }
    Ok(bf_to_f64(&diff.frobenius()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let a = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        (&a + a.adjoint()).scale(0.5)
    }

    #[test]
    fn jacobi_identity_and_2x2() {
        let id = DMatrix::<Complex64>::identity(3, 3);
        let eig = jacobi_hermitian(&MpMatrix::from_c64(&id, 30), None, 30).unwrap();
        for l in eig.eigenvalues_f64() {
            assert!((l - 1.0).abs() < 1e-28);
        }
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(1.0, 0.0);
        let eig = jacobi_hermitian(&MpMatrix::from_c64(&m, 30), None, 30).unwrap();
        let vals = eig.eigenvalues_f64();
        assert!((vals[0] + 1.0).abs() < 1e-28);
        assert!((vals[1] - 1.0).abs() < 1e-28);
    }

    #[test]
    fn jacobi_reconstruction_residual_at_40_digits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_hermitian(8, &mut rng);
        let resid = reconstruction_residual_mp(&m, 40).unwrap();
        assert!(resid < 1e-38, "residual {resid}");
    }

    #[test]
    fn jacobi_per_pair_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_hermitian(6, &mut rng);
        let digits = 40;
        let mp = MpMatrix::from_c64(&m, digits);
        let eig = jacobi_hermitian(&mp, None, digits).unwrap();
        assert!(eig.max_residual(&mp) < 1e-38);
    }

    #[test]
    fn jacobi_agrees_with_f64_eigs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_hermitian(7, &mut rng);
        let (vals, _) = eigh_f64(&m);
        let eig = jacobi_hermitian(&MpMatrix::from_c64(&m, 40), None, 40).unwrap();
        for (a, b) in vals.iter().zip(eig.eigenvalues_f64()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_equal_states_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(4, &mut rng);
        let (_, v) = eigh_f64(&h);
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(0.9, 0.0),
            Complex64::new(0.05, 0.0),
            Complex64::new(0.6, 0.0),
        ]));
        let c = &v * lam * v.adjoint();
        let f = fidelity_mp(&c, &c, 40).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        let f64f = fidelity_f64(&c, &c).unwrap();
        assert!((f64f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_orthogonal_pure_modes_is_zero() {
        let c0 = DMatrix::from_element(1, 1, Complex64::new(0.0, 0.0));
        let c1 = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let f = fidelity_mp(&c0, &c1, 40).unwrap();
        assert!(f < 1e-15, "F = {f}");
    }

    #[test]
    fn fidelity_commuting_closed_form() {
        // diagonal C1, C2: F = prod (sqrt(l1 l2) + sqrt((1-l1)(1-l2)))^2
        let l1 = [0.2, 0.7, 0.95];
        let l2 = [0.4, 0.1, 0.99];
        let c1 = DMatrix::from_fn(3, 3, |i, j| {
            Complex64::new(if i == j { l1[i] } else { 0.0 }, 0.0)
        });
        let c2 = DMatrix::from_fn(3, 3, |i, j| {
            Complex64::new(if i == j { l2[i] } else { 0.0 }, 0.0)
        });
        let expect: f64 = (0..3)
            .map(|k| {
                let a = (l1[k] * l2[k]).sqrt() + ((1.0 - l1[k]) * (1.0 - l2[k])).sqrt();
                a * a
            })
            .product();
        let f = fidelity_mp(&c1, &c2, 40).unwrap();
        assert!((f - expect).abs() < 1e-13);
        let g = fidelity_f64(&c1, &c2).unwrap();
        assert!((g - expect).abs() < 1e-12);
    }

    #[test]
    fn fidelity_symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let h1 = random_hermitian(4, &mut rng);
            let h2 = random_hermitian(4, &mut rng);
            let to_c = |h: &DMatrix<Complex64>| {
                let (vals, v) = eigh_f64(h);
                let lam = DMatrix::from_fn(4, 4, |i, j| {
                    if i == j {
                        Complex64::new(1.0 / (1.0 + (-vals[i]).exp()), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                &v * lam * v.adjoint()
            };
            let (c1, c2) = (to_c(&h1), to_c(&h2));
            let f12 = fidelity_mp(&c1, &c2, 40).unwrap();
            let f21 = fidelity_mp(&c2, &c1, 40).unwrap();
            assert!((f12 - f21).abs() < 1e-10);
        }
    }

    #[test]
    fn x_ln_x_underflow_branch() {
        assert_eq!(x_ln_x(0.0, 40), 0.0);
        let v = x_ln_x(1e-310, 40);
        assert!(v < 0.0 && v > -1e-305);
        assert!((x_ln_x(0.5, 40) - 0.5 * 0.5f64.ln()).abs() < 1e-15);
    }
}
