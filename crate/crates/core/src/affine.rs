//! Affine precoding: an orthogonal basis `Φ` of size `K+n` is split into a
//! training block (rows `0..N`) and a data block (rows `N..N+K`). The
//! training matrix `C` and estimator `E` come from the first block, the
//! precoder `P` and detector `D` from the second, so that
//!
//! ```text
//! PD = I_K   PE = 0   CE = I_N   CD = 0
//! ```
//!
//! `E` carries a `1/√(K+n)` factor so that `CE = I_N` and
//! `EᵀE = I_N/(K+n)` hold together.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::oqam::RealOqamGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisKind {
    /// Orthonormal DCT-II, any size.
    #[default]
    Dct,
    /// Normalized Hadamard. Sylvester for powers of two; sizes of the form
    /// `2^a·(q+1)` with `q` a prime `≡ 3 (mod 4)` use a Paley block.
    Hadamard,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Dct => "dct",
            BasisKind::Hadamard => "hadamard",
        })
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dct" => Ok(BasisKind::Dct),
            "hadamard" => Ok(BasisKind::Hadamard),
            other => Err(Error::config(format!("unknown basis kind '{other}'"))),
        }
    }
}

/// Returns a `size × size` real matrix with orthonormal rows.
pub fn build_orthogonal_basis(size: usize, kind: BasisKind) -> Result<DMatrix<f64>> {
    if size < 2 {
        return Err(Error::config(format!("basis size must be at least 2, got {size}")));
    }
    match kind {
        BasisKind::Dct => {
            let m = size as f64;
            Ok(DMatrix::from_fn(size, size, |row, col| {
                let scale = if row == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                scale * (PI * (2 * col + 1) as f64 * row as f64 / (2.0 * m)).cos()
            }))
        }
        BasisKind::Hadamard => {
            let h = hadamard(size).ok_or_else(|| {
                Error::config(format!("no Hadamard construction available for size {size}"))
            })?;
            Ok(h / (size as f64).sqrt())
        }
    }
}

fn is_prime(q: usize) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| !q.is_multiple_of(d))
}

/// Splits `size` into `2^a · r` with `r` either 1 or a Paley order `q + 1`.
/// Returns `(2^a, q)`, `q = 0` meaning pure Sylvester.
fn hadamard_factors(size: usize) -> Option<(usize, usize)> {
    if size.is_power_of_two() {
        return Some((size, 0));
    }
    let mut pow = 1;
    while size.is_multiple_of(pow) {
        let rest = size / pow;
        if rest > 2 && is_prime(rest - 1) && (rest - 1) % 4 == 3 {
            return Some((pow, rest - 1));
        }
        pow *= 2;
    }
    None
}

/// Whether [`BasisKind::Hadamard`] can be built at this size.
pub fn hadamard_supported(size: usize) -> bool {
    size >= 2 && hadamard_factors(size).is_some()
}

/// Unnormalized ±1 Hadamard matrix, `H Hᵀ = size·I`.
fn hadamard(size: usize) -> Option<DMatrix<f64>> {
    let (pow, q) = hadamard_factors(size)?;
    // Sylvester: H[i][j] = (-1)^popcount(i & j)
    let sylvester = DMatrix::from_fn(pow, pow, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    });
    if q == 0 {
        return Some(sylvester);
    }
    // Paley I: H = I + S, S skew with a Jacobsthal core from the Legendre symbol.
    let residues: Vec<bool> = {
        let mut r = vec![false; q];
        for x in 1..q {
            r[x * x % q] = true;
        }
        r
    };
    let chi = |d: usize| -> f64 {
        match d % q {
            0 => 0.0,
            d if residues[d] => 1.0,
            _ => -1.0,
        }
    };
    let paley = DMatrix::from_fn(q + 1, q + 1, |i, j| {
        let skew = match (i, j) {
            (0, 0) => 0.0,
            (0, _) => 1.0,
            (_, 0) => -1.0,
            (i, j) => chi(j + q - i),
        };
        if i == j {
            1.0 + skew
        } else {
            skew
        }
    });
    Some(paley.kronecker(&sylvester))
}

#[derive(Debug, Clone)]
pub struct AffineMatrixSet {
    pub phi: DMatrix<f64>,
    /// `K × (K+n)`
    pub precoder: DMatrix<f64>,
    /// `N × (K+n)`
    pub training: DMatrix<f64>,
    /// `(K+n) × N`
    pub estimator: DMatrix<f64>,
    /// `(K+n) × K`
    pub detector: DMatrix<f64>,
    pub subcarriers: usize,
    pub frames: usize,
    pub redundancy: usize,
}

impl AffineMatrixSet {
    /// `K + n`, the number of transmitted instants.
    pub fn instants(&self) -> usize {
        self.frames + self.redundancy
    }
}

pub fn derive_matrices(
    phi: DMatrix<f64>,
    subcarriers: usize,
    frames: usize,
    redundancy: usize,
) -> Result<AffineMatrixSet> {
    let (n_sub, k, n_red) = (subcarriers, frames, redundancy);
    if n_red < n_sub {
        return Err(Error::config(format!(
            "redundancy n = {n_red} must be at least the subcarrier count N = {n_sub}"
        )));
    }
    if k == 0 {
        return Err(Error::config("frame count K must be positive"));
    }
    let total = k + n_red;
    if phi.shape() != (total, total) {
        return Err(Error::input(format!(
            "basis is {:?}, expected {total}x{total}",
            phi.shape()
        )));
    }

    let train_rows = phi.rows(0, n_sub);
    let data_rows = phi.rows(n_sub, k);

    let tf = total as f64;
    let precoder = data_rows * (tf / k as f64).sqrt();
    let training = train_rows * tf.sqrt();
    let estimator = train_rows.transpose() / tf.sqrt();

    let gram = &precoder * precoder.transpose();
    let gram_inv = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("P Pᵀ is not positive definite".into()))?
        .inverse();
    let detector = precoder.transpose() * gram_inv;

    Ok(AffineMatrixSet {
        phi,
        precoder,
        training,
        estimator,
        detector,
        subcarriers: n_sub,
        frames: k,
        redundancy: n_red,
    })
}

/// Convenience: basis construction followed by [`derive_matrices`].
pub fn build_matrix_set(
    kind: BasisKind,
    subcarriers: usize,
    frames: usize,
    redundancy: usize,
) -> Result<AffineMatrixSet> {
    if redundancy < subcarriers {
        return Err(Error::config(format!(
            "redundancy n = {redundancy} must be at least the subcarrier count N = {subcarriers}"
        )));
    }
    let phi = build_orthogonal_basis(frames + redundancy, kind)?;
    derive_matrices(phi, subcarriers, frames, redundancy)
}

/// Largest absolute deviation across the identity and covariance relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub phi_orthogonality: f64,
    pub pd_identity: f64,
    pub pe_zero: f64,
    pub ce_identity: f64,
    pub cd_zero: f64,
    pub cc_cov: f64,
    pub pp_cov: f64,
    pub ee_cov: f64,
    pub dd_cov: f64,
}

impl IdentityReport {
    pub fn max_deviation(&self) -> f64 {
        [
            self.phi_orthogonality,
            self.pd_identity,
            self.pe_zero,
            self.ce_identity,
            self.cd_zero,
            self.cc_cov,
            self.pp_cov,
            self.ee_cov,
            self.dd_cov,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn check_identities(m: &AffineMatrixSet) -> IdentityReport {
    let (n, k, t) = (m.subcarriers, m.frames, m.instants() as f64);
    let eye = |d: usize| DMatrix::<f64>::identity(d, d);
    let (p, c, e, d) = (&m.precoder, &m.training, &m.estimator, &m.detector);
    IdentityReport {
        phi_orthogonality: max_abs_diff(&(m.phi.transpose() * &m.phi), &eye(m.instants())),
        pd_identity: max_abs_diff(&(p * d), &eye(k)),
        pe_zero: (p * e).amax(),
        ce_identity: max_abs_diff(&(c * e), &eye(n)),
        cd_zero: (c * d).amax(),
        cc_cov: max_abs_diff(&(c * c.transpose()), &(eye(n) * t)),
        pp_cov: max_abs_diff(&(p * p.transpose()), &(eye(k) * (t / k as f64))),
        ee_cov: max_abs_diff(&(e.transpose() * e), &(eye(n) / t)),
        dd_cov: max_abs_diff(&(d.transpose() * d), &(eye(k) * (k as f64 / t))),
    }
}

/// `Z = σ_s·X·P + σ_c·C`
#[derive(Debug, Clone)]
pub struct PrecodedGrid {
    pub z: DMatrix<f64>,
    pub sigma_s2: f64,
    pub sigma_c2: f64,
}

impl PrecodedGrid {
    pub fn sigma_s(&self) -> f64 {
        self.sigma_s2.sqrt()
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c2.sqrt()
    }
}

pub fn precode(x: &RealOqamGrid, m: &AffineMatrixSet, sigma_c2: f64) -> Result<PrecodedGrid> {
    if !(0.0..=1.0).contains(&sigma_c2) {
        return Err(Error::config(format!("sigma_c2 = {sigma_c2} outside [0, 1]")));
    }
    if x.0.shape() != (m.subcarriers, m.frames) {
        return Err(Error::input(format!(
            "data grid is {:?}, expected {}x{}",
            x.0.shape(),
            m.subcarriers,
            m.frames
        )));
    }
    let sigma_s2 = 1.0 - sigma_c2;
    let mut z = &m.training * sigma_c2.sqrt();
    z.gemm(sigma_s2.sqrt(), &x.0, &m.precoder, 1.0);
    Ok(PrecodedGrid {
        z,
        sigma_s2,
        sigma_c2,
    })
}
