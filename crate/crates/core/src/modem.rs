//! FBMC/OQAM synthesis and analysis.
//!
//! Basis function for subcarrier `m` and instant `n`:
//!
//! ```text
//! χ_{m,n}[k] = e^{jφ_{m,n}} · e^{j2πm(k - D)/N} · p[k - nN/2],
//! φ_{m,n}    = π/2·(m + n) - π·m·n,      D = (Lp - 1)/2
//! ```
//!
//! The subcarrier exponent is referenced to the filter's center of symmetry
//! `D`; with that reference the cross inner products of distinct basis
//! functions are purely imaginary. Instant `n` starts at sample `nN/2`.
//!
//! Two implementations are provided. The `*_direct` functions evaluate the
//! defining sums term by term. [`synthesize`] and [`analyze`] use one
//! `N`-point FFT per instant and fold the filter onto it; they must agree
//! with the direct path.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::filter::FilterCoefficients;

/// Phase factor `e^{jφ_{m,n}}` as a quarter turn index (0..4).
fn phase_quarter(m: usize, n: usize) -> usize {
    // π/2·(m+n) - π·m·n  ==  (m + n - 2mn)·π/2
    (m % 4 + n % 4 + 4 - 2 * (m % 2) * (n % 2)) % 4
}

fn quarter_turn(q: usize) -> Complex64 {
    match q % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `e^{jφ_{m,n}}`, always one of `±1, ±j`.
pub fn phase_factor(m: usize, n: usize) -> Complex64 {
    quarter_turn(phase_quarter(m, n))
}

/// Prototype filter plus the FFT plans needed to run the modem at `N`
/// subcarriers. Cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct BasisFunctionSpec {
    filter: Arc<FilterCoefficients>,
    subcarriers: usize,
    /// `e^{-j2πmD/N}` per subcarrier.
    center_rotation: Arc<Vec<Complex64>>,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for BasisFunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BasisFunctionSpec")
            .field("subcarriers", &self.subcarriers)
            .field("filter_len", &self.filter.len())
            .finish()
    }
}

impl BasisFunctionSpec {
    pub fn new(filter: FilterCoefficients) -> Result<Self> {
        let subcarriers = filter.subcarriers();
        if subcarriers < 2 || !subcarriers.is_multiple_of(2) {
            return Err(Error::config(format!(
                "subcarrier count must be even and at least 2, got {subcarriers}"
            )));
        }
        if filter.len() < subcarriers / 2 {
            return Err(Error::config("prototype filter shorter than half a symbol"));
        }
        let center = filter.center();
        let center_rotation = (0..subcarriers)
            .map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 * center / subcarriers as f64))
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            ifft: planner.plan_fft_inverse(subcarriers),
            fft: planner.plan_fft_forward(subcarriers),
            filter: Arc::new(filter),
            subcarriers,
            center_rotation: Arc::new(center_rotation),
        })
    }

    pub fn filter(&self) -> &FilterCoefficients {
        &self.filter
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn hop(&self) -> usize {
        self.subcarriers / 2
    }

    /// Number of samples produced for `instants` grid columns.
    pub fn signal_len(&self, instants: usize) -> usize {
        if instants == 0 {
            0
        } else {
            (instants - 1) * self.hop() + self.filter.len()
        }
    }

    /// `χ_{m,n}[k]` for `k` in the support `[nN/2, nN/2 + Lp)`; zero elsewhere.
    pub fn basis_value(&self, m: usize, n: usize, k: usize) -> Complex64 {
        let start = n * self.hop();
        let taps = self.filter.taps();
        if k < start || k >= start + taps.len() {
            return Complex64::new(0.0, 0.0);
        }
        let arg = 2.0 * PI * m as f64 * (k as f64 - self.filter.center()) / self.subcarriers as f64;
        phase_factor(m, n) * Complex64::from_polar(taps[k - start], arg)
    }
}

fn check_grid_rows<T>(z: &DMatrix<T>, spec: &BasisFunctionSpec) -> Result<()> {
    if z.nrows() != spec.subcarriers {
        return Err(Error::input(format!(
            "grid has {} rows, modem expects N = {}",
            z.nrows(),
            spec.subcarriers
        )));
    }
    Ok(())
}

/// `s[k] = Σ_m Σ_n z_{m,n} χ_{m,n}[k]`, evaluated term by term.
pub fn synthesize_direct(z: &DMatrix<f64>, spec: &BasisFunctionSpec) -> Result<Vec<Complex64>> {
    check_grid_rows(z, spec)?;
    let mut s = vec![Complex64::new(0.0, 0.0); spec.signal_len(z.ncols())];
    let len = spec.filter.len();
    for n in 0..z.ncols() {
        let start = n * spec.hop();
        for m in 0..z.nrows() {
            let v = z[(m, n)];
            if v == 0.0 {
                continue;
            }
            for k in start..start + len {
                s[k] += v * spec.basis_value(m, n, k);
            }
        }
    }
    Ok(s)
}

/// `y_{m,n} = Σ_k y[k] χ*_{m,n}[k]`, evaluated term by term. Samples past
/// the end of `y` count as zero.
pub fn analyze_direct(y: &[Complex64], spec: &BasisFunctionSpec, instants: usize) -> DMatrix<Complex64> {
    let len = spec.filter.len();
    DMatrix::from_fn(spec.subcarriers, instants, |m, n| {
        let start = n * spec.hop();
        (start..(start + len).min(y.len()))
            .map(|k| y[k] * spec.basis_value(m, n, k).conj())
            .sum()
    })
}

/// FFT-based synthesis of a real grid. Output length is
/// `(instants - 1)·N/2 + Lp`; filter tails are kept in full.
pub fn synthesize(z: &DMatrix<f64>, spec: &BasisFunctionSpec) -> Result<Vec<Complex64>> {
    check_grid_rows(z, spec)?;
    let n_sub = spec.subcarriers;
    let taps = spec.filter.taps();
    let mut s = vec![Complex64::new(0.0, 0.0); spec.signal_len(z.ncols())];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_sub];
    let mut scratch = vec![Complex64::new(0.0, 0.0); spec.ifft.get_inplace_scratch_len()];

    for n in 0..z.ncols() {
        let column = z.column(n);
        if column.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (m, slot) in buf.iter_mut().enumerate() {
            *slot = column[m] * phase_factor(m, n) * spec.center_rotation[m];
        }
        // buf[r] = Σ_m a_m e^{j2πmr/N}
        spec.ifft.process_with_scratch(&mut buf, &mut scratch);

        let start = n * spec.hop();
        let offset = start % n_sub;
        for (u, &p) in taps.iter().enumerate() {
            s[start + u] += buf[(offset + u) % n_sub] * p;
        }
    }
    Ok(s)
}

/// FFT-based analysis at instants `0..instants`. Short inputs are treated
/// as zero-padded.
pub fn analyze(y: &[Complex64], spec: &BasisFunctionSpec, instants: usize) -> DMatrix<Complex64> {
    let n_sub = spec.subcarriers;
    let taps = spec.filter.taps();
    let mut out = DMatrix::zeros(n_sub, instants);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_sub];
    let mut scratch = vec![Complex64::new(0.0, 0.0); spec.fft.get_inplace_scratch_len()];

    for n in 0..instants {
        let start = n * spec.hop();
        if start >= y.len() {
            break;
        }
        buf.fill(Complex64::new(0.0, 0.0));
        let offset = start % n_sub;
        let end = (start + taps.len()).min(y.len());
        for (u, &p) in taps[..end - start].iter().enumerate() {
            buf[(offset + u) % n_sub] += y[start + u] * p;
        }
        // buf[m] = Σ_r b_r e^{-j2πmr/N}
        spec.fft.process_with_scratch(&mut buf, &mut scratch);
        for m in 0..n_sub {
            out[(m, n)] = buf[m] * spec.center_rotation[m].conj() * phase_factor(m, n).conj();
        }
    }
    out
}

/// Inner products `ξ` between basis functions, indexed by offset
/// `(Δm, Δn)` from a reference point.
#[derive(Debug, Clone)]
pub struct TransmuxTable {
    span: usize,
    reference: (usize, usize),
    values: Vec<Complex64>,
}

impl TransmuxTable {
    pub fn span(&self) -> usize {
        self.span
    }

    /// Reference grid point `(m̄, n̄)` the offsets are measured from.
    pub fn reference(&self) -> (usize, usize) {
        self.reference
    }

    fn index(&self, dm: i64, dn: i64) -> Option<usize> {
        let s = self.span as i64;
        if dm.abs() > s || dn.abs() > s {
            return None;
        }
        let width = 2 * s + 1;
        Some(((dm + s) * width + (dn + s)) as usize)
    }

    /// `ξ` for the basis function at `(m̄ + Δm, n̄ + Δn)` against `(m̄, n̄)`.
    pub fn get(&self, dm: i64, dn: i64) -> Option<Complex64> {
        self.index(dm, dn).map(|i| self.values[i])
    }

    /// All `(Δm, Δn, ξ)` entries, row-major in `Δm`.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let s = self.span as i64;
        (-s..=s).flat_map(move |dm| (-s..=s).map(move |dn| (dm, dn, self.get(dm, dn).unwrap())))
    }

    /// Whether `(Δm, Δn)` lies in the first-order neighborhood Ω.
    pub fn in_first_order_neighborhood(dm: i64, dn: i64) -> bool {
        dm.abs() <= 1 && dn.abs() <= 1 && (dm, dn) != (0, 0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dm,dn,re,im\n");
        for (dm, dn, v) in self.entries() {
            out.push_str(&format!("{dm},{dn},{:e},{:e}\n", v.re, v.im));
        }
        out
    }
}

/// Computes `ξ` over `|Δm|, |Δn| ≤ span` by direct inner products of basis
/// functions over their full support. The reference point is placed at
/// `(span, span)` (plus one on each axis if `span` is odd, so `m̄` and `n̄`
/// are even) so every offset maps to a non-negative index.
pub fn transmux_response(spec: &BasisFunctionSpec, span: usize) -> Result<TransmuxTable> {
    transmux_response_at(spec, span, None)
}

/// Same as [`transmux_response`] with an explicit reference `(m̄, n̄)`.
pub fn transmux_response_at(
    spec: &BasisFunctionSpec,
    span: usize,
    reference: Option<(usize, usize)>,
) -> Result<TransmuxTable> {
    if span == 0 {
        return Err(Error::config("transmux span must be at least 1"));
    }
    let even_span = span + span % 2;
    let (m0, n0) = reference.unwrap_or((even_span, even_span));
    if m0 < span || n0 < span {
        return Err(Error::config("reference point too close to the grid origin"));
    }
    if m0 + span >= spec.subcarriers {
        return Err(Error::config("span too wide for the subcarrier count"));
    }

    let len = spec.filter.len();
    let hop = spec.hop();
    let s = span as i64;
    let mut values = Vec::with_capacity((2 * span + 1).pow(2));
    for dm in -s..=s {
        for dn in -s..=s {
            let m = (m0 as i64 + dm) as usize;
            let n = (n0 as i64 + dn) as usize;
            let lo = (n.min(n0)) * hop;
            let hi = (n.max(n0)) * hop;
            // overlap of the two supports
            let (from, to) = (hi, lo + len);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in from..to.max(from) {
                acc += spec.basis_value(m, n, k) * spec.basis_value(m0, n0, k).conj();
            }
            values.push(acc);
        }
    }
    Ok(TransmuxTable {
        span,
        reference: (m0, n0),
        values,
    })
}
