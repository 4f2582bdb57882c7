//! QPSK mapping and OQAM staggering.
//!
//! Bit pairs `(b1, b0)` map to `((1 - 2 b1) + j (1 - 2 b0)) / √2` (Gray).
//! Symbols fill the grid subcarrier-first: symbol `i` lands on subcarrier
//! `i % N`, complex frame `i / N`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `N × K/2` grid of complex constellation points.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSymbolGrid(pub DMatrix<Complex64>);

/// `N × K` grid of real OQAM samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RealOqamGrid(pub DMatrix<f64>);

impl ComplexSymbolGrid {
    pub fn subcarriers(&self) -> usize {
        self.0.nrows()
    }

    pub fn half_frames(&self) -> usize {
        self.0.ncols()
    }
}

impl RealOqamGrid {
    pub fn subcarriers(&self) -> usize {
        self.0.nrows()
    }

    pub fn frames(&self) -> usize {
        self.0.ncols()
    }
}

pub fn qpsk_modulate(bits: &[u8], subcarriers: usize, frames: usize) -> Result<ComplexSymbolGrid> {
    if !frames.is_multiple_of(2) {
        return Err(Error::input(format!("frame count K = {frames} must be even")));
    }
    if bits.len() != subcarriers * frames {
        return Err(Error::input(format!(
            "expected N*K = {} bits, got {}",
            subcarriers * frames,
            bits.len()
        )));
    }
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let level = |b: u8| if b == 0 { amp } else { -amp };
    let symbols = bits
        .chunks_exact(2)
        .map(|pair| Complex64::new(level(pair[0]), level(pair[1])));
    Ok(ComplexSymbolGrid(DMatrix::from_iterator(
        subcarriers,
        frames / 2,
        symbols,
    )))
}

/// Splits each complex symbol into two real samples at consecutive
/// half-symbol instants. Even subcarriers send the real part first, odd
/// subcarriers the imaginary part first.
pub fn oqam_stagger(symbols: &ComplexSymbolGrid) -> RealOqamGrid {
    let s = &symbols.0;
    let mut x = DMatrix::zeros(s.nrows(), 2 * s.ncols());
    for n in 0..s.ncols() {
        for m in 0..s.nrows() {
            let v = s[(m, n)];
            let (first, second) = if m % 2 == 0 { (v.re, v.im) } else { (v.im, v.re) };
            x[(m, 2 * n)] = first;
            x[(m, 2 * n + 1)] = second;
        }
    }
    RealOqamGrid(x)
}

pub fn oqam_destagger(grid: &RealOqamGrid) -> Result<ComplexSymbolGrid> {
    let x = &grid.0;
    if !x.ncols().is_multiple_of(2) {
        return Err(Error::input(format!(
            "cannot destagger an odd number of frames ({})",
            x.ncols()
        )));
    }
    let s = DMatrix::from_fn(x.nrows(), x.ncols() / 2, |m, n| {
        let (a, b) = (x[(m, 2 * n)], x[(m, 2 * n + 1)]);
        if m % 2 == 0 {
            Complex64::new(a, b)
        } else {
            Complex64::new(b, a)
        }
    });
    Ok(ComplexSymbolGrid(s))
}

/// Hard decision on the signs of the real and imaginary parts. A component
/// of exactly zero decides for bit 0.
pub fn qpsk_demodulate(symbols: &ComplexSymbolGrid) -> Vec<u8> {
    let decide = |v: f64| u8::from(v < 0.0);
    symbols
        .0
        .iter()
        .flat_map(|s| [decide(s.re), decide(s.im)])
        .collect()
}
