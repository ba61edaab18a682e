//! Dense order-3 tensors with cyclic matricization.
//!
//! Storage order is `(i1, i2, i3)` with `i3` varying fastest. Mode indices in
//! the API are 0-based (`0`, `1`, `2`). The mode-`m` unfolding places index
//! `i_m` on the rows and lays out the remaining two indices cyclically: with
//! `a = m + 1` and `b = m + 2` (mod 3), entry `(i1, i2, i3)` lands in column
//! `i_a + n_a * i_b`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn filled(dims: [usize; 3], value: f64) -> Self {
        Self {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }

    /// Wraps a flat buffer in storage order. Rejects wrong lengths and
    /// non-finite entries.
    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if data.len() != len {
            return dim_err(format!(
                "{} values cannot fill a {}x{}x{} tensor",
                data.len(),
                dims[0],
                dims[1],
                dims[2]
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return arg_err(format!("non-finite tensor entry at flat index {pos}"));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for l in 0..dims[2] {
                    data.push(f(i, j, l));
                }
            }
        }
        Self { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, v: f64) {
        let o = self.offset(i, j, l);
        self.data[o] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, rhs: &Tensor3) -> Result<Tensor3> {
        if self.dims != rhs.dims {
            return dim_err(format!("tensor dims {:?} vs {:?}", self.dims, rhs.dims));
        }
        Ok(Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.data.iter().sum::<f64>() / self.data.len() as f64
        }
    }

    /// Reorders mode-`mode` slices: slice `perm[j]` of `self` becomes slice `j`.
    pub fn permute_slices(&self, mode: usize, perm: &[usize]) -> Result<Tensor3> {
        check_mode(mode)?;
        if perm.len() != self.dims[mode] {
            return dim_err("permutation length differs from mode size");
        }
        Ok(Tensor3::from_fn(self.dims, |i, j, l| {
            let mut idx = [i, j, l];
            idx[mode] = perm[idx[mode]];
            self.get(idx[0], idx[1], idx[2])
        }))
    }
}

pub(crate) fn check_mode(mode: usize) -> Result<()> {
    if mode > 2 {
        return arg_err(format!("mode must be 0, 1 or 2, got {mode}"));
    }
    Ok(())
}

/// Mode-`mode` unfolding: an `n_mode x (N / n_mode)` matrix.
pub fn matricize(t: &Tensor3, mode: usize) -> Result<Matrix> {
    check_mode(mode)?;
    let dims = t.dims;
    let a = (mode + 1) % 3;
    let b = (mode + 2) % 3;
    let cols = dims[a] * dims[b];
    let mut out = vec![0.0; t.len()];
    let mut idx = [0usize; 3];
    for i1 in 0..dims[0] {
        idx[0] = i1;
        for i2 in 0..dims[1] {
            idx[1] = i2;
            for i3 in 0..dims[2] {
                idx[2] = i3;
                let col = idx[a] + dims[a] * idx[b];
                out[idx[mode] * cols + col] = t.get(i1, i2, i3);
            }
        }
    }
    Matrix::from_vec(dims[mode], cols, out)
}

/// Inverse of [`matricize`].
pub fn dematricize(m: &Matrix, mode: usize, dims: [usize; 3]) -> Result<Tensor3> {
    check_mode(mode)?;
    let a = (mode + 1) % 3;
    let b = (mode + 2) % 3;
    let cols = dims[a] * dims[b];
    if m.shape() != (dims[mode], cols) {
        return dim_err(format!(
            "mode-{mode} unfolding of {dims:?} must be {}x{cols}, got {}x{}",
            dims[mode],
            m.rows(),
            m.cols()
        ));
    }
    let src = m.as_slice();
    let mut out = Tensor3::zeros(dims);
    let mut idx = [0usize; 3];
    for i1 in 0..dims[0] {
        idx[0] = i1;
        for i2 in 0..dims[1] {
            idx[1] = i2;
            for i3 in 0..dims[2] {
                idx[2] = i3;
                let col = idx[a] + dims[a] * idx[b];
                out.set(i1, i2, i3, src[idx[mode] * cols + col]);
            }
        }
    }
    Ok(out)
}

/// Multilinear product `g ×_mode v`: contracts mode `mode` of `g` against the
/// columns of `v`, so the output has `v.rows()` entries along that mode.
pub fn mode_product(g: &Tensor3, v: &Matrix, mode: usize) -> Result<Tensor3> {
    check_mode(mode)?;
    let dims = g.dims;
    if v.cols() != dims[mode] {
        return dim_err(format!(
            "mode-{mode} product needs {} columns, matrix has {}",
            dims[mode],
            v.cols()
        ));
    }
    let outer: usize = dims[..mode].iter().product();
    let inner: usize = dims[mode + 1..].iter().product();
    let n = dims[mode];
    let m = v.rows();
    let mut out_dims = dims;
    out_dims[mode] = m;
    let mut out = vec![0.0; outer * m * inner];
    let src = g.as_slice();
    for o in 0..outer {
        for i in 0..m {
            let dst = &mut out[(o * m + i) * inner..(o * m + i + 1) * inner];
            for (j, &w) in v.row(i).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let s = &src[(o * n + j) * inner..(o * n + j + 1) * inner];
                for (d, &x) in dst.iter_mut().zip(s) {
                    *d += w * x;
                }
            }
        }
    }
    Ok(Tensor3 {
        dims: out_dims,
        data: out,
    })
}

pub fn frobenius_norm(t: &Tensor3) -> f64 {
    t.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Writes the `tensor3` text format: a header line followed by one value per
/// line in storage order, 17 significant digits each.
pub fn write_tensor<W: Write>(t: &Tensor3, mut w: W) -> std::io::Result<()> {
    writeln!(w, "tensor3 {} {} {}", t.dims[0], t.dims[1], t.dims[2])?;
    let mut line = String::with_capacity(32);
    for v in &t.data {
        line.clear();
        let _ = write!(line, "{v:.16e}");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_tensor<R: BufRead>(r: R) -> Result<Tensor3> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::Parse(e.to_string()))?,
        None => return Err(Error::Parse("empty tensor file".into())),
    };
    let mut parts = header.split_whitespace();
    if parts.next() != Some("tensor3") {
        return Err(Error::Parse(format!("bad tensor header `{header}`")));
    }
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        *d = parts
            .next()
            .and_then(|s| s.parse().ok())
            .filter(|&n: &usize| n > 0)
            .ok_or_else(|| Error::Parse(format!("bad tensor header `{header}`")))?;
    }
    if parts.next().is_some() {
        return Err(Error::Parse(format!("bad tensor header `{header}`")));
    }
    let len: usize = dims.iter().product();
    let mut data = Vec::with_capacity(len);
    for line in lines {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad tensor value `{tok}`")))?;
            data.push(v);
        }
    }
    if data.len() != len {
        return Err(Error::Parse(format!(
            "expected {len} tensor values, found {}",
            data.len()
        )));
    }
    Tensor3::from_vec(dims, data)
}
