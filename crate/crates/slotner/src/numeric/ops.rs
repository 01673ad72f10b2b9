use crate::{Error, Result};

use super::tensor::Tensor;

fn dim_err(msg: String) -> Error {
    Error::Dimension(msg)
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Max-shifted log(sum(exp(row))).
fn logsumexp_slice(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

enum BinaryKind {
    Add,
    Sub,
    Mul,
}

/// Broadcast layout for binary ops: shapes match exactly, or `b` is a 1-D
/// vector applied along the last axis of `a` (the bias case).
enum Broadcast {
    Exact,
    TrailingVector { rows: usize, cols: usize },
}

fn broadcast_of(a: &Tensor, b: &Tensor, opname: &str) -> Result<Broadcast> {
    let ashape = a.shape();
    let bshape = b.shape();
    if ashape == bshape {
        return Ok(Broadcast::Exact);
    }
    if bshape.len() == 1 && !ashape.is_empty() {
        let cols = *ashape.last().unwrap();
        if bshape[0] == cols && cols > 0 {
            let rows = a.numel() / cols;
            return Ok(Broadcast::TrailingVector { rows, cols });
        }
    }
    Err(dim_err(format!(
        "{opname}: incompatible shapes {ashape:?} and {bshape:?}"
    )))
}

fn binary(a: &Tensor, b: &Tensor, kind: BinaryKind, opname: &str) -> Result<Tensor> {
    let bc = broadcast_of(a, b, opname)?;
    let ad = a.to_vec();
    let bd = b.to_vec();
    let out: Vec<f64> = match bc {
        Broadcast::Exact => ad
            .iter()
            .zip(&bd)
            .map(|(&x, &y)| match kind {
                BinaryKind::Add => x + y,
                BinaryKind::Sub => x - y,
                BinaryKind::Mul => x * y,
            })
            .collect(),
        Broadcast::TrailingVector { rows, cols } => {
            let mut out = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let x = ad[r * cols + c];
                    let y = bd[c];
                    out.push(match kind {
                        BinaryKind::Add => x + y,
                        BinaryKind::Sub => x - y,
                        BinaryKind::Mul => x * y,
                    });
                }
            }
            out
        }
    };
    let shape = a.shape();
    let (pa, pb) = (a.clone(), b.clone());
    let bc_cols = match bc {
        Broadcast::Exact => None,
        Broadcast::TrailingVector { cols, .. } => Some(cols),
    };
    Ok(Tensor::op_output(
        out,
        shape,
        vec![a.clone(), b.clone()],
        move |g| {
            match kind {
                BinaryKind::Add | BinaryKind::Sub => {
                    pa.accumulate_grad(g);
                    let sign = if matches!(kind, BinaryKind::Sub) { -1.0 } else { 1.0 };
                    match bc_cols {
                        None => {
                            let gb: Vec<f64> = g.iter().map(|v| sign * v).collect();
                            pb.accumulate_grad(&gb);
                        }
                        Some(cols) => {
                            let mut gb = vec![0.0; cols];
                            for (i, &v) in g.iter().enumerate() {
                                gb[i % cols] += sign * v;
                            }
                            pb.accumulate_grad(&gb);
                        }
                    }
                }
                BinaryKind::Mul => {
                    match bc_cols {
                        None => {
                            let ga: Vec<f64> = g.iter().zip(&bd).map(|(&gv, &y)| gv * y).collect();
                            pa.accumulate_grad(&ga);
                            let gb: Vec<f64> = g.iter().zip(&ad).map(|(&gv, &x)| gv * x).collect();
                            pb.accumulate_grad(&gb);
                        }
                        Some(cols) => {
                            let ga: Vec<f64> = g
                                .iter()
                                .enumerate()
                                .map(|(i, &gv)| gv * bd[i % cols])
                                .collect();
                            pa.accumulate_grad(&ga);
                            let mut gb = vec![0.0; cols];
                            for (i, &gv) in g.iter().enumerate() {
                                gb[i % cols] += gv * ad[i];
                            }
                            pb.accumulate_grad(&gb);
                        }
                    }
                }
            }
        },
    ))
}

fn unary(input: &Tensor, f: impl Fn(f64) -> f64, dydx_from_y: impl Fn(f64, f64) -> f64 + 'static) -> Tensor {
    let xd = input.to_vec();
    let out: Vec<f64> = xd.iter().map(|&v| f(v)).collect();
    let saved_out = out.clone();
    let parent = input.clone();
    Tensor::op_output(out, input.shape(), vec![input.clone()], move |g| {
        let gx: Vec<f64> = g
            .iter()
            .zip(saved_out.iter().zip(&xd))
            .map(|(&gv, (&y, &x))| gv * dydx_from_y(y, x))
            .collect();
        parent.accumulate_grad(&gx);
    })
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        binary(self, other, BinaryKind::Add, "add")
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        binary(self, other, BinaryKind::Sub, "sub")
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        binary(self, other, BinaryKind::Mul, "mul")
    }

    pub fn sigmoid(&self) -> Tensor {
        unary(self, sigmoid_scalar, |y, _| y * (1.0 - y))
    }

    pub fn tanh(&self) -> Tensor {
        unary(self, f64::tanh, |y, _| 1.0 - y * y)
    }

    pub fn relu(&self) -> Tensor {
        unary(self, |x| x.max(0.0), |_, x| if x > 0.0 { 1.0 } else { 0.0 })
    }

    /// Matrix product `[m,k] x [k,n] -> [m,n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let ashape = self.shape();
        let bshape = other.shape();
        if ashape.len() != 2 || bshape.len() != 2 || ashape[1] != bshape[0] {
            return Err(dim_err(format!(
                "matmul: cannot multiply {ashape:?} by {bshape:?}"
            )));
        }
        let (m, k, n) = (ashape[0], ashape[1], bshape[1]);
        let ad = self.to_vec();
        let bd = other.to_vec();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                let av = ad[i * k + l];
                for j in 0..n {
                    out[i * n + j] += av * bd[l * n + j];
                }
            }
        }
        let (pa, pb) = (self.clone(), other.clone());
        Ok(Tensor::op_output(
            out,
            vec![m, n],
            vec![self.clone(), other.clone()],
            move |g| {
                // dA = g @ B^T
                let mut ga = vec![0.0; m * k];
                for i in 0..m {
                    for j in 0..n {
                        let gv = g[i * n + j];
                        for l in 0..k {
                            ga[i * k + l] += gv * bd[l * n + j];
                        }
                    }
                }
                pa.accumulate_grad(&ga);
                // dB = A^T @ g
                let mut gb = vec![0.0; k * n];
                for i in 0..m {
                    for l in 0..k {
                        let av = ad[i * k + l];
                        for j in 0..n {
                            gb[l * n + j] += av * g[i * n + j];
                        }
                    }
                }
                pb.accumulate_grad(&gb);
            },
        ))
    }

    /// Vector-matrix product `[k] x [k,n] -> [n]`.
    pub fn vecmat(&self, matrix: &Tensor) -> Result<Tensor> {
        let vshape = self.shape();
        let mshape = matrix.shape();
        if vshape.len() != 1 || mshape.len() != 2 || vshape[0] != mshape[0] {
            return Err(dim_err(format!(
                "vecmat: cannot multiply {vshape:?} by {mshape:?}"
            )));
        }
        let (k, n) = (mshape[0], mshape[1]);
        let vd = self.to_vec();
        let md = matrix.to_vec();
        let mut out = vec![0.0; n];
        for i in 0..k {
            let vv = vd[i];
            for j in 0..n {
                out[j] += vv * md[i * n + j];
            }
        }
        let (pv, pm) = (self.clone(), matrix.clone());
        Ok(Tensor::op_output(
            out,
            vec![n],
            vec![self.clone(), matrix.clone()],
            move |g| {
                let mut gv = vec![0.0; k];
                for i in 0..k {
                    for j in 0..n {
                        gv[i] += g[j] * md[i * n + j];
                    }
                }
                pv.accumulate_grad(&gv);
                let mut gm = vec![0.0; k * n];
                for i in 0..k {
                    let vv = vd[i];
                    for j in 0..n {
                        gm[i * n + j] = vv * g[j];
                    }
                }
                pm.accumulate_grad(&gm);
            },
        ))
    }

    /// `[m,n] -> [n,m]`.
    pub fn transpose(&self) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(dim_err(format!("transpose: expected a matrix, got {shape:?}")));
        }
        let (m, n) = (shape[0], shape[1]);
        let xd = self.to_vec();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = xd[i * n + j];
            }
        }
        let parent = self.clone();
        Ok(Tensor::op_output(
            out,
            vec![n, m],
            vec![self.clone()],
            move |g| {
                let mut gx = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        gx[i * n + j] = g[j * m + i];
                    }
                }
                parent.accumulate_grad(&gx);
            },
        ))
    }

    /// Log-softmax along the last axis, computed by max-shifted logsumexp.
    pub fn log_softmax(&self) -> Result<Tensor> {
        let shape = self.shape();
        let cols = *shape
            .last()
            .ok_or_else(|| dim_err("log_softmax: zero-dimensional input".into()))?;
        if cols == 0 {
            return Err(dim_err("log_softmax: empty last axis".into()));
        }
        let xd = self.to_vec();
        let rows = xd.len() / cols;
        let mut out = vec![0.0; xd.len()];
        for r in 0..rows {
            let row = &xd[r * cols..(r + 1) * cols];
            let lse = logsumexp_slice(row);
            for c in 0..cols {
                out[r * cols + c] = row[c] - lse;
            }
        }
        let saved = out.clone();
        let parent = self.clone();
        Ok(Tensor::op_output(out, shape, vec![self.clone()], move |g| {
            let mut gx = vec![0.0; saved.len()];
            for r in 0..rows {
                let gsum: f64 = g[r * cols..(r + 1) * cols].iter().sum();
                for c in 0..cols {
                    let i = r * cols + c;
                    gx[i] = g[i] - saved[i].exp() * gsum;
                }
            }
            parent.accumulate_grad(&gx);
        }))
    }

    /// Logsumexp along the last axis: `[m,n] -> [m]`, `[n] -> [1]`.
    pub fn logsumexp_lastdim(&self) -> Result<Tensor> {
        let shape = self.shape();
        let cols = *shape
            .last()
            .ok_or_else(|| dim_err("logsumexp: zero-dimensional input".into()))?;
        if cols == 0 {
            return Err(dim_err("logsumexp: empty last axis".into()));
        }
        let xd = self.to_vec();
        let rows = xd.len() / cols;
        let out: Vec<f64> = (0..rows)
            .map(|r| logsumexp_slice(&xd[r * cols..(r + 1) * cols]))
            .collect();
        let out_shape = if shape.len() >= 2 {
            shape[..shape.len() - 1].to_vec()
        } else {
            vec![1]
        };
        let saved = out.clone();
        let parent = self.clone();
        Ok(Tensor::op_output(
            out,
            out_shape,
            vec![self.clone()],
            move |g| {
                let mut gx = vec![0.0; xd.len()];
                for r in 0..rows {
                    for c in 0..cols {
                        let i = r * cols + c;
                        gx[i] = g[r] * (xd[i] - saved[r]).exp();
                    }
                }
                parent.accumulate_grad(&gx);
            },
        ))
    }

    /// Full reduction to a `[1]` scalar. The sum of an empty tensor is 0.
    pub fn sum(&self) -> Tensor {
        let total: f64 = self.data().iter().sum();
        let n = self.numel();
        let parent = self.clone();
        Tensor::op_output(vec![total], vec![1], vec![self.clone()], move |g| {
            parent.accumulate_grad(&vec![g[0]; n]);
        })
    }

    /// Pick elements by flat index into a 1-D result. Repeats accumulate on
    /// backward.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor> {
        let n = self.numel();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(dim_err(format!(
                "gather: index {bad} out of range for {n} elements"
            )));
        }
        let xd = self.to_vec();
        let out: Vec<f64> = indices.iter().map(|&i| xd[i]).collect();
        let idx = indices.to_vec();
        let parent = self.clone();
        Ok(Tensor::op_output(
            out,
            vec![indices.len()],
            vec![self.clone()],
            move |g| {
                let mut gx = vec![0.0; n];
                for (pos, &i) in idx.iter().enumerate() {
                    gx[i] += g[pos];
                }
                parent.accumulate_grad(&gx);
            },
        ))
    }

    /// Row `i` of a matrix as a 1-D vector.
    pub fn row(&self, i: usize) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(dim_err(format!("row: expected a matrix, got {shape:?}")));
        }
        let (m, n) = (shape[0], shape[1]);
        if i >= m {
            return Err(dim_err(format!("row: index {i} out of range for {m} rows")));
        }
        let out = self.data()[i * n..(i + 1) * n].to_vec();
        let parent = self.clone();
        Ok(Tensor::op_output(out, vec![n], vec![self.clone()], move |g| {
            let mut gx = vec![0.0; m * n];
            gx[i * n..(i + 1) * n].copy_from_slice(g);
            parent.accumulate_grad(&gx);
        }))
    }

    /// Select rows of a `[V,d]` table by id, producing `[ids.len(), d]`.
    /// Backward scatter-adds into the table, so repeated ids accumulate.
    pub fn lookup_rows(&self, ids: &[usize]) -> Result<Tensor> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(dim_err(format!("lookup_rows: expected a matrix, got {shape:?}")));
        }
        let (v, d) = (shape[0], shape[1]);
        if ids.is_empty() {
            return Err(Error::EmptyInput("lookup_rows: no ids".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(dim_err(format!(
                "lookup_rows: id {bad} out of range for {v} rows"
            )));
        }
        let xd = self.to_vec();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&xd[i * d..(i + 1) * d]);
        }
        let idx = ids.to_vec();
        let parent = self.clone();
        Ok(Tensor::op_output(
            out,
            vec![ids.len(), d],
            vec![self.clone()],
            move |g| {
                let mut gx = vec![0.0; v * d];
                for (t, &i) in idx.iter().enumerate() {
                    for c in 0..d {
                        gx[i * d + c] += g[t * d + c];
                    }
                }
                parent.accumulate_grad(&gx);
            },
        ))
    }
}

/// Stack 1-D vectors of equal length into a `[T,n]` matrix.
pub fn stack_rows(rows: &[Tensor]) -> Result<Tensor> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("stack_rows: no rows".into()));
    }
    let n = rows[0].numel();
    for r in rows {
        let shape = r.shape();
        if shape.len() != 1 || shape[0] != n {
            return Err(dim_err(format!(
                "stack_rows: expected [{n}] vectors, got {shape:?}"
            )));
        }
    }
    let t = rows.len();
    let mut out = Vec::with_capacity(t * n);
    for r in rows {
        out.extend_from_slice(&r.data());
    }
    let parents: Vec<Tensor> = rows.to_vec();
    let handles = parents.clone();
    Ok(Tensor::op_output(out, vec![t, n], parents, move |g| {
        for (i, h) in handles.iter().enumerate() {
            h.accumulate_grad(&g[i * n..(i + 1) * n]);
        }
    }))
}

/// Concatenate 1-D vectors into one 1-D vector.
pub fn concat(parts: &[Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::EmptyInput("concat: no parts".into()));
    }
    let mut out = Vec::new();
    let mut lens = Vec::with_capacity(parts.len());
    for p in parts {
        let shape = p.shape();
        if shape.len() != 1 {
            return Err(dim_err(format!("concat: expected vectors, got {shape:?}")));
        }
        lens.push(shape[0]);
        out.extend_from_slice(&p.data());
    }
    let total = out.len();
    let parents: Vec<Tensor> = parts.to_vec();
    let handles = parents.clone();
    Ok(Tensor::op_output(out, vec![total], parents, move |g| {
        let mut offset = 0;
        for (h, &len) in handles.iter().zip(&lens) {
            h.accumulate_grad(&g[offset..offset + len]);
            offset += len;
        }
    }))
}

/// Width-3 1-D convolution over a character matrix with zero padding of one
/// column on each side, followed by max pooling over all window positions.
///
/// `input` is `[L, d_c]` (one row per character), `filters` is `[F, 3*d_c]`,
/// `bias` is `[F]`. Pooling runs over the affine responses (bias added, no
/// nonlinearity); the result is a 1-D `[F]` vector. Ties in the max pick the
/// earliest window.
pub fn conv1d_maxpool(input: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let ishape = input.shape();
    let fshape = filters.shape();
    let bshape = bias.shape();
    if ishape.len() != 2 {
        return Err(dim_err(format!("conv1d_maxpool: input must be [L,d], got {ishape:?}")));
    }
    let (len, dc) = (ishape[0], ishape[1]);
    if len == 0 {
        return Err(Error::EmptyInput(
            "conv1d_maxpool: empty character sequence".into(),
        ));
    }
    if fshape.len() != 2 || fshape[1] != 3 * dc {
        return Err(dim_err(format!(
            "conv1d_maxpool: filters must be [F,{}], got {fshape:?}",
            3 * dc
        )));
    }
    let f_count = fshape[0];
    if bshape != vec![f_count] {
        return Err(dim_err(format!(
            "conv1d_maxpool: bias must be [{f_count}], got {bshape:?}"
        )));
    }

    let xd = input.to_vec();
    let fd = filters.to_vec();
    let bd = bias.to_vec();
    let mut out = vec![0.0; f_count];
    let mut argmax = vec![0usize; f_count];
    for f in 0..f_count {
        let frow = &fd[f * 3 * dc..(f + 1) * 3 * dc];
        let mut best = f64::NEG_INFINITY;
        let mut best_t = 0;
        for t in 0..len {
            let mut resp = bd[f];
            for w in 0..3usize {
                // window covers character positions t-1, t, t+1
                let pos = t as isize + w as isize - 1;
                if pos < 0 || pos >= len as isize {
                    continue; // zero padding contributes nothing
                }
                let pos = pos as usize;
                for j in 0..dc {
                    resp += frow[w * dc + j] * xd[pos * dc + j];
                }
            }
            if resp > best {
                best = resp;
                best_t = t;
            }
        }
        out[f] = best;
        argmax[f] = best_t;
    }

    let (pi, pf, pb) = (input.clone(), filters.clone(), bias.clone());
    Ok(Tensor::op_output(
        out,
        vec![f_count],
        vec![input.clone(), filters.clone(), bias.clone()],
        move |g| {
            let mut gi = vec![0.0; len * dc];
            let mut gf = vec![0.0; f_count * 3 * dc];
            let mut gb = vec![0.0; f_count];
            for f in 0..f_count {
                let gv = g[f];
                gb[f] += gv;
                let t = argmax[f];
                for w in 0..3usize {
                    let pos = t as isize + w as isize - 1;
                    if pos < 0 || pos >= len as isize {
                        continue;
                    }
                    let pos = pos as usize;
                    for j in 0..dc {
                        gf[f * 3 * dc + w * dc + j] += gv * xd[pos * dc + j];
                        gi[pos * dc + j] += gv * fd[f * 3 * dc + w * dc + j];
                    }
                }
            }
            pi.accumulate_grad(&gi);
            pf.accumulate_grad(&gf);
            pb.accumulate_grad(&gb);
        },
    ))
}
