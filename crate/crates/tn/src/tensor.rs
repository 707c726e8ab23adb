//! Dense labeled tensors and pairwise contraction.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use matrixmultiply::CGemmOption;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Cheaply clonable index name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(name: impl AsRef<str>) -> Self {
        Label(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Name used for the conjugate (bra) copy of this index.
    pub fn dual(&self) -> Label {
        Label::new(format!("{}*", self.0))
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

/// Dense complex tensor with row-major data in label order.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    labels: Vec<Label>,
    dims: Vec<usize>,
    data: Vec<C64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.labels, self.dims)
    }
}

impl Tensor {
    pub fn new(labels: Vec<Label>, dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::Shape(format!("{} labels but {} dims", labels.len(), dims.len())));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
        }
        let size: usize = dims.iter().product();
        if size != data.len() {
            return Err(Error::Shape(format!("dims {dims:?} need {size} entries, got {}", data.len())));
        }
        Ok(Self { labels, dims, data })
    }

    pub fn scalar(value: C64) -> Self {
        Self {
            labels: vec![],
            dims: vec![],
            data: vec![value],
        }
    }

    pub fn zeros(labels: Vec<Label>, dims: Vec<usize>) -> Result<Self> {
        let size = dims.iter().product();
        Self::new(labels, dims, vec![ZERO; size])
    }

    pub fn ones(labels: Vec<Label>, dims: Vec<usize>) -> Result<Self> {
        let size = dims.iter().product();
        Self::new(labels, dims, vec![C64::new(1.0, 0.0); size])
    }

    /// Builds from a function of the multi-index.
    pub fn from_fn(labels: Vec<Label>, dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Result<Self> {
        let size: usize = dims.iter().product();
        let mut data = Vec::with_capacity(size);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..size {
            data.push(f(&idx));
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self::new(labels, dims, data)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn position(&self, label: &Label) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn has(&self, label: &Label) -> bool {
        self.position(label).is_some()
    }

    pub fn dim(&self, label: &Label) -> Option<usize> {
        self.position(label).map(|i| self.dims[i])
    }

    /// Value of a rank-0 tensor.
    pub fn scalar_value(&self) -> Result<C64> {
        if self.rank() != 0 {
            return Err(Error::Shape(format!("expected a scalar, got labels {:?}", self.labels)));
        }
        Ok(self.data[0])
    }

    pub fn conj(&self) -> Tensor {
        Tensor {
            labels: self.labels.clone(),
            dims: self.dims.clone(),
            data: self.data.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn scale(&mut self, factor: C64) {
        for c in &mut self.data {
            *c *= factor;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, c| acc + c.norm_sqr()).sqrt()
    }

    pub fn norm1(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).sum()
    }

    pub fn sum(&self) -> C64 {
        self.data.iter().sum()
    }

    /// Renames labels through `f`; the result must stay unique.
    pub fn relabel(&self, mut f: impl FnMut(&Label) -> Label) -> Result<Tensor> {
        Tensor::new(self.labels.iter().map(&mut f).collect(), self.dims.clone(), self.data.clone())
    }

    pub fn rename(&self, from: &Label, to: &Label) -> Result<Tensor> {
        self.relabel(|l| if l == from { to.clone() } else { l.clone() })
    }

    /// Reorders axes to `order`, which must be a permutation of the labels.
    pub fn permute(&self, order: &[Label]) -> Result<Tensor> {
        if order.len() != self.rank() {
            return Err(Error::Shape(format!("permutation {order:?} of {:?}", self.labels)));
        }
        let mut axes = Vec::with_capacity(order.len());
        for l in order {
            let p = self.position(l).ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
            if axes.contains(&p) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            axes.push(p);
        }
        Ok(self.permute_axes(&axes))
    }

    fn permute_axes(&self, axes: &[usize]) -> Tensor {
        let labels: Vec<Label> = axes.iter().map(|&a| self.labels[a].clone()).collect();
        let dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        if axes.iter().enumerate().all(|(i, &a)| i == a) {
            return Tensor {
                labels,
                dims,
                data: self.data.clone(),
            };
        }
        let data = permute_data(&self.data, &self.dims, axes);
        Tensor { labels, dims, data }
    }

    /// Sums over the given labels.
    pub fn sum_over(&self, labels: &[Label]) -> Result<Tensor> {
        if labels.is_empty() {
            return Ok(self.clone());
        }
        let mut keep = Vec::new();
        for l in &self.labels {
            if !labels.contains(l) {
                keep.push(l.clone());
            }
        }
        for l in labels {
            if !self.has(l) {
                return Err(Error::UnknownLabel(l.to_string()));
            }
        }
        let mut order = keep.clone();
        order.extend(labels.iter().cloned());
        let p = self.permute(&order)?;
        let inner: usize = labels.iter().map(|l| self.dim(l).unwrap()).product();
        let outer: usize = keep.iter().map(|l| self.dim(l).unwrap()).product();
        let mut data = vec![ZERO; outer];
        if inner > 0 {
            for (o, d) in data.iter_mut().enumerate() {
                *d = p.data[o * inner..(o + 1) * inner].iter().sum();
            }
        }
        let dims = keep.iter().map(|l| self.dim(l).unwrap()).collect();
        Tensor::new(keep, dims, data)
    }

    /// Trace over two equal-dimension labels of the same tensor.
    pub fn trace_pair(&self, a: &Label, b: &Label) -> Result<Tensor> {
        let (da, db) = (
            self.dim(a).ok_or_else(|| Error::UnknownLabel(a.to_string()))?,
            self.dim(b).ok_or_else(|| Error::UnknownLabel(b.to_string()))?,
        );
        if da != db {
            return Err(Error::Dimension {
                label: format!("{a}/{b}"),
                left: da,
                right: db,
            });
        }
        let keep: Vec<Label> = self.labels.iter().filter(|l| *l != a && *l != b).cloned().collect();
        let mut order = keep.clone();
        order.push(a.clone());
        order.push(b.clone());
        let p = self.permute(&order)?;
        let block = da * da;
        let outer = if block == 0 { keep.iter().map(|l| self.dim(l).unwrap()).product() } else { p.len() / block };
        let mut data = vec![ZERO; outer];
        for (o, d) in data.iter_mut().enumerate() {
            for i in 0..da {
                *d += p.data[o * block + i * da + i];
            }
        }
        let dims = keep.iter().map(|l| self.dim(l).unwrap()).collect();
        Tensor::new(keep, dims, data)
    }

    /// Matrix view with `rows` as the row multi-index and the rest as columns.
    pub fn to_matrix(&self, rows: &[Label]) -> Result<(DMatrix<C64>, Vec<Label>)> {
        let cols: Vec<Label> = self.labels.iter().filter(|l| !rows.contains(l)).cloned().collect();
        let mut order = rows.to_vec();
        order.extend(cols.iter().cloned());
        let p = self.permute(&order)?;
        let m: usize = rows.iter().map(|l| self.dim(l).unwrap()).product();
        let n: usize = cols.iter().map(|l| self.dim(l).unwrap()).product();
        Ok((DMatrix::from_row_slice(m, n, &p.data), cols))
    }

    /// Inverse of [`Tensor::to_matrix`].
    pub fn from_matrix(m: &DMatrix<C64>, labels: Vec<Label>, dims: Vec<usize>) -> Result<Tensor> {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)]);
            }
        }
        Tensor::new(labels, dims, data)
    }
}

fn permute_data(src: &[C64], dims: &[usize], axes: &[usize]) -> Vec<C64> {
    let rank = dims.len();
    let size: usize = dims.iter().product();
    if size == 0 {
        return Vec::new();
    }
    let mut src_strides = vec![1usize; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        src_strides[i] = src_strides[i + 1] * dims[i + 1];
    }
    let out_dims: Vec<usize> = axes.iter().map(|&a| dims[a]).collect();
    let strides: Vec<usize> = axes.iter().map(|&a| src_strides[a]).collect();
    let mut out = Vec::with_capacity(size);
    let last = rank - 1;
    let (inner_dim, inner_stride) = (out_dims[last], strides[last]);
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    let outer = size / inner_dim;
    for _ in 0..outer {
        if inner_stride == 1 {
            out.extend_from_slice(&src[offset..offset + inner_dim]);
        } else {
            let mut o = offset;
            for _ in 0..inner_dim {
                out.push(src[o]);
                o += inner_stride;
            }
        }
        for ax in (0..last).rev() {
            idx[ax] += 1;
            offset += strides[ax];
            if idx[ax] < out_dims[ax] {
                break;
            }
            offset -= strides[ax] * out_dims[ax];
            idx[ax] = 0;
        }
    }
    out
}

/// `c[b] += a[b] * b[b]` for `batch` stacked `m x k` by `k x n` products.
fn batched_gemm(batch: usize, m: usize, k: usize, n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut c = vec![ZERO; batch * m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    for t in 0..batch {
        let (ao, bo, co) = (t * m * k, t * k * n, t * m * n);
        // SAFETY: Complex64 is repr(C) {re, im}, layout-identical to [f64; 2];
        // slices are sized exactly for the row-major strides passed.
        unsafe {
            matrixmultiply::zgemm(
                CGemmOption::Standard,
                CGemmOption::Standard,
                m,
                k,
                n,
                [1.0, 0.0],
                a[ao..].as_ptr() as *const [f64; 2],
                k as isize,
                1,
                b[bo..].as_ptr() as *const [f64; 2],
                n as isize,
                1,
                [0.0, 0.0],
                c[co..].as_mut_ptr() as *mut [f64; 2],
                n as isize,
                1,
            );
        }
    }
    c
}

/// Contracts two tensors. Shared labels in `keep` are batch indices, the
/// remaining shared labels are summed. Result order: batch, left, right.
pub fn contract_pair(a: &Tensor, b: &Tensor, keep: &dyn Fn(&Label) -> bool) -> Result<Tensor> {
    let mut batch = Vec::new();
    let mut summed = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (i, l) in a.labels.iter().enumerate() {
        match b.position(l) {
            Some(j) => {
                if a.dims[i] != b.dims[j] {
                    return Err(Error::Dimension {
                        label: l.to_string(),
                        left: a.dims[i],
                        right: b.dims[j],
                    });
                }
                if keep(l) {
                    batch.push(l.clone());
                } else {
                    summed.push(l.clone());
                }
            }
            None => left.push(l.clone()),
        }
    }
    for l in &b.labels {
        if !a.has(l) {
            right.push(l.clone());
        }
    }
    let dim_a = |l: &Label| a.dim(l).unwrap();
    let dim_b = |l: &Label| b.dim(l).unwrap();
    let nb: usize = batch.iter().map(dim_a).product();
    let m: usize = left.iter().map(dim_a).product();
    let k: usize = summed.iter().map(dim_a).product();
    let n: usize = right.iter().map(dim_b).product();

    let a_order: Vec<Label> = batch.iter().chain(&left).chain(&summed).cloned().collect();
    let b_order: Vec<Label> = batch.iter().chain(&summed).chain(&right).cloned().collect();
    let ap = a.permute(&a_order)?;
    let bp = b.permute(&b_order)?;
    let data = batched_gemm(nb, m, k, n, &ap.data, &bp.data);

    let labels: Vec<Label> = batch.iter().chain(&left).chain(&right).cloned().collect();
    let dims: Vec<usize> = batch
        .iter()
        .map(dim_a)
        .chain(left.iter().map(dim_a))
        .chain(right.iter().map(dim_b))
        .collect();
    Tensor::new(labels, dims, data)
}

/// One pairwise step of a contraction path, by position in the live list
/// (inputs first, each step's result appended at the end).
pub type ContractionPath = Vec<(usize, usize)>;

#[derive(Clone, Debug)]
struct Shape {
    labels: Vec<Label>,
    dims: Vec<usize>,
}

impl Shape {
    fn size(&self) -> f64 {
        self.dims.iter().map(|&d| d as f64).product()
    }
}

/// Cost summary of a path.
#[derive(Clone, Debug, Default)]
pub struct PathCost {
    pub flops: f64,
    pub peak_size: f64,
    /// Largest-dimension label of the most expensive step.
    pub bottleneck: Option<Label>,
}

fn check_network(tensors: &[&Tensor], output: &[Label]) -> Result<HashMap<Label, usize>> {
    let mut dims: HashMap<Label, usize> = HashMap::new();
    for t in tensors {
        for (l, &d) in t.labels.iter().zip(&t.dims) {
            if let Some(&prev) = dims.get(l) {
                if prev != d {
                    return Err(Error::Dimension {
                        label: l.to_string(),
                        left: prev,
                        right: d,
                    });
                }
            } else {
                dims.insert(l.clone(), d);
            }
        }
    }
    for (i, l) in output.iter().enumerate() {
        if output[..i].contains(l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
        if !dims.contains_key(l) {
            return Err(Error::UnknownLabel(l.to_string()));
        }
    }
    Ok(dims)
}

fn merge_shapes(a: &Shape, b: &Shape, kept: impl Fn(&Label) -> bool) -> (Shape, f64) {
    let mut labels = Vec::new();
    let mut dims = Vec::new();
    let mut flops = 1.0;
    for (l, &d) in a.labels.iter().zip(&a.dims) {
        flops *= d as f64;
        if kept(l) {
            labels.push(l.clone());
            dims.push(d);
        }
    }
    for (l, &d) in b.labels.iter().zip(&b.dims) {
        if !a.labels.contains(l) {
            flops *= d as f64;
            if kept(l) {
                labels.push(l.clone());
                dims.push(d);
            }
        }
    }
    (Shape { labels, dims }, flops)
}

/// Greedy path: at each step contract the pair with the smallest result,
/// ties broken by flops. Pairs sharing no label are only taken when nothing
/// else is left.
pub fn greedy_path(tensors: &[&Tensor], output: &[Label]) -> Result<(ContractionPath, PathCost)> {
    check_network(tensors, output)?;
    let mut live: Vec<Option<Shape>> = tensors
        .iter()
        .map(|t| {
            Some(Shape {
                labels: t.labels.clone(),
                dims: t.dims.clone(),
            })
        })
        .collect();
    let mut counts: HashMap<Label, usize> = HashMap::new();
    for t in tensors {
        for l in &t.labels {
            *counts.entry(l.clone()).or_default() += 1;
        }
    }
    let mut owners: HashMap<Label, Vec<usize>> = HashMap::new();
    for (i, t) in tensors.iter().enumerate() {
        for l in &t.labels {
            owners.entry(l.clone()).or_default().push(i);
        }
    }
    let mut path = Vec::new();
    let mut cost = PathCost::default();
    let mut worst_step = 0.0;
    loop {
        let ids: Vec<usize> = (0..live.len()).filter(|&i| live[i].is_some()).collect();
        if ids.len() <= 1 {
            break;
        }
        // pairs sharing a label always beat outer products, so only those
        // are scored unless the network is disconnected
        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for owners in owners.values() {
            for (x, &i) in owners.iter().enumerate() {
                for &j in &owners[x + 1..] {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
        if pairs.is_empty() {
            for (x, &i) in ids.iter().enumerate() {
                for &j in &ids[x + 1..] {
                    pairs.insert((i, j));
                }
            }
        }
        let mut best: Option<(bool, f64, f64, usize, usize)> = None;
        for &(i, j) in &pairs {
            let (a, b) = (live[i].as_ref().unwrap(), live[j].as_ref().unwrap());
            let shares = a.labels.iter().any(|l| b.labels.contains(l));
            let kept = |l: &Label| {
                let inside = a.labels.contains(l) as usize + b.labels.contains(l) as usize;
                output.contains(l) || counts[l] > inside
            };
            let (shape, flops) = merge_shapes(a, b, kept);
            let key = (!shares, shape.size(), flops, i, j);
            let better = match &best {
                None => true,
                Some(cur) => (key.0, key.1, key.2) < (cur.0, cur.1, cur.2),
            };
            if better {
                best = Some(key);
            }
        }
        let (_, _, _, i, j) = best.unwrap();
        let a = live[i].take().unwrap();
        let b = live[j].take().unwrap();
        let kept = |l: &Label| {
            let inside = a.labels.contains(l) as usize + b.labels.contains(l) as usize;
            output.contains(l) || counts[l] > inside
        };
        let (shape, flops) = merge_shapes(&a, &b, kept);
        for l in a.labels.iter().chain(&b.labels) {
            *counts.get_mut(l).unwrap() -= 1;
        }
        for l in &shape.labels {
            *counts.get_mut(l).unwrap() += 1;
        }
        cost.flops += flops;
        cost.peak_size = cost.peak_size.max(shape.size());
        if flops > worst_step {
            worst_step = flops;
            let mut all: Vec<(usize, Label)> = a
                .labels
                .iter()
                .zip(&a.dims)
                .chain(b.labels.iter().zip(&b.dims))
                .map(|(l, &d)| (d, l.clone()))
                .collect();
            all.sort_by(|x, y| x.0.cmp(&y.0).then_with(|| y.1.cmp(&x.1)));
            cost.bottleneck = all.last().map(|x| x.1.clone());
        }
        for l in a.labels.iter().chain(&b.labels) {
            if let Some(o) = owners.get_mut(l) {
                o.retain(|&k| k != i && k != j);
                if o.is_empty() {
                    owners.remove(l);
                }
            }
        }
        let new_id = live.len();
        for l in &shape.labels {
            owners.entry(l.clone()).or_default().push(new_id);
        }
        live.push(Some(shape));
        path.push((i, j));
    }
    Ok((path, cost))
}

/// Contracts along `path` (see [`ContractionPath`]) and returns the tensor
/// with labels ordered as `output`.
pub fn contract_with_path(tensors: &[&Tensor], output: &[Label], path: &ContractionPath) -> Result<Tensor> {
    check_network(tensors, output)?;
    if tensors.is_empty() {
        if !output.is_empty() {
            return Err(Error::UnknownLabel(output[0].to_string()));
        }
        return Ok(Tensor::scalar(C64::new(1.0, 0.0)));
    }
    let mut counts: HashMap<Label, usize> = HashMap::new();
    for t in tensors {
        for l in &t.labels {
            *counts.entry(l.clone()).or_default() += 1;
        }
    }
    // Sum out labels that occur once and are not requested.
    let mut live: Vec<Option<Tensor>> = Vec::with_capacity(tensors.len() + path.len());
    for t in tensors {
        let lonely: Vec<Label> = t
            .labels
            .iter()
            .filter(|l| counts[*l] == 1 && !output.contains(l))
            .cloned()
            .collect();
        if lonely.is_empty() {
            live.push(Some((*t).clone()));
        } else {
            for l in &lonely {
                counts.remove(l);
            }
            live.push(Some(t.sum_over(&lonely)?));
        }
    }
    for &(i, j) in path {
        let a = live
            .get_mut(i)
            .and_then(Option::take)
            .ok_or_else(|| Error::Structure(format!("path step uses dead tensor {i}")))?;
        let b = live
            .get_mut(j)
            .and_then(Option::take)
            .ok_or_else(|| Error::Structure(format!("path step uses dead tensor {j}")))?;
        let keep = |l: &Label| {
            let inside = a.has(l) as usize + b.has(l) as usize;
            output.contains(l) || counts.get(l).copied().unwrap_or(0) > inside
        };
        let mut c = contract_pair(&a, &b, &keep)?;
        // labels present on one side only but no longer needed
        let stale: Vec<Label> = c
            .labels
            .iter()
            .filter(|l| {
                let inside = a.has(l) as usize + b.has(l) as usize;
                !(output.contains(l) || counts.get(*l).copied().unwrap_or(0) > inside)
            })
            .cloned()
            .collect();
        if !stale.is_empty() {
            c = c.sum_over(&stale)?;
        }
        for l in a.labels.iter().chain(&b.labels) {
            if let Some(v) = counts.get_mut(l) {
                *v -= 1;
            }
        }
        for l in &c.labels {
            *counts.entry(l.clone()).or_default() += 1;
        }
        live.push(Some(c));
    }
    let mut rest: Vec<Tensor> = live.into_iter().flatten().collect();
    if rest.len() != 1 {
        return Err(Error::Structure(format!("path leaves {} tensors", rest.len())));
    }
    let result = rest.pop().unwrap();
    let extra: Vec<Label> = result.labels.iter().filter(|l| !output.contains(l)).cloned().collect();
    let result = if extra.is_empty() { result } else { result.sum_over(&extra)? };
    result.permute(output)
}

/// Contracts a network: labels shared by several tensors are summed unless
/// they appear in `output`, in which case they act as batch indices.
pub fn contract(tensors: &[&Tensor], output: &[Label]) -> Result<Tensor> {
    let (path, _) = greedy_path(tensors, output)?;
    contract_with_path(tensors, output, &path)
}

/// Left-to-right path, mainly useful as an independent check of [`greedy_path`].
pub fn sequential_path(count: usize) -> ContractionPath {
    let mut path = Vec::new();
    if count < 2 {
        return path;
    }
    let mut acc = 0usize;
    for i in 1..count {
        path.push((acc, i));
        acc = count + i - 1;
    }
    path
}

/// Result of [`truncated_svd`]: `t ~ u * diag(s) * v`.
#[derive(Clone, Debug)]
pub struct SvdSplit {
    /// Labels `[left..., bond]`.
    pub u: Tensor,
    pub s: Vec<f64>,
    /// Labels `[bond, right...]`.
    pub v: Tensor,
    /// Discarded fraction `sum_dropped s^2 / sum s^2`.
    pub discarded_weight: f64,
}

/// Relative size below which singular and eigenvalues count as zero.
pub const RELATIVE_ZERO: f64 = 1e-12;

/// Smallest rank whose dropped tail satisfies `sqrt(sum tail s^2) <= kappa * |t|`,
/// capped at `chi`. Values at or below `RELATIVE_ZERO * s_max` are always dropped.
pub fn truncation_rank(s: &[f64], chi: usize, kappa: f64) -> usize {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total == 0.0 || s.is_empty() {
        return 0;
    }
    let smax = s[0];
    let budget = (kappa * total.sqrt()).powi(2);
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 0 {
        let next = tail + s[r - 1] * s[r - 1];
        if s[r - 1] > RELATIVE_ZERO * smax && next > budget {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.min(chi)
}

fn to_faer(m: &DMatrix<C64>) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Singular values (descending) with left/right vectors of a matrix:
/// `m = u * diag(s) * vt`, thin.
pub fn svd_sorted(m: &DMatrix<C64>) -> Result<(DMatrix<C64>, Vec<f64>, DMatrix<C64>)> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok((DMatrix::zeros(rows, 0), vec![], DMatrix::zeros(0, cols)));
    }
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
    let (u, v, sv) = (svd.U(), svd.V(), svd.S().column_vector());
    let s: Vec<f64> = (0..k).map(|i| sv[i].re.max(0.0)).collect();
    let u = DMatrix::from_fn(rows, k, |r, c| u[(r, c)]);
    let vt = DMatrix::from_fn(k, cols, |r, c| v[(c, r)].conj());
    Ok((u, s, vt))
}

/// Splits `t` across `left` / remaining labels, keeping at most `chi`
/// singular values subject to the `kappa` tail rule.
pub fn truncated_svd(t: &Tensor, left: &[Label], chi: usize, kappa: f64, bond: &Label) -> Result<SvdSplit> {
    if left.is_empty() || left.len() >= t.rank() {
        return Err(Error::Shape("left labels must split the tensor into two non-empty groups".into()));
    }
    let (m, right) = t.to_matrix(left)?;
    let (u, s, vt) = svd_sorted(&m)?;
    let r = truncation_rank(&s, chi, kappa);
    let total: f64 = s.iter().map(|x| x * x).sum();
    let dropped: f64 = s[r..].iter().map(|x| x * x).sum();
    let mut ul = left.to_vec();
    ul.push(bond.clone());
    let mut ud: Vec<usize> = left.iter().map(|l| t.dim(l).unwrap()).collect();
    ud.push(r);
    let mut vl = vec![bond.clone()];
    vl.extend(right.iter().cloned());
    let mut vd = vec![r];
    vd.extend(right.iter().map(|l| t.dim(l).unwrap()));
    let u = Tensor::from_matrix(&u.columns(0, r).into_owned(), ul, ud)?;
    let v = Tensor::from_matrix(&vt.rows(0, r).into_owned(), vl, vd)?;
    Ok(SvdSplit {
        u,
        s: s[..r].to_vec(),
        v,
        discarded_weight: if total > 0.0 { dropped / total } else { 0.0 },
    })
}

/// Eigendecomposition of a Hermitian positive semi-definite matrix.
#[derive(Clone, Debug)]
pub struct PsdEigen {
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: DMatrix<C64>,
    /// Eigenvalues, descending, clamped at zero.
    pub values: Vec<f64>,
    /// Set when an eigenvalue below `-1e-10 * max` was clamped.
    pub negative: bool,
}

/// Hermitian-symmetrizes `m` and diagonalizes it. Eigenvalues below
/// `RELATIVE_ZERO * max` are set to zero.
pub fn eigh_psd(m: &DMatrix<C64>) -> Result<PsdEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!("eigh of non-square {}x{} matrix", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(PsdEigen {
            vectors: DMatrix::zeros(0, 0),
            values: vec![],
            negative: false,
        });
    }
    let h = to_faer(&(m + m.adjoint()).scale(0.5));
    let eig = h
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let (w, ev) = (eig.U(), eig.S().column_vector());
    // ascending from faer; reverse to descending
    let order: Vec<usize> = (0..n).rev().collect();
    let max = ev[order[0]].re.max(0.0);
    let mut negative = false;
    let values: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = ev[i].re;
            if v < -1e-10 * max {
                negative = true;
            }
            if v <= RELATIVE_ZERO * max {
                0.0
            } else {
                v
            }
        })
        .collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| w[(r, order[c])]);
    Ok(PsdEigen { vectors, values, negative })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Label {
        Label::new(s)
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn matrix_vector() {
        let a = Tensor::new(vec![l("i"), l("j")], vec![2, 2], vec![c(1.), c(2.), c(3.), c(4.)]).unwrap();
        let v = Tensor::new(vec![l("j")], vec![2], vec![c(1.), c(-1.)]).unwrap();
        let r = contract(&[&a, &v], &[l("i")]).unwrap();
        assert_eq!(r.data(), &[c(-1.), c(-1.)]);
    }

    #[test]
    fn trace() {
        let a = Tensor::new(vec![l("i"), l("k")], vec![2, 2], vec![c(1.), c(2.), c(3.), c(4.)]).unwrap();
        let t = a.trace_pair(&l("i"), &l("k")).unwrap();
        assert_eq!(t.scalar_value().unwrap(), c(5.));
    }

    #[test]
    fn permutation_round_trip() {
        let t = Tensor::from_fn(vec![l("a"), l("b"), l("c")], vec![2, 3, 4], |ix| c((ix[0] * 100 + ix[1] * 10 + ix[2]) as f64))
            .unwrap();
        let p = t.permute(&[l("c"), l("a"), l("b")]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        assert_eq!(p.data()[6 + 3 + 2], c(121.));
        assert_eq!(p.permute(&[l("a"), l("b"), l("c")]).unwrap(), t);
    }

    #[test]
    fn batch_labels_kept() {
        let a = Tensor::new(vec![l("b"), l("i")], vec![2, 2], vec![c(1.), c(2.), c(3.), c(4.)]).unwrap();
        let b = Tensor::new(vec![l("b"), l("i")], vec![2, 2], vec![c(1.), c(1.), c(2.), c(0.)]).unwrap();
        let r = contract(&[&a, &b], &[l("b")]).unwrap();
        assert_eq!(r.data(), &[c(3.), c(6.)]);
    }

    #[test]
    fn zero_dimension_bond() {
        let a = Tensor::zeros(vec![l("i"), l("x")], vec![2, 0]).unwrap();
        let b = Tensor::zeros(vec![l("x"), l("j")], vec![0, 3]).unwrap();
        let r = contract(&[&a, &b], &[l("i"), l("j")]).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.data().iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn rank_one_svd() {
        let t = Tensor::from_fn(vec![l("a"), l("b")], vec![3, 4], |ix| c(((ix[0] + 1) * (ix[1] + 2)) as f64)).unwrap();
        let s = truncated_svd(&t, &[l("a")], 8, 0.0, &l("x")).unwrap();
        assert_eq!(s.s.len(), 1);
        assert!(s.discarded_weight < 1e-20);
    }

    #[test]
    fn eigh_diag() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.), c(0.), c(0.), c(4.)]);
        let e = eigh_psd(&m).unwrap();
        assert_eq!(e.values, vec![4.0, 1.0]);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!(matches!(eigh_psd(&DMatrix::zeros(2, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn errors() {
        let a = Tensor::ones(vec![l("i")], vec![2]).unwrap();
        let b = Tensor::ones(vec![l("i")], vec![3]).unwrap();
        assert!(matches!(contract(&[&a, &b], &[]), Err(Error::Dimension { .. })));
        assert!(matches!(contract(&[&a], &[l("q")]), Err(Error::UnknownLabel(_))));
        assert!(matches!(
            Tensor::new(vec![l("i"), l("i")], vec![1, 1], vec![c(1.)]),
            Err(Error::DuplicateLabel(_))
        ));
    }
}
