//! Reverse-mode differentiation over a recorded list of 2-D operations.
//!
//! Values are `rows × cols` matrices. Stacked rows can be grouped into
//! segments (one per graph) so that pooling runs over a whole batch at once.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;

use super::{ParamId, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

/// Row ranges of stacked inputs, one per graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segments {
    pub ranges: Vec<Range<usize>>,
    /// Segment of every row.
    pub owner: Vec<usize>,
}

impl Segments {
    pub fn from_sizes(sizes: &[usize]) -> Arc<Self> {
        let mut ranges = Vec::with_capacity(sizes.len());
        let mut owner = Vec::new();
        let mut start = 0;
        for (g, &n) in sizes.iter().enumerate() {
            ranges.push(start..start + n);
            owner.extend(std::iter::repeat_n(g, n));
            start += n;
        }
        Arc::new(Segments { ranges, owner })
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn total_rows(&self) -> usize {
        self.owner.len()
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Affine { x: NodeId, w: ParamId, b: Option<ParamId> },
    Relu(NodeId),
    Add(NodeId, NodeId),
    /// `x[r] + g[owner(r)]`.
    AddSegment { x: NodeId, g: NodeId, seg: Arc<Segments> },
    /// Mean of each segment's rows; empty segments give zero.
    SegmentMean { x: NodeId, seg: Arc<Segments> },
    /// Mean of the other rows of the same segment; singletons give zero.
    MeanExcluding { x: NodeId, seg: Arc<Segments> },
    /// Elementwise product with a fixed mask.
    Mask { x: NodeId, mask: Vec<f64> },
}

struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
}

/// One forward pass. Gradients flow into per-parameter buffers on `backward`.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { op, rows, cols, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> NodeId {
        assert_eq!(value.len(), rows * cols, "input shape");
        self.push(Op::Input, rows, cols, value)
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Which ReLU inputs are positive, over every ReLU on the tape in order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(&self.nodes[x.0].value),
                _ => None,
            })
            .flat_map(|v| v.iter().map(|&a| a > 0.0))
            .collect()
    }

    /// `x Wᵀ + b` with `W: [out, in]`.
    pub fn affine(&mut self, x: NodeId, w: ParamId, b: Option<ParamId>) -> NodeId {
        let wt = self.params.get(w);
        let (out, inp) = (wt.shape[0], wt.shape[1]);
        let (rows, cols) = self.shape(x);
        assert_eq!(cols, inp, "affine input width for {}", self.params.name(w));
        let xv = &self.nodes[x.0].value;
        let mut y = vec![0.0; rows * out];
        for r in 0..rows {
            let xr = &xv[r * inp..(r + 1) * inp];
            let yr = &mut y[r * out..(r + 1) * out];
            for (o, yo) in yr.iter_mut().enumerate() {
                let wr = &wt.data[o * inp..(o + 1) * inp];
                *yo = dot(xr, wr);
            }
            if let Some(b) = b {
                for (yo, bo) in yr.iter_mut().zip(&self.params.get(b).data) {
                    *yo += bo;
                }
            }
        }
        self.push(Op::Affine { x, w, b }, rows, out, y)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let (r, c) = self.shape(x);
        let v = self.nodes[x.0].value.iter().map(|&a| a.max(0.0)).collect();
        self.push(Op::Relu(x), r, c, v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        assert_eq!((r, c), self.shape(b), "add shapes");
        let v = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(Op::Add(a, b), r, c, v)
    }

    pub fn add_segment(&mut self, x: NodeId, g: NodeId, seg: &Arc<Segments>) -> NodeId {
        let (rows, cols) = self.shape(x);
        assert_eq!(rows, seg.total_rows());
        assert_eq!(self.shape(g), (seg.len(), cols));
        let mut v = self.nodes[x.0].value.clone();
        let gv = &self.nodes[g.0].value;
        for r in 0..rows {
            let o = seg.owner[r];
            for c in 0..cols {
                v[r * cols + c] += gv[o * cols + c];
            }
        }
        self.push(Op::AddSegment { x, g, seg: seg.clone() }, rows, cols, v)
    }

    pub fn segment_mean(&mut self, x: NodeId, seg: &Arc<Segments>) -> NodeId {
        let (rows, cols) = self.shape(x);
        assert_eq!(rows, seg.total_rows());
        let xv = &self.nodes[x.0].value;
        let mut v = vec![0.0; seg.len() * cols];
        for (g, range) in seg.ranges.iter().enumerate() {
            if range.is_empty() {
                continue;
            }
            let inv = 1.0 / range.len() as f64;
            for r in range.clone() {
                for c in 0..cols {
                    v[g * cols + c] += xv[r * cols + c] * inv;
                }
            }
        }
        self.push(Op::SegmentMean { x, seg: seg.clone() }, seg.len(), cols, v)
    }

    /// `(Σ_segment − x_r) / (n − 1)`: exact in the presence of tied rows.
    pub fn mean_excluding(&mut self, x: NodeId, seg: &Arc<Segments>) -> NodeId {
        let (rows, cols) = self.shape(x);
        assert_eq!(rows, seg.total_rows());
        let xv = &self.nodes[x.0].value;
        let mut v = vec![0.0; rows * cols];
        let mut sum = vec![0.0; cols];
        for range in &seg.ranges {
            if range.len() < 2 {
                continue;
            }
            sum.iter_mut().for_each(|s| *s = 0.0);
            for r in range.clone() {
                for c in 0..cols {
                    sum[c] += xv[r * cols + c];
                }
            }
            let inv = 1.0 / (range.len() - 1) as f64;
            for r in range.clone() {
                for c in 0..cols {
                    v[r * cols + c] = (sum[c] - xv[r * cols + c]) * inv;
                }
            }
        }
        self.push(Op::MeanExcluding { x, seg: seg.clone() }, rows, cols, v)
    }

    /// Inverted dropout: zeroes each element with probability `p`, scales survivors by `1/(1-p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: NodeId, p: f64, rng: &mut R) -> NodeId {
        if p <= 0.0 {
            return x;
        }
        let (r, c) = self.shape(x);
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..r * c)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        let v = self.nodes[x.0]
            .value
            .iter()
            .zip(&mask)
            .map(|(a, m)| a * m)
            .collect();
        self.push(Op::Mask { x, mask }, r, c, v)
    }

    /// Backpropagates `seeds` (node, gradient of the same size) and returns one gradient per parameter.
    pub fn backward(&mut self, seeds: &[(NodeId, Vec<f64>)]) -> Vec<Tensor> {
        let mut g: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for (id, grad) in seeds {
            assert_eq!(grad.len(), self.nodes[id.0].value.len(), "seed size");
            accumulate(&mut g[id.0], grad);
        }
        self.grads = self.params.zeros_like().into_iter().map(|t| t.data).collect();
        for i in (0..self.nodes.len()).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            let (rows, cols) = (node.rows, node.cols);
            match &node.op {
                Op::Input => {}
                Op::Affine { x, w, b } => {
                    let wt = self.params.get(*w);
                    let inp = wt.shape[1];
                    let xv = &self.nodes[x.0].value;
                    let gw = &mut self.grads[w.0];
                    for r in 0..rows {
                        let xr = &xv[r * inp..(r + 1) * inp];
                        for o in 0..cols {
                            let d = dy[r * cols + o];
                            if d != 0.0 {
                                axpy(&mut gw[o * inp..(o + 1) * inp], d, xr);
                            }
                        }
                    }
                    if let Some(b) = b {
                        let gb = &mut self.grads[b.0];
                        for r in 0..rows {
                            for o in 0..cols {
                                gb[o] += dy[r * cols + o];
                            }
                        }
                    }
                    if !matches!(self.nodes[x.0].op, Op::Input) {
                        let mut dx = vec![0.0; rows * inp];
                        for r in 0..rows {
                            let dxr = &mut dx[r * inp..(r + 1) * inp];
                            for o in 0..cols {
                                let d = dy[r * cols + o];
                                if d != 0.0 {
                                    axpy(dxr, d, &wt.data[o * inp..(o + 1) * inp]);
                                }
                            }
                        }
                        accumulate(&mut g[x.0], &dx);
                    }
                }
                Op::Relu(x) => {
                    let dx: Vec<f64> = dy
                        .iter()
                        .zip(&node.value)
                        .map(|(d, y)| if *y > 0.0 { *d } else { 0.0 })
                        .collect();
                    accumulate(&mut g[x.0], &dx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut g[a.0], &dy);
                    accumulate(&mut g[b.0], &dy);
                }
                Op::AddSegment { x, g: gid, seg } => {
                    let mut dg = vec![0.0; seg.len() * cols];
                    for r in 0..rows {
                        let o = seg.owner[r];
                        for c in 0..cols {
                            dg[o * cols + c] += dy[r * cols + c];
                        }
                    }
                    let (x, gid) = (*x, *gid);
                    accumulate(&mut g[x.0], &dy);
                    accumulate(&mut g[gid.0], &dg);
                }
                Op::SegmentMean { x, seg } => {
                    let mut dx = vec![0.0; seg.total_rows() * cols];
                    for (s, range) in seg.ranges.iter().enumerate() {
                        if range.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / range.len() as f64;
                        for r in range.clone() {
                            for c in 0..cols {
                                dx[r * cols + c] = dy[s * cols + c] * inv;
                            }
                        }
                    }
                    let x = *x;
                    accumulate(&mut g[x.0], &dx);
                }
                Op::MeanExcluding { x, seg } => {
                    let mut dx = vec![0.0; rows * cols];
                    let mut sum = vec![0.0; cols];
                    for range in &seg.ranges {
                        if range.len() < 2 {
                            continue;
                        }
                        sum.iter_mut().for_each(|s| *s = 0.0);
                        for r in range.clone() {
                            for c in 0..cols {
                                sum[c] += dy[r * cols + c];
                            }
                        }
                        let inv = 1.0 / (range.len() - 1) as f64;
                        for r in range.clone() {
                            for c in 0..cols {
                                dx[r * cols + c] = (sum[c] - dy[r * cols + c]) * inv;
                            }
                        }
                    }
                    let x = *x;
                    accumulate(&mut g[x.0], &dx);
                }
                Op::Mask { x, mask } => {
                    let dx: Vec<f64> = dy.iter().zip(mask).map(|(d, m)| d * m).collect();
                    let x = *x;
                    accumulate(&mut g[x.0], &dx);
                }
            }
        }
        self.params
            .tensors()
            .iter()
            .zip(std::mem::take(&mut self.grads))
            .map(|(t, data)| Tensor {
                shape: t.shape.clone(),
                data,
            })
            .collect()
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, grad: &[f64]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(grad).for_each(|(a, g)| *a += g),
        None => *slot = Some(grad.to_vec()),
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        s[0] += a[k] * b[k];
        s[1] += a[k + 1] * b[k + 1];
        s[2] += a[k + 2] * b[k + 2];
        s[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scalar `Σ c·y` for a small graph that exercises every op.
    fn build(params: &ParamStore, x: &[f64], c: &[f64], seg: &Arc<Segments>) -> (f64, Vec<Tensor>) {
        let mut t = Tape::new(params);
        let xi = t.input(seg.total_rows(), 3, x.to_vec());
        let h = t.affine(xi, params.id("w1").unwrap(), params.id("b1").unwrap().into());
        let h = t.relu(h);
        let pooled = t.segment_mean(h, seg);
        let p = t.affine(pooled, params.id("wg").unwrap(), None);
        let ex = t.mean_excluding(h, seg);
        let e = t.affine(ex, params.id("we").unwrap(), None);
        let s = t.add(e, h);
        let s = t.add_segment(s, p, seg);
        let y = t.affine(s, params.id("wo").unwrap(), None);
        let value: f64 = t.value(y).iter().zip(c).map(|(a, b)| a * b).sum();
        let grads = t.backward(&[(y, c.to_vec())]);
        (value, grads)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamStore::new();
        params.weight("w1", 4, 3, &mut rng);
        params.bias("b1", 4, 3, &mut rng);
        params.weight("wg", 4, 4, &mut rng);
        params.weight("we", 4, 4, &mut rng);
        params.weight("wo", 2, 4, &mut rng);
        let seg = Segments::from_sizes(&[3, 1, 0, 2]);
        let x: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grads) = build(&params, &x, &c, &seg);
        let h = 1e-6;
        for p in 0..params.len() {
            for k in 0..params.tensors()[p].len() {
                let mut plus = params.clone();
                plus.tensors_mut()[p].data[k] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[p].data[k] -= h;
                let numeric = (build(&plus, &x, &c, &seg).0 - build(&minus, &x, &c, &seg).0) / (2.0 * h);
                let analytic = grads[p].data[k];
                let scale = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    (numeric - analytic).abs() / scale < 1e-4 || (numeric - analytic).abs() < 1e-8,
                    "param {} [{k}]: numeric {numeric} analytic {analytic}",
                    params.name(ParamId(p))
                );
            }
        }
    }

    #[test]
    fn mean_excluding_handles_ties_and_singletons() {
        let params = ParamStore::new();
        let mut t = Tape::new(&params);
        let seg = Segments::from_sizes(&[3, 1]);
        let x = t.input(4, 1, vec![2.0, 2.0, 5.0, 9.0]);
        let m = t.mean_excluding(x, &seg);
        assert_eq!(t.value(m), &[3.5, 3.5, 2.0, 0.0]);
    }

    #[test]
    fn dropout_keeps_expectation() {
        let params = ParamStore::new();
        let mut t = Tape::new(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t.input(1, 20_000, vec![1.0; 20_000]);
        let d = t.dropout(x, 0.1, &mut rng);
        let mean = t.value(d).iter().sum::<f64>() / 20_000.0;
        assert!((mean - 1.0).abs() < 0.02);
        assert!(t.value(d).iter().all(|&v| v == 0.0 || (v - 1.0 / 0.9).abs() < 1e-12));
    }
}
