//! Define-by-run reverse-mode differentiation over the network primitives.
//!
//! A [`Tape`] records every operation as it is evaluated; node values are
//! computed eagerly at push time, so a graph always carries its forward
//! results and `backward` can only ever run after a forward pass. Nodes are
//! topologically ordered by construction (an op may only consume earlier
//! nodes), which makes the backward sweep a simple reverse walk.
//!
//! Scalar losses enter the tape through [`Tape::attach_loss`]: the caller
//! (the objective module) supplies the loss value together with its exact
//! gradient with respect to each consumed node, and the tape handles all
//! chaining below that point. Parameters shared between passes (siamese
//! branches, alternated stackings) are pushed once as leaves and referenced
//! by both passes; their gradients accumulate across every use.

use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum OpKind<T> {
    /// External value: a network input or a trainable parameter.
    Leaf,
    Conv { stride: usize, padding: usize },
    Deconv { stride: usize, padding: usize },
    Relu,
    SoftmaxPairs,
    Add,
    ConcatChannels,
    /// Scalar loss with a precomputed gradient per consumed node.
    Loss { grads: Vec<Tensor<T>> },
}

#[derive(Debug)]
struct Node<T> {
    op: OpKind<T>,
    inputs: Vec<NodeId>,
    value: Tensor<T>,
}

#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Per-node gradients produced by a backward sweep, indexed by [`NodeId`].
/// Nodes the loss does not depend on have no entry; [`Gradients::get_or_zeros`]
/// materializes the all-zero gradient the contract promises for them.
#[derive(Debug)]
pub struct Gradients<T> {
    entries: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.entries.get(id.0).and_then(|e| e.as_ref())
    }

    pub fn get_or_zeros(&self, id: NodeId, shape: [usize; 4]) -> Tensor<T> {
        match self.get(id) {
            Some(t) => t.clone(),
            None => Tensor::zeros(shape),
        }
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Tape<T> {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: OpKind<T>, inputs: Vec<NodeId>, value: Tensor<T>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, inputs, value });
        id
    }

    fn check(&self, op: &'static str, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::BackwardInvalid {
                msg: format!("{op}: node {} does not exist on this tape", id.0),
            });
        }
        Ok(())
    }

    /// Pushes an external value (input image stack or trainable parameter).
    pub fn leaf(&mut self, value: Tensor<T>) -> NodeId {
        self.push(OpKind::Leaf, vec![], value)
    }

    pub fn conv(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize) -> Result<NodeId> {
        for id in [x, w, b] {
            self.check("conv", id)?;
        }
        let value = ops::conv2d_raw(
            self.value(x),
            self.value(w),
            self.value(b).data(),
            stride,
            padding,
        )?;
        Ok(self.push(OpKind::Conv { stride, padding }, vec![x, w, b], value))
    }

    pub fn deconv(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize, padding: usize) -> Result<NodeId> {
        for id in [x, w, b] {
            self.check("deconv", id)?;
        }
        let value = ops::deconv2d_raw(
            self.value(x),
            self.value(w),
            self.value(b).data(),
            stride,
            padding,
        )?;
        Ok(self.push(OpKind::Deconv { stride, padding }, vec![x, w, b], value))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.check("relu", x)?;
        let value = ops::relu(self.value(x));
        Ok(self.push(OpKind::Relu, vec![x], value))
    }

    pub fn softmax_pairs(&mut self, x: NodeId) -> Result<NodeId> {
        self.check("softmax_pairs", x)?;
        let value = ops::softmax_pairs(self.value(x))?;
        Ok(self.push(OpKind::SoftmaxPairs, vec![x], value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check("add", a)?;
        self.check("add", b)?;
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(OpKind::Add, vec![a, b], value))
    }

    pub fn concat_channels(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        for &id in parts {
            self.check("concat_channels", id)?;
        }
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|&id| &self.nodes[id.0].value).collect();
        let value = Tensor::concat_channels(&tensors)?;
        Ok(self.push(OpKind::ConcatChannels, parts.to_vec(), value))
    }

    /// Terminal scalar node. `parts` pairs each consumed node with the exact
    /// gradient of the loss value with respect to that node's tensor.
    pub fn attach_loss(&mut self, parts: Vec<(NodeId, Tensor<T>)>, value: T) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::BackwardInvalid {
                msg: "attach_loss: a loss must consume at least one node".into(),
            });
        }
        let mut inputs = Vec::with_capacity(parts.len());
        let mut grads = Vec::with_capacity(parts.len());
        for (id, grad) in parts {
            self.check("attach_loss", id)?;
            let got = self.value(id).shape();
            if grad.shape() != got {
                return Err(Error::shape(
                    "attach_loss",
                    format!("{got:?}"),
                    format!("{:?}", grad.shape()),
                ));
            }
            inputs.push(id);
            grads.push(grad);
        }
        let value = Tensor::from_vec([1, 1, 1, 1], vec![value]).expect("scalar");
        Ok(self.push(OpKind::Loss { grads }, inputs, value))
    }

    /// Reverse accumulation from a scalar node: returns gradients for every
    /// node the loss depends on. Parameters feeding several consumers (shared
    /// weights) receive the sum of all their uses' contributions.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        self.check("backward", loss)?;
        let shape = self.nodes[loss.0].value.shape();
        if shape != [1, 1, 1, 1] {
            return Err(Error::BackwardInvalid {
                msg: format!("backward requires a scalar [1,1,1,1] node, got {shape:?}"),
            });
        }

        let mut entries: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        entries[loss.0] = Some(Tensor::from_vec([1, 1, 1, 1], vec![T::one()]).expect("scalar"));

        for i in (0..=loss.0).rev() {
            let Some(grad) = entries[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            match &node.op {
                OpKind::Leaf => {
                    entries[i] = Some(grad);
                    continue;
                }
                OpKind::Conv { stride, padding } => {
                    let (x, w, _b) = (node.inputs[0], node.inputs[1], node.inputs[2]);
                    let (gi, gw, gb) = ops::conv2d_grads_raw(
                        self.value(x),
                        self.value(w),
                        *stride,
                        *padding,
                        &grad,
                    )?;
                    accumulate(&mut entries, node.inputs[0], gi)?;
                    accumulate(&mut entries, node.inputs[1], gw)?;
                    accumulate(&mut entries, node.inputs[2], gb)?;
                }
                OpKind::Deconv { stride, padding } => {
                    let (x, w, _b) = (node.inputs[0], node.inputs[1], node.inputs[2]);
                    let (gi, gw, gb) = ops::deconv2d_grads_raw(
                        self.value(x),
                        self.value(w),
                        *stride,
                        *padding,
                        &grad,
                    )?;
                    accumulate(&mut entries, node.inputs[0], gi)?;
                    accumulate(&mut entries, node.inputs[1], gw)?;
                    accumulate(&mut entries, node.inputs[2], gb)?;
                }
                OpKind::Relu => {
                    let gi = ops::relu_backward(self.value(node.inputs[0]), &grad)?;
                    accumulate(&mut entries, node.inputs[0], gi)?;
                }
                OpKind::SoftmaxPairs => {
                    let gi = ops::softmax_pairs_backward(&node.value, &grad)?;
                    accumulate(&mut entries, node.inputs[0], gi)?;
                }
                OpKind::Add => {
                    accumulate(&mut entries, node.inputs[0], grad.clone())?;
                    accumulate(&mut entries, node.inputs[1], grad)?;
                }
                OpKind::ConcatChannels => {
                    let [b, _, h, w] = node.value.shape();
                    let mut start = 0;
                    for &src in &node.inputs {
                        let pc = self.value(src).channels();
                        let mut piece = Tensor::zeros([b, pc, h, w]);
                        for bi in 0..b {
                            for ci in 0..pc {
                                for yy in 0..h {
                                    for xx in 0..w {
                                        piece.set(bi, ci, yy, xx, grad.at(bi, start + ci, yy, xx));
                                    }
                                }
                            }
                        }
                        accumulate(&mut entries, src, piece)?;
                        start += pc;
                    }
                }
                OpKind::Loss { grads } => {
                    let seed = grad.data()[0];
                    for (&src, g) in node.inputs.iter().zip(grads) {
                        accumulate(&mut entries, src, g.map(|v| v * seed))?;
                    }
                }
            }
        }

        Ok(Gradients { entries })
    }
}

fn accumulate<T: Scalar>(
    entries: &mut [Option<Tensor<T>>],
    id: NodeId,
    contribution: Tensor<T>,
) -> Result<()> {
    match &mut entries[id.0] {
        Some(existing) => {
            *existing = existing.add(&contribution)?;
        }
        slot @ None => {
            *slot = Some(contribution);
        }
    }
    Ok(())
}
