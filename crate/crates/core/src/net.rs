//! The symmetric hourglass network and its ablation variants.
//!
//! The reference architecture is a fully-convolutional encoder-decoder over
//! stacked binocular images: six stride-2 down-samplings (spatial factor 64)
//! each followed by a stride-1 convolution, then six stride-2 transposed
//! convolutions back to full resolution, with *addition* skip connections
//! from each encoder stage into the same-resolution decoder stage. The one
//! exception is the last decoder stage, whose convolution takes the
//! up-sampled features *concatenated* with the raw input. A final 4-channel
//! prediction layer (no ReLU) feeds a pairwise softmax: channels (0,1) are
//! the left view's (occluded, visible) probabilities and (2,3) the right's.
//!
//! Every layer applies a ReLU except the prediction layer.
//!
//! Variants keep the interior layers (everything except the first
//! down-sampling and the prediction layer) parameter-identical:
//!
//! - **MonoNetL / MonoNetR** — one image (left or right) as input; both
//!   predict the *left* view's occlusion (2 output channels). They probe
//!   whether one view alone carries the occlusion signal.
//! - **SiameseNet** — one shared-weight subnetwork applied to each image
//!   separately; each branch predicts its own view's occlusion.
//! - **AlterNet** — binocular input but a single 2-channel head; training
//!   alternates the stacking order (left,right) / (right,left) step by
//!   step, supervising whichever view was stacked first; inference runs
//!   both orders.
//! - **HalfNet** — two *independent* binocular subnetworks at half channel
//!   width, one per view. Halving widths preserves activation volume
//!   (each map keeps height x width x channels / 2, twice), though the
//!   parameter count of a convolution scales with the product of its
//!   channel counts, not their sum.
//! - **LRCNet** — same trunk, but the head regresses raw binocular
//!   disparity (2 channels, no softmax); occlusion then comes from the
//!   left-right consistency check on the *estimated* disparity.
//!
//! For the 3-channel-input variants the final concat appends the input
//! image twice, so the last decoder convolution sees the same channel count
//! (and parameter shape) in every variant.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{AdamSnapshot, Checkpoint, ColorImage, NamedTensor};
use crate::error::{Error, Result};
use crate::grid::{Grid, View};
use crate::lrc::{occlusion_pair, DisparityMap, GtConfig, OcclusionMap, CROP_DIVISOR};
use crate::scalar::Scalar;
use crate::tape::{NodeId, Tape};
use crate::tensor::{ConvParams, Tensor};

/// Input height and width must be divisible by this (six halvings).
pub const SPATIAL_DIVISOR: usize = CROP_DIVISOR;

/// How a layer's input is wired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wire {
    /// The network input.
    Input,
    /// The previous layer's output.
    Prev,
    /// Previous output plus the named encoder layer's output (addition skip).
    SumWith(&'static str),
    /// Previous output concatenated with the raw input (final skip).
    ConcatInput,
}

/// One row of the architecture table. Channel counts are for the reference
/// (width-1, binocular, 4-channel-head) configuration; variants override
/// the first input and last output, and scale everything else.
#[derive(Clone, Copy, Debug)]
pub struct LayerDef {
    pub name: &'static str,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub base_in: usize,
    pub base_out: usize,
    pub deconv: bool,
    pub relu: bool,
    pub wire: Wire,
}

const fn lay(
    name: &'static str,
    kernel: usize,
    stride: usize,
    padding: usize,
    base_in: usize,
    base_out: usize,
    deconv: bool,
    relu: bool,
    wire: Wire,
) -> LayerDef {
    LayerDef {
        name,
        kernel,
        stride,
        padding,
        base_in,
        base_out,
        deconv,
        relu,
        wire,
    }
}

/// The full architecture, in forward order.
pub const LAYER_TABLE: [LayerDef; 25] = [
    lay("dwnsp1", 8, 2, 3, 6, 16, false, true, Wire::Input),
    lay("conv1", 3, 1, 1, 16, 16, false, true, Wire::Prev),
    lay("dwnsp2", 6, 2, 2, 16, 32, false, true, Wire::Prev),
    lay("conv2", 3, 1, 1, 32, 32, false, true, Wire::Prev),
    lay("dwnsp3", 6, 2, 2, 32, 64, false, true, Wire::Prev),
    lay("conv3", 3, 1, 1, 64, 64, false, true, Wire::Prev),
    lay("dwnsp4", 4, 2, 1, 64, 128, false, true, Wire::Prev),
    lay("conv4", 3, 1, 1, 128, 128, false, true, Wire::Prev),
    lay("dwnsp5", 4, 2, 1, 128, 256, false, true, Wire::Prev),
    lay("conv5", 3, 1, 1, 256, 256, false, true, Wire::Prev),
    lay("dwnsp6", 4, 2, 1, 256, 512, false, true, Wire::Prev),
    lay("conv6", 3, 1, 1, 512, 512, false, true, Wire::Prev),
    lay("upsp5", 4, 2, 1, 512, 256, true, true, Wire::Prev),
    lay("iconv5", 3, 1, 1, 256, 256, false, true, Wire::SumWith("conv5")),
    lay("upsp4", 4, 2, 1, 256, 128, true, true, Wire::Prev),
    lay("iconv4", 3, 1, 1, 128, 128, false, true, Wire::SumWith("conv4")),
    lay("upsp3", 4, 2, 1, 128, 64, true, true, Wire::Prev),
    lay("iconv3", 3, 1, 1, 64, 64, false, true, Wire::SumWith("conv3")),
    lay("upsp2", 4, 2, 1, 64, 32, true, true, Wire::Prev),
    lay("iconv2", 3, 1, 1, 32, 32, false, true, Wire::SumWith("conv2")),
    lay("upsp1", 4, 2, 1, 32, 16, true, true, Wire::Prev),
    lay("iconv1", 3, 1, 1, 16, 16, false, true, Wire::SumWith("conv1")),
    lay("upsp0", 4, 2, 1, 16, 8, true, true, Wire::Prev),
    lay("iconv0", 3, 1, 1, 14, 8, false, true, Wire::ConcatInput),
    lay("pr", 3, 1, 1, 8, 4, false, false, Wire::Prev),
];

/// Raw input channels carried into the final concat, in every variant.
const CONCAT_INPUT_CHANNELS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    SymmNet,
    MonoNetL,
    MonoNetR,
    SiameseNet,
    AlterNet,
    HalfNet,
    LrcNet,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::SymmNet,
        Variant::MonoNetL,
        Variant::MonoNetR,
        Variant::SiameseNet,
        Variant::AlterNet,
        Variant::HalfNet,
        Variant::LrcNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SymmNet => "symmnet",
            Variant::MonoNetL => "mononet-l",
            Variant::MonoNetR => "mononet-r",
            Variant::SiameseNet => "siamesenet",
            Variant::AlterNet => "alternet",
            Variant::HalfNet => "halfnet",
            Variant::LrcNet => "lrcnet",
        }
    }

    /// Channels entering the first layer of one subnetwork pass.
    pub fn input_channels(self) -> usize {
        match self {
            Variant::MonoNetL | Variant::MonoNetR | Variant::SiameseNet => 3,
            _ => 6,
        }
    }

    /// Channels leaving the prediction layer.
    pub fn head_channels(self) -> usize {
        match self {
            Variant::SymmNet => 4,
            _ => 2,
        }
    }

    /// Width multiplier applied on top of the user's channel scale.
    fn width_factor(self) -> f64 {
        if self == Variant::HalfNet {
            0.5
        } else {
            1.0
        }
    }

    fn subnet_prefixes(self) -> &'static [&'static str] {
        if self == Variant::HalfNet {
            &["left.", "right."]
        } else {
            &[""]
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        let lower = s.to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == lower)
            .ok_or(Error::UnknownVariant { name: s.to_string() })
    }
}

#[derive(Clone, Copy, Debug)]
struct ResolvedLayer {
    def: &'static LayerDef,
    in_ch: usize,
    out_ch: usize,
}

fn scaled_channels(base: usize, factor: f64) -> Result<usize> {
    let c = base as f64 * factor;
    let r = c.round();
    if (c - r).abs() > 1e-9 || r < 1.0 {
        return Err(Error::ChannelScale {
            scale: factor,
            base,
        });
    }
    Ok(r as usize)
}

fn resolve_layers(variant: Variant, channel_scale: f64) -> Result<Vec<ResolvedLayer>> {
    if !channel_scale.is_finite() || channel_scale <= 0.0 {
        return Err(Error::config(format!(
            "channel scale must be a positive finite number, got {channel_scale}"
        )));
    }
    let factor = channel_scale * variant.width_factor();
    LAYER_TABLE
        .iter()
        .map(|def| {
            let in_ch = match def.wire {
                Wire::Input => variant.input_channels(),
                Wire::ConcatInput => {
                    scaled_channels(def.base_in - CONCAT_INPUT_CHANNELS, factor)?
                        + CONCAT_INPUT_CHANNELS
                }
                _ => scaled_channels(def.base_in, factor)?,
            };
            let out_ch = if def.name == "pr" {
                variant.head_channels()
            } else {
                scaled_channels(def.base_out, factor)?
            };
            Ok(ResolvedLayer { def, in_ch, out_ch })
        })
        .collect()
}

#[derive(Clone, Debug)]
struct Layer<T> {
    def: &'static LayerDef,
    params: ConvParams<T>,
}

#[derive(Clone, Debug)]
struct Subnet<T> {
    prefix: &'static str,
    layers: Vec<Layer<T>>,
}

/// A built, parameterized network. Parameters are indexed globally —
/// subnetworks in order, layers in table order, weights before bias — and
/// that order is shared by the optimizer state and the checkpoint format.
#[derive(Clone, Debug)]
pub struct Network<T> {
    variant: Variant,
    channel_scale: f64,
    seed: u64,
    subnets: Vec<Subnet<T>>,
}

/// Output heads of one forward run, as tape nodes.
#[derive(Clone, Copy, Debug)]
pub enum Heads {
    /// `(B, 4, H, W)` probabilities; pair (0,1) = left view, (2,3) = right.
    Fused(NodeId),
    /// Two `(B, 2, H, W)` probability tensors, one per view.
    PerView { left: NodeId, right: NodeId },
    /// `(B, 2, H, W)` probabilities for the left view only.
    SingleLeft(NodeId),
    /// `(B, 2, H, W)` probabilities for whichever view was stacked first.
    Alternating { node: NodeId, first: View },
    /// `(B, 2, H, W)` raw disparity regression (channel 0 left, 1 right).
    Disparity(NodeId),
}

/// Shape record of one executed layer (inputs after skip wiring).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerTrace {
    pub name: String,
    pub input: [usize; 4],
    pub output: [usize; 4],
}

/// One forward execution: the tape (for backward), head nodes, parameter
/// leaf ids aligned with the network's global parameter order, and
/// per-layer shape traces.
#[derive(Debug)]
pub struct ForwardRun<T> {
    pub tape: Tape<T>,
    pub heads: Heads,
    pub param_nodes: Vec<NodeId>,
    pub traces: Vec<LayerTrace>,
}

/// Inference result for one stereo pair (batch 1).
#[derive(Clone, Debug)]
pub struct Prediction<T> {
    /// Occlusion probability for the left view.
    pub p_left: Grid<T>,
    /// Occlusion probability for the right view, when the variant has one.
    pub p_right: Option<Grid<T>>,
    /// Estimated binocular disparity (regression variant only).
    pub disparity: Option<(DisparityMap<T>, DisparityMap<T>)>,
}

/// Strict thresholding: occluded iff `P > tau`.
pub fn predict_grid<T: Scalar>(p: &Grid<T>, tau: T) -> Grid<bool> {
    Grid::from_fn(p.width(), p.height(), |x, y| p.get(x, y) > tau)
}

impl<T: Scalar> Prediction<T> {
    pub fn occlusion(&self, tau: T) -> (OcclusionMap, Option<OcclusionMap>) {
        (
            OcclusionMap {
                view: View::Left,
                grid: predict_grid(&self.p_left, tau),
            },
            self.p_right.as_ref().map(|p| OcclusionMap {
                view: View::Right,
                grid: predict_grid(p, tau),
            }),
        )
    }
}

/// Extracts one channel of one batch item as a grid.
fn channel_grid<T: Scalar>(t: &Tensor<T>, b: usize, c: usize) -> Grid<T> {
    Grid::from_fn(t.width(), t.height(), |x, y| t.at(b, c, y, x))
}

impl<T: Scalar> Network<T> {
    /// Builds and He-initializes a variant. `channel_scale` multiplies every
    /// interior channel count (the first input and head output stay fixed)
    /// and must yield integers; the seed fixes initialization exactly.
    pub fn build(variant: Variant, channel_scale: f64, seed: u64) -> Result<Network<T>> {
        let resolved = resolve_layers(variant, channel_scale)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subnets = variant
            .subnet_prefixes()
            .iter()
            .map(|&prefix| Subnet {
                prefix,
                layers: resolved
                    .iter()
                    .map(|r| Layer {
                        def: r.def,
                        params: ConvParams::init_he(
                            r.out_ch,
                            r.in_ch,
                            r.def.kernel,
                            r.def.stride,
                            r.def.padding,
                            &mut rng,
                        ),
                    })
                    .collect(),
            })
            .collect();
        Ok(Network {
            variant,
            channel_scale,
            seed,
            subnets,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn channel_scale(&self) -> f64 {
        self.channel_scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of parameter tensors (each layer has weights and a bias).
    pub fn param_count(&self) -> usize {
        self.subnets.len() * LAYER_TABLE.len() * 2
    }

    fn locate(&self, i: usize) -> (&Subnet<T>, usize, bool) {
        let per_subnet = LAYER_TABLE.len() * 2;
        let subnet = &self.subnets[i / per_subnet];
        let rem = i % per_subnet;
        (subnet, rem / 2, rem % 2 == 0)
    }

    pub fn param_name(&self, i: usize) -> String {
        let (subnet, li, is_weight) = self.locate(i);
        format!(
            "{}{}.{}",
            subnet.prefix,
            subnet.layers[li].def.name,
            if is_weight { "weight" } else { "bias" }
        )
    }

    pub fn param(&self, i: usize) -> &Tensor<T> {
        let (subnet, li, is_weight) = self.locate(i);
        let p = &subnet.layers[li].params;
        if is_weight {
            &p.weights
        } else {
            &p.bias
        }
    }

    pub fn param_mut(&mut self, i: usize) -> &mut Tensor<T> {
        let per_subnet = LAYER_TABLE.len() * 2;
        let subnet = &mut self.subnets[i / per_subnet];
        let rem = i % per_subnet;
        let p = &mut subnet.layers[rem / 2].params;
        if rem % 2 == 0 {
            &mut p.weights
        } else {
            &mut p.bias
        }
    }

    /// Total trainable scalar count.
    pub fn parameter_scalar_count(&self) -> usize {
        (0..self.param_count()).map(|i| self.param(i).len()).sum()
    }

    /// Trainable scalars in interior layers — everything except the first
    /// down-sampling layer and the prediction layer, which are the only
    /// layers whose shapes legitimately differ across variants.
    pub fn interior_parameter_count(&self) -> usize {
        self.subnets
            .iter()
            .flat_map(|s| &s.layers)
            .filter(|l| l.def.name != "dwnsp1" && l.def.name != "pr")
            .map(|l| l.params.parameter_count())
            .sum()
    }

    /// Per-layer `(name, scalar count)` in global order.
    pub fn layer_parameter_counts(&self) -> Vec<(String, usize)> {
        self.subnets
            .iter()
            .flat_map(|s| {
                s.layers
                    .iter()
                    .map(move |l| (format!("{}{}", s.prefix, l.def.name), l.params.parameter_count()))
            })
            .collect()
    }

    /// Runs the variant's forward graph on a pair of `(B, 3, H, W)` image
    /// tensors, recording everything needed for backward. `swap` reverses
    /// the input stacking order and is only meaningful for the alternating
    /// variant.
    pub fn run(&self, left: &Tensor<T>, right: &Tensor<T>, swap: bool) -> Result<ForwardRun<T>> {
        let shape = left.shape();
        if right.shape() != shape {
            return Err(Error::shape(
                "Network::run",
                format!("matching views {shape:?}"),
                format!("{:?}", right.shape()),
            ));
        }
        if shape[1] != 3 {
            return Err(Error::shape(
                "Network::run",
                "3-channel images".to_string(),
                format!("{} channels", shape[1]),
            ));
        }
        let (h, w) = (shape[2], shape[3]);
        if h % SPATIAL_DIVISOR != 0 || w % SPATIAL_DIVISOR != 0 {
            return Err(Error::IndivisibleInput {
                op: "Network::run",
                height: h,
                width: w,
                divisor: SPATIAL_DIVISOR,
            });
        }
        if swap && self.variant != Variant::AlterNet {
            return Err(Error::config(format!(
                "input-order swapping only applies to {}, not {}",
                Variant::AlterNet,
                self.variant
            )));
        }

        let mut tape = Tape::new();
        let mut param_nodes = Vec::with_capacity(self.param_count());
        for subnet in &self.subnets {
            for layer in &subnet.layers {
                param_nodes.push(tape.leaf(layer.params.weights.clone()));
                param_nodes.push(tape.leaf(layer.params.bias.clone()));
            }
        }
        let l = tape.leaf(left.clone());
        let r = tape.leaf(right.clone());
        let mut traces = Vec::new();

        let mut pass = |tape: &mut Tape<T>, subnet_idx: usize, input: NodeId| -> Result<NodeId> {
            let subnet = &self.subnets[subnet_idx];
            let base = subnet_idx * LAYER_TABLE.len() * 2;
            let mut outputs: Vec<NodeId> = Vec::with_capacity(subnet.layers.len());
            let mut prev = input;
            for (i, layer) in subnet.layers.iter().enumerate() {
                let x = match layer.def.wire {
                    Wire::Input | Wire::Prev => prev,
                    Wire::SumWith(partner) => {
                        let j = subnet
                            .layers
                            .iter()
                            .position(|l| l.def.name == partner)
                            .expect("skip partner exists in the layer table");
                        tape.add(prev, outputs[j])?
                    }
                    Wire::ConcatInput => {
                        if tape.value(input).channels() * 2 == CONCAT_INPUT_CHANNELS {
                            tape.concat_channels(&[prev, input, input])?
                        } else {
                            tape.concat_channels(&[prev, input])?
                        }
                    }
                };
                let w = param_nodes[base + 2 * i];
                let b = param_nodes[base + 2 * i + 1];
                let y = if layer.def.deconv {
                    tape.deconv(x, w, b, layer.def.stride, layer.def.padding)?
                } else {
                    tape.conv(x, w, b, layer.def.stride, layer.def.padding)?
                };
                let y = if layer.def.relu { tape.relu(y)? } else { y };
                traces.push(LayerTrace {
                    name: format!("{}{}", subnet.prefix, layer.def.name),
                    input: tape.value(x).shape(),
                    output: tape.value(y).shape(),
                });
                outputs.push(y);
                prev = y;
            }
            Ok(prev)
        };

        let heads = match self.variant {
            Variant::SymmNet => {
                let x = tape.concat_channels(&[l, r])?;
                let pr = pass(&mut tape, 0, x)?;
                Heads::Fused(tape.softmax_pairs(pr)?)
            }
            Variant::LrcNet => {
                let x = tape.concat_channels(&[l, r])?;
                Heads::Disparity(pass(&mut tape, 0, x)?)
            }
            Variant::MonoNetL => {
                let pr = pass(&mut tape, 0, l)?;
                Heads::SingleLeft(tape.softmax_pairs(pr)?)
            }
            Variant::MonoNetR => {
                let pr = pass(&mut tape, 0, r)?;
                Heads::SingleLeft(tape.softmax_pairs(pr)?)
            }
            Variant::SiameseNet => {
                let pl = pass(&mut tape, 0, l)?;
                let left_head = tape.softmax_pairs(pl)?;
                let pr = pass(&mut tape, 0, r)?;
                Heads::PerView {
                    left: left_head,
                    right: tape.softmax_pairs(pr)?,
                }
            }
            Variant::AlterNet => {
                let x = if swap {
                    tape.concat_channels(&[r, l])?
                } else {
                    tape.concat_channels(&[l, r])?
                };
                let pr = pass(&mut tape, 0, x)?;
                Heads::Alternating {
                    node: tape.softmax_pairs(pr)?,
                    first: if swap { View::Right } else { View::Left },
                }
            }
            Variant::HalfNet => {
                let x = tape.concat_channels(&[l, r])?;
                let pl = pass(&mut tape, 0, x)?;
                let left_head = tape.softmax_pairs(pl)?;
                let pr = pass(&mut tape, 1, x)?;
                Heads::PerView {
                    left: left_head,
                    right: tape.softmax_pairs(pr)?,
                }
            }
        };

        Ok(ForwardRun {
            tape,
            heads,
            param_nodes,
            traces,
        })
    }

    /// Batch-1 inference on a stereo pair: occlusion probabilities for the
    /// views the variant predicts. The regression variant estimates
    /// disparity and derives occlusion from the consistency check, reported
    /// as hard 0/1 probabilities.
    pub fn forward(&self, left: &ColorImage, right: &ColorImage) -> Result<Prediction<T>> {
        let lt = left.to_tensor();
        let rt = right.to_tensor();
        let run = self.run(&lt, &rt, false)?;
        match run.heads {
            Heads::Fused(node) => {
                let probs = run.tape.value(node);
                Ok(Prediction {
                    p_left: channel_grid(probs, 0, 0),
                    p_right: Some(channel_grid(probs, 0, 2)),
                    disparity: None,
                })
            }
            Heads::PerView { left, right } => Ok(Prediction {
                p_left: channel_grid(run.tape.value(left), 0, 0),
                p_right: Some(channel_grid(run.tape.value(right), 0, 0)),
                disparity: None,
            }),
            Heads::SingleLeft(node) => Ok(Prediction {
                p_left: channel_grid(run.tape.value(node), 0, 0),
                p_right: None,
                disparity: None,
            }),
            Heads::Alternating { node, .. } => {
                let p_left = channel_grid(run.tape.value(node), 0, 0);
                let swapped = self.run(&lt, &rt, true)?;
                let p_right = match swapped.heads {
                    Heads::Alternating { node, .. } => {
                        channel_grid(swapped.tape.value(node), 0, 0)
                    }
                    _ => unreachable!("alternating run produces an alternating head"),
                };
                Ok(Prediction {
                    p_left,
                    p_right: Some(p_right),
                    disparity: None,
                })
            }
            Heads::Disparity(node) => {
                let pred = run.tape.value(node);
                let d_left = DisparityMap::new(View::Left, channel_grid(pred, 0, 0))?;
                let d_right = DisparityMap::new(View::Right, channel_grid(pred, 0, 1))?;
                let (ol, or) = occlusion_pair(&d_left, &d_right, &GtConfig::default())?;
                let to_probs = |m: &OcclusionMap| {
                    Grid::from_fn(m.width(), m.height(), |x, y| {
                        if m.grid.get(x, y) {
                            T::one()
                        } else {
                            T::zero()
                        }
                    })
                };
                Ok(Prediction {
                    p_left: to_probs(&ol),
                    p_right: Some(to_probs(&or)),
                    disparity: Some((d_left, d_right)),
                })
            }
        }
    }

    /// Serializes parameters (as raw 64-bit floats) with optional optimizer
    /// state, in global parameter order.
    pub fn to_checkpoint(&self, adam: Option<AdamSnapshot>) -> Checkpoint {
        let params = (0..self.param_count())
            .map(|i| {
                let t = self.param(i);
                NamedTensor {
                    name: self.param_name(i),
                    dims: t.shape(),
                    data: t.data().iter().map(|&v| v.to_f64()).collect(),
                }
            })
            .collect();
        Checkpoint {
            variant: self.variant.name().to_string(),
            channel_scale: self.channel_scale,
            seed: self.seed,
            params,
            adam,
        }
    }

    /// Rebuilds a network from a checkpoint. The stored parameter list must
    /// match the variant's layer table name-for-name and shape-for-shape.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Network<T>, Option<AdamSnapshot>)> {
        let variant: Variant = ckpt.variant.parse()?;
        let mut net = Network::build(variant, ckpt.channel_scale, ckpt.seed)?;
        if ckpt.params.len() != net.param_count() {
            return Err(Error::shape(
                "from_checkpoint",
                format!("{} parameter tensors for {variant}", net.param_count()),
                format!("{}", ckpt.params.len()),
            ));
        }
        for (i, stored) in ckpt.params.iter().enumerate() {
            let expected_name = net.param_name(i);
            if stored.name != expected_name {
                return Err(Error::shape(
                    "from_checkpoint",
                    format!("parameter {i} named {expected_name}"),
                    stored.name.clone(),
                ));
            }
            let target = net.param_mut(i);
            if stored.dims != target.shape() || stored.data.len() != target.len() {
                return Err(Error::shape(
                    "from_checkpoint",
                    format!("{expected_name} with dims {:?}", target.shape()),
                    format!("{:?} ({} values)", stored.dims, stored.data.len()),
                ));
            }
            for (dst, src) in target.data_mut().iter_mut().zip(&stored.data) {
                *dst = T::from_f64(*src);
            }
        }
        if let Some(a) = &ckpt.adam {
            for (i, (m, v)) in a.m.iter().zip(&a.v).enumerate() {
                if i >= net.param_count()
                    || m.len() != net.param(i).len()
                    || v.len() != net.param(i).len()
                {
                    return Err(Error::shape(
                        "from_checkpoint",
                        "optimizer state aligned with parameters".to_string(),
                        format!("entry {i} misshapen"),
                    ));
                }
            }
            if a.m.len() != net.param_count() || a.v.len() != net.param_count() {
                return Err(Error::shape(
                    "from_checkpoint",
                    format!("{} optimizer entries", net.param_count()),
                    format!("{}+{}", a.m.len(), a.v.len()),
                ));
            }
        }
        Ok((net, ckpt.adam.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_inputs(h: usize, w: usize) -> (Tensor<f64>, Tensor<f64>) {
        let f = |b: usize, c: usize, y: usize, x: usize| {
            ((b + 2 * c + 3 * y + 5 * x) % 17) as f64 / 17.0 - 0.5
        };
        (
            Tensor::from_fn([1, 3, h, w], f),
            Tensor::from_fn([1, 3, h, w], |b, c, y, x| f(b, c + 3, y, x)),
        )
    }

    #[test]
    fn reference_parameter_totals() {
        // Totals enumerated independently from the layer table:
        // sum of k^2*in*out + out over the 25 layers.
        let symm: Network<f64> = Network::build(Variant::SymmNet, 1.0, 0).unwrap();
        assert_eq!(symm.parameter_scalar_count(), 9_581_284);
        assert_eq!(symm.interior_parameter_count(), 9_574_832);

        let half: Network<f64> = Network::build(Variant::HalfNet, 1.0, 0).unwrap();
        assert_eq!(half.parameter_scalar_count(), 2 * 2_397_722);
        assert_eq!(half.interior_parameter_count(), 4_789_136);
    }

    #[test]
    fn interior_layers_match_across_single_trunk_variants() {
        let symm: Network<f64> = Network::build(Variant::SymmNet, 1.0, 0).unwrap();
        let reference = symm.layer_parameter_counts();
        for variant in [
            Variant::MonoNetL,
            Variant::MonoNetR,
            Variant::SiameseNet,
            Variant::AlterNet,
            Variant::LrcNet,
        ] {
            let net: Network<f64> = Network::build(variant, 1.0, 0).unwrap();
            for ((name, count), (rname, rcount)) in
                net.layer_parameter_counts().iter().zip(&reference)
            {
                assert_eq!(name, rname);
                if name != "dwnsp1" && name != "pr" {
                    assert_eq!(count, rcount, "{variant} layer {name}");
                }
            }
        }
    }

    #[test]
    fn eighth_scale_shapes_on_64x64() {
        let net: Network<f64> = Network::build(Variant::SymmNet, 0.125, 7).unwrap();
        let (l, r) = small_inputs(64, 64);
        let run = net.run(&l, &r, false).unwrap();
        let by_name = |n: &str| run.traces.iter().find(|t| t.name == n).unwrap().clone();
        assert_eq!(by_name("dwnsp1").input, [1, 6, 64, 64]);
        assert_eq!(by_name("dwnsp1").output, [1, 2, 32, 32]);
        assert_eq!(by_name("conv6").output, [1, 64, 1, 1]);
        assert_eq!(by_name("iconv0").input, [1, 7, 64, 64]);
        assert_eq!(by_name("pr").output, [1, 4, 64, 64]);
        match run.heads {
            Heads::Fused(node) => {
                let probs = run.tape.value(node);
                assert_eq!(probs.shape(), [1, 4, 64, 64]);
                // Pairwise softmax: each pair sums to one.
                let s = probs.at(0, 0, 3, 5) + probs.at(0, 1, 3, 5);
                assert!((s - 1.0).abs() < 1e-12);
            }
            _ => panic!("fused head expected"),
        }
    }

    #[test]
    fn indivisible_input_rejected_with_hint() {
        let net: Network<f64> = Network::build(Variant::SymmNet, 0.125, 7).unwrap();
        let (l, r) = small_inputs(100, 100);
        let err = net.run(&l, &r, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("divisible by 64"), "{msg}");
        assert!(msg.contains("128x128"), "pad hint missing: {msg}");
    }

    #[test]
    fn fractional_channel_scale_rejected() {
        assert!(matches!(
            Network::<f64>::build(Variant::SymmNet, 1.0 / 3.0, 0),
            Err(Error::ChannelScale { .. })
        ));
        // Half width of an eighth-scale net would need half a channel.
        assert!(Network::<f64>::build(Variant::HalfNet, 0.125, 0).is_err());
        assert!(Network::<f64>::build(Variant::HalfNet, 0.25, 0).is_ok());
    }

    #[test]
    fn siamese_branches_share_weights() {
        let net: Network<f64> = Network::build(Variant::SiameseNet, 0.125, 3).unwrap();
        assert_eq!(net.param_count(), 50);
        let (l, _) = small_inputs(64, 64);
        // Identical branch inputs must give bitwise-identical branch outputs.
        let run = net.run(&l, &l, false).unwrap();
        match run.heads {
            Heads::PerView { left, right } => {
                assert_eq!(run.tape.value(left).data(), run.tape.value(right).data());
            }
            _ => panic!("per-view heads expected"),
        }
    }

    #[test]
    fn halfnet_subnets_are_independent() {
        let net: Network<f64> = Network::build(Variant::HalfNet, 1.0, 3).unwrap();
        assert_eq!(net.param_count(), 100);
        assert_eq!(net.param_name(0), "left.dwnsp1.weight");
        assert_eq!(net.param_name(51), "right.dwnsp1.bias");
        // Perturbing a right-subnet parameter must not change the left head.
        let (l, r) = small_inputs(64, 64);
        let net_small: Network<f64> = Network::build(Variant::HalfNet, 0.25, 3).unwrap();
        let before = net_small.run(&l, &r, false).unwrap();
        let mut net2: Network<f64> = Network::build(Variant::HalfNet, 0.25, 3).unwrap();
        let idx = net2.param_count() - 2; // right subnet's pr weights
        net2.param_mut(idx).data_mut()[0] += 1.0;
        let after = net2.run(&l, &r, false).unwrap();
        match (before.heads, after.heads) {
            (Heads::PerView { left: bl, right: br }, Heads::PerView { left: al, right: ar }) => {
                assert_eq!(before.tape.value(bl).data(), after.tape.value(al).data());
                assert_ne!(before.tape.value(br).data(), after.tape.value(ar).data());
            }
            _ => panic!("per-view heads expected"),
        }
    }

    #[test]
    fn alternating_swap_equals_exchanged_inputs() {
        let net: Network<f64> = Network::build(Variant::AlterNet, 0.125, 5).unwrap();
        let (l, r) = small_inputs(64, 64);
        let swapped = net.run(&l, &r, true).unwrap();
        let exchanged = net.run(&r, &l, false).unwrap();
        match (swapped.heads, exchanged.heads) {
            (
                Heads::Alternating { node: a, first: fa },
                Heads::Alternating { node: b, first: fb },
            ) => {
                assert_eq!(swapped.tape.value(a).data(), exchanged.tape.value(b).data());
                assert_eq!(fa, View::Right);
                assert_eq!(fb, View::Left);
            }
            _ => panic!("alternating heads expected"),
        }
        // Swapping is meaningless elsewhere.
        let symm: Network<f64> = Network::build(Variant::SymmNet, 0.125, 5).unwrap();
        assert!(symm.run(&l, &r, true).is_err());
    }

    #[test]
    fn mononet_r_ignores_left_image() {
        let net: Network<f64> = Network::build(Variant::MonoNetR, 0.125, 9).unwrap();
        let (l, r) = small_inputs(64, 64);
        let mut l2 = l.clone();
        l2.data_mut()[40] += 0.3;
        let a = net.run(&l, &r, false).unwrap();
        let b = net.run(&l2, &r, false).unwrap();
        match (a.heads, b.heads) {
            (Heads::SingleLeft(x), Heads::SingleLeft(y)) => {
                assert_eq!(a.tape.value(x).data(), b.tape.value(y).data());
            }
            _ => panic!("single head expected"),
        }
    }

    #[test]
    fn regression_head_skips_softmax() {
        let net: Network<f64> = Network::build(Variant::LrcNet, 0.125, 2).unwrap();
        let (l, r) = small_inputs(64, 64);
        let run = net.run(&l, &r, false).unwrap();
        match run.heads {
            Heads::Disparity(node) => {
                let out = run.tape.value(node);
                assert_eq!(out.shape(), [1, 2, 64, 64]);
                // Raw regression output is not a probability pair.
                let s = out.at(0, 0, 10, 10) + out.at(0, 1, 10, 10);
                assert!((s - 1.0).abs() > 1e-6, "looks softmaxed: {s}");
            }
            _ => panic!("disparity head expected"),
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!(matches!(
            "resnet".parse::<Variant>(),
            Err(Error::UnknownVariant { .. })
        ));
    }

    #[test]
    fn checkpoint_round_trip_preserves_forward_exactly() {
        let net: Network<f64> = Network::build(Variant::SymmNet, 0.125, 11).unwrap();
        let ckpt = net.to_checkpoint(None);
        let decoded = Checkpoint::decode(&ckpt.encode()).unwrap();
        let (back, adam) = Network::<f64>::from_checkpoint(&decoded).unwrap();
        assert!(adam.is_none());
        let (l, r) = small_inputs(64, 64);
        let a = net.run(&l, &r, false).unwrap();
        let b = back.run(&l, &r, false).unwrap();
        match (a.heads, b.heads) {
            (Heads::Fused(x), Heads::Fused(y)) => {
                assert_eq!(a.tape.value(x).data(), b.tape.value(y).data());
            }
            _ => panic!("fused heads expected"),
        }
    }

    #[test]
    fn checkpoint_shape_mismatch_rejected() {
        let net: Network<f64> = Network::build(Variant::SymmNet, 0.125, 11).unwrap();
        let mut ckpt = net.to_checkpoint(None);
        ckpt.params[3].dims = [1, 1, 1, 1];
        assert!(Network::<f64>::from_checkpoint(&ckpt).is_err());
        let mut ckpt = net.to_checkpoint(None);
        ckpt.params.swap(0, 2);
        assert!(Network::<f64>::from_checkpoint(&ckpt).is_err());
    }
}
