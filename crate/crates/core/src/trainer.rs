//! Adam training loop: seeded shuffling, aligned random crops with
//! ground-truth regeneration, per-batch class weights, the alternating-input
//! schedule, and per-epoch held-out evaluation. Identical seed and
//! configuration reproduce checkpoints bit for bit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{AdamSnapshot, StereoSample};
use crate::error::{Error, Result};
use crate::grid::{CropRect, View};
use crate::loss::{mae_loss, view_class_weights, view_loss_term, ClassWeights};
use crate::lrc::{crop_with_gt, GtConfig, OcclusionMap, CROP_DIVISOR};
use crate::metrics::{Counts, Metrics};
use crate::net::{Heads, Network, Variant};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Training hyperparameters. Defaults are the published protocol: Adam with
/// `beta1 = 0.9`, `beta2 = 0.99`, constant learning rate `1e-2`, batch 16,
/// 10 epochs, random 256x768 crops.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub variant: Variant,
    pub channel_scale: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Optional global cap on optimizer steps (stops mid-epoch when hit).
    pub max_steps: Option<usize>,
    pub crop_h: usize,
    pub crop_w: usize,
    /// Seeds initialization and the shuffle/crop stream.
    pub seed: u64,
    /// `epsilon` of the bounded class weights (must exceed 1).
    pub class_epsilon: f64,
    /// Divide loss terms by pixel count instead of summing.
    pub normalize: bool,
    /// Alternating-input variant only: supervise swapped-order steps on a
    /// mirrored problem (flipped images, flipped right-view target) instead
    /// of the right-view target as-is.
    pub mirror_swapped: bool,
    /// Consistency threshold for regenerated crop ground truth.
    pub gt_delta: f64,
    /// Whether out-of-frame correspondences are labeled occluded.
    pub gt_oob_is_occluded: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::SymmNet,
            channel_scale: 1.0,
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.99,
            adam_eps: 1e-8,
            batch_size: 16,
            epochs: 10,
            max_steps: None,
            crop_h: 256,
            crop_w: 768,
            seed: 0,
            class_epsilon: crate::loss::DEFAULT_CLASS_EPSILON,
            normalize: false,
            mirror_swapped: false,
            gt_delta: 1.0,
            gt_oob_is_occluded: true,
        }
    }
}

impl TrainConfig {
    pub fn gt<T: Scalar>(&self) -> GtConfig<T> {
        GtConfig {
            delta: T::from_f64(self.gt_delta),
            oob_is_occluded: self.gt_oob_is_occluded,
        }
    }
}

/// First/second moment accumulators, index-aligned with the network's
/// parameter order.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(net: &Network<T>) -> AdamState<T> {
        let zeros: Vec<Tensor<T>> = (0..net.param_count())
            .map(|i| Tensor::zeros(net.param(i).shape()))
            .collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn snapshot(&self) -> AdamSnapshot {
        let widen = |ts: &[Tensor<T>]| {
            ts.iter()
                .map(|t| t.data().iter().map(|&v| v.to_f64()).collect())
                .collect()
        };
        AdamSnapshot {
            step: self.step,
            m: widen(&self.m),
            v: widen(&self.v),
        }
    }

    pub fn from_snapshot(net: &Network<T>, snap: &AdamSnapshot) -> Result<AdamState<T>> {
        if snap.m.len() != net.param_count() || snap.v.len() != net.param_count() {
            return Err(Error::shape(
                "AdamState::from_snapshot",
                format!("{} moment vectors", net.param_count()),
                format!("{}+{}", snap.m.len(), snap.v.len()),
            ));
        }
        let narrow = |vecs: &[Vec<f64>]| -> Result<Vec<Tensor<T>>> {
            vecs.iter()
                .enumerate()
                .map(|(i, v)| {
                    let shape = net.param(i).shape();
                    Tensor::from_vec(shape, v.iter().map(|&x| T::from_f64(x)).collect())
                })
                .collect()
        };
        Ok(AdamState {
            step: snap.step,
            m: narrow(&snap.m)?,
            v: narrow(&snap.v)?,
        })
    }
}

/// One bias-corrected Adam update of a single parameter tensor. `step` is
/// the already-advanced counter (first call passes 1).
pub fn adam_update<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    cfg: &TrainConfig,
) {
    let lr = T::from_f64(cfg.lr);
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let eps = T::from_f64(cfg.adam_eps);
    let corr1 = T::one() - T::from_f64(cfg.beta1.powi(step as i32));
    let corr2 = T::one() - T::from_f64(cfg.beta2.powi(step as i32));
    for i in 0..param.len() {
        m[i] = b1 * m[i] + (T::one() - b1) * grad[i];
        v[i] = b2 * v[i] + (T::one() - b2) * grad[i] * grad[i];
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Stacks the per-sample normalized images of one view into a batch tensor.
fn batch_images<T: Scalar>(samples: &[StereoSample<T>], view: View) -> Result<Tensor<T>> {
    let (w, h) = (samples[0].width(), samples[0].height());
    for s in samples {
        if s.width() != w || s.height() != h {
            return Err(Error::shape(
                "batch_images",
                format!("{w}x{h}"),
                format!("{}x{}", s.width(), s.height()),
            ));
        }
    }
    let plane = 3 * h * w;
    let mut out = Tensor::zeros([samples.len(), 3, h, w]);
    for (bi, s) in samples.iter().enumerate() {
        let t: Tensor<T> = s.image(view).to_tensor();
        out.data_mut()[bi * plane..(bi + 1) * plane].copy_from_slice(t.data());
    }
    Ok(out)
}

fn occ_refs<T: Scalar>(samples: &[StereoSample<T>], view: View) -> Result<Vec<&OcclusionMap>> {
    samples.iter().map(|s| s.occ(view)).collect()
}

/// The loss and its `d(loss)/d(probs)` parts for one executed forward run,
/// honoring each variant's supervision scheme.
fn loss_parts<T: Scalar>(
    net: &Network<T>,
    run: &crate::net::ForwardRun<T>,
    samples: &[StereoSample<T>],
    cfg: &TrainConfig,
    mirrored: bool,
) -> Result<(T, Vec<(crate::tape::NodeId, Tensor<T>)>)> {
    let eps = cfg.class_epsilon;
    let norm = cfg.normalize;
    match run.heads {
        Heads::Fused(node) => {
            let left = occ_refs(samples, View::Left)?;
            let right = occ_refs(samples, View::Right)?;
            let w: ClassWeights<T> = ClassWeights::from_batch(&left, &right, eps)?;
            let probs = run.tape.value(node);
            let (vl, gl) = view_loss_term(probs, 0, &left, w.left, norm)?;
            let (vr, gr) = view_loss_term(probs, 2, &right, w.right, norm)?;
            Ok((vl + vr, vec![(node, gl), (node, gr)]))
        }
        Heads::PerView { left, right } => {
            let lt = occ_refs(samples, View::Left)?;
            let rt = occ_refs(samples, View::Right)?;
            let w: ClassWeights<T> = ClassWeights::from_batch(&lt, &rt, eps)?;
            let (vl, gl) = view_loss_term(run.tape.value(left), 0, &lt, w.left, norm)?;
            let (vr, gr) = view_loss_term(run.tape.value(right), 0, &rt, w.right, norm)?;
            Ok((vl + vr, vec![(left, gl), (right, gr)]))
        }
        Heads::SingleLeft(node) => {
            let lt = occ_refs(samples, View::Left)?;
            let w: (T, T) = view_class_weights(&lt, eps)?;
            let (v, g) = view_loss_term(run.tape.value(node), 0, &lt, w, norm)?;
            Ok((v, vec![(node, g)]))
        }
        Heads::Alternating { node, first } => {
            let owned: Vec<OcclusionMap>;
            let targets: Vec<&OcclusionMap> = if mirrored {
                owned = samples
                    .iter()
                    .map(|s| Ok(s.occ(View::Right)?.flip_horizontal()))
                    .collect::<Result<_>>()?;
                owned.iter().collect()
            } else {
                occ_refs(samples, first)?
            };
            let w: (T, T) = view_class_weights(&targets, eps)?;
            let (v, g) = view_loss_term(run.tape.value(node), 0, &targets, w, norm)?;
            Ok((v, vec![(node, g)]))
        }
        Heads::Disparity(node) => {
            let left: Vec<_> = samples.iter().map(|s| &s.left_disp).collect();
            let right: Vec<_> = samples.iter().map(|s| &s.right_disp).collect();
            let (v, g) = mae_loss(run.tape.value(node), &left, &right)?;
            Ok((v, vec![(node, g)]))
        }
    }
    .and_then(|(v, parts)| {
        if !v.to_f64().is_finite() {
            return Err(Error::NonFinite {
                op: "loss",
                detail: format!("variant {} produced loss {}", net.variant(), v.to_f64()),
            });
        }
        Ok((v, parts))
    })
}

/// Executes one forward pass under the step's input order. With the mirrored
/// schedule, a swapped-order step becomes an orientation-consistent problem:
/// the flipped right image acts as a left view whose target is the flipped
/// right-view occlusion, so no swap is passed down.
fn forward_batch<T: Scalar>(
    net: &Network<T>,
    samples: &[StereoSample<T>],
    cfg: &TrainConfig,
    swap: bool,
) -> Result<(crate::net::ForwardRun<T>, bool)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mirrored = swap && cfg.mirror_swapped;
    if mirrored {
        let flip: Vec<StereoSample<T>> = samples
            .iter()
            .map(|s| {
                let mut f = s.clone();
                f.left_image = s.right_image.flip_horizontal();
                f.right_image = s.left_image.flip_horizontal();
                f
            })
            .collect();
        let left = batch_images(&flip, View::Left)?;
        let right = batch_images(&flip, View::Right)?;
        Ok((net.run(&left, &right, false)?, true))
    } else {
        let left = batch_images(samples, View::Left)?;
        let right = batch_images(samples, View::Right)?;
        Ok((net.run(&left, &right, swap)?, false))
    }
}

/// Loss and per-parameter gradients (index-aligned with the network) for one
/// batch of crop-ready samples carrying ground truth.
pub fn loss_and_gradients<T: Scalar>(
    net: &Network<T>,
    samples: &[StereoSample<T>],
    cfg: &TrainConfig,
    swap: bool,
) -> Result<(T, Vec<Tensor<T>>)> {
    let (mut run, mirrored) = forward_batch(net, samples, cfg, swap)?;
    let (value, parts) = loss_parts(net, &run, samples, cfg, mirrored)?;
    let loss_node = run.tape.attach_loss(parts, value)?;
    let grads = run.tape.backward(loss_node)?;
    let out = (0..net.param_count())
        .map(|i| grads.get_or_zeros(run.param_nodes[i], net.param(i).shape()))
        .collect();
    Ok((value, out))
}

/// Loss only (no backward pass); the finite-difference reference path.
pub fn evaluate_loss<T: Scalar>(
    net: &Network<T>,
    samples: &[StereoSample<T>],
    cfg: &TrainConfig,
    swap: bool,
) -> Result<T> {
    let (run, mirrored) = forward_batch(net, samples, cfg, swap)?;
    Ok(loss_parts(net, &run, samples, cfg, mirrored)?.0)
}

/// Draws a uniform crop position; every placement, including all four image
/// edges, is reachable.
pub fn sample_crop_rect(
    rng: &mut impl Rng,
    img_w: usize,
    img_h: usize,
    crop_w: usize,
    crop_h: usize,
) -> CropRect {
    CropRect {
        x: rng.random_range(0..=img_w - crop_w),
        y: rng.random_range(0..=img_h - crop_h),
        width: crop_w,
        height: crop_h,
    }
}

/// The largest network-compatible centered window of a `w x h` image.
pub fn center_crop_rect(w: usize, h: usize) -> Result<CropRect> {
    let cw = (w / CROP_DIVISOR) * CROP_DIVISOR;
    let ch = (h / CROP_DIVISOR) * CROP_DIVISOR;
    if cw == 0 || ch == 0 {
        return Err(Error::IndivisibleInput {
            op: "center_crop_rect",
            height: h,
            width: w,
            divisor: CROP_DIVISOR,
        });
    }
    Ok(CropRect {
        x: (w - cw) / 2,
        y: (h - ch) / 2,
        width: cw,
        height: ch,
    })
}

/// Pooled precision/recall/F at threshold 0.5 over every sample and every
/// view the variant predicts. Samples are center-cropped to the largest
/// network-compatible window and ground truth is regenerated on the crop.
pub fn evaluate_holdout<T: Scalar>(
    net: &Network<T>,
    samples: &[StereoSample<T>],
    gt_cfg: &GtConfig<T>,
) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let tau = T::from_f64(0.5);
    let mut pooled = Counts::default();
    for s in samples {
        let cropped = crop_with_gt(s, center_crop_rect(s.width(), s.height())?, gt_cfg)?;
        let pred = net.forward(&cropped.left_image, &cropped.right_image)?;
        let (left, right) = pred.occlusion(tau);
        pooled = pooled.merge(Counts::from_grids(
            &left.grid,
            &cropped.occ(View::Left)?.grid,
        )?);
        if let Some(right) = right {
            pooled = pooled.merge(Counts::from_grids(
                &right.grid,
                &cropped.occ(View::Right)?.grid,
            )?);
        }
    }
    Ok(pooled.metrics())
}

/// One epoch's record in the training log.
#[derive(Clone, Copy, Debug)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub holdout: Option<Metrics>,
}

/// A finished (or step-capped) training run.
#[derive(Debug)]
pub struct TrainOutcome<T> {
    pub net: Network<T>,
    pub adam: AdamState<T>,
    pub epochs: Vec<EpochLog>,
    /// Loss at every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

/// Trains a freshly initialized network. Sample order is reshuffled from the
/// seeded stream every epoch; each selected sample gets an independent random
/// crop whose ground truth is regenerated from the cropped disparities. The
/// alternating-input variant swaps its stacking order on odd steps. The
/// held-out split, if nonempty, is scored after every epoch.
pub fn train<T: Scalar>(
    train_set: &[StereoSample<T>],
    holdout: &[StereoSample<T>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    if cfg.crop_w % CROP_DIVISOR != 0 || cfg.crop_h % CROP_DIVISOR != 0 {
        return Err(Error::CropAlignment {
            width: cfg.crop_w,
            height: cfg.crop_h,
            divisor: CROP_DIVISOR,
        });
    }
    for s in train_set {
        if s.width() < cfg.crop_w || s.height() < cfg.crop_h {
            return Err(Error::CropOutOfBounds {
                x: 0,
                y: 0,
                width: cfg.crop_w,
                height: cfg.crop_h,
                src_width: s.width(),
                src_height: s.height(),
            });
        }
    }

    let gt_cfg: GtConfig<T> = cfg.gt();
    let mut net: Network<T> = Network::build(cfg.variant, cfg.channel_scale, cfg.seed)?;
    let mut adam = AdamState::new(&net);
    // Initialization consumes stream 0 of the seed; the shuffle/crop draws
    // use stream 1 so the two sequences never overlap.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut step_losses = Vec::new();
    let mut capped = false;

    for epoch in 0..cfg.epochs {
        if capped {
            break;
        }
        order.shuffle(&mut rng);
        let mut epoch_losses = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|max| adam.step >= max as u64) {
                capped = true;
                break;
            }
            let batch: Vec<StereoSample<T>> = chunk
                .iter()
                .map(|&i| {
                    let s = &train_set[i];
                    let rect =
                        sample_crop_rect(&mut rng, s.width(), s.height(), cfg.crop_w, cfg.crop_h);
                    crop_with_gt(s, rect, &gt_cfg)
                })
                .collect::<Result<_>>()?;
            let step = adam.step; // steps completed so far
            let swap = cfg.variant == Variant::AlterNet && step % 2 == 1;
            let (loss, grads) = loss_and_gradients(&net, &batch, cfg, swap)?;
            adam.step += 1;
            for i in 0..net.param_count() {
                let t = adam.step;
                adam_update(
                    net.param_mut(i).data_mut(),
                    grads[i].data(),
                    adam.m[i].data_mut(),
                    adam.v[i].data_mut(),
                    t,
                    cfg,
                );
            }
            let loss = loss.to_f64();
            epoch_losses.push(loss);
            step_losses.push(loss);
        }
        if epoch_losses.is_empty() {
            break;
        }
        let mean_loss = epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64;
        let holdout_metrics = if holdout.is_empty() {
            None
        } else {
            Some(evaluate_holdout(&net, holdout, &gt_cfg)?)
        };
        epochs.push(EpochLog {
            epoch,
            mean_loss,
            holdout: holdout_metrics,
        });
    }

    Ok(TrainOutcome {
        net,
        adam,
        epochs,
        step_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synth_scene, SceneSpec};

    fn tiny_scene<T: Scalar>(seed: u64, w: usize, h: usize) -> StereoSample<T> {
        synth_scene(&SceneSpec::random(seed, w, h)).unwrap().sample
    }

    fn tiny_cfg(variant: Variant) -> TrainConfig {
        TrainConfig {
            variant,
            channel_scale: 0.125,
            crop_h: 64,
            crop_w: 64,
            batch_size: 2,
            epochs: 2,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn adam_first_step_matches_hand_evaluation() {
        // g = 0.3, lr = 1e-2: bias correction makes m_hat = g, v_hat = g^2,
        // so the update is -lr * g / (|g| + eps).
        let cfg = TrainConfig::default();
        let mut p = [0.0f64];
        let mut m = [0.0f64];
        let mut v = [0.0f64];
        adam_update(&mut p, &[0.3], &mut m, &mut v, 1, &cfg);
        assert!((p[0] - (-0.009_999_999_666_666_68)).abs() < 1e-15);
        // The sign of the gradient, not its size, sets the step scale.
        let mut q = [0.0f64];
        adam_update(&mut q, &[300.0], &mut [0.0], &mut [0.0], 1, &cfg);
        assert!((q[0] - p[0]).abs() < 1e-9);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let cfg = TrainConfig::default();
        let mut p = [1.5f64, -2.0];
        let mut m = [0.0f64; 2];
        let mut v = [0.0f64; 2];
        adam_update(&mut p, &[0.0, 0.0], &mut m, &mut v, 1, &cfg);
        assert_eq!(p, [1.5, -2.0]);
        assert_eq!(m, [0.0, 0.0]);
    }

    #[test]
    fn gradients_match_finite_differences_through_the_net() {
        let sample = tiny_scene::<f64>(11, 64, 64);
        let cfg = tiny_cfg(Variant::SymmNet);
        let gt = cfg.gt::<f64>();
        let batch = vec![crop_with_gt(
            &sample,
            CropRect {
                x: 0,
                y: 0,
                width: 64,
                height: 64,
            },
            &gt,
        )
        .unwrap()];
        let net: Network<f64> = Network::build(cfg.variant, cfg.channel_scale, 3).unwrap();
        let (_, grads) = loss_and_gradients(&net, &batch, &cfg, false).unwrap();

        // Probe a bias (index 49 = pr.bias) and a mid-network weight.
        for (pi, ci) in [(49usize, 0usize), (20, 5)] {
            let h = 1e-6;
            let mut plus = net.clone();
            plus.param_mut(pi).data_mut()[ci] += h;
            let mut minus = net.clone();
            minus.param_mut(pi).data_mut()[ci] -= h;
            let fd = (evaluate_loss(&plus, &batch, &cfg, false).unwrap()
                - evaluate_loss(&minus, &batch, &cfg, false).unwrap())
                / (2.0 * h);
            let an = grads[pi].data()[ci];
            assert!(
                (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()).max(1.0),
                "param {pi}[{ci}]: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let samples: Vec<StereoSample<f32>> =
            (0..3).map(|s| tiny_scene(100 + s, 64, 64)).collect();
        let cfg = tiny_cfg(Variant::SymmNet);
        let a = train(&samples, &[], &cfg).unwrap();
        let b = train(&samples, &[], &cfg).unwrap();
        let enc_a = a.net.to_checkpoint(Some(a.adam.snapshot())).encode();
        let enc_b = b.net.to_checkpoint(Some(b.adam.snapshot())).encode();
        assert_eq!(enc_a, enc_b);
        assert_eq!(a.step_losses, b.step_losses);
        assert_eq!(a.adam.step, 4); // 3 samples, batch 2, 2 epochs
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let samples: Vec<StereoSample<f32>> = vec![tiny_scene(42, 64, 64)];
        let cfg = TrainConfig {
            epochs: 0,
            ..tiny_cfg(Variant::SymmNet)
        };
        let out = train(&samples, &[], &cfg).unwrap();
        let fresh: Network<f32> =
            Network::build(cfg.variant, cfg.channel_scale, cfg.seed).unwrap();
        assert_eq!(
            out.net.to_checkpoint(None).encode(),
            fresh.to_checkpoint(None).encode()
        );
        assert_eq!(out.adam.step, 0);
        assert!(out.epochs.is_empty());
    }

    #[test]
    fn max_steps_caps_the_run() {
        let samples: Vec<StereoSample<f32>> =
            (0..3).map(|s| tiny_scene(200 + s, 64, 64)).collect();
        let cfg = TrainConfig {
            epochs: 50,
            max_steps: Some(3),
            ..tiny_cfg(Variant::SymmNet)
        };
        let out = train(&samples, &[], &cfg).unwrap();
        assert_eq!(out.adam.step, 3);
        assert_eq!(out.step_losses.len(), 3);
    }

    #[test]
    fn empty_dataset_and_oversized_crop_rejected() {
        let cfg = tiny_cfg(Variant::SymmNet);
        assert!(matches!(
            train::<f32>(&[], &[], &cfg),
            Err(Error::EmptyDataset)
        ));
        let samples: Vec<StereoSample<f32>> = vec![tiny_scene(1, 64, 64)];
        let big = TrainConfig {
            crop_w: 128,
            crop_h: 128,
            ..cfg
        };
        assert!(matches!(
            train(&samples, &[], &big),
            Err(Error::CropOutOfBounds { .. })
        ));
        let unaligned = TrainConfig {
            crop_w: 60,
            crop_h: 60,
            ..cfg
        };
        assert!(matches!(
            train(&samples, &[], &unaligned),
            Err(Error::CropAlignment { .. })
        ));
    }

    #[test]
    fn crop_sampling_reaches_every_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (mut x0, mut x_max, mut y0, mut y_max) = (false, false, false, false);
        for _ in 0..500 {
            let r = sample_crop_rect(&mut rng, 192, 128, 64, 64);
            x0 |= r.x == 0;
            x_max |= r.x == 128;
            y0 |= r.y == 0;
            y_max |= r.y == 64;
            assert!(r.x <= 128 && r.y <= 64);
        }
        assert!(x0 && x_max && y0 && y_max);
    }

    #[test]
    fn alternating_variant_swaps_on_odd_steps_only() {
        let sample = tiny_scene::<f64>(9, 64, 64);
        let cfg = tiny_cfg(Variant::AlterNet);
        let gt = cfg.gt::<f64>();
        let batch = vec![crop_with_gt(
            &sample,
            CropRect {
                x: 0,
                y: 0,
                width: 64,
                height: 64,
            },
            &gt,
        )
        .unwrap()];
        let net: Network<f64> = Network::build(cfg.variant, cfg.channel_scale, 5).unwrap();
        let even = evaluate_loss(&net, &batch, &cfg, false).unwrap();
        let odd = evaluate_loss(&net, &batch, &cfg, true).unwrap();
        // Different stacking order and different supervision target.
        assert!(even.is_finite() && odd.is_finite());
        assert!((even - odd).abs() > 1e-9);

        // The mirrored schedule changes the swapped step but not the plain one.
        let mirrored_cfg = TrainConfig {
            mirror_swapped: true,
            ..cfg
        };
        let even_m = evaluate_loss(&net, &batch, &mirrored_cfg, false).unwrap();
        let odd_m = evaluate_loss(&net, &batch, &mirrored_cfg, true).unwrap();
        assert_eq!(even, even_m);
        assert!(odd_m.is_finite());
        assert!((odd_m - odd).abs() > 1e-12);
    }

    #[test]
    fn regression_variant_trains_on_disparity_error() {
        let sample = tiny_scene::<f64>(13, 64, 64);
        let cfg = tiny_cfg(Variant::LrcNet);
        let gt = cfg.gt::<f64>();
        let batch = vec![crop_with_gt(
            &sample,
            CropRect {
                x: 0,
                y: 0,
                width: 64,
                height: 64,
            },
            &gt,
        )
        .unwrap()];
        let net: Network<f64> = Network::build(cfg.variant, cfg.channel_scale, 5).unwrap();
        let (loss, grads) = loss_and_gradients(&net, &batch, &cfg, false).unwrap();
        assert!(loss.is_finite() && loss > 0.0);
        assert_eq!(grads.len(), net.param_count());
        assert!(grads[0].data().iter().any(|&g| g != 0.0));
    }

    #[test]
    fn holdout_counts_cover_both_views() {
        let samples: Vec<StereoSample<f32>> = vec![tiny_scene(77, 96, 80)];
        let net: Network<f32> = Network::build(Variant::SymmNet, 0.125, 0).unwrap();
        let m = evaluate_holdout(&net, &samples, &GtConfig::default()).unwrap();
        // Center crop of 96x80 is 64x64; both views pooled.
        assert_eq!(m.counts.total(), 2 * 64 * 64);
        let single: Network<f32> = Network::build(Variant::MonoNetL, 0.125, 0).unwrap();
        let m = evaluate_holdout(&single, &samples, &GtConfig::default()).unwrap();
        assert_eq!(m.counts.total(), 64 * 64);
    }

    #[test]
    fn holdout_logging_runs_each_epoch() {
        let samples: Vec<StereoSample<f32>> = (0..2).map(|s| tiny_scene(s, 64, 64)).collect();
        let cfg = TrainConfig {
            epochs: 2,
            ..tiny_cfg(Variant::SymmNet)
        };
        let out = train(&samples, &samples[..1], &cfg).unwrap();
        assert_eq!(out.epochs.len(), 2);
        for log in &out.epochs {
            let h = log.holdout.expect("holdout metrics present");
            assert_eq!(h.counts.total(), 2 * 64 * 64);
            assert!(log.mean_loss.is_finite());
        }
    }
}
