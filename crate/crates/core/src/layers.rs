//! Linear, LayerNorm and Dropout layers, the 256-wide adapter head, and the
//! toy trunks that stand in for pretrained backbones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{keyed_uniform, ParamId, ParamStore, RngState, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Bottleneck width of the adapter head.
pub const ADAPTER_WIDTH: usize = 256;
pub const ADAPTER_INPUT_DROPOUT: f64 = 0.5;
pub const ADAPTER_HIDDEN_DROPOUT: f64 = 0.3;
pub const LAYERNORM_EPS: f64 = 1e-5;

/// Name of the weight initialisation scheme, recorded in checkpoints.
pub const INIT_SCHEME: &str = "uniform(+-sqrt(6/(fan_in+fan_out))), bias=0";

/// Per-forward state: train/eval mode and the dropout mask key.
///
/// Train-mode dropout masks are a pure function of
/// `(mask_seed, dropout call index, row_offset + row, column)`, so splitting a
/// batch into microbatches with matching `row_offset`s reproduces the masks
/// of the full batch exactly.
#[derive(Debug, Clone)]
pub struct ForwardCtx {
    train: bool,
    mask_seed: u64,
    row_offset: u64,
    dropout_calls: u64,
}

impl ForwardCtx {
    pub fn eval() -> Self {
        ForwardCtx {
            train: false,
            mask_seed: 0,
            row_offset: 0,
            dropout_calls: 0,
        }
    }

    pub fn train(mask_seed: u64) -> Self {
        ForwardCtx {
            train: true,
            mask_seed,
            row_offset: 0,
            dropout_calls: 0,
        }
    }

    /// Train mode with a mask seed drawn from `rng`.
    pub fn train_from(rng: &mut RngState) -> Self {
        ForwardCtx::train(rng.next_u64())
    }

    pub fn with_row_offset(mut self, offset: u64) -> Self {
        self.row_offset = offset;
        self
    }

    pub fn is_train(&self) -> bool {
        self.train
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl LinearLayer {
    pub fn new(store: &mut ParamStore, name: &str, in_features: usize, out_features: usize, rng: &mut RngState) -> Self {
        let limit = (6.0 / (in_features + out_features) as f64).sqrt();
        let w = (0..in_features * out_features)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::new(vec![out_features, in_features], w).expect("positive extents"),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_features]));
        LinearLayer {
            weight,
            bias,
            in_features,
            out_features,
        }
    }

    /// `y = x·Wᵀ + b`.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let shape = tape.shape(x);
        if shape.len() != 2 || shape[1] != self.in_features {
            return Err(Error::dim("linear", shape, &[self.out_features, self.in_features]));
        }
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let y = tape.matmul_t(x, w)?;
        tape.add_bias(y, b)
    }

    pub fn zero(&self, store: &mut ParamStore) {
        store.get_mut(self.weight).data_mut().fill(0.0);
        store.get_mut(self.bias).data_mut().fill(0.0);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LayerNormLayer {
    pub gain: ParamId,
    pub shift: ParamId,
    pub width: usize,
    pub eps: f64,
}

impl LayerNormLayer {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        let gain = store.add(format!("{name}.gain"), Tensor::full(&[width], 1.0));
        let shift = store.add(format!("{name}.shift"), Tensor::zeros(&[width]));
        LayerNormLayer {
            gain,
            shift,
            width,
            eps: LAYERNORM_EPS,
        }
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let g = tape.param(self.gain);
        let b = tape.param(self.shift);
        tape.layer_norm(x, g, b, self.eps)
    }
}

/// Inverted dropout: train mode scales kept units by `1/(1−p)`, eval mode is the identity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DropoutLayer {
    rate: f64,
}

impl DropoutLayer {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(DropoutLayer { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward(&self, tape: &mut Tape, x: Var, ctx: &mut ForwardCtx) -> Result<Var> {
        if !ctx.train {
            return Ok(x);
        }
        let call = ctx.dropout_calls;
        ctx.dropout_calls += 1;
        if self.rate == 0.0 {
            return Ok(x);
        }
        let t = tape.value(x);
        let cols = t.last_dim();
        let keep_scale = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..t.len())
            .map(|i| {
                let row = ctx.row_offset + (i / cols) as u64;
                let key = (call << 40) ^ row;
                if keyed_uniform(ctx.mask_seed, key, (i % cols) as u64) < self.rate {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect();
        let mask = tape.constant(Tensor::new(t.shape().to_vec(), mask)?);
        tape.mul(x, mask)
    }
}

/// `dropout(0.5) → linear(d_in→256) → layernorm → relu → dropout(0.3) → linear(256→C)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdapterHead {
    pub input_dropout: DropoutLayer,
    pub project: LinearLayer,
    pub norm: LayerNormLayer,
    pub hidden_dropout: DropoutLayer,
    pub classify: LinearLayer,
}

impl AdapterHead {
    pub fn new(store: &mut ParamStore, name: &str, d_in: usize, classes: usize, rng: &mut RngState) -> Self {
        AdapterHead {
            input_dropout: DropoutLayer::new(ADAPTER_INPUT_DROPOUT).expect("valid rate"),
            project: LinearLayer::new(store, &format!("{name}.project"), d_in, ADAPTER_WIDTH, rng),
            norm: LayerNormLayer::new(store, &format!("{name}.norm"), ADAPTER_WIDTH),
            hidden_dropout: DropoutLayer::new(ADAPTER_HIDDEN_DROPOUT).expect("valid rate"),
            classify: LinearLayer::new(store, &format!("{name}.classify"), ADAPTER_WIDTH, classes, rng),
        }
    }

    pub fn d_in(&self) -> usize {
        self.project.in_features
    }

    pub fn bottleneck(&self) -> usize {
        self.project.out_features
    }

    pub fn classes(&self) -> usize {
        self.classify.out_features
    }

    pub fn forward(&self, tape: &mut Tape, features: Var, ctx: &mut ForwardCtx) -> Result<Var> {
        let h = self.input_dropout.forward(tape, features, ctx)?;
        let h = self.project.forward(tape, h)?;
        let h = self.norm.forward(tape, h)?;
        let h = tape.relu(h);
        let h = self.hidden_dropout.forward(tape, h, ctx)?;
        self.classify.forward(tape, h)
    }
}

/// Built-in trunk configurations of differing depth and width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrunkPreset {
    DenseToy,
    EffToy,
    VitToy,
}

impl TrunkPreset {
    pub const ALL: [TrunkPreset; 3] = [TrunkPreset::DenseToy, TrunkPreset::EffToy, TrunkPreset::VitToy];

    pub fn id(self) -> &'static str {
        match self {
            TrunkPreset::DenseToy => "densetoy",
            TrunkPreset::EffToy => "efftoy",
            TrunkPreset::VitToy => "vittoy",
        }
    }

    /// Hidden widths, one per linear+relu block.
    pub fn widths(self) -> &'static [usize] {
        match self {
            TrunkPreset::DenseToy => &[48, 48, 48],
            TrunkPreset::EffToy => &[64, 64],
            TrunkPreset::VitToy => &[32],
        }
    }

    pub fn uses_layernorm(self) -> bool {
        matches!(self, TrunkPreset::EffToy)
    }
}

impl fmt::Display for TrunkPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for TrunkPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TrunkPreset::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown trunk '{s}' (expected densetoy, efftoy or vittoy)")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrunkBlock {
    pub linear: LinearLayer,
    pub norm: Option<LayerNormLayer>,
}

/// Stack of linear(+layernorm)+relu blocks over a flattened patch.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ToyTrunk {
    pub preset: TrunkPreset,
    pub blocks: Vec<TrunkBlock>,
    pub input_dim: usize,
}

impl ToyTrunk {
    pub fn new(store: &mut ParamStore, preset: TrunkPreset, input_dim: usize, rng: &mut RngState) -> Self {
        let mut blocks = Vec::new();
        let mut width = input_dim;
        for (i, &w) in preset.widths().iter().enumerate() {
            let linear = LinearLayer::new(store, &format!("trunk.{i}"), width, w, rng);
            let norm = preset
                .uses_layernorm()
                .then(|| LayerNormLayer::new(store, &format!("trunk.{i}.norm"), w));
            blocks.push(TrunkBlock { linear, norm });
            width = w;
        }
        ToyTrunk {
            preset,
            blocks,
            input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.blocks.last().map_or(self.input_dim, |b| b.linear.out_features)
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for block in &self.blocks {
            h = block.linear.forward(tape, h)?;
            if let Some(norm) = &block.norm {
                h = norm.forward(tape, h)?;
            }
            h = tape.relu(h);
        }
        Ok(h)
    }
}

/// A differentiable classifier over row-vector inputs.
pub trait Model {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn input_width(&self) -> usize;
    fn classes(&self) -> usize;
    /// Maps `x[B × input_width]` to logits `[B × classes]`.
    fn forward(&self, tape: &mut Tape<'_>, x: Var, ctx: &mut ForwardCtx) -> Result<Var>;
}

/// Eval-mode logits for a `[B × input_width]` matrix, processed in chunks.
pub fn predict_logits<M: Model + ?Sized>(model: &M, inputs: &Tensor) -> Result<Tensor> {
    const CHUNK: usize = 512;
    let width = inputs.last_dim();
    if width != model.input_width() {
        return Err(Error::dim("predict", inputs.shape(), &[model.input_width()]));
    }
    let mut out = Vec::with_capacity(inputs.rows() * model.classes());
    for chunk in inputs.data().chunks(CHUNK * width) {
        let mut tape = Tape::with_params(model.params());
        let x = tape.constant(Tensor::new(vec![chunk.len() / width, width], chunk.to_vec())?);
        let y = model.forward(&mut tape, x, &mut ForwardCtx::eval())?;
        out.extend_from_slice(tape.value(y).data());
    }
    Tensor::new(vec![inputs.rows(), model.classes()], out)
}

/// Toy trunk followed by the adapter head; consumes flattened `H×W` patches.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaseModel {
    pub store: ParamStore,
    pub trunk: ToyTrunk,
    pub head: AdapterHead,
    pub height: usize,
    pub width: usize,
}

impl BaseModel {
    pub fn new(preset: TrunkPreset, height: usize, width: usize, classes: usize, rng: &mut RngState) -> Self {
        let mut store = ParamStore::new();
        let trunk = ToyTrunk::new(&mut store, preset, height * width, rng);
        let head = AdapterHead::new(&mut store, "head", trunk.output_dim(), classes, rng);
        BaseModel {
            store,
            trunk,
            head,
            height,
            width,
        }
    }

    pub fn id(&self) -> &'static str {
        self.trunk.preset.id()
    }

    /// Logits for patches shaped `[B × H × W]`.
    pub fn forward_patches(&self, tape: &mut Tape<'_>, patches: Var, ctx: &mut ForwardCtx) -> Result<Var> {
        let shape = tape.shape(patches).to_vec();
        if shape.len() != 3 || shape[1] != self.height || shape[2] != self.width {
            return Err(Error::dim("base_model", &shape, &[shape[0], self.height, self.width]));
        }
        let flat = tape.reshape(patches, &[shape[0], self.height * self.width])?;
        self.forward(tape, flat, ctx)
    }
}

impl Model for BaseModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn input_width(&self) -> usize {
        self.height * self.width
    }

    fn classes(&self) -> usize {
        self.head.classes()
    }

    fn forward(&self, tape: &mut Tape<'_>, x: Var, ctx: &mut ForwardCtx) -> Result<Var> {
        let features = self.trunk.forward(tape, x)?;
        self.head.forward(tape, features, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, DEFAULT_STEP};

    fn rows(t: &Tensor) -> Vec<Vec<f64>> {
        (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
    }

    #[test]
    fn linear_identity_and_zero_input() {
        let mut store = ParamStore::new();
        let mut rng = RngState::new(0);
        let lin = LinearLayer::new(&mut store, "l", 2, 2, &mut rng);
        *store.get_mut(lin.weight) = Tensor::eye(2);
        let mut tape = Tape::with_params(&store);
        let x = tape.constant(Tensor::from_rows(&[[0.3, -1.5]]).unwrap());
        let y = lin.forward(&mut tape, x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.3, -1.5]);

        store.get_mut(lin.bias).data_mut().copy_from_slice(&[0.25, -2.0]);
        let mut tape = Tape::with_params(&store);
        let x = tape.constant(Tensor::zeros(&[1, 2]));
        let y = lin.forward(&mut tape, x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.25, -2.0]);
    }

    #[test]
    fn linear_hand_case() {
        let mut store = ParamStore::new();
        let lin = LinearLayer::new(&mut store, "l", 2, 2, &mut RngState::new(1));
        *store.get_mut(lin.weight) = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        store.get_mut(lin.bias).data_mut().copy_from_slice(&[1.0, 1.0]);
        let mut tape = Tape::with_params(&store);
        let x = tape.constant(Tensor::from_rows(&[[1.0, 1.0]]).unwrap());
        let y = lin.forward(&mut tape, x).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 8.0]);
    }

    #[test]
    fn linear_width_mismatch() {
        let mut store = ParamStore::new();
        let lin = LinearLayer::new(&mut store, "l", 3, 2, &mut RngState::new(1));
        let mut tape = Tape::with_params(&store);
        let x = tape.constant(Tensor::zeros(&[4, 2]));
        assert!(matches!(lin.forward(&mut tape, x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn linear_init_within_glorot_bound() {
        let mut store = ParamStore::new();
        let lin = LinearLayer::new(&mut store, "l", 10, 6, &mut RngState::new(5));
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(store.get(lin.weight).data().iter().all(|w| w.abs() <= limit));
        assert!(store.get(lin.bias).data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn layernorm_examples() {
        let mut store = ParamStore::new();
        let ln = LayerNormLayer::new(&mut store, "n", 3);
        let mut tape = Tape::with_params(&store);
        let x = tape.constant(Tensor::from_rows(&[[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]).unwrap());
        let y = ln.forward(&mut tape, x).unwrap();
        let out = rows(tape.value(y));
        let expect = 1.0 / (2.0f64 / 3.0 + 1e-5).sqrt();
        assert!((out[0][0] + expect).abs() < 1e-12);
        assert!(out[0][1].abs() < 1e-12);
        assert!((out[0][2] - expect).abs() < 1e-12);
        assert!((out[0][2] - 1.22474).abs() < 1e-5);
        assert!(out[1].iter().all(|v| *v == 0.0));

        store.get_mut(ln.gain).data_mut().fill(0.0);
        store.get_mut(ln.shift).data_mut().copy_from_slice(&[0.5, -1.0, 2.0]);
        let mut tape = Tape::with_params(&store);
        let x = tape.constant(Tensor::from_rows(&[[1.0, 7.0, -3.0]]).unwrap());
        let y = ln.forward(&mut tape, x).unwrap();
        assert_eq!(tape.value(y).data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn dropout_rejects_rate_one() {
        assert!(matches!(DropoutLayer::new(1.0), Err(Error::Config(_))));
        assert!(DropoutLayer::new(-0.1).is_err());
        assert!(DropoutLayer::new(0.0).is_ok());
    }

    #[test]
    fn dropout_eval_and_zero_rate_are_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.1, 0.2, 0.3]));
        let d = DropoutLayer::new(0.5).unwrap();
        let y = d.forward(&mut tape, x, &mut ForwardCtx::eval()).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        let d0 = DropoutLayer::new(0.0).unwrap();
        let y = d0.forward(&mut tape, x, &mut ForwardCtx::train(3)).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn dropout_preserves_expectation() {
        let n = 1_000_000;
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[1000, 1000], 1.0));
        let d = DropoutLayer::new(0.5).unwrap();
        let y = d.forward(&mut tape, x, &mut ForwardCtx::train(17)).unwrap();
        let mean = tape.value(y).data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn dropout_masks_follow_row_offset() {
        let d = DropoutLayer::new(0.5).unwrap();
        let data: Vec<f64> = (0..40).map(|i| i as f64 + 1.0).collect();
        let mut tape = Tape::new();
        let full = tape.constant(Tensor::new(vec![4, 10], data.clone()).unwrap());
        let y = d.forward(&mut tape, full, &mut ForwardCtx::train(9)).unwrap();
        let whole = tape.value(y).data().to_vec();
        let lower = tape.constant(Tensor::new(vec![2, 10], data[20..].to_vec()).unwrap());
        let y2 = d
            .forward(&mut tape, lower, &mut ForwardCtx::train(9).with_row_offset(2))
            .unwrap();
        assert_eq!(&whole[20..], tape.value(y2).data());
    }

    #[test]
    fn adapter_width_and_determinism() {
        let mut rng = RngState::new(2);
        for d_in in [3, 17, 64] {
            let mut store = ParamStore::new();
            let head = AdapterHead::new(&mut store, "h", d_in, 2, &mut rng);
            assert_eq!(head.bottleneck(), 256);
            assert_eq!(head.classes(), 2);
            let x = Tensor::new(vec![2, d_in], (0..2 * d_in).map(|i| (i as f64).sin()).collect()).unwrap();
            let run = || {
                let mut tape = Tape::with_params(&store);
                let xv = tape.constant(x.clone());
                let y = head.forward(&mut tape, xv, &mut ForwardCtx::eval()).unwrap();
                tape.value(y).clone()
            };
            let a = run();
            assert_eq!(a.shape(), &[2, 2]);
            assert_eq!(a, run());
        }
    }

    #[test]
    fn base_model_shapes_and_zero_head() {
        let mut rng = RngState::new(4);
        for preset in TrunkPreset::ALL {
            let mut model = BaseModel::new(preset, 5, 5, 2, &mut rng);
            assert_eq!(model.trunk.output_dim(), model.head.d_in());
            let patches = Tensor::new(vec![7, 5, 5], (0..175).map(|i| (i % 13) as f64 / 13.0).collect()).unwrap();
            let mut tape = Tape::with_params(&model.store);
            let p = tape.constant(patches.clone());
            let y = model.forward_patches(&mut tape, p, &mut ForwardCtx::eval()).unwrap();
            assert_eq!(tape.shape(y), &[7, 2]);
            drop(tape);

            let classify = model.head.classify.clone();
            classify.zero(&mut model.store);
            let mut tape = Tape::with_params(&model.store);
            let p = tape.constant(patches);
            let y = model.forward_patches(&mut tape, p, &mut ForwardCtx::eval()).unwrap();
            assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn base_model_rejects_wrong_patch_size() {
        let model = BaseModel::new(TrunkPreset::VitToy, 4, 4, 2, &mut RngState::new(0));
        let mut tape = Tape::with_params(&model.store);
        let p = tape.constant(Tensor::zeros(&[2, 3, 4]));
        assert!(model.forward_patches(&mut tape, p, &mut ForwardCtx::eval()).is_err());
    }

    #[test]
    fn trunk_presets_parse() {
        for p in TrunkPreset::ALL {
            assert_eq!(p.id().parse::<TrunkPreset>().unwrap(), p);
        }
        assert!("resnet".parse::<TrunkPreset>().is_err());
    }

    #[test]
    fn layers_pass_gradient_check() {
        let mut rng = RngState::new(21);
        let model = BaseModel::new(TrunkPreset::EffToy, 3, 3, 2, &mut rng);
        let x = Tensor::new(vec![4, 9], (0..36).map(|_| rng.uniform()).collect()).unwrap();
        let report = grad_check(
            &model.store,
            |tape| {
                let xv = tape.constant(x.clone());
                let y = model.forward(tape, xv, &mut ForwardCtx::eval())?;
                let s = tape.softmax(y);
                let l = tape.mul(s, s)?;
                Ok(tape.sum(l))
            },
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");
    }
}
