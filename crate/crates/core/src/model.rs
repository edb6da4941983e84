//! The multi-resolution classifier: a 3x3 convolutional stem, parallel
//! branches at halved resolutions exchanging features every stage, a 1x1
//! fuse layer back to full resolution, and a GAP -> linear -> softmax head.
//!
//! The resolution-0 branch keeps the stem's spatial dims from the first
//! layer to the fuse output; lower branches live at dims halved once per
//! resolution step. Input dims must be divisible by 2^(branches-1) so the
//! halving schedule is exact.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::{Graph, Tensor, Var};

/// Architecture description. `in_mels` x `in_frames` is the 1-channel input
/// image; `branch_channels[r]` is the width of resolution branch r.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HRNetConfig {
    pub in_frames: usize,
    pub in_mels: usize,
    pub stem_channels: usize,
    pub n_stages: usize,
    pub branch_channels: Vec<usize>,
    pub blocks_per_branch: usize,
    pub n_classes: usize,
    pub fuse_channels: usize,
}

impl Default for HRNetConfig {
    fn default() -> Self {
        HRNetConfig {
            in_frames: 300,
            in_mels: 64,
            stem_channels: 16,
            n_stages: 3,
            branch_channels: vec![16, 32, 64],
            blocks_per_branch: 1,
            n_classes: 8,
            fuse_channels: 64,
        }
    }
}

impl HRNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages < 1 {
            return Err(Error::InvalidConfig("model.n_stages must be at least 1".into()));
        }
        let nb = self.branch_channels.len();
        if nb == 0 {
            return Err(Error::InvalidConfig(
                "model.branch_channels must not be empty".into(),
            ));
        }
        if nb > self.n_stages + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} branches can never be instantiated by {} stages (at most n_stages + 1)",
                nb, self.n_stages
            )));
        }
        if self.branch_channels.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig(
                "model.branch_channels must be non-decreasing".into(),
            ));
        }
        if self.branch_channels.iter().any(|&c| c == 0) {
            return Err(Error::InvalidConfig(
                "model.branch_channels must be positive".into(),
            ));
        }
        if self.stem_channels != self.branch_channels[0] {
            return Err(Error::InvalidConfig(format!(
                "model.stem_channels ({}) must equal branch_channels[0] ({}): the stem output is branch 0",
                self.stem_channels, self.branch_channels[0]
            )));
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidConfig("model.n_classes must be at least 2".into()));
        }
        if self.fuse_channels == 0 || self.blocks_per_branch == 0 {
            return Err(Error::InvalidConfig(
                "model.fuse_channels and model.blocks_per_branch must be positive".into(),
            ));
        }
        for r in 0..nb {
            let (h, w) = self.branch_dims_unchecked(r);
            if h == 0 || w == 0 {
                return Err(Error::BranchTooSmall { branch: r, h, w });
            }
            let div = 1usize << r;
            if self.in_mels % div != 0 || self.in_frames % div != 0 {
                return Err(Error::InvalidConfig(format!(
                    "input {}x{} is not divisible by 2^{} required by branch {}",
                    self.in_mels, self.in_frames, r, r
                )));
            }
        }
        Ok(())
    }

    fn branch_dims_unchecked(&self, r: usize) -> (usize, usize) {
        (self.in_mels >> r, self.in_frames >> r)
    }

    /// Spatial dims (mels, frames) of resolution branch `r`.
    pub fn branch_dims(&self, r: usize) -> (usize, usize) {
        self.branch_dims_unchecked(r)
    }

    /// Branch count entering stage `s` (stages are 0-indexed).
    pub fn branches_in(&self, s: usize) -> usize {
        (s + 1).min(self.branch_channels.len())
    }

    /// Branch count after all stages.
    pub fn final_branches(&self) -> usize {
        (self.n_stages + 1).min(self.branch_channels.len())
    }
}

/// Named, ordered parameter collection. Iteration order is fixed by
/// construction and identical across runs.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    fn push(&mut self, name: String, mut tensor: Tensor) {
        tensor.set_requires_grad(true);
        debug_assert!(!self.index.contains_key(&name), "duplicate param {name}");
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, tensor));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.entries
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect()
    }

    /// Total scalar count across all parameters.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }
}

/// Parameters leafed onto a graph for one forward pass, aligned with the
/// model's parameter order.
pub struct BoundParams {
    vars: Vec<Var>,
    by_name: HashMap<String, Var>,
}

impl BoundParams {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.by_name.get(name).copied().ok_or_else(|| Error::InvalidOperand {
            op: "model",
            msg: format!("unknown parameter {name:?}"),
        })
    }
}

/// One forward pass: the output probabilities plus the vars needed to read
/// gradients back out after `backward`.
pub struct ForwardPass {
    pub probs: Var,
    pub input: Var,
    pub params: BoundParams,
}

/// Feature maps of all live resolution branches, highest resolution first.
pub struct BranchSet {
    pub maps: Vec<Var>,
}

/// The instantiated parameterized model.
#[derive(Clone, Debug)]
pub struct HRNetModel {
    config: HRNetConfig,
    params: ParamSet,
}

impl HRNetModel {
    /// Allocate all parameters: He-normal conv/linear weights
    /// (std = sqrt(2/fan_in)) drawn in manifest order, zero biases.
    pub fn build(config: &HRNetConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::default();
        let conv = |params: &mut ParamSet, rng: &mut Rng, name: &str, co: usize, ci: usize, k: usize| {
            let fan_in = ci * k * k;
            let std = (2.0 / fan_in as f64).sqrt();
            params.push(
                format!("{name}.weight"),
                crate::tensor::Tensor::randn(vec![co, ci, k, k], std, rng),
            );
            params.push(format!("{name}.bias"), Tensor::zeros(vec![co]));
        };

        conv(&mut params, rng, "hrim.conv", config.stem_channels, 1, 3);

        let ch = &config.branch_channels;
        for s in 0..config.n_stages {
            let b_in = config.branches_in(s);
            for b in 0..b_in {
                for k in 0..config.blocks_per_branch {
                    let prefix = format!("stage{s}.branch{b}.block{k}");
                    conv(&mut params, rng, &format!("{prefix}.conv1"), ch[b], ch[b], 3);
                    conv(&mut params, rng, &format!("{prefix}.conv2"), ch[b], ch[b], 3);
                }
            }
            for j in 0..b_in {
                for i in 0..b_in {
                    if i < j {
                        for t in 0..j - i {
                            let co = if t == j - i - 1 { ch[j] } else { ch[i] };
                            conv(
                                &mut params,
                                rng,
                                &format!("stage{s}.exchange.to{j}.from{i}.down{t}"),
                                co,
                                ch[i],
                                3,
                            );
                        }
                    } else if i > j {
                        conv(
                            &mut params,
                            rng,
                            &format!("stage{s}.exchange.to{j}.from{i}.proj"),
                            ch[j],
                            ch[i],
                            1,
                        );
                    }
                }
            }
            if b_in < ch.len() {
                conv(
                    &mut params,
                    rng,
                    &format!("stage{s}.transition"),
                    ch[b_in],
                    ch[b_in - 1],
                    3,
                );
            }
        }

        for r in 0..config.final_branches() {
            conv(
                &mut params,
                rng,
                &format!("fuse.branch{r}.proj"),
                config.fuse_channels,
                ch[r],
                1,
            );
        }

        let fan_in = config.fuse_channels;
        let std = (2.0 / fan_in as f64).sqrt();
        params.push(
            "head.linear.weight".to_string(),
            crate::tensor::Tensor::randn(vec![config.n_classes, config.fuse_channels], std, rng),
        );
        params.push("head.linear.bias".to_string(), Tensor::zeros(vec![config.n_classes]));

        Ok(HRNetModel {
            config: config.clone(),
            params,
        })
    }

    pub fn config(&self) -> &HRNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn param_manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.params.manifest()
    }

    /// Replace parameter values from (name, tensor) pairs; names and shapes
    /// must match the manifest exactly.
    pub fn load_params(&mut self, loaded: &[(String, Tensor)]) -> Result<()> {
        if loaded.len() != self.params.len() {
            return Err(Error::InvalidData(format!(
                "parameter count mismatch: model has {}, checkpoint has {}",
                self.params.len(),
                loaded.len()
            )));
        }
        for ((name, tensor), (lname, ltensor)) in self.params.iter_mut().zip(loaded) {
            if name != lname {
                return Err(Error::InvalidData(format!(
                    "parameter order mismatch: model {name:?} vs checkpoint {lname:?}"
                )));
            }
            if tensor.shape() != ltensor.shape() {
                return Err(Error::ShapeMismatch {
                    op: "load_params",
                    lhs: tensor.shape().to_vec(),
                    rhs: ltensor.shape().to_vec(),
                });
            }
            tensor.data_mut().copy_from_slice(ltensor.data());
        }
        Ok(())
    }

    /// Reconstruct bound parameters from externally-supplied vars, one per
    /// parameter in manifest order; used by the verification harness to
    /// differentiate the model w.r.t. leaves it inserted itself.
    pub fn bound_from_vars(&self, vars: &[Var]) -> Result<BoundParams> {
        if vars.len() != self.params.len() {
            return Err(Error::InvalidData(format!(
                "expected {} parameter vars, got {}",
                self.params.len(),
                vars.len()
            )));
        }
        let by_name = self
            .params
            .iter()
            .zip(vars)
            .map(|((n, _), &v)| (n.to_string(), v))
            .collect();
        Ok(BoundParams {
            vars: vars.to_vec(),
            by_name,
        })
    }

    /// Leaf every parameter onto the graph (requires_grad), preserving order.
    pub fn bind(&self, g: &mut Graph) -> BoundParams {
        let mut vars = Vec::with_capacity(self.params.len());
        let mut by_name = HashMap::with_capacity(self.params.len());
        for (name, tensor) in self.params.iter() {
            let var = g.leaf(tensor.clone());
            vars.push(var);
            by_name.insert(name.to_string(), var);
        }
        BoundParams { vars, by_name }
    }

    fn conv_named(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        name: &str,
        x: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let w = bound.var(&format!("{name}.weight"))?;
        let b = bound.var(&format!("{name}.bias"))?;
        g.conv2d(x, w, b, stride, padding)
    }

    /// Stem: 3x3 stride-1 pad-1 convolution to `stem_channels`, then ReLU.
    pub fn hrim(&self, g: &mut Graph, bound: &BoundParams, x: Var) -> Result<Var> {
        let (_, c, h, w) = g.value(x).dims4("hrim")?;
        if c != 1 || h != self.config.in_mels || w != self.config.in_frames {
            return Err(Error::InvalidOperand {
                op: "hrim",
                msg: format!(
                    "input shape {:?} does not match configured 1x{}x{}",
                    g.value(x).shape(),
                    self.config.in_mels,
                    self.config.in_frames
                ),
            });
        }
        let y = self.conv_named(g, bound, "hrim.conv", x, 1, 1)?;
        g.relu(y)
    }

    /// y = relu(x + conv(relu(conv(x)))); channels and dims preserved.
    pub fn residual_block(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        prefix: &str,
        x: Var,
    ) -> Result<Var> {
        let c1 = self.conv_named(g, bound, &format!("{prefix}.conv1"), x, 1, 1)?;
        let a1 = g.relu(c1)?;
        let c2 = self.conv_named(g, bound, &format!("{prefix}.conv2"), a1, 1, 1)?;
        let sum = g.add(x, c2)?;
        g.relu(sum)
    }

    /// Fully connected multi-resolution exchange for stage `s`: output branch
    /// j sums the identity (i = j), stride-2 3x3 chains (i < j), and 1x1
    /// projection + nearest upsampling (i > j) of every input branch, then
    /// ReLU. When the stage still has room for a new branch, it is created
    /// from the lowest input branch by one stride-2 3x3 conv (plus ReLU).
    pub fn exchange(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        s: usize,
        branches: &BranchSet,
    ) -> Result<BranchSet> {
        let b_in = branches.maps.len();
        let mut out = Vec::with_capacity(b_in + 1);
        for j in 0..b_in {
            let mut acc: Option<Var> = None;
            for i in 0..b_in {
                let contrib = if i == j {
                    branches.maps[i]
                } else if i < j {
                    let mut cur = branches.maps[i];
                    for t in 0..j - i {
                        cur = self.conv_named(
                            g,
                            bound,
                            &format!("stage{s}.exchange.to{j}.from{i}.down{t}"),
                            cur,
                            2,
                            1,
                        )?;
                        if t + 1 < j - i {
                            cur = g.relu(cur)?;
                        }
                    }
                    cur
                } else {
                    let p = self.conv_named(
                        g,
                        bound,
                        &format!("stage{s}.exchange.to{j}.from{i}.proj"),
                        branches.maps[i],
                        1,
                        0,
                    )?;
                    g.upsample_nearest(p, 1 << (i - j))?
                };
                acc = Some(match acc {
                    None => contrib,
                    Some(a) => g.add(a, contrib)?,
                });
            }
            out.push(g.relu(acc.expect("at least one branch"))?);
        }
        if b_in < self.config.branch_channels.len() {
            let t = self.conv_named(
                g,
                bound,
                &format!("stage{s}.transition"),
                branches.maps[b_in - 1],
                2,
                1,
            )?;
            out.push(g.relu(t)?);
        }
        Ok(BranchSet { maps: out })
    }

    /// Consolidate all branches into one full-resolution map: nearest
    /// upsampling to resolution-0 dims, 1x1 projection to `fuse_channels`,
    /// summation, then a single ReLU after the sum.
    pub fn fuse_layer(
        &self,
        g: &mut Graph,
        bound: &BoundParams,
        branches: &BranchSet,
    ) -> Result<Var> {
        let mut acc: Option<Var> = None;
        for (r, &map) in branches.maps.iter().enumerate() {
            let up = if r == 0 {
                map
            } else {
                g.upsample_nearest(map, 1 << r)?
            };
            let proj = self.conv_named(g, bound, &format!("fuse.branch{r}.proj"), up, 1, 0)?;
            acc = Some(match acc {
                None => proj,
                Some(a) => g.add(a, proj)?,
            });
        }
        g.relu(acc.expect("at least one branch"))
    }

    /// Global average pooling, then linear to class logits, then softmax.
    pub fn head(&self, g: &mut Graph, bound: &BoundParams, features: Var) -> Result<Var> {
        let pooled = g.global_avg_pool(features)?;
        let w = bound.var("head.linear.weight")?;
        let b = bound.var("head.linear.bias")?;
        let logits = g.linear(pooled, w, b)?;
        g.softmax(logits)
    }

    /// Full forward pass over a batch shaped [n, 1, in_mels, in_frames].
    pub fn forward(&self, g: &mut Graph, input: Tensor) -> Result<ForwardPass> {
        let bound = self.bind(g);
        let x = g.leaf(input);
        let probs = self.forward_bound(g, &bound, x)?;
        Ok(ForwardPass {
            probs,
            input: x,
            params: bound,
        })
    }

    /// Forward from an already-inserted input var using bound parameters.
    pub fn forward_bound(&self, g: &mut Graph, bound: &BoundParams, x: Var) -> Result<Var> {
        let stem = self.hrim(g, bound, x)?;
        let mut branches = BranchSet { maps: vec![stem] };
        for s in 0..self.config.n_stages {
            for (b, map) in branches.maps.clone().into_iter().enumerate() {
                let mut cur = map;
                for k in 0..self.config.blocks_per_branch {
                    cur = self.residual_block(g, bound, &format!("stage{s}.branch{b}.block{k}"), cur)?;
                }
                branches.maps[b] = cur;
            }
            branches = self.exchange(g, bound, s, &branches)?;
        }
        let fused = self.fuse_layer(g, bound, &branches)?;
        self.head(g, bound, fused)
    }
}
