//! Static computation graphs with reverse-mode differentiation.
//!
//! A [`GraphBuilder`] assembles nodes in topological order (an operation can
//! only consume already-built nodes, so node ids double as a schedule), then
//! [`GraphBuilder::build`] seeds the parameters and freezes the result into a
//! [`Graph`]. Forward and backward passes borrow the graph immutably;
//! parameter updates take `&mut` through the optimizer.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::CheckpointEntry;
use crate::element::Element;
use crate::error::GraphError;
use crate::ops;
use crate::tensor::Tensor;

/// Identifier of a node within its graph: the index in creation order.
pub type NodeId = usize;

/// Per-sample layout of a node's value (the batch dimension is implicit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeShape {
    /// Channel-major image stack, row-major within each channel.
    Spatial {
        /// Number of channels.
        channels: usize,
        /// Rows per channel.
        height: usize,
        /// Columns per row.
        width: usize,
    },
    /// Flat feature vector.
    Flat {
        /// Number of features.
        len: usize,
    },
}

impl NodeShape {
    /// Scalar count per batch sample.
    pub fn len(&self) -> usize {
        match *self {
            NodeShape::Spatial {
                channels,
                height,
                width,
            } => channels * height * width,
            NodeShape::Flat { len } => len,
        }
    }

    /// Always false: valid shapes hold at least one element.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Tensor dims for a batch of values with this per-sample layout.
    fn batched_dims(&self, batch: usize) -> Vec<usize> {
        match *self {
            NodeShape::Spatial {
                channels,
                height,
                width,
            } => vec![batch, channels, height, width],
            NodeShape::Flat { len } => vec![batch, len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    /// External tensor fed to `forward`; `slot` indexes the input list.
    Input { slot: usize },
    /// Trainable tensor owned by the graph; `slot` indexes the param list.
    Param { slot: usize },
    /// 3×3 same-padding convolution; inputs `[x, weight, bias]`.
    Conv3x3,
    /// Elementwise `max(x, 0)`; inputs `[x]`.
    Relu,
    /// Fully connected layer; inputs `[x, weight, bias]`.
    Dense,
    /// Feature concatenation of flat nodes; inputs are the parts in order.
    Concat,
    /// Per-channel spatial maximum; inputs `[x]`.
    GlobalMaxPool,
    /// Elementwise sum; inputs `[a, b]`.
    Add,
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    shape: NodeShape,
    inputs: Vec<NodeId>,
}

#[derive(Debug, Clone)]
struct ParamSpec {
    name: String,
    dims: Vec<usize>,
    /// Fan-in for He-uniform initialization; 0 selects zero initialization.
    fan_in: usize,
    node: NodeId,
}

/// Incremental graph constructor. See the [module docs](self).
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    params: Vec<ParamSpec>,
    inputs: Vec<NodeId>,
}

impl GraphBuilder {
    /// Creates an empty builder.
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, shape: NodeShape, inputs: Vec<NodeId>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { op, shape, inputs });
        id
    }

    fn check_node(&self, id: NodeId, context: &str) -> Result<&Node, GraphError> {
        self.nodes.get(id).ok_or_else(|| GraphError::UnknownNode {
            context: context.to_string(),
            node: id,
            len: self.nodes.len(),
        })
    }

    fn spatial_dims(
        &self,
        id: NodeId,
        context: &str,
    ) -> Result<(usize, usize, usize), GraphError> {
        let node = self.check_node(id, context)?;
        match node.shape {
            NodeShape::Spatial {
                channels,
                height,
                width,
            } => Ok((channels, height, width)),
            NodeShape::Flat { .. } => Err(GraphError::WrongLayout {
                context: context.to_string(),
                node: id,
                expected: "spatial",
                got: "flat",
            }),
        }
    }

    fn flat_len(&self, id: NodeId, context: &str) -> Result<usize, GraphError> {
        let node = self.check_node(id, context)?;
        match node.shape {
            NodeShape::Flat { len } => Ok(len),
            NodeShape::Spatial { .. } => Err(GraphError::WrongLayout {
                context: context.to_string(),
                node: id,
                expected: "flat",
                got: "spatial",
            }),
        }
    }

    fn add_param(
        &mut self,
        name: String,
        dims: Vec<usize>,
        fan_in: usize,
    ) -> Result<NodeId, GraphError> {
        if self.params.iter().any(|p| p.name == name) {
            return Err(GraphError::DuplicateParam(name));
        }
        let len: usize = dims.iter().product();
        let slot = self.params.len();
        let node = self.push(Op::Param { slot }, NodeShape::Flat { len }, Vec::new());
        self.params.push(ParamSpec {
            name,
            dims,
            fan_in,
            node,
        });
        Ok(node)
    }

    /// Declares an image-stack input of shape `[channels, height, width]`.
    ///
    /// # Panics
    ///
    /// Panics if any dimension is zero.
    pub fn input_spatial(&mut self, channels: usize, height: usize, width: usize) -> NodeId {
        assert!(
            channels > 0 && height > 0 && width > 0,
            "input dimensions must be positive"
        );
        let slot = self.inputs.len();
        let id = self.push(
            Op::Input { slot },
            NodeShape::Spatial {
                channels,
                height,
                width,
            },
            Vec::new(),
        );
        self.inputs.push(id);
        id
    }

    /// Declares a flat feature-vector input of the given width.
    ///
    /// # Panics
    ///
    /// Panics if `len` is zero.
    pub fn input_flat(&mut self, len: usize) -> NodeId {
        assert!(len > 0, "input width must be positive");
        let slot = self.inputs.len();
        let id = self.push(Op::Input { slot }, NodeShape::Flat { len }, Vec::new());
        self.inputs.push(id);
        id
    }

    /// Adds a 3×3 same-padding convolution over a spatial node.
    ///
    /// Registers parameters `{name}.weight` (`[out_channels, in_channels, 3,
    /// 3]`, He-uniform) and `{name}.bias` (`[out_channels]`, zeros).
    ///
    /// # Errors
    ///
    /// Fails if `x` is unknown or flat, or if `name` collides with an
    /// existing parameter.
    pub fn conv3x3(
        &mut self,
        x: NodeId,
        out_channels: usize,
        name: &str,
    ) -> Result<NodeId, GraphError> {
        assert!(out_channels > 0, "conv3x3 needs at least one output channel");
        let (cin, height, width) = self.spatial_dims(x, "conv3x3")?;
        let weight = self.add_param(
            format!("{name}.weight"),
            vec![out_channels, cin, 3, 3],
            cin * 9,
        )?;
        let bias = self.add_param(format!("{name}.bias"), vec![out_channels], 0)?;
        Ok(self.push(
            Op::Conv3x3,
            NodeShape::Spatial {
                channels: out_channels,
                height,
                width,
            },
            vec![x, weight, bias],
        ))
    }

    /// Adds a fully connected layer over a flat node.
    ///
    /// Registers parameters `{name}.weight` (`[out_features, in_features]`,
    /// He-uniform) and `{name}.bias` (`[out_features]`, zeros).
    ///
    /// # Errors
    ///
    /// Fails if `x` is unknown or spatial, or on a parameter-name collision.
    pub fn dense(
        &mut self,
        x: NodeId,
        out_features: usize,
        name: &str,
    ) -> Result<NodeId, GraphError> {
        assert!(out_features > 0, "dense needs at least one output feature");
        let in_features = self.flat_len(x, "dense")?;
        let weight = self.add_param(
            format!("{name}.weight"),
            vec![out_features, in_features],
            in_features,
        )?;
        let bias = self.add_param(format!("{name}.bias"), vec![out_features], 0)?;
        Ok(self.push(
            Op::Dense,
            NodeShape::Flat { len: out_features },
            vec![x, weight, bias],
        ))
    }

    /// Adds an elementwise ReLU with the same shape as its input.
    ///
    /// # Errors
    ///
    /// Fails if `x` is unknown.
    pub fn relu(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        let shape = self.check_node(x, "relu")?.shape;
        Ok(self.push(Op::Relu, shape, vec![x]))
    }

    /// Adds an elementwise sum of two nodes of identical shape.
    ///
    /// # Errors
    ///
    /// Fails if either operand is unknown or the shapes differ.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GraphError> {
        let sa = self.check_node(a, "add")?.shape;
        let sb = self.check_node(b, "add")?.shape;
        if sa != sb {
            return Err(GraphError::ShapeMismatch {
                context: "add".to_string(),
                expected: format!("{sa:?}"),
                got: format!("{sb:?}"),
            });
        }
        Ok(self.push(Op::Add, sa, vec![a, b]))
    }

    /// Concatenates flat nodes into one feature vector, in argument order.
    ///
    /// # Errors
    ///
    /// Fails if `parts` is empty or any part is unknown or spatial.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, GraphError> {
        if parts.is_empty() {
            return Err(GraphError::EmptyConcat);
        }
        let mut total = 0;
        for &p in parts {
            total += self.flat_len(p, "concat")?;
        }
        Ok(self.push(Op::Concat, NodeShape::Flat { len: total }, parts.to_vec()))
    }

    /// Reduces a spatial node to one maximum per channel (a flat vector).
    ///
    /// # Errors
    ///
    /// Fails if `x` is unknown or flat.
    pub fn global_max_pool(&mut self, x: NodeId) -> Result<NodeId, GraphError> {
        let (channels, _, _) = self.spatial_dims(x, "global_max_pool")?;
        Ok(self.push(
            Op::GlobalMaxPool,
            NodeShape::Flat { len: channels },
            vec![x],
        ))
    }

    /// Freezes the structure and initializes parameters from `seed`.
    ///
    /// Initialization draws He-uniform weights (`±sqrt(6 / fan_in)`) and
    /// zero biases from a counter-based generator, in parameter-registration
    /// order, so a given builder sequence and seed always produce the same
    /// model regardless of platform or thread count.
    pub fn build<F: Element>(self, seed: u64) -> Graph<F> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::with_capacity(self.params.len());
        for spec in &self.params {
            let len: usize = spec.dims.iter().product();
            let data = if spec.fan_in == 0 {
                vec![F::ZERO; len]
            } else {
                let limit = (6.0 / spec.fan_in as f64).sqrt();
                (0..len)
                    .map(|_| F::from_f64(rng.random_range(-limit..limit)))
                    .collect()
            };
            tensors.push(
                Tensor::new(&spec.dims, data).expect("parameter shapes are internally derived"),
            );
        }
        Graph {
            nodes: self.nodes,
            inputs: self.inputs,
            specs: self.params,
            tensors,
        }
    }
}

/// A frozen computation graph plus its parameter tensors.
///
/// Structure is immutable after [`GraphBuilder::build`]; only parameter
/// *values* change (via [`AdamState::apply`](crate::AdamState::apply),
/// [`Graph::set_param`], or checkpoint loading). All execution state lives in
/// [`Activations`], so one graph can serve concurrent forward passes.
#[derive(Debug, Clone)]
pub struct Graph<F: Element> {
    nodes: Vec<Node>,
    inputs: Vec<NodeId>,
    specs: Vec<ParamSpec>,
    tensors: Vec<Tensor<F>>,
}

/// Buffered node values from one [`Graph::forward`] call.
#[derive(Debug)]
pub struct Activations<F: Element> {
    /// Value buffer per node; parameter nodes stay empty (their values live
    /// in the graph itself).
    values: Vec<Vec<F>>,
    batch: usize,
}

impl<F: Element> Activations<F> {
    /// Batch size of the forward pass that produced these activations.
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Value buffer of a node: `batch * shape.len()` scalars, sample-major.
    ///
    /// Parameter nodes report an empty slice.
    ///
    /// # Panics
    ///
    /// Panics if `id` does not belong to the graph that produced this value.
    pub fn value(&self, id: NodeId) -> &[F] {
        &self.values[id]
    }
}

/// Parameter (and optionally input) gradients from one backward pass.
#[derive(Debug)]
pub struct Gradients<F: Element> {
    param_grads: Vec<Tensor<F>>,
    input_grads: Vec<Option<Tensor<F>>>,
}

impl<F: Element> Gradients<F> {
    /// Gradient per parameter tensor, in registration (slot) order — aligned
    /// with [`Graph::param_tensors`].
    pub fn param_grads(&self) -> &[Tensor<F>] {
        &self.param_grads
    }

    /// Gradient of input `slot`, if input gradients were requested and the
    /// input influences a seeded node.
    pub fn input_grad(&self, slot: usize) -> Option<&Tensor<F>> {
        self.input_grads.get(slot).and_then(|g| g.as_ref())
    }
}

impl<F: Element> Graph<F> {
    /// Number of nodes (inputs, parameters, and operations).
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of declared input slots.
    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    /// Per-sample layout of a node.
    ///
    /// # Panics
    ///
    /// Panics if `id` is out of range.
    pub fn node_shape(&self, id: NodeId) -> NodeShape {
        self.nodes[id].shape
    }

    /// Total trainable scalar count across all parameter tensors.
    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Parameter names in registration (slot) order.
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.name.as_str())
    }

    /// Looks up a parameter tensor by name.
    pub fn param(&self, name: &str) -> Option<&Tensor<F>> {
        let slot = self.specs.iter().position(|s| s.name == name)?;
        Some(&self.tensors[slot])
    }

    /// Replaces a parameter's value.
    ///
    /// # Errors
    ///
    /// Fails when the name is unknown or the shape differs from the
    /// registered one.
    pub fn set_param(&mut self, name: &str, value: Tensor<F>) -> Result<(), GraphError> {
        let slot = self
            .specs
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| GraphError::UnknownParam(name.to_string()))?;
        if value.dims() != self.specs[slot].dims.as_slice() {
            return Err(GraphError::ShapeMismatch {
                context: format!("set_param `{name}`"),
                expected: format!("{:?}", self.specs[slot].dims),
                got: format!("{:?}", value.dims()),
            });
        }
        self.tensors[slot] = value;
        Ok(())
    }

    /// Parameter tensors in slot order (aligned with
    /// [`Gradients::param_grads`]).
    pub fn param_tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    pub(crate) fn param_tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    fn param_slot_of_node(&self, id: NodeId) -> usize {
        match self.nodes[id].op {
            Op::Param { slot } => slot,
            _ => unreachable!("node {id} is not a parameter"),
        }
    }

    fn spatial_of(&self, id: NodeId) -> (usize, usize, usize) {
        match self.nodes[id].shape {
            NodeShape::Spatial {
                channels,
                height,
                width,
            } => (channels, height, width),
            NodeShape::Flat { .. } => unreachable!("builder enforced a spatial node here"),
        }
    }

    /// Gradient buffer length for a node: parameters are batch-free, all
    /// other nodes carry one value set per sample.
    fn grad_len(&self, id: NodeId, batch: usize) -> usize {
        match self.nodes[id].op {
            Op::Param { slot } => self.tensors[slot].len(),
            _ => batch * self.nodes[id].shape.len(),
        }
    }

    /// Runs the graph on a batch of inputs.
    ///
    /// Each tensor's outermost dimension is the batch; the remaining
    /// dimensions must match the declared input shape exactly, and all
    /// inputs must agree on the batch size.
    ///
    /// # Errors
    ///
    /// Fails on an input-count or input-shape mismatch.
    pub fn forward(&self, inputs: &[&Tensor<F>]) -> Result<Activations<F>, GraphError> {
        if inputs.len() != self.inputs.len() {
            return Err(GraphError::InputArity {
                declared: self.inputs.len(),
                given: inputs.len(),
            });
        }
        if inputs.is_empty() {
            return Err(GraphError::BadTensor(
                "graph declares no inputs; nothing to run".to_string(),
            ));
        }
        let batch = inputs[0].dims()[0];
        for (slot, (&tensor, &node)) in inputs.iter().zip(self.inputs.iter()).enumerate() {
            let want = self.nodes[node].shape.batched_dims(batch);
            if tensor.dims() != want.as_slice() {
                return Err(GraphError::ShapeMismatch {
                    context: format!("input slot {slot}"),
                    expected: format!("{want:?}"),
                    got: format!("{:?}", tensor.dims()),
                });
            }
        }

        let mut values: Vec<Vec<F>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let out = match node.op {
                Op::Input { slot } => inputs[slot].data().to_vec(),
                Op::Param { .. } => Vec::new(),
                Op::Conv3x3 => {
                    let x = node.inputs[0];
                    let (cin, h, w) = self.spatial_of(x);
                    let (cout, _, _) = match node.shape {
                        NodeShape::Spatial {
                            channels,
                            height,
                            width,
                        } => (channels, height, width),
                        NodeShape::Flat { .. } => unreachable!("conv output is spatial"),
                    };
                    let weight = &self.tensors[self.param_slot_of_node(node.inputs[1])];
                    let bias = &self.tensors[self.param_slot_of_node(node.inputs[2])];
                    let mut out = vec![F::ZERO; batch * cout * h * w];
                    ops::conv3x3_forward(
                        &values[x],
                        weight.data(),
                        bias.data(),
                        batch,
                        cin,
                        cout,
                        h,
                        w,
                        &mut out,
                    );
                    out
                }
                Op::Dense => {
                    let x = node.inputs[0];
                    let nin = self.nodes[x].shape.len();
                    let nout = node.shape.len();
                    let weight = &self.tensors[self.param_slot_of_node(node.inputs[1])];
                    let bias = &self.tensors[self.param_slot_of_node(node.inputs[2])];
                    let mut out = vec![F::ZERO; batch * nout];
                    ops::dense_forward(
                        &values[x],
                        weight.data(),
                        bias.data(),
                        batch,
                        nin,
                        nout,
                        &mut out,
                    );
                    out
                }
                Op::Relu => {
                    let x = node.inputs[0];
                    let mut out = vec![F::ZERO; values[x].len()];
                    ops::relu_forward(&values[x], &mut out);
                    out
                }
                Op::Add => {
                    let (a, b) = (node.inputs[0], node.inputs[1]);
                    let mut out = vec![F::ZERO; values[a].len()];
                    ops::add_forward(&values[a], &values[b], &mut out);
                    out
                }
                Op::GlobalMaxPool => {
                    let x = node.inputs[0];
                    let (channels, h, w) = self.spatial_of(x);
                    let mut out = vec![F::ZERO; batch * channels];
                    ops::global_max_pool_forward(&values[x], batch * channels, h * w, &mut out);
                    out
                }
                Op::Concat => {
                    let total = node.shape.len();
                    let mut out = vec![F::ZERO; batch * total];
                    let mut offset = 0;
                    for &part in &node.inputs {
                        let part_len = self.nodes[part].shape.len();
                        let src = &values[part];
                        for n in 0..batch {
                            out[n * total + offset..n * total + offset + part_len]
                                .copy_from_slice(&src[n * part_len..(n + 1) * part_len]);
                        }
                        offset += part_len;
                    }
                    out
                }
            };
            values.push(out);
        }
        Ok(Activations { values, batch })
    }

    /// Marks which nodes need a gradient buffer: parameters always, inputs
    /// when requested, and any node with such a node upstream.
    fn grad_targets(&self, want_input_grads: bool) -> Vec<bool> {
        let mut needs = vec![false; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            needs[id] = match node.op {
                Op::Param { .. } => true,
                Op::Input { .. } => want_input_grads,
                _ => node.inputs.iter().any(|&i| needs[i]),
            };
        }
        needs
    }

    /// Reverse-mode differentiation from explicit seed gradients.
    ///
    /// `seeds` pairs node ids with `∂L/∂value` buffers (`batch * len`
    /// scalars, sample-major); several seeds — including several on one node
    /// — combine additively, which is exactly a multi-head loss. Consumes
    /// the activations so value buffers can be released as the sweep passes
    /// them; that roughly halves peak memory for deep convolutional stacks.
    ///
    /// Set `want_input_grads` to also differentiate with respect to the
    /// graph inputs (training on fixed data does not need it, and skipping
    /// it halves the first convolution's backward cost).
    ///
    /// # Errors
    ///
    /// Fails when a seed references an out-of-range or parameter node, or
    /// has the wrong buffer length.
    pub fn backward(
        &self,
        acts: Activations<F>,
        seeds: &[(NodeId, &[F])],
        want_input_grads: bool,
    ) -> Result<Gradients<F>, GraphError> {
        let batch = acts.batch;
        let mut values = acts.values;
        let mut grads: Vec<Option<Vec<F>>> = vec![None; self.nodes.len()];

        for &(id, seed) in seeds {
            let node = self.nodes.get(id).ok_or(GraphError::UnknownNode {
                context: "backward seed".to_string(),
                node: id,
                len: self.nodes.len(),
            })?;
            if matches!(node.op, Op::Param { .. }) {
                return Err(GraphError::WrongLayout {
                    context: "backward seed".to_string(),
                    node: id,
                    expected: "operation or input",
                    got: "parameter",
                });
            }
            let want = batch * node.shape.len();
            if seed.len() != want {
                return Err(GraphError::ShapeMismatch {
                    context: format!("backward seed for node {id}"),
                    expected: format!("{want} scalars"),
                    got: format!("{} scalars", seed.len()),
                });
            }
            let buf = grads[id].get_or_insert_with(|| vec![F::ZERO; want]);
            ops::accumulate(buf, seed);
        }

        let needs = self.grad_targets(want_input_grads);

        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            let dy = match grads[id].take() {
                Some(dy) if needs[id] => dy,
                _ => {
                    // Nothing upstream wants this gradient; drop it and the
                    // value buffer (all consumers are already processed).
                    values[id] = Vec::new();
                    continue;
                }
            };
            match node.op {
                // Terminals: the buffer *is* the result, so put it back.
                Op::Input { .. } | Op::Param { .. } => {
                    grads[id] = Some(dy);
                    values[id] = Vec::new();
                    continue;
                }
                Op::Conv3x3 => {
                    let x = node.inputs[0];
                    let (cin, h, w) = self.spatial_of(x);
                    let (cout, _, _) = self.spatial_of(id);
                    let weight = self.tensors[self.param_slot_of_node(node.inputs[1])].data();
                    self.ensure_grad_bufs(&mut grads, &needs, node.inputs.as_slice(), batch);
                    let (gx, gw, gb) =
                        three_mut(&mut grads, node.inputs[0], node.inputs[1], node.inputs[2]);
                    ops::conv3x3_backward(
                        &values[x],
                        weight,
                        &dy,
                        batch,
                        cin,
                        cout,
                        h,
                        w,
                        gx.as_mut().map(|v| v.as_mut_slice()),
                        gw.as_mut().expect("conv weight always needs a gradient"),
                        gb.as_mut().expect("conv bias always needs a gradient"),
                    );
                }
                Op::Dense => {
                    let x = node.inputs[0];
                    let nin = self.nodes[x].shape.len();
                    let nout = node.shape.len();
                    let weight = self.tensors[self.param_slot_of_node(node.inputs[1])].data();
                    self.ensure_grad_bufs(&mut grads, &needs, node.inputs.as_slice(), batch);
                    let (gx, gw, gb) =
                        three_mut(&mut grads, node.inputs[0], node.inputs[1], node.inputs[2]);
                    ops::dense_backward(
                        &values[x],
                        weight,
                        &dy,
                        batch,
                        nin,
                        nout,
                        gx.as_mut().map(|v| v.as_mut_slice()),
                        gw.as_mut().expect("dense weight always needs a gradient"),
                        gb.as_mut().expect("dense bias always needs a gradient"),
                    );
                }
                Op::Relu => {
                    let x = node.inputs[0];
                    let len = self.grad_len(x, batch);
                    let buf = grads[x].get_or_insert_with(|| vec![F::ZERO; len]);
                    // ReLU gates on its own output, so `values[id]` (still
                    // alive) suffices and `values[x]` may already be freed.
                    ops::relu_backward(&values[id], &dy, buf);
                }
                Op::Add => {
                    for &operand in &node.inputs {
                        if needs[operand] {
                            let len = self.grad_len(operand, batch);
                            let buf = grads[operand].get_or_insert_with(|| vec![F::ZERO; len]);
                            ops::accumulate(buf, &dy);
                        }
                    }
                }
                Op::GlobalMaxPool => {
                    let x = node.inputs[0];
                    let (channels, h, w) = self.spatial_of(x);
                    let len = self.grad_len(x, batch);
                    let buf = grads[x].get_or_insert_with(|| vec![F::ZERO; len]);
                    ops::global_max_pool_backward(&values[x], &dy, batch * channels, h * w, buf);
                }
                Op::Concat => {
                    let total = node.shape.len();
                    let mut offset = 0;
                    for &part in &node.inputs {
                        let part_len = self.nodes[part].shape.len();
                        if needs[part] {
                            let len = self.grad_len(part, batch);
                            let buf = grads[part].get_or_insert_with(|| vec![F::ZERO; len]);
                            for n in 0..batch {
                                let dst = &mut buf[n * part_len..(n + 1) * part_len];
                                let src = &dy[n * total + offset..n * total + offset + part_len];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d = F::from_f64(d.to_f64() + s.to_f64());
                                }
                            }
                        }
                        offset += part_len;
                    }
                }
            }
            values[id] = Vec::new();
        }

        let param_grads = self
            .specs
            .iter()
            .map(|spec| {
                let buf = grads[spec.node]
                    .take()
                    .unwrap_or_else(|| vec![F::ZERO; spec.dims.iter().product()]);
                Tensor::new(&spec.dims, buf).expect("parameter shapes are internally derived")
            })
            .collect();
        let input_grads = self
            .inputs
            .iter()
            .map(|&node| {
                grads[node].take().map(|buf| {
                    let dims = self.nodes[node].shape.batched_dims(batch);
                    Tensor::new(&dims, buf).expect("input shapes are internally derived")
                })
            })
            .collect();
        Ok(Gradients {
            param_grads,
            input_grads,
        })
    }

    /// Zero-fills gradient buffers for every listed node that wants one.
    fn ensure_grad_bufs(
        &self,
        grads: &mut [Option<Vec<F>>],
        needs: &[bool],
        ids: &[NodeId],
        batch: usize,
    ) {
        for &id in ids {
            if needs[id] && grads[id].is_none() {
                grads[id] = Some(vec![F::ZERO; self.grad_len(id, batch)]);
            }
        }
    }

    /// Snapshots all parameters as named `f32` checkpoint entries, in slot
    /// order.
    pub fn to_checkpoint_entries(&self) -> Vec<CheckpointEntry> {
        self.specs
            .iter()
            .zip(self.tensors.iter())
            .map(|(spec, tensor)| CheckpointEntry {
                name: spec.name.clone(),
                dims: spec.dims.clone(),
                data: tensor.data().iter().map(|v| v.to_f32()).collect(),
            })
            .collect()
    }

    /// Restores all parameters from checkpoint entries.
    ///
    /// Every graph parameter must appear exactly once with a matching shape,
    /// and no extra entries are allowed — a checkpoint from a different
    /// architecture is rejected rather than partially applied.
    ///
    /// # Errors
    ///
    /// Fails on unknown, missing, duplicated, or misshapen entries; the
    /// graph is left untouched on error.
    pub fn load_checkpoint_entries(
        &mut self,
        entries: &[CheckpointEntry],
    ) -> Result<(), GraphError> {
        let mut staged: Vec<Option<Vec<F>>> = vec![None; self.specs.len()];
        for entry in entries {
            let slot = self
                .specs
                .iter()
                .position(|s| s.name == entry.name)
                .ok_or_else(|| GraphError::UnknownParam(entry.name.clone()))?;
            if entry.dims != self.specs[slot].dims {
                return Err(GraphError::ShapeMismatch {
                    context: format!("checkpoint entry `{}`", entry.name),
                    expected: format!("{:?}", self.specs[slot].dims),
                    got: format!("{:?}", entry.dims),
                });
            }
            if staged[slot].is_some() {
                return Err(GraphError::DuplicateParam(entry.name.clone()));
            }
            staged[slot] = Some(entry.data.iter().map(|&v| F::from_f32(v)).collect());
        }
        if let Some(missing) = staged.iter().position(Option::is_none) {
            return Err(GraphError::UnknownParam(format!(
                "{} (missing from checkpoint)",
                self.specs[missing].name
            )));
        }
        for (slot, data) in staged.into_iter().enumerate() {
            let data = data.expect("every slot was checked above");
            self.tensors[slot] =
                Tensor::new(&self.specs[slot].dims, data).expect("dims validated above");
        }
        Ok(())
    }
}

/// Distinct-index triple borrow out of the per-node gradient table.
fn three_mut<T>(
    slice: &mut [Option<T>],
    a: usize,
    b: usize,
    c: usize,
) -> (&mut Option<T>, &mut Option<T>, &mut Option<T>) {
    assert!(a != b && b != c && a != c, "operand nodes must be distinct");
    let mut order = [(a, 0usize), (b, 1), (c, 2)];
    order.sort_unstable_by_key(|&(idx, _)| idx);
    let [(i0, p0), (i1, p1), (i2, p2)] = order;
    let (lo, rest) = slice.split_at_mut(i1);
    let (mid, hi) = rest.split_at_mut(i2 - i1);
    let mut picked: [Option<&mut Option<T>>; 3] = [None, None, None];
    picked[p0] = Some(&mut lo[i0]);
    picked[p1] = Some(&mut mid[0]);
    picked[p2] = Some(&mut hi[0]);
    let [ra, rb, rc] = picked;
    (
        ra.expect("permutation covers all three"),
        rb.expect("permutation covers all three"),
        rc.expect("permutation covers all three"),
    )
}
