//! Parameter plumbing and the standard Transformer building blocks.

use mvae_nn::{init, NodeId, ParamId, ParamStore, Real, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};

/// How a fresh parameter is filled.
#[derive(Clone, Copy, Debug)]
pub enum Init {
    /// Glorot uniform for a `[fan_in, fan_out]` matrix.
    Glorot,
    Zeros,
    Ones,
    /// Normal(0, cols^-1/2).
    Embedding,
}

/// Supplies parameters by name, either creating them or finding them in an
/// existing store.
pub trait ParamSource<F: Real> {
    fn get(&mut self, name: &str, shape: &[usize], init: Init) -> Result<ParamId>;
}

/// Creates parameters in call order from one seeded generator.
pub struct Initializer<'a, F> {
    pub store: &'a mut ParamStore<F>,
    pub rng: ChaCha8Rng,
}

impl<F: Real> ParamSource<F> for Initializer<'_, F> {
    fn get(&mut self, name: &str, shape: &[usize], how: Init) -> Result<ParamId> {
        let value = match how {
            Init::Glorot => init::glorot_uniform(&mut self.rng, shape[0], shape[1]),
            Init::Zeros => Tensor::zeros(shape),
            Init::Ones => Tensor::full(shape, F::one()),
            Init::Embedding => init::embedding(&mut self.rng, shape[0], shape[1]),
        };
        Ok(self.store.add(name, value)?)
    }
}

/// Looks parameters up by name and checks their shapes.
pub struct Binder<'a, F> {
    pub store: &'a ParamStore<F>,
}

impl<F: Real> ParamSource<F> for Binder<'_, F> {
    fn get(&mut self, name: &str, shape: &[usize], _: Init) -> Result<ParamId> {
        let id = self
            .store
            .id(name)
            .ok_or_else(|| ModelError::MissingParameter(name.to_string()))?;
        let got = self.store.value(id).shape();
        if got != shape {
            return Err(ModelError::ParameterShape {
                name: name.to_string(),
                expected: shape.to_vec(),
                got: got.to_vec(),
            });
        }
        Ok(id)
    }
}

/// A tape plus the parameter store it reads; each parameter is placed on the
/// tape once.
pub struct Session<'s, F> {
    pub tape: Tape<F>,
    store: &'s ParamStore<F>,
    bound: Vec<Option<NodeId>>,
}

impl<'s, F: Real> Session<'s, F> {
    pub fn new(store: &'s ParamStore<F>) -> Self {
        Self {
            tape: Tape::new(),
            store,
            bound: vec![None; store.len()],
        }
    }

    pub fn p(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.bound[id.index()] {
            return n;
        }
        let n = self.tape.param(self.store, id);
        self.bound[id.index()] = Some(n);
        n
    }

    pub fn value(&self, n: NodeId) -> &Tensor<F> {
        self.tape.value(n)
    }
}

/// Dropout rate plus its generator. A zero rate draws nothing.
pub struct Dropout {
    pub rate: f64,
    pub rng: ChaCha8Rng,
}

impl Dropout {
    pub fn off() -> Self {
        Self {
            rate: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// Generator keyed by `(seed, step, example, stream)` so that each
    /// sub-network draws from its own sequence.
    pub fn keyed(rate: f64, seed: u64, step: u64, example: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        for (i, v) in [seed, step, example, stream].iter().enumerate() {
            key[i * 8..(i + 1) * 8].copy_from_slice(&v.to_le_bytes());
        }
        Self {
            rate,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn apply<F: Real>(&mut self, s: &mut Session<F>, x: NodeId) -> Result<NodeId> {
        Ok(s.tape.dropout(x, F::lit(self.rate), &mut self.rng)?)
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new<F: Real>(src: &mut impl ParamSource<F>, name: &str, d_in: usize, d_out: usize, bias: bool) -> Result<Self> {
        let w = src.get(&format!("{name}.w"), &[d_in, d_out], Init::Glorot)?;
        let b = if bias {
            Some(src.get(&format!("{name}.b"), &[d_out], Init::Zeros)?)
        } else {
            None
        };
        Ok(Self { w, b })
    }

    pub fn forward<F: Real>(&self, s: &mut Session<F>, x: NodeId) -> Result<NodeId> {
        let w = s.p(self.w);
        let y = s.tape.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = s.p(b);
                Ok(s.tape.add(y, b)?)
            }
            None => Ok(y),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-6;

    pub fn new<F: Real>(src: &mut impl ParamSource<F>, name: &str, d: usize) -> Result<Self> {
        Ok(Self {
            gain: src.get(&format!("{name}.gain"), &[d], Init::Ones)?,
            bias: src.get(&format!("{name}.bias"), &[d], Init::Zeros)?,
        })
    }

    pub fn forward<F: Real>(&self, s: &mut Session<F>, x: NodeId) -> Result<NodeId> {
        let (g, b) = (s.p(self.gain), s.p(self.bias));
        Ok(s.tape.layer_norm(x, g, b, F::lit(Self::EPS))?)
    }
}

/// `relu(x W1 + b1) W2 + b2`.
#[derive(Clone, Debug)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn new<F: Real>(src: &mut impl ParamSource<F>, name: &str, d: usize, d_ff: usize) -> Result<Self> {
        Ok(Self {
            inner: Linear::new(src, &format!("{name}.ff1"), d, d_ff, true)?,
            outer: Linear::new(src, &format!("{name}.ff2"), d_ff, d, true)?,
        })
    }

    pub fn forward<F: Real>(&self, s: &mut Session<F>, x: NodeId, drop: &mut Dropout) -> Result<NodeId> {
        let h = self.inner.forward(s, x)?;
        let h = s.tape.relu(h)?;
        let h = drop.apply(s, h)?;
        self.outer.forward(s, h)
    }
}

/// Two-layer perceptron with rectified-linear activations after both layers.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn new<F: Real>(src: &mut impl ParamSource<F>, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        Ok(Self {
            first: Linear::new(src, &format!("{name}.l1"), d_in, d_out, true)?,
            second: Linear::new(src, &format!("{name}.l2"), d_out, d_out, true)?,
        })
    }

    pub fn forward<F: Real>(&self, s: &mut Session<F>, x: NodeId, drop: &mut Dropout) -> Result<NodeId> {
        let h = self.first.forward(s, x)?;
        let h = s.tape.relu(h)?;
        let h = drop.apply(s, h)?;
        let h = self.second.forward(s, h)?;
        Ok(s.tape.relu(h)?)
    }
}

/// Standard multi-head scaled dot-product attention with an output
/// projection.
#[derive(Clone, Debug)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl Attention {
    pub fn new<F: Real>(src: &mut impl ParamSource<F>, name: &str, d: usize, heads: usize) -> Result<Self> {
        Ok(Self {
            q: Linear::new(src, &format!("{name}.q"), d, d, false)?,
            k: Linear::new(src, &format!("{name}.k"), d, d, false)?,
            v: Linear::new(src, &format!("{name}.v"), d, d, false)?,
            o: Linear::new(src, &format!("{name}.o"), d, d, false)?,
            heads,
        })
    }

    /// Queries from `x`, keys and values from `memory`. With `causal`, query
    /// row `i` sees memory rows `0..=i` only.
    pub fn forward<F: Real>(
        &self,
        s: &mut Session<F>,
        x: NodeId,
        memory: NodeId,
        causal: bool,
        drop: &mut Dropout,
    ) -> Result<NodeId> {
        let q = self.q.forward(s, x)?;
        let k = self.k.forward(s, memory)?;
        let v = self.v.forward(s, memory)?;
        let d = s.value(q).cols();
        let dh = d / self.heads;
        let scale = F::lit(1.0 / (dh as f64).sqrt());
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (lo, hi) = (h * dh, (h + 1) * dh);
            let qh = s.tape.slice_cols(q, lo, hi)?;
            let kh = s.tape.slice_cols(k, lo, hi)?;
            let vh = s.tape.slice_cols(v, lo, hi)?;
            let e = s.tape.scaled_dot(qh, kh, scale)?;
            let a = if causal {
                s.tape.causal_softmax_rows(e)?
            } else {
                s.tape.softmax_rows(e)?
            };
            let a = drop.apply(s, a)?;
            outs.push(s.tape.matmul(a, vh)?);
        }
        let cat = if outs.len() == 1 { outs[0] } else { s.tape.concat_cols(&outs)? };
        self.o.forward(s, cat)
    }
}

/// Sinusoidal position table `[len, d]`.
pub fn sinusoid<F: Real>(len: usize, d: usize) -> Tensor<F> {
    let mut data = Vec::with_capacity(len * d);
    for pos in 0..len {
        for i in 0..d {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 / rate;
            data.push(F::lit(if i % 2 == 0 { angle.sin() } else { angle.cos() }));
        }
    }
    Tensor::new(&[len, d], data).expect("length matches shape")
}

/// Embedding lookup scaled by `sqrt(d)`, with optional sinusoidal positions.
pub fn embed<F: Real>(s: &mut Session<F>, table: ParamId, tokens: &[usize], positions: bool) -> Result<NodeId> {
    let t = s.p(table);
    let e = s.tape.embedding(t, tokens)?;
    let d = s.value(e).cols();
    let e = s.tape.scale(e, F::lit((d as f64).sqrt()))?;
    if positions {
        let pe = s.tape.constant(sinusoid(tokens.len(), d))?;
        Ok(s.tape.add(e, pe)?)
    } else {
        Ok(e)
    }
}
