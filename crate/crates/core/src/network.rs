//! Fully connected tanh network evaluated on Taylor jets, with a hand-written
//! reverse sweep over the jet-augmented forward pass.
//!
//! Parameters are stored as one flat vector, layer by layer; within a layer
//! the weight matrix comes first in row-major order (`out x in`), followed by
//! the biases.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jets::{compose_adjoint, tanh_derivatives, TaylorJet};

pub const ACTIVATION: &str = "tanh";

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    widths: Vec<usize>,
    flat: Vec<f64>,
    seed: Option<u64>,
}

/// Intermediate jets of one forward pass, needed by [`NetworkParams::backward`].
#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    /// `acts[0]` are the network inputs, `acts[l]` the outputs of hidden layer `l`.
    acts: Vec<Vec<TaylorJet>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<TaylorJet>>,
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 || widths.iter().any(|&w| w == 0) || *widths.last().unwrap() != 1 {
        return Err(Error::InvalidArgument(format!(
            "network widths must be [input, hidden.., 1] with positive entries, got {widths:?}"
        )));
    }
    Ok(())
}

impl NetworkParams {
    /// Xavier-uniform weights, zero biases.
    pub fn xavier(widths: &[usize], seed: u64) -> Result<Self> {
        check_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = Vec::with_capacity(param_count(widths));
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                flat.push(rng.gen_range(-limit..=limit));
            }
            flat.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(NetworkParams {
            widths: widths.to_vec(),
            flat,
            seed: Some(seed),
        })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        check_widths(widths)?;
        Ok(NetworkParams {
            widths: widths.to_vec(),
            flat: vec![0.0; param_count(widths)],
            seed: None,
        })
    }

    pub fn from_flat(widths: &[usize], flat: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        check_widths(widths)?;
        if flat.len() != param_count(widths) {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters for widths {widths:?}, got {}",
                param_count(widths),
                flat.len()
            )));
        }
        Ok(NetworkParams {
            widths: widths.to_vec(),
            flat,
            seed,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.flat.clone()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.flat.len(),
                flat.len()
            )));
        }
        self.flat.copy_from_slice(flat);
        Ok(())
    }

    /// `(weights, biases)` of layer `l`; weights are row-major `out x in`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let offset = self.layer_offset(l);
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        let w = &self.flat[offset..offset + n_in * n_out];
        let b = &self.flat[offset + n_in * n_out..offset + n_in * n_out + n_out];
        (w, b)
    }

    fn layer_offset(&self, l: usize) -> usize {
        param_count(&self.widths[..=l])
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Plain scalar evaluation.
    pub fn eval(&self, input: &[f64]) -> f64 {
        let mut act = input.to_vec();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let n_in = self.widths[l];
            let mut next: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(j, bj)| bj + (0..n_in).map(|i| w[j * n_in + i] * act[i]).sum::<f64>())
                .collect();
            if l + 1 < self.n_layers() {
                next.iter_mut().for_each(|z| *z = z.tanh());
            }
            act = next;
        }
        act[0]
    }

    fn affine(&self, l: usize, inputs: &[TaylorJet]) -> Vec<TaylorJet> {
        let (w, b) = self.layer(l);
        let n_in = self.widths[l];
        b.iter()
            .enumerate()
            .map(|(j, &bj)| {
                let mut z = inputs[0].constant_like(bj);
                let zc = z.coeffs_mut();
                for (i, a) in inputs.iter().enumerate() {
                    let wji = w[j * n_in + i];
                    for (zk, ak) in zc.iter_mut().zip(a.coeffs()) {
                        *zk += wji * ak;
                    }
                }
                z
            })
            .collect()
    }

    /// Jet of the network output given jets of its inputs.
    pub fn forward(
        &self,
        inputs: &[TaylorJet],
        mut cache: Option<&mut ForwardCache>,
    ) -> Result<TaylorJet> {
        if inputs.len() != self.input_dim() {
            return Err(Error::DimMismatch(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                inputs.len()
            )));
        }
        if let Some(c) = cache.as_deref_mut() {
            c.acts.clear();
            c.pre.clear();
            c.acts.push(inputs.to_vec());
        }
        let mut act = inputs.to_vec();
        for l in 0..self.n_layers() {
            let z = self.affine(l, &act);
            if l + 1 == self.n_layers() {
                return Ok(z[0]);
            }
            act = z.iter().map(TaylorJet::tanh).collect();
            if let Some(c) = cache.as_deref_mut() {
                c.pre.push(z);
                c.acts.push(act.clone());
            }
        }
        unreachable!("networks have at least one layer")
    }

    /// Accumulates `d <outbar, out> / d theta` into `grad`, using the jets
    /// recorded by the matching [`forward`](Self::forward) call.
    pub fn backward(&self, cache: &ForwardCache, outbar: &TaylorJet, grad: &mut [f64]) {
        let n_layers = self.n_layers();
        let mut zbar = vec![*outbar];
        for l in (0..n_layers).rev() {
            let offset = self.layer_offset(l);
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let inputs = &cache.acts[l];
            for j in 0..n_out {
                let zb = &zbar[j];
                let row = offset + j * n_in;
                for (i, a) in inputs.iter().enumerate() {
                    grad[row + i] += zb.coeff_dot(a);
                }
                grad[offset + n_in * n_out + j] += zb.coeffs()[0];
            }
            if l == 0 {
                break;
            }
            let (w, _) = self.layer(l);
            let pre = &cache.pre[l - 1];
            zbar = (0..n_in)
                .map(|i| {
                    let mut abar = inputs[i].zero_like();
                    {
                        let ac = abar.coeffs_mut();
                        for (j, zb) in zbar.iter().enumerate() {
                            let wji = w[j * n_in + i];
                            for (ak, zk) in ac.iter_mut().zip(zb.coeffs()) {
                                *ak += wji * zk;
                            }
                        }
                    }
                    compose_adjoint(&pre[i], &tanh_derivatives(pre[i].value()), &abar)
                })
                .collect();
        }
    }

    /// Writes the structured-text header followed by the little-endian f64 vector.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        write_header(&mut w, &self.widths, self.seed, &[])?;
        write_f64s(&mut w, &self.flat)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let header = read_header(&mut r)?;
        let flat = read_f64s(&mut r, header.count)?;
        NetworkParams::from_flat(&header.widths, flat, header.seed)
    }
}

/// Parsed text header of a parameter or checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamHeader {
    pub widths: Vec<usize>,
    pub seed: Option<u64>,
    pub count: usize,
    pub extra: Vec<(String, String)>,
}

pub(crate) const MAGIC: &str = "resmin-params v1";
const END_MARKER: &str = "---";

/// File layout:
///
/// ```text
/// resmin-params v1
/// widths = 2,16,16,1
/// activation = tanh
/// seed = 7            (or "none")
/// count = 337
/// <extra key = value lines>
/// ---
/// <count little-endian IEEE-754 f64 values, then any further blocks>
/// ```
pub(crate) fn write_header<W: Write>(
    w: &mut W,
    widths: &[usize],
    seed: Option<u64>,
    extra: &[(String, String)],
) -> Result<()> {
    let widths_str: Vec<String> = widths.iter().map(usize::to_string).collect();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "widths = {}", widths_str.join(","))?;
    writeln!(w, "activation = {ACTIVATION}")?;
    match seed {
        Some(s) => writeln!(w, "seed = {s}")?,
        None => writeln!(w, "seed = none")?,
    }
    writeln!(w, "count = {}", param_count(widths))?;
    for (k, v) in extra {
        writeln!(w, "{k} = {v}")?;
    }
    writeln!(w, "{END_MARKER}")?;
    Ok(())
}

fn read_line<R: Read>(r: &mut R) -> Result<String> {
    let mut bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format("unexpected end of header".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        bytes.push(byte[0]);
    }
    String::from_utf8(bytes).map_err(|_| Error::Format("header is not UTF-8".into()))
}

pub(crate) fn read_header<R: Read>(r: &mut R) -> Result<ParamHeader> {
    if read_line(r)?.trim() != MAGIC {
        return Err(Error::Format("missing magic line".into()));
    }
    let mut widths = None;
    let mut seed = None;
    let mut count = None;
    let mut extra = Vec::new();
    loop {
        let line = read_line(r)?;
        let line = line.trim();
        if line == END_MARKER {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
        match k {
            "widths" => {
                let parsed: std::result::Result<Vec<usize>, _> =
                    v.split(',').map(|s| s.trim().parse()).collect();
                widths = Some(parsed.map_err(|_| Error::Format(format!("bad widths {v:?}")))?);
            }
            "activation" if v != ACTIVATION => {
                return Err(Error::Format(format!("unsupported activation {v:?}")))
            }
            "activation" => {}
            "seed" => {
                seed = if v == "none" {
                    None
                } else {
                    Some(
                        v.parse()
                            .map_err(|_| Error::Format(format!("bad seed {v:?}")))?,
                    )
                }
            }
            "count" => {
                count = Some(
                    v.parse()
                        .map_err(|_| Error::Format(format!("bad count {v:?}")))?,
                )
            }
            _ => extra.push((k.to_string(), v.to_string())),
        }
    }
    let widths = widths.ok_or_else(|| Error::Format("header lacks widths".into()))?;
    let count = count.ok_or_else(|| Error::Format("header lacks count".into()))?;
    if count != param_count(&widths) {
        return Err(Error::Format(format!(
            "count {count} inconsistent with widths {widths:?}"
        )));
    }
    Ok(ParamHeader {
        widths,
        seed,
        count,
        extra,
    })
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("expected {n} f64 values")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
