//! Thin layers over candle tensor ops. Weights live in a [`ParamStore`].

use candle_core::{DType, Tensor, D};
use rand::Rng;

use crate::error::Result;
use crate::params::ParamStore;

/// He-normal standard deviation for a layer with `fan_in` inputs.
pub fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct Conv {
    pub w: Tensor,
    pub b: Tensor,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        gain: f64,
    ) -> Result<Self> {
        let std = gain * he_std(cin * k * k);
        Ok(Conv {
            w: store.normal(&format!("{name}.weight"), &[cout, cin, k, k], 0.0, std)?,
            b: store.constant(&format!("{name}.bias"), &[cout], 0.0)?,
            stride,
            pad,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.w, self.pad, self.stride, 1, 1)?;
        let c = self.b.dim(0)?;
        Ok(y.broadcast_add(&self.b.reshape((1, c, 1, 1))?)?)
    }
}

/// Transposed convolution, kernel laid out `(cin, cout, k, k)`.
#[derive(Debug, Clone)]
pub struct ConvT {
    pub w: Tensor,
    pub b: Tensor,
    pub stride: usize,
    pub pad: usize,
}

impl ConvT {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        gain: f64,
    ) -> Result<Self> {
        // Each output pixel sees about cin * (k / stride)^2 inputs.
        let fan_in = cin * (k / stride).max(1).pow(2);
        let std = gain * he_std(fan_in);
        Ok(ConvT {
            w: store.normal(&format!("{name}.weight"), &[cin, cout, k, k], 0.0, std)?,
            b: store.constant(&format!("{name}.bias"), &[cout], 0.0)?,
            stride,
            pad,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv_transpose2d(&self.w, self.pad, 0, self.stride, 1)?;
        let c = self.b.dim(0)?;
        Ok(y.broadcast_add(&self.b.reshape((1, c, 1, 1))?)?)
    }
}

/// `y = x W^T + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: Tensor,
    pub b: Tensor,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, std: f64) -> Result<Self> {
        Ok(Dense {
            w: store.normal(&format!("{name}.weight"), &[fan_out, fan_in], 0.0, std)?,
            b: store.constant(&format!("{name}.bias"), &[fan_out], 0.0)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.w.t()?)?.broadcast_add(&self.b)?)
    }

    pub fn in_dim(&self) -> usize {
        self.w.dims()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.w.dims()[0]
    }
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&(x * slope)?)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: &Tensor) -> Result<Tensor> {
    let pos = x.relu()?;
    let tail = (x.abs()?.neg()?.exp()? + 1.0)?.log()?;
    Ok((pos + tail)?)
}

/// Inverted dropout with a mask drawn from `rng`.
pub fn dropout(x: &Tensor, rate: f64, rng: &mut impl Rng) -> Result<Tensor> {
    if rate <= 0.0 {
        return Ok(x.clone());
    }
    let keep = 1.0 - rate;
    let n = x.elem_count();
    let mask: Vec<f32> = (0..n)
        .map(|_| if rng.random_bool(keep) { (1.0 / keep) as f32 } else { 0.0 })
        .collect();
    let mask = Tensor::from_vec(mask, x.dims(), x.device())?.to_dtype(x.dtype())?;
    Ok((x * mask)?)
}

/// Mean over the two spatial axes of an NCHW tensor.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    Ok(x.mean(D::Minus1)?.mean(D::Minus1)?)
}

/// Images (row-major `size*size` each) as an `(n, 1, size, size)` tensor.
pub fn image_batch(images: &[&[f32]], size: usize, dtype: DType) -> Result<Tensor> {
    let mut flat = Vec::with_capacity(images.len() * size * size);
    for img in images {
        flat.extend_from_slice(img);
    }
    Ok(Tensor::from_vec(flat, (images.len(), 1, size, size), &candle_core::Device::Cpu)?.to_dtype(dtype)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn softplus_is_stable() {
        let x = Tensor::new(&[-1000f32, -1.0, 0.0, 1.0, 1000.0], &Device::Cpu).unwrap();
        let y = softplus(&x).unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(y[0], 0.0);
        assert!((y[2] - 2f32.ln()).abs() < 1e-6);
        assert_eq!(y[4], 1000.0);
        assert!((y[3] - y[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn conv_shapes() {
        let mut s = ParamStore::new(DType::F32, 0);
        let c = Conv::new(&mut s, "c", 1, 4, 4, 2, 1, 1.0).unwrap();
        let t = ConvT::new(&mut s, "t", 4, 2, 4, 2, 1, 1.0).unwrap();
        let x = Tensor::zeros((3, 1, 16, 16), DType::F32, &Device::Cpu).unwrap();
        let y = c.forward(&x).unwrap();
        assert_eq!(y.dims(), [3, 4, 8, 8]);
        assert_eq!(t.forward(&y).unwrap().dims(), [3, 2, 16, 16]);
    }
}
