use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio::{expect_eof, read_count, read_f64s, read_magic, read_u64, write_f64s, write_u64};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

use super::model::{Activation, AutoencoderModel, Layer};

pub const MODEL_MAGIC: &[u8; 8] = b"HROMAE01";

const MAX_WIDTH: u64 = 1 << 24;

/// Writes `HROMAE01`, the total layer count, the encoder layer count, then for every layer
/// `inputs`, `outputs`, activation tag, the weights row-major and the bias, all little-endian.
pub fn write_model<T: Scalar, W: Write>(w: &mut W, model: &AutoencoderModel<T>) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    let layers: Vec<&Layer<T>> = model.encoder().iter().chain(model.decoder()).collect();
    write_u64(w, layers.len() as u64)?;
    write_u64(w, model.encoder().len() as u64)?;
    for l in layers {
        write_u64(w, l.inputs() as u64)?;
        write_u64(w, l.outputs() as u64)?;
        write_u64(w, l.activation.tag())?;
        let row_major: Vec<f64> = (0..l.outputs())
            .flat_map(|i| (0..l.inputs()).map(move |j| l.weight[(i, j)].to_f64_lossy()))
            .collect();
        write_f64s(w, &row_major)?;
        let bias: Vec<f64> = l.bias.iter().map(|b| b.to_f64_lossy()).collect();
        write_f64s(w, &bias)?;
    }
    Ok(())
}

pub fn read_model<T: Scalar, R: Read>(r: &mut R) -> Result<AutoencoderModel<T>> {
    read_magic(r, MODEL_MAGIC)?;
    let total = read_count(r, "layer count", 1024)?;
    let n_enc = read_count(r, "encoder layer count", 1024)?;
    if n_enc == 0 || n_enc >= total {
        return Err(Error::Format(format!("encoder layer count {n_enc} invalid for {total} layers")));
    }
    let mut layers = Vec::with_capacity(total);
    for _ in 0..total {
        let inputs = read_count(r, "layer inputs", MAX_WIDTH)?;
        let outputs = read_count(r, "layer outputs", MAX_WIDTH)?;
        let tag = read_u64(r)?;
        let activation =
            Activation::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown activation tag {tag}")))?;
        let w = read_f64s(r, inputs * outputs)?;
        let b = read_f64s(r, outputs)?;
        let weight = DenseMatrix::from_fn(outputs, inputs, |i, j| T::of(w[i * inputs + j]));
        layers.push(Layer::new(weight, b.into_iter().map(T::of).collect(), activation)?);
    }
    expect_eof(r)?;
    let decoder = layers.split_off(n_enc);
    AutoencoderModel::new(layers, decoder).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model<T: Scalar>(path: &Path, model: &AutoencoderModel<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<AutoencoderModel<T>> {
    read_model(&mut BufReader::new(File::open(path)?))
}
