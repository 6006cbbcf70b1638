//! Pieces shared by the two generative networks.

use crate::error::{Error, Result};
use crate::numeric::{Matrix, Mlp, SeededRng};

/// Rows pushed through a network per inference call when sampling.
const SAMPLE_CHUNK: usize = 2048;

/// `[input, hidden × layers, output]`
pub(crate) fn layer_widths(
    input: usize,
    hidden_layers: usize,
    hidden_units: usize,
    output: usize,
) -> Vec<usize> {
    let mut w = vec![input];
    w.extend(std::iter::repeat_n(hidden_units, hidden_layers));
    w.push(output);
    w
}

/// One-hot rows for conditional value tuples, given the block sizes.
pub(crate) fn conditional_matrix(blocks: &[usize], conditionals: &[&[usize]]) -> Result<Matrix> {
    let width: usize = blocks.iter().sum();
    let mut c = Matrix::zeros(conditionals.len(), width);
    for (i, cond) in conditionals.iter().enumerate() {
        if cond.len() != blocks.len() {
            return Err(Error::Validation(format!(
                "expected {} conditional values, got {}",
                blocks.len(),
                cond.len()
            )));
        }
        let row = c.row_mut(i);
        let mut offset = 0;
        for (j, (&v, &len)) in cond.iter().zip(blocks).enumerate() {
            if v >= len {
                return Err(Error::Encoding {
                    feature: format!("conditional #{j}"),
                    detail: format!("index {v} out of range 0..{len}"),
                });
            }
            row[offset + v] = 1.0;
            offset += len;
        }
    }
    Ok(c)
}

/// One categorical draw per softmax block of each row.
pub(crate) fn draw_blocks(
    probs: &Matrix,
    blocks: &[usize],
    rng: &mut SeededRng,
) -> Vec<Vec<usize>> {
    (0..probs.rows())
        .map(|r| {
            let row = probs.row(r);
            let mut start = 0;
            blocks
                .iter()
                .map(|&len| {
                    let v = rng.categorical(&row[start..start + len]);
                    start += len;
                    v
                })
                .collect()
        })
        .collect()
}

/// Feeds `(z ‖ c)` with `z ~ N(0, I)` through `net` and draws from each
/// output block.
pub(crate) fn sample_from_noise(
    net: &Mlp,
    noise_dim: usize,
    output_blocks: &[usize],
    conditional_blocks: &[usize],
    conditionals: &[&[usize]],
    rng: &mut SeededRng,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(conditionals.len());
    for chunk in conditionals.chunks(SAMPLE_CHUNK) {
        let c = conditional_matrix(conditional_blocks, chunk)?;
        let mut z = Matrix::zeros(chunk.len(), noise_dim);
        rng.fill_standard_normal(z.as_mut_slice());
        let probs = net.infer(&z.hconcat(&c)?)?;
        out.extend(draw_blocks(&probs, output_blocks, rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_rows_are_one_hot() {
        let c = conditional_matrix(&[2, 3], &[&[1, 0], &[0, 2]]).unwrap();
        assert_eq!(c.row(0), &[0.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(c.row(1), &[1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(conditional_matrix(&[2, 3], &[&[2, 0]]).is_err());
        assert!(conditional_matrix(&[2, 3], &[&[1]]).is_err());
    }

    #[test]
    fn draws_follow_block_probabilities() {
        let probs = Matrix::from_rows(&[vec![0.0, 1.0, 0.0, 0.0, 1.0]]).unwrap();
        let mut rng = SeededRng::new(3);
        assert_eq!(draw_blocks(&probs, &[2, 3], &mut rng), vec![vec![1, 2]]);
    }
}
