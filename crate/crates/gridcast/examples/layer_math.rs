//! The four layer types on small hand-checkable inputs, plus their
//! parameter-count formulas.
//!
//! Run with `cargo run --example layer_math`.

use gridcast::layers::{Conv3d, Dense, LocallyConnected2d, Padding, TemporalFusion, TransposedConv3d};
use gridcast::tensor::{Activation, Tensor};

fn main() -> gridcast::Result<()> {
    // 3-D convolution over a 1x1x3 series with a temporal kernel of 2.
    // Same padding keeps the length: [1,2,3] * [1,1] -> [3,5,3].
    let mut conv = Conv3d::new(1, 1, (1, 1, 2), (1, 1, 1), Padding::Same, Activation::Identity);
    conv.weights = Tensor::new(vec![1, 1, 1, 1, 2], vec![1.0, 1.0])?;
    let series = Tensor::new(vec![1, 1, 1, 3], vec![1.0, 2.0, 3.0])?;
    println!("conv3d  [1,2,3] -> {:?}", conv.forward(&series)?.data());
    println!(
        "conv3d  params for k=(3,3,3), 4 -> 8 maps: {}",
        Conv3d::new(4, 8, (3, 3, 3), (1, 1, 1), Padding::Same, Activation::Relu).param_count()
    );

    // Transposed convolution upsamples: length 2 -> (2-1)*1 + 2 = 3.
    let mut tconv = TransposedConv3d::new(1, 1, (1, 1, 2), (1, 1, 1), Activation::Identity);
    tconv.weights = Tensor::new(vec![1, 1, 1, 1, 2], vec![3.0, 5.0])?;
    let up = tconv.forward(&Tensor::new(vec![1, 1, 1, 2], vec![1.0, 2.0])?)?;
    println!("tconv3d [1,2] with w=[3,5] -> {:?}", up.data());

    // Strided transposed convolution: length 2 -> (2-1)*2 + 3 = 5.
    let mut strided = TransposedConv3d::new(1, 1, (1, 1, 3), (1, 1, 2), Activation::Identity);
    strided.weights = Tensor::new(vec![1, 1, 1, 1, 3], vec![1.0, 1.0, 1.0])?;
    let up = strided.forward(&Tensor::new(vec![1, 1, 1, 2], vec![1.0, 1.0])?)?;
    println!("tconv3d stride 2 ones -> {:?}", up.data());

    // Locally connected: every position owns its weights and bias.
    let mut local = LocallyConnected2d::new(1, 1, (1, 1), (2, 1), Activation::Identity);
    local.weights = Tensor::new(vec![1, 2, 1, 1, 1, 1], vec![2.0, 3.0])?;
    local.bias = Tensor::new(vec![1, 2, 1], vec![1.0, -1.0])?;
    let out = local.forward(&Tensor::new(vec![1, 2, 1], vec![4.0, 5.0])?)?;
    println!("locally connected [4;5] -> {:?}", out.data());
    println!(
        "locally connected untied params (3 maps, 1x1 kernel, 2x2 grid): {}",
        LocallyConnected2d::new(3, 1, (1, 1), (2, 2), Activation::Identity).param_count()
    );

    // Dense layer with the shared bias.
    let mut dense = Dense::new(2, 2, Activation::Identity);
    dense.weights = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0])?;
    dense.bias = Tensor::vector(&[1.0]);
    println!(
        "dense   [[1,2],[3,4]]x + 1 at [1,1] -> {:?}",
        dense.forward(&Tensor::vector(&[1.0, 1.0]))?.data()
    );
    println!("dense   params for 10 -> 5: {}", Dense::new(10, 5, Activation::Relu).param_count());

    // Temporal fusion collapses the look-back axis.
    let mut fusion = TemporalFusion::new(1, 1, 3, Activation::Identity);
    for w in fusion.conv.weights.data_mut() {
        *w = 1.0;
    }
    let maps = Tensor::new(vec![1, 1, 2, 3], vec![1.0, 2.0, 3.0, 10.0, 20.0, 30.0])?;
    println!("fusion  sums the time axis -> {:?}", fusion.forward(&maps)?.data());
    Ok(())
}
