//! Seeded inputs shared by the benchmarks.

use eegtile::repr::{TileImage, TileKind};
use eegtile::tensor::{ConvLayerState, Dims4, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(seed: u64, len: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn tensor(seed: u64, dims: Dims4) -> Tensor4<f32> {
    Tensor4::from_vec(dims, uniform(seed, dims.len())).expect("length matches dims")
}

pub fn conv_layer(seed: u64, in_ch: usize, out_ch: usize) -> ConvLayerState<f32> {
    let mut layer = ConvLayerState::zeros(in_ch, out_ch);
    let kernels = uniform(seed, layer.kernels().len());
    layer.kernels_mut().copy_from_slice(&kernels);
    layer
}

pub fn raw_tile(seed: u64, channels: usize, samples: usize) -> TileImage {
    TileImage::new(channels, samples, TileKind::Raw, uniform(seed, channels * samples)).expect("finite values")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_seeded() {
        let d = Dims4::new(2, 3, 4, 1);
        assert_eq!(tensor(1, d).data(), tensor(1, d).data());
        assert_ne!(tensor(1, d).data(), tensor(2, d).data());
        assert_eq!(
            conv_layer(3, 1, 4).kernels().len(),
            eegtile::tensor::CONV_KERNEL.pow(2) * 4
        );
        assert_eq!(raw_tile(4, 5, 6).values().len(), 30);
    }
}
