//! Inputs shared by the benchmarks.

use levelk_core::games::AnalyticGame;
use levelk_core::rng;
use levelk_core::toygan::{
    GanBatch, GanGame, GanLossKind, MlpParams, MlpShape, BATCH_SIZE, HIDDEN_WIDTH, LATENT_DIM,
};
use levelk_core::{JointState, Matrix};

/// An n×n standard-normal bilinear game and a standard-normal start point.
pub fn random_bilinear(n: usize, seed: u64) -> (AnalyticGame, JointState) {
    let mut r = rng::stream(seed, "bench");
    let mut data = vec![0.0; n * n + 2 * n];
    rng::fill_standard_normal(&mut r, &mut data);
    let m = Matrix::new(n, n, data[..n * n].to_vec()).expect("square");
    let game = AnalyticGame::bilinear(m).expect("finite");
    let s = JointState::from_slices(&data[n * n..n * n + n], &data[n * n + n..]);
    (game, s)
}

/// The default-size GAN on one fixed minibatch, at its initial parameters.
pub fn gan_setup(kind: GanLossKind, seed: u64) -> (GanGame, JointState) {
    let gen_shape = MlpShape::generator(LATENT_DIM, HIDDEN_WIDTH);
    let disc_shape = MlpShape::discriminator(HIDDEN_WIDTH);
    let gen = MlpParams::xavier(gen_shape, &mut rng::stream(seed, "gen-init"));
    let disc = MlpParams::xavier(disc_shape, &mut rng::stream(seed, "disc-init"));
    let batch = GanBatch::sample(
        BATCH_SIZE,
        LATENT_DIM,
        &mut rng::stream(seed, "data"),
        &mut rng::stream(seed, "latent"),
    );
    let game = GanGame {
        kind,
        gen_shape,
        disc_shape,
        batch,
    };
    (game, JointState::new(gen.flatten(), disc.flatten()))
}
