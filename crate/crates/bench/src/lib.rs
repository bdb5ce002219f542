//! Fixtures shared by the benchmarks.

use accv::iglim::{combine_phases, multi_iglim, InitParams};
use accv::model::update_means;
use accv::synthetic::shapes;
use accv::{ImageTensor, ModelParams, PhaseStack, RegionMeans, SpectralPlan};

/// A synthetic segmentation problem at its initial state.
pub struct Problem {
    pub image: ImageTensor,
    pub u: PhaseStack,
    pub means: RegionMeans,
    pub params: ModelParams,
    pub plan: SpectralPlan,
}

/// The shapes image at `size x size`, initialized by IGLIM.
pub fn problem(size: usize) -> Problem {
    let image = shapes(size).expect("valid size").image;
    let params = ModelParams {
        epsilon: 4.0,
        h: 1.0,
        ..ModelParams::default()
    };
    let u = combine_phases(&multi_iglim(&image, &InitParams::default()).expect("edges"))
        .expect("four masks");
    let means = update_means(&u, &image, params.eps1(), None)
        .expect("matching shapes")
        .means;
    let plan = SpectralPlan::new(
        size,
        size,
        params.h,
        params.epsilon,
        params.stabilizer,
        params.dt,
    )
    .expect("valid plan");
    Problem {
        image,
        u,
        means,
        params,
        plan,
    }
}
