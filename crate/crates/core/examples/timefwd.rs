use ddasr_core::lf::LightField;
use ddasr_core::net::{ddasr_forward, param_count, ModelState, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let config = NetworkConfig::ddasr();
    println!("params: {}", param_count(&config).unwrap());
    let t0 = std::time::Instant::now();
    let model = ModelState::<f32>::init(&config, 1).unwrap();
    println!("init: {:?}", t0.elapsed());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lf = LightField::from_fn(2, 2, 64, 64, |_, _, _, _| rng.gen_range(0.0..1.0)).unwrap();
    let t1 = std::time::Instant::now();
    let out = ddasr_forward(&lf, &model).unwrap();
    println!("full forward 2x2x64x64 -> {}x{}x{}x{}: {:?}", out.num_u(), out.num_v(), out.height(), out.width(), t1.elapsed());

    let s = NetworkConfig::ddasr_s();
    let model_s = ModelState::<f32>::init(&s, 2).unwrap();
    let lf_s = LightField::from_fn(2, 2, 32, 32, |_, _, _, _| 0.5).unwrap();
    let t2 = std::time::Instant::now();
    let out_s = ddasr_forward(&lf_s, &model_s).unwrap();
    println!("lvn forward 2x2x32x32 -> {}x{}: {:?}", out_s.num_u(), out_s.num_v(), t2.elapsed());
}
