use marimba::flow::*;
use marimba::surface::build_surface;
use marimba::spec::genus2_theta;
use rand::SeedableRng;
fn main() {
    let s = build_surface(&genus2_theta([0.8,1.0,1.3],[0.2,-0.35,0.5],&[(0,"C4"),(1,"E4"),(2,"G4")])).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let start = sample_liouville(&s, &mut rng);
    let t0 = std::time::Instant::now();
    let tr = trace(&s, start, &TraceConfig::for_time(1e7)).unwrap();
    println!("1e7 trace: {:.2}s, {} crossings", t0.elapsed().as_secs_f64(), tr.crossings.len());
}
