use tgsim::gaits::search::{search_robot_gaits, RewardKind, SearchOptions};
use tgsim::gaits::symmetry::expand_policy;
use tgsim::robot::{default_model, Assembly, ParamSet};
use tgsim::math::V3;

fn main() {
    let model = default_model().unwrap();
    let params = ParamSet::nominal(&model.desc);
    let outcome = search_robot_gaits(&model, params, RewardKind::Forward, SearchOptions::default()).unwrap();
    println!("gait reward {:.4}, len {}", outcome.best.reward, outcome.best.states.len());
    let t0 = std::time::Instant::now();
    match expand_policy(&model, &outcome.best, 6) {
        Err(e) => println!("EXPAND FAILED: {e}"),
        Ok(policy) => {
            println!("expanded to {} steps in {:?}", policy.steps.len(), t0.elapsed());
            let mut asm = Assembly::new(&model, params);
            let fwd = model.rest_forward();
            let com0 = tgsim::dynamics::center_of_mass(&asm.bodies);
            match asm.execute_policy(&policy) {
                Err(e) => println!("EXec FAILED: {e}"),
                Ok(traj) => {
                    let com1 = tgsim::dynamics::center_of_mass(&asm.bodies);
                    let disp = (com1 - com0).dot(fwd);
                    println!("6x execution: truncated={} duration={:.1}s forward displacement {:.3} m ({:.2} rod lengths)",
                        traj.meta.truncated, traj.frames.last().unwrap().t, disp, disp / model.geom.rod_length);
                    // segment count check
                    let segs = tgsim::sysid::segment_gaits_frames(&traj.val().frames).unwrap();
                    println!("segments: {} (expect {})", segs.len(), 6 * outcome.best.states.len());
                }
            }
        }
    }
}
