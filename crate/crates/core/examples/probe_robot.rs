use tgsim::robot::{default_description, Assembly, ControlPolicy, ParamSet, RobotModel};
use tgsim::gaits::principal_axis;
use tgsim::math::V3;

fn main() {
    let t0 = std::time::Instant::now();
    let desc = default_description();
    println!("hash: {}", desc.content_hash());
    match RobotModel::build(desc) {
        Err(e) => println!("BUILD FAILED: {e}"),
        Ok(model) => {
            println!("build+settle ok in {:?}", t0.elapsed());
            let states = &model.rest_pose;
            for (i, s) in states.iter().enumerate() {
                let axis = s.orient.rotate(V3::v(0.0,0.0,1.0));
                println!("rod {i}: pos=({:.3},{:.3},{:.3}) axis=({:.2},{:.2},{:.2})", s.pos.x, s.pos.y, s.pos.z, axis.x, axis.y, axis.z);
            }
            let params = ParamSet::nominal(&model.desc);
            let asm = Assembly::new(&model, params);
            let caps = asm.cap_positions();
            for (i, c) in caps.iter().enumerate() {
                println!("cap {i}: z = {:.4} (touching: {})", c.z, c.z < model.geom.endcap_radius + 2e-3);
            }
            match principal_axis(states) {
                Ok(pa) => println!("principal axis: ({:.2},{:.2},{:.2}), fwd ({:.2},{:.2})", pa.axis.x, pa.axis.y, pa.axis.z, pa.forward.x, pa.forward.y),
                Err(e) => println!("principal axis: {e}"),
            }
            // re-settle idempotence
            let mut asm2 = Assembly::new(&model, params);
            let before: Vec<f64> = asm2.bodies.iter().map(|b| b.state.pos.val().z).collect();
            match asm2.settle() {
                Ok(()) => {
                    let after: Vec<f64> = asm2.bodies.iter().map(|b| b.state.pos.val().z).collect();
                    let dz: f64 = before.iter().zip(&after).map(|(a,b)| (a-b).abs()).fold(0.0, f64::max);
                    println!("re-settle ok, max dz = {dz:.2e}, t = {:.3}", asm2.time);
                }
                Err(e) => println!("re-settle FAILED: {e}"),
            }
            // try a retraction policy step
            let t1 = std::time::Instant::now();
            let mut asm3 = Assembly::new(&model, params);
            let policy = ControlPolicy::new(
                vec![[0.0, 1.0, 1.0, 0.0, 1.0, 1.0], [1.0; 6]],
                model.desc.control.tolerance, model.desc.pid, model.desc.control.step_timeout_s).unwrap();
            match asm3.execute_policy(&policy) {
                Ok(traj) => {
                    let start = traj.frames.first().unwrap();
                    let end = traj.frames.last().unwrap();
                    let com0 = start.caps.iter().fold(V3::v(0.,0.,0.), |a,&b| a+b).scale(1.0/6.0);
                    let com1 = end.caps.iter().fold(V3::v(0.,0.,0.), |a,&b| a+b).scale(1.0/6.0);
                    println!("policy exec ({:?}): frames={} truncated={} dur={:.2}s com moved ({:.3},{:.3},{:.3})",
                        t1.elapsed(), traj.frames.len(), traj.meta.truncated, end.t, com1.x-com0.x, com1.y-com0.y, com1.z-com0.z);
                }
                Err(e) => println!("policy exec FAILED: {e}"),
            }
        }
    }
}
