use tgsim::robot::{default_model, Assembly, ControlPolicy, ParamSet};
use tgsim::sysid::{identify, LossKind, ParamSpec, SysIdProblem};

fn main() {
    let model = default_model().unwrap();
    let params = ParamSet::nominal(&model.desc); // motor_speed 0.5 ground truth
    let policy = ControlPolicy::new(
        vec![
            [0.6, 1.0, 1.0, 0.6, 1.0, 1.0],
            [1.0, 0.6, 1.0, 1.0, 0.6, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ],
        model.desc.control.tolerance,
        model.desc.pid,
        model.desc.control.step_timeout_s,
    ).unwrap();
    let mut asm = Assembly::new(&model, params);
    let t0 = std::time::Instant::now();
    let gt = asm.execute_policy(&policy).unwrap().val();
    println!("gt: {} frames, {:.2} s sim, truncated={} ({:?})", gt.frames.len(), gt.frames.last().unwrap().t, gt.meta.truncated, t0.elapsed());

    let problem = SysIdProblem {
        model: &model,
        gt: gt.clone(),
        params: vec![ParamSpec::for_name("motor_speed", 0.25).unwrap()],
        loss: LossKind::Kfl,
        iterations: 100,
        learning_rate: 0.1,
        policy: Some(policy.clone()),
    };
    let t1 = std::time::Instant::now();
    match identify(&problem) {
        Err(e) => println!("IDENTIFY FAILED: {e}"),
        Ok(report) => {
            println!("100 iters took {:?}", t1.elapsed());
            for (i, row) in report.rows.iter().enumerate() {
                if i % 5 == 0 || i + 3 > report.rows.len() {
                    println!("iter {i}: loss={:.4e} v={:.4} g={:+.3e}", row.loss, row.params[0], row.grads[0]);
                }
            }
        }
    }
}
