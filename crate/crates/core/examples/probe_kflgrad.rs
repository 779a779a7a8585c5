use tgsim::robot::{default_model, Assembly, ControlPolicy, ParamSet, Dir};
use tgsim::sysid::{align_key_frames, key_frame_loss, segment_gaits_frames};

fn main() {
    let model = default_model().unwrap();
    let tru = ParamSet::nominal(&model.desc);
    let policy = ControlPolicy::new(
        vec![
            [0.6, 1.0, 1.0, 0.6, 1.0, 1.0],
            [1.0, 0.6, 1.0, 1.0, 0.6, 1.0],
            [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ],
        model.desc.control.tolerance, model.desc.pid, model.desc.control.step_timeout_s).unwrap();
    let mut asm = Assembly::new(&model, tru);
    let gt = asm.execute_policy(&policy).unwrap().val();
    let gt_segs = segment_gaits_frames(&gt.frames).unwrap();
    println!("gt segs: {:?}", gt_segs.iter().map(|s| s.duration()).collect::<Vec<_>>());

    let loss_at = |v: f64| -> f64 {
        let mut p = tru;
        p.motor_speed = v;
        let mut asm = Assembly::new(&model, p);
        // dense rollout mirroring sysid::rollout
        let mut frames = Vec::new();
        asm.dirs = policy.directions(0);
        frames.push(asm.frame());
        for (idx, &targets) in policy.steps.iter().enumerate() {
            asm.active_step = idx;
            let dirs = policy.directions(idx);
            asm.advance_policy_step(targets, dirs, policy.tolerance, policy.timeout, |a, l| {
                frames.push(a.frame_with(*l));
            }).unwrap();
        }
        let segs = segment_gaits_frames(&frames).unwrap();
        let pairs = align_key_frames(&gt.frames, &gt_segs, &frames, &segs).unwrap();
        key_frame_loss(&gt.frames, &frames, &pairs)
    };
    for v in [0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6] {
        println!("v={v}: kfl={:.6e}", loss_at(v));
    }
    for v in [0.22, 0.25, 0.28, 0.31, 0.35, 0.4, 0.45] {
        let h = 0.01;
        println!("FD(h=0.01) at {v}: {:+.4e}", (loss_at(v+h) - loss_at(v-h)) / (2.0*h));
    }
    for v in [0.24, 0.25, 0.26, 0.27] {
        let h = 1e-3;
        println!("FD(h=1e-3) at {v}: {:+.4e}", (loss_at(v+h) - loss_at(v-h)) / (2.0*h));
    }
}
// appended: semi-local slopes
