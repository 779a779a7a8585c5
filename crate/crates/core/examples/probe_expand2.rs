use tgsim::gaits::search::{search_robot_gaits, RewardKind, SearchOptions};
use tgsim::gaits::symmetry::expand_policy;
use tgsim::robot::{default_model, Assembly, ParamSet, Dir};
use tgsim::Scalar;

fn main() {
    let model = default_model().unwrap();
    let params = ParamSet::nominal(&model.desc);
    let outcome = search_robot_gaits(&model, params, RewardKind::Forward, SearchOptions::default()).unwrap();
    let policy = expand_policy(&model, &outcome.best, 6).unwrap();
    let mut asm = Assembly::new(&model, params);
    for (i, &targets) in policy.steps.iter().enumerate() {
        let mut dirs = [Dir::Hold; 6];
        let prev = if i == 0 { [1.0;6] } else { policy.steps[i-1] };
        for c in 0..6 { dirs[c] = Dir::from_delta(prev[c], targets[c]); }
        let out = asm.advance_policy_step(targets, dirs, policy.tolerance, policy.timeout, |_,_| {}).unwrap();
        if !out.completed {
            let lengths = asm.sensed_lengths();
            print!("step {i} TIMEOUT: targets={targets:?} spool=[");
            for k in 0..6 { print!("{:.3} ", asm.spools[k].val()); }
            print!("] sens=[");
            for k in 0..6 {
                let c = &model.cables[model.actuated_cable_index(k)];
                print!("{:.3} ", (lengths[k].val() - c.min_length)/(c.max_length - c.min_length));
            }
            println!("]");
        } else {
            println!("step {i} ok ({:.2}s) targets={targets:?}", out.duration);
        }
    }
}
