use tgsim::robot::{default_model, align_initial_state, Assembly, ParamSet};

fn main() {
    let model = default_model().unwrap();
    let params = ParamSet::nominal(&model.desc);
    let asm = Assembly::new(&model, params);
    let f = asm.frame();
    let caps = f.caps;
    let lengths = f.lengths;
    match align_initial_state(&model, &caps, &lengths) {
        Err(e) => println!("ALIGN FAILED: {e}"),
        Ok(aligned) => {
            let mut worst = 0.0f64;
            let acaps = aligned.cap_positions();
            for (a, b) in acaps.iter().zip(caps.iter()) {
                worst = worst.max(a.val().dist(*b));
            }
            println!("max cap error after align+settle: {:.6} m (t={:.1}s)", worst, aligned.time);
            for k in 0..6 {
                print!("{:.4} ", aligned.spools[k]);
            }
            println!("<- spools");
        }
    }
}
