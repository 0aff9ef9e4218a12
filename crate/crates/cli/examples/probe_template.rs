//! Dump processed templates + detected fiducials for a few subjects.
use ppgmorph_cli::config::PipelineConfig;
use ppgmorph_cli::stages;
use ppgmorph_core::synth;

fn main() {
    let cfg = PipelineConfig::default();
    let mut spec = cfg.cohort.clone();
    spec.seed = cfg.seed;
    spec.n_subjects = 179;
    let cohort = synth::gen_cohort(&spec).unwrap();
    for idx in [3usize, 57, 120] {
        let s = &cohort[idx];
        let refl = s.model.reflected.as_ref().unwrap();
        let c_r = refl.center_s / s.model.beat_period_s;
        let out = stages::process_subject(&s.recording, &cfg).unwrap();
        let f = &out.fiducials;
        let t = &out.template.samples;
        println!(
            "subject {} age {:.1} hr {:.1} c_r {:.3} refl_amp {:.3} notch {:.3}",
            s.recording.meta.subject_id, s.recording.meta.age, s.recording.meta.heart_rate,
            c_r, refl.amp, s.model.notch_depth
        );
        println!(
            "  O {} S {} N {:?} D {:?}  (frac: S {:.3} N {:?} D {:?})",
            f.o.idx, f.s.idx, f.n.map(|p| p.idx), f.d.map(|p| p.idx),
            f.s.idx as f64 / 400.0,
            f.n.map(|p| (p.idx as f64 / 4.0).round() / 100.0),
            f.d.map(|p| (p.idx as f64 / 4.0).round() / 100.0),
        );
        // coarse template profile: value every 20 samples
        let profile: Vec<String> = (0..20).map(|k| format!("{:+.2}", t[k * 20])).collect();
        println!("  profile: {}", profile.join(" "));
    }
}
