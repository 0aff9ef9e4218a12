//! Per-subject extraction quality probe against generator ground truth.
use ppgmorph_cli::config::PipelineConfig;
use ppgmorph_cli::stages;
use ppgmorph_core::synth;

fn main() {
    let cfg = PipelineConfig::default();
    let mut spec = cfg.cohort.clone();
    spec.seed = cfg.seed; // StageSeed::Cohort = 0
    let cohort = synth::gen_cohort(&spec).unwrap();
    let mut bad = 0;
    println!("id   age   hr    c_r    ratio_true ratio_det  t_dia/T_det  n_absent  note");
    for s in &cohort {
        let age = s.recording.meta.age;
        let hr = s.recording.meta.heart_rate;
        let refl = s.model.reflected.as_ref().unwrap();
        let c_r = refl.center_s / s.model.beat_period_s;
        let (_, truth) = synth::gen_beat(&s.model, 400).unwrap();
        let ratio_true = truth
            .diastolic
            .map(|d| (d.val - truth.onset.val) / (truth.systolic.val - truth.onset.val));
        match stages::process_subject(&s.recording, &cfg) {
            Ok(out) => {
                let fv = &out.features;
                let ratio_det = fv.get("ratio_dia_sys").unwrap();
                let t_dia = fv.get("t_dia").unwrap();
                let dur = fv.get("beat_duration_s").unwrap();
                let absent = out.fiducials.flags().iter().filter(|(_, p)| !p).count();
                let ratio_err = ratio_true.map(|r| (ratio_det - r).abs()).unwrap_or(0.0);
                let frac_err = ratio_true.map(|_| (t_dia / dur - c_r).abs()).unwrap_or(0.0);
                let note = if ratio_err > 0.08 || frac_err > 0.04 || absent > 3 { bad += 1; "<-- POOR" } else { "" };
                println!(
                    "{} {:5.1} {:5.1} {:.3}  {:9.3} {:9.3}  {:10.3}  {:8}  {note}",
                    s.recording.meta.subject_id, age, hr, c_r,
                    ratio_true.unwrap_or(f64::NAN), ratio_det, t_dia / dur, absent
                );
            }
            Err(e) => {
                bad += 1;
                println!("{} {:5.1} {:5.1} {:.3}  FAILED: {e:#}", s.recording.meta.subject_id, age, hr, c_r);
            }
        }
    }
    println!("poor/failed subjects: {bad} / {}", cohort.len());
}
