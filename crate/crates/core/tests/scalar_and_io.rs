use lssmor::experiment::{random_lss, RandomLssSpec};
use lssmor::moment::{check_partial_realization, reduce};
use lssmor::simulate::{simulate, white_noise};
use lssmor::{Lss32, Lss64, ReductionMode, Signal64, SwitchingSequence};

#[test]
fn single_precision_pipeline() {
    let sys: Lss32 = random_lss(&RandomLssSpec { n: 5, shift: -0.5, ..Default::default() }, 1).cast();
    let rep = reduce(&sys, 1, ReductionMode::R).unwrap();
    assert!(rep.reduced.n <= 5);
    assert!(check_partial_realization(&sys, &rep.reduced, 1).unwrap() < 1e-4);

    let mu = SwitchingSequence::<f32>::parse("1:0.3,2:0.2").unwrap();
    let u = white_noise(1, 500, 1e-3f32, 3);
    let y = simulate(&sys, &mu, &u).unwrap();
    let yb = simulate(&rep.reduced, &mu, &u).unwrap();
    assert!(y.max_abs_diff(&yb).unwrap() <= 1e-3 * y.max_abs().max(1.0));
}

#[test]
fn model_file_round_trip_is_exact() {
    let dir = tempfile_dir();
    let path = dir.join("model.json");
    let sys = random_lss(&RandomLssSpec { n: 6, m: 2, p: 3, modes: 3, ..Default::default() }, 9);
    sys.save(&path).unwrap();
    let back = Lss64::load(&path).unwrap();
    assert_eq!(back, sys);
    assert_eq!(back.to_json().unwrap(), std::fs::read_to_string(&path).unwrap().trim_end());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn signal_csv_round_trip_is_exact() {
    let s = white_noise::<f64>(2, 50, 1e-3, 4);
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let back = Signal64::read_csv(buf.as_slice(), None).unwrap();
    assert_eq!(back.values, s.values);
    assert!((back.dt - s.dt).abs() < 1e-15);
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("lssmor-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
