use std::path::Path;
use std::process::{Command, Output};

use sinkbss::mixsim::{laplacian, speech_like, Fixture};
use sinkbss::AudioBuffer;
use sinkbss_cli::audio_io::{read_wav, write_wav, Encoding};

fn sinkbss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sinkbss")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_mono(path: &Path, x: Vec<f64>, sr: u32) {
    write_wav(path, &AudioBuffer::mono(x, sr).unwrap(), Encoding::Float32).unwrap();
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sinkbss(&[])), 2);
    assert_eq!(code(&sinkbss(&["separate", "--bogus"])), 2);
    let missing = dir.path().join("missing.wav");
    let out = dir.path().join("o");
    assert_eq!(code(&sinkbss(&["separate", "--input", s(&missing), "--out", s(&out)])), 1);

    let mono = dir.path().join("mono.wav");
    write_mono(&mono, laplacian(1, 4000), 8000);
    let csv = dir.path().join("h.csv");
    assert_eq!(code(&sinkbss(&["--threads", "0", "hist", "--input", s(&mono), "--out", s(&csv)])), 2);
    assert_eq!(code(&sinkbss(&["separate", "--input", s(&mono), "--out", s(&out)])), 1);
    assert_eq!(code(&sinkbss(&["--threads", "1", "hist", "--input", s(&mono), "--out", s(&csv)])), 0);
}

fn make_sources(dir: &Path, len: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let (a, b) = (dir.join("s1.wav"), dir.join("s2.wav"));
    write_mono(&a, speech_like(1, len, 8000), 8000);
    write_mono(&b, speech_like(2, len, 8000), 8000);
    (a, b)
}

#[test]
fn anechoic_mix_is_sum_of_delayed_sources() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = make_sources(dir.path(), 2000);
    let out = dir.path().join("m");
    let res = sinkbss(&["mix", "--sources", s(&a), s(&b), "--synthetic", "--t60", "0", "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let mix = read_wav(out.join("mix.wav")).unwrap();
    let (sa, sb) = (read_wav(&a).unwrap(), read_wav(&b).unwrap());
    let (sa, sb) = (sa.channel(0), sb.channel(0));
    let shifted = |x: &[f64], d: usize, t: usize| if t >= d { x[t - d] } else { 0.0 };
    for ch in 0..2 {
        let got = mix.channel(ch);
        let found = (0..=8).flat_map(|da| (0..=8).map(move |db| (da, db))).any(|(da, db)| {
            (0..got.len()).all(|t| (got[t] - (shifted(sa, da, t) + shifted(sb, db, t))).abs() < 1e-6)
        });
        assert!(found, "channel {ch} is not a sum of delayed sources");
    }
    let r1 = read_wav(out.join("ref_1.wav")).unwrap();
    let r2 = read_wav(out.join("ref_2.wav")).unwrap();
    for t in 0..mix.len() {
        assert!((r1.channel(0)[t] + r2.channel(0)[t] - mix.channel(0)[t]).abs() < 1e-6);
    }
}

#[test]
fn mix_is_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = make_sources(dir.path(), 3000);
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let again = dir.path().join("again");
    let base = ["mix", "--sources", s(&a), s(&b), "--synthetic", "--t60", "0.02", "--seed", "5", "--out"];
    assert_eq!(code(&sinkbss(&[&base[..], &[s(&first)]].concat())), 0);
    assert_eq!(code(&sinkbss(&[&base[..], &[s(&second)]].concat())), 0);
    let manifest = first.join("manifest.json");
    assert_eq!(code(&sinkbss(&["mix", "--manifest", s(&manifest), "--out", s(&again)])), 0);
    for name in ["mix.wav", "ref_1.wav", "ref_2.wav", "manifest.json"] {
        let f = std::fs::read(first.join(name)).unwrap();
        assert_eq!(f, std::fs::read(second.join(name)).unwrap(), "{name}");
        assert_eq!(f, std::fs::read(again.join(name)).unwrap(), "{name}");
    }
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("\"rir_len\": 320"), "{text}");
}

#[test]
fn mix_rejects_mismatched_response_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = make_sources(dir.path(), 1000);
    let rir = dir.path().join("rir.wav");
    let bank = AudioBuffer::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 8000).unwrap();
    write_wav(&rir, &bank, Encoding::Float32).unwrap();
    let out = dir.path().join("m");
    let res = sinkbss(&["mix", "--sources", s(&a), s(&b), "--rirs", s(&rir), "--out", s(&out)]);
    assert_eq!(code(&res), 2);
    let res = sinkbss(&["mix", "--sources", s(&a), s(&b), "--rirs", s(&rir), s(&rir), "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn separate_writes_estimates_trace_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let fx = Fixture::speech_pair(2, 1.0, 0.02, 8000).unwrap();
    let input = dir.path().join("mix.wav");
    write_wav(&input, &fx.mixture, Encoding::Float32).unwrap();
    let out = dir.path().join("sep");
    let res = sinkbss(&["separate", "--input", s(&input), "--method", "auxiva", "--iters", "1", "--out", s(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));

    let rows = csv_rows(&out.join("trace.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "1");
    assert!(rows[0][1].parse::<f64>().unwrap().is_finite());
    assert!(rows[0][2].parse::<f64>().unwrap() >= 0.0);
    for k in 1..=2 {
        let est = read_wav(out.join(format!("est_{k}.wav"))).unwrap();
        assert_eq!(est.len(), fx.mixture.len());
    }
    let cfg = std::fs::read_to_string(out.join("resolved_config.json")).unwrap();
    assert!(cfg.contains("\"auxiva\"") && cfg.contains("\"iters\": 1"), "{cfg}");

    // The resolved configuration reproduces the run.
    let out2 = dir.path().join("sep2");
    let res = sinkbss(&["separate", "--config", s(&out.join("resolved_config.json")), "--out", s(&out2)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(
        std::fs::read(out.join("est_1.wav")).unwrap(),
        std::fs::read(out2.join("est_1.wav")).unwrap()
    );
}

#[test]
fn separate_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"iterations": 3}"#).unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&sinkbss(&["separate", "--config", s(&cfg), "--input", "x.wav", "--out", s(&out)])), 2);
    assert_eq!(code(&sinkbss(&["separate", "--input", "x.wav", "--hop", "0", "--out", s(&out)])), 2);
}

fn eval_dirs(dir: &Path, refs: &[Vec<f64>], ests: &[(String, Vec<f64>)], mix: &AudioBuffer) -> std::path::PathBuf {
    let (rd, ed) = (dir.join("refs"), dir.join("ests"));
    std::fs::create_dir_all(&rd).unwrap();
    std::fs::create_dir_all(&ed).unwrap();
    for (k, r) in refs.iter().enumerate() {
        write_mono(&rd.join(format!("ref_{}.wav", k + 1)), r.clone(), 8000);
    }
    for (name, e) in ests {
        write_mono(&ed.join(name), e.clone(), 8000);
    }
    write_wav(dir.join("mix.wav"), mix, Encoding::Float32).unwrap();
    let out = dir.join("eval.csv");
    let res = sinkbss(&[
        "evaluate",
        "--est",
        s(&ed),
        "--refs",
        s(&rd),
        "--mix",
        s(&dir.join("mix.wav")),
        "--proj-len",
        "16",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    out
}

fn as_f32(x: Vec<f64>) -> Vec<f64> {
    x.into_iter().map(|v| v as f32 as f64).collect()
}

#[test]
fn evaluate_perfect_estimates_hit_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let refs = vec![as_f32(laplacian(1, 3000)), as_f32(laplacian(2, 3000))];
    let mix = AudioBuffer::new(vec![(0..3000).map(|t| refs[0][t] + refs[1][t]).collect(); 2], 8000).unwrap();
    // Listed out of order: est_2 is reference 1.
    let ests = vec![("est_2.wav".to_string(), refs[0].clone()), ("est_1.wav".to_string(), refs[1].clone())];
    let rows = csv_rows(&eval_dirs(dir.path(), &refs, &ests, &mix));
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0].as_str(), rows[0][1].as_str()), ("1", "2"));
    assert_eq!((rows[1][0].as_str(), rows[1][1].as_str()), ("2", "1"));
    for row in &rows {
        assert!(row[2].parse::<f64>().unwrap() > 250.0, "{row:?}");
    }
}

#[test]
fn evaluate_mixture_as_estimate_has_zero_improvement() {
    let dir = tempfile::tempdir().unwrap();
    let refs = vec![as_f32(laplacian(3, 3000)), as_f32(laplacian(4, 3000))];
    let m: Vec<f64> = as_f32((0..3000).map(|t| refs[0][t] + 0.7 * refs[1][t]).collect());
    let mix = AudioBuffer::new(vec![m.clone(), m.clone()], 8000).unwrap();
    let ests = vec![("est_1.wav".to_string(), m.clone()), ("est_2.wav".to_string(), m)];
    for row in csv_rows(&eval_dirs(dir.path(), &refs, &ests, &mix)) {
        for v in &row[5..8] {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-9, "{row:?}");
        }
    }
}

#[test]
fn histogram_probabilities_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.wav");
    write_mono(&input, speech_like(3, 16000, 8000), 8000);
    let out = dir.path().join("h.csv");
    assert_eq!(code(&sinkbss(&["hist", "--input", s(&input), "--bins", "40", "--out", s(&out)])), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 40);
    let total: f64 = rows.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let out = dir.path().join("hb.csv");
    let args = ["hist", "--input", s(&input), "--bins", "10", "--per-band", "--frame-len", "64", "--hop", "32", "--fft-len", "64"];
    assert_eq!(code(&sinkbss(&[&args[..], &["--out", s(&out)]].concat())), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 33 * 10);
    for band in rows.chunks(10) {
        let total: f64 = band.iter().map(|r| r[2].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9 || total == 0.0);
    }
}

fn distant_band_correlation(dir: &Path, name: &str, x: Vec<f64>) -> f64 {
    let input = dir.join(format!("{name}.wav"));
    write_mono(&input, x, 16000);
    let out = dir.join(format!("{name}.csv"));
    assert_eq!(code(&sinkbss(&["hist", "--input", s(&input), "--mode", "interband", "--out", s(&out)])), 0);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 513 * 513);
    let mut far = Vec::new();
    for r in &rows {
        let (a, b, c): (usize, usize, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!((-1.0..=1.0).contains(&c));
        if a == b {
            assert_eq!(c, 1.0);
        } else if a.abs_diff(b) > 50 && a < 256 && b < 256 {
            far.push(c);
        }
    }
    far.iter().sum::<f64>() / far.len() as f64
}

#[test]
fn speech_bands_correlate_more_than_noise_bands() {
    let dir = tempfile::tempdir().unwrap();
    let speech = distant_band_correlation(dir.path(), "speech", speech_like(5, 5 * 16000, 16000));
    let noise = distant_band_correlation(dir.path(), "noise", laplacian(5, 5 * 16000));
    assert!(noise.abs() < 0.02, "noise {noise}");
    assert!(speech > noise + 0.02, "speech {speech}, noise {noise}");
}

#[test]
fn all_zero_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("z.wav");
    write_mono(&input, vec![0.0; 4000], 8000);
    let out = dir.path().join("h.csv");
    assert_eq!(code(&sinkbss(&["hist", "--input", s(&input), "--out", s(&out)])), 1);
    assert!(!out.exists());
}
