use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qhenn_core::data::Dataset;
use qhenn_core::fedtrain::{run_reverse_training, single_class_providers};
use qhenn_core::privinf::{audit_csv, private_infer, privacy_audit, AuditConfig, ServerModel};
use qhenn_core::qcnn::{
    accuracy, build_ansatz, fit as fit_model, init_theta, Encoding, FitConfig, Model,
};
use qhenn_core::qhe::{evaluate_with_fresh_key, replay_key, run_protocol, KeySchedule};
use qhenn_core::rng::{child_rng, rng_from_seed};
use qhenn_core::sim::{bitstring, random_clifford_t, Circuit, StateVector};
use qhenn_core::synth::{synthesize_rz, transpile as lower, Backend, SynthConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{DataConfig, DataSource, RunConfig, BUNDLED_TRAIN};
use crate::failure::{Failure, Outcome};
use crate::manifest::{manifest_path_for, read_file, write_file, write_manifest};
use crate::{AuditArgs, DataArgs, DemoArgs, FitArgs, InferArgs, SynthArgs, TrainArgs, TranspileArgs};

/// Fidelity the decrypted demo state must reach.
const SELF_CHECK_FIDELITY: f64 = 1.0 - 1e-10;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Writes `text` to `out` with a manifest beside it.
fn emit(out: &Path, text: &str, command: &str, seed: u64, config: &Value) -> Outcome {
    write_file(out, text.as_bytes())?;
    write_manifest(&manifest_path_for(out), command, seed, config, &[out])
}

fn synth_config(epsilon: f64, max_depth: usize) -> Outcome<SynthConfig> {
    let c = SynthConfig {
        epsilon,
        backend: Backend::Search,
        max_search_depth: max_depth,
    };
    c.validate()?;
    Ok(c)
}

fn prepared(data: &Dataset, enc: Encoding, n: usize) -> Outcome<Vec<(StateVector, bool)>> {
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| Ok((enc.prepare(x, n)?, y)))
        .collect()
}

fn data_config(a: &DataArgs, enc: Encoding) -> DataConfig {
    DataConfig {
        source: a.data.unwrap_or(match enc {
            Encoding::Qubit => DataSource::DigitsPca,
            Encoding::Amplitude => DataSource::Digits,
        }),
        split_seed: a.split_seed,
        train_ratio: a.train_ratio,
        path: a.data_path.clone(),
        ..DataConfig::default()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn demo(a: DemoArgs) -> Outcome {
    let n = a.qubits as usize;
    let clifford = a.clifford_gates.unwrap_or(2 * a.t_gates + 4);
    let circuit = random_clifford_t(n, a.t_gates, clifford, &mut child_rng(a.seed, 0))?;
    let plain = StateVector::new(n)?;

    let ev = evaluate_with_fresh_key(&circuit, &plain, &mut child_rng(a.seed, 1))?;
    let mut expected = plain.clone();
    expected.apply_circuit(&circuit)?;
    let fidelity = ev.decrypted_state()?.fidelity(&expected);
    let replay_ok = replay_key(&ev.output.program, &ev.initial, &ev.output.bell)? == ev.final_key;
    let passed = fidelity >= SELF_CHECK_FIDELITY && replay_ok;

    let readout: Vec<usize> = (0..n).collect();
    let transcript = run_protocol(
        &circuit,
        &plain,
        &readout,
        a.shots as usize,
        KeySchedule::FreshPerShot,
        &mut child_rng(a.seed, 2),
    )?;
    let plaintext: BTreeMap<String, f64> = expected
        .probabilities()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-12)
        .map(|(i, &p)| (bitstring(i, n), p))
        .collect();
    let bell: Vec<[u8; 2]> = ev
        .output
        .bell
        .iter()
        .map(|&(x, z)| [x as u8, z as u8])
        .collect();
    let out = json!({
        "qubits": n,
        "t_gates": a.t_gates,
        "seed": a.seed,
        "circuit": to_value(&circuit),
        "key_update_program": to_value(&ev.output.program),
        "initial_key": to_value(&ev.initial),
        "final_key": to_value(&ev.final_key),
        "bell_outcomes": bell,
        "bell_outcome_count": bell.len(),
        "shots": a.shots,
        "encrypted_counts": transcript.encrypted_counts(),
        "decrypted_counts": transcript.decrypted_counts(),
        "plaintext_probabilities": plaintext,
        "self_check": {
            "fidelity": fidelity,
            "key_replay_matches": replay_ok,
            "passed": passed,
        },
    });
    let text = pretty(&out);
    print!("{text}");
    if let Some(path) = &a.out {
        let cfg = json!({
            "qubits": n, "t_gates": a.t_gates, "clifford_gates": clifford, "shots": a.shots
        });
        emit(path, &text, "demo", a.seed, &cfg)?;
    }
    if !passed {
        return Err(Failure::Contract(format!(
            "homomorphic self-check failed (fidelity {fidelity}, key replay {replay_ok})"
        )));
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> Outcome {
    if !a.theta.is_finite() {
        return Err(Failure::Usage("theta must be finite".into()));
    }
    let cfg = synth_config(a.epsilon, a.max_depth)?;
    let w = synthesize_rz(a.theta, &cfg)?;
    let word: Vec<&str> = w.word.iter().map(|k| k.name()).collect();
    let out = json!({
        "theta": a.theta,
        "epsilon": a.epsilon,
        "word": word.join(" "),
        "length": w.len(),
        "t_count": w.t_count,
        "distance": w.distance,
    });
    let text = pretty(&out);
    print!("{text}");
    if let Some(path) = &a.out {
        emit(path, &text, "synth", 0, &to_value(&cfg))?;
    }
    Ok(())
}

pub fn transpile(a: TranspileArgs) -> Outcome {
    let (circuit, source) = if let Some(p) = &a.input {
        (Circuit::from_json(&read_file(p)?)?, json!({ "in": p }))
    } else if let Some(p) = &a.model {
        let model = Model::from_json(&read_file(p)?)?;
        (model.spec()?.bind(&model.theta)?, json!({ "model": p }))
    } else {
        let n = a.ansatz.expect("clap enforces one source");
        let spec = build_ansatz(n)?;
        let theta = init_theta(&spec, &mut rng_from_seed(a.seed));
        (spec.bind(&theta)?, json!({ "ansatz": n }))
    };
    let cfg = synth_config(a.epsilon, a.max_depth)?;
    let (out, report) = lower(&circuit, a.budget, &cfg)?;
    write_file(&a.out, out.to_json().as_bytes())?;
    let report_text = pretty(&to_value(&report));
    let mut outputs = vec![a.out.as_path()];
    match &a.report {
        Some(r) => {
            write_file(r, report_text.as_bytes())?;
            outputs.push(r);
        }
        None => print!("{report_text}"),
    }
    let config = json!({ "source": source, "budget": a.budget, "synth": to_value(&cfg) });
    write_manifest(&manifest_path_for(&a.out), "transpile", a.seed, &config, &outputs)
}

pub fn fit(a: FitArgs) -> Outcome {
    let enc = Encoding::from(a.encoding);
    let spec = build_ansatz(a.qubits)?;
    let data = data_config(&a.data, enc);
    let (train, test) = data.load(a.qubits)?;
    let (tr, te) = (prepared(&train, enc, a.qubits)?, prepared(&test, enc, a.qubits)?);
    let cfg = FitConfig {
        iterations: a.iterations,
        batch_size: a.batch,
        alpha: a.alpha,
    };
    let mut rng = rng_from_seed(a.seed);
    let theta0 = init_theta(&spec, &mut rng);
    let r = fit_model(&spec, &tr, theta0, &cfg, &mut rng)?;
    let summary = json!({
        "train_accuracy": accuracy(&spec, &r.theta, &tr)?,
        "test_accuracy": accuracy(&spec, &r.theta, &te)?,
        "final_loss": r.losses.last().copied(),
    });
    let model = Model::new(&spec, enc, r.theta)?;
    print!("{}", pretty(&summary));
    let config = json!({
        "qubits": a.qubits, "encoding": enc, "data": to_value(&data), "fit": to_value(&cfg)
    });
    emit(&a.out, &model.to_json(), "fit", a.seed, &config)
}

pub fn train(a: TrainArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_toml(&read_file(p)?)?,
        None => RunConfig::from_toml(BUNDLED_TRAIN)?,
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.train.seed = cfg.seed;
    if let Some(v) = a.iterations {
        cfg.train.iterations = v;
    }
    if let Some(v) = a.shots {
        cfg.train.shots = v;
    }
    if let Some(v) = a.shots_per_key {
        cfg.train.shots_per_key = v;
    }
    if let Some(v) = a.backend {
        cfg.train.backend = v.into();
    }
    if let Some(v) = a.alpha {
        cfg.train.alpha = v;
    }
    if let Some(v) = a.budget {
        cfg.train.epsilon_budget = v;
    }
    cfg.train.validate()?;

    let n = cfg.n_qubits;
    let enc = cfg.train.encoding;
    let spec = build_ansatz(n)?;
    let (train, test) = cfg.data.load(n)?;
    let clients = single_class_providers(&train)?;
    let theta0 = init_theta(&spec, &mut child_rng(cfg.seed, 0));
    let run = run_reverse_training(&spec, &clients, theta0, &cfg.train)?;

    let dec = run.log.decrypted_losses();
    let w = 20.min(dec.len());
    let summary = json!({
        "iterations": run.log.len(),
        "clients": clients.iter().map(|c| json!({"id": c.id, "n_samples": c.samples.len()})).collect::<Vec<_>>(),
        "train_accuracy": accuracy(&spec, &run.theta, &prepared(&train, enc, n)?)?,
        "test_accuracy": accuracy(&spec, &run.theta, &prepared(&test, enc, n)?)?,
        "mean_encrypted_loss": mean(&run.log.encrypted_losses()),
        "first_window_decrypted_loss": mean(&dec[..w]),
        "last_window_decrypted_loss": mean(&dec[dec.len() - w..]),
    });

    let dir = &a.out_dir;
    let files: Vec<(PathBuf, String)> = {
        let mut f = vec![
            (dir.join("log.csv"), run.log.to_csv()),
            (dir.join("model.json"), Model::new(&spec, enc, run.theta.clone())?.to_json()),
            (dir.join("summary.json"), pretty(&summary)),
        ];
        if a.trace {
            let lines: String = run
                .trace
                .iter()
                .map(|m| serde_json::to_string(m).expect("serializable") + "\n")
                .collect();
            f.push((dir.join("trace.jsonl"), lines));
        }
        f
    };
    for (p, text) in &files {
        write_file(p, text.as_bytes())?;
    }
    print!("{}", pretty(&summary));
    let outputs: Vec<&Path> = files.iter().map(|(p, _)| p.as_path()).collect();
    write_manifest(&dir.join("manifest.json"), "train", cfg.seed, &to_value(&cfg), &outputs)
}

pub fn infer(a: InferArgs) -> Outcome {
    let model = Model::from_json(&read_file(&a.model)?)?;
    let data = data_config(&a.data, model.encoding);
    let (_, test) = data.load(model.n_qubits)?;
    if a.offset + a.samples > test.len() {
        return Err(Failure::Usage(format!(
            "requested samples {}..{} but the test set has {}",
            a.offset,
            a.offset + a.samples,
            test.len()
        )));
    }
    let synth = synth_config(SynthConfig::default().epsilon, a.max_depth)?;
    let server = ServerModel::compile(model, a.budget, &synth)?;
    let schedule = match a.shots_per_key {
        0 => KeySchedule::FreshPerShot,
        k => KeySchedule::ShotsPerKey(k),
    };
    let mut results = Vec::with_capacity(a.samples);
    for i in a.offset..a.offset + a.samples {
        let x = &test.features[i];
        let mut rng = child_rng(a.seed, i as u64);
        let r = private_infer(x, &server, a.shots, schedule, Some(test.labels[i]), &mut rng)?;
        let mut v = to_value(&r);
        v["index"] = json!(i);
        v["exact_prob"] = json!(server.model.forward_exact(x)?);
        v["transpiled_prob"] = json!(server.exact_prob(None, x)?);
        results.push(v);
    }
    let out = json!({
        "transpile": {
            "r_z_count": server.report.r_z_count,
            "t_count": server.report.t_count,
            "per_gate_epsilon": server.report.per_gate_epsilon,
            "distance_bound": server.report.distance_bound,
        },
        "results": results,
    });
    let text = pretty(&out);
    print!("{text}");
    let config = json!({
        "model": a.model, "data": to_value(&data), "samples": a.samples, "offset": a.offset,
        "shots": a.shots, "shots_per_key": a.shots_per_key, "budget": a.budget,
        "synth": to_value(&synth),
    });
    emit(&a.out, &text, "infer", a.seed, &config)
}

pub fn audit(a: AuditArgs) -> Outcome {
    let enc = Encoding::from(a.encoding);
    let data = data_config(&a.data, enc);
    let (train, test) = data.load(a.qubits)?;
    let cfg = AuditConfig {
        n_qubits: a.qubits,
        fit: FitConfig {
            iterations: a.iterations,
            batch_size: a.batch,
            alpha: a.alpha,
        },
        epsilon_budget: a.budget,
        max_search_depth: a.max_depth,
        seed: a.seed,
        retrain_select: a.retrain_select,
    };
    let records = privacy_audit(a.instances, enc, &train, &test, &cfg)?;
    let ok: Vec<_> = records.iter().filter(|r| r.error.is_none()).collect();
    let summary = json!({
        "instances": records.len(),
        "failed": records.len() - ok.len(),
        "min_server_accuracy": ok.iter().map(|r| r.server_acc).fold(f64::INFINITY, f64::min),
        "drops_at_least_0_05": ok.iter().filter(|r| r.server_acc - r.non_pauli_acc >= 0.05).count(),
        "selected": records.iter().find(|r| r.selected).map(|r| r.index),
        "errors": records.iter().filter_map(|r| r.error.as_ref().map(|e| json!({"index": r.index, "error": e}))).collect::<Vec<_>>(),
    });
    print!("{}", pretty(&summary));
    let config = json!({ "encoding": enc, "data": to_value(&data), "audit": to_value(&cfg) });
    emit(&a.out, &audit_csv(&records), "audit", a.seed, &config)
}
