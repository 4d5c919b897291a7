use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use dcse::auxiva::{iva_macs_per_sweep_per_second, IvaConfig};
use dcse::dsp::{StftConfig, Waveform};
use dcse::loss::si_snr;
use dcse::model::{count_params, init_random, layout, load_weights, mac_report, save_weights, ModelConfig};
use dcse::pipeline::{separate, Enhancer};
use dcse::simkit::{render_scene, sample_scene, ManifestRecord, SceneConstraints};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::wav::{read_wav, write_wav};

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {jobs} workers: {e}")))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn stem(path: &Path) -> CliResult<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::Validation(format!("{}: not a file name", path.display())))
}

fn check_inputs(inputs: &[PathBuf]) -> CliResult<()> {
    if inputs.is_empty() {
        return Err(CliError::Validation("no input files given".into()));
    }
    if let Some(p) = inputs.iter().find(|p| !p.is_file()) {
        return Err(CliError::Validation(format!("{}: no such file", p.display())));
    }
    Ok(())
}

/// Output file for each input: `out` itself for a single input when it names
/// a `.wav` file, otherwise `<out>/<stem><suffix>.wav`.
fn output_paths(inputs: &[PathBuf], out: Option<&Path>, default_dir: &str, suffix: &str) -> CliResult<Vec<PathBuf>> {
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(default_dir));
    let is_file = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let paths = if is_file {
        if inputs.len() != 1 {
            return Err(CliError::Validation(format!("{} names one file but {} inputs were given", out.display(), inputs.len())));
        }
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        vec![out]
    } else {
        create_dir(&out)?;
        inputs.iter().map(|p| Ok(out.join(format!("{}{suffix}.wav", stem(p)?)))).collect::<CliResult<Vec<_>>>()?
    };
    let unique: BTreeSet<&PathBuf> = paths.iter().collect();
    if unique.len() != paths.len() {
        return Err(CliError::Validation("two inputs map to the same output file".into()));
    }
    for (i, o) in inputs.iter().zip(&paths) {
        if o.exists() && fs::canonicalize(i).ok() == fs::canonicalize(o).ok() {
            return Err(CliError::Validation(format!("{}: output would overwrite the input", o.display())));
        }
    }
    Ok(paths)
}

fn iva_config(s: &Settings) -> IvaConfig {
    IvaConfig { iterations: s.iva_iters, ..IvaConfig::default() }
}

/// Loads the weights named in `s` and binds them to the preset.
pub fn load_enhancer(s: &Settings) -> CliResult<Enhancer> {
    let cfg = ModelConfig::preset(&s.preset)?;
    let path = s.weights.as_ref().ok_or_else(|| CliError::Validation("--weights is required".into()))?;
    let bytes = fs::read(path).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    let weights = load_weights(&bytes).map_err(|e| CliError::from(e).context(path))?;
    let iva = (!s.no_iva).then(|| iva_config(s));
    Enhancer::new(&cfg, &weights, iva).map_err(|e| CliError::from(e).context(path))
}

/// Enhances one recording in memory.
pub fn enhance_file(enhancer: &Enhancer, input: &Path) -> CliResult<Waveform> {
    let wave = read_wav(input)?;
    let out = enhancer.enhance(&wave).map_err(|e| CliError::from(e).context(input))?;
    if out.iva_bypassed {
        log::warn!("{}: IVA bypassed on degenerate input", input.display());
    }
    Ok(out.speech)
}

/// Writes one enhanced mono file per stereo input; returns the output paths.
pub fn cmd_enhance(inputs: &[PathBuf], s: &Settings) -> CliResult<Vec<PathBuf>> {
    check_inputs(inputs)?;
    let enhancer = load_enhancer(s)?;
    let outputs = output_paths(inputs, s.out.as_deref(), "enhanced", "")?;
    let results: Vec<CliResult<()>> = pool(s.jobs)?.install(|| {
        inputs
            .par_iter()
            .zip(&outputs)
            .map(|(i, o)| {
                let speech = enhance_file(&enhancer, i)?;
                write_wav(o, &speech)?;
                log::info!("{} -> {}", i.display(), o.display());
                Ok(())
            })
            .collect()
    });
    results.into_iter().collect::<CliResult<()>>()?;
    Ok(outputs)
}

/// IVA-only separation; writes `<stem>_speech.wav` and `<stem>_noise.wav`.
pub fn cmd_separate(inputs: &[PathBuf], s: &Settings) -> CliResult<Vec<[PathBuf; 2]>> {
    check_inputs(inputs)?;
    let iva = iva_config(s);
    let out = s.out.clone().unwrap_or_else(|| PathBuf::from("separated"));
    let speech = output_paths(inputs, Some(&out), "", "_speech")?;
    let noise = output_paths(inputs, Some(&out), "", "_noise")?;
    let pairs: Vec<[PathBuf; 2]> = speech.into_iter().zip(noise).map(|(a, b)| [a, b]).collect();
    let results: Vec<CliResult<()>> = pool(s.jobs)?.install(|| {
        inputs
            .par_iter()
            .zip(&pairs)
            .map(|(i, [sp, no])| {
                let wave = read_wav(i)?;
                let sep = separate(&wave, &iva).map_err(|e| CliError::from(e).context(i))?;
                write_wav(sp, &Waveform::mono(sep.sample_rate, sep.channels[0].clone())?)?;
                write_wav(no, &Waveform::mono(sep.sample_rate, sep.channels[1].clone())?)?;
                Ok(())
            })
            .collect()
    });
    results.into_iter().collect::<CliResult<()>>()?;
    Ok(pairs)
}

/// Sorted `.wav` files directly inside `dir`.
pub fn list_wavs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

fn read_mono(path: &Path, sample_rate: u32) -> CliResult<Vec<f64>> {
    let w = read_wav(path)?;
    if w.n_channels() != 1 || w.sample_rate != sample_rate || w.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: need non-empty mono {sample_rate} Hz audio, got {} channel(s) at {} Hz",
            path.display(),
            w.n_channels(),
            w.sample_rate
        )));
    }
    Ok(w.channels.into_iter().next().unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub speech_dir: PathBuf,
    pub noise_dir: PathBuf,
    pub n_scenes: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub max_order: Option<usize>,
    pub constraints: SceneConstraints,
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Renders `n_scenes` mixture/target pairs into `out/mix` and `out/target`
/// and writes `out/manifest.jsonl`.
pub fn cmd_simulate(o: &SimulateOptions) -> CliResult<Vec<ManifestRecord>> {
    let speech_files = list_wavs(&o.speech_dir)?;
    let noise_files = list_wavs(&o.noise_dir)?;
    if speech_files.is_empty() || noise_files.is_empty() {
        return Err(CliError::Validation("speech and noise directories must each contain at least one .wav file".into()));
    }
    let fs_ = o.constraints.sample_rate;
    let speech: Vec<Vec<f64>> = speech_files.iter().map(|p| read_mono(p, fs_)).collect::<CliResult<_>>()?;
    let noise: Vec<Vec<f64>> = noise_files.iter().map(|p| read_mono(p, fs_)).collect::<CliResult<_>>()?;
    for sub in ["mix", "target"] {
        create_dir(&o.out.join(sub))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let draws: Vec<(u64, usize, usize)> = (0..o.n_scenes)
        .map(|_| (rng.random(), rng.random_range(0..speech.len()), rng.random_range(0..noise.len())))
        .collect();
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();

    let records: Vec<CliResult<ManifestRecord>> = pool(o.jobs)?.install(|| {
        draws
            .par_iter()
            .enumerate()
            .map(|(id, &(scene_seed, si, ni))| {
                let scene = sample_scene(scene_seed, &o.constraints)?;
                let r = render_scene(&scene, &speech[si], &noise[ni], o.max_order)?;
                let mixture = format!("mix/scene_{id:05}.wav");
                let target = format!("target/scene_{id:05}.wav");
                write_wav(&o.out.join(&mixture), &r.mixture)?;
                write_wav(&o.out.join(&target), &r.target)?;
                Ok(ManifestRecord {
                    id,
                    seed: scene_seed,
                    scene,
                    speech_file: name(&speech_files[si]),
                    noise_file: name(&noise_files[ni]),
                    measured_snr_db: r.measured_snr_db,
                    scale: r.scale,
                    mixture,
                    target,
                })
            })
            .collect()
    });
    let records = records.into_iter().collect::<CliResult<Vec<_>>>()?;
    let mut text = String::new();
    for r in &records {
        let line = serde_json::to_string(r).map_err(|e| CliError::Validation(e.to_string()))?;
        text.push_str(&line);
        text.push('\n');
    }
    let path = o.out.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(records)
}

/// Reads a manifest written by [`cmd_simulate`].
pub fn read_manifest(path: &Path) -> CliResult<Vec<ManifestRecord>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CliError::Validation(format!("{}: {e}", path.display()))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileScore {
    pub name: String,
    pub si_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EvalReport {
    pub files: Vec<FileScore>,
    pub mean_si_snr_db: Option<f64>,
    /// Files present in only one of the two directories.
    pub missing: Vec<String>,
    /// Pairs that could not be scored.
    pub errors: Vec<String>,
}

impl EvalReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty() && self.errors.is_empty()
    }
}

/// SI-SNR of each estimate against the same-named reference (first channels).
pub fn cmd_eval(est_dir: &Path, ref_dir: &Path) -> CliResult<EvalReport> {
    let names = |dir: &Path| -> CliResult<BTreeSet<String>> {
        Ok(list_wavs(dir)?.iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect())
    };
    let est = names(est_dir)?;
    let refs = names(ref_dir)?;
    let mut report = EvalReport { missing: est.symmetric_difference(&refs).cloned().collect(), ..Default::default() };
    for name in est.intersection(&refs) {
        let score = (|| -> CliResult<f64> {
            let e = read_wav(&est_dir.join(name))?;
            let r = read_wav(&ref_dir.join(name))?;
            if e.len() != r.len() {
                return Err(CliError::Validation(format!("length {} vs reference {}", e.len(), r.len())));
            }
            Ok(si_snr(&e.channels[0], &r.channels[0])?)
        })();
        match score {
            Ok(si_snr_db) => report.files.push(FileScore { name: name.clone(), si_snr_db }),
            Err(e) => report.errors.push(format!("{name}: {e}")),
        }
    }
    if !report.files.is_empty() {
        report.mean_si_snr_db = Some(report.files.iter().map(|f| f.si_snr_db).sum::<f64>() / report.files.len() as f64);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InspectReport {
    pub preset: String,
    pub config: String,
    pub params: usize,
    /// Learnable parameters per layer, in build order.
    pub param_breakdown: Vec<(String, usize)>,
    pub network_macs_per_second: f64,
    pub mac_breakdown: Vec<(String, f64)>,
    pub iva_iterations: usize,
    pub iva_macs_per_second_per_iteration: f64,
    pub iva_macs_per_second: f64,
    pub total_macs_per_second: f64,
}

/// Layer a tensor belongs to: its name without the final component.
fn layer_of(tensor: &str) -> &str {
    tensor.rsplit_once('.').map_or(tensor, |(l, _)| l)
}

pub fn cmd_inspect(preset: &str, iva_iters: usize) -> CliResult<InspectReport> {
    let cfg = ModelConfig::preset(preset)?;
    let rec = layout(&cfg)?;
    let mut param_breakdown: Vec<(String, usize)> = Vec::new();
    for t in rec.tensors.iter().filter(|t| t.kind.learnable()) {
        let layer = layer_of(&t.name);
        match param_breakdown.last_mut() {
            Some((l, n)) if l == layer => *n += t.numel(),
            _ => param_breakdown.push((layer.to_string(), t.numel())),
        }
    }
    let stft = StftConfig::default();
    let iva = IvaConfig { iterations: iva_iters, ..IvaConfig::default() };
    let macs = mac_report(&cfg, &stft, &iva)?;
    Ok(InspectReport {
        preset: preset.to_string(),
        config: cfg.to_string(),
        params: count_params(&cfg)?,
        param_breakdown,
        network_macs_per_second: macs.network,
        mac_breakdown: macs.layers,
        iva_iterations: iva_iters,
        iva_macs_per_second_per_iteration: iva_macs_per_sweep_per_second(&stft),
        iva_macs_per_second: macs.iva,
        total_macs_per_second: macs.total,
    })
}

impl std::fmt::Display for InspectReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "preset {}: {}", self.preset, self.config)?;
        writeln!(f, "parameters: {} ({:.2} k)", self.params, self.params as f64 / 1e3)?;
        for (layer, n) in &self.param_breakdown {
            writeln!(f, "  {layer:<32} {n:>8}")?;
        }
        writeln!(f, "network MACs/s: {:.2} M", self.network_macs_per_second / 1e6)?;
        for (layer, m) in &self.mac_breakdown {
            writeln!(f, "  {layer:<32} {:>10.4} M", m / 1e6)?;
        }
        writeln!(
            f,
            "IVA MACs/s: {:.3} M per iteration, {:.2} M for {} iterations",
            self.iva_macs_per_second_per_iteration / 1e6,
            self.iva_macs_per_second / 1e6,
            self.iva_iterations
        )?;
        write!(f, "total MACs/s: {:.2} M", self.total_macs_per_second / 1e6)
    }
}

/// Writes seeded random weights for `preset` to `out`.
pub fn cmd_init_weights(preset: &str, seed: u64, out: &Path) -> CliResult<usize> {
    let cfg = ModelConfig::preset(preset)?;
    let w = init_random(&cfg, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(out, save_weights(&w)).map_err(|e| CliError::io(out, e))?;
    Ok(w.numel())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_names() {
        assert_eq!(layer_of("enc.conv1.conv.weight"), "enc.conv1.conv");
        assert_eq!(layer_of("fuse"), "fuse");
    }

    #[test]
    fn output_path_rules() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("sub/b.wav");
        let single = output_paths(std::slice::from_ref(&a), Some(&dir.path().join("o/x.wav")), "", "").unwrap();
        assert_eq!(single, vec![dir.path().join("o/x.wav")]);
        assert!(output_paths(&[a.clone(), b.clone()], Some(&dir.path().join("x.wav")), "", "").is_err());
        let many = output_paths(&[a.clone(), b], Some(&dir.path().join("out")), "", "_s").unwrap();
        assert_eq!(many[1], dir.path().join("out/b_s.wav"));
        assert!(output_paths(&[a.clone(), dir.path().join("c/a.wav")], Some(dir.path()), "", "").is_err());
        fs::write(&a, b"x").unwrap();
        assert!(output_paths(std::slice::from_ref(&a), Some(dir.path()), "", "").is_err());
    }
}
