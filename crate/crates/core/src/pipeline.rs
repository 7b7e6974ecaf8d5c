//! Dataset expansion and the reproducibility manifest.
//!
//! Every output is keyed by `(sample id, plan entry, replicate)`. Its random
//! stream is derived from that key alone, so outputs can be produced in any
//! order and on any number of threads with identical bytes.
//!
//! The manifest is line-delimited JSON: one `header` line followed by one
//! `record` line per emitted sample.

use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_dataset, FOV_DIR, IMAGES_DIR, MASKS_DIR};
use crate::error::{Error, Result};
use crate::plan::{AugmentationPlan, ChannelPolicy, Composition};
use crate::png_io::{encode_png, image_bytes, mask_bytes, write_atomic};
use crate::raster::Sample;
use crate::rng::{derive_stream, SeedSpec, STREAM_VERSION};
use crate::transform::{apply_all, ResolvedTransform};

pub const ENGINE_VERSION: &str = concat!("vessel-aug ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub engine_version: String,
    pub stream_version: String,
    pub plan_hash: String,
    pub master_seed: u64,
    pub composition: Composition,
    /// How source images were loaded; replay must load them the same way.
    pub channels: ChannelPolicy,
    pub include_originals: bool,
    pub sources: usize,
    pub outputs: usize,
    /// The plan's free-text description, e.g. noting that parameters are engineering defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    /// Stem shared by the image, mask and fov files of this output.
    pub stem: String,
    pub source_id: String,
    /// `None` for an unmodified original.
    pub entry_index: Option<usize>,
    pub replicate_index: Option<u32>,
    pub transforms: Vec<ResolvedTransform>,
    pub seed_digest: Option<String>,
    pub width: usize,
    pub height: usize,
    pub has_fov: bool,
    /// SHA-256 over the quantized output rasters.
    pub checksum: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(ManifestHeader),
    Record(ManifestRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Line::Header(self.header.clone())).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(&Line::Record(r.clone())).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut header = None;
        let mut records = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line =
                serde_json::from_str(&line).map_err(|e| Error::Manifest(format!("line {}: {e}", n + 1)))?;
            match parsed {
                Line::Header(h) if header.is_none() => header = Some(h),
                Line::Header(_) => return Err(Error::Manifest(format!("line {}: second header", n + 1))),
                Line::Record(r) => records.push(r),
            }
        }
        let header = header.ok_or_else(|| Error::Manifest("missing header line".into()))?;
        Ok(Self { header, records })
    }

    pub fn find(&self, stem: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.stem == stem)
    }
}

/// An output that could not be produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub stem: String,
    pub source_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub manifest: Manifest,
    pub failures: Vec<SampleFailure>,
}

impl Expansion {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Output stem for an augmented sample.
pub fn output_stem(source_id: &str, entry: usize, replicate: u32) -> String {
    format!("aug_{entry}_{replicate}_{source_id}")
}

/// SHA-256 over dimensions and the 8-bit payloads of all planes.
pub fn sample_checksum(sample: &Sample) -> String {
    let mut h = Sha256::new();
    h.update(b"vessel-aug/sample/v1");
    for v in [sample.width(), sample.height(), sample.image.channels()] {
        h.update((v as u64).to_le_bytes());
    }
    h.update(image_bytes(&sample.image));
    h.update(mask_bytes(&sample.vessels));
    match &sample.fov {
        Some(f) => {
            h.update([1u8]);
            h.update(mask_bytes(f));
        }
        None => h.update([0u8]),
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
struct Job {
    source: usize,
    entry: Option<usize>,
    replicate: u32,
    stem: String,
}

fn plan_jobs(sources: &[Sample], plan: &AugmentationPlan) -> Result<Vec<Job>> {
    let mut jobs = Vec::with_capacity(plan.output_count(sources.len()));
    for (si, s) in sources.iter().enumerate() {
        if plan.include_originals {
            jobs.push(Job {
                source: si,
                entry: None,
                replicate: 0,
                stem: s.id.clone(),
            });
        }
        for (ei, e) in plan.entries.iter().enumerate() {
            for r in 0..e.count {
                jobs.push(Job {
                    source: si,
                    entry: Some(ei),
                    replicate: r,
                    stem: output_stem(&s.id, ei, r),
                });
            }
        }
    }
    let mut seen = HashSet::with_capacity(jobs.len());
    for j in &jobs {
        if !seen.insert(j.stem.as_str()) {
            return Err(Error::Collision(j.stem.clone()));
        }
    }
    Ok(jobs)
}

/// Resolves and applies the transforms of one `(entry, replicate)` output.
pub fn generate(
    source: &Sample,
    plan: &AugmentationPlan,
    entry: usize,
    replicate: u32,
) -> Result<(Sample, Vec<ResolvedTransform>, SeedSpec)> {
    let spec = SeedSpec::new(plan.master_seed, source.id.clone(), entry as u64, u64::from(replicate));
    let mut rng = derive_stream(&spec);
    let stages = match plan.composition {
        Composition::Single => entry..=entry,
        Composition::Chained => 0..=entry,
    };
    let mut current = source.clone();
    let mut resolved = Vec::new();
    for stage in stages {
        let t = plan.entries[stage]
            .transform
            .resolve(&mut rng, current.width(), current.height())?;
        let next = t.apply(&current)?;
        if !t.is_geometric() && (next.vessels != current.vessels || next.fov != current.fov) {
            return Err(Error::InvalidRaster(format!(
                "pixel transform {t:?} altered a mask"
            )));
        }
        current = next;
        resolved.push(t);
    }
    Ok((current, resolved, spec))
}

fn write_sample(out: &Path, stem: &str, sample: &Sample) -> Result<()> {
    let file = format!("{stem}.png");
    let color = if sample.image.channels() == 3 {
        png::ColorType::Rgb
    } else {
        png::ColorType::Grayscale
    };
    let (w, h) = (sample.width(), sample.height());
    let img = encode_png(w, h, color, &image_bytes(&sample.image))?;
    write_atomic(&out.join(IMAGES_DIR).join(&file), &img)?;
    let mask = encode_png(w, h, png::ColorType::Grayscale, &mask_bytes(&sample.vessels))?;
    write_atomic(&out.join(MASKS_DIR).join(&file), &mask)?;
    if let Some(fov) = &sample.fov {
        let f = encode_png(w, h, png::ColorType::Grayscale, &mask_bytes(fov))?;
        write_atomic(&out.join(FOV_DIR).join(&file), &f)?;
    }
    Ok(())
}

fn run_job(job: &Job, sources: &[Sample], plan: &AugmentationPlan, out: &Path) -> Result<ManifestRecord> {
    let source = &sources[job.source];
    let (mut sample, transforms, seed) = match job.entry {
        None => (source.clone(), Vec::new(), None),
        Some(e) => {
            let (s, t, spec) = generate(source, plan, e, job.replicate)?;
            (s, t, Some(spec))
        }
    };
    sample.id = job.stem.clone();
    write_sample(out, &job.stem, &sample)?;
    Ok(ManifestRecord {
        stem: job.stem.clone(),
        source_id: source.id.clone(),
        entry_index: job.entry,
        replicate_index: job.entry.map(|_| job.replicate),
        transforms,
        seed_digest: seed.map(|s| s.digest()),
        width: sample.width(),
        height: sample.height(),
        has_fov: sample.fov.is_some(),
        checksum: sample_checksum(&sample),
    })
}

/// Expands in-memory sources into `out`, writing images, masks, fov masks
/// and the manifest. Runs on the current rayon pool.
pub fn expand_samples(sources: &[Sample], plan: &AugmentationPlan, out: &Path) -> Result<Expansion> {
    plan.validate()?;
    let ids: HashSet<&str> = sources.iter().map(|s| s.id.as_str()).collect();
    if ids.len() != sources.len() {
        return Err(Error::Plan("duplicate source sample ids".into()));
    }
    let jobs = plan_jobs(sources, plan)?;

    let mut dirs = vec![IMAGES_DIR, MASKS_DIR];
    if sources.iter().any(|s| s.fov.is_some()) {
        dirs.push(FOV_DIR);
    }
    for d in dirs {
        let p = out.join(d);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }

    let results: Vec<Result<ManifestRecord>> = jobs
        .par_iter()
        .map(|job| run_job(job, sources, plan, out).map_err(|e| e.in_sample(&sources[job.source].id)))
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(SampleFailure {
                stem: job.stem.clone(),
                source_id: sources[job.source].id.clone(),
                message: e.to_string(),
            }),
        }
    }
    let manifest = Manifest {
        header: ManifestHeader {
            engine_version: ENGINE_VERSION.to_string(),
            stream_version: STREAM_VERSION.to_string(),
            plan_hash: plan.hash(),
            master_seed: plan.master_seed,
            composition: plan.composition,
            channels: plan.channels,
            include_originals: plan.include_originals,
            sources: sources.len(),
            outputs: records.len(),
            plan_description: plan.description.clone(),
        },
        records,
    };
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(Expansion { manifest, failures })
}

/// Loads the dataset at `source` and expands it into `out`.
pub fn expand_dataset(source: &Path, plan: &AugmentationPlan, out: &Path) -> Result<Expansion> {
    plan.validate()?;
    let samples = load_dataset(source, plan.channels)?;
    expand_samples(&samples, plan, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub sample: Sample,
    pub checksum: String,
    pub matches: bool,
    pub version_mismatch: bool,
}

/// Regenerates a recorded output from its source and resolved parameters.
pub fn replay(header: &ManifestHeader, record: &ManifestRecord, source: &Sample) -> Result<Replayed> {
    if source.id != record.source_id {
        return Err(Error::Manifest(format!(
            "record {} needs source {}, got {}",
            record.stem, record.source_id, source.id
        )));
    }
    let version_mismatch = header.engine_version != ENGINE_VERSION;
    if version_mismatch {
        log::warn!(
            "manifest written by {}, replaying with {ENGINE_VERSION}",
            header.engine_version
        );
    }
    let mut sample = apply_all(source, &record.transforms).map_err(|e| e.in_sample(&record.stem))?;
    sample.id = record.stem.clone();
    let checksum = sample_checksum(&sample);
    Ok(Replayed {
        matches: checksum == record.checksum,
        checksum,
        sample,
        version_mismatch,
    })
}
