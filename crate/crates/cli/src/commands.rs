//! Command implementations: each writes its artifacts under the output
//! directory and returns the paths it produced.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use slergm::gof::{ess, gof_report, posterior_predictive, prior_predictive};
use slergm::inference::{fit, run_fingerprint, Chain, PriorMode};
use slergm::network::{decompose, read_attributes, read_edge_list, LayerStack};
use slergm::stats::ModelSpec;

use crate::config::RunConfig;

fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(bytes)))
}

/// Everything needed to re-run a command and to bind chains to inputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub input_hashes: Vec<(String, String)>,
    pub seeds: Vec<u64>,
    pub chain_fingerprints: Vec<String>,
    pub chain_files: Vec<PathBuf>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Loads the stack referenced by the config's data block.
pub fn load_stack(cfg: &RunConfig) -> Result<(LayerStack, Vec<(String, String)>)> {
    let edges = cfg
        .data
        .edges
        .as_ref()
        .context("config is missing data.edges")?;
    let attrs_path = cfg
        .data
        .attributes
        .as_ref()
        .context("config is missing data.attributes")?;
    let (mut net, k_layers) = read_edge_list(BufReader::new(
        fs::File::open(edges).with_context(|| format!("cannot open {}", edges.display()))?,
    ))?;
    let attrs = read_attributes(BufReader::new(
        fs::File::open(attrs_path).with_context(|| format!("cannot open {}", attrs_path.display()))?,
    ))?;
    if attrs.n_nodes() != net.n_nodes() {
        bail!(
            "attribute file covers {} nodes, edge list has {}",
            attrs.n_nodes(),
            net.n_nodes()
        );
    }
    net.attrs = attrs;
    // quantized weights: layer k holds |w| >= k
    let thresholds: Vec<f64> = (2..=k_layers).map(|k| k as f64).collect();
    let stack = decompose(&net, &thresholds)?;
    let hashes = vec![
        (edges.display().to_string(), file_hash(edges)?),
        (attrs_path.display().to_string(), file_hash(attrs_path)?),
    ];
    Ok((stack, hashes))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn cmd_ingest(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let spons = cfg
        .ingest
        .sponsorship
        .as_ref()
        .context("config is missing ingest.sponsorship")?;
    let actors = cfg
        .ingest
        .actors
        .as_ref()
        .context("config is missing ingest.actors")?;
    ensure_dir(out_dir)?;
    let outcome = slergm::ingest::ingest(
        BufReader::new(fs::File::open(spons).with_context(|| format!("cannot open {}", spons.display()))?),
        BufReader::new(fs::File::open(actors).with_context(|| format!("cannot open {}", actors.display()))?),
        &cfg.ingest.densities,
    )?;
    let edges_path = out_dir.join("network.edges");
    let attrs_path = out_dir.join("attributes.csv");
    let mut w = BufWriter::new(fs::File::create(&edges_path)?);
    slergm::network::write_edge_list(&outcome.network, outcome.stack.n_layers(), &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(&attrs_path)?);
    slergm::network::write_attributes(&outcome.stack.attrs, &mut w)?;
    w.flush()?;
    let provenance = serde_json::json!({
        "command": "ingest",
        "sponsorship": spons.display().to_string(),
        "actors": actors.display().to_string(),
        "sponsorship_sha256": file_hash(spons)?,
        "actors_sha256": file_hash(actors)?,
        "summary": outcome.summary,
        "outputs": {
            "edges": edges_path.display().to_string(),
            "attributes": attrs_path.display().to_string(),
        },
    });
    fs::write(out_dir.join("provenance.json"), serde_json::to_string_pretty(&provenance)?)?;
    println!("ingested {} actors into {} layers", outcome.stack.n_nodes(), outcome.stack.n_layers());
    for (k, (d, pf)) in outcome
        .summary
        .achieved_densities
        .iter()
        .zip(&outcome.summary.positive_fractions)
        .enumerate()
    {
        match pf {
            Some(pf) => println!("  layer {}: density {:.4}, positive fraction {:.3}", k + 1, d, pf),
            None => println!("  layer {}: density {:.4}, empty", k + 1, d),
        }
    }
    for warning in &outcome.summary.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn resolve_model_prior(cfg: &RunConfig, stack: &LayerStack) -> Result<(ModelSpec, PriorMode)> {
    let model = cfg.model.resolve(stack.n_layers())?;
    let p = model.n_stats()?;
    let priors = cfg.prior.resolve(p)?;
    Ok((model, PriorMode::Hierarchical(priors)))
}

pub fn cmd_fit(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let (stack, input_hashes) = load_stack(cfg)?;
    let (model, prior) = resolve_model_prior(cfg, &stack)?;
    ensure_dir(out_dir)?;

    let chain_configs: Vec<_> = (0..cfg.mcmc.chains).map(|c| cfg.mcmc.to_core(c)).collect();
    let chains: Vec<Chain> = {
        use rayon::prelude::*;
        chain_configs
            .par_iter()
            .map(|mc| fit(&stack, &model, &prior, mc))
            .collect::<slergm::Result<Vec<_>>>()?
    };

    let mut chain_files = Vec::new();
    let mut fingerprints = Vec::new();
    let mut seeds = Vec::new();
    let mut acceptance = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        let path = out_dir.join(format!("chain_{c}.csv"));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        chain.to_csv(&mut w)?;
        w.flush()?;
        let rates: Vec<f64> = (0..chain.n_blocks()).map(|b| chain.acceptance_rate(b)).collect();
        acceptance.push(serde_json::json!({
            "chain": c,
            "seed": chain.seed,
            "acceptance_rates": rates,
            "stored_draws": chain.len(),
        }));
        println!(
            "chain {c}: {} stored draws, acceptance {:?}",
            chain.len(),
            (0..chain.n_blocks())
                .map(|b| (chain.acceptance_rate(b) * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>()
        );
        chain_files.push(path);
        fingerprints.push(chain.fingerprint.clone());
        seeds.push(chain.seed);
    }
    fs::write(
        out_dir.join("acceptance.json"),
        serde_json::to_string_pretty(&serde_json::json!({ "chains": acceptance }))?,
    )?;
    Manifest {
        command: "fit".into(),
        config: cfg.clone(),
        input_hashes,
        seeds,
        chain_fingerprints: fingerprints,
        chain_files,
    }
    .write(&out_dir.join("manifest.json"))?;
    Ok(())
}

fn load_chain(cfg: &RunConfig, chain_path: &Path, manifest_path: &Path, stack: &LayerStack) -> Result<Chain> {
    let manifest = Manifest::load(manifest_path)?;
    let idx = manifest
        .chain_files
        .iter()
        .position(|p| {
            p == chain_path || p.file_name() == chain_path.file_name()
        })
        .with_context(|| format!("{} is not listed in {}", chain_path.display(), manifest_path.display()))?;
    let seed = manifest.seeds[idx];
    let recorded = manifest.chain_fingerprints[idx].clone();
    // the chain must match the data/model/config we just resolved
    let (model, prior) = resolve_model_prior(&manifest.config, stack)?;
    let expected = run_fingerprint(stack, &model, &prior, &manifest.config.mcmc.to_core(idx));
    if expected != recorded {
        bail!("fingerprint mismatch: chain was fitted to different data, model, or settings");
    }
    let _ = cfg;
    let chain = Chain::from_csv(
        BufReader::new(fs::File::open(chain_path)?),
        seed,
        recorded,
    )?;
    if chain.is_empty() {
        bail!("chain file {} contains no draws", chain_path.display());
    }
    Ok(chain)
}

pub fn cmd_gof(cfg: &RunConfig, chain_path: &Path, manifest_path: &Path, out_dir: &Path) -> Result<()> {
    let (stack, _) = load_stack(cfg)?;
    let model = cfg.model.resolve(stack.n_layers())?;
    let p = model.n_stats()?;
    let priors = cfg.prior.resolve(p)?;
    let chain = load_chain(cfg, chain_path, manifest_path, &stack)?;
    ensure_dir(out_dir)?;

    let prior_ens = prior_predictive(
        &stack,
        &model,
        &priors,
        cfg.predictive.n_sims,
        cfg.predictive.sim_iters,
        cfg.predictive.seed,
    )?;
    let prior_report = gof_report(&prior_ens, &stack, &model)?;
    fs::write(out_dir.join("prior_predictive.json"), prior_report.to_json())?;
    let mut w = BufWriter::new(fs::File::create(out_dir.join("prior_predictive.csv"))?);
    prior_report.to_csv(&mut w)?;
    w.flush()?;

    let post_ens = posterior_predictive(
        &chain,
        &stack,
        &model,
        cfg.predictive.n_sims,
        cfg.predictive.sim_iters,
        cfg.predictive.seed.wrapping_add(1),
    )?;
    let post_report = gof_report(&post_ens, &stack, &model)?;
    fs::write(out_dir.join("posterior_predictive.json"), post_report.to_json())?;
    let mut w = BufWriter::new(fs::File::create(out_dir.join("posterior_predictive.csv"))?);
    post_report.to_csv(&mut w)?;
    w.flush()?;

    let contained = post_report.stats.iter().filter(|s| s.contained).count();
    println!(
        "posterior predictive: {}/{} statistics contained in the central 95% band",
        contained,
        post_report.stats.len()
    );
    if post_report.degenerate_quantiles {
        eprintln!("warning: too few simulations for meaningful quantiles");
    }
    Ok(())
}

/// Forward simulation: prior predictive by default, posterior predictive
/// when a chain is given. Writes per-simulation statistics in long format.
pub fn cmd_simulate(cfg: &RunConfig, chain: Option<(&Path, &Path)>, out_dir: &Path) -> Result<()> {
    let (stack, _) = load_stack(cfg)?;
    let model = cfg.model.resolve(stack.n_layers())?;
    let p = model.n_stats()?;
    ensure_dir(out_dir)?;

    let ensemble = match chain {
        Some((chain_path, manifest_path)) => {
            let chain = load_chain(cfg, chain_path, manifest_path, &stack)?;
            posterior_predictive(&chain, &stack, &model, cfg.predictive.n_sims, cfg.predictive.sim_iters, cfg.predictive.seed)?
        }
        None => {
            let priors = cfg.prior.resolve(p)?;
            prior_predictive(&stack, &model, &priors, cfg.predictive.n_sims, cfg.predictive.sim_iters, cfg.predictive.seed)?
        }
    };

    let mut w = BufWriter::new(fs::File::create(out_dir.join("simulated_stats.csv"))?);
    writeln!(w, "sim,layer,statistic,value")?;
    for (sim, layers) in ensemble.layer_stats.iter().enumerate() {
        for (b, values) in layers.iter().enumerate() {
            for (s, v) in values.iter().enumerate() {
                writeln!(w, "{},{},{},{}", sim, b + 2, ensemble.stat_names[b][s], v)?;
            }
        }
    }
    w.flush()?;
    println!("wrote {} simulations", ensemble.n_sims);
    Ok(())
}

pub fn cmd_diagnose(chain_path: &Path, manifest_path: &Path, out_dir: &Path) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let idx = manifest
        .chain_files
        .iter()
        .position(|p| p == chain_path || p.file_name() == chain_path.file_name())
        .with_context(|| format!("{} is not listed in the manifest", chain_path.display()))?;
    let chain = Chain::from_csv(
        BufReader::new(fs::File::open(chain_path)?),
        manifest.seeds[idx],
        manifest.chain_fingerprints[idx].clone(),
    )?;
    if chain.is_empty() {
        bail!("chain file {} contains no draws", chain_path.display());
    }
    ensure_dir(out_dir)?;

    let mut w = BufWriter::new(fs::File::create(out_dir.join("ess.csv"))?);
    writeln!(w, "parameter,ess,degenerate")?;
    let mut trace = BufWriter::new(fs::File::create(out_dir.join("trace.csv"))?);
    writeln!(trace, "parameter,iter,value")?;
    let mut report_series = |name: &str, series: &[f64], w: &mut BufWriter<fs::File>, trace: &mut BufWriter<fs::File>| -> Result<()> {
        let result = ess(series)?;
        writeln!(w, "{},{},{}", name, result.ess, result.degenerate)?;
        if result.degenerate {
            eprintln!("warning: column {name} is constant");
        }
        for (draw, v) in series.iter().enumerate() {
            writeln!(trace, "{},{},{}", name, draw, v)?;
        }
        Ok(())
    };
    for b in 0..chain.n_blocks() {
        for (s, stat) in chain.stat_names[b].iter().enumerate() {
            let series = chain.phi_series(b, s);
            report_series(&format!("phi[{}].{}", b + 1, stat), &series, &mut w, &mut trace)?;
        }
    }
    for (s, stat) in chain.mu_names.clone().iter().enumerate() {
        let series = chain.mu_series(s);
        report_series(&format!("mu.{stat}"), &series, &mut w, &mut trace)?;
    }
    w.flush()?;
    trace.flush()?;

    let rates: Vec<f64> = (0..chain.n_blocks()).map(|b| chain.acceptance_rate(b)).collect();
    let mut w = BufWriter::new(fs::File::create(out_dir.join("acceptance.csv"))?);
    writeln!(w, "block,acceptance_rate")?;
    for (b, r) in rates.iter().enumerate() {
        writeln!(w, "{},{}", b + 1, r)?;
    }
    w.flush()?;
    println!("diagnostics for {} draws written to {}", chain.len(), out_dir.display());
    Ok(())
}

pub fn cmd_demo_data(seed: u64, out_dir: &Path) -> Result<()> {
    use slergm::ingest::synthetic::{synthetic_sponsorship, SyntheticConfig};
    ensure_dir(out_dir)?;
    let cfg = SyntheticConfig { seed, ..SyntheticConfig::default() };
    let data = synthetic_sponsorship(&cfg)?;
    fs::write(out_dir.join("sponsorship.csv"), data.sponsorship_csv())?;
    fs::write(out_dir.join("actors.csv"), data.actors_csv())?;
    println!(
        "wrote demo sponsorship data ({} actors, {} pairs) to {}",
        cfg.n_actors,
        data.pairs.len(),
        out_dir.display()
    );
    Ok(())
}
