"""Command-line interface: data generation, training, sampling, evaluation."""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .config import DenoiserArch, TrainConfig, VaeArch
from .guidelines import extract_guidelines, g_usage, sample_guidelines
from .layout import Layout, load_vocabulary
from .metrics import (
    docsim,
    fd_vg,
    fid,
    geometric_metrics,
    train_fdvg_encoder,
    train_fid_extractor,
)
from .persist import (
    guidelines_from_json,
    guidelines_to_json,
    layout_to_record,
    load_layouts_jsonl,
    record_to_layout,
    save_layouts_jsonl,
)
from .render import render_svg
from .sampler import GenerationRequest, inpaint, sample_layout
from .synthetic import generate_synthetic_dataset


def _load_corpus(path: str):
    with open(path, encoding="utf-8") as fh:
        first = json.loads(fh.readline())
    vocab = load_vocabulary(first.get("dataset", "synthetic"))
    return load_layouts_jsonl(path, vocab), vocab


def _load_layout(path: str):
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    vocab = load_vocabulary(record.get("dataset", "synthetic"))
    return record_to_layout(record, vocab), vocab


@click.group()
def main():
    """Guideline-conditioned layout generation toolkit."""


@main.command()
@click.option("--count", type=int, required=True)
@click.option("--max-elements", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def synth(count, max_elements, seed, out):
    """Generate a synthetic layout corpus as JSONL."""
    vocab = load_vocabulary("synthetic")
    layouts = generate_synthetic_dataset(count, max_elements=max_elements, seed=seed)
    save_layouts_jsonl(out, layouts, vocab)
    click.echo(f"wrote {len(layouts)} layouts to {out}")


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--method", type=click.Choice(["all", "uniform", "weighted", "weight_tiers"]),
              default="all", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def extract(in_path, method, seed, out):
    """Extract (optionally subsampled) guidelines for every layout."""
    layouts, _ = _load_corpus(in_path)
    with open(out, "w", encoding="utf-8") as fh:
        for i, layout in enumerate(layouts):
            if method == "all":
                gs = extract_guidelines(layout)
            else:
                gs = sample_guidelines(layout, method, rng_seed=seed + i)
            fh.write(json.dumps(guidelines_to_json(gs)) + "\n")
    click.echo(f"wrote guidelines for {len(layouts)} layouts to {out}")


@main.command("train-vae")
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--beta", type=float, default=1e-3, show_default=True)
@click.option("--d", "latent_dim", type=int, default=8, show_default=True)
@click.option("--steps", type=int, default=4000, show_default=True)
@click.option("--batch", type=int, default=64, show_default=True)
@click.option("--width", type=int, default=256, show_default=True)
@click.option("--layers", type=int, default=4, show_default=True)
@click.option("--warmup", type=int, default=500, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def train_vae_cmd(data, beta, latent_dim, steps, batch, width, layers, warmup, seed, out):
    """Train the first-stage VAE and write its checkpoint."""
    from .checkpoints import save_vae_checkpoint
    from .vae import train_vae

    layouts, vocab = _load_corpus(data)
    config = TrainConfig(
        beta_kl=beta, latent_dim=latent_dim, total_steps=steps, batch_size=batch,
        warmup_steps=warmup, seed=seed,
    )
    arch = VaeArch(width=width, layers=layers)
    model, log = train_vae(layouts, vocab, config, arch, verbose=True,
                           eval_layouts=layouts[:200], eval_every=max(steps // 8, 1))
    save_vae_checkpoint(out, model, vocab, config)
    click.echo(f"saved {out}; final loss {log[-1]['loss']:.4f}")


@main.command("train-ldm")
@click.option("--vae", "vae_path", type=click.Path(exists=True), required=True)
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--sampling", type=click.Choice(["all", "uniform", "weighted", "weight_tiers"]),
              default="weighted", show_default=True)
@click.option("--t", "--T", "t_steps", type=int, default=200, show_default=True)
@click.option("--steps", type=int, default=12000, show_default=True)
@click.option("--batch", type=int, default=64, show_default=True)
@click.option("--width", type=int, default=256, show_default=True)
@click.option("--layers", type=int, default=6, show_default=True)
@click.option("--warmup", type=int, default=500, show_default=True)
@click.option("--p-drop", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def train_ldm_cmd(vae_path, data, sampling, t_steps, steps, batch, width, layers,
                  warmup, p_drop, seed, out):
    """Train the latent diffusion stage on a trained first stage."""
    from .checkpoints import load_vae_checkpoint, save_ldm_checkpoint
    from .diffusion import train_ldm

    vae_model, vocab, meta = load_vae_checkpoint(vae_path)
    layouts, _ = _load_corpus(data)
    config = TrainConfig(
        latent_dim=vae_model.latent_dim, total_steps=steps, batch_size=batch,
        warmup_steps=warmup, p_drop=p_drop, diffusion_steps=t_steps, seed=seed,
    )
    arch = DenoiserArch(width=width, layers=layers, cond_width=width)
    model, log = train_ldm(layouts, vae_model, vocab, config, arch,
                           sampling_method=sampling, verbose=True,
                           eval_layouts=layouts[:64], eval_every=max(steps // 8, 1))
    digest = save_ldm_checkpoint(out, model)
    click.echo(f"saved {out} ({digest[:16]}); final loss {log[-1]['loss']:.4f}")


@main.command()
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--guides", type=click.Path(exists=True), required=True)
@click.option("--n", type=int, default=None)
@click.option("--w", type=float, default=1.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--svg", "svg_out", type=click.Path(), default=None)
def sample(ckpt, guides, n, w, seed, out, svg_out):
    """Sample one layout conditioned on a guideline file."""
    from .checkpoints import load_ldm_checkpoint

    model = load_ldm_checkpoint(ckpt)
    with open(guides, encoding="utf-8") as fh:
        gs = guidelines_from_json(json.load(fh))
    req = GenerationRequest(guidelines=gs, n=n, w=w, seed=seed)
    layout, _, _ = sample_layout(req, model)
    Path(out).write_text(json.dumps(layout_to_record(layout, model.vocab)) + "\n")
    if svg_out:
        Path(svg_out).write_text(render_svg(layout, model.vocab, guideline_set=gs,
                                            show_guidelines=True))
    click.echo(f"sampled {len(layout)} elements -> {out} (G-Usage "
               f"{g_usage(gs, layout):.3f})" if len(gs) else f"sampled -> {out}")


@main.command("inpaint")
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--layout", "layout_path", type=click.Path(exists=True), required=True)
@click.option("--mask", required=True, help="comma-separated element indices")
@click.option("--guides", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--w", type=float, default=1.5, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def inpaint_cmd(ckpt, layout_path, mask, guides, seed, w, out):
    """Regenerate the masked elements of a layout."""
    from .checkpoints import load_ldm_checkpoint
    from .layout import GuidelineSet

    model = load_ldm_checkpoint(ckpt)
    layout, _ = _load_layout(layout_path)
    idx = [int(tok) for tok in mask.split(",") if tok.strip()]
    if guides:
        with open(guides, encoding="utf-8") as fh:
            gs = guidelines_from_json(json.load(fh))
    else:
        gs = GuidelineSet(())
    result = inpaint(layout, idx, gs, seed, model, w=w)
    Path(out).write_text(json.dumps(layout_to_record(result, model.vocab)) + "\n")
    click.echo(f"inpainted indices {idx} -> {out}")


@main.command()
@click.option("--layout", "layout_path", type=click.Path(exists=True), required=True)
@click.option("--guides", type=click.Path(exists=True), default=None)
@click.option("--out", type=click.Path(), required=True)
@click.option("--canvas-px", type=int, default=360, show_default=True)
def render(layout_path, guides, out, canvas_px):
    """Render a layout (optionally with guideline overlay) to SVG."""
    layout, vocab = _load_layout(layout_path)
    gs = None
    if guides:
        with open(guides, encoding="utf-8") as fh:
            gs = guidelines_from_json(json.load(fh))
    svg = render_svg(layout, vocab, guideline_set=gs, show_guidelines=gs is not None,
                     canvas_px=canvas_px)
    Path(out).write_text(svg)
    click.echo(f"rendered {len(layout)} elements -> {out}")


@main.command("eval")
@click.option("--real", type=click.Path(exists=True), required=True)
@click.option("--gen", type=click.Path(exists=True), required=True)
@click.option("--metrics", "metric_list", default="fid,fdvg,gusage,geom", show_default=True)
@click.option("--guides", type=click.Path(exists=True), default=None,
              help="JSONL of the guideline sets the gen corpus was conditioned on")
@click.option("--sample-size", type=int, default=1024, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report", type=click.Path(), required=True)
def eval_cmd(real, gen, metric_list, guides, sample_size, seed, report):
    """Compute evaluation metrics between a real and a generated corpus."""
    real_layouts, vocab = _load_corpus(real)
    gen_layouts, _ = _load_corpus(gen)
    wanted = {m.strip() for m in metric_list.split(",") if m.strip()}
    out: dict = {"real": real, "gen": gen, "metrics": {}}
    if "fid" in wanted:
        extractor = train_fid_extractor(real_layouts, vocab, seed=seed)
        out["metrics"]["fid_like"] = {
            "value": fid(real_layouts, gen_layouts, extractor, vocab,
                         sample_size=sample_size, seed=seed),
            "provenance": "desk convolutional-autoencoder extractor, not Inception",
        }
    if "fdvg" in wanted:
        enc = train_fdvg_encoder(real_layouts, vocab, seed=seed)
        out["metrics"]["fd_vg"] = {
            "value": fd_vg(real_layouts, gen_layouts, enc, sample_size=sample_size, seed=seed),
            "encoder_recon_accuracy": enc.recon_accuracy,
            "provenance": "desk transformer autoencoder, mean-pooled embeddings",
        }
    if "gusage" in wanted:
        if guides:
            with open(guides, encoding="utf-8") as fh:
                sets = [guidelines_from_json(json.loads(line)) for line in fh if line.strip()]
        else:
            if len(real_layouts) < len(gen_layouts):
                raise click.UsageError("gusage without --guides needs paired real layouts")
            sets = [extract_guidelines(l) for l in real_layouts[: len(gen_layouts)]]
        values = [g_usage(gs, l) for gs, l in zip(sets, gen_layouts) if len(gs)]
        out["metrics"]["g_usage"] = {
            "value": float(np.mean(values)),
            "pairs": len(values),
            "provenance": "exact discrete-position intersection",
        }
    if "geom" in wanted:
        out["metrics"]["geometric"] = {
            "real": geometric_metrics(real_layouts),
            "gen": geometric_metrics(gen_layouts),
            "provenance": "formulas in docs/metrics.md",
        }
        n_pairs = min(len(real_layouts), len(gen_layouts))
        out["metrics"]["docsim"] = {
            "value": docsim(list(zip(real_layouts[:n_pairs], gen_layouts[:n_pairs]))),
            "provenance": "class-aware exponential position/size kernel, docs/metrics.md",
        }
    Path(report).write_text(json.dumps(out, indent=2) + "\n")
    click.echo(json.dumps(out["metrics"], indent=2))


@main.command()
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve(ckpt, host, port):
    """Serve the HTTP API for a trained checkpoint."""
    import uvicorn

    from .checkpoints import load_ldm_checkpoint
    from .service import create_app

    model = load_ldm_checkpoint(ckpt)
    click.echo(f"loaded checkpoint {model.checkpoint_id}")
    uvicorn.run(create_app(model), host=host, port=port)


if __name__ == "__main__":
    main()
