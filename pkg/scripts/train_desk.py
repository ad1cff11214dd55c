#!/usr/bin/env python3
"""Train the desk-scale checkpoints shipped under artifacts/.

Thin CLI over playout.desk, which holds the exact recipe. Stages:
  vae    first-stage model (required first)
  ldm    latent diffusion stage on top of artifacts/desk_vae.ckpt
  extras FD-VG encoder and the FID-like conv feature extractor
"""

from __future__ import annotations

import argparse
import json
import time

import torch

torch.set_num_threads(1)

from playout import desk
from playout.layout import load_vocabulary
from playout.vae import reconstruction_accuracy


def stage_vae():
    t0 = time.time()
    desk.ARTIFACTS.mkdir(exist_ok=True)
    model, vocab = desk.ensure_vae(verbose=True)
    acc = reconstruction_accuracy(model, desk.heldout_corpus(500), vocab)
    print(json.dumps({"heldout": acc, "minutes": (time.time() - t0) / 60}))


def stage_ldm():
    t0 = time.time()
    model = desk.ensure_ldm(verbose=True)
    gu, _ = desk.gusage_eval(model, count=64)
    print(json.dumps({"g_usage_64": gu, "minutes": (time.time() - t0) / 60}))


def stage_extras():
    enc = desk.ensure_fdvg(verbose=True)
    print("fdvg recon accuracy:", enc.recon_accuracy)
    desk.ensure_fid_extractor(verbose=True)
    print("fid extractor ready")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("stage", choices=["vae", "ldm", "extras"])
    args = parser.parse_args()
    {"vae": stage_vae, "ldm": stage_ldm, "extras": stage_extras}[args.stage]()
