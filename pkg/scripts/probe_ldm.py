#!/usr/bin/env python3
"""Short LDM feasibility probe: a complete (cosine-decayed) run at reduced
steps, followed by a 64-sample G-Usage evaluation. Used to check conditioning
strength before committing to the full desk run; not part of the deliverable
recipe."""

import json
import sys
import time

import torch

torch.set_num_threads(1)

from playout import desk
from playout.checkpoints import load_vae_checkpoint
from playout.config import TrainConfig
from playout.diffusion import train_ldm

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 2000

vae, vocab, _ = load_vae_checkpoint(desk.ARTIFACTS / "desk_vae.ckpt")
config = TrainConfig(**{**desk.LDM_CONFIG.to_dict(), "total_steps": steps,
                        "betas": desk.LDM_CONFIG.betas})
t0 = time.time()
model, log = train_ldm(
    desk.train_corpus(), vae, vocab, config, desk.LDM_ARCH,
    sampling_method="weighted", lr_schedule="cosine", verbose=True,
)
train_min = (time.time() - t0) / 60
t0 = time.time()
gu, n = desk.gusage_eval(model, count=64)
print(json.dumps({
    "steps": steps,
    "train_minutes": round(train_min, 1),
    "eval_minutes": round((time.time() - t0) / 60, 1),
    "g_usage_64": round(gu, 4),
    "pairs": n,
}))
