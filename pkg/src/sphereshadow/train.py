"""Joint training of the shadow renderer, the removal network and the discriminator."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .autodiff import Adam, NonFiniteError, Tensor, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import (
    NoValidWindowError,
    ShadowGenerator,
    crop_pair,
    has_valid_windows,
    pseudo_infrared,
    read_manifest,
)
from .losses import Discriminator, LossReport, discriminator_loss, total_loss
from .model import ModelDims, ShadowRemovalNet
from .sphere import SphericalConfig

log = logging.getLogger(__name__)

# order of the numbers stored under META_KEY in a checkpoint
META_FIELDS = ("dim", "num_heads", "window_size", "num_blocks", "embed_patch", "decoder_blocks", "radius", "pole_tol")
META_KEY = "meta.config"


class NonFiniteLossError(FloatingPointError):
    def __init__(self, step: int, component: str):
        super().__init__(f"non-finite {component} loss at step {step}")
        self.step = step
        self.component = component


@dataclass
class TrainingImage:
    visible: np.ndarray
    mask: np.ndarray
    infrared: Optional[np.ndarray]


def load_training_set(cfg: TrainConfig) -> List[TrainingImage]:
    """Load every manifest image that admits both kinds of crop."""
    manifest = read_manifest(cfg.train_manifest)
    manifest.validate()
    images = []
    for i, entry in enumerate(manifest.entries):
        vis, mask, ir, _ = manifest.load(i)
        if not has_valid_windows(mask, cfg.patch_size, cfg.coverage_hi, cfg.coverage_lo):
            log.warning("skipping %s: no valid %dpx crop pair", entry.image, cfg.patch_size)
            continue
        images.append(TrainingImage(vis, mask, ir))
    if not images:
        raise ValueError("no usable training images in the manifest")
    return images


def build_models(cfg: TrainConfig):
    seeds = np.random.SeedSequence(cfg.seed).generate_state(2)
    net = ShadowRemovalNet(cfg.model_dims(), cfg.sphere_config(), seed=int(seeds[0]))
    renderer = ShadowGenerator(3)
    disc = Discriminator(3, seed=int(seeds[1]))
    return net, renderer, disc


def model_state(net: ShadowRemovalNet, renderer: ShadowGenerator, disc: Discriminator) -> Dict[str, np.ndarray]:
    d = net.dims
    meta = [d.dim, d.num_heads, d.window_size, d.num_blocks, d.patch_size, d.decoder_blocks,
            net.cfg.radius, net.cfg.pole_tol]
    state = {META_KEY: np.array(meta, dtype=np.float64)}
    for prefix, module in (("net.", net), ("renderer.", renderer), ("disc.", disc)):
        state.update({prefix + k: v for k, v in module.state_dict().items()})
    return state


def _split(state: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    return {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}


def load_model(path: str) -> ShadowRemovalNet:
    """Rebuild the removal network stored in a training checkpoint."""
    state = load_checkpoint(path)
    if META_KEY not in state:
        raise ValueError(f"{path}: not a training checkpoint (no {META_KEY})")
    meta = dict(zip(META_FIELDS, state[META_KEY].tolist()))
    dims = ModelDims(
        dim=int(meta["dim"]),
        num_heads=int(meta["num_heads"]),
        window_size=int(meta["window_size"]),
        num_blocks=int(meta["num_blocks"]),
        patch_size=int(meta["embed_patch"]),
        decoder_blocks=int(meta["decoder_blocks"]),
    )
    net = ShadowRemovalNet(dims, SphericalConfig(radius=meta["radius"], pole_tol=meta["pole_tol"]))
    net.load_state_dict(_split(state, "net."))
    return net


class Trainer:
    """Deterministic training loop; everything random flows from ``cfg.seed``."""

    def __init__(self, cfg: TrainConfig, images: List[TrainingImage]):
        self.cfg = cfg
        self.images = images
        self.net, self.renderer, self.disc = build_models(cfg)
        self.opt_g = Adam(self.net.parameters() + self.renderer.parameters(), lr=cfg.lr)
        self.opt_d = Adam(self.disc.parameters(), lr=cfg.lr)
        self.weights = cfg.loss_weights()
        self.rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
        self.step = 0
        self._queue: List[int] = []

    def _next_index(self) -> int:
        if not self._queue:
            order = np.repeat(self.rng.permutation(len(self.images)), self.cfg.pairs_per_image)
            self._queue = order.tolist()
        return self._queue.pop(0)

    def sample_batch(self):
        """``(shadow, shadow_free, infrared_or_None)`` patch stacks for one step."""
        P = self.cfg.patch_size
        shadows, frees, irs = [], [], []
        misses = 0
        while len(shadows) < self.cfg.batch_size:
            img = self.images[self._next_index()]
            try:
                s, f, (_, (ft, fl)) = crop_pair(img.visible, img.mask, P, self.rng, self.cfg.coverage_hi, self.cfg.coverage_lo)
            except NoValidWindowError:
                misses += 1
                if misses > 10 * len(self.images):
                    raise
                continue
            shadows.append(s)
            frees.append(f)
            irs.append(None if img.infrared is None else img.infrared[:, ft : ft + P, fl : fl + P])
        ir = None if any(x is None for x in irs) else np.stack(irs)
        return np.stack(shadows), np.stack(frees), ir

    def train_step(self) -> LossReport:
        """One generator update then one discriminator update.

        Any non-finite value aborts the step before an optimizer touches the
        parameters, tagged with the step number and the failing stage.
        """
        self.step += 1
        shadow, free, real_ir = self.sample_batch()
        try:
            return self._update(shadow, free, real_ir)
        except NonFiniteError as exc:
            raise NonFiniteLossError(self.step, f"forward pass ({exc})") from exc

    def _update(self, shadow, free, real_ir) -> LossReport:

        fake = self.renderer(free)
        removal_input = fake.data.copy()
        infrared = pseudo_infrared(removal_input) if real_ir is None else real_ir
        result = self.net(Tensor(removal_input), Tensor(infrared))
        terms = total_loss(
            result.visible,
            result.infrared,
            result.output,
            free,
            fake,
            shadow,
            self.disc,
            self.weights,
            use_transformed=self.cfg.loss_features == "transformed",
            ortho_normalized=self.cfg.ortho_normalized,
        )
        self.opt_g.zero_grad()
        self.disc.zero_grad()
        bad = terms.report(0.0).is_finite()
        if bad is not None:
            raise NonFiniteLossError(self.step, bad)
        terms.total.backward()
        self.opt_g.step()

        self.disc.zero_grad()
        d_loss = discriminator_loss(self.disc, shadow, fake.detach())
        if not np.isfinite(d_loss.data):
            raise NonFiniteLossError(self.step, "adv_discriminator")
        d_loss.backward()
        self.opt_d.step()
        return terms.report(d_loss.item())

    def state(self) -> Dict[str, np.ndarray]:
        return model_state(self.net, self.renderer, self.disc)

    def save(self, path: str) -> None:
        save_checkpoint(path, self.state())


def _csv_line(values) -> str:
    return ",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in values) + "\n"


def train(cfg: TrainConfig, progress=None) -> Trainer:
    """Run ``cfg.iterations`` steps, writing ``loss_log.csv`` and checkpoints.

    ``progress`` is called with ``(step, report)`` after each step if given.
    """
    cfg.validate_paths()
    images = load_training_set(cfg)
    trainer = Trainer(cfg, images)
    os.makedirs(cfg.output_dir, exist_ok=True)
    os.makedirs(cfg.checkpoint_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.dumps())
    log_path = os.path.join(cfg.output_dir, "loss_log.csv")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(("step",) + LossReport.header()) + "\n")
        for _ in range(cfg.iterations):
            report = trainer.train_step()
            step = trainer.step
            if step % cfg.log_interval == 0:
                fh.write(_csv_line((step,) + report.values()))
                fh.flush()
            if step % cfg.checkpoint_interval == 0:
                trainer.save(os.path.join(cfg.checkpoint_dir, f"step_{step:06d}.ckpt"))
            if progress is not None:
                progress(step, report)
    trainer.save(os.path.join(cfg.checkpoint_dir, "final.ckpt"))
    return trainer
