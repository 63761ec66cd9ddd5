"""Training schedules and baseline pipelines.

Every stochastic draw comes from a named stream keyed on (seed, phase,
epoch, clip), so reruns of the same config are bit-identical; wall time is
recorded but never serialized. A run that produces a non-finite loss aborts
with a diagnostic rather than emitting garbage rows.
"""
from __future__ import annotations

import hashlib
import logging
import time
from pathlib import Path

import numpy as np

from .. import autodiff as af
from ..autodiff import Adam, SgdMomentum, Tensor
from ..channel import ChannelConfig, power_normalize, transmit
from ..link_cost import LinkBudget, semcom_total_cost, shannon_symbols, symbols_for_bits
from ..ratio_policy import (
    RatioPolicy,
    RewardBaseline,
    policy_gradient,
    ratio_map_to_pgm,
    ratio_probs,
    sample_ratio_map,
)
from ..reconstruction import (
    ReconPipeline,
    initial_reconstruction,
    initial_reconstruction_op,
    mse_loss,
    psnr,
    refine,
)
from ..ratio_policy import ratio_reward
from ..rng import stream
from ..semcom import (
    RanPolicy,
    RateMap,
    SemCoders,
    mask_and_flatten,
    ran_gradient_step,
    ran_reward,
    sample_rate_map,
    sce_encode,
    scd_decode,
    unflatten,
)
from ..sensor import CodedAperture, NoiseConfig, RatioMap, capture
from ..video import make_dataset
from .. import codec as tc
from .config import ExperimentConfig
from .report import RunRecord, RunRow

log = logging.getLogger("varisense.harness")


def _dataset(cfg: ExperimentConfig):
    train, test = make_dataset(cfg.n_train, cfg.n_test, cfg.height, cfg.width,
                               cfg.frames, kind=cfg.scene_kind,
                               velocity=cfg.velocity, seed=cfg.seed)
    log.info("split audit: %d train / %d test clips, disjoint by construction "
             "(seed %d)", len(train), len(test), cfg.seed)
    return train, test


APERTURE_DENSITY = 0.8  # open fraction; denser masks keep the surrogate
                        # reconstruction in a usable regime at desk scale


def _aperture(cfg: ExperimentConfig, seed: int | None = None) -> CodedAperture | None:
    if not cfg.mask_enabled:
        return None
    return CodedAperture.random(cfg.height, cfg.width, cfg.frames,
                                stream("aperture", seed if seed is not None else cfg.seed),
                                density=APERTURE_DENSITY)


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _check_finite(loss: float, context: str) -> None:
    if not np.isfinite(loss):
        raise RuntimeError(f"training diverged (non-finite loss) during {context}")


def _forward_recon(clip, rmap, aperture, pipe, noise_rng):
    data = capture(clip, rmap, aperture, NoiseConfig(), noise_rng)
    v0 = initial_reconstruction(data, None, aperture)
    return refine(v0, rmap, pipe, aperture)


class PolicyTrainer:
    """Score-function updates with a per-pixel mean-reward baseline and a
    slower rate on the generator's shared weights than on the logit grid.

    Both are pure variance/conditioning devices: the baseline leaves the
    expected gradient untouched, and without the rate split the shared
    weights absorb the map-wide mean preference faster than cells can
    differentiate, saturating the softmax into a uniform map.
    """

    NET_LR_RATIO = 0.02

    def __init__(self, policy: RatioPolicy, lr: float, momentum: float = 0.9):
        self.policy = policy
        net = [p for p in policy.params() if p is not policy.base]
        self.opt_base = SgdMomentum([policy.base], lr=lr, momentum=momentum)
        self.opt_net = SgdMomentum(net, lr=lr * self.NET_LR_RATIO, momentum=momentum)
        self.baseline = RewardBaseline()

    def step(self, sampled, reward) -> None:
        policy_gradient(self.policy, sampled, reward, self.baseline.update(reward))
        self.opt_base.step()
        self.opt_net.step()


def _evaluate_sensing(cfg, test_clips, rmap, pipe, aperture, tag) -> tuple[float, float]:
    values = []
    for i, clip in enumerate(test_clips):
        out = _forward_recon(clip, rmap, aperture, pipe,
                             stream("eval-noise", cfg.seed, tag, i))
        values.append(psnr(clip.data, out.data.transpose(1, 2, 0)))
    return float(np.mean(values)), float(np.std(values))


# ---------------------------------------------------------------------------
# sensing checkpoints

def _save_sensing(path: Path, cfg, pipe, counts, policy=None) -> str:
    tensors = {
        "meta.height": np.array(float(cfg.height)),
        "meta.width": np.array(float(cfg.width)),
        "meta.frames": np.array(float(cfg.frames)),
        "meta.mask_enabled": np.array(1.0 if cfg.mask_enabled else 0.0),
        "meta.seed": np.array(float(cfg.seed)),
        "ratio_counts": counts.astype(np.float64),
    }
    tensors.update(af.named_arrays("refine", pipe.params()))
    if policy is not None:
        tensors.update(af.named_arrays("policy", policy.params()))
    af.save_checkpoint(path, tensors)
    return _file_hash(path)


def load_sensing(path: str | Path) -> dict:
    """Restore the fixed-sensing pieces: ratio map, refinement net, aperture."""
    tensors = af.load_checkpoint(path)
    height = int(tensors["meta.height"])
    width = int(tensors["meta.width"])
    frames = int(tensors["meta.frames"])
    mask_enabled = bool(tensors["meta.mask_enabled"])
    seed = int(tensors["meta.seed"])
    counts = tensors["ratio_counts"].astype(np.int64)
    pipe = ReconPipeline(frames, mask_enabled=mask_enabled,
                         rng=stream("refine-load"))
    af.load_named_arrays("refine", pipe.params(), tensors)
    aperture = None
    if mask_enabled:
        aperture = CodedAperture.random(height, width, frames, stream("aperture", seed),
                                        density=APERTURE_DENSITY)
    return {"height": height, "width": width, "frames": frames,
            "mask_enabled": mask_enabled, "seed": seed,
            "ratio_map": RatioMap(counts, frames), "pipe": pipe, "aperture": aperture}


def nearest_checkpoint(record: RunRecord, target_r_avg: float = 0.156) -> str:
    """The sensing row whose converged average ratio is closest to target."""
    best = min(record.rows, key=lambda r: abs(r.x - target_r_avg))
    return best.checkpoint_path


# ---------------------------------------------------------------------------
# sensing experiments

def train_sensing(cfg: ExperimentConfig) -> RunRecord:
    """Two-phase sensing run: reconstruction at the densest ratio, then a
    joint policy/reconstruction sweep over the lambda schedule."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = _dataset(cfg)
    aperture = _aperture(cfg)
    pipe = ReconPipeline(cfg.frames, mask_enabled=cfg.mask_enabled,
                         rng=stream("refine-init", cfg.seed))
    opt_rec = Adam(pipe.params(), lr=cfg.lr_recon)

    dense = RatioMap.uniform(cfg.height, cfg.width, 8, cfg.frames)
    for epoch in range(cfg.pretrain_epochs):
        for i, clip in enumerate(train):
            out = _forward_recon(clip, dense, aperture, pipe,
                                 stream("noise", cfg.seed, "pre", epoch, i))
            loss = mse_loss(clip.data, out)
            _check_finite(loss.item(), "sensing pretrain")
            loss.backward()
            opt_rec.step()

    policy = RatioPolicy(cfg.height, cfg.width, cfg.frames,
                         rng=stream("policy-init", cfg.seed))
    trainer = PolicyTrainer(policy, lr=cfg.lr_policy)

    record = RunRecord(cfg.mode, "learned-ratio", cfg.seed)
    for k, lam in enumerate(cfg.lambdas):
        started = time.perf_counter()
        for epoch in range(cfg.epochs):
            for i, clip in enumerate(train):
                probs = ratio_probs(policy)
                sampled = sample_ratio_map(probs, stream("sample", cfg.seed, k, epoch, i),
                                           frames=cfg.frames)
                data = capture(clip, sampled, aperture, NoiseConfig(),
                               stream("noise", cfg.seed, "lam", k, epoch, i))
                v0 = initial_reconstruction(data, None, aperture)
                out = refine(v0, sampled, pipe, aperture)
                loss = mse_loss(clip.data, out)
                _check_finite(loss.item(), f"lambda={lam}")
                reward = ratio_reward(clip.data, out.data.transpose(1, 2, 0), sampled, lam)
                trainer.step(sampled, reward)
                loss.backward()
                opt_rec.step()

        deployed = sample_ratio_map(ratio_probs(policy), mode="argmax", frames=cfg.frames)
        mean, std = _evaluate_sensing(cfg, test, deployed, pipe, aperture, f"lam{k}")
        ckpt = out_dir / f"sensing_lambda_{lam:g}.vcap"
        digest = _save_sensing(ckpt, cfg, pipe, deployed.counts, policy)
        ratio_map_to_pgm(deployed, out_dir / f"ratio_map_lambda_{lam:g}.pgm")
        record.rows.append(RunRow("r_avg", deployed.r_avg, mean, std,
                                  time.perf_counter() - started, str(ckpt), digest))
    return record


def run_fixed_ratio_baseline(cfg: ExperimentConfig) -> RunRecord:
    """Uniform-ratio reference: a fresh reconstruction net per ratio."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = _dataset(cfg)
    aperture = _aperture(cfg)
    record = RunRecord("sensing-fixed-ratio", "fixed-ratio", cfg.seed)
    for m in cfg.fixed_ratio_counts:
        started = time.perf_counter()
        rmap = RatioMap.uniform(cfg.height, cfg.width, m, cfg.frames)
        pipe = ReconPipeline(cfg.frames, mask_enabled=cfg.mask_enabled,
                             rng=stream("refine-init", cfg.seed, m))
        opt = Adam(pipe.params(), lr=cfg.lr_recon)
        for epoch in range(cfg.epochs):
            for i, clip in enumerate(train):
                out = _forward_recon(clip, rmap, aperture, pipe,
                                     stream("noise", cfg.seed, "fixed", m, epoch, i))
                loss = mse_loss(clip.data, out)
                _check_finite(loss.item(), f"fixed ratio {m}")
                loss.backward()
                opt.step()
        mean, std = _evaluate_sensing(cfg, test, rmap, pipe, aperture, f"fixed{m}")
        ckpt = out_dir / f"fixed_m{m}.vcap"
        digest = _save_sensing(ckpt, cfg, pipe, rmap.counts)
        record.rows.append(RunRow("r_avg", rmap.r_avg, mean, std,
                                  time.perf_counter() - started, str(ckpt), digest))
    return record


# ---------------------------------------------------------------------------
# link experiments

def _link_reconstruct(i_tilde: Tensor, sensing: dict) -> Tensor:
    v0 = initial_reconstruction_op(i_tilde, sensing["ratio_map"].counts,
                                   sensing["frames"], sensing["aperture"])
    return sensing["pipe"](v0, sensing["ratio_map"], sensing["aperture"])


def _joint_policy_map(policy, rng, mode="sample", frames=16):
    return sample_ratio_map(ratio_probs(policy), rng, mode=mode, frames=frames)


def _save_params(path: Path, groups: dict[str, list[Tensor]]) -> str:
    tensors: dict[str, np.ndarray] = {}
    for prefix, params in groups.items():
        tensors.update(af.named_arrays(prefix, params))
    af.save_checkpoint(path, tensors)
    return _file_hash(path)


def train_link(cfg: ExperimentConfig, sensing_checkpoint: str | Path) -> RunRecord:
    """Semantic-link training on top of a sensing checkpoint.

    SemCom trains encoder/decoder with all symbols first, then sweeps mu
    with RAN updates interleaved; SemCom+noRAN sweeps the symbol-channel
    dimension instead. In joint mode the ratio policy and refinement keep
    training against post-channel reconstructions.
    """
    if cfg.pipeline not in ("SemCom", "SemCom+noRAN"):
        raise ValueError(f"train_link does not handle pipeline {cfg.pipeline!r}")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = _dataset(cfg)
    sensing = load_sensing(sensing_checkpoint)
    joint = cfg.mode == "joint-sensing-link"
    af.set_trainable(sensing["pipe"].params(), joint)
    chan = ChannelConfig(cfg.channel_kind, cfg.snr_db)
    budget = LinkBudget(cfg.code_rate, cfg.modulation_order, cfg.snr_db)
    h8, w8 = cfg.height // 8, cfg.width // 8

    policy = None
    opt_pol = None
    opt_rec = None
    if joint:
        policy = RatioPolicy(cfg.height, cfg.width, cfg.frames,
                             rng=stream("policy-init", cfg.seed))
        tensors = af.load_checkpoint(sensing_checkpoint)
        if "policy.000" in tensors:
            af.load_named_arrays("policy", policy.params(), tensors)
        opt_pol = PolicyTrainer(policy, lr=cfg.lr_policy)
        opt_rec = Adam(sensing["pipe"].params(), lr=cfg.lr_recon)

    record = RunRecord(cfg.mode, cfg.pipeline, cfg.seed)

    if cfg.pipeline == "SemCom+noRAN":
        for c in cfg.channel_dims:
            started = time.perf_counter()
            coders = SemCoders(cfg.height, cfg.width, channels=c,
                               rng=stream("coders-init", cfg.seed, c))
            opt = Adam(coders.params(), lr=cfg.lr_coders)
            for epoch in range(cfg.epochs):
                for i, clip in enumerate(train):
                    rmap = sensing["ratio_map"]
                    data = capture(clip, rmap, sensing["aperture"], NoiseConfig(),
                                   stream("noise", cfg.seed, "noran", c, epoch, i))
                    x = sce_encode(data, coders)
                    z, _ = mask_and_flatten(x, None)
                    z_t = transmit(power_normalize(z), chan,
                                   stream("chan", cfg.seed, c, epoch, i))
                    x_t = unflatten(z_t, None, c, (h8, w8))
                    i_tilde = scd_decode(x_t, None, coders)
                    out = _link_reconstruct(i_tilde, sensing)
                    loss = mse_loss(clip.data, out)
                    _check_finite(loss.item(), f"noRAN C={c}")
                    loss.backward()
                    opt.step()
            mean, std = _eval_link_fixed(cfg, test, sensing, coders, c, chan, f"noran{c}")
            ckpt = out_dir / f"noran_c{c}.vcap"
            digest = _save_params(ckpt, {"sce": coders.encoder_params(),
                                         "scd": coders.decoder_params()})
            l_avg = c * h8 * w8 / 2.0
            record.rows.append(RunRow("l_avg", l_avg, mean, std,
                                      time.perf_counter() - started, str(ckpt), digest))
        return record

    # SemCom with rate allocation
    coders = SemCoders(cfg.height, cfg.width, channels=48,
                       rng=stream("coders-init", cfg.seed))
    ran = RanPolicy(rng=stream("ran-init", cfg.seed))
    opt_coders = Adam(coders.params(), lr=cfg.lr_coders)
    # plain SGD: with momentum the zero-mean advantage walk compounds and
    # can run the logits off to overflow over a long sweep
    opt_ran = SgdMomentum(ran.params(), lr=cfg.lr_ran, momentum=0.0)
    ran_baseline = RewardBaseline()
    full_rate = RateMap(np.full((h8, w8), 4), cfg.symbols_per_unit)

    for epoch in range(cfg.pretrain_epochs):
        for i, clip in enumerate(train):
            rmap = sensing["ratio_map"]
            data = capture(clip, rmap, sensing["aperture"], NoiseConfig(),
                           stream("noise", cfg.seed, "linkpre", epoch, i))
            x = sce_encode(data, coders)
            z, _ = mask_and_flatten(x, full_rate)
            z_t = transmit(power_normalize(z), chan,
                           stream("chan", cfg.seed, "pre", epoch, i))
            x_t = unflatten(z_t, full_rate, 48, (h8, w8))
            i_tilde = scd_decode(x_t, full_rate, coders)
            out = _link_reconstruct(i_tilde, sensing)
            loss = mse_loss(clip.data, out)
            _check_finite(loss.item(), "link pretrain")
            loss.backward()
            opt_coders.step()

    for k, mu in enumerate(cfg.mus):
        started = time.perf_counter()
        for epoch in range(cfg.epochs):
            for i, clip in enumerate(train):
                rmap = sensing["ratio_map"]
                if joint:
                    rmap = _joint_policy_map(policy, stream("jsample", cfg.seed, k, epoch, i),
                                             frames=cfg.frames)
                data = capture(clip, rmap, sensing["aperture"], NoiseConfig(),
                               stream("noise", cfg.seed, "mu", k, epoch, i))
                x = sce_encode(data, coders)
                p_f = ran.probs(x)
                sampled = sample_rate_map(p_f, stream("fsample", cfg.seed, k, epoch, i),
                                          explore=True,
                                          symbols_per_unit=cfg.symbols_per_unit)
                z, _ = mask_and_flatten(x, sampled)
                z_t = transmit(power_normalize(z), chan,
                               stream("chan", cfg.seed, "mu", k, epoch, i))
                x_t = unflatten(z_t, sampled, 48, (h8, w8))
                i_tilde = scd_decode(x_t, sampled, coders)
                if joint:
                    v0 = initial_reconstruction_op(i_tilde, rmap.counts, cfg.frames,
                                                   sensing["aperture"])
                    out = sensing["pipe"](v0, rmap, sensing["aperture"])
                else:
                    out = _link_reconstruct(i_tilde, sensing)
                loss = mse_loss(clip.data, out)
                _check_finite(loss.item(), f"mu={mu}")
                recon_np = out.data.transpose(1, 2, 0)
                q_f = ran_reward(clip.data, recon_np, sampled, mu)
                ran_gradient_step(ran, x, sampled, q_f, opt_ran,
                                  ran_baseline.update(q_f))
                _check_finite(float(np.abs(ran.c2.w.data).max()), f"RAN mu={mu}")
                if joint:
                    # post-channel distortion drives the ratio policy too
                    reward = ratio_reward(clip.data, recon_np, rmap, cfg.lambdas[-1])
                    opt_pol.step(rmap, reward)
                loss.backward()
                opt_coders.step()
                if joint:
                    opt_rec.step()

        mean, std, l_avg = _eval_semcom(cfg, test, sensing, coders, ran, chan, budget,
                                        policy if joint else None, f"mu{k}")
        ckpt = out_dir / f"semcom_mu_{mu:g}.vcap"
        digest = _save_params(ckpt, {"sce": coders.encoder_params(),
                                     "scd": coders.decoder_params(),
                                     "ran": ran.params()})
        record.rows.append(RunRow("l_avg", l_avg, mean, std,
                                  time.perf_counter() - started, str(ckpt), digest))
    return record


def _eval_link_fixed(cfg, test, sensing, coders, channels, chan, tag):
    """Evaluate a fixed-rate (no rate map) link pipeline."""
    h8, w8 = cfg.height // 8, cfg.width // 8
    values = []
    for i, clip in enumerate(test):
        data = capture(clip, sensing["ratio_map"], sensing["aperture"], NoiseConfig(),
                       stream("eval-noise", cfg.seed, tag, i))
        x = sce_encode(data, coders)
        z, _ = mask_and_flatten(x, None)
        z_t = transmit(power_normalize(z), chan, stream("eval-chan", cfg.seed, tag, i))
        x_t = unflatten(z_t, None, channels, (h8, w8))
        i_tilde = scd_decode(x_t, None, coders)
        out = _link_reconstruct(i_tilde, sensing)
        values.append(psnr(clip.data, out.data.transpose(1, 2, 0)))
    return float(np.mean(values)), float(np.std(values))


def _eval_semcom(cfg, test, sensing, coders, ran, chan, budget, policy, tag):
    h8, w8 = cfg.height // 8, cfg.width // 8
    values, costs = [], []
    for i, clip in enumerate(test):
        rmap = sensing["ratio_map"]
        if policy is not None:
            rmap = _joint_policy_map(policy, None, mode="argmax", frames=cfg.frames)
        data = capture(clip, rmap, sensing["aperture"], NoiseConfig(),
                       stream("eval-noise", cfg.seed, tag, i))
        x = sce_encode(data, coders)
        deployed = sample_rate_map(ran.probs(x), mode="argmax",
                                   symbols_per_unit=cfg.symbols_per_unit)
        z, n_z = mask_and_flatten(x, deployed)
        z_t = transmit(power_normalize(z), chan, stream("eval-chan", cfg.seed, tag, i))
        x_t = unflatten(z_t, deployed, 48, (h8, w8))
        i_tilde = scd_decode(x_t, deployed, coders)
        if policy is not None:
            v0 = initial_reconstruction_op(i_tilde, rmap.counts, cfg.frames,
                                           sensing["aperture"])
            out = sensing["pipe"](v0, rmap, sensing["aperture"])
        else:
            out = _link_reconstruct(i_tilde, sensing)
        values.append(psnr(clip.data, out.data.transpose(1, 2, 0)))
        costs.append(semcom_total_cost(n_z, cfg.height, cfg.width, budget))
    return float(np.mean(values)), float(np.std(values)), float(np.mean(costs))


# ---------------------------------------------------------------------------
# compression baselines

def run_jscc_baseline(cfg: ExperimentConfig, sensing_checkpoint: str | Path) -> RunRecord:
    """Raw sensor-data transmission: link coders trained on measurement MSE,
    evaluated through the frozen reconstruction for comparability."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = _dataset(cfg)
    sensing = load_sensing(sensing_checkpoint)
    af.set_trainable(sensing["pipe"].params(), False)
    chan = ChannelConfig(cfg.channel_kind, cfg.snr_db)
    h8, w8 = cfg.height // 8, cfg.width // 8
    record = RunRecord(cfg.mode, "Sensordata+JSCC", cfg.seed)
    for c in cfg.channel_dims:
        started = time.perf_counter()
        coders = SemCoders(cfg.height, cfg.width, channels=c,
                           rng=stream("coders-init", cfg.seed, "jscc", c))
        opt = Adam(coders.params(), lr=cfg.lr_coders)
        for epoch in range(cfg.epochs):
            for i, clip in enumerate(train):
                data = capture(clip, sensing["ratio_map"], sensing["aperture"],
                               NoiseConfig(), stream("noise", cfg.seed, "jscc", c, epoch, i))
                x = sce_encode(data, coders)
                z, _ = mask_and_flatten(x, None)
                z_t = transmit(power_normalize(z), chan,
                               stream("chan", cfg.seed, "jscc", c, epoch, i))
                x_t = unflatten(z_t, None, c, (h8, w8))
                i_tilde = scd_decode(x_t, None, coders)
                loss = mse_loss(data.packed, i_tilde)  # raw sensor fidelity
                _check_finite(loss.item(), f"JSCC C={c}")
                loss.backward()
                opt.step()
        mean, std = _eval_link_fixed(cfg, test, sensing, coders, c, chan, f"jscc{c}")
        ckpt = out_dir / f"jscc_c{c}.vcap"
        digest = _save_params(ckpt, {"sce": coders.encoder_params(),
                                     "scd": coders.decoder_params()})
        record.rows.append(RunRow("l_avg", c * h8 * w8 / 2.0, mean, std,
                                  time.perf_counter() - started, str(ckpt), digest))
    return record


def codec_sweep(cfg: ExperimentConfig, sensing_checkpoint: str | Path) -> list[dict]:
    """Train the task-aware codec along the beta schedule (warm-started in
    schedule order) and measure real bitstream lengths on the test set."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = _dataset(cfg)
    sensing = load_sensing(sensing_checkpoint)
    af.set_trainable(sensing["pipe"].params(), False)
    model = tc.CodecModel(cfg.height, cfg.width, rng=stream("codec-init", cfg.seed),
                          frames=cfg.frames)
    opt = Adam(model.params(), lr=cfg.lr_coders)
    results = []
    for k, beta in enumerate(cfg.betas):
        started = time.perf_counter()
        for epoch in range(cfg.epochs):
            for i, clip in enumerate(train):
                data = capture(clip, sensing["ratio_map"], sensing["aperture"],
                               NoiseConfig(), stream("noise", cfg.seed, "codec", k, epoch, i))
                i_tilde, bits_y, bits_z = tc.relaxed_forward(
                    data, model, stream("quant", cfg.seed, k, epoch, i))
                out = _link_reconstruct(i_tilde, sensing)
                loss = tc.rd_loss(clip.data, out, bits_y, bits_z, beta)
                _check_finite(loss.item(), f"beta={beta}")
                loss.backward()
                opt.step()
        bit_counts, values = [], []
        for i, clip in enumerate(test):
            data = capture(clip, sensing["ratio_map"], sensing["aperture"],
                           NoiseConfig(), stream("eval-noise", cfg.seed, f"codec{k}", i))
            stream_y, stream_z = tc.encode(data, model)
            bit_counts.append(8 * (len(stream_y) + len(stream_z)))
            packed = tc.decode(stream_y, stream_z, model)
            recon = _link_reconstruct(Tensor(packed.transpose(2, 0, 1)), sensing)
            values.append(psnr(clip.data, recon.data.transpose(1, 2, 0)))
        ckpt = out_dir / f"codec_beta_{beta:g}.vcap"
        digest = _save_params(ckpt, {"codec": model.params()})
        results.append({"beta": beta, "mean_bits": float(np.mean(bit_counts)),
                        "psnr_mean": float(np.mean(values)),
                        "psnr_std": float(np.std(values)),
                        "wall_time": time.perf_counter() - started,
                        "checkpoint": str(ckpt), "hash": digest})
    return results


def records_from_sweep(sweep: list[dict], cfg: ExperimentConfig,
                       pipeline: str) -> RunRecord:
    """Attach the cost model (capacity-achieving or coded/modulated) to a
    trained codec sweep."""
    budget = LinkBudget(cfg.code_rate, cfg.modulation_order, cfg.snr_db)
    record = RunRecord(cfg.mode, pipeline, cfg.seed)
    for item in sweep:
        if pipeline == "Compr+Cap":
            l_avg = shannon_symbols(item["mean_bits"], cfg.snr_db)
        elif pipeline == "Compr+LDPC":
            l_avg = symbols_for_bits(item["mean_bits"], budget)
        else:
            raise ValueError(f"no cost model for pipeline {pipeline!r}")
        record.rows.append(RunRow("l_avg", l_avg, item["psnr_mean"], item["psnr_std"],
                                  item["wall_time"], item["checkpoint"], item["hash"]))
    return record


def run_compression_baselines(cfg: ExperimentConfig,
                              sensing_checkpoint: str | Path) -> RunRecord:
    if cfg.pipeline == "Sensordata+JSCC":
        return run_jscc_baseline(cfg, sensing_checkpoint)
    if cfg.pipeline in ("Compr+Cap", "Compr+LDPC"):
        sweep = codec_sweep(cfg, sensing_checkpoint)
        return records_from_sweep(sweep, cfg, cfg.pipeline)
    raise ValueError(f"run_compression_baselines does not handle {cfg.pipeline!r}")
