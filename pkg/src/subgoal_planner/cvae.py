"""Conditional VAE that proposes subgoal configurations for a (world, start, goal) query.

Three dense networks make up the model:

* ``encoder``: ``[world slots, enc(start), enc(goal)] -> condition features h``
* ``posterior``: ``[enc(x), h] -> [mu_z, log sigma_z]``
* ``decoder``: ``[z, h] -> x_hat`` (raw joint angles)

The training objective per sample is the feature-space reconstruction error
plus ``beta`` times the closed-form KL divergence to a standard normal prior.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ModelMissingError, TrainingError
from .kinematics import (FeatureParams, RobotModel, encoding_dim, feature_distance_sq_grad,
                         positional_encode)
from .neuralnet import AdamState, DenseNetwork, adam_step
from .world import K_MAX, World, encode_world

log = logging.getLogger(__name__)

LOG_SIGMA_MIN = -6.0
LOG_SIGMA_MAX = 2.0
CHECKPOINT_KIND = "subgoal-planner/cvae"
CHECKPOINT_VERSION = 1


@dataclass
class CvaeModel:
    robot: RobotModel
    encoder: DenseNetwork
    posterior: DenseNetwork
    decoder: DenseNetwork
    latent_dim: int = 4
    beta: float = 0.01
    feature_params: FeatureParams = FeatureParams()
    k_max: int = K_MAX

    def params(self) -> list:
        return self.encoder.params() + self.posterior.params() + self.decoder.params()

    def copy(self) -> "CvaeModel":
        return CvaeModel(self.robot, self.encoder.copy(), self.posterior.copy(), self.decoder.copy(),
                         self.latent_dim, self.beta, self.feature_params, self.k_max)

    def equals(self, other: "CvaeModel") -> bool:
        return (self.encoder.equals(other.encoder) and self.posterior.equals(other.posterior)
                and self.decoder.equals(other.decoder))

    @property
    def condition_dim(self) -> int:
        return self.encoder.n_out


@dataclass(frozen=True)
class CvaeLossReport:
    reconstruction: float
    kl: float
    total: float


def build_cvae(robot: RobotModel, feature_params: FeatureParams = FeatureParams(),
               latent_dim: int = 4, beta: float = 0.01, k_max: int = K_MAX,
               encoder_hidden=(64,), condition_dim: int = 32, hidden=(64, 64),
               seed: int = 0) -> CvaeModel:
    enc_dim = encoding_dim(robot.n, feature_params.levels)
    cond_in = 3 * k_max + 2 * enc_dim
    seeds = np.random.SeedSequence(seed).generate_state(3)
    encoder = DenseNetwork([cond_in, *encoder_hidden, condition_dim], seed=int(seeds[0]))
    posterior = DenseNetwork([enc_dim + condition_dim, *hidden, 2 * latent_dim], seed=int(seeds[1]))
    decoder = DenseNetwork([latent_dim + condition_dim, *hidden, robot.n], seed=int(seeds[2]))
    return CvaeModel(robot, encoder, posterior, decoder, latent_dim, beta, feature_params, k_max)


def condition_input(model: CvaeModel, world: World, start, goal) -> np.ndarray:
    lv = model.feature_params.levels
    return np.concatenate([encode_world(world, model.k_max), positional_encode(start, lv),
                           positional_encode(goal, lv)])


def encode_condition(model: CvaeModel, world: World, start, goal) -> np.ndarray:
    """Condition features for a query; the slot encoding makes this obstacle-order dependent."""
    return model.encoder(condition_input(model, world, start, goal))


def kl_normal(mu, sigma) -> float:
    """KL divergence of ``N(mu, diag(sigma^2))`` from ``N(0, I)``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise InvalidArgumentError("sigma must be positive")
    return float(0.5 * np.sum(sigma ** 2 + mu ** 2 - 1.0 - 2.0 * np.log(sigma)))


def sample_latent(mu, sigma, rng: np.random.Generator) -> np.ndarray:
    """Reparametrized draw ``mu + sigma * eps`` with ``eps ~ N(0, I)``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise InvalidArgumentError("sigma must be nonnegative")
    return mu + sigma * rng.standard_normal(mu.shape)


def _forward(model: CvaeModel, x, cond_in, eps):
    m = model.latent_dim
    lv = model.feature_params.levels
    h, acts_e = model.encoder.forward(cond_in, keep=True)
    out, acts_p = model.posterior.forward(np.concatenate([positional_encode(x, lv), h], axis=1), keep=True)
    mu = out[:, :m]
    raw_ls = out[:, m:]
    ls = np.clip(raw_ls, LOG_SIGMA_MIN, LOG_SIGMA_MAX)
    sigma = np.exp(ls)
    z = mu + sigma * eps
    x_hat, acts_d = model.decoder.forward(np.concatenate([z, h], axis=1), keep=True)
    recon, g_xhat = feature_distance_sq_grad(x, x_hat, model.robot, model.feature_params)
    kl = 0.5 * np.sum(sigma ** 2 + mu ** 2 - 1.0 - 2.0 * ls, axis=1)
    cache = (acts_e, acts_p, acts_d, mu, raw_ls, ls, sigma, g_xhat)
    return recon, kl, cache


def batch_loss(model: CvaeModel, x, cond_in, eps):
    """Mean loss over a batch and its gradients, ordered like ``model.params()``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    cond_in = np.atleast_2d(cond_in)
    eps = np.atleast_2d(eps)
    B = x.shape[0]
    m = model.latent_dim
    beta = model.beta
    recon, kl, (acts_e, acts_p, acts_d, mu, raw_ls, ls, sigma, g_xhat) = _forward(model, x, cond_in, eps)
    total = recon + beta * kl

    g_dec, g_dec_in = model.decoder.backward(acts_d, g_xhat / B)
    g_z = g_dec_in[:, :m]
    g_h = g_dec_in[:, m:]
    g_mu = g_z + beta * mu / B
    g_ls = g_z * eps * sigma + beta * (sigma ** 2 - 1.0) / B
    g_ls = np.where((raw_ls > LOG_SIGMA_MIN) & (raw_ls < LOG_SIGMA_MAX), g_ls, 0.0)
    g_post, g_post_in = model.posterior.backward(acts_p, np.concatenate([g_mu, g_ls], axis=1))
    g_h = g_h + g_post_in[:, -model.condition_dim:]
    g_enc, _ = model.encoder.backward(acts_e, g_h)
    report = CvaeLossReport(float(np.mean(recon)), float(np.mean(kl)), float(np.mean(total)))
    return report, g_enc + g_post + g_dec


def cvae_loss(model: CvaeModel, x, world: World, start, goal, rng: np.random.Generator) -> CvaeLossReport:
    """Single-sample loss report for target configuration ``x`` under the query's condition."""
    cond = condition_input(model, world, start, goal)[None, :]
    eps = rng.standard_normal((1, model.latent_dim))
    recon, kl, _ = _forward(model, np.atleast_2d(np.asarray(x, dtype=float)), cond, eps)
    r, k = float(recon[0]), float(kl[0])
    return CvaeLossReport(r, k, r + model.beta * k)


def training_arrays(model: CvaeModel, records) -> tuple[np.ndarray, np.ndarray]:
    """Targets and condition inputs for records exposing ``world``, ``start``, ``goal``, ``waypoint``."""
    x = np.array([r.waypoint for r in records], dtype=float).reshape(-1, model.robot.n)
    cond = np.array([condition_input(model, r.world, r.start, r.goal) for r in records])
    return x, cond


def train_cvae(model: CvaeModel, records, epochs: int, seed: int = 0, batch_size: int = 128,
               lr: float = 1e-3):
    """Minibatch Adam training on a copy of ``model``.

    Returns ``(trained_model, history)`` with one mean total loss per epoch.
    """
    if len(records) == 0:
        raise TrainingError("refusing to train the CVAE on an empty training set")
    x, cond = training_arrays(model, records)
    return train_cvae_arrays(model, x, cond, epochs, seed, batch_size, lr)


def train_cvae_arrays(model: CvaeModel, x, cond, epochs: int, seed: int = 0,
                      batch_size: int = 128, lr: float = 1e-3):
    if len(x) == 0:
        raise TrainingError("refusing to train the CVAE on an empty training set")
    model = model.copy()
    rng = np.random.default_rng(seed)
    params = model.params()
    state = AdamState.zeros_like(params, lr=lr)
    history = []
    N = len(x)
    for epoch in range(epochs):
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, batch_size):
            idx = order[start: start + batch_size]
            eps = rng.standard_normal((len(idx), model.latent_dim))
            report, grads = batch_loss(model, x[idx], cond[idx], eps)
            adam_step(params, grads, state)
            total += report.total * len(idx)
        history.append(total / N)
        log.debug("cvae epoch %d loss %.5f", epoch + 1, history[-1])
    return model, history


def generate_candidates(model: CvaeModel, world: World, start, goal, batch: int,
                        rng: np.random.Generator) -> list:
    """Decode ``batch`` prior draws into joint configurations clamped to the joint limits."""
    if batch <= 0:
        return []
    h = encode_condition(model, world, start, goal)
    z = rng.standard_normal((batch, model.latent_dim))
    x_hat = model.decoder(np.concatenate([z, np.tile(h, (batch, 1))], axis=1))
    x_hat = np.clip(x_hat, model.robot.lo, model.robot.hi)
    return [row for row in x_hat]


def save_cvae(model: CvaeModel, path) -> None:
    doc = {
        "kind": CHECKPOINT_KIND,
        "version": CHECKPOINT_VERSION,
        "robot": model.robot.to_dict(),
        "feature_params": {"alpha": model.feature_params.alpha, "levels": model.feature_params.levels},
        "latent_dim": model.latent_dim,
        "beta": model.beta,
        "k_max": model.k_max,
        "encoder": model.encoder.to_dict(),
        "posterior": model.posterior.to_dict(),
        "decoder": model.decoder.to_dict(),
    }
    Path(path).write_text(json.dumps(doc))


def load_cvae(path) -> CvaeModel:
    path = Path(path)
    if not path.exists():
        raise ModelMissingError(f"CVAE checkpoint not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("kind") != CHECKPOINT_KIND or doc.get("version") != CHECKPOINT_VERSION:
        raise InvalidArgumentError(f"{path} is not a version-{CHECKPOINT_VERSION} CVAE checkpoint")
    fp = doc["feature_params"]
    return CvaeModel(RobotModel.from_dict(doc["robot"]), DenseNetwork.from_dict(doc["encoder"]),
                     DenseNetwork.from_dict(doc["posterior"]), DenseNetwork.from_dict(doc["decoder"]),
                     doc["latent_dim"], doc["beta"], FeatureParams(fp["alpha"], fp["levels"]),
                     doc["k_max"])
