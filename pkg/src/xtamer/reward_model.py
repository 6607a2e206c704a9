"""Reward-model MLP and the greedy expression policy.

The learner's state is a BMU grid position; its action is one of the seven
catalog expressions. A small MLP (9 inputs: 2 normalized grid coordinates
plus a 7-wide one-hot action; 32 tanh hidden units; one scaled-tanh output)
regresses the human reward, so predictions live strictly inside (-2, 2).
Action selection tries all seven actions and takes the argmax; learning is
one plain-SGD step per observed reward on the squared prediction error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from xtamer import checkpoint as ckpt
from xtamer.expressions import (
    ACTION_CATALOG,
    N_ACTIONS,
    ExpressionAction,
    action_features,
    encode_action,
)
from xtamer.nn import Dense, ScaledTanh, Sequential, Shift, Tanh, sgd_step
from xtamer.som import BmuPosition
from xtamer.validation import as_rng

N_INPUTS = 2 + N_ACTIONS
REWARD_SCALE = 2.0


@dataclass(frozen=True)
class RewardSample:
    """One observed (state, action, reward) triple; reward must be in [-2, 2]."""

    state: BmuPosition
    action: ExpressionAction
    reward: float

    def __post_init__(self):
        if not np.isfinite(self.reward) or not -REWARD_SCALE <= self.reward <= REWARD_SCALE:
            raise ValueError(f"reward must be in [-2, 2], got {self.reward!r}")


def state_action_features(state: BmuPosition, action: ExpressionAction) -> np.ndarray:
    """The 9-vector the MLP consumes: normalized (row, col), then the one-hot."""
    return np.concatenate([np.asarray(state.normalized), action_features(action)])


def epoch_cost(costs) -> float:
    """Arithmetic mean of per-interaction costs; empty input is rejected."""
    costs = np.asarray(costs, dtype=np.float64)
    if costs.size == 0:
        raise ValueError("epoch_cost requires at least one cost")
    if not np.isfinite(costs).all():
        raise ValueError("costs must be finite")
    return float(costs.mean())


class RewardNetwork(BaseEstimator):
    """Online reward regressor with greedy (optionally epsilon-greedy) policy.

    Parameters
    ----------
    hidden_size : int, default=32
    learning_rate : float, default=0.01
        Step size of the per-interaction SGD update. The output layer sees
        ~hidden_size near-saturated activations, so its effective step is
        roughly learning_rate * hidden_size per update; rates much above
        0.02 overshoot the output tanh into saturation and kill learning.
    epsilon : float, default=0.0
        Probability of acting uniformly at random instead of greedily.
        The default matches the try-all-and-argmax policy exactly.
    optimism : float, default=0.0
        Resting predicted reward for (state, action) pairs that updates have
        not reached: the output layer starts at weights 0 with its bias
        frozen at atanh(optimism / 2). The bias is excluded from SGD on
        purpose: a trainable output bias absorbs the running mean of the
        observed rewards, and during early exploration that mean is
        negative, so every untried action sinks below already-tried bad
        ones and the greedy argmax locks onto the least-bad known action.
        With the bias frozen, untried pairs keep predicting roughly
        `optimism` while visited pairs fit their observed rewards through
        the trained weights; a positive setting therefore makes the greedy
        policy sweep through untried actions and settle on the best fitted
        one. At the default 0.0 the output layer is plain zero-initialized
        and every initial prediction is 0.
    hidden_scale : float, default=4.0
        Half-width of the uniform hidden-layer init. Near-zero init leaves
        every tanh unit in its linear range, where the model is additive in
        state and action and cannot represent "this action is good only in
        this state region"; the argmax is then the same action everywhere
        and greedy data collection deadlocks. A wide init gives nonlinear
        random features with state-action interactions available from the
        first update. The width also sets state resolution: rewards
        observed in one grid region leak into regions up to roughly
        1/hidden_scale away (in normalized coordinates), so the scale must
        separate distinct emotion clusters (~0.3 apart) while still
        generalizing across the cells of one cluster (~0.1 apart).
    seed : int, default=0
        Seeds hidden-layer initialization and epsilon draws.
    """

    def __init__(self, hidden_size=32, learning_rate=0.01, epsilon=0.0,
                 optimism=0.0, hidden_scale=4.0, seed=0):
        self.hidden_size = hidden_size
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.optimism = optimism
        self.hidden_scale = hidden_scale
        self.seed = seed

    # -- lifecycle --------------------------------------------------------

    def initialize(self) -> "RewardNetwork":
        """Fresh parameters; called implicitly by the first predict/update."""
        if self.hidden_size < 1:
            raise ValueError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not -REWARD_SCALE < self.optimism < REWARD_SCALE:
            raise ValueError(f"optimism must be inside (-2, 2), got {self.optimism}")
        if not np.isfinite(self.hidden_scale) or self.hidden_scale <= 0:
            raise ValueError(
                f"hidden_scale must be > 0, got {self.hidden_scale}")
        self.rng_ = as_rng(self.seed)
        hidden = Dense(N_INPUTS, self.hidden_size, rng=None)
        hidden.weights[:] = self.rng_.uniform(
            -self.hidden_scale, self.hidden_scale, hidden.weights.shape)
        hidden.bias[:] = self.rng_.uniform(
            -self.hidden_scale, self.hidden_scale, hidden.bias.shape)
        out = Dense(self.hidden_size, 1, rng=None, train_bias=False)  # zero weights
        out.bias[0] = np.arctanh(self.optimism / REWARD_SCALE)
        centering = Shift(-self._mean_hidden_activation(hidden))
        self.net_ = Sequential(
            [hidden, Tanh(), centering, out, ScaledTanh(REWARD_SCALE)])
        self.n_updates_ = 0
        return self

    @staticmethod
    def _mean_hidden_activation(hidden: Dense) -> np.ndarray:
        """Per-unit mean tanh activation over the whole input domain.

        The domain is the product of a 21x21 lattice on the normalized state
        square and the 7 one-hot actions. Subtracting this mean downstream
        keeps the resting prediction of inputs that updates never visit at
        the optimism level: with centered features the average prediction
        over the domain equals the frozen output bias for any output
        weights, so fitting visited pairs cannot systematically drag
        unvisited ones along.
        """
        grid = np.linspace(0.0, 1.0, 21)
        rr, cc = np.meshgrid(grid, grid, indexing="ij")
        states = np.column_stack([rr.ravel(), cc.ravel()])
        eye = np.eye(N_ACTIONS)
        x = np.concatenate(
            [np.hstack([states, np.tile(one_hot, (len(states), 1))])
             for one_hot in eye])
        return np.tanh(x @ hidden.weights.T + hidden.bias).mean(axis=0)

    def _ensure_ready(self) -> None:
        if not hasattr(self, "net_"):
            self.initialize()

    # -- inference --------------------------------------------------------
    # Reads go through a stateless forward over the weights so they are safe
    # alongside each other; update() is the single writer and uses the layer
    # stack, whose cached activations feed the exact backward pass.

    def _forward(self, x: np.ndarray) -> np.ndarray:
        hidden, centering, out = (self.net_.layers[0], self.net_.layers[2],
                                  self.net_.layers[3])
        h = np.tanh(x @ hidden.weights.T + hidden.bias) + centering.offset
        return REWARD_SCALE * np.tanh(h @ out.weights.T + out.bias)

    def predict_reward(self, state: BmuPosition, action: ExpressionAction) -> float:
        """Predicted human reward for taking `action` in `state`."""
        self._ensure_ready()
        x = state_action_features(state, action)[None, :]
        y = float(self._forward(x)[0, 0])
        assert -REWARD_SCALE < y < REWARD_SCALE
        return y

    def predict_all(self, state: BmuPosition) -> np.ndarray:
        """Predictions for all 7 catalog actions, indexed by action_id."""
        self._ensure_ready()
        x = np.stack([state_action_features(state, a) for a in ACTION_CATALOG])
        return self._forward(x)[:, 0]

    def select_action(self, state: BmuPosition) -> tuple[ExpressionAction, np.ndarray]:
        """Try all seven actions, return the argmax and every prediction.

        Ties go to the lowest action_id. With epsilon > 0 the greedy choice
        is replaced by a uniform draw with probability epsilon; at the
        default epsilon=0 no randomness is consumed.
        """
        predictions = self.predict_all(state)
        if self.epsilon > 0.0 and self.rng_.uniform() < self.epsilon:
            choice = int(self.rng_.integers(0, N_ACTIONS))
        else:
            choice = int(np.argmax(predictions))
        return ACTION_CATALOG[choice], predictions

    # -- learning ---------------------------------------------------------

    def update(self, sample: RewardSample) -> float:
        """One SGD step toward the observed reward; returns the pre-update cost.

        Cost is the squared error (prediction - reward)^2 measured before
        the step. Credit is assigned to the presented sample only.
        """
        self._ensure_ready()
        if sample.action.action_id is None:
            raise ValueError(
                f"cannot learn from non-catalog action {encode_action(sample.action)}")
        x = state_action_features(sample.state, sample.action)[None, :]
        y = self.net_.forward(x)
        cost = float((y[0, 0] - sample.reward) ** 2)
        upstream = 2.0 * (y - sample.reward)
        self.net_.backward(upstream)
        sgd_step(self.net_.parameters(), self.net_.gradients(), self.learning_rate)
        self.n_updates_ += 1
        return cost

    # -- persistence ------------------------------------------------------

    def to_section(self) -> ckpt.Section:
        self._ensure_ready()
        hidden, centering, out = (self.net_.layers[0], self.net_.layers[2],
                                  self.net_.layers[3])
        arrays = {
            "hidden_weights": hidden.weights, "hidden_bias": hidden.bias,
            "hidden_centering": centering.offset,
            "out_weights": out.weights, "out_bias": out.bias,
        }
        meta = {
            "hidden_size": self.hidden_size, "learning_rate": self.learning_rate,
            "epsilon": self.epsilon, "optimism": self.optimism,
            "hidden_scale": self.hidden_scale, "seed": self.seed,
            "n_updates": self.n_updates_, "rng_state": self.rng_.bit_generator.state,
        }
        return ckpt.Section("reward", arrays, meta)

    @classmethod
    def from_section(cls, section: ckpt.Section) -> "RewardNetwork":
        m = section.meta
        model = cls(hidden_size=m["hidden_size"], learning_rate=m["learning_rate"],
                    epsilon=m["epsilon"], optimism=m["optimism"],
                    hidden_scale=m["hidden_scale"], seed=m["seed"])
        model.initialize()
        hidden, centering, out = (model.net_.layers[0], model.net_.layers[2],
                                  model.net_.layers[3])
        a = section.arrays
        for target, key in ((hidden.weights, "hidden_weights"), (hidden.bias, "hidden_bias"),
                            (centering.offset, "hidden_centering"),
                            (out.weights, "out_weights"), (out.bias, "out_bias")):
            if a[key].shape != target.shape:
                raise ckpt.CheckpointError(
                    "format", f"array {key!r} has shape {a[key].shape}, "
                              f"expected {target.shape}")
            target[...] = a[key]
        model.n_updates_ = int(m["n_updates"])
        model.rng_.bit_generator.state = m["rng_state"]
        return model

    def save(self, path) -> None:
        ckpt.write_checkpoint(path, [self.to_section()])

    @classmethod
    def load(cls, path) -> "RewardNetwork":
        return cls.from_section(ckpt.find_section(ckpt.read_checkpoint(path), "reward"))
