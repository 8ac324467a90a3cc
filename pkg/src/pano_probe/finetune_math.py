"""Objective mathematics for the shift-invariance fine-tune: Charbonnier
penalty, the balanced two-term loss and its analytic gradient, knee-point
detection on loss curves, and the knee-based balance-weight derivation.

All pure functions; no trainer, no autograd.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoKneeError, ValidationError

__all__ = [
    "LossCurve",
    "CombinedLossInputs",
    "charbonnier",
    "combined_loss",
    "combined_loss_grad",
    "knee_point",
    "lambda_from_knees",
    "derive_lambda",
    "read_loss_curve",
    "write_loss_curve",
]

DEFAULT_EPSILON = 1e-3

# Difference-curve values below this (on the unit-normalized scale) are
# indistinguishable from a flat curve.
_FLAT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class LossCurve:
    """Per-epoch training loss recorded under one balance-weight setting."""

    lambda_setting: float
    per_epoch_loss: tuple[float, ...]
    first_epoch: int = 0

    def __post_init__(self):
        if len(self.per_epoch_loss) < 2:
            raise ValidationError("a loss curve needs at least 2 epochs")

    @property
    def epochs(self) -> int:
        return len(self.per_epoch_loss)

    def loss_at_epoch(self, epoch: int) -> float:
        idx = epoch - self.first_epoch
        if not 0 <= idx < self.epochs:
            raise ValidationError(
                f"epoch {epoch} outside curve range "
                f"[{self.first_epoch}, {self.first_epoch + self.epochs - 1}]"
            )
        return self.per_epoch_loss[idx]


@dataclass(frozen=True)
class CombinedLossInputs:
    """Scores entering the balanced loss.

    s_shift_tuned / s_orig_tuned come from the model being tuned (shifted
    and original image); s_orig_frozen is the frozen reference model's score
    of the original image.  lambda_ weights invariance against preservation;
    training uses the open interval (0, 1), the closed endpoints are valid
    here for curve recording.
    """

    s_shift_tuned: float
    s_orig_tuned: float
    s_orig_frozen: float
    lambda_: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValidationError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")


def charbonnier(x: float, y: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """Smoothed L1 penalty sqrt((x-y)^2 + epsilon^2); >= epsilon, symmetric."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    return math.sqrt((x - y) ** 2 + epsilon**2)


def combined_loss(inputs: CombinedLossInputs) -> float:
    """lambda-weighted sum of the invariance term (tuned shifted vs tuned
    original score) and the regularization term (tuned shifted vs frozen
    original score)."""
    invariance = charbonnier(inputs.s_shift_tuned, inputs.s_orig_tuned, inputs.epsilon)
    preservation = charbonnier(
        inputs.s_shift_tuned, inputs.s_orig_frozen, inputs.epsilon
    )
    return inputs.lambda_ * invariance + (1.0 - inputs.lambda_) * preservation


def combined_loss_grad(inputs: CombinedLossInputs) -> tuple[float, float, float]:
    """Analytic partials of combined_loss with respect to
    (s_shift_tuned, s_orig_tuned, s_orig_frozen)."""
    lam, eps = inputs.lambda_, inputs.epsilon
    c1 = charbonnier(inputs.s_shift_tuned, inputs.s_orig_tuned, eps)
    c2 = charbonnier(inputs.s_shift_tuned, inputs.s_orig_frozen, eps)
    d1 = (inputs.s_shift_tuned - inputs.s_orig_tuned) / c1
    d2 = (inputs.s_shift_tuned - inputs.s_orig_frozen) / c2
    return (
        lam * d1 + (1.0 - lam) * d2,
        -lam * d1,
        -(1.0 - lam) * d2,
    )


def knee_point(curve: LossCurve) -> int:
    """Epoch of the knee of a decreasing, convex loss curve.

    Kneedle with sensitivity 1 and no smoothing: min-max normalize epochs and
    losses, flip the loss axis so the curve becomes concave increasing, and
    return the epoch of the (first) maximum of the difference curve
    (1 - loss_norm) - epoch_norm.
    """
    n = curve.epochs
    if n < 5:
        raise ValidationError(f"knee detection needs >= 5 epochs, got {n}")
    y = np.asarray(curve.per_epoch_loss, dtype=float)
    x = np.arange(n, dtype=float)
    y_span = y.max() - y.min()
    if y_span == 0.0:
        raise NoKneeError("loss curve is constant; no knee exists")
    x_norm = x / (n - 1)
    y_norm = (y - y.min()) / y_span
    diff = (1.0 - y_norm) - x_norm
    if float(diff.max()) <= _FLAT_TOLERANCE:
        raise NoKneeError("difference curve is flat; no knee exists")
    return curve.first_epoch + int(np.argmax(diff))


def lambda_from_knees(l0_knee: float, l1_knee: float) -> float:
    """Balance weight equating the two loss components at the knee:
    lambda = l0 / (l0 + l1)."""
    if l0_knee < 0 or l1_knee < 0:
        raise ValidationError("knee losses must be non-negative")
    if l0_knee == 0 and l1_knee == 0:
        raise ValidationError("knee losses are both zero; lambda is undefined")
    return l0_knee / (l0_knee + l1_knee)


def derive_lambda(curve_lambda1: LossCurve, curve_lambda0: LossCurve) -> dict:
    """Full knee-based derivation: detect the knee on the lambda=1 curve,
    read the lambda=0 curve at that same epoch, and combine."""
    if curve_lambda1.epochs != curve_lambda0.epochs:
        raise ValidationError(
            f"curves differ in epoch count: {curve_lambda1.epochs} "
            f"vs {curve_lambda0.epochs}"
        )
    knee_epoch = knee_point(curve_lambda1)
    l1_knee = curve_lambda1.loss_at_epoch(knee_epoch)
    l0_knee = curve_lambda0.loss_at_epoch(knee_epoch)
    return {
        "knee_epoch": knee_epoch,
        "l1_knee": l1_knee,
        "l0_knee": l0_knee,
        "lambda": lambda_from_knees(l0_knee, l1_knee),
    }


def read_loss_curve(path, lambda_setting: float) -> LossCurve:
    """Parse an "epoch,loss" CSV; epochs must be consecutive integers."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["epoch", "loss"]:
            raise ValidationError(f"{path}: expected header 'epoch,loss'")
        epochs, losses = [], []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                epochs.append(int(row[0]))
                losses.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise ValidationError(f"{path}: line {row_no}: {exc}") from exc
    if len(losses) < 2:
        raise ValidationError(f"{path}: a loss curve needs at least 2 epochs")
    for prev, cur in zip(epochs, epochs[1:]):
        if cur != prev + 1:
            raise ValidationError(f"{path}: epochs must be consecutive integers")
    return LossCurve(
        lambda_setting=lambda_setting,
        per_epoch_loss=tuple(losses),
        first_epoch=epochs[0],
    )


def write_loss_curve(curve: LossCurve, path) -> None:
    lines = ["epoch,loss"]
    for i, loss in enumerate(curve.per_epoch_loss):
        lines.append(f"{curve.first_epoch + i},{format(loss, '.17g')}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_lambda_record(record: dict, path) -> None:
    Path(path).write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
