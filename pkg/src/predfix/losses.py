"""Semi-supervised loss stack over Beta-Bernoulli predictions.

The supervised term is the quadrature negative log-likelihood of the
labeled binary values under each variable's Beta distribution, optionally
class-weighted and regularized toward the uniform Beta when wrong.  The
unsupervised term is the instance objective at the soft assignment plus
a squared hinge on constraint violations.  Losses are summed, not
averaged; instances without labels contribute only the unsupervised
part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import autodiff as ad
from .errors import EmptyDataset, NonFiniteValue
from .milp import MilpInstance
from .quadrature import QuadratureTable, cc_table

_MAX_ORDER = 512
_RATE_CLAMP = 1e-3


@dataclass(frozen=True)
class Schedule:
    """Linear warm-up between two values, then a linear ramp to a final one.

    value(0) == warmup_start; value(warmup_steps) == warmup_end;
    value(total_steps) == final; flat afterwards.
    """

    warmup_start: float
    warmup_end: float
    final: float
    warmup_steps: int
    total_steps: int

    def value(self, step: int) -> float:
        if self.warmup_steps > 0 and step < self.warmup_steps:
            frac = step / self.warmup_steps
            return self.warmup_start + (self.warmup_end - self.warmup_start) * frac
        span = self.total_steps - self.warmup_steps
        if span <= 0:
            return self.final if step >= self.total_steps else self.warmup_end
        frac = min(1.0, (step - self.warmup_steps) / span)
        return self.warmup_end + (self.final - self.warmup_end) * frac

    @staticmethod
    def constant(value: float) -> "Schedule":
        return Schedule(value, value, value, 0, 0)


@dataclass
class LossWeights:
    """Mixing weights and per-variable class rates for one training run."""

    lam: Schedule
    lam_reg: Schedule
    lam_c: Schedule
    class_rates: np.ndarray | None = None
    use_class_weights: bool = False


def closed_form_marginal(alpha, beta, z):
    """Conjugacy oracle: P(z) = z*a/(a+b) + (1-z)*b/(a+b)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    z = np.asarray(z, dtype=float)
    mean = alpha / (alpha + beta)
    out = z * mean + (1.0 - z) * (1.0 - mean)
    return float(out) if out.ndim == 0 else out


def _log_beta_fn(alpha: ad.Tensor, beta: ad.Tensor) -> ad.Tensor:
    return ad.sub(ad.add(ad.lgamma(alpha), ad.lgamma(beta)), ad.lgamma(ad.add(alpha, beta)))


def _marginal_tensor(alpha: ad.Tensor, beta: ad.Tensor, z: np.ndarray, table) -> ad.Tensor:
    """Quadrature estimate of the Beta-Bernoulli marginal, one per variable."""
    n = alpha.shape[0]
    log_p = np.log(np.maximum(table.nodes, 1e-300))[None, :]
    log_q = np.log(np.maximum(1.0 - table.nodes, 1e-300))[None, :]
    a1 = ad.reshape(ad.add(alpha, ad.constant(z - 1.0)), (n, 1))  # alpha - 1 + z
    b1 = ad.reshape(ad.sub(beta, ad.constant(z)), (n, 1))  # beta - z
    log_b = ad.reshape(_log_beta_fn(alpha, beta), (n, 1))
    upper = ad.exp(ad.sub(ad.add(ad.mul(a1, log_p), ad.mul(b1, log_q)), log_b))
    lower = ad.exp(ad.sub(ad.add(ad.mul(a1, log_q), ad.mul(b1, log_p)), log_b))
    weighted = ad.mul(ad.constant(table.weights[None, :]), ad.add(upper, lower))
    return ad.reshape(ad.sum_(weighted, axis=1), (n,))


def nll_tensor(
    alpha: ad.Tensor, beta: ad.Tensor, z: np.ndarray, table: QuadratureTable
) -> ad.Tensor:
    """Per-variable -log marginal; doubles the order (up to 512) if the
    quadrature sum is not strictly positive."""
    while True:
        marginal = _marginal_tensor(alpha, beta, z, table)
        if np.all(marginal.value > 0.0):
            return ad.neg(ad.log(marginal))
        if table.order * 2 > _MAX_ORDER:
            raise NonFiniteValue(
                f"quadrature sum <= 0 at order {table.order}; giving up at {_MAX_ORDER}"
            )
        table = cc_table(table.order * 2)


def beta_bernoulli_nll(alpha, beta, z, table: QuadratureTable | None = None):
    """Scalar/vector NLL for plain numbers (no gradient tracking)."""
    if table is None:
        table = cc_table()
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    z = np.broadcast_to(np.asarray(z, dtype=float), alpha.shape)
    out = nll_tensor(ad.constant(alpha), ad.constant(beta), np.array(z), table).value
    return float(out[0]) if out.size == 1 else out


def regularizer_tensor(alpha: ad.Tensor, beta: ad.Tensor, z: np.ndarray) -> ad.Tensor:
    """((1-z)a + z*b)/(a+b) * KL(U(0,1) || Beta(a,b)), elementwise.

    The KL factor is a + b - 2 + log B(a, b); it vanishes only at the
    uniform a = b = 1 and is nonnegative for a, b >= 1.
    """
    z = np.asarray(z, dtype=float)
    wrong_mass = ad.div(
        ad.add(ad.mul(ad.constant(1.0 - z), alpha), ad.mul(ad.constant(z), beta)),
        ad.add(alpha, beta),
    )
    kl = ad.add(ad.sub(ad.add(alpha, beta), 2.0), _log_beta_fn(alpha, beta))
    return ad.mul(wrong_mass, kl)


def regularizer(alpha, beta, z):
    """Plain-number version of the regularization term."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    z = np.broadcast_to(np.asarray(z, dtype=float), alpha.shape)
    out = regularizer_tensor(ad.constant(alpha), ad.constant(beta), np.array(z)).value
    return float(out[0]) if out.size == 1 else out


def regularizer_integral(alpha: float, beta: float, z: float) -> float:
    """Numeric-integration oracle for the regularizer (scipy quadrature)."""
    from scipy.integrate import quad

    log_b = gammaln(alpha) + gammaln(beta) - gammaln(alpha + beta)

    def log_density(p):
        return (alpha - 1) * np.log(p) + (beta - 1) * np.log1p(-p) - log_b

    distance, _ = quad(lambda p: np.exp(log_density(p)) * abs(z - p), 0.0, 1.0, limit=200)
    kl, _ = quad(lambda p: -log_density(p), 0.0, 1.0, limit=200)
    return distance * kl


def class_rates(series_list) -> np.ndarray:
    """Fraction of labeled instances with z*_j = 1, clamped away from {0, 1}."""
    counts = None
    total = 0
    for series in series_list:
        for inst, label in zip(series.instances, series.labels):
            if label is None or label.assignment is None:
                continue
            zb = label.assignment[: inst.n_binary]
            if counts is None:
                counts = np.zeros(inst.n_binary)
            counts += zb
            total += 1
    if counts is None:
        raise EmptyDataset("no labeled instances to estimate class rates from")
    return np.clip(counts / total, _RATE_CLAMP, 1.0 - _RATE_CLAMP)


def soft_assignment(alpha: ad.Tensor, beta: ad.Tensor, sharpness: float | None = None) -> ad.Tensor:
    """sigmoid of the Beta mean; the optional sharpened form
    sigmoid(k*(mean - 1/2)) is off by default."""
    mu = ad.div(alpha, ad.add(alpha, beta))
    if sharpness is None:
        return ad.sigmoid(mu)
    return ad.sigmoid(ad.mul(sharpness, ad.sub(mu, 0.5)))


def unsupervised_loss(
    instance: MilpInstance, zb_hat: ad.Tensor, zc_hat: ad.Tensor, lam_c: float
) -> ad.Tensor:
    """c'z_hat + lam_c * ||max(A z_hat - b, 0)||^2 on a normalized instance."""
    z_hat = ad.concat([zb_hat, zc_hat], axis=0)
    obj = ad.sum_(ad.mul(ad.constant(instance.c), z_hat))
    if instance.n_rows == 0:
        return obj
    residual = ad.sub(
        ad.spmatmul(instance.a, ad.reshape(z_hat, (instance.n_vars, 1))),
        ad.constant(instance.b[:, None]),
    )
    violation = ad.relu(residual)
    return ad.add(obj, ad.mul(lam_c, ad.sum_(ad.mul(violation, violation))))


def stacked_supervised_loss(
    outputs,
    labels,
    table: QuadratureTable,
    lam_reg: float = 0.0,
    class_rate_vec: np.ndarray | None = None,
    use_class_weights: bool = False,
) -> ad.Tensor:
    """`supervised_loss` with the labeled members concatenated into one
    NLL/regularizer evaluation; the sums are identical, the graph is not
    member-by-member."""
    picked = [
        (out, lab)
        for out, lab in zip(outputs, labels)
        if lab is not None and lab.assignment is not None
    ]
    if not picked:
        return ad.constant(0.0)
    alpha = ad.concat([out.alpha for out, _ in picked], axis=0)
    beta = ad.concat([out.beta for out, _ in picked], axis=0)
    zb = np.concatenate(
        [np.asarray(lab.assignment[: out.alpha.shape[0]], dtype=float) for out, lab in picked]
    )
    nll = nll_tensor(alpha, beta, zb, table)
    if use_class_weights and class_rate_vec is not None:
        tiled = np.concatenate([class_rate_vec] * len(picked))
        weight = tiled**zb * (1.0 - tiled) ** (1.0 - zb)
        nll = ad.div(nll, ad.constant(weight))
    total = ad.sum_(nll)
    if lam_reg != 0.0:
        total = ad.add(total, ad.mul(lam_reg, ad.sum_(regularizer_tensor(alpha, beta, zb))))
    return total


def stacked_unsupervised_loss(batch, outputs, lam_c: float) -> ad.Tensor:
    """Sum of per-member unsupervised losses evaluated through the batch's
    block-diagonal union system in one pass."""
    parts = []
    for out in outputs:
        parts.append(soft_assignment(out.alpha, out.beta))
        parts.append(out.z_continuous)
    z_hat = ad.concat(parts, axis=0)
    obj = ad.sum_(ad.mul(ad.constant(batch.c_union), z_hat))
    if batch.b_union.size == 0:
        return obj
    residual = ad.sub(
        ad.spmatmul(
            batch.a_union,
            ad.reshape(z_hat, (len(batch.c_union), 1)),
            matrix_t=batch.a_union_t,
        ),
        ad.constant(batch.b_union[:, None]),
    )
    violation = ad.relu(residual)
    return ad.add(obj, ad.mul(lam_c, ad.sum_(ad.mul(violation, violation))))


def supervised_loss(
    outputs,
    labels,
    table: QuadratureTable,
    lam_reg: float = 0.0,
    class_rate_vec: np.ndarray | None = None,
    use_class_weights: bool = False,
) -> ad.Tensor:
    """Sum of (optionally weighted) NLL plus lam_reg * regularizer over
    labeled members; unlabeled members are masked out entirely."""
    terms = []
    for output, label in zip(outputs, labels):
        if label is None or label.assignment is None:
            continue
        nb = output.alpha.shape[0]
        zb = np.asarray(label.assignment[:nb], dtype=float)
        nll = nll_tensor(output.alpha, output.beta, zb, table)
        if use_class_weights and class_rate_vec is not None:
            weight = class_rate_vec**zb * (1.0 - class_rate_vec) ** (1.0 - zb)
            nll = ad.div(nll, ad.constant(weight))
        term = ad.sum_(nll)
        if lam_reg != 0.0:
            reg = ad.sum_(regularizer_tensor(output.alpha, output.beta, zb))
            term = ad.add(term, ad.mul(lam_reg, reg))
        terms.append(term)
    if not terms:
        return ad.constant(0.0)
    total = terms[0]
    for term in terms[1:]:
        total = ad.add(total, term)
    return total
