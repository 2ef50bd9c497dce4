"""Central finite-difference verification of analytic gradients."""

import numpy as np

from .functional import freeze_branches, record_branches
from .tensor import Tensor


def relative_error(analytic, numeric, floor):
    """``|a - n| / max(|a|, |n|, floor)`` elementwise."""
    analytic, numeric = np.asarray(analytic, float), np.asarray(numeric, float)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(loss_fn, tensors, epsilon=1e-6, n_coords=20, seed=0, floor_ratio=1e-3,
               freeze_kinks=True, details=None, reference=None, method="central"):
    """Compare backprop gradients of ``loss_fn()`` against central differences.

    Parameters
    ----------
    loss_fn : callable returning a scalar :class:`Tensor`
        Re-evaluated for every perturbation, so it must be deterministic.
    tensors : dict of name -> Tensor
        Leaves whose gradients are checked (parameters and/or the input).
    epsilon : float
        Perturbation size.
    n_coords : int
        Coordinates checked per tensor (all of them when the tensor is smaller).
    floor_ratio : float
        Denominator floor as a fraction of the tensor's largest sampled
        gradient, so coordinates with near-zero gradient are judged on the
        tensor's own scale.
    freeze_kinks : bool
        Evaluate the perturbed losses with the branch decisions (ReLU masks,
        pooling argmaxes, Max-out choices) of the unperturbed pass, i.e. on
        the smooth piece whose derivative backprop returns. Without it a step
        that straddles a kink compares against a different piece.
    details : dict, optional
        Filled with ``{name: {"checked": k, "size": n, "crossed": j}}`` where ``crossed``
        counts steps that would have changed a branch decision.
    reference : (loss_fn, tensors), optional
        Take the finite differences on this pair instead, e.g. a float64 copy
        of a float32 model, so that low-precision backprop is compared with
        differences free of float32 round-off.

    method : {"central", "ridders"}
        ``"central"`` takes one symmetric difference with step ``epsilon``.
        ``"ridders"`` starts at ``epsilon`` and extrapolates differences over
        halving steps to zero, keeping the estimate with the smallest
        internal error; it copes with coordinates whose curvature varies by
        orders of magnitude within one loss.

    Returns
    -------
    dict of name -> worst relative error
    """
    if method not in ("central", "ridders"):
        raise ValueError(f"method must be 'central' or 'ridders', got {method!r}")
    rng = np.random.default_rng(seed)
    for t in tensors.values():
        t.grad = None
        t.requires_grad = True
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("loss is not finite")
    loss.backward()
    num_fn, num_tensors = reference or (loss_fn, tensors)
    with record_branches() as base:
        num_fn()

    def evaluate():
        with record_branches() as rec:
            if freeze_kinks:
                with freeze_branches(base.decisions):
                    value = float(num_fn().data)
            else:
                value = float(num_fn().data)
        return value, rec

    report = {}
    for name, t in tensors.items():
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad.copy()
        flat = num_tensors[name].data.reshape(-1)
        picks = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
        numeric, crossed = [], 0
        for idx in picks:
            orig = flat[idx]
            crossings = [0]

            def central(h):
                flat[idx] = orig + h
                up, rec_up = evaluate()
                flat[idx] = orig - h
                down, rec_down = evaluate()
                flat[idx] = orig
                if not (np.isfinite(up) and np.isfinite(down)):
                    raise FloatingPointError(f"non-finite loss while perturbing {name}")
                crossings[0] |= not (base.same_as(rec_up) and base.same_as(rec_down))
                return (up - down) / (2 * h)

            if method == "central":
                numeric.append(central(epsilon))
            else:
                numeric.append(ridders(central, epsilon))
            crossed += crossings[0]
        if details is not None:
            details[name] = {"checked": len(picks), "size": flat.size, "crossed": crossed}
        a = analytic.reshape(-1)[picks]
        numeric = np.array(numeric)
        floor = floor_ratio * max(np.abs(a).max(), np.abs(numeric).max(), 1e-30)
        report[name] = float(relative_error(a, numeric, floor).max())
    return report


def ridders(central, h, shrink=2.0, n_steps=10, safe=2.0):
    """Extrapolate ``central(h)`` to ``h -> 0`` (Neville tableau over ``h / shrink**i``)."""
    table = [[central(h)]]
    best, err = table[0][0], np.inf
    c2 = shrink**2
    for i in range(1, n_steps):
        h /= shrink
        row = [central(h)]
        fac = c2
        for j in range(1, i + 1):
            row.append((row[j - 1] * fac - table[i - 1][j - 1]) / (fac - 1))
            fac *= c2
            e = max(abs(row[j] - row[j - 1]), abs(row[j] - table[i - 1][j - 1]))
            if e <= err:
                best, err = row[j], e
        table.append(row)
        if abs(row[i] - table[i - 1][i - 1]) >= safe * err:
            break
    return best


def random_projection_loss(out, seed=0):
    """Scalar ``sum(out * r)`` with a fixed random ``r``, for checking non-scalar ops.

    ``r`` depends only on ``seed`` and the shape, so repeated calls inside a
    finite-difference loop see the same projection. The reduction runs in
    float64 so single-precision checks are limited by the op's own rounding.
    """
    r = Tensor(np.random.default_rng(seed).standard_normal(out.shape))
    return (out.astype(np.float64) * r).sum()
