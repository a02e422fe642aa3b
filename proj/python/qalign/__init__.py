"""Python bindings for the qalign C++ engine."""

import json as _json

from . import _qalign
from ._qalign import (
    EnumerableSpace,
    QAlignError,
    acceptance_probability,
    beta_star,
    bon_max_density,
    curve,
    exact_target,
    extract_answer,
    fit_reward_mixture,
    gumbel_approx,
    gumbel_approx_normal,
    is_weights,
    kernel_check,
    mbr_select,
    run,
    run_chain,
)


def parse_toml(text):
    """Parse the supported TOML subset into a dict."""
    return _json.loads(_qalign.parse_toml(text))


def verify(only=(), mutation=None):
    """Run acceptance criteria and return the report as a dict."""
    return _json.loads(_qalign.verify(list(only), mutation))


def space_to_dict(space):
    return _json.loads(space.to_json_text())


__all__ = [
    "EnumerableSpace",
    "QAlignError",
    "acceptance_probability",
    "beta_star",
    "bon_max_density",
    "curve",
    "exact_target",
    "extract_answer",
    "fit_reward_mixture",
    "gumbel_approx",
    "gumbel_approx_normal",
    "is_weights",
    "kernel_check",
    "mbr_select",
    "parse_toml",
    "run",
    "run_chain",
    "space_to_dict",
    "verify",
]
