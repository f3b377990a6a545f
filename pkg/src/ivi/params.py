"""Model parameterization and the four reference parameter sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError
from .kernels import InputCurve, Kernel, ShiftedFractionalKernel, kernel_from_config

# (a, b, c, rho, V0, H, epsilon)
TABLE1 = {
    1: (0.02, -0.3, 0.3, -0.7, 0.02, 0.1, 0.0),
    2: (0.04, 0.0, 0.7, -0.7, 0.02, 0.1, 0.0),
    3: (0.04, 0.0, 0.7, -0.7, 0.02, -0.3, 0.0),
    4: (0.04, 0.0, 0.9, -0.7, 0.06, 0.0, 1 / 52),
}

MODEL_FIELDS = ("a", "b", "c", "rho", "V0", "T", "S0")


@dataclass(frozen=True)
class ModelParams:
    """Volterra Heston model with input curve g0(t) = V0 + a int_0^t K."""

    a: float
    b: float
    c: float
    rho: float
    V0: float
    kernel: Kernel
    T: float = 1.0
    S0: float = 1.0

    def __post_init__(self):
        for name in MODEL_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(f"model.{name}", f"must be a finite number, got {value!r}")
        if self.b > 0:
            raise ConfigError("model.b", f"must be <= 0, got {self.b}")
        if self.c < 0:
            raise ConfigError("model.c", f"must be >= 0, got {self.c}")
        if not -1 <= self.rho <= 1:
            raise ConfigError("model.rho", f"must lie in [-1, 1], got {self.rho}")
        if self.V0 < 0:
            raise ConfigError("model.V0", f"must be >= 0, got {self.V0}")
        if self.a < 0:
            raise ConfigError("model.a", f"must be >= 0, got {self.a}")
        if not self.T > 0:
            raise ConfigError("model.T", f"must be > 0, got {self.T}")
        if not self.S0 > 0:
            raise ConfigError("model.S0", f"must be > 0, got {self.S0}")
        if not isinstance(self.kernel, Kernel):
            raise ConfigError("kernel", f"expected a Kernel, got {type(self.kernel).__name__}")

    @property
    def curve(self):
        return InputCurve(V0=self.V0, a=self.a, kernel=self.kernel)

    def with_hurst(self, H):
        """Same model with a new Hurst index and the default beta for it."""
        k = self.kernel
        if not isinstance(k, ShiftedFractionalKernel):
            raise ConfigError("kernel.H", f"{k.family} kernels have no Hurst index")
        return replace(self, kernel=ShiftedFractionalKernel(H=H, epsilon=k.epsilon))

    def to_config(self):
        return {"model": {name: getattr(self, name) for name in MODEL_FIELDS}, "kernel": self.kernel.to_config()}

    @classmethod
    def from_config(cls, cfg):
        model = cfg.get("model")
        if not isinstance(model, dict):
            raise ConfigError("model", "missing or not an object")
        kernel_cfg = cfg.get("kernel")
        if not isinstance(kernel_cfg, dict):
            raise ConfigError("kernel", "missing or not an object")
        unknown = set(model) - set(MODEL_FIELDS)
        if unknown:
            raise ConfigError(f"model.{sorted(unknown)[0]}", "unknown field")
        kwargs = {}
        for name in MODEL_FIELDS:
            if name in model:
                kwargs[name] = model[name]
            elif name not in ("T", "S0"):
                raise ConfigError(f"model.{name}", "missing")
        return cls(kernel=kernel_from_config(kernel_cfg), **kwargs)


def table1_case(case, T=1.0, S0=1.0):
    try:
        a, b, c, rho, V0, H, eps = TABLE1[int(case)]
    except (KeyError, ValueError):
        raise ConfigError("case", f"must be one of 1, 2, 3, 4, got {case!r}") from None
    return ModelParams(a=a, b=b, c=c, rho=rho, V0=V0, kernel=ShiftedFractionalKernel(H=H, epsilon=eps), T=T, S0=S0)
