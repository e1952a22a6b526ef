"""Parse expression strings ("x1^2 + x2^2 - 1") into vectorized numpy callables."""
from functools import lru_cache

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .exceptions import SpecError

_TRANSFORMS = standard_transformations + (convert_xor,)
_FUNCTIONS = {
    name: getattr(sympy, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "atan", "pi", "Abs")
}
_FUNCTIONS["abs"] = sympy.Abs


def variable_names(prefix, count):
    return tuple(f"{prefix}{i + 1}" for i in range(count))


def parse(expr, names):
    """Parse ``expr`` over the declared variable ``names``; reject anything else."""
    if not isinstance(expr, (str, int, float)):
        raise SpecError(f"expression must be a string, got {type(expr).__name__}")
    symbols = {name: sympy.Symbol(name, real=True) for name in names}
    try:
        parsed = parse_expr(str(expr), local_dict={**_FUNCTIONS, **symbols}, transformations=_TRANSFORMS)
    except Exception as exc:  # sympy raises a zoo of types here
        raise SpecError(f"cannot parse expression {expr!r}: {exc}") from exc
    if not isinstance(parsed, sympy.Expr):
        raise SpecError(f"expression {expr!r} is not a scalar expression")
    unknown = sorted(str(s) for s in parsed.free_symbols if str(s) not in names)
    if unknown:
        raise SpecError(f"expression {expr!r} references undeclared variables {unknown}")
    return parsed


class CompiledSystem:
    """A list of scalar expressions with value and Jacobian evaluated row-wise on (N, k) arrays."""

    def __init__(self, exprs, names):
        self.source = tuple(str(e) for e in exprs)
        self.names = tuple(names)
        symbols = [sympy.Symbol(name, real=True) for name in names]
        parsed = [parse(e, names) for e in exprs]
        self.m = len(parsed)
        self.k = len(names)
        self.degrees = []
        for p in parsed:
            try:
                self.degrees.append(int(sympy.Poly(p, *symbols).total_degree()))
            except sympy.PolynomialError:
                self.degrees.append(0)
        self._f = sympy.lambdify(symbols, parsed, "numpy") if parsed else None
        entries = [sympy.diff(p, s) for p in parsed for s in symbols]
        self._j = sympy.lambdify(symbols, entries, "numpy") if entries else None

    def _stack(self, values, N):
        cols = [np.broadcast_to(np.asarray(v, dtype=np.float64), (N,)) for v in values]
        return np.stack(cols, axis=1) if cols else np.zeros((N, 0))

    def value(self, X):
        X = np.asarray(X, dtype=np.float64)
        N = X.shape[0]
        if self.m == 0:
            return np.zeros((N, 0))
        with np.errstate(all="ignore"):
            return self._stack(self._f(*X.T), N)

    def jacobian(self, X):
        X = np.asarray(X, dtype=np.float64)
        N = X.shape[0]
        if self.m == 0:
            return np.zeros((N, 0, self.k))
        with np.errstate(all="ignore"):
            flat = self._stack(self._j(*X.T), N)
        return flat.reshape(N, self.m, self.k)

    def scale(self, X):
        """Per-row, per-equation residual scale max(1, |x|)^degree."""
        r = np.maximum(1.0, np.linalg.norm(X, axis=1))
        return r[:, None] ** np.asarray(self.degrees, dtype=np.float64)[None, :]


@lru_cache(maxsize=256)
def compile_system(exprs, names):
    return CompiledSystem(exprs, names)
